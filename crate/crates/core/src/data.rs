//! Triplet generation, keep/flip routing, pointwise aggregation, and the
//! on-disk formats for labeled examples and triplets.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior;
use crate::rng::{Seed, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    /// Accepts exactly `+1.0` and `-1.0`.
    pub fn from_sign(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Label::Positive)
        } else if v == -1.0 {
            Ok(Label::Negative)
        } else {
            Err(Error::InvalidLabel(v))
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_bernoulli(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: Vec<f64>,
    pub y: Label,
}

/// User feedback on a displayed triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    /// The first item is at least as similar to the second as to the third.
    Keep,
    /// The first item is more similar to the third.
    Flip,
}

/// Feedback a user gives for a triplet with hidden labels `(y_a, y_b, y_c)`.
///
/// Only `(+, -, +)` and `(-, +, -)` are flipped. Ties (the anchor shares its
/// label with both others, or with neither) are kept.
pub fn route_label_pattern(y_a: Label, y_b: Label, y_c: Label) -> Feedback {
    if y_a == y_c && y_a != y_b {
        Feedback::Flip
    } else {
        Feedback::Keep
    }
}

/// [`route_label_pattern`] on raw `±1` values.
pub fn route_label_values(y_a: f64, y_b: f64, y_c: f64) -> Result<Feedback> {
    Ok(route_label_pattern(
        Label::from_sign(y_a)?,
        Label::from_sign(y_b)?,
        Label::from_sign(y_c)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Triplet {
    fn dims(&self) -> [usize; 3] {
        [self.a.len(), self.b.len(), self.c.len()]
    }
}

/// Triplets partitioned by feedback. No labels are retained.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TripletDataset {
    pub keep: Vec<Triplet>,
    pub flip: Vec<Triplet>,
    pub dim: usize,
}

impl TripletDataset {
    pub fn new(dim: usize) -> Self {
        Self {
            keep: Vec::new(),
            flip: Vec::new(),
            dim,
        }
    }

    pub fn push(&mut self, feedback: Feedback, triplet: Triplet) -> Result<()> {
        for found in triplet.dims() {
            if found != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found,
                });
            }
        }
        match feedback {
            Feedback::Keep => self.keep.push(triplet),
            Feedback::Flip => self.flip.push(triplet),
        }
        Ok(())
    }

    pub fn n_keep(&self) -> usize {
        self.keep.len()
    }

    pub fn n_flip(&self) -> usize {
        self.flip.len()
    }

    pub fn len(&self) -> usize {
        self.keep.len() + self.flip.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn estimate_pi_t(&self) -> Result<f64> {
        prior::estimate_pi_t(self.n_keep(), self.n_flip())
    }

    pub fn estimate_prior(&self) -> Result<f64> {
        prior::estimate_prior(self.n_keep(), self.n_flip())
    }
}

/// Row-major block of feature vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet {
    dim: usize,
    values: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            values: Vec::new(),
        }
    }

    pub fn from_rows<I, R>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        let mut set = Self::new(dim);
        for r in rows {
            set.push(r.as_ref())?;
        }
        Ok(set)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: row.len(),
            });
        }
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        self.values.chunks_exact(self.dim.max(1)).take(self.len())
    }
}

/// The three pointwise bags.
///
/// `bag1` pools the first and third items of every triplet, `bag2` the middle
/// items of kept triplets, `bag3` the middle items of flipped triplets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointwiseBags {
    pub bag1: PointSet,
    pub bag2: PointSet,
    pub bag3: PointSet,
}

impl PointwiseBags {
    pub fn dim(&self) -> usize {
        self.bag1.dim()
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.bag1.len(), self.bag2.len(), self.bag3.len())
    }

    pub fn bags(&self) -> [(&'static str, &PointSet); 3] {
        [("bag1", &self.bag1), ("bag2", &self.bag2), ("bag3", &self.bag3)]
    }

    pub fn require_nonempty(&self) -> Result<()> {
        for (name, bag) in self.bags() {
            if bag.is_empty() {
                return Err(Error::EmptyBag(name));
            }
        }
        Ok(())
    }

    /// All points in the three bags, in bag order.
    pub fn all_points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.bag1
            .rows()
            .chain(self.bag2.rows())
            .chain(self.bag3.rows())
    }
}

/// Splits triplets into pointwise bags. `bag1` is ordered kept-first-items,
/// kept-third-items, flipped-first-items, flipped-third-items.
pub fn aggregate_pointwise(data: &TripletDataset) -> PointwiseBags {
    let d = data.dim;
    let mut bags = PointwiseBags {
        bag1: PointSet::new(d),
        bag2: PointSet::new(d),
        bag3: PointSet::new(d),
    };
    // Dimensions were checked when the triplets entered the dataset.
    let push = |set: &mut PointSet, row: &[f64]| set.values.extend_from_slice(row);
    for t in &data.keep {
        push(&mut bags.bag1, &t.a);
    }
    for t in &data.keep {
        push(&mut bags.bag1, &t.c);
    }
    for t in &data.flip {
        push(&mut bags.bag1, &t.a);
    }
    for t in &data.flip {
        push(&mut bags.bag1, &t.c);
    }
    for t in &data.keep {
        push(&mut bags.bag2, &t.b);
    }
    for t in &data.flip {
        push(&mut bags.bag3, &t.b);
    }
    bags
}

/// A source of i.i.d. labeled examples.
///
/// `draw_index` numbers the draws within one generation run; sources that
/// sample with replacement ignore it.
pub trait LabeledSource: Sync {
    fn dim(&self) -> usize;

    fn draw(&self, draw_index: u64, rng: &mut StreamRng) -> Result<LabeledExample>;
}

/// Two isotropic Gaussian classes with a shared standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mu_plus: Vec<f64>,
    pub mu_minus: Vec<f64>,
    pub sigma: f64,
    pub pi_plus: f64,
}

impl GaussianSpec {
    pub fn new(mu_plus: Vec<f64>, mu_minus: Vec<f64>, sigma: f64, pi_plus: f64) -> Result<Self> {
        let spec = Self {
            mu_plus,
            mu_minus,
            sigma,
            pi_plus,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu_plus.len() != self.mu_minus.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mu_plus.len(),
                found: self.mu_minus.len(),
            });
        }
        if self.mu_plus.is_empty() {
            return Err(Error::Config("Gaussian means must be non-empty".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Domain {
                what: "sigma",
                value: self.sigma,
            });
        }
        if !(0.0..=1.0).contains(&self.pi_plus) {
            return Err(Error::Domain {
                what: "pi_plus",
                value: self.pi_plus,
            });
        }
        Ok(())
    }

    /// Same class-conditionals with a different class prior.
    pub fn with_prior(&self, pi_plus: f64) -> Self {
        Self {
            pi_plus,
            ..self.clone()
        }
    }

    fn sample(&self, rng: &mut StreamRng) -> LabeledExample {
        let y = Label::from_bernoulli(rng.random::<f64>() < self.pi_plus);
        let mu = match y {
            Label::Positive => &self.mu_plus,
            Label::Negative => &self.mu_minus,
        };
        let x = mu
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + self.sigma * z
            })
            .collect();
        LabeledExample { x, y }
    }
}

impl LabeledSource for GaussianSpec {
    fn dim(&self) -> usize {
        self.mu_plus.len()
    }

    fn draw(&self, _draw_index: u64, rng: &mut StreamRng) -> Result<LabeledExample> {
        Ok(self.sample(rng))
    }
}

/// `n` examples from the Gaussian pair; example `i` uses substream `i` of
/// `seed`, so the sequence is a deterministic function of the seed.
pub fn sample_gaussian(spec: &GaussianSpec, n: usize, seed: Seed) -> Result<Vec<LabeledExample>> {
    spec.validate()?;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| spec.sample(&mut seed.stream(i)))
        .collect())
}

/// How a [`PoolSource`] picks examples from its pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PoolSampling {
    /// Uniform with replacement; the class prior is the pool's own.
    Uniform,
    /// Label drawn with the given positive rate, then a uniform example of
    /// that class, with replacement.
    TargetPrior(f64),
    /// Each example at most once, in a seeded random order. Draws are not
    /// independent, so the estimator's guarantees do not strictly apply.
    WithoutReplacement,
}

/// A finite labeled pool used as a triplet source.
#[derive(Debug, Clone)]
pub struct PoolSource {
    examples: Vec<LabeledExample>,
    dim: usize,
    sampling: PoolSampling,
    positives: Vec<usize>,
    negatives: Vec<usize>,
    order: Vec<usize>,
}

impl PoolSource {
    /// `seed` only matters for [`PoolSampling::WithoutReplacement`].
    pub fn new(examples: Vec<LabeledExample>, sampling: PoolSampling, seed: Seed) -> Result<Self> {
        let dim = check_dims(&examples)?;
        if examples.is_empty() {
            return Err(Error::DegenerateData("labeled pool is empty".into()));
        }
        let (positives, negatives): (Vec<usize>, Vec<usize>) =
            (0..examples.len()).partition(|&i| examples[i].y == Label::Positive);
        if let PoolSampling::TargetPrior(p) = sampling {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain {
                    what: "pi_plus",
                    value: p,
                });
            }
            if (p > 0.0 && positives.is_empty()) || (p < 1.0 && negatives.is_empty()) {
                return Err(Error::DegenerateData(
                    "pool lacks a class required by the target prior".into(),
                ));
            }
        }
        let mut order: Vec<usize> = Vec::new();
        if sampling == PoolSampling::WithoutReplacement {
            order = (0..examples.len()).collect();
            order.shuffle(&mut seed.stream(0));
        }
        Ok(Self {
            examples,
            dim,
            sampling,
            positives,
            negatives,
            order,
        })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }
}

impl LabeledSource for PoolSource {
    fn dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, draw_index: u64, rng: &mut StreamRng) -> Result<LabeledExample> {
        let idx = match self.sampling {
            PoolSampling::Uniform => rng.random_range(0..self.examples.len()),
            PoolSampling::TargetPrior(p) => {
                let class = if rng.random::<f64>() < p {
                    &self.positives
                } else {
                    &self.negatives
                };
                class[rng.random_range(0..class.len())]
            }
            PoolSampling::WithoutReplacement => *self
                .order
                .get(draw_index as usize)
                .ok_or(Error::SourceExhausted {
                    available: self.order.len(),
                })?,
        };
        Ok(self.examples[idx].clone())
    }
}

/// Draws `n` triplets of independent examples and routes them by their
/// hidden labels. Triplet `i` uses substream `i` of `seed` and draw indices
/// `3i..3i+3`; labels are discarded.
pub fn generate_triplets<S: LabeledSource + ?Sized>(
    source: &S,
    n: usize,
    seed: Seed,
) -> Result<TripletDataset> {
    let routed: Vec<(Feedback, Triplet)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i);
            let a = source.draw(3 * i, &mut rng)?;
            let b = source.draw(3 * i + 1, &mut rng)?;
            let c = source.draw(3 * i + 2, &mut rng)?;
            let feedback = route_label_pattern(a.y, b.y, c.y);
            Ok((
                feedback,
                Triplet {
                    a: a.x,
                    b: b.x,
                    c: c.x,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let mut data = TripletDataset::new(source.dim());
    for (feedback, t) in routed {
        data.push(feedback, t)?;
    }
    Ok(data)
}

fn check_dims(examples: &[LabeledExample]) -> Result<usize> {
    let dim = examples.first().map_or(0, |e| e.x.len());
    for e in examples {
        if e.x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: e.x.len(),
            });
        }
    }
    Ok(dim)
}

/// Per-feature z-scoring fitted on a training pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(examples: &[LabeledExample]) -> Result<Self> {
        let dim = check_dims(examples)?;
        if examples.is_empty() {
            return Err(Error::DegenerateData("cannot standardize an empty pool".into()));
        }
        let n = examples.len() as f64;
        let mut mean = vec![0.0; dim];
        for e in examples {
            for (m, v) in mean.iter_mut().zip(&e.x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for e in examples {
            for ((s, v), m) in var.iter_mut().zip(&e.x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        // constant features are centered but left unscaled
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &mut [f64]) {
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) / s;
        }
    }

    pub fn apply_all(&self, examples: &mut [LabeledExample]) {
        for e in examples {
            self.apply(&mut e.x);
        }
    }
}

fn parse_csv_label(field: &str) -> Option<Label> {
    match field.trim() {
        "+1" | "1" | "1.0" | "+1.0" => Some(Label::Positive),
        "-1" | "0" | "-1.0" | "0.0" => Some(Label::Negative),
        _ => None,
    }
}

/// Loads a labeled CSV: optional header, numeric features, label in the last
/// column as `+1/-1` or `1/0` (0 becomes -1).
pub fn load_labeled_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledExample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labeled_csv(file, path)
}

/// [`load_labeled_csv`] over any reader; `origin` is used in error messages.
pub fn read_labeled_csv<R: Read>(reader: R, origin: &Path) -> Result<Vec<LabeledExample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut examples = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let numeric: Option<Vec<f64>> = record
            .iter()
            .take(record.len().saturating_sub(1))
            .map(|f| f.parse::<f64>().ok())
            .collect();
        let is_first = width.is_none() && examples.is_empty();
        let label = record.get(record.len() - 1).and_then(parse_csv_label);
        let all_numeric = record.iter().all(|f| f.parse::<f64>().is_ok());
        if is_first && !all_numeric {
            // header row: fixes the width, contributes no example
            if record.len() < 2 {
                return Err(parse_err(line, "need at least one feature and a label".into()));
            }
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(parse_err(
                line,
                format!("expected {} columns, found {}", expected, record.len()),
            ));
        }
        if record.len() < 2 {
            return Err(parse_err(line, "need at least one feature and a label".into()));
        }
        let x = numeric.ok_or_else(|| parse_err(line, "non-numeric feature".into()))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(line, "non-finite feature".into()));
        }
        let y = label.ok_or_else(|| {
            parse_err(
                line,
                format!(
                    "label {:?} is not one of +1, -1, 1, 0",
                    record.get(record.len() - 1).unwrap_or("")
                ),
            )
        })?;
        examples.push(LabeledExample { x, y });
    }
    Ok(examples)
}

/// Writes examples as a headerless CSV with `+1`/`-1` labels.
pub fn write_labeled_csv(path: impl AsRef<Path>, examples: &[LabeledExample]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in examples {
        let mut line = String::new();
        for v in &e.x {
            line.push_str(&v.to_string());
            line.push(',');
        }
        line.push_str(match e.y {
            Label::Positive => "1",
            Label::Negative => "-1",
        });
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct TripletRecord {
    kind: Feedback,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

/// Writes one JSON object per line: kept triplets first, then flipped.
pub fn write_triplets<W: Write>(mut out: W, data: &TripletDataset) -> std::io::Result<()> {
    let tagged = data
        .keep
        .iter()
        .map(|t| (Feedback::Keep, t))
        .chain(data.flip.iter().map(|t| (Feedback::Flip, t)));
    for (kind, t) in tagged {
        let rec = TripletRecord {
            kind,
            a: t.a.clone(),
            b: t.b.clone(),
            c: t.c.clone(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_triplets(path: impl AsRef<Path>, data: &TripletDataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_triplets(BufWriter::new(file), data).map_err(|e| Error::io(path, e))
}

/// Reads a JSON-lines triplet file. Blank lines are skipped; every vector
/// must share the dimension of the first one.
pub fn read_triplets<R: BufRead>(reader: R, origin: &Path) -> Result<TripletDataset> {
    let mut data: Option<TripletDataset> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TripletRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let dataset = data.get_or_insert_with(|| TripletDataset::new(rec.a.len()));
        let triplet = Triplet {
            a: rec.a,
            b: rec.b,
            c: rec.c,
        };
        dataset.push(rec.kind, triplet).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
    }
    Ok(data.unwrap_or_default())
}

pub fn load_triplets(path: impl AsRef<Path>) -> Result<TripletDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_triplets(BufReader::new(file), path)
}
