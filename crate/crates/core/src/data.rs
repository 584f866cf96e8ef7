//! Datasets, synthetic survival-data generation, standardization and
//! stratified splitting.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::cox::SurvivalOutcome;
use crate::error::{invalid, Result};
use crate::expr::{self, Expr};
use crate::linalg::Matrix;
use crate::network::InputKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    /// Codes `0..labels.len()`, in first-appearance order of the labels.
    Categorical { labels: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default)]
    pub standardization: Option<Standardization>,
}

impl ColumnMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Continuous, standardization: None }
    }

    pub fn categorical(name: impl Into<String>, labels: Vec<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Categorical { labels }, standardization: None }
    }
}

/// Generator record kept with synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub formula: String,
    pub seed: u64,
    pub baseline: f64,
    /// True log-partial hazard of every row.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub columns: Vec<ColumnMeta>,
    pub outcome: SurvivalOutcome,
    #[serde(default)]
    pub provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(x: Matrix, columns: Vec<ColumnMeta>, outcome: SurvivalOutcome) -> Result<Self> {
        if columns.len() != x.cols() {
            return Err(invalid("column metadata length must match the covariate width"));
        }
        if outcome.len() != x.rows() {
            return Err(invalid("outcome length must match the row count"));
        }
        for (c, meta) in columns.iter().enumerate() {
            if let ColumnKind::Categorical { labels } = &meta.kind {
                let n = labels.len() as f64;
                if (0..x.rows()).any(|r| {
                    let v = x.get(r, c);
                    v < 0.0 || v >= n || v.fract() != 0.0
                }) {
                    return Err(invalid(format!("column {} holds codes outside 0..{}", meta.name, labels.len())));
                }
            }
        }
        Ok(Self { x, columns, outcome, provenance: None })
    }

    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub fn cols(&self) -> usize {
        self.x.cols()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Category labels per column, empty for continuous columns.
    pub fn labels(&self) -> Vec<Vec<String>> {
        self.columns
            .iter()
            .map(|c| match &c.kind {
                ColumnKind::Categorical { labels } => labels.clone(),
                ColumnKind::Continuous => Vec::new(),
            })
            .collect()
    }

    pub fn input_meta(&self) -> Vec<InputKind> {
        self.columns
            .iter()
            .map(|c| match &c.kind {
                ColumnKind::Continuous => InputKind::Continuous,
                ColumnKind::Categorical { labels } => InputKind::Categorical { categories: labels.len() },
            })
            .collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            columns: self.columns.clone(),
            outcome: self.outcome.select(idx),
            provenance: self.provenance.as_ref().map(|p| Provenance {
                theta: idx.iter().map(|&i| p.theta[i]).collect(),
                ..p.clone()
            }),
        }
    }

    pub fn true_theta(&self) -> Option<&[f64]> {
        self.provenance.as_ref().map(|p| p.theta.as_slice())
    }
}

/// Label-encodes values in first-appearance order.
pub fn encode_labels<S: AsRef<str>>(values: &[S]) -> (Vec<f64>, Vec<String>) {
    let mut labels: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let codes = values
        .iter()
        .map(|v| {
            let v = v.as_ref();
            let code = *index.entry(v.to_string()).or_insert_with(|| {
                labels.push(v.to_string());
                labels.len() - 1
            });
            code as f64
        })
        .collect();
    (codes, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SyntheticFormula {
    /// `5·exp(-2(x1² + x2²))`
    Gaussian,
    /// `tanh(5 x1) + sin(2π x2) + x3²`
    Shallow,
    /// `2·sqrt((x1 - x2)² + (x3 - x4)²)`
    Deep,
    /// `tanh(5(log x1 + |x2|))` with `x1` drawn from `[0.1, 1]`
    Difficult,
    /// `β·x`
    Linear { beta: Vec<f64> },
    /// Any expression accepted by [`expr::parse`].
    Custom { expression: String },
}

impl SyntheticFormula {
    /// Parses `gaussian | shallow | deep | difficult | linear | custom:<expr>`.
    /// `linear` takes its coefficients as `linear:1,0.5`; bare `linear`
    /// means `β = (1)`.
    pub fn from_name(text: &str) -> Result<Self> {
        let (head, tail) = match text.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (text, None),
        };
        match (head, tail) {
            ("gaussian", None) => Ok(Self::Gaussian),
            ("shallow", None) => Ok(Self::Shallow),
            ("deep", None) => Ok(Self::Deep),
            ("difficult", None) => Ok(Self::Difficult),
            ("linear", None) => Ok(Self::Linear { beta: vec![1.0] }),
            ("linear", Some(t)) => {
                let beta = t
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|_| invalid(format!("bad coefficient {s:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                if beta.is_empty() {
                    return Err(invalid("linear formula needs at least one coefficient"));
                }
                Ok(Self::Linear { beta })
            }
            ("custom", Some(t)) => {
                expr::parse(t)?;
                Ok(Self::Custom { expression: t.to_string() })
            }
            _ => Err(invalid(format!("unknown formula {text:?}"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Gaussian => "gaussian".into(),
            Self::Shallow => "shallow".into(),
            Self::Deep => "deep".into(),
            Self::Difficult => "difficult".into(),
            Self::Linear { beta } => {
                let parts: Vec<String> = beta.iter().map(|b| format!("{b}")).collect();
                format!("linear:{}", parts.join(","))
            }
            Self::Custom { expression } => format!("custom:{expression}"),
        }
    }

    fn expression(&self) -> Result<Expr> {
        let text = match self {
            Self::Gaussian => "5*exp(-2*(x1^2 + x2^2))".into(),
            Self::Shallow => "tanh(5*x1) + sin(2*pi*x2) + x3^2".into(),
            Self::Deep => "2*sqrt((x1 - x2)^2 + (x3 - x4)^2)".into(),
            Self::Difficult => "tanh(5*(log(x1) + abs(x2)))".into(),
            Self::Linear { beta } => {
                let parts: Vec<String> = beta.iter().enumerate().map(|(i, b)| format!("({b})*x{}", i + 1)).collect();
                parts.join(" + ")
            }
            Self::Custom { expression } => expression.clone(),
        };
        expr::parse(&text)
    }

    /// Number of signal covariates the formula reads.
    pub fn signal_dim(&self) -> Result<usize> {
        Ok(match self {
            Self::Gaussian | Self::Difficult => 2,
            Self::Shallow => 3,
            Self::Deep => 4,
            Self::Linear { beta } => beta.len(),
            Self::Custom { .. } => self.expression()?.arity(),
        })
    }

    fn default_ranges(&self, d: usize) -> Vec<[f64; 2]> {
        let mut r = vec![[-1.0, 1.0]; d];
        if let Self::Difficult = self {
            r[0] = [0.1, 1.0];
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub formula: SyntheticFormula,
    pub n_train: usize,
    pub n_test: usize,
    /// Constant baseline hazard.
    pub baseline: f64,
    /// Independent `U[-1, 1]` columns appended after the signal columns.
    pub noise_features: usize,
    /// Sampling range per signal column; defaults depend on the formula.
    #[serde(default)]
    pub ranges: Option<Vec<[f64; 2]>>,
    pub seed: u64,
    /// When off, every event time is observed.
    #[serde(default = "yes")]
    pub censoring: bool,
}

fn yes() -> bool {
    true
}

impl GeneratorSpec {
    pub fn new(formula: SyntheticFormula, n_train: usize, n_test: usize, seed: u64) -> Self {
        Self { formula, n_train, n_test, baseline: 0.01, noise_features: 2, ranges: None, seed, censoring: true }
    }
}

/// Draws train and test sets jointly. Event times are exponential with rate
/// `baseline·exp θ(x)`; censoring times (unless switched off) are uniform on
/// `[0, max event time]` over the combined sample.
pub fn generate(spec: &GeneratorSpec) -> Result<(Dataset, Dataset)> {
    if spec.n_train == 0 || spec.n_test == 0 {
        return Err(invalid("n_train and n_test must be at least 1"));
    }
    if !(spec.baseline > 0.0) || !spec.baseline.is_finite() {
        return Err(invalid("baseline hazard must be positive"));
    }
    let formula = spec.formula.expression()?;
    let d = spec.formula.signal_dim()?;
    let ranges = match &spec.ranges {
        Some(r) if r.len() != d => return Err(invalid(format!("expected {d} covariate ranges, got {}", r.len()))),
        Some(r) => r.clone(),
        None => spec.formula.default_ranges(d),
    };
    if ranges.iter().any(|[lo, hi]| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(invalid("covariate ranges must satisfy lo < hi"));
    }
    let width = d + spec.noise_features;
    let n = spec.n_train + spec.n_test;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = Vec::with_capacity(n * width);
    let mut theta = Vec::with_capacity(n);
    let mut event_times = Vec::with_capacity(n);
    for row in 0..n {
        let start = x.len();
        for [lo, hi] in &ranges {
            x.push(rng.random_range(*lo..*hi));
        }
        for _ in 0..spec.noise_features {
            x.push(rng.random_range(-1.0..1.0));
        }
        let th = formula.eval(&x[start..start + d]);
        let rate = spec.baseline * th.exp();
        if !th.is_finite() || !(rate > 0.0) || !rate.is_finite() {
            return Err(invalid(format!("formula is not finite at generated row {row}")));
        }
        let t: f64 = Exp::new(rate).map_err(|_| invalid(format!("bad hazard rate at row {row}")))?.sample(&mut rng);
        theta.push(th);
        event_times.push(t.max(f64::MIN_POSITIVE));
    }
    let t_max = event_times.iter().copied().fold(0.0, f64::max);
    let mut durations = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for &t in &event_times {
        if !spec.censoring {
            durations.push(t);
            events.push(true);
            continue;
        }
        let c: f64 = rng.random_range(0.0..t_max);
        let c = c.max(f64::MIN_POSITIVE);
        durations.push(t.min(c));
        events.push(t <= c);
    }
    let mut columns: Vec<ColumnMeta> = (0..d).map(|i| ColumnMeta::continuous(format!("x{}", i + 1))).collect();
    columns.extend((0..spec.noise_features).map(|i| ColumnMeta::continuous(format!("eps{}", i + 1))));
    let all = Dataset {
        x: Matrix::from_vec(n, width, x)?,
        columns,
        outcome: SurvivalOutcome::new(durations, events)?,
        provenance: Some(Provenance { formula: spec.formula.label(), seed: spec.seed, baseline: spec.baseline, theta }),
    };
    let train_idx: Vec<usize> = (0..spec.n_train).collect();
    let test_idx: Vec<usize> = (spec.n_train..n).collect();
    Ok((all.select_rows(&train_idx), all.select_rows(&test_idx)))
}

fn column_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Z-scores every continuous column with its own mean and sample standard
/// deviation. Constant columns are left unscaled.
pub fn standardize(ds: &Dataset) -> Dataset {
    let stats: Vec<Option<Standardization>> = ds
        .columns
        .iter()
        .enumerate()
        .map(|(c, meta)| match meta.kind {
            ColumnKind::Categorical { .. } => None,
            ColumnKind::Continuous => {
                let (mean, std) = column_stats(&ds.x.column(c));
                if std > 0.0 && std.is_finite() {
                    Some(Standardization { mean, std })
                } else {
                    log::warn!("column {} has zero variance and is left unscaled", meta.name);
                    None
                }
            }
        })
        .collect();
    apply_standardization(ds, &stats)
}

/// Applies given statistics (typically from the training set); `None`
/// leaves a column as it is.
pub fn apply_standardization(ds: &Dataset, stats: &[Option<Standardization>]) -> Dataset {
    let mut out = ds.clone();
    for (c, s) in stats.iter().enumerate().take(ds.cols()) {
        if let Some(s) = s {
            for r in 0..ds.rows() {
                out.x.set(r, c, (ds.x.get(r, c) - s.mean) / s.std);
            }
        }
        out.columns[c].standardization = *s;
    }
    out
}

/// Undoes [`apply_standardization`] and clears the recorded statistics.
pub fn invert_standardization(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    for (c, meta) in ds.columns.iter().enumerate() {
        if let Some(s) = meta.standardization {
            for r in 0..ds.rows() {
                out.x.set(r, c, ds.x.get(r, c) * s.std + s.mean);
            }
        }
        out.columns[c].standardization = None;
    }
    out
}

/// Splits rows proportionally within buckets of (event indicator, duration
/// quantile bin). Buckets with fewer than two rows are merged into a
/// neighbouring bin.
pub fn stratified_split(ds: &Dataset, test_fraction: f64, bins: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(invalid("test fraction must lie strictly between 0 and 1"));
    }
    let bins = bins.max(1);
    let t = ds.outcome.durations();
    let d = ds.outcome.events();
    let mut buckets: Vec<Vec<usize>> = Vec::new();
    for flag in [false, true] {
        let mut rows: Vec<usize> = (0..ds.rows()).filter(|&i| d[i] == flag).collect();
        rows.sort_by(|&a, &b| t[a].total_cmp(&t[b]).then(a.cmp(&b)));
        let m = rows.len();
        let mut groups: Vec<Vec<usize>> = (0..bins).map(|b| rows[b * m / bins..(b + 1) * m / bins].to_vec()).collect();
        groups.retain(|g| !g.is_empty());
        let mut merged: Vec<Vec<usize>> = Vec::new();
        for g in groups {
            match merged.last_mut() {
                Some(last) if last.len() < 2 || g.len() < 2 => {
                    log::warn!("merging a stratification bucket with fewer than two rows");
                    last.extend(g);
                }
                _ => merged.push(g),
            }
        }
        buckets.extend(merged);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut b in buckets {
        b.shuffle(&mut rng);
        let k = (b.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&b[..k]);
        train.extend_from_slice(&b[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if train.is_empty() || test.is_empty() {
        return Err(invalid("split leaves one side empty"));
    }
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::concordance_index;

    #[test]
    fn generated_sizes_and_columns() {
        let spec = GeneratorSpec::new(SyntheticFormula::Gaussian, 80, 20, 7);
        let (tr, te) = generate(&spec).unwrap();
        assert_eq!((tr.rows(), te.rows()), (80, 20));
        assert_eq!(tr.cols(), 4);
        assert_eq!(tr.names(), vec!["x1", "x2", "eps1", "eps2"]);
        let (tr2, _) = generate(&spec).unwrap();
        assert_eq!(tr, tr2);
    }

    #[test]
    fn difficult_first_column_range() {
        let (tr, _) = generate(&GeneratorSpec::new(SyntheticFormula::Difficult, 500, 10, 1)).unwrap();
        assert!(tr.x.column(0).iter().all(|v| (0.1..1.0).contains(v)));
    }

    #[test]
    fn true_theta_is_predictive() {
        let (_, te) = generate(&GeneratorSpec::new(SyntheticFormula::Gaussian, 8000, 2000, 7)).unwrap();
        let c = concordance_index(te.true_theta().unwrap(), &te.outcome).unwrap();
        assert!(c > 0.7, "{c}");
    }

    #[test]
    fn formula_names() {
        assert_eq!(SyntheticFormula::from_name("deep").unwrap(), SyntheticFormula::Deep);
        assert_eq!(
            SyntheticFormula::from_name("linear:1,-0.5").unwrap(),
            SyntheticFormula::Linear { beta: vec![1.0, -0.5] }
        );
        assert!(SyntheticFormula::from_name("custom:x1+bad(").is_err());
        assert!(SyntheticFormula::from_name("weibull").is_err());
        assert_eq!(SyntheticFormula::from_name("custom:x1*x3").unwrap().signal_dim().unwrap(), 3);
    }

    #[test]
    fn label_encoding_first_appearance() {
        let (codes, labels) = encode_labels(&["FH", "UH", "FH"]);
        assert_eq!(codes, vec![0.0, 1.0, 0.0]);
        assert_eq!(labels, vec!["FH", "UH"]);
    }

    #[test]
    fn standardize_and_invert() {
        let (tr, _) = generate(&GeneratorSpec::new(SyntheticFormula::Shallow, 300, 10, 3)).unwrap();
        let z = standardize(&tr);
        for c in 0..z.cols() {
            let (m, s) = column_stats(&z.x.column(c));
            assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9);
        }
        let back = invert_standardization(&z);
        for (a, b) in back.x.as_slice().iter().zip(tr.x.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_left_alone() {
        let x = Matrix::from_rows(&[vec![2.0], vec![2.0], vec![2.0]]).unwrap();
        let o = SurvivalOutcome::new(vec![1.0, 2.0, 3.0], vec![true, false, true]).unwrap();
        let ds = Dataset::new(x, vec![ColumnMeta::continuous("a")], o).unwrap();
        let z = standardize(&ds);
        assert_eq!(z.x, ds.x);
        assert!(z.columns[0].standardization.is_none());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (tr, _) = generate(&GeneratorSpec::new(SyntheticFormula::Gaussian, 1000, 10, 5)).unwrap();
        let (a, b) = stratified_split(&tr, 0.2, 10, 9).unwrap();
        assert!((b.rows() as i64 - 200).abs() <= 10);
        assert_eq!(a.rows() + b.rows(), 1000);
        let (a2, _) = stratified_split(&tr, 0.2, 10, 9).unwrap();
        assert_eq!(a, a2);
        assert!(stratified_split(&tr, 1.0, 10, 9).is_err());
    }
}
