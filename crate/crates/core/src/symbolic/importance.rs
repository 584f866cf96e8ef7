#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::formula::Formula;
use crate::cox::percentile;
use crate::error::{invalid, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermImportance {
    /// Index into [`Formula::terms`].
    pub term: usize,
    pub sigma: f64,
}

/// Sample standard deviation of a term's values after dropping those outside
/// `[Q1 - 3·IQR, Q3 + 3·IQR]`.
fn robust_sigma(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let q1 = percentile(&v, 0.25);
    let q3 = percentile(&v, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 3.0 * iqr, q3 + 3.0 * iqr);
    let kept: Vec<f64> = v.into_iter().filter(|x| *x >= lo && *x <= hi).collect();
    if kept.len() < 2 {
        return 0.0;
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let var = kept.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    var.max(0.0).sqrt()
}

/// Spread of every top-level term over the rows of `x`, most important
/// first (ties keep term order).
pub fn term_importance(formula: &Formula, x: &Matrix) -> Result<Vec<TermImportance>> {
    if formula.terms.is_empty() {
        return Err(invalid("formula has no terms"));
    }
    if x.rows() == 0 {
        return Err(invalid("importance needs at least one row"));
    }
    let mut out: Vec<TermImportance> = formula
        .terms
        .iter()
        .enumerate()
        .map(|(term, t)| TermImportance { term, sigma: robust_sigma((0..x.rows()).map(|r| t.eval(x.row(r))).collect()) })
        .collect();
    out.sort_by(|a, b| b.sigma.total_cmp(&a.sigma).then(a.term.cmp(&b.term)));
    Ok(out)
}
