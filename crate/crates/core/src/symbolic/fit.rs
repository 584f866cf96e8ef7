#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::library::Func;
use crate::error::{invalid, Error, Result};

/// Smallest operator range over the samples, relative to its magnitude,
/// that still counts as shape information.
const MIN_RELATIVE_SPREAD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub r2: f64,
}

/// Iterative grid search over the inner affine parameters `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    /// Grid points per axis.
    pub points: usize,
    pub rounds: usize,
    /// Box shrink factor between rounds.
    pub shrink: f64,
    /// Half-width of the initial box, centred on the origin.
    pub half_width: f64,
    /// Samples used while scanning the grid; the returned fit is always
    /// re-scored on every sample.
    pub max_samples: usize,
}

impl Default for GridSearch {
    fn default() -> Self {
        Self { points: 101, rounds: 3, shrink: 5.0, half_width: 10.0, max_samples: 400 }
    }
}

/// Coefficient of determination of `pred` against `y`.
pub fn r_squared(y: &[f64], pred: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    if ss_tot <= tiny_variance(mean, n) {
        return if ss_res <= tiny_variance(mean, n) { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

fn tiny_variance(mean: f64, n: f64) -> f64 {
    1e-28 * n * (1.0 + mean * mean)
}

struct Moments {
    n: f64,
    mean: f64,
    ss: f64,
}

fn moments(v: &[f64]) -> Moments {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    Moments { n, mean, ss }
}

/// Least-squares line through `(xs, ys)`.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(invalid("x and y sample counts differ"));
    }
    let mx = moments(xs);
    if xs.len() < 2 || mx.ss <= tiny_variance(mx.mean, mx.n) {
        return Err(invalid("linear fit needs at least two distinct x values"));
    }
    let my = moments(ys);
    if my.ss <= tiny_variance(my.mean, my.n) {
        return Ok(LinearFit { a: 0.0, b: my.mean, r2: 1.0 });
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx.mean) * (y - my.mean)).sum();
    let a = sxy / mx.ss;
    let b = my.mean - a * mx.mean;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a * x - b) * (y - a * x - b)).sum();
    Ok(LinearFit { a, b, r2: 1.0 - ss_res / my.ss })
}

/// Whether `f(u)` is defined for every `u` in `[lo, hi]`.
fn interval_in_domain(f: Func, lo: f64, hi: f64) -> bool {
    match f {
        Func::Log | Func::InvSqrt => lo > 0.0,
        Func::Sqrt => lo >= 0.0,
        Func::Reciprocal | Func::InvSquare | Func::InvQuartic => lo > 0.0 || hi < 0.0,
        Func::Arctanh => lo > -1.0 && hi < 1.0,
        Func::Tan => {
            let half = core::f64::consts::FRAC_PI_2;
            let pi = core::f64::consts::PI;
            ((lo - half) / pi).floor() == ((hi - half) / pi).floor()
                && ((lo - half) / pi).fract() != 0.0
        }
        _ => true,
    }
}

/// Evenly strided subsample of the samples ordered by `x`, always keeping
/// both extremes.
fn subsample(xs: &[f64], ys: &[f64], max: usize) -> (Vec<f64>, Vec<f64>) {
    if xs.len() <= max {
        return (xs.to_vec(), ys.to_vec());
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]).then(i.cmp(&j)));
    let last = xs.len() - 1;
    let picks = (0..max).map(|k| order[k * last / (max - 1)]);
    picks.map(|i| (xs[i], ys[i])).unzip()
}

struct Score {
    r2: f64,
    c: f64,
    d: f64,
}

/// Closed-form `(c, d)` for fixed `(a, b)`; `None` when any sample falls
/// outside the operator's domain, produces a non-finite value, or `f` is
/// (numerically) constant over the samples. `buf` is scratch space.
fn score_cell(
    f: Func,
    (a, b): (f64, f64),
    xs: &[f64],
    ys: &Moments,
    yv: &[f64],
    xr: (f64, f64),
    buf: &mut Vec<f64>,
) -> Option<Score> {
    let (u0, u1) = (a * xr.0 + b, a * xr.1 + b);
    if !interval_in_domain(f, u0.min(u1), u0.max(u1)) {
        return None;
    }
    buf.clear();
    buf.extend(xs.iter().map(|&x| f.eval(a * x + b)));
    let (lo, hi) = buf.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    // a saturated operator only varies in its last few bits
    if !(hi - lo > MIN_RELATIVE_SPREAD * hi.abs().max(lo.abs()).max(1.0)) {
        return None;
    }
    let fmean = buf.iter().sum::<f64>() / buf.len() as f64;
    let (mut fss, mut sfy) = (0.0, 0.0);
    for (&v, &y) in buf.iter().zip(yv) {
        fss += (v - fmean) * (v - fmean);
        sfy += (v - fmean) * (y - ys.mean);
    }
    if !(fss.is_finite() && sfy.is_finite() && fss > 0.0) {
        return None;
    }
    let c = sfy / fss;
    let r2 = (sfy * sfy / (fss * ys.ss)).min(1.0);
    Some(Score { r2, c, d: ys.mean - c * fmean })
}

/// Fits `y ≈ c·f(a·x + b) + d` by refining a grid over `(a, b)` with `(c, d)`
/// solved in closed form at every grid cell.
pub fn fit_affine(f: Func, xs: &[f64], ys: &[f64], grid: &GridSearch) -> Result<AffineFit> {
    if xs.len() != ys.len() {
        return Err(invalid("x and y sample counts differ"));
    }
    if xs.len() < 4 {
        return Err(invalid("affine fit needs at least four samples"));
    }
    if grid.points < 2 || grid.rounds == 0 {
        return Err(invalid("grid search needs at least two points and one round"));
    }
    let full_y = moments(ys);
    if full_y.ss <= tiny_variance(full_y.mean, full_y.n) {
        return Ok(AffineFit { a: 1.0, b: 0.0, c: 0.0, d: full_y.mean, r2: 1.0 });
    }
    let xr = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let (sx, sy) = subsample(xs, ys, grid.max_samples.max(4));
    let sub_y = moments(&sy);

    let mut buf = Vec::with_capacity(xs.len());
    let mut center = (0.0, 0.0);
    let mut width = grid.half_width;
    let mut best: Option<(f64, f64, f64)> = None;
    let steps = (grid.points - 1) as f64;
    for _ in 0..grid.rounds {
        for i in 0..grid.points {
            let a = center.0 + width * (2.0 * i as f64 / steps - 1.0);
            for j in 0..grid.points {
                let b = center.1 + width * (2.0 * j as f64 / steps - 1.0);
                if let Some(s) = score_cell(f, (a, b), &sx, &sub_y, &sy, xr, &mut buf) {
                    if best.is_none_or(|(r2, _, _)| s.r2 > r2) {
                        best = Some((s.r2, a, b));
                    }
                }
            }
        }
        let Some((_, a, b)) = best else {
            return Err(Error::UnfittableOperator(format!("{}", f.name())));
        };
        center = (a, b);
        width /= grid.shrink;
    }
    let (a, b) = center;
    let s = score_cell(f, (a, b), xs, &full_y, ys, xr, &mut buf)
        .ok_or_else(|| Error::UnfittableOperator(format!("{}", f.name())))?;
    Ok(AffineFit { a, b, c: s.c, d: s.d, r2: s.r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid_x(n: usize) -> Vec<f64> {
        (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_line() {
        let xs = grid_x(11);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let f = fit_linear(&xs, &ys).unwrap();
        assert!((f.a - 3.0).abs() < 1e-12 && (f.b + 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_y() {
        let xs = grid_x(5);
        let f = fit_linear(&xs, &[5.0; 5]).unwrap();
        assert_eq!((f.a, f.b, f.r2), (0.0, 5.0, 1.0));
    }

    #[test]
    fn quadratic_rejected_by_linear_rule() {
        let xs = grid_x(101);
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        // symmetric grid: cov(x, x²) = 0 so the best line is flat
        let f = fit_linear(&xs, &ys).unwrap();
        assert!(f.r2 < 0.99);
        assert!(f.r2.abs() < 1e-12);
    }

    #[test]
    fn linear_needs_distinct_x() {
        assert!(fit_linear(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_linear(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn recovers_sine() {
        let xs = grid_x(200);
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * (3.0 * x + 1.0).sin() - 0.5).collect();
        let fit = fit_affine(Func::Sin, &xs, &ys, &GridSearch::default()).unwrap();
        assert!(fit.r2 > 0.999, "{fit:?}");
        // reconstructed curve matches regardless of which symmetric
        // parameterization was found
        for &x in &xs {
            let y = fit.c * (fit.a * x + fit.b).sin() + fit.d;
            assert!((y - (2.0 * (3.0 * x + 1.0).sin() - 0.5)).abs() < 0.05);
        }
    }

    #[test]
    fn identity_parameters_fit_exactly() {
        let xs = grid_x(50);
        for f in [Func::Tanh, Func::Exp, Func::Square] {
            let ys: Vec<f64> = xs.iter().map(|&x| f.eval(x)).collect();
            let fit = fit_affine(f, &xs, &ys, &GridSearch::default()).unwrap();
            assert!(fit.r2 > 1.0 - 1e-9, "{}: {fit:?}", f.name());
        }
    }

    #[test]
    fn log_unfittable_on_wide_negative_span() {
        let xs: Vec<f64> = vec![-1e6, -1.0, 0.0, 1.0, 1e6];
        let ys = vec![1.0, 2.0, 3.0, 2.0, 1.0];
        assert!(matches!(
            fit_affine(Func::Log, &xs, &ys, &GridSearch::default()),
            Err(Error::UnfittableOperator(_))
        ));
    }

    #[test]
    fn tan_interval_domain() {
        assert!(interval_in_domain(Func::Tan, -1.0, 1.0));
        assert!(!interval_in_domain(Func::Tan, 1.0, 2.0));
    }
}
