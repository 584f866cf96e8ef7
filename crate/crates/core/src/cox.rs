//! Cox partial likelihood (exact and sorted-prefix forms), the linear CoxPH
//! baseline, Breslow cumulative hazard, and concordance with bootstrap
//! intervals.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Matrix};

/// Observed durations with event indicators (`true` = event observed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalOutcome {
    durations: Vec<f64>,
    events: Vec<bool>,
}

impl SurvivalOutcome {
    pub fn new(durations: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        if durations.len() != events.len() {
            return Err(invalid("durations and events differ in length"));
        }
        if let Some(i) = durations.iter().position(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(invalid(format!("duration at row {i} must be positive and finite")));
        }
        Ok(Self { durations, events })
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|e| **e).count()
    }

    pub fn select(&self, idx: &[usize]) -> SurvivalOutcome {
        SurvivalOutcome {
            durations: idx.iter().map(|&i| self.durations[i]).collect(),
            events: idx.iter().map(|&i| self.events[i]).collect(),
        }
    }

    fn require_event(&self) -> Result<()> {
        if self.event_count() == 0 {
            Err(invalid("at least one observed event is required"))
        } else {
            Ok(())
        }
    }
}

fn check_theta(theta: &[f64], outcome: &SurvivalOutcome) -> Result<()> {
    if theta.len() != outcome.len() {
        return Err(invalid("risk scores and outcomes differ in length"));
    }
    outcome.require_event()
}

/// Row order by duration descending. Within a tie, censored rows precede
/// events; remaining ties keep the original index order.
pub fn descending_order(outcome: &SurvivalOutcome) -> Vec<usize> {
    let t = outcome.durations();
    let d = outcome.events();
    let mut idx: Vec<usize> = (0..t.len()).collect();
    idx.sort_by(|&a, &b| t[b].total_cmp(&t[a]).then(d[a].cmp(&d[b])).then(a.cmp(&b)));
    idx
}

/// Groups of `order` (descending by time) sharing one duration, as
/// half-open position ranges.
fn tie_groups(order: &[usize], t: &[f64]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    for p in 1..=order.len() {
        if p == order.len() || t[order[p]] != t[order[start]] {
            groups.push((start, p));
            start = p;
        }
    }
    groups
}

fn max_theta(theta: &[f64]) -> f64 {
    theta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Negative log partial likelihood with exact risk sets: every row with
/// `t_j ≥ t_i` belongs to the risk set of event `i`.
pub fn cox_loss_exact(theta: &[f64], outcome: &SurvivalOutcome) -> Result<f64> {
    check_theta(theta, outcome)?;
    let order = descending_order(outcome);
    let gamma = max_theta(theta);
    let mut acc = 0.0;
    let mut loss = 0.0;
    for (s, e) in tie_groups(&order, outcome.durations()) {
        for &i in &order[s..e] {
            acc += (theta[i] - gamma).exp();
        }
        let log_denom = acc.ln() + gamma;
        for &i in &order[s..e] {
            if outcome.events[i] {
                loss -= theta[i] - log_denom;
            }
        }
    }
    Ok(loss)
}

/// Sorted-prefix approximation: after ordering rows by descending
/// duration, the risk set of each event is the prefix ending at that row.
/// Identical to [`cox_loss_exact`] when durations are distinct.
pub fn cox_loss_fast(theta: &[f64], outcome: &SurvivalOutcome) -> Result<f64> {
    check_theta(theta, outcome)?;
    Ok(FastCox::new(outcome).loss(theta))
}

/// Gradient of the chosen loss variant with respect to `theta`.
pub fn cox_loss_grad(theta: &[f64], outcome: &SurvivalOutcome, fast: bool) -> Result<Vec<f64>> {
    check_theta(theta, outcome)?;
    if fast {
        return Ok(FastCox::new(outcome).loss_and_grad(theta).1);
    }
    let order = descending_order(outcome);
    let gamma = max_theta(theta);
    let groups = tie_groups(&order, outcome.durations());
    // denominators per group, then suffix sums of d_g / S_g
    let mut acc = 0.0;
    let mut weight = Vec::with_capacity(groups.len());
    for &(s, e) in &groups {
        for &i in &order[s..e] {
            acc += (theta[i] - gamma).exp();
        }
        let d = order[s..e].iter().filter(|&&i| outcome.events[i]).count() as f64;
        weight.push(d / acc);
    }
    let mut grad = vec![0.0; theta.len()];
    let mut suffix = 0.0;
    for (g, &(s, e)) in groups.iter().enumerate().rev() {
        suffix += weight[g];
        for &i in &order[s..e] {
            grad[i] = (theta[i] - gamma).exp() * suffix - if outcome.events[i] { 1.0 } else { 0.0 };
        }
    }
    Ok(grad)
}

/// Precomputed ordering for repeated evaluation of the sorted-prefix loss on
/// a fixed outcome.
#[derive(Debug, Clone)]
pub struct FastCox {
    order: Vec<usize>,
    events: Vec<bool>,
    n_events: usize,
}

impl FastCox {
    pub fn new(outcome: &SurvivalOutcome) -> Self {
        let order = descending_order(outcome);
        let events = order.iter().map(|&i| outcome.events[i]).collect();
        Self { order, events, n_events: outcome.event_count() }
    }

    pub fn n_events(&self) -> usize {
        self.n_events
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        let gamma = max_theta(theta);
        let mut acc = 0.0;
        let mut loss = 0.0;
        for (p, &i) in self.order.iter().enumerate() {
            acc += (theta[i] - gamma).exp();
            if self.events[p] {
                loss -= theta[i] - (acc.ln() + gamma);
            }
        }
        loss
    }

    pub fn loss_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let gamma = max_theta(theta);
        let n = self.order.len();
        let mut prefix = Vec::with_capacity(n);
        let mut acc = 0.0;
        let mut loss = 0.0;
        for (p, &i) in self.order.iter().enumerate() {
            acc += (theta[i] - gamma).exp();
            prefix.push(acc);
            if self.events[p] {
                loss -= theta[i] - (acc.ln() + gamma);
            }
        }
        let mut grad = vec![0.0; n];
        let mut suffix = 0.0;
        for p in (0..n).rev() {
            if self.events[p] {
                suffix += 1.0 / prefix[p];
            }
            let i = self.order[p];
            grad[i] = (theta[i] - gamma).exp() * suffix - if self.events[p] { 1.0 } else { 0.0 };
        }
        (loss, grad)
    }
}

/// Fitted linear Cox model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxPHModel {
    pub beta: Vec<f64>,
    pub feature_names: Vec<String>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

impl CoxPHModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.mat_vec(&self.beta)
    }
}

/// Loss, gradient and Hessian of the Breslow partial likelihood of `Xβ`.
fn coxph_objective(x: &Matrix, outcome: &SurvivalOutcome, order: &[usize], beta: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let p = beta.len();
    let theta = x.mat_vec(beta);
    let gamma = max_theta(&theta);
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];
    let mut loss = 0.0;
    let mut grad = vec![0.0; p];
    let mut hess = vec![0.0; p * p];
    for (s, e) in tie_groups(order, outcome.durations()) {
        for &i in &order[s..e] {
            let w = (theta[i] - gamma).exp();
            let xi = x.row(i);
            s0 += w;
            for a in 0..p {
                s1[a] += w * xi[a];
                for b in 0..p {
                    s2[a * p + b] += w * xi[a] * xi[b];
                }
            }
        }
        let d = order[s..e].iter().filter(|&&i| outcome.events[i]).count() as f64;
        if d == 0.0 {
            continue;
        }
        for &i in &order[s..e] {
            if outcome.events[i] {
                loss -= theta[i];
                for a in 0..p {
                    grad[a] -= x.get(i, a);
                }
            }
        }
        loss += d * (s0.ln() + gamma);
        for a in 0..p {
            let ma = s1[a] / s0;
            grad[a] += d * ma;
            for b in 0..p {
                hess[a * p + b] += d * (s2[a * p + b] / s0 - ma * s1[b] / s0);
            }
        }
    }
    (loss, grad, hess)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton–Raphson with step halving on the ridge-stabilized partial
/// likelihood. Stops when the gradient norm drops below `1e-8` or after
/// 100 iterations; covariates without any variation leave the fit flagged
/// as not converged.
pub fn coxph_fit(x: &Matrix, outcome: &SurvivalOutcome, ridge: f64) -> Result<CoxPHModel> {
    if x.rows() != outcome.len() {
        return Err(invalid("covariate rows and outcomes differ in length"));
    }
    outcome.require_event()?;
    let p = x.cols();
    let order = descending_order(outcome);
    let penalized = |beta: &[f64]| {
        let (l, mut g, mut h) = coxph_objective(x, outcome, &order, beta);
        let l = l + 0.5 * ridge * beta.iter().map(|b| b * b).sum::<f64>();
        for a in 0..p {
            g[a] += ridge * beta[a];
            h[a * p + a] += ridge;
        }
        (l, g, h)
    };
    let degenerate = (0..p).any(|c| {
        let first = x.get(0, c);
        (0..x.rows()).all(|r| x.get(r, c) == first)
    });
    let mut beta = vec![0.0; p];
    let (mut loss, mut grad, mut hess) = penalized(&beta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 100 {
        if norm(&grad) < 1e-8 {
            converged = true;
            break;
        }
        iterations += 1;
        let Some(step) = linalg::solve(&hess, &grad) else { break };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b - t * s).collect();
            let (l, g, h) = penalized(&cand);
            // near the optimum the predicted decrease is below the loss's
            // rounding error, so a smaller gradient also counts as progress
            let within_rounding = l <= loss + 1e-12 * loss.abs().max(1.0) && norm(&g) < norm(&grad);
            if l.is_finite() && (l <= loss || within_rounding) {
                beta = cand;
                loss = l;
                grad = g;
                hess = h;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            converged = norm(&grad) < 1e-6;
            break;
        }
    }
    if !converged && norm(&grad) < 1e-8 {
        converged = true;
    }
    Ok(CoxPHModel {
        beta,
        feature_names: (0..p).map(|i| format!("x{}", i + 1)).collect(),
        iterations,
        grad_norm: norm(&grad),
        converged: converged && !degenerate,
    })
}

/// One-covariate CoxPH fit, e.g. on a patient subgroup.
pub fn coxph_subgroup(column: &[f64], outcome: &SurvivalOutcome) -> Result<CoxPHModel> {
    let x = Matrix::from_vec(column.len(), 1, column.to_vec())?;
    coxph_fit(&x, outcome, 1e-6)
}

/// Right-continuous step function `H0(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineHazard {
    pub times: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl BaselineHazard {
    pub fn at(&self, t: f64) -> f64 {
        match self.times.iter().rposition(|&s| s <= t) {
            Some(i) => self.cumulative[i],
            None => 0.0,
        }
    }

    pub fn survival(&self, t: f64, theta: f64) -> f64 {
        (-self.at(t) * theta.exp()).exp()
    }
}

/// Breslow estimator: at each distinct event time the hazard jumps by the
/// event count over the risk-set sum of `exp θ`.
pub fn breslow_baseline(theta: &[f64], outcome: &SurvivalOutcome) -> Result<BaselineHazard> {
    if theta.len() != outcome.len() {
        return Err(invalid("risk scores and outcomes differ in length"));
    }
    let order = descending_order(outcome);
    let groups = tie_groups(&order, outcome.durations());
    let mut acc = 0.0;
    let mut jumps = Vec::new();
    for &(s, e) in &groups {
        for &i in &order[s..e] {
            acc += theta[i].exp();
        }
        let d = order[s..e].iter().filter(|&&i| outcome.events[i]).count();
        if d > 0 {
            jumps.push((outcome.durations[order[s]], d as f64 / acc));
        }
    }
    jumps.reverse();
    let mut cum = 0.0;
    let (times, cumulative) = jumps
        .into_iter()
        .map(|(t, h)| {
            cum += h;
            (t, cum)
        })
        .unzip();
    Ok(BaselineHazard { times, cumulative })
}

/// Harrell's C: pairs with `t_i < t_j` and `δ_i = 1` are comparable; they
/// are concordant when `θ_i > θ_j`, and ties in `θ` count one half.
pub fn concordance_index(theta: &[f64], outcome: &SurvivalOutcome) -> Result<f64> {
    if theta.len() != outcome.len() {
        return Err(invalid("risk scores and outcomes differ in length"));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::UndefinedMetric("risk scores contain non-finite values".into()));
    }
    let (conc, tied, comparable) = concordance_counts(theta, outcome.durations(), outcome.events());
    if comparable == 0.0 {
        return Err(Error::UndefinedMetric("no comparable pairs".into()));
    }
    Ok((conc + 0.5 * tied) / comparable)
}

/// Fenwick tree over risk-score ranks.
struct Fenwick(Vec<f64>);

impl Fenwick {
    fn add(&mut self, mut i: usize) {
        i += 1;
        while i < self.0.len() {
            self.0[i] += 1.0;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks `< i`.
    fn below(&self, mut i: usize) -> f64 {
        let mut s = 0.0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

fn concordance_counts(theta: &[f64], t: &[f64], d: &[bool]) -> (f64, f64, f64) {
    let n = theta.len();
    let mut sorted: Vec<f64> = theta.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rank = |v: f64| sorted.partition_point(|&s| s < v);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| t[b].total_cmp(&t[a]));
    let mut tree = Fenwick(vec![0.0; sorted.len() + 1]);
    let mut inserted = 0.0;
    let (mut conc, mut tied, mut comparable) = (0.0, 0.0, 0.0);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && t[order[end]] == t[order[start]] {
            end += 1;
        }
        // rows already in the tree have strictly longer durations
        for &i in &order[start..end] {
            if d[i] {
                let r = rank(theta[i]);
                let lower = tree.below(r);
                let equal = tree.below(r + 1) - lower;
                conc += lower;
                tied += equal;
                comparable += inserted;
            }
        }
        for &i in &order[start..end] {
            tree.add(rank(theta[i]));
            inserted += 1.0;
        }
        start = end;
    }
    (conc, tied, comparable)
}

/// C-index with a percentile bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub c_index: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_bootstrap: usize,
    pub seed: u64,
    /// Resamples redrawn because they had no comparable pair.
    pub redraws: usize,
    /// Set when the point estimate falls outside its own interval.
    pub interval_excludes_estimate: bool,
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Resamples rows with replacement `b` times (stream `k` of the ChaCha
/// generator seeded by `seed` drives resample `k`) and reports the 2.5 and
/// 97.5 percentiles of the resampled C-index.
pub fn bootstrap_ci(theta: &[f64], outcome: &SurvivalOutcome, b: usize, seed: u64) -> Result<EvalReport> {
    if b == 0 {
        return Err(invalid("bootstrap needs at least one resample"));
    }
    let c_index = concordance_index(theta, outcome)?;
    let n = theta.len();
    let t = outcome.durations();
    let d = outcome.events();
    let mut stats = Vec::with_capacity(b);
    let mut attempts = 0usize;
    let mut redraws = 0usize;
    let mut rt = vec![0.0; n];
    let mut rd = vec![false; n];
    let mut rth = vec![0.0; n];
    for k in 0..b {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        loop {
            attempts += 1;
            if attempts > 10 * b {
                return Err(Error::UndefinedMetric(format!(
                    "bootstrap exceeded {} attempts without comparable pairs",
                    10 * b
                )));
            }
            for s in 0..n {
                let i = rng.random_range(0..n);
                rt[s] = t[i];
                rd[s] = d[i];
                rth[s] = theta[i];
            }
            let (conc, tied, comp) = concordance_counts(&rth, &rt, &rd);
            if comp > 0.0 {
                stats.push((conc + 0.5 * tied) / comp);
                break;
            }
            redraws += 1;
        }
    }
    stats.sort_by(f64::total_cmp);
    let ci_low = percentile(&stats, 0.025);
    let ci_high = percentile(&stats, 0.975);
    Ok(EvalReport {
        c_index,
        ci_low,
        ci_high,
        n_bootstrap: b,
        seed,
        redraws,
        interval_excludes_estimate: c_index < ci_low || c_index > ci_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(t: &[f64], d: &[bool]) -> SurvivalOutcome {
        SurvivalOutcome::new(t.to_vec(), d.to_vec()).unwrap()
    }

    #[test]
    fn three_patient_loss() {
        let o = outcome(&[1.0, 2.0, 3.0], &[true; 3]);
        let want = 3f64.ln() + 2f64.ln();
        assert!((cox_loss_exact(&[0.0; 3], &o).unwrap() - want).abs() < 1e-12);
        assert!((cox_loss_fast(&[0.0; 3], &o).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn single_patient_loss_zero() {
        let o = outcome(&[4.0], &[true]);
        assert_eq!(cox_loss_exact(&[1.3], &o).unwrap(), 0.0);
    }

    #[test]
    fn no_events_is_error() {
        let o = outcome(&[1.0, 2.0], &[false, false]);
        assert!(cox_loss_exact(&[0.0, 0.0], &o).is_err());
        assert!(cox_loss_fast(&[0.0, 0.0], &o).is_err());
        assert!(cox_loss_grad(&[0.0, 0.0], &o, true).is_err());
    }

    #[test]
    fn two_patient_gradient() {
        let o = outcome(&[1.0, 2.0], &[true, true]);
        for fast in [false, true] {
            let g = cox_loss_grad(&[0.0, 0.0], &o, fast).unwrap();
            assert!((g[0] + 0.5).abs() < 1e-12 && (g[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn nonpositive_duration_rejected() {
        assert!(SurvivalOutcome::new(vec![1.0, 0.0], vec![true, true]).is_err());
        assert!(SurvivalOutcome::new(vec![1.0], vec![true, true]).is_err());
    }

    #[test]
    fn concordance_hand_cases() {
        let o = outcome(&[1.0, 2.0, 3.0], &[true, false, true]);
        assert_eq!(concordance_index(&[2.0, 1.0, 0.5], &o).unwrap(), 1.0);
        assert_eq!(concordance_index(&[1.0, 1.0, 1.0], &o).unwrap(), 0.5);
        let o = outcome(&[1.0, 2.0], &[false, false]);
        assert!(matches!(concordance_index(&[1.0, 2.0], &o), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn breslow_four_patients() {
        // t = 1(e) 2(c) 3(e) 4(e), theta = 0, ln2, 0, ln3
        let o = outcome(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, true]);
        let theta = [0.0, 2f64.ln(), 0.0, 3f64.ln()];
        let h = breslow_baseline(&theta, &o).unwrap();
        assert_eq!(h.times, vec![1.0, 3.0, 4.0]);
        let inc = [1.0 / 7.0, 1.0 / 4.0, 1.0 / 3.0];
        let mut cum = 0.0;
        for (k, v) in inc.iter().enumerate() {
            cum += v;
            assert!((h.cumulative[k] - cum).abs() < 1e-12);
        }
        assert_eq!(h.at(0.5), 0.0);
        assert!((h.at(2.5) - 1.0 / 7.0).abs() < 1e-12);
        assert!((h.survival(2.5, 0.0) - (-1.0f64 / 7.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert!((percentile(&v, 0.025) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn constant_covariate_flags_nonconvergence() {
        let o = outcome(&[1.0, 2.0, 3.0, 4.0], &[true, true, false, true]);
        let m = coxph_subgroup(&[2.0; 4], &o).unwrap();
        assert_eq!(m.beta, vec![0.0]);
        assert!(!m.converged);
    }
}
