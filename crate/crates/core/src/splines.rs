//! B-spline bases on uniform extended knot vectors and the learnable edge
//! activation `w_b·b(x) + w_s·Σ c_i B_i(x)`.
//!
//! Knots are uniform over the interior range `[lo, hi]` and continue with the
//! same spacing for `k` knots on either side, so a degree-`k` basis on `G`
//! intervals has `G + k` functions. Inputs outside `[lo, hi]` are evaluated
//! with the polynomial piece of the nearest interior span, which keeps values
//! and derivatives continuous at the range boundary.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg;
use crate::symbolic::SymbolicEdge;

/// Largest supported spline degree.
pub const MAX_DEGREE: usize = 15;
const LOCAL: usize = MAX_DEGREE + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    lo: f64,
    hi: f64,
    grid: usize,
    degree: usize,
    knots: Vec<f64>,
}

/// Uniform extended knot vector over `[lo, hi]` with `grid` intervals.
pub fn make_knots(lo: f64, hi: f64, grid: usize, degree: usize) -> Result<KnotVector> {
    KnotVector::new(lo, hi, grid, degree)
}

/// All `G + k` basis values at `x`.
pub fn basis_values(x: f64, knots: &KnotVector) -> Vec<f64> {
    knots.basis_values(x)
}

impl KnotVector {
    pub fn new(lo: f64, hi: f64, grid: usize, degree: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid("knot range requires finite lo < hi"));
        }
        if grid == 0 {
            return Err(invalid("grid must have at least one interval"));
        }
        if degree == 0 || degree > MAX_DEGREE {
            return Err(invalid("spline degree must lie in 1..=15"));
        }
        let h = (hi - lo) / grid as f64;
        let knots = (0..grid + 2 * degree + 1)
            .map(|m| lo + (m as f64 - degree as f64) * h)
            .collect();
        Ok(Self { lo, hi, grid, degree, knots })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn basis_count(&self) -> usize {
        self.grid + self.degree
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.grid as f64
    }

    /// Knot span index `μ` with `t_μ ≤ x < t_{μ+1}`, clamped to the interior.
    #[inline]
    fn span(&self, x: f64) -> usize {
        let k = self.degree;
        let rel = (x - self.lo) / self.spacing();
        let cell = if rel.is_nan() || rel < 0.0 {
            0
        } else {
            (rel.floor() as usize).min(self.grid - 1)
        };
        k + cell
    }

    /// Non-zero basis values at `x`. Returns the index of the first non-zero
    /// function; `vals[r]` holds `B_{first + r}`. When `derivs` is given it
    /// receives the matching first derivatives.
    #[inline]
    pub(crate) fn local_basis(
        &self,
        x: f64,
        vals: &mut [f64; LOCAL],
        derivs: Option<&mut [f64; LOCAL]>,
    ) -> usize {
        let p = self.degree;
        let mu = self.span(x);
        let t = &self.knots;
        let mut left = [0.0; LOCAL];
        let mut right = [0.0; LOCAL];
        let mut lower = [0.0; LOCAL];
        vals[0] = 1.0;
        for j in 1..=p {
            if j == p {
                lower[..p].copy_from_slice(&vals[..p]);
            }
            left[j] = x - t[mu + 1 - j];
            right[j] = t[mu + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        let first = mu - p;
        if let Some(d) = derivs {
            // B'_{i,p} = p/(t_{i+p}-t_i) B_{i,p-1} - p/(t_{i+p+1}-t_{i+1}) B_{i+1,p-1}
            let pf = p as f64;
            for r in 0..=p {
                let i = first + r;
                let a = if r > 0 { pf * lower[r - 1] / (t[i + p] - t[i]) } else { 0.0 };
                let b = if r < p { pf * lower[r] / (t[i + p + 1] - t[i + 1]) } else { 0.0 };
                d[r] = a - b;
            }
        }
        first
    }

    pub fn basis_values(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.basis_count()];
        let mut vals = [0.0; LOCAL];
        let first = self.local_basis(x, &mut vals, None);
        out[first..first + self.degree + 1].copy_from_slice(&vals[..self.degree + 1]);
        out
    }

    pub fn basis_derivatives(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.basis_count()];
        let mut vals = [0.0; LOCAL];
        let mut d = [0.0; LOCAL];
        let first = self.local_basis(x, &mut vals, Some(&mut d));
        out[first..first + self.degree + 1].copy_from_slice(&d[..self.degree + 1]);
        out
    }

    /// Support interval `[t_i, t_{i+k+1})` of basis function `i`.
    pub fn support(&self, i: usize) -> (f64, f64) {
        (self.knots[i], self.knots[i + self.degree + 1])
    }
}

/// Residual basis function `b(x)` of an activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseFn {
    Identity,
    Silu,
}

impl BaseFn {
    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            BaseFn::Identity => x,
            BaseFn::Silu => x / (1.0 + (-x).exp()),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            BaseFn::Identity => 1.0,
            BaseFn::Silu => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 + x * (1.0 - s))
            }
        }
    }
}

/// Partial derivatives of one activation at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationGrads {
    pub d_x: f64,
    pub d_coeffs: Vec<f64>,
    pub d_w_b: f64,
    pub d_w_s: f64,
}

/// Spline value, base value and their input derivatives at one point, plus
/// the local basis needed for coefficient gradients.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalEval {
    pub first: usize,
    pub vals: [f64; LOCAL],
    pub base: f64,
    pub d_base: f64,
    pub spline: f64,
    pub d_spline: f64,
}

/// One learnable edge function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub knots: KnotVector,
    pub coeffs: Vec<f64>,
    pub w_b: f64,
    pub w_s: f64,
    pub base: BaseFn,
    pub active: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbolic: Option<SymbolicEdge>,
}

impl Activation {
    pub fn new(knots: KnotVector, coeffs: Vec<f64>, w_b: f64, w_s: f64, base: BaseFn) -> Result<Self> {
        if coeffs.len() != knots.basis_count() {
            return Err(invalid("coefficient count must equal G + k"));
        }
        Ok(Self { knots, coeffs, w_b, w_s, base, active: true, symbolic: None })
    }

    #[inline]
    pub fn spline(&self, x: f64) -> f64 {
        let mut vals = [0.0; LOCAL];
        let first = self.knots.local_basis(x, &mut vals, None);
        let n = self.knots.degree + 1;
        self.coeffs[first..first + n].iter().zip(&vals[..n]).map(|(c, b)| c * b).sum()
    }

    /// `w_b·b(x) + w_s·spline(x)`, ignoring the prune mask and any symbolic
    /// replacement.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.w_b * self.base.value(x) + self.w_s * self.spline(x)
    }

    /// Contribution of this edge in a forward pass: zero when pruned, the
    /// symbolic function when one has been assigned, the spline otherwise.
    #[inline]
    pub fn output(&self, x: f64) -> f64 {
        if !self.active {
            0.0
        } else if let Some(sym) = &self.symbolic {
            sym.value(x)
        } else {
            self.value(x)
        }
    }

    #[inline]
    pub(crate) fn local_eval(&self, x: f64) -> LocalEval {
        let mut vals = [0.0; LOCAL];
        let mut d = [0.0; LOCAL];
        let first = self.knots.local_basis(x, &mut vals, Some(&mut d));
        let n = self.knots.degree + 1;
        let c = &self.coeffs[first..first + n];
        let mut spline = 0.0;
        let mut d_spline = 0.0;
        for r in 0..n {
            spline += c[r] * vals[r];
            d_spline += c[r] * d[r];
        }
        LocalEval {
            first,
            vals,
            base: self.base.value(x),
            d_base: self.base.derivative(x),
            spline,
            d_spline,
        }
    }

    pub fn grads(&self, x: f64) -> ActivationGrads {
        let e = self.local_eval(x);
        let mut d_coeffs = vec![0.0; self.coeffs.len()];
        for r in 0..=self.knots.degree {
            d_coeffs[e.first + r] = self.w_s * e.vals[r];
        }
        ActivationGrads {
            d_x: self.w_b * e.d_base + self.w_s * e.d_spline,
            d_coeffs,
            d_w_b: e.base,
            d_w_s: e.spline,
        }
    }

    /// Moves the knot range to cover `samples` (with a 1% margin) and refits
    /// the coefficients so the spline keeps its values on those samples.
    pub fn refresh_knots(&self, samples: &[f64]) -> Result<Activation> {
        if samples.is_empty() {
            return Err(invalid("refresh_knots needs at least one sample"));
        }
        let (mut lo, mut hi) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !lo.is_finite() || !hi.is_finite() {
            return Err(invalid("refresh_knots samples must be finite"));
        }
        let range = hi - lo;
        if range <= 0.0 {
            log::warn!("all knot samples equal {lo}; widening range to ±1");
            lo -= 1.0;
            hi += 1.0;
        } else {
            lo -= 0.01 * range;
            hi += 0.01 * range;
        }
        let knots = KnotVector::new(lo, hi, self.knots.grid, self.knots.degree)?;
        let design: Vec<Vec<f64>> = samples.iter().map(|&x| knots.basis_values(x)).collect();
        let target: Vec<f64> = samples.iter().map(|&x| self.spline(x)).collect();
        let coeffs = linalg::least_squares(&design, &target, 1e-10)
            .ok_or_else(|| invalid("spline refit is singular"))?;
        Ok(Activation { knots, coeffs, ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook Cox–de Boor recursion over the full knot vector.
    fn cox_de_boor(t: &[f64], i: usize, k: usize, x: f64) -> f64 {
        if k == 0 {
            return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = t[i + k] - t[i];
        if d1 != 0.0 {
            v += (x - t[i]) / d1 * cox_de_boor(t, i, k - 1, x);
        }
        let d2 = t[i + k + 1] - t[i + 1];
        if d2 != 0.0 {
            v += (t[i + k + 1] - x) / d2 * cox_de_boor(t, i + 1, k - 1, x);
        }
        v
    }

    #[test]
    fn knot_counts() {
        let kv = make_knots(-1.0, 1.0, 4, 3).unwrap();
        assert_eq!(kv.knots().len(), 11);
        assert_eq!(kv.basis_count(), 7);
        assert!((kv.spacing() - 0.5).abs() < 1e-15);
        for w in kv.knots().windows(2) {
            assert!((w[1] - w[0] - 0.5).abs() < 1e-12);
        }
        assert_eq!(make_knots(-1.0, 1.0, 5, 3).unwrap().basis_count(), 8);
    }

    #[test]
    fn degenerate_range_rejected() {
        assert!(matches!(make_knots(0.0, 0.0, 3, 3), Err(crate::Error::InvalidArgument(_))));
        assert!(make_knots(1.0, 0.0, 3, 3).is_err());
        assert!(make_knots(0.0, 1.0, 0, 3).is_err());
        assert!(make_knots(0.0, 1.0, 3, 0).is_err());
    }

    #[test]
    fn matches_textbook_recursion() {
        let kv = make_knots(-1.0, 1.0, 4, 3).unwrap();
        let fast = kv.basis_values(0.3);
        for (i, v) in fast.iter().enumerate() {
            let slow = cox_de_boor(kv.knots(), i, 3, 0.3);
            assert!((v - slow).abs() < 1e-14, "i={i}: {v} vs {slow}");
        }
    }

    #[test]
    fn partition_of_unity_at_midpoint() {
        let kv = make_knots(-1.0, 1.0, 5, 3).unwrap();
        let s: f64 = kv.basis_values(0.0).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_recursion_difference() {
        let kv = make_knots(-2.0, 3.0, 5, 3).unwrap();
        let d = kv.basis_derivatives(0.77);
        let h = 1e-6;
        for (i, di) in d.iter().enumerate() {
            let fd = (cox_de_boor(kv.knots(), i, 3, 0.77 + h) - cox_de_boor(kv.knots(), i, 3, 0.77 - h))
                / (2.0 * h);
            assert!((di - fd).abs() < 1e-6, "i={i}");
        }
    }

    #[test]
    fn silu_derivative() {
        for &x in &[-3.0, -0.5, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (BaseFn::Silu.value(x + h) - BaseFn::Silu.value(x - h)) / (2.0 * h);
            assert!((BaseFn::Silu.derivative(x) - fd).abs() < 1e-8);
        }
        assert!((BaseFn::Silu.value(1.0) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn activation_paths() {
        let kv = make_knots(-1.0, 1.0, 5, 3).unwrap();
        let a = Activation::new(kv.clone(), vec![1.0; 8], 0.0, 1.0, BaseFn::Identity).unwrap();
        assert!((a.value(0.3) - 1.0).abs() < 1e-12);
        let b = Activation::new(kv, vec![0.3; 8], 1.0, 0.0, BaseFn::Identity).unwrap();
        assert!((b.value(0.7) - 0.7).abs() < 1e-15);
        let g = b.grads(0.7);
        assert_eq!(g.d_x, 1.0);
        let mut c = a.clone();
        c.w_b = 0.4;
        let g = c.grads(0.1);
        assert!((g.d_x - 0.4).abs() < 1e-12);
    }

    #[test]
    fn inactive_edge_outputs_zero() {
        let kv = make_knots(-1.0, 1.0, 3, 3).unwrap();
        let mut a = Activation::new(kv, vec![2.0; 6], 3.0, 1.5, BaseFn::Silu).unwrap();
        a.active = false;
        assert_eq!(a.output(0.25), 0.0);
    }

    #[test]
    fn refresh_covers_new_samples() {
        let kv = make_knots(-1.0, 1.0, 4, 3).unwrap();
        let a = Activation::new(kv, vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.1, 0.2], 0.5, 1.0, BaseFn::Identity)
            .unwrap();
        let r = a.refresh_knots(&[2.0, 3.0]).unwrap();
        assert!(r.knots.lo() <= 2.0 && r.knots.hi() >= 3.0);
        let r = a.refresh_knots(&[0.5, 0.5]).unwrap();
        assert!((r.knots.lo() + 0.5).abs() < 1e-12 && (r.knots.hi() - 1.5).abs() < 1e-12);
        assert!(a.refresh_knots(&[]).is_err());
    }
}
