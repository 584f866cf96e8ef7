//! Conversion of trained networks into symbolic hazard formulas.

mod auto;
mod finetune;
mod fit;
mod formula;
mod importance;
mod library;

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub use auto::{auto_symbolic, EdgeFitReport, SymbolicOptions, LINEAR_ACCEPT_R2, LOW_FIDELITY_R2};
pub use finetune::{finetune_affine, FinetuneConfig, FinetuneReport};
pub use fit::{fit_affine, fit_linear, r_squared, AffineFit, GridSearch, LinearFit};
pub use formula::{render_formula, Formula};
pub use importance::{term_importance, TermImportance};
pub use library::{operator, operator_library, Func, Operator, OperatorKind};

/// Closed-form replacement for one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolicKind {
    /// `c·f(a·x + b) + d`
    Operator { func: Func, a: f64, b: f64, c: f64, d: f64 },
    /// `a·x + b`
    Linear { a: f64, b: f64 },
    /// Category code → value; codes are dense from 0.
    DiscreteMap { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicEdge {
    pub kind: SymbolicKind,
    pub r2: f64,
    #[serde(default)]
    pub low_fidelity: bool,
}

#[inline]
fn code_index(x: f64, n: usize) -> usize {
    let r = x.round();
    if r <= 0.0 || r.is_nan() {
        0
    } else {
        (r as usize).min(n.saturating_sub(1))
    }
}

impl SymbolicEdge {
    pub fn new(kind: SymbolicKind, r2: f64) -> Self {
        Self { kind, r2, low_fidelity: false }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            SymbolicKind::Operator { func, a, b, c, d } => c * func.eval(a * x + b) + d,
            SymbolicKind::Linear { a, b } => a * x + b,
            SymbolicKind::DiscreteMap { values } => {
                if values.is_empty() {
                    0.0
                } else {
                    values[code_index(x, values.len())]
                }
            }
        }
    }

    #[inline]
    pub fn d_input(&self, x: f64) -> f64 {
        match &self.kind {
            SymbolicKind::Operator { func, a, b, c, .. } => c * a * func.derivative(a * x + b),
            SymbolicKind::Linear { a, .. } => *a,
            SymbolicKind::DiscreteMap { .. } => 0.0,
        }
    }

    pub fn param_count(&self) -> usize {
        match &self.kind {
            SymbolicKind::Operator { .. } => 4,
            SymbolicKind::Linear { .. } => 2,
            SymbolicKind::DiscreteMap { values } => values.len(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match &self.kind {
            SymbolicKind::Operator { a, b, c, d, .. } => vec![*a, *b, *c, *d],
            SymbolicKind::Linear { a, b } => vec![*a, *b],
            SymbolicKind::DiscreteMap { values } => values.clone(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) {
        match &mut self.kind {
            SymbolicKind::Operator { a, b, c, d, .. } => {
                *a = p[0];
                *b = p[1];
                *c = p[2];
                *d = p[3];
            }
            SymbolicKind::Linear { a, b } => {
                *a = p[0];
                *b = p[1];
            }
            SymbolicKind::DiscreteMap { values } => {
                let n = values.len();
                values.copy_from_slice(&p[..n]);
            }
        }
    }

    /// Adds `g · ∂value/∂param` into `out`.
    #[inline]
    pub(crate) fn accumulate_param_grads(&self, x: f64, g: f64, out: &mut [f64]) {
        match &self.kind {
            SymbolicKind::Operator { func, a, b, c, .. } => {
                let u = a * x + b;
                let fp = func.derivative(u);
                out[0] += g * c * fp * x;
                out[1] += g * c * fp;
                out[2] += g * func.eval(u);
                out[3] += g;
            }
            SymbolicKind::Linear { .. } => {
                out[0] += g * x;
                out[1] += g;
            }
            SymbolicKind::DiscreteMap { values } => {
                if !values.is_empty() {
                    out[code_index(x, values.len())] += g;
                }
            }
        }
    }

    pub fn operator_name(&self) -> &'static str {
        match &self.kind {
            SymbolicKind::Operator { func, .. } => func.name(),
            SymbolicKind::Linear { .. } => "linear",
            SymbolicKind::DiscreteMap { .. } => "discrete_map",
        }
    }
}
