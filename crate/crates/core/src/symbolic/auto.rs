use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::fit::{fit_affine, fit_linear, AffineFit, GridSearch};
use super::library::{operator_library, Func, OperatorKind};
use super::{SymbolicEdge, SymbolicKind};
use crate::error::{Error, Result};
use crate::network::{ForwardCache, InputKind, Network};

/// A linear fit above this R² is accepted before any other operator is tried.
pub const LINEAR_ACCEPT_R2: f64 = 0.99;
/// Edges whose best fit falls below this R² are flagged.
pub const LOW_FIDELITY_R2: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SymbolicOptions {
    pub grid: GridSearch,
    /// Operators within this R² of the best fit count as tied; ties go to
    /// the lowest complexity, then to the higher R².
    pub r2_tolerance: f64,
    /// An operator whose unexplained variance `1 - R²` is at most this
    /// multiple of the best fit's also counts as tied.
    pub residual_ratio: f64,
    /// When any operator clears this R², the simplest such operator wins
    /// outright (higher R² among equally simple ones). `None` disables the
    /// rule, leaving only the tolerance ties.
    pub accept_r2: Option<f64>,
    /// Restricts the candidate operators by name; empty means the whole
    /// library.
    pub operators: Vec<String>,
}

impl Default for SymbolicOptions {
    fn default() -> Self {
        Self { grid: GridSearch::default(), r2_tolerance: 2e-3, residual_ratio: 2.0, accept_r2: Some(LINEAR_ACCEPT_R2), operators: Vec::new() }
    }
}

/// How one edge was converted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFitReport {
    pub layer: usize,
    pub input: usize,
    pub output: usize,
    pub operator: String,
    pub r2: f64,
    pub low_fidelity: bool,
    /// R² of every operator tried, in library order.
    pub candidates: Vec<(String, f64)>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Per-code mean of `ys`; codes never seen get the overall mean.
fn discrete_map(xs: &[f64], ys: &[f64], categories: usize) -> (Vec<f64>, f64) {
    let mut sum = vec![0.0; categories];
    let mut count = vec![0usize; categories];
    for (&x, &y) in xs.iter().zip(ys) {
        let c = super::code_index(x, categories);
        sum[c] += y;
        count[c] += 1;
    }
    let overall = mean(ys);
    let values: Vec<f64> = sum.iter().zip(&count).map(|(s, &n)| if n > 0 { s / n as f64 } else { overall }).collect();
    let edge = SymbolicEdge::new(SymbolicKind::DiscreteMap { values: values.clone() }, 1.0);
    let pred: Vec<f64> = xs.iter().map(|&x| edge.value(x)).collect();
    (values, super::fit::r_squared(ys, &pred))
}

fn fit_continuous(xs: &[f64], ys: &[f64], opts: &SymbolicOptions) -> Result<(SymbolicEdge, Vec<(String, f64)>)> {
    let mut candidates = Vec::new();
    let linear = match fit_linear(xs, ys) {
        Ok(l) => l,
        // a single distinct input value: the edge is a constant
        Err(Error::InvalidArgument(_)) => {
            let edge = SymbolicEdge::new(SymbolicKind::Linear { a: 0.0, b: mean(ys) }, 1.0);
            return Ok((edge, vec![("linear".to_string(), 1.0)]));
        }
        Err(e) => return Err(e),
    };
    candidates.push(("linear".to_string(), linear.r2));
    let linear_edge = SymbolicEdge::new(SymbolicKind::Linear { a: linear.a, b: linear.b }, linear.r2);
    if linear.r2 > LINEAR_ACCEPT_R2 {
        return Ok((linear_edge, candidates));
    }
    let mut fits = Vec::new();
    for op in operator_library() {
        let OperatorKind::Affine(func) = op.kind else { continue };
        if !opts.operators.is_empty() && !opts.operators.iter().any(|n| n == op.name) {
            continue;
        }
        match fit_affine(func, xs, ys, &opts.grid) {
            Ok(f) if f.r2.is_finite() => {
                candidates.push((op.name.to_string(), f.r2));
                fits.push((func, op.complexity, f));
            }
            Ok(_) | Err(Error::UnfittableOperator(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let best = fits.iter().map(|(_, _, f)| f.r2).fold(f64::NEG_INFINITY, f64::max);
    let simplest = |pool: &mut dyn Iterator<Item = &(Func, u8, AffineFit)>| {
        pool.min_by(|a, b| a.1.cmp(&b.1).then(b.2.r2.total_cmp(&a.2.r2))).copied()
    };
    let accepted = opts.accept_r2.and_then(|t| simplest(&mut fits.iter().filter(|(_, _, f)| f.r2 > t)));
    let chosen = accepted.or_else(|| {
        simplest(&mut fits.iter().filter(|(_, _, f)| {
            f.r2 >= best - opts.r2_tolerance || 1.0 - f.r2 <= opts.residual_ratio * (1.0 - best)
        }))
    });
    let edge = match chosen {
        Some((func, _, f)) if f.r2 > linear.r2 => {
            SymbolicEdge::new(SymbolicKind::Operator { func, a: f.a, b: f.b, c: f.c, d: f.d }, f.r2)
        }
        _ => linear_edge,
    };
    Ok((edge, candidates))
}

/// Replaces every active spline edge with its best closed form, fitted on
/// the (input, output) samples of `cache`. Categorical inputs become
/// discrete maps; everything else tries a line first and then the operator
/// library. Edges that already carry a symbolic form are kept.
pub fn auto_symbolic(net: &Network, cache: &ForwardCache, opts: &SymbolicOptions) -> Result<(Network, Vec<EdgeFitReport>)> {
    if cache.nodes.len() != net.shape().len() || cache.post.len() != net.depth() {
        return Err(Error::InvalidState("forward cache does not match the network".into()));
    }
    let mut out = net.clone();
    let mut reports = Vec::new();
    for (l, layer) in net.layers().iter().enumerate() {
        for j in 0..layer.n_out {
            for i in 0..layer.n_in {
                let e = j * layer.n_in + i;
                let act = &layer.edges[e];
                if !act.active {
                    continue;
                }
                if let Some(sym) = &act.symbolic {
                    reports.push(EdgeFitReport {
                        layer: l,
                        input: i,
                        output: j,
                        operator: sym.operator_name().to_string(),
                        r2: sym.r2,
                        low_fidelity: sym.low_fidelity,
                        candidates: Vec::new(),
                    });
                    continue;
                }
                let xs = &cache.nodes[l][i];
                let ys = &cache.post[l][e];
                let categorical = match (l, net.input_meta().get(i)) {
                    (0, Some(InputKind::Categorical { categories })) => Some(*categories),
                    _ => None,
                };
                let (mut edge, candidates) = match categorical {
                    Some(n) => {
                        let (values, r2) = discrete_map(xs, ys, n);
                        (SymbolicEdge::new(SymbolicKind::DiscreteMap { values }, r2), vec![("discrete_map".into(), r2)])
                    }
                    None => fit_continuous(xs, ys, opts)?,
                };
                edge.low_fidelity = edge.r2 < LOW_FIDELITY_R2;
                if edge.low_fidelity {
                    log::warn!(
                        "edge layer {l} in {i} out {j}: best fit {} has R² {:.3}; consider exporting its samples",
                        edge.operator_name(),
                        edge.r2
                    );
                }
                reports.push(EdgeFitReport {
                    layer: l,
                    input: i,
                    output: j,
                    operator: edge.operator_name().to_string(),
                    r2: edge.r2,
                    low_fidelity: edge.low_fidelity,
                    candidates,
                });
                out.layers_mut()[l].edges[e].symbolic = Some(edge);
            }
        }
    }
    Ok((out, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::network::init_network;
    use crate::splines::BaseFn;

    #[test]
    fn pure_base_edge_becomes_linear() {
        let mut net = init_network(&[1, 1], BaseFn::Identity, 3, 3, 0.0, 0.0, 0).unwrap();
        net.layers_mut()[0].edges[0].w_b = 1.7;
        let x = Matrix::from_rows(&(0..20).map(|i| alloc::vec![i as f64 / 10.0 - 1.0]).collect::<Vec<_>>()).unwrap();
        let (_, cache) = net.forward(&x).unwrap();
        let (sym, rep) = auto_symbolic(&net, &cache, &SymbolicOptions::default()).unwrap();
        match &sym.layers()[0].edges[0].symbolic.as_ref().unwrap().kind {
            SymbolicKind::Linear { a, b } => {
                assert!((a - 1.7).abs() < 1e-12 && b.abs() < 1e-12);
            }
            k => panic!("{k:?}"),
        }
        assert!((rep[0].r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn categorical_edge_maps_means() {
        let xs = [0.0, 1.0, 2.0, 1.0, 0.0, 2.0];
        let ys = [1.0, 2.0, 5.0, 4.0, 3.0, 7.0];
        let (values, _) = discrete_map(&xs, &ys, 4);
        assert_eq!(values, alloc::vec![2.0, 3.0, 6.0, 11.0 / 3.0]);
    }
}
