#[allow(unused_imports)]
use num_traits::Float;
use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::finetune::require_symbolic;
use super::library::Func;
use super::{SymbolicEdge, SymbolicKind};
use crate::error::Result;
use crate::expr::Expr;
use crate::network::Network;

/// Log-partial hazard as a sum of top-level terms plus a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formula {
    pub terms: Vec<Expr>,
    pub constant: f64,
}

impl Formula {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum::<f64>() + self.constant
    }

    pub fn to_expr(&self) -> Expr {
        let sum = self.terms.iter().cloned().reduce(Expr::add).unwrap_or(Expr::constant(0.0));
        Expr::add(sum, Expr::constant(self.constant))
    }

    pub fn render(&self, names: &[String], labels: &[Vec<String>], sig: usize) -> String {
        self.to_expr().render(names, labels, sig)
    }
}

/// Value of one node as additive terms plus a constant.
#[derive(Clone)]
struct NodeSum {
    terms: Vec<Expr>,
    constant: f64,
}

impl NodeSum {
    fn to_expr(&self) -> Expr {
        let sum = self.terms.iter().cloned().reduce(Expr::add).unwrap_or(Expr::constant(0.0));
        Expr::add(sum, Expr::constant(self.constant))
    }
}

fn linear_map(input: &NodeSum, a: f64, b: f64) -> NodeSum {
    NodeSum {
        terms: input.terms.iter().map(|t| Expr::scale(a, t.clone())).filter(|t| t.as_const() != Some(0.0)).collect(),
        constant: a * input.constant + b,
    }
}

/// Applies an edge to its input node. Linear edges distribute over the
/// input's terms, so purely linear paths end up as separate terms.
fn apply_edge(edge: &SymbolicEdge, input: &NodeSum) -> NodeSum {
    match &edge.kind {
        SymbolicKind::Linear { a, b } => linear_map(input, *a, *b),
        SymbolicKind::Operator { func: Func::Identity, a, b, c, d } => linear_map(input, c * a, c * b + d),
        SymbolicKind::Operator { func: Func::Exp, a, b, c, d } => {
            // c·exp(a·s + k) = (c·e^k)·exp(a·s)
            let k = a * input.constant + b;
            let inner = input.terms.iter().map(|t| Expr::scale(*a, t.clone())).reduce(Expr::add).unwrap_or(Expr::constant(0.0));
            NodeSum { terms: vec![Expr::scale(c * k.exp(), Expr::call(Func::Exp, inner))], constant: *d }
        }
        SymbolicKind::Operator { func, a, b, c, d } => {
            let inner = Expr::add(
                input.terms.iter().map(|t| Expr::scale(*a, t.clone())).reduce(Expr::add).unwrap_or(Expr::constant(0.0)),
                Expr::constant(a * input.constant + b),
            );
            NodeSum { terms: vec![Expr::scale(*c, Expr::call(*func, inner))], constant: *d }
        }
        SymbolicKind::DiscreteMap { values } => {
            NodeSum { terms: vec![Expr::Lookup { arg: Box::new(input.to_expr()), values: values.clone() }], constant: 0.0 }
        }
    }
}

/// Builds the formula of a fully symbolic network and renders it with
/// `precision` significant figures. `names` and `labels` describe the input
/// columns as in [`Expr::render`].
pub fn render_formula(net: &Network, names: &[String], labels: &[Vec<String>], precision: usize) -> Result<(Formula, String)> {
    require_symbolic(net)?;
    let mut nodes: Vec<NodeSum> =
        (0..net.shape()[0]).map(|i| NodeSum { terms: vec![Expr::var(i)], constant: 0.0 }).collect();
    for layer in net.layers() {
        let mut next = vec![NodeSum { terms: Vec::new(), constant: 0.0 }; layer.n_out];
        for (j, node) in next.iter_mut().enumerate() {
            for (i, input) in nodes.iter().enumerate() {
                let e = layer.edge(j, i);
                let Some(sym) = e.symbolic.as_ref().filter(|_| e.active) else { continue };
                let part = apply_edge(sym, input);
                node.terms.extend(part.terms);
                node.constant += part.constant;
            }
        }
        nodes = next;
    }
    let out = nodes.swap_remove(0);
    let formula = Formula { terms: out.terms, constant: out.constant };
    let text = formula.render(names, labels, precision);
    Ok((formula, text))
}
