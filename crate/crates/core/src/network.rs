//! Layered grid of edge activations with a cached batched forward pass,
//! reverse-mode gradients, sparsity penalties and threshold pruning.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StandardUniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::splines::{Activation, BaseFn, KnotVector};

/// Kind of one input column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputKind {
    Continuous,
    /// Integer codes `0..categories`.
    Categorical { categories: usize },
}

/// Edges between two consecutive node layers, stored row-major by output
/// node: edge `(j, i)` lives at `j * n_in + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub edges: Vec<Activation>,
}

impl Layer {
    #[inline]
    pub fn edge(&self, j: usize, i: usize) -> &Activation {
        &self.edges[j * self.n_in + i]
    }

    #[inline]
    pub fn edge_mut(&mut self, j: usize, i: usize) -> &mut Activation {
        &mut self.edges[j * self.n_in + i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    shape: Vec<usize>,
    layers: Vec<Layer>,
    input_meta: Vec<InputKind>,
}

/// Intermediate values of one forward pass.
///
/// `nodes[l][i][s]` is the value of node `i` in layer `l` for row `s`
/// (layer 0 holds the inputs, the last layer the output); `post[l][e][s]`
/// is the output of edge `e` of layer `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub rows: usize,
    pub nodes: Vec<Vec<Vec<f64>>>,
    pub post: Vec<Vec<Vec<f64>>>,
}

impl ForwardCache {
    pub fn theta(&self) -> &[f64] {
        &self.nodes[self.nodes.len() - 1][0]
    }
}

/// Per-edge parameter gradients, laid out like [`Activation::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Vec<Vec<f64>>>,
}

impl Gradients {
    pub fn edge(&self, l: usize, e: usize) -> &[f64] {
        &self.layers[l][e]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flatten().flatten().copied().collect()
    }

    pub fn add_scaled(&mut self, other: &Gradients, k: f64) {
        for (a, b) in self.layers.iter_mut().flatten().zip(other.layers.iter().flatten()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += k * y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().flatten().flatten().all(|v| *v == 0.0)
    }
}

/// Regularization statistics of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RegPenalty {
    /// Mean absolute post-activation per edge, `[layer][edge]`.
    pub edge_l1: Vec<Vec<f64>>,
    pub layer_l1: Vec<f64>,
    pub layer_entropy: Vec<f64>,
    pub coeff_l1: Vec<f64>,
    pub total: f64,
}

/// Result of pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    pub network: Network,
    /// Input columns left without any active outgoing edge.
    pub dropped_inputs: Vec<usize>,
}

impl Activation {
    /// Trainable parameters: `[w_b, w_s, c_0, ..]` for spline edges, the
    /// symbolic parameters once a closed form has been assigned.
    pub fn params(&self) -> Vec<f64> {
        match &self.symbolic {
            Some(s) => s.params(),
            None => {
                let mut p = Vec::with_capacity(2 + self.coeffs.len());
                p.push(self.w_b);
                p.push(self.w_s);
                p.extend_from_slice(&self.coeffs);
                p
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match &self.symbolic {
            Some(s) => s.param_count(),
            None => 2 + self.coeffs.len(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) {
        match &mut self.symbolic {
            Some(s) => s.set_params(p),
            None => {
                self.w_b = p[0];
                self.w_s = p[1];
                let n = self.coeffs.len();
                self.coeffs.copy_from_slice(&p[2..2 + n]);
            }
        }
    }
}

/// Builds a freshly initialized network.
///
/// Every edge gets `w_s = 1`, `w_b = 1/n_in + U[-xi_b, xi_b]` and spline
/// coefficients drawn from `N(0, (xi_s/G)²)`, with knots over `[-1, 1]`.
pub fn init_network(
    shape: &[usize],
    base: BaseFn,
    grid: usize,
    degree: usize,
    xi_b: f64,
    xi_s: f64,
    seed: u64,
) -> Result<Network> {
    if shape.len() < 2 {
        return Err(invalid("network shape needs at least an input and an output width"));
    }
    if shape.contains(&0) {
        return Err(invalid("network widths must be at least 1"));
    }
    if *shape.last().unwrap_or(&0) != 1 {
        return Err(invalid("network output width must be 1"));
    }
    if xi_b < 0.0 || xi_s < 0.0 {
        return Err(invalid("initialization noise must be non-negative"));
    }
    let knots = KnotVector::new(-1.0, 1.0, grid, degree)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(shape.len() - 1);
    for w in shape.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let mut edges = Vec::with_capacity(n_in * n_out);
        for _ in 0..n_in * n_out {
            let u: f64 = StandardUniform.sample(&mut rng);
            let w_b = 1.0 / n_in as f64 + xi_b * (2.0 * u - 1.0);
            let coeffs: Vec<f64> = (0..knots.basis_count())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    xi_s / grid as f64 * z
                })
                .collect();
            edges.push(Activation::new(knots.clone(), coeffs, w_b, 1.0, base)?);
        }
        layers.push(Layer { n_in, n_out, edges });
    }
    Ok(Network { shape: shape.to_vec(), layers, input_meta: vec![InputKind::Continuous; shape[0]] })
}

fn column_range(values: &[f64]) -> (f64, f64) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(lo < hi) {
        let v = if lo.is_finite() { lo } else { 0.0 };
        (v - 1.0, v + 1.0)
    } else {
        (lo, hi)
    }
}

impl Network {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_meta(&self) -> &[InputKind] {
        &self.input_meta
    }

    /// Declares input column kinds; categorical inputs get knots spanning
    /// their code range.
    pub fn set_input_meta(&mut self, meta: Vec<InputKind>) -> Result<()> {
        if meta.len() != self.shape[0] {
            return Err(invalid("input metadata length must match the input width"));
        }
        for (i, kind) in meta.iter().enumerate() {
            if let InputKind::Categorical { categories } = kind {
                let hi = (*categories as f64 - 1.0).max(1.0);
                self.rebuild_input_knots(i, 0.0, hi)?;
            }
        }
        self.input_meta = meta;
        Ok(())
    }

    fn rebuild_input_knots(&mut self, i: usize, lo: f64, hi: f64) -> Result<()> {
        let layer = &mut self.layers[0];
        for j in 0..layer.n_out {
            let e = layer.edge_mut(j, i);
            e.knots = KnotVector::new(lo, hi, e.knots.grid(), e.knots.degree())?;
        }
        Ok(())
    }

    /// Places layer-0 knots over the observed range of each continuous
    /// input column. Coefficients are kept as they are.
    pub fn fit_input_knots(&mut self, x: &Matrix) -> Result<()> {
        self.check_input(x)?;
        for i in 0..self.shape[0] {
            if let InputKind::Continuous = self.input_meta[i] {
                let (lo, hi) = column_range(&x.column(i));
                self.rebuild_input_knots(i, lo, hi)?;
            }
        }
        Ok(())
    }

    /// Refits every hidden-layer edge so its knots cover the current values
    /// of its input node, as seen in `cache`. The old range endpoints are
    /// kept among the samples, so hidden ranges only ever grow: a node whose
    /// values briefly collapse would otherwise get a tiny knot span and
    /// extrapolate wildly as soon as it drifts.
    pub fn refresh_hidden_knots(&mut self, cache: &ForwardCache) -> Result<()> {
        self.check_cache(cache)?;
        let mut samples = Vec::with_capacity(cache.rows + 2);
        for l in 1..self.layers.len() {
            let layer = &mut self.layers[l];
            for i in 0..layer.n_in {
                for j in 0..layer.n_out {
                    let e = layer.edge_mut(j, i);
                    if e.active && e.symbolic.is_none() {
                        samples.clear();
                        samples.extend_from_slice(&cache.nodes[l][i]);
                        samples.extend([e.knots.lo(), e.knots.hi()]);
                        *e = e.refresh_knots(&samples)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.shape[0] {
            return Err(invalid(format!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.shape[0]
            )));
        }
        Ok(())
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        let consistent = cache.nodes.len() == self.shape.len()
            && cache.nodes.iter().zip(&self.shape).all(|(n, &w)| n.len() == w)
            && cache.nodes.iter().flatten().all(|v| v.len() == cache.rows)
            && cache.post.len() == self.layers.len();
        if consistent {
            Ok(())
        } else {
            Err(Error::InvalidState("forward cache does not match the network".into()))
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(x)?;
        let rows = x.rows();
        let mut nodes = Vec::with_capacity(self.shape.len());
        nodes.push((0..self.shape[0]).map(|i| x.column(i)).collect::<Vec<_>>());
        let mut post = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input: &Vec<Vec<f64>> = &nodes[nodes.len() - 1];
            let mut out = vec![vec![0.0; rows]; layer.n_out];
            let mut layer_post = Vec::with_capacity(layer.edges.len());
            for j in 0..layer.n_out {
                for i in 0..layer.n_in {
                    let e = layer.edge(j, i);
                    if !e.active {
                        layer_post.push(vec![0.0; rows]);
                        continue;
                    }
                    let vals: Vec<f64> = input[i].iter().map(|&v| e.output(v)).collect();
                    for (o, v) in out[j].iter_mut().zip(&vals) {
                        *o += v;
                    }
                    layer_post.push(vals);
                }
            }
            post.push(layer_post);
            nodes.push(out);
        }
        let theta = nodes[nodes.len() - 1][0].clone();
        Ok((theta, ForwardCache { rows, nodes, post }))
    }

    /// Log-partial hazard for every row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0)
    }

    fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| l.edges.iter().map(|e| vec![0.0; e.param_count()]).collect())
                .collect(),
        }
    }

    /// Reverse pass. `post_grads[l][e][s]`, when given, adds a direct
    /// gradient on edge outputs (used by the sparsity penalty).
    fn reverse(&self, cache: &ForwardCache, dl_dtheta: &[f64], post_grads: Option<&[Vec<Vec<f64>>]>) -> Result<Gradients> {
        self.check_cache(cache)?;
        if dl_dtheta.len() != cache.rows {
            return Err(Error::InvalidState("upstream gradient length does not match the cached batch".into()));
        }
        let rows = cache.rows;
        let mut grads = self.zero_gradients();
        let mut upstream = vec![dl_dtheta.to_vec()];
        let mut g = vec![0.0; rows];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.nodes[l];
            let mut down = if l > 0 { vec![vec![0.0; rows]; layer.n_in] } else { Vec::new() };
            for j in 0..layer.n_out {
                for i in 0..layer.n_in {
                    let idx = j * layer.n_in + i;
                    let e = &layer.edges[idx];
                    if !e.active {
                        continue;
                    }
                    for s in 0..rows {
                        g[s] = upstream[j][s];
                    }
                    if let Some(pg) = post_grads {
                        for (gs, p) in g.iter_mut().zip(&pg[l][idx]) {
                            *gs += p;
                        }
                    }
                    let out = &mut grads.layers[l][idx];
                    match &e.symbolic {
                        Some(sym) => {
                            for s in 0..rows {
                                let gs = g[s];
                                if gs == 0.0 {
                                    continue;
                                }
                                let xv = input[i][s];
                                sym.accumulate_param_grads(xv, gs, out);
                                if l > 0 {
                                    down[i][s] += gs * sym.d_input(xv);
                                }
                            }
                        }
                        None => {
                            let n = e.knots.degree() + 1;
                            for s in 0..rows {
                                let gs = g[s];
                                if gs == 0.0 {
                                    continue;
                                }
                                let loc = e.local_eval(input[i][s]);
                                out[0] += gs * loc.base;
                                out[1] += gs * loc.spline;
                                let gw = gs * e.w_s;
                                for r in 0..n {
                                    out[2 + loc.first + r] += gw * loc.vals[r];
                                }
                                if l > 0 {
                                    down[i][s] += gs * (e.w_b * loc.d_base + e.w_s * loc.d_spline);
                                }
                            }
                        }
                    }
                }
            }
            upstream = down;
        }
        Ok(grads)
    }

    /// Gradients of a loss with respect to every trainable parameter, given
    /// the loss gradient with respect to the network output.
    pub fn backward(&self, cache: &ForwardCache, dl_dtheta: &[f64]) -> Result<Gradients> {
        self.reverse(cache, dl_dtheta, None)
    }

    pub fn penalty(&self, cache: &ForwardCache, lambda_ent: f64, lambda_coef: f64) -> Result<RegPenalty> {
        self.check_cache(cache)?;
        let n = cache.rows.max(1) as f64;
        let mut edge_l1 = Vec::with_capacity(self.layers.len());
        let mut layer_l1 = Vec::new();
        let mut layer_entropy = Vec::new();
        let mut coeff_l1 = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let l1: Vec<f64> = layer
                .edges
                .iter()
                .enumerate()
                .map(|(e, a)| if a.active { cache.post[l][e].iter().map(|v| v.abs()).sum::<f64>() / n } else { 0.0 })
                .collect();
            let total: f64 = l1.iter().sum();
            layer_entropy.push(entropy(&l1, total));
            layer_l1.push(total);
            coeff_l1.push(
                layer
                    .edges
                    .iter()
                    .filter(|a| a.active)
                    .map(|a| a.coeffs.iter().map(|c| c.abs()).sum::<f64>() / a.coeffs.len() as f64)
                    .sum(),
            );
            edge_l1.push(l1);
        }
        let total = layer_l1.iter().sum::<f64>()
            + lambda_ent * layer_entropy.iter().sum::<f64>()
            + lambda_coef * coeff_l1.iter().sum::<f64>();
        Ok(RegPenalty { edge_l1, layer_l1, layer_entropy, coeff_l1, total })
    }

    /// `∂R/∂post[l][e][s]` for the activation-magnitude and entropy terms.
    fn penalty_post_grads(&self, cache: &ForwardCache, pen: &RegPenalty, lambda_ent: f64) -> Vec<Vec<Vec<f64>>> {
        let n = cache.rows.max(1) as f64;
        let mut out = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let a_total = pen.layer_l1[l];
            let s = pen.layer_entropy[l];
            let mut lp = Vec::with_capacity(layer.edges.len());
            for (e, act) in layer.edges.iter().enumerate() {
                let a_e = pen.edge_l1[l][e];
                if !act.active || a_e == 0.0 {
                    lp.push(vec![0.0; cache.rows]);
                    continue;
                }
                // dS/da_e = (-log p_e - S) / A
                let p = a_e / a_total;
                let d_ent = (-p.ln() - s) / a_total;
                let k = (1.0 + lambda_ent * d_ent) / n;
                lp.push(cache.post[l][e].iter().map(|&v| k * signum0(v)).collect());
            }
            out.push(lp);
        }
        out
    }

    fn add_coeff_l1_grads(&self, grads: &mut Gradients, scale: f64) {
        for (l, layer) in self.layers.iter().enumerate() {
            for (e, a) in layer.edges.iter().enumerate() {
                if !a.active || a.symbolic.is_some() {
                    continue;
                }
                let k = scale / a.coeffs.len() as f64;
                for (g, c) in grads.layers[l][e][2..].iter_mut().zip(&a.coeffs) {
                    *g += k * signum0(*c);
                }
            }
        }
    }

    /// Subgradient of the total penalty `R` (with `sign(0) = 0`).
    pub fn penalty_grads(&self, cache: &ForwardCache, lambda_ent: f64, lambda_coef: f64) -> Result<Gradients> {
        let pen = self.penalty(cache, lambda_ent, lambda_coef)?;
        let post = self.penalty_post_grads(cache, &pen, lambda_ent);
        let zeros = vec![0.0; cache.rows];
        let mut grads = self.reverse(cache, &zeros, Some(&post))?;
        self.add_coeff_l1_grads(&mut grads, lambda_coef);
        Ok(grads)
    }

    /// Gradients of `loss(θ) + λ·R` in a single reverse pass, together with
    /// the penalty statistics.
    pub fn regularized_gradients(
        &self,
        cache: &ForwardCache,
        dl_dtheta: &[f64],
        lambda: f64,
        lambda_ent: f64,
        lambda_coef: f64,
    ) -> Result<(Gradients, RegPenalty)> {
        let pen = self.penalty(cache, lambda_ent, lambda_coef)?;
        if lambda == 0.0 {
            return Ok((self.reverse(cache, dl_dtheta, None)?, pen));
        }
        let mut post = self.penalty_post_grads(cache, &pen, lambda_ent);
        for v in post.iter_mut().flatten().flatten() {
            *v *= lambda;
        }
        let mut grads = self.reverse(cache, dl_dtheta, Some(&post))?;
        self.add_coeff_l1_grads(&mut grads, lambda * lambda_coef);
        Ok((grads, pen))
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.edges.iter()).flat_map(|e| e.params()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.edges.iter()).map(|e| e.param_count()).sum()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(invalid("parameter vector length does not match the network"));
        }
        let mut off = 0;
        for e in self.layers.iter_mut().flat_map(|l| l.edges.iter_mut()) {
            let n = e.param_count();
            e.set_params(&p[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn active_edge_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.edges.iter()).filter(|e| e.active).count()
    }

    /// Input columns with at least one active outgoing edge.
    pub fn used_inputs(&self) -> Vec<usize> {
        let l0 = &self.layers[0];
        (0..l0.n_in).filter(|&i| (0..l0.n_out).any(|j| l0.edge(j, i).active)).collect()
    }

    /// Deactivates edges whose mean magnitude in `cache` is below
    /// `threshold`, then removes hidden nodes left without active inputs or
    /// outputs.
    pub fn prune(&self, threshold: f64, cache: &ForwardCache) -> Result<Pruned> {
        let pen = self.penalty(cache, 0.0, 0.0)?;
        match self.prune_with_l1(threshold, &pen.edge_l1) {
            Some(p) => Ok(p),
            None => {
                let mut cands: Vec<f64> = pen.edge_l1.iter().flatten().copied().collect();
                cands.push(0.0);
                cands.sort_by(|a, b| b.total_cmp(a));
                let max_feasible = cands
                    .into_iter()
                    .find(|&t| self.prune_with_l1(t, &pen.edge_l1).is_some())
                    .unwrap_or(0.0);
                Err(Error::PruneTooAggressive { max_feasible })
            }
        }
    }

    pub(crate) fn prune_with_l1(&self, threshold: f64, edge_l1: &[Vec<f64>]) -> Option<Pruned> {
        let mut net = self.clone();
        for (layer, l1) in net.layers.iter_mut().zip(edge_l1) {
            for (e, &v) in layer.edges.iter_mut().zip(l1) {
                if v < threshold {
                    e.active = false;
                }
            }
        }
        net.cascade_nodes();
        let out = &net.layers[net.layers.len() - 1];
        if !out.edges.iter().any(|e| e.active) {
            return None;
        }
        let used = net.used_inputs();
        let dropped_inputs = (0..net.shape[0]).filter(|i| !used.contains(i)).collect();
        Some(Pruned { network: net, dropped_inputs })
    }

    fn cascade_nodes(&mut self) {
        loop {
            let mut changed = false;
            for l in 1..self.layers.len() {
                let width = self.shape[l];
                for node in 0..width {
                    let incoming = {
                        let prev = &self.layers[l - 1];
                        (0..prev.n_in).any(|i| prev.edge(node, i).active)
                    };
                    let outgoing = {
                        let next = &self.layers[l];
                        (0..next.n_out).any(|j| next.edge(j, node).active)
                    };
                    if incoming && outgoing {
                        continue;
                    }
                    let prev = &mut self.layers[l - 1];
                    for i in 0..prev.n_in {
                        let e = prev.edge_mut(node, i);
                        changed |= e.active;
                        e.active = false;
                    }
                    let next = &mut self.layers[l];
                    for j in 0..next.n_out {
                        let e = next.edge_mut(j, node);
                        changed |= e.active;
                        e.active = false;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }
}

#[inline]
fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Entropy of the edge magnitude distribution, `0·log 0 = 0`, and zero for
/// an all-zero layer.
fn entropy(l1: &[f64], total: f64) -> f64 {
    if !(total > 0.0) {
        return 0.0;
    }
    -l1.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / total;
            p * p.ln()
        })
        .sum::<f64>()
}
