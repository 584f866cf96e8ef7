use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::cox::{FastCox, SurvivalOutcome};
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::network::Network;
use crate::train::{adam_step, AdamState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self { steps: 50, learning_rate: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinetuneReport {
    /// Normalized Cox loss before and after.
    pub loss_before: f64,
    pub loss_after: f64,
    /// Set when the loss diverged and the input parameters were restored.
    pub restored: bool,
}

pub(crate) fn require_symbolic(net: &Network) -> Result<()> {
    let spline_edge = net.layers().iter().flat_map(|l| l.edges.iter()).any(|e| e.active && e.symbolic.is_none());
    if spline_edge {
        Err(Error::InvalidState("network still has spline edges; run symbolic fitting first".into()))
    } else {
        Ok(())
    }
}

/// Adam on the symbolic parameters against the normalized sorted-prefix Cox
/// loss, operators held fixed. Steps are taken relative to each parameter's
/// starting magnitude (floored at 0.01), so fitted coefficients of very
/// different sizes move at comparable rates. The lowest-loss parameters seen
/// (including the starting point) are returned.
pub fn finetune_affine(
    net: &Network,
    x: &Matrix,
    outcome: &SurvivalOutcome,
    cfg: &FinetuneConfig,
) -> Result<(Network, FinetuneReport)> {
    require_symbolic(net)?;
    if outcome.event_count() == 0 {
        return Err(invalid("fine-tuning data has no observed events"));
    }
    let cox = FastCox::new(outcome);
    let scale = 1.0 / cox.n_events() as f64;
    let mut cur = net.clone();
    let start = cur.params();
    let scale_p: Vec<f64> = start.iter().map(|p| p.abs().max(0.01)).collect();
    let mut u = vec![0.0; start.len()];
    let mut best = start.clone();
    let mut adam = AdamState::new(start.len());
    let mut before = f64::NAN;
    let mut best_loss = f64::INFINITY;
    for step in 0..=cfg.steps {
        let (theta, cache) = cur.forward(x)?;
        let (loss, mut dl) = cox.loss_and_grad(&theta);
        let loss = loss * scale;
        if step == 0 {
            before = loss;
        }
        if !loss.is_finite() {
            log::warn!("fine-tuning diverged at step {step}; restoring the fitted parameters");
            return Ok((net.clone(), FinetuneReport { loss_before: before, loss_after: before, restored: true }));
        }
        if loss < best_loss {
            best_loss = loss;
            best = cur.params();
        }
        if step == cfg.steps {
            break;
        }
        for g in dl.iter_mut() {
            *g *= scale;
        }
        let grads: Vec<f64> = cur.backward(&cache, &dl)?.flatten().iter().zip(&scale_p).map(|(g, s)| g * s).collect();
        adam_step(&mut u, &grads, &mut adam, cfg.learning_rate);
        let params: Vec<f64> = start.iter().zip(&scale_p).zip(&u).map(|((p, s), u)| p + s * u).collect();
        cur.set_params(&params)?;
    }
    cur.set_params(&best)?;
    Ok((cur, FinetuneReport { loss_before: before, loss_after: best_loss, restored: false }))
}
