#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) {
    debug_assert_eq!(params.len(), grads.len());
    state.t += 1;
    let bc1 = 1.0 - BETA1.powi(state.t as i32);
    let bc2 = 1.0 - BETA2.powi(state.t as i32);
    for (k, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
        let m = BETA1 * state.m[k] + (1.0 - BETA1) * g;
        let v = BETA2 * state.v[k] + (1.0 - BETA2) * g * g;
        state.m[k] = m;
        state.v[k] = v;
        *p -= lr * (m / bc1) / ((v / bc2).sqrt() + EPSILON);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = [1.0, -2.0];
        let mut s = AdamState::new(2);
        s.m = vec![0.5, 0.5];
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1);
        assert!(s.m[0] < 0.5);
        let mut q = [1.0, -2.0];
        let mut fresh = AdamState::new(2);
        adam_step(&mut q, &[0.0, 0.0], &mut fresh, 0.1);
        assert_eq!(q, [1.0, -2.0]);
    }

    #[test]
    fn constant_gradient_limit() {
        let mut p = [0.0];
        let mut s = AdamState::new(1);
        let mut last = 0.0;
        for _ in 0..2000 {
            let before = p[0];
            adam_step(&mut p, &[3.0], &mut s, 0.01);
            last = before - p[0];
        }
        assert!((last - 0.01).abs() < 1e-6);
    }
}
