use proptest::prelude::*;
use survkan_core::splines::{basis_values, make_knots};
use survkan_core::{Activation, BaseFn, KnotVector};

fn activation(lo: f64, hi: f64, grid: usize, coeffs: &[f64], w_b: f64, w_s: f64, base: BaseFn) -> Activation {
    let knots = KnotVector::new(lo, hi, grid, 3).unwrap();
    Activation::new(knots, coeffs[..grid + 3].to_vec(), w_b, w_s, base).unwrap()
}

fn rel_close(analytic: f64, numeric: f64, rel: f64, floor: f64) -> bool {
    (analytic - numeric).abs() <= rel * analytic.abs().max(numeric.abs()) + floor
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn partition_of_unity(lo in -5.0..5.0f64, width in 0.1..10.0f64, grid in 1usize..9, degree in 1usize..6, u in 0.001..0.999f64) {
        let kv = make_knots(lo, lo + width, grid, degree).unwrap();
        let x = lo + u * width;
        let sum: f64 = basis_values(x, &kv).iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-10, "sum {sum}");
        prop_assert!(basis_values(x, &kv).iter().all(|&b| b >= -1e-15));
    }

    #[test]
    fn coefficient_changes_stay_in_support(grid in 1usize..8, idx in 0usize..10, bump in 0.1..3.0f64, u in 0.0..1.0f64) {
        let kv = make_knots(-1.0, 1.0, grid, 3).unwrap();
        let i = idx % kv.basis_count();
        let base: Vec<f64> = (0..kv.basis_count()).map(|k| (k as f64 * 0.7).sin()).collect();
        let a = Activation::new(kv.clone(), base.clone(), 0.3, 1.2, BaseFn::Silu).unwrap();
        let mut bumped = base;
        bumped[i] += bump;
        let b = Activation::new(kv.clone(), bumped, 0.3, 1.2, BaseFn::Silu).unwrap();
        let x = -1.0 + 2.0 * u;
        let (s_lo, s_hi) = kv.support(i);
        if x < s_lo || x >= s_hi {
            prop_assert_eq!(a.value(x), b.value(x));
        }
    }

    #[test]
    fn activation_grads_match_finite_differences(
        coeffs in prop::collection::vec(-1.0..1.0f64, 8),
        w_b in -2.0..2.0f64,
        w_s in -2.0..2.0f64,
        silu in any::<bool>(),
        grid in 1usize..6,
        x in -1.2..1.2f64,
    ) {
        let base = if silu { BaseFn::Silu } else { BaseFn::Identity };
        let a = activation(-1.0, 1.0, grid, &coeffs, w_b, w_s, base);
        let g = a.grads(x);
        let h = 1e-5;
        let fd = |f: &dyn Fn(f64) -> f64| (f(h) - f(-h)) / (2.0 * h);
        // a knot inside [x - h, x + h] only breaks the third derivative, which a
        // central difference at this step does not see
        let num_x = fd(&|d| a.value(x + d));
        prop_assert!(rel_close(g.d_x, num_x, 1e-4, 1e-8));
        let num_w_b = fd(&|d| Activation { w_b: w_b + d, ..a.clone() }.value(x));
        let num_w_s = fd(&|d| Activation { w_s: w_s + d, ..a.clone() }.value(x));
        prop_assert!(rel_close(g.d_w_b, num_w_b, 1e-4, 1e-8));
        prop_assert!(rel_close(g.d_w_s, num_w_s, 1e-4, 1e-8));
        for k in 0..a.coeffs.len() {
            let num = fd(&|d| {
                let mut c = a.coeffs.clone();
                c[k] += d;
                Activation { coeffs: c, ..a.clone() }.value(x)
            });
            prop_assert!(rel_close(g.d_coeffs[k], num, 1e-4, 1e-8), "coeff {k}: {} vs {num}", g.d_coeffs[k]);
        }
    }

    #[test]
    fn inactive_edges_contribute_nothing(coeffs in prop::collection::vec(-5.0..5.0f64, 8), w_b in -5.0..5.0f64, x in -3.0..3.0f64) {
        let mut a = activation(-1.0, 1.0, 5, &coeffs, w_b, 2.0, BaseFn::Silu);
        a.active = false;
        prop_assert_eq!(a.output(x), 0.0);
    }
}

#[test]
fn derivative_of_unit_coefficients_is_base_only() {
    let a = activation(-1.0, 1.0, 4, &[1.0; 7], 0.7, 1.5, BaseFn::Silu);
    for x in [-0.9, -0.3, 0.0, 0.45, 0.8] {
        let g = a.grads(x);
        assert!((g.d_x - 0.7 * BaseFn::Silu.derivative(x)).abs() < 1e-12);
    }
}

#[test]
fn composed_value_oracle() {
    let coeffs = [0.2, -0.4, 0.9, 0.1, -0.3, 0.5, 0.05];
    let a = activation(-1.0, 1.0, 4, &coeffs, 0.5, 2.0, BaseFn::Silu);
    let kv = make_knots(-1.0, 1.0, 4, 3).unwrap();
    let spline: f64 = basis_values(0.3, &kv).iter().zip(&coeffs).map(|(b, c)| b * c).sum();
    let silu = 0.3 / (1.0 + (-0.3f64).exp());
    assert!((a.value(0.3) - (0.5 * silu + 2.0 * spline)).abs() < 1e-14);
}

#[test]
fn refresh_within_range_reproduces_activation() {
    let coeffs: Vec<f64> = (0..8).map(|k| (k as f64).cos()).collect();
    let a = activation(-1.0, 1.0, 5, &coeffs, 0.4, 1.0, BaseFn::Identity);
    // with the 1% margin these samples map back onto the original knots, so
    // the old spline is exactly representable
    let edge = 1.0 / 1.02;
    let samples: Vec<f64> = (0..200).map(|s| -edge + 2.0 * edge * s as f64 / 199.0).collect();
    let r = a.refresh_knots(&samples).unwrap();
    assert!((r.knots.lo() + 1.0).abs() < 1e-12 && (r.knots.hi() - 1.0).abs() < 1e-12);
    let worst = samples.iter().map(|&x| (r.value(x) - a.value(x)).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "max error {worst}");
}

#[test]
fn refresh_covers_disjoint_samples() {
    let a = activation(-1.0, 1.0, 3, &[0.0; 6], 1.0, 1.0, BaseFn::Identity);
    let r = a.refresh_knots(&[2.0, 3.0]).unwrap();
    assert!(r.knots.lo() <= 2.0 && r.knots.hi() >= 3.0);
}

#[test]
fn quadratic_spline_survives_a_shifted_grid() {
    // c_i chosen so the spline is exactly x^2 on the original span
    let kv = make_knots(-1.0, 1.0, 6, 3).unwrap();
    let design: Vec<Vec<f64>> = (0..400).map(|s| basis_values(-1.0 + 2.0 * s as f64 / 399.0, &kv)).collect();
    let target: Vec<f64> = (0..400).map(|s| (-1.0 + 2.0 * s as f64 / 399.0f64).powi(2)).collect();
    let coeffs = survkan_core::linalg::least_squares(&design, &target, 0.0).unwrap();
    let a = Activation::new(kv, coeffs, 0.0, 1.0, BaseFn::Identity).unwrap();
    let samples: Vec<f64> = (0..300).map(|s| -0.5 + 1.4 * s as f64 / 299.0).collect();
    let r = a.refresh_knots(&samples).unwrap();
    for p in 0..100 {
        let x = -0.5 + 1.4 * p as f64 / 99.0;
        assert!((r.value(x) - x * x).abs() < 1e-4, "x {x}: {}", r.value(x));
    }
}

#[test]
fn identical_samples_widen_to_unit_range() {
    let a = activation(-1.0, 1.0, 3, &[0.1; 6], 1.0, 1.0, BaseFn::Identity);
    let r = a.refresh_knots(&[0.5; 10]).unwrap();
    assert_eq!((r.knots.lo(), r.knots.hi()), (-0.5, 1.5));
}
