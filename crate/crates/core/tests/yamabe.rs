use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yamabe_lab::sphere::{scalar_curvature, ConformalMetric, RadialGrid, ScalarField};
use yamabe_lab::yamabe::{
    check_immersion_sobolev, check_log_sobolev, check_sobolev, einstein_hilbert, estimate_yamabe,
    optimal_tau, quotient_gradient, random_log_fourier, sphere_sobolev_constant, yamabe_quotient,
    YamabeOptions,
};

fn grid(n: usize, m: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(n, m).unwrap())
}

fn perturbed(n: usize, m: usize, a: f64, b: f64) -> ConformalMetric {
    ConformalMetric::radial_fn(grid(n, m), move |t| 1.0 + a * t.cos() + b * (2.0 * t).cos()).unwrap()
}

#[test]
fn sphere_constants() {
    let y3 = 6.0 * (2.0 * PI * PI).powf(2.0 / 3.0);
    assert!((sphere_sobolev_constant(3).unwrap() - y3).abs() < 1e-12 * y3);
    assert!((y3 - 43.823).abs() < 1e-3);
    let y4 = 12.0 * (8.0 * PI * PI / 3.0).sqrt();
    assert!((sphere_sobolev_constant(4).unwrap() - y4).abs() < 1e-12 * y4);
    assert!((y4 - 61.562).abs() < 1e-3);
    assert!(sphere_sobolev_constant(2).is_err());
}

#[test]
fn einstein_hilbert_is_resolution_stable() {
    let a = einstein_hilbert(&perturbed(3, 256, 0.2, 0.0)).unwrap();
    let b = einstein_hilbert(&perturbed(3, 512, 0.2, 0.0)).unwrap();
    assert!(((a - b) / b).abs() < 1e-4, "{a} {b}");
    let y = estimate_yamabe(&perturbed(3, 256, 0.2, 0.0), &YamabeOptions::default()).unwrap();
    assert!(a >= y.value);
}

#[test]
fn gradient_matches_central_differences() {
    let g = perturbed(3, 128, 0.15, -0.05);
    let g0 = g.radial_grid().unwrap().clone();
    let u = random_log_fourier(&g0, 5, 4, 0.3);
    let grad = quotient_gradient(&g, &u).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let v = g0.sample(|t| c[0] + c[1] * t.cos() + c[2] * (2.0 * t).cos() + c[3] * (5.0 * t).cos());
        let h = 1e-5;
        let shifted = |s: f64| {
            let w: Vec<f64> = u.values().iter().zip(&v).map(|(x, d)| x * (s * d).exp()).collect();
            yamabe_quotient(&g, &ScalarField::new(w).unwrap()).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let an: f64 = grad.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "fd {fd} analytic {an}");
    }
}

#[test]
fn estimate_is_below_every_sampled_quotient() {
    for (a, b) in [(0.0, 0.0), (0.2, 0.0), (0.1, 0.1)] {
        let g = perturbed(3, 256, a, b);
        let y = estimate_yamabe(&g, &YamabeOptions::default()).unwrap();
        assert!(y.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        for seed in 0..40 {
            let u = random_log_fourier(g.radial_grid().unwrap(), seed, 6, 0.6);
            let q = yamabe_quotient(&g, &u).unwrap();
            assert!(y.value <= q + 1e-3 * y.value.abs(), "Y {} quotient {q}", y.value);
        }
    }
}

#[test]
fn positive_curvature_gives_positive_estimate() {
    for n in [3, 4, 5] {
        let g = perturbed(n, 256, 0.3, 0.1);
        assert!(scalar_curvature(&g).unwrap().min() > 0.0);
        let y = estimate_yamabe(&g, &YamabeOptions::default()).unwrap();
        assert!(y.value > 0.0);
    }
}

#[test]
fn uniform_density_log_sobolev_values() {
    let g = ConformalMetric::round(grid(3, 256), 1.0).unwrap();
    let u = ScalarField::constant((2.0 * PI * PI).powf(-0.5), 256);
    let r = check_log_sobolev(&g, &u, 1.0, sphere_sobolev_constant(3).unwrap()).unwrap();
    assert!((r.lhs - 6.562).abs() < 1e-3);
    assert!((r.rhs - (6.0 + (2.0 * PI * PI).ln())).abs() < 1e-6);
    assert!((r.slack - 2.42).abs() < 1e-2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn einstein_hilbert_is_scale_invariant(a in -0.4f64..0.4, b in -0.2f64..0.2, n in 3usize..6) {
        let g = perturbed(n, 128, a, b);
        let e = einstein_hilbert(&g).unwrap();
        for c in [0.1, 1.0, 10.0] {
            let ec = einstein_hilbert(&g.scaled(c).unwrap()).unwrap();
            prop_assert!(((ec - e) / e).abs() < 1e-8);
        }
    }

    #[test]
    fn quotient_is_functional_of_deformed_metric(seed in 0u64..1000, n in 3usize..6) {
        let g = perturbed(n, 256, 0.2, -0.1);
        let u = random_log_fourier(g.radial_grid().unwrap(), seed, 5, 0.5);
        let q = yamabe_quotient(&g, &u).unwrap();
        let e = einstein_hilbert(&g.deform(&u).unwrap()).unwrap();
        prop_assert!(((q - e) / e).abs() < 1e-6);
    }

    #[test]
    fn sobolev_on_round_sphere(seed in 0u64..100_000, n in 3usize..5) {
        let g = ConformalMetric::round(grid(n, 256), 1.0).unwrap();
        let u = random_log_fourier(g.radial_grid().unwrap(), seed, 6, 0.8);
        let r = check_sobolev(&g, &u, sphere_sobolev_constant(n).unwrap()).unwrap();
        prop_assert!(r.holds(1e-3), "slack {}", r.slack);
    }

    #[test]
    fn immersion_sobolev_with_sign_changing_curvature(seed in 0u64..100_000, a in 0.7f64..0.9) {
        let g = perturbed(3, 256, 0.0, a);
        prop_assert!(scalar_curvature(&g).unwrap().min() < 0.0);
        let u = random_log_fourier(g.radial_grid().unwrap(), seed, 6, 0.8);
        let r = check_immersion_sobolev(&g, &u).unwrap();
        prop_assert!(r.holds(1e-3), "slack {}", r.slack);
    }

    #[test]
    fn log_sobolev_on_positive_metrics(seed in 0u64..100_000, a in -0.15f64..0.15, log_tau in -1.0f64..1.0) {
        let g = perturbed(3, 256, a, 0.0);
        let y = estimate_yamabe(&g, &YamabeOptions::default()).unwrap().value;
        let u = random_log_fourier(g.radial_grid().unwrap(), seed, 6, 0.8);
        let tau = optimal_tau(&g, &u).unwrap() * log_tau.exp();
        let r = check_log_sobolev(&g, &u, tau, y).unwrap();
        prop_assert!(r.within_hypothesis);
        prop_assert!(r.holds(1e-3), "slack {}", r.slack);
    }
}
