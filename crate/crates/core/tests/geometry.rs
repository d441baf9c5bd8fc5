use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use yamabe_lab::sphere::{
    deformed_scalar_curvature, dirichlet_energy, integrate, laplacian, scalar_curvature,
    sin_power_integral, sphere_volume, ConformalMetric, RadialGrid, ScalarField,
};

fn grid(n: usize, m: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(n, m).unwrap())
}

fn trig(g: &RadialGrid, c: [f64; 3]) -> ScalarField {
    ScalarField::new(g.sample(|t| c[0] * t.cos() + c[1] * (2.0 * t).cos() + c[2] * (3.0 * t).cos()))
        .unwrap()
}

fn positive(g: &RadialGrid, c: [f64; 3]) -> ScalarField {
    ScalarField::new(g.sample(|t| (c[0] * t.cos() + c[1] * (2.0 * t).cos() + c[2] * t.sin().powi(2)).exp()))
        .unwrap()
}

fn max_relative(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| ((x - y) / y.abs().max(1e-12)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn quadrature_is_exact_for_sine_powers() {
    for n in 3..=5 {
        for m in [64, 128, 513] {
            let g = RadialGrid::new(n, m).unwrap();
            let sum: f64 = g.weights().iter().sum();
            let exact = sin_power_integral(n as i32 - 1, 0.0, PI);
            assert!(((sum - exact) / exact).abs() < 1e-10, "n={n} m={m}");
        }
    }
}

#[test]
fn sphere_volume_matches_recursion() {
    assert!((sphere_volume(3).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
    for n in 1..10 {
        let next = sphere_volume(n + 2).unwrap();
        let expect = 2.0 * PI * sphere_volume(n).unwrap() / (n as f64 + 1.0);
        assert!((next - expect).abs() < 1e-12 * expect);
    }
    assert!(sphere_volume(-1).is_err());
}

#[test]
fn volume_of_round_sphere_of_radius_r() {
    for n in [3, 4, 6] {
        let g = ConformalMetric::round(grid(n, 256), 2.5).unwrap();
        let exact = sphere_volume(n as i64).unwrap() * 2.5f64.powi(n as i32);
        assert!((g.total_volume() - exact).abs() < 1e-9 * exact);
    }
}

#[test]
fn energy_matches_laplacian_pairing() {
    let g0 = grid(3, 256);
    let g = ConformalMetric::radial(g0.clone(), ScalarField::constant(1.0, 256)).unwrap();
    let u = trig(&g0, [0.7, -0.2, 0.1]);
    let lap = laplacian(&g0, &u).unwrap();
    let pairing = integrate(&g, &ScalarField::new(u.values().iter().zip(lap.values()).map(|(a, b)| a * b).collect()).unwrap()).unwrap();
    let energy = dirichlet_energy(&g, &u).unwrap();
    assert!((pairing + energy).abs() < 1e-9 * energy);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplacian_is_self_adjoint(
        n in 3usize..6,
        a in prop::array::uniform3(-1.0f64..1.0),
        b in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let g = grid(n, 256);
        let (f, h) = (trig(&g, a), trig(&g, b));
        let dot = |x: &[f64], y: &[f64]| -> f64 {
            g.weights().iter().zip(x.iter().zip(y)).map(|(w, (p, q))| w * p * q).sum()
        };
        let lf = laplacian(&g, &f).unwrap();
        let lh = laplacian(&g, &h).unwrap();
        let asym = (dot(f.values(), lh.values()) - dot(h.values(), lf.values())).abs();
        let norms = dot(f.values(), f.values()).sqrt() * dot(h.values(), h.values()).sqrt();
        prop_assert!(asym < 1e-6 * norms.max(1e-300), "asymmetry {}", asym);
    }

    #[test]
    fn conformal_changes_compose(
        n in 3usize..6,
        a in prop::array::uniform3(-0.3f64..0.3),
        b in prop::array::uniform3(-0.3f64..0.3),
    ) {
        let g0 = grid(n, 512);
        let (p1, p2) = (positive(&g0, a), positive(&g0, b));
        let first = ConformalMetric::radial(g0.clone(), p1.clone()).unwrap();
        let twice = scalar_curvature(&first.deform(&p2).unwrap()).unwrap();
        let product = ScalarField::new(p1.values().iter().zip(p2.values()).map(|(x, y)| x * y).collect()).unwrap();
        let once = scalar_curvature(&ConformalMetric::radial(g0, product).unwrap()).unwrap();
        prop_assert!(max_relative(&twice, &once) < 1e-4);
        let law = deformed_scalar_curvature(&first, &p2).unwrap();
        prop_assert!(max_relative(&law, &once) < 1e-4);
    }

    #[test]
    fn curvature_scales_inversely_with_area(c in 0.1f64..10.0, a in prop::array::uniform3(-0.3f64..0.3)) {
        let g0 = grid(4, 128);
        let g = ConformalMetric::radial(g0.clone(), positive(&g0, a)).unwrap();
        let r = scalar_curvature(&g).unwrap();
        let rc = scalar_curvature(&g.scaled(c).unwrap()).unwrap();
        let expect = r.map(|x| x / (c * c));
        prop_assert!(max_relative(&rc, &expect) < 1e-9);
        let v = g.scaled(c).unwrap().total_volume() / g.total_volume();
        prop_assert!((v / c.powi(4) - 1.0).abs() < 1e-9);
    }
}
