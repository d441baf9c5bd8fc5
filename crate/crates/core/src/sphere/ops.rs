//! Differential operators and quadrature on the radial backend.
//!
//! The Laplacian is written in flux form,
//! `Δ₀f_i = [a_{i+½}(f_{i+1} − f_i) − a_{i−½}(f_i − f_{i−1})] / (h·V_i)`,
//! with `a` the half-node values of `sin^{n−1}` and `V_i` the exact cell integrals. At the
//! poles the missing flux vanishes, which is the ghost-point reflection `f_{−1} = f_1`; the
//! pole value tends to `n·f″(0)`. The same edge structure gives the Dirichlet energy, so
//! `Σ V f Δh = −E(f, h)` holds exactly and the discrete operator is self-adjoint.

use super::grid::{sphere_volume, RadialGrid, MIN_GRID};
use super::metric::{conformal_coefficient, ConformalMetric, ScalarField};
use crate::error::{LabError, Result};

fn check_grid(grid: &RadialGrid, f: &ScalarField) -> Result<()> {
    if grid.m() < MIN_GRID {
        return Err(LabError::Resolution {
            m: grid.m(),
            min: MIN_GRID,
        });
    }
    if f.len() != grid.m() {
        return Err(LabError::Alignment {
            expected: grid.m(),
            got: f.len(),
        });
    }
    Ok(())
}

/// Weighted flux divergence `(1/(hV_i)) Σ_edges c_e a_e (f_j − f_i)`.
fn flux_divergence(grid: &RadialGrid, f: &[f64], edge_coeff: impl Fn(usize) -> f64) -> Vec<f64> {
    let m = grid.m();
    let h = grid.spacing();
    let a = grid.edge_weights();
    let v = grid.weights();
    let flux: Vec<f64> = (0..m - 1)
        .map(|e| edge_coeff(e) * a[e] * (f[e + 1] - f[e]))
        .collect();
    (0..m)
        .map(|i| {
            let right = if i + 1 < m { flux[i] } else { 0.0 };
            let left = if i > 0 { flux[i - 1] } else { 0.0 };
            (right - left) / (h * v[i])
        })
        .collect()
}

/// Round-sphere Laplacian `Δ₀f = f″ + (n−1) cot θ f′` of a radial field.
pub fn laplacian(grid: &RadialGrid, f: &ScalarField) -> Result<ScalarField> {
    check_grid(grid, f)?;
    ScalarField::new(flux_divergence(grid, f.values(), |_| 1.0))
}

/// Laplace-Beltrami operator of `g = φ^{4/(n−2)}g₀` applied to a radial field:
/// `Δ_g u = φ^{−2n/(n−2)} sin^{1−n}θ (sin^{n−1}θ φ² u′)′`.
pub fn laplace_beltrami(g: &ConformalMetric, u: &ScalarField) -> Result<ScalarField> {
    let grid = g.require_radial("laplace_beltrami")?;
    check_grid(grid, u)?;
    let phi = g.phi().values();
    let div = flux_divergence(grid, u.values(), |e| phi[e] * phi[e + 1]);
    let density = g.volume_density();
    ScalarField::new(div.iter().zip(&density).map(|(d, w)| d / w).collect())
}

/// Scalar curvature of `g = φ^{4/(n−2)}g₀`:
/// `R = φ^{−(n+2)/(n−2)} (n(n−1)φ − 4(n−1)/(n−2) Δ₀φ)`.
pub fn scalar_curvature(g: &ConformalMetric) -> Result<ScalarField> {
    let grid = g.require_radial("scalar_curvature")?;
    let n = g.n() as f64;
    let phi = g.phi();
    if phi.min() <= 0.0 {
        return Err(LabError::InvalidMetric("conformal factor not positive".into()));
    }
    let lap = laplacian(grid, phi)?;
    let c = conformal_coefficient(g.n());
    let e = -(n + 2.0) / (n - 2.0);
    ScalarField::new(
        phi.values()
            .iter()
            .zip(lap.values())
            .map(|(&p, &l)| p.powf(e) * (n * (n - 1.0) * p - c * l))
            .collect(),
    )
}

/// Scalar curvature of `u^{4/(n−2)} g` computed from `R_g` and `Δ_g` (the conformal law
/// relative to `g` rather than to `g₀`).
pub fn deformed_scalar_curvature(g: &ConformalMetric, u: &ScalarField) -> Result<ScalarField> {
    let r = scalar_curvature(g)?;
    let lap = laplace_beltrami(g, u)?;
    let n = g.n() as f64;
    let c = conformal_coefficient(g.n());
    let e = -(n + 2.0) / (n - 2.0);
    if u.min() <= 0.0 {
        return Err(LabError::InvalidTrial("u must be positive".into()));
    }
    ScalarField::new(
        u.values()
            .iter()
            .zip(r.values().iter().zip(lap.values()))
            .map(|(&v, (&rg, &l))| v.powf(e) * (rg * v - c * l))
            .collect(),
    )
}

/// `∫_M f dv_g`.
pub fn integrate(g: &ConformalMetric, f: &ScalarField) -> Result<f64> {
    g.check_aligned(f)?;
    Ok(g.sample_volumes()
        .iter()
        .zip(f.values())
        .map(|(v, x)| v * x)
        .sum())
}

/// `∫_M |∇u|²_g dv_g` for a radial `u`.
pub fn dirichlet_energy(g: &ConformalMetric, u: &ScalarField) -> Result<f64> {
    let grid = g.require_radial("dirichlet_energy")?;
    check_grid(grid, u)?;
    Ok(shell_factor(g) * edge_energy_terms(g, u.values()).iter().sum::<f64>())
}

/// Per-edge terms `a_e φ_iφ_{i+1} (u_{i+1} − u_i)² / h` (without the shell factor).
pub(crate) fn edge_energy_terms(g: &ConformalMetric, u: &[f64]) -> Vec<f64> {
    let grid = g.radial_grid().expect("radial backend");
    let phi = g.phi().values();
    let a = grid.edge_weights();
    let h = grid.spacing();
    (0..grid.m() - 1)
        .map(|e| a[e] * phi[e] * phi[e + 1] * (u[e + 1] - u[e]).powi(2) / h)
        .collect()
}

/// `w_{n−1}`, the area of the unit `(n−1)`-sphere that every radial integral carries.
pub(crate) fn shell_factor(g: &ConformalMetric) -> f64 {
    sphere_volume(g.n() as i64 - 1).expect("n >= 3")
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;

    fn grid(n: usize, m: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::new(n, m).unwrap())
    }

    /// `R` of `φ^{4/(n−2)}g₀` from exact derivatives of `φ`.
    fn curvature_oracle(n: f64, phi: f64, dphi: f64, ddphi: f64, theta: f64) -> f64 {
        let lap = if theta.sin().abs() < 1e-12 {
            n * ddphi
        } else {
            ddphi + (n - 1.0) * theta.cos() / theta.sin() * dphi
        };
        phi.powf(-(n + 2.0) / (n - 2.0))
            * (n * (n - 1.0) * phi - 4.0 * (n - 1.0) / (n - 2.0) * lap)
    }

    #[test]
    fn constants_are_harmonic() {
        let g = grid(3, 64);
        let lap = laplacian(&g, &ScalarField::constant(1.0, 64)).unwrap();
        assert!(lap.values().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn first_harmonic_eigenvalue() {
        let g = grid(3, 512);
        let f = ScalarField::new(g.sample(f64::cos)).unwrap();
        let lap = laplacian(&g, &f).unwrap();
        for (t, l) in g.theta().iter().zip(lap.values()) {
            assert!((l + 3.0 * t.cos()).abs() < 1e-4, "θ={t} Δf={l}");
        }
    }

    #[test]
    fn cos_squared_matches_finite_difference_oracle() {
        // Oracle: central differences of the closed form cos²θ with a tiny step.
        let f = |t: f64| t.cos().powi(2);
        let t0 = PI / 2.0;
        let eps = 1e-4;
        let d1 = (f(t0 + eps) - f(t0 - eps)) / (2.0 * eps);
        let d2 = (f(t0 + eps) - 2.0 * f(t0) + f(t0 - eps)) / (eps * eps);
        let oracle = d2 + 2.0 * t0.cos() / t0.sin() * d1;

        for m in [257, 513, 1025] {
            let g = grid(3, m);
            let lap = laplacian(&g, &ScalarField::new(g.sample(f)).unwrap()).unwrap();
            let i = g.nearest_index(t0);
            assert!((g.theta()[i] - t0).abs() < 1e-12);
            // leading truncation term of the flux stencil at the equator is h²/2
            let h = g.spacing();
            let rel = ((lap.values()[i] - oracle) / oracle).abs();
            assert!(rel <= 0.5 * h * h * 1.01, "m={m}: relative error {rel}");
            assert!(rel >= 0.5 * h * h * 0.9, "m={m}: relative error {rel}");
        }
    }

    #[test]
    fn laplacian_is_self_adjoint() {
        let g = grid(4, 256);
        let f = ScalarField::new(g.sample(|t| (2.0 * t).cos() + 0.3 * t.cos())).unwrap();
        let h = ScalarField::new(g.sample(|t| (3.0 * t).cos() - 0.5 * t.cos().powi(2))).unwrap();
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            g.weights().iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
        };
        let lf = laplacian(&g, &f).unwrap();
        let lh = laplacian(&g, &h).unwrap();
        let asym = (dot(f.values(), lh.values()) - dot(h.values(), lf.values())).abs();
        let norms = dot(f.values(), f.values()).sqrt() * dot(h.values(), h.values()).sqrt();
        assert!(asym < 1e-6 * norms, "asymmetry {asym}");
    }

    #[test]
    fn laplacian_rejects_coarse_grids() {
        let g = RadialGrid::new(3, 8).unwrap();
        assert!(laplacian(&g, &ScalarField::constant(1.0, 8)).is_ok());
        assert!(laplacian(&g, &ScalarField::constant(1.0, 9)).is_err());
    }

    #[test]
    fn round_sphere_curvature() {
        let g = grid(3, 64);
        let r = scalar_curvature(&ConformalMetric::round(g.clone(), 1.0).unwrap()).unwrap();
        assert!(r.values().iter().all(|v| (v - 6.0).abs() < 1e-10));
        let c: f64 = 1.7;
        let m = ConformalMetric::radial_fn(g, |_| c).unwrap();
        let r = scalar_curvature(&m).unwrap();
        assert!(r.values().iter().all(|v| (v - 6.0 * c.powi(-4)).abs() < 1e-10));
    }

    #[test]
    fn curvature_matches_symbolic_oracle() {
        let g = grid(3, 512);
        let m = ConformalMetric::radial_fn(g.clone(), |t| 1.0 + 0.1 * t.cos()).unwrap();
        let r = scalar_curvature(&m).unwrap();
        let worst = g
            .theta()
            .iter()
            .zip(r.values())
            .map(|(&t, &v)| {
                let o = curvature_oracle(3.0, 1.0 + 0.1 * t.cos(), -0.1 * t.sin(), -0.1 * t.cos(), t);
                ((v - o) / o).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "max relative error {worst}");
    }

    #[test]
    fn curvature_converges_at_second_order() {
        let phi = |t: f64| 1.0 + 0.3 * t.cos() + 0.1 * (2.0 * t).cos();
        let oracle = |t: f64| {
            curvature_oracle(
                4.0,
                phi(t),
                -0.3 * t.sin() - 0.2 * (2.0 * t).sin(),
                -0.3 * t.cos() - 0.4 * (2.0 * t).cos(),
                t,
            )
        };
        let err = |m: usize| {
            let g = grid(4, m);
            let r = scalar_curvature(&ConformalMetric::radial_fn(g.clone(), phi).unwrap()).unwrap();
            g.theta()
                .iter()
                .zip(r.values())
                .map(|(&t, &v)| (v - oracle(t)).abs())
                .fold(0.0, f64::max)
        };
        for m in [65, 129, 257] {
            let ratio = err(m) / err(2 * m - 1);
            assert!(ratio >= 3.0, "m={m}: error ratio {ratio}");
        }
    }

    #[test]
    fn integrals_of_constants() {
        let g = grid(3, 128);
        let round = ConformalMetric::round(g.clone(), 1.0).unwrap();
        let vol = integrate(&round, &ScalarField::constant(1.0, 128)).unwrap();
        assert!((vol - 2.0 * PI * PI).abs() < 1e-10);
        let r = scalar_curvature(&round).unwrap();
        assert!((integrate(&round, &r).unwrap() - 12.0 * PI * PI).abs() < 1e-9);
        let big = ConformalMetric::radial_fn(g, |_| 3.0f64.sqrt()).unwrap();
        let vol = integrate(&big, &ScalarField::constant(1.0, 128)).unwrap();
        assert!((vol - 2.0 * PI * PI * 27.0).abs() < 1e-8);
    }

    #[test]
    fn alignment_is_checked() {
        let g = grid(3, 32);
        let m = ConformalMetric::round(g, 1.0).unwrap();
        assert!(matches!(
            integrate(&m, &ScalarField::constant(1.0, 31)),
            Err(LabError::Alignment { .. })
        ));
    }
}
