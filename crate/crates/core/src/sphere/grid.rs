use std::f64::consts::PI;

use crate::error::{LabError, Result};

/// Smallest grid the differential operators accept.
pub const MIN_GRID: usize = 8;

// 5-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Integrates `f` over `[a, b]` with the 5-point Gauss-Legendre rule.
pub fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// `∫_a^b sin^k θ dθ`, accurate to rounding for the cell widths used here.
pub fn sin_power_integral(k: i32, a: f64, b: f64) -> f64 {
    // subdivide so each panel is short enough for the fixed rule
    let panels = ((b - a) / 0.05).ceil().max(1.0) as usize;
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * w;
            gauss_legendre(lo, lo + w, |t| t.sin().powi(k))
        })
        .sum()
}

/// Uniform polar-angle grid on `[0, π]` for rotationally symmetric fields on `S^n`.
///
/// Each node owns the cell `[θ_i − h/2, θ_i + h/2] ∩ [0, π]`; `weights[i]` is the exact
/// integral of `sin^{n−1}θ` over that cell, so `Σ weights` reproduces `∫₀^π sin^{n−1}θ dθ`
/// up to rounding. `edge_weights[i]` is `sin^{n−1}` at the midpoint between nodes `i` and
/// `i + 1`; together they define a conservative second-order Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    n: usize,
    theta: Vec<f64>,
    weights: Vec<f64>,
    edge_weights: Vec<f64>,
    h: f64,
}

impl RadialGrid {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n < 3 {
            return Err(LabError::Domain(format!("dimension n = {n}, need n >= 3")));
        }
        if m < MIN_GRID {
            return Err(LabError::Resolution { m, min: MIN_GRID });
        }
        let h = PI / (m - 1) as f64;
        let mut theta: Vec<f64> = (0..m).map(|i| i as f64 * h).collect();
        theta[m - 1] = PI;
        let k = (n - 1) as i32;
        let weights = (0..m)
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { theta[i] - 0.5 * h };
                let hi = if i == m - 1 { PI } else { theta[i] + 0.5 * h };
                sin_power_integral(k, lo, hi)
            })
            .collect();
        let edge_weights = (0..m - 1)
            .map(|i| (theta[i] + 0.5 * h).sin().powi(k))
            .collect();
        Ok(Self {
            n,
            theta,
            weights,
            edge_weights,
            h,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.theta.len()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weights
    }

    /// Index of the grid angle nearest to `theta`.
    pub fn nearest_index(&self, theta: f64) -> usize {
        let i = (theta.clamp(0.0, PI) / self.h).round() as usize;
        i.min(self.m() - 1)
    }

    /// Samples `f` at every grid angle.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.theta.iter().map(|&t| f(t)).collect()
    }

    /// Piecewise-linear interpolation of nodal `values` at `theta`.
    pub fn interpolate(&self, values: &[f64], theta: f64) -> f64 {
        let t = theta.clamp(0.0, PI) / self.h;
        let i = (t.floor() as usize).min(self.m() - 2);
        let frac = t - i as f64;
        values[i] * (1.0 - frac) + values[i + 1] * frac
    }
}

/// Volume of the unit round `n`-sphere, `2π^{(n+1)/2} / Γ((n+1)/2)`.
pub fn sphere_volume(n: i64) -> Result<f64> {
    if n < 1 {
        return Err(LabError::Domain(format!("sphere_volume: n = {n}, need n >= 1")));
    }
    // w_0 = 2, w_1 = 2π, w_k = 2π/(k−1) · w_{k−2}
    let (mut even, mut odd) = (2.0, 2.0 * PI);
    let mut k = 1;
    while k < n {
        k += 1;
        if k % 2 == 0 {
            even *= 2.0 * PI / (k - 1) as f64;
        } else {
            odd *= 2.0 * PI / (k - 1) as f64;
        }
    }
    Ok(if n % 2 == 0 { even } else { odd })
}

/// Volume of the unit Euclidean `n`-ball, `π^{n/2} / Γ(n/2 + 1)`.
pub fn euclidean_ball_volume(n: i64) -> Result<f64> {
    // |B^n| = w_{n−1} / n
    Ok(sphere_volume(n - 1)? / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_volumes_closed_form() {
        assert!((sphere_volume(2).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_volume(3).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
        assert!((sphere_volume(4).unwrap() - 8.0 * PI * PI / 3.0).abs() < 1e-12);
        assert!((sphere_volume(1).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!(sphere_volume(0).is_err());
    }

    #[test]
    fn euclidean_ball_volumes() {
        assert!((euclidean_ball_volume(3).unwrap() - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((euclidean_ball_volume(2).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn grid_layout() {
        let g = RadialGrid::new(3, 64).unwrap();
        assert_eq!(g.theta()[0], 0.0);
        assert_eq!(g.theta()[63], PI);
        assert!(g.theta().windows(2).all(|w| w[1] > w[0]));
        assert!(RadialGrid::new(3, 7).is_err());
        assert!(RadialGrid::new(2, 64).is_err());
    }

    #[test]
    fn quadrature_reproduces_sin_power_integral() {
        for n in 3..=5 {
            for m in [64, 65, 128, 512] {
                let g = RadialGrid::new(n, m).unwrap();
                let exact = sphere_volume(n as i64).unwrap() / sphere_volume(n as i64 - 1).unwrap();
                let sum: f64 = g.weights().iter().sum();
                assert!(((sum - exact) / exact).abs() < 1e-10, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn interpolation_is_exact_for_linear_data() {
        let g = RadialGrid::new(3, 33).unwrap();
        let v = g.sample(|t| 2.0 * t + 1.0);
        for t in [0.0, 0.3, 1.234, PI] {
            assert!((g.interpolate(&v, t) - (2.0 * t + 1.0)).abs() < 1e-12);
        }
    }
}
