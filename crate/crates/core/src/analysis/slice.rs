//! Fast marching on the meridian half-slice of a rotationally symmetric metric.
//!
//! The slice is the half 2-sphere `{(cos θ, sin θ cos α, sin θ sin α, 0, …)}` with
//! `θ, α ∈ [0, π]`, carrying `ℓ(θ)²(dθ² + sin²θ dα²)` where `ℓ = φ^{2/(n−2)}`. It is the
//! orbit space of the rotations fixing `e₀` and `e₁`, so distances between slice points
//! equal distances in `M`. The α boundaries are reflecting. Each pole row collapses to a
//! single node.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::sphere::ConformalMetric;

const RING: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
];

/// Node layout and length factor of the slice grid.
#[derive(Debug, Clone)]
pub struct SliceGeometry {
    m: usize,
    ma: usize,
    h: f64,
    ha: f64,
    ell: Vec<f64>,
}

impl SliceGeometry {
    /// `m` polar rows taken from the metric's radial grid and `m` azimuthal columns.
    pub fn new(g: &ConformalMetric) -> crate::Result<Self> {
        let grid = g.require_radial("slice geometry")?;
        let m = grid.m();
        Ok(Self {
            m,
            ma: m,
            h: grid.spacing(),
            ha: PI / (m - 1) as f64,
            ell: g.length_factor(),
        })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn columns(&self) -> usize {
        self.ma
    }

    pub fn theta(&self, i: usize) -> f64 {
        if i + 1 == self.m {
            PI
        } else {
            i as f64 * self.h
        }
    }

    pub fn alpha(&self, j: usize) -> f64 {
        if j + 1 == self.ma {
            PI
        } else {
            j as f64 * self.ha
        }
    }

    pub fn theta_step(&self) -> f64 {
        self.h
    }

    pub fn alpha_step(&self) -> f64 {
        self.ha
    }

    /// Length factor `ℓ(θ)`, linearly interpolated between rows.
    pub fn length_factor(&self, theta: f64) -> f64 {
        let t = theta.clamp(0.0, PI) / self.h;
        let i = (t.floor() as usize).min(self.m - 2);
        let f = t - i as f64;
        self.ell[i] * (1.0 - f) + self.ell[i + 1] * f
    }

    /// Metric length of the coordinate displacement `(dθ, dα)` with the metric frozen at `θ̄`.
    pub fn segment(&self, theta_bar: f64, dt: f64, da: f64) -> f64 {
        let s = theta_bar.sin();
        self.length_factor(theta_bar) * (dt * dt + s * s * da * da).sqrt()
    }

    fn index(&self, i: usize, j: usize) -> usize {
        i * self.ma + j
    }

    /// Representative node of `(i, j)`; pole rows map to their first column.
    fn canonical(&self, i: usize, j: usize) -> usize {
        if i == 0 {
            0
        } else if i + 1 == self.m {
            self.index(i, 0)
        } else {
            self.index(i, j)
        }
    }

    fn is_pole_row(&self, i: usize) -> bool {
        i == 0 || i + 1 == self.m
    }
}

/// Distance field from one source, sampled on every slice node.
#[derive(Debug, Clone)]
pub struct SliceField {
    values: Vec<f64>,
}

impl SliceField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, geo: &SliceGeometry, i: usize, j: usize) -> f64 {
        self.values[geo.index(i, j)]
    }

    /// Bilinear interpolation at `(θ, α)`.
    pub fn at(&self, geo: &SliceGeometry, theta: f64, alpha: f64) -> f64 {
        let t = theta.clamp(0.0, PI) / geo.h;
        let a = alpha.clamp(0.0, PI) / geo.ha;
        let i = (t.floor() as usize).min(geo.m - 2);
        let j = (a.floor() as usize).min(geo.ma - 2);
        let (ft, fa) = (t - i as f64, a - j as f64);
        let v = |i, j| self.values[geo.index(i, j)];
        (1.0 - ft) * ((1.0 - fa) * v(i, j) + fa * v(i, j + 1))
            + ft * ((1.0 - fa) * v(i + 1, j) + fa * v(i + 1, j + 1))
    }

    /// Largest node value and its `(θ, α)`.
    pub fn max(&self, geo: &SliceGeometry) -> (f64, f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..geo.m {
            for j in 0..geo.ma {
                let v = self.values[geo.index(i, j)];
                if v > best.0 {
                    best = (v, geo.theta(i), geo.alpha(j));
                }
            }
        }
        best
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Neighbour of an interior node: canonical index and coordinate displacement.
fn ring(geo: &SliceGeometry, i: usize, j: usize) -> [Option<(usize, f64, f64)>; 8] {
    let mut out = [None; 8];
    for (slot, &(di, dj)) in out.iter_mut().zip(RING.iter()) {
        let (ni, nj) = (i as isize + di, j as isize + dj);
        if ni < 0 || ni >= geo.m as isize || nj < 0 || nj >= geo.ma as isize {
            continue;
        }
        let (ni, nj) = (ni as usize, nj as usize);
        let dt = geo.theta(ni) - geo.theta(i);
        // a pole is seen along the node's own meridian
        let da = if geo.is_pole_row(ni) {
            0.0
        } else {
            geo.alpha(nj) - geo.alpha(j)
        };
        *slot = Some((geo.canonical(ni, nj), dt, da));
    }
    out
}

/// Minimum over `λ ∈ (0, 1)` of `λT₁ + (1−λ)T₂ + |λd₁ + (1−λ)d₂|_G`, if interior.
#[allow(clippy::too_many_arguments)]
fn triangle_update(
    geo: &SliceGeometry,
    theta: f64,
    t1: f64,
    d1: (f64, f64),
    t2: f64,
    d2: (f64, f64),
) -> Option<f64> {
    let tb = theta + 0.25 * (d1.0 + d2.0);
    let phi = geo.length_factor(tb).powi(2);
    let s2 = tb.sin().powi(2);
    let dot = |x: (f64, f64), y: (f64, f64)| phi * (x.0 * y.0 + s2 * x.1 * y.1);
    let a = (d1.0 - d2.0, d1.1 - d2.1);
    let (aa, ab, bb) = (dot(a, a), dot(a, d2), dot(d2, d2));
    let delta = t1 - t2;
    let det = aa * bb - ab * ab;
    if !(aa > delta * delta) || !(aa > 0.0) || det < 0.0 {
        return None;
    }
    let lambda = -ab / aa - delta / aa * (det / (aa - delta * delta)).sqrt();
    if !(lambda > 0.0 && lambda < 1.0) {
        return None;
    }
    let q = aa * lambda * lambda + 2.0 * ab * lambda + bb;
    Some(t2 + lambda * delta + q.max(0.0).sqrt())
}

fn pole_neighbours(geo: &SliceGeometry, pole: usize) -> impl Iterator<Item = usize> + '_ {
    let row = if pole == 0 { 1 } else { geo.m - 2 };
    (0..geo.ma).map(move |j| geo.index(row, j))
}

fn candidate(geo: &SliceGeometry, node: usize, values: &[f64], accepted: &[bool]) -> f64 {
    let (i, j) = (node / geo.ma, node % geo.ma);
    let mut best = f64::INFINITY;
    if geo.is_pole_row(i) {
        let row = if i == 0 { 1 } else { geo.m - 2 };
        let mid = 0.5 * (geo.theta(i) + geo.theta(row));
        let len = geo.length_factor(mid) * geo.h;
        for nb in pole_neighbours(geo, node) {
            if accepted[nb] {
                best = best.min(values[nb] + len);
            }
        }
        return best;
    }
    let theta = geo.theta(i);
    let nbs = ring(geo, i, j);
    for &(k, dt, da) in nbs.iter().flatten() {
        if accepted[k] {
            best = best.min(values[k] + geo.segment(theta + 0.5 * dt, dt, da));
        }
    }
    for r in 0..8 {
        let (Some((k1, t1, a1)), Some((k2, t2, a2))) = (nbs[r], nbs[(r + 1) % 8]) else {
            continue;
        };
        if k1 == k2 || !accepted[k1] || !accepted[k2] {
            continue;
        }
        if let Some(v) = triangle_update(geo, theta, values[k1], (t1, a1), values[k2], (t2, a2)) {
            best = best.min(v);
        }
    }
    best
}

/// Fast-marching distance field from the slice point `(θ_s, α_s)`.
pub fn march(geo: &SliceGeometry, theta_s: f64, alpha_s: f64) -> SliceField {
    let total = geo.m * geo.ma;
    let mut values = vec![f64::INFINITY; total];
    let mut accepted = vec![false; total];
    let mut heap = BinaryHeap::new();
    let theta_s = theta_s.clamp(0.0, PI);
    let alpha_s = alpha_s.clamp(0.0, PI);

    // seed the corners of the cell holding the source with straight-segment lengths
    let i0 = ((theta_s / geo.h).floor() as usize).min(geo.m - 2);
    let j0 = ((alpha_s / geo.ha).floor() as usize).min(geo.ma - 2);
    for (i, j) in [(i0, j0), (i0 + 1, j0), (i0, j0 + 1), (i0 + 1, j0 + 1)] {
        let k = geo.canonical(i, j);
        let dt = geo.theta(i) - theta_s;
        let da = if geo.is_pole_row(i) {
            0.0
        } else {
            geo.alpha(j) - alpha_s
        };
        let v = geo.segment(theta_s + 0.5 * dt, dt, da);
        if v < values[k] {
            values[k] = v;
            heap.push(Entry(v, k));
        }
    }

    while let Some(Entry(v, k)) = heap.pop() {
        if accepted[k] || v > values[k] {
            continue;
        }
        accepted[k] = true;
        let (i, j) = (k / geo.ma, k % geo.ma);
        let touch = |nb: usize, values: &mut Vec<f64>, heap: &mut BinaryHeap<Entry>| {
            if accepted[nb] {
                return;
            }
            let c = candidate(geo, nb, values, &accepted);
            if c < values[nb] {
                values[nb] = c;
                heap.push(Entry(c, nb));
            }
        };
        if geo.is_pole_row(i) {
            let nbs: Vec<usize> = pole_neighbours(geo, k).collect();
            for nb in nbs {
                touch(nb, &mut values, &mut heap);
            }
        } else {
            for &(nb, _, _) in ring(geo, i, j).iter().flatten() {
                touch(nb, &mut values, &mut heap);
            }
        }
    }

    for row in [0, geo.m - 1] {
        let v = values[geo.index(row, 0)];
        for j in 1..geo.ma {
            values[geo.index(row, j)] = v;
        }
    }
    SliceField { values }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sphere::RadialGrid;

    fn round(m: usize) -> SliceGeometry {
        let grid = Arc::new(RadialGrid::new(3, m).unwrap());
        SliceGeometry::new(&ConformalMetric::round(grid, 1.0).unwrap()).unwrap()
    }

    fn great_circle(t1: f64, a1: f64, t2: f64, a2: f64) -> f64 {
        let c = t1.cos() * t2.cos() + t1.sin() * t2.sin() * (a1 - a2).cos();
        c.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn pole_source_gives_polar_angle() {
        let geo = round(128);
        let f = march(&geo, 0.0, 0.0);
        for i in 0..geo.rows() {
            assert!((f.node(&geo, i, 17) - geo.theta(i)).abs() < 1e-9);
        }
    }

    #[test]
    fn equatorial_source_matches_great_circles() {
        let geo = round(256);
        let f = march(&geo, 1.2, 0.0);
        let mut worst: f64 = 0.0;
        for &(t, a) in &[(0.3, 2.0), (2.5, 3.0), (1.9, 3.1), (PI - 1.2, PI), (0.7, 0.1)] {
            let exact = great_circle(1.2, 0.0, t, a);
            worst = worst.max(((f.at(&geo, t, a) - exact) / exact).abs());
        }
        assert!(worst < 1e-2, "worst relative error {worst}");
    }
}
