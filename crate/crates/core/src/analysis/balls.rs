use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use super::distance::{weighted_graph, DistanceField, Point};
use super::slice::{march, SliceGeometry};
use crate::error::{LabError, Result};
use crate::sphere::{
    dirichlet_energy, euclidean_ball_volume, scalar_curvature, sin_power_integral, sphere_volume,
    Backend, ConformalMetric, RadialGrid, ScalarField,
};

/// Ratio between consecutive radii of the maximal-function grid is `2^{1/8}`.
pub const RADII_PER_OCTAVE: usize = 8;
/// The smallest sampled radius is `r / 2^FLOOR_OCTAVES`.
pub const FLOOR_OCTAVES: usize = 10;
/// Samples in the default geometric radius grid: `r·2^{−k/8}`, `k = 0..=80`.
pub const DEFAULT_RADII: usize = RADII_PER_OCTAVE * FLOOR_OCTAVES + 1;

/// `k` geometric radii from `r/1024` up to `r`.
pub fn radius_grid(r: f64, k: usize) -> Result<Vec<f64>> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(LabError::Domain(format!("radius must be positive, got {r}")));
    }
    if k < 2 {
        return Err(LabError::Domain(format!("need at least 2 radii, got {k}")));
    }
    let span = (2.0f64).powi(FLOOR_OCTAVES as i32).ln();
    Ok((0..k)
        .map(|i| {
            if i + 1 == k {
                r
            } else {
                r * (-(span * (k - 1 - i) as f64 / (k - 1) as f64)).exp()
            }
        })
        .collect())
}

/// Measure of metric balls around one center.
///
/// Pole centers on the radial backend integrate exactly along `θ`: the meridian distance
/// `d(θ) = ∫ℓ` is inverted and `sin^{n−1}` is integrated to the boundary, with `φ` and the
/// integrand constant on each node's cell. Other slice centers use the fast-marching field
/// on sub-sampled slice cells weighted by `w_{n−2} sin^{n−1}θ sin^{n−2}α`; graph centers
/// use the node masses. A sample is inside `B(p, s)` iff its distance is `≤ s`.
#[derive(Debug, Clone)]
pub struct Ball {
    center: Point,
    kind: BallKind,
}

#[derive(Debug, Clone)]
enum BallKind {
    Polar {
        grid: Arc<RadialGrid>,
        south: bool,
        /// Meridian distance from the pole to each node.
        reach: Vec<f64>,
        /// Length factor per node.
        ell: Vec<f64>,
        /// `w_{n−1} φ^{2n/(n−2)}` per node.
        density: Vec<f64>,
    },
    Sorted {
        dist: Vec<f64>,
        /// Backend sample carrying the integrand.
        owner: Vec<usize>,
        mass: Vec<f64>,
    },
}

/// Sub-samples per slice cell side.
fn subdivision(m: usize) -> usize {
    (1024 / m).clamp(1, 8)
}

impl Ball {
    pub fn new(g: &ConformalMetric, p: &Point) -> Result<Self> {
        match (g.backend(), p) {
            (Backend::Radial(grid), Point::Slice { theta, .. }) => {
                if p.is_pole() {
                    Ok(Self::polar(g, grid.clone(), *theta > PI / 2.0))
                } else {
                    let geometry = SliceGeometry::new(g)?;
                    Ok(Self::slice(g, &geometry, *theta, *p))
                }
            }
            (Backend::Graph(_), Point::Node { index }) => {
                let graph = weighted_graph(g)?;
                let field = super::distance::graph_field(&graph, *index)?;
                let DistanceField::Graph { values, .. } = field else {
                    unreachable!()
                };
                let vols = g.sample_volumes();
                let mut order: Vec<usize> = (0..values.len()).collect();
                order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
                Ok(Self {
                    center: *p,
                    kind: BallKind::Sorted {
                        dist: order.iter().map(|&i| values[i]).collect(),
                        mass: order.iter().map(|&i| vols[i]).collect(),
                        owner: order,
                    },
                })
            }
            _ => Err(LabError::Domain(
                "point kind does not match the metric backend".into(),
            )),
        }
    }

    fn polar(g: &ConformalMetric, grid: Arc<RadialGrid>, south: bool) -> Self {
        let m = grid.m();
        let h = grid.spacing();
        let ell = g.length_factor();
        let shell = sphere_volume(g.n() as i64 - 1).expect("n >= 3");
        let density = g.volume_density().iter().map(|d| shell * d).collect();
        let mut reach = vec![0.0; m];
        if south {
            for i in (0..m - 1).rev() {
                reach[i] = reach[i + 1] + 0.5 * h * (ell[i] + ell[i + 1]);
            }
        } else {
            for i in 1..m {
                reach[i] = reach[i - 1] + 0.5 * h * (ell[i - 1] + ell[i]);
            }
        }
        let center = if south { Point::south() } else { Point::north() };
        Self {
            center,
            kind: BallKind::Polar {
                grid,
                south,
                reach,
                ell,
                density,
            },
        }
    }

    fn slice(
        g: &ConformalMetric,
        geo: &SliceGeometry,
        theta: f64,
        center: Point,
    ) -> Self {
        let field = march(geo, theta, 0.0);
        let m = geo.rows();
        let ma = geo.columns();
        let s = subdivision(m);
        let n = g.n() as i32;
        let (h, ha) = (geo.theta_step(), geo.alpha_step());
        let angular = sphere_volume(n as i64 - 2).expect("n >= 3");
        let density = g.volume_density();
        // sub-cell edges and integrals of sin^{n−1}θ and sin^{n−2}α
        let cells = |count: usize, step: f64, pos: &dyn Fn(usize) -> f64, k: i32| {
            (0..count)
                .map(|i| {
                    let lo = if i == 0 { 0.0 } else { pos(i) - 0.5 * step };
                    let hi = if i + 1 == count { PI } else { pos(i) + 0.5 * step };
                    let w = (hi - lo) / s as f64;
                    (0..s)
                        .map(|q| {
                            let a = lo + q as f64 * w;
                            (a + 0.5 * w, sin_power_integral(k, a, a + w))
                        })
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        };
        let rows = cells(m, h, &|i| geo.theta(i), n - 1);
        let cols = cells(ma, ha, &|j| geo.alpha(j), n - 2);
        let mut samples: Vec<(f64, usize, f64)> = Vec::with_capacity(m * ma * s * s);
        for (i, row) in rows.iter().enumerate() {
            let rho = angular * density[i];
            for col in &cols {
                for &(t, wt) in row {
                    for &(a, wa) in col {
                        samples.push((field.at(geo, t, a), i, rho * wt * wa));
                    }
                }
            }
        }
        samples.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        Self {
            center,
            kind: BallKind::Sorted {
                dist: samples.iter().map(|x| x.0).collect(),
                owner: samples.iter().map(|x| x.1).collect(),
                mass: samples.iter().map(|x| x.2).collect(),
            },
        }
    }

    pub fn center(&self) -> Point {
        self.center
    }

    /// `∫_{B(p,s)} f dv_g` for every `s` in `radii`; `f` holds one value per backend sample.
    pub fn integrals(&self, f: &[f64], radii: &[f64]) -> Vec<f64> {
        match &self.kind {
            BallKind::Polar {
                grid,
                south,
                reach,
                ell,
                density,
            } => radii
                .iter()
                .map(|&s| polar_integral(grid, *south, reach, ell, density, f, s))
                .collect(),
            BallKind::Sorted { dist, owner, mass } => {
                let mut prefix = Vec::with_capacity(dist.len() + 1);
                prefix.push(0.0);
                let mut acc = 0.0;
                for (o, w) in owner.iter().zip(mass) {
                    acc += f[*o] * w;
                    prefix.push(acc);
                }
                radii
                    .iter()
                    .map(|&s| prefix[dist.partition_point(|&d| d <= s)])
                    .collect()
            }
        }
    }

    /// `V(p, s)` for every `s` in `radii`.
    pub fn volumes(&self, radii: &[f64]) -> Vec<f64> {
        let ones = vec![1.0; self.sample_count()];
        self.integrals(&ones, radii)
    }

    fn sample_count(&self) -> usize {
        match &self.kind {
            BallKind::Polar { reach, .. } => reach.len(),
            BallKind::Sorted { owner, .. } => owner.iter().copied().max().map_or(0, |x| x + 1),
        }
    }
}

/// Exact meridian integral over `{d ≤ s}` with cell-constant integrand.
fn polar_integral(
    grid: &RadialGrid,
    south: bool,
    reach: &[f64],
    ell: &[f64],
    density: &[f64],
    f: &[f64],
    s: f64,
) -> f64 {
    let m = grid.m();
    let h = grid.spacing();
    let k = grid.n() as i32 - 1;
    // boundary angle measured from the pole
    let far = if south { reach[0] } else { reach[m - 1] };
    let phi_s = if s >= far {
        PI
    } else {
        let node = |i: usize| if south { m - 1 - i } else { i };
        let mut i = 0;
        while i + 1 < m && reach[node(i + 1)] <= s {
            i += 1;
        }
        let (l0, l1) = (ell[node(i)], ell[node(i + 1)]);
        let rest = s - reach[node(i)];
        // ∫₀ˣ (l0 + (l1 − l0)t/h) dt = rest
        let a = 0.5 * (l1 - l0) / h;
        let x = if a.abs() < 1e-14 * l0.max(1e-300) {
            rest / l0
        } else {
            (-l0 + (l0 * l0 + 4.0 * a * rest).max(0.0).sqrt()) / (2.0 * a)
        };
        (i as f64 * h + x.clamp(0.0, h)).min(PI)
    };
    let mut total = 0.0;
    for i in 0..m {
        let t = if south { PI - grid.theta()[i] } else { grid.theta()[i] };
        let lo = (t - 0.5 * h).max(0.0);
        let hi = (t + 0.5 * h).min(PI);
        if lo >= phi_s {
            continue;
        }
        let hi = hi.min(phi_s);
        // polar angle measured from the pole maps back to the grid θ
        let (a, b) = if south { (PI - hi, PI - lo) } else { (lo, hi) };
        let part = if phi_s >= (t + 0.5 * h).min(PI) {
            grid.weights()[i]
        } else {
            sin_power_integral(k, a, b)
        };
        total += f[i] * density[i] * part;
    }
    total
}

/// Volumes and curvature integrals of the balls `B(p, s)` over a radius grid.
#[derive(Debug, Clone, Serialize)]
pub struct BallProfile {
    pub center: Point,
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
    /// `∫_{B(p,s)} R dv`.
    pub curvature_integrals: Vec<f64>,
    /// `∫_{B(p,s)} R₊^{(n−1)/2} dv`.
    pub power_integrals: Vec<f64>,
}

impl BallProfile {
    /// CSV rows `center_id,s,V,int_R,int_Rplus_pow`.
    pub fn to_csv(&self, center_id: &str, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str("center_id,s,V,int_R,int_Rplus_pow\n");
        }
        for k in 0..self.radii.len() {
            let _ = writeln!(
                out,
                "{center_id},{},{},{},{}",
                self.radii[k], self.volumes[k], self.curvature_integrals[k], self.power_integrals[k]
            );
        }
        out
    }
}

/// Writes several profiles to one CSV file.
pub fn write_profiles_csv(path: &Path, profiles: &[(String, BallProfile)]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    for (k, (id, p)) in profiles.iter().enumerate() {
        file.write_all(p.to_csv(id, k == 0).as_bytes())?;
    }
    Ok(())
}

/// Positive-part power `R₊^{(n−1)/2}` of a curvature field.
pub(crate) fn curvature_power(n: usize, r: &ScalarField) -> Vec<f64> {
    let e = 0.5 * (n as f64 - 1.0);
    r.values().iter().map(|x| x.max(0.0).powf(e)).collect()
}

/// Ball profile of `k` geometric radii from `r/1024` to `r`.
pub fn ball_profile(g: &ConformalMetric, p: &Point, r: f64, k: usize) -> Result<BallProfile> {
    let radii = radius_grid(r, k)?;
    let ball = Ball::new(g, p)?;
    profile_on(g, &ball, radii, &scalar_curvature(g)?)
}

pub(crate) fn profile_on(
    g: &ConformalMetric,
    ball: &Ball,
    radii: Vec<f64>,
    curvature: &ScalarField,
) -> Result<BallProfile> {
    let volumes = ball.volumes(&radii);
    let curvature_integrals = ball.integrals(curvature.values(), &radii);
    let power_integrals = ball.integrals(&curvature_power(g.n(), curvature), &radii);
    Ok(BallProfile {
        center: ball.center(),
        radii,
        volumes,
        curvature_integrals,
        power_integrals,
    })
}

/// `ln(s⁻¹ V^{−(n−3)/2} I^{(n−1)/2})`, or `None` where `V` or `I` vanishes.
pub(crate) fn maximal_term_log(n: usize, s: f64, v: f64, integral: f64) -> Option<f64> {
    if !(v > 0.0) {
        return None;
    }
    let nf = n as f64;
    if integral <= 0.0 {
        return Some(f64::NEG_INFINITY);
    }
    Some(-s.ln() - 0.5 * (nf - 3.0) * v.ln() + 0.5 * (nf - 1.0) * integral.ln())
}

/// Logarithm of the maximal function together with the radius attaining it.
pub fn maximal_function_log(
    g: &ConformalMetric,
    f: &ScalarField,
    p: &Point,
    r: f64,
) -> Result<(f64, f64)> {
    g.check_aligned(f)?;
    let ball = Ball::new(g, p)?;
    maximal_on(g.n(), &ball, f, r)
}

pub(crate) fn maximal_on(n: usize, ball: &Ball, f: &ScalarField, r: f64) -> Result<(f64, f64)> {
    let radii = radius_grid(r, DEFAULT_RADII)?;
    let abs: Vec<f64> = f.values().iter().map(|x| x.abs()).collect();
    let vols = ball.volumes(&radii);
    let ints = ball.integrals(&abs, &radii);
    let mut best = (f64::NEG_INFINITY, radii[0]);
    for k in 0..radii.len() {
        if let Some(l) = maximal_term_log(n, radii[k], vols[k], ints[k]) {
            if l > best.0 {
                best = (l, radii[k]);
            }
        }
    }
    Ok(best)
}

/// `M f(p, r) = sup_{s ≤ r} s⁻¹ V(p,s)^{−(n−3)/2} (∫_{B(p,s)} |f| dv)^{(n−1)/2}` over the
/// geometric radius grid with ratio `2^{1/8}` down to `r/1024`.
pub fn maximal_function(g: &ConformalMetric, f: &ScalarField, p: &Point, r: f64) -> Result<f64> {
    Ok(maximal_function_log(g, f, p, r)?.0.exp())
}

/// `κ(p, r) = V(p, r) / rⁿ`.
pub fn volume_ratio(g: &ConformalMetric, p: &Point, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(LabError::Domain(format!("radius must be positive, got {r}")));
    }
    let v = Ball::new(g, p)?.volumes(&[r])[0];
    Ok(v / r.powi(g.n() as i32))
}

/// Volume of the unit Euclidean `n`-ball, the small-radius limit of `κ`.
pub fn small_radius_limit(n: usize) -> Result<f64> {
    euclidean_ball_volume(n as i64)
}

/// Normalised cut-off `e^{−λ/2} ψ(d(p,·)/r)` and the quantities bounding it.
#[derive(Debug, Clone, Serialize)]
pub struct Cutoff {
    pub field: ScalarField,
    pub lambda: f64,
    /// Nodal volume of `{d ≤ r/2}`.
    pub inner_volume: f64,
    /// Nodal volume of `{d ≤ r}`.
    pub outer_volume: f64,
    /// `∫|∇φ|² dv`.
    pub energy: f64,
    /// `(4/r²) e^{−λ} V(p, r)`.
    pub energy_bound: f64,
    pub calibration_holds: bool,
}

/// `ψ = 1` on `[0, ½]`, `2 − 2t` on `[½, 1]`, `0` beyond.
pub fn cutoff_profile(t: f64) -> f64 {
    if t <= 0.5 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        2.0 - 2.0 * t
    }
}

/// Cut-off around a pole with `∫φ² dv = 1`. Ball membership is nodal, so the reported
/// volumes bracket `e^λ` exactly.
pub fn build_cutoff(g: &ConformalMetric, p: &Point, r: f64) -> Result<Cutoff> {
    if !(r > 0.0) {
        return Err(LabError::Domain(format!("radius must be positive, got {r}")));
    }
    g.require_radial("build_cutoff")?;
    if !p.is_pole() {
        return Err(LabError::UnsupportedBackend("build_cutoff away from the poles"));
    }
    let ball = Ball::new(g, p)?;
    let BallKind::Polar { reach, .. } = &ball.kind else {
        unreachable!()
    };
    let vols = g.sample_volumes();
    let psi: Vec<f64> = reach.iter().map(|d| cutoff_profile(d / r)).collect();
    let mass: f64 = vols.iter().zip(&psi).map(|(v, x)| v * x * x).sum();
    let inner: f64 = vols.iter().zip(reach).filter(|(_, d)| **d <= 0.5 * r).map(|x| x.0).sum();
    let outer: f64 = vols.iter().zip(reach).filter(|(_, d)| **d <= r).map(|x| x.0).sum();
    let lambda = mass.ln();
    let scale = (-0.5 * lambda).exp();
    let field = ScalarField::new(psi.iter().map(|x| x * scale).collect())?;
    let energy = dirichlet_energy(g, &field)?;
    Ok(Cutoff {
        energy_bound: 4.0 / (r * r) * (-lambda).exp() * outer,
        calibration_holds: inner <= mass && mass <= outer,
        field,
        lambda,
        inner_volume: inner,
        outer_volume: outer,
        energy,
    })
}
