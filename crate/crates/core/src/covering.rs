//! Radius selection, the Vitali-type covering along a shortest path, and the diameter
//! certificates built from them.

use serde::Serialize;

use crate::analysis::{
    delta_constant, diameter, distance_field, geodesic, iteration_exponent, log_sobolev_level,
    radius_grid, Ball, Geodesic, LogConstant, Point, DEFAULT_RADII,
};
use crate::error::{LabError, Result};
use crate::sphere::{
    integrate, scalar_curvature, sphere_volume, ConformalMetric, ScalarField,
};
use crate::yamabe::sphere_sobolev_constant;

/// Parameter `ρ` used by the certificates; the bound is also reported at the limit `ρ → ½`.
pub const CERTIFICATE_RHO: f64 = 0.49;
/// Path samples at which radii are selected.
pub const COVER_SAMPLES: usize = 32;
/// Slack share above which a certificate counts as dominated by its constant.
const DOMINATED_SHARE: f64 = 0.9;

/// `C(n, Y) = 4 max{w_n⁻¹, (2eY/n)^{−n/2} e^{(17n−18)/(n−2)·2ⁿ}}`, evaluated in log-space.
pub fn main_constant(n: usize, y: f64) -> Result<LogConstant> {
    // validates n and Y
    delta_constant(n, y)?;
    let wn = sphere_volume(n as i64)?.ln();
    let second = -log_sobolev_level(n, y) + iteration_exponent(n);
    Ok(LogConstant::from_log(4f64.ln() + (-wn).max(second)))
}

/// Outcome of the radius selection at one center.
#[derive(Debug, Clone, Serialize)]
pub struct RadiusSelection {
    pub s: f64,
    /// `ln(s⁻¹ V^{−(n−3)/2} (∫_B R)^{(n−1)/2})` at the selected radius.
    pub maximal_log: f64,
    /// `∫_{B(p,s)} R^{(n−1)/2} dv`.
    pub power_integral: f64,
    /// `s < δ⁻¹ ∫_{B(p,s)} R^{(n−1)/2} dv`, recomputed from the ball.
    pub holder_holds: bool,
}

/// Smallest grid radius `s ≤ r0` (ratio `2^{1/8}`, floor `r0/1024`) with
/// `δ < s⁻¹ V(p,s)^{−(n−3)/2} (∫_{B(p,s)} R dv)^{(n−1)/2}`.
pub fn radius_selector(
    g: &ConformalMetric,
    p: &Point,
    r0: f64,
    delta_log: f64,
) -> Result<RadiusSelection> {
    let curvature = scalar_curvature(g)?;
    let ball = Ball::new(g, p)?;
    let radii = radius_grid(r0, DEFAULT_RADII)?;
    let (vols, ints, power) = ball_arrays(g.n(), &ball, &curvature, &radii);
    select(g.n(), &radii, &vols, &ints, &power, delta_log)
}

fn ball_arrays(
    n: usize,
    ball: &Ball,
    curvature: &ScalarField,
    radii: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let e = 0.5 * (n as f64 - 1.0);
    let power: Vec<f64> = curvature.values().iter().map(|r| r.max(0.0).powf(e)).collect();
    (
        ball.volumes(radii),
        ball.integrals(curvature.values(), radii),
        ball.integrals(&power, radii),
    )
}

fn select(
    n: usize,
    radii: &[f64],
    vols: &[f64],
    ints: &[f64],
    power: &[f64],
    delta_log: f64,
) -> Result<RadiusSelection> {
    let nf = n as f64;
    for k in 0..radii.len() {
        if !(vols[k] > 0.0) || !(ints[k] > 0.0) {
            continue;
        }
        let s = radii[k];
        let l = -s.ln() - 0.5 * (nf - 3.0) * vols[k].ln() + 0.5 * (nf - 1.0) * ints[k].ln();
        if l > delta_log {
            return Ok(RadiusSelection {
                s,
                maximal_log: l,
                power_integral: power[k],
                holder_holds: power[k] > 0.0 && s.ln() < power[k].ln() - delta_log,
            });
        }
    }
    Err(LabError::Precondition(format!(
        "no grid radius up to {} exceeds ln δ = {delta_log}",
        radii[radii.len() - 1]
    )))
}

/// Disjoint balls selected along a shortest path.
#[derive(Debug, Clone, Serialize)]
pub struct CoveringResult {
    pub centers: Vec<Point>,
    /// Distance from `x` to each center along the path.
    pub positions: Vec<f64>,
    pub radii: Vec<f64>,
    pub rho: f64,
    pub endpoint_distance: f64,
    /// The chain the disjoint family was extracted from covers every path sample.
    pub covered: bool,
    pub disjoint: bool,
    pub length_bound_ok: bool,
    /// `Σ 2s(pᵢ)` over the disjoint family.
    pub doubled_radius_sum: f64,
    /// Number of balls in the covering chain.
    pub chain_length: usize,
}

/// Vitali-type covering along the shortest path from `x` to `y` with radius function `s`.
pub fn vitali_cover(
    g: &ConformalMetric,
    x: &Point,
    y: &Point,
    s: impl Fn(&Point) -> f64,
    rho: f64,
) -> Result<CoveringResult> {
    let path = geodesic(g, x, y)?;
    let radii: Vec<f64> = path.points.iter().map(&s).collect();
    cover_path(&path, &radii, rho)
}

/// Covering of a sampled shortest path.
///
/// A greedy chain is built from `x`: among the balls containing the current frontier, the
/// one reaching farthest is taken. In such a chain ball `k` and ball `k + 2` never meet,
/// so the even and the odd members are each pairwise disjoint, and one of them carries at
/// least half of the chain's total length `≥ dist(x, y)`. That half is returned.
pub fn cover_path(path: &Geodesic, radii: &[f64], rho: f64) -> Result<CoveringResult> {
    if !(rho > 0.0 && rho < 0.5) {
        return Err(LabError::Domain(format!("ρ must lie in (0, ½), got {rho}")));
    }
    if radii.len() != path.t.len() {
        return Err(LabError::Alignment {
            expected: path.t.len(),
            got: radii.len(),
        });
    }
    if let Some(k) = radii.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(LabError::Precondition(format!(
            "radius at path sample {k} is {}, need a positive finite value",
            radii[k]
        )));
    }
    let t = &path.t;
    let len = path.length;
    let mut chain: Vec<usize> = Vec::new();
    let mut frontier = 0.0;
    let mut gap = false;
    loop {
        let best = (0..t.len())
            .filter(|&k| t[k] - radii[k] <= frontier && frontier <= t[k] + radii[k])
            .max_by(|&a, &b| (t[a] + radii[a]).total_cmp(&(t[b] + radii[b])).then(b.cmp(&a)));
        match best {
            Some(k) if t[k] + radii[k] > frontier => {
                chain.push(k);
                frontier = t[k] + radii[k];
            }
            _ => {
                // nothing extends the frontier: jump to the next ball
                gap = true;
                let next = (0..t.len())
                    .filter(|&k| t[k] - radii[k] > frontier)
                    .min_by(|&a, &b| (t[a] - radii[a]).total_cmp(&(t[b] - radii[b])));
                match next {
                    Some(k) => frontier = t[k] - radii[k],
                    None => break,
                }
            }
        }
        if frontier >= len {
            break;
        }
    }
    let covered = !gap
        && (0..t.len()).all(|q| chain.iter().any(|&k| (t[q] - t[k]).abs() <= radii[k]));
    let half = |parity: usize| -> Vec<usize> {
        chain.iter().enumerate().filter(|(i, _)| i % 2 == parity).map(|(_, &k)| k).collect()
    };
    let sum = |ks: &[usize]| ks.iter().map(|&k| 2.0 * radii[k]).sum::<f64>();
    let (even, odd) = (half(0), half(1));
    let chosen = if sum(&odd) > sum(&even) { odd } else { even };
    let disjoint = chosen.iter().enumerate().all(|(a, &i)| {
        chosen[a + 1..]
            .iter()
            .all(|&j| (t[i] - t[j]).abs() > radii[i] + radii[j])
    });
    let doubled = sum(&chosen);
    Ok(CoveringResult {
        centers: chosen.iter().map(|&k| path.points[k]).collect(),
        positions: chosen.iter().map(|&k| t[k]).collect(),
        radii: chosen.iter().map(|&k| radii[k]).collect(),
        rho,
        endpoint_distance: len,
        covered,
        disjoint,
        length_bound_ok: rho * len <= doubled,
        doubled_radius_sum: doubled,
        chain_length: chain.len(),
    })
}

/// Pipeline stage record.
#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

impl Stage {
    fn new(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ok,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    Complete,
    Incomplete,
    OutOfHypothesis,
    PreconditionUnmet,
}

/// Diameter bound with every intermediate quantity, in log-space where needed.
#[derive(Debug, Clone, Serialize)]
pub struct DiameterCertificate {
    pub theorem: String,
    pub n: usize,
    /// `Y` for the class bound, the sphere constant for the immersion bound.
    pub y: f64,
    /// `ln C(n, Y)`, or `ln(4/δ)` for the collapsed-ball estimate.
    pub constant_log: f64,
    pub diameter_measured: f64,
    /// `∫ R^{(n−1)/2} dv` over the region the bound integrates.
    pub integral: f64,
    pub bound_value: f64,
    pub bound_log: f64,
    pub slack_log: f64,
    /// `ln((2/ρ) δ⁻¹ Σᵢ ∫_{B(pᵢ,sᵢ)} R^{(n−1)/2})` at `ρ = CERTIFICATE_RHO`.
    pub chain_bound_log: Option<f64>,
    pub rho: f64,
    pub r0: Option<f64>,
    pub holds: bool,
    pub slack_dominated_by_constant: bool,
    pub status: CertificateStatus,
    pub failed_stage: Option<String>,
    pub stages: Vec<Stage>,
}

impl DiameterCertificate {
    fn empty(theorem: &str, n: usize, y: f64) -> Self {
        Self {
            theorem: theorem.into(),
            n,
            y,
            constant_log: f64::NAN,
            diameter_measured: f64::NAN,
            integral: f64::NAN,
            bound_value: f64::NAN,
            bound_log: f64::NAN,
            slack_log: f64::NAN,
            chain_bound_log: None,
            rho: CERTIFICATE_RHO,
            r0: None,
            holds: false,
            slack_dominated_by_constant: false,
            status: CertificateStatus::Complete,
            failed_stage: None,
            stages: Vec::new(),
        }
    }

    fn stage(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.stages.push(Stage::new(name, ok, detail));
        if !ok && self.failed_stage.is_none() {
            self.failed_stage = Some(name.into());
            if self.status == CertificateStatus::Complete {
                self.status = CertificateStatus::Incomplete;
            }
        }
    }

    fn finish(&mut self, bound_log: f64) {
        self.bound_log = bound_log;
        self.bound_value = bound_log.exp();
        self.slack_log = bound_log - self.diameter_measured.ln();
        self.holds = self.slack_log >= 0.0;
        self.slack_dominated_by_constant =
            self.slack_log > 0.0 && self.constant_log >= DOMINATED_SHARE * self.slack_log;
    }
}

/// `diam(M) ≤ C(n, Y) ∫_M R^{(n−1)/2} dv` for `R > 0`, assembled through the covering.
pub fn certify_diameter(g: &ConformalMetric, y: f64) -> Result<DiameterCertificate> {
    let curvature = scalar_curvature(g)?;
    let mut cert = DiameterCertificate::empty("diameter_scalar_curvature", g.n(), y);
    let positive = curvature.min() > 0.0;
    cert.stage(
        "hypothesis",
        positive,
        format!("min R = {:.6e}", curvature.min()),
    );
    if !positive {
        cert.status = CertificateStatus::OutOfHypothesis;
    }
    pipeline(g, y, curvature, cert)
}

/// `diam(M) ≤ C(n) ∫_M R₊^{(n−1)/2} dv` with `C(n) = C(n, n(n−1)w_n^{2/n})`; the identity is
/// a conformal immersion into the round sphere.
pub fn certify_diameter_immersion(g: &ConformalMetric) -> Result<DiameterCertificate> {
    let y = sphere_sobolev_constant(g.n())?;
    let curvature = scalar_curvature(g)?.positive_part();
    let mut cert = DiameterCertificate::empty("diameter_immersion", g.n(), y);
    cert.stage(
        "hypothesis",
        true,
        "conformal immersion into the round sphere (identity map)",
    );
    if curvature.max() <= 0.0 {
        let d = diameter(g)?;
        cert.constant_log = main_constant(g.n(), y)?.log;
        cert.diameter_measured = d.value;
        cert.integral = 0.0;
        cert.bound_value = 0.0;
        cert.bound_log = f64::NEG_INFINITY;
        cert.slack_log = f64::NEG_INFINITY;
        cert.holds = d.value <= 0.0;
        cert.status = CertificateStatus::OutOfHypothesis;
        cert.stage("curvature", false, "R₊ vanishes identically; the bound degenerates to 0");
        return Ok(cert);
    }
    pipeline(g, y, curvature, cert)
}

fn pipeline(
    g: &ConformalMetric,
    y: f64,
    curvature: ScalarField,
    mut cert: DiameterCertificate,
) -> Result<DiameterCertificate> {
    let n = g.n();
    let nf = n as f64;
    let delta = delta_constant(n, y)?;
    let c = main_constant(n, y)?;
    cert.constant_log = c.log;
    cert.stage(
        "constants",
        (c.log + delta.log - 4f64.ln()).abs() < 1e-9,
        format!("ln δ = {:.6}, ln C = {:.6}", delta.log, c.log),
    );

    let e = 0.5 * (nf - 1.0);
    let power = ScalarField::new(curvature.values().iter().map(|r| r.max(0.0).powf(e)).collect())?;
    let integral = integrate(g, &power)?;
    cert.integral = integral;

    let measured = diameter(g)?;
    cert.diameter_measured = measured.value;
    cert.stage(
        "diameter",
        measured.value > 0.0,
        format!("{:.6} from {} sources at resolution {}", measured.value, measured.sources, measured.resolution),
    );

    // smallest power of two with Vol < δ r0ⁿ
    let vol_log = g.total_volume().ln();
    let k = ((vol_log - delta.log) / (nf * 2f64.ln())).floor() + 1.0;
    let r0 = 2f64.powf(k);
    cert.r0 = Some(r0);
    let r0_ok = r0.is_finite() && vol_log < delta.log + nf * r0.ln();
    cert.stage("r0", r0_ok, format!("r0 = 2^{k}"));
    if !r0_ok {
        cert.finish(c.log + integral.ln());
        return Ok(cert);
    }

    let (x, yp) = measured.endpoints;
    let path = match geodesic(g, &x, &yp) {
        Ok(p) => p,
        Err(err) => {
            cert.stage("geodesic", false, err.to_string());
            cert.finish(c.log + integral.ln());
            return Ok(cert);
        }
    };
    let path = subsample(&path, COVER_SAMPLES);
    cert.stage(
        "geodesic",
        true,
        format!("{} samples, length {:.6}", path.points.len(), path.length),
    );

    let radii_grid = radius_grid(r0, DEFAULT_RADII)?;
    let total = (g.total_volume(), integrate(g, &curvature)?, integral);
    // balls of radius at least twice the measured diameter are all of M
    let whole = radii_grid[0] >= 2.0 * measured.value;
    let mut selections = Vec::with_capacity(path.points.len());
    for p in &path.points {
        let arrays = if whole {
            let k = radii_grid.len();
            (vec![total.0; k], vec![total.1; k], vec![total.2; k])
        } else {
            let ball = Ball::new(g, p)?;
            ball_arrays(n, &ball, &curvature, &radii_grid)
        };
        match select(n, &radii_grid, &arrays.0, &arrays.1, &arrays.2, delta.log) {
            Ok(sel) => selections.push(sel),
            Err(err) => {
                cert.stage("radius_selection", false, err.to_string());
                cert.finish(c.log + integral.ln());
                return Ok(cert);
            }
        }
    }
    let holder = selections.iter().all(|s| s.holder_holds);
    cert.stage(
        "radius_selection",
        holder,
        format!(
            "{} centers, smallest grid radius r0/1024 = {:.6e}{}",
            selections.len(),
            radii_grid[0],
            if whole { ", every selected ball is all of M" } else { "" }
        ),
    );

    let radii: Vec<f64> = selections.iter().map(|s| s.s).collect();
    let cover = cover_path(&path, &radii, CERTIFICATE_RHO)?;
    cert.stage(
        "covering",
        cover.covered && cover.disjoint && cover.length_bound_ok,
        format!(
            "{} disjoint balls from a chain of {}, Σ2s = {:.6e}",
            cover.centers.len(),
            cover.chain_length,
            cover.doubled_radius_sum
        ),
    );

    // (2/ρ) δ⁻¹ Σ ∫_{B_i} R^{(n−1)/2}, with the balls' integrals from the selection
    let chosen: f64 = cover
        .positions
        .iter()
        .map(|t| {
            let k = path.t.iter().position(|x| x == t).expect("center on path");
            selections[k].power_integral
        })
        .sum();
    let chain_log = (2.0 / CERTIFICATE_RHO).ln() - delta.log + chosen.ln();
    cert.chain_bound_log = Some(chain_log);
    let direct_log = (2.0 / CERTIFICATE_RHO).ln() - delta.log + integral.ln();
    cert.stage(
        "assembly",
        chosen <= integral * (1.0 + 1e-9) && measured.value.ln() <= chain_log,
        format!(
            "chain bound ln = {chain_log:.6}, ρ = {CERTIFICATE_RHO} bound ln = {direct_log:.6}, limit factor 4"
        ),
    );
    cert.finish(c.log + integral.ln());
    Ok(cert)
}

/// At most `count` path samples, evenly spaced in index, always keeping both ends.
fn subsample(path: &Geodesic, count: usize) -> Geodesic {
    let len = path.points.len();
    if len <= count {
        return path.clone();
    }
    let idx: Vec<usize> = (0..count)
        .map(|k| ((k as f64) * (len - 1) as f64 / (count - 1) as f64).round() as usize)
        .collect();
    Geodesic {
        points: idx.iter().map(|&k| path.points[k]).collect(),
        t: idx.iter().map(|&k| path.t[k]).collect(),
        length: path.length,
    }
}

/// Number of extra source rows used to measure the diameter of a polar ball.
const BALL_SOURCES: usize = 8;

/// `diam(B(p, r0)) ≤ 4δ⁻¹ ∫_{B(p,2r0)} R^{(n−1)/2}` under `V(p, r0)/r0ⁿ < δ`.
///
/// `delta_override` replaces `δ(n, Y)` for diagnostics. Only pole centers on the radial
/// backend are supported.
pub fn collapsed_ball_estimate(
    g: &ConformalMetric,
    y: f64,
    p: &Point,
    r0: f64,
    delta_override: Option<f64>,
) -> Result<DiameterCertificate> {
    if !(r0 > 0.0) {
        return Err(LabError::Domain(format!("radius must be positive, got {r0}")));
    }
    g.require_radial("collapsed_ball_estimate")?;
    if !p.is_pole() {
        return Err(LabError::UnsupportedBackend("collapsed_ball_estimate away from the poles"));
    }
    let n = g.n();
    let mut cert = DiameterCertificate::empty("collapsed_ball", n, y);
    cert.r0 = Some(r0);
    let delta_log = match delta_override {
        Some(d) if d > 0.0 => {
            cert.stage("constants", true, format!("diagnostic δ′ = {d}"));
            d.ln()
        }
        Some(d) => return Err(LabError::Domain(format!("δ′ must be positive, got {d}"))),
        None => {
            let d = delta_constant(n, y)?;
            cert.stage("constants", true, format!("ln δ = {:.6}", d.log));
            d.log
        }
    };
    cert.constant_log = 4f64.ln() - delta_log;

    let curvature = scalar_curvature(g)?;
    let ball = Ball::new(g, p)?;
    let (vols, _, power) = ball_arrays(n, &ball, &curvature, &[r0, 2.0 * r0]);
    let kappa_log = vols[0].ln() - n as f64 * r0.ln();
    cert.integral = power[1];
    cert.stage(
        "monotonicity",
        power[1] >= power[0],
        format!("∫ over B(p,r0) = {:.6e}, over B(p,2r0) = {:.6e}", power[0], power[1]),
    );
    if !(kappa_log < delta_log) {
        cert.status = CertificateStatus::PreconditionUnmet;
        cert.stages.push(Stage::new(
            "precondition",
            false,
            format!("ln κ(p, r0) = {kappa_log:.6} is not below ln δ = {delta_log:.6}"),
        ));
        cert.failed_stage = Some("precondition".into());
        return Ok(cert);
    }
    cert.stage(
        "precondition",
        true,
        format!("ln κ(p, r0) = {kappa_log:.6} < ln δ = {delta_log:.6}"),
    );

    let measured = polar_ball_diameter(g, p, r0)?;
    cert.diameter_measured = measured;
    cert.stage("ball_diameter", measured.is_finite(), format!("{measured:.6}"));
    if power[1] > 0.0 {
        cert.finish(cert.constant_log + power[1].ln());
    } else {
        cert.bound_value = 0.0;
        cert.bound_log = f64::NEG_INFINITY;
        cert.slack_log = f64::NEG_INFINITY;
        cert.holds = measured <= 0.0;
    }
    Ok(cert)
}

/// Largest distance between slice nodes inside the polar ball `B(p, r0)`. The ball is
/// rotationally symmetric, so sources on the `α = 0` meridian reach every pair.
fn polar_ball_diameter(g: &ConformalMetric, p: &Point, r0: f64) -> Result<f64> {
    let from_p = distance_field(g, p)?;
    let grid = g.require_radial("collapsed_ball_estimate")?;
    let inside: Vec<f64> = grid
        .theta()
        .iter()
        .copied()
        .filter(|&t| from_p.at(&Point::slice(t, 0.0)).map(|d| d <= r0).unwrap_or(false))
        .collect();
    if inside.is_empty() {
        return Ok(0.0);
    }
    let rows = inside.len();
    let mut sources: Vec<f64> = (0..BALL_SOURCES)
        .map(|k| inside[(k * (rows - 1)) / (BALL_SOURCES - 1).max(1)])
        .collect();
    sources.dedup();
    let alphas: Vec<f64> = (0..grid.m())
        .map(|j| std::f64::consts::PI * j as f64 / (grid.m() - 1) as f64)
        .collect();
    let mut best: f64 = 0.0;
    for &ts in &sources {
        let field = distance_field(g, &Point::slice(ts, 0.0))?;
        for &t in &inside {
            for &a in &alphas {
                best = best.max(field.at(&Point::slice(t, a))?);
            }
        }
    }
    Ok(best)
}
