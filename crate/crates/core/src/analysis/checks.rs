use serde::Serialize;

use super::balls::{maximal_on, small_radius_limit, Ball};
use super::distance::Point;
use crate::error::{LabError, Result};
use crate::sphere::{scalar_curvature, sphere_volume, ConformalMetric, ScalarField};
use crate::yamabe::InequalityReport;

/// A constant carried in log-space; `value = exp(log)` may under- or overflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogConstant {
    pub log: f64,
    pub value: f64,
}

impl LogConstant {
    pub fn from_log(log: f64) -> Self {
        Self {
            log,
            value: log.exp(),
        }
    }
}

/// Exponent `(17n − 18)/(n − 2) · 2ⁿ` shared by `δ` and `C(n, Y)`.
pub(crate) fn iteration_exponent(n: usize) -> f64 {
    let nf = n as f64;
    (17.0 * nf - 18.0) / (nf - 2.0) * 2f64.powi(n as i32)
}

/// `(n/2) ln(2eY/n)`, the left side of the logarithmic Yamabe-Sobolev inequality.
pub fn log_sobolev_level(n: usize, y: f64) -> f64 {
    let nf = n as f64;
    0.5 * nf * (2.0 * std::f64::consts::E * y / nf).ln()
}

fn check_dimension(n: usize, y: f64) -> Result<()> {
    if n < 3 {
        return Err(LabError::Domain(format!("dimension n = {n}, need n >= 3")));
    }
    if !(y > 0.0) {
        return Err(LabError::Domain(format!("Y must be positive, got {y}")));
    }
    Ok(())
}

/// `δ(n, Y) = min{w_n, (2eY/n)^{n/2} e^{−(17n−18)/(n−2)·2ⁿ}}`, evaluated in log-space.
pub fn delta_constant(n: usize, y: f64) -> Result<LogConstant> {
    check_dimension(n, y)?;
    let wn = sphere_volume(n as i64)?.ln();
    let second = log_sobolev_level(n, y) - iteration_exponent(n);
    Ok(LogConstant::from_log(wn.min(second)))
}

fn positive(curvature: &ScalarField) -> bool {
    curvature.values().iter().all(|&r| r > 0.0)
}

/// Localized logarithmic inequality
/// `(n/2)ln(2eY/n) ≤ 16(n−1)/(n−2)·V(p,r)/V(p,r/2) + r²/V(p,r/2)·∫_{B(p,r)}R dv + ln(V(p,r)/rⁿ)`.
pub fn check_functional_inequality(
    g: &ConformalMetric,
    y: f64,
    p: &Point,
    r: f64,
) -> Result<InequalityReport> {
    let curvature = scalar_curvature(g)?;
    let ball = Ball::new(g, p)?;
    functional_on(g, &ball, &curvature, y, r)
}

/// The same inequality at several radii around one center.
pub fn check_functional_radii(
    g: &ConformalMetric,
    y: f64,
    p: &Point,
    radii: &[f64],
) -> Result<Vec<InequalityReport>> {
    let curvature = scalar_curvature(g)?;
    let ball = Ball::new(g, p)?;
    radii
        .iter()
        .map(|&r| functional_on(g, &ball, &curvature, y, r))
        .collect()
}

fn functional_on(
    g: &ConformalMetric,
    ball: &Ball,
    curvature: &ScalarField,
    y: f64,
    r: f64,
) -> Result<InequalityReport> {
    let n = g.n();
    check_dimension(n, y)?;
    if !(r > 0.0) {
        return Err(LabError::Domain(format!("radius must be positive, got {r}")));
    }
    let v = ball.volumes(&[0.5 * r, r]);
    let (half, full) = (v[0], v[1]);
    if !(half > 0.0) {
        return Err(LabError::Degenerate(format!(
            "ball of radius {} holds no samples",
            0.5 * r
        )));
    }
    let int_r = ball.integrals(curvature.values(), &[r])[0];
    let nf = n as f64;
    let lhs = log_sobolev_level(n, y);
    let ratio_term = 16.0 * (nf - 1.0) / (nf - 2.0) * full / half;
    let curvature_term = r * r / half * int_r;
    let volume_term = (full / r.powi(n as i32)).ln();
    let mut report = InequalityReport::new("localized_log_sobolev", lhs, ratio_term + curvature_term + volume_term)
        .with_input("n", n)
        .with_input("Y", y)
        .with_input("center", ball.center().label())
        .with_input("r", r)
        .with_input("V_r", full)
        .with_input("V_half", half)
        .with_input("int_R", int_r)
        .with_input("ratio_term", ratio_term)
        .with_input("curvature_term", curvature_term)
        .with_input("volume_term", volume_term)
        .with_context(g.radial_grid().map(|gr| gr.m()), None);
    if !positive(curvature) {
        report.within_hypothesis = false;
        report = report.note("scalar curvature is not positive everywhere");
    }
    Ok(report)
}

/// Outcome of the two-branch alternative at one center and radius.
#[derive(Debug, Clone, Serialize)]
pub struct AlternativeReport {
    pub n: usize,
    pub center: Point,
    pub r: f64,
    /// `M R(p, r)`.
    pub maximal_value: f64,
    pub maximal_log: f64,
    /// Radius attaining the supremum on the grid.
    pub maximal_radius: f64,
    /// `κ(p, r)`.
    pub volume_ratio: f64,
    pub volume_ratio_log: f64,
    pub delta: f64,
    pub delta_log: f64,
    /// `M R(p, r) > δ`.
    pub branch_one: bool,
    /// `κ(p, r) > δ`.
    pub branch_two: bool,
    pub pass: bool,
    pub within_hypothesis: bool,
    /// Small-radius limit of `κ`, the unit Euclidean ball volume.
    pub small_radius_limit: f64,
    /// `w_n`, the value entering `δ`.
    pub sphere_volume: f64,
    pub notes: Vec<String>,
}

/// Threshold below which `δ` makes the alternative numerically trivial.
const TRIVIAL_DELTA_LOG: f64 = -50.0;

/// Evaluates `M R(p, r) > δ` or `κ(p, r) > δ`; at least one must hold when `R > 0`.
pub fn check_alternative(
    g: &ConformalMetric,
    y: f64,
    p: &Point,
    r: f64,
) -> Result<AlternativeReport> {
    let curvature = scalar_curvature(g)?;
    let ball = Ball::new(g, p)?;
    alternative_on(g, &ball, &curvature, y, r)
}

/// The alternative at several radii around one center.
pub fn check_alternative_radii(
    g: &ConformalMetric,
    y: f64,
    p: &Point,
    radii: &[f64],
) -> Result<Vec<AlternativeReport>> {
    let curvature = scalar_curvature(g)?;
    let ball = Ball::new(g, p)?;
    radii
        .iter()
        .map(|&r| alternative_on(g, &ball, &curvature, y, r))
        .collect()
}

pub(crate) fn alternative_on(
    g: &ConformalMetric,
    ball: &Ball,
    curvature: &ScalarField,
    y: f64,
    r: f64,
) -> Result<AlternativeReport> {
    let n = g.n();
    let delta = delta_constant(n, y)?;
    let (maximal_log, maximal_radius) = maximal_on(n, ball, curvature, r)?;
    let v = ball.volumes(&[r])[0];
    let volume_ratio_log = v.ln() - n as f64 * r.ln();
    let branch_one = maximal_log > delta.log;
    let branch_two = volume_ratio_log > delta.log;
    let within_hypothesis = positive(curvature);
    let limit = small_radius_limit(n)?;
    let wn = sphere_volume(n as i64)?;
    let mut notes = vec![format!(
        "κ(p,s) tends to the unit Euclidean ball volume {limit:.6} as s → 0, not to w_n = {wn:.6}; δ is evaluated with w_n as stated"
    )];
    if delta.log < TRIVIAL_DELTA_LOG {
        notes.push(format!(
            "ln δ = {:.3}: both branches are compared against an astronomically small threshold, so the check is structural",
            delta.log
        ));
    }
    if !within_hypothesis {
        notes.push("scalar curvature is not positive everywhere".into());
    }
    Ok(AlternativeReport {
        n,
        center: ball.center(),
        r,
        maximal_value: maximal_log.exp(),
        maximal_log,
        maximal_radius,
        volume_ratio: volume_ratio_log.exp(),
        volume_ratio_log,
        delta: delta.value,
        delta_log: delta.log,
        branch_one,
        branch_two,
        pass: branch_one || branch_two,
        within_hypothesis,
        small_radius_limit: limit,
        sphere_volume: wn,
        notes,
    })
}

/// Record of the halving implication `κ(p,s) ≤ δ ∧ M R(p,r) ≤ δ ⇒ κ(p,s/2) ≤ δ`.
#[derive(Debug, Clone, Serialize)]
pub struct ClaimRecord {
    pub levels: usize,
    /// Levels at which the premise held.
    pub premise_reached: usize,
    /// Levels at which the premise held but the conclusion failed.
    pub failures: usize,
    pub maximal_log: f64,
    pub delta_log: f64,
}

impl ClaimRecord {
    pub fn holds(&self) -> bool {
        self.failures == 0
    }

    pub fn vacuous(&self) -> bool {
        self.premise_reached == 0
    }
}

/// Tests the halving implication at `s = r/2^k`, `k = 0..levels`.
pub fn iteration_claim(
    g: &ConformalMetric,
    y: f64,
    p: &Point,
    r: f64,
    levels: usize,
) -> Result<ClaimRecord> {
    let curvature = scalar_curvature(g)?;
    let ball = Ball::new(g, p)?;
    let delta = delta_constant(g.n(), y)?;
    let (maximal_log, _) = maximal_on(g.n(), &ball, &curvature, r)?;
    let radii: Vec<f64> = (0..=levels).map(|k| r / 2f64.powi(k as i32)).collect();
    let vols = ball.volumes(&radii);
    let kappa: Vec<f64> = radii
        .iter()
        .zip(&vols)
        .map(|(s, v)| v.ln() - g.n() as f64 * s.ln())
        .collect();
    let mut premise_reached = 0;
    let mut failures = 0;
    for k in 0..levels {
        if maximal_log <= delta.log && kappa[k] <= delta.log {
            premise_reached += 1;
            if kappa[k + 1] > delta.log {
                failures += 1;
            }
        }
    }
    Ok(ClaimRecord {
        levels,
        premise_reached,
        failures,
        maximal_log,
        delta_log: delta.log,
    })
}
