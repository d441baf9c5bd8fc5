use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::config::{Check, ExperimentConfig, Family, OutputFormat};
use crate::analysis::{
    ball_profile, build_cutoff, check_alternative, check_functional_inequality, delta_constant,
    diameter, distance, maximal_function, small_radius_limit, volume_ratio, DiameterMeasurement,
    Point,
};
use crate::covering::{
    certify_diameter, certify_diameter_immersion, collapsed_ball_estimate, main_constant,
    radius_selector, vitali_cover, CertificateStatus, DiameterCertificate,
};
use crate::error::{LabError, Result};
use crate::sphere::{
    integrate, laplacian, scalar_curvature, sphere_volume, ConformalMetric, RadialGrid,
    ScalarField,
};
use crate::yamabe::{
    check_immersion_sobolev, check_log_sobolev, check_sobolev, einstein_hilbert, estimate_yamabe,
    optimal_tau, random_log_fourier, sphere_sobolev_constant, yamabe_quotient, InequalityReport,
    YamabeOptions,
};

/// Relative tolerance on inequality slack: a check fails when `slack < −TOL·|lhs|`.
pub const SLACK_TOL: f64 = 1e-3;
/// Relative tolerance of the Yamabe estimate against the sphere constant.
pub const YAMABE_TOL: f64 = 2e-2;
/// Relative tolerance of closed-form geometric oracles.
pub const ORACLE_TOL: f64 = 1e-2;

/// Builds the metric of a family on an `n`-dimensional grid with `m` points.
pub fn build_metric(family: &Family, n: usize, m: usize, seed: u64) -> Result<ConformalMetric> {
    family.validate()?;
    let grid = Arc::new(RadialGrid::new(n, m)?);
    let power = 0.5 * (n as f64 - 2.0);
    match family {
        Family::Round { r } => ConformalMetric::round(grid, *r),
        Family::RadialPerturbation { amplitude, mode } => {
            let (a, k) = (*amplitude, *mode as f64);
            ConformalMetric::radial_fn(grid, |t| 1.0 + a * (k * t).cos())
        }
        Family::ThinNeck { neck_width } => {
            let e = *neck_width;
            ConformalMetric::radial_fn(grid, |t| {
                let s = t.sin();
                (e / (e * e + s * s).sqrt()).powf(power)
            })
        }
        Family::RandomFourier { k_max, amplitude } => {
            let coeffs = fourier_coefficients(seed, *k_max, *amplitude);
            let g = ConformalMetric::radial_fn(grid, |t| fourier_factor(&coeffs, t))?;
            let r = scalar_curvature(&g)?;
            if !(r.min() > 0.0) {
                return Err(LabError::InvalidMetric(format!(
                    "random_fourier sample has min R = {:.6e}",
                    r.min()
                )));
            }
            Ok(g)
        }
        Family::Table { path } => ConformalMetric::from_table(grid, path),
    }
}

/// `a_k` drawn uniformly from `[−amplitude/k², amplitude/k²]`, `k = 1..k_max`.
pub fn fourier_coefficients(seed: u64, k_max: usize, amplitude: f64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (1..=k_max)
        .map(|k| {
            let bound = amplitude / (k * k) as f64;
            if bound > 0.0 {
                rng.random_range(-bound..=bound)
            } else {
                0.0
            }
        })
        .collect()
}

/// `1 + Σ a_k cos kθ`.
pub fn fourier_factor(coeffs: &[f64], theta: f64) -> f64 {
    1.0 + coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| a * ((k + 1) as f64 * theta).cos())
        .sum::<f64>()
}

/// Outcome of one requested check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub check: Check,
    pub pass: bool,
    pub within_hypothesis: bool,
    pub slack: Option<f64>,
    pub values: BTreeMap<String, Value>,
    pub notes: Vec<String>,
    pub error: Option<String>,
}

impl CheckRecord {
    fn new(check: Check) -> Self {
        Self {
            check,
            pass: true,
            within_hypothesis: true,
            slack: None,
            values: BTreeMap::new(),
            notes: Vec::new(),
            error: None,
        }
    }

    fn value(&mut self, key: &str, v: impl Into<Value>) -> &mut Self {
        self.values.insert(key.to_string(), v.into());
        self
    }

    fn assert(&mut self, ok: bool, what: &str) {
        if !ok {
            self.pass = false;
            self.notes.push(format!("assertion failed: {what}"));
        }
    }

    fn inequality(&mut self, key: &str, report: &InequalityReport) {
        self.slack = Some(self.slack.map_or(report.slack, |s| s.min(report.slack)));
        self.within_hypothesis &= report.within_hypothesis;
        if report.within_hypothesis {
            self.assert(report.holds(SLACK_TOL), key);
        }
        self.value(key, serde_json::to_value(report).unwrap_or(Value::Null));
    }

    fn certificate(&mut self, cert: &DiameterCertificate) {
        self.slack = cert.slack_log.is_finite().then_some(cert.slack_log);
        self.within_hypothesis = cert.status != CertificateStatus::OutOfHypothesis;
        if self.within_hypothesis {
            self.assert(cert.status == CertificateStatus::Complete, "pipeline complete");
            self.assert(cert.holds, "diameter below the bound");
        }
        if cert.slack_dominated_by_constant {
            self.notes.push("slack dominated by constant".into());
        }
        self.value("certificate", serde_json::to_value(cert).unwrap_or(Value::Null));
    }
}

/// Resolution metadata of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Resolution {
    pub n: usize,
    pub grid_m: usize,
    pub grid_spacing: f64,
}

/// Everything a run produced, in request order.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub resolution: Resolution,
    /// `Y` used by the inequality checks and where it came from.
    pub y: f64,
    pub y_source: String,
    pub checks: Vec<CheckRecord>,
    pub all_pass: bool,
    /// Seconds per check; only present when the config asks for timings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per check: `check,pass,within_hypothesis,slack`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,pass,within_hypothesis,slack\n");
        for c in &self.checks {
            let slack = c.slack.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", c.check, c.pass, c.within_hypothesis, slack);
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => Ok(self.to_csv()),
        }
    }

    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        std::fs::write(path, self.render(format)?)?;
        Ok(())
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    g: ConformalMetric,
    curvature: ScalarField,
    y: f64,
    /// `(Vol/w_n)^{1/n}`, the radius of the round sphere of equal volume.
    scale: f64,
    diameter: OnceCell<DiameterMeasurement>,
}

impl Context<'_> {
    fn diameter(&self) -> Result<&DiameterMeasurement> {
        if let Some(d) = self.diameter.get() {
            return Ok(d);
        }
        let d = diameter(&self.g)?;
        Ok(self.diameter.get_or_init(|| d))
    }

    fn round_radius(&self) -> Option<f64> {
        match self.cfg.family {
            Family::Round { r } => Some(r),
            _ => None,
        }
    }

    fn trial(&self) -> ScalarField {
        random_log_fourier(self.g.radial_grid().expect("radial"), self.cfg.seed, 6, 0.5)
    }
}

/// Runs every requested check; the metric is built only after the config validates.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let g = build_metric(&cfg.family, cfg.n, cfg.grid_m, cfg.seed)?;
    let curvature = scalar_curvature(&g)?;
    let y = sphere_sobolev_constant(cfg.n)?;
    let scale = (g.total_volume() / sphere_volume(cfg.n as i64)?).powf(1.0 / cfg.n as f64);
    let spacing = g.radial_grid().map(|gr| gr.spacing()).unwrap_or(f64::NAN);
    let ctx = Context {
        cfg,
        g,
        curvature,
        y,
        scale,
        diameter: OnceCell::new(),
    };
    let mut checks = Vec::with_capacity(cfg.checks.len());
    let mut timings = BTreeMap::new();
    for &check in &cfg.checks {
        let start = Instant::now();
        let mut rec = CheckRecord::new(check);
        if let Err(err) = run_check(&ctx, check, &mut rec) {
            rec.pass = false;
            rec.error = Some(err.to_string());
        }
        timings.insert(check.name().to_string(), start.elapsed().as_secs_f64());
        checks.push(rec);
    }
    let all_pass = checks.iter().all(|c| c.pass);
    let report = RunReport {
        config: cfg.clone(),
        resolution: Resolution {
            n: cfg.n,
            grid_m: cfg.grid_m,
            grid_spacing: spacing,
        },
        y,
        y_source: "sphere constant n(n−1)w_n^{2/n}; every family is conformal to the round sphere"
            .into(),
        checks,
        all_pass,
        timings: cfg.timings.then_some(timings),
    };
    if let Some(path) = &cfg.output {
        report.write(path, cfg.format)?;
    }
    Ok(report)
}

/// Independent runs on the rayon pool, results in input order.
pub fn run_many(configs: &[ExperimentConfig]) -> Vec<Result<RunReport>> {
    configs.par_iter().map(run).collect()
}

fn run_check(ctx: &Context, check: Check, rec: &mut CheckRecord) -> Result<()> {
    let g = &ctx.g;
    let n = ctx.cfg.n;
    let nf = n as f64;
    match check {
        Check::Curvature => {
            let grid = g.radial_grid().expect("radial");
            let lap = laplacian(grid, g.phi())?;
            let total = integrate(g, &ctx.curvature)?;
            rec.value("sphere_volume", sphere_volume(n as i64)?)
                .value("volume", g.total_volume())
                .value("min_R", ctx.curvature.min())
                .value("max_R", ctx.curvature.max())
                .value("integral_R", total)
                .value("max_abs_laplacian_phi", lap.values().iter().fold(0.0f64, |a, x| a.max(x.abs())));
            rec.assert(total.is_finite() && lap.values().iter().all(|x| x.is_finite()), "finite curvature");
            if let Some(r) = ctx.round_radius() {
                let expect = nf * (nf - 1.0) / (r * r);
                let err = (ctx.curvature.max() - expect).abs().max((ctx.curvature.min() - expect).abs());
                rec.value("round_R", expect);
                rec.assert(err <= 1e-6 * expect, "constant curvature n(n−1)/r²");
            }
            if ctx.curvature.min() <= 0.0 {
                rec.within_hypothesis = false;
                rec.notes.push("scalar curvature is not positive everywhere".into());
            }
        }
        Check::EinsteinHilbert => {
            let eh = einstein_hilbert(g)?;
            rec.value("einstein_hilbert", eh);
            rec.slack = Some(eh - ctx.y);
            // Aubin: every conformal metric has EH ≥ Y
            rec.assert(eh >= ctx.y * (1.0 - SLACK_TOL), "einstein_hilbert ≥ Y");
        }
        Check::Yamabe => {
            let est = estimate_yamabe(g, &YamabeOptions::default())?;
            let requotient = yamabe_quotient(g, &est.minimizer)?;
            let rel = (est.value - ctx.y) / ctx.y;
            rec.value("estimate", est.value)
                .value("sphere_constant", ctx.y)
                .value("relative_error", rel)
                .value("iterations", est.iterations)
                .value("converged", est.converged)
                .value("minimizer_quotient", requotient);
            rec.slack = Some(-rel.abs());
            rec.notes.push("the estimate is an upper bound for the infimum".into());
            rec.assert(rel.abs() < YAMABE_TOL, "estimate within 2% of the sphere constant");
            rec.assert((requotient - est.value).abs() <= 1e-9 * est.value, "quotient of the minimizer");
        }
        Check::Sobolev => {
            let u = ctx.trial();
            rec.inequality("constant_one", &check_sobolev(g, &ScalarField::constant(1.0, u.len()), ctx.y)?);
            rec.inequality("random_trial", &check_sobolev(g, &u, ctx.y)?);
        }
        Check::ImmersionSobolev => {
            let u = ctx.trial();
            rec.inequality("random_trial", &check_immersion_sobolev(g, &u)?);
        }
        Check::LogSobolev => {
            let u = ctx.trial();
            let tau = optimal_tau(g, &u)?;
            rec.inequality("optimal_tau", &check_log_sobolev(g, &u, tau, ctx.y)?);
            rec.inequality("half_tau", &check_log_sobolev(g, &u, 0.5 * tau, ctx.y)?);
            rec.inequality("double_tau", &check_log_sobolev(g, &u, 2.0 * tau, ctx.y)?);
        }
        Check::Distance => {
            let ns = distance(g, &Point::north(), &Point::south())?;
            let sn = distance(g, &Point::south(), &Point::north())?;
            rec.value("north_south", ns).value("south_north", sn);
            rec.assert(ns > 0.0 && ((ns - sn) / ns).abs() < ORACLE_TOL, "symmetric pole distance");
            if let Some(r) = ctx.round_radius() {
                rec.assert(((ns - PI * r) / (PI * r)).abs() < ORACLE_TOL, "pole distance πr");
            }
        }
        Check::Diameter => {
            let d = ctx.diameter()?;
            rec.value("diameter", d.value)
                .value("endpoints", serde_json::to_value(d.endpoints)?)
                .value("sources", d.sources);
            rec.assert(d.value > 0.0, "positive diameter");
            if let Some(r) = ctx.round_radius() {
                let rel = (d.value - PI * r) / (PI * r);
                rec.value("relative_error", rel);
                rec.assert(rel.abs() < ORACLE_TOL, "diameter πr");
            }
        }
        Check::BallProfile => {
            let p = ball_profile(g, &Point::north(), PI * ctx.scale, 17)?;
            let monotone = p.volumes.windows(2).all(|w| w[1] >= w[0])
                && p.power_integrals.windows(2).all(|w| w[1] >= w[0]);
            rec.value("profile", serde_json::to_value(&p)?);
            rec.assert(monotone, "volumes and integrals increase with the radius");
        }
        Check::MaximalFunction => {
            let r = 0.5 * PI * ctx.scale;
            let m = maximal_function(g, &ctx.curvature, &Point::north(), r)?;
            rec.value("r", r).value("maximal", m);
            rec.assert(m.is_finite() && m > 0.0, "positive maximal function");
            if n == 3 && ctx.round_radius().is_some() {
                let rel = (m - 12.0 * PI) / (12.0 * PI);
                rec.value("relative_error", rel);
                rec.assert(rel.abs() < ORACLE_TOL, "M R(pole, π/2) = 12π");
            }
        }
        Check::VolumeRatio => {
            let r = 1e-2 * ctx.scale;
            let k = volume_ratio(g, &Point::north(), r)?;
            let limit = small_radius_limit(n)?;
            let wn = sphere_volume(n as i64)?;
            rec.value("r", r)
                .value("kappa", k)
                .value("euclidean_limit", limit)
                .value("stated_limit_w_n", wn)
                .value("relative_to_euclidean", (k - limit) / limit);
            rec.notes.push(format!(
                "κ(p,s) tends to the unit Euclidean ball volume {limit:.6}, not w_n = {wn:.6}"
            ));
            rec.assert(((k - limit) / limit).abs() < ORACLE_TOL, "κ near the Euclidean ball volume");
        }
        Check::Cutoff => {
            let c = build_cutoff(g, &Point::north(), ctx.scale)?;
            rec.value("lambda", c.lambda)
                .value("inner_volume", c.inner_volume)
                .value("outer_volume", c.outer_volume)
                .value("energy", c.energy)
                .value("energy_bound", c.energy_bound);
            rec.slack = Some(c.energy_bound - c.energy);
            rec.assert(c.calibration_holds, "V(r/2) ≤ e^λ ≤ V(r)");
            rec.assert(c.energy <= c.energy_bound * (1.0 + SLACK_TOL), "energy bound");
        }
        Check::Functional => {
            for (k, f) in [0.25, 0.5, 1.0, 2.0].into_iter().enumerate() {
                let rep = check_functional_inequality(g, ctx.y, &Point::north(), f * ctx.scale)?;
                rec.inequality(&format!("r{k}"), &rep);
            }
        }
        Check::Alternative => {
            let rep = check_alternative(g, ctx.y, &Point::north(), 0.5 * PI * ctx.scale)?;
            rec.slack = Some((rep.maximal_log - rep.delta_log).max(rep.volume_ratio_log - rep.delta_log));
            rec.within_hypothesis = rep.within_hypothesis;
            if rep.within_hypothesis {
                rec.assert(rep.pass, "M R > δ or κ > δ");
            }
            rec.notes.extend(rep.notes.iter().cloned());
            rec.value("report", serde_json::to_value(&rep)?);
        }
        Check::Constants => {
            let d = delta_constant(n, ctx.y)?;
            let c = main_constant(n, ctx.y)?;
            let identity = c.log + d.log - 4f64.ln();
            rec.value("delta_log", d.log)
                .value("constant_log", c.log)
                .value("identity_residual", identity);
            rec.assert(identity.abs() < 1e-12, "ln C + ln δ = ln 4");
        }
        Check::RadiusSelector => {
            let d = delta_constant(n, ctx.y)?;
            let vol_log = g.total_volume().ln();
            let r0 = 2f64.powf(((vol_log - d.log) / (nf * 2f64.ln())).floor() + 1.0);
            let sel = radius_selector(g, &Point::north(), r0, d.log)?;
            rec.value("r0", r0).value("selection", serde_json::to_value(&sel)?);
            rec.assert(sel.s <= r0 && sel.maximal_log > d.log, "selected radius qualifies");
            rec.assert(sel.holder_holds, "s < δ⁻¹∫_B R^{(n−1)/2}");
        }
        Check::Cover => {
            let d = ctx.diameter()?;
            let s0 = d.value / 16.0;
            let cover = vitali_cover(g, &d.endpoints.0, &d.endpoints.1, |_| s0, 0.4)?;
            rec.slack = Some(cover.doubled_radius_sum - cover.rho * cover.endpoint_distance);
            rec.assert(cover.covered, "covered");
            rec.assert(cover.disjoint, "disjoint");
            rec.assert(cover.length_bound_ok, "ρ·dist ≤ Σ2s");
            rec.value("cover", serde_json::to_value(&cover)?);
        }
        Check::Certify => rec.certificate(&certify_diameter(g, ctx.y)?),
        Check::CertifyImmersion => rec.certificate(&certify_diameter_immersion(g)?),
        Check::CollapsedBall => {
            let cert = collapsed_ball_estimate(
                g,
                ctx.y,
                &Point::north(),
                0.5 * ctx.scale,
                ctx.cfg.delta_override,
            )?;
            rec.slack = cert.slack_log.is_finite().then_some(cert.slack_log);
            match cert.status {
                CertificateStatus::PreconditionUnmet => {
                    rec.within_hypothesis = false;
                    rec.notes.push("precondition V(p,r0)/r0ⁿ < δ unmet".into());
                }
                _ => rec.assert(cert.holds, "ball diameter below the local bound"),
            }
            rec.value("certificate", serde_json::to_value(&cert)?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_run_is_deterministic() {
        let cfg = ExperimentConfig {
            grid_m: 128,
            checks: vec![Check::Yamabe, Check::Diameter, Check::Constants],
            ..Default::default()
        };
        let a = run(&cfg).unwrap();
        assert!(a.all_pass, "{:#?}", a.checks);
        assert_eq!(a.to_json().unwrap(), run(&cfg).unwrap().to_json().unwrap());
        assert!(a.to_csv().starts_with("check,pass"));
    }

    #[test]
    fn fourier_factor_respects_floor() {
        let c = fourier_coefficients(3, 4, 0.2);
        assert_eq!(c.len(), 4);
        for k in 0..100 {
            assert!(fourier_factor(&c, PI * k as f64 / 99.0) >= 0.2 - 1e-12);
        }
        assert!(build_metric(&Family::RandomFourier { k_max: 4, amplitude: 0.6 }, 3, 64, 0).is_err());
    }
}
