//! Einstein-Hilbert functional, Yamabe quotient and its minimisation, and the
//! Yamabe-Sobolev / logarithmic Sobolev checkers.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::error::{LabError, Result};
use crate::sphere::{
    conformal_coefficient, critical_exponent, scalar_curvature, shell_factor,
    sphere_volume, ConformalMetric, RadialGrid, ScalarField,
};

/// Uniform verification record: `slack = rhs − lhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub inputs: BTreeMap<String, Value>,
    pub within_hypothesis: bool,
    pub grid_m: Option<usize>,
    pub seed: Option<u64>,
    pub notes: Vec<String>,
}

impl InequalityReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack: rhs - lhs,
            inputs: BTreeMap::new(),
            within_hypothesis: true,
            grid_m: None,
            seed: None,
            notes: Vec::new(),
        }
    }

    pub fn with_input(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.inputs.insert(key.to_string(), value.into());
        self
    }

    pub fn with_context(mut self, grid_m: Option<usize>, seed: Option<u64>) -> Self {
        self.grid_m = grid_m;
        self.seed = seed;
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// `slack ≥ −rel_tol·|lhs|`.
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.slack >= -rel_tol * self.lhs.abs()
    }

    /// `|slack| ≤ rel_tol·|lhs|`.
    pub fn is_equality(&self, rel_tol: f64) -> bool {
        self.slack.abs() <= rel_tol * self.lhs.abs()
    }
}

/// Best quotient found by [`estimate_yamabe`]; an upper bound for the infimum.
#[derive(Debug, Clone, Serialize)]
pub struct YamabeEstimate {
    pub value: f64,
    pub minimizer: ScalarField,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Halve the trial step until the quotient decreases; after an accepted step the next
    /// trial step doubles, capped at `max`.
    Backtracking { initial: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct YamabeOptions {
    pub max_iter: usize,
    pub step_rule: StepRule,
    pub tol: f64,
    /// Starting trial function; `None` starts from `u ≡ 1`.
    pub start: Option<ScalarField>,
}

impl Default for YamabeOptions {
    fn default() -> Self {
        Self {
            max_iter: 4000,
            step_rule: StepRule::Backtracking {
                initial: 1e-2,
                max: 1.0,
            },
            tol: 1e-10,
            start: None,
        }
    }
}

/// Number of consecutive small relative changes that declares convergence.
const STALL_WINDOW: usize = 10;

/// `(∫R dv)/(∫dv)^{(n−2)/n}`.
pub fn einstein_hilbert(g: &ConformalMetric) -> Result<f64> {
    let r = scalar_curvature(g)?;
    let vols = g.sample_volumes();
    let volume: f64 = vols.iter().sum();
    if !(volume > 0.0) {
        return Err(LabError::Degenerate("zero volume".into()));
    }
    let total: f64 = vols.iter().zip(r.values()).map(|(v, r)| v * r).sum();
    let n = g.n() as f64;
    Ok(total / volume.powf((n - 2.0) / n))
}

/// Precomputed pieces of the Yamabe quotient of a fixed radial metric.
struct QuotientKernel {
    n: usize,
    q: f64,
    coeff: f64,
    shell: f64,
    vols: Vec<f64>,
    curvature: Vec<f64>,
    /// `a_e φ_eφ_{e+1} / h` per edge, without the shell factor.
    stiffness: Vec<f64>,
    /// Ambient coordinate `x₀ = cos θ` of each sample.
    axis: Vec<f64>,
}

struct QuotientValue {
    numerator: f64,
    critical_mass: f64,
    value: f64,
}

impl QuotientKernel {
    fn new(g: &ConformalMetric, curvature: ScalarField) -> Result<Self> {
        let grid = g.require_radial("yamabe_quotient")?;
        let phi = g.phi().values();
        let a = grid.edge_weights();
        let stiffness = (0..grid.m() - 1)
            .map(|e| a[e] * phi[e] * phi[e + 1] / grid.spacing())
            .collect();
        Ok(Self {
            n: g.n(),
            q: critical_exponent(g.n()),
            coeff: conformal_coefficient(g.n()),
            shell: shell_factor(g),
            vols: g.sample_volumes(),
            curvature: curvature.values().to_vec(),
            stiffness,
            axis: grid.theta().iter().map(|t| t.cos()).collect(),
        })
    }

    fn dirichlet(&self, u: &[f64]) -> f64 {
        self.shell
            * self
                .stiffness
                .iter()
                .enumerate()
                .map(|(e, k)| k * (u[e + 1] - u[e]).powi(2))
                .sum::<f64>()
    }

    fn potential(&self, u: &[f64]) -> f64 {
        self.vols
            .iter()
            .zip(&self.curvature)
            .zip(u)
            .map(|((v, r), x)| v * r * x * x)
            .sum()
    }

    fn evaluate(&self, u: &[f64]) -> QuotientValue {
        let numerator = self.coeff * self.dirichlet(u) + self.potential(u);
        let critical_mass: f64 = self.vols.iter().zip(u).map(|(v, x)| v * x.powf(self.q)).sum();
        QuotientValue {
            numerator,
            critical_mass,
            value: numerator / critical_mass.powf(2.0 / self.q),
        }
    }

    /// `∂Q/∂(ln u_i)`.
    fn log_gradient(&self, u: &[f64]) -> (QuotientValue, Vec<f64>) {
        let qv = self.evaluate(u);
        let m = u.len();
        let den = qv.critical_mass.powf(2.0 / self.q);
        let den_scale = 2.0 * qv.critical_mass.powf(2.0 / self.q - 1.0);
        let mut grad = vec![0.0; m];
        for (i, g) in grad.iter_mut().enumerate() {
            let mut dn = 2.0 * self.vols[i] * self.curvature[i] * u[i];
            if i > 0 {
                dn += 2.0 * self.coeff * self.shell * self.stiffness[i - 1] * (u[i] - u[i - 1]);
            }
            if i + 1 < m {
                dn -= 2.0 * self.coeff * self.shell * self.stiffness[i] * (u[i + 1] - u[i]);
            }
            let dd = den_scale * self.vols[i] * u[i].powf(self.q - 1.0);
            *g = u[i] * (dn / den - qv.numerator * dd / (den * den));
        }
        (qv, grad)
    }

    /// Tridiagonal energy preconditioner `(2/den)·U(cK + νM)U` in log coordinates, as
    /// `(sub/sup, diag)`.
    fn preconditioner(&self, u: &[f64], qv: &QuotientValue) -> (Vec<f64>, Vec<f64>) {
        let m = u.len();
        let den = qv.critical_mass.powf(2.0 / self.q);
        let l2: f64 = self.vols.iter().zip(u).map(|(v, x)| v * x * x).sum();
        let nu = (qv.numerator / l2).abs().max(1e-12);
        let s = 2.0 / den;
        let ck = self.coeff * self.shell;
        let mut diag: Vec<f64> = (0..m).map(|i| s * nu * self.vols[i] * u[i] * u[i]).collect();
        let mut off = vec![0.0; m - 1];
        for e in 0..m - 1 {
            let k = s * ck * self.stiffness[e];
            diag[e] += k * u[e] * u[e];
            diag[e + 1] += k * u[e + 1] * u[e + 1];
            off[e] = -k * u[e] * u[e + 1];
        }
        (off, diag)
    }

    /// First moment `∫ x₀ u^{2n/(n−2)} dv_g` and its gradient in `ln u`.
    fn moment(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let terms: Vec<f64> = self
            .vols
            .iter()
            .zip(&self.axis)
            .zip(u)
            .map(|((v, x), w)| v * x * w.powf(self.q))
            .collect();
        let grad = terms.iter().map(|t| self.q * t).collect();
        (terms.iter().sum(), grad)
    }

    /// Moves `v` along `dir` until the first moment vanishes (bracketed secant).
    fn balance(&self, v: &mut [f64], dir: &[f64]) -> bool {
        let eval = |beta: f64| -> f64 {
            let u: Vec<f64> = v.iter().zip(dir).map(|(x, d)| (x + beta * d).exp()).collect();
            let mass: f64 = self.vols.iter().zip(&u).map(|(a, w)| a * w.powf(self.q)).sum();
            self.moment(&u).0 / mass
        };
        let f0 = eval(0.0);
        if f0.abs() < 1e-13 {
            return true;
        }
        // d/dβ of the moment along `dir` is positive, so search the sign change
        let scale = dir.iter().fold(0.0f64, |a, d| a.max(d.abs())).max(1e-300);
        let mut step = 0.05 / scale;
        let (mut lo, mut hi) = if f0 > 0.0 { (-step, 0.0) } else { (0.0, step) };
        let (mut flo, mut fhi) = (eval(lo), eval(hi));
        let mut expand = 0;
        while flo * fhi > 0.0 {
            expand += 1;
            if expand > 60 {
                return false;
            }
            step *= 2.0;
            if f0 > 0.0 {
                hi = lo;
                fhi = flo;
                lo = -step;
                flo = eval(lo);
            } else {
                lo = hi;
                flo = fhi;
                hi = step;
                fhi = eval(hi);
            }
        }
        let mut beta = 0.0;
        for _ in 0..200 {
            // secant guarded by bisection
            let mut cand = hi - fhi * (hi - lo) / (fhi - flo);
            if !(cand > lo && cand < hi) {
                cand = 0.5 * (lo + hi);
            }
            let fc = eval(cand);
            beta = cand;
            if fc.abs() < 1e-13 || (hi - lo).abs() < 1e-15 * (1.0 + cand.abs()) {
                break;
            }
            if fc * flo > 0.0 {
                lo = cand;
                flo = fc;
            } else {
                hi = cand;
                fhi = fc;
            }
        }
        v.iter_mut().zip(dir).for_each(|(x, d)| *x += beta * d);
        true
    }
}

/// Thomas algorithm for `sub[i−1]·x[i−1] + diag[i]·x[i] + sup[i]·x[i+1] = rhs[i]`.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = if m > 1 { sup[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let denom = diag[i] - sub[i - 1] * c[i - 1];
        if i + 1 < m {
            c[i] = sup[i] / denom;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

fn positive_trial(g: &ConformalMetric, u: &ScalarField) -> Result<()> {
    g.check_aligned(u)?;
    if u.min() <= 0.0 {
        return Err(LabError::InvalidTrial(format!(
            "trial function must be positive, min = {}",
            u.min()
        )));
    }
    Ok(())
}

/// `[4(n−1)/(n−2)∫|∇u|² + ∫R u²] / (∫u^{2n/(n−2)})^{(n−2)/n}`.
pub fn yamabe_quotient(g: &ConformalMetric, u: &ScalarField) -> Result<f64> {
    positive_trial(g, u)?;
    let kernel = QuotientKernel::new(g, scalar_curvature(g)?)?;
    Ok(kernel.evaluate(u.values()).value)
}

/// Gradient of the Yamabe quotient with respect to `ln u` at each sample.
pub fn quotient_gradient(g: &ConformalMetric, u: &ScalarField) -> Result<Vec<f64>> {
    positive_trial(g, u)?;
    let kernel = QuotientKernel::new(g, scalar_curvature(g)?)?;
    Ok(kernel.log_gradient(u.values()).1)
}

/// Smooth random positive field `exp(Σ_{k ≤ k_max} a_k cos kθ)`, `a_k ~ U(−amplitude, amplitude)`.
pub fn random_log_fourier(grid: &RadialGrid, seed: u64, k_max: usize, amplitude: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..=k_max)
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect();
    ScalarField::new(grid.sample(|t| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * (k as f64 * t).cos())
            .sum::<f64>()
            .exp()
    }))
    .expect("finite by construction")
}

/// Minimises the Yamabe quotient over positive trial functions.
///
/// Descent runs on `ln u` with a tridiagonal energy preconditioner. Iterates are kept
/// balanced, `∫ x₀ u^{2n/(n−2)} dv_g = 0`, by projecting the direction onto the constraint
/// tangent and correcting along the preconditioned constraint gradient; every conformal
/// orbit of the round class contains a balanced function, and balancing stops trial
/// functions from collapsing onto a pole cell. After every step `u` is rescaled to unit
/// `L^{2n/(n−2)}` norm. The returned value is the best quotient seen and only an upper
/// bound for the infimum.
pub fn estimate_yamabe(g: &ConformalMetric, opts: &YamabeOptions) -> Result<YamabeEstimate> {
    let kernel = QuotientKernel::new(g, scalar_curvature(g)?)?;
    let m = g.backend().len();
    let mut v: Vec<f64> = match &opts.start {
        Some(u) => {
            positive_trial(g, u)?;
            u.values().iter().map(|x| x.ln()).collect()
        }
        None => vec![0.0; m],
    };
    let normalize = |v: &mut Vec<f64>| {
        let u: Vec<f64> = v.iter().map(|x| x.exp()).collect();
        let mass = kernel.evaluate(&u).critical_mass;
        let shift = mass.ln() / kernel.q;
        v.iter_mut().for_each(|x| *x -= shift);
    };
    let exp = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x.exp()).collect() };

    // project the start onto the balanced set
    {
        let u = exp(&v);
        let qv = kernel.evaluate(&u);
        let (off, diag) = kernel.preconditioner(&u, &qv);
        let z = solve_tridiagonal(&off, &diag, &off, &kernel.moment(&u).1);
        if !kernel.balance(&mut v, &z) {
            return Err(LabError::Degenerate("cannot balance the starting trial function".into()));
        }
    }
    normalize(&mut v);

    let StepRule::Backtracking { initial, max } = opts.step_rule;
    let mut step = initial;
    let mut u = exp(&v);
    let (mut current, mut grad) = kernel.log_gradient(&u);
    let mut history = vec![current.value];
    let mut stall = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let (off, diag) = kernel.preconditioner(&u, &current);
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut dir = solve_tridiagonal(&off, &diag, &off, &neg);
        let cgrad = kernel.moment(&u).1;
        let z = solve_tridiagonal(&off, &diag, &off, &cgrad);
        let cz: f64 = cgrad.iter().zip(&z).map(|(a, b)| a * b).sum();
        if cz > 0.0 {
            let cd: f64 = cgrad.iter().zip(&dir).map(|(a, b)| a * b).sum();
            dir.iter_mut().zip(&z).for_each(|(d, zz)| *d -= cd / cz * zz);
        }
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if !(slope < 0.0) {
            converged = true;
            break;
        }
        let mut accepted = None;
        let mut trial = step;
        for _ in 0..60 {
            let mut cand: Vec<f64> = v.iter().zip(&dir).map(|(x, d)| x + trial * d).collect();
            if kernel.balance(&mut cand, &z) {
                normalize(&mut cand);
                let cu = exp(&cand);
                let value = kernel.evaluate(&cu).value;
                if value.is_finite() && value < current.value {
                    accepted = Some((cand, cu));
                    break;
                }
            }
            trial *= 0.5;
        }
        let Some((cand, cu)) = accepted else {
            // no descent at any resolvable step: numerically stationary
            converged = true;
            break;
        };
        step = (2.0 * trial).min(max);
        v = cand;
        u = cu;
        let previous = current.value;
        (current, grad) = kernel.log_gradient(&u);
        history.push(current.value);
        if ((previous - current.value) / current.value).abs() < opts.tol {
            stall += 1;
            if stall >= STALL_WINDOW {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
    }
    Ok(YamabeEstimate {
        value: current.value,
        minimizer: ScalarField::new(u)?,
        iterations,
        converged,
        history,
    })
}

/// `n(n−1) w_n^{2/n}`, the Yamabe constant of the round sphere.
pub fn sphere_sobolev_constant(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(LabError::Domain(format!("sphere_sobolev_constant: n = {n}, need n >= 3")));
    }
    let nf = n as f64;
    Ok(nf * (nf - 1.0) * sphere_volume(n as i64)?.powf(2.0 / nf))
}

fn sobolev_report(
    name: &str,
    g: &ConformalMetric,
    u: &ScalarField,
    y: f64,
    curvature: ScalarField,
) -> Result<InequalityReport> {
    positive_trial(g, u)?;
    if !(y > 0.0) {
        return Err(LabError::Precondition(format!("Y must be positive, got {y}")));
    }
    let kernel = QuotientKernel::new(g, curvature)?;
    let qv = kernel.evaluate(u.values());
    let lhs = qv.critical_mass.powf(2.0 / kernel.q);
    let rhs = qv.numerator / y;
    Ok(InequalityReport::new(name, lhs, rhs)
        .with_input("n", kernel.n)
        .with_input("Y", y)
        .with_input("quotient", qv.value)
        .with_context(g.radial_grid().map(|gr| gr.m()), None))
}

/// Yamabe-Sobolev inequality
/// `(∫u^{2n/(n−2)})^{(n−2)/n} ≤ Y⁻¹[4(n−1)/(n−2)∫|∇u|² + ∫R u²]`.
pub fn check_sobolev(g: &ConformalMetric, u: &ScalarField, y: f64) -> Result<InequalityReport> {
    sobolev_report("yamabe_sobolev", g, u, y, scalar_curvature(g)?)
}

/// Sobolev inequality for manifolds conformally immersed in the round sphere: the sharp
/// sphere constant with `R` replaced by `R₊`.
pub fn check_immersion_sobolev(g: &ConformalMetric, u: &ScalarField) -> Result<InequalityReport> {
    let y = sphere_sobolev_constant(g.n())?;
    sobolev_report(
        "immersion_sobolev",
        g,
        u,
        y,
        scalar_curvature(g)?.positive_part(),
    )
}

/// Normalised trial function, `∫u²dv = 1`, and its energy `∫(4(n−1)/(n−2)|∇u|² + R u²)dv`.
fn normalized_energy(g: &ConformalMetric, u: &ScalarField) -> Result<(Vec<f64>, f64, QuotientKernel)> {
    g.check_aligned(u)?;
    if u.min() < 0.0 {
        return Err(LabError::InvalidTrial("trial function must be non-negative".into()));
    }
    let kernel = QuotientKernel::new(g, scalar_curvature(g)?)?;
    let l2: f64 = kernel.vols.iter().zip(u.values()).map(|(v, x)| v * x * x).sum();
    if !(l2 > 0.0) {
        return Err(LabError::InvalidTrial("trial function vanishes identically".into()));
    }
    let s = l2.sqrt();
    let w: Vec<f64> = u.values().iter().map(|x| x / s).collect();
    let energy = kernel.coeff * kernel.dirichlet(&w) + kernel.potential(&w);
    Ok((w, energy, kernel))
}

/// The `τ` minimising the right side of the logarithmic inequality, `n / (2·energy)`.
pub fn optimal_tau(g: &ConformalMetric, u: &ScalarField) -> Result<f64> {
    let (_, energy, _) = normalized_energy(g, u)?;
    Ok(g.n() as f64 / (2.0 * energy))
}

/// Logarithmic Yamabe-Sobolev inequality
/// `(n/2)ln(2eY/n) ≤ τ∫(4(n−1)/(n−2)|∇u|² + Ru²) − ∫u² ln u² − (n/2)ln τ` for `∫u² = 1`.
///
/// `u` is renormalised first; `0·ln 0 = 0`. A metric with `R ≤ 0` somewhere still gets a
/// report, marked outside the hypothesis.
pub fn check_log_sobolev(
    g: &ConformalMetric,
    u: &ScalarField,
    tau: f64,
    y: f64,
) -> Result<InequalityReport> {
    if !(tau > 0.0) || !(y > 0.0) {
        return Err(LabError::Precondition(format!(
            "need tau > 0 and Y > 0, got tau = {tau}, Y = {y}"
        )));
    }
    let (w, energy, kernel) = normalized_energy(g, u)?;
    let entropy: f64 = kernel
        .vols
        .iter()
        .zip(&w)
        .map(|(v, x)| {
            let p = x * x;
            if p > 0.0 {
                v * p * p.ln()
            } else {
                0.0
            }
        })
        .sum();
    let n = kernel.n as f64;
    let lhs = 0.5 * n * (2.0 * std::f64::consts::E * y / n).ln();
    let rhs = tau * energy - entropy - 0.5 * n * tau.ln();
    let positive = kernel.curvature.iter().all(|&r| r > 0.0);
    let mut report = InequalityReport::new("log_sobolev", lhs, rhs)
        .with_input("n", kernel.n)
        .with_input("Y", y)
        .with_input("tau", tau)
        .with_input("energy", energy)
        .with_input("entropy", entropy)
        .with_context(g.radial_grid().map(|gr| gr.m()), None);
    if !positive {
        report.within_hypothesis = false;
        report = report.note("scalar curvature is not positive everywhere");
    }
    Ok(report)
}
