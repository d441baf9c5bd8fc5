use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::run::{build_metric, SLACK_TOL};
use super::Family;
use crate::analysis::{check_alternative_radii, check_functional_radii, Point};
use crate::error::{LabError, Result};
use crate::sphere::{scalar_curvature, ConformalMetric};
use crate::yamabe::{
    check_log_sobolev, check_sobolev, estimate_yamabe, optimal_tau, random_log_fourier,
    InequalityReport, YamabeOptions,
};

#[derive(Debug, Clone, Serialize)]
pub struct FuzzOptions {
    pub grid_m: usize,
    /// Fourier modes of the sampled conformal factors.
    pub k_max: usize,
    /// Coefficient bound; `0` reproduces the round sphere.
    pub amplitude: f64,
    /// Random trial functions per metric, for both Sobolev-type inequalities.
    pub trial_functions: usize,
    /// Ball centers per metric: both poles, then random points.
    pub centers: usize,
    /// Radii per center, log-spaced in `[0.1, π]`.
    pub radii: usize,
    /// Metric draws per trial before the trial is skipped.
    pub max_attempts: usize,
}

impl Default for FuzzOptions {
    fn default() -> Self {
        Self {
            grid_m: 128,
            k_max: 4,
            amplitude: 0.2,
            trial_functions: 5,
            centers: 5,
            radii: 10,
            max_attempts: 100,
        }
    }
}

/// Aggregate of one inequality over the whole suite.
#[derive(Debug, Clone, Serialize)]
pub struct InequalitySummary {
    pub name: String,
    pub evaluated: usize,
    pub violations: usize,
    pub out_of_hypothesis: usize,
    pub min_slack: f64,
    /// Minimum of `slack/|lhs|`.
    pub min_relative_slack: f64,
}

impl InequalitySummary {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            evaluated: 0,
            violations: 0,
            out_of_hypothesis: 0,
            min_slack: f64::INFINITY,
            min_relative_slack: f64::INFINITY,
        }
    }

    fn add(&mut self, slack: f64, lhs: f64, ok: bool, within: bool) {
        self.evaluated += 1;
        if !within {
            self.out_of_hypothesis += 1;
            return;
        }
        if !ok {
            self.violations += 1;
        }
        self.min_slack = self.min_slack.min(slack);
        if lhs != 0.0 {
            self.min_relative_slack = self.min_relative_slack.min(slack / lhs.abs());
        }
    }

    fn report(&mut self, r: &InequalityReport) {
        self.add(r.slack, r.lhs, r.holds(SLACK_TOL), r.within_hypothesis);
    }

    fn merge(&mut self, other: &Self) {
        self.evaluated += other.evaluated;
        self.violations += other.violations;
        self.out_of_hypothesis += other.out_of_hypothesis;
        self.min_slack = self.min_slack.min(other.min_slack);
        self.min_relative_slack = self.min_relative_slack.min(other.min_relative_slack);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub options: FuzzOptions,
    pub evaluated_trials: usize,
    /// Metric draws rejected for `min R ≤ 0`.
    pub resampled: usize,
    pub log: Vec<String>,
    pub summaries: Vec<InequalitySummary>,
    /// Smallest Yamabe estimate over the suite.
    pub min_yamabe_estimate: f64,
    pub pass: bool,
}

const NAMES: [&str; 4] = ["yamabe_sobolev", "log_sobolev", "localized_log_sobolev", "alternative"];

struct TrialOutcome {
    summaries: Vec<InequalitySummary>,
    resampled: usize,
    log: Vec<String>,
    yamabe: f64,
}

/// `fuzz_with` under the default options.
pub fn fuzz_inequalities(n: usize, trials: usize, seed: u64) -> Result<FuzzReport> {
    fuzz_with(n, trials, seed, &FuzzOptions::default())
}

/// Random positive-curvature radial metrics, each checked against the Sobolev, logarithmic
/// Sobolev, localized logarithmic and two-branch inequalities with its estimated Yamabe
/// constant. Trials run in parallel and aggregate in trial order.
pub fn fuzz_with(n: usize, trials: usize, seed: u64, opts: &FuzzOptions) -> Result<FuzzReport> {
    if trials == 0 {
        return Err(LabError::Precondition("fuzz needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..trials).map(|_| rng.random()).collect();
    let outcomes: Vec<TrialOutcome> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| trial(n, i, s, opts))
        .collect::<Result<_>>()?;
    let mut summaries: Vec<InequalitySummary> = NAMES.iter().map(|n| InequalitySummary::new(n)).collect();
    let mut log = Vec::new();
    let mut resampled = 0;
    let mut evaluated = 0;
    let mut min_y = f64::INFINITY;
    for o in &outcomes {
        resampled += o.resampled;
        log.extend(o.log.iter().cloned());
        if o.summaries.is_empty() {
            continue;
        }
        evaluated += 1;
        min_y = min_y.min(o.yamabe);
        for (acc, s) in summaries.iter_mut().zip(&o.summaries) {
            acc.merge(s);
        }
    }
    let pass = summaries.iter().all(|s| s.violations == 0);
    Ok(FuzzReport {
        n,
        trials,
        seed,
        options: opts.clone(),
        evaluated_trials: evaluated,
        resampled,
        log,
        summaries,
        min_yamabe_estimate: min_y,
        pass,
    })
}

fn sample_metric(n: usize, rng: &mut ChaCha8Rng, opts: &FuzzOptions) -> Result<Option<(ConformalMetric, usize)>> {
    let family = Family::RandomFourier {
        k_max: opts.k_max,
        amplitude: opts.amplitude,
    };
    for attempt in 0..opts.max_attempts {
        let g = match build_metric(&family, n, opts.grid_m, rng.random()) {
            Ok(g) => g,
            Err(LabError::InvalidMetric(_)) => continue,
            Err(e) => return Err(e),
        };
        if scalar_curvature(&g)?.min() > 0.0 {
            return Ok(Some((g, attempt)));
        }
    }
    Ok(None)
}

fn trial(n: usize, index: usize, seed: u64, opts: &FuzzOptions) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Some((g, resampled)) = sample_metric(n, &mut rng, opts)? else {
        return Ok(TrialOutcome {
            summaries: Vec::new(),
            resampled: opts.max_attempts,
            log: vec![format!(
                "trial {index}: no metric with min R > 0 in {} draws, skipped",
                opts.max_attempts
            )],
            yamabe: f64::NAN,
        });
    };
    let mut log = Vec::new();
    if resampled > 0 {
        log.push(format!("trial {index}: {resampled} draws rejected for min R <= 0"));
    }
    let y = estimate_yamabe(&g, &YamabeOptions::default())?.value;
    let grid = g.radial_grid().expect("radial");
    let mut sums: Vec<InequalitySummary> = NAMES.iter().map(|n| InequalitySummary::new(n)).collect();

    for _ in 0..opts.trial_functions {
        let amp = rng.random_range(0.2..1.5);
        let u = random_log_fourier(grid, rng.random(), 6, amp);
        sums[0].report(&check_sobolev(&g, &u, y)?);
        let tau = optimal_tau(&g, &u)? * rng.random_range(-1.0f64..1.0).exp();
        sums[1].report(&check_log_sobolev(&g, &u, tau, y)?);
    }

    let mut centers = vec![Point::north(), Point::south()];
    while centers.len() < opts.centers {
        centers.push(Point::slice(rng.random_range(0.2..PI - 0.2), 0.0));
    }
    centers.truncate(opts.centers);
    let radii: Vec<f64> = (0..opts.radii)
        .map(|k| {
            let t = if opts.radii > 1 { k as f64 / (opts.radii - 1) as f64 } else { 1.0 };
            0.1 * (PI / 0.1).powf(t)
        })
        .collect();
    for p in &centers {
        match check_functional_radii(&g, y, p, &radii) {
            Ok(reports) => reports.iter().for_each(|r| sums[2].report(r)),
            Err(LabError::Degenerate(msg)) => log.push(format!("trial {index}: {}: {msg}", p.label())),
            Err(e) => return Err(e),
        }
        for rep in check_alternative_radii(&g, y, p, &radii)? {
            let slack = (rep.maximal_log - rep.delta_log).max(rep.volume_ratio_log - rep.delta_log);
            sums[3].add(slack, rep.delta_log, rep.pass, rep.within_hypothesis);
        }
    }
    Ok(TrialOutcome {
        summaries: sums,
        resampled,
        log,
        yamabe: y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_repeats() {
        let opts = FuzzOptions {
            grid_m: 64,
            centers: 2,
            radii: 3,
            trial_functions: 2,
            ..Default::default()
        };
        let a = fuzz_with(3, 3, 11, &opts).unwrap();
        assert!(a.pass, "{:#?}", a.summaries);
        assert_eq!(a.evaluated_trials, 3);
        let b = fuzz_with(3, 3, 11, &opts).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(fuzz_with(3, 0, 11, &opts).is_err());
    }
}
