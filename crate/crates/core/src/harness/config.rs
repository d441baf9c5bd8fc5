use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{LabError, Result};

/// Smallest admissible value of `φ` for the Fourier families.
pub const MIN_PHI: f64 = 0.2;

/// Named conformal factor families on `Sⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Family {
    /// `r² g₀`.
    Round { r: f64 },
    /// `φ = 1 + amplitude·cos(mode·θ)`.
    RadialPerturbation { amplitude: f64, mode: usize },
    /// Length factor `ε/√(ε² + sin²θ)`: a capsule whose cross-sections have radius below `ε`.
    ThinNeck { neck_width: f64 },
    /// `φ = 1 + Σ_{k ≤ k_max} a_k cos kθ`, `a_k ~ U(−amplitude/k², amplitude/k²)` from the run seed.
    RandomFourier { k_max: usize, amplitude: f64 },
    /// Two-column `θ φ(θ)` table.
    Table { path: PathBuf },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Round { .. } => "round",
            Family::RadialPerturbation { .. } => "radial_perturbation",
            Family::ThinNeck { .. } => "thin_neck",
            Family::RandomFourier { .. } => "random_fourier",
            Family::Table { .. } => "table",
        }
    }

    /// Builds a family from its name and `key=value` parameters; missing keys take defaults.
    pub fn from_params(name: &str, params: &BTreeMap<String, String>) -> Result<Self> {
        let allowed: &[&str] = match name {
            "round" => &["r"],
            "radial_perturbation" => &["amplitude", "mode"],
            "thin_neck" => &["neck_width"],
            "random_fourier" => &["k_max", "amplitude"],
            "table" => &["path"],
            other => return Err(LabError::Config(format!("unknown family `{other}`"))),
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(LabError::Config(format!("family `{name}` has no parameter `{k}`")));
        }
        let family = match name {
            "round" => Family::Round {
                r: param(params, "r", 1.0)?,
            },
            "radial_perturbation" => Family::RadialPerturbation {
                amplitude: param(params, "amplitude", 0.1)?,
                mode: param(params, "mode", 1)?,
            },
            "thin_neck" => Family::ThinNeck {
                neck_width: param(params, "neck_width", 0.2)?,
            },
            "random_fourier" => Family::RandomFourier {
                k_max: param(params, "k_max", 4)?,
                amplitude: param(params, "amplitude", 0.05)?,
            },
            _ => Family::Table {
                path: params
                    .get("path")
                    .map(PathBuf::from)
                    .ok_or_else(|| LabError::Config("family `table` needs `path`".into()))?,
            },
        };
        family.validate()?;
        Ok(family)
    }

    /// Parses `name` or `name:key=value,key=value`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut params = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("expected key=value, got `{item}`")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        Family::from_params(name.trim(), &params)
    }

    /// Static admissibility checks that need no computation.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Round { r } if !(r > 0.0 && r.is_finite()) => {
                Err(LabError::Config(format!("round: r must be positive, got {r}")))
            }
            Family::RadialPerturbation { amplitude, mode } => {
                if mode == 0 {
                    return Err(LabError::Config("radial_perturbation: mode must be >= 1".into()));
                }
                if !(amplitude.abs() <= 1.0 - MIN_PHI) {
                    return Err(LabError::Config(format!(
                        "radial_perturbation: |amplitude| = {} would push min φ below {MIN_PHI}",
                        amplitude.abs()
                    )));
                }
                Ok(())
            }
            Family::ThinNeck { neck_width } if !(neck_width > 0.0 && neck_width.is_finite()) => Err(
                LabError::Config(format!("thin_neck: neck_width must be positive, got {neck_width}")),
            ),
            Family::RandomFourier { k_max, amplitude } => {
                if k_max == 0 {
                    return Err(LabError::Config("random_fourier: k_max must be >= 1".into()));
                }
                let reach: f64 = (1..=k_max).map(|k| amplitude / (k * k) as f64).sum();
                if !(amplitude >= 0.0 && reach <= 1.0 - MIN_PHI) {
                    return Err(LabError::Config(format!(
                        "random_fourier: Σ amplitude/k² = {reach} would allow min φ below {MIN_PHI}",
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn param<T: FromStr>(params: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| LabError::Config(format!("cannot parse `{key}` = `{v}`"))),
    }
}

/// Checks a run can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Curvature,
    EinsteinHilbert,
    Yamabe,
    Sobolev,
    ImmersionSobolev,
    LogSobolev,
    Distance,
    Diameter,
    BallProfile,
    MaximalFunction,
    VolumeRatio,
    Cutoff,
    Functional,
    Alternative,
    Constants,
    RadiusSelector,
    Cover,
    Certify,
    CertifyImmersion,
    CollapsedBall,
}

impl Check {
    pub const ALL: [Check; 20] = [
        Check::Curvature,
        Check::EinsteinHilbert,
        Check::Yamabe,
        Check::Sobolev,
        Check::ImmersionSobolev,
        Check::LogSobolev,
        Check::Distance,
        Check::Diameter,
        Check::BallProfile,
        Check::MaximalFunction,
        Check::VolumeRatio,
        Check::Cutoff,
        Check::Functional,
        Check::Alternative,
        Check::Constants,
        Check::RadiusSelector,
        Check::Cover,
        Check::Certify,
        Check::CertifyImmersion,
        Check::CollapsedBall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Curvature => "curvature",
            Check::EinsteinHilbert => "einstein_hilbert",
            Check::Yamabe => "yamabe",
            Check::Sobolev => "sobolev",
            Check::ImmersionSobolev => "immersion_sobolev",
            Check::LogSobolev => "log_sobolev",
            Check::Distance => "distance",
            Check::Diameter => "diameter",
            Check::BallProfile => "ball_profile",
            Check::MaximalFunction => "maximal_function",
            Check::VolumeRatio => "volume_ratio",
            Check::Cutoff => "cutoff",
            Check::Functional => "functional",
            Check::Alternative => "alternative",
            Check::Constants => "constants",
            Check::RadiusSelector => "radius_selector",
            Check::Cover => "cover",
            Check::Certify => "certify",
            Check::CertifyImmersion => "certify_immersion",
            Check::CollapsedBall => "collapsed_ball",
        }
    }

    /// Library operations a check calls.
    pub fn operations(self) -> &'static [&'static str] {
        match self {
            Check::Curvature => &["sphere_volume", "laplacian", "scalar_curvature", "integrate"],
            Check::EinsteinHilbert => &["einstein_hilbert"],
            Check::Yamabe => &["estimate_yamabe", "yamabe_quotient", "sphere_sobolev_constant"],
            Check::Sobolev => &["check_sobolev"],
            Check::ImmersionSobolev => &["check_immersion_sobolev", "sphere_sobolev_constant"],
            Check::LogSobolev => &["check_log_sobolev"],
            Check::Distance => &["distance"],
            Check::Diameter => &["diameter"],
            Check::BallProfile => &["ball_profile"],
            Check::MaximalFunction => &["maximal_function"],
            Check::VolumeRatio => &["volume_ratio"],
            Check::Cutoff => &["build_cutoff"],
            Check::Functional => &["check_functional_inequality"],
            Check::Alternative => &["check_alternative", "delta_constant"],
            Check::Constants => &["delta_constant", "main_constant"],
            Check::RadiusSelector => &["radius_selector", "delta_constant"],
            Check::Cover => &["vitali_cover", "diameter"],
            Check::Certify => &["certify_diameter", "main_constant"],
            Check::CertifyImmersion => &["certify_diameter_immersion"],
            Check::CollapsedBall => &["collapsed_ball_estimate"],
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().replace('-', "_");
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| LabError::Config(format!("unknown check `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(LabError::Config(format!("unknown format `{other}`"))),
        }
    }
}

/// One experiment: a metric, the checks to run on it and where the report goes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub seed: u64,
    pub grid_m: usize,
    pub family: Family,
    pub checks: Vec<Check>,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// Diagnostic `δ′` for the collapsed-ball estimate.
    pub delta_override: Option<f64>,
    /// Record wall-clock time per check; reports then stop being byte-reproducible.
    pub timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 3,
            seed: 0,
            grid_m: 256,
            family: Family::Round { r: 1.0 },
            checks: Check::ALL.to_vec(),
            output: None,
            format: OutputFormat::Json,
            delta_override: None,
            timings: false,
        }
    }
}

const FAMILY_KEYS: [&str; 6] = ["r", "amplitude", "mode", "neck_width", "k_max", "path"];

impl ExperimentConfig {
    /// Parses flat `key = value` text; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut family = "round".to_string();
        let mut params = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                LabError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| LabError::Config(format!("line {}: bad {what} `{value}`", lineno + 1));
            match key {
                "n" => cfg.n = value.parse().map_err(|_| bad("n"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "grid_m" => cfg.grid_m = value.parse().map_err(|_| bad("grid_m"))?,
                "family" => family = value.to_string(),
                "checks" => cfg.checks = parse_checks(value)?,
                "output" => cfg.output = Some(PathBuf::from(value)),
                "format" => cfg.format = value.parse()?,
                "delta_override" => {
                    cfg.delta_override = Some(value.parse().map_err(|_| bad("delta_override"))?)
                }
                "timings" => cfg.timings = value.parse().map_err(|_| bad("timings"))?,
                k if FAMILY_KEYS.contains(&k) => {
                    params.insert(k.to_string(), value.to_string());
                }
                other => {
                    return Err(LabError::Config(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.family = Family::from_params(&family, &params)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(LabError::Config(format!("n = {}, need n >= 3", self.n)));
        }
        if self.checks.is_empty() {
            return Err(LabError::Config("no checks requested".into()));
        }
        let mut seen = self.checks.clone();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(LabError::Config("a check is requested twice".into()));
        }
        if let Some(d) = self.delta_override {
            if !(d > 0.0) {
                return Err(LabError::Config(format!("delta_override must be positive, got {d}")));
            }
        }
        self.family.validate()
    }
}

/// Comma-separated check names; `all` expands to every check.
pub fn parse_checks(s: &str) -> Result<Vec<Check>> {
    if s.trim() == "all" {
        return Ok(Check::ALL.to_vec());
    }
    s.split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(Check::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_config() {
        let cfg = ExperimentConfig::parse(
            "# thin neck run\nn = 4\nseed=9\nfamily = thin_neck\nneck_width = 0.1 # narrow\nchecks = yamabe, diameter\nformat = csv\n",
        )
        .unwrap();
        assert_eq!(cfg.n, 4);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.family, Family::ThinNeck { neck_width: 0.1 });
        assert_eq!(cfg.checks, vec![Check::Yamabe, Check::Diameter]);
        assert_eq!(cfg.format, OutputFormat::Csv);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("checks = yamabe, bogus").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("family = random_fourier\nk_max = 4\namplitude = 0.6").is_err());
        assert!(ExperimentConfig::parse("family = round\nr = -1").is_err());
        assert!(ExperimentConfig::parse("checks = yamabe, yamabe").is_err());
        assert!(Family::parse("round:mode=2").is_err());
    }

    #[test]
    fn family_specs() {
        assert_eq!(Family::parse("round:r=2").unwrap(), Family::Round { r: 2.0 });
        assert_eq!(
            Family::parse("radial_perturbation:amplitude=0.3,mode=2").unwrap(),
            Family::RadialPerturbation { amplitude: 0.3, mode: 2 }
        );
        assert_eq!(Check::from_str("certify-immersion").unwrap(), Check::CertifyImmersion);
    }
}
