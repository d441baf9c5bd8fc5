use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use yamabe_lab::harness::{
    fuzz_with, run, sweep_with, Check, ExperimentConfig, Family, FuzzOptions, OutputFormat,
};
use yamabe_lab::Result;

#[derive(Parser)]
#[command(name = "yamabe-lab", version, about = "Yamabe constants, Sobolev-type inequalities and curvature diameter bounds on conformal spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Dimension of the sphere.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Radial grid points.
    #[arg(long = "grid-m", default_value_t = 256)]
    grid_m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Metric family, `name` or `name:key=value,...`.
    #[arg(long, default_value = "round")]
    family: String,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `json` or `csv`.
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run a key = value config file.
    Run {
        config: PathBuf,
    },
    /// Estimate the Yamabe constant.
    Yamabe(Common),
    /// Yamabe-Sobolev and immersion Sobolev inequalities.
    CheckSobolev(Common),
    /// Logarithmic Yamabe-Sobolev inequality.
    CheckLogsobolev(Common),
    /// Localized logarithmic inequality on balls.
    CheckFunctional(Common),
    /// Maximal function / volume ratio alternative.
    CheckAlternative(Common),
    /// Covering along a diameter-realizing shortest path.
    Cover(Common),
    /// Measured diameter.
    Diameter(Common),
    /// Diameter certificate under positive scalar curvature.
    Certify(Common),
    /// Diameter certificate through the conformal immersion into the round sphere.
    CertifyImmersion(Common),
    /// Diameter against curvature integral on round spheres of several radii.
    SweepSphere {
        #[command(flatten)]
        common: Common,
        /// Comma-separated radii.
        #[arg(long, default_value = "1,2,4,8", value_delimiter = ',')]
        radii: Vec<f64>,
    },
    /// Randomized inequality suite.
    Fuzz {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

fn config(common: &Common, checks: &[Check]) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig {
        n: common.n,
        seed: common.seed,
        grid_m: common.grid_m,
        family: Family::parse(&common.family)?,
        checks: checks.to_vec(),
        output: common.out.clone(),
        format: common.format.parse()?,
        ..Default::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            // a closed pipe is not an error
            let _ = writeln!(std::io::stdout(), "{text}");
        }
    }
    Ok(())
}

fn execute(cfg: ExperimentConfig) -> Result<bool> {
    let report = run(&cfg)?;
    if cfg.output.is_none() {
        emit(&report.render(cfg.format)?, &None)?;
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: {}", c.check, c.error.clone().unwrap_or_else(|| c.notes.join("; ")));
    }
    Ok(report.all_pass)
}

fn dispatch(command: Command) -> Result<bool> {
    let single = |common: Common, checks: &[Check]| execute(config(&common, checks)?);
    match command {
        Command::Run { config } => execute(ExperimentConfig::load(&config)?),
        Command::Yamabe(c) => single(c, &[Check::Yamabe]),
        Command::CheckSobolev(c) => single(c, &[Check::Sobolev, Check::ImmersionSobolev]),
        Command::CheckLogsobolev(c) => single(c, &[Check::LogSobolev]),
        Command::CheckFunctional(c) => single(c, &[Check::Functional]),
        Command::CheckAlternative(c) => single(c, &[Check::Alternative]),
        Command::Cover(c) => single(c, &[Check::Cover]),
        Command::Diameter(c) => single(c, &[Check::Diameter]),
        Command::Certify(c) => single(c, &[Check::Certify]),
        Command::CertifyImmersion(c) => single(c, &[Check::CertifyImmersion]),
        Command::SweepSphere { common, radii } => {
            let table = sweep_with(&radii, common.n, common.grid_m)?;
            let text = match common.format.parse()? {
                OutputFormat::Csv => table.to_csv(),
                OutputFormat::Json => serde_json::to_string_pretty(&table)?,
            };
            emit(&text, &common.out)?;
            Ok(table.pass)
        }
        Command::Fuzz { common, trials } => {
            let opts = FuzzOptions {
                grid_m: common.grid_m,
                ..Default::default()
            };
            let report = fuzz_with(common.n, trials, common.seed, &opts)?;
            let text = match common.format.parse()? {
                OutputFormat::Csv => {
                    let mut s = String::from("inequality,evaluated,violations,out_of_hypothesis,min_slack,min_relative_slack\n");
                    for r in &report.summaries {
                        s.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            r.name, r.evaluated, r.violations, r.out_of_hypothesis, r.min_slack, r.min_relative_slack
                        ));
                    }
                    s
                }
                OutputFormat::Json => serde_json::to_string_pretty(&report)?,
            };
            emit(&text, &common.out)?;
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
