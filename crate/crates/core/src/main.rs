use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use safeopt::campaign::{geometry_report, run_campaign, sharpness_csv, smoke_config, CampaignConfig};
use safeopt::geometry::{NormTag, Polytope};
use safeopt::policy::{PolicyMode, ScheduleMode};
use safeopt::Result;

#[derive(Parser)]
#[command(name = "safeopt", version, about = "Safe linear bandit simulations and polytope sharpness tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Output directory for CSVs and reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; trial k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
    /// Optimism over the exact ellipsoids or their l1 outer approximation.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<PolicyMode>,
    /// `theory` or `override:N`.
    #[arg(long, value_parser = parse_schedule)]
    schedule: Option<ScheduleMode>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign from a config file.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Report K, diameter and maximum shrinkage of a polytope file.
    Geometry {
        /// Polytope in the plain-text matrix format.
        file: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 21)]
        points: usize,
    },
    /// Print the sharpness curve of a polytope file as CSV.
    SharpnessCurve {
        file: PathBuf,
        /// `1`, `2` or `inf`.
        #[arg(long, default_value = "2")]
        norm: String,
        #[arg(long, default_value_t = 21)]
        points: usize,
    },
    /// A tiny built-in campaign.
    Smoke {
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn parse_mode(s: &str) -> std::result::Result<PolicyMode, String> {
    s.parse().map_err(|e: safeopt::Error| e.to_string())
}

fn parse_schedule(s: &str) -> std::result::Result<ScheduleMode, String> {
    s.parse().map_err(|e: safeopt::Error| e.to_string())
}

fn apply(mut cfg: CampaignConfig, o: Overrides) -> CampaignConfig {
    if let Some(out) = o.out {
        cfg.out = Some(out);
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = o.mode {
        cfg.mode = mode;
    }
    if let Some(schedule) = o.schedule {
        cfg.schedule = schedule;
    }
    if let Some(trials) = o.trials {
        cfg.trials = trials;
    }
    if cfg.out.is_none() {
        cfg.out = Some(PathBuf::from("results"));
    }
    cfg
}

fn campaign(cfg: &CampaignConfig) -> Result<()> {
    let summary = run_campaign(cfg)?;
    for set in &summary.sets {
        println!(
            "{}: K = {:.4}, violations = {}, mean exploitation regret = {:.6}, mean total regret = {:.6}",
            set.name,
            set.geometry.condition_constant,
            set.violations(),
            set.mean_final_exploitation_regret(),
            set.mean_total_regret()
        );
    }
    if let Some(out) = &cfg.out {
        println!("outputs written to {}", out.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = match config {
                Some(path) => CampaignConfig::read_file(path)?,
                None => CampaignConfig::default(),
            };
            campaign(&apply(cfg, overrides))
        }
        Command::Smoke { overrides } => campaign(&apply(smoke_config(), overrides)),
        Command::Geometry { file, out, points } => {
            let poly = Polytope::read_file(&file)?;
            let name = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "polytope".into());
            let report = geometry_report(&poly, &name, points, &out)?;
            print!("{}", report.to_text());
            Ok(())
        }
        Command::SharpnessCurve { file, norm, points } => {
            let norm = NormTag::parse(&norm)
                .ok_or_else(|| safeopt::Error::Config(format!("unknown norm '{norm}'")))?;
            let poly = Polytope::read_file(&file)?;
            print!("{}", sharpness_csv(&poly.sharpness_curve(norm, points)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
