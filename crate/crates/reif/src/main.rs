use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reif::commands::{self, AnalyzeOptions};
use reif::{selftest, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "reif", version, about = "Multiscale flatness analysis and rectifiability certificates for point clouds")]
struct Cli {
    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Point cloud (CSV or JSON)
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Fixture spec: a JSON file or an inline JSON object
    #[arg(long, global = true)]
    fixture: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Maximum number of slab generations in the cover
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Target dimension
    #[arg(long, short, global = true)]
    k: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-ball classification, beta numbers, radius field, field and manifold dumps
    Analyze {
        /// Analyse every n-th sample
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Skip the beta-number table
        #[arg(long)]
        no_beta: bool,
    },
    /// Recursive cover and rectifiability certificate
    Cover,
    /// beta_infty at one radius
    Beta {
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Comass of the calibration form and its minimum on the manifold
    CalibrateCheck,
    /// Write a fixture as a cloud CSV
    Generate,
    /// Built-in property checks
    Selftest,
}

fn build_config(cli: &Cli) -> reif::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &cli.input {
        cfg.input = Some(p.clone());
        cfg.fixture = None;
    }
    if let Some(f) = &cli.fixture {
        let text =
            if f.trim_start().starts_with('{') { f.clone() } else { std::fs::read_to_string(f).map_err(|e| CliError::Config(format!("fixture {f}: {e}")))? };
        cfg.fixture = Some(serde_json::from_str(&text).map_err(|e| CliError::Config(format!("fixture: {e}")))?);
        cfg.input = None;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(d) = cli.depth {
        cfg.depth = d;
    }
    if cli.k.is_some() {
        cfg.k = cli.k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> reif::Result<()> {
    let cfg = build_config(cli)?;
    reif::exec::with_threads(cfg.threads, || match &cli.command {
        Command::Analyze { stride, no_beta } => commands::analyze(&cfg, &AnalyzeOptions { stride: *stride, beta: !no_beta }),
        Command::Cover => commands::cover(&cfg),
        Command::Beta { radius, stride } => commands::beta(&cfg, *radius, *stride),
        Command::CalibrateCheck => commands::calibrate_check(&cfg),
        Command::Generate => commands::generate(&cfg),
        Command::Selftest => {
            let checks = selftest::run(&cfg);
            print!("{}", selftest::render(&checks));
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed == 0 {
                Ok(())
            } else {
                Err(CliError::Failed(format!("{failed} self checks failed")))
            }
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REIF_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
