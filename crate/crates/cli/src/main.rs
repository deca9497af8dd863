use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use glitchguard::commands::{self, log_config};
use glitchguard::error::EXIT_CONFIG;
use glitchguard::{CliError, CliResult, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "glitchguard",
    version,
    about = "Gameplay bug detection from regularity scores"
)]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output file or directory of the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render the synthetic corpus.
    Gen,
    /// Train on the train split of a manifest.
    Train { manifest: PathBuf },
    /// Write one regularity CSV per test video.
    Score { checkpoint: PathBuf, manifest: PathBuf },
    /// Plot a regularity CSV as SVG.
    Plot {
        curve: PathBuf,
        /// Use this category's threshold.
        #[arg(long)]
        category: Option<String>,
    },
    /// Cluster the curves of the buggy videos in a manifest.
    Cluster {
        curves: PathBuf,
        manifest: PathBuf,
        exemplars: PathBuf,
    },
    /// Summarize a cluster report.
    Eval {
        report: PathBuf,
        /// Curves directory, for the detection summary.
        #[arg(long, requires = "manifest")]
        curves: Option<PathBuf>,
        /// Manifest with ground truth, for the detection summary.
        #[arg(long, requires = "curves")]
        manifest: Option<PathBuf>,
    },
    /// Run every stage end to end.
    Demo,
    /// Print the resolved config.
    Config,
}

fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::missing(path));
            }
            RunConfig::load(path)?
        }
        None => RunConfig::default(),
    };
    for assignment in &cli.set {
        cfg.set_assignment(assignment)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_or(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = resolve_config(cli)?;
    if let Command::Config = cli.command {
        print!("{}", cfg.to_text());
        println!("# sha256 = {}", cfg.digest());
        return Ok(());
    }
    log_config(&cfg);
    match &cli.command {
        Command::Gen => {
            commands::cmd_gen(&cfg, &out_or(cli, "corpus"))?;
        }
        Command::Train { manifest } => {
            commands::cmd_train(&cfg, manifest, &out_or(cli, "model.ckpt"))?;
        }
        Command::Score { checkpoint, manifest } => {
            commands::cmd_score(&cfg, checkpoint, manifest, &out_or(cli, "curves"))?;
        }
        Command::Plot { curve, category } => {
            let out = cli.out.clone().unwrap_or_else(|| curve.with_extension("svg"));
            commands::cmd_plot(&cfg, curve, &out, category.as_deref())?;
        }
        Command::Cluster {
            curves,
            manifest,
            exemplars,
        } => {
            let report = commands::cmd_cluster(&cfg, curves, manifest, exemplars, &out_or(cli, "cluster_report.csv"))?;
            println!("homogeneity = {:.6}", report.homogeneity);
        }
        Command::Eval {
            report,
            curves,
            manifest,
        } => {
            let out = cli.out.clone().unwrap_or_else(|| report.with_extension("eval.txt"));
            let extra = curves.as_deref().zip(manifest.as_deref());
            let summary = commands::cmd_eval(&cfg, report, extra, &out)?;
            print!("{}", summary.to_text());
        }
        Command::Demo => {
            let workdir = out_or(cli, "demo_out");
            let summary = commands::cmd_demo(&cfg, &workdir)?;
            print!("{}", summary.eval.to_text());
            println!("outputs in {}", Path::new(&workdir).display());
        }
        Command::Config => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("{}", CliError::new(EXIT_CONFIG, first));
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code)
        }
    }
}
