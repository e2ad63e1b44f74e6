use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use multiout_cli::{parse_config, run, CliError, Command, DesignKind};

/// Multi-outcome trial design search and operating characteristics.
#[derive(Debug, Parser)]
#[command(name = "multiout", version)]
struct Cli {
    #[command(subcommand)]
    command: Top,

    /// Config file in `key = value` form.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key; repeatable.
    #[arg(short = 'p', long = "param", value_name = "KEY=VALUE", global = true)]
    params: Vec<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    nsims: Option<usize>,

    /// Worker threads for simulation; defaults to all cores.
    #[arg(long, global = true, env = "MULTIOUT_THREADS")]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Top {
    /// Find the smallest design meeting the error-rate targets.
    Design {
        #[command(subcommand)]
        kind: Kind,
    },
    /// Operating-characteristic studies.
    Oc {
        #[command(subcommand)]
        study: Study,
    },
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Kind {
    /// Group-sequential m-of-K design.
    Gs,
    /// Group-sequential design on the summed outcome statistic.
    Composite,
    /// Two-stage drop-the-loser design.
    Dtl,
    /// Group-sequential design with a single stage.
    SingleStage,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Study {
    /// Rejection probability, ESS and ENM of two designs over a grid of effects.
    Grid,
    /// ESS and ENM ratios of two designs across shared correlations.
    Sweep,
    /// Drop-the-loser designs across CP thresholds.
    Sensitivity,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut overrides = Vec::new();
    for p in &cli.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| CliError::Config {
                field: "--param".into(),
                reason: format!("expected KEY=VALUE, got `{p}`"),
            })?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(nsims) = cli.nsims {
        overrides.push(("nsims".into(), nsims.to_string()));
    }
    if let Some(out) = &cli.out {
        overrides.push(("out".into(), out.display().to_string()));
    }
    let command = match cli.command {
        Top::Design { kind } => {
            let kind = match kind {
                Kind::Gs => DesignKind::Gs,
                Kind::Composite => DesignKind::Composite,
                Kind::Dtl => DesignKind::Dtl,
                Kind::SingleStage => DesignKind::SingleStage,
            };
            overrides.push(("design".into(), kind.to_string()));
            Command::Design
        }
        Top::Oc { study } => match study {
            Study::Grid => Command::Grid,
            Study::Sweep => Command::Sweep,
            Study::Sensitivity => Command::Sensitivity,
        },
    };
    let cfg = parse_config(cli.config.as_deref(), &overrides)?;

    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config {
                field: "threads".into(),
                reason: "must be at least 1".into(),
            });
        }
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }

    let report = run(command, &cfg)?;
    print!("{}", report.summary.render());
    for f in &report.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
