use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hcp_core::acceptance::{run_all, Scale};
use hcp_core::commands::{analytic, limits, prepare_output_dir, reproduce_figb, simulate, write_result, CommandResult};
use hcp_core::config::RunConfig;
use hcp_core::{HcpError, Result};

#[derive(Parser)]
#[command(name = "hcp", version, about = "Hierarchical coalescence processes: simulation and exact analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Escalate truncation warnings to errors.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    replicas: Option<usize>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo run of the hierarchical process.
    Simulate(Common),
    /// Exact measure recursions for the configured initial law.
    Analytic(Common),
    /// Tables of the universal limit laws.
    Limits(Common),
    /// Run the acceptance suite.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Reduced sample sizes with widened tolerances.
        #[arg(long)]
        quick: bool,
    },
    /// U^(n)(x)/x curves for exponential-geometric initial laws.
    #[command(name = "reproduce-figb")]
    ReproduceFigb(Common),
}

const DEFAULT_CONFIG: &str = r#"
epochs = 4
replicas = 4
seed = 1

[initial]
kind = "left_bounded"
law = { type = "dirac", value = 1.0 }

[schedule]
preset = "east"
"#;

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::from_toml(DEFAULT_CONFIG)?,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(r) = common.replicas {
        cfg.replicas = r;
    }
    if common.strict {
        cfg.analytic.strict = true;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(common: &Common, cfg: &RunConfig, result: CommandResult) -> Result<()> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("hcp-out"));
    prepare_output_dir(&dir, common.overwrite)?;
    write_result(&dir, &result)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} files to {}", result.files.len() + 1, dir.display());
    Ok(())
}

fn validate(common: &Common, quick: bool) -> Result<bool> {
    let mut ok = true;
    if common.config.is_some() {
        match load(common) {
            Ok(_) => println!("config                                   PASS"),
            Err(e) => {
                println!("config                                   FAIL {e}");
                ok = false;
            }
        }
    }
    let reports = run_all(if quick { Scale::QUICK } else { Scale::FULL });
    for r in &reports {
        println!("{r}");
        ok &= r.passed;
    }
    if let Some(dir) = &common.out {
        prepare_output_dir(dir, common.overwrite)?;
        let lines: Vec<String> = reports
            .iter()
            .flat_map(|r| r.records.iter().map(move |t| format!("{{\"criterion\":{},\"record\":{}}}", r.id, t.to_json())))
            .collect();
        std::fs::write(dir.join("validate.jsonl"), lines.join("\n") + "\n")?;
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load(&c)?;
            emit(&c, &cfg, simulate(&cfg)?)?;
        }
        Command::Analytic(c) => {
            let cfg = load(&c)?;
            emit(&c, &cfg, analytic(&cfg)?)?;
        }
        Command::Limits(c) => {
            let cfg = load(&c)?;
            emit(&c, &cfg, limits(&cfg)?)?;
        }
        Command::ReproduceFigb(c) => {
            let cfg = load(&c)?;
            emit(&c, &cfg, reproduce_figb(&cfg)?)?;
        }
        Command::Validate { common, quick } => return validate(&common, quick),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                HcpError::Config(_) | HcpError::Schedule { .. } | HcpError::Rates(_) => 2,
                _ => 1,
            })
        }
    }
}
