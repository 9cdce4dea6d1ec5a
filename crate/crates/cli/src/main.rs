use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use detvr::harness::{self, ExperimentConfig, Prepared};
use detvr::Error;

#[derive(Parser)]
#[command(name = "detvr", version, about = "Matrix-stepsize compressed gradient methods simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method and seed, writing CSV traces and summary.json.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's output_dir, else `out` next to the config.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print the stepsize certificate of each method as JSON.
    Stepsize { config: PathBuf },
    /// Check the config and its data without running anything.
    Validate { config: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InadmissibleStepsize { .. } => 3,
        Error::Config(_)
        | Error::ParseError { .. }
        | Error::PartitionError { .. }
        | Error::InvalidProbability(_)
        | Error::InvalidSketch(_)
        | Error::DimError { .. }
        | Error::Json(_) => 2,
        _ => 1,
    }
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load(config: &Path) -> detvr::Result<(ExperimentConfig, PathBuf)> {
    Ok((ExperimentConfig::load(config)?, base_dir(config)))
}

fn certificates(prepared: &Prepared) -> detvr::Result<serde_json::Value> {
    let list = prepared.methods.iter().map(|m| m.certificate_json()).collect::<detvr::Result<Vec<_>>>()?;
    Ok(serde_json::Value::Array(list))
}

fn first_inadmissible(prepared: &Prepared) -> Option<Error> {
    prepared.methods.iter().find(|m| !m.spec.admissible).map(|m| Error::InadmissibleStepsize {
        method: m.label.clone(),
        reason: "explicit gamma violates the method's stepsize condition".into(),
    })
}

fn run(cmd: Command) -> detvr::Result<()> {
    match cmd {
        Command::Validate { config } => {
            let (cfg, base) = load(&config)?;
            let (problem, _) = harness::load_problem(&cfg, &base)?;
            println!(
                "ok: d = {}, n = {}, {} method(s), hash {}",
                problem.dim(),
                problem.n_clients(),
                cfg.methods.len(),
                harness::config_hash(&cfg)
            );
            Ok(())
        }
        Command::Stepsize { config } => {
            let (cfg, base) = load(&config)?;
            let prepared = harness::prepare(&cfg, &base)?;
            println!("{}", serde_json::to_string_pretty(&certificates(&prepared)?)?);
            match first_inadmissible(&prepared) {
                Some(e) => Err(e),
                None => Ok(()),
            }
        }
        Command::Run { config, out } => {
            let (cfg, base) = load(&config)?;
            let out = out
                .or_else(|| cfg.output_dir.as_ref().map(|d| base.join(d)))
                .unwrap_or_else(|| base.join("out"));
            let prepared = harness::prepare(&cfg, &base)?;
            if let Some(e) = first_inadmissible(&prepared) {
                eprintln!("{}", serde_json::to_string_pretty(&certificates(&prepared)?)?);
                return Err(e);
            }
            let result = harness::run_prepared(prepared)?;
            let files = result.write_outputs(&out)?;
            for r in &result.runs {
                let last = r.summary.k.len() - 1;
                println!(
                    "{:<16} gamma = {:.4e}  final grad_metric = {:.4e}  floats = {:.0}",
                    r.method.label,
                    r.method.spec.gamma,
                    r.summary.grad_metric.mean[last],
                    r.summary.floats_cum.mean[last]
                );
            }
            println!("wrote {} files to {}", files.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
