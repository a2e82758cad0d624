use std::path::PathBuf;
use std::process::ExitCode;

use calderon_core::harness::{emit_plot, run, verify, ExperimentConfig, HarnessError, Mode, PlotKind, RunOptions, VerifyOptions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "calderon", version, about = "Boundary recovery experiments and spectral checks")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// experiment config (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// omit timings so outputs are byte-reproducible
    #[arg(long, global = true)]
    test_mode: bool,
}

#[derive(Subcommand)]
enum Verb {
    Calibrate,
    RecoverValue,
    RecoverNormal,
    Pipeline,
    BesovRate,
    TraceCheck,
    HardyCheck,
    /// run the acceptance property suite
    Verify,
    /// render a harness CSV as SVG
    Plot {
        csv: PathBuf,
        /// SVG path (default: the CSV path with .svg)
        #[arg(long)]
        svg: Option<PathBuf>,
        /// calibrate, value, normal, rate, trace, hardy or summary (default: from the header)
        #[arg(long)]
        kind: Option<PlotKind>,
    },
}

fn load(global: &Global, mode: Mode) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    config.mode = mode;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(global: &Global, config: Option<&ExperimentConfig>) -> PathBuf {
    global
        .out
        .clone()
        .or_else(|| config.and_then(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: Cli) -> Result<u8, HarnessError> {
    let g = &cli.global;
    let mode = match cli.verb {
        Verb::Calibrate => Mode::Calibrate,
        Verb::RecoverValue => Mode::Value,
        Verb::RecoverNormal => Mode::Normal,
        Verb::Pipeline => Mode::Pipeline,
        Verb::BesovRate => Mode::BesovRate,
        Verb::TraceCheck => Mode::TraceCheck,
        Verb::HardyCheck => Mode::HardyCheck,
        Verb::Verify => {
            let report = verify(&VerifyOptions {
                out: out_dir(g, None),
                seed: g.seed.unwrap_or(0),
                reproducibility: true,
            })?;
            for line in report.lines() {
                println!("{line}");
            }
            return Ok(if report.passed() { 0 } else { 4 });
        }
        Verb::Plot { csv, svg, kind } => {
            let text = emit_plot(&csv, kind)?;
            let target = svg.unwrap_or_else(|| csv.with_extension("svg"));
            std::fs::write(&target, text).map_err(|e| HarnessError::io(&target, e))?;
            println!("{}", target.display());
            return Ok(0);
        }
    };
    let config = load(g, mode)?;
    let out = out_dir(g, Some(&config));
    let result = run(
        &config,
        &RunOptions {
            out: out.clone(),
            test_mode: g.test_mode,
        },
    )?;
    print!("{}", result.summary.to_csv());
    eprintln!("wrote {} (config {})", out.display(), &result.config_hash[..12]);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
