use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hscache::bench::{self, ChainProfile, ExperimentSpec, Format};
use hscache::handshake::{Mode, Version};

#[derive(Parser)]
#[command(name = "hscache", version, about = "Handshake caching experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure one configuration.
    Run {
        #[arg(long, value_parser = ["12", "13"])]
        version: String,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1500)]
        mtu: usize,
        #[arg(long, default_value = "rsa2048x3")]
        chain: String,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "md")]
        format: String,
    },
    /// Run the reference grid and check every acceptance band.
    VerifyPaper {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Randomized key-agreement trials.
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Vanilla,
    Rfc7924,
    Bithac,
    Resume,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Vanilla => Mode::Vanilla,
            ModeArg::Rfc7924 => Mode::Rfc7924,
            ModeArg::Bithac => Mode::Bithac,
            ModeArg::Resume => Mode::SessionResumption,
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { version, mode, mtu, chain, reps, seed, out, format } => {
            let version = if version == "12" { Version::V12 } else { Version::V13 };
            let chain: ChainProfile = match chain.parse() {
                Ok(c) => c,
                Err(e) => return usage(e),
            };
            let format: Format = match format.parse() {
                Ok(f) => f,
                Err(e) => return usage(e),
            };
            let spec = ExperimentSpec::single(version, mode.into(), mtu, chain, reps, seed);
            if let Err(e) = spec.validate() {
                return usage(e);
            }
            let result = bench::run_grid(&spec)
                .map_err(anyhow::Error::from)
                .and_then(|r| Ok(bench::render(&r, format)?))
                .and_then(|text| write_or_print(out.as_ref(), &text));
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::VerifyPaper { out, reps, seed, trials } => {
            if reps == 0 {
                return usage("--reps must be at least 1");
            }
            let (report, verdicts) = match bench::verify_paper(reps, seed, trials) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let mut text = String::from("| criterion | result | measured | expected |\n|---:|---|---|---|\n");
            for v in &verdicts {
                println!("{}", v.line());
                text.push_str(&format!(
                    "| {} {} | {} | {} | {} |\n",
                    v.criterion,
                    v.name,
                    if v.pass { "pass" } else { "FAIL" },
                    v.measured,
                    v.expected
                ));
            }
            if let Some(p) = out.as_ref() {
                let md = bench::render(&report, Format::Markdown).unwrap_or_default();
                if let Err(e) = std::fs::write(p, format!("{text}\n{md}")) {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
            if verdicts.iter().all(|v| v.pass) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
