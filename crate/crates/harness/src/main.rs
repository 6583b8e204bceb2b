use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tonedisc::codec::CodecParams;
use tonedisc_harness::{codec_cli, oracle, run_and_write, ExperimentConfig, HarnessError, Result};

#[derive(Parser)]
#[command(name = "tonedisc", version, about = "Tone discovery simulator: experiments, oracle and codec tools")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment config and write its CSV.
    Run {
        config: PathBuf,
        /// Output path; overrides the config. Without either, CSV goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Initial trials per sweep point.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Encode, classify or decode tone lists.
    Codec {
        #[command(flatten)]
        params: CodecArgs,
        #[command(subcommand)]
        op: CodecOp,
    },
    /// Run the invariant suite; exits 3 if any check fails.
    Oracle {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
}

#[derive(Args)]
struct CodecArgs {
    #[arg(long, default_value_t = 199)]
    p: u32,
    #[arg(long, default_value_t = 11)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Match threshold for decoding; defaults to ceil((n+1)/2).
    #[arg(long)]
    theta: Option<usize>,
    #[arg(long, default_value_t = 2)]
    delta_window: u32,
}

impl CodecArgs {
    fn params(&self) -> Result<CodecParams> {
        let mut p = CodecParams::new(self.p, self.n, self.k)?.with_delta_window(self.delta_window)?;
        if let Some(t) = self.theta {
            p = p.with_theta(t)?;
        }
        Ok(p)
    }
}

#[derive(Subcommand)]
enum CodecOp {
    /// Print the tone indices of a TDID.
    Encode { tdid: u64 },
    /// Classify N tones given as a decimal list.
    Classify { tones: String },
    /// Decode per-symbol tone sets written as "a,b;c;...".
    Decode { sets: String },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { config, out, seed, trials } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.experiment.seed = s;
            }
            if let Some(t) = trials {
                if t == 0 {
                    return Err(HarnessError::Usage("--trials must be >= 1".into()));
                }
                cfg.set_trials(t);
            }
            let out = out.or_else(|| cfg.experiment.output.clone());
            let result = run_and_write(&cfg, out.as_deref());
            if let Ok(Some(bytes)) = &result {
                std::io::stdout()
                    .write_all(bytes)
                    .map_err(|e| HarnessError::io("stdout", e))?;
            }
            if let Some(path) = &out {
                if matches!(result, Ok(_) | Err(HarnessError::Oracle { .. })) {
                    eprintln!("wrote {} ({})", path.display(), cfg.label());
                }
            }
            result.map(|_| ())
        }
        Cmd::Codec { params, op } => {
            let params = params.params().map_err(|e| HarnessError::Usage(e.to_string()))?;
            let text = match op {
                CodecOp::Encode { tdid } => codec_cli::encode(tdid, &params)?,
                CodecOp::Classify { tones } => codec_cli::classify_text(&tones, &params)?,
                CodecOp::Decode { sets } => codec_cli::decode_text(&sets, &params)?,
            };
            println!("{text}");
            Ok(())
        }
        Cmd::Oracle { seed, trials } => {
            let checks = oracle::run_checks(seed, trials)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                return Err(HarnessError::Oracle {
                    failed,
                    total: checks.len(),
                });
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
