use std::path::PathBuf;
use std::process::ExitCode;

use adirk_bench::{emit_shifts, run_benchmark, verify_theorems, BenchConfig, BenchError, Overrides, Status};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bench", about = "Low-rank Lyapunov benchmarks and theorem checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank sweep with error, floor and diagnostics columns.
    Run(Common),
    /// Theorem checks at pseudo-H2 shifts; exits 3 on any failure.
    Verify(Common),
    /// Print the shift sets only.
    Shifts(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags below override its fields.
    config: Option<PathBuf>,
    /// `synth:<diagonal|tridiagonal|random-stable>:<n>` or a bundle directory.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    /// Comma-separated subset of extended, pseudo-h2, penzl-adi.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    h2_tol: Option<f64>,
    #[arg(long)]
    h2_max_sweeps: Option<usize>,
    #[arg(long)]
    penzl_kp: Option<usize>,
    #[arg(long)]
    penzl_km: Option<usize>,
    #[arg(long)]
    oracle_cap: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(self) -> Result<BenchConfig, BenchError> {
        let o = Overrides {
            problem: self.problem,
            ranks: self.ranks,
            methods: self.methods,
            h2_tol: self.h2_tol,
            h2_max_sweeps: self.h2_max_sweeps,
            penzl_kp: self.penzl_kp,
            penzl_km: self.penzl_km,
            oracle_cap: self.oracle_cap,
            out: self.out,
            seed: self.seed,
        };
        BenchConfig::resolve(self.config.as_deref(), o)
    }
}

fn emit(cfg: &BenchConfig, text: &str) -> Result<(), BenchError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run(c) => {
            let cfg = c.resolve()?;
            let report = run_benchmark(&cfg)?;
            emit(&cfg, &report.to_csv())?;
            for (r, m, e, f) in report.floor_violations(1e-12) {
                log::error!("r = {r}: {m} error {e:e} is below the floor {f:e}");
            }
            Ok(())
        }
        Command::Verify(c) => {
            let cfg = c.resolve()?;
            let report = verify_theorems(&cfg)?;
            let mut text = String::new();
            for line in &report.lines {
                text.push_str(&line.to_string());
                text.push('\n');
            }
            let skipped = report.lines.iter().filter(|l| matches!(l.status, Status::Skipped(_))).count();
            text.push_str(&format!(
                "{} checks, {} failed, {skipped} skipped\n",
                report.lines.len(),
                report.failures()
            ));
            emit(&cfg, &text)?;
            match report.failures() {
                0 => Ok(()),
                k => Err(BenchError::TheoremFailure(k)),
            }
        }
        Command::Shifts(c) => {
            let cfg = c.resolve()?;
            emit(&cfg, &emit_shifts(&cfg)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
