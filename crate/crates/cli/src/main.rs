use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use genuniq::Tolerances;
use genuniq_cli::{
    cmd_certify, cmd_emit_model, cmd_sobi_table, cmd_trig_check, cmd_verify, exit, Family, Format, RunConfig,
    DEFAULT_RESTARTS, DEFAULT_SEED,
};

#[derive(Parser)]
#[command(name = "genuniq", version, about = "Generic uniqueness checks for structured matrix factorizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args)]
struct GlobalArgs {
    /// Seed for every random draw; accepts decimal or 0x-prefixed hex.
    #[arg(long, global = true, value_parser = parse_seed, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, global = true, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    /// Samples per batch for the span dimension (default N + 32).
    #[arg(long, global = true)]
    batch: Option<usize>,
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    #[arg(long, global = true)]
    accept_tol: Option<f64>,
    #[arg(long, global = true)]
    match_tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the uniqueness checklist on a model file.
    Certify { model: PathBuf },
    /// Fit random instances from many starts and compare with the ground truth.
    Verify { model: PathBuf },
    /// Print the SOBI bound table for I = 3..9.
    SobiTable {
        /// Also recompute the first row for I = 3..5 through the checklist with this many lags.
        #[arg(long)]
        cross_check: Option<usize>,
    },
    /// Check the multiple-angle identities up to degree N_MAX.
    TrigCheck { n_max: i64 },
    /// Write a model file for one of the built-in families.
    EmitModel {
        #[command(subcommand)]
        family: FamilyArg,
        #[arg(long, global = true)]
        k: Option<usize>,
        #[arg(long, global = true)]
        r: Option<usize>,
    },
}

#[derive(Subcommand)]
enum FamilyArg {
    Sobi {
        #[arg(long)]
        sensors: usize,
        #[arg(long)]
        lags: usize,
    },
    ExpPoly {
        /// Polynomial degree of each exponential term.
        #[arg(long, value_delimiter = ',', required = true)]
        degrees: Vec<usize>,
        #[arg(long)]
        n: usize,
    },
    Rational {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        n: usize,
    },
    Example {
        #[arg(long)]
        n: usize,
    },
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| e.to_string())
}

fn run_config(g: &GlobalArgs) -> RunConfig {
    let d = Tolerances::default();
    RunConfig {
        seed: g.seed,
        restarts: g.restarts,
        batch: g.batch,
        tolerances: Tolerances {
            rank_tol: g.rank_tol.unwrap_or(d.rank_tol),
            accept_tol: g.accept_tol.unwrap_or(d.accept_tol),
            match_tol: g.match_tol.unwrap_or(d.match_tol),
            pole_eps: d.pole_eps,
        },
        format: g.format,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(exit::USAGE as u8) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = run_config(&cli.global);
    let result = match &cli.command {
        Command::Certify { model } => cmd_certify(model, &cfg),
        Command::Verify { model } => cmd_verify(model, &cfg),
        Command::SobiTable { cross_check } => cmd_sobi_table(*cross_check, &cfg),
        Command::TrigCheck { n_max } => cmd_trig_check(*n_max, &cfg),
        Command::EmitModel { family, k, r } => {
            let family = match family {
                FamilyArg::Sobi { sensors, lags } => Family::Sobi { sensors: *sensors, lags: *lags },
                FamilyArg::ExpPoly { degrees, n } => Family::ExpPoly { degrees: degrees.clone(), n: *n },
                FamilyArg::Rational { p, q, n } => Family::Rational { p: *p, q: *q, n: *n },
                FamilyArg::Example { n } => Family::Example { n: *n },
            };
            cmd_emit_model(&family, *k, *r)
        }
    };
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit::USAGE as u8);
        }
    };
    match &cli.global.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &output.body) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(exit::USAGE as u8);
            }
        }
        None => print!("{}", output.body),
    }
    ExitCode::from(output.code as u8)
}
