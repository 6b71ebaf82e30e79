use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};

use gibbsline::cli::{emit_reports, parse_config, run_subcommand, Subcommand};

#[derive(Parser)]
#[command(
    name = "gibbsline",
    version,
    about = "Markov approximations to long-range Gibbs measures"
)]
enum Cli {
    /// Perron root, spectral gap and Birkhoff coefficient per range.
    Spectrum(Common),
    /// Cylinder probability tables.
    Measure(Common),
    /// Projective gaps to the reference range against ε_r.
    Converge(Common),
    /// Correlation decay and its stretched-exponential envelope.
    Mixing(Common),
    /// Pressure, energy and entropy, with the entropy-convergence check.
    Entropy(Common),
    /// Approximation and factorization bounds for periodic measures.
    CheckBounds(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated formats: csv, json (overrides `output.formats`).
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
    /// Allow models that fail the decay condition (diagnostic runs only).
    #[arg(long)]
    override_condition: bool,
}

fn run(sub: Subcommand, args: Common) -> gibbsline::Result<u8> {
    let cfg = parse_config(&args.config, args.override_condition)?;
    let env = run_subcommand(&cfg, sub)?;
    let dir = args.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let formats = args.format.unwrap_or_else(|| cfg.output.formats.clone());
    let written = emit_reports(&env, &dir, &formats)?;
    println!(
        "{sub}: {} rows, {} violated, {} refused",
        env.rows.len(),
        env.violations,
        env.refusals
    );
    for p in written {
        println!("  wrote {}", p.display());
    }
    Ok(env.exit_status())
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
    if let Ok(v) = std::env::var("GIBBSLINE_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("gibbsline: thread pool: {e}");
                    return ExitCode::from(1);
                }
            }
            _ => {
                eprintln!("gibbsline: GIBBSLINE_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(1);
            }
        }
    }
    let (sub, args) = match cli {
        Cli::Spectrum(a) => (Subcommand::Spectrum, a),
        Cli::Measure(a) => (Subcommand::Measure, a),
        Cli::Converge(a) => (Subcommand::Converge, a),
        Cli::Mixing(a) => (Subcommand::Mixing, a),
        Cli::Entropy(a) => (Subcommand::Entropy, a),
        Cli::CheckBounds(a) => (Subcommand::CheckBounds, a),
    };
    match run(sub, args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("gibbsline: {e}");
            ExitCode::from(1)
        }
    }
}
