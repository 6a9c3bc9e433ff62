//! kms-hodge: spectrum bookkeeping, characteristic numbers, and model
//! flows for parabolic λ-flat bundles on an annulus.
//!
//! Subcommands: charnum, perturb, corr, flow, scan, verify. Exit codes:
//! 0 success, 1 validation failure, 2 assertion/identity failure,
//! 3 numerical abort. Reports are deterministic for a fixed seed.

mod commands;
mod formats;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use commands::Failure;

#[derive(Parser)]
#[command(name = "kms-hodge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Parabolic characteristic numbers of spectrum tables
    /// (bundle.json or localsys.json inputs).
    Charnum {
        #[arg(short, long = "input", required = true)]
        input: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Rational weight perturbation on the 1/m lattice (scheme II)
    /// for each divisor spectrum of a bundle.json.
    Perturb {
        #[arg(short, long = "input", required = true)]
        input: Vec<PathBuf>,
        /// lattice denominator m
        #[arg(long, default_value_t = 100)]
        m: i128,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Transport filtered-local-system tables to λ-flat KMS tables, or
    /// decompose monodromy matrices into local flat data.
    Corr {
        /// localsys.json; optionally a second bundle.json fixing
        /// lambda and the truncation levels
        #[arg(short, long = "input", required = true)]
        input: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// tolerance for the numerical rank decisions
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Hermitian–Einstein heat flow on the annulus model (flow.json).
    Flow {
        #[arg(short, long = "input", required = true)]
        input: Vec<PathBuf>,
        /// override the configured time step
        #[arg(long)]
        dt: Option<f64>,
        /// override the configured step count
        #[arg(long)]
        steps: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Seeded scalar-inequality scan, plus uniform curvature bounds for
    /// an ε list.
    Scan {
        #[arg(long, default_value_t = 100000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// comma-separated ε values for the uniform bound table
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        /// grid as NxM (radial x angular)
        #[arg(long, default_value = "128x128")]
        grid: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Randomized property suites over the exact bookkeeping layers.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

fn parse_grid(s: &str) -> Result<(usize, usize), Failure> {
    let parts: Vec<&str> = s.split('x').collect();
    if parts.len() != 2 {
        return Err(Failure::validation(format!("--grid: expected NxM, got {s:?}")));
    }
    let n: usize = parts[0]
        .parse()
        .map_err(|e| Failure::validation(format!("--grid: {e}")))?;
    let m: usize = parts[1]
        .parse()
        .map_err(|e| Failure::validation(format!("--grid: {e}")))?;
    if n < 4 || m < 4 {
        return Err(Failure::validation("--grid: both sizes must be at least 4"));
    }
    Ok((n, m))
}

fn configure_threads() {
    let n = std::env::var("KMS_HODGE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Render a JSON report as indented key lines for the text format.
fn render_text(value: &serde_json::Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                match v {
                    serde_json::Value::Object(_) | serde_json::Value::Array(_) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        render_text(v, indent + 1, out);
                    }
                    _ => out.push_str(&format!("{pad}{k} = {v}\n")),
                }
            }
        }
        serde_json::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                match v {
                    serde_json::Value::Object(_) | serde_json::Value::Array(_) => {
                        out.push_str(&format!("{pad}[{i}]:\n"));
                        render_text(v, indent + 1, out);
                    }
                    _ => out.push_str(&format!("{pad}[{i}] = {v}\n")),
                }
            }
        }
        _ => out.push_str(&format!("{pad}{value}\n")),
    }
}

fn emit(
    report: &serde_json::Value,
    format: Format,
    output: Option<&PathBuf>,
    csv: Option<&str>,
) -> Result<(), Failure> {
    let body = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serialization");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut s = String::new();
            render_text(report, 0, &mut s);
            s
        }
        Format::Csv => match csv {
            Some(c) => c.to_string(),
            None => {
                return Err(Failure::validation(
                    "--format csv is only available for the flow trace",
                ))
            }
        },
    };
    match output {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Failure::validation(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Charnum {
            input,
            output,
            format,
        } => {
            let report = commands::charnum(&input)?;
            emit(&report, format, output.as_ref(), None)
        }
        Command::Perturb {
            input,
            m,
            output,
            format,
        } => {
            let report = commands::perturb(&input, m)?;
            emit(&report, format, output.as_ref(), None)
        }
        Command::Corr {
            input,
            output,
            tol,
            format,
        } => {
            let report = commands::corr(&input, tol)?;
            emit(&report, format, output.as_ref(), None)
        }
        Command::Flow {
            input,
            dt,
            steps,
            output,
            format,
        } => {
            let out = commands::flow(&input, dt, steps)?;
            emit(&out.report, format, output.as_ref(), Some(&out.trace_csv))
        }
        Command::Scan {
            samples,
            seed,
            eps,
            grid,
            output,
            format,
        } => {
            let dims = parse_grid(&grid)?;
            let report = commands::scan(samples, seed, &eps, dims)?;
            emit(&report, format, output.as_ref(), None)
        }
        Command::Verify {
            seed,
            tol,
            output,
            format,
        } => {
            let report = commands::verify(seed, tol)?;
            emit(&report, format, output.as_ref(), None)
        }
    }
}

fn main() {
    configure_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(f) => {
            eprintln!("error: {}", f.message);
            std::process::exit(f.code);
        }
    }
}
