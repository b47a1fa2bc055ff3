//! Command-line front end: parse equations and expressions, dispatch to the
//! solvers, and emit human-readable or machine-readable verification
//! reports. Exit code 0 means the report's max residual is within tolerance.

mod parser;
mod problem;
mod report;

use clap::{Parser as ClapParser, Subcommand};

use octode_core::algebra::{basis_product, CdNum};
use octode_core::calculus::{line_integral, IntegralMode, Integrand, Path};

use parser::{parse_expression, parse_point};
use problem::{CliError, ProblemFile};
use report::{error_json, fmt_f64, json_escape, Report};

#[derive(ClapParser)]
#[command(
    name = "octode",
    about = "Cayley-Dickson calculus: quaternion/octonion arithmetic, line integrals and residual-verified ODE solvers",
    version
)]
struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described in a JSON file and report residuals.
    Solve { problem: String },
    /// Verify a user-supplied solution expression against a problem file.
    Check { problem: String, solution: String },
    /// Non-commutative line integral of an expression along a path.
    Integrate {
        expr: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Intermediate path nodes, semicolon-separated expressions.
        #[arg(long)]
        path: Option<String>,
        /// symbolic | quadrature | both
        #[arg(long, default_value = "both")]
        mode: String,
        #[arg(long, default_value_t = 3)]
        level: u8,
    },
    /// Evaluate an expression at a point.
    Eval {
        expr: String,
        #[arg(long)]
        at: String,
        #[arg(long, default_value_t = 3)]
        level: u8,
    },
    /// Print the signed basis multiplication table for a level.
    Table { r: u8 },
    /// Power-series Cauchy solve of a first-order problem file.
    Series {
        problem: String,
        #[arg(long, default_value_t = 12)]
        order: usize,
    },
}

fn tolerance_from_env() -> f64 {
    std::env::var("OCTODE_TOLERANCE")
        .ok()
        .and_then(|v| v.parse::<f64>().ok())
        .unwrap_or(octode_core::algebra::DEFAULT_TOLERANCE)
}

fn main() {
    let cli = Cli::parse();
    let tol = tolerance_from_env();
    let json = cli.json;
    let code = match run(cli.command, tol, json) {
        Ok(code) => code,
        Err(e) => {
            if json {
                println!("{}", error_json(&e.to_string()));
            } else {
                eprintln!("error: {e}");
            }
            2
        }
    };
    std::process::exit(code);
}

fn run(command: Command, tol: f64, json: bool) -> Result<i32, CliError> {
    match command {
        Command::Solve { problem } => {
            let file = ProblemFile::load(&problem)?;
            let report = file.solve(tol)?;
            emit(&report, json);
            Ok(exit_code(&report))
        }
        Command::Check { problem, solution } => {
            let file = ProblemFile::load(&problem)?;
            let report = file.check(&solution, tol)?;
            emit(&report, json);
            Ok(exit_code(&report))
        }
        Command::Series { problem, order } => {
            let file = ProblemFile::load(&problem)?;
            let report = file.solve_series(Some(order), tol)?;
            emit(&report, json);
            Ok(exit_code(&report))
        }
        Command::Integrate {
            expr,
            from,
            to,
            path,
            mode,
            level,
        } => {
            let phrase = parse_expression(&expr, level)?;
            let a = parse_point(&from, level)?;
            let b = parse_point(&to, level)?;
            let mut nodes = vec![a];
            if let Some(p) = path {
                for part in p.split(';').filter(|s| !s.trim().is_empty()) {
                    nodes.push(parse_point(part.trim(), level)?);
                }
            }
            nodes.push(b);
            let path = Path::new(nodes).map_err(|e| CliError::BadProblem(e.to_string()))?;
            let integrand = Integrand::Phrase(phrase);
            let run_mode = |m: IntegralMode| -> Result<CdNum, CliError> {
                line_integral(&integrand, &path, m).map_err(|e| CliError::BadProblem(e.to_string()))
            };
            let (value, agreement) = match mode.as_str() {
                "symbolic" => (run_mode(IntegralMode::Symbolic)?, None),
                "quadrature" => (run_mode(IntegralMode::Quadrature)?, None),
                "both" => {
                    let s = run_mode(IntegralMode::Symbolic)?;
                    let q = run_mode(IntegralMode::Quadrature)?;
                    let d = (&s - &q).norm();
                    (s, Some(d))
                }
                other => return Err(CliError::BadProblem(format!("unknown mode `{other}`"))),
            };
            let ok = agreement.map_or(true, |d| d <= 1e-8 * (1.0 + value.norm()));
            if json {
                let agree = agreement
                    .map(|d| format!(",\"mode_disagreement\":{}", fmt_f64(d)))
                    .unwrap_or_default();
                println!(
                    "{{\"value\":\"{}\",\"coefficients\":[{}]{}}}",
                    json_escape(&value.to_string()),
                    value
                        .coeffs()
                        .iter()
                        .map(|c| fmt_f64(*c))
                        .collect::<Vec<_>>()
                        .join(","),
                    agree
                );
            } else {
                println!("{value}");
                if let Some(d) = agreement {
                    println!("mode disagreement: {d:.3e}");
                }
            }
            Ok(if ok { 0 } else { 1 })
        }
        Command::Eval { expr, at, level } => {
            let phrase = parse_expression(&expr, level)?;
            let z = parse_point(&at, level)?;
            let v = phrase.eval(&z);
            if json {
                println!(
                    "{{\"value\":\"{}\",\"coefficients\":[{}]}}",
                    json_escape(&v.to_string()),
                    v.coeffs().iter().map(|c| fmt_f64(*c)).collect::<Vec<_>>().join(",")
                );
            } else {
                println!("{v}");
            }
            Ok(0)
        }
        Command::Table { r } => {
            if r > octode_core::algebra::MAX_LEVEL {
                return Err(CliError::BadProblem(format!(
                    "level {r} above the maximum {}",
                    octode_core::algebra::MAX_LEVEL
                )));
            }
            let dim = 1usize << r;
            let entry = |j: usize, k: usize| {
                let sb = basis_product(r, j, k);
                format!("{}e{}", if sb.sign >= 0 { "+" } else { "-" }, sb.index)
            };
            if json {
                let rows: Vec<String> = (0..dim)
                    .map(|j| {
                        let cells: Vec<String> =
                            (0..dim).map(|k| format!("\"{}\"", entry(j, k))).collect();
                        format!("[{}]", cells.join(","))
                    })
                    .collect();
                println!("{{\"level\":{r},\"table\":[{}]}}", rows.join(","));
            } else {
                for j in 0..dim {
                    let row: Vec<String> =
                        (0..dim).map(|k| format!("{:>5}", entry(j, k))).collect();
                    println!("{}", row.join(" "));
                }
            }
            Ok(0)
        }
    }
}

fn emit(report: &Report, json: bool) {
    if json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
}

fn exit_code(report: &Report) -> i32 {
    if report.pass() {
        0
    } else {
        1
    }
}
