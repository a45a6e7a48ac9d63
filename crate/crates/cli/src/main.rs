use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use specfn::dsl::{parse, Params};
use specfn::linalg::{MatrixJson, Spectrum, SymMatrix};
use specfn::newton::{lift_polynomial, Basis, SymPoly, DEFAULT_DEGREE_CAP};
use specfn::oracle::{default_trials, run_suite, SUITES};
use specfn::spectral::{DividedDiffMode, EngineConfig, PairMode, SpectralFn};
use specfn::Error;

#[derive(Parser, Debug)]
#[command(name = "specfn", version, about = "Spectral functions of symmetric matrices and their derivatives")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Eigenvalue expression, e.g. "psum(2)" or "sum(i, exp(a*r[i]))".
    #[arg(short = 'f', long = "function", global = true)]
    function: Option<String>,

    /// Matrix JSON file: {"dim": d, "rows": [[...], ...]}.
    #[arg(short = 'm', long = "matrix", global = true)]
    matrix: Option<PathBuf>,

    /// Direction JSON file, same format as the matrix.
    #[arg(short = 'd', long = "direction", global = true)]
    direction: Option<PathBuf>,

    /// Derivative order.
    #[arg(short = 'n', long = "order", global = true)]
    order: Option<usize>,

    /// Parameter binding `name=value` (repeatable).
    #[arg(long = "param", global = true, value_parser = parse_param)]
    params: Vec<(String, f64)>,

    #[arg(long, global = true, env = "SPECFN_SEED", default_value_t = 0)]
    seed: u64,

    /// Coalescence tolerance for switching to the integral form.
    #[arg(long, global = true)]
    tol: Option<f64>,

    #[arg(long = "quad-nodes", global = true)]
    quad_nodes: Option<usize>,

    /// Divided-difference evaluation: auto, quotient or midpoint.
    #[arg(long, global = true)]
    mode: Option<DividedDiffMode>,

    /// Also report a finite-difference value (orders 1 to 3).
    #[arg(long = "fd-check", global = true)]
    fd_check: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// F(X).
    Eval,
    /// Gradient matrix of F at X.
    Grad,
    /// Hessian of F at X applied to a direction.
    Hess,
    /// n-th directional derivative of F at X along a direction.
    Dirderiv,
    /// Evaluate a symmetric polynomial of the eigenvalues through power sums.
    Lift {
        /// Polynomial JSON file: [{"coeff": c, "exponents": [..]}, ...].
        #[arg(long)]
        poly: PathBuf,
        #[arg(long, value_enum, default_value_t = BasisArg::Elementary)]
        basis: BasisArg,
    },
    /// Eigenvalues and eigenvectors of X.
    Spectrum,
    /// Run verification suites.
    Check {
        /// Suite name, or "all".
        #[arg(long, default_value = "all")]
        suite: String,
        /// Cases per suite; each suite has its own default.
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BasisArg {
    Elementary,
    PowerSum,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

enum Failure {
    Input(String, String),
    Numerical(String, String),
    SuiteFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.kind().to_string(), e.to_string())
        } else {
            Failure::Input(e.kind().to_string(), e.to_string())
        }
    }
}

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input("input".into(), msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            report_error("usage", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Input(kind, msg)) => {
            report_error(&kind, &msg);
            ExitCode::from(1)
        }
        Err(Failure::Numerical(kind, msg)) => {
            report_error(&kind, &msg);
            ExitCode::from(2)
        }
        Err(Failure::SuiteFailed) => ExitCode::from(2),
    }
}

fn report_error(kind: &str, msg: &str) {
    eprintln!("{}", json!({ "error": kind, "message": msg }));
}

fn run(cli: &Cli) -> Result<Value, Failure> {
    match &cli.command {
        Command::Check { suite, trials } => return check(cli, suite, *trials),
        Command::Lift { poly, basis } => return lift(cli, poly, *basis),
        _ => {}
    }
    let needs_direction = matches!(cli.command, Command::Hess | Command::Dirderiv);
    let needs_function = !matches!(cli.command, Command::Spectrum);
    let function = match (&cli.function, needs_function) {
        (Some(f), _) => Some(f.as_str()),
        (None, true) => return Err(input("missing -f/--function")),
        (None, false) => None,
    };
    let matrix_path = cli.matrix.as_deref().ok_or_else(|| input("missing -m/--matrix"))?;
    let direction_path = match (&cli.direction, needs_direction) {
        (Some(p), _) => Some(p.as_path()),
        (None, true) => return Err(input("missing -d/--direction")),
        (None, false) => None,
    };
    let n = match (&cli.command, cli.order) {
        (Command::Dirderiv, None) => return Err(input("missing -n/--order")),
        (_, n) => n,
    };

    let config = engine_config(cli)?;
    let x = load_matrix(matrix_path)?;
    let xi = direction_path.map(load_matrix).transpose()?;
    if let Some(xi) = &xi {
        if xi.dim() != x.dim() {
            return Err(input(format!("direction has dim {} but matrix has dim {}", xi.dim(), x.dim())));
        }
    }

    let mut inputs = json!({
        "matrix": matrix_path.display().to_string(),
        "dim": x.dim(),
        "seed": cli.seed,
        "coalescence_tol": config.coalescence_tol,
        "quad_nodes": config.quad_nodes,
        "mode": config.mode,
    });
    if let Some(f) = function {
        inputs["function"] = json!(f);
        inputs["params"] = json!(params(cli));
    }
    if let Some(p) = direction_path {
        inputs["direction"] = json!(p.display().to_string());
    }
    if let Some(n) = n {
        inputs["n"] = json!(n);
    }

    let command = match cli.command {
        Command::Eval => "eval",
        Command::Grad => "grad",
        Command::Hess => "hess",
        Command::Dirderiv => "dirderiv",
        _ => "spectrum",
    };

    let (spectrum, engine) = match function {
        Some(src) => {
            let expr = parse(src).map_err(Error::from)?;
            let engine = SpectralFn::new(&expr, x.dim(), &params(cli), config)?;
            (engine.spectrum(&x)?, Some(engine))
        }
        None => (specfn::linalg::jacobi_eigh(&x)?, None),
    };
    let mut diagnostics = diagnostics(&spectrum, &config);

    let value = match (&cli.command, engine) {
        (Command::Spectrum, _) => {
            let basis = spectrum.flag.basis_matrix();
            json!({
                "eigenvalues": spectrum.r,
                "eigenvectors": (0..x.dim()).map(|k| basis.column(k)).collect::<Vec<_>>(),
            })
        }
        (Command::Eval, Some(f)) => json!(f.eval_spectrum(&spectrum)?),
        (Command::Grad, Some(f)) => json!(f.gradient_spectrum(&spectrum)?.to_json()),
        (Command::Hess, Some(f)) => {
            let h = f.hessian_apply_spectrum(&spectrum, xi.as_ref().expect("checked"))?;
            diagnostics["mode_used"] = pair_modes(&h.pairs);
            json!(h.value.to_json())
        }
        (Command::Dirderiv, Some(f)) => {
            let xi = xi.as_ref().expect("checked");
            let n = n.expect("checked");
            let out = f.dirderiv_spectrum(&spectrum, xi, n)?;
            diagnostics["mode_used"] = pair_modes(&out.pairs);
            if cli.fd_check && (1..=3).contains(&n) {
                let fd = f.dirderiv(&x, xi, n)?.fd_value;
                diagnostics["fd_value"] = json!(fd);
            }
            json!(out.value)
        }
        _ => unreachable!("function presence checked above"),
    };

    Ok(json!({
        "command": command,
        "inputs": inputs,
        "value": value,
        "diagnostics": diagnostics,
    }))
}

fn engine_config(cli: &Cli) -> Result<EngineConfig, Failure> {
    let mut config = EngineConfig::default();
    if let Some(tol) = cli.tol {
        config.coalescence_tol = tol;
    }
    if let Some(q) = cli.quad_nodes {
        config.quad_nodes = q;
    }
    if let Some(m) = cli.mode {
        config.mode = m;
    }
    config.fd_consistency_check = cli.fd_check;
    config.validate()?;
    Ok(config)
}

fn params(cli: &Cli) -> Params {
    cli.params.iter().cloned().collect()
}

fn load_matrix(path: &Path) -> Result<SymMatrix, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let json: MatrixJson =
        serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))?;
    Ok(SymMatrix::from_json(&json)?)
}

fn diagnostics(s: &Spectrum, config: &EngineConfig) -> Value {
    let d = s.dim();
    let mut coalescent = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            if !config.separated(&s.r, i, j) {
                coalescent.push([i + 1, j + 1]);
            }
        }
    }
    json!({
        "eigenvalues": s.r,
        "eigenvalue_gaps": s.gaps(),
        "coalescent_pairs": coalescent,
        "mode_used": config.mode,
    })
}

fn pair_modes(pairs: &[PairMode]) -> Value {
    json!(pairs)
}

fn lift(cli: &Cli, poly_path: &Path, basis: BasisArg) -> Result<Value, Failure> {
    let matrix_path = cli.matrix.as_deref().ok_or_else(|| input("missing -m/--matrix"))?;
    let text =
        std::fs::read_to_string(poly_path).map_err(|e| input(format!("{}: {e}", poly_path.display())))?;
    let basis = match basis {
        BasisArg::Elementary => Basis::Elementary,
        BasisArg::PowerSum => Basis::PowerSum,
    };
    let poly = SymPoly::from_json(&text, basis)?;
    let x = load_matrix(matrix_path)?;
    let value = lift_polynomial(&poly, &x, DEFAULT_DEGREE_CAP)?;
    Ok(json!({
        "command": "lift",
        "inputs": {
            "poly": poly_path.display().to_string(),
            "basis": basis,
            "matrix": matrix_path.display().to_string(),
            "dim": x.dim(),
            "seed": cli.seed,
        },
        "value": value,
        "diagnostics": { "degree": poly.degree(), "expression": poly.to_expr_source() },
    }))
}

fn check(cli: &Cli, suite: &str, trials: Option<usize>) -> Result<Value, Failure> {
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    let mut reports = Vec::new();
    let mut summary = BTreeMap::new();
    let mut all_pass = true;
    for name in names {
        let t = match trials {
            Some(t) => t,
            None => default_trials(name)?,
        };
        let report = run_suite(name, cli.seed, t)?;
        all_pass &= report.all_pass();
        summary.insert(name.to_string(), report.all_pass());
        reports.push(report);
    }
    let out = json!({
        "command": "check",
        "inputs": { "suite": suite, "seed": cli.seed, "trials": trials },
        "value": { "pass": all_pass, "suites": summary },
        "reports": reports,
    });
    if all_pass {
        Ok(out)
    } else {
        println!("{out}");
        Err(Failure::SuiteFailed)
    }
}
