//! `superalg`: evaluation and verification sweeps over supernumbers, super Lie
//! algebras and matrix super Lie groups.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 usage or parse error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use superalg::expbch::{bch_flow, exp_identity_residual, exp_matrix, log_matrix, FlowConfig, MatrixAlgebra};
use superalg::fixtures::fixture;
use superalg::superdiff::check_g_multilinear;
use superalg::superlie::grassmann_shell;
use superalg::sweeps::{chart_sweep, exp_identity_sweep, livf_sweep};
use superalg::{AlgebraError, Field, GrassmannAlgebra, Parity, Preset, StructureConstants, SuperMatrix, Supernumber};

#[derive(Parser, Debug)]
#[command(name = "superalg", version, about = "Supernumber arithmetic and super Lie group checks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Debug)]
struct Common {
    /// Generator budget N of the Grassmann algebra.
    #[arg(long, global = true, env = "SUPERALG_BUDGET", default_value_t = 8)]
    budget: u8,
    #[arg(long, global = true, value_enum, default_value_t = FieldArg::R)]
    field: FieldArg,
    /// Seed for every random sample.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// RK4 steps of the BCH flow.
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    series_tol: Option<f64>,
    #[arg(long, global = true)]
    series_max_terms: Option<usize>,
    #[arg(long, global = true)]
    radius_guard: Option<f64>,
    /// Pass threshold of the verb's residual.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FieldArg {
    R,
    C,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EvalOp {
    Show,
    Add,
    Sub,
    Mul,
    Inv,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Evaluate supernumber arithmetic, e.g. `eval --a "1 + z[1,2]" --op inv`.
    Eval {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: Option<String>,
        #[arg(long, value_enum, default_value_t = EvalOp::Show)]
        op: EvalOp,
    },
    /// Matrix exponential (or logarithm) of an even supermatrix.
    Exp {
        #[arg(long = "X", alias = "x")]
        x: String,
        #[arg(long)]
        alg: Option<String>,
        #[arg(long)]
        log: bool,
    },
    /// `μ(X, Y)` by the BCH flow with the exp-identity residual.
    Bch {
        #[arg(long)]
        alg: Option<String>,
        #[arg(long = "X", alias = "x")]
        x: String,
        #[arg(long = "Y", alias = "y")]
        y: String,
    },
    /// Grading, skew and graded Jacobi checks on structure constants.
    Jacobi {
        /// Structure-constant JSON file, `-` for standard input.
        #[arg(long, conflicts_with = "alg")]
        constants: Option<String>,
        #[arg(long)]
        alg: Option<String>,
    },
    /// Grassmann shell of soul-free structure constants at `--budget`.
    Shell {
        #[arg(long, conflicts_with = "alg")]
        constants: Option<String>,
        #[arg(long)]
        alg: Option<String>,
    },
    /// `‖exp(μ(X,Y)) − exp(X)exp(Y)‖` over random samples.
    VerifyExpIdentity {
        #[arg(long)]
        alg: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0.2)]
        max_norm: f64,
    },
    /// G-multilinearity of derivatives for a built-in fixture.
    CheckGsmooth {
        /// square, x-theta, cubic-pair, linear, mixed, body or bch.
        #[arg(long)]
        fixture: String,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[arg(long, default_value_t = 10)]
        samples: usize,
    },
    /// Bracket of left-invariant fields on random `(A, M, N)`.
    Livf {
        #[arg(long)]
        alg: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Chart transitions and the group operation read in charts.
    Transition {
        #[arg(long)]
        alg: String,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<AlgebraError> for Failure {
    fn from(e: AlgebraError) -> Self {
        match e {
            AlgebraError::NumericalFailure(_)
            | AlgebraError::Divergence { .. }
            | AlgebraError::NotInvertible { .. }
            | AlgebraError::Refused(_) => Failure::Compute(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn json_error(what: &str, e: &serde_json::Error) -> Failure {
    Failure::Usage(format!("{what}: line {}, column {}: {e}", e.line(), e.column()))
}

type Outcome = Result<(Value, bool), Failure>;

impl Common {
    fn algebra(&self) -> Result<GrassmannAlgebra, Failure> {
        let field = match self.field {
            FieldArg::R => Field::Real,
            FieldArg::C => Field::Complex,
        };
        Ok(GrassmannAlgebra::new(field, self.budget)?)
    }

    fn flow(&self) -> Result<FlowConfig, Failure> {
        let mut cfg = FlowConfig::default();
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.series_tol {
            cfg.series_tol = v;
        }
        if let Some(v) = self.series_max_terms {
            cfg.series_max_terms = v;
        }
        if let Some(v) = self.radius_guard {
            cfg.radius_guard = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn tol(&self, default: f64) -> Result<f64, Failure> {
        let t = self.tol.unwrap_or(default);
        if !(t >= 0.0) {
            return Err(Failure::Usage("--tol must be non-negative".into()));
        }
        Ok(t)
    }
}

/// Literal argument, or the contents of a file for `@path` (and `-` for stdin).
fn source(arg: &str) -> Result<String, Failure> {
    if arg == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)
            .map_err(|e| Failure::Usage(format!("reading standard input: {e}")))?;
        return Ok(s);
    }
    match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| Failure::Usage(format!("reading {path}: {e}"))),
        None => Ok(arg.to_string()),
    }
}

fn read_file(path: &str) -> Result<String, Failure> {
    if path == "-" {
        source("-")
    } else {
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("reading {path}: {e}")))
    }
}

fn parse_preset(name: &str) -> Result<Preset, Failure> {
    Ok(name.parse::<Preset>()?)
}

/// Supernumber from JSON or the text form.
fn supernumber(arg: &str, algebra: GrassmannAlgebra) -> Result<Supernumber, Failure> {
    let text = source(arg)?;
    if text.trim_start().starts_with('{') {
        serde_json::from_str(&text).map_err(|e| json_error("supernumber", &e))
    } else {
        Supernumber::parse(text.trim(), algebra).map_err(|e| Failure::Usage(format!("supernumber: {e}")))
    }
}

/// Supermatrix from its JSON object, or from rows of text entries shaped by `--alg`.
fn matrix(arg: &str, preset: Option<Preset>, algebra: GrassmannAlgebra) -> Result<SuperMatrix, Failure> {
    let text = source(arg)?;
    let trimmed = text.trim_start();
    let m: SuperMatrix = if trimmed.starts_with('{') {
        serde_json::from_str(&text).map_err(|e| json_error("matrix", &e))?
    } else if trimmed.starts_with('[') {
        let rows: Vec<Vec<String>> = serde_json::from_str(&text).map_err(|e| json_error("matrix", &e))?;
        let (p, q) = preset
            .and_then(|p| p.matrix_shape())
            .ok_or_else(|| Failure::Usage("text matrices need --alg with a matrix preset".into()))?;
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|t| Supernumber::parse(t, algebra)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::Usage(format!("matrix entry: {e}")))?;
        SuperMatrix::new(p, q, rows)?
    } else {
        return Err(Failure::Usage("matrix must be a JSON object or an array of rows".into()));
    };
    if let Some(preset) = preset {
        if preset.matrix_shape() != Some((m.p(), m.q())) {
            return Err(Failure::Usage(format!("matrix shape ({}|{}) does not fit {preset}", m.p(), m.q())));
        }
        preset.coordinates(&m)?;
    }
    Ok(m)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn parity_name(z: &Supernumber) -> &'static str {
    match z.parity() {
        Some(Parity::Even) => "even",
        Some(Parity::Odd) => "odd",
        None => "mixed",
    }
}

fn constants_from(
    constants: &Option<String>,
    alg: &Option<String>,
    algebra: GrassmannAlgebra,
) -> Result<StructureConstants, Failure> {
    match (constants, alg) {
        (Some(path), _) => {
            let text = read_file(path)?;
            serde_json::from_str(&text).map_err(|e| json_error("structure constants", &e))
        }
        (None, Some(name)) => Ok(parse_preset(name)?.lie_algebra(algebra)?.into_constants()),
        (None, None) => Err(Failure::Usage("give --constants or --alg".into())),
    }
}

fn run_verb(verb: &Verb, common: &Common) -> Outcome {
    match verb {
        Verb::Eval { a, b, op } => {
            let algebra = common.algebra()?;
            let a = supernumber(a, algebra)?;
            let b = b.as_deref().map(|t| supernumber(t, algebra)).transpose()?;
            let need = |b: &Option<Supernumber>| {
                b.clone().ok_or_else(|| Failure::Usage("this operation needs --b".into()))
            };
            let value = match op {
                EvalOp::Show | EvalOp::Inv if b.is_some() => {
                    return Err(Failure::Usage("--b is only used by add, sub and mul".into()))
                }
                EvalOp::Show => a,
                EvalOp::Add => a.checked_add(&need(&b)?)?,
                EvalOp::Sub => a.checked_sub(&need(&b)?)?,
                EvalOp::Mul => a.checked_mul(&need(&b)?)?,
                EvalOp::Inv => a.invert(&superalg::Tolerance::default())?,
            };
            let body = value.body();
            Ok((
                json!({
                    "value": to_value(&value),
                    "text": value.to_string(),
                    "norm": value.norm(),
                    "body": {"re": body.re, "im": body.im},
                    "parity": parity_name(&value),
                }),
                true,
            ))
        }
        Verb::Exp { x, alg, log } => {
            let algebra = common.algebra()?;
            let preset = alg.as_deref().map(parse_preset).transpose()?;
            let m = matrix(x, preset, algebra)?;
            let cfg = common.flow()?;
            let value = if *log { log_matrix(&m, &cfg)? } else { exp_matrix(&m, &cfg)? };
            Ok((json!({"op": if *log { "log" } else { "exp" }, "value": to_value(&value), "norm": value.norm()}), true))
        }
        Verb::Bch { alg, x, y } => {
            let algebra = common.algebra()?;
            let preset = alg.as_deref().map(parse_preset).transpose()?;
            let x = matrix(x, preset, algebra)?;
            let y = matrix(y, preset, algebra)?;
            let cfg = common.flow()?;
            let tol = common.tol(1e-8)?;
            let mu = bch_flow(&MatrixAlgebra, &x, &y, &cfg)?;
            let residual = exp_identity_residual(&x, &y, &mu, &cfg)?;
            Ok((
                json!({
                    "mu": to_value(&mu),
                    "residual_exp_identity": residual,
                    "steps": cfg.steps,
                    "guard": cfg.radius_guard,
                }),
                residual <= tol,
            ))
        }
        Verb::Jacobi { constants, alg } => {
            let c = constants_from(constants, alg, common.algebra()?)?;
            let tol = common.tol(1e-10)?;
            let grading = c.check_grading();
            let skew = c.check_skew(tol);
            let jacobi = c.check_graded_jacobi(tol);
            let pass = grading.is_ok() && skew.pass && jacobi.pass;
            Ok((
                json!({
                    "p": c.p(),
                    "q": c.q(),
                    "grading_ok": grading.is_ok(),
                    "skew": to_value(&skew),
                    "jacobi": to_value(&jacobi),
                    "max_residual": skew.max_residual.max(jacobi.max_residual),
                    "conventional": c.is_conventional(tol),
                    "bracket_bound": c.bracket_bound_constant(),
                    "pass": pass,
                }),
                pass,
            ))
        }
        Verb::Shell { constants, alg } => {
            let base_algebra = GrassmannAlgebra::new(Field::Complex, 1)?;
            let c = constants_from(constants, alg, base_algebra)?;
            let shell = grassmann_shell(&c, common.budget)?;
            Ok((to_value(&shell), true))
        }
        Verb::VerifyExpIdentity { alg, samples, max_norm } => {
            let preset = parse_preset(alg)?;
            let r = exp_identity_sweep(
                preset,
                common.algebra()?,
                *samples,
                *max_norm,
                common.tol(1e-8)?,
                &common.flow()?,
                common.seed,
            )?;
            Ok((to_value(&r), r.pass))
        }
        Verb::CheckGsmooth { fixture: name, order, samples } => {
            let fx = fixture(name, common.algebra()?)?;
            let r = check_g_multilinear(&fx.map, &fx.point, *order, *samples, common.tol(1e-6)?, common.seed)?;
            let mut v = to_value(&r);
            v["fixture"] = json!(fx.name);
            Ok((v, r.pass && !r.refused))
        }
        Verb::Livf { alg, samples } => {
            let r = livf_sweep(parse_preset(alg)?, common.algebra()?, *samples, common.seed)?;
            let tol = common.tol(superalg::supergroup::LIVF_TOL)?;
            let pass = r.max_residual <= tol;
            let mut v = to_value(&r);
            v["pass"] = json!(pass);
            Ok((v, pass))
        }
        Verb::Transition { alg, samples } => {
            let r = chart_sweep(
                parse_preset(alg)?,
                common.algebra()?,
                *samples,
                common.tol(1e-8)?,
                &common.flow()?,
                common.seed,
            )?;
            Ok((to_value(&r), r.pass))
        }
    }
}

fn emit(report: &Value, output: &Option<PathBuf>) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(report).expect("reports serialize");
    text.push('\n');
    match output {
        Some(path) => fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| e.to_string())
        }
    }
}

fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_verb(&cli.verb, &cli.common) {
        Ok((report, pass)) => {
            if let Err(e) = emit(&report, &cli.common.output) {
                eprintln!("error: {e}");
                return 2;
            }
            if pass {
                0
            } else {
                1
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            let report = json!({"pass": false, "error": msg});
            if let Err(e) = emit(&report, &cli.common.output) {
                eprintln!("error: {e}");
            }
            1
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
