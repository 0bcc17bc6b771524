//! Command-line front end. Every report carries the spec hash and the tool version.
//!
//! Exit status: 0 on success, 1 on domain errors (the report still records the error),
//! 2 on input errors (nothing is written).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics::{self, HalfPlane, Lemma, Sector};
use crate::chardet;
use crate::completeness::{self, TestFunction};
use crate::error::Error;
use crate::problem::ProblemSpec;
use crate::spectrum::{self, Rect};
use crate::transfer;
use crate::C64;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "DIRAC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dirac", version, about = "Spectral tools for two-point Dirac problems on [0, pi]")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem file (JSON).
    #[arg(long)]
    pub input: PathBuf,
    /// Report path; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Override the minimum panel count of the problem.
    #[arg(long = "panels")]
    pub panels: Option<usize>,
    /// Override the series tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Boundary-condition class and minors (JSON).
    Classify(Common),
    /// Delta and Delta0 on a lattice over a rectangle (CSV), or at one point (JSON).
    Det {
        #[command(flatten)]
        common: Common,
        /// re0,re1,im0,im1
        #[arg(long, default_value = "-1,1,-1,1", allow_hyphen_values = true)]
        rect: String,
        /// Lattice points per side.
        #[arg(long, default_value_t = 50)]
        grid: usize,
        /// Single point re,im instead of a lattice.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<String>,
    },
    /// Eigenvalues with multiplicities in a rectangle (JSON).
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        rect: String,
        #[arg(long, default_value_t = 1000)]
        max_count: usize,
    },
    /// Sector asymptotics and the determinant lower bound along one ray (JSON; CSV optional).
    Asymptotics {
        #[command(flatten)]
        common: Common,
        /// arg,r1,r2,... with the moduli increasing.
        #[arg(long, default_value = "1.0471975511965976,8,12,16,24,32", allow_hyphen_values = true)]
        ray: String,
        /// Lemma 4..7; all lemmas whose sector holds the ray when omitted.
        #[arg(long)]
        lemma: Option<u32>,
        /// Per-point table of every prediction.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Theorem hypotheses with evidence (JSON).
    CheckTheorem(Common),
    /// Projection residuals of the default test functions for growing radii (CSV).
    CompleteDiag {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "5,10,20,40")]
        radii: String,
    },
    /// E(x, lambda) on the solution grid (CSV).
    DumpSolution {
        #[command(flatten)]
        common: Common,
        /// re,im
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Classify(c) | Command::CheckTheorem(c) => c,
            Command::Det { common, .. }
            | Command::Spectrum { common, .. }
            | Command::Asymptotics { common, .. }
            | Command::CompleteDiag { common, .. }
            | Command::DumpSolution { common, .. } => common,
        }
    }

    fn verb(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::Det { .. } => "det",
            Command::Spectrum { .. } => "spectrum",
            Command::Asymptotics { .. } => "asymptotics",
            Command::CheckTheorem(_) => "check-theorem",
            Command::CompleteDiag { .. } => "complete-diag",
            Command::DumpSolution { .. } => "dump-solution",
        }
    }

    fn writes_csv(&self) -> bool {
        match self {
            Command::Det { lambda, .. } => lambda.is_none(),
            Command::CompleteDiag { .. } | Command::DumpSolution { .. } => true,
            _ => false,
        }
    }
}

/// Failure of one invocation.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input (exit 2).
    Input(String),
    /// The computation failed (exit 1).
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::Expression { .. } => CliError::Input(e.to_string()),
            other => CliError::Domain(other),
        }
    }
}

pub fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("{what}: cannot parse {t:?} as a number")))
        })
        .collect()
}

pub fn parse_rect(text: &str) -> Result<Rect, CliError> {
    let v = parse_list(text, "--rect")?;
    if v.len() != 4 {
        return Err(CliError::Input("--rect expects re0,re1,im0,im1".into()));
    }
    Ok(Rect::new(v[0], v[1], v[2], v[3])?)
}

pub fn parse_complex(text: &str, what: &str) -> Result<C64, CliError> {
    match parse_list(text, what)?.as_slice() {
        [re] => Ok(C64::new(*re, 0.0)),
        [re, im] => Ok(C64::new(*re, *im)),
        _ => Err(CliError::Input(format!("{what} expects re,im"))),
    }
}

/// `(arg, points)` from `arg,r1,r2,...`.
pub fn parse_ray(text: &str) -> Result<(f64, Vec<C64>), CliError> {
    let v = parse_list(text, "--ray")?;
    if v.len() < 3 {
        return Err(CliError::Input("--ray expects arg and at least two moduli".into()));
    }
    Ok((v[0], asymptotics::ray(v[0], &v[1..])))
}

fn load(common: &Common) -> Result<ProblemSpec, CliError> {
    let text = std::fs::read_to_string(&common.input)
        .map_err(|e| CliError::Input(format!("{}: {e}", common.input.display())))?;
    let mut spec = ProblemSpec::from_json(&text).map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(n) = common.panels {
        spec = spec.with_grid_size(n)?;
    }
    if let Some(tol) = common.tol {
        let mut t = *spec.tolerances();
        t.series_tol = tol;
        spec = spec.with_tolerances(t)?;
    }
    Ok(spec)
}

fn csv_header(spec: &ProblemSpec, verb: &str) -> String {
    format!("# dirac {TOOL_VERSION} {verb} spec_hash={}\n", spec.spec_hash())
}

fn report(spec: &ProblemSpec, verb: &str, body: Value) -> String {
    let mut v = json!({
        "tool_version": TOOL_VERSION,
        "verb": verb,
        "spec_hash": spec.spec_hash(),
    });
    if let (Value::Object(m), Value::Object(b)) = (&mut v, body) {
        m.extend(b);
    }
    serde_json::to_string_pretty(&v).expect("report is valid JSON") + "\n"
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report types serialize")
}

/// Renders the report of one invocation.
pub fn execute(cmd: &Command, spec: &ProblemSpec) -> Result<String, CliError> {
    let verb = cmd.verb();
    match cmd {
        Command::Classify(_) => Ok(report(
            spec,
            verb,
            json!({ "class": spec.bc().classify(), "minors": spec.bc().minors() }),
        )),
        Command::Det {
            rect, grid, lambda, ..
        } => {
            if let Some(l) = lambda {
                let z = parse_complex(l, "--lambda")?;
                let s = chardet::delta(spec, z)?;
                return Ok(report(spec, verb, json!({ "sample": s })));
            }
            let r = parse_rect(rect)?;
            if *grid < 2 {
                return Err(CliError::Input("--grid needs at least 2 points per side".into()));
            }
            let n = *grid;
            let points: Vec<C64> = (0..n)
                .flat_map(|j| {
                    (0..n).map(move |k| {
                        C64::new(
                            r.re0 + r.width() * k as f64 / (n - 1) as f64,
                            r.im0 + r.height() * j as f64 / (n - 1) as f64,
                        )
                    })
                })
                .collect();
            use rayon::prelude::*;
            let samples = points
                .par_iter()
                .map(|&z| chardet::delta(spec, z))
                .collect::<Result<Vec<_>, _>>()?;
            let mut out = csv_header(spec, verb);
            out.push_str("re,im,re_delta,im_delta,abs_delta,re_delta0,im_delta0,error_bound\n");
            for s in samples {
                let _ = writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    s.lambda.re,
                    s.lambda.im,
                    s.delta.re,
                    s.delta.im,
                    s.delta.norm(),
                    s.delta0.re,
                    s.delta0.im,
                    s.error_bound
                );
            }
            Ok(out)
        }
        Command::Spectrum { rect, max_count, .. } => {
            let r = parse_rect(rect)?;
            let (count, used) = spectrum::count_zeros_in(spec, &r)?;
            let evs = spectrum::find_eigenvalues(spec, &r, *max_count)?;
            Ok(report(
                spec,
                verb,
                json!({ "rect": used, "count": count, "eigenvalues": evs }),
            ))
        }
        Command::Asymptotics {
            ray, lemma, csv, ..
        } => {
            let (arg, points) = parse_ray(ray)?;
            let half = HalfPlane::of(points[0])
                .ok_or_else(|| CliError::Input("the ray must leave the real axis".into()))?;
            let lemmas: Vec<Lemma> = match lemma {
                Some(n) => vec![Lemma::from_number(*n)?],
                None => [Lemma::Four, Lemma::Five, Lemma::Six, Lemma::Seven]
                    .into_iter()
                    .filter(|l| l.sector().half == half)
                    .collect(),
            };
            let mut checks = Vec::new();
            let mut table = csv_header(spec, verb);
            table.push_str("lemma,entry,modulus,re_actual,im_actual,re_predicted,im_predicted,scaled_remainder\n");
            let mut all_pass = true;
            for l in lemmas {
                let preds = match asymptotics::predict_sector(spec, l) {
                    Ok(p) => p,
                    Err(e @ Error::MissingEndpointData(_)) => {
                        checks.push(json!({ "lemma": l.number(), "error": e.to_string() }));
                        all_pass = false;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                for p in preds {
                    let r = asymptotics::verify_sector_prediction(spec, &p, &points)?;
                    all_pass &= r.pass;
                    for t in &r.points {
                        let _ = writeln!(
                            table,
                            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                            l.number(),
                            p.entry.name(),
                            t.modulus,
                            t.actual.re,
                            t.actual.im,
                            t.predicted.re,
                            t.predicted.im,
                            t.scaled_remainder
                        );
                    }
                    checks.push(json!({
                        "lemma": l.number(),
                        "prediction": p,
                        "report": r,
                        "result": if r.pass { "PASS" } else { "FAIL" },
                    }));
                }
            }
            let sector = match half {
                HalfPlane::Upper => Sector::upper(),
                HalfPlane::Lower => Sector::lower(),
            };
            let bound = asymptotics::delta_lower_bound_check(spec, &sector, &points)?;
            if let Some(path) = csv {
                std::fs::write(path, &table)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            }
            Ok(report(
                spec,
                verb,
                json!({
                    "ray_arg": arg,
                    "ray_arg_over_pi": arg / PI,
                    "predictions": checks,
                    "lower_bound": bound,
                    "result": if all_pass { "PASS" } else { "FAIL" },
                    "lower_bound_result": if bound.pass { "PASS" } else { "FAIL" },
                }),
            ))
        }
        Command::CheckTheorem(_) => {
            let v = completeness::check_theorem(spec);
            Ok(report(spec, verb, json!({ "verdict": to_value(&v) })))
        }
        Command::CompleteDiag { radii, .. } => {
            let radii = parse_list(radii, "--radii")?;
            let tests = TestFunction::defaults();
            let diags = completeness::completeness_diagnostic(spec, &tests, &radii)?;
            let mut out = csv_header(spec, verb);
            out.push_str("R,root_functions");
            for d in &diags {
                let _ = write!(out, ",\"residual {}\"", d.test_function);
            }
            out.push_str(",gram_condition\n");
            for (k, r) in radii.iter().enumerate() {
                let _ = write!(out, "{:.16e},{}", r, diags[0].root_functions[k]);
                for d in &diags {
                    let _ = write!(out, ",{:.16e}", d.residuals[k]);
                }
                match diags[0].gram_condition[k] {
                    Some(c) => {
                        let _ = writeln!(out, ",{c:.16e}");
                    }
                    None => out.push_str(",\n"),
                }
            }
            for d in &diags {
                if let Err(e) = d.check_conditioning() {
                    log::warn!("{}: {e}", d.test_function);
                }
            }
            Ok(out)
        }
        Command::DumpSolution { lambda, .. } => {
            let z = parse_complex(lambda, "--lambda")?;
            let sol = transfer::solve(spec, z)?;
            let mut out = csv_header(spec, verb);
            let _ = writeln!(
                out,
                "# lambda={:.16e},{:.16e} truncation_bound={:.16e}",
                z.re, z.im, sol.truncation_bound
            );
            out.push_str(&sol.to_csv());
            Ok(out)
        }
    }
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            use std::io::Write;
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            Ok(())
        }
    }
}

/// Sets the global thread pool from `DIRAC_THREADS` (default: available parallelism).
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Runs one invocation and returns the exit status.
pub fn run(cli: &Cli) -> i32 {
    let cmd = &cli.command;
    let common = cmd.common();
    let spec = match load(common) {
        Ok(s) => s,
        Err(CliError::Input(msg)) | Err(CliError::Domain(Error::InvalidInput(msg))) => {
            eprintln!("input error: {msg}");
            return 2;
        }
        Err(CliError::Domain(e)) => {
            eprintln!("input error: {e}");
            return 2;
        }
    };
    match execute(cmd, &spec) {
        Ok(text) => match emit(common.output.as_ref(), &text) {
            Ok(()) => 0,
            Err(msg) => {
                eprintln!("{msg}");
                2
            }
        },
        Err(CliError::Input(msg)) => {
            eprintln!("input error: {msg}");
            2
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e}");
            let text = if cmd.writes_csv() {
                format!("{}# error: {e}\n", csv_header(&spec, cmd.verb()))
            } else {
                report(&spec, cmd.verb(), json!({ "error": { "kind": kind(&e), "message": e.to_string() } }))
            };
            let _ = emit(common.output.as_ref(), &text);
            1
        }
    }
}

fn kind(e: &Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
}
