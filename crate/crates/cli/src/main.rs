//! `dw`: command-line front end for the double-well solver.
//!
//! Every subcommand prints one JSON object to stdout carrying
//! `"schema": "dw/1"`. Exit status is 0 on success, 1 for usage errors and
//! 2 for numerical failures, which also print a diagnostic JSON object to
//! stderr.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

use dwell::analysis::{self, CriticalOptions, GapOptions, Mode};
use dwell::instanton::{self, GapSeries};
use dwell::model::{symanzik_inverse, symanzik_rescale, TrialParams};
use dwell::num::to_sci;
use dwell::pt::{self, default_grid, pt_series};
use dwell::quad::GridSpec;
use dwell::reference::{self, ReferenceOptions};
use dwell::trial::TrialFunction;
use dwell::varopt::{cold_seed, optimize_with, OptimizeOptions};
use dwell::{Error, Parity, Precision};

const SCHEMA: &str = "dw/1";

#[derive(Parser, Debug)]
#[command(name = "dw", version, about = "High-precision solver for H = -d²/dx² + a x² + 2x⁴")]
struct Cli {
    /// Working precision in bits.
    #[arg(long, global = true, default_value_t = 192)]
    precision: u32,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Variational energy and perturbative corrections for one trial function.
    Energy(EnergyArgs),
    /// Minimize the variational energy over (A, D, alpha).
    Optimize(OptimizeArgs),
    /// Splitting between the lowest even and odd levels.
    Gap(GapArgs),
    /// Coupling at which the ground-state energy vanishes.
    Critical(CriticalArgs),
    /// Partial sums of the one-instanton splitting series.
    Instanton(InstantonArgs),
    /// Eigenvalue (and eigenfunction) from the shooting solver.
    Reference(ReferenceArgs),
    /// Sampled y0, y1, ..., yK as CSV files.
    Curves(CurvesArgs),
    /// Largest relative deviation of the trial from the exact eigenfunction.
    Deviation(DeviationArgs),
    /// Map (m², g) to the canonical coupling a and back.
    Rescale(RescaleArgs),
}

/// Exactly one of --a or the pair --m2/--g.
#[derive(Args, Debug, Clone)]
struct Coupling {
    /// Coupling a of a x² (quartic coefficient 2).
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["m2", "g"])]
    a: Option<f64>,
    /// m² of -d²/dx² + m² x² + g x⁴.
    #[arg(long, allow_hyphen_values = true, requires = "g")]
    m2: Option<f64>,
    /// g of -d²/dx² + m² x² + g x⁴.
    #[arg(long, requires = "m2")]
    g: Option<f64>,
}

impl Coupling {
    /// (a, energy scale) with E(m², g) = scale · E(a).
    fn resolve(&self) -> Result<(f64, f64), Error> {
        match (self.a, self.m2, self.g) {
            (Some(a), None, None) => Ok((a, 1.0)),
            (None, Some(m2), Some(g)) => symanzik_rescale(m2, g),
            _ => Err(Error::InvalidParam("give either --a or both --m2 and --g".into())),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Params {
    #[arg(long = "A", allow_hyphen_values = true)]
    big_a: Option<f64>,
    #[arg(long = "D", allow_hyphen_values = true)]
    d: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
}

impl Params {
    fn given(&self, parity: Parity) -> Result<Option<TrialParams>, Error> {
        match (self.big_a, self.d, self.alpha) {
            (Some(a), Some(d), Some(al)) => TrialParams::new(a, d, al, parity).map(Some),
            (None, None, None) => Ok(None),
            _ => Err(Error::InvalidParam("give all of --A, --D, --alpha or none".into())),
        }
    }
}

#[derive(Args, Debug)]
struct EnergyArgs {
    #[command(flatten)]
    coupling: Coupling,
    #[arg(long, default_value = "even")]
    parity: Parity,
    #[command(flatten)]
    params: Params,
    /// Number of terms E1 … EK (E1 is the variational energy).
    #[arg(long = "K", default_value_t = 3)]
    k: usize,
    /// Also compute max|y1| and related diagnostics (slower).
    #[arg(long)]
    diagnostics: bool,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    coupling: Coupling,
    #[arg(long, default_value = "even")]
    parity: Parity,
    /// Starting point; a built-in seed is used when absent.
    #[command(flatten)]
    params: Params,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_evals: usize,
}

#[derive(Args, Debug)]
struct GapArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    /// Highest correction order k of ΔE^(k).
    #[arg(long = "K", default_value_t = 2)]
    k: usize,
    #[arg(long, default_value = "pt")]
    mode: Mode,
    /// Even-state parameters "A,D,alpha"; optimized when absent.
    #[arg(long, allow_hyphen_values = true)]
    even: Option<String>,
    /// Odd-state parameters "A,D,alpha"; optimized when absent.
    #[arg(long, allow_hyphen_values = true)]
    odd: Option<String>,
}

#[derive(Args, Debug)]
struct CriticalArgs {
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value = "reference")]
    mode: Mode,
    #[arg(long, allow_hyphen_values = true, default_value_t = -5.0)]
    lo: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = -2.0)]
    hi: f64,
}

#[derive(Args, Debug)]
struct InstantonArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    /// Number of correction terms, 0 to 4.
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Gap to report relative deviations against.
    #[arg(long)]
    reference_gap: Option<String>,
}

#[derive(Args, Debug)]
struct ReferenceArgs {
    #[command(flatten)]
    coupling: Coupling,
    #[arg(long, default_value = "even")]
    parity: Parity,
    /// Level within the parity class.
    #[arg(long, default_value_t = 0)]
    level: usize,
    /// Write the peak-normalized eigenfunction here as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurvesArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value = "even")]
    parity: Parity,
    #[command(flatten)]
    params: Params,
    #[arg(long = "K", default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = analysis::DEFAULT_PLOT_RANGE)]
    x_max: f64,
    #[arg(long, default_value_t = 500)]
    count: usize,
    /// Directory for y0.csv, y1.csv, ...
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DeviationArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value = "even")]
    parity: Parity,
    #[command(flatten)]
    params: Params,
}

#[derive(Args, Debug)]
struct RescaleArgs {
    #[arg(long, allow_hyphen_values = true)]
    m2: Option<f64>,
    #[arg(long)]
    g: f64,
    /// Map a back to m² instead.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "m2")]
    a: Option<f64>,
}

fn parse_triple(s: &str, parity: Parity) -> Result<TrialParams, Error> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::InvalidParam(format!("cannot parse {s:?} as A,D,alpha: {e}")))?;
    if v.len() != 3 {
        return Err(Error::InvalidParam(format!("expected A,D,alpha, got {s:?}")));
    }
    TrialParams::new(v[0], v[1], v[2], parity)
}

fn with_schema<T: Serialize>(command: &str, body: &T) -> Result<Value, Error> {
    let v = serde_json::to_value(body).map_err(|e| Error::Domain(format!("serialization failed: {e}")))?;
    let mut out = Map::new();
    out.insert("schema".into(), json!(SCHEMA));
    out.insert("command".into(), json!(command));
    match v {
        Value::Object(m) => out.extend(m),
        other => {
            out.insert("result".into(), other);
        }
    }
    Ok(Value::Object(out))
}

fn io_err(e: std::io::Error) -> Error {
    Error::Domain(format!("i/o failure: {e}"))
}

fn run(cli: Cli) -> Result<Value, Error> {
    let prec = Precision::new(cli.precision)?;
    let digits = prec.digits() as usize;
    match cli.command {
        Command::Energy(args) => {
            let (a, scale) = args.coupling.resolve()?;
            let params = match args.params.given(args.parity)? {
                Some(p) => p,
                None => optimize_with(a, cold_seed(a, args.parity), &OptimizeOptions::default())?.best,
            };
            let tf = TrialFunction::new(a, params, prec)?;
            let st = pt_series(&tf, args.k, default_grid(&tf, GridSpec::DEFAULT)?)?;
            let energies = st.energies();
            let sums = st.partial_sums();
            let diagnostics = if args.diagnostics {
                Some(pt::diagnostics(&st)?)
            } else {
                None
            };
            with_schema(
                "energy",
                &json!({
                    "a": a,
                    "energy_scale": scale,
                    "parity": args.parity,
                    "params": params,
                    "precision_bits": prec.bits(),
                    "E_var": to_sci(&energies[0], digits),
                    "E": energies.iter().map(|e| to_sci(e, digits)).collect::<Vec<_>>(),
                    "partial_sums": sums.iter().map(|e| to_sci(e, digits)).collect::<Vec<_>>(),
                    "scaled_partial_sums": sums.iter().map(|e| to_sci(&(e.clone() * scale), digits)).collect::<Vec<_>>(),
                    "err_est": to_sci(&st.err_est(), 3),
                    "diagnostics": diagnostics,
                }),
            )
        }
        Command::Optimize(args) => {
            let (a, _) = args.coupling.resolve()?;
            let seed = args.params.given(args.parity)?.unwrap_or_else(|| cold_seed(a, args.parity));
            let opts = OptimizeOptions {
                tol: args.tol,
                max_evals: args.max_evals,
                final_precision: prec,
                ..OptimizeOptions::default()
            };
            let r = optimize_with(a, seed, &opts)?;
            with_schema("optimize", &json!({ "a": a, "err_est": to_sci(&r.err_est, 3), "result": r }))
        }
        Command::Gap(args) => {
            let params = match (&args.even, &args.odd) {
                (Some(e), Some(o)) => Some((parse_triple(e, Parity::Even)?, parse_triple(o, Parity::Odd)?)),
                (None, None) => None,
                _ => return Err(Error::InvalidParam("give both --even and --odd or neither".into())),
            };
            let opts = GapOptions {
                precision: prec,
                params,
                ..GapOptions::default()
            };
            let r = analysis::gap(args.a, args.k, args.mode, &opts)?;
            with_schema("gap", &r.report())
        }
        Command::Critical(args) => {
            let opts = CriticalOptions {
                mode: args.mode,
                bracket: (args.lo, args.hi),
                precision: prec,
                ..CriticalOptions::default()
            };
            let r = analysis::critical_a(args.tol, &opts)?;
            with_schema("critical", &json!({ "err_est": args.tol, "result": r }))
        }
        Command::Instanton(args) => {
            let series = GapSeries::new(args.a, prec)?;
            let value = series.value(args.order)?;
            let reference = args.reference_gap.as_deref().map(|s| prec.parse(s)).transpose()?;
            let rows = instanton::table(&series, reference.as_ref(), 6);
            with_schema(
                "instanton",
                &json!({
                    "a": args.a,
                    "order": args.order,
                    "value": to_sci(value, 6),
                    "value_full": to_sci(value, digits),
                    "err_est": 0.0,
                    "rows": rows,
                }),
            )
        }
        Command::Reference(args) => {
            let (a, scale) = args.coupling.resolve()?;
            let opts = ReferenceOptions::with_precision(prec);
            if args.coupling.a.is_none() {
                // Direct solve in the (m², g) frame.
                if args.out.is_some() {
                    return Err(Error::InvalidParam("--out needs --a".into()));
                }
                let (m2, g) = (args.coupling.m2.unwrap_or(0.0), args.coupling.g.unwrap_or(2.0));
                let (e, res) = reference::quartic_level(m2, g, args.parity, args.level, &opts)?;
                return with_schema(
                    "reference",
                    &json!({
                        "m2": m2, "g": g, "a": a, "energy_scale": scale,
                        "parity": args.parity, "level": args.level,
                        "E": to_sci(&e, digits), "err_est": res,
                    }),
                );
            }
            let sol = reference::reference_eigen_with(a, args.parity, args.level, &opts)?;
            if let Some(path) = &args.out {
                let f = BufWriter::new(File::create(path).map_err(io_err)?);
                sol.eigenfunction.write_csv(f, 20).map_err(io_err)?;
            }
            with_schema("reference", &sol.summary())
        }
        Command::Curves(args) => {
            let params = match args.params.given(args.parity)? {
                Some(p) => p,
                None => optimize_with(args.a, cold_seed(args.a, args.parity), &OptimizeOptions::default())?.best,
            };
            let (_, cs) = analysis::curves(args.a, params, args.k, args.x_max, args.count, prec)?;
            fs::create_dir_all(&args.out).map_err(io_err)?;
            let mut files = Vec::new();
            for c in &cs {
                let path = args.out.join(format!("{}.csv", c.name));
                c.write_csv(BufWriter::new(File::create(&path).map_err(io_err)?), 20)
                    .map_err(io_err)?;
                files.push(path.display().to_string());
            }
            with_schema(
                "curves",
                &json!({ "a": args.a, "params": params, "x_max": args.x_max, "files": files, "err_est": null }),
            )
        }
        Command::Deviation(args) => {
            let params = args
                .params
                .given(args.parity)?
                .ok_or_else(|| Error::InvalidParam("deviation needs --A, --D and --alpha".into()))?;
            let tf = TrialFunction::new(args.a, params, prec)?;
            let sol = reference::reference_eigen_with(args.a, args.parity, 0, &ReferenceOptions::with_precision(prec))?;
            let delta = reference::wavefunction_deviation(&tf, &sol)?;
            with_schema(
                "deviation",
                &json!({ "a": args.a, "params": params, "delta": delta, "err_est": sol.residual }),
            )
        }
        Command::Rescale(args) => match (args.m2, args.a) {
            (Some(m2), None) => {
                let (a, scale) = symanzik_rescale(m2, args.g)?;
                with_schema("rescale", &json!({ "m2": m2, "g": args.g, "a": a, "energy_scale": scale, "err_est": 0.0 }))
            }
            (None, Some(a)) => {
                let m2 = symanzik_inverse(a, args.g)?;
                let (_, scale) = symanzik_rescale(m2, args.g)?;
                with_schema("rescale", &json!({ "m2": m2, "g": args.g, "a": a, "energy_scale": scale, "err_est": 0.0 }))
            }
            _ => Err(Error::InvalidParam("give --m2 or --a".into())),
        },
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
    match run(cli) {
        Ok(v) => {
            // A closed pipe (e.g. `| head`) is not an error worth a panic.
            let _ = writeln!(std::io::stdout().lock(), "{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let diag = json!({ "schema": SCHEMA, "error": e.kind(), "message": e.to_string() });
            eprintln!("{diag}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
