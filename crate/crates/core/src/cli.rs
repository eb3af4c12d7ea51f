//! Command-line front end: `terms`, `verify-odd`, `spectrum`, `oracle`, `compare`.
//!
//! Data goes to stdout (or `--output`); with `--manifest-out` a JSON run
//! manifest carrying the command, resolved configuration, version and a
//! timestamp is written next to it. Data payloads never contain timestamps, so
//! equal commands produce byte-identical data.
//!
//! Exit codes: 0 success, 2 usage, 3 numeric failure, 4 verification failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::contour::NumericConfig;
use crate::oracle::{eigensolve, OracleConfig, OracleMode};
use crate::potential::Potential;
use crate::solver::{spectrum, QuantizationResult, SolverConfig, SolverError};
use crate::wkb_series::gen_terms;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

/// Version tag of the CSV layouts below.
pub const CSV_SCHEMA: &str = "1";

#[derive(Parser, Debug, Serialize)]
#[command(name = "dunham", version, about = "All-order WKB series and quantization of polynomial potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[arg(long, global = true, value_enum, default_value_t = Format::Plain)]
    pub format: Format,

    /// Write the data payload here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Write a JSON run manifest to this path.
    #[arg(long, global = true)]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Plain,
    Latex,
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Print T_0 ..= T_{n-max}.
    Terms {
        #[arg(long)]
        n_max: usize,
    },
    /// Certify that the odd terms T_3 .. T_{2 n-max + 1} are exact derivatives.
    VerifyOdd {
        #[arg(long)]
        n_max: usize,
    },
    /// Energies K = 0 .. levels-1 from the truncated quantization condition.
    Spectrum {
        #[arg(allow_hyphen_values = true)]
        potential: String,
        #[arg(long)]
        levels: usize,
        /// Truncation order N: terms up to T_{2N}.
        #[arg(long)]
        order: usize,
        #[command(flatten)]
        numeric: NumericArgs,
    },
    /// Reference eigenvalues by direct diagonalization.
    Oracle {
        #[arg(allow_hyphen_values = true)]
        potential: String,
        #[arg(long, alias = "levels")]
        count: usize,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// Dunham energies at several orders against the oracle.
    Compare {
        #[arg(allow_hyphen_values = true)]
        potential: String,
        #[arg(long)]
        levels: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        orders: Vec<usize>,
        #[command(flatten)]
        numeric: NumericArgs,
    },
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct NumericArgs {
    /// Relative contour margin around the turning points.
    #[arg(long, default_value_t = 0.5)]
    pub margin: f64,
    /// Relative convergence tolerance of the contour quadrature.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Initial energy bracket `lo,hi` instead of the leading-order seed.
    #[arg(long, value_parser = parse_bracket, allow_hyphen_values = true)]
    pub seed_bracket: Option<(f64, f64)>,
    /// Integrate the odd orders and add them to the phase.
    #[arg(long)]
    pub include_odd_numeric: bool,
    /// Use B_1 = -pi/2 instead of integrating T_1.
    #[arg(long)]
    pub analytic_maslov: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OracleArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Basis)]
    pub mode: ModeArg,
    /// Oscillator basis size; defaults to max(96, 4 * count).
    #[arg(long)]
    pub basis_size: Option<usize>,
    #[arg(long, default_value_t = 4000)]
    pub grid_points: usize,
    /// Half-width of the finite-difference box (automatic if absent).
    #[arg(long)]
    pub domain_half_width: Option<f64>,
    /// Largest accepted convergence estimate.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Basis,
    Fd,
}

fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
    if !(lo < hi) {
        return Err(format!("bracket needs lo < hi, got {lo} >= {hi}"));
    }
    Ok((lo, hi))
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numeric(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Numeric(_) => EXIT_NUMERIC,
            Failure::Verification(_) => EXIT_VERIFICATION,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) | Failure::Verification(m) => m,
        }
    }
}

/// Command, resolved configuration, tool version and wall-clock time of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub version: String,
    pub timestamp: String,
    pub exit_code: i32,
}

struct Outcome {
    data: String,
    /// Settings actually used, beyond the raw arguments.
    resolved: Value,
    /// Failure detected after the data was produced (partial spectra, unverified terms).
    failure: Option<Failure>,
}

impl NumericArgs {
    fn solver_config(&self) -> SolverConfig {
        let mut numeric = NumericConfig {
            margin: self.margin,
            ..NumericConfig::default()
        };
        if let Some(t) = self.tol {
            numeric.quad_rel_tol = t;
        }
        SolverConfig {
            numeric,
            use_analytic_maslov: self.analytic_maslov,
            include_odd_numeric: self.include_odd_numeric,
            seed_bracket: self.seed_bracket,
            ..SolverConfig::default()
        }
    }
}

impl OracleArgs {
    fn config(&self, count: usize) -> OracleConfig {
        let mut cfg = OracleConfig {
            basis_size: self.basis_size.unwrap_or(96.max(4 * count)),
            domain_half_width: self.domain_half_width,
            grid_points: self.grid_points,
            mode: match self.mode {
                ModeArg::Basis => OracleMode::OscillatorBasis,
                ModeArg::Fd => OracleMode::FiniteDifference,
            },
            ..OracleConfig::default()
        };
        if let Some(t) = self.tol {
            cfg.tolerance = t;
        }
        cfg
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let (data, resolved, failure) = match execute(&cli) {
        Ok(o) => (Some(o.data), o.resolved, o.failure),
        Err(f) => (None, Value::Null, Some(f)),
    };
    let code = failure.as_ref().map_or(EXIT_OK, Failure::code);
    if let Some(data) = &data {
        let written = match &cli.output {
            Some(path) => std::fs::write(path, data),
            None => out.write_all(data.as_bytes()),
        };
        if let Err(e) = written {
            let _ = writeln!(err, "error: cannot write output: {e}");
            return EXIT_USAGE;
        }
    }
    if let Some(f) = &failure {
        let _ = writeln!(err, "error: {}", f.message());
    }
    if let Some(path) = &cli.manifest_out {
        let manifest = RunManifest {
            command: command_name(&cli.command).to_string(),
            config: json!({ "arguments": &cli, "resolved": resolved }),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            exit_code: code,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        if let Err(e) = std::fs::write(path, text + "\n") {
            let _ = writeln!(err, "error: cannot write manifest: {e}");
            return EXIT_USAGE;
        }
    }
    code
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Terms { .. } => "terms",
        Command::VerifyOdd { .. } => "verify-odd",
        Command::Spectrum { .. } => "spectrum",
        Command::Oracle { .. } => "oracle",
        Command::Compare { .. } => "compare",
    }
}

fn execute(cli: &Cli) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::Terms { n_max } => cmd_terms(*n_max, cli.format),
        Command::VerifyOdd { n_max } => cmd_verify_odd(*n_max, cli.format),
        Command::Spectrum {
            potential,
            levels,
            order,
            numeric,
        } => cmd_spectrum(potential, *levels, *order, numeric, cli.format),
        Command::Oracle { potential, count, oracle } => cmd_oracle(potential, *count, oracle, cli.format),
        Command::Compare {
            potential,
            levels,
            orders,
            numeric,
        } => cmd_compare(potential, *levels, orders, numeric, cli.format),
    }
}

fn parse_potential(text: &str) -> Result<Potential, Failure> {
    Potential::parse(text).map_err(|e| Failure::Usage(e.to_string()))
}

fn unsupported(format: Format, command: &str) -> Failure {
    Failure::Usage(format!("--format {format:?} is not available for `{command}`").to_lowercase())
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Shortest round-trip text of `x`, in exponent form outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn cmd_terms(n_max: usize, format: Format) -> Result<Outcome, Failure> {
    let series = gen_terms(n_max);
    let data = match format {
        Format::Plain => series
            .terms()
            .iter()
            .enumerate()
            .map(|(n, t)| format!("T_{n} = {}\n", t.to_plain()))
            .collect(),
        Format::Latex => series
            .terms()
            .iter()
            .enumerate()
            .map(|(n, t)| format!("T_{{{n}}} = {}\n", t.to_latex()))
            .collect(),
        Format::Json => to_json(&series),
        Format::Csv => return Err(unsupported(format, "terms")),
    };
    Ok(Outcome {
        data,
        resolved: json!({ "n_max": n_max }),
        failure: None,
    })
}

fn cmd_verify_odd(n_max: usize, format: Format) -> Result<Outcome, Failure> {
    if n_max == 0 {
        return Err(Failure::Usage("verify-odd needs --n-max >= 1".into()));
    }
    let series = gen_terms(2 * n_max + 1);
    let mut rows = Vec::new();
    let mut certificates = Vec::new();
    for n in 1..=n_max {
        let start = Instant::now();
        let cert = series.certify_total_derivative(n).map_err(|e| Failure::Usage(e.to_string()))?;
        rows.push((cert.f_n.len(), cert.phi_n.len(), cert.verified, start.elapsed()));
        certificates.push(cert);
    }
    let failed: Vec<usize> = certificates.iter().filter(|c| !c.verified).map(|c| c.n).collect();
    let data = match format {
        Format::Plain => {
            let mut s = String::from("   n  term   F_n monomials  Phi_n monomials  verified  elapsed\n");
            for (c, (f, p, ok, t)) in certificates.iter().zip(&rows) {
                let _ = writeln!(
                    s,
                    "{:>4}  T_{:<4}{:>14}  {:>15}  {:>8}  {:.3?}",
                    c.n,
                    c.wkb_index(),
                    f,
                    p,
                    ok,
                    t
                );
            }
            s
        }
        Format::Json => to_json(&json!({ "n_max": n_max, "certificates": certificates })),
        Format::Csv => {
            let header = ["n", "wkb_index", "f_monomials", "phi_monomials", "verified"].map(String::from);
            let body: Vec<Vec<String>> = certificates
                .iter()
                .zip(&rows)
                .map(|(c, (f, p, ok, _))| {
                    vec![c.n.to_string(), c.wkb_index().to_string(), f.to_string(), p.to_string(), ok.to_string()]
                })
                .collect();
            csv_text(&header, &body)
        }
        Format::Latex => return Err(unsupported(format, "verify-odd")),
    };
    let failure = (!failed.is_empty()).then(|| Failure::Verification(format!("unverified n: {failed:?}")));
    Ok(Outcome {
        data,
        resolved: json!({ "n_max": n_max }),
        failure,
    })
}

type Levels = Vec<Result<QuantizationResult, SolverError>>;

fn run_spectrum(v: &Potential, levels: usize, order: usize, cfg: &SolverConfig) -> Result<Levels, Failure> {
    if levels == 0 {
        return Err(Failure::Usage("--levels must be >= 1".into()));
    }
    spectrum(v, levels, order, cfg).map_err(|e| Failure::Numeric(e.to_string()))
}

fn level_failures(results: &Levels) -> Option<Failure> {
    let msgs: Vec<String> = results
        .iter()
        .enumerate()
        .filter_map(|(k, r)| r.as_ref().err().map(|e| format!("K = {k}: {e}")))
        .collect();
    (!msgs.is_empty()).then(|| Failure::Numeric(msgs.join("; ")))
}

fn cmd_spectrum(text: &str, levels: usize, order: usize, args: &NumericArgs, format: Format) -> Result<Outcome, Failure> {
    let v = parse_potential(text)?;
    let cfg = args.solver_config();
    let results = run_spectrum(&v, levels, order, &cfg)?;
    let data = match format {
        Format::Plain => {
            let mut s = format!("V(x) = {v}, order {order}\n   K                       E   residual  opt  warnings\n");
            for (k, r) in results.iter().enumerate() {
                match r {
                    Ok(r) => {
                        let _ = writeln!(
                            s,
                            "{k:>4}  {:>22.15e}  {:>9.2e}  {:>3}  {}",
                            r.energy,
                            r.residual,
                            r.optimal_truncation_index,
                            r.warnings.len()
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(s, "{k:>4}  failed: {e}");
                    }
                }
            }
            s
        }
        Format::Json => {
            let rows: Vec<Value> = results
                .iter()
                .enumerate()
                .map(|(k, r)| match r {
                    Ok(r) => serde_json::to_value(r).expect("serializable"),
                    Err(e) => json!({ "K": k, "error": e.to_string() }),
                })
                .collect();
            to_json(&json!({ "potential": v, "order": order, "levels": rows }))
        }
        Format::Csv => {
            let mut header = vec!["K".to_string(), "E".into(), "residual".into()];
            header.extend((0..=order).map(|n| format!("B_{}", 2 * n)));
            header.push("optimal_truncation_index".into());
            let rows: Vec<Vec<String>> = results
                .iter()
                .enumerate()
                .map(|(k, r)| match r {
                    Ok(r) => {
                        let mut row = vec![k.to_string(), num(r.energy), num(r.residual)];
                        row.extend(r.actions.iter().copied().map(num));
                        row.push(r.optimal_truncation_index.to_string());
                        row
                    }
                    Err(_) => {
                        let mut row = vec![String::new(); header.len()];
                        row[0] = k.to_string();
                        row
                    }
                })
                .collect();
            csv_text(&header, &rows)
        }
        Format::Latex => return Err(unsupported(format, "spectrum")),
    };
    Ok(Outcome {
        data,
        resolved: json!({ "potential": v, "solver": cfg, "csv_schema": CSV_SCHEMA }),
        failure: level_failures(&results),
    })
}

fn cmd_oracle(text: &str, count: usize, args: &OracleArgs, format: Format) -> Result<Outcome, Failure> {
    let v = parse_potential(text)?;
    if count == 0 {
        return Err(Failure::Usage("--count must be >= 1".into()));
    }
    let cfg = args.config(count);
    let s = eigensolve(&v, count, &cfg).map_err(|e| match e {
        crate::oracle::OracleError::Resolution { .. } => Failure::Numeric(e.to_string()),
        _ => Failure::Usage(e.to_string()),
    })?;
    let data = match format {
        Format::Plain => {
            let mut out = format!("V(x) = {v}, {:?}\n   K                       E  convergence\n", s.mode);
            for (k, (e, c)) in s.eigenvalues.iter().zip(&s.convergence_estimate).enumerate() {
                let _ = writeln!(out, "{k:>4}  {e:>22.15e}  {c:>11.2e}");
            }
            out
        }
        Format::Json => {
            let rows: Vec<Value> = s
                .eigenvalues
                .iter()
                .zip(&s.convergence_estimate)
                .enumerate()
                .map(|(k, (e, c))| json!({ "K": k, "E": e, "convergence_estimate": c }))
                .collect();
            to_json(&json!({ "potential": v, "mode": s.mode, "scale": s.scale, "center": s.center, "levels": rows }))
        }
        Format::Csv => {
            let header = ["K", "E", "convergence_estimate"].map(String::from);
            let rows: Vec<Vec<String>> = s
                .eigenvalues
                .iter()
                .zip(&s.convergence_estimate)
                .enumerate()
                .map(|(k, (e, c))| vec![k.to_string(), num(*e), num(*c)])
                .collect();
            csv_text(&header, &rows)
        }
        Format::Latex => return Err(unsupported(format, "oracle")),
    };
    Ok(Outcome {
        data,
        resolved: json!({ "potential": v, "oracle": cfg, "csv_schema": CSV_SCHEMA }),
        failure: None,
    })
}

/// One row of the comparison table; `None` where the Dunham solve failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub order: usize,
    pub e_dunham: Option<f64>,
    pub e_oracle: f64,
    pub abs_err: Option<f64>,
    pub rel_err: Option<f64>,
}

fn cmd_compare(text: &str, levels: usize, orders: &[usize], args: &NumericArgs, format: Format) -> Result<Outcome, Failure> {
    let v = parse_potential(text)?;
    if orders.is_empty() {
        return Err(Failure::Usage("--orders must list at least one order".into()));
    }
    if levels == 0 {
        return Err(Failure::Usage("--levels must be >= 1".into()));
    }
    let cfg = args.solver_config();
    let ocfg = OracleConfig {
        basis_size: 96.max(4 * levels),
        ..OracleConfig::default()
    };
    let oracle = eigensolve(&v, levels, &ocfg).map_err(|e| Failure::Numeric(e.to_string()))?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &order in orders {
        let results = run_spectrum(&v, levels, order, &cfg)?;
        if let Some(f) = level_failures(&results) {
            failures.push(format!("order {order}: {}", f.message()));
        }
        for (k, r) in results.iter().enumerate() {
            let e_oracle = oracle.eigenvalues[k];
            let e = r.as_ref().ok().map(|r| r.energy);
            rows.push(CompareRow {
                k,
                order,
                e_dunham: e,
                e_oracle,
                abs_err: e.map(|e| (e - e_oracle).abs()),
                rel_err: e.map(|e| (e - e_oracle).abs() / e_oracle.abs()),
            });
        }
    }
    let opt = |x: Option<f64>| x.map_or(String::new(), num);
    let data = match format {
        Format::Plain => {
            let mut s = format!("V(x) = {v}\n   K  order               E_dunham               E_oracle    abs_err    rel_err\n");
            for r in &rows {
                let e = r.e_dunham.map_or("failed".to_string(), |e| format!("{e:.15e}"));
                let ae = r.abs_err.map_or("-".to_string(), |x| format!("{x:.2e}"));
                let re = r.rel_err.map_or("-".to_string(), |x| format!("{x:.2e}"));
                let _ = writeln!(s, "{:>4}  {:>5}  {e:>21}  {:>21.15e}  {ae:>9}  {re:>9}", r.k, r.order, r.e_oracle);
            }
            s
        }
        Format::Json => to_json(&json!({ "potential": v, "rows": rows })),
        Format::Csv => {
            let header = ["K", "order", "E_dunham", "E_oracle", "abs_err", "rel_err"].map(String::from);
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        r.order.to_string(),
                        opt(r.e_dunham),
                        num(r.e_oracle),
                        opt(r.abs_err),
                        opt(r.rel_err),
                    ]
                })
                .collect();
            csv_text(&header, &body)
        }
        Format::Latex => return Err(unsupported(format, "compare")),
    };
    Ok(Outcome {
        data,
        resolved: json!({ "potential": v, "solver": cfg, "oracle": ocfg, "csv_schema": CSV_SCHEMA }),
        failure: (!failures.is_empty()).then(|| Failure::Numeric(failures.join("; "))),
    })
}
