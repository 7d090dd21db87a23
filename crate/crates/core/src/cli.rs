//! Command-line front end.
//!
//! Every subcommand resolves its options from flags, then from an optional
//! JSON config file (`--config`), then from built-in defaults. Outputs go to
//! `--output` or stdout.
//!
//! Exit codes: 0 success, 1 I/O, 2 config or validity, 3 verification failure.
//!
//! CSV files have a header row and LF line endings, JSON keys keep the order
//! documented in the README, and floats are written as `{:.16e}` (17
//! significant digits). Non-finite floats become empty CSV cells or JSON
//! `null`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{Map, Number, Value};

use crate::cfx::{contour_integrate, rotated_path};
use crate::dynamics::{
    coherent_lambda, coherent_state_at, ehrenfest_residual, evolve_a, evolve_b, weak_qp_closed, TwoStateSystem, Which,
};
use crate::fock::{
    coherent_coeffs, commutator_defect, commutator_defect_full, conjugation_defect, hermiticity_defect,
    qh_split_defect, FockRep, MaxAbs, StateVec,
};
use crate::maxprin::{max_weak_values, maximize, MaxOptions};
use crate::params::{eigenvalue, phase_grid, ModelParams};
use crate::position::{coherent_wavefunction, cross_gram, eigenfunction, gram_and_metric, ground_eps, Basis};
use crate::{Error, C64};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

const DEFAULT_HBAR: f64 = 1.0;
const DEFAULT_EPS: f64 = 1e-3;
const DEFAULT_NMAX: usize = 32;
const DEFAULT_TOL: f64 = 1e-10;
const DEFAULT_T: f64 = 10.0;

/// Truncation used by the coherent-state checks of `verify`, large enough
/// that `|λ| ≤ 1.5` has a negligible tail.
const VERIFY_COHERENT_N: usize = 40;
const VERIFY_GRAM_N: usize = 10;
const VERIFY_CROSS_N: usize = 12;

#[derive(Parser, Debug)]
#[command(name = "cahosc", version, about = "Complex-parameter harmonic oscillator toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify a uniform grid over the (θ_m, θ_ω) parallelogram.
    PhaseDiagram(PhaseArgs),
    /// Run the identity checks and write a JSON report.
    Verify(VerifyArgs),
    /// Time series of the amplitude and weak values between coherent states.
    Evolve(EvolveArgs),
    /// Maximize |⟨B|_Q A⟩| over normalized boundary states.
    Maximize(MaximizeArgs),
    /// Sample an eigenfunction or coherent wavefunction along a ray.
    Wavefunction(WaveArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Mass, as `<re>[+/-]<im>i`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub m: Option<C64>,
    /// Angular frequency, as `<re>[+/-]<im>i`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub omega: Option<C64>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "eps-prime")]
    pub eps_prime: Option<f64>,
    /// Fock truncation N.
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON file mirroring the flags; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PhaseArgs {
    #[command(flatten)]
    pub common: Common,
    /// Points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "T")]
    pub t_total: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "lambda-a", value_parser = parse_complex, allow_hyphen_values = true)]
    pub lambda_a: Option<C64>,
    #[arg(long = "lambda-b", value_parser = parse_complex, allow_hyphen_values = true)]
    pub lambda_b: Option<C64>,
}

#[derive(Args, Debug, Clone)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// λ_A at T_A = 0.
    #[arg(long = "lambda-a", value_parser = parse_complex, allow_hyphen_values = true)]
    pub lambda_a: Option<C64>,
    /// λ_B at T_B = T.
    #[arg(long = "lambda-b", value_parser = parse_complex, allow_hyphen_values = true)]
    pub lambda_b: Option<C64>,
    #[arg(long = "T")]
    pub t_total: Option<f64>,
    /// Number of time intervals; `steps + 1` rows are written.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct MaximizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "T")]
    pub t_total: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct WaveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Level n of the eigenfunction.
    #[arg(long)]
    pub n: Option<usize>,
    /// 1 for ψ₁ₙ, 2 for ψ₂ₙ.
    #[arg(long)]
    pub basis: Option<u8>,
    /// Sample the coherent wavefunction with this λ instead of ψₙ.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub lambda: Option<C64>,
    #[arg(long = "ray-angle", allow_hyphen_values = true)]
    pub ray_angle: Option<f64>,
    #[arg(long = "half-width")]
    pub half_width: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Contents of a `--config` file.
#[derive(Deserialize, Debug, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub m: Option<String>,
    pub omega: Option<String>,
    pub hbar: Option<f64>,
    pub eps: Option<f64>,
    pub eps_prime: Option<f64>,
    pub nmax: Option<usize>,
    pub tol: Option<f64>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub grid: Option<usize>,
    #[serde(rename = "T")]
    pub t_total: Option<f64>,
    pub seed: Option<u64>,
    pub lambda_a: Option<String>,
    pub lambda_b: Option<String>,
    pub steps: Option<usize>,
    pub n: Option<usize>,
    pub basis: Option<u8>,
    pub lambda: Option<String>,
    pub ray_angle: Option<f64>,
    pub half_width: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug)]
pub enum Failure {
    Io(String),
    Config(String),
    Verify(usize),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Io(_) => EXIT_IO,
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Verify(_) => EXIT_VERIFY,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(s) => write!(f, "I/O error: {s}"),
            Failure::Config(s) => write!(f, "{s}"),
            Failure::Verify(n) => write!(f, "{n} propert{} failed", if *n == 1 { "y" } else { "ies" }),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `<re>[+/-]<im>i`, e.g. `1-0.2i` or `1e-3+2.5e-1i`.
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let bad = || format!("invalid complex literal `{s}`, expected <re>[+/-]<im>i");
    let body = s.trim().strip_suffix('i').ok_or_else(bad)?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'))
        .ok_or_else(bad)?;
    let (re, im) = body.split_at(split);
    let num = |t: &str| -> std::result::Result<f64, String> {
        // only decimal literals; rejects inf/nan spellings
        if t.is_empty() || !t.bytes().all(|c| c.is_ascii_digit() || b"+-.eE".contains(&c)) {
            return Err(bad());
        }
        f64::from_str(t).ok().filter(|x| x.is_finite()).ok_or_else(bad)
    };
    let im_part = num(im)?;
    Ok(C64::new(num(re)?, im_part))
}

/// Options after merging flags, config file and defaults.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub m: C64,
    pub omega: C64,
    pub hbar: f64,
    pub eps: f64,
    pub eps_prime: f64,
    pub nmax: usize,
    /// `None` when neither flag nor file set it.
    pub tol: Option<f64>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub file: FileConfig,
}

impl Resolved {
    fn tol(&self) -> f64 {
        self.tol.unwrap_or(DEFAULT_TOL)
    }

    fn params(&self) -> CliResult<ModelParams> {
        Ok(ModelParams::new(self.m, self.omega, self.hbar, self.eps, self.eps_prime)?)
    }

    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

fn file_complex(v: &Option<String>, key: &str) -> CliResult<Option<C64>> {
    v.as_deref().map(parse_complex).transpose().map_err(|e| Failure::Config(format!("config key `{key}`: {e}")))
}

fn load_file(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("config file {}: {e}", path.display())))
}

fn resolve(c: &Common) -> CliResult<Resolved> {
    let file = load_file(c.config.as_deref())?;
    let one = C64::new(1.0, 0.0);
    let r = Resolved {
        m: c.m.or(file_complex(&file.m, "m")?).unwrap_or(one),
        omega: c.omega.or(file_complex(&file.omega, "omega")?).unwrap_or(one),
        hbar: c.hbar.or(file.hbar).unwrap_or(DEFAULT_HBAR),
        eps: c.eps.or(file.eps).unwrap_or(DEFAULT_EPS),
        eps_prime: c.eps_prime.or(file.eps_prime).unwrap_or(DEFAULT_EPS),
        nmax: c.nmax.or(file.nmax).unwrap_or(DEFAULT_NMAX),
        tol: c.tol.or(file.tol),
        format: c.format.or(file.format),
        output: c.output.clone().or_else(|| file.output.clone()),
        file,
    };
    if let Some(t) = r.tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Failure::Config(format!("tolerance must be a non-negative number, got {t}")));
        }
    }
    Ok(r)
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {f}");
            f.code()
        }
    }
}

pub fn dispatch(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::PhaseDiagram(a) => cmd_phase_diagram(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Evolve(a) => cmd_evolve(a),
        Command::Maximize(a) => cmd_maximize(a),
        Command::Wavefunction(a) => cmd_wavefunction(a),
    }
}

// ---------------------------------------------------------------- output

pub fn fmt_f64(x: f64) -> String {
    // adding 0.0 maps −0 to +0
    format!("{:.16e}", x + 0.0)
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&fmt_f64(x)).expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

fn cnum(z: C64) -> Value {
    obj(vec![("re", num(z.re)), ("im", num(z.im))])
}

fn obj(fields: Vec<(&str, Value)>) -> Value {
    let mut m = Map::new();
    for (k, v) in fields {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

#[derive(Debug, Clone)]
enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Flag(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => fmt_f64(*x),
            Cell::Num(_) | Cell::Empty => String::new(),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(k) => Value::from(*k),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Flag(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

struct Table {
    headers: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn render(&self, format: Format) -> CliResult<Vec<u8>> {
        match format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
                let io = |e: csv::Error| Failure::Io(e.to_string());
                w.write_record(&self.headers).map_err(io)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
                }
                w.into_inner().map_err(|e| Failure::Io(e.to_string()))
            }
            Format::Json => {
                let records = self
                    .rows
                    .iter()
                    .map(|row| obj(self.headers.iter().zip(row).map(|(h, c)| (*h, c.json())).collect()))
                    .collect();
                json_bytes(&Value::Array(records))
            }
        }
    }
}

fn json_bytes(v: &Value) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| Failure::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn emit(bytes: &[u8], output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

fn json_only(r: &Resolved, cmd: &str) -> CliResult<()> {
    match r.format {
        Some(Format::Csv) => Err(Failure::Config(format!("{cmd} writes JSON only"))),
        _ => Ok(()),
    }
}

fn params_json(p: &ModelParams) -> Value {
    let c = p.classification();
    obj(vec![
        ("m", cnum(p.m())),
        ("omega", cnum(p.omega())),
        ("hbar", num(p.hbar())),
        ("eps", num(p.eps())),
        ("eps_prime", num(p.eps_prime())),
        ("theta_m", num(p.theta_m())),
        ("theta_omega", num(p.theta_omega())),
        ("theta", num(p.theta())),
        ("theory", Value::from(c.theory.label())),
        ("region", Value::from(c.region)),
        ("potential", Value::from(c.potential.label())),
        ("normalizable", Value::from(p.normalizable())),
    ])
}

fn positive(x: f64, what: &str) -> CliResult<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Failure::Config(format!("{what} must be positive, got {x}")))
    }
}

// ---------------------------------------------------------------- commands

fn cmd_phase_diagram(a: &PhaseArgs) -> CliResult<()> {
    let r = resolve(&a.common)?;
    let grid = a.grid.or(r.file.grid).unwrap_or(101);
    let points = phase_grid(grid)?;
    let rows = points
        .iter()
        .map(|pt| {
            vec![
                Cell::Num(pt.theta_m),
                Cell::Num(pt.theta_omega),
                Cell::Text(pt.class.theory.label().into()),
                Cell::Int(pt.class.region.into()),
                Cell::Text(pt.class.potential.label().into()),
                Cell::Flag(pt.class.normalizable),
                Cell::Flag(pt.class.excluded_corner),
            ]
        })
        .collect();
    let table = Table {
        headers: vec!["theta_m", "theta_omega", "theory", "region", "potential", "normalizable", "excluded_corner"],
        rows,
    };
    emit(&table.render(r.format(Format::Csv))?, r.output.as_deref())
}

struct Check {
    name: &'static str,
    n_max: Option<usize>,
    defect: Option<f64>,
    tolerance: f64,
    note: Option<String>,
}

impl Check {
    /// A skipped check counts as passing and carries the reason in `note`.
    fn pass(&self) -> bool {
        self.defect.map_or(self.note.is_some(), |d| d <= self.tolerance)
    }

    fn json(&self) -> Value {
        obj(vec![
            ("name", Value::from(self.name)),
            ("n_max", self.n_max.map_or(Value::Null, Value::from)),
            ("defect", self.defect.map_or(Value::Null, num)),
            ("tolerance", num(self.tolerance)),
            ("pass", Value::from(self.pass())),
            ("note", self.note.clone().map_or(Value::Null, Value::from)),
        ])
    }
}

struct Suite {
    checks: Vec<Check>,
    override_tol: Option<f64>,
}

impl Suite {
    fn add(&mut self, name: &'static str, n_max: Option<usize>, tol: f64, defect: std::result::Result<f64, Error>) {
        let tolerance = self.override_tol.unwrap_or(tol);
        let (defect, note) = match defect {
            // a NaN defect must not pass
            Ok(d) => (Some(if d.is_nan() { f64::INFINITY } else { d }), None),
            Err(e) => (None, Some(format!("skipped: {e}"))),
        };
        self.checks.push(Check { name, n_max, defect, tolerance, note });
    }
}

fn rel(defect: f64, scale: f64) -> f64 {
    defect / scale.max(1.0)
}

fn cmd_verify(a: &VerifyArgs) -> CliResult<()> {
    let r = resolve(&a.common)?;
    json_only(&r, "verify")?;
    let p = r.params()?;
    let n = r.nmax;
    let rep = FockRep::build(&p, n)?;
    let t_total = positive(a.t_total.or(r.file.t_total).unwrap_or(DEFAULT_T), "T")?;
    let seed = a.seed.or(r.file.seed).unwrap_or(0);
    let one = C64::new(1.0, 0.0);
    let lambda_a = a.lambda_a.or(file_complex(&r.file.lambda_a, "lambda-a")?).unwrap_or(one);
    let lambda_b = a.lambda_b.or(file_complex(&r.file.lambda_b, "lambda-b")?).unwrap_or(one);

    let mut s = Suite { checks: Vec::new(), override_tol: r.tol };
    let hscale = p.hbar().max(1.0);

    // ladder algebra
    s.add("commutator_block", Some(n), 1e-12, Ok(commutator_defect(&rep) / hscale));
    s.add(
        "commutator_truncation_corner",
        Some(n),
        1e-9,
        Ok((commutator_defect_full(&rep) - n as f64 * hscale).abs() / hscale),
    );
    s.add("ladder_adjoint", Some(n), 0.0, Ok((rep.a.adjoint() - &rep.r).max_abs()));
    let spectrum = (0..n).map(|k| (rep.h[(k, k)] - eigenvalue(&p, k)).norm()).fold(0.0, f64::max);
    s.add("spectrum", Some(n), 1e-12, Ok(rel(spectrum, rep.h.max_abs())));

    // conjugation and Q-Hermiticity
    let (cq, cp) = conjugation_defect(&rep);
    s.add("conjugation_q", Some(n), 1e-14, Ok(rel(cq, rep.q_new.max_abs())));
    s.add("conjugation_p", Some(n), 1e-14, Ok(rel(cp, rep.p_new.max_abs())));
    s.add("q_hermitian", Some(n), 1e-14, Ok(rel(hermiticity_defect(&rep.q_q), rep.q_q.max_abs())));
    s.add("p_hermitian", Some(n), 1e-14, Ok(rel(hermiticity_defect(&rep.p_q), rep.p_q.max_abs())));

    let split = qh_split_defect(&rep);
    let hs = rep.h_qh.max_abs();
    s.add("qh_split_hermitian", Some(n), 1e-12, split.clone().map(|d| rel(d.h_defect, hs)));
    s.add("qh_split_antihermitian", Some(n), 1e-12, split.clone().map(|d| rel(d.a_defect, hs)));
    s.add("qh_split_tan", Some(n), 1e-12, split.clone().map(|d| rel(d.tan_defect, hs)));

    // position representation
    let nc = n.min(VERIFY_CROSS_N);
    s.add("dual_normalization", Some(nc), 1e-8, cross_gram(&p, nc).map(|g| identity_defect(&g)));
    let ng = n.min(VERIFY_GRAM_N);
    let gram = gram_and_metric(&p, ng);
    s.add(
        "metric_inverse",
        Some(ng),
        1e-8,
        gram.as_ref().map(|g| identity_defect(&(&g.s * &g.qmat))).map_err(Clone::clone),
    );
    s.add(
        "metric_ground_entry",
        Some(ng),
        1e-9,
        gram.as_ref().map(|g| (g.s[(0, 0)].re - 1.0 / p.theta().cos().sqrt()).abs()).map_err(Clone::clone),
    );
    s.add(
        "metric_positive",
        Some(ng),
        0.0,
        gram.as_ref().map(|g| (-g.qmat_min_eigenvalue).max(0.0)).map_err(Clone::clone),
    );
    s.add("regulated_ground_dual_normalization", None, 1e-10, regulated_ground_defect(&p));

    // coherent dynamics
    let nd = n.max(VERIFY_COHERENT_N);
    let dt = 1.0;
    let route = |which: Which, l: C64| {
        let closed = coherent_state_at(l, dt, which, nd, &p);
        let start = coherent_coeffs(l, nd);
        let stepped = match which {
            Which::A => evolve_a(&start, dt, &p),
            Which::B => evolve_b(&start, dt, &p),
        };
        (closed.0 - stepped.0).max_abs()
    };
    s.add("coherent_two_routes", Some(nd), 1e-10, Ok(route(Which::A, lambda_a).max(route(Which::B, lambda_b))));
    let dyn_rep = FockRep::build(&p, nd)?;
    let sys = TwoStateSystem::coherent(lambda_a, lambda_b, 0.0, t_total, dyn_rep)?;
    s.add("weak_values_closed_form", Some(nd), 1e-9, weak_closed_defect(&sys, lambda_a, lambda_b));
    s.add("ehrenfest_second_order", Some(nd), 0.1, ehrenfest_order(&sys));
    s.add("amplitude_time_independent", Some(nd), 1e-12, amplitude_drift(&sys));

    // maximization
    let opts = MaxOptions { tol: r.tol(), seed, ..Default::default() };
    let res = maximize(t_total, &p, n, &opts)?;
    if res.degenerate {
        s.add("max_amplitude", Some(n), 1e-12, Ok((res.amplitude_abs - 1.0).abs()));
    } else {
        s.add("max_amplitude", Some(n), 1e-9, Ok((res.amplitude_abs - res.analytic_max).abs()));
        s.add("max_ground_overlap", Some(n), 1e-6, Ok(1.0 - res.ground_overlap));
        let wv = max_weak_values(&res, &rep);
        s.add("max_classical_q", Some(n), 1e-10, wv.clone().map(|w| w.q_q.norm()));
        s.add("max_classical_p", Some(n), 1e-10, wv.clone().map(|w| w.p_q.norm()));
        let want = 0.5 * p.hbar() * p.r_omega() * p.theta_omega().cos();
        s.add("max_energy", Some(n), 1e-12, wv.clone().map(|w| (w.h_qh - C64::new(want, 0.0)).norm()));
    }

    let failed = s.checks.iter().filter(|c| !c.pass()).count();
    let report = obj(vec![
        ("params", params_json(&p)),
        ("n_max", Value::from(n)),
        ("properties", Value::Array(s.checks.iter().map(Check::json).collect())),
        ("all_pass", Value::from(failed == 0)),
    ]);
    emit(&json_bytes(&report)?, r.output.as_deref())?;
    if failed > 0 {
        Err(Failure::Verify(failed))
    } else {
        Ok(())
    }
}

fn identity_defect(m: &nalgebra::DMatrix<C64>) -> f64 {
    (m - nalgebra::DMatrix::<C64>::identity(m.nrows(), m.ncols())).max_abs()
}

fn regulated_ground_defect(p: &ModelParams) -> crate::Result<f64> {
    // fails early when the regulated constant is not defined
    ground_eps(Basis::One, C64::new(0.0, 0.0), p)?;
    let width = 40.0 * (p.hbar() / p.momega().re).sqrt().max(1.0);
    let path = rotated_path(0.0, width, 800)?;
    let v = contour_integrate(
        |q| {
            let b2 = ground_eps(Basis::Two, q.conj(), p).unwrap_or(C64::new(f64::NAN, 0.0));
            let b1 = ground_eps(Basis::One, q, p).unwrap_or(C64::new(f64::NAN, 0.0));
            b2.conj() * b1
        },
        &path,
    )?;
    Ok((v - C64::new(1.0, 0.0)).norm())
}

fn weak_closed_defect(sys: &TwoStateSystem, lambda_a: C64, lambda_b: C64) -> crate::Result<f64> {
    let p = *sys.params();
    let mut worst: f64 = 0.0;
    for k in 0..=4 {
        let t = sys.t_a + (sys.t_b - sys.t_a) * k as f64 / 4.0;
        let s = sys.sample(t)?;
        let la = coherent_lambda(lambda_a, t - sys.t_a, Which::A, &p);
        let lb = coherent_lambda(lambda_b, t - sys.t_b, Which::B, &p);
        let (q, pp) = weak_qp_closed(la, lb, &p);
        worst = worst.max((s.q_new - q).norm()).max((s.p_new - pp).norm());
    }
    Ok(worst)
}

fn ehrenfest_order(sys: &TwoStateSystem) -> crate::Result<f64> {
    let t = 0.5 * (sys.t_a + sys.t_b);
    let size = |h: f64| -> crate::Result<f64> {
        let (rq, rp) = ehrenfest_residual(sys, t, h)?;
        Ok(rq.norm().max(rp.norm()))
    };
    let coarse = size(0.02)?;
    let fine = size(0.01)?;
    if fine == 0.0 {
        return Ok(if coarse == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((coarse / fine / 4.0 - 1.0).abs())
}

fn amplitude_drift(sys: &TwoStateSystem) -> crate::Result<f64> {
    let a0 = sys.amplitude(sys.t_a);
    if a0.norm() <= 1e-300 {
        return Err(Error::VanishingOverlap { magnitude: a0.norm() });
    }
    let worst = (1..=8)
        .map(|k| sys.t_a + (sys.t_b - sys.t_a) * k as f64 / 8.0)
        .map(|t| (sys.amplitude(t) - a0).norm())
        .fold(0.0, f64::max);
    Ok(worst / a0.norm())
}

fn cmd_evolve(a: &EvolveArgs) -> CliResult<()> {
    let r = resolve(&a.common)?;
    let p = r.params()?;
    let one = C64::new(1.0, 0.0);
    let lambda_a = a.lambda_a.or(file_complex(&r.file.lambda_a, "lambda-a")?).unwrap_or(one);
    let lambda_b = a.lambda_b.or(file_complex(&r.file.lambda_b, "lambda-b")?).unwrap_or(one);
    let t_total = positive(a.t_total.or(r.file.t_total).unwrap_or(DEFAULT_T), "T")?;
    let steps = a.steps.or(r.file.steps).unwrap_or(100);
    if steps == 0 {
        return Err(Failure::Config("steps must be at least 1".into()));
    }
    let rep = FockRep::build(&p, r.nmax)?;
    let sys = TwoStateSystem::coherent(lambda_a, lambda_b, 0.0, t_total, rep)?;

    let mut rows = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = t_total * k as f64 / steps as f64;
        let mut row = vec![Cell::Num(t)];
        match sys.sample(t) {
            Ok(s) => {
                for z in [s.amplitude, s.q_new, s.p_new, s.q_q, s.p_q, s.h_qh] {
                    row.push(Cell::Num(z.re));
                    row.push(Cell::Num(z.im));
                }
                row.push(Cell::Text("ok".into()));
            }
            Err(Error::VanishingOverlap { .. }) => {
                let amp = sys.amplitude(t);
                row.extend([Cell::Num(amp.re), Cell::Num(amp.im)]);
                row.extend(std::iter::repeat_n(Cell::Empty, 10));
                row.push(Cell::Text("vanishing_overlap".into()));
            }
            Err(e) => return Err(e.into()),
        }
        rows.push(row);
    }
    let table = Table {
        headers: vec![
            "t", "amp_re", "amp_im", "q_new_re", "q_new_im", "p_new_re", "p_new_im", "q_q_re", "q_q_im", "p_q_re",
            "p_q_im", "h_qh_re", "h_qh_im", "status",
        ],
        rows,
    };
    emit(&table.render(r.format(Format::Csv))?, r.output.as_deref())
}

fn vec_json(v: &StateVec) -> Value {
    Value::Array(v.0.iter().map(|z| Value::Array(vec![num(z.re), num(z.im)])).collect())
}

fn cmd_maximize(a: &MaximizeArgs) -> CliResult<()> {
    let r = resolve(&a.common)?;
    json_only(&r, "maximize")?;
    let p = r.params()?;
    let t_total = positive(a.t_total.or(r.file.t_total).unwrap_or(DEFAULT_T), "T")?;
    let seed = a.seed.or(r.file.seed).unwrap_or(0);
    let opts = MaxOptions { tol: r.tol(), seed, ..Default::default() };
    let res = maximize(t_total, &p, r.nmax, &opts)?;

    let weak = match FockRep::build(&p, r.nmax).and_then(|rep| max_weak_values(&res, &rep)) {
        Ok(w) => obj(vec![("t", num(w.t)), ("q_q", cnum(w.q_q)), ("p_q", cnum(w.p_q)), ("h_qh", cnum(w.h_qh))]),
        Err(_) => Value::Null,
    };
    let report = obj(vec![
        ("params", params_json(&p)),
        ("T", num(t_total)),
        ("n_max", Value::from(r.nmax)),
        ("seed", Value::from(seed)),
        ("tol", num(opts.tol)),
        ("amplitude_abs", num(res.amplitude_abs)),
        ("analytic_max", num(res.analytic_max)),
        ("ground_overlap", num(res.ground_overlap)),
        ("degenerate", Value::from(res.degenerate)),
        ("iterations", Value::from(res.iterations)),
        ("converged", Value::from(res.converged)),
        ("a", vec_json(&res.a)),
        ("b", vec_json(&res.b)),
        ("weak_values_midpoint", weak),
    ]);
    emit(&json_bytes(&report)?, r.output.as_deref())
}

fn cmd_wavefunction(a: &WaveArgs) -> CliResult<()> {
    let r = resolve(&a.common)?;
    let p = r.params()?;
    let f = &r.file;
    let level = a.n.or(f.n).unwrap_or(0);
    let basis = match a.basis.or(f.basis).unwrap_or(1) {
        1 => Basis::One,
        2 => Basis::Two,
        b => return Err(Failure::Config(format!("basis must be 1 or 2, got {b}"))),
    };
    let lambda = a.lambda.or(file_complex(&f.lambda, "lambda")?);
    let angle = a.ray_angle.or(f.ray_angle).unwrap_or(0.0);
    if !angle.is_finite() {
        return Err(Failure::Config(format!("ray angle must be finite, got {angle}")));
    }
    let half_width = positive(a.half_width.or(f.half_width).unwrap_or(5.0), "half-width")?;
    let points = a.points.or(f.points).unwrap_or(101);
    if points < 2 {
        return Err(Failure::Config(format!("points must be at least 2, got {points}")));
    }
    let dir = C64::from_polar(1.0, angle);
    let span = (points - 1) as f64;
    let mut rows = Vec::with_capacity(points);
    for k in 0..points {
        // symmetric about 0, with q = 0 exact for odd counts
        let s = half_width * (2.0 * k as f64 - span) / span;
        let q = dir * s;
        let psi = match lambda {
            Some(l) => coherent_wavefunction(basis, l, q, &p)?,
            None => eigenfunction(basis, level, q, &p)?,
        };
        rows.push(vec![Cell::Num(q.re), Cell::Num(q.im), Cell::Num(psi.re), Cell::Num(psi.im)]);
    }
    let table = Table { headers: vec!["q_re", "q_im", "psi_re", "psi_im"], rows };
    emit(&table.render(r.format(Format::Csv))?, r.output.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1-0.2i").unwrap(), C64::new(1.0, -0.2));
        assert_eq!(parse_complex("0.866-0.5i").unwrap(), C64::new(0.866, -0.5));
        assert_eq!(parse_complex("-1+0i").unwrap(), C64::new(-1.0, 0.0));
        assert_eq!(parse_complex("1e-3+2.5E+1i").unwrap(), C64::new(1e-3, 25.0));
        assert_eq!(parse_complex("-2e-3-1e-2i").unwrap(), C64::new(-2e-3, -1e-2));
        for bad in ["1", "i", "1+i", "1-0.2", "inf+0i", "1+nani", "1+-2i", "", "1 + 2i", "0x1+0i"] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(serde_json::to_string(&num(0.1)).unwrap(), "1.0000000000000001e-1");
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = serde_json::from_str::<FileConfig>(r#"{"m": "1+0i", "mass": 2}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
        let ok: FileConfig = serde_json::from_str(r#"{"eps-prime": 0.01, "T": 3, "format": "json"}"#).unwrap();
        assert_eq!((ok.eps_prime, ok.t_total, ok.format), (Some(0.01), Some(3.0), Some(Format::Json)));
    }

    #[test]
    fn csv_table_uses_lf() {
        let t = Table { headers: vec!["a", "b"], rows: vec![vec![Cell::Num(1.0), Cell::Empty]] };
        let out = String::from_utf8(t.render(Format::Csv).unwrap()).unwrap();
        assert_eq!(out, "a,b\n1.0000000000000000e0,\n");
    }

    #[test]
    fn skipped_checks_pass_with_note() {
        let mut s = Suite { checks: Vec::new(), override_tol: None };
        s.add("x", None, 1e-3, Err(Error::SignUndefined));
        s.add("y", None, 1e-3, Ok(f64::NAN));
        assert!(s.checks[0].pass() && s.checks[0].note.is_some());
        assert!(!s.checks[1].pass());
    }
}
