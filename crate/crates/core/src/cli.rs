//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O or parse error.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::aca::{aca2_bivariate, aca_matrix, AcaOptions, RowRule};
use crate::eim::{dirac_dictionary, eim_greedy, geim_greedy, EimOptions, Functional, Norm};
use crate::error::{Error, Result};
use crate::gappy::{place_sensors_cond, place_sensors_error, GappySystem};
use crate::pod::{pod_basis, Truncation};
use crate::sampling::{
    builtin_family, materialize_family, read_matrix_csv, uniform_grid, write_atomic, FamilyParams, Grid,
    SnapshotMatrix,
};
use crate::verify::{check_equivalence_aca_eim, decay_report, random_low_rank, DecayMethod};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "lowrank", version, about = "Low-rank representations of sampled function families")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build one reduced representation and save its factors as JSON.
    Decompose(DecomposeArgs),
    /// Check that global cross approximation and sup-norm interpolation coincide.
    Compare(CompareArgs),
    /// Place gappy sensors for a saved basis.
    Sensors(SensorsArgs),
    /// Per-rank error table of several methods with the n-width floor, as CSV.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct DataArgs {
    /// Snapshot matrix CSV.
    #[arg(long, conflicts_with = "family")]
    input: Option<PathBuf>,
    /// Built-in family: cauchy, analytic, exp_abs, product or random.
    #[arg(long)]
    family: Option<String>,
    /// Grid points in x.
    #[arg(long, default_value_t = 20)]
    mx: usize,
    /// Grid points in y.
    #[arg(long, default_value_t = 20)]
    ny: usize,
    /// Shift of the cauchy family.
    #[arg(long)]
    c: Option<f64>,
    /// Rank of the random family.
    #[arg(long, default_value_t = 3)]
    true_rank: usize,
    /// Seed of the random family.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use weight 1 instead of measure / M.
    #[arg(long)]
    unit_weight: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// key=value file; flags given on the command line win.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Method {
    Pod,
    Aca,
    Eim,
    Geim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum PivotArg {
    Global,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum RowRuleArg {
    Cyclic,
    Random,
    Node,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Criterion {
    Cond,
    Error,
}

#[derive(Args, Debug, Clone, Serialize)]
struct DecomposeArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, value_enum, default_value_t = PivotArg::Global)]
    pivot: PivotArg,
    #[arg(long, value_enum, default_value_t = RowRuleArg::Cyclic)]
    row_rule: RowRuleArg,
    /// Norm of the interpolation greedy: 1, 2 or inf.
    #[arg(long, default_value = "inf")]
    p: Norm,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Rank cap; for pod the exact rank.
    #[arg(long)]
    rank: Option<usize>,
    /// gEIM dictionary: dirac or window:HALF.
    #[arg(long, default_value = "dirac")]
    dictionary: String,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CompareArgs {
    #[arg(long, default_value_t = 8)]
    qmax: usize,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SensorsArgs {
    /// Factors JSON written by `decompose` (pod, eim or geim).
    #[arg(long)]
    basis: PathBuf,
    #[arg(long, value_enum, default_value_t = Criterion::Cond)]
    criterion: Criterion,
    /// Number of sensors.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    l: usize,
    #[arg(long, default_value = "inf")]
    p: Norm,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ReportArgs {
    /// Comma-separated subset of pod, aca_global, aca_partial, eim_inf, eim_2.
    #[arg(long, default_value = "pod,aca_global,aca_partial,eim_inf,eim_2")]
    methods: String,
    #[arg(long, default_value_t = 12)]
    qmax: usize,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    common: Common,
}

/// Floats with 17 significant digits.
struct FloatFormatter(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for FloatFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn begin_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string(value: &Value) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FloatFormatter(Default::default()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::Io(_) | Error::Json(_) | Error::Parse { .. } => EXIT_IO,
        Error::Contract(_) | Error::Singular(_) | Error::NonFinite { .. } | Error::DependentBasis { .. } => {
            EXIT_NUMERICAL
        }
    }
}

fn init_logging() {
    let level = match std::env::var("LOWRANK_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
}

/// Flags from a `key=value` file, to be placed before the command-line flags.
fn config_flags(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                row: n + 1,
                col: 1,
                msg: format!("expected key=value, found '{line}'"),
            });
        };
        let (k, v) = (k.trim().replace('_', "-"), v.trim());
        if k == "config" {
            continue;
        }
        match v {
            "true" => out.push(format!("--{k}")),
            "false" => {}
            _ => {
                out.push(format!("--{k}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

fn config_path(cli: &Cli) -> Option<&Path> {
    match &cli.command {
        Command::Decompose(a) => a.common.config.as_deref(),
        Command::Compare(a) => a.common.config.as_deref(),
        Command::Sensors(a) => a.common.config.as_deref(),
        Command::Report(a) => a.common.config.as_deref(),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    init_logging();
    let argv: Vec<String> = args.into_iter().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => return report_clap(e),
    };
    let cli = match config_path(&cli) {
        None => cli,
        Some(path) => {
            let extra = match config_flags(path) {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit_code(&e);
                }
            };
            let mut merged = argv[..2].to_vec();
            merged.extend(extra);
            merged.extend_from_slice(&argv[2..]);
            match Cli::try_parse_from(&merged) {
                Ok(cli) => cli,
                Err(e) => return report_clap(e),
            }
        }
    };
    let result = match &cli.command {
        Command::Decompose(a) => decompose(a),
        Command::Compare(a) => compare(a),
        Command::Sensors(a) => sensors(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn report_clap(e: clap::Error) -> i32 {
    use clap::error::ErrorKind;
    let _ = e.print();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
        _ => EXIT_USAGE,
    }
}

fn load_data(d: &DataArgs) -> Result<SnapshotMatrix> {
    let s = match (&d.input, d.family.as_deref()) {
        (Some(path), _) => read_matrix_csv(path)?,
        (None, Some("random")) => {
            let a = random_low_rank(d.seed, d.mx, d.ny, d.true_rank, 1e-3);
            SnapshotMatrix::with_weight(a, uniform_grid(0.0, 1.0, d.mx)?, uniform_grid(0.0, 1.0, d.ny)?, 1.0 / d.mx as f64)?
        }
        (None, Some(name)) => {
            let fam = builtin_family(name, &FamilyParams { c: d.c, ..Default::default() })?;
            materialize_family(&fam, &uniform_grid(0.0, 1.0, d.mx)?, &uniform_grid(0.0, 1.0, d.ny)?)?
        }
        (None, None) => return Err(Error::InvalidArgument("one of --input or --family is required".into())),
    };
    Ok(if d.unit_weight { s.unit_weight() } else { s })
}

fn grid_json(g: &Grid) -> Value {
    json!({ "points": g.points(), "measure": g.measure() })
}

fn config_json(args: &impl Serialize) -> Result<BTreeMap<String, Value>> {
    let mut map = BTreeMap::new();
    fn flatten(v: Value, map: &mut BTreeMap<String, Value>) {
        if let Value::Object(obj) = v {
            for (k, v) in obj {
                match v {
                    Value::Object(_) => flatten(v, map),
                    Value::Null => {}
                    other => {
                        map.insert(k, other);
                    }
                }
            }
        }
    }
    flatten(serde_json::to_value(args)?, &mut map);
    Ok(map)
}

fn document(command: &str, method: &str, args: &impl Serialize, data: &DataArgs, s: &SnapshotMatrix, factors: Value, history: &[f64]) -> Result<Value> {
    Ok(json!({
        "tool": { "name": "lowrank", "version": env!("CARGO_PKG_VERSION") },
        "command": command,
        "method": method,
        "config": config_json(args)?,
        "seed": data.seed,
        "grids": { "x": grid_json(s.grid_x()), "y": grid_json(s.grid_y()), "weight": s.weight() },
        "factors": factors,
        "history": history,
    }))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn dictionary(name: &str, m: usize) -> Result<Vec<Functional>> {
    if name == "dirac" {
        return Ok(dirac_dictionary(m));
    }
    let half = name
        .strip_prefix("window:")
        .and_then(|w| w.parse::<usize>().ok())
        .ok_or_else(|| Error::InvalidArgument(format!("dictionary '{name}' is not dirac or window:HALF")))?;
    Ok((0..m).map(|c| Functional::window(m, c, half)).collect())
}

fn decompose(a: &DecomposeArgs) -> Result<i32> {
    let s = load_data(&a.data)?;
    let (method, factors, history) = match a.method {
        Method::Pod => {
            let t = a.rank.map_or(Truncation::Error(a.tol), Truncation::Rank);
            let b = pod_basis(&s, t)?;
            let history: Vec<f64> = (0..=b.rank())
                .map(|q| b.eigenvalues[q..].iter().rev().sum::<f64>().sqrt())
                .collect();
            let f = json!({
                "rank": b.rank(),
                "eigenvalues": b.eigenvalues,
                "basis": b.basis,
                "trailing_error": b.trailing_error(),
            });
            ("pod", f, history)
        }
        Method::Aca => {
            let mut opts = match a.pivot {
                PivotArg::Global => AcaOptions::global(a.tol),
                PivotArg::Partial => AcaOptions::partial(
                    a.tol,
                    match a.row_rule {
                        RowRuleArg::Cyclic => RowRule::Cyclic,
                        RowRuleArg::Random => RowRule::Random { seed: a.data.seed },
                        RowRuleArg::Node => RowRule::NodeBased,
                    },
                ),
            };
            opts.max_rank = a.rank;
            let ca = match a.pivot {
                PivotArg::Global => aca2_bivariate(&s, &opts)?,
                PivotArg::Partial => aca_matrix(&s, &opts)?,
            };
            let f = json!({
                "rank": ca.rank(),
                "tau": ca.tau,
                "sigma": ca.sigma,
                "u": ca.u,
                "v": ca.v,
                "pivots": ca.pivots,
                "status": ca.status,
            });
            ("aca", f, ca.history)
        }
        Method::Eim => {
            let mut opts = EimOptions::new(a.tol, a.p);
            opts.max_rank = a.rank;
            let e = eim_greedy(&s, &opts)?;
            let f = json!({
                "rank": e.rank(),
                "norm": e.norm,
                "sample_indices": e.sample_indices,
                "interp_indices": e.interp_indices,
                "basis": e.basis,
                "b": e.b.to_rows(),
                "coefficients": e.coefficients,
                "status": e.status,
            });
            ("eim", f, e.history)
        }
        Method::Geim => {
            let mut opts = EimOptions::new(a.tol, a.p);
            opts.max_rank = a.rank;
            let dict = dictionary(&a.dictionary, s.rows())?;
            let e = geim_greedy(&s, &dict, &opts)?;
            let f = json!({
                "rank": e.rank(),
                "norm": e.norm,
                "sample_indices": e.sample_indices,
                "functional_indices": e.functional_indices,
                "functionals": e.selected.iter().map(|f| &f.label).collect::<Vec<_>>(),
                "basis": e.basis,
                "b": e.b.to_rows(),
                "coefficients": e.coefficients,
                "status": e.status,
            });
            ("geim", f, e.history)
        }
    };
    log::info!("{method}: rank {}", factors["rank"]);
    let doc = document("decompose", method, a, &a.data, &s, factors, &history)?;
    emit(a.common.out.as_deref(), &to_json_string(&doc)?)?;
    Ok(EXIT_OK)
}

fn compare(a: &CompareArgs) -> Result<i32> {
    let s = load_data(&a.data)?;
    let r = check_equivalence_aca_eim(&s, a.qmax)?;
    if let Some(d) = &r.divergence {
        log::warn!("equivalence diverges: {d}");
    }
    let passed = r.passed;
    let doc = document("compare", "aca_global_vs_eim_inf", a, &a.data, &s, serde_json::to_value(&r)?, &[])?;
    emit(a.common.out.as_deref(), &to_json_string(&doc)?)?;
    Ok(if passed { EXIT_OK } else { EXIT_NUMERICAL })
}

fn sensors(a: &SensorsArgs) -> Result<i32> {
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&a.basis)?)?;
    let basis: Vec<Vec<f64>> = serde_json::from_value(doc["factors"]["basis"].clone())
        .map_err(|_| Error::InvalidArgument(format!("{} holds no basis", a.basis.display())))?;
    let measure = doc["grids"]["x"]["measure"]
        .as_f64()
        .ok_or_else(|| Error::InvalidArgument(format!("{} holds no x grid measure", a.basis.display())))?;
    if basis.is_empty() {
        return Err(Error::InvalidArgument("the saved basis is empty".into()));
    }
    let (placement, s) = match a.criterion {
        Criterion::Cond => (place_sensors_cond(&basis, measure, a.l)?, None),
        Criterion::Error => {
            let s = load_data(&a.data)?;
            (place_sensors_error(&basis, &s, a.l, a.p)?, Some(s))
        }
    };
    let sys = GappySystem::nodal(&basis, &placement.sensors, measure)?;
    if !sys.gram_cond.is_finite() {
        return Err(Error::Singular("insufficient sensors for basis".into()));
    }
    let factors = json!({
        "sensors": placement.sensors,
        "gram_cond": sys.gram_cond,
        "rank": basis.len(),
        "source": a.basis.display().to_string(),
    });
    let grids = match &s {
        Some(s) => json!({ "x": grid_json(s.grid_x()), "y": grid_json(s.grid_y()), "weight": s.weight() }),
        None => json!({ "x": doc["grids"]["x"].clone() }),
    };
    let out = json!({
        "tool": { "name": "lowrank", "version": env!("CARGO_PKG_VERSION") },
        "command": "sensors",
        "method": match a.criterion { Criterion::Cond => "cond", Criterion::Error => "error" },
        "config": config_json(a)?,
        "seed": a.data.seed,
        "grids": grids,
        "factors": factors,
        "history": placement.history,
    });
    emit(a.common.out.as_deref(), &to_json_string(&out)?)?;
    Ok(EXIT_OK)
}

fn report(a: &ReportArgs) -> Result<i32> {
    let methods = a
        .methods
        .split(',')
        .map(|m| m.trim().parse::<DecayMethod>())
        .collect::<Result<Vec<_>>>()?;
    let s = load_data(&a.data)?;
    let table = decay_report(&s, &methods, a.qmax)?;
    emit(a.common.out.as_deref(), &table.to_csv())?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("lowrank").chain(s.split_whitespace()).map(String::from).collect()
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(argv("decompose --method pod --bogus 1")), EXIT_USAGE);
        assert_eq!(run(argv("frobnicate")), EXIT_USAGE);
    }

    #[test]
    fn missing_input_is_usage_error() {
        assert_eq!(run(argv("report --qmax 3")), EXIT_USAGE);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert_eq!(run(argv("decompose --method eim --input /nonexistent/m.csv")), EXIT_IO);
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        let s = to_json_string(&json!({ "x": 0.1 })).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert_eq!(s.parse::<Value>().unwrap()["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "family = analytic\nmx = 6\nny = 5\nqmax = 2\n").unwrap();
        let out = dir.path().join("decay.csv");
        let cmd = format!("report --config {} --methods pod --qmax 3 --out {}", cfg.display(), out.display());
        assert_eq!(run(argv(&cmd)), EXIT_OK);
        let text = std::fs::read_to_string(out).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("q,pod,nwidth\n"));
    }
}
