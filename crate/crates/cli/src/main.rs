//! `srbm`: command-line front end.
//!
//! Exit status 0 on success, 1 when the analysis refuses (unstable model,
//! preconditions not met), 2 on structural errors (bad files, bad flags).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use srbm::simulator::diagnostics::empirical_bar_residuals;
use srbm::simulator::{cross_validate_reduction, Scheme};
use srbm::{
    bar, check_decomposability, find_decompositions, is_m_matrix, is_p_matrix,
    is_s_matrix, model_hash, product_form_model, product_form_report, reduce, simulate,
    tandem_decomposability, validate_srbm, Partition, SimConfig, SrbmData, SrbmError,
    TandemSpec,
};

const SCHEMA_VERSION: u32 = 1;
/// Largest grid `bar-check` will build.
const MAX_GRID_POINTS: usize = 100_000;

#[derive(Parser, Debug)]
#[command(name = "srbm", version, about = "Stationary-distribution tools for reflecting Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Report format.
    #[arg(long, value_enum, global = true)]
    output: Option<Format>,

    /// Write the report here instead of standard output.
    #[arg(long, short = 'o', global = true)]
    out: Option<PathBuf>,

    /// Treat validation failures of the input model as errors.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a model: Σ positive definite, R completely-S, stability.
    Check {
        model: PathBuf,
        /// Also report whether R is an S-, P- and M-matrix.
        #[arg(long)]
        matrix_class: bool,
    },
    /// Reduced primitives for a coordinate subset.
    Reduce {
        model: PathBuf,
        /// 1-based coordinates, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        set: Vec<usize>,
    },
    /// Skew symmetry, rates α and marginal rates λ.
    ProductForm { model: PathBuf },
    /// Decomposability of one partition, or search over all of them.
    Decompose {
        model: PathBuf,
        /// Partition as "K/L" or "K", 1-based, e.g. "1/2,3".
        #[arg(long, conflicts_with = "search", required_unless_present = "search")]
        partition: Option<String>,
        #[arg(long)]
        search: bool,
    },
    /// Build the tandem model from a tandem file and check each prefix split.
    Tandem {
        model: PathBuf,
        /// Only check K = {1, …, k}.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Simulate the reflected process and estimate stationary quantities.
    Simulate {
        model: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        /// Write a thinned path of replication 1 to this CSV file.
        #[arg(long)]
        record_samples: Option<PathBuf>,
        /// Keep every k-th state for --record-samples (default: about
        /// 10 000 rows).
        #[arg(long)]
        record_every: Option<usize>,
    },
    /// BAR residuals of the product-form model, or of a simulation.
    BarCheck {
        model: PathBuf,
        /// Points per coordinate of the θ grid.
        #[arg(long)]
        theta_grid: usize,
        /// Use transforms estimated by simulation instead of the product form.
        #[arg(long)]
        empirical: bool,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Compare the full simulation with simulations of both reduced models.
    CrossValidate {
        model: PathBuf,
        #[arg(long)]
        partition: String,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Steps per replication, burn-in included.
    #[arg(long, default_value_t = 1_000_000)]
    steps: usize,
    /// Discarded steps (default: 20% of --steps).
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    reps: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Bridge)]
    scheme: SchemeArg,
    /// Simulate even if the model is not stable.
    #[arg(long)]
    force: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SchemeArg {
    Bridge,
    Projected,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        let mut cfg = SimConfig::new(self.dt, self.steps)
            .with_seed(self.seed)
            .with_replications(self.reps)
            .with_scheme(match self.scheme {
                SchemeArg::Bridge => Scheme::Bridge,
                SchemeArg::Projected => Scheme::Projected,
            });
        if let Some(b) = self.burn_in {
            cfg = cfg.with_burn_in(b);
        }
        cfg
    }
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn refusal(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn structural(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<SrbmError> for Failure {
    fn from(e: SrbmError) -> Self {
        let code = match &e {
            SrbmError::Precondition(_)
            | SrbmError::Singular { .. }
            | SrbmError::LcpCapExceeded { .. }
            | SrbmError::LcpRay { .. }
            | SrbmError::Step { .. } => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

/// A parsed input file.
enum Input {
    Model(SrbmData),
    Tandem(TandemSpec, SrbmData),
}

impl Input {
    fn data(&self) -> &SrbmData {
        match self {
            Input::Model(d) | Input::Tandem(_, d) => d,
        }
    }
}

/// Reads a model file. Files with a `beta` key are tandem specifications.
fn parse_model(path: &Path) -> CliResult<Input> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::structural(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::structural(format!("{}: malformed JSON: {e}", path.display())))?;
    let schema = |e: serde_json::Error| Failure::structural(format!("{}: {e}", path.display()));
    if value.get("beta").is_some() {
        let spec: TandemSpec = serde_json::from_value(value).map_err(schema)?;
        let data = srbm::build_tandem(&spec)?;
        Ok(Input::Tandem(spec, data))
    } else {
        let data: SrbmData = serde_json::from_value(value).map_err(schema)?;
        Ok(Input::Model(data))
    }
}

/// Runs [`validate_srbm`] and turns failed checks into warnings, or into
/// an error under `--strict`.
fn validation_warnings(data: &SrbmData, strict: bool) -> CliResult<Vec<String>> {
    let v = validate_srbm(data)?;
    let mut w = Vec::new();
    if !v.sigma_spd {
        w.push(format!(
            "sigma is not positive definite (smallest eigenvalue {:e})",
            v.sigma_min_eigenvalue
        ));
    }
    if !v.r_completely_s {
        let subset: Vec<usize> = v.r_failing_subset.iter().flatten().map(|i| i + 1).collect();
        w.push(format!("R is not completely-S (failing principal submatrix {subset:?})"));
    }
    if !v.stable {
        w.push("model is not stable: R⁻¹μ is not negative".into());
    }
    if strict && !w.is_empty() {
        return Err(Failure::structural(format!("validation failed: {}", w.join("; "))));
    }
    Ok(w)
}

struct Report {
    command: &'static str,
    hash: String,
    warnings: Vec<String>,
    body: Value,
    /// Rows for `--output csv`; `None` falls back to flattened JSON.
    table: Option<(Vec<String>, Vec<Vec<String>>)>,
    default_format: Format,
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| Failure::structural(format!("serialization failed: {e}")))
}

fn num(x: f64) -> String {
    // shortest representation that parses back to the same double
    format!("{x:?}")
}

fn run(cli: &Cli) -> CliResult<Report> {
    match &cli.command {
        Command::Check {
            model,
            matrix_class,
        } => {
            let input = parse_model(model)?;
            let data = input.data();
            let warnings = validation_warnings(data, cli.strict)?;
            let mut body = to_value(&validate_srbm(data)?)?;
            if *matrix_class {
                body["r_classes"] = json!({
                    "s_matrix": to_value(&is_s_matrix(data.r())?)?,
                    "p_matrix": is_p_matrix(data.r())?,
                    "m_matrix": is_m_matrix(data.r())?,
                });
            }
            Ok(report("check", data, warnings, body))
        }
        Command::Reduce { model, set } => {
            let input = parse_model(model)?;
            let data = input.data();
            let warnings = validation_warnings(data, cli.strict)?;
            let d = data.dim();
            let mut u = Vec::with_capacity(set.len());
            for &i in set {
                if i == 0 || i > d {
                    return Err(Failure::structural(format!("index {i} out of range 1..={d}")));
                }
                u.push(i - 1);
            }
            u.sort_unstable();
            u.dedup();
            let red = reduce(data, &u)?;
            Ok(report("reduce", data, warnings, to_value(&red)?))
        }
        Command::ProductForm { model } => {
            let input = parse_model(model)?;
            let data = input.data();
            let warnings = validation_warnings(data, cli.strict)?;
            let rep = product_form_report(data)?;
            let header = ["coordinate", "alpha", "lambda", "delta"].map(String::from).to_vec();
            let rows = (0..data.dim())
                .map(|i| {
                    vec![
                        (i + 1).to_string(),
                        num(rep.alpha[i]),
                        rep.lambda[i].map(num).unwrap_or_default(),
                        num(rep.delta[i]),
                    ]
                })
                .collect();
            let mut r = report("product-form", data, warnings, to_value(&rep)?);
            r.table = Some((header, rows));
            Ok(r)
        }
        Command::Decompose {
            model,
            partition,
            search,
        } => {
            let input = parse_model(model)?;
            let data = input.data();
            let warnings = validation_warnings(data, cli.strict)?;
            let reports = if *search {
                find_decompositions(data)?
            } else {
                let p = Partition::parse(data.dim(), partition.as_deref().unwrap_or_default())?;
                vec![check_decomposability(data, &p)?]
            };
            let header = ["partition", "decomposable", "cond1", "cond2", "cond3", "l_block_stable"]
                .map(String::from)
                .to_vec();
            let rows = reports
                .iter()
                .map(|r| {
                    vec![
                        r.partition.to_string(),
                        r.decomposable.to_string(),
                        num(r.cond1_residual),
                        num(r.cond2_residual),
                        num(r.cond3_residual),
                        r.l_block_stable.to_string(),
                    ]
                })
                .collect();
            let body = if *search {
                json!({ "decompositions": to_value(&reports)? })
            } else {
                to_value(&reports[0])?
            };
            let mut r = report("decompose", data, warnings, body);
            r.table = Some((header, rows));
            Ok(r)
        }
        Command::Tandem { model, k } => {
            let input = parse_model(model)?;
            let Input::Tandem(spec, data) = &input else {
                return Err(Failure::structural("tandem expects a file with beta and cv"));
            };
            let warnings = validation_warnings(data, cli.strict)?;
            let d = data.dim();
            let ks: Vec<usize> = match k {
                Some(k) => vec![*k],
                None => (1..d).collect(),
            };
            let mut splits = Vec::new();
            let mut rows = Vec::new();
            for &k in &ks {
                let closed = tandem_decomposability(spec, k)?;
                let p = Partition::new(d, &(0..k).collect::<Vec<_>>())?;
                let general = check_decomposability(data, &p)?;
                rows.push(vec![k.to_string(), closed.to_string(), general.decomposable.to_string()]);
                splits.push(json!({ "k": k, "closed_form": closed, "check": to_value(&general)? }));
            }
            let body = json!({
                "spec": to_value(spec)?,
                "stable": spec.is_stable(),
                "model": to_value(data)?,
                "splits": splits,
            });
            let mut r = report("tandem", data, warnings, body);
            r.table = Some((vec!["k".into(), "closed_form".into(), "check".into()], rows));
            Ok(r)
        }
        Command::Simulate {
            model,
            sim,
            record_samples,
            record_every,
        } => {
            let input = parse_model(model)?;
            let data = input.data();
            let warnings = validation_warnings(data, cli.strict)?;
            refuse_unstable(data, sim.force)?;
            let mut cfg = sim.config();
            if record_samples.is_some() {
                cfg.record_every = Some(record_every.unwrap_or((cfg.steps / 10_000).max(1)));
            }
            let res = simulate(data, &cfg)?;
            if let Some(path) = record_samples {
                write_samples(path, &res.samples)?;
            }
            let header = ["coordinate", "mean", "mean_se", "y_rate", "y_rate_se"]
                .map(String::from)
                .to_vec();
            let rows = (0..data.dim())
                .map(|i| {
                    vec![
                        (i + 1).to_string(),
                        num(res.mean_z[i].value),
                        num(res.mean_z[i].se),
                        num(res.y_rate[i].value),
                        num(res.y_rate[i].se),
                    ]
                })
                .collect();
            let mut r = report("simulate", data, warnings, to_value(&res)?);
            r.table = Some((header, rows));
            Ok(r)
        }
        Command::BarCheck {
            model,
            theta_grid,
            empirical,
            sim,
        } => {
            let input = parse_model(model)?;
            let data = input.data();
            let warnings = validation_warnings(data, cli.strict)?;
            let grid = bar_grid(data, *theta_grid)?;
            let d = data.dim();
            let mut rows = Vec::with_capacity(grid.len());
            if *empirical {
                refuse_unstable(data, sim.force)?;
                let res = simulate(data, &sim.config().with_theta_grid(grid))?;
                for p in empirical_bar_residuals(data, &res)? {
                    rows.push((p.theta, p.residual, p.se));
                }
            } else {
                let pf = product_form_model(data)?;
                for t in grid {
                    let r = bar::bar_residual(data, &pf, &t)?;
                    rows.push((t, r, 0.0));
                }
            }
            let mut header: Vec<String> = (1..=d).map(|i| format!("theta{i}")).collect();
            header.extend(["residual".into(), "se".into()]);
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|(t, r, se)| t.iter().map(|&x| num(x)).chain([num(*r), num(*se)]).collect())
                .collect();
            let body = json!({
                "source": if *empirical { "simulation" } else { "product-form" },
                "points": rows.iter().map(|(t, r, se)| json!({"theta": t, "residual": r, "se": se})).collect::<Vec<_>>(),
            });
            let mut r = report("bar-check", data, warnings, body);
            r.table = Some((header, table));
            r.default_format = Format::Csv;
            Ok(r)
        }
        Command::CrossValidate {
            model,
            partition,
            sim,
        } => {
            let input = parse_model(model)?;
            let data = input.data();
            let warnings = validation_warnings(data, cli.strict)?;
            refuse_unstable(data, sim.force)?;
            let p = Partition::parse(data.dim(), partition)?;
            let rep = cross_validate_reduction(data, &p, &sim.config())?;
            Ok(report("cross-validate", data, warnings, to_value(&rep)?))
        }
    }
}

fn report(command: &'static str, data: &SrbmData, warnings: Vec<String>, body: Value) -> Report {
    Report {
        command,
        hash: model_hash(data),
        warnings,
        body,
        table: None,
        default_format: Format::Json,
    }
}

fn refuse_unstable(data: &SrbmData, force: bool) -> CliResult<()> {
    if force || srbm::reduction::check_stability(data) {
        return Ok(());
    }
    let q = srbm::workload_matrix(data)?;
    let qmu: Vec<f64> = (q * data.mu()).iter().copied().collect();
    Err(Failure::refusal(format!(
        "model is not stable: R⁻¹μ = {qmu:?} must be negative in every coordinate (use --force to simulate anyway)"
    )))
}

/// `n` points per coordinate, `0, −s_i/(n−1), …, −s_i` with `s_i` the grid
/// scale of coordinate `i`.
fn bar_grid(data: &SrbmData, n: usize) -> CliResult<Vec<Vec<f64>>> {
    if n < 2 {
        return Err(Failure::structural("--theta-grid needs at least 2 points per coordinate"));
    }
    let d = data.dim();
    let total = (n as f64).powi(d as i32);
    if total > MAX_GRID_POINTS as f64 {
        return Err(Failure::structural(format!(
            "a grid of {n}^{d} points exceeds the limit of {MAX_GRID_POINTS}"
        )));
    }
    let scale = srbm::simulator::grid_scales(data);
    let mut grid = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; d];
    loop {
        grid.push(
            idx.iter()
                .zip(&scale)
                .map(|(&k, s)| if k == 0 { 0.0 } else { -s * k as f64 / (n - 1) as f64 })
                .collect(),
        );
        let mut pos = d;
        loop {
            if pos == 0 {
                return Ok(grid);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn write_samples(path: &Path, samples: &[(f64, Vec<f64>)]) -> CliResult<()> {
    let io_err = |e: csv::Error| Failure::structural(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    let d = samples.first().map_or(0, |s| s.1.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("z{i}")));
    w.write_record(&header).map_err(io_err)?;
    for (t, z) in samples {
        w.write_record(std::iter::once(num(*t)).chain(z.iter().map(|&x| num(x))))
            .map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Failure::structural(format!("{}: {e}", path.display())))
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<Vec<String>>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&format!("{prefix}/{k}"), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}/{i}"), x, out);
            }
        }
        Value::String(s) => out.push(vec![prefix.to_string(), s.clone()]),
        other => out.push(vec![prefix.to_string(), other.to_string()]),
    }
}

fn render(rep: Report, format: Format) -> CliResult<Vec<u8>> {
    match format {
        Format::Json => {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": rep.command,
                "model_hash": rep.hash,
                "warnings": rep.warnings,
                "report": rep.body,
            });
            let mut s = serde_json::to_vec_pretty(&doc)
                .map_err(|e| Failure::structural(format!("serialization failed: {e}")))?;
            s.push(b'\n');
            Ok(s)
        }
        Format::Csv => {
            let (header, rows) = rep.table.unwrap_or_else(|| {
                let mut rows = Vec::new();
                flatten("", &rep.body, &mut rows);
                (vec!["field".into(), "value".into()], rows)
            });
            let mut w = csv::Writer::from_writer(Vec::new());
            let err = |e: csv::Error| Failure::structural(format!("csv output failed: {e}"));
            w.write_record(&header).map_err(err)?;
            for r in rows {
                w.write_record(&r).map_err(err)?;
            }
            w.into_inner()
                .map_err(|e| Failure::structural(format!("csv output failed: {e}")))
        }
    }
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("SRBM_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::structural(format!("SRBM_THREADS={v} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::structural(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| {
        let rep = run(&cli)?;
        for w in &rep.warnings {
            eprintln!("warning: {w}");
        }
        let format = cli.output.unwrap_or(rep.default_format);
        let bytes = render(rep, format)?;
        match &cli.out {
            Some(p) => fs::write(p, bytes)
                .map_err(|e| Failure::structural(format!("cannot write {}: {e}", p.display()))),
            None => io::stdout()
                .write_all(&bytes)
                .map_err(|e| Failure::structural(e.to_string())),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
