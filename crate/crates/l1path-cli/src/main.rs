//! `l1path` — exact L1/piecewise-linear regularization paths from the
//! command line.
//!
//! Three subcommands:
//!
//! - `run` ingests a CSV, builds one of the model presets, computes the
//!   full path σ² ↦ û(σ²) (or ŷ(σ²)), and writes it as JSON. Knot
//!   locations are reported both in σ² (the `knots` array) and in the
//!   sibling `knots_s2` array holding s² = 2σ², the weight the penalty
//!   carries when the quadratic part is written without the factor ½.
//!   `--plot` additionally samples the path on a σ² grid into a TSV.
//! - `check` re-verifies a stored path against the data it came from:
//!   structural validity, continuity across knots, per-interval
//!   affinity, agreement of the stored coefficients with freshly
//!   recomputed ones, and first-order optimality at interval midpoints.
//!   One pass/fail line per criterion; any failure exits 1.
//! - `eval` prints the path values at one σ².
//!
//! Exit codes: 0 success, 1 computation or check failure, 2 usage error
//! (bad flags, unreadable/ill-formed input files).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};

use l1path::nalgebra::DMatrix;
use l1path::oracle::{kkt_residual_input, kkt_residual_output};
use l1path::parametric::{param_bffd, param_ffbdd};
use l1path::path::{eval_path, path_bffd, path_ffbdd, PathPiece, RegPath};
use l1path::plcost::SegmentedCost;
use l1path::ssm::{RegSide, StateSpaceModel};
use l1path::tol;

/// Midpoint first-order optimality tolerance used by `check`.
const CHECK_KKT_TOL: f64 = 1e-6;
/// Relative tolerance for stored-vs-recomputed coefficients in `check`.
const CHECK_COEFF_RTOL: f64 = 1e-9;
/// Relative tolerance on second differences in the affinity check.
const CHECK_AFFINE_RTOL: f64 = 1e-9;
/// Number of log-spaced samples in the default plot grid.
const PLOT_GRID_POINTS: usize = 200;
/// Most path intervals examined by the midpoint checks.
const CHECK_MAX_PIECES: usize = 64;

#[derive(Parser)]
#[command(
    name = "l1path",
    version,
    about = "Exact L1/piecewise-linear regularization paths for linear state space models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute a full regularization path and write it as JSON.
    Run(RunArgs),
    /// Re-verify a stored path against the data it was computed from.
    Check(CheckArgs),
    /// Evaluate a stored path at one sigma2.
    Eval(EvalArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Preset {
    /// Second-order difference penalty on a single series (input side).
    TrendFilter,
    /// Robust level smoother: L1 data deviations (output side).
    MedianSmoother,
    /// L1-penalized least squares on a feature matrix (input side).
    Lasso,
    /// Epsilon-insensitive regression on a feature matrix (input side).
    Svr,
    /// Feature-matrix model with a user-supplied cost (input side).
    Custom,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::TrendFilter => "trend_filter",
            Preset::MedianSmoother => "median_smoother",
            Preset::Lasso => "lasso",
            Preset::Svr => "svr",
            Preset::Custom => "custom",
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Model preset.
    #[arg(long, value_enum)]
    preset: Preset,
    /// Input CSV: one column for the series presets (trend_filter,
    /// median_smoother); K feature columns plus a final response column
    /// for the matrix presets (lasso, svr, custom). A first row whose
    /// cells are all non-numeric is skipped as a header.
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    /// Initial-level weight for median_smoother (default 1e-3).
    #[arg(long)]
    q0: Option<f64>,
    /// Cost spec for svr/custom: inline JSON (or a path to a JSON file)
    /// of the form {"breakpoints": [...], "slopes": [...]}.
    #[arg(long, value_name = "JSON")]
    cost: Option<String>,
    /// Output file for the path JSON.
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
    /// Optional TSV with the path sampled over a sigma2 grid.
    #[arg(long, value_name = "TSV")]
    plot: Option<PathBuf>,
    /// Explicit sigma2 sample points for --plot (comma separated).
    /// Default: 200 log-spaced points from (first positive knot)/10 to
    /// 2 x (largest finite knot), plus every finite knot.
    #[arg(long, value_delimiter = ',', value_name = "SIGMA2,...")]
    grid: Option<Vec<f64>>,
}

#[derive(Args)]
struct CheckArgs {
    /// Stored path JSON produced by `run`.
    #[arg(long, value_name = "JSON")]
    path: PathBuf,
    /// The CSV the path was computed from.
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    /// The preset the path was computed with.
    #[arg(long, value_enum)]
    preset: Preset,
    /// Initial-level weight used at run time (median_smoother only).
    #[arg(long)]
    q0: Option<f64>,
    /// Cost spec used at run time (svr/custom only).
    #[arg(long, value_name = "JSON")]
    cost: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Stored path JSON produced by `run`.
    #[arg(long, value_name = "JSON")]
    path: PathBuf,
    /// Where to evaluate; a nonnegative number or "inf".
    #[arg(long)]
    sigma2: String,
}

/// Error carrying the process exit code: 1 for computation/check
/// failures, 2 for usage problems (flags, unreadable inputs).
struct CliError {
    code: u8,
    err: anyhow::Error,
}

impl CliError {
    fn usage(err: anyhow::Error) -> Self {
        CliError { code: 2, err }
    }
    fn failure(err: anyhow::Error) -> Self {
        CliError { code: 1, err }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Check(args) => cmd_check(args),
        Cmd::Eval(args) => cmd_eval(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e.err);
            ExitCode::from(e.code)
        }
    }
}

// ---------------------------------------------------------------------
// Input ingestion
// ---------------------------------------------------------------------

/// Parsed CSV payload: a single series, or features plus response.
enum CsvData {
    Series(Vec<f64>),
    Matrix {
        features: DMatrix<f64>,
        response: Vec<f64>,
    },
}

/// Read a CSV of finite numbers. A first row whose cells are all
/// non-numeric is treated as a header and skipped; any other
/// non-numeric, blank, or non-finite cell is an error naming its
/// 1-based row and column. Width 1 yields a series; width K+1 yields a
/// feature matrix whose last column is the response.
fn ingest_csv(path: &Path) -> CliResult<CsvData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::usage(anyhow!("cannot open {}: {e}", path.display())))?;

    let mut raw: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            CliError::usage(anyhow!("{}: CSV error near row {}: {e}", path.display(), i + 1))
        })?;
        raw.push(record.iter().map(str::to_string).collect());
    }

    let mut start = 0;
    if raw.len() > 1 && raw[0].iter().all(|cell| cell.parse::<f64>().is_err()) {
        start = 1;
    }
    if raw.len() <= start {
        return Err(CliError::usage(anyhow!("{}: no data rows", path.display())));
    }

    let width = raw[start].len();
    if width == 0 {
        return Err(CliError::usage(anyhow!("{}: empty rows", path.display())));
    }
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(raw.len() - start);
    for (offset, row) in raw[start..].iter().enumerate() {
        let rowno = start + offset + 1;
        if row.len() != width {
            return Err(CliError::usage(anyhow!(
                "{}: row {} has {} cells, expected {}",
                path.display(),
                rowno,
                row.len(),
                width
            )));
        }
        let mut values = Vec::with_capacity(width);
        for (j, cell) in row.iter().enumerate() {
            if cell.is_empty() {
                return Err(CliError::usage(anyhow!(
                    "{}: blank cell at row {}, column {}",
                    path.display(),
                    rowno,
                    j + 1
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                CliError::usage(anyhow!(
                    "{}: cannot parse {:?} at row {}, column {}",
                    path.display(),
                    cell,
                    rowno,
                    j + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::usage(anyhow!(
                    "{}: non-finite value {:?} at row {}, column {}",
                    path.display(),
                    cell,
                    rowno,
                    j + 1
                )));
            }
            values.push(v);
        }
        table.push(values);
    }

    if width == 1 {
        Ok(CsvData::Series(table.into_iter().map(|r| r[0]).collect()))
    } else {
        let rows = table.len();
        let cols = width - 1;
        let features = DMatrix::from_fn(rows, cols, |i, j| table[i][j]);
        let response = table.iter().map(|r| r[cols]).collect();
        Ok(CsvData::Matrix { features, response })
    }
}

/// Parse a cost spec: inline JSON or a path to a JSON file, of the form
/// `{"breakpoints": [...], "slopes": [...]}`.
fn parse_cost(text: &str) -> CliResult<SegmentedCost> {
    let body = if Path::new(text).exists() {
        fs::read_to_string(text)
            .map_err(|e| CliError::usage(anyhow!("cannot read cost file {text}: {e}")))?
    } else {
        text.to_string()
    };
    let value: serde_json::Value = serde_json::from_str(&body)
        .map_err(|e| CliError::usage(anyhow!("cost spec is not valid JSON: {e}")))?;
    let numbers = |key: &str| -> CliResult<Vec<f64>> {
        value
            .get(key)
            .and_then(serde_json::Value::as_array)
            .ok_or_else(|| CliError::usage(anyhow!("cost spec needs a {key:?} array")))?
            .iter()
            .map(|x| {
                x.as_f64().ok_or_else(|| {
                    CliError::usage(anyhow!("cost spec {key:?} entries must be finite numbers"))
                })
            })
            .collect()
    };
    let breakpoints = numbers("breakpoints")?;
    let slopes = numbers("slopes")?;
    SegmentedCost::make_custom(&breakpoints, &slopes)
        .map_err(|e| CliError::usage(anyhow!("invalid cost spec: {e}")))
}

/// Reject flag combinations that do not belong to the preset.
fn check_flags(preset: Preset, has_q0: bool, has_cost: bool) -> CliResult<()> {
    if has_q0 && preset != Preset::MedianSmoother {
        return Err(CliError::usage(anyhow!(
            "--q0 only applies to the median_smoother preset"
        )));
    }
    match preset {
        Preset::Custom if !has_cost => {
            Err(CliError::usage(anyhow!("the custom preset requires --cost")))
        }
        Preset::TrendFilter | Preset::MedianSmoother | Preset::Lasso if has_cost => Err(
            CliError::usage(anyhow!("--cost only applies to the svr and custom presets")),
        ),
        _ => Ok(()),
    }
}

/// Build the preset's model from parsed CSV data.
fn build_model(
    preset: Preset,
    data: CsvData,
    q0: Option<f64>,
    cost: Option<SegmentedCost>,
) -> CliResult<StateSpaceModel> {
    let series = |data: CsvData| -> CliResult<Vec<f64>> {
        match data {
            CsvData::Series(y) => Ok(y),
            CsvData::Matrix { .. } => Err(CliError::usage(anyhow!(
                "the {} preset expects a single-column series",
                preset.name()
            ))),
        }
    };
    let matrix = |data: CsvData| -> CliResult<(DMatrix<f64>, Vec<f64>)> {
        match data {
            CsvData::Matrix { features, response } => Ok((features, response)),
            CsvData::Series(_) => Err(CliError::usage(anyhow!(
                "the {} preset expects feature columns plus a final response column",
                preset.name()
            ))),
        }
    };
    let built = match preset {
        Preset::TrendFilter => StateSpaceModel::trend_filter_model(&series(data)?),
        Preset::MedianSmoother => {
            StateSpaceModel::median_smoother_model(&series(data)?, q0.unwrap_or(1e-3))
        }
        Preset::Lasso => {
            let (features, response) = matrix(data)?;
            StateSpaceModel::lasso_model(&features, &response)
        }
        Preset::Svr => {
            let (features, response) = matrix(data)?;
            let cost = match cost {
                Some(c) => c,
                None => SegmentedCost::make_vapnik(-1.0, 1.0)
                    .expect("default insensitive cost is well formed"),
            };
            let costs = vec![cost; features.ncols()];
            StateSpaceModel::input_matrix_model(&features, &response, costs)
        }
        Preset::Custom => {
            let (features, response) = matrix(data)?;
            let cost = cost.expect("checked by check_flags");
            let costs = vec![cost; features.ncols()];
            StateSpaceModel::input_matrix_model(&features, &response, costs)
        }
    };
    built.map_err(|e| CliError::usage(anyhow!("cannot build the {} model: {e}", preset.name())))
}

// ---------------------------------------------------------------------
// run
// ---------------------------------------------------------------------

/// A validated `run` invocation.
struct RunConfig {
    preset: Preset,
    data_path: PathBuf,
    cost_spec: Option<SegmentedCost>,
    q0: Option<f64>,
    sigma2_grid: Option<Vec<f64>>,
    output_path: PathBuf,
    plot_grid: Option<PathBuf>,
}

fn run_config(args: RunArgs) -> CliResult<RunConfig> {
    check_flags(args.preset, args.q0.is_some(), args.cost.is_some())?;
    let cost_spec = match &args.cost {
        Some(text) => Some(parse_cost(text)?),
        None => None,
    };
    if args.grid.is_some() && args.plot.is_none() {
        return Err(CliError::usage(anyhow!("--grid has no effect without --plot")));
    }
    if let Some(grid) = &args.grid {
        if grid.is_empty() || grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CliError::usage(anyhow!(
                "--grid values must be finite and nonnegative"
            )));
        }
    }
    Ok(RunConfig {
        preset: args.preset,
        data_path: args.data,
        cost_spec,
        q0: args.q0,
        sigma2_grid: args.grid,
        output_path: args.out,
        plot_grid: args.plot,
    })
}

fn cmd_run(args: RunArgs) -> CliResult<ExitCode> {
    let config = run_config(args)?;
    let data = ingest_csv(&config.data_path)?;
    let model = build_model(config.preset, data, config.q0, config.cost_spec.clone())?;

    let path = match model.side {
        RegSide::Input => path_bffd(&model),
        RegSide::Output => path_ffbdd(&model),
    }
    .map_err(|e| CliError::failure(anyhow!("path computation failed: {e}")))?;
    path.validate()
        .map_err(|e| CliError::failure(anyhow!("computed path failed self-validation: {e}")))?;

    let text = annotate_s2(&path).map_err(CliError::failure)?;
    fs::write(&config.output_path, text).map_err(|e| {
        CliError::usage(anyhow!("cannot write {}: {e}", config.output_path.display()))
    })?;

    let transition_knots = path
        .knots
        .iter()
        .filter(|k| k.is_finite() && **k > 0.0)
        .count();
    let sigma2_max = path
        .knots
        .iter()
        .copied()
        .filter(|k| k.is_finite())
        .fold(0.0_f64, f64::max);
    println!(
        "knots: {transition_knots}; sigma2_max = {sigma2_max}; s2_max = {}",
        2.0 * sigma2_max
    );
    println!("path written to {}", config.output_path.display());

    if let Some(plot) = &config.plot_grid {
        let grid = match &config.sigma2_grid {
            Some(explicit) => {
                let mut g = explicit.clone();
                g.sort_by(f64::total_cmp);
                g.dedup();
                g
            }
            None => default_grid(&path),
        };
        write_plot(plot, &path, &grid)?;
        println!("plot samples ({}) written to {}", grid.len(), plot.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// Serialize the path and insert the sibling `knots_s2` array
/// (s² = 2σ² per knot). The result still parses as a plain path.
fn annotate_s2(path: &RegPath) -> Result<String, anyhow::Error> {
    let mut value: serde_json::Value = serde_json::from_str(&path.to_json())?;
    let knots_s2: Vec<serde_json::Value> = path
        .knots
        .iter()
        .map(|&k| {
            if k.is_finite() {
                serde_json::json!(2.0 * k)
            } else {
                serde_json::json!("inf")
            }
        })
        .collect();
    value
        .as_object_mut()
        .ok_or_else(|| anyhow!("path JSON is not an object"))?
        .insert("knots_s2".to_string(), serde_json::Value::Array(knots_s2));
    Ok(serde_json::to_string_pretty(&value)?)
}

/// Default plot grid: log-spaced from (first positive knot)/10 to
/// 2 x (largest finite knot), plus every finite knot; a fixed decade
/// span when the path has no positive finite knot.
fn default_grid(path: &RegPath) -> Vec<f64> {
    let finite: Vec<f64> = path.knots.iter().copied().filter(|k| k.is_finite()).collect();
    let positive: Vec<f64> = finite.iter().copied().filter(|&k| k > 0.0).collect();
    let mut grid = match (positive.first(), positive.last()) {
        (Some(&lo), Some(&hi)) => log_space(lo / 10.0, 2.0 * hi, PLOT_GRID_POINTS),
        _ => log_space(1e-2, 1e2, PLOT_GRID_POINTS),
    };
    grid.extend(finite);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn write_plot(file: &Path, path: &RegPath, grid: &[f64]) -> CliResult<()> {
    let tag = match path.side {
        RegSide::Input => "u",
        RegSide::Output => "y",
    };
    let mut text = String::from("sigma2");
    for n in 1..=path.steps {
        let _ = write!(text, "\t{tag}{n}");
    }
    text.push('\n');
    for &sigma2 in grid {
        let values = eval_path(path, sigma2);
        let _ = write!(text, "{sigma2}");
        for v in values {
            let _ = write!(text, "\t{v}");
        }
        text.push('\n');
    }
    fs::write(file, text)
        .map_err(|e| CliError::usage(anyhow!("cannot write {}: {e}", file.display())))
}

// ---------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------

fn cmd_eval(args: EvalArgs) -> CliResult<ExitCode> {
    let text = fs::read_to_string(&args.path)
        .map_err(|e| CliError::usage(anyhow!("cannot read {}: {e}", args.path.display())))?;
    let path = RegPath::from_json(&text)
        .map_err(|e| CliError::failure(anyhow!("invalid path file: {e}")))?;
    let sigma2 = parse_sigma2(&args.sigma2)?;
    let values = eval_path(&path, sigma2);
    let line: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
    println!("{}", line.join("\t"));
    Ok(ExitCode::SUCCESS)
}

fn parse_sigma2(text: &str) -> CliResult<f64> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| CliError::usage(anyhow!("--sigma2 must be a number or \"inf\", got {text:?}")))?;
    if v.is_nan() || v < 0.0 {
        return Err(CliError::usage(anyhow!("--sigma2 must be nonnegative")));
    }
    Ok(v)
}

// ---------------------------------------------------------------------
// check
// ---------------------------------------------------------------------

fn cmd_check(args: CheckArgs) -> CliResult<ExitCode> {
    check_flags(args.preset, args.q0.is_some(), args.cost.is_some())?;
    let cost = match &args.cost {
        Some(text) => Some(parse_cost(text)?),
        None => None,
    };
    let data = ingest_csv(&args.data)?;
    let model = build_model(args.preset, data, args.q0, cost)?;
    let text = fs::read_to_string(&args.path)
        .map_err(|e| CliError::usage(anyhow!("cannot read {}: {e}", args.path.display())))?;

    const DEPENDENT: [&str; 4] = ["continuity", "affinity", "coefficients", "stationarity"];

    let path = match RegPath::from_json(&text) {
        Ok(p) => p,
        Err(e) => {
            println!("check structure: FAIL - {e}");
            for name in DEPENDENT {
                println!("check {name}: skipped (structure failed)");
            }
            return Ok(ExitCode::from(1));
        }
    };
    if let Err(why) = check_structure(&model, &path) {
        println!("check structure: FAIL - {why}");
        for name in DEPENDENT {
            println!("check {name}: skipped (structure failed)");
        }
        return Ok(ExitCode::from(1));
    }
    println!("check structure: pass");

    let mut failed = false;
    let results = [
        ("continuity", check_continuity(&path)),
        ("affinity", check_affinity(&path)),
        ("coefficients", check_coefficients(&model, &path)),
        ("stationarity", check_stationarity(&model, &path)),
    ];
    for (name, result) in results {
        match result {
            Ok(()) => println!("check {name}: pass"),
            Err(why) => {
                failed = true;
                println!("check {name}: FAIL - {why}");
            }
        }
    }
    Ok(if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

/// Structural validity plus agreement with the model the data defines.
fn check_structure(model: &StateSpaceModel, path: &RegPath) -> Result<(), String> {
    path.validate().map_err(|e| e.to_string())?;
    if path.side != model.side {
        return Err(format!(
            "path side {:?} does not match the preset's side {:?}",
            path.side, model.side
        ));
    }
    if path.steps != model.steps {
        return Err(format!(
            "path has {} coordinates but the data defines {}",
            path.steps, model.steps
        ));
    }
    for (i, piece) in path.pieces.iter().enumerate() {
        for (n, &seg) in piece.active.iter().enumerate() {
            let limit = model.costs[n].num_segments();
            if seg >= limit {
                return Err(format!(
                    "piece {i}, coordinate {n}: segment index {seg} out of range (cost has {limit})"
                ));
            }
        }
    }
    Ok(())
}

/// Values must agree from both sides of every interior knot.
fn check_continuity(path: &RegPath) -> Result<(), String> {
    for i in 0..path.pieces.len().saturating_sub(1) {
        let k = path.knots[i + 1];
        let left = &path.pieces[i];
        let right = &path.pieces[i + 1];
        for n in 0..path.steps {
            let a = left.coeffs[n].eval(k);
            let b = right.coeffs[n].eval(k);
            let scale = 1.0 + a.abs().max(b.abs());
            if (a - b).abs() > tol::knot_eps(k) * scale {
                return Err(format!(
                    "coordinate {} jumps from {a} to {b} across the knot at sigma2 = {k}",
                    n + 1
                ));
            }
        }
    }
    Ok(())
}

/// Second differences of equally spaced samples inside each interval
/// must vanish.
fn check_affinity(path: &RegPath) -> Result<(), String> {
    for (i, piece) in path.pieces.iter().enumerate() {
        let lo = piece.lo;
        let hi = if piece.hi.is_finite() {
            piece.hi
        } else {
            lo + 2.0 * (1.0 + lo)
        };
        if !(hi > lo) {
            return Err(format!("piece {i} has an empty interval [{lo}, {})", piece.hi));
        }
        // Strictly interior, equally spaced: fractions 1/5 .. 4/5.
        let samples: Vec<Vec<f64>> = (1..=4)
            .map(|j| eval_path(path, lo + (hi - lo) * j as f64 / 5.0))
            .collect();
        for n in 0..path.steps {
            let v: Vec<f64> = samples.iter().map(|s| s[n]).collect();
            let scale = 1.0 + v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
            for w in v.windows(3) {
                let second = w[0] - 2.0 * w[1] + w[2];
                if second.abs() > CHECK_AFFINE_RTOL * scale {
                    return Err(format!(
                        "coordinate {} bends inside piece {i} (second difference {second:.3e})",
                        n + 1
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Up to [`CHECK_MAX_PIECES`] evenly spread interval indices, always
/// including the last.
fn sampled_pieces(path: &RegPath) -> Vec<usize> {
    let n = path.pieces.len();
    if n <= CHECK_MAX_PIECES {
        return (0..n).collect();
    }
    let stride = n.div_ceil(CHECK_MAX_PIECES);
    let mut picks: Vec<usize> = (0..n).step_by(stride).collect();
    if *picks.last().unwrap() != n - 1 {
        picks.push(n - 1);
    }
    picks
}

fn piece_mid(piece: &PathPiece) -> f64 {
    if piece.hi.is_finite() {
        0.5 * (piece.lo + piece.hi)
    } else {
        piece.lo + 1.0
    }
}

/// Stored interval coefficients must reproduce a fresh parametric solve
/// of the interval's segment assignment.
fn check_coefficients(model: &StateSpaceModel, path: &RegPath) -> Result<(), String> {
    for i in sampled_pieces(path) {
        let piece = &path.pieces[i];
        let mid = piece_mid(piece);
        let fresh: Vec<f64> = match model.side {
            RegSide::Input => param_bffd(model, &piece.active)
                .map_err(|e| format!("piece {i}: recompute failed: {e}"))?
                .u
                .iter()
                .map(|a| a.eval(mid))
                .collect(),
            RegSide::Output => param_ffbdd(model, &piece.active)
                .map_err(|e| format!("piece {i}: recompute failed: {e}"))?
                .y
                .iter()
                .map(|a| a.eval(mid))
                .collect(),
        };
        for (n, (stored_coeff, fresh_value)) in piece.coeffs.iter().zip(&fresh).enumerate() {
            let stored = stored_coeff.eval(mid);
            if (stored - fresh_value).abs() > CHECK_COEFF_RTOL * (1.0 + fresh_value.abs()) {
                return Err(format!(
                    "piece {i}, coordinate {}: stored {stored} vs recomputed {fresh_value} at sigma2 = {mid}",
                    n + 1
                ));
            }
        }
    }
    Ok(())
}

/// First-order optimality at interval midpoints.
fn check_stationarity(model: &StateSpaceModel, path: &RegPath) -> Result<(), String> {
    for i in sampled_pieces(path) {
        let piece = &path.pieces[i];
        let mid = piece_mid(piece);
        let residual = match model.side {
            RegSide::Input => {
                let u = eval_path(path, mid);
                kkt_residual_input(model, mid, &u)
            }
            RegSide::Output => {
                let out = param_ffbdd(model, &piece.active)
                    .map_err(|e| format!("piece {i}: recompute failed: {e}"))?
                    .eval(mid);
                kkt_residual_output(model, mid, &out.x0_posterior, &out.u)
            }
        }
        .map_err(|e| format!("piece {i}: residual computation failed: {e}"))?;
        if residual > CHECK_KKT_TOL {
            return Err(format!(
                "piece {i}: first-order residual {residual:.3e} at sigma2 = {mid}"
            ));
        }
    }
    Ok(())
}
