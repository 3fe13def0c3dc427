use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use sdami::basis::GroupId;
use sdami::config::RunConfig;
use sdami::dataget::{
    case_regression, load_csv, simulate_case, simulate_chip, Dataset, ResponseColumn, TruthSpec,
    SIM_RANGE,
};
use sdami::footprint::{constancy_test, default_grid, estimate_footprint, CatalogFunction};
use sdami::grouplasso::CvTable;
use sdami::metrics::{
    regression_metrics, replicate, selection_score, BenchmarkSpec, DataSource, Method,
};
use sdami::pipeline::{fit, screen, screen_and_partition, Grid, SdamiModel};
use sdami::plot::{heatmap, line_plot};
use sdami::{ErrorKind, SdamiError};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "sdami",
    version,
    about = "Sparse deep additive models with interactions"
)]
struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true, env = "SDAMI_CONFIG")]
    config: Option<PathBuf>,

    /// Master seed (overrides the configuration's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,

    /// Response column: a header name, a 0-based index, or `last`.
    #[arg(long, default_value = "last")]
    response: String,
}

#[derive(Args, Debug)]
struct SourceArgs {
    /// Simulation case 1-6.
    #[arg(long)]
    case: Option<u32>,

    /// Use the chip-lifetime surrogate instead of a simulation case.
    #[arg(long, conflicts_with = "case")]
    chip: bool,

    /// Number of pure-noise columns appended to the chip inputs.
    #[arg(long, default_value_t = 21)]
    noise_features: usize,

    /// Number of rows.
    #[arg(long)]
    n: Option<usize>,

    /// Number of input columns.
    #[arg(long)]
    k: Option<usize>,

    /// Noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset CSV and its truth sidecar.
    Simulate {
        #[command(flatten)]
        source: SourceArgs,

        /// Dataset CSV.
        #[arg(short, long)]
        output: PathBuf,

        /// Truth sidecar path (default: `<output stem>.truth.json`).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Additive screening: Cp table and screened set.
    Screen {
        #[command(flatten)]
        data: DataArgs,

        /// Cp table CSV.
        #[arg(long)]
        table: PathBuf,

        /// Screened set JSON.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Screening plus group-lasso effect partition.
    Partition {
        #[command(flatten)]
        data: DataArgs,

        /// Cross-validation table CSV.
        #[arg(long)]
        table: PathBuf,

        /// Partition JSON.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Full three-stage fit.
    Fit {
        #[command(flatten)]
        data: DataArgs,

        /// Model JSON.
        #[arg(long)]
        model: PathBuf,

        /// Fit report JSON.
        #[arg(long)]
        report: PathBuf,
    },
    /// Predictions of a saved model.
    Predict {
        #[command(flatten)]
        data: DataArgs,

        /// Model JSON.
        #[arg(long)]
        model: PathBuf,

        /// Predictions CSV.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Prediction metrics, and selection scores against a truth sidecar.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,

        /// Model JSON.
        #[arg(long)]
        model: PathBuf,

        /// Truth sidecar JSON.
        #[arg(long)]
        truth: Option<PathBuf>,

        /// Metrics JSON.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Replicated comparison of methods on simulated data.
    Benchmark {
        #[command(flatten)]
        source: SourceArgs,

        /// Test rows per replicate.
        #[arg(long)]
        n_test: Option<usize>,

        /// Number of replicates.
        #[arg(long)]
        reps: Option<usize>,

        /// Comma-separated: sdami, sdami_main, lasso, dnn, fspam.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,

        /// Summary CSV.
        #[arg(short, long)]
        output: PathBuf,

        /// Full summary JSON with per-replicate results and timings.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Marginal footprint of a catalog function and its constancy verdict.
    Footprint {
        /// One of f1, f2, f3, f4, f5, xor, bilinear.
        #[arg(long)]
        function: String,

        /// 1-based input whose footprint is estimated.
        #[arg(long, default_value_t = 1)]
        variable: usize,

        /// Monte Carlo draws per grid point.
        #[arg(long)]
        n_mc: Option<usize>,

        /// Grid points over the input range.
        #[arg(long)]
        grid_points: Option<usize>,

        /// Constancy score threshold.
        #[arg(long)]
        threshold: Option<f64>,

        /// Footprint CSV.
        #[arg(short, long)]
        output: PathBuf,

        /// Verdict JSON.
        #[arg(long)]
        verdict: Option<PathBuf>,
    },
    /// SVG curves for main effects and heatmaps for interactions.
    Plot {
        /// Model JSON.
        #[arg(long)]
        model: PathBuf,

        /// Directory for the SVG files.
        #[arg(long)]
        out_dir: PathBuf,

        /// Overlay the true component of this simulation case.
        #[arg(long)]
        case: Option<u32>,

        /// Grid points per curve.
        #[arg(long, default_value_t = 101)]
        points: usize,

        /// Grid points per heatmap axis.
        #[arg(long, default_value_t = 41)]
        surface_points: usize,

        /// Lower end of the plotted range.
        #[arg(long, default_value_t = SIM_RANGE.0, allow_negative_numbers = true)]
        low: f64,

        /// Upper end of the plotted range.
        #[arg(long, default_value_t = SIM_RANGE.1, allow_negative_numbers = true)]
        high: f64,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(SdamiError),
}

impl From<SdamiError> for CliError {
    fn from(e: SdamiError) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(SdamiError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            match e.kind() {
                ErrorKind::Data => ExitCode::from(EXIT_DATA),
                ErrorKind::Numerical => ExitCode::from(EXIT_NUMERICAL),
            }
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Simulate {
            source,
            output,
            truth,
        } => cmd_simulate(cfg, &source, &output, truth),
        Command::Screen {
            data,
            table,
            output,
        } => cmd_screen(&cfg, &data, &table, &output),
        Command::Partition {
            data,
            table,
            output,
        } => cmd_partition(&cfg, &data, &table, &output),
        Command::Fit {
            data,
            model,
            report,
        } => cmd_fit(&cfg, &data, &model, &report),
        Command::Predict {
            data,
            model,
            output,
        } => cmd_predict(&data, &model, &output),
        Command::Evaluate {
            data,
            model,
            truth,
            output,
        } => cmd_evaluate(&data, &model, truth.as_deref(), &output),
        Command::Benchmark {
            source,
            n_test,
            reps,
            methods,
            output,
            json,
        } => cmd_benchmark(
            cfg,
            &source,
            n_test,
            reps,
            methods,
            &output,
            json.as_deref(),
        ),
        Command::Footprint {
            function,
            variable,
            n_mc,
            grid_points,
            threshold,
            output,
            verdict,
        } => cmd_footprint(
            cfg,
            &function,
            variable,
            n_mc,
            grid_points,
            threshold,
            &output,
            verdict.as_deref(),
        ),
        Command::Plot {
            model,
            out_dir,
            case,
            points,
            surface_points,
            low,
            high,
        } => cmd_plot(&model, &out_dir, case, points, surface_points, (low, high)),
    }
}

// ---- output helpers ----

fn provenance_line(hash: &str, seed: u64) -> String {
    format!("# config_hash={hash} seed={seed}")
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// CSV body preceded by the provenance comment line.
fn write_csv_with<F>(path: &Path, hash: &str, seed: u64, body: F) -> CliResult<()>
where
    F: FnOnce(&mut Vec<u8>) -> sdami::Result<()>,
{
    let mut buf = Vec::new();
    writeln!(buf, "{}", provenance_line(hash, seed)).map_err(|e| io_err(path, e))?;
    body(&mut buf)?;
    write_file(path, &buf)
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(SdamiError::from)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn one_based(set: impl IntoIterator<Item = usize>) -> Vec<usize> {
    set.into_iter().map(|j| j + 1).collect()
}

fn truth_json(t: &TruthSpec) -> Value {
    let inter: Vec<Vec<usize>> = t
        .interaction_groups
        .iter()
        .map(|g| one_based(g.iter().copied()))
        .collect();
    json!({
        "main": one_based(t.main_set.iter().copied()),
        "interactions": inter,
        "sigma": t.sigma,
        "case_id": t.case_id,
    })
}

/// Inverse of [`truth_json`]; provenance keys are ignored.
fn parse_truth(path: &Path) -> CliResult<TruthSpec> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(SdamiError::from)?;
    let bad = |what: &str| {
        CliError::Core(SdamiError::InvalidArgument(format!(
            "truth file {}: {what}",
            path.display()
        )))
    };
    let index_set = |arr: &Value| -> CliResult<BTreeSet<usize>> {
        arr.as_array()
            .ok_or_else(|| bad("expected an array of 1-based indices"))?
            .iter()
            .map(|x| match x.as_u64() {
                Some(j) if j >= 1 => Ok(j as usize - 1),
                _ => Err(bad("indices must be integers >= 1")),
            })
            .collect()
    };
    let main_set = index_set(v.get("main").ok_or_else(|| bad("missing `main`"))?)?;
    let interaction_groups = v
        .get("interactions")
        .and_then(|a| a.as_array())
        .ok_or_else(|| bad("missing `interactions`"))?
        .iter()
        .map(index_set)
        .collect::<CliResult<Vec<_>>>()?;
    Ok(TruthSpec {
        main_set,
        interaction_groups,
        sigma: v.get("sigma").and_then(|s| s.as_f64()).unwrap_or(f64::NAN),
        case_id: v.get("case_id").and_then(|c| c.as_u64()).map(|c| c as u32),
    })
}

fn load_data(args: &DataArgs) -> CliResult<Dataset> {
    let response: ResponseColumn = args.response.parse()?;
    Ok(load_csv(&args.data, &response, true)?)
}

fn apply_source(cfg: &mut RunConfig, source: &SourceArgs) {
    if let Some(c) = source.case {
        cfg.simulation.case = c;
    }
    if let Some(n) = source.n {
        cfg.simulation.n = n;
    }
    if let Some(k) = source.k {
        cfg.simulation.k = k;
    }
    if let Some(s) = source.sigma {
        cfg.simulation.sigma = s;
    }
}

fn data_source(cfg: &RunConfig, source: &SourceArgs) -> DataSource {
    if source.chip {
        DataSource::Chip {
            noise_features: source.noise_features,
        }
    } else {
        DataSource::Case {
            case: cfg.simulation.case,
            k: cfg.simulation.k,
            sigma: cfg.simulation.sigma,
        }
    }
}

// ---- subcommands ----

fn cmd_simulate(
    mut cfg: RunConfig,
    source: &SourceArgs,
    output: &Path,
    truth: Option<PathBuf>,
) -> CliResult<()> {
    apply_source(&mut cfg, source);
    cfg.validate()?;
    let hash = cfg.hash();
    let sim = &cfg.simulation;
    let data = if source.chip {
        simulate_chip(sim.n, source.noise_features, cfg.seed)?
    } else {
        simulate_case(sim.case, sim.n, sim.k, sim.sigma, cfg.seed)?
    };
    let mut buf = Vec::new();
    data.write_csv(&mut buf, Some(&provenance_line(&hash, cfg.seed)[2..]))?;
    write_file(output, &buf)?;
    let truth_path = truth.unwrap_or_else(|| output.with_extension("truth.json"));
    if let Some(t) = &data.truth {
        let mut v = truth_json(t);
        v["config_hash"] = json!(hash);
        v["seed"] = json!(cfg.seed);
        write_json(&truth_path, &v)?;
    }
    log::info!(
        "wrote {} rows x {} features to {}",
        data.n(),
        data.k(),
        output.display()
    );
    Ok(())
}

fn cmd_screen(cfg: &RunConfig, args: &DataArgs, table: &Path, output: &Path) -> CliResult<()> {
    let data = load_data(args)?;
    let (fit, cp) = screen(&data, &cfg.pipeline)?;
    let hash = cfg.hash();
    write_csv_with(table, &hash, cfg.seed, |w| cp.write_csv(w))?;
    let names: Vec<String> = fit
        .active_set
        .iter()
        .map(|&j| data.column_name(j))
        .collect();
    write_json(
        output,
        &json!({
            "config_hash": hash,
            "seed": cfg.seed,
            "config": cfg,
            "lambda1": fit.lambda1,
            "sigma_hat_sq": cp.sigma_hat_sq,
            "converged": fit.converged,
            "active": one_based(fit.active_set.iter().copied()),
            "active_names": names,
        }),
    )
}

fn cmd_partition(cfg: &RunConfig, args: &DataArgs, table: &Path, output: &Path) -> CliResult<()> {
    let data = load_data(args)?;
    let sel = screen_and_partition(&data, &cfg.pipeline, cfg.seed)?;
    let hash = cfg.hash();
    let empty = CvTable {
        rows: Vec::new(),
        min_index: 0,
        selected: 0,
    };
    let cv = sel.cv_table.as_ref().unwrap_or(&empty);
    write_csv_with(table, &hash, cfg.seed, |w| cv.write_csv(w))?;
    let p = &sel.partition;
    let inter: Vec<[usize; 2]> = p
        .interaction_groups
        .iter()
        .map(|&(a, b)| [a + 1, b + 1])
        .collect();
    let norms: serde_json::Map<String, Value> = p
        .component_norms
        .iter()
        .filter(|(_, v)| **v > 0.0)
        .map(|(g, v)| (g.to_string(), json!(v)))
        .collect();
    write_json(
        output,
        &json!({
            "config_hash": hash,
            "seed": cfg.seed,
            "config": cfg,
            "lambda1": sel.screen.lambda1,
            "lambda2": sel.cv_table.as_ref().map(|_| p.lambda2),
            "screened": one_based(sel.screened().iter().copied()),
            "main": one_based(p.main_set.iter().copied()),
            "interactions": inter,
            "component_norms": norms,
            "converged": p.converged,
            "kkt_residual": p.kkt_residual,
        }),
    )
}

fn cmd_fit(
    cfg: &RunConfig,
    args: &DataArgs,
    model_path: &Path,
    report_path: &Path,
) -> CliResult<()> {
    let data = load_data(args)?;
    let (mut model, mut report) = fit(&data, &cfg.pipeline, cfg.seed)?;
    let hash = cfg.hash();
    model.provenance.config_hash = hash.clone();
    report.config_hash = hash;
    model.save(model_path)?;
    let mut v = serde_json::to_value(&report).map_err(SdamiError::from)?;
    v["run_config"] = serde_json::to_value(cfg).map_err(SdamiError::from)?;
    write_json(report_path, &v)?;
    log::info!(
        "fitted {} components, train mse {}",
        model.components.len(),
        report.train_mse
    );
    Ok(())
}

fn cmd_predict(args: &DataArgs, model_path: &Path, output: &Path) -> CliResult<()> {
    let model = SdamiModel::load(model_path)?;
    let data = load_data(args)?;
    let pred = model.predict(data.x.view())?;
    let prov = &model.provenance;
    write_csv_with(output, &prov.config_hash, prov.seed, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["y_hat"])?;
        for v in pred.iter() {
            csv.write_record([sdami::dataget::format_float(*v)])?;
        }
        csv.flush().map_err(|e| SdamiError::Io {
            path: output.to_path_buf(),
            source: e,
        })
    })
}

fn cmd_evaluate(
    args: &DataArgs,
    model_path: &Path,
    truth: Option<&Path>,
    output: &Path,
) -> CliResult<()> {
    let model = SdamiModel::load(model_path)?;
    let data = load_data(args)?;
    let pred = model.predict(data.x.view())?;
    let m = regression_metrics(data.y.view(), pred.view())?;
    let selection = match truth {
        Some(p) => {
            let t = parse_truth(p)?;
            let s = selection_score(&model.selected_variables(), &t, data.k())?;
            json!({
                "tpr": s.tpr,
                "fpr": s.fpr,
                "selected": one_based(s.selected.iter().copied()),
                "truth": one_based(s.truth.iter().copied()),
            })
        }
        None => Value::Null,
    };
    write_json(
        output,
        &json!({
            "config_hash": model.provenance.config_hash,
            "seed": model.provenance.seed,
            "n": data.n(),
            "mse": m.mse,
            "rmse": m.rmse,
            "r2": m.r2,
            "selection": selection,
        }),
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_benchmark(
    mut cfg: RunConfig,
    source: &SourceArgs,
    n_test: Option<usize>,
    reps: Option<usize>,
    methods: Option<Vec<String>>,
    output: &Path,
    json_path: Option<&Path>,
) -> CliResult<()> {
    apply_source(&mut cfg, source);
    if let Some(t) = n_test {
        cfg.simulation.n_test = t;
    }
    if let Some(r) = reps {
        cfg.benchmark.reps = r;
    }
    if let Some(ms) = methods {
        cfg.benchmark.methods = ms
            .iter()
            .map(|s| s.trim().parse::<Method>())
            .collect::<sdami::Result<Vec<_>>>()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    cfg.validate()?;
    let spec = BenchmarkSpec {
        source: data_source(&cfg, source),
        n: cfg.simulation.n,
        n_test: cfg.simulation.n_test,
        methods: cfg.benchmark.methods.clone(),
        reps: cfg.benchmark.reps,
        seed: cfg.seed,
    };
    let summary = replicate(&spec, &cfg.method_configs())?;
    let hash = cfg.hash();
    write_csv_with(output, &hash, cfg.seed, |w| summary.write_csv(w))?;
    if let Some(p) = json_path {
        let mut v = serde_json::to_value(&summary).map_err(SdamiError::from)?;
        v["run_config_hash"] = json!(hash);
        v["run_config"] = serde_json::to_value(&cfg).map_err(SdamiError::from)?;
        write_json(p, &v)?;
    }
    for f in &summary.failures {
        log::warn!("replicate {} {} failed: {}", f.rep, f.method, f.error);
    }
    print!("{}", summary.to_text());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_footprint(
    mut cfg: RunConfig,
    function: &str,
    variable: usize,
    n_mc: Option<usize>,
    grid_points: Option<usize>,
    threshold: Option<f64>,
    output: &Path,
    verdict_path: Option<&Path>,
) -> CliResult<()> {
    let f: CatalogFunction = function
        .parse()
        .map_err(|e: SdamiError| CliError::Usage(e.to_string()))?;
    if variable == 0 || variable > f.dim() {
        return Err(CliError::Usage(format!(
            "--variable must be between 1 and {} for {f}",
            f.dim()
        )));
    }
    if let Some(v) = n_mc {
        cfg.footprint.n_mc = v;
    }
    if let Some(v) = grid_points {
        cfg.footprint.grid_points = v;
    }
    if let Some(v) = threshold {
        cfg.footprint.threshold = v;
    }
    cfg.validate()?;
    let j = variable - 1;
    let samplers = f.default_samplers();
    let grid = default_grid(&samplers[j], cfg.footprint.grid_points);
    let est = estimate_footprint(
        |x: &[f64]| f.eval(x),
        j,
        &samplers,
        &grid,
        cfg.footprint.n_mc,
        cfg.seed,
    )?;
    let verdict = constancy_test(&est, cfg.footprint.threshold)?;
    let hash = cfg.hash();
    write_csv_with(output, &hash, cfg.seed, |w| est.write_csv(w))?;
    if let Some(p) = verdict_path {
        write_json(
            p,
            &json!({
                "config_hash": hash,
                "seed": cfg.seed,
                "function": f.to_string(),
                "variable": variable,
                "n_mc": cfg.footprint.n_mc,
                "threshold": cfg.footprint.threshold,
                "score": verdict.score,
                "is_constant": verdict.is_constant,
            }),
        )?;
    }
    println!(
        "{f} x{variable}: score {:.4} -> {}",
        verdict.score,
        if verdict.is_constant {
            "constant"
        } else {
            "not constant"
        }
    );
    Ok(())
}

/// True component of a case along a slice through the origin, centered over the grid.
fn true_slice(case: u32, vars: &[usize], points: &[Vec<f64>]) -> CliResult<Vec<f64>> {
    let width = vars.iter().copied().max().unwrap_or(0).max(4) + 1;
    let mut vals = Vec::with_capacity(points.len());
    for p in points {
        let mut row = ndarray::Array1::<f64>::zeros(width);
        for (c, &j) in vars.iter().enumerate() {
            row[j] = p[c];
        }
        vals.push(case_regression(case, row.view())?);
    }
    let m = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
    Ok(vals.into_iter().map(|v| v - m).collect())
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn cmd_plot(
    model_path: &Path,
    out_dir: &Path,
    case: Option<u32>,
    points: usize,
    surface_points: usize,
    range: (f64, f64),
) -> CliResult<()> {
    if !(range.0 < range.1) {
        return Err(CliError::Usage("--low must be below --high".into()));
    }
    if points < 2 || surface_points < 2 {
        return Err(CliError::Usage("grids need at least 2 points".into()));
    }
    let model = SdamiModel::load(model_path)?;
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let prov = provenance_line(&model.provenance.config_hash, model.provenance.seed);
    let comment = format!("<!-- {} -->\n", &prov[2..]);
    let mut written = 0usize;
    for &g in model.components.keys() {
        let vars = g.variables();
        let (svg, name) = if let GroupId::Pair(a, b) = g {
            let xs = Grid::linspace(range.0, range.1, surface_points);
            let grid = Grid::Surface(xs.clone(), xs.clone());
            let curve = model.component_curve(g, &grid)?;
            let svg = heatmap(
                &format!("interaction {g}"),
                &format!("x{}", a + 1),
                &format!("x{}", b + 1),
                &xs,
                &xs,
                &curve.values,
            );
            (svg, format!("pair_x{}_x{}.svg", a + 1, b + 1))
        } else {
            let xs = Grid::linspace(range.0, range.1, points);
            let grid = Grid::Line(xs.clone());
            let curve = model.component_curve(g, &grid)?;
            let truth = match case {
                Some(c) => Some(true_slice(c, &vars, &curve.points)?),
                None => None,
            };
            let svg = line_plot(
                &format!("main effect {g}"),
                &format!("x{}", vars[0] + 1),
                "centered component",
                &xs,
                &curve.values,
                truth.as_deref(),
            );
            (svg, format!("main_x{}.svg", vars[0] + 1))
        };
        let mut text = String::from(r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        text.push('\n');
        text.push_str(&comment);
        text.push_str(&svg);
        write_file(&out_dir.join(name), text.as_bytes())?;
        written += 1;
    }
    println!("wrote {written} plots to {}", out_dir.display());
    Ok(())
}
