//! Regression and selection metrics, and the replicated benchmark harness.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{dnn_fit, fspam_fit, lasso_cv, LassoConfig};
use crate::dataget::{
    case_regression, format_float, simulate_case, simulate_chip, Dataset, TruthSpec,
};
use crate::error::{Result, SdamiError};
use crate::pipeline::{config_hash, fit, PipelineConfig};
use crate::util::{derive_seed, mean_sd, median};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub rmse: f64,
    /// Absent when the targets have zero variance.
    pub r2: Option<f64>,
}

pub fn regression_metrics(
    y_true: ArrayView1<f64>,
    y_pred: ArrayView1<f64>,
) -> Result<RegressionMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(SdamiError::DimensionMismatch(format!(
            "{} targets and {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(SdamiError::InvalidArgument(
            "metrics need at least 2 points".into(),
        ));
    }
    let n = y_true.len() as f64;
    let d = &y_true - &y_pred;
    let sse = d.dot(&d);
    let m = y_true.sum() / n;
    let sst: f64 = y_true.iter().map(|v| (v - m) * (v - m)).sum();
    let mse = sse / n;
    Ok(RegressionMetrics {
        mse,
        rmse: mse.sqrt(),
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    /// Absent when the truth is empty.
    pub tpr: Option<f64>,
    pub fpr: f64,
    pub selected: BTreeSet<usize>,
    pub truth: BTreeSet<usize>,
    pub null_size: usize,
}

/// Variable-level TPR/FPR of `selected` against `M ∪ vars(I)` among `k` columns.
pub fn selection_score(
    selected: &BTreeSet<usize>,
    truth: &TruthSpec,
    k: usize,
) -> Result<SelectionScore> {
    let t = truth.active_variables();
    if k < t.len() {
        return Err(SdamiError::InvalidArgument(format!(
            "k = {k} is smaller than the true active set ({})",
            t.len()
        )));
    }
    let tp = selected.intersection(&t).count();
    let fp = selected.len() - tp;
    let null_size = k - t.len();
    Ok(SelectionScore {
        tpr: (!t.is_empty()).then(|| tp as f64 / t.len() as f64),
        fpr: if null_size > 0 {
            fp as f64 / null_size as f64
        } else {
            0.0
        },
        selected: selected.clone(),
        truth: t,
        null_size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sdami,
    /// SDAMI with main effects only (no pair candidates).
    SdamiMain,
    Lasso,
    Dnn,
    Fspam,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Sdami,
        Method::SdamiMain,
        Method::Lasso,
        Method::Dnn,
        Method::Fspam,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sdami => "sdami",
            Method::SdamiMain => "sdami_main",
            Method::Lasso => "lasso",
            Method::Dnn => "dnn",
            Method::Fspam => "fspam",
        })
    }
}

impl FromStr for Method {
    type Err = SdamiError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                SdamiError::InvalidArgument(format!(
                    "unknown method {s:?} (expected sdami, sdami_main, lasso, dnn or fspam)"
                ))
            })
    }
}

/// Where replicate data come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Case { case: u32, k: usize, sigma: f64 },
    Chip { noise_features: usize },
}

impl DataSource {
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        match *self {
            DataSource::Case { case, k, sigma } => simulate_case(case, n, k, sigma, seed),
            DataSource::Chip { noise_features } => simulate_chip(n, noise_features, seed),
        }
    }

    /// Noise-free regression function at the rows of `data`.
    pub fn noiseless(&self, data: &Dataset) -> Result<Array1<f64>> {
        match *self {
            DataSource::Case { case, .. } => data
                .x
                .rows()
                .into_iter()
                .map(|r| case_regression(case, r))
                .collect(),
            DataSource::Chip { .. } => Ok(data.y.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub source: DataSource,
    pub n: usize,
    pub n_test: usize,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfigs {
    pub pipeline: PipelineConfig,
    pub lasso: LassoConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub rep: usize,
    pub method: Method,
    pub test_mse: f64,
    pub test_mse_noiseless: f64,
    pub r2: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub selected: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub rep: usize,
    pub method: Method,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub reps_ok: usize,
    pub reps_failed: usize,
    pub mse_mean: f64,
    pub mse_sd: Option<f64>,
    pub mse_median: f64,
    pub mse_noiseless_mean: f64,
    pub mse_noiseless_sd: Option<f64>,
    pub mse_noiseless_median: f64,
    pub r2_mean: Option<f64>,
    pub tpr_mean: Option<f64>,
    pub tpr_sd: Option<f64>,
    pub fpr_mean: Option<f64>,
    pub fpr_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub rep: usize,
    pub method: Method,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub spec: BenchmarkSpec,
    pub config_hash: String,
    pub rows: Vec<MethodSummary>,
    pub replicates: Vec<ReplicateResult>,
    pub failures: Vec<ReplicateFailure>,
    /// Wall-clock fit times, kept apart from the reproducible fields.
    pub timings: Vec<Timing>,
}

impl BenchmarkSummary {
    pub fn row(&self, method: Method) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUMMARY_COLUMNS)?;
        for r in &self.rows {
            w.write_record(summary_fields(r))?;
        }
        w.flush().map_err(|e| SdamiError::io("<csv>", e))?;
        Ok(())
    }

    /// Fixed-width text table with the same columns as the CSV.
    pub fn to_text(&self) -> String {
        let rows: Vec<Vec<String>> = self.rows.iter().map(summary_fields).collect();
        let widths: Vec<usize> = (0..SUMMARY_COLUMNS.len())
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].len())
                    .chain([SUMMARY_COLUMNS[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: Vec<&str>| -> String {
            cells
                .iter()
                .enumerate()
                .map(|(c, s)| format!("{:>w$}", s, w = widths[c]))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(SUMMARY_COLUMNS.to_vec());
        out.push('\n');
        for r in &rows {
            out.push_str(&line(r.iter().map(|s| s.as_str()).collect()));
            out.push('\n');
        }
        out
    }
}

const SUMMARY_COLUMNS: [&str; 14] = [
    "method",
    "reps_ok",
    "reps_failed",
    "mse_mean",
    "mse_sd",
    "mse_median",
    "mse_noiseless_mean",
    "mse_noiseless_sd",
    "mse_noiseless_median",
    "r2_mean",
    "tpr_mean",
    "tpr_sd",
    "fpr_mean",
    "fpr_sd",
];

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn summary_fields(r: &MethodSummary) -> Vec<String> {
    vec![
        r.method.to_string(),
        r.reps_ok.to_string(),
        r.reps_failed.to_string(),
        format_float(r.mse_mean),
        opt(r.mse_sd),
        format_float(r.mse_median),
        format_float(r.mse_noiseless_mean),
        opt(r.mse_noiseless_sd),
        format_float(r.mse_noiseless_median),
        opt(r.r2_mean),
        opt(r.tpr_mean),
        opt(r.tpr_sd),
        opt(r.fpr_mean),
        opt(r.fpr_sd),
    ]
}

/// Predictions and selected variables of one method on one replicate.
fn run_method(
    method: Method,
    train: &Dataset,
    test: &Dataset,
    configs: &MethodConfigs,
    seed: u64,
) -> Result<(Array1<f64>, Option<BTreeSet<usize>>)> {
    match method {
        Method::Sdami | Method::SdamiMain => {
            let mut cfg = configs.pipeline.clone();
            if method == Method::SdamiMain {
                cfg.basis.include_pair_products = false;
            }
            let (model, _) = fit(train, &cfg, seed)?;
            Ok((
                model.predict(test.x.view())?,
                Some(model.selected_variables()),
            ))
        }
        Method::Lasso => {
            let (f, _) = lasso_cv(train.x.view(), train.y.view(), None, seed, &configs.lasso)?;
            Ok((
                f.predict(test.x.view())?,
                Some(f.active_set().into_iter().collect()),
            ))
        }
        Method::Dnn => {
            let net = &configs.pipeline.net;
            let (f, _) = dnn_fit(
                train.x.view(),
                train.y.view(),
                &net.hidden_layers,
                &net.optimizer,
                seed,
            )?;
            Ok((f.predict(test.x.view())?, None))
        }
        Method::Fspam => {
            let p = fspam_fit(
                train.x.view(),
                &train.y,
                &configs.pipeline.basis,
                &configs.pipeline.spam,
            )?;
            Ok((p.predict(test.x.view())?, Some(p.active_set())))
        }
    }
}

/// Seeds for replicate `rep`: training data, test data, method fitting.
pub fn replicate_seeds(master: u64, rep: usize) -> (u64, u64, u64) {
    let r = rep as u64;
    (
        derive_seed(master, 3 * r),
        derive_seed(master, 3 * r + 1),
        derive_seed(master, 3 * r + 2),
    )
}

type RepOutcome = (
    usize,
    Method,
    std::result::Result<ReplicateResult, String>,
    f64,
);

/// Run `reps` independent train/test draws for each method and aggregate.
pub fn replicate(spec: &BenchmarkSpec, configs: &MethodConfigs) -> Result<BenchmarkSummary> {
    if spec.reps == 0 {
        return Err(SdamiError::InvalidArgument("reps must be >= 1".into()));
    }
    if spec.methods.is_empty() {
        return Err(SdamiError::InvalidArgument("no methods requested".into()));
    }
    if spec.n_test < 2 {
        return Err(SdamiError::InvalidArgument("n_test must be >= 2".into()));
    }
    let outcomes: Vec<Vec<RepOutcome>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| -> Result<Vec<RepOutcome>> {
            let (s_train, s_test, s_fit) = replicate_seeds(spec.seed, rep);
            let train = spec.source.generate(spec.n, s_train)?;
            let test = spec.source.generate(spec.n_test, s_test)?;
            let clean = spec.source.noiseless(&test)?;
            let k = train.k();
            Ok(spec
                .methods
                .iter()
                .map(|&method| {
                    let t = Instant::now();
                    let res = run_method(method, &train, &test, configs, s_fit).and_then(
                        |(pred, sel)| {
                            let noisy = regression_metrics(test.y.view(), pred.view())?;
                            let noiseless = regression_metrics(clean.view(), pred.view())?;
                            let score = match (&sel, &train.truth) {
                                (Some(s), Some(truth)) => Some(selection_score(s, truth, k)?),
                                _ => None,
                            };
                            Ok(ReplicateResult {
                                rep,
                                method,
                                test_mse: noisy.mse,
                                test_mse_noiseless: noiseless.mse,
                                r2: noisy.r2,
                                tpr: score.as_ref().and_then(|s| s.tpr),
                                fpr: score.as_ref().map(|s| s.fpr),
                                selected: sel.map(|s| s.into_iter().collect()),
                            })
                        },
                    );
                    (
                        rep,
                        method,
                        res.map_err(|e| e.to_string()),
                        t.elapsed().as_secs_f64(),
                    )
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    let mut timings = Vec::new();
    for (rep, method, res, secs) in outcomes.into_iter().flatten() {
        timings.push(Timing {
            rep,
            method,
            seconds: secs,
        });
        match res {
            Ok(r) => replicates.push(r),
            Err(error) => failures.push(ReplicateFailure { rep, method, error }),
        }
    }
    let rows = spec
        .methods
        .iter()
        .map(|&m| summarize(m, &replicates, &failures))
        .collect();
    Ok(BenchmarkSummary {
        spec: spec.clone(),
        config_hash: config_hash(configs),
        rows,
        replicates,
        failures,
        timings,
    })
}

fn summarize(
    method: Method,
    reps: &[ReplicateResult],
    failures: &[ReplicateFailure],
) -> MethodSummary {
    let mine: Vec<&ReplicateResult> = reps.iter().filter(|r| r.method == method).collect();
    let col = |f: &dyn Fn(&ReplicateResult) -> Option<f64>| -> Vec<f64> {
        mine.iter().filter_map(|r| f(r)).collect()
    };
    let mse = col(&|r| Some(r.test_mse));
    let clean = col(&|r| Some(r.test_mse_noiseless));
    let r2 = col(&|r| r.r2);
    let tpr = col(&|r| r.tpr);
    let fpr = col(&|r| r.fpr);
    let (mse_mean, mse_sd) = mean_sd(&mse);
    let (clean_mean, clean_sd) = mean_sd(&clean);
    let some_mean = |v: &[f64]| (!v.is_empty()).then(|| mean_sd(v).0);
    let some_sd = |v: &[f64]| mean_sd(v).1;
    MethodSummary {
        method,
        reps_ok: mine.len(),
        reps_failed: failures.iter().filter(|f| f.method == method).count(),
        mse_mean,
        mse_sd,
        mse_median: median(&mse),
        mse_noiseless_mean: clean_mean,
        mse_noiseless_sd: clean_sd,
        mse_noiseless_median: median(&clean),
        r2_mean: some_mean(&r2),
        tpr_mean: some_mean(&tpr),
        tpr_sd: some_sd(&tpr),
        fpr_mean: some_mean(&fpr),
        fpr_sd: some_sd(&fpr),
    }
}
