//! Comparison methods: linear LASSO, a full-input neural network, and the
//! sparse additive screen used directly as a predictor (fSpAM).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{expand, BasisSpec, GroupId};
use crate::error::{Result, SdamiError};
use crate::grouplasso::{choose_index, CvRow, CvTable};
use crate::net::{train_joint, Mlp, OptimizerConfig, TrainReport};
use crate::spam::{default_path, lambda1_path_cp, AdditivePredictor, SpamConfig};
use crate::util::{fold_assignment, log_spaced_desc, mean};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub folds: usize,
    pub path_len: usize,
    pub path_min_ratio: f64,
    pub one_se_rule: bool,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            tol: 1e-8,
            max_iter: 10_000,
            folds: 5,
            path_len: 50,
            path_min_ratio: 1e-3,
            one_se_rule: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    /// Coefficients on the original column scale.
    pub coefficients: Array1<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Coefficients on the standardized columns.
    pub std_coefficients: Array1<f64>,
    pub column_means: Array1<f64>,
    pub column_sds: Array1<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Penalized objective (standardized problem) after each sweep.
    pub objective_trace: Vec<f64>,
}

impl LassoFit {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.coefficients.len() {
            return Err(SdamiError::DimensionMismatch(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.coefficients.len()
            )));
        }
        Ok(x.dot(&self.coefficients) + self.intercept)
    }

    pub fn active_set(&self) -> Vec<usize> {
        (0..self.coefficients.len())
            .filter(|&j| self.coefficients[j] != 0.0)
            .collect()
    }
}

/// Column means and population sds; zero-variance columns get sd 0.
struct Standardized {
    z: Array2<f64>,
    yc: Array1<f64>,
    y_mean: f64,
    means: Array1<f64>,
    sds: Array1<f64>,
}

fn standardize(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Standardized> {
    if x.nrows() != y.len() {
        return Err(SdamiError::DimensionMismatch(format!(
            "{} rows for {} responses",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() < 2 {
        return Err(SdamiError::InvalidArgument(
            "need at least 2 samples".into(),
        ));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(SdamiError::NonFinite("lasso input".into()));
    }
    let n = x.nrows() as f64;
    let means = x.mean_axis(Axis(0)).expect("non-empty");
    let mut sds = Array1::zeros(x.ncols());
    let mut z = x.to_owned();
    for (j, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
        col -= means[j];
        let sd = (col.dot(&col) / n).sqrt();
        sds[j] = sd;
        if sd > 0.0 {
            col /= sd;
        } else {
            col.fill(0.0);
        }
    }
    let y_mean = mean(y);
    Ok(Standardized {
        z,
        yc: y.mapv(|v| v - y_mean),
        y_mean,
        means,
        sds,
    })
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Coordinate descent on the standardized problem from `b`. Sweeps cycle
/// over the nonzero coordinates until they settle, then one full sweep
/// confirms convergence or admits new coordinates.
fn lasso_cd(
    s: &Standardized,
    lambda: f64,
    tol: f64,
    max_iter: usize,
    mut b: Array1<f64>,
) -> (Array1<f64>, bool, usize, Vec<f64>) {
    let n = s.z.nrows() as f64;
    let zt = s.z.t().as_standard_layout().into_owned();
    let mut r = &s.yc - &s.z.dot(&b);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    let all: Vec<usize> = (0..b.len()).filter(|&j| s.sds[j] > 0.0).collect();
    let mut full = true;
    while sweeps < max_iter {
        sweeps += 1;
        let active: Vec<usize>;
        let coords = if full {
            &all
        } else {
            active = all.iter().copied().filter(|&j| b[j] != 0.0).collect();
            &active
        };
        let mut max_change: f64 = 0.0;
        for &j in coords {
            let col = zt.row(j);
            let new = soft(col.dot(&r) / n + b[j], lambda);
            let d = new - b[j];
            if d != 0.0 {
                r.scaled_add(-d, &col);
                b[j] = new;
                max_change = max_change.max(d.abs());
            }
        }
        trace.push(r.dot(&r) / (2.0 * n) + lambda * b.iter().map(|v| v.abs()).sum::<f64>());
        if max_change < tol {
            if full {
                converged = true;
                break;
            }
            full = true;
        } else {
            full = false;
        }
    }
    (b, converged, sweeps, trace)
}

fn finish(
    s: &Standardized,
    lambda: f64,
    b: Array1<f64>,
    converged: bool,
    sweeps: usize,
    trace: Vec<f64>,
) -> LassoFit {
    let coefficients =
        Array1::from_shape_fn(
            b.len(),
            |j| if s.sds[j] > 0.0 { b[j] / s.sds[j] } else { 0.0 },
        );
    let intercept = s.y_mean - coefficients.dot(&s.means);
    LassoFit {
        coefficients,
        intercept,
        lambda,
        std_coefficients: b,
        column_means: s.means.clone(),
        column_sds: s.sds.clone(),
        converged,
        sweeps,
        objective_trace: trace,
    }
}

/// `max_j |(1/n) z_jᵀ (y − ȳ)|` on standardized columns.
pub fn lasso_lambda_max(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
    let s = standardize(x, y)?;
    Ok(lambda_max_std(&s))
}

fn lambda_max_std(s: &Standardized) -> f64 {
    let n = s.z.nrows() as f64;
    let zt = s.z.t().as_standard_layout().into_owned();
    zt.rows()
        .into_iter()
        .fold(0.0, |m, col| m.max((col.dot(&s.yc) / n).abs()))
}

/// Minimize `(1/2n)‖y − ȳ − Zb‖² + λ‖b‖₁` over standardized columns `Z`.
pub fn lasso_fit(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LassoFit> {
    if !(lambda >= 0.0) {
        return Err(SdamiError::InvalidArgument(format!(
            "lambda must be >= 0 (got {lambda})"
        )));
    }
    let s = standardize(x, y)?;
    let (b, converged, sweeps, trace) =
        lasso_cd(&s, lambda, tol, max_iter, Array1::zeros(x.ncols()));
    if !converged {
        log::warn!("lasso did not converge in {max_iter} sweeps at lambda = {lambda:e}");
    }
    Ok(finish(&s, lambda, b, converged, sweeps, trace))
}

/// Path fit with warm starts; one fit per path value.
fn lasso_path(s: &Standardized, path: &[f64], config: &LassoConfig) -> Vec<LassoFit> {
    let mut out: Vec<LassoFit> = Vec::with_capacity(path.len());
    let mut b = Array1::zeros(s.z.ncols());
    for &lam in path {
        let (nb, conv, sweeps, trace) = lasso_cd(s, lam, config.tol, config.max_iter, b);
        b = nb.clone();
        out.push(finish(s, lam, nb, conv, sweeps, trace));
    }
    out
}

/// K-fold CV over a descending path (default: `path_len` values from λ_max
/// down to `path_min_ratio·λ_max`), then the full-data fit at the chosen λ.
pub fn lasso_cv(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    path: Option<&[f64]>,
    seed: u64,
    config: &LassoConfig,
) -> Result<(LassoFit, CvTable)> {
    let s = standardize(x, y)?;
    let n = x.nrows();
    if config.folds < 2 || n / config.folds < 1 {
        return Err(SdamiError::FoldTooSmall {
            fold_size: n / config.folds.max(1),
            max_block: 1,
        });
    }
    let path: Vec<f64> = match path {
        Some(p) => p.to_vec(),
        None => log_spaced_desc(lambda_max_std(&s), config.path_min_ratio, config.path_len),
    };
    if path.is_empty() || path.windows(2).any(|w| w[0] < w[1]) {
        return Err(SdamiError::InvalidArgument(
            "lasso path must be non-empty and descending".into(),
        ));
    }
    let labels = fold_assignment(n, config.folds, seed);
    let per_fold: Vec<Vec<f64>> = (0..config.folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| labels[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| labels[i] == f).collect();
            let xt = x.select(Axis(0), &train);
            let yt = y.select(Axis(0), &train);
            let xv = x.select(Axis(0), &test);
            let yv = y.select(Axis(0), &test);
            let st = standardize(xt.view(), yt.view())?;
            lasso_path(&st, &path, config)
                .iter()
                .map(|fit| {
                    let d = &yv - &fit.predict(xv.view())?;
                    Ok(d.dot(&d) / test.len() as f64)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut full = lasso_path(&s, &path, config);
    let kf = config.folds as f64;
    let rows: Vec<CvRow> = path
        .iter()
        .enumerate()
        .map(|(i, &lam)| {
            let errs: Vec<f64> = per_fold.iter().map(|e| e[i]).collect();
            let m = errs.iter().sum::<f64>() / kf;
            let var = errs.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (kf - 1.0);
            CvRow {
                lambda: lam,
                mean_cv_err: m,
                se_cv_err: (var / kf).sqrt(),
                n_active_groups: full[i].active_set().len(),
            }
        })
        .collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean_cv_err).collect();
    let ses: Vec<f64> = rows.iter().map(|r| r.se_cv_err).collect();
    let (min_index, selected) = choose_index(&means, &ses, config.one_se_rule);
    Ok((
        full.swap_remove(selected),
        CvTable {
            rows,
            min_index,
            selected,
        },
    ))
}

/// Full-input network with its input standardization and a fixed offset.
#[derive(Debug, Clone, PartialEq)]
pub struct DnnFit {
    pub net: Mlp,
    pub intercept: f64,
    pub input_center: Array1<f64>,
    pub input_scale: Array1<f64>,
}

impl DnnFit {
    fn standardized(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.to_owned();
        for (j, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| (v - self.input_center[j]) / self.input_scale[j]);
        }
        z
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.input_center.len() {
            return Err(SdamiError::DimensionMismatch(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_center.len()
            )));
        }
        Ok(self.net.forward(self.standardized(x).view())? + self.intercept)
    }
}

/// Unconstrained network on all inputs, offset by the response mean.
pub fn dnn_fit(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    hidden: &[usize],
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<(DnnFit, TrainReport)> {
    if x.nrows() != y.len() {
        return Err(SdamiError::DimensionMismatch(format!(
            "{} rows for {} responses",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(SdamiError::NonFinite("network input".into()));
    }
    let center = x
        .mean_axis(Axis(0))
        .ok_or_else(|| SdamiError::InvalidArgument("empty design".into()))?;
    let scale = Array1::from_shape_fn(x.ncols(), |j| {
        let c = x.column(j);
        let sd = (c.iter().map(|v| (v - center[j]).powi(2)).sum::<f64>() / c.len() as f64).sqrt();
        if sd > 0.0 {
            sd
        } else {
            1.0
        }
    });
    let mut fit = DnnFit {
        net: Mlp::with_hidden(x.ncols(), hidden, crate::util::derive_seed(seed, 0))?,
        intercept: mean(y),
        input_center: center,
        input_scale: scale,
    };
    let z = fit.standardized(x);
    let report = train_joint(
        std::slice::from_mut(&mut fit.net),
        &[z.view()],
        &[f64::INFINITY],
        fit.intercept,
        y,
        opt,
        crate::util::derive_seed(seed, 1),
    )?;
    Ok((fit, report))
}

/// The Cp-selected additive screen over all columns, as a predictor.
pub fn fspam_fit(
    x: ArrayView2<f64>,
    y: &Array1<f64>,
    basis: &BasisSpec,
    spam: &SpamConfig,
) -> Result<AdditivePredictor> {
    let groups: Vec<GroupId> = (0..x.ncols()).map(GroupId::Main).collect();
    let e = expand(x, basis, &groups)?;
    let path = default_path(&e, y, spam)?;
    let (fit, _) = lambda1_path_cp(&e, y, &path, spam)?;
    AdditivePredictor::new(&e, &fit)
}
