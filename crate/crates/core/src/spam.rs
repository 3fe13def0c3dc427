//! Sparse additive screening by backfitting with functional soft-thresholding,
//! and selection of the screening penalty along a path by Mallows' Cp.
//!
//! Each sweep visits every main-effect block in index order:
//!
//! ```text
//! R_j = y − ȳ − Σ_{l≠j} f_l
//! P_j = S_j R_j,  s_j = rms(P_j)
//! f_j = max(0, 1 − λ/s_j) · P_j   (then re-centered)
//! ```
//!
//! until the largest rms change of a component falls below `tol`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::basis::{transform_block, BasisExpansion, BlockTransform, GroupId};
use crate::dataget::format_float;
use crate::error::{Result, SdamiError};
use crate::util::{log_spaced_desc, mean, rms};

/// Floor on the noise-variance estimate.
pub const SIGMA_SQ_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpamConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub path_len: usize,
    /// Smallest path value as a fraction of λ_max.
    pub path_min_ratio: f64,
    /// How σ̂² is estimated for Cp.
    pub sigma_estimate: SigmaEstimate,
}

impl Default for SpamConfig {
    fn default() -> Self {
        SpamConfig {
            tol: 1e-6,
            max_iter: 200,
            path_len: 30,
            path_min_ratio: 1e-3,
            sigma_estimate: SigmaEstimate::default(),
        }
    }
}

/// Where along the path the noise variance for Cp is read off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaEstimate {
    /// `RSS/(n − df)` at the least-penalized path point; `RSS/n` if `df ≥ n` there.
    SmallestLambda,
    /// `RSS/(n − df)` at the least-penalized path point whose `df` is at most
    /// `max_df_fraction · n`.
    DfCapped { max_df_fraction: f64 },
}

impl Default for SigmaEstimate {
    fn default() -> Self {
        SigmaEstimate::DfCapped {
            max_df_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveFit {
    /// Fitted component values on the training rows, keyed by column.
    pub component_values: BTreeMap<usize, Array1<f64>>,
    /// Empirical rms norm of each component.
    pub component_norms: BTreeMap<usize, f64>,
    /// Basis coefficients of each component (`f_j = Φ_j β_j` up to centering).
    pub coefficients: BTreeMap<usize, Array1<f64>>,
    /// Mean shift applied after projection, per component.
    pub offsets: BTreeMap<usize, f64>,
    pub intercept: f64,
    pub lambda1: f64,
    pub active_set: BTreeSet<usize>,
    pub df: f64,
    pub sigma_hat_sq: Option<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Training MSE after each sweep.
    pub mse_trace: Vec<f64>,
    /// `½·MSE + λ₁ Σ_j ‖f_j‖` after each sweep.
    pub objective_trace: Vec<f64>,
}

impl AdditiveFit {
    pub fn train_mse(&self, y: &Array1<f64>) -> f64 {
        let r = self.residual(y);
        r.dot(&r) / r.len() as f64
    }

    fn residual(&self, y: &Array1<f64>) -> Array1<f64> {
        let mut r = y.mapv(|v| v - self.intercept);
        for f in self.component_values.values() {
            r -= f;
        }
        r
    }

    pub fn fitted(&self, n: usize) -> Array1<f64> {
        let mut out = Array1::from_elem(n, self.intercept);
        for f in self.component_values.values() {
            out += f;
        }
        out
    }
}

fn main_columns(expansion: &BasisExpansion) -> Vec<usize> {
    expansion
        .groups()
        .filter_map(|g| match g {
            GroupId::Main(j) => Some(j),
            GroupId::Pair(..) => None,
        })
        .collect()
}

/// Smallest λ for which every component is zero: `max_j rms(S_j (y − ȳ))`.
pub fn lambda_max(expansion: &BasisExpansion, y: &Array1<f64>) -> Result<f64> {
    check_len(expansion, y)?;
    let ybar = mean(y.view());
    let yc = y.mapv(|v| v - ybar);
    let mut best: f64 = 0.0;
    for j in main_columns(expansion) {
        let p = expansion.apply_smoother(GroupId::Main(j), &yc)?;
        best = best.max(rms(p.view()));
    }
    Ok(best)
}

fn check_len(expansion: &BasisExpansion, y: &Array1<f64>) -> Result<()> {
    if y.len() != expansion.sample_count {
        return Err(SdamiError::DimensionMismatch(format!(
            "response of length {} for {} samples",
            y.len(),
            expansion.sample_count
        )));
    }
    Ok(())
}

/// Cold-start backfit at a single penalty.
pub fn backfit(
    expansion: &BasisExpansion,
    y: &Array1<f64>,
    lambda1: f64,
    tol: f64,
    max_iter: usize,
) -> Result<AdditiveFit> {
    backfit_from(expansion, y, lambda1, tol, max_iter, None)
}

/// Backfit starting from `warm` (or from all-zero components).
pub fn backfit_from(
    expansion: &BasisExpansion,
    y: &Array1<f64>,
    lambda1: f64,
    tol: f64,
    max_iter: usize,
    warm: Option<&AdditiveFit>,
) -> Result<AdditiveFit> {
    check_len(expansion, y)?;
    if !(lambda1 >= 0.0) {
        return Err(SdamiError::InvalidArgument(format!(
            "lambda1 must be >= 0 (got {lambda1})"
        )));
    }
    let n = expansion.sample_count;
    let nf = n as f64;
    let cols = main_columns(expansion);
    let intercept = mean(y.view());

    let mut comps: BTreeMap<usize, Array1<f64>> = BTreeMap::new();
    let mut coefs: BTreeMap<usize, Array1<f64>> = BTreeMap::new();
    let mut offsets: BTreeMap<usize, f64> = BTreeMap::new();
    let mut r = y.mapv(|v| v - intercept);
    for &j in &cols {
        let m = expansion.block(GroupId::Main(j))?.dim();
        let (f, b, o) = match warm.and_then(|w| w.component_values.get(&j).map(|f| (w, f))) {
            Some((w, f)) => (f.clone(), w.coefficients[&j].clone(), w.offsets[&j]),
            None => (Array1::zeros(n), Array1::zeros(m), 0.0),
        };
        r -= &f;
        comps.insert(j, f);
        coefs.insert(j, b);
        offsets.insert(j, o);
    }

    let mut mse_trace = Vec::new();
    let mut objective_trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for &j in &cols {
            let phi = &expansion.block(GroupId::Main(j))?.matrix;
            let f_old = comps.get_mut(&j).expect("component");
            // partial residual R_j = r + f_j
            r += &*f_old;
            let z = phi.t().dot(&r) / nf;
            let p = phi.dot(&z);
            let s = rms(p.view());
            let factor = if s > 0.0 {
                (1.0 - lambda1 / s).max(0.0)
            } else {
                0.0
            };
            let (f_new, beta, off) = if factor > 0.0 {
                let mut f = p * factor;
                let m = mean(f.view());
                f.mapv_inplace(|v| v - m);
                (f, z * factor, m)
            } else {
                (Array1::zeros(n), Array1::zeros(z.len()), 0.0)
            };
            let diff = &f_new - &*f_old;
            max_change = max_change.max(rms(diff.view()));
            r -= &f_new;
            *f_old = f_new;
            coefs.insert(j, beta);
            offsets.insert(j, off);
        }
        let mse = r.dot(&r) / nf;
        let penalty: f64 = comps.values().map(|f| rms(f.view())).sum();
        mse_trace.push(mse);
        objective_trace.push(0.5 * mse + lambda1 * penalty);
        if max_change < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("backfitting did not converge in {max_iter} sweeps at lambda1 = {lambda1:e}");
    }

    let mut norms = BTreeMap::new();
    let mut active = BTreeSet::new();
    let mut df = 0.0;
    for &j in &cols {
        let norm = rms(comps[&j].view());
        if norm > 0.0 {
            active.insert(j);
            df += expansion.smoother_trace(GroupId::Main(j))?;
        }
        norms.insert(j, norm);
    }
    Ok(AdditiveFit {
        component_values: comps,
        component_norms: norms,
        coefficients: coefs,
        offsets,
        intercept,
        lambda1,
        active_set: active,
        df,
        sigma_hat_sq: None,
        converged,
        sweeps,
        mse_trace,
        objective_trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpRow {
    pub lambda: f64,
    pub train_mse: f64,
    pub df: f64,
    pub cp: f64,
    pub n_active: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpTable {
    pub rows: Vec<CpRow>,
    pub sigma_hat_sq: f64,
    /// σ̂² fell back to `RSS/n` because no usable path point had `df < n`.
    pub sigma_fallback: bool,
    pub selected: usize,
}

impl CpTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "train_mse", "df", "cp"])?;
        for r in &self.rows {
            w.write_record([
                format_float(r.lambda),
                format_float(r.train_mse),
                format_float(r.df),
                format_float(r.cp),
            ])?;
        }
        w.flush().map_err(|e| SdamiError::io("<csv>", e))?;
        Ok(())
    }
}

/// Default screening path: `path_len` log-spaced values from λ_max down.
pub fn default_path(
    expansion: &BasisExpansion,
    y: &Array1<f64>,
    config: &SpamConfig,
) -> Result<Vec<f64>> {
    let lmax = lambda_max(expansion, y)?;
    Ok(log_spaced_desc(
        lmax,
        config.path_min_ratio,
        config.path_len,
    ))
}

/// Fit the path with warm starts and return the Cp-minimizing fit.
pub fn lambda1_path_cp(
    expansion: &BasisExpansion,
    y: &Array1<f64>,
    path: &[f64],
    config: &SpamConfig,
) -> Result<(AdditiveFit, CpTable)> {
    if path.is_empty() {
        return Err(SdamiError::InvalidArgument("lambda1 path is empty".into()));
    }
    if path.iter().any(|l| !(*l >= 0.0)) {
        return Err(SdamiError::InvalidArgument(
            "lambda1 path values must be >= 0".into(),
        ));
    }
    if path.windows(2).any(|w| w[0] < w[1]) {
        return Err(SdamiError::InvalidArgument(
            "lambda1 path must be sorted descending".into(),
        ));
    }
    let n = expansion.sample_count as f64;
    let mut fits: Vec<AdditiveFit> = Vec::with_capacity(path.len());
    for &lam in path {
        let fit = backfit_from(expansion, y, lam, config.tol, config.max_iter, fits.last())?;
        fits.push(fit);
    }
    let mses: Vec<f64> = fits.iter().map(|f| f.train_mse(y)).collect();

    let usable = |i: usize| -> bool {
        match config.sigma_estimate {
            SigmaEstimate::SmallestLambda => i == fits.len() - 1,
            SigmaEstimate::DfCapped { max_df_fraction } => {
                fits[i].df <= max_df_fraction * n && fits[i].df < n
            }
        }
    };
    let mut sigma_fallback = false;
    let sigma_sq = match (0..fits.len()).rev().find(|&i| usable(i)) {
        Some(i) if fits[i].df < n => mses[i] * n / (n - fits[i].df),
        _ => {
            sigma_fallback = true;
            let last = fits.len() - 1;
            log::warn!(
                "df = {} >= n = {n} at the least-penalized fit; estimating sigma^2 as RSS/n",
                fits[last].df
            );
            mses[last]
        }
    }
    .max(SIGMA_SQ_FLOOR);

    let rows: Vec<CpRow> = fits
        .iter()
        .zip(&mses)
        .map(|(f, &mse)| CpRow {
            lambda: f.lambda1,
            train_mse: mse,
            df: f.df,
            cp: mse + 2.0 * sigma_sq / n * f.df,
            n_active: f.active_set.len(),
        })
        .collect();
    // strict improvement only: ties keep the larger λ
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.cp < rows[best].cp {
            best = i;
        }
    }
    let mut chosen = fits.swap_remove(best);
    chosen.sigma_hat_sq = Some(sigma_sq);
    Ok((
        chosen,
        CpTable {
            rows,
            sigma_hat_sq: sigma_sq,
            sigma_fallback,
            selected: best,
        },
    ))
}

/// Out-of-sample evaluator for an additive fit (the fSpAM predictor).
#[derive(Debug, Clone)]
pub struct AdditivePredictor {
    intercept: f64,
    components: Vec<(GroupId, BlockTransform, Array1<f64>, f64)>,
}

impl AdditivePredictor {
    pub fn new(expansion: &BasisExpansion, fit: &AdditiveFit) -> Result<AdditivePredictor> {
        let mut components = Vec::new();
        for &j in &fit.active_set {
            let g = GroupId::Main(j);
            let block = expansion.block(g)?;
            components.push((
                g,
                block.transform.clone(),
                fit.coefficients[&j].clone(),
                fit.offsets[&j],
            ));
        }
        Ok(AdditivePredictor {
            intercept: fit.intercept,
            components,
        })
    }

    pub fn active_set(&self) -> BTreeSet<usize> {
        self.components
            .iter()
            .flat_map(|(g, ..)| g.variables())
            .collect()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let mut out = Array1::from_elem(x.nrows(), self.intercept);
        for (g, t, beta, off) in &self.components {
            let phi = transform_block(t, *g, x)?;
            out += &phi.dot(beta);
            out.mapv_inplace(|v| v - off);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{expand, BasisSpec};
    use crate::dataget::simulate_case;
    use ndarray::Array2;

    fn all_mains(k: usize) -> Vec<GroupId> {
        (0..k).map(GroupId::Main).collect()
    }

    #[test]
    fn zero_penalty_is_projection() {
        let d = simulate_case(1, 100, 5, 0.5, 1).unwrap();
        let x1 = d.x.slice(ndarray::s![.., 0..1]).to_owned();
        let e = expand(x1.view(), &BasisSpec::default(), &[GroupId::Main(0)]).unwrap();
        let fit = backfit(&e, &d.y, 0.0, 1e-12, 100).unwrap();
        let yc = d.y.mapv(|v| v - mean(d.y.view()));
        let proj = e.apply_smoother(GroupId::Main(0), &yc).unwrap();
        let diff = (&fit.component_values[&0] - &proj)
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!(diff < 1e-8);
        assert!(fit.converged);
    }

    #[test]
    fn penalty_above_lambda_max_zeroes_everything() {
        let d = simulate_case(1, 80, 10, 0.5, 2).unwrap();
        let e = expand(d.x.view(), &BasisSpec::default(), &all_mains(10)).unwrap();
        let lmax = lambda_max(&e, &d.y).unwrap();
        let fit = backfit(&e, &d.y, lmax * 1.0001, 1e-8, 50).unwrap();
        assert!(fit.active_set.is_empty());
        assert_eq!(fit.df, 0.0);
        let fit = backfit(&e, &d.y, lmax * 0.9, 1e-8, 200).unwrap();
        assert!(!fit.active_set.is_empty());
    }

    #[test]
    fn components_centered_and_df_counts_traces() {
        let d = simulate_case(1, 150, 20, 0.5, 3).unwrap();
        let e = expand(d.x.view(), &BasisSpec::default(), &all_mains(20)).unwrap();
        let lmax = lambda_max(&e, &d.y).unwrap();
        let fit = backfit(&e, &d.y, 0.1 * lmax, 1e-8, 500).unwrap();
        for (j, f) in &fit.component_values {
            assert!(mean(f.view()).abs() < 1e-10);
            assert_eq!(fit.active_set.contains(j), fit.component_norms[j] > 0.0);
        }
        assert!((fit.df - 4.0 * fit.active_set.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn null_path_cp_is_variance() {
        let d = simulate_case(1, 60, 8, 0.5, 4).unwrap();
        let e = expand(d.x.view(), &BasisSpec::default(), &all_mains(8)).unwrap();
        let (fit, table) = lambda1_path_cp(&e, &d.y, &[1e9], &SpamConfig::default()).unwrap();
        assert!(fit.active_set.is_empty());
        let yc = d.y.mapv(|v| v - mean(d.y.view()));
        let var = yc.dot(&yc) / 60.0;
        assert!((table.rows[0].cp - var).abs() < 1e-12);
        assert_eq!(table.rows[0].df, 0.0);
    }

    #[test]
    fn path_must_be_descending() {
        let d = simulate_case(1, 60, 8, 0.5, 4).unwrap();
        let e = expand(d.x.view(), &BasisSpec::default(), &all_mains(8)).unwrap();
        assert!(lambda1_path_cp(&e, &d.y, &[0.1, 0.2], &SpamConfig::default()).is_err());
        assert!(lambda1_path_cp(&e, &d.y, &[], &SpamConfig::default()).is_err());
    }

    #[test]
    fn warm_restart_is_a_fixed_point() {
        let d = simulate_case(3, 150, 30, 0.5, 5).unwrap();
        let e = expand(d.x.view(), &BasisSpec::default(), &all_mains(30)).unwrap();
        let lmax = lambda_max(&e, &d.y).unwrap();
        let tol = 1e-7;
        let fit = backfit(&e, &d.y, 0.2 * lmax, tol, 1000).unwrap();
        assert!(fit.converged);
        let again = backfit_from(&e, &d.y, 0.2 * lmax, tol, 1000, Some(&fit)).unwrap();
        for j in fit.component_norms.keys() {
            assert!((fit.component_norms[j] - again.component_norms[j]).abs() < tol);
        }
    }

    #[test]
    fn predictor_matches_training_fit() {
        let d = simulate_case(1, 120, 12, 0.5, 6).unwrap();
        let e = expand(d.x.view(), &BasisSpec::default(), &all_mains(12)).unwrap();
        let lmax = lambda_max(&e, &d.y).unwrap();
        let fit = backfit(&e, &d.y, 0.05 * lmax, 1e-10, 500).unwrap();
        let pred = AdditivePredictor::new(&e, &fit).unwrap();
        let out = pred.predict(d.x.view()).unwrap();
        let diff = (&out - &fit.fitted(120))
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!(diff < 1e-9);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let x = Array2::from_shape_fn((20, 2), |(i, j)| (i * (j + 1)) as f64);
        let e = expand(x.view(), &BasisSpec::default(), &all_mains(2)).unwrap();
        assert!(backfit(&e, &Array1::zeros(19), 0.0, 1e-6, 10).is_err());
    }
}
