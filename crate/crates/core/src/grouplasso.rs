//! Block group lasso over the screened variables: one group per screened main
//! effect plus one per unordered screened pair.
//!
//! Minimizes `(1/2n)‖y − Xθ‖² + λ Σ_g w_g ‖θ_g‖₂` by block coordinate descent.
//! With within-group orthonormal blocks the block update is closed form:
//! `z_g = (1/n) X_gᵀ r + θ_g`, `θ_g = max(0, 1 − λ w_g/‖z_g‖) z_g`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{expand, BasisExpansion, BasisSpec, GroupId};
use crate::dataget::format_float;
use crate::error::{Result, SdamiError};
use crate::util::{fold_assignment, log_spaced_desc, mean};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupLassoConfig {
    pub folds: usize,
    pub path_len: usize,
    pub path_min_ratio: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Pick the largest λ within one standard error of the CV minimum.
    pub one_se_rule: bool,
}

impl Default for GroupLassoConfig {
    fn default() -> Self {
        GroupLassoConfig {
            folds: 5,
            path_len: 30,
            path_min_ratio: 0.005,
            tol: 1e-8,
            max_iter: 1000,
            one_se_rule: true,
        }
    }
}

/// Candidate groups: every screened main plus every screened pair.
pub fn candidate_groups(screened: &BTreeSet<usize>, include_pairs: bool) -> Vec<GroupId> {
    let vars: Vec<usize> = screened.iter().copied().collect();
    let mut groups: Vec<GroupId> = vars.iter().map(|&j| GroupId::Main(j)).collect();
    if include_pairs {
        for (i, &a) in vars.iter().enumerate() {
            for &b in &vars[i + 1..] {
                groups.push(GroupId::Pair(a, b));
            }
        }
    }
    groups
}

#[derive(Debug, Clone)]
struct ProblemSource {
    x: Array2<f64>,
    y: Array1<f64>,
    screened: BTreeSet<usize>,
    spec: BasisSpec,
}

#[derive(Debug, Clone)]
pub struct GroupLassoProblem {
    pub expansion: BasisExpansion,
    /// Centered response.
    pub y: Array1<f64>,
    pub y_mean: f64,
    pub weights: BTreeMap<GroupId, f64>,
    source: Option<ProblemSource>,
}

impl GroupLassoProblem {
    /// Problem over prebuilt blocks (assumed within-group orthonormal) with
    /// default weights `√m_g`.
    pub fn new(expansion: BasisExpansion, y: &Array1<f64>) -> Result<GroupLassoProblem> {
        if y.len() != expansion.sample_count {
            return Err(SdamiError::DimensionMismatch(format!(
                "response of length {} for {} samples",
                y.len(),
                expansion.sample_count
            )));
        }
        let y_mean = mean(y.view());
        let weights = expansion
            .blocks
            .iter()
            .map(|(g, b)| (*g, (b.dim() as f64).sqrt()))
            .collect();
        Ok(GroupLassoProblem {
            expansion,
            y: y.mapv(|v| v - y_mean),
            y_mean,
            weights,
            source: None,
        })
    }

    /// Build the candidate groups over `screened` from raw data. Problems
    /// built this way support cross-validation.
    pub fn from_data(
        x: ArrayView2<f64>,
        y: &Array1<f64>,
        screened: &BTreeSet<usize>,
        spec: &BasisSpec,
    ) -> Result<GroupLassoProblem> {
        let groups = candidate_groups(screened, spec.include_pair_products);
        let expansion = expand(x, spec, &groups)?;
        let mut p = GroupLassoProblem::new(expansion, y)?;
        p.source = Some(ProblemSource {
            x: x.to_owned(),
            y: y.clone(),
            screened: screened.clone(),
            spec: spec.clone(),
        });
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.expansion.sample_count
    }

    pub fn groups(&self) -> Vec<GroupId> {
        self.expansion.groups().collect()
    }

    /// `max_g ‖(1/n) X_gᵀ y‖₂ / w_g`; every penalty at or above it gives θ = 0.
    pub fn lambda_max(&self) -> f64 {
        let n = self.n() as f64;
        self.expansion
            .blocks
            .iter()
            .map(|(g, b)| norm2(&(b.matrix.t().dot(&self.y) / n)) / self.weights[g])
            .fold(0.0, f64::max)
    }

    pub fn default_path(&self, config: &GroupLassoConfig) -> Vec<f64> {
        log_spaced_desc(self.lambda_max(), config.path_min_ratio, config.path_len)
    }

    pub fn residual(&self, coefficients: &BTreeMap<GroupId, Array1<f64>>) -> Array1<f64> {
        let mut r = self.y.clone();
        for (g, theta) in coefficients {
            if let Some(b) = self.expansion.blocks.get(g) {
                r -= &b.matrix.dot(theta);
            }
        }
        r
    }

    /// `(1/2n)‖y − Xθ‖² + λ Σ w_g‖θ_g‖`.
    pub fn objective(&self, coefficients: &BTreeMap<GroupId, Array1<f64>>, lambda2: f64) -> f64 {
        let r = self.residual(coefficients);
        let pen: f64 = coefficients
            .iter()
            .map(|(g, t)| self.weights.get(g).copied().unwrap_or(1.0) * norm2(t))
            .sum();
        r.dot(&r) / (2.0 * self.n() as f64) + lambda2 * pen
    }
}

fn norm2(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectPartition {
    pub main_set: BTreeSet<usize>,
    pub interaction_groups: Vec<(usize, usize)>,
    pub coefficients: BTreeMap<GroupId, Array1<f64>>,
    pub lambda2: f64,
    /// Empirical rms norm of each group's fitted component.
    pub component_norms: BTreeMap<GroupId, f64>,
    pub converged: bool,
    pub kkt_residual: f64,
    pub sweeps: usize,
    /// Penalized objective after each sweep.
    pub objective_trace: Vec<f64>,
}

impl EffectPartition {
    pub fn active_groups(&self) -> Vec<GroupId> {
        self.coefficients
            .iter()
            .filter(|(_, t)| t.iter().any(|v| *v != 0.0))
            .map(|(g, _)| *g)
            .collect()
    }

    /// Variables in `M̂ ∪ vars(Î)`.
    pub fn selected_variables(&self) -> BTreeSet<usize> {
        let mut s = self.main_set.clone();
        for &(a, b) in &self.interaction_groups {
            s.insert(a);
            s.insert(b);
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.main_set.is_empty() && self.interaction_groups.is_empty()
    }

    /// Empty partition at a given penalty (used when nothing was screened).
    pub fn empty(lambda2: f64) -> EffectPartition {
        EffectPartition {
            main_set: BTreeSet::new(),
            interaction_groups: Vec::new(),
            coefficients: BTreeMap::new(),
            lambda2,
            component_norms: BTreeMap::new(),
            converged: true,
            kkt_residual: 0.0,
            sweeps: 0,
            objective_trace: Vec::new(),
        }
    }
}

/// Max KKT violation over groups:
/// active `‖(1/n)X_gᵀr − λ w_g θ_g/‖θ_g‖‖₂`, inactive `(‖(1/n)X_gᵀr‖₂ − λ w_g)₊`.
pub fn kkt_residual(problem: &GroupLassoProblem, partition: &EffectPartition) -> f64 {
    kkt_at(problem, &partition.coefficients, partition.lambda2)
}

fn kkt_at(
    problem: &GroupLassoProblem,
    coefs: &BTreeMap<GroupId, Array1<f64>>,
    lambda2: f64,
) -> f64 {
    kkt_with_residual(problem, coefs, &problem.residual(coefs), lambda2)
}

fn kkt_with_residual(
    problem: &GroupLassoProblem,
    coefs: &BTreeMap<GroupId, Array1<f64>>,
    r: &Array1<f64>,
    lambda2: f64,
) -> f64 {
    let n = problem.n() as f64;
    let mut worst: f64 = 0.0;
    for (g, b) in &problem.expansion.blocks {
        let grad = b.matrix.t().dot(r) / n;
        let w = problem.weights[g];
        let theta = coefs.get(g);
        let nt = theta.map(norm2).unwrap_or(0.0);
        let v = if nt > 0.0 {
            let theta = theta.expect("active");
            let target = theta * (lambda2 * w / nt);
            norm2(&(grad - target))
        } else {
            (norm2(&grad) - lambda2 * w).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

pub fn solve(
    problem: &GroupLassoProblem,
    lambda2: f64,
    tol: f64,
    max_iter: usize,
) -> Result<EffectPartition> {
    solve_from(problem, lambda2, tol, max_iter, None)
}

/// Block coordinate descent from `warm` coefficients (or zero). Full sweeps
/// alternate with inner sweeps over the current active groups; convergence
/// is declared on the full KKT residual.
pub fn solve_from(
    problem: &GroupLassoProblem,
    lambda2: f64,
    tol: f64,
    max_iter: usize,
    warm: Option<&BTreeMap<GroupId, Array1<f64>>>,
) -> Result<EffectPartition> {
    if !(lambda2 >= 0.0) {
        return Err(SdamiError::InvalidArgument(format!(
            "lambda2 must be >= 0 (got {lambda2})"
        )));
    }
    let n = problem.n() as f64;
    let mut coefs: BTreeMap<GroupId, Array1<f64>> = problem
        .expansion
        .blocks
        .iter()
        .map(|(g, b)| {
            let t = warm
                .and_then(|w| w.get(g))
                .filter(|t| t.len() == b.dim())
                .cloned()
                .unwrap_or_else(|| Array1::zeros(b.dim()));
            (*g, t)
        })
        .collect();
    let mut r = problem.residual(&coefs);
    let all: Vec<GroupId> = problem.groups();

    let penalty = |coefs: &BTreeMap<GroupId, Array1<f64>>| -> f64 {
        coefs
            .iter()
            .map(|(g, t)| problem.weights[g] * norm2(t))
            .sum::<f64>()
    };
    // one pass of exact block updates; returns the largest coefficient change
    let sweep = |groups: &[GroupId],
                 coefs: &mut BTreeMap<GroupId, Array1<f64>>,
                 r: &mut Array1<f64>|
     -> f64 {
        let mut max_delta: f64 = 0.0;
        for g in groups {
            let b = &problem.expansion.blocks[g];
            let theta = coefs.get_mut(g).expect("group");
            let z = b.matrix.t().dot(&*r) / n + &*theta;
            let nz = norm2(&z);
            let thr = lambda2 * problem.weights[g];
            let new = if nz > thr {
                z * (1.0 - thr / nz)
            } else {
                Array1::zeros(theta.len())
            };
            let delta = &new - &*theta;
            let d = delta.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if d > 0.0 {
                *r -= &b.matrix.dot(&delta);
                *theta = new;
                max_delta = max_delta.max(d);
            }
        }
        max_delta
    };

    let mut objective_trace = Vec::new();
    let mut sweeps = 0;
    let mut kkt = kkt_with_residual(problem, &coefs, &r, lambda2);
    let mut converged = kkt <= tol;
    while !converged && sweeps < max_iter {
        sweeps += 1;
        sweep(&all, &mut coefs, &mut r);
        objective_trace.push(r.dot(&r) / (2.0 * n) + lambda2 * penalty(&coefs));
        let active: Vec<GroupId> = all
            .iter()
            .copied()
            .filter(|g| coefs[g].iter().any(|v| *v != 0.0))
            .collect();
        for _ in 0..max_iter {
            let d = sweep(&active, &mut coefs, &mut r);
            objective_trace.push(r.dot(&r) / (2.0 * n) + lambda2 * penalty(&coefs));
            if d <= 0.1 * tol {
                break;
            }
        }
        kkt = kkt_with_residual(problem, &coefs, &r, lambda2);
        converged = kkt <= tol;
    }
    if !converged {
        log::warn!("group lasso did not reach KKT tolerance {tol:e} at lambda2 = {lambda2:e}: residual {kkt:e}");
    }
    Ok(partition_from(
        problem,
        coefs,
        lambda2,
        converged,
        kkt,
        sweeps,
        objective_trace,
    ))
}

fn partition_from(
    problem: &GroupLassoProblem,
    coefficients: BTreeMap<GroupId, Array1<f64>>,
    lambda2: f64,
    converged: bool,
    kkt_residual: f64,
    sweeps: usize,
    objective_trace: Vec<f64>,
) -> EffectPartition {
    let n = problem.n() as f64;
    let mut main_set = BTreeSet::new();
    let mut interaction_groups = Vec::new();
    let mut component_norms = BTreeMap::new();
    for (g, theta) in &coefficients {
        let active = theta.iter().any(|v| *v != 0.0);
        let norm = if active {
            let f = problem.expansion.blocks[g].matrix.dot(theta);
            (f.dot(&f) / n).sqrt()
        } else {
            0.0
        };
        component_norms.insert(*g, norm);
        if active {
            match *g {
                GroupId::Main(j) => {
                    main_set.insert(j);
                }
                GroupId::Pair(a, b) => interaction_groups.push((a, b)),
            }
        }
    }
    EffectPartition {
        main_set,
        interaction_groups,
        coefficients,
        lambda2,
        component_norms,
        converged,
        kkt_residual,
        sweeps,
        objective_trace,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub mean_cv_err: f64,
    pub se_cv_err: f64,
    pub n_active_groups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub rows: Vec<CvRow>,
    /// Index of the row with the smallest mean CV error.
    pub min_index: usize,
    /// Index of the selected row.
    pub selected: usize,
}

impl CvTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "mean_cv_err", "se_cv_err", "n_active_groups"])?;
        for r in &self.rows {
            w.write_record([
                format_float(r.lambda),
                format_float(r.mean_cv_err),
                format_float(r.se_cv_err),
                r.n_active_groups.to_string(),
            ])?;
        }
        w.flush().map_err(|e| SdamiError::io("<csv>", e))?;
        Ok(())
    }
}

/// Pick the minimum-error index, then (optionally) the largest λ whose mean
/// error is within one standard error of that minimum. Rows are in
/// descending-λ order.
pub(crate) fn choose_index(means: &[f64], ses: &[f64], one_se: bool) -> (usize, usize) {
    let mut min_i = 0;
    for (i, &m) in means.iter().enumerate() {
        if m < means[min_i] {
            min_i = i;
        }
    }
    if !one_se {
        return (min_i, min_i);
    }
    let bound = means[min_i] + ses[min_i];
    let sel = (0..=min_i).find(|&i| means[i] <= bound).unwrap_or(min_i);
    (min_i, sel)
}

/// Per-fold held-out squared errors along the path.
fn fold_errors(
    src: &ProblemSource,
    labels: &[usize],
    fold: usize,
    path: &[f64],
    config: &GroupLassoConfig,
) -> Result<Vec<f64>> {
    let train: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != fold).collect();
    let test: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == fold).collect();
    let xt = src.x.select(ndarray::Axis(0), &train);
    let yt = src.y.select(ndarray::Axis(0), &train);
    let xv = src.x.select(ndarray::Axis(0), &test);
    let yv = src.y.select(ndarray::Axis(0), &test);
    let prob = GroupLassoProblem::from_data(xt.view(), &yt, &src.screened, &src.spec)?;
    let held: BTreeMap<GroupId, Array2<f64>> = prob
        .groups()
        .into_iter()
        .map(|g| Ok((g, prob.expansion.transform_group(g, xv.view())?)))
        .collect::<Result<_>>()?;

    let mut errs = Vec::with_capacity(path.len());
    let mut warm: Option<BTreeMap<GroupId, Array1<f64>>> = None;
    for &lam in path {
        let part = solve_from(&prob, lam, config.tol, config.max_iter, warm.as_ref())?;
        let mut pred = Array1::from_elem(test.len(), prob.y_mean);
        for (g, theta) in &part.coefficients {
            if theta.iter().any(|v| *v != 0.0) {
                pred += &held[g].dot(theta);
            }
        }
        let d = &yv - &pred;
        errs.push(d.dot(&d) / test.len() as f64);
        warm = Some(part.coefficients);
    }
    Ok(errs)
}

/// K-fold cross-validation of λ₂ along `path` (descending), then a refit on
/// all rows at the selected penalty.
pub fn select_lambda2_cv(
    problem: &GroupLassoProblem,
    folds: usize,
    path: &[f64],
    seed: u64,
    config: &GroupLassoConfig,
) -> Result<(EffectPartition, CvTable)> {
    let src = problem.source.as_ref().ok_or_else(|| {
        SdamiError::InvalidArgument("cross-validation needs a problem built from raw data".into())
    })?;
    if folds < 2 {
        return Err(SdamiError::InvalidArgument(format!(
            "folds must be >= 2 (got {folds})"
        )));
    }
    if path.is_empty() || path.windows(2).any(|w| w[0] < w[1]) {
        return Err(SdamiError::InvalidArgument(
            "lambda2 path must be non-empty and descending".into(),
        ));
    }
    let n = problem.n();
    let max_block = problem.expansion.max_block_dim();
    let smallest_fold = n / folds;
    if smallest_fold <= max_block {
        return Err(SdamiError::FoldTooSmall {
            fold_size: smallest_fold,
            max_block,
        });
    }
    let labels = fold_assignment(n, folds, seed);
    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| fold_errors(src, &labels, f, path, config))
        .collect::<Result<_>>()?;

    // full-data path for active counts and the final refit
    let mut full = Vec::with_capacity(path.len());
    let mut warm: Option<BTreeMap<GroupId, Array1<f64>>> = None;
    for &lam in path {
        let part = solve_from(problem, lam, config.tol, config.max_iter, warm.as_ref())?;
        warm = Some(part.coefficients.clone());
        full.push(part);
    }

    let kf = folds as f64;
    let mut rows = Vec::with_capacity(path.len());
    for (i, &lam) in path.iter().enumerate() {
        let errs: Vec<f64> = per_fold.iter().map(|e| e[i]).collect();
        let m = errs.iter().sum::<f64>() / kf;
        let var = errs.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (kf - 1.0);
        rows.push(CvRow {
            lambda: lam,
            mean_cv_err: m,
            se_cv_err: (var / kf).sqrt(),
            n_active_groups: full[i].active_groups().len(),
        });
    }
    let means: Vec<f64> = rows.iter().map(|r| r.mean_cv_err).collect();
    let ses: Vec<f64> = rows.iter().map(|r| r.se_cv_err).collect();
    let (min_index, selected) = choose_index(&means, &ses, config.one_se_rule);
    let chosen = full.swap_remove(selected);
    Ok((
        chosen,
        CvTable {
            rows,
            min_index,
            selected,
        },
    ))
}
