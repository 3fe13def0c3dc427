//! Independent reference solvers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use sdami::basis::{BasisExpansion, GroupId};
use sdami::grouplasso::GroupLassoProblem;
use sdami::util::rng_from_seed;

pub fn norm2(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// `n × m` block with `(1/n) QᵀQ = I` and zero column means, from seeded normals.
pub fn orthonormal_columns(n: usize, m: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng_from_seed(seed);
    let mut q = Array2::from_shape_fn((n, m), |_| rng.sample::<f64, _>(StandardNormal));
    for j in 0..m {
        let mut c = q.column(j).to_owned();
        let mean = c.mean().unwrap();
        c.mapv_inplace(|v| v - mean);
        for _ in 0..2 {
            for p in 0..j {
                let prev = q.column(p).to_owned();
                let proj = prev.dot(&c) / n as f64;
                c = &c - &(&prev * proj);
            }
        }
        let scale = (c.dot(&c) / n as f64).sqrt();
        q.column_mut(j).assign(&(c / scale));
    }
    q
}

/// Random group-lasso instance: each block orthonormal on its own, blocks correlated.
pub fn random_group_problem(n: usize, dims: &[usize], seed: u64) -> GroupLassoProblem {
    let mut rng = rng_from_seed(seed);
    let mut blocks = BTreeMap::new();
    for (g, &m) in dims.iter().enumerate() {
        blocks.insert(
            GroupId::Main(g),
            orthonormal_columns(n, m, seed.wrapping_mul(31).wrapping_add(g as u64)),
        );
    }
    let e = BasisExpansion::from_matrices(blocks).unwrap();
    let mut y = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
    for (g, b) in &e.blocks {
        if let GroupId::Main(j) = g {
            if j % 2 == 0 {
                let theta = Array1::from_shape_fn(b.dim(), |_| rng.random_range(-1.5..1.5));
                y += &b.matrix.dot(&theta);
            }
        }
    }
    GroupLassoProblem::new(e, &y).unwrap()
}

fn stacked(problem: &GroupLassoProblem) -> (Array2<f64>, Vec<(GroupId, usize, usize)>) {
    let n = problem.n();
    let total: usize = problem.expansion.blocks.values().map(|b| b.dim()).sum();
    let mut x = Array2::zeros((n, total));
    let mut spans = Vec::new();
    let mut at = 0;
    for (g, b) in &problem.expansion.blocks {
        x.slice_mut(s![.., at..at + b.dim()]).assign(&b.matrix);
        spans.push((*g, at, at + b.dim()));
        at += b.dim();
    }
    (x, spans)
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
pub fn top_eigenvalue(a: &Array2<f64>) -> f64 {
    let mut v = Array1::from_elem(a.nrows(), 1.0);
    let mut lam = 0.0;
    for _ in 0..2000 {
        let w = a.dot(&v);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        lam = nw / norm2(&v);
        v = w / nw;
    }
    lam
}

/// Accelerated proximal gradient for `(1/2n)‖y − Xθ‖² + λ Σ w_g‖θ_g‖`.
pub fn prox_group_lasso(
    problem: &GroupLassoProblem,
    lambda: f64,
    iters: usize,
) -> BTreeMap<GroupId, Array1<f64>> {
    let n = problem.n() as f64;
    let (x, spans) = stacked(problem);
    let gram = x.t().dot(&x) / n;
    let xty = x.t().dot(&problem.y) / n;
    let step = 1.0 / top_eigenvalue(&gram);
    let p = x.ncols();
    let mut theta = Array1::<f64>::zeros(p);
    let mut z = theta.clone();
    let mut t = 1.0_f64;
    for _ in 0..iters {
        let grad = gram.dot(&z) - &xty;
        let mut next = &z - &(grad * step);
        for (g, a, b) in &spans {
            let w = problem.weights[g];
            let mut blk = next.slice_mut(s![*a..*b]);
            let nb = blk.iter().map(|v| v * v).sum::<f64>().sqrt();
            let shrink = if nb > 0.0 {
                (1.0 - step * lambda * w / nb).max(0.0)
            } else {
                0.0
            };
            blk.mapv_inplace(|v| v * shrink);
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &next + &((&next - &theta) * ((t - 1.0) / t_next));
        theta = next;
        t = t_next;
    }
    spans
        .into_iter()
        .map(|(g, a, b)| (g, theta.slice(s![a..b]).to_owned()))
        .collect()
}

/// Accelerated proximal gradient for `(1/2n)‖y − Xb‖² + λ‖b‖₁` on given columns.
pub fn prox_lasso(x: &Array2<f64>, y: &Array1<f64>, lambda: f64, iters: usize) -> Array1<f64> {
    let n = x.nrows() as f64;
    let gram = x.t().dot(x) / n;
    let xty = x.t().dot(y) / n;
    let step = 1.0 / top_eigenvalue(&gram);
    let mut b = Array1::<f64>::zeros(x.ncols());
    let mut z = b.clone();
    let mut t = 1.0_f64;
    for _ in 0..iters {
        let grad = gram.dot(&z) - &xty;
        let next = (&z - &(grad * step)).mapv(|v| v.signum() * (v.abs() - step * lambda).max(0.0));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &next + &((&next - &b) * ((t - 1.0) / t_next));
        b = next;
        t = t_next;
    }
    b
}

/// Columns centered and scaled to unit population variance.
pub fn standardize(x: &Array2<f64>) -> Array2<f64> {
    let mut z = x.clone();
    for mut c in z.columns_mut() {
        let m = c.mean().unwrap();
        let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / c.len() as f64).sqrt();
        c.mapv_inplace(|v| (v - m) / sd);
    }
    z
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}
