//! Orthonormal basis expansions for main effects and pairwise interactions.
//!
//! Every block is built against the empirical measure of the training rows:
//! `(1/n) Φᵀ Φ = I` and every column has mean zero. Main blocks use the
//! monomials `z, z², …, z^degree` of the standardized variable. Pair blocks
//! hold the cross-products of the first `pair_order` orthonormal functions of
//! each parent, residualized against the constant and both full parent main
//! blocks so that a pure interaction is not absorbed by the mains.
//!
//! The orthogonalization coefficients are stored with each block, so new
//! points map through exactly the training-time linear transform.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdamiError};

/// Identifies a design block: one variable or an unordered variable pair.
/// Column indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroupId {
    Main(usize),
    Pair(usize, usize),
}

impl GroupId {
    /// Pair with its indices in increasing order.
    pub fn pair(a: usize, b: usize) -> GroupId {
        if a <= b {
            GroupId::Pair(a, b)
        } else {
            GroupId::Pair(b, a)
        }
    }

    pub fn variables(&self) -> Vec<usize> {
        match *self {
            GroupId::Main(j) => vec![j],
            GroupId::Pair(a, b) => vec![a, b],
        }
    }

    pub fn is_pair(&self) -> bool {
        matches!(self, GroupId::Pair(..))
    }
}

impl fmt::Display for GroupId {
    // One-based, matching the `x1..xk` column naming of generated data.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupId::Main(j) => write!(f, "x{}", j + 1),
            GroupId::Pair(a, b) => write!(f, "x{}:x{}", a + 1, b + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSpec {
    /// Polynomial order of each main-effect block.
    pub degree: usize,
    /// Whether pair groups may be expanded at all.
    pub include_pair_products: bool,
    /// Order of each parent's functions entering the cross-products
    /// (capped at `degree`); 2 keeps interactions at quadratic order.
    pub pair_order: usize,
    /// Add each parent's pure terms (up to `pair_order`) to the pair block.
    /// Pure terms live in the parents' span, so enabling this orthogonalizes
    /// the pair block against the constant only.
    pub pair_margins: bool,
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec {
            degree: 4,
            include_pair_products: true,
            pair_order: 2,
            pair_margins: false,
        }
    }
}

impl BasisSpec {
    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(SdamiError::InvalidArgument(
                "basis degree must be >= 1".into(),
            ));
        }
        if self.pair_order < 1 {
            return Err(SdamiError::InvalidArgument(
                "pair order must be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn effective_pair_order(&self) -> usize {
        self.pair_order.min(self.degree)
    }

    /// Column count of a block for this spec.
    pub fn block_dim(&self, group: GroupId) -> usize {
        match group {
            GroupId::Main(_) => self.degree,
            GroupId::Pair(..) => {
                let q = self.effective_pair_order();
                if self.pair_margins {
                    q * q + 2 * q
                } else {
                    q * q
                }
            }
        }
    }
}

/// Training-time map from a variable to its orthonormal main-effect functions.
#[derive(Debug, Clone, PartialEq)]
pub struct MainTransform {
    pub column: usize,
    pub center: f64,
    pub scale: f64,
    pub degree: usize,
    /// `(degree + 1) × m` coefficients over the raw features `[1, z, …, z^degree]`.
    pub coef: Array2<f64>,
}

impl MainTransform {
    fn raw_features(&self, x: &[f64]) -> Array2<f64> {
        let mut raw = Array2::zeros((x.len(), self.degree + 1));
        for (i, &v) in x.iter().enumerate() {
            let z = (v - self.center) / self.scale;
            let mut p = 1.0;
            for d in 0..=self.degree {
                raw[[i, d]] = p;
                p *= z;
            }
        }
        raw
    }

    pub fn evaluate(&self, x: &[f64]) -> Array2<f64> {
        self.raw_features(x).dot(&self.coef)
    }
}

/// Training-time map from a variable pair to its orthonormal interaction functions.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTransform {
    pub columns: (usize, usize),
    pub parents: (MainTransform, MainTransform),
    pub pair_order: usize,
    pub margins: bool,
    /// `R × m` coefficients over the raw features built by `raw_features`.
    pub coef: Array2<f64>,
}

impl PairTransform {
    fn raw_features(&self, xa: &[f64], xb: &[f64]) -> (Array2<f64>, usize) {
        let pa = self.parents.0.evaluate(xa);
        let pb = self.parents.1.evaluate(xb);
        pair_raw(&pa, &pb, self.pair_order, self.margins)
    }

    pub fn evaluate(&self, xa: &[f64], xb: &[f64]) -> Array2<f64> {
        self.raw_features(xa, xb).0.dot(&self.coef)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockTransform {
    Main(MainTransform),
    Pair(PairTransform),
    /// Hand-built block with no out-of-sample map.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// `n × m` evaluations on the training rows.
    pub matrix: Array2<f64>,
    pub transform: BlockTransform,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisExpansion {
    pub blocks: BTreeMap<GroupId, Block>,
    pub sample_count: usize,
}

impl BasisExpansion {
    /// Wraps hand-built blocks (test fixtures, toy problems).
    pub fn from_matrices(blocks: BTreeMap<GroupId, Array2<f64>>) -> Result<BasisExpansion> {
        let mut n = None;
        let mut out = BTreeMap::new();
        for (g, m) in blocks {
            match n {
                None => n = Some(m.nrows()),
                Some(n0) if n0 != m.nrows() => {
                    return Err(SdamiError::DimensionMismatch(format!(
                        "block {g} has {} rows, expected {n0}",
                        m.nrows()
                    )))
                }
                _ => {}
            }
            out.insert(
                g,
                Block {
                    matrix: m,
                    transform: BlockTransform::Fixed,
                },
            );
        }
        Ok(BasisExpansion {
            blocks: out,
            sample_count: n.unwrap_or(0),
        })
    }

    pub fn block(&self, group: GroupId) -> Result<&Block> {
        self.blocks
            .get(&group)
            .ok_or_else(|| SdamiError::UnknownGroup(group.to_string()))
    }

    pub fn groups(&self) -> impl Iterator<Item = GroupId> + '_ {
        self.blocks.keys().copied()
    }

    pub fn max_block_dim(&self) -> usize {
        self.blocks.values().map(Block::dim).max().unwrap_or(0)
    }

    /// Trace of the projection smoother `S_g = (1/n) Φ_g Φ_gᵀ`.
    pub fn smoother_trace(&self, group: GroupId) -> Result<f64> {
        let b = self.block(group)?;
        let n = self.sample_count as f64;
        Ok(b.matrix.iter().map(|v| v * v).sum::<f64>() / n)
    }

    /// `S_g v = Φ_g ((1/n) Φ_gᵀ v)`.
    pub fn apply_smoother(&self, group: GroupId, v: &Array1<f64>) -> Result<Array1<f64>> {
        let b = self.block(group)?;
        if v.len() != self.sample_count {
            return Err(SdamiError::DimensionMismatch(format!(
                "vector of length {} for {} samples",
                v.len(),
                self.sample_count
            )));
        }
        let z = b.matrix.t().dot(v) / self.sample_count as f64;
        Ok(b.matrix.dot(&z))
    }

    /// Evaluate one block's basis functions at new rows of the full design.
    pub fn transform_group(&self, group: GroupId, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let b = self.block(group)?;
        transform_block(&b.transform, group, x)
    }
}

/// Evaluate a stored block transform at new rows of the full design.
pub fn transform_block(
    transform: &BlockTransform,
    group: GroupId,
    x: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let column = |j: usize| -> Result<Vec<f64>> {
        if j >= x.ncols() {
            return Err(SdamiError::DimensionMismatch(format!(
                "group {group} needs column {} but data has {} columns",
                j + 1,
                x.ncols()
            )));
        }
        Ok(x.column(j).to_vec())
    };
    match transform {
        BlockTransform::Main(t) => Ok(t.evaluate(&column(t.column)?)),
        BlockTransform::Pair(t) => Ok(t.evaluate(&column(t.columns.0)?, &column(t.columns.1)?)),
        BlockTransform::Fixed => Err(SdamiError::InvalidArgument(format!(
            "block {group} has no out-of-sample transform"
        ))),
    }
}

/// Build orthonormal blocks for `groups` over the columns of `x`.
pub fn expand(x: ArrayView2<f64>, spec: &BasisSpec, groups: &[GroupId]) -> Result<BasisExpansion> {
    spec.validate()?;
    let n = x.nrows();
    let mut mains: BTreeMap<usize, (Array2<f64>, MainTransform)> = BTreeMap::new();
    let mut main_for = |j: usize| -> Result<(Array2<f64>, MainTransform)> {
        if let Some(m) = mains.get(&j) {
            return Ok(m.clone());
        }
        let built = build_main(x, j, spec.degree)?;
        mains.insert(j, built.clone());
        Ok(built)
    };

    let mut blocks = BTreeMap::new();
    for &g in groups {
        for j in g.variables() {
            if j >= x.ncols() {
                return Err(SdamiError::InvalidArgument(format!(
                    "group {g} references column {} but data has {} columns",
                    j + 1,
                    x.ncols()
                )));
            }
        }
        let m = spec.block_dim(g);
        if n <= m {
            return Err(SdamiError::TooFewSamples {
                group: g.to_string(),
                n,
                m,
            });
        }
        let block = match g {
            GroupId::Main(j) => {
                let (matrix, t) = main_for(j)?;
                Block {
                    matrix,
                    transform: BlockTransform::Main(t),
                }
            }
            GroupId::Pair(a, b) => {
                if !spec.include_pair_products {
                    return Err(SdamiError::InvalidArgument(format!(
                        "pair group {g} requested but pair products are disabled"
                    )));
                }
                if a == b {
                    return Err(SdamiError::InvalidArgument(format!(
                        "pair group {g} repeats a variable"
                    )));
                }
                let (pa, ta) = main_for(a)?;
                let (pb, tb) = main_for(b)?;
                build_pair(g, &pa, ta, &pb, tb, spec)?
            }
        };
        blocks.insert(g, block);
    }
    Ok(BasisExpansion {
        blocks,
        sample_count: n,
    })
}

fn build_main(x: ArrayView2<f64>, j: usize, degree: usize) -> Result<(Array2<f64>, MainTransform)> {
    let group = GroupId::Main(j);
    let col = x.column(j);
    let n = col.len() as f64;
    let center = col.sum() / n;
    let var = col.iter().map(|v| (v - center) * (v - center)).sum::<f64>() / n;
    let scale = var.sqrt();
    if !(scale > 1e-12 * center.abs().max(1.0)) {
        return Err(SdamiError::RankDeficient {
            group: group.to_string(),
            column: 0,
        });
    }
    let mut t = MainTransform {
        column: j,
        center,
        scale,
        degree,
        coef: Array2::zeros((0, 0)),
    };
    let raw = t.raw_features(&col.to_vec());
    let (matrix, coef) = orthonormalize(&raw, 1, group)?;
    t.coef = coef;
    Ok((matrix, t))
}

fn pair_raw(pa: &Array2<f64>, pb: &Array2<f64>, q: usize, margins: bool) -> (Array2<f64>, usize) {
    let n = pa.nrows();
    let mut cols: Vec<Array1<f64>> = vec![Array1::ones(n)];
    if margins {
        for s in 0..q {
            cols.push(pa.column(s).to_owned());
        }
        for t in 0..q {
            cols.push(pb.column(t).to_owned());
        }
    } else {
        for s in 0..pa.ncols() {
            cols.push(pa.column(s).to_owned());
        }
        for t in 0..pb.ncols() {
            cols.push(pb.column(t).to_owned());
        }
    }
    let nuisance = if margins { 1 } else { cols.len() };
    for s in 0..q {
        for t in 0..q {
            cols.push(&pa.column(s) * &pb.column(t));
        }
    }
    let mut raw = Array2::zeros((n, cols.len()));
    for (c, v) in cols.iter().enumerate() {
        raw.column_mut(c).assign(v);
    }
    (raw, nuisance)
}

fn build_pair(
    group: GroupId,
    pa: &Array2<f64>,
    ta: MainTransform,
    pb: &Array2<f64>,
    tb: MainTransform,
    spec: &BasisSpec,
) -> Result<Block> {
    let q = spec.effective_pair_order();
    let (raw, nuisance) = pair_raw(pa, pb, q, spec.pair_margins);
    let (matrix, coef) = orthonormalize(&raw, nuisance, group)?;
    let (a, b) = (ta.column, tb.column);
    Ok(Block {
        matrix,
        transform: BlockTransform::Pair(PairTransform {
            columns: (a, b),
            parents: (ta, tb),
            pair_order: q,
            margins: spec.pair_margins,
            coef,
        }),
    })
}

/// Modified Gram–Schmidt (two passes) under the empirical inner product
/// `<u, v> = (1/n) uᵀv`.
///
/// The first `nuisance` columns of `raw` span a subspace that the kept columns
/// are orthogonalized against but that is itself dropped; dependent nuisance
/// columns are skipped. Returns the `n × m` orthonormal kept block and the
/// `R × m` coefficients expressing it in the raw columns.
fn orthonormalize(
    raw: &Array2<f64>,
    nuisance: usize,
    group: GroupId,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (n, r) = raw.dim();
    let nf = n as f64;
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(r);
    let mut coefs: Vec<Array1<f64>> = Vec::with_capacity(r);
    let mut kept = Vec::new();

    for c in 0..r {
        let mut v = raw.column(c).to_owned();
        let mut w = Array1::<f64>::zeros(r);
        w[c] = 1.0;
        let orig = (v.dot(&v) / nf).sqrt();
        for _pass in 0..2 {
            for (q, qc) in basis.iter().zip(coefs.iter()) {
                let proj = q.dot(&v) / nf;
                v.scaled_add(-proj, q);
                w.scaled_add(-proj, qc);
            }
        }
        let norm = (v.dot(&v) / nf).sqrt();
        let dependent = !(norm > 1e-9 * orig.max(f64::MIN_POSITIVE)) || !norm.is_finite();
        if dependent {
            if c < nuisance {
                continue;
            }
            return Err(SdamiError::RankDeficient {
                group: group.to_string(),
                column: c - nuisance,
            });
        }
        v /= norm;
        w /= norm;
        if c >= nuisance {
            kept.push(basis.len());
        }
        basis.push(v);
        coefs.push(w);
    }

    let m = kept.len();
    let mut matrix = Array2::zeros((n, m));
    let mut coef = Array2::zeros((r, m));
    for (out, &i) in kept.iter().enumerate() {
        matrix.column_mut(out).assign(&basis[i]);
        coef.column_mut(out).assign(&coefs[i]);
    }
    Ok((matrix, coef))
}

/// Max deviation of `(1/n) ΦᵀΦ` from the identity.
pub fn gram_deviation(block: &Array2<f64>) -> f64 {
    let n = block.nrows() as f64;
    let g = block.t().dot(block) / n;
    let mut worst: f64 = 0.0;
    for ((i, j), v) in g.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((v - target).abs());
    }
    worst
}

/// Max absolute column mean.
pub fn max_column_mean(block: &Array2<f64>) -> f64 {
    block
        .mean_axis(Axis(0))
        .map(|m| m.iter().fold(0.0_f64, |a, v| a.max(v.abs())))
        .unwrap_or(0.0)
}
