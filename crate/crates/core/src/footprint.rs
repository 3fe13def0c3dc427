//! Monte Carlo effect footprints `m_j(x) = E[f(X) | X_j = x]` under
//! independent inputs, and a constancy test on the estimated curve.
//!
//! Samples are drawn in antithetic pairs (each draw is averaged with its
//! reflection about the sampler's center); the reported standard error is
//! computed from the pair means.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataget::{f1, f2, f3, f4, f5, format_float, SIM_RANGE};
use crate::error::{Result, SdamiError};
use crate::util::{derive_seed, rng_from_seed, Rng};

pub const DEFAULT_GRID_POINTS: usize = 21;
pub const DEFAULT_N_MC: usize = 20_000;
pub const DEFAULT_THRESHOLD: f64 = 6.0;
pub const MIN_N_MC: usize = 100;

/// Marginal distribution of one input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    Uniform {
        low: f64,
        high: f64,
    },
    Gaussian {
        mean: f64,
        sd: f64,
    },
    /// `low` or `high` with probability 1/2 each.
    Binary {
        low: f64,
        high: f64,
    },
}

impl Sampler {
    /// A draw and its antithetic reflection.
    fn draw_pair(&self, rng: &mut Rng) -> (f64, f64) {
        match *self {
            Sampler::Uniform { low, high } => {
                let u = rng.random_range(low..high);
                (u, low + high - u)
            }
            Sampler::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                (mean + sd * z, mean - sd * z)
            }
            Sampler::Binary { low, high } => {
                if rng.random_bool(0.5) {
                    (high, low)
                } else {
                    (low, high)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Sampler::Uniform { low, high } | Sampler::Binary { low, high } => {
                low.is_finite() && high.is_finite() && low < high
            }
            Sampler::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
        };
        if !ok {
            return Err(SdamiError::InvalidArgument(format!(
                "invalid sampler {self:?}"
            )));
        }
        Ok(())
    }

    /// Interval used for the default grid.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Sampler::Uniform { low, high } | Sampler::Binary { low, high } => (low, high),
            Sampler::Gaussian { mean, sd } => (mean - 2.0 * sd, mean + 2.0 * sd),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintEstimate {
    pub grid: Vec<f64>,
    pub m_hat: Vec<f64>,
    pub mc_se: Vec<f64>,
    pub samples_per_point: usize,
}

impl FootprintEstimate {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "m_hat", "mc_se"])?;
        for i in 0..self.grid.len() {
            w.write_record([
                format_float(self.grid[i]),
                format_float(self.m_hat[i]),
                format_float(self.mc_se[i]),
            ])?;
        }
        w.flush().map_err(|e| SdamiError::io("<csv>", e))?;
        Ok(())
    }
}

/// Estimate `m_j` on `grid`. `samplers` has one entry per input; entry `j`
/// is ignored. Uses `n_mc / 2` antithetic pairs per grid point.
pub fn estimate_footprint<F>(
    f: F,
    j: usize,
    samplers: &[Sampler],
    grid: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<FootprintEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_mc < MIN_N_MC {
        return Err(SdamiError::InvalidArgument(format!(
            "n_mc must be >= {MIN_N_MC} (got {n_mc})"
        )));
    }
    if j >= samplers.len() {
        return Err(SdamiError::InvalidArgument(format!(
            "variable index {} out of range for {} inputs",
            j + 1,
            samplers.len()
        )));
    }
    for (l, s) in samplers.iter().enumerate() {
        if l != j {
            s.validate()?;
        }
    }
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
        return Err(SdamiError::InvalidArgument(
            "grid must be non-empty and finite".into(),
        ));
    }
    let pairs = n_mc / 2;
    let d = samplers.len();
    let per_point: Vec<(f64, f64)> = grid
        .par_iter()
        .enumerate()
        .map(|(gi, &x)| {
            let mut rng = rng_from_seed(derive_seed(seed, gi as u64));
            let mut a = vec![0.0; d];
            let mut b = vec![0.0; d];
            a[j] = x;
            b[j] = x;
            let (mut sum, mut sumsq) = (0.0, 0.0);
            for _ in 0..pairs {
                for l in 0..d {
                    if l != j {
                        let (u, v) = samplers[l].draw_pair(&mut rng);
                        a[l] = u;
                        b[l] = v;
                    }
                }
                let (fa, fb) = (f(&a), f(&b));
                if !fa.is_finite() {
                    return Err(SdamiError::NonFinite(format!("f{a:?} = {fa}")));
                }
                if !fb.is_finite() {
                    return Err(SdamiError::NonFinite(format!("f{b:?} = {fb}")));
                }
                let h = 0.5 * (fa + fb);
                sum += h;
                sumsq += h * h;
            }
            let p = pairs as f64;
            let m = sum / p;
            let var = ((sumsq - p * m * m) / (p - 1.0)).max(0.0);
            Ok((m, (var / p).sqrt()))
        })
        .collect::<Result<_>>()?;
    Ok(FootprintEstimate {
        grid: grid.to_vec(),
        m_hat: per_point.iter().map(|p| p.0).collect(),
        mc_se: per_point.iter().map(|p| p.1).collect(),
        samples_per_point: 2 * pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstancyVerdict {
    pub is_constant: bool,
    pub score: f64,
}

/// `score = (max m̂ − min m̂) / mean(mc_se)`; constant when `score ≤ threshold`.
pub fn constancy_test(est: &FootprintEstimate, threshold: f64) -> Result<ConstancyVerdict> {
    if est.grid.len() < 5 {
        return Err(SdamiError::InvalidArgument(format!(
            "constancy test needs at least 5 grid points (got {})",
            est.grid.len()
        )));
    }
    let max = est.m_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = est.m_hat.iter().copied().fold(f64::INFINITY, f64::min);
    let range = max - min;
    let se = est.mc_se.iter().sum::<f64>() / est.mc_se.len() as f64;
    let score = if range == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        range / se
    };
    Ok(ConstancyVerdict {
        is_constant: score <= threshold,
        score,
    })
}

/// Built-in test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogFunction {
    F1,
    F2,
    F3,
    F4,
    F5,
    /// `−x₁x₂/2` on `{−1, 1}²`, which equals `1{x₁ ≠ x₂} − ½` there.
    Xor,
    /// `x₁x₂` with centered uniform inputs.
    Bilinear,
}

impl CatalogFunction {
    pub const ALL: [CatalogFunction; 7] = [
        CatalogFunction::F1,
        CatalogFunction::F2,
        CatalogFunction::F3,
        CatalogFunction::F4,
        CatalogFunction::F5,
        CatalogFunction::Xor,
        CatalogFunction::Bilinear,
    ];

    pub fn dim(&self) -> usize {
        match self {
            CatalogFunction::F1
            | CatalogFunction::F2
            | CatalogFunction::F3
            | CatalogFunction::F4 => 1,
            _ => 2,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            CatalogFunction::F1 => f1(x[0]),
            CatalogFunction::F2 => f2(x[0]),
            CatalogFunction::F3 => f3(x[0]),
            CatalogFunction::F4 => f4(x[0]),
            CatalogFunction::F5 => f5(x[0], x[1]),
            CatalogFunction::Xor => -0.5 * x[0] * x[1],
            CatalogFunction::Bilinear => x[0] * x[1],
        }
    }

    /// Input distributions used by default.
    pub fn default_samplers(&self) -> Vec<Sampler> {
        let s = match self {
            CatalogFunction::Xor => Sampler::Binary {
                low: -1.0,
                high: 1.0,
            },
            CatalogFunction::Bilinear => Sampler::Uniform {
                low: -1.0,
                high: 1.0,
            },
            _ => Sampler::Uniform {
                low: SIM_RANGE.0,
                high: SIM_RANGE.1,
            },
        };
        vec![s; self.dim()]
    }
}

impl fmt::Display for CatalogFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CatalogFunction::F1 => "f1",
            CatalogFunction::F2 => "f2",
            CatalogFunction::F3 => "f3",
            CatalogFunction::F4 => "f4",
            CatalogFunction::F5 => "f5",
            CatalogFunction::Xor => "xor",
            CatalogFunction::Bilinear => "bilinear",
        };
        f.write_str(s)
    }
}

impl FromStr for CatalogFunction {
    type Err = SdamiError;

    fn from_str(s: &str) -> Result<Self> {
        CatalogFunction::ALL
            .into_iter()
            .find(|c| c.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                SdamiError::InvalidArgument(format!(
                    "unknown function {s:?} (expected one of f1, f2, f3, f4, f5, xor, bilinear)"
                ))
            })
    }
}

/// Default equispaced grid over a sampler's support.
pub fn default_grid(sampler: &Sampler, points: usize) -> Vec<f64> {
    let (lo, hi) = sampler.support();
    crate::pipeline::Grid::linspace(lo, hi, points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_values_score_zero() {
        let est = FootprintEstimate {
            grid: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            m_hat: vec![1.5; 5],
            mc_se: vec![0.1; 5],
            samples_per_point: 100,
        };
        let v = constancy_test(&est, 6.0).unwrap();
        assert_eq!(v.score, 0.0);
        assert!(v.is_constant);
    }

    #[test]
    fn zero_se_with_variation_is_not_constant() {
        let est = FootprintEstimate {
            grid: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            m_hat: vec![0.0, 0.1, 0.0, 0.0, 0.0],
            mc_se: vec![0.0; 5],
            samples_per_point: 100,
        };
        let v = constancy_test(&est, 6.0).unwrap();
        assert!(v.score.is_infinite() && !v.is_constant);
    }

    #[test]
    fn short_grid_rejected() {
        let est = FootprintEstimate {
            grid: vec![0.0; 4],
            m_hat: vec![0.0; 4],
            mc_se: vec![0.0; 4],
            samples_per_point: 100,
        };
        assert!(constancy_test(&est, 6.0).is_err());
    }

    #[test]
    fn xor_matches_indicator_on_corners() {
        for a in [-1.0, 1.0] {
            for b in [-1.0, 1.0] {
                let ind = if a != b { 1.0 } else { 0.0 };
                assert_eq!(CatalogFunction::Xor.eval(&[a, b]), ind - 0.5);
            }
        }
    }

    #[test]
    fn non_finite_function_reported() {
        let s = [Sampler::Uniform {
            low: 0.0,
            high: 1.0,
        }; 2];
        let err =
            estimate_footprint(|x| 1.0 / (x[0] - x[0]), 0, &s, &[0.0, 1.0], 100, 1).unwrap_err();
        assert!(matches!(err, SdamiError::NonFinite(_)));
    }

    #[test]
    fn catalog_names_parse() {
        for c in CatalogFunction::ALL {
            assert_eq!(c.to_string().parse::<CatalogFunction>().unwrap(), c);
        }
        assert!("f9".parse::<CatalogFunction>().is_err());
    }
}
