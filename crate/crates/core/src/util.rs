//! Small numeric and seeding helpers shared across modules.

use ndarray::{Array1, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Deterministic generator for a seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent sub-seed from a master seed and a stream tag
/// (splitmix64 finalizer over the combined words).
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mean(v: ArrayView1<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sum() / v.len() as f64
}

/// Root mean square over entries.
pub fn rms(v: ArrayView1<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.dot(&v) / v.len() as f64).sqrt()
}

pub fn center(v: &mut Array1<f64>) {
    let m = mean(v.view());
    v.mapv_inplace(|x| x - m);
}

/// `n` log-spaced values from `hi` down to `hi * ratio`.
pub fn log_spaced_desc(hi: f64, ratio: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    if hi <= 0.0 {
        return vec![0.0; n];
    }
    if n == 1 {
        return vec![hi];
    }
    let lo = hi * ratio;
    let (lh, ll) = (hi.ln(), lo.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                hi
            } else if i == n - 1 {
                lo
            } else {
                (lh + (ll - lh) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Sample mean and (n-1)-denominator standard deviation; sd absent below two values.
pub fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let m = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (m, None);
    }
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (m, Some((ss / (n - 1) as f64).sqrt()))
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Shuffled fold labels `0..folds` for `n` samples.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let mut labels = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        labels[i] = pos % folds;
    }
    labels
}
