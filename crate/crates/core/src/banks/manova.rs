use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BankError;
use crate::linalg::{symmetric_eigen, Matrix};
use crate::stats::f_survival;

/// Shuffles used when the total scatter matrix is singular.
pub const DEFAULT_SHUFFLES: usize = 1000;
pub const DEFAULT_SEED: u64 = 0x5eed_ba5e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManovaMethod {
    FApproximation,
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManovaResult {
    pub pillai_trace: f64,
    pub p_value: f64,
    pub method: ManovaMethod,
}

/// Observations whitened by the total scatter: `z = Λ^{-1/2} Qᵀ (x - x̄)`
/// over the non-degenerate eigen-directions of `T = H + E`. Since `T` does
/// not depend on group labels, Pillai's trace of any labelling is
/// `Σ_g n_g |z̄_g|²`.
struct Whitened {
    rows: Vec<Vec<f64>>,
    sizes: Vec<usize>,
    dim: usize,
    singular: bool,
}

fn validate(groups: &[Vec<Vec<f64>>]) -> Result<usize, BankError> {
    if groups.len() < 2 {
        return Err(BankError::Argument("MANOVA needs at least two groups".into()));
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(BankError::Argument("MANOVA groups must be nonempty".into()));
    }
    let d = groups[0][0].len();
    if d == 0 || groups.iter().flatten().any(|v| v.len() != d) {
        return Err(BankError::Argument("observations must share one nonzero dimension".into()));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    if n <= groups.len() + d {
        return Err(BankError::Argument(alloc::format!(
            "need more than g + d = {} observations, got {n}",
            groups.len() + d
        )));
    }
    Ok(d)
}

fn whiten(groups: &[Vec<Vec<f64>>], d: usize) -> Whitened {
    let n: usize = groups.iter().map(Vec::len).sum();
    let mut mean = alloc::vec![0.0; d];
    for x in groups.iter().flatten() {
        mean.iter_mut().zip(x).for_each(|(m, v)| *m += v / n as f64);
    }
    let centered: Vec<Vec<f64>> = groups
        .iter()
        .flatten()
        .map(|x| x.iter().zip(&mean).map(|(a, b)| a - b).collect())
        .collect();
    let mut total = Matrix::zeros(d);
    for c in &centered {
        total.add_outer(c, c, 1.0);
    }
    let (values, vectors) = symmetric_eigen(&total);
    let largest = values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..d)
        .filter(|&i| largest > 0.0 && values[i] > 1e-10 * largest)
        .collect();
    let rows = centered
        .iter()
        .map(|c| {
            keep.iter()
                .map(|&i| {
                    let proj: f64 = vectors[i].iter().zip(c).map(|(q, x)| q * x).sum();
                    proj / libm::sqrt(values[i])
                })
                .collect()
        })
        .collect();
    Whitened {
        rows,
        sizes: groups.iter().map(Vec::len).collect(),
        dim: keep.len(),
        singular: keep.len() < d,
    }
}

impl Whitened {
    fn trace_for(&self, order: &[usize]) -> f64 {
        let mut v = 0.0;
        let mut start = 0;
        for &size in &self.sizes {
            let mut sum = alloc::vec![0.0; self.dim];
            for &idx in &order[start..start + size] {
                sum.iter_mut().zip(&self.rows[idx]).for_each(|(s, z)| *s += z);
            }
            v += sum.iter().map(|s| s * s).sum::<f64>() / size as f64;
            start += size;
        }
        v
    }

    fn observed(&self) -> f64 {
        let order: Vec<usize> = (0..self.rows.len()).collect();
        self.trace_for(&order)
    }

    fn permutation_p(&self, observed: f64, shuffles: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        let tolerance = 1e-9 * observed.max(1.0);
        let mut hits = 0usize;
        for _ in 0..shuffles {
            order.shuffle(&mut rng);
            if self.trace_for(&order) >= observed - tolerance {
                hits += 1;
            }
        }
        hits as f64 / shuffles as f64
    }
}

/// Pillai's trace `V = tr(H (H + E)^{-1})` of a one-way layout.
pub fn pillai_trace(groups: &[Vec<Vec<f64>>]) -> Result<f64, BankError> {
    let d = validate(groups)?;
    Ok(whiten(groups, d).observed())
}

/// One-way MANOVA with Pillai's trace. The p-value comes from the usual F
/// approximation, or from a label-permutation test when `H + E` is singular.
pub fn manova_pillai(groups: &[Vec<Vec<f64>>]) -> Result<ManovaResult, BankError> {
    manova_pillai_with(groups, DEFAULT_SHUFFLES, DEFAULT_SEED)
}

pub fn manova_pillai_with(groups: &[Vec<Vec<f64>>], shuffles: usize, seed: u64) -> Result<ManovaResult, BankError> {
    let d = validate(groups)?;
    let w = whiten(groups, d);
    let v = w.observed();
    if w.singular {
        return Ok(ManovaResult {
            pillai_trace: v,
            p_value: w.permutation_p(v, shuffles, seed),
            method: ManovaMethod::Permutation,
        });
    }
    let g = groups.len() as f64;
    let n: f64 = groups.iter().map(|x| x.len() as f64).sum();
    let p = d as f64;
    let s = p.min(g - 1.0);
    let m = (libm::fabs(p - g + 1.0) - 1.0) / 2.0;
    let nn = (n - g - p - 1.0) / 2.0;
    let df1 = s * (2.0 * m + s + 1.0);
    let df2 = s * (2.0 * nn + s + 1.0);
    let p_value = if v >= s - 1e-12 {
        0.0
    } else {
        let f = (2.0 * nn + s + 1.0) / (2.0 * m + s + 1.0) * v / (s - v);
        f_survival(f, df1, df2)
    };
    Ok(ManovaResult {
        pillai_trace: v,
        p_value,
        method: ManovaMethod::FApproximation,
    })
}

/// Label-permutation p-value: the fraction of shuffles whose trace reaches
/// the observed one.
pub fn manova_permutation_test(groups: &[Vec<Vec<f64>>], shuffles: usize, seed: u64) -> Result<ManovaResult, BankError> {
    let d = validate(groups)?;
    let w = whiten(groups, d);
    let v = w.observed();
    Ok(ManovaResult {
        pillai_trace: v,
        p_value: w.permutation_p(v, shuffles, seed),
        method: ManovaMethod::Permutation,
    })
}
