//! Min-max normalization fitted on training rows, and SMOTE oversampling
//! of the minority class.
//!
//! SMOTE draws all randomness from a [`SplitMix64`](crate::rng::SplitMix64)
//! seeded by the config, so the same inputs always yield byte-identical
//! synthetics. For each synthetic the generator is consulted twice, in this
//! order: once for the neighbor index and once for the interpolation
//! coefficient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scalar::Real;

/// Column-wise min/max fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationModel<R: Real> {
    mins: Vec<R>,
    maxs: Vec<R>,
}

/// Fit a min-max normalizer on the given rows.
pub fn fit_normalizer<R: Real>(rows: &[Vec<R>]) -> Result<NormalizationModel<R>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::data("cannot fit a normalizer on no rows"))?;
    let dim = first.len();
    let mut mins = first.clone();
    let mut maxs = first.clone();
    for row in &rows[1..] {
        if row.len() != dim {
            return Err(Error::data(format!(
                "ragged rows: expected dimension {dim}, found {}",
                row.len()
            )));
        }
        for (i, &v) in row.iter().enumerate() {
            mins[i] = mins[i].min(v);
            maxs[i] = maxs[i].max(v);
        }
    }
    Ok(NormalizationModel { mins, maxs })
}

impl<R: Real> NormalizationModel<R> {
    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[R] {
        &self.mins
    }

    pub fn maxs(&self) -> &[R] {
        &self.maxs
    }

    pub fn from_bounds(mins: Vec<R>, maxs: Vec<R>) -> Result<Self> {
        if mins.len() != maxs.len() {
            return Err(Error::data("min/max bound lists differ in length"));
        }
        if mins.iter().zip(&maxs).any(|(lo, hi)| lo > hi) {
            return Err(Error::data("normalizer min exceeds max"));
        }
        Ok(NormalizationModel { mins, maxs })
    }

    /// Scale a vector into [0, 1] per feature. Constant features map to
    /// 0.0; out-of-range values are clamped so test-time inputs stay inside
    /// the training domain.
    pub fn apply(&self, v: &[R]) -> Result<Vec<R>> {
        if v.len() != self.dim() {
            return Err(Error::data(format!(
                "dimension mismatch: normalizer has {}, vector has {}",
                self.dim(),
                v.len()
            )));
        }
        Ok(v.iter()
            .enumerate()
            .map(|(i, &x)| {
                let (lo, hi) = (self.mins[i], self.maxs[i]);
                if hi > lo {
                    ((x - lo) / (hi - lo)).max(R::zero()).min(R::one())
                } else {
                    R::zero()
                }
            })
            .collect())
    }
}

/// SMOTE parameters. Defaults: 5 nearest neighbors, 100 percent, seed 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub percentage: u32,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            percentage: 100,
            seed: 1,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::config("smote k_neighbors must be at least 1"));
        }
        if self.percentage % 100 != 0 {
            return Err(Error::config(format!(
                "smote percentage {} is not a multiple of 100",
                self.percentage
            )));
        }
        Ok(())
    }
}

/// Generate `(percentage/100) * |minority|` synthetic minority samples.
///
/// Each synthetic is `x + u * (n - x)` for a minority sample `x`, one of
/// its k nearest minority neighbors `n` (Euclidean, ties by index), and
/// `u` uniform in [0, 1). Samples are visited in input order, one full
/// pass per 100 percent. k shrinks to `|minority| - 1` when the class is
/// smaller than k + 1.
pub fn smote_oversample<R: Real>(minority: &[Vec<R>], cfg: &SmoteConfig) -> Result<Vec<Vec<R>>> {
    cfg.validate()?;
    if minority.len() < 2 {
        return Err(Error::data(format!(
            "smote needs at least 2 minority samples, got {}",
            minority.len()
        )));
    }
    let dim = minority[0].len();
    if minority.iter().any(|row| row.len() != dim) {
        return Err(Error::data("ragged minority rows"));
    }
    let k = cfg.k_neighbors.min(minority.len() - 1);

    // k nearest minority neighbors per sample, ties broken by index.
    let neighbors: Vec<Vec<usize>> = (0..minority.len())
        .map(|i| {
            let mut by_distance: Vec<(R, usize)> = (0..minority.len())
                .filter(|&j| j != i)
                .map(|j| (squared_distance(&minority[i], &minority[j]), j))
                .collect();
            by_distance.sort_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .expect("distances are finite")
                    .then_with(|| a.1.cmp(&b.1))
            });
            by_distance.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let rounds = (cfg.percentage / 100) as usize;
    let mut rng = SplitMix64::new(cfg.seed);
    let mut synthetics = Vec::with_capacity(rounds * minority.len());
    for _ in 0..rounds {
        for (i, x) in minority.iter().enumerate() {
            let neighbor = &minority[neighbors[i][rng.next_below(k)]];
            let u = R::from_f64_const(rng.next_f64());
            let synthetic = x
                .iter()
                .zip(neighbor)
                .map(|(&a, &b)| a + u * (b - a))
                .collect();
            synthetics.push(synthetic);
        }
    }
    Ok(synthetics)
}

fn squared_distance<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter()
        .zip(b)
        .fold(R::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}
