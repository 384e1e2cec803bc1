//! Truncated photon-number distributions and the binomial loss channel.
//!
//! Every state handled by the pipeline is diagonal in the Fock basis, so a
//! state is a probability vector over `k = 0..=n_max` and a pure-loss channel
//! with transmission `eta` acts as the column-stochastic matrix
//! `B[s, k] = C(k, s) eta^s (1 - eta)^(k - s)`.
//!
//! The inverse channel is applied in closed form as `B(1/eta)`, i.e.
//! `B^-1[s, k] = C(k, s) eta^-k (eta - 1)^(k - s)`. It preserves the trace
//! but may produce negative entries; such outputs are flagged as
//! quasi-distributions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial_table, MAX_N_MAX};
use crate::error::{check_efficiency, Error, Result};

/// Entries above `-EPS_NEG` count as nonnegative.
pub const EPS_NEG: f64 = 1e-12;
/// Default tolerance on the total probability of a physical distribution.
pub const EPS_TRUNC: f64 = 1e-10;
/// Default Fock-space cutoff.
pub const DEFAULT_N_MAX: usize = 64;

const LN_F64_MAX: f64 = 709.0;

/// Diagonal of a Fock-diagonal density matrix, truncated at `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonDistribution {
    probs: Vec<f64>,
    #[serde(default)]
    quasi: bool,
}

impl PhotonDistribution {
    /// Validated physical distribution; the sum must be within [`EPS_TRUNC`] of one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_budget(probs, EPS_TRUNC)
    }

    /// Validated physical distribution with an explicit truncation budget.
    pub fn with_budget(probs: Vec<f64>, budget: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain(
                "distribution must have at least one entry".into(),
            ));
        }
        if let Some((k, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < -EPS_NEG)
        {
            return Err(Error::Domain(format!(
                "entry {k} = {p} is not a probability"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > budget {
            return Err(Error::Truncation {
                message: format!("distribution sums to {total}, outside 1 +/- {budget:e}"),
                required: probs.len() - 1,
            });
        }
        Ok(PhotonDistribution {
            probs,
            quasi: false,
        })
    }

    /// Rescale nonnegative weights to unit sum.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Domain(format!(
                "cannot normalize weights with sum {total}"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        let quasi = probs.iter().any(|p| *p < -EPS_NEG);
        PhotonDistribution { probs, quasi }
    }

    /// Fock state `|n><n|` truncated at `n_max`.
    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::Domain(format!(
                "Fock number {n} exceeds n_max = {n_max}"
            )));
        }
        let mut probs = vec![0.0; n_max + 1];
        probs[n] = 1.0;
        Ok(PhotonDistribution {
            probs,
            quasi: false,
        })
    }

    pub fn vacuum(n_max: usize) -> Self {
        Self::fock(0, n_max).expect("vacuum always fits")
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// Entry `k`, zero beyond the truncation.
    pub fn get(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    /// Set when an entry is below `-EPS_NEG` (output of the inverse channel).
    pub fn is_quasi(&self) -> bool {
        self.quasi
    }

    pub fn is_physical(&self) -> bool {
        self.probs.iter().all(|p| *p >= -EPS_NEG)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    /// `p_{n+}`: probability of strictly more than `n` photons.
    pub fn tail_above(&self, n: usize) -> f64 {
        self.probs.iter().skip(n + 1).sum()
    }

    /// Same distribution on a different cutoff; dropping mass is an error.
    pub fn resized(&self, n_max: usize) -> Result<Self> {
        let mut probs = self.probs.clone();
        if n_max < self.n_max() {
            let dropped: f64 = probs[n_max + 1..].iter().map(|p| p.abs()).sum();
            if dropped > EPS_TRUNC {
                return Err(Error::Truncation {
                    message: format!("resizing to {n_max} drops mass {dropped:e}"),
                    required: self.n_max(),
                });
            }
        }
        probs.resize(n_max + 1, 0.0);
        Ok(PhotonDistribution {
            probs,
            quasi: self.quasi,
        })
    }

    /// Index of the last nonzero entry.
    pub(crate) fn support_end(&self) -> usize {
        self.probs.iter().rposition(|p| *p != 0.0).unwrap_or(0)
    }
}

/// Pure-loss channel matrix on the truncated block.
#[derive(Debug, Clone)]
pub struct LossMatrix {
    eta: f64,
    n_max: usize,
    /// Column-major: `columns[k][s] = B[s, k]` for `s <= k`.
    columns: Vec<Vec<f64>>,
}

impl LossMatrix {
    pub fn new(eta: f64, n_max: usize) -> Result<Self> {
        check_efficiency(eta, "transmission eta")?;
        check_n_max(n_max)?;
        let table = binomial_table(n_max);
        let eta_pow = powers(eta, n_max);
        let loss_pow = powers(1.0 - eta, n_max);
        let columns = (0..=n_max)
            .map(|k| {
                (0..=k)
                    .map(|s| table.get(k, s) * eta_pow[s] * loss_pow[k - s])
                    .collect()
            })
            .collect();
        Ok(LossMatrix {
            eta,
            n_max,
            columns,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn entry(&self, s: usize, k: usize) -> f64 {
        if s > k || k > self.n_max {
            0.0
        } else {
            self.columns[k][s]
        }
    }

    /// `B x` for a vector indexed by incident photon number.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (k, &xk) in x.iter().enumerate() {
            if xk == 0.0 {
                continue;
            }
            for (s, b) in self.columns[k].iter().enumerate() {
                out[s] += b * xk;
            }
        }
        out
    }

    /// `B^T y`: the adjoint action on diagonal observables such as POVM responses.
    pub fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        (0..y.len())
            .map(|k| self.columns[k].iter().zip(y).map(|(b, ys)| b * ys).sum())
            .collect()
    }
}

pub(crate) fn check_n_max(n_max: usize) -> Result<()> {
    if n_max > MAX_N_MAX {
        return Err(Error::Truncation {
            message: format!("n_max = {n_max} exceeds the supported maximum {MAX_N_MAX}"),
            required: n_max,
        });
    }
    Ok(())
}

fn powers(x: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 1.0;
    for _ in 0..=n {
        out.push(acc);
        acc *= x;
    }
    out
}

/// Apply the pure-loss channel with transmission `eta`.
pub fn loss_channel(dist: &PhotonDistribution, eta: f64) -> Result<PhotonDistribution> {
    check_efficiency(eta, "transmission eta")?;
    if eta == 1.0 {
        return Ok(dist.clone());
    }
    let matrix = LossMatrix::new(eta, dist.n_max())?;
    Ok(PhotonDistribution::from_raw(matrix.apply(dist.probs())))
}

/// Largest photon number whose inverse-loss coefficients stay finite at `eta`.
pub fn max_invertible_n(eta: f64) -> usize {
    let growth = ((2.0 - eta) / eta).ln();
    if growth <= 0.0 {
        usize::MAX
    } else {
        (LN_F64_MAX / growth).floor() as usize
    }
}

/// Apply the inverse of the pure-loss channel, `B(eta)^-1 = B(1/eta)`.
///
/// The result is trace preserving but may be a quasi-distribution.
pub fn inverse_loss_channel(dist: &PhotonDistribution, eta: f64) -> Result<PhotonDistribution> {
    if eta == 0.0 {
        return Err(Error::Domain("inverse loss undefined at eta = 0".into()));
    }
    check_efficiency(eta, "transmission eta")?;
    if eta == 1.0 {
        return Ok(dist.clone());
    }
    let mut probs = inverse_loss_probs(dist.probs(), dist.support_end(), eta)?;
    probs.resize(dist.n_max() + 1, 0.0);
    Ok(PhotonDistribution::from_raw(probs))
}

/// Inverse loss restricted to entries `0..=support_end`.
fn inverse_loss_probs(probs: &[f64], support_end: usize, eta: f64) -> Result<Vec<f64>> {
    let limit = max_invertible_n(eta);
    if support_end > limit {
        return Err(Error::Range {
            message: format!(
                "inverse loss at eta = {eta} overflows for photon numbers up to {support_end}"
            ),
            max_n_max: limit,
        });
    }
    let table = binomial_table(support_end);
    // entry = C(k, s) eta^-s q^(k - s) with q = (eta - 1) / eta
    let q = (eta - 1.0) / eta;
    let q_pow = powers(q, support_end);
    let inv_eta = 1.0 / eta;
    let mut out = vec![0.0; support_end + 1];
    let mut scale = 1.0;
    for (s, slot) in out.iter_mut().enumerate() {
        let acc: f64 = (s..=support_end)
            .map(|k| table.get(k, s) * q_pow[k - s] * probs[k])
            .sum();
        *slot = scale * acc;
        scale *= inv_eta;
    }
    Ok(out)
}

/// Result of the loss-compensated fidelity maximization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealizedFidelity {
    pub fidelity: f64,
    pub eta_opt: f64,
}

const ETA_GRID: usize = 1000;
const GOLDEN_TOL: f64 = 1e-10;

/// Population of `|n>` after inverse loss at `eta`, or `None` when the
/// compensated state has an entry below `-EPS_NEG` or overflows.
fn admissible_population(probs: &[f64], support_end: usize, n: usize, eta: f64) -> Option<f64> {
    if eta >= 1.0 {
        return Some(probs.get(n).copied().unwrap_or(0.0));
    }
    let out = inverse_loss_probs(probs, support_end, eta).ok()?;
    if out.iter().all(|p| p.is_finite() && *p >= -EPS_NEG) {
        Some(out.get(n).copied().unwrap_or(0.0))
    } else {
        None
    }
}

/// Largest population of `|n>` over all loss compensations that leave a
/// physical state: a grid of 1000 transmissions on (0, 1] followed by
/// golden-section refinement around the best admissible grid point.
pub fn idealized_fidelity(dist: &PhotonDistribution, n: usize) -> Result<IdealizedFidelity> {
    if !dist.is_physical() {
        return Err(Error::Domain(
            "idealized fidelity needs a physical distribution".into(),
        ));
    }
    let probs = dist.probs();
    let support_end = dist.support_end();
    if n > support_end {
        // compensated entries above the support stay zero
        return Ok(IdealizedFidelity {
            fidelity: dist.get(n),
            eta_opt: 1.0,
        });
    }

    let grid: Vec<(usize, Option<f64>)> = (1..=ETA_GRID)
        .into_par_iter()
        .map(|i| {
            (
                i,
                admissible_population(probs, support_end, n, i as f64 / ETA_GRID as f64),
            )
        })
        .collect();

    let mut best = IdealizedFidelity {
        fidelity: dist.get(n),
        eta_opt: 1.0,
    };
    let mut best_index = ETA_GRID;
    for (i, value) in &grid {
        if let Some(f) = value {
            if *f > best.fidelity {
                best = IdealizedFidelity {
                    fidelity: *f,
                    eta_opt: *i as f64 / ETA_GRID as f64,
                };
                best_index = *i;
            }
        }
    }

    let lo = (best_index.saturating_sub(1) as f64 / ETA_GRID as f64).max(f64::MIN_POSITIVE);
    let hi = (best_index + 1).min(ETA_GRID) as f64 / ETA_GRID as f64;
    let objective = |eta: f64| admissible_population(probs, support_end, n, eta);
    let refined = crate::optimize::golden_section_max(lo, hi, GOLDEN_TOL, |eta| {
        objective(eta).unwrap_or(f64::NEG_INFINITY)
    });
    for (eta, value) in refined.probes {
        if value > best.fidelity {
            best = IdealizedFidelity {
                fidelity: value,
                eta_opt: eta,
            };
        }
    }
    Ok(best)
}
