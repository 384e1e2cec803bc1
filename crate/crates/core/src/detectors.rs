//! Diagonal POVMs for ideal and lossy photon-number-resolving detectors
//! (PNRD) and multiplexed single-photon detectors (MSPD).
//!
//! An ideal MSPD splits the light uniformly over `M` bins read by on-off
//! detectors. The probability of `n` clicks from `k` photons is the number of
//! ways `k` photons occupy exactly `n` of the `M` bins:
//!
//! ```text
//! p(n|k) = M! / (M - n)! * S2(k, n) / M^k
//! ```
//!
//! with `S2` the Stirling numbers of the second kind. This equals the
//! alternating sum `C(M, n) / M^k * sum_{l=0}^{n-1} (-1)^l C(n, l) (n - l)^k`
//! but has no cancellation, so it is evaluated in exact integer arithmetic.
//!
//! Support: `p(n|k)` vanishes unless `n <= min(k, M)`. The multiplex cannot
//! report more clicks than incident photons; the often quoted condition
//! `k <= n <= M` has the inequality reversed. The single exception to the
//! alternating form is `n = k = 0`, where the empty sum would give zero while
//! `p(0|0) = 1`.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    binomial, falling_factorial, ratio_to_f64, stirling2, stirling2_column,
};
use crate::error::{check_efficiency, Error, Result};
use crate::fock::{check_n_max, LossMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorFamily {
    Pnrd,
    Mspd { bins: u64 },
}

/// Detector family plus its quantum efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DetectorSpec {
    pub family: DetectorFamily,
    pub efficiency: f64,
}

impl DetectorSpec {
    pub fn pnrd(efficiency: f64) -> Result<Self> {
        check_efficiency(efficiency, "detector efficiency")?;
        Ok(DetectorSpec {
            family: DetectorFamily::Pnrd,
            efficiency,
        })
    }

    pub fn mspd(bins: u64, efficiency: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Domain("an MSPD needs at least one bin".into()));
        }
        check_efficiency(efficiency, "detector efficiency")?;
        Ok(DetectorSpec {
            family: DetectorFamily::Mspd { bins },
            efficiency,
        })
    }

    pub fn ideal_pnrd() -> Self {
        DetectorSpec {
            family: DetectorFamily::Pnrd,
            efficiency: 1.0,
        }
    }

    pub fn ideal_mspd(bins: u64) -> Result<Self> {
        Self::mspd(bins, 1.0)
    }

    pub fn with_efficiency(self, efficiency: f64) -> Result<Self> {
        check_efficiency(efficiency, "detector efficiency")?;
        Ok(DetectorSpec { efficiency, ..self })
    }

    pub fn bins(&self) -> Option<u64> {
        match self.family {
            DetectorFamily::Pnrd => None,
            DetectorFamily::Mspd { bins } => Some(bins),
        }
    }

    /// POVM element of the lossless detector.
    pub fn ideal_povm(&self, outcome: usize, n_max: usize) -> Result<PovmElement> {
        match self.family {
            DetectorFamily::Pnrd => pnrd_povm(outcome, n_max),
            DetectorFamily::Mspd { bins } => mspd_povm(outcome, bins, n_max),
        }
    }

    /// POVM element with the detector efficiency folded in.
    pub fn povm(&self, outcome: usize, n_max: usize) -> Result<PovmElement> {
        fold_efficiency(&self.ideal_povm(outcome, n_max)?, self.efficiency)
    }
}

impl fmt::Display for DetectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            DetectorFamily::Pnrd => write!(f, "pnrd")?,
            DetectorFamily::Mspd { bins } => write!(f, "mspd:{bins}")?,
        }
        if self.efficiency != 1.0 {
            write!(f, "@{}", self.efficiency)?;
        }
        Ok(())
    }
}

impl FromStr for DetectorSpec {
    type Err = Error;

    /// `pnrd`, `pnrd@0.8`, `mspd:10`, `mspd:10@0.8`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, efficiency) = match s.split_once('@') {
            Some((kind, eta)) => {
                let eta = eta
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Domain(format!("bad efficiency in detector `{s}`")))?;
                (kind.trim(), eta)
            }
            None => (s, 1.0),
        };
        let lower = kind.to_ascii_lowercase();
        if lower == "pnrd" {
            return DetectorSpec::pnrd(efficiency);
        }
        if let Some(bins) = lower.strip_prefix("mspd:") {
            let bins = bins
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::Domain(format!("bad bin count in detector `{s}`")))?;
            return DetectorSpec::mspd(bins, efficiency);
        }
        Err(Error::Domain(format!(
            "unknown detector `{s}` (expected pnrd[@eta] or mspd:M[@eta])"
        )))
    }
}

impl TryFrom<String> for DetectorSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DetectorSpec> for String {
    fn from(d: DetectorSpec) -> String {
        d.to_string()
    }
}

/// Diagonal POVM element: `response[k]` is the probability of the outcome
/// given `k` incident photons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmElement {
    pub outcome: usize,
    pub response: Vec<f64>,
}

impl PovmElement {
    pub fn n_max(&self) -> usize {
        self.response.len() - 1
    }

    pub fn get(&self, k: usize) -> f64 {
        self.response.get(k).copied().unwrap_or(0.0)
    }
}

/// Exact `p(n|k)` for an ideal `bins`-way multiplex.
pub fn mspd_click_probability_exact(n: usize, k: usize, bins: u64) -> BigRational {
    if n as u64 > bins || n > k {
        return BigRational::zero();
    }
    let numerator = falling_factorial(bins, n as u64) * stirling2(k, n);
    let denominator = BigUint::from(bins).pow(k as u32);
    BigRational::new(BigInt::from(numerator), BigInt::from(denominator))
}

/// `p(n|k)` rounded once from the exact surjection count.
pub fn mspd_click_probability(n: usize, k: usize, bins: u64) -> f64 {
    if bins == 0 || n as u64 > bins || n > k {
        return 0.0;
    }
    let numerator = falling_factorial(bins, n as u64) * stirling2(k, n);
    let denominator = BigUint::from(bins).pow(k as u32);
    ratio_to_f64(&numerator, &denominator)
}

/// The textbook alternating sum evaluated in exact rationals.
pub fn mspd_click_probability_alternating_exact(n: usize, k: usize, bins: u64) -> BigRational {
    if n as u64 > bins {
        return BigRational::zero();
    }
    if n == 0 && k == 0 {
        return BigRational::one();
    }
    let mut sum = BigInt::zero();
    for l in 0..n {
        let term = BigInt::from(binomial(n as u64, l as u64)) * BigInt::from(n - l).pow(k as u32);
        if l % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let numerator = BigInt::from(binomial(bins, n as u64)) * sum;
    BigRational::new(numerator, BigInt::from(BigUint::from(bins).pow(k as u32)))
}

/// The textbook alternating sum evaluated directly in `f64`. Loses all
/// precision once `k` reaches a few dozen; kept for cross-checks.
pub fn mspd_click_probability_alternating(n: usize, k: usize, bins: u64) -> f64 {
    if n as u64 > bins {
        return 0.0;
    }
    if n == 0 && k == 0 {
        return 1.0;
    }
    let choose_m = binomial(bins, n as u64).to_f64().unwrap_or(f64::INFINITY);
    let mut sum = 0.0;
    for l in 0..n {
        let c = binomial(n as u64, l as u64).to_f64().unwrap();
        let term = c * ((n - l) as f64 / bins as f64).powi(k as i32);
        sum += if l % 2 == 0 { term } else { -term };
    }
    choose_m * sum
}

/// POVM element for `n` clicks on an ideal `bins`-way multiplex.
pub fn mspd_povm(outcome: usize, bins: u64, n_max: usize) -> Result<PovmElement> {
    if bins == 0 {
        return Err(Error::Domain("an MSPD needs at least one bin".into()));
    }
    if outcome as u64 > bins {
        return Err(Error::Domain(format!(
            "outcome {outcome} exceeds the {bins} bins: the detector cannot report more clicks than bins"
        )));
    }
    check_n_max(n_max)?;
    let prefactor = falling_factorial(bins, outcome as u64);
    let surjections = stirling2_column(outcome, n_max);
    let base = BigUint::from(bins);
    let mut power = BigUint::one();
    let mut response = Vec::with_capacity(n_max + 1);
    for s2 in surjections {
        response.push(if s2.is_zero() {
            0.0
        } else {
            ratio_to_f64(&(&prefactor * s2), &power)
        });
        power *= &base;
    }
    Ok(PovmElement { outcome, response })
}

/// Projector onto `|n>`.
pub fn pnrd_povm(outcome: usize, n_max: usize) -> Result<PovmElement> {
    if outcome > n_max {
        return Err(Error::Domain(format!(
            "outcome {outcome} exceeds n_max = {n_max}"
        )));
    }
    let mut response = vec![0.0; n_max + 1];
    response[outcome] = 1.0;
    Ok(PovmElement { outcome, response })
}

/// Precede the detector with a pure-loss channel of transmission `eta`
/// (adjoint loss map on the diagonal POVM).
pub fn fold_efficiency(povm: &PovmElement, eta: f64) -> Result<PovmElement> {
    check_efficiency(eta, "detector efficiency")?;
    if eta == 1.0 {
        return Ok(povm.clone());
    }
    let loss = LossMatrix::new(eta, povm.n_max())?;
    Ok(PovmElement {
        outcome: povm.outcome,
        response: loss.apply_adjoint(&povm.response),
    })
}

/// `p(n|n) = M! / ((M - n)! M^n)`, the probability that `n` photons land in
/// distinct bins.
pub fn no_collision_probability(n: usize, bins: u64) -> f64 {
    mspd_click_probability(n, n, bins)
}

/// Smallest bin count with `p(n|n) >= threshold`, found by doubling and then
/// bisection (`p(n|n)` is nondecreasing in the bin count).
pub fn min_detectors_for_threshold(n: usize, threshold: f64) -> Result<u64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Domain(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("photon number must be at least 1".into()));
    }
    let meets = |bins: u64| no_collision_probability(n, bins) >= threshold;
    let mut hi = n as u64;
    if meets(hi) {
        return Ok(hi);
    }
    while !meets(hi) {
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| Error::Domain("bin count overflow".into()))?;
    }
    let mut lo = hi / 2; // fails
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
