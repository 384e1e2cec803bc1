//! Genuine `n`-photon non-Gaussianity witness `W = F_n - B_n(p_{n+})`.
//!
//! `B_n(p)` is the largest `|n>` population of any state `D S sum_{k<n} c_k|k>`
//! whose probability above `n` is at most `p`. Only pure Gaussian unitaries
//! act on the core, so the bound covers that restricted class.

pub mod ansatz;
pub mod bound;

use serde::{Deserialize, Serialize};

pub use ansatz::{gaussian_transform, CoreStateAnsatz};
pub use bound::{bound_b, BoundConfig, BoundPoint, BoundResult, Frontier, FrontierCache};

use crate::error::{Error, Result};
use crate::fock::PhotonDistribution;

/// Label attached to every reported bound.
pub const BOUND_CLASS: &str = "pure Gaussian unitaries on rank < n cores";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessResult {
    pub n: usize,
    pub fidelity: f64,
    pub p_nplus: f64,
    pub bound: f64,
    pub witness: f64,
    /// The bound came from a non-converged optimization; a positive witness
    /// is not conclusive.
    pub inconclusive: bool,
}

impl WitnessResult {
    pub fn certifies(&self) -> bool {
        self.witness > 0.0 && !self.inconclusive
    }
}

/// Witness of `prepared` against a frontier for the same `n`.
pub fn witness(
    prepared: &PhotonDistribution,
    n: usize,
    frontier: &Frontier,
) -> Result<WitnessResult> {
    if frontier.n != n {
        return Err(Error::Domain(format!(
            "frontier is for n = {}, witness asked for n = {n}",
            frontier.n
        )));
    }
    if !prepared.is_physical() {
        return Err(Error::Domain(
            "witness needs a physical distribution".into(),
        ));
    }
    let fidelity = prepared.get(n);
    let p_nplus = prepared.tail_above(n).clamp(0.0, 1.0);
    let b = frontier.query(p_nplus)?;
    Ok(WitnessResult {
        n,
        fidelity,
        p_nplus,
        bound: b.bound,
        witness: fidelity - b.bound,
        inconclusive: b.flagged,
    })
}
