//! Compare a measured source against MSPD benchmark curves.
//!
//! A measured point `(P_S, F)` beats the benchmark of an `M`-bin MSPD when it
//! lies on or above that curve at the same success probability. The
//! certificate is the largest `M` beaten.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{fidelity_benchmark, idealized_fidelity_benchmark};
use crate::error::{check_efficiency, Error, Result};
use crate::fock::{idealized_fidelity, PhotonDistribution};
use crate::preparation::{default_lambda_grid, TradeoffCurve};

/// Allowed deviation of a distribution's total from one before renormalizing.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Photon-number distribution estimated by an experimenter, with the
/// herald rate it was obtained at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredInput {
    pub distribution: PhotonDistribution,
    pub success_probability: f64,
    pub target: usize,
    /// Total of the supplied entries when it had to be renormalized.
    pub renormalized_from: Option<f64>,
}

impl MeasuredInput {
    pub fn new(distribution: Vec<f64>, success_probability: f64, target: usize) -> Result<Self> {
        if !(success_probability > 0.0 && success_probability <= 1.0) {
            return Err(Error::Domain(format!(
                "success probability must lie in (0, 1], got {success_probability}"
            )));
        }
        if distribution.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Domain(
                "measured distribution entries must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = distribution.iter().sum();
        let renormalized_from = if (total - 1.0).abs() > NORMALIZATION_TOL {
            log::warn!("measured distribution sums to {total}, renormalizing");
            Some(total)
        } else {
            None
        };
        let distribution = PhotonDistribution::normalized(distribution)?;
        Ok(MeasuredInput {
            distribution,
            success_probability,
            target,
            renormalized_from,
        })
    }

    pub fn fidelity(&self) -> f64 {
        self.distribution.get(self.target)
    }
}

/// Which benchmark curves to compare against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSelection {
    /// Bin counts, in any order; curves with fewer bins than the target are skipped.
    pub bins: Vec<u64>,
    pub eta_m: f64,
    pub eta_s: f64,
    pub lambda_points: usize,
    /// Also compare the loss-compensated fidelity against idealized curves.
    pub idealized: bool,
    pub idealized_lambda_points: usize,
    /// Fidelity slack within which a tie counts as beating the curve; sized
    /// above the interpolation error of the benchmark curves.
    pub tie_tolerance: f64,
}

impl Default for BenchmarkSelection {
    fn default() -> Self {
        BenchmarkSelection {
            bins: (1..=50).collect(),
            eta_m: 1.0,
            eta_s: 1.0,
            lambda_points: 400,
            idealized: false,
            idealized_lambda_points: 60,
            tie_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    /// Compared at equal success probability.
    Compared,
    /// The measured rate exceeds anything this MSPD heralds at all.
    AbovePeak,
    /// Outside the curve's success range; no extrapolation.
    OutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MspdVerdict {
    pub bins: u64,
    pub status: VerdictStatus,
    pub beats: Option<bool>,
    pub benchmark_fidelity: Option<f64>,
    /// Measured minus benchmark fidelity.
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "bins")]
pub enum Certificate {
    /// Below the benchmark of every compared MSPD.
    BelowMinimum,
    /// Largest MSPD beaten.
    Mspd(u64),
    /// Beats every compared MSPD including the largest.
    AtLeast(u64),
}

impl std::fmt::Display for Certificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Certificate::BelowMinimum => write!(f, "below M_min"),
            Certificate::Mspd(m) => write!(f, "M = {m}"),
            Certificate::AtLeast(m) => write!(f, "M >= {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub fidelity: f64,
    pub verdicts: Vec<MspdVerdict>,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealizedComparison {
    pub eta_opt: f64,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub target: usize,
    pub success_probability: f64,
    pub plain: Comparison,
    pub idealized: Option<IdealizedComparison>,
    pub renormalized_from: Option<f64>,
}

/// Verdict of one measured point against one curve.
pub fn compare_point(
    curve: &TradeoffCurve,
    success: f64,
    fidelity: f64,
    tie_tolerance: f64,
) -> MspdVerdict {
    let bins = curve.detector.bins().unwrap_or(0);
    let out_of_range = MspdVerdict {
        bins,
        status: VerdictStatus::OutOfRange,
        beats: None,
        benchmark_fidelity: None,
        margin: None,
    };
    let Some((lo, hi)) = curve.success_range() else {
        return out_of_range;
    };
    if success > hi && curve.has_interior_peak() {
        return MspdVerdict {
            bins,
            status: VerdictStatus::AbovePeak,
            beats: Some(true),
            benchmark_fidelity: None,
            margin: None,
        };
    }
    if success < lo || success > hi {
        return out_of_range;
    }
    match curve.fidelity_at(success) {
        Some(bench) => MspdVerdict {
            bins,
            status: VerdictStatus::Compared,
            beats: Some(fidelity + tie_tolerance >= bench),
            benchmark_fidelity: Some(bench),
            margin: Some(fidelity - bench),
        },
        None => out_of_range,
    }
}

fn certificate(verdicts: &[MspdVerdict]) -> Result<Certificate> {
    if verdicts
        .iter()
        .all(|v| v.status == VerdictStatus::OutOfRange)
    {
        return Err(Error::OutOfBenchmarkRange(
            "measured success probability lies outside every benchmark curve".into(),
        ));
    }
    let largest = verdicts.iter().map(|v| v.bins).max().unwrap_or(0);
    let best = verdicts
        .iter()
        .filter(|v| v.beats == Some(true))
        .map(|v| v.bins)
        .max();
    Ok(match best {
        None => Certificate::BelowMinimum,
        Some(m) if m == largest => Certificate::AtLeast(m),
        Some(m) => Certificate::Mspd(m),
    })
}

fn compare_all(
    curves: &[TradeoffCurve],
    success: f64,
    fidelity: f64,
    tie: f64,
) -> Result<Comparison> {
    let verdicts: Vec<MspdVerdict> = curves
        .iter()
        .map(|c| compare_point(c, success, fidelity, tie))
        .collect();
    let certificate = certificate(&verdicts)?;
    Ok(Comparison {
        fidelity,
        verdicts,
        certificate,
    })
}

fn selected_bins(sel: &BenchmarkSelection, target: usize) -> Result<Vec<u64>> {
    let mut bins: Vec<u64> = sel
        .bins
        .iter()
        .copied()
        .filter(|m| *m >= target.max(1) as u64)
        .collect();
    bins.sort_unstable();
    bins.dedup();
    if bins.is_empty() {
        return Err(Error::Domain(format!(
            "no benchmark MSPD has at least {target} bins"
        )));
    }
    Ok(bins)
}

/// Benchmark curves for a selection, sorted by bin count.
pub fn benchmark_curves(sel: &BenchmarkSelection, target: usize) -> Result<Vec<TradeoffCurve>> {
    check_efficiency(sel.eta_m, "benchmark eta_M")?;
    let lambdas = default_lambda_grid(target, sel.lambda_points);
    selected_bins(sel, target)?
        .par_iter()
        .map(|&m| fidelity_benchmark(m, target, sel.eta_m, sel.eta_s, &lambdas))
        .collect()
}

/// Idealized benchmark curves for a selection, sorted by bin count.
pub fn idealized_benchmark_curves(
    sel: &BenchmarkSelection,
    target: usize,
) -> Result<Vec<TradeoffCurve>> {
    check_efficiency(sel.eta_m, "benchmark eta_M")?;
    let lambdas = default_lambda_grid(target, sel.idealized_lambda_points);
    selected_bins(sel, target)?
        .iter()
        .map(|&m| idealized_fidelity_benchmark(m, target, sel.eta_m, &lambdas))
        .collect()
}

/// Verdicts against every selected MSPD and the equivalent-M certificate.
pub fn evaluate(measured: &MeasuredInput, sel: &BenchmarkSelection) -> Result<EvaluationReport> {
    let curves = benchmark_curves(sel, measured.target)?;
    evaluate_against(measured, sel, &curves, None)
}

/// [`evaluate`] with precomputed curves; idealized curves are built on demand
/// when the selection asks for them and none are supplied.
pub fn evaluate_against(
    measured: &MeasuredInput,
    sel: &BenchmarkSelection,
    curves: &[TradeoffCurve],
    idealized_curves: Option<&[TradeoffCurve]>,
) -> Result<EvaluationReport> {
    let p = measured.success_probability;
    let plain = compare_all(curves, p, measured.fidelity(), sel.tie_tolerance)?;
    let idealized = if sel.idealized {
        let id = idealized_fidelity(&measured.distribution, measured.target)?;
        let built;
        let ideal_curves = match idealized_curves {
            Some(c) => c,
            None => {
                built = idealized_benchmark_curves(sel, measured.target)?;
                &built[..]
            }
        };
        let comparison = compare_all(ideal_curves, p, id.fidelity, sel.tie_tolerance)?;
        Some(IdealizedComparison {
            eta_opt: id.eta_opt,
            comparison,
        })
    } else {
        None
    };
    Ok(EvaluationReport {
        target: measured.target,
        success_probability: p,
        plain,
        idealized,
        renormalized_from: measured.renormalized_from,
    })
}
