//! Benchmarks an experimental source has to beat: the joint two-detector
//! click probability, fidelity trade-off curves for ideal and lossy MSPDs
//! (plain and loss-compensated), and the PNRD efficiency that mimics an MSPD.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{fold_efficiency, DetectorSpec};
use crate::error::{check_efficiency, Error, Result};
use crate::fock::idealized_fidelity;
use crate::optimize::{golden_section_max, scan_then_golden_max};
use crate::preparation::{
    check_grid, curve_from_points, default_lambda_grid, effective_n_max, log_spaced,
    pair_distribution, prepare_along, tradeoff_curve, CurvePoint, FidelityKind, Herald,
    TradeoffCurve,
};

/// Upper end of the squeezing search for the joint probability.
pub const JOINT_LAMBDA_MAX: f64 = 0.985;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointOptions {
    pub eta_s: f64,
    pub eta_m: f64,
    pub lambda_max: f64,
    pub scan_points: usize,
    pub n_max: Option<usize>,
}

impl Default for JointOptions {
    fn default() -> Self {
        JointOptions {
            eta_s: 1.0,
            eta_m: 1.0,
            lambda_max: JOINT_LAMBDA_MAX,
            scan_points: 400,
            n_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointBenchmark {
    pub probability: f64,
    pub lambda_opt: f64,
    /// The maximizer sits at `lambda_max`: the true supremum may lie beyond
    /// the searched range.
    pub at_boundary: bool,
    pub n_max: usize,
}

/// `max_l sum_k P(k) pi_M(k) pi_S(k)`: both arms of the source measured by
/// copies of `detector`, each reporting `n`.
pub fn joint_probability_benchmark(detector: &DetectorSpec, n: usize) -> Result<JointBenchmark> {
    joint_probability_benchmark_with(detector, n, &JointOptions::default())
}

pub fn joint_probability_benchmark_with(
    detector: &DetectorSpec,
    n: usize,
    opts: &JointOptions,
) -> Result<JointBenchmark> {
    check_efficiency(opts.eta_s, "signal efficiency eta_S")?;
    check_efficiency(opts.eta_m, "measurement efficiency eta_M")?;
    if !(opts.lambda_max > 0.0 && opts.lambda_max < 1.0) {
        return Err(Error::Domain(format!(
            "lambda_max must lie in (0, 1), got {}",
            opts.lambda_max
        )));
    }
    let n_max = effective_n_max(opts.n_max, opts.lambda_max)?.max(n);
    let ideal = detector.ideal_povm(n, n_max)?;
    let herald = fold_efficiency(&ideal, detector.efficiency * opts.eta_m)?;
    let verify = fold_efficiency(&ideal, detector.efficiency * opts.eta_s)?;
    let overlap: Vec<f64> = herald
        .response
        .iter()
        .zip(&verify.response)
        .map(|(a, b)| a * b)
        .collect();
    let joint = |lambda: f64| -> f64 {
        pair_distribution(lambda, n_max)
            .iter()
            .zip(&overlap)
            .map(|(p, o)| p * o)
            .sum()
    };
    let lo = opts.lambda_max / opts.scan_points.max(3) as f64;
    let (lambda_opt, probability) =
        scan_then_golden_max(lo, opts.lambda_max, opts.scan_points, 1e-10, joint);
    let step = (opts.lambda_max - lo) / (opts.scan_points.max(3) - 1) as f64;
    Ok(JointBenchmark {
        probability,
        lambda_opt,
        at_boundary: lambda_opt >= opts.lambda_max - step,
        n_max,
    })
}

/// Closed form `n^n / (n+1)^(n+1)` for an ideal PNRD.
pub fn pnrd_joint_probability(n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let n = n as f64;
    (n * (n / (n + 1.0)).ln() - (n + 1.0).ln()).exp()
}

fn check_target(bins: u64, n: usize) -> Result<()> {
    if n as u64 > bins {
        return Err(Error::Domain(format!(
            "target {n} exceeds the {bins} MSPD bins"
        )));
    }
    Ok(())
}

/// Trade-off curve of an MSPD with `bins` bins and efficiency `eta_m`.
pub fn fidelity_benchmark(
    bins: u64,
    n: usize,
    eta_m: f64,
    eta_s: f64,
    lambdas: &[f64],
) -> Result<TradeoffCurve> {
    check_target(bins, n)?;
    tradeoff_curve(&DetectorSpec::mspd(bins, eta_m)?, eta_s, n, lambdas)
}

/// Trade-off curve with the loss-compensated fidelity of each conditioned
/// state; the signal arm is lossless inside the benchmark.
pub fn idealized_fidelity_benchmark(
    bins: u64,
    n: usize,
    eta_m: f64,
    lambdas: &[f64],
) -> Result<TradeoffCurve> {
    check_target(bins, n)?;
    let detector = DetectorSpec::mspd(bins, eta_m)?;
    let prepared = prepare_along(&detector, 1.0, n, lambdas, None)?;
    let n_max = prepared.first().map_or(0, |r| r.conditioned.n_max());
    let points = prepared
        .par_iter()
        .map(|r| {
            let id = idealized_fidelity(&r.conditioned, n).map_err(|e| {
                Error::Domain(format!("idealized fidelity at lambda = {}: {e}", r.lambda))
            })?;
            Ok(CurvePoint {
                lambda: r.lambda,
                success_probability: r.success_probability,
                fidelity: id.fidelity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(curve_from_points(
        detector,
        1.0,
        n,
        FidelityKind::Idealized,
        n_max,
        points,
    ))
}

/// Window and tolerances for matching a lossy PNRD to an ideal MSPD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub success_min: f64,
    pub success_max: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub lambda_points: usize,
    pub eta_min: f64,
    pub eta_tol: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            success_min: 1e-6,
            success_max: 1e-2,
            samples: 50,
            tolerance: 5e-3,
            lambda_points: 400,
            eta_min: 0.01,
            eta_tol: 1e-6,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.success_min > 0.0
            && self.success_max > self.success_min
            && self.success_max < 1.0)
        {
            return Err(Error::Domain(
                "match window must satisfy 0 < success_min < success_max < 1".into(),
            ));
        }
        if self.samples < 2 || self.lambda_points < 4 {
            return Err(Error::Domain(
                "match window needs at least 2 samples and 4 lambda points".into(),
            ));
        }
        if !(self.tolerance > 0.0 && self.eta_tol > 0.0 && self.eta_min > 0.0 && self.eta_min < 1.0)
        {
            return Err(Error::Domain(
                "match tolerances must be positive and eta_min in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveEfficiencyResult {
    pub bins: u64,
    pub n: usize,
    pub eta_eff: f64,
    /// Largest fidelity gap over the window at `eta_eff`.
    pub residual: f64,
    /// Whether the residual is within the match tolerance.
    pub clean_match: bool,
}

/// Efficiency at which a PNRD reproduces the trade-off of an ideal MSPD.
pub fn effective_efficiency(
    bins: u64,
    n: usize,
    cfg: &MatchConfig,
) -> Result<EffectiveEfficiencyResult> {
    check_target(bins, n)?;
    cfg.validate()?;
    let lambdas = default_lambda_grid(n, cfg.lambda_points);
    check_grid(&lambdas)?;
    let window = log_spaced(cfg.success_min, cfg.success_max, cfg.samples);

    let reference = tradeoff_curve(&DetectorSpec::ideal_mspd(bins)?, 1.0, n, &lambdas)?;
    let reference = reference.interpolant().ok_or_else(|| {
        Error::Domain("MSPD reference curve has fewer than two increasing points".into())
    })?;
    let targets = window
        .iter()
        .map(|p| {
            reference.fidelity_at(*p).ok_or_else(|| {
                Error::OutOfBenchmarkRange(format!(
                    "P_S = {p:e} lies outside the M = {bins} reference curve"
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n_max = effective_n_max(None, *lambdas.last().unwrap())?;
    let distance = |eta: f64| -> f64 {
        let Ok(detector) = DetectorSpec::pnrd(eta) else {
            return f64::INFINITY;
        };
        let Ok(herald) = Herald::new(&detector, 1.0, 1.0, n, n_max) else {
            return f64::INFINITY;
        };
        let points: Option<Vec<CurvePoint>> = lambdas
            .iter()
            .map(|&lambda| {
                herald
                    .success_and_fidelity(lambda)
                    .ok()
                    .map(|(success_probability, fidelity)| CurvePoint {
                        lambda,
                        success_probability,
                        fidelity,
                    })
            })
            .collect();
        let Some(points) = points else {
            return f64::INFINITY;
        };
        let curve = curve_from_points(detector, 1.0, n, FidelityKind::Raw, n_max, points);
        let Some(interp) = curve.interpolant() else {
            return f64::INFINITY;
        };
        window
            .iter()
            .zip(&targets)
            .try_fold(0.0f64, |worst, (p, f)| {
                interp.fidelity_at(*p).map(|g| worst.max((g - f).abs()))
            })
            .unwrap_or(f64::INFINITY)
    };

    // D is unimodal near its minimum but infinite where the lossy PNRD cannot
    // reach the top of the window, so bracket on a coarse grid first
    let coarse: Vec<(f64, f64)> = (0..=32)
        .into_par_iter()
        .map(|i| {
            let eta = cfg.eta_min + (1.0 - cfg.eta_min) * i as f64 / 32.0;
            (eta, distance(eta))
        })
        .collect();
    let best = coarse
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap();
    let lo = coarse[best.saturating_sub(1)].0;
    let hi = coarse[(best + 1).min(coarse.len() - 1)].0;
    let refined = golden_section_max(lo, hi, cfg.eta_tol, |eta| -distance(eta));
    let (eta_eff, residual) = if -refined.value <= coarse[best].1 {
        (refined.x, -refined.value)
    } else {
        coarse[best]
    };
    if !residual.is_finite() {
        return Err(Error::OutOfBenchmarkRange(format!(
            "no PNRD efficiency reaches the P_S window [{:e}, {:e}] for n = {n}",
            cfg.success_min, cfg.success_max
        )));
    }
    let clean_match = residual <= cfg.tolerance;
    if !clean_match {
        log::warn!("no clean match for M = {bins}, n = {n}: residual {residual:.3e}");
    }
    Ok(EffectiveEfficiencyResult {
        bins,
        n,
        eta_eff,
        residual,
        clean_match,
    })
}

/// [`effective_efficiency`] over many `(bins, n)` cases, in input order.
pub fn effective_efficiency_sweep(
    cases: &[(u64, usize)],
    cfg: &MatchConfig,
) -> Vec<Result<EffectiveEfficiencyResult>> {
    cases
        .par_iter()
        .map(|&(bins, n)| effective_efficiency(bins, n, cfg))
        .collect()
}
