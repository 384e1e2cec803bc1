//! Heralded Fock-state preparation from a lossy two-mode squeezed vacuum.
//!
//! The source emits `sqrt(1 - l^2) sum_k l^k |k, k>`, so the photon-pair
//! distribution is `P(k) = (1 - l^2) l^(2k)`. Losses on the measured mode are
//! folded into the detector POVM `pi(k)`, losses on the signal mode act as a
//! binomial channel. Because `pi` is diagonal, conditioning keeps the signal
//! state diagonal:
//!
//! ```text
//! P_S       = sum_k P(k) pi(k)
//! rho_S[s]  = 1/P_S sum_k P(k) pi(k) C(k, s) eta_S^s (1 - eta_S)^(k - s)
//! ```
//!
//! Off-diagonal terms `|k><k'|` with `k != k'` would require `pi(k, k') != 0`
//! and vanish identically for every POVM built in [`crate::detectors`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::MAX_N_MAX;
use crate::detectors::{fold_efficiency, DetectorFamily, DetectorSpec};
use crate::error::{check_efficiency, Error, Result};
use crate::fock::{LossMatrix, PhotonDistribution, DEFAULT_N_MAX};
use crate::interp::Pchip;

/// Bound on the photon-pair tail `l^(2(n_max+1))` neglected by the source.
pub const SOURCE_TAIL: f64 = 1e-12;
/// Heralds below this probability are reported as unreachable.
pub const MIN_SUCCESS: f64 = 1e-300;

/// Smallest cutoff with `lambda^(2(n_max + 1)) <= tail`.
pub fn required_n_max(lambda: f64, tail: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let needed = tail.ln() / (2.0 * lambda.ln());
    (needed.ceil() as usize).saturating_sub(1)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && (0.0..1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "squeezing parameter must lie in [0, 1), got {lambda}"
        )))
    }
}

/// Two-mode squeezed vacuum with virtual loss on both arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmsvSource {
    pub lambda: f64,
    pub eta_s: f64,
    pub eta_m: f64,
    /// Requested cutoff; raised automatically to meet [`SOURCE_TAIL`].
    pub n_max: Option<usize>,
}

impl TmsvSource {
    pub fn new(lambda: f64, eta_s: f64, eta_m: f64) -> Result<Self> {
        check_lambda(lambda)?;
        check_efficiency(eta_s, "signal efficiency eta_S")?;
        check_efficiency(eta_m, "measurement efficiency eta_M")?;
        Ok(TmsvSource {
            lambda,
            eta_s,
            eta_m,
            n_max: None,
        })
    }

    pub fn ideal(lambda: f64) -> Result<Self> {
        Self::new(lambda, 1.0, 1.0)
    }

    pub fn with_n_max(self, n_max: usize) -> Self {
        TmsvSource {
            n_max: Some(n_max),
            ..self
        }
    }

    /// Effective cutoff: the request (default 64) raised to meet the tail bound.
    pub fn truncation(&self) -> Result<usize> {
        effective_n_max(self.n_max, self.lambda)
    }
}

pub(crate) fn effective_n_max(requested: Option<usize>, lambda_max: f64) -> Result<usize> {
    let required = required_n_max(lambda_max, SOURCE_TAIL);
    if required > MAX_N_MAX {
        return Err(Error::Truncation {
            message: format!(
                "lambda = {lambda_max} needs n_max = {required} to keep the tail below {SOURCE_TAIL:e}"
            ),
            required,
        });
    }
    let n_max = requested.unwrap_or(DEFAULT_N_MAX).max(required);
    crate::fock::check_n_max(n_max)?;
    Ok(n_max)
}

/// `P(k) = (1 - l^2) l^(2k)` for `k = 0..=n_max`.
pub fn pair_distribution(lambda: f64, n_max: usize) -> Vec<f64> {
    let l2 = lambda * lambda;
    let norm = 1.0 - l2;
    let mut pw = 1.0;
    (0..=n_max)
        .map(|_| {
            let p = norm * pw;
            pw *= l2;
            p
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparationResult {
    pub target: usize,
    pub lambda: f64,
    pub success_probability: f64,
    pub conditioned: PhotonDistribution,
    pub fidelity: f64,
}

/// Precomputed herald response and signal loss for a fixed cutoff.
#[derive(Debug, Clone)]
pub(crate) struct Herald {
    target: usize,
    response: Vec<f64>,
    signal_loss: Option<LossMatrix>,
    n_max: usize,
}

impl Herald {
    pub(crate) fn new(
        detector: &DetectorSpec,
        eta_m: f64,
        eta_s: f64,
        target: usize,
        n_max: usize,
    ) -> Result<Self> {
        check_efficiency(eta_m, "measurement efficiency eta_M")?;
        check_efficiency(eta_s, "signal efficiency eta_S")?;
        if let DetectorFamily::Mspd { bins } = detector.family {
            if target as u64 > bins {
                return Err(Error::Domain(format!(
                    "outcome {target} exceeds the {bins} MSPD bins"
                )));
            }
        }
        let n_max = n_max.max(target);
        let ideal = detector.ideal_povm(target, n_max)?;
        let povm = fold_efficiency(&ideal, detector.efficiency * eta_m)?;
        let signal_loss = if eta_s < 1.0 {
            Some(LossMatrix::new(eta_s, n_max)?)
        } else {
            None
        };
        Ok(Herald {
            target,
            response: povm.response,
            signal_loss,
            n_max,
        })
    }

    pub(crate) fn n_max(&self) -> usize {
        self.n_max
    }

    /// Success probability and `|n>` population without materializing the state.
    pub(crate) fn success_and_fidelity(&self, lambda: f64) -> Result<(f64, f64)> {
        let weights = self.weights(lambda);
        let success: f64 = weights.iter().sum();
        if !(success >= MIN_SUCCESS) {
            return Err(Error::Unreachable(success));
        }
        let population = match &self.signal_loss {
            None => weights[self.target],
            Some(loss) => (self.target..=self.n_max)
                .map(|k| loss.entry(self.target, k) * weights[k])
                .sum(),
        };
        Ok((success, population / success))
    }

    fn weights(&self, lambda: f64) -> Vec<f64> {
        pair_distribution(lambda, self.n_max)
            .iter()
            .zip(&self.response)
            .map(|(p, r)| p * r)
            .collect()
    }

    pub(crate) fn prepare(&self, lambda: f64) -> Result<PreparationResult> {
        let weights = self.weights(lambda);
        let success: f64 = weights.iter().sum();
        if !(success >= MIN_SUCCESS) {
            return Err(Error::Unreachable(success));
        }
        let mut state: Vec<f64> = weights.iter().map(|w| w / success).collect();
        if let Some(loss) = &self.signal_loss {
            state = loss.apply(&state);
        }
        let fidelity = state[self.target];
        Ok(PreparationResult {
            target: self.target,
            lambda,
            success_probability: success,
            conditioned: PhotonDistribution::from_raw(state),
            fidelity,
        })
    }
}

/// Herald on `outcome` and return the conditioned signal state.
pub fn condition(
    source: &TmsvSource,
    detector: &DetectorSpec,
    outcome: usize,
) -> Result<PreparationResult> {
    let n_max = source.truncation()?;
    Herald::new(detector, source.eta_m, source.eta_s, outcome, n_max)?.prepare(source.lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityKind {
    Raw,
    Idealized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub success_probability: f64,
    pub fidelity: f64,
}

/// Fidelity against success probability swept over the squeezing parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub detector: DetectorSpec,
    pub eta_s: f64,
    pub target: usize,
    pub kind: FidelityKind,
    pub n_max: usize,
    pub points: Vec<CurvePoint>,
    /// Whether `P_S` increases over the whole grid.
    pub monotone_success: bool,
}

impl TradeoffCurve {
    fn new(
        detector: DetectorSpec,
        eta_s: f64,
        target: usize,
        kind: FidelityKind,
        n_max: usize,
        points: Vec<CurvePoint>,
    ) -> Self {
        let monotone_success = points
            .windows(2)
            .all(|w| w[1].success_probability > w[0].success_probability);
        TradeoffCurve {
            detector,
            eta_s,
            target,
            kind,
            n_max,
            points,
            monotone_success,
        }
    }

    /// Leading run of points along which `P_S` strictly increases.
    pub fn increasing_branch(&self) -> &[CurvePoint] {
        let end = self
            .points
            .windows(2)
            .position(|w| !(w[1].success_probability > w[0].success_probability))
            .map_or(self.points.len(), |i| i + 1);
        &self.points[..end]
    }

    /// `(min, max)` success probability of the increasing branch.
    pub fn success_range(&self) -> Option<(f64, f64)> {
        let branch = self.increasing_branch();
        Some((
            branch.first()?.success_probability,
            branch.last()?.success_probability,
        ))
    }

    /// Whether the success probability peaks strictly inside the grid, so
    /// the branch maximum is the largest rate this detector can herald.
    pub fn has_interior_peak(&self) -> bool {
        self.increasing_branch().len() < self.points.len()
    }

    /// Monotone cubic interpolant of fidelity in `ln P_S` on the increasing branch.
    pub fn interpolant(&self) -> Option<CurveInterpolant> {
        let branch = self.increasing_branch();
        let xs = branch.iter().map(|p| p.success_probability.ln()).collect();
        let ys = branch.iter().map(|p| p.fidelity).collect();
        Pchip::new(xs, ys).map(CurveInterpolant)
    }

    /// Fidelity at success probability `p`, or `None` outside the branch.
    pub fn fidelity_at(&self, p: f64) -> Option<f64> {
        self.interpolant()?.fidelity_at(p)
    }
}

#[derive(Debug, Clone)]
pub struct CurveInterpolant(Pchip);

impl CurveInterpolant {
    pub fn fidelity_at(&self, p: f64) -> Option<f64> {
        if !(p > 0.0) {
            return None;
        }
        self.0.eval(p.ln())
    }
}

pub(crate) fn check_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::Domain("lambda grid is empty".into()));
    }
    if lambdas.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        return Err(Error::Domain(
            "lambda grid values must lie in (0, 1)".into(),
        ));
    }
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "lambda grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Conditioned states at every grid point, sharing one cutoff.
pub fn prepare_along(
    detector: &DetectorSpec,
    eta_s: f64,
    target: usize,
    lambdas: &[f64],
    n_max: Option<usize>,
) -> Result<Vec<PreparationResult>> {
    check_grid(lambdas)?;
    let n_max = effective_n_max(n_max, *lambdas.last().unwrap())?;
    let herald = Herald::new(detector, 1.0, eta_s, target, n_max)?;
    lambdas.par_iter().map(|&l| herald.prepare(l)).collect()
}

/// Trade-off curve of `(P_S, F)` over `lambdas`.
pub fn tradeoff_curve(
    detector: &DetectorSpec,
    eta_s: f64,
    target: usize,
    lambdas: &[f64],
) -> Result<TradeoffCurve> {
    tradeoff_curve_with(detector, eta_s, target, lambdas, None)
}

/// [`tradeoff_curve`] with an explicit minimum cutoff.
pub fn tradeoff_curve_with(
    detector: &DetectorSpec,
    eta_s: f64,
    target: usize,
    lambdas: &[f64],
    n_max: Option<usize>,
) -> Result<TradeoffCurve> {
    check_grid(lambdas)?;
    let n_max = effective_n_max(n_max, *lambdas.last().unwrap())?;
    let herald = Herald::new(detector, 1.0, eta_s, target, n_max)?;
    let points = lambdas
        .par_iter()
        .map(|&lambda| {
            herald
                .success_and_fidelity(lambda)
                .map(|(success_probability, fidelity)| CurvePoint {
                    lambda,
                    success_probability,
                    fidelity,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let curve = TradeoffCurve::new(
        *detector,
        eta_s,
        target,
        FidelityKind::Raw,
        herald.n_max(),
        points,
    );
    if !curve.monotone_success {
        log::debug!(
            "success probability of {} turns over inside the lambda grid",
            detector
        );
    }
    Ok(curve)
}

pub(crate) fn curve_from_points(
    detector: DetectorSpec,
    eta_s: f64,
    target: usize,
    kind: FidelityKind,
    n_max: usize,
    points: Vec<CurvePoint>,
) -> TradeoffCurve {
    TradeoffCurve::new(detector, eta_s, target, kind, n_max, points)
}

/// Largest lambda on the default grid.
pub const DEFAULT_LAMBDA_MAX: f64 = 0.95;
pub const DEFAULT_LAMBDA_POINTS: usize = 400;

/// Log-spaced lambda grid whose lower end gives an ideal-PNRD success
/// probability of about `1e-8` for the target photon number.
pub fn default_lambda_grid(target: usize, points: usize) -> Vec<f64> {
    let lo = if target == 0 {
        1e-3
    } else {
        1e-8f64.powf(1.0 / (2.0 * target as f64))
    };
    log_spaced(lo.min(DEFAULT_LAMBDA_MAX / 2.0), DEFAULT_LAMBDA_MAX, points)
}

pub fn log_spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ideal_pnrd_heralds_perfect_fock_states() {
        for n in 0..5 {
            let r = condition(
                &TmsvSource::ideal(0.4).unwrap(),
                &DetectorSpec::ideal_pnrd(),
                n,
            )
            .unwrap();
            let expected = (1.0 - 0.16) * 0.16f64.powi(n as i32);
            assert!((r.success_probability - expected).abs() <= 1e-14 * expected);
            assert_eq!(r.fidelity, 1.0);
            assert_eq!(r.conditioned.probs()[n], 1.0);
        }
    }

    #[test]
    fn vacuum_herald_with_perfect_detector() {
        let source = TmsvSource::new(0.7, 0.6, 1.0).unwrap();
        let r = condition(&source, &DetectorSpec::ideal_pnrd(), 0).unwrap();
        assert_eq!(r.fidelity, 1.0);
        assert!(r.conditioned.probs()[1..].iter().all(|p| *p == 0.0));
        let lossy = TmsvSource::new(0.7, 0.6, 0.5).unwrap();
        let r = condition(&lossy, &DetectorSpec::ideal_pnrd(), 0).unwrap();
        assert!(r.fidelity < 1.0);
        assert_eq!(r.fidelity, r.conditioned.probs()[0]);
    }

    #[test]
    fn mspd_with_n_bins_converges_at_weak_squeezing() {
        let d = DetectorSpec::ideal_mspd(3).unwrap();
        let f = |l: f64| condition(&TmsvSource::ideal(l).unwrap(), &d, 3).unwrap();
        let (a, b, c) = (f(0.3), f(0.05), f(0.001));
        assert!(a.fidelity < b.fidelity && b.fidelity < c.fidelity);
        assert!(1.0 - c.fidelity < 1e-5);
        assert!(c.success_probability < 1e-17);
    }

    #[test]
    fn outcome_beyond_bins_is_rejected() {
        let d = DetectorSpec::ideal_mspd(3).unwrap();
        assert!(condition(&TmsvSource::ideal(0.5).unwrap(), &d, 4).is_err());
        assert!(TmsvSource::ideal(1.0).is_err());
        assert!(TmsvSource::new(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn unreachable_outcome_is_reported() {
        let source = TmsvSource::ideal(1e-100).unwrap();
        let r = condition(&source, &DetectorSpec::ideal_pnrd(), 5);
        assert!(matches!(r, Err(Error::Unreachable(_))), "{r:?}");
    }

    #[test]
    fn truncation_is_raised_for_strong_squeezing() {
        let s = TmsvSource::ideal(0.9).unwrap();
        let n = s.truncation().unwrap();
        assert!(0.81f64.powi(n as i32 + 1) <= SOURCE_TAIL);
        assert!(0.81f64.powi(n as i32) > SOURCE_TAIL);
        assert_eq!(
            TmsvSource::ideal(0.1).unwrap().truncation().unwrap(),
            DEFAULT_N_MAX
        );
        assert!(TmsvSource::ideal(0.999).unwrap().truncation().is_err());
    }

    #[test]
    fn pnrd_curve_is_flat_at_unit_fidelity() {
        let grid = default_lambda_grid(3, 50);
        let c = tradeoff_curve(&DetectorSpec::ideal_pnrd(), 1.0, 3, &grid).unwrap();
        assert!(c.points.iter().all(|p| p.fidelity == 1.0));
        // (1 - l^2) l^6 peaks at l^2 = 3/4, inside the default grid
        assert!(!c.monotone_success);
        assert!(c.has_interior_peak());
    }

    #[test]
    fn curve_interpolation_reproduces_grid_points() {
        let grid = default_lambda_grid(3, 200);
        let d = DetectorSpec::ideal_mspd(4).unwrap();
        let c = tradeoff_curve(&d, 1.0, 3, &grid).unwrap();
        for p in c.increasing_branch().iter().step_by(17) {
            assert_abs_diff_eq!(
                c.fidelity_at(p.success_probability).unwrap(),
                p.fidelity,
                epsilon = 1e-12
            );
        }
        // off-grid: exact pipeline value at an intermediate lambda
        let l = 0.5 * (grid[100] + grid[101]);
        let exact = condition(&TmsvSource::ideal(l).unwrap(), &d, 3).unwrap();
        let interp = c.fidelity_at(exact.success_probability).unwrap();
        assert_abs_diff_eq!(interp, exact.fidelity, epsilon = 1e-7);
        assert!(c.fidelity_at(1e-30).is_none());
    }

    #[test]
    fn grid_validation() {
        let d = DetectorSpec::ideal_pnrd();
        assert!(tradeoff_curve(&d, 1.0, 1, &[]).is_err());
        assert!(tradeoff_curve(&d, 1.0, 1, &[0.2, 0.1]).is_err());
        assert!(tradeoff_curve(&d, 1.0, 1, &[0.0, 0.1]).is_err());
        assert!(tradeoff_curve(&d, 1.0, 1, &[0.2, 1.0]).is_err());
    }
}
