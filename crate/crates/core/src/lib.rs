//! Benchmarks for heralded Fock-state sources built from multiplexed
//! single-photon detectors.
//!
//! Everything here works with Fock-diagonal states: the source, the detector
//! POVMs and every loss channel commute with photon number, so a state is a
//! probability vector over `0..=n_max`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod certify;
pub mod combinatorics;
pub mod detectors;
pub mod error;
pub mod fock;
pub mod interp;
pub mod nongauss;
pub mod optimize;
pub mod preparation;

pub use benchmarks::{EffectiveEfficiencyResult, JointBenchmark, MatchConfig};
pub use certify::{BenchmarkSelection, Certificate, EvaluationReport, MeasuredInput};
pub use detectors::{DetectorFamily, DetectorSpec, PovmElement};
pub use error::{Error, Result};
pub use fock::{IdealizedFidelity, LossMatrix, PhotonDistribution};
pub use nongauss::{BoundConfig, CoreStateAnsatz, Frontier, FrontierCache, WitnessResult};
pub use preparation::{CurvePoint, FidelityKind, PreparationResult, TmsvSource, TradeoffCurve};
