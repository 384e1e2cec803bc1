//! Shared fixtures for the criterion benches.

use num_complex::Complex64;
use pnrbench::{CoreStateAnsatz, PhotonDistribution};

/// Normalized distribution with a smooth, nonuniform profile.
pub fn smooth_distribution(n_max: usize) -> PhotonDistribution {
    let weights = (0..=n_max)
        .map(|k| 1.0 + (k as f64 * 0.37).sin().abs())
        .collect();
    PhotonDistribution::normalized(weights).expect("positive weights")
}

/// Displaced, squeezed `|n-1>` core, the typical witness optimizer iterate.
pub fn core_state(n: usize) -> CoreStateAnsatz {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    coeffs[n - 1] = Complex64::new(1.0, 0.0);
    CoreStateAnsatz::new(
        coeffs,
        Complex64::new(0.4, -0.2),
        Complex64::from_polar(0.3, 0.5),
        120,
    )
    .expect("valid ansatz")
}
