//! Core superpositions `sum_{k<n} c_k |k>` transformed by `D(alpha) S(xi)`.
//!
//! With `U = D(alpha) S(xi)` and `gamma = alpha cosh r + conj(alpha) e^{i phi} sinh r`,
//! the transformed vacuum satisfies `(a cosh r + e^{i phi} sinh r a^dag) U|0> = gamma U|0>`,
//! which gives a forward three-term recurrence over Fock rows starting from
//!
//! ```text
//! <0|U|0> = exp(-|alpha|^2 / 2 - conj(alpha)^2 e^{i phi} tanh r / 2) / sqrt(cosh r)
//! ```
//!
//! Higher core states follow from
//!
//! ```text
//! U|j+1> = ((a^dag - conj(alpha)) cosh r + e^{-i phi} sinh r (a - alpha)) U|j> / sqrt(j + 1)
//! ```
//!
//! Each ladder step reads one row further up, so rows `0..=k` of the image
//! of an `n`-dimensional core need only rows `0..=k+n` of `U|0>`.
//!
//! A phase rotation before `D S` only rephases the `c_k`, so it is not a
//! separate parameter.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::combinatorics::MAX_N_MAX;
use crate::error::{Error, Result};
use crate::fock::PhotonDistribution;

/// Largest squeezing magnitude explored.
pub const R_MAX: f64 = 1.5;
/// Largest displacement magnitude explored.
pub const ALPHA_MAX: f64 = 6.0;
/// Probability mass allowed beyond the working truncation.
pub const TAIL_BUDGET: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreStateAnsatz {
    pub coeffs: Vec<Complex64>,
    pub alpha: Complex64,
    /// `r e^{i phi}`.
    pub xi: Complex64,
    pub n_work: usize,
}

impl CoreStateAnsatz {
    pub fn new(
        coeffs: Vec<Complex64>,
        alpha: Complex64,
        xi: Complex64,
        n_work: usize,
    ) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain(
                "core state needs at least one coefficient".into(),
            ));
        }
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "core coefficients have squared norm {norm}, expected 1"
            )));
        }
        if !(alpha.norm() <= ALPHA_MAX && xi.norm() <= R_MAX) {
            return Err(Error::Domain(format!(
                "need |alpha| <= {ALPHA_MAX} and |xi| <= {R_MAX}"
            )));
        }
        if n_work < coeffs.len() || n_work > MAX_N_MAX {
            return Err(Error::Domain(format!(
                "n_work = {n_work} must lie in [{}, {MAX_N_MAX}]",
                coeffs.len()
            )));
        }
        Ok(CoreStateAnsatz {
            coeffs,
            alpha,
            xi,
            n_work,
        })
    }

    /// Map `2n + 4` unconstrained reals onto the ansatz: `n` complex
    /// coefficients (normalized here), `alpha`, then `(r, phi)`.
    pub fn from_params(params: &[f64], n_work: usize) -> Self {
        let (coeffs, alpha, xi) = decode(params);
        CoreStateAnsatz {
            coeffs,
            alpha,
            xi,
            n_work,
        }
    }

    pub fn core_dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Amplitudes `<k|D S|psi>` for `k = 0..=rows`.
    pub fn amplitudes(&self, rows: usize) -> Vec<Complex64> {
        transformed_core(&self.coeffs, self.alpha, self.xi, rows)
    }
}

pub(crate) fn decode(params: &[f64]) -> (Vec<Complex64>, Complex64, Complex64) {
    let dim = (params.len() - 4) / 2;
    let mut coeffs: Vec<Complex64> = (0..dim)
        .map(|k| Complex64::new(params[2 * k], params[2 * k + 1]))
        .collect();
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        coeffs.iter_mut().for_each(|c| *c /= norm);
    } else {
        coeffs
            .iter_mut()
            .for_each(|c| *c = Complex64::new(0.0, 0.0));
        coeffs[0] = Complex64::new(1.0, 0.0);
    }
    let tail = &params[2 * dim..];
    let mut alpha = Complex64::new(tail[0], tail[1]);
    if !(alpha.norm() <= ALPHA_MAX) {
        alpha = if alpha.norm().is_finite() {
            alpha * (ALPHA_MAX / alpha.norm())
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    let r = if tail[2].is_finite() {
        tail[2].abs().min(R_MAX)
    } else {
        0.0
    };
    let phi = if tail[3].is_finite() { tail[3] } else { 0.0 };
    (coeffs, alpha, Complex64::from_polar(r, phi))
}

/// Rows `0..len` of `D(alpha) S(xi) |0>`.
fn transformed_vacuum(alpha: Complex64, xi: Complex64, len: usize) -> Vec<Complex64> {
    let (r, phi) = xi.to_polar();
    let (ch, sh) = (r.cosh(), r.sinh());
    let e = Complex64::from_polar(1.0, phi);
    let gamma = alpha * ch + alpha.conj() * e * sh;
    let mut v = Vec::with_capacity(len);
    v.push(
        (-0.5 * alpha.norm_sqr() - 0.5 * alpha.conj() * alpha.conj() * e * r.tanh()).exp()
            / ch.sqrt(),
    );
    for m in 0..len.saturating_sub(1) {
        let back = if m > 0 {
            v[m - 1] * e * sh * (m as f64).sqrt()
        } else {
            Complex64::new(0.0, 0.0)
        };
        v.push((gamma * v[m] - back) / (ch * ((m + 1) as f64).sqrt()));
    }
    v
}

/// Rows `0..=rows` of `D(alpha) S(xi) sum_j c_j |j>`.
pub(crate) fn transformed_core(
    coeffs: &[Complex64],
    alpha: Complex64,
    xi: Complex64,
    rows: usize,
) -> Vec<Complex64> {
    let len = rows + coeffs.len();
    let (r, phi) = xi.to_polar();
    let (ch, sh) = (r.cosh(), r.sinh());
    let lower = Complex64::from_polar(sh, -phi);
    // constant part of the ladder: -conj(alpha) cosh r - e^{-i phi} sinh r alpha
    let shift = -alpha.conj() * ch - lower * alpha;
    let mut v = transformed_vacuum(alpha, xi, len);
    let mut out: Vec<Complex64> = v[..=rows].iter().map(|x| x * coeffs[0]).collect();
    let mut next = vec![Complex64::new(0.0, 0.0); len];
    for (j, c) in coeffs.iter().enumerate().skip(1) {
        let scale = 1.0 / (j as f64).sqrt();
        let valid = len - j;
        for m in 0..valid {
            let up = if m > 0 {
                v[m - 1] * (ch * (m as f64).sqrt())
            } else {
                Complex64::new(0.0, 0.0)
            };
            let down = v[m + 1] * lower * ((m + 1) as f64).sqrt();
            next[m] = (up + down + shift * v[m]) * scale;
        }
        std::mem::swap(&mut v, &mut next);
        for (o, x) in out.iter_mut().zip(&v) {
            *o += c * x;
        }
    }
    out
}

/// Photon-number distribution of the transformed core state on `0..=n_work`.
pub fn gaussian_transform(ansatz: &CoreStateAnsatz) -> Result<PhotonDistribution> {
    let probs: Vec<f64> = ansatz
        .amplitudes(ansatz.n_work)
        .iter()
        .map(|a| a.norm_sqr())
        .collect();
    let tail = 1.0 - probs.iter().sum::<f64>();
    if tail > TAIL_BUDGET {
        let mut required = ansatz.n_work;
        while required < MAX_N_MAX {
            required = (required * 2).min(MAX_N_MAX);
            let mass: f64 = ansatz
                .amplitudes(required)
                .iter()
                .map(|a| a.norm_sqr())
                .sum();
            if 1.0 - mass <= TAIL_BUDGET {
                break;
            }
        }
        return Err(Error::Truncation {
            message: format!(
                "transformed state leaves {tail:e} beyond n_work = {}",
                ansatz.n_work
            ),
            required,
        });
    }
    PhotonDistribution::with_budget(probs, TAIL_BUDGET)
}

/// `(F_n, p_{n+})` for packed parameters, computing only rows `0..=n`.
pub(crate) fn fidelity_and_tail(n: usize, params: &[f64]) -> (f64, f64) {
    let (coeffs, alpha, xi) = decode(params);
    let amps = transformed_core(&coeffs, alpha, xi, n);
    let low: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    (amps[n].norm_sqr(), (1.0 - low).max(0.0))
}
