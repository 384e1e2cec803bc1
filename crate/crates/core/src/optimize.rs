//! One-dimensional bracketing search and a Nelder-Mead simplex minimizer.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone)]
pub struct GoldenResult {
    pub x: f64,
    pub value: f64,
    /// Every `(x, f(x))` evaluated, in order.
    pub probes: Vec<(f64, f64)>,
}

/// Golden-section maximization of `f` on `[lo, hi]`.
///
/// `f` may return `-inf` for inadmissible points; the bracket still shrinks
/// toward the admissible side.
pub fn golden_section_max(
    lo: f64,
    hi: f64,
    tol: f64,
    mut f: impl FnMut(f64) -> f64,
) -> GoldenResult {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut probes = Vec::new();
    let mut eval = |x: f64, probes: &mut Vec<(f64, f64)>| {
        let v = f(x);
        probes.push((x, v));
        v
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c, &mut probes);
    let mut fd = eval(d, &mut probes);
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c, &mut probes);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d, &mut probes);
        }
    }
    eval(a, &mut probes);
    eval(b, &mut probes);
    let (x, value) =
        probes.iter().copied().fold(
            (a, f64::NEG_INFINITY),
            |best, p| if p.1 > best.1 { p } else { best },
        );
    GoldenResult { x, value, probes }
}

/// Coarse scan on `[lo, hi]` followed by golden refinement of the best cell.
pub fn scan_then_golden_max(
    lo: f64,
    hi: f64,
    points: usize,
    tol: f64,
    mut f: impl FnMut(f64) -> f64,
) -> (f64, f64) {
    let points = points.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (lo, f64::NEG_INFINITY, 0usize);
    for i in 0..points {
        let x = lo + step * i as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v, i);
        }
    }
    let a = lo + step * best.2.saturating_sub(1) as f64;
    let b = (lo + step * (best.2 + 1) as f64).min(hi);
    let refined = golden_section_max(a, b, tol, &mut f);
    if refined.value > best.1 {
        (refined.x, refined.value)
    } else {
        (best.0, best.1)
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the spread of simplex values drops below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter drops below this.
    pub x_tol: f64,
    /// Rebuild the simplex around the incumbent this many times after convergence.
    pub rebuilds: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evals: 20_000,
            f_tol: 1e-13,
            x_tol: 1e-9,
            rebuilds: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder-Mead minimization with dimension-adaptive coefficients.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    opts: &NelderMeadOptions,
) -> NelderMeadResult {
    let dim = x0.len();
    let d = dim as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / d, 0.75 - 1.0 / (2.0 * d), 1.0 - 1.0 / d);
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut incumbent = x0.to_vec();
    let mut incumbent_value = eval(&incumbent, &mut evals);
    let mut converged = false;

    for round in 0..=opts.rebuilds {
        let scale = step * 0.5f64.powi(round as i32);
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        simplex.push((incumbent.clone(), incumbent_value));
        for i in 0..dim {
            let mut x = incumbent.clone();
            x[i] += if x[i].abs() > 1e-3 {
                scale * x[i].abs().max(0.25)
            } else {
                scale
            };
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }
        converged = false;
        while evals < opts.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[dim].1 - simplex[0].1;
            let diameter = simplex[1..]
                .iter()
                .map(|(x, _)| {
                    x.iter()
                        .zip(&simplex[0].0)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if (spread <= opts.f_tol && diameter <= opts.x_tol) || diameter <= 1e-15 {
                converged = true;
                break;
            }
            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / d)
                .collect();
            let worst = simplex[dim].clone();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let xr = along(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(alpha * gamma);
                let fe = eval(&xe, &mut evals);
                simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[dim - 1].1 {
                simplex[dim] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst.1 {
                    let xc = along(alpha * rho);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < worst.1.min(fr) {
                    simplex[dim] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = best
                            .iter()
                            .zip(&vertex.0)
                            .map(|(b, v)| b + sigma * (v - b))
                            .collect();
                        let v = eval(&x, &mut evals);
                        *vertex = (x, v);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 <= incumbent_value {
            incumbent = simplex[0].0.clone();
            incumbent_value = simplex[0].1;
        }
        if evals >= opts.max_evals {
            break;
        }
    }
    NelderMeadResult {
        x: incumbent,
        value: incumbent_value,
        evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let r = golden_section_max(0.0, 3.0, 1e-10, |x| -(x - 1.3) * (x - 1.3));
        assert!((r.x - 1.3).abs() < 1e-8);
    }

    #[test]
    fn golden_walks_to_admissible_cliff() {
        // increasing up to a cliff at 0.4, inadmissible below it
        let r = golden_section_max(0.0, 1.0, 1e-10, |x| {
            if x < 0.4 {
                f64::NEG_INFINITY
            } else {
                1.0 - x
            }
        });
        assert!((r.x - 0.4).abs() < 1e-8);
    }

    #[test]
    fn scan_handles_multimodal() {
        let f = |x: f64| (10.0 * x).sin() + 0.1 * x;
        let (x, v) = scan_then_golden_max(0.0, 3.0, 200, 1e-10, f);
        let expected =
            (std::f64::consts::FRAC_PI_2 + 8.0 * std::f64::consts::PI + 0.01f64.asin()) / 10.0;
        assert!(v > 1.26);
        assert!((x - expected).abs() < 1e-6, "{x} vs {expected}");
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(rosen, &[-1.2, 1.0], 0.5, &NelderMeadOptions::default());
        assert!(r.value < 1e-10, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn nelder_mead_higher_dimension() {
        let sphere = |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| (v - i as f64).powi(2))
                .sum::<f64>()
        };
        let r = nelder_mead(sphere, &[0.0; 8], 1.0, &NelderMeadOptions::default());
        assert!(r.value < 1e-8, "{r:?}");
    }
}
