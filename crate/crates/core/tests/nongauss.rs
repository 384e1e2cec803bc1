use nalgebra::DMatrix;
use num_complex::Complex64;
use pnrbench::nongauss::{
    bound_b, gaussian_transform, witness, BoundConfig, CoreStateAnsatz, Frontier,
};
use pnrbench::PhotonDistribution;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `exp(G)` applied to the core state, with `G` built on a large truncated space.
fn expm_state(coeffs: &[Complex64], alpha: Complex64, xi: Complex64, dim: usize) -> Vec<Complex64> {
    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    for m in 1..dim {
        a[(m - 1, m)] = c((m as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    let squeeze = (&a * &a * xi.conj() - &ad * &ad * xi) * c(0.5, 0.0);
    let displace = &ad * alpha - &a * alpha.conj();
    let mut psi = nalgebra::DVector::<Complex64>::zeros(dim);
    for (k, ck) in coeffs.iter().enumerate() {
        psi[k] = *ck;
    }
    let out = displace.exp() * (squeeze.exp() * psi);
    out.iter().copied().collect()
}

#[test]
fn recurrences_match_matrix_exponential() {
    let cases = [
        (vec![c(1.0, 0.0)], c(0.7, 0.2), c(0.3, 0.1)),
        (vec![c(0.6, 0.0), c(0.0, 0.8)], c(-0.4, 0.9), c(0.0, -0.5)),
        (
            vec![c(0.5, 0.1), c(-0.3, 0.4), c(0.2, -0.67)],
            c(1.2, -0.3),
            c(0.45, 0.2),
        ),
    ];
    for (coeffs, alpha, xi) in cases {
        let norm = coeffs.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let coeffs: Vec<Complex64> = coeffs.iter().map(|x| x / norm).collect();
        let exact = expm_state(&coeffs, alpha, xi, 160);
        let ansatz = CoreStateAnsatz::new(coeffs, alpha, xi, 60).unwrap();
        let amps = ansatz.amplitudes(40);
        for k in 0..=40 {
            assert!(
                (amps[k] - exact[k]).norm() < 1e-9,
                "k={k}: {} vs {}",
                amps[k],
                exact[k]
            );
        }
    }
}

/// `(|<0|psi>|^2, |<1|psi>|^2)` of `D(a) S(r e^{i phi}) |0>` in closed form.
fn displaced_squeezed_low(a: f64, r: f64, phi: f64) -> (f64, f64) {
    let (ch, sh, t) = (r.cosh(), r.sinh(), r.tanh());
    let p0 = (-a * a - a * a * phi.cos() * t).exp() / ch;
    let gamma = c(a * ch, 0.0) + c(a * sh, 0.0) * Complex64::from_polar(1.0, phi);
    (p0, p0 * gamma.norm_sqr() / (ch * ch))
}

fn dense_scan_b1(target: f64) -> f64 {
    let mut best = 0.0f64;
    for i in 0..=200 {
        let a = 2.0 * i as f64 / 200.0;
        for j in 0..=150 {
            let r = 1.5 * j as f64 / 150.0;
            for k in 0..64 {
                let phi = std::f64::consts::TAU * k as f64 / 64.0;
                let (p0, p1) = displaced_squeezed_low(a, r, phi);
                if 1.0 - p0 - p1 <= target {
                    best = best.max(p1);
                }
            }
        }
    }
    best
}

#[test]
fn closed_form_oracle_agrees_with_transform() {
    for (a, r, phi) in [(0.5, 0.3, 1.0), (1.2, 0.8, 4.0), (0.0, 1.1, 0.3)] {
        let ansatz = CoreStateAnsatz::new(
            vec![c(1.0, 0.0)],
            c(a, 0.0),
            Complex64::from_polar(r, phi),
            200,
        )
        .unwrap();
        let d = gaussian_transform(&ansatz).unwrap();
        let (p0, p1) = displaced_squeezed_low(a, r, phi);
        assert!((d.probs()[0] - p0).abs() < 1e-12 && (d.probs()[1] - p1).abs() < 1e-12);
    }
}

#[test]
fn single_photon_bound_matches_dense_scan() {
    let cfg = BoundConfig {
        restarts: 12,
        ..Default::default()
    };
    for target in [0.01, 0.1] {
        let scan = dense_scan_b1(target);
        let b = bound_b(1, target, &cfg).unwrap();
        assert!(
            b.bound >= scan - 1e-9,
            "target {target}: optimizer {} below scan {scan}",
            b.bound
        );
        assert!(
            b.bound <= dense_scan_b1(target * 1.002) + 2e-3,
            "target {target}: {} vs {scan}",
            b.bound
        );
    }
}

#[test]
fn zero_tail_forces_zero_single_photon_population() {
    // every displaced or squeezed vacuum has support beyond one photon
    for i in 0..=100 {
        for j in 0..=100 {
            let (a, r) = (2.0 * i as f64 / 100.0, 1.5 * j as f64 / 100.0);
            if i + j == 0 {
                continue;
            }
            for k in 0..16 {
                let (p0, p1) =
                    displaced_squeezed_low(a, r, std::f64::consts::TAU * k as f64 / 16.0);
                let tail = 1.0 - p0 - p1;
                assert!(tail > 0.0 || p1 < 1e-6, "a={a} r={r}: tail {tail}, p1 {p1}");
            }
        }
    }
}

#[test]
fn small_tail_bound_follows_cube_root_law() {
    let b = bound_b(
        1,
        1e-5,
        &BoundConfig {
            restarts: 8,
            ..Default::default()
        },
    )
    .unwrap();
    let law = (1.5e-5f64).cbrt();
    assert!((b.bound / law - 1.0).abs() < 0.05, "{} vs {law}", b.bound);
}

#[test]
fn witness_examples() {
    let cfg = BoundConfig {
        restarts: 8,
        grid_points: 12,
        ..Default::default()
    };
    let f3 = Frontier::compute(3, &cfg).unwrap();
    let fock = witness(&PhotonDistribution::fock(3, 10).unwrap(), 3, &f3).unwrap();
    assert_eq!(
        (fock.fidelity, fock.p_nplus, fock.bound, fock.witness),
        (1.0, 0.0, 0.0, 1.0)
    );
    assert!(fock.certifies());
    let vac = witness(&PhotonDistribution::vacuum(10), 3, &f3).unwrap();
    assert!(vac.witness <= 0.0);
    assert!(witness(&PhotonDistribution::vacuum(10), 1, &f3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn transform_is_physical(
        coeffs in prop::collection::vec(-1.0f64..1.0, 2..8),
        ar in -2.0f64..2.0, ai in -2.0f64..2.0, r in 0.0f64..1.0, phi in 0.0f64..6.3,
    ) {
        let mut params = coeffs.clone();
        if params.len() % 2 == 1 { params.push(0.1); }
        params.extend([ar, ai, r, phi]);
        let ansatz = CoreStateAnsatz::from_params(&params, 400);
        let d = gaussian_transform(&ansatz).unwrap();
        prop_assert!(d.probs().iter().all(|p| *p >= 0.0));
        prop_assert!((d.total() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bound_is_below_one_and_monotone(lo in 1e-4f64..0.2, step in 1.5f64..4.0) {
        let cfg = BoundConfig { restarts: 3, max_evals: 800, polish_evals: 2000, polish: 1, ..Default::default() };
        let f = Frontier::compute(2, &BoundConfig { grid_points: 4, p_min: lo, p_max: (lo * step).min(0.9), ..cfg }).unwrap();
        for w in f.points.windows(2) {
            prop_assert!(w[1].bound >= w[0].bound);
        }
        prop_assert!(f.points.iter().all(|p| (0.0..1.0).contains(&p.bound)));
    }
}
