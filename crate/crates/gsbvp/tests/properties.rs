//! Structural invariants checked across module boundaries: the resolvent
//! really is the Laplace transform of the mode heat kernel, closed margins
//! match their algebraic predictions, and spectra obey their sum rules.

use std::f64::consts::PI;

use gsbvp::bhalf::{bhalf_closed, bhalf_quadrature, bhalf_series, Method, QuadCfg};
use gsbvp::boundary::{dirichlet, pauli_3d, pure_dirac, pure_skew_2d, BoundarySetup, Covector};
use gsbvp::ellipticity::{check_strong_ellipticity, natural_spectrum, Classification};
use gsbvp::gauge::{builtin_model, induced_boundary_setup, random_gauge_symbol};
use gsbvp::oracle::{analytic_mode_diagonal, mode_diagonal, ModeProblem};
use gsbvp::profile::resolvent_kernel;
use gsbvp::spectral::{frob, CMatrix};
use gsbvp::Error;
use nalgebra::{Complex, DVector};
use proptest::prelude::*;

type Complex64 = Complex<f64>;

/// Eight-point Gauss-Legendre rule on [-1, 1].
const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_650_0,
    0.183_434_642_495_650_0,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Contour inversion of the resolvent: integrate `exp(-t lambda) G(lambda)`
/// clockwise around the spectral ray `[0, inf)` along a wedge of half-angle
/// `theta`, which must reproduce the heat-mode diagonal.
fn contour_heat_diagonal(
    setup: &BoundarySetup,
    zeta: &Covector,
    t: f64,
    r: f64,
    theta: f64,
    radius: f64,
    panels: usize,
) -> CMatrix {
    let dim = setup.dim_v;
    let mut acc = CMatrix::zeros(dim, dim);
    let phase_lo = Complex64::new(0.0, -theta).exp();
    let phase_hi = Complex64::new(0.0, theta).exp();
    // Substitute rho = x^2: grades the nodes toward the origin, where the
    // boundary-bound-state poles sit closest to the rays.
    let x_max = radius.sqrt();
    let width = x_max / panels as f64;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * width;
        for (node, weight) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            let x = mid + 0.5 * width * node;
            let rho = x * x;
            let w = 0.5 * width * weight * 2.0 * x;
            let lambda_lo = phase_lo * rho;
            let lambda_hi = phase_hi * rho;
            let g_lo = resolvent_kernel(setup, lambda_lo, zeta, r, r).unwrap();
            let g_hi = resolvent_kernel(setup, lambda_hi, zeta, r, r).unwrap();
            let f_lo = g_lo * ((lambda_lo * (-t)).exp() * phase_lo);
            let f_hi = g_hi * ((lambda_hi * (-t)).exp() * phase_hi);
            acc += (f_hi - f_lo) * Complex64::new(w, 0.0);
        }
    }
    let prefactor = Complex64::new(0.0, 2.0 * PI);
    acc.map(|entry| entry / prefactor)
}

/// The wedge-contour Laplace inversion of the resolvent must agree with the
/// closed-form mode diagonal for both a projector condition and genuinely
/// oblique couplings, at the wall and in the interior.
#[test]
fn contour_inversion_matches_mode_diagonal() {
    let theta: f64 = 1.0;
    let cases: Vec<(BoundarySetup, Covector, f64, f64)> = vec![
        (dirichlet(1), Covector::new(vec![0.9]), 0.8, 0.3),
        (pure_skew_2d(0.7), Covector::new(vec![0.8]), 0.8, 0.0),
        (pure_skew_2d(0.7), Covector::new(vec![0.8]), 0.8, 0.45),
        (pauli_3d(0.5), Covector::new(vec![0.7, -0.4]), 0.8, 0.3),
    ];
    for (setup, zeta, t, r) in cases {
        let radius = 90.0 / (t * theta.cos());
        let contour = contour_heat_diagonal(&setup, &zeta, t, r, theta, radius, 320);
        let direct = analytic_mode_diagonal(&setup, &zeta, t, r).unwrap();
        let dev = frob(&(&contour - &direct));
        assert!(
            dev <= 1e-8 * frob(&direct).max(1e-3),
            "contour inversion off by {dev:.3e} (direct norm {:.3e})",
            frob(&direct)
        );
    }
}

/// Closed-form margin of the scalar-coupling family: the worst stable
/// eigenvalue is `sqrt(kappa)` in every direction, independent of the
/// projector rank, so the margin must be exactly `1 - sqrt(kappa)`.
#[test]
fn scalar_coupling_margin_is_one_minus_root_kappa() {
    for &kappa in &[0.2, 0.5, 0.9] {
        for m in [2usize, 3, 4] {
            for rank in [0usize, 1] {
                let setup = pure_dirac(kappa, m, rank).unwrap();
                let report = check_strong_ellipticity(&setup, 64).unwrap();
                assert_eq!(report.classification, Classification::StronglyElliptic);
                let predicted = 1.0 - kappa.sqrt();
                assert!(
                    (report.min_margin - predicted).abs() <= 1e-9,
                    "kappa={kappa}, m={m}, rank={rank}: margin {} vs {predicted}",
                    report.min_margin
                );
            }
        }
    }
}

/// Wherever the eigenvalues do come in `{0, +/-nu}` pattern, the reported
/// multiplicities must satisfy the sum rule `zero_mult + 2 sum(d_k) =
/// dim_v`; a generic complex induced setup has no such pairing and must be
/// refused rather than silently mis-clustered.
#[test]
fn natural_spectrum_sum_rule_holds_where_defined() {
    let mut setups: Vec<BoundarySetup> = vec![
        pure_skew_2d(0.6),
        pauli_3d(0.3),
        pauli_3d(0.8),
        pure_dirac(0.5, 3, 1).unwrap(),
        pure_dirac(0.9, 4, 2).unwrap(),
    ];
    for m in [3usize, 4, 5] {
        let symbol = builtin_model("graviton", m, Some(0.4)).unwrap();
        setups.push(induced_boundary_setup(&symbol).unwrap());
    }
    let abelian = builtin_model("abelian-vector", 4, None).unwrap();
    setups.push(induced_boundary_setup(&abelian).unwrap());
    for setup in &setups {
        let spectrum = natural_spectrum(setup, 32, 1e-8).unwrap();
        let paired: usize = spectrum.branches.iter().map(|&(_, d)| d).sum();
        assert_eq!(
            spectrum.zero_mult + 2 * paired,
            setup.dim_v,
            "sum rule violated for a setup with m={}, dim_v={}",
            setup.m,
            setup.dim_v
        );
    }

    let generic = random_gauge_symbol(11, 3, 2, 1).unwrap();
    let induced = induced_boundary_setup(&generic).unwrap();
    match natural_spectrum(&induced, 32, 1e-8) {
        Err(Error::NonNaturalSpectrum { count, .. }) => assert!(count > 0),
        other => panic!("expected an unpaired-spectrum refusal, got {other:?}"),
    }
}

/// Commuting diagonal couplings: the resummed closed form and the tensor
/// quadrature must agree over a sweep of coupling strengths.
#[test]
fn commuting_closed_form_tracks_tensor_quadrature() {
    for &a in &[0.15, 0.45, 0.7] {
        let gamma = vec![
            CMatrix::from_diagonal(&DVector::from_vec(vec![
                Complex64::new(0.0, a),
                Complex64::new(0.0, -a),
            ])),
            CMatrix::from_diagonal(&DVector::from_vec(vec![
                Complex64::new(0.0, 0.6 * a),
                Complex64::new(0.0, -0.6 * a),
            ])),
        ];
        let setup = BoundarySetup::new(3, CMatrix::zeros(2, 2), gamma, None, None).unwrap();
        let closed = bhalf_closed(&setup).unwrap();
        assert!(matches!(closed.method, Method::ClosedAbelian));
        let quad = bhalf_quadrature(&setup, QuadCfg::tensor(40)).unwrap();
        let dev = frob(&(&closed.value - &quad.value));
        assert!(
            dev <= 1e-7 * frob(&closed.value),
            "a={a}: closed vs tensor deviation {dev:.3e}"
        );
    }
}

/// Real setups pair opposite tangential frequencies by complex conjugation;
/// the discretized mode diagonals must satisfy the same symmetry exactly.
#[test]
fn real_setup_modes_pair_under_conjugation() {
    let setup = pure_skew_2d(0.5);
    let base = ModeProblem {
        setup: setup.clone(),
        zeta: Covector::new(vec![0.9]),
        length: 2.0,
        n_grid: 257,
        q_shift: None,
    };
    let flipped = ModeProblem {
        zeta: Covector::new(vec![-0.9]),
        ..base.clone()
    };
    let t = 0.04;
    let plus = mode_diagonal(&base, t).unwrap();
    let minus = mode_diagonal(&flipped, t).unwrap();
    assert_eq!(plus.len(), minus.len());
    for (kp, km) in plus.iter().zip(minus.iter()) {
        let conj = km.map(|entry| entry.conj());
        let dev = frob(&(kp - conj));
        assert!(
            dev <= 1e-12 * frob(kp).max(1e-12),
            "conjugation pairing broken by {dev:.3e}"
        );
    }
}

/// The series truncation estimate must shrink with the order and bound the
/// actual deviation from the quadrature value at the highest order.
#[test]
fn series_error_estimate_contracts_and_bounds() {
    let setup = pauli_3d(0.3);
    let quad = bhalf_quadrature(&setup, QuadCfg::tensor(40)).unwrap();
    let mut last_estimate = f64::INFINITY;
    for n_max in [2usize, 3, 4] {
        let series = bhalf_series(&setup, n_max).unwrap();
        assert!(
            series.err_estimate < last_estimate,
            "estimate did not shrink at order {n_max}"
        );
        last_estimate = series.err_estimate;
        if n_max == 4 {
            let dev = (series.trace - quad.trace).abs();
            assert!(
                dev <= series.err_estimate,
                "order-4 deviation {dev:.3e} exceeds its own estimate {:.3e}",
                series.err_estimate
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Projector-only resolvent against the image-charge closed form, off
    /// the spectral ray.
    #[test]
    fn dirichlet_resolvent_matches_image_charge(
        re in -3.0f64..3.0,
        im in 0.2f64..3.0,
        flip in proptest::bool::ANY,
        u in 0.1f64..2.0,
        v in 0.1f64..2.0,
        zeta_len in 0.3f64..2.0,
    ) {
        let lambda = Complex64::new(re, if flip { -im } else { im });
        let setup = dirichlet(2);
        let zeta = Covector::new(vec![zeta_len]);
        let g = resolvent_kernel(&setup, lambda, &zeta, u, v).unwrap();
        let s = (Complex64::new(zeta_len * zeta_len, 0.0) - lambda).sqrt();
        let scalar = ((-s * (u - v).abs()).exp() - (-s * (u + v)).exp()) / (s * 2.0);
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { scalar } else { Complex64::new(0.0, 0.0) };
                prop_assert!(
                    (g[(i, j)] - expected).norm() <= 1e-10 * scalar.norm().max(1e-3),
                    "entry ({i},{j}) = {} vs {expected}", g[(i, j)]
                );
            }
        }
    }
}
