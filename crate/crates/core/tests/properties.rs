//! Invariants checked over random parameters.

use approx::assert_abs_diff_eq;
use nalgebra::DVector;
use proptest::prelude::*;

use noon_core::analysis::{concurrence, tomography, trace_distance};
use noon_core::design::{condition_delta2, h2p_matrix, solve_ges_n2, Branch};
use noon_core::dynamics::{DensityMatrix, Liouvillian};
use noon_core::hilbert::{build_space, ket, BasisLabel, Cavity, QdState, Topology};
use noon_core::linalg::{hermiticity_error, CMatrix, C64};
use noon_core::model::{OpenSystem, ParamsN2, G_REF};
use noon_core::oracle::{decay_populations, DecayParams};
use noon_core::sweep::{linear_grid, log_grid};

fn branch() -> impl Strategy<Value = Branch> {
    prop_oneof![Just(Branch::Plus), Just(Branch::Minus)]
}

fn designed(delta1: f64, j: f64, b: Branch) -> ParamsN2 {
    let d2 = condition_delta2(delta1, G_REF, b).unwrap();
    ParamsN2 {
        g2p: G_REF,
        j,
        delta1,
        delta2: d2,
        kappa: 0.1,
        omega_pump_detuning: d2,
        rabi: 0.05,
        pump_port: Cavity::Two,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn ges_is_a_normalized_eigenvector_without_11(
        delta1 in -6.0..6.0f64,
        j in 0.3..6.0f64,
        b in branch(),
    ) {
        let p = designed(delta1, j, b);
        let s = solve_ges_n2(&p, b).unwrap();
        let a = DVector::from_row_slice(&s.amplitudes);
        assert_abs_diff_eq!(a.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.amplitudes[2], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.amplitudes[1].abs(), s.amplitudes[3].abs(), epsilon = 1e-10);
        let h = h2p_matrix(p.g2p, p.j, p.delta1, p.delta2);
        let r = &h * &a - &a * s.energy;
        prop_assert!(r.amax() < 1e-9, "eigen residual {}", r.amax());
    }

    #[test]
    fn noon_state_has_unit_concurrence(phase in -3.2..3.2f64, n_max in 2usize..5) {
        let space = build_space(Topology::TwoPhoton, n_max).unwrap();
        let a = ket(&space, &BasisLabel::new(QdState::G, 2, 0)).unwrap();
        let b = ket(&space, &BasisLabel::new(QdState::G, 0, 2)).unwrap();
        let psi = (a + b * C64::from_polar(1.0, phase)) / C64::from(2f64.sqrt());
        let rho = DensityMatrix::pure(&space, &psi).unwrap();
        let t = tomography(&rho, 2).unwrap();
        assert_abs_diff_eq!(concurrence(&t), 1.0, epsilon = 1e-12);
        let m = trace_distance(&t).unwrap();
        prop_assert!(m.trace_distance < 1e-6, "D = {}", m.trace_distance);
    }

    #[test]
    fn liouvillian_preserves_trace_and_hermiticity(
        seed in proptest::collection::vec(-1.0..1.0f64, 2 * 18 * 18),
        kappa in 0.01..2.0f64,
        rabi in 0.0..0.5f64,
    ) {
        let p = ParamsN2 { kappa, rabi, ..designed(1.0, 2.0, Branch::Minus) };
        let sys = OpenSystem::n2(&p, 2).unwrap();
        let d = sys.space().dim();
        prop_assert_eq!(d, 18);
        let x = CMatrix::from_fn(d, d, |i, k| C64::new(seed[i * 18 + k], seed[324 + i * 18 + k]));
        let rho = &x * x.adjoint();
        let rho = &rho / rho.trace();
        let out = Liouvillian::new(&sys).apply(sys.rabi, &rho);
        prop_assert!(out.trace().norm() < 1e-12);
        prop_assert!(hermiticity_error(&out) < 1e-12);
    }

    #[test]
    fn decay_populations_are_a_distribution(
        sin_phi in 0.05..0.99f64,
        kappa in 0.01..1.0f64,
        t in 0.0..500.0f64,
    ) {
        let dp = DecayParams::new(sin_phi, kappa).unwrap();
        let s = decay_populations(&dp, t).unwrap();
        for x in [s.target, s.one_photon_plus, s.one_photon_minus, s.vacuum] {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&x), "{s:?}");
        }
        assert_abs_diff_eq!(s.target + s.one_photon() + s.vacuum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn grids_hit_their_endpoints(lo in 1e-3..1.0f64, span in 1.0..100.0f64, n in 2usize..50) {
        let hi = lo * span;
        for g in [linear_grid(lo, hi, n).unwrap(), log_grid(lo, hi, n).unwrap()] {
            prop_assert_eq!(g.len(), n);
            assert_abs_diff_eq!(g[0], lo, epsilon = 1e-12 * hi);
            assert_abs_diff_eq!(g[n - 1], hi, epsilon = 1e-12 * hi);
            prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
        }
    }
}
