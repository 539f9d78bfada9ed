use magpsido::decay::{conjugate_operator, BField, WeightFamily};
use magpsido::gauge::transversal_gauge;
use magpsido::relativistic::kernel_pt;
use magpsido::spectral::{eig_hermitian, eigenvalues_general, spectrum_mismatch};
use magpsido::{op_weyl, Complex64, GaugeData, Grid, MagneticField, PotentialSpec, SymbolCatalog};
use proptest::prelude::*;

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-200.0f64..200.0, d)
}

proptest! {
    #[test]
    fn b_field_stays_in_the_unit_ball(x in point(2), y in point(2), eps in 1e-4f64..1.0) {
        let b = BField::new(eps).eval(&x, &y);
        prop_assert!((b[0] * b[0] + b[1] * b[1]).sqrt() <= 1.0);
    }

    #[test]
    fn exponential_weight_ratio_matches_b(x in point(1), y in point(1), eps in 1e-3f64..1.0) {
        let w = WeightFamily::exponential();
        let lhs = w.log_eval(eps, &x) - w.log_eval(eps, &y);
        let b = BField::new(eps).eval(&x, &y);
        let rhs = eps * (x[0] - y[0]) * b[0];
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn magnetic_phase_is_hermitian(x in point(2), y in point(2), b in -2.0f64..2.0) {
        let g = transversal_gauge(&MagneticField::constant_2d(b));
        let p = g.phase(&x, &y) * g.phase(&y, &x);
        // Roundoff scales with the size of the terms that cancel in the flux.
        let scale = b.abs() * x.iter().chain(&y).map(|v| v.abs()).fold(0.0, f64::max).powi(2);
        prop_assert!((p - Complex64::new(1.0, 0.0)).norm() <= 1e-14 * (1.0 + scale));
    }

    #[test]
    fn kernel_is_positive_and_radially_decreasing(t in 0.1f64..5.0, r in 0.01f64..30.0) {
        let a = kernel_pt(t, &[r]).unwrap();
        let b = kernel_pt(t, &[r * 1.1]).unwrap();
        prop_assert!(a > 0.0 && b < a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn hermitize_is_idempotent(half in 4usize..24, l in 2.0f64..20.0, depth in 0.0f64..3.0) {
        let grid = Grid::new(1, l, 2 * half).unwrap();
        let v = PotentialSpec::gauss_well(depth, 1.0);
        let sym = SymbolCatalog::relativistic(1).with_potential(v).unwrap();
        let once = op_weyl(&sym, &GaugeData::free(1), &grid).unwrap().hermitize();
        let twice = once.hermitize();
        prop_assert_eq!(once.entries(), twice.entries());
        prop_assert_eq!(once.entries(), &once.entries().adjoint());
    }

    #[test]
    fn weight_conjugation_keeps_the_spectrum(half in 8usize..24, eps in 0.01f64..0.3, poly in any::<bool>()) {
        let grid = Grid::new(1, 10.0, 2 * half).unwrap();
        let sym = SymbolCatalog::relativistic(1).with_potential(PotentialSpec::gauss_well(2.0, 1.0)).unwrap();
        let h = op_weyl(&sym, &GaugeData::free(1), &grid).unwrap().hermitize();
        let w = if poly { WeightFamily::polynomial(3).unwrap() } else { WeightFamily::exponential() };
        let conj = conjugate_operator(&h, &w, eps).unwrap();
        let reference: Vec<Complex64> =
            eig_hermitian(&h).unwrap().eigenvalues.iter().map(|&l| Complex64::new(l, 0.0)).collect();
        let general = eigenvalues_general(conj.entries()).unwrap();
        prop_assert!(spectrum_mismatch(&reference, &general) < 1e-9);
    }
}
