use g2flow::algebra::{clifford_mul, cross, threeform_of, Spinor8, Vec7};
use g2flow::analysis::dirichlet_energy;
use g2flow::config::RunConfig;
use g2flow::dictionary::{metric_deviation, phi_from_uu, SpinorPair};
use g2flow::grid::{read_field, write_field, GridShape, Layout, Spinor8Field, Vec7Field};
use proptest::prelude::*;

fn vec7(range: f64) -> impl Strategy<Value = Vec7> {
    prop::array::uniform7(-range..range).prop_map(Vec7)
}

fn spinor() -> impl Strategy<Value = Spinor8> {
    prop::array::uniform8(-1.0..1.0f64).prop_map(Spinor8)
}

fn unit_spinor() -> impl Strategy<Value = Spinor8> {
    spinor()
        .prop_filter("away from zero", |s| s.norm() > 0.1)
        .prop_map(|s| s.normalized())
}

fn pair() -> impl Strategy<Value = SpinorPair> {
    unit_spinor().prop_map(|s| SpinorPair::from_spinor_over(&s, &Spinor8::reference()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn clifford_square_is_minus_norm(x in vec7(2.0), s in spinor()) {
        let xx = clifford_mul(&x, &clifford_mul(&x, &s));
        prop_assert!((xx + s * x.norm_sq()).max_abs() <= 1e-13);
    }

    #[test]
    fn clifford_action_is_skew(x in vec7(2.0), s in spinor()) {
        prop_assert!(clifford_mul(&x, &s).dot(&s).abs() <= 1e-13);
    }

    #[test]
    fn cross_product_norm_and_orthogonality(x in vec7(1.0), y in vec7(1.0)) {
        let c = cross(&x, &y);
        prop_assert!(c.dot(&x).abs() <= 1e-14 && c.dot(&y).abs() <= 1e-14);
        let expected = x.norm_sq() * y.norm_sq() - x.dot(&y).powi(2);
        prop_assert!((c.norm_sq() - expected).abs() <= 1e-13);
    }

    #[test]
    fn product_of_two_vectors_on_reference(x in vec7(1.0), y in vec7(1.0)) {
        let psi = Spinor8::reference();
        let lhs = clifford_mul(&x, &clifford_mul(&y, &psi));
        let rhs = clifford_mul(&cross(&x, &y), &psi) * -1.0 + psi * -x.dot(&y);
        prop_assert!((lhs + rhs * -1.0).max_abs() <= 1e-14);
    }

    #[test]
    fn pair_round_trip(p in pair()) {
        let q = SpinorPair::from_spinor_over(&p.to_spinor(), &Spinor8::reference());
        prop_assert!((q.big - p.big).max_abs() <= 1e-14);
        prop_assert!((q.small - p.small).abs() <= 1e-14);
    }

    #[test]
    fn antipodal_pairs_give_the_same_form(p in pair()) {
        let phibar = threeform_of(&Spinor8::reference());
        let a = phi_from_uu(&p, &phibar).unwrap();
        let b = phi_from_uu(&p.antipode(), &phibar).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-14);
    }

    #[test]
    fn induced_metric_is_flat(p in pair()) {
        let phibar = threeform_of(&Spinor8::reference());
        prop_assert!(metric_deviation(&phi_from_uu(&p, &phibar).unwrap()) <= 1e-10);
    }

    #[test]
    fn form_of_spinor_has_norm_seven(s in unit_spinor()) {
        prop_assert!((threeform_of(&s).norm_sq() - 7.0).abs() <= 1e-12);
    }

    #[test]
    fn energy_is_invariant_under_sign_and_translation(
        values in prop::collection::vec(unit_spinor(), 24),
        shift in 1isize..6,
    ) {
        let grid = GridShape::collapsed(&[6, 4]).unwrap();
        let psi = Spinor8Field::from_values(grid, Layout::Node, values).unwrap();
        let e = dirichlet_energy(&psi);
        let flipped = psi.map(|s| *s * -1.0);
        prop_assert_eq!(dirichlet_energy(&flipped), e);
        let moved = dirichlet_energy(&psi.shifted(0, shift));
        prop_assert!((moved - e).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(values in prop::collection::vec(vec7(1.0), 15)) {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridShape::collapsed(&[5, 3]).unwrap();
        let field = Vec7Field::from_values(grid, Layout::Node, values).unwrap();
        write_field(&dir.path().join("f"), &field).unwrap();
        let back: Vec7Field = read_field(&dir.path().join("f")).unwrap();
        prop_assert_eq!(back, field);
    }

    #[test]
    fn config_round_trip(
        seed in any::<u64>(),
        sizes in prop::collection::vec(2usize..40, 1..4),
        t_end in 0.0..10.0f64,
        amplitude in 0.0..0.9f64,
    ) {
        let text = format!(
            "seed = {seed}\n[grid]\nsizes = {sizes:?}\n[initial]\nname = \"band_limited\"\n\
             amplitude = {amplitude:?}\n[integrator]\nt_end = {t_end:?}\n"
        );
        let config = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(RunConfig::from_toml(&config.to_toml()).unwrap(), config);
    }
}
