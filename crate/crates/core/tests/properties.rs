use nalgebra::DMatrix;
use proptest::prelude::*;
use spinlab::cumulants::{classical_cumulant, free_cumulant, StateMoments};
use spinlab::dynamics::{DenseEvolver, EvolverConfig, Window};
use spinlab::open_chain::{conservation_residual, derive_current, equilibrium_report, Jump, LindbladModel};
use spinlab::states::{conditional_expectation, ProductGibbsState, QuantumState};
use spinlab::transport::{project_onto_charges, ChargeBasis, ExtensiveVector};
use spinlab::{Complex64 as C, LocalOperator, Pauli, PauliString, Site};

fn coeff() -> impl Strategy<Value = C> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C::new(re, im))
}

fn letter() -> impl Strategy<Value = Option<Pauli>> {
    prop_oneof![Just(None), Just(Some(Pauli::X)), Just(Some(Pauli::Y)), Just(Some(Pauli::Z))]
}

fn string_on(sites: std::ops::Range<Site>) -> impl Strategy<Value = PauliString> {
    let n = (sites.end - sites.start) as usize;
    proptest::collection::vec(letter(), n).prop_map(move |ls| {
        PauliString::from_pairs(ls.into_iter().enumerate().filter_map(|(k, p)| p.map(|p| (k as Site, p)))).1
    })
}

/// Random operators with up to six terms on sites {0..n}.
fn operator_on(n: Site) -> impl Strategy<Value = LocalOperator> {
    proptest::collection::vec((string_on(0..n), coeff()), 1..6).prop_map(LocalOperator::from_terms)
}

fn jump() -> impl Strategy<Value = Jump> {
    (coeff(), coeff(), coeff(), coeff(), coeff()).prop_map(|(a, b, c, d, e)| Jump::new(a, b, c, d, e))
}

fn model() -> impl Strategy<Value = LindbladModel> {
    (coeff(), -1.0..1.0f64, -1.0..1.0f64, proptest::collection::vec(jump(), 0..3))
        .prop_map(|(alpha, beta, gamma, jumps)| LindbladModel::new(alpha, beta, gamma, jumps))
}

fn balanced_model() -> impl Strategy<Value = LindbladModel> {
    (coeff(), -1.0..1.0f64, -1.0..1.0f64, proptest::collection::vec(jump(), 1..3)).prop_filter_map(
        "first jump cannot absorb the residual",
        |(alpha, beta, gamma, jumps)| {
            let mut m = LindbladModel::new(alpha, beta, gamma, jumps);
            m.enforce_detailed_balance().ok().map(|_| m)
        },
    )
}

fn max_diff(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dense_representation_is_multiplicative(a in operator_on(4), b in operator_on(4)) {
        let sites: Vec<Site> = (0..4).collect();
        let lhs = (&a * &b).to_dense(&sites).unwrap();
        let rhs = a.to_dense(&sites).unwrap() * b.to_dense(&sites).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn pauli_strings_close_under_products(p in string_on(0..5), q in string_on(0..5)) {
        let prod = &LocalOperator::from_string(p, C::new(1.0, 0.0)) * &LocalOperator::from_string(q, C::new(1.0, 0.0));
        prop_assert_eq!(prod.len(), 1);
        let (_, c) = prod.terms().next().unwrap();
        let phases = [C::new(1.0, 0.0), C::new(-1.0, 0.0), C::new(0.0, 1.0), C::new(0.0, -1.0)];
        prop_assert!(phases.contains(c));
    }

    #[test]
    fn adjoint_reverses_products(a in operator_on(3), b in operator_on(3)) {
        let lhs = (&a * &b).adjoint();
        let rhs = &b.adjoint() * &a.adjoint();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-15);
    }

    #[test]
    fn canonical_form_is_a_fixed_point(a in operator_on(4)) {
        let again = LocalOperator::from_terms(a.terms().map(|(s, &c)| (s.clone(), c)));
        prop_assert_eq!(&again, &a);
        prop_assert_eq!(&again.prune(0.0), &a.prune(0.0));
    }

    #[test]
    fn gibbs_state_is_positive_and_translation_invariant(a in operator_on(3), mu in -2.0..2.0f64, x in -7i64..7) {
        let state = ProductGibbsState::new(mu);
        let v = state.expect(&(&a.adjoint() * &a));
        prop_assert!(v.re >= -1e-12 && v.im.abs() <= 1e-12);
        prop_assert!((state.expect(&a.translate(x)) - state.expect(&a)).norm() <= 1e-14);
    }

    #[test]
    fn disjoint_supports_are_uncorrelated(a in operator_on(3), b in operator_on(3), x in 3i64..9, mu in -1.5..1.5f64) {
        let state: QuantumState = ProductGibbsState::new(mu).into();
        prop_assert!(state.connected(&a.translate(x), &b).unwrap().norm() <= 1e-14);
        prop_assert!(state.connected(&a.translate(-x), &b).unwrap().norm() <= 1e-14);
    }

    #[test]
    fn conditional_expectations_compose(a in operator_on(4), xm in 0u8..16, ym in 0u8..16, mu in -1.0..1.0f64) {
        let rho = ProductGibbsState::new(mu);
        let pick = |m: u8| -> Vec<Site> { (0..4).filter(|i| m >> i & 1 == 1).collect() };
        let (xs, ys) = (pick(xm), pick(ym));
        let both: Vec<Site> = xs.iter().copied().filter(|s| ys.contains(s)).collect();
        let lhs = conditional_expectation(&conditional_expectation(&a, &ys, &rho), &xs, &rho);
        let rhs = conditional_expectation(&a, &both, &rho);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-14);
    }

    #[test]
    fn current_is_a_discrete_divergence(m in model()) {
        let pair = derive_current(&m).unwrap();
        prop_assert!(conservation_residual(&m, &pair).unwrap() <= 1e-12);
    }

    #[test]
    fn flux_curvature_is_the_derivative_of_the_velocity(m in balanced_model(), mu in -2.0..2.0f64) {
        let r = equilibrium_report(&m, mu).unwrap();
        prop_assert_eq!(r.v_prime, m.drift());
        prop_assert_eq!(r.v, m.drift() * mu.tanh());
        prop_assert_eq!(r.l_lower > 0.0, m.drift() != 0.0);
    }

    #[test]
    fn classical_and_free_cumulants_are_multilinear(
        a in operator_on(3), b in operator_on(3), c in operator_on(3), d in operator_on(3), s in coeff(), mu in -1.0..1.0f64,
    ) {
        let state: QuantumState = ProductGibbsState::new(mu).into();
        let mixed = &a + &d.scale(s);
        for free in [false, true] {
            let eval = |first: &LocalOperator| {
                let m = StateMoments { state: &state, ops: vec![b.clone(), first.clone(), c.clone(), b.clone()] };
                if free { free_cumulant(&m).unwrap() } else { classical_cumulant(&m).unwrap() }
            };
            let lhs = eval(&mixed);
            let rhs = eval(&a) + eval(&d) * s;
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn projection_is_idempotent_and_gram_is_psd(q in operator_on(2), a in operator_on(3), mu in -1.0..1.0f64) {
        let state: QuantumState = ProductGibbsState::new(mu).into();
        let basis = ChargeBasis::new(vec![LocalOperator::sz(0), q], 0.0, 0.0, mu).unwrap();
        prop_assert!(basis.min_gram_eigenvalue() >= -1e-10);
        let p = project_onto_charges(&ExtensiveVector::new(a, 0.0), &basis, &state).unwrap();
        let pp = project_onto_charges(&p.projected, &basis, &state).unwrap();
        prop_assert!(pp.projected.density.max_abs_diff(&p.projected.density) <= 1e-12 * (1.0 + p.projected.density.hs_norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn heisenberg_and_schrodinger_pictures_are_dual(m in model(), a in operator_on(3), seed in proptest::collection::vec(coeff(), 64)) {
        let window = Window::open(0, 3);
        let gen = m.generator(window).unwrap();
        let sites = window.sites();
        // ρ = XX†/Tr(XX†) from a random 8×8 matrix X.
        let x = DMatrix::from_iterator(8, 8, seed.into_iter());
        let rho = &x * x.adjoint();
        let rho = &rho / rho.trace();
        let heis = gen.apply(&a).unwrap().to_dense(&sites).unwrap();
        let schr = gen.schrodinger().unwrap().apply(&rho);
        let lhs = (&rho * heis).trace();
        let rhs = (schr * a.to_dense(&sites).unwrap()).trace();
        prop_assert!((lhs - rhs).norm() <= 1e-10);
    }

    #[test]
    fn ring_magnetization_is_conserved_and_translations_commute(m in balanced_model(), t in 0.05..0.4f64, x in 1i64..4) {
        let window = Window::ring(5);
        let ev = DenseEvolver::new(&m.generator(window).unwrap(), EvolverConfig::new(window)).unwrap();
        let mag = ev.embed(&LocalOperator::magnetization(0..5)).unwrap();
        let evolved = ev.evolve(&mag, t).unwrap();
        prop_assert!(ev.to_local(&evolved, 0.0).max_abs_diff(&ev.to_local(&mag, 0.0)) <= 1e-9);
        let a = ev.embed(&(&LocalOperator::sx(0) * &LocalOperator::sz(1))).unwrap();
        let lhs = ev.translate(&ev.evolve(&a, t).unwrap(), x).unwrap();
        let rhs = ev.evolve(&ev.translate(&a, x).unwrap(), t).unwrap();
        prop_assert!(ev.to_local(&lhs, 0.0).max_abs_diff(&ev.to_local(&rhs, 0.0)) <= 1e-10);
    }
}
