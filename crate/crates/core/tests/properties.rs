use hankel_volume::eig::{cholesky, gen_eig_min, sym_eigen};
use hankel_volume::hankel::{
    assemble_pencil, is_positive_definite_exact, localizing_matrix_unit_interval, localizing_matrix_unit_interval_exact,
    model_matrix, model_matrix_exact, moment_matrix, moment_matrix_exact,
};
use hankel_volume::hierarchy::{run_hierarchy, HierarchyOptions};
use hankel_volume::matrix::{BasisKind, Matrix, SymMatrix};
use hankel_volume::moments::{coefficient_bound, pushforward_moments, BoxSpec};
use hankel_volume::oracle::{ball_volume, mc_pushforward_moment, Restriction};
use hankel_volume::poly::{parse_polynomial, power_sequence, ExponentVector, Polynomial};
use hankel_volume::stokes::stokes_constraints_nonhomog;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn rational() -> impl Strategy<Value = BigRational> {
    (-6i64..7, 1i64..5).prop_map(|(n, d)| q(n, d))
}

fn poly(n: usize, max_exp: u32, max_terms: usize) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0..=max_exp, n), rational()), 1..=max_terms).prop_map(move |terms| {
        Polynomial::from_terms(n, terms.into_iter().map(|(e, c)| (ExponentVector::new(&e), c))).unwrap()
    })
}

/// Form of degree `t`: the last exponent absorbs the remainder.
fn form(n: usize, t: u32, max_terms: usize) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0..=t, n), rational()), 1..=max_terms).prop_map(move |terms| {
        let terms = terms.into_iter().filter_map(|(mut e, c)| {
            let head: u32 = e[..n - 1].iter().sum();
            (head <= t).then(|| {
                e[n - 1] = t - head;
                (ExponentVector::new(&e), c)
            })
        });
        Polynomial::from_terms(n, terms).unwrap()
    })
}

/// Sum of squares of one to three random linear forms; never identically zero.
fn sos_quadratic(n: usize) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(prop::collection::vec(-3i64..4, n), 1..=3).prop_map(move |forms| {
        let mut g = Polynomial::zero(n);
        for f in forms {
            let lin = Polynomial::from_terms(n, f.iter().enumerate().map(|(i, &c)| (ExponentVector::unit(n, i), q(c, 1))))
                .unwrap();
            g = &g + &(&lin * &lin);
        }
        if g.is_zero() {
            g = Polynomial::variable(n, 0).multiply(&Polynomial::variable(n, 0)).unwrap();
        }
        g
    })
}

fn point(n: usize) -> impl Strategy<Value = Vec<BigRational>> {
    prop::collection::vec(rational(), n)
}

fn spd(size: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-1.0f64..1.0, size * size).prop_map(move |v| {
        let m = Matrix::from_fn(size, size, |i, j| v[i * size + j]);
        let mmt = m.matmul(&m.transpose()).unwrap();
        SymMatrix::from_fn(size, BasisKind::Monomial, |i, j| mmt[(i, j)] + if i == j { 0.5 } else { 0.0 })
    })
}

fn sym(size: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-10.0f64..10.0, size * size)
        .prop_map(move |v| SymMatrix::from_fn(size, BasisKind::Monomial, |i, j| v[i * size + j]))
}

fn min_eig(m: &SymMatrix) -> f64 {
    sym_eigen(m).unwrap()[0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplication_is_commutative_and_associative(
        (a, b, c) in (1usize..=3).prop_flat_map(|n| (poly(n, 3, 4), poly(n, 3, 4), poly(n, 3, 4)))
    ) {
        prop_assert_eq!(a.multiply(&b).unwrap(), b.multiply(&a).unwrap());
        prop_assert_eq!(a.multiply(&b).unwrap().multiply(&c).unwrap(), a.multiply(&b.multiply(&c).unwrap()).unwrap());
    }

    #[test]
    fn forms_scale_by_the_degree(
        (g, x, t) in (1u32..6).prop_flat_map(|t| (form(3, t, 5), point(3), Just(t))),
        c in rational(),
    ) {
        prop_assume!(!g.is_zero());
        prop_assert_eq!(g.homogeneity_degree().unwrap(), Some(t));
        let cx: Vec<_> = x.iter().map(|v| v * &c).collect();
        let lhs = g.evaluate_rational(&cx).unwrap();
        let rhs = g.evaluate_rational(&x).unwrap() * num_traits::pow(c, t as usize);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn powers_evaluate_to_powers((g, x) in (1usize..=3).prop_flat_map(|n| (poly(n, 2, 3), point(n)))) {
        let gx = g.evaluate_rational(&x).unwrap();
        for (k, gk) in power_sequence(&g, 5).iter().enumerate() {
            prop_assert_eq!(gk.evaluate_rational(&x).unwrap(), num_traits::pow(gx.clone(), k));
        }
    }

    #[test]
    fn print_then_parse_is_identity(g in (1usize..=4).prop_flat_map(|n| poly(n, 4, 6))) {
        prop_assert_eq!(parse_polynomial(&g.to_string(), g.dimension()).unwrap(), g);
    }

    #[test]
    fn graded_parts_reconstruct(g in (1usize..=3).prop_flat_map(|n| poly(n, 3, 6))) {
        let g = g.try_sub(&Polynomial::constant(g.dimension(), g.constant_term())).unwrap();
        prop_assume!(!g.is_zero());
        let parts = g.graded_decompose().unwrap();
        prop_assert_eq!(parts.reconstruct(), g.clone());
        for (k, p) in parts.parts().iter().enumerate() {
            if !p.is_zero() {
                prop_assert_eq!(p.homogeneity_degree().unwrap(), Some(k as u32 + 1));
            }
        }
    }

    #[test]
    fn moments_lie_below_the_coefficient_bound(g in (1usize..=3).prop_flat_map(sos_quadratic), r in 1i64..4) {
        let bx = BoxSpec::new(g.dimension(), q(r, 2)).unwrap();
        let seq = pushforward_moments(&g, &bx, 6).unwrap();
        let bound = coefficient_bound(&g, &bx);
        prop_assert_eq!(&seq.values[0], &q(1, 1));
        for (k, v) in seq.values.iter().enumerate() {
            prop_assert!(*v >= BigRational::zero());
            prop_assert!(*v <= num_traits::pow(bound.clone(), k));
        }
    }

    #[test]
    fn pushforward_hankel_matrices_are_psd(g in (1usize..=3).prop_flat_map(|n| poly(n, 3, 4))) {
        prop_assume!(!g.is_zero());
        let seq = pushforward_moments(&g, &BoxSpec::unit(g.dimension()), 8).unwrap();
        for d in 0..=4 {
            let m = moment_matrix(&seq, d).unwrap();
            prop_assert!(min_eig(&m) >= -1e-10 * m.frobenius_norm(), "d = {}", d);
        }
    }

    #[test]
    fn radius_is_a_change_of_variables(g in (1usize..=3).prop_flat_map(|n| poly(n, 3, 4)), r in rational()) {
        prop_assume!(!g.is_zero() && r > BigRational::zero());
        let n = g.dimension();
        let on_r = pushforward_moments(&g, &BoxSpec::new(n, r.clone()).unwrap(), 4).unwrap();
        let on_1 = pushforward_moments(&g.scale_variables(&r), &BoxSpec::unit(n), 4).unwrap();
        prop_assert_eq!(on_r.values, on_1.values);
    }

    #[test]
    fn hankel_entries_depend_on_the_antidiagonal(g in (1usize..=2).prop_flat_map(|n| poly(n, 2, 3)), n in 1u32..8, t in 1u32..4) {
        prop_assume!(!g.is_zero());
        let seq = pushforward_moments(&g, &BoxSpec::unit(g.dimension()), 8).unwrap();
        let a = moment_matrix_exact(&seq.values, 4).unwrap();
        let b = model_matrix_exact(n, 2 * t, 4);
        for i in 0..5 {
            for j in 0..5 {
                if i + 1 < 5 && j > 0 {
                    prop_assert_eq!(a.get(i, j), a.get(i + 1, j - 1));
                    prop_assert_eq!(b.get(i, j), b.get(i + 1, j - 1));
                }
            }
        }
    }

    #[test]
    fn congruence_leaves_the_pencil_invariant(
        (a, b, c) in (2usize..=5).prop_flat_map(|s| (spd(s), spd(s), prop::collection::vec(-0.5f64..0.5, s * s)))
    ) {
        let s = a.size();
        let c = Matrix::from_fn(s, s, |i, j| if i == j { 1.0 } else if j < i { c[i * s + j] } else { 0.0 });
        let base = gen_eig_min(&a, &b).unwrap().tau;
        let moved = gen_eig_min(&c.congruence(&a).unwrap(), &c.congruence(&b).unwrap()).unwrap().tau;
        prop_assert!(((moved - base) / base).abs() < 1e-8, "{} vs {}", moved, base);
    }

    #[test]
    fn tau_is_the_largest_feasible_shift((a, b) in (1usize..=4).prop_flat_map(|s| (sym(s), spd(s)))) {
        let r = gen_eig_min(&a, &b).unwrap();
        let eps = 1e-6 * (1.0 + r.tau.abs());
        prop_assert!(cholesky(&a.sub_scaled(r.tau - eps, &b).unwrap()).is_ok());
        prop_assert!(cholesky(&a.sub_scaled(r.tau + eps, &b).unwrap()).is_err());
        prop_assert!(r.residual <= 1e-8);
    }

    #[test]
    fn jacobi_agrees_with_an_independent_solver(a in (1usize..=8).prop_flat_map(sym)) {
        let ours = sym_eigen(&a).unwrap();
        let s = a.size();
        let m = nalgebra::DMatrix::from_fn(s, s, |i, j| a.get(i, j));
        let mut theirs: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        let scale = a.frobenius_norm().max(1.0);
        for (x, y) in ours.iter().zip(&theirs) {
            prop_assert!((x - y).abs() <= 1e-12 * scale, "{:?} vs {:?}", ours, theirs);
        }
        prop_assert!(ours.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((ours.iter().sum::<f64>() - a.trace()).abs() <= 1e-10 * scale);
    }

    #[test]
    fn cholesky_reconstructs(b in (1usize..=8).prop_flat_map(spd)) {
        let l = cholesky(&b).unwrap();
        let llt = l.matmul(&l.transpose()).unwrap();
        prop_assert!(llt.max_abs_diff(&b.to_matrix()) <= 1e-12 * b.frobenius_norm());
    }

    #[test]
    fn stokes_rows_stay_within_degree(n in 1u32..8, a in -4i64..4, w in 1i64..5, d in 1usize..5) {
        let rows = stokes_constraints_nonhomog(n, &q(a, 4), &q(a + w, 4), d).unwrap();
        prop_assert!(rows.iter().all(|r| r.degree() as usize <= 2 * d && !r.coefficients.is_empty()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn exact_moments_agree_with_sampling(g in (1usize..=3).prop_flat_map(|n| poly(n, 2, 3)), k in 1u32..4, seed in 0u64..1000) {
        prop_assume!(!g.is_zero());
        let bx = BoxSpec::unit(g.dimension());
        let exact = pushforward_moments(&g, &bx, k as usize).unwrap().values[k as usize].to_f64().unwrap();
        let est = mc_pushforward_moment(std::slice::from_ref(&g), &bx, &[k], Restriction::None, 200_000, seed).unwrap();
        prop_assert!(est.agrees_with(exact, 4.0) || est.stderr == 0.0 && (est.mean - exact).abs() < 1e-12,
            "{} vs {:?}", exact, est);
    }
}

#[test]
fn model_matrices_are_positive_definite() {
    for n in 1..=10 {
        for t in [2, 4, 6] {
            for d in 0..=6 {
                assert!(is_positive_definite_exact(&model_matrix_exact(n, t, d)), "n={n} t={t} d={d}");
            }
            assert!(min_eig(&model_matrix(n, t, 3)) > 0.0);
            let phi: Vec<BigRational> = (0..=10).map(|j| hankel_volume::moments::model_moment(n, t, j)).collect();
            // Supported on [0, 1]: the localizing matrix of x(1−x) is PSD.
            assert!(is_positive_definite_exact(&localizing_matrix_unit_interval_exact(&phi, 4).unwrap()));
        }
    }
}

#[test]
fn bounded_pushforward_passes_the_interval_test() {
    // (x1² + x2² + x3²)/3 maps the unit box into [0, 1].
    let g = parse_polynomial("1/3*x1^2 + 1/3*x2^2 + 1/3*x3^2", 3).unwrap();
    let seq = pushforward_moments(&g, &BoxSpec::unit(3), 12).unwrap();
    for d in 0..=5 {
        let loc = localizing_matrix_unit_interval(&seq.values, d).unwrap();
        assert!(min_eig(&loc) >= -1e-12 * loc.frobenius_norm());
    }
    // x1² + x2² reaches 2, outside [0, 1], and the test notices.
    let wide = parse_polynomial("x1^2 + x2^2", 2).unwrap();
    let seq = pushforward_moments(&wide, &BoxSpec::unit(2), 12).unwrap();
    assert!((0..=5).any(|d| min_eig(&localizing_matrix_unit_interval(&seq.values, d).unwrap()) < 0.0));
}

fn ball(n: usize) -> Polynomial {
    let expr: Vec<String> = (1..=n).map(|i| format!("x{i}^2")).collect();
    parse_polynomial(&expr.join(" + "), n).unwrap()
}

#[test]
fn ball_moments_dominate_the_scaled_model() {
    for n in 2..=5 {
        let seq = pushforward_moments(&ball(n), &BoxSpec::unit(n), 12).unwrap();
        let mass = ball_volume(n) / 2f64.powi(n as i32);
        for d in 1..=6 {
            let gap = moment_matrix(&seq, d).unwrap().sub_scaled(mass, &model_matrix(n as u32, 2, d)).unwrap();
            let m = moment_matrix(&seq, d).unwrap();
            assert!(min_eig(&gap) >= -1e-9 * m.frobenius_norm(), "n={n} d={d}");
        }
    }
}

#[test]
fn ball_hierarchy_is_a_monotone_upper_bound() {
    for n in 2..=5 {
        let opts = HierarchyOptions::new(6, BasisKind::default()).exhaustive();
        let rep = run_hierarchy(&ball(n), &BoxSpec::unit(n), &opts).unwrap();
        assert!(rep.monotone, "n={n}");
        for s in rep.scaled_estimates() {
            assert!(s >= ball_volume(n) - 1e-6, "n={n}: {s}");
        }
    }
}

#[test]
fn bases_agree_on_balls_and_ellipsoids() {
    let cases = [
        (ball(2), 2),
        (ball(3), 3),
        (ball(5), 5),
        (parse_polynomial("x1^2 + 2*x2^2 + x1*x2 + 3*x3^2", 3).unwrap(), 3),
        (parse_polynomial("x1^4 + x2^4 + x1^2*x2^2", 2).unwrap(), 2),
    ];
    for (g, n) in cases {
        let bx = BoxSpec::unit(n);
        let monomial = run_hierarchy(&g, &bx, &HierarchyOptions::new(6, BasisKind::Monomial).exhaustive()).unwrap();
        let chebyshev = run_hierarchy(&g, &bx, &HierarchyOptions::new(6, BasisKind::chebyshev()).exhaustive()).unwrap();
        for (a, b) in monomial.records.iter().zip(&chebyshev.records) {
            let (a, b) = (a.tau.unwrap(), b.tau.unwrap());
            assert!(((a - b) / a).abs() < 1e-7, "{g}: {a} vs {b}");
        }
    }
}

#[test]
fn pencil_bases_agree_up_to_degree_six() {
    let seq = pushforward_moments(&ball(2), &BoxSpec::unit(2), 12).unwrap();
    for d in 1..=6 {
        let taus: Vec<f64> = [BasisKind::Monomial, BasisKind::chebyshev(), BasisKind::OrthonormalModel, BasisKind::OrthonormalPushforward]
            .iter()
            .map(|b| {
                let p = assemble_pencil(&seq.values, 2, 2, d, b).unwrap();
                gen_eig_min(&p.pushforward, &p.model).unwrap().tau
            })
            .collect();
        assert!(taus.iter().all(|t| ((t - taus[0]) / taus[0]).abs() < 1e-8), "d={d}: {taus:?}");
    }
}
