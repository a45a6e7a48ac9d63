use specfn::dsl::{parse, MultiIndex, Params};
use specfn::linalg::{
    jacobi_eigh, rand_direction_with, rng_from_seed, sym_with_spectrum_with, w_matrix, Flag,
    Spectrum, SymMatrix,
};
use specfn::oracle::{fd_dirderiv, rel_err, FdConfig};
use specfn::spectral::termsum::{operator_power, TermCaps};
use specfn::spectral::{
    dirderiv, eigen_derivative, eval_f, gradient, hessian_apply, DividedDiffMode, EngineConfig,
    SpectralFn,
};
use specfn::Error;

fn m(rows: &[&[f64]]) -> SymMatrix {
    SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn none() -> Params {
    Params::new()
}

fn spectral(src: &str, d: usize) -> SpectralFn {
    SpectralFn::new(&parse(src).unwrap(), d, &none(), EngineConfig::default()).unwrap()
}

#[test]
fn eval_examples() {
    let x = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
    assert!((eval_f(&parse("psum(2)").unwrap(), &x, &none()).unwrap() - 10.0).abs() < 1e-12);
    let id = SymMatrix::identity(3);
    assert!(eval_f(&parse("logdet").unwrap(), &id, &none()).unwrap().abs() < 1e-15);
    assert!((eval_f(&parse("psum(1)").unwrap(), &x, &none()).unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn unsymmetric_f_rejected() {
    let err = SpectralFn::new(&parse("r[1] - r[2]").unwrap(), 2, &none(), EngineConfig::default());
    assert!(matches!(err, Err(Error::NotSymmetric(2))));
}

#[test]
fn gradient_examples() {
    let x = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
    let g = gradient(&parse("psum(2)").unwrap(), &x, &none()).unwrap();
    assert!(g.sub(&x.scale(2.0)).max_abs() < 1e-12);

    let g = gradient(&parse("logdet").unwrap(), &SymMatrix::from_diag(&[2.0, 4.0]), &none()).unwrap();
    assert!(g.sub(&SymMatrix::from_diag(&[0.5, 0.25])).max_abs() < 1e-14);

    let g = gradient(&parse("psum(1)").unwrap(), &x, &none()).unwrap();
    assert!(g.sub(&SymMatrix::identity(2)).max_abs() < 1e-12);
}

#[test]
fn eigen_derivative_examples() {
    let x = SymMatrix::from_diag(&[3.0, 1.0]);
    let xi = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let ed = eigen_derivative(&x, &xi, &EngineConfig::default()).unwrap();
    assert_eq!(ed.rdot, vec![0.0, 0.0]);
    assert!(ed.pidot[0].sub(&m(&[&[0.0, 0.5], &[0.5, 0.0]])).max_abs() < 1e-15);
    assert!(ed.pidot[1].add(&ed.pidot[0]).max_abs() < 1e-15);

    let ed = eigen_derivative(&x, &SymMatrix::from_diag(&[0.7, -2.0]), &EngineConfig::default()).unwrap();
    assert_eq!(ed.rdot, vec![0.7, -2.0]);
    assert!(ed.pidot.iter().all(|p| p.max_abs() == 0.0));

    let err = eigen_derivative(&SymMatrix::identity(2), &xi, &EngineConfig::default());
    assert!(matches!(err, Err(Error::Coalescence(_))));
}

#[test]
fn divided_difference_examples() {
    let f = spectral("psum(3)", 2);
    let zero = MultiIndex::zero(2);
    let q = f.divided_difference(&zero, &[2.0, 1.0], 0, 1, DividedDiffMode::Quotient).unwrap();
    assert!((q - 9.0).abs() < 1e-14);
    let mid = f
        .divided_difference(&zero, &[2.0, 2.0], 0, 1, DividedDiffMode::MidpointIntegral)
        .unwrap();
    assert!((mid - 12.0).abs() < 1e-12);
    let mid = f
        .divided_difference(&zero, &[2.0, 1.0], 0, 1, DividedDiffMode::MidpointIntegral)
        .unwrap();
    assert!((mid - q).abs() < 1e-12);
    assert!(matches!(
        f.divided_difference(&zero, &[2.0, 2.0], 0, 1, DividedDiffMode::Quotient),
        Err(Error::Coalescence(_))
    ));
    let auto = f.divided_difference(&zero, &[2.0, 2.0], 0, 1, DividedDiffMode::Auto).unwrap();
    assert!((auto - 12.0).abs() < 1e-12);
    let lopsided = MultiIndex::unit(2, 0);
    assert!(f
        .divided_difference(&lopsided, &[2.0, 1.0], 0, 1, DividedDiffMode::Auto)
        .is_err());
}

#[test]
fn hessian_examples() {
    let mut rng = rng_from_seed(3);
    let x = sym_with_spectrum_with(&[1.5, 0.2, -1.0], &mut rng);
    let xi = rand_direction_with(3, &mut rng);
    let h = hessian_apply(&parse("psum(2)").unwrap(), &x, &xi, &none()).unwrap();
    assert!(h.sub(&xi.scale(2.0)).max_abs() < 1e-12);

    let x = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
    let xi = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let h = hessian_apply(&parse("psum(3)").unwrap(), &x, &xi, &none()).unwrap();
    assert!((h.inner(&xi) - 24.0).abs() < 1e-12);

    let h = hessian_apply(
        &parse("logdet").unwrap(),
        &SymMatrix::from_diag(&[2.0, 4.0]),
        &SymMatrix::identity(2),
        &none(),
    )
    .unwrap();
    assert!(h.sub(&SymMatrix::from_diag(&[-0.25, -1.0 / 16.0])).max_abs() < 1e-14);
}

#[test]
fn hessian_at_coalescence_uses_midpoint() {
    let f = spectral("psum(3)", 3);
    let x = SymMatrix::from_diag(&[2.0, 2.0, -1.0]);
    let xi = m(&[&[0.0, 1.0, 0.3], &[1.0, 0.5, 0.0], &[0.3, 0.0, -1.0]]);
    let h = f.hessian_apply(&x, &xi).unwrap();
    let want = 6.0 * x.matmul(&xi).matmul(xi.as_matrix()).trace();
    assert!(rel_err(h.value.inner(&xi), want) < 1e-12);
    let modes: Vec<_> = h.pairs.iter().map(|p| p.mode).collect();
    assert_eq!(
        modes,
        vec![
            DividedDiffMode::MidpointIntegral,
            DividedDiffMode::Quotient,
            DividedDiffMode::Quotient
        ]
    );
}

#[test]
fn dirderiv_examples() {
    let x = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
    let xi = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let psum3 = parse("psum(3)").unwrap();
    assert!(dirderiv(&psum3, &x, &xi, 3, &none()).unwrap().abs() < 1e-12);

    let mut rng = rng_from_seed(11);
    let x = sym_with_spectrum_with(&[2.0, 0.5, -0.3, -1.2], &mut rng);
    let xi = rand_direction_with(4, &mut rng);
    let v = dirderiv(&parse("psum(2)").unwrap(), &x, &xi, 2, &none()).unwrap();
    assert!(rel_err(v, 2.0 * xi.inner(&xi)) < 1e-12);
}

#[test]
fn dirderiv_coalescent_pair_matches_fd() {
    let mut rng = rng_from_seed(5);
    let x = sym_with_spectrum_with(&[0.5, 0.5, -1.0], &mut rng);
    let xi = rand_direction_with(3, &mut rng);
    let f = spectral("psum(4)", 3);
    let v = f.dirderiv(&x, &xi, 3).unwrap();
    let grad_contraction = |y: &SymMatrix| Ok(f.gradient(y)?.inner(&xi));
    let fd = fd_dirderiv(grad_contraction, &x, &xi, 2, &FdConfig::for_order(2)).unwrap();
    assert!(rel_err(v.value, fd) < 1e-5, "{} vs {fd}", v.value);
    assert!(v.pairs.iter().any(|p| p.mode == DividedDiffMode::MidpointIntegral));
}

#[test]
fn reductions_to_lower_orders() {
    let mut rng = rng_from_seed(21);
    for src in ["psum(3)", "esym(2) + psum(4)", "sum(i, exp(r[i]))", "logdet"] {
        let f = spectral(src, 4);
        let x = sym_with_spectrum_with(&[2.5, 1.7, 1.0, 0.4], &mut rng);
        let xi = rand_direction_with(4, &mut rng);
        let d0 = f.dirderiv(&x, &xi, 0).unwrap().value;
        assert!(rel_err(d0, f.eval(&x).unwrap()) < 1e-12, "{src}");
        let d1 = f.dirderiv(&x, &xi, 1).unwrap().value;
        assert!(rel_err(d1, f.gradient(&x).unwrap().inner(&xi)) < 1e-9, "{src}");
        let d2 = f.dirderiv(&x, &xi, 2).unwrap().value;
        assert!(rel_err(d2, f.hessian_apply(&x, &xi).unwrap().value.inner(&xi)) < 1e-9, "{src}");
    }
}

#[test]
fn matches_finite_differences_through_order_three() {
    let mut rng = rng_from_seed(99);
    for src in ["psum(4)", "esym(3)", "sum(i, exp(r[i]))", "logdet"] {
        let f = spectral(src, 4);
        let x = sym_with_spectrum_with(&[2.5, 1.7, 1.0, 0.4], &mut rng);
        let xi = rand_direction_with(4, &mut rng);
        for n in 1..=3 {
            let v = f.dirderiv(&x, &xi, n).unwrap().value;
            let fd = fd_dirderiv(|y: &SymMatrix| f.eval(y), &x, &xi, n, &FdConfig::for_order(n)).unwrap();
            assert!(rel_err(v, fd) < 1e-5, "{src} n={n}: {v} vs {fd}");
        }
    }
}

#[test]
fn forced_modes_agree_on_separated_spectra() {
    let mut rng = rng_from_seed(7);
    for src in ["psum(4)", "sum(i, exp(r[i]))"] {
        let quotient = SpectralFn::new(
            &parse(src).unwrap(),
            3,
            &none(),
            EngineConfig::default().with_mode(DividedDiffMode::Quotient),
        )
        .unwrap();
        let midpoint = SpectralFn::new(
            &parse(src).unwrap(),
            3,
            &none(),
            EngineConfig::default().with_mode(DividedDiffMode::MidpointIntegral),
        )
        .unwrap();
        let x = sym_with_spectrum_with(&[1.3, 0.9, -0.4], &mut rng);
        let xi = rand_direction_with(3, &mut rng);
        for n in 1..=3 {
            let a = quotient.dirderiv(&x, &xi, n).unwrap().value;
            let b = midpoint.dirderiv(&x, &xi, n).unwrap().value;
            assert!(rel_err(a, b) < 1e-10, "{src} n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn flag_independence_at_repeated_eigenvalue() {
    let f = spectral("psum(4) + esym(2)", 3);
    let r = vec![1.0, 1.0, -0.5];
    let xi = m(&[&[0.2, 1.0, -0.4], &[1.0, -0.3, 0.8], &[-0.4, 0.8, 0.6]]);
    let s1 = Spectrum::new(r.clone(), Flag::standard(3)).unwrap();
    let c = (0.7f64).cos();
    let sn = (0.7f64).sin();
    let q = specfn::linalg::Matrix::from_rows(&[
        vec![c, -sn, 0.0],
        vec![sn, c, 0.0],
        vec![0.0, 0.0, 1.0],
    ])
    .unwrap();
    let s2 = Spectrum::new(r, Flag::from_columns(&q)).unwrap();
    for n in 0..=3 {
        let a = f.dirderiv_spectrum(&s1, &xi, n).unwrap().value;
        let b = f.dirderiv_spectrum(&s2, &xi, n).unwrap().value;
        assert!(rel_err(a, b) < 1e-9, "n={n}: {a} vs {b}");
    }
    let g1 = f.gradient_spectrum(&s1).unwrap();
    let g2 = f.gradient_spectrum(&s2).unwrap();
    assert!(g1.sub(&g2).max_abs() < 1e-12);
}

#[test]
fn termsum_matches_direct_trace_evaluation() {
    // Every cyclic word evaluates to the matching matrix trace.
    let mut rng = rng_from_seed(4);
    let x = sym_with_spectrum_with(&[2.0, 1.0, -1.0], &mut rng);
    let xi = rand_direction_with(3, &mut rng);
    let s = jacobi_eigh(&x).unwrap();
    let w = w_matrix(&s.flag, &xi).unwrap();
    let ts = operator_power(3, 3, TermCaps::for_order(4)).unwrap();
    for (_, mono, _) in ts.terms().take(200) {
        let direct: f64 = mono
            .words()
            .iter()
            .map(|word| {
                let mut acc = specfn::linalg::Matrix::identity(3);
                for &a in word.letters() {
                    acc = acc
                        .matmul(s.flag.projection(a as usize).as_matrix())
                        .matmul(xi.as_matrix());
                }
                acc.trace()
            })
            .product();
        let via_w = specfn::spectral::eval::monomial_value(mono, &w);
        assert!((direct - via_w).abs() < 1e-10);
    }
}

#[test]
fn order_cap() {
    let f = spectral("psum(2)", 2);
    let x = SymMatrix::identity(2);
    assert!(matches!(f.dirderiv(&x, &x, 5), Err(Error::OrderCap { .. })));
}
