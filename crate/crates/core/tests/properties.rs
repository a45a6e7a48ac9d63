//! Property tests over seeded random instances.

use proptest::prelude::*;
use rand::Rng;

use specfn::dsl::{parse, MultiIndex, Params};
use specfn::linalg::{
    conjugate, delta_field, jacobi_eigh, rand_direction_with, rand_sym_with, random_orthogonal,
    reconstruct, rng_from_seed, spectrum_with_gaps, with_eigenframe, Flag, Matrix, Spectrum,
};
use specfn::newton::{
    esym_to_psums, lift_polynomial, power_sums, power_sums_of, vandermonde_jacobian,
    DEFAULT_DEGREE_CAP,
};
use specfn::oracle::{central_derivative, fd_dirderiv, rel_err, run_suite, FdConfig};
use specfn::radial::{radial_dirderiv, RadialProfile};
use specfn::spectral::{DividedDiffMode, EngineConfig, SpectralFn};

const CORPUS: &[&str] = &["psum(2)", "psum(3)", "psum(4)", "esym(2)", "esym(3)", "logdet"];

fn spectral(src: &str, d: usize) -> SpectralFn {
    SpectralFn::new(&parse(src).unwrap(), d, &Params::new(), EngineConfig::default()).unwrap()
}

fn floor_for(src: &str) -> f64 {
    if src == "logdet" {
        1.0
    } else {
        -1.0
    }
}

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(48)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn eigensolver_reconstructs(seed in any::<u64>(), d in 1usize..=8) {
        let mut rng = rng_from_seed(seed);
        let x = rand_sym_with(d, &mut rng);
        let s = jacobi_eigh(&x).unwrap();
        let err = reconstruct(&s).sub(&x).frobenius_norm();
        prop_assert!(err <= 1e-9 * (1.0 + x.frobenius_norm()));
        prop_assert!(s.flag.invariant_defect() <= 1e-10);
    }

    #[test]
    fn conjugation_preserves_eigenvalues(seed in any::<u64>(), d in 1usize..=8) {
        let mut rng = rng_from_seed(seed);
        let x = rand_sym_with(d, &mut rng);
        let q = random_orthogonal(d, &mut rng);
        let a = jacobi_eigh(&x).unwrap().r;
        let b = jacobi_eigh(&conjugate(&x, &q).unwrap()).unwrap().r;
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-9 * (1.0 + x.frobenius_norm()));
        }
    }

    #[test]
    fn delta_field_cancels_and_is_tangent(seed in any::<u64>(), d in 2usize..=6) {
        let mut rng = rng_from_seed(seed);
        let flag = Flag::from_columns(&random_orthogonal(d, &mut rng));
        let xi = rand_direction_with(d, &mut rng);
        let mut a = Matrix::zeros(d);
        for i in 0..d {
            for j in i + 1..d {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = -v;
            }
        }
        let delta = delta_field(&a, &xi, &flag).unwrap();
        let mut total = Matrix::zeros(d);
        for (i, di) in delta.iter().enumerate() {
            total = total.add(di.as_matrix());
            let p = flag.projection(i).as_matrix();
            let dm = di.as_matrix();
            let sym = p.matmul(dm).add(&dm.matmul(p));
            prop_assert!(sym.sub(dm).max_abs() <= 1e-10);
            prop_assert!(p.matmul(dm).matmul(p).max_abs() <= 1e-10);
        }
        prop_assert!(total.max_abs() <= 1e-12);
    }

    #[test]
    fn partials_commute_and_are_equivariant(seed in any::<u64>(), d in 2usize..=5) {
        let mut rng = rng_from_seed(seed);
        let f = parse("sum(i, exp(0.3*r[i])) * psum(2) + esym(2)^2").unwrap()
            .instantiate(d, &Params::new()).unwrap();
        let r: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let i = rng.random_range(0..d);
        let j = rng.random_range(0..d);
        let ij = f.partial(&MultiIndex::unit(d, i)).unwrap().partial(&MultiIndex::unit(d, j)).unwrap();
        let ji = f.partial(&MultiIndex::unit(d, j)).unwrap().partial(&MultiIndex::unit(d, i)).unwrap();
        let (a, b) = (ij.eval(&r).unwrap(), ji.eval(&r).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));

        // f_{k}(r o sigma) = f_{sigma k}(r) for a random permutation sigma
        let mut sigma: Vec<usize> = (0..d).collect();
        for k in (1..d).rev() {
            sigma.swap(k, rng.random_range(0..=k));
        }
        let permuted: Vec<f64> = sigma.iter().map(|&s| r[s]).collect();
        let v = f.eval(&r).unwrap();
        prop_assert!((f.eval(&permuted).unwrap() - v).abs() <= 1e-9 * (1.0 + v.abs()));
        for k in 0..d {
            let lhs = f.partial(&MultiIndex::unit(d, k)).unwrap().eval(&permuted).unwrap();
            let rhs = f.partial(&MultiIndex::unit(d, sigma[k])).unwrap().eval(&r).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn rotation_invariance(seed in any::<u64>(), d in 2usize..=5, which in 0usize..6, n in 1usize..=3) {
        let src = CORPUS[which];
        let mut rng = rng_from_seed(seed);
        let r = spectrum_with_gaps(d, 0.1, floor_for(src), &mut rng);
        let x = with_eigenframe(&r, &random_orthogonal(d, &mut rng));
        let xi = rand_direction_with(d, &mut rng);
        let q = random_orthogonal(d, &mut rng);
        let (qx, qxi) = (conjugate(&x, &q).unwrap(), conjugate(&xi, &q).unwrap());
        let f = spectral(src, d);
        let v = f.eval(&x).unwrap();
        prop_assert!((f.eval(&qx).unwrap() - v).abs() <= 1e-9 * (1.0 + v.abs()));
        let a = f.dirderiv(&x, &xi, n).unwrap().value;
        let b = f.dirderiv(&qx, &qxi, n).unwrap().value;
        prop_assert!(rel_err(a, b) <= 1e-8 || (a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn flag_independence(seed in any::<u64>(), d in 2usize..=5, which in 0usize..6, n in 0usize..=3) {
        let src = CORPUS[which];
        let mut rng = rng_from_seed(seed);
        let mut r = spectrum_with_gaps(d, 0.2, floor_for(src), &mut rng);
        r[1] = r[0];
        let q = random_orthogonal(d, &mut rng);
        let mut q2 = q.clone();
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        for row in 0..d {
            let (u, v) = (q[(row, 0)], q[(row, 1)]);
            q2[(row, 0)] = theta.cos() * u - theta.sin() * v;
            q2[(row, 1)] = theta.sin() * u + theta.cos() * v;
        }
        let sa = Spectrum::new(r.clone(), Flag::from_columns(&q)).unwrap();
        let sb = Spectrum::new(r, Flag::from_columns(&q2)).unwrap();
        let xi = rand_direction_with(d, &mut rng);
        let f = spectral(src, d);
        let a = f.dirderiv_spectrum(&sa, &xi, n).unwrap().value;
        let b = f.dirderiv_spectrum(&sb, &xi, n).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        let ga = f.gradient_spectrum(&sa).unwrap();
        let gb = f.gradient_spectrum(&sb).unwrap();
        prop_assert!(ga.sub(&gb).max_abs() <= 1e-9 * (1.0 + ga.max_abs()));
    }

    #[test]
    fn derivative_matches_fd_of_previous_order(seed in any::<u64>(), d in 2usize..=5, which in 0usize..6, n in 1usize..=3) {
        let src = CORPUS[which];
        let f = spectral(src, d);
        if f.diag_fn().poly_degree().is_some_and(|p| (p as usize) < n) || f.diag_fn().is_zero() {
            return Ok(());
        }
        let mut rng = rng_from_seed(seed);
        let r = spectrum_with_gaps(d, 0.1, floor_for(src), &mut rng);
        let x = with_eigenframe(&r, &random_orthogonal(d, &mut rng));
        let xi = rand_direction_with(d, &mut rng);
        let v = f.dirderiv(&x, &xi, n).unwrap().value;
        let fd = fd_dirderiv(|y| Ok(f.dirderiv(y, &xi, n - 1)?.value), &x, &xi, 1, &FdConfig::for_order(1)).unwrap();
        prop_assert!(rel_err(v, fd) <= 1e-5, "{v} vs {fd}");
    }

    #[test]
    fn reduction_identities(seed in any::<u64>(), d in 2usize..=5, which in 0usize..6) {
        let src = CORPUS[which];
        let mut rng = rng_from_seed(seed);
        let r = spectrum_with_gaps(d, 0.05, floor_for(src), &mut rng);
        let x = with_eigenframe(&r, &random_orthogonal(d, &mut rng));
        let xi = rand_direction_with(d, &mut rng);
        let f = spectral(src, d);
        prop_assert!(rel_err(f.dirderiv(&x, &xi, 0).unwrap().value, f.eval(&x).unwrap()) <= 1e-9);
        prop_assert!(rel_err(f.dirderiv(&x, &xi, 1).unwrap().value, f.gradient(&x).unwrap().inner(&xi)) <= 1e-9);
        let h = f.hessian_apply(&x, &xi).unwrap().value.inner(&xi);
        prop_assert!(rel_err(f.dirderiv(&x, &xi, 2).unwrap().value, h) <= 1e-9);
    }

    #[test]
    fn dual_path_divided_differences(seed in any::<u64>(), d in 2usize..=5, which in 0usize..6, log_gap in -5.0f64..0.0) {
        let src = CORPUS[which];
        let mut rng = rng_from_seed(seed);
        let mut r: Vec<f64> = (0..d).map(|_| rng.random_range(1.0..2.0)).collect();
        r[1] = r[0] + 10f64.powf(log_gap);
        let f = spectral(src, d);
        let alpha = MultiIndex::zero(d);
        let q = f.divided_difference(&alpha, &r, 0, 1, DividedDiffMode::Quotient).unwrap();
        let m = f.divided_difference(&alpha, &r, 0, 1, DividedDiffMode::MidpointIntegral).unwrap();
        prop_assert!(rel_err(q, m) <= 1e-9, "{q} vs {m}");
    }

    #[test]
    fn no_jump_across_coalescence(seed in any::<u64>(), d in 2usize..=5, n in 1usize..=3) {
        let mut rng = rng_from_seed(seed);
        let base = spectrum_with_gaps(d, 0.3, -1.0, &mut rng);
        let q = random_orthogonal(d, &mut rng);
        let xi = rand_direction_with(d, &mut rng);
        let f = spectral("psum(4)", d);
        let c = 0.5 * (base[0] + base[1]);
        let at = |s: f64| {
            let mut r = base.clone();
            r[0] = c + s;
            r[1] = c - s;
            f.dirderiv(&with_eigenframe(&r, &q), &xi, n).unwrap().value
        };
        let s0 = 1e-2;
        let lip = 10.0 * ((at(s0) - at(-s0)).abs() / s0).max(1.0);
        for k in 3..=8 {
            let s = 10f64.powi(-k);
            prop_assert!((at(s) - at(-s)).abs() <= lip * s);
        }
    }

    #[test]
    fn radial_matches_fd_of_previous_order(seed in any::<u64>(), d in 1usize..=5, which in 0usize..4, n in 1usize..=3) {
        let src = ["r[1]^4", "r[1]^6 - r[1]^2", "cos(r[1])", "exp(-r[1]^2)"][which];
        let profile = RadialProfile::new(&parse(src).unwrap(), &Params::new()).unwrap();
        let mut rng = rng_from_seed(seed);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm >= 0.1);
        let xi: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = radial_dirderiv(&profile, &x, &xi, n).unwrap();
        let h = 1e-4 * (1.0 + norm);
        let fd = central_derivative(
            |s| {
                let y: Vec<f64> = x.iter().zip(&xi).map(|(a, b)| a + s * b).collect();
                radial_dirderiv(&profile, &y, &xi, n - 1)
            },
            1,
            h,
            2,
        ).unwrap();
        prop_assert!(rel_err(v, fd) <= 1e-6 || (v - fd).abs() <= 1e-9, "{v} vs {fd}");

        let q = random_orthogonal(d, &mut rng);
        let rot = |u: &[f64]| -> Vec<f64> { (0..d).map(|i| (0..d).map(|k| q[(i, k)] * u[k]).sum()).collect() };
        let w = radial_dirderiv(&profile, &rot(&x), &rot(&xi), n).unwrap();
        prop_assert!((v - w).abs() <= 1e-10 * (1.0 + v.abs()));
    }

    #[test]
    fn newton_identities(seed in any::<u64>(), d in 1usize..=8) {
        let mut rng = rng_from_seed(seed);
        let r: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
        let k = rng.random_range(1..=d);
        let mut e = vec![0.0; k + 1];
        e[0] = 1.0;
        for &v in &r {
            for j in (1..=k).rev() {
                e[j] += v * e[j - 1];
            }
        }
        let via = esym_to_psums(k, d).unwrap().eval(&power_sums_of(&r, d).p).unwrap();
        prop_assert!(rel_err(via, e[k]) <= 1e-9);

        let x = with_eigenframe(&r, &random_orthogonal(d, &mut rng));
        let traces = power_sums(&x, d).unwrap();
        let eig = power_sums_of(&jacobi_eigh(&x).unwrap().r, d);
        for (a, b) in traces.p.iter().zip(&eig.p) {
            prop_assert!(rel_err(*a, *b) <= 1e-9);
        }
        let poly = esym_to_psums(k, d).unwrap();
        let qx = conjugate(&x, &random_orthogonal(d, &mut rng)).unwrap();
        let a = lift_polynomial(&poly, &x, DEFAULT_DEGREE_CAP).unwrap();
        let b = lift_polynomial(&poly, &qx, DEFAULT_DEGREE_CAP).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn vandermonde_vanishes_exactly_on_repeats(seed in any::<u64>(), d in 2usize..=6) {
        let mut rng = rng_from_seed(seed);
        let mut r = spectrum_with_gaps(d, 0.1, -1.0, &mut rng);
        let v = vandermonde_jacobian(&r);
        prop_assert!(v.det_product != 0.0);
        prop_assert!(rel_err(v.det, v.det_product) <= 1e-9);
        let i = rng.random_range(0..d);
        let j = (i + 1 + rng.random_range(0..d - 1)) % d;
        r[j] = r[i];
        let v = vandermonde_jacobian(&r);
        prop_assert_eq!(v.det_product, 0.0);
        let scale = r.iter().fold(1.0f64, |m, x| m.max(x.abs())).powi((d * d) as i32);
        prop_assert!(v.det.abs() <= 1e-12 * scale);
    }

    #[test]
    fn fd_exact_on_quartics(seed in any::<u64>(), d in 1usize..=5, n in 1usize..=3) {
        let mut rng = rng_from_seed(seed);
        let x = rand_sym_with(d, &mut rng);
        let xi = rand_direction_with(d, &mut rng);
        let f = |y: &specfn::linalg::SymMatrix| Ok(y.pow(4).trace() - 2.0 * y.pow(3).trace() + y.trace());
        let fd = fd_dirderiv(f, &x, &xi, n, &FdConfig::for_order(n)).unwrap();
        let exact = spectral("psum(4) - 2*psum(3) + psum(1)", d).dirderiv(&x, &xi, n).unwrap().value;
        // Relative to the size of the n-th derivative's terms, not to a value
        // that may cancel to near zero.
        let (nx, nxi) = (x.frobenius_norm(), xi.frobenius_norm());
        let magnitude = (0..=4 - n).map(|k| nx.powi(k as i32)).sum::<f64>() * 24.0 * nxi.powi(n as i32);
        prop_assert!((fd - exact).abs() <= 1e-8 * magnitude.max(exact.abs()), "{fd} vs {exact}");
    }
}

#[test]
fn suite_reports_are_reproducible() {
    for suite in ["hessian", "coalescence", "radial"] {
        let a = serde_json::to_string(&run_suite(suite, 99, 6).unwrap()).unwrap();
        let b = serde_json::to_string(&run_suite(suite, 99, 6).unwrap()).unwrap();
        assert_eq!(a, b, "{suite}");
    }
}
