//! Seeded verification suites: each case builds a random instance with an
//! engineered spectrum and compares an engine value against an independent
//! oracle (finite differences, closed forms, or a second evaluation path).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dsl::{parse, MultiIndex, Params};
use crate::error::{Error, Result};
use crate::linalg::{
    jacobi_eigh, rand_direction_with, rand_sym_with, random_orthogonal, rng_from_seed,
    spectrum_with_gaps, with_eigenframe, Flag, Matrix, Spectrum, SymMatrix,
};
use crate::newton::{
    dr_dx_rows_check, esym_to_psums, lift_polynomial, power_sums, power_sums_of,
    vandermonde_jacobian, Basis, SymPoly, SymTerm, DEFAULT_DEGREE_CAP,
};
use crate::radial::{radial_bound_check, radial_dirderiv, RadialProfile};
use crate::spectral::{DividedDiffMode, EngineConfig, SpectralFn};

use super::fd::{central_derivative, central_derivative_vec, fd_dirderiv, rel_err, FdConfig};

pub const SUITES: &[&str] = &[
    "gradient",
    "hessian",
    "order3",
    "coalescence",
    "invariance",
    "radial",
    "newton",
    "dualpath",
    "eigen",
    "exact",
    "decay",
];

/// Matrix corpus shared by the gradient, Hessian and invariance suites.
pub const CORPUS: &[&str] = &["psum(2)", "psum(3)", "psum(4)", "esym(2)", "esym(3)", "logdet"];

/// Members of the corpus with a non-vanishing third derivative.
const THIRD_ORDER: &[&str] = &["psum(3)", "psum(4)", "esym(3)"];

const COALESCENCE_F: &[&str] = &["psum(3)", "psum(4)", "esym(2)", "esym(3)", "psum(2)*psum(2)"];

/// Even polynomial profiles with their degree in `r`.
const RADIAL_POLY: &[(&str, usize)] = &[
    ("r[1]^2", 2),
    ("r[1]^4", 4),
    ("r[1]^6", 6),
    ("r[1]^4 + 3*r[1]^2", 4),
    ("(r[1]^2 + 1)^3", 6),
];

const RADIAL_ANALYTIC: &[&str] = &["cos(r[1])", "sqrt(1 + r[1]^2)"];

/// Gaps `1e-2, ..., 1e-10` of the coalescence sweep.
pub const SWEEP_GAPS: [f64; 9] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10];

pub fn default_trials(suite: &str) -> Result<usize> {
    Ok(match suite {
        "gradient" | "hessian" | "invariance" => 100,
        "order3" | "radial" | "newton" | "eigen" | "exact" => 50,
        "dualpath" => 1000,
        "coalescence" => 12,
        "decay" => 6,
        _ => return Err(Error::UnknownSuite(suite.to_string())),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `|a - b| / max(|a|, |b|, 1e-8)`.
    Relative,
    /// `|a - b|`.
    Absolute,
    /// `|a - b| / (1 + max(|a|, |b|))`.
    Scaled,
    /// A dimensionless quantity computed by the suite itself.
    Ratio,
}

impl Metric {
    pub fn measure(self, a: f64, b: f64) -> f64 {
        let e = match self {
            Metric::Relative => rel_err(a, b),
            Metric::Absolute => (a - b).abs(),
            Metric::Scaled => (a - b).abs() / (1.0 + a.abs().max(b.abs())),
            Metric::Ratio => a,
        };
        if e.is_nan() {
            f64::INFINITY
        } else {
            e
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseRecord {
    pub case: usize,
    pub check: String,
    pub f: String,
    pub dim: usize,
    pub x: String,
    pub xi: String,
    pub n: usize,
    pub formula_value: f64,
    pub oracle_value: f64,
    pub rel_err: f64,
    /// The quantity compared with `tolerance`, measured by `metric`.
    pub error: f64,
    pub metric: Metric,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub suite: String,
    pub seed: u64,
    pub trials: usize,
    pub records: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub max_rel_err: f64,
    pub max_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivReport {
    pub summary: Summary,
    pub records: Vec<CaseRecord>,
}

impl DerivReport {
    fn new(suite: &str, seed: u64, trials: usize, records: Vec<CaseRecord>) -> Self {
        let passed = records.iter().filter(|r| r.pass).count();
        let finite_max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
        let summary = Summary {
            suite: suite.to_string(),
            seed,
            trials,
            records: records.len(),
            passed,
            pass_rate: if records.is_empty() {
                1.0
            } else {
                passed as f64 / records.len() as f64
            },
            max_rel_err: finite_max(&mut records.iter().map(|r| r.rel_err)),
            max_error: finite_max(&mut records.iter().map(|r| r.error)),
        };
        DerivReport { summary, records }
    }

    pub fn all_pass(&self) -> bool {
        self.summary.passed == self.summary.records
    }

    pub fn records_for<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a CaseRecord> + 'a {
        self.records.iter().filter(move |r| r.check == check)
    }
}

/// Runs `suite` with `trials` cases. Cases run in parallel; records come back
/// in case order and are identical for identical `(suite, seed, trials)`.
pub fn run_suite(suite: &str, seed: u64, trials: usize) -> Result<DerivReport> {
    let salt = SUITES
        .iter()
        .position(|s| *s == suite)
        .ok_or_else(|| Error::UnknownSuite(suite.to_string()))? as u64;
    let case: fn(usize, &mut ChaCha8Rng, &mut Recorder) -> Result<()> = match suite {
        "gradient" => gradient_case,
        "hessian" => hessian_case,
        "order3" => order3_case,
        "coalescence" => coalescence_case,
        "invariance" => invariance_case,
        "radial" => radial_case,
        "newton" => newton_case,
        "dualpath" => dualpath_case,
        "eigen" => eigen_case,
        "exact" => exact_case,
        "decay" => decay_case,
        _ => unreachable!(),
    };
    let records: Vec<Vec<CaseRecord>> = (0..trials)
        .into_par_iter()
        .map(|idx| {
            let mut rng = rng_from_seed(mix(seed, salt, idx as u64));
            let mut rec = Recorder::new(idx);
            if let Err(e) = case(idx, &mut rng, &mut rec) {
                rec.error("setup", 0, e);
            }
            rec.records
        })
        .collect();
    Ok(DerivReport::new(suite, seed, trials, records.into_iter().flatten().collect()))
}

fn mix(seed: u64, salt: u64, idx: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed
        .wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(idx.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Recorder {
    case: usize,
    f: String,
    dim: usize,
    x: String,
    xi: String,
    records: Vec<CaseRecord>,
}

impl Recorder {
    fn new(case: usize) -> Self {
        Recorder {
            case,
            f: String::new(),
            dim: 0,
            x: String::new(),
            xi: String::new(),
            records: Vec::new(),
        }
    }

    fn context(&mut self, f: &str, dim: usize, x: String, xi: String) {
        self.f = f.to_string();
        self.dim = dim;
        self.x = x;
        self.xi = xi;
    }

    fn push(&mut self, check: &str, n: usize, a: f64, b: f64, error: f64, metric: Metric, tol: f64) {
        self.records.push(CaseRecord {
            case: self.case,
            check: check.to_string(),
            f: self.f.clone(),
            dim: self.dim,
            x: self.x.clone(),
            xi: self.xi.clone(),
            n,
            formula_value: a,
            oracle_value: b,
            rel_err: rel_err(a, b),
            error,
            metric,
            tolerance: tol,
            pass: error <= tol,
            note: None,
        });
    }

    fn compare(&mut self, check: &str, n: usize, formula: Result<f64>, oracle: Result<f64>, metric: Metric, tol: f64) {
        match (formula, oracle) {
            (Ok(a), Ok(b)) => self.push(check, n, a, b, metric.measure(a, b), metric, tol),
            (Err(e), _) | (_, Err(e)) => self.error(check, n, e),
        }
    }

    fn error(&mut self, check: &str, n: usize, e: Error) {
        self.push(check, n, f64::NAN, f64::NAN, f64::INFINITY, Metric::Absolute, 0.0);
        if let Some(last) = self.records.last_mut() {
            last.note = Some(e.to_string());
        }
    }
}

fn describe_spectrum(r: &[f64]) -> String {
    let parts: Vec<String> = r.iter().map(|v| format!("{v:.6}")).collect();
    format!("Q diag({}) Q^T", parts.join(", "))
}

fn describe_dir(xi: &SymMatrix) -> String {
    format!("random unit direction, |xi|_F = {:.3}", xi.frobenius_norm())
}

fn spectral(src: &str, d: usize) -> Result<SpectralFn> {
    spectral_with(src, d, EngineConfig::default())
}

fn spectral_with(src: &str, d: usize, cfg: EngineConfig) -> Result<SpectralFn> {
    SpectralFn::new(&parse(src)?, d, &Params::new(), cfg)
}

/// Separated spectrum (gaps at least 0.1); `logdet` gets values at least 1.
fn corpus_spectrum(src: &str, d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let floor = if src == "logdet" {
        rng.random_range(1.0..2.0)
    } else {
        rng.random_range(-2.0..0.5)
    };
    spectrum_with_gaps(d, 0.1, floor, rng)
}

fn frob_rel(a: &SymMatrix, b: &SymMatrix) -> f64 {
    a.sub(b).frobenius_norm() / a.frobenius_norm().max(b.frobenius_norm()).max(1e-8)
}

fn corpus_instance(idx: usize, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> (&'static str, usize, SymMatrix, SymMatrix) {
    let d = 2 + idx % 5;
    let src = CORPUS[idx % CORPUS.len()];
    let r = corpus_spectrum(src, d, rng);
    let q = random_orthogonal(d, rng);
    let x = with_eigenframe(&r, &q);
    let xi = rand_direction_with(d, rng);
    rec.context(src, d, describe_spectrum(&r), describe_dir(&xi));
    (src, d, x, xi)
}

fn gradient_case(idx: usize, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let (src, d, x, xi) = corpus_instance(idx, rng, rec);
    let f = spectral(src, d)?;
    let formula = f.gradient(&x).map(|g| g.inner(&xi));
    let oracle = fd_dirderiv(|y: &SymMatrix| f.eval(y), &x, &xi, 1, &FdConfig::for_order(1));
    rec.compare("gradient_fd", 1, formula, oracle, Metric::Relative, 1e-6);
    Ok(())
}

fn hessian_case(idx: usize, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let (src, d, x, xi) = corpus_instance(idx, rng, rec);
    let f = spectral(src, d)?;
    let midpoint = spectral_with(src, d, EngineConfig::default().with_mode(DividedDiffMode::MidpointIntegral))?;
    let h = f.hessian_apply(&x, &xi)?.value.inner(&xi);
    let fd = fd_dirderiv(|y: &SymMatrix| f.eval(y), &x, &xi, 2, &FdConfig::for_order(2));
    rec.compare("hessian_fd", 2, Ok(h), fd, Metric::Relative, 1e-5);
    let d2 = f.dirderiv(&x, &xi, 2).map(|v| v.value);
    rec.compare("hessian_vs_dirderiv", 2, Ok(h), d2, Metric::Relative, 1e-9);
    let d2m = midpoint.dirderiv(&x, &xi, 2).map(|v| v.value);
    rec.compare("hessian_vs_midpoint", 2, Ok(h), d2m, Metric::Relative, 1e-9);
    let fd_of_first = fd_dirderiv(
        |y: &SymMatrix| Ok(f.dirderiv(y, &xi, 1)?.value),
        &x,
        &xi,
        1,
        &FdConfig::for_order(1),
    );
    rec.compare("second_vs_fd_of_first", 2, Ok(h), fd_of_first, Metric::Relative, 1e-5);
    Ok(())
}

fn order3_case(idx: usize, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let d = 2 + idx % 5;
    let mut src = THIRD_ORDER[idx % THIRD_ORDER.len()];
    if d < 3 && src == "esym(3)" {
        src = "psum(3)";
    }
    let r = corpus_spectrum(src, d, rng);
    let x = with_eigenframe(&r, &random_orthogonal(d, rng));
    let xi = rand_direction_with(d, rng);
    rec.context(src, d, describe_spectrum(&r), describe_dir(&xi));
    let f = spectral(src, d)?;
    let v = f.dirderiv(&x, &xi, 3)?.value;
    let fd = fd_dirderiv(|y: &SymMatrix| f.eval(y), &x, &xi, 3, &FdConfig::for_order(3));
    rec.compare("order3_fd", 3, Ok(v), fd, Metric::Relative, 1e-4);
    let fd2 = fd_dirderiv(
        |y: &SymMatrix| Ok(f.dirderiv(y, &xi, 2)?.value),
        &x,
        &xi,
        1,
        &FdConfig::for_order(1),
    );
    rec.compare("third_vs_fd_of_second", 3, Ok(v), fd2, Metric::Relative, 1e-5);
    Ok(())
}

fn exact_case(idx: usize, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let d = 2 + idx % 5;
    let x = rand_sym_with(d, rng);
    let xi = rand_direction_with(d, rng);
    rec.context("psum(2)", d, "random symmetric (standard normal entries)".into(), describe_dir(&xi));
    let p2 = spectral("psum(2)", d)?;
    let g = p2.gradient(&x)?;
    let two_x = x.scale(2.0);
    rec.push(
        "psum2_gradient",
        1,
        g.frobenius_norm(),
        two_x.frobenius_norm(),
        frob_rel(&g, &two_x),
        Metric::Relative,
        1e-10,
    );
    let want2 = 2.0 * xi.inner(&xi);
    rec.compare("psum2_second", 2, p2.dirderiv(&x, &xi, 2).map(|v| v.value), Ok(want2), Metric::Relative, 1e-10);
    rec.compare("psum2_third", 3, p2.dirderiv(&x, &xi, 3).map(|v| v.value), Ok(0.0), Metric::Absolute, 1e-10);

    rec.f = "psum(3)".into();
    let p3 = spectral("psum(3)", d)?;
    let xixi = xi.matmul(&xi);
    let want = 6.0 * x.as_matrix().matmul(&xixi).trace();
    rec.compare("psum3_second", 2, p3.dirderiv(&x, &xi, 2).map(|v| v.value), Ok(want), Metric::Relative, 1e-9);
    let want3 = 6.0 * xixi.matmul(xi.as_matrix()).trace();
    rec.compare("psum3_third", 3, p3.dirderiv(&x, &xi, 3).map(|v| v.value), Ok(want3), Metric::Relative, 1e-9);
    Ok(())
}

fn dualpath_case(idx: usize, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    const FUNCS: &[&str] = &[
        "psum(2)",
        "psum(3)",
        "psum(4)",
        "esym(2)",
        "esym(3)",
        "logdet",
        "sum(i, exp(r[i]))",
    ];
    let d = 2 + idx % 5;
    let src = FUNCS[idx % FUNCS.len()];
    let mut r: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    let i = rng.random_range(0..d - 1);
    let j = rng.random_range(i + 1..d);
    let gap = 10f64.powf(rng.random_range(-5.0..-0.3));
    r[j] = if r[i] - gap >= 0.5 { r[i] - gap } else { r[i] + gap };
    let mut counts = vec![0u8; d];
    match rng.random_range(0..3) {
        0 => {}
        1 if d >= 3 => {
            let others: Vec<usize> = (0..d).filter(|&k| k != i && k != j).collect();
            counts[others[rng.random_range(0..others.len())]] = 1;
        }
        _ => {
            counts[i] = 1;
            counts[j] = 1;
        }
    }
    let alpha = MultiIndex::from_counts(counts);
    rec.context(
        src,
        d,
        format!("r = {r:?}, pair ({}, {}), alpha = {alpha}", i + 1, j + 1),
        String::new(),
    );
    let f = spectral(src, d)?;
    let q = f.divided_difference(&alpha, &r, i, j, DividedDiffMode::Quotient);
    let m = f.divided_difference(&alpha, &r, i, j, DividedDiffMode::MidpointIntegral);
    rec.compare("divided_difference", alpha.order(), q, m, Metric::Relative, 1e-9);

    if idx.is_multiple_of(10) {
        let mut sorted = r.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let x = with_eigenframe(&sorted, &random_orthogonal(d, rng));
        let xi = rand_direction_with(d, rng);
        rec.x = describe_spectrum(&sorted);
        rec.xi = describe_dir(&xi);
        let fq = spectral_with(src, d, EngineConfig::default().with_mode(DividedDiffMode::Quotient))?;
        let fm = spectral_with(src, d, EngineConfig::default().with_mode(DividedDiffMode::MidpointIntegral))?;
        let a = fq.dirderiv(&x, &xi, 2).map(|v| v.value);
        let b = fm.dirderiv(&x, &xi, 2).map(|v| v.value);
        rec.compare("dirderiv_modes", 2, a, b, Metric::Relative, 1e-9);
    }
    Ok(())
}

fn coalescence_case(idx: usize, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let d = 3 + idx % 4;
    let src = COALESCENCE_F[idx % COALESCENCE_F.len()];
    let floor = rng.random_range(-1.5..0.0);
    let base = spectrum_with_gaps(d, 0.3, floor, rng);
    let k = rng.random_range(0..d - 1);
    let center = 0.5 * (base[k] + base[k + 1]);
    let q = random_orthogonal(d, rng);
    let xi = rand_direction_with(d, rng);
    rec.context(
        src,
        d,
        format!("{} with pair ({}, {}) split around {center:.6}", describe_spectrum(&base), k + 1, k + 2),
        describe_dir(&xi),
    );
    let f = spectral(src, d)?;
    let at_gap = |g: f64| -> Result<f64> {
        let mut r = base.clone();
        r[k] = center + 0.5 * g;
        r[k + 1] = center - 0.5 * g;
        Ok(f.dirderiv(&with_eigenframe(&r, &q), &xi, n_of(idx))?.value)
    };
    // One derivative order per sweep, cycling through 1..=3.
    let n = n_of(idx);
    let mut values = Vec::with_capacity(SWEEP_GAPS.len());
    for &g in &SWEEP_GAPS {
        let v = at_gap(g)?;
        let err = if v.is_finite() { 0.0 } else { f64::INFINITY };
        rec.push("finite", n, v, v, err, Metric::Absolute, 0.0);
        values.push(v);
    }
    let first_rate = (values[1] - values[0]).abs() / (SWEEP_GAPS[0] * (1.0 + values[0].abs()));
    let c = 10.0 * first_rate.max(1.0);
    for step in 0..SWEEP_GAPS.len() - 1 {
        let (a, b) = (values[step + 1], values[step]);
        rec.push("continuity", n, a, b, Metric::Scaled.measure(a, b), Metric::Scaled, 1e-6);
        rec.records.last_mut().expect("just pushed").note =
            Some(format!("gap {:e} -> {:e}", SWEEP_GAPS[step], SWEEP_GAPS[step + 1]));
        let rate = (a - b).abs() / (SWEEP_GAPS[step] * (1.0 + a.abs().max(b.abs())));
        rec.push("continuity_rate", n, rate, c, rate, Metric::Ratio, c);
    }
    let (g1, g2) = (SWEEP_GAPS[7], SWEEP_GAPS[8]);
    let (v1, v2) = (values[7], values[8]);
    let extrapolated = v2 - g2 * (v1 - v2) / (g1 - g2);
    let exact = at_gap(0.0);
    rec.compare("coalesced_limit", n, exact, Ok(extrapolated), Metric::Absolute, 1e-7);
    Ok(())
}

fn n_of(idx: usize) -> usize {
    1 + idx % 3
}

fn invariance_case(idx: usize, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let (mut src, d, x, xi) = corpus_instance(idx, rng, rec);
    if d < 3 && src == "esym(3)" {
        src = "psum(3)";
        rec.f = src.into();
    }
    let f = spectral(src, d)?;
    let q = random_orthogonal(d, rng);
    let qx = crate::linalg::conjugate(&x, &q)?;
    let qxi = crate::linalg::conjugate(&xi, &q)?;
    rec.compare("rotation_eval", 0, f.eval(&qx), f.eval(&x), Metric::Relative, 1e-8);
    let g = f.gradient(&x)?;
    let gq = f.gradient(&qx)?;
    let rotated = crate::linalg::conjugate(&g, &q)?;
    rec.push("rotation_gradient", 1, gq.frobenius_norm(), rotated.frobenius_norm(), frob_rel(&gq, &rotated), Metric::Relative, 1e-8);
    let degree = f.diag_fn().poly_degree();
    for n in 1..=3 {
        if degree.is_some_and(|p| (p as usize) < n) {
            continue;
        }
        let a = f.dirderiv(&qx, &qxi, n).map(|v| v.value);
        let b = f.dirderiv(&x, &xi, n).map(|v| v.value);
        rec.compare("rotation_dirderiv", n, a, b, Metric::Relative, 1e-8);
    }

    // Repeated eigenvalue: compare two independently generated eigenflags.
    let mut r = corpus_spectrum(src, d, rng);
    let block = if d >= 4 && idx.is_multiple_of(3) { 3 } else { 2 };
    let start = rng.random_range(0..=d - block);
    for k in start + 1..start + block {
        r[k] = r[start];
    }
    let q1 = random_orthogonal(d, rng);
    let xr = with_eigenframe(&r, &q1);
    rec.x = format!("{} (block of {block} equal eigenvalues)", describe_spectrum(&r));
    let s_a = jacobi_eigh(&xr)?;
    let inner = random_orthogonal(block, rng);
    let mut rot = Matrix::identity(d);
    for a in 0..block {
        for b in 0..block {
            rot[(start + a, start + b)] = inner[(a, b)];
        }
    }
    let s_b = Spectrum::new(r.clone(), Flag::from_columns(&q1.matmul(&rot)))?;
    rec.compare("flag_eval", 0, f.eval_spectrum(&s_a), f.eval_spectrum(&s_b), Metric::Relative, 1e-9);
    let ga = f.gradient_spectrum(&s_a)?;
    let gb = f.gradient_spectrum(&s_b)?;
    rec.push("flag_gradient", 1, ga.frobenius_norm(), gb.frobenius_norm(), frob_rel(&ga, &gb), Metric::Relative, 1e-9);
    for n in 1..=3 {
        if degree.is_some_and(|p| (p as usize) < n) {
            continue;
        }
        let a = f.dirderiv_spectrum(&s_a, &xi, n).map(|v| v.value);
        let b = f.dirderiv_spectrum(&s_b, &xi, n).map(|v| v.value);
        rec.compare("flag_dirderiv", n, a, b, Metric::Relative, 1e-9);
    }
    Ok(())
}

fn eigen_case(idx: usize, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let d = 2 + idx % 5;
    let r = corpus_spectrum("", d, rng);
    let x = with_eigenframe(&r, &random_orthogonal(d, rng));
    let xi = rand_direction_with(d, rng);
    rec.context("eigensolver", d, describe_spectrum(&r), describe_dir(&xi));
    let ed = crate::spectral::eigen_derivative(&x, &xi, &EngineConfig::default())?;
    let base = &ed.spectrum;
    let h = 1e-4 * (1.0 + x.frobenius_norm()) / xi.frobenius_norm();
    // Eigenvalues, projection entries, then sign-aligned eigenvectors.
    let fd = central_derivative_vec(
        |s| {
            let sp = jacobi_eigh(&x.axpy(s, &xi))?;
            let mut out = sp.r.clone();
            for k in 0..d {
                out.extend(sp.flag.projection(k).as_matrix().as_slice());
            }
            for k in 0..d {
                let u = sp.flag.vector(k);
                let dot: f64 = u.iter().zip(base.flag.vector(k)).map(|(a, b)| a * b).sum();
                let sign = if dot < 0.0 { -1.0 } else { 1.0 };
                out.extend(u.iter().map(|v| sign * v));
            }
            Ok(out)
        },
        1,
        h,
        2,
    )?;
    let rdot_err = (0..d).map(|k| (ed.rdot[k] - fd[k]).abs()).fold(0.0, f64::max);
    rec.push("rdot", 1, rdot_err, 0.0, rdot_err, Metric::Absolute, 1e-6);
    let mut pidot_err: f64 = 0.0;
    for k in 0..d {
        let got = ed.pidot[k].as_matrix().as_slice();
        let want = &fd[d + k * d * d..d + (k + 1) * d * d];
        pidot_err = got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(pidot_err, f64::max);
    }
    rec.push("pidot", 1, pidot_err, 0.0, pidot_err, Metric::Absolute, 1e-6);
    // u_k' = sum_{j != k} w_kj / (r_k - r_j) u_j
    let w = crate::linalg::w_matrix(&base.flag, &xi)?;
    let offset = d + d * d * d;
    let mut udot_err: f64 = 0.0;
    for k in 0..d {
        for p in 0..d {
            let want: f64 = (0..d)
                .filter(|&j| j != k)
                .map(|j| w.get(k, j) / (base.r[k] - base.r[j]) * base.flag.vector(j)[p])
                .sum();
            udot_err = udot_err.max((want - fd[offset + k * d + p]).abs());
        }
    }
    rec.push("eigvec_aligned", 1, udot_err, 0.0, udot_err, Metric::Absolute, 1e-6);
    Ok(())
}

fn radial_fd(profile: &RadialProfile, x: &[f64], xi: &[f64], n: usize, levels: usize) -> Result<f64> {
    let norm_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm_xi = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = FdConfig::for_order(n).step * (1.0 + norm_x) / norm_xi;
    central_derivative(
        |s| {
            let y: f64 = x.iter().zip(xi).map(|(a, b)| (a + s * b).powi(2)).sum();
            profile.eval(y.sqrt())
        },
        n,
        h,
        levels,
    )
}

fn random_vector(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

fn scaled_to(v: Vec<f64>, len: f64) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a * len / n).collect()
}

fn radial_case(idx: usize, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let d = 2 + idx % 5;
    let len = rng.random_range(0.3..2.0);
    let x = scaled_to(random_vector(d, rng), len);
    let xi = scaled_to(random_vector(d, rng), 1.0);
    let (src, degree) = RADIAL_POLY[idx % RADIAL_POLY.len()];
    rec.context(src, d, format!("x = {x:?}"), format!("xi = {xi:?}"));
    let profile = RadialProfile::new(&parse(src)?, &Params::new())?;
    for n in 1..=3 {
        if n > degree {
            // Identically zero: a relative comparison with FD noise is meaningless.
            rec.compare("radial_zero", n, radial_dirderiv(&profile, &x, &xi, n), Ok(0.0), Metric::Absolute, 1e-12);
            continue;
        }
        rec.compare(
            "radial_fd",
            n,
            radial_dirderiv(&profile, &x, &xi, n),
            radial_fd(&profile, &x, &xi, n, 2),
            Metric::Relative,
            1e-6,
        );
    }
    let q = random_orthogonal(d, rng);
    let rotate = |v: &[f64]| -> Vec<f64> { (0..d).map(|i| (0..d).map(|k| q[(i, k)] * v[k]).sum()).collect() };
    for n in 1..=3 {
        rec.compare(
            "radial_rotation",
            n,
            radial_dirderiv(&profile, &rotate(&x), &rotate(&xi), n),
            radial_dirderiv(&profile, &x, &xi, n),
            Metric::Relative,
            1e-10,
        );
    }

    rec.f = "r[1]^2".into();
    let square = RadialProfile::new(&parse("r[1]^2")?, &Params::new())?;
    let q2: f64 = xi.iter().map(|v| v * v).sum();
    rec.compare("radial_square", 2, radial_dirderiv(&square, &x, &xi, 2), Ok(2.0 * q2), Metric::Absolute, 1e-12);

    let analytic = RADIAL_ANALYTIC[idx % RADIAL_ANALYTIC.len()];
    rec.f = analytic.into();
    let profile = RadialProfile::new(&parse(analytic)?, &Params::new())?;
    for n in 1..=3 {
        rec.compare(
            "radial_fd_analytic",
            n,
            radial_dirderiv(&profile, &x, &xi, n),
            radial_fd(&profile, &x, &xi, n, 2),
            Metric::Scaled,
            1e-6,
        );
    }

    // Cross-check with the matrix engine: |X|_F^2 = psum(2) on any symmetric X.
    let m = 2 + idx % 2;
    let diag: Vec<f64> = (0..m).map(|_| rng.random_range(-1.5..1.5)).collect();
    let xm = SymMatrix::from_diag(&diag);
    let xim = rand_direction_with(m, rng);
    let flat = |a: &SymMatrix| a.as_matrix().as_slice().to_vec();
    for (rad, mat) in [("r[1]^4", "psum(2)*psum(2)"), ("r[1]^2", "psum(2)")] {
        rec.context(rad, m * m, format!("diag{diag:?}"), describe_dir(&xim));
        let profile = RadialProfile::new(&parse(rad)?, &Params::new())?;
        let f = spectral(mat, m)?;
        for n in 1..=3 {
            rec.compare(
                "radial_matrix",
                n,
                radial_dirderiv(&profile, &flat(&xm), &flat(&xim), n),
                f.dirderiv(&xm, &xim, n).map(|v| v.value),
                Metric::Scaled,
                1e-9,
            );
        }
    }
    Ok(())
}

fn esym_direct(r: &[f64], k: usize) -> f64 {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &v in r {
        for j in (1..=k).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e[k]
}

fn newton_case(idx: usize, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let d = 1 + idx % 6;
    let k = 1 + (idx / 6) % d;
    let r: Vec<f64> = {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.5)).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let q = random_orthogonal(d, rng);
    let x = with_eigenframe(&r, &q);
    rec.context(&format!("esym({k})"), d, describe_spectrum(&r), String::new());
    let poly = esym_to_psums(k, d)?;
    let lifted = lift_polynomial(&poly, &x, DEFAULT_DEGREE_CAP);
    let direct = spectral(&format!("esym({k})"), d)?.eval(&x);
    rec.compare("lift_esym", 0, lifted, direct, Metric::Relative, 1e-9);

    let q2 = random_orthogonal(d, rng);
    let x2 = crate::linalg::conjugate(&x, &q2)?;
    rec.compare(
        "lift_rotation",
        0,
        lift_polynomial(&poly, &x2, DEFAULT_DEGREE_CAP),
        lift_polynomial(&poly, &x, DEFAULT_DEGREE_CAP),
        Metric::Relative,
        1e-10,
    );

    // A random elementary-basis polynomial against its eigenvalue expression.
    let terms: Vec<SymTerm> = (0..2)
        .map(|_| SymTerm {
            coeff: rng.random_range(-2.0..2.0),
            exponents: (0..d).map(|_| rng.random_range(0..2)).collect(),
        })
        .collect();
    let mixed = SymPoly {
        basis: Basis::Elementary,
        terms,
    };
    rec.f = mixed.to_expr_source();
    rec.compare(
        "lift_elementary",
        0,
        lift_polynomial(&mixed, &x, DEFAULT_DEGREE_CAP),
        spectral(&mixed.to_expr_source(), d).and_then(|f| f.eval(&x)),
        Metric::Relative,
        1e-9,
    );

    rec.f = "power sums".into();
    let ps = power_sums(&x, d)?;
    let direct_ps = power_sums_of(&r, d);
    let worst = ps.p.iter().zip(&direct_ps.p).map(|(a, b)| rel_err(*a, *b)).fold(0.0, f64::max);
    rec.push("power_sums", 0, worst, 0.0, worst, Metric::Ratio, 1e-9);

    let rv = spectrum_with_gaps(d, 0.1, rng.random_range(-2.0..0.0), rng);
    rec.context("vandermonde", d, format!("r = {rv:?}"), String::new());
    let v = vandermonde_jacobian(&rv);
    rec.compare("vandermonde", 0, Ok(v.det), Ok(v.det_product), Metric::Relative, 1e-9);

    let rs = corpus_spectrum("", d, rng);
    let xs = with_eigenframe(&rs, &random_orthogonal(d, rng));
    rec.context("eigenvalues", d, describe_spectrum(&rs), "three seeded directions".into());
    let rows = dr_dx_rows_check(&xs, rng.random())?;
    rec.push("dr_dx_rows", 1, rows.residual, 0.0, rows.residual, Metric::Absolute, 1e-6);

    let d8 = 1 + idx % 8;
    let k8 = 1 + rng.random_range(0..d8);
    let r8: Vec<f64> = (0..d8).map(|_| rng.random_range(0.5..2.5)).collect();
    rec.context(&format!("esym({k8})"), d8, format!("r = {r8:?}"), String::new());
    let via_psums = esym_to_psums(k8, d8)?.eval(&power_sums_of(&r8, d8).p);
    rec.compare("esym_identity", 0, via_psums, Ok(esym_direct(&r8, k8)), Metric::Relative, 1e-9);
    Ok(())
}

fn decay_case(idx: usize, rng: &mut ChaCha8Rng, rec: &mut Recorder) -> Result<()> {
    let d = 2 + idx % 5;
    let x0 = rand_sym_with(d, rng);
    let xi = rand_direction_with(d, rng);
    rec.context("psum(4)", d, "t X0, X0 random symmetric".into(), describe_dir(&xi));
    let f = spectral("psum(4)", d)?;
    let ts: Vec<f64> = (0..=10).map(|k| 0.5f64.powi(k)).collect();
    let mut ratios = Vec::with_capacity(ts.len());
    for &t in &ts {
        ratios.push(f.dirderiv(&x0.scale(t), &xi, 3)?.value.abs() / t);
    }
    push_ratio(rec, "decay_ratio", 3, &ratios);

    let x = random_vector(d, rng);
    let v = scaled_to(random_vector(d, rng), 1.0);
    rec.context("r[1]^4", d, format!("t x0, x0 = {x:?}"), format!("xi = {v:?}"));
    let quartic = RadialProfile::new(&parse("r[1]^4")?, &Params::new())?;
    let mut radial = Vec::new();
    let mut bound = Vec::new();
    for &t in &ts {
        let xt: Vec<f64> = x.iter().map(|a| a * t).collect();
        radial.push(radial_dirderiv(&quartic, &xt, &v, 3)?.abs() / t);
        let (lhs, sup) = radial_bound_check(&quartic, &xt, &v, 3)?;
        bound.push(lhs / sup);
    }
    push_ratio(rec, "radial_decay", 3, &radial);
    push_ratio(rec, "radial_bound_ratio", 3, &bound);

    rec.f = "r[1]^6".into();
    let sextic = RadialProfile::new(&parse("r[1]^6")?, &Params::new())?;
    let mut sixth = Vec::new();
    for &t in &ts {
        let xt: Vec<f64> = x.iter().map(|a| a * t).collect();
        sixth.push(radial_dirderiv(&sextic, &xt, &v, 2)?.abs() / t.powi(4));
    }
    push_ratio(rec, "radial_decay_r6", 2, &sixth);
    Ok(())
}

/// `max / min` of a sweep of ratios, compared with 3.
fn push_ratio(rec: &mut Recorder, check: &str, n: usize, ratios: &[f64]) {
    let max = ratios.iter().copied().fold(f64::MIN, f64::max);
    let min = ratios.iter().copied().fold(f64::MAX, f64::min);
    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
    rec.push(check, n, max, min, spread, Metric::Ratio, 3.0);
}
