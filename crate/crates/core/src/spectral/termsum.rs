//! Symbolic intermediates of the operator power `(L_xi D)^n f`.
//!
//! A [`TermSum`] is a finite linear combination of
//!
//! ```text
//! coeff * Phi(r) * Tr(pi_{a1} xi pi_{a2} xi ... pi_{am} xi) * ...
//! ```
//!
//! where the trace monomial is a multiset of cyclic [`Word`]s and the scalar
//! factor `Phi` is a partial `d^alpha f` evaluated along a chain of
//! midpoint paths,
//!
//! ```text
//! Phi(r) = int_{[0,1]^m} prod_s t_s^{p_s} (d^alpha f)(P_1(t_1) ... P_m(t_m) r) dt,
//! ```
//!
//! with `P_s(t)` acting on coordinates `i_s, j_s` only:
//! `r_i -> t r_i + (1 - t)(r_i + r_j)/2`, `r_j -> t r_j + (1 - t)(r_i + r_j)/2`.
//!
//! Both `D` (the gradient in `r`) and `L_xi` map such sums to such sums, so the
//! whole operator power is built symbolically and only evaluated at the end.

use std::collections::BTreeMap;
use std::fmt;

use crate::dsl::MultiIndex;
use crate::error::{Error, Result};

/// One midpoint-path level: the pair `(i, j)` (0-based, `i < j`) and the
/// power of its integration variable in the weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segment {
    pub i: u8,
    pub j: u8,
    pub t_pow: u8,
}

/// Scalar factor `Phi` described in the module docs. `path[0]` is the
/// outermost map (applied last to `r`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Factor {
    pub alpha: MultiIndex,
    pub path: Vec<Segment>,
}

impl Factor {
    pub fn base(d: usize) -> Self {
        Factor {
            alpha: MultiIndex::zero(d),
            path: Vec::new(),
        }
    }

    /// `d Phi / d r_k` as a combination of factors.
    ///
    /// By the chain rule through `M(t) = P_1(t_1) ... P_m(t_m)`,
    /// `d_k Phi = sum_l M_{lk} (d^{alpha + e_l} f)(M r)`; each entry of a
    /// `P_s` block is `(1 +- t_s)/2`, which splits into a `t_s^0` and a
    /// `t_s^1` part.
    pub fn derivative(&self, k: usize) -> Vec<(f64, Factor)> {
        let mut out = Vec::new();
        let pows: Vec<u8> = self.path.iter().map(|s| s.t_pow).collect();
        self.walk(self.path.len(), k, 1.0, pows, &mut out);
        out
    }

    fn walk(&self, level: usize, c: usize, coef: f64, pows: Vec<u8>, out: &mut Vec<(f64, Factor)>) {
        if level == 0 {
            let path = self
                .path
                .iter()
                .zip(&pows)
                .map(|(s, &t_pow)| Segment { t_pow, ..*s })
                .collect();
            out.push((
                coef,
                Factor {
                    alpha: self.alpha.bump(c),
                    path,
                },
            ));
            return;
        }
        let seg = self.path[level - 1];
        let (i, j) = (seg.i as usize, seg.j as usize);
        if c != i && c != j {
            self.walk(level - 1, c, coef, pows, out);
            return;
        }
        let other = if c == i { j } else { i };
        let mut bumped = pows.clone();
        bumped[level - 1] += 1;
        // Diagonal entry (1 + t)/2.
        self.walk(level - 1, c, 0.5 * coef, pows.clone(), out);
        self.walk(level - 1, c, 0.5 * coef, bumped.clone(), out);
        // Off-diagonal entry (1 - t)/2.
        self.walk(level - 1, other, 0.5 * coef, pows, out);
        self.walk(level - 1, other, -0.5 * coef, bumped, out);
    }

    /// Wraps the factor in one more midpoint integral over the pair `(i, j)`.
    pub fn with_segment(&self, i: usize, j: usize) -> Factor {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let mut path = self.path.clone();
        path.push(Segment {
            i: i as u8,
            j: j as u8,
            t_pow: 0,
        });
        Factor {
            alpha: self.alpha.clone(),
            path,
        }
    }
}

/// Cyclic word `(a1, ..., am)` standing for `Tr(pi_{a1} xi pi_{a2} xi ... pi_{am} xi)`.
///
/// Stored as the lexicographically smallest rotation of the word or of its
/// reversal; reversal does not change the trace because every factor is symmetric.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(letters: Vec<u8>) -> Word {
        Word(canonical_rotation(letters))
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn canonical_rotation(letters: Vec<u8>) -> Vec<u8> {
    let m = letters.len();
    if m <= 1 {
        return letters;
    }
    let mut reversed = letters.clone();
    reversed.reverse();
    let mut best = letters.clone();
    for seq in [&letters, &reversed] {
        for shift in 0..m {
            let candidate: Vec<u8> = seq[shift..].iter().chain(&seq[..shift]).copied().collect();
            if candidate < best {
                best = candidate;
            }
        }
    }
    best
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| (a + 1).to_string()).collect();
        write!(f, "({})", parts.join(" "))
    }
}

/// Product of cyclic words, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<Word>);

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(Vec::new())
    }

    pub fn from_words(mut words: Vec<Word>) -> Monomial {
        words.sort();
        Monomial(words)
    }

    pub fn words(&self) -> &[Word] {
        &self.0
    }

    /// Total number of letters, i.e. the number of `xi` factors.
    pub fn letters(&self) -> usize {
        self.0.iter().map(Word::len).sum()
    }

    pub fn times(&self, word: Word) -> Monomial {
        let mut words = self.0.clone();
        words.push(word);
        Monomial::from_words(words)
    }

    /// The flag field `delta_{ij xi}` applied to the monomial by the product
    /// rule: each occurrence of `pi_i` becomes `pi_i xi pi_j + pi_j xi pi_i`
    /// and each occurrence of `pi_j` its negative.
    pub fn delta_pair(&self, i: usize, j: usize) -> Vec<(f64, Monomial)> {
        let (i, j) = (i as u8, j as u8);
        let mut out = Vec::new();
        for (w_idx, word) in self.0.iter().enumerate() {
            for (p, &a) in word.0.iter().enumerate() {
                let sign = if a == i {
                    1.0
                } else if a == j {
                    -1.0
                } else {
                    continue;
                };
                for (first, second) in [(i, j), (j, i)] {
                    let mut letters = Vec::with_capacity(word.len() + 1);
                    letters.extend_from_slice(&word.0[..p]);
                    letters.push(first);
                    letters.push(second);
                    letters.extend_from_slice(&word.0[p + 1..]);
                    let mut words = self.0.clone();
                    words[w_idx] = Word::new(letters);
                    out.push((sign, Monomial::from_words(words)));
                }
            }
        }
        out
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self.0.iter().map(|w| format!("Tr{w}")).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Linear combination of `(factor, monomial)` pairs with merged coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct TermSum {
    dim: usize,
    terms: BTreeMap<(Factor, Monomial), f64>,
}

impl TermSum {
    pub fn zero(dim: usize) -> Self {
        TermSum {
            dim,
            terms: BTreeMap::new(),
        }
    }

    /// The function `f` itself: one term, no path, empty monomial.
    pub fn base(dim: usize) -> Self {
        let mut ts = TermSum::zero(dim);
        ts.add(Factor::base(dim), Monomial::one(), 1.0);
        ts
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&mut self, factor: Factor, mono: Monomial, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let key = (factor, mono);
        let entry = self.terms.entry(key.clone()).or_insert(0.0);
        *entry += coeff;
        // Coefficients are dyadic rationals, so cancellation is exact.
        if *entry == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Factor, &Monomial, f64)> {
        self.terms.iter().map(|((f, m), &c)| (f, m, c))
    }

    pub fn max_letters(&self) -> usize {
        self.terms.keys().map(|(_, m)| m.letters()).max().unwrap_or(0)
    }

    pub fn max_order(&self) -> usize {
        self.terms.keys().map(|(f, _)| f.alpha.order()).max().unwrap_or(0)
    }

    /// `delta_{ij xi}` applied term by term; factors are untouched.
    pub fn delta_pair(&self, i: usize, j: usize) -> TermSum {
        let mut out = TermSum::zero(self.dim);
        for (factor, mono, c) in self.terms() {
            for (s, m) in mono.delta_pair(i, j) {
                out.add(factor.clone(), m, s * c);
            }
        }
        out
    }
}

impl fmt::Display for TermSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (factor, mono, c) in self.terms() {
            let path: Vec<String> = factor
                .path
                .iter()
                .map(|s| format!("<{},{};t^{}>", s.i + 1, s.j + 1, s.t_pow))
                .collect();
            writeln!(f, "{c:+} * d^{}f{} * {mono}", factor.alpha, path.join(""))?;
        }
        Ok(())
    }
}

/// The gradient in `r`: component `k` differentiates every factor in `r_k`.
pub fn apply_d(ts: &TermSum) -> Vec<TermSum> {
    let d = ts.dim;
    (0..d)
        .map(|k| {
            let mut out = TermSum::zero(d);
            for (factor, mono, c) in ts.terms() {
                for (s, df) in factor.derivative(k) {
                    out.add(df, mono.clone(), s * c);
                }
            }
            out
        })
        .collect()
}

/// Caps applied while building operator powers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TermCaps {
    pub max_order: usize,
    pub max_letters: usize,
}

impl TermCaps {
    pub fn for_order(max_order: usize) -> Self {
        TermCaps {
            max_order,
            max_letters: 2 * max_order + 2,
        }
    }
}

fn check_caps(ts: &TermSum, caps: TermCaps) -> Result<()> {
    let order = ts.max_order();
    if order > caps.max_order {
        return Err(Error::OrderCap {
            order,
            cap: caps.max_order,
        });
    }
    let letters = ts.max_letters();
    if letters > caps.max_letters {
        return Err(Error::Internal(format!(
            "trace monomial of length {letters} exceeds cap {}",
            caps.max_letters
        )));
    }
    Ok(())
}

/// The first-order part of `L_xi`: `sum_k g_k * Tr(pi_k xi)`.
pub fn apply_l_diagonal(tsv: &[TermSum]) -> TermSum {
    let d = tsv.len();
    let mut out = TermSum::zero(d);
    for (k, g) in tsv.iter().enumerate() {
        let word = Word::new(vec![k as u8]);
        for (factor, mono, c) in g.terms() {
            out.add(factor.clone(), mono.times(word.clone()), c);
        }
    }
    out
}

/// Midpoint-integral pair term of `L_xi` for one pair `i < j`:
/// `(1/2) int_0^1 delta_{ij xi}(g_i - g_j)(r(t), pi) dt`.
pub fn apply_l_pair(tsv: &[TermSum], i: usize, j: usize) -> TermSum {
    let d = tsv.len();
    let mut out = TermSum::zero(d);
    for (source, sign) in [(i, 1.0), (j, -1.0)] {
        for (factor, mono, c) in tsv[source].terms() {
            let wrapped = factor.with_segment(i, j);
            for (s, m) in mono.delta_pair(i, j) {
                out.add(wrapped.clone(), m, 0.5 * sign * s * c);
            }
        }
    }
    out
}

/// `L_xi` on a `d`-vector of term sums, entirely in midpoint-integral form:
///
/// `L(g) = sum_i g_i <pi_i, xi> + (1/4) sum_{i != j} int_0^1 delta_{ij xi}(g_i - g_j)(r(t), pi) dt`.
///
/// The ordered pair sum is folded to `i < j` (the summand is symmetric under
/// swapping `i` and `j`), which turns the `1/4` into `1/2`.
pub fn apply_l(tsv: &[TermSum], caps: TermCaps) -> Result<TermSum> {
    let d = tsv.len();
    let mut out = apply_l_diagonal(tsv);
    for i in 0..d {
        for j in (i + 1)..d {
            for (factor, mono, c) in apply_l_pair(tsv, i, j).terms() {
                out.add(factor.clone(), mono.clone(), c);
            }
        }
    }
    check_caps(&out, caps)?;
    Ok(out)
}

/// `(L_xi D)^n f` in midpoint-integral form.
pub fn operator_power(d: usize, n: usize, caps: TermCaps) -> Result<TermSum> {
    if n > caps.max_order {
        return Err(Error::OrderCap {
            order: n,
            cap: caps.max_order,
        });
    }
    let mut ts = TermSum::base(d);
    for _ in 0..n {
        ts = apply_l(&apply_d(&ts), caps)?;
    }
    Ok(ts)
}
