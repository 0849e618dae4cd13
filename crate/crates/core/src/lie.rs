//! Truncated tensor algebra and free Lie algebra on a finite alphabet.
//!
//! Letters are generator indices `0..num_generators`. A [`GradedTensor`]
//! stores one sparse map per degree, keyed by words; Lie elements are tensors
//! lying in the span of expanded Lyndon brackets.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Scalar, Unital};

pub type Word = Vec<u32>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LieError {
    #[error("tensors live over different bases: ({0} letters, degree {1}) vs ({2} letters, degree {3})")]
    BasisMismatch(usize, usize, usize, usize),
}

/// Degree-1 generator of the holonomy Lie algebra.
///
/// Variant order and field order give the canonical generator order:
/// pairs before points, then lexicographic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GeneratorSymbol {
    /// `X_{ij}(g)` with `i < j`, strands 1-based, `g` an element index.
    Pair { i: usize, j: usize, g: usize },
    /// `X_k(q)`, strand 1-based, `q` an exceptional-point index.
    Point { k: usize, q: usize },
}

impl GeneratorSymbol {
    /// `X_{ij}(g)` for any ordered pair of distinct strands, applying
    /// `X_{ji}(g) = X_{ij}(g⁻¹)` so that only `i < j` is produced.
    pub fn pair(i: usize, j: usize, g: usize, inverse: impl Fn(usize) -> usize) -> Self {
        assert_ne!(i, j, "pair generator needs distinct strands");
        if i < j {
            GeneratorSymbol::Pair { i, j, g }
        } else {
            GeneratorSymbol::Pair { i: j, j: i, g: inverse(g) }
        }
    }
}

impl fmt::Display for GeneratorSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSymbol::Pair { i, j, g } => write!(f, "X{i}{j}(g{g})"),
            GeneratorSymbol::Point { k, q } => write!(f, "X{k}(p{q})"),
        }
    }
}

/// Element of the tensor algebra truncated above `max_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedTensor<S> {
    num_generators: usize,
    max_degree: usize,
    parts: Vec<BTreeMap<Word, S>>,
}

impl<S: Scalar> GradedTensor<S> {
    pub fn zero(num_generators: usize, max_degree: usize) -> Self {
        GradedTensor {
            num_generators,
            max_degree,
            parts: vec![BTreeMap::new(); max_degree + 1],
        }
    }

    pub fn num_generators(&self) -> usize {
        self.num_generators
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn part(&self, degree: usize) -> &BTreeMap<Word, S> {
        &self.parts[degree]
    }

    pub fn parts(&self) -> &[BTreeMap<Word, S>] {
        &self.parts
    }

    pub fn coeff(&self, word: &[u32]) -> Option<&S> {
        self.parts.get(word.len())?.get(word)
    }

    pub fn is_zero(&self) -> bool {
        self.parts.iter().all(|p| p.is_empty())
    }

    /// Adds `value` to the coefficient of `word`; words above the truncation
    /// degree are dropped.
    pub fn add_term(&mut self, word: Word, value: S) {
        debug_assert!(word.iter().all(|&l| (l as usize) < self.num_generators));
        if word.len() > self.max_degree || value.is_zero() {
            return;
        }
        let part = &mut self.parts[word.len()];
        match part.get_mut(&word) {
            Some(e) => {
                let sum = e.add(&value);
                if sum.is_zero() {
                    part.remove(&word);
                } else {
                    *e = sum;
                }
            }
            None => {
                part.insert(word, value);
            }
        }
    }

    pub fn from_terms(
        num_generators: usize,
        max_degree: usize,
        terms: impl IntoIterator<Item = (Word, S)>,
    ) -> Self {
        let mut t = Self::zero(num_generators, max_degree);
        for (w, c) in terms {
            t.add_term(w, c);
        }
        t
    }

    fn check_basis(&self, other: &Self) -> Result<(), LieError> {
        if self.num_generators != other.num_generators || self.max_degree != other.max_degree {
            return Err(LieError::BasisMismatch(
                self.num_generators,
                self.max_degree,
                other.num_generators,
                other.max_degree,
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, LieError> {
        self.check_basis(other)?;
        let mut out = self.clone();
        for part in &other.parts {
            for (w, c) in part {
                out.add_term(w.clone(), c.clone());
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LieError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map(|c| c.neg())
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        self.map(|c| c.scale(q))
    }

    pub fn scale_by(&self, s: &S) -> Self {
        self.map(|c| c.mul(s))
    }

    pub fn map(&self, f: impl Fn(&S) -> S) -> Self {
        let parts = self
            .parts
            .iter()
            .map(|p| {
                p.iter()
                    .map(|(w, c)| (w.clone(), f(c)))
                    .filter(|(_, c)| !c.is_zero())
                    .collect()
            })
            .collect();
        GradedTensor {
            num_generators: self.num_generators,
            max_degree: self.max_degree,
            parts,
        }
    }

    /// Concatenation product truncated at the common degree.
    pub fn tensor_mul(&self, other: &Self) -> Result<Self, LieError> {
        self.check_basis(other)?;
        let mut out = Self::zero(self.num_generators, self.max_degree);
        for (da, pa) in self.parts.iter().enumerate() {
            for (db, pb) in other.parts.iter().enumerate() {
                if da + db > self.max_degree {
                    break;
                }
                for (wa, ca) in pa {
                    for (wb, cb) in pb {
                        let mut w = Vec::with_capacity(da + db);
                        w.extend_from_slice(wa);
                        w.extend_from_slice(wb);
                        out.add_term(w, ca.mul(cb));
                    }
                }
            }
        }
        Ok(out)
    }

    /// `xy − yx`.
    pub fn bracket(&self, other: &Self) -> Result<Self, LieError> {
        self.tensor_mul(other)?.sub(&other.tensor_mul(self)?)
    }

    /// Only the degree-`degree` component.
    pub fn homogeneous(&self, degree: usize) -> Self {
        let mut out = Self::zero(self.num_generators, self.max_degree);
        if degree <= self.max_degree {
            out.parts[degree] = self.parts[degree].clone();
        }
        out
    }

    /// Same element viewed with a different truncation degree.
    pub fn truncate(&self, max_degree: usize) -> Self {
        let mut parts = self.parts.clone();
        parts.resize(max_degree + 1, BTreeMap::new());
        GradedTensor {
            num_generators: self.num_generators,
            max_degree,
            parts,
        }
    }

    /// Applies a letter substitution `a ↦ images[a]` (each image a degree-1
    /// linear combination) multiplicatively to every word.
    pub fn substitute(&self, images: &[Vec<(u32, BigRational)>], new_generators: usize) -> Self {
        let mut out = Self::zero(new_generators, self.max_degree);
        for part in &self.parts {
            for (w, c) in part {
                let mut partial: Vec<(Word, BigRational)> = vec![(Vec::new(), BigRational::from_integer(1.into()))];
                for &letter in w {
                    let mut next = Vec::new();
                    for (pw, pc) in &partial {
                        for (l, lc) in &images[letter as usize] {
                            let mut nw = pw.clone();
                            nw.push(*l);
                            next.push((nw, pc * lc));
                        }
                    }
                    partial = next;
                }
                for (nw, nc) in partial {
                    out.add_term(nw, c.scale(&nc));
                }
            }
        }
        out
    }
}

impl<S: Unital> GradedTensor<S> {
    pub fn one(num_generators: usize, max_degree: usize) -> Self {
        let mut t = Self::zero(num_generators, max_degree);
        t.add_term(Vec::new(), S::one());
        t
    }

    pub fn generator(num_generators: usize, max_degree: usize, letter: u32) -> Self {
        let mut t = Self::zero(num_generators, max_degree);
        t.add_term(vec![letter], S::one());
        t
    }

    pub fn constant_term(&self) -> S {
        self.parts[0].get(&Vec::new()).cloned().unwrap_or_else(S::zero)
    }

    /// `exp(x)` for `x` without constant term.
    pub fn exp(&self) -> Self {
        let x = self.without_constant();
        let mut term = Self::one(self.num_generators, self.max_degree);
        let mut sum = term.clone();
        for n in 1..=self.max_degree {
            term = term.tensor_mul(&x).expect("same basis").scale(&BigRational::new(1.into(), (n as i64).into()));
            sum = sum.add(&term).expect("same basis");
        }
        sum
    }

    /// `log(x)` for `x` with constant term 1.
    pub fn log(&self) -> Self {
        let y = self.without_constant();
        let mut power = y.clone();
        let mut sum = Self::zero(self.num_generators, self.max_degree);
        for n in 1..=self.max_degree {
            let sign = if n % 2 == 1 { 1 } else { -1 };
            sum = sum
                .add(&power.scale(&BigRational::new(sign.into(), (n as i64).into())))
                .expect("same basis");
            power = power.tensor_mul(&y).expect("same basis");
        }
        sum
    }

    /// Inverse of a series with constant term 1.
    pub fn inverse(&self) -> Self {
        let y = self.without_constant();
        let mut power = Self::one(self.num_generators, self.max_degree);
        let mut sum = power.clone();
        for _ in 1..=self.max_degree {
            power = power.tensor_mul(&y).expect("same basis").neg();
            sum = sum.add(&power).expect("same basis");
        }
        sum
    }

    fn without_constant(&self) -> Self {
        let mut x = self.clone();
        x.parts[0].clear();
        x
    }
}

/// Lyndon words of length exactly `degree` over `num_letters` letters, in
/// lexicographic order (Duval's generation algorithm).
pub fn lyndon_words(num_letters: usize, degree: usize) -> Vec<Word> {
    let mut out = Vec::new();
    if num_letters == 0 || degree == 0 {
        return out;
    }
    let top = num_letters as u32 - 1;
    let mut w: Word = vec![0];
    loop {
        if w.len() == degree {
            out.push(w.clone());
        }
        // extend periodically to length `degree`
        let m = w.len();
        while w.len() < degree {
            let c = w[w.len() - m];
            w.push(c);
        }
        while w.last() == Some(&top) {
            w.pop();
        }
        match w.last_mut() {
            Some(last) => *last += 1,
            None => break,
        }
    }
    out
}

/// Longest proper suffix of a Lyndon word that is itself Lyndon.
fn standard_split(w: &[u32]) -> usize {
    (1..w.len())
        .find(|&s| is_lyndon(&w[s..]))
        .expect("words of length ≥ 2 have a Lyndon suffix")
}

pub fn is_lyndon(w: &[u32]) -> bool {
    !w.is_empty() && (1..w.len()).all(|s| w[s..] > *w)
}

/// Bracketing of a Lyndon word by its standard factorization, as text over
/// the given letter names.
pub fn bracket_text(w: &[u32], names: &dyn Fn(u32) -> String) -> String {
    if w.len() == 1 {
        return names(w[0]);
    }
    let s = standard_split(w);
    format!("[{},{}]", bracket_text(&w[..s], names), bracket_text(&w[s..], names))
}

/// Expansion of the standard bracketing of a Lyndon word into words.
pub fn lyndon_expansion(w: &[u32]) -> BTreeMap<Word, i64> {
    if w.len() == 1 {
        return BTreeMap::from([(w.to_vec(), 1)]);
    }
    let s = standard_split(w);
    let left = lyndon_expansion(&w[..s]);
    let right = lyndon_expansion(&w[s..]);
    let mut out = BTreeMap::new();
    for (a, ca) in &left {
        for (b, cb) in &right {
            let mut ab = a.clone();
            ab.extend_from_slice(b);
            *out.entry(ab).or_insert(0) += ca * cb;
            let mut ba = b.clone();
            ba.extend_from_slice(a);
            *out.entry(ba).or_insert(0) -= ca * cb;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

/// Dimension of the degree-`degree` component of the free Lie algebra on
/// `num_letters` generators: `(1/k) Σ_{e | k} μ(e) d^{k/e}`.
pub fn witt_dim(num_letters: usize, degree: usize) -> u128 {
    assert!(degree >= 1);
    let d = num_letters as i128;
    let mut total: i128 = 0;
    for e in 1..=degree {
        if degree.is_multiple_of(e) {
            total += mobius_mu(e) as i128 * d.pow((degree / e) as u32);
        }
    }
    (total / degree as i128) as u128
}

pub fn mobius_mu(n: usize) -> i32 {
    let mut n = n;
    let mut result = 1;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

/// Lyndon basis of one degree of the free Lie algebra, with the bracket
/// expansions used for coordinate extraction.
#[derive(Debug, Clone)]
pub struct LyndonBasis {
    num_letters: usize,
    degree: usize,
    words: Vec<Word>,
    index: HashMap<Word, usize>,
    expansions: Vec<BTreeMap<Word, i64>>,
}

impl LyndonBasis {
    pub fn new(num_letters: usize, degree: usize) -> Self {
        let words = lyndon_words(num_letters, degree);
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let expansions = words.iter().map(|w| lyndon_expansion(w)).collect();
        LyndonBasis {
            num_letters,
            degree,
            words,
            index,
            expansions,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_letters(&self) -> usize {
        self.num_letters
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn index_of(&self, w: &[u32]) -> Option<usize> {
        self.index.get(w).copied()
    }

    pub fn expansion(&self, idx: usize) -> &BTreeMap<Word, i64> {
        &self.expansions[idx]
    }

    /// Expanded bracket of basis element `idx` as a tensor.
    pub fn element<S: Unital>(&self, idx: usize, max_degree: usize) -> GradedTensor<S> {
        GradedTensor::from_terms(
            self.num_letters,
            max_degree,
            self.expansions[idx]
                .iter()
                .map(|(w, &c)| (w.clone(), S::from_rational(&BigRational::from_integer(BigInt::from(c))))),
        )
    }

    /// Coordinates of a homogeneous Lie element in this basis.
    ///
    /// Uses triangularity: the expansion of the bracket of a Lyndon word `w`
    /// is `w` plus lexicographically larger words. Only coefficients on
    /// Lyndon words are read, so small non-Lie noise in numeric input is
    /// ignored rather than amplified.
    pub fn coordinates<S: Scalar>(&self, part: &BTreeMap<Word, S>) -> BTreeMap<usize, S> {
        let mut lyndon_vals: BTreeMap<usize, S> = part
            .iter()
            .filter_map(|(w, c)| self.index_of(w).map(|i| (i, c.clone())))
            .collect();
        let mut out = BTreeMap::new();
        while let Some((idx, c)) = lyndon_vals.pop_first() {
            if c.is_zero() {
                continue;
            }
            for (w, &e) in &self.expansions[idx] {
                if let Some(j) = self.index_of(w) {
                    if j == idx {
                        continue;
                    }
                    let delta = c.scale(&BigRational::from_integer(BigInt::from(-e)));
                    match lyndon_vals.get_mut(&j) {
                        Some(v) => *v = v.add(&delta),
                        None => {
                            lyndon_vals.insert(j, delta);
                        }
                    }
                }
            }
            out.insert(idx, c);
        }
        out
    }
}

/// Dynkin–Specht–Wever projection of a homogeneous component:
/// `a₁…a_k ↦ (1/k)[…[[a₁,a₂],a₃],…,a_k]`. Identity on Lie elements.
pub fn dynkin_projection<S: Unital>(x: &GradedTensor<S>) -> GradedTensor<S> {
    let n = x.num_generators();
    let d = x.max_degree();
    let mut out = GradedTensor::zero(n, d);
    for (k, part) in x.parts().iter().enumerate().skip(1) {
        let inv_k = BigRational::new(1.into(), (k as i64).into());
        for (w, c) in part {
            let mut acc: BTreeMap<Word, i64> = BTreeMap::from([(vec![w[0]], 1)]);
            for &letter in &w[1..] {
                let mut next = BTreeMap::new();
                for (u, cu) in &acc {
                    let mut ua = u.clone();
                    ua.push(letter);
                    *next.entry(ua).or_insert(0) += cu;
                    let mut au = vec![letter];
                    au.extend_from_slice(u);
                    *next.entry(au).or_insert(0) -= cu;
                }
                acc = next;
            }
            let scaled = c.scale(&inv_k);
            for (u, cu) in acc {
                if cu != 0 {
                    out.add_term(u, scaled.scale(&BigRational::from_integer(cu.into())));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type Q = BigRational;

    fn q(n: i64) -> Q {
        Q::from_integer(n.into())
    }

    fn gen(n: usize, d: usize, l: u32) -> GradedTensor<Q> {
        GradedTensor::generator(n, d, l)
    }

    #[test]
    fn product_of_one_plus_letters() {
        let one = GradedTensor::<Q>::one(2, 3);
        let a = one.add(&gen(2, 3, 0)).unwrap();
        let b = one.add(&gen(2, 3, 1)).unwrap();
        let p = a.tensor_mul(&b).unwrap();
        let expected = GradedTensor::from_terms(
            2,
            3,
            [(vec![], q(1)), (vec![0], q(1)), (vec![1], q(1)), (vec![0, 1], q(1))],
        );
        assert_eq!(p, expected);
        assert_eq!(a.tensor_mul(&one).unwrap(), a);
    }

    #[test]
    fn degree_two_products_span_everything() {
        let mut words = std::collections::BTreeSet::new();
        for i in 0..4 {
            for j in 0..4 {
                let p = gen(4, 2, i).tensor_mul(&gen(4, 2, j)).unwrap();
                words.extend(p.part(2).keys().cloned());
            }
        }
        assert_eq!(words.len(), 16);
    }

    #[test]
    fn basis_mismatch() {
        let a = gen(2, 3, 0);
        let b = gen(3, 3, 0);
        assert!(matches!(a.tensor_mul(&b), Err(LieError::BasisMismatch(..))));
        assert!(a.bracket(&gen(2, 2, 0)).is_err());
    }

    #[test]
    fn bracket_basics() {
        let a = gen(3, 3, 0);
        let b = gen(3, 3, 1);
        let c = gen(3, 3, 2);
        assert!(a.bracket(&a).unwrap().is_zero());
        let ab = a.bracket(&b).unwrap();
        assert_eq!(ab, GradedTensor::from_terms(3, 3, [(vec![0, 1], q(1)), (vec![1, 0], q(-1))]));
        let jacobi = a
            .bracket(&b.bracket(&c).unwrap())
            .unwrap()
            .add(&b.bracket(&c.bracket(&a).unwrap()).unwrap())
            .unwrap()
            .add(&c.bracket(&a.bracket(&b).unwrap()).unwrap())
            .unwrap();
        assert!(jacobi.is_zero());
    }

    #[test]
    fn lyndon_counts() {
        assert_eq!(lyndon_words(2, 2), vec![vec![0, 1]]);
        assert_eq!(lyndon_words(2, 3), vec![vec![0, 0, 1], vec![0, 1, 1]]);
        assert_eq!(lyndon_words(4, 3).len(), 20);
        for d in 1..6 {
            for k in 1..5 {
                assert_eq!(lyndon_words(d, k).len() as u128, witt_dim(d, k), "d={d} k={k}");
                assert!(lyndon_words(d, k).iter().all(|w| is_lyndon(w)));
            }
        }
    }

    #[test]
    fn witt_examples() {
        assert_eq!(witt_dim(2, 1), 2);
        assert_eq!(witt_dim(2, 2), 1);
        assert_eq!(witt_dim(6, 2), 15);
        assert_eq!(witt_dim(2, 3), 2);
        assert_eq!(witt_dim(4, 3), 20);
        // necklace count oracle: aperiodic necklaces by brute force
        for d in 1..4usize {
            for k in 1..6usize {
                let mut count = 0u128;
                let total = d.pow(k as u32);
                for code in 0..total {
                    let w: Vec<usize> = (0..k).map(|i| (code / d.pow(i as u32)) % d).collect();
                    let rotations: Vec<Vec<usize>> =
                        (0..k).map(|r| w[r..].iter().chain(&w[..r]).copied().collect()).collect();
                    let minimal = rotations.iter().all(|r| *r >= w);
                    let aperiodic = (1..k).all(|r| rotations[r] != w);
                    if minimal && aperiodic {
                        count += 1;
                    }
                }
                assert_eq!(count, witt_dim(d, k));
            }
        }
    }

    #[test]
    fn bracket_text_form() {
        let names = |l: u32| ["a", "b", "c"][l as usize].to_string();
        assert_eq!(bracket_text(&[0, 0, 1], &names), "[a,[a,b]]");
        assert_eq!(bracket_text(&[0, 1, 1], &names), "[[a,b],b]");
    }

    #[test]
    fn lyndon_brackets_independent() {
        for (d, k) in [(2, 4), (3, 3), (4, 2), (3, 4)] {
            let basis = LyndonBasis::new(d, k);
            let mut ech = crate::linalg::Echelon::new();
            let mut word_index: HashMap<Word, usize> = HashMap::new();
            for i in 0..basis.len() {
                let row: crate::linalg::RatRow = basis
                    .expansion(i)
                    .iter()
                    .map(|(w, &c)| {
                        let n = word_index.len();
                        (*word_index.entry(w.clone()).or_insert(n), q(c))
                    })
                    .collect();
                assert!(ech.insert_rational(&row));
            }
            assert_eq!(ech.rank() as u128, witt_dim(d, k));
        }
    }

    #[test]
    fn coordinates_recover_combination() {
        let basis = LyndonBasis::new(3, 3);
        let mut x = GradedTensor::<Q>::zero(3, 3);
        let picks = [(0usize, 2i64), (3, -1), (7, 5)];
        for &(i, c) in &picks {
            x = x.add(&basis.element::<Q>(i, 3).scale(&q(c))).unwrap();
        }
        let coords = basis.coordinates(x.part(3));
        let expected: BTreeMap<usize, Q> = picks.iter().map(|&(i, c)| (i, q(c))).collect();
        assert_eq!(coords, expected);
    }

    #[test]
    fn exp_log_inverse() {
        let x = gen(2, 4, 0).add(&gen(2, 4, 1).scale(&q(3))).unwrap();
        let e = x.exp();
        assert_eq!(e.log(), x);
        assert_eq!(e.tensor_mul(&e.inverse()).unwrap(), GradedTensor::one(2, 4));
    }

    #[test]
    fn dynkin_fixes_lie_elements() {
        let a = gen(3, 3, 0);
        let b = gen(3, 3, 1);
        let c = gen(3, 3, 2);
        let x = a
            .bracket(&b.bracket(&c).unwrap())
            .unwrap()
            .add(&a.bracket(&b).unwrap())
            .unwrap()
            .add(&c)
            .unwrap();
        assert_eq!(dynkin_projection(&x), x);
    }

    fn arb_tensor(n: usize, d: usize) -> impl Strategy<Value = GradedTensor<Q>> {
        prop::collection::vec((prop::collection::vec(0..n as u32, 0..=d), -5i64..=5), 0..8)
            .prop_map(move |terms| GradedTensor::from_terms(n, d, terms.into_iter().map(|(w, c)| (w, q(c)))))
    }

    fn arb_lie(n: usize, d: usize) -> impl Strategy<Value = GradedTensor<Q>> {
        prop::collection::vec((0..n as u32, -3i64..=3), 1..4).prop_map(move |terms| {
            GradedTensor::from_terms(n, d, terms.into_iter().map(|(l, c)| (vec![l], q(c))))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tensor_mul_associative(x in arb_tensor(3, 3), y in arb_tensor(3, 3), z in arb_tensor(3, 3)) {
            let l = x.tensor_mul(&y).unwrap().tensor_mul(&z).unwrap();
            let r = x.tensor_mul(&y.tensor_mul(&z).unwrap()).unwrap();
            prop_assert_eq!(l, r);
        }

        #[test]
        fn truncation_commutes(x in arb_tensor(2, 4), y in arb_tensor(2, 4)) {
            let full = x.tensor_mul(&y).unwrap().truncate(3);
            let parts = x.truncate(3).tensor_mul(&y.truncate(3)).unwrap();
            // truncate(3) keeps parts; compare only degrees ≤ 3
            let cut = |t: &GradedTensor<Q>| (0..=3).map(|k| t.part(k).clone()).collect::<Vec<_>>();
            prop_assert_eq!(cut(&full), cut(&parts));
        }

        #[test]
        fn bracket_is_lie(x in arb_lie(3, 3), y in arb_lie(3, 3), z in arb_lie(3, 3)) {
            let xy = x.bracket(&y).unwrap();
            prop_assert_eq!(xy.clone(), y.bracket(&x).unwrap().neg());
            let jac = x.bracket(&y.bracket(&z).unwrap()).unwrap()
                .add(&y.bracket(&z.bracket(&x).unwrap()).unwrap()).unwrap()
                .add(&z.bracket(&x.bracket(&y).unwrap()).unwrap()).unwrap();
            prop_assert!(jac.is_zero());
            let bilinear = x.add(&z).unwrap().bracket(&y).unwrap();
            prop_assert_eq!(bilinear, xy.add(&z.bracket(&y).unwrap()).unwrap());
        }
    }
}
