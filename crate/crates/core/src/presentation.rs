//! Presentations of the holonomy Lie algebra and their graded quotients.
//!
//! Two presentations are generated from `(n, G)`: the defining one (`p_n`,
//! relations indexed over all distinct strands) and the variant `t_n` whose
//! quadratic relations are restricted to increasing strand indices. Both use
//! the same generator symbols `X_{ij}(g)` (`i < j`) and `X_k(q)`.
//!
//! Relation (4) of the defining presentation groups two equalities in one
//! display; both `[X_{ij}(g), X_{kj}(g'g) + X_{ki}(g')]` and
//! `[X_i(p), X_{jk}(g')]` are emitted under family 4.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lie::{bracket_text, witt_dim, GeneratorSymbol, GradedTensor, LyndonBasis, Word};
use crate::linalg::{Echelon, IntRow, RatRow, ReducedEchelon};
use crate::moebius::FiniteGroupData;


#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PresentationError {
    #[error("tensor has {0} generators but the presentation has {1}")]
    BasisMismatch(usize, usize),
    #[error("degree {0} is not supported here (D ≤ 4, and D = 4 only for n = 2 and |G| ≤ 6)")]
    DegreeUnsupported(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// The defining presentation.
    P,
    /// The increasing-index presentation.
    T,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::P => write!(f, "p_n"),
            Variant::T => write!(f, "t_n"),
        }
    }
}

/// A quadratic relation: a degree-2 Lie element in the generator letters.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRelation {
    pub family: u8,
    pub tensor: BTreeMap<Word, BigRational>,
}

#[derive(Debug, Clone)]
pub struct PresentationData {
    n: usize,
    group_order: usize,
    variant: Variant,
    generators: Vec<GeneratorSymbol>,
    index: HashMap<GeneratorSymbol, usize>,
    linear_family: u8,
    linear: Vec<RatRow>,
    quadratic: Vec<QuadRelation>,
    identified: usize,
}

type Combo = Vec<(usize, i64)>;

/// `[Σ aₓ x, Σ b_y y]` expanded into words.
fn bracket_combo(left: &Combo, right: &Combo) -> BTreeMap<Word, BigRational> {
    let mut acc: BTreeMap<Word, i64> = BTreeMap::new();
    for &(x, a) in left {
        for &(y, b) in right {
            *acc.entry(vec![x as u32, y as u32]).or_insert(0) += a * b;
            *acc.entry(vec![y as u32, x as u32]).or_insert(0) -= a * b;
        }
    }
    acc.into_iter()
        .filter(|(_, c)| *c != 0)
        .map(|(w, c)| (w, BigRational::from_integer(c.into())))
        .collect()
}

fn ordered_tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    // distinct strands, 1-based, all orders
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t: Vec<usize>| {
                (1..=n)
                    .filter(|s| !t.contains(s))
                    .map(|s| {
                        let mut u = t.clone();
                        u.push(s);
                        u
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    out
}

fn increasing_tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    ordered_tuples(n, len)
        .into_iter()
        .filter(|t| t.windows(2).all(|w| w[0] < w[1]))
        .collect()
}

/// Builds the relation lists of the chosen presentation.
pub fn make_presentation(n: usize, group: &FiniteGroupData, variant: Variant) -> PresentationData {
    assert!(n >= 1, "at least one strand");
    let order = group.order();
    let num_points = group.num_exceptional();
    let mut generators = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            for g in 0..order {
                generators.push(GeneratorSymbol::Pair { i, j, g });
            }
        }
    }
    for k in 1..=n {
        for q in 0..num_points {
            generators.push(GeneratorSymbol::Point { k, q });
        }
    }
    generators.sort();
    let index: HashMap<GeneratorSymbol, usize> =
        generators.iter().enumerate().map(|(i, s)| (*s, i)).collect();

    let pair = |i: usize, j: usize, g: usize| index[&GeneratorSymbol::pair(i, j, g, |h| group.inv(h))];
    let point = |k: usize, q: usize| index[&GeneratorSymbol::Point { k, q }];
    let stab_sum = |i: usize, j: usize, g: usize, p: usize| -> Combo {
        group.stabilizer(p).iter().map(|&h| (pair(i, j, group.mul(g, h)), 1)).collect()
    };
    let elements = 0..order;
    let points = 0..num_points;

    let mut linear = Vec::new();
    for i in 1..=n {
        let mut row: RatRow = BTreeMap::new();
        let mut add = |c: usize| {
            *row.entry(c).or_insert_with(BigRational::zero) += BigRational::one();
        };
        for q in points.clone() {
            add(point(i, q));
        }
        for m in (1..=n).filter(|&m| m != i) {
            for g in elements.clone() {
                // Σ_g X_{im}(g) and Σ_g X_{mi}(g) agree as sets
                add(pair(i, m, g));
            }
        }
        linear.push(row);
    }

    let mut quadratic = Vec::new();
    let mut push = |family: u8, left: Combo, right: Combo| {
        quadratic.push(QuadRelation {
            family,
            tensor: bracket_combo(&left, &right),
        });
    };

    match variant {
        Variant::P => {
            for t in ordered_tuples(n, 4) {
                let (i, j, k, l) = (t[0], t[1], t[2], t[3]);
                for g in elements.clone() {
                    for g2 in elements.clone() {
                        push(3, vec![(pair(i, j, g), 1)], vec![(pair(k, l, g2), 1)]);
                    }
                }
            }
            for t in ordered_tuples(n, 3) {
                let (i, j, k) = (t[0], t[1], t[2]);
                for g in elements.clone() {
                    for g2 in elements.clone() {
                        push(
                            4,
                            vec![(pair(i, j, g), 1)],
                            vec![(pair(k, j, group.mul(g2, g)), 1), (pair(k, i, g2), 1)],
                        );
                    }
                }
                for p in points.clone() {
                    for g2 in elements.clone() {
                        push(4, vec![(point(i, p), 1)], vec![(pair(j, k, g2), 1)]);
                    }
                }
            }
            for t in ordered_tuples(n, 2) {
                let (i, j) = (t[0], t[1]);
                for p in points.clone() {
                    for q in points.clone().filter(|&q| group.orbit_of(q) != group.orbit_of(p)) {
                        push(5, vec![(point(i, p), 1)], vec![(point(j, q), 1)]);
                    }
                }
                for g in elements.clone() {
                    for p in points.clone() {
                        let mut right = vec![(point(j, p), 1), (point(i, group.act(g, p)), 1)];
                        right.extend(stab_sum(i, j, g, p));
                        push(6, vec![(pair(i, j, g), 1)], right);
                    }
                }
                for g in elements.clone() {
                    for p in points.clone() {
                        let mut right = vec![(point(i, group.act(g, p)), 1)];
                        right.extend(stab_sum(i, j, g, p));
                        push(7, vec![(point(j, p), 1)], right);
                    }
                }
            }
        }
        Variant::T => {
            let up = |i: usize, j: usize, g: usize| index[&GeneratorSymbol::Pair { i, j, g }];
            for t in increasing_tuples(n, 4) {
                let (i, j, k, l) = (t[0], t[1], t[2], t[3]);
                for g in elements.clone() {
                    for h in elements.clone() {
                        push(2, vec![(up(i, j, g), 1)], vec![(up(k, l, h), 1)]);
                        push(2, vec![(up(i, l, g), 1)], vec![(up(j, k, h), 1)]);
                        push(2, vec![(up(i, k, g), 1)], vec![(up(j, l, h), 1)]);
                    }
                }
            }
            for t in increasing_tuples(n, 3) {
                let (i, j, k) = (t[0], t[1], t[2]);
                for g in elements.clone() {
                    for h in elements.clone() {
                        let gh = group.mul(g, h);
                        push(3, vec![(up(i, j, g), 1)], vec![(up(i, k, gh), 1), (up(j, k, h), 1)]);
                        push(3, vec![(up(j, k, h), 1)], vec![(up(i, j, g), 1), (up(i, k, gh), 1)]);
                        push(3, vec![(up(i, k, gh), 1)], vec![(up(j, k, h), 1), (up(i, j, g), 1)]);
                    }
                }
                for p in points.clone() {
                    for g in elements.clone() {
                        push(3, vec![(point(i, p), 1)], vec![(up(j, k, g), 1)]);
                        push(3, vec![(point(j, p), 1)], vec![(up(i, k, g), 1)]);
                        push(3, vec![(point(k, p), 1)], vec![(up(i, j, g), 1)]);
                    }
                }
            }
            for t in increasing_tuples(n, 2) {
                let (i, j) = (t[0], t[1]);
                for p in points.clone() {
                    for q in points.clone().filter(|&q| group.orbit_of(q) != group.orbit_of(p)) {
                        push(5, vec![(point(i, p), 1)], vec![(point(j, q), 1)]);
                    }
                }
                for g in elements.clone() {
                    for p in points.clone() {
                        let mut right = vec![(point(j, p), 1), (point(i, group.act(g, p)), 1)];
                        right.extend(stab_sum(i, j, g, p));
                        push(6, vec![(up(i, j, g), 1)], right);
                    }
                }
                for g in elements.clone() {
                    for p in points.clone() {
                        let mut right = vec![(point(i, group.act(g, p)), 1)];
                        right.extend(stab_sum(i, j, g, p));
                        push(7, vec![(point(j, p), 1)], right);
                    }
                }
            }
        }
    }

    PresentationData {
        n,
        group_order: order,
        variant,
        generators,
        index,
        linear_family: match variant {
            Variant::P => 2,
            Variant::T => 1,
        },
        linear,
        quadratic,
        identified: match variant {
            Variant::P => n * (n - 1) / 2 * order,
            Variant::T => 0,
        },
    }
}

impl PresentationData {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn generators(&self) -> &[GeneratorSymbol] {
        &self.generators
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn generator_index(&self, s: &GeneratorSymbol) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn linear_relations(&self) -> &[RatRow] {
        &self.linear
    }

    pub fn quadratic_relations(&self) -> &[QuadRelation] {
        &self.quadratic
    }

    /// Number of emitted relations per family; for the defining
    /// presentation family 1 counts the identifications `X_{ji}(g) = X_{ij}(g⁻¹)`.
    pub fn family_counts(&self) -> BTreeMap<u8, usize> {
        let mut counts = BTreeMap::new();
        if self.variant == Variant::P {
            counts.insert(1, self.identified);
        }
        counts.insert(self.linear_family, self.linear.len());
        for r in &self.quadratic {
            *counts.entry(r.family).or_insert(0) += 1;
        }
        counts
    }

    /// Copy with one relation family removed (for negative controls).
    pub fn without_family(&self, family: u8) -> Self {
        let mut out = self.clone();
        if family == self.linear_family {
            out.linear.clear();
        }
        out.quadratic.retain(|r| r.family != family);
        out
    }

    /// Copy without quadratic relation `idx` and every relation proportional
    /// to it.
    pub fn without_relation(&self, idx: usize) -> Self {
        let target = &self.quadratic[idx].tensor;
        let mut out = self.clone();
        let Some((w0, c0)) = target.iter().next() else {
            out.quadratic.remove(idx);
            return out;
        };
        out.quadratic.retain(|r| {
            let Some(c) = r.tensor.get(w0) else { return true };
            let ratio = c / c0;
            !(r.tensor.len() == target.len()
                && target.iter().all(|(w, v)| r.tensor.get(w) == Some(&(v * &ratio))))
        });
        out
    }

    /// Copy with both relation lists in a seeded random order.
    pub fn shuffled(&self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        out.linear.shuffle(&mut rng);
        out.quadratic.shuffle(&mut rng);
        out
    }

    pub fn generator_name(&self, letter: usize) -> String {
        self.generators[letter].to_string()
    }

    fn check_degree(&self, max_degree: usize) -> Result<(), PresentationError> {
        let ok = (1..=3).contains(&max_degree) || (max_degree == 4 && self.n == 2 && self.group_order <= 6);
        if ok {
            Ok(())
        } else {
            Err(PresentationError::DegreeUnsupported(max_degree))
        }
    }
}

/// Big-endian index of a word over `d` letters.
fn word_index(w: &[u32], d: usize) -> usize {
    w.iter().fold(0usize, |acc, &l| acc * d + l as usize)
}

fn index_word(mut idx: usize, d: usize, len: usize) -> Word {
    let mut w = vec![0u32; len];
    for t in (0..len).rev() {
        w[t] = (idx % d) as u32;
        idx /= d;
    }
    w
}

fn tensor_row(t: &BTreeMap<Word, BigRational>, d: usize) -> RatRow {
    t.iter().map(|(w, c)| (word_index(w, d), c.clone())).collect()
}

/// `[x, r]` for every letter `x`, on rows indexed by words of length `len`.
fn bracket_with_letters(rows: &[IntRow], d: usize, len: usize) -> Vec<IntRow> {
    let shift = d.pow(len as u32);
    rows.par_iter()
        .flat_map_iter(|r| {
            (0..d).map(move |x| {
                let mut out: IntRow = BTreeMap::new();
                for (&c, v) in r {
                    *out.entry(x * shift + c).or_insert_with(BigInt::zero) += v;
                    *out.entry(c * d + x).or_insert_with(BigInt::zero) -= v;
                }
                out.retain(|_, v| !v.is_zero());
                out
            })
        })
        .collect()
}

fn echelon_of(rows: impl IntoIterator<Item = IntRow>) -> Echelon {
    let mut e = Echelon::new();
    for r in rows {
        e.insert(r);
    }
    e
}

/// Echelon bases of the homogeneous ideal components `I_1, …, I_D` for a
/// letter set of size `d`, generated by `linear` (degree 1) and
/// `quadratic` (degree 2) relations.
fn ideal_components(d: usize, linear: &[RatRow], quadratic: &[RatRow], max_degree: usize) -> Vec<Echelon> {
    let mut comps = Vec::with_capacity(max_degree);
    let i1 = echelon_of(linear.iter().map(crate::linalg::primitive_part));
    comps.push(i1);
    if max_degree >= 2 {
        let mut rows: Vec<IntRow> = quadratic.iter().map(crate::linalg::primitive_part).collect();
        rows.extend(bracket_with_letters(comps[0].rows(), d, 1));
        comps.push(echelon_of(rows));
    }
    for k in 3..=max_degree {
        let rows = bracket_with_letters(comps[k - 2].rows(), d, k - 1);
        comps.push(echelon_of(rows));
    }
    comps
}

/// Quotient dimensions computed on the full generator set, with the linear
/// relations kept inside the ideal (no elimination).
pub fn full_dimensions(p: &PresentationData, max_degree: usize) -> Result<Vec<usize>, PresentationError> {
    p.check_degree(max_degree)?;
    let d = p.num_generators();
    let quad: Vec<RatRow> = p.quadratic.iter().map(|r| tensor_row(&r.tensor, d)).collect();
    let comps = ideal_components(d, &p.linear, &quad, max_degree);
    Ok(comps
        .iter()
        .enumerate()
        .map(|(k, e)| witt_dim(d, k + 1) as usize - e.rank())
        .collect())
}

/// Quotient data for one degree.
#[derive(Debug, Clone)]
pub struct DegreeQuotient {
    pub degree: usize,
    pub free_dim: usize,
    pub ideal_rank: usize,
    pub dim: usize,
    lyndon: LyndonBasis,
    reduced: ReducedEchelon,
    basis: Vec<usize>,
    position: HashMap<usize, usize>,
}

impl DegreeQuotient {
    /// Lyndon-word indices of the chosen quotient basis.
    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn basis_words(&self) -> Vec<&Word> {
        self.basis.iter().map(|&i| &self.lyndon.words()[i]).collect()
    }
}

/// Per-degree bases of the graded quotient, with the data needed to reduce
/// elements of the free Lie algebra on the original generators.
#[derive(Debug, Clone)]
pub struct QuotientBasis {
    max_degree: usize,
    generators: Vec<GeneratorSymbol>,
    letters: Vec<usize>,
    substitution: Vec<Vec<(u32, BigRational)>>,
    linear_rank: usize,
    degrees: Vec<DegreeQuotient>,
}

/// Graded quotient up to degree `max_degree`, after eliminating one
/// generator per linear relation (the lexicographically last Point
/// generator available).
pub fn graded_quotient(p: &PresentationData, max_degree: usize) -> Result<QuotientBasis, PresentationError> {
    p.check_degree(max_degree)?;
    let d = p.num_generators();

    // reversed column order makes the last generators preferred pivots
    let rev = |c: usize| d - 1 - c;
    let mut lin = Echelon::new();
    for row in &p.linear {
        lin.insert_rational(&row.iter().map(|(&c, v)| (rev(c), v.clone())).collect());
    }
    let linear_rank = lin.rank();
    let lin_red = lin.reduced();
    let letters: Vec<usize> = (0..d).filter(|&c| !lin_red.is_pivot(rev(c))).collect();
    let letter_of: HashMap<usize, u32> = letters.iter().enumerate().map(|(i, &c)| (c, i as u32)).collect();
    let substitution: Vec<Vec<(u32, BigRational)>> = (0..d)
        .map(|c| match lin_red.row(rev(c)) {
            None => vec![(letter_of[&c], BigRational::one())],
            Some(row) => row
                .iter()
                .filter(|(&k, _)| k != rev(c))
                .map(|(&k, v)| (letter_of[&rev(k)], -v))
                .collect(),
        })
        .collect();
    let dl = letters.len();

    let quad: Vec<RatRow> = p
        .quadratic
        .iter()
        .map(|r| {
            let t = GradedTensor::from_terms(d, 2, r.tensor.clone()).substitute(&substitution, dl);
            tensor_row(t.part(2), dl)
        })
        .collect();
    let comps = ideal_components(dl, &[], &quad, max_degree);

    let degrees = comps
        .iter()
        .enumerate()
        .map(|(k0, ech)| {
            let k = k0 + 1;
            let lyndon = LyndonBasis::new(dl, k);
            let mut lyn_ech = Echelon::new();
            for row in ech.rows() {
                let part: BTreeMap<Word, BigRational> = row
                    .iter()
                    .map(|(&c, v)| (index_word(c, dl, k), BigRational::from_integer(v.clone())))
                    .collect();
                lyn_ech.insert_rational(&lyndon.coordinates(&part));
            }
            debug_assert_eq!(lyn_ech.rank(), ech.rank());
            let reduced = lyn_ech.reduced();
            let basis: Vec<usize> = (0..lyndon.len()).filter(|&i| !reduced.is_pivot(i)).collect();
            let position = basis.iter().enumerate().map(|(pos, &i)| (i, pos)).collect();
            DegreeQuotient {
                degree: k,
                free_dim: lyndon.len(),
                ideal_rank: ech.rank(),
                dim: basis.len(),
                lyndon,
                reduced,
                basis,
                position,
            }
        })
        .collect();

    Ok(QuotientBasis {
        max_degree,
        generators: p.generators.clone(),
        letters,
        substitution,
        linear_rank,
        degrees,
    })
}

/// Reduced coordinates of one element, per degree `1..=D`.
pub type Coordinates<S> = Vec<BTreeMap<usize, S>>;

impl QuotientBasis {
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn dims(&self) -> Vec<usize> {
        self.degrees.iter().map(|q| q.dim).collect()
    }

    pub fn degree(&self, k: usize) -> &DegreeQuotient {
        &self.degrees[k - 1]
    }

    /// Rank of the linear relations.
    pub fn linear_rank(&self) -> usize {
        self.linear_rank
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    /// Original generator indices kept as free letters.
    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    /// Readable bracket form of basis element `pos` in degree `k`.
    pub fn basis_text(&self, k: usize, pos: usize) -> String {
        let q = &self.degrees[k - 1];
        let names = |l: u32| self.generators[self.letters[l as usize]].to_string();
        bracket_text(&q.lyndon.words()[q.basis[pos]], &names)
    }

    /// Coordinates of a Lie element (given on the original generators) in
    /// the quotient basis. Non-Lie parts are ignored.
    pub fn reduce<S: crate::scalar::Scalar>(&self, x: &GradedTensor<S>) -> Result<Coordinates<S>, PresentationError> {
        if x.num_generators() != self.generators.len() {
            return Err(PresentationError::BasisMismatch(x.num_generators(), self.generators.len()));
        }
        let top = x.max_degree().min(self.max_degree);
        let sub = x.truncate(top).substitute(&self.substitution, self.letters.len());
        Ok(self
            .degrees
            .iter()
            .map(|q| {
                if q.degree > top {
                    return BTreeMap::new();
                }
                let lyn = q.lyndon.coordinates(sub.part(q.degree));
                q.reduced
                    .reduce(&lyn)
                    .into_iter()
                    .map(|(i, v)| (q.position[&i], v))
                    .collect()
            })
            .collect())
    }

    /// Quotient coordinates of a single generator.
    pub fn reduce_generator(&self, g: usize) -> BTreeMap<usize, BigRational> {
        self.substitution[g]
            .iter()
            .map(|(l, v)| (*l as usize, v.clone()))
            .collect()
    }
}

/// Outcome of comparing two presentations on the same generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub dims_left: Vec<usize>,
    pub dims_right: Vec<usize>,
    pub left_in_right: bool,
    pub right_in_left: bool,
    /// Per degree: dimensions agree and the relation spans contain each
    /// other.
    pub per_degree: Vec<bool>,
}

impl EquivalenceReport {
    pub fn equivalent(&self) -> bool {
        self.per_degree.iter().all(|&b| b)
    }
}

/// Whether the degree-1 and degree-2 relations of `src` lie in the ideal of
/// `dst`.
fn relations_contained(src: &PresentationData, dst: &PresentationData) -> (bool, bool) {
    let d = dst.num_generators();
    let quad: Vec<RatRow> = dst.quadratic.iter().map(|r| tensor_row(&r.tensor, d)).collect();
    let comps = ideal_components(d, &dst.linear, &quad, 2);
    (
        src.linear.iter().all(|l| comps[0].contains(l)),
        src.quadratic
            .iter()
            .all(|r| comps[1].contains(&tensor_row(&r.tensor, d))),
    )
}

/// Checks that the identity map on generator symbols identifies the two
/// ideals and that the graded dimensions agree up to `max_degree`.
pub fn compare_presentations(
    left: &PresentationData,
    right: &PresentationData,
    max_degree: usize,
) -> Result<EquivalenceReport, PresentationError> {
    assert_eq!(left.generators, right.generators, "presentations must share generators");
    let dims_left = graded_quotient(left, max_degree)?.dims();
    let dims_right = graded_quotient(right, max_degree)?.dims();
    let (l1, l2) = relations_contained(left, right);
    let (r1, r2) = relations_contained(right, left);
    let per_degree = (0..max_degree)
        .map(|k| dims_left[k] == dims_right[k] && l1 && r1 && (k == 0 || (l2 && r2)))
        .collect();
    Ok(EquivalenceReport {
        dims_left,
        dims_right,
        left_in_right: l1 && l2,
        right_in_left: r1 && r2,
        per_degree,
    })
}

/// A symmetry acting on generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    /// Transposition of strands `s` and `s + 1`.
    Swap(usize),
    /// `g` placed in slot `slot`, identity elsewhere.
    Slot { slot: usize, g: usize },
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symmetry::Swap(s) => write!(f, "({} {})", s, s + 1),
            Symmetry::Slot { slot, g } => write!(f, "g{g} in slot {slot}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryVerdict {
    pub symmetry: String,
    pub degree1: bool,
    pub degree2: bool,
}

/// Image of each generator under a symmetry.
pub fn symmetry_images(p: &PresentationData, group: &FiniteGroupData, sym: &Symmetry) -> Vec<usize> {
    let inv = |h: usize| group.inv(h);
    p.generators
        .iter()
        .map(|s| {
            let image = match (*s, sym) {
                (GeneratorSymbol::Pair { i, j, g }, Symmetry::Swap(t)) => {
                    let sigma = |x: usize| if x == *t { t + 1 } else if x == t + 1 { *t } else { x };
                    GeneratorSymbol::pair(sigma(i), sigma(j), g, inv)
                }
                (GeneratorSymbol::Point { k, q }, Symmetry::Swap(t)) => {
                    let k = if k == *t { t + 1 } else if k == t + 1 { *t } else { k };
                    GeneratorSymbol::Point { k, q }
                }
                (GeneratorSymbol::Pair { i, j, g }, Symmetry::Slot { slot, g: x }) => {
                    let gi = if i == *slot { *x } else { 0 };
                    let gj = if j == *slot { *x } else { 0 };
                    GeneratorSymbol::Pair {
                        i,
                        j,
                        g: group.mul(group.mul(gi, g), group.inv(gj)),
                    }
                }
                (GeneratorSymbol::Point { k, q }, Symmetry::Slot { slot, g: x }) => GeneratorSymbol::Point {
                    k,
                    q: if k == *slot { group.act(*x, q) } else { q },
                },
            };
            p.index[&image]
        })
        .collect()
}

/// Checks that adjacent transpositions and the standard generators of `G`
/// in each slot map the relation span into itself in degrees 1 and 2.
pub fn symmetry_check(p: &PresentationData, group: &FiniteGroupData) -> Vec<SymmetryVerdict> {
    let d = p.num_generators();
    let quad: Vec<RatRow> = p.quadratic.iter().map(|r| tensor_row(&r.tensor, d)).collect();
    let comps = ideal_components(d, &p.linear, &quad, 2);
    let mut syms: Vec<Symmetry> = (1..p.n).map(Symmetry::Swap).collect();
    for slot in 1..=p.n {
        for &g in group.generators() {
            syms.push(Symmetry::Slot { slot, g });
        }
    }
    syms.par_iter()
        .map(|sym| {
            let img = symmetry_images(p, group, sym);
            let degree1 = p
                .linear
                .iter()
                .all(|l| comps[0].contains(&l.iter().map(|(&c, v)| (img[c], v.clone())).collect()));
            let degree2 = p.quadratic.iter().all(|r| {
                let moved: RatRow = r
                    .tensor
                    .iter()
                    .map(|(w, v)| (img[w[0] as usize] * d + img[w[1] as usize], v.clone()))
                    .collect();
                comps[1].contains(&moved)
            });
            SymmetryVerdict {
                symmetry: sym.to_string(),
                degree1,
                degree2,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moebius::{build_group, GroupKind};

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn c2_two_strands_generators() {
        let g = build_group(GroupKind::Cyclic(2)).unwrap();
        let p = make_presentation(2, &g, Variant::P);
        assert_eq!(p.num_generators(), 6);
        assert_eq!(p.linear_relations().len(), 2);
        let names: Vec<String> = (0..6).map(|i| p.generator_name(i)).collect();
        assert_eq!(names, ["X12(g0)", "X12(g1)", "X1(p0)", "X1(p1)", "X2(p0)", "X2(p1)"]);
        let quotient = graded_quotient(&p, 1).unwrap();
        assert_eq!(quotient.dims(), vec![4]);
        assert_eq!(quotient.linear_rank(), 2);
    }

    #[test]
    fn single_strand() {
        let g = build_group(GroupKind::Cyclic(2)).unwrap();
        let p = make_presentation(1, &g, Variant::P);
        assert_eq!(p.num_generators(), 2);
        assert!(p.quadratic_relations().is_empty());
        assert_eq!(graded_quotient(&p, 3).unwrap().dims(), vec![1, 0, 0]);
    }

    #[test]
    fn family_three_needs_four_strands() {
        let g = build_group(GroupKind::Cyclic(2)).unwrap();
        let p = make_presentation(3, &g, Variant::P);
        assert!(!p.family_counts().contains_key(&3));
        let p4 = make_presentation(4, &g, Variant::P);
        assert_eq!(p4.family_counts()[&3], 24 * 4);
    }

    #[test]
    fn family_counts_closed_form() {
        for (n, kind) in [(2usize, GroupKind::Cyclic(3)), (3, GroupKind::Dihedral(2)), (4, GroupKind::Cyclic(2))] {
            let g = build_group(kind).unwrap();
            let o = g.order();
            let e = g.num_exceptional();
            let off_orbit: usize = (0..e)
                .map(|p| (0..e).filter(|&q| g.orbit_of(q) != g.orbit_of(p)).count())
                .sum();
            let falling = |k: usize| (0..k).map(|t| n.saturating_sub(t)).product::<usize>();
            let choose = |k: usize| falling(k) / (1..=k).product::<usize>();
            let p = make_presentation(n, &g, Variant::P).family_counts();
            let expect_p: BTreeMap<u8, usize> = [
                (1, choose(2) * o),
                (2, n),
                (3, falling(4) * o * o),
                (4, falling(3) * (o * o + e * o)),
                (5, falling(2) * off_orbit),
                (6, falling(2) * o * e),
                (7, falling(2) * o * e),
            ]
            .into_iter()
            .filter(|&(_, c)| c > 0)
            .collect();
            assert_eq!(p, expect_p, "p_n n={n} {kind}");
            let t = make_presentation(n, &g, Variant::T).family_counts();
            let expect_t: BTreeMap<u8, usize> = [
                (1, n),
                (2, 3 * choose(4) * o * o),
                (3, choose(3) * 3 * (o * o + e * o)),
                (5, choose(2) * off_orbit),
                (6, choose(2) * o * e),
                (7, choose(2) * o * e),
            ]
            .into_iter()
            .filter(|&(_, c)| c > 0)
            .collect();
            assert_eq!(t, expect_t, "t_n n={n} {kind}");
        }
    }

    #[test]
    fn quadratic_relations_are_commutators() {
        let g = build_group(GroupKind::Dihedral(3)).unwrap();
        let p = make_presentation(3, &g, Variant::P);
        for r in p.quadratic_relations() {
            for (w, c) in &r.tensor {
                let rev = vec![w[1], w[0]];
                assert_eq!(r.tensor.get(&rev), Some(&-c));
            }
        }
    }

    #[test]
    fn elimination_agrees_with_full_ideal() {
        for (n, kind) in [(2, GroupKind::Cyclic(2)), (2, GroupKind::Cyclic(3)), (3, GroupKind::Cyclic(2))] {
            let g = build_group(kind).unwrap();
            let p = make_presentation(n, &g, Variant::P);
            let elim = graded_quotient(&p, 3).unwrap().dims();
            let full = full_dimensions(&p, 3).unwrap();
            assert_eq!(elim, full, "n={n} {kind}");
        }
    }

    #[test]
    fn reduce_kills_relations_and_fixes_basis() {
        let g = build_group(GroupKind::Cyclic(2)).unwrap();
        let p = make_presentation(2, &g, Variant::P);
        let quotient = graded_quotient(&p, 3).unwrap();
        let d = p.num_generators();
        for r in p.quadratic_relations() {
            let t = GradedTensor::from_terms(d, 3, r.tensor.clone());
            assert!(quotient.reduce(&t).unwrap().iter().all(|c| c.is_empty()));
        }
        for l in p.linear_relations() {
            let t = GradedTensor::from_terms(d, 3, l.iter().map(|(&c, v)| (vec![c as u32], v.clone())));
            assert!(quotient.reduce(&t).unwrap().iter().all(|c| c.is_empty()));
        }
        // each degree-1 letter is a unit vector
        for (pos, &gen) in quotient.letters().iter().enumerate() {
            let t = GradedTensor::<BigRational>::generator(d, 3, gen as u32);
            let c = quotient.reduce(&t).unwrap();
            assert_eq!(c[0], BTreeMap::from([(pos, q(1))]));
        }
        let wrong = GradedTensor::<BigRational>::generator(d + 1, 3, 0);
        assert!(quotient.reduce(&wrong).is_err());
    }

    #[test]
    fn reduce_matches_independent_echelon() {
        // oracle: [X12(1), X12(g)] lies in the span of basis + ideal, with
        // the same coefficients found by a fresh dense solve
        let g = build_group(GroupKind::Cyclic(2)).unwrap();
        let p = make_presentation(2, &g, Variant::P);
        let quotient = graded_quotient(&p, 2).unwrap();
        let d = p.num_generators();
        let a = GradedTensor::<BigRational>::generator(d, 2, 0);
        let b = GradedTensor::<BigRational>::generator(d, 2, 1);
        let x = a.bracket(&b).unwrap();
        let coords = quotient.reduce(&x).unwrap();
        // rebuild x from coordinates and check the difference is in the ideal
        let full_quad: Vec<RatRow> = p.quadratic.iter().map(|r| tensor_row(&r.tensor, d)).collect();
        let comps = ideal_components(d, &p.linear, &full_quad, 2);
        let mut rebuilt: BTreeMap<Word, BigRational> = BTreeMap::new();
        let deg2 = quotient.degree(2);
        for (pos, v) in &coords[1] {
            let lyn_word = &deg2.lyndon.words()[deg2.basis[*pos]];
            for (w, c) in crate::lie::lyndon_expansion(lyn_word) {
                let orig: Word = w.iter().map(|&l| quotient.letters()[l as usize] as u32).collect();
                *rebuilt.entry(orig).or_insert_with(BigRational::zero) += v * q(c);
            }
        }
        let mut diff = tensor_row(x.part(2), d);
        for (w, c) in rebuilt {
            *diff.entry(word_index(&w, d)).or_insert_with(BigRational::zero) -= c;
        }
        diff.retain(|_, v| !v.is_zero());
        assert!(comps[1].contains(&diff));
    }

    #[test]
    fn shuffled_relations_give_same_dims() {
        let g = build_group(GroupKind::Cyclic(3)).unwrap();
        let p = make_presentation(2, &g, Variant::P);
        let base = graded_quotient(&p, 3).unwrap().dims();
        for seed in 0..3 {
            assert_eq!(graded_quotient(&p.shuffled(seed), 3).unwrap().dims(), base);
        }
    }

    #[test]
    fn t_and_p_agree() {
        let g = build_group(GroupKind::Cyclic(2)).unwrap();
        let p = make_presentation(2, &g, Variant::P);
        let t = make_presentation(2, &g, Variant::T);
        let report = compare_presentations(&t, &p, 3).unwrap();
        assert!(report.equivalent(), "{report:?}");
        assert!(compare_presentations(&p, &p, 2).unwrap().equivalent());
    }

    #[test]
    fn deleting_relations_is_detected_at_degree_two() {
        let g = build_group(GroupKind::Cyclic(2)).unwrap();
        let p = make_presentation(2, &g, Variant::P);
        let base = graded_quotient(&p, 3).unwrap().dims();
        assert_eq!(base, vec![4, 3, 8]);
        // each single relation of (2, C2) is implied by the others modulo
        // the linear relations, so deletion has to remove a whole family
        for idx in 0..p.quadratic.len() {
            assert_eq!(graded_quotient(&p.without_relation(idx), 2).unwrap().dims(), base[..2]);
        }
        let weaker = p.without_family(6);
        let report = compare_presentations(&p, &weaker, 2).unwrap();
        assert_eq!(report.dims_right, vec![4, 4]);
        assert!(report.per_degree[0] && !report.per_degree[1]);
        assert!(report.right_in_left && !report.left_in_right);
    }

    #[test]
    fn symmetries_preserve_relations() {
        for (n, kind) in [(2, GroupKind::Cyclic(2)), (2, GroupKind::Cyclic(3)), (3, GroupKind::Dihedral(2))] {
            let g = build_group(kind).unwrap();
            let p = make_presentation(n, &g, Variant::P);
            for v in symmetry_check(&p, &g) {
                assert!(v.degree1 && v.degree2, "{kind} n={n} {v:?}");
            }
        }
    }

    #[test]
    fn slot_action_on_points() {
        let g = build_group(GroupKind::Cyclic(3)).unwrap();
        let p = make_presentation(2, &g, Variant::P);
        let h = g.generators()[0];
        let img = symmetry_images(&p, &g, &Symmetry::Slot { slot: 1, g: h });
        for q in 0..g.num_exceptional() {
            let src = p.generator_index(&GeneratorSymbol::Point { k: 1, q }).unwrap();
            let dst = p
                .generator_index(&GeneratorSymbol::Point { k: 1, q: g.act(h, q) })
                .unwrap();
            assert_eq!(img[src], dst);
        }
    }

    #[test]
    fn degree_limits() {
        let g = build_group(GroupKind::Cyclic(2)).unwrap();
        let p3 = make_presentation(3, &g, Variant::P);
        assert!(graded_quotient(&p3, 4).is_err());
        assert!(graded_quotient(&p3, 0).is_err());
        let p2 = make_presentation(2, &g, Variant::P);
        assert_eq!(graded_quotient(&p2, 4).unwrap().dims().len(), 4);
    }
}
