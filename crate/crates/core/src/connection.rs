//! The KZ-type connection form on the orbit configuration space and exact
//! flatness checks.
//!
//! Everything is evaluated on the affine chart (no coordinate equal to ∞).
//! The coefficient of `dz_i` is
//! `ω^i = Σ_p X_i(p)/(z_i − p) + Σ_{j≠i, g} X_{ij}(g)/(z_i − g·z_j)`, with
//! the convention `1/(z − ∞) = 0`; the coefficient of `dz_i ∧ dz_k` in
//! `ω ∧ ω` is `[ω^i, ω^k]`.

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cyclo::CycloNum;
use crate::lie::{GeneratorSymbol, GradedTensor};
use crate::moebius::{antipode, FiniteGroupData, ProjPoint};
use crate::presentation::{graded_quotient, make_presentation, QuotientBasis, Variant};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConnectionError {
    #[error("sample point lies on a pole: {0}")]
    PoleHit(String),
    #[error("could not find a pole-free sample after {0} draws")]
    SamplingFailed(usize),
}

/// One logarithmic term of ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoleTerm {
    /// `d log(z_i − p) ⊗ X_i(p)` for a finite exceptional point `p`.
    PointPole { i: usize, p: usize },
    /// `d_{z_i} log(z_i − g·z_j) ⊗ X_{ij}(g)`, `i ≠ j`.
    PairPole { i: usize, j: usize, g: usize },
}

impl PoleTerm {
    pub fn strand(&self) -> usize {
        match *self {
            PoleTerm::PointPole { i, .. } | PoleTerm::PairPole { i, .. } => i,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConnectionForm {
    n: usize,
    terms: Vec<PoleTerm>,
}

/// All terms of ω; point poles at ∞ are dropped by the convention
/// `d log(z − ∞) = 0`.
pub fn build_omega(n: usize, group: &FiniteGroupData) -> ConnectionForm {
    let mut terms = Vec::new();
    for i in 1..=n {
        for (p, pt) in group.exceptional().iter().enumerate() {
            if !pt.is_infinity() {
                terms.push(PoleTerm::PointPole { i, p });
            }
        }
        for j in (1..=n).filter(|&j| j != i) {
            for g in 0..group.order() {
                terms.push(PoleTerm::PairPole { i, j, g });
            }
        }
    }
    ConnectionForm { n, terms }
}

impl ConnectionForm {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[PoleTerm] {
        &self.terms
    }

    pub fn from_terms(n: usize, terms: Vec<PoleTerm>) -> Self {
        ConnectionForm { n, terms }
    }

    pub fn count_point_poles(&self) -> usize {
        self.terms.iter().filter(|t| matches!(t, PoleTerm::PointPole { .. })).count()
    }

    pub fn count_pair_poles(&self) -> usize {
        self.terms.len() - self.count_point_poles()
    }
}

/// Generator symbol carried by a term.
pub fn term_symbol(t: &PoleTerm, group: &FiniteGroupData) -> GeneratorSymbol {
    match *t {
        PoleTerm::PointPole { i, p } => GeneratorSymbol::Point { k: i, q: p },
        PoleTerm::PairPole { i, j, g } => GeneratorSymbol::pair(i, j, g, |h| group.inv(h)),
    }
}

/// Exact sample point on the affine chart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePoint {
    pub values: Vec<CycloNum>,
}

impl SamplePoint {
    pub fn from_rationals(order: u32, values: &[BigRational]) -> Self {
        SamplePoint {
            values: values.iter().map(|v| CycloNum::from_rational(order, v.clone())).collect(),
        }
    }

    pub fn text(&self) -> Vec<String> {
        self.values.iter().map(|v| v.to_string()).collect()
    }
}

/// `1/(z − w)` with `w` possibly ∞.
fn inv_diff(z: &CycloNum, w: Option<&CycloNum>) -> Result<Option<CycloNum>, ()> {
    match w {
        None => Ok(None),
        Some(w) => {
            let diff = z - w;
            if diff.is_zero() {
                Err(())
            } else {
                Ok(Some(diff.inv().expect("nonzero")))
            }
        }
    }
}

/// Scalar coefficient of each term of `ω^i` at the sample.
fn term_values(
    omega: &ConnectionForm,
    group: &FiniteGroupData,
    s: &SamplePoint,
    i: usize,
) -> Result<Vec<(PoleTerm, CycloNum)>, ConnectionError> {
    let zi = &s.values[i - 1];
    let mut out = Vec::new();
    for t in omega.terms.iter().filter(|t| t.strand() == i) {
        let w = match *t {
            PoleTerm::PointPole { p, .. } => group.exceptional()[p].affine().cloned(),
            PoleTerm::PairPole { j, g, .. } => group.element(g).apply_affine(&s.values[j - 1]),
        };
        match inv_diff(zi, w.as_ref()) {
            Ok(Some(v)) => out.push((*t, v)),
            Ok(None) => {}
            Err(()) => return Err(ConnectionError::PoleHit(format!("{t:?} at {:?}", s.text()))),
        }
    }
    Ok(out)
}

/// `ω^i` at the sample as a degree-1 combination of generator indices.
pub fn eval_component(
    omega: &ConnectionForm,
    group: &FiniteGroupData,
    generator_index: &HashMap<GeneratorSymbol, usize>,
    s: &SamplePoint,
    i: usize,
) -> Result<BTreeMap<usize, CycloNum>, ConnectionError> {
    let mut acc: BTreeMap<usize, CycloNum> = BTreeMap::new();
    for (t, v) in term_values(omega, group, s, i)? {
        let idx = generator_index[&term_symbol(&t, group)];
        match acc.get_mut(&idx) {
            Some(e) => *e = &*e + &v,
            None => {
                acc.insert(idx, v);
            }
        }
    }
    acc.retain(|_, v| !v.is_zero());
    Ok(acc)
}

/// Coefficient of `dz_i ∧ dz_k` in `ω ∧ ω` at the sample: `[ω^i, ω^k]`.
pub fn eval_wedge_pair(
    omega: &ConnectionForm,
    group: &FiniteGroupData,
    generators: &[GeneratorSymbol],
    s: &SamplePoint,
    i: usize,
    k: usize,
) -> Result<GradedTensor<CycloNum>, ConnectionError> {
    let index: HashMap<GeneratorSymbol, usize> =
        generators.iter().enumerate().map(|(a, s)| (*s, a)).collect();
    let wi = eval_component(omega, group, &index, s, i)?;
    let wk = eval_component(omega, group, &index, s, k)?;
    let mut terms = Vec::with_capacity(2 * wi.len() * wk.len());
    for (a, ca) in &wi {
        for (b, cb) in &wk {
            let c = ca * cb;
            terms.push((vec![*a as u32, *b as u32], c.clone()));
            terms.push((vec![*b as u32, *a as u32], -c));
        }
    }
    Ok(GradedTensor::from_terms(generators.len(), 2, terms))
}

/// Wedge coefficients keyed by the pair `(i, k)`.
pub type WedgeSquare = Vec<((usize, usize), GradedTensor<CycloNum>)>;

/// `[ω^i, ω^k]` for every pair `i < k`.
pub fn eval_wedge_square(
    omega: &ConnectionForm,
    group: &FiniteGroupData,
    generators: &[GeneratorSymbol],
    s: &SamplePoint,
) -> Result<WedgeSquare, ConnectionError> {
    let n = omega.n;
    let mut out = Vec::new();
    for i in 1..=n {
        for k in i + 1..=n {
            out.push(((i, k), eval_wedge_pair(omega, group, generators, s, i, k)?));
        }
    }
    Ok(out)
}

/// Whether the sample avoids every pole of ω (and the chart's ∞).
pub fn avoids_poles(group: &FiniteGroupData, s: &SamplePoint) -> bool {
    let n = s.values.len();
    for i in 0..n {
        let zi = &s.values[i];
        if group.exceptional().iter().any(|p| p.affine() == Some(zi)) {
            return false;
        }
        for j in (0..n).filter(|&j| j != i) {
            if group
                .elements()
                .iter()
                .any(|g| g.apply_affine(&s.values[j]).as_ref() == Some(zi))
            {
                return false;
            }
        }
    }
    true
}

fn random_rational(rng: &mut ChaCha8Rng) -> BigRational {
    let num: i64 = rng.gen_range(-20..=20);
    let den: i64 = rng.gen_range(1..=9);
    BigRational::new(num.into(), den.into())
}

/// Deterministic pole-free rational samples.
pub fn draw_samples(
    n: usize,
    group: &FiniteGroupData,
    count: usize,
    seed: u64,
) -> Result<Vec<SamplePoint>, ConnectionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = group.field_order();
    let mut out = Vec::with_capacity(count);
    let mut draws = 0;
    while out.len() < count {
        draws += 1;
        if draws > 100 * count + 100 {
            return Err(ConnectionError::SamplingFailed(draws));
        }
        let vals: Vec<BigRational> = (0..n).map(|_| random_rational(&mut rng)).collect();
        let s = SamplePoint::from_rationals(order, &vals);
        if avoids_poles(group, &s) {
            out.push(s);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub i: usize,
    pub k: usize,
    /// Number of nonzero quotient coordinates after reduction.
    pub nonzero: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleVerdict {
    pub sample: Vec<String>,
    pub pairs: Vec<PairVerdict>,
}

impl SampleVerdict {
    pub fn all_zero(&self) -> bool {
        self.pairs.iter().all(|p| p.nonzero == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCertificate {
    pub grid_sizes: Vec<usize>,
    pub points: usize,
    pub all_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub n: usize,
    pub group: String,
    pub samples: Vec<SampleVerdict>,
    /// Per-variable degree bound `B_l` on the numerator of each cleared
    /// `dz_i ∧ dz_k` coefficient.
    pub degree_bound: Vec<usize>,
    /// Total degree bound of the cleared numerator.
    pub total_degree_bound: usize,
    /// Size of a product grid with `B_l + 1` values per variable.
    pub grid_points_needed: usize,
    pub samples_exceed_grid: bool,
    pub grid: Option<GridCertificate>,
}

impl FlatnessReport {
    pub fn all_zero(&self) -> bool {
        self.samples.iter().all(|s| s.all_zero()) && self.grid.as_ref().is_none_or(|g| g.all_zero)
    }

    pub fn nonzero_samples(&self) -> usize {
        self.samples.iter().filter(|s| !s.all_zero()).count()
    }
}

/// Number of distinct linear-in-each-variable denominators involving `z_l`:
/// finite exceptional points plus `(n − 1)|G|` pair factors.
pub fn degree_bound(n: usize, group: &FiniteGroupData) -> Vec<usize> {
    let finite = group.exceptional().iter().filter(|p| !p.is_infinity()).count();
    vec![finite + (n - 1) * group.order(); n]
}

fn evaluate_sample(
    omega: &ConnectionForm,
    group: &FiniteGroupData,
    quotient: &QuotientBasis,
    generators: &[GeneratorSymbol],
    s: &SamplePoint,
) -> Result<SampleVerdict, ConnectionError> {
    let pairs = eval_wedge_square(omega, group, generators, s)?
        .into_iter()
        .map(|((i, k), w)| {
            let coords = quotient.reduce(&w).expect("same generators");
            PairVerdict {
                i,
                k,
                nonzero: coords.iter().map(|c| c.len()).sum(),
            }
        })
        .collect();
    Ok(SampleVerdict {
        sample: s.text(),
        pairs,
    })
}

/// Flatness at the given samples against a supplied quotient.
pub fn flatness_with_quotient(
    omega: &ConnectionForm,
    group: &FiniteGroupData,
    quotient: &QuotientBasis,
    generators: &[GeneratorSymbol],
    samples: &[SamplePoint],
) -> Result<Vec<SampleVerdict>, ConnectionError> {
    samples
        .par_iter()
        .map(|s| evaluate_sample(omega, group, quotient, generators, s))
        .collect()
}

/// Product grid of pole-free rationals with `sizes[l]` values for `z_l`.
///
/// Values are chosen greedily so that no grid point meets a pole: `z_l`
/// avoids the exceptional points and every `g·z_j` for values of other
/// coordinates already chosen.
pub fn pole_free_grid(group: &FiniteGroupData, sizes: &[usize]) -> Vec<Vec<CycloNum>> {
    let order = group.field_order();
    let exceptional: Vec<CycloNum> = group.exceptional().iter().filter_map(|p| p.affine().cloned()).collect();
    let mut forbidden: Vec<CycloNum> = exceptional;
    let mut grid = Vec::new();
    let mut candidate = 1i64;
    for &size in sizes {
        let mut values = Vec::new();
        while values.len() < size {
            let z = CycloNum::from_frac(order, candidate, 1 + (candidate % 3));
            candidate += 1;
            if forbidden.contains(&z) || values.contains(&z) {
                continue;
            }
            values.push(z);
        }
        for z in &values {
            for g in group.elements() {
                if let Some(w) = g.apply_affine(z) {
                    forbidden.push(w);
                }
            }
        }
        grid.push(values);
    }
    grid
}

/// Deterministic certificate: the cleared numerator has degree at most
/// `B_l` in `z_l`, so vanishing on a `(B_l + 1)`-point product grid forces it
/// to vanish identically.
pub fn certify_on_grid(
    omega: &ConnectionForm,
    group: &FiniteGroupData,
    quotient: &QuotientBasis,
    generators: &[GeneratorSymbol],
) -> Result<GridCertificate, ConnectionError> {
    let n = omega.n;
    let sizes: Vec<usize> = degree_bound(n, group).iter().map(|b| b + 1).collect();
    let grid = pole_free_grid(group, &sizes);
    let total: usize = sizes.iter().product();
    let points: Vec<SamplePoint> = (0..total)
        .map(|mut code| {
            let values = (0..n)
                .map(|l| {
                    let v = grid[l][code % sizes[l]].clone();
                    code /= sizes[l];
                    v
                })
                .collect();
            SamplePoint { values }
        })
        .collect();
    let verdicts = flatness_with_quotient(omega, group, quotient, generators, &points)?;
    Ok(GridCertificate {
        grid_sizes: sizes,
        points: total,
        all_zero: verdicts.iter().all(|v| v.all_zero()),
    })
}

/// Flatness of ω for `(n, G)`: reduction of `[ω^i, ω^k]` in the degree-2
/// quotient at `count` seeded samples, plus the grid certificate when the
/// grid has at most `grid_cap` points.
pub fn flatness_check(
    n: usize,
    group: &FiniteGroupData,
    count: usize,
    seed: u64,
    grid_cap: usize,
) -> Result<FlatnessReport, ConnectionError> {
    let p = make_presentation(n, group, Variant::P);
    let quotient = graded_quotient(&p, 2).expect("degree 2 is always supported");
    let omega = build_omega(n, group);
    let samples = draw_samples(n, group, count, seed)?;
    let verdicts = flatness_with_quotient(&omega, group, &quotient, p.generators(), &samples)?;
    let bound = degree_bound(n, group);
    let grid_points_needed: usize = bound.iter().map(|b| b + 1).product();
    let grid = if n >= 2 && grid_points_needed <= grid_cap {
        Some(certify_on_grid(&omega, group, &quotient, p.generators())?)
    } else {
        None
    };
    Ok(FlatnessReport {
        n,
        group: group.kind().to_string(),
        samples: verdicts,
        total_degree_bound: bound.iter().sum(),
        degree_bound: bound,
        grid_points_needed,
        samples_exceed_grid: count >= grid_points_needed,
        grid,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementIdentity {
    pub element: usize,
    pub point: Option<usize>,
    pub trials: usize,
    pub passed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub group: String,
    pub first: Vec<ElementIdentity>,
    pub second: Vec<ElementIdentity>,
}

impl LemmaReport {
    pub fn all_pass(&self) -> bool {
        self.first.iter().chain(&self.second).all(|e| e.passed == e.trials)
    }

    pub fn min_trials(&self) -> usize {
        self.first.iter().chain(&self.second).map(|e| e.trials).min().unwrap_or(0)
    }
}

fn finite_inv(x: &CycloNum) -> Option<CycloNum> {
    (!x.is_zero()).then(|| x.inv().expect("nonzero"))
}

/// First partial-fraction identity for `h` at `(x, y, z)`, as the
/// `dx ∧ dy` coefficients; `None` when a denominator vanishes.
pub fn first_identity(group: &FiniteGroupData, h: usize, x: &CycloNum, y: &CycloNum, z: &CycloNum) -> Option<bool> {
    let hm = group.element(h);
    let hinv = group.element(group.inv(h));
    let hx = hm.apply_affine(x)?;
    let hz = hm.apply_affine(z)?;
    let hinv_y = hinv.apply_affine(y)?;
    let lhs = finite_inv(&(&(x - z) * &(y - &hx)))?;
    let t1 = finite_inv(&(&(x - z) * &(y - &hz)))?;
    let t2 = finite_inv(&(&(x - &hinv_y) * &(y - &hz)))?;
    let t3 = match hm.apply(&ProjPoint::infinity(group.field_order())).affine() {
        None => CycloNum::zero(group.field_order()),
        Some(h_inf) => finite_inv(&(&(x - &hinv_y) * &(y - h_inf)))?,
    };
    Some(lhs == &(&t1 - &t2) + &t3)
}

/// Second identity for `h ∈ stab(p) ∖ {1}` at `z`; `None` on a pole.
pub fn second_identity(group: &FiniteGroupData, h: usize, p: usize, z: &CycloNum) -> Option<bool> {
    let order = group.field_order();
    let recip = |w: Option<CycloNum>| -> Option<CycloNum> {
        match w {
            None => Some(CycloNum::zero(order)),
            Some(w) => finite_inv(&(z - &w)),
        }
    };
    let hz = group.element(h).apply_affine(z);
    let hinv_z = group.element(group.inv(h)).apply_affine(z);
    let pt = &group.exceptional()[p];
    let lhs = &recip(hz)? + &recip(hinv_z)?;
    let rhs = &recip(pt.affine().cloned())? + &recip(antipode(pt).affine().cloned())?;
    Some(lhs == rhs)
}

/// Both partial-fraction identities at `trials` random rational points per
/// group element (and per exceptional point for the second one).
pub fn lemma_identities_check(group: &FiniteGroupData, trials: usize, seed: u64) -> LemmaReport {
    let order = group.field_order();
    let first = (0..group.order())
        .into_par_iter()
        .map(|h| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (h as u64).wrapping_mul(0x9e37_79b9));
            let mut done = 0;
            let mut passed = 0;
            let mut draws = 0;
            while done < trials && draws < 50 * trials {
                draws += 1;
                let [x, y, z] = [0, 1, 2].map(|_| CycloNum::from_rational(order, random_rational(&mut rng)));
                if let Some(ok) = first_identity(group, h, &x, &y, &z) {
                    done += 1;
                    passed += ok as usize;
                }
            }
            ElementIdentity {
                element: h,
                point: None,
                trials: done,
                passed,
            }
        })
        .collect();
    let mut second_jobs = Vec::new();
    for p in 0..group.num_exceptional() {
        for &h in &group.stabilizer(p)[1..] {
            second_jobs.push((h, p));
        }
    }
    let second = second_jobs
        .into_par_iter()
        .map(|(h, p)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((h * 1000 + p) as u64).wrapping_mul(0x85eb_ca6b));
            let mut done = 0;
            let mut passed = 0;
            let mut draws = 0;
            while done < trials && draws < 50 * trials {
                draws += 1;
                let z = CycloNum::from_rational(order, random_rational(&mut rng));
                if let Some(ok) = second_identity(group, h, p, &z) {
                    done += 1;
                    passed += ok as usize;
                }
            }
            ElementIdentity {
                element: h,
                point: Some(p),
                trials: done,
                passed,
            }
        })
        .collect();
    LemmaReport {
        group: group.kind().to_string(),
        first,
        second,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DOmegaReport {
    pub samples: usize,
    pub matched: usize,
}

impl DOmegaReport {
    pub fn all_match(&self) -> bool {
        self.matched == self.samples
    }
}

/// Checks that ω equals `Σ X_i(p) d log(z_i − p) + Σ_{i<j,g} X_{ij}(g) d log f_g^{ij}`
/// with `f_g^{ij} = z_i(c_g z_j + d_g) − (a_g z_j + b_g)`, coefficientwise in
/// `dz_l` at seeded samples. Each term being exact, `dω = 0` follows.
pub fn d_omega_check(omega: &ConnectionForm, group: &FiniteGroupData, samples: usize, seed: u64) -> Result<DOmegaReport, ConnectionError> {
    let n = omega.n;
    let pts = draw_samples(n, group, samples, seed)?;
    let mut matched = 0;
    for s in &pts {
        // (variable, symbol) -> coefficient, from the term list
        let mut direct: BTreeMap<(usize, GeneratorSymbol), CycloNum> = BTreeMap::new();
        for l in 1..=n {
            for (t, v) in term_values(omega, group, s, l)? {
                let key = (l, term_symbol(&t, group));
                let e = direct.entry(key).or_insert_with(|| CycloNum::zero(group.field_order()));
                *e = &*e + &v;
            }
        }
        direct.retain(|_, v| !v.is_zero());

        let mut rewritten: BTreeMap<(usize, GeneratorSymbol), CycloNum> = BTreeMap::new();
        for t in omega.terms.iter() {
            match *t {
                PoleTerm::PointPole { i, p } => {
                    let w = group.exceptional()[p].affine().expect("finite pole");
                    rewritten.insert((i, term_symbol(t, group)), (&s.values[i - 1] - w).inv().expect("pole-free"));
                }
                PoleTerm::PairPole { i, j, g } if i < j => {
                    let [a, b, c, d] = group.element(g).entries();
                    let (zi, zj) = (&s.values[i - 1], &s.values[j - 1]);
                    let f = &(zi * &(&(c * zj) + d)) - &(&(a * zj) + b);
                    let finv = f.inv().expect("pole-free");
                    let di = &(&(c * zj) + d) * &finv;
                    let dj = &(&(c * zi) - a) * &finv;
                    let sym = term_symbol(t, group);
                    for (l, v) in [(i, di), (j, dj)] {
                        let e = rewritten.entry((l, sym)).or_insert_with(|| CycloNum::zero(group.field_order()));
                        *e = &*e + &v;
                    }
                }
                PoleTerm::PairPole { .. } => {}
            }
        }
        rewritten.retain(|_, v| !v.is_zero());
        matched += (direct == rewritten) as usize;
    }
    Ok(DOmegaReport {
        samples: pts.len(),
        matched,
    })
}
