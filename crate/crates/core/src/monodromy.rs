//! Numeric parallel transport of ω along loops in the orbit configuration
//! space, group-likeness of the result, and BCH utilities.
//!
//! Transport solves `dF = ωF` by composing per-step exponentials, so a path
//! made of `γ₁` followed by `γ₂` yields `F(γ₂)·F(γ₁)`. The result at `N`
//! steps is Richardson-extrapolated against `2N` steps.
//!
//! Loops are counterclockwise in the chart around the enclosed point; the
//! loop around ∞ is a large clockwise circle. With this orientation the
//! leading term of a generator loop is `+2iπ` times its label.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connection::{build_omega, term_symbol, ConnectionForm, PoleTerm};
use crate::lie::{dynkin_projection, GeneratorSymbol, GradedTensor};
use crate::moebius::FiniteGroupData;
use crate::presentation::{
    graded_quotient, make_presentation, Coordinates, PresentationData, PresentationError, QuotientBasis, Variant,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonodromyError {
    #[error("no admissible basepoint found after {0} draws")]
    SearchFailed(usize),
    #[error("no corridor avoids the forbidden points for {0}")]
    GeometryFailure(String),
    #[error("error estimate {estimate:.3e} above tolerance {tolerance:.3e} at {steps} steps")]
    StepUnderflow { estimate: f64, tolerance: f64, steps: usize },
    #[error("unknown loop label {0}")]
    BadLabel(String),
    #[error(transparent)]
    Presentation(#[from] PresentationError),
}

// ---------------------------------------------------------------------------
// dense truncated series

/// Element of the truncated tensor algebra over `C`, stored densely per
/// degree; word `(w₁…w_m)` sits at index `Σ w_t k^{m−t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSeries {
    k: usize,
    d: usize,
    parts: Vec<Vec<Complex64>>,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl DenseSeries {
    pub fn zero(k: usize, d: usize) -> Self {
        let parts = (0..=d).map(|m| vec![ZERO; k.pow(m as u32)]).collect();
        DenseSeries { k, d, parts }
    }

    pub fn one(k: usize, d: usize) -> Self {
        let mut s = Self::zero(k, d);
        s.parts[0][0] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn degree_one(k: usize, d: usize, v: &[Complex64]) -> Self {
        let mut s = Self::zero(k, d);
        s.parts[1].copy_from_slice(v);
        s
    }

    pub fn num_generators(&self) -> usize {
        self.k
    }

    pub fn max_degree(&self) -> usize {
        self.d
    }

    pub fn part(&self, m: usize) -> &[Complex64] {
        &self.parts[m]
    }

    pub fn coeff(&self, word: &[u32]) -> Complex64 {
        let idx = word.iter().fold(0, |acc, &l| acc * self.k + l as usize);
        self.parts[word.len()][idx]
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.k, self.d);
        for p in 0..=self.d {
            for q in 0..=self.d - p {
                let shift = self.k.pow(q as u32);
                let (a, b) = (&self.parts[p], &other.parts[q]);
                let target = &mut out.parts[p + q];
                for (i, x) in a.iter().enumerate() {
                    if *x == ZERO {
                        continue;
                    }
                    let base = i * shift;
                    for (j, y) in b.iter().enumerate() {
                        target[base + j] += x * y;
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.parts.iter_mut().flatten().for_each(|x| *x *= c);
        out
    }

    fn combine(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        for (pa, pb) in out.parts.iter_mut().zip(&other.parts) {
            for (a, b) in pa.iter_mut().zip(pb) {
                *a = f(*a, *b);
            }
        }
        out
    }

    fn without_constant(&self) -> Self {
        let mut x = self.clone();
        x.parts[0][0] = ZERO;
        x
    }

    /// `exp(x)`, ignoring the constant term of `x`.
    pub fn exp(&self) -> Self {
        let x = self.without_constant();
        let mut term = Self::one(self.k, self.d);
        let mut sum = term.clone();
        for n in 1..=self.d {
            term = term.mul(&x).scale(1.0 / n as f64);
            sum = sum.add(&term);
        }
        sum
    }

    /// `exp(v)` for a degree-1 vector, built from tensor powers directly.
    pub fn exp_degree_one(k: usize, d: usize, v: &[Complex64]) -> Self {
        Self::exp_polynomial(k, d, v, d)
    }

    fn exp_polynomial(k: usize, d: usize, v: &[Complex64], order: usize) -> Self {
        let mut s = Self::one(k, d);
        for m in 1..=d.min(order) {
            let (lo, hi) = s.parts.split_at_mut(m);
            let prev = &lo[m - 1];
            let cur = &mut hi[0];
            let inv = 1.0 / m as f64;
            for (i, x) in prev.iter().enumerate() {
                for (j, y) in v.iter().enumerate() {
                    cur[i * k + j] = x * y * inv;
                }
            }
        }
        s
    }

    /// `log(x)` for `x` with constant term 1.
    pub fn log(&self) -> Self {
        let y = self.without_constant();
        let mut power = y.clone();
        let mut sum = Self::zero(self.k, self.d);
        for n in 1..=self.d {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            sum = sum.add(&power.scale(sign / n as f64));
            power = power.mul(&y);
        }
        sum
    }

    /// Inverse of a series with constant term 1.
    pub fn inverse(&self) -> Self {
        let y = self.without_constant();
        let mut power = Self::one(self.k, self.d);
        let mut sum = power.clone();
        for _ in 1..=self.d {
            power = power.mul(&y).scale(-1.0);
            sum = sum.add(&power);
        }
        sum
    }

    pub fn max_abs(&self) -> f64 {
        self.parts.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    /// `max |Δ(F) − F⊗F|` over all bidegrees `(p, q)` with `p + q ≤ D`,
    /// where `Δ` is the unshuffle coproduct (generators primitive).
    pub fn group_like_defect(&self) -> f64 {
        let (k, d) = (self.k, self.d);
        let f0 = self.parts[0][0];
        let mut defect = (f0 * f0 - f0).norm();
        for m in 1..=d {
            for x in &self.parts[m] {
                defect = defect.max((f0 * x - x).norm());
            }
        }
        for m in 2..=d {
            // acc[p][iu * k^(m-p) + iv]
            let mut acc: Vec<Vec<Complex64>> = (0..=m).map(|_| vec![ZERO; k.pow(m as u32)]).collect();
            for (iw, fw) in self.parts[m].iter().enumerate() {
                if *fw == ZERO {
                    continue;
                }
                let letters = word_letters(iw, k, m);
                for mask in 1u32..(1 << m) - 1 {
                    let (mut iu, mut iv, mut p) = (0usize, 0usize, 0usize);
                    for (t, &l) in letters.iter().enumerate() {
                        if mask & (1 << t) != 0 {
                            iu = iu * k + l;
                            p += 1;
                        } else {
                            iv = iv * k + l;
                        }
                    }
                    acc[p][iu * k.pow((m - p) as u32) + iv] += fw;
                }
            }
            for (p, row) in acc.iter().enumerate().take(m).skip(1) {
                let q = m - p;
                let kq = k.pow(q as u32);
                for (iu, fu) in self.parts[p].iter().enumerate() {
                    for (iv, fv) in self.parts[q].iter().enumerate() {
                        defect = defect.max((row[iu * kq + iv] - fu * fv).norm());
                    }
                }
            }
        }
        defect
    }

    pub fn to_tensor(&self) -> GradedTensor<Complex64> {
        let mut terms = Vec::new();
        for m in 0..=self.d {
            for (i, x) in self.parts[m].iter().enumerate() {
                if *x != ZERO {
                    terms.push((word_letters(i, self.k, m).into_iter().map(|l| l as u32).collect(), *x));
                }
            }
        }
        GradedTensor::from_terms(self.k, self.d, terms)
    }
}

fn word_letters(mut idx: usize, k: usize, m: usize) -> Vec<usize> {
    let mut out = vec![0; m];
    for t in (0..m).rev() {
        out[t] = idx % k;
        idx /= k;
    }
    out
}

// ---------------------------------------------------------------------------
// paths

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PieceKind {
    Segment { from: Complex64, to: Complex64 },
    /// `center + radius·e^{i(start + t·sweep)}`, `t ∈ [0, 1]`.
    Arc { center: Complex64, radius: f64, start: f64, sweep: f64 },
}

impl PieceKind {
    pub fn point(&self, t: f64) -> Complex64 {
        match *self {
            PieceKind::Segment { from, to } => from + (to - from) * t,
            PieceKind::Arc { center, radius, start, sweep } => center + Complex64::from_polar(radius, start + t * sweep),
        }
    }

    pub fn derivative(&self, t: f64) -> Complex64 {
        match *self {
            PieceKind::Segment { from, to } => to - from,
            PieceKind::Arc { radius, start, sweep, .. } => {
                Complex64::from_polar(radius, start + t * sweep) * Complex64::new(0.0, sweep)
            }
        }
    }

    pub fn reversed(&self) -> Self {
        match *self {
            PieceKind::Segment { from, to } => PieceKind::Segment { from: to, to: from },
            PieceKind::Arc { center, radius, start, sweep } => PieceKind::Arc {
                center,
                radius,
                start: start + sweep,
                sweep: -sweep,
            },
        }
    }

    pub fn start(&self) -> Complex64 {
        self.point(0.0)
    }

    pub fn end(&self) -> Complex64 {
        self.point(1.0)
    }
}

/// A piece moves one strand (1-based) while the others stay put.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub strand: usize,
    pub kind: PieceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopPath {
    pub basepoint: Vec<Complex64>,
    pub pieces: Vec<Piece>,
    pub label: Option<GeneratorSymbol>,
    /// Enclosed point of a generator loop; `None` for ∞ or composite loops.
    pub enclosed: Option<Complex64>,
}

impl LoopPath {
    pub fn constant(basepoint: Vec<Complex64>) -> Self {
        LoopPath {
            basepoint,
            pieces: Vec::new(),
            label: None,
            enclosed: None,
        }
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &LoopPath) -> LoopPath {
        let mut pieces = self.pieces.clone();
        pieces.extend_from_slice(&other.pieces);
        LoopPath {
            basepoint: self.basepoint.clone(),
            pieces,
            label: None,
            enclosed: None,
        }
    }

    pub fn inverse(&self) -> LoopPath {
        LoopPath {
            basepoint: self.basepoint.clone(),
            pieces: self
                .pieces
                .iter()
                .rev()
                .map(|p| Piece {
                    strand: p.strand,
                    kind: p.kind.reversed(),
                })
                .collect(),
            label: None,
            enclosed: None,
        }
    }

    /// Whether every piece starts where the previous configuration left
    /// its strand and the loop returns to the basepoint.
    pub fn is_closed(&self, tol: f64) -> bool {
        let mut config = self.basepoint.clone();
        for p in &self.pieces {
            if (p.kind.start() - config[p.strand - 1]).norm() > tol {
                return false;
            }
            config[p.strand - 1] = p.kind.end();
        }
        config.iter().zip(&self.basepoint).all(|(a, b)| (a - b).norm() <= tol)
    }

    /// Winding number of strand `strand` around `w`.
    pub fn winding(&self, strand: usize, w: Complex64) -> f64 {
        let mut total = 0.0;
        for p in self.pieces.iter().filter(|p| p.strand == strand) {
            let samples = 512;
            let mut prev = p.kind.point(0.0) - w;
            for s in 1..=samples {
                let cur = p.kind.point(s as f64 / samples as f64) - w;
                total += (cur / prev).arg();
                prev = cur;
            }
        }
        total / (2.0 * PI)
    }
}

/// Numeric data of `G` needed on the chart.
#[derive(Debug, Clone)]
pub struct NumericGroup {
    matrices: Vec<[Complex64; 4]>,
    finite_exceptional: Vec<(usize, Complex64)>,
    has_infinity: Option<usize>,
}

impl NumericGroup {
    pub fn new(group: &FiniteGroupData) -> Self {
        let mut finite_exceptional = Vec::new();
        let mut has_infinity = None;
        for (p, pt) in group.exceptional().iter().enumerate() {
            match pt.embed() {
                Some(z) => finite_exceptional.push((p, z)),
                None => has_infinity = Some(p),
            }
        }
        NumericGroup {
            matrices: group.elements().iter().map(|g| g.embed()).collect(),
            finite_exceptional,
            has_infinity,
        }
    }

    /// `g·z`, or `None` when it is ∞.
    pub fn apply(&self, g: usize, z: Complex64) -> Option<Complex64> {
        let [a, b, c, d] = self.matrices[g];
        let den = c * z + d;
        (den.norm() > 1e-12 * (1.0 + (a * z + b).norm())).then(|| (a * z + b) / den)
    }

    pub fn order(&self) -> usize {
        self.matrices.len()
    }

    /// Finite forbidden points for strand `m` (1-based) in configuration `c`.
    pub fn forbidden(&self, c: &[Complex64], m: usize) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = self.finite_exceptional.iter().map(|(_, z)| *z).collect();
        for (j, &cj) in c.iter().enumerate() {
            if j + 1 == m {
                continue;
            }
            out.extend((0..self.order()).filter_map(|g| self.apply(g, cj)));
        }
        out
    }
}

fn min_pairwise(points: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            best = best.min((p - q).norm());
        }
    }
    best
}

/// Seeded basepoint with all orbit points and exceptional points pairwise
/// at least `0.1` apart.
pub fn make_basepoint(n: usize, group: &NumericGroup, seed: u64) -> Result<Vec<Complex64>, MonodromyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = 10_000;
    for _ in 0..limit {
        let q: Vec<Complex64> = (0..n)
            .map(|_| {
                let re = (rng.gen_range(-40..=40) as f64) / 16.0;
                let im = (rng.gen_range(-40..=40) as f64) / 16.0;
                Complex64::new(re, im)
            })
            .collect();
        let mut pts: Vec<Complex64> = group.finite_exceptional.iter().map(|(_, z)| *z).collect();
        let mut ok = true;
        for &z in &q {
            for g in 0..group.order() {
                match group.apply(g, z) {
                    Some(w) if w.norm() < 20.0 => pts.push(w),
                    _ => ok = false,
                }
            }
        }
        if ok && min_pairwise(&pts) >= 0.1 {
            return Ok(q);
        }
    }
    Err(MonodromyError::SearchFailed(limit))
}

fn segment_distance(a: Complex64, b: Complex64, p: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

fn polyline_clear(points: &[Complex64], forbidden: &[Complex64], clearance: f64) -> bool {
    points
        .windows(2)
        .all(|w| forbidden.iter().all(|&f| segment_distance(w[0], w[1], f) >= clearance))
}

/// Polyline from `a` to `b` keeping `clearance` from `forbidden`: straight
/// if possible, else through one detour waypoint.
fn corridor(a: Complex64, b: Complex64, forbidden: &[Complex64], clearance: f64) -> Option<Vec<Complex64>> {
    if polyline_clear(&[a, b], forbidden, clearance) {
        return Some(vec![a, b]);
    }
    let mid = (a + b) * 0.5;
    let perp = (b - a) * Complex64::new(0.0, 1.0);
    for s in [0.25, -0.25, 0.5, -0.5, 0.75, -0.75, 1.0, -1.0, 1.5, -1.5, 2.0, -2.0] {
        let w = mid + perp * s;
        if polyline_clear(&[a, w, b], forbidden, clearance) {
            return Some(vec![a, w, b]);
        }
    }
    None
}

fn segments(strand: usize, points: &[Complex64]) -> Vec<Piece> {
    points
        .windows(2)
        .map(|w| Piece {
            strand,
            kind: PieceKind::Segment { from: w[0], to: w[1] },
        })
        .collect()
}

/// Lasso based at the basepoint: out along a corridor, once around a
/// circle, back along the same corridor.
pub fn lasso(
    basepoint: &[Complex64],
    strand: usize,
    route: &[Complex64],
    center: Complex64,
    radius: f64,
    sweep: f64,
) -> LoopPath {
    let entry = *route.last().expect("nonempty route");
    let start = (entry - center).arg();
    let mut pieces = segments(strand, route);
    pieces.push(Piece {
        strand,
        kind: PieceKind::Arc { center, radius, start, sweep },
    });
    let back: Vec<Complex64> = route.iter().rev().copied().collect();
    pieces.extend(segments(strand, &back));
    LoopPath {
        basepoint: basepoint.to_vec(),
        pieces,
        label: None,
        enclosed: None,
    }
}

/// Same as [`lasso`] but going around a square of half-side `half`.
pub fn square_lasso(basepoint: &[Complex64], strand: usize, route: &[Complex64], center: Complex64, half: f64) -> LoopPath {
    let entry = *route.last().expect("nonempty route");
    let dir = (entry - center) / (entry - center).norm();
    // corners counterclockwise starting next to the entry point
    let corners: Vec<Complex64> = [1.0, 3.0, 5.0, 7.0, 9.0]
        .iter()
        .map(|k: &f64| center + dir * Complex64::from_polar(half * 2f64.sqrt(), k * PI / 4.0))
        .collect();
    let mut pts = route.to_vec();
    let first_side = center + dir * half;
    pts.push(first_side);
    pts.extend(&corners[..4]);
    pts.push(first_side);
    pts.push(entry);
    let mut pieces = segments(strand, &pts);
    let back: Vec<Complex64> = route.iter().rev().copied().collect();
    pieces.extend(segments(strand, &back));
    LoopPath {
        basepoint: basepoint.to_vec(),
        pieces,
        label: None,
        enclosed: None,
    }
}

/// Geometry of a generator loop: moving strand, enclosed point, radius.
#[derive(Debug, Clone, Copy)]
pub struct LoopGeometry {
    pub strand: usize,
    pub enclosed: Option<Complex64>,
    pub radius: f64,
}

pub fn loop_geometry(
    basepoint: &[Complex64],
    group: &NumericGroup,
    label: &GeneratorSymbol,
) -> Result<LoopGeometry, MonodromyError> {
    let (strand, target) = match *label {
        GeneratorSymbol::Pair { i, j, g } => (i, group.apply(g, basepoint[j - 1])),
        GeneratorSymbol::Point { k, q } => {
            let z = group.finite_exceptional.iter().find(|(p, _)| *p == q).map(|(_, z)| *z);
            if z.is_none() && group.has_infinity != Some(q) {
                return Err(MonodromyError::BadLabel(label.to_string()));
            }
            (k, z)
        }
    };
    let forbidden = group.forbidden(basepoint, strand);
    let q = basepoint[strand - 1];
    let radius = match target {
        Some(w) => {
            let nearest = forbidden
                .iter()
                .filter(|f| (*f - w).norm() > 1e-9)
                .map(|f| (f - w).norm())
                .fold((q - w).norm(), f64::min);
            nearest / 3.0
        }
        None => 2.0 * forbidden.iter().chain([&q]).map(|z| z.norm()).fold(0.0, f64::max) + 1.0,
    };
    Ok(LoopGeometry {
        strand,
        enclosed: target,
        radius,
    })
}

/// Generator loop for `label`: strand `i` around `g·q_j`, or strand `k`
/// around the exceptional point `q`.
pub fn make_loop(basepoint: &[Complex64], group: &NumericGroup, label: &GeneratorSymbol) -> Result<LoopPath, MonodromyError> {
    let geo = loop_geometry(basepoint, group, label)?;
    let q = basepoint[geo.strand - 1];
    let forbidden = group.forbidden(basepoint, geo.strand);
    let mut path = match geo.enclosed {
        Some(w) => {
            let others: Vec<Complex64> = forbidden.iter().copied().filter(|f| (f - w).norm() > 1e-9).collect();
            let entry = w + (q - w) / (q - w).norm() * geo.radius;
            let route = corridor(q, entry, &others, geo.radius.min(0.05))
                .ok_or_else(|| MonodromyError::GeometryFailure(label.to_string()))?;
            lasso(basepoint, geo.strand, &route, w, geo.radius, 2.0 * PI)
        }
        None => {
            let dir = if q.norm() > 0.0 { q / q.norm() } else { Complex64::new(1.0, 0.0) };
            let entry = dir * geo.radius;
            let route = corridor(q, entry, &forbidden, 0.05)
                .ok_or_else(|| MonodromyError::GeometryFailure(label.to_string()))?;
            lasso(basepoint, geo.strand, &route, Complex64::new(0.0, 0.0), geo.radius, -2.0 * PI)
        }
    };
    path.label = Some(*label);
    path.enclosed = geo.enclosed;
    Ok(path)
}

/// Winding numbers of a loop's strand around every finite forbidden point.
pub fn loop_windings(path: &LoopPath, group: &NumericGroup, strand: usize) -> Vec<(Complex64, f64)> {
    group
        .forbidden(&path.basepoint, strand)
        .into_iter()
        .map(|f| (f, path.winding(strand, f)))
        .collect()
}

// ---------------------------------------------------------------------------
// transport

/// Per-step propagator; both are exponentials of Lie elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// `exp(h·A(t_mid))`, second order.
    Midpoint,
    /// `exp(h/2·(A₁ + A₂) + √3/12·h²·[A₂, A₁])` at the two Gauss points,
    /// fourth order.
    Magnus4,
}

impl Scheme {
    pub fn order(&self) -> i32 {
        match self {
            Scheme::Midpoint => 2,
            Scheme::Magnus4 => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Transporter {
    scheme: Scheme,
    omega: ConnectionForm,
    group: NumericGroup,
    /// For every term, its generator index.
    term_index: Vec<usize>,
    num_generators: usize,
    max_degree: usize,
}

impl Transporter {
    pub fn new(group: &FiniteGroupData, presentation: &PresentationData, max_degree: usize) -> Self {
        let omega = build_omega(presentation.n(), group);
        let term_index = omega
            .terms()
            .iter()
            .map(|t| presentation.generator_index(&term_symbol(t, group)).expect("generator of the presentation"))
            .collect();
        Transporter {
            scheme: Scheme::Magnus4,
            omega,
            group: NumericGroup::new(group),
            term_index,
            num_generators: presentation.num_generators(),
            max_degree,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn group(&self) -> &NumericGroup {
        &self.group
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Poles `(generator, position)` seen by strand `m` in configuration `c`.
    fn poles(&self, c: &[Complex64], m: usize) -> Vec<(usize, Complex64)> {
        let mut out = Vec::new();
        for (t, &idx) in self.omega.terms().iter().zip(&self.term_index) {
            if t.strand() != m {
                continue;
            }
            let w = match *t {
                PoleTerm::PointPole { p, .. } => self.group.finite_exceptional.iter().find(|(q, _)| *q == p).map(|(_, z)| *z),
                PoleTerm::PairPole { j, g, .. } => self.group.apply(g, c[j - 1]),
            };
            if let Some(w) = w {
                out.push((idx, w));
            }
        }
        out
    }

    fn difficulty(piece: &PieceKind, poles: &[(usize, Complex64)]) -> f64 {
        let samples = 32;
        let mut total = 0.0;
        for s in 0..samples {
            let t = (s as f64 + 0.5) / samples as f64;
            let z = piece.point(t);
            let dist = poles.iter().map(|(_, w)| (z - w).norm()).fold(f64::INFINITY, f64::min);
            total += piece.derivative(t).norm() / dist.min(1.0);
        }
        total / samples as f64
    }

    /// Steps per piece for a total budget, proportional to `∫ |dz| / dist`
    /// with at least two steps each.
    pub fn allocate(&self, path: &LoopPath, total: usize) -> Vec<usize> {
        let mut config = path.basepoint.clone();
        let mut weights = Vec::new();
        for p in &path.pieces {
            let poles = self.poles(&config, p.strand);
            weights.push(Self::difficulty(&p.kind, &poles).max(1e-12));
            config[p.strand - 1] = p.kind.end();
        }
        let np = weights.len();
        if np == 0 {
            return Vec::new();
        }
        let free = total.saturating_sub(2 * np) as f64;
        let sum: f64 = weights.iter().sum();
        let exact: Vec<f64> = weights.iter().map(|w| free * w / sum).collect();
        let mut alloc: Vec<usize> = exact.iter().map(|x| 2 + x.floor() as usize).collect();
        let mut rest = total.saturating_sub(alloc.iter().sum());
        let mut order: Vec<usize> = (0..np).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for &i in order.iter().cycle().take(np.max(1) * 2) {
            if rest == 0 {
                break;
            }
            alloc[i] += 1;
            rest -= 1;
        }
        alloc
    }

    /// Product of per-step exponentials with the given allocation.
    pub fn raw_transport(&self, path: &LoopPath, alloc: &[usize]) -> DenseSeries {
        let (k, d) = (self.num_generators, self.max_degree);
        let mut f = DenseSeries::one(k, d);
        let mut config = path.basepoint.clone();
        for (p, &steps) in path.pieces.iter().zip(alloc) {
            let poles = self.poles(&config, p.strand);
            let h = 1.0 / steps as f64;
            let value = |t: f64| {
                let z = p.kind.point(t);
                let dz = p.kind.derivative(t) * h;
                let mut v = vec![ZERO; k];
                for &(idx, w) in &poles {
                    v[idx] += dz / (z - w);
                }
                v
            };
            for s in 0..steps {
                let t = (s as f64 + 0.5) * h;
                let step = match self.scheme {
                    Scheme::Midpoint => DenseSeries::exp_degree_one(k, d, &value(t)),
                    Scheme::Magnus4 => {
                        let offset = h * 3f64.sqrt() / 6.0;
                        let a1 = DenseSeries::degree_one(k, d, &value(t - offset));
                        let a2 = DenseSeries::degree_one(k, d, &value(t + offset));
                        let comm = a2.mul(&a1).sub(&a1.mul(&a2));
                        a1.add(&a2).scale(0.5).add(&comm.scale(3f64.sqrt() / 12.0)).exp()
                    }
                };
                f = step.mul(&f);
            }
            config[p.strand - 1] = p.kind.end();
        }
        f
    }

    /// Richardson-extrapolated transport from `steps` and `2·steps`.
    pub fn transport(&self, path: &LoopPath, steps: usize) -> Transport {
        let alloc = self.allocate(path, steps);
        let doubled: Vec<usize> = alloc.iter().map(|s| 2 * s).collect();
        let coarse = self.raw_transport(path, &alloc);
        let fine = self.raw_transport(path, &doubled);
        let estimate = fine.distance(&coarse);
        let r = 2f64.powi(self.scheme.order());
        let series = fine.scale(r / (r - 1.0)).sub(&coarse.scale(1.0 / (r - 1.0)));
        Transport {
            steps,
            error_estimate: estimate,
            series,
        }
    }

    pub fn transport_checked(&self, path: &LoopPath, steps: usize, tolerance: f64) -> Result<Transport, MonodromyError> {
        let t = self.transport(path, steps);
        if t.error_estimate > tolerance {
            return Err(MonodromyError::StepUnderflow {
                estimate: t.error_estimate,
                tolerance,
                steps,
            });
        }
        Ok(t)
    }
}

/// Transport result in the free model.
#[derive(Debug, Clone)]
pub struct Transport {
    pub steps: usize,
    pub error_estimate: f64,
    pub series: DenseSeries,
}

/// Truncated transport with coordinates of `log F` in the quotient basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChenSeries {
    pub max_degree: usize,
    pub steps: usize,
    pub error_estimate: f64,
    pub group_like_defect: f64,
    /// Per degree, `(basis position, [re, im])`.
    pub coordinates: Vec<Vec<(usize, [f64; 2])>>,
}

impl ChenSeries {
    pub fn from_transport(t: &Transport, quotient: &QuotientBasis) -> Result<Self, MonodromyError> {
        let coords = reduce_log(&t.series, quotient)?;
        Ok(ChenSeries {
            max_degree: t.series.max_degree(),
            steps: t.steps,
            error_estimate: t.error_estimate,
            group_like_defect: t.series.group_like_defect(),
            coordinates: coords
                .iter()
                .map(|m| m.iter().map(|(&i, c)| (i, [c.re, c.im])).collect())
                .collect(),
        })
    }
}

/// Quotient coordinates of `log F`.
pub fn reduce_log(f: &DenseSeries, quotient: &QuotientBasis) -> Result<Coordinates<Complex64>, MonodromyError> {
    Ok(quotient.reduce(&f.log().to_tensor())?)
}

fn coordinate_distance(a: &Coordinates<Complex64>, b: &Coordinates<Complex64>) -> f64 {
    let mut best: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        for (i, v) in x {
            best = best.max((v - y.get(i).copied().unwrap_or(ZERO)).norm());
        }
        for (i, v) in y {
            if !x.contains_key(i) {
                best = best.max(v.norm());
            }
        }
    }
    best
}

/// Leading-term verdict of a generator loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeadingTerm {
    /// Fitted `c` in `F₁ ≈ c·X_label`.
    pub coefficient: [f64; 2],
    pub magnitude_error: f64,
    pub phase_error: f64,
    pub off_label: f64,
    /// `+` when `F ≈ 1 + 2iπ X_label`.
    pub sign: char,
    pub pass: bool,
}

pub fn leading_term(coords: &Coordinates<Complex64>, quotient: &QuotientBasis, label: usize) -> LeadingTerm {
    let expected: BTreeMap<usize, f64> = quotient
        .reduce_generator(label)
        .iter()
        .map(|(&i, v)| (i, crate::cyclo::rational_to_f64(v)))
        .collect();
    let observed = &coords[0];
    let norm2: f64 = expected.values().map(|v| v * v).sum();
    let c: Complex64 = expected
        .iter()
        .map(|(i, v)| observed.get(i).copied().unwrap_or(ZERO) * *v)
        .sum::<Complex64>()
        / norm2;
    let mut off: f64 = 0.0;
    for (i, v) in observed {
        off = off.max((v - c * expected.get(i).copied().unwrap_or(0.0)).norm());
    }
    let magnitude_error = (c.norm() - 2.0 * PI).abs() / (2.0 * PI);
    let phase_error = (c.arg().abs() - PI / 2.0).abs();
    LeadingTerm {
        coefficient: [c.re, c.im],
        magnitude_error,
        phase_error,
        off_label: off,
        sign: if c.im >= 0.0 { '+' } else { '-' },
        pass: magnitude_error <= 1e-4 && phase_error <= 1e-4 && off < 1e-4,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopReport {
    pub label: String,
    pub steps: usize,
    pub enclosed: Option<[f64; 2]>,
    pub series: ChenSeries,
    pub defect_doubled: f64,
    /// Rounding level of the doubled run: `(fine steps)·ε·max(1, ‖F‖)²`.
    pub defect_floor: f64,
    pub leading: LeadingTerm,
    pub inverse_error: f64,
    pub sign_convention: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositionReport {
    pub first: String,
    pub second: String,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonodromyReport {
    pub n: usize,
    pub group: String,
    pub max_degree: usize,
    pub basepoint: Vec<[f64; 2]>,
    pub loops: Vec<LoopReport>,
    pub constant_error: f64,
    pub compositions: Vec<CompositionReport>,
}

impl MonodromyReport {
    pub fn max_defect(&self) -> f64 {
        self.loops.iter().map(|l| l.series.group_like_defect).fold(0.0, f64::max)
    }

    /// Loops whose defect strictly decreased when the steps doubled.
    pub fn strict_decreases(&self) -> usize {
        self.loops.iter().filter(|l| l.defect_doubled < l.series.group_like_defect).count()
    }

    /// Every defect either decreased under doubling or both values lie at
    /// the rounding floor.
    pub fn defects_converge(&self) -> bool {
        self.loops.iter().all(|l| {
            l.defect_doubled < l.series.group_like_defect
                || l.series.group_like_defect.max(l.defect_doubled) <= l.defect_floor
        })
    }

    pub fn max_inverse_error(&self) -> f64 {
        self.loops.iter().map(|l| l.inverse_error).fold(self.constant_error, f64::max)
    }

    pub fn max_composition_error(&self) -> f64 {
        self.compositions.iter().map(|c| c.error).fold(0.0, f64::max)
    }

    pub fn leading_pass(&self) -> bool {
        self.loops.iter().all(|l| l.leading.pass)
    }
}

/// Labels of the generator loops `x_{ij}(g)` (`i < j`) and `x_k(q)`.
pub fn generator_labels(presentation: &PresentationData) -> Vec<GeneratorSymbol> {
    presentation.generators().to_vec()
}

/// Transports every generator loop of `(n, G)` and runs the group-likeness,
/// inverse, constant-loop and composition checks.
pub fn monodromy_check(
    n: usize,
    group: &FiniteGroupData,
    max_degree: usize,
    steps: usize,
    seed: u64,
) -> Result<MonodromyReport, MonodromyError> {
    let p = make_presentation(n, group, Variant::P);
    let quotient = graded_quotient(&p, max_degree)?;
    let tr = Transporter::new(group, &p, max_degree);
    let basepoint = make_basepoint(n, tr.group(), seed)?;
    let labels = generator_labels(&p);
    let paths: Vec<LoopPath> = labels
        .iter()
        .map(|l| make_loop(&basepoint, tr.group(), l))
        .collect::<Result<_, _>>()?;

    let loops: Vec<LoopReport> = paths
        .par_iter()
        .zip(&labels)
        .map(|(path, label)| {
            let t = tr.transport(path, steps);
            let t2 = tr.transport(path, 2 * steps);
            let inv = tr.transport(&path.inverse(), steps);
            let series = ChenSeries::from_transport(&t, &quotient)?;
            let coords = reduce_log(&t.series, &quotient)?;
            let idx = p.generator_index(label).expect("label is a generator");
            let leading = leading_term(&coords, &quotient, idx);
            let one = DenseSeries::one(t.series.num_generators(), max_degree);
            let size = t2.series.max_abs().max(1.0);
            Ok(LoopReport {
                label: label.to_string(),
                steps,
                enclosed: path.enclosed.map(|z| [z.re, z.im]),
                series,
                defect_doubled: t2.series.group_like_defect(),
                defect_floor: (4 * steps) as f64 * f64::EPSILON * size * size,
                leading,
                inverse_error: inv.series.mul(&t.series).distance(&one),
                sign_convention: "counterclockwise in the chart (clockwise for ∞); F ≈ 1 + 2iπX".into(),
            })
        })
        .collect::<Result<_, MonodromyError>>()?;

    let constant = tr.transport(&LoopPath::constant(basepoint.clone()), steps);
    let one = DenseSeries::one(p.num_generators(), max_degree);
    let constant_error = constant.series.distance(&one);

    let pairs: Vec<(usize, usize)> = (0..paths.len()).map(|a| (a, (a + 1) % paths.len())).collect();
    let compositions = pairs
        .par_iter()
        .map(|&(a, b)| {
            let joint = tr.transport(&paths[a].then(&paths[b]), 2 * steps);
            let fa = tr.transport(&paths[a], steps);
            let fb = tr.transport(&paths[b], steps);
            CompositionReport {
                first: labels[a].to_string(),
                second: labels[b].to_string(),
                error: joint.series.distance(&fb.series.mul(&fa.series)),
            }
        })
        .collect();

    Ok(MonodromyReport {
        n,
        group: group.kind().to_string(),
        max_degree,
        basepoint: basepoint.iter().map(|z| [z.re, z.im]).collect(),
        loops,
        constant_error,
        compositions,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomotopyVerdict {
    pub expected_equal: bool,
    pub distance: f64,
    pub tolerance: f64,
    pub consistent: bool,
}

fn compare_transports(
    tr: &Transporter,
    quotient: &QuotientBasis,
    a: &LoopPath,
    b: &LoopPath,
    steps: usize,
    expected_equal: bool,
) -> Result<HomotopyVerdict, MonodromyError> {
    let ta = tr.transport(a, steps);
    let tb = tr.transport(b, steps);
    let distance = coordinate_distance(&reduce_log(&ta.series, quotient)?, &reduce_log(&tb.series, quotient)?);
    let tolerance = (10.0 * (ta.error_estimate + tb.error_estimate)).max(1e-9);
    let consistent = if expected_equal { distance <= tolerance } else { distance > tolerance };
    Ok(HomotopyVerdict {
        expected_equal,
        distance,
        tolerance,
        consistent,
    })
}

/// Compares two discretizations of one loop (e.g. circle vs square around
/// the same point). Agreement is expected when `a·b⁻¹` winds zero times
/// around every forbidden point of the strand.
pub fn homotopy_invariance_check(
    tr: &Transporter,
    quotient: &QuotientBasis,
    a: &LoopPath,
    b: &LoopPath,
    strand: usize,
    steps: usize,
) -> Result<HomotopyVerdict, MonodromyError> {
    let diff = a.then(&b.inverse());
    let expected = loop_windings(&diff, tr.group(), strand).iter().all(|(_, w)| w.abs() < 0.5);
    compare_transports(tr, quotient, a, b, steps, expected)
}

/// Winding number of a closed polyline around `w`.
pub fn polyline_winding(points: &[Complex64], w: Complex64) -> f64 {
    let mut total = 0.0;
    for s in points.windows(2) {
        total += ((s[1] - w) / (s[0] - w)).arg();
    }
    total / (2.0 * PI)
}

/// Two lassos around the same circle reached through different simple
/// routes. They are homotopic exactly when the closed polyline formed by
/// the first route and the reversed second one encloses no forbidden
/// point (for routes that only meet at their ends).
#[allow(clippy::too_many_arguments)]
pub fn route_homotopy_check(
    tr: &Transporter,
    quotient: &QuotientBasis,
    basepoint: &[Complex64],
    strand: usize,
    route_a: &[Complex64],
    route_b: &[Complex64],
    center: Complex64,
    radius: f64,
    steps: usize,
) -> Result<HomotopyVerdict, MonodromyError> {
    let mut closed = route_a.to_vec();
    closed.extend(route_b.iter().rev().skip(1));
    let expected = tr
        .group()
        .forbidden(basepoint, strand)
        .into_iter()
        .all(|f| polyline_winding(&closed, f).abs() < 0.5);
    let a = lasso(basepoint, strand, route_a, center, radius, 2.0 * PI);
    let b = lasso(basepoint, strand, route_b, center, radius, 2.0 * PI);
    compare_transports(tr, quotient, &a, &b, steps, expected)
}

// ---------------------------------------------------------------------------
// BCH

/// `log(exp(x)·exp(y))` truncated at the common degree, projected onto Lie
/// elements.
pub fn bch(x: &GradedTensor<BigRational>, y: &GradedTensor<BigRational>) -> GradedTensor<BigRational> {
    let z = x.exp().tensor_mul(&y.exp()).expect("same basis").log();
    dynkin_projection(&z)
}

/// Whether every homogeneous part is fixed by the Dynkin projection.
pub fn is_lie_element(x: &GradedTensor<BigRational>) -> bool {
    x.constant_term() == BigRational::from_integer(0.into()) && dynkin_projection(x) == *x
}
