//! Finite rotation groups acting on P¹ by homographies.
//!
//! Matrix model: every group is generated by SU(2) matrices with entries in a
//! single cyclotomic field, so that fixed points can be found exactly from
//! eigenvalues that are roots of unity.
//!
//! | kind          | generators                                         | field      |
//! |---------------|----------------------------------------------------|------------|
//! | cyclic N      | z ↦ ζ_N z                                          | lcm(4, 2N) |
//! | dihedral N    | z ↦ ζ_N z, z ↦ 1/z                                 | lcm(4, 2N) |
//! | tetrahedral   | z ↦ −z, z ↦ (z+i)/(z−i)                            | 24         |
//! | octahedral    | tetrahedral plus z ↦ iz                            | 24         |
//! | icosahedral   | z ↦ ε z, Klein's involution with ε = ζ₅            | 60         |

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cyclo::CycloNum;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoebiusError {
    #[error("unsupported group parameters: {0}")]
    UnsupportedParams(String),
    #[error("the identity fixes every point")]
    IdentityElement,
    #[error("singular matrix")]
    Singular,
    #[error("eigenvalues of {0} are not roots of unity in the working field")]
    NoExactEigenvalue(String),
    #[error("point [0:0] is not in P¹")]
    ZeroPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    Cyclic(u32),
    Dihedral(u32),
    Tetrahedral,
    Octahedral,
    Icosahedral,
}

impl GroupKind {
    /// Builds a kind from its name and the `N` parameter (ignored by the
    /// exceptional groups).
    pub fn from_name(name: &str, n: Option<u32>) -> Result<Self, MoebiusError> {
        let need_n = || {
            n.filter(|&n| n >= 2)
                .ok_or_else(|| MoebiusError::UnsupportedParams(format!("{name} needs N ≥ 2")))
        };
        match name {
            "cyclic" => Ok(GroupKind::Cyclic(need_n()?)),
            "dihedral" => Ok(GroupKind::Dihedral(need_n()?)),
            "tetrahedral" => Ok(GroupKind::Tetrahedral),
            "octahedral" => Ok(GroupKind::Octahedral),
            "icosahedral" => Ok(GroupKind::Icosahedral),
            other => Err(MoebiusError::UnsupportedParams(format!("unknown group kind `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GroupKind::Cyclic(_) => "cyclic",
            GroupKind::Dihedral(_) => "dihedral",
            GroupKind::Tetrahedral => "tetrahedral",
            GroupKind::Octahedral => "octahedral",
            GroupKind::Icosahedral => "icosahedral",
        }
    }

    pub fn classical_order(&self) -> usize {
        match *self {
            GroupKind::Cyclic(n) => n as usize,
            GroupKind::Dihedral(n) => 2 * n as usize,
            GroupKind::Tetrahedral => 12,
            GroupKind::Octahedral => 24,
            GroupKind::Icosahedral => 60,
        }
    }

    pub fn field_order(&self) -> u32 {
        match *self {
            GroupKind::Cyclic(n) | GroupKind::Dihedral(n) => 4u32.lcm(&(2 * n)),
            GroupKind::Tetrahedral | GroupKind::Octahedral => 24,
            GroupKind::Icosahedral => 60,
        }
    }

    pub fn validate(&self) -> Result<(), MoebiusError> {
        match *self {
            GroupKind::Cyclic(n) | GroupKind::Dihedral(n) if !(2..=180).contains(&n) => Err(
                MoebiusError::UnsupportedParams(format!("{} N={n}: N must lie in 2..=180", self.name())),
            ),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKind::Cyclic(n) => write!(f, "C{n}"),
            GroupKind::Dihedral(n) => write!(f, "D{n}"),
            GroupKind::Tetrahedral => write!(f, "A4"),
            GroupKind::Octahedral => write!(f, "S4"),
            GroupKind::Icosahedral => write!(f, "A5"),
        }
    }
}

impl FromStr for GroupKind {
    type Err = MoebiusError;

    /// Short names `C3`, `D5`, `A4`, `S4`, `A5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MoebiusError::UnsupportedParams(format!("cannot parse group `{s}`"));
        match s {
            "A4" => Ok(GroupKind::Tetrahedral),
            "S4" => Ok(GroupKind::Octahedral),
            "A5" => Ok(GroupKind::Icosahedral),
            _ => {
                let (head, tail) = s.split_at(1.min(s.len()));
                let n: u32 = tail.parse().map_err(|_| bad())?;
                match head {
                    "C" => GroupKind::from_name("cyclic", Some(n)),
                    "D" => GroupKind::from_name("dihedral", Some(n)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

/// A point `[a:b]` of P¹, stored as `[z:1]` or `[1:0]`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ProjPoint {
    a: CycloNum,
    b: CycloNum,
}

impl ProjPoint {
    pub fn new(a: CycloNum, b: CycloNum) -> Result<Self, MoebiusError> {
        let order = a.order();
        if b.is_zero() {
            if a.is_zero() {
                return Err(MoebiusError::ZeroPoint);
            }
            return Ok(Self::infinity(order));
        }
        let z = a.checked_div(&b).expect("b is nonzero");
        Ok(ProjPoint { a: z, b: CycloNum::one(order) })
    }

    pub fn finite(z: CycloNum) -> Self {
        let order = z.order();
        ProjPoint { a: z, b: CycloNum::one(order) }
    }

    pub fn infinity(order: u32) -> Self {
        ProjPoint {
            a: CycloNum::one(order),
            b: CycloNum::zero(order),
        }
    }

    pub fn is_infinity(&self) -> bool {
        self.b.is_zero()
    }

    /// The chart coordinate, `None` at ∞.
    pub fn affine(&self) -> Option<&CycloNum> {
        (!self.is_infinity()).then_some(&self.a)
    }

    pub fn coords(&self) -> (&CycloNum, &CycloNum) {
        (&self.a, &self.b)
    }

    pub fn embed(&self) -> Option<Complex64> {
        self.affine().map(|z| z.embed())
    }

    pub fn order(&self) -> u32 {
        self.a.order()
    }
}

impl fmt::Display for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.affine() {
            Some(z) => write!(f, "{z}"),
            None => write!(f, "∞"),
        }
    }
}

impl fmt::Debug for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self)
    }
}

/// The antipodal involution `z ↦ −1/z̄`, i.e. `[a:b] ↦ [−b̄ : ā]`.
pub fn antipode(p: &ProjPoint) -> ProjPoint {
    let (a, b) = p.coords();
    ProjPoint::new(-b.conj(), a.conj()).expect("antipode of a point is a point")
}

/// A homography `z ↦ (az+b)/(cz+d)`.
///
/// `entries` is the projective representative whose first nonzero entry is
/// 1; `lift`, when known, is a determinant-one representative used to find
/// eigenvalues exactly.
#[derive(Clone)]
pub struct MoebiusMap {
    entries: [CycloNum; 4],
    lift: Option<[CycloNum; 4]>,
}

impl PartialEq for MoebiusMap {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Eq for MoebiusMap {}

impl std::hash::Hash for MoebiusMap {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.entries.hash(state)
    }
}

fn det(m: &[CycloNum; 4]) -> CycloNum {
    &(&m[0] * &m[3]) - &(&m[1] * &m[2])
}

fn mat_mul(x: &[CycloNum; 4], y: &[CycloNum; 4]) -> [CycloNum; 4] {
    [
        &(&x[0] * &y[0]) + &(&x[1] * &y[2]),
        &(&x[0] * &y[1]) + &(&x[1] * &y[3]),
        &(&x[2] * &y[0]) + &(&x[3] * &y[2]),
        &(&x[2] * &y[1]) + &(&x[3] * &y[3]),
    ]
}

fn normalize_matrix(m: &[CycloNum; 4]) -> [CycloNum; 4] {
    let lead = m.iter().find(|e| !e.is_zero()).expect("nonzero matrix");
    let inv = lead.inv().expect("nonzero lead");
    [&m[0] * &inv, &m[1] * &inv, &m[2] * &inv, &m[3] * &inv]
}

impl MoebiusMap {
    /// Any invertible matrix; no exact eigenvalue data is attached.
    pub fn from_matrix(m: [CycloNum; 4]) -> Result<Self, MoebiusError> {
        if det(&m).is_zero() {
            return Err(MoebiusError::Singular);
        }
        Ok(MoebiusMap {
            entries: normalize_matrix(&m),
            lift: None,
        })
    }

    /// A determinant-one matrix.
    pub fn from_special(m: [CycloNum; 4]) -> Result<Self, MoebiusError> {
        if !det(&m).is_one() {
            return Err(MoebiusError::UnsupportedParams("determinant is not 1".into()));
        }
        Ok(MoebiusMap {
            entries: normalize_matrix(&m),
            lift: Some(m),
        })
    }

    pub fn identity(order: u32) -> Self {
        let one = CycloNum::one(order);
        let zero = CycloNum::zero(order);
        let m = [one.clone(), zero.clone(), zero, one];
        MoebiusMap {
            entries: m.clone(),
            lift: Some(m),
        }
    }

    pub fn entries(&self) -> &[CycloNum; 4] {
        &self.entries
    }

    pub fn lift(&self) -> Option<&[CycloNum; 4]> {
        self.lift.as_ref()
    }

    pub fn order(&self) -> u32 {
        self.entries[0].order()
    }

    pub fn is_identity(&self) -> bool {
        self.entries[0].is_one()
            && self.entries[1].is_zero()
            && self.entries[2].is_zero()
            && self.entries[3].is_one()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        let lift = match (&self.lift, &other.lift) {
            (Some(x), Some(y)) => Some(mat_mul(x, y)),
            _ => None,
        };
        MoebiusMap {
            entries: normalize_matrix(&mat_mul(&self.entries, &other.entries)),
            lift,
        }
    }

    pub fn inverse(&self) -> Self {
        let adj = |m: &[CycloNum; 4]| [m[3].clone(), -&m[1], -&m[2], m[0].clone()];
        MoebiusMap {
            entries: normalize_matrix(&adj(&self.entries)),
            lift: self.lift.as_ref().map(adj),
        }
    }

    pub fn apply(&self, p: &ProjPoint) -> ProjPoint {
        let [a, b, c, d] = &self.entries;
        let (x, y) = p.coords();
        ProjPoint::new(&(a * x) + &(b * y), &(c * x) + &(d * y)).expect("invertible map")
    }

    /// Image of a finite chart point, `None` when it lands on ∞.
    pub fn apply_affine(&self, z: &CycloNum) -> Option<CycloNum> {
        let [a, b, c, d] = &self.entries;
        let den = &(c * z) + d;
        if den.is_zero() {
            None
        } else {
            Some((&(a * z) + b).checked_div(&den).expect("nonzero"))
        }
    }

    /// Complex embedding of the normalized matrix.
    pub fn embed(&self) -> [Complex64; 4] {
        [0, 1, 2, 3].map(|k| self.entries[k].embed())
    }

    /// `M·M*` is scalar.
    pub fn is_unitary_up_to_scale(&self) -> bool {
        let m = &self.entries;
        let star = [m[0].conj(), m[2].conj(), m[1].conj(), m[3].conj()];
        let p = mat_mul(m, &star);
        p[1].is_zero() && p[2].is_zero() && p[0] == p[3]
    }

    /// The two fixed points, found from an exact eigenvalue `ν` with
    /// `ν + ν⁻¹ = tr` searched among the roots of unity of the field.
    pub fn fixed_points(&self) -> Result<[ProjPoint; 2], MoebiusError> {
        if self.is_identity() {
            return Err(MoebiusError::IdentityElement);
        }
        let lift = self
            .lift
            .as_ref()
            .ok_or_else(|| MoebiusError::NoExactEigenvalue(self.to_string()))?;
        let order = self.order();
        let trace = &lift[0] + &lift[3];
        let k = (0..order as i64)
            .find(|&k| CycloNum::zeta_pow(order, k) + CycloNum::zeta_pow(order, -k) == trace)
            .ok_or_else(|| MoebiusError::NoExactEigenvalue(self.to_string()))?;
        let nu = CycloNum::zeta_pow(order, k);
        let nu_inv = CycloNum::zeta_pow(order, -k);
        if nu == nu_inv {
            return Err(MoebiusError::IdentityElement);
        }
        let [a, b, c, d] = lift;
        let eigvec = |lambda: &CycloNum| {
            if !b.is_zero() {
                ProjPoint::new(b.clone(), lambda - a)
            } else if lambda != d || !c.is_zero() {
                ProjPoint::new(lambda - d, c.clone())
            } else {
                ProjPoint::new(CycloNum::zero(order), CycloNum::one(order))
            }
            .expect("nonscalar matrix has an eigenvector")
        };
        Ok([eigvec(&nu), eigvec(&nu_inv)])
    }
}

impl fmt::Display for MoebiusMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.entries;
        write!(f, "[{}, {}; {}, {}]", e[0], e[1], e[2], e[3])
    }
}

impl fmt::Debug for MoebiusMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn zeta(order: u32, num: u32, den: u32) -> CycloNum {
    // exp(2πi·num/den) inside Q(ζ_order)
    assert_eq!(order % den, 0);
    CycloNum::zeta_pow(order, (num * (order / den)) as i64)
}

fn diag(x: CycloNum) -> [CycloNum; 4] {
    let order = x.order();
    let y = x.inv().expect("unit");
    [x, CycloNum::zero(order), CycloNum::zero(order), y]
}

fn generators(kind: GroupKind) -> Vec<MoebiusMap> {
    let m = kind.field_order();
    let zero = || CycloNum::zero(m);
    let i = zeta(m, 1, 4);
    let special = |x: [CycloNum; 4]| MoebiusMap::from_special(x).expect("determinant one");
    match kind {
        GroupKind::Cyclic(n) => vec![special(diag(zeta(m, 1, 2 * n)))],
        GroupKind::Dihedral(n) => vec![
            special(diag(zeta(m, 1, 2 * n))),
            special([zero(), i.clone(), i, zero()]),
        ],
        GroupKind::Tetrahedral | GroupKind::Octahedral => {
            let z8 = zeta(m, 1, 8);
            let sqrt2 = &z8 + &z8.inv().expect("unit");
            let s = z8.checked_div(&sqrt2).expect("nonzero");
            let t = [s.clone(), &s * &i, s.clone(), -&(&s * &i)];
            let mut gens = vec![special(diag(i.clone())), special(t)];
            if kind == GroupKind::Octahedral {
                gens.push(special(diag(z8)));
            }
            gens
        }
        GroupKind::Icosahedral => {
            let e = |k: u32| zeta(m, k, 5);
            let sqrt5 = &(&e(1) - &e(2)) - &(&e(3) - &e(4));
            let inv5 = sqrt5.inv().expect("nonzero");
            let a = &(&e(1) - &e(4)) * &inv5;
            let b = &(&e(2) - &e(3)) * &inv5;
            vec![special(diag(zeta(m, 1, 10))), special([-&a, b.clone(), b, a])]
        }
    }
}

/// One row of the exceptional-point table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionalRow {
    pub index: usize,
    pub point: String,
    pub orbit: usize,
    pub stabilizer_order: usize,
    pub antipode: usize,
    pub in_p: bool,
}

/// A finite subgroup of PSU(2) with its multiplication table and
/// exceptional-point data.
#[derive(Debug, Clone)]
pub struct FiniteGroupData {
    kind: GroupKind,
    elements: Vec<MoebiusMap>,
    mul: Vec<Vec<usize>>,
    inv: Vec<usize>,
    exceptional: Vec<ProjPoint>,
    point_index: HashMap<ProjPoint, usize>,
    fixed: Vec<Option<[usize; 2]>>,
    action: Vec<Vec<usize>>,
    antipode_of: Vec<usize>,
    p_half: Vec<usize>,
    stabilizers: Vec<Vec<usize>>,
    orbit_of: Vec<usize>,
    orbits: Vec<Vec<usize>>,
    generators: Vec<usize>,
}

/// Enumerates the group from its standard generators.
pub fn build_group(kind: GroupKind) -> Result<FiniteGroupData, MoebiusError> {
    kind.validate()?;
    let m = kind.field_order();
    let gens = generators(kind);

    // breadth-first closure; parent[x] = (generator, y) with x = gen ∘ y
    let mut elements = vec![MoebiusMap::identity(m)];
    let mut index: HashMap<MoebiusMap, usize> = HashMap::from([(elements[0].clone(), 0)]);
    let mut parent: Vec<Option<(usize, usize)>> = vec![None];
    let mut left: Vec<Vec<usize>> = vec![Vec::new(); gens.len()];
    let mut queue = VecDeque::from([0usize]);
    while let Some(x) = queue.pop_front() {
        for (s, gen) in gens.iter().enumerate() {
            let y = gen.compose(&elements[x]);
            let idx = match index.get(&y) {
                Some(&idx) => idx,
                None => {
                    let idx = elements.len();
                    index.insert(y.clone(), idx);
                    elements.push(y);
                    parent.push(Some((s, x)));
                    queue.push_back(idx);
                    idx
                }
            };
            if left[s].len() <= x {
                left[s].resize(x + 1, usize::MAX);
            }
            left[s][x] = idx;
        }
        if elements.len() > kind.classical_order() {
            return Err(MoebiusError::UnsupportedParams(format!(
                "generators of {kind} produced more than {} elements",
                kind.classical_order()
            )));
        }
    }
    let order = elements.len();

    // g ∘ h = s ∘ (parent(g) ∘ h), filled in breadth-first order
    let mut mul = vec![vec![0usize; order]; order];
    mul[0] = (0..order).collect();
    for g in 1..order {
        let (s, p) = parent[g].expect("non-identity elements have a parent");
        for h in 0..order {
            mul[g][h] = left[s][mul[p][h]];
        }
    }
    let inv: Vec<usize> = (0..order)
        .map(|g| (0..order).find(|&h| mul[g][h] == 0).expect("group element has an inverse"))
        .collect();

    // exceptional locus as the union of fixed-point pairs
    let mut exceptional_set: HashMap<ProjPoint, ()> = HashMap::new();
    let mut raw_fixed: Vec<Option<[ProjPoint; 2]>> = vec![None];
    for g in &elements[1..] {
        let pair = g.fixed_points()?;
        for p in &pair {
            exceptional_set.insert(p.clone(), ());
        }
        raw_fixed.push(Some(pair));
    }
    let mut exceptional: Vec<ProjPoint> = exceptional_set.into_keys().collect();
    exceptional.sort_by_cached_key(|p| (p.is_infinity(), p.to_string()));
    let point_index: HashMap<ProjPoint, usize> =
        exceptional.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
    let fixed: Vec<Option<[usize; 2]>> = raw_fixed
        .iter()
        .map(|f| f.as_ref().map(|[p, q]| [point_index[p], point_index[q]]))
        .collect();

    // action on exceptional points through the generator words
    let gen_action: Vec<Vec<usize>> = gens
        .iter()
        .map(|gen| {
            exceptional
                .iter()
                .map(|p| point_index[&gen.apply(p)])
                .collect()
        })
        .collect();
    let mut action = vec![(0..exceptional.len()).collect::<Vec<_>>(); order];
    for g in 1..order {
        let (s, p) = parent[g].expect("parent");
        action[g] = action[p].iter().map(|&q| gen_action[s][q]).collect();
    }

    let antipode_of: Vec<usize> = exceptional.iter().map(|p| point_index[&antipode(p)]).collect();
    let texts: Vec<String> = exceptional.iter().map(|p| p.to_string()).collect();
    let p_half: Vec<usize> = (0..exceptional.len())
        .filter(|&q| texts[q] < texts[antipode_of[q]])
        .collect();

    let mut stabilizers = vec![vec![0usize]; exceptional.len()];
    for (g, f) in fixed.iter().enumerate() {
        if let Some([p, q]) = f {
            stabilizers[*p].push(g);
            stabilizers[*q].push(g);
        }
    }

    let mut orbit_of = vec![usize::MAX; exceptional.len()];
    let mut orbits = Vec::new();
    for start in 0..exceptional.len() {
        if orbit_of[start] != usize::MAX {
            continue;
        }
        let id = orbits.len();
        let mut members: Vec<usize> = (0..order).map(|g| action[g][start]).collect();
        members.sort_unstable();
        members.dedup();
        for &q in &members {
            orbit_of[q] = id;
        }
        orbits.push(members);
    }

    let generators = (0..gens.len()).map(|s| left[s][0]).collect();

    Ok(FiniteGroupData {
        kind,
        generators,
        elements,
        mul,
        inv,
        exceptional,
        point_index,
        fixed,
        action,
        antipode_of,
        p_half,
        stabilizers,
        orbit_of,
        orbits,
    })
}

impl FiniteGroupData {
    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn field_order(&self) -> u32 {
        self.kind.field_order()
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn elements(&self) -> &[MoebiusMap] {
        &self.elements
    }

    /// Indices of the standard generators.
    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn element(&self, g: usize) -> &MoebiusMap {
        &self.elements[g]
    }

    /// Index of `g ∘ h`.
    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.mul[g][h]
    }

    pub fn inv(&self, g: usize) -> usize {
        self.inv[g]
    }

    pub fn element_order(&self, g: usize) -> usize {
        let mut x = g;
        let mut k = 1;
        while x != 0 {
            x = self.mul[g][x];
            k += 1;
        }
        k
    }

    pub fn exceptional(&self) -> &[ProjPoint] {
        &self.exceptional
    }

    pub fn num_exceptional(&self) -> usize {
        self.exceptional.len()
    }

    pub fn point_index(&self, p: &ProjPoint) -> Option<usize> {
        self.point_index.get(p).copied()
    }

    /// Fixed points of a non-identity element, as exceptional indices.
    pub fn fixed(&self, g: usize) -> Option<[usize; 2]> {
        self.fixed[g]
    }

    /// Index of `g·q` for an exceptional point `q`.
    pub fn act(&self, g: usize, q: usize) -> usize {
        self.action[g][q]
    }

    pub fn antipode_of(&self, q: usize) -> usize {
        self.antipode_of[q]
    }

    /// The chosen half 𝔭 of the exceptional locus.
    pub fn p_half(&self) -> &[usize] {
        &self.p_half
    }

    pub fn in_p(&self, q: usize) -> bool {
        self.p_half.binary_search(&q).is_ok()
    }

    pub fn stabilizer(&self, q: usize) -> &[usize] {
        &self.stabilizers[q]
    }

    pub fn orbit_of(&self, q: usize) -> usize {
        self.orbit_of[q]
    }

    pub fn orbits(&self) -> &[Vec<usize>] {
        &self.orbits
    }

    /// `Σ_{p ∈ 𝔭} (|stab(p)| − 1)`, which equals `|G| − 1`.
    pub fn partition_sum(&self) -> usize {
        self.p_half.iter().map(|&q| self.stabilizers[q].len() - 1).sum()
    }

    /// Some element generating the stabilizer of `q`, if it is cyclic.
    pub fn stabilizer_generator(&self, q: usize) -> Option<usize> {
        let stab = &self.stabilizers[q];
        stab.iter().copied().find(|&g| self.element_order(g) == stab.len())
    }

    pub fn exceptional_table(&self) -> Vec<ExceptionalRow> {
        (0..self.exceptional.len())
            .map(|q| ExceptionalRow {
                index: q,
                point: self.exceptional[q].to_string(),
                orbit: self.orbit_of[q],
                stabilizer_order: self.stabilizers[q].len(),
                antipode: self.antipode_of[q],
                in_p: self.in_p(q),
            })
            .collect()
    }

    /// Checks every structural invariant; returns the names of failed ones.
    pub fn verify(&self) -> Vec<String> {
        let mut failed = Vec::new();
        let n = self.order();
        let mut check = |ok: bool, name: &str| {
            if !ok {
                failed.push(name.to_string());
            }
        };
        check(n == self.kind.classical_order(), "classical order");
        check(self.elements[0].is_identity(), "identity first");
        check(
            (0..n).all(|g| self.mul[0][g] == g && self.mul[g][0] == g),
            "identity law",
        );
        check(
            (0..n).all(|g| self.mul[g][self.inv[g]] == 0 && self.mul[self.inv[g]][g] == 0),
            "two-sided inverses",
        );
        check(
            (0..n).all(|a| (0..n).all(|b| (0..n).all(|c| self.mul[self.mul[a][b]][c] == self.mul[a][self.mul[b][c]]))),
            "associativity",
        );
        check(
            self.elements.iter().all(|g| g.is_unitary_up_to_scale()),
            "PSU(2) membership",
        );
        check(
            (1..n).all(|g| match self.fixed[g] {
                Some([p, q]) => p != q && self.antipode_of[p] == q,
                None => false,
            }),
            "fixed points form an antipodal pair",
        );
        let m = self.exceptional.len();
        check(
            (0..m).all(|q| self.antipode_of[self.antipode_of[q]] == q && self.antipode_of[q] != q),
            "antipode is a fixed-point-free involution",
        );
        check(
            (0..m).all(|q| self.in_p(q) != self.in_p(self.antipode_of[q])),
            "𝔭 and at(𝔭) partition the locus",
        );
        let mut covered = vec![0usize; n];
        for &q in &self.p_half {
            for &g in &self.stabilizers[q][1..] {
                covered[g] += 1;
            }
        }
        check(covered[1..].iter().all(|&c| c == 1), "stabilizers partition G∖{1}");
        check(self.partition_sum() == n - 1, "partition sum");
        check(
            (0..m).all(|q| self.orbits[self.orbit_of[q]].len() * self.stabilizers[q].len() == n),
            "orbit-stabilizer",
        );
        check(
            (0..m).all(|q| self.stabilizer_generator(q).is_some()),
            "cyclic stabilizers",
        );
        failed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_kinds() -> Vec<GroupKind> {
        vec![
            GroupKind::Cyclic(2),
            GroupKind::Cyclic(3),
            GroupKind::Cyclic(5),
            GroupKind::Dihedral(2),
            GroupKind::Dihedral(3),
            GroupKind::Dihedral(4),
            GroupKind::Tetrahedral,
            GroupKind::Octahedral,
            GroupKind::Icosahedral,
        ]
    }

    #[test]
    fn orders_and_exceptional_counts() {
        for kind in all_kinds() {
            let g = build_group(kind).unwrap();
            assert_eq!(g.order(), kind.classical_order(), "{kind}");
            let expected = match kind {
                GroupKind::Cyclic(_) => 2,
                GroupKind::Dihedral(n) => 2 * n as usize + 2,
                GroupKind::Tetrahedral => 14,
                GroupKind::Octahedral => 26,
                GroupKind::Icosahedral => 62,
            };
            assert_eq!(g.num_exceptional(), expected, "{kind}");
            assert_eq!(g.verify(), Vec::<String>::new(), "{kind}");
        }
    }

    #[test]
    fn exceptional_count_matches_float_oracle() {
        // independent count: numeric eigenvectors of the embedded matrices
        for kind in all_kinds() {
            let g = build_group(kind).unwrap();
            let mut pts: Vec<Complex64> = Vec::new();
            let mut has_inf = false;
            for el in &g.elements()[1..] {
                let [a, b, c, d] = el.embed();
                if c.norm() < 1e-12 {
                    has_inf = true;
                    pts.push(b / (d - a));
                    continue;
                }
                let disc = ((d - a) * (d - a) + 4.0 * b * c).sqrt();
                for s in [1.0, -1.0] {
                    pts.push(((a - d) + s * disc) / (2.0 * c));
                }
            }
            let mut distinct: Vec<Complex64> = Vec::new();
            for p in pts {
                if !distinct.iter().any(|q| (q - p).norm() < 1e-9) {
                    distinct.push(p);
                }
            }
            assert_eq!(distinct.len() + has_inf as usize, g.num_exceptional(), "{kind}");
        }
    }

    #[test]
    fn apply_examples() {
        let m = 4;
        let id = MoebiusMap::identity(m);
        let five = ProjPoint::finite(CycloNum::from_int(m, 5));
        assert_eq!(id.apply(&five), five);
        let neg = MoebiusMap::from_matrix([
            CycloNum::from_int(m, -1),
            CycloNum::zero(m),
            CycloNum::zero(m),
            CycloNum::one(m),
        ])
        .unwrap();
        assert_eq!(
            neg.apply(&ProjPoint::finite(CycloNum::one(m))),
            ProjPoint::finite(CycloNum::from_int(m, -1))
        );
        let rot = MoebiusMap::from_matrix([
            CycloNum::zeta_pow(12, 4),
            CycloNum::zero(12),
            CycloNum::zero(12),
            CycloNum::one(12),
        ])
        .unwrap();
        assert!(rot.apply(&ProjPoint::infinity(12)).is_infinity());
    }

    #[test]
    fn antipode_examples() {
        let m = 8;
        let one = ProjPoint::finite(CycloNum::one(m));
        assert_eq!(antipode(&one), ProjPoint::finite(CycloNum::from_int(m, -1)));
        let zero = ProjPoint::finite(CycloNum::zero(m));
        assert!(antipode(&zero).is_infinity());
        let p = ProjPoint::finite(&CycloNum::zeta_pow(m, 1) + &CycloNum::from_frac(m, 2, 3));
        assert_eq!(antipode(&antipode(&p)), p);
        assert_ne!(antipode(&p), p);
    }

    #[test]
    fn fixed_points_of_rotations() {
        let c2 = build_group(GroupKind::Cyclic(2)).unwrap();
        let pts = c2.element(1).fixed_points().unwrap();
        let texts: Vec<String> = pts.iter().map(|p| p.to_string()).collect();
        assert!(texts.contains(&"0".to_string()) && texts.contains(&"∞".to_string()));
        assert_eq!(c2.exceptional().iter().map(|p| p.to_string()).collect::<Vec<_>>(), ["0", "∞"]);
        assert_eq!(c2.p_half(), &[0]);
        assert!(matches!(
            c2.element(0).fixed_points(),
            Err(MoebiusError::IdentityElement)
        ));
        let c3 = build_group(GroupKind::Cyclic(3)).unwrap();
        assert_eq!(c3.stabilizer(0).len(), 3);
    }

    #[test]
    fn tetrahedral_involutions() {
        let g = build_group(GroupKind::Tetrahedral).unwrap();
        let mut involutions = 0;
        for idx in 1..g.order() {
            if g.element_order(idx) == 2 {
                involutions += 1;
                let [p, q] = g.element(idx).fixed_points().unwrap();
                assert_eq!(antipode(&p), q);
                assert_eq!(g.element(idx).apply(&p), p);
                assert_eq!(g.element(idx).apply(&q), q);
            }
        }
        assert_eq!(involutions, 3);
        let stab_orders: Vec<usize> = g.p_half().iter().map(|&q| g.stabilizer(q).len()).collect();
        assert_eq!(stab_orders.iter().filter(|&&s| s == 3).count(), 4);
        assert_eq!(stab_orders.iter().filter(|&&s| s == 2).count(), 3);
        assert_eq!(g.partition_sum(), 11);
    }

    #[test]
    fn dihedral_partition() {
        let g = build_group(GroupKind::Dihedral(3)).unwrap();
        assert_eq!(g.num_exceptional(), 8);
        assert_eq!(g.partition_sum(), 5);
    }

    #[test]
    fn parsing_kinds() {
        assert_eq!("C4".parse::<GroupKind>().unwrap(), GroupKind::Cyclic(4));
        assert_eq!("D3".parse::<GroupKind>().unwrap(), GroupKind::Dihedral(3));
        assert_eq!("A5".parse::<GroupKind>().unwrap(), GroupKind::Icosahedral);
        assert!("C1".parse::<GroupKind>().is_err());
        assert!(GroupKind::from_name("cyclic", None).is_err());
        assert!(build_group(GroupKind::Cyclic(1)).is_err());
    }
}
