//! Sparse exact row reduction.
//!
//! Rows are kept as primitive integer vectors (content divided out, leading
//! entry positive) and combined fraction-free. The leading column of a row is
//! its smallest column index, so callers encode pivot preference through the
//! column numbering.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};



pub type IntRow = BTreeMap<usize, BigInt>;
pub type RatRow = BTreeMap<usize, BigRational>;

/// Clears denominators of a rational row and divides out the content.
pub fn primitive_part(row: &RatRow) -> IntRow {
    let lcm = row
        .values()
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let mut out: IntRow = row
        .iter()
        .filter(|(_, q)| !q.is_zero())
        .map(|(&c, q)| (c, q.numer() * (&lcm / q.denom())))
        .collect();
    normalize(&mut out);
    out
}

fn normalize(row: &mut IntRow) {
    let g = row.values().fold(BigInt::zero(), |acc, v| acc.gcd(v));
    if g.is_zero() {
        row.clear();
        return;
    }
    let negate = row.values().next().is_some_and(|v| v.is_negative());
    let g = if negate { -g } else { g };
    if !g.is_one() {
        for v in row.values_mut() {
            *v = &*v / &g;
        }
    }
}

/// `a·row − b·pivot_row`, fraction-free.
fn combine(row: &IntRow, a: &BigInt, pivot_row: &IntRow, b: &BigInt) -> IntRow {
    let mut out = IntRow::new();
    for (&c, v) in row {
        out.insert(c, a * v);
    }
    for (&c, v) in pivot_row {
        let e = out.entry(c).or_insert_with(BigInt::zero);
        *e -= b * v;
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// Incremental row echelon form of a span of integer rows.
#[derive(Debug, Clone, Default)]
pub struct Echelon {
    rows: Vec<IntRow>,
    pivot_row: HashMap<usize, usize>,
}

impl Echelon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[IntRow] {
        &self.rows
    }

    pub fn pivots(&self) -> impl Iterator<Item = usize> + '_ {
        self.pivot_row.keys().copied()
    }

    pub fn is_pivot(&self, col: usize) -> bool {
        self.pivot_row.contains_key(&col)
    }

    fn eliminate(&self, mut row: IntRow) -> IntRow {
        loop {
            let Some((&lead, val)) = row.iter().next() else {
                return row;
            };
            let Some(&r) = self.pivot_row.get(&lead) else {
                return row;
            };
            let prow = &self.rows[r];
            let pval = &prow[&lead];
            let g = val.gcd(pval);
            let a = pval / &g;
            let b = val / &g;
            row = combine(&row, &a, prow, &b);
            normalize(&mut row);
        }
    }

    /// Adds a row to the span; returns true when it increased the rank.
    pub fn insert(&mut self, row: IntRow) -> bool {
        let mut row = row;
        row.retain(|_, v| !v.is_zero());
        normalize(&mut row);
        let row = self.eliminate(row);
        match row.keys().next() {
            Some(&lead) => {
                self.pivot_row.insert(lead, self.rows.len());
                self.rows.push(row);
                true
            }
            None => false,
        }
    }

    pub fn insert_rational(&mut self, row: &RatRow) -> bool {
        self.insert(primitive_part(row))
    }

    pub fn contains(&self, row: &RatRow) -> bool {
        self.eliminate(primitive_part(row)).is_empty()
    }

    /// Reduced row echelon form with unit pivots.
    pub fn reduced(&self) -> ReducedEchelon {
        let mut pivots: Vec<usize> = self.pivot_row.keys().copied().collect();
        pivots.sort_unstable();
        let mut rows: BTreeMap<usize, RatRow> = BTreeMap::new();
        // back-substitute from the last pivot to the first
        for &p in pivots.iter().rev() {
            let int_row = &self.rows[self.pivot_row[&p]];
            let lead = BigRational::from_integer(int_row[&p].clone());
            let mut row: RatRow = int_row
                .iter()
                .map(|(&c, v)| (c, BigRational::from_integer(v.clone()) / &lead))
                .collect();
            let later: Vec<usize> = row.keys().copied().filter(|c| *c != p && rows.contains_key(c)).collect();
            for c in later {
                let factor = row[&c].clone();
                if factor.is_zero() {
                    continue;
                }
                for (&k, v) in &rows[&c] {
                    let e = row.entry(k).or_insert_with(BigRational::zero);
                    *e -= &factor * v;
                }
            }
            row.retain(|_, v| !v.is_zero());
            rows.insert(p, row);
        }
        ReducedEchelon { rows }
    }
}

/// RREF: for every pivot column, a row with a 1 there and zeros at all other
/// pivot columns.
#[derive(Debug, Clone, Default)]
pub struct ReducedEchelon {
    rows: BTreeMap<usize, RatRow>,
}

impl ReducedEchelon {
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_pivot(&self, col: usize) -> bool {
        self.rows.contains_key(&col)
    }

    pub fn row(&self, pivot: usize) -> Option<&RatRow> {
        self.rows.get(&pivot)
    }

    /// Remainder of `v` modulo the row span, supported on non-pivot columns.
    pub fn reduce<S: crate::scalar::Scalar>(&self, v: &BTreeMap<usize, S>) -> BTreeMap<usize, S> {
        let mut out: BTreeMap<usize, S> = BTreeMap::new();
        for (&c, x) in v {
            if x.is_zero() {
                continue;
            }
            match self.rows.get(&c) {
                None => accumulate(&mut out, c, x.clone()),
                Some(row) => {
                    for (&k, r) in row {
                        if k != c {
                            accumulate(&mut out, k, x.scale(r).neg());
                        }
                    }
                }
            }
        }
        out.retain(|_, x| !x.is_zero());
        out
    }
}

fn accumulate<S: crate::scalar::Scalar>(out: &mut BTreeMap<usize, S>, col: usize, x: S) {
    match out.get_mut(&col) {
        Some(e) => *e = e.add(&x),
        None => {
            out.insert(col, x);
        }
    }
}

/// Rank of a list of rational rows.
pub fn rank_of(rows: &[RatRow]) -> usize {
    let mut ech = Echelon::new();
    for r in rows {
        ech.insert_rational(r);
    }
    ech.rank()
}
