//! Exact arithmetic in the cyclotomic field Q(ζₘ).
//!
//! Elements are stored in the power basis `{ζᵏ : 0 ≤ k < φ(m)}` of
//! `Q[x]/Φₘ(x)` and are reduced after every operation, so two elements of the
//! same field are equal exactly when their coefficient lists are equal.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CycloError {
    #[error("division by zero in Q(zeta_{0})")]
    DivisionByZero(u32),
    #[error("operands live in different fields: Q(zeta_{0}) vs Q(zeta_{1})")]
    OrderMismatch(u32, u32),
    #[error("cannot parse cyclotomic number: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Per-order data shared by every element of Q(ζₘ).
#[derive(Debug)]
pub struct CycloField {
    order: u32,
    phi: usize,
    /// Φₘ coefficients, lowest degree first (monic).
    minpoly: Vec<i64>,
    /// `powers[k]` = ζᵏ reduced, for `0 ≤ k < m`.
    powers: Vec<Vec<i64>>,
}

impl CycloField {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn degree(&self) -> usize {
        self.phi
    }

    pub fn minimal_polynomial(&self) -> &[i64] {
        &self.minpoly
    }
}

fn field_cache() -> &'static Mutex<HashMap<u32, Arc<CycloField>>> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<CycloField>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Returns the shared field data for Q(ζₘ), building it on first use.
pub fn field(order: u32) -> Arc<CycloField> {
    assert!(order >= 1, "cyclotomic order must be positive");
    let mut cache = field_cache().lock().expect("cyclotomic field cache poisoned");
    cache
        .entry(order)
        .or_insert_with(|| Arc::new(build_field(order)))
        .clone()
}

/// Integer coefficients of Φₘ, lowest degree first.
pub fn cyclotomic_polynomial(m: u32) -> Vec<i64> {
    // Φₘ = (xᵐ − 1) / Π_{d | m, d < m} Φ_d
    let mut num = vec![0i64; m as usize + 1];
    num[0] = -1;
    num[m as usize] = 1;
    for d in 1..m {
        if m.is_multiple_of(d) {
            num = exact_div_monic(&num, &cyclotomic_polynomial(d));
        }
    }
    num
}

fn exact_div_monic(num: &[i64], den: &[i64]) -> Vec<i64> {
    let mut rem = num.to_vec();
    let dn = den.len() - 1;
    let qlen = rem.len() - dn;
    let mut quot = vec![0i64; qlen];
    for k in (0..qlen).rev() {
        let c = rem[k + dn];
        quot[k] = c;
        for (j, &dc) in den.iter().enumerate() {
            rem[k + j] -= c * dc;
        }
    }
    debug_assert!(rem.iter().all(|&c| c == 0), "inexact cyclotomic division");
    quot
}

fn build_field(order: u32) -> CycloField {
    let minpoly = cyclotomic_polynomial(order);
    let phi = minpoly.len() - 1;
    let mut powers = Vec::with_capacity(order as usize);
    let mut cur = vec![0i64; phi];
    cur[0] = 1;
    for _ in 0..order {
        powers.push(cur.clone());
        // multiply by x and reduce
        let top = cur[phi - 1];
        for k in (1..phi).rev() {
            cur[k] = cur[k - 1] - top * minpoly[k];
        }
        cur[0] = -top * minpoly[0];
    }
    CycloField {
        order,
        phi,
        minpoly,
        powers,
    }
}

/// Exact element of Q(ζₘ).
#[derive(Clone)]
pub struct CycloNum {
    field: Arc<CycloField>,
    coeffs: Vec<BigRational>,
}

impl PartialEq for CycloNum {
    fn eq(&self, other: &Self) -> bool {
        self.field.order == other.field.order && self.coeffs == other.coeffs
    }
}

impl Eq for CycloNum {}

impl std::hash::Hash for CycloNum {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.field.order.hash(state);
        self.coeffs.hash(state);
    }
}

impl fmt::Debug for CycloNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CycloNum[m={}]({})", self.field.order, self)
    }
}

impl CycloNum {
    pub fn zero(order: u32) -> Self {
        let field = field(order);
        let coeffs = vec![BigRational::zero(); field.phi];
        CycloNum { field, coeffs }
    }

    pub fn one(order: u32) -> Self {
        Self::from_rational(order, BigRational::one())
    }

    pub fn from_rational(order: u32, value: BigRational) -> Self {
        let mut z = Self::zero(order);
        z.coeffs[0] = value;
        z
    }

    pub fn from_int(order: u32, value: i64) -> Self {
        Self::from_rational(order, BigRational::from_integer(BigInt::from(value)))
    }

    pub fn from_frac(order: u32, num: i64, den: i64) -> Self {
        Self::from_rational(order, BigRational::new(num.into(), den.into()))
    }

    /// ζₘᵏ for any integer k.
    pub fn zeta_pow(order: u32, k: i64) -> Self {
        let field = field(order);
        let e = k.rem_euclid(order as i64) as usize;
        let coeffs = field.powers[e]
            .iter()
            .map(|&c| BigRational::from_integer(c.into()))
            .collect();
        CycloNum { field, coeffs }
    }

    /// Builds an element from raw power-basis coefficients of any length,
    /// reducing modulo Φₘ.
    pub fn from_coeffs(order: u32, raw: Vec<BigRational>) -> Self {
        let field = field(order);
        let coeffs = reduce_poly(&field, raw);
        CycloNum { field, coeffs }
    }

    pub fn order(&self) -> u32 {
        self.field.order
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0].is_one() && self.coeffs[1..].iter().all(|c| c.is_zero())
    }

    /// `Some(q)` when the element is the rational number q.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.coeffs[1..].iter().all(|c| c.is_zero()) {
            Some(&self.coeffs[0])
        } else {
            None
        }
    }

    /// Re-expresses the element in Q(ζ_target); `target` must be a multiple
    /// of the current order.
    pub fn lift(&self, target: u32) -> Result<Self, CycloError> {
        let m = self.field.order;
        if !target.is_multiple_of(m) {
            return Err(CycloError::OrderMismatch(m, target));
        }
        if target == m {
            return Ok(self.clone());
        }
        let step = (target / m) as usize;
        let mut raw = vec![BigRational::zero(); step * self.coeffs.len()];
        for (k, c) in self.coeffs.iter().enumerate() {
            raw[k * step] = c.clone();
        }
        Ok(Self::from_coeffs(target, raw))
    }

    /// Exact arithmetic on two elements of the same field.
    pub fn arith(&self, other: &Self, op: ArithOp) -> Result<Self, CycloError> {
        if self.field.order != other.field.order {
            return Err(CycloError::OrderMismatch(self.field.order, other.field.order));
        }
        match op {
            ArithOp::Add => Ok(self.zip_with(other, |a, b| a + b)),
            ArithOp::Sub => Ok(self.zip_with(other, |a, b| a - b)),
            ArithOp::Mul => Ok(self.mul_same(other)),
            ArithOp::Div => {
                let inv = other.inv()?;
                Ok(self.mul_same(&inv))
            }
        }
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, CycloError> {
        self.arith(other, ArithOp::Div)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&BigRational, &BigRational) -> BigRational) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| f(a, b))
            .collect();
        CycloNum {
            field: self.field.clone(),
            coeffs,
        }
    }

    fn mul_same(&self, other: &Self) -> Self {
        let phi = self.field.phi;
        let mut raw = vec![BigRational::zero(); 2 * phi - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    raw[i + j] += a * b;
                }
            }
        }
        CycloNum {
            field: self.field.clone(),
            coeffs: reduce_poly(&self.field, raw),
        }
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        CycloNum {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|c| c * q).collect(),
        }
    }

    /// Multiplicative inverse by the extended Euclidean algorithm in Q[x].
    pub fn inv(&self) -> Result<Self, CycloError> {
        if self.is_zero() {
            return Err(CycloError::DivisionByZero(self.field.order));
        }
        let modulus: Vec<BigRational> = self
            .field
            .minpoly
            .iter()
            .map(|&c| BigRational::from_integer(c.into()))
            .collect();
        let a = trim(self.coeffs.clone());
        let inv = poly_inverse_mod(&a, &modulus);
        Ok(Self::from_coeffs(self.field.order, inv))
    }

    /// Image under ζ ↦ ζ⁻¹ (complex conjugation in every standard embedding).
    pub fn conj(&self) -> Self {
        let m = self.field.order as usize;
        let phi = self.field.phi;
        let mut acc = vec![BigRational::zero(); phi];
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let e = (m - k) % m;
            for (j, &p) in self.field.powers[e].iter().enumerate() {
                if p != 0 {
                    acc[j] += c * BigRational::from_integer(p.into());
                }
            }
        }
        CycloNum {
            field: self.field.clone(),
            coeffs: acc,
        }
    }

    /// Evaluation at ζₘ = exp(2iπ/m).
    pub fn embed(&self) -> Complex64 {
        let m = self.field.order as f64;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| {
                let angle = 2.0 * std::f64::consts::PI * (k as f64) / m;
                Complex64::from_polar(1.0, angle) * rational_to_f64(c)
            })
            .sum()
    }

    /// Largest absolute numerator or denominator among the coefficients.
    pub fn height(&self) -> BigInt {
        self.coeffs
            .iter()
            .flat_map(|c| [c.numer().abs(), c.denom().abs()])
            .max()
            .unwrap_or_else(BigInt::zero)
    }

    /// Parses the textual form produced by `Display` ("c0 + c1*z + c2*z^3").
    /// A bare `z`/`z^k` term and ` - ` separators are also accepted.
    pub fn parse(order: u32, text: &str) -> Result<Self, CycloError> {
        let field = field(order);
        let err = || CycloError::Parse(text.to_string());
        let mut raw = vec![BigRational::zero(); order as usize];
        let normalized = text.replace(" - ", " + -");
        for term in normalized.split('+').map(str::trim) {
            if term.is_empty() {
                return Err(err());
            }
            let (coef, power) = match term.split_once('*') {
                Some((c, z)) => (c.to_string(), parse_zeta_power(z).ok_or_else(err)?),
                None => match parse_zeta_power(term.trim_start_matches('-')) {
                    Some(k) if term.starts_with('-') => ("-1".to_string(), k),
                    Some(k) => ("1".to_string(), k),
                    None => (term.to_string(), 0),
                },
            };
            raw[power % order as usize] += parse_rational(&coef).ok_or_else(err)?;
        }
        Ok(CycloNum {
            coeffs: reduce_poly(&field, raw),
            field,
        })
    }
}

fn parse_zeta_power(z: &str) -> Option<usize> {
    if z == "z" {
        Some(1)
    } else {
        z.strip_prefix("z^")?.parse().ok()
    }
}

fn parse_rational(s: &str) -> Option<BigRational> {
    match s.split_once('/') {
        Some((n, d)) => {
            let d: BigInt = d.parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(BigRational::new(n.parse().ok()?, d))
        }
        None => Some(BigRational::from_integer(s.parse().ok()?)),
    }
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // numerator/denominator too large for a direct conversion
        let n = q.numer().to_f64().unwrap_or(f64::NAN);
        let d = q.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

fn reduce_poly(field: &CycloField, mut raw: Vec<BigRational>) -> Vec<BigRational> {
    let phi = field.phi;
    let m = field.order as usize;
    if raw.len() <= phi {
        raw.resize(phi, BigRational::zero());
        return raw;
    }
    let mut out: Vec<BigRational> = raw[..phi].to_vec();
    for (k, c) in raw.iter().enumerate().skip(phi) {
        if c.is_zero() {
            continue;
        }
        for (j, &p) in field.powers[k % m].iter().enumerate() {
            if p != 0 {
                out[j] += c * BigRational::from_integer(p.into());
            }
        }
    }
    out
}

fn trim(mut p: Vec<BigRational>) -> Vec<BigRational> {
    while p.len() > 1 && p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

fn poly_divrem(a: &[BigRational], b: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let b = trim(b.to_vec());
    let mut rem = trim(a.to_vec());
    let db = b.len() - 1;
    if rem.len() <= db {
        return (vec![BigRational::zero()], rem);
    }
    let mut quot = vec![BigRational::zero(); rem.len() - db];
    for shift in (0..quot.len()).rev() {
        let c = &rem[shift + db] / &b[db];
        if c.is_zero() {
            continue;
        }
        for (j, bc) in b.iter().enumerate() {
            rem[shift + j] -= &c * bc;
        }
        quot[shift] = c;
    }
    rem.truncate(db.max(1));
    (trim(quot), trim(rem))
}

fn poly_sub_mul(a: &[BigRational], q: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let len = a.len().max(q.len() + b.len() - 1);
    let mut out = vec![BigRational::zero(); len];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, qc) in q.iter().enumerate() {
        for (j, bc) in b.iter().enumerate() {
            out[i + j] -= qc * bc;
        }
    }
    trim(out)
}

/// Inverse of `a` modulo the irreducible `modulus`.
fn poly_inverse_mod(a: &[BigRational], modulus: &[BigRational]) -> Vec<BigRational> {
    // invariant: s_i * a ≡ r_i (mod modulus)
    let (mut r0, mut r1) = (modulus.to_vec(), a.to_vec());
    let (mut s0, mut s1) = (vec![BigRational::zero()], vec![BigRational::one()]);
    while !(r1.len() == 1 && r1[0].is_zero()) {
        let (q, r) = poly_divrem(&r0, &r1);
        let s = poly_sub_mul(&s0, &q, &s1);
        r0 = std::mem::replace(&mut r1, r);
        s0 = std::mem::replace(&mut s1, s);
    }
    // r0 is a nonzero constant since the modulus is irreducible
    let c = r0[0].clone();
    s0.iter().map(|x| x / &c).collect()
}

impl fmt::Display for CycloNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let coef = if c.denom().is_one() {
                c.numer().to_string()
            } else {
                format!("{}/{}", c.numer(), c.denom())
            };
            terms.push(match k {
                0 => coef,
                1 => format!("{coef}*z"),
                _ => format!("{coef}*z^{k}"),
            });
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

macro_rules! forward_op {
    ($tr:ident, $method:ident, $op:expr) => {
        impl $tr<&CycloNum> for &CycloNum {
            type Output = CycloNum;
            fn $method(self, rhs: &CycloNum) -> CycloNum {
                self.arith(rhs, $op).expect("cyclotomic operands must share an order")
            }
        }
        impl $tr<CycloNum> for CycloNum {
            type Output = CycloNum;
            fn $method(self, rhs: CycloNum) -> CycloNum {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_op!(Add, add, ArithOp::Add);
forward_op!(Sub, sub, ArithOp::Sub);
forward_op!(Mul, mul, ArithOp::Mul);

impl Neg for &CycloNum {
    type Output = CycloNum;
    fn neg(self) -> CycloNum {
        CycloNum {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Neg for CycloNum {
    type Output = CycloNum;
    fn neg(self) -> CycloNum {
        -&self
    }
}

/// Least common multiple, used when bringing two orders to a common field.
pub fn common_order(a: u32, b: u32) -> u32 {
    a.lcm(&b)
}
