//! Exact arithmetic in `O / 2^K O`, where `O = Z_2[w]` and `w^2 = w + 1`.
//!
//! Elements are pairs `a + b*w` with both components reduced modulo `2^K`.
//! The uniformizer is 2, so the valuation of an element is the smaller of
//! the 2-adic valuations of its two components, and the residue field is
//! `F_4 = {0, 1, w, 1 + w}`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported precision exponent. Components live in a `u64`.
pub const MAX_PRECISION: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingError {
    #[error("precision mismatch: 2^{left} vs 2^{right}")]
    PrecisionMismatch { left: u32, right: u32 },
    #[error("precision 2^{0} is outside 1..=64")]
    InvalidPrecision(u32),
    #[error("element is zero modulo 2^{0}")]
    Zero(u32),
    #[error("need precision 2^{needed} but only 2^{available} is available")]
    InsufficientPrecision { needed: u32, available: u32 },
    #[error("{0} is not a unit")]
    NotAUnit(RingElem),
    #[error("{0} is not a {1}-th power")]
    NotAPower(RingElem, u32),
    #[error("degree {0} is not of the form 2m with m odd")]
    UnsupportedDegree(u32),
    #[error("Newton step needs residual valuation >= {required}, got {found}")]
    NewtonPrecondition { required: u32, found: Valuation },
    #[error("cannot parse ring element {0:?}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, RingError>;

#[inline]
pub(crate) fn mask(prec: u32) -> u64 {
    if prec >= 64 {
        u64::MAX
    } else {
        (1u64 << prec) - 1
    }
}

pub(crate) fn check_precision(prec: u32) -> Result<()> {
    if (1..=MAX_PRECISION).contains(&prec) {
        Ok(())
    } else {
        Err(RingError::InvalidPrecision(prec))
    }
}

/// 2-adic valuation of a truncated element.
///
/// `AtLeast(K)` is what zero modulo `2^K` looks like: the true valuation of
/// whatever the element approximates is only bounded below. Serialized as a
/// number or as the string `">=K"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ValuationRepr", try_from = "ValuationRepr")]
pub enum Valuation {
    Finite(u32),
    AtLeast(u32),
}

impl Valuation {
    /// Lower bound that is always valid.
    pub fn lower_bound(self) -> u32 {
        match self {
            Valuation::Finite(v) | Valuation::AtLeast(v) => v,
        }
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::AtLeast(_) => None,
        }
    }

    pub fn is_at_least(self, bound: u32) -> bool {
        self.lower_bound() >= bound
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ValuationRepr {
    Finite(u32),
    Bound(String),
}

impl From<Valuation> for ValuationRepr {
    fn from(v: Valuation) -> ValuationRepr {
        match v {
            Valuation::Finite(n) => ValuationRepr::Finite(n),
            Valuation::AtLeast(n) => ValuationRepr::Bound(format!(">={n}")),
        }
    }
}

impl TryFrom<ValuationRepr> for Valuation {
    type Error = String;
    fn try_from(r: ValuationRepr) -> std::result::Result<Valuation, String> {
        match r {
            ValuationRepr::Finite(n) => Ok(Valuation::Finite(n)),
            ValuationRepr::Bound(s) => s
                .strip_prefix(">=")
                .and_then(|n| n.parse().ok())
                .map(Valuation::AtLeast)
                .ok_or_else(|| format!("bad valuation {s:?}")),
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::AtLeast(v) => write!(f, ">={v}"),
        }
    }
}

/// Residue class in `F_4`, stored as two bits: bit 0 is the coefficient of 1,
/// bit 1 the coefficient of `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct F4Class(u8);

impl F4Class {
    pub const ZERO: F4Class = F4Class(0b00);
    pub const ONE: F4Class = F4Class(0b01);
    /// The class of `w`.
    pub const A: F4Class = F4Class(0b10);
    /// The class of `1 + w`.
    pub const A1: F4Class = F4Class(0b11);

    pub const ALL: [F4Class; 4] = [Self::ZERO, Self::ONE, Self::A, Self::A1];
    pub const NONZERO: [F4Class; 3] = [Self::ONE, Self::A, Self::A1];

    pub fn from_bits(one: u64, w: u64) -> F4Class {
        F4Class(((one & 1) | ((w & 1) << 1)) as u8)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn one_bit(self) -> u64 {
        (self.0 & 1) as u64
    }

    pub fn w_bit(self) -> u64 {
        ((self.0 >> 1) & 1) as u64
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn inverse(self) -> Option<F4Class> {
        match self {
            F4Class::ZERO => None,
            F4Class::ONE => Some(F4Class::ONE),
            F4Class::A => Some(F4Class::A1),
            _ => Some(F4Class::A),
        }
    }

    /// Canonical lift in `{0, 1, w, 1 + w}`.
    pub fn lift(self, prec: u32) -> RingElem {
        RingElem::from_parts(self.one_bit(), self.w_bit(), prec)
    }
}

impl Add for F4Class {
    type Output = F4Class;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: F4Class) -> F4Class {
        F4Class(self.0 ^ rhs.0)
    }
}

impl Mul for F4Class {
    type Output = F4Class;
    fn mul(self, rhs: F4Class) -> F4Class {
        let (x0, x1) = (self.one_bit(), self.w_bit());
        let (y0, y1) = (rhs.one_bit(), rhs.w_bit());
        // w^2 = w + 1
        F4Class::from_bits(x0 & y0 ^ x1 & y1, x0 & y1 ^ x1 & y0 ^ x1 & y1)
    }
}

impl fmt::Display for F4Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match *self {
            F4Class::ZERO => "0",
            F4Class::ONE => "1",
            F4Class::A => "w",
            _ => "1+w",
        })
    }
}

/// Element `a + b*w` of `O / 2^prec O`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RingElem {
    a: u64,
    b: u64,
    prec: u32,
}

impl RingElem {
    /// Builds an element from components that are reduced modulo `2^prec`.
    ///
    /// Panics on an unsupported precision; use [`RingElem::try_new`] for input.
    pub fn from_parts(a: u64, b: u64, prec: u32) -> RingElem {
        assert!((1..=MAX_PRECISION).contains(&prec), "precision {prec} out of range");
        let m = mask(prec);
        RingElem { a: a & m, b: b & m, prec }
    }

    pub fn try_new(a: u64, b: u64, prec: u32) -> Result<RingElem> {
        check_precision(prec)?;
        Ok(RingElem::from_parts(a, b, prec))
    }

    /// Reduces signed integer components modulo `2^prec`.
    pub fn from_ints(a: i128, b: i128, prec: u32) -> Result<RingElem> {
        check_precision(prec)?;
        Ok(RingElem::from_parts(a as u64, b as u64, prec))
    }

    pub fn zero(prec: u32) -> RingElem {
        RingElem::from_parts(0, 0, prec)
    }

    pub fn one(prec: u32) -> RingElem {
        RingElem::from_parts(1, 0, prec)
    }

    /// The generator `w`, with `w^2 = w + 1`.
    pub fn w(prec: u32) -> RingElem {
        RingElem::from_parts(0, 1, prec)
    }

    pub fn pow2(k: u32, prec: u32) -> RingElem {
        if k >= prec {
            RingElem::zero(prec)
        } else {
            RingElem::from_parts(1 << k, 0, prec)
        }
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn pair(&self) -> [u64; 2] {
        [self.a, self.b]
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    /// Reinterprets the canonical representative at another precision:
    /// truncates when shrinking, zero-extends when growing.
    pub fn at_precision(&self, prec: u32) -> RingElem {
        RingElem::from_parts(self.a, self.b, prec)
    }

    fn same_precision(&self, other: &RingElem) -> Result<()> {
        if self.prec == other.prec {
            Ok(())
        } else {
            Err(RingError::PrecisionMismatch { left: self.prec, right: other.prec })
        }
    }

    pub fn checked_add(&self, other: &RingElem) -> Result<RingElem> {
        self.same_precision(other)?;
        Ok(RingElem::from_parts(
            self.a.wrapping_add(other.a),
            self.b.wrapping_add(other.b),
            self.prec,
        ))
    }

    pub fn checked_sub(&self, other: &RingElem) -> Result<RingElem> {
        self.same_precision(other)?;
        Ok(RingElem::from_parts(
            self.a.wrapping_sub(other.a),
            self.b.wrapping_sub(other.b),
            self.prec,
        ))
    }

    pub fn checked_mul(&self, other: &RingElem) -> Result<RingElem> {
        self.same_precision(other)?;
        // (a + bw)(c + dw) = (ac + bd) + (ad + bc + bd)w
        let (a, b, c, d) = (self.a, self.b, other.a, other.b);
        let bd = b.wrapping_mul(d);
        Ok(RingElem::from_parts(
            a.wrapping_mul(c).wrapping_add(bd),
            a.wrapping_mul(d).wrapping_add(b.wrapping_mul(c)).wrapping_add(bd),
            self.prec,
        ))
    }

    pub fn valuation(&self) -> Valuation {
        if self.is_zero() {
            return Valuation::AtLeast(self.prec);
        }
        let va = if self.a == 0 { u32::MAX } else { self.a.trailing_zeros() };
        let vb = if self.b == 0 { u32::MAX } else { self.b.trailing_zeros() };
        Valuation::Finite(va.min(vb))
    }

    /// Finite valuation or `None` when the element vanishes at this precision.
    pub fn level(&self) -> Option<u32> {
        self.valuation().finite()
    }

    pub fn is_unit(&self) -> bool {
        (self.a | self.b) & 1 == 1
    }

    /// Residue class modulo 2.
    pub fn class(&self) -> F4Class {
        F4Class::from_bits(self.a, self.b)
    }

    /// Exact division by `2^k` of the canonical representative. Requires
    /// valuation at least `k`; the freed high bits are zero.
    pub fn shr(&self, k: u32) -> RingElem {
        debug_assert!(self.valuation().is_at_least(k));
        if k >= 64 {
            return RingElem::zero(self.prec);
        }
        RingElem::from_parts(self.a >> k, self.b >> k, self.prec)
    }

    /// Multiplication by `2^k`.
    pub fn shl(&self, k: u32) -> RingElem {
        if k >= self.prec {
            return RingElem::zero(self.prec);
        }
        RingElem::from_parts(self.a << k, self.b << k, self.prec)
    }

    /// Reduction modulo `2^k` (k at most the precision), kept at the same precision.
    pub fn low_bits(&self, k: u32) -> RingElem {
        let m = mask(k.min(self.prec));
        RingElem::from_parts(self.a & m, self.b & m, self.prec)
    }

    pub fn pow(&self, mut e: u64) -> RingElem {
        let mut base = *self;
        let mut acc = RingElem::one(self.prec);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    /// Inverse of a unit, via the norm `N(a + bw) = a^2 + ab - b^2` and the
    /// conjugate `a + b - bw`.
    pub fn inverse(&self) -> Result<RingElem> {
        if !self.is_unit() {
            return Err(RingError::NotAUnit(*self));
        }
        let (a, b) = (self.a, self.b);
        let norm = a
            .wrapping_mul(a)
            .wrapping_add(a.wrapping_mul(b))
            .wrapping_sub(b.wrapping_mul(b));
        let n_inv = odd_inverse(norm);
        let conj = RingElem::from_parts(a.wrapping_add(b), b.wrapping_neg(), self.prec);
        Ok(conj * RingElem::from_parts(n_inv, 0, self.prec))
    }

    /// Galois conjugate, `w -> 1 - w`.
    pub fn conjugate(&self) -> RingElem {
        RingElem::from_parts(self.a.wrapping_add(self.b), self.b.wrapping_neg(), self.prec)
    }

    /// Base-2 digit expansion after factoring out the level.
    pub fn digit_expand(&self, depth: u32) -> Result<DigitExpansion> {
        let level = self.level().ok_or(RingError::Zero(self.prec))?;
        if level + depth > self.prec {
            return Err(RingError::InsufficientPrecision {
                needed: level + depth,
                available: self.prec,
            });
        }
        let (a, b) = (self.a >> level, self.b >> level);
        let digits = (0..depth).map(|i| F4Class::from_bits(a >> i, b >> i)).collect();
        Ok(DigitExpansion { level, digits })
    }
}

/// Inverse of an odd integer modulo `2^64`.
fn odd_inverse(n: u64) -> u64 {
    debug_assert!(n & 1 == 1);
    // n * n == 1 mod 8, and every step doubles the number of correct bits.
    let mut x = n;
    for _ in 0..5 {
        x = x.wrapping_mul(2u64.wrapping_sub(n.wrapping_mul(x)));
    }
    x
}

impl Add for RingElem {
    type Output = RingElem;
    fn add(self, rhs: RingElem) -> RingElem {
        self.checked_add(&rhs).expect("ring precision mismatch")
    }
}

impl Sub for RingElem {
    type Output = RingElem;
    fn sub(self, rhs: RingElem) -> RingElem {
        self.checked_sub(&rhs).expect("ring precision mismatch")
    }
}

impl Mul for RingElem {
    type Output = RingElem;
    fn mul(self, rhs: RingElem) -> RingElem {
        self.checked_mul(&rhs).expect("ring precision mismatch")
    }
}

impl Neg for RingElem {
    type Output = RingElem;
    fn neg(self) -> RingElem {
        RingElem::from_parts(self.a.wrapping_neg(), self.b.wrapping_neg(), self.prec)
    }
}

impl fmt::Display for RingElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a, self.b) {
            (a, 0) => write!(f, "{a}"),
            (0, b) => write!(f, "{b}*w"),
            (a, b) => write!(f, "{a}+{b}*w"),
        }
    }
}

/// Integer pair parsed from the `a+b*w` syntax, before reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactPair {
    pub a: i128,
    pub b: i128,
}

impl ExactPair {
    pub fn to_elem(self, prec: u32) -> Result<RingElem> {
        RingElem::from_ints(self.a, self.b, prec)
    }
}

impl FromStr for ExactPair {
    type Err = RingError;

    /// Accepts sums of signed terms `n`, `n*w`, `w`, e.g. `3+5*w`, `-7`, `1*w`.
    fn from_str(s: &str) -> Result<ExactPair> {
        let err = || RingError::Parse(s.to_string());
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err());
        }
        let mut pair = ExactPair { a: 0, b: 0 };
        let mut rest = compact.as_str();
        while !rest.is_empty() {
            let (sign, body) = match rest.as_bytes()[0] {
                b'+' => (1i128, &rest[1..]),
                b'-' => (-1i128, &rest[1..]),
                _ if rest.len() == compact.len() => (1i128, rest),
                _ => return Err(err()),
            };
            let end = body.find(['+', '-']).unwrap_or(body.len());
            let term = &body[..end];
            rest = &body[end..];
            let (coef, is_w) = if term == "w" {
                (1i128, true)
            } else if let Some(n) = term.strip_suffix("*w") {
                (n.parse::<i128>().map_err(|_| err())?, true)
            } else {
                (term.parse::<i128>().map_err(|_| err())?, false)
            };
            let value = sign.checked_mul(coef).ok_or_else(err)?;
            let slot = if is_w { &mut pair.b } else { &mut pair.a };
            *slot = slot.checked_add(value).ok_or_else(err)?;
        }
        Ok(pair)
    }
}

/// `x = 2^level * sum_i 2^i * lift(digits[i])`, exact modulo `2^(level + depth)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitExpansion {
    pub level: u32,
    pub digits: Vec<F4Class>,
}

impl DigitExpansion {
    pub fn reconstruct(&self, prec: u32) -> RingElem {
        let (mut a, mut b) = (0u64, 0u64);
        for (i, d) in self.digits.iter().enumerate() {
            a |= d.one_bit() << i;
            b |= d.w_bit() << i;
        }
        RingElem::from_parts(a, b, prec).shl(self.level)
    }
}

/// 2-adic valuation of a positive integer.
pub fn v2(n: u32) -> u32 {
    n.trailing_zeros()
}

/// Residual valuation above which Newton's method converges for `x^d - t`:
/// `2 v(d) + 1`, which is 3 for every degree `2m` with `m` odd.
pub fn hensel_margin(d: u32) -> u32 {
    2 * v2(d) + 1
}

/// Checks the degree shape `d = 2m` with `m` odd.
pub fn check_degree(d: u32) -> Result<()> {
    if d >= 2 && d.is_multiple_of(2) && (d / 2) % 2 == 1 {
        Ok(())
    } else {
        Err(RingError::UnsupportedDegree(d))
    }
}

/// Newton iteration for `x^d = t` from a seed whose residual has valuation at
/// least `hensel_margin(d)`. Works at the precision of `t`.
fn newton_power_root(seed: RingElem, t: RingElem, d: u32) -> Result<RingElem> {
    let e = v2(d);
    let prec = t.precision();
    let odd = RingElem::from_parts((d >> e) as u64, 0, prec);
    let mut x = seed;
    for _ in 0..2 * MAX_PRECISION {
        let r = x.pow(d as u64) - t;
        match r.valuation() {
            Valuation::AtLeast(_) => return Ok(x),
            Valuation::Finite(v) if v < hensel_margin(d) => {
                return Err(RingError::NewtonPrecondition {
                    required: hensel_margin(d),
                    found: Valuation::Finite(v),
                })
            }
            Valuation::Finite(_) => {}
        }
        // x <- x - f(x) / f'(x); dividing r by 2^e leaves its top bits unknown,
        // but f'(x) * 2^(prec - e) vanishes so they do not matter.
        let deriv = odd * x.pow(d as u64 - 1);
        x = x - r.shr(e) * deriv.inverse()?;
    }
    unreachable!("Newton iteration failed to converge")
}

/// Solves `x^d = t` modulo `2^K` for a unit `t`: exhaustive seed search
/// modulo `2^(2 v(d) + 2)` (16 for our degrees), then Newton.
pub fn dth_root(t: &RingElem, d: u32) -> Result<RingElem> {
    if !t.is_unit() {
        return Err(RingError::NotAUnit(*t));
    }
    if d == 0 {
        return Err(RingError::UnsupportedDegree(d));
    }
    let prec = t.precision();
    let seed_bits = (hensel_margin(d) + 1).min(prec);
    let target = t.at_precision(seed_bits);
    let side = 1u64 << seed_bits;
    let seed = (0..side)
        .flat_map(|a| (0..side).map(move |b| RingElem::from_parts(a, b, seed_bits)))
        .find(|x| x.is_unit() && x.pow(d as u64) == target)
        .ok_or(RingError::NotAPower(*t, d))?;
    if seed_bits == prec {
        return Ok(seed);
    }
    newton_power_root(seed.at_precision(prec), *t, d)
}

/// Solves `coeff * x^d + rest = 0 mod 2^K` for a unit `x`, given that `x = 1`
/// already satisfies it modulo `2^(level(coeff) + hensel_margin(d))`.
pub fn newton_anchor_solve(coeff: &RingElem, d: u32, rest: &RingElem) -> Result<RingElem> {
    coeff.same_precision(rest)?;
    let prec = coeff.precision();
    let k = coeff.level().ok_or(RingError::Zero(prec))?;
    let margin = hensel_margin(d);
    let residual = (*coeff + *rest).valuation();
    if !residual.is_at_least(k + margin) {
        return Err(RingError::NewtonPrecondition { required: k + margin, found: residual });
    }
    if k + margin > prec {
        return Err(RingError::InsufficientPrecision { needed: k + margin, available: prec });
    }
    let inner = prec - k;
    let unit = coeff.shr(k).at_precision(inner);
    let c = rest.shr(k).at_precision(inner);
    let target = -(c * unit.inverse()?);
    let x = newton_power_root(RingElem::one(inner), target, d)?;
    Ok(x.at_precision(prec))
}

/// Teichmüller lift of `w`: the cube root of unity congruent to `w` mod 2.
pub fn teichmuller_w(prec: u32) -> RingElem {
    let mut x = RingElem::w(prec);
    loop {
        let next = x.pow(4);
        if next == x {
            return x;
        }
        x = next;
    }
}

/// One unit `d`-th power together with the unit it was raised from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiplierRep {
    /// Exponent `j` of the Teichmüller factor `omega^j` in the root.
    pub class_index: u8,
    /// Whether the root carries the factor `2w - 1`, whose square is 5.
    pub eps: u8,
    pub root: RingElem,
    pub value: RingElem,
}

/// The unit `d`-th powers used as contraction multipliers: `lambda^d` for
/// `lambda = omega^j (2w - 1)^eps`, with `j` ranging over a single value when
/// `3 | d` (every `d`-th power is then congruent to 1 modulo 2) and over three
/// values otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiplierSet {
    pub degree: u32,
    pub precision: u32,
    pub class_transitive: bool,
    reps: Vec<MultiplierRep>,
}

impl MultiplierSet {
    pub fn new(d: u32, prec: u32) -> Result<MultiplierSet> {
        check_degree(d)?;
        check_precision(prec)?;
        let class_transitive = !d.is_multiple_of(3);
        let omega = teichmuller_w(prec);
        let five_root = RingElem::from_parts(u64::MAX, 2, prec); // 2w - 1
        let classes = if class_transitive { 3 } else { 1 };
        let mut reps: Vec<MultiplierRep> = Vec::new();
        for j in 0..classes {
            for eps in 0..2u8 {
                let root = omega.pow(j as u64) * five_root.pow(eps as u64);
                let value = root.pow(d as u64);
                if reps.iter().all(|r| r.value != value) {
                    reps.push(MultiplierRep { class_index: j, eps, root, value });
                }
            }
        }
        Ok(MultiplierSet { degree: d, precision: prec, class_transitive, reps })
    }

    pub fn reps(&self) -> &[MultiplierRep] {
        &self.reps
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn get(&self, index: usize) -> &MultiplierRep {
        &self.reps[index]
    }

    /// Index of the rep with the given labels, if it survived deduplication.
    pub fn find(&self, class_index: u8, eps: u8) -> Option<usize> {
        self.reps.iter().position(|r| r.class_index == class_index && r.eps == eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(a: u64, b: u64, k: u32) -> RingElem {
        RingElem::from_parts(a, b, k)
    }

    #[test]
    fn arithmetic_examples() {
        let k = 10;
        assert_eq!(RingElem::w(k) * RingElem::w(k), el(1, 1, k));
        assert_eq!(el(1, 1, k) + el(1, 1, k), el(2, 2, k));
        let five_root = RingElem::from_ints(-1, 2, k).unwrap();
        assert_eq!(five_root * five_root, el(5, 0, k));
    }

    #[test]
    fn precision_mismatch_is_an_error() {
        let e = el(1, 0, 8).checked_add(&el(1, 0, 9)).unwrap_err();
        assert_eq!(e, RingError::PrecisionMismatch { left: 8, right: 9 });
        assert!(el(1, 0, 8).checked_mul(&el(1, 0, 4)).is_err());
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(el(2, 2, 8).valuation(), Valuation::Finite(1));
        assert_eq!(el(4, 0, 8).valuation(), Valuation::Finite(2));
        assert_eq!(el(0, 0, 8).valuation(), Valuation::AtLeast(8));
        assert_eq!(el(256, 0, 8).valuation(), Valuation::AtLeast(8));
    }

    #[test]
    fn digit_expansion_examples() {
        let x = el(3, 5, 8).digit_expand(3).unwrap();
        assert_eq!(x.level, 0);
        assert_eq!(x.digits, vec![F4Class::A1, F4Class::ONE, F4Class::A]);
        let y = el(2, 2, 8).digit_expand(2).unwrap();
        assert_eq!(y.level, 1);
        assert_eq!(y.digits, vec![F4Class::A1, F4Class::ZERO]);
        let z = el(5, 0, 8).digit_expand(3).unwrap();
        assert_eq!(z.digits, vec![F4Class::ONE, F4Class::ZERO, F4Class::ONE]);
    }

    #[test]
    fn digit_expansion_errors() {
        assert_eq!(el(0, 0, 8).digit_expand(2).unwrap_err(), RingError::Zero(8));
        assert!(matches!(
            el(64, 0, 8).digit_expand(3),
            Err(RingError::InsufficientPrecision { needed: 9, available: 8 })
        ));
    }

    #[test]
    fn f4_tables() {
        for x in F4Class::ALL {
            assert_eq!(x + x, F4Class::ZERO);
            assert_eq!(x * F4Class::ONE, x);
            if let Some(inv) = x.inverse() {
                assert_eq!(x * inv, F4Class::ONE);
            }
        }
        assert_eq!(F4Class::A + F4Class::A1, F4Class::ONE);
        assert_eq!(F4Class::A * F4Class::A, F4Class::A1);
        assert_eq!(F4Class::A * F4Class::A * F4Class::A, F4Class::ONE);
    }

    #[test]
    fn inverse_and_conjugate() {
        let k = 16;
        for (a, b) in [(1, 0), (0, 1), (3, 5), (7, 2), (12345, 40001)] {
            let x = el(a, b, k);
            assert_eq!(x * x.inverse().unwrap(), RingElem::one(k));
            assert_eq!((x * x.conjugate()).b(), 0, "norm is rational");
        }
        assert!(el(2, 4, k).inverse().is_err());
    }

    #[test]
    fn dth_root_examples() {
        let k = 12;
        assert_eq!(dth_root(&RingElem::one(k), 6).unwrap().pow(6), RingElem::one(k));
        let r = dth_root(&el(5, 0, k), 6).unwrap();
        assert_eq!(r.pow(6), el(5, 0, k));
        assert!(matches!(dth_root(&el(1, 1, k), 6), Err(RingError::NotAPower(..))));
        assert!(matches!(dth_root(&el(2, 0, k), 6), Err(RingError::NotAUnit(_))));
        // 3 does not divide 10, so every class is a 10th power.
        let r = dth_root(&el(1, 1, k), 10).unwrap();
        assert_eq!(r.pow(10), el(1, 1, k));
    }

    #[test]
    fn newton_anchor_examples() {
        let k = 12;
        // x^6 + 7 = 0
        let x = newton_anchor_solve(&RingElem::one(k), 6, &el(7, 0, k)).unwrap();
        assert!(x.is_unit());
        assert!((x.pow(6) + el(7, 0, k)).is_zero());
        // 2x^6 + C with v(2 + C) >= 4
        let c = el(14, 0, k);
        let x = newton_anchor_solve(&el(2, 0, k), 6, &c).unwrap();
        assert!((el(2, 0, k) * x.pow(6) + c).is_zero());
        // x^6 - 1 = 0 from the seed itself
        let x = newton_anchor_solve(&RingElem::one(k), 6, &(-RingElem::one(k))).unwrap();
        assert_eq!(x, RingElem::one(k));
        // residual 1 + 3 = 4 is too shallow
        assert!(matches!(
            newton_anchor_solve(&RingElem::one(k), 6, &el(3, 0, k)),
            Err(RingError::NewtonPrecondition { required: 3, .. })
        ));
    }

    #[test]
    fn teichmuller_is_a_cube_root_of_unity() {
        for k in [2, 3, 8, 20, 64] {
            let w = teichmuller_w(k);
            assert_eq!(w.pow(3), RingElem::one(k));
            assert_eq!(w.class(), F4Class::A);
        }
        // omega = 2 + 3w mod 4, omega^2 = 1 + w mod 4
        assert_eq!(teichmuller_w(2), el(2, 3, 2));
        assert_eq!(teichmuller_w(2).pow(2), el(1, 1, 2));
    }

    fn brute_unit_powers(d: u32, k: u32) -> Vec<RingElem> {
        let side = 1u64 << k;
        let mut out: Vec<RingElem> = (0..side)
            .flat_map(|a| (0..side).map(move |b| el(a, b, k)))
            .filter(|x| x.is_unit())
            .map(|x| x.pow(d as u64))
            .collect();
        out.sort_by_key(|x| x.pair());
        out.dedup();
        out
    }

    fn sorted_values(m: &MultiplierSet) -> Vec<RingElem> {
        let mut v: Vec<RingElem> = m.reps().iter().map(|r| r.value).collect();
        v.sort_by_key(|x| x.pair());
        v
    }

    #[test]
    fn multiplier_set_examples() {
        assert_eq!(sorted_values(&MultiplierSet::new(6, 3).unwrap()), vec![el(1, 0, 3), el(5, 0, 3)]);
        assert_eq!(
            sorted_values(&MultiplierSet::new(10, 2).unwrap()),
            vec![el(1, 0, 2), el(1, 1, 2), el(2, 3, 2)]
        );
        assert_eq!(sorted_values(&MultiplierSet::new(6, 2).unwrap()), vec![el(1, 0, 2)]);
        assert!(matches!(MultiplierSet::new(4, 8), Err(RingError::UnsupportedDegree(4))));
        assert!(matches!(MultiplierSet::new(9, 8), Err(RingError::UnsupportedDegree(9))));
    }

    #[test]
    fn multiplier_set_mod_8_matches_brute_force() {
        // every unit d-th power mod 8, by enumerating the 48 units of O/8O
        for d in [6, 10, 14, 18, 22, 30] {
            let m = MultiplierSet::new(d, 3).unwrap();
            assert_eq!(sorted_values(&m), brute_unit_powers(d, 3), "d = {d}");
        }
    }

    #[test]
    fn multiplier_roots_reproduce_reps() {
        for d in [6, 10, 18] {
            let m = MultiplierSet::new(d, 20).unwrap();
            for rep in m.reps() {
                assert!(rep.value.is_unit() && rep.root.is_unit());
                assert_eq!(rep.root.pow(d as u64), rep.value);
                let r = dth_root(&rep.value, d).unwrap();
                assert_eq!(r.pow(d as u64), rep.value);
            }
        }
    }

    #[test]
    fn parse_and_display() {
        let p: ExactPair = "3+5*w".parse().unwrap();
        assert_eq!(p, ExactPair { a: 3, b: 5 });
        assert_eq!("5".parse::<ExactPair>().unwrap(), ExactPair { a: 5, b: 0 });
        assert_eq!("1*w".parse::<ExactPair>().unwrap(), ExactPair { a: 0, b: 1 });
        assert_eq!("-7 - 2*w".parse::<ExactPair>().unwrap(), ExactPair { a: -7, b: -2 });
        assert_eq!("w+w".parse::<ExactPair>().unwrap(), ExactPair { a: 0, b: 2 });
        for bad in ["", "3+", "x", "3**w", "1+2*v"] {
            assert!(bad.parse::<ExactPair>().is_err(), "{bad}");
        }
        assert_eq!(el(3, 5, 8).to_string(), "3+5*w");
        assert_eq!(el(0, 1, 8).to_string(), "1*w");
        assert_eq!(el(5, 0, 8).to_string(), "5");
    }
}
