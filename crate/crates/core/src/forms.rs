//! Additive forms `a_1 x_1^d + ... + a_s x_s^d`, level bookkeeping modulo
//! `d`, cyclic normalization and type matching.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ring::{self, F4Class, RingElem, RingError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormError {
    #[error("a form needs at least one variable")]
    Empty,
    #[error("degree must be positive")]
    ZeroDegree,
    #[error("coefficient {index} has precision 2^{found}, expected 2^{expected}")]
    MixedPrecision { index: usize, expected: u32, found: u32 },
    #[error("coefficient {index} vanishes modulo 2^{precision}")]
    ZeroCoefficient { index: usize, precision: u32 },
    #[error("coefficient {index} has level {level}; reducing it needs level < {limit} (raise the precision)")]
    UnderPrecise { index: usize, level: u32, limit: u32 },
    #[error("no cyclic shift satisfies the prefix inequalities")]
    NoValidShift,
    #[error("frame needs precision 2^{0}, beyond the supported 2^64")]
    FrameTooWide(u32),
    #[error("bad type descriptor {0:?}")]
    BadDescriptor(String),
    #[error(transparent)]
    Ring(#[from] RingError),
}

pub type Result<T> = std::result::Result<T, FormError>;

/// A diagonal form of degree `d` with coefficients in `O / 2^K O`.
///
/// Coefficients are interpreted as the exact elements given by their
/// canonical representatives; in particular reducing a level divides the
/// representative exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdditiveForm {
    degree: u32,
    precision: u32,
    coeffs: Vec<RingElem>,
}

impl AdditiveForm {
    pub fn new(degree: u32, coeffs: Vec<RingElem>) -> Result<AdditiveForm> {
        if degree == 0 {
            return Err(FormError::ZeroDegree);
        }
        let precision = coeffs.first().ok_or(FormError::Empty)?.precision();
        for (index, c) in coeffs.iter().enumerate() {
            if c.precision() != precision {
                return Err(FormError::MixedPrecision {
                    index,
                    expected: precision,
                    found: c.precision(),
                });
            }
            if c.is_zero() {
                return Err(FormError::ZeroCoefficient { index, precision });
            }
        }
        Ok(AdditiveForm { degree, precision, coeffs })
    }

    /// Convenience constructor from `(a, b)` integer pairs.
    pub fn from_pairs(degree: u32, precision: u32, pairs: &[(i128, i128)]) -> Result<AdditiveForm> {
        let coeffs = pairs
            .iter()
            .map(|&(a, b)| RingElem::from_ints(a, b, precision))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        AdditiveForm::new(degree, coeffs)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn coeffs(&self) -> &[RingElem] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient levels (never zero coefficients, so always finite).
    pub fn levels(&self) -> Vec<u32> {
        self.coeffs.iter().map(|c| c.level().expect("nonzero coefficient")).collect()
    }

    pub fn max_level(&self) -> u32 {
        self.levels().into_iter().max().unwrap_or(0)
    }

    pub fn is_reduced(&self) -> bool {
        self.levels().iter().all(|&l| l < self.degree)
    }

    /// Same coefficients, reinterpreted at another precision.
    pub fn at_precision(&self, precision: u32) -> Result<AdditiveForm> {
        ring::check_precision(precision)?;
        AdditiveForm::new(self.degree, self.coeffs.iter().map(|c| c.at_precision(precision)).collect())
    }

    /// `sum a_i x_i^d` at the precision of the form.
    pub fn evaluate(&self, xs: &[RingElem]) -> RingElem {
        assert_eq!(xs.len(), self.coeffs.len(), "assignment length");
        self.coeffs
            .iter()
            .zip(xs)
            .fold(RingElem::zero(self.precision), |acc, (a, x)| acc + *a * x.pow(self.degree as u64))
    }

    /// Substitutes `2^(-r d) (2^r x)^d` so every level lies in `[0, d)`.
    pub fn reduce_levels(&self) -> Result<(AdditiveForm, Frame)> {
        let d = self.degree;
        let limit = self.precision.saturating_sub(d);
        let mut coeffs = Vec::with_capacity(self.len());
        let mut exponents = Vec::with_capacity(self.len());
        for (index, (c, level)) in self.coeffs.iter().zip(self.levels()).enumerate() {
            if level < d {
                coeffs.push(*c);
                exponents.push(0);
                continue;
            }
            if level >= limit {
                return Err(FormError::UnderPrecise { index, level, limit });
            }
            let r = level / d;
            coeffs.push(c.shr(r * d));
            exponents.push(r);
        }
        let form = AdditiveForm::new(d, coeffs)?;
        Ok((form, Frame { shift: 0, exponents }))
    }

    /// Multiplies the form by `2^t` and re-reduces, so each level `l` becomes
    /// `(l + t) mod d`. The form must already be reduced.
    pub fn cyclic_shift(&self, t: u32) -> (AdditiveForm, Frame) {
        debug_assert!(self.is_reduced());
        let d = self.degree;
        let t = t % d;
        let mut coeffs = Vec::with_capacity(self.len());
        let mut exponents = Vec::with_capacity(self.len());
        for (c, level) in self.coeffs.iter().zip(self.levels()) {
            if level + t < d {
                coeffs.push(c.shl(t));
                exponents.push(0);
            } else {
                coeffs.push(c.shr(d - t));
                exponents.push(1);
            }
        }
        let form = AdditiveForm { degree: d, precision: self.precision, coeffs };
        (form, Frame { shift: t, exponents })
    }

    pub fn distribution(&self) -> LevelDistribution {
        LevelDistribution::of(self)
    }

    /// Reduces levels, then applies the first cyclic shift for which every
    /// prefix inequality `s_0 + ... + s_j >= (j + 1) s / d` holds.
    pub fn normalize(&self) -> Result<(AdditiveForm, Frame)> {
        let (reduced, frame) = self.reduce_levels()?;
        let t = normalizing_shift(&reduced.levels(), self.degree).ok_or(FormError::NoValidShift)?;
        let (shifted, shift_frame) = reduced.cyclic_shift(t);
        Ok((shifted, frame.then(&shift_frame)))
    }
}

/// First `t` in `0..d` whose shifted level counts satisfy every prefix inequality.
pub fn normalizing_shift(levels: &[u32], d: u32) -> Option<u32> {
    let s = levels.len() as u64;
    let mut counts = vec![0u64; d as usize];
    for &l in levels {
        counts[(l % d) as usize] += 1;
    }
    (0..d).find(|&t| {
        let mut prefix = 0u64;
        (0..d).all(|j| {
            // shifted level j holds original level (j - t) mod d
            prefix += counts[((j + d - t) % d) as usize];
            prefix * d as u64 >= (j as u64 + 1) * s
        })
    })
}

/// Change of variables relating a transformed form to the original one: the
/// transformed coefficient of variable `i` is `2^shift * a_i / 2^(d * exponents[i])`,
/// and its variable is `y_i = 2^exponents[i] * x_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub shift: u32,
    pub exponents: Vec<u32>,
}

impl Frame {
    pub fn identity(len: usize) -> Frame {
        Frame { shift: 0, exponents: vec![0; len] }
    }

    /// Applies `self` first, then `next`.
    pub fn then(&self, next: &Frame) -> Frame {
        Frame {
            shift: self.shift + next.shift,
            exponents: self.exponents.iter().zip(&next.exponents).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn max_exponent(&self) -> u32 {
        self.exponents.iter().copied().max().unwrap_or(0)
    }

    /// Maps a solution `y` of the transformed form, known to vanish modulo
    /// `2^K`, back to `x_i = 2^(J - e_i) y_i` in the original frame, where `J`
    /// is the largest exponent. Returns the assignment at precision
    /// `K + J d` and the valuation `K + J d - shift` the original sum is
    /// guaranteed to reach.
    pub fn pull_back(&self, ys: &[RingElem], d: u32) -> Result<(Vec<RingElem>, u32)> {
        let k = ys.first().map(|y| y.precision()).unwrap_or(1);
        let big_j = self.max_exponent();
        let wide = k + big_j * d;
        if wide > ring::MAX_PRECISION {
            return Err(FormError::FrameTooWide(wide));
        }
        let xs = ys
            .iter()
            .zip(&self.exponents)
            .map(|(y, e)| y.at_precision(wide).shl(big_j - e))
            .collect();
        Ok((xs, wide.saturating_sub(self.shift)))
    }
}

/// Variables per level and per-level class tallies (classes 1, w, 1+w).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelDistribution {
    pub counts: Vec<u32>,
    pub class_tallies: Vec<[u32; 3]>,
}

impl LevelDistribution {
    pub fn of(form: &AdditiveForm) -> LevelDistribution {
        let d = form.degree() as usize;
        let mut counts = vec![0; d];
        let mut class_tallies = vec![[0; 3]; d];
        for (c, l) in form.coeffs().iter().zip(form.levels()) {
            let l = l as usize % d;
            counts[l] += 1;
            let class = c.shr(l as u32).class();
            class_tallies[l][class.bits() as usize - 1] += 1;
        }
        LevelDistribution { counts, class_tallies }
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }
}

/// Requirement on one level of a type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LevelReq {
    /// At least this many variables, any classes.
    Plain(u32),
    /// At least `counts[i]` variables in the `i`-th of up to three distinct
    /// nonzero classes (which classes is left open).
    Stacked(Vec<u32>),
}

impl LevelReq {
    pub fn total(&self) -> u32 {
        match self {
            LevelReq::Plain(n) => *n,
            LevelReq::Stacked(v) => v.iter().sum(),
        }
    }
}

/// Type notation: requirements on consecutive levels starting at level 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypeDescriptor {
    pub levels: Vec<LevelReq>,
}

impl TypeDescriptor {
    pub fn new(levels: Vec<LevelReq>) -> TypeDescriptor {
        TypeDescriptor { levels }
    }

    pub fn total(&self) -> u32 {
        self.levels.iter().map(LevelReq::total).sum()
    }
}

impl fmt::Display for TypeDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, req) in self.levels.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match req {
                LevelReq::Plain(n) => write!(f, "{n}")?,
                LevelReq::Stacked(v) => {
                    let parts: Vec<String> = v.iter().map(u32::to_string).collect();
                    f.write_str(&parts.join("/"))?;
                }
            }
        }
        f.write_str(")")
    }
}

impl FromStr for TypeDescriptor {
    type Err = FormError;

    /// `(0/0/6, 1)`: comma-separated levels, `/` stacks per-class counts.
    fn from_str(s: &str) -> Result<TypeDescriptor> {
        let bad = || FormError::BadDescriptor(s.to_string());
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut levels = Vec::new();
        for part in inner.split(',') {
            let part = part.trim();
            if part.contains('/') {
                let v = part
                    .split('/')
                    .map(|n| n.trim().parse::<u32>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                if v.len() > 3 {
                    return Err(bad());
                }
                levels.push(LevelReq::Stacked(v));
            } else {
                levels.push(LevelReq::Plain(part.parse().map_err(|_| bad())?));
            }
        }
        if levels.is_empty() {
            return Err(bad());
        }
        Ok(TypeDescriptor { levels })
    }
}

/// Variables chosen for one requirement slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotAssignment {
    /// Level in the descriptor (before undoing the shift).
    pub level: u32,
    /// The concrete class bound to a stacked slot.
    pub class: Option<F4Class>,
    pub vars: Vec<usize>,
}

/// Witness that a form is of a given type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeMatch {
    pub shift: u32,
    pub slots: Vec<SlotAssignment>,
}

const CLASS_PERMUTATIONS: [[F4Class; 3]; 6] = [
    [F4Class::ONE, F4Class::A, F4Class::A1],
    [F4Class::ONE, F4Class::A1, F4Class::A],
    [F4Class::A, F4Class::ONE, F4Class::A1],
    [F4Class::A, F4Class::A1, F4Class::ONE],
    [F4Class::A1, F4Class::ONE, F4Class::A],
    [F4Class::A1, F4Class::A, F4Class::ONE],
];

/// Finds a cyclic shift and class labeling under which `form` meets every
/// count in `desc`. The form must be reduced.
pub fn match_type(form: &AdditiveForm, desc: &TypeDescriptor) -> Option<TypeMatch> {
    let d = form.degree();
    if desc.levels.len() > d as usize {
        return None;
    }
    let levels = form.levels();
    let classes: Vec<F4Class> =
        form.coeffs().iter().zip(&levels).map(|(c, &l)| c.shr(l).class()).collect();
    for t in 0..d {
        let shifted: Vec<u32> = levels.iter().map(|l| (l + t) % d).collect();
        let mut slots = Vec::new();
        let ok = desc.levels.iter().enumerate().all(|(lvl, req)| {
            let at_level: Vec<usize> =
                (0..levels.len()).filter(|&i| shifted[i] == lvl as u32).collect();
            match req {
                LevelReq::Plain(n) => {
                    if at_level.len() < *n as usize {
                        return false;
                    }
                    slots.push(SlotAssignment {
                        level: lvl as u32,
                        class: None,
                        vars: at_level[..*n as usize].to_vec(),
                    });
                    true
                }
                LevelReq::Stacked(counts) => {
                    let found = CLASS_PERMUTATIONS.iter().find_map(|perm| {
                        let mut chosen = Vec::new();
                        for (slot, &n) in counts.iter().enumerate() {
                            let vars: Vec<usize> = at_level
                                .iter()
                                .copied()
                                .filter(|&i| classes[i] == perm[slot])
                                .take(n as usize)
                                .collect();
                            if vars.len() < n as usize {
                                return None;
                            }
                            chosen.push(SlotAssignment {
                                level: lvl as u32,
                                class: Some(perm[slot]),
                                vars,
                            });
                        }
                        Some(chosen)
                    });
                    match found {
                        Some(chosen) => {
                            slots.extend(chosen);
                            true
                        }
                        None => false,
                    }
                }
            }
        });
        if ok {
            return Some(TypeMatch { shift: t, slots });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form(d: u32, k: u32, pairs: &[(i128, i128)]) -> AdditiveForm {
        AdditiveForm::from_pairs(d, k, pairs).unwrap()
    }

    #[test]
    fn construction_errors() {
        assert_eq!(AdditiveForm::new(6, vec![]).unwrap_err(), FormError::Empty);
        assert!(matches!(
            AdditiveForm::from_pairs(6, 8, &[(1, 0), (256, 0)]),
            Err(FormError::ZeroCoefficient { index: 1, .. })
        ));
        let mixed = vec![RingElem::one(8), RingElem::one(9)];
        assert!(matches!(AdditiveForm::new(6, mixed), Err(FormError::MixedPrecision { index: 1, .. })));
    }

    #[test]
    fn reduce_levels_examples() {
        let (f, frame) = form(6, 16, &[(128, 0)]).reduce_levels().unwrap();
        assert_eq!(f.coeffs()[0], RingElem::from_parts(2, 0, 16));
        assert_eq!(frame.exponents, vec![1]);
        let (f, _) = form(6, 16, &[(64, 0)]).reduce_levels().unwrap();
        assert_eq!(f.coeffs()[0], RingElem::one(16));
        let (f, frame) = form(6, 16, &[(1, 0), (0, 512)]).reduce_levels().unwrap();
        assert_eq!(f.coeffs()[1], RingElem::from_parts(0, 8, 16));
        assert_eq!(frame.exponents, vec![0, 1]);
    }

    #[test]
    fn reduce_levels_rejects_under_precise() {
        assert!(matches!(
            form(6, 10, &[(1, 0), (128, 0)]).reduce_levels(),
            Err(FormError::UnderPrecise { index: 1, level: 7, limit: 4 })
        ));
    }

    #[test]
    fn cyclic_shift_examples() {
        let f = form(6, 12, &[(1, 0), (1, 0), (32, 0)]);
        assert_eq!(f.cyclic_shift(1).0.levels(), vec![1, 1, 0]);
        assert_eq!(f.cyclic_shift(6).0.levels(), vec![0, 0, 5]);
        let g = form(6, 12, &[(1, 0), (4, 0), (16, 0)]);
        assert_eq!(g.cyclic_shift(2).0.levels(), vec![2, 4, 0]);
    }

    #[test]
    fn normalize_examples() {
        let f = form(6, 10, &[(1, 0); 7]);
        assert_eq!(f.normalize().unwrap().1.shift, 0);
        let g = form(6, 10, &[(2, 0); 7]);
        let (n, frame) = g.normalize().unwrap();
        assert_eq!(frame.shift, 5);
        assert!(n.levels().iter().all(|&l| l == 0));
        let pairs: Vec<(i128, i128)> = (0..12).map(|i| (1i128 << (i / 2), 0)).collect();
        let h = form(6, 12, &pairs);
        assert_eq!(normalizing_shift(&h.levels(), 6), Some(0));
        for t in 0..6 {
            let shifted: Vec<u32> = h.levels().iter().map(|l| (l + t) % 6).collect();
            assert_eq!(normalizing_shift(&shifted, 6), Some(0));
        }
    }

    #[test]
    fn shift_round_trip_restores_levels() {
        let f = form(6, 12, &[(1, 0), (2, 1), (0, 8), (32, 32), (16, 0)]);
        for t in 0..6 {
            let (g, _) = f.cyclic_shift(t);
            let (h, _) = g.cyclic_shift(6 - t);
            let mut a = f.levels();
            let mut b = h.levels();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pull_back_maps_shifted_solution() {
        // f = x^6 + 32 y^6; shifting by 1 gives 2x^6 + y^6 (y wrapped).
        let f = form(6, 10, &[(1, 0), (32, 0)]);
        let (g, frame) = f.cyclic_shift(1);
        assert_eq!(frame.exponents, vec![0, 1]);
        assert_eq!(g.coeffs()[1], RingElem::one(10));
        let ys = vec![RingElem::one(10), RingElem::from_parts(3, 0, 10)];
        let (xs, v) = frame.pull_back(&ys, 6).unwrap();
        assert_eq!(v, 16 - 1);
        // original sum equals 2^(6 - 1) times the shifted sum, exactly
        let orig = f.at_precision(16).unwrap().evaluate(&xs);
        let shifted = g.at_precision(16).unwrap().evaluate(&[ys[0].at_precision(16), ys[1].at_precision(16)]);
        assert_eq!(orig, shifted.shl(5));
    }

    #[test]
    fn distribution_tallies() {
        let f = form(6, 10, &[(1, 0), (0, 1), (1, 1), (2, 0), (3, 2)]);
        let dist = f.distribution();
        assert_eq!(dist.counts[0], 4);
        assert_eq!(dist.counts[1], 1);
        assert_eq!(dist.class_tallies[0], [2, 1, 1]);
        assert_eq!(dist.total(), 5);
    }

    #[test]
    fn match_type_examples() {
        let desc: TypeDescriptor = "(2/2/3)".parse().unwrap();
        let f = form(6, 10, &[(1, 0), (1, 0), (0, 1), (0, 1), (1, 1), (1, 1), (1, 1)]);
        let m = match_type(&f, &desc).unwrap();
        assert_eq!(m.slots.len(), 3);
        let g = form(6, 10, &[(1, 0); 7]);
        assert!(match_type(&g, &"(0/0/7)".parse().unwrap()).is_some());
        assert!(match_type(&g, &"(1/1/5)".parse().unwrap()).is_none());
        let h = form(6, 10, &[(1, 0), (1, 0)]);
        assert!(match_type(&h, &"(3, 1)".parse().unwrap()).is_none());
        // type (2, 1) found after a shift: levels 5, 5, 0
        let k = form(6, 10, &[(32, 0), (32, 0), (1, 0)]);
        assert_eq!(match_type(&k, &"(2, 1)".parse().unwrap()).unwrap().shift, 1);
    }

    #[test]
    fn descriptor_round_trip() {
        for s in ["(2/2/3)", "(0/0/6, 1)", "(5, 4, 1)", "(3, 1)"] {
            let d: TypeDescriptor = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert!("(1/2/3/4)".parse::<TypeDescriptor>().is_err());
        assert!("(a)".parse::<TypeDescriptor>().is_err());
    }
}
