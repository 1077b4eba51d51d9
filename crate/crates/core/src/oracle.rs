//! Exhaustive decision procedure. A form whose coefficient levels are all at
//! most `M - 3` is isotropic exactly when it has a zero modulo `2^M` with some
//! variable a unit, so a reachability DP over the `4^M` residues of O/2^M
//! decides it outright.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms::AdditiveForm;
use crate::ring::{self, RingElem, RingError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("modulus 2^{m} exceeds the policy bound 2^{max}")]
    ModulusTooLarge { m: u32, max: u32 },
    #[error("DP tables need {needed} bytes, budget is {budget}")]
    MemoryBudget { needed: u64, budget: u64 },
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("working precision {precision} cannot hold a lift needing {needed} digits")]
    Precision { precision: u32, needed: u32 },
    #[error(transparent)]
    Ring(#[from] RingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Largest modulus exponent the DP may use.
    pub max_modulus: u32,
    /// Upper bound on bytes held by the per-variable DP layers.
    pub memory_budget: u64,
}

impl Default for OracleConfig {
    fn default() -> OracleConfig {
        OracleConfig { max_modulus: 10, memory_budget: 1 << 30 }
    }
}

impl OracleConfig {
    pub fn check(&self, m: u32, vars: usize) -> Result<(), OracleError> {
        if m == 0 {
            return Err(OracleError::ZeroModulus);
        }
        if m > self.max_modulus {
            return Err(OracleError::ModulusTooLarge { m, max: self.max_modulus });
        }
        let needed = layer_bytes(m) * 2 * (vars as u64 + 1);
        if needed > self.memory_budget {
            return Err(OracleError::MemoryBudget { needed, budget: self.memory_budget });
        }
        Ok(())
    }
}

fn layer_bytes(m: u32) -> u64 {
    (1u64 << (2 * m)).div_ceil(64) * 8
}

/// One `d`-th power modulo `2^M`: `x^d` for `x = 2^shift * unit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PowerValue {
    pub value: RingElem,
    pub shift: u32,
    /// A preimage `x` with `x^d = value mod 2^M`.
    pub root: RingElem,
}

impl PowerValue {
    pub fn is_unit(&self) -> bool {
        self.shift == 0
    }
}

/// All values of `x^d` modulo `2^M`, zero included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerValueSet {
    pub degree: u32,
    pub modulus: u32,
    pub values: Vec<PowerValue>,
}

impl PowerValueSet {
    /// Units are enumerated modulo `2^(M-1)`: for even `d`, `u^d mod 2^M`
    /// does not depend on the higher digits of `u`.
    pub fn new(d: u32, m: u32) -> Result<PowerValueSet, OracleError> {
        if m == 0 {
            return Err(OracleError::ZeroModulus);
        }
        ring::check_precision(m)?;
        if d == 0 || d % 2 == 1 {
            return Err(RingError::UnsupportedDegree(d).into());
        }
        let inner = (m - 1).max(1);
        let side = 1u64 << inner;
        let mut units: Vec<PowerValue> = Vec::new();
        let mut seen: HashMap<[u64; 2], ()> = HashMap::new();
        for a in 0..side {
            for b in 0..side {
                if a & 1 == 0 && b & 1 == 0 {
                    continue;
                }
                let root = RingElem::from_parts(a, b, m);
                let value = root.pow(d as u64);
                if seen.insert(value.pair(), ()).is_none() {
                    units.push(PowerValue { value, shift: 0, root });
                }
            }
        }
        units.sort_by_key(|v| v.value.pair());
        let mut values = vec![PowerValue { value: RingElem::zero(m), shift: u32::MAX, root: RingElem::zero(m) }];
        values.extend(units.iter().copied());
        let mut shift = 1;
        while shift * d < m {
            let mut scaled: Vec<PowerValue> = Vec::new();
            for u in &units {
                let value = u.value.shl(shift * d);
                if scaled.iter().all(|v| v.value != value) {
                    scaled.push(PowerValue { value, shift, root: u.root.shl(shift) });
                }
            }
            values.extend(scaled);
            shift += 1;
        }
        Ok(PowerValueSet { degree: d, modulus: m, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, x: &RingElem) -> bool {
        self.values.iter().any(|v| v.value == *x)
    }

    /// Sorted value pairs, convenient for comparisons.
    pub fn pairs(&self) -> Vec<[u64; 2]> {
        let mut p: Vec<[u64; 2]> = self.values.iter().map(|v| v.value.pair()).collect();
        p.sort_unstable();
        p
    }
}

/// `{x^d mod 2^M}` by raising every element of O/2^M; the reference the
/// value set is checked against.
pub fn brute_force_powers(d: u32, m: u32) -> Vec<[u64; 2]> {
    let side = 1u64 << m;
    let mut out: Vec<[u64; 2]> = (0..side)
        .flat_map(|a| (0..side).map(move |b| RingElem::from_parts(a, b, m).pow(d as u64).pair()))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Bitsets over O/2^M indexed by `a + 2^M b`.
struct Torus {
    side: usize,
    words: usize,
}

impl Torus {
    fn new(m: u32) -> Torus {
        let side = 1usize << m;
        Torus { side, words: (side * side).div_ceil(64) }
    }

    fn empty(&self) -> Vec<u64> {
        vec![0; self.words]
    }

    fn index(&self, a: u64, b: u64) -> usize {
        let mask = self.side as u64 - 1;
        ((a & mask) + (b & mask) * self.side as u64) as usize
    }

    fn get(&self, set: &[u64], a: u64, b: u64) -> bool {
        let i = self.index(a, b);
        set[i / 64] >> (i % 64) & 1 == 1
    }

    fn set(&self, set: &mut [u64], a: u64, b: u64) {
        let i = self.index(a, b);
        set[i / 64] |= 1 << (i % 64);
    }

    /// `dst |= src + (ca, cb)`.
    fn or_translate(&self, src: &[u64], dst: &mut [u64], ca: u64, cb: u64) {
        let side = self.side;
        let mask = side as u64 - 1;
        if side < 64 {
            for (w, &word) in src.iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let i = w * 64 + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    let (a, b) = ((i % side) as u64, (i / side) as u64);
                    self.set(dst, a + ca, b + cb);
                }
            }
            return;
        }
        let row = side / 64;
        let (q, r) = (((ca & mask) / 64) as usize, (ca % 64) as u32);
        for b in 0..side {
            let s = &src[b * row..(b + 1) * row];
            let target = ((b as u64 + cb) & mask) as usize * row;
            for (w, &v) in s.iter().enumerate() {
                if v == 0 {
                    continue;
                }
                dst[target + (w + q) % row] |= v << r;
                if r > 0 {
                    dst[target + (w + q + 1) % row] |= v >> (64 - r);
                }
            }
        }
    }
}

/// One variable's DP options: distinct residues `a_i x^d mod 2^M`.
struct Options {
    /// `(ca, cb, value index, unit)`.
    contribs: Vec<(u64, u64, usize, bool)>,
}

fn options_for(coeff: &RingElem, set: &PowerValueSet) -> Options {
    let m = set.modulus;
    let c = coeff.at_precision(m);
    let mut seen: HashMap<([u64; 2], bool), ()> = HashMap::new();
    let mut contribs = Vec::new();
    for (idx, v) in set.values.iter().enumerate().skip(1) {
        let t = c * v.value;
        if t.is_zero() && !v.is_unit() {
            continue;
        }
        if seen.insert((t.pair(), v.is_unit()), ()).is_none() {
            contribs.push((t.a(), t.b(), idx, v.is_unit()));
        }
    }
    Options { contribs }
}

/// A zero modulo `2^M` with some variable a unit, as value indices into the
/// power set (`None` for `x_i = 0`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModularZero {
    pub modulus: u32,
    pub choices: Vec<Option<usize>>,
    /// Roots `x_i` at precision `M`.
    pub roots: Vec<RingElem>,
    /// First variable taking a unit value.
    pub unit_var: usize,
    pub states_visited: u64,
}

/// Result of the DP: a primitive zero, or the number of reachable states
/// examined before concluding there is none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ZeroSearch {
    Found(ModularZero),
    None { states_visited: u64 },
}

/// Searches for `x` with `sum a_i x_i^d = 0 mod 2^M` and some `x_i` a unit.
pub fn primitive_zero_mod(form: &AdditiveForm, m: u32, config: &OracleConfig) -> Result<ZeroSearch, OracleError> {
    config.check(m, form.len())?;
    let set = PowerValueSet::new(form.degree(), m)?;
    let torus = Torus::new(m);
    let opts: Vec<Options> = form.coeffs().iter().map(|c| options_for(c, &set)).collect();
    let mut layers: Vec<[Vec<u64>; 2]> = Vec::with_capacity(form.len() + 1);
    let mut start = [torus.empty(), torus.empty()];
    torus.set(&mut start[0], 0, 0);
    layers.push(start);
    for o in &opts {
        let prev = layers.last().unwrap();
        let mut next = prev.clone();
        for &(ca, cb, _, unit) in &o.contribs {
            if unit {
                torus.or_translate(&prev[0], &mut next[1], ca, cb);
                torus.or_translate(&prev[1], &mut next[1], ca, cb);
            } else {
                let [p0, p1] = prev;
                let [n0, n1] = &mut next;
                torus.or_translate(p0, n0, ca, cb);
                torus.or_translate(p1, n1, ca, cb);
            }
        }
        layers.push(next);
    }
    let states_visited: u64 =
        layers.iter().flat_map(|l| l.iter()).map(|s| s.iter().map(|w| w.count_ones() as u64).sum::<u64>()).sum();
    if !torus.get(&layers.last().unwrap()[1], 0, 0) {
        return Ok(ZeroSearch::None { states_visited });
    }
    let mask = (1u64 << m) - 1;
    let (mut a, mut b, mut flag) = (0u64, 0u64, 1usize);
    let mut choices = vec![None; form.len()];
    for i in (0..form.len()).rev() {
        let prev = &layers[i];
        if torus.get(&prev[flag], a, b) {
            continue;
        }
        let mut step = None;
        for &(ca, cb, idx, unit) in &opts[i].contribs {
            let (pa, pb) = (a.wrapping_sub(ca) & mask, b.wrapping_sub(cb) & mask);
            let flags: &[usize] = match (unit, flag) {
                (true, 1) => &[0, 1],
                (true, _) => &[],
                (false, f) => if f == 0 { &[0] } else { &[1] },
            };
            if let Some(&pf) = flags.iter().find(|&&pf| torus.get(&prev[pf], pa, pb)) {
                step = Some((pa, pb, pf, idx));
                break;
            }
        }
        let (pa, pb, pf, idx) = step.expect("DP layers are consistent");
        choices[i] = Some(idx);
        a = pa;
        b = pb;
        flag = pf;
    }
    debug_assert!(a == 0 && b == 0 && flag == 0);
    let roots: Vec<RingElem> = choices
        .iter()
        .map(|c| c.map(|i| set.values[i].root).unwrap_or_else(|| RingElem::zero(m)))
        .collect();
    let unit_var = choices
        .iter()
        .position(|c| c.map(|i| set.values[i].is_unit()).unwrap_or(false))
        .expect("flagged path uses a unit");
    Ok(ZeroSearch::Found(ModularZero { modulus: m, choices, roots, unit_var, states_visited }))
}

/// No primitive zero modulo `2^M`, with `M` at least three above every level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhaustionCertificate {
    pub kind: String,
    #[serde(rename = "M")]
    pub modulus: u32,
    #[serde(rename = "statesVisited")]
    pub states_visited: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleVerdict {
    /// Assignment at the form's precision with `sum a_i x_i^d = 0 mod 2^K`
    /// and `x[unit_var]` a unit.
    Isotropic { assignment: Vec<RingElem>, unit_var: usize },
    Anisotropic(ExhaustionCertificate),
}

/// Modulus used by the exhaustive decision.
pub fn exhaustive_modulus(form: &AdditiveForm) -> u32 {
    form.max_level() + ring::hensel_margin(form.degree())
}

/// Decides isotropy exactly at `M = max level + 3`, lifting any zero found to
/// the form's working precision.
pub fn decide_isotropy_exhaustive(form: &AdditiveForm, config: &OracleConfig) -> Result<OracleVerdict, OracleError> {
    let m = exhaustive_modulus(form);
    match primitive_zero_mod(form, m, config)? {
        ZeroSearch::None { states_visited } => Ok(OracleVerdict::Anisotropic(ExhaustionCertificate {
            kind: "exhaustion".into(),
            modulus: m,
            states_visited,
        })),
        ZeroSearch::Found(z) => {
            let assignment = lift_modular_zero(form, &z)?;
            Ok(OracleVerdict::Isotropic { assignment, unit_var: z.unit_var })
        }
    }
}

/// Newton-corrects the unit variable of a zero modulo `2^M` so the sum
/// vanishes at the form's precision.
pub fn lift_modular_zero(form: &AdditiveForm, z: &ModularZero) -> Result<Vec<RingElem>, OracleError> {
    let k = form.precision();
    let d = form.degree();
    let p = z.unit_var;
    let level = form.coeffs()[p].level().unwrap_or(k);
    let needed = level + ring::hensel_margin(d);
    if needed > k || needed > z.modulus {
        return Err(OracleError::Precision { precision: k.min(z.modulus), needed });
    }
    let mut xs: Vec<RingElem> = z.roots.iter().map(|r| r.at_precision(k)).collect();
    let rest = form
        .coeffs()
        .iter()
        .zip(&xs)
        .enumerate()
        .filter(|(i, _)| *i != p)
        .fold(RingElem::zero(k), |acc, (_, (c, x))| acc + *c * x.pow(d as u64));
    let lead = form.coeffs()[p] * xs[p].pow(d as u64);
    let y = ring::newton_anchor_solve(&lead, d, &rest)?;
    xs[p] = xs[p] * y;
    Ok(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(d: u32, pairs: &[(i128, i128)]) -> AdditiveForm {
        AdditiveForm::from_pairs(d, d + 4, pairs).unwrap()
    }

    #[test]
    fn small_value_sets() {
        let s = PowerValueSet::new(6, 2).unwrap();
        assert_eq!(s.pairs(), vec![[0, 0], [1, 0]]);
        let s = PowerValueSet::new(10, 2).unwrap();
        assert_eq!(s.pairs(), vec![[0, 0], [1, 0], [1, 1], [2, 3]]);
        let s = PowerValueSet::new(6, 3).unwrap();
        assert_eq!(s.pairs(), vec![[0, 0], [1, 0], [5, 0]]);
    }

    #[test]
    fn value_sets_match_brute_force() {
        for d in [6, 10, 14] {
            for m in 1..=5 {
                assert_eq!(PowerValueSet::new(d, m).unwrap().pairs(), brute_force_powers(d, m), "d={d} M={m}");
            }
        }
    }

    #[test]
    fn translate_agrees_with_pointwise() {
        for m in [2, 3, 6] {
            let t = Torus::new(m);
            let mut src = t.empty();
            for (a, b) in [(0, 0), (1, 3), (5, 2), (3, 3)] {
                t.set(&mut src, a, b);
            }
            for (ca, cb) in [(0, 0), (1, 1), (7, 2), (63, 5), (2, 0)] {
                let mut dst = t.empty();
                t.or_translate(&src, &mut dst, ca, cb);
                let mut want = t.empty();
                for (a, b) in [(0, 0), (1, 3), (5, 2), (3, 3)] {
                    t.set(&mut want, a + ca, b + cb);
                }
                assert_eq!(dst, want, "m={m} shift=({ca},{cb})");
            }
        }
    }

    #[test]
    fn primitive_zero_examples() {
        let c = OracleConfig::default();
        assert!(matches!(primitive_zero_mod(&f(6, &[(1, 0), (1, 0)]), 3, &c).unwrap(), ZeroSearch::None { .. }));
        match primitive_zero_mod(&f(6, &[(1, 0), (7, 0)]), 3, &c).unwrap() {
            ZeroSearch::Found(z) => assert!(z.choices.iter().all(|x| x.is_some())),
            other => panic!("{other:?}"),
        }
        let g = f(6, &[(1, 0), (1, 0), (0, 1)]);
        assert!(matches!(primitive_zero_mod(&g, 2, &c).unwrap(), ZeroSearch::None { .. }));
    }

    #[test]
    fn exhaustive_decisions() {
        let c = OracleConfig::default();
        let form = f(6, &[(1, 0), (7, 0)]);
        match decide_isotropy_exhaustive(&form, &c).unwrap() {
            OracleVerdict::Isotropic { assignment, unit_var } => {
                assert!(form.evaluate(&assignment).is_zero());
                assert!(assignment[unit_var].is_unit());
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(decide_isotropy_exhaustive(&f(6, &[(1, 0)]), &c).unwrap(), OracleVerdict::Anisotropic(_)));
    }

    #[test]
    fn policy_limits() {
        let c = OracleConfig { max_modulus: 4, ..OracleConfig::default() };
        assert!(matches!(
            primitive_zero_mod(&f(6, &[(1, 0)]), 5, &c),
            Err(OracleError::ModulusTooLarge { .. })
        ));
        let c = OracleConfig { memory_budget: 10, ..OracleConfig::default() };
        assert!(matches!(primitive_zero_mod(&f(6, &[(1, 0)]), 5, &c), Err(OracleError::MemoryBudget { .. })));
    }
}
