//! Flat contraction search. Any contraction tree built from unit multipliers
//! collapses to a single contraction whose leaf multipliers are products of
//! unit d-th powers, and those products are again multipliers modulo 8. So a
//! tree anchored at level `k` exists exactly when some choice of leaves at
//! levels `k..k+2`, one unit multiplier each, sums to 0 modulo `2^(k+3)`
//! with a level-`k` leaf among them. That is a subset-sum over O/8O, run here
//! as a bitset DP on 64 residues times a flag.

use super::{PartialValue, LIFT};
use crate::ring::MultiplierSet;

const BYTE_LANES: u64 = 0x0101_0101_0101_0101;

/// Chosen leaves (index into the input slice) with their multiplier index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ClosureHit {
    pub anchor_level: u32,
    pub picks: Vec<(usize, usize)>,
}

/// Residue of `a + b w` in O/8O as a bit index `a + 8 b`.
fn index(a: u64, b: u64) -> u32 {
    ((a & 7) + 8 * (b & 7)) as u32
}

/// Adds `(ca, cb)` to every residue in the set.
fn translate(set: u64, ca: u32, cb: u32) -> u64 {
    let rotated = if ca == 0 {
        set
    } else {
        let hi = ((0xFFu64 << ca) & 0xFF) * BYTE_LANES;
        let lo = ((1u64 << ca) - 1) * BYTE_LANES;
        ((set << ca) & hi) | ((set >> (8 - ca)) & lo)
    };
    rotated.rotate_left(8 * cb)
}

struct Candidate {
    leaf: usize,
    anchor: bool,
    /// Distinct contributions `(ca, cb, multiplier index)`.
    options: Vec<(u32, u32, usize)>,
}

/// Runs the DP for every anchor level in ascending order and returns the
/// first hit. `work` accumulates the number of layer updates.
pub(crate) fn flat_closure(
    leaves: &[PartialValue],
    mults: &MultiplierSet,
    work: &mut u64,
) -> Option<ClosureHit> {
    let mut anchors: Vec<u32> = leaves.iter().filter_map(|l| l.valuation().finite()).collect();
    anchors.sort_unstable();
    anchors.dedup();
    anchors.into_iter().find_map(|k| closure_at(leaves, mults, k, work))
}

pub(crate) fn closure_at(
    leaves: &[PartialValue],
    mults: &MultiplierSet,
    k: u32,
    work: &mut u64,
) -> Option<ClosureHit> {
    let top = k + LIFT;
    let mut cands = Vec::new();
    for (leaf, pv) in leaves.iter().enumerate() {
        let Some(level) = pv.valuation().finite() else { continue };
        if level < k || level >= top || pv.known() < top {
            continue;
        }
        let mut options: Vec<(u32, u32, usize)> = Vec::new();
        for m in 0..mults.len() {
            let v = pv.scale(&mults.get(m).value).value();
            let (ca, cb) = (((v.a() >> k) & 7) as u32, ((v.b() >> k) & 7) as u32);
            if !options.iter().any(|o| o.0 == ca && o.1 == cb) {
                options.push((ca, cb, m));
            }
        }
        cands.push(Candidate { leaf, anchor: level == k, options });
    }
    if !cands.iter().any(|c| c.anchor) {
        return None;
    }
    // layers[i] = reachable (residue set without anchor, with anchor) after i candidates
    let mut layers: Vec<[u64; 2]> = Vec::with_capacity(cands.len() + 1);
    layers.push([1, 0]);
    for c in &cands {
        let prev = *layers.last().unwrap();
        let mut next = prev;
        for &(ca, cb, _) in &c.options {
            let t0 = translate(prev[0], ca, cb);
            let t1 = translate(prev[1], ca, cb);
            if c.anchor {
                next[1] |= t0 | t1;
            } else {
                next[0] |= t0;
                next[1] |= t1;
            }
        }
        *work += 1;
        layers.push(next);
    }
    if layers.last().unwrap()[1] & 1 == 0 {
        return None;
    }
    let mut picks = Vec::new();
    let (mut a, mut b, mut flag) = (0u32, 0u32, 1usize);
    for (i, c) in cands.iter().enumerate().rev() {
        let prev = layers[i];
        if prev[flag] >> index(a as u64, b as u64) & 1 == 1 {
            continue;
        }
        let flags: &[usize] = match (c.anchor, flag) {
            (true, 1) => &[0, 1],
            (true, _) => &[],
            _ => &[flag],
        };
        let (pa, pb, pf, m) = c
            .options
            .iter()
            .flat_map(|&(ca, cb, m)| flags.iter().map(move |&f| ((a + 8 - ca) & 7, (b + 8 - cb) & 7, f, m)))
            .find(|&(pa, pb, pf, _)| prev[pf] >> index(pa as u64, pb as u64) & 1 == 1)
            .expect("DP layers are consistent");
        picks.push((c.leaf, m));
        a = pa;
        b = pb;
        flag = pf;
    }
    debug_assert!(a == 0 && b == 0 && flag == 0);
    picks.reverse();
    Some(ClosureHit { anchor_level: k, picks })
}
