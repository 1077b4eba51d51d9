//! Move generators for one level bucket. Each shape is a contraction pattern
//! used in the hand proofs: pairs that climb one or two levels, triplets with
//! one variable per class, quadruplets, and splits of a class into two pairs
//! landing in distinct classes.

use std::collections::HashSet;

use serde::Serialize;

use super::{PartialValue, VarNode};
use crate::ring::{F4Class, MultiplierSet, Valuation};

/// Buckets larger than this skip the quartic move shapes.
const WIDE_BUCKET: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum MoveShape {
    ComplementaryPair,
    Quadruplet,
    Triplet,
    SameClassPair,
    AmongThree,
    FiveInClassSplit,
    Pair,
    CrossClass,
}

/// Children (node ids) of one new node and the multiplier index for each.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Group {
    pub members: Vec<usize>,
    pub choices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Move {
    pub shape: MoveShape,
    pub groups: Vec<Group>,
    /// Smallest number of levels any group climbs, counting an unresolved
    /// result as reaching its known precision.
    pub gain: u32,
}

struct Entry {
    id: usize,
    coeff: PartialValue,
    class: F4Class,
    one_class: F4Class,
}

fn digits(value: &PartialValue, level: u32) -> (F4Class, F4Class) {
    let v = value.value();
    let class = F4Class::from_bits(v.a() >> level, v.b() >> level);
    let one = F4Class::from_bits(v.a() >> (level + 1), v.b() >> (level + 1));
    (class, one)
}

fn climb(value: &PartialValue, level: u32) -> u32 {
    match value.valuation() {
        Valuation::Finite(v) | Valuation::AtLeast(v) => v.saturating_sub(level),
    }
}

fn group_value(entries: &[&Entry], choices: &[usize], mults: &MultiplierSet) -> PartialValue {
    entries
        .iter()
        .zip(choices)
        .map(|(e, &m)| e.coeff.scale(&mults.get(m).value))
        .reduce(|acc, t| acc.add(&t))
        .expect("non-empty group")
}

/// Every choice vector with the first child fixed to the identity multiplier;
/// a common unit factor never changes whether a sum vanishes.
fn choice_vectors(n: usize, allowed: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![allowed[0]]];
    for _ in 1..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                allowed.iter().map(move |&m| {
                    let mut w = v.clone();
                    w.push(m);
                    w
                })
            })
            .collect();
    }
    out
}

/// Enumerates the admissible moves among nodes sharing one level, most
/// promising first. Nodes whose level is not determined are ignored.
pub fn tactic_scan(bucket: &[&VarNode], mults: &MultiplierSet) -> Vec<Move> {
    let Some(level) = bucket.iter().find_map(|n| n.level.finite()) else {
        return Vec::new();
    };
    let entries: Vec<Entry> = bucket
        .iter()
        .filter(|n| n.level == Valuation::Finite(level) && n.coeff.known() > level + 1)
        .map(|n| {
            let (class, one_class) = digits(&n.coeff, level);
            Entry { id: n.id, coeff: n.coeff, class, one_class }
        })
        .collect();
    let identity = mults.find(0, 0).expect("identity multiplier");
    let unit_eps: Vec<usize> = (0..mults.len()).filter(|&m| mults.get(m).class_index == 0).collect();
    let all: Vec<usize> = (0..mults.len()).collect();
    debug_assert_eq!(unit_eps[0], identity);

    let mut seen = HashSet::new();
    let mut moves = Vec::new();
    let mut push = |shape: MoveShape, groups: Vec<Group>, gain: u32, key: Vec<(u64, u64, usize)>| {
        if seen.insert((shape, key)) {
            moves.push(Move { shape, groups, gain });
        }
    };
    let key_of = |es: &[&Entry], choices: &[usize]| -> Vec<(u64, u64, usize)> {
        let mut k: Vec<_> = es
            .iter()
            .zip(choices)
            .map(|(e, &m)| (e.coeff.value().a(), e.coeff.value().b(), m))
            .collect();
        k.sort_unstable();
        k
    };

    let n = entries.len();
    // pairs
    for i in 0..n {
        for j in i + 1..n {
            let pair = [&entries[i], &entries[j]];
            for choices in choice_vectors(2, &all) {
                let value = group_value(&pair, &choices, mults);
                let gain = climb(&value, level);
                let class_changed = mults.get(choices[1]).class_index != 0;
                let shape = if gain == 0 {
                    MoveShape::CrossClass
                } else if class_changed {
                    MoveShape::Pair
                } else if gain >= 2 {
                    MoveShape::ComplementaryPair
                } else if pair[0].one_class == pair[1].one_class {
                    MoveShape::SameClassPair
                } else {
                    MoveShape::AmongThree
                };
                let group = Group { members: vec![pair[0].id, pair[1].id], choices: choices.clone() };
                push(shape, vec![group], gain, key_of(&pair, &choices));
            }
        }
    }
    // triplets: one variable in each nonzero class
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let t = [&entries[i], &entries[j], &entries[k]];
                if t[0].class == t[1].class || t[0].class == t[2].class || t[1].class == t[2].class {
                    continue;
                }
                for choices in choice_vectors(3, &unit_eps) {
                    let value = group_value(&t, &choices, mults);
                    let gain = climb(&value, level);
                    let group = Group { members: t.iter().map(|e| e.id).collect(), choices: choices.clone() };
                    push(MoveShape::Triplet, vec![group], gain, key_of(&t, &choices));
                }
            }
        }
    }
    if n > WIDE_BUCKET {
        return sorted(moves);
    }
    // quadruplets: four variables in one class
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    let q = [&entries[i], &entries[j], &entries[k], &entries[l]];
                    if q.iter().any(|e| e.class != q[0].class) {
                        continue;
                    }
                    for choices in choice_vectors(4, &unit_eps) {
                        let value = group_value(&q, &choices, mults);
                        let gain = climb(&value, level);
                        if gain < 2 {
                            continue;
                        }
                        let group = Group { members: q.iter().map(|e| e.id).collect(), choices: choices.clone() };
                        push(MoveShape::Quadruplet, vec![group], gain, key_of(&q, &choices));
                    }
                }
            }
        }
    }
    // two disjoint same-class pairs landing one level up in distinct classes
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| entries[i].class == entries[j].class).collect();
    for (x, &(i, j)) in pairs.iter().enumerate() {
        for &(k, l) in &pairs[x + 1..] {
            if [k, l].iter().any(|v| *v == i || *v == j) || entries[k].class != entries[i].class {
                continue;
            }
            let p = [&entries[i], &entries[j]];
            let q = [&entries[k], &entries[l]];
            for cp in choice_vectors(2, &unit_eps) {
                let vp = group_value(&p, &cp, mults);
                if vp.valuation() != Valuation::Finite(level + 1) {
                    continue;
                }
                for cq in choice_vectors(2, &unit_eps) {
                    let vq = group_value(&q, &cq, mults);
                    if vq.valuation() != Valuation::Finite(level + 1) {
                        continue;
                    }
                    if digits(&vp, level + 1).0 == digits(&vq, level + 1).0 {
                        continue;
                    }
                    let mut key = key_of(&p, &cp);
                    key.push((u64::MAX, 0, 0));
                    key.extend(key_of(&q, &cq));
                    let groups = vec![
                        Group { members: vec![p[0].id, p[1].id], choices: cp.clone() },
                        Group { members: vec![q[0].id, q[1].id], choices: cq.clone() },
                    ];
                    push(MoveShape::FiveInClassSplit, groups, 1, key);
                }
            }
        }
    }
    sorted(moves)
}

fn sorted(mut moves: Vec<Move>) -> Vec<Move> {
    moves.sort_by(|x, y| {
        y.gain
            .min(3)
            .cmp(&x.gain.min(3))
            .then(x.shape.cmp(&y.shape))
            .then_with(|| x.groups[0].members.cmp(&y.groups[0].members))
    });
    moves
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::RingElem;

    fn nodes(vals: &[(u64, u64)], known: u32) -> Vec<VarNode> {
        vals.iter()
            .enumerate()
            .map(|(i, &(a, b))| VarNode::leaf(i, i, PartialValue::new(RingElem::from_parts(a, b, 10), known)))
            .collect()
    }

    #[test]
    fn pair_and_cross_class_moves() {
        let m = MultiplierSet::new(6, 10).unwrap();
        let ns = nodes(&[(1, 0), (1, 0), (0, 1)], 3);
        let refs: Vec<&VarNode> = ns.iter().collect();
        let moves = tactic_scan(&refs, &m);
        assert!(moves.iter().any(|mv| mv.shape == MoveShape::SameClassPair && mv.groups[0].members == vec![0, 1]));
        assert!(moves.iter().any(|mv| mv.shape == MoveShape::CrossClass));
        assert!(moves.iter().all(|mv| mv.gain <= 1 || mv.shape != MoveShape::CrossClass));
    }

    #[test]
    fn quadruplet_reaches_three() {
        let m = MultiplierSet::new(6, 10).unwrap();
        // one class, 1-class 1, 2-classes 0, 0, 1, 1 (sum 0)
        let ns = nodes(&[(3, 0), (3, 0), (7, 0), (7, 0)], 3);
        let refs: Vec<&VarNode> = ns.iter().collect();
        let moves = tactic_scan(&refs, &m);
        assert!(moves.iter().any(|mv| mv.shape == MoveShape::Quadruplet && mv.gain >= 3));
    }

    #[test]
    fn seven_in_one_class_gives_three_same_pairs() {
        let m = MultiplierSet::new(6, 10).unwrap();
        // 1-classes 0 and w: noncomplementary for class 1
        let ns = nodes(&[(1, 0), (1, 0), (1, 0), (1, 0), (1, 2), (1, 2), (1, 2)], 3);
        let refs: Vec<&VarNode> = ns.iter().collect();
        let moves = tactic_scan(&refs, &m);
        let same: Vec<_> = moves.iter().filter(|mv| mv.shape == MoveShape::SameClassPair).collect();
        // identical value pairs are deduplicated, so one move per 1-class remains
        assert!(same.iter().any(|mv| mv.groups[0].members == vec![0, 1]));
        assert!(same.iter().any(|mv| mv.groups[0].members == vec![4, 5]));
        assert!(same.iter().all(|mv| mv.gain == 1));
    }

    #[test]
    fn triplet_one_per_class() {
        let m = MultiplierSet::new(6, 10).unwrap();
        let ns = nodes(&[(1, 0), (0, 1), (1, 1)], 3);
        let refs: Vec<&VarNode> = ns.iter().collect();
        let moves = tactic_scan(&refs, &m);
        let t: Vec<_> = moves.iter().filter(|mv| mv.shape == MoveShape::Triplet).collect();
        assert!(!t.is_empty());
        assert!(t.iter().all(|mv| mv.gain >= 1));
    }
}
