//! Contraction calculus and the search for Hensel certificates.
//!
//! A contraction replaces a group of terms `a_i x_i^d` by a single term
//! `(sum a_i lambda_i^d) y^d` through the substitution `x_i = lambda_i y`.
//! Coefficients are tracked as [`PartialValue`]s so that one search can stand
//! for every completion of digits that were never looked at. A certificate is
//! a contraction tree whose root reaches at least three levels above its
//! lowest leaf; Newton's method then turns it into a genuine zero.

mod closure;
mod search;
mod tactics;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms::{AdditiveForm, FormError};
use crate::ring::{self, MultiplierSet, RingElem, RingError, Valuation};

pub use search::{search_certificate, search_leaves, SearchConfig, SearchOutcome, SearchStats};
pub use tactics::{tactic_scan, Group, Move, MoveShape};

/// Levels a contraction must climb above its anchor before Newton applies.
pub const LIFT: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("a contraction needs at least two children, got {0}")]
    TooFewChildren(usize),
    #[error("children share original variables")]
    OverlappingLeaves,
    #[error("{children} children but {choices} multiplier choices")]
    ChoiceCount { children: usize, choices: usize },
    #[error("multiplier index {0} out of range")]
    BadMultiplier(usize),
    #[error("tactic search supports at most 128 variables, got {0}")]
    TooManyLeaves(usize),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Form(#[from] FormError),
}

/// A coefficient known only modulo `2^known`. The stored representative is
/// reduced modulo `2^known`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PartialValue {
    value: RingElem,
    known: u32,
}

impl PartialValue {
    pub fn new(value: RingElem, known: u32) -> PartialValue {
        let known = known.min(value.precision());
        PartialValue { value: value.low_bits(known), known }
    }

    pub fn exact(value: RingElem) -> PartialValue {
        PartialValue { value, known: value.precision() }
    }

    pub fn value(&self) -> RingElem {
        self.value
    }

    pub fn known(&self) -> u32 {
        self.known
    }

    pub fn add(&self, other: &PartialValue) -> PartialValue {
        PartialValue::new(self.value + other.value, self.known.min(other.known))
    }

    /// Product with an exactly known unit; the known precision is unchanged.
    pub fn scale(&self, unit: &RingElem) -> PartialValue {
        PartialValue::new(self.value * *unit, self.known)
    }

    /// Determined valuation, or a lower bound of `known` when every known digit is 0.
    pub fn valuation(&self) -> Valuation {
        match self.value.valuation() {
            Valuation::Finite(v) if v < self.known => Valuation::Finite(v),
            _ => Valuation::AtLeast(self.known),
        }
    }

    /// True when every completion is `0 mod 2^bound`.
    pub fn vanishes_to(&self, bound: u32) -> bool {
        bound <= self.known && self.value.low_bits(bound).is_zero()
    }
}

impl fmt::Display for PartialValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod 2^{})", self.value, self.known)
    }
}

/// Set of original variable indices, limited to 128 variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LeafSet(u128);

impl LeafSet {
    pub fn single(index: usize) -> LeafSet {
        assert!(index < 128);
        LeafSet(1u128 << index)
    }

    pub fn union(self, other: LeafSet) -> LeafSet {
        LeafSet(self.0 | other.0)
    }

    pub fn intersects(self, other: LeafSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn contains(self, index: usize) -> bool {
        index < 128 && self.0 >> index & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..128).filter(move |&i| self.0 >> i & 1 == 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Leaf(usize),
    /// Child node ids with the multiplier index applied to each.
    Contraction(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarNode {
    pub id: usize,
    pub coeff: PartialValue,
    pub level: Valuation,
    /// Lowest level among the leaves below this node.
    pub anchor_level: u32,
    pub leaves: LeafSet,
    pub provenance: Provenance,
}

impl VarNode {
    pub fn leaf(id: usize, index: usize, coeff: PartialValue) -> VarNode {
        let level = coeff.valuation();
        VarNode {
            id,
            coeff,
            level,
            anchor_level: level.lower_bound(),
            leaves: LeafSet::single(index),
            provenance: Provenance::Leaf(index),
        }
    }

    /// Whether this node already proves a zero: every completion vanishes
    /// three levels above the anchor.
    pub fn is_certificate(&self) -> bool {
        !matches!(self.provenance, Provenance::Leaf(_)) && self.coeff.vanishes_to(self.anchor_level + LIFT)
    }
}

/// Contracts `children` with the given multiplier rep per child.
pub fn contract(
    id: usize,
    children: &[&VarNode],
    choices: &[usize],
    mults: &MultiplierSet,
) -> Result<VarNode, EngineError> {
    if children.len() < 2 {
        return Err(EngineError::TooFewChildren(children.len()));
    }
    if children.len() != choices.len() {
        return Err(EngineError::ChoiceCount { children: children.len(), choices: choices.len() });
    }
    let mut leaves = LeafSet::default();
    for c in children {
        if leaves.intersects(c.leaves) {
            return Err(EngineError::OverlappingLeaves);
        }
        leaves = leaves.union(c.leaves);
    }
    let mut coeff: Option<PartialValue> = None;
    for (c, &m) in children.iter().zip(choices) {
        if m >= mults.len() {
            return Err(EngineError::BadMultiplier(m));
        }
        let term = c.coeff.scale(&mults.get(m).value);
        coeff = Some(match coeff {
            None => term,
            Some(acc) => acc.add(&term),
        });
    }
    let coeff = coeff.expect("at least two children");
    Ok(VarNode {
        id,
        coeff,
        level: coeff.valuation(),
        anchor_level: children.iter().map(|c| c.anchor_level).min().unwrap_or(0),
        leaves,
        provenance: Provenance::Contraction(
            children.iter().zip(choices).map(|(c, &m)| (c.id, m)).collect(),
        ),
    })
}

/// Builds leaves for a reduced form, each known to `level + depth` digits.
pub fn leaves_for(form: &AdditiveForm, depth: u32) -> Vec<PartialValue> {
    form.coeffs()
        .iter()
        .zip(form.levels())
        .map(|(c, l)| PartialValue::new(*c, l + depth))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Leaf,
    Contraction,
}

/// One node of a certificate tree. `multiplier` is the `d`-th power the
/// parent applies to this node (1 at the root).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertNode {
    pub id: usize,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<usize>,
    #[serde(default)]
    pub children: Vec<usize>,
    pub multiplier: [u64; 2],
    pub class_index: u8,
    pub epsilon: u8,
    pub value: [u64; 2],
    pub known: u32,
    pub level: Valuation,
}

/// Contraction tree proving, via Newton's method, that a form has a zero.
/// Nodes are stored children-first; the root is the last node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub degree: u32,
    pub precision: u32,
    pub nodes: Vec<CertNode>,
    pub root: usize,
    pub anchor: usize,
    pub anchor_level: u32,
    pub achieved: Valuation,
    /// Which search phase produced the tree.
    pub phase: String,
}

impl ContractionCertificate {
    /// Extracts the subtree rooted at `root` from a search arena.
    pub(crate) fn from_arena(
        arena: &[VarNode],
        root: usize,
        mults: &MultiplierSet,
        phase: &str,
    ) -> ContractionCertificate {
        let mut order = Vec::new();
        let mut parent_mult = std::collections::HashMap::new();
        collect_postorder(arena, root, &mut order, &mut parent_mult);
        let remap: std::collections::HashMap<usize, usize> =
            order.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let identity = mults.find(0, 0).expect("identity multiplier");
        let nodes: Vec<CertNode> = order
            .iter()
            .enumerate()
            .map(|(new_id, &old)| {
                let node = &arena[old];
                let m = *parent_mult.get(&old).unwrap_or(&identity);
                let rep = mults.get(m);
                let (kind, var, children) = match &node.provenance {
                    Provenance::Leaf(i) => (NodeKind::Leaf, Some(*i), Vec::new()),
                    Provenance::Contraction(kids) => {
                        (NodeKind::Contraction, None, kids.iter().map(|(k, _)| remap[k]).collect())
                    }
                };
                CertNode {
                    id: new_id,
                    kind,
                    var,
                    children,
                    multiplier: rep.value.pair(),
                    class_index: rep.class_index,
                    epsilon: rep.eps,
                    value: node.coeff.value().pair(),
                    known: node.coeff.known(),
                    level: node.level,
                }
            })
            .collect();
        let root_node = &arena[root];
        let anchor_level = root_node.anchor_level;
        let anchor = nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Leaf)
            .find(|n| n.level == Valuation::Finite(anchor_level))
            .and_then(|n| n.var)
            .expect("anchor leaf present");
        ContractionCertificate {
            degree: mults.degree,
            precision: mults.precision,
            root: nodes.len() - 1,
            nodes,
            anchor,
            anchor_level,
            achieved: root_node.coeff.valuation(),
            phase: phase.to_string(),
        }
    }

    pub fn leaf_vars(&self) -> Vec<usize> {
        self.nodes.iter().filter_map(|n| n.var).collect()
    }

    pub fn contraction_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Contraction).count()
    }

    /// Product of the multiplier roots on the path from each leaf to the root.
    pub fn leaf_roots(&self, mults: &MultiplierSet) -> Vec<(usize, RingElem)> {
        let mut parent = vec![None; self.nodes.len()];
        for n in &self.nodes {
            for &c in &n.children {
                parent[c] = Some(n.id);
            }
        }
        self.nodes
            .iter()
            .filter_map(|n| n.var.map(|v| (n.id, v)))
            .map(|(id, var)| {
                let mut x = RingElem::one(mults.precision);
                let mut cur = Some(id);
                while let Some(i) = cur {
                    let node = &self.nodes[i];
                    if let Some(idx) = mults.find(node.class_index, node.epsilon) {
                        x = x * mults.get(idx).root;
                    }
                    cur = parent[i];
                }
                (var, x)
            })
            .collect()
    }
}

fn collect_postorder(
    arena: &[VarNode],
    id: usize,
    order: &mut Vec<usize>,
    parent_mult: &mut std::collections::HashMap<usize, usize>,
) {
    if let Provenance::Contraction(kids) = &arena[id].provenance {
        for &(k, m) in kids {
            parent_mult.insert(k, m);
            collect_postorder(arena, k, order, parent_mult);
        }
    }
    order.push(id);
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("certificate is for degree {cert} / precision {cert_prec}, form has {form} / {form_prec}")]
    Shape { cert: u32, cert_prec: u32, form: u32, form_prec: u32 },
    #[error("malformed tree: {0}")]
    Structure(String),
    #[error("variable {0} used by more than one leaf")]
    OverlappingLeaves(usize),
    #[error("multiplier of node {0} is not a d-th power from the multiplier set")]
    Multiplier(usize),
    #[error("node {0} disagrees with the form on its known digits")]
    ValueMismatch(usize),
    #[error("node {node} sits at level {level}, below child level {child}")]
    LevelDrop { node: usize, level: u32, child: u32 },
    #[error("anchor {0} is not a lowest-level leaf of the tree")]
    Anchor(usize),
    #[error("root valuation {found} is below the required {required}")]
    TooShallow { found: Valuation, required: u32 },
}

/// Recomputes the tree with exact arithmetic on the coefficients of `form`
/// (which must be the frame the certificate was found in).
pub fn validate_certificate(
    form: &AdditiveForm,
    cert: &ContractionCertificate,
) -> Result<(), ValidationError> {
    let k = form.precision();
    if cert.degree != form.degree() || cert.precision != k {
        return Err(ValidationError::Shape {
            cert: cert.degree,
            cert_prec: cert.precision,
            form: form.degree(),
            form_prec: k,
        });
    }
    let structure = |m: &str| Err(ValidationError::Structure(m.to_string()));
    let mults = MultiplierSet::new(cert.degree, k)
        .map_err(|e| ValidationError::Structure(e.to_string()))?;
    let n = cert.nodes.len();
    if n == 0 || cert.root != n - 1 {
        return structure("root must be the last node");
    }
    let mut has_parent = vec![false; n];
    let mut used = vec![false; form.len()];
    let mut exact: Vec<RingElem> = Vec::with_capacity(n);
    let mut min_leaf: Vec<u32> = Vec::with_capacity(n);
    let mut levels: Vec<u32> = Vec::with_capacity(n);
    for (i, node) in cert.nodes.iter().enumerate() {
        if node.id != i {
            return structure("node ids must be positional");
        }
        let mult_ok = mults
            .find(node.class_index, node.epsilon)
            .map(|m| mults.get(m).value.pair() == node.multiplier)
            .unwrap_or(false);
        if !mult_ok {
            return Err(ValidationError::Multiplier(i));
        }
        let (value, lowest) = match node.kind {
            NodeKind::Leaf => {
                let var = node.var.ok_or(ValidationError::Structure(format!("leaf {i} without var")))?;
                if var >= form.len() {
                    return structure("leaf references a missing variable");
                }
                if std::mem::replace(&mut used[var], true) {
                    return Err(ValidationError::OverlappingLeaves(var));
                }
                if !node.children.is_empty() {
                    return structure("leaf with children");
                }
                let c = form.coeffs()[var];
                (c, c.level().unwrap_or(k))
            }
            NodeKind::Contraction => {
                if node.children.len() < 2 {
                    return structure("contraction with fewer than two children");
                }
                let mut sum = RingElem::zero(k);
                let mut lowest = u32::MAX;
                let mut highest_child = 0;
                for &c in &node.children {
                    if c >= i || std::mem::replace(&mut has_parent[c], true) {
                        return structure("children must precede their unique parent");
                    }
                    let rep = RingElem::from_parts(cert.nodes[c].multiplier[0], cert.nodes[c].multiplier[1], k);
                    sum = sum + exact[c] * rep;
                    lowest = lowest.min(min_leaf[c]);
                    highest_child = highest_child.max(levels[c]);
                }
                let level = sum.valuation().lower_bound();
                if level < highest_child {
                    return Err(ValidationError::LevelDrop { node: i, level, child: highest_child });
                }
                (sum, lowest)
            }
        };
        let known = node.known.min(k);
        let stored = RingElem::from_parts(node.value[0], node.value[1], k);
        if value.low_bits(known) != stored.low_bits(known) {
            return Err(ValidationError::ValueMismatch(i));
        }
        levels.push(value.valuation().lower_bound());
        exact.push(value);
        min_leaf.push(lowest);
    }
    let anchor_ok = cert.nodes.iter().any(|n| n.var == Some(cert.anchor))
        && form.coeffs().get(cert.anchor).and_then(|c| c.level()) == Some(cert.anchor_level)
        && min_leaf[cert.root] == cert.anchor_level;
    if !anchor_ok {
        return Err(ValidationError::Anchor(cert.anchor));
    }
    let required = cert.anchor_level + LIFT;
    let root_val = exact[cert.root].valuation();
    if !root_val.is_at_least(required) || !cert.achieved.is_at_least(required) {
        return Err(ValidationError::TooShallow { found: root_val, required });
    }
    Ok(())
}

/// Margin check used by callers that pick their own anchor.
pub fn lift_margin(degree: u32) -> u32 {
    ring::hensel_margin(degree)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(id: usize, a: u64, b: u64, known: u32) -> VarNode {
        VarNode::leaf(id, id, PartialValue::new(RingElem::from_parts(a, b, 10), known))
    }

    fn rep(m: &MultiplierSet, eps: u8) -> usize {
        m.find(0, eps).unwrap()
    }

    #[test]
    fn partial_value_arithmetic() {
        let x = PartialValue::new(RingElem::from_parts(13, 6, 10), 3);
        assert_eq!(x.value(), RingElem::from_parts(5, 6, 10));
        let y = PartialValue::new(RingElem::from_parts(3, 2, 10), 5);
        let s = x.add(&y);
        assert_eq!(s.known(), 3);
        assert_eq!(s.valuation(), Valuation::AtLeast(3));
        assert_eq!(PartialValue::new(RingElem::from_parts(8, 0, 10), 3).valuation(), Valuation::AtLeast(3));
        assert_eq!(PartialValue::new(RingElem::from_parts(4, 0, 10), 5).valuation(), Valuation::Finite(2));
    }

    #[test]
    fn contract_examples() {
        let m = MultiplierSet::new(6, 10).unwrap();
        let one = rep(&m, 0);
        let five = rep(&m, 1);
        // same 0,1-class pair climbs one level and keeps its class
        let (a, b) = (leaf(0, 1, 0, 3), leaf(1, 1, 0, 3));
        let n = contract(2, &[&a, &b], &[one, one], &m).unwrap();
        assert_eq!(n.level, Valuation::Finite(1));
        assert_eq!(n.coeff.value().shr(1).class(), crate::ring::F4Class::ONE);
        // complementary 1-classes climb two levels
        let (a, b) = (leaf(0, 1, 0, 3), leaf(1, 3, 0, 3));
        let n = contract(2, &[&a, &b], &[one, one], &m).unwrap();
        assert_eq!(n.level, Valuation::Finite(2));
        // freeness: 5 + 3 = 8
        let n = contract(2, &[&a, &b], &[five, one], &m).unwrap();
        assert_eq!(n.level, Valuation::AtLeast(3));
        assert!(n.is_certificate());
        // one of each class
        let (a, b, c) = (leaf(0, 1, 0, 3), leaf(1, 0, 1, 3), leaf(2, 1, 1, 3));
        let n = contract(3, &[&a, &b, &c], &[one, one, one], &m).unwrap();
        assert_eq!(n.level, Valuation::Finite(1));
        assert_eq!(n.coeff.value().low_bits(2), RingElem::from_parts(2, 2, 10));
    }

    #[test]
    fn contract_errors() {
        let m = MultiplierSet::new(6, 10).unwrap();
        let a = leaf(0, 1, 0, 3);
        assert_eq!(contract(1, &[&a], &[0], &m).unwrap_err(), EngineError::TooFewChildren(1));
        assert_eq!(contract(1, &[&a, &a], &[0, 0], &m).unwrap_err(), EngineError::OverlappingLeaves);
        let b = leaf(1, 1, 0, 3);
        assert!(matches!(contract(2, &[&a, &b], &[0], &m), Err(EngineError::ChoiceCount { .. })));
        assert_eq!(contract(2, &[&a, &b], &[0, 9], &m).unwrap_err(), EngineError::BadMultiplier(9));
    }

    #[test]
    fn leaf_set_basics() {
        let s = LeafSet::single(3).union(LeafSet::single(70));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3, 70]);
        assert!(s.contains(70) && !s.contains(4));
        assert!(s.intersects(LeafSet::single(3)));
        assert_eq!(s.len(), 2);
    }
}
