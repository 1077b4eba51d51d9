use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::closure::flat_closure;
use super::tactics::tactic_scan;
use super::{contract, leaves_for, ContractionCertificate, EngineError, PartialValue, VarNode};
use crate::forms::AdditiveForm;
use crate::ring::{MultiplierSet, Valuation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Digits known above each leaf's level.
    pub leaf_depth: u32,
    /// Cap on total work units (tactic expansions plus closure layers).
    pub budget: u64,
    /// Maximum number of tactic moves in one line of play; 0 skips tactics.
    pub tactic_depth: u32,
    /// Expansions allowed to the tactic phase before the closure takes over.
    pub tactic_budget: u64,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        SearchConfig { leaf_depth: 3, budget: 1_000_000, tactic_depth: 3, tactic_budget: 2_000 }
    }
}

impl SearchConfig {
    /// Closure only; used by the bulk sweeps.
    pub fn closure_only() -> SearchConfig {
        SearchConfig { tactic_depth: 0, tactic_budget: 0, ..SearchConfig::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub expansions: u64,
    pub memo_hits: u64,
    pub closure_layers: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(ContractionCertificate, SearchStats),
    NotFound(SearchStats),
    BudgetExhausted(SearchStats),
}

impl SearchOutcome {
    pub fn certificate(&self) -> Option<&ContractionCertificate> {
        match self {
            SearchOutcome::Found(c, _) => Some(c),
            _ => None,
        }
    }

    pub fn stats(&self) -> &SearchStats {
        match self {
            SearchOutcome::Found(_, s) | SearchOutcome::NotFound(s) | SearchOutcome::BudgetExhausted(s) => s,
        }
    }
}

/// Searches for a certificate on the coefficients of `form`, each leaf known
/// to `level + leaf_depth` digits.
pub fn search_certificate(
    form: &AdditiveForm,
    mults: &MultiplierSet,
    config: &SearchConfig,
) -> Result<SearchOutcome, EngineError> {
    search_leaves(&leaves_for(form, config.leaf_depth), mults, config)
}

/// Searches over explicit leaf values; variable `i` is `leaves[i]`.
pub fn search_leaves(
    leaves: &[PartialValue],
    mults: &MultiplierSet,
    config: &SearchConfig,
) -> Result<SearchOutcome, EngineError> {
    if leaves.len() > 128 {
        return Err(EngineError::TooManyLeaves(leaves.len()));
    }
    let mut stats = SearchStats::default();
    let arena: Vec<VarNode> =
        leaves.iter().enumerate().map(|(i, pv)| VarNode::leaf(i, i, *pv)).collect();

    if config.tactic_depth > 0 && config.tactic_budget > 0 {
        let mut t = Tactician {
            arena: arena.clone(),
            mults,
            failed: HashSet::new(),
            expansions: 0,
            budget: config.tactic_budget.min(config.budget),
            memo_hits: 0,
        };
        let live: Vec<usize> = (0..leaves.len()).collect();
        let mut found = None;
        for depth in 1..=config.tactic_depth {
            if let Some(root) = t.dfs(&live, depth) {
                found = Some(root);
                break;
            }
            if t.expansions >= t.budget {
                break;
            }
        }
        stats.expansions = t.expansions;
        stats.memo_hits = t.memo_hits;
        if let Some(root) = found {
            let cert = ContractionCertificate::from_arena(&t.arena, root, mults, "tactic");
            return Ok(SearchOutcome::Found(cert, stats));
        }
    }

    let mut work = 0;
    let hit = flat_closure(leaves, mults, &mut work);
    stats.closure_layers = work;
    if stats.expansions + work > config.budget {
        return Ok(SearchOutcome::BudgetExhausted(stats));
    }
    match hit {
        Some(hit) => {
            let mut arena = arena;
            let children: Vec<&VarNode> = hit.picks.iter().map(|&(leaf, _)| &arena[leaf]).collect();
            let choices: Vec<usize> = hit.picks.iter().map(|&(_, m)| m).collect();
            let root = contract(arena.len(), &children, &choices, mults)?;
            debug_assert!(root.is_certificate());
            let id = root.id;
            arena.push(root);
            let cert = ContractionCertificate::from_arena(&arena, id, mults, "closure");
            Ok(SearchOutcome::Found(cert, stats))
        }
        None => Ok(SearchOutcome::NotFound(stats)),
    }
}

/// Sorted `(value a, value b, known, anchor level)` of the live nodes.
type Signature = Vec<(u64, u64, u32, u32)>;

struct Tactician<'a> {
    arena: Vec<VarNode>,
    mults: &'a MultiplierSet,
    failed: HashSet<(Signature, u32)>,
    expansions: u64,
    budget: u64,
    memo_hits: u64,
}

impl Tactician<'_> {
    fn signature(&self, live: &[usize]) -> Signature {
        let mut sig: Vec<_> = live
            .iter()
            .map(|&i| {
                let n = &self.arena[i];
                (n.coeff.value().a(), n.coeff.value().b(), n.coeff.known(), n.anchor_level)
            })
            .collect();
        sig.sort_unstable();
        sig
    }

    /// Depth-limited search; returns the arena id of a certificate root.
    fn dfs(&mut self, live: &[usize], depth: u32) -> Option<usize> {
        if depth == 0 || self.expansions >= self.budget {
            return None;
        }
        let key = (self.signature(live), depth);
        if self.failed.contains(&key) {
            self.memo_hits += 1;
            return None;
        }
        let mut buckets: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for &i in live {
            if let Valuation::Finite(l) = self.arena[i].level {
                buckets.entry(l).or_default().push(i);
            }
        }
        for bucket in buckets.values().filter(|b| b.len() >= 2) {
            let nodes: Vec<&VarNode> = bucket.iter().map(|&i| &self.arena[i]).collect();
            let moves = tactic_scan(&nodes, self.mults);
            for mv in moves {
                if self.expansions >= self.budget {
                    return None;
                }
                self.expansions += 1;
                let mark = self.arena.len();
                let mut created = Vec::new();
                let mut usable = true;
                for g in &mv.groups {
                    let id = self.arena.len();
                    let children: Vec<&VarNode> = g.members.iter().map(|&m| &self.arena[m]).collect();
                    let node = contract(id, &children, &g.choices, self.mults).expect("scan yields valid moves");
                    if node.is_certificate() {
                        self.arena.push(node);
                        return Some(id);
                    }
                    if !matches!(node.level, Valuation::Finite(_)) {
                        usable = false;
                        break;
                    }
                    self.arena.push(node);
                    created.push(id);
                }
                if usable {
                    let used: Vec<usize> = mv.groups.iter().flat_map(|g| g.members.iter().copied()).collect();
                    let mut next: Vec<usize> = live.iter().copied().filter(|i| !used.contains(i)).collect();
                    next.extend(&created);
                    if let Some(root) = self.dfs(&next, depth - 1) {
                        return Some(root);
                    }
                }
                self.arena.truncate(mark);
            }
        }
        if self.expansions < self.budget {
            self.failed.insert(key);
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::validate_certificate;

    fn form(pairs: &[(i128, i128)]) -> AdditiveForm {
        AdditiveForm::from_pairs(6, 10, pairs).unwrap()
    }

    fn run(f: &AdditiveForm, config: SearchConfig) -> SearchOutcome {
        let m = MultiplierSet::new(f.degree(), f.precision()).unwrap();
        search_certificate(f, &m, &config).unwrap()
    }

    #[test]
    fn four_equal_units() {
        let f = form(&[(1, 0), (1, 0), (1, 0), (1, 0)]);
        for config in [SearchConfig::default(), SearchConfig::closure_only()] {
            let out = run(&f, config);
            let cert = out.certificate().expect("certificate");
            assert!(cert.achieved.is_at_least(3));
            validate_certificate(&f, cert).unwrap();
        }
    }

    #[test]
    fn one_plus_seven() {
        let f = form(&[(1, 0), (7, 0)]);
        let out = run(&f, SearchConfig::default());
        let cert = out.certificate().unwrap();
        assert_eq!(cert.anchor_level, 0);
        assert_eq!(cert.contraction_count(), 1);
        validate_certificate(&f, cert).unwrap();
    }

    #[test]
    fn different_classes_not_found() {
        let f = form(&[(1, 0), (1, 2)]);
        assert!(matches!(run(&f, SearchConfig::default()), SearchOutcome::NotFound(_)));
        assert!(matches!(run(&f, SearchConfig::closure_only()), SearchOutcome::NotFound(_)));
    }

    #[test]
    fn tiny_budget_is_reported() {
        let f = form(&[(1, 0), (1, 2), (1, 0), (3, 2)]);
        let config = SearchConfig { budget: 0, ..SearchConfig::default() };
        assert!(matches!(run(&f, config), SearchOutcome::BudgetExhausted(_)));
    }
}
