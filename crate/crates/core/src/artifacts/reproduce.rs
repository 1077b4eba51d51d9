//! The reproduction battery: ten checks, each with an independent reference
//! and a wall-clock limit. Shared by `paper reproduce` and the acceptance
//! test target.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::Serialize;

use super::descent::verify_descent;
use super::gamma::{gamma_experiment, random_form, trial_rng};
use super::paper_forms::{build_paper_form, PaperForm};
use super::sweeps::{sweep_lemma, SweepMode, ONE_LEVEL, SAMPLED};
use super::worker_pool;
use crate::engine::{search_certificate, validate_certificate, NodeKind, SearchConfig, SearchOutcome};
use crate::forms::AdditiveForm;
use crate::oracle::{
    brute_force_powers, decide_isotropy_exhaustive, primitive_zero_mod, OracleConfig, OracleVerdict, PowerValueSet,
    ZeroSearch,
};
use crate::ring::{F4Class, MultiplierSet, RingElem};
use crate::solver::{decide_isotropy, verify_witness, SolverConfig, Verdict};

/// Seed used by every randomized check.
pub const SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    /// Degrees the check exercises.
    pub degrees: &'static [u32],
    #[serde(skip)]
    pub limit: Duration,
}

pub const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, name: "G has no primitive zero mod 4", degrees: &[6, 10], limit: secs(1) },
    Criterion { id: 2, name: "lower bound 3d/2: H anisotropic", degrees: &[6, 10], limit: secs(10 + 300) },
    Criterion { id: 3, name: "lower bound 3d: I anisotropic", degrees: &[6], limit: secs(30) },
    Criterion { id: 4, name: "upper bound 4d+1: d=6, s=25", degrees: &[6], limit: secs(1800) },
    Criterion { id: 5, name: "sharp bound 3d/2+1: d=10, s=16 vs H", degrees: &[10], limit: secs(1800) },
    Criterion { id: 6, name: "one-level lemma sweeps (exhaustive)", degrees: &[6], limit: secs(7200) },
    Criterion { id: 7, name: "two-level and d=10 sweeps (sampled)", degrees: &[6, 10], limit: secs(7200) },
    Criterion { id: 8, name: "solver agrees with exhaustive oracle", degrees: &[6], limit: secs(600) },
    Criterion { id: 9, name: "leaf abstraction is sound", degrees: &[6], limit: secs(600) },
    Criterion { id: 10, name: "ring kernel tables", degrees: &[6], limit: secs(60) },
];

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    /// The check itself held.
    pub correct: bool,
    pub within_limit: bool,
    pub passed: bool,
    pub detail: String,
    pub elapsed_ms: f64,
    pub limit_s: u64,
}

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn paper(name: PaperForm, d: u32) -> Result<AdditiveForm, String> {
    build_paper_form(name, d).map_err(err)
}

fn g_obstruction() -> Outcome {
    let config = OracleConfig::default();
    let mut visited = Vec::new();
    for d in [6, 10] {
        match primitive_zero_mod(&paper(PaperForm::G, d)?, 2, &config).map_err(err)? {
            ZeroSearch::None { states_visited } => visited.push(states_visited),
            ZeroSearch::Found(z) => return Err(format!("G(d={d}) has a primitive zero mod 4: {:?}", z.roots)),
        }
    }
    Ok(format!("no primitive zero mod 4 for d=6, 10 ({visited:?} states)"))
}

fn h_lower_bound() -> Outcome {
    let mut parts = Vec::new();
    for d in [6, 10] {
        let h = paper(PaperForm::H, d)?;
        ensure(h.len() == 3 * d as usize / 2, || format!("H(d={d}) has {} variables", h.len()))?;
        let started = Instant::now();
        let cert = verify_descent(&h).map_err(|f| format!("descent failed on H(d={d}): {f:?}"))?;
        let t = started.elapsed();
        ensure(t < secs(10), || format!("descent on H(d={d}) took {t:?}"))?;
        parts.push(format!("H(d={d}) descent in {} steps", cert.steps.len()));
    }
    let started = Instant::now();
    match decide_isotropy_exhaustive(&paper(PaperForm::H, 6)?, &OracleConfig::default()).map_err(err)? {
        OracleVerdict::Anisotropic(c) if c.modulus == 7 => {
            parts.push(format!("H(d=6) oracle M=7 anisotropic, {} states", c.states_visited))
        }
        other => return Err(format!("oracle on H(d=6): {other:?}")),
    }
    let t = started.elapsed();
    ensure(t < secs(300), || format!("oracle on H(d=6) took {t:?}"))?;
    Ok(parts.join("; "))
}

fn i_lower_bound() -> Outcome {
    let i = paper(PaperForm::I, 6)?;
    ensure(i.len() == 18, || format!("I(d=6) has {} variables", i.len()))?;
    let cert = verify_descent(&i).map_err(|f| format!("descent failed on I(d=6): {f:?}"))?;
    // {0,1,2,3} + 2w{0,1}
    let mut want: Vec<[u64; 2]> = (0..4).flat_map(|a| [[a, 0], [a, 2]]).collect();
    want.sort_unstable();
    let first = &cert.steps[0].window_values;
    ensure(*first == want, || format!("first window values {first:?}"))?;
    Ok(format!("descent in {} steps; first window values {{0,1,2,3}} + 2w{{0,1}}", cert.steps.len()))
}

fn random_isotropic(d: u32, s: usize, trials: u64, threads: Option<usize>) -> Outcome {
    let r = gamma_experiment(d, s, trials, SEED, &SolverConfig::default(), threads).map_err(err)?;
    ensure(r.isotropic == trials && r.bad_witnesses == 0, || {
        format!(
            "d={d} s={s}: {} isotropic, {} anisotropic, {} inconclusive {:?}, {} bad witnesses",
            r.isotropic, r.anisotropic, r.inconclusive, r.inconclusive_trials, r.bad_witnesses
        )
    })?;
    Ok(format!("d={d} s={s}: {trials}/{trials} isotropic, all witnesses verified"))
}

fn sharp_bound(threads: Option<usize>) -> Outcome {
    let upper = random_isotropic(10, 16, 1000, threads)?;
    let h = paper(PaperForm::H, 10)?;
    let result = decide_isotropy(&h, &SolverConfig::default()).map_err(err)?;
    ensure(h.len() == 15 && result.verdict == Verdict::Anisotropic, || {
        format!("H(d=10) with {} variables decided {:?}", h.len(), result.verdict)
    })?;
    Ok(format!("{upper}; H(d=10) s=15 anisotropic via {:?}", result.stage))
}

fn one_level_sweeps(threads: Option<usize>) -> Outcome {
    let mut parts = Vec::new();
    for id in ONE_LEVEL {
        let r = sweep_lemma(id, Some(6), Some(SweepMode::Exhaustive), threads).map_err(err)?;
        ensure(r.passed && r.failures.is_empty(), || {
            format!("{id}: {} failures, {} configurations vs declared {:?}", r.failures.len(), r.configurations, r.declared)
        })?;
        parts.push(format!("{id}: {}", r.configurations));
    }
    Ok(parts.join(", "))
}

fn sampled_sweeps(threads: Option<usize>) -> Outcome {
    let mut escalated = 0;
    for id in SAMPLED {
        let r = sweep_lemma(id, None, Some(SweepMode::Sampled { samples: 100_000, seed: SEED }), threads)
            .map_err(err)?;
        ensure(r.passed && r.failures.is_empty(), || {
            format!("{id} (d={}): {} failures, first {:?}", r.degree, r.failures.len(), r.failures.first())
        })?;
        escalated += r.escalated;
    }
    Ok(format!("{} lemmas x 100000 samples, seed {SEED}, 0 failures ({escalated} deepened)", SAMPLED.len()))
}

fn oracle_agreement(threads: Option<usize>) -> Outcome {
    let config = SolverConfig::default();
    let run = || {
        use rayon::prelude::*;
        (0..500u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(SEED, i);
                let s = rng.gen_range(1..=8);
                let form = random_form(&mut rng, 6, s, 5, 10);
                let solved = decide_isotropy(&form, &config).map_err(err)?;
                let oracle = decide_isotropy_exhaustive(&form, &config.oracle).map_err(err)?;
                let expected = match oracle {
                    OracleVerdict::Isotropic { .. } => Verdict::Isotropic,
                    OracleVerdict::Anisotropic(_) => Verdict::Anisotropic,
                };
                if solved.verdict != expected {
                    return Err(format!("trial {i}: solver {:?}, oracle {expected:?}", solved.verdict));
                }
                if let Some(w) = &solved.witness {
                    ensure(verify_witness(&form, w), || format!("trial {i}: bad witness"))?;
                }
                Ok((expected, solved.stage))
            })
            .collect::<Result<Vec<_>, String>>()
    };
    let rows = worker_pool(threads).install(run)?;
    let iso = rows.iter().filter(|r| r.0 == Verdict::Isotropic).count();
    let by_oracle = rows.iter().filter(|r| r.1 == crate::solver::Stage::Oracle).count();
    Ok(format!("500/500 agree ({iso} isotropic, {} anisotropic; {by_oracle} settled by the oracle stage)", 500 - iso))
}

/// Replaces every coefficient digit above `level + depth` with random ones.
fn complete<R: Rng>(form: &AdditiveForm, depth: u32, rng: &mut R) -> AdditiveForm {
    let k = form.precision();
    let coeffs = form
        .coeffs()
        .iter()
        .map(|c| {
            let known = (c.level().unwrap_or(k) + depth).min(k);
            let noise = RingElem::from_parts(rng.gen(), rng.gen(), k).shl(known);
            c.low_bits(known) + noise
        })
        .collect();
    AdditiveForm::new(form.degree(), coeffs).expect("completions keep the known digits")
}

fn abstraction_soundness(threads: Option<usize>) -> Outcome {
    const CERTS: usize = 100;
    const COMPLETIONS: u64 = 1000;
    let d = 6;
    let k = 24;
    let depth = 3;
    let mults = MultiplierSet::new(d, k).map_err(err)?;
    let search = SearchConfig { leaf_depth: depth, ..SearchConfig::default() };
    let mut found = Vec::new();
    let mut contractions = 0;
    let mut trial = 0u64;
    while found.len() < CERTS {
        let mut rng = trial_rng(SEED ^ 0x9e37, trial);
        trial += 1;
        let s = rng.gen_range(3..=9);
        let form = random_form(&mut rng, d, s, d, k);
        if let SearchOutcome::Found(cert, _) = search_certificate(&form, &mults, &search).map_err(err)? {
            contractions += cert.nodes.iter().filter(|n| n.kind == NodeKind::Contraction).count();
            found.push((form, cert));
        }
    }
    let run = || {
        use rayon::prelude::*;
        found
            .par_iter()
            .enumerate()
            .map(|(c, (form, cert))| {
                let mut rng = trial_rng(SEED ^ 0x51ed, c as u64);
                for j in 0..COMPLETIONS {
                    let full = complete(form, depth, &mut rng);
                    validate_certificate(&full, cert)
                        .map_err(|e| format!("certificate {c}, completion {j}: {e}"))?;
                }
                Ok(())
            })
            .collect::<Result<Vec<()>, String>>()
    };
    worker_pool(threads).install(run)?;
    Ok(format!(
        "{CERTS} certificates ({contractions} contractions, {trial} forms tried) x {COMPLETIONS} completions at K={k}"
    ))
}

fn ring_kernel() -> Outcome {
    // F4* is cyclic of order 3 generated by w: 1 = w^0, w = w^1, 1+w = w^2.
    let log = |x: F4Class| F4Class::NONZERO.iter().position(|&y| y == x);
    for x in F4Class::ALL {
        for y in F4Class::ALL {
            let product = match (log(x), log(y)) {
                (Some(i), Some(j)) => F4Class::NONZERO[(i + j) % 3],
                _ => F4Class::ZERO,
            };
            let sum = F4Class::from_bits(x.one_bit() ^ y.one_bit(), x.w_bit() ^ y.w_bit());
            ensure(x * y == product && x + y == sum, || format!("F4 table wrong at ({x}, {y})"))?;
            ensure((x.lift(4) * y.lift(4)).class() == product, || format!("lift product wrong at ({x}, {y})"))?;
        }
    }
    let mut sixth = Vec::new();
    let mut units = 0;
    for a in 0..8u64 {
        for b in 0..8u64 {
            let u = RingElem::from_parts(a, b, 3);
            if u.is_unit() {
                units += 1;
                sixth.push(u.pow(6).pair());
            }
        }
    }
    sixth.sort_unstable();
    sixth.dedup();
    ensure(units == 48 && sixth == vec![[1, 0], [5, 0]], || format!("{units} units, u^6 mod 8 in {sixth:?}"))?;
    for m in 1..=5 {
        let set = PowerValueSet::new(6, m).map_err(err)?;
        ensure(set.pairs() == brute_force_powers(6, m), || format!("power values differ at M={m}"))?;
    }
    Ok("16 F4 cases, u^6 mod 8 = {1, 5} over 48 units, power values match brute force for M = 1..5".into())
}

/// Runs criterion `id`; `threads` caps the worker pool.
pub fn run_criterion(id: u32, threads: Option<usize>) -> CriterionReport {
    let c = CRITERIA.iter().find(|c| c.id == id).copied().expect("criterion ids run 1..=10");
    let started = Instant::now();
    let outcome = match id {
        1 => g_obstruction(),
        2 => h_lower_bound(),
        3 => i_lower_bound(),
        4 => random_isotropic(6, 25, 1000, threads),
        5 => sharp_bound(threads),
        6 => one_level_sweeps(threads),
        7 => sampled_sweeps(threads),
        8 => oracle_agreement(threads),
        9 => abstraction_soundness(threads),
        _ => ring_kernel(),
    };
    let elapsed = started.elapsed();
    let within_limit = elapsed <= c.limit;
    let correct = outcome.is_ok();
    CriterionReport {
        id,
        name: c.name.to_string(),
        correct,
        within_limit,
        passed: correct && within_limit,
        detail: outcome.unwrap_or_else(|e| e),
        elapsed_ms: elapsed.as_secs_f64() * 1e3,
        limit_s: c.limit.as_secs(),
    }
}

/// Criteria touching degree `d`, or all of them.
pub fn criteria_for(d: Option<u32>) -> Vec<u32> {
    CRITERIA.iter().filter(|c| d.is_none_or(|d| c.degrees.contains(&d))).map(|c| c.id).collect()
}

/// One table line per report.
pub fn format_line(r: &CriterionReport) -> String {
    format!(
        "[{}] {:>2} {:<40} {:>10.1}s  {}",
        if r.passed { "PASS" } else { "FAIL" },
        r.id,
        r.name,
        r.elapsed_ms / 1e3,
        r.detail
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_criteria_pass() {
        for id in [1, 3, 10] {
            let r = run_criterion(id, Some(1));
            assert!(r.passed, "{}", format_line(&r));
        }
    }

    #[test]
    fn selection_by_degree() {
        assert_eq!(criteria_for(Some(10)), vec![1, 2, 5, 7]);
        assert_eq!(criteria_for(None).len(), 10);
    }

    #[test]
    fn completions_keep_known_digits() {
        let f = AdditiveForm::from_pairs(6, 20, &[(1, 2), (4, 8), (3, 0)]).unwrap();
        let mut rng = trial_rng(1, 1);
        for _ in 0..20 {
            let g = complete(&f, 3, &mut rng);
            for (a, b) in f.coeffs().iter().zip(g.coeffs()) {
                let known = a.level().unwrap() + 3;
                assert_eq!(a.low_bits(known), b.low_bits(known));
            }
        }
    }
}
