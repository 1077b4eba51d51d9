//! Random-form experiments around Γ*: sample forms, decide each one, tally
//! verdicts and archive anisotropic forms with more than `3d` variables.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::worker_pool;
use crate::forms::AdditiveForm;
use crate::io::FormFile;
use crate::ring::RingElem;
use crate::solver::{decide_isotropy, verify_witness, SolverConfig, SolverError, Verdict};

/// Generator for trial `index` of a seeded run; independent of thread count.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `s` coefficients `2^l u` with `l` uniform below `max_level` and `u` a
/// uniform unit modulo `2^(K - l)`.
pub fn random_form<R: Rng>(rng: &mut R, d: u32, s: usize, max_level: u32, precision: u32) -> AdditiveForm {
    let coeffs = (0..s)
        .map(|_| {
            let level = rng.gen_range(0..max_level);
            let unit = loop {
                let (a, b) = (rng.gen::<u64>(), rng.gen::<u64>());
                if a & 1 == 1 || b & 1 == 1 {
                    break RingElem::from_parts(a, b, precision);
                }
            };
            unit.shl(level)
        })
        .collect();
    AdditiveForm::new(d, coeffs).expect("units shifted below the precision are nonzero")
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaReport {
    pub degree: u32,
    pub variables: usize,
    pub trials: u64,
    pub seed: u64,
    pub precision: u32,
    pub isotropic: u64,
    pub anisotropic: u64,
    pub inconclusive: u64,
    /// Isotropic verdicts whose witness did not check out; must stay 0.
    pub bad_witnesses: u64,
    /// Anisotropic forms with more than `3d` variables.
    pub archived: Vec<FormFile>,
    /// Trial indices of the inconclusive forms.
    pub inconclusive_trials: Vec<u64>,
    pub elapsed_ms: f64,
}

/// Runs `trials` seeded forms of degree `d` in `s` variables, levels uniform
/// in `0..d`, at precision `d + 4`.
pub fn gamma_experiment(
    d: u32,
    s: usize,
    trials: u64,
    seed: u64,
    config: &SolverConfig,
    threads: Option<usize>,
) -> Result<GammaReport, SolverError> {
    let start = Instant::now();
    let precision = d + 4;
    let run = || {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let form = random_form(&mut trial_rng(seed, i), d, s, d, precision);
                let result = decide_isotropy(&form, config)?;
                let good = result.witness.as_ref().is_none_or(|w| verify_witness(&form, w));
                Ok((i, result.verdict, good, form))
            })
            .collect::<Result<Vec<_>, SolverError>>()
    };
    let outcomes = worker_pool(threads).install(run)?;
    let mut report = GammaReport {
        degree: d,
        variables: s,
        trials,
        seed,
        precision,
        isotropic: 0,
        anisotropic: 0,
        inconclusive: 0,
        bad_witnesses: 0,
        archived: Vec::new(),
        inconclusive_trials: Vec::new(),
        elapsed_ms: 0.0,
    };
    for (i, verdict, good, form) in outcomes {
        match verdict {
            Verdict::Isotropic => report.isotropic += 1,
            Verdict::Anisotropic => {
                report.anisotropic += 1;
                if s > 3 * d as usize {
                    report.archived.push(FormFile::of(&form));
                }
            }
            Verdict::Inconclusive => {
                report.inconclusive += 1;
                report.inconclusive_trials.push(i);
            }
        }
        if !good {
            report.bad_witnesses += 1;
        }
    }
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}
