//! Decision pipeline: reduce and normalize, look for a contraction
//! certificate in every cyclic frame, then try descent, then the exhaustive
//! oracle when it fits the policy.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifacts::descent::{verify_descent, DescentCertificate};
use crate::engine::{
    search_certificate, validate_certificate, ContractionCertificate, EngineError, SearchConfig, SearchOutcome,
    ValidationError,
};
use crate::forms::{normalizing_shift, AdditiveForm, FormError, Frame};
use crate::oracle::{
    decide_isotropy_exhaustive, exhaustive_modulus, ExhaustionCertificate, OracleConfig, OracleError, OracleVerdict,
};
use crate::ring::{self, MultiplierSet, RingElem, RingError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("certificate failed validation: {0}")]
    Validation(#[from] ValidationError),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub search: SearchConfig,
    pub oracle: OracleConfig,
    pub use_descent: bool,
    pub use_oracle: bool,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            search: SearchConfig::default(),
            oracle: OracleConfig::default(),
            use_descent: true,
            use_oracle: true,
        }
    }
}

/// A nontrivial zero modulo `2^target`: `x[primitive] = 2^e u` with `u` a
/// unit and `target >= level(a_primitive) + e d + 3`, so Newton's method on
/// that variable reaches an exact zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub precision: u32,
    pub assignment: Vec<[u64; 2]>,
    pub primitive: usize,
    pub target: u32,
}

impl Witness {
    pub fn new(assignment: &[RingElem], primitive: usize, target: u32) -> Witness {
        Witness {
            precision: assignment.first().map(|x| x.precision()).unwrap_or(0),
            assignment: assignment.iter().map(|x| x.pair()).collect(),
            primitive,
            target,
        }
    }

    pub fn elements(&self) -> Vec<RingElem> {
        self.assignment.iter().map(|p| RingElem::from_parts(p[0], p[1], self.precision)).collect()
    }
}

/// Evaluates the original form on the witness at the witness precision.
pub fn verify_witness(form: &AdditiveForm, w: &Witness) -> bool {
    if w.assignment.len() != form.len() || w.primitive >= form.len() {
        return false;
    }
    if w.precision < form.precision() || w.precision > ring::MAX_PRECISION || w.target > w.precision {
        return false;
    }
    let Ok(wide) = form.at_precision(w.precision) else { return false };
    let xs = w.elements();
    let Some(e) = xs[w.primitive].level() else { return false };
    let level = form.coeffs()[w.primitive].level().unwrap_or(form.precision());
    let needed = level as u64 + e as u64 * form.degree() as u64 + ring::hensel_margin(form.degree()) as u64;
    if (w.target as u64) < needed {
        return false;
    }
    wide.evaluate(&xs).valuation().is_at_least(w.target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Isotropic,
    Anisotropic,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Search,
    Descent,
    Oracle,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnisotropyCertificate {
    Exhaustion(ExhaustionCertificate),
    Descent(DescentCertificate),
}

/// A contraction certificate together with the frame it lives in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramedCertificate {
    pub frame: Frame,
    pub tree: ContractionCertificate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CertificateRecord {
    Contraction(FramedCertificate),
    Anisotropy(AnisotropyCertificate),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub search_ms: f64,
    pub descent_ms: f64,
    pub oracle_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropyResult {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateRecord>,
    pub stage: Stage,
    pub timings: Timings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// Number of variables from which every form is isotropic.
pub fn isotropy_threshold(d: u32) -> usize {
    if d.is_multiple_of(3) {
        4 * d as usize + 1
    } else {
        3 * d as usize / 2 + 1
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Turns a validated certificate into an exact zero of the frame form.
pub fn lift_in_frame(frame_form: &AdditiveForm, cert: &ContractionCertificate) -> Result<Vec<RingElem>, SolverError> {
    let k = frame_form.precision();
    let d = frame_form.degree();
    let mults = MultiplierSet::new(d, k)?;
    let mut ys = vec![RingElem::zero(k); frame_form.len()];
    for (var, root) in cert.leaf_roots(&mults) {
        ys[var] = root;
    }
    let p = cert.anchor;
    let coeffs = frame_form.coeffs();
    let rest = (0..ys.len())
        .filter(|&i| i != p)
        .fold(RingElem::zero(k), |acc, i| acc + coeffs[i] * ys[i].pow(d as u64));
    let lead = coeffs[p] * ys[p].pow(d as u64);
    let y = ring::newton_anchor_solve(&lead, d, &rest)?;
    ys[p] = ys[p] * y;
    if !frame_form.evaluate(&ys).is_zero() {
        return Err(SolverError::Internal("lifted assignment does not vanish".into()));
    }
    Ok(ys)
}

/// Lifts a certificate found in `frame` (relative to `form`) to a witness on
/// the original variables.
pub fn lift_witness(
    form: &AdditiveForm,
    frame: &Frame,
    cert: &ContractionCertificate,
) -> Result<Witness, SolverError> {
    let frame_form = apply_frame(form, frame)?;
    validate_certificate(&frame_form, cert)?;
    let ys = lift_in_frame(&frame_form, cert)?;
    let (xs, target) = frame.pull_back(&ys, form.degree())?;
    Ok(Witness::new(&xs, cert.anchor, target))
}

/// Rebuilds the transformed form a frame describes.
pub fn apply_frame(form: &AdditiveForm, frame: &Frame) -> Result<AdditiveForm, SolverError> {
    let (reduced, base) = form.reduce_levels()?;
    let extra: Vec<u32> = frame.exponents.iter().zip(&base.exponents).map(|(e, b)| e - b).collect();
    if frame.shift == 0 && extra.iter().all(|&e| e == 0) {
        return Ok(reduced);
    }
    let (shifted, shift_frame) = reduced.cyclic_shift(frame.shift);
    if shift_frame.exponents != extra {
        return Err(SolverError::Internal("frame does not match a cyclic shift".into()));
    }
    Ok(shifted)
}

/// Shift order: the normalizing shift first, then the rest in order.
fn shift_order(levels: &[u32], d: u32) -> Vec<u32> {
    let first = normalizing_shift(levels, d).unwrap_or(0);
    std::iter::once(first).chain((0..d).filter(|&t| t != first)).collect()
}

pub fn decide_isotropy(form: &AdditiveForm, config: &SolverConfig) -> Result<IsotropyResult, SolverError> {
    let total = Instant::now();
    let d = form.degree();
    let mut timings = Timings::default();
    let mut diagnostics = Vec::new();
    let (reduced, base) = form.reduce_levels()?;
    let mults = MultiplierSet::new(d, form.precision())?;

    let started = Instant::now();
    let mut exhausted = false;
    for t in shift_order(&reduced.levels(), d) {
        let (shifted, shift_frame) = reduced.cyclic_shift(t);
        let frame = base.then(&shift_frame);
        match search_certificate(&shifted, &mults, &config.search)? {
            SearchOutcome::Found(cert, _) => {
                timings.search_ms = ms(started);
                validate_certificate(&shifted, &cert)?;
                let ys = lift_in_frame(&shifted, &cert)?;
                let (xs, target) = frame.pull_back(&ys, d)?;
                let witness = Witness::new(&xs, cert.anchor, target);
                if !verify_witness(form, &witness) {
                    return Err(SolverError::Internal("witness failed verification".into()));
                }
                timings.total_ms = ms(total);
                return Ok(IsotropyResult {
                    verdict: Verdict::Isotropic,
                    witness: Some(witness),
                    certificate: Some(CertificateRecord::Contraction(FramedCertificate { frame, tree: cert })),
                    stage: Stage::Search,
                    timings,
                    diagnostics,
                });
            }
            SearchOutcome::BudgetExhausted(_) => exhausted = true,
            SearchOutcome::NotFound(_) => {}
        }
    }
    timings.search_ms = ms(started);
    if exhausted {
        diagnostics.push("search budget exhausted in at least one frame".into());
    }
    if form.len() >= isotropy_threshold(d) {
        diagnostics.push(format!(
            "{} variables is at or above the isotropy bound {} but no certificate was found",
            form.len(),
            isotropy_threshold(d)
        ));
    }

    if config.use_descent {
        let started = Instant::now();
        let descent = verify_descent(&reduced);
        timings.descent_ms = ms(started);
        if let Ok(cert) = descent {
            timings.total_ms = ms(total);
            return Ok(IsotropyResult {
                verdict: Verdict::Anisotropic,
                witness: None,
                certificate: Some(CertificateRecord::Anisotropy(AnisotropyCertificate::Descent(cert))),
                stage: Stage::Descent,
                timings,
                diagnostics,
            });
        }
    }

    if config.use_oracle {
        let m = exhaustive_modulus(&reduced);
        match config.oracle.check(m, reduced.len()) {
            Ok(()) => {
                let started = Instant::now();
                let verdict = decide_isotropy_exhaustive(&reduced, &config.oracle)?;
                timings.oracle_ms = ms(started);
                let result = match verdict {
                    OracleVerdict::Anisotropic(cert) => IsotropyResult {
                        verdict: Verdict::Anisotropic,
                        witness: None,
                        certificate: Some(CertificateRecord::Anisotropy(AnisotropyCertificate::Exhaustion(cert))),
                        stage: Stage::Oracle,
                        timings,
                        diagnostics,
                    },
                    OracleVerdict::Isotropic { assignment, unit_var } => {
                        let (xs, target) = base.pull_back(&assignment, d)?;
                        let witness = Witness::new(&xs, unit_var, target);
                        if !verify_witness(form, &witness) {
                            return Err(SolverError::Internal("oracle witness failed verification".into()));
                        }
                        IsotropyResult {
                            verdict: Verdict::Isotropic,
                            witness: Some(witness),
                            certificate: None,
                            stage: Stage::Oracle,
                            timings,
                            diagnostics,
                        }
                    }
                };
                let mut result = result;
                result.timings.total_ms = ms(total);
                return Ok(result);
            }
            Err(e) => diagnostics.push(format!("oracle skipped: {e}")),
        }
    }

    timings.total_ms = ms(total);
    Ok(IsotropyResult {
        verdict: Verdict::Inconclusive,
        witness: None,
        certificate: None,
        stage: Stage::Undecided,
        timings,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form(pairs: &[(i128, i128)]) -> AdditiveForm {
        AdditiveForm::from_pairs(6, 10, pairs).unwrap()
    }

    #[test]
    fn one_plus_seven_is_isotropic() {
        let f = form(&[(1, 0), (7, 0)]);
        let r = decide_isotropy(&f, &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Isotropic);
        assert_eq!(r.stage, Stage::Search);
        let w = r.witness.unwrap();
        assert!(verify_witness(&f, &w));
        let xs = w.elements();
        assert!(xs[0].is_unit() && xs[1].is_unit());
    }

    #[test]
    fn witness_rejections() {
        let f = form(&[(1, 0), (7, 0)]);
        let zero = Witness::new(&[RingElem::zero(10), RingElem::zero(10)], 0, 10);
        assert!(!verify_witness(&f, &zero));
        let r = decide_isotropy(&f, &SolverConfig::default()).unwrap();
        let mut w = r.witness.unwrap();
        w.target = 2;
        assert!(!verify_witness(&f, &w));
    }

    #[test]
    fn shifted_and_reduced_frames_map_back() {
        // levels 5 and 11 (= 5 mod 6): the certificate lives in a shifted frame
        let f = AdditiveForm::from_pairs(6, 20, &[(32, 0), (7 * 2048, 0)]).unwrap();
        let r = decide_isotropy(&f, &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Isotropic);
        assert!(verify_witness(&f, r.witness.as_ref().unwrap()));
        if let Some(CertificateRecord::Contraction(c)) = &r.certificate {
            let w = lift_witness(&f, &c.frame, &c.tree).unwrap();
            assert!(verify_witness(&f, &w));
        } else {
            panic!("expected a contraction certificate");
        }
    }

    #[test]
    fn anisotropic_examples() {
        let r = decide_isotropy(&form(&[(1, 0), (1, 0)]), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Anisotropic);
        let r = decide_isotropy(&form(&[(1, 0)]), &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Anisotropic);
    }

    #[test]
    fn oracle_catches_what_descent_misses() {
        // 1 + 1 + 2: descent window mod 4 has 1+1+2 = 4; the oracle decides
        let f = form(&[(1, 0), (1, 0), (2, 0)]);
        let config = SolverConfig { use_descent: true, ..SolverConfig::default() };
        let r = decide_isotropy(&f, &config).unwrap();
        let o = decide_isotropy_exhaustive(&f, &OracleConfig::default()).unwrap();
        assert_eq!(r.verdict == Verdict::Isotropic, matches!(o, OracleVerdict::Isotropic { .. }));
    }

    #[test]
    fn inconclusive_without_fallbacks() {
        let config = SolverConfig { use_descent: false, use_oracle: false, ..SolverConfig::default() };
        let r = decide_isotropy(&form(&[(1, 0), (1, 0)]), &config).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }
}
