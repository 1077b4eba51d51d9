//! Form files. JSON `{ "degree": 6, "precision": 10, "coeffs": [[1,0], ...] }`
//! or plain text `d=6; 1, 1, 1*w, 4` with an optional `precision=K` clause.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms::{AdditiveForm, FormError};
use crate::ring::{self, ExactPair, RingElem, RingError};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("bad JSON form: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad plain-text form: {0}")]
    Syntax(String),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Form(#[from] FormError),
}

impl ParseError {
    /// Errors about precision rather than syntax.
    pub fn is_precision(&self) -> bool {
        matches!(
            self,
            ParseError::Ring(
                RingError::InvalidPrecision(_)
                    | RingError::PrecisionMismatch { .. }
                    | RingError::InsufficientPrecision { .. }
                    | RingError::Zero(_)
            )
                | ParseError::Form(
                    FormError::UnderPrecise { .. }
                        | FormError::ZeroCoefficient { .. }
                        | FormError::MixedPrecision { .. }
                        | FormError::FrameTooWide(_)
                )
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormFile {
    pub degree: u32,
    pub precision: u32,
    pub coeffs: Vec<[u64; 2]>,
}

impl FormFile {
    pub fn of(form: &AdditiveForm) -> FormFile {
        FormFile {
            degree: form.degree(),
            precision: form.precision(),
            coeffs: form.coeffs().iter().map(|c| c.pair()).collect(),
        }
    }

    pub fn to_form(&self) -> Result<AdditiveForm, ParseError> {
        ring::check_precision(self.precision)?;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| RingElem::try_new(c[0], c[1], self.precision))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AdditiveForm::new(self.degree, coeffs)?)
    }
}

/// Precision used when a plain-text form does not give one: `d + 4`, raised
/// so that every coefficient keeps `d` digits above its level.
pub fn default_precision(d: u32, pairs: &[ExactPair]) -> u32 {
    let top = pairs
        .iter()
        .filter_map(|p| RingElem::from_ints(p.a, p.b, ring::MAX_PRECISION).ok()?.level())
        .max()
        .unwrap_or(0);
    (d + 4).max(top + d).min(ring::MAX_PRECISION)
}

fn parse_plain(text: &str) -> Result<AdditiveForm, ParseError> {
    let syntax = |m: &str| ParseError::Syntax(m.to_string());
    let mut degree = None;
    let mut precision = None;
    let mut pairs = Vec::new();
    for clause in text.split(';').map(str::trim).filter(|c| !c.is_empty()) {
        if let Some((key, value)) = clause.split_once('=') {
            let value: u32 = value.trim().parse().map_err(|_| syntax(clause))?;
            match key.trim() {
                "d" | "degree" => degree = Some(value),
                "precision" | "K" => precision = Some(value),
                _ => return Err(syntax(clause)),
            }
        } else {
            for term in clause.split(',').map(str::trim) {
                pairs.push(term.parse::<ExactPair>()?);
            }
        }
    }
    let degree = degree.ok_or_else(|| syntax("missing d="))?;
    if pairs.is_empty() {
        return Err(syntax("no coefficients"));
    }
    let precision = precision.unwrap_or_else(|| default_precision(degree, &pairs));
    ring::check_precision(precision)?;
    let coeffs = pairs.iter().map(|p| p.to_elem(precision)).collect::<Result<Vec<_>, _>>()?;
    Ok(AdditiveForm::new(degree, coeffs)?)
}

/// Reads either syntax; JSON is recognised by a leading `{`.
pub fn parse_form(text: &str) -> Result<AdditiveForm, ParseError> {
    let text = text.trim();
    if text.starts_with('{') {
        serde_json::from_str::<FormFile>(text)?.to_form()
    } else {
        parse_plain(text)
    }
}

pub fn form_to_json(form: &AdditiveForm) -> String {
    serde_json::to_string(&FormFile::of(form)).expect("form files serialize")
}

/// The plain-text syntax, with the precision spelled out.
pub fn form_to_text(form: &AdditiveForm) -> String {
    let coeffs: Vec<String> = form.coeffs().iter().map(|c| c.to_string()).collect();
    format!("d={}; precision={}; {}", form.degree(), form.precision(), coeffs.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_and_json_agree() {
        let plain = parse_form("d=6; 1, 1, 1*w, 4, 4, 4*w, 16, 16, 16*w").unwrap();
        assert_eq!(plain.precision(), 10);
        assert_eq!(plain.levels(), vec![0, 0, 0, 2, 2, 2, 4, 4, 4]);
        let json = parse_form(&form_to_json(&plain)).unwrap();
        assert_eq!(plain, json);
        assert_eq!(parse_form(&form_to_text(&plain)).unwrap(), plain);
    }

    #[test]
    fn precision_defaults_and_overrides() {
        assert_eq!(parse_form("d=6; 1, 7").unwrap().precision(), 10);
        assert_eq!(parse_form("d=6; 1, 256").unwrap().precision(), 14);
        assert_eq!(parse_form("d=6; precision=20; 1, -1").unwrap().coeffs()[1].a(), (1 << 20) - 1);
    }

    #[test]
    fn errors_are_classified() {
        for bad in ["", "1, 2", "d=6;", "d=x; 1", "d=6; 1, 2+", "{\"degree\": 6}", "q=1; 1"] {
            let e = parse_form(bad).unwrap_err();
            assert!(!e.is_precision(), "{bad}: {e}");
        }
        let e = parse_form("d=6; precision=99; 1").unwrap_err();
        assert!(e.is_precision(), "{e}");
        let e = parse_form("d=6; precision=4; 1, 16").unwrap_err();
        assert!(e.is_precision(), "{e}");
    }
}
