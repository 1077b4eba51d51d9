//! The explicit anisotropic forms behind the lower bounds, built from
//! three-variable blocks placed at increasing levels.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::forms::{AdditiveForm, FormError};
use crate::ring::{self, RingElem, RingError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PaperForm {
    /// `x^d + y^d + w z^d`.
    G,
    /// `sum_{i < d/2} 4^i G(x_{3i}, x_{3i+1}, x_{3i+2})`.
    H,
    /// `x^d + y^d + z^d`.
    F,
    /// `sum_{i < d/3} 8^i (F + 2w F + 4(1+w) F)` on fresh variables.
    I,
}

impl FromStr for PaperForm {
    type Err = FormError;

    fn from_str(s: &str) -> Result<PaperForm, FormError> {
        match s.trim().to_ascii_uppercase().as_str() {
            "G" => Ok(PaperForm::G),
            "H" => Ok(PaperForm::H),
            "F" => Ok(PaperForm::F),
            "I" => Ok(PaperForm::I),
            _ => Err(FormError::BadDescriptor(s.to_string())),
        }
    }
}

impl fmt::Display for PaperForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Three coefficients `2^level * unit * inner[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub level: u32,
    pub unit: [u64; 2],
    pub inner: Vec<[u64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockForm {
    pub name: PaperForm,
    pub blocks: Vec<Block>,
    pub form: AdditiveForm,
}

/// Default working precision for a degree.
pub fn default_precision(d: u32) -> u32 {
    d + 4
}

pub fn build_block_form(name: PaperForm, d: u32, precision: u32) -> Result<BlockForm, FormError> {
    ring::check_degree(d)?;
    if d < 6 {
        return Err(RingError::UnsupportedDegree(d).into());
    }
    let one = [1, 0];
    let w = [0, 1];
    let g = vec![one, one, w];
    let f = vec![one, one, one];
    let blocks: Vec<Block> = match name {
        PaperForm::G => vec![Block { level: 0, unit: one, inner: g }],
        PaperForm::F => vec![Block { level: 0, unit: one, inner: f }],
        PaperForm::H => (0..d / 2).map(|i| Block { level: 2 * i, unit: one, inner: g.clone() }).collect(),
        PaperForm::I => {
            if !d.is_multiple_of(3) {
                return Err(RingError::UnsupportedDegree(d).into());
            }
            (0..d / 3)
                .flat_map(|i| {
                    [(3 * i, one), (3 * i + 1, w), (3 * i + 2, [1, 1])]
                        .into_iter()
                        .map(|(level, unit)| Block { level, unit, inner: f.clone() })
                        .collect::<Vec<_>>()
                })
                .collect()
        }
    };
    let mut coeffs = Vec::new();
    for b in &blocks {
        let unit = RingElem::from_parts(b.unit[0], b.unit[1], precision);
        for c in &b.inner {
            coeffs.push((unit * RingElem::from_parts(c[0], c[1], precision)).shl(b.level));
        }
    }
    let form = AdditiveForm::new(d, coeffs)?;
    Ok(BlockForm { name, blocks, form })
}

pub fn build_paper_form(name: PaperForm, d: u32) -> Result<AdditiveForm, FormError> {
    Ok(build_block_form(name, d, default_precision(d))?.form)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(f: &AdditiveForm) -> Vec<[u64; 2]> {
        f.coeffs().iter().map(|c| c.pair()).collect()
    }

    #[test]
    fn shapes() {
        assert_eq!(pairs(&build_paper_form(PaperForm::G, 6).unwrap()), vec![[1, 0], [1, 0], [0, 1]]);
        let h = build_paper_form(PaperForm::H, 6).unwrap();
        assert_eq!(
            pairs(&h),
            vec![[1, 0], [1, 0], [0, 1], [4, 0], [4, 0], [0, 4], [16, 0], [16, 0], [0, 16]]
        );
        let i = build_paper_form(PaperForm::I, 6).unwrap();
        assert_eq!(i.len(), 18);
        assert_eq!(
            pairs(&i)[..9].to_vec(),
            vec![[1, 0], [1, 0], [1, 0], [0, 2], [0, 2], [0, 2], [4, 4], [4, 4], [4, 4]]
        );
        assert_eq!(i.levels(), (0..6).flat_map(|l| [l; 3]).collect::<Vec<_>>());
        assert_eq!(build_paper_form(PaperForm::H, 10).unwrap().len(), 15);
        assert_eq!(build_paper_form(PaperForm::I, 18).unwrap().len(), 54);
    }

    #[test]
    fn rejects_bad_degrees() {
        assert!(build_paper_form(PaperForm::I, 10).is_err());
        assert!(build_paper_form(PaperForm::G, 8).is_err());
        assert!(build_paper_form(PaperForm::G, 2).is_err());
    }
}
