use proptest::prelude::*;

use padic_forms::artifacts::gamma::{random_form, trial_rng};
use padic_forms::engine::{search_certificate, validate_certificate, SearchConfig, SearchOutcome};
use padic_forms::oracle::{decide_isotropy_exhaustive, OracleConfig, OracleVerdict};
use padic_forms::ring::{ExactPair, RingElem, Valuation};
use padic_forms::solver::{decide_isotropy, verify_witness, SolverConfig, Verdict};
use padic_forms::{AdditiveForm, MultiplierSet};

fn elem(k: u32) -> impl Strategy<Value = RingElem> {
    (any::<u64>(), any::<u64>()).prop_map(move |(a, b)| RingElem::from_parts(a, b, k))
}

fn unit(k: u32) -> impl Strategy<Value = RingElem> {
    elem(k).prop_filter("unit", |x| x.is_unit())
}

fn form(d: u32, k: u32, max_s: usize, max_level: u32) -> impl Strategy<Value = AdditiveForm> {
    (1..=max_s, any::<u64>()).prop_map(move |(s, seed)| random_form(&mut trial_rng(seed, 0), d, s, max_level, k))
}

/// Primitive zero mod `2^(max level + 3)` by trying every tuple in `O/2^M`.
fn naive_isotropic(f: &AdditiveForm) -> bool {
    let m = f.max_level() + 3;
    let side = 1u64 << m;
    let zero = RingElem::zero(m);
    let coeffs: Vec<RingElem> = f.coeffs().iter().map(|c| c.at_precision(m)).collect();
    let powers: Vec<RingElem> = (0..side * side).map(|i| RingElem::from_parts(i % side, i / side, m).pow(6)).collect();
    let mut idx = vec![0u64; f.len()];
    loop {
        let unit = idx.iter().any(|&i| (i % side) & 1 == 1 || (i / side) & 1 == 1);
        let sum = idx.iter().zip(&coeffs).fold(zero, |acc, (&i, c)| acc + *c * powers[i as usize]);
        if unit && sum.is_zero() {
            return true;
        }
        let mut j = 0;
        loop {
            if j == idx.len() {
                return false;
            }
            idx[j] += 1;
            if idx[j] < side * side {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn oracle_isotropic(f: &AdditiveForm) -> bool {
    matches!(decide_isotropy_exhaustive(f, &OracleConfig::default()).unwrap(), OracleVerdict::Isotropic { .. })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn text_round_trip(x in elem(40)) {
        let parsed: ExactPair = x.to_string().parse().unwrap();
        prop_assert_eq!(parsed.to_elem(40).unwrap(), x);
    }

    #[test]
    fn digit_round_trip(x in elem(24).prop_filter("nonzero", |x| !x.is_zero())) {
        let level = x.level().unwrap();
        let depth = 24 - level;
        let digits = x.digit_expand(depth).unwrap();
        prop_assert_eq!(digits.level, level);
        prop_assert_eq!(digits.reconstruct(24), x);
    }

    #[test]
    fn valuation_is_additive(x in elem(32), y in elem(32)) {
        let v = (x * y).valuation();
        match (x.valuation(), y.valuation()) {
            (Valuation::Finite(a), Valuation::Finite(b)) if a + b < 32 => prop_assert_eq!(v, Valuation::Finite(a + b)),
            _ => prop_assert!(v.is_at_least(32.min(x.valuation().lower_bound() + y.valuation().lower_bound()))),
        }
    }

    #[test]
    fn units_invert(u in unit(48)) {
        prop_assert_eq!(u * u.inverse().unwrap(), RingElem::one(48));
    }

    #[test]
    fn certificates_survive_deep_digits(f in form(6, 20, 8, 6), noise in prop::collection::vec((any::<u64>(), any::<u64>()), 8)) {
        let mults = MultiplierSet::new(6, 20).unwrap();
        if let SearchOutcome::Found(cert, _) = search_certificate(&f, &mults, &SearchConfig::default()).unwrap() {
            let coeffs = f.coeffs().iter().zip(&noise).map(|(c, &(a, b))| {
                let known = c.level().unwrap() + 3;
                c.low_bits(known) + RingElem::from_parts(a, b, 20).shl(known)
            }).collect();
            let g = AdditiveForm::new(6, coeffs).unwrap();
            prop_assert!(validate_certificate(&g, &cert).is_ok());
        }
    }

    #[test]
    fn search_success_survives_extension(f in form(6, 10, 6, 6), extra in prop::collection::vec((unit(10), 0u32..6), 1..4)) {
        let mults = MultiplierSet::new(6, 10).unwrap();
        let config = SearchConfig::default();
        if search_certificate(&f, &mults, &config).unwrap().certificate().is_some() {
            let mut coeffs = f.coeffs().to_vec();
            coeffs.extend(extra.iter().map(|(u, l)| u.shl(*l)));
            let g = AdditiveForm::new(6, coeffs).unwrap();
            let cert = search_certificate(&g, &mults, &config).unwrap();
            prop_assert!(cert.certificate().is_some());
            prop_assert!(validate_certificate(&g, cert.certificate().unwrap()).is_ok());
        }
    }

    #[test]
    fn adding_a_variable_keeps_isotropy(f in form(6, 10, 6, 5), extra in unit(10), level in 0u32..5) {
        if oracle_isotropic(&f) {
            let mut coeffs = f.coeffs().to_vec();
            coeffs.push(extra.shl(level));
            let g = AdditiveForm::new(6, coeffs).unwrap();
            prop_assert!(oracle_isotropic(&g));
            let r = decide_isotropy(&g, &SolverConfig::default()).unwrap();
            prop_assert_eq!(r.verdict, Verdict::Isotropic);
        }
    }

    #[test]
    fn verdict_is_shift_invariant(f in form(6, 12, 6, 4), t in 1u32..6) {
        let (g, _) = f.cyclic_shift(t);
        let config = SolverConfig::default();
        let a = decide_isotropy(&f, &config).unwrap();
        let b = decide_isotropy(&g, &config).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
        for (form, r) in [(&f, &a), (&g, &b)] {
            if let Some(w) = &r.witness {
                prop_assert!(verify_witness(form, w));
            }
        }
    }

    #[test]
    fn oracle_matches_naive_enumeration(f in prop_oneof![form(6, 10, 3, 1), form(6, 10, 2, 2)]) {
        prop_assert_eq!(oracle_isotropic(&f), naive_isotropic(&f));
    }

    #[test]
    fn oracle_is_shift_invariant(f in form(6, 12, 6, 4), t in 1u32..6) {
        let (g, _) = f.cyclic_shift(t);
        prop_assert_eq!(oracle_isotropic(&f), oracle_isotropic(&g));
    }

    #[test]
    fn solver_matches_oracle(f in form(6, 10, 7, 5)) {
        let r = decide_isotropy(&f, &SolverConfig::default()).unwrap();
        prop_assert_eq!(r.verdict == Verdict::Isotropic, oracle_isotropic(&f));
    }
}
