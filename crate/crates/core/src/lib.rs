//! Exact arithmetic and isotropy decisions for additive forms
//! `a_1 x_1^d + ... + a_s x_s^d` of degree `d = 2m` (`m` odd) over the
//! unramified quadratic extension `Q_2(sqrt 5)`.

pub mod artifacts;
pub mod engine;
pub mod forms;
pub mod io;
pub mod oracle;
pub mod ring;
pub mod solver;

pub use engine::{search_certificate, validate_certificate, ContractionCertificate, PartialValue, SearchConfig, SearchOutcome};
pub use forms::{AdditiveForm, Frame, LevelDistribution, TypeDescriptor};
pub use io::{parse_form, FormFile};
pub use oracle::{decide_isotropy_exhaustive, ExhaustionCertificate, OracleConfig, OracleVerdict};
pub use ring::{dth_root, F4Class, MultiplierSet, RingElem, Valuation};
pub use solver::{decide_isotropy, verify_witness, IsotropyResult, SolverConfig, Verdict, Witness};
