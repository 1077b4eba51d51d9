//! `padic-forms`: solve forms, run the oracle, check witnesses, sweep lemmas,
//! reproduce the acceptance battery and run Γ* experiments.
//!
//! Exit codes: 0 isotropic / pass, 1 anisotropic / fail, 2 inconclusive,
//! 64 usage or parse error, 65 precision error, 66 unreadable input,
//! 70 internal failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use padic_forms::artifacts::gamma::gamma_experiment;
use padic_forms::artifacts::paper_forms::{build_block_form, default_precision, PaperForm};
use padic_forms::artifacts::reproduce::{criteria_for, format_line, run_criterion};
use padic_forms::artifacts::sweeps::{lemma, registry, sweep_lemma, SweepError, SweepMode};
use padic_forms::forms::FormError;
use padic_forms::io::{form_to_json, form_to_text, parse_form, ParseError};
use padic_forms::oracle::{decide_isotropy_exhaustive, OracleError, OracleVerdict};
use padic_forms::ring::RingError;
use padic_forms::solver::{decide_isotropy, verify_witness, SolverConfig, SolverError, Verdict, Witness};
use padic_forms::AdditiveForm;

const EXIT_USAGE: u8 = 64;
const EXIT_PRECISION: u8 = 65;
const EXIT_NOINPUT: u8 = 66;
const EXIT_INTERNAL: u8 = 70;

#[derive(Parser)]
#[command(name = "padic-forms", version, about = "Isotropy of additive forms of degree 2m over Q2(sqrt 5)")]
struct Cli {
    /// Write JSON output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Zero all timing fields so repeated runs produce identical JSON.
    #[arg(long, global = true)]
    no_timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide isotropy of a form file (JSON or `d=6; 1, 1, 1*w`).
    Solve {
        file: PathBuf,
        /// Reinterpret the coefficients at precision 2^K.
        #[arg(long)]
        precision: Option<u32>,
        /// Search work budget.
        #[arg(long)]
        budget: Option<u64>,
        /// Skip the exhaustive oracle fallback.
        #[arg(long)]
        no_oracle: bool,
    },
    /// Decide isotropy by the exhaustive oracle alone.
    Oracle {
        file: PathBuf,
        #[arg(long)]
        precision: Option<u32>,
        /// Largest modulus exponent the oracle may use.
        #[arg(long)]
        max_modulus: Option<u32>,
    },
    /// Witness utilities.
    Witness {
        #[command(subcommand)]
        action: WitnessAction,
    },
    /// Lemma sweeps.
    Lemma {
        #[command(subcommand)]
        action: LemmaAction,
    },
    /// Explicit forms and the reproduction battery.
    Paper {
        #[command(subcommand)]
        action: PaperAction,
    },
    /// Random-form experiment: decide `trials` forms in `s` variables.
    Gamma {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        budget: Option<u64>,
        /// Directory receiving anisotropic forms with more than 3d variables.
        #[arg(long)]
        archive: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum WitnessAction {
    /// Check a witness (or a solve result holding one) against a form.
    Verify { form: PathBuf, witness: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exhaustive,
    Sampled,
}

#[derive(Subcommand)]
enum LemmaAction {
    /// Sweep one registered lemma.
    Verify {
        id: String,
        #[arg(long)]
        d: Option<u32>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Samples in sampled mode.
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// List registered lemmas.
    List,
}

#[derive(Subcommand)]
enum PaperAction {
    /// Run the acceptance battery and print a PASS/FAIL table.
    Reproduce {
        /// Only the checks touching this degree.
        #[arg(long)]
        d: Option<u32>,
        /// Explicit criterion ids, comma separated.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u32>,
    },
    /// Print one of the explicit forms G, H, F, I as a form file.
    Form {
        name: PaperForm,
        #[arg(long)]
        d: u32,
        #[arg(long)]
        precision: Option<u32>,
        /// Plain-text syntax instead of JSON.
        #[arg(long)]
        text: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Failure {
        Failure { code, message: message.to_string() }
    }
}

fn ring_precision(e: &RingError) -> bool {
    matches!(e, RingError::InvalidPrecision(_) | RingError::InsufficientPrecision { .. } | RingError::PrecisionMismatch { .. })
}

fn form_precision(e: &FormError) -> bool {
    match e {
        FormError::UnderPrecise { .. } | FormError::FrameTooWide(_) | FormError::ZeroCoefficient { .. } => true,
        FormError::Ring(r) => ring_precision(r),
        _ => false,
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Failure {
        Failure::new(if e.is_precision() { EXIT_PRECISION } else { EXIT_USAGE }, e)
    }
}

impl From<FormError> for Failure {
    fn from(e: FormError) -> Failure {
        Failure::new(if form_precision(&e) { EXIT_PRECISION } else { EXIT_USAGE }, e)
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Failure {
        let precision = match &e {
            SolverError::Form(f) => form_precision(f),
            SolverError::Ring(r) => ring_precision(r),
            SolverError::Oracle(OracleError::Precision { .. }) => true,
            _ => false,
        };
        Failure::new(if precision { EXIT_PRECISION } else { EXIT_INTERNAL }, e)
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Failure {
        let code = match e {
            OracleError::Precision { .. } => EXIT_PRECISION,
            OracleError::ModulusTooLarge { .. } | OracleError::MemoryBudget { .. } => 2,
            _ => EXIT_INTERNAL,
        };
        Failure::new(code, e)
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Failure {
        let code = match e {
            SweepError::UnknownLemma(_) | SweepError::Degree { .. } | SweepError::NotEnumerable(_) => EXIT_USAGE,
            _ => EXIT_INTERNAL,
        };
        Failure::new(code, e)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_NOINPUT, format!("{}: {e}", path.display())))
}

fn load_form(path: &Path, precision: Option<u32>) -> Result<AdditiveForm, Failure> {
    let form = parse_form(&read(path)?)?;
    match precision {
        Some(k) => Ok(form.at_precision(k)?),
        None => Ok(form),
    }
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T, no_timings: bool) -> Result<(), Failure> {
    let mut json = serde_json::to_value(value).map_err(|e| Failure::new(EXIT_INTERNAL, e))?;
    if no_timings {
        strip_timings(&mut json);
    }
    let text = serde_json::to_string_pretty(&json).map_err(|e| Failure::new(EXIT_INTERNAL, e))? + "\n";
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::new(EXIT_INTERNAL, format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn strip_timings(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            for (key, val) in map.iter_mut() {
                if key.ends_with("_ms") {
                    *val = serde_json::Value::from(0.0);
                } else {
                    strip_timings(val);
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Isotropic => 0,
        Verdict::Anisotropic => 1,
        Verdict::Inconclusive => 2,
    }
}

#[derive(Serialize)]
struct OracleReport {
    verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<padic_forms::ExhaustionCertificate>,
}

#[derive(Serialize)]
struct WitnessCheck {
    valid: bool,
    target: u32,
    primitive: usize,
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let out = cli.out.as_deref();
    let nt = cli.no_timings;
    match cli.command {
        Command::Solve { file, precision, budget, no_oracle } => {
            let form = load_form(&file, precision)?;
            let mut config = SolverConfig::default();
            if let Some(b) = budget {
                config.search.budget = b;
            }
            config.use_oracle = !no_oracle;
            let result = decide_isotropy(&form, &config)?;
            emit(out, &result, nt)?;
            Ok(verdict_code(result.verdict))
        }
        Command::Oracle { file, precision, max_modulus } => {
            let form = load_form(&file, precision)?;
            let mut config = SolverConfig::default().oracle;
            if let Some(m) = max_modulus {
                config.max_modulus = m;
            }
            let (reduced, base) = form.reduce_levels()?;
            let report = match decide_isotropy_exhaustive(&reduced, &config)? {
                OracleVerdict::Anisotropic(cert) => {
                    OracleReport { verdict: Verdict::Anisotropic, witness: None, certificate: Some(cert) }
                }
                OracleVerdict::Isotropic { assignment, unit_var } => {
                    let (xs, target) = base.pull_back(&assignment, form.degree())?;
                    let witness = Witness::new(&xs, unit_var, target);
                    if !verify_witness(&form, &witness) {
                        return Err(Failure::new(EXIT_INTERNAL, "oracle witness failed verification"));
                    }
                    OracleReport { verdict: Verdict::Isotropic, witness: Some(witness), certificate: None }
                }
            };
            emit(out, &report, nt)?;
            Ok(verdict_code(report.verdict))
        }
        Command::Witness { action: WitnessAction::Verify { form, witness } } => {
            let form = load_form(&form, None)?;
            let mut value: serde_json::Value =
                serde_json::from_str(&read(&witness)?).map_err(|e| Failure::new(EXIT_USAGE, e))?;
            if let Some(inner) = value.get_mut("witness") {
                value = inner.take();
            }
            let w: Witness = serde_json::from_value(value).map_err(|e| Failure::new(EXIT_USAGE, e))?;
            let valid = verify_witness(&form, &w);
            emit(out, &WitnessCheck { valid, target: w.target, primitive: w.primitive }, nt)?;
            Ok(if valid { 0 } else { 1 })
        }
        Command::Lemma { action: LemmaAction::List } => {
            for e in registry() {
                println!("{:<7} d={:<3} {}", e.id, e.degree, if e.exhaustive_by_default { "exhaustive" } else { "sampled" });
            }
            Ok(0)
        }
        Command::Lemma { action: LemmaAction::Verify { id, d, mode, trials, seed } } => {
            if lemma(&id).is_none() {
                return Err(Failure::new(EXIT_USAGE, format!("unknown lemma {id:?}; see `lemma list`")));
            }
            let mode = mode.map(|m| match m {
                Mode::Exhaustive => SweepMode::Exhaustive,
                Mode::Sampled => SweepMode::Sampled { samples: trials, seed },
            });
            let report = sweep_lemma(&id, d, mode, None)?;
            emit(out, &report, nt)?;
            Ok(if report.passed { 0 } else { 1 })
        }
        Command::Paper { action: PaperAction::Reproduce { d, criteria } } => {
            let ids = if criteria.is_empty() { criteria_for(d) } else { criteria };
            if let Some(bad) = ids.iter().find(|&&i| !(1..=10).contains(&i)) {
                return Err(Failure::new(EXIT_USAGE, format!("no criterion {bad}")));
            }
            let mut reports = Vec::new();
            for id in ids {
                let r = run_criterion(id, None);
                println!("{}", format_line(&r));
                reports.push(r);
            }
            let passed = reports.iter().all(|r| r.passed);
            println!("{}", if passed { "all checks passed" } else { "some checks FAILED" });
            if out.is_some() {
                emit(out, &reports, nt)?;
            }
            Ok(if passed { 0 } else { 1 })
        }
        Command::Paper { action: PaperAction::Form { name, d, precision, text } } => {
            let k = precision.unwrap_or_else(|| default_precision(d));
            let form = build_block_form(name, d, k)?.form;
            let body = if text { form_to_text(&form) } else { form_to_json(&form) };
            match out {
                Some(path) => fs::write(path, body + "\n").map_err(|e| Failure::new(EXIT_INTERNAL, e))?,
                None => println!("{body}"),
            }
            Ok(0)
        }
        Command::Gamma { d, s, trials, seed, budget, archive } => {
            padic_forms::ring::check_degree(d).map_err(|e| Failure::new(EXIT_USAGE, e))?;
            let mut config = SolverConfig::default();
            if let Some(b) = budget {
                config.search.budget = b;
            }
            let report = gamma_experiment(d, s, trials, seed, &config, None)?;
            if let Some(dir) = archive {
                fs::create_dir_all(&dir).map_err(|e| Failure::new(EXIT_INTERNAL, e))?;
                for (i, f) in report.archived.iter().enumerate() {
                    let text = serde_json::to_string(f).map_err(|e| Failure::new(EXIT_INTERNAL, e))?;
                    fs::write(dir.join(format!("anisotropic_d{d}_s{s}_{i:04}.json")), text + "\n")
                        .map_err(|e| Failure::new(EXIT_INTERNAL, e))?;
                }
            }
            emit(out, &report, nt)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
