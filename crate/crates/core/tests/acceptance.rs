//! Acceptance battery: every criterion, one PASS/FAIL line each.

use std::process::ExitCode;

use padic_forms::artifacts::reproduce::{format_line, run_criterion, CRITERIA};

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in CRITERIA {
        let tag = format!("criterion_{:02}", c.id);
        if !filter.is_empty() && !filter.iter().any(|f| tag.contains(f.as_str())) {
            continue;
        }
        let report = run_criterion(c.id, None);
        println!("{tag} {}", format_line(&report));
        if !report.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    } else {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    }
}
