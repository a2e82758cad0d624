//! Acceptance suite: runs `verify` with the reproducibility rerun and prints
//! one PASS/FAIL line per criterion.

use std::process::ExitCode;

use calderon_core::harness::{verify, VerifyOptions};

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let report = match verify(&VerifyOptions {
        out: dir.path().to_path_buf(),
        seed: 0,
        reproducibility: true,
    }) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL verify aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    for line in report.lines() {
        println!("{line}");
    }
    let ids: Vec<usize> = report.checks.iter().map(|c| c.id).collect();
    let complete = (1..=9).all(|id| ids.contains(&id));
    if !complete {
        println!("FAIL missing criteria: have {ids:?}");
    }
    if report.passed() && complete {
        println!("acceptance: all {} criteria passed", report.checks.len());
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
