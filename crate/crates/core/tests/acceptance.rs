//! Runs the acceptance experiments and prints one line per criterion:
//! `PASS|FAIL <id> <measured> <threshold>  <what>`.
//!
//! Extra arguments select experiments by name or criteria by id, e.g.
//! `cargo test --test acceptance -- A9 two-vortex`.

use std::process::ExitCode;
use std::time::Instant;

use oseenlab::experiments::{summarize, Experiment, Settings};

fn selected(e: Experiment, filters: &[String]) -> bool {
    filters.is_empty()
        || filters
            .iter()
            .any(|f| f == e.name() || e.criteria().contains(&f.as_str()))
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let settings = Settings::default();
    let mut failed = 0;
    let mut lines: Vec<String> = Vec::new();
    let mut emit = |line: String| {
        println!("{line}");
        lines.push(line);
    };
    for e in Experiment::ALL.into_iter().filter(|e| selected(*e, &filters)) {
        let start = Instant::now();
        let outcome = e.run(&settings, None);
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(o) => {
                for c in &o.checks {
                    eprintln!("  {c}  {} ({})", c.what, e.name());
                }
                for id in e.criteria() {
                    match summarize(id, &o.checks) {
                        Some(c) => {
                            if !c.passed() {
                                failed += 1;
                            }
                            emit(format!("{c}  {} [{:.1}s]", c.what, secs));
                        }
                        None => {
                            failed += 1;
                            emit(format!("FAIL {id} nan nan  no checks recorded"));
                        }
                    }
                }
            }
            Err(err) => {
                for id in e.criteria() {
                    failed += 1;
                    emit(format!("FAIL {id} nan nan  {} errored: {err}", e.name()));
                }
            }
        }
    }
    drop(emit);
    println!("\nacceptance summary:");
    for l in &lines {
        println!("{l}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
