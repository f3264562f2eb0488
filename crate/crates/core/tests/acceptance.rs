//! One PASS/FAIL line per acceptance criterion, with the checks behind it.

use std::io::Write;
use std::time::Duration;

use bvlift::suite::{run_criterion, CriterionResult, CRITERIA};

fn budget(id: u32) -> Option<Duration> {
    match id {
        1 => Some(Duration::from_secs(10)),
        2 => Some(Duration::from_secs(30)),
        _ => None,
    }
}

// Written to the stdout handle directly so the lines survive output capture.
macro_rules! say {
    ($($arg:tt)*) => {{
        let mut out = std::io::stdout().lock();
        writeln!(out, $($arg)*).unwrap();
    }};
}

fn report(r: &CriterionResult) {
    let status = if r.passed { "PASS" } else { "FAIL" };
    say!("{status} criterion {}: {} ({:.2?})", r.id, r.name, r.elapsed);
    for c in r.checks.iter().filter(|c| !c.passed || std::env::var_os("ACCEPTANCE_VERBOSE").is_some()) {
        say!(
            "    {} {}: value {:e}, target {:e}, tol {:e}{}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.value,
            c.target,
            c.tolerance,
            c.witness.as_deref().map(|w| format!(" [{w}]")).unwrap_or_default()
        );
    }
}

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    let mut total = Duration::ZERO;
    for (id, _) in CRITERIA {
        let r = run_criterion(id);
        report(&r);
        total += r.elapsed;
        if !r.passed {
            failed.push(format!("criterion {id}"));
        }
        if let Some(limit) = budget(id) {
            let ok = r.elapsed < limit;
            say!("{} criterion {id} runtime {:.2?} < {limit:?}", if ok { "PASS" } else { "FAIL" }, r.elapsed);
            if !ok {
                failed.push(format!("criterion {id} runtime"));
            }
        }
    }
    let ok = total < Duration::from_secs(120);
    say!("{} total runtime {total:.2?} < 120s", if ok { "PASS" } else { "FAIL" });
    if !ok {
        failed.push("total runtime".into());
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
