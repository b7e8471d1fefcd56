//! One line per acceptance criterion: every check tagged with the criterion
//! must pass, and the group must finish within its time budget.

use awq::verify::{check_list, run_check, SuiteConfig};
use rayon::prelude::*;
use std::process::ExitCode;
use std::time::Instant;

const BUDGET_SECONDS: [f64; 12] = [5.0, 5.0, 5.0, 10.0, 20.0, 10.0, 10.0, 30.0, 20.0, 30.0, 180.0, 2.0];

fn main() -> ExitCode {
    let cfg = SuiteConfig::default();
    let checks = check_list();
    let mut all_pass = true;
    for (idx, budget) in BUDGET_SECONDS.iter().enumerate() {
        let criterion = idx as u8 + 1;
        let group: Vec<_> = checks.iter().filter(|c| c.criterion == Some(criterion)).collect();
        let start = Instant::now();
        let reports: Vec<_> = group.par_iter().map(|c| run_check(c, &cfg)).collect();
        let seconds = start.elapsed().as_secs_f64();
        let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
        let in_time = seconds <= *budget;
        let pass = !group.is_empty() && failed.is_empty() && in_time;
        all_pass &= pass;
        let worst = reports.iter().map(|r| r.residual / r.tol.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
        print!(
            "criterion {criterion:>2}: {} checks={} worst_residual/tol={worst:.3e} time={seconds:.2}s budget={budget}s",
            if pass { "PASS" } else { "FAIL" },
            reports.len(),
        );
        if !failed.is_empty() {
            print!(" failed=[{}]", failed.join(", "));
        }
        if !in_time {
            print!(" over_budget");
        }
        println!();
        for r in reports.iter().filter(|r| !r.pass) {
            println!("    {} residual={:e} tol={:e} error={}", r.check, r.residual, r.tol, r.error.as_deref().unwrap_or("-"));
        }
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
