//! Acceptance criteria 1 to 10, run without the libtest harness so the
//! report is always printed. One PASS/FAIL line per criterion
//! followed by its rows.
//!
//! Criterion 8 contains one identity that does not hold as stated (it lacks
//! an `s²·M1` term). Its row is evaluated literally and reported as FAIL;
//! the test asserts that it is the only failing row and that the corrected
//! identity holds.

use orbitforge::verify::{render_table, run_criterion, VerifyConfig, VerifyReport};

const KNOWN_FAILING_ROW: &str = "[M2,M3] = −s·M2 + (x²+y²)(t²+1)·M1";

fn main() {
    let cfg = VerifyConfig::default();
    let mut criteria = Vec::new();
    for id in 1..=10 {
        let c = run_criterion(id, &cfg);
        println!("{} criterion {:>2}: {} ({:.1} s)", if c.pass { "PASS" } else { "FAIL" }, c.id, c.title, c.seconds);
        criteria.push(c);
    }
    let report = VerifyReport {
        seed: cfg.seed,
        resolution_scale: cfg.resolution_scale,
        property_instances: cfg.property_instances,
        pass: criteria.iter().all(|c| c.pass),
        criteria,
    };
    println!("\n{}", render_table(&report));

    let mut unexpected = Vec::new();
    for c in &report.criteria {
        for r in c.rows.iter().filter(|r| !r.pass) {
            if !(c.id == 8 && r.label == KNOWN_FAILING_ROW) {
                unexpected.push(format!("criterion {}: {}", c.id, r.label));
            }
        }
    }
    let c8 = &report.criteria[7];
    if !c8.rows.iter().any(|r| r.label.contains("+ s²)·M1") && r.pass) {
        unexpected.push("criterion 8: corrected [M2,M3] identity".into());
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:#?}");
        std::process::exit(1);
    }
    println!("acceptance: only the documented criterion 8 row fails");
}
