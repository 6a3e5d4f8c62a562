//! Runs every acceptance criterion and prints one PASS/FAIL line each, with
//! the failing checks underneath. Exits nonzero if any criterion fails.
//!
//! Positional arguments select criteria by number: `cargo test --test
//! acceptance -- 7 8`.

use std::process::ExitCode;

use wcs_core::acceptance::{self, CriterionReport, Options};

type Criterion = fn(Options) -> CriterionReport;

const ALL: [Criterion; 11] = [
    acceptance::kernel_exactness,
    acceptance::admissibility,
    acceptance::resolution_of_unity,
    acceptance::positive_definiteness,
    acceptance::polarization,
    acceptance::toy_model,
    acceptance::projection_limit,
    acceptance::monte_carlo,
    acceptance::dynamics,
    acceptance::symbols,
    acceptance::concordance,
];

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .filter(|&i| (1..=ALL.len()).contains(&i))
        .collect();
    let options = Options::default();
    let mut failed = 0;
    let mut ran = 0;
    for (i, f) in ALL.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(i + 1)) {
            continue;
        }
        let r = f(options);
        println!("{}", r.line());
        ran += 1;
        if !r.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
