//! Property checks, oracle checks and the acceptance criteria.
//!
//! Every check is deterministic for a given seed. [`criteria`] lists the
//! acceptance criteria in order; each one runs to completion and reports
//! pass/fail together with the numbers it was decided on.

mod acceptance;
mod oracles;
mod properties;

pub use acceptance::{criteria, run_criterion, Criterion, CriterionReport, Outcome};
pub use oracles::oracle_suite;
pub use properties::property_suite;

use crate::error::Result;
use std::fmt;
use std::time::{Duration, Instant};

/// Result of one named check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
            elapsed: Duration::ZERO,
        }
    }

    /// Run `f`, timing it; an error counts as a failure.
    pub fn timed(name: &str, f: impl FnOnce() -> Result<Check>) -> Self {
        let start = Instant::now();
        let mut check = f().unwrap_or_else(|e| Check::new(name, false, format!("error: {e}")));
        check.elapsed = start.elapsed();
        check
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} ({:.2}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}
