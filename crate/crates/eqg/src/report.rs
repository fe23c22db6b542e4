//! Run configuration and machine-readable verification reports.
//!
//! The report is a single UTF-8 JSON document with top-level
//! `{config, checks[], summary}`; field names are fixed so downstream
//! tooling stays stable. Reports are byte-identical for identical
//! `(config, seed)` regardless of thread count: checks are emitted in a
//! fixed order, every random draw is keyed by `(seed, suite, check index)`,
//! and wall-clock timing is never written into the document (it goes to the
//! human-readable log instead).

use crate::error::EqgError;
use crate::params::EllipticParams;
use crate::scalar::Cx;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Numeric precision for the series kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Double,
    /// Double-double significand, ~31 significant digits.
    Extended,
}

/// Harness configuration. Complex parameters are `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub q: [f64; 2],
    pub r: [f64; 2],
    pub c: [f64; 2],
    pub trunc: usize,
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
    pub suites: Vec<String>,
    pub precision: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            q: [0.35, 0.05],
            r: [1.2, 0.1],
            c: [0.0, 0.0],
            trunc: 40,
            tol: 1e-8,
            samples: 25,
            seed: 42,
            suites: vec!["all".into()],
            precision: "double".into(),
        }
    }
}

pub const SUITE_NAMES: [&str; 5] = ["theta", "rmatrix", "rll", "algebroid", "freefield"];

impl RunConfig {
    pub fn params(&self) -> Result<EllipticParams<f64>> {
        EllipticParams::new(
            Cx::new(self.q[0], self.q[1]),
            Cx::new(self.r[0], self.r[1]),
            Cx::new(self.c[0], self.c[1]),
        )
    }

    pub fn precision_mode(&self) -> Result<Precision> {
        let p = self.precision.trim();
        if p == "double" {
            return Ok(Precision::Double);
        }
        if p == "extended" {
            return Ok(Precision::Extended);
        }
        if let Some(rest) = p.strip_prefix("extended:") {
            let digits: u32 = rest
                .parse()
                .map_err(|_| EqgError::Config(format!("bad precision '{p}'")))?;
            if digits > 31 {
                return Err(EqgError::Config(format!(
                    "extended precision caps at 31 significant digits (requested {digits})"
                )));
            }
            return Ok(Precision::Extended);
        }
        Err(EqgError::Config(format!(
            "precision must be 'double', 'extended' or 'extended:<digits<=31>', got '{p}'"
        )))
    }

    /// The suites selected, expanded and validated.
    pub fn selected_suites(&self) -> Result<Vec<&'static str>> {
        let mut out = Vec::new();
        for s in &self.suites {
            if s == "all" {
                for n in SUITE_NAMES {
                    if !out.contains(&n) {
                        out.push(n);
                    }
                }
                continue;
            }
            match SUITE_NAMES.iter().find(|n| *n == s) {
                Some(n) => {
                    if !out.contains(n) {
                        out.push(n);
                    }
                }
                None => {
                    return Err(EqgError::Config(format!(
                        "unknown suite '{s}'; valid: theta, rmatrix, rll, algebroid, freefield, all"
                    )))
                }
            }
        }
        Ok(out)
    }
}

/// One verification check: name, the identity it tests, the parameters it
/// ran with, the residual and the verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub suite: String,
    pub check_name: String,
    pub paper_anchor: String,
    pub parameters: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(
        suite: &str,
        check_name: &str,
        anchor: &str,
        parameters: String,
        residual: f64,
        tol: f64,
    ) -> Self {
        Self {
            suite: suite.into(),
            check_name: check_name.into(),
            paper_anchor: anchor.into(),
            parameters,
            residual,
            tol,
            pass: residual.is_finite() && residual <= tol,
        }
    }

    /// A check that failed to run at all (pole proximity exhaustion etc.).
    pub fn errored(suite: &str, check_name: &str, anchor: &str, err: &EqgError, tol: f64) -> Self {
        Self {
            suite: suite.into(),
            check_name: check_name.into(),
            paper_anchor: anchor.into(),
            parameters: format!("error: {err}"),
            residual: f64::INFINITY,
            tol,
            pass: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub checks: Vec<CheckRecord>,
    pub summary: Summary,
}

impl Report {
    pub fn new(config: RunConfig, checks: Vec<CheckRecord>) -> Self {
        let total = checks.len();
        let passed = checks.iter().filter(|c| c.pass).count();
        Self {
            config,
            checks,
            summary: Summary {
                total,
                passed,
                failed: total - passed,
            },
        }
    }

    pub fn all_pass(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}
