//! Named numerical certificates for the discrete complexes, collected in a
//! machine-readable report.

pub mod checks;
pub mod rank;

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lift::LiftedGenerators;
use crate::mesh::{Counts, Mesh, OrientationTable};

pub use checks::Assembly;
pub use rank::{numeric_rank, RankInfo, RankOptions, AMBIGUOUS_GAP};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckFamily {
    ClosedForms,
    Complex,
    Cochain,
    Cohomology,
    Exactness,
    Consistency,
    Generators,
}

impl CheckFamily {
    /// All families in execution order.
    pub const ALL: [CheckFamily; 7] = [
        CheckFamily::ClosedForms,
        CheckFamily::Complex,
        CheckFamily::Cochain,
        CheckFamily::Cohomology,
        CheckFamily::Exactness,
        CheckFamily::Consistency,
        CheckFamily::Generators,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckFamily::ClosedForms => "closed_forms",
            CheckFamily::Complex => "complex",
            CheckFamily::Cochain => "cochain",
            CheckFamily::Cohomology => "cohomology",
            CheckFamily::Exactness => "exactness",
            CheckFamily::Consistency => "consistency",
            CheckFamily::Generators => "generators",
        }
    }

    pub fn parse(s: &str) -> Result<CheckFamily> {
        let s = s.trim().replace('-', "_");
        CheckFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown check family '{s}'")))
    }

    /// Parses a comma-separated list; `all` selects every family.
    pub fn parse_list(s: &str) -> Result<Vec<CheckFamily>> {
        if s.trim() == "all" {
            return Ok(CheckFamily::ALL.to_vec());
        }
        let mut out: Vec<CheckFamily> = s.split(',').filter(|p| !p.trim().is_empty()).map(CheckFamily::parse).collect::<Result<_>>()?;
        if out.is_empty() {
            return Err(Error::Input("empty check selection".into()));
        }
        out.sort_by_key(|f| CheckFamily::ALL.iter().position(|g| g == f));
        out.dedup();
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub seconds: f64,
    /// Construction failed before the check could be evaluated.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub errored: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> CheckResult {
        CheckResult {
            name: name.into(),
            passed: residual <= tolerance,
            residual,
            tolerance,
            seconds: 0.0,
            errored: false,
            detail: None,
            warning: None,
        }
    }

    pub fn errored(name: impl Into<String>, err: &Error) -> CheckResult {
        CheckResult {
            name: name.into(),
            passed: false,
            residual: f64::NAN,
            tolerance: 0.0,
            seconds: 0.0,
            errored: true,
            detail: Some(err.to_string()),
            warning: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> CheckResult {
        self.detail = Some(detail.into());
        self
    }

    pub fn with_warning(mut self, warning: Option<String>) -> CheckResult {
        self.warning = warning;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpaceDims {
    pub grad: usize,
    pub curl: usize,
    pub div: usize,
    pub pk: usize,
}

impl From<[usize; 4]> for SpaceDims {
    fn from(d: [usize; 4]) -> Self {
        SpaceDims {
            grad: d[0],
            curl: d[1],
            div: d[2],
            pk: d[3],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorRanks {
    pub grad: usize,
    pub curl: usize,
    pub div: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub mesh: Counts,
    pub degree: usize,
    pub dims: SpaceDims,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranks: Option<OperatorRanks>,
    pub betti_cw: [usize; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cohomology_ddr: Option<[i64; 4]>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<LiftedGenerators>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
}

impl VerificationReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Drops wall-clock data so that repeated runs serialize identically.
    pub fn strip_timing(&mut self) {
        self.generated_at = None;
        for c in &mut self.checks {
            c.seconds = 0.0;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

/// Runs `f` and stamps the elapsed time on every result it produces.
fn timed(out: &mut Vec<CheckResult>, family: CheckFamily, f: impl FnOnce() -> Result<Vec<CheckResult>>) {
    let start = Instant::now();
    let results = f().unwrap_or_else(|e| vec![CheckResult::errored(family.name(), &e)]);
    let seconds = start.elapsed().as_secs_f64() / results.len().max(1) as f64;
    out.extend(results.into_iter().map(|mut r| {
        r.seconds = seconds;
        r
    }));
}

/// Assembles the degree-`k` and lowest-order complexes and runs the selected
/// check families in their fixed order. Construction failures become errored
/// checks; only invalid arguments are returned as errors.
pub fn run_all(
    mesh: &Mesh,
    orientation: &OrientationTable,
    k: usize,
    selection: &[CheckFamily],
    opts: &RankOptions,
) -> Result<VerificationReport> {
    if k > MAX_DEGREE {
        return Err(Error::Input(format!("degree {k} outside 0..={MAX_DEGREE}")));
    }
    let cw = crate::cw::CochainComplexInt::build(mesh)?;
    let betti = cw.betti_numbers().0;
    let mut report = VerificationReport {
        mesh: mesh.counts(),
        degree: k,
        dims: [0; 4].into(),
        ranks: None,
        betti_cw: betti,
        cohomology_ddr: None,
        checks: Vec::new(),
        passed: false,
        seed: opts.seed,
        generators: None,
        generated_at: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs()),
    };
    let assembly = match Assembly::new(mesh, orientation, k, cw) {
        Ok(a) => a,
        Err(e) => {
            report.checks = selection.iter().map(|f| CheckResult::errored(f.name(), &e)).collect();
            return Ok(report);
        }
    };
    report.dims = assembly.high.dims().into();
    let mut checks = Vec::new();
    for &family in CheckFamily::ALL.iter().filter(|f| selection.contains(f)) {
        match family {
            CheckFamily::ClosedForms => timed(&mut checks, family, || Ok(assembly.check_closed_forms())),
            CheckFamily::Complex => timed(&mut checks, family, || Ok(assembly.check_complex())),
            CheckFamily::Cochain => timed(&mut checks, family, || assembly.check_cochain_diagram()),
            CheckFamily::Cohomology => timed(&mut checks, family, || {
                let (results, ranks, h) = assembly.check_cohomology(opts);
                report.ranks = Some(OperatorRanks {
                    grad: ranks[0],
                    curl: ranks[1],
                    div: ranks[2],
                });
                report.cohomology_ddr = Some(h);
                Ok(results)
            }),
            CheckFamily::Exactness => timed(&mut checks, family, || Ok(assembly.check_zero_reduction_exactness(opts))),
            CheckFamily::Consistency => timed(&mut checks, family, || assembly.check_consistency(opts)),
            CheckFamily::Generators => timed(&mut checks, family, || {
                let (results, lifted) = assembly.check_generators(opts);
                report.generators = Some(lifted);
                Ok(results)
            }),
        }
    }
    report.passed = checks.iter().all(|c| c.passed);
    report.checks = checks;
    Ok(report)
}
