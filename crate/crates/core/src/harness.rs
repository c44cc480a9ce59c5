//! Verification campaigns over grids of `(n, theta0)`.
//!
//! Every case is solved, every bound is evaluated at the computed
//! `Lambda_{k+1}`, and the outcome is collected into a [`CampaignReport`]
//! whose ordering depends only on the config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::bounds::{
    delta_family_rhs, log_spaced, BoundReport, BoundsError, CheckRecord, InequalityId,
};
use crate::parallel::Execution;
use crate::solver::{check_coordinate_identity, solve_cap, SolveOptions, SolverError};
use crate::spectrum::{sig17, CapDomain};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N0", alias = "n0")]
    pub n0: usize,
    pub max_refinements: usize,
    pub rel_tol: f64,
    #[serde(default = "default_max_grid")]
    pub max_grid: usize,
}

fn default_max_grid() -> usize {
    SolveOptions::default().max_grid
}

impl Default for GridConfig {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            n0: o.n0,
            max_refinements: o.max_refinements,
            rel_tol: o.rel_tol,
            max_grid: o.max_grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaGridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for DeltaGridConfig {
    fn default() -> Self {
        Self {
            min: 1e-2,
            max: 1e2,
            points: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: ReportFormat,
}

fn default_format() -> ReportFormat {
    ReportFormat::Json
}

fn default_slack_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub dims: Vec<usize>,
    pub apertures: Vec<f64>,
    pub k_max: usize,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub delta_grid: DeltaGridConfig,
    #[serde(default = "default_slack_tol")]
    pub rel_slack_tol: f64,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

impl CampaignConfig {
    /// The 3 x 6 campaign used by the acceptance suite.
    pub fn standard() -> Self {
        Self {
            dims: vec![2, 3, 4],
            apertures: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            k_max: 10,
            grid: GridConfig::default(),
            delta_grid: DeltaGridConfig::default(),
            rel_slack_tol: default_slack_tol(),
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.dims.is_empty() || self.apertures.is_empty() {
            return bad("dims and apertures must be nonempty".into());
        }
        if let Some(n) = self.dims.iter().find(|&&n| n < 2) {
            return bad(format!("dimension {n} is below 2"));
        }
        if let Some(t) = self
            .apertures
            .iter()
            .find(|&&t| !(t > 0.0 && t < std::f64::consts::PI))
        {
            return bad(format!("aperture {t} is outside (0, pi)"));
        }
        if self.k_max < 1 {
            return bad("k_max must be at least 1".into());
        }
        if self.grid.n0 < crate::solver::MIN_GRID {
            return bad(format!(
                "grid.N0 = {} is below {}",
                self.grid.n0,
                crate::solver::MIN_GRID
            ));
        }
        if !(self.grid.rel_tol > 0.0) {
            return bad("grid.rel_tol must be positive".into());
        }
        let d = &self.delta_grid;
        if !(d.min > 0.0 && d.max >= d.min && d.points >= 1) {
            return bad(format!(
                "delta_grid needs 0 < min <= max and points >= 1, got {}..{} x {}",
                d.min, d.max, d.points
            ));
        }
        if !(self.rel_slack_tol >= 0.0) {
            return bad("rel_slack_tol must be nonnegative".into());
        }
        Ok(())
    }

    pub fn solve_options(&self, execution: Execution) -> SolveOptions {
        SolveOptions {
            n0: self.grid.n0,
            max_refinements: self.grid.max_refinements,
            rel_tol: self.grid.rel_tol,
            max_grid: self.grid.max_grid,
            execution,
        }
    }

    pub fn delta_values(&self) -> Vec<f64> {
        let d = &self.delta_grid;
        log_spaced(d.min, d.max, d.points).expect("validated")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    /// Fails only by an amount comparable to the discretization tolerance.
    Inconclusive,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseCheck {
    #[serde(flatten)]
    pub record: CheckRecord,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaConsistency {
    pub delta_star: f64,
    pub delta_star_rhs: f64,
    /// Smallest delta-family right-hand side over the configured grid.
    pub grid_min_rhs: f64,
    /// `grid_min_rhs >= delta_star_rhs` up to rounding.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KRecord {
    pub k: usize,
    pub bounds: BoundReport,
    pub checks: Vec<CaseCheck>,
    /// Smallest `wx_rhs - new_rhs` over the delta grid.
    pub dominance_min: f64,
    pub delta_consistency: Option<DeltaConsistency>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResiduals {
    pub first: f64,
    pub second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRecord {
    pub n: usize,
    pub theta0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub error_kind: Option<SolverError>,
    pub eigenvalues: Vec<f64>,
    pub meta: Map<String, Value>,
    /// `Lambda_1 - n`.
    pub lemma21_margin: Option<f64>,
    pub lemma21: Option<CaseCheck>,
    pub identity: Option<IdentityResiduals>,
    pub identity_check: Option<CaseCheck>,
    pub records: Vec<KRecord>,
}

impl CaseRecord {
    pub fn all_checks(&self) -> impl Iterator<Item = &CaseCheck> {
        self.lemma21
            .iter()
            .chain(self.identity_check.iter())
            .chain(self.records.iter().flat_map(|r| r.checks.iter()))
    }

    /// `meta.N` and `meta.observed_order` as CSV fields.
    fn meta_fields(&self) -> (String, String) {
        let n = self
            .meta
            .get("N")
            .map(|v| v.to_string())
            .unwrap_or_default();
        let order = self
            .meta
            .get("observed_order")
            .and_then(Value::as_f64)
            .map(sig17)
            .unwrap_or_default();
        (n, order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub cases: usize,
    pub failed_cases: usize,
    pub total_checks: usize,
    pub failures: usize,
    pub inconclusive: usize,
    pub violated: usize,
    /// Most negative relative slack over all checks.
    pub worst_relative_slack: Option<f64>,
    pub worst_check: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    pub generated_unix: u64,
    pub config: CampaignConfig,
    pub cases: Vec<CaseRecord>,
    pub summary: Summary,
}

pub const CSV_HEADER: &str = "n,theta0,k,inequality_id,lhs,rhs,slack,holds,delta,meta_N,meta_order";

/// Process exit code for a finished campaign.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

impl CampaignReport {
    pub fn any_failed_check(&self) -> bool {
        self.cases
            .iter()
            .flat_map(|c| c.all_checks())
            .any(|c| !c.record.holds)
    }

    pub fn any_solver_failure(&self) -> bool {
        self.cases.iter().any(|c| c.error.is_some())
    }

    /// A failed check wins over a solver failure.
    pub fn exit_code(&self) -> i32 {
        if self.any_failed_check() {
            EXIT_VIOLATION
        } else if self.any_solver_failure() {
            EXIT_SOLVER
        } else {
            EXIT_PASS
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for case in &self.cases {
            let (meta_n, meta_order) = case.meta_fields();
            let mut row = |k: usize, c: &CheckRecord| {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    case.n,
                    sig17(case.theta0),
                    k,
                    c.id,
                    sig17(c.lhs),
                    sig17(c.rhs),
                    sig17(c.slack),
                    c.holds,
                    c.delta.map(sig17).unwrap_or_default(),
                    meta_n,
                    meta_order
                ));
            };
            for c in case.lemma21.iter().chain(case.identity_check.iter()) {
                row(0, &c.record);
            }
            for r in &case.records {
                for c in &r.checks {
                    row(r.k, &c.record);
                }
            }
        }
        out
    }

    pub fn write(&self, path: &Path, format: ReportFormat) -> Result<(), HarnessError> {
        let text = match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv(),
        };
        std::fs::write(path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
    }
}

fn verdict(record: &CheckRecord, solver_rel_tol: f64) -> Verdict {
    if record.holds {
        Verdict::Pass
    } else if record.slack.abs() < 10.0 * solver_rel_tol * record.rhs.abs() {
        Verdict::Inconclusive
    } else {
        Verdict::Violated
    }
}

/// Residual threshold for the gradient identity on the first axisymmetric pair.
pub const IDENTITY_TOL: f64 = 1e-8;

fn run_case(cfg: &CampaignConfig, n: usize, theta0: f64, opts: &SolveOptions) -> CaseRecord {
    let mut case = CaseRecord {
        n,
        theta0,
        error: None,
        error_kind: None,
        eigenvalues: Vec::new(),
        meta: Map::new(),
        lemma21_margin: None,
        lemma21: None,
        identity: None,
        identity_check: None,
        records: Vec::new(),
    };
    let fail = |mut case: CaseRecord, e: SolverError| {
        case.error = Some(e.to_string());
        case.error_kind = Some(e);
        case
    };
    let domain = match CapDomain::new(n, theta0) {
        Ok(d) => d,
        Err(e) => return fail(case, e.into()),
    };
    let solution = match solve_cap(&domain, cfg.k_max, opts) {
        Ok(s) => s,
        Err(e) => return fail(case, e),
    };
    let tol = opts.rel_tol;
    let wrap = |record: CheckRecord| CaseCheck {
        verdict: verdict(&record, tol),
        record,
    };
    let spectrum = &solution.spectrum;
    case.eigenvalues = spectrum.values().to_vec();
    case.meta = spectrum.meta().clone();

    let lambda1 = spectrum.values()[0];
    let nf = n as f64;
    case.lemma21_margin = Some(lambda1 - nf);
    let mut lemma = CheckRecord::new(InequalityId::LowestAboveDimension, nf, lambda1);
    lemma.holds = lemma.slack > -1e-8 * nf;
    case.lemma21 = Some(wrap(lemma));

    if let Some(pair) = solution.first_axisymmetric() {
        match check_coordinate_identity(pair, &domain) {
            Ok((first, second)) => {
                let worst = first.max(second);
                let mut rec =
                    CheckRecord::new(InequalityId::CoordinateIdentity, worst, IDENTITY_TOL);
                rec.holds = worst < IDENTITY_TOL;
                case.identity = Some(IdentityResiduals { first, second });
                case.identity_check = Some(wrap(rec));
            }
            Err(e) => return fail(case, e),
        }
    }

    let deltas = cfg.delta_values();
    for k in 1..cfg.k_max {
        let lambda_next = spectrum.values()[k];
        let report = match BoundReport::evaluate(spectrum, k, lambda_next, &deltas) {
            Ok(r) => r.with_tolerance(cfg.rel_slack_tol),
            Err(e) => {
                case.error = Some(format!("bounds at k = {k}: {e}"));
                break;
            }
        };
        let dominance_min = report
            .checks
            .iter()
            .filter(|c| c.id == InequalityId::Dominance)
            .map(|c| c.slack)
            .fold(f64::INFINITY, f64::min);
        let delta_consistency = report
            .delta_star
            .zip(report.delta_star_rhs)
            .map(|(ds, dr)| {
                let grid_min_rhs = deltas
                    .iter()
                    .filter_map(|&d| delta_family_rhs(spectrum, k, lambda_next, d).ok())
                    .fold(f64::INFINITY, f64::min);
                DeltaConsistency {
                    delta_star: ds,
                    delta_star_rhs: dr,
                    grid_min_rhs,
                    consistent: grid_min_rhs >= dr * (1.0 - 1e-12),
                }
            });
        let checks = report.checks.iter().cloned().map(wrap).collect();
        case.records.push(KRecord {
            k,
            bounds: report,
            checks,
            dominance_min,
            delta_consistency,
        });
    }
    case
}

/// Runs every `(n, theta0)` case; one failed case does not stop the others.
pub fn run_campaign(
    cfg: &CampaignConfig,
    execution: Execution,
) -> Result<CampaignReport, HarnessError> {
    cfg.validate()?;
    let mut pairs: Vec<(usize, f64)> = Vec::new();
    for &n in &cfg.dims {
        for &t in &cfg.apertures {
            pairs.push((n, t));
        }
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // cases are the parallel unit; each solve runs its modes sequentially
    let opts = cfg.solve_options(Execution::Sequential);
    let cases = execution.map(pairs, |(n, t)| run_case(cfg, n, t, &opts));
    let summary = summarize(&cases);
    let generated_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(CampaignReport {
        generated_unix,
        config: cfg.clone(),
        cases,
        summary,
    })
}

fn summarize(cases: &[CaseRecord]) -> Summary {
    let mut s = Summary {
        cases: cases.len(),
        failed_cases: cases.iter().filter(|c| c.error.is_some()).count(),
        total_checks: 0,
        failures: 0,
        inconclusive: 0,
        violated: 0,
        worst_relative_slack: None,
        worst_check: None,
    };
    for case in cases {
        for c in case.all_checks() {
            s.total_checks += 1;
            if !c.record.holds {
                s.failures += 1;
            }
            match c.verdict {
                Verdict::Inconclusive => s.inconclusive += 1,
                Verdict::Violated => s.violated += 1,
                Verdict::Pass => {}
            }
            let rel = c.record.relative_slack();
            if s.worst_relative_slack.map_or(true, |w| rel < w) {
                s.worst_relative_slack = Some(rel);
                s.worst_check = Some(format!(
                    "n={} theta0={} {}",
                    case.n, case.theta0, c.record.id
                ));
            }
        }
    }
    s
}

impl From<BoundsError> for HarnessError {
    fn from(e: BoundsError) -> Self {
        HarnessError::Config(e.to_string())
    }
}
