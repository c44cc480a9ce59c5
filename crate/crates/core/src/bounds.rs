//! Universal inequalities for buckling eigenvalues on domains in `S^n`.
//!
//! Every function takes a validated [`Spectrum`], an index `k` (number of
//! leading eigenvalues used) and, where relevant, a candidate value for
//! `Lambda_{k+1}`. The candidate is an explicit argument so that the same
//! inequality can be evaluated at a computed eigenvalue or at the bound
//! value itself.
//!
//! Two per-eigenvalue factors recur throughout (see [`BoundTerms`]):
//!
//! ```text
//! w(L) = L - (n-2)/(L-(n-2))        p(L) = L + (n-2)^2/4
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectrum::{sig17, Spectrum};
use crate::summation::CompensatedSum;

/// Relative tolerance deciding whether a check holds:
/// `slack >= -tol * max(|lhs|, |rhs|, 1)`.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("eigenvalue {value} is not above n - 2 = {floor}")]
    SingularTerm { value: f64, floor: f64 },
    #[error("S^2 < T (S = {s}, T = {t}); the sequence cannot satisfy the quadratic bound")]
    NegativeDiscriminant { s: f64, t: f64 },
    #[error("candidate Lambda_(k+1) = {lambda_next} is below Lambda_k = {lambda_k}")]
    OrderViolation { lambda_next: f64, lambda_k: f64 },
    #[error("delta must be a positive finite number, got {0}")]
    InvalidDelta(f64),
    #[error("every gap Lambda_(k+1) - Lambda_i vanishes; the optimal delta is undefined")]
    AllGapsZero,
    #[error("weighted gap sum {0} is negative; the eigenvalues lie too close to n - 2")]
    NegativeWeight(f64),
    #[error("k = {k} is outside 1..={len}")]
    IndexOutOfRange { k: usize, len: usize },
    #[error("delta grid is empty or malformed")]
    EmptyDeltaGrid,
}

/// The two composite factors of a single eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    /// `Lambda - (n-2)/(Lambda-(n-2))`
    pub w: f64,
    /// `Lambda + (n-2)^2/4`
    pub p: f64,
}

pub fn bound_terms(lambda: f64, n: usize) -> Result<BoundTerms, BoundsError> {
    let c = n as f64 - 2.0;
    if !(lambda > c) {
        return Err(BoundsError::SingularTerm {
            value: lambda,
            floor: c,
        });
    }
    Ok(BoundTerms {
        w: lambda - c / (lambda - c),
        p: lambda + c * c / 4.0,
    })
}

/// Identifier of a checked inequality, serialized with the report ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InequalityId {
    #[serde(rename = "thm14")]
    Theorem,
    #[serde(rename = "yang15")]
    Yang,
    #[serde(rename = "upper16")]
    Upper,
    #[serde(rename = "gap17")]
    Gap,
    #[serde(rename = "wx13")]
    WangXia,
    #[serde(rename = "dominance")]
    Dominance,
    #[serde(rename = "chebyshev")]
    Chebyshev,
    #[serde(rename = "lower216")]
    Lower,
    #[serde(rename = "lemma21")]
    LowestAboveDimension,
    #[serde(rename = "identity28")]
    CoordinateIdentity,
}

impl InequalityId {
    pub const BOUND_IDS: [InequalityId; 8] = [
        InequalityId::Theorem,
        InequalityId::Yang,
        InequalityId::Upper,
        InequalityId::Gap,
        InequalityId::WangXia,
        InequalityId::Dominance,
        InequalityId::Chebyshev,
        InequalityId::Lower,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            InequalityId::Theorem => "thm14",
            InequalityId::Yang => "yang15",
            InequalityId::Upper => "upper16",
            InequalityId::Gap => "gap17",
            InequalityId::WangXia => "wx13",
            InequalityId::Dominance => "dominance",
            InequalityId::Chebyshev => "chebyshev",
            InequalityId::Lower => "lower216",
            InequalityId::LowestAboveDimension => "lemma21",
            InequalityId::CoordinateIdentity => "identity28",
        }
    }
}

impl std::fmt::Display for InequalityId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One evaluated inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: InequalityId,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`, recorded verbatim.
    pub slack: f64,
    pub holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl CheckRecord {
    pub fn new(id: InequalityId, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            id,
            lhs,
            rhs,
            slack,
            holds: slack_holds(lhs, rhs, slack, DEFAULT_REL_TOL),
            delta: None,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    /// Re-evaluates `holds` at another relative tolerance.
    pub fn with_tolerance(mut self, rel_tol: f64) -> Self {
        self.holds = slack_holds(self.lhs, self.rhs, self.slack, rel_tol);
        self
    }

    /// Slack divided by `max(|lhs|, |rhs|, 1)`.
    pub fn relative_slack(&self) -> f64 {
        self.slack / scale(self.lhs, self.rhs)
    }
}

fn scale(lhs: f64, rhs: f64) -> f64 {
    lhs.abs().max(rhs.abs()).max(1.0)
}

fn slack_holds(lhs: f64, rhs: f64, slack: f64, rel_tol: f64) -> bool {
    slack >= -rel_tol * scale(lhs, rhs)
}

/// Gap-weighted sums over `i = 1..k` with `g_i = Lambda_{k+1} - Lambda_i`.
#[derive(Debug, Clone, Copy)]
struct GapSums {
    /// sum g^2
    g2: f64,
    /// sum g^2 w
    g2_w: f64,
    /// sum g p
    g_p: f64,
    /// sum g w p
    g_wp: f64,
    /// sum g^2 (n-2)/(Lambda-(n-2))
    g2_corr: f64,
    /// sum g^2 (2 + (n-2)/(Lambda-(n-2)))
    theorem_lhs: f64,
    any_gap: bool,
}

fn leading<'a>(s: &'a Spectrum, k: usize) -> Result<&'a [f64], BoundsError> {
    if k == 0 || k > s.len() {
        return Err(BoundsError::IndexOutOfRange { k, len: s.len() });
    }
    Ok(&s.values()[..k])
}

fn gap_sums(s: &Spectrum, k: usize, lambda_next: f64) -> Result<GapSums, BoundsError> {
    let values = leading(s, k)?;
    let lambda_k = values[k - 1];
    if !(lambda_next >= lambda_k) {
        return Err(BoundsError::OrderViolation {
            lambda_next,
            lambda_k,
        });
    }
    let c = s.n() as f64 - 2.0;
    let mut g2 = CompensatedSum::new();
    let mut g2_w = CompensatedSum::new();
    let mut g_p = CompensatedSum::new();
    let mut g_wp = CompensatedSum::new();
    let mut g2_corr = CompensatedSum::new();
    let mut theorem_lhs = CompensatedSum::new();
    let mut any_gap = false;
    for &lambda in values {
        let t = bound_terms(lambda, s.n())?;
        let g = lambda_next - lambda;
        any_gap |= g > 0.0;
        let gg = g * g;
        let corr = c / (lambda - c);
        g2.add(gg);
        g2_w.add(gg * t.w);
        g_p.add(g * t.p);
        g_wp.add(g * t.w * t.p);
        g2_corr.add(gg * corr);
        theorem_lhs.add(gg * (2.0 + corr));
    }
    Ok(GapSums {
        g2: g2.value(),
        g2_w: g2_w.value(),
        g_p: g_p.value(),
        g_wp: g_wp.value(),
        g2_corr: g2_corr.value(),
        theorem_lhs: theorem_lhs.value(),
        any_gap,
    })
}

/// `2 sqrt(sum g^2 w) sqrt(sum g p)`, the right-hand side of the main bound.
fn theorem_rhs(sums: &GapSums) -> Result<f64, BoundsError> {
    if sums.g2_w < 0.0 {
        return Err(BoundsError::NegativeWeight(sums.g2_w));
    }
    Ok(2.0 * sums.g2_w.sqrt() * sums.g_p.sqrt())
}

/// The averaged coefficients `(S_{k+1}, T_{k+1})` of the quadratic bound.
pub fn compute_s_t(s: &Spectrum, k: usize) -> Result<(f64, f64), BoundsError> {
    let values = leading(s, k)?;
    let mut sum = CompensatedSum::new();
    let mut sum_wp = CompensatedSum::new();
    let mut sum_sq = CompensatedSum::new();
    let mut sum_lwp = CompensatedSum::new();
    for &lambda in values {
        let t = bound_terms(lambda, s.n())?;
        let wp = t.w * t.p;
        sum.add(lambda);
        sum_wp.add(wp);
        sum_sq.add(lambda * lambda);
        sum_lwp.add(lambda * wp);
    }
    let kf = k as f64;
    let big_s = sum.value() / kf + sum_wp.value() / (2.0 * kf);
    let big_t = sum_sq.value() / kf + sum_lwp.value() / kf;
    Ok((big_s, big_t))
}

/// Explicit bounds derived from the quadratic inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NextBounds {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "T")]
    pub t: f64,
    /// Upper bound on `Lambda_{k+1}`.
    pub upper_next: f64,
    /// Upper bound on `Lambda_{k+1} - Lambda_k`.
    pub gap_upper: f64,
    /// Lower bound on `Lambda_k`.
    pub lower_prev: f64,
}

pub fn bound_next(s: &Spectrum, k: usize) -> Result<NextBounds, BoundsError> {
    let (big_s, big_t) = compute_s_t(s, k)?;
    let disc = big_s.mul_add(big_s, -big_t);
    if disc < 0.0 {
        return Err(BoundsError::NegativeDiscriminant { s: big_s, t: big_t });
    }
    let root = disc.sqrt();
    Ok(NextBounds {
        s: big_s,
        t: big_t,
        upper_next: big_s + root,
        gap_upper: 2.0 * root,
        lower_prev: big_s - root,
    })
}

/// Delta-free bound: `sum g^2 (2 + (n-2)/(L-(n-2))) <= 2 sqrt(sum g^2 w) sqrt(sum g p)`.
pub fn check_theorem(s: &Spectrum, k: usize, lambda_next: f64) -> Result<CheckRecord, BoundsError> {
    let sums = gap_sums(s, k, lambda_next)?;
    Ok(CheckRecord::new(
        InequalityId::Theorem,
        sums.theorem_lhs,
        theorem_rhs(&sums)?,
    ))
}

/// Yang-type bound: `sum g^2 <= sum g w p`.
pub fn check_yang(s: &Spectrum, k: usize, lambda_next: f64) -> Result<CheckRecord, BoundsError> {
    let sums = gap_sums(s, k, lambda_next)?;
    Ok(CheckRecord::new(InequalityId::Yang, sums.g2, sums.g_wp))
}

fn check_delta(delta: f64) -> Result<(), BoundsError> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(BoundsError::InvalidDelta(delta))
    }
}

/// Both sides of the one-parameter family of Wang and Xia at a given `delta`.
pub fn wangxia_rhs(
    s: &Spectrum,
    k: usize,
    lambda_next: f64,
    delta: f64,
) -> Result<(f64, f64), BoundsError> {
    check_delta(delta)?;
    let values = leading(s, k)?;
    let sums = gap_sums(s, k, lambda_next)?;
    let c = s.n() as f64 - 2.0;
    let mut quadratic = CompensatedSum::new();
    for &lambda in values {
        let g = lambda_next - lambda;
        let coeff = delta * lambda + delta * delta * (lambda - c) / (4.0 * (delta * lambda + c));
        quadratic.add(g * g * coeff);
    }
    let rhs = quadratic.value() + sums.g_p / delta;
    Ok((2.0 * sums.g2, rhs))
}

/// Closed-form minimizer of `delta -> delta sum g^2 w + (1/delta) sum g p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalDelta {
    pub delta: f64,
    /// The minimized value, `2 sqrt(sum g^2 w) sqrt(sum g p)`.
    pub min_rhs: f64,
}

pub fn optimal_delta(
    s: &Spectrum,
    k: usize,
    lambda_next: f64,
) -> Result<OptimalDelta, BoundsError> {
    let sums = gap_sums(s, k, lambda_next)?;
    if !sums.any_gap {
        return Err(BoundsError::AllGapsZero);
    }
    if !(sums.g2_w > 0.0) {
        return Err(BoundsError::NegativeWeight(sums.g2_w));
    }
    let delta = (sums.g_p / sums.g2_w).sqrt();
    Ok(OptimalDelta {
        delta,
        min_rhs: delta_family_rhs(s, k, lambda_next, delta)?,
    })
}

/// `delta sum g^2 w + (1/delta) sum g p`, the right-hand side before
/// optimizing over `delta`.
pub fn delta_family_rhs(
    s: &Spectrum,
    k: usize,
    lambda_next: f64,
    delta: f64,
) -> Result<f64, BoundsError> {
    check_delta(delta)?;
    let sums = gap_sums(s, k, lambda_next)?;
    Ok(delta * sums.g2_w + sums.g_p / delta)
}

/// One row of the dominance comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub delta: f64,
    pub wx_rhs: f64,
    pub new_rhs: f64,
    /// `wx_rhs - new_rhs`; nonnegative when the new bound is at least as sharp.
    pub gap: f64,
}

/// Compares the Wang–Xia right-hand side against the delta-free quantity
/// `-sum g^2 (n-2)/(L-(n-2)) + 2 sqrt(sum g^2 w) sqrt(sum g p)` for each delta.
pub fn dominance_gap(
    s: &Spectrum,
    k: usize,
    lambda_next: f64,
    delta_grid: &[f64],
) -> Result<Vec<DominanceRow>, BoundsError> {
    if delta_grid.is_empty() {
        return Err(BoundsError::EmptyDeltaGrid);
    }
    let sums = gap_sums(s, k, lambda_next)?;
    let new_rhs = theorem_rhs(&sums)? - sums.g2_corr;
    delta_grid
        .iter()
        .map(|&delta| {
            let (_, wx_rhs) = wangxia_rhs(s, k, lambda_next, delta)?;
            Ok(DominanceRow {
                delta,
                wx_rhs,
                new_rhs,
                gap: wx_rhs - new_rhs,
            })
        })
        .collect()
}

/// The product inequality
/// `(sum g^2 w)(sum g p) <= (sum g^2)(sum g w p)`.
pub fn chebyshev_check(
    s: &Spectrum,
    k: usize,
    lambda_next: f64,
) -> Result<CheckRecord, BoundsError> {
    let sums = gap_sums(s, k, lambda_next)?;
    Ok(CheckRecord::new(
        InequalityId::Chebyshev,
        sums.g2_w * sums.g_p,
        sums.g2 * sums.g_wp,
    ))
}

/// `points` values spaced evenly in `log10` over `[min, max]`.
pub fn log_spaced(min: f64, max: f64, points: usize) -> Result<Vec<f64>, BoundsError> {
    if !(min > 0.0 && max >= min && max.is_finite()) || points == 0 {
        return Err(BoundsError::EmptyDeltaGrid);
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let (lo, hi) = (min.log10(), max.log10());
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i == points - 1 {
                max
            } else {
                10f64.powf(lo + step * i as f64)
            }
        })
        .collect())
}

pub fn default_delta_grid() -> Vec<f64> {
    log_spaced(1e-2, 1e2, 50).expect("static grid")
}

/// Every bound and check for one `(spectrum, k, Lambda_{k+1})` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub k: usize,
    pub lambda_next: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub upper_next: f64,
    pub gap_upper: f64,
    pub lower_prev: f64,
    pub delta_star: Option<f64>,
    /// Minimized delta-family right-hand side at `delta_star`.
    pub delta_star_rhs: Option<f64>,
    pub checks: Vec<CheckRecord>,
}

impl BoundReport {
    /// Evaluates every inequality at the candidate `lambda_next`.
    pub fn evaluate(
        s: &Spectrum,
        k: usize,
        lambda_next: f64,
        delta_grid: &[f64],
    ) -> Result<Self, BoundsError> {
        let next = bound_next(s, k)?;
        let lambda_k = s.values()[k - 1];
        let mut checks = vec![
            check_theorem(s, k, lambda_next)?,
            check_yang(s, k, lambda_next)?,
            CheckRecord::new(InequalityId::Upper, lambda_next, next.upper_next),
            CheckRecord::new(InequalityId::Gap, lambda_next - lambda_k, next.gap_upper),
        ];
        for &delta in delta_grid {
            let (lhs, rhs) = wangxia_rhs(s, k, lambda_next, delta)?;
            checks.push(CheckRecord::new(InequalityId::WangXia, lhs, rhs).with_delta(delta));
        }
        for row in dominance_gap(s, k, lambda_next, delta_grid)? {
            checks.push(
                CheckRecord::new(InequalityId::Dominance, row.new_rhs, row.wx_rhs)
                    .with_delta(row.delta),
            );
        }
        checks.push(chebyshev_check(s, k, lambda_next)?);
        checks.push(CheckRecord::new(
            InequalityId::Lower,
            next.lower_prev,
            lambda_k,
        ));

        let optimum = match optimal_delta(s, k, lambda_next) {
            Ok(o) => Some(o),
            Err(BoundsError::AllGapsZero) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            n: s.n(),
            k,
            lambda_next,
            s: next.s,
            t: next.t,
            upper_next: next.upper_next,
            gap_upper: next.gap_upper,
            lower_prev: next.lower_prev,
            delta_star: optimum.map(|o| o.delta),
            delta_star_rhs: optimum.map(|o| o.min_rhs),
            checks,
        })
    }

    pub fn with_tolerance(mut self, rel_tol: f64) -> Self {
        self.checks = self
            .checks
            .into_iter()
            .map(|c| c.with_tolerance(rel_tol))
            .collect();
        self
    }

    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn check(&self, id: InequalityId) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub const CSV_HEADER: &'static str = "n,k,inequality_id,lhs,rhs,slack,holds,delta";

    pub fn csv_rows(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    self.n,
                    self.k,
                    c.id,
                    sig17(c.lhs),
                    sig17(c.rhs),
                    sig17(c.slack),
                    c.holds,
                    c.delta.map(sig17).unwrap_or_default()
                )
            })
            .collect()
    }
}
