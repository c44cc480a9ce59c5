//! Clamped buckling eigenvalues of a geodesic cap `{theta <= theta0}` in `S^n`.
//!
//! Separation of variables `u = f(theta) Y_m` with `Y_m` a degree-`m`
//! spherical harmonic on `S^{n-1}` turns `Delta^2 u = Lambda (-Delta) u` into
//! the radial pencil
//!
//! ```text
//! int (L f)(L g) sin^{n-1}  =  Lambda int (f'g' + mu f g / sin^2) sin^{n-1}
//! L f = f'' + (n-1) cot(theta) f' - mu f / sin^2(theta),   mu = m (m + n - 2)
//! ```
//!
//! discretized by second-order finite differences on the nodes
//! `theta_j = (j + 1/2) h`, `h = theta0 / (N + 1/2)`. Node `N` sits on the
//! boundary and carries `f = 0`; the ghost node beyond it mirrors node `N - 1`
//! so the central difference of `f'` vanishes there. At the pole the ghost
//! `f(-h/2) = (-1)^m f(h/2)` carries the regularity `f ~ theta^m`.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::gevp::{solve_gevp, DenseMatrix, GevpError, GevpPair};
use crate::parallel::Execution;
use crate::spectrum::{merge_labelled, CapDomain, ModeLabel, Spectrum, SpectrumError};
use crate::summation::CompensatedSum;

pub const MIN_GRID: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("grid size {0} is below the minimum of {MIN_GRID}")]
    GridTooCoarse(usize),
    #[error(transparent)]
    Eigen(#[from] GevpError),
    #[error("no convergence after {levels} grid levels (finest N = {finest}, last relative change {last_change:e}, tolerance {rel_tol:e})")]
    NoConvergence {
        levels: usize,
        finest: usize,
        last_change: f64,
        rel_tol: f64,
    },
    #[error("identity check requires an axisymmetric (m = 0) eigenpair, got m = {0}")]
    UnsupportedMode(usize),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
}

impl SolverError {
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            SolverError::NoConvergence { .. } | SolverError::Eigen(GevpError::NoConvergence { .. })
        )
    }
}

/// Radial grid on `[0, theta0]` with the boundary on node `cells`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    theta0: f64,
    cells: usize,
    h: f64,
}

impl RadialGrid {
    pub fn new(domain: &CapDomain, cells: usize) -> Result<Self, SolverError> {
        if cells < MIN_GRID {
            return Err(SolverError::GridTooCoarse(cells));
        }
        Ok(Self {
            dim: domain.n(),
            theta0: domain.theta0(),
            cells,
            h: domain.theta0() / (cells as f64 + 0.5),
        })
    }

    /// Number of unknowns.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// `theta_j = (j + 1/2) h`; `node(cells) == theta0`.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.cells {
            self.theta0
        } else {
            (j as f64 + 0.5) * self.h
        }
    }

    /// Face between nodes `j` and `j + 1`.
    pub fn face(&self, j: usize) -> f64 {
        (j as f64 + 1.0) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.cells).map(|j| self.node(j)).collect()
    }

    fn volume(&self, theta: f64) -> f64 {
        theta.sin().powi(self.dim as i32 - 1)
    }

    /// Quadrature weight of node `j` for integrals against `sin^{n-1}`.
    pub fn node_weight(&self, j: usize) -> f64 {
        let w = self.h * self.volume(self.node(j));
        if j == self.cells {
            0.5 * w
        } else {
            w
        }
    }

    pub fn face_weight(&self, j: usize) -> f64 {
        self.h * self.volume(self.face(j))
    }
}

/// `mu = m (m + n - 2)`, the eigenvalue of `-Delta` on `S^{n-1}` for degree `m`.
pub fn angular_eigenvalue(m: usize, n: usize) -> f64 {
    (m * (m + n - 2)) as f64
}

/// Raw three-point coefficients `(f_{j-1}, f_j, f_{j+1})` of `L` at every node
/// `j = 0..=cells`, before ghost and boundary substitution.
pub fn radial_stencil(grid: &RadialGrid, mu: f64) -> Vec<[f64; 3]> {
    let h = grid.h;
    let nm1 = grid.dim as f64 - 1.0;
    (0..=grid.cells)
        .map(|j| {
            let theta = grid.node(j);
            let (s, c) = theta.sin_cos();
            let drift = nm1 * c / s / (2.0 * h);
            [
                1.0 / (h * h) - drift,
                -2.0 / (h * h) - mu / (s * s),
                1.0 / (h * h) + drift,
            ]
        })
        .collect()
}

/// Discretized quadratic forms of one azimuthal mode.
#[derive(Debug, Clone)]
pub struct ModeSystem {
    pub m: usize,
    pub mu: f64,
    pub grid: RadialGrid,
    /// `int (L f)^2 sin^{n-1}`
    pub a: DenseMatrix,
    /// `int (f'^2 + mu f^2 / sin^2) sin^{n-1}`
    pub b: DenseMatrix,
    /// Diagonal of `int f^2 sin^{n-1}`.
    pub mass: Vec<f64>,
    operator: Vec<Vec<(usize, f64)>>,
}

/// Sparse rows of the operator `L` acting on the unknowns, with the pole
/// parity ghost and both clamped conditions folded in.
fn operator_rows(grid: &RadialGrid, m: usize, mu: f64) -> Vec<Vec<(usize, f64)>> {
    let cells = grid.cells;
    let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
    radial_stencil(grid, mu)
        .into_iter()
        .enumerate()
        .map(|(j, [lo, mid, hi])| {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(3);
            let mut push = |col: usize, v: f64| match row.iter_mut().find(|(c, _)| *c == col) {
                Some(entry) => entry.1 += v,
                None => row.push((col, v)),
            };
            if j == 0 {
                push(0, parity * lo);
            } else {
                push(j - 1, lo);
            }
            if j < cells {
                push(j, mid);
            }
            if j + 1 < cells {
                push(j + 1, hi);
            } else if j == cells {
                // mirror ghost beyond the boundary
                push(cells - 1, hi);
            }
            row
        })
        .collect()
}

pub fn assemble_mode(
    domain: &CapDomain,
    m: usize,
    cells: usize,
) -> Result<ModeSystem, SolverError> {
    let grid = RadialGrid::new(domain, cells)?;
    let mu = angular_eigenvalue(m, domain.n());
    let rows = operator_rows(&grid, m, mu);

    let mut a = DenseMatrix::zeros(cells, cells);
    for (j, row) in rows.iter().enumerate() {
        let w = grid.node_weight(j);
        for &(p, lp) in row {
            for &(q, lq) in row {
                a[(p, q)] += w * lp * lq;
            }
        }
    }

    let mut b = DenseMatrix::zeros(cells, cells);
    let inv_h2 = 1.0 / (grid.h * grid.h);
    for j in 0..cells {
        // face j couples f_j and f_{j+1}; f_cells = 0
        let w = grid.face_weight(j) * inv_h2;
        b[(j, j)] += w;
        if j + 1 < cells {
            b[(j + 1, j + 1)] += w;
            b[(j, j + 1)] -= w;
            b[(j + 1, j)] -= w;
        }
    }
    let mut mass = Vec::with_capacity(cells);
    for j in 0..cells {
        let wj = grid.node_weight(j);
        mass.push(wj);
        if mu != 0.0 {
            let s = grid.node(j).sin();
            b[(j, j)] += mu * wj / (s * s);
        }
    }
    Ok(ModeSystem {
        m,
        mu,
        grid,
        a,
        b,
        mass,
        operator: rows,
    })
}

impl ModeSystem {
    /// Lowest `count` eigenpairs. Vectors come from the dense pencil; each
    /// value is then recomputed as [`ModeSystem::rayleigh_quotient`], since the
    /// assembled `A` carries rounding of order `eps / h^4`.
    pub fn solve(&self, count: usize) -> Result<Vec<GevpPair>, SolverError> {
        let mut pairs = solve_gevp(&self.a, &self.b, count.min(self.grid.cells))?;
        for p in pairs.iter_mut() {
            p.value = self.rayleigh_quotient(&p.vector);
        }
        pairs.sort_by(|x, y| x.value.total_cmp(&y.value));
        Ok(pairs)
    }

    /// `|W^{1/2} L x|^2 / x^T B x` evaluated from the difference operators
    /// directly, without forming `A`.
    pub fn rayleigh_quotient(&self, x: &[f64]) -> f64 {
        let grid = &self.grid;
        let mut num = CompensatedSum::new();
        for (j, row) in self.operator.iter().enumerate() {
            let lx: f64 = row.iter().map(|&(q, v)| v * x[q]).sum();
            num.add(grid.node_weight(j) * lx * lx);
        }
        let cells = grid.cells;
        let mut den = CompensatedSum::new();
        for j in 0..cells {
            let next = if j + 1 < cells { x[j + 1] } else { 0.0 };
            let d = (next - x[j]) / grid.h;
            den.add(grid.face_weight(j) * d * d);
            if self.mu != 0.0 {
                let s = grid.node(j).sin();
                den.add(self.mu * self.mass[j] * x[j] * x[j] / (s * s));
            }
        }
        num.value() / den.value()
    }
}

/// One eigenvalue with its radial profile on the grid it was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// Eigenvalue of the discrete pencil on `grid`.
    pub lambda: f64,
    pub m: usize,
    /// Position within mode `m`, 0-based.
    pub index: usize,
    pub grid: RadialGrid,
    /// `f(theta_j)` for `j = 0..cells`, normalized so the discrete Dirichlet
    /// form equals one.
    pub profile: Vec<f64>,
}

impl EigenPair {
    /// `theta,f` rows including the boundary point where `f = 0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,f\n");
        for (j, f) in self.profile.iter().enumerate() {
            out.push_str(&format!("{:.16e},{:.16e}\n", self.grid.node(j), f));
        }
        out.push_str(&format!("{:.16e},{:.16e}\n", self.grid.theta0(), 0.0));
        out
    }

    /// Face-centred first differences `f'` with `f = 0` on the boundary node.
    fn face_derivatives(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        let n = self.profile.len();
        (0..n)
            .map(|j| {
                let next = if j + 1 < n { self.profile[j + 1] } else { 0.0 };
                (next - self.profile[j]) / h
            })
            .collect()
    }
}

/// Residuals `|sum_a ||x_a grad u||^2 - 1|` and `|sum_a ||<grad x_a, grad u>||^2 - 1|`
/// for an axisymmetric eigenpair normalized by `int |grad u|^2 = 1`.
///
/// With `x_{n+1} = cos(theta)` and `x_a = sin(theta) omega_a`, `a <= n`, the
/// sums split into `cos^2` and `sin^2` weighted pieces of `int f'^2`, each
/// evaluated with the face quadrature of the Dirichlet form.
pub fn check_coordinate_identity(
    pair: &EigenPair,
    domain: &CapDomain,
) -> Result<(f64, f64), SolverError> {
    if pair.m != 0 {
        return Err(SolverError::UnsupportedMode(pair.m));
    }
    let grid = RadialGrid::new(domain, pair.profile.len())?;
    let df = pair.face_derivatives();
    let mut pole_term_a = 0.0; // ||x_{n+1} grad u||^2
    let mut ring_term_a = 0.0; // sum over a <= n of ||x_a grad u||^2
    let mut pole_term_b = 0.0; // ||<grad x_{n+1}, grad u>||^2
    let mut ring_term_b = 0.0;
    for (j, d) in df.iter().enumerate() {
        let (s, c) = grid.face(j).sin_cos();
        let e = grid.face_weight(j) * d * d;
        pole_term_a += e * c * c;
        ring_term_a += e * s * s;
        pole_term_b += e * s * s;
        ring_term_b += e * c * c;
    }
    Ok((
        (pole_term_a + ring_term_a - 1.0).abs(),
        (pole_term_b + ring_term_b - 1.0).abs(),
    ))
}

/// Refinement controls for [`solve_cap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Initial number of unknowns.
    pub n0: usize,
    /// Maximum number of grid doublings after `n0`.
    pub max_refinements: usize,
    /// Convergence threshold on the relative change of the extrapolated top-k values.
    pub rel_tol: f64,
    /// Dense solves are skipped beyond this size and reported as non-convergence.
    pub max_grid: usize,
    pub execution: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            n0: 128,
            max_refinements: 6,
            rel_tol: 1e-6,
            max_grid: 2048,
            execution: Execution::default(),
        }
    }
}

/// Per-level record of the refinement loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelInfo {
    pub cells: usize,
    pub mode_cutoff: usize,
    /// Extrapolated top-k values from this level and the previous one.
    pub estimate: Option<Vec<f64>>,
    /// Largest relative change of `estimate` against the previous level.
    pub change: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CapSolution {
    pub spectrum: Spectrum,
    /// Eigenpairs on the finest grid for each distinct `(m, index)` in the
    /// spectrum, in spectrum order.
    pub pairs: Vec<EigenPair>,
    pub levels: Vec<LevelInfo>,
    /// `log2` ratio of successive differences for each spectrum entry.
    pub observed_orders: Vec<f64>,
}

impl CapSolution {
    pub fn first_axisymmetric(&self) -> Option<&EigenPair> {
        self.pairs.iter().find(|p| p.m == 0)
    }
}

type ModeMap = BTreeMap<usize, Vec<GevpPair>>;

fn solve_modes(
    domain: &CapDomain,
    cells: usize,
    modes: Vec<usize>,
    count: usize,
    exec: Execution,
) -> Result<Vec<(usize, Vec<GevpPair>)>, SolverError> {
    exec.map(modes, |m| {
        let system = assemble_mode(domain, m, cells)?;
        Ok((m, system.solve(count)?))
    })
    .into_iter()
    .collect()
}

fn value_lists(modes: &ModeMap) -> Vec<(usize, Vec<f64>)> {
    modes
        .iter()
        .map(|(&m, pairs)| (m, pairs.iter().map(|p| p.value).collect()))
        .collect()
}

fn expanded_len(n: usize, modes: &ModeMap) -> usize {
    modes
        .iter()
        .map(|(&m, pairs)| crate::spectrum::harmonic_multiplicity(n, m) * pairs.len())
        .sum()
}

/// Modes in ascending `m` until the lowest eigenvalue of the last one exceeds
/// the current k-th smallest candidate.
fn sweep_modes(
    domain: &CapDomain,
    cells: usize,
    k: usize,
    hint: &[usize],
    exec: Execution,
) -> Result<(ModeMap, usize), SolverError> {
    let n = domain.n();
    let count = k.min(cells);
    let mut modes: ModeMap = BTreeMap::new();
    let initial: Vec<usize> = if hint.is_empty() {
        vec![0]
    } else {
        hint.to_vec()
    };
    modes.extend(solve_modes(domain, cells, initial, count, exec)?);
    let mut extensions = 0usize;
    let mut extended = false;
    loop {
        let last = *modes.keys().next_back().expect("at least one mode");
        let done = if expanded_len(n, &modes) >= k {
            let kth = merge_labelled(&value_lists(&modes), n, k)?
                .last()
                .map(|l| l.value)
                .expect("k >= 1");
            modes[&last].first().is_some_and(|p| p.value > kth)
        } else {
            false
        };
        if !done {
            modes.extend(solve_modes(domain, cells, vec![last + 1], count, exec)?);
            continue;
        }
        // lowest eigenvalue per mode should increase with m
        let lowest: Vec<f64> = modes
            .values()
            .filter_map(|p| p.first().map(|q| q.value))
            .collect();
        let monotone = lowest.windows(2).all(|w| w[0] <= w[1]);
        if monotone || extended {
            break;
        }
        extended = true;
        extensions += 1;
        modes.extend(solve_modes(
            domain,
            cells,
            vec![last + 1, last + 2],
            count,
            exec,
        )?);
    }
    Ok((modes, extensions))
}

struct Level {
    cells: usize,
    modes: ModeMap,
}

fn fill_missing(
    domain: &CapDomain,
    level: &mut Level,
    wanted: &[usize],
    k: usize,
    exec: Execution,
) -> Result<(), SolverError> {
    let missing: Vec<usize> = wanted
        .iter()
        .copied()
        .filter(|m| !level.modes.contains_key(m))
        .collect();
    if !missing.is_empty() {
        let solved = solve_modes(domain, level.cells, missing, k.min(level.cells), exec)?;
        level.modes.extend(solved);
    }
    Ok(())
}

/// `(4 fine - coarse) / 3` per `(m, index)`, merged into the top k.
fn extrapolate(
    coarse: &Level,
    fine: &Level,
    n: usize,
    k: usize,
) -> Result<Vec<ModeLabel>, SolverError> {
    let lists: Vec<(usize, Vec<f64>)> = fine
        .modes
        .iter()
        .map(|(&m, fine_pairs)| {
            let coarse_pairs = &coarse.modes[&m];
            let values = fine_pairs
                .iter()
                .zip(coarse_pairs)
                .map(|(f, c)| (4.0 * f.value - c.value) / 3.0)
                .collect::<Vec<f64>>();
            (m, values)
        })
        .collect();
    // extrapolation can perturb order within a mode by rounding only
    let lists = lists
        .into_iter()
        .map(|(m, mut v)| {
            v.sort_by(f64::total_cmp);
            (m, v)
        })
        .collect::<Vec<_>>();
    Ok(merge_labelled(&lists, n, k)?)
}

fn observed_order(v0: f64, v1: f64, v2: f64) -> f64 {
    ((v0 - v1) / (v1 - v2)).log2()
}

fn max_relative_change(a: &[ModeLabel], b: &[ModeLabel]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.value - y.value).abs() / x.value.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Lowest `k` buckling eigenvalues (with multiplicity) of the clamped cap.
pub fn solve_cap(
    domain: &CapDomain,
    k: usize,
    opts: &SolveOptions,
) -> Result<CapSolution, SolverError> {
    if k == 0 {
        return Err(SolverError::InvalidOptions("k must be at least 1".into()));
    }
    if opts.n0 < MIN_GRID {
        return Err(SolverError::GridTooCoarse(opts.n0));
    }
    if !(opts.rel_tol > 0.0) {
        return Err(SolverError::InvalidOptions(format!(
            "rel_tol must be positive, got {}",
            opts.rel_tol
        )));
    }
    let n = domain.n();
    let exec = opts.execution;
    let mut levels: Vec<Level> = Vec::new();
    let mut infos: Vec<LevelInfo> = Vec::new();
    let mut estimate: Option<Vec<ModeLabel>> = None;
    let mut last_change = f64::INFINITY;
    let mut extensions = 0usize;
    let mut converged = false;
    let mut cells = opts.n0;

    for _ in 0..=opts.max_refinements {
        if cells > opts.max_grid {
            break;
        }
        let hint: Vec<usize> = levels
            .last()
            .map(|l| l.modes.keys().copied().collect())
            .unwrap_or_default();
        let (modes, ext) = sweep_modes(domain, cells, k, &hint, exec)?;
        extensions += ext;
        let wanted: Vec<usize> = modes.keys().copied().collect();
        for level in levels.iter_mut() {
            fill_missing(domain, level, &wanted, k, exec)?;
        }
        levels.push(Level { cells, modes });
        let mut info = LevelInfo {
            cells,
            mode_cutoff: *wanted.last().expect("nonempty"),
            estimate: None,
            change: None,
        };
        if levels.len() >= 2 {
            let l = levels.len();
            let next = extrapolate(&levels[l - 2], &levels[l - 1], n, k)?;
            info.estimate = Some(next.iter().map(|x| x.value).collect());
            if let Some(prev) = &estimate {
                last_change = max_relative_change(&next, prev);
                info.change = Some(last_change);
                if last_change < opts.rel_tol {
                    converged = true;
                }
            }
            estimate = Some(next);
        }
        infos.push(info);
        if converged {
            break;
        }
        cells *= 2;
    }

    if !converged {
        return Err(SolverError::NoConvergence {
            levels: levels.len(),
            finest: levels.last().map_or(0, |l| l.cells),
            last_change,
            rel_tol: opts.rel_tol,
        });
    }

    let labels = estimate.expect("converged implies an estimate");
    let l = levels.len();
    let (coarsest, middle, finest) = (&levels[l - 3], &levels[l - 2], &levels[l - 1]);
    let observed_orders: Vec<f64> = labels
        .iter()
        .map(|lab| {
            observed_order(
                coarsest.modes[&lab.m][lab.index].value,
                middle.modes[&lab.m][lab.index].value,
                finest.modes[&lab.m][lab.index].value,
            )
        })
        .collect();

    let grid = RadialGrid::new(domain, finest.cells)?;
    let mut pairs: Vec<EigenPair> = Vec::new();
    for lab in &labels {
        if pairs.iter().any(|p| p.m == lab.m && p.index == lab.index) {
            continue;
        }
        let gp = &finest.modes[&lab.m][lab.index];
        pairs.push(EigenPair {
            lambda: gp.value,
            m: lab.m,
            index: lab.index,
            grid,
            profile: gp.vector.clone(),
        });
    }

    let mut finite: Vec<f64> = observed_orders
        .iter()
        .copied()
        .filter(|o| o.is_finite())
        .collect();
    finite.sort_by(f64::total_cmp);
    let median = if finite.is_empty() {
        Value::Null
    } else {
        json!(finite[finite.len() / 2])
    };
    let mut meta = Map::new();
    meta.insert("N".into(), json!(finest.cells));
    meta.insert(
        "N_levels".into(),
        json!(levels.iter().map(|l| l.cells).collect::<Vec<_>>()),
    );
    meta.insert(
        "mode_cutoff".into(),
        json!(infos.last().map(|i| i.mode_cutoff)),
    );
    meta.insert("observed_order".into(), median);
    meta.insert("observed_order_min".into(), json!(finite.first()));
    meta.insert("observed_order_max".into(), json!(finite.last()));
    meta.insert("rel_change".into(), json!(last_change));
    meta.insert("rel_tol".into(), json!(opts.rel_tol));
    meta.insert("extrapolation".into(), json!("richardson-order-2"));
    meta.insert("interlacing_extensions".into(), json!(extensions));
    meta.insert(
        "modes".into(),
        json!(labels.iter().map(|l| [l.m, l.index]).collect::<Vec<_>>()),
    );

    let spectrum = Spectrum::new(n, labels.iter().map(|l| l.value).collect())?
        .with_domain(*domain)
        .with_meta(meta);
    Ok(CapSolution {
        spectrum,
        pairs,
        levels: infos,
        observed_orders,
    })
}

/// Raw values of fixed `(m, index)` labels across successive grid doublings.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub cells: Vec<usize>,
    /// Distinct `(m, index)` among the lowest k, ordered by value on the finest grid.
    pub labels: Vec<(usize, usize)>,
    /// `values[level][i]` for label `i`.
    pub values: Vec<Vec<f64>>,
    /// `orders[level - 2][i]` from levels `level - 2 ..= level`.
    pub orders: Vec<Vec<f64>>,
}

pub fn convergence_study(
    domain: &CapDomain,
    k: usize,
    n0: usize,
    levels: usize,
    exec: Execution,
) -> Result<ConvergenceStudy, SolverError> {
    if levels < 1 || k == 0 {
        return Err(SolverError::InvalidOptions(
            "need at least one level and k >= 1".into(),
        ));
    }
    let cells: Vec<usize> = (0..levels).map(|i| n0 << i).collect();
    let (finest_modes, _) = sweep_modes(domain, *cells.last().expect("levels >= 1"), k, &[], exec)?;
    let wanted: Vec<usize> = finest_modes.keys().copied().collect();
    let mut labels: Vec<(usize, usize)> = Vec::new();
    for l in merge_labelled(&value_lists(&finest_modes), domain.n(), k)? {
        if !labels.contains(&(l.m, l.index)) {
            labels.push((l.m, l.index));
        }
    }
    let mut values = Vec::with_capacity(levels);
    for &c in &cells[..levels - 1] {
        let solved: ModeMap = solve_modes(domain, c, wanted.clone(), k.min(c), exec)?
            .into_iter()
            .collect();
        values.push(
            labels
                .iter()
                .map(|&(m, i)| solved[&m][i].value)
                .collect::<Vec<_>>(),
        );
    }
    values.push(
        labels
            .iter()
            .map(|&(m, i)| finest_modes[&m][i].value)
            .collect(),
    );
    let orders = values
        .windows(3)
        .map(|w| {
            (0..labels.len())
                .map(|i| observed_order(w[0][i], w[1][i], w[2][i]))
                .collect()
        })
        .collect();
    Ok(ConvergenceStudy {
        cells,
        labels,
        values,
        orders,
    })
}

/// Eigenpair `(m, index)` on a fixed grid, for profile dumps.
pub fn solve_mode_pair(
    domain: &CapDomain,
    m: usize,
    index: usize,
    cells: usize,
) -> Result<EigenPair, SolverError> {
    let system = assemble_mode(domain, m, cells)?;
    let mut pairs = system.solve(index + 1)?;
    if pairs.len() <= index {
        return Err(SolverError::InvalidOptions(format!(
            "mode {m} has only {} eigenpairs on a {cells}-point grid",
            pairs.len()
        )));
    }
    let gp = pairs.swap_remove(index);
    Ok(EigenPair {
        lambda: gp.value,
        m,
        index,
        grid: system.grid,
        profile: gp.vector,
    })
}
