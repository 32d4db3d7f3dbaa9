//! Peierls barriers, Aubry set approximations, and the Mather alpha function
//! over cohomology classes.
//!
//! The barrier is the limit of B_k = A^(k) + k tau alpha, computed by min-plus
//! doubling with a single-step verification window. Aubry masks come either
//! from the barrier diagonal {x : h(x,x) <= eps} or from coincidence sets of
//! paired solutions; both are one-sided approximations of the projected Aubry
//! set (the barrier route from above in the horizon, the pairs route from a
//! finite solution family).
//!
//! alpha(c) is the critical value of the momentum-shifted model
//! H_c(x,p) = H(x, p+c). Shifting the conjugation lattice turns this into the
//! exact table transform L_c = L - c.v, so a whole sweep reuses one Legendre
//! transform built on windows enlarged by max |c|.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusGrid};
use crate::kernel::{build_kernel, ActionKernel, Direction, DENSE_NODE_LIMIT};
use crate::model::{validate_tonelli, CohomologyClass, HamiltonianModel};
use crate::transform::{legendre, LagrangianTable};
use crate::weakkam::{critical_value_karp, solve_weak_kam, PairedSolutions, SolveConfig};

/// Dense Peierls barrier h(x,y) and the data that produced it.
#[derive(Clone, Debug)]
pub struct BarrierMatrix {
    grid: TorusGrid,
    /// h values, layout [from][to].
    h: Vec<f64>,
    pub alpha_used: f64,
    /// Number of one-step factors at convergence.
    pub horizon: usize,
    pub converged: bool,
}

impl BarrierMatrix {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn value(&self, from: usize, to: usize) -> f64 {
        self.h[from * self.grid.node_count() + to]
    }

    pub fn values(&self) -> &[f64] {
        &self.h
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.grid.node_count();
        (0..n).map(|i| self.h[i * n + i]).collect()
    }

    pub fn sup_diff(&self, other: &BarrierMatrix) -> f64 {
        assert_eq!(self.grid, other.grid);
        self.h
            .iter()
            .zip(&other.h)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest violation of h(x,z) <= h(x,y) + h(y,z) over sampled triples.
    pub fn triangle_defect(&self, samples: usize) -> f64 {
        let n = self.grid.node_count();
        let stride = (n / samples.max(1)).max(1);
        let mut worst: f64 = f64::NEG_INFINITY;
        for x in (0..n).step_by(stride) {
            for y in (0..n).step_by(stride) {
                for z in (0..n).step_by(stride) {
                    worst = worst.max(self.value(x, z) - self.value(x, y) - self.value(y, z));
                }
            }
        }
        worst
    }
}

/// One backward step on a raw row (allows +infinity entries, unlike the
/// GridFunction path): out(z) = min_y row(y) + c(y,z) + tau*alpha.
fn step_row(kernel: &ActionKernel, row: &[f64], comp: f64) -> Vec<f64> {
    let n = kernel.grid().node_count();
    let mut out = vec![f64::INFINITY; n];
    for y in 0..n {
        let base = row[y];
        if !base.is_finite() {
            continue;
        }
        for (z, c) in kernel.edges_from(y) {
            let s = base + c + comp;
            if s < out[z] {
                out[z] = s;
            }
        }
    }
    out
}

fn sup_diff_allow_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if x.is_infinite() && y.is_infinite() {
                0.0
            } else {
                (x - y).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Limit of B_k = A^(k) + k tau alpha by min-plus doubling, verified over a
/// ten-step window of single products.
pub fn peierls_barrier(
    kernel: &ActionKernel,
    alpha: f64,
    tol: f64,
    k_max: usize,
) -> Result<BarrierMatrix> {
    let grid = kernel.grid().clone();
    let n = grid.node_count();
    if n > DENSE_NODE_LIMIT {
        return Err(Error::GridTooLargeForOracle {
            nodes: n,
            max: DENSE_NODE_LIMIT,
        });
    }
    if !(tol > 0.0) || k_max < 2 {
        return Err(Error::InvalidInput("bad barrier config".into()));
    }
    let comp = kernel.tau() * alpha;
    // B_1 rows.
    let mut b: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut row = vec![f64::INFINITY; n];
            for (y, c) in kernel.edges_from(x) {
                row[y] = c + comp;
            }
            row
        })
        .collect();
    let mut k = 1usize;
    let mut converged = false;

    while k < k_max {
        // Compensated doubling: costs add, so B_k * B_k = B_{2k} directly.
        let next: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut row = vec![f64::INFINITY; n];
                for y in 0..n {
                    let base = b[x][y];
                    if !base.is_finite() {
                        continue;
                    }
                    let by = &b[y];
                    for (slot, &w) in row.iter_mut().zip(by) {
                        let s = base + w;
                        if s < *slot {
                            *slot = s;
                        }
                    }
                }
                row
            })
            .collect();
        let d: f64 = next
            .par_iter()
            .zip(&b)
            .map(|(a, c)| sup_diff_allow_inf(a, c))
            .reduce(|| 0.0, f64::max);
        b = next;
        k *= 2;
        if d < tol {
            // Verify stability over single-step horizon extensions m = 1..10.
            let mut stable = true;
            let mut probe = b.clone();
            for _ in 0..10 {
                probe = probe
                    .into_par_iter()
                    .map(|row| step_row(kernel, &row, comp))
                    .collect();
                let dd: f64 = probe
                    .par_iter()
                    .zip(&b)
                    .map(|(a, c)| sup_diff_allow_inf(a, c))
                    .reduce(|| 0.0, f64::max);
                if !(dd < tol) {
                    stable = false;
                    break;
                }
            }
            if stable {
                converged = true;
                break;
            }
        }
    }

    let mut h = Vec::with_capacity(n * n);
    for row in &b {
        h.extend_from_slice(row);
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "barrier did not become finite: kernel graph not strongly connected".into(),
        ));
    }
    Ok(BarrierMatrix {
        grid,
        h,
        alpha_used: alpha,
        horizon: k,
        converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AubrySource {
    Peierls,
    Pairs,
}

#[derive(Clone, Debug)]
pub struct AubrySetApprox {
    pub mask: Vec<bool>,
    pub epsilon: f64,
    pub source: AubrySource,
    /// Per-pair coincidence masks kept for diagnosis when built from pairs.
    pub per_pair_masks: Option<Vec<Vec<bool>>>,
}

impl AubrySetApprox {
    pub fn node_indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }
}

/// Default mask threshold: 5 max(tol, spacing).
pub fn default_aubry_eps(tol: f64, spacing: f64) -> f64 {
    5.0 * tol.max(spacing)
}

/// Mask {x : h(x,x) <= eps}; empty masks are an error (threshold too small or
/// alpha wrong).
pub fn aubry_from_peierls(barrier: &BarrierMatrix, eps: f64) -> Result<AubrySetApprox> {
    let mask: Vec<bool> = barrier.diagonal().iter().map(|&d| d <= eps).collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyAubryMask);
    }
    Ok(AubrySetApprox {
        mask,
        epsilon: eps,
        source: AubrySource::Peierls,
        per_pair_masks: None,
    })
}

/// Intersection over pairs of near-coincidence sets {u^- - u^+ <= eps}, each
/// pair re-anchored so its gap minimum is zero. An empty intersection is
/// returned flagged (empty mask) with the per-pair masks for diagnosis.
pub fn aubry_from_pairs(pairs: &[PairedSolutions], eps: f64) -> Result<AubrySetApprox> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("need at least one pair".into()));
    }
    let n = pairs[0].u_minus.u.len();
    let per_pair: Vec<Vec<bool>> = pairs
        .iter()
        .map(|p| p.coincidence_gap().values().iter().map(|&g| g <= eps).collect())
        .collect();
    let mut mask = vec![true; n];
    for pm in &per_pair {
        for (m, &v) in mask.iter_mut().zip(pm) {
            *m &= v;
        }
    }
    Ok(AubrySetApprox {
        mask,
        epsilon: eps,
        source: AubrySource::Pairs,
        per_pair_masks: Some(per_pair),
    })
}

/// A maximal run of sweep nodes on which alpha is constant within tol_flat.
#[derive(Clone, Debug)]
pub struct Flat {
    /// Inclusive index range into the sweep's c_nodes.
    pub first: usize,
    pub last: usize,
    pub alpha_mean: f64,
    /// max - min of alpha over the run.
    pub defect: f64,
}

impl Flat {
    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub struct AlphaTable {
    pub c_nodes: Vec<CohomologyClass>,
    /// Critical value per node; None marks a per-c solver failure.
    pub alpha: Vec<Option<f64>>,
    pub flats: Vec<Flat>,
    pub tol_flat: f64,
}

impl AlphaTable {
    pub fn osc(&self) -> f64 {
        let defined: Vec<f64> = self.alpha.iter().flatten().copied().collect();
        let lo = defined.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// Midpoint convexity defect min over aligned triples of
    /// alpha(c-) + alpha(c+) - 2 alpha(c0); nonnegative (up to tolerance)
    /// certifies discrete convexity along the sweep.
    pub fn convexity_defect(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for i in 1..self.alpha.len().saturating_sub(1) {
            if let (Some(a), Some(b), Some(c)) =
                (self.alpha[i - 1], self.alpha[i], self.alpha[i + 1])
            {
                worst = worst.min(a + c - 2.0 * b);
            }
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub enum AlphaSolver {
    /// Exact minimum-mean-cycle oracle (small grids).
    Karp,
    /// Power iteration from a constant seed.
    Power(SolveConfig),
}

#[derive(Clone, Debug)]
pub struct AlphaSweepConfig {
    pub grid: TorusGrid,
    pub tau: f64,
    pub n_p: usize,
    pub n_v: usize,
    pub solver: AlphaSolver,
    /// Override for the flat tolerance; None applies the default rule.
    pub tol_flat: Option<f64>,
    pub validation_samples: usize,
}

impl AlphaSweepConfig {
    pub fn new(grid: TorusGrid, tau: f64) -> Self {
        AlphaSweepConfig {
            grid,
            tau,
            n_p: 513,
            n_v: 257,
            solver: AlphaSolver::Karp,
            tol_flat: None,
            validation_samples: 16,
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

/// Flat tolerance: floor 1e-3 osc(alpha), raised to 5x the median of
/// sub-floor adjacent increments (the plateau noise scale) when present.
fn auto_tol_flat(alpha: &[Option<f64>], osc: f64) -> f64 {
    if osc <= 0.0 {
        return 0.0;
    }
    let floor = 1e-3 * osc;
    let mut small = Vec::new();
    for w in alpha.windows(2) {
        if let (Some(a), Some(b)) = (w[0], w[1]) {
            let d = (b - a).abs();
            if d <= floor {
                small.push(d);
            }
        }
    }
    floor.max(5.0 * median(small))
}

/// Maximal runs (>= 3 nodes, no missing entries) with max - min <= tol_flat.
fn detect_flats(alpha: &[Option<f64>], tol_flat: f64) -> Vec<Flat> {
    let n = alpha.len();
    let mut flats = Vec::new();
    let mut i = 0usize;
    while i < n {
        if alpha[i].is_none() {
            i += 1;
            continue;
        }
        let mut lo = alpha[i].unwrap();
        let mut hi = lo;
        let mut j = i;
        while j + 1 < n {
            match alpha[j + 1] {
                Some(a) if (hi.max(a) - lo.min(a)) <= tol_flat => {
                    lo = lo.min(a);
                    hi = hi.max(a);
                    j += 1;
                }
                _ => break,
            }
        }
        if j - i + 1 >= 3 {
            let sum: f64 = alpha[i..=j].iter().flatten().sum();
            flats.push(Flat {
                first: i,
                last: j,
                alpha_mean: sum / (j - i + 1) as f64,
                defect: hi - lo,
            });
            i = j + 1;
        } else {
            i += 1;
        }
    }
    flats
}

/// Critical values of the momentum-shifted family over `c_nodes`, with flat
/// detection. Per-c solver failures are recorded as missing entries.
pub fn mather_alpha(
    h: &HamiltonianModel,
    c_nodes: &[CohomologyClass],
    cfg: &AlphaSweepConfig,
) -> Result<AlphaTable> {
    if c_nodes.is_empty() {
        return Err(Error::InvalidInput("empty cohomology sweep".into()));
    }
    if c_nodes.iter().any(|c| c.0.len() != h.dim()) {
        return Err(Error::InvalidInput("cohomology class dimension mismatch".into()));
    }
    let c_max = c_nodes.iter().map(|c| c.norm_inf()).fold(0.0, f64::max);
    // One conjugation on windows enlarged by max |c| serves the whole sweep.
    let enlarged = h.with_windows(h.p_window() + c_max, h.v_window() + c_max)?;
    let base = legendre(&enlarged, &cfg.grid, cfg.n_p, cfg.n_v)?;

    let alpha: Vec<Option<f64>> = c_nodes
        .par_iter()
        .map(|c| alpha_for_class(h, &base, c, cfg))
        .collect();

    let defined: Vec<f64> = alpha.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::InvalidInput("every shifted solve failed".into()));
    }
    let lo = defined.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol_flat = cfg.tol_flat.unwrap_or_else(|| auto_tol_flat(&alpha, hi - lo));
    let flats = detect_flats(&alpha, tol_flat);
    Ok(AlphaTable {
        c_nodes: c_nodes.to_vec(),
        alpha,
        flats,
        tol_flat,
    })
}

fn alpha_for_class(
    h: &HamiltonianModel,
    base: &LagrangianTable,
    c: &CohomologyClass,
    cfg: &AlphaSweepConfig,
) -> Option<f64> {
    // Revalidate the shifted model (windows enlarged by |c|).
    let shifted_model = h.shifted(c).ok()?;
    let report = validate_tonelli(&shifted_model, cfg.validation_samples).ok()?;
    if !report.passed {
        return None;
    }
    let table = base.shifted_by(&c.0);
    let kernel = build_kernel(&table, cfg.tau, Direction::Negative).ok()?;
    match &cfg.solver {
        AlphaSolver::Karp => critical_value_karp(&kernel).ok(),
        AlphaSolver::Power(sc) => {
            let seed = GridFunction::constant(cfg.grid.clone(), 0.0);
            let r = solve_weak_kam(&kernel, &seed, sc).ok()?;
            r.converged.then_some(r.alpha)
        }
    }
}

/// Per-flat comparison: is each flat of `a` also a region of constancy of
/// `b`'s alpha within `tol`?
#[derive(Clone, Debug)]
pub struct FlatCheck {
    pub first: usize,
    pub last: usize,
    pub a_mean: f64,
    pub b_mean: f64,
    /// max - min of b's alpha over a's flat (the constancy defect).
    pub b_defect: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct FlatsReport {
    pub checks: Vec<FlatCheck>,
    pub tol: f64,
}

impl FlatsReport {
    pub fn all_pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }
}

pub fn compare_flats(a: &AlphaTable, b: &AlphaTable, tol: f64) -> Result<FlatsReport> {
    if a.c_nodes.len() != b.c_nodes.len() {
        return Err(Error::InvalidInput("alpha tables use different sweeps".into()));
    }
    let mut checks = Vec::new();
    for f in &a.flats {
        let vals: Vec<f64> = b.alpha[f.first..=f.last].iter().flatten().copied().collect();
        let complete = vals.len() == f.len();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let b_defect = if vals.is_empty() { f64::INFINITY } else { hi - lo };
        let b_mean = if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        checks.push(FlatCheck {
            first: f.first,
            last: f.last,
            a_mean: f.alpha_mean,
            b_mean,
            b_defect,
            pass: complete && b_defect <= tol,
        });
    }
    Ok(FlatsReport { checks, tol })
}

/// Uniform 1D sweep helper: `count` classes spanning [lo, hi].
pub fn sweep_1d(lo: f64, hi: f64, count: usize) -> Vec<CohomologyClass> {
    (0..count)
        .map(|i| {
            let t = if count == 1 {
                0.5
            } else {
                i as f64 / (count - 1) as f64
            };
            CohomologyClass(vec![lo + (hi - lo) * t])
        })
        .collect()
}
