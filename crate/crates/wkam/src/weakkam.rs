//! Critical values and weak KAM solutions of the discrete operator.
//!
//! The backward fixed-point problem u = T^- u + tau*alpha is a min-plus
//! eigenproblem: alpha = -mu/tau where mu is the minimum mean cycle of the
//! kernel costs. Two independent algorithms compute it:
//!
//! * power iteration with anchor renormalization (any grid size), and
//! * Karp's minimum-mean-cycle recurrence (dense oracle, small grids).
//!
//! Solutions are normalized to u[anchor] = 0; the `offset` field recovers the
//! compensated limit lim T^k u0 + k tau alpha used for Fathi pairing.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::kernel::{ActionKernel, Direction};

/// Node-count cap for the dense Karp oracle (O(n^2 band) time, O(n^2) space).
pub const KARP_NODE_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug)]
pub struct SolveConfig {
    /// Stop when the oscillation of successive anchored iterates stays below
    /// this for `window` consecutive steps.
    pub tol: f64,
    pub max_iter: usize,
    /// Normalization anchor node (solutions are defined up to constants).
    pub anchor: usize,
    /// Consecutive-iteration stability window.
    pub window: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol: 1e-9,
            max_iter: 50_000,
            anchor: 0,
            window: 10,
        }
    }
}

impl SolveConfig {
    pub fn with_tol(tol: f64) -> Self {
        SolveConfig {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct WeakKamResult {
    /// Converged solution, anchored to u[anchor] = 0.
    pub u: GridFunction,
    /// Critical value estimate (energy units).
    pub alpha: f64,
    pub direction: Direction,
    pub iterations: usize,
    /// A-posteriori fixed-point defect ||T u (-/+) tau*alpha - u||_inf.
    pub residual: f64,
    pub anchor: usize,
    pub converged: bool,
    /// u + offset equals the compensated limit of the iteration from the seed.
    pub offset: f64,
    /// Per-iteration anchor shifts (drift tau*alpha per step, signed).
    pub shift_history: Vec<f64>,
    /// Per-iteration oscillation of successive anchored iterates.
    pub defect_history: Vec<f64>,
}

impl WeakKamResult {
    /// The compensated limit lim T^k u0 + k tau alpha (not anchored).
    pub fn compensated(&self) -> GridFunction {
        let mut out = self.u.clone();
        out.add_scalar(self.offset);
        out
    }
}

/// Iterate the semigroup of `kernel` from `u0` until the anchored iterates
/// stabilize. Non-convergence is flagged on the result, not an error.
pub fn solve_weak_kam(
    kernel: &ActionKernel,
    u0: &GridFunction,
    cfg: &SolveConfig,
) -> Result<WeakKamResult> {
    if u0.grid() != kernel.grid() {
        return Err(Error::InvalidInput("seed grid mismatch".into()));
    }
    if cfg.anchor >= u0.len() {
        return Err(Error::InvalidInput("anchor out of range".into()));
    }
    if !(cfg.tol > 0.0) || cfg.window == 0 {
        return Err(Error::InvalidInput("bad solver config".into()));
    }
    let tau = kernel.tau();
    let seed_anchor_value = u0.values()[cfg.anchor];
    let mut v = u0.anchored(cfg.anchor);
    let mut shift_history = Vec::new();
    let mut defect_history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let mut w = kernel.apply_semigroup(&v);
        let shift = w.values()[cfg.anchor];
        w.add_scalar(-shift);
        // Oscillation of the anchored difference: non-increasing under the
        // non-expansive operator, and dominates the anchored sup-difference.
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in w.values().iter().zip(v.values()) {
            let d = a - b;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let defect = hi - lo;
        shift_history.push(shift);
        defect_history.push(defect);
        v = w;
        if defect_history.len() >= cfg.window
            && defect_history[defect_history.len() - cfg.window..]
                .iter()
                .all(|d| *d < cfg.tol)
        {
            converged = true;
            break;
        }
    }

    let last_shift = *shift_history.last().expect("at least one iteration");
    let alpha = match kernel.direction() {
        Direction::Negative => -last_shift / tau,
        Direction::Positive => last_shift / tau,
    };
    let offset = seed_anchor_value
        + shift_history
            .iter()
            .map(|s| s - last_shift)
            .sum::<f64>();

    // Recompute the fixed-point defect a posteriori.
    let mut tu = kernel.apply_semigroup(&v);
    match kernel.direction() {
        Direction::Negative => tu.add_scalar(tau * alpha),
        Direction::Positive => tu.add_scalar(-tau * alpha),
    }
    let residual = tu.sup_diff(&v);

    Ok(WeakKamResult {
        u: v,
        alpha,
        direction: kernel.direction(),
        iterations,
        residual,
        anchor: cfg.anchor,
        converged,
        offset,
        shift_history,
        defect_history,
    })
}

/// Exact minimum cycle mean of the kernel costs via Karp's recurrence;
/// returns alpha = -mu/tau. Dense oracle for small grids.
pub fn critical_value_karp(kernel: &ActionKernel) -> Result<f64> {
    let n = kernel.grid().node_count();
    if n > KARP_NODE_LIMIT {
        return Err(Error::GridTooLargeForOracle {
            nodes: n,
            max: KARP_NODE_LIMIT,
        });
    }
    let edges: Vec<Vec<(usize, f64)>> = (0..n).map(|x| kernel.edges_from(x)).collect();
    // d[k][v] = min cost of a k-edge walk from node 0 to v.
    let mut d = vec![f64::INFINITY; (n + 1) * n];
    d[0] = 0.0;
    for k in 1..=n {
        let (prev, cur) = d.split_at_mut(k * n);
        let prev = &prev[(k - 1) * n..];
        let cur = &mut cur[..n];
        for u in 0..n {
            let du = prev[u];
            if !du.is_finite() {
                continue;
            }
            for &(v, w) in &edges[u] {
                let cand = du + w;
                if cand < cur[v] {
                    cur[v] = cand;
                }
            }
        }
    }
    let mut mu = f64::INFINITY;
    for v in 0..n {
        let dn = d[n * n + v];
        if !dn.is_finite() {
            continue;
        }
        let mut worst = f64::NEG_INFINITY;
        for k in 0..n {
            let dk = d[k * n + v];
            if dk.is_finite() {
                worst = worst.max((dn - dk) / (n - k) as f64);
            }
        }
        if worst.is_finite() {
            mu = mu.min(worst);
        }
    }
    if !mu.is_finite() {
        return Err(Error::InvalidInput("kernel graph has no cycles reachable from node 0".into()));
    }
    Ok(-mu / kernel.tau())
}

/// Subsolution defect max(0, sup_y [u(y) - (T^- u(y) + tau alpha)]) for the
/// raw min-plus operator of `kernel`; zero (up to tolerance) iff u is an
/// (alpha, .)-subsolution of the discrete operator.
pub fn check_subsolution(u: &GridFunction, kernel: &ActionKernel, alpha: f64) -> f64 {
    let tu = kernel.minplus_apply(u);
    let tau = kernel.tau();
    u.values()
        .iter()
        .zip(tu.values())
        .map(|(uy, ty)| uy - (ty + tau * alpha))
        .fold(0.0f64, f64::max)
        .max(0.0)
}

/// Negative/positive solutions grown from a common seed, with the Fathi
/// pairing consistency check.
#[derive(Clone, Debug)]
pub struct PairedSolutions {
    pub u_minus: WeakKamResult,
    pub u_plus: WeakKamResult,
    pub seed_label: String,
    /// Subsolution defect of the seed against the negative kernel at the
    /// solved alpha (pairing-by-limit still proceeds when positive).
    pub seed_violation: f64,
    /// Sup distance between u_minus and the re-solved negative limit from
    /// u_plus; the pairing characterization makes this small for true pairs.
    pub consistency_gap: f64,
    pub consistent: bool,
}

impl PairedSolutions {
    /// Compensated gap u^- - u^+, re-anchored so its minimum is zero.
    pub fn coincidence_gap(&self) -> GridFunction {
        let mut gap = self.u_minus.compensated().sub(&self.u_plus.compensated());
        let m = gap.min_value();
        gap.add_scalar(-m);
        gap
    }
}

/// Solve both semigroups from `seed` and verify the limit characterization of
/// the pairing: re-running the negative solver from u_plus must reproduce
/// u_minus within 2 tol.
pub fn pair_solutions(
    k_minus: &ActionKernel,
    k_plus: &ActionKernel,
    seed: &GridFunction,
    tol: f64,
    seed_label: impl Into<String>,
) -> Result<PairedSolutions> {
    if k_minus.direction() != Direction::Negative || k_plus.direction() != Direction::Positive {
        return Err(Error::InvalidInput(
            "pairing needs a negative and a positive kernel".into(),
        ));
    }
    if k_minus.grid() != k_plus.grid() {
        return Err(Error::InvalidInput("kernel grids differ".into()));
    }
    let cfg = SolveConfig::with_tol(tol);
    let u_minus = solve_weak_kam(k_minus, seed, &cfg)?;
    let u_plus = solve_weak_kam(k_plus, seed, &cfg)?;
    let seed_violation = check_subsolution(seed, k_minus, u_minus.alpha);

    let re = solve_weak_kam(k_minus, &u_plus.compensated(), &cfg)?;
    let consistency_gap = re.compensated().sup_diff(&u_minus.compensated());
    let consistent =
        consistency_gap <= 2.0 * tol && u_minus.converged && u_plus.converged && re.converged;

    Ok(PairedSolutions {
        u_minus,
        u_plus,
        seed_label: seed_label.into(),
        seed_violation,
        consistency_gap,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::kernel::build_kernel;
    use crate::registry;
    use crate::transform::legendre;

    fn pendulum_kernel(n: usize, tau: f64, dir: Direction) -> ActionKernel {
        let h = registry::builtin("pendulum(1)").unwrap();
        let t = legendre(&h, &TorusGrid::line(n).unwrap(), 257, 257).unwrap();
        build_kernel(&t, tau, dir).unwrap()
    }

    #[test]
    fn karp_two_node_frozen_example() {
        // Cycle means: self-loops 1 and 3, two-cycle (2+0)/2 = 1 -> mu = 1.
        let grid = TorusGrid::line(2).unwrap();
        let k = ActionKernel::from_dense(
            grid,
            1.0,
            Direction::Negative,
            &[1.0, 2.0, 0.0, 3.0],
            "frozen",
        )
        .unwrap();
        assert_eq!(critical_value_karp(&k).unwrap(), -1.0);
    }

    #[test]
    fn karp_identity_kernel_gives_zero() {
        let grid = TorusGrid::line(6).unwrap();
        let k = ActionKernel::identity(grid, 1.0, Direction::Negative);
        assert_eq!(critical_value_karp(&k).unwrap(), 0.0);
    }

    #[test]
    fn karp_matches_cycle_enumeration_on_random_small_kernels() {
        // Independent oracle: enumerate all simple cycles of a 3-node dense
        // kernel (3 loops, 3 two-cycles, 2 three-cycles).
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let grid = TorusGrid::line(3).unwrap();
        for _ in 0..50 {
            let c: Vec<f64> = (0..9).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let k = ActionKernel::from_dense(grid.clone(), 1.0, Direction::Negative, &c, "rnd")
                .unwrap();
            let mut mu = f64::INFINITY;
            for i in 0..3 {
                mu = mu.min(c[i * 3 + i]);
            }
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        mu = mu.min((c[i * 3 + j] + c[j * 3 + i]) / 2.0);
                    }
                }
            }
            for (i, j, l) in [(0, 1, 2), (0, 2, 1)] {
                mu = mu.min((c[i * 3 + j] + c[j * 3 + l] + c[l * 3 + i]) / 3.0);
            }
            let alpha = critical_value_karp(&k).unwrap();
            assert!(
                (alpha + mu).abs() < 1e-12,
                "karp {alpha} vs oracle {}",
                -mu
            );
        }
    }

    #[test]
    fn karp_refuses_large_grids() {
        let grid = TorusGrid::line(8192).unwrap();
        let k = ActionKernel::identity(grid, 1.0, Direction::Negative);
        assert!(matches!(
            critical_value_karp(&k),
            Err(Error::GridTooLargeForOracle { .. })
        ));
    }

    #[test]
    fn momentum_only_constant_seed_is_fixed() {
        let h = registry::builtin("quadratic").unwrap();
        let grid = TorusGrid::line(32).unwrap();
        let t = legendre(&h, &grid, 129, 129).unwrap();
        let k = build_kernel(&t, 0.05, Direction::Negative).unwrap();
        let seed = GridFunction::constant(grid, 2.5);
        let r = solve_weak_kam(&k, &seed, &SolveConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.alpha, 0.0);
        assert!(r.u.values().iter().all(|&v| v == 0.0));
        assert!(r.iterations <= 11, "constant is fixed from the first step");
        // Compensated limit recovers the seed constant.
        assert_eq!(r.offset, 2.5);
    }

    #[test]
    fn pendulum_alpha_matches_karp_and_analytic_value() {
        let k = pendulum_kernel(64, 0.05, Direction::Negative);
        let karp = critical_value_karp(&k).unwrap();
        let seed = GridFunction::constant(k.grid().clone(), 0.0);
        let power = solve_weak_kam(&k, &seed, &SolveConfig::with_tol(1e-12)).unwrap();
        assert!(power.converged);
        assert!(
            (power.alpha - karp).abs() <= 1e-8,
            "power {} vs karp {karp}",
            power.alpha
        );
        // alpha[0] = max V = 1 for the mechanical pendulum.
        assert!((karp - 1.0).abs() <= 0.05);
        assert!(power.residual <= 1e-9);
    }

    #[test]
    fn pendulum_solution_is_the_mane_potential_from_the_peak() {
        let n = 256;
        let k = pendulum_kernel(n, 0.025, Direction::Negative);
        let seed = GridFunction::constant(k.grid().clone(), 0.0);
        let r = solve_weak_kam(&k, &seed, &SolveConfig::default()).unwrap();
        assert!(r.converged);
        // Numeric quadrature oracle for int_0^x sqrt(2(1 - cos 2 pi s)) ds.
        let mane = |x: f64| {
            let steps = 4000;
            let f = |s: f64| (2.0 * (1.0 - (std::f64::consts::TAU * s).cos())).sqrt();
            let h = x / steps as f64;
            let mut acc = 0.0;
            for i in 0..steps {
                let a = i as f64 * h;
                acc += h / 6.0 * (f(a) + 4.0 * f(a + h / 2.0) + f(a + h));
            }
            acc
        };
        // Minimum at the potential peak x = 0, maximum at the far side.
        let vals = r.u.values();
        let argmin = (0..n).min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap()).unwrap();
        let argmax = (0..n).max_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap()).unwrap();
        assert_eq!(argmin, 0);
        assert!((argmax as i64 - (n / 2) as i64).abs() <= 2, "argmax {argmax}");
        let gap = vals[n / 2] - vals[0];
        let oracle = mane(0.5);
        assert!(
            (gap - oracle).abs() < 0.02,
            "value gap {gap} vs quadrature {oracle}"
        );
        // Full profile: u(x) - u(0) tracks the two-sided Mane potential.
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let x = i as f64 / n as f64;
            let expect = mane(x).min(mane(1.0 - x));
            worst = worst.max((vals[i] - expect).abs());
        }
        assert!(worst < 0.03, "profile sup-error {worst}");
    }

    #[test]
    fn defect_oscillation_is_non_increasing() {
        let k = pendulum_kernel(64, 0.05, Direction::Negative);
        let seed = GridFunction::sample(k.grid().clone(), |x| (13.0 * x[0]).sin()).unwrap();
        let r = solve_weak_kam(&k, &seed, &SolveConfig::default()).unwrap();
        for w in r.defect_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "defect grew: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn constant_is_exact_subsolution_at_max_v_and_solution_at_own_alpha() {
        let k = pendulum_kernel(64, 0.05, Direction::Negative);
        let grid = k.grid().clone();
        let u0 = GridFunction::constant(grid.clone(), 0.3);
        assert_eq!(check_subsolution(&u0, &k, 1.0), 0.0);
        let r = solve_weak_kam(&k, &u0, &SolveConfig::default()).unwrap();
        assert!(check_subsolution(&r.u, &k, r.alpha) <= 2e-9);
        // A steep sawtooth is not a critical subsolution.
        let saw = GridFunction::sample(grid, |x| {
            let d = (x[0] - 0.5).abs();
            3.0 * d.min(1.0 - d)
        })
        .unwrap();
        assert!(check_subsolution(&saw, &k, 1.0) > 0.01);
    }

    #[test]
    fn subsolution_set_is_stable_under_commuting_semigroup() {
        // Momentum-only pair: kernel commutation residual is exactly zero, so
        // applying T_H preserves G-subsolutions exactly.
        let grid = TorusGrid::line(32).unwrap();
        let hg = registry::builtin("quadratic").unwrap();
        let hh = registry::builtin("quartic-p").unwrap();
        let kg = build_kernel(&legendre(&hg, &grid, 129, 129).unwrap(), 0.05, Direction::Negative)
            .unwrap();
        let kh = build_kernel(&legendre(&hh, &grid, 129, 129).unwrap(), 0.05, Direction::Negative)
            .unwrap();
        let u = GridFunction::sample(grid, |x| 0.2 * (std::f64::consts::TAU * x[0]).sin()).unwrap();
        let alpha = 0.5; // generous level: u is a subsolution for it
        let v0 = check_subsolution(&u, &kg, alpha);
        let v1 = check_subsolution(&kh.minplus_apply(&u), &kg, alpha);
        assert!(v1 <= v0 + 1e-12, "violation grew: {v0} -> {v1}");

        // With a nonzero kernel residual r the violation grows by at most r.
        let grid = TorusGrid::line(64).unwrap();
        let g2 = crate::registry::builtin("pendulum(1)").unwrap();
        let h2 = crate::registry::builtin("composed(pendulum(1), affine:2,1)").unwrap();
        let kg2 = build_kernel(&legendre(&g2, &grid, 257, 257).unwrap(), 0.05, Direction::Negative)
            .unwrap();
        let kh2 = build_kernel(&legendre(&h2, &grid, 257, 257).unwrap(), 0.05, Direction::Negative)
            .unwrap();
        let r = crate::kernel::commutation_residual(&kg2, &kh2).unwrap();
        let seed = GridFunction::constant(grid, 0.0);
        let u2 = solve_weak_kam(&kg2, &seed, &SolveConfig::default()).unwrap();
        let w0 = check_subsolution(&u2.u, &kg2, u2.alpha);
        let w1 = check_subsolution(&kh2.minplus_apply(&u2.u), &kg2, u2.alpha);
        assert!(w1 <= w0 + r + 1e-12, "grew beyond slack: {w0} + {r} -> {w1}");
    }

    #[test]
    fn pendulum_pairing_and_idempotence() {
        let n = 128;
        let tau = 0.05;
        let km = pendulum_kernel(n, tau, Direction::Negative);
        let kp = pendulum_kernel(n, tau, Direction::Positive);
        let seed = GridFunction::constant(km.grid().clone(), 0.0);
        let tol = 1e-9;
        let pair = pair_solutions(&km, &kp, &seed, tol, "const0").unwrap();
        assert!(pair.consistent, "gap {}", pair.consistency_gap);
        assert!(pair.seed_violation <= 1e-12);
        // u^- >= u^+ pointwise up to 2 tol on the compensated pair.
        let um = pair.u_minus.compensated();
        let up = pair.u_plus.compensated();
        for (a, b) in um.values().iter().zip(up.values()) {
            assert!(a - b >= -2.0 * tol);
        }
        // Coincidence localizes at the potential peak.
        let gap = pair.coincidence_gap();
        let argmin = (0..n)
            .min_by(|&a, &b| gap.values()[a].partial_cmp(&gap.values()[b]).unwrap())
            .unwrap();
        assert!(argmin == 0 || argmin == n - 1 || argmin == 1, "argmin {argmin}");
        // Re-pairing from u_minus reproduces the pair within 2 tol.
        let re = pair_solutions(&km, &kp, &um, tol, "re").unwrap();
        assert!(re.u_minus.compensated().sup_diff(&um) <= 2.0 * tol);
        assert!(
            re.u_plus
                .compensated()
                .sup_diff(&pair.u_plus.compensated())
                <= 2.0 * tol
        );
    }

    #[test]
    fn momentum_only_pairing_is_trivial() {
        let grid = TorusGrid::line(32).unwrap();
        let h = registry::builtin("quadratic").unwrap();
        let t = legendre(&h, &grid, 129, 129).unwrap();
        let km = build_kernel(&t, 0.05, Direction::Negative).unwrap();
        let kp = build_kernel(&t, 0.05, Direction::Positive).unwrap();
        let seed = GridFunction::constant(grid, 0.0);
        let pair = pair_solutions(&km, &kp, &seed, 1e-10, "zero").unwrap();
        assert!(pair.consistent);
        assert_eq!(pair.u_minus.alpha, 0.0);
        assert_eq!(pair.u_plus.alpha, 0.0);
        assert!(pair.coincidence_gap().max_value() <= 1e-12);
    }
}
