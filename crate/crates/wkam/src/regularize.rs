//! Alternating forward/backward Lax-Oleinik smoothing of subsolutions
//! (discrete Lasry-Lions), with discrete smoothness diagnostics.
//!
//! A round at scale eps = m tau applies m backward steps then m forward steps.
//! Constant compensation shifts cancel between the two halves, so no alpha
//! bookkeeping is needed inside a round; the subsolution property itself is
//! checked, not assumed, because the discrete forward/backward operators only
//! commute up to kernel residuals.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::kernel::{ActionKernel, Direction};
use crate::weakkam::check_subsolution;

/// Per-round smoothing times, in units of the base step tau. Non-increasing
/// and positive; resolved to whole step counts (at least one) at use.
#[derive(Clone, Debug)]
pub struct RegularizationSchedule {
    pub epsilons: Vec<f64>,
}

impl RegularizationSchedule {
    pub fn new(epsilons: Vec<f64>) -> Result<Self> {
        if epsilons.is_empty() {
            return Err(Error::InvalidInput("empty schedule".into()));
        }
        if epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidInput("schedule entries must be positive".into()));
        }
        if epsilons.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput("schedule must be non-increasing".into()));
        }
        Ok(RegularizationSchedule { epsilons })
    }

    /// Default geometric schedule eps_k = eps1 / 2^(k-1).
    pub fn geometric(rounds: usize, eps1: f64) -> Result<Self> {
        Self::new((0..rounds).map(|k| eps1 / (1u64 << k) as f64).collect())
    }

    pub fn rounds(&self) -> usize {
        self.epsilons.len()
    }

    /// Whole-step counts per round.
    pub fn step_counts(&self) -> Vec<usize> {
        self.epsilons
            .iter()
            .map(|e| (e.round() as usize).max(1))
            .collect()
    }

    /// Smallest resolved smoothing time, in tau units.
    pub fn last_eps_steps(&self) -> usize {
        *self.step_counts().last().expect("non-empty")
    }
}

/// Run the schedule: u <- (T+)^m (T-)^m u per round. The seed must be an
/// (alpha, .)-subsolution of the negative kernel within 10x tolerance.
pub fn lasry_lions(
    u0: &GridFunction,
    k_minus: &ActionKernel,
    k_plus: &ActionKernel,
    schedule: &RegularizationSchedule,
    alpha: f64,
    tol: f64,
) -> Result<GridFunction> {
    if k_minus.direction() != Direction::Negative || k_plus.direction() != Direction::Positive {
        return Err(Error::InvalidInput(
            "regularization needs a negative and a positive kernel".into(),
        ));
    }
    if k_minus.grid() != k_plus.grid() || u0.grid() != k_minus.grid() {
        return Err(Error::InvalidInput("grid mismatch".into()));
    }
    let violation = check_subsolution(u0, k_minus, alpha);
    if violation > 10.0 * tol {
        return Err(Error::SeedNotSubsolution { violation, tol });
    }
    let mut u = u0.clone();
    for m in schedule.step_counts() {
        for _ in 0..m {
            u = k_minus.apply_semigroup(&u);
        }
        for _ in 0..m {
            u = k_plus.apply_semigroup(&u);
        }
    }
    Ok(u)
}

/// Discrete smoothness diagnostics: `lip` is the largest first difference
/// over spacing; `semi_cc` / `semi_cv` are the largest positive / negative
/// centered second differences over spacing^2 (axis-aligned), reported as
/// magnitudes. A convex kink shows up in `semi_cc`, a concave one in
/// `semi_cv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothnessProfile {
    pub lip: f64,
    pub semi_cc: f64,
    pub semi_cv: f64,
}

pub fn smoothness_profile(u: &GridFunction) -> SmoothnessProfile {
    let grid = u.grid();
    let vals = u.values();
    let mut lip: f64 = 0.0;
    let mut second_max: f64 = 0.0;
    let mut second_min: f64 = 0.0;
    let dim = grid.dim();
    for node in 0..grid.node_count() {
        let m = grid.multi_of(node);
        for a in 0..dim {
            let dx = grid.spacing(a);
            let mut fwd = m.clone();
            fwd[a] += 1;
            let mut bwd = m.clone();
            bwd[a] -= 1;
            let up = vals[grid.index_of(&fwd)];
            let dn = vals[grid.index_of(&bwd)];
            let here = vals[node];
            lip = lip.max((up - here).abs() / dx);
            let dd = (up - 2.0 * here + dn) / (dx * dx);
            second_max = second_max.max(dd);
            second_min = second_min.min(dd);
        }
    }
    SmoothnessProfile {
        lip,
        semi_cc: second_max,
        semi_cv: -second_min,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::kernel::build_kernel;
    use crate::registry;
    use crate::transform::legendre;

    fn kernels(spec: &str, n: usize, tau: f64) -> (ActionKernel, ActionKernel) {
        let h = registry::builtin(spec).unwrap();
        let t = legendre(&h, &TorusGrid::line(n).unwrap(), 257, 257).unwrap();
        (
            build_kernel(&t, tau, Direction::Negative).unwrap(),
            build_kernel(&t, tau, Direction::Positive).unwrap(),
        )
    }

    #[test]
    fn schedule_validation_and_defaults() {
        let s = RegularizationSchedule::geometric(6, 10.0).unwrap();
        assert_eq!(s.rounds(), 6);
        assert_eq!(s.step_counts(), vec![10, 5, 3, 1, 1, 1]);
        assert!(RegularizationSchedule::new(vec![1.0, 2.0]).is_err());
        assert!(RegularizationSchedule::new(vec![-1.0]).is_err());
    }

    #[test]
    fn profile_of_constant_and_tent() {
        let grid = TorusGrid::line(64).unwrap();
        let c = GridFunction::constant(grid.clone(), 3.0);
        assert_eq!(smoothness_profile(&c), SmoothnessProfile { lip: 0.0, semi_cc: 0.0, semi_cv: 0.0 });
        // Tent dist_T(x, 0): convex kink at 0, concave kink at 1/2.
        let tent = GridFunction::sample(grid, |x| {
            let d = x[0].abs();
            d.min(1.0 - d)
        })
        .unwrap();
        let p = smoothness_profile(&tent);
        assert!((p.lip - 1.0).abs() < 1e-12);
        assert!((p.semi_cc - 2.0 * 64.0).abs() < 1e-6, "convex kink {}", p.semi_cc);
        assert!((p.semi_cv - 2.0 * 64.0).abs() < 1e-6, "concave kink {}", p.semi_cv);
    }

    #[test]
    fn constants_stay_constant_for_momentum_only_models() {
        let (km, kp) = kernels("quadratic", 32, 0.05);
        let grid = km.grid().clone();
        let u0 = GridFunction::constant(grid, 1.5);
        let s = RegularizationSchedule::geometric(3, 4.0).unwrap();
        let out = lasry_lions(&u0, &km, &kp, &s, 0.0, 1e-9).unwrap();
        let anchored = out.anchored(0);
        assert!(anchored.osc() <= 1e-12, "osc {}", anchored.osc());
    }

    #[test]
    fn constants_approximately_fixed_for_pendulum() {
        let (km, kp) = kernels("pendulum(1)", 128, 0.05);
        let grid = km.grid().clone();
        let u0 = GridFunction::constant(grid, 0.0);
        let s = RegularizationSchedule::new(vec![2.0]).unwrap();
        let out = lasry_lions(&u0, &km, &kp, &s, 1.0, 1e-9).unwrap();
        // One forward/backward round dents a constant only by grid slack.
        assert!(out.osc() <= 5e-3, "osc {}", out.osc());
    }

    #[test]
    fn single_round_caps_the_concave_kink() {
        // u = dist_T(., 0) with H = p^2/2 at alpha = 1/2 (slope-1 subsolution):
        // the round restores u away from the max and replaces the concave kink
        // at x = 1/2 by a parabolic cap of curvature ~ 1/eps.
        let n = 256;
        let tau = 0.05;
        let (km, kp) = kernels("quadratic", n, tau);
        let grid = km.grid().clone();
        let tent = GridFunction::sample(grid, |x| {
            let d = x[0].abs();
            d.min(1.0 - d)
        })
        .unwrap();
        let m = 4usize;
        let eps = m as f64 * tau;
        let s = RegularizationSchedule::new(vec![m as f64]).unwrap();
        let out = lasry_lions(&tent, &km, &kp, &s, 0.5, 1e-6).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let x = i as f64 / n as f64;
            let d = (x).min(1.0 - x);
            let s_kink = 0.5 - d; // distance to the concave kink at 1/2
            let expect = if s_kink >= eps {
                d
            } else {
                // The cap sits eps/2 below the seed's maximum.
                0.5 - eps / 2.0 - s_kink * s_kink / (2.0 * eps)
            };
            worst = worst.max((out.values()[i] - expect).abs());
        }
        assert!(worst <= 3.0 / n as f64, "closed-form sup error {worst}");
        let before = smoothness_profile(&tent);
        let after = smoothness_profile(&out);
        // Concave curvature at the cap scale drops from O(n) to ~ 1/eps. The
        // grid-scale profile keeps a 1/tau hop-quantization floor, so the cap
        // is measured with a stencil of width ~ eps/4.
        assert!(before.semi_cv >= 2.0 * (n as f64) - 1e-6);
        let stride = ((eps / 4.0) * n as f64).round() as usize;
        let coarse = curvature_at_stride(&out, stride);
        assert!(
            coarse.1 <= 1.2 / eps,
            "coarse concave curvature {} vs 1/eps = {}",
            coarse.1,
            1.0 / eps
        );
        // The convex kink of the seed is restored, not smoothed: an equal-time
        // round is only a one-sided regularization.
        assert!(after.semi_cc >= 0.5 * before.semi_cc);
    }

    /// Test-only curvature at stencil width `stride` nodes: (max positive,
    /// max negative magnitude) of u[i+s] - 2u[i] + u[i-s] over (s dx)^2.
    fn curvature_at_stride(u: &GridFunction, stride: usize) -> (f64, f64) {
        let n = u.len();
        let dx = u.grid().spacing(0) * stride as f64;
        let mut hi: f64 = 0.0;
        let mut lo: f64 = 0.0;
        for i in 0..n {
            let up = u.values()[(i + stride) % n];
            let dn = u.values()[(i + n - stride % n) % n];
            let dd = (up - 2.0 * u.values()[i] + dn) / (dx * dx);
            hi = hi.max(dd);
            lo = lo.min(dd);
        }
        (hi, -lo)
    }

    #[test]
    fn rounds_are_non_expansive() {
        // The round map itself (no subsolution gate) contracts sup distances.
        let (km, kp) = kernels("pendulum(1)", 64, 0.05);
        let grid = km.grid().clone();
        let round = |u: &GridFunction| {
            let mut v = u.clone();
            for _ in 0..3 {
                v = km.apply_semigroup(&v);
            }
            for _ in 0..3 {
                v = kp.apply_semigroup(&v);
            }
            v
        };
        let u = GridFunction::sample(grid.clone(), |x| 0.7 * (std::f64::consts::TAU * x[0]).sin())
            .unwrap();
        let w = GridFunction::sample(grid, |x| 0.4 * (2.0 * std::f64::consts::TAU * x[0]).cos())
            .unwrap();
        assert!(round(&u).sup_diff(&round(&w)) <= u.sup_diff(&w) + 1e-12);
    }

    #[test]
    fn refuses_non_subsolution_seeds() {
        let (km, kp) = kernels("pendulum(1)", 64, 0.05);
        let grid = km.grid().clone();
        let steep = GridFunction::sample(grid, |x| {
            let d = (x[0] - 0.5).abs();
            4.0 * d.min(1.0 - d)
        })
        .unwrap();
        let s = RegularizationSchedule::geometric(2, 2.0).unwrap();
        let err = lasry_lions(&steep, &km, &kp, &s, 1.0, 1e-9);
        assert!(matches!(err, Err(Error::SeedNotSubsolution { .. })));
    }

    #[test]
    fn violation_growth_is_bounded_along_rounds() {
        let (km, kp) = kernels("pendulum(1)", 128, 0.05);
        let grid = km.grid().clone();
        let u0 = GridFunction::constant(grid, 0.0);
        let mut u = u0.clone();
        let mut prev = check_subsolution(&u, &km, 1.0);
        assert_eq!(prev, 0.0);
        for m in RegularizationSchedule::geometric(5, 8.0).unwrap().step_counts() {
            for _ in 0..m {
                u = km.apply_semigroup(&u);
            }
            for _ in 0..m {
                u = kp.apply_semigroup(&u);
            }
            let v = check_subsolution(&u, &km, 1.0);
            assert!(v <= prev + 2e-3, "round grew violation {prev} -> {v}");
            prev = v;
        }
    }

    #[test]
    fn curvature_bound_scales_with_last_eps() {
        let n = 256;
        let tau = 0.05;
        let (km, kp) = kernels("quadratic", n, tau);
        let grid = km.grid().clone();
        let tent = GridFunction::sample(grid, |x| {
            let d = x[0].abs();
            d.min(1.0 - d)
        })
        .unwrap();
        let mut caps = Vec::new();
        for m in [8.0, 4.0, 2.0] {
            let s = RegularizationSchedule::new(vec![m]).unwrap();
            let out = lasry_lions(&tent, &km, &kp, &s, 0.5, 1e-6).unwrap();
            let eps = m * tau;
            let stride = ((eps / 4.0) * n as f64).round() as usize;
            caps.push(curvature_at_stride(&out, stride).1);
        }
        // Smaller last eps allows proportionally larger concave curvature.
        assert!(caps[0] < caps[1] && caps[1] < caps[2], "caps {caps:?}");
    }
}
