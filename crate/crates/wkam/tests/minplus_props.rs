//! Property tests for the algebraic invariants: torus geometry, table
//! reversal, and the min-plus operator laws on dyadic data (where float sums
//! are exact and the "exact" clauses are bitwise).

use proptest::prelude::*;

use wkam::grid::{GridFunction, TorusGrid};
use wkam::kernel::{signed_mod, ActionKernel, Direction};
use wkam::model::{poisson_bracket, BRACKET_FD_STEP};
use wkam::registry;
use wkam::transform::LagrangianTable;

fn dyadic() -> impl Strategy<Value = f64> {
    (-4096i64..=4096).prop_map(|k| k as f64 / 1024.0)
}

fn dyadic_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(dyadic(), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn minimal_displacement_is_minimal_representative(n in 2usize..200, a in 0i64..200, b in 0i64..200) {
        let d = signed_mod(b - a, n as i64);
        // Same residue class, and minimal in (-n/2, n/2].
        prop_assert_eq!((d - (b - a)).rem_euclid(n as i64), 0);
        prop_assert!(2 * d > -(n as i64) && 2 * d <= n as i64);
    }

    #[test]
    fn reversal_is_an_involution(n in 2usize..8, n_v in 2usize..12, seed in any::<u64>()) {
        let n_v = 2 * n_v + 1;
        let grid = TorusGrid::line(n).unwrap();
        let count = n * n_v;
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 20) as i64 % 2048) as f64 / 256.0
        };
        let values: Vec<f64> = (0..count).map(|_| next()).collect();
        let argmax = vec![0.0; count];
        let t = LagrangianTable::from_parts(grid, 1.0, n_v, values, argmax, 1.0, 17, "prop").unwrap();
        let rr = t.reversed().reversed();
        prop_assert_eq!(rr.values(), t.values());
    }

    #[test]
    fn minplus_apply_is_monotone_and_nonexpansive(
        n in 2usize..8,
        seed_costs in dyadic_vec(64),
        seed_u in dyadic_vec(8),
        seed_w in dyadic_vec(8),
        bump in 0i64..512,
    ) {
        let grid = TorusGrid::line(n).unwrap();
        let costs: Vec<f64> = seed_costs[..n * n].to_vec();
        let k = ActionKernel::from_dense(grid.clone(), 1.0, Direction::Negative, &costs, "prop").unwrap();
        let u = GridFunction::new(grid.clone(), seed_u[..n].to_vec()).unwrap();
        let w = GridFunction::new(grid, seed_w[..n].to_vec()).unwrap();
        // Monotonicity against a raised copy of u.
        let mut upper = u.clone();
        for v in upper.values_mut() {
            *v += bump as f64 / 1024.0;
        }
        let tu = k.minplus_apply(&u);
        let t_upper = k.minplus_apply(&upper);
        for i in 0..n {
            prop_assert!(tu.values()[i] <= t_upper.values()[i]);
        }
        // Non-expansiveness in sup norm (exact on dyadics).
        let tw = k.minplus_apply(&w);
        prop_assert!(tu.sup_diff(&tw) <= u.sup_diff(&w));
    }

    #[test]
    fn product_is_associative_and_compatible_with_apply(
        n in 2usize..6,
        ca in dyadic_vec(36),
        cb in dyadic_vec(36),
        cc in dyadic_vec(36),
        cu in dyadic_vec(6),
    ) {
        let grid = TorusGrid::line(n).unwrap();
        let mk = |c: &[f64], l: &str| {
            ActionKernel::from_dense(grid.clone(), 1.0, Direction::Negative, &c[..n * n], l).unwrap()
        };
        let a = mk(&ca, "a");
        let b = mk(&cb, "b");
        let c = mk(&cc, "c");
        let left = a.minplus_product(&b).unwrap().minplus_product(&c).unwrap();
        let right = a.minplus_product(&b.minplus_product(&c).unwrap()).unwrap();
        prop_assert_eq!(left.costs(), right.costs());
        let u = GridFunction::new(grid, cu[..n].to_vec()).unwrap();
        let via = a.minplus_product(&b).unwrap().minplus_apply(&u);
        let seq = b.minplus_apply(&a.minplus_apply(&u));
        prop_assert_eq!(via.values(), seq.values());
    }

    #[test]
    fn poisson_bracket_is_antisymmetric(x in 0.0f64..1.0, p in -2.0f64..2.0) {
        let g = registry::builtin("pendulum(1)").unwrap();
        let h = registry::builtin("pendulum(1,2)").unwrap();
        let gh = poisson_bracket(&g, &h, &[x], &[p], BRACKET_FD_STEP);
        let hg = poisson_bracket(&h, &g, &[x], &[p], BRACKET_FD_STEP);
        prop_assert!((gh + hg).abs() <= 1e-10, "defect {}", (gh + hg).abs());
    }
}
