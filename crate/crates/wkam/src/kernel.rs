//! One-step action kernels and min-plus (tropical) linear algebra.
//!
//! The kernel stores the discrete action c(x,y) ~ A^tau(x,y) for y within a
//! velocity-limited band of x, using the midpoint rule
//!
//!   c(x,y) = tau * L(m(x,y), disp(x,y)/tau),
//!
//! with the midpoint value taken as the mean of the two endpoint table rows
//! (linear interpolation in x, multilinear in v). Out-of-band entries are
//! +infinity. The backward Lax-Oleinik operator is the min-plus product
//! (Tu)(y) = min_x u(x) + c(x,y); the forward operator is realized through the
//! velocity-reversed table as T+ u = -T^(rev)(-u).
//!
//! The discrete semigroup is the sequence of min-plus powers of the one-step
//! kernel, so the semigroup property holds exactly at the discrete level;
//! accuracy in tau is a modeling error, not an algebra error.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusGrid, MAX_DIM};
use crate::transform::LagrangianTable;

/// Largest node count for which dense fallback matrices are allocated.
pub const DENSE_NODE_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Drives T^{-t} (backward / inf-convolution).
    Negative,
    /// Drives T^{+t} (forward), built on the velocity-reversed Lagrangian.
    Positive,
}

/// Per-axis inclusive offset ranges, in node units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OffsetBox {
    dim: usize,
    lo: [i64; MAX_DIM],
    hi: [i64; MAX_DIM],
}

impl OffsetBox {
    fn banded(radii: &[i64]) -> Self {
        let dim = radii.len();
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for a in 0..dim {
            lo[a] = -radii[a];
            hi[a] = radii[a];
        }
        OffsetBox { dim, lo, hi }
    }

    /// All residues mod n per axis, as signed representatives in (-n/2, n/2].
    fn dense(dims: &[usize]) -> Self {
        let dim = dims.len();
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for a in 0..dim {
            let n = dims[a] as i64;
            lo[a] = -((n - 1) / 2);
            hi[a] = lo[a] + n - 1;
        }
        OffsetBox { dim, lo, hi }
    }

    fn axis_len(&self, a: usize) -> usize {
        (self.hi[a] - self.lo[a] + 1) as usize
    }

    fn total(&self) -> usize {
        (0..self.dim).map(|a| self.axis_len(a)).product()
    }

    fn is_dense(&self, dims: &[usize]) -> bool {
        (0..self.dim).all(|a| self.axis_len(a) == dims[a])
    }

    /// Flat index of a signed offset, if inside the box.
    #[inline]
    fn flat_of(&self, off: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for a in 0..self.dim {
            if off[a] < self.lo[a] || off[a] > self.hi[a] {
                return None;
            }
            idx = idx * self.axis_len(a) + (off[a] - self.lo[a]) as usize;
        }
        Some(idx)
    }

    /// Signed offset of a flat index.
    #[inline]
    fn offset_of(&self, mut flat: usize) -> [i64; MAX_DIM] {
        let mut out = [0i64; MAX_DIM];
        for a in (0..self.dim).rev() {
            let len = self.axis_len(a);
            out[a] = self.lo[a] + (flat % len) as i64;
            flat /= len;
        }
        out
    }
}

/// Signed representative of d mod n in (-n/2, n/2].
#[inline]
pub fn signed_mod(d: i64, n: i64) -> i64 {
    let mut r = d.rem_euclid(n);
    if 2 * r > n {
        r -= n;
    }
    r
}

#[derive(Clone, Debug)]
pub struct ActionKernel {
    grid: TorusGrid,
    /// Total time span. For one-step kernels this is the step; products record
    /// the sum of their factors' spans (and keep the parts for bookkeeping).
    tau: f64,
    tau_parts: Vec<f64>,
    direction: Direction,
    offsets: OffsetBox,
    /// Costs, layout [node][offset-flat].
    costs: Vec<f64>,
    label: String,
    warnings: Vec<String>,
}

impl ActionKernel {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tau_parts(&self) -> &[f64] {
        &self.tau_parts
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_dense(&self) -> bool {
        self.offsets.is_dense(self.grid.dims())
    }

    /// Band radius per axis (max |offset|).
    pub fn band(&self) -> Vec<i64> {
        (0..self.grid.dim())
            .map(|a| self.offsets.hi[a].max(-self.offsets.lo[a]))
            .collect()
    }

    pub fn offset_count(&self) -> usize {
        self.offsets.total()
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Cost c(from, to); +infinity out of band.
    pub fn cost(&self, from: usize, to: usize) -> f64 {
        let mf = self.grid.multi_of(from);
        let mt = self.grid.multi_of(to);
        let mut off = [0i64; MAX_DIM];
        for a in 0..self.grid.dim() {
            off[a] = TorusGrid::signed_node_disp(self.grid.dims()[a], mf[a], mt[a]);
        }
        match self.offsets.flat_of(&off[..self.grid.dim()]) {
            Some(f) => self.costs[from * self.offsets.total() + f],
            None => f64::INFINITY,
        }
    }

    /// Assemble a kernel from an explicit dense cost matrix (row = from node).
    pub fn from_dense(
        grid: TorusGrid,
        tau: f64,
        direction: Direction,
        matrix: &[f64],
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = grid.node_count();
        if matrix.len() != n * n {
            return Err(Error::InvalidInput("dense matrix size mismatch".into()));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidInput("tau must be positive".into()));
        }
        let offsets = OffsetBox::dense(grid.dims());
        let total = offsets.total();
        debug_assert_eq!(total, n);
        let mut costs = vec![f64::INFINITY; n * total];
        let dim = grid.dim();
        for from in 0..n {
            let mf = grid.multi_of(from);
            for to in 0..n {
                let mt = grid.multi_of(to);
                let mut off = [0i64; MAX_DIM];
                for a in 0..dim {
                    off[a] = TorusGrid::signed_node_disp(grid.dims()[a], mf[a], mt[a]);
                }
                let f = offsets.flat_of(&off[..dim]).expect("dense box covers all residues");
                costs[from * total + f] = matrix[from * n + to];
            }
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("dense kernel costs must be finite".into()));
        }
        Ok(ActionKernel {
            grid,
            tau,
            tau_parts: vec![tau],
            direction,
            offsets,
            costs,
            label: label.into(),
            warnings: vec![],
        })
    }

    /// Reassemble a banded one-step kernel from stored parts (cache loads).
    pub(crate) fn from_cache_parts(
        grid: TorusGrid,
        tau: f64,
        direction: Direction,
        radii: &[i64],
        costs: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if radii.len() != grid.dim() || radii.iter().any(|r| *r < 0) {
            return Err(Error::Format("bad band radii".into()));
        }
        let offsets = OffsetBox::banded(radii);
        if costs.len() != grid.node_count() * offsets.total() {
            return Err(Error::Format("cost array size mismatch".into()));
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Format("non-finite cached cost".into()));
        }
        Ok(ActionKernel {
            grid,
            tau,
            tau_parts: vec![tau],
            direction,
            offsets,
            costs,
            label: label.into(),
            warnings: vec![],
        })
    }

    /// Kernel with c(x,x) = 0 and +infinity elsewhere (min-plus identity).
    pub fn identity(grid: TorusGrid, tau: f64, direction: Direction) -> Self {
        let dim = grid.dim();
        let offsets = OffsetBox::banded(&vec![0i64; dim]);
        let costs = vec![0.0; grid.node_count()];
        ActionKernel {
            grid,
            tau,
            tau_parts: vec![tau],
            direction,
            offsets,
            costs,
            label: "identity".into(),
            warnings: vec![],
        }
    }

    /// Backward min-plus product: out(y) = min_{x in band} u(x) + c(x,y).
    /// Each output entry is an independent min over a fixed set, so results
    /// are bitwise identical regardless of worker count.
    pub fn minplus_apply(&self, u: &GridFunction) -> GridFunction {
        assert_eq!(u.grid(), &self.grid, "function grid mismatch");
        let n = self.grid.node_count();
        let total = self.offsets.total();
        let dims = self.grid.dims();
        let dim = self.grid.dim();
        let uv = u.values();
        let out: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|y| {
                let my = self.grid.multi_of(y);
                let mut best = f64::INFINITY;
                for flat in 0..total {
                    let off = self.offsets.offset_of(flat);
                    // x = y - offset, wrapped.
                    let mut mx = [0i64; MAX_DIM];
                    for a in 0..dim {
                        mx[a] = (my[a] - off[a]).rem_euclid(dims[a] as i64);
                    }
                    let x = self.grid.index_of(&mx[..dim]);
                    let s = uv[x] + self.costs[x * total + flat];
                    if s < best {
                        best = s;
                    }
                }
                best
            })
            .collect();
        GridFunction::new(self.grid.clone(), out).expect("finite by construction")
    }

    /// One step of the Lax-Oleinik semigroup this kernel drives:
    /// negative kernels apply T^-; positive kernels apply T^+ = -T^rev(-u).
    pub fn apply_semigroup(&self, u: &GridFunction) -> GridFunction {
        match self.direction {
            Direction::Negative => self.minplus_apply(u),
            Direction::Positive => self.minplus_apply(&u.neg()).neg(),
        }
    }

    /// Min-plus kernel product c(x,z) = min_y c1(x,y) + c2(y,z). Bands add;
    /// the result densifies automatically once an axis band covers the torus.
    pub fn minplus_product(&self, other: &ActionKernel) -> Result<ActionKernel> {
        if self.grid != other.grid {
            return Err(Error::InvalidInput("kernel grids differ".into()));
        }
        let grid = &self.grid;
        let dim = grid.dim();
        let dims = grid.dims();
        let n = grid.node_count();

        let mut radii = vec![0i64; dim];
        let mut dense = false;
        for a in 0..dim {
            let lo = self.offsets.lo[a] + other.offsets.lo[a];
            let hi = self.offsets.hi[a] + other.offsets.hi[a];
            let span = (hi - lo + 1) as usize;
            if span >= dims[a] {
                dense = true;
            }
            radii[a] = hi.max(-lo);
        }
        let out_box = if dense {
            if n > DENSE_NODE_LIMIT {
                return Err(Error::BandOverflow);
            }
            OffsetBox::dense(dims)
        } else {
            let mut lo = [0i64; MAX_DIM];
            let mut hi = [0i64; MAX_DIM];
            for a in 0..dim {
                lo[a] = self.offsets.lo[a] + other.offsets.lo[a];
                hi[a] = self.offsets.hi[a] + other.offsets.hi[a];
            }
            OffsetBox { dim, lo, hi }
        };

        let out_total = out_box.total();
        let self_total = self.offsets.total();
        let other_total = other.offsets.total();
        let costs: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|x| {
                let mx = grid.multi_of(x);
                let mut row = vec![f64::INFINITY; out_total];
                for f1 in 0..self_total {
                    let o1 = self.offsets.offset_of(f1);
                    let c1 = self.costs[x * self_total + f1];
                    let mut my = [0i64; MAX_DIM];
                    for a in 0..dim {
                        my[a] = (mx[a] + o1[a]).rem_euclid(dims[a] as i64);
                    }
                    let y = grid.index_of(&my[..dim]);
                    for (fo, slot) in row.iter_mut().enumerate() {
                        let oo = out_box.offset_of(fo);
                        let mut o2 = [0i64; MAX_DIM];
                        for a in 0..dim {
                            o2[a] = signed_mod(oo[a] - o1[a], dims[a] as i64);
                        }
                        if let Some(f2) = other.offsets.flat_of(&o2[..dim]) {
                            let s = c1 + other.costs[y * other_total + f2];
                            if s < *slot {
                                *slot = s;
                            }
                        }
                    }
                }
                row.into_iter()
            })
            .collect();

        let mut tau_parts = self.tau_parts.clone();
        tau_parts.extend_from_slice(&other.tau_parts);
        Ok(ActionKernel {
            grid: grid.clone(),
            tau: self.tau + other.tau,
            tau_parts,
            direction: self.direction,
            offsets: out_box,
            costs,
            label: format!("{}*{}", self.label, other.label),
            warnings: vec![],
        })
    }

    /// k-fold min-plus product of the kernel with itself.
    pub fn minplus_power(&self, k: usize) -> Result<ActionKernel> {
        if k == 0 {
            return Err(Error::InvalidInput("power requires k >= 1".into()));
        }
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.minplus_product(self)?;
        }
        Ok(acc)
    }

    /// Dense copy (out-of-band entries materialized as +infinity-free rows via
    /// the identity on residues; existing entries preserved).
    pub fn densified(&self) -> Result<ActionKernel> {
        let n = self.grid.node_count();
        if n > DENSE_NODE_LIMIT {
            return Err(Error::GridTooLargeForOracle {
                nodes: n,
                max: DENSE_NODE_LIMIT,
            });
        }
        if self.is_dense() {
            return Ok(self.clone());
        }
        let out_box = OffsetBox::dense(self.grid.dims());
        let total = out_box.total();
        let self_total = self.offsets.total();
        let mut costs = vec![f64::INFINITY; n * total];
        for x in 0..n {
            for f in 0..self_total {
                let off = self.offsets.offset_of(f);
                let fo = out_box
                    .flat_of(&off[..self.grid.dim()])
                    .expect("band inside dense box");
                costs[x * total + fo] = self.costs[x * self_total + f];
            }
        }
        Ok(ActionKernel {
            grid: self.grid.clone(),
            tau: self.tau,
            tau_parts: self.tau_parts.clone(),
            direction: self.direction,
            offsets: out_box,
            costs,
            label: self.label.clone(),
            warnings: self.warnings.clone(),
        })
    }

    /// Edges leaving `from` as (to, cost) pairs, finite costs only.
    pub fn edges_from(&self, from: usize) -> Vec<(usize, f64)> {
        let total = self.offsets.total();
        let dim = self.grid.dim();
        let dims = self.grid.dims();
        let mf = self.grid.multi_of(from);
        let mut out = Vec::with_capacity(total);
        for f in 0..total {
            let off = self.offsets.offset_of(f);
            let mut mt = [0i64; MAX_DIM];
            for a in 0..dim {
                mt[a] = (mf[a] + off[a]).rem_euclid(dims[a] as i64);
            }
            let to = self.grid.index_of(&mt[..dim]);
            let c = self.costs[from * total + f];
            if c.is_finite() {
                out.push((to, c));
            }
        }
        out
    }

    /// Sup over entries of |self - other| (kernels must share grid and
    /// offset box).
    pub fn sup_entry_diff(&self, other: &ActionKernel) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        assert_eq!(self.offsets, other.offsets, "offset box mismatch");
        self.costs
            .iter()
            .zip(&other.costs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Build the one-step kernel from a Lagrangian table.
pub fn build_kernel(
    table: &LagrangianTable,
    tau: f64,
    direction: Direction,
) -> Result<ActionKernel> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput("tau must be positive".into()));
    }
    let grid = table.grid().clone();
    let dim = grid.dim();
    let mut warnings = Vec::new();
    // Band from the velocity window, capped so band*spacing < 1/2 keeps the
    // minimal displacement well defined on the torus.
    let mut radii = vec![0i64; dim];
    for a in 0..dim {
        let n = grid.dims()[a];
        let from_window = (table.v_max() * tau * n as f64).floor() as i64;
        let cap = ((n - 1) / 2) as i64;
        radii[a] = from_window.min(cap);
        if from_window > cap {
            warnings.push(format!(
                "axis {a}: velocity window needs band {from_window}, grid supports {cap}; band reduced"
            ));
        }
        if radii[a] == 0 {
            return Err(Error::TauTooSmallForGrid);
        }
    }

    let reversed_storage;
    let src: &LagrangianTable = match direction {
        Direction::Negative => table,
        Direction::Positive => {
            reversed_storage = table.reversed();
            &reversed_storage
        }
    };

    let offsets = OffsetBox::banded(&radii);
    let total = offsets.total();
    let n = grid.node_count();
    let dims = grid.dims();
    let costs: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|x| {
            let mx = grid.multi_of(x);
            let mut row = vec![0.0f64; total];
            for (f, slot) in row.iter_mut().enumerate() {
                let off = offsets.offset_of(f);
                let mut v = [0.0f64; MAX_DIM];
                let mut my = [0i64; MAX_DIM];
                for a in 0..dim {
                    v[a] = off[a] as f64 * grid.spacing(a) / tau;
                    my[a] = (mx[a] + off[a]).rem_euclid(dims[a] as i64);
                }
                let y = grid.index_of(&my[..dim]);
                // Midpoint value by linear interpolation in x: mean of the two
                // endpoint rows at the same velocity.
                let l = 0.5 * (src.interp_v(x, &v[..dim]) + src.interp_v(y, &v[..dim]));
                *slot = tau * l;
            }
            row.into_iter()
        })
        .collect();
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite kernel cost".into()));
    }
    Ok(ActionKernel {
        grid,
        tau,
        tau_parts: vec![tau],
        direction,
        offsets,
        costs,
        label: table.label().to_string(),
        warnings,
    })
}

/// Sup entrywise |K_G K_H - K_H K_G|: the discrete residual of the
/// inf-convolution exchange identity for action kernels.
pub fn commutation_residual(kg: &ActionKernel, kh: &ActionKernel) -> Result<f64> {
    let gh = kg.minplus_product(kh)?;
    let hg = kh.minplus_product(kg)?;
    Ok(gh.sup_entry_diff(&hg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;
    use crate::transform::legendre;

    fn quadratic_kernel(n: usize, tau: f64) -> ActionKernel {
        let h = registry::builtin("quadratic").unwrap();
        let t = legendre(&h, &TorusGrid::line(n).unwrap(), 257, 257).unwrap();
        build_kernel(&t, tau, Direction::Negative).unwrap()
    }

    #[test]
    fn one_step_quadratic_cost() {
        // c(x, x+spacing) = spacing^2 / (2 tau), within v-interpolation error.
        let k = quadratic_kernel(64, 0.1);
        let expect = (1.0f64 / 64.0).powi(2) * 5.0;
        let got = k.cost(0, 1);
        assert!((got - expect).abs() < 1e-5, "got {got}, expect {expect}");
    }

    #[test]
    fn zero_velocity_entry_is_tau_times_l() {
        let h = registry::builtin("pendulum(1)").unwrap();
        let t = legendre(&h, &TorusGrid::line(64).unwrap(), 257, 257).unwrap();
        let k = build_kernel(&t, 0.1, Direction::Negative).unwrap();
        // c(0,0) = tau * L(0,0) = 0.1 * (-1).
        assert_eq!(k.cost(0, 0), -0.1);
    }

    #[test]
    fn momentum_only_kernel_is_translation_invariant() {
        let k = quadratic_kernel(32, 0.05);
        let total = k.offset_count();
        let first = &k.costs()[..total];
        for x in 1..32 {
            assert_eq!(&k.costs()[x * total..(x + 1) * total], first);
        }
    }

    #[test]
    fn positive_kernel_is_transpose_of_negative() {
        let h = registry::builtin("pendulum(1)").unwrap();
        let t = legendre(&h, &TorusGrid::line(32).unwrap(), 129, 129).unwrap();
        let kn = build_kernel(&t, 0.05, Direction::Negative).unwrap();
        let kp = build_kernel(&t, 0.05, Direction::Positive).unwrap();
        for x in 0..32 {
            for y in 0..32 {
                let a = kn.cost(x, y);
                let b = kp.cost(y, x);
                if a.is_infinite() {
                    assert!(b.is_infinite());
                } else {
                    // Equal up to interpolation-coefficient rounding.
                    assert!(
                        (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
                        "transpose mismatch at ({x},{y}): {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn frozen_two_node_apply() {
        let grid = TorusGrid::line(2).unwrap();
        let k = ActionKernel::from_dense(
            grid.clone(),
            1.0,
            Direction::Negative,
            &[0.0, 5.0, 3.0, 1.0],
            "demo",
        )
        .unwrap();
        let u = GridFunction::new(grid, vec![2.0, 4.0]).unwrap();
        let out = k.minplus_apply(&u);
        assert_eq!(out.values(), &[2.0, 5.0]);
    }

    #[test]
    fn identity_kernel_applies_bitwise() {
        let grid = TorusGrid::line(16).unwrap();
        let k = ActionKernel::identity(grid.clone(), 0.1, Direction::Negative);
        let u = GridFunction::sample(grid, |x| (7.3 * x[0]).sin()).unwrap();
        assert_eq!(k.minplus_apply(&u).values(), u.values());
    }

    #[test]
    fn hopf_lax_step_matches_moreau_envelope() {
        // One backward step of H = p^2/2 on u = dist_T(., 1/2) equals the
        // Moreau envelope: u - tau/2 outside the kink, parabola inside.
        let n = 256;
        let tau = 0.05;
        let k = quadratic_kernel(n, tau);
        let grid = k.grid().clone();
        let dist = |x: f64| {
            let d = (x - 0.5).abs();
            d.min(1.0 - d)
        };
        let u = GridFunction::sample(grid.clone(), |x| dist(x[0])).unwrap();
        let out = k.minplus_apply(&u);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let x = i as f64 / n as f64;
            let d = dist(x);
            let expect = if d >= tau {
                d - tau / 2.0
            } else {
                d * d / (2.0 * tau)
            };
            worst = worst.max((out.values()[i] - expect).abs());
        }
        assert!(worst <= 2.0 / n as f64, "sup error {worst}");
    }

    #[test]
    fn product_against_identity_and_brute_force() {
        let grid = TorusGrid::line(3).unwrap();
        let c1: Vec<f64> = vec![0.5, 2.0, 1.0, 3.0, 0.25, 4.0, 1.5, 2.5, 0.75];
        let c2: Vec<f64> = vec![1.0, 0.5, 2.0, 0.25, 3.0, 1.0, 2.0, 0.5, 0.125];
        let k1 = ActionKernel::from_dense(grid.clone(), 1.0, Direction::Negative, &c1, "a").unwrap();
        let k2 = ActionKernel::from_dense(grid.clone(), 1.0, Direction::Negative, &c2, "b").unwrap();
        let id = ActionKernel::identity(grid.clone(), 1.0, Direction::Negative);
        let p = k1.minplus_product(&id).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert_eq!(p.cost(x, y), k1.cost(x, y));
            }
        }
        // Exhaustive 27-sum oracle.
        let p12 = k1.minplus_product(&k2).unwrap();
        for x in 0..3 {
            for z in 0..3 {
                let mut best = f64::INFINITY;
                for y in 0..3 {
                    best = best.min(c1[x * 3 + y] + c2[y * 3 + z]);
                }
                assert_eq!(p12.cost(x, z), best, "entry ({x},{z})");
            }
        }
    }

    #[test]
    fn power_one_is_identity_operation_and_two_is_product() {
        let k = quadratic_kernel(16, 0.1);
        let p1 = k.minplus_power(1).unwrap();
        assert_eq!(p1.costs(), k.costs());
        let p2 = k.minplus_power(2).unwrap();
        let prod = k.minplus_product(&k).unwrap();
        assert_eq!(p2.costs(), prod.costs());
        assert_eq!(p2.tau(), 0.2);
    }

    #[test]
    fn translation_invariant_products_commute_exactly() {
        let hg = registry::builtin("quadratic").unwrap();
        let hh = registry::builtin("quartic-p").unwrap();
        let grid = TorusGrid::line(32).unwrap();
        let kg = build_kernel(&legendre(&hg, &grid, 129, 129).unwrap(), 0.05, Direction::Negative)
            .unwrap();
        let kh = build_kernel(&legendre(&hh, &grid, 129, 129).unwrap(), 0.05, Direction::Negative)
            .unwrap();
        assert_eq!(commutation_residual(&kg, &kh).unwrap(), 0.0);
        // And trivially for identical kernels.
        assert_eq!(commutation_residual(&kg, &kg).unwrap(), 0.0);
        // The product of translation-invariant kernels is itself
        // translation-invariant (convolution structure).
        let p = kg.minplus_product(&kh).unwrap();
        let total = p.offset_count();
        let first = &p.costs()[..total];
        for x in 1..32 {
            assert_eq!(&p.costs()[x * total..(x + 1) * total], first);
        }
    }

    #[test]
    fn pendulum_power_diagonal_mean_recovers_critical_value() {
        let h = registry::builtin("pendulum(1)").unwrap();
        let grid = TorusGrid::line(128).unwrap();
        let t = legendre(&h, &grid, 257, 257).unwrap();
        let k = build_kernel(&t, 0.05, Direction::Negative).unwrap();
        let p = k.minplus_power(400).unwrap();
        let min_diag = (0..128).map(|x| p.cost(x, x)).fold(f64::INFINITY, f64::min);
        let alpha = -min_diag / (400.0 * 0.05);
        assert!((alpha - 1.0).abs() <= 0.05, "alpha from cycles {alpha}");
    }

    #[test]
    fn monotone_and_constant_commutation_smoke() {
        // Monotonicity holds for arbitrary floats (IEEE addition and min are
        // monotone); exact constant commutation additionally needs dyadic
        // data so no sum rounds.
        let k = quadratic_kernel(16, 0.1);
        let grid = k.grid().clone();
        let u = GridFunction::sample(grid.clone(), |x| (9.0 * x[0]).cos()).unwrap();
        let mut w = u.clone();
        for v in w.values_mut() {
            *v += 0.25;
        }
        let tu = k.minplus_apply(&u);
        let tw = k.minplus_apply(&w);
        for i in 0..16 {
            assert!(tu.values()[i] <= tw.values()[i]);
        }

        let g2 = TorusGrid::line(4).unwrap();
        let dy = |i: i64| i as f64 / 1024.0;
        let costs: Vec<f64> = (0..16).map(|i| dy((i * 37) % 512)).collect();
        let kd = ActionKernel::from_dense(g2.clone(), 1.0, Direction::Negative, &costs, "dy")
            .unwrap();
        let ud = GridFunction::new(g2, vec![dy(3), dy(-100), dy(255), dy(64)]).unwrap();
        let mut wd = ud.clone();
        for v in wd.values_mut() {
            *v += 0.25;
        }
        let a = kd.minplus_apply(&ud);
        let b = kd.minplus_apply(&wd);
        for i in 0..4 {
            assert_eq!(a.values()[i] + 0.25, b.values()[i]);
        }
    }

    #[test]
    fn band_reduction_warns_and_tiny_tau_errors() {
        let h = registry::builtin("pendulum(1)").unwrap();
        let grid = TorusGrid::line(8).unwrap();
        let t = legendre(&h, &grid, 65, 65).unwrap();
        let k = build_kernel(&t, 0.2, Direction::Negative).unwrap();
        assert!(!k.warnings().is_empty(), "band should be grid-capped at n=8");
        let tiny = build_kernel(&t, 1e-4, Direction::Negative);
        assert!(matches!(tiny, Err(Error::TauTooSmallForGrid)));
    }
}
