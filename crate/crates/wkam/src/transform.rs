//! Discrete Legendre-Fenchel transform L(x,v) = max_p p.v - H(x,p).
//!
//! Conjugation is exhaustive maximization over a uniform momentum lattice:
//! O(n_x n_p n_v), unconditionally correct at desk scale. The momentum box is
//! a hard bound. One guard node is added just outside each end of the lattice
//! so that a maximizer legitimately sitting exactly on the window edge (a
//! quadratic fiber at |v| = V_max) is distinguishable from one escaping the
//! box; an argmax on a guard node raises the window-too-small error instead of
//! being clamped.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::model::HamiltonianModel;

/// Lagrangian values on (x-node, v-node) pairs, with recorded maximizers.
#[derive(Clone, Debug)]
pub struct LagrangianTable {
    grid: TorusGrid,
    v_max: f64,
    n_v: usize,
    /// L values, layout [x-node][v-lattice row-major].
    values: Vec<f64>,
    /// Maximizing momentum per entry, `dim` components each.
    argmax: Vec<f64>,
    p_max: f64,
    n_p: usize,
    label: String,
}

fn force_odd(n: usize) -> usize {
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

impl LagrangianTable {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn v_spacing(&self) -> f64 {
        2.0 * self.v_max / (self.n_v - 1) as f64
    }

    pub fn v_node(&self, i: usize) -> f64 {
        -self.v_max + self.v_spacing() * i as f64
    }

    fn v_lattice_len(&self) -> usize {
        self.n_v.pow(self.dim() as u32)
    }

    pub fn row(&self, x_node: usize) -> &[f64] {
        let len = self.v_lattice_len();
        &self.values[x_node * len..(x_node + 1) * len]
    }

    /// Max - min over all stored values.
    pub fn osc(&self) -> f64 {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// Assemble a table from raw values (testing and IO).
    pub fn from_parts(
        grid: TorusGrid,
        v_max: f64,
        n_v: usize,
        values: Vec<f64>,
        argmax: Vec<f64>,
        p_max: f64,
        n_p: usize,
        label: impl Into<String>,
    ) -> Result<Self> {
        if n_v < 2 || n_v % 2 == 0 {
            return Err(Error::InvalidInput(
                "velocity nodes must be odd-count (symmetric about 0)".into(),
            ));
        }
        let expect = grid.node_count() * n_v.pow(grid.dim() as u32);
        if values.len() != expect || argmax.len() != expect * grid.dim() {
            return Err(Error::InvalidInput("table size mismatch".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite table value".into()));
        }
        Ok(LagrangianTable {
            grid,
            v_max,
            n_v,
            values,
            argmax,
            p_max,
            n_p,
            label: label.into(),
        })
    }

    /// Multilinear interpolation of L(x_node, .) at velocity `v` (inside the
    /// velocity box).
    pub fn interp_v(&self, x_node: usize, v: &[f64]) -> f64 {
        let dv = self.v_spacing();
        let locate = |val: f64| -> (usize, f64) {
            debug_assert!(
                val.abs() <= self.v_max + 1e-9,
                "velocity {val} outside table window {}",
                self.v_max
            );
            let t = ((val + self.v_max) / dv).clamp(0.0, (self.n_v - 1) as f64);
            let i = (t.floor() as usize).min(self.n_v - 2);
            (i, t - i as f64)
        };
        let row = self.row(x_node);
        match self.dim() {
            1 => {
                let (i, f) = locate(v[0]);
                row[i] * (1.0 - f) + row[i + 1] * f
            }
            2 => {
                let (i0, f0) = locate(v[0]);
                let (i1, f1) = locate(v[1]);
                let n = self.n_v;
                let g = |a: usize, b: usize| row[a * n + b];
                (g(i0, i1) * (1.0 - f0) + g(i0 + 1, i1) * f0) * (1.0 - f1)
                    + (g(i0, i1 + 1) * (1.0 - f0) + g(i0 + 1, i1 + 1) * f0) * f1
            }
            _ => unreachable!(),
        }
    }

    /// Table with velocities reversed: output at (x, v) equals input at
    /// (x, -v). Pure index permutation, no arithmetic.
    pub fn reversed(&self) -> LagrangianTable {
        let dim = self.dim();
        let n = self.n_v;
        let vl = self.v_lattice_len();
        let mut values = vec![0.0; self.values.len()];
        let mut argmax = vec![0.0; self.argmax.len()];
        for x in 0..self.grid.node_count() {
            for flat in 0..vl {
                let mirrored = match dim {
                    1 => n - 1 - flat,
                    2 => {
                        let (i, j) = (flat / n, flat % n);
                        (n - 1 - i) * n + (n - 1 - j)
                    }
                    _ => unreachable!(),
                };
                values[x * vl + flat] = self.values[x * vl + mirrored];
                for a in 0..dim {
                    argmax[(x * vl + flat) * dim + a] = self.argmax[(x * vl + mirrored) * dim + a];
                }
            }
        }
        LagrangianTable {
            grid: self.grid.clone(),
            v_max: self.v_max,
            n_v: self.n_v,
            values,
            argmax,
            p_max: self.p_max,
            n_p: self.n_p,
            label: format!("{}^rev", self.label),
        }
    }

    /// Conjugate of the momentum-shifted Hamiltonian H_c(x,p) = H(x, p+c):
    /// substituting q = p + c in the maximization gives exactly
    /// L_c(x,v) = L(x,v) - c.v with maximizers shifted by -c.
    pub fn shifted_by(&self, c: &[f64]) -> LagrangianTable {
        assert_eq!(c.len(), self.dim());
        let dim = self.dim();
        let n = self.n_v;
        let vl = self.v_lattice_len();
        let mut values = self.values.clone();
        let mut argmax = self.argmax.clone();
        for x in 0..self.grid.node_count() {
            for flat in 0..vl {
                let dot = match dim {
                    1 => c[0] * self.v_node(flat),
                    2 => c[0] * self.v_node(flat / n) + c[1] * self.v_node(flat % n),
                    _ => unreachable!(),
                };
                values[x * vl + flat] -= dot;
                for a in 0..dim {
                    argmax[(x * vl + flat) * dim + a] -= c[a];
                }
            }
        }
        LagrangianTable {
            grid: self.grid.clone(),
            v_max: self.v_max,
            n_v: self.n_v,
            values,
            argmax,
            p_max: self.p_max,
            n_p: self.n_p,
            label: format!("{}~shift", self.label),
        }
    }

    /// Minimum increment of consecutive velocity-slopes, over all x and axes.
    /// Nonnegative (up to tolerance) means the table is discretely convex in v.
    pub fn min_slope_increment(&self) -> f64 {
        let dv = self.v_spacing();
        let n = self.n_v;
        let mut min_inc = f64::INFINITY;
        for x in 0..self.grid.node_count() {
            let row = self.row(x);
            match self.dim() {
                1 => {
                    for i in 0..n - 2 {
                        let s0 = (row[i + 1] - row[i]) / dv;
                        let s1 = (row[i + 2] - row[i + 1]) / dv;
                        min_inc = min_inc.min(s1 - s0);
                    }
                }
                2 => {
                    for i in 0..n {
                        for j in 0..n - 2 {
                            let s0 = (row[i * n + j + 1] - row[i * n + j]) / dv;
                            let s1 = (row[i * n + j + 2] - row[i * n + j + 1]) / dv;
                            min_inc = min_inc.min(s1 - s0);
                        }
                    }
                    for j in 0..n {
                        for i in 0..n - 2 {
                            let s0 = (row[(i + 1) * n + j] - row[i * n + j]) / dv;
                            let s1 = (row[(i + 2) * n + j] - row[(i + 1) * n + j]) / dv;
                            min_inc = min_inc.min(s1 - s0);
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        min_inc
    }
}

/// Discrete Legendre transform of a validated Tonelli model.
pub fn legendre(
    h: &HamiltonianModel,
    grid: &TorusGrid,
    n_p: usize,
    n_v: usize,
) -> Result<LagrangianTable> {
    if !h.is_tonelli() {
        return Err(Error::NonTonelli {
            label: h.label().to_string(),
            reason: "refusing conjugation of a non-Tonelli model (use legendre_forced)".into(),
        });
    }
    legendre_forced(h, grid, n_p, n_v)
}

/// Same as [`legendre`] without the Tonelli gate.
pub fn legendre_forced(
    h: &HamiltonianModel,
    grid: &TorusGrid,
    n_p: usize,
    n_v: usize,
) -> Result<LagrangianTable> {
    if grid.dim() != h.dim() {
        return Err(Error::InvalidInput("grid/model dimension mismatch".into()));
    }
    if n_p < 16 || n_v < 16 {
        return Err(Error::InvalidInput("need n_p, n_v >= 16 per axis".into()));
    }
    let dim = h.dim();
    let n_p = force_odd(n_p);
    let n_v = force_odd(n_v);
    let p_max = h.p_window();
    let v_max = h.v_window();
    let dp = 2.0 * p_max / (n_p - 1) as f64;
    // Momentum nodes with one guard node beyond each end of the box.
    let p_nodes: Vec<f64> = (0..n_p + 2)
        .map(|j| -p_max - dp + dp * j as f64)
        .collect();
    let p_lattice: Vec<Vec<f64>> = match dim {
        1 => p_nodes.iter().map(|&p| vec![p]).collect(),
        2 => {
            let mut out = Vec::with_capacity(p_nodes.len() * p_nodes.len());
            for &a in &p_nodes {
                for &b in &p_nodes {
                    out.push(vec![a, b]);
                }
            }
            out
        }
        _ => unreachable!(),
    };
    let guard = |j: usize| j == 0 || j == p_nodes.len() - 1;
    let lattice_guard: Vec<bool> = match dim {
        1 => (0..p_nodes.len()).map(guard).collect(),
        2 => {
            let m = p_nodes.len();
            (0..m * m).map(|f| guard(f / m) || guard(f % m)).collect()
        }
        _ => unreachable!(),
    };

    let dv = 2.0 * v_max / (n_v - 1) as f64;
    let v_lattice: Vec<Vec<f64>> = match dim {
        1 => (0..n_v).map(|i| vec![-v_max + dv * i as f64]).collect(),
        2 => {
            let mut out = Vec::with_capacity(n_v * n_v);
            for i in 0..n_v {
                for j in 0..n_v {
                    out.push(vec![-v_max + dv * i as f64, -v_max + dv * j as f64]);
                }
            }
            out
        }
        _ => unreachable!(),
    };
    let vl = v_lattice.len();

    struct RowOut {
        values: Vec<f64>,
        argmax: Vec<f64>,
        boundary: Option<Vec<f64>>, // offending v
    }

    let rows: Vec<RowOut> = (0..grid.node_count())
        .into_par_iter()
        .map(|xi| {
            let x = grid.coords(xi);
            let h_row: Vec<f64> = p_lattice.iter().map(|p| h.eval(&x, p)).collect();
            let mut values = vec![0.0; vl];
            let mut argmax = vec![0.0; vl * dim];
            let mut boundary = None;
            for (vi, v) in v_lattice.iter().enumerate() {
                let mut best = f64::NEG_INFINITY;
                let mut best_j = 0usize;
                for (j, p) in p_lattice.iter().enumerate() {
                    let dot: f64 = p.iter().zip(v).map(|(a, b)| a * b).sum();
                    let s = dot - h_row[j];
                    if s > best {
                        best = s;
                        best_j = j;
                    }
                }
                if lattice_guard[best_j] && boundary.is_none() {
                    boundary = Some(v.clone());
                }
                values[vi] = best;
                argmax[vi * dim..(vi + 1) * dim].copy_from_slice(&p_lattice[best_j]);
            }
            RowOut {
                values,
                argmax,
                boundary,
            }
        })
        .collect();

    for (xi, r) in rows.iter().enumerate() {
        if let Some(v) = &r.boundary {
            return Err(Error::MomentumWindowTooSmall {
                x: grid.coords(xi),
                v: v.clone(),
            });
        }
    }

    let mut values = Vec::with_capacity(grid.node_count() * vl);
    let mut argmax = Vec::with_capacity(grid.node_count() * vl * dim);
    for r in rows {
        values.extend_from_slice(&r.values);
        argmax.extend_from_slice(&r.argmax);
    }
    Ok(LagrangianTable {
        grid: grid.clone(),
        v_max,
        n_v,
        values,
        argmax,
        p_max,
        n_p,
        label: h.label().to_string(),
    })
}

/// Sup over sampled (x, p) with p in the inner half of the momentum box of
/// |H(x,p) - max_v (p.v - L(x,v))|: the double-conjugation defect.
pub fn biconjugate_check(h: &HamiltonianModel, table: &LagrangianTable) -> f64 {
    let dim = table.dim();
    let half = table.p_max() / 2.0;
    // Prime sample count: power-of-two-plus-one lattices would land every
    // sample on a velocity node and hide the conjugation error.
    let count = 37usize;
    let axis: Vec<f64> = (0..count)
        .map(|i| -half + 2.0 * half * i as f64 / (count - 1) as f64)
        .collect();
    let p_samples: Vec<Vec<f64>> = match dim {
        1 => axis.iter().map(|&p| vec![p]).collect(),
        2 => {
            let mut out = Vec::new();
            for &a in &axis {
                for &b in &axis {
                    out.push(vec![a, b]);
                }
            }
            out
        }
        _ => unreachable!(),
    };
    let n = table.n_v();
    let vl = table.v_lattice_len();
    (0..table.grid().node_count())
        .into_par_iter()
        .map(|xi| {
            let x = table.grid().coords(xi);
            let row = table.row(xi);
            let mut worst: f64 = 0.0;
            for p in &p_samples {
                let mut conj = f64::NEG_INFINITY;
                for flat in 0..vl {
                    let dot = match dim {
                        1 => p[0] * table.v_node(flat),
                        2 => p[0] * table.v_node(flat / n) + p[1] * table.v_node(flat % n),
                        _ => unreachable!(),
                    };
                    conj = conj.max(dot - row[flat]);
                }
                worst = worst.max((h.eval(&x, p) - conj).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}
