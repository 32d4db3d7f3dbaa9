//! Uniform grids on the flat torus T^d = [0,1)^d, d in {1,2}, and real-valued
//! functions sampled on them.
//!
//! Node `k` along an axis with `n` nodes sits at coordinate `k/n`; the axis is
//! periodic with period 1. Displacements are always reduced to the minimal
//! representative in (-1/2, 1/2] per axis.

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 2;

/// Uniform periodic grid on T^d.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorusGrid {
    dims: Vec<usize>,
}

impl TorusGrid {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "grid dimension must be 1 or 2, got {}",
                dims.len()
            )));
        }
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidInput(
                "need at least 2 nodes per axis".into(),
            ));
        }
        Ok(TorusGrid { dims: dims.to_vec() })
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(&[n, n])
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Grid spacing 1/n along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / self.dims[axis] as f64
    }

    /// Coarsest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.dims
            .iter()
            .map(|&n| 1.0 / n as f64)
            .fold(0.0, f64::max)
    }

    /// Row-major flat index of a (possibly out-of-range) multi-index; wraps
    /// periodically.
    pub fn index_of(&self, multi: &[i64]) -> usize {
        debug_assert_eq!(multi.len(), self.dim());
        let mut idx = 0usize;
        for (a, &m) in multi.iter().enumerate() {
            let n = self.dims[a] as i64;
            idx = idx * self.dims[a] + (m.rem_euclid(n)) as usize;
        }
        idx
    }

    /// Multi-index of a flat node index.
    pub fn multi_of(&self, mut idx: usize) -> Vec<i64> {
        let mut out = vec![0i64; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = (idx % self.dims[a]) as i64;
            idx /= self.dims[a];
        }
        out
    }

    /// Coordinates of node `idx`.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_of(idx)
            .iter()
            .enumerate()
            .map(|(a, &m)| m as f64 * self.spacing(a))
            .collect()
    }

    /// Minimal signed node displacement from `from` to `to` along one axis,
    /// in node units, lying in (-n/2, n/2].
    pub fn signed_node_disp(n: usize, from: i64, to: i64) -> i64 {
        let n = n as i64;
        let mut d = (to - from).rem_euclid(n);
        if 2 * d > n {
            d -= n;
        }
        d
    }

    /// Minimal displacement vector from node `from` to node `to`, each
    /// component in (-1/2, 1/2].
    pub fn min_displacement(&self, from: usize, to: usize) -> Vec<f64> {
        let mf = self.multi_of(from);
        let mt = self.multi_of(to);
        (0..self.dim())
            .map(|a| {
                Self::signed_node_disp(self.dims[a], mf[a], mt[a]) as f64 * self.spacing(a)
            })
            .collect()
    }

    /// Torus distance between two nodes (Euclidean on minimal displacements).
    pub fn node_distance(&self, a: usize, b: usize) -> f64 {
        self.min_displacement(a, b)
            .iter()
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt()
    }

    /// Chebyshev distance in node units between two nodes (used for mask
    /// Hausdorff distances).
    pub fn node_chebyshev(&self, a: usize, b: usize) -> usize {
        let ma = self.multi_of(a);
        let mb = self.multi_of(b);
        (0..self.dim())
            .map(|ax| Self::signed_node_disp(self.dims[ax], ma[ax], mb[ax]).unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }
}

/// Real values on the nodes of a [`TorusGrid`], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidInput(format!(
                "value count {} does not match grid node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite function value".into()));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        let n = grid.node_count();
        GridFunction {
            grid,
            values: vec![value; n],
        }
    }

    /// Sample a closure at every node.
    pub fn sample<F: Fn(&[f64]) -> f64>(grid: TorusGrid, f: F) -> Result<Self> {
        let values: Vec<f64> = (0..grid.node_count()).map(|i| f(&grid.coords(i))).collect();
        GridFunction::new(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn add_scalar(&mut self, a: f64) {
        for v in &mut self.values {
            *v += a;
        }
    }

    /// Copy shifted so that `self[anchor] = 0`.
    pub fn anchored(&self, anchor: usize) -> GridFunction {
        let mut out = self.clone();
        let a = out.values[anchor];
        for v in &mut out.values {
            *v -= a;
        }
        out
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Oscillation max - min.
    pub fn osc(&self) -> f64 {
        self.max_value() - self.min_value()
    }

    /// Sup-norm distance to another function on the same grid.
    pub fn sup_diff(&self, other: &GridFunction) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Pointwise difference self - other.
    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        GridFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn neg(&self) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

/// Directed Hausdorff-style distance between two node masks, in Chebyshev node
/// units; `None` if either mask is empty.
pub fn mask_hausdorff(grid: &TorusGrid, a: &[bool], b: &[bool]) -> Option<usize> {
    let nodes_a: Vec<usize> = (0..a.len()).filter(|&i| a[i]).collect();
    let nodes_b: Vec<usize> = (0..b.len()).filter(|&i| b[i]).collect();
    if nodes_a.is_empty() || nodes_b.is_empty() {
        return None;
    }
    let one_way = |xs: &[usize], ys: &[usize]| {
        xs.iter()
            .map(|&x| ys.iter().map(|&y| grid.node_chebyshev(x, y)).min().unwrap())
            .max()
            .unwrap()
    };
    Some(one_way(&nodes_a, &nodes_b).max(one_way(&nodes_b, &nodes_a)))
}
