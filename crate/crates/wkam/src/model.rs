//! Hamiltonian models H(x,p) on T^d x R^d with Tonelli validation.
//!
//! A model carries its evaluator together with the momentum window P_max used
//! for convex conjugation and the velocity window V_max used for action
//! kernels. Evaluators must be pure: models are immutable and shared freely
//! across worker threads.
//!
//! Validation checks the three Tonelli proxies on a sample lattice: strict
//! fiber convexity (finite-difference Hessian), superlinearity (H(x,p)/|p|
//! non-decreasing along rays), and boundedness A*(R) = sup {H(x,p) : |p| <= R}.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, MAX_DIM};

/// Finite-difference step for fiber Hessians.
pub const HESSIAN_FD_STEP: f64 = 1e-4;
/// Finite-difference step for Poisson brackets.
pub const BRACKET_FD_STEP: f64 = 1e-5;
/// Strict-positivity floor for the fiber Hessian (absorbs FD noise).
pub const CONVEXITY_FLOOR: f64 = 1e-7;
/// Sample count per axis used by constructors for the built-in validation.
pub const DEFAULT_VALIDATION_SAMPLES: usize = 16;

pub type EvalFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A closed one-form c.dx on T^d, identified with its coefficient vector.
#[derive(Clone, Debug, PartialEq)]
pub struct CohomologyClass(pub Vec<f64>);

impl CohomologyClass {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() || c.len() > MAX_DIM || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("bad cohomology class".into()));
        }
        Ok(CohomologyClass(c))
    }

    pub fn zero(dim: usize) -> Self {
        CohomologyClass(vec![0.0; dim])
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub samples_per_axis: usize,
    /// Minimum eigenvalue of the finite-difference fiber Hessian over the
    /// sample lattice.
    pub min_fiber_hessian: f64,
    pub convexity_ok: bool,
    /// H(x,p)/|p| non-decreasing along sampled rays up to P_max.
    pub superlinearity_ok: bool,
    /// Sampled (R, A*(R)) pairs.
    pub a_star: Vec<(f64, f64)>,
    pub finite_ok: bool,
    pub passed: bool,
}

#[derive(Clone)]
pub struct HamiltonianModel {
    dim: usize,
    eval: EvalFn,
    p_window: f64,
    v_window: f64,
    label: String,
    report: ValidationReport,
}

impl std::fmt::Debug for HamiltonianModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianModel")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("p_window", &self.p_window)
            .field("v_window", &self.v_window)
            .field("tonelli", &self.report.passed)
            .finish()
    }
}

/// Default windows P_max = V_max = 3(1 + sqrt(2 osc V)): contains the
/// critical energy level with margin. User-overridable.
fn default_windows(osc_v: f64) -> (f64, f64) {
    let v = 3.0 * (1.0 + (2.0 * osc_v).sqrt());
    (v, v)
}

fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (a + b)];
    }
    let step = (b - a) / (count - 1) as f64;
    (0..count).map(|i| a + step * i as f64).collect()
}

/// All points of the lattice `axes^dim` (row-major).
fn lattice(dim: usize, axis: &[f64]) -> Vec<Vec<f64>> {
    match dim {
        1 => axis.iter().map(|&v| vec![v]).collect(),
        2 => {
            let mut out = Vec::with_capacity(axis.len() * axis.len());
            for &a in axis {
                for &b in axis {
                    out.push(vec![a, b]);
                }
            }
            out
        }
        _ => unreachable!(),
    }
}

impl HamiltonianModel {
    /// Build a model from a raw evaluator with explicit windows; runs the
    /// default validation.
    pub fn from_parts(
        dim: usize,
        eval: EvalFn,
        p_window: f64,
        v_window: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidInput("dim must be 1 or 2".into()));
        }
        if !(p_window > 0.0) || !(v_window > 0.0) {
            return Err(Error::InvalidInput("windows must be positive".into()));
        }
        let mut model = HamiltonianModel {
            dim,
            eval,
            p_window,
            v_window,
            label: label.into(),
            report: ValidationReport {
                samples_per_axis: 0,
                min_fiber_hessian: f64::NAN,
                convexity_ok: false,
                superlinearity_ok: false,
                a_star: vec![],
                finite_ok: false,
                passed: false,
            },
        };
        model.report = validate_tonelli(&model, DEFAULT_VALIDATION_SAMPLES)?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64], p: &[f64]) -> f64 {
        (self.eval)(x, p)
    }

    pub fn p_window(&self) -> f64 {
        self.p_window
    }

    pub fn v_window(&self) -> f64 {
        self.v_window
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn is_tonelli(&self) -> bool {
        self.report.passed
    }

    /// Same evaluator with overridden windows, revalidated.
    pub fn with_windows(&self, p_window: f64, v_window: f64) -> Result<Self> {
        Self::from_parts(self.dim, self.eval.clone(), p_window, v_window, self.label.clone())
    }

    /// Momentum-shifted model H_c(x,p) = H(x, p + c), windows enlarged by |c|.
    pub fn shifted(&self, c: &CohomologyClass) -> Result<Self> {
        if c.0.len() != self.dim {
            return Err(Error::InvalidInput("cohomology class dimension mismatch".into()));
        }
        let base = self.eval.clone();
        let shift = c.0.clone();
        let dim = self.dim;
        let eval: EvalFn = Arc::new(move |x: &[f64], p: &[f64]| {
            let mut q = [0.0f64; MAX_DIM];
            for a in 0..dim {
                q[a] = p[a] + shift[a];
            }
            base(x, &q[..dim])
        });
        let mut label = format!("{}@c=[", self.label);
        for (i, v) in c.0.iter().enumerate() {
            if i > 0 {
                label.push(',');
            }
            let _ = write!(label, "{v}");
        }
        label.push(']');
        let bump = c.norm_inf();
        Self::from_parts(dim, eval, self.p_window + bump, self.v_window + bump, label)
    }
}

/// Mechanical Hamiltonian H(x,p) = kinetic_scale |p|^2/2 + V(x).
pub fn make_mechanical<V>(dim: usize, v_pot: V, kinetic_scale: f64, label: impl Into<String>) -> Result<HamiltonianModel>
where
    V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
{
    if !(kinetic_scale > 0.0) {
        return Err(Error::InvalidInput("kinetic_scale must be positive".into()));
    }
    // Oscillation of V from a fine sample; also rejects non-finite potentials.
    let probe = linspace(0.0, 1.0 - 1.0 / 256.0, 256);
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for x in lattice(dim, &probe) {
        let v = v_pot(&x);
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite potential sample at {x:?}")));
        }
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    let (p_window, v_window) = default_windows(vmax - vmin);
    let eval: EvalFn = Arc::new(move |x: &[f64], p: &[f64]| {
        let kin: f64 = p.iter().map(|pi| pi * pi).sum::<f64>() * 0.5 * kinetic_scale;
        kin + v_pot(x)
    });
    HamiltonianModel::from_parts(dim, eval, p_window, v_window, label)
}

/// Mechanical Hamiltonian with a tabulated potential; the table is extended to
/// all of T^d by trigonometric (Fourier) interpolation, which keeps the model
/// smooth and exactly periodic.
pub fn make_mechanical_tabulated(
    table: &GridFunction,
    kinetic_scale: f64,
    label: impl Into<String>,
) -> Result<HamiltonianModel> {
    let interp = TrigInterp::new(table)?;
    make_mechanical(
        table.grid().dim(),
        move |x: &[f64]| interp.eval(x),
        kinetic_scale,
        label,
    )
}

/// Momentum-only Hamiltonian H(x,p) = h(p). Any two such models Poisson
/// commute. Validation failure is flagged in the report, not an error.
pub fn make_momentum_only<F>(dim: usize, h: F, label: impl Into<String>) -> Result<HamiltonianModel>
where
    F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
{
    let (p_window, v_window) = default_windows(0.0);
    let eval: EvalFn = Arc::new(move |_x: &[f64], p: &[f64]| h(p));
    HamiltonianModel::from_parts(dim, eval, p_window, v_window, label)
}

/// Composition G = phi o H with phi' > 0 and phi'' >= 0 on the sampled range
/// of H over T^d x [-P_max, P_max]^d; such a G Poisson commutes with H.
pub fn compose_convex<F>(h: &HamiltonianModel, phi: F, label: impl Into<String>) -> Result<HamiltonianModel>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let samples = DEFAULT_VALIDATION_SAMPLES;
    let xs = lattice(h.dim(), &linspace(0.0, 1.0 - 1.0 / samples as f64, samples));
    let ps = lattice(h.dim(), &linspace(-h.p_window(), h.p_window(), samples));
    let mut hmin = f64::INFINITY;
    let mut hmax = f64::NEG_INFINITY;
    for x in &xs {
        for p in &ps {
            let v = h.eval(x, p);
            hmin = hmin.min(v);
            hmax = hmax.max(v);
        }
    }
    // phi' > 0 and phi'' >= 0 by centered differences over the sampled range;
    // the phi'' tolerance absorbs rounding noise eps*|phi|/step^2.
    let delta = HESSIAN_FD_STEP;
    for t in linspace(hmin, hmax, 64) {
        let d1 = (phi(t + delta) - phi(t - delta)) / (2.0 * delta);
        let d2 = (phi(t + delta) - 2.0 * phi(t) + phi(t - delta)) / (delta * delta);
        if !(d1 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "composition rejected: phi' = {d1:.3e} <= 0 at h = {t:.6}"
            )));
        }
        if d2 < -1e-5 * (1.0 + phi(t).abs()) {
            return Err(Error::InvalidInput(format!(
                "composition rejected: phi'' = {d2:.3e} < 0 at h = {t:.6}"
            )));
        }
    }
    let inner = h.eval.clone();
    let eval: EvalFn = Arc::new(move |x: &[f64], p: &[f64]| phi(inner(x, p)));
    HamiltonianModel::from_parts(h.dim(), eval, h.p_window(), h.v_window(), label)
}

/// Tonelli validation over a `samples^d x samples^d` lattice in (x, p).
pub fn validate_tonelli(h: &HamiltonianModel, samples: usize) -> Result<ValidationReport> {
    if samples < 8 {
        return Err(Error::InvalidInput("need at least 8 samples per axis".into()));
    }
    let dim = h.dim();
    let p_max = h.p_window();
    let xs = lattice(dim, &linspace(0.0, 1.0 - 1.0 / samples as f64, samples));
    let ps = lattice(dim, &linspace(-p_max, p_max, samples));

    let mut finite_ok = true;
    let mut min_eig = f64::INFINITY;
    let step = HESSIAN_FD_STEP;
    for x in &xs {
        for p in &ps {
            let v = h.eval(x, p);
            if !v.is_finite() {
                finite_ok = false;
                continue;
            }
            let eig = min_fiber_hessian_eig(h, x, p, step);
            if !eig.is_finite() {
                finite_ok = false;
            } else {
                min_eig = min_eig.min(eig);
            }
        }
    }
    let convexity_ok = finite_ok && min_eig > CONVEXITY_FLOOR;

    // Superlinearity proxy: H(x, r e)/r non-decreasing along rays. Radii span
    // the outer half of the window so that momentum-shifted models, whose
    // fiber minimum sits away from p = 0, are not misread at small |p|.
    let dirs: Vec<Vec<f64>> = match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
                vec![s, s],
                vec![-s, s],
                vec![s, -s],
                vec![-s, -s],
            ]
        }
        _ => unreachable!(),
    };
    let radii = linspace(p_max / 2.0, p_max, 8);
    let mut superlinearity_ok = true;
    for x in &xs {
        for dir in &dirs {
            let mut prev = f64::NEG_INFINITY;
            for &r in &radii {
                let p: Vec<f64> = dir.iter().map(|d| d * r).collect();
                let g = h.eval(x, &p) / r;
                if !g.is_finite() {
                    finite_ok = false;
                    superlinearity_ok = false;
                    break;
                }
                if g < prev - 1e-9 * (1.0 + prev.abs()) {
                    superlinearity_ok = false;
                }
                prev = g;
            }
        }
    }

    // Boundedness: A*(R) on a ladder of radii including the full window.
    let mut a_star = Vec::new();
    let mut radius_ladder: Vec<f64> = (1..=p_max.ceil() as i64).map(|r| r as f64).collect();
    if radius_ladder.last().copied() != Some(p_max) {
        radius_ladder.push(p_max);
    }
    for r in radius_ladder {
        let pr = lattice(dim, &linspace(-r, r, samples.max(17)));
        let mut m = f64::NEG_INFINITY;
        for x in &xs {
            for p in &pr {
                if p.iter().map(|v| v * v).sum::<f64>().sqrt() <= r + 1e-12 {
                    m = m.max(h.eval(x, p));
                }
            }
        }
        if !m.is_finite() {
            finite_ok = false;
        }
        a_star.push((r, m));
    }

    let passed = finite_ok && convexity_ok && superlinearity_ok;
    Ok(ValidationReport {
        samples_per_axis: samples,
        min_fiber_hessian: min_eig,
        convexity_ok,
        superlinearity_ok,
        a_star,
        finite_ok,
        passed,
    })
}

fn min_fiber_hessian_eig(h: &HamiltonianModel, x: &[f64], p: &[f64], step: f64) -> f64 {
    let dim = h.dim();
    let at = |dp0: f64, dp1: f64| -> f64 {
        let mut q = [0.0f64; MAX_DIM];
        q[..dim].copy_from_slice(p);
        q[0] += dp0;
        if dim > 1 {
            q[1] += dp1;
        }
        h.eval(x, &q[..dim])
    };
    let h00 = (at(step, 0.0) - 2.0 * at(0.0, 0.0) + at(-step, 0.0)) / (step * step);
    if dim == 1 {
        return h00;
    }
    let h11 = (at(0.0, step) - 2.0 * at(0.0, 0.0) + at(0.0, -step)) / (step * step);
    let h01 = (at(step, step) - at(step, -step) - at(-step, step) + at(-step, -step))
        / (4.0 * step * step);
    // Smaller eigenvalue of the symmetric 2x2 matrix.
    let tr = h00 + h11;
    let det = h00 * h11 - h01 * h01;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    tr / 2.0 - disc
}

/// Poisson bracket {G,H} = sum_i dG/dx_i dH/dp_i - dG/dp_i dH/dx_i by
/// centered finite differences with step `h_fd`.
///
/// The sign convention is fixed by this formula; the underlying theory only
/// uses whether the bracket vanishes, and antisymmetry holds by construction.
pub fn poisson_bracket(
    g: &HamiltonianModel,
    h: &HamiltonianModel,
    x: &[f64],
    p: &[f64],
    h_fd: f64,
) -> f64 {
    assert_eq!(g.dim(), h.dim(), "dimension mismatch");
    assert!(h_fd > 0.0, "finite-difference step must be positive");
    let dim = g.dim();
    let partial = |m: &HamiltonianModel, axis: usize, in_x: bool| -> f64 {
        let mut xp = [0.0f64; MAX_DIM];
        let mut xm = [0.0f64; MAX_DIM];
        let mut pp = [0.0f64; MAX_DIM];
        let mut pm = [0.0f64; MAX_DIM];
        xp[..dim].copy_from_slice(x);
        xm[..dim].copy_from_slice(x);
        pp[..dim].copy_from_slice(p);
        pm[..dim].copy_from_slice(p);
        if in_x {
            xp[axis] += h_fd;
            xm[axis] -= h_fd;
        } else {
            pp[axis] += h_fd;
            pm[axis] -= h_fd;
        }
        (m.eval(&xp[..dim], &pp[..dim]) - m.eval(&xm[..dim], &pm[..dim])) / (2.0 * h_fd)
    };
    (0..dim)
        .map(|a| partial(g, a, true) * partial(h, a, false) - partial(g, a, false) * partial(h, a, true))
        .sum()
}

/// Trigonometric interpolation of a periodic table (exact on grid nodes,
/// band-limited in between).
pub struct TrigInterp {
    dims: Vec<usize>,
    // DFT coefficients, complex interleaved (re, im), row-major in k.
    coeffs: Vec<(f64, f64)>,
}

impl TrigInterp {
    pub fn new(table: &GridFunction) -> Result<Self> {
        let grid = table.grid();
        let dims = grid.dims().to_vec();
        let n_total = grid.node_count();
        let vals = table.values();
        let tau = std::f64::consts::TAU;
        let mut coeffs = vec![(0.0, 0.0); n_total];
        // Naive DFT: fine at table scale, runs once per model.
        match dims.len() {
            1 => {
                let n = dims[0];
                for (k, c) in coeffs.iter_mut().enumerate() {
                    let mut re = 0.0;
                    let mut im = 0.0;
                    for (j, &f) in vals.iter().enumerate() {
                        let ang = -tau * (k * j) as f64 / n as f64;
                        re += f * ang.cos();
                        im += f * ang.sin();
                    }
                    *c = (re / n as f64, im / n as f64);
                }
            }
            2 => {
                let (n0, n1) = (dims[0], dims[1]);
                for k0 in 0..n0 {
                    for k1 in 0..n1 {
                        let mut re = 0.0;
                        let mut im = 0.0;
                        for j0 in 0..n0 {
                            for j1 in 0..n1 {
                                let f = vals[j0 * n1 + j1];
                                let ang = -tau
                                    * ((k0 * j0) as f64 / n0 as f64 + (k1 * j1) as f64 / n1 as f64);
                                re += f * ang.cos();
                                im += f * ang.sin();
                            }
                        }
                        coeffs[k0 * n1 + k1] = (re / n_total as f64, im / n_total as f64);
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(TrigInterp { dims, coeffs })
    }

    /// Signed frequency for DFT bin k of n samples; the even-n Nyquist bin is
    /// split symmetrically via the weight returned alongside.
    fn freq(n: usize, k: usize) -> (f64, f64) {
        let n_i = n as i64;
        let k_i = k as i64;
        if 2 * k_i < n_i {
            (k_i as f64, 1.0)
        } else if 2 * k_i == n_i {
            (k_i as f64, 0.0) // cos-only at Nyquist: handled by cosine term below
        } else {
            ((k_i - n_i) as f64, 1.0)
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let tau = std::f64::consts::TAU;
        match self.dims.len() {
            1 => {
                let n = self.dims[0];
                let mut acc = 0.0;
                for (k, &(re, im)) in self.coeffs.iter().enumerate() {
                    let (f, w) = Self::freq(n, k);
                    let ang = tau * f * x[0];
                    if w == 0.0 {
                        // Nyquist: real cosine mode only.
                        acc += re * ang.cos();
                    } else {
                        acc += re * ang.cos() - im * ang.sin();
                    }
                }
                acc
            }
            2 => {
                let (n0, n1) = (self.dims[0], self.dims[1]);
                let mut acc = 0.0;
                for k0 in 0..n0 {
                    let (f0, w0) = Self::freq(n0, k0);
                    for k1 in 0..n1 {
                        let (f1, w1) = Self::freq(n1, k1);
                        let (re, im) = self.coeffs[k0 * n1 + k1];
                        let ang = tau * (f0 * x[0] + f1 * x[1]);
                        if w0 == 0.0 || w1 == 0.0 {
                            acc += re * ang.cos();
                        } else {
                            acc += re * ang.cos() - im * ang.sin();
                        }
                    }
                }
                acc
            }
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::registry;

    #[test]
    fn mechanical_evaluations() {
        let free = make_mechanical(1, |_x| 0.0, 1.0, "free").unwrap();
        assert_eq!(free.eval(&[0.3], &[2.0]), 2.0);
        let pend = registry::builtin("pendulum(1)").unwrap();
        assert!((pend.eval(&[0.0], &[1.0]) - 1.5).abs() < 1e-15);
        assert!(pend.eval(&[0.25], &[0.0]).abs() < 1e-15);
    }

    #[test]
    fn momentum_only_evaluations() {
        let quad = registry::builtin("quadratic").unwrap();
        assert_eq!(quad.eval(&[0.7], &[-1.0]), 0.5);
        let quartic = registry::builtin("quartic-p").unwrap();
        for x in [0.0, 0.3, 0.9] {
            assert_eq!(quartic.eval(&[x], &[1.0]), 0.75);
        }
    }

    #[test]
    fn validation_passes_builtin_and_fails_abs_p() {
        for spec in registry::builtin_examples() {
            let m = registry::builtin(spec).unwrap();
            assert!(m.is_tonelli(), "{spec} should validate, report {:?}", m.report());
        }
        let abs = HamiltonianModel::from_parts(
            1,
            Arc::new(|_x: &[f64], p: &[f64]| p[0].abs()),
            3.0,
            3.0,
            "abs-p",
        )
        .unwrap();
        let rep = abs.report();
        assert!(!rep.convexity_ok, "flat rays must fail convexity");
        assert!(!rep.passed);
    }

    #[test]
    fn quadratic_hessian_and_a_star() {
        let quad = registry::builtin("quadratic").unwrap();
        let rep = validate_tonelli(&quad, 16).unwrap();
        assert!((rep.min_fiber_hessian - 1.0).abs() < 1e-6);
        let pend = registry::builtin("pendulum(1)").unwrap();
        let rep = validate_tonelli(&pend, 16).unwrap();
        let a1 = rep
            .a_star
            .iter()
            .find(|(r, _)| (*r - 1.0).abs() < 1e-12)
            .expect("R=1 sampled")
            .1;
        assert!((a1 - 1.5).abs() < 1e-12, "A*(1) = {a1}");
    }

    #[test]
    fn compose_identity_is_bitwise_and_affine_evaluates() {
        let quad = registry::builtin("quadratic").unwrap();
        let same = compose_convex(&quad, |h| h, "id∘quadratic").unwrap();
        for k in 0..32 {
            let x = [k as f64 / 32.0];
            let p = [-3.0 + 6.0 * k as f64 / 31.0];
            assert_eq!(quad.eval(&x, &p).to_bits(), same.eval(&x, &p).to_bits());
        }
        let aff = compose_convex(&quad, |h| 2.0 * h + 3.0, "affine").unwrap();
        assert_eq!(aff.eval(&[0.0], &[1.0]), 4.0);
    }

    #[test]
    fn compose_quad_checker_accepts_pendulum_range() {
        // phi(h) = h + h^2/2 has phi' = 1 + h, positive on the sampled range
        // of the pendulum (the exact fiber minimum -1 falls between samples).
        let pend = registry::builtin("pendulum(1)").unwrap();
        let composed = compose_convex(&pend, |h| h + h * h / 2.0, "quad∘pendulum");
        assert!(composed.is_ok());
        // A genuinely decreasing phi is rejected.
        assert!(compose_convex(&pend, |h| -h, "neg").is_err());
    }

    #[test]
    fn bracket_momentum_only_vanishes_and_antisymmetry() {
        let g = registry::builtin("quadratic").unwrap();
        let h = registry::builtin("quartic-p").unwrap();
        for k in 0..5 {
            let x = [0.17 * k as f64];
            let p = [-2.0 + k as f64];
            let b = poisson_bracket(&g, &h, &x, &p, BRACKET_FD_STEP);
            assert!(b.abs() < 1e-8, "bracket {b}");
        }
        let g2 = registry::builtin("pendulum(1)").unwrap();
        let h2 = registry::builtin("pendulum(1,2)").unwrap();
        let b1 = poisson_bracket(&g2, &h2, &[0.125], &[1.0], BRACKET_FD_STEP);
        let b2 = poisson_bracket(&h2, &g2, &[0.125], &[1.0], BRACKET_FD_STEP);
        assert!((b1 + b2).abs() < 1e-10, "antisymmetry defect {}", (b1 + b2).abs());
        // Same model: bracket is FD noise only.
        let bb = poisson_bracket(&g2, &g2, &[0.3], &[0.7], BRACKET_FD_STEP);
        assert!(bb.abs() < 1e-8);
    }

    #[test]
    fn bracket_matches_analytic_value() {
        // G = p^2/2 + cos 4 pi x, H = p^2/2 + cos 2 pi x at (1/8, 1):
        // {G,H} = -4 pi + pi sqrt 2, magnitude ~ 8.123.
        let h = registry::builtin("pendulum(1)").unwrap();
        let g = registry::builtin("pendulum(1,2)").unwrap();
        let b = poisson_bracket(&g, &h, &[0.125], &[1.0], BRACKET_FD_STEP);
        let exact = -4.0 * std::f64::consts::PI + std::f64::consts::PI * 2.0_f64.sqrt();
        assert!(
            (b.abs() - exact.abs()).abs() < 1e-3,
            "bracket {b} vs analytic {exact}"
        );
    }

    #[test]
    fn shifted_model_evaluates_at_offset_momentum() {
        let pend = registry::builtin("pendulum(1)").unwrap();
        let c = CohomologyClass::new(vec![0.5]).unwrap();
        let shifted = pend.shifted(&c).unwrap();
        assert!((shifted.eval(&[0.2], &[1.0]) - pend.eval(&[0.2], &[1.5])).abs() < 1e-15);
        assert!(shifted.p_window() > pend.p_window());
    }

    #[test]
    fn trig_interpolation_reproduces_cosine() {
        let grid = TorusGrid::line(32).unwrap();
        let table = GridFunction::sample(grid, |x| (std::f64::consts::TAU * x[0]).cos()).unwrap();
        let m = make_mechanical_tabulated(&table, 1.0, "tab-pendulum").unwrap();
        for k in 0..97 {
            let x = k as f64 / 97.0;
            let want = 0.125 + (std::f64::consts::TAU * x).cos();
            assert!(
                (m.eval(&[x], &[0.5]) - want).abs() < 1e-10,
                "x={x}"
            );
        }
    }

    #[test]
    fn non_finite_potential_rejected() {
        let bad = make_mechanical(1, |x| if x[0] > 0.5 { f64::NAN } else { 0.0 }, 1.0, "bad");
        assert!(bad.is_err());
    }
}
