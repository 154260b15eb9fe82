//! Quantum characteristic functions.
//!
//! The fixed convention throughout the crate:
//!   phi(q, p) = e^{-(i/2) q.p} integral e^{i p.x} rho(x - q, x) dx,
//! the Weyl operators compose with the phase e^{(i/2)(-q1.p2 + p1.q2)}, the
//! Hilbert-Schmidt measure is (2 pi)^-d dq dp, and both means sit in the
//! gradient at the origin: m_x = -i d/dp phi(0,0), m_k = -i d/dq phi(0,0).
//! Under this convention shifting a state by a in position multiplies phi by
//! e^{+i p.a}.
//!
//! States with closed-form Gaussian exponents are carried analytically;
//! sampled grids appear only for transforms and for states with no closed
//! form.

use crate::error::{Error, Result};
use crate::grid::{fit_box, PhaseGrid};
use crate::noise::NoiseSpec;
use crate::quad::{par_sum, par_sum_array};
use nalgebra::{DMatrix, DVector};
use ndarray::ArrayD;
use num_complex::Complex64;
use std::sync::Arc;

pub type C64 = Complex64;

/// Decay threshold used when fitting integration boxes.
pub const BOX_TOL: f64 = 1e-10;
/// Default integration resolution per axis.
pub const BOX_N_1D: usize = 512;
pub const BOX_N_2D: usize = 64;

/// Gaussian characteristic function phi(z) = exp(-<z|Q z> + i l.z) with
/// z = (q_1..q_d, p_1..p_d), Q symmetric positive definite and l real.
/// Covers every Gaussian density operator in this crate, including all
/// diffusion-evolved ones.
#[derive(Debug, Clone)]
pub struct GaussianCharFn {
    dim: usize,
    quad: DMatrix<f64>,
    quad_inv: DMatrix<f64>,
    lin: DVector<f64>,
}

impl GaussianCharFn {
    pub fn new(dim: usize, quad: DMatrix<f64>, lin: DVector<f64>) -> Result<Self> {
        let n = 2 * dim;
        if quad.nrows() != n || quad.ncols() != n || lin.len() != n {
            return Err(Error::Domain("gaussian exponent dimension mismatch".into()));
        }
        let sym = 0.5 * (&quad + quad.transpose());
        let eig = sym.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(Error::Domain(
                "gaussian exponent matrix must be positive definite".into(),
            ));
        }
        let quad_inv = sym
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularMatrix("gaussian exponent matrix".into()))?;
        Ok(GaussianCharFn {
            dim,
            quad: sym,
            quad_inv,
            lin,
        })
    }

    /// phi(q, p) = exp(-(|q|^2 + |p|^2)/4).
    pub fn ground_state(dim: usize) -> Self {
        let n = 2 * dim;
        GaussianCharFn::new(dim, DMatrix::identity(n, n) * 0.25, DVector::zeros(n)).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn quad_matrix(&self) -> &DMatrix<f64> {
        &self.quad
    }

    pub fn linear_phase(&self) -> &DVector<f64> {
        &self.lin
    }

    fn z(&self, q: &[f64], p: &[f64]) -> DVector<f64> {
        let mut z = DVector::zeros(2 * self.dim);
        for i in 0..self.dim {
            z[i] = q[i];
            z[self.dim + i] = p[i];
        }
        z
    }

    pub fn eval(&self, q: &[f64], p: &[f64]) -> C64 {
        let z = self.z(q, p);
        let quad = (z.transpose() * &self.quad * &z)[(0, 0)];
        let phase = self.lin.dot(&z);
        C64::from_polar((-quad).exp(), phase)
    }

    pub fn eval_with_grad(&self, q: &[f64], p: &[f64]) -> (C64, Vec<C64>, Vec<C64>) {
        let z = self.z(q, p);
        let quad = (z.transpose() * &self.quad * &z)[(0, 0)];
        let phase = self.lin.dot(&z);
        let value = C64::from_polar((-quad).exp(), phase);
        let qz = &self.quad * &z;
        let mut dq = Vec::with_capacity(self.dim);
        let mut dp = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            dq.push((C64::new(-2.0 * qz[i], self.lin[i])) * value);
            dp.push((C64::new(-2.0 * qz[self.dim + i], self.lin[self.dim + i])) * value);
        }
        (value, dq, dp)
    }

    /// Closed-form Hilbert-Schmidt norm under the (2 pi)^-d measure.
    pub fn hs_norm(&self) -> f64 {
        let det = self.quad.determinant();
        (1.0 / (4.0f64.powi(self.dim as i32) * det.sqrt())).sqrt()
    }

    /// Closed-form Wigner function value; the Fourier pairing sends q -> v
    /// and p -> x, so the peak sits at (x, v) = (m_x, m_k).
    pub fn wigner(&self, x: &[f64], v: &[f64]) -> f64 {
        let d = self.dim;
        let mut u = DVector::zeros(2 * d);
        for i in 0..d {
            u[i] = v[i] - self.lin[i];
            u[d + i] = x[i] - self.lin[d + i];
        }
        let m = (u.transpose() * &self.quad_inv * &u)[(0, 0)];
        let det = self.quad.determinant();
        let norm = std::f64::consts::PI.powi(d as i32)
            / ((2.0 * std::f64::consts::PI).powi(2 * d as i32) * det.sqrt());
        norm * (-0.25 * m).exp()
    }

    /// Half-widths (q-axes then p-axes) such that |phi| = tol on the box
    /// boundary faces, from the closed-form exponent.
    pub fn box_hint(&self, tol: f64) -> Vec<f64> {
        let ln = (1.0 / tol).ln();
        (0..2 * self.dim)
            .map(|j| (ln * self.quad_inv[(j, j)]).sqrt() * 1.05)
            .collect()
    }

    /// Shift the state by `a` in position: phi -> e^{+i p.a} phi.
    pub fn shifted(&self, a: &[f64]) -> Self {
        let mut lin = self.lin.clone();
        for i in 0..self.dim {
            lin[self.dim + i] += a[i];
        }
        GaussianCharFn {
            lin,
            ..self.clone()
        }
    }

    /// Boost the state by `k` in momentum: phi -> e^{+i q.k} phi.
    pub fn boosted(&self, k: &[f64]) -> Self {
        let mut lin = self.lin.clone();
        for i in 0..self.dim {
            lin[i] += k[i];
        }
        GaussianCharFn {
            lin,
            ..self.clone()
        }
    }

    /// Exact evolution under diffusion-only noise: the free shear composes
    /// with the quadratic multiplier, staying in the Gaussian family.
    pub fn evolve_diffusion(&self, noise: &NoiseSpec, t: f64) -> Result<Self> {
        if !noise.jump().is_empty() {
            return Err(Error::Domain(
                "closed-form evolution requires an empty jump measure".into(),
            ));
        }
        let d = self.dim;
        let mut shear = DMatrix::identity(2 * d, 2 * d);
        for i in 0..d {
            shear[(i, d + i)] = t;
        }
        let mut g = DMatrix::zeros(2 * d, 2 * d);
        let axx = noise.block_xx();
        let axk = noise.block_xk();
        let akk = noise.block_kk();
        let qq = t * &axx;
        let qp = 0.5 * t * t * &axx + t * &axk;
        let pp = t.powi(3) / 3.0 * &axx + 0.5 * t * t * (&axk + axk.transpose()) + t * &akk;
        g.view_mut((0, 0), (d, d)).copy_from(&qq);
        g.view_mut((0, d), (d, d)).copy_from(&qp);
        g.view_mut((d, 0), (d, d)).copy_from(&qp.transpose());
        g.view_mut((d, d), (d, d)).copy_from(&pp);
        let quad = shear.transpose() * &self.quad * &shear + 0.5 * g;
        let lin = shear.transpose() * &self.lin;
        GaussianCharFn::new(d, quad, lin)
    }
}

/// Characteristic function evolved under a noise spec for time t:
/// phi_t(q, p) = exp(E(q, p, t)) phi_0(q + t p, p) with
/// E = integral_0^t l(q + u p, p) du, evaluated pointwise.
#[derive(Debug, Clone)]
pub struct EvolvedCharFn {
    pub inner: Box<CharFn>,
    pub noise: Arc<NoiseSpec>,
    pub t: f64,
}

impl EvolvedCharFn {
    fn sheared_inner_coords(&self, q: &[f64], p: &[f64]) -> Vec<f64> {
        q.iter().zip(p).map(|(&qi, &pi)| qi + self.t * pi).collect()
    }

    pub fn eval(&self, q: &[f64], p: &[f64]) -> C64 {
        let qs = self.sheared_inner_coords(q, p);
        let e = self
            .noise
            .integrated_exponent(q, p, self.t)
            .expect("t >= 0 enforced at construction");
        self.inner.eval(&qs, p) * e.exp()
    }

    pub fn eval_with_grad(&self, q: &[f64], p: &[f64]) -> Result<(C64, Vec<C64>, Vec<C64>)> {
        let d = q.len();
        let qs = self.sheared_inner_coords(q, p);
        let mut gq = vec![0.0; d];
        let mut gp = vec![0.0; d];
        let e = self
            .noise
            .integrated_exponent_and_grad(q, p, self.t, &mut gq, &mut gp)?;
        let mult = e.exp();
        let (v0, dq0, dp0) = self.inner.eval_with_grad(&qs, p)?;
        let value = mult * v0;
        let mut dq = Vec::with_capacity(d);
        let mut dp = Vec::with_capacity(d);
        for i in 0..d {
            // chain rule: inner sees (q + t p, p)
            dq.push(mult * (dq0[i] + gq[i] * v0));
            dp.push(mult * (self.t * dq0[i] + dp0[i] + gp[i] * v0));
        }
        Ok((value, dq, dp))
    }
}

/// Complex samples on a phase grid, axes ordered q_1..q_d, p_1..p_d.
#[derive(Debug, Clone)]
pub struct SampledCharFn {
    pub grid: PhaseGrid,
    pub data: ArrayD<C64>,
}

impl SampledCharFn {
    pub fn new(grid: PhaseGrid, data: ArrayD<C64>) -> Result<Self> {
        if data.shape() != grid.shape().as_slice() {
            return Err(Error::RangeMismatch(format!(
                "sample shape {:?} does not match grid shape {:?}",
                data.shape(),
                grid.shape()
            )));
        }
        Ok(SampledCharFn { grid, data })
    }

    /// Sample an analytic characteristic function on a grid.
    pub fn from_charfn(phi: &CharFn, grid: &PhaseGrid) -> Result<Self> {
        if phi.dim() != grid.dim {
            return Err(Error::Domain("dimension mismatch".into()));
        }
        let n = grid.len();
        let values: Vec<C64> = (0..n)
            .map(|flat| {
                let (q, p) = grid.coords(flat);
                phi.eval(&q, &p)
            })
            .collect();
        let data = ArrayD::from_shape_vec(grid.shape(), values).expect("shape checked");
        Ok(SampledCharFn {
            grid: grid.clone(),
            data,
        })
    }

    pub fn value_at_origin(&self) -> C64 {
        let idx: Vec<usize> = self.grid.axes.iter().map(|a| a.origin_index()).collect();
        self.data[idx.as_slice()]
    }

    /// Largest |phi| over the outermost grid layer.
    pub fn boundary_max(&self) -> f64 {
        let shape = self.grid.shape();
        let mut best = 0.0f64;
        for (idx, v) in self.data.indexed_iter() {
            let on_edge = (0..shape.len()).any(|a| idx[a] == 0 || idx[a] == shape[a] - 1);
            if on_edge {
                best = best.max(v.norm());
            }
        }
        best
    }

    /// Maximum Hermitian-symmetry violation |phi(-z) - conj(phi(z))|.
    /// The reflection of index j is n - j, skipping the j = 0 row which has
    /// no partner on an even grid.
    pub fn hermitian_residue(&self) -> f64 {
        let shape = self.grid.shape();
        let mut worst = 0.0f64;
        for (idx, v) in self.data.indexed_iter() {
            if (0..shape.len()).any(|a| idx[a] == 0) {
                continue;
            }
            let refl: Vec<usize> = (0..shape.len()).map(|a| shape[a] - idx[a]).collect();
            let w = self.data[refl.as_slice()];
            worst = worst.max((w - v.conj()).norm());
        }
        worst
    }

    pub fn hs_norm(&self) -> f64 {
        let cell = self.grid.cell_volume();
        let measure = (2.0 * std::f64::consts::PI).powi(self.grid.dim as i32);
        let sum: f64 = self.data.iter().map(|v| v.norm_sqr()).sum();
        (sum * cell / measure).sqrt()
    }
}

type EvalFn = dyn Fn(&[f64], &[f64]) -> C64 + Send + Sync;
#[allow(clippy::type_complexity)]
type GradFn = dyn Fn(&[f64], &[f64]) -> (Vec<C64>, Vec<C64>) + Send + Sync;

/// Analytic callable with an optional registered gradient.
pub struct CustomCharFn {
    pub dim: usize,
    pub eval: Box<EvalFn>,
    pub grad: Option<Box<GradFn>>,
    pub hint: Vec<f64>,
}

impl std::fmt::Debug for CustomCharFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CustomCharFn")
            .field("dim", &self.dim)
            .field("has_grad", &self.grad.is_some())
            .finish()
    }
}

/// A characteristic function: analytic whenever a closed form exists,
/// sampled otherwise.
#[derive(Debug, Clone)]
pub enum CharFn {
    Gaussian(GaussianCharFn),
    Evolved(EvolvedCharFn),
    Mixture(Vec<(f64, CharFn)>),
    Sampled(SampledCharFn),
    Custom(Arc<CustomCharFn>),
}

impl CharFn {
    pub fn gaussian(g: GaussianCharFn) -> Self {
        CharFn::Gaussian(g)
    }

    pub fn ground_state(dim: usize) -> Self {
        CharFn::Gaussian(GaussianCharFn::ground_state(dim))
    }

    pub fn custom(c: CustomCharFn) -> Self {
        CharFn::Custom(Arc::new(c))
    }

    /// Convex mixture of states (weights should sum to one for a state).
    pub fn mixture(parts: Vec<(f64, CharFn)>) -> Self {
        CharFn::Mixture(parts)
    }

    pub fn dim(&self) -> usize {
        match self {
            CharFn::Gaussian(g) => g.dim(),
            CharFn::Evolved(e) => e.inner.dim(),
            CharFn::Mixture(parts) => parts[0].1.dim(),
            CharFn::Sampled(s) => s.grid.dim,
            CharFn::Custom(c) => c.dim,
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, CharFn::Sampled(_))
    }

    pub fn has_gradient(&self) -> bool {
        match self {
            CharFn::Gaussian(_) | CharFn::Evolved(_) => true,
            CharFn::Mixture(parts) => parts.iter().all(|(_, f)| f.has_gradient()),
            CharFn::Sampled(_) => false,
            CharFn::Custom(c) => c.grad.is_some(),
        }
    }

    /// Pointwise evaluation. Sampled functions evaluate only at their own
    /// grid points.
    pub fn eval(&self, q: &[f64], p: &[f64]) -> C64 {
        match self {
            CharFn::Gaussian(g) => g.eval(q, p),
            CharFn::Evolved(e) => e.eval(q, p),
            CharFn::Mixture(parts) => parts.iter().map(|(w, f)| *w * f.eval(q, p)).sum(),
            CharFn::Custom(c) => (c.eval)(q, p),
            CharFn::Sampled(s) => {
                let mut idx = Vec::with_capacity(2 * s.grid.dim);
                for (vals, axes) in [(q, s.grid.q_axes()), (p, s.grid.p_axes())] {
                    for (v, ax) in vals.iter().zip(axes) {
                        let j = ((v + ax.half_width) / ax.spacing()).round();
                        assert!(
                            (v - ax.point(j as usize)).abs() <= 1e-9 * ax.spacing().max(1.0),
                            "sampled characteristic functions evaluate only at grid points"
                        );
                        idx.push(j as usize);
                    }
                }
                s.data[idx.as_slice()]
            }
        }
    }

    /// Value and gradient (d/dq, d/dp) at a point.
    pub fn eval_with_grad(&self, q: &[f64], p: &[f64]) -> Result<(C64, Vec<C64>, Vec<C64>)> {
        match self {
            CharFn::Gaussian(g) => Ok(g.eval_with_grad(q, p)),
            CharFn::Evolved(e) => e.eval_with_grad(q, p),
            CharFn::Mixture(parts) => {
                let d = self.dim();
                let mut value = C64::default();
                let mut dq = vec![C64::default(); d];
                let mut dp = vec![C64::default(); d];
                for (w, f) in parts {
                    let (v, gq, gp) = f.eval_with_grad(q, p)?;
                    value += *w * v;
                    for i in 0..d {
                        dq[i] += *w * gq[i];
                        dp[i] += *w * gp[i];
                    }
                }
                Ok((value, dq, dp))
            }
            CharFn::Custom(c) => {
                let g = c.grad.as_ref().ok_or_else(|| {
                    Error::Unsupported(
                        "analytic characteristic function has no registered derivative".into(),
                    )
                })?;
                let (dq, dp) = g(q, p);
                Ok(((c.eval)(q, p), dq, dp))
            }
            CharFn::Sampled(_) => Err(Error::Unsupported(
                "use the spectral gradient for sampled characteristic functions".into(),
            )),
        }
    }

    /// Gradient at the origin, (d/dq phi, d/dp phi)(0, 0).
    pub fn origin_gradient(&self) -> Result<(Vec<C64>, Vec<C64>)> {
        let d = self.dim();
        let zero = vec![0.0; d];
        let (_, dq, dp) = self.eval_with_grad(&zero, &zero)?;
        Ok((dq, dp))
    }

    /// Mean position and momentum: m_x = -i d/dp phi(0,0), m_k = -i d/dq.
    pub fn means(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (dq, dp) = self.origin_gradient()?;
        let m_x = dp.iter().map(|c| c.im).collect();
        let m_k = dq.iter().map(|c| c.im).collect();
        Ok((m_x, m_k))
    }

    /// Suggested box half-widths (q-axes then p-axes) for integration.
    pub fn scale_hint(&self) -> Vec<f64> {
        match self {
            CharFn::Gaussian(g) => g.box_hint(BOX_TOL),
            CharFn::Evolved(e) => {
                let inner = e.inner.scale_hint();
                let d = e.inner.dim();
                let mut hint = inner.clone();
                for i in 0..d {
                    hint[i] = inner[i] + e.t * inner[d + i];
                }
                hint
            }
            CharFn::Mixture(parts) => {
                let d = 2 * self.dim();
                let mut hint = vec![0.0f64; d];
                for (_, f) in parts {
                    for (h, g) in hint.iter_mut().zip(f.scale_hint()) {
                        *h = f64::max(*h, g);
                    }
                }
                hint
            }
            CharFn::Sampled(s) => s.grid.axes.iter().map(|a| a.half_width).collect(),
            CharFn::Custom(c) => c.hint.clone(),
        }
    }

    /// Check the state invariants: phi(0,0) = 1 within 1e-9 and Hermitian
    /// symmetry at a panel of points.
    pub fn check_state(&self) -> Result<()> {
        let d = self.dim();
        let zero = vec![0.0; d];
        let v0 = self.eval(&zero, &zero);
        if (v0 - C64::new(1.0, 0.0)).norm() > 1e-9 {
            return Err(Error::Domain(format!(
                "phi(0,0) = {v0} is not 1 within 1e-9"
            )));
        }
        if let CharFn::Sampled(s) = self {
            if s.hermitian_residue() > 1e-9 {
                return Err(Error::Domain(
                    "sampled state violates Hermitian symmetry".into(),
                ));
            }
            return Ok(());
        }
        let hint = self.scale_hint();
        for step in 1..=4 {
            let frac = step as f64 / 5.0;
            let q: Vec<f64> = (0..d).map(|i| frac * hint[i] * 0.5).collect();
            let p: Vec<f64> = (0..d).map(|i| -frac * hint[d + i] * 0.4).collect();
            let plus = self.eval(&q, &p);
            let nq: Vec<f64> = q.iter().map(|v| -v).collect();
            let np: Vec<f64> = p.iter().map(|v| -v).collect();
            let minus = self.eval(&nq, &np);
            if (minus - plus.conj()).norm() > 1e-9 {
                return Err(Error::Domain(
                    "state violates Hermitian symmetry phi(-q,-p) = conj(phi(q,p))".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Integration box + resolution for an analytic characteristic function.
pub fn integration_box(phi: &CharFn) -> Result<crate::grid::IntegrationBox> {
    let d = phi.dim();
    let hint = phi.scale_hint();
    let f = |z: &[f64]| phi.eval(&z[..d], &z[d..]).norm();
    let half_widths = fit_box(&hint, BOX_TOL, 4, &f)?;
    let n = if d == 1 { BOX_N_1D } else { BOX_N_2D };
    Ok(crate::grid::IntegrationBox {
        half_widths,
        n_per_axis: n,
    })
}

/// Hilbert-Schmidt norm ||rho||_2 = ((2 pi)^-d integral |phi|^2)^(1/2).
/// Analytic inputs integrate over a fitted box; sampled inputs use their own
/// grid (with a decay check at the boundary).
pub fn hs_norm(phi: &CharFn) -> Result<f64> {
    match phi {
        CharFn::Sampled(s) => {
            if s.boundary_max() > BOX_TOL.sqrt() {
                return Err(Error::Truncation(
                    "sampled characteristic function has not decayed at the grid boundary".into(),
                ));
            }
            Ok(s.hs_norm())
        }
        _ => {
            let bx = integration_box(phi)?;
            let d = phi.dim();
            let cell = bx.cell_volume();
            let measure = (2.0 * std::f64::consts::PI).powi(d as i32);
            let n = bx.len();
            let sum = par_sum(n, |flat| {
                let mut z = [0.0f64; 6];
                let z = &mut z[..2 * d];
                bx.coords(flat, z);
                phi.eval(&z[..d], &z[d..]).norm_sqr()
            });
            Ok((sum * cell / measure).sqrt())
        }
    }
}

/// ||phi_a - phi_b||_2 over a common fitted box (analytic inputs).
pub fn hs_distance(a: &CharFn, b: &CharFn) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Domain("dimension mismatch".into()));
    }
    let d = a.dim();
    let box_a = integration_box(a)?;
    let box_b = integration_box(b)?;
    let half_widths: Vec<f64> = box_a
        .half_widths
        .iter()
        .zip(&box_b.half_widths)
        .map(|(x, y)| x.max(*y))
        .collect();
    let bx = crate::grid::IntegrationBox {
        half_widths,
        n_per_axis: box_a.n_per_axis,
    };
    let cell = bx.cell_volume();
    let measure = (2.0 * std::f64::consts::PI).powi(d as i32);
    let sum = par_sum(bx.len(), |flat| {
        let mut z = [0.0f64; 6];
        let z = &mut z[..2 * d];
        bx.coords(flat, z);
        (a.eval(&z[..d], &z[d..]) - b.eval(&z[..d], &z[d..])).norm_sqr()
    });
    Ok((sum * cell / measure).sqrt())
}

/// Fused phase-space moment sweep used by the coherence index: one pass
/// accumulating |phi|^2, |q|^2 |phi|^2, |p|^2 |phi|^2 and the centered
/// gradient norms, sharing every evaluation.
pub struct MomentSweep {
    pub norm_sq: f64,
    pub q_weighted: f64,
    pub p_weighted: f64,
    pub grad_p_centered: f64,
    pub grad_q_centered: f64,
    /// max |phi| seen on the box boundary layer, for truncation checks
    pub boundary: f64,
}

pub fn moment_sweep(
    phi: &CharFn,
    v_q: &[C64],
    v_p: &[C64],
) -> Result<(MomentSweep, crate::grid::IntegrationBox)> {
    let d = phi.dim();
    match phi {
        CharFn::Sampled(_) => Err(Error::Unsupported(
            "moment sweep over sampled data uses the spectral path".into(),
        )),
        _ => {
            let bx = integration_box(phi)?;
            let n = bx.len();
            let sums = par_sum_array::<5>(n, |flat| {
                let mut z = [0.0f64; 6];
                let z = &mut z[..2 * d];
                bx.coords(flat, z);
                let (q, p) = z.split_at(d);
                let (value, dq, dp) = phi
                    .eval_with_grad(q, p)
                    .expect("gradient availability checked by caller");
                let nsq = value.norm_sqr();
                let q2: f64 = q.iter().map(|x| x * x).sum();
                let p2: f64 = p.iter().map(|x| x * x).sum();
                let mut gp = 0.0;
                let mut gq = 0.0;
                for i in 0..d {
                    gp += (dp[i] - v_p[i] * value).norm_sqr();
                    gq += (dq[i] - v_q[i] * value).norm_sqr();
                }
                [nsq, q2 * nsq, p2 * nsq, gp, gq]
            });
            let cell = bx.cell_volume();
            let measure = (2.0 * std::f64::consts::PI).powi(d as i32);
            let scale = cell / measure;
            let f = |z: &[f64]| phi.eval(&z[..d], &z[d..]).norm();
            let boundary = crate::grid::boundary_max(&bx.half_widths, &f);
            Ok((
                MomentSweep {
                    norm_sq: sums[0] * scale,
                    q_weighted: sums[1] * scale,
                    p_weighted: sums[2] * scale,
                    grad_p_centered: sums[3] * scale,
                    grad_q_centered: sums[4] * scale,
                    boundary,
                },
                bx,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ground_state_closed_forms() {
        let g = GaussianCharFn::ground_state(1);
        let v = g.eval(&[1.0], &[0.5]);
        assert_relative_eq!(v.re, (-(1.0f64 + 0.25) / 4.0).exp(), epsilon = 1e-12);
        assert_relative_eq!(v.im, 0.0);
        assert_relative_eq!(g.hs_norm(), 1.0, epsilon = 1e-12);
        // Wigner peak value 1/pi at the origin
        assert_relative_eq!(
            g.wigner(&[0.0], &[0.0]),
            1.0 / std::f64::consts::PI,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            g.wigner(&[1.0], &[-0.5]),
            (1.0 / std::f64::consts::PI) * (-1.25f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn numeric_hs_norm_matches_closed_form() {
        let g = CharFn::ground_state(1);
        assert_relative_eq!(hs_norm(&g).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = GaussianCharFn::ground_state(1).shifted(&[0.7]).boosted(&[-0.3]);
        let phi = CharFn::Gaussian(g);
        let (q, p) = ([0.4], [0.9]);
        let (_, dq, dp) = phi.eval_with_grad(&q, &p).unwrap();
        let h = 1e-6;
        let fd_q = (phi.eval(&[q[0] + h], &p) - phi.eval(&[q[0] - h], &p)) / (2.0 * h);
        let fd_p = (phi.eval(&q, &[p[0] + h]) - phi.eval(&q, &[p[0] - h])) / (2.0 * h);
        assert!((dq[0] - fd_q).norm() < 1e-8);
        assert!((dp[0] - fd_p).norm() < 1e-8);
    }

    #[test]
    fn means_read_off_displacements() {
        let g = GaussianCharFn::ground_state(1).shifted(&[1.5]).boosted(&[-0.25]);
        let phi = CharFn::Gaussian(g);
        let (m_x, m_k) = phi.means().unwrap();
        assert_relative_eq!(m_x[0], 1.5, epsilon = 1e-12);
        assert_relative_eq!(m_k[0], -0.25, epsilon = 1e-12);
        phi.check_state().unwrap();
    }

    #[test]
    fn mixture_of_separated_states_has_reduced_norm() {
        let a = GaussianCharFn::ground_state(1);
        let b = a.shifted(&[8.0]);
        let mix = CharFn::mixture(vec![
            (0.5, CharFn::Gaussian(a)),
            (0.5, CharFn::Gaussian(b)),
        ]);
        mix.check_state().unwrap();
        let n = hs_norm(&mix).unwrap();
        assert_relative_eq!(n, 0.5f64.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let z = CharFn::custom(CustomCharFn {
            dim: 1,
            eval: Box::new(|_, _| C64::default()),
            grad: None,
            hint: vec![1.0, 1.0],
        });
        // box fitting trivially succeeds on the zero function
        assert_relative_eq!(hs_norm(&z).unwrap(), 0.0);
    }
}
