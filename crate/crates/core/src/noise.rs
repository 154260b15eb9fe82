//! Environment specification: diffusion matrix, jump measure, the Lévy
//! exponent of the phase-space kick process, and its time-integrated form.
//!
//! Conventions (printed by the CLI and carried in output headers):
//! the first slot of the quadratic form pairs with the x-blocks of the
//! diffusion matrix, i.e. l(q, p) = -1/2 <(q,p)|A(q,p)> + psi(q, p) with
//! psi(q, p) = sum w (cos(q.k + p.x) - 1). Under this pairing the x,x block
//! drives the momentum marginal of the classical kick process.

use crate::error::{Error, Result};
use crate::quad;
use nalgebra::{DMatrix, DVector};

/// One jump atom: a phase-space kick (x, k) with a positive rate weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    Empty,
    Atoms,
    MomentumOnly,
    PositionOnly,
    GridDensity,
}

/// Jump measure with origin symmetry, held as an atom list. Densities are
/// discretized to atoms by midpoint cells (weight includes the cell volume)
/// so one evaluation path serves the exponent, the moments, and sampling.
#[derive(Debug, Clone)]
pub struct JumpMeasure {
    dim: usize,
    kind: JumpKind,
    atoms: Vec<Atom>,
    /// True when the measure came from a sampled density; selects the
    /// tighter quadratic bound (no epsilon-slack) in the Taylor check.
    density_type: bool,
}

impl JumpMeasure {
    pub fn empty(dim: usize) -> Self {
        JumpMeasure {
            dim,
            kind: JumpKind::Empty,
            atoms: Vec::new(),
            density_type: false,
        }
    }

    /// General atom list; must already be symmetric about the origin.
    pub fn atoms(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        let m = JumpMeasure {
            dim,
            kind: JumpKind::Atoms,
            atoms,
            density_type: false,
        };
        m.validate()?;
        Ok(m)
    }

    /// Store each listed atom together with its mirror image; both pair
    /// members carry the given weight.
    pub fn symmetric_pairs(dim: usize, half: Vec<Atom>) -> Result<Self> {
        let mut atoms = Vec::with_capacity(2 * half.len());
        for a in half {
            let mirror = Atom {
                x: a.x.iter().map(|v| -v).collect(),
                k: a.k.iter().map(|v| -v).collect(),
                weight: a.weight,
            };
            atoms.push(a);
            atoms.push(mirror);
        }
        JumpMeasure::atoms(dim, atoms)
    }

    /// mu = delta(x) nu(k) with atomic nu.
    pub fn momentum_atoms(dim: usize, kicks: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let atoms = kicks
            .into_iter()
            .map(|(k, weight)| Atom {
                x: vec![0.0; dim],
                k,
                weight,
            })
            .collect();
        let mut m = JumpMeasure::atoms(dim, atoms)?;
        m.kind = JumpKind::MomentumOnly;
        Ok(m)
    }

    /// mu = nu(x) delta(k) with atomic nu.
    pub fn position_atoms(dim: usize, kicks: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let atoms = kicks
            .into_iter()
            .map(|(x, weight)| Atom {
                k: vec![0.0; dim],
                x,
                weight,
            })
            .collect();
        let mut m = JumpMeasure::atoms(dim, atoms)?;
        m.kind = JumpKind::PositionOnly;
        Ok(m)
    }

    /// mu = delta(x) nu(k), nu a sampled density on a symmetric 1-d grid
    /// (midpoint discretization; weights carry the cell volume).
    pub fn momentum_density_1d(points: &[f64], values: &[f64]) -> Result<Self> {
        let atoms = density_atoms_1d(points, values, /*momentum=*/ true)?;
        let mut m = JumpMeasure::atoms(1, atoms)?;
        m.kind = JumpKind::MomentumOnly;
        m.density_type = true;
        Ok(m)
    }

    pub fn position_density_1d(points: &[f64], values: &[f64]) -> Result<Self> {
        let atoms = density_atoms_1d(points, values, /*momentum=*/ false)?;
        let mut m = JumpMeasure::atoms(1, atoms)?;
        m.kind = JumpKind::PositionOnly;
        m.density_type = true;
        Ok(m)
    }

    /// Sampled density on a 2d-dimensional box (d = 1: the (x, k) plane).
    pub fn grid_density(
        dim: usize,
        axes: &[(f64, usize)],
        density: &dyn Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        if axes.len() != 2 * dim {
            return Err(Error::Domain(format!(
                "grid density needs {} axes, got {}",
                2 * dim,
                axes.len()
            )));
        }
        let mut atoms = Vec::new();
        let counts: Vec<usize> = axes.iter().map(|&(_, n)| n).collect();
        let total: usize = counts.iter().product();
        let mut cell = 1.0;
        for &(l, n) in axes {
            cell *= 2.0 * l / n as f64;
        }
        let mut z = vec![0.0; 2 * dim];
        for flat in 0..total {
            let mut rem = flat;
            for a in (0..2 * dim).rev() {
                let j = rem % counts[a];
                rem /= counts[a];
                let (l, n) = axes[a];
                let dx = 2.0 * l / n as f64;
                z[a] = -l + (j as f64 + 0.5) * dx;
            }
            let w = density(&z) * cell;
            if w > 0.0 {
                atoms.push(Atom {
                    x: z[..dim].to_vec(),
                    k: z[dim..].to_vec(),
                    weight: w,
                });
            }
        }
        let mut m = JumpMeasure {
            dim,
            kind: JumpKind::GridDensity,
            atoms,
            density_type: true,
        };
        m.validate()?;
        m.kind = JumpKind::GridDensity;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        for a in &self.atoms {
            if a.x.len() != self.dim || a.k.len() != self.dim {
                return Err(Error::Domain("atom dimension mismatch".into()));
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::Domain(format!("atom weight must be > 0, got {}", a.weight)));
            }
        }
        // origin symmetry: every atom needs a mirror partner of equal weight
        let tol = 1e-9;
        for a in &self.atoms {
            let mirrored = self.atoms.iter().any(|b| {
                (a.weight - b.weight).abs() <= tol * a.weight.max(1.0)
                    && a.x.iter().zip(&b.x).all(|(u, v)| (u + v).abs() <= tol)
                    && a.k.iter().zip(&b.k).all(|(u, v)| (u + v).abs() <= tol)
            });
            if !mirrored {
                return Err(Error::Domain(format!(
                    "jump measure is not symmetric about the origin: atom x={:?} k={:?} \
                     has no mirror partner",
                    a.x, a.k
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> JumpKind {
        self.kind
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms_slice(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_density_type(&self) -> bool {
        self.density_type
    }

    /// Total jump rate (the measure's mass).
    pub fn total_rate(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// psi(q, p) = integral (cos(q.k + p.x) - 1) d mu; <= 0, zero at origin.
    pub fn exponent(&self, q: &[f64], p: &[f64]) -> f64 {
        let mut acc = 0.0;
        for a in &self.atoms {
            let arg = dot(q, &a.k) + dot(p, &a.x);
            acc += a.weight * (arg.cos() - 1.0);
        }
        acc
    }

    /// Gradient of psi in (q, p).
    pub fn exponent_grad(&self, q: &[f64], p: &[f64], dq: &mut [f64], dp: &mut [f64]) {
        dq.fill(0.0);
        dp.fill(0.0);
        for a in &self.atoms {
            let arg = dot(q, &a.k) + dot(p, &a.x);
            let s = -a.weight * arg.sin();
            for i in 0..self.dim {
                dq[i] += s * a.k[i];
                dp[i] += s * a.x[i];
            }
        }
    }

    /// Second moments in the literal (x, k) block order:
    /// B = integral (x,k) (x,k)^T d mu.
    pub fn second_moment_matrix(&self) -> DMatrix<f64> {
        let n = 2 * self.dim;
        let mut b = DMatrix::zeros(n, n);
        for a in &self.atoms {
            let mut v = DVector::zeros(n);
            for i in 0..self.dim {
                v[i] = a.x[i];
                v[self.dim + i] = a.k[i];
            }
            b += a.weight * &v * v.transpose();
        }
        b
    }

    /// Second moments in the pairing order of the exponent argument (k, x):
    /// the negated Hessian of psi at the origin.
    pub fn pair_moment_matrix(&self) -> DMatrix<f64> {
        let n = 2 * self.dim;
        let mut b = DMatrix::zeros(n, n);
        for a in &self.atoms {
            let mut v = DVector::zeros(n);
            for i in 0..self.dim {
                v[i] = a.k[i];
                v[self.dim + i] = a.x[i];
            }
            b += a.weight * &v * v.transpose();
        }
        b
    }

    /// d x d second moment of momentum kicks, sum w k k^T: the block that
    /// augments the x,x diffusion block in the decoherence laws.
    pub fn momentum_kick_moment(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.dim, self.dim);
        for a in &self.atoms {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    b[(i, j)] += a.weight * a.k[i] * a.k[j];
                }
            }
        }
        b
    }

    /// d x d second moment of position kicks, sum w x x^T.
    pub fn position_kick_moment(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.dim, self.dim);
        for a in &self.atoms {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    b[(i, j)] += a.weight * a.x[i] * a.x[j];
                }
            }
        }
        b
    }
}

fn density_atoms_1d(points: &[f64], values: &[f64], momentum: bool) -> Result<Vec<Atom>> {
    if points.len() != values.len() || points.len() < 2 {
        return Err(Error::Domain("density grid needs matching points/values".into()));
    }
    let dx = points[1] - points[0];
    let mut atoms = Vec::new();
    for (&pt, &val) in points.iter().zip(values) {
        if val < 0.0 {
            return Err(Error::Domain("density values must be nonnegative".into()));
        }
        if val * dx > 0.0 {
            let (x, k) = if momentum {
                (vec![0.0], vec![pt])
            } else {
                (vec![pt], vec![0.0])
            };
            atoms.push(Atom {
                x,
                k,
                weight: val * dx,
            });
        }
    }
    Ok(atoms)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full environment: diffusion matrix (2d x 2d, PSD) plus jump measure.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    dim: usize,
    diffusion: DMatrix<f64>,
    jump: JumpMeasure,
}

impl NoiseSpec {
    pub fn new(dim: usize, diffusion: DMatrix<f64>, jump: JumpMeasure) -> Result<Self> {
        if diffusion.nrows() != 2 * dim || diffusion.ncols() != 2 * dim {
            return Err(Error::Domain(format!(
                "diffusion matrix must be {n} x {n} for d = {dim}",
                n = 2 * dim
            )));
        }
        if jump.dim() != dim {
            return Err(Error::Domain("jump measure dimension mismatch".into()));
        }
        let norm = diffusion.norm().max(1.0);
        for i in 0..2 * dim {
            for j in 0..i {
                if (diffusion[(i, j)] - diffusion[(j, i)]).abs() > 1e-12 * norm {
                    return Err(Error::Domain("diffusion matrix must be symmetric".into()));
                }
            }
        }
        let sym = 0.5 * (&diffusion + diffusion.transpose());
        let eig = sym.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l < -1e-10 * norm) {
            return Err(Error::Domain(
                "diffusion matrix must be positive semidefinite".into(),
            ));
        }
        Ok(NoiseSpec {
            dim,
            diffusion: sym,
            jump,
        })
    }

    /// Diffusion-only noise in dimension d.
    pub fn diffusion_only(dim: usize, diffusion: DMatrix<f64>) -> Result<Self> {
        NoiseSpec::new(dim, diffusion, JumpMeasure::empty(dim))
    }

    /// Diffusion matrix with only the x,x block set to `m`.
    pub fn xx_block(dim: usize, m: DMatrix<f64>) -> Result<Self> {
        let mut a = DMatrix::zeros(2 * dim, 2 * dim);
        a.view_mut((0, 0), (dim, dim)).copy_from(&m);
        NoiseSpec::diffusion_only(dim, a)
    }

    /// Diffusion matrix with only the k,k block set to `m`.
    pub fn kk_block(dim: usize, m: DMatrix<f64>) -> Result<Self> {
        let mut a = DMatrix::zeros(2 * dim, 2 * dim);
        a.view_mut((dim, dim), (dim, dim)).copy_from(&m);
        NoiseSpec::diffusion_only(dim, a)
    }

    pub fn zero(dim: usize) -> Self {
        NoiseSpec {
            dim,
            diffusion: DMatrix::zeros(2 * dim, 2 * dim),
            jump: JumpMeasure::empty(dim),
        }
    }

    pub fn with_jump(mut self, jump: JumpMeasure) -> Result<Self> {
        if jump.dim() != self.dim {
            return Err(Error::Domain("jump measure dimension mismatch".into()));
        }
        self.jump = jump;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.diffusion
    }

    pub fn jump(&self) -> &JumpMeasure {
        &self.jump
    }

    pub fn block_xx(&self) -> DMatrix<f64> {
        self.diffusion.view((0, 0), (self.dim, self.dim)).into()
    }

    pub fn block_xk(&self) -> DMatrix<f64> {
        self.diffusion.view((0, self.dim), (self.dim, self.dim)).into()
    }

    pub fn block_kk(&self) -> DMatrix<f64> {
        self.diffusion
            .view((self.dim, self.dim), (self.dim, self.dim))
            .into()
    }

    /// A^{x,x} + sum w k k^T: the effective momentum-kick strength entering
    /// the t^-2 law and the relaxation family.
    pub fn momentum_kick_matrix(&self) -> DMatrix<f64> {
        self.block_xx() + self.jump.momentum_kick_moment()
    }

    /// A^{k,k} + sum w x x^T: the effective position-kick strength for the
    /// t^-1/2 law.
    pub fn position_kick_matrix(&self) -> DMatrix<f64> {
        self.block_kk() + self.jump.position_kick_moment()
    }

    /// <(q,p) | A (q,p)> with the q-slot paired to the x-blocks.
    pub fn quadratic_form(&self, q: &[f64], p: &[f64]) -> f64 {
        let d = self.dim;
        let mut z = DVector::zeros(2 * d);
        for i in 0..d {
            z[i] = q[i];
            z[d + i] = p[i];
        }
        (z.transpose() * &self.diffusion * &z)[(0, 0)]
    }

    /// Levy exponent l(q, p) = -1/2 <(q,p)|A(q,p)> + psi(q, p); always <= 0.
    pub fn levy_exponent(&self, q: &[f64], p: &[f64]) -> f64 {
        -0.5 * self.quadratic_form(q, p) + self.jump.exponent(q, p)
    }

    /// Closed form of the path integral of the quadratic form,
    /// integral_0^t <(q+up, p) | A (q+up, p)> du, exact for all blocks.
    pub fn integrated_quadratic(&self, q: &[f64], p: &[f64], t: f64) -> f64 {
        let axx = self.block_xx();
        let axk = self.block_xk();
        let akk = self.block_kk();
        let qv = DVector::from_column_slice(q);
        let pv = DVector::from_column_slice(p);
        let q_axx_q = (qv.transpose() * &axx * &qv)[(0, 0)];
        let q_axx_p = (qv.transpose() * &axx * &pv)[(0, 0)];
        let p_axx_p = (pv.transpose() * &axx * &pv)[(0, 0)];
        let q_axk_p = (qv.transpose() * &axk * &pv)[(0, 0)];
        let p_axk_p = (pv.transpose() * &axk * &pv)[(0, 0)];
        let p_akk_p = (pv.transpose() * &akk * &pv)[(0, 0)];
        t * q_axx_q
            + t * t * q_axx_p
            + t.powi(3) / 3.0 * p_axx_p
            + 2.0 * t * q_axk_p
            + t * t * p_axk_p
            + t * p_akk_p
    }

    /// Path integral of the jump exponent, integral_0^t psi(q+up, p) du,
    /// by Gauss-Legendre with node doubling (64 -> 1024, rel. tol 1e-9).
    pub fn integrated_jump(&self, q: &[f64], p: &[f64], t: f64) -> f64 {
        self.integrated_jump_with(q, p, t, 64, 1024, 1e-9)
    }

    pub fn integrated_jump_with(
        &self,
        q: &[f64],
        p: &[f64],
        t: f64,
        start: usize,
        cap: usize,
        tol: f64,
    ) -> f64 {
        if self.jump.is_empty() || t == 0.0 {
            return 0.0;
        }
        let d = self.dim;
        quad::integrate_doubling(0.0, t, start, cap, tol, |u| {
            let mut local = [0.0f64; 3];
            let local = &mut local[..d];
            for i in 0..d {
                local[i] = q[i] + u * p[i];
            }
            self.jump.exponent(local, p)
        })
    }

    /// integral_0^t l(q + u p, p) du: the log of the noise multiplier in the
    /// evolved characteristic function. Zero at the origin and at t = 0.
    pub fn integrated_exponent(&self, q: &[f64], p: &[f64], t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        Ok(-0.5 * self.integrated_quadratic(q, p, t) + self.integrated_jump(q, p, t))
    }

    /// Gradient of the integrated exponent in (q, p).
    pub fn integrated_exponent_grad(
        &self,
        q: &[f64],
        p: &[f64],
        t: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if t < 0.0 {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        let d = self.dim;
        let axx = self.block_xx();
        let axk = self.block_xk();
        let akk = self.block_kk();
        let qv = DVector::from_column_slice(q);
        let pv = DVector::from_column_slice(p);
        // quadratic part, term by term
        let mut gq = 2.0 * t * (&axx * &qv) + t * t * (&axx * &pv) + 2.0 * t * (&axk * &pv);
        let mut gp = t * t * (axx.transpose() * &qv)
            + 2.0 * t.powi(3) / 3.0 * (&axx * &pv)
            + 2.0 * t * (axk.transpose() * &qv)
            + t * t * ((&axk + axk.transpose()) * &pv)
            + 2.0 * t * (&akk * &pv);
        gq *= -0.5;
        gp *= -0.5;
        let mut grad_q: Vec<f64> = gq.iter().copied().collect();
        let mut grad_p: Vec<f64> = gp.iter().copied().collect();
        if !self.jump.is_empty() && t > 0.0 {
            for i in 0..d {
                let gi = quad::integrate_doubling(0.0, t, 64, 1024, 1e-9, |u| {
                    let mut local = [0.0f64; 3];
                    let local = &mut local[..d];
                    for j in 0..d {
                        local[j] = q[j] + u * p[j];
                    }
                    let mut dq = [0.0f64; 3];
                    let mut dp = [0.0f64; 3];
                    self.jump.exponent_grad(local, p, &mut dq[..d], &mut dp[..d]);
                    dq[i]
                });
                grad_q[i] += gi;
                let hi = quad::integrate_doubling(0.0, t, 64, 1024, 1e-9, |u| {
                    let mut local = [0.0f64; 3];
                    let local = &mut local[..d];
                    for j in 0..d {
                        local[j] = q[j] + u * p[j];
                    }
                    let mut dq = [0.0f64; 3];
                    let mut dp = [0.0f64; 3];
                    self.jump.exponent_grad(local, p, &mut dq[..d], &mut dp[..d]);
                    u * dq[i] + dp[i]
                });
                grad_p[i] += hi;
            }
        }
        Ok((grad_q, grad_p))
    }
}

impl NoiseSpec {
    /// Integrated exponent and its (q, p)-gradient in one quadrature pass.
    /// Returns (value, grad_q, grad_p); gradients are written into caller
    /// buffers of length d.
    pub fn integrated_exponent_and_grad(
        &self,
        q: &[f64],
        p: &[f64],
        t: f64,
        grad_q: &mut [f64],
        grad_p: &mut [f64],
    ) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        let d = self.dim;
        let axx = self.block_xx();
        let axk = self.block_xk();
        let akk = self.block_kk();
        let qv = DVector::from_column_slice(q);
        let pv = DVector::from_column_slice(p);
        let value_quad = -0.5 * self.integrated_quadratic(q, p, t);
        let gq = -0.5
            * (2.0 * t * (&axx * &qv) + t * t * (&axx * &pv) + 2.0 * t * (&axk * &pv));
        let gp = -0.5
            * (t * t * (axx.transpose() * &qv)
                + 2.0 * t.powi(3) / 3.0 * (&axx * &pv)
                + 2.0 * t * (axk.transpose() * &qv)
                + t * t * ((&axk + axk.transpose()) * &pv)
                + 2.0 * t * (&akk * &pv));
        for i in 0..d {
            grad_q[i] = gq[i];
            grad_p[i] = gp[i];
        }
        let mut value = value_quad;
        if !self.jump.is_empty() && t > 0.0 {
            // fused [psi, dpsi/dq_i, u dpsi/dq_i + dpsi/dp_i] integrals;
            // d <= 3, so a fixed 7-slot array covers value + both gradients
            let parts = quad::integrate_doubling_array::<7>(0.0, t, 64, 1024, 1e-9, |u| {
                let mut local = [0.0f64; 3];
                let local = &mut local[..d];
                for j in 0..d {
                    local[j] = q[j] + u * p[j];
                }
                let mut dq = [0.0f64; 3];
                let mut dp = [0.0f64; 3];
                self.jump.exponent_grad(local, p, &mut dq[..d], &mut dp[..d]);
                let mut out = [0.0f64; 7];
                out[0] = self.jump.exponent(local, p);
                for j in 0..d {
                    out[1 + j] = dq[j];
                    out[4 + j] = u * dq[j] + dp[j];
                }
                out
            });
            value += parts[0];
            for j in 0..d {
                grad_q[j] += parts[1 + j];
                grad_p[j] += parts[4 + j];
            }
        }
        Ok(value)
    }
}

/// Scan parameters for the quadratic-bound check.
#[derive(Debug, Clone, Copy)]
pub struct RadiusScan {
    pub max_radius: f64,
    pub radii: usize,
    pub directions: usize,
}

impl Default for RadiusScan {
    fn default() -> Self {
        RadiusScan {
            max_radius: 1.0,
            radii: 16,
            directions: 64,
        }
    }
}

/// Verify the two-sided quadratic bound on psi near the origin:
///   -(1+eps)/2 <l|Bl> - slack <= psi(l) <= -(1-eps)/2 <l|Bl> + slack,
/// slack = eps |l|^2 / 2 for atomic measures and 0 for density-type ones.
/// Returns the largest scanned radius delta such that the bound holds at all
/// sampled |l| <= delta.
pub fn check_quadratic_bounds(jump: &JumpMeasure, epsilon: f64, scan: RadiusScan) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    let n = 2 * jump.dim();
    let b = jump.pair_moment_matrix();
    let dirs = unit_directions(n, scan.directions);
    let tight = jump.is_density_type();
    let mut delta = 0.0;
    for r_idx in 1..=scan.radii {
        let radius = scan.max_radius * r_idx as f64 / scan.radii as f64;
        let mut ok = true;
        'dirs: for dir in &dirs {
            let l: Vec<f64> = dir.iter().map(|&v| v * radius).collect();
            let lv = DVector::from_column_slice(&l);
            let lbl = (lv.transpose() * &b * &lv)[(0, 0)];
            let slack = if tight {
                0.0
            } else {
                0.5 * epsilon * radius * radius
            };
            let psi = jump.exponent(&l[..jump.dim()], &l[jump.dim()..]);
            let lower = -0.5 * (1.0 + epsilon) * lbl - slack;
            let upper = -0.5 * (1.0 - epsilon) * lbl + slack;
            let slop = 1e-12 * (1.0 + lbl.abs());
            if psi < lower - slop || psi > upper + slop {
                ok = false;
                break 'dirs;
            }
        }
        if ok {
            delta = radius;
        } else if delta == 0.0 {
            return Err(Error::NumericalInconsistency(format!(
                "quadratic bound failed at the smallest scanned radius \
                 {radius:.3e} (eps = {epsilon})"
            )));
        } else {
            break;
        }
    }
    Ok(delta)
}

/// Deterministic unit directions: the coordinate axes plus a low-discrepancy
/// spread (equal angles for 2-D, seeded normals otherwise).
fn unit_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut dirs = Vec::with_capacity(count + n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        dirs.push(e);
    }
    if n == 2 {
        for j in 0..count {
            let theta = std::f64::consts::PI * j as f64 / count as f64;
            dirs.push(vec![theta.cos(), theta.sin()]);
        }
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5ca1ab1e);
        for _ in 0..count {
            let mut v: Vec<f64> = (0..n)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                v.iter_mut().for_each(|x| *x /= norm);
                dirs.push(v);
            }
        }
    }
    dirs
}
