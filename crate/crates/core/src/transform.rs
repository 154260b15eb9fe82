//! Kernel <-> characteristic function <-> Wigner transforms and spectral
//! gradients on sampled grids.
//!
//! All discrete transforms use centered grids (origin is a grid point) with
//! FFT-conjugate axis pairs: dk = 2 pi / (n dx). On such pairs
//!   F_m = dx sum_l e^{s i k_m x_l} f_l = dx (-1)^m FFT_s[(-1)^l f_l]_m
//! exactly, for n divisible by four.

use crate::charfn::{C64, CharFn, SampledCharFn};
use crate::error::{Error, Result};
use crate::grid::{GridAxis, PhaseGrid};
use ndarray::{Array2, ArrayD, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Position-basis integral kernel rho(x1, x2) on a square grid (d = 1).
#[derive(Debug, Clone)]
pub struct KernelFn {
    pub axis: GridAxis,
    pub data: Array2<C64>,
}

impl KernelFn {
    pub fn new(axis: GridAxis, data: Array2<C64>) -> Result<Self> {
        if data.nrows() != axis.n || data.ncols() != axis.n {
            return Err(Error::RangeMismatch(format!(
                "kernel shape {:?} does not match axis count {}",
                data.dim(),
                axis.n
            )));
        }
        Ok(KernelFn { axis, data })
    }

    pub fn from_fn(axis: GridAxis, f: impl Fn(f64, f64) -> C64) -> Self {
        let data = Array2::from_shape_fn((axis.n, axis.n), |(i, j)| {
            f(axis.point(i), axis.point(j))
        });
        KernelFn { axis, data }
    }

    /// Delta x * sum of the diagonal: the trace of the operator.
    pub fn trace(&self) -> C64 {
        let dx = self.axis.spacing();
        (0..self.axis.n).map(|i| self.data[(i, i)]).sum::<C64>() * dx
    }

    pub fn hermitian_residue(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.axis.n {
            for j in 0..=i {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Hilbert-Schmidt norm from the kernel side:
    /// (integral |rho(x1,x2)|^2 dx1 dx2)^(1/2).
    pub fn hs_norm(&self) -> f64 {
        let dx = self.axis.spacing();
        let sum: f64 = self.data.iter().map(|v| v.norm_sqr()).sum();
        (sum * dx * dx).sqrt()
    }

    pub fn boundary_max(&self) -> f64 {
        let n = self.axis.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in [0, n - 1] {
                worst = worst.max(self.data[(i, j)].norm());
                worst = worst.max(self.data[(j, i)].norm());
            }
        }
        worst
    }

    pub fn validate_state(&self) -> Result<()> {
        if self.hermitian_residue() > 1e-9 {
            return Err(Error::Domain("kernel is not Hermitian within 1e-9".into()));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-6 {
            return Err(Error::Domain(format!(
                "kernel trace {tr} is not 1 within 1e-6"
            )));
        }
        Ok(())
    }
}

/// Real phase-space density W(x, v) on a grid with axes ordered x_1..x_d,
/// v_1..v_d. Also used for classical histograms.
#[derive(Debug, Clone)]
pub struct WignerFn {
    pub dim: usize,
    pub axes: Vec<GridAxis>,
    pub data: ArrayD<f64>,
    /// largest imaginary residue dropped when the data came from a transform
    pub imag_residue: f64,
}

impl WignerFn {
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    /// integral W dx dv as a plain Riemann sum.
    pub fn integral(&self) -> f64 {
        self.data.sum() * self.cell_volume()
    }

    /// L2 norm (integral W^2)^(1/2).
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.cell_volume()).sqrt()
    }

    /// Marginal over the velocity axes: integral W(x, v) dv at each x index.
    pub fn position_marginal(&self) -> ArrayD<f64> {
        let dv: f64 = self.axes[self.dim..].iter().map(|a| a.spacing()).product();
        let mut out = self.data.clone();
        for _ in 0..self.dim {
            out = out.sum_axis(Axis(out.ndim() - 1));
        }
        out * dv
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtSign {
    Plus,
    Minus,
}

/// In-place centered Fourier transform along one axis of a complex array:
/// replaces samples f(x_l) by F(k_m) = dx sum_l e^{s i k_m x_l} f(x_l) on the
/// conjugate axis. Requires n divisible by 4 (guaranteed by GridAxis).
pub fn centered_ft_axis(
    data: &mut ArrayD<C64>,
    axis: usize,
    grid_axis: GridAxis,
    sign: FtSign,
) -> GridAxis {
    let n = grid_axis.n;
    let dx = grid_axis.spacing();
    let mut planner = FftPlanner::<f64>::new();
    let fft = match sign {
        // e^{+i 2 pi m l / n} is rustfft's inverse kernel
        FtSign::Plus => planner.plan_fft_inverse(n),
        FtSign::Minus => planner.plan_fft_forward(n),
    };
    for mut lane in data.lanes_mut(Axis(axis)) {
        let mut buf: Vec<Complex64> = lane
            .iter()
            .enumerate()
            .map(|(l, v)| if l % 2 == 0 { *v } else { -*v })
            .collect();
        fft.process(&mut buf);
        for (m, v) in buf.into_iter().enumerate() {
            let signed = if m % 2 == 0 { v } else { -v };
            lane[m] = signed * dx;
        }
    }
    grid_axis.conjugate()
}

/// Direct (non-FFT) centered transform along an axis onto an arbitrary
/// target axis; used when the output grid is not the FFT conjugate.
fn centered_ft_direct(
    data: &ArrayD<C64>,
    axis: usize,
    grid_axis: GridAxis,
    target: GridAxis,
    sign: FtSign,
) -> ArrayD<C64> {
    let s = match sign {
        FtSign::Plus => 1.0,
        FtSign::Minus => -1.0,
    };
    let dx = grid_axis.spacing();
    let mut shape = data.shape().to_vec();
    shape[axis] = target.n;
    let mut out = ArrayD::<C64>::zeros(shape);
    let points_in: Vec<f64> = grid_axis.points();
    let points_out: Vec<f64> = target.points();
    let lanes_in: Vec<_> = data.lanes(Axis(axis)).into_iter().collect();
    let mut lanes_out: Vec<_> = out.lanes_mut(Axis(axis)).into_iter().collect();
    for (lane_in, lane_out) in lanes_in.iter().zip(lanes_out.iter_mut()) {
        for (m, &k) in points_out.iter().enumerate() {
            let mut acc = C64::default();
            for (l, &x) in points_in.iter().enumerate() {
                acc += lane_in[l] * C64::from_polar(1.0, s * k * x);
            }
            lane_out[m] = acc * dx;
        }
    }
    out
}

/// phi(q, p) = e^{-(i/2) q p} integral e^{i p x} rho(x - q, x) dx, sampled on
/// `grid`. The q-axis must coincide with the kernel axis so the shifted
/// argument lands on grid points; the kernel is treated as zero outside its
/// (decayed) support.
pub fn kernel_to_charfn(kernel: &KernelFn, grid: &PhaseGrid) -> Result<SampledCharFn> {
    if grid.dim != 1 {
        return Err(Error::Unsupported("kernel transforms are 1-d".into()));
    }
    let q_axis = grid.axes[0];
    let p_axis = grid.axes[1];
    if !q_axis.approx_eq(&kernel.axis) {
        return Err(Error::RangeMismatch(
            "charfn q-axis must match the kernel position axis".into(),
        ));
    }
    let scale = kernel.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if kernel.boundary_max() > 1e-8 * scale.max(1e-300) {
        return Err(Error::Truncation(
            "kernel has not decayed at the grid boundary; enlarge the position grid".into(),
        ));
    }
    let n = q_axis.n;
    let fast = p_axis.approx_eq(&q_axis.conjugate());
    let mut data = ArrayD::<C64>::zeros(vec![n, p_axis.n]);
    let rows: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            // g_l = rho(x_l - q_j, x_l); x_l - q_j has index l - j + n/2
            let mut g = ArrayD::<C64>::zeros(vec![n]);
            for l in 0..n {
                let shifted = l as isize - j as isize + (n / 2) as isize;
                if shifted >= 0 && (shifted as usize) < n {
                    g[l] = kernel.data[(shifted as usize, l)];
                }
            }
            let transformed = if fast {
                let mut buf = g;
                centered_ft_axis(&mut buf, 0, q_axis, FtSign::Plus);
                buf
            } else {
                centered_ft_direct(&g, 0, q_axis, p_axis, FtSign::Plus)
            };
            let qj = q_axis.point(j);
            (0..p_axis.n)
                .map(|m| transformed[m] * C64::from_polar(1.0, -0.5 * qj * p_axis.point(m)))
                .collect()
        })
        .collect();
    for (j, row) in rows.into_iter().enumerate() {
        for (m, v) in row.into_iter().enumerate() {
            data[[j, m]] = v;
        }
    }
    SampledCharFn::new(grid.clone(), data)
}

/// Wigner function W(x, v) = (2 pi)^{-2d} integral e^{-i p.x - i q.v} phi,
/// on the FFT-conjugate grid (x_i dual to p_i, v_i dual to q_i).
pub fn charfn_to_wigner(phi: &CharFn, grid: &PhaseGrid) -> Result<WignerFn> {
    let sampled = match phi {
        CharFn::Sampled(s) => {
            if s.grid != *grid {
                return Err(Error::RangeMismatch(
                    "sampled charfn grid does not match the requested grid".into(),
                ));
            }
            s.clone()
        }
        _ => SampledCharFn::from_charfn(phi, grid)?,
    };
    let d = grid.dim;
    if sampled.boundary_max() > 1e-10 {
        return Err(Error::Truncation(
            "characteristic function has not decayed below 1e-10 at the grid boundary".into(),
        ));
    }
    let mut data = sampled.data;
    let new_axes: Vec<GridAxis> = (0..2 * d)
        .map(|a| centered_ft_axis(&mut data, a, grid.axes[a], FtSign::Minus))
        .collect();
    // axis a < d now carries v_a, axis d + a carries x_a; reorder to [x, v]
    let mut order: Vec<usize> = (d..2 * d).collect();
    order.extend(0..d);
    let data = data.permuted_axes(order.as_slice()).to_owned();
    let mut axes = vec![GridAxis::new(1.0, 8).unwrap(); 2 * d];
    // x_a is dual to p_a, v_a to q_a
    axes[..d].copy_from_slice(&new_axes[d..2 * d]);
    axes[d..2 * d].copy_from_slice(&new_axes[..d]);
    let norm = (2.0 * PI).powi(2 * d as i32);
    let mut imag_residue = 0.0f64;
    let real = data.mapv(|v| {
        imag_residue = imag_residue.max(v.im.abs() / norm);
        v.re / norm
    });
    Ok(WignerFn {
        dim: d,
        axes,
        data: real,
        imag_residue,
    })
}

/// Evaluate an analytic Wigner closed form on an arbitrary grid.
pub fn gaussian_wigner_on_grid(
    g: &crate::charfn::GaussianCharFn,
    axes: &[GridAxis],
) -> Result<WignerFn> {
    let d = g.dim();
    if axes.len() != 2 * d {
        return Err(Error::Domain("wigner grid needs 2d axes".into()));
    }
    let shape: Vec<usize> = axes.iter().map(|a| a.n).collect();
    let total: usize = shape.iter().product();
    let values: Vec<f64> = (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut z = vec![0.0; 2 * d];
            for a in (0..2 * d).rev() {
                let j = rem % shape[a];
                rem /= shape[a];
                z[a] = axes[a].point(j);
            }
            g.wigner(&z[..d], &z[d..])
        })
        .collect();
    Ok(WignerFn {
        dim: d,
        axes: axes.to_vec(),
        data: ArrayD::from_shape_vec(shape, values).expect("shape"),
        imag_residue: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseAxis {
    Q(usize),
    P(usize),
}

/// Spectral (or analytic) partial derivative of a characteristic function
/// along one q- or p-component.
pub fn phase_gradient(phi: &CharFn, axis: PhaseAxis) -> Result<CharFn> {
    let d = phi.dim();
    let flat_axis = match axis {
        PhaseAxis::Q(i) => i,
        PhaseAxis::P(i) => d + i,
    };
    if flat_axis >= 2 * d {
        return Err(Error::Domain("gradient axis out of range".into()));
    }
    match phi {
        CharFn::Sampled(s) => {
            let mut data = s.data.clone();
            let ax = s.grid.axes[flat_axis];
            // to the frequency domain, multiply by i*omega, and back
            let dual = centered_ft_axis(&mut data, flat_axis, ax, FtSign::Minus);
            let omega = dual.points();
            for (idx, v) in data.indexed_iter_mut() {
                *v *= C64::new(0.0, omega[idx[flat_axis]]);
            }
            let back = centered_ft_axis(&mut data, flat_axis, dual, FtSign::Plus);
            debug_assert!(back.approx_eq(&ax));
            // the round trip carries dx * dk * n = 2 pi
            data.mapv_inplace(|v| v / (2.0 * PI));
            Ok(CharFn::Sampled(SampledCharFn::new(s.grid.clone(), data)?))
        }
        _ => {
            if !phi.has_gradient() {
                return Err(Error::Unsupported(
                    "analytic characteristic function has no registered derivative".into(),
                ));
            }
            let inner = phi.clone();
            let hint = phi.scale_hint();
            Ok(CharFn::custom(crate::charfn::CustomCharFn {
                dim: d,
                eval: Box::new(move |q, p| {
                    let (_, dq, dp) = inner.eval_with_grad(q, p).expect("gradient checked");
                    match axis {
                        PhaseAxis::Q(i) => dq[i],
                        PhaseAxis::P(i) => dp[i],
                    }
                }),
                grad: None,
                hint,
            }))
        }
    }
}
