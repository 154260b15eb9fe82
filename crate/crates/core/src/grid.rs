//! Uniform phase-space grids and the integration-box fitter for analytic
//! characteristic functions.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// One uniform axis: points -L + j*dx for j = 0..n, with dx = 2L/n.
/// The origin is a grid point (j = n/2) because n is even.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub half_width: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::Domain(format!(
                "axis half-width must be positive, got {half_width}"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Domain(format!(
                "axis point count must be a power of two >= 8, got {n}"
            )));
        }
        Ok(GridAxis { half_width, n })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Index of the origin.
    pub fn origin_index(&self) -> usize {
        self.n / 2
    }

    /// The FFT-conjugate axis: same count, spacing 2*pi/(n*dx).
    pub fn conjugate(&self) -> GridAxis {
        let dk = 2.0 * PI / (self.n as f64 * self.spacing());
        GridAxis {
            half_width: 0.5 * self.n as f64 * dk,
            n: self.n,
        }
    }

    pub fn approx_eq(&self, other: &GridAxis) -> bool {
        self.n == other.n && (self.half_width - other.half_width).abs() <= 1e-12 * self.half_width
    }
}

/// Phase-space grid for d = 1 or 2: axes ordered q_1..q_d, p_1..p_d.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub dim: usize,
    pub axes: Vec<GridAxis>,
}

impl PhaseGrid {
    pub fn new(dim: usize, axes: Vec<GridAxis>) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::Unsupported(format!(
                "phase grids support d = 1 or 2, got d = {dim}"
            )));
        }
        if axes.len() != 2 * dim {
            return Err(Error::Domain(format!(
                "expected {} axes for d = {dim}, got {}",
                2 * dim,
                axes.len()
            )));
        }
        Ok(PhaseGrid { dim, axes })
    }

    /// Symmetric d=1 grid with the same axis for q and p.
    pub fn square_1d(half_width: f64, n: usize) -> Result<Self> {
        let ax = GridAxis::new(half_width, n)?;
        PhaseGrid::new(1, vec![ax, ax])
    }

    /// d=1 grid whose q-axis matches a position grid and whose p-axis is its
    /// FFT conjugate; used by the fast kernel transform path.
    pub fn conjugate_1d(position_axis: GridAxis) -> Self {
        PhaseGrid {
            dim: 1,
            axes: vec![position_axis, position_axis.conjugate()],
        }
    }

    pub fn q_axes(&self) -> &[GridAxis] {
        &self.axes[..self.dim]
    }

    pub fn p_axes(&self) -> &[GridAxis] {
        &self.axes[self.dim..]
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unravel a flat index into per-axis indices (row-major).
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for (slot, axis) in out.iter_mut().zip(&self.axes).rev() {
            *slot = flat % axis.n;
            flat /= axis.n;
        }
    }

    /// Coordinates (q, p) of a flat index.
    pub fn coords(&self, flat: usize) -> (Vec<f64>, Vec<f64>) {
        let mut idx = vec![0usize; 2 * self.dim];
        self.unravel(flat, &mut idx);
        let q = (0..self.dim).map(|i| self.axes[i].point(idx[i])).collect();
        let p = (0..self.dim)
            .map(|i| self.axes[self.dim + i].point(idx[self.dim + i]))
            .collect();
        (q, p)
    }
}

/// Rectangular integration box in 2d phase-space dimensions, with half-widths
/// per axis (q-axes then p-axes).
#[derive(Debug, Clone)]
pub struct IntegrationBox {
    pub half_widths: Vec<f64>,
    pub n_per_axis: usize,
}

impl IntegrationBox {
    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_widths[axis] / self.n_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.half_widths.len())
            .map(|a| self.spacing(a))
            .product()
    }

    pub fn len(&self) -> usize {
        self.n_per_axis.pow(self.half_widths.len() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, mut flat: usize, out: &mut [f64]) {
        let k = self.half_widths.len();
        for a in (0..k).rev() {
            let j = flat % self.n_per_axis;
            flat /= self.n_per_axis;
            out[a] = -self.half_widths[a] + j as f64 * self.spacing(a);
        }
    }
}

/// Maximum |f| over the faces of the box, sampled and locally refined.
/// Catches the sheared ridges of evolved characteristic functions.
pub fn boundary_max(half_widths: &[f64], f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let k = half_widths.len();
    let samples = 129usize;
    let mut best: f64 = 0.0;
    let mut point = vec![0.0; k];
    for axis in 0..k {
        for side in [-1.0, 1.0] {
            // scan the face axis = side*L over the remaining axes
            let others: Vec<usize> = (0..k).filter(|&a| a != axis).collect();
            let mut scan = |coords: &mut dyn FnMut(usize, usize) -> f64, refine: bool| {
                let total = samples.pow(others.len() as u32);
                let mut face_best = 0.0f64;
                let mut face_arg = vec![0usize; others.len()];
                for flat in 0..total {
                    let mut rem = flat;
                    point[axis] = side * half_widths[axis];
                    for (slot, &a) in others.iter().enumerate() {
                        let j = rem % samples;
                        rem /= samples;
                        point[a] = coords(slot, j);
                        if refine {
                            face_arg[slot] = j;
                        }
                    }
                    let v = f(&point);
                    if v > face_best {
                        face_best = v;
                        if refine {
                            let mut rem2 = flat;
                            for slot in face_arg.iter_mut() {
                                *slot = rem2 % samples;
                                rem2 /= samples;
                            }
                        }
                    }
                }
                (face_best, face_arg)
            };
            let (coarse, arg) = scan(
                &mut |slot, j| {
                    let a = others[slot];
                    -half_widths[a] + 2.0 * half_widths[a] * j as f64 / (samples - 1) as f64
                },
                true,
            );
            best = best.max(coarse);
            // one refinement pass around the coarse argmax
            if !others.is_empty() {
                let centers: Vec<f64> = others
                    .iter()
                    .enumerate()
                    .map(|(slot, &a)| {
                        -half_widths[a]
                            + 2.0 * half_widths[a] * arg[slot] as f64 / (samples - 1) as f64
                    })
                    .collect();
                let radii: Vec<f64> = others
                    .iter()
                    .map(|&a| 2.0 * half_widths[a] / (samples - 1) as f64)
                    .collect();
                let (fine, _) = scan(
                    &mut |slot, j| {
                        let lo = (centers[slot] - radii[slot]).max(-half_widths[others[slot]]);
                        let hi = (centers[slot] + radii[slot]).min(half_widths[others[slot]]);
                        lo + (hi - lo) * j as f64 / (samples - 1) as f64
                    },
                    false,
                );
                best = best.max(fine);
            }
        }
    }
    best
}

/// Fit an integration box to a decaying function: double axes (at most
/// `max_doublings` times) until the boundary drops below `tol`, then shrink
/// axes individually while the boundary stays below `tol`.
pub fn fit_box(
    initial: &[f64],
    tol: f64,
    max_doublings: usize,
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<Vec<f64>> {
    let mut l: Vec<f64> = initial.iter().map(|&x| x.max(1e-6)).collect();
    let mut doublings = 0;
    while boundary_max(&l, f) >= tol {
        if doublings == max_doublings {
            return Err(Error::Truncation(format!(
                "boundary magnitude still >= {tol:.1e} after {max_doublings} doublings \
                 (half-widths {l:?})"
            )));
        }
        for x in &mut l {
            *x *= 2.0;
        }
        doublings += 1;
    }
    // shrink pass: halve any axis that keeps the boundary below tol
    let mut changed = true;
    let mut rounds = 0;
    while changed && rounds < 60 {
        changed = false;
        rounds += 1;
        for a in 0..l.len() {
            let saved = l[a];
            l[a] = 0.5 * saved;
            if l[a] < 1e-8 || boundary_max(&l, f) >= tol {
                l[a] = saved;
            } else {
                changed = true;
            }
        }
    }
    Ok(l)
}
