//! Monte Carlo simulation of the classical phase-space kick process with
//! integrated momentum, empirical characteristic functions, histograms, and
//! the Wigner-vs-classical distance.
//!
//! The sampled pair is (xi_t, kappa_t) = (x_t + integral_0^t k_s ds, k_t):
//! a particle starting at the origin with zero momentum, receiving Brownian
//! kicks with covariance A dt (first block pairing the momentum component)
//! and Poisson kicks from the jump atoms. Its characteristic function
//! E[e^{i q.kappa + i p.xi}] equals exp(integrated_exponent(q, p, t)).

use crate::charfn::C64;
use crate::error::{Error, Result};
use crate::grid::GridAxis;
use crate::noise::NoiseSpec;
use crate::transform::WignerFn;
use nalgebra::{DMatrix, DVector};
use ndarray::ArrayD;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Final-time samples of the classical process.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub dim: usize,
    pub t: f64,
    pub steps: usize,
    pub seed: u64,
    positions: Vec<f64>,
    momenta: Vec<f64>,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.momenta.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.momenta.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn momentum(&self, i: usize) -> &[f64] {
        &self.momenta[i * self.dim..(i + 1) * self.dim]
    }

    /// Mean and standard error of one momentum component.
    pub fn momentum_mean_stderr(&self, component: usize) -> (f64, f64) {
        moments(self.momenta.iter().skip(component).step_by(self.dim))
    }

    pub fn position_mean_stderr(&self, component: usize) -> (f64, f64) {
        moments(self.positions.iter().skip(component).step_by(self.dim))
    }

    /// Sample variance of one momentum component with its standard error.
    pub fn momentum_variance_stderr(&self, component: usize) -> (f64, f64) {
        let vals: Vec<f64> = self
            .momenta
            .iter()
            .skip(component)
            .step_by(self.dim)
            .copied()
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sq: Vec<f64> = vals.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = sq.iter().sum::<f64>() / (n - 1.0);
        // stderr of the variance from the fourth moment
        let m4 = sq.iter().map(|s| s * s).sum::<f64>() / n;
        let se = ((m4 - var * var).max(0.0) / n).sqrt();
        (var, se)
    }

    /// Standardized skewness of one momentum component and its stderr
    /// (sqrt(6/n) for near-Gaussian data).
    pub fn momentum_skewness_stderr(&self, component: usize) -> (f64, f64) {
        let vals: Vec<f64> = self
            .momenta
            .iter()
            .skip(component)
            .step_by(self.dim)
            .copied()
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let m2 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m3 = vals.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
        (skew, (6.0 / n).sqrt())
    }
}

fn moments<'a>(iter: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let vals: Vec<f64> = iter.copied().collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Symmetric PSD square root via the eigendecomposition (tolerates zero
/// modes of a semidefinite diffusion matrix).
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Sample `n` paths of the kick process up to time `t`. Jump times use exact
/// exponential clocks; only the integral of the momentum over time uses the
/// `steps`-point midpoint lattice. Deterministic for a given seed regardless
/// of thread count (one counter-mode stream per path).
pub fn sample_paths(
    noise: &NoiseSpec,
    t: f64,
    n: usize,
    steps: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if n < 1 {
        return Err(Error::Domain("need at least one path".into()));
    }
    if steps < 64 {
        return Err(Error::Domain("need at least 64 integration steps".into()));
    }
    if t < 0.0 {
        return Err(Error::Domain("time must be nonnegative".into()));
    }
    let d = noise.dim();
    let sqrt_a = psd_sqrt(noise.diffusion());
    let diffusive = noise.diffusion().norm() > 0.0;
    let atoms = noise.jump().atoms_slice();
    let total_rate = noise.jump().total_rate();
    let cumulative: Vec<f64> = atoms
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a.weight;
            Some(*acc)
        })
        .collect();
    let dt = t / steps as f64;
    let sqrt_dt = dt.sqrt();

    let results: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(path as u64);
            // momentum and direct position offsets accumulated over the path
            let mut momentum = vec![0.0f64; d];
            let mut position = vec![0.0f64; d];
            let mut pos_integral = vec![0.0f64; d];
            // exact exponential jump clock
            let mut jump_times: Vec<(f64, usize)> = Vec::new();
            if total_rate > 0.0 {
                let mut clock = 0.0;
                loop {
                    let u: f64 = rng.gen_range(0.0..1.0);
                    clock += -(1.0 - u).ln() / total_rate;
                    if clock > t {
                        break;
                    }
                    let pick: f64 = rng.gen_range(0.0..total_rate);
                    let idx = cumulative.partition_point(|&c| c < pick).min(atoms.len() - 1);
                    jump_times.push((clock, idx));
                }
            }
            let mut next_jump = 0usize;
            let mut prev_momentum = momentum.clone();
            for step in 0..steps {
                let step_end = (step + 1) as f64 * dt;
                while next_jump < jump_times.len() && jump_times[next_jump].0 <= step_end {
                    let (_, idx) = jump_times[next_jump];
                    for i in 0..d {
                        momentum[i] += atoms[idx].k[i];
                        position[i] += atoms[idx].x[i];
                    }
                    next_jump += 1;
                }
                if diffusive {
                    let xi = DVector::from_fn(2 * d, |_, _| {
                        StandardNormal.sample(&mut rng)
                    });
                    let kick = &sqrt_a * xi * sqrt_dt;
                    for i in 0..d {
                        momentum[i] += kick[i];
                        position[i] += kick[d + i];
                    }
                }
                for i in 0..d {
                    pos_integral[i] += 0.5 * (prev_momentum[i] + momentum[i]) * dt;
                }
                prev_momentum.copy_from_slice(&momentum);
            }
            let final_pos: Vec<f64> = (0..d).map(|i| position[i] + pos_integral[i]).collect();
            (final_pos, momentum)
        })
        .collect();

    let mut positions = Vec::with_capacity(n * d);
    let mut momenta = Vec::with_capacity(n * d);
    for (pos, mom) in results {
        positions.extend(pos);
        momenta.extend(mom);
    }
    Ok(PathEnsemble {
        dim: d,
        t,
        steps,
        seed,
        positions,
        momenta,
    })
}

/// Empirical characteristic function of the ensemble at one phase-space
/// point: mean of e^{i q.kappa + i p.xi} with its standard error.
pub fn empirical_charfn(ens: &PathEnsemble, q: &[f64], p: &[f64]) -> (C64, f64) {
    let n = ens.len();
    let d = ens.dim;
    let mut sum = C64::default();
    let mut sum_re2 = 0.0;
    let mut sum_im2 = 0.0;
    for i in 0..n {
        let kappa = ens.momentum(i);
        let xi = ens.position(i);
        let mut arg = 0.0;
        for j in 0..d {
            arg += q[j] * kappa[j] + p[j] * xi[j];
        }
        let v = C64::from_polar(1.0, arg);
        sum += v;
        sum_re2 += v.re * v.re;
        sum_im2 += v.im * v.im;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var_re = (sum_re2 / nf - mean.re * mean.re).max(0.0);
    let var_im = (sum_im2 / nf - mean.im * mean.im).max(0.0);
    let stderr = ((var_re + var_im) / nf).sqrt();
    (mean, stderr)
}

/// Normalized histogram of the ensemble on an (x, v) grid; cell j covers
/// [point - dx/2, point + dx/2) so cell centers coincide with grid points.
pub fn classical_density(ens: &PathEnsemble, axes: &[GridAxis]) -> Result<WignerFn> {
    let d = ens.dim;
    if d > 2 {
        return Err(Error::Unsupported(
            "histograms support d <= 2; use marginal diagnostics for d = 3".into(),
        ));
    }
    if axes.len() != 2 * d {
        return Err(Error::Domain(format!(
            "histogram needs {} axes, got {}",
            2 * d,
            axes.len()
        )));
    }
    let n = ens.len();
    let shape: Vec<usize> = axes.iter().map(|a| a.n).collect();
    let mut counts = ArrayD::<f64>::zeros(shape.clone());
    let mut outside = 0usize;
    let mut idx = vec![0usize; 2 * d];
    for i in 0..n {
        let xi = ens.position(i);
        let kappa = ens.momentum(i);
        let mut ok = true;
        for j in 0..d {
            match cell_index(&axes[j], xi[j]) {
                Some(c) => idx[j] = c,
                None => {
                    ok = false;
                    break;
                }
            }
            match cell_index(&axes[d + j], kappa[j]) {
                Some(c) => idx[d + j] = c,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            counts[idx.as_slice()] += 1.0;
        } else {
            outside += 1;
        }
    }
    if (outside as f64) > 1e-3 * n as f64 {
        let suggest: Vec<f64> = (0..2 * d)
            .map(|a| {
                let vals = if a < d {
                    (0..n).map(|i| ens.position(i)[a].abs()).fold(0.0, f64::max)
                } else {
                    (0..n).map(|i| ens.momentum(i)[a - d].abs()).fold(0.0, f64::max)
                };
                vals * 1.05
            })
            .collect();
        return Err(Error::RangeMismatch(format!(
            "histogram grid misses {:.2}% of samples; suggested half-widths {suggest:?}",
            100.0 * outside as f64 / n as f64
        )));
    }
    let cell: f64 = axes.iter().map(|a| a.spacing()).product();
    let norm = 1.0 / (n as f64 * cell);
    counts.mapv_inplace(|c| c * norm);
    Ok(WignerFn {
        dim: d,
        axes: axes.to_vec(),
        data: counts,
        imag_residue: 0.0,
    })
}

fn cell_index(axis: &GridAxis, value: f64) -> Option<usize> {
    let j = ((value + axis.half_width) / axis.spacing()).round();
    if j < 0.0 || j >= axis.n as f64 {
        None
    } else {
        Some(j as usize)
    }
}

/// Axes fitted to the ensemble spread: half-width = 8 sample standard
/// deviations per component (positions first, then momenta).
pub fn fitted_axes(ens: &PathEnsemble, n_cells: usize) -> Result<Vec<GridAxis>> {
    let d = ens.dim;
    let mut axes = Vec::with_capacity(2 * d);
    for a in 0..2 * d {
        let vals: Vec<f64> = (0..ens.len())
            .map(|i| {
                if a < d {
                    ens.position(i)[a]
                } else {
                    ens.momentum(i)[a - d]
                }
            })
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        axes.push(GridAxis::new((8.0 * sd).max(1e-6), n_cells)?);
    }
    Ok(axes)
}

/// Relative L2 distance between two densities on the same grid:
/// ||a - b||_2 / ||b||_2.
pub fn wigner_classical_distance(w: &WignerFn, p_t: &WignerFn) -> Result<f64> {
    if w.dim != p_t.dim || w.axes.len() != p_t.axes.len() {
        return Err(Error::RangeMismatch("density grids differ".into()));
    }
    for (a, b) in w.axes.iter().zip(&p_t.axes) {
        if !a.approx_eq(b) {
            return Err(Error::RangeMismatch("density grids differ".into()));
        }
    }
    let cell = w.cell_volume();
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (x, y) in w.data.iter().zip(p_t.data.iter()) {
        diff += (x - y) * (x - y);
        norm += y * y;
    }
    if norm == 0.0 {
        return Err(Error::Domain("reference density is zero".into()));
    }
    Ok((diff * cell).sqrt() / (norm * cell).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::JumpMeasure;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn kick_atoms() -> JumpMeasure {
        JumpMeasure::momentum_atoms(1, vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)]).unwrap()
    }

    #[test]
    fn zero_noise_paths_stay_at_origin() {
        let noise = NoiseSpec::zero(1);
        let ens = sample_paths(&noise, 2.0, 50, 64, 1).unwrap();
        for i in 0..ens.len() {
            assert_eq!(ens.position(i)[0], 0.0);
            assert_eq!(ens.momentum(i)[0], 0.0);
        }
    }

    #[test]
    fn jump_count_rate_matches_poisson() {
        // total rate 1, t = 1: mean momentum-squared equals the expected
        // jump count (kicks are +-1), within 4 standard errors
        let noise = NoiseSpec::zero(1).with_jump(kick_atoms()).unwrap();
        let ens = sample_paths(&noise, 1.0, 10_000, 64, 7).unwrap();
        let (var, se) = ens.momentum_variance_stderr(0);
        assert!(
            (var - 1.0).abs() <= 4.0 * se,
            "sample kick variance {var} +- {se}"
        );
        let (mean, mse) = ens.momentum_mean_stderr(0);
        assert!(mean.abs() <= 4.0 * mse);
    }

    #[test]
    fn diffusion_momentum_marginal_has_variance_t_times_block() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 0)] = 0.7;
        let noise = NoiseSpec::diffusion_only(1, a).unwrap();
        let t = 2.5;
        let ens = sample_paths(&noise, t, 20_000, 128, 3).unwrap();
        let (var, se) = ens.momentum_variance_stderr(0);
        assert!(
            (var - 0.7 * t).abs() <= 4.0 * se,
            "variance {var} expected {} +- {se}",
            0.7 * t
        );
        let (skew, sse) = ens.momentum_skewness_stderr(0);
        assert!(skew.abs() <= 4.0 * sse, "skewness {skew} +- {sse}");
    }

    #[test]
    fn empirical_charfn_matches_exact_multiplier() {
        // diffusion-only momentum kicks: E e^{i q kappa} = e^{-t q^2 / 2}
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let t = 2.0;
        let ens = sample_paths(&noise, t, 50_000, 128, 11).unwrap();
        let (est, se) = empirical_charfn(&ens, &[1.0], &[0.0]);
        let exact = noise.integrated_exponent(&[1.0], &[0.0], t).unwrap().exp();
        assert_relative_eq!(exact, (-1.0f64).exp(), epsilon = 1e-12);
        assert!(
            (est - C64::new(exact, 0.0)).norm() <= 3.0 * se,
            "estimate {est} exact {exact} stderr {se}"
        );

        // atoms: psi(pi, 0) = -2
        let jump_noise = NoiseSpec::zero(1).with_jump(kick_atoms()).unwrap();
        let ens = sample_paths(&jump_noise, 1.0, 50_000, 128, 13).unwrap();
        let (est, se) = empirical_charfn(&ens, &[std::f64::consts::PI], &[0.0]);
        let exact = (-2.0f64).exp();
        assert!(
            (est - C64::new(exact, 0.0)).norm() <= 3.0 * se,
            "estimate {est} exact {exact} stderr {se}"
        );
    }

    #[test]
    fn origin_value_is_exactly_one() {
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let ens = sample_paths(&noise, 1.0, 100, 64, 5).unwrap();
        let (est, se) = empirical_charfn(&ens, &[0.0], &[0.0]);
        assert_eq!(est, C64::new(1.0, 0.0));
        assert_eq!(se, 0.0);
    }

    #[test]
    fn steps_refinement_changes_little() {
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let coarse = sample_paths(&noise, 2.0, 20_000, 128, 21).unwrap();
        let fine = sample_paths(&noise, 2.0, 20_000, 256, 21).unwrap();
        let (qv, pv) = (&[0.5], &[0.3]);
        let (a, se_a) = empirical_charfn(&coarse, qv, pv);
        let (b, se_b) = empirical_charfn(&fine, qv, pv);
        let se = se_a.max(se_b);
        assert!(
            (a - b).norm() <= 1.5 * se,
            "refinement shift {} vs stderr {se}",
            (a - b).norm()
        );
    }

    #[test]
    fn histogram_mass_and_delta() {
        let noise = NoiseSpec::zero(1);
        let ens = sample_paths(&noise, 1.0, 1000, 64, 2).unwrap();
        let axes = vec![GridAxis::new(1.0, 8).unwrap(), GridAxis::new(1.0, 8).unwrap()];
        let hist = classical_density(&ens, &axes).unwrap();
        assert_relative_eq!(hist.integral(), 1.0, epsilon = 1e-9);
        // all mass in the origin cell
        let c = [4usize, 4usize];
        let cell = hist.cell_volume();
        assert_relative_eq!(hist.data[c.as_slice()] * cell, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn histogram_range_error_suggests_bounds() {
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let ens = sample_paths(&noise, 4.0, 2000, 64, 9).unwrap();
        let tiny = vec![
            GridAxis::new(1e-3, 8).unwrap(),
            GridAxis::new(1e-3, 8).unwrap(),
        ];
        assert!(matches!(
            classical_density(&ens, &tiny),
            Err(Error::RangeMismatch(_))
        ));
    }

    #[test]
    fn disjoint_densities_are_sqrt_two_apart() {
        let axes = vec![GridAxis::new(1.0, 16).unwrap(), GridAxis::new(1.0, 16).unwrap()];
        let shape: Vec<usize> = axes.iter().map(|a| a.n).collect();
        let mut a = ArrayD::<f64>::zeros(shape.clone());
        let mut b = ArrayD::<f64>::zeros(shape);
        a[[2, 2]] = 1.0;
        b[[10, 10]] = 1.0;
        let wa = WignerFn {
            dim: 1,
            axes: axes.clone(),
            data: a,
            imag_residue: 0.0,
        };
        let wb = WignerFn {
            dim: 1,
            axes,
            data: b,
            imag_residue: 0.0,
        };
        assert_relative_eq!(
            wigner_classical_distance(&wa, &wb).unwrap(),
            2.0f64.sqrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(wigner_classical_distance(&wa, &wa).unwrap(), 0.0);
    }

    #[test]
    fn determinism_across_thread_counts() {
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let a = sample_paths(&noise, 1.0, 500, 64, 42).unwrap();
        let b = sample_paths(&noise, 1.0, 500, 64, 42).unwrap();
        assert_eq!(a.positions, b.positions);
        assert_eq!(a.momenta, b.momenta);
    }
}
