//! Exact time evolution of characteristic functions.
//!
//! phi_t(q, p) = exp(E(q, p, t)) phi_0(q + t p, p) with
//! E(q, p, t) = integral_0^t l(q + u p, p) du: no time stepping is ever
//! involved, a time series is a family of independent evaluations.

use crate::charfn::{C64, CharFn, EvolvedCharFn};
use crate::classical;
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Evolve a state for time t under the given environment. Gaussian states
/// under diffusion-only noise stay in the closed Gaussian family; everything
/// else is evaluated pointwise through the exact multiplier.
pub fn evolve(phi0: &CharFn, noise: &NoiseSpec, t: f64) -> Result<CharFn> {
    if t < 0.0 {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    if phi0.dim() != noise.dim() {
        return Err(Error::Domain("state/noise dimension mismatch".into()));
    }
    if t == 0.0 {
        return Ok(phi0.clone());
    }
    if let (CharFn::Gaussian(g), true) = (phi0, noise.jump().is_empty()) {
        return Ok(CharFn::Gaussian(g.evolve_diffusion(noise, t)?));
    }
    Ok(CharFn::Evolved(EvolvedCharFn {
        inner: Box::new(phi0.clone()),
        noise: Arc::new(noise.clone()),
        t,
    }))
}

/// Free flow only: phi(q, p) -> phi(q + t p, p). Norm preserving.
pub fn free_evolve(phi: &CharFn, t: f64) -> Result<CharFn> {
    evolve(phi, &NoiseSpec::zero(phi.dim()), t)
}

/// Fixed reproducible evaluation panel inside |q_i|, |p_i| <= 1.5.
pub fn test_panel(dim: usize, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
            (q, p)
        })
        .collect()
}

/// Consistency of the closed-form evolution with its generator: the
/// difference quotient (phi_h - phi_0)/h against
/// l(q, p) phi_0(q, p) + p . grad_q phi_0(q, p), maximized over a fixed
/// 20-point panel. O(h) small by construction.
pub fn generator_residual(phi0: &CharFn, noise: &NoiseSpec, h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1e-2) {
        return Err(Error::Domain(format!(
            "step must lie in (0, 1e-2], got {h}"
        )));
    }
    if !phi0.has_gradient() {
        return Err(Error::Unsupported(
            "generator check needs a registered analytic gradient".into(),
        ));
    }
    let phi_h = evolve(phi0, noise, h)?;
    let panel = test_panel(phi0.dim(), 20, PANEL_SEED);
    let mut worst = 0.0f64;
    for (q, p) in &panel {
        let (v0, dq0, _) = phi0.eval_with_grad(q, p)?;
        let quotient = (phi_h.eval(q, p) - v0) / h;
        let mut advect = C64::default();
        for i in 0..p.len() {
            advect += p[i] * dq0[i];
        }
        let rhs = noise.levy_exponent(q, p) * v0 + advect;
        worst = worst.max((quotient - rhs).norm());
    }
    Ok(worst)
}

pub const PANEL_SEED: u64 = 0x0decade;

/// Monte Carlo estimate of the noise multiplier exp(E(q, p, t)) from the
/// classical sampler; returns (estimate, standard error).
pub fn mc_multiplier(
    noise: &NoiseSpec,
    q: &[f64],
    p: &[f64],
    t: f64,
    n: usize,
    steps: usize,
    seed: u64,
) -> Result<(C64, f64)> {
    if n < 1000 {
        return Err(Error::Domain("need at least 1000 samples".into()));
    }
    let ens = classical::sample_paths(noise, t, n, steps, seed)?;
    Ok(classical::empirical_charfn(&ens, q, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn::{GaussianCharFn, hs_norm};
    use crate::noise::JumpMeasure;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn kick_atoms() -> JumpMeasure {
        JumpMeasure::momentum_atoms(1, vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)]).unwrap()
    }

    #[test]
    fn zero_noise_is_pure_shear() {
        let phi0 = CharFn::ground_state(1);
        let t = 1.7;
        let phi_t = evolve(&phi0, &NoiseSpec::zero(1), t).unwrap();
        for &(q, p) in &[(0.3, -0.8), (1.0, 0.5), (-0.4, 0.2)] {
            let want = phi0.eval(&[q + t * p], &[p]);
            let got = phi_t.eval(&[q], &[p]);
            assert!((want - got).norm() < 1e-12);
        }
        // the shear preserves the norm
        assert_relative_eq!(
            hs_norm(&phi_t).unwrap(),
            hs_norm(&phi0).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn time_zero_is_identity() {
        let phi0 = CharFn::ground_state(1);
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let phi_t = evolve(&phi0, &noise, 0.0).unwrap();
        assert!((phi_t.eval(&[0.7], &[0.2]) - phi0.eval(&[0.7], &[0.2])).norm() < 1e-15);
        assert!(evolve(&phi0, &noise, -1.0).is_err());
    }

    #[test]
    fn pointwise_value_matches_hand_computation() {
        // A = diag(1, 0), empty jumps, (q,p) = (0,1), t = 1:
        // exponent -1/2 int_0^1 (u)^2 du = -1/6, sheared argument (1, 1)
        let phi0 = CharFn::ground_state(1);
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let phi_t = evolve(&phi0, &noise, 1.0).unwrap();
        let got = phi_t.eval(&[0.0], &[1.0]);
        let want = (-1.0f64 / 6.0).exp() * (-2.0f64 / 4.0).exp();
        assert_relative_eq!(got.re, want, epsilon = 1e-12);
        assert_relative_eq!(got.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_fast_path_matches_generic_multiplier() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 0)] = 1.3;
        a[(0, 1)] = 0.4;
        a[(1, 0)] = 0.4;
        a[(1, 1)] = 0.9;
        let noise = NoiseSpec::diffusion_only(1, a).unwrap();
        let g = GaussianCharFn::ground_state(1).shifted(&[0.5]);
        let phi0 = CharFn::Gaussian(g);
        let t = 2.3;
        let fast = evolve(&phi0, &noise, t).unwrap();
        assert!(matches!(fast, CharFn::Gaussian(_)));
        let generic = CharFn::Evolved(EvolvedCharFn {
            inner: Box::new(phi0.clone()),
            noise: Arc::new(noise.clone()),
            t,
        });
        for &(q, p) in &[(0.0, 0.0), (0.6, -0.3), (-1.1, 0.8), (0.2, 0.1)] {
            let a = fast.eval(&[q], &[p]);
            let b = generic.eval(&[q], &[p]);
            assert!((a - b).norm() < 1e-12, "fast {a} generic {b} at ({q},{p})");
        }
    }

    #[test]
    fn trace_and_hermitian_symmetry_preserved() {
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0))
            .unwrap()
            .with_jump(kick_atoms())
            .unwrap();
        let phi0 = CharFn::ground_state(1);
        let phi_t = evolve(&phi0, &noise, 2.0).unwrap();
        let origin = phi_t.eval(&[0.0], &[0.0]);
        assert_eq!(origin, C64::new(1.0, 0.0));
        phi_t.check_state().unwrap();
    }

    #[test]
    fn contraction_is_monotone() {
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let phi0 = CharFn::ground_state(1);
        let mut prev = hs_norm(&phi0).unwrap();
        for &t in &[1.0, 2.0, 4.0, 8.0] {
            let n = hs_norm(&evolve(&phi0, &noise, t).unwrap()).unwrap();
            assert!(
                n <= prev + 1e-9,
                "norm increased from {prev} to {n} at t = {t}"
            );
            prev = n;
        }
    }

    #[test]
    fn multiplier_semigroup_along_the_flow() {
        use rand::Rng;
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 0)] = 0.8;
        a[(1, 1)] = 0.5;
        let noise = NoiseSpec::new(1, a, kick_atoms()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let q = [rng.gen_range(-1.0..1.0)];
            let p = [rng.gen_range(-1.0..1.0)];
            let t1: f64 = rng.gen_range(0.0..4.0);
            let t2: f64 = rng.gen_range(0.0..4.0);
            let whole = noise.integrated_exponent(&q, &p, t1 + t2).unwrap();
            let sheared = [q[0] + t2 * p[0]];
            let split = noise.integrated_exponent(&q, &p, t2).unwrap()
                + noise.integrated_exponent(&sheared, &p, t1).unwrap();
            assert!(
                (whole - split).abs() <= 1e-10 * whole.abs().max(1.0),
                "semigroup residue {}",
                (whole - split).abs()
            );
        }
    }

    #[test]
    fn generator_residual_small_for_panel() {
        let phi0 = CharFn::ground_state(1);
        let h = 1e-4;
        let zero = generator_residual(&phi0, &NoiseSpec::zero(1), h).unwrap();
        assert!(zero <= 1e-3, "zero-noise residual {zero}");
        let diff = NoiseSpec::diffusion_only(1, DMatrix::identity(2, 2)).unwrap();
        let r = generator_residual(&phi0, &diff, h).unwrap();
        assert!(r <= 1e-3, "diffusion residual {r}");
        let mixed = NoiseSpec::diffusion_only(1, DMatrix::identity(2, 2))
            .unwrap()
            .with_jump(kick_atoms())
            .unwrap();
        let r = generator_residual(&phi0, &mixed, h).unwrap();
        assert!(r <= 1e-3, "mixed residual {r}");
    }

    #[test]
    fn residual_vanishes_at_origin() {
        let noise = NoiseSpec::diffusion_only(1, DMatrix::identity(2, 2)).unwrap();
        let phi0 = CharFn::ground_state(1);
        let h = 1e-4;
        let phi_h = evolve(&phi0, &noise, h).unwrap();
        let quotient = (phi_h.eval(&[0.0], &[0.0]) - phi0.eval(&[0.0], &[0.0])) / h;
        assert!(quotient.norm() < 1e-12);
    }

    #[test]
    fn mc_multiplier_brownian_and_atoms() {
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let (est, se) = mc_multiplier(&noise, &[1.0], &[0.0], 2.0, 100_000, 128, 23).unwrap();
        let exact = (-1.0f64).exp();
        assert!(
            (est - C64::new(exact, 0.0)).norm() <= 3.0 * se,
            "brownian estimate {est} exact {exact} stderr {se}"
        );

        let jump_noise = NoiseSpec::zero(1).with_jump(kick_atoms()).unwrap();
        let (est, se) =
            mc_multiplier(&jump_noise, &[std::f64::consts::PI], &[0.0], 1.0, 100_000, 128, 29)
                .unwrap();
        let exact = (-2.0f64).exp();
        assert!(
            (est - C64::new(exact, 0.0)).norm() <= 3.0 * se,
            "atoms estimate {est} exact {exact} stderr {se}"
        );

        assert!(mc_multiplier(&jump_noise, &[0.0], &[0.0], 1.0, 10, 64, 1).is_err());
    }
}
