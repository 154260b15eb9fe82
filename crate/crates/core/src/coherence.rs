//! Coherence indices from phase-space moment integrals.
//!
//! With the isometry ||rho||_2^2 = (2 pi)^-d integral |phi|^2, the
//! commutator and anticommutator norms become weighted L2 norms of phi:
//!   ||[X, rho]||_2        = ((2 pi)^-d integral |q|^2 |phi|^2)^(1/2)
//!   ||{X - <X>, rho}||_2  = 2 ((2 pi)^-d integral |(grad_p - v_p) phi|^2)^(1/2)
//! and the K versions swap |q|^2 <-> |p|^2 and grad_p <-> grad_q. The factor
//! 2 in the anticommutator identity is fixed by the Gaussian closed forms
//! (ground state: D_X = 1).

use crate::charfn::{hs_norm, moment_sweep, CharFn, C64};
use crate::error::{Error, Result};
use crate::transform::{phase_gradient, PhaseAxis};
use serde::Serialize;

/// Which observable family a norm refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Position,
    Momentum,
}

/// Numeric coherence report for one state.
#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    pub c_x: f64,
    pub d_x: f64,
    pub s_x: f64,
    pub c_k: f64,
    pub d_k: f64,
    pub s_k: f64,
    pub mean_position: Vec<f64>,
    pub mean_momentum: Vec<f64>,
    /// fitted integration half-widths (q-axes then p-axes), or the sampled
    /// grid half-widths
    pub box_half_widths: Vec<f64>,
    /// points per axis used for the integrals
    pub points_per_axis: usize,
}

impl IndexReport {
    pub fn uncertainty_products(&self) -> (f64, f64) {
        (self.c_x * self.d_k, self.c_k * self.d_x)
    }
}

struct RawMoments {
    norm_sq: f64,
    q_weighted: f64,
    p_weighted: f64,
    grad_p_centered: f64,
    grad_q_centered: f64,
    v_q: Vec<C64>,
    v_p: Vec<C64>,
    box_half_widths: Vec<f64>,
    points_per_axis: usize,
}

fn analytic_moments(phi: &CharFn) -> Result<RawMoments> {
    let (v_q, v_p) = phi.origin_gradient()?;
    let (sweep, bx) = moment_sweep(phi, &v_q, &v_p)?;
    // weighted integrands must themselves have decayed at the boundary
    let scale = sweep.norm_sq.max(1e-300);
    let l_max = bx.half_widths.iter().fold(0.0f64, |a, &b| a.max(b));
    if sweep.boundary * sweep.boundary * l_max * l_max > 1e-9 * scale {
        return Err(Error::Truncation(
            "weighted moment integrand has not decayed at the integration boundary".into(),
        ));
    }
    Ok(RawMoments {
        norm_sq: sweep.norm_sq,
        q_weighted: sweep.q_weighted,
        p_weighted: sweep.p_weighted,
        grad_p_centered: sweep.grad_p_centered,
        grad_q_centered: sweep.grad_q_centered,
        v_q,
        v_p,
        box_half_widths: bx.half_widths,
        points_per_axis: bx.n_per_axis,
    })
}

/// Five-point central stencil along one axis of a sampled grid at the origin.
fn stencil_origin_gradient(s: &crate::charfn::SampledCharFn, axis: usize) -> C64 {
    let origin: Vec<usize> = s.grid.axes.iter().map(|a| a.origin_index()).collect();
    let h = s.grid.axes[axis].spacing();
    let sample = |offset: isize| -> C64 {
        let mut idx = origin.clone();
        idx[axis] = (idx[axis] as isize + offset) as usize;
        s.data[idx.as_slice()]
    };
    (-sample(2) + 8.0 * sample(1) - 8.0 * sample(-1) + sample(-2)) / (12.0 * h)
}

fn sampled_moments(s: &crate::charfn::SampledCharFn) -> Result<RawMoments> {
    let d = s.grid.dim;
    let v_q: Vec<C64> = (0..d).map(|i| stencil_origin_gradient(s, i)).collect();
    let v_p: Vec<C64> = (0..d).map(|i| stencil_origin_gradient(s, d + i)).collect();
    // spectral gradients, one per component
    let phi = CharFn::Sampled(s.clone());
    let grads_q: Vec<crate::charfn::SampledCharFn> = (0..d)
        .map(|i| match phase_gradient(&phi, PhaseAxis::Q(i)) {
            Ok(CharFn::Sampled(g)) => Ok(g),
            Ok(_) => unreachable!("sampled gradient stays sampled"),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let grads_p: Vec<crate::charfn::SampledCharFn> = (0..d)
        .map(|i| match phase_gradient(&phi, PhaseAxis::P(i)) {
            Ok(CharFn::Sampled(g)) => Ok(g),
            Ok(_) => unreachable!("sampled gradient stays sampled"),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let mut norm_sq = 0.0;
    let mut q_weighted = 0.0;
    let mut p_weighted = 0.0;
    let mut grad_p_centered = 0.0;
    let mut grad_q_centered = 0.0;
    let mut idx = vec![0usize; 2 * d];
    for flat in 0..s.grid.len() {
        s.grid.unravel(flat, &mut idx);
        let v = s.data[idx.as_slice()];
        let nsq = v.norm_sqr();
        let mut q2 = 0.0;
        let mut p2 = 0.0;
        for i in 0..d {
            let qi = s.grid.axes[i].point(idx[i]);
            let pi = s.grid.axes[d + i].point(idx[d + i]);
            q2 += qi * qi;
            p2 += pi * pi;
            grad_q_centered += (grads_q[i].data[idx.as_slice()] - v_q[i] * v).norm_sqr();
            grad_p_centered += (grads_p[i].data[idx.as_slice()] - v_p[i] * v).norm_sqr();
        }
        norm_sq += nsq;
        q_weighted += q2 * nsq;
        p_weighted += p2 * nsq;
    }
    let cell = s.grid.cell_volume();
    let measure = (2.0 * std::f64::consts::PI).powi(d as i32);
    let scale = cell / measure;
    Ok(RawMoments {
        norm_sq: norm_sq * scale,
        q_weighted: q_weighted * scale,
        p_weighted: p_weighted * scale,
        grad_p_centered: grad_p_centered * scale,
        grad_q_centered: grad_q_centered * scale,
        v_q,
        v_p,
        box_half_widths: s.grid.axes.iter().map(|a| a.half_width).collect(),
        points_per_axis: s.grid.axes[0].n,
    })
}

fn moments(phi: &CharFn) -> Result<RawMoments> {
    match phi {
        CharFn::Sampled(s) => sampled_moments(s),
        _ => analytic_moments(phi),
    }
}

/// ||[X, rho]||_2 or ||[K, rho]||_2 (an absolute norm, not divided by
/// ||rho||_2).
pub fn commutator_norm(phi: &CharFn, observable: Observable) -> Result<f64> {
    let m = moments(phi)?;
    Ok(match observable {
        Observable::Position => m.q_weighted.sqrt(),
        Observable::Momentum => m.p_weighted.sqrt(),
    })
}

/// ||{X - <X>, rho}||_2 or ||{K - <K>, rho}||_2; displacement invariant.
pub fn anticommutator_norm(phi: &CharFn, observable: Observable) -> Result<f64> {
    let m = moments(phi)?;
    Ok(match observable {
        Observable::Position => 2.0 * m.grad_p_centered.sqrt(),
        Observable::Momentum => 2.0 * m.grad_q_centered.sqrt(),
    })
}

const DEGENERACY_FLOOR: f64 = 1e-12;

/// Full coherence report: C, D, and S for both observable families, plus the
/// state means.
pub fn coherence_index(phi: &CharFn) -> Result<IndexReport> {
    let m = moments(phi)?;
    let c_x = (m.q_weighted / m.norm_sq).sqrt();
    let c_k = (m.p_weighted / m.norm_sq).sqrt();
    let d_x = 2.0 * (m.grad_p_centered / m.norm_sq).sqrt();
    let d_k = 2.0 * (m.grad_q_centered / m.norm_sq).sqrt();
    if d_x <= DEGENERACY_FLOOR * c_x.max(1.0) {
        return Err(Error::DegenerateState {
            observable: "position",
        });
    }
    if d_k <= DEGENERACY_FLOOR * c_k.max(1.0) {
        return Err(Error::DegenerateState {
            observable: "momentum",
        });
    }
    Ok(IndexReport {
        c_x,
        d_x,
        s_x: c_x / d_x,
        c_k,
        d_k,
        s_k: c_k / d_k,
        mean_position: m.v_p.iter().map(|c| c.im).collect(),
        mean_momentum: m.v_q.iter().map(|c| c.im).collect(),
        box_half_widths: m.box_half_widths,
        points_per_axis: m.points_per_axis,
    })
}

/// The two uncertainty-type products (C_X D_K, C_K D_X); both are bounded
/// below by 1/2 for states.
pub fn uncertainty_products(phi: &CharFn) -> Result<(f64, f64)> {
    let report = coherence_index(phi)?;
    Ok(report.uncertainty_products())
}

/// Convenience: ||rho||_2 for cross-checks against the raw norms.
pub fn state_hs_norm(phi: &CharFn) -> Result<f64> {
    hs_norm(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn::GaussianCharFn;
    use crate::states;
    use approx::assert_relative_eq;

    #[test]
    fn ground_state_norms() {
        let phi = CharFn::ground_state(1);
        // C_X ||rho||_2 with A = 1/4: commutator norm = 1
        assert_relative_eq!(
            commutator_norm(&phi, Observable::Position).unwrap(),
            1.0,
            epsilon = 1e-8
        );
        assert_relative_eq!(
            anticommutator_norm(&phi, Observable::Position).unwrap(),
            1.0,
            epsilon = 1e-8
        );
        let r = coherence_index(&phi).unwrap();
        assert_relative_eq!(r.s_x, 1.0, epsilon = 1e-6);
        assert_relative_eq!(r.s_k, 1.0, epsilon = 1e-6);
        let (a, b) = r.uncertainty_products();
        assert_relative_eq!(a, 1.0, epsilon = 1e-6);
        assert_relative_eq!(b, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn gaussian_closed_forms_reproduced() {
        let params = states::Gaussian1D {
            a: 2.0,
            b: 0.0,
            c: 0.5,
            d: 0.0,
            e: 0.0,
            f: 0.0,
        };
        let phi = states::gaussian_charfn(&params).unwrap();
        let r = coherence_index(&phi).unwrap();
        assert_relative_eq!(r.s_x, 0.5, epsilon = 1e-6);
        assert_relative_eq!(r.c_x, 1.0 / (2.0 * 2.0f64.sqrt()), epsilon = 1e-6);
        assert_relative_eq!(r.d_x, 1.0 / (2.0 * 0.5f64.sqrt()), epsilon = 1e-6);
        // raw norms relate through ||rho||_2 = (C/A)^(1/4)
        let hs = state_hs_norm(&phi).unwrap();
        assert_relative_eq!(hs, (0.5f64 / 2.0).powf(0.25), epsilon = 1e-6);
        assert_relative_eq!(
            commutator_norm(&phi, Observable::Position).unwrap() / hs,
            1.0 / (2.0 * 2.0f64.sqrt()),
            epsilon = 1e-6
        );
        assert_relative_eq!(
            anticommutator_norm(&phi, Observable::Position).unwrap() / hs,
            1.0 / (2.0 * 0.5f64.sqrt()),
            epsilon = 1e-6
        );
    }

    #[test]
    fn displacement_invariance() {
        let g = GaussianCharFn::ground_state(1);
        let displaced = CharFn::Gaussian(g.shifted(&[2.0]).boosted(&[-1.5]));
        let centered = CharFn::Gaussian(g);
        let r0 = coherence_index(&centered).unwrap();
        let r1 = coherence_index(&displaced).unwrap();
        assert_relative_eq!(r0.s_x, r1.s_x, epsilon = 1e-8);
        assert_relative_eq!(r0.c_x, r1.c_x, epsilon = 1e-8);
        assert_relative_eq!(r0.d_x, r1.d_x, epsilon = 1e-8);
        assert_relative_eq!(r0.d_k, r1.d_k, epsilon = 1e-8);
        assert_relative_eq!(r1.mean_position[0], 2.0, epsilon = 1e-9);
        assert_relative_eq!(r1.mean_momentum[0], -1.5, epsilon = 1e-9);
    }

    #[test]
    fn squeezed_state_satisfies_uncertainty_bound() {
        let params = states::Gaussian1D {
            a: 1.0,
            b: 0.0,
            c: 1.0,
            d: 0.0,
            e: 0.0,
            f: 0.0,
        };
        let phi = states::gaussian_charfn(&params).unwrap();
        let (a, b) = uncertainty_products(&phi).unwrap();
        assert!(a >= 0.5 - 1e-9, "C_X D_K = {a}");
        assert!(b >= 0.5 - 1e-9, "C_K D_X = {b}");
    }

    #[test]
    fn random_gaussians_match_closed_forms() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        for _ in 0..10 {
            let a: f64 = rng.gen_range(0.3..3.0);
            let c: f64 = rng.gen_range(0.1..1.0) * a.min(1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let dsh: f64 = rng.gen_range(-1.0..1.0);
            let e: f64 = rng.gen_range(-1.0..1.0);
            let params = states::Gaussian1D {
                a,
                b,
                c,
                d: dsh,
                e,
                f: e * e / (4.0 * c),
            };
            let phi = states::gaussian_charfn(&params).unwrap();
            let closed = states::closed_form_index(&params).unwrap();
            let numeric = coherence_index(&phi).unwrap();
            assert_relative_eq!(numeric.c_x, closed.c_x, epsilon = 1e-6);
            assert_relative_eq!(numeric.d_x, closed.d_x, epsilon = 1e-6);
            assert_relative_eq!(numeric.s_x, closed.s_x, epsilon = 1e-6);
            assert_relative_eq!(numeric.c_k, closed.c_k, epsilon = 1e-6);
            assert_relative_eq!(numeric.d_k, closed.d_k, epsilon = 1e-6);
            assert_relative_eq!(numeric.s_k, closed.s_k, epsilon = 1e-6);
        }
    }

    #[test]
    fn sampled_path_agrees_with_analytic() {
        let phi = CharFn::ground_state(1);
        let grid = crate::grid::PhaseGrid::square_1d(12.0, 256).unwrap();
        let sampled = CharFn::Sampled(
            crate::charfn::SampledCharFn::from_charfn(&phi, &grid).unwrap(),
        );
        let ra = coherence_index(&phi).unwrap();
        let rs = coherence_index(&sampled).unwrap();
        assert_relative_eq!(ra.s_x, rs.s_x, epsilon = 1e-6);
        assert_relative_eq!(ra.c_k, rs.c_k, epsilon = 1e-6);
        assert_relative_eq!(ra.d_k, rs.d_k, epsilon = 1e-6);
    }
}
