//! Gaussian density-operator families: validation, closed-form
//! characteristic functions, closed-form coherence quantities, and the
//! long-time limit states.
//!
//! The 1-d kernel family is
//!   rho = (2 sqrt(C)/sqrt(pi)) exp(-A(x1-x2)^2 - iB(x1^2-x2^2)
//!         - C(x1+x2)^2 - iD(x1-x2) - E(x1+x2) - F),
//! valid for A >= C > 0 and F = E^2/(4C). The n-d family uses exponent
//!   -1/4 <dx|a dx> - i/2 <dx|b sx> - 1/4 <sx|c sx>   (dx = x1-x2, sx = x1+x2)
//! so the dictionaries are a = 4A, b = 2B, c = 4C. Every family member has
//! the closed-form characteristic function
//!   phi(q, p) = exp(-1/4 <q|a q> - 1/4 <p + b q | c^{-1} (p + b q)>)
//! times displacement phases, normalized to phi(0,0) = 1 (unit trace).

use crate::charfn::{C64, CharFn, GaussianCharFn};
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::transform::KernelFn;
use nalgebra::{DMatrix, DVector};

/// 1-d Gaussian kernel coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1D {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Gaussian1D {
    pub fn ground_state() -> Self {
        Gaussian1D {
            a: 0.25,
            b: 0.0,
            c: 0.25,
            d: 0.0,
            e: 0.0,
            f: 0.0,
        }
    }

    /// Mean position -E/(4C) and mean momentum D - BE/(2C) of the state.
    pub fn means(&self) -> (f64, f64) {
        let x0 = -self.e / (4.0 * self.c);
        let k0 = self.d + 2.0 * self.b * x0;
        (x0, k0)
    }
}

/// Violations are returned as a list naming each failed constraint; an empty
/// list means the parameters describe a state.
pub fn validate(params: &Gaussian1D) -> Vec<String> {
    let mut violations = Vec::new();
    if !(params.c > 0.0) {
        violations.push(format!("C > 0 fails: C = {}", params.c));
    }
    if params.a < params.c {
        violations.push(format!("A >= C fails: A = {}, C = {}", params.a, params.c));
    }
    if params.c > 0.0 {
        let want = params.e * params.e / (4.0 * params.c);
        if (params.f - want).abs() > 1e-12 * want.abs().max(1.0) {
            violations.push(format!(
                "F = E^2/(4C) fails: F = {}, expected {want}",
                params.f
            ));
        }
    }
    violations
}

/// n-d Gaussian kernel parameters (exponent matrices plus means).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianND {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub mean_position: DVector<f64>,
    pub mean_momentum: DVector<f64>,
}

impl GaussianND {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn centered(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Self {
        let d = a.nrows();
        GaussianND {
            a,
            b,
            c,
            mean_position: DVector::zeros(d),
            mean_momentum: DVector::zeros(d),
        }
    }

    /// Scale all three exponent matrices (used to relate the stated limit
    /// family to the dynamics-normalized one).
    pub fn scaled(&self, factor: f64) -> Self {
        GaussianND {
            a: factor * &self.a,
            b: factor * &self.b,
            c: factor * &self.c,
            mean_position: self.mean_position.clone(),
            mean_momentum: self.mean_momentum.clone(),
        }
    }
}

pub fn validate_nd(params: &GaussianND) -> Vec<String> {
    let mut violations = Vec::new();
    let d = params.dim();
    for (name, m) in [("a", &params.a), ("c", &params.c)] {
        if m.nrows() != d || m.ncols() != d {
            violations.push(format!("{name} is not {d} x {d}"));
            continue;
        }
        if (m - m.transpose()).norm() > 1e-12 * m.norm().max(1.0) {
            violations.push(format!("{name} is not symmetric"));
        }
        let eig = m.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            violations.push(format!("{name} is not positive definite"));
        }
    }
    let diff = &params.a - &params.c;
    let eig = (0.5 * (&diff + diff.transpose())).symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * params.a.norm()) {
        violations.push("a - c is not positive semidefinite".into());
    }
    violations
}

fn nd_from_1d(params: &Gaussian1D) -> GaussianND {
    let (x0, k0) = params.means();
    GaussianND {
        a: DMatrix::from_element(1, 1, 4.0 * params.a),
        b: DMatrix::from_element(1, 1, 2.0 * params.b),
        c: DMatrix::from_element(1, 1, 4.0 * params.c),
        mean_position: DVector::from_element(1, x0),
        mean_momentum: DVector::from_element(1, k0),
    }
}

/// Closed-form characteristic function of an n-d Gaussian family member,
/// normalized to unit trace.
pub fn gaussian_charfn_nd(params: &GaussianND) -> Result<CharFn> {
    let d = params.dim();
    let c_inv = params
        .c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("gaussian c matrix".into()))?;
    let mut quad = DMatrix::zeros(2 * d, 2 * d);
    let qq = 0.25 * (&params.a + &params.b * &c_inv * &params.b);
    let qp = 0.25 * (&params.b * &c_inv);
    let pp = 0.25 * &c_inv;
    quad.view_mut((0, 0), (d, d)).copy_from(&qq);
    quad.view_mut((0, d), (d, d)).copy_from(&qp);
    quad.view_mut((d, 0), (d, d)).copy_from(&qp.transpose());
    quad.view_mut((d, d), (d, d)).copy_from(&pp);
    let mut lin = DVector::zeros(2 * d);
    for i in 0..d {
        lin[i] = params.mean_momentum[i];
        lin[d + i] = params.mean_position[i];
    }
    Ok(CharFn::Gaussian(GaussianCharFn::new(d, quad, lin)?))
}

/// Closed-form characteristic function of a 1-d family member.
pub fn gaussian_charfn(params: &Gaussian1D) -> Result<CharFn> {
    let violations = validate(params);
    if !violations.is_empty() {
        return Err(Error::Domain(format!(
            "invalid gaussian parameters: {}",
            violations.join("; ")
        )));
    }
    gaussian_charfn_nd(&nd_from_1d(params))
}

/// Sample the 1-d kernel on a position grid (unit-trace normalization).
pub fn gaussian_kernel_1d(params: &Gaussian1D, axis: crate::grid::GridAxis) -> Result<KernelFn> {
    let violations = validate(params);
    if !violations.is_empty() {
        return Err(Error::Domain(format!(
            "invalid gaussian parameters: {}",
            violations.join("; ")
        )));
    }
    let norm = 2.0 * params.c.sqrt() / std::f64::consts::PI.sqrt();
    let p = *params;
    Ok(KernelFn::from_fn(axis, move |x1, x2| {
        let dx = x1 - x2;
        let sx = x1 + x2;
        let re = -p.a * dx * dx - p.c * sx * sx - p.e * sx - p.f;
        let im = -p.b * (x1 * x1 - x2 * x2) - p.d * dx;
        norm * re.exp() * C64::from_polar(1.0, im)
    }))
}

/// Momentum-basis exponent matrices (a', b', c') of the same operator: the
/// characteristic function in the dual slots reads
/// phi(q, p) = exp(-1/4 <p|a' p> - 1/4 <q - b' p | c'^{-1} (q - b' p)>).
pub fn momentum_basis_params(params: &GaussianND) -> Result<GaussianND> {
    let c_inv = params
        .c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("gaussian c matrix".into()))?;
    let cp_inv = &params.a + &params.b * &c_inv * &params.b;
    let cp = cp_inv
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("momentum-basis c' matrix".into()))?;
    let bp = -(&c_inv * &params.b * &cp);
    let ap = &c_inv - &bp * &cp_inv * &bp;
    Ok(GaussianND {
        a: ap,
        b: 0.5 * (&bp + bp.transpose()),
        c: cp,
        mean_position: params.mean_position.clone(),
        mean_momentum: params.mean_momentum.clone(),
    })
}

/// Closed-form coherence quantities of an n-d family member:
/// C_X = Tr[a^{-1}]^(1/2), D_X = Tr[c^{-1}]^(1/2), S_X = C_X/D_X, and the
/// momentum sector through the dual parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedIndex {
    pub c_x: f64,
    pub d_x: f64,
    pub s_x: f64,
    pub c_k: f64,
    pub d_k: f64,
    pub s_k: f64,
}

pub fn closed_form_index_nd(params: &GaussianND) -> Result<ClosedIndex> {
    let a_inv = params
        .a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("gaussian a matrix".into()))?;
    let c_inv = params
        .c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("gaussian c matrix".into()))?;
    let c_x = a_inv.trace().sqrt();
    let d_x = c_inv.trace().sqrt();
    let dual = momentum_basis_params(params)?;
    let ap_inv = dual
        .a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("momentum-basis a' matrix".into()))?;
    let cp_inv = dual
        .c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("momentum-basis c' matrix".into()))?;
    let c_k = ap_inv.trace().sqrt();
    let d_k = cp_inv.trace().sqrt();
    Ok(ClosedIndex {
        c_x,
        d_x,
        s_x: c_x / d_x,
        c_k,
        d_k,
        s_k: c_k / d_k,
    })
}

/// 1-d closed forms: C_X = 1/(2 sqrt A), D_X = 1/(2 sqrt C),
/// S_X = sqrt(C/A), plus the momentum sector.
pub fn closed_form_index(params: &Gaussian1D) -> Result<ClosedIndex> {
    let violations = validate(params);
    if !violations.is_empty() {
        return Err(Error::Domain(format!(
            "invalid gaussian parameters: {}",
            violations.join("; ")
        )));
    }
    closed_form_index_nd(&nd_from_1d(params))
}

fn momentum_kick_matrix_checked(noise: &NoiseSpec) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = noise.momentum_kick_matrix();
    let inv = m.clone().try_inverse().filter(|_| {
        m.clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .all(|&l| l > 0.0)
    });
    match inv {
        Some(inv) => Ok((m, inv)),
        None => Err(Error::SingularMatrix(
            "momentum-kick matrix A^xx + B^xx must be positive definite".into(),
        )),
    }
}

/// The stated long-time limit family in the position basis:
/// a_t = t M, b_t = (3/t) I, c_t = (3/t^3) M^{-1} with M the effective
/// momentum-kick matrix.
pub fn limit_state_position(noise: &NoiseSpec, t: f64) -> Result<GaussianND> {
    if !(t > 0.0) {
        return Err(Error::Domain("limit state needs t > 0".into()));
    }
    let (m, m_inv) = momentum_kick_matrix_checked(noise)?;
    let d = noise.dim();
    Ok(GaussianND::centered(
        t * &m,
        3.0 / t * DMatrix::identity(d, d),
        3.0 / t.powi(3) * m_inv,
    ))
}

/// The same operator in the momentum basis:
/// a'_t = (t^3/12) M, b'_t = -(t/4) I, c'_t = (1/(4t)) M^{-1}.
pub fn limit_state_momentum(noise: &NoiseSpec, t: f64) -> Result<GaussianND> {
    if !(t > 0.0) {
        return Err(Error::Domain("limit state needs t > 0".into()));
    }
    let (m, m_inv) = momentum_kick_matrix_checked(noise)?;
    let d = noise.dim();
    Ok(GaussianND::centered(
        t.powi(3) / 12.0 * &m,
        -t / 4.0 * DMatrix::identity(d, d),
        1.0 / (4.0 * t) * m_inv,
    ))
}

/// The limit family normalized to the evolution law: exactly half the stated
/// coefficients, i.e. the Gaussian whose characteristic function equals the
/// noise multiplier exp(-1/2 integral <(q+up, p)|M_eff (q+up, p)> du) with
/// M_eff carrying the momentum-kick matrix in the x,x block. This is the
/// state the evolved family actually approaches in relative HS distance; S
/// ratios are identical for both normalizations.
pub fn relaxation_params(noise: &NoiseSpec, t: f64) -> Result<GaussianND> {
    Ok(limit_state_position(noise, t)?.scaled(0.5))
}

/// Characteristic function in the momentum-basis slots (used to cross-check
/// limit_state_momentum against limit_state_position).
pub fn momentum_charfn_nd(params: &GaussianND) -> Result<CharFn> {
    // phi(q, p) = exp(-1/4 <p|a' p> - 1/4 <q - b' p|c'^{-1} (q - b' p)>)
    // is the position-engine formula with (q, p) -> (-p, q); build it by
    // swapping slots in a custom wrapper around the position engine.
    let swapped = gaussian_charfn_nd(params)?;
    let d = params.dim();
    let hint_sw = swapped.scale_hint();
    let mut hint = vec![0.0; 2 * d];
    hint[..d].copy_from_slice(&hint_sw[d..2 * d]);
    hint[d..2 * d].copy_from_slice(&hint_sw[..d]);
    let inner = swapped.clone();
    let inner_grad = swapped;
    Ok(CharFn::custom(crate::charfn::CustomCharFn {
        dim: d,
        eval: Box::new(move |q, p| {
            let qs: Vec<f64> = p.iter().map(|&v| -v).collect();
            inner.eval(&qs, q)
        }),
        grad: Some(Box::new(move |q, p| {
            let qs: Vec<f64> = p.iter().map(|&v| -v).collect();
            let (_, dqs, dps) = inner_grad
                .eval_with_grad(&qs, q)
                .expect("gaussian gradient");
            let dq = dps;
            let dp: Vec<C64> = dqs.iter().map(|v| -v).collect();
            (dq, dp)
        })),
        hint,
    }))
}

/// Momentum diagonal rho(k, k) of a Gaussian family member is the Gaussian
/// (det c'/pi^d)^(1/2) exp(-<k - m_k | c' (k - m_k)>); returns (c', m_k).
pub fn momentum_diagonal_params(params: &GaussianND) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let dual = momentum_basis_params(params)?;
    Ok((dual.c, params.mean_momentum.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn validation_examples() {
        let ground = Gaussian1D::ground_state();
        assert!(validate(&ground).is_empty());

        let bad = Gaussian1D {
            a: 0.1,
            c: 0.25,
            ..Gaussian1D::ground_state()
        };
        let v = validate(&bad);
        assert!(v.iter().any(|m| m.contains("A >= C")));

        let with_e = Gaussian1D {
            a: 0.5,
            b: 0.0,
            c: 0.25,
            d: 0.0,
            e: 1.0,
            f: 1.0,
        };
        assert!(validate(&with_e).is_empty());

        let wrong_f = Gaussian1D { f: 0.5, ..with_e };
        assert!(validate(&wrong_f).iter().any(|m| m.contains("F")));
    }

    #[test]
    fn ground_state_charfn_closed_form() {
        let phi = gaussian_charfn(&Gaussian1D::ground_state()).unwrap();
        for &(q, p) in &[(0.0, 0.0), (1.0, -0.5), (2.0, 0.25)] {
            let want = (-(q * q + p * p) / 4.0f64).exp();
            let got = phi.eval(&[q], &[p]);
            assert_relative_eq!(got.re, want, epsilon = 1e-12);
            assert_relative_eq!(got.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn unit_trace_for_any_valid_params() {
        let params = Gaussian1D {
            a: 1.3,
            b: 0.4,
            c: 0.6,
            d: -0.2,
            e: 0.8,
            f: 0.8 * 0.8 / (4.0 * 0.6),
        };
        let phi = gaussian_charfn(&params).unwrap();
        assert!((phi.eval(&[0.0], &[0.0]) - C64::new(1.0, 0.0)).norm() < 1e-12);
        phi.check_state().unwrap();
        // kernel-side trace check of the same parameters
        let axis = crate::grid::GridAxis::new(12.0, 256).unwrap();
        let kernel = gaussian_kernel_1d(&params, axis).unwrap();
        kernel.validate_state().unwrap();
    }

    #[test]
    fn momentum_displacement_phase() {
        let params = Gaussian1D {
            d: 1.0,
            ..Gaussian1D::ground_state()
        };
        let phi = gaussian_charfn(&params).unwrap();
        let q = 0.8;
        let got = phi.eval(&[q], &[0.0]);
        let want = C64::from_polar((-(q * q) / 4.0f64).exp(), q);
        assert!((got - want).norm() < 1e-12, "got {got} want {want}");
        let (m_x, m_k) = phi.means().unwrap();
        assert_relative_eq!(m_x[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(m_k[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_index_examples() {
        let p = Gaussian1D {
            a: 2.0,
            b: 0.0,
            c: 0.5,
            d: 0.0,
            e: 0.0,
            f: 0.0,
        };
        let idx = closed_form_index(&p).unwrap();
        assert_relative_eq!(idx.s_x, 0.5, epsilon = 1e-12);
        assert_relative_eq!(idx.c_x, 1.0 / (2.0 * 2.0f64.sqrt()), epsilon = 1e-12);
        assert_relative_eq!(idx.d_x, 1.0 / (2.0 * 0.5f64.sqrt()), epsilon = 1e-12);
        let ground = closed_form_index(&Gaussian1D::ground_state()).unwrap();
        assert_relative_eq!(ground.s_x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(ground.s_k, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn limit_state_coefficients() {
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let lim = limit_state_position(&noise, 2.0).unwrap();
        assert_relative_eq!(lim.a[(0, 0)], 2.0);
        assert_relative_eq!(lim.b[(0, 0)], 1.5);
        assert_relative_eq!(lim.c[(0, 0)], 0.375);

        let prim = limit_state_momentum(&noise, 2.0).unwrap();
        assert_relative_eq!(prim.a[(0, 0)], 2.0 / 3.0);
        assert_relative_eq!(prim.b[(0, 0)], -0.5);
        assert_relative_eq!(prim.c[(0, 0)], 0.125);

        // scaling in t
        let lim4 = limit_state_position(&noise, 4.0).unwrap();
        assert_relative_eq!(lim4.a[(0, 0)] / lim.a[(0, 0)], 2.0);
        assert_relative_eq!(lim4.c[(0, 0)] / lim.c[(0, 0)], 0.125);

        // d = 2 with diag(1, 4)
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 4.0;
        let noise2 = NoiseSpec::xx_block(2, m).unwrap();
        let lim2 = limit_state_position(&noise2, 1.0).unwrap();
        assert_relative_eq!(lim2.c[(0, 0)], 3.0);
        assert_relative_eq!(lim2.c[(1, 1)], 0.75);

        // singular kick matrix rejected
        let singular = NoiseSpec::zero(1);
        assert!(matches!(
            limit_state_position(&singular, 1.0),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn momentum_family_kinetic_energy_grows_linearly() {
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        for &t in &[4.0, 8.0, 16.0] {
            let prim = limit_state_momentum(&noise, t).unwrap();
            // eigenvalues of c' vanish as 1/t
            assert_relative_eq!(prim.c[(0, 0)] * 4.0 * t, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn limit_families_are_the_same_operator() {
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        for &t in &[2.0, 5.0, 10.0, 20.0, 40.0] {
            let pos = limit_state_position(&noise, t).unwrap();
            let mom = limit_state_momentum(&noise, t).unwrap();
            // dual of the position family reproduces the primed coefficients
            let dual = momentum_basis_params(&pos).unwrap();
            assert_relative_eq!(dual.a[(0, 0)], mom.a[(0, 0)], max_relative = 1e-12);
            assert_relative_eq!(dual.b[(0, 0)], mom.b[(0, 0)], max_relative = 1e-12);
            assert_relative_eq!(dual.c[(0, 0)], mom.c[(0, 0)], max_relative = 1e-12);
            // and the two characteristic functions coincide pointwise
            let phi_pos = gaussian_charfn_nd(&pos).unwrap();
            let phi_mom = momentum_charfn_nd(&mom).unwrap();
            for &(q, p) in &[(0.1, 0.01), (0.5, -0.02), (-0.3, 0.015)] {
                let a = phi_pos.eval(&[q], &[p]);
                let b = phi_mom.eval(&[q], &[p]);
                assert!(
                    (a - b).norm() < 1e-6,
                    "t={t} at ({q},{p}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn limit_family_index_identities() {
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 2.0)).unwrap();
        let m = noise.momentum_kick_matrix();
        let m_inv = m.clone().try_inverse().unwrap();
        for &t in &[5.0, 10.0, 50.0] {
            let lim = limit_state_position(&noise, t).unwrap();
            let idx = closed_form_index_nd(&lim).unwrap();
            // S_X t^2/sqrt(3) * Tr[M]^(1/2)/Tr[M^-1]^(1/2) = 1 exactly
            let ratio = idx.s_x * t * t / 3.0f64.sqrt() * m.trace().sqrt() / m_inv.trace().sqrt();
            assert_relative_eq!(ratio, 1.0, epsilon = 1e-10);
            // position and momentum decohere at the same law
            assert_relative_eq!(idx.s_k, idx.s_x, epsilon = 1e-10);
        }
    }

    #[test]
    fn relaxation_family_is_half_the_stated_one() {
        let noise = NoiseSpec::xx_block(1, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let t = 7.0;
        let stated = limit_state_position(&noise, t).unwrap();
        let relaxed = relaxation_params(&noise, t).unwrap();
        assert_relative_eq!(relaxed.a[(0, 0)], 0.5 * stated.a[(0, 0)]);
        assert_relative_eq!(relaxed.b[(0, 0)], 0.5 * stated.b[(0, 0)]);
        assert_relative_eq!(relaxed.c[(0, 0)], 0.5 * stated.c[(0, 0)]);
        // both normalizations carry the same S values
        let s1 = closed_form_index_nd(&stated).unwrap();
        let s2 = closed_form_index_nd(&relaxed).unwrap();
        assert_relative_eq!(s1.s_x, s2.s_x, epsilon = 1e-12);
    }

    #[test]
    fn momentum_diagonal_of_ground_state() {
        let nd = nd_from_1d(&Gaussian1D::ground_state());
        let (cp, mk) = momentum_diagonal_params(&nd).unwrap();
        // rho(k, k) = pi^{-1/2} e^{-k^2}
        assert_relative_eq!(cp[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(mk[0], 0.0);
    }
}
