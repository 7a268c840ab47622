//! Stress tensors in reference coordinates.

use nalgebra::SMatrix;

use crate::error::{Error, Result};
use crate::grid::{ops, DomainTag, Field, MacVelocity, PhysParams, Rank, Side, Staggering, TwoPhaseDomain};
use crate::kinematics::{arr2, mat2};

/// `S = −π I + ν (∇v + ∇ᵀv)`.
pub fn linear_stress<const N: usize>(grad: &SMatrix<f64, N, N>, pi: f64, nu: f64) -> SMatrix<f64, N, N> {
    (grad + grad.transpose()) * nu - SMatrix::<f64, N, N>::identity() * pi
}

/// `σ_f = −π I + ν_f (F⁻¹∇v + ∇ᵀv F⁻ᵀ)`.
pub fn fluid_stress<const N: usize>(
    grad: &SMatrix<f64, N, N>,
    pi: f64,
    finv: &SMatrix<f64, N, N>,
    nu: f64,
) -> SMatrix<f64, N, N> {
    (finv * grad + grad.transpose() * finv.transpose()) * nu - SMatrix::<f64, N, N>::identity() * pi
}

/// `σˢᵉ = −π I + μ_s (F Fᵀ / g² − I)`.
pub fn solid_elastic_stress<const N: usize>(pi: f64, f: &SMatrix<f64, N, N>, g: f64, mu: f64) -> Result<SMatrix<f64, N, N>> {
    if !(g > 0.0) {
        return Err(Error::GrowthBound { g, bound: 0.0 });
    }
    let id = SMatrix::<f64, N, N>::identity();
    Ok((f * f.transpose() / (g * g) - id) * mu - id * pi)
}

/// `σˢᵛ = ν_s (∇v + ∇ᵀv) Fᵀ`.
pub fn solid_viscous_stress<const N: usize>(grad: &SMatrix<f64, N, N>, f: &SMatrix<f64, N, N>, nu: f64) -> SMatrix<f64, N, N> {
    (grad + grad.transpose()) * f.transpose() * nu
}

#[derive(Debug, Clone)]
pub struct StressBundle {
    pub sigma_f: Field,
    pub sigma_s_e: Field,
    pub sigma_s_v: Field,
    pub s_lin: Field,
}

pub fn stress_linear_s(d: &TwoPhaseDomain, vel: &MacVelocity, pi: &Field, params: &PhysParams) -> Result<Field> {
    let grad = ops::velocity_gradient(d, vel);
    stress_linear_from_grad(d, &grad, pi, params)
}

pub fn stress_linear_from_grad(d: &TwoPhaseDomain, grad: &Field, pi: &Field, params: &PhysParams) -> Result<Field> {
    let mut out = Field::zeros(d, Staggering::CellCenter, pi.tag, Rank::Tensor);
    for j in out.rows() {
        let nu = params.nu(d.side_of_row(j));
        for i in 0..d.nx {
            let s = linear_stress(&mat2(grad.get_tensor(i, j)?), pi.get(i, j, 0)?, nu);
            out.set_tensor(i, j, arr2(&s));
        }
    }
    Ok(out)
}

pub fn stress_fluid_hat(d: &TwoPhaseDomain, vel: &MacVelocity, pi: &Field, finv: &Field, params: &PhysParams) -> Result<Field> {
    let grad = ops::velocity_gradient(d, vel);
    let mut out = Field::zeros(d, Staggering::CellCenter, DomainTag::Fluid, Rank::Tensor);
    for j in d.rows_of(Side::Fluid) {
        for i in 0..d.nx {
            let s = fluid_stress(&mat2(grad.tensor(i, j)), pi.get(i, j, 0)?, &mat2(finv.get_tensor(i, j)?), params.nu_f);
            out.set_tensor(i, j, arr2(&s));
        }
    }
    Ok(out)
}

pub fn stress_solid_elastic(d: &TwoPhaseDomain, pi: &Field, f: &Field, g: &Field, params: &PhysParams) -> Result<Field> {
    let mut out = Field::zeros(d, Staggering::CellCenter, DomainTag::Solid, Rank::Tensor);
    for j in d.rows_of(Side::Solid) {
        for i in 0..d.nx {
            let s = solid_elastic_stress(pi.get(i, j, 0)?, &mat2(f.get_tensor(i, j)?), g.get(i, j, 0)?, params.mu_s)?;
            out.set_tensor(i, j, arr2(&s));
        }
    }
    Ok(out)
}

pub fn stress_solid_viscous(d: &TwoPhaseDomain, grad: &Field, f: &Field, params: &PhysParams) -> Result<Field> {
    let mut out = Field::zeros(d, Staggering::CellCenter, DomainTag::Solid, Rank::Tensor);
    for j in d.rows_of(Side::Solid) {
        for i in 0..d.nx {
            let s = solid_viscous_stress(&mat2(grad.get_tensor(i, j)?), &mat2(f.get_tensor(i, j)?), params.nu_s);
            out.set_tensor(i, j, arr2(&s));
        }
    }
    Ok(out)
}

/// Every stress of the model at one time level.
pub fn stress_bundle(
    d: &TwoPhaseDomain,
    vel: &MacVelocity,
    pi: &Field,
    f: &Field,
    finv: &Field,
    g: &Field,
    params: &PhysParams,
) -> Result<StressBundle> {
    let grad = ops::velocity_gradient(d, vel);
    Ok(StressBundle {
        sigma_f: stress_fluid_hat(d, vel, pi, finv, params)?,
        sigma_s_e: stress_solid_elastic(d, pi, f, g, params)?,
        sigma_s_v: stress_solid_viscous(d, &grad, f, params)?,
        s_lin: stress_linear_from_grad(d, &grad, pi, params)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_strip_domain, GeometryConfig};
    use nalgebra::{Matrix2, Matrix3};

    #[test]
    fn pressure_only() {
        let s = linear_stress(&Matrix2::zeros(), 2.5, 3.0);
        assert_eq!(s, Matrix2::new(-2.5, 0.0, 0.0, -2.5));
    }

    #[test]
    fn simple_shear_field() {
        let d = build_strip_domain(&GeometryConfig::default()).unwrap();
        let vel = MacVelocity::from_fn(&d, |_, y| (y, 0.0));
        let pi = Field::cell_scalar(&d, DomainTag::Both, |_, _| 0.0);
        let p = PhysParams { nu_f: 2.0, nu_s: 5.0, ..PhysParams::default() };
        let s = stress_linear_s(&d, &vel, &pi, &p).unwrap();
        for j in 0..d.ny() {
            let nu = p.nu(d.side_of_row(j));
            let t = s.tensor(3, j);
            assert!((t[1] - nu).abs() < 1e-12 && (t[2] - nu).abs() < 1e-12);
            assert!(t[0].abs() < 1e-12 && t[3].abs() < 1e-12);
        }
    }

    #[test]
    fn fluid_stress_reduces_at_identity() {
        let g = Matrix2::new(0.3, -1.0, 0.7, 0.2);
        assert_eq!(fluid_stress(&g, 1.5, &Matrix2::identity(), 2.0), linear_stress(&g, 1.5, 2.0));
        let g3 = Matrix3::new(0.3, -1.0, 0.7, 0.2, 0.1, 0.0, 0.5, 0.4, -0.3);
        assert_eq!(fluid_stress(&g3, 1.5, &Matrix3::identity(), 2.0), linear_stress(&g3, 1.5, 2.0));
    }

    #[test]
    fn elastic_examples() {
        assert_eq!(solid_elastic_stress(0.0, &Matrix2::identity(), 1.0, 3.0).unwrap(), Matrix2::zeros());
        let f = Matrix2::identity() * 1.7;
        assert!(solid_elastic_stress(0.0, &f, 1.7, 3.0).unwrap().abs().max() < 1e-15);
        let f = Matrix2::new(1.2, 0.0, 0.0, 1.0);
        let s = solid_elastic_stress(0.0, &f, 1.0, 2.0).unwrap();
        assert!((s - Matrix2::new(0.88, 0.0, 0.0, 0.0)).abs().max() < 1e-14);
        assert!(solid_elastic_stress(0.0, &f, 0.0, 2.0).is_err());
    }

    #[test]
    fn viscous_at_identity() {
        let g = Matrix2::new(0.3, -1.0, 0.7, 0.2);
        assert_eq!(solid_viscous_stress(&g, &Matrix2::identity(), 2.0), (g + g.transpose()) * 2.0);
        assert_eq!(solid_viscous_stress(&Matrix2::zeros(), &Matrix2::identity(), 2.0), Matrix2::zeros());
    }
}
