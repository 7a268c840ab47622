//! Deformation gradient bookkeeping on the reference configuration.

use nalgebra::{Matrix2, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ops, DomainTag, Field, MacVelocity, Rank, Staggering, TwoPhaseDomain};

pub const SINGULAR_DET: f64 = 1e-10;
pub const NEUMANN_TERM_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    LeftEndpoint,
    #[default]
    Trapezoidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionPath {
    Neumann,
    Direct,
}

pub fn mat2(t: [f64; 4]) -> Matrix2<f64> {
    Matrix2::new(t[0], t[1], t[2], t[3])
}

pub fn arr2(m: &Matrix2<f64>) -> [f64; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

/// Determinant of a small square matrix.
pub fn det<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    match N {
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => nalgebra::DMatrix::from_column_slice(N, N, m.as_slice()).determinant(),
    }
}

/// F⁻¹, by the Neumann series Σ (I − F)^k when ‖F − I‖_F ≤ 1/(2 M_q) and by
/// direct inversion otherwise.
pub fn invert_f<const N: usize>(f: &SMatrix<f64, N, N>, m_q: f64) -> Result<(SMatrix<f64, N, N>, InversionPath)> {
    let det = det(f);
    if !(det.abs() >= SINGULAR_DET) {
        return Err(Error::SingularDeformation { det, cell: usize::MAX });
    }
    let id = SMatrix::<f64, N, N>::identity();
    let defect = id - f;
    if defect.norm() <= 1.0 / (2.0 * m_q.max(1.0)) {
        let mut sum = id;
        let mut term = id;
        for _ in 0..200 {
            term *= defect;
            sum += term;
            if term.norm() < NEUMANN_TERM_TOL {
                break;
            }
        }
        Ok((sum, InversionPath::Neumann))
    } else {
        let inv = f
            .try_inverse()
            .ok_or(Error::SingularDeformation { det, cell: usize::MAX })?;
        Ok((inv, InversionPath::Direct))
    }
}

/// `F_new = F_prev + dt ∇v(t_prev)` (left endpoint) or
/// `F_prev + dt/2 (∇v(t_prev) + ∇v(t_new))` (trapezoidal).
pub fn accumulate_f(f_prev: &Field, grad_prev: &Field, grad_new: &Field, dt: f64, rule: Quadrature) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("dt must be positive, got {dt}")));
    }
    f_prev.check_layout(grad_prev, "accumulate_f")?;
    f_prev.check_layout(grad_new, "accumulate_f")?;
    let mut out = f_prev.clone();
    match rule {
        Quadrature::LeftEndpoint => out.axpy(dt, grad_prev),
        Quadrature::Trapezoidal => {
            out.axpy(0.5 * dt, grad_prev);
            out.axpy(0.5 * dt, grad_new);
        }
    }
    Ok(out)
}

/// Pointwise inversion of a tensor field. Returns (F⁻¹, J, cells that left
/// the Neumann regime).
pub fn invert_field(f: &Field, m_q: f64) -> Result<(Field, Field, usize)> {
    let mut finv = f.clone();
    let mut j = f.like(Rank::Scalar);
    let mut direct = 0;
    for (k, chunk) in f.values.chunks_exact(4).enumerate() {
        let m = mat2([chunk[0], chunk[1], chunk[2], chunk[3]]);
        let (inv, path) = invert_f(&m, m_q).map_err(|e| match e {
            Error::SingularDeformation { det, .. } => Error::SingularDeformation { det, cell: k },
            other => other,
        })?;
        if path == InversionPath::Direct {
            direct += 1;
        }
        finv.values[4 * k..4 * k + 4].copy_from_slice(&arr2(&inv));
        j.values[k] = m.determinant();
    }
    if direct > 0 {
        log::warn!("{direct} cells outside the Neumann-series regime; used direct inversion");
    }
    Ok((finv, j, direct))
}

/// `T = J σ F⁻ᵀ`.
pub fn piola_transform<const N: usize>(sigma: &SMatrix<f64, N, N>, f: &SMatrix<f64, N, N>, j: f64) -> Result<SMatrix<f64, N, N>> {
    if !(j > 0.0) {
        return Err(Error::SingularDeformation { det: j, cell: usize::MAX });
    }
    let inv = f
        .try_inverse()
        .ok_or(Error::SingularDeformation { det: det(f), cell: usize::MAX })?;
    Ok(sigma * inv.transpose() * j)
}

/// `Fᵉ = F / g`.
pub fn growth_decompose<const N: usize>(f: &SMatrix<f64, N, N>, g: f64) -> Result<SMatrix<f64, N, N>> {
    if !(g > 0.0) {
        return Err(Error::GrowthBound { g, bound: 0.0 });
    }
    Ok(f / g)
}

/// `det Fᵍ = gⁿ` for isotropic growth `Fᵍ = g I`.
pub fn growth_det(g: f64, n: usize) -> f64 {
    g.powi(n as i32)
}

/// Max over interior levels of |d(det F)/dt − tr(F⁻¹ dF/dt) det F| with
/// centred differences.
pub fn det_time_derivative_residual<const N: usize>(path: &[SMatrix<f64, N, N>], dt: f64) -> Result<f64> {
    if path.len() < 3 {
        return Err(Error::Argument("need at least 3 time levels".into()));
    }
    let mut worst: f64 = 0.0;
    for w in path.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        let det_b = det(b);
        let inv = b
            .try_inverse()
            .ok_or(Error::SingularDeformation { det: det_b, cell: usize::MAX })?;
        let ddet = (det(c) - det(a)) / (2.0 * dt);
        let df = (c - a) / (2.0 * dt);
        let rhs = (inv * df).trace() * det_b;
        worst = worst.max((ddet - rhs).abs());
    }
    Ok(worst)
}

/// Cofactor field `J F⁻ᵀ` (2D: `[[F22, −F21], [−F12, F11]]`).
pub fn cofactor_field(f: &Field) -> Field {
    let mut out = f.clone();
    for c in out.values.chunks_exact_mut(4) {
        let (a, b, cc, dd) = (c[0], c[1], c[2], c[3]);
        c.copy_from_slice(&[dd, -cc, -b, a]);
    }
    out
}

/// Max norm of the discrete `Div(J F⁻ᵀ)`.
pub fn piola_identity_residual(d: &TwoPhaseDomain, f: &Field, j: &Field) -> Result<f64> {
    if f.rank != Rank::Tensor || j.rank != Rank::Scalar {
        return Err(Error::Shape("piola residual needs a tensor F and a scalar J".into()));
    }
    let mut jfit = f.clone();
    for (k, c) in jfit.values.chunks_exact_mut(4).enumerate() {
        let m = mat2([c[0], c[1], c[2], c[3]]);
        let inv = m
            .try_inverse()
            .ok_or(Error::SingularDeformation { det: m.determinant(), cell: k })?;
        let t = inv.transpose() * j.values[k];
        c.copy_from_slice(&arr2(&t));
    }
    Ok(ops::divergence_rows(d, &jfit).max_abs())
}

/// F, F⁻¹, J and Fᵉ at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct KinLevel {
    pub t: f64,
    pub f: Field,
    pub finv: Field,
    pub j: Field,
    pub fe: Option<Field>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicsState {
    pub levels: Vec<KinLevel>,
}

impl KinematicsState {
    /// Identity kinematics at time `t`.
    pub fn identity(d: &TwoPhaseDomain, t: f64) -> Self {
        let f = Field::identity(d, DomainTag::Both);
        let j = Field::constant(d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar, 1.0);
        KinematicsState { levels: vec![KinLevel { t, f: f.clone(), finv: f, j, fe: None }] }
    }

    /// Accumulate F along a velocity history starting from `f0` at `times[0]`.
    /// `vels[k]` is the velocity at `times[k]`; `g` (solid growth metric per
    /// level) adds the elastic split.
    pub fn from_history(
        d: &TwoPhaseDomain,
        f0: &Field,
        vels: &[MacVelocity],
        times: &[f64],
        rule: Quadrature,
        m_q: f64,
        g: Option<&[Field]>,
    ) -> Result<Self> {
        if vels.len() != times.len() || vels.is_empty() {
            return Err(Error::Shape("velocity history and time levels differ in length".into()));
        }
        let mut levels = Vec::with_capacity(times.len());
        let mut f = f0.clone();
        let mut grad_prev = ops::velocity_gradient(d, &vels[0]);
        for k in 0..times.len() {
            if k > 0 {
                let grad = ops::velocity_gradient(d, &vels[k]);
                f = accumulate_f(&f, &grad_prev, &grad, times[k] - times[k - 1], rule)?;
                grad_prev = grad;
            }
            let (finv, j, _) = invert_field(&f, m_q)?;
            let fe = match g {
                Some(gs) => Some(elastic_part(d, &f, &gs[k])?),
                None => None,
            };
            levels.push(KinLevel { t: times[k], f: f.clone(), finv, j, fe });
        }
        Ok(KinematicsState { levels })
    }

    pub fn last(&self) -> &KinLevel {
        self.levels.last().expect("kinematics has at least one level")
    }
}

/// Fᵉ = F/g on solid cells.
pub fn elastic_part(d: &TwoPhaseDomain, f: &Field, g: &Field) -> Result<Field> {
    let mut fe = Field::zeros(d, Staggering::CellCenter, DomainTag::Solid, Rank::Tensor);
    for j in fe.rows() {
        for i in 0..d.nx {
            let gv = g.get(i, j, 0)?;
            let m = growth_decompose(&mat2(f.get_tensor(i, j)?), gv)?;
            fe.set_tensor(i, j, arr2(&m));
        }
    }
    Ok(fe)
}

impl Field {
    /// Checked tensor read.
    pub fn get_tensor(&self, i: usize, j: usize) -> Result<[f64; 4]> {
        if self.rank != Rank::Tensor {
            return Err(Error::Field("not a tensor field".into()));
        }
        self.get(i, j, 0)?;
        Ok(self.tensor(i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_strip_domain, GeometryConfig};
    use nalgebra::Matrix3;

    #[test]
    fn identity_inverts_to_identity() {
        let (inv, path) = invert_f(&Matrix2::identity(), 1.0).unwrap();
        assert_eq!(inv, Matrix2::identity());
        assert_eq!(path, InversionPath::Neumann);
    }

    #[test]
    fn nilpotent_series_terminates() {
        let f = Matrix2::new(1.0, 0.1, 0.0, 1.0);
        let (inv, path) = invert_f(&f, 1.0).unwrap();
        assert_eq!(path, InversionPath::Neumann);
        assert_eq!(inv, Matrix2::new(1.0, -0.1, 0.0, 1.0));
    }

    #[test]
    fn diagonal_inverse() {
        let f = Matrix2::new(1.2, 0.0, 0.0, 0.9);
        let (inv, _) = invert_f(&f, 1.0).unwrap();
        assert!((inv[(0, 0)] - 1.0 / 1.2).abs() < 1e-14);
        assert!((inv[(1, 1)] - 1.0 / 0.9).abs() < 1e-14);
        assert!(((f * inv) - Matrix2::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn far_from_identity_uses_direct_path() {
        let f = Matrix2::new(3.0, 1.0, 0.5, 2.0);
        let (inv, path) = invert_f(&f, 1.0).unwrap();
        assert_eq!(path, InversionPath::Direct);
        assert!(((f * inv) - Matrix2::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn singular_deformation_rejected() {
        let f = Matrix2::new(1.0, 2.0, 0.5, 1.0);
        assert!(matches!(invert_f(&f, 1.0), Err(Error::SingularDeformation { .. })));
    }

    #[test]
    fn inversion_in_three_dimensions() {
        let f = Matrix3::new(1.1, 0.05, 0.0, 0.0, 0.95, 0.02, 0.01, 0.0, 1.0);
        let (inv, _) = invert_f(&f, 1.0).unwrap();
        assert!(((f * inv) - Matrix3::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn piola_examples() {
        let f = Matrix2::new(2.0, 0.0, 0.0, 1.0);
        let t = piola_transform(&Matrix2::identity(), &f, 2.0).unwrap();
        assert!((t - Matrix2::new(1.0, 0.0, 0.0, 2.0)).abs().max() < 1e-15);
        let s = Matrix2::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(piola_transform(&s, &Matrix2::identity(), 1.0).unwrap(), s);
        assert_eq!(piola_transform(&Matrix2::zeros(), &f, 2.0).unwrap(), Matrix2::zeros());
    }

    #[test]
    fn growth_split_examples() {
        let f = Matrix2::new(2.0, 0.0, 0.0, 2.0);
        assert_eq!(growth_decompose(&f, 2.0).unwrap(), Matrix2::identity());
        assert_eq!(growth_det(2.0, 2), 4.0);
        let f = Matrix2::new(1.1, 0.0, 0.0, 1.3);
        let g = det(&f).sqrt();
        assert!((growth_decompose(&f, g).unwrap().determinant() - 1.0).abs() < 1e-14);
        assert!(growth_decompose(&f, 0.0).is_err());
        assert_eq!(growth_decompose(&f, 1.0).unwrap(), f);
    }

    #[test]
    fn det_derivative_constant_path() {
        let p = vec![Matrix2::new(1.0, 0.2, 0.1, 1.1); 5];
        assert_eq!(det_time_derivative_residual(&p, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn zero_velocity_keeps_identity() {
        let d = build_strip_domain(&GeometryConfig::default()).unwrap();
        let vels = vec![MacVelocity::zeros(&d); 4];
        let k = KinematicsState::from_history(
            &d,
            &Field::identity(&d, DomainTag::Both),
            &vels,
            &[0.0, 0.1, 0.2, 0.3],
            Quadrature::Trapezoidal,
            1.0,
            None,
        )
        .unwrap();
        let id = KinematicsState::identity(&d, 0.0);
        for l in &k.levels {
            assert_eq!(l.f, id.levels[0].f);
            assert_eq!(l.finv, id.levels[0].finv);
            assert_eq!(l.j, id.levels[0].j);
        }
    }
}
