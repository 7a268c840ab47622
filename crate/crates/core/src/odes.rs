//! Pointwise ODEs for the growth metric `g` and the foam-cell concentration `c*`.
//!
//! `∂_t g = γβ/(nρ_s) c_s g`, `∂_t c* = β c_s − γβ/ρ_s c_s c*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DomainTag, Field, PhysParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OdeScheme {
    #[default]
    ImplicitEuler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub scheme: OdeScheme,
    pub dt: f64,
}

impl OdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("numerics.dt", format!("must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Classical RK4 step of `y' = f(t, y)`.
pub fn rk4_step(f: impl Fn(f64, f64) -> f64, t: f64, y: f64, dt: f64) -> f64 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1);
    let k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2);
    let k4 = f(t + dt, y + dt * k3);
    y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// One step of the growth ODE at a point with `c_s` frozen over the step.
pub fn g_point(g: f64, c_s: f64, dt: f64, params: &PhysParams, scheme: OdeScheme) -> Result<f64> {
    let z = dt * params.growth_rate() * c_s;
    let out = match scheme {
        OdeScheme::ImplicitEuler => {
            if z >= 1.0 {
                return Err(Error::StepSize { product: z });
            }
            g / (1.0 - z)
        }
        OdeScheme::Rk4 => g * (1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0),
    };
    if !(out > 0.0) {
        return Err(Error::GrowthBound { g: out, bound: 0.0 });
    }
    Ok(out)
}

/// One step of the foam-cell ODE at a point with `c_s` frozen over the step.
pub fn cstar_point(cstar: f64, c_s: f64, dt: f64, params: &PhysParams, scheme: OdeScheme) -> Result<f64> {
    let a = params.volume_rate();
    let b = params.beta;
    match scheme {
        OdeScheme::ImplicitEuler => {
            let den = 1.0 + dt * a * c_s;
            if den <= 0.0 {
                return Err(Error::StepSize { product: -dt * a * c_s });
            }
            Ok((cstar + dt * b * c_s) / den)
        }
        OdeScheme::Rk4 => Ok(rk4_step(|_, y| b * c_s - a * c_s * y, 0.0, cstar, dt)),
    }
}

fn solid_pair(g: &Field, c_s: &Field) -> Result<()> {
    if g.tag != DomainTag::Solid {
        return Err(Error::Field(format!("ODE state must live on the solid, got {:?}", g.tag)));
    }
    if !c_s.rows().contains(&g.rows().start) || !c_s.rows().contains(&(g.rows().end - 1)) {
        return Err(Error::Field("c_s does not cover the solid rows".into()));
    }
    Ok(())
}

fn step_field(y: &Field, c_s: &Field, mut f: impl FnMut(f64, f64) -> Result<f64>) -> Result<Field> {
    solid_pair(y, c_s)?;
    let mut out = y.clone();
    for j in y.rows() {
        for i in 0..y.nx() {
            out.set(i, j, 0, f(y.at(i, j, 0), c_s.at(i, j, 0))?);
        }
    }
    Ok(out)
}

pub fn step_g(g: &Field, c_s: &Field, dt: f64, params: &PhysParams, scheme: OdeScheme) -> Result<Field> {
    step_field(g, c_s, |gv, cv| g_point(gv, cv, dt, params, scheme))
}

pub fn step_cstar(cstar: &Field, c_s: &Field, dt: f64, params: &PhysParams, scheme: OdeScheme) -> Result<Field> {
    step_field(cstar, c_s, |yv, cv| cstar_point(yv, cv, dt, params, scheme))
}

/// RK4 integration of `g` along a time-dependent `c_s(t)` from `g(0) = 1`.
pub fn integrate_g(c_s: impl Fn(f64) -> f64, t_end: f64, dt: f64, params: &PhysParams) -> f64 {
    let k = params.growth_rate();
    integrate(|t, y| k * c_s(t) * y, 1.0, t_end, dt)
}

/// RK4 integration of `c*` along a time-dependent `c_s(t)` from `c*(0) = 0`.
pub fn integrate_cstar(c_s: impl Fn(f64) -> f64, t_end: f64, dt: f64, params: &PhysParams) -> f64 {
    let (a, b) = (params.volume_rate(), params.beta);
    integrate(|t, y| b * c_s(t) - a * c_s(t) * y, 0.0, t_end, dt)
}

fn integrate(f: impl Fn(f64, f64) -> f64, y0: f64, t_end: f64, dt: f64) -> f64 {
    let n = (t_end / dt).round().max(1.0) as usize;
    let h = t_end / n as f64;
    (0..n).fold(y0, |y, k| rk4_step(&f, k as f64 * h, y, h))
}

/// Integral of equally spaced samples: Simpson where possible, a 3/8 panel
/// for an odd interval count, trapezoid for two samples.
pub fn integrate_samples(s: &[f64], dt: f64) -> f64 {
    let n = s.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * dt * (s[0] + s[1]),
        3 => dt / 3.0 * (s[0] + 4.0 * s[1] + s[2]),
        _ => {
            let intervals = n - 1;
            let (simpson_end, tail) = if intervals % 2 == 0 { (n - 1, false) } else { (n - 4, true) };
            let mut acc = 0.0;
            let mut k = 0;
            while k < simpson_end {
                acc += dt / 3.0 * (s[k] + 4.0 * s[k + 1] + s[k + 2]);
                k += 2;
            }
            if tail {
                let m = n - 4;
                acc += 3.0 * dt / 8.0 * (s[m] + 3.0 * s[m + 1] + 3.0 * s[m + 2] + s[m + 3]);
            }
            acc
        }
    }
}

/// `g(t) = exp(γβ/(nρ_s) ∫₀ᵗ c_s)` from equally spaced samples of `c_s`.
pub fn closed_form_g(c_s_history: &[f64], dt: f64, params: &PhysParams) -> f64 {
    (params.growth_rate() * integrate_samples(c_s_history, dt)).exp()
}

/// `g(t)` for constant `c₀`.
pub fn g_constant(c0: f64, t: f64, params: &PhysParams) -> f64 {
    (params.growth_rate() * c0 * t).exp()
}

/// `c*(t) = (ρ_s/γ)(1 − exp(−γβc₀t/ρ_s))` for constant `c₀`.
pub fn cstar_constant(c0: f64, t: f64, params: &PhysParams) -> f64 {
    params.rho_s / params.gamma * (1.0 - (-params.volume_rate() * c0 * t).exp())
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// Composite five-point Gauss–Legendre quadrature.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let m = a + (p as f64 + 0.5) * h;
            GL5.iter().map(|&(x, w)| w * f(m + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// `c*(t) = ∫₀ᵗ exp(−∫_σ^t γβ/ρ_s c_s) β c_s(σ) dσ` by nested quadrature.
pub fn cstar_duhamel(c_s: impl Fn(f64) -> f64, t: f64, params: &PhysParams, panels: usize) -> f64 {
    let (a, b) = (params.volume_rate(), params.beta);
    let inner = |s: f64| gauss_legendre(&c_s, s, t, panels);
    gauss_legendre(|s| (-a * inner(s)).exp() * b * c_s(s), 0.0, t, panels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_strip_domain, GeometryConfig, Rank, Staggering};

    #[test]
    fn no_macrophages_no_growth() {
        let p = PhysParams::default();
        for s in [OdeScheme::ImplicitEuler, OdeScheme::Rk4] {
            assert_eq!(g_point(1.3, 0.0, 0.1, &p, s).unwrap(), 1.3);
            assert_eq!(cstar_point(0.0, 0.0, 0.1, &p, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn implicit_euler_step_limit() {
        let p = PhysParams::default();
        // rate = 1/2 per unit c with defaults
        assert!(matches!(g_point(1.0, 4.0, 0.5, &p, OdeScheme::ImplicitEuler), Err(Error::StepSize { .. })));
        assert!(g_point(1.0, 3.9, 0.5, &p, OdeScheme::ImplicitEuler).is_ok());
    }

    #[test]
    fn rk4_against_constant_closed_forms() {
        let p = PhysParams { gamma: 0.7, beta: 1.3, rho_s: 1.1, ..PhysParams::default() };
        let c0 = 0.8;
        let g = integrate_g(|_| c0, 1.0, 1e-2, &p);
        assert!((g / g_constant(c0, 1.0, &p) - 1.0).abs() < 1e-8);
        let cs = integrate_cstar(|_| c0, 1.0, 1e-2, &p);
        assert!((cs / cstar_constant(c0, 1.0, &p) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn resorption_for_negative_input() {
        let p = PhysParams::default();
        let g = integrate_g(|_| -0.5, 1.0, 1e-2, &p);
        assert!(g > 0.0 && g < 1.0);
    }

    #[test]
    fn sample_quadrature_exact_for_cubics() {
        for n in [2usize, 3, 4, 5, 8, 11] {
            let dt = 1.0 / (n - 1) as f64;
            let lin: Vec<f64> = (0..n).map(|k| 2.0 + 3.0 * k as f64 * dt).collect();
            assert!((integrate_samples(&lin, dt) - 3.5).abs() < 1e-13);
            if n >= 3 {
                let cub: Vec<f64> = (0..n).map(|k| (k as f64 * dt).powi(3)).collect();
                assert!((integrate_samples(&cub, dt) - 0.25).abs() < 1e-13);
            }
        }
        let p = PhysParams::default();
        assert_eq!(closed_form_g(&[0.0; 7], 0.1, &p), 1.0);
    }

    #[test]
    fn duhamel_matches_constant_case() {
        let p = PhysParams { gamma: 2.0, ..PhysParams::default() };
        let v = cstar_duhamel(|_| 0.6, 1.0, &p, 8);
        assert!((v - cstar_constant(0.6, 1.0, &p)).abs() < 1e-12);
    }

    #[test]
    fn field_steps_respect_tags() {
        let d = build_strip_domain(&GeometryConfig::default()).unwrap();
        let p = PhysParams::default();
        let g = Field::constant(&d, Staggering::CellCenter, DomainTag::Solid, Rank::Scalar, 1.0);
        let c = Field::constant(&d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar, 0.2);
        let g1 = step_g(&g, &c, 0.1, &p, OdeScheme::ImplicitEuler).unwrap();
        assert!(g1.values.iter().all(|v| (v - 1.0 / (1.0 - 0.01)).abs() < 1e-15));
        let cf = c.restrict(&d, DomainTag::Fluid).unwrap();
        assert!(step_g(&g, &cf, 0.1, &p, OdeScheme::Rk4).is_err());
        assert!(step_g(&c, &c, 0.1, &p, OdeScheme::Rk4).is_err());
    }
}
