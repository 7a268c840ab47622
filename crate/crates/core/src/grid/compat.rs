use serde::Serialize;

use super::{jump_at_interface, ops, InitialData, PhysParams, Side, TwoPhaseDomain};
use crate::error::Result;

/// Derivative at a boundary face from three cells on one side (`dir = -1`
/// for cells below the face, `+1` for cells above).
pub(crate) const DERIV3: [f64; 3] = [2.0, -3.0, 1.0];

#[derive(Debug, Clone, Serialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    pub tolerance: f64,
    pub residuals: Vec<Residual>,
}

impl CompatibilityReport {
    pub fn pass(&self) -> bool {
        self.residuals.iter().all(|r| r.pass)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|r| r.name == name).map(|r| r.value)
    }

    pub fn failures(&self) -> Vec<String> {
        self.residuals
            .iter()
            .filter(|r| !r.pass)
            .map(|r| format!("{} = {:e}", r.name, r.value))
            .collect()
    }
}

/// One-sided y-derivative at the face `jf` of column `i` from rows on `side`.
fn one_sided_dy(d: &TwoPhaseDomain, vals: impl Fn(usize) -> f64, jf: usize, below: bool) -> f64 {
    if below {
        (DERIV3[0] * vals(jf - 1) + DERIV3[1] * vals(jf - 2) + DERIV3[2] * vals(jf - 3)) / d.dy
    } else {
        -(DERIV3[0] * vals(jf) + DERIV3[1] * vals(jf + 1) + DERIV3[2] * vals(jf + 2)) / d.dy
    }
}

/// Discrete residuals of the initial compatibility conditions.
///
/// Velocity: `Div v⁰ = 0`, `⟦v⁰⟧ = 0`, vanishing tangential stress jump on Γ
/// and tangential stress on Γ_s. Concentration: the permeability law, flux
/// continuity on Γ and the no-flux condition on Γ_s. Every residual is a max
/// norm compared against `tol`.
pub fn check_compatibility(
    d: &TwoPhaseDomain,
    w0: &InitialData,
    params: &PhysParams,
    tol: f64,
) -> Result<CompatibilityReport> {
    let v0 = &w0.v0;
    let c0 = &w0.c0;
    let jf = d.ny_f;
    let top = d.ny();
    let mut out = Vec::new();
    let mut push = |name: &str, value: f64| {
        out.push(Residual { name: name.to_string(), value, pass: value <= tol && value.is_finite() });
    };

    push("div_v0", ops::mac_divergence(d, v0).max_abs());
    // Normal velocity is single-valued on Γ by construction; the tangential
    // component is compared through its one-sided traces.
    push("velocity_jump", jump_at_interface(d, &v0.u)?.max_abs());

    let mut shear_jump: f64 = 0.0;
    let mut shear_top: f64 = 0.0;
    for i in 0..d.nx {
        let u = |j: usize| v0.u.at(i, j, 0);
        let dvdx = (v0.v.at(i, jf, 0) - v0.v.at(d.im(i), jf, 0)) / d.dx;
        let sf = params.nu_f * (one_sided_dy(d, u, jf, true) + dvdx);
        let ss = params.nu_s * (one_sided_dy(d, u, jf, false) + dvdx);
        shear_jump = shear_jump.max((ss - sf).abs());
        let dvdx_top = (v0.v.at(i, top, 0) - v0.v.at(d.im(i), top, 0)) / d.dx;
        shear_top = shear_top.max((params.nu_s * (one_sided_dy(d, u, top, true) + dvdx_top)).abs());
    }
    push("tangential_stress_jump", shear_jump);
    push("tangential_stress_outer", shear_top);

    let cj = jump_at_interface(d, c0)?;
    let mut perm: f64 = 0.0;
    let mut flux_jump: f64 = 0.0;
    let mut flux_top: f64 = 0.0;
    for i in 0..d.nx {
        let c = |j: usize| c0.at(i, j, 0);
        let flux_s = params.diff(Side::Solid) * one_sided_dy(d, c, jf, false);
        let flux_f = params.diff(Side::Fluid) * one_sided_dy(d, c, jf, true);
        perm = perm.max((params.zeta * cj.at(i, 0) - flux_s).abs());
        flux_jump = flux_jump.max((flux_s - flux_f).abs());
        flux_top = flux_top.max((params.d_s * one_sided_dy(d, c, top, true)).abs());
    }
    push("permeability_law", perm);
    push("flux_jump", flux_jump);
    push("outer_flux", flux_top);

    Ok(CompatibilityReport { tolerance: tol, residuals: out })
}
