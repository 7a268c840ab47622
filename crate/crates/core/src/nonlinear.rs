//! Right-hand sides of the linearised system evaluated at an iterate.
//!
//! All tensors are built pointwise at cell centres from the current level of
//! the iterate and its kinematics, then differenced inside each subdomain.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    interface_trace, jump_at_interface, ops, outer_trace, DomainTag, Field, MacVelocity, PhysParams, Rank, Side, Staggering,
    Trace, TwoPhaseDomain,
};
use crate::kinematics::{arr2, mat2, KinLevel, KinematicsState};
use crate::material::{solid_elastic_stress, solid_viscous_stress};
use crate::spaces::{self, NormSpec};
use crate::state::{Level, StateW};

/// Which of the two equivalent expressions for `G` to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GForm {
    /// `−(F⁻ᵀ − I) : ∇v`
    #[default]
    Pointwise,
    /// `−Div((F⁻¹ − I) v)`, plus `v · Div F⁻ᵀ` on the solid.
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearOptions {
    #[serde(default)]
    pub g_form: GForm,
    #[serde(default = "default_g_min")]
    pub g_min: f64,
}

fn default_g_min() -> f64 {
    0.5
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        NonlinearOptions { g_form: GForm::Pointwise, g_min: default_g_min() }
    }
}

/// Data `(K, G, H¹, H², F¹, F², F³, F⁴, F⁵)` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearData {
    /// Vector, fluid cells.
    pub k_f: Field,
    /// Vector, solid cells (`K̄_s + Kˢᵍ`).
    pub k_s: Field,
    /// Scalar, both subdomains.
    pub g: Field,
    /// `⟦G⟧` on Γ and `G` on Γ_s.
    pub g_gamma: Trace,
    pub g_top: Trace,
    pub h1: Trace,
    pub h2: Trace,
    pub f1_f: Field,
    pub f1_s: Field,
    pub f2_f: Trace,
    pub f2_s: Trace,
    pub f3: Trace,
    pub f4: Field,
    pub f5: Field,
}

fn sub_field(a: &Field, b: &Field) -> Field {
    let mut z = a.clone();
    z.axpy(-1.0, b);
    z
}

fn sub_trace(a: &Trace, b: &Trace) -> Trace {
    Trace { ncomp: a.ncomp, values: a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect() }
}

impl NonlinearData {
    pub fn sub(&self, o: &NonlinearData) -> NonlinearData {
        NonlinearData {
            k_f: sub_field(&self.k_f, &o.k_f),
            k_s: sub_field(&self.k_s, &o.k_s),
            g: sub_field(&self.g, &o.g),
            g_gamma: sub_trace(&self.g_gamma, &o.g_gamma),
            g_top: sub_trace(&self.g_top, &o.g_top),
            h1: sub_trace(&self.h1, &o.h1),
            h2: sub_trace(&self.h2, &o.h2),
            f1_f: sub_field(&self.f1_f, &o.f1_f),
            f1_s: sub_field(&self.f1_s, &o.f1_s),
            f2_f: sub_trace(&self.f2_f, &o.f2_f),
            f2_s: sub_trace(&self.f2_s, &o.f2_s),
            f3: sub_trace(&self.f3, &o.f3),
            f4: sub_field(&self.f4, &o.f4),
            f5: sub_field(&self.f5, &o.f5),
        }
    }

    pub fn max_abs(&self) -> f64 {
        [
            self.k_f.max_abs(),
            self.k_s.max_abs(),
            self.g.max_abs(),
            self.g_gamma.max_abs(),
            self.g_top.max_abs(),
            self.h1.max_abs(),
            self.h2.max_abs(),
            self.f1_f.max_abs(),
            self.f1_s.max_abs(),
            self.f2_f.max_abs(),
            self.f2_s.max_abs(),
            self.f3.max_abs(),
            self.f4.max_abs(),
            self.f5.max_abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// `K` on MAC faces for the momentum solve.
    pub fn k_mac(&self, d: &TwoPhaseDomain) -> MacVelocity {
        let mut k = Field::zeros(d, Staggering::CellCenter, DomainTag::Both, Rank::Vector);
        k.overwrite_from(&self.k_f);
        k.overwrite_from(&self.k_s);
        ops::cells_to_mac(d, &k)
    }
}

fn check_growth(g: &Field, g_min: f64) -> Result<()> {
    let m = g.min();
    if !(m >= g_min) {
        return Err(Error::GrowthBound { g: m, bound: g_min });
    }
    Ok(())
}

fn solid_part(d: &TwoPhaseDomain, f: &Field) -> Result<Field> {
    match f.tag {
        DomainTag::Solid => Ok(f.clone()),
        _ => f.restrict(d, DomainTag::Solid),
    }
}

/// `K̃_f` and `K̃_s` at one level.
pub fn ktilde(d: &TwoPhaseDomain, lv: Level, kin: &KinLevel, params: &PhysParams) -> Result<(Field, Field)> {
    let grad = ops::velocity_gradient(d, lv.vel);
    let id = Matrix2::identity();
    let mut kf = Field::zeros(d, Staggering::CellCenter, DomainTag::Fluid, Rank::Tensor);
    for j in d.rows_of(Side::Fluid) {
        for i in 0..d.nx {
            let finv = mat2(kin.finv.get_tensor(i, j)?);
            let a = finv.transpose() - id;
            let gv = mat2(grad.tensor(i, j));
            let pi = lv.pi.get(i, j, 0)?;
            let nu = params.nu_f;
            let t = -a * pi
                + (finv * gv + gv.transpose() * finv.transpose()) * a * nu
                + ((finv - id) * gv + gv.transpose() * a) * nu;
            kf.set_tensor(i, j, arr2(&t));
        }
    }
    let mut ks = Field::zeros(d, Staggering::CellCenter, DomainTag::Solid, Rank::Tensor);
    for j in d.rows_of(Side::Solid) {
        for i in 0..d.nx {
            let f = mat2(kin.f.get_tensor(i, j)?);
            let a = mat2(kin.finv.get_tensor(i, j)?).transpose() - id;
            let g = lv.g.get(i, j, 0)?;
            let pi = lv.pi.get(i, j, 0)?;
            let ig2 = 1.0 / (g * g);
            let t = -a * pi + ((f - id) * ig2 + id * (ig2 - 1.0) - a) * params.mu_s;
            ks.set_tensor(i, j, arr2(&t));
        }
    }
    Ok((kf, ks))
}

/// `(K_f, K_s)` with `K_s = Div K̃_s + Kˢᵍ`.
pub fn assemble_k(d: &TwoPhaseDomain, lv: Level, kin: &KinLevel, params: &PhysParams, opts: &NonlinearOptions) -> Result<(Field, Field)> {
    check_growth(lv.g, opts.g_min)?;
    let (kf, ks) = ktilde(d, lv, kin, params)?;
    let k_f = ops::divergence_rows(d, &kf);
    let mut k_s = ops::divergence_rows(d, &ks);
    let g = solid_part(d, lv.g)?;
    let grad_g = ops::gradient(d, &g);
    let grad = ops::velocity_gradient(d, lv.vel);
    let n = params.n();
    for j in d.rows_of(Side::Solid) {
        for i in 0..d.nx {
            let f = mat2(kin.f.get_tensor(i, j)?);
            let finv = mat2(kin.finv.get_tensor(i, j)?);
            let gv = g.at(i, j, 0);
            let gvel = mat2(grad.tensor(i, j));
            let sigma = solid_elastic_stress(lv.pi.get(i, j, 0)?, &f, gv, params.mu_s)? + solid_viscous_stress(&gvel, &f, params.nu_s);
            let dg = Vector2::new(grad_g.at(i, j, 0), grad_g.at(i, j, 1)) * (n / gv);
            let ksg = -(sigma * finv.transpose()) * dg;
            k_s.set(i, j, 0, k_s.at(i, j, 0) + ksg[0]);
            k_s.set(i, j, 1, k_s.at(i, j, 1) + ksg[1]);
        }
    }
    Ok((k_f, k_s))
}

/// `G` on both subdomains with its jump on Γ and its trace on Γ_s.
pub fn assemble_g(d: &TwoPhaseDomain, lv: Level, kin: &KinLevel, form: GForm) -> Result<(Field, Trace, Trace)> {
    let mut g = Field::zeros(d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar);
    match form {
        GForm::Pointwise => {
            let grad = ops::velocity_gradient(d, lv.vel);
            for j in 0..d.ny() {
                for i in 0..d.nx {
                    let a = mat2(kin.finv.get_tensor(i, j)?).transpose() - Matrix2::identity();
                    let val = -a.component_mul(&mat2(grad.tensor(i, j))).sum();
                    g.set(i, j, 0, val);
                }
            }
        }
        GForm::Conservative => {
            let v = ops::cell_velocity(d, lv.vel);
            let mut w = v.clone();
            let mut finv_t = kin.finv.clone();
            for j in 0..d.ny() {
                for i in 0..d.nx {
                    let finv = mat2(kin.finv.get_tensor(i, j)?);
                    let x = (finv - Matrix2::identity()) * Vector2::new(v.at(i, j, 0), v.at(i, j, 1));
                    w.set(i, j, 0, x[0]);
                    w.set(i, j, 1, x[1]);
                    finv_t.set_tensor(i, j, arr2(&finv.transpose()));
                }
            }
            let div = ops::divergence(d, &w);
            let div_ft = ops::divergence_rows(d, &finv_t);
            for j in 0..d.ny() {
                for i in 0..d.nx {
                    let mut val = -div.at(i, j, 0);
                    if !d.is_fluid_row(j) {
                        val += v.at(i, j, 0) * div_ft.at(i, j, 0) + v.at(i, j, 1) * div_ft.at(i, j, 1);
                    }
                    g.set(i, j, 0, val);
                }
            }
        }
    }
    let jump = jump_at_interface(d, &g)?;
    let top = outer_trace(d, &g)?;
    Ok((g, jump, top))
}

/// Normal component `T n` (n = e_y) of a tensor trace.
fn normal_part(t: &Trace) -> Trace {
    let mut out = Trace::zeros(t.len(), 2);
    for i in 0..t.len() {
        out.set(i, 0, t.at(i, 1));
        out.set(i, 1, t.at(i, 3));
    }
    out
}

/// `H¹ = −⟦K̃⟧ n_Γ`, `H² = −K̃_s n_Γs` from given tensors.
pub fn h_from_ktilde(d: &TwoPhaseDomain, kf: &Field, ks: &Field) -> Result<(Trace, Trace)> {
    let tf = normal_part(&interface_trace(d, kf, Side::Fluid)?);
    let ts = normal_part(&interface_trace(d, ks, Side::Solid)?);
    let top = normal_part(&outer_trace(d, ks)?);
    let h1 = Trace { ncomp: 2, values: ts.values.iter().zip(&tf.values).map(|(s, f)| f - s).collect() };
    let h2 = Trace { ncomp: 2, values: top.values.iter().map(|v| -v).collect() };
    Ok((h1, h2))
}

pub fn assemble_h(d: &TwoPhaseDomain, lv: Level, kin: &KinLevel, params: &PhysParams) -> Result<(Trace, Trace)> {
    let (kf, ks) = ktilde(d, lv, kin, params)?;
    h_from_ktilde(d, &kf, &ks)
}

/// Concentration data `(F¹_f, F¹_s, F²_f, F²_s, F³)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationData {
    pub f1_f: Field,
    pub f1_s: Field,
    pub f2_f: Trace,
    pub f2_s: Trace,
    pub f3: Trace,
}

/// `F̃ = D (F⁻¹F⁻ᵀ − I) ∇c` at every cell.
pub fn ftilde(d: &TwoPhaseDomain, c: &Field, kin: &KinLevel, params: &PhysParams) -> Result<Field> {
    let grad = ops::gradient(d, c);
    let mut out = grad.clone();
    for j in 0..d.ny() {
        let dc = params.diff(d.side_of_row(j));
        for i in 0..d.nx {
            let finv = mat2(kin.finv.get_tensor(i, j)?);
            let b = finv * finv.transpose() - Matrix2::identity();
            let x = b * Vector2::new(grad.at(i, j, 0), grad.at(i, j, 1)) * dc;
            out.set(i, j, 0, x[0]);
            out.set(i, j, 1, x[1]);
        }
    }
    Ok(out)
}

/// Bulk sources, the decoupled Neumann data on Γ and the flux on Γ_s.
///
/// `⟦c⟧` entering `ζ⟦c⟧` is the one consistent with the two one-sided
/// half-cell fluxes, so that at a fixed point the interface flux equals
/// `ζ⟦c⟧ + F̄²_s` on both sides.
pub fn assemble_fc(d: &TwoPhaseDomain, lv: Level, kin: &KinLevel, params: &PhysParams, opts: &NonlinearOptions) -> Result<ConcentrationData> {
    check_growth(lv.g, opts.g_min)?;
    if lv.c.tag != DomainTag::Both {
        return Err(Error::Field("concentration must cover both subdomains".into()));
    }
    let ft = ftilde(d, lv.c, kin, params)?;
    let ft_f = ft.restrict(d, DomainTag::Fluid)?;
    let ft_s = ft.restrict(d, DomainTag::Solid)?;
    let f1_f = ops::divergence(d, &ft_f);
    let mut f1_s = ops::divergence(d, &ft_s);

    let g = solid_part(d, lv.g)?;
    let grad_g = ops::gradient(d, &g);
    let grad_c = ops::gradient(d, lv.c);
    let (n, beta, gamma) = (params.n(), params.beta, params.gamma);
    for j in d.rows_of(Side::Solid) {
        for i in 0..d.nx {
            let c = lv.c.at(i, j, 0);
            let gv = g.at(i, j, 0);
            let finv = mat2(kin.finv.get_tensor(i, j)?);
            let flux = finv * finv.transpose() * Vector2::new(grad_c.at(i, j, 0), grad_c.at(i, j, 1)) * params.d_s;
            let dg = Vector2::new(grad_g.at(i, j, 0), grad_g.at(i, j, 1)) * (n / gv);
            let fsg = -beta * c * (1.0 + gamma / params.rho_s * c) - dg.dot(&flux);
            f1_s.set(i, j, 0, f1_s.at(i, j, 0) + fsg);
        }
    }

    let tf = interface_trace(d, &ft_f, Side::Fluid)?;
    let ts = interface_trace(d, &ft_s, Side::Solid)?;
    let top = outer_trace(d, &ft_s)?;
    let a_f = 0.5 * d.dy / params.d_f;
    let a_s = 0.5 * d.dy / params.d_s;
    let jf = d.ny_f;
    let mut f2_f = Trace::zeros(d.nx, 1);
    let mut f2_s = Trace::zeros(d.nx, 1);
    let mut f3 = Trace::zeros(d.nx, 1);
    for i in 0..d.nx {
        let b_f = -(ts.at(i, 1) - tf.at(i, 1));
        let b_s = -ts.at(i, 1);
        let dc = lv.c.at(i, jf, 0) - lv.c.at(i, jf - 1, 0);
        let jump = (dc - b_s * (a_s + a_f) - b_f * a_f) / (1.0 + params.zeta * (a_s + a_f));
        let fs = params.zeta * jump + b_s;
        f2_s.set(i, 0, fs);
        f2_f.set(i, 0, fs + b_f);
        f3.set(i, 0, -top.at(i, 1));
    }
    Ok(ConcentrationData { f1_f, f1_s, f2_f, f2_s, f3 })
}

/// `F⁴ = −(γβ/ρ_s) c_s c*`, `F⁵ = −(γβ/(nρ_s)) c_s (g − 1)` on solid cells.
pub fn assemble_f45(d: &TwoPhaseDomain, lv: Level, params: &PhysParams) -> Result<(Field, Field)> {
    let mut f4 = Field::zeros(d, Staggering::CellCenter, DomainTag::Solid, Rank::Scalar);
    let mut f5 = f4.clone();
    let (a, k) = (params.volume_rate(), params.growth_rate());
    for j in d.rows_of(Side::Solid) {
        for i in 0..d.nx {
            let c = lv.c.get(i, j, 0)?;
            f4.set(i, j, 0, -a * c * lv.cstar.get(i, j, 0)?);
            f5.set(i, j, 0, -k * c * (lv.g.get(i, j, 0)? - 1.0));
        }
    }
    Ok((f4, f5))
}

/// Every data piece at one level.
pub fn assemble(d: &TwoPhaseDomain, lv: Level, kin: &KinLevel, params: &PhysParams, opts: &NonlinearOptions) -> Result<NonlinearData> {
    check_growth(lv.g, opts.g_min)?;
    let (k_f, k_s) = assemble_k(d, lv, kin, params, opts)?;
    let (kf, ks) = ktilde(d, lv, kin, params)?;
    let (h1, h2) = h_from_ktilde(d, &kf, &ks)?;
    let (g, g_gamma, g_top) = assemble_g(d, lv, kin, opts.g_form)?;
    let fc = assemble_fc(d, lv, kin, params, opts)?;
    let (f4, f5) = assemble_f45(d, lv, params)?;
    Ok(NonlinearData {
        k_f,
        k_s,
        g,
        g_gamma,
        g_top,
        h1,
        h2,
        f1_f: fc.f1_f,
        f1_s: fc.f1_s,
        f2_f: fc.f2_f,
        f2_s: fc.f2_s,
        f3: fc.f3,
        f4,
        f5,
    })
}

/// Data at every level of a state.
pub fn assemble_series(
    d: &TwoPhaseDomain,
    w: &StateW,
    kin: &KinematicsState,
    params: &PhysParams,
    opts: &NonlinearOptions,
) -> Result<Vec<NonlinearData>> {
    if kin.levels.len() != w.len() {
        return Err(Error::Shape("kinematics and state have different numbers of levels".into()));
    }
    (0..w.len()).into_par_iter().map(|k| assemble(d, w.level(k), &kin.levels[k], params, opts)).collect()
}

/// Discrete `Z_T` norm of a data series: sum of the component norms.
pub fn zt_norm(d: &TwoPhaseDomain, data: &[NonlinearData], spec: &NormSpec, dt: f64) -> f64 {
    let q = spec.q;
    let sigma = 1.0 - 1.0 / q;
    let col = |f: fn(&NonlinearData) -> &Field| -> Vec<Field> { data.iter().map(|x| f(x).clone()).collect() };
    let tcol = |f: fn(&NonlinearData) -> &Trace| -> Vec<Trace> { data.iter().map(|x| f(x).clone()).collect() };
    let lq = |s: &[Field]| spaces::lq_time_of(s, dt, q, |x| spaces::lq_grid(d, x, q));
    let w1 = |s: &[Field]| spaces::lq_time_of(s, dt, q, |x| spaces::w1_grid(d, x, q));
    let tr = |s: &[Trace]| spaces::trace_norm(d, s, sigma, q, dt);

    let g = col(|x| &x.g);
    let prim: Vec<Field> = g.iter().map(|x| spaces::antiderivative_y(d, x)).collect();
    let dprim: Vec<f64> = spaces::time_derivative(&prim, dt).iter().map(|x| spaces::lq_grid(d, x, q)).collect();
    let g_norm = w1(&g) + spaces::lq_intervals(&dprim, q, dt) + tr(&tcol(|x| &x.g_gamma)) + tr(&tcol(|x| &x.g_top));

    lq(&col(|x| &x.k_f))
        + lq(&col(|x| &x.k_s))
        + g_norm
        + tr(&tcol(|x| &x.h1))
        + tr(&tcol(|x| &x.h2))
        + lq(&col(|x| &x.f1_f))
        + lq(&col(|x| &x.f1_s))
        + tr(&tcol(|x| &x.f2_f))
        + tr(&tcol(|x| &x.f2_s))
        + tr(&tcol(|x| &x.f3))
        + w1(&col(|x| &x.f4))
        + w1(&col(|x| &x.f5))
}

/// `‖N(w¹) − N(w²)‖_Z / ‖w¹ − w²‖_Y` over the window.
#[allow(clippy::too_many_arguments)]
pub fn contraction_probe(
    d: &TwoPhaseDomain,
    w1: &StateW,
    w2: &StateW,
    kin1: &KinematicsState,
    kin2: &KinematicsState,
    params: &PhysParams,
    spec: &NormSpec,
    opts: &NonlinearOptions,
) -> Result<f64> {
    if w1.times != w2.times || w1.len() < 2 {
        return Err(Error::Argument("states must share at least two time levels".into()));
    }
    if w1.c[0] != w2.c[0] || w1.cstar[0] != w2.cstar[0] || w1.g[0] != w2.g[0] {
        return Err(Error::Argument("states must share their initial concentration, foam cells and growth".into()));
    }
    let den = spaces::discrete_yt_norm(d, &w1.diff(w2)?, spec).sum();
    if !(den > 0.0) {
        return Err(Error::Argument("identical states: zero denominator".into()));
    }
    let n1 = assemble_series(d, w1, kin1, params, opts)?;
    let n2 = assemble_series(d, w2, kin2, params, opts)?;
    let diff: Vec<NonlinearData> = n1.iter().zip(&n2).map(|(a, b)| a.sub(b)).collect();
    Ok(zt_norm(d, &diff, spec, w1.dt()) / den)
}
