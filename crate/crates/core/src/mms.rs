//! Manufactured-solution convergence suites for the linear solvers.
//!
//! Exact fields are closures; every datum is derived from them with
//! sixth-order central differences, so the suites need no hand-written
//! derivatives.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{build_strip_domain, DomainTag, Field, GeometryConfig, MacVelocity, PhysParams, Side, Trace, TwoPhaseDomain};
use crate::linear::{
    solve_elliptic_transmission, HeatOperator, HeatRhs, JumpKind, OuterBoundary, StokesOperator, StokesRhs,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    StokesNeumann,
    StokesDirichlet,
    Heat,
    Elliptic,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::StokesNeumann, Suite::StokesDirichlet, Suite::Heat, Suite::Elliptic];

    pub fn name(self) -> &'static str {
        match self {
            Suite::StokesNeumann => "stokes-neumann",
            Suite::StokesDirichlet => "stokes-dirichlet",
            Suite::Heat => "heat",
            Suite::Elliptic => "elliptic",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::config("suite", format!("unknown suite '{s}' (expected stokes-neumann, stokes-dirichlet, heat or elliptic)")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub error: f64,
    /// Local slope against the previous row.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub suite: String,
    pub quantity: String,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log(error) against log(h).
    pub order: f64,
}

impl ConvergenceTable {
    pub fn new(suite: &str, quantity: &str, data: &[(f64, f64)]) -> Self {
        let mut rows = Vec::with_capacity(data.len());
        for (k, &(h, e)) in data.iter().enumerate() {
            let slope = (k > 0).then(|| (e / data[k - 1].1).ln() / (h / data[k - 1].0).ln());
            rows.push(ConvergenceRow { h, error: e, slope });
        }
        ConvergenceTable { suite: suite.into(), quantity: quantity.into(), rows, order: ls_slope(data) }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("suite,quantity,h,error,slope\n");
        for r in &self.rows {
            let slope = r.slope.map(|v| format!("{v:.6}")).unwrap_or_default();
            s.push_str(&format!("{},{},{:.6e},{:.6e},{}\n", self.suite, self.quantity, r.h, r.error, slope));
        }
        s
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn ls_slope(data: &[(f64, f64)]) -> f64 {
    let n = data.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = data.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

const FD_STEP: f64 = 1e-3;

/// Sixth-order central derivative of a scalar function.
pub fn deriv(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let e = FD_STEP;
    (-f(x - 3.0 * e) + 9.0 * f(x - 2.0 * e) - 45.0 * f(x - e) + 45.0 * f(x + e) - 9.0 * f(x + 2.0 * e) + f(x + 3.0 * e))
        / (60.0 * e)
}

type Fn2 = fn(f64, f64) -> f64;

fn dx2(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64) -> f64 {
    deriv(|s| f(s, y), x)
}

fn dy2(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64) -> f64 {
    deriv(|s| f(x, s), y)
}

const TAU: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;

/// Mesh with `ny` cells across both layers, `h_f = h_s = 1/2`, unit period
/// and square cells.
pub fn mms_domain(ny: usize) -> Result<TwoPhaseDomain> {
    build_strip_domain(&GeometryConfig { nx: ny, ny_f: ny / 2, ny_s: ny / 2, h_f: 0.5, h_s: 0.5, period: 1.0 })
}

pub fn mms_params() -> PhysParams {
    PhysParams { rho_f: 1.0, rho_s: 2.0, nu_f: 1.0, nu_s: 3.0, d_f: 0.7, d_s: 1.3, ..PhysParams::default() }
}

// Velocity continuous across Γ with u_y = v = 0 on the symmetry plane.
fn ue(x: f64, y: f64) -> f64 {
    (TAU * x).cos() * (1.0 + (PI * y).cos()) + 0.5 * y * y
}
fn ve(x: f64, y: f64) -> f64 {
    0.5 * (TAU * x).sin() * (PI * y).sin() + y * (1.0 - 0.5 * y)
}
fn pf(x: f64, y: f64) -> f64 {
    (TAU * x).sin() * y.cos()
}
fn ps(x: f64, y: f64) -> f64 {
    (TAU * x).cos() * y + 1.0
}

struct StokesExact {
    p: PhysParams,
}

impl StokesExact {
    fn pressure(&self, side: Side) -> Fn2 {
        match side {
            Side::Fluid => pf,
            Side::Solid => ps,
        }
    }

    /// Stress components `(Sxx, Sxy, Syy)` on `side`.
    fn stress(&self, side: Side, x: f64, y: f64) -> (f64, f64, f64) {
        let nu = self.p.nu(side);
        let p = self.pressure(side)(x, y);
        let ux = dx2(&ue, x, y);
        let uy = dy2(&ue, x, y);
        let vx = dx2(&ve, x, y);
        let vy = dy2(&ve, x, y);
        (-p + 2.0 * nu * ux, nu * (uy + vx), -p + 2.0 * nu * vy)
    }

    /// `−Div S` on `side`.
    fn force(&self, side: Side, x: f64, y: f64) -> (f64, f64) {
        let sxx = |a: f64, b: f64| self.stress(side, a, b).0;
        let sxy = |a: f64, b: f64| self.stress(side, a, b).1;
        let syy = |a: f64, b: f64| self.stress(side, a, b).2;
        (-(dx2(&sxx, x, y) + dy2(&sxy, x, y)), -(dx2(&sxy, x, y) + dy2(&syy, x, y)))
    }

    /// Step data for `v(t) = φ(t) V`, `π(t) = φ(t) P` at time `t`.
    fn rhs(&self, d: &TwoPhaseDomain, phi: f64, dphi: f64, v_init: MacVelocity) -> StokesRhs {
        let mut r = StokesRhs::zeros(d);
        for j in 0..d.ny() {
            let side = d.side_of_row(j);
            for i in 0..d.nx {
                let (x, y) = d.xface(i, j);
                let val = self.p.rho(side) * dphi * ue(x, y) + phi * self.force(side, x, y).0;
                r.k.u.set(i, j, 0, val);
            }
        }
        for j in 1..=d.ny() {
            for i in 0..d.nx {
                let (x, y) = d.yface(i, j);
                let val = if j == d.ny_f {
                    let rho = 0.5 * (self.p.rho_f + self.p.rho_s);
                    rho * dphi * ve(x, y) + phi * 0.5 * (self.force(Side::Fluid, x, y).1 + self.force(Side::Solid, x, y).1)
                } else {
                    let side = if j < d.ny_f { Side::Fluid } else { Side::Solid };
                    self.p.rho(side) * dphi * ve(x, y) + phi * self.force(side, x, y).1
                };
                r.k.v.set(i, j, 0, val);
            }
        }
        r.g_div = Field::cell_scalar(d, DomainTag::Both, |x, y| phi * (dx2(&ue, x, y) + dy2(&ve, x, y)));
        let hf = d.h_f;
        let top = d.height();
        r.h1 = Trace::from_fn(d, 2, |x| {
            let (_, a, b) = self.stress(Side::Fluid, x, hf);
            let (_, c, e) = self.stress(Side::Solid, x, hf);
            vec![phi * (c - a), phi * (e - b)]
        });
        r.h2 = Trace::from_fn(d, 2, |x| {
            let (_, a, b) = self.stress(Side::Solid, x, top);
            vec![phi * a, phi * b]
        });
        r.v_init = v_init;
        r
    }
}

fn exact_velocity(d: &TwoPhaseDomain, phi: f64) -> MacVelocity {
    MacVelocity::from_fn(d, |x, y| (phi * ue(x, y), phi * ve(x, y)))
}

fn clamp_data(d: &TwoPhaseDomain, phi: f64) -> Trace {
    let top = d.height();
    Trace::from_fn(d, 2, |x| vec![phi * ue(x, top), phi * ve(x, top)])
}

/// Discrete L² distance over all velocity faces.
pub fn velocity_l2(d: &TwoPhaseDomain, a: &MacVelocity, b: &MacVelocity) -> f64 {
    let su: f64 = a.u.values.iter().zip(&b.u.values).map(|(p, q)| (p - q).powi(2)).sum();
    let sv: f64 = a.v.values.iter().zip(&b.v.values).map(|(p, q)| (p - q).powi(2)).sum();
    ((su + sv) * d.cell_area()).sqrt()
}

fn stokes_level(ny: usize, clamped: bool) -> Result<(f64, f64, f64)> {
    let d = mms_domain(ny)?;
    let ex = StokesExact { p: mms_params() };
    let outer = if clamped { OuterBoundary::Clamped(clamp_data(&d, 1.0)) } else { OuterBoundary::Traction };
    let op = StokesOperator::new(&d, &ex.p, 1.0, outer)?;
    let exact = exact_velocity(&d, 1.0);
    let rhs = ex.rhs(&d, 1.0, 0.0, exact.clone());
    let sol = op.solve(&rhs)?;
    let mut pe = Field::cell_scalar(&d, DomainTag::Both, |x, y| if y < d.h_f { pf(x, y) } else { ps(x, y) });
    if clamped {
        let m = pe.values.iter().sum::<f64>() / pe.values.len() as f64;
        pe = pe.map(|v| v - m);
    }
    let perr = (sol.pi.values.iter().zip(&pe.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * d.cell_area()).sqrt();
    Ok((d.dy, velocity_l2(&d, &sol.vel, &exact), perr))
}

// Concentrations with zero flux on the symmetry plane.
fn cfe(x: f64, y: f64) -> f64 {
    (TAU * x).cos() * (PI * y).cos() + 1.0 + y * y
}
fn cse(x: f64, y: f64) -> f64 {
    (TAU * x).sin() * y * y + 2.0 + (PI * y).cos()
}

fn laplacian(f: Fn2, x: f64, y: f64) -> f64 {
    let fx = |a: f64, b: f64| dx2(&f, a, b);
    let fy = |a: f64, b: f64| dy2(&f, a, b);
    dx2(&fx, x, y) + dy2(&fy, x, y)
}

fn heat_level(ny: usize) -> Result<(f64, f64)> {
    let d = mms_domain(ny)?;
    let p = mms_params();
    let mut sq = 0.0;
    for (side, c) in [(Side::Fluid, cfe as Fn2), (Side::Solid, cse as Fn2)] {
        let diff = p.diff(side);
        let op = HeatOperator::new(&d, side, &p, 1.0)?;
        let tag = crate::linear::heat::tag_of(side);
        let mut rhs = HeatRhs::zeros(&d, side);
        rhs.f_bulk = Field::cell_scalar(&d, DomainTag::Both, |x, y| -diff * laplacian(c, x, y)).restrict(&d, tag)?;
        rhs.c_init = Field::cell_scalar(&d, DomainTag::Both, c).restrict(&d, tag)?;
        let hf = d.h_f;
        let top = d.height();
        rhs.f_gamma = Trace::from_fn(&d, 1, |x| vec![diff * dy2(&c, x, hf)]);
        if side == Side::Solid {
            rhs.f_gammas = Some(Trace::from_fn(&d, 1, |x| vec![diff * dy2(&c, x, top)]));
        }
        let sol = op.solve(&rhs)?;
        sq += sol.c.values.iter().zip(&rhs.c_init.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok((d.dy, (sq * d.cell_area()).sqrt()))
}

fn psi_f(x: f64, y: f64) -> f64 {
    (TAU * x).cos() * (PI * y).cos() + y * y
}
fn psi_s(x: f64, y: f64) -> f64 {
    (TAU * x).sin() * (1.0 - y) * y + y.exp()
}

fn elliptic_level(ny: usize, kind: JumpKind) -> Result<(f64, f64)> {
    let d = mms_domain(ny)?;
    let p = mms_params();
    let (wf, ws) = match kind {
        JumpKind::Plain => (1.0, 1.0),
        JumpKind::Weighted => (p.rho_f, p.rho_s),
    };
    let exact = Field::cell_scalar(&d, DomainTag::Both, |x, y| if y < d.h_f { psi_f(x, y) } else { psi_s(x, y) });
    let f = Field::cell_scalar(&d, DomainTag::Both, |x, y| -laplacian(if y < d.h_f { psi_f } else { psi_s }, x, y));
    let hf = d.h_f;
    let g = Trace::from_fn(&d, 1, |x| vec![dy2(&psi_s, x, hf) - dy2(&psi_f, x, hf)]);
    let h = Trace::from_fn(&d, 1, |x| vec![ws * psi_s(x, hf) - wf * psi_f(x, hf)]);
    let top = d.height();
    let gb = Trace::from_fn(&d, 1, |x| vec![psi_s(x, top)]);
    let sol = solve_elliptic_transmission(&f, &g, &h, &gb, kind, &d, &p)?;
    let e = (sol.psi.values.iter().zip(&exact.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * d.cell_area()).sqrt();
    Ok((d.dy, e))
}

/// Default refinement ladder: 16, 32 and 64 cells across the two layers.
pub const LEVELS: [usize; 3] = [16, 32, 64];

/// Spatial convergence tables of a suite.
pub fn run_suite(suite: Suite, levels: &[usize]) -> Result<Vec<ConvergenceTable>> {
    if levels.len() < 2 || levels.iter().any(|&n| n < 8 || n % 2 != 0) {
        return Err(Error::config("levels", "need at least two even resolutions of 8 or more"));
    }
    let name = suite.name();
    match suite {
        Suite::StokesNeumann | Suite::StokesDirichlet => {
            let clamped = suite == Suite::StokesDirichlet;
            let res: Vec<(f64, f64, f64)> = levels.par_iter().map(|&n| stokes_level(n, clamped)).collect::<Result<_>>()?;
            let v: Vec<(f64, f64)> = res.iter().map(|r| (r.0, r.1)).collect();
            let p: Vec<(f64, f64)> = res.iter().map(|r| (r.0, r.2)).collect();
            Ok(vec![ConvergenceTable::new(name, "velocity", &v), ConvergenceTable::new(name, "pressure", &p)])
        }
        Suite::Heat => {
            let c: Vec<(f64, f64)> = levels.par_iter().map(|&n| heat_level(n)).collect::<Result<_>>()?;
            Ok(vec![ConvergenceTable::new(name, "concentration", &c)])
        }
        Suite::Elliptic => {
            let a: Vec<(f64, f64)> = levels.par_iter().map(|&n| elliptic_level(n, JumpKind::Plain)).collect::<Result<_>>()?;
            let b: Vec<(f64, f64)> =
                levels.par_iter().map(|&n| elliptic_level(n, JumpKind::Weighted)).collect::<Result<_>>()?;
            Ok(vec![ConvergenceTable::new(name, "psi", &a), ConvergenceTable::new(name, "psi-weighted", &b)])
        }
    }
}

fn phi(t: f64) -> f64 {
    1.0 + (3.0 * t).sin()
}

fn dphi(t: f64) -> f64 {
    3.0 * (3.0 * t).cos()
}

fn stokes_in_time(d: &TwoPhaseDomain, clamped: bool, steps: usize, t_end: f64) -> Result<MacVelocity> {
    let ex = StokesExact { p: mms_params() };
    let dt = t_end / steps as f64;
    let mut v = exact_velocity(d, phi(0.0));
    let mut op: Option<StokesOperator> = None;
    for n in 1..=steps {
        let t = n as f64 * dt;
        let outer = if clamped { OuterBoundary::Clamped(clamp_data(d, phi(t))) } else { OuterBoundary::Traction };
        let o = match (&op, clamped) {
            (Some(o), false) => o,
            _ => op.insert(StokesOperator::new(d, &ex.p, dt, outer)?),
        };
        let rhs = ex.rhs(d, phi(t), dphi(t), v);
        v = o.solve(&rhs)?.vel;
    }
    Ok(v)
}

fn heat_in_time(d: &TwoPhaseDomain, steps: usize, t_end: f64) -> Result<Field> {
    let p = mms_params();
    let dt = t_end / steps as f64;
    let side = Side::Solid;
    let diff = p.diff(side);
    let op = HeatOperator::new(d, side, &p, dt)?;
    let tag = crate::linear::heat::tag_of(side);
    let base = Field::cell_scalar(d, DomainTag::Both, cse).restrict(d, tag)?;
    let lap = Field::cell_scalar(d, DomainTag::Both, |x, y| laplacian(cse, x, y)).restrict(d, tag)?;
    let hf = d.h_f;
    let top = d.height();
    let gam = Trace::from_fn(d, 1, |x| vec![diff * dy2(&cse, x, hf)]);
    let gams = Trace::from_fn(d, 1, |x| vec![diff * dy2(&cse, x, top)]);
    let mut c = base.scaled(phi(0.0));
    for n in 1..=steps {
        let t = n as f64 * dt;
        let mut rhs = HeatRhs::zeros(d, side);
        rhs.f_bulk = base.scaled(dphi(t));
        rhs.f_bulk.axpy(-diff * phi(t), &lap);
        rhs.f_gamma = Trace { ncomp: 1, values: gam.values.iter().map(|v| v * phi(t)).collect() };
        rhs.f_gammas = Some(Trace { ncomp: 1, values: gams.values.iter().map(|v| v * phi(t)).collect() });
        rhs.c_init = c;
        c = op.solve(&rhs)?.c;
    }
    Ok(c)
}

/// Temporal order of backward Euler against a same-grid reference with a
/// much finer step, for `stokes-neumann`, `stokes-dirichlet` and `heat`.
pub fn temporal_order(suite: Suite, ny: usize, steps: &[usize], t_end: f64) -> Result<ConvergenceTable> {
    let d = mms_domain(ny)?;
    let finest = *steps.iter().max().ok_or_else(|| Error::Argument("no step counts".into()))?;
    let reference_steps = finest * 16;
    let data: Vec<(f64, f64)> = match suite {
        Suite::StokesNeumann | Suite::StokesDirichlet => {
            let clamped = suite == Suite::StokesDirichlet;
            let r = stokes_in_time(&d, clamped, reference_steps, t_end)?;
            steps
                .par_iter()
                .map(|&s| Ok((t_end / s as f64, velocity_l2(&d, &stokes_in_time(&d, clamped, s, t_end)?, &r))))
                .collect::<Result<_>>()?
        }
        Suite::Heat => {
            let r = heat_in_time(&d, reference_steps, t_end)?;
            steps
                .par_iter()
                .map(|&s| {
                    let c = heat_in_time(&d, s, t_end)?;
                    let e = c.values.iter().zip(&r.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * d.cell_area();
                    Ok((t_end / s as f64, e.sqrt()))
                })
                .collect::<Result<_>>()?
        }
        Suite::Elliptic => return Err(Error::Argument("the elliptic suite has no time dependence".into())),
    };
    Ok(ConvergenceTable::new(suite.name(), "time", &data))
}
