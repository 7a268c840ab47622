//! Backward-Euler step of the two-phase Stokes transmission problem.
//!
//! Unknowns: `u` on every x-face, `v` on y-faces above the symmetry plane
//! (up to Γ_s for the traction variant, below it for the clamped variant),
//! `π` on every cell. Shear stress on Γ is two-valued; the interface trace of
//! `u` is eliminated from velocity continuity and the tangential stress jump,
//! and the normal stress jump enters the straddling control volume of the
//! interface `v` unknowns.

use serde::Serialize;

use super::sparse::{Assembly, DirectSolver, LinExpr};
use crate::error::{Error, Result};
use crate::grid::{DomainTag, Field, MacVelocity, PhysParams, Rank, Side, Staggering, Trace, TwoPhaseDomain};

/// Data of one step: momentum source `k` on MAC faces, divergence data,
/// stress jump `h1` on Γ, traction `h2` on Γ_s and the previous velocity.
#[derive(Debug, Clone)]
pub struct StokesRhs {
    pub k: MacVelocity,
    pub g_div: Field,
    pub h1: Trace,
    pub h2: Trace,
    pub v_init: MacVelocity,
}

impl StokesRhs {
    pub fn zeros(d: &TwoPhaseDomain) -> Self {
        StokesRhs {
            k: MacVelocity::zeros(d),
            g_div: Field::zeros(d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar),
            h1: Trace::zeros(d.nx, 2),
            h2: Trace::zeros(d.nx, 2),
            v_init: MacVelocity::zeros(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OuterBoundary {
    /// `S n = h2` on Γ_s.
    Traction,
    /// `v = g_b` on Γ_s (two components per column).
    Clamped(Trace),
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct StokesReport {
    pub system_residual: f64,
    pub velocity_jump: f64,
    pub tangential_jump: f64,
    pub divergence_residual: f64,
    pub pressure_mean: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone)]
pub struct StokesSolution {
    pub vel: MacVelocity,
    pub pi: Field,
    pub report: StokesReport,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    nx: usize,
    jmax: usize,
    nu: usize,
    nv: usize,
    np: usize,
    clamped: bool,
}

impl Layout {
    fn new(d: &TwoPhaseDomain, clamped: bool) -> Self {
        let ny = d.ny();
        let jmax = if clamped { ny - 1 } else { ny };
        Layout { nx: d.nx, jmax, nu: d.nx * ny, nv: d.nx * jmax, np: d.nx * ny, clamped }
    }
    fn n(&self) -> usize {
        self.nu + self.nv + self.np + usize::from(self.clamped)
    }
    fn u(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    fn v(&self, i: usize, j: usize) -> usize {
        self.nu + (j - 1) * self.nx + i
    }
    fn p(&self, i: usize, j: usize) -> usize {
        self.nu + self.nv + j * self.nx + i
    }
    fn lambda(&self) -> usize {
        self.nu + self.nv + self.np
    }
}

struct Stencil<'a> {
    d: &'a TwoPhaseDomain,
    p: &'a PhysParams,
    l: Layout,
    h1: &'a Trace,
    h2: &'a Trace,
    gb: Option<&'a Trace>,
}

impl Stencil<'_> {
    fn ux(&self, i: usize, j: usize) -> LinExpr {
        LinExpr::var(self.l.u(i, j), 1.0)
    }

    fn vy(&self, i: usize, j: usize) -> LinExpr {
        if j == 0 {
            LinExpr::konst(0.0)
        } else if j > self.l.jmax {
            LinExpr::konst(self.gb.map_or(0.0, |g| g.at(i, 1)))
        } else {
            LinExpr::var(self.l.v(i, j), 1.0)
        }
    }

    fn pr(&self, i: usize, j: usize) -> LinExpr {
        LinExpr::var(self.l.p(i, j), 1.0)
    }

    fn sxx(&self, i: usize, j: usize) -> LinExpr {
        let nu = self.p.nu(self.d.side_of_row(j));
        let s = 2.0 * nu / self.d.dx;
        self.pr(i, j).scaled(-1.0).plus(&self.ux(self.d.ip(i), j), s).plus(&self.ux(i, j), -s)
    }

    fn syy(&self, i: usize, j: usize) -> LinExpr {
        let nu = self.p.nu(self.d.side_of_row(j));
        let s = 2.0 * nu / self.d.dy;
        self.pr(i, j).scaled(-1.0).plus(&self.vy(i, j + 1), s).plus(&self.vy(i, j), -s)
    }

    /// Shear stress at node `(i, jn)` seen from `side`.
    fn sxy(&self, i: usize, jn: usize, side: Side) -> LinExpr {
        let d = self.d;
        let (dx, dy) = (d.dx, d.dy);
        let im = d.im(i);
        let dvdx = |jj: usize| self.vy(i, jj).plus(&self.vy(im, jj), -1.0).scaled(1.0 / dx);
        if jn == 0 {
            LinExpr::konst(0.0)
        } else if jn == d.ny() {
            match self.gb {
                None => LinExpr::konst(self.h2.at_node(i, 0)),
                Some(gb) => {
                    let ub = gb.at_node(i, 0);
                    let dudy = self.ux(i, jn - 1).scaled(-2.0 / dy).plus(&LinExpr::konst(2.0 * ub / dy), 1.0);
                    dudy.plus(&dvdx(jn), 1.0).scaled(self.p.nu_s)
                }
            }
        } else if jn == d.ny_f {
            let (nf, ns) = (self.p.nu_f, self.p.nu_s);
            let a = dvdx(jn);
            let uf = self.ux(i, jn - 1);
            let us = self.ux(i, jn);
            let h = self.h1.at_node(i, 0);
            let ug = us
                .clone()
                .scaled(ns / (nf + ns))
                .plus(&uf, nf / (nf + ns))
                .plus(&a, dy * (ns - nf) / (2.0 * (nf + ns)))
                .plus(&LinExpr::konst(-dy * h / (2.0 * (nf + ns))), 1.0);
            match side {
                Side::Fluid => ug.plus(&uf, -1.0).scaled(2.0 / dy).plus(&a, 1.0).scaled(nf),
                Side::Solid => us.plus(&ug, -1.0).scaled(2.0 / dy).plus(&a, 1.0).scaled(ns),
            }
        } else {
            let nu = self.p.nu(side);
            self.ux(i, jn)
                .plus(&self.ux(i, jn - 1), -1.0)
                .scaled(1.0 / dy)
                .plus(&dvdx(jn), 1.0)
                .scaled(nu)
        }
    }

    /// Interface trace of `u` reconstructed from the fluid and the solid side.
    fn interface_u(&self, i: usize, x: &[f64]) -> (f64, f64) {
        let d = self.d;
        let jf = d.ny_f;
        let dy = d.dy;
        let a = self.vy(i, jf).plus(&self.vy(d.im(i), jf), -1.0).scaled(1.0 / d.dx).eval(x);
        let sf = self.sxy(i, jf, Side::Fluid).eval(x);
        let ss = self.sxy(i, jf, Side::Solid).eval(x);
        let uf = x[self.l.u(i, jf - 1)] + 0.5 * dy * (sf / self.p.nu_f - a);
        let us = x[self.l.u(i, jf)] - 0.5 * dy * (ss / self.p.nu_s - a);
        (uf, us)
    }
}

fn assemble(d: &TwoPhaseDomain, params: &PhysParams, dt: f64, outer: &OuterBoundary, rhs: &StokesRhs) -> (Assembly, Layout) {
    let gb = match outer {
        OuterBoundary::Traction => None,
        OuterBoundary::Clamped(g) => Some(g),
    };
    let l = Layout::new(d, gb.is_some());
    let st = Stencil { d, p: params, l, h1: &rhs.h1, h2: &rhs.h2, gb };
    let mut a = Assembly::new(l.n());
    let (dx, dy) = (d.dx, d.dy);
    let ny = d.ny();
    let jf = d.ny_f;

    for j in 0..ny {
        let side = d.side_of_row(j);
        let rho = params.rho(side);
        for i in 0..d.nx {
            let e = st
                .ux(i, j)
                .scaled(rho / dt)
                .plus(&st.sxx(i, j), -1.0 / dx)
                .plus(&st.sxx(d.im(i), j), 1.0 / dx)
                .plus(&st.sxy(i, j + 1, side), -1.0 / dy)
                .plus(&st.sxy(i, j, side), 1.0 / dy);
            let val = rhs.k.u.at(i, j, 0) + rho / dt * rhs.v_init.u.at(i, j, 0);
            a.set_row(l.u(i, j), &e, val);
        }
    }

    for j in 1..=l.jmax {
        for i in 0..d.nx {
            let ip = d.ip(i);
            let old = rhs.v_init.v.at(i, j, 0);
            let src = rhs.k.v.at(i, j, 0);
            let (e, rho) = if j == jf {
                let rho = 0.5 * (params.rho_f + params.rho_s);
                let e = st
                    .vy(i, j)
                    .scaled(rho / dt)
                    .plus(&st.syy(i, j), -1.0 / dy)
                    .plus(&st.syy(i, j - 1), 1.0 / dy)
                    .plus(&LinExpr::konst(rhs.h1.at(i, 1)), 1.0 / dy)
                    .plus(&st.sxy(ip, j, Side::Fluid), -0.5 / dx)
                    .plus(&st.sxy(i, j, Side::Fluid), 0.5 / dx)
                    .plus(&st.sxy(ip, j, Side::Solid), -0.5 / dx)
                    .plus(&st.sxy(i, j, Side::Solid), 0.5 / dx);
                (e, rho)
            } else if j == ny {
                let rho = params.rho_s;
                let e = st
                    .vy(i, j)
                    .scaled(rho / dt)
                    .plus(&LinExpr::konst(rhs.h2.at(i, 1)), -2.0 / dy)
                    .plus(&st.syy(i, j - 1), 2.0 / dy)
                    .plus(&LinExpr::konst(rhs.h2.at_node(ip, 0) - rhs.h2.at_node(i, 0)), -1.0 / dx);
                (e, rho)
            } else {
                let side = d.side_of_row(j);
                let rho = params.rho(side);
                let e = st
                    .vy(i, j)
                    .scaled(rho / dt)
                    .plus(&st.syy(i, j), -1.0 / dy)
                    .plus(&st.syy(i, j - 1), 1.0 / dy)
                    .plus(&st.sxy(ip, j, side), -1.0 / dx)
                    .plus(&st.sxy(i, j, side), 1.0 / dx);
                (e, rho)
            };
            a.set_row(l.v(i, j), &e, src + rho / dt * old);
        }
    }

    for j in 0..ny {
        for i in 0..d.nx {
            let mut e = st
                .ux(d.ip(i), j)
                .plus(&st.ux(i, j), -1.0)
                .scaled(1.0 / dx)
                .plus(&st.vy(i, j + 1), 1.0 / dy)
                .plus(&st.vy(i, j), -1.0 / dy);
            if l.clamped {
                e.add(&LinExpr::var(l.lambda(), 1.0), 1.0);
            }
            a.set_row(l.p(i, j), &e, rhs.g_div.at(i, j, 0));
        }
    }

    if l.clamped {
        let mut e = LinExpr::default();
        let w = 1.0 / (d.nx * ny) as f64;
        for j in 0..ny {
            for i in 0..d.nx {
                e.terms.push((l.p(i, j), w));
            }
        }
        a.set_row(l.lambda(), &e, 0.0);
    }
    (a, l)
}

/// Factorized Stokes operator for a fixed `(domain, params, dt, boundary)`.
pub struct StokesOperator {
    d: TwoPhaseDomain,
    params: PhysParams,
    dt: f64,
    outer: OuterBoundary,
    solver: DirectSolver,
}

impl StokesOperator {
    pub fn new(d: &TwoPhaseDomain, params: &PhysParams, dt: f64, outer: OuterBoundary) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        let rhs = StokesRhs::zeros(d);
        let (a, _) = assemble(d, params, dt, &outer, &rhs);
        let solver = DirectSolver::new(a.matrix())?;
        Ok(StokesOperator { d: d.clone(), params: params.clone(), dt, outer, solver })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn matrix_market(&self) -> String {
        let kind = match self.outer {
            OuterBoundary::Traction => "traction",
            OuterBoundary::Clamped(_) => "clamped",
        };
        self.solver
            .matrix()
            .to_matrix_market(&format!("two-phase Stokes ({kind}), nx={} ny={} dt={}", self.d.nx, self.d.ny(), self.dt))
    }

    pub fn solve(&self, rhs: &StokesRhs) -> Result<StokesSolution> {
        let d = &self.d;
        if let OuterBoundary::Clamped(gb) = &self.outer {
            check_hidden_condition(d, &rhs.g_div, gb)?;
        }
        let (a, l) = assemble(d, &self.params, self.dt, &self.outer, rhs);
        let x = self.solver.solve(&a.rhs)?;
        let mut vel = MacVelocity::zeros(d);
        for j in 0..d.ny() {
            for i in 0..d.nx {
                vel.u.set(i, j, 0, x[l.u(i, j)]);
            }
        }
        for j in 1..=d.ny() {
            for i in 0..d.nx {
                let val = if j <= l.jmax {
                    x[l.v(i, j)]
                } else {
                    match &self.outer {
                        OuterBoundary::Clamped(g) => g.at(i, 1),
                        OuterBoundary::Traction => 0.0,
                    }
                };
                vel.v.set(i, j, 0, val);
            }
        }
        let mut pi = Field::zeros(d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar);
        for j in 0..d.ny() {
            for i in 0..d.nx {
                pi.set(i, j, 0, x[l.p(i, j)]);
            }
        }

        let gb = match &self.outer {
            OuterBoundary::Clamped(g) => Some(g),
            OuterBoundary::Traction => None,
        };
        let st = Stencil { d, p: &self.params, l, h1: &rhs.h1, h2: &rhs.h2, gb };
        let mut report = StokesReport {
            system_residual: self.solver.residual(&x, &a.rhs),
            ..StokesReport::default()
        };
        for i in 0..d.nx {
            let (uf, us) = st.interface_u(i, &x);
            report.velocity_jump = report.velocity_jump.max((us - uf).abs());
            let sf = st.sxy(i, d.ny_f, Side::Fluid).eval(&x);
            let ss = st.sxy(i, d.ny_f, Side::Solid).eval(&x);
            report.tangential_jump = report.tangential_jump.max((ss - sf - rhs.h1.at_node(i, 0)).abs());
        }
        let div = crate::grid::ops::mac_divergence(d, &vel);
        report.divergence_residual = div
            .values
            .iter()
            .zip(&rhs.g_div.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        report.pressure_mean = pi.values.iter().sum::<f64>() / pi.values.len() as f64;
        if l.clamped {
            report.multiplier = x[l.lambda()];
        }
        Ok(StokesSolution { vel, pi, report })
    }
}

/// ∫ g_div = ∮ g_b·n must hold when the clamped data vanish.
fn check_hidden_condition(d: &TwoPhaseDomain, g_div: &Field, gb: &Trace) -> Result<()> {
    if !gb.is_zero() {
        return Ok(());
    }
    let area = d.cell_area();
    let integral: f64 = g_div.values.iter().sum::<f64>() * area;
    let scale: f64 = g_div.values.iter().map(|v| v.abs()).sum::<f64>() * area;
    if integral.abs() > 1e-9 * scale.max(1e-300) && integral.abs() > 1e-14 {
        return Err(Error::HiddenCondition { integral });
    }
    Ok(())
}

pub fn solve_two_phase_stokes_neumann(rhs: &StokesRhs, dt: f64, params: &PhysParams, d: &TwoPhaseDomain) -> Result<StokesSolution> {
    StokesOperator::new(d, params, dt, OuterBoundary::Traction)?.solve(rhs)
}

pub fn solve_two_phase_stokes_dirichlet(
    rhs: &StokesRhs,
    g_b: &Trace,
    dt: f64,
    params: &PhysParams,
    d: &TwoPhaseDomain,
) -> Result<StokesSolution> {
    check_hidden_condition(d, &rhs.g_div, g_b)?;
    StokesOperator::new(d, params, dt, OuterBoundary::Clamped(g_b.clone()))?.solve(rhs)
}
