//! Backward-Euler step of the decoupled Neumann heat problems.
//!
//! Cell-centred finite volumes on one subdomain. Boundary fluxes are data,
//! so the discrete mass balance holds exactly.

use serde::Serialize;

use super::sparse::{Assembly, DirectSolver, LinExpr};
use crate::error::{Error, Result};
use crate::grid::{DomainTag, Field, PhysParams, Rank, Side, Staggering, Trace, TwoPhaseDomain};

/// Data of one heat step on a single subdomain.
///
/// `f_gamma` is `D ∇c · n_Γ` on Γ with `n_Γ` pointing into the solid;
/// `f_gammas` is `D ∇c · n_Γs` on Γ_s (solid only).
#[derive(Debug, Clone)]
pub struct HeatRhs {
    pub f_bulk: Field,
    pub f_gamma: Trace,
    pub f_gammas: Option<Trace>,
    pub c_init: Field,
}

impl HeatRhs {
    pub fn zeros(d: &TwoPhaseDomain, side: Side) -> Self {
        let tag = tag_of(side);
        HeatRhs {
            f_bulk: Field::zeros(d, Staggering::CellCenter, tag, Rank::Scalar),
            f_gamma: Trace::zeros(d.nx, 1),
            f_gammas: match side {
                Side::Fluid => None,
                Side::Solid => Some(Trace::zeros(d.nx, 1)),
            },
            c_init: Field::zeros(d, Staggering::CellCenter, tag, Rank::Scalar),
        }
    }
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct HeatReport {
    /// `|Δ∫c/dt − ∫f − ∮fluxes|` relative to the largest term.
    pub mass_residual: f64,
    pub system_residual: f64,
}

#[derive(Debug, Clone)]
pub struct HeatSolution {
    pub c: Field,
    pub report: HeatReport,
}

pub(crate) fn tag_of(side: Side) -> DomainTag {
    match side {
        Side::Fluid => DomainTag::Fluid,
        Side::Solid => DomainTag::Solid,
    }
}

/// Factorized heat operator for one subdomain and step size.
pub struct HeatOperator {
    d: TwoPhaseDomain,
    side: Side,
    diff: f64,
    dt: f64,
    solver: DirectSolver,
}

impl HeatOperator {
    pub fn new(d: &TwoPhaseDomain, side: Side, params: &PhysParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        let diff = params.diff(side);
        let a = assemble(d, side, diff, dt, &HeatRhs::zeros(d, side))?;
        Ok(HeatOperator { d: d.clone(), side, diff, dt, solver: DirectSolver::new(a.matrix())? })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn matrix_market(&self) -> String {
        self.solver.matrix().to_matrix_market(&format!(
            "heat ({:?}), nx={} ny={} dt={} D={}",
            self.side,
            self.d.nx,
            self.d.ny(),
            self.dt,
            self.diff
        ))
    }

    pub fn solve(&self, rhs: &HeatRhs) -> Result<HeatSolution> {
        let d = &self.d;
        let a = assemble(d, self.side, self.diff, self.dt, rhs)?;
        let x = self.solver.solve(&a.rhs)?;
        let tag = tag_of(self.side);
        let mut c = Field::zeros(d, Staggering::CellCenter, tag, Rank::Scalar);
        let r0 = d.rows_of(self.side).start;
        for j in d.rows_of(self.side) {
            for i in 0..d.nx {
                c.set(i, j, 0, x[(j - r0) * d.nx + i]);
            }
        }
        let area = d.cell_area();
        let dm: f64 = c.values.iter().zip(&rhs.c_init.values).map(|(n, o)| n - o).sum::<f64>() * area / self.dt;
        let src: f64 = rhs.f_bulk.values.iter().sum::<f64>() * area;
        let (flux, scale_flux) = boundary_flux(d, self.side, rhs);
        let scale = dm.abs().max(src.abs()).max(scale_flux).max(f64::MIN_POSITIVE);
        let report = HeatReport {
            mass_residual: (dm - src - flux).abs() / scale,
            system_residual: self.solver.residual(&x, &a.rhs),
        };
        Ok(HeatSolution { c, report })
    }
}

/// Net boundary inflow `∮ D∂_ν c` and its absolute size.
fn boundary_flux(d: &TwoPhaseDomain, side: Side, rhs: &HeatRhs) -> (f64, f64) {
    let s: f64 = rhs.f_gamma.values.iter().sum::<f64>() * d.dx;
    let abs_g: f64 = rhs.f_gamma.values.iter().map(|v| v.abs()).sum::<f64>() * d.dx;
    match side {
        Side::Fluid => (s, abs_g),
        Side::Solid => {
            let (t, abs_t) = rhs
                .f_gammas
                .as_ref()
                .map(|g| (g.values.iter().sum::<f64>() * d.dx, g.values.iter().map(|v| v.abs()).sum::<f64>() * d.dx))
                .unwrap_or((0.0, 0.0));
            (t - s, abs_g.max(abs_t))
        }
    }
}

fn assemble(d: &TwoPhaseDomain, side: Side, diff: f64, dt: f64, rhs: &HeatRhs) -> Result<Assembly> {
    let tag = tag_of(side);
    for (name, f) in [("f_bulk", &rhs.f_bulk), ("c_init", &rhs.c_init)] {
        if f.tag != tag || f.staggering != Staggering::CellCenter {
            return Err(Error::Shape(format!("{name} must be a cell field tagged {tag:?}")));
        }
    }
    if rhs.f_gamma.len() != d.nx {
        return Err(Error::Shape("f_gamma needs one sample per column".into()));
    }
    let rows = d.rows_of(side);
    let (r0, r1) = (rows.start, rows.end);
    let n = (r1 - r0) * d.nx;
    let idx = |i: usize, j: usize| (j - r0) * d.nx + i;
    let mut a = Assembly::new(n);
    let (dx, dy) = (d.dx, d.dy);
    let cx = diff / (dx * dx);
    let cy = diff / (dy * dy);
    for j in r0..r1 {
        for i in 0..d.nx {
            let mut e = LinExpr::var(idx(i, j), 1.0 / dt + 2.0 * cx);
            e.add(&LinExpr::var(idx(d.ip(i), j), -cx), 1.0);
            e.add(&LinExpr::var(idx(d.im(i), j), -cx), 1.0);
            let mut bval = 0.0;
            if j + 1 < r1 {
                e.add(&LinExpr::var(idx(i, j), cy), 1.0);
                e.add(&LinExpr::var(idx(i, j + 1), -cy), 1.0);
            } else {
                bval += match side {
                    Side::Fluid => rhs.f_gamma.at(i, 0),
                    Side::Solid => rhs.f_gammas.as_ref().map_or(0.0, |g| g.at(i, 0)),
                } / dy;
            }
            if j > r0 {
                e.add(&LinExpr::var(idx(i, j), cy), 1.0);
                e.add(&LinExpr::var(idx(i, j - 1), -cy), 1.0);
            } else if side == Side::Solid {
                bval -= rhs.f_gamma.at(i, 0) / dy;
            }
            let val = rhs.c_init.at(i, j, 0) / dt + rhs.f_bulk.at(i, j, 0) + bval;
            a.set_row(idx(i, j), &e, val);
        }
    }
    Ok(a)
}

pub fn solve_heat_neumann(rhs: &HeatRhs, which: Side, dt: f64, params: &PhysParams, d: &TwoPhaseDomain) -> Result<HeatSolution> {
    HeatOperator::new(d, which, params, dt)?.solve(rhs)
}
