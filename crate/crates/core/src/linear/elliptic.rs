//! Laplace transmission problem and divergence reduction.

use serde::{Deserialize, Serialize};

use super::sparse::{Assembly, DirectSolver, LinExpr};
use crate::error::{Error, Result};
use crate::grid::{ops, DomainTag, Field, MacVelocity, PhysParams, Rank, Staggering, Trace, TwoPhaseDomain};

/// Form of the jump condition on Γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum JumpKind {
    /// `ψ_s − ψ_f = h`
    #[default]
    Plain,
    /// `ρ_s ψ_s − ρ_f ψ_f = h`
    Weighted,
}

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub psi: Field,
    /// One-sided traces of ψ on Γ, fluid then solid.
    pub trace_f: Trace,
    pub trace_s: Trace,
    /// Normal derivative on Γ (fluid side, solid side).
    pub flux_f: Trace,
    pub flux_s: Trace,
    pub residual: f64,
}

struct Setup<'a> {
    d: &'a TwoPhaseDomain,
    wf: f64,
    ws: f64,
}

impl Setup<'_> {
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.d.nx + i
    }

    /// Fluid-side trace on Γ in terms of the two adjacent cells.
    fn trace_f(&self, i: usize, g: f64, h: f64) -> LinExpr {
        let d = self.d;
        let a = 2.0 / d.dy;
        let jf = d.ny_f;
        let k = self.ws / (self.ws + self.wf);
        LinExpr::var(self.idx(i, jf), k)
            .plus(&LinExpr::var(self.idx(i, jf - 1), k), 1.0)
            .plus(&LinExpr::konst(-k * (g / a + h / self.ws)), 1.0)
    }

    fn trace_s(&self, i: usize, g: f64, h: f64) -> LinExpr {
        self.trace_f(i, g, h).scaled(self.wf / self.ws).plus(&LinExpr::konst(h / self.ws), 1.0)
    }

    /// `∂_y ψ` on Γ from the fluid side.
    fn flux_f(&self, i: usize, g: f64, h: f64) -> LinExpr {
        let a = 2.0 / self.d.dy;
        self.trace_f(i, g, h).plus(&LinExpr::var(self.idx(i, self.d.ny_f - 1), -1.0), 1.0).scaled(a)
    }

    fn flux_s(&self, i: usize, g: f64, h: f64) -> LinExpr {
        let a = 2.0 / self.d.dy;
        LinExpr::var(self.idx(i, self.d.ny_f), 1.0).plus(&self.trace_s(i, g, h), -1.0).scaled(a)
    }

    /// `∂_y ψ` on Γ_s from the Dirichlet value.
    fn flux_top(&self, i: usize, gb: f64) -> LinExpr {
        let ny = self.d.ny();
        LinExpr::var(self.idx(i, ny - 1), -1.0).plus(&LinExpr::konst(gb), 1.0).scaled(2.0 / self.d.dy)
    }
}

fn assemble(s: &Setup, f: &Field, g: &Trace, h: &Trace, gb: &Trace) -> Assembly {
    let d = s.d;
    let ny = d.ny();
    let (dx, dy) = (d.dx, d.dy);
    let mut a = Assembly::new(d.nx * ny);
    for j in 0..ny {
        for i in 0..d.nx {
            let c = s.idx(i, j);
            let mut lap = LinExpr::var(s.idx(d.ip(i), j), 1.0 / (dx * dx))
                .plus(&LinExpr::var(s.idx(d.im(i), j), 1.0 / (dx * dx)), 1.0)
                .plus(&LinExpr::var(c, -2.0 / (dx * dx)), 1.0);
            let top = if j + 1 == ny {
                s.flux_top(i, gb.at(i, 0))
            } else if j + 1 == d.ny_f {
                s.flux_f(i, g.at(i, 0), h.at(i, 0))
            } else {
                LinExpr::var(s.idx(i, j + 1), 1.0 / dy).plus(&LinExpr::var(c, -1.0 / dy), 1.0)
            };
            let bot = if j == 0 {
                LinExpr::konst(0.0)
            } else if j == d.ny_f {
                s.flux_s(i, g.at(i, 0), h.at(i, 0))
            } else {
                LinExpr::var(c, 1.0 / dy).plus(&LinExpr::var(s.idx(i, j - 1), -1.0 / dy), 1.0)
            };
            lap.add(&top, 1.0 / dy);
            lap.add(&bot, -1.0 / dy);
            a.set_row(c, &lap.scaled(-1.0), f.at(i, j, 0));
        }
    }
    a
}

/// Solve `−Δψ = f` with `⟦∂_y ψ⟧ = g`, a plain or weighted jump `h` on Γ,
/// `ψ = g_b` on Γ_s and zero flux on the symmetry plane.
pub fn solve_elliptic_transmission(
    f: &Field,
    g_jumpflux: &Trace,
    h_jump: &Trace,
    g_b: &Trace,
    kind: JumpKind,
    d: &TwoPhaseDomain,
    params: &PhysParams,
) -> Result<EllipticSolution> {
    if f.tag != DomainTag::Both || f.staggering != Staggering::CellCenter || f.rank != Rank::Scalar {
        return Err(Error::Shape("elliptic source must be a scalar cell field on both subdomains".into()));
    }
    for t in [g_jumpflux, h_jump, g_b] {
        if t.len() != d.nx {
            return Err(Error::Shape("boundary data need one sample per column".into()));
        }
    }
    let (wf, ws) = match kind {
        JumpKind::Plain => (1.0, 1.0),
        JumpKind::Weighted => (params.rho_f, params.rho_s),
    };
    let s = Setup { d, wf, ws };
    let a = assemble(&s, f, g_jumpflux, h_jump, g_b);
    let solver = DirectSolver::new(a.matrix())?;
    let x = solver.solve(&a.rhs)?;
    let mut psi = Field::zeros(d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar);
    psi.values.copy_from_slice(&x);
    let mut tr = [Trace::zeros(d.nx, 1), Trace::zeros(d.nx, 1), Trace::zeros(d.nx, 1), Trace::zeros(d.nx, 1)];
    for i in 0..d.nx {
        let (g, h) = (g_jumpflux.at(i, 0), h_jump.at(i, 0));
        tr[0].set(i, 0, s.trace_f(i, g, h).eval(&x));
        tr[1].set(i, 0, s.trace_s(i, g, h).eval(&x));
        tr[2].set(i, 0, s.flux_f(i, g, h).eval(&x));
        tr[3].set(i, 0, s.flux_s(i, g, h).eval(&x));
    }
    let [trace_f, trace_s, flux_f, flux_s] = tr;
    Ok(EllipticSolution { psi, trace_f, trace_s, flux_f, flux_s, residual: solver.residual(&x, &a.rhs) })
}

/// Gradient of the potential solving `Δφ = g − Div v̄`, `⟦ρφ⟧ = 0`,
/// `⟦∂_y φ⟧ = 0` on Γ and `φ = 0` on Γ_s, placed on MAC faces so that
/// `Div(v̄ + ∇φ) = g` holds to round-off.
pub fn divergence_reduction(g_div: &Field, v_bar: &MacVelocity, d: &TwoPhaseDomain, params: &PhysParams) -> Result<MacVelocity> {
    let div = ops::mac_divergence(d, v_bar);
    let mut f = g_div.clone();
    f.axpy(-1.0, &div);
    let f = f.scaled(-1.0);
    let zero = Trace::zeros(d.nx, 1);
    let sol = solve_elliptic_transmission(&f, &zero, &zero, &zero, JumpKind::Weighted, d, params)?;
    let phi = &sol.psi;
    let mut grad = MacVelocity::zeros(d);
    let ny = d.ny();
    for j in 0..ny {
        for i in 0..d.nx {
            grad.u.set(i, j, 0, (phi.at(i, j, 0) - phi.at(d.im(i), j, 0)) / d.dx);
        }
    }
    for i in 0..d.nx {
        for j in 1..=ny {
            let val = if j == ny {
                -2.0 * phi.at(i, ny - 1, 0) / d.dy
            } else if j == d.ny_f {
                sol.flux_f.at(i, 0)
            } else {
                (phi.at(i, j, 0) - phi.at(i, j - 1, 0)) / d.dy
            };
            grad.v.set(i, j, 0, val);
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_strip_domain, GeometryConfig};

    fn dom(ny: usize) -> TwoPhaseDomain {
        build_strip_domain(&GeometryConfig { nx: 4, ny_f: ny, ny_s: ny, h_f: 0.5, h_s: 0.5, period: 1.0 }).unwrap()
    }

    #[test]
    fn zero_data_zero_solution() {
        let d = dom(4);
        let z = Trace::zeros(d.nx, 1);
        let f = Field::zeros(&d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar);
        let s = solve_elliptic_transmission(&f, &z, &z, &z, JumpKind::Plain, &d, &PhysParams::default()).unwrap();
        assert_eq!(s.psi.max_abs(), 0.0);
    }

    #[test]
    fn unit_jump_one_dimensional() {
        // ψ'' = 0 in each layer, ψ' = 0 at y = 0, ψ = 0 at y = 1, unit jump:
        // ψ_f ≡ −1, ψ_s ≡ 0.
        let d = dom(6);
        let z = Trace::zeros(d.nx, 1);
        let one = Trace::from_fn(&d, 1, |_| vec![1.0]);
        let f = Field::zeros(&d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar);
        let s = solve_elliptic_transmission(&f, &z, &one, &z, JumpKind::Plain, &d, &PhysParams::default()).unwrap();
        for j in 0..d.ny() {
            let want = if d.is_fluid_row(j) { -1.0 } else { 0.0 };
            assert!((s.psi.at(2, j, 0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn reduction_hits_divergence() {
        let d = dom(5);
        let p = PhysParams { rho_f: 1.0, rho_s: 2.5, ..PhysParams::default() };
        let g = Field::cell_scalar(&d, DomainTag::Both, |x, y| (6.28 * x).cos() + y * y);
        let vb = MacVelocity::from_fn(&d, |x, y| (y * (6.28 * x).sin(), y * (1.0 - y)));
        let grad = divergence_reduction(&g, &vb, &d, &p).unwrap();
        let mut v = vb.clone();
        v.axpy(1.0, &grad);
        let div = ops::mac_divergence(&d, &v);
        let err = div.values.iter().zip(&g.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-9, "{err}");
    }
}
