//! Discrete differential operators on the strip.
//!
//! Derivatives never reach across Γ: every y-difference is taken inside one
//! subdomain, centred in the interior and one-sided (second order, three
//! points) next to Γ, Γ_s and the symmetry plane.

use super::{DomainTag, Field, MacVelocity, Rank, Staggering, TwoPhaseDomain};

/// Central periodic x-derivative of every component.
pub fn d_dx(d: &TwoPhaseDomain, f: &Field) -> Field {
    let mut out = f.clone();
    let s = 0.5 / d.dx;
    for j in f.rows() {
        for i in 0..d.nx {
            for c in 0..f.ncomp() {
                out.set(i, j, c, s * (f.at(d.ip(i), j, c) - f.at(d.im(i), j, c)));
            }
        }
    }
    out
}

/// Segment `[s0, s1)` of cell rows containing `j` inside the field's rows.
fn segment(d: &TwoPhaseDomain, f: &Field, j: usize) -> (usize, usize) {
    let r = f.rows();
    let (a, b) = if d.is_fluid_row(j) { (0, d.ny_f) } else { (d.ny_f, d.ny()) };
    (a.max(r.start), b.min(r.end))
}

/// y-derivative of a cell-row field (cell centres or x-faces).
pub fn d_dy(d: &TwoPhaseDomain, f: &Field) -> Field {
    debug_assert!(matches!(f.staggering, Staggering::CellCenter | Staggering::XFace));
    let mut out = f.clone();
    let h = d.dy;
    for j in f.rows() {
        let (s0, s1) = segment(d, f, j);
        for i in 0..d.nx {
            for c in 0..f.ncomp() {
                let v = |jj: usize| f.at(i, jj, c);
                let der = if j > s0 && j + 1 < s1 {
                    (v(j + 1) - v(j - 1)) / (2.0 * h)
                } else if j == s0 {
                    (-3.0 * v(j) + 4.0 * v(j + 1) - v(j + 2)) / (2.0 * h)
                } else {
                    (3.0 * v(j) - 4.0 * v(j - 1) + v(j - 2)) / (2.0 * h)
                };
                out.set(i, j, c, der);
            }
        }
    }
    out
}

/// Gradient of a scalar cell field as a vector cell field.
pub fn gradient(d: &TwoPhaseDomain, f: &Field) -> Field {
    debug_assert_eq!(f.rank, Rank::Scalar);
    let gx = d_dx(d, f);
    let gy = d_dy(d, f);
    let mut out = Field::zeros(d, f.staggering, f.tag, Rank::Vector);
    for j in f.rows() {
        for i in 0..d.nx {
            out.set(i, j, 0, gx.at(i, j, 0));
            out.set(i, j, 1, gy.at(i, j, 0));
        }
    }
    out
}

/// Divergence of a vector cell field.
pub fn divergence(d: &TwoPhaseDomain, f: &Field) -> Field {
    debug_assert_eq!(f.rank, Rank::Vector);
    let gx = d_dx(d, f);
    let gy = d_dy(d, f);
    let mut out = Field::zeros(d, f.staggering, f.tag, Rank::Scalar);
    for j in f.rows() {
        for i in 0..d.nx {
            out.set(i, j, 0, gx.at(i, j, 0) + gy.at(i, j, 1));
        }
    }
    out
}

/// Row-wise divergence of a tensor cell field: `(Div T)_i = ∂_j T_ij`.
pub fn divergence_rows(d: &TwoPhaseDomain, t: &Field) -> Field {
    debug_assert_eq!(t.rank, Rank::Tensor);
    let gx = d_dx(d, t);
    let gy = d_dy(d, t);
    let mut out = Field::zeros(d, t.staggering, t.tag, Rank::Vector);
    for j in t.rows() {
        for i in 0..d.nx {
            out.set(i, j, 0, gx.at(i, j, 0) + gy.at(i, j, 1));
            out.set(i, j, 1, gx.at(i, j, 2) + gy.at(i, j, 3));
        }
    }
    out
}

/// Discrete divergence of a MAC velocity at cell centres.
pub fn mac_divergence(d: &TwoPhaseDomain, vel: &MacVelocity) -> Field {
    let mut out = Field::zeros(d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar);
    for j in 0..d.ny() {
        for i in 0..d.nx {
            let du = (vel.u.at(d.ip(i), j, 0) - vel.u.at(i, j, 0)) / d.dx;
            let dv = (vel.v.at(i, j + 1, 0) - vel.v.at(i, j, 0)) / d.dy;
            out.set(i, j, 0, du + dv);
        }
    }
    out
}

/// Velocity averaged to cell centres.
pub fn cell_velocity(d: &TwoPhaseDomain, vel: &MacVelocity) -> Field {
    let mut out = Field::zeros(d, Staggering::CellCenter, DomainTag::Both, Rank::Vector);
    for j in 0..d.ny() {
        for i in 0..d.nx {
            out.set(i, j, 0, 0.5 * (vel.u.at(i, j, 0) + vel.u.at(d.ip(i), j, 0)));
            out.set(i, j, 1, 0.5 * (vel.v.at(i, j, 0) + vel.v.at(i, j + 1, 0)));
        }
    }
    out
}

/// Cell-centred velocity gradient `(∇v)_ij = ∂_j v_i`, row-major.
///
/// Diagonal entries are the MAC differences, so `tr ∇v` equals
/// [`mac_divergence`] exactly; off-diagonal entries difference the
/// cell-averaged components.
pub fn velocity_gradient(d: &TwoPhaseDomain, vel: &MacVelocity) -> Field {
    let cv = cell_velocity(d, vel);
    let gx = d_dx(d, &cv);
    let gy = d_dy(d, &cv);
    let mut out = Field::zeros(d, Staggering::CellCenter, DomainTag::Both, Rank::Tensor);
    for j in 0..d.ny() {
        for i in 0..d.nx {
            let a11 = (vel.u.at(d.ip(i), j, 0) - vel.u.at(i, j, 0)) / d.dx;
            let a22 = (vel.v.at(i, j + 1, 0) - vel.v.at(i, j, 0)) / d.dy;
            out.set_tensor(i, j, [a11, gy.at(i, j, 0), gx.at(i, j, 1), a22]);
        }
    }
    out
}

/// Move a vector cell field (both subdomains) onto MAC faces.
///
/// x-faces average their two neighbours in the row; interior and interface
/// y-faces average the cells above and below (the straddling control volume
/// on Γ takes half from each side); Γ_s extrapolates linearly; the symmetry
/// row is zero.
pub fn cells_to_mac(d: &TwoPhaseDomain, f: &Field) -> MacVelocity {
    debug_assert_eq!(f.rank, Rank::Vector);
    let mut m = MacVelocity::zeros(d);
    let ny = d.ny();
    for j in 0..ny {
        for i in 0..d.nx {
            m.u.set(i, j, 0, 0.5 * (f.at(d.im(i), j, 0) + f.at(i, j, 0)));
        }
    }
    for i in 0..d.nx {
        for j in 1..ny {
            m.v.set(i, j, 0, 0.5 * (f.at(i, j - 1, 1) + f.at(i, j, 1)));
        }
        m.v.set(i, ny, 0, 1.5 * f.at(i, ny - 1, 1) - 0.5 * f.at(i, ny - 2, 1));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_strip_domain, GeometryConfig};
    use std::f64::consts::PI;

    fn dom(n: usize) -> TwoPhaseDomain {
        build_strip_domain(&GeometryConfig { nx: 2 * n, ny_f: n, ny_s: n, h_f: 0.5, h_s: 0.5, period: 1.0 }).unwrap()
    }

    #[test]
    fn derivatives_exact_on_quadratics_in_y() {
        let d = dom(8);
        let f = Field::cell_scalar(&d, DomainTag::Both, |_, y| 3.0 * y * y - y + 2.0);
        let g = d_dy(&d, &f);
        for j in 0..d.ny() {
            let (_, y) = d.cell_center(0, j);
            assert!((g.at(0, j, 0) - (6.0 * y - 1.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn y_derivative_does_not_see_across_interface() {
        let d = dom(8);
        let f = Field::cell_scalar(&d, DomainTag::Both, |_, y| if y < 0.5 { y } else { 10.0 - y });
        let g = d_dy(&d, &f);
        for j in 0..d.ny() {
            let expect = if d.is_fluid_row(j) { 1.0 } else { -1.0 };
            assert!((g.at(3, j, 0) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_of_gradient_is_mac_divergence() {
        let d = dom(8);
        let vel = MacVelocity::from_fn(&d, |x, y| ((2.0 * PI * x).sin() * y, (2.0 * PI * x).cos() * y * y));
        let g = velocity_gradient(&d, &vel);
        let div = mac_divergence(&d, &vel);
        for j in 0..d.ny() {
            for i in 0..d.nx {
                let t = g.tensor(i, j);
                assert!((t[0] + t[3] - div.at(i, j, 0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_second_order() {
        let mut errs = vec![];
        for n in [8, 16, 32] {
            let d = dom(n);
            let f = Field::cell_scalar(&d, DomainTag::Both, |x, y| (2.0 * PI * x).sin() * (3.0 * y).cos());
            let g = gradient(&d, &f);
            let mut e: f64 = 0.0;
            for j in 0..d.ny() {
                for i in 0..d.nx {
                    let (x, y) = d.cell_center(i, j);
                    e = e.max((g.at(i, j, 0) - 2.0 * PI * (2.0 * PI * x).cos() * (3.0 * y).cos()).abs());
                    e = e.max((g.at(i, j, 1) + 3.0 * (2.0 * PI * x).sin() * (3.0 * y).sin()).abs());
                }
            }
            errs.push(e);
        }
        assert!((errs[1] / errs[2]).log2() > 1.8, "{errs:?}");
    }
}
