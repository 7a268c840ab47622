//! Reference geometry: a periodic strip with a fluid layer under a solid wall.

mod compat;
mod field;
pub mod ops;

pub use compat::{check_compatibility, CompatibilityReport, Residual};
pub use field::{row_range, DomainTag, Field, MacVelocity, Rank, Staggering, Trace};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry block of the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub nx: usize,
    pub ny_f: usize,
    pub ny_s: usize,
    pub h_f: f64,
    pub h_s: f64,
    pub period: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { nx: 16, ny_f: 8, ny_s: 8, h_f: 0.5, h_s: 0.5, period: 1.0 }
    }
}

/// Ω̂ = Ω_f ∪ Γ ∪ Ω_s on a MAC grid.
///
/// Cells `j < ny_f` are fluid, the rest solid. Γ is the y-face row
/// `j = ny_f`, Γ_s the top y-face row `j = ny`. The bottom row `y = 0` is a
/// symmetry plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseDomain {
    pub nx: usize,
    pub ny_f: usize,
    pub ny_s: usize,
    pub h_f: f64,
    pub h_s: f64,
    pub period: f64,
    pub dx: f64,
    pub dy: f64,
    pub n_gamma: [f64; 2],
    pub n_gammas: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Fluid,
    Solid,
}

pub fn build_strip_domain(g: &GeometryConfig) -> Result<TwoPhaseDomain> {
    for (name, v) in [("h_f", g.h_f), ("h_s", g.h_s), ("period", g.period)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::config(format!("geometry.{name}"), format!("must be positive and finite, got {v}")));
        }
    }
    for (name, n) in [("nx", g.nx), ("ny_f", g.ny_f), ("ny_s", g.ny_s)] {
        if n < 4 {
            return Err(Error::config(format!("geometry.{name}"), format!("need at least 4 cells, got {n}")));
        }
    }
    let dy = g.h_f / g.ny_f as f64;
    let dy_s = g.h_s / g.ny_s as f64;
    if (dy - dy_s).abs() > 1e-12 * dy {
        return Err(Error::config(
            "geometry.ny_s",
            format!("layer spacings differ (h_f/ny_f = {dy}, h_s/ny_s = {dy_s})"),
        ));
    }
    Ok(TwoPhaseDomain {
        nx: g.nx,
        ny_f: g.ny_f,
        ny_s: g.ny_s,
        h_f: g.h_f,
        h_s: g.h_s,
        period: g.period,
        dx: g.period / g.nx as f64,
        dy,
        n_gamma: [0.0, 1.0],
        n_gammas: [0.0, 1.0],
    })
}

impl TwoPhaseDomain {
    pub fn ny(&self) -> usize {
        self.ny_f + self.ny_s
    }

    pub fn height(&self) -> f64 {
        self.h_f + self.h_s
    }

    pub fn ncells(&self) -> usize {
        self.nx * self.ny()
    }

    pub fn interface_row(&self) -> usize {
        self.ny_f
    }

    pub fn outer_row(&self) -> usize {
        self.ny()
    }

    /// `(i, j)` of every y-face on Γ.
    pub fn interface_faces(&self) -> Vec<(usize, usize)> {
        (0..self.nx).map(|i| (i, self.ny_f)).collect()
    }

    /// `(i, j)` of every y-face on Γ_s.
    pub fn outer_faces(&self) -> Vec<(usize, usize)> {
        (0..self.nx).map(|i| (i, self.ny())).collect()
    }

    pub fn is_fluid_row(&self, j: usize) -> bool {
        j < self.ny_f
    }

    pub fn side_of_row(&self, j: usize) -> Side {
        if self.is_fluid_row(j) {
            Side::Fluid
        } else {
            Side::Solid
        }
    }

    /// Cell row range of one subdomain.
    pub fn rows_of(&self, side: Side) -> std::ops::Range<usize> {
        match side {
            Side::Fluid => 0..self.ny_f,
            Side::Solid => self.ny_f..self.ny(),
        }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn xface(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn yface(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, j as f64 * self.dy)
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.dx, j as f64 * self.dy)
    }

    #[inline]
    pub fn ip(&self, i: usize) -> usize {
        (i + 1) % self.nx
    }

    #[inline]
    pub fn im(&self, i: usize) -> usize {
        (i + self.nx - 1) % self.nx
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }
}

/// Material and biochemical constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams {
    pub rho_f: f64,
    pub rho_s: f64,
    pub nu_f: f64,
    pub nu_s: f64,
    pub mu_s: f64,
    pub d_f: f64,
    pub d_s: f64,
    pub zeta: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default = "default_ndim")]
    pub n_dim: usize,
}

fn default_ndim() -> usize {
    2
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            rho_f: 1.0,
            rho_s: 1.0,
            nu_f: 1.0,
            nu_s: 1.0,
            mu_s: 1.0,
            d_f: 1.0,
            d_s: 1.0,
            zeta: 1.0,
            beta: 1.0,
            gamma: 1.0,
            n_dim: 2,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("rho_f", self.rho_f),
            ("rho_s", self.rho_s),
            ("nu_f", self.nu_f),
            ("nu_s", self.nu_s),
            ("mu_s", self.mu_s),
            ("d_f", self.d_f),
            ("d_s", self.d_s),
            ("zeta", self.zeta),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("params.{name}"), format!("must be strictly positive, got {v}")));
            }
        }
        if !(2..=3).contains(&self.n_dim) {
            return Err(Error::config("params.n_dim", format!("must be 2 or 3, got {}", self.n_dim)));
        }
        Ok(())
    }

    pub fn rho(&self, s: Side) -> f64 {
        match s {
            Side::Fluid => self.rho_f,
            Side::Solid => self.rho_s,
        }
    }

    pub fn nu(&self, s: Side) -> f64 {
        match s {
            Side::Fluid => self.nu_f,
            Side::Solid => self.nu_s,
        }
    }

    pub fn diff(&self, s: Side) -> f64 {
        match s {
            Side::Fluid => self.d_f,
            Side::Solid => self.d_s,
        }
    }

    pub fn n(&self) -> f64 {
        self.n_dim as f64
    }

    /// Rate γβ/(n ρ_s) of the growth-metric ODE.
    pub fn growth_rate(&self) -> f64 {
        self.gamma * self.beta / (self.n() * self.rho_s)
    }

    /// Rate γβ/ρ_s of the solid divergence source and the foam-cell loss.
    pub fn volume_rate(&self) -> f64 {
        self.gamma * self.beta / self.rho_s
    }
}

/// Initial data w₀ = (v⁰, c⁰, 0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub v0: MacVelocity,
    pub c0: Field,
    cstar0: Field,
    g0: Field,
}

impl InitialData {
    pub fn new(d: &TwoPhaseDomain, v0: MacVelocity, c0: Field) -> Result<Self> {
        if c0.tag != DomainTag::Both || c0.staggering != Staggering::CellCenter || c0.rank != Rank::Scalar {
            return Err(Error::Shape("c0 must be a scalar cell field on both subdomains".into()));
        }
        Ok(InitialData {
            v0,
            c0,
            cstar0: Field::zeros(d, Staggering::CellCenter, DomainTag::Solid, Rank::Scalar),
            g0: Field::constant(d, Staggering::CellCenter, DomainTag::Solid, Rank::Scalar, 1.0),
        })
    }

    pub fn zero(d: &TwoPhaseDomain) -> Self {
        let c0 = Field::zeros(d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar);
        Self::new(d, MacVelocity::zeros(d), c0).expect("zero data is well formed")
    }

    pub fn cstar0(&self) -> &Field {
        &self.cstar0
    }

    pub fn g0(&self) -> &Field {
        &self.g0
    }
}

/// Weights extrapolating cell values at distances dy/2, 3dy/2, 5dy/2 to the face.
pub const EXTRAP3: [f64; 3] = [15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0];

/// One-sided quadratic trace of every component on Γ from `side`.
/// Works for cell-centred and x-face fields.
pub fn interface_trace(d: &TwoPhaseDomain, f: &Field, side: Side) -> Result<Trace> {
    let rows: [usize; 3] = match side {
        Side::Fluid => [d.ny_f - 1, d.ny_f - 2, d.ny_f - 3],
        Side::Solid => [d.ny_f, d.ny_f + 1, d.ny_f + 2],
    };
    row_trace(f, rows)
}

/// One-sided quadratic trace on Γ_s from the solid side.
pub fn outer_trace(d: &TwoPhaseDomain, f: &Field) -> Result<Trace> {
    let ny = d.ny();
    row_trace(f, [ny - 1, ny - 2, ny - 3])
}

fn row_trace(f: &Field, rows: [usize; 3]) -> Result<Trace> {
    if !matches!(f.staggering, Staggering::CellCenter | Staggering::XFace) {
        return Err(Error::Field(format!("traces need cell-centred rows, got {:?}", f.staggering)));
    }
    if !rows.iter().all(|&j| f.contains_row(j)) {
        return Err(Error::Field(format!("{:?}-tagged field does not reach the requested boundary", f.tag)));
    }
    let nc = f.ncomp();
    let mut t = Trace::zeros(f.nx(), nc);
    for i in 0..f.nx() {
        for c in 0..nc {
            let v: f64 = rows.iter().zip(EXTRAP3).map(|(&j, w)| w * f.at(i, j, c)).sum();
            t.set(i, c, v);
        }
    }
    Ok(t)
}

/// ⟦f⟧ = solid trace − fluid trace on Γ (normal points fluid → solid).
pub fn jump_at_interface(d: &TwoPhaseDomain, f: &Field) -> Result<Trace> {
    if f.tag != DomainTag::Both {
        return Err(Error::Field(format!("jump needs a field on both subdomains, got {:?}", f.tag)));
    }
    let tf = interface_trace(d, f, Side::Fluid)?;
    let mut ts = interface_trace(d, f, Side::Solid)?;
    for (s, fv) in ts.values.iter_mut().zip(&tf.values) {
        *s -= fv;
    }
    Ok(ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(nx: usize, nf: usize, ns: usize, hf: f64, hs: f64) -> TwoPhaseDomain {
        build_strip_domain(&GeometryConfig { nx, ny_f: nf, ny_s: ns, h_f: hf, h_s: hs, period: 1.0 }).unwrap()
    }

    #[test]
    fn counts_cells_and_interface_faces() {
        let d = dom(16, 8, 8, 1.0, 1.0);
        assert_eq!(d.ncells(), 256);
        assert_eq!(d.interface_faces().len(), 16);
    }

    #[test]
    fn degenerate_layer_rejected() {
        let g = GeometryConfig { h_f: 0.0, ..GeometryConfig::default() };
        let e = build_strip_domain(&g).unwrap_err();
        assert!(e.to_string().contains("h_f"));
        let g = GeometryConfig { ny_s: 3, ..GeometryConfig::default() };
        assert!(build_strip_domain(&g).is_err());
    }

    #[test]
    fn interface_faces_sit_on_h_f() {
        let d = dom(32, 16, 16, 1.0, 1.0);
        let mut count = 0;
        for j in 0..=d.ny() {
            for i in 0..d.nx {
                let (_, y) = d.yface(i, j);
                let below_fluid = j >= 1 && d.is_fluid_row(j - 1);
                let above_solid = j < d.ny() && !d.is_fluid_row(j);
                if below_fluid && above_solid {
                    assert!((y - d.h_f).abs() < 1e-14);
                    assert!(d.interface_faces().contains(&(i, j)));
                    count += 1;
                }
            }
        }
        assert_eq!(count, d.interface_faces().len());
    }

    #[test]
    fn normals_are_unit() {
        let d = dom(8, 4, 4, 1.0, 1.0);
        for n in [d.n_gamma, d.n_gammas] {
            assert!(((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn partition_covers_all_cells() {
        let d = dom(8, 5, 7, 0.5, 0.7);
        let fluid = d.rows_of(Side::Fluid).len() * d.nx;
        let solid = d.rows_of(Side::Solid).len() * d.nx;
        assert_eq!(fluid + solid, d.ncells());
        assert_ne!(d.interface_row(), d.outer_row());
    }

    #[test]
    fn fluid_field_rejects_solid_reads() {
        let d = dom(8, 4, 4, 1.0, 1.0);
        let f = Field::zeros(&d, Staggering::CellCenter, DomainTag::Fluid, Rank::Scalar);
        assert!(f.get(0, 3, 0).is_ok());
        assert!(f.get(0, 4, 0).is_err());
        let s = Field::zeros(&d, Staggering::CellCenter, DomainTag::Solid, Rank::Scalar);
        assert!(s.get(0, 3, 0).is_err());
        let y = Field::zeros(&d, Staggering::YFace, DomainTag::Fluid, Rank::Vector);
        assert_eq!(y.values.len(), 8 * 5 * 2);
    }

    #[test]
    fn jump_of_constants() {
        let d = dom(8, 4, 4, 1.0, 1.0);
        let f = Field::cell_scalar(&d, DomainTag::Both, |_, _| 5.0);
        assert!(jump_at_interface(&d, &f).unwrap().max_abs() < 1e-14);
        let f = Field::cell_scalar(&d, DomainTag::Both, |_, y| if y < 1.0 { 1.0 } else { 3.0 });
        let j = jump_at_interface(&d, &f).unwrap();
        assert!(j.values.iter().all(|v| (v - 2.0).abs() < 1e-14));
    }

    #[test]
    fn jump_of_piecewise_linear_is_exact() {
        let d = dom(8, 8, 8, 1.0, 1.0);
        let f = Field::cell_scalar(&d, DomainTag::Both, |_, y| if y < 1.0 { y } else { 2.0 * y });
        let j = jump_at_interface(&d, &f).unwrap();
        assert!(j.values.iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn jump_requires_both_tags() {
        let d = dom(8, 4, 4, 1.0, 1.0);
        let f = Field::zeros(&d, Staggering::CellCenter, DomainTag::Fluid, Rank::Scalar);
        assert!(jump_at_interface(&d, &f).is_err());
    }

    #[test]
    fn params_validation() {
        let mut p = PhysParams::default();
        assert!(p.validate().is_ok());
        p.zeta = 0.0;
        assert!(p.validate().is_err());
        let p = PhysParams { n_dim: 4, ..PhysParams::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn initial_data_has_trivial_growth_state() {
        let d = dom(8, 4, 4, 1.0, 1.0);
        let w0 = InitialData::zero(&d);
        assert!(w0.cstar0().values.iter().all(|v| *v == 0.0));
        assert!(w0.g0().values.iter().all(|v| *v == 1.0));
    }
}
