use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Vector2};
use plaque_fsi::grid::{build_strip_domain, DomainTag, Field, GeometryConfig, MacVelocity, PhysParams, Rank, Staggering, TwoPhaseDomain};
use plaque_fsi::kinematics::KinLevel;
use plaque_fsi::nonlinear::{assemble_g, ftilde, h_from_ktilde, ktilde, GForm};
use plaque_fsi::state::Level;

fn domain(nx: usize, ny: usize) -> TwoPhaseDomain {
    build_strip_domain(&GeometryConfig { nx, ny_f: ny, ny_s: ny, h_f: 0.5, h_s: 0.5, period: 1.0 }).unwrap()
}

fn m(t: [f64; 4]) -> Matrix2<f64> {
    Matrix2::new(t[0], t[1], t[2], t[3])
}

fn flat(a: &Matrix2<f64>) -> [f64; 4] {
    [a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]]
}

/// Kinematics with a cell-wise deformation gradient.
fn kin_from(d: &TwoPhaseDomain, f: impl Fn(f64, f64) -> Matrix2<f64>) -> KinLevel {
    let ff = Field::cell_tensor(d, DomainTag::Both, |x, y| flat(&f(x, y)));
    let finv = Field::cell_tensor(d, DomainTag::Both, |x, y| flat(&f(x, y).try_inverse().unwrap()));
    let j = Field::cell_scalar(d, DomainTag::Both, |x, y| f(x, y).determinant());
    KinLevel { t: 0.0, f: ff, finv, j, fe: None }
}

struct Iterate {
    vel: MacVelocity,
    pi: Field,
    c: Field,
    cstar: Field,
    g: Field,
}

impl Iterate {
    fn level(&self) -> Level<'_> {
        Level { vel: &self.vel, pi: &self.pi, c: &self.c, cstar: &self.cstar, g: &self.g }
    }
}

fn iterate(d: &TwoPhaseDomain, vel: impl Fn(f64, f64) -> (f64, f64), pi: f64, c: impl Fn(f64, f64) -> f64, g: f64) -> Iterate {
    Iterate {
        vel: MacVelocity::from_fn(d, vel),
        pi: Field::constant(d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar, pi),
        c: Field::cell_scalar(d, DomainTag::Both, c),
        cstar: Field::zeros(d, Staggering::CellCenter, DomainTag::Solid, Rank::Scalar),
        g: Field::constant(d, Staggering::CellCenter, DomainTag::Solid, Rank::Scalar, g),
    }
}

/// Cells two rows away from every boundary and from Γ.
fn interior(d: &TwoPhaseDomain) -> Vec<(usize, usize)> {
    let skip = [0, 1, d.ny_f - 2, d.ny_f - 1, d.ny_f, d.ny_f + 1, d.ny() - 2, d.ny() - 1];
    (0..d.ny()).filter(|j| !skip.contains(j)).flat_map(|j| (0..d.nx).map(move |i| (i, j))).collect()
}

#[test]
fn fluid_ktilde_is_piola_stress_minus_linear_stress() {
    let d = domain(8, 8);
    let p = PhysParams { nu_f: 1.7, ..Default::default() };
    let fm = Matrix2::new(1.1, 0.2, -0.05, 0.95);
    let (a, b) = (0.3, -0.4);
    let w = iterate(&d, |_, y| (a * y, b * y), 0.8, |_, _| 0.0, 1.0);
    let kin = kin_from(&d, |_, _| fm);
    let (kf, _) = ktilde(&d, w.level(), &kin, &p).unwrap();

    // velocity gradient with (∇v)_ij = ∂_j v_i
    let gv = Matrix2::new(0.0, a, 0.0, b);
    let fi = fm.try_inverse().unwrap();
    let sigma = -Matrix2::identity() * 0.8 + (fi * gv + gv.transpose() * fi.transpose()) * p.nu_f;
    let s_lin = -Matrix2::identity() * 0.8 + (gv + gv.transpose()) * p.nu_f;
    let expect = sigma * fi.transpose() - s_lin;
    for (i, j) in interior(&d).into_iter().filter(|&(_, j)| d.is_fluid_row(j)) {
        let got = m(kf.tensor(i, j));
        assert!((got - expect).abs().max() < 1e-12, "cell ({i},{j}): {got} vs {expect}");
    }
}

#[test]
fn solid_ktilde_is_grown_neo_hooke_minus_linear_stress() {
    let d = domain(8, 8);
    let p = PhysParams { mu_s: 2.5, ..Default::default() };
    let fm = Matrix2::new(1.05, -0.1, 0.15, 1.2);
    let (pi, g) = (0.6, 1.15);
    let w = iterate(&d, |_, _| (0.0, 0.0), pi, |_, _| 0.0, g);
    let kin = kin_from(&d, |_, _| fm);
    let (_, ks) = ktilde(&d, w.level(), &kin, &p).unwrap();

    let fit = fm.try_inverse().unwrap().transpose();
    let id = Matrix2::identity();
    let piola = -fit * pi + (fm / (g * g) - fit) * p.mu_s;
    let expect = piola + id * pi;
    for j in d.rows_of(plaque_fsi::grid::Side::Solid) {
        for i in 0..d.nx {
            let got = m(ks.tensor(i, j));
            assert!((got - expect).abs().max() < 1e-12);
        }
    }
}

#[test]
fn interface_data_from_piecewise_constant_tensors() {
    let d = domain(8, 6);
    let p = PhysParams::default();
    let fs = Matrix2::new(1.2, 0.1, 0.0, 0.9);
    let hf = d.h_f;
    let w = iterate(&d, |_, _| (0.0, 0.0), 0.4, |_, _| 0.0, 1.1);
    let kin = kin_from(&d, |_, y| if y < hf { Matrix2::identity() } else { fs });
    let (kf, ks) = ktilde(&d, w.level(), &kin, &p).unwrap();
    assert!(kf.max_abs() < 1e-14);
    let (h1, h2) = h_from_ktilde(&d, &kf, &ks).unwrap();
    let t = ks.tensor(0, d.ny_f);
    for i in 0..d.nx {
        for (comp, k) in [(0, 1), (1, 3)] {
            assert!((h1.at(i, comp) + t[k]).abs() < 1e-12);
            assert!((h2.at(i, comp) + t[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn ftilde_for_linear_concentration() {
    let d = domain(8, 8);
    let p = PhysParams { d_f: 0.7, d_s: 1.9, ..Default::default() };
    let fm = Matrix2::new(0.9, 0.3, 0.1, 1.1);
    let slope = 2.5;
    let w = iterate(&d, |_, _| (0.0, 0.0), 0.0, |_, y| slope * y, 1.0);
    let kin = kin_from(&d, |_, _| fm);
    let ft = ftilde(&d, &w.c, &kin, &p).unwrap();
    let fi = fm.try_inverse().unwrap();
    let b = fi * fi.transpose() - Matrix2::identity();
    for (i, j) in interior(&d) {
        let dc = if d.is_fluid_row(j) { p.d_f } else { p.d_s };
        let e = b * Vector2::new(0.0, slope) * dc;
        assert!((ft.at(i, j, 0) - e[0]).abs() < 1e-10 && (ft.at(i, j, 1) - e[1]).abs() < 1e-10, "({i},{j})");
    }
}

/// `F⁻ᵀ = I + ε diag(a(y), b(x))` has `Div F⁻ᵀ = 0`, so both forms of `G`
/// approximate `−ε (a ∂ₓv₁ + b ∂ᵧv₂)`.
#[test]
fn g_forms_converge_to_the_same_limit() {
    let eps = 0.2;
    let a = |y: f64| (PI * y).cos();
    let b = |x: f64| (TAU * x).sin();
    let v1 = |x: f64, y: f64| (TAU * x).sin() * (1.0 + y * y);
    let v2 = |x: f64, y: f64| (TAU * x).cos() * (PI * y).sin();
    let dv1x = |x: f64, y: f64| TAU * (TAU * x).cos() * (1.0 + y * y);
    let dv2y = |x: f64, y: f64| PI * (TAU * x).cos() * (PI * y).cos();
    let mut errs = [Vec::new(), Vec::new()];
    let mut hs = Vec::new();
    for n in [16, 32, 64] {
        let d = domain(n, n / 2);
        let w = iterate(&d, |x, y| (v1(x, y), v2(x, y)), 0.0, |_, _| 0.0, 1.0);
        let kin = kin_from(&d, |x, y| {
            let finv_t = Matrix2::new(1.0 + eps * a(y), 0.0, 0.0, 1.0 + eps * b(x));
            finv_t.transpose().try_inverse().unwrap()
        });
        for (k, form) in [GForm::Pointwise, GForm::Conservative].into_iter().enumerate() {
            let (g, _, _) = assemble_g(&d, w.level(), &kin, form).unwrap();
            let mut e: f64 = 0.0;
            for (i, j) in interior(&d) {
                let (x, y) = d.cell_center(i, j);
                if (y - 0.5).abs() < 0.125 || y < 0.125 || y > 0.875 {
                    continue;
                }
                let exact = -eps * (a(y) * dv1x(x, y) + b(x) * dv2y(x, y));
                e = e.max((g.at(i, j, 0) - exact).abs());
            }
            errs[k].push(e);
        }
        hs.push(d.dy);
    }
    for (k, e) in errs.iter().enumerate() {
        for s in 1..e.len() {
            let slope = (e[s - 1] / e[s]).ln() / (hs[s - 1] / hs[s]).ln();
            assert!(slope >= 1.8, "form {k}: errors {e:?}");
        }
    }
}
