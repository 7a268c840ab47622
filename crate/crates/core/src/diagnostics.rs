//! Numerical checks of the analytical estimates: extension bound,
//! kinematic identities and the contraction ladder.

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;

use crate::error::Result;
use crate::grid::{build_strip_domain, ops, DomainTag, Field, GeometryConfig, MacVelocity, PhysParams, Rank, Staggering, TwoPhaseDomain};
use crate::kinematics::{accumulate_f, det, det_time_derivative_residual, invert_field, piola_identity_residual, KinematicsState, Quadrature};
use crate::mms::ls_slope;
use crate::nonlinear::{contraction_probe, NonlinearOptions};
use crate::spaces::{extension_constant_bound, extension_ratio, NormSpec};
use crate::state::StateW;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value <= threshold && value.is_finite() }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value >= threshold && value.is_finite() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticReport {
    pub what: String,
    pub checks: Vec<Check>,
}

impl DiagnosticReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

// ---- extension ----

pub const EXT_S: [f64; 3] = [0.6, 0.75, 0.9];
pub const EXT_Q: [f64; 3] = [3.0, 4.0, 6.0];
pub const EXT_T: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

/// Samples of `u` on `[0, T]`.
fn sample(u: &dyn Fn(f64) -> f64, t: f64, n: usize) -> (Vec<f64>, f64) {
    let dt = t / n as f64;
    ((0..=n).map(|k| u(k as f64 * dt)).collect(), dt)
}

/// Polynomials `Σ a_k t^k`, `k = 1..3`, with `u(0) = 0`.
pub fn random_polynomials(count: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()
}

/// `‖E_T u‖/‖u‖ ≤ (1 + slack) C(s, q)` over the T sweep, and the exact
/// `2^{1/q}` ratio at `s = 1`.
pub fn extension_diagnose(samples: usize, slack: f64, polys: usize, seed: u64) -> Result<DiagnosticReport> {
    let mut inputs: Vec<(String, Box<dyn Fn(f64) -> f64 + Sync>)> = vec![("t^2".into(), Box::new(|t: f64| t * t))];
    for (k, a) in random_polynomials(polys, seed).into_iter().enumerate() {
        inputs.push((format!("poly{k}"), Box::new(move |t: f64| a[0] * t + a[1] * t * t + a[2] * t * t * t)));
    }
    let mut cases = Vec::new();
    for &s in &EXT_S {
        for &q in &EXT_Q {
            for &t in &EXT_T {
                for k in 0..inputs.len() {
                    cases.push((s, q, t, k));
                }
            }
        }
    }
    let mut checks: Vec<Check> = cases
        .par_iter()
        .map(|&(s, q, t, k)| -> Result<Check> {
            let (u, dt) = sample(&*inputs[k].1, t, samples);
            let r = extension_ratio(&u, dt, s, q)?;
            let c = extension_constant_bound(s, q)?;
            Ok(Check::at_most(format!("ratio s={s} q={q} T={t} u={}", inputs[k].0), r, c * (1.0 + slack)))
        })
        .collect::<Result<_>>()?;
    for &q in &EXT_Q {
        let (u, dt) = sample(&|t| t, 1.0, samples);
        let r = extension_ratio(&u, dt, 1.0, q)?;
        checks.push(Check::at_most(format!("s=1 q={q} |ratio - 2^(1/q)|"), (r - 2f64.powf(1.0 / q)).abs(), 1e-10));
    }
    Ok(DiagnosticReport { what: "extension".into(), checks })
}

// ---- kinematics ----

fn kin_domain(n: usize) -> TwoPhaseDomain {
    build_strip_domain(&GeometryConfig { nx: 2 * n, ny_f: n, ny_s: n, h_f: 0.5, h_s: 0.5, period: 1.0 })
        .expect("diagnostic grid is valid")
}

/// Smooth periodic velocity used by the kinematic checks.
pub fn smooth_velocity(d: &TwoPhaseDomain, amp: f64) -> MacVelocity {
    MacVelocity::from_fn(d, |x, y| {
        (amp * (TAU * x).sin() * (1.0 + y * y), amp * ((TAU * x).cos() * y * (1.5 - y) + 0.3 * y))
    })
}

/// `Div(J F⁻ᵀ)` for `F = I + t∇v` on one grid.
pub fn piola_residual_on(n: usize, t: f64) -> Result<(f64, f64)> {
    let d = kin_domain(n);
    let v = smooth_velocity(&d, 1.0);
    let grad = ops::velocity_gradient(&d, &v);
    let f = accumulate_f(&Field::identity(&d, DomainTag::Both), &grad, &grad, t, Quadrature::Trapezoidal)?;
    let (_, j, _) = invert_field(&f, 1.0)?;
    Ok((d.dy, piola_identity_residual(&d, &f, &j)?))
}

/// Matrix path `F(t) = I + tA + t²B`.
fn det_path(dt: f64, steps: usize) -> Vec<Matrix2<f64>> {
    let a = Matrix2::new(0.3, -0.2, 0.5, 0.1);
    let b = Matrix2::new(-0.4, 0.25, 0.1, 0.6);
    (0..=steps).map(|k| {
        let t = k as f64 * dt;
        Matrix2::identity() + a * t + b * (t * t)
    })
    .collect()
}

/// `sup_{t ≤ T} ‖F(t) − I‖_∞` for a fixed velocity history.
pub fn f_defect_sup(t_end: f64, steps: usize) -> Result<f64> {
    let d = kin_domain(8);
    let dt = t_end / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let base = smooth_velocity(&d, 1.0);
    let vels: Vec<MacVelocity> = times.iter().map(|t| base.scaled(1.0 + t)).collect();
    let kin = KinematicsState::from_history(&d, &Field::identity(&d, DomainTag::Both), &vels, &times, Quadrature::Trapezoidal, 1.0, None)?;
    let id = Field::identity(&d, DomainTag::Both);
    Ok(kin
        .levels
        .iter()
        .map(|l| {
            let mut e = l.f.clone();
            e.axpy(-1.0, &id);
            e.max_abs()
        })
        .fold(0.0, f64::max))
}

pub const LADDER_T: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

pub fn kinematics_diagnose(q: f64) -> Result<DiagnosticReport> {
    let mut checks = Vec::new();

    let pts: Vec<(f64, f64)> = [8, 16, 32].into_iter().map(|n| piola_residual_on(n, 0.2)).collect::<Result<_>>()?;
    let slope = ls_slope(&pts);
    checks.push(Check::at_least("piola residual slope", slope, 1.8));

    let mut dpts = Vec::new();
    for dt in [0.1, 0.05, 0.025] {
        let steps = (1.0 / dt) as usize;
        dpts.push((dt, det_time_derivative_residual(&det_path(dt, steps), dt)?));
    }
    checks.push(Check::at_least("det-derivative residual slope", ls_slope(&dpts), 1.8));

    let d = kin_domain(8);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let mut f = Field::identity(&d, DomainTag::Both);
        for x in f.values.iter_mut() {
            *x += rng.gen_range(-0.4..0.4);
        }
        let (finv, _, _) = invert_field(&f, 1.0)?;
        for (a, b) in f.values.chunks_exact(4).zip(finv.values.chunks_exact(4)) {
            let m = Matrix2::new(a[0], a[1], a[2], a[3]) * Matrix2::new(b[0], b[1], b[2], b[3]);
            worst = worst.max((m - Matrix2::identity()).abs().max());
        }
    }
    checks.push(Check::at_most("max |F F^-1 - I|", worst, 1e-12));

    let spec = NormSpec { q, ..NormSpec::default() };
    let tp: Vec<(f64, f64)> = LADDER_T.iter().map(|&t| Ok((t, f_defect_sup(t, 16)?))).collect::<Result<_>>()?;
    checks.push(Check::at_least("sup |F - I| slope under T-halving", ls_slope(&tp), 0.9 / spec.q_prime()));
    Ok(DiagnosticReport { what: "kinematics".into(), checks })
}

/// `det F` along a path, exposed for property tests.
pub fn path_dets(dt: f64, steps: usize) -> Vec<f64> {
    det_path(dt, steps).iter().map(det).collect()
}

// ---- contraction ----

/// Amplitudes of one random smooth iterate.
#[derive(Debug, Clone, Copy)]
pub struct PairSeed {
    a: [f64; 8],
    k: f64,
}

fn random_seed(rng: &mut ChaCha8Rng) -> PairSeed {
    let mut a = [0.0; 8];
    for x in a.iter_mut() {
        *x = rng.gen_range(-1.0..1.0);
    }
    PairSeed { a, k: rng.gen_range(1..3) as f64 }
}

/// Smooth state on `[0, T]` with `c(0) = c0`, `c*(0) = 0`, `g(0) = 1`, `v(0) = 0`.
pub fn smooth_state(d: &TwoPhaseDomain, c0: &Field, t_end: f64, steps: usize, s: &PairSeed, amp: f64) -> StateW {
    let dt = t_end / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let a = s.a;
    let k = s.k;
    let shape = move |x: f64, y: f64| (TAU * k * x).cos() * (1.0 + 0.5 * y) + 0.5 * y * y;
    let phi = Field::cell_scalar(d, DomainTag::Both, shape);
    let phi_s = phi.restrict(d, DomainTag::Solid).expect("solid rows");
    let vel = MacVelocity::from_fn(d, move |x, y| {
        (a[0] * (TAU * k * x).sin() * (1.0 + y), a[1] * (TAU * k * x).cos() * y + a[2] * y * y)
    });
    let mut w = StateW {
        times: times.clone(),
        v: Vec::new(),
        pi: Vec::new(),
        c: Vec::new(),
        cstar: Vec::new(),
        g: Vec::new(),
    };
    let one = Field::constant(d, Staggering::CellCenter, DomainTag::Solid, Rank::Scalar, 1.0);
    for &t in &times {
        let e = amp * (t + a[7] * t * t);
        w.v.push(vel.scaled(e));
        w.pi.push(phi.scaled(amp * a[3] * (1.0 + t)));
        let mut c = c0.clone();
        c.axpy(amp * a[4] * t, &phi);
        w.c.push(c);
        w.cstar.push(phi_s.scaled(amp * a[5] * t));
        let mut g = one.clone();
        g.axpy(amp * a[6] * t, &phi_s);
        w.g.push(g);
    }
    w
}

/// Probe ratios over the T ladder for `pairs` random pairs.
pub fn contraction_ladder(
    d: &TwoPhaseDomain,
    params: &PhysParams,
    spec: &NormSpec,
    ladder: &[f64],
    steps: usize,
    pairs: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c0 = Field::cell_scalar(d, DomainTag::Both, |x, _| 0.1 * (1.0 + 0.5 * (TAU * x).cos()));
    let seeds: Vec<(PairSeed, PairSeed)> = (0..pairs).map(|_| (random_seed(&mut rng), random_seed(&mut rng))).collect();
    let opts = NonlinearOptions::default();
    seeds
        .par_iter()
        .map(|(s1, s2)| {
            ladder
                .iter()
                .map(|&t| {
                    let w1 = smooth_state(d, &c0, t, steps, s1, 0.3);
                    let w2 = smooth_state(d, &c0, t, steps, s2, 0.3);
                    let f0 = Field::identity(d, DomainTag::Both);
                    let k1 = KinematicsState::from_history(d, &f0, &w1.v, &w1.times, Quadrature::Trapezoidal, 1.0, Some(&w1.g))?;
                    let k2 = KinematicsState::from_history(d, &f0, &w2.v, &w2.times, Quadrature::Trapezoidal, 1.0, Some(&w2.g))?;
                    contraction_probe(d, &w1, &w2, &k1, &k2, params, spec, &opts)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

pub fn contraction_diagnose(d: &TwoPhaseDomain, params: &PhysParams, spec: &NormSpec, pairs: usize, seed: u64) -> Result<DiagnosticReport> {
    let ratios = contraction_ladder(d, params, spec, &LADDER_T, 16, pairs, seed)?;
    let mut checks = Vec::new();
    for (p, r) in ratios.iter().enumerate() {
        for (k, w) in r.windows(2).enumerate() {
            let name = format!("pair {p}: ratio(T={}) - ratio(T={})", LADDER_T[k + 1], LADDER_T[k]);
            checks.push(Check { name, value: w[1] - w[0], threshold: 0.0, pass: w[1] < w[0] });
        }
        let pts: Vec<(f64, f64)> = LADDER_T.iter().copied().zip(r.iter().copied()).collect();
        let slope = ls_slope(&pts);
        checks.push(Check { name: format!("pair {p}: log-log slope (delta = {:.4})", spec.delta()), value: slope, threshold: 0.0, pass: slope > 0.0 });
    }
    Ok(DiagnosticReport { what: "contraction".into(), checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_path_starts_at_one() {
        let d = path_dets(0.1, 3);
        assert!((d[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_state_matches_initial_data() {
        let d = kin_domain(4);
        let c0 = Field::constant(&d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_seed(&mut rng);
        let w = smooth_state(&d, &c0, 0.1, 4, &s, 0.3);
        assert_eq!(w.c[0], c0);
        assert_eq!(w.g[0].min(), 1.0);
        assert_eq!(w.cstar[0].max_abs(), 0.0);
        assert_eq!(w.v[0].max_abs(), 0.0);
    }
}
