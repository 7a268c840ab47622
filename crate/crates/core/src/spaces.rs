//! Discrete Sobolev–Slobodeckij norms in time and space, the even extension
//! operator and the composite solution/data norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ops, DomainTag, Field, Rank, Staggering, Trace, TwoPhaseDomain};

/// Exponents of the solution spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub q: f64,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_n")]
    pub n_dim: usize,
}

fn default_s() -> f64 {
    0.75
}

fn default_n() -> usize {
    2
}

impl Default for NormSpec {
    fn default() -> Self {
        NormSpec { q: 5.0, s: default_s(), n_dim: 2 }
    }
}

impl NormSpec {
    pub fn q_prime(&self) -> f64 {
        self.q / (self.q - 1.0)
    }

    /// `r = q²/n`.
    pub fn r(&self) -> f64 {
        self.q * self.q / self.n_dim as f64
    }

    /// `δ = min{1/(2q′), 1/q − 1/r}`.
    pub fn delta(&self) -> f64 {
        (0.5 / self.q_prime()).min(1.0 / self.q - 1.0 / self.r())
    }

    /// Range required of the solution-space exponent.
    pub fn validate_driver(&self) -> Result<()> {
        if !(self.q > self.n_dim as f64 + 2.0) {
            return Err(Error::config("numerics.q", format!("must exceed n + 2 = {}, got {}", self.n_dim + 2, self.q)));
        }
        Ok(())
    }

    /// Range required by the extension operator.
    pub fn validate_extension(&self) -> Result<()> {
        if !(self.q >= 1.0 && self.s > 1.0 / self.q && self.s <= 1.0) {
            return Err(Error::Argument(format!("need 1/q < s <= 1, got s = {}, q = {}", self.s, self.q)));
        }
        Ok(())
    }
}

/// Trapezoid weights for `n` equally spaced samples.
pub fn trapezoid_weights(n: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![dt; n];
    if n > 0 {
        w[0] = 0.5 * dt;
        w[n - 1] = 0.5 * dt;
    }
    if n == 1 {
        w[0] = 0.0;
    }
    w
}

/// `(∫ |f|^q)^{1/q}` by the trapezoid rule.
pub fn lq_time(samples: &[f64], q: f64, dt: f64) -> f64 {
    trapezoid_weights(samples.len(), dt)
        .iter()
        .zip(samples)
        .map(|(w, f)| w * f.abs().powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// `‖f′‖_{L^q}` from interval difference quotients.
pub fn w1q_time_seminorm(samples: &[f64], q: f64, dt: f64) -> f64 {
    samples.windows(2).map(|w| dt * ((w[1] - w[0]) / dt).abs().powf(q)).sum::<f64>().powf(1.0 / q)
}

/// `q`-th power of the `W^s_q` seminorm for samples of a Banach-valued
/// function: `dist(i, k) = ‖f(t_i) − f(t_k)‖` and `slope(i) ≈ ‖f′(t_i)‖`.
///
/// Product trapezoid over `i ≠ k`; each diagonal cell is replaced by the
/// exact integral of `|f′|^q |t − τ|^{q(1−s)−1}` over the square of side
/// equal to the trapezoid weight.
pub fn wsq_seminorm_pow(
    n: usize,
    dt: f64,
    s: f64,
    q: f64,
    dist: impl Fn(usize, usize) -> f64 + Sync,
    slope: impl Fn(usize) -> f64 + Sync,
) -> f64 {
    let w = trapezoid_weights(n, dt);
    let alpha = q * (1.0 - s);
    let p = 1.0 + s * q;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for k in 0..n {
                if k == i {
                    continue;
                }
                let gap = (i as f64 - k as f64).abs() * dt;
                acc += w[i] * w[k] * dist(i, k).powf(q) / gap.powf(p);
            }
            let a = w[i];
            acc + slope(i).powf(q) * 2.0 * a.powf(alpha + 1.0) / (alpha * (alpha + 1.0))
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

fn sample_slope(samples: &[f64], dt: f64, i: usize) -> f64 {
    let n = samples.len();
    let d = if i == 0 {
        samples[1] - samples[0]
    } else if i == n - 1 {
        samples[n - 1] - samples[n - 2]
    } else {
        0.5 * (samples[i + 1] - samples[i - 1])
    };
    (d / dt).abs()
}

/// `|f|_{W^s_q}` of scalar samples, `0 < s < 1`.
pub fn wsq_time_seminorm(samples: &[f64], s: f64, q: f64, dt: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Argument(format!("fractional order must lie in (0, 1), got {s}")));
    }
    if samples.len() < 2 {
        return Err(Error::Argument("need at least two samples".into()));
    }
    let pow = wsq_seminorm_pow(samples.len(), dt, s, q, |i, k| (samples[i] - samples[k]).abs(), |i| {
        sample_slope(samples, dt, i)
    });
    Ok(pow.powf(1.0 / q))
}

/// `‖f‖_{L^q} + |f|_{W^s_q}` (`s = 1` uses the derivative).
pub fn wsq_time_norm(samples: &[f64], s: f64, q: f64, dt: f64) -> Result<f64> {
    let semi = if s == 1.0 { w1q_time_seminorm(samples, q, dt) } else { wsq_time_seminorm(samples, s, q, dt)? };
    Ok(lq_time(samples, q, dt) + semi)
}

/// Even reflection about `T`, zero beyond `2T`, sampled on `[0, 3T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub samples: Vec<f64>,
    pub dt: f64,
    /// Length `T` of the original interval.
    pub t: f64,
}

/// Extend samples of `u` on `[0, T]` (`u(0) = 0` when `s > 1/q`).
pub fn extend_even(u: &[f64], dt: f64, s: f64, q: f64) -> Result<Extension> {
    if u.len() < 2 {
        return Err(Error::Argument("need at least two samples".into()));
    }
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s > 1.0 / q && u[0].abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::Argument(format!("extension needs u(0) = 0, got {}", u[0])));
    }
    let n = u.len() - 1;
    let mut samples = Vec::with_capacity(3 * n + 1);
    samples.extend_from_slice(u);
    samples.extend((1..=n).map(|k| u[n - k]));
    samples.extend(std::iter::repeat(0.0).take(n));
    Ok(Extension { samples, dt, t: n as f64 * dt })
}

impl Extension {
    /// Restriction to the original interval.
    pub fn restrict(&self) -> &[f64] {
        &self.samples[..=(self.samples.len() - 1) / 3]
    }

    /// `2 ∫₀^{3T} |ũ(t)|^q (3T − t)^{−sq} / (sq) dt`: pairs with one time
    /// beyond the sampled range, where `ũ = 0`.
    pub fn tail_pow(&self, s: f64, q: f64) -> f64 {
        let end = 3.0 * self.t;
        let w = trapezoid_weights(self.samples.len(), self.dt);
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| w[k] * v.abs().powf(q) * (end - k as f64 * self.dt).powf(-s * q))
            .sum::<f64>()
            * 2.0
            / (s * q)
    }

    /// `W^s_q(0, ∞)` norm of the extension.
    pub fn norm(&self, s: f64, q: f64) -> Result<f64> {
        let l = lq_time(&self.samples, q, self.dt);
        if s == 1.0 {
            return Ok(l + w1q_time_seminorm(&self.samples, q, self.dt));
        }
        let semi = wsq_time_seminorm(&self.samples, s, q, self.dt)?.powf(q) + self.tail_pow(s, q);
        Ok(l + semi.powf(1.0 / q))
    }
}

/// `C(s, q) = (4 + 24θ/(sq(sq − 1)))^{1/q}` with `θ = 3^{1−(s−1/q)}`.
pub fn extension_constant_bound(s: f64, q: f64) -> Result<f64> {
    if !(q >= 1.0 && s > 1.0 / q && s < 1.0) {
        return Err(Error::Argument(format!("need 1/q < s < 1, got s = {s}, q = {q}")));
    }
    let theta = 3f64.powf(1.0 - (s - 1.0 / q));
    Ok((4.0 + 24.0 * theta / (s * q * (s * q - 1.0))).powf(1.0 / q))
}

/// `‖E_T u‖ / ‖u‖` in `W^s_q`.
pub fn extension_ratio(u: &[f64], dt: f64, s: f64, q: f64) -> Result<f64> {
    let e = extend_even(u, dt, s, q)?;
    let base = wsq_time_norm(u, s, q, dt)?;
    if base == 0.0 {
        return Err(Error::Argument("zero function has no extension ratio".into()));
    }
    Ok(e.norm(s, q)? / base)
}

// ---- spatial grid norms ----

fn cell_sum(d: &TwoPhaseDomain, f: &Field, q: f64) -> f64 {
    f.values.iter().map(|v| v.abs().powf(q)).sum::<f64>() * d.cell_area()
}

/// Grid `L^q` norm over the field's cells (all components).
pub fn lq_grid(d: &TwoPhaseDomain, f: &Field, q: f64) -> f64 {
    cell_sum(d, f, q).powf(1.0 / q)
}

/// Forward difference quotients inside one subdomain: `(δx f, δy f)`.
/// The y-quotient is stored on the lower cell and left out on the last
/// row of each subdomain.
fn differences(d: &TwoPhaseDomain, f: &Field) -> (Field, Field) {
    let mut fx = f.clone();
    let mut fy = f.clone();
    let rows = f.rows();
    for j in rows.clone() {
        let same = j + 1 < rows.end && d.side_of_row(j) == d.side_of_row(j + 1);
        for i in 0..d.nx {
            for c in 0..f.ncomp() {
                fx.set(i, j, c, (f.at(d.ip(i), j, c) - f.at(i, j, c)) / d.dx);
                let v = if same { (f.at(i, j + 1, c) - f.at(i, j, c)) / d.dy } else { 0.0 };
                fy.set(i, j, c, v);
            }
        }
    }
    (fx, fy)
}

/// `‖f‖_{L^q} + ‖δx f‖ + ‖δy f‖`.
pub fn w1_grid(d: &TwoPhaseDomain, f: &Field, q: f64) -> f64 {
    let (fx, fy) = differences(d, f);
    lq_grid(d, f, q) + lq_grid(d, &fx, q) + lq_grid(d, &fy, q)
}

/// W¹ norm plus the three second difference quotients.
pub fn w2_grid(d: &TwoPhaseDomain, f: &Field, q: f64) -> f64 {
    let (fx, fy) = differences(d, f);
    let (fxx, fxy) = differences(d, &fx);
    let (_, fyy) = differences(d, &fy);
    w1_grid(d, f, q) + lq_grid(d, &fxx, q) + lq_grid(d, &fxy, q) + lq_grid(d, &fyy, q)
}

/// `∫₀^y f` along each column inside the field's subdomain rows; a grid
/// surrogate of a W⁻¹-type norm.
pub fn antiderivative_y(d: &TwoPhaseDomain, f: &Field) -> Field {
    let mut out = f.clone();
    for i in 0..d.nx {
        for c in 0..f.ncomp() {
            let mut acc = 0.0;
            for j in f.rows() {
                acc += f.at(i, j, c) * d.dy;
                out.set(i, j, c, acc);
            }
        }
    }
    out
}

/// Fractional seminorm of order `σ` of a periodic trace along x
/// (diagonal excluded).
pub fn trace_space_seminorm(d: &TwoPhaseDomain, t: &Trace, sigma: f64, q: f64) -> f64 {
    let n = t.len();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let m = (i as isize - k as isize).unsigned_abs();
            let gap = m.min(n - m) as f64 * d.dx;
            let diff: f64 = (0..t.ncomp).map(|c| (t.at(i, c) - t.at(k, c)).abs().powf(q)).sum();
            acc += d.dx * d.dx * diff / gap.powf(1.0 + sigma * q);
        }
    }
    acc.powf(1.0 / q)
}

fn trace_lq(d: &TwoPhaseDomain, t: &Trace, q: f64) -> f64 {
    (t.values.iter().map(|v| v.abs().powf(q)).sum::<f64>() * d.dx).powf(1.0 / q)
}

/// Anisotropic trace norm `W^{σ, σ/2}` on `Γ × (0, T)` for a time series of
/// traces: `L^q(L^q) + L^q(W^σ) + W^{σ/2}(L^q)`.
pub fn trace_norm(d: &TwoPhaseDomain, series: &[Trace], sigma: f64, q: f64, dt: f64) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    let l: Vec<f64> = series.iter().map(|t| trace_lq(d, t, q)).collect();
    let semi: Vec<f64> = series.iter().map(|t| trace_space_seminorm(d, t, sigma, q)).collect();
    let mut total = lq_time(&l, q, dt) + lq_time(&semi, q, dt);
    if series.len() >= 2 {
        let dist = |i: usize, k: usize| {
            let diff = Trace {
                ncomp: series[i].ncomp,
                values: series[i].values.iter().zip(&series[k].values).map(|(a, b)| a - b).collect(),
            };
            trace_lq(d, &diff, q)
        };
        let n = series.len();
        let slope = |i: usize| {
            let (a, b, h) = if i == 0 {
                (1, 0, dt)
            } else if i == n - 1 {
                (n - 1, n - 2, dt)
            } else {
                (i + 1, i - 1, 2.0 * dt)
            };
            dist(a, b) / h
        };
        total += wsq_seminorm_pow(n, dt, 0.5 * sigma, q, dist, slope).powf(1.0 / q);
    }
    total
}

/// Time series of fields: `L^q` in time of a spatial norm.
pub fn lq_time_of(series: &[Field], dt: f64, q: f64, spatial: impl Fn(&Field) -> f64) -> f64 {
    let v: Vec<f64> = series.iter().map(spatial).collect();
    lq_time(&v, q, dt)
}

/// Difference quotients in time of a field series.
pub fn time_derivative(series: &[Field], dt: f64) -> Vec<Field> {
    series
        .windows(2)
        .map(|w| {
            let mut f = w[1].clone();
            f.axpy(-1.0, &w[0]);
            f.scaled(1.0 / dt)
        })
        .collect()
}

/// `L^q` norm of interval values (one per step).
pub fn lq_intervals(v: &[f64], q: f64, dt: f64) -> f64 {
    v.iter().map(|x| dt * x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
}

/// Multiplication constant of the grid W¹_q norm: sup of
/// `‖fg‖/(‖f‖‖g‖)` over random smooth samples, floored at 1.
pub fn multiplication_constant(d: &TwoPhaseDomain, q: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 1.0;
    for _ in 0..samples {
        let mut coef = || -> [f64; 5] { [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(1.0..4.0), rng.gen_range(0.5..3.0), rng.gen_range(-1.0..1.0)] };
        let (a, b) = (coef(), coef());
        let mk = |c: [f64; 5]| {
            Field::cell_scalar(d, DomainTag::Both, move |x, y| {
                c[0] + c[1] * (std::f64::consts::TAU * c[2].round() * x).sin() * (c[3] * y).cos() + c[4] * y * y
            })
        };
        let (f, g) = (mk(a), mk(b));
        let mut fg = f.clone();
        fg.values.iter_mut().zip(&g.values).for_each(|(x, y)| *x *= y);
        let den = w1_grid(d, &f, q) * w1_grid(d, &g, q);
        if den > 0.0 {
            best = best.max(w1_grid(d, &fg, q) / den);
        }
    }
    best
}

/// Velocity at cell centres as a field for the spatial norms.
pub fn velocity_cells(d: &TwoPhaseDomain, v: &crate::grid::MacVelocity) -> Field {
    ops::cell_velocity(d, v)
}

/// Scalar cell field of zeros tagged like `f`.
pub fn zeros_like(d: &TwoPhaseDomain, f: &Field) -> Field {
    Field::zeros(d, Staggering::CellCenter, f.tag, Rank::Scalar)
}

/// Component norms of a state in the discrete solution space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct YtNorms {
    pub v: f64,
    pub pi: f64,
    pub c: f64,
    pub cstar: f64,
    pub g: f64,
}

impl YtNorms {
    pub fn max(&self) -> f64 {
        self.v.max(self.pi).max(self.c).max(self.cstar).max(self.g)
    }

    pub fn sum(&self) -> f64 {
        self.v + self.pi + self.c + self.cstar + self.g
    }
}

fn w1_time_lq(d: &TwoPhaseDomain, s: &[Field], dt: f64, q: f64) -> f64 {
    let rate: Vec<f64> = time_derivative(s, dt).iter().map(|x| lq_grid(d, x, q)).collect();
    lq_time_of(s, dt, q, |x| lq_grid(d, x, q)) + lq_intervals(&rate, q, dt)
}

fn w1_time_w1(d: &TwoPhaseDomain, s: &[Field], dt: f64, q: f64) -> f64 {
    let rate: Vec<f64> = time_derivative(s, dt).iter().map(|x| w1_grid(d, x, q)).collect();
    lq_time_of(s, dt, q, |x| w1_grid(d, x, q)) + lq_intervals(&rate, q, dt)
}

/// Surrogate solution-space norms: `L^q(W²) ∩ W¹(L^q)` for v and c,
/// `L^q(W¹)` plus the trace norms of `⟦π⟧` and `π|Γ_s` for π, `W¹(W¹)` for
/// c* and g.
pub fn discrete_yt_norm(d: &TwoPhaseDomain, w: &crate::state::StateW, spec: &NormSpec) -> YtNorms {
    let q = spec.q;
    let dt = w.dt();
    let vc: Vec<Field> = w.v.iter().map(|v| velocity_cells(d, v)).collect();
    let v = lq_time_of(&vc, dt, q, |x| w2_grid(d, x, q)) + w1_time_lq(d, &vc, dt, q);
    let c = lq_time_of(&w.c, dt, q, |x| w2_grid(d, x, q)) + w1_time_lq(d, &w.c, dt, q);
    let sigma = 1.0 - 1.0 / q;
    let jumps: Vec<Trace> = w.pi.iter().filter_map(|p| crate::grid::jump_at_interface(d, p).ok()).collect();
    let tops: Vec<Trace> = w.pi.iter().filter_map(|p| crate::grid::outer_trace(d, p).ok()).collect();
    let pi = lq_time_of(&w.pi, dt, q, |x| w1_grid(d, x, q)) + trace_norm(d, &jumps, sigma, q, dt) + trace_norm(d, &tops, sigma, q, dt);
    YtNorms { v, pi, c, cstar: w1_time_w1(d, &w.cstar, dt, q), g: w1_time_w1(d, &w.g, dt, q) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_strip_domain, GeometryConfig};

    #[test]
    fn constant_series_has_zero_seminorm() {
        let v = vec![3.0; 50];
        assert_eq!(wsq_time_seminorm(&v, 0.5, 2.0, 0.02).unwrap(), 0.0);
        assert!(wsq_time_seminorm(&v, 1.0, 2.0, 0.02).is_err());
        assert!(wsq_time_seminorm(&v, 0.0, 2.0, 0.02).is_err());
    }

    #[test]
    fn linear_seminorm_near_one() {
        // ∫∫ |t − τ|^{q(1−s)−1} = 1 for s = 1/2, q = 2.
        let n = 257;
        let dt = 1.0 / (n - 1) as f64;
        let v: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let s = wsq_time_seminorm(&v, 0.5, 2.0, dt).unwrap();
        assert!((s - 1.0).abs() < 0.01, "{s}");
    }

    #[test]
    fn homogeneous() {
        let n = 40;
        let dt = 0.025;
        let v: Vec<f64> = (0..n).map(|k| (k as f64 * dt * 3.0).sin()).collect();
        let w: Vec<f64> = v.iter().map(|x| -2.5 * x).collect();
        let a = wsq_time_seminorm(&v, 0.7, 3.0, dt).unwrap();
        let b = wsq_time_seminorm(&w, 0.7, 3.0, dt).unwrap();
        assert!((b - 2.5 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn extension_layout() {
        let u = [0.0, 1.0, 4.0, 9.0];
        let e = extend_even(&u, 0.1, 0.75, 4.0).unwrap();
        assert_eq!(e.samples, vec![0.0, 1.0, 4.0, 9.0, 4.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(e.restrict(), &u);
        assert!(extend_even(&[1.0, 2.0], 0.1, 0.75, 4.0).is_err());
        assert!(extend_even(&[1.0, 2.0], 0.1, 0.2, 4.0).is_ok());
    }

    #[test]
    fn extension_w1_ratio_exact() {
        let n = 101;
        let dt = 0.5 / (n - 1) as f64;
        let u: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        for q in [2.0, 3.0, 5.0] {
            let r = extension_ratio(&u, dt, 1.0, q).unwrap();
            assert!((r - 2f64.powf(1.0 / q)).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_formula() {
        let c = extension_constant_bound(0.75, 4.0).unwrap();
        let theta = 3f64.sqrt();
        assert!((c - (4.0 + 24.0 * theta / 6.0).powf(0.25)).abs() < 1e-14);
        assert!(extension_constant_bound(0.2, 4.0).is_err());
        assert!(extension_constant_bound(0.2501, 4.0).unwrap() > 10.0);
        assert!(extension_constant_bound(0.9, 400.0).unwrap() < 1.05);
    }

    #[test]
    fn grid_norms_of_constants() {
        let d = build_strip_domain(&GeometryConfig::default()).unwrap();
        let f = Field::constant(&d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar, 2.0);
        let area = d.period * d.height();
        let l = 2.0 * area.powf(1.0 / 3.0);
        assert!((lq_grid(&d, &f, 3.0) - l).abs() < 1e-12);
        assert!((w1_grid(&d, &f, 3.0) - l).abs() < 1e-12);
        assert!((w2_grid(&d, &f, 3.0) - l).abs() < 1e-12);
    }

    #[test]
    fn spec_exponents() {
        let s = NormSpec { q: 5.0, s: 0.75, n_dim: 2 };
        assert!((s.q_prime() - 1.25).abs() < 1e-15);
        assert!((s.r() - 12.5).abs() < 1e-15);
        assert!((s.delta() - 0.12).abs() < 1e-15);
        assert!(s.validate_driver().is_ok());
        assert!(NormSpec { q: 4.0, ..s }.validate_driver().is_err());
    }

    #[test]
    fn multiplication_constant_floor() {
        let d = build_strip_domain(&GeometryConfig::default()).unwrap();
        let m = multiplication_constant(&d, 5.0, 8, 1);
        assert!(m >= 1.0 && m.is_finite());
        assert_eq!(m, multiplication_constant(&d, 5.0, 8, 1));
    }
}
