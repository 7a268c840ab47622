use plaque_fsi::grid::{build_strip_domain, jump_at_interface, outer_trace, DomainTag, Field, GeometryConfig, MacVelocity};
use plaque_fsi::spaces::{discrete_yt_norm, lq_grid, trace_norm, w1_grid, wsq_time_seminorm, NormSpec};
use plaque_fsi::state::StateW;

/// `|a t|^q_{W^s_q(0,T)} = |a|^q · 2 T^{α+1} / (α(α+1))`, `α = q(1−s)`.
fn linear_exact(a: f64, t: f64, s: f64, q: f64) -> f64 {
    let al = q * (1.0 - s);
    (a.abs().powf(q) * 2.0 * t.powf(al + 1.0) / (al * (al + 1.0))).powf(1.0 / q)
}

#[test]
fn fractional_seminorm_of_linear_functions() {
    for (s, q) in [(0.6, 3.0), (0.75, 4.0), (0.9, 6.0), (0.3, 2.0)] {
        for t in [0.1, 1.0, 4.0] {
            let n = 200;
            let dt = t / n as f64;
            let u: Vec<f64> = (0..=n).map(|k| -1.5 * k as f64 * dt).collect();
            let got = wsq_time_seminorm(&u, s, q, dt).unwrap();
            let exact = linear_exact(-1.5, t, s, q);
            assert!((got / exact - 1.0).abs() < 0.01, "s={s} q={q} T={t}: {got} vs {exact}");
        }
    }
}

/// Brute-force midpoint double sum on a much finer grid, diagonal cells dropped.
fn brute_force(f: impl Fn(f64) -> f64, t: f64, s: f64, q: f64, m: usize) -> f64 {
    let h = t / m as f64;
    let mut acc = 0.0;
    for i in 0..m {
        for k in 0..m {
            if i != k {
                let (a, b) = ((i as f64 + 0.5) * h, (k as f64 + 0.5) * h);
                acc += h * h * (f(a) - f(b)).abs().powf(q) / (a - b).abs().powf(1.0 + s * q);
            }
        }
    }
    acc.powf(1.0 / q)
}

#[test]
fn fractional_seminorm_against_brute_force() {
    let f = |t: f64| (3.0 * t).sin() + t * t;
    let (s, q, t) = (0.5, 3.0, 1.0);
    let n = 128;
    let dt = t / n as f64;
    let u: Vec<f64> = (0..=n).map(|k| f(k as f64 * dt)).collect();
    let got = wsq_time_seminorm(&u, s, q, dt).unwrap();
    let reference = brute_force(f, t, s, q, 2000);
    assert!((got / reference - 1.0).abs() < 0.02, "{got} vs {reference}");
}

fn small_state(amp: f64) -> (plaque_fsi::grid::TwoPhaseDomain, StateW) {
    let d = build_strip_domain(&GeometryConfig { nx: 8, ny_f: 4, ny_s: 4, ..Default::default() }).unwrap();
    let times: Vec<f64> = (0..=4).map(|k| k as f64 * 0.05).collect();
    let mut w = StateW::trivial(&d, times.clone());
    for (k, &t) in times.iter().enumerate() {
        w.v[k] = MacVelocity::from_fn(&d, |x, y| (amp * t * (6.0 * x).sin() * y, amp * t * y * y));
        w.pi[k] = Field::cell_scalar(&d, DomainTag::Both, |x, y| amp * (1.0 + t) * (x + y));
        w.c[k] = Field::cell_scalar(&d, DomainTag::Both, |x, y| amp * t * (1.0 + x * y));
        w.cstar[k] = Field::cell_scalar(&d, DomainTag::Both, |_, y| amp * t * y).restrict(&d, DomainTag::Solid).unwrap();
        w.g[k] = Field::cell_scalar(&d, DomainTag::Both, |x, _| amp * t * x).restrict(&d, DomainTag::Solid).unwrap();
    }
    (d, w)
}

#[test]
fn yt_norm_is_homogeneous() {
    let spec = NormSpec::default();
    let (d, w) = small_state(1.0);
    let base = discrete_yt_norm(&d, &w, &spec);
    assert!(base.v > 0.0 && base.pi > 0.0 && base.c > 0.0 && base.cstar > 0.0 && base.g > 0.0);
    let scaled = discrete_yt_norm(&d, &w.scaled(-3.0), &spec);
    for (a, b) in [(base.v, scaled.v), (base.pi, scaled.pi), (base.c, scaled.c), (base.cstar, scaled.cstar), (base.g, scaled.g)] {
        assert!((b - 3.0 * a).abs() <= 1e-10 * b, "{a} {b}");
    }
}

/// The pressure component rebuilt from its documented pieces.
#[test]
fn yt_pressure_component_from_pieces() {
    let spec = NormSpec::default();
    let q = spec.q;
    let (d, w) = small_state(0.7);
    let dt = w.dt();
    let weights: Vec<f64> = (0..w.len()).map(|k| if k == 0 || k == w.len() - 1 { 0.5 * dt } else { dt }).collect();
    let lq_w1 = weights.iter().zip(&w.pi).map(|(a, p)| a * w1_grid(&d, p, q).powf(q)).sum::<f64>().powf(1.0 / q);
    let jumps: Vec<_> = w.pi.iter().map(|p| jump_at_interface(&d, p).unwrap()).collect();
    let tops: Vec<_> = w.pi.iter().map(|p| outer_trace(&d, p).unwrap()).collect();
    let sigma = 1.0 - 1.0 / q;
    let expect = lq_w1 + trace_norm(&d, &jumps, sigma, q, dt) + trace_norm(&d, &tops, sigma, q, dt);
    let got = discrete_yt_norm(&d, &w, &spec).pi;
    assert!((got - expect).abs() <= 1e-12 * expect, "{got} vs {expect}");
    assert!(lq_grid(&d, &w.pi[0], q) > 0.0);
}
