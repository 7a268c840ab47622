//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
//! below; a failing criterion makes the process exit non-zero.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plaque_fsi::diagnostics::{contraction_ladder, extension_diagnose, kinematics_diagnose, DiagnosticReport, LADDER_T};
use plaque_fsi::driver::{DriverConfig, Problem, Trajectory};
use plaque_fsi::grid::{build_strip_domain, GeometryConfig, InitialData, PhysParams, TwoPhaseDomain};
use plaque_fsi::io::{InitialConfig, RunConfig};
use plaque_fsi::mms::{self, Suite};
use plaque_fsi::odes::{cstar_constant, cstar_duhamel, g_constant, integrate_cstar, integrate_g};
use plaque_fsi::spaces::NormSpec;
use plaque_fsi::state::{time_levels, StateW, WindowStart};
use plaque_fsi::Result;

const TRIVIAL_TOL: f64 = 1e-9;
const SPACE_ORDER: f64 = 1.8;
const TIME_ORDER: f64 = 0.9;
const RK4_RTOL: f64 = 1e-8;
const DUHAMEL_TOL: f64 = 1e-6;
const MASS_RTOL: f64 = 1e-10;
const DIV_FACTOR: f64 = 10.0;
const POSITIVITY_RTOL: f64 = 1e-10;
const MAX_PICARD: usize = 8;
const EXT_SLACK: f64 = 0.05;
const CONTINUATION_FACTOR: f64 = 5.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn strip(nx: usize, ny: usize) -> TwoPhaseDomain {
    build_strip_domain(&GeometryConfig { nx, ny_f: ny, ny_s: ny, h_f: 0.5, h_s: 0.5, period: 1.0 }).unwrap()
}

fn cosine_config(mean: f64, amplitude: f64, kx: u32) -> RunConfig {
    let mut cfg = RunConfig::preset("zero").unwrap();
    cfg.initial = InitialConfig::Cosine { mean, amplitude, kx };
    cfg
}

fn run_config(cfg: &RunConfig) -> Result<(TwoPhaseDomain, Trajectory)> {
    let d = cfg.domain()?;
    let w0 = cfg.initial_data(&d)?;
    let pr = Problem { d: &d, params: &cfg.params, cfg: &cfg.numerics, m_q: 1.0 };
    let traj = pr.run_continuation(&w0, cfg.numerics.t_final)?;
    Ok((d, traj))
}

fn report_failures(rep: &DiagnosticReport) -> String {
    let bad: Vec<String> = rep.checks.iter().filter(|c| !c.pass).map(|c| format!("{} = {:.3e}", c.name, c.value)).collect();
    if bad.is_empty() {
        format!("{} checks", rep.checks.len())
    } else {
        bad.join("; ")
    }
}

fn trivial_fixed_point() -> Result<Outcome> {
    let d = strip(16, 8);
    let p = PhysParams::default();
    let cfg = DriverConfig::default();
    let pr = Problem { d: &d, params: &p, cfg: &cfg, m_q: 1.0 };
    let times = time_levels(0.0, cfg.window0, cfg.dt)?;
    let w = StateW::trivial(&d, times);
    let start = WindowStart::initial(&d, &InitialData::zero(&d));
    let next = pr.picard_step(&w, &start)?;
    let err = next.diff(&w)?.max_abs();
    outcome(err <= TRIVIAL_TOL, format!("max |N(w) - w| = {err:.2e} (tol {TRIVIAL_TOL:.0e})"))
}

fn mms_orders() -> Result<Outcome> {
    let mut worst_space = f64::INFINITY;
    let mut worst_time = f64::INFINITY;
    let mut lines = Vec::new();
    for suite in Suite::ALL {
        for t in mms::run_suite(suite, &mms::LEVELS)? {
            let local = t.rows.iter().filter_map(|r| r.slope).fold(f64::INFINITY, f64::min);
            worst_space = worst_space.min(local);
            lines.push(format!("{}/{} {:.2}", t.suite, t.quantity, local));
        }
        if suite != Suite::Elliptic {
            let t = mms::temporal_order(suite, 16, &[8, 16, 32], 0.5)?;
            worst_time = worst_time.min(t.order);
            lines.push(format!("{}/dt {:.2}", t.suite, t.order));
        }
    }
    outcome(
        worst_space >= SPACE_ORDER && worst_time >= TIME_ORDER,
        format!("min spatial slope {worst_space:.3}, min temporal order {worst_time:.3} [{}]", lines.join(", ")),
    )
}

fn ode_oracles() -> Result<Outcome> {
    let p = PhysParams { beta: 0.8, gamma: 1.3, rho_s: 1.1, ..Default::default() };
    let c0 = 0.7;
    let (t, dt) = (1.0, 1e-2);
    let eg = (integrate_g(|_| c0, t, dt, &p) / g_constant(c0, t, &p) - 1.0).abs();
    let ec = (integrate_cstar(|_| c0, t, dt, &p) / cstar_constant(c0, t, &p) - 1.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ed: f64 = 0.0;
    for _ in 0..5 {
        let a: [f64; 4] = [rng.gen_range(0.2..1.0), rng.gen_range(-0.2..0.2), rng.gen_range(1.0..6.0), rng.gen_range(-0.3..0.3)];
        let cs = move |s: f64| a[0] + a[1] * (a[2] * s).sin() + a[3] * s * s;
        let reference = integrate_cstar(cs, t, 1e-3, &p);
        ed = ed.max((cstar_duhamel(cs, t, &p, 16) - reference).abs());
    }
    outcome(
        eg <= RK4_RTOL && ec <= RK4_RTOL && ed <= DUHAMEL_TOL,
        format!("RK4 rel. error g {eg:.1e}, c* {ec:.1e} (tol {RK4_RTOL:.0e}); Duhamel {ed:.1e} (tol {DUHAMEL_TOL:.0e})"),
    )
}

fn kinematics() -> Result<Outcome> {
    let rep = kinematics_diagnose(5.0)?;
    let vals: Vec<String> = rep.checks.iter().map(|c| format!("{} {:.3e}", c.name, c.value)).collect();
    outcome(rep.pass(), if rep.pass() { vals.join(", ") } else { report_failures(&rep) })
}

fn conservation() -> Result<Outcome> {
    let cfg = RunConfig::preset("small-data")?;
    let (_, traj) = run_config(&cfg)?;
    let mass = traj.reports.iter().map(|r| r.heat_mass_residual).fold(0.0, f64::max);
    let div = traj.reports.iter().map(|r| r.divergence_fluid.max(r.divergence_solid)).fold(0.0, f64::max);
    let div_tol = DIV_FACTOR * cfg.numerics.tol;

    let mut defects = Vec::new();
    for (n, dt) in [(8, 0.02), (16, 0.01), (32, 0.005)] {
        let mut c = cosine_config(0.3, 0.05, 1);
        c.geometry = GeometryConfig { nx: 2 * n, ny_f: n, ny_s: n, ..c.geometry };
        c.numerics.dt = dt;
        c.numerics.window0 = 0.1;
        c.numerics.t_final = 0.2;
        c.numerics.tol = 1e-9;
        let (d, tr) = run_config(&c)?;
        defects.push(tr.volume_defects(&d, 2));
    }
    // J_f − 1 close to round-off counts as decreased.
    let floor = 1e-10;
    let fluid_ok = defects.windows(2).all(|w| w[1].0 < w[0].0 || w[1].0 <= floor);
    let solid_ok = defects.windows(2).all(|w| w[1].1 < w[0].1);
    let fmt: Vec<String> = defects.iter().map(|(f, s)| format!("({f:.1e}, {s:.1e})")).collect();
    outcome(
        mass <= MASS_RTOL && div <= div_tol && fluid_ok && solid_ok,
        format!(
            "mass {mass:.1e} (tol {MASS_RTOL:.0e}); divergence {div:.1e} (tol {div_tol:.0e}); (|J_f-1|, |J_s-g^2|) {}",
            fmt.join(" -> ")
        ),
    )
}

fn positivity() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_c = f64::INFINITY;
    let mut worst_cstar = f64::INFINITY;
    let mut worst_g = f64::INFINITY;
    let mut pass = true;
    for _ in 0..5 {
        let mean = rng.gen_range(0.01..0.08);
        let top = f64::min(mean, 0.05);
        let amp = rng.gen_range(0.5 * top..=top);
        let kx = rng.gen_range(1..=2);
        let mut cfg = cosine_config(mean, amp, kx);
        cfg.numerics.t_final = 0.2;
        let (_, traj) = run_config(&cfg)?;
        let scale = traj.levels[0].c.max_abs();
        for l in &traj.levels {
            let (c, cs, g) = (l.c.min(), l.cstar.min(), l.g.min());
            pass &= c >= -POSITIVITY_RTOL * scale && cs >= 0.0 && g >= 1.0;
            worst_c = worst_c.min(c / scale);
            worst_cstar = worst_cstar.min(cs);
            worst_g = worst_g.min(g);
        }
    }
    outcome(pass, format!("min c/|c0| {worst_c:.2e}, min c* {worst_cstar:.2e}, min g {worst_g:.6}"))
}

fn contraction() -> Result<Outcome> {
    let d = strip(16, 8);
    let ratios = contraction_ladder(&d, &PhysParams::default(), &NormSpec::default(), &LADDER_T, 16, 3, 0)?;
    let monotone = ratios.iter().all(|r| r.windows(2).all(|w| w[1] < w[0]));
    let cfg = RunConfig::preset("small-data")?;
    let (_, traj) = run_config(&cfg)?;
    let iters = traj.reports.iter().map(|r| r.iterates).max().unwrap_or(0);
    let fmt: Vec<String> = ratios.iter().map(|r| r.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(">")).collect();
    outcome(
        monotone && iters <= MAX_PICARD,
        format!("ladders [{}]; small-data Picard iterations {iters} (max {MAX_PICARD})", fmt.join(", ")),
    )
}

fn extension() -> Result<Outcome> {
    let rep = extension_diagnose(64, EXT_SLACK, 5, 0)?;
    let worst = rep.checks.iter().filter(|c| c.name.starts_with("ratio")).map(|c| c.value / c.threshold).fold(0.0, f64::max);
    outcome(rep.pass(), format!("worst ratio/bound {:.3} (slack {EXT_SLACK}); {}", worst * (1.0 + EXT_SLACK), report_failures(&rep)))
}

fn continuation() -> Result<Outcome> {
    let mut one = cosine_config(0.3, 0.05, 1);
    one.numerics.t_final = 0.2;
    one.numerics.window0 = 0.2;
    let mut two = one.clone();
    two.numerics.window0 = 0.1;
    let (_, a) = run_config(&one)?;
    let (_, b) = run_config(&two)?;
    let (x, y) = (a.last(), b.last());
    let diff = |p: &plaque_fsi::grid::Field, q: &plaque_fsi::grid::Field| {
        let mut z = p.clone();
        z.axpy(-1.0, q);
        z.max_abs()
    };
    let mut dv = x.v.clone();
    dv.axpy(-1.0, &y.v);
    let worst = dv.max_abs().max(diff(&x.c, &y.c)).max(diff(&x.cstar, &y.cstar)).max(diff(&x.g, &y.g));
    let tol = CONTINUATION_FACTOR * one.numerics.tol;
    outcome(
        worst <= tol && a.reports.len() == 1 && b.reports.len() == 2,
        format!("max terminal difference {worst:.2e} (tol {tol:.0e}); windows {} vs {}", a.reports.len(), b.reports.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 9] = [
        ("1 trivial fixed point", trivial_fixed_point),
        ("2 MMS convergence", mms_orders),
        ("3 ODE oracles", ode_oracles),
        ("4 kinematic identities", kinematics),
        ("5 conservation and constraints", conservation),
        ("6 positivity", positivity),
        ("7 contraction", contraction),
        ("8 extension operator", extension),
        ("9 continuation consistency", continuation),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t0 = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("{} {name}: {detail} [{:.1}s]", if pass { "PASS" } else { "FAIL" }, t0.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
