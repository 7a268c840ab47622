//! Picard iteration inside time windows and continuation across windows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    check_compatibility, ops, DomainTag, Field, InitialData, PhysParams, Rank, Side, Staggering, TwoPhaseDomain,
};
use crate::kinematics::{KinematicsState, Quadrature};
use crate::linear::{HeatOperator, HeatRhs, OuterBoundary, StokesOperator, StokesRhs};
use crate::nonlinear::{self, assemble_g, NonlinearOptions};
use crate::odes::{step_cstar, step_g, OdeScheme};
use crate::spaces::{self, NormSpec};
use crate::state::{time_levels, StateW, WindowStart};

/// Numerical controls of a coupled run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverConfig {
    pub dt: f64,
    pub window0: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default = "default_halvings")]
    pub max_halvings: usize,
    #[serde(default)]
    pub norm: NormSpec,
    #[serde(default)]
    pub ode: OdeScheme,
    #[serde(default)]
    pub quadrature: Quadrature,
    #[serde(default)]
    pub nonlinear: NonlinearOptions,
    /// Relative tolerance of the compatibility gate at the first window.
    #[serde(default = "default_compat_rtol")]
    pub compat_rtol: f64,
    /// Fixed multiplication constant; sampled from the grid when absent.
    #[serde(default)]
    pub m_q: Option<f64>,
}

fn default_t_final() -> f64 {
    0.1
}

fn default_halvings() -> usize {
    8
}

fn default_compat_rtol() -> f64 {
    0.05
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig {
            dt: 0.01,
            window0: 0.1,
            t_final: default_t_final(),
            tol: 1e-8,
            max_iter: 30,
            max_halvings: default_halvings(),
            norm: NormSpec::default(),
            ode: OdeScheme::default(),
            quadrature: Quadrature::default(),
            nonlinear: NonlinearOptions::default(),
            compat_rtol: default_compat_rtol(),
            m_q: None,
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("numerics.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.window0 >= self.dt) {
            return Err(Error::config("numerics.window0", format!("must be at least dt = {}, got {}", self.dt, self.window0)));
        }
        let n = (self.window0 / self.dt).round();
        if (n * self.dt - self.window0).abs() > 1e-9 * self.window0 {
            return Err(Error::config("numerics.window0", "must be a whole number of steps"));
        }
        if !(self.t_final >= self.dt) {
            return Err(Error::config("numerics.t_final", format!("must be at least dt = {}, got {}", self.dt, self.t_final)));
        }
        if let Some(m) = self.m_q {
            if !(m >= 1.0 && m.is_finite()) {
                return Err(Error::config("numerics.m_q", format!("must be a finite number >= 1, got {m}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("numerics.tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::config("numerics.max_iter", "must be at least 1"));
        }
        if !(self.nonlinear.g_min > 0.0) {
            return Err(Error::config("numerics.nonlinear.g_min", "must be positive"));
        }
        if !(self.compat_rtol > 0.0) {
            return Err(Error::config("numerics.compat_rtol", "must be positive"));
        }
        self.norm.validate_driver()
    }
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct IterationReport {
    pub window: [f64; 2],
    pub iterates: usize,
    pub residual_history: Vec<f64>,
    pub contraction_estimate: f64,
    pub accepted: bool,
    pub halvings: usize,
    /// Residual monotone after the second iterate (up to three strikes).
    pub monotone: bool,
    /// `max |Div v − G|` on fluid cells at acceptance.
    pub divergence_fluid: f64,
    /// `max |Div v − γβ c_s/ρ_s − G|` on solid cells at acceptance.
    pub divergence_solid: f64,
    pub velocity_jump: f64,
    pub tangential_jump: f64,
    pub heat_mass_residual: f64,
    pub min_g: f64,
    pub min_c: f64,
}

/// Everything a Picard step needs besides the iterate.
pub struct Problem<'a> {
    pub d: &'a TwoPhaseDomain,
    pub params: &'a PhysParams,
    pub cfg: &'a DriverConfig,
    /// Multiplication constant steering the Neumann-series inversion of F.
    pub m_q: f64,
}

struct Operators {
    heat_f: HeatOperator,
    heat_s: HeatOperator,
    stokes: StokesOperator,
}

impl Operators {
    fn new(p: &Problem) -> Result<Self> {
        let dt = p.cfg.dt;
        Ok(Operators {
            heat_f: HeatOperator::new(p.d, Side::Fluid, p.params, dt)?,
            heat_s: HeatOperator::new(p.d, Side::Solid, p.params, dt)?,
            stokes: StokesOperator::new(p.d, p.params, dt, OuterBoundary::Traction)?,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct StepStats {
    velocity_jump: f64,
    tangential_jump: f64,
    heat_mass: f64,
}

impl Problem<'_> {
    pub fn kinematics(&self, w: &StateW, start: &WindowStart) -> Result<KinematicsState> {
        KinematicsState::from_history(self.d, &start.f, &w.v, &w.times, self.cfg.quadrature, self.m_q, Some(&w.g))
    }

    /// `w ↦ L⁻¹ N(w, w₀)`.
    pub fn picard_step(&self, w: &StateW, start: &WindowStart) -> Result<StateW> {
        let ops = Operators::new(self)?;
        self.step_with(&ops, w, start).map(|(w, _)| w)
    }

    fn step_with(&self, ops: &Operators, w: &StateW, start: &WindowStart) -> Result<(StateW, StepStats)> {
        let d = self.d;
        let p = self.params;
        let dt = self.cfg.dt;
        if w.len() < 2 {
            return Err(Error::Argument("a window needs at least one step".into()));
        }
        let kin = self.kinematics(w, start)?;
        let data: Vec<_> = {
            use rayon::prelude::*;
            (1..w.len())
                .into_par_iter()
                .map(|k| nonlinear::assemble(d, w.level(k), &kin.levels[k], p, &self.cfg.nonlinear))
                .collect::<Result<_>>()?
        };
        let mut out = StateW::constant(start, w.times.clone());
        let mut stats = StepStats::default();

        for k in 1..w.len() {
            let n = &data[k - 1];
            let prev = &out.c[k - 1];
            let fluid = ops.heat_f.solve(&HeatRhs {
                f_bulk: n.f1_f.clone(),
                f_gamma: n.f2_f.clone(),
                f_gammas: None,
                c_init: prev.restrict(d, DomainTag::Fluid)?,
            })?;
            let solid = ops.heat_s.solve(&HeatRhs {
                f_bulk: n.f1_s.clone(),
                f_gamma: n.f2_s.clone(),
                f_gammas: Some(n.f3.clone()),
                c_init: prev.restrict(d, DomainTag::Solid)?,
            })?;
            stats.heat_mass = stats.heat_mass.max(fluid.report.mass_residual).max(solid.report.mass_residual);
            let mut c = prev.clone();
            c.overwrite_from(&fluid.c);
            c.overwrite_from(&solid.c);

            let mut g_div = n.g.clone();
            let rate = p.volume_rate();
            for j in d.rows_of(Side::Solid) {
                for i in 0..d.nx {
                    g_div.set(i, j, 0, g_div.at(i, j, 0) + rate * c.at(i, j, 0));
                }
            }
            let st = ops.stokes.solve(&StokesRhs {
                k: n.k_mac(d),
                g_div,
                h1: n.h1.clone(),
                h2: n.h2.clone(),
                v_init: out.v[k - 1].clone(),
            })?;
            stats.velocity_jump = stats.velocity_jump.max(st.report.velocity_jump);
            stats.tangential_jump = stats.tangential_jump.max(st.report.tangential_jump);

            let c_s = solid.c;
            out.g[k] = step_g(&out.g[k - 1], &c_s, dt, p, self.cfg.ode)?;
            out.cstar[k] = step_cstar(&out.cstar[k - 1], &c_s, dt, p, self.cfg.ode)?;
            if out.g[k].min() < self.cfg.nonlinear.g_min {
                return Err(Error::GrowthBound { g: out.g[k].min(), bound: self.cfg.nonlinear.g_min });
            }
            out.c[k] = c;
            out.v[k] = st.vel;
            out.pi[k] = st.pi;
        }
        Ok((out, stats))
    }

    /// Fixed-point residual between successive iterates.
    pub fn residual(&self, a: &StateW, b: &StateW) -> Result<f64> {
        Ok(spaces::discrete_yt_norm(self.d, &a.diff(b)?, &self.cfg.norm).max())
    }

    /// Divergence constraints of an accepted state, `(fluid, solid)`.
    pub fn divergence_audit(&self, w: &StateW, start: &WindowStart) -> Result<(f64, f64)> {
        let d = self.d;
        let kin = self.kinematics(w, start)?;
        let rate = self.params.volume_rate();
        let (mut fl, mut so) = (0.0f64, 0.0f64);
        for k in 1..w.len() {
            let (g, _, _) = assemble_g(d, w.level(k), &kin.levels[k], self.cfg.nonlinear.g_form)?;
            let div = ops::mac_divergence(d, &w.v[k]);
            for j in 0..d.ny() {
                for i in 0..d.nx {
                    let mut r = div.at(i, j, 0) - g.at(i, j, 0);
                    if d.is_fluid_row(j) {
                        fl = fl.max(r.abs());
                    } else {
                        r -= rate * w.c[k].at(i, j, 0);
                        so = so.max(r.abs());
                    }
                }
            }
        }
        Ok((fl, so))
    }

    /// Iterate on one window of length `len` from `t0`, halving on failure.
    pub fn run_window(&self, start: &WindowStart, t0: f64, len: f64) -> Result<(StateW, IterationReport)> {
        let dt = self.cfg.dt;
        let ops = Operators::new(self)?;
        let mut len = len;
        let mut halvings = 0;
        loop {
            if len < dt * (1.0 - 1e-9) {
                return Err(Error::WindowUnderflow { window: len, dt });
            }
            match self.iterate(&ops, start, t0, len)? {
                Some((w, mut rep)) => {
                    rep.halvings = halvings;
                    return Ok((w, rep));
                }
                None => {
                    if halvings == self.cfg.max_halvings {
                        return Err(Error::WindowUnderflow { window: len, dt });
                    }
                    halvings += 1;
                    len *= 0.5;
                    log::info!("window [{t0}, {}] did not converge; halving", t0 + 2.0 * len);
                    if len >= dt {
                        let n = (len / dt).floor();
                        len = n * dt;
                    }
                }
            }
        }
    }

    /// `Ok(None)` asks the caller to shrink the window.
    fn iterate(&self, ops: &Operators, start: &WindowStart, t0: f64, len: f64) -> Result<Option<(StateW, IterationReport)>> {
        let times = time_levels(t0, len, self.cfg.dt)?;
        self.iterate_seeded(ops, start, StateW::constant(start, times))
    }

    /// Picard iteration on a fixed window from an arbitrary first iterate.
    /// `None` when it fails to converge.
    pub fn iterate_from(&self, start: &WindowStart, seed: StateW) -> Result<Option<(StateW, IterationReport)>> {
        let ops = Operators::new(self)?;
        self.iterate_seeded(&ops, start, seed)
    }

    fn iterate_seeded(&self, ops: &Operators, start: &WindowStart, seed: StateW) -> Result<Option<(StateW, IterationReport)>> {
        let (t0, t1) = (seed.times[0], *seed.times.last().unwrap());
        let mut w = seed;
        let mut rep = IterationReport { window: [t0, t1], ..Default::default() };
        let mut stats = StepStats::default();
        for it in 1..=self.cfg.max_iter {
            let next = match self.step_with(ops, &w, start) {
                Ok(x) => x,
                Err(e @ (Error::GrowthBound { .. } | Error::StepSize { .. } | Error::SingularDeformation { .. })) => {
                    log::info!("iterate {it} failed: {e}");
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            let r = self.residual(&next.0, &w)?;
            rep.residual_history.push(r);
            rep.iterates = it;
            w = next.0;
            stats = next.1;
            if !r.is_finite() || (it > 2 && r > 1e3 * rep.residual_history[0].max(self.cfg.tol)) {
                return Ok(None);
            }
            if r <= self.cfg.tol {
                rep.accepted = true;
                break;
            }
        }
        if !rep.accepted {
            return Ok(None);
        }
        let h = &rep.residual_history;
        rep.contraction_estimate = h.windows(2).filter(|x| x[0] > 0.0).map(|x| x[1] / x[0]).fold(0.0, f64::max);
        let strikes = h.windows(2).skip(1).filter(|x| x[1] > x[0]).count();
        rep.monotone = strikes <= 3;
        let (fl, so) = self.divergence_audit(&w, start)?;
        rep.divergence_fluid = fl;
        rep.divergence_solid = so;
        rep.velocity_jump = stats.velocity_jump;
        rep.tangential_jump = stats.tangential_jump;
        rep.heat_mass_residual = stats.heat_mass;
        rep.min_g = w.g.iter().map(|g| g.min()).fold(f64::INFINITY, f64::min);
        rep.min_c = w.c.iter().map(|c| c.min()).fold(f64::INFINITY, f64::min);
        Ok(Some((w, rep)))
    }

    /// Chain windows over `[0, t_total]`, carrying F and the terminal state.
    pub fn run_continuation(&self, w0: &InitialData, t_total: f64) -> Result<Trajectory> {
        let scale = 1.0f64.max(w0.v0.max_abs()).max(w0.c0.max_abs());
        let compat = check_compatibility(self.d, w0, self.params, self.cfg.compat_rtol * scale)?;
        if !compat.pass() {
            return Err(Error::Compatibility(compat.failures().join(", ")));
        }
        let dt = self.cfg.dt;
        if !(t_total >= dt) {
            return Err(Error::Argument(format!("final time {t_total} is shorter than dt {dt}")));
        }
        let mut start = WindowStart::initial(self.d, w0);
        let mut traj = Trajectory { levels: vec![Snapshot::of(0.0, &start)], reports: Vec::new() };
        let mut t = 0.0;
        while t < t_total - 1e-9 * dt {
            let steps = ((t_total - t) / dt).round().max(1.0);
            let len = self.cfg.window0.min(steps * dt);
            let (w, rep) = self.run_window(&start, t, len)?;
            let kin = self.kinematics(&w, &start)?;
            t = *w.times.last().expect("window has levels");
            for k in 1..w.len() {
                traj.levels.push(Snapshot {
                    t: w.times[k],
                    v: w.v[k].clone(),
                    pi: w.pi[k].clone(),
                    c: w.c[k].clone(),
                    cstar: w.cstar[k].clone(),
                    g: w.g[k].clone(),
                    j: kin.levels[k].j.clone(),
                });
            }
            traj.reports.push(rep);
            start = w.last_start(kin.last().f.clone());
        }
        Ok(traj)
    }
}

/// One stored time level of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub v: crate::grid::MacVelocity,
    pub pi: Field,
    pub c: Field,
    pub cstar: Field,
    pub g: Field,
    /// `det F`.
    pub j: Field,
}

impl Snapshot {
    fn of(t: f64, s: &WindowStart) -> Self {
        let (_, j, _) = crate::kinematics::invert_field(&s.f, 1.0).expect("window-start F is invertible");
        Snapshot { t, v: s.v.clone(), pi: s.pi.clone(), c: s.c.clone(), cstar: s.cstar.clone(), g: s.g.clone(), j }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub levels: Vec<Snapshot>,
    pub reports: Vec<IterationReport>,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.levels.last().expect("trajectory has the initial level")
    }

    /// `(max |J_f − 1|, max |J_s − gⁿ|)` over all stored levels.
    pub fn volume_defects(&self, d: &TwoPhaseDomain, n: usize) -> (f64, f64) {
        let (mut f, mut s) = (0.0f64, 0.0f64);
        for l in &self.levels {
            for j in 0..d.ny() {
                for i in 0..d.nx {
                    let jv = l.j.at(i, j, 0);
                    if d.is_fluid_row(j) {
                        f = f.max((jv - 1.0).abs());
                    } else {
                        s = s.max((jv - l.g.at(i, j, 0).powi(n as i32)).abs());
                    }
                }
            }
        }
        (f, s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NonnegativityReport {
    pub min_per_level: Vec<f64>,
    pub threshold: f64,
    pub flagged: Vec<usize>,
}

impl NonnegativityReport {
    pub fn pass(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Minimum of `c` per level; levels below `−rtol·‖c⁰‖_∞` are flagged.
pub fn nonnegativity_audit(c: &[Field], rtol: f64) -> NonnegativityReport {
    let c0 = c.first().map(|f| f.max_abs()).unwrap_or(0.0);
    let threshold = -rtol * c0;
    let min_per_level: Vec<f64> = c.iter().map(|f| f.min()).collect();
    let flagged = min_per_level.iter().enumerate().filter(|(_, &m)| m < threshold).map(|(k, _)| k).collect();
    NonnegativityReport { min_per_level, threshold, flagged }
}

/// Uniform field helper for presets and tests.
pub fn uniform_concentration(d: &TwoPhaseDomain, c0: f64) -> Field {
    Field::constant(d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar, c0)
}
