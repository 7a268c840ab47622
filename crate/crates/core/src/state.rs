//! The unknown `w = (v, π, c, c*, g)` sampled at the time levels of a window.

use crate::error::{Error, Result};
use crate::grid::{DomainTag, Field, InitialData, MacVelocity, Rank, Staggering, TwoPhaseDomain};

#[derive(Debug, Clone, PartialEq)]
pub struct StateW {
    pub times: Vec<f64>,
    pub v: Vec<MacVelocity>,
    pub pi: Vec<Field>,
    pub c: Vec<Field>,
    pub cstar: Vec<Field>,
    pub g: Vec<Field>,
}

/// Borrowed view of one time level.
#[derive(Debug, Clone, Copy)]
pub struct Level<'a> {
    pub vel: &'a MacVelocity,
    pub pi: &'a Field,
    pub c: &'a Field,
    pub cstar: &'a Field,
    pub g: &'a Field,
}

/// Window-start values carried from one window to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowStart {
    pub v: MacVelocity,
    pub pi: Field,
    pub c: Field,
    pub cstar: Field,
    pub g: Field,
    /// Deformation gradient at the window start.
    pub f: Field,
}

impl WindowStart {
    pub fn initial(d: &TwoPhaseDomain, w0: &InitialData) -> Self {
        WindowStart {
            v: w0.v0.clone(),
            pi: Field::zeros(d, Staggering::CellCenter, DomainTag::Both, Rank::Scalar),
            c: w0.c0.clone(),
            cstar: w0.cstar0().clone(),
            g: w0.g0().clone(),
            f: Field::identity(d, DomainTag::Both),
        }
    }
}

/// Equally spaced levels `t0, t0 + dt, …` covering `[t0, t0 + len]`.
pub fn time_levels(t0: f64, len: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && len > 0.0) {
        return Err(Error::Argument(format!("window {len} and step {dt} must be positive")));
    }
    let n = (len / dt).round() as usize;
    if n == 0 || ((n as f64) * dt - len).abs() > 1e-9 * len {
        return Err(Error::Argument(format!("window {len} is not a multiple of dt {dt}")));
    }
    Ok((0..=n).map(|k| t0 + k as f64 * dt).collect())
}

impl StateW {
    /// Constant-in-time extension of the window-start values.
    pub fn constant(start: &WindowStart, times: Vec<f64>) -> Self {
        let n = times.len();
        StateW {
            v: vec![start.v.clone(); n],
            pi: vec![start.pi.clone(); n],
            c: vec![start.c.clone(); n],
            cstar: vec![start.cstar.clone(); n],
            g: vec![start.g.clone(); n],
            times,
        }
    }

    /// `w = (0, 0, 0, 0, 1)`.
    pub fn trivial(d: &TwoPhaseDomain, times: Vec<f64>) -> Self {
        Self::constant(&WindowStart::initial(d, &InitialData::zero(d)), times)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn level(&self, k: usize) -> Level<'_> {
        Level { vel: &self.v[k], pi: &self.pi[k], c: &self.c[k], cstar: &self.cstar[k], g: &self.g[k] }
    }

    pub fn last_start(&self, f: Field) -> WindowStart {
        let k = self.len() - 1;
        WindowStart {
            v: self.v[k].clone(),
            pi: self.pi[k].clone(),
            c: self.c[k].clone(),
            cstar: self.cstar[k].clone(),
            g: self.g[k].clone(),
            f,
        }
    }

    /// Component-wise `self − other`.
    pub fn diff(&self, other: &StateW) -> Result<StateW> {
        if self.len() != other.len() {
            return Err(Error::Shape("states have different numbers of levels".into()));
        }
        let sub = |a: &[Field], b: &[Field]| -> Vec<Field> {
            a.iter()
                .zip(b)
                .map(|(x, y)| {
                    let mut z = x.clone();
                    z.axpy(-1.0, y);
                    z
                })
                .collect()
        };
        Ok(StateW {
            times: self.times.clone(),
            v: self
                .v
                .iter()
                .zip(&other.v)
                .map(|(a, b)| {
                    let mut z = a.clone();
                    z.axpy(-1.0, b);
                    z
                })
                .collect(),
            pi: sub(&self.pi, &other.pi),
            c: sub(&self.c, &other.c),
            cstar: sub(&self.cstar, &other.cstar),
            g: sub(&self.g, &other.g),
        })
    }

    /// Every component multiplied by `a` (including `g`).
    pub fn scaled(&self, a: f64) -> StateW {
        StateW {
            times: self.times.clone(),
            v: self.v.iter().map(|x| x.scaled(a)).collect(),
            pi: self.pi.iter().map(|x| x.scaled(a)).collect(),
            c: self.c.iter().map(|x| x.scaled(a)).collect(),
            cstar: self.cstar.iter().map(|x| x.scaled(a)).collect(),
            g: self.g.iter().map(|x| x.scaled(a)).collect(),
        }
    }

    /// Largest absolute entry over all components and levels.
    pub fn max_abs(&self) -> f64 {
        let f = |v: &[Field]| v.iter().fold(0.0f64, |m, x| m.max(x.max_abs()));
        self.v
            .iter()
            .fold(0.0f64, |m, x| m.max(x.max_abs()))
            .max(f(&self.pi))
            .max(f(&self.c))
            .max(f(&self.cstar))
            .max(f(&self.g))
    }
}
