use serde::{Deserialize, Serialize};

use super::TwoPhaseDomain;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Staggering {
    CellCenter,
    XFace,
    YFace,
    Node,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainTag {
    Fluid,
    Solid,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rank {
    Scalar,
    Vector,
    /// Row-major 2x2: `[T11, T12, T21, T22]`.
    Tensor,
}

impl Rank {
    pub fn ncomp(self) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => 2,
            Rank::Tensor => 4,
        }
    }
}

/// Grid samples with a staggering, a subdomain tag and a rank.
///
/// Storage covers only the rows that belong to the tag, so a fluid field
/// has no samples on solid cells and reading there is an error.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub staggering: Staggering,
    pub tag: DomainTag,
    pub rank: Rank,
    nx: usize,
    row0: usize,
    nrows: usize,
    pub values: Vec<f64>,
}

/// Row range `[start, end)` covered by a staggering/tag pair.
pub fn row_range(d: &TwoPhaseDomain, st: Staggering, tag: DomainTag) -> (usize, usize) {
    let ny = d.ny();
    let on_faces = matches!(st, Staggering::YFace | Staggering::Node);
    match (tag, on_faces) {
        (DomainTag::Fluid, false) => (0, d.ny_f),
        (DomainTag::Solid, false) => (d.ny_f, ny),
        (DomainTag::Both, false) => (0, ny),
        (DomainTag::Fluid, true) => (0, d.ny_f + 1),
        (DomainTag::Solid, true) => (d.ny_f, ny + 1),
        (DomainTag::Both, true) => (0, ny + 1),
    }
}

impl Field {
    pub fn zeros(d: &TwoPhaseDomain, staggering: Staggering, tag: DomainTag, rank: Rank) -> Self {
        Self::constant(d, staggering, tag, rank, 0.0)
    }

    pub fn constant(
        d: &TwoPhaseDomain,
        staggering: Staggering,
        tag: DomainTag,
        rank: Rank,
        value: f64,
    ) -> Self {
        let (r0, r1) = row_range(d, staggering, tag);
        let nrows = r1 - r0;
        Field {
            staggering,
            tag,
            rank,
            nx: d.nx,
            row0: r0,
            nrows,
            values: vec![value; d.nx * nrows * rank.ncomp()],
        }
    }

    /// Scalar cell field sampled from `f(x, y)` at cell centres.
    pub fn cell_scalar(d: &TwoPhaseDomain, tag: DomainTag, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(d, Staggering::CellCenter, tag, Rank::Scalar);
        for j in out.rows() {
            for i in 0..d.nx {
                let (x, y) = d.cell_center(i, j);
                out.set(i, j, 0, f(x, y));
            }
        }
        out
    }

    /// Tensor cell field; `f` returns row-major components.
    pub fn cell_tensor(d: &TwoPhaseDomain, tag: DomainTag, f: impl Fn(f64, f64) -> [f64; 4]) -> Self {
        let mut out = Self::zeros(d, Staggering::CellCenter, tag, Rank::Tensor);
        for j in out.rows() {
            for i in 0..d.nx {
                let (x, y) = d.cell_center(i, j);
                let t = f(x, y);
                for (k, tk) in t.iter().enumerate() {
                    out.set(i, j, k, *tk);
                }
            }
        }
        out
    }

    /// Identity tensor everywhere on the tag.
    pub fn identity(d: &TwoPhaseDomain, tag: DomainTag) -> Self {
        Self::cell_tensor(d, tag, |_, _| [1.0, 0.0, 0.0, 1.0])
    }

    /// Zero field with the same staggering, tag and rows but another rank.
    pub fn like(&self, rank: Rank) -> Field {
        Field {
            staggering: self.staggering,
            tag: self.tag,
            rank,
            nx: self.nx,
            row0: self.row0,
            nrows: self.nrows,
            values: vec![0.0; self.nx * self.nrows * rank.ncomp()],
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn rows(&self) -> std::ops::Range<usize> {
        self.row0..self.row0 + self.nrows
    }

    pub fn ncomp(&self) -> usize {
        self.rank.ncomp()
    }

    pub fn contains_row(&self, j: usize) -> bool {
        j >= self.row0 && j < self.row0 + self.nrows
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, comp: usize) -> usize {
        ((j - self.row0) * self.nx + i) * self.rank.ncomp() + comp
    }

    /// Checked read; rows outside the tag are an error.
    pub fn get(&self, i: usize, j: usize, comp: usize) -> Result<f64> {
        if i >= self.nx || !self.contains_row(j) || comp >= self.ncomp() {
            return Err(Error::Field(format!(
                "({i},{j},{comp}) is undefined for a {:?}-tagged {:?} field",
                self.tag, self.staggering
            )));
        }
        Ok(self.values[self.index(i, j, comp)])
    }

    /// Unchecked read for assembly loops (panics outside storage).
    #[inline]
    pub fn at(&self, i: usize, j: usize, comp: usize) -> f64 {
        debug_assert!(self.contains_row(j));
        self.values[self.index(i, j, comp)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, comp: usize, v: f64) {
        let k = self.index(i, j, comp);
        self.values[k] = v;
    }

    /// Tensor at a point as `[[a, b], [c, d]]` row-major.
    #[inline]
    pub fn tensor(&self, i: usize, j: usize) -> [f64; 4] {
        let k = self.index(i, j, 0);
        [self.values[k], self.values[k + 1], self.values[k + 2], self.values[k + 3]]
    }

    #[inline]
    pub fn set_tensor(&mut self, i: usize, j: usize, t: [f64; 4]) {
        let k = self.index(i, j, 0);
        self.values[k..k + 4].copy_from_slice(&t);
    }

    pub fn same_layout(&self, other: &Field) -> bool {
        self.staggering == other.staggering
            && self.tag == other.tag
            && self.rank == other.rank
            && self.nx == other.nx
            && self.values.len() == other.values.len()
    }

    pub fn check_layout(&self, other: &Field, what: &str) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {:?}/{:?}/{:?} vs {:?}/{:?}/{:?}",
                self.staggering, self.tag, self.rank, other.staggering, other.tag, other.rank
            )))
        }
    }

    /// Copy of the rows belonging to `tag` (must be covered by `self`).
    pub fn restrict(&self, d: &TwoPhaseDomain, tag: DomainTag) -> Result<Field> {
        let mut out = Field::zeros(d, self.staggering, tag, self.rank);
        for j in out.rows() {
            if !self.contains_row(j) {
                return Err(Error::Field(format!("cannot restrict {:?} field to {:?}", self.tag, tag)));
            }
            for i in 0..self.nx {
                for c in 0..self.ncomp() {
                    out.set(i, j, c, self.at(i, j, c));
                }
            }
        }
        Ok(out)
    }

    /// Write the overlapping rows of `part` into `self`.
    pub fn overwrite_from(&mut self, part: &Field) {
        for j in part.rows() {
            if self.contains_row(j) {
                for i in 0..self.nx {
                    for c in 0..self.ncomp() {
                        self.set(i, j, c, part.at(i, j, c));
                    }
                }
            }
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    pub fn axpy(&mut self, a: f64, x: &Field) {
        debug_assert!(self.same_layout(x));
        for (y, xv) in self.values.iter_mut().zip(&x.values) {
            *y += a * xv;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Samples along Γ or Γ_s, one per column at `x = (i + 1/2) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub ncomp: usize,
    pub values: Vec<f64>,
}

impl Trace {
    pub fn zeros(nx: usize, ncomp: usize) -> Self {
        Trace { ncomp, values: vec![0.0; nx * ncomp] }
    }

    pub fn from_fn(d: &TwoPhaseDomain, ncomp: usize, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let mut t = Trace::zeros(d.nx, ncomp);
        for i in 0..d.nx {
            let v = f((i as f64 + 0.5) * d.dx);
            t.values[i * ncomp..(i + 1) * ncomp].copy_from_slice(&v[..ncomp]);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.ncomp.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn at(&self, i: usize, comp: usize) -> f64 {
        self.values[i * self.ncomp + comp]
    }

    #[inline]
    pub fn set(&mut self, i: usize, comp: usize, v: f64) {
        self.values[i * self.ncomp + comp] = v;
    }

    /// Periodic average onto nodes `x = i dx` (between columns i-1 and i).
    pub fn at_node(&self, i: usize, comp: usize) -> f64 {
        let n = self.len();
        0.5 * (self.at((i + n - 1) % n, comp) + self.at(i % n, comp))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Velocity on the MAC grid: `u` on x-faces, `v` on y-faces.
#[derive(Debug, Clone, PartialEq)]
pub struct MacVelocity {
    pub u: Field,
    pub v: Field,
}

impl MacVelocity {
    pub fn zeros(d: &TwoPhaseDomain) -> Self {
        MacVelocity {
            u: Field::zeros(d, Staggering::XFace, DomainTag::Both, Rank::Scalar),
            v: Field::zeros(d, Staggering::YFace, DomainTag::Both, Rank::Scalar),
        }
    }

    /// Sample a continuous velocity `f(x, y) -> (u, v)` at face centres.
    /// `v` on the symmetry plane `y = 0` is forced to zero.
    pub fn from_fn(d: &TwoPhaseDomain, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut m = Self::zeros(d);
        for j in 0..d.ny() {
            for i in 0..d.nx {
                let (x, y) = d.xface(i, j);
                m.u.set(i, j, 0, f(x, y).0);
            }
        }
        for j in 1..=d.ny() {
            for i in 0..d.nx {
                let (x, y) = d.yface(i, j);
                m.v.set(i, j, 0, f(x, y).1);
            }
        }
        m
    }

    /// Like [`MacVelocity::from_fn`] with separate closures per subdomain.
    /// Interface y-faces take the fluid closure.
    pub fn from_sides(
        d: &TwoPhaseDomain,
        fluid: impl Fn(f64, f64) -> (f64, f64),
        solid: impl Fn(f64, f64) -> (f64, f64),
    ) -> Self {
        let mut m = Self::zeros(d);
        for j in 0..d.ny() {
            for i in 0..d.nx {
                let (x, y) = d.xface(i, j);
                let val = if d.is_fluid_row(j) { fluid(x, y).0 } else { solid(x, y).0 };
                m.u.set(i, j, 0, val);
            }
        }
        for j in 1..=d.ny() {
            for i in 0..d.nx {
                let (x, y) = d.yface(i, j);
                let val = if j <= d.ny_f { fluid(x, y).1 } else { solid(x, y).1 };
                m.v.set(i, j, 0, val);
            }
        }
        m
    }

    pub fn axpy(&mut self, a: f64, x: &MacVelocity) {
        self.u.axpy(a, &x.u);
        self.v.axpy(a, &x.v);
    }

    pub fn scaled(&self, a: f64) -> Self {
        MacVelocity { u: self.u.scaled(a), v: self.v.scaled(a) }
    }

    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.v.max_abs())
    }
}
