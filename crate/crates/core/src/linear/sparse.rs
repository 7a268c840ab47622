//! Sparse assembly, direct factorization and MatrixMarket exchange.

use std::fmt::Write as _;

use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Affine expression `Σ a_k x_k + c` in the unknowns of a system.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub c: f64,
}

impl LinExpr {
    pub fn var(k: usize, a: f64) -> Self {
        LinExpr { terms: vec![(k, a)], c: 0.0 }
    }

    pub fn konst(c: f64) -> Self {
        LinExpr { terms: Vec::new(), c }
    }

    pub fn add(&mut self, other: &LinExpr, s: f64) -> &mut Self {
        self.terms.extend(other.terms.iter().map(|&(k, a)| (k, s * a)));
        self.c += s * other.c;
        self
    }

    pub fn plus(mut self, other: &LinExpr, s: f64) -> Self {
        self.add(other, s);
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.terms.iter_mut().for_each(|t| t.1 *= s);
        self.c *= s;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.c + self.terms.iter().map(|&(k, a)| a * x[k]).sum::<f64>()
    }
}

/// Row-by-row builder for `A x = b`.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub n: usize,
    triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

impl Assembly {
    pub fn new(n: usize) -> Self {
        Assembly { n, triplets: Vec::with_capacity(n * 12), rhs: vec![0.0; n] }
    }

    /// Impose `expr = value` as row `row`.
    pub fn set_row(&mut self, row: usize, expr: &LinExpr, value: f64) {
        for &(k, a) in &expr.terms {
            if a != 0.0 {
                self.triplets.push((row, k, a));
            }
        }
        self.rhs[row] = value - expr.c;
    }

    pub fn matrix(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.n, self.n, &self.triplets)
    }
}

/// Compressed sparse rows with merged duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, t: &[(usize, usize, f64)]) -> Self {
        let mut sorted = t.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut data: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix { nrows, ncols, indptr, indices, data }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k])))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| (self.indptr[r]..self.indptr[r + 1]).map(|k| self.data[k] * x[self.indices[k]]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_matrix_market(&self, comment: &str) -> String {
        let mut s = String::with_capacity(32 * self.nnz() + 128);
        s.push_str("%%MatrixMarket matrix coordinate real general\n");
        for line in comment.lines() {
            let _ = writeln!(s, "% {line}");
        }
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for (r, c, v) in self.triplets() {
            let _ = writeln!(s, "{} {} {:.17e}", r + 1, c + 1, v);
        }
        s
    }
}

/// Largest row or column count accepted by the reader.
pub const MAX_MM_DIM: usize = 1 << 24;

/// Parse an ASCII MatrixMarket coordinate real/integer general matrix.
pub fn read_matrix_market(text: &str) -> Result<CsrMatrix> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty MatrixMarket input".into()))?;
    let h: Vec<String> = header.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" || h[2] != "coordinate" {
        return Err(Error::Parse(format!("unsupported MatrixMarket header: {header}")));
    }
    if h[3] != "real" && h[3] != "integer" {
        return Err(Error::Parse(format!("unsupported field type {}", h[3])));
    }
    if h[4] != "general" {
        return Err(Error::Parse(format!("unsupported symmetry {}", h[4])));
    }
    let mut body = lines.filter(|l| !l.trim_start().starts_with('%') && !l.trim().is_empty());
    let size = body.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|w| w.parse::<usize>().map_err(|e| Error::Parse(format!("size line: {e}"))))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(Error::Parse(format!("size line needs 3 integers: {size}")));
    }
    let (nr, nc, nnz) = (dims[0], dims[1], dims[2]);
    if nr > MAX_MM_DIM || nc > MAX_MM_DIM {
        return Err(Error::Parse(format!("dimensions {nr}x{nc} exceed {MAX_MM_DIM}")));
    }
    if nnz > nr.saturating_mul(nc) {
        return Err(Error::Parse("more entries than matrix positions".into()));
    }
    let mut t = Vec::with_capacity(nnz.min(1 << 20));
    for line in body.by_ref().take(nnz) {
        let w: Vec<&str> = line.split_whitespace().collect();
        if w.len() != 3 {
            return Err(Error::Parse(format!("entry needs 3 fields: {line}")));
        }
        let r: usize = w[0].parse().map_err(|e| Error::Parse(format!("row index: {e}")))?;
        let c: usize = w[1].parse().map_err(|e| Error::Parse(format!("column index: {e}")))?;
        let v: f64 = w[2].parse().map_err(|e| Error::Parse(format!("value: {e}")))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("non-finite value {v}")));
        }
        if r == 0 || c == 0 || r > nr || c > nc {
            return Err(Error::Parse(format!("index ({r},{c}) outside {nr}x{nc}")));
        }
        t.push((r - 1, c - 1, v));
    }
    if t.len() != nnz {
        return Err(Error::Parse(format!("expected {nnz} entries, found {}", t.len())));
    }
    if body.next().is_some() {
        return Err(Error::Parse("trailing data after the declared entries".into()));
    }
    Ok(CsrMatrix::from_triplets(nr, nc, &t))
}

/// Sparse LU factorization with a residual-checked solve.
pub struct DirectSolver {
    a: CsrMatrix,
    lu: Lu<usize, f64>,
}

impl DirectSolver {
    pub fn new(a: CsrMatrix) -> Result<Self> {
        let t: Vec<Triplet<usize, usize, f64>> = a.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &t)
            .map_err(|e| Error::SingularSystem(format!("matrix construction failed: {e:?}")))?;
        let lu = m
            .sp_lu()
            .map_err(|e| Error::SingularSystem(format!("factorization failed: {e:?}")))?;
        Ok(DirectSolver { a, lu })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    /// Solve and verify `‖Ax − b‖∞ ≤ 1e-9 (‖A‖‖x‖ + ‖b‖)`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        use faer::prelude::Solve;
        let n = b.len();
        let mut rhs = Mat::<f64>::zeros(n, 1);
        for (k, v) in b.iter().enumerate() {
            rhs[(k, 0)] = *v;
        }
        let sol = self.lu.solve(&rhs);
        let x: Vec<f64> = (0..n).map(|k| sol[(k, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("non-finite solution; the operator has a null space".into()));
        }
        let r = self.residual(&x, b);
        let scale = self.a.max_abs() * x.iter().fold(0.0f64, |m, v| m.max(v.abs())) + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if r > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::SingularSystem(format!(
                "residual {r:e} exceeds tolerance (scale {scale:e}); the operator is numerically singular"
            )));
        }
        Ok(x)
    }

    pub fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        self.a.matvec(x).iter().zip(b).fold(0.0f64, |m, (ax, bv)| m.max((ax - bv).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.matvec(&[1.0, 1.0]), vec![4.0, 2.0]);
    }

    #[test]
    fn matrix_market_roundtrip() {
        let m = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.5), (2, 1, -0.25), (1, 2, 1e-300)]);
        let text = m.to_matrix_market("test\nmulti-line");
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n"));
        assert_eq!(read_matrix_market(&text).unwrap(), m);
    }

    #[test]
    fn matrix_market_rejects_garbage() {
        assert!(read_matrix_market("").is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n1 1\n1\n").is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n").is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix coordinate real general\n99999999999 1 0\n").is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 NaN\n").is_err());
    }

    #[test]
    fn direct_solve_small() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 4.0)]);
        let s = DirectSolver::new(m).unwrap();
        let x = s.solve(&[3.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_detected() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        let r = DirectSolver::new(m).and_then(|s| s.solve(&[1.0, 2.0]));
        assert!(r.is_err());
    }
}
