//! Compressed sparse row matrices, ILU(0) and triangular solves.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Pivots at or below this magnitude count as zero.
pub const PIVOT_TOL: f64 = 1e-300;

/// Square matrix in compressed sparse row form with sorted, unique column
/// indices in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, validating every invariant.
    pub fn from_csr(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n + 1 {
            return Err(Error::LengthMismatch {
                expected: n + 1,
                got: row_ptr.len(),
            });
        }
        if col_idx.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: col_idx.len(),
                got: values.len(),
            });
        }
        if row_ptr[0] != 0 || row_ptr[n] != col_idx.len() {
            return Err(Error::ShapeMismatch(
                "row pointers must start at 0 and end at nnz".into(),
            ));
        }
        for i in 0..n {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::ShapeMismatch(format!("row pointer decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.iter().any(|&c| c >= n) {
                return Err(Error::ShapeMismatch(format!("column index out of range in row {i}")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::ShapeMismatch(format!(
                    "columns of row {i} are not strictly increasing"
                )));
            }
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Trusted constructor for arrays produced inside the crate.
    pub(crate) fn from_csr_unchecked(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), n + 1);
        debug_assert_eq!(col_idx.len(), values.len());
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Sums duplicate entries and drops those below [`PIVOT_TOL`].
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        if let Some(&(i, j, _)) = sorted.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(Error::ShapeMismatch(format!(
                "entry ({i}, {j}) outside a {n}x{n} matrix"
            )));
        }
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut iter = sorted.into_iter().peekable();
        while let Some((i, j, mut v)) = iter.next() {
            while let Some(&(i2, j2, v2)) = iter.peek() {
                if i2 == i && j2 == j {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v.abs() > PIVOT_TOL {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self::from_csr_unchecked(n, row_ptr, col_idx, values))
    }

    /// Row-major dense input; exact zeros are not stored.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                got: dense.len(),
            });
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let v = dense[i * n + j];
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self::from_csr_unchecked(n, row_ptr, col_idx, values))
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_csr_unchecked(n, (0..=n).collect(), (0..n).collect(), diag.to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Stored value at `(i, j)`, zero when outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).0.binary_search(&j).is_ok()
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: if x.len() != self.n { x.len() } else { y.len() },
            });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum();
        }
        Ok(())
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[i * n + j] = v;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut counts = vec![0usize; n + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let p = next[j];
                col_idx[p] = i;
                values[p] = v;
                next[j] += 1;
            }
        }
        Self::from_csr_unchecked(n, row_ptr, col_idx, values)
    }

    /// Largest `|a_ij - a_ji|` over the pattern union.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
            let (cols, vals) = t.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }

    /// Writes the matrix in Matrix Market coordinate format.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }

    /// Reads a square real coordinate matrix written by
    /// [`Self::write_matrix_market`] or any compatible tool.
    pub fn read_matrix_market<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = match lines.next() {
            Some(Ok(h)) => h,
            _ => return Err(Error::Parse("missing header".into())),
        };
        let lower = header.to_ascii_lowercase();
        if !lower.starts_with("%%matrixmarket matrix coordinate real") {
            return Err(Error::Parse(format!("unsupported header '{header}'")));
        }
        let symmetric = lower.contains("symmetric");
        let mut size: Option<(usize, usize)> = None;
        let mut triplets = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse(format!("malformed line {}: '{line}'", lineno + 2));
            if size.is_none() {
                if fields.len() != 3 {
                    return Err(bad());
                }
                let rows: usize = fields[0].parse().map_err(|_| bad())?;
                let cols: usize = fields[1].parse().map_err(|_| bad())?;
                let nnz: usize = fields[2].parse().map_err(|_| bad())?;
                if rows != cols {
                    return Err(Error::Parse(format!("matrix is {rows}x{cols}, not square")));
                }
                size = Some((rows, nnz));
                triplets.reserve(nnz);
                continue;
            }
            if fields.len() != 3 {
                return Err(bad());
            }
            let i: usize = fields[0].parse().map_err(|_| bad())?;
            let j: usize = fields[1].parse().map_err(|_| bad())?;
            let v: f64 = fields[2].parse().map_err(|_| bad())?;
            if i == 0 || j == 0 {
                return Err(bad());
            }
            triplets.push((i - 1, j - 1, v));
            if symmetric && i != j {
                triplets.push((j - 1, i - 1, v));
            }
        }
        let (n, nnz) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
        let listed = if symmetric {
            triplets.iter().filter(|t| t.0 <= t.1).count()
        } else {
            triplets.len()
        };
        if listed != nnz {
            return Err(Error::Parse(format!("expected {nnz} entries, found {listed}")));
        }
        Self::from_triplets(n, &triplets)
    }
}

/// Incomplete factors `M ≈ L U`: `L` strictly lower with an implicit unit
/// diagonal, `U` upper triangular including the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct IluFactors {
    l: SparseMatrix,
    u: SparseMatrix,
}

impl IluFactors {
    pub fn l(&self) -> &SparseMatrix {
        &self.l
    }

    pub fn u(&self) -> &SparseMatrix {
        &self.u
    }

    pub fn n(&self) -> usize {
        self.l.n
    }

    pub fn nnz(&self) -> usize {
        self.l.nnz() + self.u.nnz()
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got: len,
            });
        }
        Ok(())
    }

    /// Solves `L y = r`.
    pub fn forward_sub(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.check(r.len())?;
        let mut y = r.to_vec();
        self.forward_in_place(&mut y);
        Ok(y)
    }

    /// Solves `U z = y`.
    pub fn backward_sub(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y.len())?;
        let mut z = y.to_vec();
        self.backward_in_place(&mut z)?;
        Ok(z)
    }

    /// One forward and one backward sweep, approximating `M^{-1} r`.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.check(r.len())?;
        let mut z = r.to_vec();
        self.apply_in_place(&mut z)?;
        Ok(z)
    }

    pub(crate) fn apply_in_place(&self, v: &mut [f64]) -> Result<()> {
        self.forward_in_place(v);
        self.backward_in_place(v)
    }

    fn forward_in_place(&self, y: &mut [f64]) {
        for i in 0..self.n() {
            let (cols, vals) = self.l.row(i);
            let s: f64 = cols.iter().zip(vals).map(|(&j, v)| v * y[j]).sum();
            y[i] -= s;
        }
    }

    fn backward_in_place(&self, z: &mut [f64]) -> Result<()> {
        for i in (0..self.n()).rev() {
            let (cols, vals) = self.u.row(i);
            match cols.first() {
                Some(&c) if c == i && vals[0].abs() > PIVOT_TOL => {}
                _ => return Err(Error::ZeroDiagonal { row: i }),
            }
            let s: f64 = cols[1..].iter().zip(&vals[1..]).map(|(&j, v)| v * z[j]).sum();
            z[i] = (z[i] - s) / vals[0];
        }
        Ok(())
    }
}

/// ILU(0): Gaussian elimination restricted to the pattern of `m`.
pub fn ilu0(m: &SparseMatrix) -> Result<IluFactors> {
    let n = m.n;
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut vals = m.values.clone();
    let mut diag = vec![usize::MAX; n];
    for (i, d) in diag.iter_mut().enumerate() {
        let (cols, _) = m.row(i);
        match cols.binary_search(&i) {
            Ok(p) => *d = m.row_ptr[i] + p,
            Err(_) => return Err(Error::ZeroPivot { row: i, value: 0.0 }),
        }
    }
    // position of column j inside the current row, usize::MAX when absent
    let mut pos = vec![usize::MAX; n];
    for i in 0..n {
        let start = m.row_ptr[i];
        let end = m.row_ptr[i + 1];
        for p in start..end {
            pos[m.col_idx[p]] = p;
        }
        for p in start..diag[i] {
            let k = m.col_idx[p];
            let pivot = vals[diag[k]];
            if pivot.abs() <= PIVOT_TOL {
                return Err(Error::ZeroPivot { row: k, value: pivot });
            }
            let factor = vals[p] / pivot;
            vals[p] = factor;
            for q in diag[k] + 1..m.row_ptr[k + 1] {
                let target = pos[m.col_idx[q]];
                if target != usize::MAX {
                    vals[target] -= factor * vals[q];
                }
            }
        }
        for p in start..end {
            pos[m.col_idx[p]] = usize::MAX;
        }
    }
    let last = vals[diag[n - 1]];
    if last.abs() <= PIVOT_TOL {
        return Err(Error::ZeroPivot {
            row: n - 1,
            value: last,
        });
    }

    let mut l_ptr = Vec::with_capacity(n + 1);
    let mut u_ptr = Vec::with_capacity(n + 1);
    let lower = diag
        .iter()
        .enumerate()
        .map(|(i, &d)| d - m.row_ptr[i])
        .sum::<usize>();
    let mut l_col = Vec::with_capacity(lower);
    let mut l_val = Vec::with_capacity(lower);
    let mut u_col = Vec::with_capacity(m.nnz() - lower);
    let mut u_val = Vec::with_capacity(m.nnz() - lower);
    l_ptr.push(0);
    u_ptr.push(0);
    for i in 0..n {
        let start = m.row_ptr[i];
        let end = m.row_ptr[i + 1];
        l_col.extend_from_slice(&m.col_idx[start..diag[i]]);
        l_val.extend_from_slice(&vals[start..diag[i]]);
        u_col.extend_from_slice(&m.col_idx[diag[i]..end]);
        u_val.extend_from_slice(&vals[diag[i]..end]);
        l_ptr.push(l_col.len());
        u_ptr.push(u_col.len());
    }
    Ok(IluFactors {
        l: SparseMatrix::from_csr_unchecked(n, l_ptr, l_col, l_val),
        u: SparseMatrix::from_csr_unchecked(n, u_ptr, u_col, u_val),
    })
}

/// `max |M - LU|_ij / (1 + |M_ij|)` over the pattern of `m`.
pub fn ilu_pattern_residual(m: &SparseMatrix, f: &IluFactors) -> f64 {
    let n = m.n;
    let mut acc = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let (lcols, lvals) = f.l.row(i);
        let terms = lcols.iter().zip(lvals).map(|(&k, &v)| (k, v));
        for (k, lik) in terms.chain(std::iter::once((i, 1.0))) {
            let (ucols, uvals) = f.u.row(k);
            for (&j, &ukj) in ucols.iter().zip(uvals) {
                acc[j] += lik * ukj;
            }
        }
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            worst = worst.max((v - acc[j]).abs() / (1.0 + v.abs()));
        }
        for (&k, _) in lcols.iter().zip(lvals).chain(std::iter::once((&i, &1.0))) {
            for &j in f.u.row(k).0 {
                acc[j] = 0.0;
            }
        }
    }
    worst
}

pub fn spmv(a: &SparseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.spmv(x)
}

pub fn forward_sub(f: &IluFactors, r: &[f64]) -> Result<Vec<f64>> {
    f.forward_sub(r)
}

pub fn backward_sub(f: &IluFactors, y: &[f64]) -> Result<Vec<f64>> {
    f.backward_sub(y)
}

pub fn precond_apply(f: &IluFactors, r: &[f64]) -> Result<Vec<f64>> {
    f.apply(r)
}
