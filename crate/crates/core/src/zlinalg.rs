//! Exact integer matrix algebra: Smith and Hermite normal forms, integer
//! linear systems and left kernels. Everything is arbitrary precision.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major integer matrix.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntMatrix{}x{}[", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            write!(f, "{}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn new(rows: usize, cols: usize, data: Vec<BigInt>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(IntMatrix { rows, cols, data })
    }

    /// Builds a matrix from rows, each of which must have exactly `cols` entries.
    pub fn from_rows<I>(cols: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<BigInt>>,
    {
        let mut data = Vec::new();
        let mut count = 0;
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {count} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend(row);
            count += 1;
        }
        Ok(IntMatrix {
            rows: count,
            cols,
            data,
        })
    }

    /// Convenience constructor for small literal matrices. Panics on ragged input.
    pub fn from_i64(rows: &[&[i64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Self::from_rows(cols, rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()))
            .expect("ragged literal matrix")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: BigInt) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn col(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        out.data[i * other.cols + j] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `self · x` for a column vector `x`.
    pub fn mul_vec(&self, x: &[BigInt]) -> Result<Vec<BigInt>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| dot(self.row(i), x))
            .collect())
    }

    /// `c · self` for a row vector `c`.
    pub fn vec_mul(&self, c: &[BigInt]) -> Result<Vec<BigInt>> {
        if c.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "row vector of length {} against {} rows",
                c.len(),
                self.rows
            )));
        }
        let mut out = vec![BigInt::zero(); self.cols];
        for (i, ci) in c.iter().enumerate() {
            if ci.is_zero() {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                let a = self.get(i, j);
                if !a.is_zero() {
                    *o += ci * a;
                }
            }
        }
        Ok(out)
    }

    /// Vertical concatenation.
    pub fn stack(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "stacking {} columns on {} columns",
                other.cols, self.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Ok(IntMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Keeps the first `cols` columns.
    pub fn truncate_cols(&self, cols: usize) -> IntMatrix {
        let cols = cols.min(self.cols);
        let mut out = Self::zeros(self.rows, cols);
        for i in 0..self.rows {
            for j in 0..cols {
                out.set(i, j, self.get(i, j).clone());
            }
        }
        out
    }

    /// Pads every row with zeros up to `cols` columns.
    pub fn pad_cols(&self, cols: usize) -> IntMatrix {
        assert!(cols >= self.cols);
        let mut out = Self::zeros(self.rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// `row[dst] += factor * row[src]`
    pub fn add_row(&mut self, dst: usize, src: usize, factor: &BigInt) {
        if factor.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let v = &self.data[src * self.cols + j] * factor;
            self.data[dst * self.cols + j] += v;
        }
    }

    /// `col[dst] += factor * col[src]`
    pub fn add_col(&mut self, dst: usize, src: usize, factor: &BigInt) {
        if factor.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let v = &self.data[i * self.cols + src] * factor;
            self.data[i * self.cols + dst] += v;
        }
    }

    pub fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -std::mem::take(&mut self.data[i * self.cols + j]);
            self.data[i * self.cols + j] = v;
        }
    }

    pub fn negate_col(&mut self, j: usize) {
        for i in 0..self.rows {
            let v = -std::mem::take(&mut self.data[i * self.cols + j]);
            self.data[i * self.cols + j] = v;
        }
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> Result<BigInt> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "determinant of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(BigInt::one());
        }
        let mut a = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a.get(k, k).is_zero() {
                match (k + 1..n).find(|&i| !a.get(i, k).is_zero()) {
                    Some(i) => {
                        a.swap_rows(k, i);
                        sign = -sign;
                    }
                    None => return Ok(BigInt::zero()),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (a.get(i, j) * a.get(k, k) - a.get(i, k) * a.get(k, j)) / &prev;
                    a.set(i, j, v);
                }
            }
            prev = a.get(k, k).clone();
        }
        Ok(sign * a.get(n - 1, n - 1))
    }

    pub fn is_unimodular(&self) -> bool {
        self.rows == self.cols && self.det().map(|d| d.abs().is_one()).unwrap_or(false)
    }

    /// Diagonal entries `a_ii` for `i < min(rows, cols)`.
    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i).clone())
            .collect()
    }
}

pub fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter()
        .zip(b)
        .filter(|(x, y)| !x.is_zero() && !y.is_zero())
        .map(|(x, y)| x * y)
        .sum()
}

pub fn add_vec(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            a.get(i).cloned().unwrap_or_default() + b.get(i).cloned().unwrap_or_default()
        })
        .collect()
}

pub fn sub_vec(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            a.get(i).cloned().unwrap_or_default() - b.get(i).cloned().unwrap_or_default()
        })
        .collect()
}

pub fn scale_vec(c: &BigInt, a: &[BigInt]) -> Vec<BigInt> {
    a.iter().map(|x| c * x).collect()
}

pub fn to_big(v: &[i64]) -> Vec<BigInt> {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

/// `U · M · V = D` with `U`, `V` unimodular and `D` in Smith normal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnfDecomposition {
    pub u: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
}

impl SnfDecomposition {
    /// Nonzero-or-zero diagonal entries of `D`, in order.
    pub fn diagonal(&self) -> Vec<BigInt> {
        self.d.diagonal()
    }
}

/// Smith decomposition together with the inverses of both multipliers.
#[derive(Clone, Debug)]
pub(crate) struct SnfFull {
    pub u: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
    pub v_inv: IntMatrix,
}

pub fn snf(m: &IntMatrix) -> SnfDecomposition {
    let full = snf_full(m);
    SnfDecomposition {
        u: full.u,
        d: full.d,
        v: full.v,
    }
}

/// Position of the smallest nonzero absolute value in the lower-right block
/// starting at `(t, t)`; ties go to the lowest row-major index.
fn smallest_pivot(a: &IntMatrix, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for i in t..a.rows() {
        for j in t..a.cols() {
            let x = a.get(i, j);
            if x.is_zero() {
                continue;
            }
            match best {
                Some((bi, bj)) if a.get(bi, bj).abs() <= x.abs() => {}
                _ => best = Some((i, j)),
            }
        }
    }
    best
}

pub(crate) fn snf_full(m: &IntMatrix) -> SnfFull {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a = m.clone();
    let mut u = IntMatrix::identity(rows);
    let mut v = IntMatrix::identity(cols);
    let mut v_inv = IntMatrix::identity(cols);

    let row_add = |a: &mut IntMatrix, u: &mut IntMatrix, dst: usize, src: usize, q: &BigInt| {
        a.add_row(dst, src, q);
        u.add_row(dst, src, q);
    };
    let col_add = |a: &mut IntMatrix, v: &mut IntMatrix, v_inv: &mut IntMatrix, dst: usize, src: usize, q: &BigInt| {
        a.add_col(dst, src, q);
        v.add_col(dst, src, q);
        v_inv.add_row(src, dst, &-q);
    };

    for t in 0..rows.min(cols) {
        loop {
            let Some((pi, pj)) = smallest_pivot(&a, t) else {
                return SnfFull { u, d: a, v, v_inv };
            };
            a.swap_rows(t, pi);
            u.swap_rows(t, pi);
            a.swap_cols(t, pj);
            v.swap_cols(t, pj);
            v_inv.swap_rows(t, pj);

            let pivot = a.get(t, t).clone();
            let mut clean = true;
            for i in t + 1..rows {
                let q = a.get(i, t).div_floor(&pivot);
                row_add(&mut a, &mut u, i, t, &-q);
                if !a.get(i, t).is_zero() {
                    clean = false;
                }
            }
            for j in t + 1..cols {
                let q = a.get(t, j).div_floor(&pivot);
                col_add(&mut a, &mut v, &mut v_inv, j, t, &-q);
                if !a.get(t, j).is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            let offender = (t + 1..rows).find(|&i| {
                (t + 1..cols).any(|j| !a.get(i, j).is_multiple_of(&pivot))
            });
            match offender {
                Some(i) => row_add(&mut a, &mut u, t, i, &BigInt::one()),
                None => break,
            }
        }
        if a.get(t, t).is_negative() {
            a.negate_row(t);
            u.negate_row(t);
        }
    }
    SnfFull { u, d: a, v, v_inv }
}

/// Row Hermite normal form: returns `(H, U)` with `U · M = H`, `U` unimodular,
/// `H` in echelon form with positive pivots and entries above each pivot
/// reduced into `[0, pivot)`.
pub fn hnf(m: &IntMatrix) -> (IntMatrix, IntMatrix) {
    let (rows, cols) = (m.rows(), m.cols());
    let mut h = m.clone();
    let mut u = IntMatrix::identity(rows);
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let mut found = false;
        loop {
            let mut best: Option<usize> = None;
            for i in r..rows {
                let x = h.get(i, c);
                if x.is_zero() {
                    continue;
                }
                match best {
                    Some(b) if h.get(b, c).abs() <= x.abs() => {}
                    _ => best = Some(i),
                }
            }
            let Some(p) = best else { break };
            found = true;
            h.swap_rows(r, p);
            u.swap_rows(r, p);
            let pivot = h.get(r, c).clone();
            let mut done = true;
            for i in r + 1..rows {
                let q = -h.get(i, c).div_floor(&pivot);
                h.add_row(i, r, &q);
                u.add_row(i, r, &q);
                if !h.get(i, c).is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if !found {
            continue;
        }
        if h.get(r, c).is_negative() {
            h.negate_row(r);
            u.negate_row(r);
        }
        let pivot = h.get(r, c).clone();
        for i in 0..r {
            let q = -h.get(i, c).div_floor(&pivot);
            h.add_row(i, r, &q);
            u.add_row(i, r, &q);
        }
        r += 1;
    }
    (h, u)
}

/// Rank of the row space.
pub fn rank(m: &IntMatrix) -> usize {
    let (h, _) = hnf(m);
    (0..h.rows()).filter(|&i| h.row(i).iter().any(|x| !x.is_zero())).count()
}

/// Basis (as rows) of the lattice `{c : c · M = 0}`.
pub fn left_kernel(m: &IntMatrix) -> IntMatrix {
    let (h, u) = hnf(m);
    let r = (0..h.rows()).filter(|&i| h.row(i).iter().any(|x| !x.is_zero())).count();
    IntMatrix::from_rows(u.cols(), (r..u.rows()).map(|i| u.row(i).to_vec()))
        .expect("rows taken from a matrix")
}

/// Canonical basis of the row lattice of `m`: the nonzero rows of its HNF.
pub fn lattice_basis(m: &IntMatrix) -> IntMatrix {
    let (h, _) = hnf(m);
    IntMatrix::from_rows(
        h.cols(),
        (0..h.rows())
            .filter(|&i| h.row(i).iter().any(|x| !x.is_zero()))
            .map(|i| h.row(i).to_vec()),
    )
    .expect("rows taken from a matrix")
}

/// Solves `M · x = b` over the integers.
pub fn solve_linear(m: &IntMatrix, b: &[BigInt]) -> Result<Option<Vec<BigInt>>> {
    if b.len() != m.rows() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side of length {} for {} equations",
            b.len(),
            m.rows()
        )));
    }
    let f = snf_full(m);
    let ub = f.u.mul_vec(b)?;
    let k = m.rows().min(m.cols());
    let mut y = vec![BigInt::zero(); m.cols()];
    for (i, ubi) in ub.iter().enumerate() {
        let d = if i < k { f.d.get(i, i).clone() } else { BigInt::zero() };
        if d.is_zero() {
            if !ubi.is_zero() {
                return Ok(None);
            }
        } else {
            let (q, r) = ubi.div_rem(&d);
            if !r.is_zero() {
                return Ok(None);
            }
            y[i] = q;
        }
    }
    Ok(Some(f.v.mul_vec(&y)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_snf(m: &IntMatrix) -> SnfDecomposition {
        let s = snf(m);
        assert_eq!(s.u.mul(m).unwrap().mul(&s.v).unwrap(), s.d);
        assert!(s.u.is_unimodular() && s.v.is_unimodular());
        s
    }

    #[test]
    fn snf_identity() {
        let s = check_snf(&IntMatrix::identity(3));
        assert_eq!(s.d, IntMatrix::identity(3));
        assert_eq!(s.u, IntMatrix::identity(3));
        assert_eq!(s.v, IntMatrix::identity(3));
    }

    #[test]
    fn snf_zero() {
        let s = check_snf(&IntMatrix::from_i64(&[&[0]]));
        assert_eq!(s.d, IntMatrix::from_i64(&[&[0]]));
    }

    /// Oracle: search all 2x2 unimodular multipliers with entries in [-3, 3]
    /// and collect every diagonal, nonnegative, divisibility-chained product.
    #[test]
    fn snf_diag_2_3_matches_bounded_search() {
        let m = IntMatrix::from_i64(&[&[2, 0], &[0, 3]]);
        let mut unimodular = Vec::new();
        for a in -3..=3i64 {
            for b in -3..=3i64 {
                for c in -3..=3i64 {
                    for d in -3..=3i64 {
                        if (a * d - b * c).abs() == 1 {
                            unimodular.push(IntMatrix::from_i64(&[&[a, b], &[c, d]]));
                        }
                    }
                }
            }
        }
        let mut found = std::collections::BTreeSet::new();
        for u in &unimodular {
            let um = u.mul(&m).unwrap();
            for v in &unimodular {
                let p = um.mul(v).unwrap();
                let (d0, d1) = (p.get(0, 0).clone(), p.get(1, 1).clone());
                if p.get(0, 1).is_zero()
                    && p.get(1, 0).is_zero()
                    && !d0.is_negative()
                    && !d1.is_negative()
                    && (d0.is_zero() && d1.is_zero() || !d0.is_zero() && d1.is_multiple_of(&d0))
                {
                    found.insert((d0, d1));
                }
            }
        }
        assert_eq!(found.len(), 1);
        let (d0, d1) = found.into_iter().next().unwrap();
        let s = check_snf(&m);
        assert_eq!(s.diagonal(), vec![d0, d1]);
        assert_eq!(s.diagonal(), to_big(&[1, 6]));
    }

    #[test]
    fn snf_pivot_is_deterministic() {
        let m = IntMatrix::from_i64(&[&[6, 4], &[4, 6]]);
        assert_eq!(snf(&m), snf(&m));
        assert_eq!(check_snf(&m).diagonal(), to_big(&[2, 10]));
    }

    #[test]
    fn hnf_examples() {
        let (h, u) = hnf(&IntMatrix::identity(3));
        assert_eq!(h, IntMatrix::identity(3));
        assert!(u.is_unimodular());

        // gcd(4, 6) = 2
        let m = IntMatrix::from_i64(&[&[4], &[6]]);
        let (h, u) = hnf(&m);
        assert_eq!(h, IntMatrix::from_i64(&[&[2], &[0]]));
        assert_eq!(u.mul(&m).unwrap(), h);
        assert!(u.is_unimodular());

        let z = IntMatrix::from_i64(&[&[0, 0]]);
        assert_eq!(hnf(&z).0, z);
    }

    #[test]
    fn hnf_reduces_above_pivots() {
        let m = IntMatrix::from_i64(&[&[2, 7, 1], &[0, 3, 5], &[4, 1, 1]]);
        let (h, u) = hnf(&m);
        assert_eq!(u.mul(&m).unwrap(), h);
        let mut col = 0;
        for r in 0..h.rows() {
            while col < h.cols() && h.get(r, col).is_zero() {
                col += 1;
            }
            if col == h.cols() {
                break;
            }
            let p = h.get(r, col);
            assert!(p.is_positive());
            for i in 0..r {
                assert!(!h.get(i, col).is_negative() && h.get(i, col) < p);
            }
            col += 1;
        }
    }

    #[test]
    fn solve_examples() {
        let m = IntMatrix::from_i64(&[&[2, 0], &[0, 3]]);
        assert_eq!(solve_linear(&m, &to_big(&[4, 9])).unwrap(), Some(to_big(&[2, 3])));
        let m = IntMatrix::from_i64(&[&[2]]);
        assert_eq!(solve_linear(&m, &to_big(&[3])).unwrap(), None);
        assert!(solve_linear(&m, &to_big(&[3, 1])).is_err());
    }

    #[test]
    fn solve_matches_box_search() {
        let m = IntMatrix::from_i64(&[&[1, 1], &[1, -1]]);
        let b = to_big(&[2, 0]);
        let mut hits = Vec::new();
        for x in -5..=5i64 {
            for y in -5..=5i64 {
                if m.mul_vec(&to_big(&[x, y])).unwrap() == b {
                    hits.push(to_big(&[x, y]));
                }
            }
        }
        assert_eq!(hits, vec![to_big(&[1, 1])]);
        assert_eq!(solve_linear(&m, &b).unwrap(), Some(hits[0].clone()));
    }

    #[test]
    fn left_kernel_annihilates() {
        let m = IntMatrix::from_i64(&[&[1, 2], &[2, 4], &[3, 6]]);
        let k = left_kernel(&m);
        assert_eq!(k.rows(), 2);
        for i in 0..k.rows() {
            assert!(m.vec_mul(k.row(i)).unwrap().iter().all(Zero::is_zero));
        }
    }

    #[test]
    fn det_small() {
        let m = IntMatrix::from_i64(&[&[0, 1, 2], &[3, 4, 5], &[6, 7, 9]]);
        assert_eq!(m.det().unwrap(), BigInt::from(-3));
    }
}
