use std::collections::BTreeSet;

use super::{C64, CMat, CVec, ZERO};
use crate::error::{Error, Result, mismatch};

/// Compressed sparse column storage. Row indices are sorted and unique
/// within each column; explicit zeros are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<C64>,
}

impl CscMatrix {
    /// Builds from raw arrays, validating the structural invariants.
    pub fn new(nrows: usize, ncols: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>, values: Vec<C64>) -> Result<Self> {
        if col_ptr.len() != ncols + 1 || col_ptr[0] != 0 || row_idx.len() != values.len() {
            return Err(mismatch("CSC arrays inconsistent"));
        }
        if *col_ptr.last().unwrap() != row_idx.len() {
            return Err(mismatch("CSC column pointer does not cover the index array"));
        }
        for j in 0..ncols {
            if col_ptr[j] > col_ptr[j + 1] {
                return Err(mismatch("CSC column pointers decrease"));
            }
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            if rows.iter().any(|&r| r >= nrows) || rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(mismatch(format!("CSC column {j} has unsorted, duplicate or out-of-range rows")));
            }
        }
        Ok(CscMatrix { nrows, ncols, col_ptr, row_idx, values })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix { nrows, ncols, col_ptr: vec![0; ncols + 1], row_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        CscMatrix { nrows: n, ncols: n, col_ptr: (0..=n).collect(), row_idx: (0..n).collect(), values: vec![C64::new(1.0, 0.0); n] }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, C64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, C64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(mismatch(format!("triplet ({r}, {c}) outside {nrows}x{ncols}")));
            }
            sorted.push((r, c, v));
        }
        sorted.sort_by_key(|&(r, c, _)| (c, r));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<C64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_idx.push(r);
            values.push(v);
            col_ptr[c + 1] += 1;
            last = Some((r, c));
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        Ok(CscMatrix { nrows, ncols, col_ptr, row_idx, values })
    }

    /// Keeps the exact nonzeros of a dense matrix.
    pub fn from_dense(m: &CMat) -> Self {
        let mut col_ptr = vec![0usize; m.ncols() + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != ZERO {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr[j + 1] = row_idx.len();
        }
        CscMatrix { nrows: m.nrows(), ncols: m.ncols(), col_ptr, row_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Entries of column `j` as `(row, value)`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// All entries as `(row, col, value)` in column-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        (0..self.ncols).flat_map(|j| self.column(j).map(move |(i, v)| (i, j, v))).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[r.clone()].binary_search(&i) {
            Ok(p) => self.values[r.start + p],
            Err(_) => ZERO,
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for (i, v) in self.column(j) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &CVec) -> CVec {
        let mut y = CVec::zeros(self.nrows);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == ZERO {
                continue;
            }
            for (i, v) in self.column(j) {
                y[i] += v * xj;
            }
        }
        y
    }

    pub fn mul_dense(&self, x: &CMat) -> CMat {
        let mut y = CMat::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            for j in 0..self.ncols {
                let xj = x[(j, c)];
                if xj == ZERO {
                    continue;
                }
                for (i, v) in self.column(j) {
                    y[(i, c)] += v * xj;
                }
            }
        }
        y
    }

    /// `selfᴴ · x`.
    pub fn adjoint_mul_dense(&self, x: &CMat) -> CMat {
        let mut y = CMat::zeros(self.ncols, x.ncols());
        for c in 0..x.ncols() {
            for j in 0..self.ncols {
                let mut acc = ZERO;
                for (i, v) in self.column(j) {
                    acc += v.conj() * x[(i, c)];
                }
                y[(j, c)] = acc;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        self.transpose_map(|v| v)
    }

    pub fn adjoint(&self) -> Self {
        self.transpose_map(|v| v.conj())
    }

    fn transpose_map(&self, f: impl Fn(C64) -> C64) -> Self {
        let mut count = vec![0usize; self.nrows + 1];
        for &i in &self.row_idx {
            count[i + 1] += 1;
        }
        for i in 0..self.nrows {
            count[i + 1] += count[i];
        }
        let col_ptr = count.clone();
        let mut next = count;
        let mut row_idx = vec![0; self.nnz()];
        let mut values = vec![ZERO; self.nnz()];
        for j in 0..self.ncols {
            for (i, v) in self.column(j) {
                let p = next[i];
                row_idx[p] = j;
                values[p] = f(v);
                next[i] += 1;
            }
        }
        CscMatrix { nrows: self.ncols, ncols: self.nrows, col_ptr, row_idx, values }
    }

    /// `a·self + b·other` over the union pattern.
    pub fn linear_combination(&self, a: C64, other: &CscMatrix, b: C64) -> Self {
        let mut col_ptr = vec![0usize; self.ncols + 1];
        let mut row_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for j in 0..self.ncols {
            let mut x = self.column(j).peekable();
            let mut y = other.column(j).peekable();
            loop {
                match (x.peek().copied(), y.peek().copied()) {
                    (Some((i, u)), Some((k, w))) if i == k => {
                        row_idx.push(i);
                        values.push(a * u + b * w);
                        x.next();
                        y.next();
                    }
                    (Some((i, u)), Some((k, _))) if i < k => {
                        row_idx.push(i);
                        values.push(a * u);
                        x.next();
                    }
                    (Some((i, u)), None) => {
                        row_idx.push(i);
                        values.push(a * u);
                        x.next();
                    }
                    (_, Some((k, w))) => {
                        row_idx.push(k);
                        values.push(b * w);
                        y.next();
                    }
                    (None, None) => break,
                }
            }
            col_ptr[j + 1] = row_idx.len();
        }
        CscMatrix { nrows: self.nrows, ncols: self.ncols, col_ptr, row_idx, values }
    }

    /// Adds `value` at `(i, j)`, inserting the entry when absent.
    pub fn with_added_entry(&self, i: usize, j: usize, value: C64) -> Self {
        let extra = CscMatrix::from_triplets(self.nrows, self.ncols, &[(i, j, value)]).expect("entry in range");
        self.linear_combination(C64::new(1.0, 0.0), &extra, C64::new(1.0, 0.0))
    }

    /// Sparse product `self · other`.
    pub fn mul_sparse(&self, other: &CscMatrix) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(mismatch("sparse product: inner dimensions differ"));
        }
        let mut acc = vec![ZERO; self.nrows];
        let mut mark = vec![usize::MAX; self.nrows];
        let mut col_ptr = vec![0usize; other.ncols + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..other.ncols {
            let mut rows = Vec::new();
            for (k, b) in other.column(j) {
                for (i, a) in self.column(k) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = ZERO;
                        rows.push(i);
                    }
                    acc[i] += a * b;
                }
            }
            rows.sort_unstable();
            for i in rows {
                row_idx.push(i);
                values.push(acc[i]);
            }
            col_ptr[j + 1] = row_idx.len();
        }
        Ok(CscMatrix { nrows: self.nrows, ncols: other.ncols, col_ptr, row_idx, values })
    }

    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.nrows];
        for (&i, v) in self.row_idx.iter().zip(&self.values) {
            rows[i] += v.norm();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn norm_one(&self) -> f64 {
        (0..self.ncols).map(|j| self.column(j).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }
}

/// Greedy minimum-degree elimination order on the pattern of `M + Mᵀ`.
pub fn minimum_degree_order(m: &CscMatrix) -> Vec<usize> {
    let n = m.ncols();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for j in 0..n {
        for (i, _) in m.column(j) {
            if i != j && i < n {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n).filter(|&v| alive[v]).min_by_key(|&v| (adj[v].len(), v)).unwrap();
        alive[v] = false;
        order.push(v);
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for &a in &nbrs {
            adj[a].remove(&v);
            for &b in &nbrs {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        adj[v].clear();
    }
    order
}

const NONE: usize = usize::MAX;

/// Left-looking sparse LU with partial pivoting: `P·M·Q = L·U`.
/// `L` is unit lower triangular; both factors are indexed by elimination step.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<C64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<C64>,
    u_diag: Vec<C64>,
    perm: Vec<usize>,
    q: Vec<usize>,
}

impl SparseLu {
    /// Factors with column order `q` (natural when `None`). A pivot at or
    /// below `drop_tol` aborts with `SingularMatrix` naming the column being
    /// eliminated and the best remaining row.
    pub fn new(m: &CscMatrix, q: Option<Vec<usize>>, drop_tol: f64) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(mismatch(format!("sparse LU of non-square {}x{}", n, m.ncols())));
        }
        let q = q.unwrap_or_else(|| (0..n).collect());
        let mut pinv = vec![NONE; n];
        let mut perm = vec![NONE; n];
        let mut l_ptr = vec![0usize];
        let mut l_idx: Vec<usize> = Vec::new();
        let mut l_val: Vec<C64> = Vec::new();
        let mut u_ptr = vec![0usize];
        let mut u_idx: Vec<usize> = Vec::new();
        let mut u_val: Vec<C64> = Vec::new();
        let mut u_diag = vec![ZERO; n];
        let mut x = vec![ZERO; n];
        let mut marked = vec![false; n];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut post: Vec<usize> = Vec::new();

        for k in 0..n {
            let col = q[k];
            // Reach of the column's pattern in the graph of L.
            post.clear();
            for (start, _) in m.column(col) {
                if marked[start] {
                    continue;
                }
                marked[start] = true;
                stack.push((start, 0));
                while let Some(top) = stack.len().checked_sub(1) {
                    let (node, mut next) = stack[top];
                    let s = pinv[node];
                    let (lo, hi) = if s == NONE { (0, 0) } else { (l_ptr[s], l_ptr[s + 1]) };
                    let mut pushed = None;
                    while lo + next < hi {
                        let c = l_idx[lo + next];
                        next += 1;
                        if !marked[c] {
                            pushed = Some(c);
                            break;
                        }
                    }
                    stack[top].1 = next;
                    match pushed {
                        Some(c) => {
                            marked[c] = true;
                            stack.push((c, 0));
                        }
                        None => {
                            post.push(node);
                            stack.pop();
                        }
                    }
                }
            }
            for (i, v) in m.column(col) {
                x[i] = v;
            }
            for &i in post.iter().rev() {
                let s = pinv[i];
                if s == NONE {
                    continue;
                }
                let xi = x[i];
                if xi == ZERO {
                    continue;
                }
                for p in l_ptr[s]..l_ptr[s + 1] {
                    x[l_idx[p]] -= l_val[p] * xi;
                }
            }
            let mut ipiv = NONE;
            let mut best = -1.0;
            for &i in &post {
                if pinv[i] == NONE {
                    let a = x[i].norm();
                    if a > best || (a == best && i < ipiv) {
                        best = a;
                        ipiv = i;
                    }
                }
            }
            if ipiv == NONE || best <= drop_tol || best == 0.0 {
                let row = if ipiv == NONE { pinv.iter().position(|&s| s == NONE).unwrap_or(0) } else { ipiv };
                return Err(Error::SingularMatrix { column: col, row, magnitude: best.max(0.0) });
            }
            let pivot = x[ipiv];
            for &i in &post {
                let s = pinv[i];
                if s != NONE {
                    u_idx.push(s);
                    u_val.push(x[i]);
                } else if i != ipiv {
                    l_idx.push(i);
                    l_val.push(x[i] / pivot);
                }
            }
            u_diag[k] = pivot;
            pinv[ipiv] = k;
            perm[k] = ipiv;
            l_ptr.push(l_idx.len());
            u_ptr.push(u_idx.len());
            for &i in &post {
                x[i] = ZERO;
                marked[i] = false;
            }
        }
        for r in l_idx.iter_mut() {
            *r = pinv[*r];
        }
        Ok(SparseLu { n, l_ptr, l_idx, l_val, u_ptr, u_idx, u_val, u_diag, perm, q })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Nonzeros in `L` (without the unit diagonal) plus `U`.
    pub fn factor_nnz(&self) -> usize {
        self.l_val.len() + self.u_val.len() + self.n
    }

    /// `(row, column, magnitude)` of the smallest pivot.
    pub fn weakest_pivot(&self) -> (usize, usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, d) in self.u_diag.iter().enumerate() {
            if d.norm() < best.1 {
                best = (k, d.norm());
            }
        }
        if self.n == 0 {
            return (0, 0, f64::INFINITY);
        }
        (self.perm[best.0], self.q[best.0], best.1)
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        let mut y: Vec<C64> = (0..n).map(|k| b[self.perm[k]]).collect();
        for k in 0..n {
            let yk = y[k];
            if yk == ZERO {
                continue;
            }
            for p in self.l_ptr[k]..self.l_ptr[k + 1] {
                y[self.l_idx[p]] -= self.l_val[p] * yk;
            }
        }
        for k in (0..n).rev() {
            y[k] /= self.u_diag[k];
            let yk = y[k];
            if yk == ZERO {
                continue;
            }
            for p in self.u_ptr[k]..self.u_ptr[k + 1] {
                y[self.u_idx[p]] -= self.u_val[p] * yk;
            }
        }
        for k in 0..n {
            b[self.q[k]] = y[k];
        }
    }

    /// Solves `Mᴴ x = b` in place.
    pub fn solve_adjoint_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        let mut s: Vec<C64> = (0..n).map(|k| b[self.q[k]]).collect();
        for k in 0..n {
            let mut acc = s[k];
            for p in self.u_ptr[k]..self.u_ptr[k + 1] {
                acc -= self.u_val[p].conj() * s[self.u_idx[p]];
            }
            s[k] = acc / self.u_diag[k].conj();
        }
        for k in (0..n).rev() {
            let mut acc = s[k];
            for p in self.l_ptr[k]..self.l_ptr[k + 1] {
                acc -= self.l_val[p].conj() * s[self.l_idx[p]];
            }
            s[k] = acc;
        }
        for k in 0..n {
            b[self.perm[k]] = s[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn tridiag(n: usize) -> CscMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, c(4.0)));
            if i + 1 < n {
                t.push((i, i + 1, c(-1.0)));
                t.push((i + 1, i, C64::new(-1.0, 0.5)));
            }
        }
        CscMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CscMatrix::from_triplets(2, 2, &[(0, 0, c(1.0)), (0, 0, c(2.0)), (1, 0, c(5.0))]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), c(3.0));
    }

    #[test]
    fn rejects_unsorted_rows() {
        assert!(CscMatrix::new(2, 1, vec![0, 2], vec![1, 0], vec![c(1.0), c(1.0)]).is_err());
    }

    #[test]
    fn transpose_roundtrip() {
        let m = tridiag(5);
        assert_eq!(m.transpose().transpose(), m);
        assert_eq!(m.adjoint().to_dense(), m.to_dense().adjoint());
    }

    #[test]
    fn lu_solves_and_adjoint_solves() {
        let m = tridiag(7);
        let lu = SparseLu::new(&m, None, 0.0).unwrap();
        let x0: Vec<C64> = (0..7).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let b = m.mul_vec(&CVec::from_vec(x0.clone()));
        let mut x = b.as_slice().to_vec();
        lu.solve_in_place(&mut x);
        for i in 0..7 {
            assert!((x[i] - x0[i]).norm() < 1e-12);
        }
        let bh = m.adjoint().mul_vec(&CVec::from_vec(x0.clone()));
        let mut y = bh.as_slice().to_vec();
        lu.solve_adjoint_in_place(&mut y);
        for i in 0..7 {
            assert!((y[i] - x0[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn lu_needs_pivoting() {
        let m = CscMatrix::from_triplets(3, 3, &[(1, 0, c(1.0)), (0, 1, c(2.0)), (2, 2, c(3.0)), (0, 2, c(1.0))]).unwrap();
        let lu = SparseLu::new(&m, None, 0.0).unwrap();
        let mut b = vec![c(1.0), c(2.0), c(3.0)];
        let want = nalgebra::DMatrix::from(m.to_dense()).lu().solve(&CVec::from_vec(b.clone())).unwrap();
        lu.solve_in_place(&mut b);
        for i in 0..3 {
            assert!((b[i] - want[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn singular_column_is_reported() {
        let m = CscMatrix::from_triplets(3, 3, &[(0, 0, c(1.0)), (1, 1, c(1.0)), (0, 2, c(1.0)), (1, 2, c(1.0))]).unwrap();
        let err = SparseLu::new(&m, None, 0.0).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { column: 2, row: 2, .. }));
    }

    #[test]
    fn minimum_degree_is_a_permutation_and_factors() {
        let m = tridiag(9).linear_combination(c(1.0), &CscMatrix::identity(9), c(1.0));
        let mut order = minimum_degree_order(&m);
        let lu = SparseLu::new(&m, Some(order.clone()), 0.0).unwrap();
        order.sort();
        assert_eq!(order, (0..9).collect::<Vec<_>>());
        let mut b = vec![c(1.0); 9];
        lu.solve_in_place(&mut b);
        let r = m.mul_vec(&CVec::from_vec(b)) - CVec::from_element(9, c(1.0));
        assert!(r.norm() < 1e-12);
    }
}
