//! Compressed sparse row storage and a sparse Cholesky factorization with a
//! nested-dissection ordering.

use std::io::Write;

use crate::{Error, Result};

/// Square sparse matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given per-row column sets (each sorted, unique).
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for r in rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Sums duplicate entries.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            rows[i].push(j);
        }
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
        }
        let mut a = Self::from_pattern(rows);
        for &(i, j, v) in triplets {
            a.add(i, j, v);
        }
        a
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.col_idx[start..self.row_ptr[i + 1]]
            .binary_search(&j)
            .ok()
            .map(|k| start + k)
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is outside the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, a)| a * x[j]).sum()
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |a_ij - a_ji|, treating entries missing from the pattern as zero.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `P A Pᵀ` where `perm[new] = old`.
    pub fn permute(&self, perm: &[usize]) -> CsrMatrix {
        let mut inv = vec![0; self.n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for &old in perm {
            let (c, v) = self.row(old);
            buf.clear();
            buf.extend(c.iter().zip(v).map(|(&j, &a)| (inv[j], a)));
            buf.sort_unstable_by_key(|e| e.0);
            for &(j, a) in &buf {
                col_idx.push(j);
                values.push(a);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Drops row and column `k`.
    pub fn without(&self, k: usize) -> CsrMatrix {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for i in (0..self.n).filter(|&i| i != k) {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                if j != k {
                    col_idx.push(if j > k { j - 1 } else { j });
                    values.push(a);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n: self.n - 1,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Writes the matrix in MatrixMarket coordinate format (1-based, general).
    pub fn write_matrix_market(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, a)?;
            }
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                d[(i, j)] = *a;
            }
        }
        d
    }
}

const LEAF_SIZE: usize = 64;

/// Fill-reducing ordering by recursive level-set bisection of the matrix graph.
/// Returns `perm` with `perm[new] = old`.
pub fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut nd = Dissection {
        a,
        mark: vec![0; n],
        stamp: 0,
        level: vec![0; n],
        perm: Vec::with_capacity(n),
    };
    nd.split((0..n).collect());
    nd.perm
}

struct Dissection<'a> {
    a: &'a CsrMatrix,
    /// `mark[v] == stamp` means v belongs to the current subgraph.
    mark: Vec<u64>,
    stamp: u64,
    level: Vec<usize>,
    perm: Vec<usize>,
}

impl Dissection<'_> {
    fn select(&mut self, nodes: &[usize]) {
        self.stamp += 2;
        for &v in nodes {
            self.mark[v] = self.stamp;
        }
    }

    /// Breadth-first levels from `root` within the selected subgraph.
    /// Visited nodes get mark `stamp + 1`; returns them in visiting order.
    fn bfs(&mut self, root: usize) -> Vec<usize> {
        let (inside, seen) = (self.stamp, self.stamp + 1);
        let mut order = vec![root];
        self.mark[root] = seen;
        self.level[root] = 0;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let (cols, _) = self.a.row(v);
            for &u in cols {
                if self.mark[u] == inside {
                    self.mark[u] = seen;
                    self.level[u] = self.level[v] + 1;
                    order.push(u);
                }
            }
        }
        order
    }

    fn reselect(&mut self, nodes: &[usize]) {
        for &v in nodes {
            self.mark[v] = self.stamp;
        }
    }

    fn split(&mut self, nodes: Vec<usize>) {
        if nodes.len() <= LEAF_SIZE {
            self.perm.extend(nodes);
            return;
        }
        self.select(&nodes);
        // Pseudo-peripheral root: restart from the farthest node while that deepens the levels.
        let mut order = self.bfs(nodes[0]);
        for _ in 0..4 {
            let far = *order.last().unwrap();
            let depth = self.level[far];
            self.reselect(&order);
            order = self.bfs(far);
            if self.level[*order.last().unwrap()] <= depth {
                break;
            }
        }
        if order.len() < nodes.len() {
            // Disconnected: handle the reached component and the rest separately.
            let reached = self.stamp + 1;
            let rest: Vec<usize> = nodes.iter().copied().filter(|&v| self.mark[v] != reached).collect();
            self.split(order);
            self.split(rest);
            return;
        }
        let depth = self.level[*order.last().unwrap()];
        if depth < 2 {
            self.perm.extend(order);
            return;
        }
        let mid = depth / 2;
        let (mut part_a, mut part_b, mut sep) = (Vec::new(), Vec::new(), Vec::new());
        for &v in &order {
            let l = self.level[v];
            if l < mid {
                part_a.push(v);
            } else if l > mid {
                part_b.push(v);
            } else {
                // Middle-level nodes not adjacent to the far side join the near side.
                let (cols, _) = self.a.row(v);
                if cols.iter().any(|&u| self.level[u] == mid + 1 && self.mark[u] == self.stamp + 1) {
                    sep.push(v);
                } else {
                    part_a.push(v);
                }
            }
        }
        self.split(part_a);
        self.split(part_b);
        self.perm.extend(sep);
    }
}

const NONE: usize = usize::MAX;

/// Sparse Cholesky factor `P A Pᵀ = L Lᵀ`, column-compressed.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Elimination tree of the symmetric matrix `c`.
fn etree(c: &CsrMatrix) -> Vec<usize> {
    let n = c.nrows();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        let (cols, _) = c.row(k);
        for &j in cols.iter().take_while(|&&j| j < k) {
            let mut i = j;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of L (excluding the diagonal) in topological
/// order, written to `stack[top..]`; returns `top`.
fn ereach(
    c: &CsrMatrix,
    k: usize,
    parent: &[usize],
    mark: &mut [usize],
    path: &mut Vec<usize>,
    stack: &mut [usize],
) -> usize {
    let n = c.nrows();
    let mut top = n;
    mark[k] = k;
    let (cols, _) = c.row(k);
    for &j in cols.iter().take_while(|&&j| j < k) {
        let mut i = j;
        path.clear();
        while mark[i] != k {
            path.push(i);
            mark[i] = k;
            i = parent[i];
        }
        while let Some(v) = path.pop() {
            top -= 1;
            stack[top] = v;
        }
    }
    top
}

impl Cholesky {
    /// Factors a symmetric positive definite matrix. Both triangles must be stored.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let perm = nested_dissection(a);
        Self::factor_with(a, perm)
    }

    pub fn factor_with(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        let c = a.permute(&perm);
        let parent = etree(&c);
        let mut mark = vec![NONE; n];
        let mut path = Vec::new();
        let mut stack = vec![0; n];

        // Column counts from the row patterns.
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut mark, &mut path, &mut stack);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        for k in 0..n {
            col_ptr.push(col_ptr[k] + counts[k]);
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = col_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        mark.fill(NONE);

        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut mark, &mut path, &mut stack);
            let (cols, vals) = c.row(k);
            let mut diag = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                if j < k {
                    x[j] = v;
                } else if j == k {
                    diag = v;
                }
            }
            let mut d = diag;
            for &i in &stack[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..next[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                row_idx[p] = k;
                values[p] = lki;
            }
            if !(d > 1e-14 * diag.abs()) || d <= 0.0 {
                return Err(Error::Factorization {
                    pivot: k,
                    cell: perm[k],
                    value: d,
                });
            }
            let p = next[k];
            next[k] += 1;
            row_idx[p] = k;
            values[p] = d.sqrt();
        }
        Ok(Cholesky {
            n,
            perm,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Number of stored entries of L, diagonal included.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..n {
            let (s, e) = (self.col_ptr[j], self.col_ptr[j + 1]);
            y[j] /= self.values[s];
            let yj = y[j];
            for p in s + 1..e {
                y[self.row_idx[p]] -= self.values[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let (s, e) = (self.col_ptr[j], self.col_ptr[j + 1]);
            let mut t = y[j];
            for p in s + 1..e {
                t -= self.values[p] * y[self.row_idx[p]];
            }
            y[j] = t / self.values[s];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
