use super::{minimum_degree, SparseMatrix};
use crate::error::{Error, Result};
use crate::tol::PIVOT_THRESHOLD;

/// A pivot smaller than this fraction of its original column's largest
/// entry is reported as numerical singularity.
const SINGULAR_PIVOT: f64 = 1e-14;

/// `P A Q = L U` with `L` unit lower triangular and `U` upper triangular.
#[derive(Debug, Clone)]
pub struct LuFactors {
    l: SparseMatrix,
    u: SparseMatrix,
    /// `row_perm[k]`: original row chosen as the k-th pivot.
    row_perm: Vec<usize>,
    /// `col_perm[k]`: original column eliminated k-th.
    col_perm: Vec<usize>,
}

impl LuFactors {
    pub fn n(&self) -> usize {
        self.row_perm.len()
    }

    pub fn l(&self) -> &SparseMatrix {
        &self.l
    }

    pub fn u(&self) -> &SparseMatrix {
        &self.u
    }

    pub fn row_perm(&self) -> &[usize] {
        &self.row_perm
    }

    pub fn col_perm(&self) -> &[usize] {
        &self.col_perm
    }

    /// Solves `A x = b` by forward and backward substitution.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut y: Vec<f64> = self.row_perm.iter().map(|&i| b[i]).collect();
        // L has its unit diagonal stored first in every column.
        for j in 0..n {
            let yj = y[j];
            if yj == 0.0 {
                continue;
            }
            let (rows, vals) = self.l.col(j);
            for (&i, &v) in rows.iter().zip(vals).skip(1) {
                y[i] -= v * yj;
            }
        }
        // U has its diagonal stored last in every column.
        for j in (0..n).rev() {
            let (rows, vals) = self.u.col(j);
            let last = rows.len() - 1;
            y[j] /= vals[last];
            let yj = y[j];
            if yj == 0.0 {
                continue;
            }
            for (&i, &v) in rows[..last].iter().zip(&vals[..last]) {
                y[i] -= v * yj;
            }
        }
        let mut x = vec![0.0; n];
        for (k, &j) in self.col_perm.iter().enumerate() {
            x[j] = y[k];
        }
        Ok(x)
    }
}

pub fn lu_solve(f: &LuFactors, b: &[f64]) -> Result<Vec<f64>> {
    f.solve(b)
}

/// Left-looking sparse LU with a minimum-degree column pre-ordering and
/// threshold partial pivoting. Singularity is reported with the original
/// index of the column that failed to produce a pivot.
pub fn sparse_lu(a: &SparseMatrix) -> Result<LuFactors> {
    let n = a.ncols();
    if a.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.nrows(),
        });
    }
    if a.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let q = minimum_degree(a);

    let mut pinv: Vec<Option<usize>> = vec![None; n];
    let mut row_perm = vec![0usize; n];
    // L columns hold original row indices until the final renumbering.
    let mut l_ptr = vec![0usize; n + 1];
    let mut l_rows = Vec::with_capacity(a.nnz() * 2);
    let mut l_vals = Vec::with_capacity(a.nnz() * 2);
    let mut u_ptr = vec![0usize; n + 1];
    let mut u_rows = Vec::with_capacity(a.nnz() * 2);
    let mut u_vals = Vec::with_capacity(a.nnz() * 2);

    let mut x = vec![0.0f64; n];
    let mut mark = vec![usize::MAX; n];
    let mut topo: Vec<usize> = Vec::with_capacity(n);
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for (k, &col) in q.iter().enumerate() {
        let (a_rows, a_vals) = a.col(col);
        let col_max = a_vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        // Reach of A(:,col) in the graph of L, in reverse topological order.
        topo.clear();
        for &start in a_rows {
            if mark[start] == k {
                continue;
            }
            mark[start] = k;
            stack.push((start, 0));
            while let Some(top) = stack.last_mut() {
                let node = top.0;
                let children: &[usize] = match pinv[node] {
                    Some(kk) => &l_rows[l_ptr[kk] + 1..l_ptr[kk + 1]],
                    None => &[],
                };
                if let Some(&child) = children.get(top.1) {
                    top.1 += 1;
                    if mark[child] != k {
                        mark[child] = k;
                        stack.push((child, 0));
                    }
                } else {
                    topo.push(node);
                    stack.pop();
                }
            }
        }

        for (&i, &v) in a_rows.iter().zip(a_vals) {
            x[i] = v;
        }
        for &i in topo.iter().rev() {
            if let Some(kk) = pinv[i] {
                let xi = x[i];
                if xi != 0.0 {
                    let r = l_ptr[kk] + 1..l_ptr[kk + 1];
                    for (&row, &lv) in l_rows[r.clone()].iter().zip(&l_vals[r]) {
                        x[row] -= lv * xi;
                    }
                }
            }
        }

        let mut pivot_row = None;
        let mut amax = -1.0f64;
        for &i in &topo {
            match pinv[i] {
                Some(kk) => {
                    u_rows.push(kk);
                    u_vals.push(x[i]);
                }
                None => {
                    if x[i].abs() > amax {
                        amax = x[i].abs();
                        pivot_row = Some(i);
                    }
                }
            }
        }
        let singular = match pivot_row {
            None => true,
            Some(_) => !(amax > SINGULAR_PIVOT * col_max) || !amax.is_finite(),
        };
        if singular {
            return Err(Error::Singular { column: col });
        }
        let mut ipiv = pivot_row.unwrap();
        if pinv[col].is_none() && mark[col] == k && x[col].abs() >= PIVOT_THRESHOLD * amax {
            ipiv = col;
        }
        let pivot = x[ipiv];
        u_rows.push(k);
        u_vals.push(pivot);
        u_ptr[k + 1] = u_rows.len();

        pinv[ipiv] = Some(k);
        row_perm[k] = ipiv;
        l_rows.push(ipiv);
        l_vals.push(1.0);
        for &i in &topo {
            if pinv[i].is_none() {
                l_rows.push(i);
                l_vals.push(x[i] / pivot);
            }
            x[i] = 0.0;
        }
        l_ptr[k + 1] = l_rows.len();
    }

    // Renumber L rows into pivot order and sort both factors' columns.
    for r in &mut l_rows {
        *r = pinv[*r].expect("all rows pivoted");
    }
    sort_columns(&l_ptr, &mut l_rows, &mut l_vals);
    sort_columns(&u_ptr, &mut u_rows, &mut u_vals);

    Ok(LuFactors {
        l: SparseMatrix::from_csc(n, n, l_ptr, l_rows, l_vals)?,
        u: SparseMatrix::from_csc(n, n, u_ptr, u_rows, u_vals)?,
        row_perm,
        col_perm: q,
    })
}

fn sort_columns(ptr: &[usize], rows: &mut [usize], vals: &mut [f64]) {
    let mut buf: Vec<(usize, f64)> = Vec::new();
    for w in ptr.windows(2) {
        let r = w[0]..w[1];
        buf.clear();
        buf.extend(rows[r.clone()].iter().copied().zip(vals[r.clone()].iter().copied()));
        buf.sort_unstable_by_key(|e| e.0);
        for (k, (i, v)) in buf.iter().enumerate() {
            rows[w[0] + k] = *i;
            vals[w[0] + k] = *v;
        }
    }
}
