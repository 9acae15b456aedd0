use std::collections::BTreeSet;

use super::SparseMatrix;

/// Minimum-degree ordering on the pattern of `A + A^T`, simulated on the
/// explicit elimination graph. Ties go to the lowest index so the result is
/// deterministic. Returns `perm` with `perm[k]` = column eliminated k-th.
pub fn minimum_degree(a: &SparseMatrix) -> Vec<usize> {
    let n = a.ncols();
    assert_eq!(a.nrows(), n, "ordering needs a square matrix");
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }

    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut eliminated = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut merged = Vec::new();

    while let Some((_, v)) = queue.pop_first() {
        eliminated[v] = true;
        perm.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &u in &nbrs {
            let old = adj[u].len();
            // adj[u] <- (adj[u] ∪ nbrs) \ {u, v}, kept sorted.
            merged.clear();
            let (mut p, mut q) = (0, 0);
            let au = &adj[u];
            while p < au.len() || q < nbrs.len() {
                let next = match (au.get(p), nbrs.get(q)) {
                    (Some(&x), Some(&y)) if x == y => {
                        p += 1;
                        q += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        p += 1;
                        x
                    }
                    (Some(_), Some(&y)) => {
                        q += 1;
                        y
                    }
                    (Some(&x), None) => {
                        p += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        q += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != u && next != v && !eliminated[next] {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            if adj[u].len() != old {
                queue.remove(&(old, u));
                queue.insert((adj[u].len(), u));
            }
        }
    }
    perm
}
