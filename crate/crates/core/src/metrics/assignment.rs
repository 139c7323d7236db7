//! Maximum-weight injective assignment between GT rows and prediction
//! columns.

use std::collections::BTreeSet;

/// Tolerance under which two assignment totals count as tied.
pub const TIE_EPS: f64 = 1e-12;

/// Shortest augmenting path Hungarian method; minimizes `cost` over
/// assignments of every row to a distinct column. Requires `rows <= cols`.
fn hungarian_min(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let n = cost.len();
    let m = cols;
    debug_assert!(n <= m);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Optimal total weight on the sub-problem `rows x cols`; absent edges
/// weigh zero.
fn best_total(weight: &dyn Fn(usize, usize) -> f64, rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    let (outer, inner, transposed) = if rows.len() <= cols.len() {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    let cost: Vec<Vec<f64>> = outer
        .iter()
        .map(|&a| {
            inner
                .iter()
                .map(|&b| -(if transposed { weight(b, a) } else { weight(a, b) }))
                .collect()
        })
        .collect();
    let assign = hungarian_min(&cost, inner.len());
    // sum in row order so equal assignments give equal totals bit for bit
    let mut pairs: Vec<(usize, usize)> = assign
        .iter()
        .enumerate()
        .map(|(k, &j)| if transposed { (inner[j], outer[k]) } else { (outer[k], inner[j]) })
        .collect();
    pairs.sort_unstable();
    pairs.iter().map(|&(r, c)| weight(r, c)).sum()
}

/// Sum of matched weights, accumulated in row order.
pub fn total_weight(weights: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| weights[r][c]))
        .sum()
}

/// Maximum-weight matching over the sparse edge list `(row, col, w)`.
///
/// Edges with `w <= floor` are ignored, so no pair at or below the floor is
/// ever matched. Ties between optimal matchings are broken row by row: each
/// row takes the heaviest edge that still completes to an optimum, equal
/// weights going to the lower column, and stays unmatched only if no edge
/// does. The per-row weights therefore do not depend on column numbering.
pub fn match_sparse(n_rows: usize, n_cols: usize, edges: &[(usize, usize, f64)], floor: f64) -> Vec<Option<usize>> {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
    let mut col_adj: Vec<Vec<usize>> = vec![Vec::new(); n_cols];
    for &(r, c, w) in edges {
        if w > floor {
            adj[r].push((c, w));
            col_adj[c].push(r);
        }
    }
    for a in &mut adj {
        a.sort_by_key(|e| e.0);
        a.dedup_by_key(|e| e.0);
    }
    let by_preference: Vec<Vec<(usize, f64)>> = adj
        .iter()
        .map(|a| {
            let mut p = a.clone();
            p.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            p
        })
        .collect();

    let mut result = vec![None; n_rows];
    let mut seen_row = vec![false; n_rows];
    for start in 0..n_rows {
        if seen_row[start] || adj[start].is_empty() {
            continue;
        }
        // connected component of the bipartite edge graph
        let mut rows = BTreeSet::new();
        let mut cols = BTreeSet::new();
        let mut stack = vec![start];
        seen_row[start] = true;
        while let Some(r) = stack.pop() {
            rows.insert(r);
            for &(c, _) in &adj[r] {
                if cols.insert(c) {
                    for &r2 in &col_adj[c] {
                        if !seen_row[r2] {
                            seen_row[r2] = true;
                            stack.push(r2);
                        }
                    }
                }
            }
        }
        let rows: Vec<usize> = rows.into_iter().collect();
        let mut free_cols: Vec<usize> = cols.into_iter().collect();
        let weight = |r: usize, c: usize| -> f64 {
            adj[r]
                .binary_search_by_key(&c, |e| e.0)
                .map(|k| adj[r][k].1)
                .unwrap_or(0.0)
        };
        let best = best_total(&weight, &rows, &free_cols);
        let tol = TIE_EPS * rows.len().max(1) as f64;
        let mut fixed = 0.0;
        for (k, &r) in rows.iter().enumerate() {
            let rest = &rows[k + 1..];
            let mut chosen = None;
            for &(c, w) in &by_preference[r] {
                if !free_cols.contains(&c) {
                    continue;
                }
                let others: Vec<usize> = free_cols.iter().copied().filter(|&x| x != c).collect();
                if fixed + w + best_total(&weight, rest, &others) >= best - tol {
                    chosen = Some((c, w));
                    break;
                }
            }
            if let Some((c, w)) = chosen {
                fixed += w;
                free_cols.retain(|&x| x != c);
                result[r] = Some(c);
            }
        }
    }
    result
}

/// Dense front end: `weights[gt][pred]`, zero meaning no overlap.
pub fn injective_match(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n_cols = weights.first().map_or(0, Vec::len);
    let edges: Vec<(usize, usize, f64)> = weights
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &w)| (r, c, w)))
        .collect();
    match_sparse(weights.len(), n_cols, &edges, 0.0)
}
