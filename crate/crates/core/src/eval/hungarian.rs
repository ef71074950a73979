//! Rectangular linear assignment with deterministic tie-breaking.

/// Optimal assignment of `min(rows, cols)` pairs on a row-major cost matrix.
///
/// With `maximize` the total is maximized instead. Among optimal matchings
/// the lexicographically smallest list of `(row, col)` pairs is returned,
/// sorted by row.
///
/// # Panics
///
/// Panics if `cost.len() != rows * cols` or any cost is not finite.
pub fn hungarian(cost: &[f64], rows: usize, cols: usize, maximize: bool) -> Vec<(usize, usize)> {
    assert_eq!(cost.len(), rows * cols, "cost matrix must be rows x cols");
    assert!(cost.iter().all(|c| c.is_finite()), "costs must be finite");
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let cost: Vec<f64> = if maximize { cost.iter().map(|c| -c).collect() } else { cost.to_vec() };
    let at = |r: usize, c: usize| cost[r * cols + c];

    let all_rows: Vec<usize> = (0..rows).collect();
    let all_cols: Vec<usize> = (0..cols).collect();
    let optimum = solve(&cost, cols, &all_rows, &all_cols);
    let tol = 1e-9 * (1.0 + cost.iter().map(|c| c.abs()).sum::<f64>());
    let target = rows.min(cols);

    // fix pairs row by row, each time taking the smallest column that still admits an optimum
    let mut pairs = Vec::with_capacity(target);
    let mut fixed = 0.0;
    let mut free_cols = all_cols;
    for r in 0..rows {
        if pairs.len() == target {
            break;
        }
        let needed = target - pairs.len() - 1;
        let rest_rows: Vec<usize> = (r + 1..rows).collect();
        let mut chosen = None;
        for (slot, &c) in free_cols.iter().enumerate() {
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&x| x != c).collect();
            if rest_rows.len().min(rest_cols.len()) < needed {
                continue;
            }
            let total = fixed + at(r, c) + solve(&cost, cols, &rest_rows, &rest_cols);
            if total <= optimum + tol {
                chosen = Some(slot);
                break;
            }
        }
        if let Some(slot) = chosen {
            let c = free_cols.remove(slot);
            fixed += at(r, c);
            pairs.push((r, c));
        }
    }
    pairs
}

/// Minimum total cost of assigning `min(|rows|, |cols|)` pairs within the
/// given sub-matrix.
fn solve(cost: &[f64], stride: usize, rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    if rows.len() <= cols.len() {
        potentials(rows.len(), cols.len(), |i, j| cost[rows[i] * stride + cols[j]])
    } else {
        potentials(cols.len(), rows.len(), |i, j| cost[rows[j] * stride + cols[i]])
    }
}

/// Shortest augmenting path with dual potentials for `n <= m`; returns the
/// optimal total.
fn potentials(n: usize, m: usize, a: impl Fn(usize, usize) -> f64) -> f64 {
    // 1-based arrays with column 0 as the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m).filter(|&j| owner[j] != 0).map(|j| a(owner[j] - 1, j - 1)).sum()
}
