//! Dense symmetric eigensolver for the low end of the spectrum.
//!
//! The matrix is reduced to tridiagonal form with Householder reflections,
//! the tridiagonal eigenvalues are found with implicit QL (Wilkinson shift),
//! and only the requested eigenvectors are computed, by inverse iteration on
//! the tridiagonal with reorthogonalization inside eigenvalue clusters, then
//! mapped back through the reflections. Cost is dominated by the reduction,
//! about `4/3 n^3` flops.

use crate::error::{Error, Result};

const EPS: f64 = f64::EPSILON;
const MAX_QL_ITERATIONS: usize = 60;
const MAX_INVERSE_ITERATIONS: usize = 8;

/// Eigenpairs in ascending eigenvalue order; `vectors[i]` has unit norm.
pub(crate) struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Householder reduction `A = Q T Q^T`.
struct Tridiagonal {
    diag: Vec<f64>,
    // off[i] couples i and i + 1; off[n - 1] = 0
    off: Vec<f64>,
    // reflector j acts on indices j+1..n as I - tau v v^T with v[0] = 1
    reflectors: Vec<(f64, Vec<f64>)>,
}

/// The `k` algebraically smallest eigenpairs of the symmetric row-major
/// `n x n` matrix `a`.
pub(crate) fn smallest(n: usize, a: &[f64], k: usize) -> Result<Eigenpairs> {
    debug_assert_eq!(a.len(), n * n);
    assert!(k >= 1 && k <= n);
    let tri = tridiagonalize(n, a);
    let norm = tri
        .diag
        .iter()
        .enumerate()
        .map(|(i, d)| d.abs() + tri.off[i].abs() + if i > 0 { tri.off[i - 1].abs() } else { 0.0 })
        .fold(0.0, f64::max);

    // split into unreduced blocks
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 0..n {
        let last = i + 1 == n
            || tri.off[i].abs() <= EPS * (tri.diag[i].abs() + tri.diag[i + 1].abs())
            || tri.off[i] == 0.0;
        if last {
            blocks.push((start, i + 1));
            start = i + 1;
        }
    }

    // (value, block index)
    let mut spectrum = Vec::with_capacity(n);
    for (b, &(lo, hi)) in blocks.iter().enumerate() {
        let mut d = tri.diag[lo..hi].to_vec();
        let mut e = tri.off[lo..hi].to_vec();
        *e.last_mut().unwrap() = 0.0;
        ql_eigenvalues(&mut d, &mut e).map_err(|it| {
            Error::Numerical(format!(
                "implicit QL exceeded {MAX_QL_ITERATIONS} iterations on eigenvalue {} of block {lo}..{hi} ({it} sweeps total)",
                lo
            ))
        })?;
        spectrum.extend(d.into_iter().map(|v| (v, b)));
    }
    spectrum.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    spectrum.truncate(k);

    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    // per block: previously computed (eigenvalue, shift, local vector)
    let mut done: Vec<Vec<(f64, f64, Vec<f64>)>> = vec![Vec::new(); blocks.len()];
    for &(lambda, b) in &spectrum {
        let (lo, hi) = blocks[b];
        let d = &tri.diag[lo..hi];
        let e = &tri.off[lo..hi - 1];
        let local = inverse_iteration(d, e, lambda, norm, &mut done[b])?;
        let mut full = vec![0.0; n];
        full[lo..hi].copy_from_slice(&local);
        apply_q(&tri.reflectors, &mut full);
        let nrm = full.iter().map(|x| x * x).sum::<f64>().sqrt();
        full.iter_mut().for_each(|x| *x /= nrm);
        values.push(lambda);
        vectors.push(full);
    }
    Ok(Eigenpairs { values, vectors })
}

fn tridiagonalize(n: usize, a: &[f64]) -> Tridiagonal {
    // Only the lower triangle of `m` is referenced and updated.
    let mut m = a.to_vec();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![0.0; n];

    for j in 0..n.saturating_sub(1) {
        diag[j] = m[j * n + j];
        let len = n - j - 1;
        let mut v: Vec<f64> = (j + 1..n).map(|i| m[i * n + j]).collect();
        let alpha = v[0];
        let tail = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if tail == 0.0 {
            off[j] = alpha;
            continue;
        }
        // signum(+0.0) is 1, so alpha = 0 still gets a nonzero denominator below
        let beta = -alpha.signum() * alpha.hypot(tail);
        let tau = (beta - alpha) / beta;
        let scale = 1.0 / (alpha - beta);
        v[0] = 1.0;
        v[1..].iter_mut().for_each(|x| *x *= scale);
        off[j] = beta;

        // p = tau * A22 v, A22 symmetric from its lower triangle
        let p = &mut p[..len];
        p.fill(0.0);
        for r in 0..len {
            let row = &m[(j + 1 + r) * n + j + 1..(j + 1 + r) * n + j + 1 + r + 1];
            let (below, d) = row.split_at(r);
            let mut acc = d[0] * v[r];
            let vr = v[r];
            for ((pc, &arc), &vc) in p[..r].iter_mut().zip(below).zip(&v[..r]) {
                acc += arc * vc;
                *pc += arc * vr;
            }
            p[r] += acc;
        }
        p.iter_mut().for_each(|x| *x *= tau);
        // w = p - (tau / 2) (p . v) v
        let k = 0.5 * tau * p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        p.iter_mut().zip(&v).for_each(|(x, vi)| *x -= k * vi);
        // A22 -= v w^T + w v^T
        for r in 0..len {
            let (vr, wr) = (v[r], p[r]);
            let row = &mut m[(j + 1 + r) * n + j + 1..(j + 1 + r) * n + j + 1 + r + 1];
            for ((x, &vc), &wc) in row.iter_mut().zip(&v[..=r]).zip(&p[..=r]) {
                *x -= vr * wc + wr * vc;
            }
        }
        reflectors.push((j, tau, v));
    }
    if n > 0 {
        diag[n - 1] = m[(n - 1) * n + n - 1];
    }
    off[n - 1] = 0.0;
    let reflectors = reflectors.into_iter().map(|(_, tau, v)| (tau, v)).collect();
    Tridiagonal { diag, off, reflectors }
}

/// Applies `Q = H_0 H_1 ... H_{n-2}` to `x` in place.
fn apply_q(reflectors: &[(f64, Vec<f64>)], x: &mut [f64]) {
    let n = x.len();
    for (tau, v) in reflectors.iter().rev() {
        if *tau == 0.0 {
            continue;
        }
        let j = n - v.len();
        let seg = &mut x[j..];
        let s = tau * seg.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        seg.iter_mut().zip(v).for_each(|(a, b)| *a -= s * b);
    }
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal given by
/// `d` and `e` (`e[i]` couples `i` and `i + 1`, last entry ignored).
/// On success `d` holds the eigenvalues in ascending order.
fn ql_eigenvalues(d: &mut [f64], e: &mut [f64]) -> std::result::Result<(), usize> {
    let n = d.len();
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let mut total = 0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > EPS * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                total += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(total);
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= EPS * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    d.sort_by(f64::total_cmp);
    Ok(())
}

/// Eigenvector of the unreduced tridiagonal block (`d`, `e`) for `lambda`.
fn inverse_iteration(
    d: &[f64],
    e: &[f64],
    lambda: f64,
    norm: f64,
    done: &mut Vec<(f64, f64, Vec<f64>)>,
) -> Result<Vec<f64>> {
    let m = d.len();
    if m == 1 {
        done.push((lambda, lambda, vec![1.0]));
        return Ok(vec![1.0]);
    }
    let onenorm = norm.max(f64::MIN_POSITIVE);
    let ortol = 1e-3 * onenorm;
    let pert = 10.0 * EPS * onenorm;

    // members of the current cluster: earlier vectors with close eigenvalues
    let cluster: Vec<usize> = {
        let mut idx = Vec::new();
        let mut edge = lambda;
        for (i, (v, _, _)) in done.iter().enumerate().rev() {
            if edge - v <= ortol {
                idx.push(i);
                edge = *v;
            } else {
                break;
            }
        }
        idx
    };
    let mut shift = lambda;
    if let Some(&last) = cluster.first() {
        let prev_shift = done[last].1;
        if shift - prev_shift < pert {
            shift = prev_shift + pert;
        }
    }

    let lu = TridiagonalLu::factor(d, e, shift, EPS * onenorm);
    let mut x: Vec<f64> = (0..m).map(|i| start_value(i, done.len())).collect();
    let tol = 1e2 * (m as f64).sqrt() * EPS * onenorm;
    let mut residual = f64::INFINITY;
    for iter in 0..MAX_INVERSE_ITERATIONS {
        lu.solve(&mut x);
        for _ in 0..2 {
            for &c in &cluster {
                let q = &done[c].2;
                let s: f64 = x.iter().zip(q).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(q).for_each(|(a, b)| *a -= s * b);
            }
        }
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::Numerical(format!(
                "inverse iteration collapsed for eigenvalue {lambda:e} (iteration {iter})"
            )));
        }
        x.iter_mut().for_each(|v| *v /= nrm);
        residual = (0..m)
            .map(|i| {
                let mut r = (d[i] - lambda) * x[i];
                if i > 0 {
                    r += e[i - 1] * x[i - 1];
                }
                if i + 1 < m {
                    r += e[i] * x[i + 1];
                }
                r.abs()
            })
            .fold(0.0, f64::max);
        if iter >= 1 && residual <= tol {
            done.push((lambda, shift, x.clone()));
            return Ok(x);
        }
    }
    if residual <= 1e-10 * onenorm {
        done.push((lambda, shift, x.clone()));
        return Ok(x);
    }
    Err(Error::Numerical(format!(
        "inverse iteration for eigenvalue {lambda:e} stalled after {MAX_INVERSE_ITERATIONS} iterations (residual {residual:e}, tolerance {tol:e})"
    )))
}

// Deterministic start vector in [-0.5, 0.5), decorrelated across columns.
fn start_value(i: usize, column: usize) -> f64 {
    let mut z = (i as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((column as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

/// LU factorization with partial pivoting of `T - shift I`.
struct TridiagonalLu {
    dl: Vec<f64>,
    dd: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(d: &[f64], e: &[f64], shift: f64, tiny: f64) -> Self {
        let n = d.len();
        let mut dl = e.to_vec();
        let mut du = e.to_vec();
        let mut dd: Vec<f64> = d.iter().map(|x| x - shift).collect();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if dd[i].abs() >= dl[i].abs() {
                if dd[i] != 0.0 {
                    let fact = dl[i] / dd[i];
                    dl[i] = fact;
                    dd[i + 1] -= fact * du[i];
                }
            } else {
                let fact = dd[i] / dl[i];
                dd[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = dd[i + 1];
                dd[i + 1] = temp - fact * dd[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        let tiny = tiny.max(f64::MIN_POSITIVE);
        for x in dd.iter_mut() {
            if x.abs() < tiny {
                *x = if *x < 0.0 { -tiny } else { tiny };
            }
        }
        Self { dl, dd, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.dl[i] * b[i];
        }
        b[n - 1] /= self.dd[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.dd[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.dd[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(n: usize, a: &[f64], lambda: f64, v: &[f64]) -> f64 {
        (0..n)
            .map(|i| {
                let av: f64 = (0..n).map(|j| a[i * n + j] * v[j]).sum();
                (av - lambda * v[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_matrix() {
        let a = [3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        let ep = smallest(3, &a, 3).unwrap();
        assert_eq!(ep.values, vec![-1.0, 2.0, 3.0]);
        assert_eq!(ep.vectors[0].iter().map(|x| x.abs()).collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_by_two() {
        let a = [2.0, 1.0, 1.0, 2.0];
        let ep = smallest(2, &a, 2).unwrap();
        assert!((ep.values[0] - 1.0).abs() < 1e-14);
        assert!((ep.values[1] - 3.0).abs() < 1e-14);
        for (l, v) in ep.values.iter().zip(&ep.vectors) {
            assert!(residual(2, &a, *l, v) < 1e-14);
        }
    }

    #[test]
    fn tridiagonal_reduction_preserves_spectrum_of_path() {
        // path graph P5 Laplacian: eigenvalues 2 - 2 cos(k pi / 5)
        let n = 5;
        let mut a = vec![0.0; n * n];
        for i in 0..n - 1 {
            a[i * n + i + 1] = -1.0;
            a[(i + 1) * n + i] = -1.0;
            a[i * n + i] += 1.0;
            a[(i + 1) * n + i + 1] += 1.0;
        }
        let ep = smallest(n, &a, n).unwrap();
        for (k, l) in ep.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / n as f64).cos();
            assert!((l - exact).abs() < 1e-13, "{k}: {l} vs {exact}");
        }
    }

    #[test]
    fn repeated_eigenvalues_stay_orthogonal() {
        // identity plus rank-one: eigenvalue 1 with multiplicity n - 1
        let n = 6;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = if i == j { 2.0 } else { 1.0 };
            }
        }
        let ep = smallest(n, &a, n).unwrap();
        for i in 0..n {
            assert!(residual(n, &a, ep.values[i], &ep.vectors[i]) < 1e-12);
            for j in 0..i {
                let d: f64 = ep.vectors[i].iter().zip(&ep.vectors[j]).map(|(a, b)| a * b).sum();
                assert!(d.abs() < 1e-12, "{i},{j}: {d}");
            }
        }
        assert!((ep.values[n - 1] - (n as f64 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn lu_solves_shifted_system() {
        let d = [4.0, 5.0, 6.0, 7.0];
        let e = [1.0, -2.0, 0.5];
        let lu = TridiagonalLu::factor(&d, &e, 4.5, 1e-300);
        let x = [1.0, -1.0, 2.0, 0.25];
        let mut b = vec![0.0; 4];
        for i in 0..4 {
            b[i] = (d[i] - 4.5) * x[i];
            if i > 0 {
                b[i] += e[i - 1] * x[i - 1];
            }
            if i < 3 {
                b[i] += e[i] * x[i + 1];
            }
        }
        lu.solve(&mut b);
        for (got, want) in b.iter().zip(x) {
            assert!((got - want).abs() < 1e-13);
        }
    }
}
