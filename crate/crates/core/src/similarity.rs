//! Pixel-pair similarity kernels and dense affinity construction.
//!
//! Every kernel returns a nonnegative similarity. Distance-like kernels `d`
//! are turned into similarities as `1 / (1 + d)`; cosine and correlation
//! first become dissimilarities as `1 - value`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, LabelMask};

/// The closed set of similarity kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Dot,
    Cosine,
    Correlation,
    L1,
    L2,
    Chebyshev,
    BrayCurtis,
    Mahalanobis,
    Boc,
}

impl MetricKind {
    pub const ALL: [MetricKind; 9] = [
        MetricKind::Dot,
        MetricKind::Cosine,
        MetricKind::Correlation,
        MetricKind::L1,
        MetricKind::L2,
        MetricKind::Chebyshev,
        MetricKind::BrayCurtis,
        MetricKind::Mahalanobis,
        MetricKind::Boc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Dot => "dot",
            MetricKind::Cosine => "cosine",
            MetricKind::Correlation => "correlation",
            MetricKind::L1 => "l1",
            MetricKind::L2 => "l2",
            MetricKind::Chebyshev => "chebyshev",
            MetricKind::BrayCurtis => "braycurtis",
            MetricKind::Mahalanobis => "mahalanobis",
            MetricKind::Boc => "boc",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .or(match lower.as_str() {
                "bray-curtis" | "bray_curtis" => Some(MetricKind::BrayCurtis),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

/// Dense symmetric similarity matrix over `n` graph nodes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl AffinityMatrix {
    /// Validates symmetry, nonnegativity and finiteness.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Dimension(format!("{} values cannot fill {n}x{n}", values.len())));
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidValue(format!("affinity ({i},{j}) = {v}")));
                }
                if (v - values[j * n + i]).abs() > 1e-12 {
                    return Err(Error::InvalidValue(format!("affinity not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Multiplies every weight by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self { n: self.n, values: self.values.iter().map(|v| v * alpha).collect() }
    }
}

/// Bray-Curtis dissimilarity and similarity. A pair of all-zero vectors has
/// dissimilarity 0.
pub fn bray_curtis(u: &[f64], t: &[f64]) -> Result<(f64, f64)> {
    check_len(u, t)?;
    let d = bc_diss(u, t);
    Ok((d, 1.0 / (1.0 + d)))
}

/// Chebyshev (max-abs) distance and its reversed similarity.
pub fn chebyshev(u: &[f64], t: &[f64]) -> Result<(f64, f64)> {
    check_len(u, t)?;
    let d = ch_diss(u, t);
    Ok((d, 1.0 / (1.0 + d)))
}

/// Bray-Curtis similarity divided by Chebyshev similarity.
pub fn boc(u: &[f64], t: &[f64]) -> Result<f64> {
    check_len(u, t)?;
    Ok(boc_kernel(u, t))
}

#[inline]
fn bc_diss(u: &[f64], t: &[f64]) -> f64 {
    let (num, den) = u
        .iter()
        .zip(t)
        .fold((0.0, 0.0), |(n, d), (a, b)| (n + (a - b).abs(), d + (a + b).abs()));
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[inline]
fn ch_diss(u: &[f64], t: &[f64]) -> f64 {
    u.iter().zip(t).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
}

#[inline]
fn boc_kernel(u: &[f64], t: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut ch: f64 = 0.0;
    for (a, b) in u.iter().zip(t) {
        let diff = (a - b).abs();
        num += diff;
        den += (a + b).abs();
        ch = ch.max(diff);
    }
    let bc = if den == 0.0 { 0.0 } else { num / den };
    (1.0 + ch) / (1.0 + bc)
}

#[inline]
fn dot(u: &[f64], t: &[f64]) -> f64 {
    u.iter().zip(t).map(|(a, b)| a * b).sum()
}

fn cosine(u: &[f64], t: &[f64]) -> f64 {
    let nu = dot(u, u).sqrt();
    let nt = dot(t, t).sqrt();
    if nu == 0.0 || nt == 0.0 {
        return 0.0;
    }
    (dot(u, t) / (nu * nt)).clamp(-1.0, 1.0)
}

fn pearson(u: &[f64], t: &[f64]) -> f64 {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mt = t.iter().sum::<f64>() / n;
    let (mut cov, mut vu, mut vt) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(t) {
        let (da, db) = (a - mu, b - mt);
        cov += da * db;
        vu += da * da;
        vt += db * db;
    }
    if vu == 0.0 || vt == 0.0 {
        return 0.0;
    }
    (cov / (vu * vt).sqrt()).clamp(-1.0, 1.0)
}

/// Channel covariance of a feature tensor with a trace-scaled ridge, kept
/// as its Cholesky factor for Mahalanobis distances.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceContext {
    dim: usize,
    ridge: f64,
    // lower-triangular factor of (cov + ridge * I), row-major dim x dim
    chol: Vec<f64>,
}

impl CovarianceContext {
    /// Builds the context from an explicit covariance matrix.
    pub fn from_covariance(dim: usize, cov: &[f64]) -> Result<Self> {
        if cov.len() != dim * dim || dim == 0 {
            return Err(Error::Dimension(format!("covariance must be {dim}x{dim}")));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite covariance".into()));
        }
        let trace: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
        let mut ridge = 1e-6 * trace / dim as f64;
        if ridge <= 0.0 {
            // all-constant features: any positive ridge gives the same (zero) distances
            ridge = 1e-6;
        }
        let mut a = cov.to_vec();
        for i in 0..dim {
            a[i * dim + i] += ridge;
        }
        let chol = cholesky(dim, &a)?;
        Ok(Self { dim, ridge, chol })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Solves `L z = x` so that `|z|^2 = x^T (cov + ridge I)^-1 x`.
    pub fn whiten(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut z = vec![0.0; n];
        for i in 0..n {
            let row = &self.chol[i * n..i * n + i];
            let s: f64 = row.iter().zip(&z).map(|(l, zj)| l * zj).sum();
            z[i] = (x[i] - s) / self.chol[i * n + i];
        }
        z
    }

    pub fn distance(&self, u: &[f64], t: &[f64]) -> f64 {
        let diff: Vec<f64> = u.iter().zip(t).map(|(a, b)| a - b).collect();
        self.whiten(&diff).iter().map(|z| z * z).sum::<f64>().sqrt()
    }
}

fn cholesky(n: usize, a: &[f64]) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return Err(Error::Numerical(format!(
                        "regularized covariance not positive definite at pivot {i} ({d})"
                    )));
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Population channel covariance of `fm` over all pixels.
pub fn covariance_context(fm: &FeatureMap) -> Result<CovarianceContext> {
    let p = fm.pixels();
    if p < 2 {
        return Err(Error::Dimension("covariance needs at least 2 pixels".into()));
    }
    let c = fm.channels();
    let mut mean = vec![0.0; c];
    for i in 0..p {
        for (m, v) in mean.iter_mut().zip(fm.pixel(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= p as f64);
    let mut cov = vec![0.0; c * c];
    let mut centered = vec![0.0; c];
    for i in 0..p {
        for ((x, v), m) in centered.iter_mut().zip(fm.pixel(i)).zip(&mean) {
            *x = v - m;
        }
        for a in 0..c {
            let xa = centered[a];
            for b in 0..=a {
                cov[a * c + b] += xa * centered[b];
            }
        }
    }
    for a in 0..c {
        for b in 0..=a {
            let v = cov[a * c + b] / p as f64;
            cov[a * c + b] = v;
            cov[b * c + a] = v;
        }
    }
    CovarianceContext::from_covariance(c, &cov)
}

/// Similarity of `u` and `t` under `kind`. `ctx` is required for Mahalanobis.
pub fn metric_sim(kind: MetricKind, u: &[f64], t: &[f64], ctx: Option<&CovarianceContext>) -> Result<f64> {
    check_len(u, t)?;
    if kind == MetricKind::Mahalanobis {
        let ctx = ctx.ok_or_else(|| Error::Config("mahalanobis needs a covariance context".into()))?;
        if ctx.dim() != u.len() {
            return Err(Error::Dimension(format!(
                "covariance is {}-dimensional, vectors have {}",
                ctx.dim(),
                u.len()
            )));
        }
        return Ok(1.0 / (1.0 + ctx.distance(u, t)));
    }
    Ok(kernel(kind, u, t))
}

// Every kind except Mahalanobis.
#[inline]
fn kernel(kind: MetricKind, u: &[f64], t: &[f64]) -> f64 {
    match kind {
        MetricKind::Dot => dot(u, t).max(0.0),
        MetricKind::Cosine => 1.0 / (2.0 - cosine(u, t)),
        MetricKind::Correlation => 1.0 / (2.0 - pearson(u, t)),
        MetricKind::L1 => 1.0 / (1.0 + u.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>()),
        MetricKind::L2 => {
            1.0 / (1.0 + u.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        }
        MetricKind::Chebyshev => 1.0 / (1.0 + ch_diss(u, t)),
        MetricKind::BrayCurtis => 1.0 / (1.0 + bc_diss(u, t)),
        MetricKind::Boc => boc_kernel(u, t),
        MetricKind::Mahalanobis => unreachable!("handled by metric_sim"),
    }
}

/// Affinity over the pixels of `fm` (optionally only where `mask > 0`).
///
/// Nodes are numbered in row-major pixel order; the second return value maps
/// node index to `(row, col)`. Each unordered pair is evaluated once.
pub fn build_affinity(
    fm: &FeatureMap,
    kind: MetricKind,
    mask: Option<&LabelMask>,
) -> Result<(AffinityMatrix, Vec<(usize, usize)>)> {
    let mut nodes = Vec::new();
    if let Some(m) = mask {
        m.check_same_grid(fm.height(), fm.width())?;
    }
    for h in 0..fm.height() {
        for w in 0..fm.width() {
            if mask.is_none_or(|m| m.get(h, w) > 0) {
                nodes.push((h, w));
            }
        }
    }
    let n = nodes.len();
    if n < 2 {
        return Err(Error::DegenerateGraph(n));
    }
    let rows: Vec<&[f64]> = nodes.iter().map(|&(h, w)| fm.pixel(h * fm.width() + w)).collect();

    let mut values = vec![0.0; n * n];
    if kind == MetricKind::Mahalanobis {
        let ctx = covariance_context(fm)?;
        let white: Vec<Vec<f64>> = rows.iter().map(|r| ctx.whiten(r)).collect();
        fill_symmetric(n, &mut values, |i, j| {
            let d = white[i].iter().zip(&white[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            1.0 / (1.0 + d.sqrt())
        });
    } else {
        fill_symmetric(n, &mut values, |i, j| kernel(kind, rows[i], rows[j]));
    }
    Ok((AffinityMatrix { n, values }, nodes))
}

fn fill_symmetric(n: usize, values: &mut [f64], mut f: impl FnMut(usize, usize) -> f64) {
    for i in 0..n {
        for j in i..n {
            let v = f(i, j);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
}

fn check_len(u: &[f64], t: &[f64]) -> Result<()> {
    if u.len() != t.len() || u.is_empty() {
        return Err(Error::Dimension(format!("vector lengths {} and {}", u.len(), t.len())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bray_curtis_examples() {
        assert_eq!(bray_curtis(&[2.0, 3.0], &[2.0, 3.0]).unwrap(), (0.0, 1.0));
        assert_eq!(bray_curtis(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), (1.0, 0.5));
        let (d, s) = bray_curtis(&[1.0, 4.0], &[3.0, 1.0]).unwrap();
        assert!(close(d, 5.0 / 9.0, 1e-15));
        assert!(close(s, 9.0 / 14.0, 1e-15));
        assert!(close(s, 0.6429, 1e-4));
        assert_eq!(bray_curtis(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), (0.0, 1.0));
        assert!(matches!(bray_curtis(&[1.0], &[1.0, 2.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn chebyshev_examples() {
        assert_eq!(chebyshev(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, 1.0));
        assert_eq!(chebyshev(&[1.0, 4.0], &[3.0, 1.0]).unwrap(), (3.0, 0.25));
        assert_eq!(chebyshev(&[4.0, 1.0], &[1.0, 3.0]).unwrap(), (3.0, 0.25));
        assert!(chebyshev(&[], &[]).is_err());
    }

    #[test]
    fn boc_examples() {
        assert_eq!(boc(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        let v = boc(&[1.0, 4.0], &[3.0, 1.0]).unwrap();
        assert!(close(v, (9.0 / 14.0) / 0.25, 1e-14));
        assert!(close(v, 2.5714, 1e-4));
    }

    #[test]
    fn reversed_metric_examples() {
        assert!(close(metric_sim(MetricKind::L2, &[0.0, 3.0], &[4.0, 0.0], None).unwrap(), 1.0 / 6.0, 1e-15));
        assert_eq!(metric_sim(MetricKind::Dot, &[1.0, -2.0], &[2.0, 1.0], None).unwrap(), 0.0);
        assert_eq!(metric_sim(MetricKind::Dot, &[1.0, -2.0], &[-2.0, 1.0], None).unwrap(), 0.0);
        let u = [0.5, -1.0, 2.0];
        for kind in MetricKind::ALL {
            if matches!(kind, MetricKind::Dot | MetricKind::Mahalanobis) {
                continue;
            }
            assert_eq!(metric_sim(kind, &u, &u, None).unwrap(), 1.0, "{kind}");
        }
    }

    #[test]
    fn zero_norm_cosine_and_correlation() {
        assert_eq!(metric_sim(MetricKind::Cosine, &[0.0, 0.0], &[1.0, 2.0], None).unwrap(), 0.5);
        assert_eq!(metric_sim(MetricKind::Correlation, &[1.0, 1.0], &[1.0, 2.0], None).unwrap(), 0.5);
    }

    #[test]
    fn mahalanobis_needs_context() {
        assert!(matches!(
            metric_sim(MetricKind::Mahalanobis, &[1.0], &[2.0], None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn identity_covariance_is_euclidean() {
        let ctx = CovarianceContext::from_covariance(2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        // ridge is 1e-6, so distances shrink by sqrt(1 + 1e-6)
        let d = ctx.distance(&[0.0, 3.0], &[4.0, 0.0]);
        assert!(close(d, 5.0 / (1.0f64 + 1e-6).sqrt(), 1e-12));
        assert!(close(d, 5.0, 1e-5));
        assert_eq!(ctx.distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn duplicated_channel_stays_finite() {
        // channel 1 duplicates channel 0: rank-deficient covariance
        let fm = FeatureMap::from_fn(3, 3, 2, |h, w, _| (h * 3 + w) as f64).unwrap();
        let ctx = covariance_context(&fm).unwrap();
        let d = ctx.distance(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(d.is_finite() && d > 0.0);
        // oracle: explicit inverse of [[s+e, s],[s, s+e]] applied to (1,1)
        let s = 60.0 / 9.0; // population variance of 0..9
        let e = 1e-6 * (2.0 * s) / 2.0;
        let det = (s + e) * (s + e) - s * s;
        let q: f64 = (2.0 * (s + e) - 2.0 * s) / det;
        assert!(close(d, q.sqrt(), 1e-6 * q.sqrt()));
    }

    #[test]
    fn affinity_examples() {
        let same = FeatureMap::new(1, 2, 2, vec![1.0, 2.0, 1.0, 2.0]).unwrap();
        let (w, nodes) = build_affinity(&same, MetricKind::Boc, None).unwrap();
        assert_eq!(w.values(), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(nodes, vec![(0, 0), (0, 1)]);

        let fm = FeatureMap::new(1, 2, 2, vec![1.0, 4.0, 3.0, 1.0]).unwrap();
        let (w, _) = build_affinity(&fm, MetricKind::Chebyshev, None).unwrap();
        assert_eq!(w.get(0, 1), 0.25);
        assert_eq!(w.get(1, 0), 0.25);
    }

    #[test]
    fn masked_affinity() {
        let fm = FeatureMap::from_fn(2, 2, 1, |h, w, _| (h * 2 + w) as f64).unwrap();
        let one = LabelMask::new(2, 2, vec![0, 0, 1, 0]).unwrap();
        assert!(matches!(build_affinity(&fm, MetricKind::L1, Some(&one)), Err(Error::DegenerateGraph(1))));
        let two = LabelMask::new(2, 2, vec![3, 0, 1, 0]).unwrap();
        let (w, nodes) = build_affinity(&fm, MetricKind::L1, Some(&two)).unwrap();
        assert_eq!(nodes, vec![(0, 0), (1, 0)]);
        assert_eq!(w.get(0, 1), 1.0 / 3.0);
        let all = LabelMask::new(2, 2, vec![1; 4]).unwrap();
        assert_eq!(
            build_affinity(&fm, MetricKind::Boc, Some(&all)).unwrap(),
            build_affinity(&fm, MetricKind::Boc, None).unwrap()
        );
    }

    #[test]
    fn parse_names() {
        for k in MetricKind::ALL {
            assert_eq!(k.name().parse::<MetricKind>().unwrap(), k);
        }
        assert_eq!("BOC".parse::<MetricKind>().unwrap(), MetricKind::Boc);
        assert!("hamming".parse::<MetricKind>().is_err());
    }

    #[test]
    fn affinity_matrix_validation() {
        assert!(AffinityMatrix::new(2, vec![1.0, 0.5, 0.5, 1.0]).is_ok());
        assert!(AffinityMatrix::new(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(AffinityMatrix::new(2, vec![1.0, -0.5, -0.5, 1.0]).is_err());
    }
}
