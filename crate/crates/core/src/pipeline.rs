//! End-to-end segmentation: foreground/background from the Fiedler vector,
//! and instances from k-means over low eigensegments of the foreground graph.

use serde::{Deserialize, Serialize};

use crate::channel::{dcr_select, ncr_select, ReductionConfig, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansParams};
use crate::similarity::{build_affinity, MetricKind};
use crate::spectral::{laplacian, smallest_eigenpairs, symmetric_smallest, EigenSegments, Normalization};
use crate::tensor::{FeatureMap, LabelMask};

/// NCR budget used when none is given: a third of the channels.
pub fn default_keep_m(channels: usize) -> usize {
    (channels / 3).max(1)
}

/// DCR budget used when none is given: 60 of every 128 channels kept by NCR.
pub fn default_keep_n(keep_m: usize) -> usize {
    ((keep_m * 60 + 64) / 128).clamp(1, keep_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdRule {
    /// Foreground where the Fiedler entry is positive.
    #[default]
    Zero,
    /// Foreground where the Fiedler entry exceeds its mean.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgBgConfig {
    pub keep_m: usize,
    pub bins: usize,
    pub metric: MetricKind,
    pub normalization: Normalization,
    pub post_process: bool,
    pub threshold: ThresholdRule,
}

impl FgBgConfig {
    pub fn new(keep_m: usize) -> Self {
        Self {
            keep_m,
            bins: DEFAULT_BINS,
            metric: MetricKind::Dot,
            normalization: Normalization::default(),
            post_process: false,
            threshold: ThresholdRule::Zero,
        }
    }

    /// Defaults for a tensor with `channels` channels.
    pub fn for_channels(channels: usize) -> Self {
        Self::new(default_keep_m(channels))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub keep_m: usize,
    pub keep_n: usize,
    pub bins: usize,
    pub metric: MetricKind,
    pub normalization: Normalization,
    pub k: usize,
    pub eig_count: usize,
    pub kmeans: KMeansParams,
}

impl InstanceConfig {
    pub fn new(keep_m: usize, keep_n: usize, k: usize) -> Self {
        Self {
            keep_m,
            keep_n,
            bins: DEFAULT_BINS,
            metric: MetricKind::Boc,
            normalization: Normalization::default(),
            k,
            eig_count: 4,
            kmeans: KMeansParams::default(),
        }
    }

    /// Defaults for a tensor with `channels` channels and `k` instances.
    pub fn for_channels(channels: usize, k: usize) -> Self {
        let m = default_keep_m(channels);
        Self::new(m, default_keep_n(m), k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgBgResult {
    /// Labels `{0, 1}` on the patch grid.
    pub mask: LabelMask,
    pub eigen: EigenSegments,
    pub kept_channels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceResult {
    /// Labels `0..=k`, 0 outside the foreground.
    pub mask: LabelMask,
    pub eigen: EigenSegments,
    /// Channels kept by NCR, then by DCR (indices into the input tensor).
    pub kept_channels: Vec<usize>,
}

/// Foreground/background split by the sign pattern of the Fiedler vector.
pub fn fgbg_segment(fm: &FeatureMap, cfg: &FgBgConfig) -> Result<FgBgResult> {
    if cfg.bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {}", cfg.bins)));
    }
    let (reduced, kept) = ncr_select(fm, cfg.keep_m, cfg.bins)?;
    let (w, nodes) = build_affinity(&reduced, cfg.metric, None)?;
    let lap = laplacian(&w, cfg.normalization);
    let eigen = smallest_eigenpairs(&lap, 2)?;
    let y = eigen.vector(1);
    let tau = match cfg.threshold {
        ThresholdRule::Zero => 0.0,
        ThresholdRule::Mean => y.iter().sum::<f64>() / y.len() as f64,
    };
    let mut mask = LabelMask::zeros(fm.height(), fm.width());
    for (&(h, w), &v) in nodes.iter().zip(y) {
        if v > tau {
            mask.set(h, w, 1);
        }
    }
    if cfg.post_process {
        mask = post_process(&mask);
    }
    Ok(FgBgResult { mask, eigen, kept_channels: kept })
}

/// 5x5 majority (median) filter followed by the border-swap rule.
///
/// Borders are padded by mirroring with the edge pixel repeated
/// (`b a | a b c | c b`). Afterwards, if strictly more than half of the
/// outer one-pixel ring is foreground, foreground and background swap.
pub fn post_process(mask: &LabelMask) -> LabelMask {
    let filtered = median_filter(mask, 2);
    let (h, w) = (filtered.height(), filtered.width());
    let mut ring = 0usize;
    let mut fg = 0usize;
    for y in 0..h {
        for x in 0..w {
            if y == 0 || x == 0 || y + 1 == h || x + 1 == w {
                ring += 1;
                fg += usize::from(filtered.get(y, x) != 0);
            }
        }
    }
    if 2 * fg > ring {
        let swapped = filtered.labels().iter().map(|&l| u32::from(l == 0)).collect();
        LabelMask::new(h, w, swapped).expect("same grid")
    } else {
        filtered
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// Binary median over a `(2r+1)^2` window.
pub fn median_filter(mask: &LabelMask, radius: usize) -> LabelMask {
    let (h, w) = (mask.height(), mask.width());
    let r = radius as isize;
    let window = (2 * radius + 1) * (2 * radius + 1);
    let mut out = LabelMask::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let mut ones = 0usize;
            for dy in -r..=r {
                let yy = reflect(y as isize + dy, h);
                for dx in -r..=r {
                    let xx = reflect(x as isize + dx, w);
                    ones += usize::from(mask.get(yy, xx) != 0);
                }
            }
            if 2 * ones > window {
                out.set(y, x, 1);
            }
        }
    }
    out
}

/// Instance labels inside `fg` by clustering eigensegments `y_1..` of the
/// foreground-only affinity graph.
pub fn instance_segment(fm: &FeatureMap, fg: &LabelMask, cfg: &InstanceConfig) -> Result<InstanceResult> {
    ReductionConfig { bins: cfg.bins, keep_m: cfg.keep_m, keep_n: cfg.keep_n }.validate(fm.channels())?;
    if cfg.k < 1 || cfg.eig_count < 1 {
        return Err(Error::Config(format!("k={} and eig_count={} must be >= 1", cfg.k, cfg.eig_count)));
    }
    fg.check_same_grid(fm.height(), fm.width())?;
    let fg_pixels = fg.foreground_count();
    if fg_pixels < cfg.k {
        return Err(Error::InsufficientForeground { pixels: fg_pixels, k: cfg.k });
    }

    let (stable, kept_m) = ncr_select(fm, cfg.keep_m, cfg.bins)?;
    let (reduced, kept_n) = dcr_select(&stable, cfg.keep_n)?;
    let kept: Vec<usize> = kept_n.iter().map(|&i| kept_m[i]).collect();
    let reduced = reduced.masked(fg)?;

    let mut mask = LabelMask::zeros(fm.height(), fm.width());
    if fg_pixels == 1 {
        // a single node cannot form a graph; it is trivially instance 1
        let p = fg.labels().iter().position(|&l| l != 0).unwrap();
        mask.labels_mut()[p] = 1;
        let eigen = symmetric_smallest(1, &[0.0], 1)?;
        return Ok(InstanceResult { mask, eigen, kept_channels: kept });
    }

    let (w, nodes) = build_affinity(&reduced, cfg.metric, Some(fg))?;
    let n = nodes.len();
    let lap = laplacian(&w, cfg.normalization);
    let count = (cfg.eig_count + 1).min(n);
    let eigen = smallest_eigenpairs(&lap, count)?;
    let dim = count - 1;
    let mut embedding = Vec::with_capacity(n * dim);
    for i in 0..n {
        embedding.extend((1..count).map(|e| eigen.vector(e)[i]));
    }
    let clusters = kmeans(&embedding, dim, cfg.k, &cfg.kmeans)?;

    // label 1 = largest cluster; ties go to the cluster holding the smaller pixel index
    let mut sizes = vec![(0usize, usize::MAX); cfg.k];
    for (i, &c) in clusters.labels.iter().enumerate() {
        sizes[c].0 += 1;
        sizes[c].1 = sizes[c].1.min(i);
    }
    let mut order: Vec<usize> = (0..cfg.k).collect();
    order.sort_by(|&a, &b| sizes[b].0.cmp(&sizes[a].0).then(sizes[a].1.cmp(&sizes[b].1)));
    let mut rank = vec![0u32; cfg.k];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r as u32 + 1;
    }
    for (&(h, w), &c) in nodes.iter().zip(&clusters.labels) {
        mask.set(h, w, rank[c]);
    }
    Ok(InstanceResult { mask, eigen, kept_channels: kept })
}
