//! Channel reduction: entropy-ranked noise pruning (NCR), deviation-ranked
//! pruning (DCR), and per-channel diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, LabelMask};

/// Histogram bin count used when none is given.
pub const DEFAULT_BINS: usize = 30;

/// Score of one channel: entropy in bits or standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelScore {
    pub channel_index: usize,
    pub score: f64,
}

/// Channel budget for the two reductions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub bins: usize,
    pub keep_m: usize,
    pub keep_n: usize,
}

impl ReductionConfig {
    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::Config(format!("need at least 2 bins, got {}", self.bins)));
        }
        if self.keep_n < 1 || self.keep_n > self.keep_m || self.keep_m > channels {
            return Err(Error::Config(format!(
                "require 1 <= N <= M <= C, got N={} M={} C={channels}",
                self.keep_n, self.keep_m
            )));
        }
        Ok(())
    }
}

/// Equal-width histogram over `[min, max]` of `values`, normalized by count.
///
/// The maximum falls in the last bin; a constant input puts all mass in bin 0.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {bins}")));
    }
    if values.is_empty() {
        return Err(Error::Dimension("histogram of an empty channel".into()));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut counts = vec![0usize; bins];
    if hi > lo {
        let width = hi - lo;
        for &v in values {
            let b = ((v - lo) / width * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
    } else {
        counts[0] = values.len();
    }
    let n = values.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Probability vector of channel `c` over all `H * W` pixels.
pub fn channel_histogram(fm: &FeatureMap, c: usize, bins: usize) -> Result<Vec<f64>> {
    check_channel(fm, c)?;
    histogram(&fm.channel(c), bins)
}

/// Shannon entropy in bits; empty bins contribute nothing.
pub fn channel_entropy(pdf: &[f64]) -> f64 {
    -pdf.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>()
}

/// Population standard deviation of channel `c`.
pub fn channel_std(fm: &FeatureMap, c: usize) -> Result<f64> {
    check_channel(fm, c)?;
    Ok(population_std(&fm.channel(c)))
}

pub(crate) fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Entropy of every channel, in channel order.
pub fn entropy_scores(fm: &FeatureMap, bins: usize) -> Result<Vec<ChannelScore>> {
    (0..fm.channels())
        .map(|c| {
            Ok(ChannelScore { channel_index: c, score: channel_entropy(&channel_histogram(fm, c, bins)?) })
        })
        .collect()
}

/// Standard deviation of every channel, in channel order.
pub fn std_scores(fm: &FeatureMap) -> Vec<ChannelScore> {
    (0..fm.channels())
        .map(|c| ChannelScore { channel_index: c, score: population_std(&fm.channel(c)) })
        .collect()
}

/// Keeps the `m` lowest-entropy channels.
///
/// Returns the reduced map and the kept indices in original order.
pub fn ncr_select(fm: &FeatureMap, m: usize, bins: usize) -> Result<(FeatureMap, Vec<usize>)> {
    check_keep(fm, m, "M")?;
    let mut scores = entropy_scores(fm, bins)?;
    scores.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.channel_index.cmp(&b.channel_index)));
    keep_first(fm, &scores, m)
}

/// Keeps the `n` highest-deviation channels.
pub fn dcr_select(fm: &FeatureMap, n: usize) -> Result<(FeatureMap, Vec<usize>)> {
    check_keep(fm, n, "N")?;
    let mut scores = std_scores(fm);
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.channel_index.cmp(&b.channel_index)));
    keep_first(fm, &scores, n)
}

fn keep_first(fm: &FeatureMap, ranked: &[ChannelScore], count: usize) -> Result<(FeatureMap, Vec<usize>)> {
    let mut kept: Vec<usize> = ranked[..count].iter().map(|s| s.channel_index).collect();
    kept.sort_unstable();
    Ok((fm.select_channels(&kept)?, kept))
}

/// Mean absolute difference of per-instance channel means, over all
/// unordered pairs of instances in `instances`.
pub fn channel_delta(fm: &FeatureMap, instances: &LabelMask, c: usize) -> Result<f64> {
    check_channel(fm, c)?;
    instances.check_same_grid(fm.height(), fm.width())?;
    let ids = instances.instance_labels();
    if ids.len() < 2 {
        return Err(Error::InsufficientInstances(ids.len()));
    }
    let values = fm.channel(c);
    let means: Vec<f64> = ids
        .iter()
        .map(|&id| {
            let (sum, n) = instances
                .labels()
                .iter()
                .zip(&values)
                .filter(|(&l, _)| l == id)
                .fold((0.0, 0usize), |(s, n), (_, &v)| (s + v, n + 1));
            sum / n as f64
        })
        .collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            total += (means[i] - means[j]).abs();
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

fn check_channel(fm: &FeatureMap, c: usize) -> Result<()> {
    if c >= fm.channels() {
        return Err(Error::Config(format!("channel {c} out of range for {} channels", fm.channels())));
    }
    Ok(())
}

fn check_keep(fm: &FeatureMap, keep: usize, name: &str) -> Result<()> {
    if keep < 1 || keep > fm.channels() {
        return Err(Error::Config(format!(
            "{name}={keep} must lie in 1..={} (channel count)",
            fm.channels()
        )));
    }
    Ok(())
}
