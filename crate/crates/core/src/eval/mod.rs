//! Evaluation: F-score, Hungarian-matched mIoU, the mR variance ratio,
//! resolution alignment and dataset filtering.

mod hungarian;

use rand::seq::index;
use serde::{Deserialize, Serialize};

pub use hungarian::hungarian;

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::similarity::{covariance_context, metric_sim, MetricKind};
use crate::tensor::{FeatureMap, LabelMask};

/// One ground-truth instance with its matched prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceMatch {
    pub gt_label: u32,
    pub pred_label: Option<u32>,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub f_score: f64,
    #[serde(rename = "miou")]
    pub mean_iou: f64,
    #[serde(rename = "pairs", with = "pair_rows")]
    pub per_instance_iou: Vec<InstanceMatch>,
    #[serde(rename = "mr")]
    pub mr: Option<f64>,
}

mod pair_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::InstanceMatch;

    pub fn serialize<S: Serializer>(pairs: &[InstanceMatch], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<(u32, Option<u32>, f64)> = pairs.iter().map(|p| (p.gt_label, p.pred_label, p.iou)).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<InstanceMatch>, D::Error> {
        let rows: Vec<(u32, Option<u32>, f64)> = Vec::deserialize(d)?;
        Ok(rows.into_iter().map(|(gt_label, pred_label, iou)| InstanceMatch { gt_label, pred_label, iou }).collect())
    }
}

fn same_dims(a: &LabelMask, b: &LabelMask) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::Dimension(format!(
            "masks are {}x{} and {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

/// Binary F1 over foreground (nonzero) pixels.
pub fn f_score(pred: &LabelMask, gt: &LabelMask) -> Result<f64> {
    same_dims(pred, gt)?;
    let mut tp = 0usize;
    let mut p = 0usize;
    let mut g = 0usize;
    for (&a, &b) in pred.labels().iter().zip(gt.labels()) {
        let (a, b) = (a != 0, b != 0);
        tp += usize::from(a && b);
        p += usize::from(a);
        g += usize::from(b);
    }
    Ok(match (p, g) {
        (0, 0) => 1.0,
        _ if tp == 0 => 0.0,
        _ => {
            let precision = tp as f64 / p as f64;
            let recall = tp as f64 / g as f64;
            2.0 * precision * recall / (precision + recall)
        }
    })
}

/// Report for a binary task: F-score plus foreground IoU as the single pair.
pub fn fgbg_report(pred: &LabelMask, gt: &LabelMask) -> Result<EvalReport> {
    let f = f_score(pred, gt)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &b) in pred.labels().iter().zip(gt.labels()) {
        inter += usize::from(a != 0 && b != 0);
        union += usize::from(a != 0 || b != 0);
    }
    let iou = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    let pairs = vec![InstanceMatch { gt_label: 1, pred_label: Some(1), iou }];
    Ok(EvalReport { f_score: f, mean_iou: iou, per_instance_iou: pairs, mr: None })
}

/// Hungarian-matched instance IoU; unmatched ground-truth instances score 0.
pub fn instance_miou(pred: &LabelMask, gt: &LabelMask) -> Result<EvalReport> {
    same_dims(pred, gt)?;
    let gt_ids = gt.instance_labels();
    if gt_ids.is_empty() {
        return Err(Error::NoInstances);
    }
    let pred_ids = pred.instance_labels();
    let (k, m) = (gt_ids.len(), pred_ids.len());
    let gt_pos = |l: u32| gt_ids.binary_search(&l).ok();
    let pred_pos = |l: u32| pred_ids.binary_search(&l).ok();

    let mut inter = vec![0usize; k * m];
    let mut gt_area = vec![0usize; k];
    let mut pred_area = vec![0usize; m];
    for (&a, &b) in pred.labels().iter().zip(gt.labels()) {
        let pi = if a != 0 { pred_pos(a) } else { None };
        let gi = if b != 0 { gt_pos(b) } else { None };
        if let Some(pi) = pi {
            pred_area[pi] += 1;
        }
        if let Some(gi) = gi {
            gt_area[gi] += 1;
        }
        if let (Some(gi), Some(pi)) = (gi, pi) {
            inter[gi * m + pi] += 1;
        }
    }
    let iou: Vec<f64> = (0..k * m)
        .map(|x| {
            let (g, p) = (x / m, x % m);
            let i = inter[x];
            i as f64 / (gt_area[g] + pred_area[p] - i) as f64
        })
        .collect();

    let mut pairs: Vec<InstanceMatch> =
        gt_ids.iter().map(|&l| InstanceMatch { gt_label: l, pred_label: None, iou: 0.0 }).collect();
    for (g, p) in hungarian(&iou, k, m, true) {
        pairs[g].pred_label = Some(pred_ids[p]);
        pairs[g].iou = iou[g * m + p];
    }
    let mean_iou = pairs.iter().map(|p| p.iou).sum::<f64>() / k as f64;
    Ok(EvalReport { f_score: f_score(pred, gt)?, mean_iou, per_instance_iou: pairs, mr: None })
}

/// Nearest-neighbour upsampling of a patch-grid mask to the ground-truth grid.
pub fn align_resolution(pred: &LabelMask, gt: &LabelMask) -> Result<LabelMask> {
    let (ph, pw) = (pred.height(), pred.width());
    let (gh, gw) = (gt.height(), gt.width());
    if ph == 0 || pw == 0 || gh % ph != 0 || gw % pw != 0 {
        return Err(Error::Dimension(format!("{gh}x{gw} is not an integer multiple of {ph}x{pw}")));
    }
    let (sy, sx) = (gh / ph, gw / pw);
    let mut out = LabelMask::zeros(gh, gw);
    for y in 0..gh {
        for x in 0..gw {
            out.set(y, x, pred.get(y / sy, x / sx));
        }
    }
    Ok(out)
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Mean intra-instance and mean inter-instance similarity variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatio {
    pub intra: f64,
    pub inter: f64,
}

impl VarianceRatio {
    pub fn ratio(&self) -> f64 {
        self.intra / self.inter
    }
}

/// Ratio of mean intra-instance to mean inter-instance similarity variance.
pub fn variance_ratio_mr(fm: &FeatureMap, gt: &LabelMask, kind: MetricKind, samples: usize, seed: u64) -> Result<f64> {
    variance_components(fm, gt, kind, samples, seed).map(|v| v.ratio())
}

/// Both variance means behind [`variance_ratio_mr`].
///
/// `samples` pixels are drawn without replacement from every instance.
/// Instances are visited in order of their first row-major pixel, so the
/// result does not depend on the label values.
pub fn variance_components(
    fm: &FeatureMap,
    gt: &LabelMask,
    kind: MetricKind,
    samples: usize,
    seed: u64,
) -> Result<VarianceRatio> {
    gt.check_same_grid(fm.height(), fm.width())?;
    if samples < 2 {
        return Err(Error::Config(format!("need at least 2 samples per instance, got {samples}")));
    }
    let mut members: Vec<(u32, Vec<usize>)> = Vec::new();
    for (p, &l) in gt.labels().iter().enumerate() {
        if l == 0 {
            continue;
        }
        match members.iter_mut().find(|(label, _)| *label == l) {
            Some((_, pixels)) => pixels.push(p),
            None => members.push((l, vec![p])),
        }
    }
    if members.len() < 2 {
        return Err(Error::InsufficientInstances(members.len()));
    }
    if let Some((label, pixels)) = members.iter().find(|(_, px)| px.len() < samples) {
        return Err(Error::InstanceTooSmall { label: *label, area: pixels.len(), needed: samples });
    }

    let ctx = match kind {
        MetricKind::Mahalanobis => Some(covariance_context(fm)?),
        _ => None,
    };
    let sim = |a: usize, b: usize| metric_sim(kind, fm.pixel(a), fm.pixel(b), ctx.as_ref());

    let mut rng = seeded(seed);
    let drawn: Vec<Vec<usize>> = members
        .iter()
        .map(|(_, pixels)| index::sample(&mut rng, pixels.len(), samples).into_iter().map(|i| pixels[i]).collect())
        .collect();

    let mut intra = Vec::with_capacity(drawn.len());
    for set in &drawn {
        let mut values = Vec::with_capacity(samples * (samples - 1) / 2);
        for i in 0..samples {
            for j in i + 1..samples {
                values.push(sim(set[i], set[j])?);
            }
        }
        intra.push(population_variance(&values));
    }
    let mut inter = Vec::new();
    for a in 0..drawn.len() {
        for b in a + 1..drawn.len() {
            let mut values = Vec::with_capacity(samples * samples);
            for &p in &drawn[a] {
                for &q in &drawn[b] {
                    values.push(sim(p, q)?);
                }
            }
            inter.push(population_variance(&values));
        }
    }
    let intra = intra.iter().sum::<f64>() / intra.len() as f64;
    let inter = inter.iter().sum::<f64>() / inter.len() as f64;
    if inter == 0.0 {
        return Err(Error::DegenerateStatistic("inter-instance similarity variance is 0".into()));
    }
    Ok(VarianceRatio { intra, inter })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterCriteria {
    /// Smallest instance must cover at least this fraction of the image.
    pub min_object_frac: f64,
    /// Smallest-to-largest instance area ratio must reach this value.
    pub min_size_ratio: f64,
    /// Occlusion scores at or above this value are rejected.
    pub max_mbor: f64,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        Self { min_object_frac: 0.07, min_size_ratio: 0.3, max_mbor: 0.5 }
    }
}

impl FilterCriteria {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("min_object_frac", self.min_object_frac),
            ("min_size_ratio", self.min_size_ratio),
            ("max_mbor", self.max_mbor),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name}={v} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Whether an annotated frame passes the size and occlusion rules.
/// Frames without instances are rejected.
pub fn filter_dataset(gt: &LabelMask, criteria: &FilterCriteria, mbor: Option<f64>) -> bool {
    let areas: Vec<usize> = gt.areas().into_iter().skip(1).filter(|&a| a > 0).collect();
    let (Some(&smallest), Some(&largest)) = (areas.iter().min(), areas.iter().max()) else {
        return false;
    };
    let total = gt.len() as f64;
    if (smallest as f64) < criteria.min_object_frac * total {
        return false;
    }
    if (smallest as f64) / (largest as f64) < criteria.min_size_ratio {
        return false;
    }
    !mbor.is_some_and(|m| m >= criteria.max_mbor)
}
