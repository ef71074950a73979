//! In-memory feature tensors and label masks.

use crate::error::{Error, Result};

/// An `H x W x C` patch-feature tensor stored in C order.
///
/// Element `(h, w, c)` lives at `data[(h * W + w) * C + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height < 1 || width < 1 || channels < 1 {
            return Err(Error::Dimension(format!(
                "feature map must be non-empty, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {height}x{width}x{channels} tensor",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!("non-finite value at flat index {i}")));
        }
        Ok(Self { height, width, channels, data })
    }

    /// Builds a map from a per-pixel closure, mostly for tests and fixtures.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for h in 0..height {
            for w in 0..width {
                for c in 0..channels {
                    data.push(f(h, w, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, h: usize, w: usize, c: usize) -> f64 {
        self.data[(h * self.width + w) * self.channels + c]
    }

    /// Feature vector of the pixel at flat (row-major) index `p`.
    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.data[p * self.channels..(p + 1) * self.channels]
    }

    /// Copies channel `c` out as a contiguous vector of `H * W` values.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    /// New map holding only `keep` (in the given order).
    pub fn select_channels(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::Config("channel selection is empty".into()));
        }
        if let Some(&c) = keep.iter().find(|&&c| c >= self.channels) {
            return Err(Error::Config(format!(
                "channel {c} out of range for {} channels",
                self.channels
            )));
        }
        let mut data = Vec::with_capacity(self.pixels() * keep.len());
        for p in 0..self.pixels() {
            let px = self.pixel(p);
            data.extend(keep.iter().map(|&c| px[c]));
        }
        Ok(Self { height: self.height, width: self.width, channels: keep.len(), data })
    }

    /// Zeroes every pixel whose label in `mask` is 0.
    pub fn masked(&self, mask: &LabelMask) -> Result<Self> {
        mask.check_same_grid(self.height, self.width)?;
        let mut out = self.clone();
        for (p, &l) in mask.labels().iter().enumerate() {
            if l == 0 {
                out.data[p * self.channels..(p + 1) * self.channels].fill(0.0);
            }
        }
        Ok(out)
    }
}

/// An `H x W` integer label grid; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    height: usize,
    width: usize,
    labels: Vec<u32>,
}

impl LabelMask {
    pub fn new(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        if height < 1 || width < 1 {
            return Err(Error::Dimension(format!("mask must be non-empty, got {height}x{width}")));
        }
        if labels.len() != height * width {
            return Err(Error::Dimension(format!(
                "{} labels cannot fill a {height}x{width} mask",
                labels.len()
            )));
        }
        Ok(Self { height, width, labels })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, labels: vec![0; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    pub fn get(&self, h: usize, w: usize) -> u32 {
        self.labels[h * self.width + w]
    }

    pub fn set(&mut self, h: usize, w: usize, label: u32) {
        self.labels[h * self.width + w] = label;
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Sorted distinct nonzero labels.
    pub fn instance_labels(&self) -> Vec<u32> {
        let mut ls: Vec<u32> = self.labels.iter().copied().filter(|&l| l != 0).collect();
        ls.sort_unstable();
        ls.dedup();
        ls
    }

    /// Pixel count per label, indexed by label value.
    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0usize; self.max_label() as usize + 1];
        for &l in &self.labels {
            areas[l as usize] += 1;
        }
        areas
    }

    /// Collapses every nonzero label to 1.
    pub fn to_binary(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            labels: self.labels.iter().map(|&l| u32::from(l != 0)).collect(),
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    /// Relabels nonzero labels to `1..=k` in ascending order of their
    /// original values, removing gaps.
    pub fn canonicalize(&self) -> Self {
        let ids = self.instance_labels();
        let mut lut = vec![0u32; self.max_label() as usize + 1];
        for (i, &l) in ids.iter().enumerate() {
            lut[l as usize] = i as u32 + 1;
        }
        Self {
            height: self.height,
            width: self.width,
            labels: self.labels.iter().map(|&l| lut[l as usize]).collect(),
        }
    }

    pub(crate) fn check_same_grid(&self, height: usize, width: usize) -> Result<()> {
        if self.height != height || self.width != width {
            return Err(Error::Dimension(format!(
                "mask is {}x{}, expected {height}x{width}",
                self.height, self.width
            )));
        }
        Ok(())
    }
}
