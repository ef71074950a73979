//! Seeded synthetic scenes with planted instances, for tests and benchmarks.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::tensor::{FeatureMap, LabelMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Rectangle { top: usize, left: usize, height: usize, width: usize },
    Disk { center_y: usize, center_x: usize, radius: usize },
}

impl Shape {
    fn contains(&self, y: usize, x: usize) -> bool {
        match *self {
            Shape::Rectangle { top, left, height, width } => {
                (top..top + height).contains(&y) && (left..left + width).contains(&x)
            }
            Shape::Disk { center_y, center_x, radius } => {
                let dy = y.abs_diff(center_y);
                let dx = x.abs_diff(center_x);
                dy * dy + dx * dx <= radius * radius
            }
        }
    }

    /// Exclusive bottom-right corner of the bounding box.
    fn extent(&self) -> (usize, usize) {
        match *self {
            Shape::Rectangle { top, left, height, width } => (top + height, left + width),
            Shape::Disk { center_y, center_x, radius } => (center_y + radius + 1, center_x + radius + 1),
        }
    }

    /// Nonempty and entirely inside an `h x w` grid.
    fn fits(&self, h: usize, w: usize) -> bool {
        let (bottom, right) = self.extent();
        let inside = bottom <= h && right <= w;
        match *self {
            Shape::Rectangle { height, width, .. } => inside && height > 0 && width > 0,
            Shape::Disk { center_y, center_x, radius } => inside && radius <= center_y && radius <= center_x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub shape: Shape,
    /// Per-channel value planted on every pixel of the instance.
    pub signature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub channels: Vec<usize>,
    /// Noise is uniform on `[-amplitude, amplitude]`.
    pub amplitude: f64,
}

/// Additive offset on one channel over a rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
    pub channel: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Signature scale; jitter on signal channels has standard deviation `0.05 * scale`.
    pub scale: f64,
    pub background: Vec<f64>,
    pub instances: Vec<InstanceSpec>,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub spikes: Vec<Spike>,
    pub seed: u64,
}

/// Generated tensor with its instance and foreground ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub features: FeatureMap,
    pub instances: LabelMask,
    pub foreground: LabelMask,
}

pub const JITTER_FRACTION: f64 = 0.05;

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let spec_err = |m: String| Err(Error::Spec(m));
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return spec_err(format!("empty grid {}x{}x{}", self.height, self.width, self.channels));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return spec_err(format!("scale {} must be positive", self.scale));
        }
        if !(self.noise.amplitude.is_finite() && self.noise.amplitude >= 0.0) {
            return spec_err(format!("noise amplitude {} must be >= 0", self.noise.amplitude));
        }
        let mut seen = vec![false; self.channels];
        for &c in &self.noise.channels {
            if c >= self.channels || std::mem::replace(&mut seen[c], true) {
                return spec_err(format!("noise channel {c} is out of range or repeated"));
            }
        }
        let sigs = std::iter::once(&self.background).chain(self.instances.iter().map(|i| &i.signature));
        for (i, s) in sigs.clone().enumerate() {
            if s.len() != self.channels || s.iter().any(|v| !v.is_finite()) {
                return spec_err(format!("signature {i} must hold {} finite values", self.channels));
            }
            if sigs.clone().take(i).any(|t| t == s) {
                return spec_err(format!("signature {i} repeats an earlier one"));
            }
        }
        for (i, inst) in self.instances.iter().enumerate() {
            if !inst.shape.fits(self.height, self.width) {
                return spec_err(format!("instance {i} is empty or leaves the grid"));
            }
        }
        if self.instances.len() > u32::MAX as usize {
            return spec_err("too many instances".into());
        }
        for s in &self.spikes {
            if s.channel >= self.channels || s.top + s.height > self.height || s.left + s.width > self.width {
                return spec_err(format!("spike on channel {} leaves the tensor", s.channel));
            }
        }
        Ok(())
    }
}

/// Renders a scene: every pixel takes its region's signature plus Gaussian
/// jitter on signal channels, noise channels are uniform, then spikes are added.
pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (h, w, c) = (spec.height, spec.width, spec.channels);
    let mut instances = LabelMask::zeros(h, w);
    for (i, inst) in spec.instances.iter().enumerate() {
        let (bottom, right) = inst.shape.extent();
        for y in 0..bottom {
            for x in 0..right {
                if inst.shape.contains(y, x) {
                    if instances.get(y, x) != 0 {
                        return Err(Error::Spec(format!(
                            "instance {} overlaps instance {} at ({y}, {x})",
                            i + 1,
                            instances.get(y, x)
                        )));
                    }
                    instances.set(y, x, i as u32 + 1);
                }
            }
        }
    }

    let mut is_noise = vec![false; c];
    spec.noise.channels.iter().for_each(|&ch| is_noise[ch] = true);
    let jitter = Normal::new(0.0, JITTER_FRACTION * spec.scale).map_err(|e| Error::Spec(e.to_string()))?;
    let amp = spec.noise.amplitude;
    let mut rng = seeded(spec.seed);
    let mut data = Vec::with_capacity(h * w * c);
    for &label in instances.labels() {
        let sig = match label {
            0 => &spec.background,
            l => &spec.instances[l as usize - 1].signature,
        };
        for ch in 0..c {
            let v = if !is_noise[ch] {
                sig[ch] + jitter.sample(&mut rng)
            } else if amp > 0.0 {
                rng.random_range(-amp..=amp)
            } else {
                0.0
            };
            data.push(v);
        }
    }
    for s in &spec.spikes {
        for y in s.top..s.top + s.height {
            for x in s.left..s.left + s.width {
                data[(y * w + x) * c + s.channel] += s.amount;
            }
        }
    }
    let features = FeatureMap::new(h, w, c, data)?;
    let foreground = instances.to_binary();
    Ok(Scene { features, instances, foreground })
}

/// Layout knobs for the planted and spiked scene families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedParams {
    /// Side of the square patch grid.
    pub size: usize,
    pub channels: usize,
    pub scale: f64,
    /// Noise amplitude as a multiple of `scale`.
    pub noise_ratio: f64,
    /// Spike magnitude as a multiple of `scale`.
    pub spike_ratio: f64,
    pub spike_channels: usize,
}

impl Default for PlantedParams {
    fn default() -> Self {
        Self { size: 48, channels: 384, scale: 0.1, noise_ratio: 1.0, spike_ratio: 10.0, spike_channels: 5 }
    }
}

/// A scene with `instances` (1 to 4) rectangles, one per grid quadrant.
///
/// A third of the channels carry signal and the rest are uniform noise. The
/// signal channels split in two halves: the background is `scale` on the
/// second half, and each instance draws `scale * U(0.2, 2)` per channel of
/// the first half. With `spiked`, `spike_channels` first-half channels get
/// `±spike_ratio * scale` on the pixels of instance 1 within 2 rows and
/// columns of its centre.
pub fn planted_scene(params: &PlantedParams, instances: usize, seed: u64, spiked: bool) -> Result<SceneSpec> {
    let PlantedParams { size, channels, scale, .. } = *params;
    if !(1..=4).contains(&instances) {
        return Err(Error::Spec(format!("planted scenes hold 1 to 4 instances, got {instances}")));
    }
    if size < 16 || channels < 6 {
        return Err(Error::Spec(format!("planted scenes need size >= 16 and >= 6 channels, got {size} and {channels}")));
    }
    let mut rng = seeded(seed ^ 0x5eed_1a70_u64);
    let mut perm: Vec<usize> = (0..channels).collect();
    perm.shuffle(&mut rng);
    let n_signal = channels / 3;
    let mut signal = perm[..n_signal].to_vec();
    signal.sort_unstable();
    let mut noise = perm[n_signal..].to_vec();
    noise.sort_unstable();
    let (fg_channels, bg_channels) = signal.split_at(n_signal / 2);

    let mut background = vec![0.0; channels];
    bg_channels.iter().for_each(|&ch| background[ch] = scale);

    let cell = size / 2;
    let mut cells = [(0, 0), (0, 1), (1, 0), (1, 1)];
    cells.shuffle(&mut rng);
    let (lo, hi) = (cell / 2, cell * 3 / 4 - 1);
    let mut rects = Vec::with_capacity(instances);
    for &(cy, cx) in &cells[..instances] {
        let height = rng.random_range(lo..=hi);
        let width = rng.random_range(lo..=hi);
        let top = cy * cell + rng.random_range(2..=cell - 1 - height);
        let left = cx * cell + rng.random_range(2..=cell - 1 - width);
        rects.push((top, left, height, width));
    }
    let specs = rects
        .iter()
        .map(|&(top, left, height, width)| {
            let mut signature = vec![0.0; channels];
            fg_channels.iter().for_each(|&ch| signature[ch] = scale * rng.random_range(0.2..2.0));
            InstanceSpec { shape: Shape::Rectangle { top, left, height, width }, signature }
        })
        .collect();

    let mut spikes = Vec::new();
    if spiked {
        let (top, left, height, width) = rects[0];
        // pixels strictly within 3 of the centre along each axis
        let window = |start: usize, len: usize| {
            let centre = start as f64 + (len as f64 - 1.0) / 2.0;
            let first = (start..start + len).find(|&v| (v as f64 - centre).abs() < 3.0).unwrap();
            let count = (first..start + len).take_while(|&v| (v as f64 - centre).abs() < 3.0).count();
            (first, count)
        };
        let (sy, sh) = window(top, height);
        let (sx, sw) = window(left, width);
        let chosen = index::sample(&mut rng, fg_channels.len(), params.spike_channels.min(fg_channels.len()));
        for i in chosen {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            spikes.push(Spike {
                top: sy,
                left: sx,
                height: sh,
                width: sw,
                channel: fg_channels[i],
                amount: sign * params.spike_ratio * scale,
            });
        }
    }

    Ok(SceneSpec {
        height: size,
        width: size,
        channels,
        scale,
        background,
        instances: specs,
        noise: NoiseSpec { channels: noise, amplitude: params.noise_ratio * scale },
        spikes,
        seed,
    })
}

/// Instance count used by the seeded suites: 2, 3, 4, 2, ...
pub fn suite_instances(seed: u64) -> usize {
    2 + (seed % 3) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{channel_entropy, channel_histogram, channel_std, ncr_select};

    fn small() -> SceneSpec {
        let rect = |top, left| Shape::Rectangle { top, left, height: 3, width: 3 };
        SceneSpec {
            height: 8,
            width: 8,
            channels: 4,
            scale: 1.0,
            background: vec![0.0, 1.0, 0.0, 0.0],
            instances: vec![
                InstanceSpec { shape: rect(0, 0), signature: vec![1.0, 0.0, 0.5, 0.0] },
                InstanceSpec { shape: rect(4, 4), signature: vec![0.2, 0.0, 1.5, 0.0] },
            ],
            noise: NoiseSpec { channels: vec![3], amplitude: 1.0 },
            spikes: vec![],
            seed: 3,
        }
    }

    #[test]
    fn ground_truth_matches_shapes() {
        let scene = generate(&small()).unwrap();
        assert_eq!(scene.instances.areas(), vec![64 - 18, 9, 9]);
        assert_eq!(scene.instances.get(5, 5), 2);
        assert_eq!(scene.foreground, scene.instances.to_binary());
    }

    #[test]
    fn same_seed_same_tensor() {
        let a = generate(&small()).unwrap();
        assert_eq!(a, generate(&small()).unwrap());
        let mut other = small();
        other.seed = 4;
        assert_ne!(a.features, generate(&other).unwrap().features);
    }

    #[test]
    fn overlap_is_rejected() {
        let mut spec = small();
        spec.instances[1].shape = Shape::Rectangle { top: 2, left: 2, height: 3, width: 3 };
        assert!(matches!(generate(&spec), Err(Error::Spec(_))));
    }

    #[test]
    fn invalid_specs() {
        let mut spec = small();
        spec.instances[1].signature = spec.instances[0].signature.clone();
        assert!(spec.validate().is_err());
        let mut spec = small();
        spec.noise.channels = vec![3, 3];
        assert!(spec.validate().is_err());
        let mut spec = small();
        spec.instances[0].shape = Shape::Disk { center_y: 1, center_x: 5, radius: 2 };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn disks_rasterize() {
        let mut spec = small();
        spec.instances[0].shape = Shape::Disk { center_y: 2, center_x: 2, radius: 1 };
        let scene = generate(&spec).unwrap();
        assert_eq!(scene.instances.areas()[1], 5);
    }

    #[test]
    fn silent_noise_is_constant() {
        let mut spec = small();
        spec.noise.amplitude = 0.0;
        let scene = generate(&spec).unwrap();
        let pdf = channel_histogram(&scene.features, 3, 30).unwrap();
        assert_eq!(channel_entropy(&pdf), 0.0);
        assert_eq!(channel_std(&scene.features, 3).unwrap(), 0.0);
    }

    #[test]
    fn planted_layout() {
        let p = PlantedParams::default();
        let spec = planted_scene(&p, 3, 7, true).unwrap();
        assert_eq!(spec.noise.channels.len(), 384 - 128);
        assert_eq!(spec.spikes.len(), 5);
        assert!(spec.spikes.iter().all(|s| s.amount.abs() == 1.0));
        let scene = generate(&spec).unwrap();
        assert_eq!(scene.instances.instance_labels(), vec![1, 2, 3]);
        for a in &scene.instances.areas()[1..] {
            assert!((144..=289).contains(a));
        }
        assert!(planted_scene(&p, 5, 0, false).is_err());
    }

    #[test]
    fn noise_channels_are_the_high_entropy_ones() {
        let spec = planted_scene(&PlantedParams::default(), 2, 11, false).unwrap();
        let scene = generate(&spec).unwrap();
        let (_, kept) = ncr_select(&scene.features, 128, 30).unwrap();
        let mut signal: Vec<usize> = (0..384).filter(|c| !spec.noise.channels.contains(c)).collect();
        signal.sort_unstable();
        assert_eq!(kept, signal);
    }
}
