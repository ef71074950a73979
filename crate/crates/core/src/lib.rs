//! Unsupervised spectral segmentation over dense patch features.
//!
//! A feature tensor is reduced to its low-entropy (NCR) and then its
//! high-deviation (DCR) channels, turned into a pixel affinity graph with a
//! pluggable similarity kernel, and segmented with the eigenvectors of the
//! graph Laplacian: the Fiedler vector splits foreground from background, and
//! k-means over the low eigenvectors separates instances.

pub mod channel;
pub mod error;
pub mod eval;
pub mod io;
pub mod kmeans;
pub mod pipeline;
pub mod rng;
pub mod similarity;
pub mod spectral;
pub mod synth;
pub mod tensor;

pub use channel::{ChannelScore, ReductionConfig};
pub use error::{Error, Result};
pub use eval::{EvalReport, FilterCriteria, InstanceMatch};
pub use kmeans::{KMeansParams, KMeansResult};
pub use pipeline::{FgBgConfig, FgBgResult, InstanceConfig, InstanceResult, ThresholdRule};
pub use similarity::{AffinityMatrix, MetricKind};
pub use spectral::{EigenSegments, Laplacian, Normalization};
pub use synth::{Scene, SceneSpec};
pub use tensor::{FeatureMap, LabelMask};
