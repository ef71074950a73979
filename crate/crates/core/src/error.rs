use std::io;

use thiserror::Error;

/// Errors produced anywhere in the segmentation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported array layout: {0}")]
    UnsupportedLayout(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("graph has {0} node(s); at least 2 are required")]
    DegenerateGraph(usize),

    #[error("graph has {nodes} nodes, above the dense limit of {limit}; sparsify the input first")]
    GraphTooLarge { nodes: usize, limit: usize },

    #[error("eigensolver did not converge: {0}")]
    Numerical(String),

    #[error("need at least 2 instances, found {0}")]
    InsufficientInstances(usize),

    #[error("{pixels} foreground pixel(s) cannot hold {k} instance(s)")]
    InsufficientForeground { pixels: usize, k: usize },

    #[error("instance {label} has {area} pixel(s); {needed} samples were requested")]
    InstanceTooSmall { label: u32, area: usize, needed: usize },

    #[error("ground truth contains no instances")]
    NoInstances,

    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    #[error("invalid scene: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
