use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box coordinates must be finite, got {0:?}")]
    NonFinite([f64; 4]),
    #[error("box corners inverted (need x1 <= x2 and y1 <= y2), got {0:?}")]
    Inverted([f64; 4]),
    #[error("union of an empty set of boxes")]
    EmptyUnion,
    #[error("box {0:?} has zero width or height")]
    Degenerate([f64; 4]),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("refined and ground-truth lists differ in length ({refined} vs {gts})")]
    LengthMismatch { refined: usize, gts: usize },
}

/// Schema violations collected across every field of a configuration.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration:\n  {}", .problems.join("\n  "))]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl ConfigError {
    pub fn single(msg: impl Into<String>) -> Self {
        Self { problems: vec![msg.into()] }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no proposal with IoU in [{lo}, {hi}] found after {attempts} attempts")]
    BandUnreachable { lo: f64, hi: f64, attempts: usize },
    #[error("oracle regressor needs overlapping proposal and ground truth")]
    Disjoint,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate ground truth (image_id {image_id}, instance_id {instance_id}) at line {line}")]
    DuplicateInstance { image_id: u64, instance_id: u64, line: usize },
    #[error("line {line}: record has no `proposal` field, required by this method")]
    MissingProposal { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
