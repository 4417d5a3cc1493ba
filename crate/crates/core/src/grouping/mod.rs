//! Post-processing engines: NMS baselines, box voting and union over
//! intersections.

pub mod nms;
pub mod pipeline;
pub mod uoi;

pub use nms::{cluster_nms, greedy_nms, soft_nms, SoftNmsMode};
pub use pipeline::{postprocess_batch, postprocess_image, Method};
pub use uoi::{
    box_voting_merge, group_by_seed, postprocess_groups, postprocess_uoi, uoi_merge, Group,
    IdentityRefiner, Merge, PostprocessConfig, Refiner,
};
