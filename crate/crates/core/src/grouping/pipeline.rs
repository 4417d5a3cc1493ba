//! Batch driver: splits records by image (and class), runs one method per
//! image in parallel and returns detections in a canonical order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nms::{cluster_nms, greedy_nms, soft_nms, SoftNmsMode};
use super::uoi::{postprocess_groups, IdentityRefiner, Merge, PostprocessConfig};
use crate::records::{by_score_desc, BoxKey, Detection, ProposalRecord};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    Nms { key: BoxKey },
    SoftNms { key: BoxKey, mode: SoftNmsMode },
    ClusterNms { key: BoxKey },
    BoxVoting,
    Uoi,
}

impl Method {
    /// True for methods that group on the original proposals.
    pub fn needs_proposals(&self) -> bool {
        matches!(self, Method::BoxVoting | Method::Uoi)
    }
}

/// Runs `method` over a multi-image batch.
///
/// Output is ordered by image id, then by descending score, then by source
/// index, so two methods that keep the same records emit identical lists.
/// Suppression methods emit the record's regressed box; UoI and box voting
/// use an identity refiner.
pub fn postprocess_batch(
    records: &[ProposalRecord],
    method: Method,
    config: &PostprocessConfig,
) -> Vec<Detection> {
    let mut by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_image.entry(r.image_id).or_default().push(i);
    }
    let images: Vec<Vec<usize>> = by_image.into_values().collect();

    images
        .par_iter()
        .map(|idx| {
            let local: Vec<ProposalRecord> = idx.iter().map(|&i| records[i]).collect();
            let mut dets = postprocess_image(&local, method, config);
            for d in &mut dets {
                d.source = idx[d.source];
            }
            dets.sort_by(|a, b| by_score_desc((a.source, a.score), (b.source, b.score)));
            dets
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// One image. `source` indices refer to `records`.
pub fn postprocess_image(
    records: &[ProposalRecord],
    method: Method,
    config: &PostprocessConfig,
) -> Vec<Detection> {
    match method {
        Method::Uoi => postprocess_groups(records, config, Merge::Union, &mut IdentityRefiner),
        Method::BoxVoting => postprocess_groups(records, config, Merge::Voting, &mut IdentityRefiner),
        Method::Nms { key } => suppress(records, config, |r| {
            greedy_nms(r, config.k, key).into_iter().map(|i| (i, r[i].score)).collect()
        }),
        Method::ClusterNms { key } => suppress(records, config, |r| {
            cluster_nms(r, config.k, key).into_iter().map(|i| (i, r[i].score)).collect()
        }),
        Method::SoftNms { key, mode } => {
            // soft-nms applies its own floor after rescoring
            let floor = config.score_floor;
            let open = PostprocessConfig { score_floor: f64::NEG_INFINITY, ..*config };
            suppress(records, &open, |r| soft_nms(r, mode, floor, key))
        }
    }
}

/// Applies the score floor and class split, then maps kept `(index, score)`
/// pairs back to detections.
fn suppress<F>(records: &[ProposalRecord], config: &PostprocessConfig, kernel: F) -> Vec<Detection>
where
    F: Fn(&[ProposalRecord]) -> Vec<(usize, f64)>,
{
    let mut buckets: BTreeMap<Option<u32>, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if r.score < config.score_floor {
            continue;
        }
        let class = config.per_class.then_some(r.class_id);
        buckets.entry(class).or_default().push(i);
    }

    let mut out = Vec::new();
    for idx in buckets.values() {
        let subset: Vec<ProposalRecord> = idx.iter().map(|&i| records[i]).collect();
        for (local, score) in kernel(&subset) {
            let r = &subset[local];
            out.push(Detection {
                bbox: r.regressed,
                score,
                class_id: r.class_id,
                image_id: r.image_id,
                source: idx[local],
            });
        }
    }
    out
}
