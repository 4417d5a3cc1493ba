//! Record types shared by post-processing, evaluation and the simulator.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::geometry::BBox;

/// One proposal together with its regressed box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    /// Original box before regression; UoI groups on this.
    pub proposal: BBox,
    /// Regressor output. For UoI this is the predicted intersection.
    pub regressed: BBox,
    pub score: f64,
    pub class_id: u32,
    pub image_id: u64,
}

impl ProposalRecord {
    pub fn boxed(&self, key: BoxKey) -> &BBox {
        match key {
            BoxKey::Proposal => &self.proposal,
            BoxKey::Regressed => &self.regressed,
        }
    }
}

/// Which box of a [`ProposalRecord`] overlap tests look at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxKey {
    #[default]
    Proposal,
    Regressed,
}

/// Post-processed output box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub class_id: u32,
    pub image_id: u64,
    /// Index of the record that produced this detection (the seed for
    /// merged groups).
    pub source: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub bbox: BBox,
    pub class_id: u32,
    pub image_id: u64,
    pub instance_id: u64,
}

/// Descending score, lower index first on ties.
pub(crate) fn by_score_desc(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Record indices sorted by descending score, ties by index.
pub fn score_order(records: &[ProposalRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| by_score_desc((a, records[a].score), (b, records[b].score)));
    order
}
