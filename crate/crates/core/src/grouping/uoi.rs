//! Seed grouping over original proposals and the merges applied per group.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geometry::{iou, union_bounds, BBox};
use crate::records::{score_order, Detection, ProposalRecord};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessConfig {
    /// IoU with the seed proposal needed to join its group.
    pub k: f64,
    /// Members merged per group, seed included.
    pub m: usize,
    /// Records scoring below this are dropped before grouping.
    pub score_floor: f64,
    pub per_class: bool,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self { k: 0.5, m: 5, score_floor: 0.05, per_class: true }
    }
}

impl PostprocessConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.k > 0.0 && self.k < 1.0) {
            out.push(format!("postprocess.k: must lie in (0, 1), got {}", self.k));
        }
        if self.m < 1 {
            out.push("postprocess.m: must be at least 1".to_string());
        }
        if !self.score_floor.is_finite() {
            out.push(format!("postprocess.score_floor: must be finite, got {}", self.score_floor));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { problems })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub seed_index: usize,
    /// Seed first, then by descending score; at most `m` entries.
    pub members: Vec<usize>,
    /// Records that overlapped the seed beyond the `m` cap. They are
    /// consumed by the group but take no part in the merge.
    pub suppressed: Vec<usize>,
    pub class_id: u32,
}

/// Greedy seed grouping over `records` (one image).
///
/// The highest-scoring unassigned record seeds a group, every unassigned
/// record whose proposal overlaps the seed proposal by at least `k` joins
/// it. Only the top `m` are kept as members. The score floor is not applied
/// here.
pub fn group_by_seed(records: &[ProposalRecord], config: &PostprocessConfig) -> Vec<Group> {
    let order = score_order(records);
    let mut assigned = vec![false; records.len()];
    let mut groups = Vec::new();

    for (pos, &seed) in order.iter().enumerate() {
        if assigned[seed] {
            continue;
        }
        assigned[seed] = true;
        let seed_rec = &records[seed];
        let mut group = Group {
            seed_index: seed,
            members: vec![seed],
            suppressed: Vec::new(),
            class_id: seed_rec.class_id,
        };
        for &j in &order[pos + 1..] {
            if assigned[j] {
                continue;
            }
            let rec = &records[j];
            if config.per_class && rec.class_id != seed_rec.class_id {
                continue;
            }
            if iou(&rec.proposal, &seed_rec.proposal) >= config.k {
                assigned[j] = true;
                if group.members.len() < config.m {
                    group.members.push(j);
                } else {
                    group.suppressed.push(j);
                }
            }
        }
        groups.push(group);
    }
    groups
}

/// Union over the members' regressed intersections.
pub fn uoi_merge(group: &Group, records: &[ProposalRecord]) -> BBox {
    union_bounds(group.members.iter().map(|&i| &records[i].regressed))
        .expect("group always holds its seed")
}

/// Score-weighted mean of the members' regressed boxes.
pub fn box_voting_merge(group: &Group, records: &[ProposalRecord]) -> BBox {
    let total: f64 = group.members.iter().map(|&i| records[i].score).sum();
    let n = group.members.len() as f64;
    let mut acc = [0.0f64; 4];
    for &i in &group.members {
        let w = if total > 0.0 { records[i].score / total } else { 1.0 / n };
        for (a, c) in acc.iter_mut().zip(records[i].regressed.to_array()) {
            *a += w * c;
        }
    }
    // a convex combination of ordered corners stays ordered up to rounding
    BBox::from_unordered(acc[0], acc[1], acc[2], acc[3]).expect("finite weighted mean")
}

/// Second-stage transform applied to each merged box.
pub trait Refiner {
    fn refine(&mut self, merged: BBox, group: &Group, records: &[ProposalRecord]) -> BBox;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityRefiner;

impl Refiner for IdentityRefiner {
    fn refine(&mut self, merged: BBox, _: &Group, _: &[ProposalRecord]) -> BBox {
        merged
    }
}

/// How a group collapses into one box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Merge {
    /// Keep the seed's regressed box (winner-takes-all).
    Seed,
    Union,
    Voting,
}

/// Groups, merges and refines the records of one image. One detection per
/// group, scored with the seed score, in group order. Groups handed to the
/// refiner index into `records`.
pub fn postprocess_groups(
    records: &[ProposalRecord],
    config: &PostprocessConfig,
    merge: Merge,
    refiner: &mut dyn Refiner,
) -> Vec<Detection> {
    let eligible: Vec<usize> =
        (0..records.len()).filter(|&i| records[i].score >= config.score_floor).collect();
    let subset: Vec<ProposalRecord> = eligible.iter().map(|&i| records[i]).collect();

    group_by_seed(&subset, config)
        .into_iter()
        .map(|g| {
            let g = Group {
                seed_index: eligible[g.seed_index],
                members: g.members.iter().map(|&i| eligible[i]).collect(),
                suppressed: g.suppressed.iter().map(|&i| eligible[i]).collect(),
                class_id: g.class_id,
            };
            let merged = match merge {
                Merge::Seed => records[g.seed_index].regressed,
                Merge::Union => uoi_merge(&g, records),
                Merge::Voting => box_voting_merge(&g, records),
            };
            let seed = &records[g.seed_index];
            Detection {
                bbox: refiner.refine(merged, &g, records),
                score: seed.score,
                class_id: seed.class_id,
                image_id: seed.image_id,
                source: g.seed_index,
            }
        })
        .collect()
}

/// Union-over-intersections post-processing for one image.
pub fn postprocess_uoi(
    records: &[ProposalRecord],
    config: &PostprocessConfig,
    refiner: &mut dyn Refiner,
) -> Vec<Detection> {
    postprocess_groups(records, config, Merge::Union, refiner)
}
