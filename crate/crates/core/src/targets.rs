//! Regression targets and the training losses built on them.
//!
//! Targets are absolute corner coordinates. An intersection target is the
//! visible part of the ground truth inside the proposal, so a regressor
//! trained on it never has to extrapolate past the proposal's edges.

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, LossError};
use crate::geometry::{alpha_iou, diou, giou, intersect, iou, BBox, DEFAULT_ALPHA};

/// Minimum IoU between a proposal and a ground-truth part before the
/// proposal is assigned to that part.
pub const DEFAULT_MIN_PART_IOU: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetMode {
    FullGroundTruth,
    Intersection,
    QuadrantPart,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionTarget {
    pub target_box: BBox,
    pub mode: TargetMode,
}

/// Per-coordinate penalty of the intersection loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    #[default]
    L1,
    L2,
}

impl Norm {
    pub fn exponent(self) -> i32 {
        match self {
            Norm::L1 => 1,
            Norm::L2 => 2,
        }
    }

    pub fn from_exponent(t: u32) -> Option<Self> {
        match t {
            1 => Some(Norm::L1),
            2 => Some(Norm::L2),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum IouVariant {
    IoU,
    GIoU,
    DIoU,
    AlphaIoU { alpha: f64 },
}

impl IouVariant {
    pub fn alpha_default() -> Self {
        IouVariant::AlphaIoU { alpha: DEFAULT_ALPHA }
    }

    pub fn score(self, a: &BBox, b: &BBox) -> f64 {
        match self {
            IouVariant::IoU => iou(a, b),
            IouVariant::GIoU => giou(a, b),
            IouVariant::DIoU => diou(a, b),
            IouVariant::AlphaIoU { alpha } => alpha_iou(a, b, alpha),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub norm: Norm,
    /// Weight of the refinement term in the total loss.
    pub lambda: f64,
    /// When set, box regression uses `1 - variant` instead of the norm.
    pub iou_variant: Option<IouVariant>,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self { norm: Norm::L1, lambda: 0.5, iou_variant: None }
    }
}

pub fn full_target(gt: &BBox) -> RegressionTarget {
    RegressionTarget { target_box: *gt, mode: TargetMode::FullGroundTruth }
}

/// The visible part of `gt` inside `proposal`. Disjoint pairs get no target.
pub fn intersection_target(proposal: &BBox, gt: &BBox) -> Option<RegressionTarget> {
    intersect(proposal, gt).map(|target_box| RegressionTarget {
        target_box,
        mode: TargetMode::Intersection,
    })
}

/// Absolute per-coordinate differences in `x1, y1, x2, y2` order.
pub fn coordinate_errors(pred: &BBox, target: &BBox) -> [f64; 4] {
    let p = pred.to_array();
    let t = target.to_array();
    std::array::from_fn(|i| (p[i] - t[i]).abs())
}

/// Sum over the four corner coordinates of `|pred - target|^t`.
pub fn intersection_loss(pred: &BBox, target: &BBox, loss: &LossSpec) -> f64 {
    let t = loss.norm.exponent();
    coordinate_errors(pred, target).iter().map(|d| d.powi(t)).sum()
}

/// L1 distance in center-size space, summed over matched pairs.
///
/// Coordinates are not normalized by box size.
pub fn refinement_loss(refined: &[BBox], gts: &[BBox]) -> Result<f64, LossError> {
    if refined.len() != gts.len() {
        return Err(LossError::LengthMismatch { refined: refined.len(), gts: gts.len() });
    }
    Ok(refined
        .iter()
        .zip(gts)
        .map(|(r, g)| {
            let r = r.to_xywh();
            let g = g.to_xywh();
            (0..4).map(|i| (r[i] - g[i]).abs()).sum::<f64>()
        })
        .sum())
}

pub fn total_loss(l_int: f64, l_ref: f64, loss: &LossSpec) -> f64 {
    l_int + loss.lambda * l_ref
}

/// `1 - variant(pred, target)`.
pub fn iou_regression_loss(pred: &BBox, target: &BBox, variant: IouVariant) -> f64 {
    1.0 - variant.score(pred, target)
}

/// Splits `gt` at its center into top-left, top-right, bottom-left and
/// bottom-right quadrants (image coordinates, y grows downward).
pub fn quadrant_partition(gt: &BBox) -> Result<[BBox; 4], GeometryError> {
    if gt.is_degenerate() {
        return Err(GeometryError::Degenerate(gt.to_array()));
    }
    let (cx, cy) = gt.center();
    let [x1, y1, x2, y2] = gt.to_array();
    Ok([
        BBox::new(x1, y1, cx, cy)?,
        BBox::new(cx, y1, x2, cy)?,
        BBox::new(x1, cy, cx, y2)?,
        BBox::new(cx, cy, x2, y2)?,
    ])
}

/// Index of the part with the highest IoU against `proposal`, lowest index
/// on ties. `None` only when `parts` is empty.
pub fn assign_to_part(proposal: &BBox, parts: &[BBox]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, part) in parts.iter().enumerate() {
        let v = iou(proposal, part);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Quadrant target for part-based regression, or `None` when the best
/// quadrant overlaps the proposal by less than `min_iou`.
pub fn part_target(proposal: &BBox, gt: &BBox, min_iou: f64) -> Result<Option<RegressionTarget>, GeometryError> {
    let parts = quadrant_partition(gt)?;
    let idx = assign_to_part(proposal, &parts).expect("four quadrants");
    if iou(proposal, &parts[idx]) < min_iou {
        return Ok(None);
    }
    Ok(Some(RegressionTarget { target_box: parts[idx], mode: TargetMode::QuadrantPart }))
}
