//! Detection metrics: greedy matching, 101-point interpolated AP over the
//! COCO threshold ladder and size buckets, optimal LRP, and the
//! localization/classification split.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::geometry::{area, iou};
use crate::records::{by_score_desc, Detection, GroundTruth};

/// Upper bound (exclusive) of the small bucket: 32² px.
pub const SMALL_AREA: f64 = 32.0 * 32.0;
/// Upper bound (exclusive) of the medium bucket: 96² px.
pub const MEDIUM_AREA: f64 = 96.0 * 96.0;

/// `0.50, 0.55, ..., 0.95`.
pub fn coco_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchResult {
    /// `(detection index, gt index, iou)`.
    pub tp_pairs: Vec<(usize, usize, f64)>,
    pub fp_indices: Vec<usize>,
    pub fn_gt_indices: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Outcome {
    Tp { gt: usize, iou: f64 },
    Fp,
    Ignored,
}

#[derive(Clone, Copy)]
struct AreaRange {
    lo: f64,
    hi: f64,
}

impl AreaRange {
    const ALL: AreaRange = AreaRange { lo: 0.0, hi: f64::INFINITY };

    fn contains(self, a: f64) -> bool {
        a >= self.lo && a < self.hi
    }
}

fn det_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| by_score_desc((a, dets[a].score), (b, dets[b].score)));
    order
}

/// Greedy matching in descending score order. Each detection takes the
/// unmatched gt (same image, and same class when `class_aware`) of highest
/// IoU `>= tau`, preferring gts inside `range`; a detection matched to an
/// out-of-range gt, or unmatched and itself out of range, is ignored.
fn greedy_match(
    dets: &[Detection],
    gts: &[GroundTruth],
    tau: f64,
    class_aware: bool,
    range: AreaRange,
) -> (Vec<Outcome>, Vec<bool>) {
    let mut by_key: HashMap<(u64, Option<u32>), Vec<usize>> = HashMap::new();
    for (g, gt) in gts.iter().enumerate() {
        by_key.entry((gt.image_id, class_aware.then_some(gt.class_id))).or_default().push(g);
    }
    let gt_ignored: Vec<bool> = gts.iter().map(|g| !range.contains(area(&g.bbox))).collect();
    let mut gt_taken = vec![false; gts.len()];
    let mut outcomes = vec![Outcome::Fp; dets.len()];

    for d in det_order(dets) {
        let det = &dets[d];
        let candidates = by_key
            .get(&(det.image_id, class_aware.then_some(det.class_id)))
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        // (ignored, -iou) ordering: any in-range match beats an ignored one
        let mut best: Option<(usize, f64)> = None;
        for &g in candidates {
            if gt_taken[g] {
                continue;
            }
            let v = iou(&det.bbox, &gts[g].bbox);
            if v < tau {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, bv)) => match (gt_ignored[b], gt_ignored[g]) {
                    (true, false) => true,
                    (false, true) => false,
                    _ => v > bv,
                },
            };
            if better {
                best = Some((g, v));
            }
        }
        outcomes[d] = match best {
            Some((g, v)) => {
                gt_taken[g] = true;
                if gt_ignored[g] {
                    Outcome::Ignored
                } else {
                    Outcome::Tp { gt: g, iou: v }
                }
            }
            None if !range.contains(area(&det.bbox)) => Outcome::Ignored,
            None => Outcome::Fp,
        };
    }
    (outcomes, gt_ignored)
}

fn collect_match(outcomes: &[Outcome], n_gts: usize) -> MatchResult {
    let mut res = MatchResult::default();
    let mut matched = vec![false; n_gts];
    for (d, o) in outcomes.iter().enumerate() {
        match *o {
            Outcome::Tp { gt, iou } => {
                matched[gt] = true;
                res.tp_pairs.push((d, gt, iou));
            }
            Outcome::Fp => res.fp_indices.push(d),
            Outcome::Ignored => {}
        }
    }
    res.fn_gt_indices = (0..n_gts).filter(|&g| !matched[g]).collect();
    res
}

/// Class-aware greedy matching at IoU threshold `tau`.
pub fn match_detections(dets: &[Detection], gts: &[GroundTruth], tau: f64) -> MatchResult {
    let (outcomes, _) = greedy_match(dets, gts, tau, true, AreaRange::ALL);
    collect_match(&outcomes, gts.len())
}

/// Same as [`match_detections`] but ignoring class ids.
pub fn match_class_agnostic(dets: &[Detection], gts: &[GroundTruth], tau: f64) -> MatchResult {
    let (outcomes, _) = greedy_match(dets, gts, tau, false, AreaRange::ALL);
    collect_match(&outcomes, gts.len())
}

fn classes_with_gts(gts: &[GroundTruth], ignored: &[bool]) -> BTreeSet<u32> {
    gts.iter().zip(ignored).filter(|(_, &ig)| !ig).map(|(g, _)| g.class_id).collect()
}

/// 101-point interpolated AP from TP flags in descending score order.
fn interpolated_ap(tp_flags: &[bool], n_pos: usize) -> f64 {
    let mut precision = Vec::with_capacity(tp_flags.len());
    let mut recall = Vec::with_capacity(tp_flags.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &hit in tp_flags {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        precision.push(tp as f64 / (tp + fp) as f64);
        recall.push(tp as f64 / n_pos as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut sum = 0.0;
    for step in 0..=100 {
        let r = step as f64 / 100.0;
        let i = recall.partition_point(|&x| x < r);
        if i < precision.len() {
            sum += precision[i];
        }
    }
    sum / 101.0
}

fn ap_in_range(dets: &[Detection], gts: &[GroundTruth], tau: f64, range: AreaRange) -> Option<f64> {
    let (outcomes, gt_ignored) = greedy_match(dets, gts, tau, true, range);
    let classes = classes_with_gts(gts, &gt_ignored);
    if classes.is_empty() {
        return None;
    }
    let order = det_order(dets);
    let total: f64 = classes
        .iter()
        .map(|&c| {
            let n_pos = gts
                .iter()
                .zip(&gt_ignored)
                .filter(|(g, &ig)| g.class_id == c && !ig)
                .count();
            let flags: Vec<bool> = order
                .iter()
                .filter(|&&d| dets[d].class_id == c)
                .filter_map(|&d| match outcomes[d] {
                    Outcome::Tp { .. } => Some(true),
                    Outcome::Fp => Some(false),
                    Outcome::Ignored => None,
                })
                .collect();
            interpolated_ap(&flags, n_pos)
        })
        .sum();
    Some(total / classes.len() as f64)
}

/// Class-averaged 101-point AP at one IoU threshold. Classes without
/// ground truth are left out; with no ground truth at all the result is 0.
pub fn average_precision(dets: &[Detection], gts: &[GroundTruth], tau: f64) -> f64 {
    ap_in_range(dets, gts, tau, AreaRange::ALL).unwrap_or(0.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ApBySize {
    /// `None` when no ground truth falls in the bucket.
    pub small: Option<f64>,
    pub medium: Option<f64>,
    pub large: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocoAp {
    pub map: f64,
    /// `(threshold, AP)` for each of [`coco_thresholds`].
    pub ap_at: Vec<(f64, f64)>,
    pub ap_size: ApBySize,
}

impl CocoAp {
    pub fn at(&self, tau: f64) -> Option<f64> {
        self.ap_at.iter().find(|(t, _)| (t - tau).abs() < 1e-9).map(|&(_, v)| v)
    }
}

fn mean_over_thresholds(dets: &[Detection], gts: &[GroundTruth], range: AreaRange) -> Option<f64> {
    let vals: Option<Vec<f64>> =
        coco_thresholds().iter().map(|&t| ap_in_range(dets, gts, t, range)).collect();
    vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// AP averaged over `0.50:0.05:0.95`, per threshold, and per size bucket
/// (buckets by gt box area, each also averaged over the ladder).
pub fn map_coco(dets: &[Detection], gts: &[GroundTruth]) -> CocoAp {
    let ap_at: Vec<(f64, f64)> =
        coco_thresholds().iter().map(|&t| (t, average_precision(dets, gts, t))).collect();
    let map = ap_at.iter().map(|p| p.1).sum::<f64>() / ap_at.len() as f64;
    let bucket = |lo, hi| mean_over_thresholds(dets, gts, AreaRange { lo, hi });
    CocoAp {
        map,
        ap_at,
        ap_size: ApBySize {
            small: bucket(0.0, SMALL_AREA),
            medium: bucket(SMALL_AREA, MEDIUM_AREA),
            large: bucket(MEDIUM_AREA, f64::INFINITY),
        },
    }
}

/// Optimal LRP and its components, class-averaged. All values in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lrp {
    pub lrp: f64,
    pub loc: f64,
    pub fp: f64,
    pub fn_: f64,
    /// Some class had no true positive at its optimal threshold, so its
    /// components were set to 1.
    pub loc_undefined: bool,
}

fn class_olrp(flags: &[(f64, Option<f64>)], n_pos: usize, tau: f64) -> Lrp {
    // flags: (score, Some(iou) for TP / None for FP), descending score
    let lrp_of = |ntp: usize, nfp: usize, loc_sum: f64| {
        let nfn = n_pos - ntp;
        (loc_sum + nfp as f64 + nfn as f64) / (ntp + nfp + nfn) as f64
    };
    // empty prefix: everything missed
    let mut best = (lrp_of(0, 0, 0.0), 0usize, 0usize, 0.0f64);
    let (mut ntp, mut nfp, mut loc_sum) = (0usize, 0usize, 0.0f64);
    for (i, &(score, hit)) in flags.iter().enumerate() {
        match hit {
            Some(v) => {
                ntp += 1;
                loc_sum += (1.0 - v) / (1.0 - tau);
            }
            None => nfp += 1,
        }
        let boundary = flags.get(i + 1).is_none_or(|next| next.0 != score);
        if boundary {
            let l = lrp_of(ntp, nfp, loc_sum);
            if l < best.0 {
                best = (l, ntp, nfp, loc_sum);
            }
        }
    }
    let (lrp, ntp, nfp, loc_sum) = best;
    if ntp == 0 {
        return Lrp { lrp, loc: 1.0, fp: 1.0, fn_: 1.0, loc_undefined: true };
    }
    Lrp {
        lrp,
        loc: loc_sum / ntp as f64,
        fp: nfp as f64 / (ntp + nfp) as f64,
        fn_: (n_pos - ntp) as f64 / n_pos as f64,
        loc_undefined: false,
    }
}

/// Optimal LRP: per class, the score threshold minimizing
/// `(sum_TP (1 - IoU)/(1 - tau) + |FP| + |FN|) / (|TP| + |FP| + |FN|)`,
/// then averaged over classes that have ground truth.
pub fn lrp(dets: &[Detection], gts: &[GroundTruth], tau: f64) -> Lrp {
    let (outcomes, gt_ignored) = greedy_match(dets, gts, tau, true, AreaRange::ALL);
    let classes = classes_with_gts(gts, &gt_ignored);
    if classes.is_empty() {
        return Lrp { lrp: 1.0, loc: 1.0, fp: 1.0, fn_: 1.0, loc_undefined: true };
    }
    let order = det_order(dets);
    let per_class: Vec<Lrp> = classes
        .iter()
        .map(|&c| {
            let n_pos = gts.iter().filter(|g| g.class_id == c).count();
            let flags: Vec<(f64, Option<f64>)> = order
                .iter()
                .filter(|&&d| dets[d].class_id == c)
                .map(|&d| match outcomes[d] {
                    Outcome::Tp { iou, .. } => (dets[d].score, Some(iou)),
                    _ => (dets[d].score, None),
                })
                .collect();
            class_olrp(&flags, n_pos, tau)
        })
        .collect();
    let n = per_class.len() as f64;
    let mean = |f: fn(&Lrp) -> f64| per_class.iter().map(f).sum::<f64>() / n;
    Lrp {
        lrp: mean(|l| l.lrp),
        loc: mean(|l| l.loc),
        fp: mean(|l| l.fp),
        fn_: mean(|l| l.fn_),
        loc_undefined: per_class.iter().any(|l| l.loc_undefined),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    /// Mean IoU over class-agnostic matches.
    pub miou: f64,
    /// Fraction of class-agnostic matches whose class is right.
    pub cls_acc: f64,
    pub n_matches: usize,
    /// No match at all; both values are reported as 0.
    pub empty: bool,
}

pub fn localization_report(dets: &[Detection], gts: &[GroundTruth], tau: f64) -> LocalizationReport {
    let m = match_class_agnostic(dets, gts, tau);
    if m.tp_pairs.is_empty() {
        return LocalizationReport { miou: 0.0, cls_acc: 0.0, n_matches: 0, empty: true };
    }
    let n = m.tp_pairs.len() as f64;
    let miou = m.tp_pairs.iter().map(|p| p.2).sum::<f64>() / n;
    let correct = m.tp_pairs.iter().filter(|&&(d, g, _)| dets[d].class_id == gts[g].class_id).count();
    LocalizationReport { miou, cls_acc: correct as f64 / n, n_matches: m.tp_pairs.len(), empty: false }
}

pub fn localization_miou(dets: &[Detection], gts: &[GroundTruth], tau: f64) -> f64 {
    localization_report(dets, gts, tau).miou
}

pub fn classification_accuracy(dets: &[Detection], gts: &[GroundTruth], tau: f64) -> f64 {
    localization_report(dets, gts, tau).cls_acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub map: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub ap_at: Vec<(f64, f64)>,
    pub ap_size: ApBySize,
    pub lrp: f64,
    pub lrp_loc: f64,
    pub lrp_fp: f64,
    pub lrp_fn: f64,
    pub lrp_loc_undefined: bool,
    pub loc_miou: f64,
    pub cls_acc: f64,
    pub no_matches: bool,
}

/// Every metric in one pass. `tau` applies to LRP and the
/// localization/classification split; AP uses the COCO ladder.
pub fn evaluate(dets: &[Detection], gts: &[GroundTruth], tau: f64) -> MetricReport {
    let coco = map_coco(dets, gts);
    let l = lrp(dets, gts, tau);
    let loc = localization_report(dets, gts, tau);
    MetricReport {
        map: coco.map,
        ap50: coco.at(0.5).unwrap_or(0.0),
        ap75: coco.at(0.75).unwrap_or(0.0),
        ap_at: coco.ap_at,
        ap_size: coco.ap_size,
        lrp: l.lrp,
        lrp_loc: l.loc,
        lrp_fp: l.fp,
        lrp_fn: l.fn_,
        lrp_loc_undefined: l.loc_undefined,
        loc_miou: loc.miou,
        cls_acc: loc.cls_acc,
        no_matches: loc.empty,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    fn gt(img: u64, inst: u64, class: u32, b: [f64; 4]) -> GroundTruth {
        GroundTruth { bbox: BBox::from_array(b).unwrap(), class_id: class, image_id: img, instance_id: inst }
    }

    fn det(img: u64, class: u32, b: [f64; 4], score: f64) -> Detection {
        Detection { bbox: BBox::from_array(b).unwrap(), score, class_id: class, image_id: img, source: 0 }
    }

    #[test]
    fn thresholds_are_exact() {
        let t = coco_thresholds();
        assert_eq!(t[0], 0.5);
        assert_eq!(t[5], 0.75);
        assert_eq!(t[9], 0.95);
    }

    #[test]
    fn match_examples() {
        let g = [gt(0, 0, 0, [0., 0., 10., 10.])];
        let m = match_detections(&[det(0, 0, [0., 0., 10., 10.], 0.9)], &g, 0.5);
        assert_eq!(m.tp_pairs, vec![(0, 0, 1.0)]);
        assert!(m.fp_indices.is_empty() && m.fn_gt_indices.is_empty());

        let two = [det(0, 0, [0., 0., 10., 10.], 0.9), det(0, 0, [0., 0., 10., 10.], 0.8)];
        let m = match_detections(&two, &g, 0.5);
        assert_eq!(m.tp_pairs.len(), 1);
        assert_eq!(m.fp_indices, vec![1]);

        // IoU 0.4
        let m = match_detections(&[det(0, 0, [0., 0., 4., 10.], 0.9)], &g, 0.5);
        assert!(m.tp_pairs.is_empty());
        assert_eq!(m.fp_indices, vec![0]);
        assert_eq!(m.fn_gt_indices, vec![0]);
    }

    #[test]
    fn matching_respects_class_and_image() {
        let g = [gt(0, 0, 0, [0., 0., 10., 10.])];
        assert!(match_detections(&[det(0, 1, [0., 0., 10., 10.], 0.9)], &g, 0.5).tp_pairs.is_empty());
        assert!(match_detections(&[det(1, 0, [0., 0., 10., 10.], 0.9)], &g, 0.5).tp_pairs.is_empty());
        assert_eq!(match_class_agnostic(&[det(0, 1, [0., 0., 10., 10.], 0.9)], &g, 0.5).tp_pairs.len(), 1);
    }

    #[test]
    fn higher_score_matches_first() {
        let g = [gt(0, 0, 0, [0., 0., 10., 10.])];
        let d = [det(0, 0, [0., 0., 10., 10.], 0.3), det(0, 0, [1., 0., 10., 10.], 0.9)];
        let m = match_detections(&d, &g, 0.5);
        assert_eq!(m.tp_pairs[0].0, 1);
        assert_eq!(m.fp_indices, vec![0]);
    }

    #[test]
    fn ap_perfect_and_empty() {
        let g = [gt(0, 0, 0, [0., 0., 10., 10.]), gt(0, 1, 1, [20., 20., 50., 60.])];
        let d: Vec<_> = g.iter().map(|x| det(0, x.class_id, x.bbox.to_array(), 1.0)).collect();
        assert_eq!(average_precision(&d, &g, 0.5), 1.0);
        assert_eq!(average_precision(&[], &g, 0.5), 0.0);
        let c = map_coco(&d, &g);
        assert_eq!(c.map, 1.0);
        assert!(c.ap_at.iter().all(|p| p.1 == 1.0));
        assert_eq!(c.ap_size.small, Some(1.0));
        assert_eq!(c.ap_size.medium, Some(1.0));
        assert_eq!(c.ap_size.large, None);
        let e = map_coco(&[], &g);
        assert_eq!(e.map, 0.0);
        assert_eq!(e.ap_size.small, Some(0.0));
    }

    #[test]
    fn class_without_gt_is_excluded() {
        let g = [gt(0, 0, 0, [0., 0., 10., 10.])];
        let d = [det(0, 0, [0., 0., 10., 10.], 0.9), det(0, 5, [30., 30., 40., 40.], 0.95)];
        assert_eq!(average_precision(&d, &g, 0.5), 1.0);
    }

    #[test]
    fn lrp_examples() {
        let g = [gt(0, 0, 0, [0., 0., 10., 10.])];
        let perfect = lrp(&[det(0, 0, [0., 0., 10., 10.], 1.0)], &g, 0.5);
        assert_eq!((perfect.lrp, perfect.loc, perfect.fp, perfect.fn_), (0.0, 0.0, 0.0, 0.0));

        // IoU 0.75
        let l = lrp(&[det(0, 0, [0., 0., 7.5, 10.], 1.0)], &g, 0.5);
        assert!((l.loc - 0.5).abs() < 1e-12);
        assert!((l.lrp - 0.5).abs() < 1e-12);
        assert_eq!((l.fp, l.fn_), (0.0, 0.0));

        let none = lrp(&[], &g, 0.5);
        assert_eq!(none.lrp, 1.0);
        assert!(none.loc_undefined);
    }

    #[test]
    fn olrp_drops_low_scoring_false_positives() {
        let g = [gt(0, 0, 0, [0., 0., 10., 10.])];
        let d = [det(0, 0, [0., 0., 10., 10.], 0.9), det(0, 0, [50., 50., 60., 60.], 0.1)];
        let l = lrp(&d, &g, 0.5);
        assert_eq!(l.lrp, 0.0);
        assert_eq!(l.fp, 0.0);
    }

    #[test]
    fn localization_examples() {
        let g = [gt(0, 0, 0, [0., 0., 10., 10.]), gt(0, 1, 0, [100., 0., 110., 10.])];
        let exact: Vec<_> = g.iter().map(|x| det(0, 0, x.bbox.to_array(), 0.9)).collect();
        let r = localization_report(&exact, &g, 0.5);
        assert_eq!((r.miou, r.cls_acc), (1.0, 1.0));

        // IoU 0.6 and 0.8, second one misclassified
        let d = [det(0, 0, [0., 0., 6., 10.], 0.9), det(0, 3, [100., 0., 108., 10.], 0.8)];
        let r = localization_report(&d, &g, 0.5);
        assert!((r.miou - 0.7).abs() < 1e-12);
        assert_eq!(r.cls_acc, 0.5);

        let r = localization_report(&[], &g, 0.5);
        assert!(r.empty);
        assert_eq!((r.miou, r.cls_acc), (0.0, 0.0));
    }

    #[test]
    fn size_bucket_ignores_out_of_range() {
        // one small gt detected, one large gt missed: small AP 1, large AP 0
        let g = [gt(0, 0, 0, [0., 0., 10., 10.]), gt(0, 1, 0, [100., 100., 300., 300.])];
        let d = [det(0, 0, [0., 0., 10., 10.], 0.9)];
        let c = map_coco(&d, &g);
        assert_eq!(c.ap_size.small, Some(1.0));
        assert_eq!(c.ap_size.large, Some(0.0));
        assert_eq!(c.ap_size.medium, None);
    }
}
