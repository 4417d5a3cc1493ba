//! Winner-takes-all suppression baselines: greedy NMS, Soft-NMS and
//! Cluster-NMS.
//!
//! All three are class-agnostic over the records they are given; the batch
//! driver in [`super::pipeline`] splits by image and class.

use serde::{Deserialize, Serialize};

use crate::geometry::iou;
use crate::records::{by_score_desc, score_order, BoxKey, ProposalRecord};

/// Greedy NMS. Returns kept indices in descending score order; a record is
/// suppressed when its IoU with an already kept record is `>= iou_thresh`.
pub fn greedy_nms(records: &[ProposalRecord], iou_thresh: f64, key: BoxKey) -> Vec<usize> {
    let order = score_order(records);
    let mut suppressed = vec![false; records.len()];
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        let kept = records[i].boxed(key);
        for &j in &order[pos + 1..] {
            if !suppressed[j] && iou(kept, records[j].boxed(key)) >= iou_thresh {
                suppressed[j] = true;
            }
        }
    }
    keep
}

/// Cluster-NMS: iterates the matrix form of suppression to its fixed point.
///
/// With `X` the upper-triangular IoU matrix in score order and `b` the keep
/// vector, each round sets `b_j = max_i(b_i * X_ij) < thresh` until `b` stops
/// changing. The fixed point is the greedy NMS keep set.
pub fn cluster_nms(records: &[ProposalRecord], iou_thresh: f64, key: BoxKey) -> Vec<usize> {
    let order = score_order(records);
    let n = order.len();
    if n == 0 {
        return Vec::new();
    }
    // row-major upper triangle, row i holds columns i+1..n
    let mut overlaps = vec![0.0f64; n * n];
    for a in 0..n {
        let ba = records[order[a]].boxed(key);
        for b in (a + 1)..n {
            overlaps[a * n + b] = iou(ba, records[order[b]].boxed(key));
        }
    }

    let mut keep = vec![true; n];
    for _ in 0..=n {
        let next: Vec<bool> = (0..n)
            .map(|col| {
                let max = (0..col)
                    .filter(|&row| keep[row])
                    .map(|row| overlaps[row * n + col])
                    .fold(0.0f64, f64::max);
                max < iou_thresh
            })
            .collect();
        if next == keep {
            break;
        }
        keep = next;
    }
    (0..n).filter(|&p| keep[p]).map(|p| order[p]).collect()
}

/// Score decay applied by [`soft_nms`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SoftNmsMode {
    /// `s *= 1 - iou` when `iou >= iou_thresh`.
    Linear { iou_thresh: f64 },
    /// `s *= exp(-iou^2 / sigma)`.
    Gaussian { sigma: f64 },
}

impl SoftNmsMode {
    fn decay(self, overlap: f64) -> f64 {
        match self {
            SoftNmsMode::Linear { iou_thresh } => {
                if overlap >= iou_thresh {
                    1.0 - overlap
                } else {
                    1.0
                }
            }
            SoftNmsMode::Gaussian { sigma } => (-(overlap * overlap) / sigma).exp(),
        }
    }
}

/// Soft-NMS. Every record is rescored; those ending at or above
/// `score_floor` are returned as `(index, new_score)` in selection order.
pub fn soft_nms(
    records: &[ProposalRecord],
    mode: SoftNmsMode,
    score_floor: f64,
    key: BoxKey,
) -> Vec<(usize, f64)> {
    let mut scores: Vec<f64> = records.iter().map(|r| r.score).collect();
    let mut remaining: Vec<usize> = (0..records.len()).collect();
    let mut selected = Vec::with_capacity(records.len());

    while !remaining.is_empty() {
        let pos = (0..remaining.len())
            .min_by(|&a, &b| {
                by_score_desc((remaining[a], scores[remaining[a]]), (remaining[b], scores[remaining[b]]))
            })
            .expect("non-empty");
        let top = remaining.swap_remove(pos);
        selected.push((top, scores[top]));
        let top_box = records[top].boxed(key);
        for &j in &remaining {
            scores[j] *= mode.decay(iou(top_box, records[j].boxed(key)));
        }
    }

    selected.retain(|&(_, s)| s >= score_floor);
    selected
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use proptest::prelude::*;

    fn rec(b: [f64; 4], score: f64) -> ProposalRecord {
        let bbox = BBox::from_array(b).unwrap();
        ProposalRecord { proposal: bbox, regressed: bbox, score, class_id: 0, image_id: 0 }
    }

    /// Reference suppression: a box survives iff no higher-ranked survivor
    /// overlaps it. Decided rank by rank with full rescans.
    fn reference_nms(records: &[ProposalRecord], thresh: f64) -> Vec<usize> {
        let n = records.len();
        let ranks_above = |i: usize, j: usize| {
            records[j].score > records[i].score || (records[j].score == records[i].score && j < i)
        };
        let mut survivors: Vec<usize> = Vec::new();
        let mut decided = vec![false; n];
        for _ in 0..n {
            let next = (0..n)
                .filter(|&i| !decided[i])
                .find(|&i| (0..n).all(|j| decided[j] || j == i || !ranks_above(i, j)))
                .unwrap();
            decided[next] = true;
            let hit = survivors
                .iter()
                .any(|&s| iou(&records[s].proposal, &records[next].proposal) >= thresh);
            if !hit {
                survivors.push(next);
            }
        }
        survivors
    }

    #[test]
    fn duplicate_is_suppressed() {
        let r = [rec([0., 0., 10., 10.], 0.8), rec([0., 0., 10., 10.], 0.9)];
        assert_eq!(greedy_nms(&r, 0.5, BoxKey::Proposal), vec![1]);
        assert_eq!(cluster_nms(&r, 0.5, BoxKey::Proposal), vec![1]);
    }

    #[test]
    fn disjoint_boxes_survive() {
        let r = [rec([0., 0., 10., 10.], 0.8), rec([20., 20., 30., 30.], 0.9)];
        assert_eq!(greedy_nms(&r, 0.5, BoxKey::Proposal), vec![1, 0]);
    }

    #[test]
    fn cluster_nms_trivial_inputs() {
        assert!(cluster_nms(&[], 0.5, BoxKey::Proposal).is_empty());
        assert_eq!(cluster_nms(&[rec([0., 0., 1., 1.], 0.3)], 0.5, BoxKey::Proposal), vec![0]);
    }

    #[test]
    fn cluster_nms_needs_several_rounds_on_chains() {
        // A suppresses B, so B must not suppress C: one-shot matrix NMS
        // would drop C, the fixed point keeps it.
        let r = [
            rec([0., 0., 10., 10.], 0.9),
            rec([3., 0., 13., 10.], 0.8),
            rec([6., 0., 16., 10.], 0.7),
        ];
        let greedy = greedy_nms(&r, 0.5, BoxKey::Proposal);
        assert_eq!(greedy, vec![0, 2]);
        assert_eq!(cluster_nms(&r, 0.5, BoxKey::Proposal), greedy);
    }

    #[test]
    fn key_selects_box_field() {
        let a = BBox::new(0., 0., 10., 10.).unwrap();
        let far = BBox::new(50., 50., 60., 60.).unwrap();
        let r = [
            ProposalRecord { proposal: a, regressed: a, score: 0.9, class_id: 0, image_id: 0 },
            ProposalRecord { proposal: a, regressed: far, score: 0.8, class_id: 0, image_id: 0 },
        ];
        assert_eq!(greedy_nms(&r, 0.5, BoxKey::Proposal), vec![0]);
        assert_eq!(greedy_nms(&r, 0.5, BoxKey::Regressed), vec![0, 1]);
    }

    #[test]
    fn soft_nms_leaves_disjoint_scores() {
        let r = [rec([0., 0., 10., 10.], 0.7), rec([20., 20., 30., 30.], 0.9)];
        let out = soft_nms(&r, SoftNmsMode::Gaussian { sigma: 0.5 }, 0.0, BoxKey::Regressed);
        assert_eq!(out, vec![(1, 0.9), (0, 0.7)]);
    }

    #[test]
    fn soft_nms_gaussian_duplicate() {
        let r = [rec([0., 0., 10., 10.], 0.9), rec([0., 0., 10., 10.], 0.8)];
        let sigma = 0.5;
        let out = soft_nms(&r, SoftNmsMode::Gaussian { sigma }, 0.0, BoxKey::Regressed);
        assert_eq!(out[0], (0, 0.9));
        assert_eq!(out[1].0, 1);
        assert!((out[1].1 - 0.8 * (-1.0f64 / sigma).exp()).abs() < 1e-15);
    }

    #[test]
    fn soft_nms_floor_filters_after_rescoring() {
        let r = [rec([0., 0., 10., 10.], 0.9), rec([0., 0., 10., 10.], 0.8)];
        let out = soft_nms(&r, SoftNmsMode::Linear { iou_thresh: 0.3 }, 0.05, BoxKey::Regressed);
        assert_eq!(out, vec![(0, 0.9)]);
    }

    /// Ten boxes checked against a pick-by-pick replay and frozen values.
    #[test]
    fn soft_nms_ten_box_trace() {
        let r = ten_boxes();
        let got = soft_nms(&r, SoftNmsMode::Gaussian { sigma: 0.5 }, 0.0, BoxKey::Regressed);
        let want = soft_nms_trace(&r, 0.5);
        assert_eq!(got.len(), want.len());
        for ((gi, gs), (wi, ws)) in got.iter().zip(&want) {
            assert_eq!(gi, wi);
            assert!((gs - ws).abs() < 1e-12);
        }
        let order: Vec<usize> = got.iter().map(|p| p.0).collect();
        assert_eq!(order, FROZEN_ORDER);
        for ((_, s), w) in got.iter().zip(FROZEN_SCORES) {
            assert!((s - w).abs() < 1e-9, "{s} vs {w}");
        }
    }

    fn ten_boxes() -> Vec<ProposalRecord> {
        vec![
            rec([0., 0., 10., 10.], 0.95),
            rec([1., 1., 11., 11.], 0.90),
            rec([2., 0., 12., 10.], 0.85),
            rec([20., 20., 30., 30.], 0.80),
            rec([21., 19., 31., 29.], 0.75),
            rec([0., 0., 5., 5.], 0.70),
            rec([40., 0., 50., 10.], 0.65),
            rec([22., 22., 32., 32.], 0.60),
            rec([5., 5., 15., 15.], 0.55),
            rec([41., 1., 49., 9.], 0.50),
        ]
    }

    /// Straight transcription of the decay rule: after every pick, multiply
    /// each unpicked score by `exp(-iou^2 / sigma)` with the picked box.
    fn soft_nms_trace(r: &[ProposalRecord], sigma: f64) -> Vec<(usize, f64)> {
        let mut s: Vec<f64> = r.iter().map(|x| x.score).collect();
        let mut picked = vec![false; r.len()];
        let mut out = vec![];
        for _ in 0..r.len() {
            let mut best = usize::MAX;
            for i in 0..r.len() {
                if !picked[i] && (best == usize::MAX || s[i] > s[best]) {
                    best = i;
                }
            }
            picked[best] = true;
            out.push((best, s[best]));
            for i in 0..r.len() {
                if !picked[i] {
                    let o = iou(&r[best].regressed, &r[i].regressed);
                    s[i] *= (-(o * o) / sigma).exp();
                }
            }
        }
        out
    }

    // Computed once with an independent script and frozen.
    const FROZEN_ORDER: [usize; 10] = [0, 3, 6, 5, 8, 7, 1, 9, 4, 2];
    const FROZEN_SCORES: [f64; 10] = [
        0.95, 0.80, 0.65, 0.6177478318, 0.5280029927, 0.3853003195, 0.3099156193, 0.2203920704,
        0.1945155876, 0.1218190912,
    ];

    fn arb_records() -> impl Strategy<Value = Vec<ProposalRecord>> {
        prop::collection::vec(
            (0.0..60.0f64, 0.0..60.0f64, 1.0..25.0f64, 1.0..25.0f64, 0.0..1.0f64),
            0..40,
        )
        .prop_map(|v| v.into_iter().map(|(x, y, w, h, s)| rec([x, y, x + w, y + h], s)).collect())
    }

    proptest! {
        #[test]
        fn greedy_matches_reference_and_cluster(r in arb_records(), t in 0.1..0.9f64) {
            let g = greedy_nms(&r, t, BoxKey::Proposal);
            prop_assert_eq!(&g, &reference_nms(&r, t));
            prop_assert_eq!(&g, &cluster_nms(&r, t, BoxKey::Proposal));
            for (a, &i) in g.iter().enumerate() {
                for &j in &g[a + 1..] {
                    prop_assert!(iou(&r[i].proposal, &r[j].proposal) < t);
                }
            }
        }

        #[test]
        fn soft_nms_never_raises_scores(r in arb_records(), sigma in 0.1..2.0f64) {
            let out = soft_nms(&r, SoftNmsMode::Gaussian { sigma }, 0.0, BoxKey::Regressed);
            prop_assert_eq!(out.len(), r.len());
            for (i, s) in out {
                prop_assert!(s <= r[i].score);
            }
        }
    }
}
