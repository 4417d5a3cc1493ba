//! Scene generation and the oracle regressor/classifier models.
//!
//! Every random quantity a scene needs (boxes, scores, class draws and the
//! four standard-normal regression draws per proposal) is sampled once per
//! scene from a stream keyed by `(rng_seed, scene_index)`. Pipelines that
//! differ only in regressor mode therefore see identical proposals and
//! identical noise draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::config::{RegressorMode, SimConfig};
use crate::error::SimError;
use crate::geometry::{intersect, iou, BBox};
use crate::records::{GroundTruth, ProposalRecord};

/// Rejection-sampling budget per proposal.
pub const MAX_PROPOSAL_ATTEMPTS: usize = 10_000;

const STREAM_SCENE: u64 = 0;
pub(crate) const STREAM_REFINE: u64 = 1;
const STREAMS_PER_SCENE: u64 = 4;

/// Independent stream `stream` of scene `scene_index`.
pub(crate) fn scene_rng(seed: u64, scene_index: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(scene_index as u64 * STREAMS_PER_SCENE + stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub index: usize,
    pub gts: Vec<GroundTruth>,
    /// Image id is the scene index; `regressed` follows the generating
    /// config's effective regressor mode.
    pub proposals: Vec<ProposalRecord>,
    /// Index into `gts` of the object each proposal was drawn around.
    pub origins: Vec<usize>,
    /// Standard-normal draws behind each proposal's regression noise.
    pub noise: Vec<[f64; 4]>,
}

impl Scene {
    /// Recomputes every regressed box under `mode`.
    pub fn regress(&mut self, mode: RegressorMode, sigma0: f64, kappa: f64) -> Result<(), SimError> {
        for ((rec, &origin), z) in self.proposals.iter_mut().zip(&self.origins).zip(&self.noise) {
            rec.regressed = regress_with_noise(&rec.proposal, &self.gts[origin].bbox, mode, sigma0, kappa, z)?;
        }
        Ok(())
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        return lo;
    }
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn place_object<R: Rng + ?Sized>(rng: &mut R, config: &SimConfig, placed: &[BBox]) -> BBox {
    let [iw, ih] = config.image_size;
    let scale = log_uniform(rng, config.object_scale);
    let aspect = log_uniform(rng, config.aspect_ratio);
    let w = scale * aspect.sqrt();
    let h = scale / aspect.sqrt();
    let crowd = !placed.is_empty() && rng.random_bool(config.crowding);
    let (cx, cy) = if crowd {
        let anchor = placed[rng.random_range(0..placed.len())];
        let (ax, ay) = anchor.center();
        let spread_x = (anchor.width() + w) / 2.0;
        let spread_y = (anchor.height() + h) / 2.0;
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        (ax + dx * 0.6 * spread_x, ay + dy * 0.6 * spread_y)
    } else {
        (rng.random_range(0.0..=iw), rng.random_range(0.0..=ih))
    };
    let cx = cx.clamp(w / 2.0, iw - w / 2.0);
    let cy = cy.clamp(h / 2.0, ih - h / 2.0);
    BBox::from_center(cx, cy, w, h).expect("sizes are positive and finite")
}

/// Perturbs `gt` until the result's IoU with it lies in the configured band
/// (and is positive).
pub fn generate_proposals<R: Rng + ?Sized>(
    gt: &BBox,
    count: usize,
    config: &SimConfig,
    rng: &mut R,
) -> Result<Vec<BBox>, SimError> {
    let [lo, hi] = config.proposal_iou_band;
    let (cx, cy) = gt.center();
    let (w, h) = (gt.width(), gt.height());
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut found = None;
        for _ in 0..MAX_PROPOSAL_ATTEMPTS {
            let s = log_uniform(rng, [0.002, 0.8]);
            let jitter = Normal::new(0.0, s).expect("positive spread");
            let p = BBox::from_center(
                cx + jitter.sample(rng) * w,
                cy + jitter.sample(rng) * h,
                w * jitter.sample(rng).exp(),
                h * jitter.sample(rng).exp(),
            )?;
            let v = iou(&p, gt);
            if v > 0.0 && v >= lo && v <= hi {
                found = Some(p);
                break;
            }
        }
        out.push(found.ok_or(SimError::BandUnreachable { lo, hi, attempts: MAX_PROPOSAL_ATTEMPTS })?);
    }
    Ok(out)
}

/// Distance `value` lies outside `[lo, hi]`.
fn outside(value: f64, lo: f64, hi: f64) -> f64 {
    (value - value.clamp(lo, hi)).abs()
}

/// Per-coordinate distance the ground truth extends past the proposal.
pub fn extrapolation(proposal: &BBox, gt: &BBox) -> [f64; 4] {
    let p = proposal;
    [
        outside(gt.x1(), p.x1(), p.x2()),
        outside(gt.y1(), p.y1(), p.y2()),
        outside(gt.x2(), p.x1(), p.x2()),
        outside(gt.y2(), p.y1(), p.y2()),
    ]
}

/// Oracle regressor with the standard-normal draws supplied.
///
/// Intersection mode targets `intersect(P, G)` with per-coordinate standard
/// deviation `sigma0 * sqrt(area(G))`. Full-box mode targets `G` and adds
/// `kappa` times the extrapolation distance of each coordinate.
pub fn regress_with_noise(
    proposal: &BBox,
    gt: &BBox,
    mode: RegressorMode,
    sigma0: f64,
    kappa: f64,
    z: &[f64; 4],
) -> Result<BBox, SimError> {
    let inter = intersect(proposal, gt).ok_or(SimError::Disjoint)?;
    let scale = gt.area().sqrt();
    let (target, extra) = match mode {
        RegressorMode::Intersection => (inter.to_array(), [0.0; 4]),
        RegressorMode::FullBox => (gt.to_array(), extrapolation(proposal, gt).map(|d| kappa * d)),
    };
    let c: [f64; 4] = std::array::from_fn(|i| target[i] + (sigma0 * scale + extra[i]) * z[i]);
    Ok(BBox::from_unordered(c[0], c[1], c[2], c[3])?)
}

/// Draws fresh noise and regresses one proposal.
pub fn oracle_regress<R: Rng + ?Sized>(
    proposal: &BBox,
    gt: &BBox,
    mode: RegressorMode,
    sigma0: f64,
    kappa: f64,
    rng: &mut R,
) -> Result<BBox, SimError> {
    let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    regress_with_noise(proposal, gt, mode, sigma0, kappa, &z)
}

/// True class with probability `accuracy`, otherwise a uniformly chosen
/// wrong class. Always consumes the same number of draws.
pub fn oracle_classify<R: Rng + ?Sized>(true_class: u32, n_classes: u32, accuracy: f64, rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    let offset = if n_classes > 1 { rng.random_range(1..n_classes) } else { 0 };
    if u < accuracy {
        true_class
    } else {
        (true_class + offset) % n_classes
    }
}

/// Builds scene `scene_index`. Identical for identical `(config, index)`.
pub fn generate_scene(config: &SimConfig, scene_index: usize) -> Result<Scene, SimError> {
    config.validate()?;
    let mut rng = scene_rng(config.rng_seed, scene_index, STREAM_SCENE);
    let image_id = scene_index as u64;

    let [omin, omax] = config.objects_per_scene;
    let n_objects = rng.random_range(omin..=omax);
    let mut boxes: Vec<BBox> = Vec::with_capacity(n_objects);
    let mut gts = Vec::with_capacity(n_objects);
    for instance in 0..n_objects {
        let bbox = place_object(&mut rng, config, &boxes);
        boxes.push(bbox);
        gts.push(GroundTruth {
            bbox,
            class_id: rng.random_range(0..config.n_classes),
            image_id,
            instance_id: instance as u64,
        });
    }

    let mode = config.effective_mode();
    let score_jitter = Normal::new(0.0, config.score_noise).expect("validated noise");
    let [pmin, pmax] = config.proposals_per_object;
    let mut scene = Scene { index: scene_index, gts, proposals: vec![], origins: vec![], noise: vec![] };
    for (g, gt) in boxes.iter().enumerate() {
        let count = rng.random_range(pmin..=pmax);
        for proposal in generate_proposals(gt, count, config, &mut rng)? {
            let score = (iou(&proposal, gt) + score_jitter.sample(&mut rng)).clamp(0.0, 1.0);
            let class_id =
                oracle_classify(scene.gts[g].class_id, config.n_classes, config.classifier_accuracy, &mut rng);
            let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let regressed = regress_with_noise(&proposal, gt, mode, config.sigma0, config.kappa, &z)?;
            scene.proposals.push(ProposalRecord { proposal, regressed, score, class_id, image_id });
            scene.origins.push(g);
            scene.noise.push(z);
        }
    }
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn small() -> SimConfig {
        SimConfig { n_scenes: 5, ..SimConfig::default() }
    }

    #[test]
    fn scenes_are_deterministic() {
        let cfg = small();
        assert_eq!(generate_scene(&cfg, 3).unwrap(), generate_scene(&cfg, 3).unwrap());
        assert_ne!(generate_scene(&cfg, 3).unwrap(), generate_scene(&cfg, 4).unwrap());
        let other = SimConfig { rng_seed: 8, ..small() };
        assert_ne!(generate_scene(&cfg, 3).unwrap(), generate_scene(&other, 3).unwrap());
    }

    #[test]
    fn zero_objects_give_empty_scene() {
        let cfg = SimConfig { objects_per_scene: [0, 0], ..small() };
        let s = generate_scene(&cfg, 0).unwrap();
        assert!(s.gts.is_empty() && s.proposals.is_empty());
    }

    #[test]
    fn objects_stay_inside_image() {
        let cfg = SimConfig { crowding: 0.8, ..small() };
        let frame = b(0., 0., 640., 480.);
        for i in 0..50 {
            for g in generate_scene(&cfg, i).unwrap().gts {
                assert!(frame.contains(&g.bbox), "{}", g.bbox);
            }
        }
    }

    #[test]
    fn proposals_respect_band() {
        let gt = b(100., 100., 180., 160.);
        let mut rng = scene_rng(1, 0, 0);
        for band in [[0.5, 0.7], [0.3, 0.5], [0.99, 1.0]] {
            let cfg = SimConfig { proposal_iou_band: band, ..small() };
            for p in generate_proposals(&gt, 200, &cfg, &mut rng).unwrap() {
                let v = iou(&p, &gt);
                assert!(v >= band[0] && v <= band[1], "{v} outside {band:?}");
            }
        }
    }

    #[test]
    fn unreachable_band_is_an_error() {
        let cfg = SimConfig { proposal_iou_band: [0.9999999, 1.0], ..small() };
        let mut rng = scene_rng(1, 0, 0);
        let err = generate_proposals(&b(0., 0., 50., 50.), 1, &cfg, &mut rng).unwrap_err();
        assert!(matches!(err, SimError::BandUnreachable { .. }));
    }

    #[test]
    fn noiseless_oracles_hit_their_targets() {
        let p = b(0., 0., 10., 10.);
        let g = b(5., 5., 15., 15.);
        let mut rng = scene_rng(1, 0, 0);
        let i = oracle_regress(&p, &g, RegressorMode::Intersection, 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(i, b(5., 5., 10., 10.));
        let f = oracle_regress(&p, &g, RegressorMode::FullBox, 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(f, g);
        assert!(matches!(
            oracle_regress(&p, &b(20., 20., 30., 30.), RegressorMode::FullBox, 0.0, 0.0, &mut rng),
            Err(SimError::Disjoint)
        ));
    }

    #[test]
    fn modes_coincide_when_proposal_covers_gt() {
        let p = b(0., 0., 20., 20.);
        let g = b(5., 5., 15., 15.);
        assert_eq!(extrapolation(&p, &g), [0.0; 4]);
        let z = [0.3, -1.2, 0.7, 2.0];
        let a = regress_with_noise(&p, &g, RegressorMode::Intersection, 0.05, 0.5, &z).unwrap();
        let f = regress_with_noise(&p, &g, RegressorMode::FullBox, 0.05, 0.5, &z).unwrap();
        assert_eq!(a, f);
    }

    #[test]
    fn extrapolation_distances() {
        let p = b(0., 0., 10., 10.);
        let g = b(-3., 2., 14., 9.);
        assert_eq!(extrapolation(&p, &g), [3.0, 0.0, 4.0, 0.0]);
    }

    #[test]
    fn classifier_extremes() {
        let mut rng = scene_rng(2, 0, 0);
        for _ in 0..500 {
            assert_eq!(oracle_classify(3, 5, 1.0, &mut rng), 3);
            assert_eq!(oracle_classify(1, 2, 0.0, &mut rng), 0);
            assert_ne!(oracle_classify(4, 5, 0.0, &mut rng), 4);
        }
    }

    #[test]
    fn classifier_rate_is_binomial() {
        let mut rng = scene_rng(3, 0, 0);
        let n = 10_000;
        let hits = (0..n).filter(|_| oracle_classify(0, 5, 0.8, &mut rng) == 0).count();
        let rate = hits as f64 / n as f64;
        // 0.02 is about five binomial standard errors
        assert!((rate - 0.8).abs() <= 0.02, "{rate}");
    }

    #[test]
    fn regress_recomputes_under_new_mode() {
        let cfg = SimConfig { sigma0: 0.0, kappa: 0.0, ..small() };
        let mut s = generate_scene(&cfg, 1).unwrap();
        s.regress(RegressorMode::FullBox, 0.0, 0.0).unwrap();
        for (r, &o) in s.proposals.iter().zip(&s.origins) {
            assert_eq!(r.regressed, s.gts[o].bbox);
        }
    }
}
