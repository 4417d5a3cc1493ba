use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::grouping::PostprocessConfig;

/// How the oracle regressor picks its target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressorMode {
    /// Regress to `intersect(P, G)`.
    Intersection,
    /// Regress to `G`, with noise growing with the distance `G` extends
    /// past `P`.
    FullBox,
}

/// Regressor mode, or `Auto` to follow the pipeline: intersection for UoI,
/// full box for the others.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressorChoice {
    #[default]
    Auto,
    Intersection,
    FullBox,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    /// Group on proposals, keep the seed's regressed box.
    #[serde(alias = "winner-takes-all")]
    Wta,
    /// Group on proposals, union of the members' regressed boxes.
    #[default]
    Uoi,
    /// Group on proposals, score-weighted mean of the members' boxes.
    #[serde(alias = "box-voting")]
    Voting,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Wta => "wta",
            Pipeline::Uoi => "uoi",
            Pipeline::Voting => "voting",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "wta" | "winner-takes-all" => Some(Pipeline::Wta),
            "uoi" => Some(Pipeline::Uoi),
            "voting" | "box-voting" => Some(Pipeline::Voting),
            _ => None,
        }
    }
}

impl RegressorChoice {
    pub fn resolve(self, pipeline: Pipeline) -> RegressorMode {
        match (self, pipeline) {
            (RegressorChoice::Intersection, _) => RegressorMode::Intersection,
            (RegressorChoice::FullBox, _) => RegressorMode::FullBox,
            (RegressorChoice::Auto, Pipeline::Uoi) => RegressorMode::Intersection,
            (RegressorChoice::Auto, _) => RegressorMode::FullBox,
        }
    }
}

/// Everything that determines a simulation run.
///
/// The full-box noise gain `kappa` encodes a modeling assumption: regressing
/// past the proposal's visible extent is harder than regressing inside it.
/// None of the post-processing code depends on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub rng_seed: u64,
    pub n_scenes: usize,
    /// Inclusive range.
    pub objects_per_scene: [usize; 2],
    /// Width and height in pixels.
    pub image_size: [f64; 2],
    /// Range of `sqrt(area)` for ground-truth boxes, sampled log-uniformly.
    pub object_scale: [f64; 2],
    /// Range of width/height ratios, sampled log-uniformly.
    pub aspect_ratio: [f64; 2],
    /// Probability that an object is placed next to an earlier one.
    pub crowding: f64,
    pub n_classes: u32,
    /// Inclusive range.
    pub proposals_per_object: [usize; 2],
    /// Every proposal's IoU with its ground truth lies in `[lo, hi]`.
    pub proposal_iou_band: [f64; 2],
    /// Standard deviation of the score around the proposal's IoU.
    pub score_noise: f64,
    pub regressor_mode: RegressorChoice,
    /// Base regression noise as a fraction of `sqrt(gt area)`.
    pub sigma0: f64,
    /// Extra full-box noise per pixel of extrapolation.
    pub kappa: f64,
    pub classifier_accuracy: f64,
    /// Pull of the UoI pipeline's oracle refiner toward its target; 0 turns
    /// refinement off.
    pub refine_gain: f64,
    /// IoU threshold for LRP and the localization/classification split.
    pub eval_tau: f64,
    pub postprocess: PostprocessConfig,
    pub pipeline: Pipeline,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rng_seed: 7,
            n_scenes: 1000,
            objects_per_scene: [1, 8],
            image_size: [640.0, 480.0],
            object_scale: [16.0, 256.0],
            aspect_ratio: [0.5, 2.0],
            crowding: 0.4,
            n_classes: 3,
            proposals_per_object: [6, 10],
            proposal_iou_band: [0.5, 0.95],
            score_noise: 0.2,
            regressor_mode: RegressorChoice::Auto,
            sigma0: 0.02,
            kappa: 0.15,
            classifier_accuracy: 0.9,
            refine_gain: 1.0,
            eval_tau: 0.5,
            postprocess: PostprocessConfig::default(),
            pipeline: Pipeline::Uoi,
        }
    }
}

impl SimConfig {
    /// Every schema violation, one message per field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut p = Vec::new();
        let [omin, omax] = self.objects_per_scene;
        if omin > omax {
            p.push(format!("objects_per_scene: min {omin} exceeds max {omax}"));
        }
        let [w, h] = self.image_size;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            p.push(format!("image_size: need positive finite size, got [{w}, {h}]"));
        }
        let [smin, smax] = self.object_scale;
        if !(smin > 0.0 && smin <= smax && smax.is_finite()) {
            p.push(format!("object_scale: need 0 < min <= max, got [{smin}, {smax}]"));
        }
        let [amin, amax] = self.aspect_ratio;
        if !(amin > 0.0 && amin <= amax && amax.is_finite()) {
            p.push(format!("aspect_ratio: need 0 < min <= max, got [{amin}, {amax}]"));
        }
        if smax * amax.sqrt() > w || smax / amin.sqrt() > h {
            p.push(format!(
                "object_scale: largest object ({smax} px at aspect range [{amin}, {amax}]) does not fit the {w}x{h} image"
            ));
        }
        if !(0.0..=1.0).contains(&self.crowding) {
            p.push(format!("crowding: must lie in [0, 1], got {}", self.crowding));
        }
        if self.n_classes < 1 {
            p.push("n_classes: must be at least 1".into());
        }
        let [pmin, pmax] = self.proposals_per_object;
        if pmin < 1 || pmin > pmax {
            p.push(format!("proposals_per_object: need 1 <= min <= max, got [{pmin}, {pmax}]"));
        }
        let [lo, hi] = self.proposal_iou_band;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            p.push(format!("proposal_iou_band: need 0 <= lo < hi <= 1, got [{lo}, {hi}]"));
        }
        if !(self.score_noise >= 0.0 && self.score_noise.is_finite()) {
            p.push(format!("score_noise: must be >= 0, got {}", self.score_noise));
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            p.push(format!("sigma0: must be >= 0, got {}", self.sigma0));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            p.push(format!("kappa: must be >= 0, got {}", self.kappa));
        }
        if !(0.0..=1.0).contains(&self.classifier_accuracy) {
            p.push(format!("classifier_accuracy: must lie in [0, 1], got {}", self.classifier_accuracy));
        }
        if self.n_classes < 2 && self.classifier_accuracy < 1.0 {
            p.push("classifier_accuracy: below 1 needs at least 2 classes".into());
        }
        if !(0.0..=1.0).contains(&self.refine_gain) {
            p.push(format!("refine_gain: must lie in [0, 1], got {}", self.refine_gain));
        }
        if !(self.eval_tau > 0.0 && self.eval_tau < 1.0) {
            p.push(format!("eval_tau: must lie in (0, 1), got {}", self.eval_tau));
        }
        p.extend(self.postprocess.problems());
        if p.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { problems: p })
        }
    }

    pub fn effective_mode(&self) -> RegressorMode {
        self.regressor_mode.resolve(self.pipeline)
    }
}
