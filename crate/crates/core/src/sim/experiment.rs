//! Experiment runner and parameter sweeps.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Pipeline, RegressorChoice, RegressorMode, SimConfig};
use super::scene::{extrapolation, generate_scene, scene_rng, Scene, STREAM_REFINE};
use crate::error::{ConfigError, SimError};
use crate::evaluation::{evaluate, MetricReport};
use crate::geometry::{union_bounds, BBox};
use crate::grouping::{postprocess_groups, Group, IdentityRefiner, Merge, Refiner};
use crate::records::{Detection, GroundTruth, ProposalRecord};

/// Oracle second stage for merged boxes, modeled as a full-box regressor
/// started from the merged box.
///
/// It cannot split objects: its target is the tight box around every ground
/// truth that contributed a member to the group, so a group that swallowed a
/// neighbor is refined to a box spanning both. Each coordinate moves `gain`
/// of the way to the target with the full-box noise model,
/// `sigma0 * sqrt(area) + kappa * extrapolation`.
pub struct OracleRefiner<'a> {
    gts: &'a [GroundTruth],
    origins: &'a [usize],
    gain: f64,
    sigma0: f64,
    kappa: f64,
    rng: ChaCha8Rng,
}

impl<'a> OracleRefiner<'a> {
    /// `origins[i]` is the index into `gts` of the object behind record `i`.
    pub fn new(
        gts: &'a [GroundTruth],
        origins: &'a [usize],
        gain: f64,
        sigma0: f64,
        kappa: f64,
        rng: ChaCha8Rng,
    ) -> Self {
        Self { gts, origins, gain, sigma0, kappa, rng }
    }
}

impl Refiner for OracleRefiner<'_> {
    fn refine(&mut self, merged: BBox, group: &Group, _: &[ProposalRecord]) -> BBox {
        // drawn unconditionally so later groups see the same draws
        let z: [f64; 4] = std::array::from_fn(|_| self.rng.sample(StandardNormal));
        let target = union_bounds(group.members.iter().map(|&i| &self.gts[self.origins[i]].bbox))
            .expect("group always holds its seed");
        let m = merged.to_array();
        let t = target.to_array();
        let ext = extrapolation(&merged, &target);
        let base = self.sigma0 * target.area().sqrt();
        let c: [f64; 4] =
            std::array::from_fn(|i| m[i] + self.gain * (t[i] - m[i]) + (base + self.kappa * ext[i]) * z[i]);
        BBox::from_unordered(c[0], c[1], c[2], c[3]).unwrap_or(merged)
    }
}

fn merge_for(pipeline: Pipeline) -> Merge {
    match pipeline {
        Pipeline::Wta => Merge::Seed,
        Pipeline::Uoi => Merge::Union,
        Pipeline::Voting => Merge::Voting,
    }
}

/// Post-processes one scene with the configured pipeline.
pub fn scene_detections(scene: &Scene, config: &SimConfig) -> Vec<Detection> {
    let merge = merge_for(config.pipeline);
    if config.pipeline == Pipeline::Uoi && config.refine_gain > 0.0 {
        let rng = scene_rng(config.rng_seed, scene.index, STREAM_REFINE);
        let mut refiner = OracleRefiner::new(&scene.gts, &scene.origins, config.refine_gain, config.sigma0, config.kappa, rng);
        postprocess_groups(&scene.proposals, &config.postprocess, merge, &mut refiner)
    } else {
        postprocess_groups(&scene.proposals, &config.postprocess, merge, &mut IdentityRefiner)
    }
}

/// Post-processes and evaluates already generated scenes. Scene regressed
/// boxes are used as they are.
pub fn evaluate_scenes(scenes: &[Scene], config: &SimConfig) -> MetricReport {
    let per_scene: Vec<Vec<Detection>> = scenes.par_iter().map(|s| scene_detections(s, config)).collect();
    let dets: Vec<Detection> = per_scene.into_iter().flatten().collect();
    let gts: Vec<GroundTruth> = scenes.iter().flat_map(|s| s.gts.iter().copied()).collect();
    evaluate(&dets, &gts, config.eval_tau)
}

/// Generates all scenes in parallel; order and content do not depend on
/// the thread count.
pub fn generate_scenes(config: &SimConfig) -> Result<Vec<Scene>, SimError> {
    config.validate()?;
    (0..config.n_scenes).into_par_iter().map(|i| generate_scene(config, i)).collect()
}

/// Generate, regress, post-process and evaluate.
pub fn run_experiment(config: &SimConfig) -> Result<MetricReport, SimError> {
    let scenes = generate_scenes(config)?;
    Ok(evaluate_scenes(&scenes, config))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    ProposalQuality,
    GroupSize,
    ClassifierAccuracy,
    #[serde(rename = "threshold-k")]
    GroupingThresholdK,
    RegressorMode,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::ProposalQuality,
        SweepAxis::GroupSize,
        SweepAxis::ClassifierAccuracy,
        SweepAxis::GroupingThresholdK,
        SweepAxis::RegressorMode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::ProposalQuality => "proposal-quality",
            SweepAxis::GroupSize => "group-size",
            SweepAxis::ClassifierAccuracy => "classifier-accuracy",
            SweepAxis::GroupingThresholdK => "threshold-k",
            SweepAxis::RegressorMode => "regressor-mode",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Parses one value of this axis. Proposal-quality values are IoU bands
    /// written `lo:hi`.
    pub fn parse_value(self, raw: &str) -> Result<AxisValue, ConfigError> {
        let raw = raw.trim();
        let bad = |what: &str| ConfigError::single(format!("{}: invalid value `{raw}` ({what})", self.name()));
        match self {
            SweepAxis::ProposalQuality => {
                let (lo, hi) = raw.split_once(':').ok_or_else(|| bad("expected lo:hi"))?;
                let lo: f64 = lo.trim().parse().map_err(|_| bad("lo is not a number"))?;
                let hi: f64 = hi.trim().parse().map_err(|_| bad("hi is not a number"))?;
                Ok(AxisValue::Band(lo, hi))
            }
            SweepAxis::GroupSize => raw.parse().map(AxisValue::Count).map_err(|_| bad("expected an integer")),
            SweepAxis::ClassifierAccuracy | SweepAxis::GroupingThresholdK => {
                raw.parse().map(AxisValue::Number).map_err(|_| bad("expected a number"))
            }
            SweepAxis::RegressorMode => match raw {
                "intersection" => Ok(AxisValue::Mode(RegressorMode::Intersection)),
                "full-box" => Ok(AxisValue::Mode(RegressorMode::FullBox)),
                _ => Err(bad("expected intersection or full-box")),
            },
        }
    }

    /// `config` with this axis set to `value`, validated.
    pub fn apply(self, config: &SimConfig, value: AxisValue) -> Result<SimConfig, ConfigError> {
        let mut c = config.clone();
        match (self, value) {
            (SweepAxis::ProposalQuality, AxisValue::Band(lo, hi)) => c.proposal_iou_band = [lo, hi],
            (SweepAxis::GroupSize, AxisValue::Count(m)) => c.postprocess.m = m,
            (SweepAxis::ClassifierAccuracy, AxisValue::Number(a)) => c.classifier_accuracy = a,
            (SweepAxis::GroupingThresholdK, AxisValue::Number(k)) => c.postprocess.k = k,
            (SweepAxis::RegressorMode, AxisValue::Mode(m)) => {
                c.regressor_mode = match m {
                    RegressorMode::Intersection => RegressorChoice::Intersection,
                    RegressorMode::FullBox => RegressorChoice::FullBox,
                }
            }
            (axis, v) => {
                return Err(ConfigError::single(format!("{}: value {v} has the wrong kind", axis.name())))
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AxisValue {
    Band(f64, f64),
    Count(usize),
    Number(f64),
    Mode(RegressorMode),
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Band(lo, hi) => write!(f, "{lo}:{hi}"),
            AxisValue::Count(n) => write!(f, "{n}"),
            AxisValue::Number(x) => write!(f, "{x}"),
            AxisValue::Mode(RegressorMode::Intersection) => f.write_str("intersection"),
            AxisValue::Mode(RegressorMode::FullBox) => f.write_str("full-box"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: AxisValue,
    pub pipeline: Pipeline,
    pub report: MetricReport,
}

/// One experiment per `(value, pipeline)`, rows in input order. Values are
/// validated up front so a bad entry fails before any run starts.
pub fn sweep(
    config: &SimConfig,
    axis: SweepAxis,
    values: &[AxisValue],
    pipelines: &[Pipeline],
) -> Result<Vec<SweepRow>, SimError> {
    let configs: Vec<(AxisValue, SimConfig)> = values
        .iter()
        .map(|&v| axis.apply(config, v).map(|c| (v, c)))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(values.len() * pipelines.len());
    for (value, base) in &configs {
        for &pipeline in pipelines {
            let cfg = SimConfig { pipeline, ..base.clone() };
            rows.push(SweepRow { value: *value, pipeline, report: run_experiment(&cfg)? });
        }
    }
    Ok(rows)
}
