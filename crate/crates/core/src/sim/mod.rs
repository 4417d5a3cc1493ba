//! Monte-Carlo ablation simulator with oracle regressor and classifier
//! models.

pub mod config;
pub mod experiment;
pub mod scene;

pub use config::{Pipeline, RegressorChoice, RegressorMode, SimConfig};
pub use experiment::{
    evaluate_scenes, generate_scenes, run_experiment, scene_detections, sweep, AxisValue,
    OracleRefiner, SweepAxis, SweepRow,
};
pub use scene::{
    extrapolation, generate_proposals, generate_scene, oracle_classify, oracle_regress,
    regress_with_noise, Scene,
};
