//! Interaction-aware driving risk: a Doppler-corrected interaction field,
//! baseline safety metrics, a multimodal trajectory predictor and their fusion
//! into probabilistic risk.
//!
//! Every numeric routine is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the precision for common uses.

pub mod baselines;
pub mod error;
pub mod geom;
pub mod predictor;
pub mod prob_risk;
pub mod risk_field;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use geom::Vec2;
pub use scalar::Real;

pub type Vec2F32 = geom::Vec2<f32>;
pub type Vec2F64 = geom::Vec2<f64>;
pub type AgentStateF32 = scenario::AgentState<f32>;
pub type AgentStateF64 = scenario::AgentState<f64>;
pub type ScenarioF32 = scenario::Scenario<f32>;
pub type ScenarioF64 = scenario::Scenario<f64>;
pub type RiskFieldParamsF32 = risk_field::RiskFieldParams<f32>;
pub type RiskFieldParamsF64 = risk_field::RiskFieldParams<f64>;
pub type BaselineConfigF32 = baselines::BaselineConfig<f32>;
pub type BaselineConfigF64 = baselines::BaselineConfig<f64>;
pub type ModelF32 = predictor::Model<f32>;
pub type ModelF64 = predictor::Model<f64>;
pub type MixturePredictionF32 = predictor::MixturePrediction<f32>;
pub type MixturePredictionF64 = predictor::MixturePrediction<f64>;
pub type AgentPredictionF32 = prob_risk::AgentPrediction<f32>;
pub type AgentPredictionF64 = prob_risk::AgentPrediction<f64>;
pub type RiskTimeSeriesF32 = prob_risk::RiskTimeSeries<f32>;
pub type RiskTimeSeriesF64 = prob_risk::RiskTimeSeries<f64>;
