//! Dynamic-song engine: a typed graph of music-generating blocks evaluated
//! once per bar under three editable emotion curves (energy, valence,
//! complexity), rendered to Standard MIDI Files.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, with `*32` variants for `f32`.

pub mod blocks;
pub mod curves;
pub mod generators;
pub mod graph;
pub mod latent;
pub mod midi;
pub mod render;
pub mod rng;
pub mod scalar;
pub mod theory;

pub use blocks::default_registry;
pub use scalar::Scalar;

pub type Curve = curves::Curve<f64>;
pub type CurveSet = curves::CurveSet<f64>;
pub type ControlPoint = curves::ControlPoint<f64>;
pub type EmotionSample = curves::EmotionSample<f64>;
pub type LatentCoord = latent::LatentCoord<f64>;

pub type Curve32 = curves::Curve<f32>;
pub type CurveSet32 = curves::CurveSet<f32>;
pub type ControlPoint32 = curves::ControlPoint<f32>;
pub type EmotionSample32 = curves::EmotionSample<f32>;
pub type LatentCoord32 = latent::LatentCoord<f32>;
