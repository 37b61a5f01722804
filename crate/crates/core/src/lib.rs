//! Proximal policy optimization with a decoupled outer-update stage.
//!
//! One training iteration collects a batch with `θ_k`, runs the usual
//! epoch/minibatch optimization to obtain `θ*`, and then hands the outer
//! gradient `θ* - θ_k` to an [`outer::OuterStrategy`]. Standard PPO is the
//! strategy that takes `θ*` as is.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod driver;
pub mod env;
pub mod error;
pub mod gae;
pub mod head;
pub mod inner;
pub mod loss;
pub mod metrics;
pub mod mlp;
pub mod model;
pub mod outer;
pub mod params;
pub mod presets;
pub mod rng;
pub mod rollout;
pub mod sweep;

pub use error::{Error, Result};
