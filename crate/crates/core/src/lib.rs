//! Multi-agent simulation of norm emergence during a pandemic.
//!
//! Agents share one Q-table, move between home and public places, catch and
//! spread a disease, and sanction, tell, emote, or hint at each other when
//! they see a norm kept or broken.

pub mod config;
pub mod disease;
pub mod experiment;
pub mod learning;
pub mod metrics;
pub mod norm;
pub mod rng;
pub mod social;
pub mod stats;
pub mod world;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{compare, run_experiment, run_single, CompareError, ExperimentError, RunSet};
pub use social::{Society, SocietyProfile};
pub use world::{Environment, Learner, World, WorldConfig};
