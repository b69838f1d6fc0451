//! Socially-aware resource allocation for D2D-enabled small-cell networks.
//!
//! Users are matched to resource blocks in a two-sided game whose utilities
//! combine link rates with inferred social ties, so that socially close UEs
//! cluster around serving UEs that can share cached content over D2D links.

pub mod baselines;
pub mod datasets;
pub mod error;
pub mod harness;
pub mod matching;
pub mod phy;
pub mod social;
pub mod stats;

pub use error::{Error, Result};
pub use matching::{run_sara, Game, GameConfig, MatchState, Matching};
pub use phy::{Band, ChannelRealization, RBlock, RadioParams, SpectrumPlan, Topology};
pub use social::SocialTieMatrix;
