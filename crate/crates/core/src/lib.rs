//! Simulator and agent harness for a collaborative Pentomino reference game.
//!
//! A guide sees the whole board and the target piece and emits one of 14 intents per step. The
//! intents are verbalized into short English utterances for a hand-crafted follower that sees an
//! 11x11 window around the gripper, moves it, and eventually takes a piece.
//!
//! Numeric code that does not depend on the simulation state is generic over [`Scalar`] (`f32`
//! or `f64`). The aliases below pin the common choices.

pub mod domain;
pub mod engine;
pub mod error;
pub mod follower;
pub mod guides;
pub mod language;
pub mod metrics;
pub mod planner;
pub mod protocol;
pub mod refexp;
pub mod replay;
pub mod reward;
pub mod rollout;
pub mod scalar;
pub mod seed;
pub mod taskgen;
pub mod view;

pub use domain::{Area, Board, Color, Coord, Dims, Gripper, Piece, PieceId, PieceSymbol, Rotation, Shape};
pub use engine::{Episode, EpisodeTrace, Seeds};
pub use error::{Error, Result};
pub use follower::{Autonomy, FollowerConfig};
pub use guides::{Guide, GuideKind};
pub use language::{IntentAction, IntentKind};
pub use metrics::MetricsReport;
pub use refexp::PreferenceOrder;
pub use scalar::Scalar;
pub use taskgen::{Dataset, Split, SplitSpec, Task};

/// Guide observation in single precision, as shipped over the protocol.
pub type GuideView32 = view::GuideView<f32>;
pub type GuideView64 = view::GuideView<f64>;
pub type Rewards = reward::RewardBreakdown<f64>;
pub type Rewards32 = reward::RewardBreakdown<f32>;
pub type Trend = metrics::OlsTrend<f64>;
