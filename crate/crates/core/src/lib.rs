//! Query-relevant, diverse fixed-size selection over typed video tokens.
//!
//! A long video is represented by scene, object and action tokens, each with
//! a unit embedding and a time span. Selection picks `k` of them maximizing
//!
//! ```text
//! alpha * sum relevance(t, q) + (1 - alpha) * sum_{pairs} 1 / similarity(t_i, t_j)
//! ```
//!
//! either over the whole video at once ([`streaming::run_global`]) or over a
//! sliding window that carries the previous selection forward
//! ([`streaming::run_stream`]).

pub mod error;
pub mod grounding;
pub mod io;
pub mod similarity;
pub mod simulator;
pub mod solvers;
pub mod streaming;
pub mod token;
pub mod tracklet;

pub use error::{Error, Result};
pub use grounding::{baseline_ground, decode_moment, recall_at, tiou, GroundingMetrics, Moment, TokenPrediction};
pub use similarity::{cosine, diversity_weight, objective, relevance, ObjectiveParams, Problem};
pub use simulator::{generate, recovery_rate, GroundTruth, SimConfig, SimOutput};
pub use solvers::{
    select, select_exact, select_greedy, select_local_search, select_qp_relax, SelectionConfig, SelectionResult,
    SolverKind, SolverStats,
};
pub use streaming::{run_global, run_stream, stream_init, stream_step, StreamConfig, StreamState};
pub use token::{normalize_embedding, validate_token, BBox, Embedding, Query, Span, Token, TokenKind, VideoMeta};
pub use tracklet::{filter_split_tracklets, spatial_union, uniform_scene_indices, Tracklet, TrackletRules};
