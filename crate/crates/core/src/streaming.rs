//! Global and streaming selection modes.
//!
//! Streaming folds the recurrence
//! `retained_t = select(window_t ∪ retained_{t-1})` over consecutive,
//! non-overlapping windows of at most `window_size` tokens, starting from an
//! empty retained set.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::{select, SelectionConfig, SelectionResult};
use crate::token::{Query, Token};
use crate::tracklet::floor_spaced;

pub const DEFAULT_WINDOW_SIZE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    /// Maximum number of new tokens per step.
    pub window_size: usize,
    pub selection: SelectionConfig,
}

impl StreamConfig {
    pub fn new(window_size: usize, selection: SelectionConfig) -> Self {
        StreamConfig { window_size, selection }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 {
            return Err(Error::InvalidConfig("window size must be at least 1".into()));
        }
        self.selection.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    pub retained: Vec<Token>,
    pub step: u64,
    /// Result of the most recent step; indices refer to that step's union.
    pub last_result: Option<SelectionResult>,
    /// Largest solver input seen so far.
    pub peak_candidates: usize,
}

pub fn stream_init(cfg: &StreamConfig) -> Result<StreamState> {
    cfg.validate()?;
    Ok(StreamState { retained: Vec::new(), step: 0, last_result: None, peak_candidates: 0 })
}

/// One step of the recurrence. The union lists retained tokens first, then
/// window tokens whose id is not already retained.
pub fn stream_step(state: &StreamState, window: &[Token], query: &Query, cfg: &StreamConfig) -> Result<StreamState> {
    cfg.validate()?;
    if window.len() > cfg.window_size {
        return Err(Error::WindowOverflow { len: window.len(), window_size: cfg.window_size });
    }
    let mut seen: HashSet<&str> = state.retained.iter().map(|t| t.id.as_str()).collect();
    let mut union: Vec<Token> = state.retained.clone();
    for token in window {
        if seen.insert(token.id.as_str()) {
            union.push(token.clone());
        }
    }

    let peak_candidates = state.peak_candidates.max(union.len());
    if union.is_empty() {
        return Ok(StreamState {
            retained: Vec::new(),
            step: state.step + 1,
            last_result: None,
            peak_candidates,
        });
    }
    let result = select(&union, query, &cfg.selection)?;
    let retained = result.indices.iter().map(|&i| union[i].clone()).collect();
    Ok(StreamState { retained, step: state.step + 1, last_result: Some(result), peak_candidates })
}

/// Positions kept by uniform temporal pre-sampling of `tokens` down to
/// `target`: tokens are ordered by start time (stable) and floor-spaced
/// picks are taken from that order. Returned positions index `tokens`.
pub fn presample_positions(tokens: &[Token], target: usize) -> Vec<usize> {
    let mut by_time: Vec<usize> = (0..tokens.len()).collect();
    by_time.sort_by(|&a, &b| tokens[a].span.start.total_cmp(&tokens[b].span.start).then(a.cmp(&b)));
    if target == 0 || target >= tokens.len() {
        return by_time;
    }
    floor_spaced(tokens.len(), target).into_iter().map(|p| by_time[p]).collect()
}

/// A single selection over all tokens, optionally after uniform temporal
/// pre-sampling to `presample_to` tokens. Result indices refer to `tokens`.
pub fn run_global(
    tokens: &[Token],
    query: &Query,
    cfg: &SelectionConfig,
    presample_to: Option<usize>,
) -> Result<SelectionResult> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput);
    }
    match presample_to {
        Some(target) if target < tokens.len() => {
            if target == 0 {
                return Err(Error::InvalidConfig("presample target must be at least 1".into()));
            }
            let mut kept = presample_positions(tokens, target);
            // Keep original relative order so summation order follows the
            // original token index.
            kept.sort_unstable();
            let reduced: Vec<Token> = kept.iter().map(|&i| tokens[i].clone()).collect();
            let mut result = select(&reduced, query, cfg)?;
            for idx in &mut result.indices {
                *idx = kept[*idx];
            }
            Ok(result)
        }
        _ => select(tokens, query, cfg),
    }
}

/// Streams `tokens` (sorted by start time) through consecutive windows.
pub fn run_stream(tokens: &[Token], query: &Query, cfg: &StreamConfig) -> Result<StreamState> {
    let mut state = stream_init(cfg)?;
    if let Some(pos) = tokens.windows(2).position(|w| w[1].span.start < w[0].span.start) {
        return Err(Error::UnsortedInput { position: pos + 1 });
    }
    for window in tokens.chunks(cfg.window_size) {
        state = stream_step(&state, window, query, cfg)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::ObjectiveParams;
    use crate::solvers::SolverKind;
    use crate::token::{Span, TokenKind};

    fn tok(i: usize, e: &[f64]) -> Token {
        Token::new(format!("t{i}"), TokenKind::Action, e, Span::new(i as f64, i as f64 + 1.0)).unwrap()
    }

    /// Six tokens in 7 dims; relevance to e0 given per token.
    fn planted_six() -> (Vec<Token>, Query) {
        let rel: [f64; 6] = [0.95, 0.9, 0.85, 0.1, 0.2, 0.15];
        let tokens = rel
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let mut e = vec![0.0; 7];
                e[0] = r;
                e[i + 1] = (1.0 - r * r).sqrt();
                tok(i, &e)
            })
            .collect();
        let mut q = vec![0.0; 7];
        q[0] = 1.0;
        (tokens, Query::new("q", &q).unwrap())
    }

    fn stream_cfg(window: usize, k: usize, alpha: f64) -> StreamConfig {
        StreamConfig::new(window, SelectionConfig::new(k, ObjectiveParams::new(alpha), SolverKind::LocalSearch))
    }

    #[test]
    fn init_is_empty_and_deterministic() {
        let cfg = stream_cfg(4, 2, 0.9);
        let a = stream_init(&cfg).unwrap();
        assert!(a.retained.is_empty());
        assert_eq!(a.step, 0);
        assert!(a.last_result.is_none());
        assert_eq!(a, stream_init(&cfg).unwrap());
    }

    #[test]
    fn single_full_window_matches_global() {
        let (tokens, q) = planted_six();
        let cfg = stream_cfg(10, 3, 0.7);
        let state = stream_step(&stream_init(&cfg).unwrap(), &tokens, &q, &cfg).unwrap();
        let global = run_global(&tokens, &q, &cfg.selection, None).unwrap();
        let expected: Vec<Token> = global.indices.iter().map(|&i| tokens[i].clone()).collect();
        assert_eq!(state.retained, expected);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn empty_window_reselects_retained() {
        let (tokens, q) = planted_six();
        let cfg = stream_cfg(10, 3, 0.7);
        let s1 = stream_step(&stream_init(&cfg).unwrap(), &tokens, &q, &cfg).unwrap();
        let s2 = stream_step(&s1, &[], &q, &cfg).unwrap();
        assert_eq!(s2.retained, s1.retained);
        assert_eq!(s2.step, 2);
    }

    #[test]
    fn survivors_are_reselected_across_windows() {
        // Hand trace, alpha = 1, k = 3, window 3:
        //   step 1: union {t0,t1,t2} -> keep all three (relevances .95,.9,.85)
        //   step 2: union {t0,t1,t2,t3,t4,t5} -> top three are still t0,t1,t2
        let (tokens, q) = planted_six();
        let cfg = stream_cfg(3, 3, 1.0);
        let state = run_stream(&tokens, &q, &cfg).unwrap();
        let ids: Vec<&str> = state.retained.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, vec!["t0", "t1", "t2"]);
        assert_eq!(state.step, 2);
        assert_eq!(state.peak_candidates, 6);
    }

    #[test]
    fn refed_tokens_are_deduplicated() {
        let (tokens, q) = planted_six();
        let cfg = stream_cfg(6, 2, 1.0);
        let s1 = stream_step(&stream_init(&cfg).unwrap(), &tokens[..3], &q, &cfg).unwrap();
        let s2 = stream_step(&s1, &tokens[..3], &q, &cfg).unwrap();
        assert_eq!(s2.peak_candidates, 3);
        assert_eq!(s2.retained, s1.retained);
    }

    #[test]
    fn window_overflow_is_rejected() {
        let (tokens, q) = planted_six();
        let cfg = stream_cfg(2, 2, 1.0);
        assert_eq!(
            stream_step(&stream_init(&cfg).unwrap(), &tokens, &q, &cfg),
            Err(Error::WindowOverflow { len: 6, window_size: 2 })
        );
    }

    #[test]
    fn step_does_not_modify_input_state() {
        let (tokens, q) = planted_six();
        let cfg = stream_cfg(6, 2, 1.0);
        let s0 = stream_init(&cfg).unwrap();
        let snapshot = s0.clone();
        let _ = stream_step(&s0, &tokens, &q, &cfg).unwrap();
        assert_eq!(s0, snapshot);
    }

    #[test]
    fn unsorted_stream_is_rejected() {
        let (mut tokens, q) = planted_six();
        tokens.swap(1, 4);
        assert_eq!(run_stream(&tokens, &q, &stream_cfg(3, 2, 1.0)), Err(Error::UnsortedInput { position: 2 }));
    }

    #[test]
    fn empty_stream_returns_init_state() {
        let (_, q) = planted_six();
        let cfg = stream_cfg(3, 2, 1.0);
        assert_eq!(run_stream(&[], &q, &cfg).unwrap(), stream_init(&cfg).unwrap());
    }

    #[test]
    fn presampling_takes_floor_spaced_positions() {
        let tokens: Vec<Token> = (0..10)
            .map(|i| {
                let mut e = vec![0.0; 10];
                e[i] = 1.0;
                tok(i, &e)
            })
            .collect();
        assert_eq!(presample_positions(&tokens, 5), vec![0, 2, 4, 6, 8]);
        assert_eq!(presample_positions(&tokens, 10), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn presampling_orders_by_time() {
        let mut tokens: Vec<Token> = (0..4)
            .map(|i| {
                let mut e = vec![0.0; 4];
                e[i] = 1.0;
                tok(i, &e)
            })
            .collect();
        tokens.reverse();
        // Time order is positions 3,2,1,0; picks at 0 and 2 of that order.
        assert_eq!(presample_positions(&tokens, 2), vec![3, 1]);
    }

    #[test]
    fn global_presample_maps_back_to_original_indices() {
        let (tokens, q) = planted_six();
        let cfg = SelectionConfig::new(2, ObjectiveParams::new(1.0), SolverKind::Greedy);
        // Presampling 6 -> 3 keeps positions 0, 2, 4.
        let r = run_global(&tokens, &q, &cfg, Some(3)).unwrap();
        assert_eq!(r.indices, vec![0, 2]);
        let no_op = run_global(&tokens, &q, &cfg, Some(6)).unwrap();
        assert_eq!(no_op, run_global(&tokens, &q, &cfg, None).unwrap());
    }

    #[test]
    fn global_rejects_empty_input() {
        let (_, q) = planted_six();
        let cfg = SelectionConfig::new(2, ObjectiveParams::new(1.0), SolverKind::Greedy);
        assert_eq!(run_global(&[], &q, &cfg, None), Err(Error::EmptyInput));
    }
}
