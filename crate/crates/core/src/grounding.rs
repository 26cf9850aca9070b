//! Moment reconstruction from per-token predictions, temporal IoU and
//! Recall@K at tIoU thresholds, plus a relevance-ranked baseline grounder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::dot_clamped;
use crate::token::{Query, Token, VideoMeta};

pub const DEFAULT_KS: [usize; 2] = [1, 5];
pub const DEFAULT_THRESHOLDS: [f64; 2] = [0.3, 0.5];

/// Time interval in seconds, `0 <= start <= end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub start: f64,
    pub end: f64,
}

impl Moment {
    pub fn new(start: f64, end: f64) -> Self {
        Moment { start, end }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_valid(&self) -> bool {
        self.start >= 0.0 && self.start <= self.end
    }
}

/// Classification score and normalized boundary distances predicted for
/// one token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenPrediction {
    /// Token time normalized by the video length.
    pub token_time: f64,
    pub score: f64,
    pub d_start: f64,
    pub d_end: f64,
}

/// `((t - d_start) * L, (t + d_end) * L)` clamped to `[0, L]`.
pub fn decode_moment(pred: &TokenPrediction, meta: &VideoMeta) -> Moment {
    let length = meta.length_seconds;
    let start = ((pred.token_time - pred.d_start) * length).max(0.0);
    let end = ((pred.token_time + pred.d_end) * length).min(length);
    Moment { start: start.min(end), end }
}

/// Intersection over union of two intervals. Identical zero-width moments
/// score 1.
pub fn tiou(a: &Moment, b: &Moment) -> f64 {
    let inter = (a.end.min(b.end) - a.start.max(b.start)).max(0.0);
    let union = a.end.max(b.end) - a.start.min(b.start);
    if union <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallEntry {
    pub k: usize,
    pub threshold: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallAverage {
    pub k: usize,
    pub average: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundingMetrics {
    pub num_queries: usize,
    /// One entry per (K, threshold), K-major.
    pub recall: Vec<RecallEntry>,
    pub averages: Vec<RecallAverage>,
}

impl GroundingMetrics {
    pub fn get(&self, k: usize, threshold: f64) -> Option<f64> {
        self.recall.iter().find(|e| e.k == k && e.threshold == threshold).map(|e| e.recall)
    }

    pub fn average(&self, k: usize) -> Option<f64> {
        self.averages.iter().find(|a| a.k == k).map(|a| a.average)
    }
}

/// Recall@K for every `(K, threshold)` pair. `preds_per_query[q]` must be
/// ranked best-first. With no queries every recall is reported as zero.
pub fn recall_at(
    preds_per_query: &[Vec<Moment>],
    gts: &[Moment],
    ks: &[usize],
    thresholds: &[f64],
) -> Result<GroundingMetrics> {
    if preds_per_query.len() != gts.len() {
        return Err(Error::LengthMismatch { predictions: preds_per_query.len(), ground_truths: gts.len() });
    }
    let num_queries = gts.len();
    // Best tIoU among the top-K for each query.
    let best_at = |k: usize| -> Vec<f64> {
        preds_per_query
            .iter()
            .zip(gts)
            .map(|(preds, gt)| preds.iter().take(k).map(|p| tiou(p, gt)).fold(0.0, f64::max))
            .collect()
    };
    let mut recall = Vec::with_capacity(ks.len() * thresholds.len());
    let mut averages = Vec::with_capacity(ks.len());
    for &k in ks {
        let best = best_at(k);
        let mut sum = 0.0;
        for &threshold in thresholds {
            let hits = best.iter().filter(|&&b| b >= threshold).count();
            let r = if num_queries == 0 { 0.0 } else { hits as f64 / num_queries as f64 };
            sum += r;
            recall.push(RecallEntry { k, threshold, recall: r });
        }
        let average = if thresholds.is_empty() { 0.0 } else { sum / thresholds.len() as f64 };
        averages.push(RecallAverage { k, average });
    }
    Ok(GroundingMetrics { num_queries, recall, averages })
}

/// Ranks tokens by query relevance (ties toward the earlier start) and
/// returns the spans of the best `top_k` as candidate moments.
pub fn baseline_ground(tokens: &[Token], query: &Query, top_k: usize) -> Result<Vec<Moment>> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput);
    }
    let dim = query.dim();
    if let Some(bad) = tokens.iter().find(|t| t.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
    }
    let q = query.embedding.as_slice();
    let rel: Vec<f64> = tokens.iter().map(|t| dot_clamped(t.embedding.as_slice(), q)).collect();
    let mut order: Vec<usize> = (0..tokens.len()).collect();
    order.sort_by(|&a, &b| {
        rel[b]
            .total_cmp(&rel[a])
            .then(tokens[a].span.start.total_cmp(&tokens[b].span.start))
            .then(a.cmp(&b))
    });
    Ok(order
        .into_iter()
        .take(top_k)
        .map(|i| Moment::new(tokens[i].span.start, tokens[i].span.end))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::{Span, TokenKind};
    use proptest::prelude::*;

    fn meta(length: f64) -> VideoMeta {
        VideoMeta::new(length, 1.0)
    }

    fn pred(t: f64, ds: f64, de: f64) -> TokenPrediction {
        TokenPrediction { token_time: t, score: 1.0, d_start: ds, d_end: de }
    }

    #[test]
    fn decode_examples() {
        let m = decode_moment(&pred(0.5, 0.1, 0.2), &meta(100.0));
        assert!((m.start - 40.0).abs() < 1e-9 && (m.end - 70.0).abs() < 1e-9);
        let m = decode_moment(&pred(0.3, 0.0, 0.0), &meta(60.0));
        assert!((m.start - 18.0).abs() < 1e-9);
        assert_eq!(m.start, m.end);
        let m = decode_moment(&pred(0.05, 0.1, 0.1), &meta(100.0));
        assert_eq!(m.start, 0.0);
        assert!((m.end - 15.0).abs() < 1e-9);
    }

    #[test]
    fn decode_clamps_past_the_end() {
        let m = decode_moment(&pred(0.9, 0.1, 0.5), &meta(10.0));
        assert_eq!(m.end, 10.0);
    }

    #[test]
    fn tiou_examples() {
        let a = Moment::new(0.0, 10.0);
        assert_eq!(tiou(&a, &a), 1.0);
        assert_eq!(tiou(&a, &Moment::new(20.0, 30.0)), 0.0);
        assert!((tiou(&a, &Moment::new(5.0, 15.0)) - 1.0 / 3.0).abs() < 1e-15);
        let z = Moment::new(4.0, 4.0);
        assert_eq!(tiou(&z, &z), 1.0);
        assert_eq!(tiou(&z, &Moment::new(5.0, 5.0)), 0.0);
        assert_eq!(tiou(&z, &a), 0.0);
    }

    #[test]
    fn recall_single_hit() {
        // tIoU([0,6],[0,10]) = 0.6
        let m = recall_at(&[vec![Moment::new(0.0, 6.0)]], &[Moment::new(0.0, 10.0)], &[1], &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(m.get(1, 0.3), Some(1.0));
        assert_eq!(m.get(1, 0.5), Some(1.0));
    }

    #[test]
    fn recall_partial_hit() {
        // tIoU([0,4],[0,10]) = 0.4
        let m = recall_at(&[vec![Moment::new(0.0, 4.0)]], &[Moment::new(0.0, 10.0)], &[1], &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(m.get(1, 0.3), Some(1.0));
        assert_eq!(m.get(1, 0.5), Some(0.0));
        assert_eq!(m.average(1), Some(0.5));
    }

    #[test]
    fn recall_with_no_queries() {
        let m = recall_at(&[], &[], &DEFAULT_KS, &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(m.num_queries, 0);
        assert_eq!(m.recall.len(), 4);
        assert!(m.recall.iter().all(|e| e.recall == 0.0));
    }

    #[test]
    fn recall_length_mismatch() {
        assert_eq!(
            recall_at(&[vec![]], &[], &[1], &[0.5]),
            Err(Error::LengthMismatch { predictions: 1, ground_truths: 0 })
        );
    }

    #[test]
    fn recall_at_five_looks_deeper() {
        let preds = vec![vec![
            Moment::new(50.0, 60.0),
            Moment::new(40.0, 45.0),
            Moment::new(1.0, 9.0),
        ]];
        let m = recall_at(&preds, &[Moment::new(0.0, 10.0)], &DEFAULT_KS, &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(m.get(1, 0.5), Some(0.0));
        assert_eq!(m.get(5, 0.5), Some(1.0));
    }

    fn tok(i: usize, e: &[f64], start: f64) -> Token {
        Token::new(format!("t{i}"), TokenKind::Scene, e, Span::new(start, start + 1.0)).unwrap()
    }

    #[test]
    fn baseline_ranks_by_relevance() {
        let q = Query::new("q", &[1.0, 0.0]).unwrap();
        let tokens = vec![tok(0, &[0.2, 1.0], 0.0), tok(1, &[1.0, 0.1], 5.0), tok(2, &[1.0, 0.5], 9.0)];
        let out = baseline_ground(&tokens, &q, 2).unwrap();
        assert_eq!(out, vec![Moment::new(5.0, 6.0), Moment::new(9.0, 10.0)]);
        assert_eq!(baseline_ground(&tokens, &q, 10).unwrap().len(), 3);
    }

    #[test]
    fn baseline_ties_follow_start_time() {
        let q = Query::new("q", &[1.0, 0.0]).unwrap();
        let tokens = vec![tok(0, &[1.0, 1.0], 7.0), tok(1, &[1.0, 1.0], 2.0), tok(2, &[1.0, 1.0], 4.0)];
        let starts: Vec<f64> = baseline_ground(&tokens, &q, 3).unwrap().iter().map(|m| m.start).collect();
        assert_eq!(starts, vec![2.0, 4.0, 7.0]);
    }

    #[test]
    fn baseline_rejects_empty_input() {
        let q = Query::new("q", &[1.0]).unwrap();
        assert_eq!(baseline_ground(&[], &q, 1), Err(Error::EmptyInput));
    }

    fn moment() -> impl Strategy<Value = Moment> {
        (0.0f64..100.0, 0.0f64..50.0).prop_map(|(s, l)| Moment::new(s, s + l))
    }

    proptest! {
        #[test]
        fn tiou_is_symmetric_and_bounded(a in moment(), b in moment()) {
            let ab = tiou(&a, &b);
            prop_assert_eq!(ab, tiou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(tiou(&a, &a), 1.0);
        }

        #[test]
        fn decode_inverts_encoding(start in 0.0f64..50.0, len in 0.0f64..50.0, video in 100.0f64..1000.0) {
            let m = Moment::new(start, start + len);
            let mid = 0.5 * (m.start + m.end);
            let p = pred(mid / video, (mid - m.start) / video, (m.end - mid) / video);
            let back = decode_moment(&p, &meta(video));
            prop_assert!((back.start - m.start).abs() <= 1e-9);
            prop_assert!((back.end - m.end).abs() <= 1e-9);
        }
    }
}
