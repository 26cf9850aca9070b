//! Query relevance, pairwise diversity weights and the selection objective
//!
//! ```text
//! F(S) = alpha * sum_{i in S} R(i, q) + (1 - alpha) * sum_{i<j in S} 1 / max(S(i, j), epsilon)
//! ```
//!
//! Both sums run over ascending candidate index, and each unordered pair is
//! counted once, so the value of a subset does not depend on how it was
//! listed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::token::{Query, Token};

/// Weights of the relevance and diversity terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams {
    pub alpha: f64,
    /// Floor applied to pairwise similarity before inversion.
    pub epsilon: f64,
    /// Divide the relevance sum by `|S|` and the pair sum by the pair count.
    pub normalize_terms: bool,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        ObjectiveParams { alpha: 0.9, epsilon: 1e-3, normalize_terms: false }
    }
}

impl ObjectiveParams {
    pub fn new(alpha: f64) -> Self {
        ObjectiveParams { alpha, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be in (0, 1], got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Dot product of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(dot_clamped(a, b))
}

#[inline]
pub(crate) fn dot_clamped(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc.clamp(-1.0, 1.0)
}

#[inline]
pub(crate) fn weight_from_similarity(similarity: f64, epsilon: f64) -> f64 {
    1.0 / similarity.max(epsilon)
}

pub fn relevance(token: &Token, query: &Query) -> Result<f64> {
    cosine(token.embedding.as_slice(), query.embedding.as_slice())
}

/// Reciprocal of the clamped pairwise similarity, in `[1, 1/epsilon]`.
pub fn diversity_weight(a: &Token, b: &Token, params: &ObjectiveParams) -> Result<f64> {
    if a.id == b.id {
        return Err(Error::SelfPair);
    }
    let s = cosine(a.embedding.as_slice(), b.embedding.as_slice())?;
    Ok(weight_from_similarity(s, params.epsilon))
}

/// Objective of the subset `subset` (positions into `candidates`).
pub fn objective(candidates: &[Token], subset: &[usize], query: &Query, params: &ObjectiveParams) -> Result<f64> {
    params.validate()?;
    let sorted = canonical_subset(subset, candidates.len())?;
    let dim = query.dim();
    for &i in &sorted {
        if candidates[i].dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: candidates[i].dim() });
        }
    }
    let q = query.embedding.as_slice();
    Ok(subset_value(
        &sorted,
        |i| dot_clamped(candidates[i].embedding.as_slice(), q),
        |i, j| {
            weight_from_similarity(
                dot_clamped(candidates[i].embedding.as_slice(), candidates[j].embedding.as_slice()),
                params.epsilon,
            )
        },
        params,
    ))
}

/// Sorted copy of `subset` after checking range, emptiness and duplicates.
pub(crate) fn canonical_subset(subset: &[usize], len: usize) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DuplicateToken(w[0]));
        }
    }
    if let Some(&last) = sorted.last() {
        if last >= len {
            return Err(Error::IndexOutOfRange { index: last, len });
        }
    }
    Ok(sorted)
}

/// Shared accumulation for every objective evaluation. `sorted` must be
/// ascending.
pub(crate) fn subset_value(
    sorted: &[usize],
    relevance_of: impl Fn(usize) -> f64,
    weight_of: impl Fn(usize, usize) -> f64,
    params: &ObjectiveParams,
) -> f64 {
    let mut rel_sum = 0.0;
    for &i in sorted {
        rel_sum += relevance_of(i);
    }
    let mut pair_sum = 0.0;
    for (a, &i) in sorted.iter().enumerate() {
        for &j in &sorted[a + 1..] {
            pair_sum += weight_of(i, j);
        }
    }
    combine_terms(rel_sum, pair_sum, sorted.len(), params)
}

pub(crate) fn combine_terms(rel_sum: f64, pair_sum: f64, size: usize, params: &ObjectiveParams) -> f64 {
    let (rel, pair) = if params.normalize_terms {
        (rel_sum / size.max(1) as f64, pair_sum / pair_count(size).max(1) as f64)
    } else {
        (rel_sum, pair_sum)
    };
    params.alpha * rel + (1.0 - params.alpha) * pair
}

pub(crate) fn pair_count(size: usize) -> usize {
    size * size.saturating_sub(1) / 2
}

/// Dense pairwise cache is used up to this many candidates.
const DENSE_LIMIT: usize = 4096;

/// Candidate set with relevances precomputed, shared by the solvers.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    candidates: &'a [Token],
    relevance: Vec<f64>,
    weights: Option<Vec<f64>>,
    params: ObjectiveParams,
}

impl<'a> Problem<'a> {
    pub fn new(candidates: &'a [Token], query: &Query, params: ObjectiveParams) -> Result<Self> {
        params.validate()?;
        let dim = query.dim();
        if let Some(bad) = candidates.iter().find(|t| t.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        let q = query.embedding.as_slice();
        let relevance = candidates.iter().map(|t| dot_clamped(t.embedding.as_slice(), q)).collect();
        let n = candidates.len();
        let weights = (n <= DENSE_LIMIT).then(|| {
            let mut w = vec![1.0; n * n];
            for i in 0..n {
                for j in i + 1..n {
                    let v = weight_from_similarity(
                        dot_clamped(candidates[i].embedding.as_slice(), candidates[j].embedding.as_slice()),
                        params.epsilon,
                    );
                    w[i * n + j] = v;
                    w[j * n + i] = v;
                }
            }
            w
        });
        Ok(Problem { candidates, relevance, weights, params })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn params(&self) -> &ObjectiveParams {
        &self.params
    }

    pub fn relevance(&self, i: usize) -> f64 {
        self.relevance[i]
    }

    pub fn relevances(&self) -> &[f64] {
        &self.relevance
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i * self.candidates.len() + j],
            None => weight_from_similarity(
                dot_clamped(self.candidates[i].embedding.as_slice(), self.candidates[j].embedding.as_slice()),
                self.params.epsilon,
            ),
        }
    }

    /// Objective of an ascending, duplicate-free index list.
    pub fn value(&self, sorted: &[usize]) -> f64 {
        debug_assert!(sorted.windows(2).all(|w| w[0] < w[1]));
        subset_value(sorted, |i| self.relevance[i], |i, j| self.weight(i, j), &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::{Span, TokenKind};
    use proptest::prelude::*;

    fn tok(id: &str, e: &[f64]) -> Token {
        Token::new(id, TokenKind::Scene, e, Span::new(0.0, 1.0)).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert!((cosine(&[0.6, 0.8], &[0.8, 0.6]).unwrap() - 0.96).abs() < 1e-15);
    }

    #[test]
    fn cosine_rejects_mismatched_dims() {
        assert_eq!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn cosine_is_clamped() {
        let a = [1.0 + 1e-15, 0.0];
        assert_eq!(cosine(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn relevance_examples() {
        let q = Query::new("q", &[1.0, 0.0]).unwrap();
        assert_eq!(relevance(&tok("a", &[1.0, 0.0]), &q).unwrap(), 1.0);
        assert_eq!(relevance(&tok("b", &[0.0, 1.0]), &q).unwrap(), 0.0);
        assert!((relevance(&tok("c", &[0.6, 0.8]), &q).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn diversity_weight_examples() {
        let p = ObjectiveParams::default();
        assert_eq!(diversity_weight(&tok("a", &[1.0, 0.0]), &tok("b", &[1.0, 0.0]), &p).unwrap(), 1.0);
        assert_eq!(diversity_weight(&tok("a", &[1.0, 0.0]), &tok("b", &[0.0, 1.0]), &p).unwrap(), 1000.0);
        let half = [0.5, 0.75_f64.sqrt()];
        let w = diversity_weight(&tok("a", &[1.0, 0.0]), &tok("b", &half), &p).unwrap();
        assert!((w - 2.0).abs() < 1e-12);
        // Negative similarity clamps to the floor as well.
        assert_eq!(diversity_weight(&tok("a", &[1.0, 0.0]), &tok("b", &[-1.0, 0.0]), &p).unwrap(), 1000.0);
    }

    #[test]
    fn diversity_weight_rejects_self_pair() {
        let a = tok("a", &[1.0, 0.0]);
        assert_eq!(diversity_weight(&a, &a, &ObjectiveParams::default()), Err(Error::SelfPair));
    }

    /// Two tokens with relevance 0.9 and 0.5 to `q = e0` and pairwise
    /// similarity 0.5, built in three dimensions.
    fn two_token_instance() -> (Vec<Token>, Query) {
        let q = Query::new("q", &[1.0, 0.0, 0.0]).unwrap();
        let a = [0.9, (1.0f64 - 0.81).sqrt(), 0.0];
        // b . q = 0.5 and b . a = 0.5
        let b1 = (0.5 - 0.9 * 0.5) / a[1];
        let b = [0.5, b1, (1.0 - 0.25 - b1 * b1).sqrt()];
        (vec![tok("a", &a), tok("b", &b)], q)
    }

    #[test]
    fn objective_examples() {
        let (tokens, q) = two_token_instance();
        let f = |alpha| objective(&tokens, &[0, 1], &q, &ObjectiveParams::new(alpha)).unwrap();
        assert!((f(1.0) - 1.4).abs() < 1e-12);
        assert!((f(0.0) - 2.0).abs() < 1e-12);
        assert!((f(0.5) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn objective_errors() {
        let (tokens, q) = two_token_instance();
        let p = ObjectiveParams::default();
        assert_eq!(objective(&tokens, &[], &q, &p), Err(Error::EmptySubset));
        assert_eq!(objective(&tokens, &[1, 1], &q, &p), Err(Error::DuplicateToken(1)));
        assert_eq!(objective(&tokens, &[2], &q, &p), Err(Error::IndexOutOfRange { index: 2, len: 2 }));
        let bad = ObjectiveParams { alpha: 1.5, ..p };
        assert!(matches!(objective(&tokens, &[0], &q, &bad), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn singleton_has_no_diversity_term() {
        let (tokens, q) = two_token_instance();
        assert_eq!(objective(&tokens, &[0], &q, &ObjectiveParams::new(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn normalized_terms_divide_by_counts() {
        let (tokens, q) = two_token_instance();
        let p = ObjectiveParams { alpha: 0.5, normalize_terms: true, ..Default::default() };
        let v = objective(&tokens, &[0, 1], &q, &p).unwrap();
        assert!((v - (0.5 * 0.7 + 0.5 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn problem_matches_free_function() {
        let (tokens, q) = two_token_instance();
        let p = ObjectiveParams::new(0.3);
        let problem = Problem::new(&tokens, &q, p).unwrap();
        assert_eq!(problem.value(&[0, 1]), objective(&tokens, &[1, 0], &q, &p).unwrap());
    }

    fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (2usize..6).prop_flat_map(|d| {
            (
                prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), 2..8),
                prop::collection::vec(-1.0f64..1.0, d),
            )
        })
        .prop_filter("non-zero", |(raw, q)| {
            raw.iter().chain(std::iter::once(q)).all(|v| v.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        })
    }

    fn build(raw: &[Vec<f64>], q: &[f64]) -> (Vec<Token>, Query) {
        let tokens = raw.iter().enumerate().map(|(i, e)| tok(&i.to_string(), e)).collect();
        (tokens, Query::new("q", q).unwrap())
    }

    proptest! {
        #[test]
        fn objective_is_permutation_invariant((raw, q) in instance(), alpha in 0.0f64..=1.0, seed in any::<u64>()) {
            let (tokens, query) = build(&raw, &q);
            let p = ObjectiveParams::new(alpha);
            let mut subset: Vec<usize> = (0..tokens.len()).collect();
            let base = objective(&tokens, &subset, &query, &p).unwrap();
            let n = subset.len();
            subset.rotate_left((seed as usize) % n);
            subset.swap(0, n - 1);
            prop_assert_eq!(objective(&tokens, &subset, &query, &p).unwrap(), base);
        }

        #[test]
        fn extreme_alphas_isolate_terms((raw, q) in instance()) {
            let (tokens, query) = build(&raw, &q);
            let all: Vec<usize> = (0..tokens.len()).collect();
            let mut rel = 0.0;
            for t in &tokens { rel += relevance(t, &query).unwrap(); }
            let mut pairs = 0.0;
            for i in 0..tokens.len() {
                for j in i + 1..tokens.len() {
                    pairs += diversity_weight(&tokens[i], &tokens[j], &ObjectiveParams::default()).unwrap();
                }
            }
            prop_assert_eq!(objective(&tokens, &all, &query, &ObjectiveParams::new(1.0)).unwrap(), rel);
            prop_assert_eq!(objective(&tokens, &all, &query, &ObjectiveParams::new(0.0)).unwrap(), pairs);
        }

        #[test]
        fn diversity_weight_is_symmetric_and_bounded((raw, q) in instance()) {
            let (tokens, _) = build(&raw, &q);
            let p = ObjectiveParams::default();
            let ab = diversity_weight(&tokens[0], &tokens[1], &p).unwrap();
            prop_assert_eq!(ab, diversity_weight(&tokens[1], &tokens[0], &p).unwrap());
            prop_assert!((1.0..=1000.0).contains(&ab));
        }

        #[test]
        fn power_of_two_rescaling_keeps_objective_bits((raw, q) in instance(), e in -8i32..8, alpha in 0.0f64..=1.0) {
            let (tokens, query) = build(&raw, &q);
            let c = 2f64.powi(e) * 3.0;
            let scaled: Vec<Vec<f64>> = raw.iter().map(|v| v.iter().map(|x| x * c).collect()).collect();
            let (tokens2, _) = build(&scaled, &q);
            // c = 3 * 2^e; compare against the same vectors scaled by 3 only.
            let thrice: Vec<Vec<f64>> = raw.iter().map(|v| v.iter().map(|x| x * 3.0).collect()).collect();
            let (tokens3, _) = build(&thrice, &q);
            let all: Vec<usize> = (0..tokens.len()).collect();
            let p = ObjectiveParams::new(alpha);
            let a = objective(&tokens2, &all, &query, &p).unwrap();
            let b = objective(&tokens3, &all, &query, &p).unwrap();
            prop_assert_eq!(a, b);
            let base = objective(&tokens, &all, &query, &p).unwrap();
            prop_assert!((a - base).abs() <= 1e-9 * base.abs().max(1.0));
        }
    }
}
