//! Seeded synthetic token streams with a planted relevant subset.
//!
//! Distractor embeddings come from clusters whose centers are drawn on the
//! unit sphere and then made orthogonal to the query; planted tokens are
//! noisy copies of the query. Distractors are resampled until they sit at
//! least `planted_margin` below the least relevant planted token.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grounding::Moment;
use crate::similarity::dot_clamped;
use crate::solvers::SelectionResult;
use crate::token::{normalize_embedding, Embedding, Query, Span, Token, TokenKind};

/// Resampling budget per distractor.
pub const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub num_tokens: usize,
    pub dim: usize,
    /// Scene, object and action proportions.
    pub kind_mix: [f64; 3],
    pub num_clusters: usize,
    pub cluster_spread: f64,
    pub planted_size: usize,
    pub planted_margin: f64,
    pub video_length: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_tokens: 200,
            dim: 8,
            kind_mix: [0.625, 0.261, 0.114],
            num_clusters: 6,
            cluster_spread: 0.3,
            planted_size: 8,
            planted_margin: 0.2,
            video_length: 600.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_tokens == 0 || self.dim == 0 || self.num_clusters == 0 {
            return fail("num_tokens, dim and num_clusters must be positive".into());
        }
        if self.planted_size > self.num_tokens {
            return fail(format!(
                "planted_size {} exceeds num_tokens {}",
                self.planted_size, self.num_tokens
            ));
        }
        if self.kind_mix.iter().any(|p| !p.is_finite() || *p < 0.0) || (self.kind_mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return fail(format!("kind_mix {:?} must be non-negative and sum to 1", self.kind_mix));
        }
        if !(self.cluster_spread >= 0.0 && self.cluster_spread.is_finite()) {
            return fail(format!("cluster_spread must be non-negative, got {}", self.cluster_spread));
        }
        if !(self.planted_margin > 0.0 && self.planted_margin <= 1.0) {
            return fail(format!("planted_margin must be in (0, 1], got {}", self.planted_margin));
        }
        if !(self.video_length > 0.0 && self.video_length.is_finite()) {
            return fail(format!("video_length must be positive, got {}", self.video_length));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub relevant_ids: Vec<String>,
    /// Covers every planted token span; zero-length at the origin when
    /// nothing is planted.
    pub moment: Moment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub tokens: Vec<Token>,
    pub query: Query,
    pub truth: GroundTruth,
}

/// Per-kind counts from `mix` using largest-remainder rounding; ties in the
/// remainder go to the earlier kind.
pub fn kind_counts(total: usize, mix: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = mix.iter().map(|p| p * total as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        if let Ok(v) = normalize_embedding(&gaussian_vec(rng, dim)) {
            return v;
        }
    }
}

fn perturb(rng: &mut ChaCha8Rng, center: &[f64], spread: f64) -> Vec<f64> {
    loop {
        let noise = gaussian_vec(rng, center.len());
        let raw: Vec<f64> = center.iter().zip(&noise).map(|(c, z)| c + spread * z).collect();
        if let Ok(v) = normalize_embedding(&raw) {
            return v;
        }
    }
}

pub fn generate(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.num_tokens;

    let query_vec = random_unit(&mut rng, cfg.dim);
    let centers: Vec<Vec<f64>> = (0..cfg.num_clusters)
        .map(|_| {
            let c = random_unit(&mut rng, cfg.dim);
            let along = dot_clamped(&c, &query_vec);
            let orth: Vec<f64> = c.iter().zip(&query_vec).map(|(a, q)| a - along * q).collect();
            normalize_embedding(&orth).unwrap_or(c)
        })
        .collect();

    let planted_start = if cfg.planted_size > 0 { rng.random_range(0..=n - cfg.planted_size) } else { 0 };
    let planted = planted_start..planted_start + cfg.planted_size;

    let mut embeddings: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut min_planted = f64::INFINITY;
    for slot in &mut embeddings[planted.clone()] {
        let e = perturb(&mut rng, &query_vec, cfg.cluster_spread);
        min_planted = min_planted.min(dot_clamped(&e, &query_vec));
        *slot = Some(e);
    }
    let ceiling = min_planted - cfg.planted_margin;
    for (i, slot) in embeddings.iter_mut().enumerate() {
        if slot.is_some() {
            continue;
        }
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let cluster = rng.random_range(0..centers.len());
            let e = perturb(&mut rng, &centers[cluster], cfg.cluster_spread);
            if dot_clamped(&e, &query_vec) <= ceiling {
                accepted = Some(e);
                break;
            }
        }
        *slot = Some(accepted.ok_or(Error::InfeasibleMargin { index: i, attempts: MAX_ATTEMPTS })?);
    }

    let counts = kind_counts(n, cfg.kind_mix);
    let mut kinds: Vec<TokenKind> = TokenKind::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&k, c)| std::iter::repeat_n(k, c))
        .collect();
    kinds.shuffle(&mut rng);

    let slot_len = cfg.video_length / n as f64;
    let span_of = |i: usize| {
        let end = if i + 1 == n { cfg.video_length } else { (i + 1) as f64 * slot_len };
        Span::new(i as f64 * slot_len, end)
    };
    let tokens: Vec<Token> = embeddings
        .into_iter()
        .zip(kinds)
        .enumerate()
        .map(|(i, (e, kind))| Token {
            id: format!("tok{i:05}"),
            kind,
            embedding: Embedding::from_unit_unchecked(e.expect("every slot filled")),
            span: span_of(i),
            bbox: None,
            source: None,
        })
        .collect();

    let relevant_ids = planted.clone().map(|i| tokens[i].id.clone()).collect();
    let moment = if cfg.planted_size > 0 {
        Moment::new(tokens[planted.start].span.start, tokens[planted.end - 1].span.end)
    } else {
        Moment::new(0.0, 0.0)
    };
    let query = Query {
        id: format!("sim-{}", cfg.seed),
        text: None,
        embedding: Embedding::from_unit_unchecked(query_vec),
    };
    Ok(SimOutput { tokens, query, truth: GroundTruth { relevant_ids, moment } })
}

/// Fraction of ground-truth tokens present in the selection.
pub fn recovery_rate(result: &SelectionResult, truth: &GroundTruth, tokens: &[Token]) -> f64 {
    let relevant: HashSet<&str> = truth.relevant_ids.iter().map(String::as_str).collect();
    let hits = result
        .indices
        .iter()
        .filter_map(|&i| tokens.get(i))
        .filter(|t| relevant.contains(t.id.as_str()))
        .count();
    hits as f64 / relevant.len().max(1) as f64
}

/// Instance with one exactly duplicated pair among otherwise mutually
/// orthogonal tokens.
#[derive(Debug, Clone)]
pub struct DuplicatePair {
    pub tokens: Vec<Token>,
    pub query: Query,
    /// Positions of the two copies.
    pub pair: (usize, usize),
}

/// `n` tokens (n >= 3): basis vectors `e_0 .. e_{n-2}` followed by a copy
/// of `e_{(n-1)/2}`. The query is a seeded random direction.
pub fn duplicate_pair_instance(n: usize, seed: u64) -> Result<DuplicatePair> {
    if n < 3 {
        return Err(Error::InvalidConfig("duplicate-pair instance needs at least 3 tokens".into()));
    }
    let dim = n - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = |i: usize| {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        e
    };
    let copied = (n - 1) / 2;
    let mut tokens: Vec<Token> = (0..dim)
        .map(|i| Token {
            id: format!("basis{i}"),
            kind: TokenKind::Object,
            embedding: Embedding::from_unit_unchecked(basis(i)),
            span: Span::new(i as f64, i as f64 + 1.0),
            bbox: None,
            source: None,
        })
        .collect();
    tokens.push(Token {
        id: format!("copy{copied}"),
        kind: TokenKind::Object,
        embedding: Embedding::from_unit_unchecked(basis(copied)),
        span: Span::new(dim as f64, dim as f64 + 1.0),
        bbox: None,
        source: None,
    });
    let query = Query { id: "dup".into(), text: None, embedding: Embedding::from_unit_unchecked(random_unit(&mut rng, dim)) };
    Ok(DuplicatePair { tokens, query, pair: (copied, n - 1) })
}
