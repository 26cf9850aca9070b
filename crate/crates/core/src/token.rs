//! Token, query and video metadata shared by every other module.
//!
//! Embeddings are normalized once, at construction, so relevance and pairwise
//! similarity reduce to dot products downstream.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the L2 norm of a stored embedding.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

const ZERO_NORM: f64 = 1e-12;

/// Vectors whose norm is already this close to one are returned untouched,
/// which makes normalization idempotent bit for bit.
const IDEMPOTENT_SLACK: f64 = 1e-12;

/// The three semantic entity kinds a video is decomposed into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Scene,
    Object,
    Action,
}

impl TokenKind {
    pub const ALL: [TokenKind; 3] = [TokenKind::Scene, TokenKind::Object, TokenKind::Action];

    pub fn as_str(self) -> &'static str {
        match self {
            TokenKind::Scene => "scene",
            TokenKind::Object => "object",
            TokenKind::Action => "action",
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scales `raw` to unit L2 norm.
///
/// The vector is first rescaled by a power of two so its largest magnitude
/// lies in `[1, 2)`. That step is exact, so inputs that differ by a
/// power-of-two factor normalize to identical bits; other positive factors
/// agree to within rounding.
pub fn normalize_embedding(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::InvalidConfig("embedding dimension must be at least 1".into()));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("embedding contains a non-finite value".into()));
    }
    let max_abs = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Err(Error::ZeroVector);
    }
    let norm = l2_norm(raw);
    if norm < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    if (norm - 1.0).abs() <= IDEMPOTENT_SLACK {
        return Ok(raw.to_vec());
    }
    let scale = pow2_scale(max_abs);
    let scaled: Vec<f64> = raw.iter().map(|v| v * scale).collect();
    let norm = l2_norm(&scaled);
    Ok(scaled.into_iter().map(|v| v / norm).collect())
}

/// Power of two `s` with `max_abs * s` in `[1, 2)`.
fn pow2_scale(max_abs: f64) -> f64 {
    let mut exp = max_abs.log2().floor() as i32;
    // log2 can land one off near exact powers of two.
    if 2f64.powi(exp) > max_abs {
        exp -= 1;
    } else if 2f64.powi(exp + 1) <= max_abs {
        exp += 1;
    }
    2f64.powi(-exp)
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for x in v {
        acc += x * x;
    }
    acc.sqrt()
}

/// A unit-norm embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `raw` and wraps it.
    pub fn normalized(raw: &[f64]) -> Result<Self> {
        normalize_embedding(raw).map(Embedding)
    }

    /// Wraps a vector as-is. The caller vouches that it is unit norm;
    /// [`validate_token`] reports when it is not.
    pub fn from_unit_unchecked(values: Vec<f64>) -> Self {
        Embedding(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }
}

/// Closed time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start: f64,
    pub end: f64,
}

impl Span {
    pub fn new(start: f64, end: f64) -> Self {
        Span { start, end }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Axis-aligned rectangle in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox { x0, y0, x1, y1 }
    }

    pub fn is_valid(&self) -> bool {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        in_unit(self.x0)
            && in_unit(self.y0)
            && in_unit(self.x1)
            && in_unit(self.y1)
            && self.x0 <= self.x1
            && self.y0 <= self.y1
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

/// One semantic entity extracted from a video.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub id: String,
    pub kind: TokenKind,
    pub embedding: Embedding,
    pub span: Span,
    pub bbox: Option<BBox>,
    pub source: Option<String>,
}

impl Token {
    /// Builds a token, normalizing the raw embedding.
    pub fn new(id: impl Into<String>, kind: TokenKind, raw_embedding: &[f64], span: Span) -> Result<Self> {
        Ok(Token {
            id: id.into(),
            kind,
            embedding: Embedding::normalized(raw_embedding)?,
            span,
            bbox: None,
            source: None,
        })
    }

    pub fn with_bbox(mut self, bbox: BBox) -> Self {
        self.bbox = Some(bbox);
        self
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.embedding.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub text: Option<String>,
    pub embedding: Embedding,
}

impl Query {
    pub fn new(id: impl Into<String>, raw_embedding: &[f64]) -> Result<Self> {
        Ok(Query {
            id: id.into(),
            text: None,
            embedding: Embedding::normalized(raw_embedding)?,
        })
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.embedding.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub length_seconds: f64,
    pub fps: f64,
    pub frame_count: u64,
}

impl VideoMeta {
    /// Metadata with the frame count derived from length and rate.
    pub fn new(length_seconds: f64, fps: f64) -> Self {
        VideoMeta {
            length_seconds,
            fps,
            frame_count: (length_seconds * fps).round().max(1.0) as u64,
        }
    }

    /// Whether the frame count agrees with `length × fps` to within a frame.
    pub fn is_consistent(&self) -> bool {
        self.length_seconds > 0.0
            && self.fps > 0.0
            && self.frame_count >= 1
            && (self.frame_count as f64 - self.length_seconds * self.fps).abs() <= 1.0
    }
}

/// A violated token invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnitNorm { norm: f64 },
    SpanOrdering { start: f64, end: f64 },
    NegativeStart { start: f64 },
    SpanPastVideoEnd { end: f64, length: f64 },
    BBox(BBox),
    NonFinite,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnitNorm { norm } => write!(f, "unit norm violated: |embedding| = {norm}"),
            Violation::SpanOrdering { start, end } => {
                write!(f, "span ordering violated: t_start {start} > t_end {end}")
            }
            Violation::NegativeStart { start } => write!(f, "span start {start} is negative"),
            Violation::SpanPastVideoEnd { end, length } => {
                write!(f, "span end {end} exceeds video length {length}")
            }
            Violation::BBox(b) => write!(f, "bbox {:?} is not ordered within [0,1]", b.to_array()),
            Violation::NonFinite => f.write_str("embedding contains non-finite values"),
        }
    }
}

/// Every invariant a token breaks, empty when valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when any violation message contains `needle`.
    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.to_string().contains(needle))
    }
}

pub fn validate_token(token: &Token, meta: &VideoMeta) -> ValidationReport {
    let mut violations = Vec::new();
    let values = token.embedding.as_slice();
    if values.iter().any(|v| !v.is_finite()) {
        violations.push(Violation::NonFinite);
    } else {
        let norm = token.embedding.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            violations.push(Violation::UnitNorm { norm });
        }
    }
    let Span { start, end } = token.span;
    if start > end {
        violations.push(Violation::SpanOrdering { start, end });
    }
    if start < 0.0 {
        violations.push(Violation::NegativeStart { start });
    }
    if end > meta.length_seconds {
        violations.push(Violation::SpanPastVideoEnd { end, length: meta.length_seconds });
    }
    if let Some(bbox) = token.bbox {
        if !bbox.is_valid() {
            violations.push(Violation::BBox(bbox));
        }
    }
    ValidationReport { violations }
}
