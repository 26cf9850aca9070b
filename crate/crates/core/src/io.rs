//! Line-delimited JSON token files and the JSON query / ground-truth files.
//!
//! A token file holds one JSON object per line:
//!
//! ```text
//! {"meta": true, "video_length": 600.0, "fps": 1.0, "dim": 8}        (optional, first line)
//! {"id": "tok00000", "kind": "scene", "t_start": 0.0, "t_end": 3.0, "embedding": [...]}
//! ```
//!
//! `bbox` (four numbers) and `source` (string) are optional per record.
//! Blank lines are skipped. Line numbers in errors are 1-based.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::error::Error as CoreError;
use crate::grounding::Moment;
use crate::simulator::GroundTruth;
use crate::token::{validate_token, BBox, Embedding, Query, Span, Token, TokenKind, VideoMeta};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot access {path}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: embedding has dimension {found}, expected {expected}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: embedding is a zero vector")]
    ZeroVector { line: usize },
    #[error("line {line}: duplicate token id '{id}'")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {message}")]
    InvalidToken { line: usize, message: String },
    #[error("{0}")]
    Json(String),
}

impl LoadError {
    /// Source line of the error, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            LoadError::Parse { line, .. }
            | LoadError::DimensionMismatch { line, .. }
            | LoadError::ZeroVector { line }
            | LoadError::DuplicateId { line, .. }
            | LoadError::InvalidToken { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MetaRecord {
    meta: bool,
    video_length: f64,
    fps: f64,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TokenRecord {
    id: String,
    kind: TokenKind,
    t_start: f64,
    t_end: f64,
    embedding: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenFile {
    pub tokens: Vec<Token>,
    pub meta: VideoMeta,
    pub dim: usize,
}

pub fn load_tokens(path: impl AsRef<Path>) -> Result<TokenFile, LoadError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    read_tokens(BufReader::new(file)).map_err(|e| match e {
        LoadError::Io { source, .. } => LoadError::Io { path: path.display().to_string(), source },
        other => other,
    })
}

/// Parses a token file. Embeddings are normalized and tokens are ordered by
/// start time (stable). Without a header the video length defaults to the
/// latest `t_end`, fps to 1 and the dimension to the first record's.
pub fn read_tokens(reader: impl BufRead) -> Result<TokenFile, LoadError> {
    let mut header: Option<MetaRecord> = None;
    let mut dim: Option<usize> = None;
    let mut seen_ids = HashSet::new();
    let mut parsed: Vec<(usize, Token)> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| LoadError::Io { path: String::new(), source })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(trimmed)
            .map_err(|e| LoadError::Parse { line: line_no, message: e.to_string() })?;
        if value.get("meta").and_then(Value::as_bool) == Some(true) {
            if header.is_some() || !parsed.is_empty() {
                return Err(LoadError::Parse {
                    line: line_no,
                    message: "meta header must be the first record".into(),
                });
            }
            let meta: MetaRecord = serde_json::from_value(value)
                .map_err(|e| LoadError::Parse { line: line_no, message: e.to_string() })?;
            if !(meta.video_length > 0.0 && meta.fps > 0.0 && meta.dim > 0) {
                return Err(LoadError::Parse {
                    line: line_no,
                    message: "meta header needs positive video_length, fps and dim".into(),
                });
            }
            dim = Some(meta.dim);
            header = Some(meta);
            continue;
        }
        let record: TokenRecord = serde_json::from_value(value)
            .map_err(|e| LoadError::Parse { line: line_no, message: e.to_string() })?;
        let expected = *dim.get_or_insert(record.embedding.len());
        if record.embedding.len() != expected {
            return Err(LoadError::DimensionMismatch { line: line_no, expected, found: record.embedding.len() });
        }
        let embedding = Embedding::normalized(&record.embedding).map_err(|e| match e {
            CoreError::ZeroVector => LoadError::ZeroVector { line: line_no },
            other => LoadError::Parse { line: line_no, message: other.to_string() },
        })?;
        if !seen_ids.insert(record.id.clone()) {
            return Err(LoadError::DuplicateId { line: line_no, id: record.id });
        }
        parsed.push((
            line_no,
            Token {
                id: record.id,
                kind: record.kind,
                embedding,
                span: Span::new(record.t_start, record.t_end),
                bbox: record.bbox.map(|[x0, y0, x1, y1]| BBox::new(x0, y0, x1, y1)),
                source: record.source,
            },
        ));
    }

    let meta = match &header {
        Some(h) => VideoMeta::new(h.video_length, h.fps),
        None => {
            let length = parsed.iter().map(|(_, t)| t.span.end).fold(0.0_f64, f64::max);
            VideoMeta::new(if length > 0.0 { length } else { 1.0 }, 1.0)
        }
    };
    for (line, token) in &parsed {
        let report = validate_token(token, &meta);
        if let Some(v) = report.violations.first() {
            return Err(LoadError::InvalidToken { line: *line, message: v.to_string() });
        }
    }
    parsed.sort_by(|a, b| a.1.span.start.total_cmp(&b.1.span.start));
    Ok(TokenFile { tokens: parsed.into_iter().map(|(_, t)| t).collect(), meta, dim: dim.unwrap_or(0) })
}

/// Writes a header line followed by one record per token.
pub fn write_tokens(mut writer: impl Write, tokens: &[Token], meta: &VideoMeta) -> std::io::Result<()> {
    let dim = tokens.first().map_or(0, Token::dim);
    let header = MetaRecord { meta: true, video_length: meta.length_seconds, fps: meta.fps, dim };
    serde_json::to_writer(&mut writer, &header)?;
    writeln!(writer)?;
    for t in tokens {
        let record = TokenRecord {
            id: t.id.clone(),
            kind: t.kind,
            t_start: t.span.start,
            t_end: t.span.end,
            embedding: t.embedding.as_slice().to_vec(),
            bbox: t.bbox.map(|b| b.to_array()),
            source: t.source.clone(),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writeln!(writer)?;
    }
    writer.flush()
}

pub fn save_tokens(path: impl AsRef<Path>, tokens: &[Token], meta: &VideoMeta) -> Result<(), LoadError> {
    let path = path.as_ref();
    let io_err = |source| LoadError::Io { path: path.display().to_string(), source };
    let file = File::create(path).map_err(io_err)?;
    write_tokens(BufWriter::new(file), tokens, meta).map_err(io_err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub embedding: Vec<f64>,
}

impl QueryRecord {
    pub fn from_query(q: &Query) -> Self {
        QueryRecord { id: q.id.clone(), text: q.text.clone(), embedding: q.embedding.as_slice().to_vec() }
    }

    pub fn into_query(self) -> Result<Query, LoadError> {
        let embedding = Embedding::normalized(&self.embedding).map_err(|e| LoadError::Json(format!("query: {e}")))?;
        Ok(Query { id: self.id, text: self.text, embedding })
    }
}

/// Ground-truth file written next to a simulated token file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<QueryRecord>,
    #[serde(default)]
    pub relevant_ids: Vec<String>,
    pub moment: Moment,
}

impl TruthFile {
    pub fn new(query: &Query, truth: &GroundTruth) -> Self {
        TruthFile {
            query: Some(QueryRecord::from_query(query)),
            relevant_ids: truth.relevant_ids.clone(),
            moment: truth.moment,
        }
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth { relevant_ids: self.relevant_ids.clone(), moment: self.moment }
    }
}

fn read_json(path: &Path) -> Result<Value, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| LoadError::Json(format!("{}: {e}", path.display())))
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<TruthFile, LoadError> {
    let path = path.as_ref();
    serde_json::from_value(read_json(path)?).map_err(|e| LoadError::Json(format!("{}: {e}", path.display())))
}

/// Reads a query from a bare query object or from the `query` field of a
/// ground-truth file.
pub fn load_query(path: impl AsRef<Path>) -> Result<Query, LoadError> {
    let path = path.as_ref();
    let mut value = read_json(path)?;
    if let Some(inner) = value.get_mut("query") {
        value = inner.take();
    }
    let record: QueryRecord =
        serde_json::from_value(value).map_err(|e| LoadError::Json(format!("{}: {e}", path.display())))?;
    record.into_query()
}

pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), LoadError> {
    let path = path.as_ref();
    let io_err = |source| LoadError::Io { path: path.display().to_string(), source };
    let mut file = BufWriter::new(File::create(path).map_err(io_err)?);
    serde_json::to_writer_pretty(&mut file, value).map_err(|e| LoadError::Json(e.to_string()))?;
    writeln!(file).map_err(io_err)?;
    file.flush().map_err(io_err)
}
