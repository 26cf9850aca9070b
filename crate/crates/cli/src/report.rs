use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokensel::{GroundingMetrics, SolverStats, Token, TokenKind};

/// JSON document printed by every subcommand. Apart from `wall_clock_ms`
/// it is a pure function of the inputs and flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selected_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_value: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_kind_counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_stats: Option<SolverStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<StreamSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding: Option<GroundingMetrics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Value>,
    pub wall_clock_ms: u64,
}

impl RunReport {
    pub fn new(command: &str, config: Value) -> Self {
        RunReport {
            command: command.to_string(),
            config,
            selected_ids: Vec::new(),
            objective_value: None,
            per_kind_counts: BTreeMap::new(),
            solver_stats: None,
            stream: None,
            recovery_rate: None,
            grounding: None,
            sweep: Vec::new(),
            outputs: None,
            wall_clock_ms: 0,
        }
    }

    pub fn record_selection<'a>(&mut self, selected: impl IntoIterator<Item = &'a Token>) {
        let mut counts: BTreeMap<String, usize> =
            TokenKind::ALL.iter().map(|k| (k.as_str().to_string(), 0)).collect();
        for t in selected {
            self.selected_ids.push(t.id.clone());
            *counts.entry(t.kind.as_str().to_string()).or_default() += 1;
        }
        self.per_kind_counts = counts;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamSummary {
    pub steps: u64,
    pub peak_candidates: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub objective_value: f64,
    pub selected_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_rate: Option<f64>,
}
