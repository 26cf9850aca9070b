use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde_json::json;
use tokensel::grounding::{DEFAULT_KS, DEFAULT_THRESHOLDS};
use tokensel::io::{load_query, load_tokens, load_truth, save_json, save_tokens, TokenFile, TruthFile};
use tokensel::{
    baseline_ground, generate, recall_at, recovery_rate, run_global, run_stream, ObjectiveParams, Query,
    SelectionConfig, SimConfig, StreamConfig, Token, VideoMeta,
};

use crate::report::{RunReport, StreamSummary, SweepPoint};
use crate::{Command, GroundEvalArgs, InputArgs, SelectArgs, SelectionArgs, SimulateArgs, StreamArgs, SweepArgs};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome = Result<RunReport, Failure>;

pub fn run(command: Command) -> Outcome {
    let started = Instant::now();
    let mut report = match command {
        Command::Simulate(args) => simulate(&args),
        Command::Select(args) => select(&args),
        Command::Stream(args) => stream(&args),
        Command::GroundEval(args) => ground_eval(&args),
        Command::SweepAlpha(args) => sweep(&args),
    }?;
    report.wall_clock_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

fn selection_config(args: &SelectionArgs) -> SelectionConfig {
    let params = ObjectiveParams { alpha: args.alpha, epsilon: args.epsilon, normalize_terms: args.normalize_terms };
    SelectionConfig {
        max_passes: args.max_passes as usize,
        qp_steps: args.qp_steps as usize,
        qp_step_size: args.qp_step_size,
        exact_limit: args.exact_limit as usize,
        seed: args.seed,
        ..SelectionConfig::new(args.k as usize, params, args.solver)
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

struct Inputs {
    file: TokenFile,
    query: Query,
    truth: Option<TruthFile>,
}

fn resolve_query(query: Option<&Path>, truth_path: Option<&Path>, truth: Option<&TruthFile>) -> Result<Query, Failure> {
    if let Some(path) = query {
        return load_query(path).map_err(|e| Failure::Data(e.into()));
    }
    match (truth_path, truth.and_then(|t| t.query.clone())) {
        (_, Some(record)) => record.into_query().map_err(|e| Failure::Data(e.into())),
        (Some(path), None) => Err(Failure::Data(anyhow::anyhow!(
            "{} has no query; pass --query",
            path.display()
        ))),
        (None, None) => Err(Failure::Usage("--query is required unless --truth carries a query".into())),
    }
}

fn load_inputs(args: &InputArgs) -> Result<Inputs, Failure> {
    let file = load_tokens(&args.tokens).context("loading tokens")?;
    let truth = args.truth.as_deref().map(load_truth).transpose().context("loading ground truth")?;
    let query = resolve_query(args.query.as_deref(), args.truth.as_deref(), truth.as_ref())?;
    if file.tokens.is_empty() {
        return Err(Failure::Data(anyhow::anyhow!("{} holds no tokens", args.tokens.display())));
    }
    if query.dim() != file.dim {
        return Err(Failure::Data(anyhow::anyhow!(
            "query dimension {} does not match token dimension {}",
            query.dim(),
            file.dim
        )));
    }
    Ok(Inputs { file, query, truth })
}

fn input_echo(args: &InputArgs) -> serde_json::Value {
    json!({
        "tokens": path_str(&args.tokens),
        "query": args.query.as_deref().map(path_str),
        "truth": args.truth.as_deref().map(path_str),
    })
}

fn simulate(args: &SimulateArgs) -> Outcome {
    let cfg = SimConfig {
        num_tokens: args.num_tokens as usize,
        dim: args.dim as usize,
        kind_mix: args.kind_mix,
        num_clusters: args.clusters as usize,
        cluster_spread: args.spread,
        planted_size: args.planted as usize,
        planted_margin: args.margin,
        video_length: args.video_length,
        seed: args.seed,
    };
    if cfg.planted_size > cfg.num_tokens {
        return Err(Failure::Usage(format!(
            "--planted {} exceeds --num-tokens {}",
            cfg.planted_size, cfg.num_tokens
        )));
    }
    let out = generate(&cfg).context("generating tokens")?;
    let meta = VideoMeta::new(cfg.video_length, 1.0);
    save_tokens(&args.out, &out.tokens, &meta).context("writing token file")?;
    save_json(&args.truth, &TruthFile::new(&out.query, &out.truth)).context("writing ground truth")?;

    let mut report = RunReport::new("simulate", serde_json::to_value(&cfg).context("config echo")?);
    for t in &out.tokens {
        *report.per_kind_counts.entry(t.kind.as_str().to_string()).or_default() += 1;
    }
    report.outputs = Some(json!({
        "tokens": path_str(&args.out),
        "truth": path_str(&args.truth),
        "num_tokens": out.tokens.len(),
        "relevant_ids": out.truth.relevant_ids,
        "moment": out.truth.moment,
    }));
    Ok(report)
}

fn select(args: &SelectArgs) -> Outcome {
    let inputs = load_inputs(&args.input)?;
    let cfg = selection_config(&args.selection);
    let presample = args.presample.map(|p| p as usize);
    let result = run_global(&inputs.file.tokens, &inputs.query, &cfg, presample).context("selecting tokens")?;

    let mut report = RunReport::new(
        "select",
        json!({ "input": input_echo(&args.input), "selection": cfg, "presample": presample }),
    );
    report.record_selection(result.indices.iter().map(|&i| &inputs.file.tokens[i]));
    report.objective_value = Some(result.objective_value);
    report.solver_stats = Some(result.solver_stats);
    report.recovery_rate =
        inputs.truth.as_ref().map(|t| recovery_rate(&result, &t.ground_truth(), &inputs.file.tokens));
    Ok(report)
}

fn stream(args: &StreamArgs) -> Outcome {
    let inputs = load_inputs(&args.input)?;
    let cfg = StreamConfig::new(args.window as usize, selection_config(&args.selection));
    let state = run_stream(&inputs.file.tokens, &inputs.query, &cfg).context("streaming selection")?;

    let mut report = RunReport::new("stream", json!({ "input": input_echo(&args.input), "stream": cfg }));
    report.record_selection(state.retained.iter());
    if let Some(last) = &state.last_result {
        report.objective_value = Some(last.objective_value);
        report.solver_stats = Some(last.solver_stats);
    }
    report.stream = Some(StreamSummary { steps: state.step, peak_candidates: state.peak_candidates });
    if let Some(truth) = &inputs.truth {
        let relevant: HashSet<&str> = truth.relevant_ids.iter().map(String::as_str).collect();
        let hits = state.retained.iter().filter(|t| relevant.contains(t.id.as_str())).count();
        report.recovery_rate = Some(hits as f64 / relevant.len().max(1) as f64);
    }
    Ok(report)
}

fn ground_eval(args: &GroundEvalArgs) -> Outcome {
    let file = load_tokens(&args.tokens).context("loading tokens")?;
    let truth = load_truth(&args.truth).context("loading ground truth")?;
    let query = resolve_query(args.query.as_deref(), Some(&args.truth), Some(&truth))?;

    let candidates: Vec<Token> = match &args.selection {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let selection: RunReport =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let keep: HashSet<&str> = selection.selected_ids.iter().map(String::as_str).collect();
            let picked: Vec<Token> = file.tokens.iter().filter(|t| keep.contains(t.id.as_str())).cloned().collect();
            if picked.len() != keep.len() {
                return Err(Failure::Data(anyhow::anyhow!(
                    "{} names tokens missing from {}",
                    path.display(),
                    args.tokens.display()
                )));
            }
            picked
        }
        None => file.tokens.clone(),
    };
    if candidates.is_empty() {
        return Err(Failure::Data(anyhow::anyhow!("no tokens to ground")));
    }
    let moments = baseline_ground(&candidates, &query, args.top_k as usize).context("grounding")?;
    let metrics = recall_at(std::slice::from_ref(&moments), &[truth.moment], &DEFAULT_KS, &DEFAULT_THRESHOLDS)
        .context("scoring")?;

    let mut report = RunReport::new(
        "ground-eval",
        json!({
            "tokens": path_str(&args.tokens),
            "truth": path_str(&args.truth),
            "selection": args.selection.as_deref().map(path_str),
            "top_k": args.top_k,
        }),
    );
    report.grounding = Some(metrics);
    report.outputs = Some(json!({ "ground_truth": truth.moment, "predictions": moments, "candidates": candidates.len() }));
    Ok(report)
}

fn sweep(args: &SweepArgs) -> Outcome {
    let inputs = load_inputs(&args.input)?;
    let base = selection_config(&args.selection);
    let presample = args.presample.map(|p| p as usize);
    let mut points = Vec::with_capacity(args.alphas.0.len());
    for &alpha in &args.alphas.0 {
        let cfg = SelectionConfig { params: ObjectiveParams { alpha, ..base.params }, ..base };
        let result = run_global(&inputs.file.tokens, &inputs.query, &cfg, presample)
            .with_context(|| format!("selecting at alpha {alpha}"))?;
        points.push(SweepPoint {
            alpha,
            objective_value: result.objective_value,
            selected_ids: result.indices.iter().map(|&i| inputs.file.tokens[i].id.clone()).collect(),
            recovery_rate: inputs
                .truth
                .as_ref()
                .map(|t| recovery_rate(&result, &t.ground_truth(), &inputs.file.tokens)),
        });
    }
    let mut report = RunReport::new(
        "sweep-alpha",
        json!({ "input": input_echo(&args.input), "selection": base, "alphas": args.alphas.0, "presample": presample }),
    );
    report.sweep = points;
    Ok(report)
}
