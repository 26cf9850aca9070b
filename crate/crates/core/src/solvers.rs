//! Fixed-size subset selection: exact enumeration, greedy, swap local search
//! and a projected-gradient QP relaxation.
//!
//! Every solver breaks ties toward the lowest candidate index and reports
//! the objective of its final set through [`Problem::value`], the same
//! accumulation [`crate::similarity::objective`] uses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{pair_count, ObjectiveParams, Problem};
use crate::token::{Query, Token};

pub const DEFAULT_EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    Greedy,
    LocalSearch,
    QpRelax,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] =
        [SolverKind::Exact, SolverKind::Greedy, SolverKind::LocalSearch, SolverKind::QpRelax];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Greedy => "greedy",
            SolverKind::LocalSearch => "local",
            SolverKind::QpRelax => "qp",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SolverKind::Exact),
            "greedy" => Ok(SolverKind::Greedy),
            "local" | "local-search" | "local_search" => Ok(SolverKind::LocalSearch),
            "qp" | "qp-relax" | "qp_relax" => Ok(SolverKind::QpRelax),
            other => Err(Error::InvalidConfig(format!(
                "unknown solver '{other}' (expected exact, greedy, local or qp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub k: usize,
    pub params: ObjectiveParams,
    pub solver: SolverKind,
    pub max_passes: usize,
    pub qp_steps: usize,
    pub qp_step_size: f64,
    pub exact_limit: usize,
    /// Reserved; all current solvers are deterministic.
    pub seed: u64,
}

impl SelectionConfig {
    pub fn new(k: usize, params: ObjectiveParams, solver: SolverKind) -> Self {
        SelectionConfig {
            k,
            params,
            solver,
            max_passes: 100,
            qp_steps: 500,
            qp_step_size: 0.05,
            exact_limit: DEFAULT_EXACT_LIMIT,
            seed: 0,
        }
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.max_passes == 0 || self.qp_steps == 0 {
            return Err(Error::InvalidConfig("max_passes and qp_steps must be positive".into()));
        }
        if !(self.qp_step_size > 0.0 && self.qp_step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "qp_step_size must be positive, got {}",
                self.qp_step_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    /// Objective or marginal-gain evaluations performed.
    pub evaluations: u64,
    pub passes: u64,
    /// Swaps applied by local search.
    pub swaps: u64,
    /// Set when `k` exceeded the candidate count and was clamped.
    pub k_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Ascending candidate positions.
    pub indices: Vec<usize>,
    pub objective_value: f64,
    /// Relevance of each selected token, aligned with `indices`.
    pub per_token_relevance: Vec<f64>,
    pub solver_stats: SolverStats,
}

impl SelectionResult {
    fn from_indices(problem: &Problem<'_>, mut indices: Vec<usize>, stats: SolverStats) -> Self {
        indices.sort_unstable();
        let objective_value = if indices.is_empty() { 0.0 } else { problem.value(&indices) };
        let per_token_relevance = indices.iter().map(|&i| problem.relevance(i)).collect();
        SelectionResult { indices, objective_value, per_token_relevance, solver_stats: stats }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Runs the solver named in `cfg`.
pub fn select(tokens: &[Token], query: &Query, cfg: &SelectionConfig) -> Result<SelectionResult> {
    match cfg.solver {
        SolverKind::Exact => select_exact(tokens, query, cfg),
        SolverKind::Greedy => select_greedy(tokens, query, cfg),
        SolverKind::LocalSearch => select_local_search(tokens, query, cfg),
        SolverKind::QpRelax => select_qp_relax(tokens, query, cfg),
    }
}

fn prepare<'a>(tokens: &'a [Token], query: &Query, cfg: &SelectionConfig) -> Result<(Problem<'a>, usize, SolverStats)> {
    cfg.validate()?;
    if tokens.is_empty() {
        return Err(Error::EmptyInput);
    }
    let problem = Problem::new(tokens, query, cfg.params)?;
    let k = cfg.k.min(tokens.len());
    let stats = SolverStats { k_clamped: cfg.k > tokens.len(), ..Default::default() };
    Ok((problem, k, stats))
}

/// Top-`k` positions by relevance, ties toward the lower index.
pub fn top_k_by_relevance(relevance: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..relevance.len()).collect();
    order.sort_by(|&a, &b| relevance[b].total_cmp(&relevance[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Enumerates every `k`-subset and keeps the best; the first subset in
/// lexicographic order wins ties.
///
/// With `alpha == 1` the objective is modular, so the top-`k` relevance set
/// is optimal and is returned directly when `n` exceeds the enumeration
/// limit.
pub fn select_exact(tokens: &[Token], query: &Query, cfg: &SelectionConfig) -> Result<SelectionResult> {
    let (problem, k, mut stats) = prepare(tokens, query, cfg)?;
    let n = problem.len();
    if n > cfg.exact_limit {
        if cfg.params.alpha == 1.0 {
            stats.evaluations = n as u64;
            stats.passes = 1;
            let indices = top_k_by_relevance(problem.relevances(), k);
            return Ok(SelectionResult::from_indices(&problem, indices, stats));
        }
        return Err(Error::TooLarge { n, limit: cfg.exact_limit });
    }

    let mut combo: Vec<usize> = (0..k).collect();
    let mut best = combo.clone();
    let mut best_value = problem.value(&combo);
    stats.evaluations = 1;
    while next_combination(&mut combo, n) {
        let v = problem.value(&combo);
        stats.evaluations += 1;
        if v > best_value {
            best_value = v;
            best.copy_from_slice(&combo);
        }
    }
    stats.passes = 1;
    Ok(SelectionResult::from_indices(&problem, best, stats))
}

/// Advances `combo` to the next k-combination of `0..n` in lexicographic
/// order. Returns false after the last one.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Greedy state: the chosen set plus, for every candidate, the summed
/// weight to the chosen set.
struct Greedy {
    chosen: Vec<usize>,
    in_set: Vec<bool>,
    weight_to_set: Vec<f64>,
}

impl Greedy {
    fn run(problem: &Problem<'_>, k: usize, stats: &mut SolverStats) -> Self {
        let n = problem.len();
        let params = problem.params();
        let mut g = Greedy { chosen: Vec::with_capacity(k), in_set: vec![false; n], weight_to_set: vec![0.0; n] };
        for step in 0..k {
            // Marginal gain of adding c to a set of size `step`, scaled like
            // the objective when term normalization is on.
            let (rel_scale, pair_scale) = if params.normalize_terms {
                (1.0 / (step + 1) as f64, 1.0 / pair_count(step + 1).max(1) as f64)
            } else {
                (1.0, 1.0)
            };
            let mut best: Option<(usize, f64)> = None;
            for c in 0..n {
                if g.in_set[c] {
                    continue;
                }
                let gain = params.alpha * (problem.relevance(c) * rel_scale)
                    + (1.0 - params.alpha) * (g.weight_to_set[c] * pair_scale);
                stats.evaluations += 1;
                if best.is_none_or(|(_, b)| gain > b) {
                    best = Some((c, gain));
                }
            }
            let Some((pick, _)) = best else { break };
            g.add(problem, pick);
        }
        g
    }

    fn add(&mut self, problem: &Problem<'_>, pick: usize) {
        self.in_set[pick] = true;
        self.chosen.push(pick);
        for c in 0..problem.len() {
            if c != pick {
                self.weight_to_set[c] += problem.weight(c, pick);
            }
        }
    }
}

/// Adds, `k` times, the candidate with the largest marginal gain.
pub fn select_greedy(tokens: &[Token], query: &Query, cfg: &SelectionConfig) -> Result<SelectionResult> {
    let (problem, k, mut stats) = prepare(tokens, query, cfg)?;
    let g = Greedy::run(&problem, k, &mut stats);
    stats.passes = 1;
    Ok(SelectionResult::from_indices(&problem, g.chosen, stats))
}

/// Greedy start followed by best-improvement single swaps until no swap
/// strictly improves the objective or `max_passes` is reached.
pub fn select_local_search(tokens: &[Token], query: &Query, cfg: &SelectionConfig) -> Result<SelectionResult> {
    let (problem, k, mut stats) = prepare(tokens, query, cfg)?;
    let Greedy { chosen, mut in_set, .. } = Greedy::run(&problem, k, &mut stats);
    let n = problem.len();
    let params = *problem.params();

    let mut current: Vec<usize> = chosen;
    current.sort_unstable();
    let mut current_value = problem.value(&current);
    if k == n {
        stats.passes = 1;
        return Ok(SelectionResult::from_indices(&problem, current, stats));
    }

    // Summed weight from every candidate to the current set, excluding itself.
    let mut to_set = vec![0.0; n];
    for (c, slot) in to_set.iter_mut().enumerate() {
        for &s in &current {
            if s != c {
                *slot += problem.weight(c, s);
            }
        }
    }
    let (rel_scale, pair_scale) = if params.normalize_terms {
        (1.0 / k as f64, 1.0 / pair_count(k).max(1) as f64)
    } else {
        (1.0, 1.0)
    };

    for _ in 0..cfg.max_passes {
        stats.passes += 1;
        let mut best: Option<(usize, usize, f64)> = None;
        for (pos, &out) in current.iter().enumerate() {
            for cand in 0..n {
                if in_set[cand] {
                    continue;
                }
                let rel_delta = problem.relevance(cand) - problem.relevance(out);
                let pair_delta = (to_set[cand] - problem.weight(cand, out)) - to_set[out];
                let delta = params.alpha * (rel_delta * rel_scale) + (1.0 - params.alpha) * (pair_delta * pair_scale);
                stats.evaluations += 1;
                if delta > 0.0 && best.is_none_or(|(_, _, b)| delta > b) {
                    best = Some((pos, cand, delta));
                }
            }
        }
        let Some((pos, cand, _)) = best else { break };
        let out = current[pos];
        let mut trial = current.clone();
        trial[pos] = cand;
        trial.sort_unstable();
        let trial_value = problem.value(&trial);
        stats.evaluations += 1;
        if trial_value <= current_value {
            // The predicted gain was rounding noise.
            break;
        }
        for (c, slot) in to_set.iter_mut().enumerate() {
            if c != out {
                *slot -= problem.weight(c, out);
            }
            if c != cand {
                *slot += problem.weight(c, cand);
            }
        }
        in_set[out] = false;
        in_set[cand] = true;
        current = trial;
        current_value = trial_value;
        stats.swaps += 1;
    }
    Ok(SelectionResult::from_indices(&problem, current, stats))
}

/// Relaxes the indicator vector to the capped simplex
/// `{x in [0,1]^n : sum x = k}`, runs projected gradient ascent on
///
/// ```text
/// alpha * r.x + (1 - alpha) * sum_{i<j} D_ij x_i x_j
/// ```
///
/// and rounds to the `k` largest coordinates. The step is
/// `min(qp_step_size, 1/L)`; ties in the rounding fall to the larger final
/// gradient, then the lower index.
pub fn select_qp_relax(tokens: &[Token], query: &Query, cfg: &SelectionConfig) -> Result<SelectionResult> {
    let (problem, k, mut stats) = prepare(tokens, query, cfg)?;
    let n = problem.len();
    let params = *problem.params();
    let (rel_scale, pair_scale) = if params.normalize_terms {
        (1.0 / k as f64, 1.0 / pair_count(k).max(1) as f64)
    } else {
        (1.0, 1.0)
    };

    // Cap the step at 1/L, L bounding the gradient's Lipschitz constant by
    // the largest row sum of the pair weights, so each step cannot decrease
    // the relaxed objective.
    let lipschitz = if params.alpha < 1.0 {
        let max_row = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).map(|j| problem.weight(i, j)).sum::<f64>())
            .fold(0.0, f64::max);
        (1.0 - params.alpha) * pair_scale * max_row
    } else {
        0.0
    };
    let step = if lipschitz > 0.0 { cfg.qp_step_size.min(1.0 / lipschitz) } else { cfg.qp_step_size };

    let mut x = vec![k as f64 / n as f64; n];
    let mut grad = vec![0.0; n];
    let mut y = vec![0.0; n];
    for _ in 0..cfg.qp_steps {
        qp_gradient(&problem, &x, rel_scale, pair_scale, &mut grad);
        for i in 0..n {
            y[i] = x[i] + step * grad[i];
        }
        project_capped_simplex(&y, k as f64, &mut x);
        stats.evaluations += 1;
    }
    stats.passes = cfg.qp_steps as u64;
    qp_gradient(&problem, &x, rel_scale, pair_scale, &mut grad);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x[b].total_cmp(&x[a])
            .then_with(|| grad[b].total_cmp(&grad[a]))
            .then(a.cmp(&b))
    });
    order.truncate(k);
    Ok(SelectionResult::from_indices(&problem, order, stats))
}

fn qp_gradient(problem: &Problem<'_>, x: &[f64], rel_scale: f64, pair_scale: f64, out: &mut [f64]) {
    let alpha = problem.params().alpha;
    if alpha == 1.0 {
        for (i, g) in out.iter_mut().enumerate() {
            *g = problem.relevance(i) * rel_scale;
        }
        return;
    }
    for (i, g) in out.iter_mut().enumerate() {
        let mut pair = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            if j != i && xj != 0.0 {
                pair += problem.weight(i, j) * xj;
            }
        }
        *g = alpha * problem.relevance(i) * rel_scale + (1.0 - alpha) * pair * pair_scale;
    }
}

const PROJECTION_TOLERANCE: f64 = 1e-9;

/// Euclidean projection of `y` onto `{x : 0 <= x_i <= 1, sum x = total}`,
/// written into `out`. Bisects on the shift `tau` in
/// `x_i = clamp(y_i - tau, 0, 1)`.
pub fn project_capped_simplex(y: &[f64], total: f64, out: &mut [f64]) {
    let n = y.len();
    debug_assert!(total >= 0.0 && total <= n as f64);
    let mass = |tau: f64| y.iter().map(|&v| (v - tau).clamp(0.0, 1.0)).sum::<f64>();
    let (mut lo, mut hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    // mass(lo - 1) = n >= total and mass(hi) = 0 <= total.
    lo -= 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = mass(mid);
        if (m - total).abs() <= PROJECTION_TOLERANCE * 1e-3 || hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            lo = mid;
            hi = mid;
            break;
        }
        if m > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    for (o, &v) in out.iter_mut().zip(y) {
        *o = (v - tau).clamp(0.0, 1.0);
    }
}
