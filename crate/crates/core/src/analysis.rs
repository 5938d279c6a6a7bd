//! Metrics over model runs and builder session logs.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curriculum::Curriculum;
use crate::error::{Error, Result};
use crate::grid::{apply_binary, apply_unary, Grid, Operator, Primitive};
use crate::learn::{compression_utility, oracle_helpers};
use crate::models::RunRecord;
use crate::program::{evaluate, expand, Library, Program};

pub const SESSION_LOG_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperandRef {
    Primitive(Primitive),
    Helper(String),
    /// 0-based index into the trial's committed steps.
    Step(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSpec {
    pub op: String,
    pub operands: Vec<OperandRef>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Preview,
    Commit,
    Cancel,
    SaveHelper,
    DeleteHelper,
    Submit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub t_ms: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<StepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub helper_id: Option<String>,
    /// Committed step saved by a `save_helper` event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_key: Option<String>,
}

impl Event {
    fn bare(t_ms: u64, kind: EventKind) -> Self {
        Event {
            t_ms,
            kind,
            step: None,
            helper_id: None,
            from_step: None,
            result_key: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialLog {
    pub trial_index: usize,
    #[serde(with = "crate::grid::as_key")]
    pub target: Grid,
    pub events: Vec<Event>,
    #[serde(with = "crate::grid::as_key")]
    pub submitted: Grid,
    pub correct: bool,
    pub steps_committed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionLog {
    pub experiment_id: String,
    pub participant_id: String,
    pub dsl_version: String,
    pub trials: Vec<TrialLog>,
}

impl SessionLog {
    pub fn from_json(text: &str) -> Result<SessionLog> {
        serde_json::from_str(text).map_err(|e| Error::RejectLog(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub trial_index: usize,
    pub event_index: Option<usize>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub participant_id: String,
    pub passed: bool,
    pub events_checked: usize,
    pub discrepancies: Vec<Discrepancy>,
}

#[derive(Default)]
struct HelperPanel {
    live: BTreeMap<String, Grid>,
    order: Vec<String>,
}

impl HelperPanel {
    fn resolve(&self, id: &str) -> Option<Grid> {
        self.live.get(id).copied()
    }
}

fn reject(trial: usize, event: usize, why: impl std::fmt::Display) -> Error {
    Error::RejectLog(format!("trial {trial}, event {event}: {why}"))
}

fn run_step(
    spec: &StepSpec,
    steps: &[Grid],
    panel: &HelperPanel,
    trial: usize,
    event: usize,
) -> Result<Grid> {
    let op: Operator = spec.op.parse().map_err(|e| reject(trial, event, e))?;
    if spec.operands.len() != op.arity() {
        return Err(reject(
            trial,
            event,
            format!("`{}` takes {} operand(s)", op, op.arity()),
        ));
    }
    let mut args = Vec::with_capacity(2);
    for r in &spec.operands {
        args.push(match r {
            OperandRef::Primitive(p) => p.grid(),
            OperandRef::Helper(id) => panel
                .resolve(id)
                .ok_or_else(|| reject(trial, event, format!("helper `{id}` does not exist")))?,
            OperandRef::Step(i) => *steps
                .get(*i)
                .ok_or_else(|| reject(trial, event, format!("step {i} not committed yet")))?,
        });
    }
    match args[..] {
        [a] => apply_unary(op, a),
        [a, b] => apply_binary(op, a, b),
        _ => unreachable!("arity checked"),
    }
}

/// Re-executes every step of a session and compares the recorded results.
/// Structural problems (unknown operators, dangling references, missing
/// fields) reject the log; value mismatches are reported as discrepancies.
pub fn replay(log: &SessionLog) -> Result<ReplayReport> {
    if log.dsl_version != SESSION_LOG_VERSION {
        return Err(Error::RejectLog(format!(
            "unsupported dsl_version `{}`",
            log.dsl_version
        )));
    }
    let mut panel = HelperPanel::default();
    let mut discrepancies = Vec::new();
    let mut events_checked = 0;
    let mut seen_trials = HashSet::new();
    for trial in &log.trials {
        let ti = trial.trial_index;
        if !seen_trials.insert(ti) {
            return Err(Error::RejectLog(format!("trial {ti} appears twice")));
        }
        let mut steps: Vec<Grid> = Vec::new();
        let mut last_t = 0;
        let mut submitted = false;
        for (ei, ev) in trial.events.iter().enumerate() {
            events_checked += 1;
            if ev.t_ms < last_t {
                return Err(reject(ti, ei, "timestamps go backwards"));
            }
            last_t = ev.t_ms;
            if submitted {
                return Err(reject(ti, ei, "event after submit"));
            }
            let recorded = match &ev.result_key {
                Some(k) => Some(Grid::from_key(k).map_err(|e| reject(ti, ei, e))?),
                None => None,
            };
            match ev.kind {
                EventKind::Preview | EventKind::Commit => {
                    let spec = ev
                        .step
                        .as_ref()
                        .ok_or_else(|| reject(ti, ei, "missing step"))?;
                    let result = run_step(spec, &steps, &panel, ti, ei)?;
                    match recorded {
                        Some(r) if r != result => discrepancies.push(Discrepancy {
                            trial_index: ti,
                            event_index: Some(ei),
                            message: format!("recorded result differs from recomputation: {}", result.key()),
                        }),
                        None if ev.kind == EventKind::Commit => {
                            return Err(reject(ti, ei, "commit without result_key"))
                        }
                        _ => {}
                    }
                    if ev.kind == EventKind::Commit {
                        steps.push(result);
                    }
                }
                EventKind::Cancel => {}
                EventKind::SaveHelper => {
                    let id = ev
                        .helper_id
                        .clone()
                        .ok_or_else(|| reject(ti, ei, "missing helper_id"))?;
                    let from = ev
                        .from_step
                        .ok_or_else(|| reject(ti, ei, "missing from_step"))?;
                    let grid = *steps
                        .get(from)
                        .ok_or_else(|| reject(ti, ei, format!("step {from} not committed")))?;
                    if recorded.is_some_and(|r| r != grid) {
                        discrepancies.push(Discrepancy {
                            trial_index: ti,
                            event_index: Some(ei),
                            message: "saved helper differs from its step".into(),
                        });
                    }
                    if panel.live.contains_key(&id) {
                        return Err(reject(ti, ei, format!("helper `{id}` already exists")));
                    }
                    panel.live.insert(id.clone(), grid);
                    panel.order.push(id);
                }
                EventKind::DeleteHelper => {
                    let id = ev
                        .helper_id
                        .as_ref()
                        .ok_or_else(|| reject(ti, ei, "missing helper_id"))?;
                    if panel.live.remove(id).is_none() {
                        return Err(reject(ti, ei, format!("helper `{id}` does not exist")));
                    }
                }
                EventKind::Submit => submitted = true,
            }
        }
        let canvas = steps.last().copied().unwrap_or(Grid::BLANK);
        let mut note = |message: String| {
            discrepancies.push(Discrepancy {
                trial_index: ti,
                event_index: None,
                message,
            })
        };
        if !submitted {
            note("trial has no submit event".into());
        }
        if trial.steps_committed != steps.len() {
            note(format!(
                "steps_committed is {}, log has {} commits",
                trial.steps_committed,
                steps.len()
            ));
        }
        if trial.submitted != canvas {
            note("submitted grid differs from the final canvas".into());
        }
        if trial.correct != (trial.submitted == trial.target) {
            note("correct flag disagrees with exact match".into());
        }
    }
    Ok(ReplayReport {
        participant_id: log.participant_id.clone(),
        passed: discrepancies.is_empty(),
        events_checked,
        discrepancies,
    })
}

/// Helpers created by a participant up to and including `trial`, in
/// creation order, deduplicated by output.
fn created_helpers(log: &SessionLog, trial: usize) -> Vec<Grid> {
    let mut out: Vec<Grid> = Vec::new();
    for t in log.trials.iter().filter(|t| t.trial_index <= trial) {
        let mut steps: Vec<Grid> = Vec::new();
        for ev in &t.events {
            let key = ev.result_key.as_deref().and_then(|k| Grid::from_key(k).ok());
            match ev.kind {
                EventKind::Commit => steps.extend(key),
                EventKind::SaveHelper => {
                    let g = key.or_else(|| ev.from_step.and_then(|i| steps.get(i).copied()));
                    if let Some(g) = g {
                        if !out.contains(&g) {
                            out.push(g);
                        }
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Live helper count at the end of `trial`.
fn library_size(log: &SessionLog, trial: usize) -> usize {
    let mut live = HashSet::new();
    for t in log.trials.iter().filter(|t| t.trial_index <= trial) {
        for ev in &t.events {
            match (ev.kind, &ev.helper_id) {
                (EventKind::SaveHelper, Some(id)) => {
                    live.insert(id.clone());
                }
                (EventKind::DeleteHelper, Some(id)) => {
                    live.remove(id);
                }
                _ => {}
            }
        }
    }
    live.len()
}

pub fn mean_library_size(logs: &[SessionLog], trial: usize) -> f64 {
    if logs.is_empty() {
        return 0.0;
    }
    logs.iter().map(|l| library_size(l, trial)).sum::<usize>() as f64 / logs.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopK {
    Fixed(usize),
    /// Rounded (half up) mean library size at the trial.
    Auto,
}

impl TopK {
    pub fn resolve(self, logs: &[SessionLog], trial: usize) -> usize {
        match self {
            TopK::Fixed(k) => k,
            TopK::Auto => (mean_library_size(logs, trial) + 0.5).floor() as usize,
        }
    }
}

/// The `k` helper outputs created by the most participants by `trial`.
/// Equal counts are ordered by a seeded shuffle.
pub fn topk_helpers(logs: &[SessionLog], trial: usize, k: TopK, seed: u64) -> Vec<String> {
    let k = k.resolve(logs, trial);
    let mut counts: HashMap<Grid, usize> = HashMap::new();
    for log in logs {
        for g in created_helpers(log, trial) {
            *counts.entry(g).or_default() += 1;
        }
    }
    let mut keys: Vec<Grid> = counts.keys().copied().collect();
    keys.sort();
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    keys.sort_by_key(|g| std::cmp::Reverse(counts[g]));
    keys.into_iter().take(k).map(|g| g.key()).collect()
}

/// First ground-truth subtree (trial order, then post-order) producing
/// `grid`, looking only at trials `1..=upto` when given.
pub fn ground_truth_subtree(c: &Curriculum, grid: Grid, upto: Option<usize>) -> Option<Program> {
    let lib = Library::new();
    let limit = upto.unwrap_or(c.len()).min(c.len());
    c.trials[..limit]
        .iter()
        .flat_map(|t| t.solution.subtrees_postorder())
        .find(|s| evaluate(s, &lib).ok() == Some(grid))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub cu: u64,
    pub resolved: Vec<Program>,
    pub unresolved: Vec<String>,
}

/// Compression utility of helper outputs over the curriculum's ground
/// truth. Each key resolves to the ground-truth subtree with that output,
/// else to the supplied construction; keys with neither are reported.
pub fn corpus_compression(
    helper_keys: &[String],
    c: &Curriculum,
    constructions: &HashMap<String, Program>,
) -> Result<CompressionReport> {
    let mut resolved = Vec::new();
    let mut unresolved = Vec::new();
    for key in helper_keys {
        let grid = Grid::from_key(key)?;
        match ground_truth_subtree(c, grid, None).or_else(|| constructions.get(key).cloned()) {
            Some(p) => resolved.push(p),
            None => unresolved.push(key.clone()),
        }
    }
    let cu = compression_utility(&resolved, &c.solutions(), &Library::new())?;
    Ok(CompressionReport {
        cu,
        resolved,
        unresolved,
    })
}

/// Greedy top-`k` by compression utility over the full corpus.
fn greedy_topk(pool: Vec<Program>, corpus: &[Program], k: usize) -> Result<(Vec<Program>, u64)> {
    let lib = Library::new();
    let mut chosen: Vec<Program> = Vec::new();
    let mut base = 0;
    for _ in 0..k {
        let mut best: Option<(u64, usize)> = None;
        for (i, p) in pool.iter().enumerate() {
            if chosen.contains(p) {
                continue;
            }
            chosen.push(p.clone());
            let cu = compression_utility(&chosen, corpus, &lib)?;
            chosen.pop();
            if best.is_none_or(|(b, _)| cu > b) {
                best = Some((cu, i));
            }
        }
        match best {
            Some((cu, i)) if cu > base => {
                chosen.push(pool[i].clone());
                base = cu;
            }
            _ => break,
        }
    }
    Ok((chosen, base))
}

/// Top-`k` compression of a model's library as of `trial`. Each helper is
/// identified with the ground-truth subtree producing its output (trials up
/// to `trial` first), falling back to its own expansion.
pub fn model_topk_cu(run: &RunRecord, c: &Curriculum, trial: usize, k: usize) -> Result<u64> {
    let mut pool = Vec::new();
    for entry in run.library_after(trial) {
        let p = ground_truth_subtree(c, entry.output, Some(trial))
            .map(Ok)
            .unwrap_or_else(|| expand(&entry.program, &run.library))?;
        if !pool.contains(&p) {
            pool.push(p);
        }
    }
    Ok(greedy_topk(pool, &c.solutions(), k)?.1)
}

pub fn oracle_topk_cu(c: &Curriculum, trial: usize, k: usize, seed: u64) -> Result<u64> {
    let picks = oracle_helpers(&c.solutions(), trial, k, seed)?;
    Ok(picks.iter().map(|s| s.utility).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepsRow {
    pub trial_index: usize,
    pub mean_steps: Option<f64>,
    pub correct_count: usize,
    pub raw_op_count: usize,
    /// No participant built the target correctly.
    pub excluded: bool,
}

/// Mean committed steps over correct trials next to the raw-primitive
/// length of each target. `raw_lengths` overrides the ground-truth op count
/// where a shorter raw program is known.
pub fn steps_vs_raw(
    logs: &[SessionLog],
    c: &Curriculum,
    raw_lengths: &HashMap<usize, usize>,
) -> Vec<StepsRow> {
    c.trials
        .iter()
        .map(|t| {
            let steps: Vec<usize> = logs
                .iter()
                .flat_map(|l| l.trials.iter())
                .filter(|lt| lt.trial_index == t.index && lt.correct)
                .map(|lt| lt.steps_committed)
                .collect();
            let raw = raw_lengths
                .get(&t.index)
                .copied()
                .unwrap_or_else(|| t.solution.surface_size().op_count);
            StepsRow {
                trial_index: t.index,
                mean_steps: (!steps.is_empty())
                    .then(|| steps.iter().sum::<usize>() as f64 / steps.len() as f64),
                correct_count: steps.len(),
                raw_op_count: raw,
                excluded: steps.is_empty(),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub curriculum: String,
    pub trial: usize,
    pub accuracy: Option<f64>,
    pub mean_steps: Option<f64>,
    pub mean_library_size: Option<f64>,
    pub k: usize,
    /// Space-separated grid keys.
    pub topk_helpers: String,
    pub cu_human_topk: Option<u64>,
    pub cu_rc_topk: Option<u64>,
    pub cu_oracle_topk: u64,
    pub cu_llm_topk: Option<u64>,
    pub raw_program_length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub k: TopK,
    pub seed: u64,
    pub participants: usize,
    pub rc_run: Option<String>,
    pub llm_run: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub config: MetricsConfig,
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Seeds and configuration needed to regenerate the table.
    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.config)?)
    }
}

pub struct MetricsInputs<'a> {
    pub curriculum: &'a Curriculum,
    pub logs: &'a [SessionLog],
    pub rc: Option<&'a RunRecord>,
    pub llm: Option<&'a RunRecord>,
}

/// One row per trial. Logs must already have replayed cleanly.
pub fn build_metrics(inputs: &MetricsInputs<'_>, k: TopK, seed: u64) -> Result<MetricsTable> {
    let c = inputs.curriculum;
    let logs = inputs.logs;
    let steps = steps_vs_raw(logs, c, &HashMap::new());
    let mut rows = Vec::new();
    for (t, srow) in c.trials.iter().zip(&steps) {
        let kk = k.resolve(logs, t.index);
        let attempts: Vec<&TrialLog> = logs
            .iter()
            .flat_map(|l| l.trials.iter())
            .filter(|lt| lt.trial_index == t.index)
            .collect();
        let accuracy = (!attempts.is_empty()).then(|| {
            attempts.iter().filter(|a| a.correct).count() as f64 / attempts.len() as f64
        });
        let top = topk_helpers(logs, t.index, TopK::Fixed(kk), seed);
        let cu_human = if logs.is_empty() {
            None
        } else {
            Some(corpus_compression(&top, c, &human_constructions(logs, c))?.cu)
        };
        rows.push(MetricsRow {
            curriculum: c.name.clone(),
            trial: t.index,
            accuracy,
            mean_steps: srow.mean_steps,
            mean_library_size: (!logs.is_empty()).then(|| mean_library_size(logs, t.index)),
            k: kk,
            topk_helpers: top.join(" "),
            cu_human_topk: cu_human,
            cu_rc_topk: inputs.rc.map(|r| model_topk_cu(r, c, t.index, kk)).transpose()?,
            cu_oracle_topk: oracle_topk_cu(c, t.index, kk, seed)?,
            cu_llm_topk: inputs.llm.map(|r| model_topk_cu(r, c, t.index, kk)).transpose()?,
            raw_program_length: srow.raw_op_count,
        });
    }
    Ok(MetricsTable {
        config: MetricsConfig {
            k,
            seed,
            participants: logs.len(),
            rc_run: inputs.rc.map(|r| r.config.model.to_string()),
            llm_run: inputs.llm.map(|r| r.config.model.to_string()),
        },
        rows,
    })
}

/// Programs participants used to build their saved helpers, for helpers
/// whose output matches no ground-truth subtree.
fn human_constructions(logs: &[SessionLog], _c: &Curriculum) -> HashMap<String, Program> {
    let mut out = HashMap::new();
    for log in logs {
        let mut helpers: HashMap<String, Program> = HashMap::new();
        for t in &log.trials {
            let mut steps: Vec<Program> = Vec::new();
            for ev in &t.events {
                match ev.kind {
                    EventKind::Commit => {
                        let Some(spec) = &ev.step else { continue };
                        let Ok(op) = spec.op.parse::<Operator>() else { continue };
                        let args: Option<Vec<Program>> = spec
                            .operands
                            .iter()
                            .map(|r| match r {
                                OperandRef::Primitive(p) => Some(Program::Prim(*p)),
                                OperandRef::Helper(id) => helpers.get(id).cloned(),
                                OperandRef::Step(i) => steps.get(*i).cloned(),
                            })
                            .collect();
                        match args.and_then(|a| Program::apply(op, a).ok()) {
                            Some(p) => steps.push(p),
                            None => steps.push(Program::Prim(Primitive::Blank)),
                        }
                    }
                    EventKind::SaveHelper => {
                        if let (Some(id), Some(p)) =
                            (&ev.helper_id, ev.from_step.and_then(|i| steps.get(i)))
                        {
                            helpers.insert(id.clone(), p.clone());
                            if let Some(k) = &ev.result_key {
                                out.entry(k.clone()).or_insert_with(|| p.clone());
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub participants: usize,
    /// Probability of saving the finished construction as a helper.
    pub save_prob: f64,
    /// Probability of submitting a wrong construction.
    pub error_rate: f64,
    /// Probability of a previewed-then-cancelled step before each commit.
    pub preview_prob: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            participants: 10,
            save_prob: 0.6,
            error_rate: 0.1,
            preview_prob: 0.2,
        }
    }
}

struct Builder<'a> {
    rng: &'a mut ChaCha8Rng,
    params: SyntheticParams,
    events: Vec<Event>,
    steps: Vec<Grid>,
    t_ms: u64,
    helpers: &'a BTreeMap<String, Grid>,
}

impl Builder<'_> {
    fn tick(&mut self) -> u64 {
        self.t_ms += self.rng.gen_range(200..3000);
        self.t_ms
    }

    fn commit(&mut self, op: Operator, operands: Vec<OperandRef>, grids: &[Grid]) -> OperandRef {
        let result = match grids {
            [a] => apply_unary(op, *a),
            [a, b] => apply_binary(op, *a, *b),
            _ => unreachable!("operators take one or two operands"),
        }
        .expect("arity matches");
        let spec = StepSpec {
            op: op.name().into(),
            operands,
        };
        if self.rng.gen_bool(self.params.preview_prob) {
            let t = self.tick();
            self.events.push(Event {
                step: Some(spec.clone()),
                result_key: Some(result.key()),
                ..Event::bare(t, EventKind::Preview)
            });
            let t = self.tick();
            self.events.push(Event::bare(t, EventKind::Cancel));
        }
        let t = self.tick();
        self.events.push(Event {
            step: Some(spec),
            result_key: Some(result.key()),
            ..Event::bare(t, EventKind::Commit)
        });
        self.steps.push(result);
        OperandRef::Step(self.steps.len() - 1)
    }

    fn build(&mut self, p: &Program) -> (OperandRef, Grid) {
        let lib = Library::new();
        let grid = evaluate(p, &lib).expect("raw program");
        if let Program::Prim(prim) = p {
            return (OperandRef::Primitive(*prim), grid);
        }
        if let Some((id, _)) = self.helpers.iter().find(|(_, g)| **g == grid) {
            return (OperandRef::Helper(id.clone()), grid);
        }
        let op = match p {
            Program::Unary(op, _) => Operator::Unary(*op),
            Program::Binary(op, _, _) => Operator::Binary(*op),
            _ => unreachable!("leaves handled above"),
        };
        let (refs, grids): (Vec<_>, Vec<_>) = p.children().into_iter().map(|c| self.build(c)).unzip();
        (self.commit(op, refs, &grids), grid)
    }
}

/// Scripted sessions that rebuild each ground-truth solution step by step,
/// reusing saved helpers whenever one matches a sub-construction.
pub fn synthetic_logs(c: &Curriculum, params: SyntheticParams, seed: u64) -> Vec<SessionLog> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..params.participants)
        .map(|pi| {
            let mut helpers: BTreeMap<String, Grid> = BTreeMap::new();
            let mut next_helper = 0;
            let mut t_ms = 0;
            let mut trials = Vec::new();
            for t in &c.trials {
                let mut b = Builder {
                    rng: &mut rng,
                    params,
                    events: Vec::new(),
                    steps: Vec::new(),
                    t_ms,
                    helpers: &helpers,
                };
                if b.rng.gen_bool(params.error_rate) {
                    let prim = Primitive::ALL[b.rng.gen_range(1..6)];
                    b.commit(
                        Operator::Unary(crate::grid::UnaryOp::Invert),
                        vec![OperandRef::Primitive(prim)],
                        &[prim.grid()],
                    );
                } else {
                    let (root, grid) = b.build(&t.solution);
                    if !matches!(root, OperandRef::Step(_)) {
                        // The target is already a primitive or helper; put it
                        // on the canvas with a no-op union.
                        b.commit(
                            Operator::Binary(crate::grid::BinaryOp::Add),
                            vec![root, OperandRef::Primitive(Primitive::Blank)],
                            &[grid, Grid::BLANK],
                        );
                    }
                }
                let mut events = std::mem::take(&mut b.events);
                let steps = std::mem::take(&mut b.steps);
                t_ms = b.t_ms;
                let canvas = steps.last().copied().unwrap_or(Grid::BLANK);
                if rng.gen_bool(params.save_prob) && !helpers.values().any(|g| *g == canvas) {
                    let id = format!("p{pi}-h{next_helper}");
                    next_helper += 1;
                    t_ms += rng.gen_range(200..3000);
                    events.push(Event {
                        helper_id: Some(id.clone()),
                        from_step: Some(steps.len() - 1),
                        result_key: Some(canvas.key()),
                        ..Event::bare(t_ms, EventKind::SaveHelper)
                    });
                    helpers.insert(id, canvas);
                }
                if !helpers.is_empty() && rng.gen_bool(0.05) {
                    let id = helpers.keys().next().cloned().expect("non-empty");
                    helpers.remove(&id);
                    t_ms += rng.gen_range(200..3000);
                    events.push(Event {
                        helper_id: Some(id),
                        ..Event::bare(t_ms, EventKind::DeleteHelper)
                    });
                }
                t_ms += rng.gen_range(200..3000);
                events.push(Event::bare(t_ms, EventKind::Submit));
                trials.push(TrialLog {
                    trial_index: t.index,
                    target: t.target,
                    steps_committed: steps.len(),
                    submitted: canvas,
                    correct: canvas == t.target,
                    events,
                });
            }
            SessionLog {
                experiment_id: c.name.clone(),
                participant_id: format!("p{pi}"),
                dsl_version: SESSION_LOG_VERSION.into(),
                trials,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::{build_e1, build_e2};

    fn commit(t: u64, op: &str, operands: Vec<OperandRef>, result: Grid) -> Event {
        Event {
            step: Some(StepSpec {
                op: op.into(),
                operands,
            }),
            result_key: Some(result.key()),
            ..Event::bare(t, EventKind::Commit)
        }
    }

    fn plus() -> Grid {
        Primitive::LineHorizontal.grid().add(Primitive::LineVertical.grid())
    }

    /// Build the plus grid, save it, submit; reuse the helper next trial.
    fn plus_session() -> SessionLog {
        let first = TrialLog {
            trial_index: 1,
            target: plus(),
            events: vec![
                commit(
                    100,
                    "add",
                    vec![
                        OperandRef::Primitive(Primitive::LineHorizontal),
                        OperandRef::Primitive(Primitive::LineVertical),
                    ],
                    plus(),
                ),
                Event {
                    helper_id: Some("plus".into()),
                    from_step: Some(0),
                    result_key: Some(plus().key()),
                    ..Event::bare(200, EventKind::SaveHelper)
                },
                Event::bare(300, EventKind::Submit),
            ],
            submitted: plus(),
            correct: true,
            steps_committed: 1,
        };
        let second = TrialLog {
            trial_index: 2,
            target: plus().invert(),
            events: vec![
                commit(400, "invert", vec![OperandRef::Helper("plus".into())], plus().invert()),
                Event::bare(500, EventKind::Submit),
            ],
            submitted: plus().invert(),
            correct: true,
            steps_committed: 1,
        };
        SessionLog {
            experiment_id: "demo".into(),
            participant_id: "p0".into(),
            dsl_version: SESSION_LOG_VERSION.into(),
            trials: vec![first, second],
        }
    }

    #[test]
    fn scripted_session_replays() {
        let log = plus_session();
        let report = replay(&log).unwrap();
        assert!(report.passed, "{report:?}");
        let back = SessionLog::from_json(&serde_json::to_string(&log).unwrap()).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn tampered_result_is_located() {
        let mut log = plus_session();
        log.trials[1].events[0].result_key = Some(plus().key());
        let report = replay(&log).unwrap();
        assert!(!report.passed);
        assert_eq!(report.discrepancies[0].trial_index, 2);
        assert_eq!(report.discrepancies[0].event_index, Some(0));
    }

    #[test]
    fn dangling_references_reject() {
        let mut log = plus_session();
        log.trials[1].events[0].step.as_mut().unwrap().operands = vec![OperandRef::Step(3)];
        assert!(matches!(replay(&log), Err(Error::RejectLog(_))));
        let mut log = plus_session();
        log.trials[0].events[1].helper_id = None;
        assert!(matches!(replay(&log), Err(Error::RejectLog(_))));
        assert!(matches!(SessionLog::from_json("{\"trials\": 3}"), Err(Error::RejectLog(_))));
    }

    #[test]
    fn blank_submission_is_incorrect() {
        let log = SessionLog {
            experiment_id: "demo".into(),
            participant_id: "p1".into(),
            dsl_version: SESSION_LOG_VERSION.into(),
            trials: vec![TrialLog {
                trial_index: 1,
                target: plus(),
                events: vec![Event::bare(10, EventKind::Submit)],
                submitted: Grid::BLANK,
                correct: false,
                steps_committed: 0,
            }],
        };
        assert!(replay(&log).unwrap().passed);
        let mut wrong = log.clone();
        wrong.trials[0].correct = true;
        assert!(!replay(&wrong).unwrap().passed);
    }

    #[test]
    fn synthetic_logs_replay_cleanly() {
        for c in [build_e1(), build_e2()] {
            let logs = synthetic_logs(&c, SyntheticParams::default(), 7);
            assert_eq!(logs.len(), 10);
            for log in &logs {
                let report = replay(log).unwrap();
                assert!(report.passed, "{:?}", report.discrepancies);
            }
            assert!(logs.iter().flat_map(|l| &l.trials).any(|t| t.correct));
        }
    }

    #[test]
    fn topk_frequency_and_ties() {
        let mut a = plus_session();
        a.participant_id = "a".into();
        let b = a.clone();
        let logs = vec![a, b];
        assert_eq!(topk_helpers(&logs, 2, TopK::Fixed(1), 0), vec![plus().key()]);
        assert_eq!(topk_helpers(&logs, 2, TopK::Auto, 0).len(), 1);
        assert!(topk_helpers(&logs, 2, TopK::Fixed(0), 0).is_empty());
    }

    #[test]
    fn compression_of_the_shared_group_helper() {
        let c = build_e2();
        let h = crate::curriculum::groups_of(&c).unwrap()[1].h.clone();
        let key = evaluate(&h, &Library::new()).unwrap().key();
        let report = corpus_compression(&[key], &c, &HashMap::new()).unwrap();
        let size = h.surface_size().node_count as u64;
        assert!(report.cu >= 4 * size);
        assert!(corpus_compression(&[], &c, &HashMap::new()).unwrap().cu == 0);
    }

    #[test]
    fn steps_pair_with_raw_length() {
        let c = build_e1();
        let logs = synthetic_logs(&c, SyntheticParams { error_rate: 0.0, ..Default::default() }, 3);
        let rows = steps_vs_raw(&logs, &c, &HashMap::new());
        assert_eq!(rows[0].raw_op_count, 5);
        assert!(rows.iter().all(|r| !r.excluded));
        assert!(rows[13].raw_op_count > rows[0].raw_op_count);
    }

    #[test]
    fn metrics_csv_has_one_row_per_trial() {
        let c = build_e1();
        let logs = synthetic_logs(&c, SyntheticParams::default(), 1);
        let table = build_metrics(
            &MetricsInputs {
                curriculum: &c,
                logs: &logs,
                rc: None,
                llm: None,
            },
            TopK::Auto,
            5,
        )
        .unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 15);
        assert!(text.starts_with("curriculum,trial,accuracy"));
        assert!(table.sidecar_json().unwrap().contains("\"seed\": 5"));
    }
}
