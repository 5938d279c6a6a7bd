//! Program synthesis by a language model: prompting, refinement, and
//! checking of the returned code.

mod backend;
mod lang;
mod prompt;

pub use backend::{BackendClient, ScriptedBackend};
#[cfg(feature = "remote")]
pub use backend::{RemoteBackend, RemoteConfig};
pub use lang::{
    extract_code, lower_and_run, lower_with, parse_constrained, run_direct, CarriedHelper,
    ConstrainedSource, Construct, Diagnostic, DiagnosticKind, Expr, FunctionDef, Lowered, Span,
    ENTRY_POINT,
};
pub use prompt::{
    array_text, build_prompt, prompt_hash, HistoryItem, LastFailure, PromptContext, PromptMode,
    MAX_ATTEMPTS,
};

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::curriculum::{Curriculum, DSL_VERSION};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::models::{ModelKind, RunConfig, RunRecord, TrialRecord};
use crate::program::{Library, Program};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub prompt_hash: String,
    pub source: String,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(with = "crate::grid::as_opt_key")]
    pub produced_grid: Option<Grid>,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialTranscript {
    pub mode: PromptMode,
    pub trial: usize,
    pub attempts: Vec<AttemptRecord>,
    pub solved: bool,
    /// Helpers from the correct attempt, empty otherwise.
    pub new_helpers: Vec<CarriedHelper>,
    #[serde(skip)]
    accepted: Option<ConstrainedSource>,
    #[serde(skip)]
    lowered: Option<Program>,
}

impl TrialTranscript {
    pub fn lowered(&self) -> Option<&Program> {
        self.lowered.as_ref()
    }
}

/// Up to five rounds of prompt, completion, parse and comparison. The
/// context's helpers are extended only when an attempt is correct.
pub fn run_trial(backend: &mut dyn BackendClient, ctx: &mut PromptContext) -> Result<TrialTranscript> {
    if ctx.attempt_index != 1 {
        return Err(Error::InvalidConfig("a trial starts at attempt 1".into()));
    }
    ctx.last_failure = None;
    let mut transcript = TrialTranscript {
        mode: ctx.mode,
        trial: ctx.trial_index,
        attempts: Vec::new(),
        solved: false,
        new_helpers: Vec::new(),
        accepted: None,
        lowered: None,
    };
    for attempt in 1..=MAX_ATTEMPTS {
        ctx.attempt_index = attempt;
        let prompt = build_prompt(ctx);
        let completion = backend.complete(&prompt).map_err(|message| Error::Backend {
            attempt,
            message,
        })?;
        let source = extract_code(&completion);
        let mut record = AttemptRecord {
            prompt_hash: prompt_hash(&prompt),
            source: source.clone(),
            diagnostics: Vec::new(),
            produced_grid: None,
            correct: false,
        };
        match parse_constrained(&source, &ctx.carried_helpers) {
            Err(diags) => record.diagnostics = diags,
            Ok(cs) => {
                let out = lower_and_run(&cs, &ctx.carried_helpers);
                record.produced_grid = Some(out.grid);
                record.correct = out.grid == ctx.target;
                if record.correct {
                    transcript.new_helpers = out.new_helpers;
                    transcript.lowered = Some(out.program);
                    transcript.accepted = Some(cs);
                }
            }
        }
        let correct = record.correct;
        ctx.last_failure = (!correct).then(|| LastFailure {
            source,
            produced: record.produced_grid,
            diagnostics: record.diagnostics.clone(),
        });
        transcript.attempts.push(record);
        if correct {
            transcript.solved = true;
            ctx.carried_helpers.extend(transcript.new_helpers.iter().cloned());
            break;
        }
    }
    ctx.attempt_index = 1;
    ctx.last_failure = None;
    Ok(transcript)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LlmRun {
    pub record: RunRecord,
    pub transcripts: Vec<TrialTranscript>,
}

/// Runs every trial of `curriculum` in order, carrying helpers forward.
pub fn run_llm(
    curriculum: &Curriculum,
    mode: PromptMode,
    backend: &mut dyn BackendClient,
) -> Result<LlmRun> {
    let model = match mode {
        PromptMode::Memoryless => ModelKind::Llm,
        PromptMode::WithHistory => ModelKind::LlmH,
    };
    let mut ctx = PromptContext {
        mode,
        dsl_version: DSL_VERSION.to_string(),
        trial_index: 1,
        trial_count: curriculum.len(),
        target: Grid::BLANK,
        carried_helpers: Vec::new(),
        history: Vec::new(),
        attempt_index: 1,
        last_failure: None,
    };
    let mut lib = Library::new();
    let mut ids: HashMap<String, Program> = HashMap::new();
    let mut trials = Vec::new();
    let mut transcripts = Vec::new();
    for t in &curriculum.trials {
        let started = Instant::now();
        ctx.trial_index = t.index;
        ctx.target = t.target;
        let carried_before = ctx.carried_helpers.clone();
        let transcript = run_trial(backend, &mut ctx)?;
        let mut record = TrialRecord {
            index: t.index,
            solved: transcript.solved,
            program: None,
            trace: Vec::new(),
            candidates_explored: 0,
            classes_retained: 0,
            wall_time_ms: 0,
            op_count: None,
            raw_op_count: None,
            new_helpers: Vec::new(),
            library_size: lib.len(),
            attempts: Some(transcript.attempts.len()),
        };
        if let (Some(cs), Some(raw)) = (&transcript.accepted, &transcript.lowered) {
            for h in &transcript.new_helpers {
                let (id, fresh) = lib.insert(h.program.clone(), t.index)?;
                if fresh {
                    record.new_helpers.push(lib.get(&id).expect("just inserted").clone());
                }
                ids.insert(h.name.clone(), Program::Helper(id));
            }
            let with_refs = lower_with(cs, &carried_before, &ids);
            record.op_count = Some(with_refs.surface_size().op_count);
            record.raw_op_count = Some(raw.surface_size().op_count);
            record.program = Some(with_refs);
        }
        record.library_size = lib.len();
        record.wall_time_ms = started.elapsed().as_millis() as u64;
        ctx.history.push(HistoryItem {
            target: t.target,
            built_correctly: transcript.solved,
        });
        trials.push(record);
        transcripts.push(transcript);
    }
    Ok(LlmRun {
        record: RunRecord {
            curriculum: curriculum.name.clone(),
            config: RunConfig::new(model),
            trials,
            library: lib,
        },
        transcripts,
    })
}
