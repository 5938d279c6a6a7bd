//! Runs a model over a curriculum, growing its library after each solved
//! trial.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::curriculum::Curriculum;
use crate::error::{Error, Result};
use crate::learn::{abstract_gl, abstract_pl, abstract_prospective, abstract_rc};
use crate::program::{expand, size, HelperEntry, Library, Program};
use crate::synth::{solve, trace_of, SynthesisBudget, TraceMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Nolib,
    Rc,
    Gl,
    Pl,
    Oracle,
    Llm,
    LlmH,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Nolib,
        ModelKind::Rc,
        ModelKind::Gl,
        ModelKind::Pl,
        ModelKind::Oracle,
        ModelKind::Llm,
        ModelKind::LlmH,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Nolib => "nolib",
            ModelKind::Rc => "rc",
            ModelKind::Gl => "gl",
            ModelKind::Pl => "pl",
            ModelKind::Oracle => "oracle",
            ModelKind::Llm => "llm",
            ModelKind::LlmH => "llm-h",
        }
    }

    pub fn is_symbolic(self) -> bool {
        !matches!(self, ModelKind::Llm | ModelKind::LlmH)
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, ModelKind::Pl | ModelKind::Oracle)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub budget: SynthesisBudget,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trace_mode: TraceMode,
}

fn one() -> usize {
    1
}

fn default_q() -> f64 {
    0.3
}

impl RunConfig {
    pub fn new(model: ModelKind) -> Self {
        RunConfig {
            model,
            budget: SynthesisBudget::default(),
            k: 1,
            q: default_q(),
            seed: 0,
            trace_mode: TraceMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.model == ModelKind::Pl && !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidConfig(format!("q = {} is not in (0, 1)", self.q)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub solved: bool,
    pub program: Option<Program>,
    pub trace: Vec<Program>,
    pub candidates_explored: u64,
    pub classes_retained: usize,
    pub wall_time_ms: u64,
    /// Operators in the solution as written against the library.
    pub op_count: Option<usize>,
    /// Operators in the solution once helpers are expanded.
    pub raw_op_count: Option<usize>,
    pub new_helpers: Vec<HelperEntry>,
    pub library_size: usize,
    /// Attempts used by language-model runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub curriculum: String,
    pub config: RunConfig,
    pub trials: Vec<TrialRecord>,
    pub library: Library,
}

impl RunRecord {
    pub fn solved_count(&self) -> usize {
        self.trials.iter().filter(|t| t.solved).count()
    }

    pub fn completed(&self) -> bool {
        self.trials.iter().all(|t| t.solved)
    }

    pub fn first_failure(&self) -> Option<usize> {
        self.trials.iter().find(|t| !t.solved).map(|t| t.index)
    }

    /// Library as it stood after trial `index` (1-based).
    pub fn library_after(&self, index: usize) -> Vec<&HelperEntry> {
        self.trials
            .iter()
            .take(index)
            .flat_map(|t| t.new_helpers.iter())
            .collect()
    }
}

/// Per-trial seed for stochastic operators.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Adds each non-leaf candidate to the library. Leaves are skipped: a
/// primitive or an existing helper adds nothing new.
pub fn promote(
    lib: &mut Library,
    candidates: Vec<Program>,
    trial: usize,
) -> Result<Vec<HelperEntry>> {
    let mut added = Vec::new();
    for c in candidates {
        if c.is_leaf() {
            continue;
        }
        let (id, fresh) = lib.insert(c, trial)?;
        if fresh {
            added.push(lib.get(&id).expect("just inserted").clone());
        }
    }
    Ok(added)
}

/// Runs one of the symbolic models over `curriculum`.
pub fn run_symbolic(curriculum: &Curriculum, cfg: &RunConfig) -> Result<RunRecord> {
    cfg.validate()?;
    if !cfg.model.is_symbolic() {
        return Err(Error::InvalidConfig(format!(
            "model `{}` needs a language-model backend",
            cfg.model
        )));
    }
    let ground_truth = curriculum.solutions();
    let mut lib = Library::new();
    let mut corpus: Vec<Program> = Vec::new();
    let mut trials = Vec::new();
    for t in &curriculum.trials {
        let started = Instant::now();
        let res = solve(t.target, &lib, cfg.budget)?;
        let mut record = TrialRecord {
            index: t.index,
            solved: res.is_solved(),
            program: res.program().cloned(),
            trace: Vec::new(),
            candidates_explored: res.candidates_explored,
            classes_retained: res.classes_retained,
            wall_time_ms: 0,
            op_count: None,
            raw_op_count: None,
            new_helpers: Vec::new(),
            library_size: lib.len(),
            attempts: None,
        };
        if let Some(program) = res.program() {
            let trace = trace_of(&res, cfg.trace_mode)?;
            record.op_count = Some(program.surface_size().op_count);
            record.raw_op_count = Some(size(program, &lib)?.op_count);
            corpus.push(expand(program, &lib)?);
            let candidates = match cfg.model {
                ModelKind::Nolib => Vec::new(),
                ModelKind::Rc => abstract_rc(&trace, &corpus, cfg.k, &lib)?,
                ModelKind::Gl => abstract_gl(&trace)?,
                ModelKind::Pl => abstract_pl(&trace, cfg.q, trial_seed(cfg.seed, t.index))?,
                ModelKind::Oracle => abstract_prospective(
                    &trace,
                    &ground_truth,
                    cfg.k,
                    &lib,
                    trial_seed(cfg.seed, t.index),
                )?,
                ModelKind::Llm | ModelKind::LlmH => unreachable!("checked above"),
            };
            record.new_helpers = promote(&mut lib, candidates, t.index)?;
            record.trace = trace.0;
        }
        record.library_size = lib.len();
        record.wall_time_ms = started.elapsed().as_millis() as u64;
        trials.push(record);
    }
    Ok(RunRecord {
        curriculum: curriculum.name.clone(),
        config: cfg.clone(),
        trials,
        library: lib,
    })
}
