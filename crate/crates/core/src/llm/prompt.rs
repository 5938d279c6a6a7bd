//! Prompt assembly. Identical contexts give byte-identical prompts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::lang::{CarriedHelper, Diagnostic};
use crate::grid::{Grid, Primitive};

pub const MAX_ATTEMPTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Memoryless,
    WithHistory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LastFailure {
    pub source: String,
    #[serde(default, with = "crate::grid::as_opt_key")]
    pub produced: Option<Grid>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryItem {
    #[serde(with = "crate::grid::as_key")]
    pub target: Grid,
    pub built_correctly: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub mode: PromptMode,
    pub dsl_version: String,
    pub trial_index: usize,
    pub trial_count: usize,
    #[serde(with = "crate::grid::as_key")]
    pub target: Grid,
    pub carried_helpers: Vec<CarriedHelper>,
    pub history: Vec<HistoryItem>,
    pub attempt_index: usize,
    pub last_failure: Option<LastFailure>,
}

const INTRO_SEQUENCE: &str = "\
You will be given a sequence of tasks where you will write functions to
produce 10x10 binary arrays.

The tasks will be given one trial at a time, along with the history of
tasks you completed in previous trials.
";

const INTRO_SINGLE: &str = "\
You will be given a task where you will write functions to
produce 10x10 binary arrays.
";

const RULES: &str = "
On each trial, you will be given:
(1) a target 10x10 binary array,
(2) a set of geometric PRIMITIVES as 10x10 binary arrays, and
    TRANSFORMATION operations as Python functions, and
(3) any helper functions you wrote to complete the tasks on previous
    trials.

The PRIMITIVES and TRANSFORMATIONS are stable and shared across trials.
Helper functions carry forward to all subsequent trials and may be reused.

On each trial, you will be given Python starter code with gaps to fill in.

CRITICAL RULES:
1. You must NOT create new primitives, hardcode any array elements in the
   output, redefine any provided variables or functions --- always call
   PRIMITIVES and TRANSFORMATION FUNCTIONS directly.
2. You may NOT use loops, list comprehensions, or import anything.
3. All reconstructions MUST be done using the provided PRIMITIVES,
   TRANSFORMATIONS, and helpers only.
4. Helpers must derive entirely from the provided PRIMITIVES,
   TRANSFORMATIONS and prior helpers.
5. Write Python code only. Do not include any comments or explanations.

PRIMITIVES:
";

const TRANSFORMATIONS: &str = "TRANSFORMATION FUNCTIONS:

def add(a, b):
    return np.logical_or(a, b).astype(int)

def subtract(a, b):
    return np.logical_and(a, np.logical_not(b)).astype(int)

def intersect(a, b):
    return np.logical_and(a, b).astype(int)

def invert(a):
    return np.logical_not(a).astype(int)

def reflect_horizontal(a):
    return np.flipud(a)

def reflect_vertical(a):
    return np.fliplr(a)

def reflect_diag(a):
    return a.T
";

const EXAMPLE: &str = "EXAMPLE:

Using add(a, b) transformation

Target:
[[0,0,0,0,0,1,0,0,0,0],
[0,0,0,0,0,1,0,0,0,0],
[0,0,0,0,0,1,0,0,0,0],
[0,0,0,0,0,1,0,0,0,0],
[0,0,0,0,0,1,0,0,0,0],
[1,1,1,1,1,1,1,1,1,1],
[0,0,0,0,0,1,0,0,0,0],
[0,0,0,0,0,1,0,0,0,0],
[0,0,0,0,0,1,0,0,0,0],
[0,0,0,0,0,1,0,0,0,0]]

Solution:
def reconstructed():
    return add(line_horizontal, line_vertical)
";

fn row_text(g: Grid, r: usize) -> String {
    let cells: Vec<&str> = (0..10).map(|c| if g.get(r, c) { "1" } else { "0" }).collect();
    format!("[{}]", cells.join(", "))
}

/// A grid as the bracketed array used for targets.
pub fn array_text(g: Grid) -> String {
    let rows: Vec<String> = (0..10).map(|r| row_text(g, r)).collect();
    format!("[\n{}\n]", rows.join(",\n"))
}

fn primitives_block() -> String {
    let mut out = String::new();
    for p in Primitive::ALL {
        let rows: Vec<String> = (0..10).map(|r| format!("    {}", row_text(p.grid(), r))).collect();
        let _ = write!(out, "\n{} = [\n{}\n]\n", p.name(), rows.join(",\n"));
    }
    out
}

fn starter_block(helpers: &[CarriedHelper]) -> String {
    let mut out = String::from(
        "Do not include any comments or imports in your response. \n\
         Respond by completing the following code:\n\n--- Start ---\n\n",
    );
    if !helpers.is_empty() {
        out.push_str("# You previously found these helpers useful (remove comment)\n\n");
        for h in helpers {
            out.push_str(&h.source);
            out.push_str("\n\n");
        }
    }
    out.push_str(
        "# Define any new helpers here (remove comment)\n\n\
         def reconstructed():\n    # Your code here (remove comment)\n\n--- End ---",
    );
    out
}

fn history_block(items: &[HistoryItem]) -> String {
    let mut out = String::from("Below is the history of figures you've built on previous trials.");
    for (i, item) in items.iter().enumerate() {
        let verdict = if item.built_correctly {
            "Built Correctly."
        } else {
            "Not Built Correctly."
        };
        let _ = write!(
            out,
            "\n\nTarget {}:\n\n{}\n\n{}",
            i + 1,
            array_text(item.target),
            verdict
        );
    }
    out
}

fn feedback_block(ctx: &PromptContext, failure: &LastFailure) -> String {
    let previous = ctx.attempt_index - 1;
    let produced = match failure.produced {
        Some(g) => array_text(g),
        None => failure
            .diagnostics
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("\n"),
    };
    format!(
        "Note: Your previous response was incorrect. \n\
         This was attempt {previous} of {MAX_ATTEMPTS}. You have {} attempt(s) remaining.\n\n\
         Your code:\n{}\n\n\
         This is what your code produced:\n{produced}\n\n\
         This is the target you need to produce:\n{}\n\n\
         Please try again.",
        MAX_ATTEMPTS - previous,
        failure.source,
        array_text(ctx.target),
    )
}

pub fn build_prompt(ctx: &PromptContext) -> String {
    let history = ctx.mode == PromptMode::WithHistory;
    let mut out = String::new();
    out.push_str(if history { INTRO_SEQUENCE } else { INTRO_SINGLE });
    out.push_str(RULES);
    out.push_str(&primitives_block());
    out.push('\n');
    out.push_str(TRANSFORMATIONS);
    out.push('\n');
    out.push_str(EXAMPLE);
    out.push('\n');
    if history {
        let _ = writeln!(out, "This is trial {} of {}.\n", ctx.trial_index, ctx.trial_count);
    }
    let _ = write!(out, "Target:\n{}\n\n", array_text(ctx.target));
    out.push_str(&starter_block(&ctx.carried_helpers));
    if history && !ctx.history.is_empty() {
        out.push_str("\n\n");
        out.push_str(&history_block(&ctx.history));
    }
    if let Some(f) = &ctx.last_failure {
        out.push_str("\n\n");
        out.push_str(&feedback_block(ctx, f));
    }
    out.push('\n');
    out
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::build_e1;

    fn ctx(mode: PromptMode, trial: usize) -> PromptContext {
        let c = build_e1();
        PromptContext {
            mode,
            dsl_version: "1".into(),
            trial_index: trial,
            trial_count: c.len(),
            target: c.trials[trial - 1].target,
            carried_helpers: vec![],
            history: c.trials[..trial - 1]
                .iter()
                .map(|t| HistoryItem {
                    target: t.target,
                    built_correctly: true,
                })
                .collect(),
            attempt_index: 1,
            last_failure: None,
        }
    }

    #[test]
    fn memoryless_first_trial() {
        let p = build_prompt(&ctx(PromptMode::Memoryless, 1));
        assert!(!p.contains("history of figures"));
        assert!(!p.contains("This is trial"));
        assert!(!p.contains("You previously found"));
        assert!(p.contains("blank = [\n    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],"));
    }

    #[test]
    fn history_at_trial_three() {
        let c = build_e1();
        let p = build_prompt(&ctx(PromptMode::WithHistory, 3));
        assert!(p.contains("This is trial 3 of 14."));
        assert!(p.contains(&format!("Target 1:\n\n{}\n\nBuilt Correctly.", array_text(c.trials[0].target))));
        assert!(p.contains(&format!("Target 2:\n\n{}\n\nBuilt Correctly.", array_text(c.trials[1].target))));
        assert!(!p.contains("Target 3:"));
    }

    #[test]
    fn refinement_framing() {
        let mut c = ctx(PromptMode::Memoryless, 1);
        c.attempt_index = 2;
        c.last_failure = Some(LastFailure {
            source: "def reconstructed():\n    return square".into(),
            produced: Some(Primitive::Square.grid()),
            diagnostics: vec![],
        });
        let p = build_prompt(&c);
        assert!(p.contains("This was attempt 1 of 5. You have 4 attempt(s) remaining."));
        assert!(p.contains(&array_text(Primitive::Square.grid())));
        assert!(p.ends_with("Please try again.\n"));
    }

    #[test]
    fn deterministic() {
        let a = build_prompt(&ctx(PromptMode::WithHistory, 5));
        let b = build_prompt(&ctx(PromptMode::WithHistory, 5));
        assert_eq!(prompt_hash(&a), prompt_hash(&b));
        assert_eq!(prompt_hash(&a).len(), 64);
    }
}
