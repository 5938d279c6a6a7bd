//! Curricula: the sequential E1 table, operator groups and their validators.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryOp, Grid, Primitive, UnaryOp};
use crate::program::{evaluate, Library, Program};
use crate::synth::{GridMap, SynthesisBudget};

pub const DSL_VERSION: &str = "1";

pub const FAT_CROSS: &str = "add(add(line_horizontal, reflect_horizontal(line_horizontal)), add(line_vertical, reflect_vertical(line_vertical)))";
pub const DIAGONAL_CROSS: &str = "add(diagonal, reflect_vertical(diagonal))";

const E1_TABLE: [(&str, &str); 14] = [
    ("root", "fat_cross"),
    ("sequential", "add(P1, square)"),
    ("sequential", "invert(P2)"),
    ("helper", "subtract(square, Diagonal_Cross)"),
    ("helper", "add(square, Diagonal_Cross)"),
    ("sequential", "invert(P5)"),
    ("long_range", "add(Diagonal_Cross, P1)"),
    ("long_range", "intersect(Diagonal_Cross, P1)"),
    ("sequential", "add(P8, square)"),
    ("sequential", "invert(P9)"),
    ("long_range", "add(P8, invert(P1))"),
    ("sequential", "add(invert(P11), square)"),
    ("long_range", "subtract(Diagonal_Cross, P8)"),
    ("long_range", "subtract(P7, P8)"),
];

const E2_GROUPS: &str = include_str!("../data/e2_groups.json");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedHelper {
    pub id: String,
    pub program: Program,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialMeta {
    Root,
    /// `derivation` refers to earlier trials as `P<n>` and to named helpers.
    Sequential { n: usize, derivation: Program },
    LongRange { n: usize, derivation: Program },
    Helper { derivation: Program },
    Group {
        group_id: usize,
        slot: usize,
        h_id: String,
        x: Primitive,
    },
}

impl TrialMeta {
    pub fn kind(&self) -> &'static str {
        match self {
            TrialMeta::Root => "root",
            TrialMeta::Sequential { .. } => "sequential",
            TrialMeta::LongRange { .. } => "long_range",
            TrialMeta::Helper { .. } => "helper",
            TrialMeta::Group { .. } => "group",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub target: Grid,
    /// Ground truth over raw primitives only.
    pub solution: Program,
    pub meta: TrialMeta,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curriculum {
    pub name: String,
    pub dsl_version: String,
    #[serde(default)]
    pub helpers: Vec<NamedHelper>,
    pub trials: Vec<Trial>,
}

impl Curriculum {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn targets(&self) -> Vec<Grid> {
        self.trials.iter().map(|t| t.target).collect()
    }

    pub fn solutions(&self) -> Vec<Program> {
        self.trials.iter().map(|t| t.solution.clone()).collect()
    }

    /// Checks indexing and that every solution evaluates to its target.
    pub fn validate(&self) -> Result<()> {
        let lib = Library::new();
        for (i, t) in self.trials.iter().enumerate() {
            if t.index != i + 1 {
                return Err(Error::InvalidCurriculum(format!(
                    "trial at position {} has index {}",
                    i + 1,
                    t.index
                )));
            }
            if t.solution.uses_helpers() {
                return Err(Error::InvalidCurriculum(format!(
                    "trial {} solution references helpers",
                    t.index
                )));
            }
            if evaluate(&t.solution, &lib)? != t.target {
                return Err(Error::InvalidCurriculum(format!(
                    "trial {} solution does not evaluate to its target",
                    t.index
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Curriculum> {
        let c: Curriculum = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Replaces helper references by the programs in `env`, recursively.
fn substitute(p: &Program, env: &HashMap<String, Program>) -> Result<Program> {
    Ok(match p {
        Program::Prim(_) => p.clone(),
        Program::Helper(id) => env
            .get(id.as_str())
            .cloned()
            .ok_or_else(|| Error::UnknownHelper(id.to_string()))?,
        Program::Unary(op, c) => Program::unary(*op, substitute(c, env)?),
        Program::Binary(op, l, r) => {
            Program::binary(*op, substitute(l, env)?, substitute(r, env)?)
        }
    })
}

fn trial_refs(p: &Program) -> Vec<usize> {
    let mut refs: Vec<usize> = p
        .helper_refs()
        .iter()
        .filter_map(|id| id.as_str().strip_prefix('P')?.parse().ok())
        .collect();
    refs.sort_unstable();
    refs
}

/// The fourteen-trial sequential curriculum.
pub fn build_e1() -> Curriculum {
    let helpers = vec![
        NamedHelper {
            id: "fat_cross".into(),
            program: Program::parse(FAT_CROSS).expect("valid program"),
        },
        NamedHelper {
            id: "Diagonal_Cross".into(),
            program: Program::parse(DIAGONAL_CROSS).expect("valid program"),
        },
    ];
    let mut env: HashMap<String, Program> =
        helpers.iter().map(|h| (h.id.clone(), h.program.clone())).collect();
    let lib = Library::new();
    let mut trials = Vec::new();
    for (i, (kind, text)) in E1_TABLE.iter().enumerate() {
        let index = i + 1;
        let derivation = Program::parse(text).expect("valid program");
        let solution = substitute(&derivation, &env).expect("table refers to known names");
        let target = evaluate(&solution, &lib).expect("raw program");
        let n = trial_refs(&derivation).last().map(|&r| index - r).unwrap_or(0);
        let meta = match *kind {
            "root" => TrialMeta::Root,
            "sequential" => TrialMeta::Sequential { n, derivation },
            "long_range" => TrialMeta::LongRange { n, derivation },
            _ => TrialMeta::Helper { derivation },
        };
        env.insert(format!("P{index}"), solution.clone());
        trials.push(Trial {
            index,
            target,
            solution,
            meta,
        });
    }
    Curriculum {
        name: "e1".into(),
        dsl_version: DSL_VERSION.into(),
        helpers,
        trials,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSlot {
    pub program: Program,
    pub target: Grid,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorGroup {
    pub h: Program,
    pub x: Primitive,
    pub slots: [GroupSlot; 4],
}

pub const SLOT_NAMES: [&str; 4] = ["add", "subtract", "intersect", "add_invert"];

/// The four slot programs for `(h, x)`: add, subtract, intersect and
/// add-of-invert, in that order. `h` may reference helpers of `lib`; the
/// slot programs are expanded.
pub fn generate_group(h: &Program, x: Primitive, lib: &Library) -> Result<OperatorGroup> {
    let h = crate::program::expand(h, lib)?;
    let xp = Program::Prim(x);
    let programs = [
        Program::binary(BinaryOp::Add, h.clone(), xp.clone()),
        Program::binary(BinaryOp::Subtract, h.clone(), xp.clone()),
        Program::binary(BinaryOp::Intersect, h.clone(), xp.clone()),
        Program::binary(BinaryOp::Add, Program::unary(UnaryOp::Invert, h.clone()), xp),
    ];
    let empty = Library::new();
    let slots = programs
        .map(|program| {
            let target = evaluate(&program, &empty).expect("expanded program");
            GroupSlot { program, target }
        });
    Ok(OperatorGroup { h, x, slots })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PairOutcome {
    Pass { explored: u64 },
    Fail { witness: Program, cost: usize, explored: u64 },
    Inconclusive { explored: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairReport {
    /// 1-based slot injected as the helper.
    pub from: usize,
    /// 1-based slot being derived.
    pub to: usize,
    pub prescribed: usize,
    pub outcome: PairOutcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupReport {
    pub verdict: Verdict,
    pub issues: Vec<String>,
    pub pairs: Vec<PairReport>,
}

/// Name used for the injected group member inside witness programs.
pub const INJECTED: &str = "member";

#[derive(Clone, Copy)]
enum WNode {
    Prim(Primitive),
    Member,
    Unary(UnaryOp, u32),
    Binary(BinaryOp, u32, u32),
}

#[derive(Clone, Copy)]
struct WEntry {
    grid: Grid,
    uses: bool,
    node: WNode,
}

fn witness_program(entries: &[WEntry], idx: u32) -> Program {
    match entries[idx as usize].node {
        WNode::Prim(p) => Program::Prim(p),
        WNode::Member => Program::helper(INJECTED),
        WNode::Unary(op, c) => Program::unary(op, witness_program(entries, c)),
        WNode::Binary(op, l, r) => Program::binary(
            op,
            witness_program(entries, l),
            witness_program(entries, r),
        ),
    }
}

/// Cheapest program using the injected member that reaches `target` with
/// cost below `bound`, where primitives cost one node and the member costs
/// `member_cost`. Returns the outcome of the bounded search.
fn cross_derivation(
    member: Grid,
    member_cost: usize,
    target: Grid,
    bound: usize,
    max_candidates: u64,
) -> PairOutcome {
    let mut entries: Vec<WEntry> = Vec::new();
    let mut by_cost: Vec<Vec<u32>> = vec![Vec::new(); bound.max(1)];
    let mut seen: [GridMap<()>; 2] = [GridMap::default(), GridMap::default()];
    let mut explored = 0u64;
    // Raw parts are only useful while they leave room for the member and
    // one operator.
    let raw_limit = bound.saturating_sub(member_cost + 2);

    macro_rules! offer {
        ($grid:expr, $uses:expr, $node:expr, $cost:expr) => {{
            if explored >= max_candidates {
                return PairOutcome::Inconclusive { explored };
            }
            explored += 1;
            let (grid, uses, cost): (Grid, bool, usize) = ($grid, $uses, $cost);
            let keep = uses || cost <= raw_limit;
            if keep && seen[uses as usize].insert(grid, ()).is_none() {
                let idx = entries.len() as u32;
                entries.push(WEntry { grid, uses, node: $node });
                by_cost[cost].push(idx);
                if uses && grid == target {
                    return PairOutcome::Fail {
                        witness: witness_program(&entries, idx),
                        cost,
                        explored,
                    };
                }
            }
        }};
    }

    for cost in 1..bound {
        if cost == 1 {
            for p in Primitive::ALL {
                offer!(p.grid(), false, WNode::Prim(p), 1);
            }
        }
        if cost == member_cost {
            offer!(member, true, WNode::Member, cost);
        }
        if cost < 2 {
            continue;
        }
        for bop in BinaryOp::ALL {
            for lc in 1..cost - 1 {
                let rc = cost - 1 - lc;
                let lefts = by_cost[lc].clone();
                let rights = by_cost[rc].clone();
                for &a in &lefts {
                    let ea = entries[a as usize];
                    for &b in &rights {
                        let eb = entries[b as usize];
                        offer!(
                            bop.apply(ea.grid, eb.grid),
                            ea.uses || eb.uses,
                            WNode::Binary(bop, a, b),
                            cost
                        );
                    }
                }
            }
        }
        for uop in UnaryOp::ALL {
            let children = by_cost[cost - 1].clone();
            for &a in &children {
                let ea = entries[a as usize];
                offer!(uop.apply(ea.grid), ea.uses, WNode::Unary(uop, a), cost);
            }
        }
    }
    PairOutcome::Pass { explored }
}

/// Checks the group's targets are non-blank, pairwise distinct and produced
/// by their slot programs, then for each ordered pair searches for a
/// derivation of one target from another member that is smaller (in
/// expanded nodes, the member counted at its own size) than the slot's
/// prescribed program.
pub fn validate_group(g: &OperatorGroup, budget: SynthesisBudget) -> Result<GroupReport> {
    budget.validate()?;
    let lib = Library::new();
    let mut issues = Vec::new();
    for (i, slot) in g.slots.iter().enumerate() {
        if slot.target.is_blank() {
            issues.push(format!("slot {} target is blank", i + 1));
        }
        if evaluate(&slot.program, &lib)? != slot.target {
            issues.push(format!("slot {} program does not produce its target", i + 1));
        }
        for (j, other) in g.slots.iter().enumerate().skip(i + 1) {
            if other.target == slot.target {
                issues.push(format!("duplicate: slots {} and {} share a target", i + 1, j + 1));
            }
        }
    }
    let sizes: Vec<usize> = g
        .slots
        .iter()
        .map(|s| crate::program::expand(&s.program, &lib).map(|e| e.surface_size().node_count))
        .collect::<Result<_>>()?;
    let ordered: Vec<(usize, usize)> = (0..4)
        .flat_map(|a| (0..4).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let pairs: Vec<PairReport> = ordered
        .into_par_iter()
        .map(|(a, b)| PairReport {
            from: a + 1,
            to: b + 1,
            prescribed: sizes[b],
            outcome: cross_derivation(
                g.slots[a].target,
                sizes[a],
                g.slots[b].target,
                sizes[b],
                budget.max_candidates,
            ),
        })
        .collect();
    let verdict = if !issues.is_empty()
        || pairs.iter().any(|p| matches!(p.outcome, PairOutcome::Fail { .. }))
    {
        Verdict::Fail
    } else if pairs
        .iter()
        .any(|p| matches!(p.outcome, PairOutcome::Inconclusive { .. }))
    {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(GroupReport {
        verdict,
        issues,
        pairs,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialCheck {
    pub index: usize,
    pub kind: String,
    pub n: Option<usize>,
    pub passed: bool,
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::grid::as_opt_key")]
    pub expected: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::grid::as_opt_key")]
    pub actual: Option<Grid>,
}

/// Re-derives each annotated trial from the earlier solutions it names.
/// Sequential entries must look back exactly one trial; long-range ones
/// further.
pub fn validate_sequential(c: &Curriculum) -> Vec<TrialCheck> {
    let mut env: HashMap<String, Program> = c
        .helpers
        .iter()
        .map(|h| (h.id.clone(), h.program.clone()))
        .collect();
    let lib = Library::new();
    let mut out = Vec::new();
    for t in &c.trials {
        let mut check = TrialCheck {
            index: t.index,
            kind: t.meta.kind().into(),
            n: None,
            passed: true,
            message: None,
            expected: None,
            actual: None,
        };
        let (derivation, n) = match &t.meta {
            TrialMeta::Sequential { n, derivation } | TrialMeta::LongRange { n, derivation } => {
                (Some(derivation), Some(*n))
            }
            TrialMeta::Helper { derivation } => (Some(derivation), None),
            TrialMeta::Root | TrialMeta::Group { .. } => (None, None),
        };
        check.n = n;
        if let Some(derivation) = derivation {
            let refs = trial_refs(derivation);
            if let Some(&late) = refs.iter().find(|&&r| r == 0 || r >= t.index) {
                check.passed = false;
                check.message = Some(format!("refers to P{late}, which is not an earlier trial"));
            } else if let Some(n) = n {
                let actual_n = refs.last().map(|&r| t.index - r);
                let kind_ok = match &t.meta {
                    TrialMeta::Sequential { .. } => n == 1,
                    _ => n > 1,
                };
                if actual_n != Some(n) || !kind_ok {
                    check.passed = false;
                    check.message = Some(format!(
                        "annotated n = {n} for a {} trial, derivation looks back {:?}",
                        t.meta.kind(),
                        actual_n
                    ));
                }
            }
            if check.passed {
                match substitute(derivation, &env).and_then(|p| evaluate(&p, &lib)) {
                    Ok(actual) if actual == t.target => {}
                    Ok(actual) => {
                        check.passed = false;
                        check.message = Some("derivation does not reproduce the target".into());
                        check.expected = Some(t.target);
                        check.actual = Some(actual);
                    }
                    Err(e) => {
                        check.passed = false;
                        check.message = Some(e.to_string());
                    }
                }
            }
        }
        env.insert(format!("P{}", t.index), t.solution.clone());
        out.push(check);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub h_id: String,
    pub h: Program,
    pub x: Primitive,
}

/// The shipped operator-group specification: one `(h, x)` pair per group.
/// Group helpers may refer to earlier group helpers by id.
pub fn e2_groups() -> Vec<GroupSpec> {
    serde_json::from_str(E2_GROUPS).expect("shipped group data parses")
}

/// Builds a group curriculum, four consecutive trials per spec.
pub fn build_groups(name: &str, specs: &[GroupSpec]) -> Result<Curriculum> {
    let empty = Library::new();
    let mut env = HashMap::new();
    let mut helpers = Vec::new();
    let mut trials = Vec::new();
    for (gi, spec) in specs.iter().enumerate() {
        if env.contains_key(&spec.h_id) {
            return Err(Error::InvalidCurriculum(format!("group helper `{}` defined twice", spec.h_id)));
        }
        let h = substitute(&spec.h, &env)?;
        let group = generate_group(&h, spec.x, &empty)?;
        helpers.push(NamedHelper {
            id: spec.h_id.clone(),
            program: spec.h.clone(),
        });
        env.insert(spec.h_id.clone(), h);
        for (si, slot) in group.slots.into_iter().enumerate() {
            trials.push(Trial {
                index: trials.len() + 1,
                target: slot.target,
                solution: slot.program,
                meta: TrialMeta::Group {
                    group_id: gi + 1,
                    slot: si + 1,
                    h_id: spec.h_id.clone(),
                    x: spec.x,
                },
            });
        }
    }
    let c = Curriculum {
        name: name.into(),
        dsl_version: DSL_VERSION.into(),
        helpers,
        trials,
    };
    c.validate()?;
    Ok(c)
}

/// The sixteen-trial operator-group curriculum.
pub fn build_e2() -> Curriculum {
    build_groups("e2", &e2_groups()).expect("shipped groups build")
}

/// Regenerates each group of a group curriculum from its helper and
/// primitive.
pub fn groups_of(c: &Curriculum) -> Result<Vec<OperatorGroup>> {
    let empty = Library::new();
    let mut env = HashMap::new();
    for h in &c.helpers {
        let program = substitute(&h.program, &env)?;
        env.insert(h.id.clone(), program);
    }
    let mut groups = Vec::new();
    for t in &c.trials {
        if let TrialMeta::Group { slot: 1, h_id, x, .. } = &t.meta {
            let h = env
                .get(h_id)
                .ok_or_else(|| Error::UnknownHelper(h_id.clone()))?;
            groups.push(generate_group(h, *x, &empty)?);
        }
    }
    Ok(groups)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumReport {
    pub name: String,
    pub sequential: Vec<TrialCheck>,
    pub groups: Vec<GroupReport>,
    /// Group trials whose target differs from the regenerated slot.
    pub slot_mismatches: Vec<usize>,
    pub passed: bool,
}

/// Every check that applies to `c`: annotated derivations, regenerated
/// group slots, and the pairwise group constraints.
pub fn validate_curriculum(c: &Curriculum, budget: SynthesisBudget) -> Result<CurriculumReport> {
    c.validate()?;
    let sequential = validate_sequential(c);
    let groups = groups_of(c)?;
    let mut slot_mismatches = Vec::new();
    let mut group_of_trial = 0;
    for t in &c.trials {
        if let TrialMeta::Group { slot, .. } = &t.meta {
            if *slot == 1 {
                group_of_trial += 1;
            }
            let expected = groups
                .get(group_of_trial.max(1) - 1)
                .and_then(|g| g.slots.get(slot.saturating_sub(1)))
                .map(|s| s.target);
            if expected != Some(t.target) {
                slot_mismatches.push(t.index);
            }
        }
    }
    let groups = groups
        .iter()
        .map(|g| validate_group(g, budget))
        .collect::<Result<Vec<_>>>()?;
    let passed = sequential.iter().all(|t| t.passed)
        && slot_mismatches.is_empty()
        && groups.iter().all(|g| g.verdict == Verdict::Pass);
    Ok(CurriculumReport {
        name: c.name.clone(),
        sequential,
        groups,
        slot_mismatches,
        passed,
    })
}
