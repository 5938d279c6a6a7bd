//! Budgeted bottom-up enumerative synthesis.
//!
//! Programs are enumerated in layers of increasing surface size (every leaf,
//! primitive or helper, counts as one node). Each output grid keeps a single
//! representative: the first program that produced it, which is also one of
//! the shortest. Layer `k + 1` applies every operator to the retained
//! representatives of layers `<= k`.
//!
//! Candidate order within a layer is fixed: operators in
//! [`Operator::ALL`] order, the left operand iterating before the right.
//! Leaves come first in layer 1: primitives in printed order, then helpers
//! in creation order.

use std::collections::{HashMap, HashSet};
use std::hash::{BuildHasherDefault, Hasher};
use std::sync::Arc;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryOp, Grid, Operator, Primitive, UnaryOp};
use crate::program::{HelperId, Library, Program};

pub const DEFAULT_MAX_CANDIDATES: u64 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisBudget {
    pub max_candidates: u64,
    /// Largest layer (surface node count) explored. With an empty library
    /// this is the expanded node count.
    #[serde(default)]
    pub max_size: Option<usize>,
}

impl Default for SynthesisBudget {
    fn default() -> Self {
        SynthesisBudget {
            max_candidates: DEFAULT_MAX_CANDIDATES,
            max_size: None,
        }
    }
}

impl SynthesisBudget {
    pub fn candidates(max_candidates: u64) -> Self {
        SynthesisBudget {
            max_candidates,
            max_size: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_candidates == 0 {
            return Err(Error::InvalidConfig("max_candidates must be positive".into()));
        }
        if self.max_size == Some(0) {
            return Err(Error::InvalidConfig("max_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    #[default]
    SolutionSubtrees,
    AllRetained,
}

/// Ordered sub-programs produced while solving one task; the last element
/// is the solution.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DerivationTrace(pub Vec<Program>);

impl DerivationTrace {
    pub fn programs(&self) -> &[Program] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn solution(&self) -> Option<&Program> {
        self.0.last()
    }
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Solved {
        program: Program,
        trace: DerivationTrace,
    },
    Failed,
}

#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub outcome: Outcome,
    pub candidates_explored: u64,
    pub classes_retained: usize,
    arena: Arc<Arena>,
    solution_index: Option<u32>,
}

impl SynthesisResult {
    pub fn is_solved(&self) -> bool {
        matches!(self.outcome, Outcome::Solved { .. })
    }

    pub fn program(&self) -> Option<&Program> {
        match &self.outcome {
            Outcome::Solved { program, .. } => Some(program),
            Outcome::Failed => None,
        }
    }

    /// Number of layers the search opened.
    pub fn layers_explored(&self) -> usize {
        self.arena.layers.len().saturating_sub(1)
    }
}

// Multiply-xorshift hasher for u128 grid keys.
#[derive(Default)]
pub(crate) struct GridHasher(u64);

impl Hasher for GridHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 ^ b as u64).wrapping_mul(0x100_0000_01b3);
        }
    }

    fn write_u128(&mut self, v: u128) {
        let lo = v as u64;
        let hi = (v >> 64) as u64;
        let mut h = lo.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ hi.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
        h ^= h >> 29;
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 32;
        self.0 ^= h;
    }
}

pub(crate) type GridMap<V> = HashMap<Grid, V, BuildHasherDefault<GridHasher>>;
pub(crate) type GridSet = HashSet<Grid, BuildHasherDefault<GridHasher>>;

#[derive(Clone, Copy, Debug)]
enum Node {
    Prim(Primitive),
    Helper(u32),
    Unary(UnaryOp, u32),
    Binary(BinaryOp, u32, u32),
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    grid: Grid,
    node: Node,
}

#[derive(Debug, Default)]
struct Arena {
    entries: Vec<Entry>,
    // layers[k] holds entry indices of surface size k; layers[0] is unused.
    layers: Vec<Vec<u32>>,
    helper_ids: Vec<HelperId>,
}

impl Arena {
    fn program(&self, idx: u32, memo: &mut HashMap<u32, Program>) -> Program {
        if let Some(p) = memo.get(&idx) {
            return p.clone();
        }
        let p = match self.entries[idx as usize].node {
            Node::Prim(p) => Program::Prim(p),
            Node::Helper(h) => Program::Helper(self.helper_ids[h as usize].clone()),
            Node::Unary(op, c) => Program::unary(op, self.program(c, memo)),
            Node::Binary(op, l, r) => {
                let left = self.program(l, memo);
                let right = self.program(r, memo);
                Program::binary(op, left, right)
            }
        };
        memo.insert(idx, p.clone());
        p
    }
}

enum Step {
    Found(u32),
    Exhausted,
    Continue,
}

struct Search {
    arena: Arena,
    seen: GridMap<u32>,
    candidates: u64,
    max_candidates: u64,
    target: Option<Grid>,
}

impl Search {
    fn offer(&mut self, grid: Grid, node: Node, layer: usize) -> Step {
        if self.candidates >= self.max_candidates {
            return Step::Exhausted;
        }
        self.candidates += 1;
        if self.seen.contains_key(&grid) {
            return Step::Continue;
        }
        let idx = self.arena.entries.len() as u32;
        self.arena.entries.push(Entry { grid, node });
        self.arena.layers[layer].push(idx);
        self.seen.insert(grid, idx);
        if Some(grid) == self.target {
            Step::Found(idx)
        } else {
            Step::Continue
        }
    }

    fn run(&mut self, lib: &Library, max_size: Option<usize>) -> Option<Step> {
        self.arena.layers = vec![Vec::new(), Vec::new()];
        for p in Primitive::ALL {
            match self.offer(p.grid(), Node::Prim(p), 1) {
                Step::Continue => {}
                other => return Some(other),
            }
        }
        for (i, entry) in lib.entries().iter().enumerate() {
            self.arena.helper_ids.push(entry.id.clone());
            match self.offer(entry.output, Node::Helper(i as u32), 1) {
                Step::Continue => {}
                other => return Some(other),
            }
        }
        let mut layer = 2;
        loop {
            if max_size.is_some_and(|m| layer > m) {
                return None;
            }
            self.arena.layers.push(Vec::new());
            if let Some(step) = self.expand_layer(layer) {
                return Some(step);
            }
            layer += 1;
        }
    }

    fn expand_layer(&mut self, layer: usize) -> Option<Step> {
        for op in Operator::ALL {
            match op {
                Operator::Binary(bop) => {
                    for left_size in 1..layer - 1 {
                        let right_size = layer - 1 - left_size;
                        if bop.is_commutative() && left_size > right_size {
                            continue;
                        }
                        let lefts = self.arena.layers[left_size].clone();
                        let rights = self.arena.layers[right_size].clone();
                        for &a in &lefts {
                            let ga = self.arena.entries[a as usize].grid;
                            for &b in &rights {
                                if bop.is_commutative() && left_size == right_size && b <= a {
                                    continue;
                                }
                                let gb = self.arena.entries[b as usize].grid;
                                match self.offer(bop.apply(ga, gb), Node::Binary(bop, a, b), layer) {
                                    Step::Continue => {}
                                    other => return Some(other),
                                }
                            }
                        }
                    }
                }
                Operator::Unary(uop) => {
                    let children = self.arena.layers[layer - 1].clone();
                    for &a in &children {
                        let entry = self.arena.entries[a as usize];
                        if matches!(entry.node, Node::Unary(inner, _) if inner == uop) {
                            continue;
                        }
                        match self.offer(uop.apply(entry.grid), Node::Unary(uop, a), layer) {
                            Step::Continue => {}
                            other => return Some(other),
                        }
                    }
                }
            }
        }
        None
    }
}

/// Searches for the smallest program (in surface size) producing `target`.
pub fn solve(target: Grid, lib: &Library, budget: SynthesisBudget) -> Result<SynthesisResult> {
    budget.validate()?;
    let mut search = Search {
        arena: Arena::default(),
        seen: GridMap::default(),
        candidates: 0,
        max_candidates: budget.max_candidates,
        target: Some(target),
    };
    let step = search.run(lib, budget.max_size);
    let classes_retained = search.arena.entries.len();
    let candidates_explored = search.candidates;
    let arena = Arc::new(search.arena);
    Ok(match step {
        Some(Step::Found(idx)) => {
            let program = arena.program(idx, &mut HashMap::new());
            let trace = DerivationTrace(program.subtrees_postorder());
            SynthesisResult {
                outcome: Outcome::Solved { program, trace },
                candidates_explored,
                classes_retained,
                arena,
                solution_index: Some(idx),
            }
        }
        _ => SynthesisResult {
            outcome: Outcome::Failed,
            candidates_explored,
            classes_retained,
            arena,
            solution_index: None,
        },
    })
}

/// Derivation trace of a solved result.
pub fn trace_of(result: &SynthesisResult, mode: TraceMode) -> Result<DerivationTrace> {
    let (Outcome::Solved { trace, .. }, Some(solution)) = (&result.outcome, result.solution_index)
    else {
        return Err(Error::NoSolution);
    };
    match mode {
        TraceMode::SolutionSubtrees => Ok(trace.clone()),
        TraceMode::AllRetained => {
            let mut memo = HashMap::new();
            Ok(DerivationTrace(
                (0..=solution)
                    .map(|i| result.arena.program(i, &mut memo))
                    .collect(),
            ))
        }
    }
}

/// Lower bound on the number of depth-`d` programs: full binary trees with
/// leaves drawn from the six primitives and internal nodes from the three
/// binary operators, `6^(2^d) * 3^(2^d - 1)`.
pub fn enumerate_counts(depth: u32) -> BigUint {
    let leaves = BigUint::from(2u32).pow(depth);
    let leaves: u32 = leaves.try_into().expect("depth too large for exponent");
    BigUint::from(6u32).pow(leaves) * BigUint::from(3u32).pow(leaves - 1)
}

/// Output grids reachable by programs of surface size `<= max_size`,
/// together with the number of candidates built. With `prune` the search
/// keeps one representative per output (plus the symmetric-operand and
/// involution skips); without it every tree is enumerated.
pub fn reachable_outputs(lib: &Library, max_size: usize, prune: bool) -> (GridSetOut, u64) {
    if prune {
        let mut search = Search {
            arena: Arena::default(),
            seen: GridMap::default(),
            candidates: 0,
            max_candidates: u64::MAX,
            target: None,
        };
        search.run(lib, Some(max_size));
        let out = search.arena.entries.iter().map(|e| e.grid).collect();
        return (out, search.candidates);
    }
    let mut layers: Vec<Vec<Grid>> = vec![Vec::new()];
    let mut candidates = 0u64;
    let leaves: Vec<Grid> = Primitive::ALL
        .iter()
        .map(|p| p.grid())
        .chain(lib.entries().iter().map(|e| e.output))
        .collect();
    candidates += leaves.len() as u64;
    layers.push(leaves);
    for layer in 2..=max_size {
        let mut next = Vec::new();
        for op in Operator::ALL {
            match op {
                Operator::Binary(bop) => {
                    for ls in 1..layer - 1 {
                        let rs = layer - 1 - ls;
                        for &a in &layers[ls] {
                            for &b in &layers[rs] {
                                next.push(bop.apply(a, b));
                            }
                        }
                    }
                }
                Operator::Unary(uop) => {
                    for &a in &layers[layer - 1] {
                        next.push(uop.apply(a));
                    }
                }
            }
        }
        candidates += next.len() as u64;
        layers.push(next);
    }
    (layers.into_iter().flatten().collect(), candidates)
}

pub type GridSetOut = std::collections::BTreeSet<Grid>;
