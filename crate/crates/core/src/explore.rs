//! Symmetry-filtered random walk over raw programs.
//!
//! The pool starts as the six primitives. Each step extends a pool program
//! by one operator; a result is kept only when its grid is new and
//! symmetric on a configured axis. A full pool drops its largest member.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AxisSet, Grid, Operator, Primitive};
use crate::program::{evaluate, Library, Program};
use crate::synth::GridSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub steps: u64,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    pub seed: u64,
    #[serde(default = "AxisSet::all")]
    pub symmetry_axes: AxisSet,
}

fn default_pool_size() -> usize {
    256
}

impl WalkConfig {
    pub fn new(steps: u64, seed: u64) -> Self {
        WalkConfig {
            steps,
            pool_size: default_pool_size(),
            seed,
            symmetry_axes: AxisSet::all(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be positive".into()));
        }
        if self.pool_size < Primitive::ALL.len() {
            return Err(Error::InvalidConfig(format!(
                "pool_size must be at least {}",
                Primitive::ALL.len()
            )));
        }
        if self.symmetry_axes.is_empty() {
            return Err(Error::InvalidConfig("no symmetry axes configured".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discovery {
    pub step: u64,
    pub key: String,
    pub node_count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub config: WalkConfig,
    pub total_discovered: usize,
    /// Discoveries per program node count.
    pub histogram: BTreeMap<usize, usize>,
}

#[derive(Clone, Debug)]
struct PoolEntry {
    program: Program,
    nodes: usize,
    key: String,
}

#[derive(Clone, Debug)]
pub struct WalkResult {
    pub config: WalkConfig,
    pub log: Vec<Discovery>,
    /// One program per discovered grid, in log order.
    pub programs: Vec<Program>,
}

impl WalkResult {
    pub fn summary(&self) -> WalkSummary {
        let mut histogram = BTreeMap::new();
        for d in &self.log {
            *histogram.entry(d.node_count).or_default() += 1;
        }
        WalkSummary {
            config: self.config,
            total_discovered: self.log.len(),
            histogram,
        }
    }

    /// Discoveries made at or before `step`.
    pub fn discovered_by(&self, step: u64) -> usize {
        self.log.partition_point(|d| d.step <= step)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for d in &self.log {
            serde_json::to_writer(&mut w, d)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn admit(pool: &mut Vec<PoolEntry>, entry: PoolEntry, cap: usize) {
    if pool.len() >= cap {
        let victim = pool
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.nodes.cmp(&b.nodes).then_with(|| a.key.cmp(&b.key)))
            .map(|(i, _)| i)
            .expect("pool is non-empty");
        debug_assert!(pool.iter().all(|e| e.nodes <= pool[victim].nodes));
        pool.swap_remove(victim);
    }
    pool.push(entry);
}

pub fn random_walk(cfg: &WalkConfig) -> Result<WalkResult> {
    cfg.validate()?;
    let lib = Library::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut seen = GridSet::default();
    let mut log = Vec::new();
    let mut programs = Vec::new();
    let mut pool: Vec<PoolEntry> = Vec::with_capacity(cfg.pool_size);
    let mut record = |step: u64, grid: Grid, p: &Program, log: &mut Vec<Discovery>| {
        let nodes = p.surface_size().node_count;
        log.push(Discovery {
            step,
            key: grid.key(),
            node_count: nodes,
        });
        programs.push(p.clone());
    };
    for prim in Primitive::ALL {
        let g = prim.grid();
        let p = Program::Prim(prim);
        seen.insert(g);
        if g.symmetry_axes().intersects(cfg.symmetry_axes) {
            record(0, g, &p, &mut log);
        }
        pool.push(PoolEntry {
            program: p,
            nodes: 1,
            key: g.key(),
        });
    }
    for step in 1..=cfg.steps {
        let base = pool[rng.gen_range(0..pool.len())].program.clone();
        let op = Operator::ALL[rng.gen_range(0..Operator::ALL.len())];
        let mut args = vec![base];
        if op.arity() == 2 {
            let i = rng.gen_range(0..pool.len() + Primitive::ALL.len());
            args.push(match pool.get(i) {
                Some(e) => e.program.clone(),
                None => Program::Prim(Primitive::ALL[i - pool.len()]),
            });
        }
        let candidate = Program::apply(op, args)?;
        let grid = evaluate(&candidate, &lib)?;
        if seen.contains(&grid) || !grid.symmetry_axes().intersects(cfg.symmetry_axes) {
            continue;
        }
        seen.insert(grid);
        record(step, grid, &candidate, &mut log);
        let nodes = candidate.surface_size().node_count;
        admit(
            &mut pool,
            PoolEntry {
                program: candidate,
                nodes,
                key: grid.key(),
            },
            cfg.pool_size,
        );
    }
    Ok(WalkResult {
        config: *cfg,
        log,
        programs,
    })
}
