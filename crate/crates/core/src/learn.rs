//! Compression utility and the abstraction operators that promote helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::program::{expand, Library, Path, Program};
use crate::synth::DerivationTrace;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelperCandidateScore {
    pub candidate: Program,
    pub size: usize,
    pub occ: usize,
    pub utility: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    Rc,
    Gl,
    Pl,
    OracleProspective,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbstractionConfig {
    pub strategy: Strategy,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    1
}

fn default_q() -> f64 {
    0.3
}

impl AbstractionConfig {
    pub fn new(strategy: Strategy) -> Self {
        AbstractionConfig {
            strategy,
            k: default_k(),
            q: default_q(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.strategy {
            Strategy::Rc | Strategy::OracleProspective if self.k == 0 => {
                Err(Error::InvalidConfig("k must be at least 1".into()))
            }
            Strategy::Pl if !(self.q > 0.0 && self.q < 1.0) => {
                Err(Error::InvalidConfig(format!("q = {} is not in (0, 1)", self.q)))
            }
            _ => Ok(()),
        }
    }
}

fn strictly_inside(path: &Path, claimed: &[Path]) -> bool {
    claimed
        .iter()
        .any(|r| r.len() < path.len() && path.starts_with(r))
}

/// Per-helper coverage counts for an already expanded helper set over an
/// already expanded corpus. Returns `occ` in input order; a helper that
/// repeats an earlier one contributes nothing.
fn coverage(helpers: &[Program], corpus: &[Program]) -> Vec<usize> {
    let mut order: Vec<usize> = Vec::with_capacity(helpers.len());
    for (i, h) in helpers.iter().enumerate() {
        if !helpers[..i].contains(h) {
            order.push(i);
        }
    }
    let sizes: Vec<usize> = helpers.iter().map(|h| h.surface_size().node_count).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then_with(|| helpers[a].cmp(&helpers[b])));

    let mut occ = vec![0; helpers.len()];
    for program in corpus {
        let mut claimed: Vec<Path> = Vec::new();
        for &i in &order {
            let counted: Vec<Path> = program
                .occurrences_of(&helpers[i])
                .into_iter()
                .filter(|q| !strictly_inside(q, &claimed))
                .collect();
            if !counted.is_empty() {
                occ[i] += 1;
                claimed.extend(counted);
            }
        }
    }
    occ
}

fn expand_all(programs: &[Program], lib: &Library) -> Result<Vec<Program>> {
    programs.iter().map(|p| expand(p, lib)).collect()
}

fn utility_of_expanded(helpers: &[Program], corpus: &[Program]) -> u64 {
    coverage(helpers, corpus)
        .into_iter()
        .zip(helpers)
        .map(|(occ, h)| (occ * h.surface_size().node_count) as u64)
        .sum()
}

/// Scores each helper of `helpers` over `corpus` under the coverage rule
/// of the whole set.
pub fn score_set(
    helpers: &[Program],
    corpus: &[Program],
    lib: &Library,
) -> Result<Vec<HelperCandidateScore>> {
    let expanded = expand_all(helpers, lib)?;
    let corpus = expand_all(corpus, lib)?;
    let occ = coverage(&expanded, &corpus);
    Ok(helpers
        .iter()
        .zip(&expanded)
        .zip(occ)
        .map(|((h, e), occ)| {
            let size = e.surface_size().node_count;
            HelperCandidateScore {
                candidate: h.clone(),
                size,
                occ,
                utility: (size * occ) as u64,
            }
        })
        .collect())
}

/// Total expanded nodes saved by `helpers` over `corpus`: the sum of
/// `size × occ` where each program counts once per helper and occurrences
/// nested inside a counted occurrence of a larger helper are ignored.
pub fn compression_utility(helpers: &[Program], corpus: &[Program], lib: &Library) -> Result<u64> {
    let expanded = expand_all(helpers, lib)?;
    let corpus = expand_all(corpus, lib)?;
    Ok(utility_of_expanded(&expanded, &corpus))
}

/// Greedy marginal-gain selection over an expanded pool. Ties go to the
/// lowest priority value, which defaults to pool order.
fn greedy(
    pool: &[Program],
    corpus: &[Program],
    k: usize,
    priority: &[u64],
) -> Vec<(usize, u64)> {
    let mut picked: Vec<usize> = Vec::new();
    let mut chosen: Vec<Program> = Vec::new();
    let mut base = 0u64;
    let mut out = Vec::new();
    while out.len() < k {
        let mut best: Option<(u64, u64, usize)> = None;
        for (i, cand) in pool.iter().enumerate() {
            if picked.contains(&i) || chosen.contains(cand) {
                continue;
            }
            chosen.push(cand.clone());
            let total = utility_of_expanded(&chosen, corpus);
            chosen.pop();
            let gain = total.saturating_sub(base);
            let better = match best {
                None => true,
                Some((g, p, _)) => gain > g || (gain == g && priority[i] < p),
            };
            if better {
                best = Some((gain, priority[i], i));
            }
        }
        match best {
            Some((gain, _, i)) if gain > 0 => {
                picked.push(i);
                chosen.push(pool[i].clone());
                base += gain;
                out.push((i, gain));
            }
            _ => break,
        }
    }
    out
}

fn trace_pool(trace: &DerivationTrace, lib: &Library) -> Result<(Vec<Program>, Vec<Program>)> {
    let mut originals = Vec::new();
    let mut expanded = Vec::new();
    for p in trace.programs() {
        if lib.contains_output(crate::program::evaluate(p, lib)?) {
            continue;
        }
        let e = expand(p, lib)?;
        if expanded.contains(&e) {
            continue;
        }
        originals.push(p.clone());
        expanded.push(e);
    }
    Ok((originals, expanded))
}

/// Retrospective compression: greedily picks up to `k` trace elements by
/// marginal compression utility over the solved corpus, skipping elements
/// whose output the library already holds.
pub fn abstract_rc(
    trace: &DerivationTrace,
    corpus: &[Program],
    k: usize,
    lib: &Library,
) -> Result<Vec<Program>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let (originals, pool) = trace_pool(trace, lib)?;
    let corpus = expand_all(corpus, lib)?;
    let order: Vec<u64> = (0..pool.len() as u64).collect();
    Ok(greedy(&pool, &corpus, k, &order)
        .into_iter()
        .map(|(i, _)| originals[i].clone())
        .collect())
}

/// Greedy library learning: promotes only the solution itself.
pub fn abstract_gl(trace: &DerivationTrace) -> Result<Vec<Program>> {
    trace
        .solution()
        .cloned()
        .map(|p| vec![p])
        .ok_or(Error::EmptyTrace)
}

/// Probabilistic library learning: keeps each trace element independently
/// with probability `q`.
pub fn abstract_pl(trace: &DerivationTrace, q: f64, seed: u64) -> Result<Vec<Program>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidConfig(format!("q = {q} is not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(trace
        .programs()
        .iter()
        .filter(|_| rng.gen_bool(q))
        .cloned()
        .collect())
}

fn priorities(n: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen()).collect()
}

/// Prospective compression with a point-mass belief on the true corpus:
/// greedy top-`k` trace elements by utility over `full_corpus`.
pub fn abstract_prospective(
    trace: &DerivationTrace,
    full_corpus: &[Program],
    k: usize,
    lib: &Library,
    seed: u64,
) -> Result<Vec<Program>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let (originals, pool) = trace_pool(trace, lib)?;
    let corpus = expand_all(full_corpus, lib)?;
    let prio = priorities(pool.len(), seed);
    Ok(greedy(&pool, &corpus, k, &prio)
        .into_iter()
        .map(|(i, _)| originals[i].clone())
        .collect())
}

/// Hindsight helpers: subtrees of the ground-truth solutions of trials
/// `1..=upto_trial`, ranked greedily by utility over the full corpus.
/// Equal gains are ordered by a seeded random priority.
pub fn oracle_helpers(
    full_corpus: &[Program],
    upto_trial: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<HelperCandidateScore>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    if upto_trial == 0 || upto_trial > full_corpus.len() {
        return Err(Error::InvalidConfig(format!(
            "upto_trial {upto_trial} outside 1..={}",
            full_corpus.len()
        )));
    }
    let lib = Library::new();
    let corpus = expand_all(full_corpus, &lib)?;
    let mut pool: Vec<Program> = Vec::new();
    for p in &corpus[..upto_trial] {
        for s in p.subtrees_postorder() {
            if !pool.contains(&s) {
                pool.push(s);
            }
        }
    }
    let prio = priorities(pool.len(), seed);
    let picks = greedy(&pool, &corpus, k, &prio);
    let helpers: Vec<Program> = picks.iter().map(|&(i, _)| pool[i].clone()).collect();
    score_set(&helpers, full_corpus, &lib)
}
