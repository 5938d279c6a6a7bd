//! Best-Single-Helper over flat tuple corpora, and its reduction from
//! maximum-edge biclique.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ARITY: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatCorpus {
    pub arity: usize,
    pub alphabet: Vec<String>,
    pub reference: Vec<String>,
    pub tuples: Vec<Vec<String>>,
}

impl FlatCorpus {
    pub fn validate(&self) -> Result<()> {
        if self.reference.len() != self.arity {
            return Err(Error::InvalidConfig(format!(
                "reference has length {}, arity is {}",
                self.reference.len(),
                self.arity
            )));
        }
        if let Some((i, t)) = self.tuples.iter().enumerate().find(|(_, t)| t.len() != self.arity) {
            return Err(Error::InvalidConfig(format!(
                "tuple {i} has length {}, arity is {}",
                t.len(),
                self.arity
            )));
        }
        Ok(())
    }

    // Bit i set when the tuple agrees with the reference at position i.
    fn agreement_masks(&self) -> Vec<u32> {
        self.tuples
            .iter()
            .map(|t| {
                t.iter()
                    .zip(&self.reference)
                    .enumerate()
                    .filter(|(_, (a, b))| a == b)
                    .fold(0u32, |m, (i, _)| m | (1 << i))
            })
            .collect()
    }

    /// Number of tuples matching the reference on every position of `s`
    /// (1-based).
    pub fn occ(&self, s: &[usize]) -> usize {
        let mask = positions_to_mask(s);
        self.agreement_masks()
            .into_iter()
            .filter(|a| mask & !a == 0)
            .count()
    }

    pub fn utility(&self, s: &[usize]) -> usize {
        s.len() * self.occ(s)
    }
}

fn positions_to_mask(s: &[usize]) -> u32 {
    s.iter().fold(0, |m, &i| m | (1 << (i - 1)))
}

fn mask_to_positions(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect()
}

/// Exact maximiser of `U(S) = |S| · occ(S)` over all position subsets.
/// Ties go to the smaller set, then the lexicographically smaller position
/// list.
pub fn best_single_helper_bruteforce(fc: &FlatCorpus) -> Result<(Vec<usize>, usize)> {
    fc.validate()?;
    if fc.arity > MAX_ARITY {
        return Err(Error::InstanceTooLarge {
            arity: fc.arity,
            limit: MAX_ARITY,
        });
    }
    let masks = fc.agreement_masks();
    let mut best: (usize, Vec<usize>) = (0, Vec::new());
    for mask in 1u32..(1 << fc.arity) {
        let occ = masks.iter().filter(|&&a| mask & !a == 0).count();
        let u = mask.count_ones() as usize * occ;
        if u < best.0 {
            continue;
        }
        let positions = mask_to_positions(mask);
        let better = u > best.0
            || positions.len() < best.1.len()
            || (positions.len() == best.1.len() && positions < best.1);
        if better {
            best = (u, positions);
        }
    }
    Ok((best.1, best.0))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub left: usize,
    pub right: usize,
    /// Edges as 0-based (left, right) pairs.
    pub edges: Vec<(usize, usize)>,
}

impl BipartiteGraph {
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u, v))
    }

    pub fn validate(&self) -> Result<()> {
        match self.edges.iter().find(|&&(u, v)| u >= self.left || v >= self.right) {
            Some((u, v)) => Err(Error::InvalidConfig(format!("edge ({u}, {v}) out of range"))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reduction {
    pub corpus: FlatCorpus,
    pub threshold: usize,
}

impl Reduction {
    pub fn decide(&self) -> Result<bool> {
        Ok(best_single_helper_bruteforce(&self.corpus)?.1 >= self.threshold)
    }
}

/// Positions are left vertices, each right vertex contributes `n + 1`
/// tuples. A missing edge places a fresh symbol in that cell, so a tuple
/// matches a position set exactly when its right vertex is adjacent to all
/// of them.
pub fn biclique_reduction(g: &BipartiteGraph, k: usize) -> Result<Reduction> {
    g.validate()?;
    let n = g.left;
    let copies = n + 1;
    let reference: Vec<String> = (1..=n).map(|i| format!("a_{i}")).collect();
    let mut alphabet = reference.clone();
    let mut tuples = Vec::with_capacity(g.right * copies);
    for j in 0..g.right {
        for l in 1..=copies {
            let tuple: Vec<String> = (0..n)
                .map(|i| {
                    if g.has_edge(i, j) {
                        reference[i].clone()
                    } else {
                        let b = format!("b_{{{},{},{}}}", i + 1, j + 1, l);
                        alphabet.push(b.clone());
                        b
                    }
                })
                .collect();
            tuples.push(tuple);
        }
    }
    Ok(Reduction {
        corpus: FlatCorpus {
            arity: n,
            alphabet,
            reference,
            tuples,
        },
        threshold: copies * k,
    })
}

/// Largest `|S| * |T|` over bicliques, found by enumerating left subsets
/// and taking their common neighbourhood.
pub fn max_biclique_edges(g: &BipartiteGraph) -> Result<usize> {
    g.validate()?;
    if g.left > MAX_ARITY {
        return Err(Error::InstanceTooLarge {
            arity: g.left,
            limit: MAX_ARITY,
        });
    }
    let adj: Vec<u32> = (0..g.right)
        .map(|j| (0..g.left).filter(|&i| g.has_edge(i, j)).fold(0, |m, i| m | 1 << i))
        .collect();
    let mut best = 0;
    for s in 1u32..(1 << g.left) {
        let t = adj.iter().filter(|&&a| s & !a == 0).count();
        best = best.max(s.count_ones() as usize * t);
    }
    Ok(best)
}

pub fn random_graph<R: Rng>(rng: &mut R, max_side: usize) -> BipartiteGraph {
    let left = rng.gen_range(1..=max_side);
    let right = rng.gen_range(1..=max_side);
    let density: f64 = rng.gen_range(0.2..0.9);
    let edges = (0..left)
        .flat_map(|i| (0..right).map(move |j| (i, j)))
        .filter(|_| rng.gen_bool(density))
        .collect();
    BipartiteGraph { left, right, edges }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomCheck {
    pub graph: BipartiteGraph,
    pub k: usize,
    pub biclique: bool,
    pub reduction: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomReport {
    pub seed: u64,
    pub graphs: usize,
    pub max_side: usize,
    pub agreements: usize,
    pub disagreements: Vec<RandomCheck>,
}

/// Decides random instances both directly and through the reduction. The
/// threshold `k` is drawn around the true optimum so both answers occur.
pub fn check_random_reductions(graphs: usize, max_side: usize, seed: u64) -> Result<RandomReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances: Vec<(BipartiteGraph, usize)> = (0..graphs)
        .map(|_| {
            let g = random_graph(&mut rng, max_side);
            let k = rng.gen_range(1..=g.left * g.right);
            (g, k)
        })
        .collect();
    let checks: Vec<RandomCheck> = instances
        .into_par_iter()
        .map(|(graph, k)| {
            let biclique = max_biclique_edges(&graph)? >= k;
            let reduction = biclique_reduction(&graph, k)?.decide()?;
            Ok(RandomCheck {
                graph,
                k,
                biclique,
                reduction,
            })
        })
        .collect::<Result<_>>()?;
    let (agree, disagree): (Vec<_>, Vec<_>) = checks.into_iter().partition(|c| c.biclique == c.reduction);
    Ok(RandomReport {
        seed,
        graphs,
        max_side,
        agreements: agree.len(),
        disagreements: disagree,
    })
}
