//! Independent reference implementations shared by the oracle tests and the
//! acceptance target. None of these call the algorithm under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use pbt_core::hardness::BipartiteGraph;
use pbt_core::{BinaryOp, Grid, Library, Primitive, Program, UnaryOp};
use rand::seq::SliceRandom;
use rand::Rng;

pub const PRINTED: &str = include_str!("../fixtures/printed_arrays.txt");

/// Labelled 10×10 arrays from the printed prompt text: each label line is
/// followed by rows of 0/1 cells.
pub fn printed_arrays() -> BTreeMap<String, Grid> {
    let mut out = BTreeMap::new();
    let mut label: Option<String> = None;
    let mut cells: Vec<bool> = Vec::new();
    for line in PRINTED.lines() {
        let t = line.trim();
        let new_label = if let Some(name) = t.strip_suffix(" = [") {
            Some(name.to_string())
        } else if t.ends_with(':') && t != "Target:" {
            Some(t.trim_end_matches(':').to_string())
        } else {
            None
        };
        if let Some(l) = new_label {
            label = Some(l);
            cells.clear();
            continue;
        }
        if label.is_none() || !t.starts_with('[') {
            continue;
        }
        cells.extend(t.chars().filter(|c| *c == '0' || *c == '1').map(|c| c == '1'));
        if cells.len() == 100 {
            let g = Grid::from_fn(|r, c| cells[r * 10 + c]);
            out.insert(label.take().unwrap(), g);
            cells.clear();
        }
    }
    out
}

// ---- programs ----

pub fn nodes(p: &Program) -> usize {
    match p {
        Program::Prim(_) | Program::Helper(_) => 1,
        Program::Unary(_, a) => 1 + nodes(a),
        Program::Binary(_, a, b) => 1 + nodes(a) + nodes(b),
    }
}

pub fn inline(p: &Program, lib: &Library) -> Program {
    match p {
        Program::Prim(_) => p.clone(),
        Program::Helper(id) => inline(&lib.get(id).expect("known helper").program, lib),
        Program::Unary(op, a) => Program::unary(*op, inline(a, lib)),
        Program::Binary(op, a, b) => Program::binary(*op, inline(a, lib), inline(b, lib)),
    }
}

pub fn eval(p: &Program, lib: &Library) -> Grid {
    match p {
        Program::Prim(x) => x.grid(),
        Program::Helper(id) => eval(&lib.get(id).expect("known helper").program, lib),
        Program::Unary(op, a) => {
            let g = eval(a, lib);
            match op {
                UnaryOp::Invert => g.invert(),
                UnaryOp::ReflectHorizontal => g.reflect_horizontal(),
                UnaryOp::ReflectVertical => g.reflect_vertical(),
                UnaryOp::ReflectDiag => g.reflect_diag(),
            }
        }
        Program::Binary(op, a, b) => {
            let (x, y) = (eval(a, lib), eval(b, lib));
            match op {
                BinaryOp::Add => x.add(y),
                BinaryOp::Subtract => x.subtract(y),
                BinaryOp::Intersect => x.intersect(y),
            }
        }
    }
}

fn walk<'a>(p: &'a Program, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, &'a Program)>) {
    out.push((path.clone(), p));
    let kids: Vec<&Program> = match p {
        Program::Prim(_) | Program::Helper(_) => vec![],
        Program::Unary(_, a) => vec![a],
        Program::Binary(_, a, b) => vec![a, b],
    };
    for (i, k) in kids.into_iter().enumerate() {
        path.push(i);
        walk(k, path, out);
        path.pop();
    }
}

/// Every node of `p` with its root path.
pub fn positions(p: &Program) -> Vec<(Vec<usize>, &Program)> {
    let mut out = Vec::new();
    walk(p, &mut Vec::new(), &mut out);
    out
}

/// Compression utility by brute force: inline everything, list every
/// subtree match, let larger helpers claim first, and count a program once
/// per helper that keeps at least one unclaimed match.
pub fn cu_oracle(helpers: &[Program], corpus: &[Program], lib: &Library) -> u64 {
    let mut hs: Vec<Program> = Vec::new();
    for h in helpers {
        let e = inline(h, lib);
        if !hs.contains(&e) {
            hs.push(e);
        }
    }
    hs.sort_by_key(|h| std::cmp::Reverse(nodes(h)));
    let corpus: Vec<Program> = corpus.iter().map(|p| inline(p, lib)).collect();
    let mut total = 0u64;
    for program in &corpus {
        let all = positions(program);
        let mut claimed: Vec<Vec<usize>> = Vec::new();
        for h in &hs {
            let hits: Vec<Vec<usize>> = all
                .iter()
                .filter(|(_, sub)| *sub == h)
                .map(|(path, _)| path.clone())
                .filter(|path| {
                    !claimed
                        .iter()
                        .any(|c| c.len() < path.len() && path[..c.len()] == c[..])
                })
                .collect();
            if !hits.is_empty() {
                total += nodes(h) as u64;
                claimed.extend(hits);
            }
        }
    }
    total
}

pub fn random_program<R: Rng>(rng: &mut R, budget: usize, helpers: &[String]) -> Program {
    let leaf = |rng: &mut R| {
        if !helpers.is_empty() && rng.gen_bool(0.2) {
            Program::helper(helpers[rng.gen_range(0..helpers.len())].clone())
        } else {
            Program::prim(Primitive::ALL[rng.gen_range(0..6)])
        }
    };
    if budget <= 1 || rng.gen_bool(0.25) {
        return leaf(rng);
    }
    if budget == 2 || rng.gen_bool(0.35) {
        let op = UnaryOp::ALL[rng.gen_range(0..4)];
        return Program::unary(op, random_program(rng, budget - 1, helpers));
    }
    let op = BinaryOp::ALL[rng.gen_range(0..3)];
    let left_budget = rng.gen_range(1..budget - 1);
    let l = random_program(rng, left_budget, helpers);
    let r = random_program(rng, budget - 1 - nodes(&l), helpers);
    Program::binary(op, l, r)
}

/// A random library, corpus and helper set for utility checks; most
/// helpers are subtrees of corpus programs so matches are common.
pub fn random_case(rng: &mut rand_chacha::ChaCha8Rng) -> (Library, Vec<Program>, Vec<Program>) {
    let mut lib = Library::new();
    let mut names = Vec::new();
    if rng.gen_bool(0.5) {
        let n = rng.gen_range(2..=4);
        let h = random_program(rng, n, &[]);
        let (id, _) = lib.insert(h, 0).unwrap();
        names.push(id.as_str().to_string());
    }
    let corpus: Vec<Program> = (0..rng.gen_range(1..=6))
        .map(|_| loop {
            let n = rng.gen_range(1..=15);
            let p = random_program(rng, n, &names);
            if nodes(&inline(&p, &lib)) <= 15 {
                break p;
            }
        })
        .collect();
    let helpers: Vec<Program> = (0..rng.gen_range(1..=3))
        .map(|_| match rng.gen_range(0..4) {
            0 => {
                let n = rng.gen_range(1..=5);
                random_program(rng, n, &names)
            }
            _ => {
                let p = corpus.choose(rng).unwrap();
                let subs = positions(p);
                subs.choose(rng).unwrap().1.clone()
            }
        })
        .collect();
    (lib, corpus, helpers)
}

// ---- enumeration ----

/// Every output reachable with at most `max` nodes, with the smallest size
/// that reaches it, and the number of trees enumerated.
pub fn naive_outputs(max: usize) -> (BTreeMap<Grid, usize>, u64) {
    let mut layers: Vec<Vec<Grid>> = vec![vec![], Primitive::ALL.iter().map(|p| p.grid()).collect()];
    for n in 2..=max {
        let mut next = Vec::new();
        for &g in &layers[n - 1] {
            next.push(g.invert());
            next.push(g.reflect_horizontal());
            next.push(g.reflect_vertical());
            next.push(g.reflect_diag());
        }
        for left in 1..n - 1 {
            for &a in &layers[left] {
                for &b in &layers[n - 1 - left] {
                    next.push(a.add(b));
                    next.push(a.subtract(b));
                    next.push(a.intersect(b));
                }
            }
        }
        layers.push(next);
    }
    let mut best = BTreeMap::new();
    let mut trees = 0u64;
    for (n, layer) in layers.iter().enumerate() {
        trees += layer.len() as u64;
        for g in layer {
            best.entry(*g).or_insert(n);
        }
    }
    (best, trees)
}

pub fn output_set(m: &BTreeMap<Grid, usize>) -> BTreeSet<Grid> {
    m.keys().copied().collect()
}

// ---- bicliques ----

/// Largest `|S| * |T|` over all complete bipartite subgraphs, by trying every
/// pair of vertex subsets.
pub fn brute_biclique(g: &BipartiteGraph) -> usize {
    let mut best = 0;
    for s in 1u32..(1 << g.left) {
        for t in 1u32..(1 << g.right) {
            let complete = (0..g.left)
                .filter(|u| s >> u & 1 == 1)
                .all(|u| (0..g.right).filter(|v| t >> v & 1 == 1).all(|v| g.edges.contains(&(u, v))));
            if complete {
                best = best.max((s.count_ones() * t.count_ones()) as usize);
            }
        }
    }
    best
}

pub fn random_bipartite<R: Rng>(rng: &mut R, max_side: usize) -> BipartiteGraph {
    let left = rng.gen_range(1..=max_side);
    let right = rng.gen_range(1..=max_side);
    let p: f64 = rng.gen_range(0.2..0.9);
    let mut edges = Vec::new();
    for u in 0..left {
        for v in 0..right {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    BipartiteGraph { left, right, edges }
}
