//! Files handed to the browser task app: curricula and a golden table of
//! operator results its own evaluator must reproduce.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curriculum::{Curriculum, DSL_VERSION};
use crate::error::{Error, Result};
use crate::grid::{apply_binary, apply_unary, Grid, Operator, Primitive};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenCase {
    #[serde(with = "crate::grid::as_key")]
    pub a: Grid,
    #[serde(with = "crate::grid::as_key")]
    pub b: Grid,
    /// Operator name to result key; unary operators apply to `a`.
    pub results: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenFile {
    pub dsl_version: String,
    pub seed: u64,
    pub primitives: BTreeMap<String, String>,
    pub cases: Vec<GoldenCase>,
}

impl GoldenFile {
    /// Recomputes every case; returns the first mismatch.
    pub fn verify(&self) -> Result<()> {
        for p in Primitive::ALL {
            if self.primitives.get(p.name()) != Some(&p.grid().key()) {
                return Err(Error::InvalidConfig(format!("primitive `{p}` differs")));
            }
        }
        for (i, case) in self.cases.iter().enumerate() {
            if case.results != results(case.a, case.b) {
                return Err(Error::InvalidConfig(format!("golden case {i} differs")));
            }
        }
        Ok(())
    }
}

fn results(a: Grid, b: Grid) -> BTreeMap<String, String> {
    Operator::ALL
        .into_iter()
        .map(|op| {
            let g = match op.arity() {
                1 => apply_unary(op, a),
                _ => apply_binary(op, a, b),
            }
            .expect("arity matches");
            (op.name().to_string(), g.key())
        })
        .collect()
}

fn random_grid(rng: &mut ChaCha8Rng) -> Grid {
    // Mix dense, sparse and primitive-derived operands.
    match rng.gen_range(0..4) {
        0 => Primitive::ALL[rng.gen_range(0..6)].grid(),
        1 => {
            let p: f64 = rng.gen_range(0.05..0.3);
            Grid::from_fn(|_, _| rng.gen_bool(p))
        }
        _ => Grid::from_bits(rng.gen::<u128>()),
    }
}

pub fn golden_cases(count: usize, seed: u64) -> GoldenFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = (0..count)
        .map(|_| {
            let a = random_grid(&mut rng);
            let b = random_grid(&mut rng);
            GoldenCase {
                a,
                b,
                results: results(a, b),
            }
        })
        .collect();
    GoldenFile {
        dsl_version: DSL_VERSION.to_string(),
        seed,
        primitives: Primitive::ALL
            .iter()
            .map(|p| (p.name().to_string(), p.grid().key()))
            .collect(),
        cases,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UiBundle {
    pub dsl_version: String,
    pub curricula: Vec<Curriculum>,
}
