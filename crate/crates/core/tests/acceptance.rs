//! One PASS/FAIL line per headline criterion. Runs without the test
//! harness so the lines reach the terminal; exits non-zero on any FAIL.

mod common;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use num_bigint::BigUint;
use pbt_core::curriculum::{build_e1, build_e2, groups_of, validate_group, Verdict};
use pbt_core::explore::{random_walk, WalkConfig};
use pbt_core::hardness::{best_single_helper_bruteforce, biclique_reduction, FlatCorpus};
use pbt_core::llm::{
    extract_code, lower_and_run, parse_constrained, run_direct, run_llm, DiagnosticKind,
    PromptMode, ScriptedBackend, MAX_ATTEMPTS,
};
use pbt_core::analysis::{model_topk_cu, oracle_topk_cu};
use pbt_core::models::{run_symbolic, ModelKind, RunConfig, RunRecord};
use pbt_core::synth::reachable_outputs;
use pbt_core::{
    compression_utility, enumerate_counts, evaluate, Grid, Library, Primitive, SynthesisBudget,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn dsl_bit_exactness() -> Check {
    let arrays = printed_arrays();
    for p in Primitive::ALL {
        if p == Primitive::Blank {
            ensure(p.grid().count_ones() == 0, "blank has set cells")?;
            continue;
        }
        ensure(arrays.get(p.name()) == Some(&p.grid()), format!("{p} differs"))?;
    }
    let example = Primitive::LineHorizontal.grid().add(Primitive::LineVertical.grid());
    ensure(arrays["EXAMPLE"] == example, "example target differs")?;
    let e1 = build_e1();
    ensure(arrays["Target 1"] == e1.trials[0].target, "E1 target 1 differs")?;
    ensure(arrays["Target 2"] == e1.trials[1].target, "E1 target 2 differs")?;
    Ok("5 primitives, example and 2 targets exact".into())
}

fn algebraic_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mask = (1u128 << 100) - 1;
    let mut failures = 0;
    for _ in 0..10_000 {
        let a = Grid::from_bits(rng.gen::<u128>() & mask);
        let b = Grid::from_bits(rng.gen::<u128>() & mask);
        let ok = a.invert().invert() == a
            && a.reflect_horizontal().reflect_horizontal() == a
            && a.reflect_vertical().reflect_vertical() == a
            && a.reflect_diag().reflect_diag() == a
            && a.add(b) == b.add(a)
            && a.intersect(b) == b.intersect(a)
            && a.subtract(b) == a.intersect(b.invert())
            && a.add(b).invert() == a.invert().intersect(b.invert())
            && a.intersect(b).invert() == a.invert().add(b.invert());
        failures += usize::from(!ok);
    }
    ensure(failures == 0, format!("{failures} failing cases"))?;
    Ok("10000 cases, 0 failures".into())
}

fn hardness_kit() -> Check {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let fc = FlatCorpus {
        arity: 3,
        alphabet: s(&["A", "B", "X", "Y"]),
        reference: s(&["A", "A", "X"]),
        tuples: vec![s(&["A", "A", "X"]), s(&["A", "A", "Y"]), s(&["A", "B", "X"])],
    };
    ensure(fc.utility(&[1, 2]) == 4, format!("U({{1,2}}) = {}", fc.utility(&[1, 2])))?;
    ensure(fc.utility(&[1]) == 3, format!("U({{1}}) = {}", fc.utility(&[1])))?;
    let (_, best) = best_single_helper_bruteforce(&fc).map_err(|e| e.to_string())?;
    ensure(best == 4, format!("best utility {best}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut agree = 0;
    for _ in 0..200 {
        let g = random_bipartite(&mut rng, 7);
        let k = rng.gen_range(1..=g.left * g.right);
        let r = biclique_reduction(&g, k).map_err(|e| e.to_string())?;
        agree += usize::from(r.decide().map_err(|e| e.to_string())? == (brute_biclique(&g) >= k));
    }
    ensure(agree == 200, format!("{agree}/200 graphs agree"))?;
    Ok("U({1,2}) = 4, U({1}) = 3, 200/200 graphs agree".into())
}

fn cu_oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    for case in 0..500 {
        let (lib, corpus, helpers) = random_case(&mut rng);
        let got = compression_utility(&helpers, &corpus, &lib).map_err(|e| e.to_string())?;
        let want = cu_oracle(&helpers, &corpus, &lib);
        ensure(got == want, format!("case {case}: {got} vs oracle {want}"))?;
    }
    Ok("500/500 corpora equal".into())
}

fn search_space_bound() -> Check {
    let d0 = enumerate_counts(0);
    let d1 = enumerate_counts(1);
    let d4 = enumerate_counts(4);
    ensure(d0 == BigUint::from(6u32), format!("d=0 gives {d0}"))?;
    ensure(d1 == BigUint::from(108u32), format!("d=1 gives {d1}"))?;
    ensure(d4 > BigUint::from(1_000_000u32), format!("d=4 gives {d4}"))?;
    Ok(format!("6, 108, {d4}"))
}

fn pruning_soundness() -> Check {
    let lib = Library::new();
    let (pruned, with) = reachable_outputs(&lib, 4, true);
    let (full, without) = reachable_outputs(&lib, 4, false);
    let (naive, trees) = naive_outputs(4);
    ensure(pruned == full, "pruned and unpruned output sets differ")?;
    ensure(full == output_set(&naive), "output set differs from the reference enumeration")?;
    ensure(without == trees, "unpruned count differs from the reference enumeration")?;
    ensure(with < without, format!("{with} candidates is not below {without}"))?;
    Ok(format!("{} outputs, {with} vs {without} candidates", pruned.len()))
}

fn curriculum_validation() -> Check {
    let lib = Library::new();
    let e1 = build_e1();
    ensure(e1.len() == 14, "E1 does not have 14 trials")?;
    for t in &e1.trials {
        let g = evaluate(&t.solution, &lib).map_err(|e| e.to_string())?;
        ensure(g == t.target, format!("E1 trial {} differs", t.index))?;
    }
    let groups = groups_of(&build_e2()).map_err(|e| e.to_string())?;
    let mut pairs = 0;
    for (i, g) in groups.iter().enumerate() {
        let r = validate_group(g, SynthesisBudget::default()).map_err(|e| e.to_string())?;
        ensure(r.pairs.len() == 12, format!("group {} checked {} pairs", i + 1, r.pairs.len()))?;
        ensure(
            r.verdict == Verdict::Pass,
            format!("group {} is {:?}: {:?}", i + 1, r.verdict, r.issues),
        )?;
        pairs += r.pairs.len();
    }
    Ok(format!("14/14 E1 programs, {} E2 groups, {pairs} pairs pass", groups.len()))
}

fn run(model: ModelKind, c: &pbt_core::curriculum::Curriculum) -> Result<RunRecord, String> {
    run_symbolic(c, &RunConfig::new(model)).map_err(|e| e.to_string())
}

fn model_suite() -> Check {
    let e1 = build_e1();
    let e2 = build_e2();
    let nolib = run(ModelKind::Nolib, &e1)?;
    let rc1 = run(ModelKind::Rc, &e1)?;
    let gl1 = run(ModelKind::Gl, &e1)?;
    let rc2 = run(ModelKind::Rc, &e2)?;
    let gl2 = run(ModelKind::Gl, &e2)?;

    ensure(!nolib.completed(), "(a) nolib completed E1")?;
    ensure(rc1.completed(), "(a) rc did not complete E1")?;
    ensure(gl1.completed(), "(b) gl did not complete E1")?;
    ensure(
        gl2.solved_count() < rc2.solved_count(),
        format!("(b) gl solved {} of E2, rc {}", gl2.solved_count(), rc2.solved_count()),
    )?;

    let mut strict_e2 = 0;
    for (c, rc) in [(&e1, &rc1), (&e2, &rc2)] {
        for t in 1..=c.len() {
            let model = model_topk_cu(rc, c, t, 1).map_err(|e| e.to_string())?;
            let oracle = oracle_topk_cu(c, t, 1, 0).map_err(|e| e.to_string())?;
            ensure(oracle >= model, format!("(c) {} trial {t}: oracle {oracle} < rc {model}", c.name))?;
            if c.name == e2.name && oracle > model {
                strict_e2 += 1;
            }
        }
    }
    ensure(strict_e2 > 0, "(c) no strict E2 trial")?;

    let raw: Vec<usize> = rc1.trials.iter().map(|t| t.raw_op_count.unwrap_or(0)).collect();
    ensure(raw[0] < raw[raw.len() - 1], format!("(d) raw op counts {raw:?}"))?;
    let ops: Vec<usize> = rc1.trials.iter().filter_map(|t| t.op_count).collect();
    let band = ops.iter().max().unwrap() - ops.iter().min().unwrap();
    ensure(band <= 4, format!("(d) rc op_count band {band}: {ops:?}"))?;

    Ok(format!(
        "nolib fails at E1 trial {}; gl {} vs rc {} on E2; {strict_e2} strict E2 trials; raw {}→{}, band {band}",
        nolib.first_failure().unwrap_or(0),
        gl2.solved_count(),
        rc2.solved_count(),
        raw[0],
        raw[raw.len() - 1],
    ))
}

fn random_walk_properties() -> Check {
    let cfg = WalkConfig::new(100_000, 2024);
    let a = random_walk(&cfg).map_err(|e| e.to_string())?;
    let mut keys = HashSet::new();
    for d in &a.log {
        let g = Grid::from_key(&d.key).map_err(|e| e.to_string())?;
        ensure(g.symmetry_axes().intersects(cfg.symmetry_axes), format!("{} is not symmetric", d.key))?;
        ensure(keys.insert(d.key.clone()), format!("{} repeated", d.key))?;
    }
    ensure(a.log.windows(2).all(|w| w[0].step <= w[1].step), "log steps go backwards")?;
    let counts: Vec<usize> = (0..=100).map(|i| a.discovered_by(i * 1_000)).collect();
    ensure(counts.windows(2).all(|w| w[0] <= w[1]), "discovery count decreases")?;
    let b = random_walk(&cfg).map_err(|e| e.to_string())?;
    let (mut ja, mut jb) = (Vec::new(), Vec::new());
    a.write_jsonl(&mut ja).map_err(|e| e.to_string())?;
    b.write_jsonl(&mut jb).map_err(|e| e.to_string())?;
    ensure(ja == jb, "rerun log differs")?;
    Ok(format!("{} discoveries, {} log bytes identical on rerun", a.log.len(), ja.len()))
}

const SAMPLES: [&str; 4] = [
    include_str!("fixtures/e1_composite_01.py"),
    include_str!("fixtures/e1_composite_14.py"),
    include_str!("fixtures/e2_composite_02.py"),
    include_str!("fixtures/e2_composite_04.py"),
];

fn llm_harness() -> Check {
    let e1 = build_e1();
    let e2 = build_e2();
    let lib = Library::new();
    let mut grids = Vec::new();
    for (i, src) in SAMPLES.iter().enumerate() {
        let cs = parse_constrained(&extract_code(src), &[])
            .map_err(|d| format!("sample {} does not parse: {d:?}", i + 1))?;
        let low = lower_and_run(&cs, &[]);
        ensure(run_direct(&cs, &[]) == low.grid, format!("sample {} direct ≠ lowered", i + 1))?;
        let g = evaluate(&low.program, &lib).map_err(|e| e.to_string())?;
        ensure(g == low.grid, format!("sample {} lowered AST disagrees", i + 1))?;
        grids.push((low.grid, low.program));
    }
    ensure(grids[0].0 == e1.trials[0].target, "E1 sample 1 misses its target")?;
    ensure(grids[1].0 == e1.trials[13].target, "E1 sample 14 misses its target")?;
    ensure(grids[2].0 == e2.trials[1].target, "E2 sample 2 misses its target")?;
    let h = groups_of(&e2).map_err(|e| e.to_string())?[0].h.clone();
    let hg = evaluate(&h, &lib).map_err(|e| e.to_string())?;
    ensure(grids[3].1.subtrees_postorder().contains(&h), "E2 sample 4 lacks the group helper")?;
    ensure(
        grids[3].0.intersect(hg.invert()) == hg.invert()
            && e2.trials[3].target.intersect(hg.invert()) == hg.invert(),
        "E2 sample 4 is not built around the helper's complement",
    )?;

    let mut backend = ScriptedBackend::new(vec!["def reconstructed():\n    return blank"; 80]);
    let run = run_llm(&e1, PromptMode::WithHistory, &mut backend).map_err(|e| e.to_string())?;
    let most = run.transcripts.iter().map(|t| t.attempts.len()).max().unwrap_or(0);
    ensure(most == MAX_ATTEMPTS, format!("at most {most} attempts"))?;
    ensure(backend.remaining() == 80 - 14 * MAX_ATTEMPTS, "backend over-consumed")?;

    let forbidden = [
        ("def reconstructed():\n    while True:\n        x = blank\n    return x", "loop"),
        ("def reconstructed():\n    return add(*[square for _ in blank])", "comprehension"),
        ("import numpy\ndef reconstructed():\n    return blank", "import"),
        ("def reconstructed():\n    return 1 - square", "literal"),
        ("def reconstructed():\n    return square.T", "attribute"),
        ("def reconstructed():\n    x = invert(square)\n    return x[1]", "index"),
    ];
    for (src, want) in forbidden {
        let diags = parse_constrained(src, &[]).err().unwrap_or_default();
        let named = diags.iter().any(|d| match &d.kind {
            DiagnosticKind::ForbiddenConstruct(c) => {
                serde_json::to_string(c).unwrap_or_default() == format!("\"{want}\"")
            }
            _ => false,
        });
        ensure(named, format!("no `{want}` diagnostic for {src:?}"))?;
    }
    Ok(format!("4 samples round-trip, max {MAX_ATTEMPTS} attempts, 6 constructs named"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("dsl bit-exactness", dsl_bit_exactness),
        ("algebraic properties", algebraic_properties),
        ("hardness kit", hardness_kit),
        ("cu oracle equivalence", cu_oracle_equivalence),
        ("search-space lower bound", search_space_bound),
        ("pruning soundness", pruning_soundness),
        ("curriculum validation", curriculum_validation),
        ("model suite", model_suite),
        ("random walk", random_walk_properties),
        ("llm harness (mock)", llm_harness),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
