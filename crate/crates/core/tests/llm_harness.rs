use pbt_core::curriculum::{build_e1, build_e2, groups_of};
use pbt_core::llm::{
    extract_code, lower_and_run, parse_constrained, run_direct, run_llm, DiagnosticKind,
    PromptMode, ScriptedBackend, MAX_ATTEMPTS,
};
use pbt_core::{evaluate, Library, Operator, Primitive, Program};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const E1_C1: &str = include_str!("fixtures/e1_composite_01.py");
const E1_C14: &str = include_str!("fixtures/e1_composite_14.py");
const E2_C2: &str = include_str!("fixtures/e2_composite_02.py");
const E2_C4: &str = include_str!("fixtures/e2_composite_04.py");

fn lowered(src: &str) -> (pbt_core::Grid, Program, usize) {
    let cs = parse_constrained(&extract_code(src), &[]).unwrap();
    let out = lower_and_run(&cs, &[]);
    assert_eq!(evaluate(&out.program, &Library::new()).unwrap(), out.grid);
    (out.grid, out.program, cs.functions.len())
}

#[test]
fn e1_samples_rebuild_their_targets() {
    let c = build_e1();
    let (g1, _, n) = lowered(E1_C1);
    assert_eq!(n, 3);
    assert_eq!(g1, c.trials[0].target);
    let (g14, _, n) = lowered(E1_C14);
    assert_eq!(n, 13);
    assert_eq!(g14, c.trials[13].target);
}

#[test]
fn e2_samples_use_the_group_helper() {
    let c = build_e2();
    let h = groups_of(&c).unwrap()[0].h.clone();
    let lib = Library::new();
    let hg = evaluate(&h, &lib).unwrap();

    let (g2, p2, _) = lowered(E2_C2);
    assert_eq!(g2, c.trials[1].target);
    assert!(p2.subtrees_postorder().contains(&h));

    // The fourth sample removes the helper from the full grid and patches
    // two cells, so it keeps the complement of the helper like the slot
    // target does.
    let (g4, p4, _) = lowered(E2_C4);
    assert!(p4.subtrees_postorder().contains(&h));
    assert!(matches!(p4, Program::Binary(pbt_core::BinaryOp::Add, _, _)));
    assert_eq!(g4.intersect(hg.invert()), hg.invert());
    assert_eq!(c.trials[3].target.intersect(hg.invert()), hg.invert());
}

#[test]
fn scripted_samples_complete_a_short_run() {
    let mut c = build_e1();
    c.trials.truncate(1);
    let mut backend = ScriptedBackend::new(["```python\nfor i in range(3): pass\n```", E1_C1]);
    let run = run_llm(&c, PromptMode::Memoryless, &mut backend).unwrap();
    assert!(run.record.completed());
    assert_eq!(run.transcripts[0].attempts.len(), 2);
    assert_eq!(run.record.trials[0].attempts, Some(2));
    assert_eq!(run.record.library.len(), 2);
}

#[test]
fn refinement_stops_at_five() {
    let c = build_e1();
    let mut backend = ScriptedBackend::new(vec!["def reconstructed():\n    return blank"; 80]);
    let run = run_llm(&c, PromptMode::WithHistory, &mut backend).unwrap();
    assert_eq!(run.record.solved_count(), 0);
    assert!(run.transcripts.iter().all(|t| t.attempts.len() == MAX_ATTEMPTS));
    assert_eq!(backend.remaining(), 80 - 14 * MAX_ATTEMPTS);
    assert!(backend.prompts[5].contains("Not Built Correctly."));
}

#[test]
fn forbidden_sources_are_named() {
    let cases = [
        ("def reconstructed():\n    while True:\n        x = blank\n    return x", "loop"),
        ("def reconstructed():\n    return add(*[square for _ in blank])", "comprehension"),
        ("from numpy import ones\ndef reconstructed():\n    return blank", "import"),
        ("def reconstructed():\n    return 1 - square", "literal"),
        ("def reconstructed():\n    return square.T", "attribute"),
        ("def reconstructed():\n    x = invert(square)\n    return x[1]", "index"),
    ];
    for (src, want) in cases {
        let diags = parse_constrained(src, &[]).unwrap_err();
        let named = diags.iter().any(|d| match &d.kind {
            DiagnosticKind::ForbiddenConstruct(c) => serde_json::to_string(c).unwrap() == format!("\"{want}\""),
            _ => false,
        });
        assert!(named, "{src}: {diags:?}");
    }
}

/// Random well-formed sources in the constrained language.
struct SourceGen {
    rng: ChaCha8Rng,
}

impl SourceGen {
    fn expr(&mut self, locals: &[String], fns: &[String], depth: u32) -> String {
        let leaf = depth == 0 || self.rng.gen_bool(0.3);
        if leaf {
            let pick = self.rng.gen_range(0..3);
            if pick == 1 && !locals.is_empty() {
                return locals[self.rng.gen_range(0..locals.len())].clone();
            }
            if pick == 2 && !fns.is_empty() {
                return format!("{}()", fns[self.rng.gen_range(0..fns.len())]);
            }
            return Primitive::ALL[self.rng.gen_range(0..6)].name().to_string();
        }
        let op = Operator::ALL[self.rng.gen_range(0..Operator::ALL.len())];
        let args: Vec<String> = (0..op.arity()).map(|_| self.expr(locals, fns, depth - 1)).collect();
        let sep = if self.rng.gen_bool(0.2) { ",\n        " } else { ", " };
        let call = format!("{}({})", op.name(), args.join(sep));
        if self.rng.gen_bool(0.1) {
            format!("({call})")
        } else {
            call
        }
    }

    fn source(&mut self) -> String {
        let mut fns: Vec<String> = Vec::new();
        let mut out = String::new();
        let helpers = self.rng.gen_range(0..4);
        for i in 0..=helpers {
            let name = if i == helpers {
                "reconstructed".to_string()
            } else {
                format!("make_part_{i}")
            };
            out.push_str(&format!("def {name}():\n"));
            let mut locals = Vec::new();
            for j in 0..self.rng.gen_range(0..3) {
                let e = self.expr(&locals, &fns, 3);
                let local = format!("v{j}");
                out.push_str(&format!("    {local} = {e}\n"));
                locals.push(local);
            }
            let e = self.expr(&locals, &fns, 3);
            out.push_str(&format!("    return {e}\n\n"));
            fns.push(name);
        }
        out
    }
}

#[test]
fn lowering_matches_direct_evaluation_on_generated_sources() {
    let mut gen = SourceGen {
        rng: ChaCha8Rng::seed_from_u64(2024),
    };
    let lib = Library::new();
    for _ in 0..1000 {
        let src = gen.source();
        let cs = parse_constrained(&src, &[]).unwrap_or_else(|d| panic!("{src}\n{d:?}"));
        let out = lower_and_run(&cs, &[]);
        assert_eq!(run_direct(&cs, &[]), out.grid);
        assert_eq!(evaluate(&out.program, &lib).unwrap(), out.grid, "{src}");
        for h in &out.new_helpers {
            assert!(!h.program.uses_helpers());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn arbitrary_text_never_panics(src in "[a-z_()=,:\\[\\]0-9 \n\t.#]{0,120}") {
        if let Ok(cs) = parse_constrained(&src, &[]) {
            let out = lower_and_run(&cs, &[]);
            prop_assert_eq!(evaluate(&out.program, &Library::new()).unwrap(), out.grid);
        }
    }

    #[test]
    fn rejections_name_a_rule_or_position(src in "def reconstructed\\(\\):\n    return [a-z_(), 0-9]{1,40}") {
        if let Err(diags) = parse_constrained(&src, &[]) {
            prop_assert!(!diags.is_empty());
            for d in diags {
                prop_assert!(d.line >= 1 || d.kind == DiagnosticKind::MissingReconstructed);
            }
        }
    }
}
