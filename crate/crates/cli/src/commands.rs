use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use pbt_core::analysis::{
    build_metrics, replay, synthetic_logs, MetricsInputs, SessionLog, SyntheticParams, TopK,
};
use pbt_core::curriculum::{
    build_e1, build_e2, generate_group, validate_curriculum, validate_group, Curriculum,
};
use pbt_core::explore::{random_walk, WalkConfig};
use pbt_core::export::{golden_cases, UiBundle};
use pbt_core::hardness::{
    best_single_helper_bruteforce, biclique_reduction, check_random_reductions,
    max_biclique_edges, BipartiteGraph, FlatCorpus,
};
use pbt_core::llm::{run_llm, BackendClient, LlmRun, PromptMode, ScriptedBackend};
use pbt_core::models::{run_symbolic, ModelKind, RunConfig, RunRecord};
use pbt_core::{
    solve, trace_of, Axis, AxisSet, Grid, Library, Primitive, Program, SynthesisBudget,
    TraceMode,
};

use crate::{
    AnalyzeArgs, AxisArg, BudgetArgs, Command, CurriculumCommand, ExploreArgs, ExportUiArgs,
    HardnessCommand, RunArgs, SynthArgs,
};

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(a) => run(a),
        Command::Synth(a) => synth(a),
        Command::Analyze(a) => analyze(a),
        Command::Explore(a) => explore(a),
        Command::Hardness(h) => hardness(h),
        Command::Curriculum(c) => curriculum(c),
        Command::ExportUi(a) => export_ui(a),
    }
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{text}")?;
            Ok(())
        }
    }
}

/// Output wrapper recording the command and the settings that produced it.
#[derive(Serialize)]
struct Envelope<C: Serialize, R: Serialize> {
    command: &'static str,
    version: &'static str,
    config: C,
    result: R,
}

fn envelope<C: Serialize, R: Serialize>(command: &'static str, config: C, result: R) -> Envelope<C, R> {
    Envelope {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
        result,
    }
}

fn load_curriculum(arg: &str) -> Result<Curriculum> {
    let path = Path::new(arg);
    if !path.exists() {
        match arg {
            "e1" => return Ok(build_e1()),
            "e2" => return Ok(build_e2()),
            _ => {}
        }
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
    Curriculum::from_json(&text).with_context(|| format!("loading curriculum {arg}"))
}

fn budget(b: &BudgetArgs) -> Result<SynthesisBudget> {
    let budget = SynthesisBudget {
        max_candidates: b.budget,
        max_size: b.max_size,
    };
    budget.validate()?;
    Ok(budget)
}

fn load_run(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(record) = serde_json::from_str::<RunRecord>(&text) {
        return Ok(record);
    }
    let run: LlmRun = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a run record", path.display()))?;
    Ok(run.record)
}

fn run(a: RunArgs) -> Result<()> {
    let c = load_curriculum(&a.curriculum)?;
    if a.q.is_some() && a.model != ModelKind::Pl {
        bail!("--q only applies to the pl model");
    }
    if a.model.is_stochastic() && a.seed.is_none() {
        bail!("--seed is required for the {} model", a.model);
    }
    if a.script.is_some() && a.model.is_symbolic() {
        bail!("--script only applies to the llm models");
    }
    if a.model.is_symbolic() {
        let cfg = RunConfig {
            model: a.model,
            budget: budget(&a.budget)?,
            k: a.k,
            q: a.q.unwrap_or(0.3),
            seed: a.seed.unwrap_or(0),
            trace_mode: a.trace_mode.into(),
        };
        let record = run_symbolic(&c, &cfg)?;
        eprintln!(
            "{}: {} solved {}/{} trials",
            c.name,
            a.model,
            record.solved_count(),
            c.len()
        );
        return write_json(a.out.as_deref(), &record);
    }
    let mode = if a.model == ModelKind::LlmH {
        PromptMode::WithHistory
    } else {
        PromptMode::Memoryless
    };
    let mut backend = llm_backend(a.script.as_deref())?;
    let run = run_llm(&c, mode, backend.as_mut())?;
    eprintln!(
        "{}: {} solved {}/{} trials",
        c.name,
        a.model,
        run.record.solved_count(),
        c.len()
    );
    write_json(a.out.as_deref(), &run)
}

fn llm_backend(script: Option<&Path>) -> Result<Box<dyn BackendClient>> {
    if let Some(path) = script {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let responses: Vec<String> =
            serde_json::from_str(&text).context("a script is a JSON list of strings")?;
        return Ok(Box::new(ScriptedBackend::new(responses)));
    }
    remote_backend()
}

#[cfg(feature = "remote")]
fn remote_backend() -> Result<Box<dyn BackendClient>> {
    let cfg = pbt_core::llm::RemoteConfig::from_env()?;
    Ok(Box::new(pbt_core::llm::RemoteBackend::new(cfg)?))
}

#[cfg(not(feature = "remote"))]
fn remote_backend() -> Result<Box<dyn BackendClient>> {
    bail!("no --script given and this build has no remote backend (enable the `remote` feature)")
}

fn synth(a: SynthArgs) -> Result<()> {
    let target = match (&a.target, &a.target_json) {
        (Some(key), _) => Grid::from_key(key)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).context("target must be ten rows of ten 0/1 values")?
        }
        (None, None) => bail!("give --target or --target-json"),
    };
    let lib = match &a.library {
        None => Library::new(),
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            match serde_json::from_str::<Library>(&text) {
                Ok(lib) => lib,
                Err(_) => load_run(path)?.library,
            }
        }
    };
    let budget = budget(&a.budget)?;
    let mode: TraceMode = a.trace_mode.into();
    let res = solve(target, &lib, budget)?;
    let trace = if res.is_solved() {
        trace_of(&res, mode)?.0
    } else {
        Vec::new()
    };
    let result = json!({
        "target": target.key(),
        "solved": res.is_solved(),
        "program": res.program().map(|p| p.to_string()),
        "trace": trace.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        "candidates_explored": res.candidates_explored,
        "classes_retained": res.classes_retained,
        "layers_explored": res.layers_explored(),
    });
    let config = json!({
        "budget": budget,
        "trace_mode": mode,
        "library": a.library,
        "library_size": lib.len(),
    });
    write_json(a.out.as_deref(), &envelope("synth", config, result))
}

fn log_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<io::Result<_>>()?;
            inner.retain(|f| f.extension().is_some_and(|x| x == "json"));
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let c = load_curriculum(&a.curriculum)?;
    let logs: Vec<SessionLog> = match a.synthetic {
        Some(n) => {
            let params = SyntheticParams {
                participants: n,
                ..SyntheticParams::default()
            };
            let logs = synthetic_logs(&c, params, a.seed);
            if let Some(dir) = &a.write_logs {
                fs::create_dir_all(dir)?;
                for log in &logs {
                    let path = dir.join(format!("{}.json", log.participant_id));
                    write_json(Some(&path), log)?;
                }
            }
            logs
        }
        None => {
            if a.logs.is_empty() {
                bail!("give --logs or --synthetic");
            }
            log_files(&a.logs)?
                .par_iter()
                .map(|f| {
                    let text = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
                    SessionLog::from_json(&text).with_context(|| format!("rejecting {}", f.display()))
                })
                .collect::<Result<_>>()?
        }
    };
    let reports = logs
        .par_iter()
        .map(|l| replay(l).with_context(|| format!("rejecting log of {}", l.participant_id)))
        .collect::<Result<Vec<_>>>()?;
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed).collect();
    if !failed.is_empty() {
        eprintln!("{}", serde_json::to_string_pretty(&failed)?);
        bail!("{} session log(s) failed replay", failed.len());
    }
    let k = match a.k.as_str() {
        "auto" => TopK::Auto,
        n => TopK::Fixed(n.parse().context("--k is a number or `auto`")?),
    };
    let rc = a.rc_run.as_deref().map(load_run).transpose()?;
    let llm = a.llm_run.as_deref().map(load_run).transpose()?;
    let table = build_metrics(
        &MetricsInputs {
            curriculum: &c,
            logs: &logs,
            rc: rc.as_ref(),
            llm: llm.as_ref(),
        },
        k,
        a.seed,
    )?;
    let file = fs::File::create(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    table.write_csv(file)?;
    let sidecar = a.out.with_extension("json");
    let config = json!({
        "curriculum": a.curriculum,
        "logs": a.logs,
        "synthetic": a.synthetic,
        "rc_run": a.rc_run,
        "llm_run": a.llm_run,
        "k": a.k,
        "seed": a.seed,
    });
    write_json(Some(&sidecar), &envelope("analyze", config, &table.config))?;
    eprintln!("{} participants, {} rows", logs.len(), table.rows.len());
    Ok(())
}

fn explore(a: ExploreArgs) -> Result<()> {
    let axes: AxisSet = a
        .axes
        .iter()
        .map(|x| match x {
            AxisArg::Horizontal => Axis::Horizontal,
            AxisArg::Vertical => Axis::Vertical,
            AxisArg::MainDiagonal => Axis::MainDiagonal,
            AxisArg::AntiDiagonal => Axis::AntiDiagonal,
        })
        .collect();
    let cfg = WalkConfig {
        steps: a.steps,
        pool_size: a.pool_size,
        seed: a.seed,
        symmetry_axes: axes,
    };
    let result = random_walk(&cfg)?;
    let file = fs::File::create(&a.log).with_context(|| format!("writing {}", a.log.display()))?;
    result.write_jsonl(io::BufWriter::new(file))?;
    let summary = result.summary();
    eprintln!("{} discoveries in {} steps", summary.total_discovered, cfg.steps);
    write_json(Some(&a.summary), &summary)
}

fn worked_example() -> FlatCorpus {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    FlatCorpus {
        arity: 3,
        alphabet: s(&["A", "B", "X", "Y"]),
        reference: s(&["A", "A", "X"]),
        tuples: vec![s(&["A", "A", "X"]), s(&["A", "A", "Y"]), s(&["A", "B", "X"])],
    }
}

fn hardness(cmd: HardnessCommand) -> Result<()> {
    match cmd {
        HardnessCommand::Demo { out } => {
            let fc = worked_example();
            let (best, u) = best_single_helper_bruteforce(&fc)?;
            let result = json!({
                "corpus": fc,
                "utilities": {
                    "{1}": fc.utility(&[1]),
                    "{1,2}": fc.utility(&[1, 2]),
                    "{1,2,3}": fc.utility(&[1, 2, 3]),
                },
                "best": best,
                "best_utility": u,
            });
            write_json(out.as_deref(), &envelope("hardness demo", json!({}), result))
        }
        HardnessCommand::Random {
            graphs,
            max_side,
            seed,
            out,
        } => {
            let report = check_random_reductions(graphs, max_side, seed)?;
            eprintln!("{}/{} graphs agree", report.agreements, graphs);
            let config = json!({"graphs": graphs, "max_side": max_side, "seed": seed});
            write_json(out.as_deref(), &envelope("hardness random", config, report))
        }
        HardnessCommand::Reduce { graph, k, out } => {
            let text = fs::read_to_string(&graph).with_context(|| format!("reading {}", graph.display()))?;
            let g: BipartiteGraph = serde_json::from_str(&text).context("parsing graph")?;
            let reduction = biclique_reduction(&g, k)?;
            let result = json!({
                "decision": reduction.decide()?,
                "max_biclique_edges": max_biclique_edges(&g)?,
                "reduction": reduction,
            });
            let config = json!({"graph": graph, "k": k});
            write_json(out.as_deref(), &envelope("hardness reduce", config, result))
        }
    }
}

fn curriculum(cmd: CurriculumCommand) -> Result<()> {
    match cmd {
        CurriculumCommand::BuildE1 { out } => write_json(out.as_deref(), &build_e1()),
        CurriculumCommand::BuildE2 { out } => write_json(out.as_deref(), &build_e2()),
        CurriculumCommand::GenerateGroup {
            h,
            x,
            validate,
            budget,
            out,
        } => {
            let program = Program::parse(&h)?;
            let prim: Primitive = x.parse()?;
            let group = generate_group(&program, prim, &Library::new())?;
            let report = if validate {
                Some(validate_group(&group, SynthesisBudget::candidates(budget))?)
            } else {
                None
            };
            let config = json!({"h": h, "x": x, "budget": budget});
            let result = json!({"group": group, "report": report});
            write_json(out.as_deref(), &envelope("curriculum generate-group", config, result))
        }
        CurriculumCommand::Validate {
            curriculum,
            budget,
            out,
        } => {
            let c = load_curriculum(&curriculum)?;
            let report = validate_curriculum(&c, SynthesisBudget::candidates(budget))?;
            eprintln!("{}: {}", c.name, if report.passed { "PASS" } else { "FAIL" });
            let config = json!({"curriculum": curriculum, "budget": budget});
            write_json(out.as_deref(), &envelope("curriculum validate", config, report))
        }
    }
}

fn export_ui(a: ExportUiArgs) -> Result<()> {
    fs::create_dir_all(&a.out_dir)?;
    let bundle = UiBundle {
        dsl_version: pbt_core::curriculum::DSL_VERSION.to_string(),
        curricula: vec![build_e1(), build_e2()],
    };
    for c in &bundle.curricula {
        write_json(Some(&a.out_dir.join(format!("{}.json", c.name))), c)?;
    }
    let golden = golden_cases(a.golden_count, a.seed);
    write_json(Some(&a.out_dir.join("golden.json")), &golden)?;
    eprintln!(
        "wrote {} curricula and {} golden cases to {}",
        bundle.curricula.len(),
        golden.cases.len(),
        a.out_dir.display()
    );
    Ok(())
}
