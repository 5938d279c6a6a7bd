mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pbt_core::models::ModelKind;
use pbt_core::TraceMode;

#[derive(Parser, Debug)]
#[command(name = "pbt", version, about = "Pattern Builder workbench")]
struct Cli {
    /// Worker threads for independent units (participants, pairs, graphs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a model over a curriculum.
    Run(RunArgs),
    /// Solve a single target.
    Synth(SynthArgs),
    /// Replay session logs and compute the metrics table.
    Analyze(AnalyzeArgs),
    /// Symmetry-filtered random walk over programs.
    Explore(ExploreArgs),
    /// Best-Single-Helper checkers.
    #[command(subcommand)]
    Hardness(HardnessCommand),
    /// Build, generate and validate curricula.
    #[command(subcommand)]
    Curriculum(CurriculumCommand),
    /// Write curricula and golden operator cases for the task app.
    ExportUi(ExportUiArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TraceArg {
    SolutionSubtrees,
    AllRetained,
}

impl From<TraceArg> for TraceMode {
    fn from(t: TraceArg) -> Self {
        match t {
            TraceArg::SolutionSubtrees => TraceMode::SolutionSubtrees,
            TraceArg::AllRetained => TraceMode::AllRetained,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct BudgetArgs {
    /// Candidates the search may generate per target.
    #[arg(long, default_value_t = pbt_core::synth::DEFAULT_MAX_CANDIDATES)]
    budget: u64,
    /// Largest program size searched.
    #[arg(long)]
    max_size: Option<usize>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct RunArgs {
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    /// Curriculum JSON file, or `e1` / `e2` for the built-in ones.
    #[arg(long)]
    curriculum: String,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Promotion probability for `pl`.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "solution-subtrees")]
    trace_mode: TraceArg,
    /// Canned completions (JSON list of strings) for the llm models.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SynthArgs {
    /// Target as a 100-character row-major key.
    #[arg(long, conflicts_with = "target_json")]
    target: Option<String>,
    /// Target as a JSON file holding ten rows of ten 0/1 values.
    #[arg(long)]
    target_json: Option<PathBuf>,
    /// Library JSON, or a run record whose library is used.
    #[arg(long)]
    library: Option<PathBuf>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, value_enum, default_value = "solution-subtrees")]
    trace_mode: TraceArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct AnalyzeArgs {
    #[arg(long)]
    curriculum: String,
    /// Session log files or directories of them.
    #[arg(long, num_args = 1..)]
    logs: Vec<PathBuf>,
    /// Generate this many synthetic participants instead of reading logs.
    #[arg(long, conflicts_with = "logs")]
    synthetic: Option<usize>,
    /// Write the synthetic logs here.
    #[arg(long, requires = "synthetic")]
    write_logs: Option<PathBuf>,
    #[arg(long)]
    rc_run: Option<PathBuf>,
    #[arg(long)]
    llm_run: Option<PathBuf>,
    /// Number of top helpers, or `auto` for the mean library size.
    #[arg(long, default_value = "auto")]
    k: String,
    #[arg(long)]
    seed: u64,
    /// Metrics CSV; the JSON sidecar goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct ExploreArgs {
    #[arg(long, default_value_t = 100_000)]
    steps: u64,
    #[arg(long, default_value_t = 256)]
    pool_size: usize,
    #[arg(long)]
    seed: u64,
    /// Axes a discovery must be symmetric on (any one suffices).
    #[arg(long, value_enum, num_args = 1.., default_values = ["horizontal", "vertical", "main-diagonal", "anti-diagonal"])]
    axes: Vec<AxisArg>,
    /// Discovery log, one JSON object per line.
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    summary: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AxisArg {
    Horizontal,
    Vertical,
    MainDiagonal,
    AntiDiagonal,
}

#[derive(Subcommand, Debug)]
enum HardnessCommand {
    /// The three-tuple worked example.
    Demo {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the reduction with a direct biclique search on random graphs.
    #[command(args_override_self = true)]
    Random {
        #[arg(long, default_value_t = 200)]
        graphs: usize,
        #[arg(long, default_value_t = 7)]
        max_side: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the flat corpus for a bipartite graph and decide it.
    #[command(args_override_self = true)]
    Reduce {
        /// JSON {left, right, edges: [[u, v], ...]} with 0-based vertices.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum CurriculumCommand {
    BuildE1 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    BuildE2 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The four-slot group for a helper and a primitive.
    #[command(args_override_self = true)]
    GenerateGroup {
        /// Helper program, e.g. `add(diagonal, reflect_vertical(diagonal))`.
        #[arg(long)]
        h: String,
        #[arg(long)]
        x: String,
        /// Also run the pairwise checks.
        #[arg(long)]
        validate: bool,
        #[arg(long, default_value_t = 200_000)]
        budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check annotations and group constraints.
    #[command(args_override_self = true)]
    Validate {
        #[arg(long)]
        curriculum: String,
        #[arg(long, default_value_t = 200_000)]
        budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct ExportUiArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1_000)]
    golden_count: usize,
    #[arg(long)]
    seed: u64,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: pbt_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let argv = match config::expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
