use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use vecnbt::cluster::{kmeans, KmeansParams};
use vecnbt::embed::{train_sgns, SgnsParams, TrainMode};
use vecnbt::graph::{generate_sbm, Graph, LabelVector, SbmParams};
use vecnbt::io;
use vecnbt::metrics::{report, MetricsReport};
use vecnbt::par::Execution;
use vecnbt::pipeline::{run_pipeline, PipelineParams, StageTimings};
use vecnbt::plot::{emit_plot, PlotSpec};
use vecnbt::spectral::{
    build_edge_transition, build_vertex_transition, check_doubly_stochastic, mixing_rates,
    stationarity_residual, EdgeWalk, EigenOptions, MixingReport,
};
use vecnbt::sweep::{run_sweep, ArmConfig, ExperimentConfig};
use vecnbt::walks::{build_corpus, WalkParams, WalkPolicy};

#[derive(Parser)]
#[command(name = "vecnbt", version, about = "Graph clustering with random-walk node embeddings")]
struct Cli {
    /// Master seed; overrides any seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run every stage on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a stochastic block model graph with its planted labels.
    Generate(GenerateArgs),
    /// Write a random-walk corpus for a graph.
    Walk(WalkArgs),
    /// Train skip-gram node embeddings on a corpus.
    Embed(EmbedArgs),
    /// Cluster embedding rows with k-means.
    Cluster(ClusterArgs),
    /// Score predicted labels against ground truth.
    Score(ScoreArgs),
    /// Walks, embedding and clustering in one call.
    Pipeline(PipelineArgs),
    /// Run an experiment sweep into a results CSV.
    Sweep(SweepArgs),
    /// Transition-matrix checks and mixing rates of a graph.
    Spectral(SpectralArgs),
    /// Render a results CSV as an SVG chart.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arm {
    Bt,
    Nbt,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 0.9)]
    lambda: f64,
    /// Edge list output.
    #[arg(long)]
    graph: PathBuf,
    /// Planted label output.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct WalkArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "begrudging")]
    policy: WalkPolicy,
    /// Walks per node.
    #[arg(long, default_value_t = 20)]
    r: usize,
    /// Steps per walk.
    #[arg(long, default_value_t = 10)]
    l: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Default)]
struct SgnsFlags {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr_initial: Option<f64>,
    #[arg(long)]
    lr_final: Option<f64>,
    /// Lock-free parallel training; not bit-reproducible.
    #[arg(long)]
    hogwild: bool,
}

impl SgnsFlags {
    fn apply(&self, p: &mut SgnsParams) {
        set(&mut p.dim, self.dim);
        set(&mut p.window, self.window);
        set(&mut p.negatives, self.negatives);
        set(&mut p.epochs, self.epochs);
        set(&mut p.lr_initial, self.lr_initial);
        set(&mut p.lr_final, self.lr_final);
        if self.hogwild {
            p.mode = TrainMode::Hogwild;
        }
    }
}

#[derive(Args, Default)]
struct KmeansFlags {
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

impl KmeansFlags {
    fn apply(&self, p: &mut KmeansParams) {
        set(&mut p.restarts, self.restarts);
        set(&mut p.max_iters, self.max_iters);
        set(&mut p.tol, self.tol);
    }
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Node count; defaults to the graph's, or to the largest id + 1.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, conflicts_with = "nodes")]
    graph: Option<PathBuf>,
    #[command(flatten)]
    sgns: SgnsFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    kmeans: KmeansFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Graph used to find isolated nodes for `--mask-isolated`.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Leave degree-0 nodes out of the scores.
    #[arg(long, requires = "graph")]
    mask_isolated: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    k: usize,
    /// Ground-truth labels; enables scoring.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// TOML file with `arm`, `walk`, `embed`, `cluster` and `mask_isolated`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Walk settings preset: `bt` (simple, r=10, l=60, w=8) or `nbt`
    /// (begrudging, r=20, l=10, w=5).
    #[arg(long, value_enum)]
    arm: Option<Arm>,
    #[arg(long)]
    policy: Option<WalkPolicy>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[command(flatten)]
    sgns: SgnsFlags,
    #[command(flatten)]
    kmeans: KmeansFlags,
    #[arg(long)]
    mask_isolated: bool,
    /// Predicted labels output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Results CSV; existing rows are kept and skipped.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    /// Write 0 for wall time so reruns are byte-identical.
    #[arg(long)]
    no_wall_time: bool,
    #[arg(long)]
    mask_isolated: Option<bool>,
}

#[derive(Args)]
struct SpectralArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Fail unless the graph is regular.
    #[arg(long)]
    require_regular: bool,
    /// Analyse the largest connected component only.
    #[arg(long)]
    largest_component: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    /// Preset: fig1, fig2, fig3 or fig4.
    #[arg(long, conflicts_with = "x")]
    figure: Option<String>,
    /// Column for the x axis.
    #[arg(long, required_unless_present = "figure")]
    x: Option<String>,
    /// Column that splits the chart into panels.
    #[arg(long)]
    panel: Option<String>,
    #[arg(long)]
    log_x: bool,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn isolated_mask(g: &Graph) -> Vec<bool> {
    (0..g.n()).map(|u| !g.neighbors(u).is_empty()).collect()
}

#[derive(Serialize)]
struct ScoreOutput {
    ccr: f64,
    nmi: f64,
    nodes: usize,
    assignment: Vec<usize>,
}

impl From<&MetricsReport> for ScoreOutput {
    fn from(m: &MetricsReport) -> Self {
        ScoreOutput {
            ccr: m.ccr,
            nmi: m.nmi,
            nodes: m.confusion.iter().flatten().sum::<u64>() as usize,
            assignment: m.assignment.clone(),
        }
    }
}

fn format_score(s: &ScoreOutput, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(s)? + "\n",
        Format::Csv => format!("ccr,nmi,nodes\n{},{},{}\n", s.ccr, s.nmi, s.nodes),
    })
}

fn generate(args: GenerateArgs, seed: u64) -> Result<()> {
    let params = SbmParams {
        n: args.n,
        k: args.k,
        c: args.c,
        lambda: args.lambda,
        seed,
    };
    let (g, labels) = generate_sbm(&params)?;
    io::save_graph(&args.graph, &g)?;
    if let Some(path) = &args.labels {
        io::save_labels(path, &labels)?;
    }
    eprintln!("generated n={} m={}", g.n(), g.m());
    Ok(())
}

fn walk(args: WalkArgs, seed: u64, exec: Execution) -> Result<()> {
    let g = io::load_graph(&args.graph)?;
    let params = WalkParams {
        r: args.r,
        l: args.l,
        policy: args.policy,
        seed,
    };
    let corpus = build_corpus(&g, &params, exec)?;
    io::save_corpus(&args.out, &corpus)?;
    eprintln!("wrote {} sentences, {} tokens", corpus.len(), corpus.total_tokens());
    Ok(())
}

fn embed(args: EmbedArgs, seed: u64) -> Result<()> {
    let corpus = io::load_corpus(&args.corpus)?;
    let n = match (args.nodes, &args.graph) {
        (Some(n), _) => n,
        (None, Some(path)) => io::load_graph(path)?.n(),
        (None, None) => corpus.max_node().map_or(0, |m| m + 1),
    };
    let mut params = SgnsParams {
        seed,
        ..SgnsParams::default()
    };
    args.sgns.apply(&mut params);
    let emb = train_sgns(&corpus, n, &params)?;
    io::save_embeddings(&args.out, &emb)?;
    Ok(())
}

fn cluster(args: ClusterArgs, seed: u64, exec: Execution) -> Result<()> {
    let emb = io::load_embeddings(&args.embeddings)?;
    let mut params = KmeansParams {
        k: args.k,
        seed,
        exec,
        ..KmeansParams::default()
    };
    args.kmeans.apply(&mut params);
    let fit = kmeans(&emb, &params)?;
    io::save_labels(&args.out, &fit.labels)?;
    eprintln!("k-means sse={}", fit.sse);
    Ok(())
}

fn score(args: ScoreArgs) -> Result<()> {
    let mut truth = io::load_labels(&args.truth)?;
    let mut pred = io::load_labels(&args.pred)?;
    if args.mask_isolated {
        let g = io::load_graph(args.graph.as_deref().expect("clap enforces --graph"))?;
        if g.n() != truth.len() {
            bail!("graph has {} nodes but truth has {} labels", g.n(), truth.len());
        }
        let keep = isolated_mask(&g);
        truth = truth.select(&keep);
        if pred.len() == keep.len() {
            pred = pred.select(&keep);
        }
    }
    let m = report(&truth, &pred)?;
    write_output(None, &format_score(&ScoreOutput::from(&m), args.format)?)
}

/// Pipeline settings as read from a config file; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PipelineFile {
    arm: Option<String>,
    walk: WalkFile,
    embed: SgnsParams,
    cluster: KmeansParams,
    mask_isolated: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WalkFile {
    policy: Option<WalkPolicy>,
    r: Option<usize>,
    l: Option<usize>,
    w: Option<usize>,
}

#[derive(Serialize)]
struct PipelineReport {
    #[serde(flatten)]
    score: Option<ScoreOutput>,
    untrained: usize,
    timings: StageTimings,
}

fn pipeline(args: PipelineArgs, seed: Option<u64>, exec: Execution) -> Result<()> {
    let file: PipelineFile = match &args.config {
        Some(path) => read_toml(path)?,
        None => PipelineFile::default(),
    };
    let preset = match (args.arm, file.arm.as_deref()) {
        (Some(Arm::Bt), _) => ArmConfig::bt(),
        (Some(Arm::Nbt), _) | (None, None) => ArmConfig::nbt(),
        (None, Some(name)) => match name.to_ascii_lowercase().as_str() {
            "bt" => ArmConfig::bt(),
            "nbt" => ArmConfig::nbt(),
            other => bail!("unknown arm `{other}`; expected bt or nbt"),
        },
    };
    let mut walk = WalkParams {
        r: file.walk.r.unwrap_or(preset.r),
        l: file.walk.l.unwrap_or(preset.l[0]),
        policy: file.walk.policy.unwrap_or(preset.policy),
        seed: 0,
    };
    set(&mut walk.policy, args.policy);
    set(&mut walk.r, args.r);
    set(&mut walk.l, args.l);
    let mut embed = SgnsParams {
        window: file.walk.w.unwrap_or(preset.w),
        ..file.embed
    };
    args.sgns.apply(&mut embed);
    let mut cluster = file.cluster;
    args.kmeans.apply(&mut cluster);
    if let Some(s) = seed {
        walk.seed = s;
        embed.seed = s;
        cluster.seed = s;
    }
    let params = PipelineParams {
        walk,
        embed,
        cluster,
        mask_isolated: args.mask_isolated || file.mask_isolated,
        exec,
    };

    let g = io::load_graph(&args.graph)?;
    let truth: Option<LabelVector> = args.truth.as_deref().map(io::load_labels).transpose()?;
    let out = run_pipeline(&g, args.k, &params, truth.as_ref())?;
    if let Some(path) = &args.out {
        io::save_labels(path, &out.labels)?;
    }
    let report = PipelineReport {
        score: out.metrics.as_ref().map(ScoreOutput::from),
        untrained: out.untrained,
        timings: out.timings,
    };
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => {
            let t = &report.timings;
            let (ccr, nmi) = report
                .score
                .as_ref()
                .map_or((String::new(), String::new()), |s| (s.ccr.to_string(), s.nmi.to_string()));
            format!(
                "ccr,nmi,untrained,walks_seconds,embed_seconds,cluster_seconds\n{ccr},{nmi},{},{},{},{}\n",
                report.untrained, t.walks, t.embed, t.cluster
            )
        }
    };
    write_output(None, &text)
}

fn sweep(args: SweepArgs, seed: Option<u64>, sequential: bool) -> Result<()> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(path) => read_toml(path)?,
        None => ExperimentConfig::default(),
    };
    set(&mut cfg.seed, seed);
    set(&mut cfg.trials, args.trials);
    set(&mut cfg.mask_isolated, args.mask_isolated);
    if args.no_wall_time {
        cfg.record_wall_time = false;
    }
    if sequential {
        cfg.execution = Execution::Sequential;
    }
    let summary = run_sweep(&cfg, &args.out)?;
    eprintln!(
        "sweep: {} rows written, {} already present",
        summary.written, summary.skipped
    );
    Ok(())
}

#[derive(Serialize)]
struct SpectralReport {
    n: usize,
    m: usize,
    min_degree: usize,
    max_degree: usize,
    /// Largest `|row sum - 1|` of P over positive-degree rows.
    vertex_row_deviation: f64,
    /// Largest row or column deviation of the begrudging edge chain.
    begrudging_deviation: Option<f64>,
    begrudging_doubly_stochastic: Option<bool>,
    /// Whether the non-backtracking and begrudging chains coincide.
    nbt_equals_begrudging: Option<bool>,
    vertex_stationarity_residual: f64,
    edge_stationarity_residual: Option<f64>,
    #[serde(flatten)]
    mixing: MixingReport,
}

fn spectral(args: SpectralArgs, seed: u64, exec: Execution) -> Result<()> {
    let mut g = io::load_graph(&args.graph)?;
    if args.largest_component {
        g = g.largest_component().0;
    }
    let vertex = build_vertex_transition(&g);
    let row_dev = vertex
        .matrix
        .row_sums()
        .iter()
        .enumerate()
        .filter(|(u, _)| g.neighbors(*u).len() > 0)
        .map(|(_, s)| (s - 1.0).abs())
        .fold(0.0, f64::max);
    let vol = g.volume() as f64;
    let pi: Vec<f64> = (0..g.n()).map(|u| g.neighbors(u).len() as f64 / vol).collect();

    let begrudging = build_edge_transition(&g, EdgeWalk::Begrudging).ok();
    let check = begrudging.as_ref().map(|b| check_doubly_stochastic(&b.matrix));
    let nbt_equal = match (&begrudging, build_edge_transition(&g, EdgeWalk::NonBacktracking)) {
        (Some(b), Ok(nbt)) => Some(b.matrix == nbt.matrix),
        _ => None,
    };
    let edge_residual = begrudging.as_ref().map(|b| {
        let uniform = vec![1.0 / b.matrix.rows() as f64; b.matrix.rows()];
        stationarity_residual(&b.matrix, &uniform)
    });

    let opts = EigenOptions {
        seed,
        exec,
        ..EigenOptions::default()
    };
    let mixing = mixing_rates(&g, args.require_regular, &opts)?;
    let report = SpectralReport {
        n: g.n(),
        m: g.m(),
        min_degree: g.min_degree(),
        max_degree: g.max_degree(),
        vertex_row_deviation: row_dev,
        begrudging_deviation: check.map(|c| c.max_deviation),
        begrudging_doubly_stochastic: check.map(|c| c.doubly_stochastic),
        nbt_equals_begrudging: nbt_equal,
        vertex_stationarity_residual: stationarity_residual(&vertex.matrix, &pi),
        edge_stationarity_residual: edge_residual,
        mixing,
    };
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => {
            let value = serde_json::to_value(&report)?;
            let obj = value.as_object().expect("struct serializes to an object");
            let cell = |v: &serde_json::Value| match v {
                serde_json::Value::Null => String::new(),
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            let header: Vec<&str> = obj.keys().map(String::as_str).collect();
            let row: Vec<String> = obj.values().map(cell).collect();
            format!("{}\n{}\n", header.join(","), row.join(","))
        }
    };
    write_output(args.out.as_deref(), &text)
}

fn plot(args: PlotArgs) -> Result<()> {
    let mut spec = match (&args.figure, &args.x) {
        (Some(name), _) => PlotSpec::preset(name)
            .with_context(|| format!("unknown figure `{name}`; expected fig1, fig2, fig3 or fig4"))?,
        (None, Some(x)) => PlotSpec {
            title: String::new(),
            x: x.clone(),
            panel: None,
            x_log: false,
        },
        (None, None) => bail!("either --figure or --x is required"),
    };
    if args.panel.is_some() {
        spec.panel = args.panel;
    }
    spec.x_log |= args.log_x;
    set(&mut spec.title, args.title);
    emit_plot(&args.csv, &spec, &args.out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Generate(a) => generate(a, seed),
        Command::Walk(a) => walk(a, seed, exec),
        Command::Embed(a) => embed(a, seed),
        Command::Cluster(a) => cluster(a, seed, exec),
        Command::Score(a) => score(a),
        Command::Pipeline(a) => pipeline(a, cli.seed, exec),
        Command::Sweep(a) => sweep(a, cli.seed, cli.sequential),
        Command::Spectral(a) => spectral(a, seed, exec),
        Command::Plot(a) => plot(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
