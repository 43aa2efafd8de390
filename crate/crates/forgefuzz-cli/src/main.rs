//! forgefuzz: workload synthesis and fuzz testing for Git forges.
//!
//! Pipeline commands: `ingest` an archive stream, inspect with `summary`,
//! embed users with `features`, diversify with `evolve`, build size-matched
//! `baseline` datasets, `replay` against a forge backend, and `analyze`
//! feature-versus-load correlations. Every command writes a manifest
//! (inputs, flags, seeds, digests) beside its primary output.
//!
//! Exit codes: 2 usage, 3 unreadable input, 4 invalid data or violated
//! invariant.

mod http_forge;
mod manifest;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use forgefuzz::analysis;
use forgefuzz::baselines;
use forgefuzz::dataset::{self, EdgeList};
use forgefuzz::discrepancy::DiscrepancyConfig;
use forgefuzz::evolve::{self, EaConfig};
use forgefuzz::features::{feature_points_with, write_feature_csv, PageRankConfig};
use forgefuzz::followgraph::{assemble_graph, attach_follow_events, FollowSet, InteractionGraph};
use forgefuzz::replay::{replay, CommitCorpus, ReplayOrder};
use forgefuzz::simforge::{write_request_log, CostModel, SimForge};

use manifest::Manifest;

#[derive(Parser)]
#[command(name = "forgefuzz", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a GitHub-Archive-style JSON-lines stream into an edge-list CSV.
    Ingest(IngestArgs),
    /// Event counts (and discrepancy) for one or more edge lists.
    Summary(SummaryArgs),
    /// Per-user features: centrality, PageRank, event code, scaled cube.
    Features(FeaturesArgs),
    /// Diversify a dataset with the (1+λ) evolutionary search.
    Evolve(EvolveArgs),
    /// Build a size-matched comparison dataset (simple or random).
    Baseline(BaselineArgs),
    /// Replay a dataset through a forge backend and collect metrics.
    Replay(ReplayArgs),
    /// Correlate user features with per-user load from a replay.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// JSON-lines input file.
    input: PathBuf,
    /// Edge-list CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummaryArgs {
    /// Edge-list CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Accept stored follow rows in the inputs.
    #[arg(long)]
    with_follows: bool,
    /// Grid divisions for the discrepancy column.
    #[arg(long, default_value_t = 16)]
    grid: u32,
    /// Write the comparison table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Edge-list CSV.
    input: PathBuf,
    /// Feature CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Accept stored follow rows (and use them instead of deriving).
    #[arg(long)]
    with_follows: bool,
    #[arg(long, default_value_t = 0.85)]
    damping: f64,
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
}

#[derive(Args)]
struct EvolveArgs {
    /// Seed edge-list CSV (base events only).
    input: PathBuf,
    /// Evolved edge-list CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-generation log CSV to write.
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value_t = 1000)]
    generations: usize,
    #[arg(long, default_value_t = 20)]
    lambda: usize,
    #[arg(long, default_value_t = 2.0)]
    rate_increase: f64,
    #[arg(long, default_value_t = 0.5)]
    rate_decrease: f64,
    /// Initial per-edge mutation rate (default: 1/n).
    #[arg(long)]
    initial_rate: Option<f64>,
    /// Lower rate clamp (default: 1/(10n)).
    #[arg(long)]
    rate_min: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    rate_max: f64,
    #[arg(long, default_value_t = 1)]
    min_mutations: usize,
    /// Accept only strictly better offspring.
    #[arg(long)]
    strict_improvement: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    grid: u32,
    /// Evaluate discrepancy with point-coordinate corners as well.
    #[arg(long)]
    include_point_coordinates: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaselineMode {
    Simple,
    Random,
}

#[derive(Args)]
struct BaselineArgs {
    /// Original edge-list CSV (base events only).
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: BaselineMode,
    #[arg(long)]
    target_nonfollow: usize,
    #[arg(long)]
    target_follow: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; includes the adjusted follow rows.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Sim,
    Http,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Order {
    Listed,
    Shuffle,
}

#[derive(Args)]
struct ReplayArgs {
    /// Edge-list CSV; follow rows are used when present (with
    /// --with-follows), otherwise follows are derived.
    input: PathBuf,
    #[arg(long)]
    with_follows: bool,
    #[arg(long, value_enum, default_value_t = Backend::Sim)]
    backend: Backend,
    /// Base URL of the forge service (http backend).
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long, value_enum, default_value_t = Order::Listed)]
    order: Order,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Followee limit of the simulated forge; "unlimited" lifts it.
    #[arg(long, default_value = "300")]
    follow_limit: String,
    /// Commit-text corpus file (default: the bundled corpus).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Cost-model parameter file for the simulated forge.
    #[arg(long)]
    cost_params: Option<PathBuf>,
    /// Replay report JSON to write.
    #[arg(long)]
    report: PathBuf,
    /// Request-log CSV to write (sim backend).
    #[arg(long)]
    request_log: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Feature CSV produced by `features`.
    #[arg(long)]
    features: PathBuf,
    /// Request-log CSV produced by `replay`.
    #[arg(long)]
    request_log: PathBuf,
    /// Correlation table CSV to write.
    #[arg(long)]
    out_correlations: PathBuf,
    /// Per-user scatter data CSV to write.
    #[arg(long)]
    out_plot_data: PathBuf,
    /// Use a seeded permutation test with this many permutations for the
    /// p-values instead of the t-approximation.
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => run_ingest(args),
        Command::Summary(args) => run_summary(args),
        Command::Features(args) => run_features(args),
        Command::Evolve(args) => run_evolve(args),
        Command::Baseline(args) => run_baseline(args),
        Command::Replay(args) => run_replay(args),
        Command::Analyze(args) => run_analyze(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &forgefuzz::Error) -> u8 {
    match e {
        forgefuzz::Error::Io(_) => 3,
        _ => 4,
    }
}

fn open_input(path: &Path) -> forgefuzz::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn load_edges(path: &Path, with_follows: bool) -> forgefuzz::Result<EdgeList> {
    dataset::read_edge_list(open_input(path)?, with_follows)
}

/// Splits stored follow rows off when present, derives follows otherwise.
fn edges_and_follows(path: &Path, with_follows: bool) -> forgefuzz::Result<(EdgeList, FollowSet)> {
    let e = load_edges(path, with_follows)?;
    if e.follow_event_count() > 0 {
        e.split_follows()
    } else {
        let follows = assemble_graph(&e).follows;
        Ok((e, follows))
    }
}

fn run_ingest(args: IngestArgs) -> forgefuzz::Result<()> {
    let parsed = dataset::parse_gharchive_lines(open_input(&args.input)?)?;
    let mut out = File::create(&args.out)?;
    dataset::write_edge_list(&parsed.edges, &mut out)?;
    out.flush()?;

    let c = dataset::summarize(&parsed.edges);
    println!(
        "ingested {} events ({} push, {} watch, {} pull_request, {} fork) \
         from {} users on {} repos",
        c.total, c.push, c.watch, c.pull_request, c.fork, c.users, c.repos
    );
    println!(
        "skipped lines: {} malformed, {} missing fields, {} filtered",
        parsed.skipped.malformed, parsed.skipped.missing_fields, parsed.skipped.filtered
    );

    let mut m = Manifest::new("ingest");
    m.input(&args.input)?;
    m.output(&args.out);
    m.write_beside(&args.out)?;
    Ok(())
}

fn run_summary(args: SummaryArgs) -> forgefuzz::Result<()> {
    let cfg = DiscrepancyConfig {
        grid_divisions: args.grid,
        include_point_coordinates: false,
    };
    let mut sets = Vec::new();
    for path in &args.inputs {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let (edges, follows) = edges_and_follows(path, args.with_follows)?;
        sets.push((name, edges, Some(follows)));
    }
    let rows = analysis::dataset_summary(&sets, &cfg)?;

    println!(
        "{:<18} {:>8} {:>8} {:>12} {:>8} {:>10} {:>10} {:>7} {:>6} {:>12}",
        "dataset",
        "push",
        "watch",
        "pull_request",
        "fork",
        "follow",
        "total",
        "users",
        "repos",
        format!("D*(G={})", args.grid)
    );
    for r in &rows {
        println!(
            "{:<18} {:>8} {:>8} {:>12} {:>8} {:>10} {:>10} {:>7} {:>6} {:>12.4}",
            r.name,
            r.counts.push,
            r.counts.watch,
            r.counts.pull_request,
            r.counts.fork,
            r.follow_arcs,
            r.counts.total,
            r.counts.users,
            r.counts.repos,
            r.discrepancy
        );
    }

    if let Some(out) = &args.out {
        let file = File::create(out)?;
        analysis::write_summary_csv(&rows, file)?;
        let mut m = Manifest::new("summary");
        for path in &args.inputs {
            m.input(path)?;
        }
        m.arg("grid", args.grid)
            .arg("with_follows", args.with_follows);
        m.output(out);
        m.write_beside(out)?;
    }
    Ok(())
}

fn run_features(args: FeaturesArgs) -> forgefuzz::Result<()> {
    let (edges, follows) = edges_and_follows(&args.input, args.with_follows)?;
    let graph = InteractionGraph::with_follows(&edges, follows)?;
    let cfg = PageRankConfig {
        damping: args.damping,
        tolerance: args.tolerance,
        max_iterations: args.max_iterations,
    };
    let feats = feature_points_with(&graph, &cfg)?;
    if !feats.pagerank_converged {
        eprintln!("warning: pagerank did not converge within the iteration budget");
    }
    let file = File::create(&args.out)?;
    write_feature_csv(&edges, &feats, file)?;
    println!(
        "wrote features for {} users to {}",
        feats.len(),
        args.out.display()
    );

    let mut m = Manifest::new("features");
    m.input(&args.input)?;
    m.arg("damping", args.damping)
        .arg("tolerance", args.tolerance)
        .arg("max_iterations", args.max_iterations)
        .arg("with_follows", args.with_follows);
    m.output(&args.out);
    m.write_beside(&args.out)?;
    Ok(())
}

fn run_evolve(args: EvolveArgs) -> forgefuzz::Result<()> {
    let seed_list = load_edges(&args.input, false)?;
    let cfg = EaConfig {
        lambda: args.lambda,
        generations: args.generations,
        rate_increase: args.rate_increase,
        rate_decrease: args.rate_decrease,
        initial_rate: args.initial_rate,
        rate_min: args.rate_min,
        rate_max: args.rate_max,
        min_mutations: args.min_mutations,
        strict_improvement: args.strict_improvement,
        rng_seed: args.seed,
        discrepancy: DiscrepancyConfig {
            grid_divisions: args.grid,
            include_point_coordinates: args.include_point_coordinates,
        },
    };
    let (best, log) = evolve::run_ea(&seed_list, &cfg)?;

    let mut out = File::create(&args.out)?;
    dataset::write_edge_list(&best, &mut out)?;
    let log_file = File::create(&args.log)?;
    evolve::write_evolution_log(&log, log_file)?;
    println!(
        "evolved {} generations: discrepancy {:.4} -> {:.4}, {} events",
        args.generations,
        log.initial_score,
        log.final_score(),
        best.events().len()
    );

    let mut m = Manifest::new("evolve");
    m.input(&args.input)?;
    m.seed = Some(args.seed);
    m.arg("generations", args.generations)
        .arg("lambda", args.lambda)
        .arg("rate_increase", args.rate_increase)
        .arg("rate_decrease", args.rate_decrease)
        .arg("rate_max", args.rate_max)
        .arg("min_mutations", args.min_mutations)
        .arg("strict_improvement", args.strict_improvement)
        .arg("grid", args.grid)
        .arg("include_point_coordinates", args.include_point_coordinates);
    if let Some(r) = args.initial_rate {
        m.arg("initial_rate", r);
    }
    if let Some(r) = args.rate_min {
        m.arg("rate_min", r);
    }
    m.output(&args.out).output(&args.log);
    m.write_beside(&args.out)?;
    Ok(())
}

fn run_baseline(args: BaselineArgs) -> forgefuzz::Result<()> {
    use rand::SeedableRng;
    let original = load_edges(&args.input, false)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let baseline = match args.mode {
        BaselineMode::Simple => baselines::gen_simple(
            &original,
            args.target_nonfollow,
            args.target_follow,
            &mut rng,
        )?,
        BaselineMode::Random => baselines::gen_random(
            &original,
            args.target_nonfollow,
            args.target_follow,
            &mut rng,
        )?,
    };
    let combined = attach_follow_events(&baseline.edges, &baseline.follows);
    let mut out = File::create(&args.out)?;
    dataset::write_edge_list(&combined, &mut out)?;
    println!(
        "baseline written: {} base events + {} follow arcs",
        baseline.edges.events().len(),
        baseline.follows.arc_count()
    );

    let mut m = Manifest::new("baseline");
    m.input(&args.input)?;
    m.seed = Some(args.seed);
    m.arg(
        "mode",
        match args.mode {
            BaselineMode::Simple => "simple",
            BaselineMode::Random => "random",
        },
    )
    .arg("target_nonfollow", args.target_nonfollow)
    .arg("target_follow", args.target_follow);
    m.output(&args.out);
    m.write_beside(&args.out)?;
    Ok(())
}

fn run_replay(args: ReplayArgs) -> forgefuzz::Result<()> {
    let (edges, follows) = edges_and_follows(&args.input, args.with_follows)?;
    let corpus = match &args.corpus {
        Some(path) => CommitCorpus::from_reader(open_input(path)?)?,
        None => CommitCorpus::builtin(),
    };
    let order = match args.order {
        Order::Listed => ReplayOrder::Listed,
        Order::Shuffle => ReplayOrder::Shuffled,
    };
    let follow_limit: Option<u32> = match args.follow_limit.as_str() {
        "unlimited" | "none" => None,
        s => Some(s.parse().map_err(|_| {
            forgefuzz::Error::Config(format!(
                "bad --follow-limit {s:?} (number or \"unlimited\")"
            ))
        })?),
    };

    let report = match args.backend {
        Backend::Sim => {
            let cost = match &args.cost_params {
                Some(path) => CostModel::from_params(open_input(path)?)?,
                None => CostModel::default(),
            };
            let mut forge = SimForge::new()
                .with_follow_limit(follow_limit)
                .with_cost_model(cost);
            let report = replay(&edges, &follows, &mut forge, &corpus, order, args.seed)?;
            if let Some(path) = &args.request_log {
                let file = File::create(path)?;
                write_request_log(forge.request_log(), file)?;
            }
            report
        }
        Backend::Http => {
            let base = args.base_url.as_deref().ok_or_else(|| {
                forgefuzz::Error::Config("--backend http requires --base-url".into())
            })?;
            if args.request_log.is_some() {
                return Err(forgefuzz::Error::Config(
                    "--request-log is only available with the sim backend; \
                     the remote service owns its log"
                        .into(),
                ));
            }
            let mut forge = http_forge::HttpForge::new(base);
            replay(&edges, &follows, &mut forge, &corpus, order, args.seed)?
        }
    };

    let mut file = File::create(&args.report)?;
    serde_json::to_writer_pretty(&mut file, &report).map_err(std::io::Error::from)?;
    file.write_all(b"\n")?;
    println!(
        "replayed {} events: {} applied, {} skipped ({:.2} s)",
        report.total, report.applied, report.skipped, report.wall_clock_secs
    );
    for (code, count) in &report.error_tally {
        println!("  {code}: {count}");
    }

    let mut m = Manifest::new("replay");
    m.input(&args.input)?;
    if let Some(c) = &args.corpus {
        m.input(c)?;
    }
    if let Some(c) = &args.cost_params {
        m.input(c)?;
    }
    m.seed = Some(args.seed);
    m.arg(
        "backend",
        match args.backend {
            Backend::Sim => "sim",
            Backend::Http => "http",
        },
    )
    .arg(
        "order",
        match args.order {
            Order::Listed => "listed",
            Order::Shuffle => "shuffle",
        },
    )
    .arg("follow_limit", &args.follow_limit)
    .arg("with_follows", args.with_follows);
    if let Some(url) = &args.base_url {
        m.arg("base_url", url);
    }
    m.output(&args.report);
    if let Some(path) = &args.request_log {
        m.output(path);
    }
    m.write_beside(&args.report)?;
    Ok(())
}

fn run_analyze(args: AnalyzeArgs) -> forgefuzz::Result<()> {
    use std::collections::BTreeMap;

    let (users, points) = forgefuzz::features::read_feature_csv(open_input(&args.features)?)?;
    let log = forgefuzz::simforge::read_request_log(open_input(&args.request_log)?)?;
    let mut metrics: BTreeMap<String, forgefuzz::replay::UserCost> = BTreeMap::new();
    for (user, cost, _outcome) in &log {
        metrics
            .entry(user.clone())
            .or_default()
            .add(cost.cpu, cost.mem, cost.latency);
    }

    let mut report = analysis::correlation_report(&users, &points, &metrics)?;
    if let Some(n) = args.permutations {
        // replace the t-approximation p-values with permutation ones
        let feature_cols: [Vec<f64>; 3] = [
            points.degree.clone(),
            points.pagerank.clone(),
            points.event_code.iter().map(|&c| c as f64).collect(),
        ];
        let metric_cols: [Vec<f64>; 3] = [
            users.iter().map(|u| metrics[u].cpu).collect(),
            users.iter().map(|u| metrics[u].mem).collect(),
            users
                .iter()
                .map(|u| {
                    let c = metrics[u];
                    if c.requests == 0 {
                        0.0
                    } else {
                        c.latency / c.requests as f64
                    }
                })
                .collect(),
        ];
        for cell in report.cells.iter_mut() {
            if cell.rho.is_none() {
                continue;
            }
            let fi = analysis::FEATURE_NAMES
                .iter()
                .position(|f| *f == cell.feature)
                .unwrap();
            let mi = analysis::METRIC_NAMES
                .iter()
                .position(|m| *m == cell.metric)
                .unwrap();
            cell.p_value = Some(analysis::spearman_permutation_p(
                &feature_cols[fi],
                &metric_cols[mi],
                n,
                args.seed,
            )?);
        }
    }

    let file = File::create(&args.out_correlations)?;
    analysis::write_correlation_csv(&report, file)?;
    let file = File::create(&args.out_plot_data)?;
    analysis::write_plot_data(&users, &points, &metrics, file)?;

    println!(
        "{:<12} {:>10} {:>10} {:>10}",
        "rho", "cpu", "mem", "latency"
    );
    for feature in analysis::FEATURE_NAMES {
        let row: Vec<String> = analysis::METRIC_NAMES
            .iter()
            .map(|metric| {
                report
                    .cells
                    .iter()
                    .find(|c| c.feature == feature && c.metric == *metric)
                    .and_then(|c| c.rho)
                    .map(|r| format!("{r:+.3}"))
                    .unwrap_or_else(|| "undef".into())
            })
            .collect();
        println!(
            "{:<12} {:>10} {:>10} {:>10}",
            feature, row[0], row[1], row[2]
        );
    }

    let mut m = Manifest::new("analyze");
    m.input(&args.features)?;
    m.input(&args.request_log)?;
    m.seed = Some(args.seed);
    if let Some(n) = args.permutations {
        m.arg("permutations", n);
    }
    m.output(&args.out_correlations).output(&args.out_plot_data);
    m.write_beside(&args.out_correlations)?;
    Ok(())
}
