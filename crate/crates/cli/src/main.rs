use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use repsc::kmeans::KMeansConfig;
use repsc::random::derive_seed;
use repsc::rsbm::{self, ProtectedGroupParams, RsbmParams};
use repsc::{ClusterAssignment, Error, Graph, Result};
use repsc_cli::experiment::{self, RunSettings};
use repsc_cli::{verify, Algorithm, ExperimentConfig};

/// Representation-aware spectral clustering.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a representation graph, a similarity graph and planted labels.
    Generate(GenerateArgs),
    /// Run one algorithm on edge-list files and print its metrics.
    Cluster(ClusterArgs),
    /// Run a sweep from a TOML config and write CSV tables.
    Experiment(ExperimentArgs),
    /// Run the built-in oracle and property checks.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum RepresentationKind {
    /// Every node has d/K representatives in each planted cluster.
    DRegular,
    /// Two-level SBM over interleaved protected groups.
    Groups,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "d-regular")]
    representation: RepresentationKind,
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    clusters: usize,
    /// Degree of the d-regular representation graph.
    #[arg(long, default_value_t = 40)]
    degree: usize,
    #[arg(long, default_value_t = 5)]
    groups: usize,
    #[arg(long, default_value_t = 0.8)]
    p_in: f64,
    #[arg(long, default_value_t = 0.2)]
    p_out: f64,
    #[arg(long, default_value_t = 0.4)]
    p: f64,
    #[arg(long, default_value_t = 0.3)]
    q: f64,
    #[arg(long, default_value_t = 0.2)]
    r: f64,
    #[arg(long, default_value_t = 0.1)]
    s: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving representation.edges, similarity.edges and truth.labels.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(clap::Args)]
struct ClusterArgs {
    /// Similarity graph edge list (1-based ids).
    #[arg(long)]
    similarity: PathBuf,
    /// Representation graph edge list; required by every algorithm except usc and nsc.
    #[arg(long)]
    representation: Option<PathBuf>,
    #[arg(long, value_parser = parse_algorithm)]
    algorithm: Algorithm,
    #[arg(long)]
    clusters: usize,
    /// Rank for the approximate variants (default N/10).
    #[arg(long)]
    rank: Option<usize>,
    /// Protected groups for the fair-SC baselines (default N/10).
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Planted labels, one 1-based label per line.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Where to write the predicted labels.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the per-trial CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated algorithm list overriding the config.
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    algorithms: Option<Vec<Algorithm>>,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    Algorithm::parse(s).map_err(|e| e.to_string())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::config(format!("cannot create {}: {e}", path.display())))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let truth = ClusterAssignment::ground_truth(args.nodes, args.clusters)?;
    let representation = match args.representation {
        RepresentationKind::DRegular => {
            rsbm::make_d_regular_representation(args.nodes, args.clusters, args.degree, &truth)?
        }
        RepresentationKind::Groups => {
            let groups = ClusterAssignment::interleaved(args.nodes, args.groups)?;
            let params = ProtectedGroupParams::new(args.groups, args.p_in, args.p_out)?;
            rsbm::sample_group_representation(
                args.nodes,
                &groups,
                &params,
                derive_seed(args.seed, 0),
            )?
        }
    };
    let params = RsbmParams::new(args.p, args.q, args.r, args.s)?;
    let similarity =
        rsbm::sample_rsbm(&representation, &truth, &params, derive_seed(args.seed, 1))?;

    std::fs::create_dir_all(&args.out_dir)?;
    representation.write_edge_list(create(&args.out_dir.join("representation.edges"))?)?;
    similarity.write_edge_list(create(&args.out_dir.join("similarity.edges"))?)?;
    truth.write_labels(create(&args.out_dir.join("truth.labels"))?)?;
    println!(
        "wrote {} nodes, {} similarity edges, {} representation edges to {}",
        args.nodes,
        similarity.n_edges(),
        representation.n_edges(),
        args.out_dir.display()
    );
    Ok(())
}

fn cluster(args: ClusterArgs) -> Result<()> {
    let similarity = Graph::read_edge_list(open(&args.similarity)?, None, false)?;
    let n = similarity.n_nodes();
    let representation = match &args.representation {
        Some(path) => Graph::read_edge_list(open(path)?, Some(n), true)?.with_self_loops(),
        None if args.algorithm.needs_representation() => {
            return Err(Error::config(format!(
                "--representation is required for {}",
                args.algorithm
            )))
        }
        None => Graph::empty(n, true).with_self_loops(),
    };
    let truth = match &args.truth {
        Some(path) => Some(ClusterAssignment::read_labels(
            open(path)?,
            Some(args.clusters),
        )?),
        None => None,
    };
    let default = (n / 10).max(1);
    let settings = RunSettings {
        n_clusters: args.clusters,
        approx_rank: args.rank.unwrap_or(default),
        fair_groups: args.groups.unwrap_or(default),
    };
    let kmeans = KMeansConfig::new(args.clusters, args.seed);
    let output = experiment::run_algorithm(
        args.algorithm,
        &similarity,
        &representation,
        settings,
        &kmeans,
    )?;
    let metrics = experiment::evaluate(&output, &similarity, &representation, truth.as_ref());

    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "algorithm: {}", args.algorithm)?;
    writeln!(
        stdout,
        "cluster_sizes: {:?}",
        output.assignment.cluster_sizes()
    )?;
    for (name, value) in experiment::METRICS.iter().zip(metrics.values()) {
        if let Some(v) = value {
            writeln!(stdout, "{name}: {v}")?;
        }
    }
    if let Some(path) = &args.labels_out {
        output.assignment.write_labels(create(path)?)?;
    }
    Ok(())
}

fn run_experiment(args: ExperimentArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Some(out) = args.out {
        config.output = out;
    }
    if let Some(algs) = args.algorithms {
        config.algorithms = algs;
    }
    let results = repsc_cli::run_experiment(&config)?;
    repsc_cli::write_results(&config, &results)?;
    let failed = results.rows.iter().filter(|r| r.status != "ok").count();
    println!(
        "{} rows ({failed} failed) -> {}",
        results.rows.len(),
        config.output.display()
    );
    println!("summary -> {}", config.summary_path().display());
    Ok(())
}

fn run_verify() -> Result<bool> {
    let checks = verify::run_checks()?;
    let mut all = true;
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        all &= c.passed;
    }
    Ok(all)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // one thread per trial; keeps the dense kernels bit-reproducible
    faer::set_global_parallelism(faer::Par::Seq);

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Cluster(args) => cluster(args),
        Command::Experiment(args) => run_experiment(args),
        Command::Verify => match run_verify() {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
