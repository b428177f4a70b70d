//! Monte-Carlo sweeps over synthetic and multiplex graphs.
//!
//! Trial `t` uses seed `base_seed + t`. From it, independent streams seed the
//! representation graph, the similarity graph and k-means. Trials run in
//! parallel. Rows are sorted by (sweep value, algorithm, trial) before being
//! written, so the per-trial table is a pure function of the config. Wall
//! times go to a separate table for that reason.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use repsc::algorithms::{self, ClusteringOutput, RepresentationConstraint};
use repsc::kmeans::KMeansConfig;
use repsc::metrics;
use repsc::random::derive_seed;
use repsc::rsbm;
use repsc::{ClusterAssignment, Error, Graph, Result};

use crate::config::{Algorithm, ExperimentConfig, ExperimentKind, SweepPoint};
use crate::multiplex;

const STREAM_REPRESENTATION: u64 = 0;
const STREAM_SIMILARITY: u64 = 1;
const STREAM_KMEANS: u64 = 2;

/// Metric columns, in table order.
pub const METRICS: [&str; 8] = [
    "accuracy",
    "misclustering",
    "avg_balance",
    "ratio_cut",
    "normalized_cut",
    "balance_per_rcut",
    "eigengap",
    "constraint_residual",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub misclustering: Option<f64>,
    pub avg_balance: Option<f64>,
    pub ratio_cut: Option<f64>,
    pub normalized_cut: Option<f64>,
    pub balance_per_rcut: Option<f64>,
    pub eigengap: Option<f64>,
    pub constraint_residual: Option<f64>,
}

impl Metrics {
    pub fn values(&self) -> [Option<f64>; 8] {
        [
            self.accuracy,
            self.misclustering,
            self.avg_balance,
            self.ratio_cut,
            self.normalized_cut,
            self.balance_per_rcut,
            self.eigengap,
            self.constraint_residual,
        ]
    }
}

/// Scores a clustering against the graphs it came from and, when known, the
/// planted clusters.
pub fn evaluate(
    output: &ClusteringOutput,
    similarity: &Graph,
    representation: &Graph,
    truth: Option<&ClusterAssignment>,
) -> Metrics {
    let assignment = &output.assignment;
    let mis = truth.and_then(|t| metrics::misclustering(t, assignment).ok());
    let avg_balance = metrics::node_balance(representation, assignment)
        .ok()
        .map(|b| b.average);
    let ratio_cut = metrics::ratio_cut(similarity, assignment).ok();
    let balance_per_rcut = match (avg_balance, ratio_cut) {
        (Some(b), Some(c)) if c > 0.0 => Some(b / c),
        _ => None,
    };
    Metrics {
        accuracy: mis.as_ref().map(|m| m.accuracy),
        misclustering: mis.as_ref().map(|m| m.fraction),
        avg_balance,
        ratio_cut,
        normalized_cut: metrics::normalized_cut(similarity, assignment).ok(),
        balance_per_rcut,
        eigengap: output.eigengap(),
        constraint_residual: output.constraint_residual(),
    }
}

/// Knobs shared by every algorithm in a single run.
#[derive(Clone, Copy, Debug)]
pub struct RunSettings {
    pub n_clusters: usize,
    pub approx_rank: usize,
    pub fair_groups: usize,
}

/// Runs one algorithm, building whatever constraint it needs.
pub fn run_algorithm(
    algorithm: Algorithm,
    similarity: &Graph,
    representation: &Graph,
    settings: RunSettings,
    kmeans: &KMeansConfig,
) -> Result<ClusteringOutput> {
    run_with_cache(
        algorithm,
        similarity,
        representation,
        settings,
        kmeans,
        &Constraints::default(),
    )
}

/// Constraints precomputed for a fixed representation graph.
#[derive(Default)]
struct Constraints {
    exact: Option<std::result::Result<RepresentationConstraint, String>>,
    approx: Option<std::result::Result<RepresentationConstraint, String>>,
}

impl Constraints {
    fn prepare(representation: &Graph, settings: RunSettings, algorithms: &[Algorithm]) -> Self {
        let wants = |a: &[Algorithm]| algorithms.iter().any(|x| a.contains(x));
        let keep = |r: Result<RepresentationConstraint>| r.map_err(|e| e.kind().to_string());
        let approx_rank_ok = (1..=representation.n_nodes().saturating_sub(settings.n_clusters))
            .contains(&settings.approx_rank);
        Self {
            exact: wants(&[Algorithm::Urepsc, Algorithm::Nrepsc])
                .then(|| keep(RepresentationConstraint::new(representation))),
            approx: (wants(&[Algorithm::UrepscApprox, Algorithm::NrepscApprox]) && approx_rank_ok)
                .then(|| {
                    keep(RepresentationConstraint::low_rank(
                        representation,
                        settings.approx_rank,
                    ))
                }),
        }
    }
}

fn cached(
    slot: &Option<std::result::Result<RepresentationConstraint, String>>,
) -> Option<std::result::Result<&RepresentationConstraint, Error>> {
    slot.as_ref().map(|r| {
        r.as_ref()
            .map_err(|kind| Error::Numerical(format!("constraint construction failed ({kind})")))
    })
}

fn run_with_cache(
    algorithm: Algorithm,
    similarity: &Graph,
    representation: &Graph,
    settings: RunSettings,
    kmeans: &KMeansConfig,
    cache: &Constraints,
) -> Result<ClusteringOutput> {
    let k = settings.n_clusters;
    match algorithm {
        Algorithm::Usc => algorithms::unnormalized_sc(similarity, k, kmeans),
        Algorithm::Nsc => algorithms::normalized_sc(similarity, k, kmeans),
        Algorithm::Urepsc | Algorithm::Nrepsc => {
            let owned;
            let constraint = match cached(&cache.exact) {
                Some(c) => c?,
                None => {
                    owned = RepresentationConstraint::new(representation)?;
                    &owned
                }
            };
            if algorithm == Algorithm::Urepsc {
                algorithms::urepsc_with(similarity, constraint, k, kmeans)
            } else {
                algorithms::nrepsc_with(similarity, constraint, k, kmeans)
            }
        }
        Algorithm::UrepscApprox | Algorithm::NrepscApprox => match cached(&cache.approx) {
            Some(c) => {
                let c = c?;
                if algorithm == Algorithm::UrepscApprox {
                    algorithms::urepsc_with(similarity, c, k, kmeans)
                } else {
                    algorithms::nrepsc_with(similarity, c, k, kmeans)
                }
            }
            None if algorithm == Algorithm::UrepscApprox => algorithms::urepsc_approx(
                similarity,
                representation,
                k,
                settings.approx_rank,
                kmeans,
            ),
            None => algorithms::nrepsc_approx(
                similarity,
                representation,
                k,
                settings.approx_rank,
                kmeans,
            ),
        },
        Algorithm::Ufairsc | Algorithm::Nfairsc => algorithms::fairsc_baseline(
            similarity,
            representation,
            k,
            settings.fair_groups,
            kmeans,
            algorithm == Algorithm::Nfairsc,
        ),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub sweep_value: usize,
    pub algorithm: Algorithm,
    pub trial: usize,
    pub seed: u64,
    /// `ok`, or the kind of error that stopped the algorithm.
    pub status: String,
    pub metrics: Metrics,
    pub wall_time_secs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub sweep_value: usize,
    pub algorithm: Algorithm,
    pub n_ok: usize,
    pub n_failed: usize,
    /// (mean, population std) per metric over successful trials.
    pub stats: [Option<(f64, f64)>; 8],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResults {
    pub rows: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
}

struct Instance {
    representation: Graph,
    similarity: Option<Graph>,
    truth: Option<ClusterAssignment>,
}

/// Data that is the same for every trial of a sweep point.
struct PointContext {
    point: SweepPoint,
    fixed: Option<(Instance, Constraints)>,
}

fn settings(point: &SweepPoint) -> RunSettings {
    RunSettings {
        n_clusters: point.n_clusters,
        approx_rank: point.approx_rank,
        fair_groups: point.fair_groups,
    }
}

fn algorithms_in_order(config: &ExperimentConfig) -> Vec<Algorithm> {
    let mut algs = config.algorithms.clone();
    algs.sort();
    algs.dedup();
    algs
}

fn prepare_point(
    config: &ExperimentConfig,
    point: SweepPoint,
    network: Option<&(Graph, Graph)>,
    algs: &[Algorithm],
) -> Result<PointContext> {
    let fixed = match config.kind {
        ExperimentKind::DRegularSweep => {
            let truth = ClusterAssignment::ground_truth(point.n_nodes, point.n_clusters)?;
            let degree = point.degree.expect("validated");
            let representation = rsbm::make_d_regular_representation(
                point.n_nodes,
                point.n_clusters,
                degree,
                &truth,
            )
            .map_err(|e| {
                Error::config(format!(
                    "{} = {}: {e}",
                    config.sweep_axis.name(),
                    point.value
                ))
            })?;
            Some(Instance {
                representation,
                similarity: None,
                truth: Some(truth),
            })
        }
        ExperimentKind::SbmRepresentationSweep => None,
        ExperimentKind::RealMultiplex => {
            let (r, g) = network.expect("loaded before the sweep");
            Some(Instance {
                representation: r.clone(),
                similarity: Some(g.clone()),
                truth: None,
            })
        }
    };
    let fixed = fixed.map(|inst| {
        let constraints = Constraints::prepare(&inst.representation, settings(&point), algs);
        (inst, constraints)
    });
    Ok(PointContext { point, fixed })
}

fn sample_instance(config: &ExperimentConfig, point: &SweepPoint, seed: u64) -> Result<Instance> {
    let truth = ClusterAssignment::ground_truth(point.n_nodes, point.n_clusters)?;
    // protected groups interleave with the planted clusters
    let groups = ClusterAssignment::interleaved(point.n_nodes, config.model.rep_groups)?;
    let representation = rsbm::sample_group_representation(
        point.n_nodes,
        &groups,
        &config.group_params()?,
        derive_seed(seed, STREAM_REPRESENTATION),
    )?;
    Ok(Instance {
        representation,
        similarity: None,
        truth: Some(truth),
    })
}

fn run_trial(
    config: &ExperimentConfig,
    ctx: &PointContext,
    trial: usize,
    algs: &[Algorithm],
) -> Vec<TrialRow> {
    let seed = config.base_seed.wrapping_add(trial as u64);
    let point = &ctx.point;
    let row = |algorithm, status: String, metrics, wall_time_secs| TrialRow {
        sweep_value: point.value,
        algorithm,
        trial,
        seed,
        status,
        metrics,
        wall_time_secs,
    };
    let fail_all = |e: Error| {
        log::warn!(
            "{} = {}, trial {trial}: {e}",
            config.sweep_axis.name(),
            point.value
        );
        algs.iter()
            .map(|&a| row(a, e.kind().to_string(), Metrics::default(), 0.0))
            .collect()
    };

    let sampled;
    let (instance, constraints) = match &ctx.fixed {
        Some((inst, c)) => (inst, c),
        None => match sample_instance(config, point, seed) {
            Ok(inst) => {
                sampled = (
                    Constraints::prepare(&inst.representation, settings(point), algs),
                    inst,
                );
                (&sampled.1, &sampled.0)
            }
            Err(e) => return fail_all(e),
        },
    };
    let generated;
    let similarity = match (&instance.similarity, &instance.truth) {
        (Some(g), _) => g,
        (None, Some(truth)) => {
            let params = match config.rsbm_params() {
                Ok(p) => p,
                Err(e) => return fail_all(e),
            };
            match rsbm::sample_rsbm(
                &instance.representation,
                truth,
                &params,
                derive_seed(seed, STREAM_SIMILARITY),
            ) {
                Ok(g) => {
                    generated = g;
                    &generated
                }
                Err(e) => return fail_all(e),
            }
        }
        (None, None) => unreachable!("synthetic instances carry their truth"),
    };

    let kmeans = KMeansConfig::new(point.n_clusters, derive_seed(seed, STREAM_KMEANS));
    algs.iter()
        .map(|&alg| {
            let start = Instant::now();
            let result = run_with_cache(
                alg,
                similarity,
                &instance.representation,
                settings(point),
                &kmeans,
                constraints,
            );
            let elapsed = start.elapsed().as_secs_f64();
            match result {
                Ok(out) => {
                    let m = evaluate(
                        &out,
                        similarity,
                        &instance.representation,
                        instance.truth.as_ref(),
                    );
                    row(alg, "ok".into(), m, elapsed)
                }
                Err(e) => {
                    log::warn!(
                        "{} = {}, trial {trial}, {alg}: {e}",
                        config.sweep_axis.name(),
                        point.value
                    );
                    row(alg, e.kind().to_string(), Metrics::default(), elapsed)
                }
            }
        })
        .collect()
}

/// Runs every (sweep value, trial) pair and aggregates the results. Config
/// problems abort; algorithm failures become row statuses.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    let points = config.validate()?;
    let algs = algorithms_in_order(config);
    let network = match (&config.kind, &config.multiplex) {
        (ExperimentKind::RealMultiplex, Some(spec)) => Some(multiplex::ingest_multiplex(spec)?),
        _ => None,
    };

    let mut contexts = Vec::with_capacity(points.len());
    for point in points {
        log::info!("preparing {} = {}", config.sweep_axis.name(), point.value);
        contexts.push(prepare_point(config, point, network.as_ref(), &algs)?);
    }

    let jobs: Vec<(usize, usize)> = (0..contexts.len())
        .flat_map(|p| (0..config.n_trials).map(move |t| (p, t)))
        .collect();
    let mut rows: Vec<TrialRow> = jobs
        .par_iter()
        .flat_map_iter(|&(p, t)| run_trial(config, &contexts[p], t, &algs))
        .collect();
    rows.sort_by(|a, b| {
        (a.sweep_value, a.algorithm, a.trial).cmp(&(b.sweep_value, b.algorithm, b.trial))
    });
    let summary = summarize(&rows);
    Ok(ExperimentResults { rows, summary })
}

/// Mean and population standard deviation per (sweep value, algorithm).
pub fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    for group in rows.chunk_by(|a, b| (a.sweep_value, a.algorithm) == (b.sweep_value, b.algorithm))
    {
        let ok: Vec<&TrialRow> = group.iter().filter(|r| r.status == "ok").collect();
        let mut stats = [None; 8];
        for (m, slot) in stats.iter_mut().enumerate() {
            let xs: Vec<f64> = ok.iter().filter_map(|r| r.metrics.values()[m]).collect();
            if xs.is_empty() {
                continue;
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            *slot = Some((mean, var.sqrt()));
        }
        out.push(SummaryRow {
            sweep_value: group[0].sweep_value,
            algorithm: group[0].algorithm,
            n_ok: ok.len(),
            n_failed: group.len() - ok.len(),
            stats,
        });
    }
    out
}

fn fmt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_writer(w: impl Write) -> csv::Writer<impl Write> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_trials(w: impl Write, axis: &str, rows: &[TrialRow]) -> Result<()> {
    let mut out = csv_writer(w);
    let mut header = vec![axis, "algorithm", "trial", "seed", "status"];
    header.extend(METRICS);
    out.write_record(&header).map_err(std::io::Error::from)?;
    for r in rows {
        let mut rec = vec![
            r.sweep_value.to_string(),
            r.algorithm.name().to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.status.clone(),
        ];
        rec.extend(r.metrics.values().into_iter().map(fmt));
        out.write_record(&rec).map_err(std::io::Error::from)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary(w: impl Write, axis: &str, summary: &[SummaryRow]) -> Result<()> {
    let mut out = csv_writer(w);
    let mut header = vec![
        axis.to_string(),
        "algorithm".into(),
        "n_ok".into(),
        "n_failed".into(),
    ];
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    out.write_record(&header).map_err(std::io::Error::from)?;
    for s in summary {
        let mut rec = vec![
            s.sweep_value.to_string(),
            s.algorithm.name().to_string(),
            s.n_ok.to_string(),
            s.n_failed.to_string(),
        ];
        for stat in s.stats {
            rec.push(fmt(stat.map(|(m, _)| m)));
            rec.push(fmt(stat.map(|(_, sd)| sd)));
        }
        out.write_record(&rec).map_err(std::io::Error::from)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_timing(w: impl Write, axis: &str, rows: &[TrialRow]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([axis, "algorithm", "trial", "wall_time_secs"])
        .map_err(std::io::Error::from)?;
    for r in rows {
        out.write_record([
            r.sweep_value.to_string(),
            r.algorithm.name().to_string(),
            r.trial.to_string(),
            r.wall_time_secs.to_string(),
        ])
        .map_err(std::io::Error::from)?;
    }
    out.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes the per-trial, summary and timing tables to the configured paths.
pub fn write_results(config: &ExperimentConfig, results: &ExperimentResults) -> Result<()> {
    let axis = config.sweep_axis.name();
    write_trials(create(&config.output)?, axis, &results.rows)?;
    write_summary(create(&config.summary_path())?, axis, &results.summary)?;
    write_timing(create(&config.timing_path())?, axis, &results.rows)?;
    Ok(())
}
