//! Experiment configuration, read from TOML.
//!
//! ```toml
//! kind = "d_regular_sweep"          # or sbm_representation_sweep, real_multiplex
//! sweep_axis = "n_nodes"            # n_clusters, degree, approx_rank, n_groups
//! sweep_values = [600, 900, 1200]
//! n_trials = 10
//! base_seed = 0
//! algorithms = ["usc", "urepsc", "urepsc_approx", "ufairsc"]
//! output = "results/vs_n.csv"
//!
//! [model]
//! n_nodes = 1200
//! n_clusters = 5
//! degree = 40
//! ```
//!
//! See the README for every key and its default.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use repsc::rsbm::{ProtectedGroupParams, RsbmParams};
use repsc::{Error, Result};

use crate::multiplex::MultiplexSpec;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    DRegularSweep,
    SbmRepresentationSweep,
    RealMultiplex,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NNodes,
    NClusters,
    Degree,
    ApproxRank,
    NGroups,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NNodes => "n_nodes",
            SweepAxis::NClusters => "n_clusters",
            SweepAxis::Degree => "degree",
            SweepAxis::ApproxRank => "approx_rank",
            SweepAxis::NGroups => "n_groups",
        }
    }
}

/// Declaration order is the row order of result tables.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Usc,
    Nsc,
    Urepsc,
    Nrepsc,
    UrepscApprox,
    NrepscApprox,
    Ufairsc,
    Nfairsc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Usc,
        Algorithm::Nsc,
        Algorithm::Urepsc,
        Algorithm::Nrepsc,
        Algorithm::UrepscApprox,
        Algorithm::NrepscApprox,
        Algorithm::Ufairsc,
        Algorithm::Nfairsc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Usc => "usc",
            Algorithm::Nsc => "nsc",
            Algorithm::Urepsc => "urepsc",
            Algorithm::Nrepsc => "nrepsc",
            Algorithm::UrepscApprox => "urepsc_approx",
            Algorithm::NrepscApprox => "nrepsc_approx",
            Algorithm::Ufairsc => "ufairsc",
            Algorithm::Nfairsc => "nfairsc",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name.trim())
            .ok_or_else(|| {
                let known: Vec<_> = Self::ALL.iter().map(|a| a.name()).collect();
                Error::config(format!(
                    "unknown algorithm {name:?}, expected one of {}",
                    known.join(", ")
                ))
            })
    }

    pub fn needs_representation(self) -> bool {
        !matches!(self, Algorithm::Usc | Algorithm::Nsc)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_p() -> f64 {
    0.4
}
fn default_q() -> f64 {
    0.3
}
fn default_r() -> f64 {
    0.2
}
fn default_s() -> f64 {
    0.1
}
fn default_p_in() -> f64 {
    0.8
}
fn default_p_out() -> f64 {
    0.2
}
fn default_rep_groups() -> usize {
    5
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_nodes: Option<usize>,
    pub n_clusters: Option<usize>,
    /// Degree of the d-regular representation graph.
    pub degree: Option<usize>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_s")]
    pub s: f64,
    /// Number of planted groups in a sampled representation graph.
    #[serde(default = "default_rep_groups")]
    pub rep_groups: usize,
    #[serde(default = "default_p_in")]
    pub p_in: f64,
    #[serde(default = "default_p_out")]
    pub p_out: f64,
    /// Groups discovered by the fair-SC baselines. Defaults to N/10.
    pub fair_groups: Option<usize>,
    /// Rank used by the approximate variants. Defaults to N/10.
    pub approx_rank: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_nodes: None,
            n_clusters: None,
            degree: None,
            p: default_p(),
            q: default_q(),
            r: default_r(),
            s: default_s(),
            rep_groups: default_rep_groups(),
            p_in: default_p_in(),
            p_out: default_p_out(),
            fair_groups: None,
            approx_rank: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<usize>,
    #[serde(default = "one")]
    pub n_trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub output: PathBuf,
    #[serde(default)]
    pub model: ModelConfig,
    pub multiplex: Option<MultiplexSpec>,
}

fn one() -> usize {
    1
}

/// Fully resolved parameters of one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: usize,
    pub n_nodes: usize,
    pub n_clusters: usize,
    pub degree: Option<usize>,
    pub approx_rank: usize,
    pub fair_groups: usize,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        // relative paths are taken relative to the config file
        if let Some(dir) = path.parent() {
            if config.output.is_relative() {
                config.output = dir.join(&config.output);
            }
            if let Some(m) = config.multiplex.as_mut() {
                if m.path.is_relative() {
                    m.path = dir.join(&m.path);
                }
            }
        }
        Ok(config)
    }

    pub fn rsbm_params(&self) -> Result<RsbmParams> {
        let m = &self.model;
        RsbmParams::new(m.p, m.q, m.r, m.s)
    }

    pub fn group_params(&self) -> Result<ProtectedGroupParams> {
        let m = &self.model;
        ProtectedGroupParams::new(m.rep_groups, m.p_in, m.p_out)
    }

    /// Path of the aggregated mean/std table next to the per-trial table.
    pub fn summary_path(&self) -> PathBuf {
        self.output.with_extension("summary.csv")
    }

    /// Path of the wall-time table next to the per-trial table.
    pub fn timing_path(&self) -> PathBuf {
        self.output.with_extension("timing.csv")
    }

    /// Checks every field and resolves each sweep point. Errors name the
    /// offending field.
    pub fn validate(&self) -> Result<Vec<SweepPoint>> {
        let bad = |field: &str, msg: String| Err(Error::config(format!("{field}: {msg}")));
        if self.n_trials == 0 {
            return bad("n_trials", "must be at least 1".into());
        }
        if self.sweep_values.is_empty() {
            return bad("sweep_values", "must not be empty".into());
        }
        if self.sweep_values.contains(&0) {
            return bad("sweep_values", "values must be positive".into());
        }
        if self.algorithms.is_empty() {
            return bad("algorithms", "must name at least one algorithm".into());
        }
        self.rsbm_params()
            .map_err(|e| Error::config(format!("model.p/q/r/s: {e}")))?;

        match self.kind {
            ExperimentKind::DRegularSweep => {}
            ExperimentKind::SbmRepresentationSweep => {
                if self.sweep_axis == SweepAxis::Degree {
                    return bad(
                        "sweep_axis",
                        "degree applies only to d_regular_sweep".into(),
                    );
                }
                self.group_params()
                    .map_err(|e| Error::config(format!("model.rep_groups/p_in/p_out: {e}")))?;
            }
            ExperimentKind::RealMultiplex => {
                if matches!(self.sweep_axis, SweepAxis::NNodes | SweepAxis::Degree) {
                    return bad(
                        "sweep_axis",
                        format!(
                            "{} cannot be swept over a fixed network",
                            self.sweep_axis.name()
                        ),
                    );
                }
                match &self.multiplex {
                    None => return bad("multiplex", "section required for real_multiplex".into()),
                    Some(spec) => spec.validate()?,
                }
            }
        }

        let mut points = Vec::with_capacity(self.sweep_values.len());
        for &value in &self.sweep_values {
            points.push(self.resolve(value)?);
        }
        Ok(points)
    }

    fn resolve(&self, value: usize) -> Result<SweepPoint> {
        let m = &self.model;
        let axis = self.sweep_axis;
        let required = |v: Option<usize>, field: &str| {
            v.ok_or_else(|| Error::config(format!("model.{field}: required for {:?}", self.kind)))
        };
        let n_nodes = match (axis, self.kind) {
            (SweepAxis::NNodes, _) => value,
            (_, ExperimentKind::RealMultiplex) => m.n_nodes.unwrap_or(0),
            _ => required(m.n_nodes, "n_nodes")?,
        };
        let n_clusters = if axis == SweepAxis::NClusters {
            value
        } else {
            required(m.n_clusters, "n_clusters")?
        };
        let degree = match (axis, self.kind) {
            (SweepAxis::Degree, _) => Some(value),
            (_, ExperimentKind::DRegularSweep) => Some(required(m.degree, "degree")?),
            _ => None,
        };
        // the two axes move together unless one of them is pinned
        let default = (n_nodes / 10).max(1);
        let (approx_rank, fair_groups) = match axis {
            SweepAxis::ApproxRank => (value, m.fair_groups.unwrap_or(value)),
            SweepAxis::NGroups => (m.approx_rank.unwrap_or(value), value),
            _ => (
                m.approx_rank.unwrap_or(default),
                m.fair_groups.unwrap_or(default),
            ),
        };
        let point = SweepPoint {
            value,
            n_nodes,
            n_clusters,
            degree,
            approx_rank,
            fair_groups,
        };
        self.check_point(&point)?;
        Ok(point)
    }

    fn check_point(&self, pt: &SweepPoint) -> Result<()> {
        let at = |msg: String| {
            Err(Error::config(format!(
                "{} = {}: {msg}",
                self.sweep_axis.name(),
                pt.value
            )))
        };
        if pt.n_clusters < 2 {
            return at(format!("n_clusters = {} must be at least 2", pt.n_clusters));
        }
        if self.kind == ExperimentKind::RealMultiplex {
            return Ok(());
        }
        if !pt.n_nodes.is_multiple_of(pt.n_clusters) {
            return at(format!(
                "n_clusters = {} does not divide n_nodes = {}",
                pt.n_clusters, pt.n_nodes
            ));
        }
        if let Some(d) = pt.degree {
            if d % pt.n_clusters != 0 || d > pt.n_nodes {
                return at(format!(
                    "degree = {d} must be a multiple of n_clusters = {} and at most n_nodes = {}",
                    pt.n_clusters, pt.n_nodes
                ));
            }
        }
        if self.kind == ExperimentKind::SbmRepresentationSweep && self.model.rep_groups > pt.n_nodes
        {
            return at(format!(
                "model.rep_groups = {} exceeds n_nodes",
                self.model.rep_groups
            ));
        }
        Ok(())
    }
}
