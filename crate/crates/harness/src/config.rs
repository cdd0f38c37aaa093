//! Experiment configuration.

use std::path::PathBuf;

use ftc_core::{Engine, GraphModel, Norm};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// Independent directed edges, resampled until strongly connected.
    #[value(alias = "er")]
    ErdosRenyi,
    /// Directed cycle `i -> i + 1`.
    Ring,
    Complete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stopping {
    Radius,
    Box,
    Hull,
    /// Run a fixed number of steps.
    None,
}

/// Everything that determines an experiment's output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub dim: usize,
    pub topology: Topology,
    /// Edge probability for `erdos-renyi`; ignored otherwise.
    pub edge_prob: f64,
    pub seed: u64,
    pub engine: Engine,
    pub stopping: Stopping,
    pub rho: f64,
    /// Treat `rho` as a fraction of the consensus vector's norm.
    pub rho_relative: bool,
    pub norm: Norm,
    /// Window length override, at least the graph diameter.
    pub d_bound: Option<usize>,
    pub k_max: usize,
    /// Iterations to run when `stopping` is `none`.
    pub steps: usize,
    pub bits_per_float: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 25,
            dim: 10,
            topology: Topology::ErdosRenyi,
            edge_prob: 0.15,
            seed: 0,
            engine: Engine::Ratio,
            stopping: Stopping::Radius,
            rho: 0.01,
            rho_relative: true,
            norm: Norm::L2,
            d_bound: None,
            k_max: ftc_core::termination::DEFAULT_K_MAX,
            steps: 100,
            bits_per_float: 32,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn model(&self) -> GraphModel {
        match self.topology {
            Topology::ErdosRenyi => GraphModel::ErdosRenyi { p: self.edge_prob },
            Topology::Ring => GraphModel::Ring,
            Topology::Complete => GraphModel::Complete,
        }
    }

    /// Checks everything that can be checked before the graph exists.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.n == 0 {
            return fail("n must be at least 1".into());
        }
        if self.dim == 0 {
            return fail("dim must be at least 1".into());
        }
        if self.topology == Topology::ErdosRenyi && !(self.edge_prob > 0.0 && self.edge_prob <= 1.0) {
            return fail(format!("edge_prob must lie in (0, 1], got {}", self.edge_prob));
        }
        if self.stopping != Stopping::None && !(self.rho > 0.0 && self.rho.is_finite()) {
            return fail(format!("rho must be positive and finite, got {}", self.rho));
        }
        if let Norm::Lp(p) = self.norm {
            if !(p >= 1.0 && p.is_finite()) {
                return fail(format!("norm p must be >= 1, got {p}"));
            }
        }
        if self.k_max == 0 {
            return fail("k_max must be at least 1".into());
        }
        if self.bits_per_float == 0 {
            return fail("bits_per_float must be at least 1".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(s).map_err(|e| HarnessError::Config(format!("invalid config JSON: {e}")))
    }
}
