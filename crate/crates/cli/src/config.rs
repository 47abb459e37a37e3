//! Run configuration: a TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use polyharm::volume::Theta;
use polyharm::{GeneratingSet, GroupSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::UsageError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub group: String,
    pub generators: String,
    /// Largest growth radius; the group decides when unset.
    pub nmax: Option<u32>,
    pub radius: u32,
    pub inner: Option<u32>,
    /// Homogeneous dimension override for growth comparisons.
    #[serde(rename = "D")]
    pub big_d: Option<u32>,
    pub d: u32,
    pub schedule: Option<Vec<u32>>,
    pub rel_tol: f64,
    pub solver_tol: Option<f64>,
    pub theta: Vec<String>,
    pub degree_window: Option<[u32; 2]>,
    pub seed: u64,
    pub scales: Vec<u32>,
    pub random_fields: u32,
    pub boundary: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
    pub rough: RoughConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoughConfig {
    /// Runs the rough stage of `all`; defaults to on for `Z^D`, `D <= 3`.
    pub enabled: Option<bool>,
    pub dim: Option<usize>,
    pub window: Option<u32>,
    pub region: u32,
    pub a: f64,
    pub b: f64,
    pub graph_csv: Option<PathBuf>,
    pub map_csv: Option<PathBuf>,
    /// Adds the mean-value suite to the rough stage of `all`.
    pub mvl: bool,
    pub mvl_fields: usize,
    pub mvl_radii: Vec<u32>,
}

impl Default for RoughConfig {
    fn default() -> Self {
        RoughConfig {
            enabled: None,
            dim: None,
            window: None,
            region: 4,
            a: 2.0,
            b: 1.0,
            graph_csv: None,
            map_csv: None,
            mvl: false,
            mvl_fields: 20,
            mvl_radii: vec![10, 20, 40],
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            group: "z2".into(),
            generators: "standard".into(),
            nmax: None,
            radius: 20,
            inner: None,
            big_d: None,
            d: 2,
            schedule: None,
            rel_tol: 1e-8,
            solver_tol: None,
            theta: vec!["0.1".into()],
            degree_window: None,
            seed: polyharm::inequalities::DEFAULT_SEED,
            scales: vec![2, 4, 8],
            random_fields: 4,
            boundary: None,
            cache_dir: None,
            out: None,
            format: None,
            jobs: None,
            rough: RoughConfig::default(),
        }
    }
}

/// A validated configuration with its parsed group data.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub spec: GroupSpec,
    pub generators: GeneratingSet,
    pub thetas: Vec<Theta>,
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, UsageError> {
        toml::from_str(text).map_err(|e| UsageError(format!("bad config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, ignoring output-only settings.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.format = None;
        c.jobs = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn resolve(self) -> Result<Resolved, UsageError> {
        let spec: GroupSpec = self.group.parse().map_err(|e| UsageError(format!("--group: {e}")))?;
        let generators = GeneratingSet::parse(&spec, &self.generators)
            .map_err(|e| UsageError(format!("--generators: {e}")))?;
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(UsageError("rel_tol must lie in (0, 1)".into()));
        }
        if self.solver_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(UsageError("solver_tol must be positive".into()));
        }
        if let Some(s) = &self.schedule {
            if s.is_empty() || s[0] == 0 || s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(UsageError("schedule must be strictly increasing positive radii".into()));
            }
        }
        if self.scales.is_empty() || self.scales.contains(&0) {
            return Err(UsageError("scales must be positive and nonempty".into()));
        }
        if self.nmax == Some(0) {
            return Err(UsageError("nmax must be at least 1".into()));
        }
        if !(self.rough.a >= 1.0 && self.rough.b >= 0.0) {
            return Err(UsageError("rough constants need a >= 1 and b >= 0".into()));
        }
        if self.jobs == Some(0) {
            return Err(UsageError("jobs must be at least 1".into()));
        }
        let thetas = self
            .theta
            .iter()
            .map(|t| t.parse::<Theta>().map_err(|e| UsageError(format!("--theta: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Resolved {
            config: self,
            spec,
            generators,
            thetas,
        })
    }
}

impl Resolved {
    pub fn nmax(&self) -> u32 {
        self.config.nmax.unwrap_or(match &self.spec {
            GroupSpec::Lattice { .. } => 60,
            GroupSpec::Heisenberg => 20,
            GroupSpec::Product { .. } => 30,
        })
    }

    pub fn degree(&self) -> u32 {
        self.config.big_d.unwrap_or_else(|| self.spec.homogeneous_dimension())
    }

    pub fn schedule(&self) -> Vec<u32> {
        if let Some(s) = &self.config.schedule {
            return s.clone();
        }
        match &self.spec {
            GroupSpec::Lattice { dim } if *dim <= 2 => vec![8, 12, 16, 20],
            GroupSpec::Lattice { .. } => vec![8, 10, 12],
            _ => vec![4, 6, 8],
        }
    }

    /// Fitting window for the growth degree, clipped to `nmax`.
    pub fn degree_window(&self) -> Option<(u32, u32)> {
        let [lo, hi] = self.config.degree_window.unwrap_or(match &self.spec {
            GroupSpec::Lattice { dim } if *dim >= 3 => [5, 20],
            GroupSpec::Lattice { .. } => [10, 50],
            GroupSpec::Heisenberg => [10, 20],
            GroupSpec::Product { .. } => [5, 30],
        });
        let hi = hi.min(self.nmax());
        (lo >= 2 && hi >= lo + 3).then_some((lo, hi))
    }

    pub fn solve_options(&self) -> polyharm::solver::SolveOptions {
        polyharm::solver::SolveOptions {
            tol: self.config.solver_tol,
            max_iter: None,
        }
    }

    /// Dimension of the subdivided lattice used by the rough commands.
    pub fn rough_dim(&self) -> Option<usize> {
        self.config.rough.dim.or(match &self.spec {
            GroupSpec::Lattice { dim } if *dim <= 3 => Some(*dim),
            _ => None,
        })
    }

    pub fn rough_window(&self, dim: usize) -> u32 {
        self.config.rough.window.unwrap_or(match dim {
            1 => 20,
            2 => 10,
            _ => 5,
        })
    }

    pub fn rough_enabled(&self) -> bool {
        self.config.rough.enabled.unwrap_or(self.rough_dim().is_some())
    }
}
