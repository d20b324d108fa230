use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use ringage::experiment::{powers_of_two, SimSettings};
use ringage::{Engine, Model, PlacementKind, Rates, SimConfig, SweepSpec};
use serde::{Deserialize, Serialize};

/// Flags shared by every subcommand. A config file uses the same names in
/// snake_case; flags given on the command line win.
#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Smallest ring size of a sweep (rounded up to a power of two)
    #[arg(long)]
    pub n_min: Option<usize>,
    /// Largest ring size of a sweep
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Jammer exponent: round(c * n^alpha) links are cut
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Comma-separated subset of equidistant,random,adjacent
    #[arg(long, value_delimiter = ',')]
    pub placements: Option<Vec<PlacementKind>>,
    /// Comma-separated subset of line,miniring
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<Model>>,
    /// Comma-separated subset of analytic,simulate
    #[arg(long, value_delimiter = ',')]
    pub engines: Option<Vec<Engine>>,
    /// Source update rate
    #[arg(long)]
    pub lambda_s: Option<f64>,
    /// Total delivery rate of the source and per-node gossip rate
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Simulated time per replication
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Discarded initial time (default: 10% of the horizon)
    #[arg(long)]
    pub warmup: Option<f64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Seeds random placements and simulations
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($flags:ident, $file:ident; $($field:ident),*) => {
        Settings { $($field: $flags.$field.or($file.$field)),* }
    };
}

impl Settings {
    pub const DEFAULT_N_MIN: usize = 64;
    pub const DEFAULT_N_MAX: usize = 4096;
    pub const DEFAULT_ALPHA: f64 = 0.3;

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// `self` with gaps filled from `file`.
    pub fn over(self, file: Settings) -> Self {
        let flags = self;
        overlay!(flags, file; n_min, n_max, alpha, c, placements, models, engines, lambda_s, lambda,
            horizon, warmup, replications, seed, out_dir)
    }

    /// Every field filled with the value actually used.
    pub fn resolved(&self) -> Self {
        let sim = self.sim();
        Settings {
            n_min: Some(self.n_min.unwrap_or(Self::DEFAULT_N_MIN)),
            n_max: Some(self.n_max.unwrap_or(Self::DEFAULT_N_MAX)),
            alpha: Some(self.alpha()),
            c: Some(self.c()),
            placements: Some(self.placements.clone().unwrap_or_else(|| PlacementKind::ALL.to_vec())),
            models: Some(self.models.clone().unwrap_or_else(|| Model::ALL.to_vec())),
            engines: Some(self.engines.clone().unwrap_or_else(|| vec![Engine::Analytic])),
            lambda_s: Some(self.lambda_s()),
            lambda: Some(self.lambda()),
            horizon: Some(sim.horizon),
            warmup: Some(sim.warmup.unwrap_or(sim.horizon * SimConfig::DEFAULT_WARMUP_FRACTION)),
            replications: Some(sim.replications),
            seed: Some(self.seed()),
            out_dir: self.out_dir.clone(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(Self::DEFAULT_ALPHA)
    }

    pub fn c(&self) -> f64 {
        self.c.unwrap_or(1.0)
    }

    pub fn lambda_s(&self) -> f64 {
        self.lambda_s.unwrap_or(1.0)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(1.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn rates(&self, n: usize) -> anyhow::Result<Rates> {
        Ok(Rates::new(self.lambda_s(), self.lambda(), n)?)
    }

    pub fn sim(&self) -> SimSettings {
        SimSettings {
            horizon: self.horizon.unwrap_or(SimConfig::DEFAULT_HORIZON),
            warmup: self.warmup,
            replications: self.replications.unwrap_or(SimConfig::DEFAULT_REPLICATIONS),
        }
    }

    pub fn sim_config(&self, config: SimConfig) -> SimConfig {
        let sim = self.sim();
        let config = config
            .with_horizon(sim.horizon)
            .with_replications(sim.replications)
            .with_seed(self.seed());
        match sim.warmup {
            Some(w) => config.with_warmup(w),
            None => config,
        }
    }

    pub fn sweep_spec(&self) -> anyhow::Result<SweepSpec> {
        let (lo, hi) = (
            self.n_min.unwrap_or(Self::DEFAULT_N_MIN),
            self.n_max.unwrap_or(Self::DEFAULT_N_MAX),
        );
        anyhow::ensure!(lo >= 1 && lo <= hi, "need 1 <= n-min <= n-max, got {lo} and {hi}");
        let n_values = powers_of_two(lo, hi);
        anyhow::ensure!(!n_values.is_empty(), "no power of two lies in [{lo}, {hi}]");
        let full = self.resolved();
        let spec = SweepSpec {
            n_values,
            alpha: self.alpha(),
            c: self.c(),
            placements: full.placements.unwrap_or_default(),
            models: full.models.unwrap_or_default(),
            engines: full.engines.unwrap_or_default(),
            lambda_s: self.lambda_s(),
            lambda: self.lambda(),
            seed: self.seed(),
            sim: self.sim(),
        };
        spec.validate()?;
        Ok(spec)
    }
}
