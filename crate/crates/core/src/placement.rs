//! Jammer placement strategies and the whole-system age objective.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analytic::{self, AnalyticError, CompensatedSum};
use crate::model::{JammerPlacement, Partition, Rates};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlacementError {
    #[error("{jammers} jammers cannot cut distinct links of a ring of {n} nodes")]
    TooManyJammers { jammers: usize, n: usize },
    #[error("ring size must be at least 1")]
    EmptyRing,
    #[error("split point {m} must lie in 1..{n0}")]
    SplitOutOfRange { m: usize, n0: usize },
    #[error("need n0 >= 1 and n0 + 1 <= n, got n0 = {n0}, n = {n}")]
    DifferenceOutOfRange { n0: usize, n: usize },
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

/// How the jammers choose which links to cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlacementStrategy {
    /// Cuts spread as evenly as possible; least harmful.
    Equidistant,
    /// Cuts on consecutive links; most harmful.
    Adjacent,
    /// Distinct uniformly random links, reproducible from the seed.
    Random { seed: u64 },
}

impl PlacementStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Equidistant => "equidistant",
            Self::Adjacent => "adjacent",
            Self::Random { .. } => "random",
        }
    }
}

impl fmt::Display for PlacementStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Places `jammers` cuts on a ring of `n` nodes.
///
/// * `Equidistant` cuts links `⌊t·n/jammers⌋`, `t = 0..jammers`, giving
///   segments of `⌊n/jammers⌋` or `⌈n/jammers⌉` nodes.
/// * `Adjacent` cuts links `0..jammers`, leaving `jammers - 1` isolated nodes
///   and one line of `n - jammers + 1`.
/// * `Random` runs a partial Fisher-Yates shuffle of `0..n` driven by
///   `ChaCha8Rng::seed_from_u64(seed)` and keeps the first `jammers` entries.
pub fn place(strategy: PlacementStrategy, n: usize, jammers: usize) -> Result<JammerPlacement, PlacementError> {
    if n == 0 {
        return Err(PlacementError::EmptyRing);
    }
    if jammers > n {
        return Err(PlacementError::TooManyJammers { jammers, n });
    }
    if jammers == 0 {
        return Ok(JammerPlacement::empty());
    }
    Ok(match strategy {
        PlacementStrategy::Equidistant => JammerPlacement::new((0..jammers).map(|t| t * n / jammers)),
        PlacementStrategy::Adjacent => JammerPlacement::new(0..jammers),
        PlacementStrategy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut links: Vec<usize> = (0..n).collect();
            for i in 0..jammers {
                let j = rng.gen_range(i..n);
                links.swap(i, j);
            }
            JammerPlacement::new(links.into_iter().take(jammers))
        }
    })
}

/// Total mini-ring age after one cut splits `n0` nodes into `m` and `n0 - m`.
pub fn split_total_age(n0: usize, m: usize, rates: &Rates) -> Result<f64, PlacementError> {
    if m == 0 || m >= n0 {
        return Err(PlacementError::SplitOutOfRange { m, n0 });
    }
    Ok(analytic::ring_total_age(m, rates)? + analytic::ring_total_age(n0 - m, rates)?)
}

/// Mean age per node over the whole `n`-node system.
pub fn system_age(partition: &Partition, rates: &Rates) -> Result<f64, PlacementError> {
    let mut acc = CompensatedSum::default();
    for &seg in partition.segments() {
        acc.add(analytic::segment_total_age(seg, rates)?);
    }
    Ok(acc.value() / partition.n() as f64)
}

/// `Δ^{r(n0)} - Δ^{r(n0+1)}`: the change in total mini-ring age from adding a
/// node, evaluated from the two ring totals.
pub fn ring_total_age_difference(n0: usize, rates: &Rates) -> Result<f64, PlacementError> {
    check_difference_range(n0, rates)?;
    Ok(analytic::ring_total_age(n0, rates)? - analytic::ring_total_age(n0 + 1, rates)?)
}

/// The same difference from its telescoped form,
/// `-(λ_s/λ)·Σ_{j=1}^{n0} Π_{k=1}^{j} 1/(1 + k/n)`.
pub fn ring_total_age_difference_closed_form(n0: usize, rates: &Rates) -> Result<f64, PlacementError> {
    check_difference_range(n0, rates)?;
    Ok(-rates.ratio() * analytic::product_sum(n0, rates.n()))
}

fn check_difference_range(n0: usize, rates: &Rates) -> Result<(), PlacementError> {
    if n0 == 0 || n0 + 1 > rates.n() {
        return Err(PlacementError::DifferenceOutOfRange { n0, n: rates.n() });
    }
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown placement '{0}' (expected equidistant, adjacent or random)")]
pub struct ParsePlacementError(String);

/// Placement strategy without its seed, as it appears in sweeps and CSV rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementKind {
    Equidistant,
    Random,
    Adjacent,
}

impl PlacementKind {
    pub const ALL: [PlacementKind; 3] = [Self::Equidistant, Self::Random, Self::Adjacent];

    pub fn with_seed(self, seed: u64) -> PlacementStrategy {
        match self {
            Self::Equidistant => PlacementStrategy::Equidistant,
            Self::Random => PlacementStrategy::Random { seed },
            Self::Adjacent => PlacementStrategy::Adjacent,
        }
    }

    pub fn name(self) -> &'static str {
        self.with_seed(0).name()
    }
}

impl fmt::Display for PlacementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlacementKind {
    type Err = ParsePlacementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equidistant" => Ok(Self::Equidistant),
            "random" => Ok(Self::Random),
            "adjacent" => Ok(Self::Adjacent),
            _ => Err(ParsePlacementError(s.to_string())),
        }
    }
}
