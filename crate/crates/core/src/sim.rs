//! Continuous-time Monte-Carlo simulation of the gossip protocol.
//!
//! The state is the integer version age of every node. Three families of
//! Poisson processes drive it:
//!
//! * the source self-updates at `λ_s`, aging every node by one;
//! * the source pushes to each node at `λ/n`, resetting that node to zero;
//! * every directed un-cut link `i → j` fires at `λ/2`, setting
//!   `Δ_j = min(Δ_j, Δ_i)`.
//!
//! Rates never change during a run, so the loop draws from the superposition:
//! one exponential holding time at the total rate, then an event chosen in
//! proportion to its rate. Ages are piecewise constant between events and are
//! integrated exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{JammerPlacement, ModelError, Partition, Rates, Segment, SegmentKind};
use crate::par::{self, Execution};

/// Generator used for every replication. Replication `r` draws from stream
/// `r` of a generator seeded with `seed_from_u64(seed)`.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.3), seed_from_u64(seed), stream = replication index";

/// Normal quantile for a two-sided 95% interval.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("horizon must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("warmup {warmup} must be non-negative and below the horizon {horizon}")]
    Warmup { warmup: f64, horizon: f64 },
    #[error("at least one replication is required")]
    NoReplications,
    #[error("no nodes to simulate")]
    NoNodes,
    #[error("{nodes} simulated nodes exceed the ring size n = {n}")]
    TooManyNodes { nodes: usize, n: usize },
    #[error("partition covers {partition} nodes but the rates describe a ring of {n}")]
    PartitionMismatch { partition: usize, n: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One simulation experiment.
///
/// `segments` may cover fewer than `rates.n()` nodes: the source still pushes
/// to each simulated node at `λ/n`, which lets a single segment be studied
/// as it behaves inside a larger jammed ring.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub rates: Rates,
    pub segments: Vec<Segment>,
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub replications: usize,
}

impl SimConfig {
    pub const DEFAULT_HORIZON: f64 = 10_000.0;
    pub const DEFAULT_REPLICATIONS: usize = 20;
    pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;

    pub fn new(rates: Rates, segments: Vec<Segment>) -> Self {
        Self {
            rates,
            segments,
            horizon: Self::DEFAULT_HORIZON,
            warmup: Self::DEFAULT_HORIZON * Self::DEFAULT_WARMUP_FRACTION,
            seed: 0,
            replications: Self::DEFAULT_REPLICATIONS,
        }
    }

    /// Simulates every segment of `partition`, which must span `rates.n()`.
    pub fn from_partition(rates: Rates, partition: &Partition) -> Result<Self, SimError> {
        if partition.n() != rates.n() {
            return Err(SimError::PartitionMismatch {
                partition: partition.n(),
                n: rates.n(),
            });
        }
        Ok(Self::new(rates, partition.segments().to_vec()))
    }

    /// Cuts the ring at `placement`; `kind` selects the original line model
    /// or the mini-ring model.
    pub fn from_placement(rates: Rates, placement: &JammerPlacement, kind: SegmentKind) -> Result<Self, SimError> {
        Self::from_partition(rates, &Partition::from_placement_as(placement, rates.n(), kind)?)
    }

    /// Sets the horizon and resets the warmup to its default fraction.
    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self.warmup = horizon * Self::DEFAULT_WARMUP_FRACTION;
        self
    }

    pub fn with_warmup(mut self, warmup: f64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn node_count(&self) -> usize {
        self.segments.iter().map(Segment::size).sum()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(SimError::Horizon(self.horizon));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(SimError::Warmup {
                warmup: self.warmup,
                horizon: self.horizon,
            });
        }
        if self.replications == 0 {
            return Err(SimError::NoReplications);
        }
        let nodes = self.node_count();
        if nodes == 0 {
            return Err(SimError::NoNodes);
        }
        if nodes > self.rates.n() {
            return Err(SimError::TooManyNodes {
                nodes,
                n: self.rates.n(),
            });
        }
        Ok(())
    }
}

/// Time-averaged ages over `(warmup, horizon]`, pooled over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub per_node_age: Vec<f64>,
    pub per_node_std_error: Vec<f64>,
    pub system_age: f64,
    /// Standard error of `system_age` across replications; zero with a
    /// single replication.
    pub std_error: f64,
    pub ci_halfwidth: f64,
    pub events_processed: u64,
    pub replications: usize,
    pub horizon: f64,
    pub rng_algorithm: &'static str,
}

impl SimResult {
    pub fn relative_std_error(&self) -> f64 {
        self.std_error / self.system_age
    }
}

/// What happened at an event instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    SourceUpdate,
    SourceDelivery { node: usize },
    Gossip { from: usize, to: usize },
}

/// Static topology of the simulated nodes plus the superposed event rates.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: usize,
    links: Vec<(u32, u32)>,
    source_rate: f64,
    delivery_rate: f64,
    gossip_rate: f64,
    total_rate: f64,
}

impl Network {
    pub fn new(rates: &Rates, segments: &[Segment]) -> Self {
        let mut links = Vec::new();
        let mut offset = 0u32;
        for seg in segments {
            let size = seg.size() as u32;
            let mut undirected: Vec<(u32, u32)> = (0..size.saturating_sub(1))
                .map(|p| (offset + p, offset + p + 1))
                .collect();
            if seg.kind() == SegmentKind::Ring && size >= 2 {
                undirected.push((offset + size - 1, offset));
            }
            for (a, b) in undirected {
                links.push((a, b));
                links.push((b, a));
            }
            offset += size;
        }
        let nodes = offset as usize;
        let source_rate = rates.lambda_s();
        let delivery_rate = rates.source_to_node() * nodes as f64;
        let gossip_rate = rates.gossip() * links.len() as f64;
        Self {
            nodes,
            links,
            source_rate,
            delivery_rate,
            gossip_rate,
            total_rate: source_rate + delivery_rate + gossip_rate,
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn directed_links(&self) -> usize {
        self.links.len()
    }

    /// `λ_s + (nodes)·λ/n + (directed links)·λ/2`.
    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }
}

/// Draws the holding time until the next event and the event itself.
///
/// The holding time is exponential at the total rate. A second uniform,
/// scaled to the total rate, selects the category by cumulative rate and
/// the instance within it uniformly.
pub fn next_event<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> (f64, Event) {
    let u: f64 = rng.gen();
    let dt = -(1.0 - u).ln() / net.total_rate;
    let x = rng.gen::<f64>() * net.total_rate;
    let event = if x < net.source_rate {
        Event::SourceUpdate
    } else if x < net.source_rate + net.delivery_rate {
        let frac = (x - net.source_rate) / net.delivery_rate;
        let node = ((frac * net.nodes as f64) as usize).min(net.nodes - 1);
        Event::SourceDelivery { node }
    } else {
        let frac = (x - net.source_rate - net.delivery_rate) / net.gossip_rate;
        let idx = ((frac * net.links.len() as f64) as usize).min(net.links.len() - 1);
        let (from, to) = net.links[idx];
        Event::Gossip {
            from: from as usize,
            to: to as usize,
        }
    };
    (dt, event)
}

struct Replication {
    per_node: Vec<f64>,
    events: u64,
}

/// Single-threaded event loop for one replication. All nodes start fresh.
fn run_replication<R: Rng>(net: &Network, horizon: f64, warmup: f64, rng: &mut R) -> Replication {
    let m = net.nodes;
    let mut ages = vec![0u64; m];
    let mut area = vec![0.0f64; m];
    let mut since = vec![0.0f64; m];
    let mut warm = warmup == 0.0;
    let mut t = 0.0;
    let mut events = 0u64;

    let flush = |area: &mut [f64], since: &mut [f64], ages: &[u64], i: usize, now: f64| {
        area[i] += ages[i] as f64 * (now - since[i]);
        since[i] = now;
    };

    loop {
        let (dt, event) = next_event(net, rng);
        let next = t + dt;
        if !warm && next > warmup {
            area.iter_mut().for_each(|a| *a = 0.0);
            since.iter_mut().for_each(|s| *s = warmup);
            warm = true;
        }
        if next > horizon {
            break;
        }
        t = next;
        events += 1;
        match event {
            Event::SourceUpdate => {
                for i in 0..m {
                    flush(&mut area, &mut since, &ages, i, t);
                    ages[i] += 1;
                }
            }
            Event::SourceDelivery { node } => {
                if ages[node] != 0 {
                    flush(&mut area, &mut since, &ages, node, t);
                    ages[node] = 0;
                }
            }
            Event::Gossip { from, to } => {
                if ages[from] < ages[to] {
                    flush(&mut area, &mut since, &ages, to, t);
                    ages[to] = ages[from];
                }
            }
        }
    }
    for i in 0..m {
        flush(&mut area, &mut since, &ages, i, horizon);
    }
    let span = horizon - warmup;
    Replication {
        per_node: area.into_iter().map(|a| a / span).collect(),
        events,
    }
}

fn replication_rng(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

pub fn simulate(config: &SimConfig) -> Result<SimResult, SimError> {
    simulate_with(config, Execution::default())
}

/// Runs every replication (in parallel when `exec` allows) and pools them.
pub fn simulate_with(config: &SimConfig, exec: Execution) -> Result<SimResult, SimError> {
    config.validate()?;
    let net = Network::new(&config.rates, &config.segments);
    let reps = par::map_indexed(exec, config.replications, |r| {
        let mut rng = replication_rng(config.seed, r);
        run_replication(&net, config.horizon, config.warmup, &mut rng)
    });
    Ok(pool(&reps, config))
}

fn mean_and_se(values: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.clone().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn pool(reps: &[Replication], config: &SimConfig) -> SimResult {
    let m = reps[0].per_node.len();
    let (per_node_age, per_node_std_error): (Vec<f64>, Vec<f64>) = (0..m)
        .map(|i| mean_and_se(reps.iter().map(move |r| r.per_node[i])))
        .unzip();
    let system_age = per_node_age.iter().sum::<f64>() / m as f64;
    let (_, std_error) = mean_and_se(reps.iter().map(|r| r.per_node.iter().sum::<f64>() / m as f64));
    SimResult {
        per_node_age,
        per_node_std_error,
        system_age,
        std_error,
        ci_halfwidth: Z_95 * std_error,
        events_processed: reps.iter().map(|r| r.events).sum(),
        replications: reps.len(),
        horizon: config.horizon,
        rng_algorithm: RNG_ALGORITHM,
    }
}

/// Doubles the horizon (keeping the warmup fraction) until the relative
/// standard error of the system age is at most `target`, or the horizon would
/// exceed `max_horizon`. Returns the last result either way.
pub fn simulate_to_precision(
    config: &SimConfig,
    target: f64,
    max_horizon: f64,
    exec: Execution,
) -> Result<SimResult, SimError> {
    let fraction = config.warmup / config.horizon;
    let mut cfg = config.clone();
    loop {
        let result = simulate_with(&cfg, exec)?;
        if result.relative_std_error() <= target || cfg.horizon * 2.0 > max_horizon {
            return Ok(result);
        }
        cfg.horizon *= 2.0;
        cfg.warmup = cfg.horizon * fraction;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Rates {
        Rates::unit(n).unwrap()
    }

    #[test]
    fn config_validation() {
        let base = SimConfig::new(unit(4), vec![Segment::ring(4).unwrap()]);
        assert_eq!(base.clone().with_horizon(0.0).validate(), Err(SimError::Horizon(0.0)));
        assert!(matches!(
            base.clone().with_warmup(20_000.0).validate(),
            Err(SimError::Warmup { .. })
        ));
        assert_eq!(
            base.clone().with_replications(0).validate(),
            Err(SimError::NoReplications)
        );
        let big = SimConfig::new(unit(4), vec![Segment::line(5).unwrap()]);
        assert_eq!(big.validate(), Err(SimError::TooManyNodes { nodes: 5, n: 4 }));
        assert_eq!(SimConfig::new(unit(4), vec![]).validate(), Err(SimError::NoNodes));
        let p = Partition::unjammed(6).unwrap();
        assert!(matches!(
            SimConfig::from_partition(unit(4), &p),
            Err(SimError::PartitionMismatch { .. })
        ));
        assert!(simulate(&base.with_horizon(-1.0)).is_err());
    }

    #[test]
    fn topology_link_counts() {
        let r = unit(20);
        let net = Network::new(&r, &[Segment::line(1).unwrap()]);
        assert_eq!(net.directed_links(), 0);
        assert_eq!(net.total_rate(), 1.0 + 1.0 / 20.0);
        let net = Network::new(
            &r,
            &[
                Segment::ring(5).unwrap(),
                Segment::line(5).unwrap(),
                Segment::ring(2).unwrap(),
            ],
        );
        assert_eq!(net.directed_links(), 2 * (5 + 4 + 2));
        assert_eq!(net.nodes(), 12);
    }

    #[test]
    fn single_node_sees_only_source_events() {
        let r = unit(1);
        let net = Network::new(&r, &[Segment::ring(1).unwrap()]);
        assert_eq!(net.total_rate(), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let (dt, e) = next_event(&net, &mut rng);
            assert!(dt >= 0.0);
            assert!(matches!(e, Event::SourceUpdate | Event::SourceDelivery { node: 0 }));
        }
    }

    #[test]
    fn all_links_cut_means_no_gossip() {
        let r = unit(6);
        let net = Network::new(&r, &[Segment::line(1).unwrap(); 6]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            assert!(!matches!(next_event(&net, &mut rng).1, Event::Gossip { .. }));
        }
    }

    #[test]
    fn identical_configs_are_bit_identical() {
        let cfg = SimConfig::from_placement(unit(12), &JammerPlacement::new([0, 5]), SegmentKind::Line)
            .unwrap()
            .with_horizon(500.0)
            .with_replications(4)
            .with_seed(99);
        let a = simulate_with(&cfg, Execution::Parallel).unwrap();
        let b = simulate_with(&cfg, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        let c = simulate(&cfg.with_seed(100)).unwrap();
        assert_ne!(a.per_node_age, c.per_node_age);
    }

    #[test]
    fn result_invariants() {
        let cfg = SimConfig::new(unit(8), vec![Segment::line(8).unwrap()])
            .with_horizon(200.0)
            .with_replications(3);
        let r = simulate(&cfg).unwrap();
        let mean = r.per_node_age.iter().sum::<f64>() / 8.0;
        assert_eq!(r.system_age, mean);
        assert!(r.ci_halfwidth >= 0.0 && r.std_error >= 0.0);
        assert!(r.per_node_age.iter().all(|&a| a >= 0.0));
        assert!(r.events_processed > 0);
        let single = simulate(&cfg.with_replications(1)).unwrap();
        assert_eq!(single.std_error, 0.0);
    }
}
