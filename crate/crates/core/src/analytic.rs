//! Long-term expected version ages on line and ring segments.
//!
//! Every age here comes from the recursion over contiguous node sets: the
//! age of a set `S` is
//!
//! ```text
//! Δ_S = (λ_s + Σ_{links u→S, u∉S} (λ/2)·Δ_{S∪{u}}) / (|S|·λ/n + Σ (λ/2))
//! ```
//!
//! and only ever references sets one node larger, so a bottom-up sweep from
//! the full segment down to singletons is exact. The closed forms for ring
//! nodes and line corners are independent routes to the same numbers and are
//! evaluated in log-space so products over ten thousand terms do not
//! underflow.

use thiserror::Error;

use crate::model::{ModelError, Rates, Segment, SegmentKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("segment of {n0} nodes does not fit in a ring of {n}")]
    SegmentTooLarge { n0: usize, n: usize },
    #[error("segment size must be at least 1")]
    EmptySegment,
    #[error("set starting at node {start} with {size} nodes is not contiguous in {segment}")]
    InvalidSet {
        start: usize,
        size: usize,
        segment: Segment,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `Π_{k=1}^{j} 1/(1 + k/scale)` for `j = 0..=count`, built from a
/// compensated running sum of `ln(1 + k/scale)`.
fn prefix_products(scale: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count + 1);
    out.push(1.0);
    let mut log = CompensatedSum::default();
    for k in 1..=count {
        log.add((k as f64 / scale).ln_1p());
        out.push((-log.value()).exp());
    }
    out
}

/// `Π_{k=1}^{j} 1/(1 + k/n)`. The empty product (`j = 0`) is 1.
pub fn product_term(j: usize, n: usize) -> f64 {
    let log: CompensatedSum = (1..=j).map(|k| (k as f64 / n as f64).ln_1p()).collect();
    (-log.value()).exp()
}

/// `(e^{-j²/n}, e^{-j²/(4n)})`, which bracket [`product_term`] for
/// `1 <= j <= n`.
pub fn gaussian_bounds(j: usize, n: usize) -> (f64, f64) {
    let q = (j as f64).powi(2) / n as f64;
    ((-q).exp(), (-q / 4.0).exp())
}

/// `Σ_{j=1}^{upto} Π_{k=1}^{j} 1/(1 + k/n)`.
pub fn product_sum(upto: usize, n: usize) -> f64 {
    prefix_products(n as f64, upto)[1..]
        .iter()
        .copied()
        .collect::<CompensatedSum>()
        .value()
}

fn check_fits(n0: usize, rates: &Rates) -> Result<(), AnalyticError> {
    if n0 == 0 {
        return Err(AnalyticError::EmptySegment);
    }
    if n0 > rates.n() {
        return Err(AnalyticError::SegmentTooLarge { n0, n: rates.n() });
    }
    Ok(())
}

/// Shared shape of the two closed forms:
/// `prefactor · [Σ_{j=1}^{n0-1} P_j + (scale/n0)·P_{n0-1}]` with
/// `P_j = Π_{k=1}^{j} 1/(1 + k/scale)`.
fn chain_closed_form(n0: usize, scale: f64, prefactor: f64) -> f64 {
    let p = prefix_products(scale, n0 - 1);
    let mut acc: CompensatedSum = p[1..].iter().copied().collect();
    acc.add(scale / n0 as f64 * p[n0 - 1]);
    prefactor * acc.value()
}

/// Age of every node of a mini-ring of `n0` nodes, from the closed form.
pub fn ring_node_age(n0: usize, rates: &Rates) -> Result<f64, AnalyticError> {
    check_fits(n0, rates)?;
    Ok(chain_closed_form(n0, rates.n() as f64, rates.ratio()))
}

/// Ages of contiguous sets on a mini-ring, indexed by set size: element
/// `k - 1` is `Δ_k` for `k = 1..=n0`. By radial symmetry the start node does
/// not matter.
pub fn ring_set_ages(n0: usize, rates: &Rates) -> Result<Vec<f64>, AnalyticError> {
    check_fits(n0, rates)?;
    let (ls, lambda, n) = (rates.lambda_s(), rates.lambda(), rates.n() as f64);
    let mut ages = vec![0.0; n0];
    ages[n0 - 1] = ls / (n0 as f64 * lambda / n);
    for k in (1..n0).rev() {
        // two boundary links, each λ/2, both lead to a set of size k + 1
        ages[k - 1] = (ls + lambda * ages[k]) / (k as f64 * lambda / n + lambda);
    }
    Ok(ages)
}

/// Runs the line recursion from the full segment down to sets of size
/// `stop_k`, returning that layer. Entry `j - 1` of the result is
/// `Δ_{j,stop_k}` for `j = 1..=n0 - stop_k + 1`. Memory is one layer.
fn line_layer(n0: usize, rates: &Rates, stop_k: usize, mut visit: impl FnMut(usize, &[f64])) -> Vec<f64> {
    let (ls, n) = (rates.lambda_s(), rates.n() as f64);
    let (lambda, half) = (rates.lambda(), rates.gossip());
    let mut layer = vec![ls / (n0 as f64 * lambda / n)];
    visit(n0, &layer);
    for k in (stop_k..n0).rev() {
        let source = k as f64 * lambda / n;
        let next: Vec<f64> = (1..=n0 - k + 1)
            .map(|j| {
                let left = (j > 1).then(|| layer[j - 2]);
                let right = (j + k - 1 < n0).then(|| layer[j - 1]);
                match (left, right) {
                    // parenthesised so mirror-image sets round identically
                    (Some(a), Some(b)) => (ls + half * (a + b)) / (source + lambda),
                    (Some(a), None) | (None, Some(a)) => (ls + half * a) / (source + half),
                    (None, None) => unreachable!("only the full segment lacks neighbours"),
                }
            })
            .collect();
        layer = next;
        visit(k, &layer);
    }
    layer
}

/// Per-node ages of a segment together with the rates that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeVector {
    ages: Vec<f64>,
    rates: Rates,
}

impl AgeVector {
    pub fn ages(&self) -> &[f64] {
        &self.ages
    }

    pub fn rates(&self) -> &Rates {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.ages.iter().copied().collect::<CompensatedSum>().value()
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.ages.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.ages.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.ages.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Age of node `i`, 1-based as in the node labels of a line.
    pub fn node(&self, i: usize) -> f64 {
        self.ages[i - 1]
    }
}

/// Per-node ages `Δ_1..Δ_{n0}` of a line segment of `n0` nodes.
pub fn line_ages(n0: usize, rates: &Rates) -> Result<AgeVector, AnalyticError> {
    check_fits(n0, rates)?;
    let ages = line_layer(n0, rates, 1, |_, _| {});
    Ok(AgeVector { ages, rates: *rates })
}

/// Per-node ages of a mini-ring, all equal.
pub fn ring_ages(n0: usize, rates: &Rates) -> Result<AgeVector, AnalyticError> {
    let age = ring_node_age(n0, rates)?;
    Ok(AgeVector {
        ages: vec![age; n0],
        rates: *rates,
    })
}

/// Per-node ages of any segment.
pub fn segment_ages(segment: Segment, rates: &Rates) -> Result<AgeVector, AnalyticError> {
    match segment.kind() {
        SegmentKind::Line => line_ages(segment.size(), rates),
        SegmentKind::Ring => ring_ages(segment.size(), rates),
    }
}

/// Corner-node age of a line from its closed form. A corner only ever
/// hears from one side, so its chain is the ring chain with `n` replaced by
/// `n/2` and the prefactor doubled.
pub fn line_corner_age_closed_form(n0: usize, rates: &Rates) -> Result<f64, AnalyticError> {
    check_fits(n0, rates)?;
    Ok(chain_closed_form(n0, rates.n() as f64 / 2.0, 2.0 * rates.ratio()))
}

/// Sum of ages over a mini-ring of `n0` nodes.
pub fn ring_total_age(n0: usize, rates: &Rates) -> Result<f64, AnalyticError> {
    Ok(n0 as f64 * ring_node_age(n0, rates)?)
}

/// Sum of ages over a line of `n0` nodes.
pub fn line_total_age(n0: usize, rates: &Rates) -> Result<f64, AnalyticError> {
    Ok(line_ages(n0, rates)?.total())
}

pub fn segment_total_age(segment: Segment, rates: &Rates) -> Result<f64, AnalyticError> {
    match segment.kind() {
        SegmentKind::Line => line_total_age(segment.size(), rates),
        SegmentKind::Ring => ring_total_age(segment.size(), rates),
    }
}

/// `k` contiguous nodes starting at node `start` (1-based) of a segment.
/// On a ring the set may wrap past the last node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContiguousSet {
    start: usize,
    size: usize,
    segment: Segment,
}

impl ContiguousSet {
    pub fn new(start: usize, size: usize, segment: Segment) -> Result<Self, AnalyticError> {
        let n0 = segment.size();
        let fits = match segment.kind() {
            SegmentKind::Line => start + size <= n0 + 1,
            SegmentKind::Ring => start <= n0,
        };
        if start == 0 || size == 0 || size > n0 || !fits {
            return Err(AnalyticError::InvalidSet { start, size, segment });
        }
        Ok(Self { start, size, segment })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn segment(&self) -> Segment {
        self.segment
    }
}

/// Age of a contiguous set: the expected minimum age over its members.
pub fn contiguous_set_age(set: ContiguousSet, rates: &Rates) -> Result<f64, AnalyticError> {
    let n0 = set.segment.size();
    check_fits(n0, rates)?;
    Ok(match set.segment.kind() {
        SegmentKind::Ring => ring_set_ages(n0, rates)?[set.size - 1],
        SegmentKind::Line => line_layer(n0, rates, set.size, |_, _| {})[set.start - 1],
    })
}

/// Every `Δ_{j,k}` of a line segment, for exhaustive checks on small lines.
#[derive(Debug, Clone)]
pub struct LineSetTable {
    n0: usize,
    // layers[k - 1][j - 1] = Δ_{j,k}
    layers: Vec<Vec<f64>>,
}

impl LineSetTable {
    pub fn build(n0: usize, rates: &Rates) -> Result<Self, AnalyticError> {
        check_fits(n0, rates)?;
        let mut layers = vec![Vec::new(); n0];
        line_layer(n0, rates, 1, |k, layer| layers[k - 1] = layer.to_vec());
        Ok(Self { n0, layers })
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    /// `Δ_{j,k}`, or `None` when the set runs off the line.
    pub fn get(&self, j: usize, k: usize) -> Option<f64> {
        if j == 0 || k == 0 || j + k > self.n0 + 1 {
            return None;
        }
        Some(self.layers[k - 1][j - 1])
    }
}

/// The three sides of the line/mini-ring comparison for one segment size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    /// Mini-ring node age.
    pub lower: f64,
    /// Oldest node on the line.
    pub line_max: f64,
    /// Twice the mini-ring node age.
    pub upper: f64,
}

impl Sandwich {
    pub fn holds(&self, tol: f64) -> bool {
        self.lower <= self.line_max * (1.0 + tol) && self.line_max <= self.upper * (1.0 + tol)
    }
}

pub fn sandwich_check(n0: usize, rates: &Rates) -> Result<Sandwich, AnalyticError> {
    let ring = ring_node_age(n0, rates)?;
    let line = line_ages(n0, rates)?;
    Ok(Sandwich {
        lower: ring,
        line_max: line.max(),
        upper: 2.0 * ring,
    })
}
