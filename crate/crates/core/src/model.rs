//! Domain types shared by every engine: rates, segments, partitions and
//! jammer placements.
//!
//! Ring nodes are indexed `0..n`. Link `i` joins node `i` and node
//! `(i + 1) % n`, so a placement is just a set of link indices.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("source update rate must be positive and finite, got {0}")]
    SourceRate(f64),
    #[error("gossip rate must be positive and finite, got {0}")]
    GossipRate(f64),
    #[error("ring size must be at least 1")]
    EmptyRing,
    #[error("segment size must be at least 1")]
    EmptySegment,
    #[error("link index {link} out of range for a ring of {n} nodes")]
    LinkOutOfRange { link: usize, n: usize },
    #[error("segment sizes sum to {sum}, expected {n}")]
    SizeMismatch { sum: usize, n: usize },
}

/// The three rates of the system model.
///
/// `lambda_s` is the source self-update rate, `lambda` the aggregate
/// source-to-network rate (also the per-node gossip budget), and `n` the size
/// of the original, unjammed ring. Jamming never changes `n`: a node in a
/// segment of 5 still hears from the source at `lambda / n`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rates {
    lambda_s: f64,
    lambda: f64,
    n: usize,
}

impl Rates {
    pub fn new(lambda_s: f64, lambda: f64, n: usize) -> Result<Self, ModelError> {
        if !(lambda_s.is_finite() && lambda_s > 0.0) {
            return Err(ModelError::SourceRate(lambda_s));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(ModelError::GossipRate(lambda));
        }
        if n == 0 {
            return Err(ModelError::EmptyRing);
        }
        Ok(Self { lambda_s, lambda, n })
    }

    /// `lambda_s = lambda = 1`, the unit-time convention used throughout the
    /// experiments.
    pub fn unit(n: usize) -> Result<Self, ModelError> {
        Self::new(1.0, 1.0, n)
    }

    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `lambda_s / lambda`; every age in the system is linear in this ratio.
    pub fn ratio(&self) -> f64 {
        self.lambda_s / self.lambda
    }

    /// Rate at which the source pushes to any single node.
    pub fn source_to_node(&self) -> f64 {
        self.lambda / self.n as f64
    }

    /// Rate of one directed node-to-neighbour link.
    pub fn gossip(&self) -> f64 {
        self.lambda / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Line,
    Ring,
}

/// A connected group of nodes: a line, or a mini-ring whose end nodes are
/// joined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segment {
    size: usize,
    kind: SegmentKind,
}

impl Segment {
    pub fn new(kind: SegmentKind, size: usize) -> Result<Self, ModelError> {
        if size == 0 {
            return Err(ModelError::EmptySegment);
        }
        Ok(Self { size, kind })
    }

    pub fn line(size: usize) -> Result<Self, ModelError> {
        Self::new(SegmentKind::Line, size)
    }

    pub fn ring(size: usize) -> Result<Self, ModelError> {
        Self::new(SegmentKind::Ring, size)
    }

    pub fn kind(&self) -> SegmentKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Undirected inter-node links inside the segment. A mini-ring of two
    /// nodes keeps both of its links, so the pair gossips at twice the rate of
    /// a two-node line.
    pub fn link_count(&self) -> usize {
        match (self.kind, self.size) {
            (_, 1) => 0,
            (SegmentKind::Line, s) => s - 1,
            (SegmentKind::Ring, s) => s,
        }
    }

    pub fn with_kind(self, kind: SegmentKind) -> Self {
        Self { kind, ..self }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SegmentKind::Line => write!(f, "Line({})", self.size),
            SegmentKind::Ring => write!(f, "Ring({})", self.size),
        }
    }
}

/// A ring of `n` nodes broken into segments whose sizes sum to `n`.
///
/// Equality ignores segment order: two partitions are equal when their
/// multisets of segments agree.
#[derive(Debug, Clone)]
pub struct Partition {
    segments: Vec<Segment>,
    n: usize,
}

impl Partition {
    pub fn new(segments: Vec<Segment>, n: usize) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::EmptyRing);
        }
        let sum: usize = segments.iter().map(Segment::size).sum();
        if sum != n {
            return Err(ModelError::SizeMismatch { sum, n });
        }
        Ok(Self { segments, n })
    }

    /// The ring with no jammers at all.
    pub fn unjammed(n: usize) -> Result<Self, ModelError> {
        Self::new(vec![Segment::ring(n)?], n)
    }

    /// Cuts the ring at every link of `placement`.
    ///
    /// Segment `i` holds the nodes strictly after cut `i` up to and including
    /// the node before cut `i + 1` (cyclically), so its size is the gap
    /// between consecutive cut indices.
    pub fn from_placement(placement: &JammerPlacement, n: usize) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::EmptyRing);
        }
        placement.validate(n)?;
        let cuts: Vec<usize> = placement.cut_links.iter().copied().collect();
        if cuts.is_empty() {
            return Self::unjammed(n);
        }
        let segments = cuts
            .iter()
            .enumerate()
            .map(|(i, &cut)| {
                let gap = match cuts.get(i + 1) {
                    Some(&next) => next - cut,
                    None => cuts[0] + n - cut,
                };
                Segment::line(gap)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(segments, n)
    }

    /// [`Partition::from_placement`] with every cut segment converted to
    /// `kind`. With no cuts the ring stays whole.
    pub fn from_placement_as(placement: &JammerPlacement, n: usize, kind: SegmentKind) -> Result<Self, ModelError> {
        let p = Self::from_placement(placement, n)?;
        Ok(if placement.is_empty() { p } else { p.with_kind(kind) })
    }

    /// The alternate model in which every segment has its end nodes joined.
    pub fn to_miniring_model(&self) -> Self {
        self.with_kind(SegmentKind::Ring)
    }

    /// Every segment converted to `kind`, sizes untouched.
    pub fn with_kind(&self, kind: SegmentKind) -> Self {
        Self {
            segments: self.segments.iter().map(|s| s.with_kind(kind)).collect(),
            n: self.n,
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Segment sizes in ascending order.
    pub fn sorted_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.segments.iter().map(Segment::size).collect();
        sizes.sort_unstable();
        sizes
    }

    fn canonical(&self) -> Vec<Segment> {
        let mut segs = self.segments.clone();
        segs.sort_unstable();
        segs
    }
}

impl PartialEq for Partition {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.canonical() == other.canonical()
    }
}

impl Eq for Partition {}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "]")
    }
}

/// Set of distinct cut links. Two jammers on the same link count once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JammerPlacement {
    cut_links: BTreeSet<usize>,
}

impl JammerPlacement {
    pub fn new<I: IntoIterator<Item = usize>>(links: I) -> Self {
        Self {
            cut_links: links.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn validate(&self, n: usize) -> Result<(), ModelError> {
        match self.cut_links.iter().next_back() {
            Some(&link) if link >= n => Err(ModelError::LinkOutOfRange { link, n }),
            _ => Ok(()),
        }
    }

    pub fn cut_links(&self) -> impl Iterator<Item = usize> + '_ {
        self.cut_links.iter().copied()
    }

    pub fn is_cut(&self, link: usize) -> bool {
        self.cut_links.contains(&link)
    }

    /// Number of distinct jammed links.
    pub fn len(&self) -> usize {
        self.cut_links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cut_links.is_empty()
    }

    /// Same placement shifted `by` positions around a ring of `n` nodes.
    pub fn rotated(&self, by: usize, n: usize) -> Self {
        Self::new(self.cut_links.iter().map(|&l| (l + by) % n))
    }

    /// This placement with one more link cut.
    pub fn with_cut(&self, link: usize) -> Self {
        let mut cut_links = self.cut_links.clone();
        cut_links.insert(link);
        Self { cut_links }
    }
}

/// Free-function form of [`Partition::from_placement`].
pub fn partition_from_placement(placement: &JammerPlacement, n: usize) -> Result<Partition, ModelError> {
    Partition::from_placement(placement, n)
}

/// Free-function form of [`Partition::to_miniring_model`].
pub fn to_miniring_model(p: &Partition) -> Partition {
    p.to_miniring_model()
}
