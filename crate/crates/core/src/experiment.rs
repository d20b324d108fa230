//! Scaling sweeps over ring size, log-log exponent fits, and CSV / SVG
//! output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use plotters::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, Partition, Rates, SegmentKind};
use crate::par::{self, Execution};
use crate::placement::{self, PlacementKind};
use crate::sim::{self, SimConfig};

/// Which system a partition is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// The jammed ring as it is: isolated lines.
    Line,
    /// Every line closed into a mini-ring.
    Miniring,
}

impl Model {
    pub const ALL: [Model; 2] = [Self::Line, Self::Miniring];

    pub fn segment_kind(self) -> SegmentKind {
        match self {
            Self::Line => SegmentKind::Line,
            Self::Miniring => SegmentKind::Ring,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Line => "line",
            Self::Miniring => "miniring",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Analytic,
    Simulate,
}

impl Engine {
    pub const ALL: [Engine; 2] = [Self::Analytic, Self::Simulate];

    pub fn name(self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::Simulate => "simulate",
        }
    }
}

macro_rules! name_parsing {
    ($ty:ty, $($text:literal => $variant:expr),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($variant),)+
                    other => Err(format!("unknown {} '{other}'", stringify!($ty).to_ascii_lowercase())),
                }
            }
        }
    };
}

name_parsing!(Model, "line" => Model::Line, "miniring" => Model::Miniring);
name_parsing!(Engine, "analytic" => Engine::Analytic, "simulate" => Engine::Simulate);

/// Simulation budget for `simulate` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub horizon: f64,
    /// Defaults to 10% of the horizon.
    pub warmup: Option<f64>,
    pub replications: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            horizon: SimConfig::DEFAULT_HORIZON,
            warmup: None,
            replications: SimConfig::DEFAULT_REPLICATIONS,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("n_values must be non-empty")]
    NoSizes,
    #[error("n_values must be positive and strictly ascending")]
    UnorderedSizes,
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("c must be positive and finite, got {0}")]
    Scale(f64),
    #[error("at least one {0} must be selected")]
    EmptySelection(&'static str),
    #[error(transparent)]
    Rates(#[from] ModelError),
}

/// A grid of sweep cells: every `n` × placement × model × engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n_values: Vec<usize>,
    pub alpha: f64,
    pub c: f64,
    pub placements: Vec<PlacementKind>,
    pub models: Vec<Model>,
    pub engines: Vec<Engine>,
    pub lambda_s: f64,
    pub lambda: f64,
    pub seed: u64,
    pub sim: SimSettings,
}

impl SweepSpec {
    /// Analytic sweep over every placement and model with unit rates.
    pub fn analytic(n_values: Vec<usize>, alpha: f64, c: f64) -> Self {
        Self {
            n_values,
            alpha,
            c,
            placements: PlacementKind::ALL.to_vec(),
            models: Model::ALL.to_vec(),
            engines: vec![Engine::Analytic],
            lambda_s: 1.0,
            lambda: 1.0,
            seed: 0,
            sim: SimSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.n_values.is_empty() {
            return Err(SweepError::NoSizes);
        }
        if self.n_values[0] == 0 || self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SweepError::UnorderedSizes);
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SweepError::Alpha(self.alpha));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(SweepError::Scale(self.c));
        }
        if self.placements.is_empty() {
            return Err(SweepError::EmptySelection("placement"));
        }
        if self.models.is_empty() {
            return Err(SweepError::EmptySelection("model"));
        }
        if self.engines.is_empty() {
            return Err(SweepError::EmptySelection("engine"));
        }
        Rates::new(self.lambda_s, self.lambda, 1)?;
        Ok(())
    }

    fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &n in &self.n_values {
            for &placement in &self.placements {
                for &model in &self.models {
                    for &engine in &self.engines {
                        cells.push(Cell {
                            n,
                            placement,
                            model,
                            engine,
                        });
                    }
                }
            }
        }
        cells
    }
}

/// Powers of two in `[n_min, n_max]`.
pub fn powers_of_two(n_min: usize, n_max: usize) -> Vec<usize> {
    (0..usize::BITS)
        .map(|e| 1usize << e)
        .skip_while(|&n| n < n_min)
        .take_while(|&n| n <= n_max)
        .collect()
}

/// `round(c·n^α)` (halves away from zero), clamped to `[0, n]`. A single
/// node has no inter-node link to cut, so `n = 1` always gets zero.
pub fn jammer_count(n: usize, alpha: f64, c: f64) -> usize {
    if n <= 1 {
        return 0;
    }
    let raw = (c * (n as f64).powf(alpha)).round();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(n)
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub n: usize,
    pub jammers: usize,
    pub alpha: f64,
    pub placement: PlacementKind,
    pub model: Model,
    pub engine: Engine,
    pub system_age: f64,
    /// 95% half-width; simulation rows only.
    pub ci_halfwidth: Option<f64>,
}

impl ScalingRecord {
    pub fn series(&self) -> SeriesKey {
        SeriesKey {
            placement: self.placement,
            model: self.model,
            engine: self.engine,
        }
    }

    fn sort_key(&self) -> (usize, SeriesKey) {
        (self.n, self.series())
    }
}

/// The (placement, model, engine) triple that identifies a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeriesKey {
    pub placement: PlacementKind,
    pub model: Model,
    pub engine: Engine,
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.placement, self.model, self.engine)
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    n: usize,
    placement: PlacementKind,
    model: Model,
    engine: Engine,
}

/// A cell that could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub n: usize,
    pub series: SeriesKey,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutcome {
    /// Sorted by `n`, then placement, model and engine.
    pub records: Vec<ScalingRecord>,
    pub failures: Vec<CellFailure>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome, SweepError> {
    run_sweep_with(spec, Execution::default())
}

/// Evaluates every cell of `spec`. Cells run in parallel when `exec` allows;
/// a failing cell is reported in `failures` and does not stop the sweep.
pub fn run_sweep_with(spec: &SweepSpec, exec: Execution) -> Result<SweepOutcome, SweepError> {
    spec.validate()?;
    let cells = spec.cells();
    let results = par::map_slice(exec, &cells, |cell| evaluate_cell(spec, cell).map_err(|e| (*cell, e)));
    let mut outcome = SweepOutcome::default();
    for r in results {
        match r {
            Ok(rec) => outcome.records.push(rec),
            Err((cell, message)) => outcome.failures.push(CellFailure {
                n: cell.n,
                series: SeriesKey {
                    placement: cell.placement,
                    model: cell.model,
                    engine: cell.engine,
                },
                message,
            }),
        }
    }
    outcome.records.sort_by_key(ScalingRecord::sort_key);
    outcome.failures.sort_by_key(|f| (f.n, f.series));
    Ok(outcome)
}

fn evaluate_cell(spec: &SweepSpec, cell: &Cell) -> Result<ScalingRecord, String> {
    let rates = Rates::new(spec.lambda_s, spec.lambda, cell.n).map_err(|e| e.to_string())?;
    let jammers = jammer_count(cell.n, spec.alpha, spec.c);
    let cuts = placement::place(cell.placement.with_seed(spec.seed), cell.n, jammers).map_err(|e| e.to_string())?;
    let partition =
        Partition::from_placement_as(&cuts, cell.n, cell.model.segment_kind()).map_err(|e| e.to_string())?;
    let (system_age, ci_halfwidth) = match cell.engine {
        Engine::Analytic => (
            placement::system_age(&partition, &rates).map_err(|e| e.to_string())?,
            None,
        ),
        Engine::Simulate => {
            let mut config = SimConfig::from_partition(rates, &partition)
                .map_err(|e| e.to_string())?
                .with_horizon(spec.sim.horizon)
                .with_replications(spec.sim.replications)
                .with_seed(spec.seed);
            if let Some(w) = spec.sim.warmup {
                config = config.with_warmup(w);
            }
            let result = sim::simulate(&config).map_err(|e| e.to_string())?;
            (result.system_age, Some(result.ci_halfwidth))
        }
    };
    Ok(ScalingRecord {
        n: cell.n,
        jammers,
        alpha: spec.alpha,
        placement: cell.placement,
        model: cell.model,
        engine: cell.engine,
        system_age,
        ci_halfwidth,
    })
}

/// Groups records into curves, each sorted by `n`.
pub fn group_series(records: &[ScalingRecord]) -> BTreeMap<SeriesKey, Vec<ScalingRecord>> {
    let mut out: BTreeMap<SeriesKey, Vec<ScalingRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.series()).or_default().push(r.clone());
    }
    for v in out.values_mut() {
        v.sort_by_key(|r| r.n);
    }
    out
}

/// Records whose `n` lies within a factor of ten of the largest `n`.
pub fn largest_decade(records: &[ScalingRecord]) -> Vec<ScalingRecord> {
    let Some(n_max) = records.iter().map(|r| r.n).max() else {
        return Vec::new();
    };
    records
        .iter()
        .filter(|r| r.n as f64 * 10.0 >= n_max as f64)
        .cloned()
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 4 points for an exponent fit, got {0}")]
    TooFewPoints(usize),
    #[error("records mix series {0} and {1}")]
    MixedSeries(SeriesKey, SeriesKey),
    #[error("log-log fit needs positive coordinates, got ({0}, {1})")]
    NonPositive(f64, f64),
    #[error("all points share the same n")]
    Degenerate,
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 4;

/// Fits `ln y = slope·ln x + intercept` over raw points.
pub fn fit_log_log(points: &[(f64, f64)]) -> Result<ExponentFit, FitError> {
    if points.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(FitError::NonPositive(x, y));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::Degenerate);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ExponentFit {
        slope,
        intercept: my - slope * mx,
        r2,
        points: logs.len(),
    })
}

/// Scaling exponent of one series: slope of `ln(system_age)` against `ln n`
/// over all supplied records. Use [`largest_decade`] first to restrict the
/// fit to the asymptotic end of a sweep.
pub fn fit_exponent(records: &[ScalingRecord]) -> Result<ExponentFit, FitError> {
    if records.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints(records.len()));
    }
    let first = records[0].series();
    if let Some(other) = records.iter().map(ScalingRecord::series).find(|s| *s != first) {
        return Err(FitError::MixedSeries(first, other));
    }
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.n as f64, r.system_age)).collect();
    fit_log_log(&points)
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("plot {path}: {message}")]
    Plot { path: PathBuf, message: String },
}

/// Serializes records as CSV with a header row; an empty slice still
/// yields the header.
pub fn write_csv_to<W: Write>(records: &[ScalingRecord], out: W) -> Result<(), EmitError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "n",
        "jammers",
        "alpha",
        "placement",
        "model",
        "engine",
        "system_age",
        "ci_halfwidth",
    ])?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_csv(records: &[ScalingRecord], path: &Path) -> Result<(), EmitError> {
    let file = File::create(path).map_err(|source| EmitError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv_to(records, io::BufWriter::new(file))
}

pub fn read_csv(path: &Path) -> Result<Vec<ScalingRecord>, EmitError> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(EmitError::from)).collect()
}

/// Renders age against `n` on log-log axes, one line per series, as SVG.
/// The picture is drawn from the records alone.
pub fn write_plot(records: &[ScalingRecord], path: &Path, title: &str) -> Result<(), EmitError> {
    let plot_err = |e: &dyn fmt::Display| EmitError::Plot {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let series = group_series(records);
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    for r in records {
        x_lo = x_lo.min(r.n as f64);
        x_hi = x_hi.max(r.n as f64);
        y_lo = y_lo.min(r.system_age);
        y_hi = y_hi.max(r.system_age);
    }
    if records.is_empty() {
        (x_lo, x_hi, y_lo, y_hi) = (1.0, 10.0, 1.0, 10.0);
    }
    let x_range = (x_lo / 1.2)..(x_hi * 1.2);
    let y_range = (y_lo / 1.2)..(y_hi * 1.2);

    let root = SVGBackend::new(path, (900, 640)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(48)
        .y_label_area_size(64)
        .build_cartesian_2d(x_range.log_scale(), y_range.log_scale())
        .map_err(|e| plot_err(&e))?;
    chart
        .configure_mesh()
        .x_desc("n")
        .y_desc("average version age")
        .draw()
        .map_err(|e| plot_err(&e))?;

    for (idx, (key, rows)) in series.iter().enumerate() {
        let color = Palette99::pick(idx).to_rgba();
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.system_age)).collect();
        let style = match key.model {
            Model::Line => color.stroke_width(2),
            Model::Miniring => color.stroke_width(1),
        };
        chart
            .draw_series(LineSeries::new(pts.clone(), style))
            .map_err(|e| plot_err(&e))?
            .label(key.to_string())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
        chart
            .draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled())))
            .map_err(|e| plot_err(&e))?;
    }
    if !series.is_empty() {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .position(SeriesLabelPosition::UpperLeft)
            .draw()
            .map_err(|e| plot_err(&e))?;
    }
    root.present().map_err(|e| plot_err(&e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(n: usize, age: f64) -> ScalingRecord {
        ScalingRecord {
            n,
            jammers: 0,
            alpha: 0.5,
            placement: PlacementKind::Equidistant,
            model: Model::Miniring,
            engine: Engine::Analytic,
            system_age: age,
            ci_halfwidth: None,
        }
    }

    #[test]
    fn jammer_rounding() {
        assert_eq!(jammer_count(1, 0.3, 1.0), 0);
        assert_eq!(jammer_count(64, 0.3, 1.0), 3); // 64^0.3 = 3.48
        assert_eq!(jammer_count(128, 0.3, 1.0), 4); // 4.29
        assert_eq!(jammer_count(16, 0.5, 1.0), 4);
        assert_eq!(jammer_count(10, 1.0, 5.0), 10);
        assert_eq!(jammer_count(100, 0.0, 0.2), 0);
    }

    #[test]
    fn pow2_grid() {
        assert_eq!(powers_of_two(64, 1000), vec![64, 128, 256, 512]);
        assert_eq!(powers_of_two(3, 3), Vec::<usize>::new());
        assert_eq!(powers_of_two(1, 4), vec![1, 2, 4]);
    }

    #[test]
    fn spec_validation() {
        let ok = SweepSpec::analytic(vec![8, 16], 0.5, 1.0);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.n_values = vec![16, 8];
        assert_eq!(bad.validate(), Err(SweepError::UnorderedSizes));
        let mut bad = ok.clone();
        bad.alpha = 1.5;
        assert_eq!(bad.validate(), Err(SweepError::Alpha(1.5)));
        let mut bad = ok.clone();
        bad.engines.clear();
        assert_eq!(bad.validate(), Err(SweepError::EmptySelection("engine")));
        let mut bad = ok;
        bad.n_values.clear();
        assert_eq!(bad.validate(), Err(SweepError::NoSizes));
    }

    #[test]
    fn single_node_cell() {
        let out = run_sweep(&SweepSpec::analytic(vec![1], 0.7, 1.0)).unwrap();
        assert_eq!(out.records.len(), 6);
        for r in &out.records {
            assert_eq!(r.jammers, 0);
            assert_eq!(r.system_age, 1.0);
        }
    }

    #[test]
    fn sweep_rows_are_sorted_and_complete() {
        let out = run_sweep(&SweepSpec::analytic(vec![16, 32, 64], 0.5, 1.0)).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.records.len(), 3 * 3 * 2);
        assert!(out.records.windows(2).all(|w| w[0].sort_key() < w[1].sort_key()));
    }

    #[test]
    fn linear_fit_is_exact() {
        let recs: Vec<_> = [2usize, 4, 8, 16, 32].iter().map(|&n| rec(n, n as f64)).collect();
        let fit = fit_exponent(&recs).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let recs: Vec<_> = [2usize, 4, 8].iter().map(|&n| rec(n, 1.0)).collect();
        assert_eq!(fit_exponent(&recs), Err(FitError::TooFewPoints(3)));
        let mut recs: Vec<_> = [2usize, 4, 8, 16].iter().map(|&n| rec(n, 1.0)).collect();
        recs[3].model = Model::Line;
        assert!(matches!(fit_exponent(&recs), Err(FitError::MixedSeries(..))));
        assert!(matches!(
            fit_log_log(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)]),
            Err(FitError::NonPositive(..))
        ));
        assert_eq!(fit_log_log(&[(2.0, 1.0); 4]), Err(FitError::Degenerate));
    }

    #[test]
    fn decade_window() {
        let recs: Vec<_> = [64usize, 128, 2048, 4096, 8192, 16384]
            .iter()
            .map(|&n| rec(n, 1.0))
            .collect();
        let ns: Vec<usize> = largest_decade(&recs).iter().map(|r| r.n).collect();
        assert_eq!(ns, vec![2048, 4096, 8192, 16384]);
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv_to(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "n,jammers,alpha,placement,model,engine,system_age,ci_halfwidth\n"
        );
    }

    #[test]
    fn parse_names() {
        assert_eq!("MiniRing".parse::<Model>().unwrap(), Model::Miniring);
        assert_eq!("simulate".parse::<Engine>().unwrap(), Engine::Simulate);
        assert!("both".parse::<Engine>().is_err());
    }
}
