//! Trigger-time statistics: inter-event intervals binned by changing speed
//! and intensity, histograms, first-gap detection, inverse-Gaussian fits and
//! the gap-times-speed product check.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use thiserror::Error;

use crate::simulator::EventRecord;
use crate::stimulus::LumaTrace;

/// Histogram resolution used for gap measurements.
pub const DEFAULT_BIN_WIDTH: f64 = 0.5e-3;
/// Bins at or below this fraction of the peak count count as empty.
pub const DEFAULT_FLOOR_FRACTION: f64 = 0.02;
pub const DEFAULT_MU_CENTERS: [f64; 6] = [50.0, 100.0, 200.0, 300.0, 400.0, 500.0];
pub const DEFAULT_L_CENTERS: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 50.0];
pub const DEFAULT_CELL_HALF_WIDTH: f64 = 0.1;

/// Values this close (in bin widths) to a bin edge are snapped onto it, so
/// decimal round-off cannot push a sample into the bin below.
const EDGE_SNAP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("bin edges must be strictly increasing (index {0})")]
    NonMonotoneEdges(usize),
    #[error("need at least {needed} edges/centers, got {got}")]
    TooFewEdges { needed: usize, got: usize },
    #[error("cells {0} and {1} overlap")]
    OverlappingCells(usize, usize),
    #[error("cell half width must lie in (0, 1), got {0}")]
    BadHalfWidth(f64),
    #[error("bin width must be positive, got {0}")]
    BadBinWidth(f64),
    #[error("floor fraction must lie in [0, 1), got {0}")]
    BadFloorFraction(f64),
    #[error("no samples to histogram")]
    EmptySamples,
    #[error("histogram has no counts")]
    EmptyHistogram,
    #[error("sample {index} = {value} is not a positive finite interval")]
    BadSample { index: usize, value: f64 },
    #[error("fit needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {index} = {value} is not above the shift {shift}")]
    SampleBelowShift {
        index: usize,
        value: f64,
        shift: f64,
    },
    #[error("no cell has a positive gap")]
    NoPositiveGaps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalSample {
    /// Time between two consecutive events at one pixel.
    pub dt: f64,
    /// Secant changing speed of the light over the interval.
    pub mu: f64,
    /// Mean intensity over the interval.
    pub l_avg: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalSet {
    pub samples: Vec<IntervalSample>,
    /// Event pairs outside the stimulus time range or with `dt <= 0`.
    pub skipped: usize,
}

/// Intervals of one pixel's time-ordered events against its trace.
pub fn pixel_intervals(times: &[f64], trace: &LumaTrace) -> IntervalSet {
    let mut out = IntervalSet::default();
    for w in times.windows(2) {
        let (t1, t2) = (w[0], w[1]);
        let dt = t2 - t1;
        let (Some(l1), Some(l2), true) = (trace.eval(t1), trace.eval(t2), dt > 0.0) else {
            out.skipped += 1;
            continue;
        };
        let Some(l_avg) = trace.mean_over(t1, t2) else {
            out.skipped += 1;
            continue;
        };
        out.samples.push(IntervalSample {
            dt,
            mu: (l2 - l1) / dt,
            l_avg,
        });
    }
    out
}

/// Splits a merged stream by pixel and collects every pixel's intervals.
/// Pixels with no trace count all their pairs as skipped.
pub fn intervals_from_events<'a, F>(events: &[EventRecord], trace_for: F) -> IntervalSet
where
    F: Fn(u32, u32) -> Option<&'a LumaTrace>,
{
    let mut by_pixel: BTreeMap<(u32, u32), Vec<f64>> = BTreeMap::new();
    for e in events {
        by_pixel.entry((e.y, e.x)).or_default().push(e.t);
    }
    let mut out = IntervalSet::default();
    for ((y, x), times) in by_pixel {
        match trace_for(x, y) {
            Some(trace) => {
                let part = pixel_intervals(&times, trace);
                out.samples.extend(part.samples);
                out.skipped += part.skipped;
            }
            None => out.skipped += times.len().saturating_sub(1),
        }
    }
    out
}

/// Half-open cells `[lo, hi)` along one axis, each with a display label.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAxis {
    bins: Vec<(f64, f64)>,
    labels: Vec<f64>,
}

impl CellAxis {
    /// Contiguous cells between consecutive edges, labelled by midpoint.
    pub fn from_edges(edges: &[f64]) -> Result<Self, AnalysisError> {
        if edges.len() < 2 {
            return Err(AnalysisError::TooFewEdges {
                needed: 2,
                got: edges.len(),
            });
        }
        for i in 1..edges.len() {
            if !(edges[i] > edges[i - 1]) {
                return Err(AnalysisError::NonMonotoneEdges(i));
            }
        }
        let bins: Vec<_> = edges.windows(2).map(|w| (w[0], w[1])).collect();
        let labels = bins.iter().map(|&(a, b)| 0.5 * (a + b)).collect();
        Ok(Self { bins, labels })
    }

    /// Cells `[c (1 - h), c (1 + h))` around each center.
    pub fn from_centers(centers: &[f64], half_width: f64) -> Result<Self, AnalysisError> {
        if centers.is_empty() {
            return Err(AnalysisError::TooFewEdges { needed: 1, got: 0 });
        }
        if !(half_width > 0.0 && half_width < 1.0) {
            return Err(AnalysisError::BadHalfWidth(half_width));
        }
        for i in 1..centers.len() {
            if !(centers[i] > centers[i - 1]) {
                return Err(AnalysisError::NonMonotoneEdges(i));
            }
        }
        let bins: Vec<_> = centers
            .iter()
            .map(|&c| (c * (1.0 - half_width), c * (1.0 + half_width)))
            .collect();
        for i in 1..bins.len() {
            if bins[i].0 < bins[i - 1].1 {
                return Err(AnalysisError::OverlappingCells(i - 1, i));
            }
        }
        Ok(Self {
            bins,
            labels: centers.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        self.bins[i]
    }

    pub fn locate(&self, v: f64) -> Option<usize> {
        let i = self.bins.partition_point(|&(lo, _)| lo <= v);
        let i = i.checked_sub(1)?;
        let (lo, hi) = self.bins[i];
        (v >= lo && v < hi).then_some(i)
    }
}

/// Samples grouped into a `mu x L` grid of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSamples {
    n_l: usize,
    cells: Vec<Vec<IntervalSample>>,
    pub rejected: usize,
}

impl BinnedSamples {
    pub fn cell(&self, i_mu: usize, i_l: usize) -> &[IntervalSample] {
        &self.cells[i_mu * self.n_l + i_l]
    }

    pub fn assigned(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    /// Non-empty cells in `(i_mu, i_l)` order.
    pub fn populated(&self) -> impl Iterator<Item = ((usize, usize), &[IntervalSample])> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_empty())
            .map(move |(k, c)| ((k / self.n_l, k % self.n_l), c.as_slice()))
    }
}

/// Cells are keyed on the absolute speed; polarity is not distinguished.
pub fn bin_samples(
    samples: &[IntervalSample],
    mu_axis: &CellAxis,
    l_axis: &CellAxis,
) -> BinnedSamples {
    let mut out = BinnedSamples {
        n_l: l_axis.len(),
        cells: vec![Vec::new(); mu_axis.len() * l_axis.len()],
        rejected: 0,
    };
    for s in samples {
        match (mu_axis.locate(s.mu.abs()), l_axis.locate(s.l_avg)) {
            (Some(i), Some(j)) => out.cells[i * out.n_l + j].push(*s),
            _ => out.rejected += 1,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerTimeHistogram {
    pub bin_width: f64,
    pub origin: f64,
    pub counts: Vec<u64>,
    pub mu_bin: Option<f64>,
    pub l_bin: Option<f64>,
}

impl TriggerTimeHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn peak(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn bin_of(&self, x: f64) -> usize {
        bin_index(x - self.origin, self.bin_width)
    }
}

fn bin_index(x: f64, width: f64) -> usize {
    let q = x / width;
    let r = q.round();
    if (q - r).abs() <= EDGE_SNAP {
        r as usize
    } else {
        q.floor() as usize
    }
}

pub fn build_histogram(
    samples: &[f64],
    bin_width: f64,
) -> Result<TriggerTimeHistogram, AnalysisError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(AnalysisError::BadBinWidth(bin_width));
    }
    if samples.is_empty() {
        return Err(AnalysisError::EmptySamples);
    }
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
    {
        return Err(AnalysisError::BadSample { index, value });
    }
    let max = samples.iter().copied().fold(0.0, f64::max);
    let mut counts = vec![0u64; bin_index(max, bin_width) + 1];
    for &x in samples {
        counts[bin_index(x, bin_width)] += 1;
    }
    Ok(TriggerTimeHistogram {
        bin_width,
        origin: 0.0,
        counts,
        mu_bin: None,
        l_bin: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub start: f64,
    pub length: f64,
}

impl Gap {
    pub fn end(&self) -> f64 {
        self.start + self.length
    }
}

/// Leading run of near-empty bins: every bin from the origin whose count is
/// at most `floor_fraction * peak`, up to the first bin above that floor.
pub fn detect_gap(hist: &TriggerTimeHistogram, floor_fraction: f64) -> Result<Gap, AnalysisError> {
    if !(0.0..1.0).contains(&floor_fraction) {
        return Err(AnalysisError::BadFloorFraction(floor_fraction));
    }
    let peak = hist.peak();
    if peak == 0 {
        return Err(AnalysisError::EmptyHistogram);
    }
    let floor = floor_fraction * peak as f64;
    let run = hist
        .counts
        .iter()
        .take_while(|&&c| c as f64 <= floor)
        .count();
    Ok(Gap {
        start: hist.origin,
        length: run as f64 * hist.bin_width,
    })
}

/// Maximum-likelihood inverse-Gaussian fit of `x - shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IGFit {
    pub mean: f64,
    /// `+inf` when every shifted sample is identical.
    pub shape: f64,
    pub log_likelihood: f64,
    pub shift: f64,
}

impl IGFit {
    pub fn is_degenerate(&self) -> bool {
        self.shape.is_infinite()
    }

    /// Density at `x` (in unshifted time).
    pub fn pdf(&self, x: f64) -> f64 {
        let y = x - self.shift;
        if !(y > 0.0) || self.is_degenerate() {
            return 0.0;
        }
        ig_log_pdf(y, self.mean, self.shape).exp()
    }
}

fn ig_log_pdf(y: f64, mean: f64, shape: f64) -> f64 {
    0.5 * (shape / (2.0 * PI * y.powi(3))).ln()
        - shape * (y - mean).powi(2) / (2.0 * mean * mean * y)
}

pub fn fit_inverse_gaussian(samples: &[f64], shift: f64) -> Result<IGFit, AnalysisError> {
    if samples.len() < 2 {
        return Err(AnalysisError::TooFewSamples(samples.len()));
    }
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > shift && v.is_finite()))
    {
        return Err(AnalysisError::SampleBelowShift {
            index,
            value,
            shift,
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|x| x - shift).sum::<f64>() / n;
    let inv_sum: f64 = samples.iter().map(|x| 1.0 / (x - shift) - 1.0 / mean).sum();
    // Jensen gives inv_sum >= 0; anything at round-off level means all samples coincide.
    if inv_sum <= 1e-12 * n / mean {
        return Ok(IGFit {
            mean,
            shape: f64::INFINITY,
            log_likelihood: f64::INFINITY,
            shift,
        });
    }
    let shape = n / inv_sum;
    let log_likelihood = samples
        .iter()
        .map(|x| ig_log_pdf(x - shift, mean, shape))
        .sum();
    Ok(IGFit {
        mean,
        shape,
        log_likelihood,
        shift,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub mu_bin: f64,
    pub l_bin: f64,
    pub n_samples: usize,
    pub gap_start: f64,
    pub gap_length: f64,
    pub product: f64,
    /// Fit of the raw intervals.
    pub ig_raw: Option<IGFit>,
    /// Fit of the intervals beyond the gap, shifted by the gap end.
    pub ig_gap: Option<IGFit>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscontinuityReport {
    pub cells: Vec<CellRecord>,
}

impl DiscontinuityReport {
    /// Report rows from literal `(mu, l, gap)` measurements.
    pub fn from_measurements(rows: &[(f64, f64, f64)]) -> Self {
        Self {
            cells: rows
                .iter()
                .map(|&(mu, l, gap)| CellRecord {
                    mu_bin: mu,
                    l_bin: l,
                    n_samples: 0,
                    gap_start: 0.0,
                    gap_length: gap,
                    product: gap * mu,
                    ig_raw: None,
                    ig_gap: None,
                })
                .collect(),
        }
    }

    pub fn gap_for(&self, mu: f64, l: f64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.mu_bin == mu && c.l_bin == l)
            .map(|c| c.gap_length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductSummary {
    pub mean_product: f64,
    /// `max |p - mean| / mean` over the cells.
    pub max_rel_deviation: f64,
    pub n_cells: usize,
}

/// Gap-times-speed product statistics over cells with a positive gap.
pub fn product_check(report: &DiscontinuityReport) -> Result<ProductSummary, AnalysisError> {
    let products: Vec<f64> = report
        .cells
        .iter()
        .filter(|c| c.gap_length > 0.0)
        .map(|c| c.gap_length * c.mu_bin)
        .collect();
    if products.is_empty() {
        return Err(AnalysisError::NoPositiveGaps);
    }
    let mean = products.iter().sum::<f64>() / products.len() as f64;
    let max_rel_deviation = products
        .iter()
        .map(|p| (p - mean).abs() / mean)
        .fold(0.0, f64::max);
    Ok(ProductSummary {
        mean_product: mean,
        max_rel_deviation,
        n_cells: products.len(),
    })
}

/// Per-cell histogram, gap and fits for every populated cell.
pub fn analyze_cells(
    binned: &BinnedSamples,
    mu_axis: &CellAxis,
    l_axis: &CellAxis,
    bin_width: f64,
    floor_fraction: f64,
) -> Result<(DiscontinuityReport, Vec<TriggerTimeHistogram>), AnalysisError> {
    let mut report = DiscontinuityReport::default();
    let mut hists = Vec::new();
    for ((i, j), cell) in binned.populated() {
        let (mu, l) = (mu_axis.labels()[i], l_axis.labels()[j]);
        let dts: Vec<f64> = cell.iter().map(|s| s.dt).collect();
        let mut hist = build_histogram(&dts, bin_width)?;
        hist.mu_bin = Some(mu);
        hist.l_bin = Some(l);
        let gap = detect_gap(&hist, floor_fraction)?;
        let ig_raw = fit_inverse_gaussian(&dts, 0.0).ok();
        let beyond: Vec<f64> = dts.iter().copied().filter(|&x| x > gap.end()).collect();
        let ig_gap = fit_inverse_gaussian(&beyond, gap.end()).ok();
        report.cells.push(CellRecord {
            mu_bin: mu,
            l_bin: l,
            n_samples: dts.len(),
            gap_start: gap.start,
            gap_length: gap.length,
            product: gap.length * mu,
            ig_raw,
            ig_gap,
        });
        hists.push(hist);
    }
    Ok((report, hists))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Polarity;
    use crate::stimulus::{synth_ramp, RampStimulus};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, InverseGaussian};

    fn ev(t: f64, x: u32) -> EventRecord {
        EventRecord {
            t,
            x,
            y: 0,
            polarity: Polarity::On,
        }
    }

    #[test]
    fn intervals_on_ramp() {
        let tr = synth_ramp(&RampStimulus::new(10.0, 50.0, 1.0).unwrap());
        let set = pixel_intervals(&[0.0, 0.1], &tr);
        assert_eq!(set.samples.len(), 1);
        let s = set.samples[0];
        assert!((s.mu - 50.0).abs() < 1e-9);
        assert!((s.l_avg - 12.5).abs() < 1e-12);
        assert!((s.dt - 0.1).abs() < 1e-15);

        assert!(pixel_intervals(&[0.3], &tr).samples.is_empty());

        let out = pixel_intervals(&[0.5, 0.9, 1.5], &tr);
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.skipped, 1);
    }

    #[test]
    fn intervals_grouped_by_pixel() {
        let tr = synth_ramp(&RampStimulus::new(10.0, 50.0, 1.0).unwrap());
        let events = vec![ev(0.1, 0), ev(0.15, 1), ev(0.2, 0), ev(0.3, 1), ev(0.4, 2)];
        let set = intervals_from_events(&events, |x, _| (x < 2).then_some(&tr));
        assert_eq!(set.samples.len(), 2);
        assert_eq!(set.skipped, 0);
        assert!((set.samples[0].dt - 0.1).abs() < 1e-12);
        assert!((set.samples[1].dt - 0.15).abs() < 1e-12);
    }

    #[test]
    fn axis_construction() {
        assert!(matches!(
            CellAxis::from_edges(&[1.0, 3.0, 2.0]),
            Err(AnalysisError::NonMonotoneEdges(2))
        ));
        assert!(matches!(
            CellAxis::from_centers(&[60.0, 70.0], 0.1),
            Err(AnalysisError::OverlappingCells(0, 1))
        ));
        let a = CellAxis::from_centers(&DEFAULT_MU_CENTERS, DEFAULT_CELL_HALF_WIDTH).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a.locate(50.0), Some(0));
        assert_eq!(a.locate(70.0), None);
        let e = CellAxis::from_edges(&[0.0, 10.0, 20.0]).unwrap();
        assert_eq!(e.locate(10.0), Some(1));
        assert_eq!(e.locate(20.0), None);
    }

    #[test]
    fn binning_edge_and_conservation() {
        let mu = CellAxis::from_edges(&[0.0, 10.0, 20.0]).unwrap();
        let l = CellAxis::from_edges(&[0.0, 100.0]).unwrap();
        let s = |m: f64, la: f64| IntervalSample {
            dt: 1e-3,
            mu: m,
            l_avg: la,
        };
        let samples = vec![s(10.0, 5.0), s(5.0, 5.0), s(25.0, 5.0), s(5.0, 200.0)];
        let b = bin_samples(&samples, &mu, &l);
        assert_eq!(b.cell(1, 0).len(), 1);
        assert_eq!(b.cell(0, 0).len(), 1);
        assert_eq!(b.rejected, 2);
        assert_eq!(b.assigned() + b.rejected, samples.len());

        let empty = bin_samples(&[], &mu, &l);
        assert_eq!(empty.populated().count(), 0);
    }

    #[test]
    fn histogram_examples() {
        let h = build_histogram(&[1e-3, 1.2e-3], 1e-3).unwrap();
        assert_eq!(h.counts, vec![0, 2]);
        assert_eq!(h.origin, 0.0);
        assert!(matches!(
            build_histogram(&[], 1e-3),
            Err(AnalysisError::EmptySamples)
        ));
        assert!(build_histogram(&[1.0], 0.0).is_err());

        // 3e-3 / 1e-3 evaluates just below 3 in binary; it still lands in bin 3.
        let h = build_histogram(&[3e-3], 1e-3).unwrap();
        assert_eq!(h.counts, vec![0, 0, 0, 1]);
    }

    #[test]
    fn gap_examples() {
        let h = TriggerTimeHistogram {
            bin_width: 1e-3,
            origin: 0.0,
            counts: vec![0, 0, 0, 50, 40],
            mu_bin: None,
            l_bin: None,
        };
        let g = detect_gap(&h, 0.02).unwrap();
        assert!((g.length - 3e-3).abs() < 1e-15);
        assert_eq!(g.start, 0.0);

        let h2 = TriggerTimeHistogram {
            counts: vec![50, 40, 30],
            ..h.clone()
        };
        assert_eq!(detect_gap(&h2, 0.02).unwrap().length, 0.0);

        let noisy = TriggerTimeHistogram {
            counts: vec![1, 0, 2, 100, 80, 3],
            ..h.clone()
        };
        assert!((detect_gap(&noisy, 0.02).unwrap().length - 3e-3).abs() < 1e-15);

        let empty = TriggerTimeHistogram {
            counts: vec![0, 0],
            ..h.clone()
        };
        assert_eq!(detect_gap(&empty, 0.02), Err(AnalysisError::EmptyHistogram));
        assert!(detect_gap(&h, 1.0).is_err());
    }

    #[test]
    fn fit_constant_samples() {
        let f = fit_inverse_gaussian(&[0.25; 10], 0.0).unwrap();
        assert!((f.mean - 0.25).abs() < 1e-15);
        assert!(f.is_degenerate());
        assert!(fit_inverse_gaussian(&[1.0], 0.0).is_err());
        assert!(matches!(
            fit_inverse_gaussian(&[1.0, 0.5], 0.5),
            Err(AnalysisError::SampleBelowShift { index: 1, .. })
        ));
    }

    fn ig_samples(mean: f64, shape: f64, n: usize, seed: u64) -> Vec<f64> {
        let d = InverseGaussian::new(mean, shape).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn fit_recovers_parameters_and_improves_with_n() {
        let err = |n: usize| {
            // Average over a few seeds so the comparison is not a coin flip.
            (0..8)
                .map(|s| {
                    let f = fit_inverse_gaussian(&ig_samples(1.0, 3.0, n, 100 + s), 0.0).unwrap();
                    (f.mean - 1.0).abs() + (f.shape - 3.0).abs() / 3.0
                })
                .sum::<f64>()
                / 8.0
        };
        let small = err(1_000);
        let large = err(100_000);
        assert!(large < small, "{large} !< {small}");
        let f = fit_inverse_gaussian(&ig_samples(1.0, 3.0, 100_000, 5), 0.0).unwrap();
        assert!((f.mean - 1.0).abs() < 0.02);
        assert!((f.shape - 3.0).abs() / 3.0 < 0.02);
        assert!(f.log_likelihood.is_finite());
    }

    #[test]
    fn fit_mle_beats_perturbed_parameters() {
        let xs = ig_samples(0.7, 2.0, 5_000, 11);
        let f = fit_inverse_gaussian(&xs, 0.0).unwrap();
        let ll = |m: f64, s: f64| xs.iter().map(|&x| ig_log_pdf(x, m, s)).sum::<f64>();
        assert!((ll(f.mean, f.shape) - f.log_likelihood).abs() < 1e-6 * f.log_likelihood.abs());
        for (dm, ds) in [(1.01, 1.0), (0.99, 1.0), (1.0, 1.02), (1.0, 0.98)] {
            assert!(ll(f.mean * dm, f.shape * ds) < f.log_likelihood);
        }
    }

    #[test]
    fn product_examples() {
        let table = [
            (50.0, 9.0e-3),
            (60.0, 7.5e-3),
            (70.0, 6.5e-3),
            (80.0, 5.5e-3),
            (90.0, 4.5e-3),
            (100.0, 4.5e-3),
            (150.0, 3.0e-3),
            (200.0, 2.0e-3),
        ];
        let rows: Vec<_> = table
            .iter()
            .flat_map(|&(mu, g)| DEFAULT_L_CENTERS.iter().map(move |&l| (mu, l, g)))
            .collect();
        let s = product_check(&DiscontinuityReport::from_measurements(&rows)).unwrap();
        assert!((s.mean_product - 0.4375).abs() < 1e-12);
        assert!(s.max_rel_deviation <= 0.12);

        let one = product_check(&DiscontinuityReport::from_measurements(&[(
            50.0, 10.0, 9e-3,
        )]))
        .unwrap();
        assert_eq!(one.max_rel_deviation, 0.0);
        let two = DiscontinuityReport::from_measurements(&[(50.0, 10.0, 9e-3), (50.0, 10.0, 9e-3)]);
        assert_eq!(product_check(&two).unwrap().max_rel_deviation, 0.0);
        let none = DiscontinuityReport::from_measurements(&[(50.0, 10.0, 0.0)]);
        assert_eq!(product_check(&none), Err(AnalysisError::NoPositiveGaps));
    }

    proptest! {
        #[test]
        fn histogram_conserves_and_covers(xs in proptest::collection::vec(0.0f64..0.1, 1..200), w in 1e-4f64..1e-2) {
            let h = build_histogram(&xs, w).unwrap();
            prop_assert_eq!(h.total() as usize, xs.len());
            let max = xs.iter().copied().fold(0.0, f64::max);
            prop_assert_eq!(h.bin_of(max), h.counts.len() - 1);
        }

        #[test]
        fn gap_invariant_under_count_scaling(counts in proptest::collection::vec(0u64..100, 1..40), k in 1u64..50) {
            prop_assume!(counts.iter().any(|&c| c > 0));
            let h = TriggerTimeHistogram { bin_width: 1e-3, origin: 0.0, counts: counts.clone(), mu_bin: None, l_bin: None };
            let scaled = TriggerTimeHistogram { counts: counts.iter().map(|c| c * k).collect(), ..h.clone() };
            prop_assert_eq!(detect_gap(&h, 0.02).unwrap(), detect_gap(&scaled, 0.02).unwrap());
        }

        #[test]
        fn fit_translation_identity(seed in 0u64..1000, s in 1e-3f64..10.0) {
            let xs = ig_samples(1.0, 3.0, 200, seed);
            let shifted: Vec<f64> = xs.iter().map(|x| x + s).collect();
            let a = fit_inverse_gaussian(&xs, 0.0).unwrap();
            let b = fit_inverse_gaussian(&shifted, s).unwrap();
            prop_assert!((a.mean - b.mean).abs() <= 1e-9 * a.mean);
            prop_assert!((a.shape - b.shape).abs() <= 1e-6 * a.shape);
        }

        #[test]
        fn constant_ramp_intervals_share_mu(l0 in 1.0f64..100.0, mu in 1.0f64..500.0, mut ts in proptest::collection::vec(0.0f64..1.0, 2..30)) {
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            let tr = synth_ramp(&RampStimulus::new(l0, mu, 1.0).unwrap());
            let set = pixel_intervals(&ts, &tr);
            for s in set.samples.iter().filter(|s| s.dt > 1e-6) {
                prop_assert!((s.mu - mu).abs() <= 1e-6 * mu);
            }
        }
    }
}
