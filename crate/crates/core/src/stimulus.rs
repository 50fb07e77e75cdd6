//! Light-intensity stimuli: piecewise-linear per-pixel traces, synthetic
//! ramps, and grayscale frame sequences with linear temporal interpolation.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StimulusError {
    #[error("channel value {0} outside [0, 255]")]
    ChannelOutOfRange(f64),
    #[error("trace needs at least one breakpoint")]
    EmptyTrace,
    #[error("breakpoint times must be strictly increasing (index {0})")]
    NonIncreasingTime(usize),
    #[error("intensity must be finite and non-negative, got {value} at index {index}")]
    InvalidIntensity { index: usize, value: f64 },
    #[error("invalid ramp: {0}")]
    InvalidRamp(String),
    #[error("frame sequence needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame {index} has {got} pixels, expected {expected}")]
    FrameSizeMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("frame timestamps must be strictly increasing (frame {0})")]
    NonIncreasingFrameTime(usize),
    #[error("pixel value {value} outside [0, 255] in frame {index}")]
    PixelOutOfRange { index: usize, value: f64 },
    #[error("interpolation factor must be >= 1, got {0}")]
    BadFactor(usize),
    #[error("pixel ({x}, {y}) outside {width}x{height} raster")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
}

/// ITU-R BT.709 luma from 8-bit RGB channels.
pub fn bt709_luma(r: f64, g: f64, b: f64) -> Result<f64, StimulusError> {
    for c in [r, g, b] {
        if !(0.0..=255.0).contains(&c) {
            return Err(StimulusError::ChannelOutOfRange(c));
        }
    }
    Ok(0.2126 * r + 0.7152 * g + 0.0722 * b)
}

/// Piecewise-linear light intensity `L(t)` at one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct LumaTrace {
    breakpoints: Vec<(f64, f64)>,
}

impl LumaTrace {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self, StimulusError> {
        if breakpoints.is_empty() {
            return Err(StimulusError::EmptyTrace);
        }
        for (index, &(t, l)) in breakpoints.iter().enumerate() {
            if !t.is_finite() {
                return Err(StimulusError::NonIncreasingTime(index));
            }
            if !(l >= 0.0 && l.is_finite()) {
                return Err(StimulusError::InvalidIntensity { index, value: l });
            }
            if index > 0 && !(t > breakpoints[index - 1].0) {
                return Err(StimulusError::NonIncreasingTime(index));
            }
        }
        Ok(Self { breakpoints })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0].0
    }

    pub fn end(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1].0
    }

    pub fn covers(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }

    /// Index `i` of the segment `[t_i, t_{i+1}]` containing `t`. A time on
    /// an interior breakpoint belongs to the segment that starts there.
    fn segment_index(&self, t: f64) -> Option<usize> {
        if !self.covers(t) || self.breakpoints.len() < 2 {
            return None;
        }
        let upper = self.breakpoints.partition_point(|&(bt, _)| bt <= t);
        Some(upper.saturating_sub(1).min(self.breakpoints.len() - 2))
    }

    /// `L(t)`, or `None` outside the trace's time range.
    pub fn eval(&self, t: f64) -> Option<f64> {
        if !self.covers(t) {
            return None;
        }
        let Some(i) = self.segment_index(t) else {
            return Some(self.breakpoints[0].1);
        };
        let (t0, l0) = self.breakpoints[i];
        let (t1, l1) = self.breakpoints[i + 1];
        if t == t1 {
            return Some(l1);
        }
        Some(l0 + (l1 - l0) * (t - t0) / (t1 - t0))
    }

    /// Slope `dL/dt` of the segment containing `t`.
    pub fn slope_at(&self, t: f64) -> Option<f64> {
        let i = self.segment_index(t)?;
        let (t0, l0) = self.breakpoints[i];
        let (t1, l1) = self.breakpoints[i + 1];
        Some((l1 - l0) / (t1 - t0))
    }

    /// Exact integral of `L` over `[a, b]` (trapezoids on each piece).
    pub fn integral(&self, a: f64, b: f64) -> Option<f64> {
        if !(self.covers(a) && self.covers(b)) || b < a {
            return None;
        }
        if a == b {
            return Some(0.0);
        }
        let mut total = 0.0;
        for w in self.breakpoints.windows(2) {
            let (t0, t1) = (w[0].0, w[1].0);
            let lo = a.max(t0);
            let hi = b.min(t1);
            if hi > lo {
                let la = self.eval(lo)?;
                let lb = self.eval(hi)?;
                total += 0.5 * (la + lb) * (hi - lo);
            }
        }
        Some(total)
    }

    /// Mean of `L` over `[a, b]`.
    pub fn mean_over(&self, a: f64, b: f64) -> Option<f64> {
        if a == b {
            return self.eval(a);
        }
        Some(self.integral(a, b)? / (b - a))
    }
}

/// Linear light ramp starting at time zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampStimulus {
    pub l_start: f64,
    pub mu: f64,
    pub duration: f64,
}

impl RampStimulus {
    pub fn new(l_start: f64, mu: f64, duration: f64) -> Result<Self, StimulusError> {
        if !(l_start >= 0.0 && l_start.is_finite()) {
            return Err(StimulusError::InvalidRamp(format!(
                "l_start = {l_start} must be non-negative"
            )));
        }
        if !(duration > 0.0 && duration.is_finite()) || !mu.is_finite() {
            return Err(StimulusError::InvalidRamp(format!(
                "duration = {duration} must be positive, mu = {mu} finite"
            )));
        }
        if l_start + mu * duration < 0.0 {
            return Err(StimulusError::InvalidRamp(format!(
                "intensity goes negative: {l_start} + {mu} * {duration} < 0"
            )));
        }
        Ok(Self {
            l_start,
            mu,
            duration,
        })
    }

    /// A rising ramp that sweeps `[l_center (1 - span), l_center (1 + span)]`
    /// at speed `mu`, so every interval's mean intensity stays inside that band.
    pub fn centered(l_center: f64, mu: f64, span: f64) -> Result<Self, StimulusError> {
        if !(span > 0.0 && span < 1.0) || !(mu > 0.0) {
            return Err(StimulusError::InvalidRamp(format!(
                "centered ramp needs 0 < span < 1 and mu > 0 (span = {span}, mu = {mu})"
            )));
        }
        Self::new(l_center * (1.0 - span), mu, 2.0 * span * l_center / mu)
    }

    pub fn l_end(&self) -> f64 {
        self.l_start + self.mu * self.duration
    }
}

pub fn synth_ramp(stim: &RampStimulus) -> LumaTrace {
    LumaTrace {
        breakpoints: vec![(0.0, stim.l_start), (stim.duration, stim.l_end().max(0.0))],
    }
}

/// One grayscale frame; pixels are row-major luma values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub pixels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    width: usize,
    height: usize,
    frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(width: usize, height: usize, frames: Vec<Frame>) -> Result<Self, StimulusError> {
        if frames.len() < 2 {
            return Err(StimulusError::TooFewFrames(frames.len()));
        }
        let expected = width * height;
        for (index, frame) in frames.iter().enumerate() {
            if frame.pixels.len() != expected {
                return Err(StimulusError::FrameSizeMismatch {
                    index,
                    got: frame.pixels.len(),
                    expected,
                });
            }
            if !frame.t.is_finite() || (index > 0 && !(frame.t > frames[index - 1].t)) {
                return Err(StimulusError::NonIncreasingFrameTime(index));
            }
            if let Some(&value) = frame.pixels.iter().find(|v| !(0.0..=255.0).contains(*v)) {
                return Err(StimulusError::PixelOutOfRange { index, value });
            }
        }
        Ok(Self {
            width,
            height,
            frames,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Inserts `factor - 1` linearly blended frames between every pair.
    /// Original frames are kept untouched.
    pub fn interpolate(&self, factor: usize) -> Result<Self, StimulusError> {
        if factor < 1 {
            return Err(StimulusError::BadFactor(factor));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let mut out = Vec::with_capacity((self.frames.len() - 1) * factor + 1);
        for pair in self.frames.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            out.push(a.clone());
            for k in 1..factor {
                let w = k as f64 / factor as f64;
                let t = a.t + (b.t - a.t) * w;
                let pixels = a
                    .pixels
                    .iter()
                    .zip(&b.pixels)
                    .map(|(&pa, &pb)| pa + (pb - pa) * w)
                    .collect();
                out.push(Frame { t, pixels });
            }
        }
        out.push(self.frames[self.frames.len() - 1].clone());
        Ok(Self {
            width: self.width,
            height: self.height,
            frames: out,
        })
    }

    pub fn trace_at(&self, x: usize, y: usize) -> Result<LumaTrace, StimulusError> {
        if x >= self.width || y >= self.height {
            return Err(StimulusError::OutOfBounds {
                x,
                y,
                width: self.width,
                height: self.height,
            });
        }
        let idx = y * self.width + x;
        Ok(LumaTrace {
            breakpoints: self.frames.iter().map(|f| (f.t, f.pixels[idx])).collect(),
        })
    }
}

pub fn interpolate_frames(
    seq: &FrameSequence,
    factor: usize,
) -> Result<FrameSequence, StimulusError> {
    seq.interpolate(factor)
}

pub fn trace_from_frames(
    seq: &FrameSequence,
    x: usize,
    y: usize,
) -> Result<LumaTrace, StimulusError> {
    seq.trace_at(x, y)
}
