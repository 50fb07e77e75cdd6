//! Event generation from per-pixel luma traces.
//!
//! Four modes share one contract: an event is emitted when the log
//! intensity has moved by the contrast threshold since the last reset.
//!
//! * `Ideal` locates each crossing in closed form on the linear segment.
//! * `DelayedMechanistic` emits each crossing late by
//!   `delta_q_e / |dI_pd|`, the time the stimulated current needs to move the
//!   per-event charge through the junction capacitor.
//! * `DelayedEmpirical` uses `k_delay / mu` instead, `mu` being the local
//!   changing speed of the light.
//! * `Stochastic` draws the waiting time to each crossing from the
//!   first-passage (inverse Gaussian) law of a drifted Brownian log
//!   intensity, then adds the empirical delay.
//!
//! In the delayed modes the pixel is blind while the delay runs: the
//! reference level is taken at the emission time, not at the crossing.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, InverseGaussian};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::circuit::{self, CircuitError, PixelParams, Polarity};
use crate::stimulus::{FrameSequence, LumaTrace, RampStimulus, StimulusError};

/// Default fine-step resolution of the capacitor oracle.
pub const DEFAULT_ORACLE_STEP: f64 = 1e-6;
/// Step budget before the oracle gives up.
pub const ORACLE_MAX_STEPS: u64 = 100_000_000;
/// Largest relative change allowed when the oracle step is halved.
pub const ORACLE_RICHARDSON_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Stimulus(#[from] StimulusError),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("stochastic mode with zero drift and no noise never fires")]
    NoEvents,
    #[error(
        "oracle did not reach {target_charge:.3e} C within {steps} steps (reached {charge:.3e} C)"
    )]
    OracleNonConvergence {
        steps: u64,
        charge: f64,
        target_charge: f64,
    },
    #[error("oracle unresolved at dt = {dt:e}: {coarse:e} s vs {fine:e} s at dt/2")]
    OracleUnresolved { dt: f64, coarse: f64, fine: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimMode {
    Ideal,
    DelayedMechanistic,
    DelayedEmpirical,
    Stochastic,
}

impl SimMode {
    pub fn uses_k_delay(self) -> bool {
        matches!(self, SimMode::DelayedEmpirical | SimMode::Stochastic)
    }
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimMode::Ideal => "ideal",
            SimMode::DelayedMechanistic => "delayed-mechanistic",
            SimMode::DelayedEmpirical => "delayed-empirical",
            SimMode::Stochastic => "stochastic",
        })
    }
}

impl FromStr for SimMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ideal" => Ok(SimMode::Ideal),
            "delayed-mechanistic" => Ok(SimMode::DelayedMechanistic),
            "delayed-empirical" => Ok(SimMode::DelayedEmpirical),
            "stochastic" => Ok(SimMode::Stochastic),
            other => Err(format!(
                "unknown mode '{other}' (expected ideal, delayed-mechanistic, delayed-empirical or stochastic)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mode: SimMode,
    pub params: PixelParams,
    /// Delay constant of `k_delay / mu`, in luma units.
    pub k_delay: f64,
    /// Brownian log-intensity noise, per square-root second.
    pub noise_sigma: f64,
    pub rng_seed: u64,
    pub time_step_oracle: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            mode: SimMode::Ideal,
            params: PixelParams::default(),
            k_delay: 0.45,
            noise_sigma: 0.0,
            rng_seed: 0,
            time_step_oracle: DEFAULT_ORACLE_STEP,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.params.validate()?;
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "noise_sigma = {} must be non-negative",
                self.noise_sigma
            )));
        }
        if !(self.time_step_oracle > 0.0 && self.time_step_oracle.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "time_step_oracle = {} must be positive",
                self.time_step_oracle
            )));
        }
        if self.mode.uses_k_delay() && !(self.k_delay > 0.0 && self.k_delay.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "k_delay = {} must be positive in {} mode",
                self.k_delay, self.mode
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub x: u32,
    pub y: u32,
    /// Always `On` or `Off`.
    pub polarity: Polarity,
}

impl EventRecord {
    /// Global stream order: time, then row, column, polarity.
    pub fn stream_cmp(&self, other: &Self) -> Ordering {
        self.t
            .total_cmp(&other.t)
            .then(self.y.cmp(&other.y))
            .then(self.x.cmp(&other.x))
            .then(self.polarity.cmp(&other.polarity))
    }
}

/// Output of one pixel's simulation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PixelRun {
    pub events: Vec<EventRecord>,
    /// Delay added to each event, parallel to `events`.
    pub delays: Vec<f64>,
    /// Segments skipped because the intensity touched zero.
    pub skipped_segments: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelTrace {
    pub x: u32,
    pub y: u32,
    pub trace: LumaTrace,
}

pub fn simulate_pixel_ideal(
    trace: &LumaTrace,
    cfg: &SimConfig,
    x: u32,
    y: u32,
) -> Result<PixelRun, SimError> {
    cfg.validate()?;
    Ok(run_threshold_chain(trace, &cfg.params, x, y, |_, _, _| {
        Some(0.0)
    }))
}

pub fn simulate_pixel_delayed(
    trace: &LumaTrace,
    cfg: &SimConfig,
    x: u32,
    y: u32,
) -> Result<PixelRun, SimError> {
    cfg.validate()?;
    let params = cfg.params;
    match cfg.mode {
        SimMode::DelayedMechanistic => Ok(run_threshold_chain(
            trace,
            &params,
            x,
            y,
            |l_ref, l_cross, _| {
                let di = params.k_photo * (l_cross - l_ref);
                circuit::event_delay(di, &params).ok()
            },
        )),
        SimMode::DelayedEmpirical => {
            let k = cfg.k_delay;
            Ok(run_threshold_chain(trace, &params, x, y, |_, _, slope| {
                circuit::delay_from_speed(slope.abs(), k).ok()
            }))
        }
        other => Err(SimError::InvalidConfig(format!(
            "simulate_pixel_delayed called in {other} mode"
        ))),
    }
}

/// Walks the trace segment by segment, solving `L(t*) = L_ref e^{+-theta}`
/// on each linear piece. `delay(l_ref, l_cross, slope)` returns the delay
/// for a crossing, or `None` when the delay is infinite (the crossing is
/// then dropped and the pixel re-references at the crossing point).
fn run_threshold_chain<F>(
    trace: &LumaTrace,
    params: &PixelParams,
    x: u32,
    y: u32,
    delay: F,
) -> PixelRun
where
    F: Fn(f64, f64, f64) -> Option<f64>,
{
    let mut run = PixelRun::default();
    let bp = trace.breakpoints();
    if bp.len() < 2 {
        return run;
    }
    let up = params.contrast_threshold_on().exp();
    let down = (-params.contrast_threshold_off()).exp();
    let t_end = trace.end();

    let mut t_cur = trace.start();
    let mut l_ref: Option<f64> = (bp[0].1 > 0.0).then_some(bp[0].1);

    'segments: for seg in bp.windows(2) {
        let ((t0, l0), (t1, l1)) = (seg[0], seg[1]);
        if t_cur >= t1 {
            continue;
        }
        if l0 <= 0.0 || l1 <= 0.0 {
            warn!("pixel ({x}, {y}): segment [{t0}, {t1}] reaches zero intensity, skipped");
            run.skipped_segments += 1;
            l_ref = None;
            t_cur = t1;
            continue;
        }
        let slope = (l1 - l0) / (t1 - t0);
        let level = |t: f64| l0 + slope * (t - t0);
        let mut reference = l_ref.unwrap_or_else(|| level(t_cur.max(t0)));

        if slope != 0.0 {
            loop {
                let (target, polarity) = if slope > 0.0 {
                    (reference * up, Polarity::On)
                } else {
                    (reference * down, Polarity::Off)
                };
                let t_star = (t0 + (target - l0) / slope).max(t_cur);
                if t_star > t1 {
                    break;
                }
                let Some(d) = delay(reference, target, slope) else {
                    reference = target;
                    t_cur = t_star;
                    continue;
                };
                let t_emit = t_star + d;
                if t_emit > t_end {
                    break 'segments;
                }
                run.events.push(EventRecord {
                    t: t_emit,
                    x,
                    y,
                    polarity,
                });
                run.delays.push(d);
                t_cur = t_emit;
                match trace.eval(t_emit) {
                    Some(l) if l > 0.0 => reference = l,
                    _ => {
                        l_ref = None;
                        continue 'segments;
                    }
                }
                if t_emit > t1 {
                    l_ref = Some(reference);
                    continue 'segments;
                }
            }
        }
        l_ref = Some(reference);
        t_cur = t_cur.max(t1);
    }
    run
}

/// Per-pixel random stream derived from the run seed and pixel address, so
/// results do not depend on scheduling order.
pub fn pixel_rng(seed: u64, x: u32, y: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((y as u64) << 32) | x as u64);
    rng
}

pub fn simulate_pixel_stochastic(
    trace: &LumaTrace,
    cfg: &SimConfig,
    x: u32,
    y: u32,
) -> Result<PixelRun, SimError> {
    cfg.validate()?;
    if cfg.mode != SimMode::Stochastic {
        return Err(SimError::InvalidConfig(format!(
            "simulate_pixel_stochastic called in {} mode",
            cfg.mode
        )));
    }
    let bp = trace.breakpoints();
    let mut run = PixelRun::default();
    if bp.len() < 2 {
        return Ok(run);
    }
    if cfg.noise_sigma == 0.0 && bp.windows(2).all(|w| w[0].1 == w[1].1) {
        return Err(SimError::NoEvents);
    }

    let mut rng = pixel_rng(cfg.rng_seed, x, y);
    let params = &cfg.params;
    let t_end = trace.end();
    let mut t = trace.start();

    while t < t_end {
        let (Some(level), Some(slope)) = (trace.eval(t), trace.slope_at(t)) else {
            break;
        };
        if level <= 0.0 || slope == 0.0 {
            if level <= 0.0 {
                warn!("pixel ({x}, {y}): zero intensity at t = {t}, segment skipped");
                run.skipped_segments += 1;
            }
            match next_breakpoint_after(bp, t) {
                Some(next) => {
                    t = next;
                    continue;
                }
                None => break,
            }
        }
        let (threshold, polarity) = if slope > 0.0 {
            (params.contrast_threshold_on(), Polarity::On)
        } else {
            (params.contrast_threshold_off(), Polarity::Off)
        };
        let drift = slope.abs() / level;
        let mean = threshold / drift;
        let wait = if cfg.noise_sigma == 0.0 {
            mean
        } else {
            let shape = (threshold / cfg.noise_sigma).powi(2);
            InverseGaussian::new(mean, shape)
                .map_err(|e| {
                    SimError::InvalidConfig(format!("inverse Gaussian({mean}, {shape}): {e}"))
                })?
                .sample(&mut rng)
        };
        let t_star = t + wait;
        if t_star > t_end {
            break;
        }
        let local_speed = trace.slope_at(t_star).unwrap_or(0.0).abs();
        let Ok(d) = circuit::delay_from_speed(local_speed, cfg.k_delay) else {
            // Static light at the crossing: the pixel stays armed.
            t = t_star;
            continue;
        };
        let t_emit = t_star + d;
        if t_emit > t_end {
            break;
        }
        run.events.push(EventRecord {
            t: t_emit,
            x,
            y,
            polarity,
        });
        run.delays.push(d);
        t = t_emit;
    }
    Ok(run)
}

fn next_breakpoint_after(bp: &[(f64, f64)], t: f64) -> Option<f64> {
    bp.iter().map(|&(bt, _)| bt).find(|&bt| bt > t)
}

/// Dispatches on `cfg.mode`.
pub fn simulate_pixel(
    trace: &LumaTrace,
    cfg: &SimConfig,
    x: u32,
    y: u32,
) -> Result<PixelRun, SimError> {
    match cfg.mode {
        SimMode::Ideal => simulate_pixel_ideal(trace, cfg, x, y),
        SimMode::DelayedMechanistic | SimMode::DelayedEmpirical => {
            simulate_pixel_delayed(trace, cfg, x, y)
        }
        SimMode::Stochastic => simulate_pixel_stochastic(trace, cfg, x, y),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensorRun {
    /// Sorted by [`EventRecord::stream_cmp`].
    pub events: Vec<EventRecord>,
    pub skipped_segments: usize,
}

/// Simulates every pixel independently (in parallel) and merges the streams.
pub fn simulate_sensor(pixels: &[PixelTrace], cfg: &SimConfig) -> Result<SensorRun, SimError> {
    cfg.validate()?;
    let runs: Vec<PixelRun> = pixels
        .par_iter()
        .map(|p| simulate_pixel(&p.trace, cfg, p.x, p.y))
        .collect::<Result<_, _>>()?;
    let mut out = SensorRun::default();
    for run in runs {
        out.skipped_segments += run.skipped_segments;
        out.events.extend(run.events);
    }
    out.events.par_sort_unstable_by(|a, b| a.stream_cmp(b));
    Ok(out)
}

/// One pixel per raster position of a frame sequence.
pub fn pixels_from_frames(seq: &FrameSequence) -> Result<Vec<PixelTrace>, SimError> {
    let mut out = Vec::with_capacity(seq.width() * seq.height());
    for y in 0..seq.height() {
        for x in 0..seq.width() {
            out.push(PixelTrace {
                x: x as u32,
                y: y as u32,
                trace: seq.trace_at(x, y)?,
            });
        }
    }
    Ok(out)
}

/// `count` pixels on row `y`, columns `x0..x0 + count`, all seeing `ramp`.
pub fn ramp_pixels(ramp: &RampStimulus, x0: u32, count: u32, y: u32) -> Vec<PixelTrace> {
    let trace = crate::stimulus::synth_ramp(ramp);
    (x0..x0 + count)
        .map(|x| PixelTrace {
            x,
            y,
            trace: trace.clone(),
        })
        .collect()
}

/// Fixed-step integration of the junction node
/// `C_J dV/dt = i(t) - V / R_SH` from rest, returning the time at which
/// the stored charge `C_J V` reaches `delta_q_e`. The crossing inside the
/// last step is located by linear interpolation. `R_S` carries no current
/// into the node and does not enter.
pub fn integrate_junction_charge<F>(
    current: F,
    params: &PixelParams,
    dt: f64,
    max_steps: u64,
) -> Result<f64, SimError>
where
    F: Fn(f64) -> f64,
{
    if params.delta_q_e == 0.0 {
        return Ok(0.0);
    }
    if !(dt > 0.0) {
        return Err(SimError::InvalidConfig(format!(
            "oracle step {dt} must be positive"
        )));
    }
    let c = params.c_junction;
    let leak = if params.r_shunt.is_infinite() {
        0.0
    } else {
        1.0 / params.r_shunt
    };
    let target = params.delta_q_e / c;
    let rhs = |t: f64, v: f64| (current(t).abs() - v * leak) / c;

    let mut v = 0.0;
    for step in 0..max_steps {
        let t = step as f64 * dt;
        let k1 = rhs(t, v);
        let k2 = rhs(t + 0.5 * dt, v + 0.5 * dt * k1);
        let k3 = rhs(t + 0.5 * dt, v + 0.5 * dt * k2);
        let k4 = rhs(t + dt, v + dt * k3);
        let next = v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if next >= target {
            let frac = if next > v {
                (target - v) / (next - v)
            } else {
                1.0
            };
            return Ok(t + frac * dt);
        }
        v = next;
    }
    Err(SimError::OracleNonConvergence {
        steps: max_steps,
        charge: v * c,
        target_charge: params.delta_q_e,
    })
}

/// Brute-force counterpart of [`circuit::event_delay`]: a constant current
/// step `|i_new - i_old|` charging the junction capacitor.
pub fn oracle_capacitor_integrator(
    i_old: f64,
    i_new: f64,
    params: &PixelParams,
    dt: f64,
) -> Result<f64, SimError> {
    let step = (i_new - i_old).abs();
    if step == 0.0 && params.delta_q_e > 0.0 {
        return Err(CircuitError::InfiniteDelay(params.delta_q_e).into());
    }
    integrate_junction_charge(|_| step, params, dt, ORACLE_MAX_STEPS)
}

/// Runs the oracle at `dt` and `dt / 2` and rejects the result if the two
/// differ by more than [`ORACLE_RICHARDSON_TOL`].
pub fn oracle_checked(
    i_old: f64,
    i_new: f64,
    params: &PixelParams,
    dt: f64,
) -> Result<f64, SimError> {
    let coarse = oracle_capacitor_integrator(i_old, i_new, params, dt)?;
    let fine = oracle_capacitor_integrator(i_old, i_new, params, dt / 2.0)?;
    if coarse == fine || (coarse - fine).abs() <= ORACLE_RICHARDSON_TOL * fine.abs() {
        Ok(fine)
    } else {
        Err(SimError::OracleUnresolved { dt, coarse, fine })
    }
}
