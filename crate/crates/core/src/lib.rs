//! Simulation and analysis of DVS pixels in dim light, where charging the
//! photodiode's junction capacitance delays every event by a time inversely
//! proportional to the light's changing speed.
//!
//! * [`circuit`]: pixel constants and closed-form circuit relations.
//! * [`stimulus`]: luma traces, ramps and frame sequences.
//! * [`simulator`]: event generation and the capacitor-charging oracle.
//! * [`analysis`]: interval binning, histograms, gap detection, IG fits.
//! * [`io`]: configuration and file formats.
//! * [`cli`]: the `simulate`, `analyze`, `calibrate` and `oracle` commands.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod circuit;
pub mod cli;
pub mod io;
pub mod simulator;
pub mod stimulus;

pub use circuit::{PixelParams, Polarity};
pub use simulator::{EventRecord, SimConfig, SimMode};
pub use stimulus::{FrameSequence, LumaTrace, RampStimulus};
