//! Pixel circuit constants and the closed-form relations of the DVS signal
//! chain: photocurrent, differential-amplifier response, comparator
//! thresholds, cascode small-signal gain, junction charge and the event
//! delay it produces.
//!
//! Every function here is pure; `PixelParams` is plain data and may be
//! shared freely between threads.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("luma must be non-negative, got {0}")]
    NegativeLuma(f64),
    #[error("photocurrent must be positive, got {0} A")]
    NonPositiveCurrent(f64),
    #[error("cascode gain must be non-zero")]
    ZeroCascodeGain,
    /// A static stimulus never delivers the per-event charge.
    #[error("infinite delay: stimulated current is zero while delta_q_e = {0} C")]
    InfiniteDelay(f64),
    #[error("changing speed must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("k_delay must be positive, got {0}")]
    NonPositiveDelayConstant(f64),
    #[error("calibration needs at least one (mu, gap) observation")]
    NoObservations,
    #[error("observation {index} invalid: mu = {mu}, gap = {gap} (both must be positive)")]
    InvalidObservation { index: usize, mu: f64, gap: f64 },
    #[error("invalid pixel parameter {name} = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("delta_q_e = {actual} C inconsistent with c_junction * dV_pd = {expected} C")]
    ChargeInconsistent { expected: f64, actual: f64 },
}

/// Circuit constants of one DVS pixel.
///
/// Voltages are in volts, capacitance in farads, charge in coulombs.
/// `r_shunt` and `r_series` describe the photodiode's distributed model;
/// the closed-form relations assume their ideal limits (`+inf` and `0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelParams {
    /// ON comparator level; ON fires when `V_d <= -theta_on`.
    pub theta_on: f64,
    /// OFF comparator level; OFF fires when `V_d >= theta_off`.
    pub theta_off: f64,
    /// Differential amplifier gain `C1 / C2`.
    pub gain_diff: f64,
    /// Subthreshold slope factor of the source follower.
    pub kappa_sf: f64,
    /// Subthreshold slope factor of the feedback transistor.
    pub kappa_fb: f64,
    pub v_thermal: f64,
    /// Small-signal cascode gain (magnitude).
    pub gain_cascode: f64,
    /// Junction capacitance of the photodiode.
    pub c_junction: f64,
    /// Photocurrent per unit of luma.
    pub k_photo: f64,
    /// Charge moved through the junction capacitor per event.
    pub delta_q_e: f64,
    pub r_shunt: f64,
    pub r_series: f64,
}

impl Default for PixelParams {
    /// Symmetric thresholds giving a log-contrast threshold of 0.15, with
    /// `delta_q_e` set consistent with `c_junction`.
    fn default() -> Self {
        let mut params = Self {
            theta_on: 0.075,
            theta_off: 0.075,
            gain_diff: 20.0,
            kappa_sf: 0.7,
            kappa_fb: 0.7,
            v_thermal: 0.025,
            gain_cascode: 2.0,
            c_junction: 1.68e-9,
            k_photo: 1e-10,
            delta_q_e: 0.0,
            r_shunt: f64::INFINITY,
            r_series: 0.0,
        };
        params.delta_q_e = params.consistent_delta_q_e();
        params
    }
}

impl PixelParams {
    pub fn validate(&self) -> Result<(), CircuitError> {
        let positive: [(&'static str, f64); 6] = [
            ("theta_on", self.theta_on),
            ("theta_off", self.theta_off),
            ("gain_diff", self.gain_diff),
            ("v_thermal", self.v_thermal),
            ("c_junction", self.c_junction),
            ("k_photo", self.k_photo),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(CircuitError::InvalidParam {
                    name,
                    value,
                    reason: "must be positive and finite",
                });
            }
        }
        for (name, value) in [("kappa_sf", self.kappa_sf), ("kappa_fb", self.kappa_fb)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(CircuitError::InvalidParam {
                    name,
                    value,
                    reason: "must lie in (0, 1]",
                });
            }
        }
        if !(self.gain_cascode > 0.0 && self.gain_cascode.is_finite()) {
            return Err(CircuitError::InvalidParam {
                name: "gain_cascode",
                value: self.gain_cascode,
                reason: "must be positive and finite",
            });
        }
        if !(self.delta_q_e >= 0.0 && self.delta_q_e.is_finite()) {
            return Err(CircuitError::InvalidParam {
                name: "delta_q_e",
                value: self.delta_q_e,
                reason: "must be non-negative and finite",
            });
        }
        if !(self.r_shunt > 0.0) {
            return Err(CircuitError::InvalidParam {
                name: "r_shunt",
                value: self.r_shunt,
                reason: "must be positive (use inf for the ideal diode)",
            });
        }
        if !(self.r_series >= 0.0 && self.r_series.is_finite()) {
            return Err(CircuitError::InvalidParam {
                name: "r_series",
                value: self.r_series,
                reason: "must be non-negative and finite",
            });
        }
        Ok(())
    }

    /// Volts of `V_d` per unit of `ln I_pd`.
    pub fn log_gain(&self) -> f64 {
        self.gain_diff * self.v_thermal * self.kappa_sf / self.kappa_fb
    }

    /// Log-intensity change that drives `V_d` to the ON threshold.
    pub fn contrast_threshold_on(&self) -> f64 {
        self.theta_on / self.log_gain()
    }

    /// Log-intensity change that drives `V_d` to the OFF threshold.
    pub fn contrast_threshold_off(&self) -> f64 {
        self.theta_off / self.log_gain()
    }

    /// The effective log-contrast threshold, taken from the OFF level.
    pub fn contrast_threshold(&self) -> f64 {
        self.contrast_threshold_off()
    }

    /// `|dV_p|` between two consecutive events: the OFF threshold referred
    /// back through the amplifier and the source follower.
    pub fn vp_swing_per_event(&self) -> f64 {
        self.theta_off / (self.gain_diff * self.kappa_sf)
    }

    /// `|dV_pd|` between two consecutive events.
    pub fn vpd_swing_per_event(&self) -> f64 {
        self.vp_swing_per_event() / self.gain_cascode
    }

    /// The `delta_q_e` implied by `c_junction` and the per-event swing.
    pub fn consistent_delta_q_e(&self) -> f64 {
        self.c_junction * self.vpd_swing_per_event()
    }

    /// Checks `delta_q_e` against `c_junction * |dV_pd|` at relative
    /// tolerance `rel_tol`.
    pub fn check_charge_consistency(&self, rel_tol: f64) -> Result<(), CircuitError> {
        let expected = self.consistent_delta_q_e();
        let scale = expected.abs().max(f64::MIN_POSITIVE);
        if (self.delta_q_e - expected).abs() / scale <= rel_tol {
            Ok(())
        } else {
            Err(CircuitError::ChargeInconsistent {
                expected,
                actual: self.delta_q_e,
            })
        }
    }
}

/// Comparator outcome for one evaluation of `V_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Off,
    On,
    None,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarity::Off => write!(f, "OFF"),
            Polarity::On => write!(f, "ON"),
            Polarity::None => write!(f, "NONE"),
        }
    }
}

pub fn luma_to_photocurrent(luma: f64, params: &PixelParams) -> Result<f64, CircuitError> {
    if !(luma >= 0.0) {
        return Err(CircuitError::NegativeLuma(luma));
    }
    Ok(params.k_photo * luma)
}

/// Change of the differencing-node voltage when the photocurrent moves from
/// `i_old` to `i_new`. Rising light drives `V_d` negative.
pub fn delta_vd(i_old: f64, i_new: f64, params: &PixelParams) -> Result<f64, CircuitError> {
    for i in [i_old, i_new] {
        if !(i > 0.0) {
            return Err(CircuitError::NonPositiveCurrent(i));
        }
    }
    Ok(-params.log_gain() * (i_new.ln() - i_old.ln()))
}

/// Both comparator boundaries are inclusive.
pub fn threshold_classify(v_d: f64, params: &PixelParams) -> Polarity {
    if v_d >= params.theta_off {
        Polarity::Off
    } else if v_d <= -params.theta_on {
        Polarity::On
    } else {
        Polarity::None
    }
}

/// Photodiode voltage change behind a cascode output change:
/// `dV_p = -A_cas * dV_pd`.
pub fn delta_vpd_from_vp(delta_vp: f64, params: &PixelParams) -> Result<f64, CircuitError> {
    if params.gain_cascode == 0.0 {
        return Err(CircuitError::ZeroCascodeGain);
    }
    Ok(-delta_vp / params.gain_cascode)
}

/// Forward cascode relation, the inverse of [`delta_vpd_from_vp`].
pub fn delta_vp_from_vpd(delta_vpd: f64, params: &PixelParams) -> f64 {
    -params.gain_cascode * delta_vpd
}

pub fn charge_delta(delta_vpd: f64, params: &PixelParams) -> f64 {
    delta_vpd * params.c_junction
}

/// Time for the stimulated current step to move `delta_q_e` through the
/// junction capacitor. Only the magnitude of the step matters.
pub fn event_delay(delta_i_pd: f64, params: &PixelParams) -> Result<f64, CircuitError> {
    if params.delta_q_e == 0.0 {
        return Ok(0.0);
    }
    let magnitude = delta_i_pd.abs();
    if magnitude == 0.0 {
        return Err(CircuitError::InfiniteDelay(params.delta_q_e));
    }
    Ok(params.delta_q_e / magnitude)
}

/// Event delay as a function of the light's changing speed, `k_delay / mu`.
pub fn delay_from_speed(mu: f64, k_delay: f64) -> Result<f64, CircuitError> {
    if !(mu > 0.0) {
        return Err(CircuitError::NonPositiveSpeed(mu));
    }
    if !(k_delay > 0.0) {
        return Err(CircuitError::NonPositiveDelayConstant(k_delay));
    }
    Ok(k_delay / mu)
}

/// Least-squares `k` for `gap = k / mu` over `(mu, gap)` observations.
///
/// Minimising `sum (gap_i - k / mu_i)^2` gives
/// `k = sum(gap_i / mu_i) / sum(1 / mu_i^2)`. Duplicate rows carry double
/// weight.
pub fn calibrate_k_delay(observations: &[(f64, f64)]) -> Result<f64, CircuitError> {
    if observations.is_empty() {
        return Err(CircuitError::NoObservations);
    }
    for (index, &(mu, gap)) in observations.iter().enumerate() {
        if !(mu > 0.0 && gap > 0.0 && mu.is_finite() && gap.is_finite()) {
            return Err(CircuitError::InvalidObservation { index, mu, gap });
        }
    }
    if let [(mu, gap)] = observations {
        return Ok(mu * gap);
    }
    let (num, den) = observations
        .iter()
        .fold((0.0, 0.0), |(num, den), &(mu, gap)| {
            (num + gap / mu, den + 1.0 / (mu * mu))
        });
    Ok(num / den)
}
