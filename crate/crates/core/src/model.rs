//! Integrate-and-fire-or-burst vector field.
//!
//! Membrane potential `v` (mV) is driven by a constant bias, a sinusoidal
//! forcing current, a leak and a low-threshold T-type calcium current whose
//! activation is an instantaneous Heaviside gate at `v_h`. The calcium current
//! is inactivated by the slow gate `h`, which recovers toward 1 while the cell
//! is hyperpolarized and decays toward 0 otherwise.
//!
//! Everything here is a pure function of its arguments. Time is in ms, the
//! forcing frequency is stored in Hz and converted on use.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::ConfigError;

/// Which branch assignment to use for the `h` gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HEquation {
    /// Recovery `(1 - h)/tau_h_plus` for `v <= v_h`, decay `-h/tau_h_minus` above.
    #[default]
    Corrected,
    /// Decay `-h/tau_h_minus` for `v < v_h`, recovery `(1 - h)/tau_h_plus` for `v >= v_h`.
    AsPrinted,
}

impl std::str::FromStr for HEquation {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corrected" => Ok(Self::Corrected),
            "as-printed" | "as_printed" => Ok(Self::AsPrinted),
            other => Err(ConfigError::Invalid(format!(
                "unknown h-equation `{other}` (expected `corrected` or `as-printed`)"
            ))),
        }
    }
}

impl std::fmt::Display for HEquation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Corrected => "corrected",
            Self::AsPrinted => "as-printed",
        })
    }
}

/// Model constants. Potentials in mV, conductances in mS, currents in μA,
/// capacitance in μF, time constants in ms, forcing frequency in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParameters {
    pub capacitance: f64,
    /// Calcium activation threshold.
    pub v_h: f64,
    /// Spike threshold.
    pub v_theta: f64,
    pub v_reset: f64,
    /// Leak reversal potential.
    pub v_leak: f64,
    /// Calcium reversal potential.
    pub v_ca: f64,
    pub g_leak: f64,
    pub g_ca: f64,
    /// Constant bias current.
    pub i_bias: f64,
    /// Amplitude of the sinusoidal forcing current.
    pub i_forcing: f64,
    pub forcing_hz: f64,
    /// Time constant of the depolarized (inactivating) branch.
    pub tau_h_minus: f64,
    /// Time constant of the hyperpolarized (recovering) branch.
    pub tau_h_plus: f64,
    pub h_equation: HEquation,
}

impl Default for ModelParameters {
    fn default() -> Self {
        Self {
            capacitance: 2.0,
            v_h: -60.0,
            v_theta: -35.0,
            v_reset: -50.0,
            v_leak: -65.0,
            v_ca: 120.0,
            g_leak: 0.035,
            g_ca: 0.07,
            i_bias: -0.05,
            i_forcing: 1.6,
            forcing_hz: 5.0,
            tau_h_minus: 20.0,
            tau_h_plus: 200.0,
            h_equation: HEquation::Corrected,
        }
    }
}

/// Instantaneous state: membrane potential (mV) and inactivation gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub v: f64,
    pub h: f64,
}

impl NeuronState {
    pub fn new(v: f64, h: f64) -> Self {
        Self { v, h }
    }
}

impl ModelParameters {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("capacitance", self.capacitance),
            ("v_h", self.v_h),
            ("v_theta", self.v_theta),
            ("v_reset", self.v_reset),
            ("v_leak", self.v_leak),
            ("v_ca", self.v_ca),
            ("g_leak", self.g_leak),
            ("g_ca", self.g_ca),
            ("i_bias", self.i_bias),
            ("i_forcing", self.i_forcing),
            ("forcing_hz", self.forcing_hz),
            ("tau_h_minus", self.tau_h_minus),
            ("tau_h_plus", self.tau_h_plus),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, x)| !x.is_finite()) {
            return Err(ConfigError::Invalid(format!("model.{name} must be finite")));
        }
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid(msg.to_string()))
            }
        };
        check(self.capacitance > 0.0, "model.capacitance must be > 0")?;
        check(self.g_leak >= 0.0, "model.g_leak must be >= 0")?;
        check(self.g_ca >= 0.0, "model.g_ca must be >= 0")?;
        check(self.tau_h_minus > 0.0, "model.tau_h_minus must be > 0")?;
        check(self.tau_h_plus > 0.0, "model.tau_h_plus must be > 0")?;
        check(self.forcing_hz >= 0.0, "model.forcing_hz must be >= 0")?;
        check(
            self.v_reset < self.v_theta,
            "model.v_reset must lie below model.v_theta",
        )
    }

    /// Forcing frequency in cycles per ms.
    #[inline]
    pub fn forcing_per_ms(&self) -> f64 {
        self.forcing_hz / 1000.0
    }

    /// Forcing period in ms (infinite when the forcing frequency is zero).
    pub fn forcing_period_ms(&self) -> f64 {
        1000.0 / self.forcing_hz
    }

    /// `g_L (v - v_L)`.
    #[inline]
    pub fn leak_current(&self, v: f64) -> f64 {
        self.g_leak * (v - self.v_leak)
    }

    /// `g_T H(v - v_h) h (v - v_T)` with `H(0) = 0`.
    #[inline]
    pub fn t_current(&self, v: f64, h: f64) -> f64 {
        if v > self.v_h {
            self.g_ca * h * (v - self.v_ca)
        } else {
            0.0
        }
    }

    /// dv/dt in mV/ms, excluding noise.
    #[inline]
    pub fn drift_v(&self, t: f64, s: NeuronState) -> f64 {
        let forcing = self.i_forcing * (2.0 * PI * self.forcing_per_ms() * t).cos();
        (self.i_bias + forcing - self.leak_current(s.v) - self.t_current(s.v, s.h))
            / self.capacitance
    }

    /// dh/dt in 1/ms.
    #[inline]
    pub fn drift_h(&self, s: NeuronState) -> f64 {
        let recover = (1.0 - s.h) / self.tau_h_plus;
        let decay = -s.h / self.tau_h_minus;
        match self.h_equation {
            HEquation::Corrected if s.v <= self.v_h => recover,
            HEquation::Corrected => decay,
            HEquation::AsPrinted if s.v < self.v_h => decay,
            HEquation::AsPrinted => recover,
        }
    }

    /// Resets `v` to `v_reset` when it has reached threshold.
    #[inline]
    pub fn apply_threshold_reset(&self, s: NeuronState) -> (NeuronState, bool) {
        if s.v >= self.v_theta {
            (NeuronState::new(self.v_reset, s.h), true)
        } else {
            (s, false)
        }
    }
}
