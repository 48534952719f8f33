//! One elementary link: write train, heralding and readout.
//!
//! Each of the `mode_count` write pulses excites, independently in the left
//! and right ensemble, a spin wave together with a Stokes photon. Photon
//! numbers follow the thermal law of spontaneous Raman scattering truncated
//! at two, `P(k) ∝ (1 - χ) χ^k` for `k ∈ {0, 1, 2}`.
//!
//! The Stokes fields of the two ensembles meet on a beam splitter whose
//! outputs feed `D_S1` and `D_S2`. The earliest window with a click heralds
//! the link; `D_S1` heralds `|Ψ+⟩` and `D_S2` heralds `|Ψ-⟩`. After the storage
//! time the spin wave of the heralded mode is read out; spin waves of every
//! other excited mode leak into the anti-Stokes detectors with probability
//! `crosstalk_eps · η_D` each.
//!
//! [`sample`] draws single trains from this model and [`analytic`] evaluates
//! its expectations exactly. [`calibrate`] fits the noise knobs of the model
//! to measured visibilities.

pub mod analytic;
pub mod calibrate;
pub mod sample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{self, ParamError};

pub use analytic::{expected_pmn, fringe_expectation, FringeModel};
pub use sample::{
    detect_stokes, herald_bsm, readout, readout_pmn, sample_write_train, ReadoutBasis,
    ReadoutCounts, StokesClicks, WriteTrain,
};

#[derive(Debug, Error)]
pub enum LinkError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("readout requested without a herald")]
    NoHerald,
    #[error("herald refers to mode {mode} but the train has {mode_count} modes")]
    ModeOutOfRange { mode: usize, mode_count: usize },
    #[error("storage time {0} s is negative")]
    NegativeStorageTime(f64),
}

/// Physical constants of one elementary link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkParams {
    /// Stokes excitation probability per write pulse and ensemble.
    pub chi: f64,
    pub mode_count: usize,
    #[serde(rename = "pulse_interval_s")]
    pub pulse_interval: f64,
    #[serde(rename = "train_duration_s")]
    pub train_duration: f64,
    /// Intrinsic retrieval efficiency at zero delay, `R₀`.
    #[serde(rename = "r0")]
    pub retrieval_eff_zero: f64,
    /// Spin-wave lifetime `τ₀`.
    #[serde(rename = "tau0_s")]
    pub memory_lifetime: f64,
    /// Total anti-Stokes detection efficiency `η_D`.
    #[serde(rename = "eta_d")]
    pub detection_eff: f64,
    /// Total Stokes detection efficiency from the ensemble to `D_S1`/`D_S2`.
    #[serde(rename = "eta_td")]
    pub stokes_detection_eff: f64,
    /// Interference visibility reached by a perfect single excitation.
    pub visibility_cap: f64,
    /// False-click probability per detector and window.
    pub dark_count_prob: f64,
    /// Leak probability of a phase-mismatched spin wave into the readout.
    pub crosstalk_eps: f64,
    #[serde(rename = "phase_s_rad")]
    pub phase_s: f64,
    #[serde(rename = "phase_as_rad")]
    pub phase_as: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            chi: 0.01,
            mode_count: 12,
            pulse_interval: 400e-9,
            train_duration: 8e-6,
            retrieval_eff_zero: 0.707,
            memory_lifetime: 0.3e-3,
            detection_eff: 0.125,
            stokes_detection_eff: 0.125,
            visibility_cap: 1.0,
            dark_count_prob: 0.0,
            crosstalk_eps: 0.0,
            phase_s: 0.0,
            phase_as: 0.0,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        error::probability("chi", self.chi)?;
        if self.mode_count == 0 {
            return Err(ParamError::new("mode_count", 0.0, "must be at least 1"));
        }
        error::positive("pulse_interval_s", self.pulse_interval)?;
        error::positive("train_duration_s", self.train_duration)?;
        let span = self.pulse_interval * (self.mode_count - 1) as f64;
        if span > self.train_duration * (1.0 + 1e-12) {
            return Err(ParamError::new(
                "train_duration_s",
                self.train_duration,
                "shorter than pulse_interval_s * (mode_count - 1)",
            ));
        }
        error::probability("r0", self.retrieval_eff_zero)?;
        error::positive("tau0_s", self.memory_lifetime)?;
        error::probability("eta_d", self.detection_eff)?;
        error::probability("eta_td", self.stokes_detection_eff)?;
        error::probability("visibility_cap", self.visibility_cap)?;
        error::probability("dark_count_prob", self.dark_count_prob)?;
        error::probability("crosstalk_eps", self.crosstalk_eps)?;
        error::finite("phase_s_rad", self.phase_s)?;
        error::finite("phase_as_rad", self.phase_as)?;
        Ok(())
    }

    /// Soft limits that do not invalidate a run but deserve a mention.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let load = self.chi * self.mode_count as f64;
        if load >= 1.0 {
            out.push(format!(
                "chi * mode_count = {load:.3} >= 1: multi-excitation regime, two-photon truncation is poor"
            ));
        }
        out
    }

    /// Probability that a stored spin wave is retrieved after `storage_time`.
    pub fn retrieval(&self, storage_time: f64) -> f64 {
        self.retrieval_eff_zero * (-storage_time / self.memory_lifetime).exp()
    }

    /// Total readout phase `φ + ϕ`, the fringe offset of `|Ψ+⟩`.
    pub fn fringe_phase(&self) -> f64 {
        self.phase_s + self.phase_as
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Node {
    L,
    R,
}

/// Occupation of one temporal mode in one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeExcitation {
    pub node: Node,
    pub mode_index: usize,
    /// Number of spin-wave excitations, at most 2.
    pub excitation_number: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Detector {
    DS1,
    DS2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeraldSign {
    Plus,
    Minus,
}

impl Detector {
    pub fn sign(self) -> HeraldSign {
        match self {
            Detector::DS1 => HeraldSign::Plus,
            Detector::DS2 => HeraldSign::Minus,
        }
    }
}

/// What actually produced the heralding click. Not observable in an
/// experiment; the simulator keeps it for diagnostics and to decide whether
/// the retrieved photon interferes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeraldOrigin {
    /// One excitation in the window and its Stokes photon fired the
    /// heralding detector.
    SinglePhoton,
    /// Two or more excitations in the heralded window.
    DoubleExcitation,
    /// The heralding detector fired on a dark count.
    DarkCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldEvent {
    pub detector: Detector,
    pub mode_index: usize,
    /// Seconds from the first write pulse.
    pub herald_time: f64,
    pub heralded_sign: HeraldSign,
    pub origin: HeraldOrigin,
}

/// Raw per-trial coincidence probabilities of the `(m, n)` click patterns,
/// `m` for `aS_R` and `n` for `aS_L`. The four entries are joint with the
/// herald, so they sum to the herald probability rather than to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmnTable {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl PmnTable {
    pub fn total(&self) -> f64 {
        self.p00 + self.p01 + self.p10 + self.p11
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        error::probability("p00", self.p00)?;
        error::probability("p01", self.p01)?;
        error::probability("p10", self.p10)?;
        error::probability("p11", self.p11)?;
        if self.total() > 1.0 + 1e-12 {
            return Err(ParamError::new("pmn", self.total(), "entries sum above 1"));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> PmnTable {
        PmnTable {
            p00: self.p00 * k,
            p01: self.p01 * k,
            p10: self.p10 * k,
            p11: self.p11 * k,
        }
    }
}
