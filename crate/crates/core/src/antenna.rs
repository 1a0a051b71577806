//! Multi-level beam codebook and the Gaussian-main-lobe / flat-side-lobe
//! gain pattern.
//!
//! The pattern in dB is
//!
//! ```text
//! G(θ) = G0 - 3.01 * (2θ / θ_3dB)^2     for 0 <= θ < θ_ml / 2
//! G(θ) = G_sl                           for θ_ml / 2 <= θ <= 180
//! ```
//!
//! where θ is the angular offset from boresight. The main-lobe width θ_ml,
//! the peak gain G0 and the side-lobe floor G_sl are derived from θ_3dB by a
//! [`GainClosure`]; its default is the usual reference-antenna closure
//! θ_ml = 2.6·θ_3dB, G0 = 20·log10(1.6162 / sin(θ_3dB / 2)),
//! G_sl = -0.4111·ln(θ_3dB) - 10.579 (θ_3dB in degrees).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::angular_distance_deg;

/// Drop of the Gaussian main lobe at the half-power offset, in dB.
pub const HALF_POWER_DROP_DB: f64 = 3.01;

/// Constants that turn a half-power beamwidth into a full gain pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainClosure {
    /// θ_ml / θ_3dB.
    pub main_lobe_factor: f64,
    /// Numerator of the peak-gain expression `(k / sin(θ_3dB/2))^2`.
    pub peak_gain_numerator: f64,
    /// Coefficient of `ln(θ_3dB)` in the side-lobe floor, dB.
    pub sidelobe_log_slope_db: f64,
    /// Constant term of the side-lobe floor, dB.
    pub sidelobe_offset_db: f64,
}

impl Default for GainClosure {
    fn default() -> Self {
        Self {
            main_lobe_factor: 2.6,
            peak_gain_numerator: 1.6162,
            sidelobe_log_slope_db: -0.4111,
            sidelobe_offset_db: -10.579,
        }
    }
}

impl GainClosure {
    pub fn main_lobe_width_deg(&self, theta_3db_deg: f64) -> f64 {
        self.main_lobe_factor * theta_3db_deg
    }

    pub fn peak_gain_db(&self, theta_3db_deg: f64) -> f64 {
        let s = (theta_3db_deg / 2.0).to_radians().sin();
        10.0 * (self.peak_gain_numerator / s).powi(2).log10()
    }

    pub fn sidelobe_gain_db(&self, theta_3db_deg: f64) -> f64 {
        self.sidelobe_log_slope_db * theta_3db_deg.ln() + self.sidelobe_offset_db
    }
}

/// Position of a beam in the codebook: `level` counts from the widest level
/// (0) to the finest, `index` is the beam number within its level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BeamId {
    pub level: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beam {
    pub level_index: usize,
    pub beam_index: usize,
    pub boresight_deg: f64,
    pub theta_3db_deg: f64,
    pub theta_ml_deg: f64,
    pub g0_db: f64,
    pub gsl_db: f64,
}

impl Beam {
    pub fn id(&self) -> BeamId {
        BeamId {
            level: self.level_index,
            index: self.beam_index,
        }
    }

    /// Gain at an absolute offset from boresight, `offset_deg` in `[0, 180]`.
    pub fn gain_db(&self, offset_deg: f64) -> f64 {
        if offset_deg < self.theta_ml_deg / 2.0 {
            let x = 2.0 * offset_deg / self.theta_3db_deg;
            self.g0_db - HALF_POWER_DROP_DB * x * x
        } else {
            self.gsl_db
        }
    }

    /// Gain in an arbitrary direction (degrees).
    pub fn gain_toward_db(&self, direction_deg: f64) -> f64 {
        self.gain_db(angular_distance_deg(direction_deg, self.boresight_deg))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookLevel {
    pub half_power_beamwidth_deg: f64,
    pub beams: Vec<Beam>,
}

/// An L-level codebook, levels ordered from widest to narrowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    levels: Vec<CodebookLevel>,
    closure: GainClosure,
}

impl Codebook {
    pub fn new(beamwidths_deg: &[f64]) -> Result<Self> {
        Self::with_closure(beamwidths_deg, GainClosure::default())
    }

    /// Builds one level per beamwidth with ⌈360/θ_3dB⌉ beams whose
    /// boresights sit at multiples of θ_3dB.
    pub fn with_closure(beamwidths_deg: &[f64], closure: GainClosure) -> Result<Self> {
        if beamwidths_deg.is_empty() {
            return Err(Error::invalid("codebook needs at least one beamwidth"));
        }
        if let Some(bad) = beamwidths_deg.iter().find(|&&w| !(w > 0.0 && w < 180.0)) {
            return Err(Error::invalid(format!(
                "half-power beamwidth {bad} outside (0, 180) degrees"
            )));
        }
        if !(closure.main_lobe_factor > 1.0) {
            return Err(Error::invalid("main lobe factor must exceed 1"));
        }
        let mut widths = beamwidths_deg.to_vec();
        widths.sort_by(|a, b| b.total_cmp(a));
        if widths.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate beamwidth in codebook"));
        }
        let levels = widths
            .iter()
            .enumerate()
            .map(|(level_index, &theta)| {
                let count = (360.0 / theta).ceil() as usize;
                let (g0, gsl) = (closure.peak_gain_db(theta), closure.sidelobe_gain_db(theta));
                let beams = (0..count)
                    .map(|beam_index| Beam {
                        level_index,
                        beam_index,
                        boresight_deg: beam_index as f64 * theta,
                        theta_3db_deg: theta,
                        theta_ml_deg: closure.main_lobe_width_deg(theta),
                        g0_db: g0,
                        gsl_db: gsl,
                    })
                    .collect();
                CodebookLevel {
                    half_power_beamwidth_deg: theta,
                    beams,
                }
            })
            .collect();
        let book = Self { levels, closure };
        if let Some(b) = book.beams().find(|b| b.g0_db <= b.gsl_db) {
            return Err(Error::invalid(format!(
                "closure gives peak gain {} dB not above side-lobe floor {} dB at {}°",
                b.g0_db, b.gsl_db, b.theta_3db_deg
            )));
        }
        Ok(book)
    }

    pub fn levels(&self) -> &[CodebookLevel] {
        &self.levels
    }

    pub fn closure(&self) -> &GainClosure {
        &self.closure
    }

    pub fn finest_level(&self) -> &CodebookLevel {
        self.levels.last().expect("codebook is never empty")
    }

    pub fn beam(&self, id: BeamId) -> Option<&Beam> {
        self.levels.get(id.level)?.beams.get(id.index)
    }

    /// Every beam, widest level first.
    pub fn beams(&self) -> impl Iterator<Item = &Beam> {
        self.levels.iter().flat_map(|l| l.beams.iter())
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(|l| l.beams.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Beam of `level` whose boresight is closest to `direction_deg`; ties go
    /// to the lower beam index.
    pub fn closest_beam(&self, level: &CodebookLevel, direction_deg: f64) -> Beam {
        let mut best = level.beams[0];
        let mut best_off = angular_distance_deg(direction_deg, best.boresight_deg);
        for beam in &level.beams[1..] {
            let off = angular_distance_deg(direction_deg, beam.boresight_deg);
            if off < best_off {
                best = *beam;
                best_off = off;
            }
        }
        best
    }

    /// Receive beam a user points at its transmitter: the finest-level beam
    /// closest to the direction of arrival.
    pub fn best_receive_beam(&self, direction_deg: f64) -> Beam {
        self.closest_beam(self.finest_level(), direction_deg)
    }
}
