//! Link budget: received power, SNR and achievable rate.
//!
//! Received power follows the directional path-loss model
//! `P_rx = k0 · G_tx · G_rx · d^-τ · P_t`, evaluated in dB. Under NLOS a
//! zero-mean Gaussian shadowing term (dB) is added; it is drawn once per
//! ordered link from the model's shadowing seed so every evaluation of the
//! same link within a run sees the same value. The SNR is taken against
//! thermal noise `N0·W` and the rate is `η·W·log2(1 + SNR)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::antenna::{Beam, Codebook};
use crate::error::{Error, Result};
use crate::rng;
use crate::topology::{NodeId, Topology};

const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PropagationMode {
    #[serde(rename = "LOS")]
    Los,
    #[serde(rename = "NLOS")]
    Nlos,
}

impl fmt::Display for PropagationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PropagationMode::Los => "LOS",
            PropagationMode::Nlos => "NLOS",
        })
    }
}

impl FromStr for PropagationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LOS" => Ok(PropagationMode::Los),
            "NLOS" => Ok(PropagationMode::Nlos),
            _ => Err(Error::invalid(format!(
                "unknown propagation mode `{s}` (LOS|NLOS)"
            ))),
        }
    }
}

/// Channel constants as they appear in the experiment configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub carrier_frequency_ghz: f64,
    /// Multiplier on `(λ/4π)^2` giving k0.
    pub k0_scale: f64,
    pub path_loss_exponent_los: f64,
    pub path_loss_exponent_nlos: f64,
    pub noise_psd_dbm_per_mhz: f64,
    pub bandwidth_mhz: f64,
    pub transceiver_efficiency: f64,
    pub shadowing_sigma_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_frequency_ghz: 60.0,
            k0_scale: 1.0,
            path_loss_exponent_los: 2.0,
            path_loss_exponent_nlos: 3.01,
            noise_psd_dbm_per_mhz: -134.0,
            bandwidth_mhz: 2160.0,
            transceiver_efficiency: 0.5,
            shadowing_sigma_db: 5.8,
        }
    }
}

impl ChannelParams {
    pub fn model(&self, mode: PropagationMode, shadowing_seed: u64) -> Result<ChannelModel> {
        if !(self.carrier_frequency_ghz > 0.0) {
            return Err(Error::config("channel.carrier_frequency_ghz", "must be positive"));
        }
        if !(self.k0_scale > 0.0) {
            return Err(Error::config("channel.k0_scale", "must be positive"));
        }
        let wavelength_m = SPEED_OF_LIGHT_M_S / (self.carrier_frequency_ghz * 1e9);
        let (path_loss_exponent, shadowing_sigma_db) = match mode {
            PropagationMode::Los => (self.path_loss_exponent_los, 0.0),
            PropagationMode::Nlos => (self.path_loss_exponent_nlos, self.shadowing_sigma_db),
        };
        let model = ChannelModel {
            mode,
            path_loss_exponent,
            wavelength_m,
            k0: self.k0_scale * (wavelength_m / (4.0 * PI)).powi(2),
            noise_psd_dbm_per_mhz: self.noise_psd_dbm_per_mhz,
            bandwidth_mhz: self.bandwidth_mhz,
            efficiency: self.transceiver_efficiency,
            shadowing_sigma_db,
            shadowing_seed,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Resolved propagation model for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub mode: PropagationMode,
    pub path_loss_exponent: f64,
    pub wavelength_m: f64,
    pub k0: f64,
    pub noise_psd_dbm_per_mhz: f64,
    pub bandwidth_mhz: f64,
    pub efficiency: f64,
    /// Zero under LOS.
    pub shadowing_sigma_db: f64,
    pub shadowing_seed: u64,
}

impl ChannelModel {
    pub fn los() -> Self {
        ChannelParams::default()
            .model(PropagationMode::Los, 0)
            .expect("default parameters are valid")
    }

    pub fn nlos(shadowing_seed: u64) -> Self {
        ChannelParams::default()
            .model(PropagationMode::Nlos, shadowing_seed)
            .expect("default parameters are valid")
    }

    fn validate(&self) -> Result<()> {
        if !(self.path_loss_exponent > 0.0) {
            return Err(Error::config("channel.path_loss_exponent", "must be positive"));
        }
        if !(self.efficiency > 0.0 && self.efficiency < 1.0) {
            return Err(Error::config(
                "channel.transceiver_efficiency",
                "must lie in (0, 1)",
            ));
        }
        if !(self.bandwidth_mhz > 0.0) {
            return Err(Error::config("channel.bandwidth_mhz", "must be positive"));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::config("channel.shadowing_sigma_db", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn k0_db(&self) -> f64 {
        10.0 * self.k0.log10()
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_mhz * 1e6
    }

    /// Shadowing perturbation (dB) of the ordered link `tx -> rx`.
    pub fn shadowing_db(&self, tx: NodeId, rx: NodeId) -> f64 {
        if self.mode == PropagationMode::Los || self.shadowing_sigma_db == 0.0 {
            return 0.0;
        }
        let link = (u64::from(tx.0) << 32) | u64::from(rx.0);
        let mut stream = rng::stream(rng::derive_seed(self.shadowing_seed, link));
        Normal::new(0.0, self.shadowing_sigma_db)
            .expect("sigma validated nonnegative")
            .sample(&mut stream)
    }

    /// Received power in dBm for a link of length `distance_m`.
    pub fn received_power_dbm(
        &self,
        tx_gain_db: f64,
        rx_gain_db: f64,
        distance_m: f64,
        tx_power_dbm: f64,
        link: (NodeId, NodeId),
    ) -> Result<f64> {
        if !(distance_m > 0.0) {
            return Err(Error::invalid(format!(
                "link distance must be positive, got {distance_m}"
            )));
        }
        Ok(tx_power_dbm + tx_gain_db + rx_gain_db + self.k0_db()
            - 10.0 * self.path_loss_exponent * distance_m.log10()
            + self.shadowing_db(link.0, link.1))
    }

    /// Noise power `N0·W` in dBm.
    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_psd_dbm_per_mhz + 10.0 * self.bandwidth_mhz.log10()
    }

    pub fn snr(&self, rx_power_dbm: f64) -> f64 {
        10f64.powf((rx_power_dbm - self.noise_power_dbm()) / 10.0)
    }

    /// Achievable rate in b/s.
    pub fn rate(&self, snr_linear: f64) -> f64 {
        self.efficiency * self.bandwidth_hz() * (1.0 + snr_linear.max(0.0)).log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub rx_power_dbm: f64,
    pub snr_linear: f64,
    pub rate_bps: f64,
}

/// Everything needed to evaluate links in one small cell.
#[derive(Debug, Clone, Copy)]
pub struct Cell<'a> {
    pub topology: &'a Topology,
    pub codebook: &'a Codebook,
    pub channel: &'a ChannelModel,
    pub tx_power_dbm: f64,
}

impl<'a> Cell<'a> {
    pub fn new(
        topology: &'a Topology,
        codebook: &'a Codebook,
        channel: &'a ChannelModel,
        tx_power_dbm: f64,
    ) -> Self {
        Self {
            topology,
            codebook,
            channel,
            tx_power_dbm,
        }
    }

    /// Budget of `tx -> rx` when `tx` transmits on `tx_beam` and `rx` points
    /// its best finest-level receive beam back at `tx`.
    pub fn link_budget(&self, tx: NodeId, tx_beam: &Beam, rx: NodeId) -> Result<LinkBudget> {
        let (p_tx, p_rx) = (self.topology.position(tx), self.topology.position(rx));
        let distance = p_tx.distance(p_rx);
        if tx == rx || distance == 0.0 {
            return Err(Error::InvalidGeometry(tx, rx));
        }
        let departure = p_tx.bearing_deg(p_rx);
        let arrival = p_rx.bearing_deg(p_tx);
        let rx_beam = self.codebook.best_receive_beam(arrival);
        let rx_power_dbm = self.channel.received_power_dbm(
            tx_beam.gain_toward_db(departure),
            rx_beam.gain_toward_db(arrival),
            distance,
            self.tx_power_dbm,
            (tx, rx),
        )?;
        let snr_linear = self.channel.snr(rx_power_dbm);
        Ok(LinkBudget {
            rx_power_dbm,
            snr_linear,
            rate_bps: self.channel.rate(snr_linear),
        })
    }

    pub fn link_rate(&self, tx: NodeId, tx_beam: &Beam, rx: NodeId) -> Result<f64> {
        self.link_budget(tx, tx_beam, rx).map(|b| b.rate_bps)
    }

    /// Minimum link rate from `tx` on `beam` over `targets`.
    pub fn multicast_rate(&self, tx: NodeId, beam: &Beam, targets: &[NodeId]) -> Result<f64> {
        let mut rate = f64::INFINITY;
        for &t in targets {
            rate = rate.min(self.link_rate(tx, beam, t)?);
        }
        if targets.is_empty() {
            return Err(Error::invalid("multicast rate over an empty target set"));
        }
        Ok(rate)
    }

    /// Best unicast rate from `tx` to `rx` using the finest codebook level.
    pub fn finest_unicast(&self, tx: NodeId, rx: NodeId) -> Result<(Beam, f64)> {
        let mut best: Option<(Beam, f64)> = None;
        for beam in &self.codebook.finest_level().beams {
            let r = self.link_rate(tx, beam, rx)?;
            if best.is_none_or(|(_, br)| r > br) {
                best = Some((*beam, r));
            }
        }
        Ok(best.expect("finest level has at least one beam"))
    }
}
