//! Experiment configuration.
//!
//! The file is TOML with three dotted sections besides `[experiment]`:
//! `[channel]`, `[antenna]` and `[oracle]`. Every key has a default, so an
//! empty file describes the reference experiment. Sweep keys take arrays;
//! a scalar is accepted as a one-element sweep.

use serde::{Deserialize, Deserializer, Serialize};

use crate::antenna::{Codebook, GainClosure};
use crate::channel::{ChannelParams, PropagationMode};
use crate::error::{Error, Result};
use crate::oracle::DEFAULT_MAX_GROUP_SIZE;
use crate::partition::Thresholds;
use crate::scheme::Scheme;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub channel: ChannelParams,
    pub antenna: AntennaSection,
    pub oracle: OracleSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    #[serde(deserialize_with = "one_or_many")]
    pub schemes: Vec<Scheme>,
    #[serde(deserialize_with = "one_or_many")]
    pub num_users: Vec<usize>,
    #[serde(deserialize_with = "one_or_many")]
    pub tx_power_dbm: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub demand_bits: Vec<f64>,
    pub mode: PropagationMode,
    #[serde(deserialize_with = "one_or_many")]
    pub r_th_m: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub theta_th_deg: Vec<f64>,
    pub runs_per_point: usize,
    pub master_seed: u64,
    pub slot_duration_s: f64,
    pub area_side_m: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            num_users: vec![5, 10, 15, 20, 25, 30],
            tx_power_dbm: vec![30.0],
            demand_bits: vec![1e9],
            mode: PropagationMode::Los,
            r_th_m: vec![6.0],
            theta_th_deg: vec![10.0],
            runs_per_point: 100,
            master_seed: 1,
            slot_duration_s: 18e-6,
            area_side_m: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AntennaSection {
    pub beamwidths_deg: Vec<f64>,
    pub main_lobe_factor: f64,
    pub peak_gain_numerator: f64,
    pub sidelobe_log_slope_db: f64,
    pub sidelobe_offset_db: f64,
}

impl Default for AntennaSection {
    fn default() -> Self {
        let c = GainClosure::default();
        Self {
            beamwidths_deg: vec![15.0, 30.0, 45.0, 60.0],
            main_lobe_factor: c.main_lobe_factor,
            peak_gain_numerator: c.peak_gain_numerator,
            sidelobe_log_slope_db: c.sidelobe_log_slope_db,
            sidelobe_offset_db: c.sidelobe_offset_db,
        }
    }
}

impl AntennaSection {
    pub fn closure(&self) -> GainClosure {
        GainClosure {
            main_lobe_factor: self.main_lobe_factor,
            peak_gain_numerator: self.peak_gain_numerator,
            sidelobe_log_slope_db: self.sidelobe_log_slope_db,
            sidelobe_offset_db: self.sidelobe_offset_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub max_group_size: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            max_group_size: DEFAULT_MAX_GROUP_SIZE,
        }
    }
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        Many(Vec<T>),
        One(T),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(x) => vec![x],
    })
}

/// One cell of the sweep cross product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub num_users: usize,
    pub tx_power_dbm: f64,
    pub demand_bits: f64,
    pub mode: PropagationMode,
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    /// Parses TOML text and applies `key=value` overrides, where `key` is a
    /// dotted path such as `experiment.num_users` or `channel.bandwidth_mhz`
    /// and `value` is a TOML value (bare words are taken as strings).
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_error_from_toml(&e))?;
        for (key, value) in overrides {
            set_dotted(&mut table, key, value)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_error_from_toml(&e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.schemes.is_empty() {
            return Err(Error::config("experiment.schemes", "must not be empty"));
        }
        if e.num_users.is_empty() {
            return Err(Error::config("experiment.num_users", "must not be empty"));
        }
        if e.num_users.contains(&0) {
            return Err(Error::config(
                "experiment.num_users",
                "entries must be at least 1",
            ));
        }
        if e.tx_power_dbm.is_empty() {
            return Err(Error::config("experiment.tx_power_dbm", "must not be empty"));
        }
        if e.tx_power_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("experiment.tx_power_dbm", "entries must be finite"));
        }
        if e.demand_bits.is_empty() {
            return Err(Error::config("experiment.demand_bits", "must not be empty"));
        }
        if e.demand_bits.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::config(
                "experiment.demand_bits",
                "entries must be positive",
            ));
        }
        for (field, v) in [
            ("experiment.r_th_m", &e.r_th_m),
            ("experiment.theta_th_deg", &e.theta_th_deg),
        ] {
            if v.is_empty() {
                return Err(Error::config(field, "must not be empty"));
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::config(field, "entries must be finite and nonnegative"));
            }
        }
        if e.runs_per_point == 0 {
            return Err(Error::config("experiment.runs_per_point", "must be at least 1"));
        }
        if !(e.slot_duration_s.is_finite() && e.slot_duration_s > 0.0) {
            return Err(Error::config("experiment.slot_duration_s", "must be positive"));
        }
        if !(e.area_side_m.is_finite() && e.area_side_m > 0.0) {
            return Err(Error::config("experiment.area_side_m", "must be positive"));
        }
        self.codebook()?;
        self.channel.model(e.mode, 0)?;
        Ok(())
    }

    pub fn codebook(&self) -> Result<Codebook> {
        Codebook::with_closure(&self.antenna.beamwidths_deg, self.antenna.closure()).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::config("antenna", m),
            other => other,
        })
    }

    /// Sweep points in canonical order: users, power, demand, r_th, θ_th.
    pub fn points(&self) -> Vec<SweepPoint> {
        let e = &self.experiment;
        let mut out = Vec::new();
        for &num_users in &e.num_users {
            for &tx_power_dbm in &e.tx_power_dbm {
                for &demand_bits in &e.demand_bits {
                    for &radius_m in &e.r_th_m {
                        for &angle_deg in &e.theta_th_deg {
                            out.push(SweepPoint {
                                num_users,
                                tx_power_dbm,
                                demand_bits,
                                mode: e.mode,
                                thresholds: Thresholds { radius_m, angle_deg },
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

fn config_error_from_toml(e: &toml::de::Error) -> Error {
    let message = e.message().trim().to_string();
    // serde reports unknown keys as "unknown field `x`"; surface x as the field
    let field = message
        .split('`')
        .nth(1)
        .filter(|_| message.starts_with("unknown field") || message.starts_with("invalid"))
        .unwrap_or("config")
        .to_string();
    Error::Config { field, message }
}

fn set_dotted(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty path segment"));
    }
    let value = parse_value(raw);
    let (last, parents) = parts.split_last().expect("split yields a segment");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    doc.parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
