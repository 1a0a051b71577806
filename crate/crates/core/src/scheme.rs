use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{d2d_schedule, fdmac_schedule, mc_schedule};
use crate::channel::Cell;
use crate::error::{Error, Result};
use crate::partition::{partition_and_plan, PartitionResult, Thresholds};
use crate::schedule::{build_schedule, Schedule};
use crate::topology::NodeId;

/// A partition together with the schedule that serves it.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub partition: PartitionResult,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "MD2D")]
    Md2d,
    #[serde(rename = "MC")]
    Mc,
    #[serde(rename = "D2D")]
    D2d,
    #[serde(rename = "FDMAC")]
    Fdmac,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Md2d, Scheme::Mc, Scheme::D2d, Scheme::Fdmac];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Md2d => "MD2D",
            Scheme::Mc => "MC",
            Scheme::D2d => "D2D",
            Scheme::Fdmac => "FDMAC",
        }
    }

    /// Plans and schedules `group`. Thresholds only matter for MD2D and MC.
    pub fn plan(
        self,
        cell: &Cell<'_>,
        group: &[NodeId],
        thresholds: Thresholds,
        demand_bits: f64,
        slot_duration_s: f64,
    ) -> Result<Plan> {
        match self {
            Scheme::Md2d => {
                let partition = partition_and_plan(cell, group, thresholds, true)?;
                let schedule = build_schedule(&partition, demand_bits, slot_duration_s)?;
                Ok(Plan { partition, schedule })
            }
            Scheme::Mc => mc_schedule(cell, group, thresholds, demand_bits, slot_duration_s),
            Scheme::D2d => d2d_schedule(cell, group, demand_bits, slot_duration_s),
            Scheme::Fdmac => fdmac_schedule(cell, group, demand_bits, slot_duration_s),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown scheme `{s}` (MD2D|MC|D2D|FDMAC)")))
    }
}
