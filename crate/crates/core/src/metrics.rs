//! Network throughput, energy consumption and energy efficiency.
//!
//! Throughput uses the slot-quantized frame time `Σ δ^k·Δ`, energy uses the
//! exact air time `Σ D/R_k`; the two timing bases are kept distinct.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::schedule::Schedule;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// `NT = |U|·D / (Σ δ^k·Δ)` in b/s.
pub fn network_throughput(schedule: &Schedule, group_size: usize) -> Result<f64> {
    let slots = schedule.total_slots();
    if slots == 0 {
        return Err(Error::invalid("throughput of a schedule with zero slots"));
    }
    Ok(group_size as f64 * schedule.demand_bits / (slots as f64 * schedule.slot_duration_s))
}

/// `EC = Σ (D / R_k)·P_t` in joules, `P_t` in watts.
pub fn energy_consumption(schedule: &Schedule, tx_power_w: f64) -> Result<f64> {
    if let Some(p) = schedule.phases.iter().find(|p| !(p.rate_bps > 0.0)) {
        return Err(Error::invalid(format!(
            "phase {} has nonpositive rate {}",
            p.index, p.rate_bps
        )));
    }
    Ok(schedule
        .phases
        .iter()
        .map(|p| schedule.demand_bits / p.rate_bps * tx_power_w)
        .sum())
}

/// `EE = NT / EC` in b/s/J.
pub fn energy_efficiency(network_throughput_bps: f64, energy_consumption_j: f64) -> Result<f64> {
    if !(energy_consumption_j > 0.0) {
        return Err(Error::invalid(format!(
            "energy efficiency needs positive energy, got {energy_consumption_j}"
        )));
    }
    Ok(network_throughput_bps / energy_consumption_j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub network_throughput_bps: f64,
    pub energy_consumption_j: f64,
    pub energy_efficiency_bpj: f64,
    pub group_size: usize,
    pub demand_bits: f64,
    pub tx_power_w: f64,
}

impl MetricsReport {
    pub fn evaluate(schedule: &Schedule, group_size: usize, tx_power_dbm: f64) -> Result<Self> {
        let tx_power_w = dbm_to_watts(tx_power_dbm);
        let nt = network_throughput(schedule, group_size)?;
        let ec = energy_consumption(schedule, tx_power_w)?;
        Ok(Self {
            network_throughput_bps: nt,
            energy_consumption_j: ec,
            energy_efficiency_bpj: energy_efficiency(nt, ec)?,
            group_size,
            demand_bits: schedule.demand_bits,
            tx_power_w,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::Codebook;
    use crate::schedule::Phase;
    use crate::topology::NodeId;

    fn schedule(rates_and_slots: &[(f64, u64)], demand_bits: f64, slot: f64) -> Schedule {
        let beam = Codebook::new(&[15.0]).unwrap().finest_level().beams[0];
        Schedule {
            phases: rates_and_slots
                .iter()
                .enumerate()
                .map(|(k, &(rate_bps, slots))| Phase {
                    index: k + 1,
                    transmitter: NodeId::AP,
                    target_subset: k + 1,
                    beam,
                    rate_bps,
                    slots,
                })
                .collect(),
            demand_bits,
            slot_duration_s: slot,
        }
    }

    #[test]
    fn throughput_of_eight_slot_frame() {
        let s = schedule(&[(1.0, 3), (1.0, 3), (1.0, 2)], 1e9, 18e-6);
        let nt = network_throughput(&s, 4).unwrap();
        assert!((nt - 4e9 / (8.0 * 18e-6)).abs() <= 1e-6 * nt);
        let single = schedule(&[(1.0, 5)], 1e9, 18e-6);
        assert_eq!(network_throughput(&single, 1).unwrap(), 1e9 / (5.0 * 18e-6));
        assert!(network_throughput(&schedule(&[], 1e9, 18e-6), 3).is_err());
    }

    #[test]
    fn throughput_is_demand_invariant_up_to_ceiling() {
        use crate::schedule::slots_for;
        let rates = [2.3e10, 3.1e10, 2.7e10];
        let build = |d: f64| {
            let rs: Vec<(f64, u64)> = rates
                .iter()
                .map(|&r| (r, slots_for(d, r, 18e-6).unwrap()))
                .collect();
            schedule(&rs, d, 18e-6)
        };
        let a = network_throughput(&build(1e9), 3).unwrap();
        let b = network_throughput(&build(2e9), 3).unwrap();
        assert!((a / b - 1.0).abs() < 1e-3);
    }

    #[test]
    fn energy_examples() {
        let s = schedule(&[(2e9, 27778)], 1e9, 18e-6);
        assert!((energy_consumption(&s, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let two_d = schedule(&[(2e9, 1)], 2e9, 18e-6);
        assert!((energy_consumption(&two_d, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((energy_consumption(&s, 3.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(energy_consumption(&schedule(&[(0.0, 1)], 1e9, 18e-6), 1.0).is_err());
        assert_eq!(dbm_to_watts(30.0), 1.0);
        assert!((dbm_to_watts(40.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(energy_efficiency(2.0, 1.0).unwrap(), 2.0);
        assert_eq!(energy_efficiency(2.0, 4.0).unwrap(), 0.5);
        assert!(energy_efficiency(2.0, 0.0).is_err());
        let s = schedule(&[(3.3e10, 1684), (2.1e10, 2646)], 1e9, 18e-6);
        let m = MetricsReport::evaluate(&s, 5, 33.0).unwrap();
        let back = m.energy_efficiency_bpj * m.energy_consumption_j;
        assert!((back - m.network_throughput_bps).abs() <= 1e-12 * m.network_throughput_bps);
        assert!(s.transmission_time_s() <= s.frame_time_s());
    }
}
