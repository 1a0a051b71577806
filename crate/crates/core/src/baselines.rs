//! Comparison schedulers.
//!
//! - FDMAC: the AP unicasts to every user in turn with its best
//!   finest-level beam.
//! - MC: the partition pass with D2D disabled, so the AP serves every
//!   subset with a beam from the full codebook.
//! - D2D: one user per phase on finest-level beams, served by whichever
//!   holder of the data (AP or an already-served user) offers the fastest
//!   link.

use crate::channel::Cell;
use crate::error::{Error, Result};
use crate::partition::{partition_and_plan, PartitionResult, Subset, Thresholds, AP_SUBSET};
use crate::schedule::build_schedule;
use crate::scheme::Plan;
use crate::topology::NodeId;

fn singleton_partition(subsets: Vec<Subset>) -> PartitionResult {
    PartitionResult {
        subsets,
        thresholds: Thresholds {
            radius_m: 0.0,
            angle_deg: 0.0,
        },
        d2d_enabled: false,
    }
}

fn zero_rate(subset: usize) -> Error {
    Error::InfeasibleSchedule {
        subset,
        reason: "has no link with positive rate".into(),
    }
}

/// Serial unicast from the AP, users in ascending id order.
pub fn fdmac_schedule(
    cell: &Cell<'_>,
    group: &[NodeId],
    demand_bits: f64,
    slot_duration_s: f64,
) -> Result<Plan> {
    let users = cell.topology.validate_group(group)?;
    let subsets = users
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let (beam, rate) = cell.finest_unicast(NodeId::AP, u)?;
            if !(rate > 0.0) {
                return Err(zero_rate(i + 1));
            }
            Ok(Subset {
                id: i + 1,
                members: vec![u],
                serving_subset: AP_SUBSET,
                transmitter: NodeId::AP,
                beam,
                rate_bps: rate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let partition = singleton_partition(subsets);
    let schedule = build_schedule(&partition, demand_bits, slot_duration_s)?;
    Ok(Plan { partition, schedule })
}

/// Multi-level codebook without D2D.
pub fn mc_schedule(
    cell: &Cell<'_>,
    group: &[NodeId],
    thresholds: Thresholds,
    demand_bits: f64,
    slot_duration_s: f64,
) -> Result<Plan> {
    let partition = partition_and_plan(cell, group, thresholds, false)?;
    let schedule = build_schedule(&partition, demand_bits, slot_duration_s)?;
    Ok(Plan { partition, schedule })
}

/// Greedy D2D chain on finest-level beams.
///
/// Each step picks, over every (holder, unserved user) pair, the one with
/// the highest finest-beam unicast rate; ties go to the lower holder id and
/// then the lower user id. Co-located pairs are never chosen.
pub fn d2d_schedule(
    cell: &Cell<'_>,
    group: &[NodeId],
    demand_bits: f64,
    slot_duration_s: f64,
) -> Result<Plan> {
    let users = cell.topology.validate_group(group)?;
    let n = users.len();
    // nodes[0] is the AP, nodes[i] = users[i - 1].
    let nodes: Vec<NodeId> = std::iter::once(NodeId::AP).chain(users.iter().copied()).collect();
    // best[h][u]: finest unicast from nodes[h] to users[u]; None if co-located.
    let best: Vec<Vec<Option<(crate::antenna::Beam, f64)>>> = nodes
        .iter()
        .map(|&h| {
            users
                .iter()
                .map(|&u| match cell.finest_unicast(h, u) {
                    Ok(v) => Ok(Some(v)),
                    Err(Error::InvalidGeometry(..)) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut holders: Vec<usize> = vec![0];
    let mut served = vec![false; n];
    let mut subset_of_node: Vec<usize> = vec![AP_SUBSET; n + 1];
    let mut subsets = Vec::with_capacity(n);

    for t in 1..=n {
        let mut pick: Option<(usize, usize, f64)> = None;
        // holders are visited in ascending node order, users likewise, so a
        // strict comparison keeps the lexicographically first tie.
        let mut ordered = holders.clone();
        ordered.sort_unstable_by_key(|&h| nodes[h]);
        for &h in &ordered {
            for u in (0..n).filter(|&u| !served[u]) {
                if let Some((_, r)) = best[h][u] {
                    if pick.is_none_or(|(_, _, br)| r > br) {
                        pick = Some((h, u, r));
                    }
                }
            }
        }
        let (h, u, rate) = pick.ok_or_else(|| zero_rate(t))?;
        if !(rate > 0.0) {
            return Err(zero_rate(t));
        }
        let (beam, _) = best[h][u].expect("picked pair has a link");
        served[u] = true;
        holders.push(u + 1);
        subset_of_node[u + 1] = t;
        subsets.push(Subset {
            id: t,
            members: vec![users[u]],
            serving_subset: subset_of_node[h],
            transmitter: nodes[h],
            beam,
            rate_bps: rate,
        });
    }

    let mut partition = singleton_partition(subsets);
    partition.d2d_enabled = true;
    let schedule = build_schedule(&partition, demand_bits, slot_duration_s)?;
    Ok(Plan { partition, schedule })
}
