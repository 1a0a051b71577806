//! Exhaustive exact solver for small multicast groups.
//!
//! Every set partition of the group is combined with every ordering of its
//! blocks and every admissible transmitter per block (the AP or a member of
//! a block served earlier, which makes the precedence constraint hold by
//! construction). For a fixed transmitter and block the slot count is
//! minimized by the max-min beam over the whole codebook, so each phase
//! uses that beam. Receive beams are the finest-level beams pointing back at
//! the transmitter, as everywhere else in the crate.
//!
//! Among optimal candidates the one with the lexicographically smallest
//! encoding wins, where a candidate is encoded as its phase sequence of
//! `(sorted members, transmitter, beam level, beam index)`.

use std::cmp::Ordering;

use itertools::Itertools;
use rayon::prelude::*;

use crate::channel::Cell;
use crate::error::{Error, Result};
use crate::partition::{best_beam_for, PartitionResult, Selection, Subset, Thresholds, AP_SUBSET};
use crate::schedule::{build_schedule, slots_for, Schedule};
use crate::topology::NodeId;

pub const DEFAULT_MAX_GROUP_SIZE: usize = 5;

/// Largest element count [`enumerate_set_partitions`] accepts.
pub const MAX_PARTITION_ELEMENTS: usize = 12;

/// Iterator over set partitions in restricted-growth-string order.
pub struct SetPartitions<T> {
    elements: Vec<T>,
    rgs: Vec<usize>,
    done: bool,
}

impl<T: Clone> Iterator for SetPartitions<T> {
    type Item = Vec<Vec<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let blocks = self.rgs.iter().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); blocks];
        for (e, &b) in self.elements.iter().zip(&self.rgs) {
            out[b].push(e.clone());
        }
        self.advance();
        Some(out)
    }
}

impl<T> SetPartitions<T> {
    fn advance(&mut self) {
        let n = self.rgs.len();
        // prefix_max[i] = max(rgs[0..i])
        let mut prefix_max = vec![0; n];
        for i in 1..n {
            prefix_max[i] = prefix_max[i - 1].max(self.rgs[i - 1]);
        }
        for i in (1..n).rev() {
            if self.rgs[i] <= prefix_max[i] {
                self.rgs[i] += 1;
                for r in &mut self.rgs[i + 1..] {
                    *r = 0;
                }
                return;
            }
        }
        self.done = true;
    }
}

/// Yields each set partition of `elements` exactly once. Refuses more than
/// [`MAX_PARTITION_ELEMENTS`] elements. An empty input yields one empty
/// partition.
pub fn enumerate_set_partitions<T: Clone>(elements: &[T]) -> Result<SetPartitions<T>> {
    if elements.len() > MAX_PARTITION_ELEMENTS {
        return Err(Error::TooLarge {
            size: elements.len(),
            cap: MAX_PARTITION_ELEMENTS,
        });
    }
    Ok(SetPartitions {
        elements: elements.to_vec(),
        rgs: vec![0; elements.len()],
        done: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub partition: PartitionResult,
    pub schedule: Schedule,
    pub objective: u64,
    /// Number of (partition, block order, transmitter assignment) candidates evaluated.
    pub explored: u64,
}

type Encoding = Vec<(Vec<NodeId>, NodeId, usize, usize)>;

#[derive(Clone)]
struct Best {
    objective: u64,
    encoding: Encoding,
    explored: u64,
}

fn better(a: &Best, b: &Best) -> bool {
    match a.objective.cmp(&b.objective) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.encoding < b.encoding,
    }
}

fn merge(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            let explored = a.explored + b.explored;
            let mut w = if better(&b, &a) { b } else { a };
            w.explored = explored;
            Some(w)
        }
    }
}

struct Table {
    /// `nodes[0]` is the AP, `nodes[i]` the i-th user.
    nodes: Vec<NodeId>,
    /// `[node index][block mask]` -> best beam and slots, `None` when the
    /// node is inside the block or co-located with a member.
    entries: Vec<Vec<Option<(Selection, u64)>>>,
}

/// Solves the scheduling problem exactly on a group of at most
/// `max_group_size` users.
pub fn exhaustive_optimum(
    cell: &Cell<'_>,
    group: &[NodeId],
    demand_bits: f64,
    slot_duration_s: f64,
    max_group_size: usize,
) -> Result<OracleSolution> {
    let users = cell.topology.validate_group(group)?;
    let cap = max_group_size.min(MAX_PARTITION_ELEMENTS);
    if users.len() > cap {
        return Err(Error::TooLarge {
            size: users.len(),
            cap,
        });
    }
    let n = users.len();
    let nodes: Vec<NodeId> = std::iter::once(NodeId::AP).chain(users.iter().copied()).collect();
    let mut entries = vec![vec![None; 1 << n]; n + 1];
    for (ti, &tx) in nodes.iter().enumerate() {
        for (mask, entry) in entries[ti].iter_mut().enumerate().skip(1) {
            if ti > 0 && mask & (1 << (ti - 1)) != 0 {
                continue;
            }
            let targets: Vec<NodeId> = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| users[i])
                .collect();
            match best_beam_for(cell, tx, &targets) {
                Ok(sel) if sel.rate_bps > 0.0 => {
                    let slots = slots_for(demand_bits, sel.rate_bps, slot_duration_s)?;
                    *entry = Some((sel, slots));
                }
                Ok(_) | Err(Error::InvalidGeometry(..)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let table = Table { nodes, entries };

    let index: Vec<usize> = (0..n).collect();
    let partitions: Vec<Vec<usize>> = enumerate_set_partitions(&index)?
        .map(|blocks| {
            blocks
                .iter()
                .map(|b| b.iter().fold(0usize, |m, &i| m | (1 << i)))
                .collect()
        })
        .collect();

    let best = partitions
        .par_iter()
        .map(|blocks| search_partition(&table, blocks))
        .reduce(|| None, merge)
        .filter(|b| !b.encoding.is_empty())
        .ok_or_else(|| Error::InfeasibleSchedule {
            subset: 0,
            reason: "no candidate solution has positive rates".into(),
        })?;

    let mut subsets: Vec<Subset> = Vec::with_capacity(best.encoding.len());
    for (k, (members, tx, level, index)) in best.encoding.iter().enumerate() {
        let beam = *cell
            .codebook
            .beam(crate::antenna::BeamId {
                level: *level,
                index: *index,
            })
            .expect("encoded beam comes from the codebook");
        let serving_subset = if tx.is_ap() {
            AP_SUBSET
        } else {
            subsets
                .iter()
                .find(|s| s.members.contains(tx))
                .map(|s| s.id)
                .expect("transmitter belongs to an earlier block")
        };
        let rate_bps = cell.multicast_rate(*tx, &beam, members)?;
        subsets.push(Subset {
            id: k + 1,
            members: members.clone(),
            serving_subset,
            transmitter: *tx,
            beam,
            rate_bps,
        });
    }
    let partition = PartitionResult {
        subsets,
        thresholds: Thresholds {
            radius_m: 0.0,
            angle_deg: 0.0,
        },
        d2d_enabled: true,
    };
    let schedule = build_schedule(&partition, demand_bits, slot_duration_s)?;
    debug_assert_eq!(schedule.total_slots(), best.objective);
    Ok(OracleSolution {
        objective: schedule.total_slots(),
        partition,
        schedule,
        explored: best.explored,
    })
}

fn search_partition(table: &Table, blocks: &[usize]) -> Option<Best> {
    let mut acc: Option<Best> = None;
    let mut explored = 0u64;
    for order in blocks.iter().copied().permutations(blocks.len()) {
        let mut chosen = Vec::with_capacity(order.len());
        assign(table, &order, 0, 0, 0, &mut chosen, &mut acc, &mut explored);
    }
    if let Some(b) = acc.as_mut() {
        b.explored = explored;
    }
    acc
}

/// Depth-first over transmitter choices for each block of `order`.
#[allow(clippy::too_many_arguments)]
fn assign(
    table: &Table,
    order: &[usize],
    pos: usize,
    served_mask: usize,
    slots: u64,
    chosen: &mut Vec<(usize, usize)>,
    acc: &mut Option<Best>,
    explored: &mut u64,
) {
    if pos == order.len() {
        *explored += 1;
        if acc.as_ref().is_some_and(|b| slots > b.objective) {
            return;
        }
        let encoding: Encoding = chosen
            .iter()
            .map(|&(ti, mask)| {
                let (sel, _) = table.entries[ti][mask].expect("chosen entries exist");
                let members = (0..table.nodes.len() - 1)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| table.nodes[i + 1])
                    .collect();
                (
                    members,
                    table.nodes[ti],
                    sel.beam.level_index,
                    sel.beam.beam_index,
                )
            })
            .collect();
        let cand = Best {
            objective: slots,
            encoding,
            explored: 0,
        };
        if acc.as_ref().is_none_or(|b| better(&cand, b)) {
            *acc = Some(cand);
        }
        return;
    }
    let block = order[pos];
    // AP first, then users already holding the data in ascending id order.
    let candidates = std::iter::once(0).chain(
        (0..table.nodes.len() - 1)
            .filter(|i| served_mask & (1 << i) != 0)
            .map(|i| i + 1),
    );
    for ti in candidates {
        let Some((_, s)) = table.entries[ti][block] else {
            continue;
        };
        chosen.push((ti, block));
        assign(
            table,
            order,
            pos + 1,
            served_mask | block,
            slots + s,
            chosen,
            acc,
            explored,
        );
        chosen.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::Codebook;
    use crate::channel::ChannelModel;
    use crate::partition::select_transmitter_and_beam;
    use crate::schedule::check_feasibility;
    use crate::scheme::Scheme;
    use crate::topology::{Point, Topology};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    const DELTA: f64 = 18e-6;

    fn book() -> Codebook {
        Codebook::new(&[15.0, 30.0, 45.0, 60.0]).unwrap()
    }

    #[test]
    fn bell_numbers() {
        let bell = [1usize, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (n, &b) in bell.iter().enumerate() {
            let items: Vec<usize> = (0..n).collect();
            let all: Vec<_> = enumerate_set_partitions(&items).unwrap().collect();
            assert_eq!(all.len(), b, "Bell({n})");
            let distinct: BTreeSet<Vec<Vec<usize>>> = all
                .iter()
                .map(|p| {
                    let mut p = p.clone();
                    p.sort();
                    p
                })
                .collect();
            assert_eq!(distinct.len(), b);
            for p in &all {
                let mut flat: Vec<usize> = p.iter().flatten().copied().collect();
                flat.sort_unstable();
                assert_eq!(flat, items);
                assert!(p.iter().all(|blk| !blk.is_empty()));
            }
        }
        assert!(enumerate_set_partitions(&[0u8; 13]).is_err());
    }

    #[test]
    fn single_user_optimum() {
        let t = Topology::from_positions(20.0, vec![Point::new(14.0, 13.0)], 0).unwrap();
        let (b, ch) = (book(), ChannelModel::los());
        let cell = Cell::new(&t, &b, &ch, 30.0);
        let sol = exhaustive_optimum(&cell, &t.users(), 1e9, DELTA, 5).unwrap();
        let sel = select_transmitter_and_beam(&cell, &[NodeId(1)], &[NodeId::AP]).unwrap();
        assert_eq!(sol.objective, slots_for(1e9, sel.rate_bps, DELTA).unwrap());
        assert_eq!(sol.schedule.phases.len(), 1);
        assert_eq!(sol.schedule.phases[0].beam, sel.beam);
        assert_eq!(sol.explored, 1);
    }

    #[test]
    fn two_users_on_a_boresight() {
        // Both users due east of the AP, 3 m and 3.4 m out.
        let t =
            Topology::from_positions(20.0, vec![Point::new(13.0, 10.0), Point::new(13.4, 10.0)], 0).unwrap();
        let (b, ch) = (book(), ChannelModel::los());
        let cell = Cell::new(&t, &b, &ch, 30.0);
        let (u1, u2) = (NodeId(1), NodeId(2));
        let slots = |tx: NodeId, targets: &[NodeId]| {
            let sel = select_transmitter_and_beam(&cell, targets, &[tx]).unwrap();
            slots_for(1e9, sel.rate_bps, DELTA).unwrap()
        };
        // Every candidate listed by hand.
        let candidates = [
            slots(NodeId::AP, &[u1, u2]),
            slots(NodeId::AP, &[u1]) + slots(NodeId::AP, &[u2]),
            slots(NodeId::AP, &[u1]) + slots(u1, &[u2]),
            slots(NodeId::AP, &[u2]) + slots(NodeId::AP, &[u1]),
            slots(NodeId::AP, &[u2]) + slots(u2, &[u1]),
        ];
        let sol = exhaustive_optimum(&cell, &t.users(), 1e9, DELTA, 5).unwrap();
        assert_eq!(sol.objective, *candidates.iter().min().unwrap());
        assert_eq!(sol.explored, candidates.len() as u64);
    }

    #[test]
    fn refuses_large_groups() {
        let t = Topology::generate(6, 20.0, 1).unwrap();
        let (b, ch) = (book(), ChannelModel::los());
        let cell = Cell::new(&t, &b, &ch, 30.0);
        assert!(matches!(
            exhaustive_optimum(&cell, &t.users(), 1e9, DELTA, 5),
            Err(Error::TooLarge { size: 6, cap: 5 })
        ));
    }

    #[test]
    fn relabelling_users_keeps_the_objective() {
        for seed in 0..10 {
            let t = Topology::generate(4, 20.0, seed).unwrap();
            let mut pts = t.user_positions().to_vec();
            pts.reverse();
            pts.swap(0, 2);
            let t2 = Topology::from_positions(20.0, pts, 0).unwrap();
            let (b, ch) = (book(), ChannelModel::los());
            let a = exhaustive_optimum(&Cell::new(&t, &b, &ch, 30.0), &t.users(), 1e9, DELTA, 5).unwrap();
            let c = exhaustive_optimum(&Cell::new(&t2, &b, &ch, 30.0), &t2.users(), 1e9, DELTA, 5).unwrap();
            assert_eq!(a.objective, c.objective, "seed {seed}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn oracle_dominates_every_scheme(seed in any::<u64>(), n in 1usize..5, nlos in any::<bool>()) {
            let t = Topology::generate(n, 20.0, seed).unwrap();
            let b = book();
            let ch = if nlos { ChannelModel::nlos(seed) } else { ChannelModel::los() };
            let cell = Cell::new(&t, &b, &ch, 30.0);
            let group = t.users();
            let sol = exhaustive_optimum(&cell, &group, 1e9, DELTA, 5).unwrap();
            let report = check_feasibility(&sol.schedule, &sol.partition, &group, &cell);
            prop_assert!(report.is_feasible(), "{}", report);
            prop_assert_eq!(sol.objective, sol.schedule.total_slots());
            let th = Thresholds::new(6.0, 10.0).unwrap();
            for scheme in Scheme::ALL {
                let plan = scheme.plan(&cell, &group, th, 1e9, DELTA).unwrap();
                prop_assert!(sol.objective <= plan.schedule.total_slots(), "{scheme}");
            }
        }
    }
}
