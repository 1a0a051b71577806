//! Phase scheduling, slot sizing, and the feasibility checker.
//!
//! A schedule is a sequence of phases; phase `k` carries exactly one
//! multicast transmission `s_k -> U_k` lasting `δ^k = ⌈D / (R_k·Δ)⌉` slots.
//! The objective is the total slot count `Σ_k δ^k`.
//!
//! [`check_feasibility`] re-derives every constraint from positions and
//! beams alone: partition coverage, subset count, binary phase
//! assignment, single service per subset, max-min subset rate, codebook
//! membership of beams, demand coverage and D2D precedence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::antenna::{Beam, BeamId};
use crate::channel::Cell;
use crate::error::{Error, Result};
use crate::partition::{PartitionResult, Subset, Thresholds, AP_SUBSET};
use crate::topology::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    /// 1-based.
    pub index: usize,
    pub transmitter: NodeId,
    pub target_subset: usize,
    pub beam: Beam,
    pub rate_bps: f64,
    pub slots: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub phases: Vec<Phase>,
    pub demand_bits: f64,
    pub slot_duration_s: f64,
}

/// Whether `slots` slots at `rate_bps` deliver `demand_bits`.
pub fn covers_demand(slots: u64, rate_bps: f64, slot_duration_s: f64, demand_bits: f64) -> bool {
    slots as f64 * slot_duration_s * rate_bps >= demand_bits
}

/// Smallest slot count delivering `demand_bits` at `rate_bps`.
pub fn slots_for(demand_bits: f64, rate_bps: f64, slot_duration_s: f64) -> Result<u64> {
    if !(rate_bps > 0.0 && rate_bps.is_finite()) {
        return Err(Error::invalid(format!("rate must be positive, got {rate_bps}")));
    }
    if !(demand_bits > 0.0) || !(slot_duration_s > 0.0) {
        return Err(Error::invalid("demand and slot duration must be positive"));
    }
    let mut slots = (demand_bits / (rate_bps * slot_duration_s)).ceil() as u64;
    // Settle rounding at the ceiling boundary so the evaluated product agrees.
    while !covers_demand(slots, rate_bps, slot_duration_s, demand_bits) {
        slots += 1;
    }
    while slots > 1 && covers_demand(slots - 1, rate_bps, slot_duration_s, demand_bits) {
        slots -= 1;
    }
    Ok(slots.max(1))
}

fn validate_sizing(demand_bits: f64, slot_duration_s: f64) -> Result<()> {
    if !(demand_bits > 0.0 && demand_bits.is_finite()) {
        return Err(Error::invalid(format!(
            "demand must be positive, got {demand_bits}"
        )));
    }
    if !(slot_duration_s > 0.0 && slot_duration_s.is_finite()) {
        return Err(Error::invalid(format!(
            "slot duration must be positive, got {slot_duration_s}"
        )));
    }
    Ok(())
}

/// One phase per subset, in allocation order.
pub fn build_schedule(
    partition: &PartitionResult,
    demand_bits: f64,
    slot_duration_s: f64,
) -> Result<Schedule> {
    validate_sizing(demand_bits, slot_duration_s)?;
    let phases = partition
        .subsets
        .iter()
        .enumerate()
        .map(|(k, s)| {
            if !(s.rate_bps > 0.0) {
                return Err(Error::InfeasibleSchedule {
                    subset: s.id,
                    reason: format!("has rate {} b/s", s.rate_bps),
                });
            }
            Ok(Phase {
                index: k + 1,
                transmitter: s.transmitter,
                target_subset: s.id,
                beam: s.beam,
                rate_bps: s.rate_bps,
                slots: slots_for(demand_bits, s.rate_bps, slot_duration_s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Schedule {
        phases,
        demand_bits,
        slot_duration_s,
    })
}

impl Schedule {
    /// Objective value `Σ_k δ^k`.
    pub fn total_slots(&self) -> u64 {
        self.phases.iter().map(|p| p.slots).sum()
    }

    /// Exact air time `Σ_k D / R_k`.
    pub fn transmission_time_s(&self) -> f64 {
        self.phases.iter().map(|p| self.demand_bits / p.rate_bps).sum()
    }

    pub fn frame_time_s(&self) -> f64 {
        self.total_slots() as f64 * self.slot_duration_s
    }
}

pub fn total_slots(schedule: &Schedule) -> u64 {
    schedule.total_slots()
}

/// The constraints of the multicast scheduling problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constraint {
    Coverage,
    SubsetCount,
    BinaryAssignment,
    ScheduledOnce,
    SubsetRate,
    CodebookBeam,
    Demand,
    Precedence,
}

impl Constraint {
    pub const ALL: [Constraint; 8] = [
        Constraint::Coverage,
        Constraint::SubsetCount,
        Constraint::BinaryAssignment,
        Constraint::ScheduledOnce,
        Constraint::SubsetRate,
        Constraint::CodebookBeam,
        Constraint::Demand,
        Constraint::Precedence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Constraint::Coverage => "coverage",
            Constraint::SubsetCount => "subset-count",
            Constraint::BinaryAssignment => "binary-assignment",
            Constraint::ScheduledOnce => "scheduled-once",
            Constraint::SubsetRate => "subset-rate",
            Constraint::CodebookBeam => "codebook-beam",
            Constraint::Demand => "demand",
            Constraint::Precedence => "precedence",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    pub detail: String,
}

/// Per-constraint outcome of [`check_feasibility`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn passes(&self, c: Constraint) -> bool {
        !self.violations.iter().any(|v| v.constraint == c)
    }

    pub fn violated(&self) -> BTreeSet<Constraint> {
        self.violations.iter().map(|v| v.constraint).collect()
    }

    fn flag(&mut self, constraint: Constraint, detail: impl Into<String>) {
        self.violations.push(Violation {
            constraint,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in Constraint::ALL {
            let hits: Vec<&Violation> = self.violations.iter().filter(|v| v.constraint == c).collect();
            if hits.is_empty() {
                writeln!(f, "{c}: pass")?;
            } else {
                writeln!(f, "{c}: FAIL")?;
                for v in hits {
                    writeln!(f, "    {}", v.detail)?;
                }
            }
        }
        Ok(())
    }
}

/// Checks `schedule` against every constraint, recomputing all rates from
/// the raw geometry. Only `id` and `members` of the partition's subsets are
/// trusted; transmitters, beams and rates come from the schedule itself.
pub fn check_feasibility(
    schedule: &Schedule,
    partition: &PartitionResult,
    group: &[NodeId],
    cell: &Cell<'_>,
) -> FeasibilityReport {
    let mut report = FeasibilityReport::default();
    let group: BTreeSet<NodeId> = group.iter().copied().collect();

    // the subsets are nonempty, disjoint and cover exactly the group.
    let mut owner: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut ids: BTreeSet<usize> = BTreeSet::new();
    for s in &partition.subsets {
        if s.id == AP_SUBSET || !ids.insert(s.id) {
            report.flag(
                Constraint::Coverage,
                format!("subset id {} is reserved or repeated", s.id),
            );
        }
        if s.members.is_empty() {
            report.flag(Constraint::Coverage, format!("subset {} is empty", s.id));
        }
        for &m in &s.members {
            if let Some(prev) = owner.insert(m, s.id) {
                report.flag(
                    Constraint::Coverage,
                    format!("user {m} is in subsets {prev} and {}", s.id),
                );
            }
            if !group.contains(&m) {
                report.flag(
                    Constraint::Coverage,
                    format!("subset {} contains user {m} outside the group", s.id),
                );
            }
        }
    }
    for u in &group {
        if !owner.contains_key(u) {
            report.flag(Constraint::Coverage, format!("user {u} belongs to no subset"));
        }
    }

    // 1 <= S <= |U|.
    let s_count = partition.subsets.len();
    if s_count < 1 || s_count > group.len() {
        report.flag(
            Constraint::SubsetCount,
            format!("S = {s_count} outside [1, {}]", group.len()),
        );
    }

    // every phase schedules exactly one existing subset.
    let mut phase_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pos, phase) in schedule.phases.iter().enumerate() {
        if phase.index != pos + 1 {
            report.flag(
                Constraint::BinaryAssignment,
                format!("phase at position {} is labelled {}", pos + 1, phase.index),
            );
        }
        if ids.contains(&phase.target_subset) {
            phase_of.entry(phase.target_subset).or_default().push(pos);
        } else {
            report.flag(
                Constraint::BinaryAssignment,
                format!("phase {} targets unknown subset {}", pos + 1, phase.target_subset),
            );
        }
    }

    // each subset is served in exactly one phase.
    for &id in &ids {
        match phase_of.get(&id).map(Vec::len).unwrap_or(0) {
            1 => {}
            n => report.flag(
                Constraint::ScheduledOnce,
                format!("subset {id} is scheduled {n} times"),
            ),
        }
    }

    let subset_by_id: BTreeMap<usize, &Subset> = partition.subsets.iter().map(|s| (s.id, s)).collect();
    for (pos, phase) in schedule.phases.iter().enumerate() {
        let k = pos + 1;
        let Some(subset) = subset_by_id.get(&phase.target_subset) else {
            continue;
        };

        // the transmit beam is a codebook entry.
        let id = BeamId {
            level: phase.beam.level_index,
            index: phase.beam.beam_index,
        };
        let in_book = cell.codebook.beam(id).is_some_and(|b| *b == phase.beam);
        if !in_book {
            report.flag(
                Constraint::CodebookBeam,
                format!(
                    "phase {k} beam (t={}, l={}) is not a codebook entry",
                    id.index, id.level
                ),
            );
        }

        // the phase rate is the max-min rate of the transmitter's beam.
        let recomputed = if subset.members.contains(&phase.transmitter) {
            report.flag(
                Constraint::SubsetRate,
                format!(
                    "phase {k} transmitter {} is inside its target subset",
                    phase.transmitter
                ),
            );
            None
        } else if !cell.topology.contains(phase.transmitter) {
            report.flag(
                Constraint::SubsetRate,
                format!("phase {k} transmitter {} is not a node", phase.transmitter),
            );
            None
        } else {
            match cell.multicast_rate(phase.transmitter, &phase.beam, &subset.members) {
                Ok(r) => {
                    let tol = 1e-9 * r.abs().max(1.0);
                    if !(phase.rate_bps > 0.0) || (phase.rate_bps - r).abs() > tol {
                        report.flag(
                            Constraint::SubsetRate,
                            format!(
                                "phase {k} claims {} b/s but the min member rate is {r} b/s",
                                phase.rate_bps
                            ),
                        );
                    }
                    Some(r)
                }
                Err(e) => {
                    report.flag(Constraint::SubsetRate, format!("phase {k}: {e}"));
                    None
                }
            }
        };

        // the slots deliver the demand at the recomputed rate.
        let rate = recomputed.unwrap_or(phase.rate_bps);
        if phase.slots == 0
            || !covers_demand(phase.slots, rate, schedule.slot_duration_s, schedule.demand_bits)
        {
            report.flag(
                Constraint::Demand,
                format!(
                    "phase {k}: {} slots x {} s x {rate} b/s < {} bits",
                    phase.slots, schedule.slot_duration_s, schedule.demand_bits
                ),
            );
        }

        // a D2D transmitter's own subset is served in an earlier phase.
        if !phase.transmitter.is_ap() {
            match owner.get(&phase.transmitter) {
                None => report.flag(
                    Constraint::Precedence,
                    format!(
                        "phase {k} transmitter {} never receives the data",
                        phase.transmitter
                    ),
                ),
                Some(src) => {
                    let served_at = phase_of.get(src).and_then(|v| v.first()).copied();
                    if served_at.is_none_or(|at| at >= pos) {
                        report.flag(
                            Constraint::Precedence,
                            format!(
                                "phase {k} transmitter {} (subset {src}) is served {}",
                                phase.transmitter,
                                match served_at {
                                    Some(at) => format!("in phase {}", at + 1),
                                    None => "never".to_string(),
                                }
                            ),
                        );
                    }
                }
            }
        }
    }

    report
}

/// Line-oriented trace of a schedule and the subsets it serves.
///
/// ```text
/// # mmcast schedule
/// demand_bits 1000000000
/// slot_duration_s 0.000018
/// group 1,2,3,4
/// phase 1 tx=0 subset=1 members=1 beam=0,3 rate=33100000000 slots=1679
/// ```
///
/// `beam=t,l` is the beam index and codebook level.
pub fn to_trace(schedule: &Schedule, partition: &PartitionResult, group: &[NodeId]) -> String {
    let join = |ids: &[NodeId]| ids.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",");
    let mut out = String::from("# mmcast schedule\n");
    out.push_str(&format!("demand_bits {}\n", schedule.demand_bits));
    out.push_str(&format!("slot_duration_s {}\n", schedule.slot_duration_s));
    out.push_str(&format!("group {}\n", join(group)));
    for p in &schedule.phases {
        let members = partition
            .subset(p.target_subset)
            .map(|s| join(&s.members))
            .unwrap_or_default();
        out.push_str(&format!(
            "phase {} tx={} subset={} members={} beam={},{} rate={} slots={}\n",
            p.index,
            p.transmitter,
            p.target_subset,
            members,
            p.beam.beam_index,
            p.beam.level_index,
            p.rate_bps,
            p.slots
        ));
    }
    out
}

/// Parsed schedule trace.
#[derive(Debug, Clone)]
pub struct ScheduleTrace {
    pub schedule: Schedule,
    pub partition: PartitionResult,
    pub group: Vec<NodeId>,
}

/// Reads a trace written by [`to_trace`]. Beams are resolved against
/// `cell.codebook`; an index missing from the codebook is a parse error.
pub fn from_trace(text: &str, cell: &Cell<'_>) -> Result<ScheduleTrace> {
    let mut demand = None;
    let mut slot = None;
    let mut group = None;
    let mut phases = Vec::new();
    let mut subsets: Vec<Subset> = Vec::new();

    let parse_ids = |s: &str, line: usize| -> Result<Vec<NodeId>> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|t| t.parse::<NodeId>().map_err(|e| Error::parse(line, e.to_string())))
            .collect()
    };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let head = fields.next().expect("nonempty line");
        let num = |v: Option<&str>| -> Result<f64> {
            v.ok_or_else(|| Error::parse(lineno, "missing value"))?
                .parse::<f64>()
                .map_err(|e| Error::parse(lineno, e.to_string()))
        };
        match head {
            "demand_bits" => demand = Some(num(fields.next())?),
            "slot_duration_s" => slot = Some(num(fields.next())?),
            "group" => group = Some(parse_ids(fields.next().unwrap_or(""), lineno)?),
            "phase" => {
                let index: usize = fields
                    .next()
                    .ok_or_else(|| Error::parse(lineno, "missing phase index"))?
                    .parse()
                    .map_err(|e: std::num::ParseIntError| Error::parse(lineno, e.to_string()))?;
                let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
                for f in fields {
                    let (k, v) = f
                        .split_once('=')
                        .ok_or_else(|| Error::parse(lineno, format!("expected key=value, got `{f}`")))?;
                    kv.insert(k, v);
                }
                let get = |k: &str| {
                    kv.get(k)
                        .copied()
                        .ok_or_else(|| Error::parse(lineno, format!("missing `{k}`")))
                };
                let int = |k: &str| -> Result<u64> {
                    get(k)?
                        .parse::<u64>()
                        .map_err(|e| Error::parse(lineno, format!("`{k}`: {e}")))
                };
                let transmitter = NodeId(int("tx")? as u32);
                let target_subset = int("subset")? as usize;
                let members = parse_ids(get("members")?, lineno)?;
                let (t, l) = get("beam")?
                    .split_once(',')
                    .ok_or_else(|| Error::parse(lineno, "beam must be `t,l`"))?;
                let id = BeamId {
                    index: t.parse().map_err(|_| Error::parse(lineno, "bad beam index"))?,
                    level: l.parse().map_err(|_| Error::parse(lineno, "bad beam level"))?,
                };
                let beam = *cell
                    .codebook
                    .beam(id)
                    .ok_or_else(|| Error::parse(lineno, format!("beam ({t},{l}) not in codebook")))?;
                let rate_bps = num(Some(get("rate")?))?;
                let slots = int("slots")?;
                phases.push(Phase {
                    index,
                    transmitter,
                    target_subset,
                    beam,
                    rate_bps,
                    slots,
                });
                let mut sorted = members;
                sorted.sort_unstable();
                subsets.push(Subset {
                    id: target_subset,
                    members: sorted,
                    serving_subset: AP_SUBSET,
                    transmitter,
                    beam,
                    rate_bps,
                });
            }
            other => return Err(Error::parse(lineno, format!("unknown record `{other}`"))),
        }
    }

    // Keep one subset record per id; duplicates stay visible to the checker
    // through the phase list.
    let mut seen = BTreeSet::new();
    subsets.retain(|s| seen.insert(s.id));
    let mut partition = PartitionResult {
        subsets,
        thresholds: Thresholds {
            radius_m: 0.0,
            angle_deg: 0.0,
        },
        d2d_enabled: true,
    };
    let serving: Vec<usize> = partition
        .subsets
        .iter()
        .map(|s| partition.subset_of(s.transmitter).unwrap_or(AP_SUBSET))
        .collect();
    for (s, f) in partition.subsets.iter_mut().zip(serving) {
        s.serving_subset = f;
    }

    Ok(ScheduleTrace {
        schedule: Schedule {
            phases,
            demand_bits: demand.ok_or_else(|| Error::parse(0, "missing demand_bits"))?,
            slot_duration_s: slot.ok_or_else(|| Error::parse(0, "missing slot_duration_s"))?,
        },
        partition,
        group: group.ok_or_else(|| Error::parse(0, "missing group"))?,
    })
}
