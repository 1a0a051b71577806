//! User partition and multicast path planning (MD2D, first stage).
//!
//! The AP starts as the only allocated "subset" (id 0). Each iteration
//!
//! 1. finds, over every allocated subset, the unallocated user nearest to
//!    that subset's center; the globally nearest pair fixes the reference
//!    subset `U_s` and the anchor radius `r^s`,
//! 2. grows a new subset `U_t` in the polar frame of `U_s`: users are
//!    scanned by increasing radius and admitted while their radius stays
//!    within `r_th` of `r^s` and the admitted angles span at most `θ_th`,
//! 3. records the path `U_s -> U_t` and picks, among the members of `U_s`,
//!    the transmitter and beam with the highest max-min rate to `U_t`.
//!
//! With D2D disabled only the AP may serve, which yields the MC baseline.

use std::fmt;

use crate::antenna::Beam;
use crate::channel::Cell;
use crate::error::{Error, Result};
use crate::topology::{circular_span, polar_relative, NodeId, Point, Topology};

/// Id of the AP pseudo-subset.
pub const AP_SUBSET: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub radius_m: f64,
    pub angle_deg: f64,
}

impl Thresholds {
    pub fn new(radius_m: f64, angle_deg: f64) -> Result<Self> {
        if !(radius_m >= 0.0) || !(angle_deg >= 0.0) {
            return Err(Error::invalid(format!(
                "thresholds must be nonnegative, got r_th={radius_m}, theta_th={angle_deg}"
            )));
        }
        Ok(Self { radius_m, angle_deg })
    }
}

/// A subset of the multicast group served by one transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    /// Allocation order, starting at 1.
    pub id: usize,
    /// Sorted ascending.
    pub members: Vec<NodeId>,
    /// Subset holding the transmitter; [`AP_SUBSET`] for the AP.
    pub serving_subset: usize,
    pub transmitter: NodeId,
    pub beam: Beam,
    /// Max-min rate from `transmitter` on `beam` over `members`, b/s.
    pub rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    /// Subsets in allocation order; `subsets[i].id == i + 1`.
    pub subsets: Vec<Subset>,
    pub thresholds: Thresholds,
    pub d2d_enabled: bool,
}

impl PartitionResult {
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn subset(&self, id: usize) -> Option<&Subset> {
        self.subsets.iter().find(|s| s.id == id)
    }

    /// Id of the subset containing `node`, [`AP_SUBSET`] for the AP.
    pub fn subset_of(&self, node: NodeId) -> Option<usize> {
        if node.is_ap() {
            return Some(AP_SUBSET);
        }
        self.subsets
            .iter()
            .find(|s| s.members.binary_search(&node).is_ok())
            .map(|s| s.id)
    }
}

impl fmt::Display for PartitionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "partition: {} subsets, r_th={} m, theta_th={} deg, d2d={}",
            self.subsets.len(),
            self.thresholds.radius_m,
            self.thresholds.angle_deg,
            self.d2d_enabled
        )?;
        for s in &self.subsets {
            let members: Vec<String> = s.members.iter().map(|m| m.to_string()).collect();
            writeln!(
                f,
                "  U{} = {{{}}}  path U{} -> U{}  tx {}  beam (t={}, l={}, {}°)  R={:.6e} b/s",
                s.id,
                members.join(","),
                s.serving_subset,
                s.id,
                s.transmitter,
                s.beam.beam_index,
                s.beam.level_index,
                s.beam.theta_3db_deg,
                s.rate_bps
            )?;
        }
        Ok(())
    }
}

/// Polar reference frame of an allocated subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetFrame {
    pub id: usize,
    pub center: Point,
}

/// Unallocated user nearest to any allocated subset center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestUser {
    pub subset: usize,
    pub user: NodeId,
    pub radius_m: f64,
}

/// Scans every frame against every unallocated user and returns the
/// globally nearest pair. Ties go to the lower subset id, then the lower
/// node id. `None` when either side is empty.
pub fn nearest_unallocated(
    frames: &[SubsetFrame],
    unallocated: &[NodeId],
    topology: &Topology,
) -> Option<NearestUser> {
    let mut best: Option<NearestUser> = None;
    for frame in frames {
        for &user in unallocated {
            let r = frame.center.distance(topology.position(user));
            let better = match best {
                None => true,
                Some(b) => r < b.radius_m || (r == b.radius_m && (frame.id, user) < (b.subset, b.user)),
            };
            if better {
                best = Some(NearestUser {
                    subset: frame.id,
                    user,
                    radius_m: r,
                });
            }
        }
    }
    best
}

/// Grows a subset in the polar frame centered at `center`.
///
/// Unallocated users are scanned by ascending radius (ties by node id).
/// User `j` is admitted iff `|r_j - anchor_radius| <= r_th` and the
/// circular span of the admitted angles plus `θ_j` is at most `θ_th`.
/// Admitted users are removed from `unallocated`; the returned members
/// are sorted by node id.
pub fn grow_subset(
    center: Point,
    anchor_radius_m: f64,
    unallocated: &mut Vec<NodeId>,
    topology: &Topology,
    thresholds: Thresholds,
) -> Vec<NodeId> {
    let mut order: Vec<(f64, f64, NodeId)> = unallocated
        .iter()
        .map(|&u| {
            let p = polar_relative(center, topology.position(u));
            (p.radius_m, p.angle_deg, u)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));

    let mut members = Vec::new();
    let mut angles: Vec<f64> = Vec::new();
    for (radius, angle, user) in order {
        if (radius - anchor_radius_m).abs() > thresholds.radius_m {
            continue;
        }
        let span = if angles.is_empty() {
            0.0
        } else {
            angles.push(angle);
            let s = circular_span(&angles).expect("nonempty");
            angles.pop();
            s
        };
        if span <= thresholds.angle_deg {
            angles.push(angle);
            members.push(user);
        }
    }
    unallocated.retain(|u| !members.contains(u));
    members.sort_unstable();
    members
}

/// Chosen transmitter for a subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub transmitter: NodeId,
    pub beam: Beam,
    pub rate_bps: f64,
}

/// True when `a` should replace the incumbent `b`: higher rate, then the
/// narrower beam, then the lower beam index, then the lower node id.
fn prefer(a: &Selection, b: &Selection) -> bool {
    if a.rate_bps != b.rate_bps {
        return a.rate_bps > b.rate_bps;
    }
    (a.beam.theta_3db_deg, a.beam.beam_index, a.transmitter).partial_cmp(&(
        b.beam.theta_3db_deg,
        b.beam.beam_index,
        b.transmitter,
    )) == Some(std::cmp::Ordering::Less)
}

/// Best beam for one transmitter: the codebook beam maximizing the minimum
/// link rate over `targets`.
pub fn best_beam_for(cell: &Cell<'_>, transmitter: NodeId, targets: &[NodeId]) -> Result<Selection> {
    let mut best: Option<Selection> = None;
    for beam in cell.codebook.beams() {
        let rate = cell.multicast_rate(transmitter, beam, targets)?;
        let cand = Selection {
            transmitter,
            beam: *beam,
            rate_bps: rate,
        };
        if best.as_ref().is_none_or(|b| prefer(&cand, b)) {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| Error::invalid("empty codebook"))
}

/// Max-min transmitter and beam selection over `candidates` for `targets`.
///
/// A candidate co-located with any target is skipped. Fails with
/// [`Error::InvalidGeometry`] when every candidate is skipped.
pub fn select_transmitter_and_beam(
    cell: &Cell<'_>,
    targets: &[NodeId],
    candidates: &[NodeId],
) -> Result<Selection> {
    if targets.is_empty() || candidates.is_empty() {
        return Err(Error::invalid(
            "transmitter selection needs targets and candidates",
        ));
    }
    let mut best: Option<Selection> = None;
    let mut last_err = None;
    for &cand in candidates {
        match best_beam_for(cell, cand, targets) {
            Ok(sel) => {
                if best.as_ref().is_none_or(|b| prefer(&sel, b)) {
                    best = Some(sel);
                }
            }
            Err(e @ Error::InvalidGeometry(..)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.expect("some candidate failed"))
}

/// Runs the full partition and path-planning pass over `group`.
pub fn partition_and_plan(
    cell: &Cell<'_>,
    group: &[NodeId],
    thresholds: Thresholds,
    d2d_enabled: bool,
) -> Result<PartitionResult> {
    let topology = cell.topology;
    let mut unallocated = topology.validate_group(group)?;
    let mut frames = vec![SubsetFrame {
        id: AP_SUBSET,
        center: topology.ap_position(),
    }];
    let mut subsets: Vec<Subset> = Vec::new();

    while !unallocated.is_empty() {
        let t = subsets.len() + 1;
        let reference_frames = if d2d_enabled { &frames[..] } else { &frames[..1] };
        let nearest = nearest_unallocated(reference_frames, &unallocated, topology)
            .expect("frames and unallocated are nonempty");
        let reference = frames[nearest.subset];
        let members = grow_subset(
            reference.center,
            nearest.radius_m,
            &mut unallocated,
            topology,
            thresholds,
        );
        debug_assert!(members.contains(&nearest.user));

        let candidates: Vec<NodeId> = if reference.id == AP_SUBSET {
            vec![NodeId::AP]
        } else {
            subsets[reference.id - 1].members.clone()
        };
        let sel = select_transmitter_and_beam(cell, &members, &candidates)?;

        frames.push(SubsetFrame {
            id: t,
            center: topology.subset_center(&members)?,
        });
        subsets.push(Subset {
            id: t,
            members,
            serving_subset: reference.id,
            transmitter: sel.transmitter,
            beam: sel.beam,
            rate_bps: sel.rate_bps,
        });
    }

    Ok(PartitionResult {
        subsets,
        thresholds,
        d2d_enabled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::Codebook;
    use crate::channel::ChannelModel;
    use crate::topology::angular_distance_deg;
    use proptest::prelude::*;

    fn book() -> Codebook {
        Codebook::new(&[15.0, 30.0, 45.0, 60.0]).unwrap()
    }

    fn topo(points: &[(f64, f64)]) -> Topology {
        Topology::from_positions(20.0, points.iter().map(|&(x, y)| Point::new(x, y)).collect(), 0).unwrap()
    }

    /// A at 2 m east of the AP, D 3.2 m beyond A, B and C close together
    /// about 3 m north of the AP; users 5 and 6 are outside the group.
    pub(crate) fn illustrative_topology() -> Topology {
        topo(&[
            (12.0, 10.0), // A
            (10.0, 13.0), // B
            (9.7, 13.2),  // C
            (15.2, 10.0), // D
            (3.0, 17.0),
            (18.0, 2.0),
        ])
    }

    #[test]
    fn illustrative_example_partition() {
        let t = illustrative_topology();
        let (b, ch) = (book(), ChannelModel::los());
        let cell = Cell::new(&t, &b, &ch, 30.0);
        let group = [NodeId(1), NodeId(2), NodeId(3), NodeId(4)];
        let p = partition_and_plan(&cell, &group, Thresholds::new(2.0, 10.0).unwrap(), true).unwrap();
        let members: Vec<Vec<NodeId>> = p.subsets.iter().map(|s| s.members.clone()).collect();
        assert_eq!(
            members,
            vec![vec![NodeId(1)], vec![NodeId(2), NodeId(3)], vec![NodeId(4)]]
        );
        assert_eq!(p.subsets[0].transmitter, NodeId::AP);
        assert_eq!(p.subsets[1].transmitter, NodeId::AP);
        assert_eq!(p.subsets[2].transmitter, NodeId(1));
        assert_eq!(p.subsets[2].serving_subset, 1);
        // A is served alone with the finest beam.
        assert_eq!(p.subsets[0].beam.theta_3db_deg, 15.0);
    }

    #[test]
    fn co_located_users_form_one_subset() {
        let t = topo(&[(13.0, 11.0), (13.0, 11.0), (13.0, 11.0)]);
        let (b, ch) = (book(), ChannelModel::los());
        let cell = Cell::new(&t, &b, &ch, 30.0);
        let p = partition_and_plan(&cell, &t.users(), Thresholds::new(6.0, 10.0).unwrap(), true).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.subsets[0].members.len(), 3);
    }

    #[test]
    fn zero_thresholds_give_singletons() {
        let t = Topology::generate(12, 20.0, 5).unwrap();
        let (b, ch) = (book(), ChannelModel::los());
        let cell = Cell::new(&t, &b, &ch, 30.0);
        let p = partition_and_plan(&cell, &t.users(), Thresholds::new(0.0, 0.0).unwrap(), true).unwrap();
        assert_eq!(p.len(), 12);
        assert!(p.subsets.iter().all(|s| s.members.len() == 1));
    }

    #[test]
    fn empty_group_rejected() {
        let t = Topology::generate(3, 20.0, 5).unwrap();
        let (b, ch) = (book(), ChannelModel::los());
        let cell = Cell::new(&t, &b, &ch, 30.0);
        assert!(partition_and_plan(&cell, &[], Thresholds::new(1.0, 1.0).unwrap(), true).is_err());
        assert!(Thresholds::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn nearest_unallocated_rules() {
        let t = topo(&[(12.0, 10.0), (10.0, 13.0), (14.0, 10.0)]);
        let ap = SubsetFrame {
            id: 0,
            center: t.ap_position(),
        };
        let first = nearest_unallocated(&[ap], &t.users(), &t).unwrap();
        assert_eq!((first.subset, first.user), (0, NodeId(1)));
        assert_eq!(first.radius_m, 2.0);

        // User 3 at (14,10) is 4 m from the AP and 4 m from a frame at (18,10).
        let other = SubsetFrame {
            id: 1,
            center: Point::new(18.0, 10.0),
        };
        let tie = nearest_unallocated(&[ap, other], &[NodeId(3)], &t).unwrap();
        assert_eq!(tie.subset, 0);
        let swapped = nearest_unallocated(&[other, ap], &[NodeId(3)], &t).unwrap();
        assert_eq!(swapped.subset, 0);

        let r = polar_relative(other.center, t.position(NodeId(3))).radius_m;
        let n = nearest_unallocated(&[other], &[NodeId(3), NodeId(1)], &t).unwrap();
        assert_eq!((n.user, n.radius_m), (NodeId(3), r));
    }

    #[test]
    fn grow_subset_span_and_band() {
        // Anchor east of the center at 5 m; user 2 at the same radius 30° away;
        // user 3 on the same bearing, exactly r_th further out.
        let c = Point::new(10.0, 10.0);
        let at = |r: f64, deg: f64| {
            let a = deg.to_radians();
            (10.0 + r * a.cos(), 10.0 + r * a.sin())
        };
        let t = topo(&[at(5.0, 0.0), at(5.0, 30.0), (18.0, 10.0)]);
        let th = Thresholds::new(3.0, 10.0).unwrap();
        let mut pool = t.users();
        let members = grow_subset(c, 5.0, &mut pool, &t, th);
        assert_eq!(members, vec![NodeId(1), NodeId(3)]);
        assert_eq!(pool, vec![NodeId(2)]);

        let mut pool = t.users();
        let tight = grow_subset(c, 5.0, &mut pool, &t, Thresholds::new(2.9, 10.0).unwrap());
        assert_eq!(tight, vec![NodeId(1)]);
    }

    #[test]
    fn ap_is_the_only_candidate_for_subset_zero() {
        let t = topo(&[(14.0, 10.0)]);
        let (b, ch) = (book(), ChannelModel::los());
        let cell = Cell::new(&t, &b, &ch, 30.0);
        let sel = select_transmitter_and_beam(&cell, &[NodeId(1)], &[NodeId::AP]).unwrap();
        assert_eq!(sel.transmitter, NodeId::AP);
    }

    #[test]
    fn singleton_on_boresight_gets_finest_aligned_beam() {
        // User due east of the AP: the 0° beam of every level points at it.
        let t = topo(&[(16.0, 10.0)]);
        let (b, ch) = (book(), ChannelModel::los());
        let cell = Cell::new(&t, &b, &ch, 30.0);
        // Brute force over the codebook.
        let mut best = (f64::NEG_INFINITY, 0.0, 0usize);
        for beam in b.beams() {
            let r = cell.link_rate(NodeId::AP, beam, NodeId(1)).unwrap();
            if r > best.0 {
                best = (r, beam.theta_3db_deg, beam.beam_index);
            }
        }
        let sel = select_transmitter_and_beam(&cell, &[NodeId(1)], &[NodeId::AP]).unwrap();
        assert_eq!((sel.rate_bps, sel.beam.theta_3db_deg, sel.beam.beam_index), best);
        assert_eq!((sel.beam.theta_3db_deg, sel.beam.beam_index), (15.0, 0));
    }

    #[test]
    fn wide_beam_wins_for_spread_targets() {
        // Two users 6 m from the AP at ±22°: 44° apart, beyond the finest
        // main lobe (39°) but inside the 30°/45°/60° main lobes.
        let at = |deg: f64| {
            let a = deg.to_radians();
            Point::new(10.0 + 6.0 * a.cos(), 10.0 + 6.0 * a.sin())
        };
        let t = Topology::from_positions(20.0, vec![at(22.0), at(-22.0)], 0).unwrap();
        let (b, ch) = (book(), ChannelModel::los());
        let cell = Cell::new(&t, &b, &ch, 30.0);
        let group = [NodeId(1), NodeId(2)];

        let mut best_per_level = Vec::new();
        for level in b.levels() {
            let best = level
                .beams
                .iter()
                .map(|beam| cell.multicast_rate(NodeId::AP, beam, &group).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            best_per_level.push(best);
        }
        let finest = *best_per_level.last().unwrap();
        let overall = best_per_level.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(overall > finest);

        let sel = select_transmitter_and_beam(&cell, &group, &[NodeId::AP]).unwrap();
        assert_eq!(sel.rate_bps, overall);
        assert!(sel.beam.theta_3db_deg > 15.0);
        for m in group {
            let off =
                angular_distance_deg(t.ap_position().bearing_deg(t.position(m)), sel.beam.boresight_deg);
            assert!(off < sel.beam.theta_ml_deg / 2.0);
        }
    }

    #[test]
    fn co_located_candidate_is_skipped() {
        let t = topo(&[(14.0, 10.0), (14.0, 10.0), (15.0, 11.0)]);
        let (b, ch) = (book(), ChannelModel::los());
        let cell = Cell::new(&t, &b, &ch, 30.0);
        let sel = select_transmitter_and_beam(&cell, &[NodeId(2)], &[NodeId(1), NodeId(3)]).unwrap();
        assert_eq!(sel.transmitter, NodeId(3));
        assert!(matches!(
            select_transmitter_and_beam(&cell, &[NodeId(2)], &[NodeId(1)]),
            Err(Error::InvalidGeometry(..))
        ));
    }

    fn check_structure(p: &PartitionResult, cell: &Cell<'_>, group: &[NodeId]) {
        let mut all: Vec<NodeId> = p.subsets.iter().flat_map(|s| s.members.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, group, "subsets must partition the group");
        assert!(!p.is_empty() && p.len() <= group.len());
        for (i, s) in p.subsets.iter().enumerate() {
            assert_eq!(s.id, i + 1);
            assert!(s.serving_subset < s.id);
            assert_eq!(p.subset_of(s.transmitter), Some(s.serving_subset));
            if !p.d2d_enabled {
                assert_eq!(s.transmitter, NodeId::AP);
            }
            let again = cell.multicast_rate(s.transmitter, &s.beam, &s.members).unwrap();
            assert_eq!(again, s.rate_bps);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn partitions_are_valid(seed in any::<u64>(), n in 1usize..25, r in 0.0..9.0f64,
                                theta in 0.0..20.0f64, d2d in any::<bool>(), nlos in any::<bool>()) {
            let t = Topology::generate(n, 20.0, seed).unwrap();
            let b = book();
            let ch = if nlos { ChannelModel::nlos(seed) } else { ChannelModel::los() };
            let cell = Cell::new(&t, &b, &ch, 30.0);
            let group = t.users();
            let p = partition_and_plan(&cell, &group, Thresholds::new(r, theta).unwrap(), d2d).unwrap();
            check_structure(&p, &cell, &group);
        }

        #[test]
        fn grown_subsets_respect_span(seed in any::<u64>(), theta in 0.0..40.0f64, r in 0.0..10.0f64) {
            let t = Topology::generate(20, 20.0, seed).unwrap();
            let center = t.ap_position();
            let mut pool = t.users();
            let anchor = pool.iter()
                .map(|&u| center.distance(t.position(u)))
                .fold(f64::INFINITY, f64::min);
            let members = grow_subset(center, anchor, &mut pool, &t, Thresholds::new(r, theta).unwrap());
            prop_assert!(!members.is_empty());
            let angles: Vec<f64> = members.iter()
                .map(|&m| polar_relative(center, t.position(m)).angle_deg)
                .collect();
            prop_assert!(circular_span(&angles).unwrap() <= theta);
            for &m in &members {
                let rm = center.distance(t.position(m));
                prop_assert!((rm - anchor).abs() <= r);
                prop_assert!(!pool.contains(&m));
            }
        }
    }
}
