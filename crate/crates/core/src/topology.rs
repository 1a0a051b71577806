//! Small-cell geometry: node placement, distances, subset centers, polar
//! coordinates and circular angle spans.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Node identifier. The AP is always node 0; users are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const AP: NodeId = NodeId(0);

    pub fn is_ap(self) -> bool {
        self == Self::AP
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for NodeId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.trim().parse().map(NodeId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// Direction from `self` towards `other`, in degrees within `[0, 360)`.
    /// Zero when the points coincide.
    pub fn bearing_deg(self, other: Point) -> f64 {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        if dx == 0.0 && dy == 0.0 {
            return 0.0;
        }
        normalize_deg(dy.atan2(dx).to_degrees())
    }
}

/// Position of a node relative to a center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarCoordinate {
    pub radius_m: f64,
    pub angle_deg: f64,
}

/// Maps any finite angle into `[0, 360)`.
pub fn normalize_deg(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

/// Absolute angular distance between two directions, folded into `[0, 180]`.
pub fn angular_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Polar coordinates of `node` relative to `center`. A node sitting on the
/// center gets radius 0 and angle 0.
pub fn polar_relative(center: Point, node: Point) -> PolarCoordinate {
    PolarCoordinate {
        radius_m: center.distance(node),
        angle_deg: center.bearing_deg(node),
    }
}

/// Width of the smallest arc containing every angle: 360 minus the largest
/// gap between circularly consecutive angles.
pub fn circular_span(angles_deg: &[f64]) -> Result<f64> {
    if angles_deg.is_empty() {
        return Err(Error::invalid("circular span of an empty angle set"));
    }
    let mut sorted: Vec<f64> = angles_deg.iter().map(|&a| normalize_deg(a)).collect();
    sorted.sort_by(f64::total_cmp);
    if sorted.len() == 1 {
        return Ok(0.0);
    }
    let wrap_gap = sorted[0] + 360.0 - sorted[sorted.len() - 1];
    let max_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(wrap_gap, f64::max);
    Ok((360.0 - max_gap).max(0.0))
}

/// Geometry of one small cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    area_side_m: f64,
    ap_position: Point,
    user_positions: Vec<Point>,
    seed: u64,
}

impl Topology {
    /// Places `num_users` users uniformly at random over the square area,
    /// with the AP at its center. Uses a ChaCha8 stream seeded by `seed`.
    pub fn generate(num_users: usize, area_side_m: f64, seed: u64) -> Result<Self> {
        if num_users == 0 {
            return Err(Error::invalid("num_users must be at least 1"));
        }
        if !(area_side_m > 0.0 && area_side_m.is_finite()) {
            return Err(Error::invalid(format!(
                "area side must be positive, got {area_side_m}"
            )));
        }
        let mut rng = rng::stream(seed);
        let user_positions = (0..num_users)
            .map(|_| {
                let x = rng.random::<f64>() * area_side_m;
                let y = rng.random::<f64>() * area_side_m;
                Point::new(x, y)
            })
            .collect();
        Ok(Self {
            area_side_m,
            ap_position: Point::new(area_side_m / 2.0, area_side_m / 2.0),
            user_positions,
            seed,
        })
    }

    /// Builds a topology from explicit user positions. The AP is placed at
    /// the center of the area.
    pub fn from_positions(area_side_m: f64, user_positions: Vec<Point>, seed: u64) -> Result<Self> {
        if !(area_side_m > 0.0 && area_side_m.is_finite()) {
            return Err(Error::invalid(format!(
                "area side must be positive, got {area_side_m}"
            )));
        }
        if user_positions.is_empty() {
            return Err(Error::invalid("topology needs at least one user"));
        }
        for (i, p) in user_positions.iter().enumerate() {
            let inside = |v: f64| (0.0..=area_side_m).contains(&v);
            if !(inside(p.x) && inside(p.y)) {
                return Err(Error::invalid(format!(
                    "user {} at ({}, {}) lies outside the {area_side_m} m square",
                    i + 1,
                    p.x,
                    p.y
                )));
            }
        }
        Ok(Self {
            area_side_m,
            ap_position: Point::new(area_side_m / 2.0, area_side_m / 2.0),
            user_positions,
            seed,
        })
    }

    pub fn area_side_m(&self) -> f64 {
        self.area_side_m
    }

    pub fn ap_position(&self) -> Point {
        self.ap_position
    }

    pub fn user_positions(&self) -> &[Point] {
        &self.user_positions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    /// All user ids, ascending.
    pub fn users(&self) -> Vec<NodeId> {
        (1..=self.user_positions.len() as u32).map(NodeId).collect()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.index() <= self.user_positions.len()
    }

    /// Panics on an id outside the topology; callers validate groups up front.
    pub fn position(&self, node: NodeId) -> Point {
        if node.is_ap() {
            self.ap_position
        } else {
            self.user_positions[node.index() - 1]
        }
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        self.position(a).distance(self.position(b))
    }

    /// Centroid of the member positions. The AP alone yields the AP position.
    pub fn subset_center(&self, members: &[NodeId]) -> Result<Point> {
        if members.is_empty() {
            return Err(Error::invalid("subset center of an empty member set"));
        }
        let n = members.len() as f64;
        let (sx, sy) = members.iter().fold((0.0, 0.0), |(sx, sy), &m| {
            let p = self.position(m);
            (sx + p.x, sy + p.y)
        });
        Ok(Point::new(sx / n, sy / n))
    }

    /// Checks that `group` is a nonempty set of distinct user ids of this
    /// topology and returns it sorted.
    pub fn validate_group(&self, group: &[NodeId]) -> Result<Vec<NodeId>> {
        if group.is_empty() {
            return Err(Error::invalid("multicast group is empty"));
        }
        let mut sorted = group.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != group.len() {
            return Err(Error::invalid("multicast group contains duplicate users"));
        }
        if let Some(bad) = sorted.iter().find(|n| n.is_ap() || !self.contains(**n)) {
            return Err(Error::invalid(format!(
                "node {bad} is not a user of this topology"
            )));
        }
        Ok(sorted)
    }

    /// Plain-text record: seed, area, AP point and one line per user.
    pub fn to_record(&self) -> String {
        let mut out = String::from("# mmcast topology\n");
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("area_side_m {}\n", self.area_side_m));
        out.push_str(&format!("ap {} {}\n", self.ap_position.x, self.ap_position.y));
        for (i, p) in self.user_positions.iter().enumerate() {
            out.push_str(&format!("user {} {} {}\n", i + 1, p.x, p.y));
        }
        out
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut seed = None;
        let mut area = None;
        let mut ap = None;
        let mut users: Vec<Point> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<f64> {
                fields
                    .get(i)
                    .ok_or_else(|| Error::parse(lineno, "missing field"))?
                    .parse::<f64>()
                    .map_err(|e| Error::parse(lineno, e.to_string()))
            };
            match fields[0] {
                "seed" => {
                    seed = Some(
                        fields
                            .get(1)
                            .ok_or_else(|| Error::parse(lineno, "missing seed"))?
                            .parse::<u64>()
                            .map_err(|e| Error::parse(lineno, e.to_string()))?,
                    )
                }
                "area_side_m" => area = Some(num(1)?),
                "ap" => ap = Some(Point::new(num(1)?, num(2)?)),
                "user" => {
                    let id: usize = fields
                        .get(1)
                        .ok_or_else(|| Error::parse(lineno, "missing user id"))?
                        .parse()
                        .map_err(|e: std::num::ParseIntError| Error::parse(lineno, e.to_string()))?;
                    if id != users.len() + 1 {
                        return Err(Error::parse(
                            lineno,
                            format!("expected user {}, found user {id}", users.len() + 1),
                        ));
                    }
                    users.push(Point::new(num(2)?, num(3)?));
                }
                other => return Err(Error::parse(lineno, format!("unknown record `{other}`"))),
            }
        }
        let area = area.ok_or_else(|| Error::parse(0, "missing area_side_m"))?;
        let topo = Self::from_positions(area, users, seed.unwrap_or(0))?;
        if let Some(ap) = ap {
            if ap != topo.ap_position {
                return Err(Error::parse(0, "AP must sit at the center of the area"));
            }
        }
        Ok(topo)
    }
}
