//! Multicast scheduling for mmWave small cells.
//!
//! The crate models a single small cell: an access point (AP) in the middle
//! of a square area, a multicast group of users, a multi-level directional
//! beam codebook and a LOS/NLOS link budget. On top of that it provides
//!
//! - the MD2D heuristic: greedy user partition with D2D multicast path
//!   planning ([`partition`]) followed by phase scheduling ([`schedule`]),
//! - the FDMAC, MC and D2D comparison schedulers ([`baselines`]),
//! - an exhaustive exact solver for small groups ([`oracle`]),
//! - a constraint-by-constraint feasibility checker ([`schedule::check_feasibility`]),
//! - throughput / energy metrics ([`metrics`]) and a seeded Monte-Carlo
//!   experiment driver ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antenna;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod partition;
pub mod rng;
pub mod schedule;
pub mod scheme;
pub mod topology;

pub use antenna::{Beam, BeamId, Codebook, GainClosure};
pub use channel::{Cell, ChannelModel, LinkBudget, PropagationMode};
pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use partition::{PartitionResult, Subset, Thresholds};
pub use schedule::{FeasibilityReport, Phase, Schedule};
pub use scheme::{Plan, Scheme};
pub use topology::{NodeId, Point, PolarCoordinate, Topology};
