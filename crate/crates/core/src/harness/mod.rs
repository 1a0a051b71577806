//! Monte-Carlo experiment driver.
//!
//! Run `i` of every sweep point uses the seed `derive_seed(master_seed, i)`.
//! From that seed a run draws its topology (stream 0) and its frozen NLOS
//! shadowing (stream 1), and every requested scheme is evaluated on the
//! same cell. Points therefore share topologies run by run, which pairs the
//! comparisons across schemes, thresholds and propagation modes.
//!
//! The raw CSV holds one row per (point, run, scheme) in canonical order
//! (sweep point, then run, then scheme); the aggregated CSV holds the mean
//! and standard error of each metric over the successful runs of a
//! (point, scheme) pair.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{AntennaSection, ExperimentConfig, ExperimentSection, OracleSection, SweepPoint};

use crate::channel::Cell;
use crate::error::Result;
use crate::metrics::MetricsReport;
use crate::rng::derive_seed;
use crate::scheme::Scheme;
use crate::topology::Topology;

pub const RAW_CSV: &str = "raw.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    /// Metrics and total slots, or the error text when the scheme failed.
    pub result: std::result::Result<(MetricsReport, u64), String>,
    /// Not part of any CSV.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub point: SweepPoint,
    pub run: usize,
    pub seed: u64,
    pub outcomes: Vec<SchemeOutcome>,
}

impl RunRecord {
    pub fn outcome(&self, scheme: Scheme) -> Option<&SchemeOutcome> {
        self.outcomes.iter().find(|o| o.scheme == scheme)
    }
}

pub fn run_seed(master_seed: u64, run: usize) -> u64 {
    derive_seed(master_seed, run as u64)
}

/// The topology a run with `seed` sees.
pub fn run_topology(cfg: &ExperimentConfig, num_users: usize, seed: u64) -> Result<Topology> {
    Topology::generate(num_users, cfg.experiment.area_side_m, derive_seed(seed, 0))
}

/// Evaluates every configured scheme on the topology and channel drawn from `seed`.
pub fn run_point(cfg: &ExperimentConfig, point: &SweepPoint, seed: u64) -> Result<RunRecord> {
    let topology = run_topology(cfg, point.num_users, seed)?;
    let channel = cfg.channel.model(point.mode, derive_seed(seed, 1))?;
    let codebook = cfg.codebook()?;
    let cell = Cell::new(&topology, &codebook, &channel, point.tx_power_dbm);
    let group = topology.users();
    let delta = cfg.experiment.slot_duration_s;
    let outcomes = cfg
        .experiment
        .schemes
        .iter()
        .map(|&scheme| {
            let start = Instant::now();
            let result = scheme
                .plan(&cell, &group, point.thresholds, point.demand_bits, delta)
                .and_then(|plan| {
                    let m = MetricsReport::evaluate(&plan.schedule, group.len(), point.tx_power_dbm)?;
                    Ok((m, plan.schedule.total_slots()))
                })
                .map_err(|e| e.to_string());
            SchemeOutcome {
                scheme,
                result,
                wall_time_s: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    Ok(RunRecord {
        point: *point,
        run: 0,
        seed,
        outcomes,
    })
}

/// Runs the whole cross product in memory, in canonical order.
pub fn run_sweep(cfg: &ExperimentConfig, parallel: bool) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let jobs: Vec<(SweepPoint, usize)> = cfg
        .points()
        .into_iter()
        .flat_map(|p| (0..cfg.experiment.runs_per_point).map(move |r| (p, r)))
        .collect();
    let job = |&(point, run): &(SweepPoint, usize)| -> Result<RunRecord> {
        let mut rec = run_point(cfg, &point, run_seed(cfg.experiment.master_seed, run))?;
        rec.run = run;
        Ok(rec)
    };
    if parallel {
        jobs.par_iter().map(job).collect()
    } else {
        jobs.iter().map(job).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawRow {
    pub scheme: Scheme,
    pub seed: u64,
    pub users: usize,
    pub tx_power_dbm: f64,
    pub demand_bits: f64,
    pub mode: String,
    pub r_th_m: f64,
    pub theta_th_deg: f64,
    pub slots: Option<u64>,
    pub nt_bps: Option<f64>,
    pub ec_j: Option<f64>,
    pub ee_bpj: Option<f64>,
    pub status: String,
}

pub fn raw_rows(records: &[RunRecord]) -> Vec<RawRow> {
    let mut rows = Vec::new();
    for rec in records {
        for o in &rec.outcomes {
            let p = &rec.point;
            let (slots, nt, ec, ee, status) = match &o.result {
                Ok((m, slots)) => (
                    Some(*slots),
                    Some(m.network_throughput_bps),
                    Some(m.energy_consumption_j),
                    Some(m.energy_efficiency_bpj),
                    "ok".to_string(),
                ),
                Err(e) => (None, None, None, None, format!("error: {e}")),
            };
            rows.push(RawRow {
                scheme: o.scheme,
                seed: rec.seed,
                users: p.num_users,
                tx_power_dbm: p.tx_power_dbm,
                demand_bits: p.demand_bits,
                mode: p.mode.to_string(),
                r_th_m: p.thresholds.radius_m,
                theta_th_deg: p.thresholds.angle_deg,
                slots,
                nt_bps: nt,
                ec_j: ec,
                ee_bpj: ee,
                status,
            });
        }
    }
    rows
}

pub fn write_raw_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in raw_rows(records) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and standard error of the mean (sample standard deviation over √n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std_error = if xs.len() < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Some(Self { mean, std_error })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub point: SweepPoint,
    pub scheme: Scheme,
    pub runs: usize,
    pub failures: usize,
    pub slots: Option<Estimate>,
    pub nt_bps: Option<Estimate>,
    pub ec_j: Option<Estimate>,
    pub ee_bpj: Option<Estimate>,
}

/// Folds records per (point, scheme), keeping the order in which points
/// and schemes first appear.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(SweepPoint, Scheme)> = Vec::new();
    for rec in records {
        for o in &rec.outcomes {
            if !keys.contains(&(rec.point, o.scheme)) {
                keys.push((rec.point, o.scheme));
            }
        }
    }
    keys.into_iter()
        .map(|(point, scheme)| {
            let outcomes: Vec<&SchemeOutcome> = records
                .iter()
                .filter(|r| r.point == point)
                .filter_map(|r| r.outcome(scheme))
                .collect();
            let ok: Vec<&(MetricsReport, u64)> =
                outcomes.iter().filter_map(|o| o.result.as_ref().ok()).collect();
            let col = |f: &dyn Fn(&(MetricsReport, u64)) -> f64| {
                Estimate::of(&ok.iter().map(|x| f(x)).collect::<Vec<_>>())
            };
            AggregateRow {
                point,
                scheme,
                runs: outcomes.len(),
                failures: outcomes.len() - ok.len(),
                slots: col(&|x| x.1 as f64),
                nt_bps: col(&|x| x.0.network_throughput_bps),
                ec_j: col(&|x| x.0.energy_consumption_j),
                ee_bpj: col(&|x| x.0.energy_efficiency_bpj),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct AggregateCsvRow {
    scheme: Scheme,
    users: usize,
    tx_power_dbm: f64,
    demand_bits: f64,
    mode: String,
    r_th_m: f64,
    theta_th_deg: f64,
    runs: usize,
    failures: usize,
    slots_mean: Option<f64>,
    slots_se: Option<f64>,
    nt_bps_mean: Option<f64>,
    nt_bps_se: Option<f64>,
    ec_j_mean: Option<f64>,
    ec_j_se: Option<f64>,
    ee_bpj_mean: Option<f64>,
    ee_bpj_se: Option<f64>,
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        let p = &r.point;
        w.serialize(AggregateCsvRow {
            scheme: r.scheme,
            users: p.num_users,
            tx_power_dbm: p.tx_power_dbm,
            demand_bits: p.demand_bits,
            mode: p.mode.to_string(),
            r_th_m: p.thresholds.radius_m,
            theta_th_deg: p.thresholds.angle_deg,
            runs: r.runs,
            failures: r.failures,
            slots_mean: r.slots.map(|e| e.mean),
            slots_se: r.slots.map(|e| e.std_error),
            nt_bps_mean: r.nt_bps.map(|e| e.mean),
            nt_bps_se: r.nt_bps.map(|e| e.std_error),
            ec_j_mean: r.ec_j.map(|e| e.mean),
            ec_j_se: r.ec_j.map(|e| e.std_error),
            ee_bpj_mean: r.ee_bpj.map(|e| e.mean),
            ee_bpj_se: r.ee_bpj.map(|e| e.std_error),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug)]
pub struct SweepOutput {
    pub records: Vec<RunRecord>,
    pub aggregate: Vec<AggregateRow>,
    pub raw_csv: PathBuf,
    pub aggregate_csv: PathBuf,
}

/// Runs the sweep in parallel and writes `raw.csv` and `aggregate.csv`
/// into `out_dir`, creating it if needed.
pub fn sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SweepOutput> {
    let records = run_sweep(cfg, true)?;
    let aggregate = aggregate(&records);
    std::fs::create_dir_all(out_dir)?;
    let raw_csv = out_dir.join(RAW_CSV);
    let aggregate_csv = out_dir.join(AGGREGATE_CSV);
    write_raw_csv(
        &records,
        std::io::BufWriter::new(std::fs::File::create(&raw_csv)?),
    )?;
    write_aggregate_csv(
        &aggregate,
        std::io::BufWriter::new(std::fs::File::create(&aggregate_csv)?),
    )?;
    Ok(SweepOutput {
        records,
        aggregate,
        raw_csv,
        aggregate_csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PropagationMode;
    use crate::partition::Thresholds;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.num_users = vec![4, 7];
        cfg.experiment.runs_per_point = 3;
        cfg.experiment.mode = PropagationMode::Nlos;
        cfg
    }

    fn point(n: usize) -> SweepPoint {
        SweepPoint {
            num_users: n,
            tx_power_dbm: 30.0,
            demand_bits: 1e9,
            mode: PropagationMode::Los,
            thresholds: Thresholds::new(6.0, 10.0).unwrap(),
        }
    }

    fn strip_time(mut r: RunRecord) -> RunRecord {
        for o in &mut r.outcomes {
            o.wall_time_s = 0.0;
        }
        r
    }

    #[test]
    fn run_point_is_deterministic() {
        let cfg = ExperimentConfig::default();
        let a = strip_time(run_point(&cfg, &point(6), 42).unwrap());
        let b = strip_time(run_point(&cfg, &point(6), 42).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.outcomes.len(), 4);
        assert!(a.outcomes.iter().all(|o| o.result.is_ok()));
        let c = strip_time(run_point(&cfg, &point(6), 43).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn estimate_examples() {
        let e = Estimate::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.mean, 2.5);
        assert!((e.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert_eq!(Estimate::of(&[7.0]).unwrap().std_error, 0.0);
        assert!(Estimate::of(&[]).is_none());
    }

    #[test]
    fn parallel_and_serial_sweeps_agree() {
        let cfg = small();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_raw_csv(&run_sweep(&cfg, true).unwrap(), &mut a).unwrap();
        write_raw_csv(&run_sweep(&cfg, false).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 3 * 4);
        assert!(text.starts_with(
            "scheme,seed,users,tx_power_dbm,demand_bits,mode,r_th_m,theta_th_deg,slots,nt_bps,ec_j,ee_bpj,status"
        ));
    }

    #[test]
    fn aggregate_means_match_raw_rows() {
        let cfg = small();
        let records = run_sweep(&cfg, true).unwrap();
        let rows = raw_rows(&records);
        let agg = aggregate(&records);
        assert_eq!(agg.len(), 2 * 4);
        for a in &agg {
            let nts: Vec<f64> = rows
                .iter()
                .filter(|r| r.scheme == a.scheme && r.users == a.point.num_users)
                .filter_map(|r| r.nt_bps)
                .collect();
            assert_eq!(nts.len(), 3);
            let mean = nts.iter().sum::<f64>() / 3.0;
            assert!((a.nt_bps.unwrap().mean - mean).abs() <= 1e-12 * mean);
        }
    }

    #[test]
    fn sweep_writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = sweep(&small(), dir.path()).unwrap();
        let raw = std::fs::read_to_string(&out.raw_csv).unwrap();
        let agg = std::fs::read_to_string(&out.aggregate_csv).unwrap();
        assert_eq!(raw.lines().count(), 25);
        assert_eq!(agg.lines().count(), 9);
        assert!(agg.starts_with("scheme,users,"));
    }

    #[test]
    fn scheme_errors_are_recorded_not_fatal() {
        let cfg = ExperimentConfig::default();
        // Transmit power so low that every rate underflows to zero.
        let mut p = point(3);
        p.tx_power_dbm = -1e6;
        let rec = run_point(&cfg, &p, 1).unwrap();
        assert!(rec.outcomes.iter().all(|o| o.result.is_err()));
        let rows = raw_rows(&[rec]);
        assert!(rows
            .iter()
            .all(|r| r.status.starts_with("error") && r.nt_bps.is_none()));
    }

    #[test]
    fn empty_scheme_set_is_rejected() {
        let mut cfg = small();
        cfg.experiment.schemes.clear();
        assert!(run_sweep(&cfg, false).is_err());
    }
}
