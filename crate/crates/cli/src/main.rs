//! `mmcast`: run, sweep, solve and check multicast schedules.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mmcast::harness::{self, ExperimentConfig, SweepPoint};
use mmcast::oracle::exhaustive_optimum;
use mmcast::rng::derive_seed;
use mmcast::schedule::{check_feasibility, from_trace, to_trace};
use mmcast::{Cell, MetricsReport, PropagationMode, Scheme, Topology};

#[derive(Parser)]
#[command(
    name = "mmcast",
    version,
    about = "mmWave multicast scheduling with D2D relaying"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate schemes on one seeded topology per configured point.
    Run(RunArgs),
    /// Monte-Carlo sweep writing raw.csv and aggregate.csv.
    Sweep(SweepArgs),
    /// Exact optimum for a saved topology.
    Oracle(OracleArgs),
    /// Check a saved schedule against a saved topology.
    Check(CheckArgs),
}

/// Flags that override configuration keys.
#[derive(Args, Default)]
struct Overrides {
    /// Number of users (experiment.num_users).
    #[arg(long)]
    users: Option<usize>,
    /// Scheme to evaluate; repeatable (experiment.schemes).
    #[arg(long = "scheme")]
    schemes: Vec<Scheme>,
    /// Radius threshold in meters (experiment.r_th_m).
    #[arg(long = "r-th")]
    r_th: Option<f64>,
    /// Angle threshold in degrees (experiment.theta_th_deg).
    #[arg(long = "theta-th")]
    theta_th: Option<f64>,
    /// Transmit power in dBm (experiment.tx_power_dbm).
    #[arg(long)]
    power: Option<f64>,
    /// Multicast data size in bits (experiment.demand_bits).
    #[arg(long)]
    demand: Option<f64>,
    /// LOS or NLOS (experiment.mode).
    #[arg(long)]
    mode: Option<PropagationMode>,
    /// Any configuration key, as `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_set)]
    set: Vec<(String, String)>,
}

fn parse_set(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

impl Overrides {
    fn pairs(&self) -> Vec<(String, String)> {
        let mut out = self.set.clone();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((format!("experiment.{k}"), v));
            }
        };
        put("num_users", self.users.map(|u| u.to_string()));
        put("r_th_m", self.r_th.map(toml_float));
        put("theta_th_deg", self.theta_th.map(toml_float));
        put("tx_power_dbm", self.power.map(toml_float));
        put("demand_bits", self.demand.map(toml_float));
        put("mode", self.mode.map(|m| format!("\"{m}\"")));
        if !self.schemes.is_empty() {
            let names: Vec<String> = self.schemes.iter().map(|s| format!("\"{s}\"")).collect();
            put("schemes", Some(format!("[{}]", names.join(", "))));
        }
        out
    }
}

fn toml_float(x: f64) -> String {
    format!("{x:?}")
}

fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
        None => String::new(),
    };
    Ok(ExperimentConfig::parse(&text, &overrides.pairs())?)
}

#[derive(Args)]
struct RunArgs {
    /// Run seed; the topology and shadowing are derived from it.
    #[arg(long)]
    seed: u64,
    /// Configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write topology.txt and one <SCHEME>.schedule per scheme here.
    #[arg(long)]
    save_dir: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SweepArgs {
    /// Configuration file; defaults apply when omitted.
    config: Option<PathBuf>,
    /// Master seed (experiment.master_seed).
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

/// Cell parameters for commands that read a saved topology.
#[derive(Args)]
struct CellArgs {
    /// Configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seed the topology came from; sets the NLOS shadowing.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct OracleArgs {
    /// Topology file written by `run --save-dir`.
    topology: PathBuf,
    #[command(flatten)]
    cell: CellArgs,
}

#[derive(Args)]
struct CheckArgs {
    /// Topology file written by `run --save-dir`.
    topology: PathBuf,
    /// Schedule file written by `run --save-dir`.
    schedule: PathBuf,
    #[command(flatten)]
    cell: CellArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Oracle(a) => oracle(a),
        Command::Check(a) => check(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn point_label(p: &SweepPoint) -> String {
    format!(
        "users={} P_t={} dBm D={} bits mode={} r_th={} m theta_th={} deg",
        p.num_users, p.tx_power_dbm, p.demand_bits, p.mode, p.thresholds.radius_m, p.thresholds.angle_deg
    )
}

fn print_metrics(scheme: Scheme, slots: u64, m: &MetricsReport) {
    println!(
        "  {:<6} slots={:<8} NT={:.4} Gb/s  EC={:.6e} J  EE={:.6e} b/s/J",
        scheme.as_str(),
        slots,
        m.network_throughput_bps / 1e9,
        m.energy_consumption_j,
        m.energy_efficiency_bpj
    );
}

fn run(a: RunArgs) -> Result<ExitCode> {
    let cfg = load_config(a.config.as_deref(), &a.overrides)?;
    let points = cfg.points();
    if a.save_dir.is_some() && points.len() != 1 {
        bail!(
            "--save-dir needs a single configuration point, got {}",
            points.len()
        );
    }
    println!("seed {}", a.seed);
    for point in &points {
        let rec = harness::run_point(&cfg, point, a.seed)?;
        println!("{}", point_label(point));
        for o in &rec.outcomes {
            match &o.result {
                Ok((m, slots)) => print_metrics(o.scheme, *slots, m),
                Err(e) => println!("  {:<6} error: {e}", o.scheme.as_str()),
            }
        }
        if let Some(dir) = &a.save_dir {
            save_instance(&cfg, point, a.seed, dir)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn save_instance(cfg: &ExperimentConfig, point: &SweepPoint, seed: u64, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let topology = harness::run_topology(cfg, point.num_users, seed)?;
    std::fs::write(dir.join("topology.txt"), topology.to_record())?;
    let channel = cfg.channel.model(point.mode, derive_seed(seed, 1))?;
    let codebook = cfg.codebook()?;
    let cell = Cell::new(&topology, &codebook, &channel, point.tx_power_dbm);
    let group = topology.users();
    for &scheme in &cfg.experiment.schemes {
        let plan = scheme.plan(
            &cell,
            &group,
            point.thresholds,
            point.demand_bits,
            cfg.experiment.slot_duration_s,
        )?;
        let path = dir.join(format!("{scheme}.schedule"));
        std::fs::write(&path, to_trace(&plan.schedule, &plan.partition, &group))?;
    }
    println!("saved instance to {}", dir.display());
    Ok(())
}

fn sweep(mut a: SweepArgs) -> Result<ExitCode> {
    a.overrides
        .set
        .push(("experiment.master_seed".into(), a.seed.to_string()));
    let cfg = load_config(a.config.as_deref(), &a.overrides)?;
    let out = harness::sweep(&cfg, &a.out)?;
    let failures = out.aggregate.iter().map(|r| r.failures).sum::<usize>();
    println!(
        "{} runs, {} scheme failures; wrote {} and {}",
        out.records.len(),
        failures,
        out.raw_csv.display(),
        out.aggregate_csv.display()
    );
    for r in &out.aggregate {
        if let Some(nt) = r.nt_bps {
            println!(
                "  {:<6} {}  NT={:.4} ± {:.4} Gb/s",
                r.scheme.as_str(),
                point_label(&r.point),
                nt.mean / 1e9,
                nt.std_error / 1e9
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

struct LoadedCell {
    cfg: ExperimentConfig,
    point: SweepPoint,
    topology: Topology,
    codebook: mmcast::Codebook,
    channel: mmcast::ChannelModel,
}

impl LoadedCell {
    fn load(topology: &Path, args: &CellArgs) -> Result<Self> {
        let cfg = load_config(args.config.as_deref(), &args.overrides)?;
        let text = std::fs::read_to_string(topology)
            .with_context(|| format!("reading topology {}", topology.display()))?;
        let topology = Topology::from_record(&text).context("parsing topology")?;
        let mut point = cfg.points()[0];
        point.num_users = topology.num_users();
        if point.mode == PropagationMode::Nlos && args.seed.is_none() {
            bail!("NLOS needs --seed to reproduce the run's shadowing");
        }
        let channel = cfg
            .channel
            .model(point.mode, derive_seed(args.seed.unwrap_or(0), 1))?;
        let codebook = cfg.codebook()?;
        Ok(Self {
            cfg,
            point,
            topology,
            codebook,
            channel,
        })
    }

    fn cell(&self) -> Cell<'_> {
        Cell::new(
            &self.topology,
            &self.codebook,
            &self.channel,
            self.point.tx_power_dbm,
        )
    }
}

fn oracle(a: OracleArgs) -> Result<ExitCode> {
    let lc = LoadedCell::load(&a.topology, &a.cell)?;
    let cell = lc.cell();
    let group = lc.topology.users();
    let sol = exhaustive_optimum(
        &cell,
        &group,
        lc.point.demand_bits,
        lc.cfg.experiment.slot_duration_s,
        lc.cfg.oracle.max_group_size,
    )?;
    println!(
        "optimum {} slots ({} candidates explored)",
        sol.objective, sol.explored
    );
    let m = MetricsReport::evaluate(&sol.schedule, group.len(), lc.point.tx_power_dbm)?;
    print_metrics(Scheme::Md2d, sol.objective, &m);
    print!("{}", to_trace(&sol.schedule, &sol.partition, &group));
    Ok(ExitCode::SUCCESS)
}

fn check(a: CheckArgs) -> Result<ExitCode> {
    let lc = LoadedCell::load(&a.topology, &a.cell)?;
    let cell = lc.cell();
    let text = std::fs::read_to_string(&a.schedule)
        .with_context(|| format!("reading schedule {}", a.schedule.display()))?;
    let trace = from_trace(&text, &cell).context("parsing schedule")?;
    let report = check_feasibility(&trace.schedule, &trace.partition, &trace.group, &cell);
    if report.is_feasible() {
        println!(
            "feasible: {} phases, {} slots",
            trace.schedule.phases.len(),
            trace.schedule.total_slots()
        );
        Ok(ExitCode::SUCCESS)
    } else {
        println!("infeasible:\n{report}");
        Ok(ExitCode::from(1))
    }
}
