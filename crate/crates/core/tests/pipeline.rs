use mmcast::harness::{run_point, ExperimentConfig, SweepPoint};
use mmcast::oracle::exhaustive_optimum;
use mmcast::schedule::{check_feasibility, from_trace, to_trace};
use mmcast::{Cell, ChannelModel, Codebook, MetricsReport, PropagationMode, Scheme, Thresholds, Topology};
use proptest::prelude::*;

const DELTA: f64 = 18e-6;

fn book() -> Codebook {
    Codebook::new(&[15.0, 30.0, 45.0, 60.0]).unwrap()
}

fn channel(nlos: bool, seed: u64) -> ChannelModel {
    if nlos {
        ChannelModel::nlos(seed)
    } else {
        ChannelModel::los()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_scheme_survives_a_trace_round_trip(
        seed in any::<u64>(),
        n in 1usize..25,
        nlos in any::<bool>(),
        r in 0.0f64..10.0,
        th in 0.0f64..30.0,
        power in 30.0f64..40.0,
    ) {
        let t = Topology::generate(n, 20.0, seed).unwrap();
        let t = Topology::from_record(&t.to_record()).unwrap();
        let (b, ch) = (book(), channel(nlos, seed ^ 0x55));
        let cell = Cell::new(&t, &b, &ch, power);
        let group = t.users();
        let th = Thresholds::new(r, th).unwrap();
        for scheme in Scheme::ALL {
            let plan = scheme.plan(&cell, &group, th, 1e9, DELTA).unwrap();
            let text = to_trace(&plan.schedule, &plan.partition, &group);
            let back = from_trace(&text, &cell).unwrap();
            let rep = check_feasibility(&back.schedule, &back.partition, &back.group, &cell);
            prop_assert!(rep.is_feasible(), "{scheme}: {rep}");
            prop_assert_eq!(back.schedule.total_slots(), plan.schedule.total_slots());
            let m = MetricsReport::evaluate(&plan.schedule, n, power).unwrap();
            prop_assert!(m.network_throughput_bps > 0.0 && m.energy_consumption_j > 0.0);
            prop_assert!(plan.schedule.transmission_time_s() <= plan.schedule.frame_time_s());
        }
    }

    #[test]
    fn fdmac_is_never_better_than_serving_from_the_ap_alone(seed in any::<u64>(), n in 1usize..20) {
        // MC with zero thresholds is one AP phase per user with max-min beams,
        // which can only match or beat FDMAC's fixed finest beams.
        let t = Topology::generate(n, 20.0, seed).unwrap();
        let (b, ch) = (book(), ChannelModel::los());
        let cell = Cell::new(&t, &b, &ch, 30.0);
        let zero = Thresholds::new(0.0, 0.0).unwrap();
        let mc = Scheme::Mc.plan(&cell, &t.users(), zero, 1e9, DELTA).unwrap();
        let fd = Scheme::Fdmac.plan(&cell, &t.users(), zero, 1e9, DELTA).unwrap();
        prop_assert!(mc.schedule.total_slots() <= fd.schedule.total_slots());
    }

    #[test]
    fn oracle_bounds_every_scheme(seed in any::<u64>(), n in 1usize..5, nlos in any::<bool>()) {
        let t = Topology::generate(n, 20.0, seed).unwrap();
        let (b, ch) = (book(), channel(nlos, seed));
        let cell = Cell::new(&t, &b, &ch, 30.0);
        let group = t.users();
        let sol = exhaustive_optimum(&cell, &group, 1e9, DELTA, 5).unwrap();
        prop_assert!(check_feasibility(&sol.schedule, &sol.partition, &group, &cell).is_feasible());
        for scheme in Scheme::ALL {
            let plan = scheme.plan(&cell, &group, Thresholds::new(6.0, 10.0).unwrap(), 1e9, DELTA).unwrap();
            prop_assert!(sol.objective <= plan.schedule.total_slots());
        }
    }
}

#[test]
fn schemes_in_a_run_share_one_topology() {
    let cfg = ExperimentConfig::default();
    let point = SweepPoint {
        num_users: 10,
        tx_power_dbm: 30.0,
        demand_bits: 1e9,
        mode: PropagationMode::Nlos,
        thresholds: Thresholds::new(6.0, 10.0).unwrap(),
    };
    let rec = run_point(&cfg, &point, 77).unwrap();
    // Rebuild the run's cell by hand and compare each scheme's slot count.
    let t = mmcast::harness::run_topology(&cfg, 10, 77).unwrap();
    let ch = cfg
        .channel
        .model(PropagationMode::Nlos, mmcast::rng::derive_seed(77, 1))
        .unwrap();
    let b = cfg.codebook().unwrap();
    let cell = Cell::new(&t, &b, &ch, 30.0);
    for o in &rec.outcomes {
        let plan = o
            .scheme
            .plan(&cell, &t.users(), point.thresholds, 1e9, DELTA)
            .unwrap();
        assert_eq!(
            o.result.as_ref().unwrap().1,
            plan.schedule.total_slots(),
            "{}",
            o.scheme
        );
    }
}

#[test]
fn nested_user_counts_extend_the_same_layout() {
    let cfg = ExperimentConfig::default();
    let small = mmcast::harness::run_topology(&cfg, 5, 9).unwrap();
    let large = mmcast::harness::run_topology(&cfg, 30, 9).unwrap();
    assert_eq!(small.user_positions(), &large.user_positions()[..5]);
}
