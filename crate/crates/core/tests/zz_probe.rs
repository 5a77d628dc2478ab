mod common;
use common::circles;
use dsme_core::sim::scenario::{Scenario, Stack};
use dsme_core::sim::Simulator;

fn ring_scenario(rate: f64, seed: u64) -> Scenario {
    let mut s = circles(&[5, 10, 15], 60.0);
    s.seed = seed;
    s.radio.interference_range = Some(85.0);
    s.mac.stack = Stack::Dsme;
    s.mac.so = 3;
    s.mac.mo = 6;
    s.mac.bo = 8;
    s.mac.cap_reduction = true;
    s.mac.alpha = 0.05;
    s.mac.queue_capacity = Some(60);
    s.traffic.rate_hz = rate;
    s.traffic.packets_per_source = 20;
    s.timing.setup_s = 300.0;
    s.timing.max_s = 1500.0;
    s.timing.cooldown_s = 10.0;
    s
}

#[test]
fn probe() {
    for seed in 3..=3u64 {
        let r = Simulator::new(ring_scenario(1.0, seed).build().unwrap()).run();
        println!(
            "seed {} pdr {:.4} coll {} excl {}",
            seed, r.pdr_measured, r.gts_on_gts_collisions, r.exclusivity_violations
        );
    }
}
