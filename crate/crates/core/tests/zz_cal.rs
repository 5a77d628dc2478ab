mod common;
use common::circles;
use dsme_core::sim::scenario::{Scenario, Stack};
use dsme_core::sim::Simulator;
use std::time::Instant;

fn ring_scenario(stack: Stack, rate: f64, seed: u64) -> Scenario {
    let mut s = circles(&[5, 10, 15], 60.0);
    s.seed = seed;
    s.radio.interference_range = Some(85.0);
    s.mac.stack = stack;
    s.mac.so = 3;
    s.mac.mo = 6;
    s.mac.bo = 8;
    s.mac.cap_reduction = true;
    s.mac.alpha = 0.05;
    s.mac.queue_capacity = Some(60);
    s.traffic.rate_hz = rate;
    s.traffic.packets_per_source = 20;
    s.timing.setup_s = 300.0;
    s.mac.lease_msf = 100000;
    s.timing.max_s = 1500.0;
    s.timing.cooldown_s = 10.0;
    s
}

#[test]
fn calibrate() {
    let t_all = Instant::now();
    let rates = [1.0, 3.0, 5.0];
    for &stack in &[Stack::Dsme] {
        for &rate in &rates {
            let mut pdrs = Vec::new();
            let mut min_assoc = u32::MAX;
            let (mut inc, mut coll, mut excl) = (0u32, 0u64, 0u64);
            for seed in 1..=10u64 {
                let r = Simulator::new(ring_scenario(stack, rate, seed).build().unwrap()).run();
                pdrs.push(r.pdr_measured);
                min_assoc = min_assoc.min(r.associated_count);
                inc += r.incomplete as u32;
                coll += r.gts_on_gts_collisions;
                excl += r.exclusivity_violations;
            }
            let mean = pdrs.iter().sum::<f64>() / pdrs.len() as f64;
            let lo = pdrs.iter().cloned().fold(f64::INFINITY, f64::min);
            println!(
                "{:?} rate {:4.2}: mean {:.4} min {:.4} min_assoc {:2} inc {} coll {} excl {}",
                stack, rate, mean, lo, min_assoc, inc, coll, excl
            );
        }
    }
    println!("total {:?}", t_all.elapsed());
}
