//! End-to-end simulator behavior: formation, delivery, determinism and
//! schedule-integrity audits on small networks.

mod common;

use common::{circles, line, run, tree};
use dsme_core::sim::scenario::{RoutingMode, Stack};

#[test]
fn line_network_forms_and_delivers() {
    let mut s = line(4);
    s.seed = 11;
    let r = run(&s);

    assert!(!r.incomplete, "run hit the wall clock: {r:#?}");
    assert_eq!(r.associated_count, 4, "all nodes associate: {r:#?}");
    assert!(r.conservation_ok, "packet conservation: {r:#?}");
    assert!(
        r.pdr_measured >= 0.90,
        "measured delivery ratio {} too low: {r:#?}",
        r.pdr_measured
    );
    assert!(r.gts_valid_tx_final > 0, "no guaranteed slots allocated");
    assert!(r.handshakes_completed > 0, "no handshakes completed");
    assert_eq!(r.cap_violations, 0, "contention traffic left its window");
    assert_eq!(r.gts_slot_violations, 0, "guaranteed traffic left its slot");
    assert_eq!(r.exclusivity_violations, 0, "conflicting slot grants");
    assert_eq!(r.resyncs, 0, "exact clocks must never re-align");
}

#[test]
fn same_seed_reproduces_bit_identical_reports() {
    let mut s = line(5);
    s.seed = 42;
    let a = format!("{:?}", run(&s));
    let b = format!("{:?}", run(&s));
    assert_eq!(a, b, "two runs of one seed diverged");

    s.seed = 43;
    let c = format!("{:?}", run(&s));
    assert_ne!(a, c, "different seeds produced identical runs");
}

#[test]
fn clock_drift_forces_realignment() {
    let mut s = line(4);
    s.seed = 3;
    s.mac.drift_ppm = 40.0;
    let r = run(&s);

    assert!(r.resyncs > 0, "drifting clocks never re-aligned: {r:#?}");
    assert_eq!(r.associated_count, 4);
    assert!(r.pdr_measured >= 0.90, "drift wrecked delivery: {r:#?}");
    assert!(r.conservation_ok);
}

#[test]
fn guaranteed_slots_immune_to_hidden_terminals() {
    // Nodes 1 and 3 are mutually out of earshot but share receivers, the
    // classic hidden-terminal pair. Offered load high enough that their
    // transmissions would overlap constantly on a shared channel.
    let mut s = line(4);
    s.seed = 5;
    s.traffic.rate_hz = 8.0;
    s.traffic.packets_per_source = 60;
    let r = run(&s);

    assert_eq!(r.gts_frames_corrupted, 0, "guaranteed frames collided");
    assert_eq!(r.gts_on_gts_collisions, 0);
    assert_eq!(r.exclusivity_violations, 0);
    assert!(r.pdr_measured >= 0.90, "pdr {}: {r:#?}", r.pdr_measured);
    assert!(r.conservation_ok);
}

#[test]
fn contention_stack_suffers_hidden_terminals() {
    let mut s = line(4);
    s.seed = 5;
    s.mac.stack = Stack::Csma;
    s.traffic.rate_hz = 8.0;
    s.traffic.packets_per_source = 60;
    let r = run(&s);

    assert_eq!(r.beacons, 0, "contention-only stack sent beacons");
    assert_eq!(r.gts_valid_tx_final, 0);
    assert!(
        r.frames_corrupted > 0,
        "hidden terminals never collided: {r:#?}"
    );
    assert!(r.conservation_ok);
}

#[test]
fn contention_stack_delivers_light_load() {
    let mut s = line(4);
    s.seed = 9;
    s.mac.stack = Stack::Csma;
    s.traffic.rate_hz = 0.5;
    let r = run(&s);

    assert!(!r.incomplete);
    assert!(
        r.pdr_measured >= 0.90,
        "light load should mostly get through: {r:#?}"
    );
    assert!(r.conservation_ok);
}

#[test]
fn queue_overflow_is_counted_not_lost() {
    let mut s = line(3);
    s.seed = 2;
    s.mac.queue_capacity = Some(2);
    s.traffic.rate_hz = 20.0;
    s.traffic.packets_per_source = 80;
    s.timing.max_s = 900.0;
    let r = run(&s);

    assert!(r.dropped_queue > 0, "tiny queues never overflowed: {r:#?}");
    assert!(r.conservation_ok, "drops must stay accounted: {r:#?}");
}

#[test]
fn tree_topology_forms_and_delivers() {
    let mut s = tree(&[0, 0, 1, 1], 50.0);
    s.seed = 17;
    s.routing.mode = Some(RoutingMode::Parent);
    let r = run(&s);

    assert_eq!(r.associated_count, 5);
    assert!(r.pdr_measured >= 0.90, "{r:#?}");
    assert!(r.conservation_ok);
    assert_eq!(r.exclusivity_violations, 0);
}

#[test]
fn ring_topology_forms_and_delivers() {
    let mut s = circles(&[5], 60.0);
    s.seed = 23;
    let r = run(&s);

    assert_eq!(r.associated_count, 6);
    assert!(r.pdr_measured >= 0.90, "{r:#?}");
    assert!(r.conservation_ok);
    assert_eq!(r.exclusivity_violations, 0);
}

#[test]
fn cap_reduction_keeps_contention_in_first_superframe() {
    let mut s = line(4);
    s.seed = 29;
    s.mac.so = 3;
    s.mac.mo = 5;
    s.mac.bo = 7;
    s.mac.cap_reduction = true;
    let r = run(&s);

    assert_eq!(r.associated_count, 4);
    assert_eq!(
        r.cap_violations, 0,
        "contention frames escaped the first superframe: {r:#?}"
    );
    assert_eq!(r.gts_slot_violations, 0);
    assert!(r.pdr_measured >= 0.90, "{r:#?}");
    assert!(r.conservation_ok);
}
