//! Shared scenario builders for the integration tests.
//!
//! Each function returns a ready-to-run [`Scenario`] with conservative
//! defaults; tests override individual fields before building.

#![allow(dead_code)]

use dsme_core::sim::scenario::{
    Mac, PatternKind, Radio, Routing, Scenario, Shape, SourceSel, Stack, Timing, Topology, Traffic,
};
use dsme_core::sim::{RunReport, Simulator};

/// Chain of `n` nodes, 50 m apart, sink at one end.
pub fn line(n: u32) -> Scenario {
    Scenario {
        version: 1,
        seed: 1,
        topology: Topology {
            shape: Shape::Line,
            nodes: Some(n),
            rings: None,
            parents: None,
            spacing: 50.0,
        },
        radio: Radio {
            comm_range: 85.0,
            interference_range: None,
            channels: vec![11, 12, 13, 14],
            common_channel: None,
        },
        mac: default_mac(),
        traffic: Traffic {
            pattern: PatternKind::Poisson,
            rate_hz: 1.0,
            payload: 75,
            sources: SourceSel::default(),
            packets_per_source: 10,
            sink: 0,
        },
        routing: Routing { mode: None },
        timing: Timing {
            setup_s: 30.0,
            max_s: 600.0,
            cooldown_s: 5.0,
        },
    }
}

/// Concentric rings around the sink.
pub fn circles(rings: &[u32], spacing: f64) -> Scenario {
    let mut s = line(2);
    s.topology = Topology {
        shape: Shape::Circles,
        nodes: None,
        rings: Some(rings.to_vec()),
        parents: None,
        spacing,
    };
    s
}

/// Explicit parent array; node 0 is the root.
pub fn tree(parents: &[u32], spacing: f64) -> Scenario {
    let mut s = line(2);
    s.topology = Topology {
        shape: Shape::Tree,
        nodes: None,
        rings: None,
        parents: Some(parents.to_vec()),
        spacing,
    };
    s
}

fn default_mac() -> Mac {
    Mac {
        stack: Stack::Dsme,
        so: 3,
        mo: 4,
        bo: 6,
        cap_reduction: false,
        min_be: None,
        max_be: None,
        max_backoffs: None,
        max_retries: None,
        expiration_threshold: None,
        response_wait: None,
        queue_capacity: None,
        alpha: 0.5,
        hysteresis: true,
        depreciation_threshold: None,
        election_probability: 0.33,
        lease_msf: 200,
        drift_ppm: 0.0,
    }
}

/// Build and run, panicking on validation errors.
pub fn run(scenario: &Scenario) -> RunReport {
    let built = scenario.build().expect("scenario should validate");
    Simulator::new(built).run()
}
