//! Run instrumentation: packet accounting, formation milestones, schedule
//! health counters, and the final report.
//!
//! Every generated packet is tracked to exactly one fate — delivered,
//! dropped with a cause, or still queued at the end — so a run can assert
//! conservation: generated = delivered + dropped + residual.

use crate::mac::{Packet, PacketKey, PacketMarker, TxContext};
use crate::schedule::symbols_to_seconds;
use crate::NodeId;
use serde::Serialize;
use std::collections::BTreeMap;

/// Why a packet left the network without reaching its destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropCause {
    /// The next-hop queue was full at enqueue time.
    QueueFull,
    /// The per-hop retry budget was exhausted.
    RetryLimit,
    /// CSMA gave up after too many busy channel assessments.
    ChannelAccess,
    /// No usable next hop (routing void).
    NoRoute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    Pending,
    Delivered,
    Dropped(DropCause),
}

/// Mutable run statistics, written by the nodes and the simulator.
#[derive(Debug)]
pub struct RunRecorder {
    t_setup: u64,
    fates: BTreeMap<PacketKey, Fate>,

    pub generated: u64,
    pub generated_measured: u64,
    pub delivered: u64,
    pub delivered_measured: u64,
    latency_symbols: Vec<u64>,
    drops: [u64; 4],
    pub last_activity: u64,

    assoc_at: Vec<Option<u64>>,
    coord_at: Vec<Option<u64>>,
    first_gts_at: Vec<Option<u64>>,
    intent_times: Vec<u64>,
    pub resyncs: u64,

    pub beacons: u64,
    pub mgmt_frames: u64,
    pub data_frames: u64,
    pub frames_corrupted: u64,
    pub gts_frames_corrupted: u64,
    pub gts_on_gts_collisions: u64,
    pub cap_violations: u64,
    pub gts_slot_violations: u64,
    pub exclusivity_violations: u64,

    pub expirations: u64,
    pub lease_reclaims: u64,
    pub handshakes_started: u64,
    pub handshakes_completed: u64,
    pub handshakes_denied: u64,
    pub handshakes_aborted: u64,
    pub requests_deferred: u64,
    pub dup_notifies: u64,
    pub duplicate_rx: u64,
}

impl RunRecorder {
    pub fn new(n_nodes: usize, t_setup: u64) -> Self {
        Self {
            t_setup,
            fates: BTreeMap::new(),
            generated: 0,
            generated_measured: 0,
            delivered: 0,
            delivered_measured: 0,
            latency_symbols: Vec::new(),
            drops: [0; 4],
            last_activity: 0,
            assoc_at: vec![None; n_nodes],
            coord_at: vec![None; n_nodes],
            first_gts_at: vec![None; n_nodes],
            intent_times: Vec::new(),
            resyncs: 0,
            beacons: 0,
            mgmt_frames: 0,
            data_frames: 0,
            frames_corrupted: 0,
            gts_frames_corrupted: 0,
            gts_on_gts_collisions: 0,
            cap_violations: 0,
            gts_slot_violations: 0,
            exclusivity_violations: 0,
            expirations: 0,
            lease_reclaims: 0,
            handshakes_started: 0,
            handshakes_completed: 0,
            handshakes_denied: 0,
            handshakes_aborted: 0,
            requests_deferred: 0,
            dup_notifies: 0,
            duplicate_rx: 0,
        }
    }

    pub fn packet_generated(&mut self, p: &Packet) {
        self.fates.insert(p.key(), Fate::Pending);
        self.generated += 1;
        if p.marker == PacketMarker::Measured {
            self.generated_measured += 1;
        }
        self.last_activity = self.last_activity.max(p.created_at);
    }

    pub fn packet_delivered(&mut self, p: &Packet, now: u64) {
        match self.fates.get_mut(&p.key()) {
            Some(f @ Fate::Pending) => *f = Fate::Delivered,
            _ => {
                self.duplicate_rx += 1;
                return;
            }
        }
        self.delivered += 1;
        self.last_activity = self.last_activity.max(now);
        if p.marker == PacketMarker::Measured {
            self.delivered_measured += 1;
            self.latency_symbols.push(now - p.created_at);
        }
    }

    pub fn packet_dropped(&mut self, p: &Packet, cause: DropCause) {
        if let Some(f @ Fate::Pending) = self.fates.get_mut(&p.key()) {
            *f = Fate::Dropped(cause);
            self.drops[cause as usize] += 1;
        }
    }

    pub fn associated(&mut self, node: NodeId, now: u64) {
        let slot = &mut self.assoc_at[usize::from(node)];
        if slot.is_none() {
            *slot = Some(now);
        }
    }

    pub fn became_coordinator(&mut self, node: NodeId, now: u64) {
        let slot = &mut self.coord_at[usize::from(node)];
        if slot.is_none() {
            *slot = Some(now);
        }
    }

    pub fn gts_allocated(&mut self, node: NodeId, now: u64) {
        let slot = &mut self.first_gts_at[usize::from(node)];
        if slot.is_none() {
            *slot = Some(now);
        }
    }

    pub fn slot_intent(&mut self, now: u64) {
        self.intent_times.push(now);
    }

    /// A receiver lost this frame to an overlapping transmission.
    pub fn frame_corrupted(&mut self, lost: TxContext, clobbered_by: Option<TxContext>) {
        self.frames_corrupted += 1;
        if lost == TxContext::Gts {
            self.gts_frames_corrupted += 1;
            if clobbered_by == Some(TxContext::Gts) {
                self.gts_on_gts_collisions += 1;
            }
        }
    }

    /// Number of packets still pending (neither delivered nor dropped).
    pub fn pending(&self) -> u64 {
        self.fates
            .values()
            .filter(|f| **f == Fate::Pending)
            .count() as u64
    }

    pub fn finalize(
        self,
        seed: u64,
        now: u64,
        incomplete: bool,
        residual_queued: u64,
        energy_symbols: Vec<u64>,
        gts_valid_tx_final: u32,
        coordinator_count: u32,
        associated_count: u32,
    ) -> RunReport {
        let mut latency: Vec<f64> = self
            .latency_symbols
            .iter()
            .map(|&s| symbols_to_seconds(s))
            .collect();
        latency.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pct = |q: f64| -> f64 {
            if latency.is_empty() {
                return f64::NAN;
            }
            let idx = ((latency.len() - 1) as f64 * q).round() as usize;
            latency[idx]
        };
        let mean = if latency.is_empty() {
            f64::NAN
        } else {
            latency.iter().sum::<f64>() / latency.len() as f64
        };
        let opt_s = |v: &[Option<u64>]| -> Vec<Option<f64>> {
            v.iter().map(|o| o.map(symbols_to_seconds)).collect()
        };
        let pending = self.pending();
        let energy_s: Vec<f64> = energy_symbols
            .iter()
            .map(|&s| symbols_to_seconds(s))
            .collect();
        RunReport {
            seed,
            nodes: self.assoc_at.len() as u32,
            duration_s: symbols_to_seconds(now),
            t_setup_s: symbols_to_seconds(self.t_setup),
            incomplete,
            generated: self.generated,
            generated_measured: self.generated_measured,
            delivered: self.delivered,
            delivered_measured: self.delivered_measured,
            pdr_measured: if self.generated_measured == 0 {
                f64::NAN
            } else {
                self.delivered_measured as f64 / self.generated_measured as f64
            },
            dropped_queue: self.drops[DropCause::QueueFull as usize],
            dropped_retry: self.drops[DropCause::RetryLimit as usize],
            dropped_channel_access: self.drops[DropCause::ChannelAccess as usize],
            dropped_no_route: self.drops[DropCause::NoRoute as usize],
            residual_queued,
            conservation_ok: pending == residual_queued,
            latency_mean_s: mean,
            latency_p50_s: pct(0.50),
            latency_p95_s: pct(0.95),
            latency_max_s: pct(1.0),
            node_assoc_s: opt_s(&self.assoc_at),
            node_coord_s: opt_s(&self.coord_at),
            node_first_gts_s: opt_s(&self.first_gts_at),
            associated_count,
            coordinator_count,
            intent_times_s: self
                .intent_times
                .iter()
                .map(|&s| symbols_to_seconds(s))
                .collect(),
            resyncs: self.resyncs,
            beacons: self.beacons,
            mgmt_frames: self.mgmt_frames,
            data_frames: self.data_frames,
            frames_corrupted: self.frames_corrupted,
            gts_frames_corrupted: self.gts_frames_corrupted,
            gts_on_gts_collisions: self.gts_on_gts_collisions,
            cap_violations: self.cap_violations,
            gts_slot_violations: self.gts_slot_violations,
            exclusivity_violations: self.exclusivity_violations,
            expirations: self.expirations,
            lease_reclaims: self.lease_reclaims,
            handshakes_started: self.handshakes_started,
            handshakes_completed: self.handshakes_completed,
            handshakes_denied: self.handshakes_denied,
            handshakes_aborted: self.handshakes_aborted,
            requests_deferred: self.requests_deferred,
            dup_notifies: self.dup_notifies,
            duplicate_rx: self.duplicate_rx,
            gts_valid_tx_final,
            energy_total_s: energy_s.iter().sum(),
            energy_on_s: energy_s,
        }
    }
}

/// Immutable summary of one simulation run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub nodes: u32,
    pub duration_s: f64,
    pub t_setup_s: f64,
    pub incomplete: bool,

    pub generated: u64,
    pub generated_measured: u64,
    pub delivered: u64,
    pub delivered_measured: u64,
    pub pdr_measured: f64,
    pub dropped_queue: u64,
    pub dropped_retry: u64,
    pub dropped_channel_access: u64,
    pub dropped_no_route: u64,
    pub residual_queued: u64,
    pub conservation_ok: bool,

    pub latency_mean_s: f64,
    pub latency_p50_s: f64,
    pub latency_p95_s: f64,
    pub latency_max_s: f64,

    pub node_assoc_s: Vec<Option<f64>>,
    pub node_coord_s: Vec<Option<f64>>,
    pub node_first_gts_s: Vec<Option<f64>>,
    pub associated_count: u32,
    pub coordinator_count: u32,

    pub intent_times_s: Vec<f64>,
    pub resyncs: u64,

    pub beacons: u64,
    pub mgmt_frames: u64,
    pub data_frames: u64,
    pub frames_corrupted: u64,
    pub gts_frames_corrupted: u64,
    pub gts_on_gts_collisions: u64,
    pub cap_violations: u64,
    pub gts_slot_violations: u64,
    pub exclusivity_violations: u64,

    pub expirations: u64,
    pub lease_reclaims: u64,
    pub handshakes_started: u64,
    pub handshakes_completed: u64,
    pub handshakes_denied: u64,
    pub handshakes_aborted: u64,
    pub requests_deferred: u64,
    pub dup_notifies: u64,
    pub duplicate_rx: u64,

    pub gts_valid_tx_final: u32,
    pub energy_on_s: Vec<f64>,
    pub energy_total_s: f64,
}

impl RunReport {
    /// Total drops across all causes.
    pub fn dropped(&self) -> u64 {
        self.dropped_queue + self.dropped_retry + self.dropped_channel_access + self.dropped_no_route
    }

    /// Reconcile-driven schedule changes per second inside `[from, to)`
    /// seconds, for adaptation-churn comparisons.
    pub fn intent_rate(&self, from: f64, to: f64) -> f64 {
        let n = self
            .intent_times_s
            .iter()
            .filter(|&&t| t >= from && t < to)
            .count();
        n as f64 / (to - from)
    }
}
