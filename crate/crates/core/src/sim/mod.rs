//! Deterministic discrete-event simulator.
//!
//! A run is a pure function of the scenario and the seed: events at equal
//! timestamps fire in insertion order, and every node draws randomness
//! from its own counter-mode stream of one seeded generator. Nodes are
//! callback state machines; they never touch the event queue or the
//! radio directly but emit actions (radio mode, transmissions, timers)
//! that the driver applies after each callback.

pub mod events;
pub mod metrics;
pub mod radio;
pub mod routing;
pub mod scenario;
pub mod topology;
pub mod traffic;

use crate::mac::{CsmaNode, DsmeNode, Frame, TxContext};
use crate::schedule::{SuperframeConfig, CAP_SLOTS, SYMBOLS_PER_SECOND};
use crate::NodeId;
use events::{Event, EventQueue};
use metrics::RunRecorder;
pub use metrics::RunReport;
use radio::{RadioField, RadioMode, Transmission};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use scenario::{Built, NodeSetup};
use std::collections::BTreeMap;
use topology::dist;
use traffic::TrafficSource;

/// Node-level timer payloads. Every variant carries a generation counter
/// so that a rescheduled activity invalidates its stale timers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerKind {
    /// Next slot boundary of the node's superframe grid.
    SlotStart { gen: u32 },
    /// End of one passive-scan listening window.
    ScanDwell { gen: u32 },
    /// CCA decision point of the CSMA engine.
    CsmaCca { gen: u32 },
    /// Acknowledgment deadline of the CSMA engine.
    CsmaAck { gen: u32 },
    /// Acknowledgment deadline of a guaranteed-slot transmission.
    GtsAck { gen: u32 },
    /// Deadline for the reply to a sent command.
    ResponseWait { gen: u32 },
    /// Deadline for the requester's confirmation of a granted slot.
    NotifyWait { gen: u32 },
}

/// Side effect emitted by a node callback.
#[derive(Debug)]
enum Action {
    SetRadio(RadioMode),
    StartTx { frame: Frame, delay: u64 },
    Timer { at: u64, kind: TimerKind },
}

/// Callback context handed to node state machines.
pub struct Ctx<'a> {
    pub now: u64,
    pub id: NodeId,
    pub radio: &'a RadioField,
    pub rec: &'a mut RunRecorder,
    pub rng: &'a mut ChaCha12Rng,
    actions: &'a mut Vec<Action>,
}

impl Ctx<'_> {
    pub fn set_radio(&mut self, mode: RadioMode) {
        self.actions.push(Action::SetRadio(mode));
    }

    pub fn start_tx(&mut self, frame: Frame, delay: u64) {
        self.actions.push(Action::StartTx { frame, delay });
    }

    pub fn timer(&mut self, at: u64, kind: TimerKind) {
        self.actions.push(Action::Timer {
            at: at.max(self.now),
            kind,
        });
    }
}

/// A node running either of the two MAC stacks.
#[derive(Debug)]
pub enum SimNode {
    Dsme(DsmeNode),
    Csma(CsmaNode),
}

impl SimNode {
    fn start(&mut self, ctx: &mut Ctx) {
        match self {
            SimNode::Dsme(n) => n.start(ctx),
            SimNode::Csma(n) => n.start(ctx),
        }
    }

    fn on_timer(&mut self, ctx: &mut Ctx, kind: TimerKind) {
        match self {
            SimNode::Dsme(n) => n.on_timer(ctx, kind),
            SimNode::Csma(n) => n.on_timer(ctx, kind),
        }
    }

    fn on_frame(&mut self, ctx: &mut Ctx, frame: &Frame, frame_start: u64) {
        match self {
            SimNode::Dsme(n) => n.on_frame(ctx, frame, frame_start),
            SimNode::Csma(n) => n.on_frame(ctx, frame, frame_start),
        }
    }

    fn on_tx_done(&mut self, ctx: &mut Ctx, frame: &Frame) {
        match self {
            SimNode::Dsme(n) => n.on_tx_done(ctx, frame),
            SimNode::Csma(n) => n.on_tx_done(ctx, frame),
        }
    }

    fn on_app_packet(&mut self, ctx: &mut Ctx, packet: crate::mac::Packet) {
        match self {
            SimNode::Dsme(n) => n.on_app_packet(ctx, packet),
            SimNode::Csma(n) => n.on_app_packet(ctx, packet),
        }
    }

    fn queued(&self) -> u64 {
        match self {
            SimNode::Dsme(n) => n.queued(),
            SimNode::Csma(n) => n.queued(),
        }
    }

    pub fn dsme(&self) -> Option<&DsmeNode> {
        match self {
            SimNode::Dsme(n) => Some(n),
            SimNode::Csma(_) => None,
        }
    }
}

/// Stop-rule / audit cadence.
const TICK_INTERVAL: u64 = SYMBOLS_PER_SECOND;

/// Discrete-event driver for one run.
pub struct Simulator {
    seed: u64,
    now: u64,
    queue: EventQueue,
    radio: RadioField,
    nodes: Vec<SimNode>,
    sources: Vec<Option<TrafficSource>>,
    mac_rngs: Vec<ChaCha12Rng>,
    traffic_rngs: Vec<ChaCha12Rng>,
    rec: RunRecorder,
    scratch: Vec<Action>,
    t_max: u64,
    cooldown: u64,
    audit_grid: Option<SuperframeConfig>,
    interference_range: f64,
}

impl Simulator {
    pub fn new(built: Built) -> Self {
        let n = built.positions.len();
        let radio = RadioField::new(
            built.positions.clone(),
            built.comm_range,
            built.interference_range,
        );
        let nodes: Vec<SimNode> = built
            .nodes
            .into_iter()
            .enumerate()
            .map(|(id, setup)| match setup {
                NodeSetup::Dsme(cfg) => SimNode::Dsme(DsmeNode::new(id as NodeId, cfg)),
                NodeSetup::Csma(cfg) => SimNode::Csma(CsmaNode::new(id as NodeId, cfg)),
            })
            .collect();
        let mut sources: Vec<Option<TrafficSource>> = (0..n).map(|_| None).collect();
        for src in built.sources {
            let idx = usize::from(src.node);
            sources[idx] = Some(src);
        }
        let stream_rng = |stream: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(built.seed);
            rng.set_stream(stream);
            rng
        };
        let mac_rngs = (0..n).map(|i| stream_rng(1 + i as u64)).collect();
        let traffic_rngs = (0..n).map(|i| stream_rng(10_000 + i as u64)).collect();
        Self {
            seed: built.seed,
            now: 0,
            queue: EventQueue::new(),
            radio,
            nodes,
            sources,
            mac_rngs,
            traffic_rngs,
            rec: RunRecorder::new(n, built.t_setup),
            scratch: Vec::new(),
            t_max: built.t_max,
            cooldown: built.cooldown,
            audit_grid: built.audit_grid,
            interference_range: built.interference_range,
        }
    }

    pub fn nodes(&self) -> &[SimNode] {
        &self.nodes
    }

    pub fn radio(&self) -> &RadioField {
        &self.radio
    }

    fn dispatch(&mut self, node: usize, f: impl FnOnce(&mut SimNode, &mut Ctx)) {
        let mut actions = std::mem::take(&mut self.scratch);
        {
            let mut ctx = Ctx {
                now: self.now,
                id: node as NodeId,
                radio: &self.radio,
                rec: &mut self.rec,
                rng: &mut self.mac_rngs[node],
                actions: &mut actions,
            };
            f(&mut self.nodes[node], &mut ctx);
        }
        for action in actions.drain(..) {
            match action {
                Action::SetRadio(mode) => self.radio.set_mode(node as NodeId, mode, self.now),
                Action::StartTx { frame, delay } => self.queue.push(
                    self.now + delay,
                    Event::TxBegin {
                        node: node as NodeId,
                        frame,
                    },
                ),
                Action::Timer { at, kind } => self.queue.push(
                    at,
                    Event::Timer {
                        node: node as NodeId,
                        kind,
                    },
                ),
            }
        }
        self.scratch = actions;
    }

    /// Run to completion and produce the report.
    pub fn run(&mut self) -> RunReport {
        for node in 0..self.nodes.len() {
            self.dispatch(node, |n, ctx| n.start(ctx));
        }
        for node in 0..self.nodes.len() {
            let Some(src) = &self.sources[node] else {
                continue;
            };
            let at = src.first_arrival(&mut self.traffic_rngs[node]);
            self.queue.push(
                at,
                Event::Traffic {
                    node: node as NodeId,
                },
            );
        }
        self.queue.push(TICK_INTERVAL, Event::Tick);

        let mut incomplete = false;
        while let Some((now, event)) = self.queue.pop() {
            if now > self.t_max {
                incomplete = true;
                self.now = self.t_max;
                break;
            }
            self.now = now;
            match event {
                Event::TxBegin { node, frame } => {
                    if let Some(busy_until) = self.radio.tx_end_time(node) {
                        // The transmitter is mid-frame, which only happens
                        // when an acknowledgment collides with a scheduled
                        // send. A colliding ack is simply lost (the data
                        // sender retries); anything else waits for the air
                        // to clear.
                        if frame.context != TxContext::Ack {
                            self.queue.push(busy_until, Event::TxBegin { node, frame });
                        }
                        continue;
                    }
                    let end = self.radio.begin_tx(node, frame, now);
                    self.queue.push(end, Event::TxEnd { node });
                }
                Event::TxEnd { node } => {
                    let (tx, deliveries) = self.radio.end_tx(node, now);
                    self.audit_containment(usize::from(node), &tx);
                    self.dispatch(usize::from(node), |n, ctx| n.on_tx_done(ctx, &tx.frame));
                    for d in deliveries {
                        if d.corrupted {
                            if tx.frame.context == TxContext::Gts
                                && d.clobbered_by == Some(TxContext::Gts)
                                && std::env::var_os("DSME_COLL").is_some()
                            {
                                let dump = |id: Option<NodeId>| -> String {
                                    let Some(id) = id else { return String::new() };
                                    let Some(dsme) = self.nodes[usize::from(id)].dsme() else {
                                        return String::new();
                                    };
                                    dsme.act()
                                        .entries()
                                        .iter()
                                        .map(|e| {
                                            format!(
                                                "({},{},ch{} {:?} {:?} peer {})",
                                                e.descriptor.coords.superframe,
                                                e.descriptor.coords.slot,
                                                e.descriptor.coords.channel,
                                                e.descriptor.direction,
                                                e.state,
                                                e.descriptor.peer
                                            )
                                        })
                                        .collect::<Vec<_>>()
                                        .join(" ")
                                };
                                eprintln!(
                                    "COLL t={} rx {} lost {}->{} ch{} vs src {:?}\n  tx  act: {}\n  clb act: {}",
                                    now,
                                    d.to,
                                    tx.frame.src,
                                    tx.frame.dst,
                                    tx.channel,
                                    d.clobbered_src,
                                    dump(Some(tx.frame.src)),
                                    dump(d.clobbered_src),
                                );
                            }
                            self.rec.frame_corrupted(tx.frame.context, d.clobbered_by);
                        } else {
                            self.dispatch(usize::from(d.to), |n, ctx| {
                                n.on_frame(ctx, &tx.frame, tx.start)
                            });
                        }
                    }
                }
                Event::Timer { node, kind } => {
                    self.dispatch(usize::from(node), |n, ctx| n.on_timer(ctx, kind));
                }
                Event::Traffic { node } => {
                    let idx = usize::from(node);
                    let Some(src) = &mut self.sources[idx] else {
                        continue;
                    };
                    let (packet, next) = src.fire(now, &mut self.traffic_rngs[idx]);
                    self.rec.packet_generated(&packet);
                    self.dispatch(idx, |n, ctx| n.on_app_packet(ctx, packet));
                    if let Some(at) = next {
                        self.queue.push(at, Event::Traffic { node });
                    }
                }
                Event::Tick => {
                    let sources_done = self
                        .sources
                        .iter()
                        .flatten()
                        .all(|s| s.done);
                    if sources_done && now >= self.rec.last_activity + self.cooldown {
                        break;
                    }
                    self.queue.push(now + TICK_INTERVAL, Event::Tick);
                }
            }
        }

        self.rec.exclusivity_violations += self.exclusivity_conflicts();
        let residual_queued: u64 = self.nodes.iter().map(|n| n.queued()).sum();
        let energy = self.radio.energy(self.now);
        let mut gts_valid_tx_final = 0u32;
        let mut coordinator_count = 0u32;
        let mut associated_count = 0u32;
        for node in &self.nodes {
            if let SimNode::Dsme(d) = node {
                gts_valid_tx_final += d
                    .act()
                    .entries()
                    .iter()
                    .filter(|e| {
                        e.state == crate::schedule::ActState::Valid
                            && e.descriptor.direction == crate::schedule::GtsDirection::Tx
                    })
                    .count() as u32;
                match d.phase() {
                    crate::mac::NodePhase::Coordinator => {
                        coordinator_count += 1;
                        associated_count += 1;
                    }
                    crate::mac::NodePhase::Associated => associated_count += 1,
                    _ => {}
                }
            }
        }
        let rec = std::mem::replace(&mut self.rec, RunRecorder::new(0, 0));
        rec.finalize(
            self.seed,
            self.now,
            incomplete,
            residual_queued,
            energy,
            gts_valid_tx_final,
            coordinator_count,
            associated_count,
        )
    }

    /// Count established transmit slots that share coordinates with another
    /// established transmit slot close enough to corrupt its reception.
    /// Far-apart reuse of the same slot and channel is legitimate.
    fn exclusivity_conflicts(&self) -> u64 {
        let mut by_coords: BTreeMap<(u16, u8, u8), Vec<(NodeId, NodeId)>> = BTreeMap::new();
        for (id, node) in self.nodes.iter().enumerate() {
            let Some(d) = node.dsme() else { continue };
            for e in d.act().entries() {
                if e.state == crate::schedule::ActState::Valid
                    && e.descriptor.direction == crate::schedule::GtsDirection::Tx
                {
                    let c = e.descriptor.coords;
                    by_coords
                        .entry((c.superframe, c.slot, c.channel))
                        .or_default()
                        .push((id as NodeId, e.descriptor.peer));
                }
            }
        }
        let mut conflicts = 0u64;
        for pairs in by_coords.values() {
            for i in 0..pairs.len() {
                for j in (i + 1)..pairs.len() {
                    let (tx_a, rx_a) = pairs[i];
                    let (tx_b, rx_b) = pairs[j];
                    let a_hits_b = dist(
                        self.radio.position(tx_a),
                        self.radio.position(rx_b),
                    ) <= self.interference_range;
                    let b_hits_a = dist(
                        self.radio.position(tx_b),
                        self.radio.position(rx_a),
                    ) <= self.interference_range;
                    if a_hits_b || b_hits_a {
                        conflicts += 1;
                    }
                }
            }
        }
        conflicts
    }

    /// With drift-free clocks every frame must sit inside the slot kind it
    /// claims on the anchor's canonical grid. Acknowledgments tail their
    /// frame inside the guard the sender reserved and are exempt.
    fn audit_containment(&mut self, sender: usize, tx: &Transmission) {
        let Some(cfg) = self.audit_grid else { return };
        if let SimNode::Dsme(d) = &self.nodes[sender] {
            if !d.is_synced() {
                return;
            }
        }
        let (sf_start, slot_start, _) = cfg.slot_at(tx.start);
        let (sf_end, slot_end, _) = cfg.slot_at(tx.end - 1);
        match tx.frame.context {
            TxContext::Ack | TxContext::Beacon => {}
            TxContext::Cap => {
                let sfm = cfg.sf_in_msf(sf_start);
                let ok = cfg.has_cap(sfm)
                    && sf_start == sf_end
                    && slot_start >= 1
                    && slot_end <= CAP_SLOTS;
                if !ok {
                    self.rec.cap_violations += 1;
                }
            }
            TxContext::Gts => {
                let sfm = cfg.sf_in_msf(sf_start);
                let ok = slot_start >= cfg.first_cfp_slot(sfm)
                    && sf_start == sf_end
                    && slot_start == slot_end;
                if !ok {
                    self.rec.gts_slot_violations += 1;
                }
            }
        }
    }
}
