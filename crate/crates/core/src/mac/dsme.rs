//! Beacon-synchronized DSME node.
//!
//! Lifecycle: passive scan → synchronize on the first beacon heard →
//! associate with its sender → (optionally) claim a beacon slot and become
//! a coordinator. Once associated, the node keeps per-next-hop packet
//! queues whose smoothed arrival rates drive guaranteed-slot allocation
//! through the three-message handshake (request → response → notify).
//! Slot occupancy learned from overheard handshakes lives in the slot
//! allocation bitmap; the node's own slots live in the allocation counter
//! table and the two are composed on demand, so releasing a slot never
//! erases overheard state.

use super::csma::{CapSchedule, CsmaEngine, CsmaOutcome, CsmaStep};
use super::messages::{Frame, GtsReply, GtsRequestKind, MacPayload, Packet, PacketKey, TxContext};
use crate::schedule::{
    ActState, AllocationCounterTable, ChannelPage, GtsDescriptor, GtsDirection, MacTimingParams,
    SlotAllocationBitmap, SlotCoords, SuperframeConfig, ACK_WAIT_DURATION, BASE_SUPERFRAME_DURATION,
    CAP_SLOTS, TURNAROUND_TIME,
};
use crate::scheduler::{reconcile, SlotIntent, TrafficEstimate};
use crate::sim::metrics::DropCause;
use crate::sim::radio::RadioMode;
use crate::sim::routing::{geographic_next_hop, NextHopRule};
use crate::sim::topology::Pos;
use crate::sim::{Ctx, TimerKind};
use crate::NodeId;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Maximum peer requests parked while the node runs its own handshake.
const DEFER_CAP: usize = 4;

/// Formation state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodePhase {
    /// Listening for beacons, hopping through the scan channels.
    Scanning,
    /// Synchronized to a coordinator's grid, association pending.
    Associating,
    /// Member of the network.
    Associated,
    /// Member that owns a beacon slot and emits beacons.
    Coordinator,
}

/// Static configuration of one DSME node.
#[derive(Debug, Clone)]
pub struct DsmeConfig {
    pub superframe: SuperframeConfig,
    pub params: MacTimingParams,
    pub page: ChannelPage,
    pub common_channel: u8,
    pub scan_channels: Vec<u8>,
    /// Smoothing weight of the per-link rate estimator.
    pub alpha: f64,
    /// Allocation hysteresis on/off.
    pub hysteresis: bool,
    /// Idle multi-superframes before an estimate is written off.
    pub depreciation_threshold: u32,
    /// Per-beacon-interval probability that an eligible node claims a
    /// beacon slot.
    pub election_probability: f64,
    /// Overheard slot marks are dropped after this many multi-superframes
    /// without reconfirmation.
    pub lease_msf: u32,
    /// Clock skew of this node's tick generator.
    pub drift_ppm: f64,
    /// The network's anchor: starts beaconing at time zero instead of
    /// scanning.
    pub pan_coordinator: bool,
    pub position: Pos,
    pub next_hop: NextHopRule,
}

#[derive(Debug, Clone, Copy)]
struct Grid {
    /// Global time of a beacon-interval start.
    origin: u64,
    /// Next slot tick, counted from `origin`.
    next_index: u64,
}

#[derive(Debug, Clone, PartialEq)]
enum HandshakeKind {
    Assoc { coordinator: NodeId },
    Claim { sf: u32 },
    Allocate { peer: NodeId },
    Deallocate { peer: NodeId, coords: SlotCoords },
    DupNotify,
}

/// What the frame currently inside the CSMA engine means, so its
/// completion can be routed back to the right state machine.
#[derive(Debug, Clone, PartialEq)]
enum JobTag {
    Assoc,
    AssocResponse,
    Claim { sf: u32 },
    BeaconRequest,
    CollisionNotify,
    GtsRequestOut,
    GtsResponseOut {
        requester: NodeId,
        granted: Option<SlotCoords>,
    },
    GtsNotifyOut,
}

#[derive(Debug)]
enum Intent {
    Allocate { peer: NodeId },
    Deallocate { desc: GtsDescriptor },
    DupNotify { peer: NodeId, coords: SlotCoords },
}

#[derive(Debug)]
struct AwaitNotify {
    requester: NodeId,
    coords: SlotCoords,
    gen: u32,
}

#[derive(Debug)]
struct Link {
    queue: VecDeque<Packet>,
    est: TrafficEstimate<f64>,
}

#[derive(Debug, Clone, Copy)]
struct GtsTxWindow {
    coords: SlotCoords,
    peer: NodeId,
    channel: u8,
    slot_end: u64,
}

#[derive(Debug, Clone, Copy)]
struct GtsInFlight {
    peer: NodeId,
    seq: u32,
    gen: u32,
}

/// DSME MAC state machine of one node.
#[derive(Debug)]
pub struct DsmeNode {
    id: NodeId,
    cfg: DsmeConfig,
    phase: NodePhase,

    grid: Option<Grid>,
    slot_gen: u32,
    drift_factor: f64,
    duty_mode: RadioMode,

    scan_idx: usize,
    scan_gen: u32,

    parent: Option<NodeId>,
    bitmap: u64,
    my_beacon_sf: Option<u32>,
    pending_claim: Option<u32>,
    beacon_owner: BTreeMap<u32, NodeId>,
    collision_notified: u64,
    coordinators_heard: BTreeSet<NodeId>,

    engine: CsmaEngine,
    mgmt: VecDeque<(Frame, JobTag)>,
    current_job: Option<JobTag>,
    cca_from: u64,

    out_handshake: Option<HandshakeKind>,
    resp_gen: u32,
    defer: VecDeque<(NodeId, GtsRequestKind)>,
    pending_intents: VecDeque<Intent>,
    await_notify: Vec<AwaitNotify>,
    notify_gen: u32,

    act: AllocationCounterTable,
    sab: SlotAllocationBitmap,
    mark_epoch: BTreeMap<(u16, u8, u8), u64>,

    links: BTreeMap<NodeId, Link>,
    neighbors: BTreeMap<NodeId, Pos>,
    /// Last packet accepted from each upstream sender, to swallow MAC-level
    /// retransmissions whose acknowledgment was lost.
    last_rx: BTreeMap<NodeId, PacketKey>,

    current_tx_gts: Option<GtsTxWindow>,
    current_rx_gts: Option<(u16, u8)>,
    gts_inflight: Option<GtsInFlight>,
    gts_gen: u32,

    seq: u32,
    resp_wait_symbols: u64,
}

impl DsmeNode {
    pub fn new(id: NodeId, cfg: DsmeConfig) -> Self {
        let engine = CsmaEngine::new(
            CapSchedule::Always,
            cfg.params.min_be,
            cfg.params.max_be,
            cfg.params.max_backoffs,
            cfg.params.max_retries,
        );
        let sab = SlotAllocationBitmap::for_config(&cfg.superframe, cfg.page.clone());
        let resp_wait = cfg.params.resolved_response_wait(&cfg.superframe);
        let drift_factor = 1.0 + cfg.drift_ppm * 1e-6;
        Self {
            id,
            phase: NodePhase::Scanning,
            grid: None,
            slot_gen: 0,
            drift_factor,
            duty_mode: RadioMode::Off,
            scan_idx: 0,
            scan_gen: 0,
            parent: None,
            bitmap: 0,
            my_beacon_sf: None,
            pending_claim: None,
            beacon_owner: BTreeMap::new(),
            collision_notified: 0,
            coordinators_heard: BTreeSet::new(),
            engine,
            mgmt: VecDeque::new(),
            current_job: None,
            cca_from: 0,
            out_handshake: None,
            resp_gen: 0,
            defer: VecDeque::new(),
            pending_intents: VecDeque::new(),
            await_notify: Vec::new(),
            notify_gen: 0,
            act: AllocationCounterTable::new(),
            sab,
            mark_epoch: BTreeMap::new(),
            links: BTreeMap::new(),
            neighbors: BTreeMap::new(),
            last_rx: BTreeMap::new(),
            current_tx_gts: None,
            current_rx_gts: None,
            gts_inflight: None,
            gts_gen: 0,
            seq: 0,
            resp_wait_symbols: u64::from(resp_wait) * BASE_SUPERFRAME_DURATION,
            cfg,
        }
    }

    pub fn phase(&self) -> NodePhase {
        self.phase
    }

    pub fn act(&self) -> &AllocationCounterTable {
        &self.act
    }

    pub fn config(&self) -> &DsmeConfig {
        &self.cfg
    }

    pub fn is_synced(&self) -> bool {
        self.grid.is_some()
    }

    pub fn beacon_sf(&self) -> Option<u32> {
        self.my_beacon_sf
    }

    /// Packets sitting in next-hop queues.
    pub fn queued(&self) -> u64 {
        self.links.values().map(|l| l.queue.len() as u64).sum()
    }

    /// Estimated rate of the link toward `peer` in packets per
    /// multi-superframe.
    pub fn link_rate(&self, peer: NodeId) -> Option<f64> {
        self.links.get(&peer).map(|l| l.est.rate())
    }

    fn next_seq(&mut self) -> u32 {
        self.seq += 1;
        self.seq
    }

    fn tick_time(&self, grid: &Grid, index: u64) -> u64 {
        let slot = self.cfg.superframe.slot_duration() as f64;
        grid.origin + (index as f64 * slot * self.drift_factor).round() as u64
    }

    // ------------------------------------------------------------------
    // Startup and timers
    // ------------------------------------------------------------------

    pub fn start(&mut self, ctx: &mut Ctx) {
        if self.cfg.pan_coordinator {
            self.grid = Some(Grid {
                origin: ctx.now,
                next_index: 0,
            });
            self.phase = NodePhase::Coordinator;
            self.my_beacon_sf = Some(0);
            self.bitmap = 1;
            self.beacon_owner.insert(0, self.id);
            self.engine
                .set_schedule(CapSchedule::Windows(self.cfg.superframe));
            self.duty_mode = RadioMode::Rx(self.cfg.common_channel);
            ctx.set_radio(self.duty_mode);
            ctx.rec.became_coordinator(self.id, ctx.now);
            ctx.timer(ctx.now, TimerKind::SlotStart { gen: self.slot_gen });
        } else {
            self.phase = NodePhase::Scanning;
            self.duty_mode = RadioMode::Rx(self.cfg.scan_channels[self.scan_idx]);
            ctx.set_radio(self.duty_mode);
            ctx.timer(
                ctx.now + self.cfg.superframe.beacon_interval_duration(),
                TimerKind::ScanDwell { gen: self.scan_gen },
            );
        }
    }

    pub fn on_timer(&mut self, ctx: &mut Ctx, kind: TimerKind) {
        match kind {
            TimerKind::SlotStart { gen } => {
                if gen != self.slot_gen {
                    return;
                }
                let Some(mut grid) = self.grid else { return };
                let index = grid.next_index;
                grid.next_index += 1;
                let next_at = self.tick_time(&grid, grid.next_index);
                self.grid = Some(grid);
                ctx.timer(next_at, TimerKind::SlotStart { gen: self.slot_gen });
                self.slot_duties(ctx, index);
            }
            TimerKind::ScanDwell { gen } => {
                if gen != self.scan_gen || self.phase != NodePhase::Scanning {
                    return;
                }
                self.scan_idx = (self.scan_idx + 1) % self.cfg.scan_channels.len();
                if self.scan_idx == 0 && self.engine.is_idle() && self.mgmt.is_empty() {
                    // A full scan cycle heard nothing: ask audible members
                    // for a beacon so coverage can grow toward us.
                    let frame = self.broadcast_frame(
                        MacPayload::BeaconRequest,
                        TxContext::Cap,
                        self.cfg.common_channel,
                    );
                    self.enqueue_mgmt(ctx, frame, JobTag::BeaconRequest);
                }
                self.duty_mode = RadioMode::Rx(self.cfg.scan_channels[self.scan_idx]);
                ctx.set_radio(self.duty_mode);
                ctx.timer(
                    ctx.now + self.cfg.superframe.beacon_interval_duration(),
                    TimerKind::ScanDwell { gen: self.scan_gen },
                );
            }
            TimerKind::CsmaCca { gen } => {
                let Some(channel) = self.engine.current_frame().map(|f| f.channel) else {
                    return;
                };
                let busy = ctx.radio.cca_busy(self.id, channel, self.cca_from, ctx.now);
                let step = self.engine.on_cca_decision(gen, busy, ctx.now, ctx.rng);
                self.apply_step(ctx, step);
            }
            TimerKind::CsmaAck { gen } => {
                let step = self.engine.on_ack_timeout(gen, ctx.now, ctx.rng);
                self.apply_step(ctx, step);
            }
            TimerKind::GtsAck { gen } => self.gts_ack_timeout(ctx, gen),
            TimerKind::ResponseWait { gen } => {
                if gen != self.resp_gen {
                    return;
                }
                let Some(kind) = self.out_handshake.take() else {
                    return;
                };
                match kind {
                    HandshakeKind::Deallocate { coords, .. } => {
                        // The peer never answered; release unilaterally.
                        self.act.remove(coords);
                    }
                    HandshakeKind::Assoc { .. }
                    | HandshakeKind::Allocate { .. }
                    | HandshakeKind::Claim { .. }
                    | HandshakeKind::DupNotify => {}
                }
                ctx.rec.handshakes_aborted += 1;
                self.after_handshake(ctx);
            }
            TimerKind::NotifyWait { gen } => {
                let Some(pos) = self.await_notify.iter().position(|a| a.gen == gen) else {
                    return;
                };
                let waiting = self.await_notify.swap_remove(pos);
                // The requester never confirmed: drop the unconfirmed entry
                // but keep the slot marked busy; the lease sweep reclaims
                // it if nobody reconfirms.
                self.act.remove(waiting.coords);
                self.sab.mark(
                    waiting.coords.superframe,
                    waiting.coords.slot,
                    waiting.coords.channel,
                );
                self.mark_epoch.insert(
                    (
                        waiting.coords.superframe,
                        waiting.coords.slot,
                        waiting.coords.channel,
                    ),
                    ctx.now,
                );
                ctx.rec.handshakes_aborted += 1;
            }
        }
    }

    // ------------------------------------------------------------------
    // Slot duties
    // ------------------------------------------------------------------

    fn slot_duties(&mut self, ctx: &mut Ctx, index: u64) {
        let sf = &self.cfg.superframe;
        let slot = (index % 16) as u32;
        let sf_local = index / 16;
        let sf_in_bi = (sf_local % u64::from(sf.superframes_per_beacon_interval())) as u32;
        let sf_in_msf = (sf_local % u64::from(sf.superframes_per_multisuperframe())) as u32;
        self.current_tx_gts = None;
        self.current_rx_gts = None;

        if slot == 0 {
            if sf_in_msf == 0 {
                self.msf_rollover(ctx);
            }
            if sf_in_bi == 0 {
                self.bi_rollover(ctx);
            }
            self.duty_mode = RadioMode::Rx(self.cfg.common_channel);
            ctx.set_radio(self.duty_mode);
            if self.phase == NodePhase::Coordinator && self.my_beacon_sf == Some(sf_in_bi) {
                let frame = self.broadcast_frame(
                    MacPayload::Beacon {
                        beacon_slot: sf_in_bi,
                        slot_bitmap: self.bitmap,
                        position: self.cfg.position,
                        permit: true,
                    },
                    TxContext::Beacon,
                    self.cfg.common_channel,
                );
                ctx.rec.beacons += 1;
                ctx.start_tx(frame, 0);
            }
            return;
        }

        if self.cfg.superframe.has_cap(sf_in_msf) && slot <= CAP_SLOTS {
            self.duty_mode = RadioMode::Rx(self.cfg.common_channel);
            ctx.set_radio(self.duty_mode);
            if slot == 1 {
                if self.phase == NodePhase::Associating && self.out_handshake.is_none() {
                    self.enqueue_assoc(ctx);
                }
                self.pump_intents(ctx);
                self.pump_mgmt(ctx);
            }
            return;
        }

        let Some(cfp_idx) = self.cfg.superframe.slot_to_cfp_index(sf_in_msf, slot) else {
            self.duty_mode = RadioMode::Off;
            ctx.set_radio(self.duty_mode);
            return;
        };
        let coords_sf = sf_in_msf as u16;
        let coords_slot = cfp_idx as u8;
        let slot_entry = self
            .act
            .entry_at(coords_sf, coords_slot)
            .map(|e| (e.descriptor, e.state));
        match slot_entry {
            Some((desc, _)) if desc.direction == GtsDirection::Rx => {
                self.duty_mode = RadioMode::Rx(desc.coords.channel);
                ctx.set_radio(self.duty_mode);
                self.current_rx_gts = Some((coords_sf, coords_slot));
            }
            Some((desc, ActState::Valid)) => {
                self.duty_mode = RadioMode::Rx(desc.coords.channel);
                ctx.set_radio(self.duty_mode);
                let grid = self.grid.expect("ticking without a grid");
                self.current_tx_gts = Some(GtsTxWindow {
                    coords: desc.coords,
                    peer: desc.peer,
                    channel: desc.coords.channel,
                    slot_end: self.tick_time(&grid, index + 1),
                });
                self.gts_try_send(ctx);
            }
            _ => {
                self.duty_mode = RadioMode::Off;
                ctx.set_radio(self.duty_mode);
            }
        }
    }

    fn msf_rollover(&mut self, ctx: &mut Ctx) {
        let threshold = self.cfg.params.expiration_threshold;
        for desc in self.act.msf_rollover(threshold) {
            ctx.rec.expirations += 1;
            self.act.set_state(desc.coords, ActState::Deallocating);
            self.pending_intents.push_back(Intent::Deallocate { desc });
        }

        let mut new_intents: Vec<Intent> = Vec::new();
        {
            let act = &self.act;
            let out = &self.out_handshake;
            let pending = &self.pending_intents;
            for (&peer, link) in self.links.iter_mut() {
                link.est.end_of_msf();
                let allocated = act.valid_tx_count(peer);
                let busy = matches!(
                    out,
                    Some(HandshakeKind::Allocate { peer: p } | HandshakeKind::Deallocate { peer: p, .. }) if *p == peer
                ) || pending.iter().any(|i| match i {
                    Intent::Allocate { peer: p } => *p == peer,
                    Intent::Deallocate { desc } => desc.peer == peer,
                    Intent::DupNotify { .. } => false,
                });
                let required = link.est.required_slots(allocated);
                match reconcile(required, allocated, busy) {
                    Some(SlotIntent::Allocate) => {
                        ctx.rec.slot_intent(ctx.now);
                        new_intents.push(Intent::Allocate { peer });
                    }
                    Some(SlotIntent::Deallocate) => {
                        if let Some(entry) = act.most_recent_valid_tx(peer) {
                            ctx.rec.slot_intent(ctx.now);
                            new_intents.push(Intent::Deallocate {
                                desc: entry.descriptor,
                            });
                        }
                    }
                    None => {}
                }
            }
        }
        for intent in new_intents {
            if let Intent::Deallocate { desc } = &intent {
                self.act.set_state(desc.coords, ActState::Deallocating);
            }
            self.pending_intents.push_back(intent);
        }

        // Lease sweep over overheard marks.
        let lease = u64::from(self.cfg.lease_msf) * self.cfg.superframe.multisuperframe_duration();
        let expired: Vec<(u16, u8, u8)> = self
            .mark_epoch
            .iter()
            .filter(|(_, &epoch)| ctx.now.saturating_sub(epoch) > lease)
            .map(|(&k, _)| k)
            .collect();
        for (sf, slot, ch) in expired {
            self.sab.clear(sf, slot, ch);
            self.mark_epoch.remove(&(sf, slot, ch));
            ctx.rec.lease_reclaims += 1;
        }

        self.pump_intents(ctx);
        self.pump_mgmt(ctx);
    }

    fn bi_rollover(&mut self, ctx: &mut Ctx) {
        self.collision_notified = 0;
        if self.phase == NodePhase::Associated
            && self.out_handshake.is_none()
            && self.pending_claim.is_none()
            && self.coordinators_heard.len() < 2
            && ctx.rng.gen_bool(self.cfg.election_probability)
        {
            self.claim_beacon_slot(ctx);
        }
    }

    fn claim_beacon_slot(&mut self, ctx: &mut Ctx) {
        let n = self.cfg.superframe.superframes_per_beacon_interval();
        let free: Vec<u32> = (1..n).filter(|i| self.bitmap & (1u64 << i) == 0).collect();
        if free.is_empty() {
            return;
        }
        // The pick is uniform over the free slots. Claimants racing out of
        // earshot of each other see the same bitmap, so a deterministic
        // choice would put them in the same slot; their beacons would then
        // collide every interval in the region that hears both, and nodes
        // there could never decode a beacon at all.
        let sf = free[ctx.rng.gen_range(0..free.len())];
        self.pending_claim = Some(sf);
        self.out_handshake = Some(HandshakeKind::Claim { sf });
        let frame = self.broadcast_frame(
            MacPayload::BeaconAllocNotify { slot: sf },
            TxContext::Cap,
            self.cfg.common_channel,
        );
        self.enqueue_mgmt(ctx, frame, JobTag::Claim { sf });
    }

    fn demote(&mut self) {
        if self.phase == NodePhase::Coordinator {
            self.phase = NodePhase::Associated;
        }
        self.my_beacon_sf = None;
    }

    // ------------------------------------------------------------------
    // Frame reception
    // ------------------------------------------------------------------

    pub fn on_frame(&mut self, ctx: &mut Ctx, frame: &Frame, frame_start: u64) {
        match &frame.payload {
            MacPayload::Beacon { position, .. } | MacPayload::AssocRequest { position } => {
                self.neighbors.insert(frame.src, *position);
            }
            MacPayload::Data { position, .. } => {
                self.neighbors.insert(frame.src, *position);
            }
            _ => {}
        }

        if frame.dst == self.id && frame.ack_request {
            let ack = Frame {
                src: self.id,
                dst: frame.src,
                seq: self.next_seq(),
                ack_request: false,
                context: TxContext::Ack,
                channel: frame.channel,
                payload: MacPayload::Ack { acked: frame.seq },
            };
            ctx.start_tx(ack, TURNAROUND_TIME);
        }

        match frame.payload.clone() {
            MacPayload::Beacon {
                beacon_slot,
                slot_bitmap,
                permit,
                ..
            } => self.handle_beacon(ctx, frame.src, beacon_slot, slot_bitmap, permit, frame_start),
            MacPayload::Ack { acked } => {
                if frame.dst != self.id {
                    return;
                }
                if let Some(inflight) = self.gts_inflight {
                    if inflight.peer == frame.src && inflight.seq == acked {
                        self.gts_ack_success(ctx);
                        return;
                    }
                }
                let step = self.engine.on_ack(frame.src, acked);
                self.apply_step(ctx, step);
            }
            MacPayload::BeaconRequest => {
                if self.phase == NodePhase::Associated
                    && self.out_handshake.is_none()
                    && self.pending_claim.is_none()
                {
                    self.claim_beacon_slot(ctx);
                }
            }
            MacPayload::BeaconAllocNotify { slot } => {
                self.bitmap |= 1u64 << slot;
                if self.pending_claim == Some(slot) {
                    // Someone else claimed it first; the in-flight claim is
                    // voided when its transmission completes.
                    self.pending_claim = None;
                }
                if self.my_beacon_sf == Some(slot) {
                    self.send_collision_notify(ctx, slot);
                }
                self.beacon_owner.insert(slot, frame.src);
            }
            MacPayload::BeaconCollisionNotify { slot } => {
                if self.my_beacon_sf == Some(slot) {
                    self.demote();
                }
                if self.pending_claim == Some(slot) {
                    self.pending_claim = None;
                }
            }
            MacPayload::AssocRequest { .. } => {
                if frame.dst == self.id && self.phase == NodePhase::Coordinator {
                    let response = Frame {
                        src: self.id,
                        dst: frame.src,
                        seq: self.next_seq(),
                        ack_request: true,
                        context: TxContext::Cap,
                        channel: self.cfg.common_channel,
                        payload: MacPayload::AssocResponse { accepted: true },
                    };
                    self.enqueue_mgmt(ctx, response, JobTag::AssocResponse);
                }
            }
            MacPayload::AssocResponse { accepted } => {
                if frame.dst == self.id
                    && self.phase == NodePhase::Associating
                    && matches!(self.out_handshake, Some(HandshakeKind::Assoc { coordinator }) if coordinator == frame.src)
                {
                    self.resp_gen += 1;
                    self.out_handshake = None;
                    if accepted {
                        self.phase = NodePhase::Associated;
                        ctx.rec.associated(self.id, ctx.now);
                    }
                    self.after_handshake(ctx);
                }
            }
            MacPayload::GtsRequest { kind } => {
                if frame.dst == self.id {
                    self.handle_gts_request(ctx, frame.src, kind);
                }
            }
            MacPayload::GtsResponse { requester, reply } => {
                self.handle_gts_response(ctx, frame.src, requester, reply);
            }
            MacPayload::GtsNotify { responder, reply } => {
                self.handle_gts_notify(ctx, frame.src, responder, reply);
            }
            MacPayload::Data { packet, .. } => {
                if frame.dst == self.id {
                    self.handle_data(ctx, frame.src, packet);
                }
            }
        }
    }

    fn handle_beacon(
        &mut self,
        ctx: &mut Ctx,
        src: NodeId,
        beacon_slot: u32,
        slot_bitmap: u64,
        permit: bool,
        frame_start: u64,
    ) {
        self.coordinators_heard.insert(src);
        self.bitmap |= slot_bitmap | (1u64 << beacon_slot);
        if let Some(claim) = self.pending_claim {
            if self.bitmap & (1u64 << claim) != 0 {
                self.pending_claim = None;
            }
        }

        let known_owner = self.beacon_owner.get(&beacon_slot).copied();
        if let Some(owner) = known_owner {
            if owner != src && owner != self.id {
                // Two distinct nodes beacon in the same slot; tell them.
                self.send_collision_notify(ctx, beacon_slot);
            }
        }
        self.beacon_owner.insert(beacon_slot, src);

        if self.my_beacon_sf == Some(beacon_slot) {
            // Someone shares our slot: the lower id keeps it.
            if src < self.id {
                self.demote();
            } else {
                self.send_collision_notify(ctx, beacon_slot);
            }
        }

        match self.phase {
            NodePhase::Scanning if permit => self.sync(ctx, src, beacon_slot, frame_start),
            _ if self.parent == Some(src) => self.resync(ctx, beacon_slot, frame_start),
            _ => {}
        }
    }

    fn send_collision_notify(&mut self, ctx: &mut Ctx, slot: u32) {
        if self.collision_notified & (1u64 << slot) != 0 {
            return;
        }
        self.collision_notified |= 1u64 << slot;
        let frame = self.broadcast_frame(
            MacPayload::BeaconCollisionNotify { slot },
            TxContext::Cap,
            self.cfg.common_channel,
        );
        self.enqueue_mgmt(ctx, frame, JobTag::CollisionNotify);
    }

    fn implied_origin(&self, beacon_slot: u32, frame_start: u64) -> u64 {
        frame_start
            .saturating_sub(u64::from(beacon_slot) * self.cfg.superframe.superframe_duration())
    }

    fn sync(&mut self, ctx: &mut Ctx, src: NodeId, beacon_slot: u32, frame_start: u64) {
        let origin = self.implied_origin(beacon_slot, frame_start);
        let slot_local = self.cfg.superframe.slot_duration() as f64 * self.drift_factor;
        let next_index = ((ctx.now.saturating_sub(origin)) as f64 / slot_local).floor() as u64 + 1;
        self.grid = Some(Grid { origin, next_index });
        self.parent = Some(src);
        self.phase = NodePhase::Associating;
        // Scan-era jobs (beacon solicitations on a free-running schedule)
        // are obsolete now that transmissions must respect the grid.
        self.engine.reset();
        self.current_job = None;
        self.mgmt.clear();
        self.engine
            .set_schedule(CapSchedule::Windows(self.cfg.superframe));
        self.scan_gen += 1;
        self.slot_gen += 1;
        self.duty_mode = RadioMode::Rx(self.cfg.common_channel);
        ctx.set_radio(self.duty_mode);
        let grid = self.grid.unwrap();
        ctx.timer(
            self.tick_time(&grid, next_index),
            TimerKind::SlotStart { gen: self.slot_gen },
        );
        self.enqueue_assoc(ctx);
    }

    fn resync(&mut self, ctx: &mut Ctx, beacon_slot: u32, frame_start: u64) {
        let Some(old) = self.grid else { return };
        let origin = self.implied_origin(beacon_slot, frame_start);
        let slot_local = self.cfg.superframe.slot_duration() as f64 * self.drift_factor;
        let next_index = ((ctx.now.saturating_sub(origin)) as f64 / slot_local).floor() as u64 + 1;
        let candidate = Grid { origin, next_index };
        let new_at = self.tick_time(&candidate, next_index);
        let old_at = self.tick_time(&old, old.next_index);
        if new_at == old_at {
            return;
        }
        self.slot_gen += 1;
        self.grid = Some(candidate);
        ctx.rec.resyncs += 1;
        ctx.timer(new_at, TimerKind::SlotStart { gen: self.slot_gen });
    }

    fn enqueue_assoc(&mut self, ctx: &mut Ctx) {
        let Some(parent) = self.parent else { return };
        self.out_handshake = Some(HandshakeKind::Assoc {
            coordinator: parent,
        });
        let frame = Frame {
            src: self.id,
            dst: parent,
            seq: self.next_seq(),
            ack_request: true,
            context: TxContext::Cap,
            channel: self.cfg.common_channel,
            payload: MacPayload::AssocRequest {
                position: self.cfg.position,
            },
        };
        self.enqueue_mgmt(ctx, frame, JobTag::Assoc);
    }

    // ------------------------------------------------------------------
    // GTS handshake
    // ------------------------------------------------------------------

    /// The node's occupancy view: overheard marks plus its own slots.
    fn effective_sab(&self) -> SlotAllocationBitmap {
        let mut sab = self.sab.clone();
        for entry in self.act.entries() {
            sab.mark_all_channels(entry.descriptor.coords.superframe, entry.descriptor.coords.slot);
        }
        sab
    }

    fn handle_gts_request(&mut self, ctx: &mut Ctx, src: NodeId, kind: GtsRequestKind) {
        if let GtsRequestKind::DuplicateNotify { coords } = kind {
            ctx.rec.dup_notifies += 1;
            if let Some(entry) = self.act.entry_at(coords.superframe, coords.slot) {
                if entry.descriptor.coords.channel == coords.channel
                    && entry.state != ActState::Deallocating
                {
                    let desc = entry.descriptor;
                    self.act.set_state(desc.coords, ActState::Deallocating);
                    self.pending_intents.push_back(Intent::Deallocate { desc });
                    self.pump_intents(ctx);
                }
            }
            return;
        }
        if self.out_handshake.is_some() {
            if self.defer.len() < DEFER_CAP {
                self.defer.push_back((src, kind));
                ctx.rec.requests_deferred += 1;
            }
            return;
        }
        self.respond_to_request(ctx, src, kind);
    }

    fn respond_to_request(&mut self, ctx: &mut Ctx, src: NodeId, kind: GtsRequestKind) {
        match kind {
            GtsRequestKind::Allocate {
                direction,
                preferred,
                sab,
            } => {
                let pick = self
                    .effective_sab()
                    .merged(&sab)
                    .ok()
                    .and_then(|merged| merged.random_free_slot(preferred, ctx.rng));
                let (reply, granted) = match pick {
                    Some((sf, slot, ch)) => {
                        let coords = SlotCoords::new(sf, slot, ch);
                        let desc = GtsDescriptor {
                            coords,
                            direction: direction.opposite(),
                            peer: src,
                        };
                        if self.act.insert(desc, ActState::Unconfirmed).is_ok() {
                            (GtsReply::AllocateOk { coords, direction }, Some(coords))
                        } else {
                            (GtsReply::AllocateDenied, None)
                        }
                    }
                    None => (GtsReply::AllocateDenied, None),
                };
                if matches!(reply, GtsReply::AllocateDenied) {
                    ctx.rec.handshakes_denied += 1;
                }
                let frame = self.broadcast_frame(
                    MacPayload::GtsResponse {
                        requester: src,
                        reply,
                    },
                    TxContext::Cap,
                    self.cfg.common_channel,
                );
                self.enqueue_mgmt(
                    ctx,
                    frame,
                    JobTag::GtsResponseOut {
                        requester: src,
                        granted,
                    },
                );
            }
            GtsRequestKind::Deallocate { coords, direction } => {
                if let Some(entry) = self.act.entry_at(coords.superframe, coords.slot) {
                    if entry.descriptor.peer == src
                        && entry.descriptor.coords.channel == coords.channel
                    {
                        self.act.remove(coords);
                    }
                }
                let frame = self.broadcast_frame(
                    MacPayload::GtsResponse {
                        requester: src,
                        reply: GtsReply::DeallocateOk { coords, direction },
                    },
                    TxContext::Cap,
                    self.cfg.common_channel,
                );
                self.enqueue_mgmt(
                    ctx,
                    frame,
                    JobTag::GtsResponseOut {
                        requester: src,
                        granted: None,
                    },
                );
            }
            GtsRequestKind::DuplicateNotify { .. } => unreachable!("handled by caller"),
        }
    }

    fn handle_gts_response(
        &mut self,
        ctx: &mut Ctx,
        src: NodeId,
        requester: NodeId,
        reply: GtsReply,
    ) {
        if requester == self.id {
            match (&self.out_handshake, reply) {
                (
                    Some(HandshakeKind::Allocate { peer }),
                    GtsReply::AllocateOk { coords, direction },
                ) if *peer == src => {
                    self.resp_gen += 1;
                    let desc = GtsDescriptor {
                        coords,
                        direction,
                        peer: src,
                    };
                    if self.act.insert(desc, ActState::Valid).is_ok() {
                        ctx.rec.gts_allocated(self.id, ctx.now);
                        let frame = self.broadcast_frame(
                            MacPayload::GtsNotify {
                                responder: src,
                                reply,
                            },
                            TxContext::Cap,
                            self.cfg.common_channel,
                        );
                        self.enqueue_mgmt(ctx, frame, JobTag::GtsNotifyOut);
                    } else {
                        self.out_handshake = None;
                        ctx.rec.handshakes_aborted += 1;
                        self.after_handshake(ctx);
                    }
                }
                (Some(HandshakeKind::Allocate { peer }), GtsReply::AllocateDenied)
                    if *peer == src =>
                {
                    self.resp_gen += 1;
                    self.out_handshake = None;
                    self.after_handshake(ctx);
                }
                (
                    Some(HandshakeKind::Deallocate { peer, coords }),
                    GtsReply::DeallocateOk { .. },
                ) if *peer == src => {
                    self.resp_gen += 1;
                    let coords = *coords;
                    self.act.remove(coords);
                    let frame = self.broadcast_frame(
                        MacPayload::GtsNotify {
                            responder: src,
                            reply,
                        },
                        TxContext::Cap,
                        self.cfg.common_channel,
                    );
                    self.enqueue_mgmt(ctx, frame, JobTag::GtsNotifyOut);
                }
                _ => {}
            }
            return;
        }
        self.note_overheard_reply(ctx, src, requester, reply);
    }

    fn handle_gts_notify(&mut self, ctx: &mut Ctx, src: NodeId, responder: NodeId, reply: GtsReply) {
        if responder == self.id {
            if let GtsReply::AllocateOk { coords, .. } = reply {
                if let Some(pos) = self
                    .await_notify
                    .iter()
                    .position(|a| a.requester == src && a.coords == coords)
                {
                    self.await_notify.swap_remove(pos);
                    if let Some(entry) = self.act.entry_at(coords.superframe, coords.slot) {
                        if entry.state == ActState::Unconfirmed {
                            self.act.set_state(coords, ActState::Valid);
                            ctx.rec.gts_allocated(self.id, ctx.now);
                        }
                    }
                }
            }
            return;
        }
        self.note_overheard_reply(ctx, src, responder, reply);
    }

    /// Track an overheard grant or release; `announcer` is the node that
    /// transmitted the frame, `other_party` the counterpart it names.
    fn note_overheard_reply(
        &mut self,
        ctx: &mut Ctx,
        announcer: NodeId,
        other_party: NodeId,
        reply: GtsReply,
    ) {
        if other_party == self.id {
            return;
        }
        match reply {
            GtsReply::AllocateOk { coords, .. } => {
                if let Some(entry) = self.act.entry_at(coords.superframe, coords.slot) {
                    let mine = entry.descriptor;
                    if mine.coords.channel == coords.channel
                        && mine.peer != announcer
                        && mine.peer != other_party
                        && entry.state != ActState::Deallocating
                    {
                        // Someone established our exact slot: tell the
                        // announcer to tear theirs down.
                        self.pending_intents.push_back(Intent::DupNotify {
                            peer: announcer,
                            coords,
                        });
                        self.pump_intents(ctx);
                        return;
                    }
                }
                self.sab.mark(coords.superframe, coords.slot, coords.channel);
                self.mark_epoch.insert(
                    (coords.superframe, coords.slot, coords.channel),
                    ctx.now,
                );
            }
            GtsReply::DeallocateOk { coords, .. } => {
                self.sab
                    .clear(coords.superframe, coords.slot, coords.channel);
                self.mark_epoch
                    .remove(&(coords.superframe, coords.slot, coords.channel));
            }
            GtsReply::AllocateDenied => {}
        }
    }

    // ------------------------------------------------------------------
    // Intents, jobs and the management queue
    // ------------------------------------------------------------------

    fn pump_intents(&mut self, ctx: &mut Ctx) {
        while self.out_handshake.is_none() {
            let Some(intent) = self.pending_intents.pop_front() else {
                return;
            };
            match intent {
                Intent::Allocate { peer } => {
                    ctx.rec.handshakes_started += 1;
                    self.out_handshake = Some(HandshakeKind::Allocate { peer });
                    let sab = self.effective_sab();
                    let frame = Frame {
                        src: self.id,
                        dst: peer,
                        seq: self.next_seq(),
                        ack_request: true,
                        context: TxContext::Cap,
                        channel: self.cfg.common_channel,
                        payload: MacPayload::GtsRequest {
                            kind: GtsRequestKind::Allocate {
                                direction: GtsDirection::Tx,
                                preferred: None,
                                sab,
                            },
                        },
                    };
                    self.enqueue_mgmt(ctx, frame, JobTag::GtsRequestOut);
                }
                Intent::Deallocate { desc } => {
                    ctx.rec.handshakes_started += 1;
                    self.out_handshake = Some(HandshakeKind::Deallocate {
                        peer: desc.peer,
                        coords: desc.coords,
                    });
                    let frame = Frame {
                        src: self.id,
                        dst: desc.peer,
                        seq: self.next_seq(),
                        ack_request: true,
                        context: TxContext::Cap,
                        channel: self.cfg.common_channel,
                        payload: MacPayload::GtsRequest {
                            kind: GtsRequestKind::Deallocate {
                                coords: desc.coords,
                                direction: desc.direction,
                            },
                        },
                    };
                    self.enqueue_mgmt(ctx, frame, JobTag::GtsRequestOut);
                }
                Intent::DupNotify { peer, coords } => {
                    self.out_handshake = Some(HandshakeKind::DupNotify);
                    let frame = Frame {
                        src: self.id,
                        dst: peer,
                        seq: self.next_seq(),
                        ack_request: true,
                        context: TxContext::Cap,
                        channel: self.cfg.common_channel,
                        payload: MacPayload::GtsRequest {
                            kind: GtsRequestKind::DuplicateNotify { coords },
                        },
                    };
                    self.enqueue_mgmt(ctx, frame, JobTag::GtsRequestOut);
                }
            }
        }
    }

    fn after_handshake(&mut self, ctx: &mut Ctx) {
        while self.out_handshake.is_none() {
            let Some((src, kind)) = self.defer.pop_front() else {
                break;
            };
            self.respond_to_request(ctx, src, kind);
        }
        self.pump_intents(ctx);
        self.pump_mgmt(ctx);
    }

    fn enqueue_mgmt(&mut self, ctx: &mut Ctx, frame: Frame, tag: JobTag) {
        self.mgmt.push_back((frame, tag));
        self.pump_mgmt(ctx);
    }

    fn pump_mgmt(&mut self, ctx: &mut Ctx) {
        if !self.engine.is_idle() {
            return;
        }
        let Some((frame, tag)) = self.mgmt.pop_front() else {
            return;
        };
        ctx.rec.mgmt_frames += 1;
        self.current_job = Some(tag);
        let step = self.engine.submit(frame, ctx.now, ctx.rng);
        self.apply_step(ctx, step);
    }

    fn apply_step(&mut self, ctx: &mut Ctx, step: CsmaStep) {
        match step {
            CsmaStep::None => {}
            CsmaStep::StartCca {
                cca_start,
                decision_at,
                gen,
            } => {
                self.cca_from = cca_start;
                ctx.timer(decision_at, TimerKind::CsmaCca { gen });
            }
            CsmaStep::Transmit { frame } => ctx.start_tx(frame, 0),
            CsmaStep::AwaitAck { deadline, gen } => {
                ctx.timer(deadline, TimerKind::CsmaAck { gen })
            }
            CsmaStep::Done { frame, outcome } => self.on_job_done(ctx, frame, outcome),
        }
    }

    fn on_job_done(&mut self, ctx: &mut Ctx, _frame: Frame, outcome: CsmaOutcome) {
        let Some(tag) = self.current_job.take() else {
            return;
        };
        match tag {
            JobTag::Assoc => {
                if outcome == CsmaOutcome::Delivered {
                    self.resp_gen += 1;
                    ctx.timer(
                        ctx.now + self.resp_wait_symbols,
                        TimerKind::ResponseWait { gen: self.resp_gen },
                    );
                } else {
                    self.out_handshake = None;
                    ctx.rec.handshakes_aborted += 1;
                    self.after_handshake(ctx);
                }
            }
            JobTag::AssocResponse | JobTag::BeaconRequest | JobTag::CollisionNotify => {
                self.pump_mgmt(ctx);
            }
            JobTag::Claim { sf } => {
                self.out_handshake = None;
                if outcome == CsmaOutcome::Delivered && self.pending_claim == Some(sf) {
                    self.my_beacon_sf = Some(sf);
                    self.bitmap |= 1u64 << sf;
                    self.beacon_owner.insert(sf, self.id);
                    self.phase = NodePhase::Coordinator;
                    ctx.rec.became_coordinator(self.id, ctx.now);
                }
                self.pending_claim = None;
                self.after_handshake(ctx);
            }
            JobTag::GtsRequestOut => {
                if outcome == CsmaOutcome::Delivered {
                    self.resp_gen += 1;
                    ctx.timer(
                        ctx.now + self.resp_wait_symbols,
                        TimerKind::ResponseWait { gen: self.resp_gen },
                    );
                } else {
                    match self.out_handshake.take() {
                        Some(HandshakeKind::Deallocate { coords, .. }) => {
                            // Unreachable peer: release unilaterally.
                            self.act.remove(coords);
                        }
                        _ => {}
                    }
                    ctx.rec.handshakes_aborted += 1;
                    self.after_handshake(ctx);
                }
            }
            JobTag::GtsResponseOut { requester, granted } => {
                if let Some(coords) = granted {
                    if outcome == CsmaOutcome::Delivered {
                        self.notify_gen += 1;
                        self.await_notify.push(AwaitNotify {
                            requester,
                            coords,
                            gen: self.notify_gen,
                        });
                        ctx.timer(
                            ctx.now + self.resp_wait_symbols,
                            TimerKind::NotifyWait {
                                gen: self.notify_gen,
                            },
                        );
                    } else {
                        self.act.remove(coords);
                    }
                }
                self.pump_mgmt(ctx);
            }
            JobTag::GtsNotifyOut => {
                match self.out_handshake.take() {
                    Some(HandshakeKind::Allocate { .. } | HandshakeKind::Deallocate { .. }) => {
                        if outcome == CsmaOutcome::Delivered {
                            ctx.rec.handshakes_completed += 1;
                        } else {
                            ctx.rec.handshakes_aborted += 1;
                        }
                    }
                    _ => {}
                }
                self.after_handshake(ctx);
            }
        }
    }

    // ------------------------------------------------------------------
    // Guaranteed-slot data path
    // ------------------------------------------------------------------

    fn gts_try_send(&mut self, ctx: &mut Ctx) {
        let Some(window) = self.current_tx_gts else {
            return;
        };
        if self.gts_inflight.is_some() {
            return;
        }
        let Some(head) = self
            .links
            .get(&window.peer)
            .and_then(|link| link.queue.front())
            .copied()
        else {
            return;
        };
        let frame = Frame {
            src: self.id,
            dst: window.peer,
            seq: self.next_seq(),
            ack_request: true,
            context: TxContext::Gts,
            channel: window.channel,
            payload: MacPayload::Data {
                packet: head,
                position: self.cfg.position,
            },
        };
        // The frame plus turnaround and the full acknowledgment wait must
        // fit before the slot boundary.
        if ctx.now + frame.airtime() + TURNAROUND_TIME + ACK_WAIT_DURATION > window.slot_end {
            return;
        }
        self.gts_gen += 1;
        self.gts_inflight = Some(GtsInFlight {
            peer: window.peer,
            seq: frame.seq,
            gen: self.gts_gen,
        });
        ctx.rec.data_frames += 1;
        // The ack timeout is armed when the transmission actually ends
        // (see `on_tx_done`), so a send delayed behind an outgoing ack
        // cannot time out early.
        ctx.start_tx(frame, 0);
    }

    fn gts_ack_success(&mut self, ctx: &mut Ctx) {
        let Some(inflight) = self.gts_inflight.take() else {
            return;
        };
        self.gts_gen += 1;
        if let Some(link) = self.links.get_mut(&inflight.peer) {
            link.queue.pop_front();
        }
        if let Some(window) = self.current_tx_gts {
            self.act
                .mark_used(window.coords.superframe, window.coords.slot);
        }
        // One data frame per guaranteed slot: the remainder of the slot
        // stays idle even if further packets are queued.
    }

    fn gts_ack_timeout(&mut self, ctx: &mut Ctx, gen: u32) {
        let Some(inflight) = self.gts_inflight else {
            return;
        };
        if inflight.gen != gen {
            return;
        }
        self.gts_inflight = None;
        let max_retries = self.cfg.params.max_retries;
        if let Some(link) = self.links.get_mut(&inflight.peer) {
            if let Some(head) = link.queue.front_mut() {
                head.hop_retries += 1;
                if head.hop_retries >= max_retries {
                    let packet = link.queue.pop_front().unwrap();
                    ctx.rec.packet_dropped(&packet, DropCause::RetryLimit);
                }
            }
        }
    }

    fn handle_data(&mut self, ctx: &mut Ctx, src: NodeId, packet: Packet) {
        if self.last_rx.get(&src) == Some(&packet.key()) {
            ctx.rec.duplicate_rx += 1;
            return;
        }
        self.last_rx.insert(src, packet.key());
        if let Some((sf, slot)) = self.current_rx_gts {
            self.act.mark_used(sf, slot);
        }
        if packet.dest == self.id {
            ctx.rec.packet_delivered(&packet, ctx.now);
        } else {
            self.enqueue_packet(ctx, packet);
        }
    }

    pub fn on_app_packet(&mut self, ctx: &mut Ctx, packet: Packet) {
        self.enqueue_packet(ctx, packet);
    }

    fn enqueue_packet(&mut self, ctx: &mut Ctx, mut packet: Packet) {
        packet.hop_retries = 0;
        let next = match &self.cfg.next_hop {
            NextHopRule::Fixed(next) => *next,
            NextHopRule::Geographic { sink, sink_pos } => geographic_next_hop(
                self.cfg.position,
                packet.origin_pos,
                *sink,
                *sink_pos,
                self.neighbors.iter().map(|(&id, &pos)| (id, pos)),
            ),
        };
        let Some(next) = next else {
            ctx.rec.packet_dropped(&packet, DropCause::NoRoute);
            return;
        };
        let alpha = self.cfg.alpha;
        let depreciation = self.cfg.depreciation_threshold;
        let hysteresis = self.cfg.hysteresis;
        let link = self.links.entry(next).or_insert_with(|| Link {
            queue: VecDeque::new(),
            est: TrafficEstimate::new(alpha, depreciation).with_hysteresis(hysteresis),
        });
        link.est.record_enqueue();
        if link.queue.len() < self.cfg.params.queue_capacity {
            link.queue.push_back(packet);
        } else {
            ctx.rec.packet_dropped(&packet, DropCause::QueueFull);
        }
    }

    // ------------------------------------------------------------------
    // Transmission completion
    // ------------------------------------------------------------------

    pub fn on_tx_done(&mut self, ctx: &mut Ctx, frame: &Frame) {
        // The radio already fell back to listening on the frame's channel;
        // restore the current duty instead.
        ctx.set_radio(self.duty_mode);
        if frame.context == TxContext::Cap
            && self.engine.current_frame().map(|f| f.seq) == Some(frame.seq)
        {
            let step = self.engine.on_tx_done(ctx.now);
            self.apply_step(ctx, step);
        }
        if frame.context == TxContext::Gts {
            if let Some(inflight) = self.gts_inflight {
                if inflight.seq == frame.seq {
                    ctx.timer(
                        ctx.now + ACK_WAIT_DURATION,
                        TimerKind::GtsAck { gen: inflight.gen },
                    );
                }
            }
        }
    }

    fn broadcast_frame(&mut self, payload: MacPayload, context: TxContext, channel: u8) -> Frame {
        Frame {
            src: self.id,
            dst: crate::BROADCAST,
            seq: self.next_seq(),
            ack_request: false,
            context,
            channel,
            payload,
        }
    }
}
