//! Contention-only reference stack.
//!
//! Every node shares one channel and sends everything — data and
//! forwarded traffic alike — through slotted CSMA/CA with acknowledgments
//! and retries. There are no beacons, no superframe structure and no
//! guaranteed slots; routes are fixed next-hop pointers. This is the
//! comparison stack the beacon-synchronized MAC is measured against.

use super::csma::{CapSchedule, CsmaEngine, CsmaOutcome, CsmaStep};
use super::messages::{Frame, MacPayload, Packet, PacketKey, TxContext};
use crate::schedule::{MacTimingParams, TURNAROUND_TIME};
use crate::sim::metrics::DropCause;
use crate::sim::radio::RadioMode;
use crate::sim::topology::Pos;
use crate::sim::{Ctx, TimerKind};
use crate::NodeId;
use std::collections::{BTreeMap, VecDeque};

/// Static configuration of one contention-only node.
#[derive(Debug, Clone)]
pub struct CsmaConfig {
    pub params: MacTimingParams,
    pub channel: u8,
    pub position: Pos,
    /// Fixed next hop toward the sink; `None` on the sink itself.
    pub next_hop: Option<NodeId>,
}

/// CSMA/CA-only MAC state machine of one node.
#[derive(Debug)]
pub struct CsmaNode {
    id: NodeId,
    cfg: CsmaConfig,
    engine: CsmaEngine,
    queue: VecDeque<Packet>,
    /// Last packet accepted from each upstream sender, to swallow MAC-level
    /// retransmissions whose acknowledgment was lost.
    last_rx: BTreeMap<NodeId, PacketKey>,
    cca_from: u64,
    seq: u32,
}

impl CsmaNode {
    pub fn new(id: NodeId, cfg: CsmaConfig) -> Self {
        let engine = CsmaEngine::new(
            CapSchedule::Always,
            cfg.params.min_be,
            cfg.params.max_be,
            cfg.params.max_backoffs,
            cfg.params.max_retries,
        );
        Self {
            id,
            cfg,
            engine,
            queue: VecDeque::new(),
            last_rx: BTreeMap::new(),
            cca_from: 0,
            seq: 0,
        }
    }

    pub fn queued(&self) -> u64 {
        self.queue.len() as u64
    }

    fn next_seq(&mut self) -> u32 {
        self.seq += 1;
        self.seq
    }

    pub fn start(&mut self, ctx: &mut Ctx) {
        ctx.set_radio(RadioMode::Rx(self.cfg.channel));
    }

    pub fn on_timer(&mut self, ctx: &mut Ctx, kind: TimerKind) {
        match kind {
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
            _ => {}
        }
    }

    pub fn on_frame(&mut self, ctx: &mut Ctx, frame: &Frame, _frame_start: u64) {
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
        match &frame.payload {
            MacPayload::Ack { acked } => {
                if frame.dst == self.id {
                    let step = self.engine.on_ack(frame.src, *acked);
                    self.apply_step(ctx, step);
                }
            }
            MacPayload::Data { packet, .. } => {
                if frame.dst != self.id {
                    return;
                }
                if self.last_rx.get(&frame.src) == Some(&packet.key()) {
                    ctx.rec.duplicate_rx += 1;
                    return;
                }
                self.last_rx.insert(frame.src, packet.key());
                if packet.dest == self.id {
                    ctx.rec.packet_delivered(packet, ctx.now);
                } else {
                    self.enqueue_packet(ctx, *packet);
                }
            }
            _ => {}
        }
    }

    pub fn on_tx_done(&mut self, ctx: &mut Ctx, frame: &Frame) {
        ctx.set_radio(RadioMode::Rx(self.cfg.channel));
        if frame.context == TxContext::Cap
            && self.engine.current_frame().map(|f| f.seq) == Some(frame.seq)
        {
            let step = self.engine.on_tx_done(ctx.now);
            self.apply_step(ctx, step);
        }
    }

    pub fn on_app_packet(&mut self, ctx: &mut Ctx, packet: Packet) {
        self.enqueue_packet(ctx, packet);
    }

    fn enqueue_packet(&mut self, ctx: &mut Ctx, packet: Packet) {
        if self.cfg.next_hop.is_none() {
            ctx.rec.packet_dropped(&packet, DropCause::NoRoute);
            return;
        }
        if self.queue.len() < self.cfg.params.queue_capacity {
            self.queue.push_back(packet);
            self.pump(ctx);
        } else {
            ctx.rec.packet_dropped(&packet, DropCause::QueueFull);
        }
    }

    fn pump(&mut self, ctx: &mut Ctx) {
        if !self.engine.is_idle() {
            return;
        }
        let (Some(next), Some(head)) = (self.cfg.next_hop, self.queue.front().copied()) else {
            return;
        };
        let frame = Frame {
            src: self.id,
            dst: next,
            seq: self.next_seq(),
            ack_request: true,
            context: TxContext::Cap,
            channel: self.cfg.channel,
            payload: MacPayload::Data {
                packet: head,
                position: self.cfg.position,
            },
        };
        ctx.rec.data_frames += 1;
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
            CsmaStep::Done { outcome, .. } => {
                let packet = self.queue.pop_front();
                match (outcome, packet) {
                    (CsmaOutcome::Delivered, _) => {}
                    (CsmaOutcome::NoAck, Some(p)) => {
                        ctx.rec.packet_dropped(&p, DropCause::RetryLimit)
                    }
                    (CsmaOutcome::ChannelBusy, Some(p)) => {
                        ctx.rec.packet_dropped(&p, DropCause::ChannelAccess)
                    }
                    (_, None) => {}
                }
                self.pump(ctx);
            }
        }
    }
}
