//! Shared radio medium.
//!
//! Tracks every node's transceiver mode, the transmissions currently on
//! the air, and a short history of finished ones. Delivery is evaluated
//! when a transmission ends: a frame reaches every other node that is
//! within communication range of the sender and stayed tuned to the
//! channel for the whole airtime; it is corrupted if any other overlapping
//! transmission on the same channel is within interference range of the
//! receiver. Carrier sensing asks whether any transmission audible at the
//! sensing node overlapped the CCA window.

use super::topology::{dist, Pos};
use crate::mac::{Frame, TxContext};
use crate::NodeId;

/// Transceiver state of one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadioMode {
    Off,
    /// Listening on a channel.
    Rx(u8),
    /// Transmitting on a channel.
    Tx(u8),
}

/// One frame on the air (or recently on the air).
#[derive(Debug, Clone)]
pub struct Transmission {
    pub src: NodeId,
    pub src_pos: Pos,
    pub channel: u8,
    pub start: u64,
    pub end: u64,
    pub frame: Frame,
}

/// Delivery verdict for one receiver of a finished transmission.
#[derive(Debug, Clone, Copy)]
pub struct Delivery {
    pub to: NodeId,
    pub corrupted: bool,
    /// Context and source of the first overlapping transmission that
    /// corrupted the frame, for collision accounting and diagnostics.
    pub clobbered_by: Option<TxContext>,
    pub clobbered_src: Option<NodeId>,
}

/// How long finished transmissions are kept for carrier-sense lookback and
/// overlap checks against still-active frames, in symbols.
const HISTORY_SYMBOLS: u64 = 2_000;

/// Default ratio of the interference radius to the communication radius:
/// a transmission can garble receptions well beyond the distance at which
/// it can still be decoded.
pub const DEFAULT_INTERFERENCE_FACTOR: f64 = 2.0;

#[derive(Debug)]
pub struct RadioField {
    positions: Vec<Pos>,
    comm_range: f64,
    interference_range: f64,
    modes: Vec<RadioMode>,
    mode_since: Vec<u64>,
    on_symbols: Vec<u64>,
    active: Vec<Option<Transmission>>,
    recent: Vec<Transmission>,
}

impl RadioField {
    pub fn new(positions: Vec<Pos>, comm_range: f64, interference_range: f64) -> Self {
        assert!(comm_range > 0.0 && interference_range >= comm_range);
        let n = positions.len();
        Self {
            positions,
            comm_range,
            interference_range,
            modes: vec![RadioMode::Off; n],
            mode_since: vec![0; n],
            on_symbols: vec![0; n],
            active: vec![None; n],
            recent: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, node: NodeId) -> Pos {
        self.positions[usize::from(node)]
    }

    pub fn comm_range(&self) -> f64 {
        self.comm_range
    }

    pub fn mode(&self, node: NodeId) -> RadioMode {
        self.modes[usize::from(node)]
    }

    pub fn in_comm_range(&self, a: NodeId, b: NodeId) -> bool {
        dist(self.position(a), self.position(b)) <= self.comm_range
    }

    pub fn set_mode(&mut self, node: NodeId, mode: RadioMode, now: u64) {
        let i = usize::from(node);
        if self.modes[i] == mode {
            return;
        }
        if self.modes[i] != RadioMode::Off {
            self.on_symbols[i] += now - self.mode_since[i];
        }
        self.modes[i] = mode;
        self.mode_since[i] = now;
    }

    /// Radio-on time per node in symbols, flushed up to `now`.
    pub fn energy(&self, now: u64) -> Vec<u64> {
        (0..self.positions.len())
            .map(|i| {
                let mut on = self.on_symbols[i];
                if self.modes[i] != RadioMode::Off {
                    on += now - self.mode_since[i];
                }
                on
            })
            .collect()
    }

    /// End time of the node's in-flight transmission, if any.
    pub fn tx_end_time(&self, node: NodeId) -> Option<u64> {
        self.active[usize::from(node)].as_ref().map(|t| t.end)
    }

    /// Switch the node to transmit and put the frame on the air; returns
    /// the end-of-transmission time.
    pub fn begin_tx(&mut self, node: NodeId, frame: Frame, now: u64) -> u64 {
        let i = usize::from(node);
        debug_assert!(self.active[i].is_none(), "node {node} already transmitting");
        let end = now + frame.airtime();
        self.set_mode(node, RadioMode::Tx(frame.channel), now);
        self.active[i] = Some(Transmission {
            src: node,
            src_pos: self.positions[i],
            channel: frame.channel,
            start: now,
            end,
            frame,
        });
        end
    }

    /// Take the node's transmission off the air and evaluate deliveries.
    /// The sender's radio falls back to listening on the same channel.
    pub fn end_tx(&mut self, node: NodeId, now: u64) -> (Transmission, Vec<Delivery>) {
        let i = usize::from(node);
        let tx = self.active[i].take().expect("no active transmission");
        debug_assert_eq!(tx.end, now);
        self.set_mode(node, RadioMode::Rx(tx.channel), now);

        let mut deliveries = Vec::new();
        for (j, &mode) in self.modes.iter().enumerate() {
            if j == i {
                continue;
            }
            let RadioMode::Rx(ch) = mode else { continue };
            if ch != tx.channel || self.mode_since[j] > tx.start {
                continue;
            }
            let rx_pos = self.positions[j];
            if dist(tx.src_pos, rx_pos) > self.comm_range {
                continue;
            }
            let clobber = self.overlapping_tx(&tx, rx_pos);
            deliveries.push(Delivery {
                to: j as NodeId,
                corrupted: clobber.is_some(),
                clobbered_by: clobber.map(|(_, c)| c),
                clobbered_src: clobber.map(|(s, _)| s),
            });
        }

        self.recent.push(tx.clone());
        self.recent
            .retain(|t| t.end + HISTORY_SYMBOLS > now);
        (tx, deliveries)
    }

    /// First other transmission overlapping `tx` on the same channel that
    /// is audible at `rx_pos`.
    fn overlapping_tx(&self, tx: &Transmission, rx_pos: Pos) -> Option<(NodeId, TxContext)> {
        let audible = |t: &Transmission| {
            t.src != tx.src
                && t.channel == tx.channel
                && t.start < tx.end
                && t.end > tx.start
                && dist(t.src_pos, rx_pos) <= self.interference_range
        };
        self.active
            .iter()
            .flatten()
            .chain(self.recent.iter())
            .find(|t| audible(t))
            .map(|t| (t.src, t.frame.context))
    }

    /// Carrier sense: was any transmission audible at the node (its source
    /// within communication range) on the channel at some instant of
    /// `[from, now]`? Includes the node's own transmissions.
    pub fn cca_busy(&self, node: NodeId, channel: u8, from: u64, now: u64) -> bool {
        let pos = self.positions[usize::from(node)];
        self.active
            .iter()
            .flatten()
            .chain(self.recent.iter())
            .any(|t| {
                t.channel == channel
                    && t.start <= now
                    && t.end >= from
                    && dist(t.src_pos, pos) <= self.comm_range
            })
    }
}
