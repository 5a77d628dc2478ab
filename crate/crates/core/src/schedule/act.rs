//! Allocation counter table: the GTSs a node takes part in, with their
//! confirmation state and idle counters driving expiration.

use crate::NodeId;
use thiserror::Error;

/// Position of a GTS inside the multi-superframe: superframe index, GTS
/// index within that superframe's contention-free period, and channel
/// number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlotCoords {
    pub superframe: u16,
    pub slot: u8,
    pub channel: u8,
}

impl SlotCoords {
    pub fn new(superframe: u16, slot: u8, channel: u8) -> Self {
        Self {
            superframe,
            slot,
            channel,
        }
    }

    /// Same superframe and slot, regardless of channel.
    pub fn same_slot(&self, other: &SlotCoords) -> bool {
        self.superframe == other.superframe && self.slot == other.slot
    }
}

/// Transfer direction of a GTS from the owning node's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GtsDirection {
    Tx,
    Rx,
}

impl GtsDirection {
    pub fn opposite(self) -> Self {
        match self {
            GtsDirection::Tx => GtsDirection::Rx,
            GtsDirection::Rx => GtsDirection::Tx,
        }
    }
}

/// One guaranteed time slot as seen by one of its two endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GtsDescriptor {
    pub coords: SlotCoords,
    pub direction: GtsDirection,
    pub peer: NodeId,
}

/// Confirmation state of an allocation.
///
/// A responder holds `Unconfirmed` between sending its response and
/// receiving the requester's notify. `Deallocating` marks entries whose
/// removal handshake is under way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActState {
    Valid,
    Unconfirmed,
    Deallocating,
}

/// Table entry: descriptor, state, idle bookkeeping and an allocation
/// sequence number used to pick the most recently allocated slot first when
/// shrinking.
#[derive(Debug, Clone)]
pub struct ActEntry {
    pub descriptor: GtsDescriptor,
    pub state: ActState,
    pub idle_counter: u32,
    pub used_this_msf: bool,
    pub allocation_seq: u64,
}

/// Errors raised by table operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActError {
    #[error("slot (sf {superframe}, gts {slot}) already present in the table")]
    SlotTaken { superframe: u16, slot: u8 },
}

/// Allocation counter table of one node.
///
/// Invariant: at most one entry per `(superframe, slot)`, because a node
/// can only take part in one transfer per slot no matter the channel.
#[derive(Debug, Clone, Default)]
pub struct AllocationCounterTable {
    entries: Vec<ActEntry>,
    next_seq: u64,
}

impl AllocationCounterTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[ActEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert an allocation; rejects a second entry in the same
    /// `(superframe, slot)`.
    pub fn insert(&mut self, descriptor: GtsDescriptor, state: ActState) -> Result<(), ActError> {
        if self.entry_at(descriptor.coords.superframe, descriptor.coords.slot).is_some() {
            return Err(ActError::SlotTaken {
                superframe: descriptor.coords.superframe,
                slot: descriptor.coords.slot,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.entries.push(ActEntry {
            descriptor,
            state,
            idle_counter: 0,
            used_this_msf: false,
            allocation_seq: seq,
        });
        Ok(())
    }

    /// Remove the entry at these coordinates (channel must match).
    pub fn remove(&mut self, coords: SlotCoords) -> Option<ActEntry> {
        let i = self
            .entries
            .iter()
            .position(|e| e.descriptor.coords == coords)?;
        Some(self.entries.remove(i))
    }

    pub fn entry_at(&self, superframe: u16, slot: u8) -> Option<&ActEntry> {
        self.entries
            .iter()
            .find(|e| e.descriptor.coords.superframe == superframe && e.descriptor.coords.slot == slot)
    }

    pub fn entry_at_mut(&mut self, superframe: u16, slot: u8) -> Option<&mut ActEntry> {
        self.entries
            .iter_mut()
            .find(|e| e.descriptor.coords.superframe == superframe && e.descriptor.coords.slot == slot)
    }

    /// Record a successful transfer in the slot, resetting its idle streak
    /// at the next multi-superframe rollover.
    pub fn mark_used(&mut self, superframe: u16, slot: u8) {
        if let Some(e) = self.entry_at_mut(superframe, slot) {
            e.used_this_msf = true;
        }
    }

    /// Number of confirmed transmit slots toward a peer (the allocated
    /// count the scheduler compares against).
    pub fn valid_tx_count(&self, peer: NodeId) -> u32 {
        self.entries
            .iter()
            .filter(|e| {
                e.state == ActState::Valid
                    && e.descriptor.peer == peer
                    && e.descriptor.direction == GtsDirection::Tx
            })
            .count() as u32
    }

    /// Most recently allocated confirmed transmit slot toward a peer; the
    /// first candidate to give back when shrinking.
    pub fn most_recent_valid_tx(&self, peer: NodeId) -> Option<&ActEntry> {
        self.entries
            .iter()
            .filter(|e| {
                e.state == ActState::Valid
                    && e.descriptor.peer == peer
                    && e.descriptor.direction == GtsDirection::Tx
            })
            .max_by_key(|e| e.allocation_seq)
    }

    /// Advance idle counters at a multi-superframe rollover and return the
    /// descriptors whose idle streak reached the expiration threshold.
    ///
    /// Both endpoints run this: the transmit side counts missed
    /// acknowledgments in a row, the receive side counts empty occurrences,
    /// and either kind of idle multi-superframe increments the counter.
    pub fn msf_rollover(&mut self, threshold: u32) -> Vec<GtsDescriptor> {
        let mut expired = Vec::new();
        for e in &mut self.entries {
            if e.state != ActState::Valid {
                e.used_this_msf = false;
                continue;
            }
            if e.used_this_msf {
                e.idle_counter = 0;
            } else {
                e.idle_counter += 1;
            }
            e.used_this_msf = false;
            if e.idle_counter >= threshold {
                expired.push(e.descriptor);
            }
        }
        expired
    }

    pub fn set_state(&mut self, coords: SlotCoords, state: ActState) -> bool {
        match self.entries.iter_mut().find(|e| e.descriptor.coords == coords) {
            Some(e) => {
                e.state = state;
                true
            }
            None => false,
        }
    }
}
