//! Frame and payload definitions shared by both MAC stacks.

use crate::schedule::{GtsDirection, SlotAllocationBitmap, SlotCoords};
use crate::NodeId;

/// Synchronization header and PHY header octets added to every PSDU.
pub const PHY_OVERHEAD_OCTETS: u32 = 6;

/// Airtime of an acknowledgment frame in symbols.
pub const ACK_AIRTIME: u64 = airtime_symbols(5);

/// Airtime in symbols of a frame with the given PSDU size: two symbols per
/// octet at the 2.4 GHz O-QPSK PHY, including the PHY overhead.
pub const fn airtime_symbols(psdu_octets: u32) -> u64 {
    ((psdu_octets + PHY_OVERHEAD_OCTETS) * 2) as u64
}

/// Measurement phase a packet was generated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketMarker {
    /// Generated during warm-up; counted for traffic but not for delivery
    /// statistics.
    Warmup,
    /// Part of the measured batch.
    Measured,
    /// Generated after the measured batch completed.
    Cooldown,
}

/// Application packet traveling toward a destination, usually the sink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub origin: NodeId,
    /// Per-origin sequence number.
    pub seq: u32,
    pub dest: NodeId,
    pub marker: PacketMarker,
    /// Creation time in symbols.
    pub created_at: u64,
    /// Position of the origin, used by geographic routing.
    pub origin_pos: (f64, f64),
    pub payload_octets: u16,
    /// Transmission attempts spent on the current hop.
    pub hop_retries: u8,
}

/// Identity of a packet across hops.
pub type PacketKey = (NodeId, u32);

impl Packet {
    pub fn key(&self) -> PacketKey {
        (self.origin, self.seq)
    }
}

/// GTS handshake request variants.
#[derive(Debug, Clone, PartialEq)]
pub enum GtsRequestKind {
    /// Ask the peer for one new slot; carries the requester's occupancy
    /// bitmap and a preferred position.
    Allocate {
        direction: GtsDirection,
        preferred: Option<(u16, u8)>,
        sab: SlotAllocationBitmap,
    },
    /// Ask the peer to release an existing slot.
    Deallocate {
        coords: SlotCoords,
        direction: GtsDirection,
    },
    /// Tell a node that a slot it announced is already allocated here.
    DuplicateNotify { coords: SlotCoords },
}

/// Outcome carried by GTS responses and notifies. Directions are from the
/// requester's point of view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GtsReply {
    AllocateOk {
        coords: SlotCoords,
        direction: GtsDirection,
    },
    AllocateDenied,
    DeallocateOk {
        coords: SlotCoords,
        direction: GtsDirection,
    },
}

/// MAC payloads.
#[derive(Debug, Clone, PartialEq)]
pub enum MacPayload {
    /// Periodic enhanced beacon: the sender's beacon slot, its view of the
    /// occupied beacon slots, its position and whether it accepts
    /// associations.
    Beacon {
        beacon_slot: u32,
        slot_bitmap: u64,
        position: (f64, f64),
        permit: bool,
    },
    /// Active-scan probe asking nearby nodes to provide a beacon.
    BeaconRequest,
    /// Broadcast claim of a beacon slot.
    BeaconAllocNotify { slot: u32 },
    /// Report that a claimed beacon slot is already occupied.
    BeaconCollisionNotify { slot: u32 },
    AssocRequest { position: (f64, f64) },
    AssocResponse { accepted: bool },
    GtsRequest { kind: GtsRequestKind },
    /// Broadcast so that the responder's neighbors learn the slot.
    GtsResponse { requester: NodeId, reply: GtsReply },
    /// Broadcast so that the requester's neighbors learn the slot.
    GtsNotify { responder: NodeId, reply: GtsReply },
    Data {
        packet: Packet,
        position: (f64, f64),
    },
    Ack { acked: u32 },
}

impl MacPayload {
    /// PSDU size in octets; data frames use the packet's payload size.
    pub fn psdu_octets(&self) -> u32 {
        match self {
            MacPayload::Beacon { .. } => 28,
            MacPayload::BeaconRequest => 8,
            MacPayload::BeaconAllocNotify { .. } | MacPayload::BeaconCollisionNotify { .. } => 10,
            MacPayload::AssocRequest { .. } => 14,
            MacPayload::AssocResponse { .. } => 12,
            MacPayload::GtsRequest { kind } => match kind {
                GtsRequestKind::Allocate { .. } => 25,
                GtsRequestKind::Deallocate { .. } | GtsRequestKind::DuplicateNotify { .. } => 18,
            },
            MacPayload::GtsResponse { .. } | MacPayload::GtsNotify { .. } => 25,
            MacPayload::Data { packet, .. } => u32::from(packet.payload_octets),
            MacPayload::Ack { .. } => 5,
        }
    }
}

/// Scheduling context a frame is transmitted in, used to classify
/// collisions and check containment invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxContext {
    /// Contention access period (CSMA), or anytime for the baseline stack.
    Cap,
    /// Inside a guaranteed slot.
    Gts,
    /// Beacon slot.
    Beacon,
    /// Acknowledgment following a reception.
    Ack,
}

/// One over-the-air frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub src: NodeId,
    pub dst: NodeId,
    /// Per-source sequence number; acknowledgment matching and duplicate
    /// suppression key.
    pub seq: u32,
    pub ack_request: bool,
    pub context: TxContext,
    pub channel: u8,
    pub payload: MacPayload,
}

impl Frame {
    pub fn airtime(&self) -> u64 {
        airtime_symbols(self.payload.psdu_octets())
    }

    pub fn is_broadcast(&self) -> bool {
        self.dst == crate::BROADCAST
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn airtimes_match_phy_rates() {
        // Full 127-octet data PSDU: (127 + 6) * 2 = 266 symbols.
        assert_eq!(airtime_symbols(127), 266);
        // Acknowledgment: (5 + 6) * 2 = 22 symbols.
        assert_eq!(ACK_AIRTIME, 22);
        // GTS handshake frames: (25 + 6) * 2 = 62 symbols.
        assert_eq!(airtime_symbols(25), 62);
    }

    #[test]
    fn data_airtime_follows_payload() {
        let packet = Packet {
            origin: 3,
            seq: 1,
            dest: 0,
            marker: PacketMarker::Measured,
            created_at: 0,
            origin_pos: (0.0, 0.0),
            payload_octets: 127,
            hop_retries: 0,
        };
        let frame = Frame {
            src: 3,
            dst: 2,
            seq: 9,
            ack_request: true,
            context: TxContext::Gts,
            channel: 11,
            payload: MacPayload::Data {
                packet,
                position: (0.0, 0.0),
            },
        };
        assert_eq!(frame.airtime(), 266);
        assert!(!frame.is_broadcast());
    }
}
