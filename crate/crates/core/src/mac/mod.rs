//! MAC protocol state machines.
//!
//! Two stacks share the radio abstraction of [`crate::sim`]:
//!
//! * [`DsmeNode`] — beacon-synchronized DSME: scanning and association,
//!   decentralized coordinator election with beacon-slot claiming, the
//!   three-message GTS handshake driven by the per-link traffic scheduler,
//!   contention access in the CAP and contention-free data transfer in
//!   guaranteed slots.
//! * [`CsmaNode`] — plain unslotted CSMA/CA with static neighbor tables, as
//!   a contention-only baseline.

mod baseline;
mod csma;
mod dsme;
mod messages;

pub use baseline::{CsmaConfig, CsmaNode};
pub use csma::{CapSchedule, CsmaEngine, CsmaOutcome, CsmaStep};
pub use dsme::{DsmeConfig, DsmeNode, NodePhase};
pub use messages::{
    Frame, GtsReply, GtsRequestKind, MacPayload, Packet, PacketKey, PacketMarker, TxContext,
    ACK_AIRTIME, PHY_OVERHEAD_OCTETS,
};
