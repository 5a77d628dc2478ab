//! IEEE 802.15.4 DSME MAC layer with traffic-aware slot scheduling and a
//! deterministic discrete-event simulator.
//!
//! The crate is organized in layers that can be used independently:
//!
//! * [`schedule`] — superframe timing arithmetic, the slot allocation bitmap
//!   (SAB) and the allocation counter table (ACT) that track guaranteed time
//!   slots (GTS).
//! * [`scheduler`] — per-link traffic estimation with an exponentially
//!   weighted moving average and the slot-count decision rule with
//!   hysteresis and idle depreciation.
//! * [`analysis`] — numeric lower/upper bounds on the probability that the
//!   smoothed traffic estimate stays inside a unit band around its mean,
//!   plus the settling time of the filter.
//! * [`mac`] — protocol state machines: network formation, the three-message
//!   GTS handshake, CSMA/CA in the contention access period, and a plain
//!   CSMA/CA stack used as a baseline.
//! * [`sim`] — event engine, radio propagation model, topologies, routing,
//!   traffic generation, metrics and event logging.
//!
//! All protocol timing is expressed in integer symbol counts; one symbol
//! lasts 16 µs at the 2.4 GHz O-QPSK PHY. Conversion to seconds happens only
//! at reporting boundaries. The analysis and estimator code is generic over
//! the scalar type via `num-traits`; the aliases below fix `f64` for common
//! use.

pub mod analysis;
pub mod mac;
pub mod schedule;
pub mod scheduler;
pub mod sim;
pub mod stats;

/// Node address inside one simulated network.
pub type NodeId = u16;

/// Destination address accepted by every receiver in range.
pub const BROADCAST: NodeId = NodeId::MAX;

/// Truncated packet-count distribution over `f64`.
pub type Pmf64 = analysis::TruncatedPmf<f64>;

/// Probability bounds result over `f64`.
pub type Bounds64 = analysis::IntervalBounds<f64>;

/// Per-link traffic estimator over `f64`.
pub type Estimate64 = scheduler::TrafficEstimate<f64>;
