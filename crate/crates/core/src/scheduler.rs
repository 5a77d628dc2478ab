//! Per-link traffic estimation and the slot-count decision rule.
//!
//! Each outgoing link smooths the number of packets queued per
//! multi-superframe with an exponentially weighted moving average and maps
//! the smoothed rate to a target slot count. Hysteresis keeps the target
//! sticky inside a tolerance band so that short-lived fluctuations do not
//! trigger handshakes, and an idle-depreciation counter releases all slots
//! of links that stopped carrying traffic.

use num_traits::{Float, FromPrimitive};

/// Scalar constraint for the estimator math.
pub trait Real: Float + FromPrimitive {}
impl<T: Float + FromPrimitive> Real for T {}

/// Slot-count change requested for one link after reconciliation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotIntent {
    /// Allocate one additional transmit slot toward the peer.
    Allocate,
    /// Deallocate the most recently allocated transmit slot.
    Deallocate,
}

/// Traffic estimator state for one outgoing link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficEstimate<F: Real> {
    /// Smoothed packets per multi-superframe; starts at zero.
    rate: F,
    /// Smoothing factor in `(0, 1]`.
    alpha: F,
    /// Packets pushed to the link's queue in the current multi-superframe,
    /// counting attempts rejected by a full queue.
    msf_packet_count: u32,
    /// Multi-superframes in a row with no packets pushed.
    idle_msf_count: u32,
    /// Idle streak after which the slot target drops to zero.
    depreciation_threshold: u32,
    /// When off, the target follows the rounded-up rate directly.
    hysteresis: bool,
    /// Target slot count from the latest decision.
    required: u32,
}

impl<F: Real> TrafficEstimate<F> {
    pub fn new(alpha: F, depreciation_threshold: u32) -> Self {
        assert!(
            alpha > F::zero() && alpha <= F::one(),
            "alpha must be in (0, 1]"
        );
        Self {
            rate: F::zero(),
            alpha,
            msf_packet_count: 0,
            idle_msf_count: 0,
            depreciation_threshold,
            hysteresis: true,
            required: 0,
        }
    }

    pub fn with_hysteresis(mut self, enabled: bool) -> Self {
        self.hysteresis = enabled;
        self
    }

    pub fn rate(&self) -> F {
        self.rate
    }

    pub fn required(&self) -> u32 {
        self.required
    }

    pub fn idle_msf_count(&self) -> u32 {
        self.idle_msf_count
    }

    pub fn msf_packet_count(&self) -> u32 {
        self.msf_packet_count
    }

    /// Count one packet pushed toward the link in the current
    /// multi-superframe. Called for every enqueue attempt, including those
    /// dropped because the queue was full.
    pub fn record_enqueue(&mut self) {
        self.msf_packet_count += 1;
    }

    /// Fold one multi-superframe's packet count into the smoothed rate and
    /// advance the idle streak.
    pub fn update_estimate(&mut self, packets: u32) {
        let p = F::from_u32(packets).unwrap();
        self.rate = self.alpha * p + (F::one() - self.alpha) * self.rate;
        if packets == 0 {
            self.idle_msf_count = self.idle_msf_count.saturating_add(1);
        } else {
            self.idle_msf_count = 0;
        }
    }

    /// Close the current multi-superframe: consume the packet counter and
    /// update the estimate.
    pub fn end_of_msf(&mut self) {
        let packets = self.msf_packet_count;
        self.msf_packet_count = 0;
        self.update_estimate(packets);
    }

    /// Decide the target slot count given the currently allocated count.
    ///
    /// With hysteresis, the target only moves when the allocation leaves
    /// the band `[ceil(rate) - 0, ceil(rate) + 2)` around the demand: it
    /// grows to `ceil(rate)` when the rate exceeds the allocation and
    /// shrinks to `ceil(rate) + 1` when the allocation exceeds the rate by
    /// more than two. After `depreciation_threshold` idle multi-superframes
    /// the target is forced to zero until traffic resumes.
    pub fn required_slots(&mut self, allocated: u32) -> u32 {
        if self.depreciation_threshold > 0 && self.idle_msf_count >= self.depreciation_threshold {
            self.required = 0;
            return 0;
        }
        let ceil_rate = {
            let c = self.rate.ceil();
            // Guard against degenerate negative rates; they cannot occur
            // with non-negative inputs.
            if c <= F::zero() {
                0u32
            } else {
                c.to_u32().unwrap_or(u32::MAX)
            }
        };
        if !self.hysteresis {
            self.required = ceil_rate;
            return self.required;
        }
        let alloc = F::from_u32(allocated).unwrap();
        let slack = self.rate - alloc;
        self.required = if slack > F::zero() {
            ceil_rate
        } else if slack < F::from_i32(-2).unwrap() {
            ceil_rate + 1
        } else {
            allocated
        };
        self.required
    }
}

/// Map the gap between target and allocated slot counts to at most one
/// handshake intent. Nothing is requested while a handshake for the link is
/// already in flight; slot counts change one handshake at a time.
pub fn reconcile(required: u32, allocated: u32, handshake_in_flight: bool) -> Option<SlotIntent> {
    if handshake_in_flight {
        return None;
    }
    if required > allocated {
        Some(SlotIntent::Allocate)
    } else if required < allocated {
        Some(SlotIntent::Deallocate)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rate_follows_ewma_recurrence() {
        let mut est = TrafficEstimate::<f64>::new(0.05, 50);
        assert_eq!(est.rate(), 0.0);
        est.update_estimate(5);
        assert_relative_eq!(est.rate(), 0.25);
        est.update_estimate(5);
        assert_relative_eq!(est.rate(), 0.05 * 5.0 + 0.95 * 0.25);
        // Closed form after n constant inputs: mu * (1 - (1-alpha)^n).
        let mut est = TrafficEstimate::<f64>::new(0.05, 50);
        for _ in 0..40 {
            est.update_estimate(5);
        }
        assert_relative_eq!(est.rate(), 5.0 * (1.0 - 0.95f64.powi(40)), epsilon = 1e-12);
    }

    #[test]
    fn enqueue_counter_feeds_rollover() {
        let mut est = TrafficEstimate::<f64>::new(0.5, 50);
        est.record_enqueue();
        est.record_enqueue();
        est.record_enqueue();
        assert_eq!(est.msf_packet_count(), 3);
        est.end_of_msf();
        assert_eq!(est.msf_packet_count(), 0);
        assert_relative_eq!(est.rate(), 1.5);
        est.end_of_msf();
        assert_relative_eq!(est.rate(), 0.75);
        assert_eq!(est.idle_msf_count(), 1);
    }

    #[test]
    fn hysteresis_band() {
        let mut est = TrafficEstimate::<f64>::new(0.05, 50);
        // Rate above the allocation: grow to ceil(rate).
        est.rate = 2.3;
        assert_eq!(est.required_slots(2), 3);
        // Allocation within (rate, rate + 2]: keep it.
        assert_eq!(est.required_slots(3), 3);
        assert_eq!(est.required_slots(4), 4);
        // Allocation more than two above the rate: shrink to
        // ceil(rate) + 1.
        assert_eq!(est.required_slots(5), 4);
        assert_eq!(est.required_slots(6), 4);
        // Exactly two above the rate at an integer rate: still kept.
        est.rate = 3.0;
        assert_eq!(est.required_slots(5), 5);
        assert_eq!(est.required_slots(6), 4);
    }

    #[test]
    fn hysteresis_off_tracks_ceil_directly() {
        let mut est = TrafficEstimate::<f64>::new(0.05, 50).with_hysteresis(false);
        est.rate = 2.3;
        assert_eq!(est.required_slots(2), 3);
        assert_eq!(est.required_slots(3), 3);
        assert_eq!(est.required_slots(6), 3);
        est.rate = 0.0;
        assert_eq!(est.required_slots(1), 0);
    }

    #[test]
    fn depreciation_forces_zero_and_recovers() {
        let mut est = TrafficEstimate::<f64>::new(0.5, 3);
        est.update_estimate(4);
        assert!(est.rate() > 0.0);
        assert_eq!(est.required_slots(0), 2);
        // Three idle multi-superframes force the target to zero even
        // though the smoothed rate is still positive.
        est.update_estimate(0);
        est.update_estimate(0);
        assert_eq!(est.required_slots(2), 2);
        est.update_estimate(0);
        assert_eq!(est.idle_msf_count(), 3);
        assert!(est.rate() > 0.0);
        assert_eq!(est.required_slots(2), 0);
        // Traffic resumes: normal operation.
        est.update_estimate(4);
        assert_eq!(est.idle_msf_count(), 0);
        assert!(est.required_slots(0) >= 1);
    }

    #[test]
    fn reconcile_produces_single_intents() {
        assert_eq!(reconcile(3, 2, false), Some(SlotIntent::Allocate));
        assert_eq!(reconcile(1, 2, false), Some(SlotIntent::Deallocate));
        assert_eq!(reconcile(2, 2, false), None);
        assert_eq!(reconcile(5, 0, true), None);
    }

    #[test]
    fn settling_to_constant_demand_stops_requesting() {
        // Feed a constant five packets per multi-superframe and play the
        // full loop: once the allocation reaches ceil(mu), no further
        // intents appear.
        let mut est = TrafficEstimate::<f64>::new(0.05, 50);
        let mut allocated = 0u32;
        let mut intents = 0u32;
        let mut last_intent_round = 0;
        for round in 1..=400 {
            est.update_estimate(5);
            let req = est.required_slots(allocated);
            if let Some(intent) = reconcile(req, allocated, false) {
                intents += 1;
                last_intent_round = round;
                match intent {
                    SlotIntent::Allocate => allocated += 1,
                    SlotIntent::Deallocate => allocated -= 1,
                }
            }
        }
        assert_eq!(allocated, 5);
        assert_eq!(intents, 5);
        assert!(last_intent_round < 60, "allocations settle early");
    }
}
