//! Application traffic generation.

use super::topology::Pos;
use crate::mac::{Packet, PacketMarker};
use crate::schedule::SYMBOLS_PER_SECOND;
use crate::NodeId;
use rand::Rng;
use rand_distr::{Distribution, Exp};

/// Packet arrival process of one origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrafficPattern {
    /// Exponential inter-arrival times with the given mean rate.
    Poisson { rate_hz: f64 },
    /// Strictly periodic arrivals.
    Periodic { rate_hz: f64 },
}

impl TrafficPattern {
    pub fn rate_hz(&self) -> f64 {
        match *self {
            TrafficPattern::Poisson { rate_hz } | TrafficPattern::Periodic { rate_hz } => rate_hz,
        }
    }
}

/// One origin node's generator. Packets created before the setup boundary
/// are warm-up; the next `quota` packets are the measured batch; after
/// that the source stops.
#[derive(Debug)]
pub struct TrafficSource {
    pub node: NodeId,
    pub dest: NodeId,
    pattern: TrafficPattern,
    payload_octets: u16,
    origin_pos: Pos,
    t_setup: u64,
    quota: u32,
    sent_measured: u32,
    seq: u32,
    pub done: bool,
}

impl TrafficSource {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        node: NodeId,
        dest: NodeId,
        pattern: TrafficPattern,
        payload_octets: u16,
        origin_pos: Pos,
        t_setup: u64,
        quota: u32,
    ) -> Self {
        Self {
            node,
            dest,
            pattern,
            payload_octets,
            origin_pos,
            t_setup,
            quota,
            sent_measured: 0,
            seq: 0,
            done: quota == 0,
        }
    }

    fn interval_symbols<R: Rng>(&self, rng: &mut R) -> u64 {
        let rate = self.pattern.rate_hz();
        let seconds = match self.pattern {
            TrafficPattern::Poisson { .. } => Exp::new(rate).unwrap().sample(rng),
            TrafficPattern::Periodic { .. } => 1.0 / rate,
        };
        (seconds * SYMBOLS_PER_SECOND as f64).round().max(1.0) as u64
    }

    /// Time of the first arrival. Periodic sources share a common phase,
    /// so every source fires in the same instants; that simultaneity is
    /// the worst case for contention access and exactly what guaranteed
    /// slots serialize.
    pub fn first_arrival<R: Rng>(&self, rng: &mut R) -> u64 {
        self.interval_symbols(rng)
    }

    /// Emit the packet due now; returns it and the time of the next
    /// arrival unless the measured quota is complete.
    pub fn fire<R: Rng>(&mut self, now: u64, rng: &mut R) -> (Packet, Option<u64>) {
        debug_assert!(!self.done);
        let marker = if now < self.t_setup {
            PacketMarker::Warmup
        } else {
            self.sent_measured += 1;
            PacketMarker::Measured
        };
        self.seq += 1;
        let packet = Packet {
            origin: self.node,
            seq: self.seq,
            dest: self.dest,
            marker,
            created_at: now,
            origin_pos: self.origin_pos,
            payload_octets: self.payload_octets,
            hop_retries: 0,
        };
        if self.sent_measured >= self.quota {
            self.done = true;
            (packet, None)
        } else {
            (packet, Some(now + self.interval_symbols(rng)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn periodic_interval_is_exact() {
        let src = TrafficSource::new(
            3,
            0,
            TrafficPattern::Periodic { rate_hz: 2.0 },
            127,
            (0.0, 0.0),
            0,
            10,
        );
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert_eq!(src.interval_symbols(&mut rng), 31_250);
    }

    #[test]
    fn poisson_mean_matches_rate() {
        let src = TrafficSource::new(
            1,
            0,
            TrafficPattern::Poisson { rate_hz: 4.0 },
            127,
            (0.0, 0.0),
            0,
            10,
        );
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let n = 20_000;
        let total: u64 = (0..n).map(|_| src.interval_symbols(&mut rng)).sum();
        let mean_s = total as f64 / n as f64 / SYMBOLS_PER_SECOND as f64;
        assert!((mean_s - 0.25).abs() < 0.01, "mean interval {mean_s}");
    }

    #[test]
    fn markers_and_quota() {
        let t_setup = 10 * SYMBOLS_PER_SECOND;
        let mut src = TrafficSource::new(
            1,
            0,
            TrafficPattern::Periodic { rate_hz: 1.0 },
            127,
            (5.0, 0.0),
            t_setup,
            2,
        );
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let (p, next) = src.fire(SYMBOLS_PER_SECOND, &mut rng);
        assert_eq!(p.marker, PacketMarker::Warmup);
        assert_eq!(p.seq, 1);
        assert!(next.is_some());
        let (p, next) = src.fire(t_setup + 1, &mut rng);
        assert_eq!(p.marker, PacketMarker::Measured);
        assert!(next.is_some());
        assert!(!src.done);
        let (p, next) = src.fire(t_setup + 100_000, &mut rng);
        assert_eq!(p.marker, PacketMarker::Measured);
        assert_eq!(p.seq, 3);
        assert!(next.is_none());
        assert!(src.done);
    }
}
