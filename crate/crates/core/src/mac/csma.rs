//! Unslotted CSMA/CA engine shared by the DSME CAP and the baseline stack.
//!
//! The engine is a pure state machine: the owning node feeds it submit
//! calls, timer expirations, acknowledgment receptions and channel-busy
//! verdicts, and applies the returned steps (schedule a CCA decision,
//! start a transmission, arm the ack timer, report completion). Stale
//! timers are filtered with a generation counter.

use super::messages::Frame;
use crate::schedule::{cap_fit, SuperframeConfig, ACK_WAIT_DURATION, CCA_TIME, UNIT_BACKOFF_PERIOD};
use rand::Rng;

/// Where transmissions may take place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CapSchedule {
    /// Anytime: the contention-only baseline.
    Always,
    /// Only inside CAP windows of the superframe structure; backoff
    /// countdown freezes outside them.
    Windows(SuperframeConfig),
}

/// Final outcome of one submitted frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsmaOutcome {
    /// Broadcast sent, or unicast acknowledged.
    Delivered,
    /// All transmission attempts went unacknowledged.
    NoAck,
    /// Clear-channel assessment failed too many times in one attempt.
    ChannelBusy,
}

/// Instruction returned to the owning node.
#[derive(Debug, Clone, PartialEq)]
pub enum CsmaStep {
    None,
    /// Schedule a CCA decision at `decision_at`; the channel must be
    /// sampled over `[cca_start, decision_at]`.
    StartCca {
        cca_start: u64,
        decision_at: u64,
        gen: u32,
    },
    /// Channel clear: transmit the frame now.
    Transmit { frame: Frame },
    /// Unicast on the air; listen for the acknowledgment until `deadline`.
    AwaitAck { deadline: u64, gen: u32 },
    /// The submitted frame is finished.
    Done { frame: Frame, outcome: CsmaOutcome },
}

#[derive(Debug, Clone)]
enum State {
    Idle,
    WaitCca {
        frame: Frame,
        be: u8,
        nb: u8,
        tries: u8,
    },
    Transmitting {
        frame: Frame,
        tries: u8,
    },
    WaitAck {
        frame: Frame,
        tries: u8,
    },
}

/// CSMA/CA engine for one node; processes one frame at a time.
#[derive(Debug, Clone)]
pub struct CsmaEngine {
    schedule: CapSchedule,
    min_be: u8,
    max_be: u8,
    max_backoffs: u8,
    max_retries: u8,
    state: State,
    gen: u32,
}

impl CsmaEngine {
    pub fn new(
        schedule: CapSchedule,
        min_be: u8,
        max_be: u8,
        max_backoffs: u8,
        max_retries: u8,
    ) -> Self {
        Self {
            schedule,
            min_be,
            max_be,
            max_backoffs,
            max_retries,
            state: State::Idle,
            gen: 0,
        }
    }

    /// Switch between free-running and CAP-bound operation (used when a
    /// scanning node locks onto a superframe grid).
    pub fn set_schedule(&mut self, schedule: CapSchedule) {
        self.schedule = schedule;
    }

    /// Abandon the current frame, if any, and invalidate outstanding
    /// timers. Must not be called while the frame is on the air.
    pub fn reset(&mut self) {
        self.state = State::Idle;
        self.gen = self.gen.wrapping_add(1);
    }

    pub fn is_idle(&self) -> bool {
        matches!(self.state, State::Idle)
    }

    /// Frame currently being worked on, if any.
    pub fn current_frame(&self) -> Option<&Frame> {
        match &self.state {
            State::Idle => None,
            State::WaitCca { frame, .. }
            | State::Transmitting { frame, .. }
            | State::WaitAck { frame, .. } => Some(frame),
        }
    }

    /// Whole-transaction tail that must fit in a CAP window after the CCA:
    /// the CCA itself, the frame, and for acknowledged unicasts the full
    /// ack wait.
    fn tail(frame: &Frame) -> u64 {
        let base = CCA_TIME + frame.airtime();
        if frame.ack_request {
            base + ACK_WAIT_DURATION
        } else {
            base
        }
    }

    fn schedule_cca<R: Rng>(&mut self, frame: Frame, be: u8, nb: u8, tries: u8, now: u64, rng: &mut R) -> CsmaStep {
        let units = rng.gen_range(0..(1u64 << be));
        let backoff = units * UNIT_BACKOFF_PERIOD;
        let tail = Self::tail(&frame);
        let cca_start = match &self.schedule {
            CapSchedule::Always => now + backoff,
            CapSchedule::Windows(config) => cap_fit(config, now, backoff, tail),
        };
        self.state = State::WaitCca {
            frame,
            be,
            nb,
            tries,
        };
        self.gen += 1;
        CsmaStep::StartCca {
            cca_start,
            decision_at: cca_start + CCA_TIME,
            gen: self.gen,
        }
    }

    /// Begin working on a frame; the engine must be idle.
    pub fn submit<R: Rng>(&mut self, frame: Frame, now: u64, rng: &mut R) -> CsmaStep {
        debug_assert!(self.is_idle(), "csma engine busy");
        self.schedule_cca(frame, self.min_be, 0, 0, now, rng)
    }

    /// CCA decision: `busy` is the channel verdict over the CCA window.
    pub fn on_cca_decision<R: Rng>(
        &mut self,
        gen: u32,
        busy: bool,
        now: u64,
        rng: &mut R,
    ) -> CsmaStep {
        if gen != self.gen {
            return CsmaStep::None;
        }
        let State::WaitCca {
            frame,
            be,
            nb,
            tries,
        } = std::mem::replace(&mut self.state, State::Idle)
        else {
            return CsmaStep::None;
        };
        if !busy {
            self.state = State::Transmitting {
                frame: frame.clone(),
                tries,
            };
            self.gen += 1;
            return CsmaStep::Transmit { frame };
        }
        if nb >= self.max_backoffs {
            self.gen += 1;
            return CsmaStep::Done {
                frame,
                outcome: CsmaOutcome::ChannelBusy,
            };
        }
        let be = (be + 1).min(self.max_be);
        self.schedule_cca(frame, be, nb + 1, tries, now, rng)
    }

    /// The node's transmission finished.
    pub fn on_tx_done(&mut self, now: u64) -> CsmaStep {
        let State::Transmitting { frame, tries } =
            std::mem::replace(&mut self.state, State::Idle)
        else {
            return CsmaStep::None;
        };
        if !frame.ack_request {
            self.gen += 1;
            return CsmaStep::Done {
                frame,
                outcome: CsmaOutcome::Delivered,
            };
        }
        self.state = State::WaitAck {
            frame,
            tries,
        };
        self.gen += 1;
        CsmaStep::AwaitAck {
            deadline: now + ACK_WAIT_DURATION,
            gen: self.gen,
        }
    }

    /// An acknowledgment arrived.
    pub fn on_ack(&mut self, from: crate::NodeId, acked: u32) -> CsmaStep {
        let State::WaitAck { frame, .. } = &self.state else {
            return CsmaStep::None;
        };
        if frame.dst != from || frame.seq != acked {
            return CsmaStep::None;
        }
        let State::WaitAck { frame, .. } = std::mem::replace(&mut self.state, State::Idle) else {
            unreachable!()
        };
        self.gen += 1;
        CsmaStep::Done {
            frame,
            outcome: CsmaOutcome::Delivered,
        }
    }

    /// The acknowledgment wait expired.
    pub fn on_ack_timeout<R: Rng>(&mut self, gen: u32, now: u64, rng: &mut R) -> CsmaStep {
        if gen != self.gen {
            return CsmaStep::None;
        }
        let State::WaitAck { frame, tries } = std::mem::replace(&mut self.state, State::Idle)
        else {
            return CsmaStep::None;
        };
        let tries = tries + 1;
        if tries >= self.max_retries {
            self.gen += 1;
            return CsmaStep::Done {
                frame,
                outcome: CsmaOutcome::NoAck,
            };
        }
        // Each retry restarts the backoff cascade from the initial
        // exponent.
        self.schedule_cca(frame, self.min_be, 0, tries, now, rng)
    }
}
