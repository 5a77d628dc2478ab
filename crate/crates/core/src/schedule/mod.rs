//! Superframe timing arithmetic for the DSME MAC.
//!
//! The multi-superframe structure is fully determined by three orders:
//! the superframe order `SO` scales slot and superframe durations, the
//! multi-superframe order `MO` fixes how many superframes form one
//! multi-superframe, and the beacon order `BO` fixes how many superframes
//! form one beacon interval. Every superframe has 16 slots: one beacon
//! slot, eight contention access (CAP) slots and seven guaranteed time
//! slots (GTS). With CAP reduction enabled, only the first superframe of a
//! multi-superframe keeps its CAP; the other superframes turn those eight
//! slots into additional GTSs.
//!
//! All durations are integer symbol counts at the 2.4 GHz O-QPSK PHY rate
//! (62500 symbols per second, 16 µs per symbol).

mod act;
mod params;
mod sab;

pub use act::{ActEntry, ActState, AllocationCounterTable, GtsDescriptor, GtsDirection, SlotCoords};
pub use params::{MacTimingParams, ParamError};
pub use sab::{ChannelPage, SabError, SlotAllocationBitmap};

use thiserror::Error;

/// Number of slots in every superframe (`aNumSuperframeSlots`).
pub const NUM_SUPERFRAME_SLOTS: u32 = 16;

/// Slot length in symbols at superframe order 0 (`aBaseSlotDuration`).
pub const BASE_SLOT_DURATION: u64 = 60;

/// Superframe length in symbols at superframe order 0
/// (`aBaseSuperframeDuration`).
pub const BASE_SUPERFRAME_DURATION: u64 = 960;

/// One unit backoff period in symbols (`aUnitBackoffPeriod`).
pub const UNIT_BACKOFF_PERIOD: u64 = 20;

/// Duration of a clear channel assessment in symbols (`aCcaTime`).
pub const CCA_TIME: u64 = 8;

/// Maximum wait for an acknowledgment in symbols (`macAckWaitDuration`).
pub const ACK_WAIT_DURATION: u64 = 54;

/// RX/TX switching time in symbols (`aTurnaroundTime`).
pub const TURNAROUND_TIME: u64 = 12;

/// Symbol rate of the 2.4 GHz O-QPSK PHY.
pub const SYMBOLS_PER_SECOND: u64 = 62_500;

/// Symbol duration in microseconds at the 2.4 GHz O-QPSK PHY.
pub const SYMBOL_MICROS: f64 = 16.0;

/// Number of CAP slots in a superframe that has a contention access period.
pub const CAP_SLOTS: u32 = 8;

/// Number of GTSs in a superframe that has a CAP.
pub const CFP_SLOTS_WITH_CAP: u32 = 7;

/// Number of GTSs in a CAP-reduced superframe (all slots except the beacon).
pub const CFP_SLOTS_REDUCED: u32 = 15;

/// Convert a symbol count to seconds.
pub fn symbols_to_seconds(symbols: u64) -> f64 {
    symbols as f64 / SYMBOLS_PER_SECOND as f64
}

/// Convert a duration in seconds to the nearest symbol count.
pub fn seconds_to_symbols(seconds: f64) -> u64 {
    (seconds * SYMBOLS_PER_SECOND as f64).round() as u64
}

/// Errors raised when constructing a [`SuperframeConfig`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    /// The orders must satisfy `so <= mo <= bo`.
    #[error("superframe orders must satisfy so <= mo <= bo, got so={so} mo={mo} bo={bo}")]
    OrderViolation { so: u8, mo: u8, bo: u8 },
    /// An order exceeds the range accepted by the standard.
    #[error("order {name} = {value} outside supported range 0..={max}")]
    OrderRange {
        name: &'static str,
        value: u8,
        max: u8,
    },
}

/// Validated `(SO, MO, BO)` triple plus the CAP reduction flag.
///
/// The fields are private so that every instance satisfies
/// `so <= mo <= bo`; all derived durations and counts are methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuperframeConfig {
    so: u8,
    mo: u8,
    bo: u8,
    cap_reduction: bool,
}

impl SuperframeConfig {
    /// Build a configuration, validating `0 <= so <= mo <= bo` and the
    /// per-order ranges (`so <= 15`, `mo, bo <= 22`).
    pub fn new(so: u8, mo: u8, bo: u8, cap_reduction: bool) -> Result<Self, ConfigError> {
        if so > 15 {
            return Err(ConfigError::OrderRange {
                name: "so",
                value: so,
                max: 15,
            });
        }
        if mo > 22 {
            return Err(ConfigError::OrderRange {
                name: "mo",
                value: mo,
                max: 22,
            });
        }
        if bo > 22 {
            return Err(ConfigError::OrderRange {
                name: "bo",
                value: bo,
                max: 22,
            });
        }
        if !(so <= mo && mo <= bo) {
            return Err(ConfigError::OrderViolation { so, mo, bo });
        }
        Ok(Self {
            so,
            mo,
            bo,
            cap_reduction,
        })
    }

    pub fn so(&self) -> u8 {
        self.so
    }

    pub fn mo(&self) -> u8 {
        self.mo
    }

    pub fn bo(&self) -> u8 {
        self.bo
    }

    pub fn cap_reduction(&self) -> bool {
        self.cap_reduction
    }

    /// Duration of one slot: `aBaseSlotDuration * 2^SO` symbols.
    pub fn slot_duration(&self) -> u64 {
        BASE_SLOT_DURATION << self.so
    }

    /// Duration of one superframe: `aBaseSuperframeDuration * 2^SO` symbols.
    pub fn superframe_duration(&self) -> u64 {
        BASE_SUPERFRAME_DURATION << self.so
    }

    /// Number of superframes in one multi-superframe: `2^(MO-SO)`.
    pub fn superframes_per_multisuperframe(&self) -> u32 {
        1u32 << (self.mo - self.so)
    }

    /// Duration of one multi-superframe in symbols.
    pub fn multisuperframe_duration(&self) -> u64 {
        self.superframe_duration() * u64::from(self.superframes_per_multisuperframe())
    }

    /// Number of multi-superframes in one beacon interval: `2^(BO-MO)`.
    pub fn multisuperframes_per_beacon_interval(&self) -> u32 {
        1u32 << (self.bo - self.mo)
    }

    /// Number of superframes in one beacon interval: `2^(BO-SO)`.
    pub fn superframes_per_beacon_interval(&self) -> u32 {
        1u32 << (self.bo - self.so)
    }

    /// Duration of one beacon interval in symbols.
    pub fn beacon_interval_duration(&self) -> u64 {
        self.superframe_duration() * u64::from(self.superframes_per_beacon_interval())
    }

    /// Whether the superframe at this index within its multi-superframe has
    /// a contention access period.
    pub fn has_cap(&self, sf_in_msf: u32) -> bool {
        !self.cap_reduction || sf_in_msf == 0
    }

    /// Number of GTSs in the superframe at this index within its
    /// multi-superframe: 7 with a CAP, 15 when the CAP is dropped.
    pub fn cfp_slot_count(&self, sf_in_msf: u32) -> u32 {
        if self.has_cap(sf_in_msf) {
            CFP_SLOTS_WITH_CAP
        } else {
            CFP_SLOTS_REDUCED
        }
    }

    /// Slot index (0..16) of the first GTS in the superframe at this index
    /// within its multi-superframe.
    pub fn first_cfp_slot(&self, sf_in_msf: u32) -> u32 {
        if self.has_cap(sf_in_msf) {
            1 + CAP_SLOTS
        } else {
            1
        }
    }

    /// Total number of GTSs in one multi-superframe.
    ///
    /// Without CAP reduction every superframe contributes 7; with CAP
    /// reduction the first contributes 7 and the rest contribute 15.
    pub fn gts_per_multisuperframe(&self) -> u32 {
        let n = self.superframes_per_multisuperframe();
        if self.cap_reduction {
            CFP_SLOTS_WITH_CAP + CFP_SLOTS_REDUCED * (n - 1)
        } else {
            CFP_SLOTS_WITH_CAP * n
        }
    }

    /// Fraction of all slots in a multi-superframe that are GTSs.
    pub fn cfp_share(&self) -> f64 {
        let total = NUM_SUPERFRAME_SLOTS * self.superframes_per_multisuperframe();
        f64::from(self.gts_per_multisuperframe()) / f64::from(total)
    }

    /// Map a slot index (0..16) to the GTS index within its superframe, or
    /// `None` for the beacon slot and CAP slots.
    pub fn slot_to_cfp_index(&self, sf_in_msf: u32, slot: u32) -> Option<u32> {
        let first = self.first_cfp_slot(sf_in_msf);
        if slot >= first && slot < NUM_SUPERFRAME_SLOTS {
            Some(slot - first)
        } else {
            None
        }
    }

    /// Map a GTS index within a superframe back to its slot index (0..16).
    pub fn cfp_index_to_slot(&self, sf_in_msf: u32, cfp_index: u32) -> u32 {
        debug_assert!(cfp_index < self.cfp_slot_count(sf_in_msf));
        self.first_cfp_slot(sf_in_msf) + cfp_index
    }

    /// Global superframe index containing the given time (grid anchored at
    /// time zero).
    pub fn superframe_at(&self, time: u64) -> u64 {
        time / self.superframe_duration()
    }

    /// Start time of a global superframe index.
    pub fn superframe_start(&self, sf_global: u64) -> u64 {
        sf_global * self.superframe_duration()
    }

    /// Index of a global superframe within its multi-superframe.
    pub fn sf_in_msf(&self, sf_global: u64) -> u32 {
        (sf_global % u64::from(self.superframes_per_multisuperframe())) as u32
    }

    /// Beacon slot index of a global superframe within its beacon interval.
    pub fn beacon_position(&self, sf_global: u64) -> u32 {
        (sf_global % u64::from(self.superframes_per_beacon_interval())) as u32
    }

    /// Decompose a time into `(global superframe, slot, offset in slot)`.
    pub fn slot_at(&self, time: u64) -> (u64, u32, u64) {
        let sf = self.superframe_at(time);
        let in_sf = time - self.superframe_start(sf);
        let slot = (in_sf / self.slot_duration()) as u32;
        let offset = in_sf % self.slot_duration();
        (sf, slot, offset)
    }

    /// CAP window `[start, end)` of a global superframe, if it has one.
    pub fn cap_window(&self, sf_global: u64) -> Option<(u64, u64)> {
        if !self.has_cap(self.sf_in_msf(sf_global)) {
            return None;
        }
        let base = self.superframe_start(sf_global);
        let slot = self.slot_duration();
        Some((base + slot, base + u64::from(1 + CAP_SLOTS) * slot))
    }

    /// First CAP window that ends after the given time.
    pub fn next_cap_window(&self, time: u64) -> (u64, u64) {
        let mut sf = self.superframe_at(time);
        loop {
            if let Some((start, end)) = self.cap_window(sf) {
                if end > time {
                    return (start, end);
                }
            }
            sf += 1;
        }
    }

    /// Symbol window `[start, end)` of a GTS identified by global superframe
    /// and GTS index.
    pub fn cfp_slot_window(&self, sf_global: u64, cfp_index: u32) -> (u64, u64) {
        let slot = self.cfp_index_to_slot(self.sf_in_msf(sf_global), cfp_index);
        let base = self.superframe_start(sf_global) + u64::from(slot) * self.slot_duration();
        (base, base + self.slot_duration())
    }

    /// Longest interval between transmissions in a GTS that still keeps its
    /// idle counter below the expiration threshold, in symbols.
    ///
    /// Each GTS recurs once per multi-superframe, so the slot expires after
    /// `threshold * 2^(MO-SO) * superframe_duration` symbols without a
    /// successful transmission.
    pub fn expiration_interval(&self, threshold: u32) -> u64 {
        u64::from(threshold) * self.multisuperframe_duration()
    }
}

/// Worst-case duration of one acknowledged unicast transaction in the CAP,
/// in symbols: every retry runs through all backoff stages with maximal
/// backoff draws, then the final CCA, the frame itself and the full
/// acknowledgment wait.
///
/// The backoff exponent starts at `min_be` and doubles per stage, capped at
/// `max_be`.
pub fn max_transaction_time(params: &MacTimingParams, payload_symbols: u64) -> u64 {
    let mut backoff_sum = 0u64;
    for stage in 0..=u32::from(params.max_backoffs) {
        let be = (u32::from(params.min_be) + stage).min(u32::from(params.max_be));
        backoff_sum += UNIT_BACKOFF_PERIOD << be;
    }
    u64::from(params.max_retries)
        * (backoff_sum + CCA_TIME + payload_symbols + ACK_WAIT_DURATION)
}

/// Response wait time for the GTS handshake, in multiples of
/// `aBaseSuperframeDuration`.
///
/// Covers two worst-case CAP transactions (request plus response). With CAP
/// reduction only one superframe per multi-superframe carries a CAP, so the
/// wall-clock wait is stretched by `2^(MO-SO)`.
pub fn response_wait_time(
    params: &MacTimingParams,
    config: &SuperframeConfig,
    payload_symbols: u64,
) -> u32 {
    let transaction = max_transaction_time(params, payload_symbols);
    let base = (2 * transaction).div_ceil(BASE_SUPERFRAME_DURATION) as u32;
    if config.cap_reduction() {
        base * config.superframes_per_multisuperframe()
    } else {
        base
    }
}

/// Earliest time a CSMA transaction of `tail` symbols (CCA + frame and, for
/// unicast, the acknowledgment wait) can perform its CCA when the remaining
/// backoff countdown is `backoff` symbols, starting from `now`.
///
/// The countdown runs only inside CAP windows and is suspended across the
/// CFP and the beacon slot. A window only counts up to the point where the
/// whole transaction still fits before the CAP ends; countdown left over at
/// that point carries into the next CAP window.
pub fn cap_fit(config: &SuperframeConfig, now: u64, backoff: u64, tail: u64) -> u64 {
    let mut remaining = backoff;
    let mut t = now;
    loop {
        let (start, end) = config.next_cap_window(t);
        if t < start {
            t = start;
        }
        let room = (end - t).saturating_sub(tail);
        if remaining <= room {
            return t + remaining;
        }
        remaining -= room;
        t = end;
    }
}
