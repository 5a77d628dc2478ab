//! Tunable MAC timing attributes shared by CSMA/CA and the GTS machinery.

use super::{response_wait_time, SuperframeConfig};
use thiserror::Error;

/// Errors raised when validating [`MacTimingParams`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("min_be ({min_be}) must not exceed max_be ({max_be})")]
    BackoffExponents { min_be: u8, max_be: u8 },
    #[error("max_retries must be at least 1")]
    NoRetries,
    #[error("backoff exponent {0} too large (max 14)")]
    ExponentRange(u8),
}

/// CSMA/CA and GTS timing attributes.
///
/// `max_retries` counts transmission attempts including the first one, so a
/// value of 1 means no retransmissions. `response_wait` is measured in
/// multiples of `aBaseSuperframeDuration`; when `None` it is derived from
/// the superframe configuration and the size of a handshake frame via
/// [`response_wait_time`](super::response_wait_time).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacTimingParams {
    /// `macMinBE`: initial backoff exponent.
    pub min_be: u8,
    /// `macMaxBE`: ceiling for the backoff exponent.
    pub max_be: u8,
    /// `macMaxCsmaBackoffs`: CCA failures tolerated per attempt.
    pub max_backoffs: u8,
    /// `macMaxFrameRetries` interpreted as total attempts.
    pub max_retries: u8,
    /// `macDsmeGtsExpirationTime`: idle multi-superframes before a GTS is
    /// deallocated.
    pub expiration_threshold: u32,
    /// `macResponseWaitTime` override, in multiples of
    /// `aBaseSuperframeDuration`.
    pub response_wait: Option<u32>,
    /// Per-neighbor transmit queue capacity.
    pub queue_capacity: usize,
}

impl Default for MacTimingParams {
    fn default() -> Self {
        Self {
            min_be: 5,
            max_be: 7,
            max_backoffs: 4,
            max_retries: 3,
            expiration_threshold: 50,
            response_wait: None,
            queue_capacity: 30,
        }
    }
}

impl MacTimingParams {
    /// Parameters for the contention-only baseline stack, chosen for best
    /// delivery under saturation: maximal backoff tolerance and retries,
    /// widest fixed backoff window.
    pub fn csma_baseline() -> Self {
        Self {
            min_be: 7,
            max_be: 7,
            max_backoffs: 5,
            max_retries: 7,
            expiration_threshold: 50,
            response_wait: None,
            queue_capacity: 30,
        }
    }

    /// The response wait to use under `config`: the explicit override if
    /// set, otherwise derived from the worst-case handshake transaction.
    pub fn resolved_response_wait(&self, config: &SuperframeConfig) -> u32 {
        // 25-octet handshake commands occupy 62 symbols on air.
        self.response_wait
            .unwrap_or_else(|| response_wait_time(self, config, 62))
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.min_be > self.max_be {
            return Err(ParamError::BackoffExponents {
                min_be: self.min_be,
                max_be: self.max_be,
            });
        }
        if self.max_be > 14 {
            return Err(ParamError::ExponentRange(self.max_be));
        }
        if self.max_retries == 0 {
            return Err(ParamError::NoRetries);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert_eq!(MacTimingParams::default().validate(), Ok(()));
        assert_eq!(MacTimingParams::csma_baseline().validate(), Ok(()));
    }

    #[test]
    fn invalid_combinations_rejected() {
        let p = MacTimingParams {
            min_be: 8,
            max_be: 7,
            ..MacTimingParams::default()
        };
        assert!(matches!(p.validate(), Err(ParamError::BackoffExponents { .. })));
        let p = MacTimingParams {
            max_retries: 0,
            ..MacTimingParams::default()
        };
        assert_eq!(p.validate(), Err(ParamError::NoRetries));
    }
}
