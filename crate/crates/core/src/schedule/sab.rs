//! Slot allocation bitmap: per-node occupancy of `(superframe, GTS, channel)`
//! triples within one multi-superframe.
//!
//! A node keeps one bit per triple. Slots allocated by the node itself are
//! marked on *all* channels, because the node is busy in that slot no matter
//! which channel a neighbor would pick. Slots overheard from handshakes of
//! other pairs are marked on the announced channel only.

use super::SuperframeConfig;
use thiserror::Error;

/// Errors raised by bitmap operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SabError {
    #[error("channel list must contain 1..=16 distinct channels")]
    BadChannelList,
    #[error("bitmap dimensions differ, cannot merge")]
    DimensionMismatch,
}

/// Ordered set of radio channels a network may use (at most 16).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelPage {
    channels: Vec<u8>,
}

impl ChannelPage {
    /// Build a page from a channel list; duplicates are removed and the
    /// list is sorted.
    pub fn new(mut channels: Vec<u8>) -> Result<Self, SabError> {
        channels.sort_unstable();
        channels.dedup();
        if channels.is_empty() || channels.len() > 16 {
            return Err(SabError::BadChannelList);
        }
        Ok(Self { channels })
    }

    /// All 16 channels of the 2.4 GHz O-QPSK PHY (11..=26).
    pub fn full_2_4ghz() -> Self {
        Self {
            channels: (11..=26).collect(),
        }
    }

    /// Single-channel page.
    pub fn single(channel: u8) -> Self {
        Self {
            channels: vec![channel],
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[u8] {
        &self.channels
    }

    /// Bit position of a channel number, if the page contains it.
    pub fn index_of(&self, channel: u8) -> Option<u8> {
        self.channels
            .binary_search(&channel)
            .ok()
            .map(|i| i as u8)
    }

    pub fn channel_at(&self, index: u8) -> u8 {
        self.channels[usize::from(index)]
    }

    fn full_mask(&self) -> u16 {
        if self.channels.len() == 16 {
            u16::MAX
        } else {
            (1u16 << self.channels.len()) - 1
        }
    }
}

/// Occupancy bitmap over `(superframe, GTS index, channel)` for one
/// multi-superframe.
///
/// GTS indices count contention-free slots only: 0..7 in a superframe with
/// a CAP, 0..15 in a CAP-reduced superframe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotAllocationBitmap {
    slots_per_sf: Vec<u8>,
    offsets: Vec<u32>,
    masks: Vec<u16>,
    page: ChannelPage,
}

impl SlotAllocationBitmap {
    /// Empty bitmap sized for the multi-superframe structure of `config`.
    pub fn for_config(config: &SuperframeConfig, page: ChannelPage) -> Self {
        let n = config.superframes_per_multisuperframe();
        assert!(n <= 4096, "multi-superframe too large for a bitmap");
        let mut slots_per_sf = Vec::with_capacity(n as usize);
        let mut offsets = Vec::with_capacity(n as usize);
        let mut total = 0u32;
        for sf in 0..n {
            let s = config.cfp_slot_count(sf);
            offsets.push(total);
            slots_per_sf.push(s as u8);
            total += s;
        }
        Self {
            slots_per_sf,
            offsets,
            masks: vec![0; total as usize],
            page,
        }
    }

    pub fn page(&self) -> &ChannelPage {
        &self.page
    }

    pub fn superframe_count(&self) -> u16 {
        self.slots_per_sf.len() as u16
    }

    pub fn slot_count(&self, superframe: u16) -> u8 {
        self.slots_per_sf[usize::from(superframe)]
    }

    fn index(&self, superframe: u16, slot: u8) -> usize {
        debug_assert!(slot < self.slot_count(superframe));
        self.offsets[usize::from(superframe)] as usize + usize::from(slot)
    }

    /// Mark every channel of a slot busy (the rule for slots the node takes
    /// part in itself).
    pub fn mark_all_channels(&mut self, superframe: u16, slot: u8) {
        let i = self.index(superframe, slot);
        self.masks[i] = self.page.full_mask();
    }

    /// Clear every channel of a slot.
    pub fn clear_all_channels(&mut self, superframe: u16, slot: u8) {
        let i = self.index(superframe, slot);
        self.masks[i] = 0;
    }

    /// Mark one `(slot, channel)` busy, as learned from an overheard
    /// handshake. Unknown channel numbers are ignored.
    pub fn mark(&mut self, superframe: u16, slot: u8, channel: u8) {
        if let Some(b) = self.page.index_of(channel) {
            let i = self.index(superframe, slot);
            self.masks[i] |= 1 << b;
        }
    }

    /// Clear one `(slot, channel)`, as learned from an overheard
    /// deallocation.
    pub fn clear(&mut self, superframe: u16, slot: u8, channel: u8) {
        if let Some(b) = self.page.index_of(channel) {
            let i = self.index(superframe, slot);
            self.masks[i] &= !(1 << b);
        }
    }

    pub fn is_busy(&self, superframe: u16, slot: u8, channel: u8) -> bool {
        match self.page.index_of(channel) {
            Some(b) => self.masks[self.index(superframe, slot)] & (1 << b) != 0,
            None => false,
        }
    }

    /// Whether no channel is free in the slot.
    pub fn is_slot_full(&self, superframe: u16, slot: u8) -> bool {
        self.masks[self.index(superframe, slot)] == self.page.full_mask()
    }

    /// Lowest-numbered free channel in a slot.
    pub fn free_channel(&self, superframe: u16, slot: u8) -> Option<u8> {
        let mask = self.masks[self.index(superframe, slot)];
        let free = !mask & self.page.full_mask();
        if free == 0 {
            None
        } else {
            Some(self.page.channel_at(free.trailing_zeros() as u8))
        }
    }

    /// Number of busy `(slot, channel)` bits.
    pub fn busy_bits(&self) -> u32 {
        self.masks.iter().map(|m| m.count_ones()).sum()
    }

    pub fn is_clear(&self) -> bool {
        self.masks.iter().all(|m| *m == 0)
    }

    /// Bitwise OR of two bitmaps with identical dimensions.
    pub fn merged(&self, other: &Self) -> Result<Self, SabError> {
        if self.slots_per_sf != other.slots_per_sf || self.page != other.page {
            return Err(SabError::DimensionMismatch);
        }
        let mut out = self.clone();
        for (m, o) in out.masks.iter_mut().zip(&other.masks) {
            *m |= o;
        }
        Ok(out)
    }

    /// First free `(superframe, GTS index, channel)`.
    ///
    /// The preferred `(superframe, slot)` is checked first; if it has a free
    /// channel, the lowest one wins. Otherwise slots are scanned in
    /// ascending `(superframe, slot)` order.
    pub fn first_free_slot(&self, preferred: Option<(u16, u8)>) -> Option<(u16, u8, u8)> {
        if let Some((sf, slot)) = preferred {
            if usize::from(sf) < self.slots_per_sf.len() && slot < self.slot_count(sf) {
                if let Some(ch) = self.free_channel(sf, slot) {
                    return Some((sf, slot, ch));
                }
            }
        }
        for sf in 0..self.superframe_count() {
            for slot in 0..self.slot_count(sf) {
                if let Some(ch) = self.free_channel(sf, slot) {
                    return Some((sf, slot, ch));
                }
            }
        }
        None
    }

    /// Uniformly random free `(superframe, GTS index, channel)`.
    ///
    /// The preferred `(superframe, slot)` still wins outright when it has a
    /// free channel. Everywhere else the pick is spread over the whole free
    /// set: two granters working from maps that have not yet learned of each
    /// other's allocations would otherwise both hand out the first free
    /// coordinate and create a standing collision.
    pub fn random_free_slot<R: rand::Rng + ?Sized>(
        &self,
        preferred: Option<(u16, u8)>,
        rng: &mut R,
    ) -> Option<(u16, u8, u8)> {
        if let Some((sf, slot)) = preferred {
            if usize::from(sf) < self.slots_per_sf.len() && slot < self.slot_count(sf) {
                if let Some(ch) = self.free_channel(sf, slot) {
                    return Some((sf, slot, ch));
                }
            }
        }
        let full = self.page.full_mask();
        let total_free: u32 = self
            .masks
            .iter()
            .map(|m| (!m & full).count_ones())
            .sum();
        if total_free == 0 {
            return None;
        }
        let mut k = rng.gen_range(0..total_free);
        for sf in 0..self.superframe_count() {
            for slot in 0..self.slot_count(sf) {
                let mut free = !self.masks[self.index(sf, slot)] & full;
                let here = free.count_ones();
                if k >= here {
                    k -= here;
                    continue;
                }
                for _ in 0..k {
                    free &= free - 1;
                }
                let ch = self.page.channel_at(free.trailing_zeros() as u8);
                return Some((sf, slot, ch));
            }
        }
        unreachable!("free-bit count and scan disagree");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn capred_config() -> SuperframeConfig {
        SuperframeConfig::new(3, 5, 8, true).unwrap()
    }

    #[test]
    fn channel_page_basics() {
        let page = ChannelPage::full_2_4ghz();
        assert_eq!(page.len(), 16);
        assert_eq!(page.index_of(11), Some(0));
        assert_eq!(page.index_of(26), Some(15));
        assert_eq!(page.index_of(10), None);
        assert_eq!(page.channel_at(6), 17);
        assert!(ChannelPage::new(vec![]).is_err());
        assert!(ChannelPage::new((0..17).collect()).is_err());
        let dedup = ChannelPage::new(vec![17, 11, 17]).unwrap();
        assert_eq!(dedup.channels(), &[11, 17]);
    }

    #[test]
    fn dimensions_follow_cap_reduction() {
        let sab = SlotAllocationBitmap::for_config(&capred_config(), ChannelPage::full_2_4ghz());
        assert_eq!(sab.superframe_count(), 4);
        assert_eq!(sab.slot_count(0), 7);
        assert_eq!(sab.slot_count(1), 15);
        assert_eq!(sab.slot_count(3), 15);

        let plain = SuperframeConfig::new(3, 5, 8, false).unwrap();
        let sab = SlotAllocationBitmap::for_config(&plain, ChannelPage::full_2_4ghz());
        assert!((0..4).all(|sf| sab.slot_count(sf) == 7));
    }

    #[test]
    fn own_slots_block_every_channel() {
        let mut sab =
            SlotAllocationBitmap::for_config(&capred_config(), ChannelPage::full_2_4ghz());
        sab.mark_all_channels(1, 3);
        assert!(sab.is_slot_full(1, 3));
        assert!(sab.is_busy(1, 3, 11) && sab.is_busy(1, 3, 26));
        assert_eq!(sab.free_channel(1, 3), None);
        sab.clear_all_channels(1, 3);
        assert!(sab.is_clear());
    }

    #[test]
    fn overheard_slots_block_one_channel() {
        let mut sab =
            SlotAllocationBitmap::for_config(&capred_config(), ChannelPage::full_2_4ghz());
        sab.mark(2, 5, 17);
        assert!(sab.is_busy(2, 5, 17));
        assert!(!sab.is_busy(2, 5, 11));
        assert_eq!(sab.free_channel(2, 5), Some(11));
        sab.clear(2, 5, 17);
        assert!(sab.is_clear());
        // Channels outside the page are ignored.
        sab.mark(2, 5, 9);
        assert!(sab.is_clear());
    }

    #[test]
    fn first_free_prefers_requested_slot() {
        let mut sab =
            SlotAllocationBitmap::for_config(&capred_config(), ChannelPage::full_2_4ghz());
        assert_eq!(sab.first_free_slot(None), Some((0, 0, 11)));
        assert_eq!(sab.first_free_slot(Some((2, 4))), Some((2, 4, 11)));
        // Lowest free channel in the preferred slot wins.
        sab.mark(2, 4, 11);
        assert_eq!(sab.first_free_slot(Some((2, 4))), Some((2, 4, 12)));
        // A full preferred slot falls back to the global scan.
        sab.mark_all_channels(2, 4);
        assert_eq!(sab.first_free_slot(Some((2, 4))), Some((0, 0, 11)));
    }

    #[test]
    fn first_free_scans_in_order() {
        let page = ChannelPage::new(vec![11, 17]).unwrap();
        let config = SuperframeConfig::new(3, 4, 8, false).unwrap();
        let mut sab = SlotAllocationBitmap::for_config(&config, page);
        sab.mark_all_channels(0, 0);
        sab.mark(0, 1, 11);
        assert_eq!(sab.first_free_slot(None), Some((0, 1, 17)));
        sab.mark(0, 1, 17);
        assert_eq!(sab.first_free_slot(None), Some((0, 2, 11)));
        for sf in 0..sab.superframe_count() {
            for slot in 0..sab.slot_count(sf) {
                sab.mark_all_channels(sf, slot);
            }
        }
        assert_eq!(sab.first_free_slot(None), None);
    }

    #[test]
    fn merge_requires_equal_dimensions() {
        let capred = SlotAllocationBitmap::for_config(&capred_config(), ChannelPage::full_2_4ghz());
        let other_cfg = SuperframeConfig::new(3, 4, 8, true).unwrap();
        let small = SlotAllocationBitmap::for_config(&other_cfg, ChannelPage::full_2_4ghz());
        assert_eq!(capred.merged(&small), Err(SabError::DimensionMismatch));
    }

    proptest! {
        #[test]
        fn merge_is_bitwise_or(
            marks_a in proptest::collection::vec((0u16..4, 0u8..7, 11u8..=26), 0..20),
            marks_b in proptest::collection::vec((0u16..4, 0u8..7, 11u8..=26), 0..20),
        ) {
            let config = SuperframeConfig::new(3, 5, 8, false).unwrap();
            let page = ChannelPage::full_2_4ghz();
            let mut a = SlotAllocationBitmap::for_config(&config, page.clone());
            let mut b = SlotAllocationBitmap::for_config(&config, page);
            for (sf, slot, ch) in &marks_a {
                a.mark(*sf, *slot, *ch);
            }
            for (sf, slot, ch) in &marks_b {
                b.mark(*sf, *slot, *ch);
            }
            let m = a.merged(&b).unwrap();
            prop_assert_eq!(a.merged(&b).unwrap(), b.merged(&a).unwrap());
            for sf in 0..4u16 {
                for slot in 0..7u8 {
                    for ch in 11u8..=26 {
                        prop_assert_eq!(
                            m.is_busy(sf, slot, ch),
                            a.is_busy(sf, slot, ch) || b.is_busy(sf, slot, ch)
                        );
                    }
                }
            }
            // A free pick from the merged bitmap is free in both inputs.
            if let Some((sf, slot, ch)) = m.first_free_slot(None) {
                prop_assert!(!a.is_busy(sf, slot, ch));
                prop_assert!(!b.is_busy(sf, slot, ch));
            }
        }
    }
}
