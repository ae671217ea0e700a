//! Fixtures shared by the benchmarks.

use honeyotp_core::{SweetBundle, SweetSecret};

pub const FIXTURE_TIME: i64 = 1_700_000_000;

/// Three slots of 10, 15 and 20 bytes.
pub fn fixture_bundle() -> SweetBundle {
    let slots = (1..=3u32)
        .map(|id| {
            let len = 5 + 5 * id as usize;
            let raw = (0..len)
                .map(|i| (i as u8).wrapping_mul(31).wrapping_add(id as u8))
                .collect();
            SweetSecret::new(id, raw).expect("fixture secret")
        })
        .collect();
    SweetBundle::from_slots("bench", slots).expect("fixture bundle")
}
