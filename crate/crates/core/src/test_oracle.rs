//! Reference computations for tests. Kept independent of the production
//! code path: HMAC is assembled by hand from the bare SHA-1 hash.

use sha1::{Digest, Sha1};

pub fn hmac_sha1(key: &[u8], message: &[u8]) -> [u8; 20] {
    let mut block = [0u8; 64];
    if key.len() > 64 {
        block[..20].copy_from_slice(&Sha1::digest(key));
    } else {
        block[..key.len()].copy_from_slice(key);
    }
    let ipad: Vec<u8> = block.iter().map(|b| b ^ 0x36).collect();
    let opad: Vec<u8> = block.iter().map(|b| b ^ 0x5c).collect();
    let inner = Sha1::new()
        .chain_update(&ipad)
        .chain_update(message)
        .finalize();
    Sha1::new()
        .chain_update(&opad)
        .chain_update(inner)
        .finalize()
        .into()
}

pub fn hotp(key: &[u8], counter: u64, digits: u32) -> String {
    let mac = hmac_sha1(key, &counter.to_be_bytes());
    let offset = (mac[19] & 0xf) as usize;
    let bin = ((mac[offset] as u64 & 0x7f) << 24)
        | ((mac[offset + 1] as u64) << 16)
        | ((mac[offset + 2] as u64) << 8)
        | mac[offset + 3] as u64;
    format!("{:0w$}", bin % 10u64.pow(digits), w = digits as usize)
}

/// 30 s / 6 digit TOTP with t0 = 0.
pub fn totp6(key: &[u8], unix_time: i64) -> String {
    hotp(key, (unix_time / 30) as u64, 6)
}

/// Every code accepted at `unix_time` with a +/-`skew` step window.
pub fn window(key: &[u8], unix_time: i64, skew: i64) -> Vec<String> {
    (-skew..=skew)
        .map(|k| totp6(key, unix_time + 30 * k))
        .collect()
}

/// Fixture secrets with lengths 10, 15 and 20 bytes.
pub fn fixture_slots() -> [Vec<u8>; 3] {
    [
        (0u8..10).collect(),
        (100u8..115).collect(),
        b"12345678901234567890".to_vec(),
    ]
}

pub const FIXTURE_TIME: i64 = 1_700_000_000;
