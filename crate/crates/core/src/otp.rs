//! HOTP (RFC 4226) and TOTP (RFC 6238) primitives.
//!
//! Defaults (SHA-1, 6 digits, 30 s step, t0 = 0) are the parameter set every
//! mainstream authenticator app honours, so a secret provisioned through an
//! `otpauth://` URI yields the same codes on the phone and on the server.

use std::fmt;
use std::str::FromStr;

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use subtle::ConstantTimeEq;
use thiserror::Error;
use zeroize::Zeroize;

use crate::base32::{self, Base32Error};

/// Shortest secret accepted, in bytes (80 bits).
pub const MIN_SECRET_LEN: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OtpError {
    #[error("secret must be at least {MIN_SECRET_LEN} bytes, got {0}")]
    SecretTooShort(usize),
    #[error("invalid secret encoding: {0}")]
    SecretEncoding(#[from] Base32Error),
    #[error("malformed one-time code: {0}")]
    MalformedCode(String),
    #[error("unix time {time} precedes t0 {t0}")]
    BeforeEpoch { time: i64, t0: i64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Algorithm {
    #[default]
    #[serde(rename = "SHA1")]
    Sha1,
    #[serde(rename = "SHA256")]
    Sha256,
    #[serde(rename = "SHA512")]
    Sha512,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Sha1 => "SHA1",
            Algorithm::Sha256 => "SHA256",
            Algorithm::Sha512 => "SHA512",
        }
    }

    fn mac(self, key: &[u8], message: &[u8]) -> Vec<u8> {
        fn run<M: Mac + hmac::digest::KeyInit>(key: &[u8], message: &[u8]) -> Vec<u8> {
            let mut mac = <M as hmac::digest::KeyInit>::new_from_slice(key)
                .expect("HMAC accepts keys of any length");
            mac.update(message);
            mac.finalize().into_bytes().to_vec()
        }
        match self {
            Algorithm::Sha1 => run::<Hmac<sha1::Sha1>>(key, message),
            Algorithm::Sha256 => run::<Hmac<sha2::Sha256>>(key, message),
            Algorithm::Sha512 => run::<Hmac<sha2::Sha512>>(key, message),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = OtpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "SHA1" => Ok(Algorithm::Sha1),
            "SHA256" => Ok(Algorithm::Sha256),
            "SHA512" => Ok(Algorithm::Sha512),
            other => Err(OtpError::InvalidParams(format!(
                "unknown algorithm {other}"
            ))),
        }
    }
}

/// Parameters shared by HOTP and TOTP generation and verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TotpParams {
    /// Time step in seconds.
    pub step: u64,
    /// Unix time at which counting starts.
    pub t0: i64,
    pub digits: u32,
    pub algorithm: Algorithm,
    /// Accepted drift, in whole steps either side of the current one.
    pub skew: u32,
}

impl Default for TotpParams {
    fn default() -> Self {
        Self {
            step: 30,
            t0: 0,
            digits: 6,
            algorithm: Algorithm::Sha1,
            skew: 1,
        }
    }
}

impl TotpParams {
    pub fn validate(&self) -> Result<(), OtpError> {
        if self.step == 0 {
            return Err(OtpError::InvalidParams("step must be positive".into()));
        }
        if !(6..=8).contains(&self.digits) {
            return Err(OtpError::InvalidParams(format!(
                "digits must be 6..=8, got {}",
                self.digits
            )));
        }
        Ok(())
    }

    pub fn with_digits(mut self, digits: u32) -> Self {
        self.digits = digits;
        self
    }

    pub fn with_skew(mut self, skew: u32) -> Self {
        self.skew = skew;
        self
    }

    /// TOTP moving factor for `unix_time`.
    pub fn counter_at(&self, unix_time: i64) -> Result<u64, OtpError> {
        if unix_time < self.t0 {
            return Err(OtpError::BeforeEpoch {
                time: unix_time,
                t0: self.t0,
            });
        }
        Ok((unix_time - self.t0) as u64 / self.step)
    }

    /// Seconds left before the code valid at `unix_time` rolls over.
    pub fn seconds_remaining(&self, unix_time: i64) -> u64 {
        let elapsed = (unix_time - self.t0).rem_euclid(self.step as i64) as u64;
        self.step - elapsed
    }
}

/// One OTP secret of a sweet bundle, identified by its 1-based slot ordinal.
#[derive(Clone, PartialEq, Eq)]
pub struct SweetSecret {
    id: u32,
    raw: Vec<u8>,
}

impl SweetSecret {
    pub fn new(id: u32, raw: Vec<u8>) -> Result<Self, OtpError> {
        if raw.len() < MIN_SECRET_LEN {
            return Err(OtpError::SecretTooShort(raw.len()));
        }
        Ok(Self { id, raw })
    }

    pub fn from_base32(id: u32, text: &str) -> Result<Self, OtpError> {
        Self::new(id, base32::decode(text)?)
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn to_base32(&self) -> String {
        base32::encode(&self.raw)
    }
}

impl Drop for SweetSecret {
    fn drop(&mut self) {
        self.raw.zeroize();
    }
}

impl fmt::Debug for SweetSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SweetSecret")
            .field("id", &self.id)
            .field("len", &self.raw.len())
            .finish_non_exhaustive()
    }
}

#[derive(Serialize, Deserialize)]
struct SweetSecretRepr {
    id: u32,
    secret: String,
}

impl Serialize for SweetSecret {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SweetSecretRepr {
            id: self.id,
            secret: self.to_base32(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SweetSecret {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = SweetSecretRepr::deserialize(deserializer)?;
        SweetSecret::from_base32(repr.id, &repr.secret).map_err(serde::de::Error::custom)
    }
}

/// A decimal one-time code of 6 to 8 digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct OtpCode(String);

impl OtpCode {
    pub fn parse(text: &str) -> Result<Self, OtpError> {
        if !(6..=8).contains(&text.len()) || !text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(OtpError::MalformedCode(format!(
                "expected 6 to 8 decimal digits, got {} characters",
                text.chars().count()
            )));
        }
        Ok(Self(text.to_owned()))
    }

    fn from_value(value: u32, digits: u32) -> Self {
        Self(format!("{:0width$}", value, width = digits as usize))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn digits(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn value(&self) -> u32 {
        self.0.parse().expect("validated decimal")
    }
}

impl fmt::Display for OtpCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for OtpCode {
    type Err = OtpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for OtpCode {
    type Error = OtpError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)
    }
}

impl From<OtpCode> for String {
    fn from(code: OtpCode) -> Self {
        code.0
    }
}

/// RFC 4226 HOTP value for `counter`.
pub fn hotp(secret: &SweetSecret, counter: u64, params: &TotpParams) -> OtpCode {
    let mut digest = params
        .algorithm
        .mac(secret.as_bytes(), &counter.to_be_bytes());
    // Dynamic truncation.
    let offset = (digest[digest.len() - 1] & 0x0f) as usize;
    let binary = u32::from_be_bytes([
        digest[offset] & 0x7f,
        digest[offset + 1],
        digest[offset + 2],
        digest[offset + 3],
    ]);
    digest.zeroize();
    OtpCode::from_value(binary % 10u32.pow(params.digits), params.digits)
}

/// RFC 6238 TOTP value at `unix_time`.
pub fn totp(
    secret: &SweetSecret,
    unix_time: i64,
    params: &TotpParams,
) -> Result<OtpCode, OtpError> {
    Ok(hotp(secret, params.counter_at(unix_time)?, params))
}

/// Codes accepted at `unix_time`: one per step offset in `-skew..=skew`,
/// skipping offsets that fall before t0.
pub fn windowed_codes(
    secret: &SweetSecret,
    unix_time: i64,
    params: &TotpParams,
) -> Vec<(i64, OtpCode)> {
    let skew = i64::from(params.skew);
    (-skew..=skew)
        .filter_map(|k| {
            let at = unix_time.checked_add(k.checked_mul(params.step as i64)?)?;
            totp(secret, at, params).ok().map(|code| (k, code))
        })
        .collect()
}

/// Window-tolerant verification. Every code in the window is compared in
/// constant time and the loop never exits early.
pub fn verify_code(
    secret: &SweetSecret,
    candidate: &OtpCode,
    unix_time: i64,
    params: &TotpParams,
) -> Result<bool, OtpError> {
    if candidate.digits() != params.digits {
        return Err(OtpError::MalformedCode(format!(
            "expected {} digits, got {}",
            params.digits,
            candidate.digits()
        )));
    }
    let mut accepted = subtle::Choice::from(0u8);
    for (_, expected) in windowed_codes(secret, unix_time, params) {
        accepted |= expected
            .as_str()
            .as_bytes()
            .ct_eq(candidate.as_str().as_bytes());
    }
    Ok(bool::from(accepted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_oracle::hotp as oracle_hotp;
    use proptest::prelude::*;

    fn rfc_secret() -> SweetSecret {
        SweetSecret::new(1, b"12345678901234567890".to_vec()).unwrap()
    }

    const RFC4226: [&str; 10] = [
        "755224", "287082", "359152", "969429", "338314", "254676", "287922", "162583", "399871",
        "520489",
    ];

    #[test]
    fn oracle_agrees_with_frozen_rfc4226_vectors() {
        for (counter, expected) in RFC4226.iter().enumerate() {
            assert_eq!(
                &oracle_hotp(b"12345678901234567890", counter as u64, 6),
                expected
            );
        }
    }

    #[test]
    fn hotp_rfc4226_vectors() {
        let secret = rfc_secret();
        let params = TotpParams::default();
        for (counter, expected) in RFC4226.iter().enumerate() {
            assert_eq!(
                hotp(&secret, counter as u64, &params).as_str(),
                *expected,
                "counter {counter}"
            );
        }
        assert_eq!(hotp(&secret, 0, &params).as_str(), "755224");
        assert_eq!(hotp(&secret, 9, &params).as_str(), "520489");
    }

    #[test]
    fn totp_rfc6238_sha1_vectors() {
        let secret = rfc_secret();
        let params = TotpParams::default().with_digits(8);
        for (time, expected) in [
            (59, "94287082"),
            (1111111109, "07081804"),
            (1111111111, "14050471"),
            (1234567890, "89005924"),
            (2000000000, "69279037"),
            (20000000000, "65353130"),
        ] {
            assert_eq!(totp(&secret, time, &params).unwrap().as_str(), expected);
        }
    }

    #[test]
    fn totp_sha256_and_sha512_vectors() {
        let s256 = SweetSecret::new(1, b"12345678901234567890123456789012".to_vec()).unwrap();
        let s512 = SweetSecret::new(
            1,
            b"1234567890123456789012345678901234567890123456789012345678901234".to_vec(),
        )
        .unwrap();
        let mut params = TotpParams::default().with_digits(8);
        params.algorithm = Algorithm::Sha256;
        assert_eq!(totp(&s256, 59, &params).unwrap().as_str(), "46119246");
        params.algorithm = Algorithm::Sha512;
        assert_eq!(totp(&s512, 59, &params).unwrap().as_str(), "90693936");
    }

    #[test]
    fn totp_window_edges() {
        let secret = rfc_secret();
        let params = TotpParams::default();
        let a = totp(&secret, 0, &params).unwrap();
        let b = totp(&secret, 29, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, hotp(&secret, 0, &params));
        assert_eq!(
            totp(&secret, 30, &params).unwrap(),
            hotp(&secret, 1, &params)
        );
    }

    #[test]
    fn totp_rejects_time_before_t0() {
        let params = TotpParams {
            t0: 100,
            ..TotpParams::default()
        };
        assert_eq!(
            totp(&rfc_secret(), 99, &params),
            Err(OtpError::BeforeEpoch { time: 99, t0: 100 })
        );
    }

    #[test]
    fn verify_respects_skew() {
        let secret = rfc_secret();
        let t = 1_700_000_000;
        let strict = TotpParams::default().with_skew(0);
        let code = totp(&secret, t, &strict).unwrap();
        assert!(verify_code(&secret, &code, t, &strict).unwrap());

        let next = totp(&secret, t + 30, &strict).unwrap();
        assert!(!verify_code(&secret, &next, t, &strict).unwrap());
        assert!(verify_code(&secret, &next, t, &strict.with_skew(1)).unwrap());
    }

    #[test]
    fn verify_rejects_wrong_length_candidate() {
        let code = OtpCode::parse("1234567").unwrap();
        assert!(matches!(
            verify_code(&rfc_secret(), &code, 0, &TotpParams::default()),
            Err(OtpError::MalformedCode(_))
        ));
    }

    #[test]
    fn code_parsing() {
        assert!(OtpCode::parse("012345").is_ok());
        assert!(OtpCode::parse("12345").is_err());
        assert!(OtpCode::parse("12a456").is_err());
        assert!(OtpCode::parse("123456789").is_err());
        assert!(OtpCode::parse("١٢٣٤٥٦").is_err());
    }

    #[test]
    fn params_validation() {
        assert!(TotpParams::default().validate().is_ok());
        assert!(TotpParams {
            step: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TotpParams::default().with_digits(5).validate().is_err());
        assert!(TotpParams::default().with_digits(9).validate().is_err());
    }

    #[test]
    fn short_secret_rejected() {
        assert_eq!(
            SweetSecret::new(1, vec![0; 9]),
            Err(OtpError::SecretTooShort(9))
        );
    }

    #[test]
    fn exhaustive_acceptance_count_is_bounded() {
        // Enumerate the whole 6-digit space and compare against the window set.
        let secret = SweetSecret::new(1, (0u8..20).collect()).unwrap();
        let t = 1_650_000_000;
        for skew in [0u32, 1] {
            let params = TotpParams::default().with_skew(skew);
            let mut expected: Vec<String> = (-(skew as i64)..=skew as i64)
                .map(|k| oracle_hotp(secret.as_bytes(), ((t + 30 * k) / 30) as u64, 6))
                .collect();
            expected.sort();
            expected.dedup();

            let accepted: Vec<String> = (0..1_000_000u32)
                .map(|v| OtpCode::from_value(v, 6))
                .filter(|c| verify_code(&secret, c, t, &params).unwrap())
                .map(String::from)
                .collect();
            assert_eq!(accepted, expected);
            assert!(accepted.len() <= 2 * skew as usize + 1);
        }
    }

    proptest! {
        #[test]
        fn totp_matches_hotp_of_counter(raw in prop::collection::vec(any::<u8>(), 10..40), t in 0i64..40_000_000_000) {
            let secret = SweetSecret::new(1, raw).unwrap();
            let params = TotpParams::default();
            prop_assert_eq!(totp(&secret, t, &params).unwrap(), hotp(&secret, (t / 30) as u64, &params));
        }

        #[test]
        fn hotp_matches_oracle(raw in prop::collection::vec(any::<u8>(), 10..80), counter in any::<u64>(), digits in 6u32..=8) {
            let secret = SweetSecret::new(1, raw.clone()).unwrap();
            let params = TotpParams::default().with_digits(digits);
            let code = hotp(&secret, counter, &params);
            prop_assert_eq!(code.as_str(), oracle_hotp(&raw, counter, digits));
            prop_assert!(code.value() < 10u32.pow(digits));
            prop_assert_eq!(code.clone(), hotp(&secret, counter, &params));
        }

        #[test]
        fn genuine_code_verifies_at_its_own_time(raw in prop::collection::vec(any::<u8>(), 10..32), t in 0i64..4_000_000_000, skew in 0u32..3) {
            let secret = SweetSecret::new(1, raw).unwrap();
            let params = TotpParams::default().with_skew(skew);
            let code = totp(&secret, t, &params).unwrap();
            prop_assert!(verify_code(&secret, &code, t, &params).unwrap());
        }
    }
}
