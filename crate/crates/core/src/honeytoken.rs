//! Sweet bundles: N live TOTP secrets per user, exactly one of which is
//! genuine. Which one is genuine is never known here; the sweet index is
//! always passed in by the caller (or resolved through a callback).

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::otp::{self, OtpCode, OtpError, SweetSecret, TotpParams, MIN_SECRET_LEN};

pub const DEFAULT_SLOTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BundleError {
    #[error("invalid bundle configuration: {0}")]
    Config(String),
    #[error("sweet index {index} outside 1..={slots}")]
    IndexOutOfRange { index: u32, slots: usize },
    #[error(transparent)]
    Otp(#[from] OtpError),
}

/// Byte lengths 10, 15, 20, ... one per slot. Each is a multiple of 5 so the
/// Base32 form is unpadded.
pub fn default_length_schedule(slots: usize) -> Vec<usize> {
    (0..slots).map(|i| MIN_SECRET_LEN + 5 * i).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BundleRepr")]
pub struct SweetBundle {
    username: String,
    slots: Vec<SweetSecret>,
}

#[derive(Deserialize)]
struct BundleRepr {
    username: String,
    slots: Vec<SweetSecret>,
}

impl TryFrom<BundleRepr> for SweetBundle {
    type Error = BundleError;

    fn try_from(repr: BundleRepr) -> Result<Self, Self::Error> {
        SweetBundle::from_slots(repr.username, repr.slots)
    }
}

impl SweetBundle {
    /// Assembles a bundle from existing secrets, checking slot ordinals are
    /// 1..=N in order and that no two secrets are equal.
    pub fn from_slots(
        username: impl Into<String>,
        slots: Vec<SweetSecret>,
    ) -> Result<Self, BundleError> {
        if slots.len() < 2 {
            return Err(BundleError::Config(format!(
                "a bundle needs at least 2 slots, got {}",
                slots.len()
            )));
        }
        for (i, slot) in slots.iter().enumerate() {
            if slot.id() as usize != i + 1 {
                return Err(BundleError::Config(format!(
                    "slot at position {} has ordinal {}",
                    i + 1,
                    slot.id()
                )));
            }
            if slots[..i]
                .iter()
                .any(|other| other.as_bytes() == slot.as_bytes())
            {
                return Err(BundleError::Config(format!(
                    "slot {} duplicates an earlier secret",
                    i + 1
                )));
            }
        }
        Ok(Self {
            username: username.into(),
            slots,
        })
    }

    pub fn username(&self) -> &str {
        &self.username
    }

    pub fn slots(&self) -> &[SweetSecret] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Secret at 1-based `ordinal`.
    pub fn slot(&self, ordinal: u32) -> Option<&SweetSecret> {
        (ordinal as usize)
            .checked_sub(1)
            .and_then(|i| self.slots.get(i))
    }
}

/// Draws `n` fresh secrets with the byte lengths given by `length_schedule`.
pub fn generate_bundle<R: RngCore + CryptoRng + ?Sized>(
    username: &str,
    n: usize,
    length_schedule: &[usize],
    rng: &mut R,
) -> Result<SweetBundle, BundleError> {
    if n < 2 {
        return Err(BundleError::Config(format!(
            "need at least 2 slots, got {n}"
        )));
    }
    if length_schedule.len() != n {
        return Err(BundleError::Config(format!(
            "length schedule has {} entries for {n} slots",
            length_schedule.len()
        )));
    }
    if let Some(short) = length_schedule.iter().find(|&&len| len < MIN_SECRET_LEN) {
        return Err(BundleError::Config(format!(
            "slot length {short} is below the {MIN_SECRET_LEN}-byte minimum"
        )));
    }

    let mut slots: Vec<SweetSecret> = Vec::with_capacity(n);
    for (i, &len) in length_schedule.iter().enumerate() {
        let secret = loop {
            let mut raw = vec![0u8; len];
            rng.fill_bytes(&mut raw);
            if !slots.iter().any(|s| s.as_bytes() == raw.as_slice()) {
                break SweetSecret::new(i as u32 + 1, raw)?;
            }
        };
        slots.push(secret);
    }
    SweetBundle::from_slots(username, slots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "slot", rename_all = "snake_case")]
pub enum SubmissionOutcome {
    Genuine,
    Decoy(u32),
    NoMatch,
}

/// Ordinals of every slot whose window accepts `candidate`, ascending.
pub fn matching_slots(
    bundle: &SweetBundle,
    candidate: &OtpCode,
    unix_time: i64,
    params: &TotpParams,
) -> Result<Vec<u32>, OtpError> {
    let mut matched = Vec::new();
    for slot in bundle.slots() {
        if otp::verify_code(slot, candidate, unix_time, params)? {
            matched.push(slot.id());
        }
    }
    Ok(matched)
}

/// Classification where genuineness of a matching slot is decided by
/// `is_genuine`. Matching slots are offered in ascending order; the first
/// one reported genuine wins, otherwise the lowest matching slot is the
/// decoy. Used with a remote honeychecker that holds the sweet index.
pub fn classify_with<E, F>(
    bundle: &SweetBundle,
    candidate: &OtpCode,
    unix_time: i64,
    params: &TotpParams,
    mut is_genuine: F,
) -> Result<SubmissionOutcome, E>
where
    E: From<OtpError>,
    F: FnMut(u32) -> Result<bool, E>,
{
    let matched = matching_slots(bundle, candidate, unix_time, params)?;
    for &slot in &matched {
        if is_genuine(slot)? {
            return Ok(SubmissionOutcome::Genuine);
        }
    }
    Ok(matched.first().map_or(SubmissionOutcome::NoMatch, |&slot| {
        SubmissionOutcome::Decoy(slot)
    }))
}

/// Genuine if slot `sweet_index` accepts the candidate, else the lowest
/// accepting decoy, else no match.
pub fn classify_submission(
    bundle: &SweetBundle,
    sweet_index: u32,
    candidate: &OtpCode,
    unix_time: i64,
    params: &TotpParams,
) -> Result<SubmissionOutcome, BundleError> {
    if bundle.slot(sweet_index).is_none() {
        return Err(BundleError::IndexOutOfRange {
            index: sweet_index,
            slots: bundle.len(),
        });
    }
    classify_with(bundle, candidate, unix_time, params, |slot| {
        Ok::<_, BundleError>(slot == sweet_index)
    })
}

/// The current code of every slot, in slot order.
pub fn codes_for_delivery(
    bundle: &SweetBundle,
    unix_time: i64,
    params: &TotpParams,
) -> Result<Vec<OtpCode>, OtpError> {
    bundle
        .slots()
        .iter()
        .map(|slot| otp::totp(slot, unix_time, params))
        .collect()
}
