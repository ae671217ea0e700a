//! RFC 4648 Base32 codec in the form authenticator apps consume: upper-case,
//! unpadded on output, case-insensitive and padding-tolerant on input.

use data_encoding::BASE32_NOPAD;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Base32Error {
    #[error("invalid base32 character {found:?} at position {position}")]
    InvalidCharacter { position: usize, found: char },
    #[error("invalid base32 length {0}")]
    InvalidLength(usize),
    #[error("non-canonical trailing bits at position {0}")]
    TrailingBits(usize),
}

pub fn encode(raw: &[u8]) -> String {
    BASE32_NOPAD.encode(raw)
}

pub fn decode(text: &str) -> Result<Vec<u8>, Base32Error> {
    if let Some((position, found)) = text
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '='))
    {
        return Err(Base32Error::InvalidCharacter { position, found });
    }
    let body = text.trim_end_matches('=');
    let normalized = body.to_ascii_uppercase();
    BASE32_NOPAD
        .decode(normalized.as_bytes())
        .map_err(|err| match err.kind {
            data_encoding::DecodeKind::Symbol => {
                let found = normalized[err.position..].chars().next().unwrap_or('?');
                Base32Error::InvalidCharacter {
                    position: err.position,
                    found,
                }
            }
            data_encoding::DecodeKind::Trailing => Base32Error::TrailingBits(err.position),
            _ => Base32Error::InvalidLength(body.len()),
        })
}
