use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::Context;
use honeyotp_core::provisioning::{parse_otpauth_uri, render_qr};
use honeyotp_core::OtpAuthUri;

use crate::{CmdResult, Failure};

/// Parses every argument, naming the first bad one.
pub fn parse_all(uris: &[String]) -> Result<Vec<OtpAuthUri>, Failure> {
    uris.iter()
        .enumerate()
        .map(|(i, uri)| {
            if uri.trim().is_empty() {
                return Err(Failure::Usage(format!("argument {}: empty URI", i + 1)));
            }
            parse_otpauth_uri(uri)
                .map_err(|e| Failure::Usage(format!("argument {} ({uri:?}): {e}", i + 1)))
        })
        .collect()
}

fn slug(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() || c == '_' {
            out.push(c);
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let out = out.trim_matches('-').to_string();
    if out.is_empty() {
        "qr".into()
    } else {
        out
    }
}

/// File stems for a set of URIs, unique within the set.
pub fn stems(parsed: &[OtpAuthUri]) -> Vec<String> {
    let mut seen = HashSet::new();
    parsed
        .iter()
        .map(|p| {
            let base = slug(&p.display_label());
            let mut stem = base.clone();
            let mut n = 2;
            while !seen.insert(stem.clone()) {
                stem = format!("{base}-{n}");
                n += 1;
            }
            stem
        })
        .collect()
}

/// Writes `{stem}.png` and `{stem}.svg` per URI. Nothing is written if any
/// target exists and `force` is off.
pub fn write_qr_files(
    uris: &[String],
    stems: &[String],
    out: &Path,
    force: bool,
) -> anyhow::Result<Vec<PathBuf>> {
    let targets: Vec<(PathBuf, PathBuf)> = stems
        .iter()
        .map(|s| (out.join(format!("{s}.png")), out.join(format!("{s}.svg"))))
        .collect();
    if !force {
        if let Some(existing) = targets
            .iter()
            .flat_map(|(a, b)| [a, b])
            .find(|p| p.exists())
        {
            anyhow::bail!(
                "{} already exists (use --force to overwrite)",
                existing.display()
            );
        }
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    for (uri, (png, svg)) in uris.iter().zip(targets) {
        let qr = render_qr(uri)?;
        std::fs::write(&png, qr.to_png(8)?)
            .with_context(|| format!("writing {}", png.display()))?;
        std::fs::write(&svg, qr.to_svg()).with_context(|| format!("writing {}", svg.display()))?;
        written.push(png);
        written.push(svg);
    }
    Ok(written)
}

pub fn run(uris: &[String], out: &Path, force: bool) -> CmdResult {
    let parsed = parse_all(uris)?;
    for uri in uris {
        if uri.len() > honeyotp_core::provisioning::QR_MAX_BYTES {
            return Err(Failure::Usage(format!(
                "URI of {} bytes exceeds QR capacity of {} bytes",
                uri.len(),
                honeyotp_core::provisioning::QR_MAX_BYTES
            )));
        }
    }
    for path in write_qr_files(uris, &stems(&parsed), out, force)? {
        println!("{}", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("2FHA:alice (slot 1)"), "2FHA-alice-slot-1");
        assert_eq!(slug("::"), "qr");
        assert_eq!(slug("bob_b"), "bob_b");
    }

    #[test]
    fn duplicate_labels_get_suffixes() {
        let uri = "otpauth://totp/X:a?secret=GEZDGNBVGY3TQOJQ".to_string();
        let parsed = parse_all(&[uri.clone(), uri]).unwrap();
        assert_eq!(stems(&parsed), vec!["X-a", "X-a-2"]);
    }
}
