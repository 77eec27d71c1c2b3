use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{CertError, Certificate, CertificateChain, Validity};
use crate::codec::{CodecError, Reader, WriteExt};
use crate::crypto::{sha256, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    Expired,
    NotYetValid,
    BadChain,
    BadSignature,
    UntrustedAnchor,
    Revoked,
    MalformedKey,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub accepted: bool,
    pub reason: Option<Rejection>,
    pub signature_verifications_performed: u32,
    /// Digest of the validated chain; ties an entry to the chain it came from.
    pub chain_digest: Option<[u8; 32]>,
    /// Intersection of all windows on the validated path, anchor included.
    pub window: Option<Validity>,
    pub leaf_issuer_hash: Option<[u8; 32]>,
}

impl ValidationReport {
    fn reject(reason: Rejection, verifications: u32) -> Self {
        Self {
            accepted: false,
            reason: Some(reason),
            signature_verifications_performed: verifications,
            chain_digest: None,
            window: None,
            leaf_issuer_hash: None,
        }
    }
}

/// Pluggable revocation predicate. Queries are local; nothing is fetched.
pub trait RevocationCheck: Send + Sync {
    fn is_revoked(&self, issuer_name_key_hash: &[u8; 32], serial: u64) -> bool;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NeverRevoked;

impl RevocationCheck for NeverRevoked {
    fn is_revoked(&self, _: &[u8; 32], _: u64) -> bool {
        false
    }
}

#[derive(Debug, Clone, Default)]
pub struct RevokedSerials(pub HashSet<u64>);

impl RevocationCheck for RevokedSerials {
    fn is_revoked(&self, _: &[u8; 32], serial: u64) -> bool {
        self.0.contains(&serial)
    }
}

pub fn issuer_name_key_hash(issuer: &Certificate) -> [u8; 32] {
    let mut b = Vec::with_capacity(issuer.subject.len() + issuer.public_key.len() + 4);
    b.put_vec16(issuer.subject.as_bytes());
    b.put_vec16(&issuer.public_key);
    sha256(&b)
}

pub(crate) fn chain_digest(certs: &[Certificate]) -> [u8; 32] {
    let mut b = Vec::new();
    for c in certs {
        b.put_vec24(&c.encode());
    }
    sha256(&b)
}

/// Full path validation up to `anchor`. If the chain stops below the anchor
/// (root omitted on the wire) the anchor is appended.
///
/// Counts one signature verification per link plus one for the anchor's
/// self-signature.
pub fn validate_chain(
    chain: &CertificateChain,
    anchor: &Certificate,
    now: u64,
    revocation: &dyn RevocationCheck,
) -> ValidationReport {
    let mut path: Vec<&Certificate> = chain.certs().iter().collect();
    let last = *path.last().expect("non-empty chain");
    if last != anchor {
        if last.issuer == anchor.subject && last.subject != last.issuer {
            path.push(anchor);
        } else {
            return ValidationReport::reject(Rejection::UntrustedAnchor, 0);
        }
    }

    for pair in path.windows(2) {
        if pair[0].issuer != pair[1].subject {
            return ValidationReport::reject(Rejection::BadChain, 0);
        }
    }
    if anchor.subject != anchor.issuer {
        return ValidationReport::reject(Rejection::BadChain, 0);
    }

    let mut verifications = 0;
    for pair in path.windows(2) {
        let Ok(key) = pair[1].public_key() else {
            return ValidationReport::reject(Rejection::MalformedKey, verifications);
        };
        verifications += 1;
        if !pair[0].verify_signed_by(&key) {
            return ValidationReport::reject(Rejection::BadSignature, verifications);
        }
    }
    let Ok(anchor_key) = anchor.public_key() else {
        return ValidationReport::reject(Rejection::MalformedKey, verifications);
    };
    verifications += 1;
    if !anchor.verify_signed_by(&anchor_key) {
        return ValidationReport::reject(Rejection::BadSignature, verifications);
    }
    if path[0].public_key().is_err() {
        return ValidationReport::reject(Rejection::MalformedKey, verifications);
    }

    let window = Validity::new(
        path.iter().map(|c| c.not_before).max().expect("non-empty"),
        path.iter().map(|c| c.not_after).min().expect("non-empty"),
    );
    if now < window.not_before {
        return ValidationReport::reject(Rejection::NotYetValid, verifications);
    }
    if now > window.not_after {
        return ValidationReport::reject(Rejection::Expired, verifications);
    }

    for pair in path.windows(2) {
        if revocation.is_revoked(&issuer_name_key_hash(pair[1]), pair[0].serial) {
            return ValidationReport::reject(Rejection::Revoked, verifications);
        }
    }

    let leaf_issuer = path.get(1).copied().unwrap_or(anchor);
    ValidationReport {
        accepted: true,
        reason: None,
        signature_verifications_performed: verifications,
        chain_digest: Some(chain_digest(chain.certs())),
        window: Some(window),
        leaf_issuer_hash: Some(issuer_name_key_hash(leaf_issuer)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationInfo {
    pub issuer_name_key_hash: [u8; 32],
    pub serial: u64,
    pub crl_distribution_points: Vec<String>,
}

/// What a server keeps about a validated client chain: leaf key, the two
/// most restrictive timestamps and, optionally, revocation identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationCacheEntry {
    pub scheme: Scheme,
    pub leaf_public_key: Vec<u8>,
    pub not_before_max: u64,
    pub not_after_min: u64,
    pub revocation: Option<RevocationInfo>,
}

impl ValidationCacheEntry {
    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(self.encoded_len());
        b.put_u8(self.scheme.tag());
        b.put_vec16(&self.leaf_public_key);
        b.put_u64(self.not_before_max);
        b.put_u64(self.not_after_min);
        match &self.revocation {
            None => b.put_u8(0),
            Some(r) => {
                b.put_u8(1);
                b.extend_from_slice(&r.issuer_name_key_hash);
                b.put_u64(r.serial);
                b.put_u8(r.crl_distribution_points.len() as u8);
                for dp in &r.crl_distribution_points {
                    b.put_vec16(dp.as_bytes());
                }
            }
        }
        b
    }

    pub fn encoded_len(&self) -> usize {
        1 + 2
            + self.leaf_public_key.len()
            + 16
            + 1
            + self.revocation.as_ref().map_or(0, |r| {
                32 + 8 + 1 + r.crl_distribution_points.iter().map(|d| 2 + d.len()).sum::<usize>()
            })
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let entry = Self::read(&mut r)?;
        r.finish("validation cache entry")?;
        Ok(entry)
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let scheme = Scheme::from_tag(r.u8()?).map_err(|_| CodecError::Malformed("scheme tag"))?;
        let leaf_public_key = r.vec16()?.to_vec();
        let not_before_max = r.u64()?;
        let not_after_min = r.u64()?;
        let revocation = match r.u8()? {
            0 => None,
            1 => {
                let mut h = [0u8; 32];
                h.copy_from_slice(r.take(32)?);
                let serial = r.u64()?;
                let n = r.u8()?;
                let mut dps = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    dps.push(
                        String::from_utf8(r.vec16()?.to_vec())
                            .map_err(|_| CodecError::Malformed("utf8 string"))?,
                    );
                }
                Some(RevocationInfo {
                    issuer_name_key_hash: h,
                    serial,
                    crl_distribution_points: dps,
                })
            }
            _ => return Err(CodecError::Malformed("revocation flag")),
        };
        Ok(Self {
            scheme,
            leaf_public_key,
            not_before_max,
            not_after_min,
            revocation,
        })
    }
}

/// Builds the cached state from a chain that `report` accepted.
pub fn abbreviate(
    chain: &CertificateChain,
    report: &ValidationReport,
    with_revocation: bool,
) -> Result<ValidationCacheEntry, CertError> {
    if !report.accepted || report.chain_digest != Some(chain_digest(chain.certs())) {
        return Err(CertError::NotValidated);
    }
    let certs = chain.certs();
    let mut nb = certs.iter().map(|c| c.not_before).max().expect("non-empty");
    let mut na = certs.iter().map(|c| c.not_after).min().expect("non-empty");
    if let Some(w) = report.window {
        nb = nb.max(w.not_before);
        na = na.min(w.not_after);
    }
    let leaf = chain.leaf();
    let scheme = leaf.public_key()?.scheme();
    // a self-signed leaf is its own anchor; anchors are not revocation-checked
    let revocation = if with_revocation && leaf.subject != leaf.issuer {
        Some(RevocationInfo {
            issuer_name_key_hash: report.leaf_issuer_hash.ok_or(CertError::NotValidated)?,
            serial: leaf.serial,
            crl_distribution_points: leaf.crl_distribution_points.clone(),
        })
    } else {
        None
    };
    Ok(ValidationCacheEntry {
        scheme,
        leaf_public_key: leaf.public_key.clone(),
        not_before_max: nb,
        not_after_min: na,
        revocation,
    })
}

/// Time (and optional revocation) re-check of a cached chain. Performs no
/// signature verification.
pub fn validate_cached(
    entry: &ValidationCacheEntry,
    now: u64,
    revocation: &dyn RevocationCheck,
) -> ValidationReport {
    let reason = if now < entry.not_before_max {
        Some(Rejection::NotYetValid)
    } else if now > entry.not_after_min {
        Some(Rejection::Expired)
    } else if entry
        .revocation
        .as_ref()
        .is_some_and(|r| revocation.is_revoked(&r.issuer_name_key_hash, r.serial))
    {
        Some(Rejection::Revoked)
    } else {
        None
    };
    match reason {
        Some(r) => ValidationReport::reject(r, 0),
        None => ValidationReport {
            accepted: true,
            reason: None,
            signature_verifications_performed: 0,
            chain_digest: None,
            window: Some(Validity::new(entry.not_before_max, entry.not_after_min)),
            leaf_issuer_hash: entry.revocation.as_ref().map(|r| r.issuer_name_key_hash),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certs::{make_chain, ChainParams, Credential};
    use rand_chacha::ChaCha20Rng;
    use rand_core::{RngCore, SeedableRng};

    fn chain_with_windows(seed: u64, windows: Vec<Validity>) -> Credential {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let p = ChainParams::new(Scheme::Null, 2048, windows.len(), windows[0])
            .with_windows(windows)
            .with_crl("http://crl.plant.example/issuing.crl");
        make_chain(&p, &mut rng).unwrap()
    }

    #[test]
    fn full_validation_counts() {
        let c = chain_with_windows(1, vec![Validity::new(10, 100); 3]);
        let r = validate_chain(&c.chain, c.trust_anchor(), 50, &NeverRevoked);
        assert!(r.accepted, "{r:?}");
        assert_eq!(r.signature_verifications_performed, 3);

        let single = chain_with_windows(2, vec![Validity::new(10, 100)]);
        let r = validate_chain(&single.chain, single.trust_anchor(), 50, &NeverRevoked);
        assert!(r.accepted);
        assert_eq!(r.signature_verifications_performed, 1);
    }

    #[test]
    fn root_omitted_chain_validates_against_anchor() {
        let c = chain_with_windows(3, vec![Validity::new(10, 100); 3]);
        let wire = CertificateChain::new(c.chain.transmitted().to_vec()).unwrap();
        let r = validate_chain(&wire, c.trust_anchor(), 50, &NeverRevoked);
        assert!(r.accepted);
        assert_eq!(r.signature_verifications_performed, 3);
    }

    #[test]
    fn rejections() {
        let c = chain_with_windows(4, vec![Validity::new(10, 100); 3]);
        let anchor = c.trust_anchor();
        assert_eq!(
            validate_chain(&c.chain, anchor, 101, &NeverRevoked).reason,
            Some(Rejection::Expired)
        );
        assert_eq!(
            validate_chain(&c.chain, anchor, 9, &NeverRevoked).reason,
            Some(Rejection::NotYetValid)
        );

        let mut certs = c.chain.certs().to_vec();
        certs[0].issuer = "somebody else".into();
        let broken = CertificateChain::new(certs).unwrap();
        assert_eq!(
            validate_chain(&broken, anchor, 50, &NeverRevoked).reason,
            Some(Rejection::BadChain)
        );

        let mut certs = c.chain.certs().to_vec();
        certs[1].serial ^= 1;
        let tampered = CertificateChain::new(certs).unwrap();
        assert_eq!(
            validate_chain(&tampered, anchor, 50, &NeverRevoked).reason,
            Some(Rejection::BadSignature)
        );

        let other = chain_with_windows(5, vec![Validity::new(10, 100); 3]);
        assert!(!validate_chain(&c.chain, other.trust_anchor(), 50, &NeverRevoked).accepted);

        let revoked = RevokedSerials([c.chain.leaf().serial].into_iter().collect());
        assert_eq!(
            validate_chain(&c.chain, anchor, 50, &revoked).reason,
            Some(Rejection::Revoked)
        );
    }

    #[test]
    fn abbreviate_takes_restrictive_window() {
        let c = chain_with_windows(
            6,
            vec![Validity::new(10, 100), Validity::new(20, 90), Validity::new(30, 80)],
        );
        let r = validate_chain(&c.chain, c.trust_anchor(), 50, &NeverRevoked);
        let e = abbreviate(&c.chain, &r, false).unwrap();
        assert_eq!((e.not_before_max, e.not_after_min), (30, 80));
        assert_eq!(e.leaf_public_key, c.chain.leaf().public_key);
        assert!(e.revocation.is_none());
    }

    #[test]
    fn abbreviate_requires_validation() {
        let c = chain_with_windows(7, vec![Validity::new(10, 100); 2]);
        let rejected = validate_chain(&c.chain, c.trust_anchor(), 500, &NeverRevoked);
        assert_eq!(abbreviate(&c.chain, &rejected, false), Err(CertError::NotValidated));
        let other = chain_with_windows(8, vec![Validity::new(10, 100); 2]);
        let ok_other = validate_chain(&other.chain, other.trust_anchor(), 50, &NeverRevoked);
        assert_eq!(abbreviate(&c.chain, &ok_other, false), Err(CertError::NotValidated));
    }

    #[test]
    fn cached_validation_never_verifies() {
        let c = chain_with_windows(9, vec![Validity::new(10, 100); 3]);
        let r = validate_chain(&c.chain, c.trust_anchor(), 50, &NeverRevoked);
        let e = abbreviate(&c.chain, &r, true).unwrap();
        let ok = validate_cached(&e, 60, &NeverRevoked);
        assert!(ok.accepted);
        assert_eq!(ok.signature_verifications_performed, 0);
        assert_eq!(validate_cached(&e, 101, &NeverRevoked).reason, Some(Rejection::Expired));
        let revoked = RevokedSerials([c.chain.leaf().serial].into_iter().collect());
        assert_eq!(validate_cached(&e, 60, &revoked).reason, Some(Rejection::Revoked));
    }

    #[test]
    fn window_boundary_sweep() {
        let c = chain_with_windows(
            10,
            vec![Validity::new(100, 900), Validity::new(50, 800), Validity::new(150, 1000)],
        );
        let r = validate_chain(&c.chain, c.trust_anchor(), 500, &NeverRevoked);
        let e = abbreviate(&c.chain, &r, false).unwrap();
        for edge in [50u64, 100, 150, 800, 900, 1000] {
            for t in [edge - 1, edge, edge + 1] {
                let cached = validate_cached(&e, t, &NeverRevoked).accepted;
                assert_eq!(cached, (150..=800).contains(&t), "t={t}");
                assert_eq!(cached, validate_chain(&c.chain, c.trust_anchor(), t, &NeverRevoked).accepted);
            }
        }
    }

    #[test]
    fn oracle_equivalence_randomized() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for trial in 0..40 {
            let len = 1 + (rng.next_u32() % 4) as usize;
            let windows: Vec<Validity> = (0..len)
                .map(|_| {
                    let nb = rng.next_u64() % 10_000;
                    Validity::new(nb, nb + 1 + rng.next_u64() % 10_000)
                })
                .collect();
            let c = chain_with_windows(1000 + trial, windows.clone());
            let lo = windows.iter().map(|w| w.not_before).max().unwrap();
            let hi = windows.iter().map(|w| w.not_after).min().unwrap();
            if lo > hi {
                // never simultaneously valid; nothing to cache
                continue;
            }
            let at = lo + (hi - lo) / 2;
            let report = validate_chain(&c.chain, c.trust_anchor(), at, &NeverRevoked);
            assert!(report.accepted);
            let entry = abbreviate(&c.chain, &report, true).unwrap();
            for _ in 0..100 {
                let t = rng.next_u64() % 22_000;
                assert_eq!(
                    validate_cached(&entry, t, &NeverRevoked).accepted,
                    validate_chain(&c.chain, c.trust_anchor(), t, &NeverRevoked).accepted,
                    "trial {trial} t {t}"
                );
            }
        }
    }

    #[test]
    fn entry_round_trip_and_constant_size() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let mut sizes = Vec::new();
        for _ in 0..3 {
            let p = ChainParams::new(Scheme::EcdsaP256, 256, 3, Validity::new(0, 100))
                .with_crl("http://crl.plant.example/issuing.crl");
            let c = make_chain(&p, &mut rng).unwrap();
            let r = validate_chain(&c.chain, c.trust_anchor(), 1, &NeverRevoked);
            let e = abbreviate(&c.chain, &r, true).unwrap();
            let enc = e.encode();
            assert_eq!(enc.len(), e.encoded_len());
            assert_eq!(ValidationCacheEntry::decode(&enc).unwrap(), e);
            sizes.push(enc.len());
        }
        assert!(sizes.windows(2).all(|w| w[0] == w[1]));
        assert!(ValidationCacheEntry::decode(&[9, 0, 0]).is_err());
    }
}
