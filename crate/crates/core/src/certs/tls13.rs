use super::CertError;
use crate::codec::{
    decode_handshake_message, CertEntry13, Certificate12, Certificate13, CodecError, Extension,
    HandshakeMessage, HandshakeType,
};

/// Strips request context and per-certificate extensions, returning the
/// encoded 1.2-style Certificate message. Fingerprints and ticket hashes for
/// 1.3 are taken over this form.
pub fn convert_tls13_cert_msg(msg: &HandshakeMessage) -> Result<Vec<u8>, CertError> {
    if msg.msg_type != HandshakeType::Certificate {
        return Err(CodecError::Malformed("not a certificate message").into());
    }
    let c13 = Certificate13::decode_body(&msg.body)?;
    if c13.entries.iter().any(|e| e.cert.is_empty()) {
        return Err(CodecError::Malformed("abbreviated slot has no canonical form").into());
    }
    let c12 = Certificate12 {
        certs: c13.entries.into_iter().map(|e| e.cert).collect(),
    };
    Ok(c12.to_message().encode()?)
}

/// Zero-length certificate slots, each followed by its non-static
/// extensions.
pub fn build_tls13_abbreviated_cert(
    context: &[u8],
    nonstatic_extensions: &[Vec<Extension>],
) -> Result<HandshakeMessage, CertError> {
    let c = Certificate13 {
        context: context.to_vec(),
        entries: nonstatic_extensions
            .iter()
            .map(|exts| CertEntry13 {
                cert: Vec::new(),
                extensions: exts.clone(),
            })
            .collect(),
    };
    Ok(c.to_message()?)
}

/// Fills the zero-length slots of an abbreviated message with the cached
/// certificates from `canonical` (output of `convert_tls13_cert_msg`).
pub fn splice_cached_certificates(
    abbreviated: &Certificate13,
    canonical: &[u8],
) -> Result<Certificate13, CertError> {
    let msg = decode_handshake_message(canonical)?;
    let cached = Certificate12::decode_body(&msg.body)?;
    if cached.certs.len() != abbreviated.entries.len() {
        return Err(CodecError::LengthMismatch("cached certificate slots").into());
    }
    let entries = abbreviated
        .entries
        .iter()
        .zip(cached.certs)
        .map(|(slot, cert)| {
            if !slot.cert.is_empty() {
                return Err(CertError::from(CodecError::Malformed("slot not abbreviated")));
            }
            Ok(CertEntry13 {
                cert,
                extensions: slot.extensions.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Certificate13 {
        context: abbreviated.context.clone(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certs::{make_chain, validate_chain, ChainParams, CertificateChain, NeverRevoked, Validity};
    use crate::codec::ExtensionType;
    use crate::crypto::Scheme;
    use rand_chacha::ChaCha20Rng;
    use rand_core::{RngCore, SeedableRng};

    fn c13(certs: &[Vec<u8>], context: &[u8], ext: Vec<Extension>) -> HandshakeMessage {
        Certificate13 {
            context: context.to_vec(),
            entries: certs
                .iter()
                .map(|c| CertEntry13 {
                    cert: c.clone(),
                    extensions: ext.clone(),
                })
                .collect(),
        }
        .to_message()
        .unwrap()
    }

    #[test]
    fn canonical_equals_tls12_encoding() {
        let certs = vec![vec![1u8; 40], vec![2u8; 30]];
        let canon = convert_tls13_cert_msg(&c13(&certs, &[], vec![])).unwrap();
        let c12 = Certificate12 { certs: certs.clone() }.to_message().encode().unwrap();
        assert_eq!(canon, c12);
        let back = decode_handshake_message(&canon).unwrap();
        assert_eq!(Certificate12::decode_body(&back.body).unwrap().certs, certs);
    }

    #[test]
    fn context_and_extensions_do_not_affect_canonical_form() {
        let certs = vec![vec![7u8; 64]];
        let ocsp = Extension::new(ExtensionType(5), vec![9; 12]);
        let a = convert_tls13_cert_msg(&c13(&certs, &[], vec![])).unwrap();
        let b = convert_tls13_cert_msg(&c13(&certs, &[1, 2, 3, 4], vec![ocsp])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn abbreviated_size_is_constant_and_grows_with_extensions() {
        let plain = build_tls13_abbreviated_cert(&[], &vec![vec![]; 3]).unwrap();
        // context(1) + list(3) + 3 * (cert_len 3 + ext_len 2)
        assert_eq!(plain.body.len(), 1 + 3 + 3 * 5);
        let ext = Extension::new(ExtensionType(5), vec![0; 10]);
        let with = build_tls13_abbreviated_cert(&[], &vec![vec![ext]; 3]).unwrap();
        assert_eq!(with.body.len() - plain.body.len(), 3 * (4 + 10));
        assert!(convert_tls13_cert_msg(&plain).is_err());
    }

    #[test]
    fn splice_then_validate_matches_full() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        for i in 0..10 {
            let len = 1 + (rng.next_u32() % 3) as usize;
            let p = ChainParams::new(Scheme::Null, 2048, len, Validity::new(0, 1000));
            let cred = make_chain(&p, &mut rng).unwrap();
            let certs = cred.chain.transmitted_encodings();
            let ctx = vec![i as u8; (i % 3) as usize];
            let full = c13(&certs, &ctx, vec![]);
            let canonical = convert_tls13_cert_msg(&full).unwrap();

            let slots = vec![vec![]; certs.len()];
            let abbreviated = build_tls13_abbreviated_cert(&ctx, &slots).unwrap();
            let abbreviated = Certificate13::decode_body(&abbreviated.body).unwrap();
            let spliced = splice_cached_certificates(&abbreviated, &canonical).unwrap();
            assert_eq!(spliced.to_message().unwrap(), full);

            let chain_of = |m: &Certificate13| {
                let encs: Vec<Vec<u8>> = m.entries.iter().map(|e| e.cert.clone()).collect();
                CertificateChain::from_encodings(&encs).unwrap()
            };
            let full_decoded = Certificate13::decode_body(&full.body).unwrap();
            for t in [0, 500, 1000, 1001] {
                assert_eq!(
                    validate_chain(&chain_of(&spliced), cred.trust_anchor(), t, &NeverRevoked).accepted,
                    validate_chain(&chain_of(&full_decoded), cred.trust_anchor(), t, &NeverRevoked).accepted
                );
            }
        }
    }

    #[test]
    fn splice_slot_mismatch() {
        let canonical = Certificate12 { certs: vec![vec![1; 5]] }.to_message().encode().unwrap();
        let two = Certificate13 {
            context: vec![],
            entries: vec![
                CertEntry13 { cert: vec![], extensions: vec![] },
                CertEntry13 { cert: vec![], extensions: vec![] },
            ],
        };
        assert!(splice_cached_certificates(&two, &canonical).is_err());
    }
}
