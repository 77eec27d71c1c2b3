use super::{
    encode_extension_list, read_extension_list, CodecError, Extension, HandshakeMessage,
    HandshakeType, Reader, Result, WriteExt,
};

pub const TLS12: u16 = 0x0303;
pub const TLS13: u16 = 0x0304;
pub const ECDHE_RSA_AES256_GCM_SHA384: u16 = 0xC030;
pub const ECDHE_ECDSA_AES256_GCM_SHA384: u16 = 0xC02C;
pub const TLS_AES_256_GCM_SHA384: u16 = 0x1302;

pub const RANDOM_LEN: usize = 32;
pub const FINGERPRINT_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientHello {
    pub legacy_version: u16,
    pub random: [u8; RANDOM_LEN],
    pub session_id: Vec<u8>,
    pub cipher_suites: Vec<u16>,
    pub compression: Vec<u8>,
    pub extensions: Vec<Extension>,
}

impl ClientHello {
    pub fn encode_body(&self) -> Result<Vec<u8>> {
        let mut b = Vec::new();
        b.put_u16(self.legacy_version);
        b.extend_from_slice(&self.random);
        b.put_vec8(&self.session_id);
        let mut suites = Vec::new();
        for s in &self.cipher_suites {
            suites.put_u16(*s);
        }
        b.put_vec16(&suites);
        b.put_vec8(&self.compression);
        b.extend(encode_extension_list(&self.extensions)?);
        Ok(b)
    }

    pub fn to_message(&self) -> Result<HandshakeMessage> {
        Ok(HandshakeMessage::new(HandshakeType::ClientHello, self.encode_body()?))
    }

    pub fn decode_body(body: &[u8]) -> Result<Self> {
        let mut r = Reader::new(body);
        let legacy_version = r.u16()?;
        let mut random = [0u8; RANDOM_LEN];
        random.copy_from_slice(r.take(RANDOM_LEN)?);
        let session_id = r.vec8()?.to_vec();
        let suites = r.vec16()?;
        if suites.len() % 2 != 0 {
            return Err(CodecError::Malformed("cipher suite list"));
        }
        let cipher_suites = suites
            .chunks(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        let compression = r.vec8()?.to_vec();
        let extensions = read_extension_list(&mut r)?;
        r.finish("client hello")?;
        Ok(Self {
            legacy_version,
            random,
            session_id,
            cipher_suites,
            compression,
            extensions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerHello {
    pub legacy_version: u16,
    pub random: [u8; RANDOM_LEN],
    pub session_id: Vec<u8>,
    pub cipher_suite: u16,
    pub compression: u8,
    pub extensions: Vec<Extension>,
}

impl ServerHello {
    pub fn encode_body(&self) -> Result<Vec<u8>> {
        let mut b = Vec::new();
        b.put_u16(self.legacy_version);
        b.extend_from_slice(&self.random);
        b.put_vec8(&self.session_id);
        b.put_u16(self.cipher_suite);
        b.put_u8(self.compression);
        b.extend(encode_extension_list(&self.extensions)?);
        Ok(b)
    }

    pub fn to_message(&self) -> Result<HandshakeMessage> {
        Ok(HandshakeMessage::new(HandshakeType::ServerHello, self.encode_body()?))
    }

    pub fn decode_body(body: &[u8]) -> Result<Self> {
        let mut r = Reader::new(body);
        let legacy_version = r.u16()?;
        let mut random = [0u8; RANDOM_LEN];
        random.copy_from_slice(r.take(RANDOM_LEN)?);
        let session_id = r.vec8()?.to_vec();
        let cipher_suite = r.u16()?;
        let compression = r.u8()?;
        let extensions = read_extension_list(&mut r)?;
        r.finish("server hello")?;
        Ok(Self {
            legacy_version,
            random,
            session_id,
            cipher_suite,
            compression,
            extensions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedExtensions {
    pub extensions: Vec<Extension>,
}

impl EncryptedExtensions {
    pub fn to_message(&self) -> Result<HandshakeMessage> {
        Ok(HandshakeMessage::new(
            HandshakeType::EncryptedExtensions,
            encode_extension_list(&self.extensions)?,
        ))
    }

    pub fn decode_body(body: &[u8]) -> Result<Self> {
        let mut r = Reader::new(body);
        let extensions = read_extension_list(&mut r)?;
        r.finish("encrypted extensions")?;
        Ok(Self { extensions })
    }
}

/// ECDHE parameters signed by the server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerKeyExchange {
    pub named_group: u16,
    pub public: Vec<u8>,
    pub scheme: u16,
    pub signature: Vec<u8>,
}

impl ServerKeyExchange {
    /// `curve_type(1)=named_curve || group(2) || point<1..255>`
    pub fn params(named_group: u16, public: &[u8]) -> Vec<u8> {
        let mut p = Vec::with_capacity(4 + public.len());
        p.put_u8(3);
        p.put_u16(named_group);
        p.put_vec8(public);
        p
    }

    pub fn to_message(&self) -> HandshakeMessage {
        let mut b = Self::params(self.named_group, &self.public);
        b.put_u16(self.scheme);
        b.put_vec16(&self.signature);
        HandshakeMessage::new(HandshakeType::ServerKeyExchange, b)
    }

    pub fn decode_body(body: &[u8]) -> Result<Self> {
        let mut r = Reader::new(body);
        if r.u8()? != 3 {
            return Err(CodecError::Malformed("curve type"));
        }
        let named_group = r.u16()?;
        let public = r.vec8()?.to_vec();
        let scheme = r.u16()?;
        let signature = r.vec16()?.to_vec();
        r.finish("server key exchange")?;
        Ok(Self {
            named_group,
            public,
            scheme,
            signature,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientKeyExchange {
    pub public: Vec<u8>,
}

impl ClientKeyExchange {
    pub fn to_message(&self) -> HandshakeMessage {
        let mut b = Vec::with_capacity(1 + self.public.len());
        b.put_vec8(&self.public);
        HandshakeMessage::new(HandshakeType::ClientKeyExchange, b)
    }

    pub fn decode_body(body: &[u8]) -> Result<Self> {
        let mut r = Reader::new(body);
        let public = r.vec8()?.to_vec();
        r.finish("client key exchange")?;
        Ok(Self { public })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateRequest12 {
    pub cert_types: Vec<u8>,
    pub signature_algorithms: Vec<u16>,
    pub authorities: Vec<u8>,
}

impl CertificateRequest12 {
    pub fn encode_body(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.put_vec8(&self.cert_types);
        let mut algs = Vec::new();
        for a in &self.signature_algorithms {
            algs.put_u16(*a);
        }
        b.put_vec16(&algs);
        b.put_vec16(&self.authorities);
        b
    }

    pub fn to_message(&self) -> HandshakeMessage {
        HandshakeMessage::new(HandshakeType::CertificateRequest, self.encode_body())
    }

    pub fn decode_body(body: &[u8]) -> Result<Self> {
        let mut r = Reader::new(body);
        let cert_types = r.vec8()?.to_vec();
        let algs = r.vec16()?;
        if algs.len() % 2 != 0 {
            return Err(CodecError::Malformed("signature algorithm list"));
        }
        let signature_algorithms = algs
            .chunks(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        let authorities = r.vec16()?.to_vec();
        r.finish("certificate request")?;
        Ok(Self {
            cert_types,
            signature_algorithms,
            authorities,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateRequest13 {
    pub context: Vec<u8>,
    pub extensions: Vec<Extension>,
}

impl CertificateRequest13 {
    pub fn to_message(&self) -> Result<HandshakeMessage> {
        let mut b = Vec::new();
        b.put_vec8(&self.context);
        b.extend(encode_extension_list(&self.extensions)?);
        Ok(HandshakeMessage::new(HandshakeType::CertificateRequest, b))
    }

    pub fn decode_body(body: &[u8]) -> Result<Self> {
        let mut r = Reader::new(body);
        let context = r.vec8()?.to_vec();
        let extensions = read_extension_list(&mut r)?;
        r.finish("certificate request")?;
        Ok(Self {
            context,
            extensions,
        })
    }
}

/// TLS 1.2 Certificate body: `list<0..2^24-1>` of `cert<1..2^24-1>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate12 {
    pub certs: Vec<Vec<u8>>,
}

impl Certificate12 {
    pub fn encode_body(&self) -> Vec<u8> {
        let mut list = Vec::new();
        for c in &self.certs {
            list.put_vec24(c);
        }
        let mut b = Vec::with_capacity(list.len() + 3);
        b.put_vec24(&list);
        b
    }

    pub fn to_message(&self) -> HandshakeMessage {
        HandshakeMessage::new(HandshakeType::Certificate, self.encode_body())
    }

    pub fn decode_body(body: &[u8]) -> Result<Self> {
        let mut r = Reader::new(body);
        let mut list = Reader::new(r.vec24()?);
        r.finish("certificate list")?;
        let mut certs = Vec::new();
        while !list.is_empty() {
            certs.push(list.vec24()?.to_vec());
        }
        Ok(Self { certs })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertEntry13 {
    /// Empty for an abbreviated (cached) slot.
    pub cert: Vec<u8>,
    pub extensions: Vec<Extension>,
}

/// TLS 1.3 Certificate body: request context plus per-certificate
/// extensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate13 {
    pub context: Vec<u8>,
    pub entries: Vec<CertEntry13>,
}

impl Certificate13 {
    pub fn encode_body(&self) -> Result<Vec<u8>> {
        let mut list = Vec::new();
        for e in &self.entries {
            list.put_vec24(&e.cert);
            list.extend(encode_extension_list(&e.extensions)?);
        }
        let mut b = Vec::new();
        b.put_vec8(&self.context);
        b.put_vec24(&list);
        Ok(b)
    }

    pub fn to_message(&self) -> Result<HandshakeMessage> {
        Ok(HandshakeMessage::new(HandshakeType::Certificate, self.encode_body()?))
    }

    pub fn decode_body(body: &[u8]) -> Result<Self> {
        let mut r = Reader::new(body);
        let context = r.vec8()?.to_vec();
        let mut list = Reader::new(r.vec24()?);
        r.finish("certificate13")?;
        let mut entries = Vec::new();
        while !list.is_empty() {
            let cert = list.vec24()?.to_vec();
            let extensions = read_extension_list(&mut list)?;
            entries.push(CertEntry13 { cert, extensions });
        }
        Ok(Self { context, entries })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateVerify {
    pub scheme: u16,
    pub signature: Vec<u8>,
}

impl CertificateVerify {
    pub fn to_message(&self) -> HandshakeMessage {
        let mut b = Vec::with_capacity(4 + self.signature.len());
        b.put_u16(self.scheme);
        b.put_vec16(&self.signature);
        HandshakeMessage::new(HandshakeType::CertificateVerify, b)
    }

    pub fn decode_body(body: &[u8]) -> Result<Self> {
        let mut r = Reader::new(body);
        let scheme = r.u16()?;
        let signature = r.vec16()?.to_vec();
        r.finish("certificate verify")?;
        Ok(Self { scheme, signature })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewSessionTicket {
    pub lifetime: u32,
    pub age_add: u32,
    pub nonce: Vec<u8>,
    pub ticket: Vec<u8>,
}

impl NewSessionTicket {
    pub fn to_message(&self) -> HandshakeMessage {
        let mut b = Vec::new();
        b.put_u32(self.lifetime);
        b.put_u32(self.age_add);
        b.put_vec8(&self.nonce);
        b.put_vec16(&self.ticket);
        b.put_u16(0);
        HandshakeMessage::new(HandshakeType::NewSessionTicket, b)
    }

    pub fn decode_body(body: &[u8]) -> Result<Self> {
        let mut r = Reader::new(body);
        let lifetime = r.u32()?;
        let age_add = r.u32()?;
        let nonce = r.vec8()?.to_vec();
        let ticket = r.vec16()?.to_vec();
        let _ext = r.vec16()?;
        r.finish("new session ticket")?;
        Ok(Self {
            lifetime,
            age_add,
            nonce,
            ticket,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbbreviationKind {
    /// Server message replaced by `hash_len(1) || hash`.
    ServerByFingerprint,
    /// Client Certificate with an empty certificate list.
    ClientZeroLength,
}

pub fn build_abbreviated_certificate(
    kind: AbbreviationKind,
    fingerprint: Option<&[u8; FINGERPRINT_LEN]>,
) -> Result<HandshakeMessage> {
    match kind {
        AbbreviationKind::ServerByFingerprint => {
            let fp = fingerprint.ok_or(CodecError::MissingFingerprint)?;
            Ok(fingerprint_message(HandshakeType::Certificate, fp))
        }
        AbbreviationKind::ClientZeroLength => {
            Ok(Certificate12 { certs: Vec::new() }.to_message())
        }
    }
}

/// A cached server message replaced by its fingerprint. Used for both
/// Certificate and CertificateRequest.
pub fn fingerprint_message(
    msg_type: HandshakeType,
    fingerprint: &[u8; FINGERPRINT_LEN],
) -> HandshakeMessage {
    let mut b = Vec::with_capacity(1 + FINGERPRINT_LEN);
    b.put_vec8(fingerprint);
    HandshakeMessage::new(msg_type, b)
}

pub fn parse_fingerprint_body(body: &[u8]) -> Result<[u8; FINGERPRINT_LEN]> {
    let mut r = Reader::new(body);
    let h = r.vec8()?;
    r.finish("fingerprint message")?;
    if h.len() != FINGERPRINT_LEN {
        return Err(CodecError::Malformed("fingerprint length"));
    }
    let mut out = [0u8; FINGERPRINT_LEN];
    out.copy_from_slice(h);
    Ok(out)
}

/// True when the body is the `hash_len || hash` abbreviation form.
pub fn is_fingerprint_body(body: &[u8]) -> bool {
    body.len() == 1 + FINGERPRINT_LEN && body[0] as usize == FINGERPRINT_LEN
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{decode_handshake_message, ExtensionType};
    use proptest::prelude::*;

    #[test]
    fn server_abbreviation_is_37_bytes() {
        let fp = [0x5A; 32];
        let m = build_abbreviated_certificate(AbbreviationKind::ServerByFingerprint, Some(&fp)).unwrap();
        let enc = m.encode().unwrap();
        assert_eq!(enc.len(), 37);
        let back = decode_handshake_message(&enc).unwrap();
        assert_eq!(parse_fingerprint_body(&back.body).unwrap(), fp);
    }

    #[test]
    fn client_abbreviation_is_7_bytes() {
        let m = build_abbreviated_certificate(AbbreviationKind::ClientZeroLength, None).unwrap();
        assert_eq!(m.encode().unwrap().len(), 7);
        assert!(Certificate12::decode_body(&m.body).unwrap().certs.is_empty());
    }

    #[test]
    fn server_abbreviation_needs_fingerprint() {
        assert_eq!(
            build_abbreviated_certificate(AbbreviationKind::ServerByFingerprint, None),
            Err(CodecError::MissingFingerprint)
        );
    }

    #[test]
    fn key_exchange_and_verify_sizes() {
        let ske = ServerKeyExchange {
            named_group: 23,
            public: vec![4; 65],
            scheme: 0x0401,
            signature: vec![0; 256],
        };
        // 329-byte body for P-256 with a 2048-bit RSA signature
        assert_eq!(ske.to_message().body.len(), 329);
        assert_eq!(ServerKeyExchange::decode_body(&ske.to_message().body).unwrap(), ske);
        let cke = ClientKeyExchange { public: vec![4; 65] };
        assert_eq!(cke.to_message().encoded_len(), 70);
        let cv = CertificateVerify {
            scheme: 0x0401,
            signature: vec![1; 256],
        };
        assert_eq!(cv.to_message().encoded_len(), 264);
    }

    fn arb_exts() -> impl Strategy<Value = Vec<Extension>> {
        proptest::collection::vec(
            (any::<u16>(), proptest::collection::vec(any::<u8>(), 0..40))
                .prop_map(|(t, d)| Extension::new(ExtensionType(t), d)),
            0..4,
        )
    }

    proptest! {
        #[test]
        fn hellos_round_trip(
            random in any::<[u8; 32]>(),
            sid in proptest::collection::vec(any::<u8>(), 0..33),
            suites in proptest::collection::vec(any::<u16>(), 1..4),
            exts in arb_exts(),
        ) {
            let ch = ClientHello { legacy_version: TLS12, random, session_id: sid.clone(), cipher_suites: suites.clone(), compression: vec![0], extensions: exts.clone() };
            prop_assert_eq!(ClientHello::decode_body(&ch.encode_body().unwrap()).unwrap(), ch);
            let sh = ServerHello { legacy_version: TLS12, random, session_id: sid, cipher_suite: suites[0], compression: 0, extensions: exts };
            prop_assert_eq!(ServerHello::decode_body(&sh.encode_body().unwrap()).unwrap(), sh);
        }

        #[test]
        fn certificate_messages_round_trip(
            certs in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 1..100), 0..4),
            ctx in proptest::collection::vec(any::<u8>(), 0..8),
            exts in arb_exts(),
        ) {
            let c12 = Certificate12 { certs: certs.clone() };
            prop_assert_eq!(Certificate12::decode_body(&c12.encode_body()).unwrap(), c12);
            let c13 = Certificate13 {
                context: ctx,
                entries: certs.into_iter().map(|cert| CertEntry13 { cert, extensions: exts.clone() }).collect(),
            };
            prop_assert_eq!(Certificate13::decode_body(&c13.encode_body().unwrap()).unwrap(), c13);
        }

        #[test]
        fn misc_messages_round_trip(
            data in proptest::collection::vec(any::<u8>(), 0..200),
            a in any::<u32>(),
            algs in proptest::collection::vec(any::<u16>(), 0..12),
        ) {
            let nst = NewSessionTicket { lifetime: a, age_add: a.rotate_left(3), nonce: data.iter().take(16).copied().collect(), ticket: data.clone() };
            prop_assert_eq!(NewSessionTicket::decode_body(&nst.to_message().body).unwrap(), nst);
            let cr = CertificateRequest12 { cert_types: vec![1], signature_algorithms: algs, authorities: data.clone() };
            prop_assert_eq!(CertificateRequest12::decode_body(&cr.encode_body()).unwrap(), cr);
            let psk = crate::codec::PskOffer { identity: data.clone(), obfuscated_age: a, binder: vec![9; 48] };
            prop_assert_eq!(crate::codec::PskOffer::decode(&psk.encode()).unwrap(), psk);
        }
    }
}
