//! Wire types for the handshake stack.
//!
//! Every structure here has a bit-exact big-endian encoding. Framing follows
//! TLS conventions (1-byte type + 3-byte length for handshake messages,
//! 2-byte type + 2-byte length for extensions) but the artifact does not
//! aim for interoperability with real TLS implementations.

mod ext;
mod messages;

pub use ext::*;
pub use messages::*;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("input truncated: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(&'static str),
    #[error("extension data of {0} bytes exceeds 65535")]
    OversizeExtension(usize),
    #[error("handshake body of {0} bytes exceeds 2^24-1")]
    OversizeBody(usize),
    #[error("server abbreviation requires a fingerprint")]
    MissingFingerprint,
    #[error("unknown handshake message type {0}")]
    UnknownMessageType(u8),
    #[error("malformed {0}")]
    Malformed(&'static str),
}

pub type Result<T> = std::result::Result<T, CodecError>;

const MAX_U24: usize = (1 << 24) - 1;

/// Cursor over a borrowed byte slice.
#[derive(Debug, Clone)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(CodecError::Truncated {
                needed: n - self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    pub fn u24(&mut self) -> Result<usize> {
        let b = self.take(3)?;
        Ok(((b[0] as usize) << 16) | ((b[1] as usize) << 8) | b[2] as usize)
    }

    pub fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_be_bytes(a))
    }

    pub fn vec8(&mut self) -> Result<&'a [u8]> {
        let n = self.u8()? as usize;
        self.take(n)
    }

    pub fn vec16(&mut self) -> Result<&'a [u8]> {
        let n = self.u16()? as usize;
        self.take(n)
    }

    pub fn vec24(&mut self) -> Result<&'a [u8]> {
        let n = self.u24()?;
        self.take(n)
    }

    /// Fails with `LengthMismatch` if unread bytes remain.
    pub fn finish(self, what: &'static str) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(CodecError::LengthMismatch(what))
        }
    }
}

/// Length-prefix helpers over `Vec<u8>`.
pub trait WriteExt {
    fn put_u8(&mut self, v: u8);
    fn put_u16(&mut self, v: u16);
    fn put_u24(&mut self, v: usize);
    fn put_u32(&mut self, v: u32);
    fn put_u64(&mut self, v: u64);
    fn put_vec8(&mut self, data: &[u8]);
    fn put_vec16(&mut self, data: &[u8]);
    fn put_vec24(&mut self, data: &[u8]);
}

impl WriteExt for Vec<u8> {
    fn put_u8(&mut self, v: u8) {
        self.push(v);
    }

    fn put_u16(&mut self, v: u16) {
        self.extend_from_slice(&v.to_be_bytes());
    }

    fn put_u24(&mut self, v: usize) {
        debug_assert!(v <= MAX_U24);
        self.extend_from_slice(&[(v >> 16) as u8, (v >> 8) as u8, v as u8]);
    }

    fn put_u32(&mut self, v: u32) {
        self.extend_from_slice(&v.to_be_bytes());
    }

    fn put_u64(&mut self, v: u64) {
        self.extend_from_slice(&v.to_be_bytes());
    }

    fn put_vec8(&mut self, data: &[u8]) {
        debug_assert!(data.len() <= u8::MAX as usize);
        self.push(data.len() as u8);
        self.extend_from_slice(data);
    }

    fn put_vec16(&mut self, data: &[u8]) {
        debug_assert!(data.len() <= u16::MAX as usize);
        self.put_u16(data.len() as u16);
        self.extend_from_slice(data);
    }

    fn put_vec24(&mut self, data: &[u8]) {
        self.put_u24(data.len());
        self.extend_from_slice(data);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum HandshakeType {
    ClientHello,
    ServerHello,
    NewSessionTicket,
    EncryptedExtensions,
    Certificate,
    ServerKeyExchange,
    CertificateRequest,
    ServerHelloDone,
    CertificateVerify,
    ClientKeyExchange,
    Finished,
}

impl HandshakeType {
    pub const ALL: [HandshakeType; 11] = [
        HandshakeType::ClientHello,
        HandshakeType::ServerHello,
        HandshakeType::NewSessionTicket,
        HandshakeType::EncryptedExtensions,
        HandshakeType::Certificate,
        HandshakeType::ServerKeyExchange,
        HandshakeType::CertificateRequest,
        HandshakeType::ServerHelloDone,
        HandshakeType::CertificateVerify,
        HandshakeType::ClientKeyExchange,
        HandshakeType::Finished,
    ];

    pub fn code(self) -> u8 {
        match self {
            HandshakeType::ClientHello => 1,
            HandshakeType::ServerHello => 2,
            HandshakeType::NewSessionTicket => 4,
            HandshakeType::EncryptedExtensions => 8,
            HandshakeType::Certificate => 11,
            HandshakeType::ServerKeyExchange => 12,
            HandshakeType::CertificateRequest => 13,
            HandshakeType::ServerHelloDone => 14,
            HandshakeType::CertificateVerify => 15,
            HandshakeType::ClientKeyExchange => 16,
            HandshakeType::Finished => 20,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.code() == code)
            .ok_or(CodecError::UnknownMessageType(code))
    }
}

/// A framed handshake message: `type(1) || length(3) || body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandshakeMessage {
    pub msg_type: HandshakeType,
    pub body: Vec<u8>,
}

impl HandshakeMessage {
    pub const HEADER_LEN: usize = 4;

    pub fn new(msg_type: HandshakeType, body: Vec<u8>) -> Self {
        Self { msg_type, body }
    }

    /// Size of the encoded message at the handshake layer.
    pub fn encoded_len(&self) -> usize {
        Self::HEADER_LEN + self.body.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        encode_handshake_message(self)
    }
}

pub fn encode_handshake_message(msg: &HandshakeMessage) -> Result<Vec<u8>> {
    if msg.body.len() > MAX_U24 {
        return Err(CodecError::OversizeBody(msg.body.len()));
    }
    let mut out = Vec::with_capacity(msg.encoded_len());
    out.put_u8(msg.msg_type.code());
    out.put_vec24(&msg.body);
    Ok(out)
}

/// Decodes exactly one handshake message; trailing bytes are an error.
pub fn decode_handshake_message(bytes: &[u8]) -> Result<HandshakeMessage> {
    let mut r = Reader::new(bytes);
    let msg = read_handshake_message(&mut r)?;
    r.finish("trailing bytes after handshake message")?;
    Ok(msg)
}

pub fn read_handshake_message(r: &mut Reader<'_>) -> Result<HandshakeMessage> {
    let msg_type = HandshakeType::from_code(r.u8()?)?;
    let body = r.vec24()?.to_vec();
    Ok(HandshakeMessage { msg_type, body })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn server_hello_done_is_four_bytes() {
        let m = HandshakeMessage::new(HandshakeType::ServerHelloDone, vec![]);
        let enc = m.encode().unwrap();
        assert_eq!(enc, vec![14, 0, 0, 0]);
    }

    #[test]
    fn finished_with_twelve_bytes_is_sixteen() {
        let m = HandshakeMessage::new(HandshakeType::Finished, vec![0xAB; 12]);
        assert_eq!(m.encode().unwrap().len(), 16);
    }

    #[test]
    fn oversize_body_rejected() {
        let m = HandshakeMessage::new(HandshakeType::Certificate, vec![0; MAX_U24 + 1]);
        assert_eq!(m.encode(), Err(CodecError::OversizeBody(MAX_U24 + 1)));
    }

    #[test]
    fn unknown_type_and_truncation() {
        assert_eq!(
            decode_handshake_message(&[99, 0, 0, 0]),
            Err(CodecError::UnknownMessageType(99))
        );
        assert!(matches!(
            decode_handshake_message(&[20, 0, 0, 5, 1, 2]),
            Err(CodecError::Truncated { needed: 3 })
        ));
        assert!(matches!(
            decode_handshake_message(&[14, 0, 0, 0, 7]),
            Err(CodecError::LengthMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn handshake_message_round_trip(
            idx in 0usize..HandshakeType::ALL.len(),
            body in proptest::collection::vec(any::<u8>(), 0..600),
        ) {
            let m = HandshakeMessage::new(HandshakeType::ALL[idx], body);
            let enc = m.encode().unwrap();
            prop_assert_eq!(enc.len(), m.encoded_len());
            prop_assert_eq!(decode_handshake_message(&enc).unwrap(), m.clone());
            prop_assert_eq!(m.encode().unwrap(), enc);
        }
    }
}
