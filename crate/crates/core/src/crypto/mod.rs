//! Deterministic primitives: PRF, fingerprints, implicit ticket derivation,
//! key schedule and Finished MACs, plus signature and key-exchange providers.

mod kx;
mod sig;

pub use kx::EphemeralKey;
pub use sig::{verify,
    provider, EcdsaP256Provider, NullProvider, PrivateKey, PublicKey, RsaProvider, Scheme,
    SignatureProvider,
};

use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::ObjectType;

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("key generation failed: {0}")]
    KeyGen(String),
    #[error("unsupported key size {0} for {1:?}")]
    KeySize(usize, Scheme),
    #[error("key does not belong to scheme {0:?}")]
    SchemeMismatch(Scheme),
    #[error("malformed public key")]
    MalformedKey,
    #[error("unknown scheme tag {0}")]
    UnknownScheme(u8),
    #[error("signing failed: {0}")]
    Sign(String),
    #[error("key agreement failed")]
    KeyAgreement,
}

pub const MASTER_SECRET_LEN: usize = 48;
pub const TICKET_LEN: usize = 8;
pub const FINGERPRINT_LEN: usize = 32;
pub const VERIFY_DATA_LEN: usize = 12;

pub const TICKET_LABEL: &str = "ssc_ticket_label";

fn hmac(key: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    for p in parts {
        mac.update(p);
    }
    mac.finalize().into_bytes().into()
}

/// TLS 1.2 PRF with P_SHA256.
pub fn prf(secret: &[u8], label: &str, seed: &[u8], out_len: usize) -> Vec<u8> {
    let mut label_seed = Vec::with_capacity(label.len() + seed.len());
    label_seed.extend_from_slice(label.as_bytes());
    label_seed.extend_from_slice(seed);

    let mut out = Vec::with_capacity(out_len + 32);
    // A(0) = seed, A(i) = HMAC(secret, A(i-1))
    let mut a = hmac(secret, &[&label_seed]);
    while out.len() < out_len {
        out.extend_from_slice(&hmac(secret, &[&a, &label_seed]));
        a = hmac(secret, &[&a]);
    }
    out.truncate(out_len);
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub [u8; FINGERPRINT_LEN]);

impl Fingerprint {
    pub fn as_bytes(&self) -> &[u8; FINGERPRINT_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fingerprint(")?;
        for b in &self.0[..6] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// SHA-256 over the canonical encoding of a cached object.
pub fn fingerprint(object: &[u8]) -> Fingerprint {
    Fingerprint(Sha256::digest(object).into())
}

pub fn sha256(data: &[u8]) -> [u8; 32] {
    Sha256::digest(data).into()
}

#[derive(Clone, PartialEq, Eq)]
pub struct MasterSecret([u8; MASTER_SECRET_LEN]);

impl MasterSecret {
    pub fn as_bytes(&self) -> &[u8; MASTER_SECRET_LEN] {
        &self.0
    }

    pub(crate) fn from_prf(bytes: &[u8]) -> Self {
        let mut m = [0u8; MASTER_SECRET_LEN];
        m.copy_from_slice(&bytes[..MASTER_SECRET_LEN]);
        Self(m)
    }
}

impl std::fmt::Debug for MasterSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("MasterSecret(..)")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ticket(pub [u8; TICKET_LEN]);

impl Ticket {
    pub fn as_bytes(&self) -> &[u8; TICKET_LEN] {
        &self.0
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        <[u8; TICKET_LEN]>::try_from(bytes).ok().map(Ticket)
    }
}

impl std::fmt::Debug for Ticket {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Ticket(")?;
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

pub fn derive_master_secret(
    pre_master: &[u8],
    client_random: &[u8; 32],
    server_random: &[u8; 32],
) -> MasterSecret {
    derive_master_secret_labeled(pre_master, "master secret", client_random, server_random)
}

pub(crate) fn derive_master_secret_labeled(
    pre_master: &[u8],
    label: &str,
    client_random: &[u8; 32],
    server_random: &[u8; 32],
) -> MasterSecret {
    let mut seed = [0u8; 64];
    seed[..32].copy_from_slice(client_random);
    seed[32..].copy_from_slice(server_random);
    MasterSecret::from_prf(&prf(pre_master, label, &seed, MASTER_SECRET_LEN))
}

/// Implicit ticket: both peers compute it from the master secret of the
/// handshake that just completed; it is never transmitted at creation.
pub fn derive_ticket(
    master: &MasterSecret,
    object_type: ObjectType,
    object_hash: &Fingerprint,
) -> Ticket {
    let mut seed = Vec::with_capacity(1 + FINGERPRINT_LEN);
    seed.push(object_type.0);
    seed.extend_from_slice(&object_hash.0);
    let out = prf(&master.0, TICKET_LABEL, &seed, TICKET_LEN);
    let mut t = [0u8; TICKET_LEN];
    t.copy_from_slice(&out);
    Ticket(t)
}

pub fn finished_mac(
    master: &MasterSecret,
    role_label: &str,
    transcript_hash: &[u8; 32],
) -> [u8; VERIFY_DATA_LEN] {
    let out = prf(&master.0, role_label, transcript_hash, VERIFY_DATA_LEN);
    let mut v = [0u8; VERIFY_DATA_LEN];
    v.copy_from_slice(&out);
    v
}

/// Finished verify data of arbitrary length; the 1.3-style flow uses the
/// hash length of its suite.
pub fn finished_mac_len(
    master: &MasterSecret,
    role_label: &str,
    transcript_hash: &[u8; 32],
    len: usize,
) -> Vec<u8> {
    prf(&master.0, role_label, transcript_hash, len)
}

#[derive(Clone, PartialEq, Eq)]
pub struct SessionKeys {
    pub client_write: [u8; 32],
    pub server_write: [u8; 32],
}

impl std::fmt::Debug for SessionKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "SessionKeys {{ client: {:02x}{:02x}.., server: {:02x}{:02x}.. }}",
            self.client_write[0], self.client_write[1], self.server_write[0], self.server_write[1]
        )
    }
}

pub fn key_block(
    master: &MasterSecret,
    client_random: &[u8; 32],
    server_random: &[u8; 32],
) -> SessionKeys {
    let mut seed = [0u8; 64];
    seed[..32].copy_from_slice(server_random);
    seed[32..].copy_from_slice(client_random);
    let kb = prf(&master.0, "key expansion", &seed, 64);
    let mut keys = SessionKeys {
        client_write: [0; 32],
        server_write: [0; 32],
    };
    keys.client_write.copy_from_slice(&kb[..32]);
    keys.server_write.copy_from_slice(&kb[32..]);
    keys
}

/// Running hash over handshake messages in transmission order.
#[derive(Clone, Default)]
pub struct TranscriptHash {
    hasher: Sha256,
}

impl TranscriptHash {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, encoded_message: &[u8]) {
        self.hasher.update(encoded_message);
    }

    pub fn current(&self) -> [u8; 32] {
        self.hasher.clone().finalize().into()
    }
}
