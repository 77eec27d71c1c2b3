//! Deterministic TLV certificates, chain construction, full and cached
//! validation, and the TLS 1.3 canonical form used as cache key.

mod tls13;
mod validate;

pub use tls13::{build_tls13_abbreviated_cert, convert_tls13_cert_msg, splice_cached_certificates};
pub use validate::{
    abbreviate, validate_cached, validate_chain, NeverRevoked, Rejection, RevocationCheck,
    RevocationInfo, RevokedSerials, ValidationCacheEntry, ValidationReport,
};

use rand_chacha::ChaCha20Rng;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{CodecError, Reader, WriteExt};
use crate::crypto::{provider, CryptoError, PrivateKey, PublicKey, Scheme};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertError {
    #[error("invalid validity window {0}..{1}")]
    InvalidWindow(u64, u64),
    #[error("chain length must be at least 1")]
    EmptyChain,
    #[error("certificate of {natural} bytes cannot be padded to {target}")]
    PadTooSmall { natural: usize, target: usize },
    #[error("chain was not validated")]
    NotValidated,
    #[error("malformed message: {0}")]
    MalformedMessage(#[from] CodecError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Inclusive validity window in unix seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validity {
    pub not_before: u64,
    pub not_after: u64,
}

impl Validity {
    pub fn new(not_before: u64, not_after: u64) -> Self {
        Self {
            not_before,
            not_after,
        }
    }

    pub fn contains(&self, t: u64) -> bool {
        self.not_before <= t && t <= self.not_after
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Certificate {
    pub serial: u64,
    pub subject: String,
    pub issuer: String,
    pub not_before: u64,
    pub not_after: u64,
    /// Scheme-tagged public key encoding.
    pub public_key: Vec<u8>,
    pub crl_distribution_points: Vec<String>,
    pub padding: Vec<u8>,
    pub signature: Vec<u8>,
}

impl std::fmt::Debug for Certificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Certificate")
            .field("serial", &self.serial)
            .field("subject", &self.subject)
            .field("issuer", &self.issuer)
            .field("window", &(self.not_before, self.not_after))
            .field("encoded_len", &self.encoded_len())
            .finish()
    }
}

impl Certificate {
    /// Everything the signature covers.
    pub fn tbs_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(self.encoded_len());
        b.put_u64(self.serial);
        b.put_vec16(self.subject.as_bytes());
        b.put_vec16(self.issuer.as_bytes());
        b.put_u64(self.not_before);
        b.put_u64(self.not_after);
        b.put_vec16(&self.public_key);
        b.put_u8(self.crl_distribution_points.len() as u8);
        for dp in &self.crl_distribution_points {
            b.put_vec16(dp.as_bytes());
        }
        b.put_vec16(&self.padding);
        b
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut b = self.tbs_bytes();
        b.put_vec16(&self.signature);
        b
    }

    pub fn encoded_len(&self) -> usize {
        8 + 2
            + self.subject.len()
            + 2
            + self.issuer.len()
            + 16
            + 2
            + self.public_key.len()
            + 1
            + self
                .crl_distribution_points
                .iter()
                .map(|d| 2 + d.len())
                .sum::<usize>()
            + 2
            + self.padding.len()
            + 2
            + self.signature.len()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let serial = r.u64()?;
        let subject = utf8(r.vec16()?)?;
        let issuer = utf8(r.vec16()?)?;
        let not_before = r.u64()?;
        let not_after = r.u64()?;
        let public_key = r.vec16()?.to_vec();
        let n = r.u8()?;
        let mut crl_distribution_points = Vec::with_capacity(n as usize);
        for _ in 0..n {
            crl_distribution_points.push(utf8(r.vec16()?)?);
        }
        let padding = r.vec16()?.to_vec();
        let signature = r.vec16()?.to_vec();
        r.finish("certificate")?;
        Ok(Self {
            serial,
            subject,
            issuer,
            not_before,
            not_after,
            public_key,
            crl_distribution_points,
            padding,
            signature,
        })
    }

    pub fn validity(&self) -> Validity {
        Validity::new(self.not_before, self.not_after)
    }

    pub fn public_key(&self) -> Result<PublicKey, CryptoError> {
        PublicKey::decode(&self.public_key)
    }

    pub fn verify_signed_by(&self, issuer_key: &PublicKey) -> bool {
        crate::crypto::verify(issuer_key, &self.tbs_bytes(), &self.signature)
    }

    pub fn is_self_signed(&self) -> bool {
        self.subject == self.issuer
            && self
                .public_key()
                .map(|k| self.verify_signed_by(&k))
                .unwrap_or(false)
    }
}

fn utf8(b: &[u8]) -> Result<String, CodecError> {
    String::from_utf8(b.to_vec()).map_err(|_| CodecError::Malformed("utf8 string"))
}

/// Leaf first, root last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateChain {
    certs: Vec<Certificate>,
}

impl CertificateChain {
    pub fn new(certs: Vec<Certificate>) -> Result<Self, CertError> {
        if certs.is_empty() {
            return Err(CertError::EmptyChain);
        }
        Ok(Self { certs })
    }

    pub fn certs(&self) -> &[Certificate] {
        &self.certs
    }

    pub fn len(&self) -> usize {
        self.certs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn leaf(&self) -> &Certificate {
        &self.certs[0]
    }

    pub fn root(&self) -> &Certificate {
        self.certs.last().expect("non-empty")
    }

    /// Certificates put on the wire: the root is dropped unless it is also
    /// the leaf.
    pub fn transmitted(&self) -> &[Certificate] {
        if self.certs.len() > 1 {
            &self.certs[..self.certs.len() - 1]
        } else {
            &self.certs
        }
    }

    pub fn transmitted_encodings(&self) -> Vec<Vec<u8>> {
        self.transmitted().iter().map(Certificate::encode).collect()
    }

    /// Rebuilds a chain from received certificates.
    pub fn from_encodings(encodings: &[Vec<u8>]) -> Result<Self, CertError> {
        let certs = encodings
            .iter()
            .map(|e| Certificate::decode(e))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(certs)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ChainParams {
    pub scheme: Scheme,
    pub key_bits: usize,
    pub length: usize,
    pub validity: Validity,
    /// Per-certificate windows, leaf first. Overrides `validity` if set.
    pub windows: Option<Vec<Validity>>,
    /// Target encoded size of every certificate in the chain.
    pub pad_to: Option<usize>,
    pub name: String,
    pub crl_distribution_point: Option<String>,
}

impl ChainParams {
    pub fn new(scheme: Scheme, key_bits: usize, length: usize, validity: Validity) -> Self {
        Self {
            scheme,
            key_bits,
            length,
            validity,
            windows: None,
            pad_to: None,
            name: "device".into(),
            crl_distribution_point: None,
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn padded(mut self, pad_to: usize) -> Self {
        self.pad_to = Some(pad_to);
        self
    }

    pub fn with_windows(mut self, windows: Vec<Validity>) -> Self {
        self.windows = Some(windows);
        self
    }

    pub fn with_crl(mut self, dp: &str) -> Self {
        self.crl_distribution_point = Some(dp.into());
        self
    }
}

/// A chain plus the private key of each certificate, same order.
#[derive(Debug, Clone)]
pub struct Credential {
    pub chain: CertificateChain,
    pub keys: Vec<PrivateKey>,
}

impl Credential {
    pub fn leaf_key(&self) -> &PrivateKey {
        &self.keys[0]
    }

    pub fn trust_anchor(&self) -> &Certificate {
        self.chain.root()
    }
}

fn subject_name(base: &str, index: usize, length: usize) -> String {
    if index == 0 && length == 1 {
        base.to_string()
    } else if index == 0 {
        format!("{base} leaf")
    } else if index == length - 1 {
        format!("{base} root ca")
    } else {
        format!("{base} issuing ca {index}")
    }
}

pub fn make_chain(params: &ChainParams, rng: &mut ChaCha20Rng) -> Result<Credential, CertError> {
    if params.length == 0 {
        return Err(CertError::EmptyChain);
    }
    let windows = match &params.windows {
        Some(w) if w.len() == params.length => w.clone(),
        Some(_) => return Err(CertError::EmptyChain),
        None => vec![params.validity; params.length],
    };
    for w in &windows {
        if w.not_before >= w.not_after {
            return Err(CertError::InvalidWindow(w.not_before, w.not_after));
        }
    }
    let prov = provider(params.scheme);
    let keys = (0..params.length)
        .map(|_| prov.generate(rng, params.key_bits))
        .collect::<Result<Vec<_>, _>>()?;
    let sig_len = prov.signature_len(params.key_bits);

    let mut certs = Vec::with_capacity(params.length);
    for i in 0..params.length {
        let issuer_idx = (i + 1).min(params.length - 1);
        let mut cert = Certificate {
            serial: rng.next_u64(),
            subject: subject_name(&params.name, i, params.length),
            issuer: subject_name(&params.name, issuer_idx, params.length),
            not_before: windows[i].not_before,
            not_after: windows[i].not_after,
            public_key: keys[i].public().encode(),
            crl_distribution_points: params.crl_distribution_point.iter().cloned().collect(),
            padding: Vec::new(),
            signature: vec![0; sig_len],
        };
        if let Some(target) = params.pad_to {
            let natural = cert.encoded_len();
            if natural > target {
                return Err(CertError::PadTooSmall { natural, target });
            }
            cert.padding = vec![0xA5; target - natural];
        }
        cert.signature = keys[issuer_idx].sign(&cert.tbs_bytes())?;
        debug_assert_eq!(cert.signature.len(), sig_len);
        certs.push(cert);
    }
    Ok(Credential {
        chain: CertificateChain::new(certs)?,
        keys,
    })
}
