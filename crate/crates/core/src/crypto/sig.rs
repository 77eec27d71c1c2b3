use p256::ecdsa::signature::{Signer, Verifier};
use rand_chacha::ChaCha20Rng;
use rsa::traits::PublicKeyParts;
use rsa::{BigUint, Pkcs1v15Sign, RsaPrivateKey, RsaPublicKey};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::{prf, sha256, CryptoError};
use crate::codec::{Reader, WriteExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    Rsa,
    EcdsaP256,
    /// Fast stand-in with RSA-shaped keys and signatures.
    Null,
}

impl Scheme {
    /// Signature scheme code placed in CertificateVerify.
    pub fn code(self) -> u16 {
        match self {
            Scheme::Rsa => 0x0401,
            Scheme::EcdsaP256 => 0x0403,
            Scheme::Null => 0xFE01,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Scheme::Rsa => 1,
            Scheme::EcdsaP256 => 2,
            Scheme::Null => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self, CryptoError> {
        match tag {
            1 => Ok(Scheme::Rsa),
            2 => Ok(Scheme::EcdsaP256),
            3 => Ok(Scheme::Null),
            t => Err(CryptoError::UnknownScheme(t)),
        }
    }
}

const RSA_EXPONENT: [u8; 3] = [0x01, 0x00, 0x01];
const NULL_SECRET_LEN: usize = 32;

#[derive(Clone, PartialEq, Eq)]
pub enum PublicKey {
    Rsa(RsaPublicKey),
    EcdsaP256(p256::ecdsa::VerifyingKey),
    Null { secret: [u8; NULL_SECRET_LEN], bits: usize },
}

impl std::fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PublicKey({:?}, {} bits)", self.scheme(), self.bits())
    }
}

impl PublicKey {
    pub fn scheme(&self) -> Scheme {
        match self {
            PublicKey::Rsa(_) => Scheme::Rsa,
            PublicKey::EcdsaP256(_) => Scheme::EcdsaP256,
            PublicKey::Null { .. } => Scheme::Null,
        }
    }

    pub fn bits(&self) -> usize {
        match self {
            PublicKey::Rsa(k) => k.size() * 8,
            PublicKey::EcdsaP256(_) => 256,
            PublicKey::Null { bits, .. } => *bits,
        }
    }

    /// `tag || material`; RSA and Null share the `n`, `e` layout.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.scheme().tag()];
        match self {
            PublicKey::Rsa(k) => {
                out.put_vec16(&k.n().to_bytes_be());
                out.put_vec8(&k.e().to_bytes_be());
            }
            PublicKey::EcdsaP256(k) => {
                out.extend_from_slice(k.to_encoded_point(false).as_bytes());
            }
            PublicKey::Null { secret, bits } => {
                let mut n = vec![0u8; bits / 8];
                n[..NULL_SECRET_LEN].copy_from_slice(secret);
                out.put_vec16(&n);
                out.put_vec8(&RSA_EXPONENT);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        let scheme = Scheme::from_tag(r.u8().map_err(|_| CryptoError::MalformedKey)?)?;
        let key = match scheme {
            Scheme::Rsa => {
                let n = r.vec16().map_err(|_| CryptoError::MalformedKey)?;
                let e = r.vec8().map_err(|_| CryptoError::MalformedKey)?;
                let k = RsaPublicKey::new(BigUint::from_bytes_be(n), BigUint::from_bytes_be(e))
                    .map_err(|_| CryptoError::MalformedKey)?;
                PublicKey::Rsa(k)
            }
            Scheme::EcdsaP256 => {
                let point = r.take(65).map_err(|_| CryptoError::MalformedKey)?;
                let k = p256::ecdsa::VerifyingKey::from_sec1_bytes(point)
                    .map_err(|_| CryptoError::MalformedKey)?;
                PublicKey::EcdsaP256(k)
            }
            Scheme::Null => {
                let n = r.vec16().map_err(|_| CryptoError::MalformedKey)?;
                let _e = r.vec8().map_err(|_| CryptoError::MalformedKey)?;
                if n.len() < NULL_SECRET_LEN {
                    return Err(CryptoError::MalformedKey);
                }
                let mut secret = [0u8; NULL_SECRET_LEN];
                secret.copy_from_slice(&n[..NULL_SECRET_LEN]);
                PublicKey::Null {
                    secret,
                    bits: n.len() * 8,
                }
            }
        };
        if !r.is_empty() {
            return Err(CryptoError::MalformedKey);
        }
        Ok(key)
    }
}

#[derive(Clone)]
pub enum PrivateKey {
    Rsa(Box<RsaPrivateKey>),
    EcdsaP256(p256::ecdsa::SigningKey),
    Null { secret: [u8; NULL_SECRET_LEN], bits: usize },
}

impl std::fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PrivateKey({:?}, {} bits)", self.scheme(), self.bits())
    }
}

impl PrivateKey {
    pub fn scheme(&self) -> Scheme {
        match self {
            PrivateKey::Rsa(_) => Scheme::Rsa,
            PrivateKey::EcdsaP256(_) => Scheme::EcdsaP256,
            PrivateKey::Null { .. } => Scheme::Null,
        }
    }

    pub fn bits(&self) -> usize {
        match self {
            PrivateKey::Rsa(k) => k.size() * 8,
            PrivateKey::EcdsaP256(_) => 256,
            PrivateKey::Null { bits, .. } => *bits,
        }
    }

    pub fn public(&self) -> PublicKey {
        match self {
            PrivateKey::Rsa(k) => PublicKey::Rsa(k.to_public_key()),
            PrivateKey::EcdsaP256(k) => PublicKey::EcdsaP256(*k.verifying_key()),
            PrivateKey::Null { secret, bits } => PublicKey::Null {
                secret: *secret,
                bits: *bits,
            },
        }
    }

    pub fn sign(&self, msg: &[u8]) -> Result<Vec<u8>, CryptoError> {
        provider(self.scheme()).sign(self, msg)
    }
}

pub trait SignatureProvider: Send + Sync {
    fn scheme(&self) -> Scheme;
    fn generate(&self, rng: &mut ChaCha20Rng, bits: usize) -> Result<PrivateKey, CryptoError>;
    fn sign(&self, key: &PrivateKey, msg: &[u8]) -> Result<Vec<u8>, CryptoError>;
    fn verify(&self, key: &PublicKey, msg: &[u8], signature: &[u8]) -> bool;
    fn signature_len(&self, bits: usize) -> usize;
}

pub fn provider(scheme: Scheme) -> &'static dyn SignatureProvider {
    match scheme {
        Scheme::Rsa => &RsaProvider,
        Scheme::EcdsaP256 => &EcdsaP256Provider,
        Scheme::Null => &NullProvider,
    }
}

/// RSASSA-PKCS1-v1_5 with SHA-256.
pub struct RsaProvider;

impl SignatureProvider for RsaProvider {
    fn scheme(&self) -> Scheme {
        Scheme::Rsa
    }

    fn generate(&self, rng: &mut ChaCha20Rng, bits: usize) -> Result<PrivateKey, CryptoError> {
        if !(1024..=8192).contains(&bits) || !bits.is_multiple_of(8) {
            return Err(CryptoError::KeySize(bits, Scheme::Rsa));
        }
        let k = RsaPrivateKey::new(rng, bits).map_err(|e| CryptoError::KeyGen(e.to_string()))?;
        Ok(PrivateKey::Rsa(Box::new(k)))
    }

    fn sign(&self, key: &PrivateKey, msg: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let PrivateKey::Rsa(k) = key else {
            return Err(CryptoError::SchemeMismatch(Scheme::Rsa));
        };
        k.sign(Pkcs1v15Sign::new::<Sha256>(), &sha256(msg))
            .map_err(|e| CryptoError::Sign(e.to_string()))
    }

    fn verify(&self, key: &PublicKey, msg: &[u8], signature: &[u8]) -> bool {
        let PublicKey::Rsa(k) = key else {
            return false;
        };
        k.verify(Pkcs1v15Sign::new::<Sha256>(), &sha256(msg), signature)
            .is_ok()
    }

    fn signature_len(&self, bits: usize) -> usize {
        bits / 8
    }
}

/// ECDSA over P-256 with SHA-256; fixed 64-byte `r || s` signatures.
pub struct EcdsaP256Provider;

impl SignatureProvider for EcdsaP256Provider {
    fn scheme(&self) -> Scheme {
        Scheme::EcdsaP256
    }

    fn generate(&self, rng: &mut ChaCha20Rng, bits: usize) -> Result<PrivateKey, CryptoError> {
        if bits != 256 {
            return Err(CryptoError::KeySize(bits, Scheme::EcdsaP256));
        }
        Ok(PrivateKey::EcdsaP256(p256::ecdsa::SigningKey::random(rng)))
    }

    fn sign(&self, key: &PrivateKey, msg: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let PrivateKey::EcdsaP256(k) = key else {
            return Err(CryptoError::SchemeMismatch(Scheme::EcdsaP256));
        };
        let sig: p256::ecdsa::Signature = k.try_sign(msg).map_err(|e| CryptoError::Sign(e.to_string()))?;
        Ok(sig.to_bytes().to_vec())
    }

    fn verify(&self, key: &PublicKey, msg: &[u8], signature: &[u8]) -> bool {
        let PublicKey::EcdsaP256(k) = key else {
            return false;
        };
        match p256::ecdsa::Signature::from_slice(signature) {
            Ok(sig) => k.verify(msg, &sig).is_ok(),
            Err(_) => false,
        }
    }

    fn signature_len(&self, _bits: usize) -> usize {
        64
    }
}

/// Keyed-PRF "signature". The public key carries the secret, so it proves
/// nothing; it exists to run large grids without RSA cost while keeping
/// RSA-identical byte counts.
pub struct NullProvider;

impl NullProvider {
    fn tag(secret: &[u8], bits: usize, msg: &[u8]) -> Vec<u8> {
        prf(secret, "null signature", &sha256(msg), bits / 8)
    }
}

impl SignatureProvider for NullProvider {
    fn scheme(&self) -> Scheme {
        Scheme::Null
    }

    fn generate(&self, rng: &mut ChaCha20Rng, bits: usize) -> Result<PrivateKey, CryptoError> {
        use rand_core::RngCore;
        if bits < NULL_SECRET_LEN * 8 || !bits.is_multiple_of(8) {
            return Err(CryptoError::KeySize(bits, Scheme::Null));
        }
        let mut secret = [0u8; NULL_SECRET_LEN];
        rng.fill_bytes(&mut secret);
        // keep the leading byte nonzero so the encoded modulus has full width
        secret[0] |= 0x80;
        Ok(PrivateKey::Null { secret, bits })
    }

    fn sign(&self, key: &PrivateKey, msg: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let PrivateKey::Null { secret, bits } = key else {
            return Err(CryptoError::SchemeMismatch(Scheme::Null));
        };
        Ok(Self::tag(secret, *bits, msg))
    }

    fn verify(&self, key: &PublicKey, msg: &[u8], signature: &[u8]) -> bool {
        let PublicKey::Null { secret, bits } = key else {
            return false;
        };
        Self::tag(secret, *bits, msg) == signature
    }

    fn signature_len(&self, bits: usize) -> usize {
        bits / 8
    }
}

pub fn verify(key: &PublicKey, msg: &[u8], signature: &[u8]) -> bool {
    provider(key.scheme()).verify(key, msg, signature)
}
