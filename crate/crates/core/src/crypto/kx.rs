use p256::elliptic_curve::sec1::ToEncodedPoint;
use p256::{NonZeroScalar, PublicKey as P256Public};
use rand_chacha::ChaCha20Rng;

use super::CryptoError;

pub const P256_POINT_LEN: usize = 65;

/// Ephemeral ECDHE share on P-256.
#[derive(Clone)]
pub struct EphemeralKey {
    secret: NonZeroScalar,
    public: [u8; P256_POINT_LEN],
}

impl std::fmt::Debug for EphemeralKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("EphemeralKey(..)")
    }
}

impl EphemeralKey {
    pub fn generate(rng: &mut ChaCha20Rng) -> Self {
        let secret = NonZeroScalar::random(rng);
        let point = P256Public::from_secret_scalar(&secret).to_encoded_point(false);
        let mut public = [0u8; P256_POINT_LEN];
        public.copy_from_slice(point.as_bytes());
        Self { secret, public }
    }

    /// Uncompressed SEC1 point.
    pub fn public_bytes(&self) -> &[u8; P256_POINT_LEN] {
        &self.public
    }

    pub fn agree(&self, peer_public: &[u8]) -> Result<[u8; 32], CryptoError> {
        let peer = P256Public::from_sec1_bytes(peer_public).map_err(|_| CryptoError::KeyAgreement)?;
        let shared = p256::ecdh::diffie_hellman(self.secret, peer.as_affine());
        let mut out = [0u8; 32];
        out.copy_from_slice(shared.raw_secret_bytes());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::SeedableRng;

    #[test]
    fn both_sides_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let a = EphemeralKey::generate(&mut rng);
        let b = EphemeralKey::generate(&mut rng);
        assert_eq!(a.public_bytes()[0], 0x04);
        assert_eq!(a.agree(b.public_bytes()).unwrap(), b.agree(a.public_bytes()).unwrap());
    }

    #[test]
    fn invalid_point_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let a = EphemeralKey::generate(&mut rng);
        assert_eq!(a.agree(&[4u8; 65]), Err(CryptoError::KeyAgreement));
        assert_eq!(a.agree(&[]), Err(CryptoError::KeyAgreement));
    }
}
