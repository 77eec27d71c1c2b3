use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{cell_seed, BenchError};
use crate::certs::{make_chain, ChainParams, Credential, Validity};
use crate::crypto::Scheme;
use crate::handshake::{Auth, ClientEndpoint, Mode, Role, ServerEndpoint, SessionConfig, Version, DEFAULT_NOW};

/// Encoded size every certificate of the RSA-2048 profiles is padded to.
pub const RSA2048_CERT_SIZE: usize = 781;
pub const SINGLE_SERVER_CERT_SIZE: usize = 781;
pub const SINGLE_CLIENT_CERT_SIZE: usize = 775;
pub const RSA4096_CERT_SIZE: usize = 1290;

pub const CRL_URL: &str = "http://crl.plant.example/issuing.crl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChainProfile {
    Rsa2048x3,
    Rsa4096x3,
    Ecc256x3,
    SingleRsa2048,
}

impl ChainProfile {
    pub const ALL: [ChainProfile; 4] = [
        ChainProfile::Rsa2048x3,
        ChainProfile::Rsa4096x3,
        ChainProfile::Ecc256x3,
        ChainProfile::SingleRsa2048,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ChainProfile::Rsa2048x3 => "rsa2048x3",
            ChainProfile::Rsa4096x3 => "rsa4096x3",
            ChainProfile::Ecc256x3 => "ecc256x3",
            ChainProfile::SingleRsa2048 => "paper-fig1",
        }
    }

    /// Chain parameters for one side. The 4096-bit profile only changes the
    /// server chain.
    pub fn params(self, role: Role) -> ChainParams {
        let validity = Validity::new(DEFAULT_NOW - 365 * 86_400, DEFAULT_NOW + 10 * 365 * 86_400);
        let name = match role {
            Role::Server => "gateway",
            Role::Client => "sensor",
        };
        let p = match (self, role) {
            (ChainProfile::SingleRsa2048, Role::Server) => {
                ChainParams::new(Scheme::Rsa, 2048, 1, validity).padded(SINGLE_SERVER_CERT_SIZE)
            }
            (ChainProfile::SingleRsa2048, Role::Client) => {
                ChainParams::new(Scheme::Rsa, 2048, 1, validity).padded(SINGLE_CLIENT_CERT_SIZE)
            }
            (ChainProfile::Rsa4096x3, Role::Server) => {
                ChainParams::new(Scheme::Rsa, 4096, 3, validity).padded(RSA4096_CERT_SIZE)
            }
            (ChainProfile::Rsa2048x3 | ChainProfile::Rsa4096x3, _) => {
                ChainParams::new(Scheme::Rsa, 2048, 3, validity).padded(RSA2048_CERT_SIZE)
            }
            (ChainProfile::Ecc256x3, _) => ChainParams::new(Scheme::EcdsaP256, 256, 3, validity),
        };
        p.named(name).with_crl(CRL_URL)
    }
}

impl std::fmt::Display for ChainProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ChainProfile {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChainProfile::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| BenchError::InvalidSpec(format!("unknown chain profile {s:?}")))
    }
}

type CredentialKey = (String, u64);

fn credential_cache() -> &'static Mutex<HashMap<CredentialKey, Arc<Credential>>> {
    static CACHE: OnceLock<Mutex<HashMap<CredentialKey, Arc<Credential>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Deterministic credential for `params` and `seed`. Key generation is the
/// expensive part of a grid, so results are memoized process-wide; the cache
/// is transparent because generation is a pure function of its key.
pub fn credential_for(params: &ChainParams, seed: u64) -> Result<Arc<Credential>, BenchError> {
    let key = (serde_json::to_string(params).expect("params serialize"), seed);
    if let Some(c) = credential_cache().lock().expect("credential cache").get(&key) {
        return Ok(c.clone());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cell_seed(seed, &key.0));
    let cred = Arc::new(make_chain(params, &mut rng)?);
    Ok(credential_cache()
        .lock()
        .expect("credential cache")
        .entry(key)
        .or_insert(cred)
        .clone())
}

pub fn credential(profile: ChainProfile, role: Role, seed: u64) -> Result<Arc<Credential>, BenchError> {
    credential_for(&profile.params(role), seed)
}

/// A fresh client/server pair with empty caches.
pub fn endpoints(
    version: Version,
    mode: Mode,
    chain: ChainProfile,
    auth: Auth,
    seed: u64,
) -> Result<(ClientEndpoint, ServerEndpoint), BenchError> {
    let server_cred = credential(chain, Role::Server, seed)?;
    let client_cred = credential(chain, Role::Client, seed)?;
    let mut cfg = SessionConfig::new(version, mode);
    cfg.auth = auth;
    let client = ClientEndpoint::new(cfg, Some(client_cred.clone()), server_cred.trust_anchor().clone());
    let server = ServerEndpoint::new(cfg, server_cred, Some(client_cred.trust_anchor().clone()));
    Ok((client, server))
}
