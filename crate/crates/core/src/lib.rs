//! Miniature TLS handshake stack with bidirectional handshake caching,
//! a byte-accounting network simulator and an experiment harness.

pub mod codec;
pub mod crypto;
pub mod certs;
pub mod caches;
pub mod handshake;
pub mod netsim;
pub mod bench;
pub mod par;
