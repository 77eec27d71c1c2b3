//! Client object cache (fingerprint side), client ticket cache and server
//! object cache (ticket side).

mod client;
mod server;

pub use client::{ClientObjectCache, ClientTicketCache, TicketEntry};
pub use server::{ServerEntry, ServerObjectCache, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::CodecError;

/// Many readers or one writer.
pub type Shared<T> = Arc<RwLock<T>>;

pub fn shared<T>(value: T) -> Shared<T> {
    Arc::new(RwLock::new(value))
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad snapshot magic")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    BadVersion(u8),
    #[error("corrupt snapshot: {0}")]
    Corrupt(#[from] CodecError),
}

/// How a client names the server it talks to. SNI wins over the address.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PeerId {
    ServerName(String),
    Address(Vec<u8>),
}

impl PeerId {
    pub fn resolve(server_name: Option<&str>, address: &[u8]) -> Self {
        match server_name {
            Some(n) if !n.is_empty() => PeerId::ServerName(n.to_string()),
            _ => PeerId::Address(address.to_vec()),
        }
    }

    pub fn encoded_len(&self) -> usize {
        1 + 2
            + match self {
                PeerId::ServerName(s) => s.len(),
                PeerId::Address(a) => a.len(),
            }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheMemory {
    pub per_entry: Vec<usize>,
    pub total: usize,
}

impl CacheMemory {
    fn from_sizes(per_entry: Vec<usize>) -> Self {
        let total = per_entry.iter().sum();
        Self { per_entry, total }
    }
}
