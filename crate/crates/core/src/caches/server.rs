use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use super::{CacheError, CacheMemory};
use crate::certs::{validate_cached, RevocationCheck, ValidationCacheEntry};
use crate::codec::{ObjectType, Reader, SscSelection, WriteExt};
use crate::crypto::{Fingerprint, Ticket};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"HSC\x01";
pub const SNAPSHOT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerEntry {
    pub object_type: ObjectType,
    pub fingerprint: Fingerprint,
    pub validation: ValidationCacheEntry,
    /// Canonical client object; only kept when the cache retains objects.
    pub object: Option<Vec<u8>>,
    last_used: u64,
}

impl ServerEntry {
    /// ticket(8) + type(1) + fingerprint(32) + validation entry + flag(1)
    /// [+ u24 length + object].
    pub fn record_len(&self) -> usize {
        8 + 1 + 32 + self.validation.encoded_len() + 1 + self.object.as_ref().map_or(0, |o| 3 + o.len())
    }
}

/// Ticket-keyed cache of validated client chains.
#[derive(Debug, Clone, Default)]
pub struct ServerObjectCache {
    entries: BTreeMap<Ticket, ServerEntry>,
    retain_objects: bool,
    tick: u64,
}

impl ServerObjectCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also keep the full client object next to its validation entry.
    pub fn retaining_objects() -> Self {
        Self {
            retain_objects: true,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, ticket: &Ticket) -> Option<&ServerEntry> {
        self.entries.get(ticket)
    }

    pub fn tickets(&self) -> impl Iterator<Item = &Ticket> {
        self.entries.keys()
    }

    /// Stores a freshly derived ticket. A colliding ticket for a different
    /// object replaces the old entry.
    pub fn insert(
        &mut self,
        ticket: Ticket,
        object_type: ObjectType,
        fingerprint: Fingerprint,
        validation: ValidationCacheEntry,
        object: &[u8],
    ) {
        self.tick += 1;
        if let Some(old) = self.entries.get(&ticket) {
            if old.fingerprint != fingerprint || old.object_type != object_type {
                log::warn!("ticket {ticket:?} collided with a different cached object; replacing");
            }
        }
        self.entries.insert(
            ticket,
            ServerEntry {
                object_type,
                fingerprint,
                validation,
                object: self.retain_objects.then(|| object.to_vec()),
                last_used: self.tick,
            },
        );
    }

    pub fn touch(&mut self, ticket: &Ticket) {
        self.tick += 1;
        if let Some(e) = self.entries.get_mut(ticket) {
            e.last_used = self.tick;
        }
    }

    pub fn remove(&mut self, ticket: &Ticket) -> Option<ServerEntry> {
        self.entries.remove(ticket)
    }

    /// Picks at most one offered ticket per object type: the lowest index
    /// that is cached (exact match) and whose entry still passes the
    /// time/revocation re-check.
    pub fn select(
        &self,
        offered: &[(ObjectType, Ticket)],
        now: u64,
        revocation: &dyn RevocationCheck,
    ) -> Vec<SscSelection> {
        let mut chosen = BTreeSet::new();
        let mut out = Vec::new();
        for (i, (ty, ticket)) in offered.iter().enumerate() {
            if chosen.contains(ty) || i > u16::MAX as usize {
                continue;
            }
            let Some(e) = self.entries.get(ticket) else {
                continue;
            };
            if e.object_type != *ty || !validate_cached(&e.validation, now, revocation).accepted {
                continue;
            }
            chosen.insert(*ty);
            out.push(SscSelection {
                object_type: *ty,
                ticket_index: i as u16,
            });
        }
        out
    }

    pub fn evict_lru(&mut self, max_entries: usize) -> Vec<Ticket> {
        let max_entries = max_entries.max(1);
        let mut removed = Vec::new();
        while self.entries.len() > max_entries {
            let t = *self
                .entries
                .iter()
                .min_by_key(|(_, e)| e.last_used)
                .map(|(t, _)| t)
                .expect("non-empty");
            self.entries.remove(&t);
            removed.push(t);
        }
        removed
    }

    pub fn memory(&self) -> CacheMemory {
        CacheMemory::from_sizes(self.entries.values().map(ServerEntry::record_len).collect())
    }

    pub fn encode_snapshot(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(9 + self.memory().total);
        b.extend_from_slice(&SNAPSHOT_MAGIC);
        b.put_u8(SNAPSHOT_VERSION);
        b.put_u32(self.entries.len() as u32);
        for (ticket, e) in &self.entries {
            b.extend_from_slice(&ticket.0);
            b.put_u8(e.object_type.0);
            b.extend_from_slice(&e.fingerprint.0);
            b.extend_from_slice(&e.validation.encode());
            match &e.object {
                None => b.put_u8(0),
                Some(o) => {
                    b.put_u8(1);
                    b.put_vec24(o);
                }
            }
        }
        b
    }

    pub fn decode_snapshot(bytes: &[u8]) -> Result<Self, CacheError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != SNAPSHOT_MAGIC {
            return Err(CacheError::BadMagic);
        }
        let version = r.u8()?;
        if version != SNAPSHOT_VERSION {
            return Err(CacheError::BadVersion(version));
        }
        let count = r.u32()?;
        let mut cache = Self::new();
        for _ in 0..count {
            let ticket = Ticket::from_slice(r.take(8)?).expect("8 bytes");
            let object_type = ObjectType(r.u8()?);
            let mut fp = [0u8; 32];
            fp.copy_from_slice(r.take(32)?);
            let validation = ValidationCacheEntry::read(&mut r)?;
            let object = match r.u8()? {
                0 => None,
                _ => {
                    cache.retain_objects = true;
                    Some(r.vec24()?.to_vec())
                }
            };
            cache.tick += 1;
            cache.entries.insert(
                ticket,
                ServerEntry {
                    object_type,
                    fingerprint: Fingerprint(fp),
                    validation,
                    object,
                    last_used: cache.tick,
                },
            );
        }
        r.finish("snapshot")?;
        Ok(cache)
    }

    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        std::fs::File::create(path)?.write_all(&self.encode_snapshot())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CacheError> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::decode_snapshot(&buf)
    }
}
