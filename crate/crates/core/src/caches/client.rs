use std::collections::{BTreeMap, BTreeSet};

use super::{CacheMemory, PeerId};
use crate::certs::ValidationCacheEntry;
use crate::codec::{CachedObject, ObjectType};
use crate::crypto::{fingerprint, Fingerprint, Ticket};

type ObjectKey = (ObjectType, Fingerprint);

#[derive(Debug, Clone)]
struct ObjectRecord {
    bytes: Vec<u8>,
    /// Result of validating the chain inside a cached Certificate.
    validation: Option<ValidationCacheEntry>,
    last_used: u64,
}

/// Server messages cached by the client. Objects are deduplicated in the
/// primary index; the peer index scopes them per server.
#[derive(Debug, Clone, Default)]
pub struct ClientObjectCache {
    objects: BTreeMap<ObjectKey, ObjectRecord>,
    peers: BTreeMap<PeerId, BTreeSet<ObjectKey>>,
    tick: u64,
}

impl ClientObjectCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    fn next_tick(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }

    /// Offer list for `peer`; empty when nothing is scoped to it.
    pub fn offer(&self, peer: &PeerId) -> Vec<CachedObject> {
        self.peers
            .get(peer)
            .map(|keys| {
                keys.iter()
                    .map(|(t, fp)| CachedObject {
                        object_type: *t,
                        hash: fp.0.to_vec(),
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn entries_for(&self, peer: &PeerId) -> Vec<(ObjectType, Fingerprint)> {
        self.peers
            .get(peer)
            .map(|k| k.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn get(&self, object_type: ObjectType, fp: &Fingerprint) -> Option<&[u8]> {
        self.objects.get(&(object_type, *fp)).map(|r| r.bytes.as_slice())
    }

    pub fn validation(&self, object_type: ObjectType, fp: &Fingerprint) -> Option<&ValidationCacheEntry> {
        self.objects.get(&(object_type, *fp)).and_then(|r| r.validation.as_ref())
    }

    /// No-op if the object is not cached.
    pub fn set_validation(&mut self, object_type: ObjectType, fp: &Fingerprint, entry: ValidationCacheEntry) {
        if let Some(r) = self.objects.get_mut(&(object_type, *fp)) {
            r.validation = Some(entry);
        }
    }

    pub fn touch(&mut self, object_type: ObjectType, fp: &Fingerprint) {
        let t = self.next_tick();
        if let Some(r) = self.objects.get_mut(&(object_type, *fp)) {
            r.last_used = t;
        }
    }

    /// Stores one object for `peer`, replacing any older object of the same
    /// type for that peer. Identical objects are shared across peers.
    pub fn insert(&mut self, peer: &PeerId, object_type: ObjectType, bytes: &[u8]) -> Fingerprint {
        let fp = fingerprint(bytes);
        let key = (object_type, fp);
        let t = self.next_tick();
        self.objects
            .entry(key)
            .and_modify(|r| r.last_used = t)
            .or_insert_with(|| ObjectRecord {
                bytes: bytes.to_vec(),
                validation: None,
                last_used: t,
            });
        let refs = self.peers.entry(peer.clone()).or_default();
        let stale: Vec<ObjectKey> = refs
            .iter()
            .filter(|(ty, f)| *ty == object_type && *f != fp)
            .copied()
            .collect();
        refs.insert(key);
        for k in stale {
            if let Some(refs) = self.peers.get_mut(peer) {
                refs.remove(&k);
            }
            self.drop_if_unreferenced(&k);
        }
        fp
    }

    /// Caches the full Certificate and, when present, CertificateRequest
    /// messages received from `peer`.
    pub fn insert_server_messages(
        &mut self,
        peer: &PeerId,
        cert_msg: &[u8],
        cert_req_msg: Option<&[u8]>,
    ) -> Vec<(ObjectType, Fingerprint)> {
        let mut out = vec![(ObjectType::CERTIFICATE, self.insert(peer, ObjectType::CERTIFICATE, cert_msg))];
        if let Some(cr) = cert_req_msg {
            out.push((
                ObjectType::CERTIFICATE_REQUEST,
                self.insert(peer, ObjectType::CERTIFICATE_REQUEST, cr),
            ));
        }
        out
    }

    fn drop_if_unreferenced(&mut self, key: &ObjectKey) {
        if !self.peers.values().any(|s| s.contains(key)) {
            self.objects.remove(key);
        }
    }

    pub fn remove(&mut self, object_type: ObjectType, fp: &Fingerprint) -> bool {
        let key = (object_type, *fp);
        let existed = self.objects.remove(&key).is_some();
        self.peers.retain(|_, refs| {
            refs.remove(&key);
            !refs.is_empty()
        });
        existed
    }

    /// Least-recently-used eviction down to `max_entries` objects.
    pub fn evict_lru(&mut self, max_entries: usize) -> Vec<(ObjectType, Fingerprint)> {
        let max_entries = max_entries.max(1);
        let mut removed = Vec::new();
        while self.objects.len() > max_entries {
            let key = *self
                .objects
                .iter()
                .min_by_key(|(_, r)| r.last_used)
                .map(|(k, _)| k)
                .expect("non-empty");
            self.remove(key.0, &key.1);
            removed.push(key);
        }
        removed
    }

    /// Per object: type(1) + hash_len(1) + fingerprint + u24 length + bytes
    /// [+ validation entry].
    pub fn memory(&self) -> CacheMemory {
        CacheMemory::from_sizes(
            self.objects
                .values()
                .map(|r| 1 + 1 + 32 + 3 + r.bytes.len() + r.validation.as_ref().map_or(0, |v| v.encoded_len()))
                .collect(),
        )
    }

    /// Every peer reference resolves in the primary index.
    pub fn check_integrity(&self) -> bool {
        self.peers
            .values()
            .all(|refs| !refs.is_empty() && refs.iter().all(|k| self.objects.contains_key(k)))
    }

    pub fn peer_count(&self) -> usize {
        self.peers.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TicketEntry {
    pub object_type: ObjectType,
    pub peer: PeerId,
    /// Fingerprint of the client's own credential object.
    pub credential: Fingerprint,
    last_used: u64,
}

/// Tickets the client holds for its own static objects, scoped per server.
/// At most one ticket per (peer, type, object).
#[derive(Debug, Clone, Default)]
pub struct ClientTicketCache {
    tickets: BTreeMap<Ticket, TicketEntry>,
    tick: u64,
}

impl ClientTicketCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tickets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tickets.is_empty()
    }

    /// Tickets scoped to `peer`, newest first within a type.
    pub fn offer(&self, peer: &PeerId) -> Vec<(ObjectType, Ticket)> {
        let mut v: Vec<(&Ticket, &TicketEntry)> =
            self.tickets.iter().filter(|(_, e)| &e.peer == peer).collect();
        v.sort_by(|a, b| {
            a.1.object_type
                .cmp(&b.1.object_type)
                .then(b.1.last_used.cmp(&a.1.last_used))
        });
        v.into_iter().map(|(t, e)| (e.object_type, *t)).collect()
    }

    pub fn get(&self, ticket: &Ticket) -> Option<&TicketEntry> {
        self.tickets.get(ticket)
    }

    /// Installs the ticket derived after a completed handshake and retires
    /// the previous one for the same (peer, type, object).
    pub fn rotate(
        &mut self,
        peer: &PeerId,
        object_type: ObjectType,
        credential: Fingerprint,
        ticket: Ticket,
    ) -> Vec<Ticket> {
        let retired: Vec<Ticket> = self
            .tickets
            .iter()
            .filter(|(_, e)| &e.peer == peer && e.object_type == object_type && e.credential == credential)
            .map(|(t, _)| *t)
            .collect();
        for t in &retired {
            self.tickets.remove(t);
        }
        self.tick += 1;
        self.tickets.insert(
            ticket,
            TicketEntry {
                object_type,
                peer: peer.clone(),
                credential,
                last_used: self.tick,
            },
        );
        retired
    }

    pub fn retire(&mut self, ticket: &Ticket) -> bool {
        self.tickets.remove(ticket).is_some()
    }

    pub fn evict_lru(&mut self, max_entries: usize) -> Vec<Ticket> {
        let max_entries = max_entries.max(1);
        let mut removed = Vec::new();
        while self.tickets.len() > max_entries {
            let t = *self
                .tickets
                .iter()
                .min_by_key(|(_, e)| e.last_used)
                .map(|(t, _)| t)
                .expect("non-empty");
            self.tickets.remove(&t);
            removed.push(t);
        }
        removed
    }

    /// Per ticket: ticket + type + peer id + credential fingerprint.
    pub fn memory(&self) -> CacheMemory {
        CacheMemory::from_sizes(
            self.tickets
                .values()
                .map(|e| 8 + 1 + e.peer.encoded_len() + 32)
                .collect(),
        )
    }

    /// At most one ticket per (peer, type, credential).
    pub fn check_integrity(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.tickets
            .values()
            .all(|e| seen.insert((e.peer.clone(), e.object_type, e.credential)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn peer(n: u8) -> PeerId {
        PeerId::ServerName(format!("server-{n}.example"))
    }

    #[test]
    fn fresh_cache_offers_nothing() {
        let c = ClientObjectCache::new();
        assert!(c.offer(&peer(1)).is_empty());
        assert!(ClientTicketCache::new().offer(&peer(1)).is_empty());
    }

    #[test]
    fn server_messages_scoped_per_peer() {
        let mut c = ClientObjectCache::new();
        c.insert_server_messages(&peer(1), b"cert A", Some(b"req A"));
        c.insert_server_messages(&peer(2), b"cert B", Some(b"req B"));
        assert_eq!(c.offer(&peer(1)).len(), 2);
        let b_hashes: Vec<_> = c.offer(&peer(2)).into_iter().map(|o| o.hash).collect();
        assert!(c.offer(&peer(1)).iter().all(|o| !b_hashes.contains(&o.hash)));
        assert_eq!(c.offer(&peer(1))[0].object_type, ObjectType::CERTIFICATE);
    }

    #[test]
    fn shared_objects_deduplicate() {
        let mut c = ClientObjectCache::new();
        c.insert_server_messages(&peer(1), b"same cert", Some(b"same req"));
        c.insert_server_messages(&peer(2), b"same cert", Some(b"same req"));
        assert_eq!(c.len(), 2);
        assert_eq!(c.peer_count(), 2);
        c.insert_server_messages(&peer(2), b"same cert", Some(b"same req"));
        assert_eq!(c.len(), 2);
        assert!(c.check_integrity());
    }

    #[test]
    fn newer_object_replaces_older_for_peer() {
        let mut c = ClientObjectCache::new();
        let old = c.insert(&peer(1), ObjectType::CERTIFICATE, b"v1");
        let new = c.insert(&peer(1), ObjectType::CERTIFICATE, b"v2");
        assert_eq!(c.len(), 1);
        assert!(c.get(ObjectType::CERTIFICATE, &old).is_none());
        assert_eq!(c.get(ObjectType::CERTIFICATE, &new), Some(&b"v2"[..]));
    }

    #[test]
    fn lru_eviction() {
        let mut c = ClientObjectCache::new();
        let a = c.insert(&peer(1), ObjectType::CERTIFICATE, b"a");
        let b = c.insert(&peer(2), ObjectType::CERTIFICATE, b"b");
        c.touch(ObjectType::CERTIFICATE, &a);
        c.insert(&peer(3), ObjectType::CERTIFICATE, b"c");
        let removed = c.evict_lru(2);
        assert_eq!(removed, vec![(ObjectType::CERTIFICATE, b)]);
        assert!(c.offer(&peer(2)).is_empty());
        assert!(c.check_integrity());
    }

    #[test]
    fn memory_is_linear() {
        let mut c = ClientObjectCache::new();
        assert_eq!(c.memory().total, 0);
        for i in 0..5u8 {
            c.insert(&peer(i), ObjectType::CERTIFICATE, &[i; 100]);
        }
        let m = c.memory();
        assert_eq!(m.total, 5 * m.per_entry[0]);
    }

    #[test]
    fn ticket_rotation_retires_previous() {
        let mut t = ClientTicketCache::new();
        let cred = fingerprint(b"client chain");
        assert!(t.rotate(&peer(1), ObjectType::CERTIFICATE, cred, Ticket([1; 8])).is_empty());
        let retired = t.rotate(&peer(1), ObjectType::CERTIFICATE, cred, Ticket([2; 8]));
        assert_eq!(retired, vec![Ticket([1; 8])]);
        assert_eq!(t.offer(&peer(1)), vec![(ObjectType::CERTIFICATE, Ticket([2; 8]))]);
        t.rotate(&peer(2), ObjectType::CERTIFICATE, cred, Ticket([3; 8]));
        assert_eq!(t.offer(&peer(1)).len(), 1);
        assert_eq!(t.len(), 2);
        assert!(t.check_integrity());
        let m = t.memory();
        assert_eq!(m.per_entry[0], m.per_entry[1]);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Insert(u8, bool, u8),
        Touch(u8),
        Evict(usize),
        Rotate(u8, u8, u64),
        Retire(u64),
        EvictTickets(usize),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0u8..6, any::<bool>(), 0u8..8).prop_map(|(p, cr, o)| Op::Insert(p, cr, o)),
            (0u8..8).prop_map(Op::Touch),
            (1usize..6).prop_map(Op::Evict),
            (0u8..6, 0u8..3, any::<u64>()).prop_map(|(p, c, t)| Op::Rotate(p, c, t)),
            any::<u64>().prop_map(Op::Retire),
            (1usize..6).prop_map(Op::EvictTickets),
        ]
    }

    proptest! {
        #[test]
        fn random_op_sequences_keep_integrity(ops in proptest::collection::vec(op(), 1..80)) {
            let mut objs = ClientObjectCache::new();
            let mut tickets = ClientTicketCache::new();
            let mut issued = Vec::new();
            for o in ops {
                match o {
                    Op::Insert(p, cr, obj) => {
                        let ty = if cr { ObjectType::CERTIFICATE_REQUEST } else { ObjectType::CERTIFICATE };
                        objs.insert(&peer(p), ty, &[obj; 16]);
                    }
                    Op::Touch(obj) => objs.touch(ObjectType::CERTIFICATE, &fingerprint(&[obj; 16])),
                    Op::Evict(n) => {
                        objs.evict_lru(n);
                        prop_assert!(objs.len() <= n);
                    }
                    Op::Rotate(p, c, t) => {
                        let tk = Ticket(t.to_be_bytes());
                        tickets.rotate(&peer(p), ObjectType::CERTIFICATE, fingerprint(&[c]), tk);
                        issued.push(tk);
                    }
                    Op::Retire(i) => {
                        if !issued.is_empty() {
                            tickets.retire(&issued[i as usize % issued.len()]);
                        }
                    }
                    Op::EvictTickets(n) => {
                        tickets.evict_lru(n);
                        prop_assert!(tickets.len() <= n);
                    }
                }
                prop_assert!(objs.check_integrity());
                prop_assert!(tickets.check_integrity());
                for p in 0..6u8 {
                    for (_, t) in tickets.offer(&peer(p)) {
                        prop_assert_eq!(&tickets.get(&t).unwrap().peer, &peer(p));
                    }
                    for o in objs.offer(&peer(p)) {
                        let mut fp = [0u8; 32];
                        fp.copy_from_slice(&o.hash);
                        prop_assert!(objs.get(o.object_type, &Fingerprint(fp)).is_some());
                        prop_assert!(objs.entries_for(&peer(p)).contains(&(o.object_type, Fingerprint(fp))));
                    }
                }
            }
        }
    }
}
