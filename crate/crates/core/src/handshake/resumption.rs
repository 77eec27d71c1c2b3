use std::collections::BTreeMap;

use rand_chacha::ChaCha20Rng;
use rand_core::RngCore;

use crate::caches::PeerId;
use crate::crypto::{prf, MasterSecret};

const NONCE_LEN: usize = 16;
const TAG_LEN: usize = 16;
pub(crate) const PSK_LEN: usize = 48;

/// Smallest sealed 1.3 ticket: nonce + psk + tag.
pub const MIN_TICKET_LEN: usize = NONCE_LEN + PSK_LEN + TAG_LEN;

/// Resumption state held by a client for one server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientSession {
    V12 { session_id: Vec<u8>, master: MasterSecret },
    V13 { psk: Vec<u8>, ticket: Vec<u8>, age_add: u32 },
}

#[derive(Debug, Clone, Default)]
pub struct ClientSessionStore {
    sessions: BTreeMap<PeerId, ClientSession>,
}

impl ClientSessionStore {
    pub fn get(&self, peer: &PeerId) -> Option<&ClientSession> {
        self.sessions.get(peer)
    }

    pub fn insert(&mut self, peer: PeerId, session: ClientSession) {
        self.sessions.insert(peer, session);
    }

    pub fn remove(&mut self, peer: &PeerId) -> Option<ClientSession> {
        self.sessions.remove(peer)
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }
}

/// Server side: a session-id table for 1.2 and a sealing key for the
/// stateless 1.3 tickets.
#[derive(Debug, Clone)]
pub struct ServerSessionStore {
    ids: BTreeMap<Vec<u8>, (MasterSecret, u64)>,
    ticket_key: [u8; 32],
    tick: u64,
}

impl ServerSessionStore {
    pub fn new(ticket_key: [u8; 32]) -> Self {
        Self {
            ids: BTreeMap::new(),
            ticket_key,
            tick: 0,
        }
    }

    pub fn get(&self, session_id: &[u8]) -> Option<&MasterSecret> {
        self.ids.get(session_id).map(|(m, _)| m)
    }

    pub fn insert(&mut self, session_id: Vec<u8>, master: MasterSecret) {
        self.tick += 1;
        self.ids.insert(session_id, (master, self.tick));
    }

    pub fn touch(&mut self, session_id: &[u8]) {
        self.tick += 1;
        if let Some(e) = self.ids.get_mut(session_id) {
            e.1 = self.tick;
        }
    }

    pub fn remove(&mut self, session_id: &[u8]) -> bool {
        self.ids.remove(session_id).is_some()
    }

    pub fn evict_lru(&mut self, max_entries: usize) -> usize {
        let mut n = 0;
        while self.ids.len() > max_entries {
            let k = self
                .ids
                .iter()
                .min_by_key(|(_, (_, t))| *t)
                .map(|(k, _)| k.clone())
                .expect("non-empty");
            self.ids.remove(&k);
            n += 1;
        }
        n
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Invalidates every outstanding 1.3 ticket.
    pub fn rotate_ticket_key(&mut self, key: [u8; 32]) {
        self.ticket_key = key;
    }

    /// `nonce || psk-and-filler XOR keystream || tag`, `total_len` bytes.
    pub(crate) fn seal(&self, psk: &[u8], total_len: usize, rng: &mut ChaCha20Rng) -> Vec<u8> {
        let total_len = total_len.max(MIN_TICKET_LEN);
        let mut nonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        let body_len = total_len - NONCE_LEN - TAG_LEN;
        let mut body = psk.to_vec();
        body.resize(body_len, 0);
        let stream = prf(&self.ticket_key, "ticket seal", &nonce, body_len);
        for (b, k) in body.iter_mut().zip(stream) {
            *b ^= k;
        }
        let mut out = nonce.to_vec();
        out.extend_from_slice(&body);
        let tag = prf(&self.ticket_key, "ticket tag", &out, TAG_LEN);
        out.extend_from_slice(&tag);
        out
    }

    pub(crate) fn open(&self, blob: &[u8]) -> Option<Vec<u8>> {
        if blob.len() < MIN_TICKET_LEN {
            return None;
        }
        let (sealed, tag) = blob.split_at(blob.len() - TAG_LEN);
        if prf(&self.ticket_key, "ticket tag", sealed, TAG_LEN) != tag {
            return None;
        }
        let (nonce, body) = sealed.split_at(NONCE_LEN);
        let stream = prf(&self.ticket_key, "ticket seal", nonce, body.len());
        Some(body.iter().zip(stream).take(PSK_LEN).map(|(b, k)| b ^ k).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::SeedableRng;

    #[test]
    fn seal_open_round_trip() {
        let s = ServerSessionStore::new([7; 32]);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let psk = [0x42u8; PSK_LEN];
        let blob = s.seal(&psk, 116, &mut rng);
        assert_eq!(blob.len(), 116);
        assert_eq!(s.open(&blob).unwrap(), psk);
        let mut bad = blob.clone();
        bad[20] ^= 1;
        assert!(s.open(&bad).is_none());
        let mut other = s.clone();
        other.rotate_ticket_key([8; 32]);
        assert!(other.open(&blob).is_none());
        assert_eq!(s.seal(&psk, 10, &mut rng).len(), MIN_TICKET_LEN);
    }

    #[test]
    fn session_table_lru() {
        let mut s = ServerSessionStore::new([0; 32]);
        let m = MasterSecret::from_prf(&[1; 48]);
        for i in 0..3u8 {
            s.insert(vec![i; 32], m.clone());
        }
        s.touch(&[0; 32]);
        assert_eq!(s.evict_lru(2), 1);
        assert!(s.get(&[1; 32]).is_none());
        assert!(s.get(&[0; 32]).is_some());
    }
}
