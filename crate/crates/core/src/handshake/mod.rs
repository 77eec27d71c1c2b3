//! Client and server handshake state machines for 1.2- and 1.3-style flows
//! under four configurations, plus the driver that runs them over a
//! simulated link and commits cache updates on success.

mod client;
mod resumption;
mod server;

pub use resumption::{ClientSession, ClientSessionStore, ServerSessionStore, MIN_TICKET_LEN};

use std::sync::Arc;

use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caches::{shared, ClientObjectCache, ClientTicketCache, PeerId, ServerObjectCache, Shared};
use crate::certs::{Certificate, Credential, NeverRevoked, Rejection, RevocationCheck};
use crate::codec::{decode_handshake_message, CodecError, HandshakeMessage, HandshakeType};
use crate::crypto::{finished_mac, finished_mac_len, MasterSecret, SessionKeys, TranscriptHash};
use crate::netsim::{message_wire_sizes, ByteLedger, Connection, LinkProfile, NetError, OutgoingMessage, Protection};

use client::ClientMachine;
use server::ServerMachine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Version {
    V12,
    V13,
}

impl Version {
    pub fn label(self) -> &'static str {
        match self {
            Version::V12 => "1.2",
            Version::V13 => "1.3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Vanilla,
    Rfc7924,
    Bithac,
    SessionResumption,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Vanilla, Mode::Rfc7924, Mode::Bithac, Mode::SessionResumption];

    /// Fingerprint caching of server messages.
    pub fn caches_server_info(self) -> bool {
        matches!(self, Mode::Rfc7924 | Mode::Bithac)
    }

    /// Ticket caching of the client certificate.
    pub fn caches_client_info(self) -> bool {
        self == Mode::Bithac
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Vanilla => "vanilla",
            Mode::Rfc7924 => "rfc7924",
            Mode::Bithac => "bithac",
            Mode::SessionResumption => "resume",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Auth {
    Mutual,
    ServerOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub version: Version,
    pub mode: Mode,
    pub auth: Auth,
    /// Unix seconds used for every validity check.
    pub now: u64,
    /// Size of the opaque 1.3 resumption ticket the server issues.
    pub resumption_ticket_len: usize,
    /// Keep revocation identifiers in validation cache entries.
    pub cache_revocation_info: bool,
}

pub const DEFAULT_NOW: u64 = 1_700_000_000;
pub const DEFAULT_TICKET_LEN: usize = 116;

impl SessionConfig {
    pub fn new(version: Version, mode: Mode) -> Self {
        Self {
            version,
            mode,
            auth: Auth::Mutual,
            now: DEFAULT_NOW,
            resumption_ticket_len: DEFAULT_TICKET_LEN,
            cache_revocation_info: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Client,
    Server,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Abort {
    #[error("finished verify data mismatch")]
    FinishedMismatch,
    #[error("peer certificate rejected: {0:?}")]
    CertificateRejected(Rejection),
    #[error("decode error: {0}")]
    DecodeError(String),
    #[error("selected cache object is missing")]
    CacheObjectMissing,
    #[error("signature verification failed")]
    BadSignature,
    #[error("unexpected {0:?}")]
    UnexpectedMessage(HandshakeType),
    #[error("client and server disagree on protocol version")]
    VersionMismatch,
    #[error("crypto failure: {0}")]
    Crypto(String),
    #[error(transparent)]
    Link(#[from] NetError),
}

impl From<CodecError> for Abort {
    fn from(e: CodecError) -> Self {
        Abort::DecodeError(e.to_string())
    }
}

impl From<crate::crypto::CryptoError> for Abort {
    fn from(e: crate::crypto::CryptoError) -> Self {
        Abort::Crypto(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// All asymmetric verifications: chain links, anchor, SKE/CertificateVerify.
    pub signature_verifications: u32,
    /// The subset spent on certificate chains.
    pub chain_verifications: u32,
    pub signatures_created: u32,
    pub cache_hits: u32,
    pub cache_misses: u32,
}

impl Counters {
    pub fn add(&mut self, o: &Counters) {
        self.signature_verifications += o.signature_verifications;
        self.chain_verifications += o.chain_verifications;
        self.signatures_created += o.signatures_created;
        self.cache_hits += o.cache_hits;
        self.cache_misses += o.cache_misses;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub sender: Role,
    pub msg_type: HandshakeType,
    pub handshake_len: usize,
    /// TLS-layer bytes including record framing.
    pub wire_len: usize,
    pub abbreviated: bool,
    #[serde(skip)]
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEffects {
    pub client_objects_stored: usize,
    pub client_ticket: Option<[u8; 8]>,
    pub server_ticket: Option<[u8; 8]>,
    pub session_stored: bool,
}

#[derive(Debug, Clone)]
pub struct HandshakeOutcome {
    pub completed: bool,
    pub version: Version,
    pub resumed: bool,
    pub client_keys: SessionKeys,
    pub server_keys: SessionKeys,
    pub transcript: Vec<TranscriptEntry>,
    pub ledger: ByteLedger,
    pub client: Counters,
    pub server: Counters,
    pub effects: CacheEffects,
    pub client_random: [u8; 32],
    pub server_random: [u8; 32],
    pub client_transcript_hash: [u8; 32],
    pub server_transcript_hash: [u8; 32],
    master: MasterSecret,
}

impl HandshakeOutcome {
    pub fn tls_bytes(&self) -> u64 {
        self.ledger.tls_bytes
    }

    pub fn message_types(&self) -> Vec<(Role, HandshakeType)> {
        self.transcript.iter().map(|e| (e.sender, e.msg_type)).collect()
    }

    pub fn wire_len_of(&self, sender: Role, t: HandshakeType) -> Option<usize> {
        self.transcript
            .iter()
            .find(|e| e.sender == sender && e.msg_type == t)
            .map(|e| e.wire_len)
    }

    /// Diagnostic dump; message bytes are omitted.
    pub fn transcript_json(&self) -> String {
        serde_json::to_string_pretty(&self.transcript).expect("transcript serializes")
    }
}

/// Per-side operation counts.
pub fn verification_count(outcome: &HandshakeOutcome) -> (Counters, Counters) {
    (outcome.client, outcome.server)
}

/// Recomputes `role`'s Finished verify data over `messages` (encoded
/// handshake messages in transmission order, ending just before that
/// Finished) with the outcome's master secret.
pub fn recompute_finished(outcome: &HandshakeOutcome, role: Role, messages: &[Vec<u8>]) -> Vec<u8> {
    let mut t = TranscriptHash::new();
    for m in messages {
        t.update(m);
    }
    let h = t.current();
    match (outcome.version, role) {
        (Version::V12, Role::Client) => finished_mac(&outcome.master, "client finished", &h).to_vec(),
        (Version::V12, Role::Server) => finished_mac(&outcome.master, "server finished", &h).to_vec(),
        (Version::V13, Role::Client) => finished_mac_len(&outcome.master, "tls13 client finished", &h, 48),
        (Version::V13, Role::Server) => finished_mac_len(&outcome.master, "tls13 server finished", &h, 48),
    }
}

/// Checks that each transmitted Finished matches a recomputation over the
/// given (possibly altered) message list. `messages` parallels the outcome
/// transcript.
pub fn finished_binds(outcome: &HandshakeOutcome, messages: &[Vec<u8>]) -> bool {
    outcome.transcript.iter().enumerate().all(|(i, e)| {
        if e.msg_type != HandshakeType::Finished {
            return true;
        }
        let sent = decode_handshake_message(&e.bytes).map(|m| m.body).unwrap_or_default();
        recompute_finished(outcome, e.sender, &messages[..i]) == sent
    })
}

pub struct ClientEndpoint {
    pub config: SessionConfig,
    /// Absent for clients that cannot authenticate.
    pub credential: Option<Arc<Credential>>,
    /// Root the client trusts for server chains.
    pub trust_anchor: Certificate,
    pub server_name: String,
    pub address: Vec<u8>,
    pub objects: Shared<ClientObjectCache>,
    pub tickets: Shared<ClientTicketCache>,
    pub sessions: Shared<ClientSessionStore>,
    pub revocation: Arc<dyn RevocationCheck>,
}

impl ClientEndpoint {
    pub fn new(config: SessionConfig, credential: Option<Arc<Credential>>, trust_anchor: Certificate) -> Self {
        Self {
            config,
            credential,
            trust_anchor,
            server_name: "gateway.plant.example".into(),
            address: vec![192, 0, 2, 10],
            objects: shared(ClientObjectCache::new()),
            tickets: shared(ClientTicketCache::new()),
            sessions: shared(ClientSessionStore::default()),
            revocation: Arc::new(NeverRevoked),
        }
    }

    pub fn peer(&self) -> PeerId {
        PeerId::resolve(Some(&self.server_name), &self.address)
    }
}

pub struct ServerEndpoint {
    pub config: SessionConfig,
    pub credential: Arc<Credential>,
    /// Root the server trusts for client chains.
    pub client_anchor: Option<Certificate>,
    pub cache: Shared<ServerObjectCache>,
    pub sessions: Shared<ServerSessionStore>,
    pub revocation: Arc<dyn RevocationCheck>,
}

impl ServerEndpoint {
    pub fn new(config: SessionConfig, credential: Arc<Credential>, client_anchor: Option<Certificate>) -> Self {
        Self {
            config,
            credential,
            client_anchor,
            cache: shared(ServerObjectCache::new()),
            sessions: shared(ServerSessionStore::new([0x5e; 32])),
            revocation: Arc::new(NeverRevoked),
        }
    }
}

/// A message as produced by a state machine.
#[derive(Debug, Clone)]
pub(crate) struct Sent {
    pub msg_type: HandshakeType,
    pub bytes: Vec<u8>,
    pub protection: Protection,
    pub abbreviated: bool,
}

impl Sent {
    pub fn new(msg: &HandshakeMessage, protection: Protection, abbreviated: bool) -> Result<Self, Abort> {
        Ok(Self {
            msg_type: msg.msg_type,
            bytes: msg.encode()?,
            protection,
            abbreviated,
        })
    }
}

pub(crate) fn decode_flight(flight: &[Vec<u8>]) -> Result<Vec<HandshakeMessage>, Abort> {
    flight.iter().map(|b| Ok(decode_handshake_message(b)?)).collect()
}

pub(crate) fn expect_type(msg: &HandshakeMessage, t: HandshakeType) -> Result<(), Abort> {
    if msg.msg_type == t {
        Ok(())
    } else {
        Err(Abort::UnexpectedMessage(msg.msg_type))
    }
}

/// Test hooks: mutate a flight in flight, or act between flights (e.g. to
/// evict a cache entry mid-handshake).
/// Called with the sender, flight index and the flight's encoded messages.
pub type TamperFn<'a> = &'a mut dyn FnMut(Role, usize, &mut Vec<Vec<u8>>);

#[derive(Default)]
pub struct Hooks<'a> {
    pub tamper: Option<TamperFn<'a>>,
    pub between_flights: Option<&'a mut dyn FnMut(usize)>,
}

pub fn run_handshake(
    client: &ClientEndpoint,
    server: &ServerEndpoint,
    link: &LinkProfile,
    rng: &mut ChaCha20Rng,
) -> Result<HandshakeOutcome, Abort> {
    run_handshake_with(client, server, link, rng, Hooks::default())
}

/// Same driver; named for call sites that expect a resumed session. An
/// unknown or evicted session falls back to a full handshake
/// (`outcome.resumed == false`).
pub fn run_resumption(
    client: &ClientEndpoint,
    server: &ServerEndpoint,
    link: &LinkProfile,
    rng: &mut ChaCha20Rng,
) -> Result<HandshakeOutcome, Abort> {
    run_handshake(client, server, link, rng)
}

pub fn run_handshake_with(
    client: &ClientEndpoint,
    server: &ServerEndpoint,
    link: &LinkProfile,
    rng: &mut ChaCha20Rng,
    mut hooks: Hooks<'_>,
) -> Result<HandshakeOutcome, Abort> {
    if client.config.version != server.config.version {
        return Err(Abort::VersionMismatch);
    }
    let mut conn = Connection::open(*link)?;
    let mut c = ClientMachine::new(client);
    let mut s = ServerMachine::new(server);
    let mut transcript = Vec::new();

    let mut flight = c.start(rng)?;
    let mut sender = Role::Client;
    let mut index = 0;
    while !flight.is_empty() {
        let outgoing: Vec<OutgoingMessage> = flight
            .iter()
            .map(|m| OutgoingMessage {
                handshake_len: m.bytes.len(),
                protection: m.protection,
            })
            .collect();
        conn.send_flight(&outgoing)?;
        let sizes = message_wire_sizes(&outgoing, link);
        for (m, wire_len) in flight.iter().zip(sizes) {
            transcript.push(TranscriptEntry {
                sender,
                msg_type: m.msg_type,
                handshake_len: m.bytes.len(),
                wire_len,
                abbreviated: m.abbreviated,
                bytes: m.bytes.clone(),
            });
        }
        let mut delivered: Vec<Vec<u8>> = flight.into_iter().map(|m| m.bytes).collect();
        if let Some(t) = hooks.tamper.as_mut() {
            t(sender, index, &mut delivered);
        }
        if let Some(h) = hooks.between_flights.as_mut() {
            h(index);
        }
        flight = match sender {
            Role::Client => s.receive(&delivered, rng)?,
            Role::Server => c.receive(&delivered, rng)?,
        };
        sender = match sender {
            Role::Client => Role::Server,
            Role::Server => Role::Client,
        };
        index += 1;
    }

    if !c.is_done() || !s.is_done() {
        return Err(Abort::DecodeError("handshake ended early".into()));
    }
    let c_done = c.finish()?;
    let s_done = s.finish()?;
    if c_done.master != s_done.master {
        return Err(Abort::FinishedMismatch);
    }

    let mut effects = CacheEffects::default();
    client::commit(client, c_done.pending, &mut effects);
    server::commit(server, s_done.pending, &mut effects);

    Ok(HandshakeOutcome {
        completed: true,
        version: client.config.version,
        resumed: c_done.resumed,
        client_keys: c_done.keys,
        server_keys: s_done.keys,
        transcript,
        ledger: conn.ledger,
        client: c_done.counters,
        server: s_done.counters,
        effects,
        client_random: c_done.client_random,
        server_random: c_done.server_random,
        client_transcript_hash: c_done.transcript_hash,
        server_transcript_hash: s_done.transcript_hash,
        master: c_done.master,
    })
}

/// What a machine hands back once it has completed.
pub(crate) struct Finished<P> {
    pub master: MasterSecret,
    pub keys: SessionKeys,
    pub counters: Counters,
    pub pending: P,
    pub resumed: bool,
    pub client_random: [u8; 32],
    pub server_random: [u8; 32],
    pub transcript_hash: [u8; 32],
}

pub(crate) const CV_CONTEXT_SERVER: &[u8] = b"TLS 1.3, server CertificateVerify\0";
pub(crate) const CV_CONTEXT_CLIENT: &[u8] = b"TLS 1.3, client CertificateVerify\0";
pub(crate) const V13_VERIFY_LEN: usize = 48;

pub(crate) fn cv13_input(context: &[u8], hash: &[u8; 32]) -> Vec<u8> {
    let mut v = vec![0x20; 64];
    v.extend_from_slice(context);
    v.extend_from_slice(hash);
    v
}

pub(crate) fn ske_input(client_random: &[u8; 32], server_random: &[u8; 32], params: &[u8]) -> Vec<u8> {
    let mut v = Vec::with_capacity(64 + params.len());
    v.extend_from_slice(client_random);
    v.extend_from_slice(server_random);
    v.extend_from_slice(params);
    v
}

pub(crate) fn suite_for(scheme: crate::crypto::Scheme) -> u16 {
    match scheme {
        crate::crypto::Scheme::EcdsaP256 => crate::codec::ECDHE_ECDSA_AES256_GCM_SHA384,
        _ => crate::codec::ECDHE_RSA_AES256_GCM_SHA384,
    }
}

pub(crate) fn tls13_master(ikm: &[u8], client_random: &[u8; 32], server_random: &[u8; 32]) -> MasterSecret {
    crate::crypto::derive_master_secret_labeled(ikm, "tls13 master secret", client_random, server_random)
}
