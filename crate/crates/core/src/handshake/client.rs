use rand_chacha::ChaCha20Rng;
use rand_core::RngCore;

use super::resumption::ClientSession;
use super::{
    cv13_input, decode_flight, expect_type, ske_input, suite_for, tls13_master, Abort, CacheEffects,
    ClientEndpoint, Counters, Finished, Mode, Sent, Version, CV_CONTEXT_CLIENT, CV_CONTEXT_SERVER,
    V13_VERIFY_LEN,
};
use crate::caches::PeerId;
use crate::certs::{
    abbreviate, build_tls13_abbreviated_cert, convert_tls13_cert_msg, splice_cached_certificates,
    validate_cached, validate_chain, CertificateChain, ValidationCacheEntry,
};
use crate::codec::{self as c, find_extension, CachedInfo, CachedObject, ExtensionType, HandshakeMessage, HandshakeType, ObjectType, SscExtension, SscTicketEntry};
use crate::crypto::{
    derive_master_secret, derive_ticket, finished_mac, finished_mac_len, fingerprint, key_block, prf,
    sha256, verify, EphemeralKey, Fingerprint, MasterSecret, PublicKey, Ticket, TranscriptHash,
};
use crate::netsim::Protection;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Start,
    WaitServer,
    WaitServerFinished,
    Done,
}

#[derive(Debug, Default)]
pub(crate) struct ClientPending {
    server_objects: Vec<(ObjectType, Vec<u8>)>,
    server_validation: Option<ValidationCacheEntry>,
    touched: Vec<(ObjectType, Fingerprint)>,
    ticket: Option<(Fingerprint, Ticket)>,
    session: Option<ClientSession>,
    drop_session: bool,
}

pub(crate) struct ClientMachine<'a> {
    ep: &'a ClientEndpoint,
    peer: PeerId,
    state: State,
    transcript: TranscriptHash,
    client_random: [u8; 32],
    server_random: [u8; 32],
    eph: Option<EphemeralKey>,
    offered: Vec<(ObjectType, Fingerprint)>,
    offered_tickets: Vec<(ObjectType, Ticket)>,
    sent_ssc: bool,
    offered_session: Option<ClientSession>,
    resumed: bool,
    ssc_negotiated: bool,
    ssc_selected: bool,
    selected_types: Vec<ObjectType>,
    cert_requested: bool,
    cr13_context: Vec<u8>,
    sent_certificate: bool,
    server_key: Option<PublicKey>,
    master: Option<MasterSecret>,
    counters: Counters,
    pending: ClientPending,
}

impl<'a> ClientMachine<'a> {
    pub fn new(ep: &'a ClientEndpoint) -> Self {
        Self {
            ep,
            peer: ep.peer(),
            state: State::Start,
            transcript: TranscriptHash::new(),
            client_random: [0; 32],
            server_random: [0; 32],
            eph: None,
            offered: Vec::new(),
            offered_tickets: Vec::new(),
            sent_ssc: false,
            offered_session: None,
            resumed: false,
            ssc_negotiated: false,
            ssc_selected: false,
            selected_types: Vec::new(),
            cert_requested: false,
            cr13_context: Vec::new(),
            sent_certificate: false,
            server_key: None,
            master: None,
            counters: Counters::default(),
            pending: ClientPending::default(),
        }
    }

    fn mode(&self) -> Mode {
        self.ep.config.mode
    }

    fn version(&self) -> Version {
        self.ep.config.version
    }

    pub fn is_done(&self) -> bool {
        self.state == State::Done
    }

    fn emit(&mut self, out: &mut Vec<Sent>, msg: &HandshakeMessage, prot: Protection, abbreviated: bool) -> Result<(), Abort> {
        let s = Sent::new(msg, prot, abbreviated)?;
        self.transcript.update(&s.bytes);
        out.push(s);
        Ok(())
    }

    /// The client's own certificate message in canonical (1.2) form.
    fn own_object(&self) -> Option<Vec<u8>> {
        let cred = self.ep.credential.as_ref()?;
        c::Certificate12 {
            certs: cred.chain.transmitted_encodings(),
        }
        .to_message()
        .encode()
        .ok()
    }

    pub fn start(&mut self, rng: &mut ChaCha20Rng) -> Result<Vec<Sent>, Abort> {
        if self.state != State::Start {
            return Err(Abort::UnexpectedMessage(HandshakeType::ClientHello));
        }
        rng.fill_bytes(&mut self.client_random);
        let eph = EphemeralKey::generate(rng);
        let cfg = self.ep.config;

        if cfg.mode == Mode::SessionResumption {
            self.offered_session = self
                .ep
                .sessions
                .read()
                .get(&self.peer)
                .filter(|s| {
                    matches!(
                        (s, cfg.version),
                        (ClientSession::V12 { .. }, Version::V12) | (ClientSession::V13 { .. }, Version::V13)
                    )
                })
                .cloned();
        }

        let mut exts = Vec::new();
        if cfg.version == Version::V13 {
            exts.push(c::supported_versions_client());
        }
        exts.extend([
            c::server_name(&self.ep.server_name),
            c::supported_groups(),
            c::ec_point_formats(),
            c::signature_algorithms(),
            c::Extension::signal(ExtensionType::ENCRYPT_THEN_MAC),
            c::Extension::signal(ExtensionType::EXTENDED_MASTER_SECRET),
        ]);
        if cfg.version == Version::V13 {
            exts.push(c::psk_key_exchange_modes());
            exts.push(c::key_share_client(eph.public_bytes()));
        }

        if cfg.mode.caches_server_info() {
            self.offered = self
                .ep
                .objects
                .read()
                .entries_for(&self.peer)
                .into_iter()
                .filter(|(t, _)| cfg.version == Version::V12 || *t == ObjectType::CERTIFICATE)
                .collect();
            if !self.offered.is_empty() {
                let list = self
                    .offered
                    .iter()
                    .map(|(t, fp)| CachedObject {
                        object_type: *t,
                        hash: fp.0.to_vec(),
                    })
                    .collect();
                exts.push(CachedInfo::Offer(list).to_extension());
            }
        }
        if cfg.mode.caches_client_info() && self.ep.credential.is_some() {
            self.offered_tickets = self.ep.tickets.read().offer(&self.peer);
            let ext = if self.offered_tickets.is_empty() {
                SscExtension::Support
            } else {
                SscExtension::ClientOffer(
                    self.offered_tickets
                        .iter()
                        .map(|(t, tk)| SscTicketEntry {
                            object_type: *t,
                            ticket: tk.0.to_vec(),
                        })
                        .collect(),
                )
            };
            exts.push(ext.to_extension());
            self.sent_ssc = true;
        }

        let (session_id, suites) = match cfg.version {
            Version::V12 => {
                let sid = match &self.offered_session {
                    Some(ClientSession::V12 { session_id, .. }) => session_id.clone(),
                    _ => Vec::new(),
                };
                let scheme = self.ep.trust_anchor.public_key()?.scheme();
                (sid, vec![suite_for(scheme)])
            }
            Version::V13 => (Vec::new(), vec![c::TLS_AES_256_GCM_SHA384]),
        };
        let mut ch = c::ClientHello {
            legacy_version: c::TLS12,
            random: self.client_random,
            session_id,
            cipher_suites: suites,
            compression: vec![0],
            extensions: exts,
        };
        if let Some(ClientSession::V13 { psk, ticket, age_add }) = &self.offered_session {
            let mut offer = c::PskOffer {
                identity: ticket.clone(),
                obfuscated_age: *age_add,
                binder: vec![0; V13_VERIFY_LEN],
            };
            ch.extensions.push(offer.to_extension());
            let partial = ch.to_message()?.encode()?;
            offer.binder = prf(psk, "tls13 resumption binder", &sha256(&partial), V13_VERIFY_LEN);
            *ch.extensions.last_mut().expect("psk pushed") = offer.to_extension();
        }

        self.eph = Some(eph);
        let mut out = Vec::new();
        self.emit(&mut out, &ch.to_message()?, Protection::Plain, false)?;
        self.state = State::WaitServer;
        Ok(out)
    }

    pub fn receive(&mut self, flight: &[Vec<u8>], rng: &mut ChaCha20Rng) -> Result<Vec<Sent>, Abort> {
        let msgs = decode_flight(flight)?;
        let _ = rng;
        match (self.state, self.version()) {
            (State::WaitServer, Version::V12) => self.server_flight12(&msgs, flight),
            (State::WaitServer, Version::V13) => self.server_flight13(&msgs, flight),
            (State::WaitServerFinished, _) => {
                let [fin] = msgs.as_slice() else {
                    return Err(Abort::DecodeError("expected a lone Finished".into()));
                };
                expect_type(fin, HandshakeType::Finished)?;
                let master = self.master.clone().expect("master set");
                if fin.body != finished_mac(&master, "server finished", &self.transcript.current()) {
                    return Err(Abort::FinishedMismatch);
                }
                self.transcript.update(&flight[0]);
                self.state = State::Done;
                Ok(Vec::new())
            }
            (State::Done, Version::V13) => {
                for m in &msgs {
                    expect_type(m, HandshakeType::NewSessionTicket)?;
                    self.accept_ticket(m)?;
                }
                Ok(Vec::new())
            }
            _ => Err(Abort::UnexpectedMessage(msgs.first().map_or(HandshakeType::Finished, |m| m.msg_type))),
        }
    }

    fn accept_ticket(&mut self, m: &HandshakeMessage) -> Result<(), Abort> {
        let nst = c::NewSessionTicket::decode_body(&m.body)?;
        let master = self.master.as_ref().expect("master set");
        let res = prf(master.as_bytes(), "tls13 resumption master", &self.transcript.current(), 48);
        let psk = prf(&res, "tls13 resumption", &nst.nonce, 48);
        self.pending.session = Some(ClientSession::V13 {
            psk,
            ticket: nst.ticket,
            age_add: nst.age_add,
        });
        Ok(())
    }

    /// Cached-info and static-client-info answers, from ServerHello (1.2) or
    /// EncryptedExtensions (1.3).
    fn server_extensions(&mut self, exts: &[c::Extension]) -> Result<(), Abort> {
        if let Some(e) = find_extension(exts, ExtensionType::CACHED_INFO) {
            if self.offered.is_empty() {
                return Err(Abort::DecodeError("unsolicited cached_info".into()));
            }
            let CachedInfo::Selection(types) = CachedInfo::decode_selection(&e.data)? else {
                unreachable!("decode_selection yields a selection")
            };
            for t in &types {
                if !self.offered.iter().any(|(o, _)| o == t) {
                    return Err(Abort::DecodeError("selected type was not offered".into()));
                }
            }
            self.selected_types = types;
        }
        self.counters.cache_hits += self.selected_types.len() as u32;
        self.counters.cache_misses += (self.offered.len() - self.selected_types.len()) as u32;

        if let Some(e) = find_extension(exts, ExtensionType::SSC) {
            if !self.sent_ssc {
                return Err(Abort::DecodeError("unsolicited ssc".into()));
            }
            self.ssc_negotiated = true;
            if let SscExtension::ServerSelection(sel) = SscExtension::decode_server(&e.data)? {
                for s in sel {
                    let i = s.ticket_index as usize;
                    if i >= self.offered_tickets.len() || self.offered_tickets[i].0 != s.object_type {
                        return Err(Abort::DecodeError("bad ticket index".into()));
                    }
                    if s.object_type == ObjectType::CERTIFICATE {
                        self.ssc_selected = true;
                    }
                }
            }
        }
        Ok(())
    }

    fn offered_fp(&self, t: ObjectType) -> Fingerprint {
        self.offered.iter().find(|(o, _)| *o == t).expect("selection checked against offer").1
    }

    fn cached_object(&mut self, t: ObjectType, fp: &Fingerprint) -> Result<Vec<u8>, Abort> {
        let obj = self.ep.objects.read().get(t, fp).map(<[u8]>::to_vec);
        let obj = obj.ok_or(Abort::CacheObjectMissing)?;
        self.pending.touched.push((t, *fp));
        Ok(obj)
    }

    /// Validates the server chain inside a canonical Certificate message, or
    /// re-checks a cached validation entry when one exists for `cached_fp`.
    fn admit_server_chain(&mut self, canonical: &[u8], cached_fp: Option<Fingerprint>) -> Result<(), Abort> {
        let cfg = self.ep.config;
        let cached_entry = match cached_fp {
            Some(fp) if cfg.mode == Mode::Bithac => {
                self.ep.objects.read().validation(ObjectType::CERTIFICATE, &fp).cloned()
            }
            _ => None,
        };
        if let Some(entry) = cached_entry {
            let r = validate_cached(&entry, cfg.now, self.ep.revocation.as_ref());
            if !r.accepted {
                return Err(Abort::CertificateRejected(r.reason.expect("rejection has a reason")));
            }
            self.server_key = Some(PublicKey::decode(&entry.leaf_public_key)?);
            return Ok(());
        }
        let msg = c::decode_handshake_message(canonical)?;
        let c12 = c::Certificate12::decode_body(&msg.body)?;
        let chain = CertificateChain::from_encodings(&c12.certs).map_err(|e| Abort::DecodeError(e.to_string()))?;
        let r = validate_chain(&chain, &self.ep.trust_anchor, cfg.now, self.ep.revocation.as_ref());
        self.counters.signature_verifications += r.signature_verifications_performed;
        self.counters.chain_verifications += r.signature_verifications_performed;
        if !r.accepted {
            return Err(Abort::CertificateRejected(r.reason.expect("rejection has a reason")));
        }
        self.server_key = Some(chain.leaf().public_key()?);
        if cfg.mode == Mode::Bithac {
            self.pending.server_validation = abbreviate(&chain, &r, cfg.cache_revocation_info).ok();
        }
        Ok(())
    }

    fn verify_server(&mut self, msg: &[u8], sig: &[u8]) -> Result<(), Abort> {
        self.counters.signature_verifications += 1;
        let key = self.server_key.as_ref().ok_or(Abort::UnexpectedMessage(HandshakeType::CertificateVerify))?;
        if verify(key, msg, sig) {
            Ok(())
        } else {
            Err(Abort::BadSignature)
        }
    }

    fn note_session_outcome(&mut self) {
        if self.offered_session.is_some() && !self.resumed {
            self.pending.drop_session = true;
        }
    }

    fn server_flight12(&mut self, msgs: &[HandshakeMessage], raw: &[Vec<u8>]) -> Result<Vec<Sent>, Abort> {
        let mut it = msgs.iter().zip(raw).peekable();
        let (sh_msg, sh_raw) = it.next().ok_or(Abort::DecodeError("empty flight".into()))?;
        expect_type(sh_msg, HandshakeType::ServerHello)?;
        let sh = c::ServerHello::decode_body(&sh_msg.body)?;
        self.server_random = sh.random;
        self.transcript.update(sh_raw);

        if let Some(ClientSession::V12 { session_id, master }) = &self.offered_session {
            if !session_id.is_empty() && sh.session_id == *session_id {
                let master = master.clone();
                self.resumed = true;
                let (fin, fin_raw) = it.next().ok_or(Abort::DecodeError("missing Finished".into()))?;
                expect_type(fin, HandshakeType::Finished)?;
                if fin.body != finished_mac(&master, "server finished", &self.transcript.current()) {
                    return Err(Abort::FinishedMismatch);
                }
                self.transcript.update(fin_raw);
                let mut out = Vec::new();
                let mine = finished_mac(&master, "client finished", &self.transcript.current());
                self.emit(&mut out, &HandshakeMessage::new(HandshakeType::Finished, mine.to_vec()), Protection::Aead12, false)?;
                self.master = Some(master);
                self.state = State::Done;
                return Ok(out);
            }
        }
        self.note_session_outcome();
        self.server_extensions(&sh.extensions)?;
        let cfg = self.ep.config;

        // Certificate
        let (m, r) = it.next().ok_or(Abort::DecodeError("missing Certificate".into()))?;
        expect_type(m, HandshakeType::Certificate)?;
        if self.selected_types.contains(&ObjectType::CERTIFICATE) {
            let fp = Fingerprint(c::parse_fingerprint_body(&m.body)?);
            if fp != self.offered_fp(ObjectType::CERTIFICATE) {
                return Err(Abort::DecodeError("fingerprint does not match offer".into()));
            }
            let canonical = self.cached_object(ObjectType::CERTIFICATE, &fp)?;
            self.admit_server_chain(&canonical, Some(fp))?;
            if self.pending.server_validation.is_some() {
                self.pending.server_objects.push((ObjectType::CERTIFICATE, canonical));
            }
        } else {
            self.admit_server_chain(r, None)?;
            if cfg.mode.caches_server_info() {
                self.pending.server_objects.push((ObjectType::CERTIFICATE, r.clone()));
            }
        }
        self.transcript.update(r);

        // ServerKeyExchange
        let (m, r) = it.next().ok_or(Abort::DecodeError("missing ServerKeyExchange".into()))?;
        expect_type(m, HandshakeType::ServerKeyExchange)?;
        let ske = c::ServerKeyExchange::decode_body(&m.body)?;
        let params = c::ServerKeyExchange::params(ske.named_group, &ske.public);
        self.verify_server(&ske_input(&self.client_random, &self.server_random, &params), &ske.signature)?;
        let shared = self.eph.as_ref().expect("eph set").agree(&ske.public)?;
        self.transcript.update(r);

        // CertificateRequest, ServerHelloDone
        let (mut m, mut r) = it.next().ok_or(Abort::DecodeError("missing ServerHelloDone".into()))?;
        if m.msg_type == HandshakeType::CertificateRequest {
            if self.selected_types.contains(&ObjectType::CERTIFICATE_REQUEST) {
                let fp = Fingerprint(c::parse_fingerprint_body(&m.body)?);
                if fp != self.offered_fp(ObjectType::CERTIFICATE_REQUEST) {
                    return Err(Abort::DecodeError("fingerprint does not match offer".into()));
                }
                let cached = self.cached_object(ObjectType::CERTIFICATE_REQUEST, &fp)?;
                let cm = c::decode_handshake_message(&cached)?;
                c::CertificateRequest12::decode_body(&cm.body)?;
            } else {
                c::CertificateRequest12::decode_body(&m.body)?;
                if cfg.mode.caches_server_info() {
                    self.pending.server_objects.push((ObjectType::CERTIFICATE_REQUEST, r.clone()));
                }
            }
            self.cert_requested = true;
            self.transcript.update(r);
            (m, r) = it.next().ok_or(Abort::DecodeError("missing ServerHelloDone".into()))?;
        }
        expect_type(m, HandshakeType::ServerHelloDone)?;
        self.transcript.update(r);
        if it.next().is_some() {
            return Err(Abort::DecodeError("trailing messages".into()));
        }

        let master = derive_master_secret(&shared, &self.client_random, &self.server_random);
        let mut out = Vec::new();
        if self.cert_requested {
            let (msg, abbreviated) = match &self.ep.credential {
                Some(_) if self.ssc_selected => (
                    c::build_abbreviated_certificate(c::AbbreviationKind::ClientZeroLength, None)?,
                    true,
                ),
                Some(cred) => (
                    c::Certificate12 {
                        certs: cred.chain.transmitted_encodings(),
                    }
                    .to_message(),
                    false,
                ),
                None => (c::Certificate12 { certs: Vec::new() }.to_message(), false),
            };
            self.sent_certificate = self.ep.credential.is_some();
            self.emit(&mut out, &msg, Protection::Plain, abbreviated)?;
        }
        let cke = c::ClientKeyExchange {
            public: self.eph.as_ref().expect("eph set").public_bytes().to_vec(),
        };
        self.emit(&mut out, &cke.to_message(), Protection::Plain, false)?;
        if self.sent_certificate {
            let key = self.ep.credential.as_ref().expect("sent").leaf_key();
            let sig = key.sign(&self.transcript.current())?;
            self.counters.signatures_created += 1;
            let cv = c::CertificateVerify {
                scheme: key.scheme().code(),
                signature: sig,
            };
            self.emit(&mut out, &cv.to_message(), Protection::Plain, false)?;
        }
        let fin = finished_mac(&master, "client finished", &self.transcript.current());
        self.emit(&mut out, &HandshakeMessage::new(HandshakeType::Finished, fin.to_vec()), Protection::Aead12, false)?;
        if cfg.mode == Mode::SessionResumption && !sh.session_id.is_empty() {
            self.pending.session = Some(ClientSession::V12 {
                session_id: sh.session_id.clone(),
                master: master.clone(),
            });
        }
        self.master = Some(master);
        self.state = State::WaitServerFinished;
        Ok(out)
    }

    fn server_flight13(&mut self, msgs: &[HandshakeMessage], raw: &[Vec<u8>]) -> Result<Vec<Sent>, Abort> {
        let mut it = msgs.iter().zip(raw);
        let (sh_msg, sh_raw) = it.next().ok_or(Abort::DecodeError("empty flight".into()))?;
        expect_type(sh_msg, HandshakeType::ServerHello)?;
        let sh = c::ServerHello::decode_body(&sh_msg.body)?;
        self.server_random = sh.random;
        let ks = find_extension(&sh.extensions, ExtensionType::KEY_SHARE)
            .ok_or(Abort::DecodeError("missing key_share".into()))?;
        let peer_public = c::parse_key_share_server(&ks.data)?;
        let shared = self.eph.as_ref().expect("eph set").agree(&peer_public)?;
        let psk = match (&self.offered_session, find_extension(&sh.extensions, ExtensionType::PRE_SHARED_KEY)) {
            (Some(ClientSession::V13 { psk, .. }), Some(_)) => Some(psk.clone()),
            (_, Some(_)) => return Err(Abort::DecodeError("unsolicited pre_shared_key".into())),
            _ => None,
        };
        self.resumed = psk.is_some();
        self.note_session_outcome();
        let mut ikm = psk.unwrap_or_else(|| vec![0; 48]);
        ikm.extend_from_slice(&shared);
        let master = tls13_master(&ikm, &self.client_random, &self.server_random);
        self.transcript.update(sh_raw);

        let (m, r) = it.next().ok_or(Abort::DecodeError("missing EncryptedExtensions".into()))?;
        expect_type(m, HandshakeType::EncryptedExtensions)?;
        let ee = c::EncryptedExtensions::decode_body(&m.body)?;
        self.server_extensions(&ee.extensions)?;
        self.transcript.update(r);

        let (mut m, mut r) = it.next().ok_or(Abort::DecodeError("missing Finished".into()))?;
        if !self.resumed {
            if m.msg_type == HandshakeType::CertificateRequest {
                let cr = c::CertificateRequest13::decode_body(&m.body)?;
                self.cr13_context = cr.context;
                self.cert_requested = true;
                self.transcript.update(r);
                (m, r) = it.next().ok_or(Abort::DecodeError("missing Certificate".into()))?;
            }
            expect_type(m, HandshakeType::Certificate)?;
            let c13 = c::Certificate13::decode_body(&m.body)?;
            if self.selected_types.contains(&ObjectType::CERTIFICATE) {
                let fp = self.offered_fp(ObjectType::CERTIFICATE);
                let canonical = self.cached_object(ObjectType::CERTIFICATE, &fp)?;
                splice_cached_certificates(&c13, &canonical).map_err(|e| Abort::DecodeError(e.to_string()))?;
                self.admit_server_chain(&canonical, Some(fp))?;
                if self.pending.server_validation.is_some() {
                    self.pending.server_objects.push((ObjectType::CERTIFICATE, canonical));
                }
            } else {
                let canonical = convert_tls13_cert_msg(m).map_err(|e| Abort::DecodeError(e.to_string()))?;
                self.admit_server_chain(&canonical, None)?;
                if self.mode().caches_server_info() {
                    self.pending.server_objects.push((ObjectType::CERTIFICATE, canonical));
                }
            }
            self.transcript.update(r);

            (m, r) = it.next().ok_or(Abort::DecodeError("missing CertificateVerify".into()))?;
            expect_type(m, HandshakeType::CertificateVerify)?;
            let cv = c::CertificateVerify::decode_body(&m.body)?;
            self.verify_server(&cv13_input(CV_CONTEXT_SERVER, &self.transcript.current()), &cv.signature)?;
            self.transcript.update(r);
            (m, r) = it.next().ok_or(Abort::DecodeError("missing Finished".into()))?;
        }
        expect_type(m, HandshakeType::Finished)?;
        if m.body != finished_mac_len(&master, "tls13 server finished", &self.transcript.current(), V13_VERIFY_LEN) {
            return Err(Abort::FinishedMismatch);
        }
        self.transcript.update(r);
        if it.next().is_some() {
            return Err(Abort::DecodeError("trailing messages".into()));
        }

        let mut out = Vec::new();
        if self.cert_requested {
            let (msg, abbreviated) = match &self.ep.credential {
                Some(cred) if self.ssc_selected => (
                    build_tls13_abbreviated_cert(&self.cr13_context, &vec![Vec::new(); cred.chain.transmitted().len()])
                        .map_err(|e| Abort::DecodeError(e.to_string()))?,
                    true,
                ),
                Some(cred) => (
                    c::Certificate13 {
                        context: self.cr13_context.clone(),
                        entries: cred
                            .chain
                            .transmitted_encodings()
                            .into_iter()
                            .map(|cert| c::CertEntry13 {
                                cert,
                                extensions: Vec::new(),
                            })
                            .collect(),
                    }
                    .to_message()?,
                    false,
                ),
                None => (
                    c::Certificate13 {
                        context: self.cr13_context.clone(),
                        entries: Vec::new(),
                    }
                    .to_message()?,
                    false,
                ),
            };
            self.sent_certificate = self.ep.credential.is_some();
            self.emit(&mut out, &msg, Protection::Aead13, abbreviated)?;
            if self.sent_certificate {
                let key = self.ep.credential.as_ref().expect("sent").leaf_key();
                let sig = key.sign(&cv13_input(CV_CONTEXT_CLIENT, &self.transcript.current()))?;
                self.counters.signatures_created += 1;
                let cv = c::CertificateVerify {
                    scheme: key.scheme().code(),
                    signature: sig,
                };
                self.emit(&mut out, &cv.to_message(), Protection::Aead13, false)?;
            }
        }
        let fin = finished_mac_len(&master, "tls13 client finished", &self.transcript.current(), V13_VERIFY_LEN);
        self.emit(&mut out, &HandshakeMessage::new(HandshakeType::Finished, fin), Protection::Aead13, false)?;
        self.master = Some(master);
        self.state = State::Done;
        Ok(out)
    }

    pub fn finish(mut self) -> Result<Finished<ClientPending>, Abort> {
        let master = self.master.clone().ok_or(Abort::DecodeError("no master secret".into()))?;
        if self.ssc_negotiated && !self.resumed && self.sent_certificate {
            let fp = fingerprint(&self.own_object().expect("credential present"));
            self.pending.ticket = Some((fp, derive_ticket(&master, ObjectType::CERTIFICATE, &fp)));
        }
        Ok(Finished {
            keys: key_block(&master, &self.client_random, &self.server_random),
            master,
            counters: self.counters,
            pending: self.pending,
            resumed: self.resumed,
            client_random: self.client_random,
            server_random: self.server_random,
            transcript_hash: self.transcript.current(),
        })
    }
}

pub(crate) fn commit(ep: &ClientEndpoint, p: ClientPending, effects: &mut CacheEffects) {
    let peer = ep.peer();
    if !p.server_objects.is_empty() || !p.touched.is_empty() {
        let mut objects = ep.objects.write();
        for (t, fp) in &p.touched {
            objects.touch(*t, fp);
        }
        for (t, bytes) in &p.server_objects {
            let fp = objects.insert(&peer, *t, bytes);
            if *t == ObjectType::CERTIFICATE {
                if let Some(v) = &p.server_validation {
                    objects.set_validation(*t, &fp, v.clone());
                }
            }
            effects.client_objects_stored += 1;
        }
    }
    if let Some((fp, ticket)) = p.ticket {
        ep.tickets.write().rotate(&peer, ObjectType::CERTIFICATE, fp, ticket);
        effects.client_ticket = Some(ticket.0);
    }
    if p.drop_session || p.session.is_some() {
        let mut s = ep.sessions.write();
        if p.drop_session {
            s.remove(&peer);
        }
        if let Some(sess) = p.session {
            s.insert(peer, sess);
            effects.session_stored = true;
        }
    }
}
