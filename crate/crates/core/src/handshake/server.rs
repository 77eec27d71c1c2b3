use rand_chacha::ChaCha20Rng;
use rand_core::RngCore;

use super::resumption::PSK_LEN;
use super::{
    cv13_input, decode_flight, expect_type, ske_input, suite_for, tls13_master, Abort, Auth, CacheEffects,
    Counters, Finished, Mode, Sent, ServerEndpoint, Version, CV_CONTEXT_CLIENT, CV_CONTEXT_SERVER,
    V13_VERIFY_LEN,
};
use crate::certs::{abbreviate, build_tls13_abbreviated_cert, convert_tls13_cert_msg, validate_chain, CertificateChain, Rejection, ValidationCacheEntry};
use crate::codec::{self as c, find_extension, CachedInfo, ExtensionType, HandshakeMessage, HandshakeType, ObjectType, SscExtension};
use crate::crypto::{
    derive_master_secret, derive_ticket, finished_mac, finished_mac_len, fingerprint, key_block, prf, sha256,
    verify, EphemeralKey, Fingerprint, MasterSecret, PublicKey, Scheme, Ticket, TranscriptHash,
};
use crate::netsim::Protection;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    WaitHello,
    WaitClient,
    Done,
}

#[derive(Debug, Default)]
pub(crate) struct ServerPending {
    /// New ticket, the client object it names, its validation entry and the
    /// canonical object bytes.
    ticket: Option<(Ticket, Fingerprint, ValidationCacheEntry, Vec<u8>)>,
    retired: Option<Ticket>,
    session: Option<(Vec<u8>, MasterSecret)>,
    touched_session: Option<Vec<u8>>,
}

pub(crate) struct ServerMachine<'a> {
    ep: &'a ServerEndpoint,
    state: State,
    transcript: TranscriptHash,
    client_random: [u8; 32],
    server_random: [u8; 32],
    eph: Option<EphemeralKey>,
    session_id: Vec<u8>,
    resumed: bool,
    ssc_negotiated: bool,
    /// Ticket the server selected for the client certificate.
    ssc_hit: Option<Ticket>,
    cert_requested: bool,
    client_key: Option<PublicKey>,
    client_object: Option<(Fingerprint, ValidationCacheEntry, Vec<u8>)>,
    master: Option<MasterSecret>,
    counters: Counters,
    pending: ServerPending,
}

impl<'a> ServerMachine<'a> {
    pub fn new(ep: &'a ServerEndpoint) -> Self {
        Self {
            ep,
            state: State::WaitHello,
            transcript: TranscriptHash::new(),
            client_random: [0; 32],
            server_random: [0; 32],
            eph: None,
            session_id: Vec::new(),
            resumed: false,
            ssc_negotiated: false,
            ssc_hit: None,
            cert_requested: false,
            client_key: None,
            client_object: None,
            master: None,
            counters: Counters::default(),
            pending: ServerPending::default(),
        }
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

    fn own_certificate12(&self) -> HandshakeMessage {
        c::Certificate12 {
            certs: self.ep.credential.chain.transmitted_encodings(),
        }
        .to_message()
    }

    fn own_certificate_request12(&self) -> HandshakeMessage {
        let cert_type = match self.ep.credential.leaf_key().scheme() {
            Scheme::EcdsaP256 => 64,
            _ => 1,
        };
        c::CertificateRequest12 {
            cert_types: vec![cert_type],
            signature_algorithms: c::SIGNATURE_ALGORITHMS.to_vec(),
            authorities: Vec::new(),
        }
        .to_message()
    }

    fn mutual(&self) -> bool {
        self.ep.config.auth == Auth::Mutual
    }

    pub fn receive(&mut self, flight: &[Vec<u8>], rng: &mut ChaCha20Rng) -> Result<Vec<Sent>, Abort> {
        let msgs = decode_flight(flight)?;
        match self.state {
            State::WaitHello => {
                let [ch] = msgs.as_slice() else {
                    return Err(Abort::DecodeError("expected a lone ClientHello".into()));
                };
                expect_type(ch, HandshakeType::ClientHello)?;
                match self.ep.config.version {
                    Version::V12 => self.hello12(ch, &flight[0], rng),
                    Version::V13 => self.hello13(ch, &flight[0], rng),
                }
            }
            State::WaitClient => match self.ep.config.version {
                Version::V12 => self.client_flight12(&msgs, flight),
                Version::V13 => self.client_flight13(&msgs, flight, rng),
            },
            State::Done => Err(Abort::UnexpectedMessage(msgs.first().map_or(HandshakeType::Finished, |m| m.msg_type))),
        }
    }

    /// Matches the cached-info offer against this server's own objects.
    fn cached_info_selection(&mut self, ch: &c::ClientHello) -> Result<Vec<ObjectType>, Abort> {
        let cfg = self.ep.config;
        let Some(e) = find_extension(&ch.extensions, ExtensionType::CACHED_INFO) else {
            return Ok(Vec::new());
        };
        if !cfg.mode.caches_server_info() {
            return Ok(Vec::new());
        }
        let CachedInfo::Offer(offer) = CachedInfo::decode_offer(&e.data)? else {
            unreachable!("decode_offer yields an offer")
        };
        let cert_fp = match cfg.version {
            Version::V12 => fingerprint(&self.own_certificate12().encode()?),
            // canonical form of the 1.3 message is the 1.2 encoding
            Version::V13 => fingerprint(&self.own_certificate12().encode()?),
        };
        let cr_fp = (cfg.version == Version::V12 && self.mutual())
            .then(|| self.own_certificate_request12().encode().map(|b| fingerprint(&b)))
            .transpose()?;
        let mut selected = Vec::new();
        for o in &offer {
            let hit = match o.object_type {
                ObjectType::CERTIFICATE => o.hash == cert_fp.0,
                ObjectType::CERTIFICATE_REQUEST => cr_fp.is_some_and(|fp| o.hash == fp.0),
                _ => false,
            };
            if hit && !selected.contains(&o.object_type) {
                selected.push(o.object_type);
            }
        }
        self.counters.cache_hits += selected.len() as u32;
        self.counters.cache_misses += (offer.len() - selected.len()) as u32;
        Ok(selected)
    }

    /// Answer to the static-client-info extension, if one is due.
    fn ssc_answer(&mut self, ch: &c::ClientHello) -> Result<Option<SscExtension>, Abort> {
        let cfg = self.ep.config;
        let Some(e) = find_extension(&ch.extensions, ExtensionType::SSC) else {
            return Ok(None);
        };
        if !cfg.mode.caches_client_info() || !self.mutual() {
            return Ok(None);
        }
        self.ssc_negotiated = true;
        match SscExtension::decode_client(&e.data)? {
            SscExtension::ClientOffer(entries) => {
                let offered = entries
                    .iter()
                    .map(|t| {
                        Ticket::from_slice(&t.ticket)
                            .map(|tk| (t.object_type, tk))
                            .ok_or(Abort::DecodeError("ticket length".into()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let sel = self.ep.cache.read().select(&offered, cfg.now, self.ep.revocation.as_ref());
                for s in &sel {
                    if s.object_type == ObjectType::CERTIFICATE {
                        self.ssc_hit = Some(offered[s.ticket_index as usize].1);
                    }
                }
                self.counters.cache_hits += sel.len() as u32;
                if sel.is_empty() {
                    self.counters.cache_misses += 1;
                }
                Ok(Some(SscExtension::ServerSelection(sel)))
            }
            _ => Ok(Some(SscExtension::Support)),
        }
    }

    fn sign(&mut self, msg: &[u8]) -> Result<(u16, Vec<u8>), Abort> {
        let key = self.ep.credential.leaf_key();
        self.counters.signatures_created += 1;
        Ok((key.scheme().code(), key.sign(msg)?))
    }

    fn hello12(&mut self, ch_msg: &HandshakeMessage, raw: &[u8], rng: &mut ChaCha20Rng) -> Result<Vec<Sent>, Abort> {
        let cfg = self.ep.config;
        let ch = c::ClientHello::decode_body(&ch_msg.body)?;
        self.client_random = ch.random;
        rng.fill_bytes(&mut self.server_random);
        self.transcript.update(raw);
        let suite = suite_for(self.ep.credential.leaf_key().scheme());
        let mut out = Vec::new();

        if cfg.mode == Mode::SessionResumption && !ch.session_id.is_empty() {
            let found = self.ep.sessions.read().get(&ch.session_id).cloned();
            if let Some(master) = found {
                self.resumed = true;
                self.session_id = ch.session_id.clone();
                let sh = c::ServerHello {
                    legacy_version: c::TLS12,
                    random: self.server_random,
                    session_id: ch.session_id.clone(),
                    cipher_suite: suite,
                    compression: 0,
                    extensions: vec![c::ec_point_formats(), c::Extension::signal(ExtensionType::EXTENDED_MASTER_SECRET)],
                };
                self.emit(&mut out, &sh.to_message()?, Protection::Plain, false)?;
                let fin = finished_mac(&master, "server finished", &self.transcript.current());
                self.emit(&mut out, &HandshakeMessage::new(HandshakeType::Finished, fin.to_vec()), Protection::Aead12, false)?;
                self.pending.touched_session = Some(ch.session_id);
                self.master = Some(master);
                self.state = State::WaitClient;
                return Ok(out);
            }
        }

        let selected = self.cached_info_selection(&ch)?;
        let ssc = self.ssc_answer(&ch)?;
        let mut sid = vec![0u8; 32];
        rng.fill_bytes(&mut sid);
        self.session_id = sid.clone();

        let mut exts = vec![c::ec_point_formats(), c::Extension::signal(ExtensionType::EXTENDED_MASTER_SECRET)];
        if !selected.is_empty() {
            exts.push(CachedInfo::Selection(selected.clone()).to_extension());
        }
        if let Some(s) = ssc {
            exts.push(s.to_extension());
        }
        let sh = c::ServerHello {
            legacy_version: c::TLS12,
            random: self.server_random,
            session_id: sid,
            cipher_suite: suite,
            compression: 0,
            extensions: exts,
        };
        self.emit(&mut out, &sh.to_message()?, Protection::Plain, false)?;

        let cert = self.own_certificate12();
        if selected.contains(&ObjectType::CERTIFICATE) {
            let fp = fingerprint(&cert.encode()?);
            self.emit(&mut out, &c::fingerprint_message(HandshakeType::Certificate, &fp.0), Protection::Plain, true)?;
        } else {
            self.emit(&mut out, &cert, Protection::Plain, false)?;
        }

        let eph = EphemeralKey::generate(rng);
        let params = c::ServerKeyExchange::params(c::SECP256R1, eph.public_bytes());
        let (scheme, signature) = self.sign(&ske_input(&self.client_random, &self.server_random, &params))?;
        let ske = c::ServerKeyExchange {
            named_group: c::SECP256R1,
            public: eph.public_bytes().to_vec(),
            scheme,
            signature,
        };
        self.emit(&mut out, &ske.to_message(), Protection::Plain, false)?;
        self.eph = Some(eph);

        if self.mutual() {
            self.cert_requested = true;
            let cr = self.own_certificate_request12();
            if selected.contains(&ObjectType::CERTIFICATE_REQUEST) {
                let fp = fingerprint(&cr.encode()?);
                self.emit(&mut out, &c::fingerprint_message(HandshakeType::CertificateRequest, &fp.0), Protection::Plain, true)?;
            } else {
                self.emit(&mut out, &cr, Protection::Plain, false)?;
            }
        }
        self.emit(&mut out, &HandshakeMessage::new(HandshakeType::ServerHelloDone, Vec::new()), Protection::Plain, false)?;
        self.state = State::WaitClient;
        Ok(out)
    }

    /// Takes the client chain either from the ticket cache or by validating
    /// the received canonical certificate message.
    fn admit_client(&mut self, canonical: Option<&[u8]>) -> Result<(), Abort> {
        let cfg = self.ep.config;
        match canonical {
            None => {
                let ticket = self.ssc_hit.ok_or(Abort::CertificateRejected(Rejection::BadChain))?;
                let entry = self.ep.cache.read().get(&ticket).cloned().ok_or(Abort::CacheObjectMissing)?;
                self.client_key = Some(PublicKey::decode(&entry.validation.leaf_public_key)?);
                self.pending.retired = Some(ticket);
                self.client_object = Some((entry.fingerprint, entry.validation, entry.object.unwrap_or_default()));
            }
            Some(canonical) => {
                let msg = c::decode_handshake_message(canonical)?;
                let c12 = c::Certificate12::decode_body(&msg.body)?;
                if c12.certs.is_empty() {
                    return Err(Abort::CertificateRejected(Rejection::BadChain));
                }
                let chain = CertificateChain::from_encodings(&c12.certs).map_err(|e| Abort::DecodeError(e.to_string()))?;
                let anchor = self
                    .ep
                    .client_anchor
                    .as_ref()
                    .ok_or(Abort::CertificateRejected(Rejection::UntrustedAnchor))?;
                let r = validate_chain(&chain, anchor, cfg.now, self.ep.revocation.as_ref());
                self.counters.signature_verifications += r.signature_verifications_performed;
                self.counters.chain_verifications += r.signature_verifications_performed;
                if !r.accepted {
                    return Err(Abort::CertificateRejected(r.reason.expect("rejection has a reason")));
                }
                self.client_key = Some(chain.leaf().public_key()?);
                if self.ssc_negotiated {
                    if let Ok(entry) = abbreviate(&chain, &r, cfg.cache_revocation_info) {
                        self.client_object = Some((fingerprint(canonical), entry, canonical.to_vec()));
                    }
                }
            }
        }
        Ok(())
    }

    fn verify_client(&mut self, msg: &[u8], sig: &[u8]) -> Result<(), Abort> {
        self.counters.signature_verifications += 1;
        let key = self.client_key.as_ref().ok_or(Abort::UnexpectedMessage(HandshakeType::CertificateVerify))?;
        if verify(key, msg, sig) {
            Ok(())
        } else {
            Err(Abort::BadSignature)
        }
    }

    fn client_flight12(&mut self, msgs: &[HandshakeMessage], raw: &[Vec<u8>]) -> Result<Vec<Sent>, Abort> {
        let mut it = msgs.iter().zip(raw);
        if self.resumed {
            let (fin, fin_raw) = it.next().ok_or(Abort::DecodeError("missing Finished".into()))?;
            expect_type(fin, HandshakeType::Finished)?;
            let master = self.master.clone().expect("master set");
            if fin.body != finished_mac(&master, "client finished", &self.transcript.current()) {
                return Err(Abort::FinishedMismatch);
            }
            self.transcript.update(fin_raw);
            self.state = State::Done;
            return Ok(Vec::new());
        }

        let (mut m, mut r) = it.next().ok_or(Abort::DecodeError("empty flight".into()))?;
        if self.cert_requested {
            expect_type(m, HandshakeType::Certificate)?;
            let c12 = c::Certificate12::decode_body(&m.body)?;
            if c12.certs.is_empty() && self.ssc_hit.is_some() {
                self.admit_client(None)?;
            } else {
                self.admit_client(Some(r))?;
            }
            self.transcript.update(r);
            (m, r) = it.next().ok_or(Abort::DecodeError("missing ClientKeyExchange".into()))?;
        }
        expect_type(m, HandshakeType::ClientKeyExchange)?;
        let cke = c::ClientKeyExchange::decode_body(&m.body)?;
        let shared = self.eph.as_ref().expect("eph set").agree(&cke.public)?;
        let master = derive_master_secret(&shared, &self.client_random, &self.server_random);
        self.transcript.update(r);

        let (mut m, mut r) = it.next().ok_or(Abort::DecodeError("missing Finished".into()))?;
        if self.client_key.is_some() {
            expect_type(m, HandshakeType::CertificateVerify)?;
            let cv = c::CertificateVerify::decode_body(&m.body)?;
            self.verify_client(&self.transcript.current(), &cv.signature)?;
            self.transcript.update(r);
            (m, r) = it.next().ok_or(Abort::DecodeError("missing Finished".into()))?;
        }
        expect_type(m, HandshakeType::Finished)?;
        if m.body != finished_mac(&master, "client finished", &self.transcript.current()) {
            return Err(Abort::FinishedMismatch);
        }
        self.transcript.update(r);
        if it.next().is_some() {
            return Err(Abort::DecodeError("trailing messages".into()));
        }

        let mut out = Vec::new();
        let fin = finished_mac(&master, "server finished", &self.transcript.current());
        self.emit(&mut out, &HandshakeMessage::new(HandshakeType::Finished, fin.to_vec()), Protection::Aead12, false)?;
        if self.ep.config.mode == Mode::SessionResumption {
            self.pending.session = Some((self.session_id.clone(), master.clone()));
        }
        self.master = Some(master);
        self.state = State::Done;
        Ok(out)
    }

    /// Checks a 1.3 PSK offer; `None` means fall back to a full handshake.
    fn accept_psk(&self, ch: &c::ClientHello) -> Option<Vec<u8>> {
        let last = ch.extensions.last()?;
        if last.ext_type != ExtensionType::PRE_SHARED_KEY {
            return None;
        }
        let offer = c::PskOffer::decode(&last.data).ok()?;
        let psk = self.ep.sessions.read().open(&offer.identity)?;
        let mut zeroed = ch.clone();
        let mut blank = offer.clone();
        blank.binder = vec![0; V13_VERIFY_LEN];
        *zeroed.extensions.last_mut()? = blank.to_extension();
        let partial = zeroed.to_message().ok()?.encode().ok()?;
        let expected = prf(&psk, "tls13 resumption binder", &sha256(&partial), V13_VERIFY_LEN);
        (expected == offer.binder && psk.len() == PSK_LEN).then_some(psk)
    }

    fn hello13(&mut self, ch_msg: &HandshakeMessage, raw: &[u8], rng: &mut ChaCha20Rng) -> Result<Vec<Sent>, Abort> {
        let cfg = self.ep.config;
        let ch = c::ClientHello::decode_body(&ch_msg.body)?;
        self.client_random = ch.random;
        rng.fill_bytes(&mut self.server_random);
        self.transcript.update(raw);

        let ks = find_extension(&ch.extensions, ExtensionType::KEY_SHARE)
            .ok_or(Abort::DecodeError("missing key_share".into()))?;
        let peer_public = c::parse_key_share_client(&ks.data)?;
        let eph = EphemeralKey::generate(rng);
        let shared = eph.agree(&peer_public)?;
        let psk = if cfg.mode == Mode::SessionResumption {
            self.accept_psk(&ch)
        } else {
            None
        };
        self.resumed = psk.is_some();
        let mut ikm = psk.unwrap_or_else(|| vec![0; 48]);
        ikm.extend_from_slice(&shared);
        let master = tls13_master(&ikm, &self.client_random, &self.server_random);

        let selected = if self.resumed { Vec::new() } else { self.cached_info_selection(&ch)? };
        let ssc = if self.resumed { None } else { self.ssc_answer(&ch)? };

        let mut out = Vec::new();
        let mut sh_exts = vec![c::supported_versions_server(), c::key_share_server(eph.public_bytes())];
        if self.resumed {
            sh_exts.push(c::psk_selected(0));
        }
        let sh = c::ServerHello {
            legacy_version: c::TLS12,
            random: self.server_random,
            session_id: ch.session_id.clone(),
            cipher_suite: c::TLS_AES_256_GCM_SHA384,
            compression: 0,
            extensions: sh_exts,
        };
        self.emit(&mut out, &sh.to_message()?, Protection::Plain, false)?;

        let mut ee_exts = Vec::new();
        if !selected.is_empty() {
            ee_exts.push(CachedInfo::Selection(selected.clone()).to_extension());
        }
        if let Some(s) = ssc {
            ee_exts.push(s.to_extension());
        }
        let ee = c::EncryptedExtensions { extensions: ee_exts };
        self.emit(&mut out, &ee.to_message()?, Protection::Aead13, false)?;

        if !self.resumed {
            if self.mutual() {
                self.cert_requested = true;
                let cr = c::CertificateRequest13 {
                    context: Vec::new(),
                    extensions: vec![c::signature_algorithms(), c::signature_algorithms_cert()],
                };
                self.emit(&mut out, &cr.to_message()?, Protection::Aead13, false)?;
            }
            let encodings = self.ep.credential.chain.transmitted_encodings();
            if selected.contains(&ObjectType::CERTIFICATE) {
                let msg = build_tls13_abbreviated_cert(&[], &vec![Vec::new(); encodings.len()])
                    .map_err(|e| Abort::DecodeError(e.to_string()))?;
                self.emit(&mut out, &msg, Protection::Aead13, true)?;
            } else {
                let msg = c::Certificate13 {
                    context: Vec::new(),
                    entries: encodings
                        .into_iter()
                        .map(|cert| c::CertEntry13 {
                            cert,
                            extensions: Vec::new(),
                        })
                        .collect(),
                }
                .to_message()?;
                self.emit(&mut out, &msg, Protection::Aead13, false)?;
            }
            let (scheme, signature) = self.sign(&cv13_input(CV_CONTEXT_SERVER, &self.transcript.current()))?;
            self.emit(&mut out, &c::CertificateVerify { scheme, signature }.to_message(), Protection::Aead13, false)?;
        }
        let fin = finished_mac_len(&master, "tls13 server finished", &self.transcript.current(), V13_VERIFY_LEN);
        self.emit(&mut out, &HandshakeMessage::new(HandshakeType::Finished, fin), Protection::Aead13, false)?;
        self.master = Some(master);
        self.state = State::WaitClient;
        Ok(out)
    }

    fn client_flight13(&mut self, msgs: &[HandshakeMessage], raw: &[Vec<u8>], rng: &mut ChaCha20Rng) -> Result<Vec<Sent>, Abort> {
        let mut it = msgs.iter().zip(raw);
        let (mut m, mut r) = it.next().ok_or(Abort::DecodeError("empty flight".into()))?;
        if self.cert_requested {
            expect_type(m, HandshakeType::Certificate)?;
            let c13 = c::Certificate13::decode_body(&m.body)?;
            if c13.entries.is_empty() {
                return Err(Abort::CertificateRejected(Rejection::BadChain));
            }
            if c13.entries.iter().all(|e| e.cert.is_empty()) {
                if self.ssc_hit.is_none() {
                    return Err(Abort::DecodeError("abbreviated certificate without selection".into()));
                }
                self.admit_client(None)?;
            } else {
                let canonical = convert_tls13_cert_msg(m).map_err(|e| Abort::DecodeError(e.to_string()))?;
                self.admit_client(Some(&canonical))?;
            }
            self.transcript.update(r);

            (m, r) = it.next().ok_or(Abort::DecodeError("missing CertificateVerify".into()))?;
            expect_type(m, HandshakeType::CertificateVerify)?;
            let cv = c::CertificateVerify::decode_body(&m.body)?;
            self.verify_client(&cv13_input(CV_CONTEXT_CLIENT, &self.transcript.current()), &cv.signature)?;
            self.transcript.update(r);
            (m, r) = it.next().ok_or(Abort::DecodeError("missing Finished".into()))?;
        }
        expect_type(m, HandshakeType::Finished)?;
        let master = self.master.clone().expect("master set");
        if m.body != finished_mac_len(&master, "tls13 client finished", &self.transcript.current(), V13_VERIFY_LEN) {
            return Err(Abort::FinishedMismatch);
        }
        self.transcript.update(r);
        if it.next().is_some() {
            return Err(Abort::DecodeError("trailing messages".into()));
        }
        self.state = State::Done;

        let mut out = Vec::new();
        if self.ep.config.mode == Mode::SessionResumption {
            let mut nonce = vec![0u8; 8];
            rng.fill_bytes(&mut nonce);
            let res = prf(master.as_bytes(), "tls13 resumption master", &self.transcript.current(), 48);
            let psk = prf(&res, "tls13 resumption", &nonce, PSK_LEN);
            let ticket = self.ep.sessions.read().seal(&psk, self.ep.config.resumption_ticket_len, rng);
            let nst = c::NewSessionTicket {
                lifetime: 7200,
                age_add: rng.next_u32(),
                nonce,
                ticket,
            };
            // post-handshake message: not part of the transcript hash
            let s = Sent::new(&nst.to_message(), Protection::Aead13, false)?;
            out.push(s);
        }
        Ok(out)
    }

    pub fn finish(self) -> Result<Finished<ServerPending>, Abort> {
        let master = self.master.clone().ok_or(Abort::DecodeError("no master secret".into()))?;
        let mut pending = self.pending;
        if self.ssc_negotiated && !self.resumed {
            if let Some((fp, entry, object)) = self.client_object {
                let ticket = derive_ticket(&master, ObjectType::CERTIFICATE, &fp);
                pending.ticket = Some((ticket, fp, entry, object));
            }
        }
        Ok(Finished {
            keys: key_block(&master, &self.client_random, &self.server_random),
            master,
            counters: self.counters,
            pending,
            resumed: self.resumed,
            client_random: self.client_random,
            server_random: self.server_random,
            transcript_hash: self.transcript.current(),
        })
    }
}

pub(crate) fn commit(ep: &ServerEndpoint, p: ServerPending, effects: &mut CacheEffects) {
    if let Some((ticket, fp, entry, object)) = p.ticket {
        let mut cache = ep.cache.write();
        if let Some(old) = p.retired {
            cache.remove(&old);
        }
        cache.insert(ticket, ObjectType::CERTIFICATE, fp, entry, &object);
        effects.server_ticket = Some(ticket.0);
    }
    if p.session.is_some() || p.touched_session.is_some() {
        let mut s = ep.sessions.write();
        if let Some(sid) = p.touched_session {
            s.touch(&sid);
        }
        if let Some((sid, master)) = p.session {
            s.insert(sid, master);
            effects.session_stored = true;
        }
    }
}
