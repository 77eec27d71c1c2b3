//! Acceptance checks, one per criterion. Runs without the libtest harness so
//! every PASS/FAIL line is printed; exits non-zero if any criterion fails.

use std::collections::HashSet;
use std::sync::OnceLock;

use hscache::bench::{
    self, credential, credential_for, endpoints, key_agreement_trials, run_grid, Cell, ChainProfile, Report, Verdict,
    CRL_URL,
};
use hscache::caches::ClientObjectCache;
use hscache::certs::{abbreviate, validate_cached, validate_chain, ChainParams, NeverRevoked, RevokedSerials, Validity};
use hscache::codec::{HandshakeType, ObjectType};
use hscache::crypto::Scheme;
use hscache::handshake::{
    run_handshake, run_handshake_with, Auth, ClientEndpoint, Hooks, Mode, Role, ServerEndpoint, SessionConfig, Version,
    DEFAULT_NOW,
};
use hscache::netsim::LinkProfile;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use ChainProfile::*;
use Mode::*;
use Version::*;

const SEED: u64 = 1;

fn grid() -> &'static Report {
    static REPORT: OnceLock<Report> = OnceLock::new();
    REPORT.get_or_init(|| run_grid(&bench::paper_grid(2, SEED)).expect("reference grid runs"))
}

fn verdicts() -> &'static [Verdict] {
    static V: OnceLock<Vec<Verdict>> = OnceLock::new();
    V.get_or_init(|| bench::compare_to_paper(grid()).expect("all cells present"))
}

fn row(version: Version, mode: Mode, mtu: usize, chain: ChainProfile) -> &'static bench::Row {
    grid().get(&Cell { version, mode, mtu, chain }).expect("cell present")
}

fn close(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= target * rel
}

fn verdict(n: u8, name: &str, pass: bool, detail: String) -> bool {
    println!("criterion {n:>2} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

/// The library's own evaluation must reach the same result.
fn library_agrees(n: u8, pass: bool) {
    if let Some(v) = verdicts().iter().find(|v| v.criterion == n) {
        assert_eq!(v.pass, pass, "library verdict disagrees for criterion {n}");
    }
}

fn rng(label: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(label)
}

fn criterion_01_single_cert_calibration() -> bool {
    let v12 = row(V12, Vanilla, 1500, SingleRsa2048).mean.tls;
    let v13 = row(V13, Vanilla, 1500, SingleRsa2048).mean.tls;
    let pass = close(v12, 2578.0, 0.05) && close(v13, 2806.0, 0.05);
    library_agrees(1, pass);
    verdict(1, "single-cert totals", pass, format!("V12 {v12:.0} B (2578 ±5%), V13 {v13:.0} B (2806 ±5%)"))
}

fn criterion_02_abbreviated_sizes() -> bool {
    let (vc, vs) = endpoints(V12, Vanilla, Rsa2048x3, Auth::Mutual, SEED).unwrap();
    let link = LinkProfile::default();
    let mut r = rng(2);
    let base = run_handshake(&vc, &vs, &link, &mut r).unwrap();
    let (c, s) = endpoints(V12, Bithac, Rsa2048x3, Auth::Mutual, SEED).unwrap();
    let cold = run_handshake(&c, &s, &link, &mut r).unwrap();
    let warm = run_handshake(&c, &s, &link, &mut r).unwrap();
    let hello = |o: &hscache::handshake::HandshakeOutcome| -> i64 {
        o.transcript
            .iter()
            .filter(|e| matches!(e.msg_type, HandshakeType::ClientHello | HandshakeType::ServerHello))
            .map(|e| e.handshake_len as i64)
            .sum()
    };
    let server_cert = warm.wire_len_of(Role::Server, HandshakeType::Certificate).unwrap();
    let client_cert = warm
        .transcript
        .iter()
        .find(|e| e.sender == Role::Client && e.msg_type == HandshakeType::Certificate)
        .unwrap()
        .handshake_len;
    let growth = hello(&warm) - hello(&base);
    let signal = hello(&cold) - hello(&base);
    let pass = server_cert == 42 && (7..=9).contains(&client_cert) && (growth - 111).abs() <= 15 && signal == 8;
    verdict(
        2,
        "abbreviated sizes",
        pass,
        format!("server Certificate {server_cert} B, client Certificate {client_cert} B, hello growth {growth} B, cold signal {signal} B"),
    )
}

fn criterion_03_savings_bands() -> bool {
    let mut pass = true;
    let mut parts = Vec::new();
    for mtu in [127, 576, 1500] {
        let [v, r, b, s] = [Vanilla, Rfc7924, Bithac, SessionResumption].map(|m| row(V12, m, mtu, Rsa2048x3).mean.link);
        let rfc = (v - r) / v * 100.0;
        let bit = (r - b) / r * 100.0;
        let ordered = v > r && r > b && b > s;
        let ok = (27.58 - 5.0..=31.67 + 5.0).contains(&rfc) && (38.86 - 5.0..=43.25 + 5.0).contains(&bit) && ordered;
        pass &= ok;
        parts.push(format!(
            "mtu {mtu}: rfc7924 {rfc:.2}%, bithac {bit:.2}% beyond rfc7924 ({:.2}% vs vanilla), ordered {ordered}",
            (v - b) / v * 100.0
        ));
    }
    library_agrees(3, pass);
    verdict(3, "total-byte savings bands", pass, parts.join("; "))
}

fn criterion_04_best_tls_reduction() -> bool {
    let best = grid()
        .rows
        .iter()
        .filter(|r| r.cell.mode == Bithac)
        .map(|r| {
            let v = grid().get(&Cell { mode: Vanilla, ..r.cell }).unwrap().mean.tls;
            ((v - r.mean.tls) / v * 100.0, r.cell.label())
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let pass = best.0 >= 55.0;
    library_agrees(4, pass);
    verdict(4, "best TLS-layer reduction", pass, format!("{:.2}% at {} (>= 55%)", best.0, best.1))
}

fn criterion_05_large_key_scaling() -> bool {
    let v = row(V12, Vanilla, 1500, Rsa4096x3).mean.tls;
    let b = row(V12, Bithac, 1500, Rsa4096x3).mean.tls;
    let pass = close(v, 5667.0, 0.10) && close(b, 1494.0, 0.10);
    library_agrees(5, pass);
    verdict(5, "4096-bit server chain", pass, format!("vanilla {v:.0} B (5667 ±10%), bithac {b:.0} B (1494 ±10%)"))
}

fn criterion_06_tls13() -> bool {
    let v = row(V13, Vanilla, 1500, Rsa2048x3).mean.tls;
    let b = row(V13, Bithac, 1500, Rsa2048x3).mean.tls;
    let saving = (v - b) / v * 100.0;
    let gap = row(V13, Bithac, 1500, SingleRsa2048).mean.tls - row(V13, SessionResumption, 1500, SingleRsa2048).mean.tls;
    let pass = saving >= 50.0 && close(gap, 452.0, 0.25);
    library_agrees(6, pass);
    verdict(6, "TLS 1.3", pass, format!("bithac saves {saving:.2}% (>= 50%), resumption gap {gap:.0} B (452 ±25%)"))
}

fn criterion_07_verification_counts() -> bool {
    let mut pass = true;
    let mut parts = Vec::new();
    for version in [V12, V13] {
        let full = row(version, Vanilla, 1500, Rsa2048x3);
        let warm = row(version, Bithac, 1500, Rsa2048x3);
        let f = [full.client.signature_verifications, full.server.signature_verifications];
        let w = [warm.client.signature_verifications, warm.server.signature_verifications];
        pass &= f == [4, 4] && w == [1, 1];
        parts.push(format!("{}: full {f:?}, warm {w:?}", version.label()));
    }
    library_agrees(7, pass);
    verdict(7, "signature verifications per peer", pass, parts.join("; "))
}

fn criterion_08_memory_model() -> bool {
    let size = |p: ChainProfile| {
        let cred = credential(p, Role::Client, SEED).unwrap();
        let rep = validate_chain(&cred.chain, cred.trust_anchor(), DEFAULT_NOW, &NeverRevoked);
        abbreviate(&cred.chain, &rep, true).unwrap()
    };
    let rsa = size(Rsa2048x3);
    let ecc = size(Ecc256x3);
    let (r, e) = (rsa.encoded_len(), ecc.encoded_len());
    let mut cache = hscache::caches::ServerObjectCache::new();
    let fp = hscache::crypto::fingerprint(b"object");
    let mut single = 0;
    let mut linear = true;
    for n in 1..=100u64 {
        cache.insert(hscache::crypto::Ticket(n.to_be_bytes()), ObjectType::CERTIFICATE, fp, rsa.clone(), &[]);
        if n == 1 {
            single = cache.memory().total;
        }
        linear &= cache.memory().total == n as usize * single;
    }
    let pass = e < r && (300..=550).contains(&r) && (150..=350).contains(&e) && linear;
    verdict(8, "validation cache memory", pass, format!("RSA {r} B, ECC {e} B, 100 entries linear {linear}"))
}

/// Cached-vs-full validation agree over random windows, time sweeps and leaf
/// revocation.
fn oracle_equivalence() -> (usize, usize) {
    let mut r = rng(90);
    let (mut cases, mut bad) = (0, 0);
    for i in 0..40 {
        let len = 1 + (r.next_u32() % 3) as usize;
        let windows: Vec<Validity> = (0..len)
            .map(|_| {
                let nb = DEFAULT_NOW - 1_000 + r.next_u64() % 1_000;
                Validity::new(nb, nb + 1_000 + r.next_u64() % 2_000)
            })
            .collect();
        let params = ChainParams::new(Scheme::Null, 256, len, windows[0]).with_windows(windows).named(&format!("oracle {i}"));
        let cred = credential_for(&params, SEED).unwrap();
        let t0 = DEFAULT_NOW + 100;
        let full = validate_chain(&cred.chain, cred.trust_anchor(), t0, &NeverRevoked);
        if !full.accepted {
            continue;
        }
        let entry = abbreviate(&cred.chain, &full, true).unwrap();
        let revoked = RevokedSerials([cred.chain.leaf().serial].into_iter().collect());
        for t in (DEFAULT_NOW - 1_200..DEFAULT_NOW + 3_200).step_by(37) {
            for rev in [&NeverRevoked as &dyn hscache::certs::RevocationCheck, &revoked] {
                cases += 1;
                let a = validate_chain(&cred.chain, cred.trust_anchor(), t, rev);
                let b = validate_cached(&entry, t, rev);
                if a.accepted != b.accepted || a.reason != b.reason {
                    if bad < 3 {
                        println!("  oracle mismatch: t={t} full {:?} cached {:?} entry {}..{}", a.reason, b.reason, entry.not_before_max, entry.not_after_min);
                    }
                    bad += 1;
                }
            }
        }
    }
    (cases, bad)
}

/// Several servers share one client cache; no connection may carry another
/// peer's fingerprints or tickets.
fn scoping_trace() -> (usize, usize) {
    let validity = Validity::new(DEFAULT_NOW - 86_400, DEFAULT_NOW + 86_400);
    let shared_objects = hscache::caches::shared(ClientObjectCache::new());
    let shared_tickets = hscache::caches::shared(hscache::caches::ClientTicketCache::new());
    let client_cred = credential_for(&ChainParams::new(Scheme::Null, 2048, 2, validity).named("scoped client"), SEED).unwrap();
    let mut peers = Vec::new();
    for k in 0..4 {
        let cred = credential_for(
            &ChainParams::new(Scheme::Null, 2048, 2, validity).named(&format!("scoped server {k}")).with_crl(CRL_URL),
            SEED,
        )
        .unwrap();
        let cfg = SessionConfig::new(V12, Bithac);
        let mut c = ClientEndpoint::new(cfg, Some(client_cred.clone()), cred.trust_anchor().clone());
        c.server_name = format!("server-{k}.plant.example");
        c.objects = shared_objects.clone();
        c.tickets = shared_tickets.clone();
        let s = ServerEndpoint::new(cfg, cred, Some(client_cred.trust_anchor().clone()));
        peers.push((c, s));
    }
    let mut r = rng(91);
    let link = LinkProfile::default();
    let (mut connections, mut leaks) = (0, 0);
    for _ in 0..60 {
        let k = (r.next_u32() % 4) as usize;
        let (c, s) = &peers[k];
        let own: HashSet<Vec<u8>> = shared_objects
            .read()
            .entries_for(&c.peer())
            .into_iter()
            .map(|(_, fp)| fp.0.to_vec())
            .collect();
        // identical objects (e.g. a shared CertificateRequest) may be scoped to several peers
        let foreign: Vec<Vec<u8>> = (0..4)
            .filter(|j| *j != k)
            .flat_map(|j| {
                let peer = peers[j].0.peer();
                let objs = shared_objects.read().entries_for(&peer).into_iter().map(|(_, fp)| fp.0.to_vec());
                let tix = shared_tickets.read().offer(&peer).into_iter().map(|(_, t)| t.0.to_vec());
                objs.chain(tix).collect::<Vec<_>>()
            })
            .filter(|f| !own.contains(f))
            .collect();
        let mut leaked = false;
        let mut inspect = |sender: Role, index: usize, flight: &mut Vec<Vec<u8>>| {
            if sender == Role::Client && index == 0 {
                leaked = foreign.iter().any(|f| flight[0].windows(f.len()).any(|w| w == f.as_slice()));
            }
        };
        let o = run_handshake_with(c, s, &link, &mut r, Hooks { tamper: Some(&mut inspect), between_flights: None });
        connections += 1;
        if leaked || !o.map(|o| o.client_keys == o.server_keys).unwrap_or(false) {
            leaks += 1;
        }
    }
    (connections, leaks)
}

fn ticket_distinctness() -> bool {
    let (c, s) = endpoints(V13, Bithac, Ecc256x3, Auth::Mutual, SEED).unwrap();
    let mut r = rng(92);
    let mut seen = HashSet::new();
    (0..100).all(|_| {
        let o = run_handshake(&c, &s, &LinkProfile::default(), &mut r).unwrap();
        o.effects.client_ticket.is_some_and(|t| seen.insert(t))
    })
}

/// Flips one bit of an offered ticket or fingerprint in the ClientHello.
fn bit_flips_abort() -> (usize, usize) {
    let (mut total, mut aborted) = (0, 0);
    for version in [V12, V13] {
        let (c, s) = endpoints(version, Bithac, Ecc256x3, Auth::Mutual, SEED).unwrap();
        let mut r = rng(93);
        let link = LinkProfile::default();
        run_handshake(&c, &s, &link, &mut r).unwrap();
        let ticket = c.tickets.read().offer(&c.peer())[0].1 .0.to_vec();
        let fp = c.objects.read().entries_for(&c.peer())[0].1 .0.to_vec();
        for needle in [ticket, fp] {
            for bit in 0..needle.len() * 8 {
                let mut flip = |sender: Role, index: usize, flight: &mut Vec<Vec<u8>>| {
                    if sender == Role::Client && index == 0 {
                        let ch = &mut flight[0];
                        let at = ch.windows(needle.len()).position(|w| w == needle.as_slice()).expect("offered");
                        ch[at + bit / 8] ^= 1 << (bit % 8);
                    }
                };
                total += 1;
                let hooks = Hooks { tamper: Some(&mut flip), between_flights: None };
                if run_handshake_with(&c, &s, &link, &mut r, hooks).is_err() {
                    aborted += 1;
                }
            }
        }
    }
    (total, aborted)
}

fn criterion_09_property_suite() -> bool {
    let trials = key_agreement_trials(1000, SEED).unwrap();
    let (oracle_cases, oracle_bad) = oracle_equivalence();
    let (connections, leaks) = scoping_trace();
    let distinct = ticket_distinctness();
    let downgrade = bench::downgrade_matches(SEED).unwrap();
    let (flips, aborted) = bit_flips_abort();
    let pass = trials.failures.is_empty()
        && oracle_cases > 0
        && oracle_bad == 0
        && leaks == 0
        && distinct
        && downgrade
        && flips == aborted;
    for f in &trials.failures {
        println!("  {f}");
    }
    verdict(
        9,
        "property suite",
        pass,
        format!(
            "{} key-agreement trials, {} failures; oracle {oracle_bad}/{oracle_cases} mismatches; scoping {leaks}/{connections} leaks; 100 tickets distinct {distinct}; downgrade equal {downgrade}; {aborted}/{flips} bit flips aborted",
            trials.trials,
            trials.failures.len()
        ),
    )
}

fn criterion_10_mtu_monotonicity() -> bool {
    let mut checked = 0;
    let mut violations = Vec::new();
    for r in grid().rows.iter().filter(|r| r.cell.mtu == 1500) {
        let at = |mtu| grid().get(&Cell { mtu, ..r.cell }).unwrap();
        let (a, b) = (at(127), at(576));
        checked += 1;
        if !(a.mean.tls == b.mean.tls && b.mean.tls == r.mean.tls && a.mean.link > b.mean.link && b.mean.link > r.mean.link) {
            violations.push(format!(
                "{}/{}/{} link {:.0}/{:.0}/{:.0}",
                r.cell.version.label(),
                r.cell.mode.label(),
                r.cell.chain.label(),
                a.mean.link,
                b.mean.link,
                r.mean.link
            ));
        }
    }
    let pass = violations.is_empty();
    library_agrees(10, pass);
    verdict(
        10,
        "MTU monotonicity",
        pass,
        format!("{checked} configurations, violations: [{}]", violations.join(", ")),
    )
}

fn main() {
    let criteria: [fn() -> bool; 10] = [
        criterion_01_single_cert_calibration,
        criterion_02_abbreviated_sizes,
        criterion_03_savings_bands,
        criterion_04_best_tls_reduction,
        criterion_05_large_key_scaling,
        criterion_06_tls13,
        criterion_07_verification_counts,
        criterion_08_memory_model,
        criterion_09_property_suite,
        criterion_10_mtu_monotonicity,
    ];
    let failed = criteria.iter().filter(|c| !c()).count();
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
