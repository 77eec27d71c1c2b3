use std::sync::Arc;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{cell_seed, credential, credential_for, endpoints, run_grid, BenchError, Cell, ChainProfile, ExperimentSpec, Report};
use crate::caches::{ClientObjectCache, ServerObjectCache};
use crate::certs::{abbreviate, validate_chain, ChainParams, Credential, NeverRevoked, Validity};
use crate::codec::{HandshakeType, ObjectType};
use crate::crypto::{fingerprint, Scheme, Ticket};
use crate::handshake::{
    run_handshake, Auth, ClientEndpoint, HandshakeOutcome, Mode, Role, ServerEndpoint, SessionConfig, Version,
    DEFAULT_NOW,
};
use crate::netsim::LinkProfile;

pub const REFERENCE_MTUS: [usize; 3] = [127, 576, 1500];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: u8,
    pub name: String,
    pub measured: String,
    pub expected: String,
    pub pass: bool,
}

impl Verdict {
    fn new(criterion: u8, name: &str, measured: String, expected: &str, pass: bool) -> Self {
        Self {
            criterion,
            name: name.into(),
            measured,
            expected: expected.into(),
            pass,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {}: measured {}; expected {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.measured,
            self.expected
        )
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= target * rel
}

/// Every cell the comparison needs.
pub fn paper_grid(repetitions: usize, seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        versions: vec![Version::V12, Version::V13],
        modes: Mode::ALL.to_vec(),
        mtus: REFERENCE_MTUS.to_vec(),
        chains: vec![ChainProfile::Rsa2048x3, ChainProfile::Rsa4096x3, ChainProfile::SingleRsa2048],
        repetitions,
        warm: true,
        auth: Auth::Mutual,
        seed,
    }
}

fn cell(version: Version, mode: Mode, mtu: usize, chain: ChainProfile) -> Cell {
    Cell { version, mode, mtu, chain }
}

/// Criteria that read straight off a report: 1, 3, 4, 5, 6, 7 and 10.
pub fn compare_to_paper(report: &Report) -> Result<Vec<Verdict>, BenchError> {
    use ChainProfile::*;
    use Mode::*;
    use Version::*;
    let mut out = Vec::new();

    // 1
    let v12 = report.get(&cell(V12, Vanilla, 1500, SingleRsa2048))?.mean.tls;
    let v13 = report.get(&cell(V13, Vanilla, 1500, SingleRsa2048))?.mean.tls;
    out.push(Verdict::new(
        1,
        "single-cert handshake calibration",
        format!("V12 {v12:.0} B, V13 {v13:.0} B"),
        "V12 2578 B ±5%, V13 2806 B ±5%",
        within(v12, 2578.0, 0.05) && within(v13, 2806.0, 0.05),
    ));

    // 3
    let mut parts = Vec::new();
    let mut ok = true;
    for mtu in REFERENCE_MTUS {
        let rows: Vec<_> = [Vanilla, Rfc7924, Bithac, SessionResumption]
            .iter()
            .map(|m| report.get(&cell(V12, *m, mtu, Rsa2048x3)))
            .collect::<Result<_, _>>()?;
        let rfc = rows[1].savings_vs_vanilla.expect("vanilla present").total;
        let bithac = rows[2].savings_vs_rfc7924.expect("rfc7924 present").total;
        let ordered = rows.windows(2).all(|w| w[0].mean.link > w[1].mean.link);
        ok &= (22.58..=36.67).contains(&rfc) && (33.86..=48.25).contains(&bithac) && ordered;
        parts.push(format!(
            "mtu {mtu}: rfc7924 {rfc:.2}%, bithac {bithac:.2}% (vs vanilla {:.2}%), ordered {ordered}",
            rows[2].savings_vs_vanilla.expect("vanilla present").total
        ));
    }
    out.push(Verdict::new(
        3,
        "total-byte savings bands",
        parts.join("; "),
        "rfc7924 vs vanilla 27.58-31.67% ±5pp; bithac vs rfc7924 38.86-43.25% ±5pp; vanilla > rfc7924 > bithac > resume",
        ok,
    ));

    // 4
    let best = report
        .rows
        .iter()
        .filter(|r| r.cell.mode == Bithac)
        .filter_map(|r| r.savings_vs_vanilla.map(|s| (s.tls, r.cell)))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let (best_tls, best_cell) = best.ok_or_else(|| BenchError::MissingCell("any bithac cell".into()))?;
    out.push(Verdict::new(
        4,
        "best TLS-layer reduction",
        format!("{best_tls:.2}% at {}", best_cell.label()),
        ">= 55%",
        best_tls >= 55.0,
    ));

    // 5
    let van = report.get(&cell(V12, Vanilla, 1500, Rsa4096x3))?.mean.tls;
    let bit = report.get(&cell(V12, Bithac, 1500, Rsa4096x3))?.mean.tls;
    out.push(Verdict::new(
        5,
        "4096-bit server chain",
        format!("vanilla {van:.0} B, bithac {bit:.0} B"),
        "5667 B ±10% -> 1494 B ±10%",
        within(van, 5667.0, 0.10) && within(bit, 1494.0, 0.10),
    ));

    // 6
    let s13 = report
        .get(&cell(V13, Bithac, 1500, Rsa2048x3))?
        .savings_vs_vanilla
        .expect("vanilla present")
        .tls;
    let bit13 = report.get(&cell(V13, Bithac, 1500, SingleRsa2048))?.mean.tls;
    let res13 = report.get(&cell(V13, SessionResumption, 1500, SingleRsa2048))?.mean.tls;
    let gap = bit13 - res13;
    out.push(Verdict::new(
        6,
        "TLS 1.3 behaviour",
        format!("bithac saves {s13:.2}% TLS bytes (3-chain); resumption gap {gap:.0} B (single cert)"),
        "saving >= 50%; gap 452 B ±25%",
        s13 >= 50.0 && within(gap, 452.0, 0.25),
    ));

    // 7
    let mut parts = Vec::new();
    let mut ok = true;
    for v in [V12, V13] {
        let full = report.get(&cell(v, Vanilla, 1500, Rsa2048x3))?;
        let warm = report.get(&cell(v, Bithac, 1500, Rsa2048x3))?;
        let f = (full.client.signature_verifications, full.server.signature_verifications);
        let w = (warm.client.signature_verifications, warm.server.signature_verifications);
        ok &= f == (4, 4) && w == (1, 1);
        parts.push(format!("{}: full {}/{}, warm {}/{}", v.label(), f.0, f.1, w.0, w.1));
    }
    out.push(Verdict::new(
        7,
        "signature verifications per peer (client/server)",
        parts.join("; "),
        "full 4/4, warm bithac 1/1 (75% fewer)",
        ok,
    ));

    // 10
    let mut violations = Vec::new();
    let mut checked = 0;
    for r in report.rows.iter().filter(|r| r.cell.mtu == 1500) {
        let at = |mtu| report.get(&Cell { mtu, ..r.cell });
        if let (Ok(a), Ok(b)) = (at(127), at(576)) {
            checked += 1;
            let tls_equal = a.mean.tls == b.mean.tls && b.mean.tls == r.mean.tls;
            let strict = a.mean.link > b.mean.link && b.mean.link > r.mean.link;
            if !(tls_equal && strict) {
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
    }
    if checked == 0 {
        return Err(BenchError::MissingCell("MTU triple".into()));
    }
    let ok = violations.is_empty();
    out.push(Verdict::new(
        10,
        "MTU monotonicity",
        if ok {
            format!("{checked} configurations checked")
        } else {
            format!("{checked} configurations checked; violations: {}", violations.join(", "))
        },
        "tls equal, link(127) > link(576) > link(1500)",
        ok,
    ));
    Ok(out)
}

fn hello_bytes(o: &HandshakeOutcome) -> usize {
    o.transcript
        .iter()
        .filter(|e| matches!(e.msg_type, HandshakeType::ClientHello | HandshakeType::ServerHello | HandshakeType::EncryptedExtensions))
        .map(|e| e.handshake_len)
        .sum()
}

/// Warm and cold handshakes for one configuration: (cold, warm).
fn cold_and_warm(version: Version, mode: Mode, chain: ChainProfile, seed: u64) -> Result<(HandshakeOutcome, HandshakeOutcome), BenchError> {
    let (c, s) = endpoints(version, mode, chain, Auth::Mutual, seed)?;
    let link = LinkProfile::default();
    let mut rng = ChaCha20Rng::seed_from_u64(cell_seed(seed, "probe"));
    let cold = run_handshake(&c, &s, &link, &mut rng)?;
    let warm = run_handshake(&c, &s, &link, &mut rng)?;
    Ok((cold, warm))
}

/// Criterion 2 (abbreviated sizes and signalling overhead).
pub fn constant_sizes(seed: u64) -> Result<Verdict, BenchError> {
    let (van, _) = cold_and_warm(Version::V12, Mode::Vanilla, ChainProfile::Rsa2048x3, seed)?;
    let (cold, warm) = cold_and_warm(Version::V12, Mode::Bithac, ChainProfile::Rsa2048x3, seed)?;
    let server_cert = warm
        .transcript
        .iter()
        .find(|e| e.sender == Role::Server && e.msg_type == HandshakeType::Certificate)
        .map(|e| e.wire_len)
        .unwrap_or(0);
    let client_cert = warm
        .transcript
        .iter()
        .find(|e| e.sender == Role::Client && e.msg_type == HandshakeType::Certificate)
        .map(|e| e.handshake_len)
        .unwrap_or(0);
    let growth = hello_bytes(&warm) as i64 - hello_bytes(&van) as i64;
    let signal = hello_bytes(&cold) as i64 - hello_bytes(&van) as i64;
    Ok(Verdict::new(
        2,
        "abbreviated message sizes",
        format!(
            "server Certificate {server_cert} B on the wire, client Certificate {client_cert} B, hello growth {growth} B, cold signal {signal} B"
        ),
        "42 B exactly; 7-9 B; 111 ±15 B; 8 B exactly",
        server_cert == 42 && (7..=9).contains(&client_cert) && (96..=126).contains(&growth) && signal == 8,
    ))
}

/// Criterion 8 (validation cache entry sizes and linear memory).
pub fn memory_model(seed: u64) -> Result<Verdict, BenchError> {
    let entry_len = |profile: ChainProfile| -> Result<usize, BenchError> {
        let cred = credential(profile, Role::Client, seed)?;
        let report = validate_chain(&cred.chain, cred.trust_anchor(), DEFAULT_NOW, &NeverRevoked);
        Ok(abbreviate(&cred.chain, &report, true)?.encoded_len())
    };
    let rsa = entry_len(ChainProfile::Rsa2048x3)?;
    let ecc = entry_len(ChainProfile::Ecc256x3)?;

    let cred = credential(ChainProfile::Rsa2048x3, Role::Client, seed)?;
    let report = validate_chain(&cred.chain, cred.trust_anchor(), DEFAULT_NOW, &NeverRevoked);
    let entry = abbreviate(&cred.chain, &report, true)?;
    let fp = fingerprint(b"client certificate");
    let mut cache = ServerObjectCache::new();
    cache.insert(Ticket([0; 8]), ObjectType::CERTIFICATE, fp, entry.clone(), &[]);
    let single = cache.memory().total;
    let n = 64u32;
    for i in 1..n {
        let mut t = [0u8; 8];
        t[4..].copy_from_slice(&i.to_be_bytes());
        cache.insert(Ticket(t), ObjectType::CERTIFICATE, fp, entry.clone(), &[]);
    }
    let linear = cache.memory().total == n as usize * single;
    Ok(Verdict::new(
        8,
        "validation cache memory",
        format!("RSA-2048 entry {rsa} B, ECC-256 entry {ecc} B, {n} entries linear: {linear}"),
        "ECC < RSA; RSA 300-550 B; ECC 150-350 B; total = n x single",
        ecc < rsa && (300..=550).contains(&rsa) && (150..=350).contains(&ecc) && linear,
    ))
}

/// Result of a randomized key-agreement run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub failures: Vec<String>,
}

type CredentialPair = (Arc<Credential>, Arc<Credential>);

fn random_pool(seed: u64) -> Result<Vec<CredentialPair>, BenchError> {
    let validity = Validity::new(DEFAULT_NOW - 86_400, DEFAULT_NOW + 86_400 * 365);
    let mut pool = Vec::new();
    for (scheme, bits) in [(Scheme::Null, 2048), (Scheme::EcdsaP256, 256)] {
        for len in 1..=3 {
            let p = |name: &str| ChainParams::new(scheme, bits, len, validity).named(name).with_crl(super::CRL_URL);
            pool.push((credential_for(&p("random server"), seed)?, credential_for(&p("random client"), seed)?));
        }
    }
    pool.push((
        credential(ChainProfile::SingleRsa2048, Role::Server, seed)?,
        credential(ChainProfile::SingleRsa2048, Role::Client, seed)?,
    ));
    Ok(pool)
}

/// Randomized key-agreement trials over mode × version × auth × cache state
/// × chain × MTU, including mismatched client/server modes. Each trial checks
/// key equality, transcript-hash equality and ledger consistency.
pub fn key_agreement_trials(n: usize, seed: u64) -> Result<TrialSummary, BenchError> {
    let pool = random_pool(seed)?;
    let trial = |i: usize| -> Option<String> {
        let mut rng = ChaCha20Rng::seed_from_u64(cell_seed(seed, &format!("trial {i}")));
        let pick = |rng: &mut ChaCha20Rng, k: usize| rng.next_u32() as usize % k;
        let version = [Version::V12, Version::V13][pick(&mut rng, 2)];
        let cmode = Mode::ALL[pick(&mut rng, 4)];
        let smode = if pick(&mut rng, 4) == 0 { Mode::ALL[pick(&mut rng, 4)] } else { cmode };
        let auth = if pick(&mut rng, 5) == 0 { Auth::ServerOnly } else { Auth::Mutual };
        let (sc, cc) = &pool[pick(&mut rng, pool.len())];
        let mtu = REFERENCE_MTUS[pick(&mut rng, 3)];
        let primes = pick(&mut rng, 3);
        // 0: keep caches, 1: server forgets everything, 2: client forgets objects
        let evict = [0, 0, 0, 0, 1, 2][pick(&mut rng, 6)];

        let mut ccfg = SessionConfig::new(version, cmode);
        ccfg.auth = auth;
        let mut scfg = ccfg;
        scfg.mode = smode;
        let client = ClientEndpoint::new(ccfg, Some(cc.clone()), sc.trust_anchor().clone());
        let server = ServerEndpoint::new(scfg, sc.clone(), Some(cc.trust_anchor().clone()));
        let link = LinkProfile::for_mtu(mtu);
        let desc = format!("trial {i}: {version:?} client {cmode:?} server {smode:?} {auth:?} mtu {mtu} primes {primes} evict {evict}");
        for _ in 0..primes {
            if let Err(e) = run_handshake(&client, &server, &link, &mut rng) {
                return Some(format!("{desc}: priming aborted: {e}"));
            }
        }
        match evict {
            1 => {
                *server.cache.write() = ServerObjectCache::new();
                let mut sessions = server.sessions.write();
                sessions.evict_lru(0);
                sessions.rotate_ticket_key([i as u8; 32]);
            }
            2 => *client.objects.write() = ClientObjectCache::new(),
            _ => {}
        }
        match run_handshake(&client, &server, &link, &mut rng) {
            Err(e) => Some(format!("{desc}: aborted: {e}")),
            Ok(o) => {
                let wire: usize = o.transcript.iter().map(|e| e.wire_len).sum();
                if !o.completed || o.client_keys != o.server_keys {
                    Some(format!("{desc}: keys differ"))
                } else if o.client_transcript_hash != o.server_transcript_hash {
                    Some(format!("{desc}: transcripts differ"))
                } else if wire as u64 != o.ledger.tls_bytes {
                    Some(format!("{desc}: ledger {} != transcript {wire}", o.ledger.tls_bytes))
                } else {
                    None
                }
            }
        }
    };
    let idx: Vec<usize> = (0..n).collect();
    let failures = crate::par::map(&idx, |i| trial(*i)).into_iter().flatten().collect();
    Ok(TrialSummary { trials: n, failures })
}

/// Downgrade check: with Bithac on one side only, every message after the
/// ClientHello matches a Vanilla handshake in type and size. The ClientHello
/// may still carry the ignored offers.
pub fn downgrade_matches(seed: u64) -> Result<bool, BenchError> {
    let mut ok = true;
    for version in [Version::V12, Version::V13] {
        let (vc, vs) = endpoints(version, Mode::Vanilla, ChainProfile::Rsa2048x3, Auth::Mutual, seed)?;
        let link = LinkProfile::default();
        let mut rng = ChaCha20Rng::seed_from_u64(cell_seed(seed, "downgrade"));
        let base = run_handshake(&vc, &vs, &link, &mut rng)?;
        for (cm, sm) in [(Mode::Bithac, Mode::Vanilla), (Mode::Vanilla, Mode::Bithac)] {
            let (mut c, mut s) = endpoints(version, cm, ChainProfile::Rsa2048x3, Auth::Mutual, seed)?;
            c.config.mode = cm;
            s.config.mode = sm;
            for _ in 0..2 {
                let o = run_handshake(&c, &s, &link, &mut rng)?;
                ok &= o.message_types() == base.message_types();
                ok &= o
                    .transcript
                    .iter()
                    .zip(&base.transcript)
                    .filter(|(e, _)| e.msg_type != HandshakeType::ClientHello)
                    .all(|(e, b)| e.handshake_len == b.handshake_len);
            }
        }
    }
    Ok(ok)
}

/// Criteria 2, 8 and a reduced criterion 9, evaluated by direct probes.
pub fn probes(seed: u64, trials: usize) -> Result<Vec<Verdict>, BenchError> {
    let summary = key_agreement_trials(trials, seed)?;
    let downgrade = downgrade_matches(seed)?;
    Ok(vec![
        constant_sizes(seed)?,
        memory_model(seed)?,
        Verdict::new(
            9,
            "key agreement and downgrade",
            format!(
                "{} trials, {} failures; downgrade transcripts equal: {downgrade}",
                summary.trials,
                summary.failures.len()
            ),
            "zero failures; equal message sequences",
            summary.failures.is_empty() && downgrade,
        ),
    ])
}

/// Runs the comparison grid and all probes; verdicts sorted by criterion.
pub fn verify_paper(repetitions: usize, seed: u64, trials: usize) -> Result<(Report, Vec<Verdict>), BenchError> {
    let report = run_grid(&paper_grid(repetitions, seed))?;
    let mut verdicts = compare_to_paper(&report)?;
    verdicts.extend(probes(seed, trials)?);
    verdicts.sort_by_key(|v| v.criterion);
    Ok((report, verdicts))
}
