//! Deterministic link model: record framing, MTU fragmentation and per-layer
//! byte accounting. No loss, no timing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("mtu {mtu} leaves no room after {headers} bytes of headers")]
    MtuTooSmall { mtu: usize, headers: usize },
}

pub const MAX_RECORD_PAYLOAD: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AckModel {
    None,
    /// One empty acknowledgment per flight.
    PerFlight,
    /// One acknowledgment per `n` data frames, at least one per flight.
    EveryNFrames(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordPolicy {
    /// Every handshake message in its own record.
    PerMessage,
    /// Consecutive messages with the same protection share records.
    Coalesce,
}

/// Record protection applied to a handshake message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protection {
    Plain,
    /// 1.2 AEAD record: 8-byte explicit nonce + 16-byte tag.
    Aead12,
    /// 1.3 protected record: 16-byte tag.
    Aead13,
}

impl Protection {
    pub fn overhead(self) -> usize {
        match self {
            Protection::Plain => 0,
            Protection::Aead12 => 24,
            Protection::Aead13 => 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkProfile {
    pub mtu: usize,
    pub link_header: usize,
    pub network_header: usize,
    pub transport_header: usize,
    pub record_header: usize,
    pub ack: AckModel,
    /// Count the 3-segment TCP connection setup.
    pub tcp_setup: bool,
    pub record_policy: RecordPolicy,
}

impl LinkProfile {
    /// Ethernet/IPv4/TCP defaults; MTU 127 switches to 802.15.4-style link
    /// framing.
    pub fn for_mtu(mtu: usize) -> Self {
        Self {
            mtu,
            link_header: if mtu <= 127 { 21 } else { 14 },
            network_header: 20,
            transport_header: 20,
            record_header: 5,
            ack: AckModel::PerFlight,
            tcp_setup: true,
            record_policy: RecordPolicy::PerMessage,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let headers = self.link_header + self.network_header + self.transport_header;
        if self.mtu > headers + 1 {
            Ok(())
        } else {
            Err(NetError::MtuTooSmall {
                mtu: self.mtu,
                headers,
            })
        }
    }

    /// Transport payload bytes per frame.
    pub fn segment_capacity(&self) -> usize {
        self.mtu - self.network_header - self.transport_header
    }

    pub fn frames_for(&self, payload_len: usize) -> usize {
        payload_len.div_ceil(self.segment_capacity()).max(1)
    }
}

impl Default for LinkProfile {
    fn default() -> Self {
        Self::for_mtu(1500)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByteLedger {
    pub tls_bytes: u64,
    pub transport_bytes: u64,
    pub network_bytes: u64,
    pub link_bytes: u64,
    pub frame_count: u64,
}

impl ByteLedger {
    /// Bytes on the wire across all layers.
    pub fn total(&self) -> u64 {
        self.link_bytes
    }

    pub fn is_ordered(&self) -> bool {
        self.link_bytes >= self.network_bytes
            && self.network_bytes >= self.transport_bytes
            && self.transport_bytes >= self.tls_bytes
    }

    pub fn add(&mut self, other: &ByteLedger) {
        self.tls_bytes += other.tls_bytes;
        self.transport_bytes += other.transport_bytes;
        self.network_bytes += other.network_bytes;
        self.link_bytes += other.link_bytes;
        self.frame_count += other.frame_count;
    }

    fn account_frames(&mut self, payload_len: usize, frames: usize, p: &LinkProfile) {
        let payload = payload_len as u64;
        let frames_u = frames as u64;
        self.tls_bytes += payload;
        self.transport_bytes += payload + frames_u * p.transport_header as u64;
        self.network_bytes += payload + frames_u * (p.transport_header + p.network_header) as u64;
        self.link_bytes +=
            payload + frames_u * (p.transport_header + p.network_header + p.link_header) as u64;
        self.frame_count += frames_u;
    }

    pub fn csv_row(&self, config: &str, version: &str, mtu: usize) -> LedgerRow {
        LedgerRow {
            config: config.to_string(),
            version: version.to_string(),
            mtu,
            tls_bytes: self.tls_bytes,
            transport_bytes: self.transport_bytes,
            network_bytes: self.network_bytes,
            link_bytes: self.link_bytes,
            frames: self.frame_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub config: String,
    pub version: String,
    pub mtu: usize,
    pub tls_bytes: u64,
    pub transport_bytes: u64,
    pub network_bytes: u64,
    pub link_bytes: u64,
    pub frames: u64,
}

/// Sends `payload_len` record-framed bytes as one burst. An empty payload is
/// a single header-only frame. Returns the number of frames.
pub fn transmit(payload_len: usize, profile: &LinkProfile, ledger: &mut ByteLedger) -> Result<usize, NetError> {
    profile.validate()?;
    let frames = profile.frames_for(payload_len);
    ledger.account_frames(payload_len, frames, profile);
    Ok(frames)
}

/// A handshake message as handed to the record layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutgoingMessage {
    pub handshake_len: usize,
    pub protection: Protection,
}

/// Record sizes for one flight. Each record carries at most
/// `MAX_RECORD_PAYLOAD` bytes of handshake data.
pub fn frame_records(flight: &[OutgoingMessage], profile: &LinkProfile) -> Vec<usize> {
    let mut records = Vec::new();
    let push = |len: usize, prot: Protection, records: &mut Vec<usize>| {
        let mut left = len;
        loop {
            let chunk = left.min(MAX_RECORD_PAYLOAD);
            records.push(profile.record_header + prot.overhead() + chunk);
            left -= chunk;
            if left == 0 {
                break;
            }
        }
    };
    match profile.record_policy {
        RecordPolicy::PerMessage => {
            for m in flight {
                push(m.handshake_len, m.protection, &mut records);
            }
        }
        RecordPolicy::Coalesce => {
            let mut i = 0;
            while i < flight.len() {
                let prot = flight[i].protection;
                let mut len = 0;
                while i < flight.len() && flight[i].protection == prot {
                    len += flight[i].handshake_len;
                    i += 1;
                }
                push(len, prot, &mut records);
            }
        }
    }
    records
}

/// TLS-layer bytes attributed to each message of a flight. Record overhead
/// of a coalesced record is charged to its first message, so the sum always
/// equals the sum of `frame_records`.
pub fn message_wire_sizes(flight: &[OutgoingMessage], profile: &LinkProfile) -> Vec<usize> {
    let mut sizes: Vec<usize> = flight.iter().map(|m| m.handshake_len).collect();
    let per_record = |prot: Protection, len: usize| {
        len.div_ceil(MAX_RECORD_PAYLOAD).max(1) * (profile.record_header + prot.overhead())
    };
    match profile.record_policy {
        RecordPolicy::PerMessage => {
            for (s, m) in sizes.iter_mut().zip(flight) {
                *s += per_record(m.protection, m.handshake_len);
            }
        }
        RecordPolicy::Coalesce => {
            let mut i = 0;
            while i < flight.len() {
                let first = i;
                let prot = flight[i].protection;
                let mut len = 0;
                while i < flight.len() && flight[i].protection == prot {
                    len += flight[i].handshake_len;
                    i += 1;
                }
                sizes[first] += per_record(prot, len);
            }
        }
    }
    sizes
}

/// Per-connection accounting: setup segments, flights and acknowledgments.
#[derive(Debug, Clone)]
pub struct Connection {
    profile: LinkProfile,
    pub ledger: ByteLedger,
}

impl Connection {
    pub fn open(profile: LinkProfile) -> Result<Self, NetError> {
        profile.validate()?;
        let mut ledger = ByteLedger::default();
        if profile.tcp_setup {
            for _ in 0..3 {
                transmit(0, &profile, &mut ledger)?;
            }
        }
        Ok(Self { profile, ledger })
    }

    pub fn profile(&self) -> &LinkProfile {
        &self.profile
    }

    /// Sends one flight; returns the record sizes it produced.
    pub fn send_flight(&mut self, flight: &[OutgoingMessage]) -> Result<Vec<usize>, NetError> {
        let records = frame_records(flight, &self.profile);
        let payload: usize = records.iter().sum();
        let frames = transmit(payload, &self.profile, &mut self.ledger)?;
        let acks = match self.profile.ack {
            AckModel::None => 0,
            AckModel::PerFlight => 1,
            AckModel::EveryNFrames(n) => frames.div_ceil(n.max(1) as usize).max(1),
        };
        for _ in 0..acks {
            transmit(0, &self.profile, &mut self.ledger)?;
        }
        Ok(records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bare(mtu: usize) -> LinkProfile {
        LinkProfile {
            link_header: 14,
            ..LinkProfile::for_mtu(mtu)
        }
    }

    #[test]
    fn two_frames_at_540() {
        let mut l = ByteLedger::default();
        assert_eq!(transmit(1000, &bare(540), &mut l).unwrap(), 2);
        assert_eq!(l.tls_bytes, 1000);
        assert_eq!(l.transport_bytes, 1040);
        assert_eq!(l.network_bytes, 1080);
        assert_eq!(l.link_bytes, 1108);
    }

    #[test]
    fn small_mtu_fragments_more() {
        let mut big = ByteLedger::default();
        let mut small = ByteLedger::default();
        transmit(1000, &bare(540), &mut big).unwrap();
        assert_eq!(transmit(1000, &bare(127), &mut small).unwrap(), 12);
        assert_eq!(small.tls_bytes, big.tls_bytes);
        assert!(small.link_bytes > big.link_bytes);
    }

    #[test]
    fn empty_payload_is_one_header_frame() {
        let mut l = ByteLedger::default();
        assert_eq!(transmit(0, &bare(1500), &mut l).unwrap(), 1);
        assert_eq!(l.tls_bytes, 0);
        assert_eq!(l.link_bytes, 54);
    }

    #[test]
    fn mtu_too_small() {
        let mut l = ByteLedger::default();
        let p = LinkProfile::for_mtu(62);
        assert_eq!(
            transmit(10, &p, &mut l),
            Err(NetError::MtuTooSmall { mtu: 62, headers: 61 })
        );
        assert!(LinkProfile::for_mtu(63).validate().is_ok());
        assert_eq!(LinkProfile::for_mtu(127).link_header, 21);
    }

    #[test]
    fn abbreviated_certificate_record_is_42() {
        let recs = frame_records(
            &[OutgoingMessage { handshake_len: 37, protection: Protection::Plain }],
            &LinkProfile::default(),
        );
        assert_eq!(recs, vec![42]);
    }

    #[test]
    fn coalesced_flight_adds_one_header_per_record() {
        let sizes = [87usize, 791, 333, 30, 4];
        let flight: Vec<_> = sizes
            .iter()
            .map(|&l| OutgoingMessage { handshake_len: l, protection: Protection::Plain })
            .collect();
        let p = LinkProfile { record_policy: RecordPolicy::Coalesce, ..LinkProfile::default() };
        let recs = frame_records(&flight, &p);
        assert_eq!(recs.iter().sum::<usize>(), sizes.iter().sum::<usize>() + 5);
        let per = frame_records(&flight, &LinkProfile::default());
        assert_eq!(per.iter().sum::<usize>(), sizes.iter().sum::<usize>() + 5 * sizes.len());
    }

    #[test]
    fn per_message_sizes_sum_to_records() {
        let flight = [
            OutgoingMessage { handshake_len: 86, protection: Protection::Plain },
            OutgoingMessage { handshake_len: 20_000, protection: Protection::Plain },
            OutgoingMessage { handshake_len: 16, protection: Protection::Aead12 },
        ];
        for policy in [RecordPolicy::PerMessage, RecordPolicy::Coalesce] {
            let p = LinkProfile { record_policy: policy, ..LinkProfile::default() };
            let sizes = message_wire_sizes(&flight, &p);
            assert_eq!(sizes.iter().sum::<usize>(), frame_records(&flight, &p).iter().sum::<usize>());
        }
        assert_eq!(message_wire_sizes(&flight, &LinkProfile::default())[2], 45);
    }

    #[test]
    fn aead13_adds_sixteen_per_record() {
        let m = |p| OutgoingMessage { handshake_len: 500, protection: p };
        let plain = frame_records(&[m(Protection::Plain), m(Protection::Plain)], &LinkProfile::default());
        let enc = frame_records(&[m(Protection::Aead13), m(Protection::Aead13)], &LinkProfile::default());
        for (a, b) in plain.iter().zip(&enc) {
            assert_eq!(b - a, 16);
        }
    }

    #[test]
    fn oversize_message_splits_records() {
        let recs = frame_records(
            &[OutgoingMessage { handshake_len: MAX_RECORD_PAYLOAD + 10, protection: Protection::Plain }],
            &LinkProfile::default(),
        );
        assert_eq!(recs, vec![5 + MAX_RECORD_PAYLOAD, 15]);
    }

    #[test]
    fn connection_setup_and_acks() {
        let mut c = Connection::open(LinkProfile::default()).unwrap();
        assert_eq!(c.ledger.frame_count, 3);
        c.send_flight(&[OutgoingMessage { handshake_len: 100, protection: Protection::Plain }]).unwrap();
        assert_eq!(c.ledger.frame_count, 5);
        assert_eq!(c.ledger.tls_bytes, 105);

        let p = LinkProfile { ack: AckModel::EveryNFrames(2), tcp_setup: false, ..LinkProfile::for_mtu(576) };
        let mut c = Connection::open(p).unwrap();
        c.send_flight(&[OutgoingMessage { handshake_len: 2000, protection: Protection::Plain }]).unwrap();
        // 2005 bytes over 536-byte segments = 4 frames, 2 acks
        assert_eq!(c.ledger.frame_count, 6);
    }

    proptest! {
        #[test]
        fn frame_count_matches_bytewise_fill(len in 0usize..20_000, mtu in 63usize..2000) {
            let p = LinkProfile::for_mtu(mtu);
            prop_assume!(p.validate().is_ok());
            let cap = p.segment_capacity();
            let mut frames = 0usize;
            let mut fill = cap;
            for _ in 0..len {
                if fill == cap {
                    frames += 1;
                    fill = 0;
                }
                fill += 1;
            }
            prop_assert_eq!(p.frames_for(len), frames.max(1));
        }

        #[test]
        fn layers_ordered_and_link_monotone(lens in proptest::collection::vec(0usize..5000, 1..8)) {
            let mut prev_link = u64::MAX;
            let mut tls = None;
            for mtu in [127usize, 576, 1500] {
                let mut l = ByteLedger::default();
                for &n in &lens {
                    transmit(n, &LinkProfile::for_mtu(mtu), &mut l).unwrap();
                    prop_assert!(l.is_ordered());
                }
                prop_assert!(l.link_bytes <= prev_link);
                prev_link = l.link_bytes;
                if let Some(t) = tls {
                    prop_assert_eq!(t, l.tls_bytes);
                }
                tls = Some(l.tls_bytes);
            }
        }
    }
}
