use super::{CodecError, Reader, Result, WriteExt};

/// Extension type codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtensionType(pub u16);

impl ExtensionType {
    pub const SERVER_NAME: Self = Self(0);
    pub const SUPPORTED_GROUPS: Self = Self(10);
    pub const EC_POINT_FORMATS: Self = Self(11);
    pub const SIGNATURE_ALGORITHMS: Self = Self(13);
    pub const ENCRYPT_THEN_MAC: Self = Self(22);
    pub const EXTENDED_MASTER_SECRET: Self = Self(23);
    /// IANA code point of the cached-information extension.
    pub const CACHED_INFO: Self = Self(25);
    pub const PRE_SHARED_KEY: Self = Self(41);
    pub const SUPPORTED_VERSIONS: Self = Self(43);
    pub const PSK_KEY_EXCHANGE_MODES: Self = Self(45);
    pub const SIGNATURE_ALGORITHMS_CERT: Self = Self(50);
    pub const KEY_SHARE: Self = Self(51);
    /// Static-client-information tickets. Private-use code point.
    pub const SSC: Self = Self(0xFE5C);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extension {
    pub ext_type: ExtensionType,
    pub data: Vec<u8>,
}

impl Extension {
    pub const HEADER_LEN: usize = 4;

    pub fn new(ext_type: ExtensionType, data: Vec<u8>) -> Self {
        Self { ext_type, data }
    }

    /// Zero-length extension used to signal support.
    pub fn signal(ext_type: ExtensionType) -> Self {
        Self::new(ext_type, Vec::new())
    }

    pub fn encoded_len(&self) -> usize {
        Self::HEADER_LEN + self.data.len()
    }
}

pub fn encode_extension(ext: &Extension) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(ext.encoded_len());
    write_extension(&mut out, ext)?;
    Ok(out)
}

fn write_extension(out: &mut Vec<u8>, ext: &Extension) -> Result<()> {
    if ext.data.len() > u16::MAX as usize {
        return Err(CodecError::OversizeExtension(ext.data.len()));
    }
    out.put_u16(ext.ext_type.0);
    out.put_vec16(&ext.data);
    Ok(())
}

/// Decodes exactly one extension.
pub fn decode_extension(bytes: &[u8]) -> Result<Extension> {
    let mut r = Reader::new(bytes);
    let ext = read_extension(&mut r)?;
    r.finish("trailing bytes after extension")?;
    Ok(ext)
}

pub fn read_extension(r: &mut Reader<'_>) -> Result<Extension> {
    let ext_type = ExtensionType(r.u16()?);
    let data = r.vec16()?.to_vec();
    Ok(Extension { ext_type, data })
}

/// `length(2) || extensions`.
pub fn encode_extension_list(exts: &[Extension]) -> Result<Vec<u8>> {
    let mut inner = Vec::new();
    for e in exts {
        write_extension(&mut inner, e)?;
    }
    if inner.len() > u16::MAX as usize {
        return Err(CodecError::OversizeExtension(inner.len()));
    }
    let mut out = Vec::with_capacity(inner.len() + 2);
    out.put_vec16(&inner);
    Ok(out)
}

pub fn read_extension_list(r: &mut Reader<'_>) -> Result<Vec<Extension>> {
    let mut inner = Reader::new(r.vec16()?);
    let mut exts = Vec::new();
    while !inner.is_empty() {
        exts.push(read_extension(&mut inner)?);
    }
    Ok(exts)
}

pub fn find_extension(exts: &[Extension], ty: ExtensionType) -> Option<&Extension> {
    exts.iter().find(|e| e.ext_type == ty)
}

/// Cached object types, shared between the cached-information and SSC
/// extensions.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct ObjectType(pub u8);

impl ObjectType {
    pub const CERTIFICATE: Self = Self(1);
    pub const CERTIFICATE_REQUEST: Self = Self(2);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachedObject {
    pub object_type: ObjectType,
    pub hash: Vec<u8>,
}

/// Cached-information extension body.
///
/// The client offers `(type, fingerprint)` pairs; the server answers with the
/// bare types it selected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CachedInfo {
    Offer(Vec<CachedObject>),
    Selection(Vec<ObjectType>),
}

impl CachedInfo {
    pub fn encode(&self) -> Vec<u8> {
        let mut inner = Vec::new();
        match self {
            CachedInfo::Offer(entries) => {
                for e in entries {
                    inner.put_u8(e.object_type.0);
                    inner.put_vec8(&e.hash);
                }
            }
            CachedInfo::Selection(types) => inner.extend(types.iter().map(|t| t.0)),
        }
        let mut out = Vec::with_capacity(inner.len() + 2);
        out.put_vec16(&inner);
        out
    }

    pub fn to_extension(&self) -> Extension {
        Extension::new(ExtensionType::CACHED_INFO, self.encode())
    }

    pub fn decode_offer(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        let mut list = Reader::new(r.vec16()?);
        r.finish("cached_info offer")?;
        let mut entries = Vec::new();
        while !list.is_empty() {
            let object_type = ObjectType(list.u8()?);
            let hash = list.vec8()?.to_vec();
            if hash.is_empty() {
                return Err(CodecError::Malformed("empty cached_info hash"));
            }
            entries.push(CachedObject { object_type, hash });
        }
        Ok(CachedInfo::Offer(entries))
    }

    pub fn decode_selection(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        let list = r.vec16()?;
        r.finish("cached_info selection")?;
        Ok(CachedInfo::Selection(list.iter().map(|&b| ObjectType(b)).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SscTicketEntry {
    pub object_type: ObjectType,
    pub ticket: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SscSelection {
    pub object_type: ObjectType,
    /// 0-based index into the client's offered list.
    pub ticket_index: u16,
}

/// Static-client-information extension body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SscExtension {
    /// Zero-length extension data.
    Support,
    ClientOffer(Vec<SscTicketEntry>),
    ServerSelection(Vec<SscSelection>),
}

impl SscExtension {
    pub fn encode(&self) -> Vec<u8> {
        let mut inner = Vec::new();
        match self {
            SscExtension::Support => return Vec::new(),
            SscExtension::ClientOffer(entries) => {
                for e in entries {
                    inner.put_u8(e.object_type.0);
                    inner.put_vec8(&e.ticket);
                }
            }
            SscExtension::ServerSelection(sel) => {
                for s in sel {
                    inner.put_u8(s.object_type.0);
                    inner.put_u16(s.ticket_index);
                }
            }
        }
        let mut out = Vec::with_capacity(inner.len() + 2);
        out.put_vec16(&inner);
        out
    }

    pub fn to_extension(&self) -> Extension {
        Extension::new(ExtensionType::SSC, self.encode())
    }

    pub fn decode_client(data: &[u8]) -> Result<Self> {
        if data.is_empty() {
            return Ok(SscExtension::Support);
        }
        let mut r = Reader::new(data);
        let mut list = Reader::new(r.vec16()?);
        r.finish("ssc client list")?;
        let mut entries = Vec::new();
        while !list.is_empty() {
            let object_type = ObjectType(list.u8()?);
            let ticket = list.vec8()?.to_vec();
            entries.push(SscTicketEntry {
                object_type,
                ticket,
            });
        }
        Ok(SscExtension::ClientOffer(entries))
    }

    pub fn decode_server(data: &[u8]) -> Result<Self> {
        if data.is_empty() {
            return Ok(SscExtension::Support);
        }
        let mut r = Reader::new(data);
        let mut list = Reader::new(r.vec16()?);
        r.finish("ssc server list")?;
        let mut sel = Vec::new();
        while !list.is_empty() {
            let object_type = ObjectType(list.u8()?);
            let ticket_index = list.u16()?;
            sel.push(SscSelection {
                object_type,
                ticket_index,
            });
        }
        Ok(SscExtension::ServerSelection(sel))
    }
}

// Baseline hello extensions. One cipher suite and one group per version.

pub const SECP256R1: u16 = 23;

/// Signature algorithms advertised in hellos and certificate requests.
pub const SIGNATURE_ALGORITHMS: [u16; 10] = [
    0x0403, 0x0503, 0x0603, 0x0804, 0x0805, 0x0806, 0x0401, 0x0501, 0x0601, 0x0201,
];

pub const SIGNATURE_ALGORITHMS_CERT: [u16; 7] =
    [0x0403, 0x0503, 0x0804, 0x0805, 0x0401, 0x0501, 0x0601];

fn u16_list(values: &[u16]) -> Vec<u8> {
    let mut inner = Vec::with_capacity(values.len() * 2);
    for v in values {
        inner.put_u16(*v);
    }
    let mut out = Vec::with_capacity(inner.len() + 2);
    out.put_vec16(&inner);
    out
}

pub fn server_name(host: &str) -> Extension {
    let mut entry = Vec::new();
    entry.put_u8(0);
    entry.put_vec16(host.as_bytes());
    let mut data = Vec::new();
    data.put_vec16(&entry);
    Extension::new(ExtensionType::SERVER_NAME, data)
}

pub fn parse_server_name(data: &[u8]) -> Result<String> {
    let mut r = Reader::new(data);
    let mut list = Reader::new(r.vec16()?);
    r.finish("server_name")?;
    if list.u8()? != 0 {
        return Err(CodecError::Malformed("server_name type"));
    }
    let name = list.vec16()?;
    String::from_utf8(name.to_vec()).map_err(|_| CodecError::Malformed("server_name utf8"))
}

pub fn supported_groups() -> Extension {
    Extension::new(ExtensionType::SUPPORTED_GROUPS, u16_list(&[SECP256R1]))
}

pub fn ec_point_formats() -> Extension {
    Extension::new(ExtensionType::EC_POINT_FORMATS, vec![1, 0])
}

pub fn signature_algorithms() -> Extension {
    Extension::new(
        ExtensionType::SIGNATURE_ALGORITHMS,
        u16_list(&SIGNATURE_ALGORITHMS),
    )
}

pub fn signature_algorithms_cert() -> Extension {
    Extension::new(
        ExtensionType::SIGNATURE_ALGORITHMS_CERT,
        u16_list(&SIGNATURE_ALGORITHMS_CERT),
    )
}

pub fn supported_versions_client() -> Extension {
    Extension::new(ExtensionType::SUPPORTED_VERSIONS, vec![2, 0x03, 0x04])
}

pub fn supported_versions_server() -> Extension {
    Extension::new(ExtensionType::SUPPORTED_VERSIONS, vec![0x03, 0x04])
}

pub fn psk_key_exchange_modes() -> Extension {
    // psk_dhe_ke only
    Extension::new(ExtensionType::PSK_KEY_EXCHANGE_MODES, vec![1, 1])
}

pub fn key_share_client(public: &[u8]) -> Extension {
    let mut entry = Vec::new();
    entry.put_u16(SECP256R1);
    entry.put_vec16(public);
    let mut data = Vec::new();
    data.put_vec16(&entry);
    Extension::new(ExtensionType::KEY_SHARE, data)
}

pub fn key_share_server(public: &[u8]) -> Extension {
    let mut data = Vec::new();
    data.put_u16(SECP256R1);
    data.put_vec16(public);
    Extension::new(ExtensionType::KEY_SHARE, data)
}

pub fn parse_key_share_client(data: &[u8]) -> Result<Vec<u8>> {
    let mut r = Reader::new(data);
    let mut list = Reader::new(r.vec16()?);
    r.finish("key_share")?;
    while !list.is_empty() {
        let group = list.u16()?;
        let key = list.vec16()?;
        if group == SECP256R1 {
            return Ok(key.to_vec());
        }
    }
    Err(CodecError::Malformed("no usable key share"))
}

pub fn parse_key_share_server(data: &[u8]) -> Result<Vec<u8>> {
    let mut r = Reader::new(data);
    if r.u16()? != SECP256R1 {
        return Err(CodecError::Malformed("key share group"));
    }
    let key = r.vec16()?.to_vec();
    r.finish("key_share")?;
    Ok(key)
}

/// Client `pre_shared_key` with a single identity and binder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PskOffer {
    pub identity: Vec<u8>,
    pub obfuscated_age: u32,
    pub binder: Vec<u8>,
}

impl PskOffer {
    pub fn encode(&self) -> Vec<u8> {
        let mut ids = Vec::new();
        ids.put_vec16(&self.identity);
        ids.put_u32(self.obfuscated_age);
        let mut binders = Vec::new();
        binders.put_vec8(&self.binder);
        let mut data = Vec::new();
        data.put_vec16(&ids);
        data.put_vec16(&binders);
        data
    }

    pub fn to_extension(&self) -> Extension {
        Extension::new(ExtensionType::PRE_SHARED_KEY, self.encode())
    }

    pub fn decode(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        let mut ids = Reader::new(r.vec16()?);
        let mut binders = Reader::new(r.vec16()?);
        r.finish("pre_shared_key")?;
        let identity = ids.vec16()?.to_vec();
        let obfuscated_age = ids.u32()?;
        let binder = binders.vec8()?.to_vec();
        Ok(Self {
            identity,
            obfuscated_age,
            binder,
        })
    }
}

pub fn psk_selected(index: u16) -> Extension {
    Extension::new(ExtensionType::PRE_SHARED_KEY, index.to_be_bytes().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn support_signal_is_four_bytes() {
        let e = SscExtension::Support.to_extension();
        let enc = encode_extension(&e).unwrap();
        assert_eq!(enc, vec![0xFE, 0x5C, 0, 0]);
        // client + server signal
        assert_eq!(enc.len() * 2, 8);
    }

    #[test]
    fn ssc_single_ticket_is_sixteen_bytes() {
        let e = SscExtension::ClientOffer(vec![SscTicketEntry {
            object_type: ObjectType::CERTIFICATE,
            ticket: vec![7; 8],
        }])
        .to_extension();
        assert_eq!(e.data.len(), 12);
        assert_eq!(encode_extension(&e).unwrap().len(), 16);
    }

    #[test]
    fn ssc_client_list_size_is_linear() {
        for n in 0..6usize {
            let entries = (0..n)
                .map(|i| SscTicketEntry {
                    object_type: ObjectType::CERTIFICATE,
                    ticket: vec![i as u8; 8],
                })
                .collect();
            let enc = encode_extension(&SscExtension::ClientOffer(entries).to_extension()).unwrap();
            assert_eq!(enc.len(), 4 + 2 + 10 * n);
        }
    }

    #[test]
    fn empty_server_list_differs_from_support() {
        let empty = SscExtension::ServerSelection(vec![]);
        assert_eq!(empty.encode(), vec![0, 0]);
        assert_eq!(SscExtension::decode_server(&[0, 0]).unwrap(), empty);
        assert_eq!(SscExtension::decode_server(&[]).unwrap(), SscExtension::Support);
    }

    #[test]
    fn decode_extension_edges() {
        let e = decode_extension(&[0, 25, 0, 0]).unwrap();
        assert!(e.data.is_empty());
        assert!(matches!(
            decode_extension(&[0, 25, 0, 9, 1]),
            Err(CodecError::Truncated { .. })
        ));
        assert!(matches!(decode_extension(&[0, 25]), Err(CodecError::Truncated { .. })));
        assert!(matches!(
            decode_extension(&[0, 25, 0, 0, 1]),
            Err(CodecError::LengthMismatch(_))
        ));
    }

    #[test]
    fn oversize_extension_rejected() {
        let e = Extension::new(ExtensionType::SSC, vec![0; 70_000]);
        assert_eq!(encode_extension(&e), Err(CodecError::OversizeExtension(70_000)));
    }

    #[test]
    fn cached_info_offer_layout() {
        let offer = CachedInfo::Offer(vec![
            CachedObject {
                object_type: ObjectType::CERTIFICATE,
                hash: vec![1; 32],
            },
            CachedObject {
                object_type: ObjectType::CERTIFICATE_REQUEST,
                hash: vec![2; 32],
            },
        ]);
        let ext = offer.to_extension();
        assert_eq!(ext.encoded_len(), 4 + 2 + 2 * 34);
        assert_eq!(CachedInfo::decode_offer(&ext.data).unwrap(), offer);
        let sel = CachedInfo::Selection(vec![ObjectType::CERTIFICATE, ObjectType::CERTIFICATE_REQUEST]);
        assert_eq!(sel.to_extension().encoded_len(), 8);
        assert_eq!(CachedInfo::decode_selection(&sel.encode()).unwrap(), sel);
    }

    #[test]
    fn server_name_round_trip() {
        let e = server_name("gateway.plant.example");
        assert_eq!(parse_server_name(&e.data).unwrap(), "gateway.plant.example");
    }

    fn arb_ext() -> impl Strategy<Value = Extension> {
        (any::<u16>(), proptest::collection::vec(any::<u8>(), 0..300))
            .prop_map(|(t, d)| Extension::new(ExtensionType(t), d))
    }

    proptest! {
        #[test]
        fn extension_round_trip(e in arb_ext()) {
            let enc = encode_extension(&e).unwrap();
            prop_assert_eq!(enc.len(), e.encoded_len());
            prop_assert_eq!(decode_extension(&enc).unwrap(), e);
        }

        #[test]
        fn typed_extensions_round_trip(
            tickets in proptest::collection::vec((1u8..3, proptest::collection::vec(any::<u8>(), 1..20)), 0..5),
            sel in proptest::collection::vec((1u8..3, any::<u16>()), 0..5),
            hashes in proptest::collection::vec((1u8..3, proptest::collection::vec(any::<u8>(), 1..64)), 0..4),
        ) {
            let offer = SscExtension::ClientOffer(tickets.into_iter().map(|(t, k)| SscTicketEntry { object_type: ObjectType(t), ticket: k }).collect());
            prop_assert_eq!(SscExtension::decode_client(&offer.encode()).unwrap(), offer);
            let selection = SscExtension::ServerSelection(sel.into_iter().map(|(t, i)| SscSelection { object_type: ObjectType(t), ticket_index: i }).collect());
            prop_assert_eq!(SscExtension::decode_server(&selection.encode()).unwrap(), selection);
            let ci = CachedInfo::Offer(hashes.into_iter().map(|(t, h)| CachedObject { object_type: ObjectType(t), hash: h }).collect());
            prop_assert_eq!(CachedInfo::decode_offer(&ci.encode()).unwrap(), ci);
        }

        #[test]
        fn extension_list_round_trip(exts in proptest::collection::vec(arb_ext(), 0..6)) {
            let enc = encode_extension_list(&exts).unwrap();
            let mut r = Reader::new(&enc);
            prop_assert_eq!(read_extension_list(&mut r).unwrap(), exts);
            prop_assert!(r.is_empty());
        }
    }
}
