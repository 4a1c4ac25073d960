//! Externally visible QUIC wire image of UDP datagrams.
//!
//! Parses and builds the unencrypted part of draft-29 packets: long headers
//! (Initial, 0-RTT, Handshake, Retry), Version Negotiation, short headers,
//! and coalesced datagrams delimited by the long-header Length field. Nothing
//! here decrypts anything — payloads, tokens and packet numbers are opaque
//! byte ranges. This is exactly the view a middlebox has of QUIC traffic.
//!
//! Short headers carry no DCID length on the wire; the length is only known
//! from connection context. [`ParseContext`] carries those per-flow
//! expectations, and a short header parsed without one comes back with an
//! empty DCID and `dcid_ambiguous` set.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::conntable::{Direction, FiveTuple};

/// QUIC version this lab speaks by default (IETF draft 29).
pub const VERSION_DRAFT29: u32 = 0xff00_001d;

/// Maximum connection-ID length in QUIC version 1 / the drafts.
pub const MAX_CID_LEN: usize = 20;

/// Minimum length of a plausible stateless reset: 2 fixed bits + at least 38
/// unpredictable bits + a 128-bit token is 168 bits, i.e. 21 bytes.
pub const MIN_RESET_LEN: usize = 21;

const FORM_BIT: u8 = 0x80;
const FIXED_BIT: u8 = 0x40;
const LONG_TYPE_MASK: u8 = 0x30;

/// A QUIC connection ID: 0 to 20 bytes. Zero-length is a valid ID and
/// distinct from "absent". Equality is byte-wise.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConnectionId {
    len: u8,
    bytes: [u8; MAX_CID_LEN],
}

impl ConnectionId {
    pub const EMPTY: ConnectionId = ConnectionId { len: 0, bytes: [0; MAX_CID_LEN] };

    pub fn new(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() > MAX_CID_LEN {
            return Err(WireError::OversizedConnectionId(bytes.len()));
        }
        let mut buf = [0u8; MAX_CID_LEN];
        buf[..bytes.len()].copy_from_slice(bytes);
        Ok(Self { len: bytes.len() as u8, bytes: buf })
    }

    pub fn len(&self) -> usize {
        usize::from(self.len)
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.len()]
    }
}

impl AsRef<[u8]> for ConnectionId {
    fn as_ref(&self) -> &[u8] {
        self.as_bytes()
    }
}

impl TryFrom<&[u8]> for ConnectionId {
    type Error = WireError;

    fn try_from(bytes: &[u8]) -> Result<Self, WireError> {
        Self::new(bytes)
    }
}

impl fmt::Debug for ConnectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConnectionId({self})")
    }
}

impl fmt::Display for ConnectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("(empty)");
        }
        for b in self.as_bytes() {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Packet classification visible on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    Initial,
    ZeroRtt,
    Handshake,
    Retry,
    VersionNegotiation,
    Short,
}

impl PacketKind {
    pub fn is_long(&self) -> bool {
        !matches!(self, PacketKind::Short)
    }

    pub fn name(&self) -> &'static str {
        match self {
            PacketKind::Initial => "Initial",
            PacketKind::ZeroRtt => "0-RTT",
            PacketKind::Handshake => "Handshake",
            PacketKind::Retry => "Retry",
            PacketKind::VersionNegotiation => "VersionNegotiation",
            PacketKind::Short => "Short",
        }
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Byte range within the datagram a header was parsed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub offset: usize,
    pub len: usize,
}

impl Span {
    pub fn end(&self) -> usize {
        self.offset + self.len
    }

    pub fn slice<'a>(&self, datagram: &'a [u8]) -> Option<&'a [u8]> {
        datagram.get(self.offset..self.end())
    }
}

/// One parsed QUIC packet header.
///
/// `version` and `scid` are only present on long forms. `payload_span` covers
/// the opaque remainder of the packet (packet number + ciphertext for
/// Initial/0-RTT/Handshake/Short, token + tag for Retry, the version list for
/// Version Negotiation).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuicHeader {
    pub kind: PacketKind,
    pub version: Option<u32>,
    pub dcid: ConnectionId,
    pub scid: Option<ConnectionId>,
    /// Set when a short header was parsed without a DCID-length expectation;
    /// the DCID is then empty and meaningless.
    pub dcid_ambiguous: bool,
    pub payload_span: Span,
}

/// Per-flow parsing knowledge: which QUIC versions to accept and the DCID
/// length expected on short headers, keyed by flow and packet direction.
#[derive(Debug, Clone)]
pub struct ParseContext {
    accepted_versions: BTreeSet<u32>,
    expected_dcid_lengths: BTreeMap<(FiveTuple, Direction), u8>,
}

impl Default for ParseContext {
    fn default() -> Self {
        let mut accepted_versions = BTreeSet::new();
        accepted_versions.insert(VERSION_DRAFT29);
        Self { accepted_versions, expected_dcid_lengths: BTreeMap::new() }
    }
}

impl ParseContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accept_version(&mut self, version: u32) {
        self.accepted_versions.insert(version);
    }

    pub fn accepts_version(&self, version: u32) -> bool {
        self.accepted_versions.contains(&version)
    }

    pub fn accepted_versions(&self) -> impl Iterator<Item = u32> + '_ {
        self.accepted_versions.iter().copied()
    }

    /// Records the DCID length expected on short headers of `flow` travelling
    /// in `dir`. Lengths above 20 are invalid and ignored.
    pub fn expect_dcid_len(&mut self, tuple: FiveTuple, dir: Direction, len: u8) {
        debug_assert!(usize::from(len) <= MAX_CID_LEN);
        if usize::from(len) <= MAX_CID_LEN {
            self.expected_dcid_lengths.insert((tuple, dir), len);
        }
    }

    pub fn expected_dcid_len(&self, tuple: &FiveTuple, dir: Direction) -> Option<u8> {
        self.expected_dcid_lengths.get(&(*tuple, dir)).copied()
    }

    /// Drops the expectations for both directions of `tuple`, e.g. after the
    /// tracking entry was destroyed.
    pub fn forget_flow(&mut self, tuple: &FiveTuple) {
        self.expected_dcid_lengths.remove(&(*tuple, Direction::Original));
        self.expected_dcid_lengths.remove(&(*tuple, Direction::Reply));
    }
}

/// Shape analysis of a datagram against the stateless-reset wire structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeReport {
    /// First byte has the form bit clear and the fixed bit set, i.e. the
    /// datagram starts like a short-header packet.
    pub plausible_short_header: bool,
    /// Datagram is at least 21 bytes, the minimum for 2 fixed bits, 38
    /// unpredictable bits and a 128-bit token.
    pub meets_min_length: bool,
    /// The final 16 bytes — where a reset token would sit — when the length
    /// permits.
    pub token_window: Option<[u8; 16]>,
}

impl ShapeReport {
    pub fn is_plausible_reset(&self) -> bool {
        self.plausible_short_header && self.meets_min_length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireError {
    EmptyPayload,
    /// Truncated field, bad bit pattern, or connection-ID length over 20.
    MalformedHeader(&'static str),
    /// Long header with a version outside the accepted set (and not 0).
    UnsupportedVersion(u32),
    OversizedConnectionId(usize),
}

impl WireError {
    pub fn name(&self) -> &'static str {
        match self {
            WireError::EmptyPayload => "EmptyPayload",
            WireError::MalformedHeader(_) => "MalformedHeader",
            WireError::UnsupportedVersion(_) => "UnsupportedVersion",
            WireError::OversizedConnectionId(_) => "OversizedConnectionId",
        }
    }
}

impl fmt::Display for WireError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WireError::EmptyPayload => f.write_str("EmptyPayload: datagram has no bytes"),
            WireError::MalformedHeader(why) => write!(f, "MalformedHeader: {why}"),
            WireError::UnsupportedVersion(v) => write!(f, "UnsupportedVersion: {v:#010x}"),
            WireError::OversizedConnectionId(n) => {
                write!(f, "OversizedConnectionId: {n} bytes (max {MAX_CID_LEN})")
            }
        }
    }
}

impl core::error::Error for WireError {}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, WireError> {
        let b = *self.buf.get(self.pos).ok_or(WireError::MalformedHeader(what))?;
        self.pos += 1;
        Ok(b)
    }

    fn be32(&mut self, what: &'static str) -> Result<u32, WireError> {
        let end = self.pos.checked_add(4).ok_or(WireError::MalformedHeader(what))?;
        let bytes = self.buf.get(self.pos..end).ok_or(WireError::MalformedHeader(what))?;
        self.pos = end;
        Ok(u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]))
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).ok_or(WireError::MalformedHeader(what))?;
        let bytes = self.buf.get(self.pos..end).ok_or(WireError::MalformedHeader(what))?;
        self.pos = end;
        Ok(bytes)
    }

    /// QUIC variable-length integer: the two high bits of the first byte give
    /// the encoding length (1, 2, 4 or 8 bytes), the rest is the big-endian
    /// value.
    fn varint(&mut self, what: &'static str) -> Result<u64, WireError> {
        let first = self.u8(what)?;
        let extra = match first >> 6 {
            0 => 0,
            1 => 1,
            2 => 3,
            _ => 7,
        };
        let mut value = u64::from(first & 0x3f);
        for _ in 0..extra {
            value = (value << 8) | u64::from(self.u8(what)?);
        }
        Ok(value)
    }

    fn cid(&mut self, what: &'static str) -> Result<ConnectionId, WireError> {
        let len = usize::from(self.u8(what)?);
        if len > MAX_CID_LEN {
            return Err(WireError::MalformedHeader("connection-ID length over 20"));
        }
        let bytes = self.take(len, what)?;
        ConnectionId::new(bytes)
    }
}

fn push_varint(value: u64, out: &mut Vec<u8>) {
    debug_assert!(value < 1 << 62);
    if value < 1 << 6 {
        out.push(value as u8);
    } else if value < 1 << 14 {
        out.extend_from_slice(&(0x4000u16 | value as u16).to_be_bytes());
    } else if value < 1 << 30 {
        out.extend_from_slice(&(0x8000_0000u32 | value as u32).to_be_bytes());
    } else {
        out.extend_from_slice(&(0xc000_0000_0000_0000u64 | value).to_be_bytes());
    }
}

/// Splits one UDP datagram into its QUIC packet headers, in wire order.
///
/// Coalesced long-header packets are delimited by their Length field; a
/// Retry, Version Negotiation or short-header packet consumes the remainder
/// of the datagram. `flow` identifies the datagram's flow so `ctx` can supply
/// the short-header DCID length; pass `None` when parsing out of context.
pub fn parse_datagram(
    payload: &[u8],
    ctx: &ParseContext,
    flow: Option<(FiveTuple, Direction)>,
) -> Result<Vec<QuicHeader>, WireError> {
    if payload.is_empty() {
        return Err(WireError::EmptyPayload);
    }
    let mut headers = Vec::new();
    let mut r = Reader::new(payload);
    while r.remaining() > 0 {
        let first = r.u8("first byte")?;
        if first & FORM_BIT != 0 {
            headers.push(parse_long(&mut r, first, ctx)?);
        } else {
            headers.push(parse_short(&mut r, first, ctx, flow)?);
        }
    }
    Ok(headers)
}

fn parse_long(r: &mut Reader<'_>, first: u8, ctx: &ParseContext) -> Result<QuicHeader, WireError> {
    let version = r.be32("version")?;
    if version == 0 {
        // Version Negotiation is identified by version 0 alone; the fixed bit
        // is unused there.
        let dcid = r.cid("version-negotiation DCID")?;
        let scid = r.cid("version-negotiation SCID")?;
        let payload_span = Span { offset: r.pos, len: r.remaining() };
        r.take(r.remaining(), "version list")?;
        return Ok(QuicHeader {
            kind: PacketKind::VersionNegotiation,
            version: Some(0),
            dcid,
            scid: Some(scid),
            dcid_ambiguous: false,
            payload_span,
        });
    }
    if first & FIXED_BIT == 0 {
        return Err(WireError::MalformedHeader("fixed bit clear on long header"));
    }
    if !ctx.accepts_version(version) {
        return Err(WireError::UnsupportedVersion(version));
    }
    let kind = match (first & LONG_TYPE_MASK) >> 4 {
        0 => PacketKind::Initial,
        1 => PacketKind::ZeroRtt,
        2 => PacketKind::Handshake,
        _ => PacketKind::Retry,
    };
    let dcid = r.cid("long-header DCID")?;
    let scid = r.cid("long-header SCID")?;
    let payload_span = match kind {
        PacketKind::Initial | PacketKind::ZeroRtt | PacketKind::Handshake => {
            if kind == PacketKind::Initial {
                // Token contents are opaque; only its length matters.
                let token_len = r.varint("token length")?;
                let token_len = usize::try_from(token_len)
                    .map_err(|_| WireError::MalformedHeader("token length overflow"))?;
                r.take(token_len, "token")?;
            }
            // The Length field covers packet number + ciphertext and is what
            // delimits coalesced packets. Both stay opaque.
            let len = r.varint("length")?;
            let len = usize::try_from(len)
                .map_err(|_| WireError::MalformedHeader("length overflow"))?;
            if len > r.remaining() {
                return Err(WireError::MalformedHeader("length exceeds datagram"));
            }
            let span = Span { offset: r.pos, len };
            r.take(len, "packet body")?;
            span
        }
        // Retry has no Length field and must be the last packet.
        _ => {
            let span = Span { offset: r.pos, len: r.remaining() };
            r.take(r.remaining(), "retry body")?;
            span
        }
    };
    Ok(QuicHeader {
        kind,
        version: Some(version),
        dcid,
        scid: Some(scid),
        dcid_ambiguous: false,
        payload_span,
    })
}

fn parse_short(
    r: &mut Reader<'_>,
    first: u8,
    ctx: &ParseContext,
    flow: Option<(FiveTuple, Direction)>,
) -> Result<QuicHeader, WireError> {
    if first & FIXED_BIT == 0 {
        return Err(WireError::MalformedHeader("fixed bit clear on short header"));
    }
    let expected = flow.and_then(|(tuple, dir)| ctx.expected_dcid_len(&tuple, dir));
    let (dcid, ambiguous) = match expected {
        Some(len) => (r.cid_raw(usize::from(len))?, false),
        None => (ConnectionId::EMPTY, true),
    };
    let payload_span = Span { offset: r.pos, len: r.remaining() };
    r.take(r.remaining(), "short body")?;
    Ok(QuicHeader {
        kind: PacketKind::Short,
        version: None,
        dcid,
        scid: None,
        dcid_ambiguous: ambiguous,
        payload_span,
    })
}

impl<'a> Reader<'a> {
    /// A DCID with no length prefix on the wire (short headers).
    fn cid_raw(&mut self, len: usize) -> Result<ConnectionId, WireError> {
        let bytes = self.take(len, "short-header DCID")?;
        ConnectionId::new(bytes)
    }
}

/// Emits a long-header packet such that [`parse_datagram`] returns exactly
/// the given fields; `payload` stands in for the encrypted packet number and
/// ciphertext (or the token+tag of a Retry, or a Version Negotiation's
/// version list) and is carried opaque.
///
/// Panics if `kind` is [`PacketKind::Short`]; use [`build_short_header`].
pub fn build_long_header(
    kind: PacketKind,
    version: u32,
    dcid: &[u8],
    scid: &[u8],
    payload: &[u8],
) -> Result<Vec<u8>, WireError> {
    assert!(kind.is_long(), "build_long_header needs a long-form kind");
    if dcid.len() > MAX_CID_LEN {
        return Err(WireError::OversizedConnectionId(dcid.len()));
    }
    if scid.len() > MAX_CID_LEN {
        return Err(WireError::OversizedConnectionId(scid.len()));
    }
    let mut out = Vec::with_capacity(16 + dcid.len() + scid.len() + payload.len());
    let (first, version) = match kind {
        PacketKind::Initial => (FORM_BIT | FIXED_BIT, version),
        PacketKind::ZeroRtt => (FORM_BIT | FIXED_BIT | 0x10, version),
        PacketKind::Handshake => (FORM_BIT | FIXED_BIT | 0x20, version),
        PacketKind::Retry => (FORM_BIT | FIXED_BIT | 0x30, version),
        PacketKind::VersionNegotiation => (FORM_BIT, 0),
        PacketKind::Short => unreachable!(),
    };
    out.push(first);
    out.extend_from_slice(&version.to_be_bytes());
    out.push(dcid.len() as u8);
    out.extend_from_slice(dcid);
    out.push(scid.len() as u8);
    out.extend_from_slice(scid);
    match kind {
        PacketKind::Initial => {
            push_varint(0, &mut out); // empty token
            push_varint(payload.len() as u64, &mut out);
        }
        PacketKind::ZeroRtt | PacketKind::Handshake => {
            push_varint(payload.len() as u64, &mut out);
        }
        _ => {}
    }
    out.extend_from_slice(payload);
    Ok(out)
}

/// Emits a short-header packet: form bit clear, fixed bit set, DCID appended
/// raw (its length exists only in connection context), payload opaque.
pub fn build_short_header(dcid: &[u8], payload: &[u8]) -> Result<Vec<u8>, WireError> {
    if dcid.len() > MAX_CID_LEN {
        return Err(WireError::OversizedConnectionId(dcid.len()));
    }
    let mut out = Vec::with_capacity(1 + dcid.len() + payload.len());
    out.push(FIXED_BIT);
    out.extend_from_slice(dcid);
    out.extend_from_slice(payload);
    Ok(out)
}

/// Checks a datagram against the stateless-reset wire structure. Total
/// function: never fails, any input gets a report.
pub fn stateless_reset_shape(payload: &[u8]) -> ShapeReport {
    let plausible_short_header = payload
        .first()
        .map(|b| b & (FORM_BIT | FIXED_BIT) == FIXED_BIT)
        .unwrap_or(false);
    let meets_min_length = payload.len() >= MIN_RESET_LEN;
    let token_window = if meets_min_length {
        let mut window = [0u8; 16];
        window.copy_from_slice(&payload[payload.len() - 16..]);
        Some(window)
    } else {
        None
    };
    ShapeReport { plausible_short_header, meets_min_length, token_window }
}
