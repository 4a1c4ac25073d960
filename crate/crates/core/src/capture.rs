//! Classic pcap encoding and decoding, plus the Ethernet/IPv4/TCP/UDP frame
//! layers needed to move scenario traffic in and out of capture files.
//!
//! Only the de-facto classic format: 24-byte global header, 16-byte record
//! headers, either endianness per magic, microsecond or nanosecond
//! timestamps (nanoseconds are truncated to milliseconds). Link types:
//! Ethernet and raw IPv4. Frames that are not IPv4 TCP/UDP — ARP, IPv6,
//! fragments, truncated garbage — are skipped and counted, never fatal; only
//! structural pcap damage is.

use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;

use crate::conntable::{FiveTuple, Proto};
use crate::tracker::TcpFlags;

const MAGIC_USEC: u32 = 0xa1b2_c3d4;
const MAGIC_NSEC: u32 = 0xa1b2_3c4d;
const LINKTYPE_ETHERNET: u32 = 1;
const LINKTYPE_RAW_IP: u32 = 101;
const ETHERTYPE_IPV4: u16 = 0x0800;

/// Timestamp base written into exported files; readers only ever see
/// differences, so any fixed epoch works.
const EXPORT_BASE_SEC: u32 = 1_600_000_000;

/// Transport-layer content of one captured packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaptureBody {
    Tcp(TcpFlags),
    Udp(Vec<u8>),
}

/// One usable packet from a capture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRecord {
    /// Milliseconds relative to the first usable packet.
    pub at_ms: u64,
    pub tuple: FiveTuple,
    pub body: CaptureBody,
}

/// Decoded capture: usable records plus a count of skipped frames.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Capture {
    pub records: Vec<CaptureRecord>,
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureError {
    BadMagic(u32),
    TruncatedFile,
    UnsupportedLinkType(u32),
}

impl CaptureError {
    pub fn name(&self) -> &'static str {
        match self {
            CaptureError::BadMagic(_) => "BadMagic",
            CaptureError::TruncatedFile => "TruncatedFile",
            CaptureError::UnsupportedLinkType(_) => "UnsupportedLinkType",
        }
    }
}

impl fmt::Display for CaptureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaptureError::BadMagic(m) => write!(f, "BadMagic: {m:#010x} is not a classic pcap magic"),
            CaptureError::TruncatedFile => f.write_str("TruncatedFile: pcap structure cut short"),
            CaptureError::UnsupportedLinkType(l) => {
                write!(f, "UnsupportedLinkType: {l} (want Ethernet or raw IPv4)")
            }
        }
    }
}

impl core::error::Error for CaptureError {}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    big_endian: bool,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CaptureError> {
        let end = self.pos.checked_add(n).ok_or(CaptureError::TruncatedFile)?;
        let bytes = self.buf.get(self.pos..end).ok_or(CaptureError::TruncatedFile)?;
        self.pos = end;
        Ok(bytes)
    }

    fn u16(&mut self) -> Result<u16, CaptureError> {
        let b = self.take(2)?;
        Ok(if self.big_endian {
            u16::from_be_bytes([b[0], b[1]])
        } else {
            u16::from_le_bytes([b[0], b[1]])
        })
    }

    fn u32(&mut self) -> Result<u32, CaptureError> {
        let b = self.take(4)?;
        Ok(if self.big_endian {
            u32::from_be_bytes([b[0], b[1], b[2], b[3]])
        } else {
            u32::from_le_bytes([b[0], b[1], b[2], b[3]])
        })
    }

    fn done(&self) -> bool {
        self.pos >= self.buf.len()
    }
}

/// Parses a classic pcap image into transport records.
pub fn read_pcap(bytes: &[u8]) -> Result<Capture, CaptureError> {
    let mut c = Cursor { buf: bytes, pos: 0, big_endian: false };
    let magic_raw = c.u32()?;
    let (big_endian, nanos) = match magic_raw {
        MAGIC_USEC => (false, false),
        MAGIC_NSEC => (false, true),
        m if m == MAGIC_USEC.swap_bytes() => (true, false),
        m if m == MAGIC_NSEC.swap_bytes() => (true, true),
        other => return Err(CaptureError::BadMagic(other)),
    };
    c.big_endian = big_endian;
    let _version_major = c.u16()?;
    let _version_minor = c.u16()?;
    let _thiszone = c.u32()?;
    let _sigfigs = c.u32()?;
    let _snaplen = c.u32()?;
    let linktype = c.u32()?;
    if linktype != LINKTYPE_ETHERNET && linktype != LINKTYPE_RAW_IP {
        return Err(CaptureError::UnsupportedLinkType(linktype));
    }

    let mut out = Capture::default();
    let mut first_ts: Option<u64> = None;
    while !c.done() {
        let ts_sec = u64::from(c.u32()?);
        let ts_frac = u64::from(c.u32()?);
        let incl_len = c.u32()? as usize;
        let _orig_len = c.u32()?;
        let frame = c.take(incl_len)?;
        let ts_ms = ts_sec * 1000 + if nanos { ts_frac / 1_000_000 } else { ts_frac / 1000 };

        let ip = match linktype {
            LINKTYPE_ETHERNET => match strip_ethernet(frame) {
                Some(ip) => ip,
                None => {
                    out.skipped += 1;
                    continue;
                }
            },
            _ => frame,
        };
        match parse_ipv4(ip) {
            Some((tuple, body)) => {
                let base = *first_ts.get_or_insert(ts_ms);
                out.records.push(CaptureRecord {
                    at_ms: ts_ms.saturating_sub(base),
                    tuple,
                    body,
                });
            }
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

/// Returns the IPv4 payload of an Ethernet frame, or None for other
/// ethertypes.
fn strip_ethernet(frame: &[u8]) -> Option<&[u8]> {
    if frame.len() < 14 {
        return None;
    }
    let ethertype = u16::from_be_bytes([frame[12], frame[13]]);
    (ethertype == ETHERTYPE_IPV4).then(|| &frame[14..])
}

fn parse_ipv4(packet: &[u8]) -> Option<(FiveTuple, CaptureBody)> {
    if packet.len() < 20 || packet[0] >> 4 != 4 {
        return None;
    }
    let ihl = usize::from(packet[0] & 0x0f) * 4;
    if ihl < 20 || packet.len() < ihl {
        return None;
    }
    let total_len = usize::from(u16::from_be_bytes([packet[2], packet[3]]));
    if total_len < ihl || packet.len() < total_len {
        return None;
    }
    let flags_frag = u16::from_be_bytes([packet[6], packet[7]]);
    // More-fragments set or nonzero offset: reassembly is out of scope.
    if flags_frag & 0x2000 != 0 || flags_frag & 0x1fff != 0 {
        return None;
    }
    let src_ip = Ipv4Addr::new(packet[12], packet[13], packet[14], packet[15]);
    let dst_ip = Ipv4Addr::new(packet[16], packet[17], packet[18], packet[19]);
    let l4 = &packet[ihl..total_len];
    match packet[9] {
        6 => {
            if l4.len() < 20 {
                return None;
            }
            let src_port = u16::from_be_bytes([l4[0], l4[1]]);
            let dst_port = u16::from_be_bytes([l4[2], l4[3]]);
            let flags = l4[13];
            let body = CaptureBody::Tcp(TcpFlags {
                fin: flags & 0x01 != 0,
                syn: flags & 0x02 != 0,
                rst: flags & 0x04 != 0,
                ack: flags & 0x10 != 0,
            });
            Some((
                FiveTuple::new(Proto::Tcp, src_ip, src_port, dst_ip, dst_port),
                body,
            ))
        }
        17 => {
            if l4.len() < 8 {
                return None;
            }
            let src_port = u16::from_be_bytes([l4[0], l4[1]]);
            let dst_port = u16::from_be_bytes([l4[2], l4[3]]);
            let udp_len = usize::from(u16::from_be_bytes([l4[4], l4[5]]));
            if udp_len < 8 || udp_len > l4.len() {
                return None;
            }
            Some((
                FiveTuple::new(Proto::Udp, src_ip, src_port, dst_ip, dst_port),
                CaptureBody::Udp(l4[8..udp_len].to_vec()),
            ))
        }
        _ => None,
    }
}

/// Serializes records into a little-endian, microsecond, Ethernet-linktype
/// classic pcap image. `read_pcap` of the result reproduces tuples, order and
/// payloads exactly.
pub fn write_pcap(records: &[CaptureRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + records.len() * 96);
    out.extend_from_slice(&MAGIC_USEC.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes()); // thiszone
    out.extend_from_slice(&0u32.to_le_bytes()); // sigfigs
    out.extend_from_slice(&65535u32.to_le_bytes()); // snaplen
    out.extend_from_slice(&LINKTYPE_ETHERNET.to_le_bytes());
    for (index, record) in records.iter().enumerate() {
        let frame = build_frame(record, index as u16);
        let sec = EXPORT_BASE_SEC + (record.at_ms / 1000) as u32;
        let usec = ((record.at_ms % 1000) * 1000) as u32;
        out.extend_from_slice(&sec.to_le_bytes());
        out.extend_from_slice(&usec.to_le_bytes());
        out.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        out.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        out.extend_from_slice(&frame);
    }
    out
}

/// Locally administered MAC derived from the IP, purely cosmetic.
fn mac_for(ip: Ipv4Addr) -> [u8; 6] {
    let o = ip.octets();
    [0x02, 0x00, o[0], o[1], o[2], o[3]]
}

fn build_frame(record: &CaptureRecord, ip_id: u16) -> Vec<u8> {
    let t = &record.tuple;
    let l4 = match &record.body {
        CaptureBody::Tcp(flags) => build_tcp(t, *flags),
        CaptureBody::Udp(payload) => build_udp(t, payload),
    };
    let total_len = 20 + l4.len();
    let mut frame = Vec::with_capacity(14 + total_len);
    frame.extend_from_slice(&mac_for(t.dst_ip));
    frame.extend_from_slice(&mac_for(t.src_ip));
    frame.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());

    let mut ip = [0u8; 20];
    ip[0] = 0x45;
    ip[2..4].copy_from_slice(&(total_len as u16).to_be_bytes());
    ip[4..6].copy_from_slice(&ip_id.to_be_bytes());
    ip[6..8].copy_from_slice(&0x4000u16.to_be_bytes()); // don't fragment
    ip[8] = 64;
    ip[9] = match t.proto {
        Proto::Tcp => 6,
        Proto::Udp => 17,
    };
    ip[12..16].copy_from_slice(&t.src_ip.octets());
    ip[16..20].copy_from_slice(&t.dst_ip.octets());
    let csum = ones_complement(checksum_sum(&ip, 0));
    ip[10..12].copy_from_slice(&csum.to_be_bytes());
    frame.extend_from_slice(&ip);
    frame.extend_from_slice(&l4);
    frame
}

fn build_tcp(t: &FiveTuple, flags: TcpFlags) -> Vec<u8> {
    let mut seg = [0u8; 20];
    seg[0..2].copy_from_slice(&t.src_port.to_be_bytes());
    seg[2..4].copy_from_slice(&t.dst_port.to_be_bytes());
    seg[12] = 5 << 4; // data offset
    seg[13] = (u8::from(flags.fin))
        | (u8::from(flags.syn) << 1)
        | (u8::from(flags.rst) << 2)
        | (u8::from(flags.ack) << 4);
    seg[14..16].copy_from_slice(&65535u16.to_be_bytes());
    let csum = l4_checksum(t, 6, &seg);
    seg[16..18].copy_from_slice(&csum.to_be_bytes());
    seg.to_vec()
}

fn build_udp(t: &FiveTuple, payload: &[u8]) -> Vec<u8> {
    let mut seg = Vec::with_capacity(8 + payload.len());
    seg.extend_from_slice(&t.src_port.to_be_bytes());
    seg.extend_from_slice(&t.dst_port.to_be_bytes());
    seg.extend_from_slice(&((8 + payload.len()) as u16).to_be_bytes());
    seg.extend_from_slice(&[0, 0]);
    seg.extend_from_slice(payload);
    let csum = l4_checksum(t, 17, &seg);
    // Zero means "no checksum" in UDP; transmit the ones-complement form.
    let csum = if csum == 0 { 0xffff } else { csum };
    seg[6..8].copy_from_slice(&csum.to_be_bytes());
    seg
}

fn checksum_sum(bytes: &[u8], mut sum: u32) -> u32 {
    let mut chunks = bytes.chunks_exact(2);
    for pair in &mut chunks {
        sum += u32::from(u16::from_be_bytes([pair[0], pair[1]]));
    }
    if let [last] = chunks.remainder() {
        sum += u32::from(u16::from_be_bytes([*last, 0]));
    }
    sum
}

fn ones_complement(mut sum: u32) -> u16 {
    while sum >> 16 != 0 {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

fn l4_checksum(t: &FiveTuple, proto: u8, segment: &[u8]) -> u16 {
    let mut pseudo = [0u8; 12];
    pseudo[0..4].copy_from_slice(&t.src_ip.octets());
    pseudo[4..8].copy_from_slice(&t.dst_ip.octets());
    pseudo[9] = proto;
    pseudo[10..12].copy_from_slice(&(segment.len() as u16).to_be_bytes());
    let sum = checksum_sum(segment, checksum_sum(&pseudo, 0));
    ones_complement(sum)
}
