//! Connection state table shared by all trackers.
//!
//! Entries are keyed by the 5-tuple of the packet that created them (the
//! *original* direction); lookups match either orientation. All time is a
//! caller-supplied logical clock in milliseconds — the table never reads a
//! wall clock, so runs are reproducible. Every mutation goes through
//! [`ConnTable::apply`] / [`ConnTable::destroy`] / [`ConnTable::sweep`], which
//! keeps the NEW/UPDATE/DESTROY event stream total.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;

use crate::wire::ConnectionId;

/// Transport protocol of a tracked flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Proto {
    Tcp,
    Udp,
}

impl fmt::Display for Proto {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Proto::Tcp => f.write_str("tcp"),
            Proto::Udp => f.write_str("udp"),
        }
    }
}

/// Classic flow key: protocol, addresses, ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FiveTuple {
    pub proto: Proto,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
}

impl FiveTuple {
    pub fn new(proto: Proto, src_ip: Ipv4Addr, src_port: u16, dst_ip: Ipv4Addr, dst_port: u16) -> Self {
        Self { proto, src_ip, dst_ip, src_port, dst_port }
    }

    /// Swaps source and destination; an involution.
    pub fn reversed(&self) -> Self {
        Self {
            proto: self.proto,
            src_ip: self.dst_ip,
            dst_ip: self.src_ip,
            src_port: self.dst_port,
            dst_port: self.src_port,
        }
    }
}

impl fmt::Display for FiveTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}:{} -> {}:{}",
            self.proto, self.src_ip, self.src_port, self.dst_ip, self.dst_port
        )
    }
}

/// Packet direction relative to the entry that tracks its flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    /// Same orientation as the packet that created the entry.
    Original,
    /// Reversed orientation.
    Reply,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Original => Direction::Reply,
            Direction::Reply => Direction::Original,
        }
    }
}

/// Connection tracking states, conntrack-style.
///
/// TCP entries use the TCP states; UDP entries under naive tracking use the
/// `Udp*` states; QUIC entries map their handshake onto the first three TCP
/// states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CtState {
    None,
    SynSent,
    SynRecv,
    Established,
    FinWait,
    CloseWait,
    LastAck,
    TimeWait,
    Close,
    UdpNew,
    UdpReplied,
    UdpAssured,
}

impl CtState {
    pub fn name(&self) -> &'static str {
        match self {
            CtState::None => "NONE",
            CtState::SynSent => "SYN_SENT",
            CtState::SynRecv => "SYN_RECV",
            CtState::Established => "ESTABLISHED",
            CtState::FinWait => "FIN_WAIT",
            CtState::CloseWait => "CLOSE_WAIT",
            CtState::LastAck => "LAST_ACK",
            CtState::TimeWait => "TIME_WAIT",
            CtState::Close => "CLOSE",
            CtState::UdpNew => "UDP_NEW",
            CtState::UdpReplied => "UDP_REPLIED",
            CtState::UdpAssured => "UDP_ASSURED",
        }
    }
}

impl fmt::Display for CtState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// UNREPLIED / ASSURED labels carried by an entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EntryFlags {
    pub unreplied: bool,
    pub assured: bool,
}

impl EntryFlags {
    pub fn unreplied() -> Self {
        Self { unreplied: true, assured: false }
    }

    pub fn replied() -> Self {
        Self { unreplied: false, assured: false }
    }

    pub fn assured() -> Self {
        Self { unreplied: false, assured: true }
    }
}

/// Protocol-specific state attached to an entry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ConnExtra {
    #[default]
    None,
    Quic(QuicConnExtra),
}

impl ConnExtra {
    pub fn as_quic(&self) -> Option<&QuicConnExtra> {
        match self {
            ConnExtra::Quic(q) => Some(q),
            ConnExtra::None => None,
        }
    }
}

/// Connection IDs learned from the visible QUIC handshake.
///
/// The client's SCID identifies packets flowing *to the client* (they carry
/// it as DCID); the server's SCID identifies packets flowing *to the server*.
/// The server SCID stays pending until the first reply Initial is seen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuicConnExtra {
    pub client_scid: ConnectionId,
    pub server_scid: Option<ConnectionId>,
    pub mode: QuicTrackMode,
}

impl QuicConnExtra {
    /// DCID length expected on packets toward the client, i.e. the client
    /// SCID length.
    pub fn dcid_len_to_client(&self) -> usize {
        self.client_scid.len()
    }

    /// DCID length expected on packets toward the server, once known.
    pub fn dcid_len_to_server(&self) -> Option<usize> {
        self.server_scid.as_ref().map(|c| c.len())
    }

    /// The DCID a packet travelling in `dir` (relative to the entry) must
    /// carry: the SCID of whoever receives it.
    pub fn expected_dcid(&self, dir: Direction) -> Option<&ConnectionId> {
        match dir {
            // Original direction flows toward the server.
            Direction::Original => self.server_scid.as_ref(),
            Direction::Reply => Some(&self.client_scid),
        }
    }
}

/// Connection-ID matching policy for the QUIC tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuicTrackMode {
    /// Every post-handshake packet must carry the DCID negotiated in the
    /// visible Initial exchange.
    #[default]
    StrictDcid,
    /// Accept any well-formed QUIC packet on a tracked 5-tuple regardless of
    /// its connection ID (tolerates encrypted connection-ID migration).
    TupleFallback,
}

impl fmt::Display for QuicTrackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuicTrackMode::StrictDcid => f.write_str("strict"),
            QuicTrackMode::TupleFallback => f.write_str("fallback"),
        }
    }
}

/// One tracked connection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnEntry {
    /// Original-direction tuple; also the table key.
    pub tuple: FiveTuple,
    pub state: CtState,
    pub flags: EntryFlags,
    /// Logical milliseconds at which the entry dies unless refreshed.
    pub expiry: u64,
    pub extra: ConnExtra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    New,
    Update,
    Destroy,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::New => "NEW",
            EventKind::Update => "UPDATE",
            EventKind::Destroy => "DESTROY",
        }
    }
}

/// One record of the conntrack-style event stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub kind: EventKind,
    /// Logical milliseconds.
    pub at: u64,
    pub snapshot: ConnEntry,
}

impl Event {
    /// Line format mirroring conntrack tool output:
    /// `[NEW] udp UDP_NEW src=1.2.3.4:50000 dst=5.6.7.8:443 [UNREPLIED] t=0`
    pub fn to_line(&self) -> String {
        use core::fmt::Write;
        let e = &self.snapshot;
        let mut s = String::new();
        let _ = write!(
            s,
            "[{}] {} {} src={}:{} dst={}:{}",
            self.kind.name(),
            e.tuple.proto,
            e.state,
            e.tuple.src_ip,
            e.tuple.src_port,
            e.tuple.dst_ip,
            e.tuple.dst_port,
        );
        if e.flags.unreplied {
            s.push_str(" [UNREPLIED]");
        }
        if e.flags.assured {
            s.push_str(" [ASSURED]");
        }
        let _ = write!(s, " t={}", self.at);
        s
    }
}

/// Entry lifetimes in seconds, keyed by protocol and state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TtlPolicy {
    /// All UDP states, including QUIC-tracked flows.
    pub udp_s: u32,
    pub tcp_established_s: u32,
    pub tcp_time_wait_s: u32,
    /// Handshake and teardown states.
    pub tcp_transient_s: u32,
}

impl Default for TtlPolicy {
    fn default() -> Self {
        Self {
            udp_s: 30,
            tcp_established_s: 7440,
            tcp_time_wait_s: 120,
            tcp_transient_s: 60,
        }
    }
}

impl TtlPolicy {
    pub fn ttl_for(&self, proto: Proto, state: CtState) -> u32 {
        match proto {
            Proto::Udp => self.udp_s,
            Proto::Tcp => match state {
                CtState::Established => self.tcp_established_s,
                CtState::TimeWait => self.tcp_time_wait_s,
                _ => self.tcp_transient_s,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableError {
    /// `sweep` was called with a clock earlier than a previous sweep.
    ClockWentBackwards { last: u64, now: u64 },
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableError::ClockWentBackwards { last, now } => {
                write!(f, "clock went backwards: sweep at t={now} after t={last}")
            }
        }
    }
}

impl core::error::Error for TableError {}

/// The state table. Single writer; `Clone` gives an independent snapshot.
#[derive(Debug, Clone, Default)]
pub struct ConnTable {
    entries: BTreeMap<FiveTuple, ConnEntry>,
    log: Vec<Event>,
    last_sweep: Option<u64>,
    ttl: TtlPolicy,
}

impl ConnTable {
    pub fn new(ttl: TtlPolicy) -> Self {
        Self { entries: BTreeMap::new(), log: Vec::new(), last_sweep: None, ttl }
    }

    pub fn ttl_policy(&self) -> &TtlPolicy {
        &self.ttl
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Matches `tuple` against stored entries in either orientation.
    pub fn lookup(&self, tuple: &FiveTuple) -> Option<(&ConnEntry, Direction)> {
        if let Some(e) = self.entries.get(tuple) {
            return Some((e, Direction::Original));
        }
        self.entries
            .get(&tuple.reversed())
            .map(|e| (e, Direction::Reply))
    }

    /// Inserts or mutates the entry for `tuple` (either orientation), setting
    /// state, flags and expiry = `now + ttl_seconds`. `extra` replaces the
    /// stored protocol extra when `Some`. Emits NEW on insert, UPDATE on
    /// mutation.
    pub fn apply(
        &mut self,
        tuple: &FiveTuple,
        state: CtState,
        flags: EntryFlags,
        extra: Option<ConnExtra>,
        ttl_seconds: u32,
        now: u64,
    ) -> Event {
        debug_assert!(ttl_seconds > 0, "entry TTL must be positive");
        debug_assert!(!(flags.assured && flags.unreplied), "assured implies replied");
        let expiry = now + u64::from(ttl_seconds) * 1000;
        let key = if self.entries.contains_key(tuple) || !self.entries.contains_key(&tuple.reversed()) {
            *tuple
        } else {
            tuple.reversed()
        };
        let kind = if self.entries.contains_key(&key) {
            EventKind::Update
        } else {
            EventKind::New
        };
        let entry = self
            .entries
            .entry(key)
            .or_insert_with(|| ConnEntry {
                tuple: key,
                state,
                flags,
                expiry,
                extra: ConnExtra::None,
            });
        entry.state = state;
        entry.flags = flags;
        entry.expiry = expiry;
        if let Some(extra) = extra {
            entry.extra = extra;
        }
        let event = Event { kind, at: now, snapshot: entry.clone() };
        self.log.push(event.clone());
        event
    }

    /// Removes the entry for `tuple` (either orientation) right now, emitting
    /// DESTROY. Used for RST teardown.
    pub fn destroy(&mut self, tuple: &FiveTuple, now: u64) -> Option<Event> {
        let key = if self.entries.contains_key(tuple) { *tuple } else { tuple.reversed() };
        let entry = self.entries.remove(&key)?;
        let event = Event { kind: EventKind::Destroy, at: now, snapshot: entry };
        self.log.push(event.clone());
        Some(event)
    }

    /// Destroys every entry with `expiry <= now`. The clock must not move
    /// backwards across sweeps.
    pub fn sweep(&mut self, now: u64) -> Result<Vec<Event>, TableError> {
        if let Some(last) = self.last_sweep {
            if now < last {
                return Err(TableError::ClockWentBackwards { last, now });
            }
        }
        self.last_sweep = Some(now);
        let dead: Vec<FiveTuple> = self
            .entries
            .iter()
            .filter(|(_, e)| e.expiry <= now)
            .map(|(k, _)| *k)
            .collect();
        let mut events = Vec::with_capacity(dead.len());
        for key in dead {
            if let Some(entry) = self.entries.remove(&key) {
                let event = Event { kind: EventKind::Destroy, at: now, snapshot: entry };
                self.log.push(event.clone());
                events.push(event);
            }
        }
        Ok(events)
    }

    /// Full event log since construction (or since the last `take_events`).
    pub fn events(&self) -> &[Event] {
        &self.log
    }

    /// Drains accumulated events, leaving the log empty.
    pub fn take_events(&mut self) -> Vec<Event> {
        core::mem::take(&mut self.log)
    }

    /// Iterates live entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = &ConnEntry> {
        self.entries.values()
    }
}
