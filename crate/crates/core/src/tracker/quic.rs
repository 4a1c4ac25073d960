//! QUIC-aware stateful tracking.
//!
//! The visible handshake maps onto the TCP tracking states: a valid client
//! Initial opens an entry as SYN_SENT/UNREPLIED and stores the client's SCID;
//! the server's returning Initial must carry that SCID as its DCID and moves
//! the entry to SYN_RECV while binding the server's SCID; the client's next
//! matching Initial or Handshake makes it ESTABLISHED/ASSURED. From SYN_RECV
//! onward every packet's DCID is matched against the SCID bound for its
//! direction — in strict mode a mismatch is refused, in fallback mode any
//! well-formed QUIC packet on the tuple is accepted (tolerating encrypted
//! connection-ID migration at the cost of hole-punch resistance).
//!
//! Teardown stays invisible (CONNECTION_CLOSE and stateless resets are
//! indistinguishable from data), so entries only expire by TTL, like plain
//! UDP. Retry, Version Negotiation and 0-RTT packets neither advance nor
//! refuse state.

use alloc::collections::BTreeSet;

use super::{Refusal, RefusalReason};
use crate::conntable::{
    ConnExtra, ConnTable, CtState, Direction, EntryFlags, Event, FiveTuple, Proto, QuicConnExtra,
    QuicTrackMode,
};
use crate::wire::{PacketKind, QuicHeader, VERSION_DRAFT29};

/// Tracker configuration.
#[derive(Debug, Clone)]
pub struct QuicConfig {
    pub mode: QuicTrackMode,
    pub accepted_versions: BTreeSet<u32>,
}

impl Default for QuicConfig {
    fn default() -> Self {
        let mut accepted_versions = BTreeSet::new();
        accepted_versions.insert(VERSION_DRAFT29);
        Self { mode: QuicTrackMode::StrictDcid, accepted_versions }
    }
}

impl QuicConfig {
    pub fn with_mode(mode: QuicTrackMode) -> Self {
        Self { mode, ..Self::default() }
    }
}

/// Successful QUIC step.
///
/// `accept_hint` is false when the datagram contained only neutral packets
/// (Retry / Version Negotiation / 0-RTT): the table was not touched and the
/// caller should not treat the packet as matched traffic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuicStepOk {
    pub state: CtState,
    pub event: Option<Event>,
    pub accept_hint: bool,
    /// This datagram created the entry.
    pub created: bool,
    pub note: Option<&'static str>,
}

const NOTE_ZERO_LEN_SCID: &str =
    "zero-length client SCID: DCID matching toward the client degenerates to tuple matching";
const NOTE_NEUTRAL: &str = "neutral packet kinds ignored (Retry/VersionNegotiation/0-RTT)";

/// Working copy of the entry while a datagram's coalesced packets are
/// evaluated; committed to the table only if no packet is refused.
struct Scratch {
    state: CtState,
    extra: QuicConnExtra,
    exists: bool,
    advanced: bool,
    saw_neutral: bool,
    note: Option<&'static str>,
}

/// Larger = stricter; when several coalesced packets refuse, the strictest
/// reason wins.
fn severity(reason: RefusalReason) -> u8 {
    match reason {
        RefusalReason::DcidMismatch => 5,
        RefusalReason::BadVersion => 4,
        RefusalReason::NotInitial => 3,
        RefusalReason::MalformedQuic => 2,
        _ => 1, // NoEntry and the non-QUIC reasons
    }
}

/// Advances QUIC tracking by one datagram.
///
/// `headers` are the parsed packets of a single datagram, in wire order; they
/// are judged as a unit — the strictest refusal wins and a refused datagram
/// leaves the table untouched.
pub fn quic_step(
    table: &mut ConnTable,
    tuple: &FiveTuple,
    headers: &[QuicHeader],
    dir: Direction,
    now: u64,
    config: &QuicConfig,
) -> Result<QuicStepOk, Refusal> {
    debug_assert_eq!(tuple.proto, Proto::Udp);
    if headers.is_empty() {
        return Err(Refusal::new(RefusalReason::MalformedQuic));
    }

    let looked_up = table.lookup(tuple);
    let dir = looked_up.map(|(_, d)| d).unwrap_or(dir);
    let mut scratch = match looked_up {
        Some((entry, _)) => match entry.extra.as_quic() {
            Some(extra) => Scratch {
                state: entry.state,
                extra: extra.clone(),
                exists: true,
                advanced: false,
                saw_neutral: false,
                note: None,
            },
            None => {
                // Entry created by a different tracker; nothing we can match.
                debug_assert!(false, "QUIC step on a non-QUIC entry");
                return Err(Refusal::new(RefusalReason::NoEntry));
            }
        },
        None => Scratch {
            state: CtState::None,
            extra: QuicConnExtra {
                client_scid: crate::wire::ConnectionId::EMPTY,
                server_scid: None,
                mode: config.mode,
            },
            exists: false,
            advanced: false,
            saw_neutral: false,
            note: None,
        },
    };

    let mut worst: Option<RefusalReason> = None;
    for header in headers {
        if let Err(reason) = eval_packet(&mut scratch, header, dir, config) {
            if worst.map(severity) < Some(severity(reason)) {
                worst = Some(reason);
            }
        }
    }
    if let Some(reason) = worst {
        return Err(Refusal::new(reason));
    }

    if !scratch.advanced {
        // Only neutral packets: no state change, no TTL refresh.
        return Ok(QuicStepOk {
            state: scratch.state,
            event: None,
            accept_hint: false,
            created: false,
            note: scratch.saw_neutral.then_some(NOTE_NEUTRAL),
        });
    }

    let created = !scratch.exists;
    let flags = match scratch.state {
        CtState::SynSent => EntryFlags::unreplied(),
        CtState::SynRecv => EntryFlags::replied(),
        _ => EntryFlags::assured(),
    };
    let ttl = table.ttl_policy().ttl_for(Proto::Udp, scratch.state);
    let event = table.apply(tuple, scratch.state, flags, Some(ConnExtra::Quic(scratch.extra)), ttl, now);
    Ok(QuicStepOk {
        state: scratch.state,
        event: Some(event),
        accept_hint: true,
        created,
        note: scratch.note,
    })
}

fn eval_packet(
    s: &mut Scratch,
    h: &QuicHeader,
    dir: Direction,
    config: &QuicConfig,
) -> Result<(), RefusalReason> {
    match h.kind {
        PacketKind::Retry | PacketKind::VersionNegotiation | PacketKind::ZeroRtt => {
            s.saw_neutral = true;
            return Ok(());
        }
        PacketKind::Initial | PacketKind::Handshake | PacketKind::Short => {}
    }

    if !s.exists && !s.advanced {
        // First evidence of this flow.
        if dir != Direction::Original {
            return Err(RefusalReason::NoEntry);
        }
        return match h.kind {
            PacketKind::Initial => {
                let version = h.version.unwrap_or(0);
                if !config.accepted_versions.contains(&version) {
                    return Err(RefusalReason::BadVersion);
                }
                let client_scid = h.scid.expect("long header carries an SCID");
                if client_scid.is_empty() {
                    s.note = Some(NOTE_ZERO_LEN_SCID);
                }
                s.extra.client_scid = client_scid;
                s.state = CtState::SynSent;
                s.advanced = true;
                Ok(())
            }
            PacketKind::Handshake => Err(RefusalReason::NotInitial),
            PacketKind::Short => Err(RefusalReason::NoEntry),
            _ => unreachable!(),
        };
    }

    match s.state {
        CtState::SynSent => match (h.kind, dir) {
            (PacketKind::Initial, Direction::Reply) => {
                // The returning Initial must address the client SCID we
                // stored; its own SCID identifies the server side from now
                // on.
                if h.dcid != s.extra.client_scid {
                    return Err(RefusalReason::DcidMismatch);
                }
                s.extra.server_scid = Some(h.scid.expect("long header carries an SCID"));
                s.state = CtState::SynRecv;
                s.advanced = true;
                Ok(())
            }
            (PacketKind::Initial, Direction::Original) => {
                // Client Initial resent before any reply; the SCID must not
                // change mid-handshake.
                if h.scid.expect("long header carries an SCID") != s.extra.client_scid {
                    return Err(RefusalReason::DcidMismatch);
                }
                s.advanced = true;
                Ok(())
            }
            _ => Err(RefusalReason::NotInitial),
        },
        CtState::SynRecv | CtState::Established => {
            let checked = s.extra.mode == QuicTrackMode::StrictDcid;
            match h.kind {
                PacketKind::Initial | PacketKind::Handshake => {
                    let expected = s.extra.expected_dcid(dir).expect("both SCIDs bound");
                    if checked && h.dcid != *expected {
                        return Err(RefusalReason::DcidMismatch);
                    }
                    if s.state == CtState::SynRecv && dir == Direction::Original {
                        // The client's next matching handshake-phase packet
                        // completes the exchange.
                        s.state = CtState::Established;
                    }
                    s.advanced = true;
                    Ok(())
                }
                PacketKind::Short => {
                    if s.state == CtState::SynRecv {
                        // 1-RTT traffic before the handshake completed.
                        return Err(RefusalReason::NotInitial);
                    }
                    if checked {
                        let expected = s.extra.expected_dcid(dir).expect("both SCIDs bound");
                        if h.dcid != *expected {
                            return Err(RefusalReason::DcidMismatch);
                        }
                    }
                    s.advanced = true;
                    Ok(())
                }
                _ => unreachable!(),
            }
        }
        _ => Err(RefusalReason::NotInitial),
    }
}
