//! TCP flag tracking: the conntrack state machine over SYN/ACK/FIN/RST.
//!
//! Only header flags are modeled — no sequence numbers, no windows, no
//! retransmission handling. New connections must start with a client SYN; a
//! reply-direction packet can never create an entry. RST removes a live entry
//! immediately; TIME_WAIT quarantines the tuple against new SYNs until it
//! times out.

use core::fmt;

use super::{Refusal, RefusalReason, StepOk};
use crate::conntable::{ConnTable, CtState, Direction, EntryFlags, FiveTuple, Proto};

/// The four TCP header flags the tracker reads. RST dominates all others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TcpFlags {
    pub syn: bool,
    pub ack: bool,
    pub fin: bool,
    pub rst: bool,
}

impl TcpFlags {
    pub const SYN: TcpFlags = TcpFlags { syn: true, ack: false, fin: false, rst: false };
    pub const SYN_ACK: TcpFlags = TcpFlags { syn: true, ack: true, fin: false, rst: false };
    pub const ACK: TcpFlags = TcpFlags { syn: false, ack: true, fin: false, rst: false };
    pub const FIN: TcpFlags = TcpFlags { syn: false, ack: false, fin: true, rst: false };
    pub const FIN_ACK: TcpFlags = TcpFlags { syn: false, ack: true, fin: true, rst: false };
    pub const RST: TcpFlags = TcpFlags { syn: false, ack: false, fin: false, rst: true };

    pub fn any(&self) -> bool {
        self.syn || self.ack || self.fin || self.rst
    }
}

impl fmt::Display for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (set, name) in [
            (self.syn, "SYN"),
            (self.ack, "ACK"),
            (self.fin, "FIN"),
            (self.rst, "RST"),
        ] {
            if set {
                if !first {
                    f.write_str("-")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        if first {
            f.write_str("NONE")?;
        }
        Ok(())
    }
}

/// Advances the TCP state machine by one packet.
///
/// `tuple` is written as sent (source = sender). `dir` is the direction the
/// caller attributes to the packet; once an entry exists the table's own
/// orientation wins.
pub fn tcp_step(
    table: &mut ConnTable,
    tuple: &FiveTuple,
    flags: TcpFlags,
    dir: Direction,
    now: u64,
) -> Result<StepOk, Refusal> {
    debug_assert_eq!(tuple.proto, Proto::Tcp);
    let refuse = |reason| Err(Refusal::new(reason));

    let Some((entry, found_dir)) = table.lookup(tuple) else {
        // No entry: only a bare client SYN opens a connection.
        if flags.rst {
            // Stateless RSTs are not tracked.
            return refuse(RefusalReason::NoEntry);
        }
        if flags.syn && !flags.ack && !flags.fin && dir == Direction::Original {
            return Ok(step_apply(table, tuple, CtState::SynSent, EntryFlags::unreplied(), now));
        }
        return refuse(RefusalReason::NoEntry);
    };
    let state = entry.state;
    let assured = entry.flags.assured;
    let dir = found_dir;

    if flags.rst {
        // Live entry torn down immediately: CLOSE, then DESTROY.
        let kept = entry.flags;
        table.apply(tuple, CtState::Close, kept, None, 1, now);
        let event = table
            .destroy(tuple, now)
            .expect("entry present for RST teardown");
        return Ok(StepOk { state: CtState::Close, event });
    }

    let keep = |assured| EntryFlags { unreplied: false, assured };
    let (next, flags_after) = match (state, dir) {
        (CtState::SynSent, Direction::Reply) if flags.syn && flags.ack && !flags.fin => {
            (CtState::SynRecv, EntryFlags::replied())
        }
        (CtState::SynRecv, Direction::Original) if flags.ack && !flags.syn && !flags.fin => {
            (CtState::Established, EntryFlags::assured())
        }
        (CtState::Established, _) if flags.fin && !flags.syn => (CtState::FinWait, keep(assured)),
        (CtState::Established, _) if flags.ack && !flags.syn && !flags.fin => {
            (CtState::Established, keep(assured))
        }
        // Piggybacked FIN-ACK skips CLOSE_WAIT.
        (CtState::FinWait, _) if flags.fin && flags.ack && !flags.syn => {
            (CtState::LastAck, keep(assured))
        }
        (CtState::FinWait, _) if flags.ack && !flags.syn && !flags.fin => {
            (CtState::CloseWait, keep(assured))
        }
        (CtState::CloseWait, _) if flags.fin && !flags.syn => (CtState::LastAck, keep(assured)),
        (CtState::LastAck, _) if flags.ack && !flags.syn && !flags.fin => {
            (CtState::TimeWait, keep(assured))
        }
        (CtState::TimeWait, _) if flags.syn => return refuse(RefusalReason::TimeWaitSyn),
        _ => return refuse(RefusalReason::BadTransition),
    };
    Ok(step_apply(table, tuple, next, flags_after, now))
}

fn step_apply(
    table: &mut ConnTable,
    tuple: &FiveTuple,
    state: CtState,
    flags: EntryFlags,
    now: u64,
) -> StepOk {
    let ttl = table.ttl_policy().ttl_for(Proto::Tcp, state);
    let event = table.apply(tuple, state, flags, None, ttl, now);
    StepOk { state, event }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conntable::{EventKind, TtlPolicy};
    use core::net::Ipv4Addr;

    fn tuple() -> FiveTuple {
        FiveTuple::new(
            Proto::Tcp,
            Ipv4Addr::new(192, 168, 79, 132),
            50000,
            Ipv4Addr::new(192, 168, 79, 128),
            443,
        )
    }

    fn table() -> ConnTable {
        ConnTable::new(TtlPolicy::default())
    }

    fn step(
        table: &mut ConnTable,
        flags: TcpFlags,
        dir: Direction,
        now: u64,
    ) -> Result<StepOk, Refusal> {
        let t = if dir == Direction::Reply { tuple().reversed() } else { tuple() };
        tcp_step(table, &t, flags, dir, now)
    }

    fn handshake(table: &mut ConnTable) {
        step(table, TcpFlags::SYN, Direction::Original, 0).unwrap();
        step(table, TcpFlags::SYN_ACK, Direction::Reply, 10).unwrap();
        step(table, TcpFlags::ACK, Direction::Original, 20).unwrap();
    }

    #[test]
    fn three_way_handshake_reaches_established_assured() {
        let mut t = table();
        let s1 = step(&mut t, TcpFlags::SYN, Direction::Original, 0).unwrap();
        assert_eq!(s1.state, CtState::SynSent);
        assert!(s1.event.snapshot.flags.unreplied);
        assert_eq!(s1.event.kind, EventKind::New);

        let s2 = step(&mut t, TcpFlags::SYN_ACK, Direction::Reply, 10).unwrap();
        assert_eq!(s2.state, CtState::SynRecv);
        assert!(!s2.event.snapshot.flags.unreplied);

        let s3 = step(&mut t, TcpFlags::ACK, Direction::Original, 20).unwrap();
        assert_eq!(s3.state, CtState::Established);
        assert!(s3.event.snapshot.flags.assured);
    }

    #[test]
    fn server_teardown_with_piggyback_skips_close_wait() {
        let mut t = table();
        handshake(&mut t);
        let s = step(&mut t, TcpFlags::FIN, Direction::Reply, 100).unwrap();
        assert_eq!(s.state, CtState::FinWait);
        // The client's FIN-ACK answers the FIN and carries its own FIN.
        let s = step(&mut t, TcpFlags::FIN_ACK, Direction::Original, 110).unwrap();
        assert_eq!(s.state, CtState::LastAck);
        let s = step(&mut t, TcpFlags::ACK, Direction::Reply, 120).unwrap();
        assert_eq!(s.state, CtState::TimeWait);
    }

    #[test]
    fn four_step_teardown_passes_close_wait() {
        let mut t = table();
        handshake(&mut t);
        step(&mut t, TcpFlags::FIN, Direction::Reply, 100).unwrap();
        let s = step(&mut t, TcpFlags::ACK, Direction::Original, 105).unwrap();
        assert_eq!(s.state, CtState::CloseWait);
        let s = step(&mut t, TcpFlags::FIN, Direction::Original, 110).unwrap();
        assert_eq!(s.state, CtState::LastAck);
        let s = step(&mut t, TcpFlags::ACK, Direction::Reply, 115).unwrap();
        assert_eq!(s.state, CtState::TimeWait);
    }

    #[test]
    fn rst_on_established_destroys_immediately() {
        let mut t = table();
        handshake(&mut t);
        let s = step(&mut t, TcpFlags::RST, Direction::Reply, 50).unwrap();
        assert_eq!(s.state, CtState::Close);
        assert_eq!(s.event.kind, EventKind::Destroy);
        assert!(t.lookup(&tuple()).is_none());
        // Unlike TIME_WAIT, the very next SYN opens a fresh connection.
        let s = step(&mut t, TcpFlags::SYN, Direction::Original, 60).unwrap();
        assert_eq!(s.state, CtState::SynSent);
        assert_eq!(s.event.kind, EventKind::New);
    }

    #[test]
    fn syn_during_time_wait_is_refused() {
        let mut t = table();
        handshake(&mut t);
        step(&mut t, TcpFlags::FIN, Direction::Reply, 100).unwrap();
        step(&mut t, TcpFlags::FIN_ACK, Direction::Original, 110).unwrap();
        step(&mut t, TcpFlags::ACK, Direction::Reply, 120).unwrap();
        // Server-side SYN reusing the quarantined tuple.
        let err = step(&mut t, TcpFlags::SYN, Direction::Reply, 130).unwrap_err();
        assert_eq!(err.reason, RefusalReason::TimeWaitSyn);
        // The client side is quarantined too.
        let err = step(&mut t, TcpFlags::SYN, Direction::Original, 140).unwrap_err();
        assert_eq!(err.reason, RefusalReason::TimeWaitSyn);
        // After the TIME_WAIT TTL (120 s) expires and the sweep runs, a fresh
        // SYN is accepted again.
        t.sweep(120 + 120_000).unwrap();
        let s = step(&mut t, TcpFlags::SYN, Direction::Original, 120 + 120_000).unwrap();
        assert_eq!(s.state, CtState::SynSent);
    }

    #[test]
    fn reply_direction_packets_never_create_entries() {
        let mut t = table();
        let err = step(&mut t, TcpFlags::SYN, Direction::Reply, 0).unwrap_err();
        assert_eq!(err.reason, RefusalReason::NoEntry);
        assert!(t.is_empty());
    }

    #[test]
    fn midstream_packets_without_entry_are_refused() {
        let mut t = table();
        for flags in [TcpFlags::ACK, TcpFlags::FIN, TcpFlags::SYN_ACK, TcpFlags::RST] {
            let err = step(&mut t, flags, Direction::Original, 0).unwrap_err();
            assert_eq!(err.reason, RefusalReason::NoEntry, "{flags}");
        }
    }

    #[test]
    fn stray_flags_on_live_entry_are_bad_transitions() {
        let mut t = table();
        handshake(&mut t);
        let err = step(&mut t, TcpFlags::SYN, Direction::Original, 30).unwrap_err();
        assert_eq!(err.reason, RefusalReason::BadTransition);
    }

    #[test]
    fn established_data_refreshes_ttl() {
        let mut t = table();
        handshake(&mut t);
        let s = step(&mut t, TcpFlags::ACK, Direction::Reply, 1_000).unwrap();
        assert_eq!(s.state, CtState::Established);
        let (e, _) = t.lookup(&tuple()).unwrap();
        assert_eq!(e.expiry, 1_000 + 7_440_000);
    }
}
