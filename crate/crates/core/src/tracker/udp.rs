//! Naive UDP pseudo-connection tracking.
//!
//! UDP has no flags, so every packet is treated as evidence of a connection:
//! the first client datagram creates an UNREPLIED entry, a returning datagram
//! marks it replied, further client traffic makes it ASSURED, and *any*
//! matching packet resets the TTL. No teardown exists — entries only die by
//! timeout. This is the hole-punchable baseline the QUIC tracker improves on.
//!
//! Packet payloads are never inspected: a step is a pure function of tuple,
//! direction and time.

use super::{Refusal, RefusalReason, StepOk};
use crate::conntable::{ConnTable, CtState, Direction, EntryFlags, FiveTuple, Proto};

/// Advances UDP tracking by one datagram.
pub fn udp_step(
    table: &mut ConnTable,
    tuple: &FiveTuple,
    dir: Direction,
    now: u64,
) -> Result<StepOk, Refusal> {
    debug_assert_eq!(tuple.proto, Proto::Udp);
    let (state, flags) = match table.lookup(tuple) {
        None => {
            if dir != Direction::Original {
                // Nothing to match: a reply-direction packet cannot open a
                // pseudo-connection.
                return Err(Refusal::new(RefusalReason::NoEntry));
            }
            (CtState::UdpNew, EntryFlags::unreplied())
        }
        Some((entry, found_dir)) => match (entry.state, found_dir) {
            (CtState::UdpNew, Direction::Original) => (CtState::UdpNew, EntryFlags::unreplied()),
            (CtState::UdpNew, Direction::Reply) => (CtState::UdpReplied, EntryFlags::replied()),
            (CtState::UdpReplied, Direction::Original) => {
                (CtState::UdpAssured, EntryFlags::assured())
            }
            (CtState::UdpReplied, Direction::Reply) => (CtState::UdpReplied, EntryFlags::replied()),
            (CtState::UdpAssured, _) => (CtState::UdpAssured, EntryFlags::assured()),
            _ => return Err(Refusal::new(RefusalReason::BadTransition)),
        },
    };
    let ttl = table.ttl_policy().ttl_for(Proto::Udp, state);
    let event = table.apply(tuple, state, flags, None, ttl, now);
    Ok(StepOk { state, event })
}
