//! Per-protocol connection trackers.
//!
//! Each tracker advances entries in a [`ConnTable`](crate::conntable::ConnTable)
//! one packet at a time. A step either succeeds — returning the state the
//! entry is now in plus the table event it produced — or refuses the packet.
//! Refusals carry a machine-readable reason from a closed vocabulary; the
//! firewall layer maps them to ctstate INVALID and the scenario trace prints
//! them verbatim.

mod quic;
mod tcp;
mod udp;

pub use quic::{quic_step, QuicConfig, QuicStepOk};
pub use tcp::{tcp_step, TcpFlags};
pub use udp::udp_step;

use core::fmt;

use crate::conntable::{CtState, Event};

/// Why a tracker rejected a packet. Closed vocabulary: every reason that can
/// appear in a trace is listed here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RefusalReason {
    /// Packet matches no live entry and is not allowed to create one.
    NoEntry,
    /// Flags do not advance any legal transition for the entry's state.
    BadTransition,
    /// SYN while the tuple is quarantined in TIME_WAIT.
    TimeWaitSyn,
    /// QUIC connection ID does not match the one bound during the handshake.
    DcidMismatch,
    /// A packet kind that cannot open or advance the handshake where an
    /// Initial (or matching Handshake) is required.
    NotInitial,
    /// Long header carries a QUIC version outside the accepted set.
    BadVersion,
    /// Datagram did not parse as QUIC.
    MalformedQuic,
}

impl RefusalReason {
    pub fn name(&self) -> &'static str {
        match self {
            RefusalReason::NoEntry => "NoEntry",
            RefusalReason::BadTransition => "BadTransition",
            RefusalReason::TimeWaitSyn => "TimeWaitSyn",
            RefusalReason::DcidMismatch => "DcidMismatch",
            RefusalReason::NotInitial => "NotInitial",
            RefusalReason::BadVersion => "BadVersion",
            RefusalReason::MalformedQuic => "MalformedQuic",
        }
    }

    pub const ALL: [RefusalReason; 7] = [
        RefusalReason::NoEntry,
        RefusalReason::BadTransition,
        RefusalReason::TimeWaitSyn,
        RefusalReason::DcidMismatch,
        RefusalReason::NotInitial,
        RefusalReason::BadVersion,
        RefusalReason::MalformedQuic,
    ];
}

impl fmt::Display for RefusalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A refused packet. The caller translates this into a DROP verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Refusal {
    pub reason: RefusalReason,
}

impl Refusal {
    pub fn new(reason: RefusalReason) -> Self {
        Self { reason }
    }
}

impl fmt::Display for Refusal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "refused: {}", self.reason)
    }
}

impl core::error::Error for Refusal {}

/// Successful tracker step: the entry's new state and the event it emitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOk {
    pub state: CtState,
    pub event: Event,
}
