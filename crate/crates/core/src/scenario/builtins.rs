//! Canned scenarios reproducing the attacks and baselines the lab studies.

use alloc::string::String;
use alloc::vec::Vec;

use super::{Actor, Actors, DcidSpec, Scenario, SimConfig, Step, StepKind, TrackerKind};
use crate::conntable::{FiveTuple, Proto};
use crate::firewall::Ruleset;
use crate::tracker::TcpFlags;

pub fn builtin_names() -> &'static [&'static str] {
    &[
        "http3_handshake",
        "udp_hole_punch",
        "tcp_timewait_probe",
        "tcp_rst_teardown",
        "stateless_reset_forgery",
    ]
}

/// Returns a builtin scenario by name.
pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "http3_handshake" => Some(http3_handshake()),
        "udp_hole_punch" => Some(udp_hole_punch()),
        "tcp_timewait_probe" => Some(tcp_timewait_probe()),
        "tcp_rst_teardown" => Some(tcp_rst_teardown()),
        "stateless_reset_forgery" => Some(stateless_reset_forgery()),
        _ => None,
    }
}

struct Builder {
    actors: Actors,
    proto: Proto,
    steps: Vec<Step>,
}

impl Builder {
    fn new(proto: Proto) -> Self {
        Self { actors: Actors::default(), proto, steps: Vec::new() }
    }

    fn tuple(&self, actor: Actor) -> FiveTuple {
        let client_side =
            FiveTuple::new(self.proto, self.actors.client, 50000, self.actors.server, 443);
        match actor {
            Actor::Client => client_side,
            // Server and attacker both emit from the server address with the
            // connection's reversed tuple.
            _ => client_side.reversed(),
        }
    }

    fn at(&mut self, at_ms: u64, actor: Actor, kind: StepKind) -> &mut Self {
        self.steps.push(Step { at_ms, actor, tuple: self.tuple(actor), kind });
        self
    }

    fn build(self, name: &str, tracker: TrackerKind) -> Scenario {
        Scenario {
            name: String::from(name),
            actors: self.actors,
            steps: self.steps,
            tracker,
            ruleset: Ruleset::testbed_default(),
            config: SimConfig::default(),
        }
    }
}

/// A complete HTTP/3 exchange: the client and server handshake packet types
/// in capture order (initial and handshake flights split into separate
/// datagrams), then protected payload both ways.
fn http3_handshake() -> Scenario {
    let mut b = Builder::new(Proto::Udp);
    b.at(0, Actor::Client, StepKind::QuicInitial)
        .at(20, Actor::Server, StepKind::QuicInitial)
        .at(40, Actor::Server, StepKind::QuicHandshake)
        .at(60, Actor::Client, StepKind::QuicInitial)
        .at(80, Actor::Client, StepKind::QuicHandshake)
        .at(100, Actor::Server, StepKind::QuicHandshake)
        .at(120, Actor::Server, StepKind::QuicShort(DcidSpec::Valid))
        .at(140, Actor::Client, StepKind::QuicShort(DcidSpec::Valid))
        .at(160, Actor::Server, StepKind::QuicShort(DcidSpec::Valid))
        .at(180, Actor::Client, StepKind::QuicShort(DcidSpec::Valid));
    b.build("http3_handshake", TrackerKind::Quic)
}

/// Hole-punch timing constants shared with the acceptance suite.
pub mod hole_punch {
    /// Last packet of the legitimate exchange.
    pub const IDLE_START_MS: u64 = 5_000;
    pub const KEEPALIVE_START_MS: u64 = 15_000;
    pub const KEEPALIVE_INTERVAL_MS: u64 = 10_000;
    pub const KEEPALIVE_COUNT: usize = 60;
    pub const EXFIL_START_MS: u64 = 605_100;
    pub const EXFIL_INTERVAL_MS: u64 = 100;
    pub const EXFIL_COUNT: usize = 50;
}

/// The bypass: a legitimate QUIC exchange goes idle, then the attacker on
/// the server side keeps the UDP entry alive with a matching-tuple datagram
/// every 10 s and exfiltrates through the held-open hole.
fn udp_hole_punch() -> Scenario {
    use hole_punch::*;
    let mut b = Builder::new(Proto::Udp);
    b.at(0, Actor::Client, StepKind::QuicInitial)
        .at(100, Actor::Server, StepKind::QuicInitial)
        .at(200, Actor::Server, StepKind::QuicHandshake)
        .at(300, Actor::Client, StepKind::QuicInitial)
        .at(400, Actor::Client, StepKind::QuicHandshake)
        .at(600, Actor::Client, StepKind::QuicShort(DcidSpec::Valid))
        .at(700, Actor::Server, StepKind::QuicShort(DcidSpec::Valid))
        .at(IDLE_START_MS, Actor::Client, StepKind::QuicShort(DcidSpec::Valid));
    for i in 0..KEEPALIVE_COUNT {
        b.at(
            KEEPALIVE_START_MS + KEEPALIVE_INTERVAL_MS * i as u64,
            Actor::Attacker,
            StepKind::QuicShort(DcidSpec::Attacker),
        );
    }
    for i in 0..EXFIL_COUNT {
        b.at(
            EXFIL_START_MS + EXFIL_INTERVAL_MS * i as u64,
            Actor::Attacker,
            StepKind::QuicShort(DcidSpec::Attacker),
        );
    }
    b.build("udp_hole_punch", TrackerKind::Udp)
}

/// TCP contrast: full handshake and teardown, an attacker SYN on the
/// quarantined tuple during TIME_WAIT, and a fresh client SYN after the
/// quarantine expires.
fn tcp_timewait_probe() -> Scenario {
    let mut b = Builder::new(Proto::Tcp);
    b.at(0, Actor::Client, StepKind::Tcp(TcpFlags::SYN))
        .at(20, Actor::Server, StepKind::Tcp(TcpFlags::SYN_ACK))
        .at(40, Actor::Client, StepKind::Tcp(TcpFlags::ACK))
        .at(60, Actor::Client, StepKind::Tcp(TcpFlags::ACK))
        .at(80, Actor::Server, StepKind::Tcp(TcpFlags::ACK))
        // Server initiates teardown; the client piggybacks its FIN.
        .at(100, Actor::Server, StepKind::Tcp(TcpFlags::FIN))
        .at(120, Actor::Client, StepKind::Tcp(TcpFlags::FIN_ACK))
        .at(140, Actor::Server, StepKind::Tcp(TcpFlags::ACK))
        // TIME_WAIT holds until 140 + 120 000 ms.
        .at(10_000, Actor::Attacker, StepKind::Tcp(TcpFlags::SYN))
        .at(130_000, Actor::Client, StepKind::Tcp(TcpFlags::SYN));
    b.build("tcp_timewait_probe", TrackerKind::Tcp)
}

/// TCP reset path: RST tears the entry down within the step, and the next
/// SYN starts over immediately (no TIME_WAIT quarantine).
fn tcp_rst_teardown() -> Scenario {
    let mut b = Builder::new(Proto::Tcp);
    b.at(0, Actor::Client, StepKind::Tcp(TcpFlags::SYN))
        .at(20, Actor::Server, StepKind::Tcp(TcpFlags::SYN_ACK))
        .at(40, Actor::Client, StepKind::Tcp(TcpFlags::ACK))
        .at(60, Actor::Client, StepKind::Tcp(TcpFlags::ACK))
        .at(200, Actor::Server, StepKind::Tcp(TcpFlags::RST))
        .at(300, Actor::Client, StepKind::Tcp(TcpFlags::SYN));
    b.build("tcp_rst_teardown", TrackerKind::Tcp)
}

/// Mid-connection stateless-reset forgeries: 21-byte short-header-shaped
/// packets with guessed tokens. Trackers cannot verify the token, so the
/// packets are judged like any other short packet; the connection continues
/// afterwards.
fn stateless_reset_forgery() -> Scenario {
    let mut b = Builder::new(Proto::Udp);
    b.at(0, Actor::Client, StepKind::QuicInitial)
        .at(20, Actor::Server, StepKind::QuicInitial)
        .at(40, Actor::Server, StepKind::QuicHandshake)
        .at(60, Actor::Client, StepKind::QuicInitial)
        .at(120, Actor::Client, StepKind::QuicShort(DcidSpec::Valid))
        .at(140, Actor::Server, StepKind::QuicShort(DcidSpec::Valid));
    for i in 0..10u64 {
        b.at(1_000 + 100 * i, Actor::Attacker, StepKind::ResetForgery);
    }
    b.at(2_500, Actor::Client, StepKind::QuicShort(DcidSpec::Valid))
        .at(2_600, Actor::Server, StepKind::QuicShort(DcidSpec::Valid));
    b.build("stateless_reset_forgery", TrackerKind::Quic)
}
