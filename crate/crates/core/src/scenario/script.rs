//! Line-oriented scenario files.
//!
//! ```text
//! # directives first (all optional), then steps
//! name   my_scenario
//! seed   7
//! client 192.168.79.132
//! server 192.168.79.128
//! tracker quic
//! mode strict
//! attacker-dcid random
//! at 0   client   udp 192.168.79.132:50000 -> 192.168.79.128:443 quic-initial
//! at 20  server   udp 192.168.79.128:443   -> 192.168.79.132:50000 quic-initial
//! at 100 attacker udp 192.168.79.128:443   -> 192.168.79.132:50000 quic-short random
//! ```
//!
//! Step kinds: `tcp FLAGS` (e.g. `SYN`, `SYN-ACK`, `fin,ack`), `udp-raw HEX`,
//! `quic-initial`, `quic-handshake`, `quic-short <DCIDHEX|valid|random>`,
//! `reset-forgery`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;

use super::{Actor, AttackerDcid, DcidSpec, Scenario, Step, StepKind, TrackerKind};
use crate::conntable::{FiveTuple, Proto, QuicTrackMode};
use crate::tracker::TcpFlags;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptError {
    pub line: usize,
    pub what: String,
}

impl ScriptError {
    fn new(line: usize, what: &str) -> Self {
        Self { line, what: String::from(what) }
    }
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.what)
    }
}

impl core::error::Error for ScriptError {}

/// Parses a scenario file. The ruleset is not part of the format; the result
/// carries the testbed default and callers may swap it.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScriptError> {
    let mut scenario = Scenario {
        name: String::from("scenario"),
        actors: Default::default(),
        steps: Vec::new(),
        tracker: TrackerKind::Udp,
        ruleset: crate::firewall::Ruleset::testbed_default(),
        config: Default::default(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, rest) = split_word(line);
        let rest = rest.trim();
        match word {
            "name" => scenario.name = String::from(rest),
            "seed" => {
                scenario.config.seed =
                    rest.parse().map_err(|_| ScriptError::new(lineno, "bad seed"))?;
            }
            "client" => scenario.actors.client = parse_ip(rest, lineno)?,
            "server" => scenario.actors.server = parse_ip(rest, lineno)?,
            "attacker" => scenario.actors.attacker = parse_ip(rest, lineno)?,
            "tracker" => {
                scenario.tracker = match rest {
                    "tcp" => TrackerKind::Tcp,
                    "udp" => TrackerKind::Udp,
                    "quic" => TrackerKind::Quic,
                    _ => return Err(ScriptError::new(lineno, "tracker must be tcp, udp or quic")),
                };
            }
            "mode" => {
                scenario.config.quic.mode = match rest {
                    "strict" => QuicTrackMode::StrictDcid,
                    "fallback" => QuicTrackMode::TupleFallback,
                    _ => return Err(ScriptError::new(lineno, "mode must be strict or fallback")),
                };
            }
            "attacker-dcid" => {
                scenario.config.attacker_dcid = match rest {
                    "random" => AttackerDcid::RandomPerPacket,
                    "fixed" => AttackerDcid::FixedRandom,
                    "copy-valid" => AttackerDcid::CopyValid,
                    _ => {
                        return Err(ScriptError::new(
                            lineno,
                            "attacker-dcid must be random, fixed or copy-valid",
                        ))
                    }
                };
            }
            "at" => scenario.steps.push(parse_step(rest, lineno)?),
            _ => return Err(ScriptError::new(lineno, "unknown directive")),
        }
    }
    Ok(scenario)
}

fn split_word(s: &str) -> (&str, &str) {
    match s.find(char::is_whitespace) {
        Some(pos) => (&s[..pos], &s[pos..]),
        None => (s, ""),
    }
}

fn parse_ip(s: &str, line: usize) -> Result<Ipv4Addr, ScriptError> {
    s.parse().map_err(|_| ScriptError::new(line, "bad IPv4 address"))
}

fn parse_endpoint(s: &str, line: usize) -> Result<(Ipv4Addr, u16), ScriptError> {
    let (ip, port) = s
        .split_once(':')
        .ok_or_else(|| ScriptError::new(line, "endpoint must be ip:port"))?;
    let port: u16 = port.parse().map_err(|_| ScriptError::new(line, "bad port"))?;
    if port == 0 {
        return Err(ScriptError::new(line, "port must be nonzero"));
    }
    Ok((parse_ip(ip, line)?, port))
}

/// `<ms> <actor> <proto> <src>:<sport> -> <dst>:<dport> <kind> [args]`
fn parse_step(rest: &str, line: usize) -> Result<Step, ScriptError> {
    let mut words = rest.split_whitespace();
    let mut next = |what: &'static str| {
        words
            .next()
            .ok_or(ScriptError { line, what: String::from(what) })
    };
    let at_ms = next("missing time")?
        .parse()
        .map_err(|_| ScriptError::new(line, "bad time"))?;
    let actor = match next("missing actor")? {
        "client" => Actor::Client,
        "server" => Actor::Server,
        "attacker" => Actor::Attacker,
        _ => return Err(ScriptError::new(line, "actor must be client, server or attacker")),
    };
    let proto = match next("missing protocol")? {
        "tcp" => Proto::Tcp,
        "udp" => Proto::Udp,
        _ => return Err(ScriptError::new(line, "protocol must be tcp or udp")),
    };
    let (src_ip, src_port) = parse_endpoint(next("missing source endpoint")?, line)?;
    if next("missing ->")? != "->" {
        return Err(ScriptError::new(line, "expected -> between endpoints"));
    }
    let (dst_ip, dst_port) = parse_endpoint(next("missing destination endpoint")?, line)?;
    let tuple = FiveTuple::new(proto, src_ip, src_port, dst_ip, dst_port);
    let kind = match next("missing step kind")? {
        "tcp" => {
            if proto != Proto::Tcp {
                return Err(ScriptError::new(line, "tcp steps need protocol tcp"));
            }
            StepKind::Tcp(parse_flags(next("missing TCP flags")?, line)?)
        }
        "udp-raw" => StepKind::UdpRaw(parse_hex(next("missing hex payload")?, line)?),
        "quic-initial" => StepKind::QuicInitial,
        "quic-handshake" => StepKind::QuicHandshake,
        "quic-short" => match next("missing DCID (hex, valid or random)")? {
            "valid" => StepKind::QuicShort(DcidSpec::Valid),
            "random" => StepKind::QuicShort(DcidSpec::Attacker),
            hex => StepKind::QuicShort(DcidSpec::Hex(parse_hex(hex, line)?)),
        },
        "reset-forgery" => StepKind::ResetForgery,
        _ => return Err(ScriptError::new(line, "unknown step kind")),
    };
    if !matches!(kind, StepKind::Tcp(_)) && proto != Proto::Udp {
        return Err(ScriptError::new(line, "datagram steps need protocol udp"));
    }
    Ok(Step { at_ms, actor, tuple, kind })
}

fn parse_flags(s: &str, line: usize) -> Result<TcpFlags, ScriptError> {
    let mut flags = TcpFlags::default();
    for token in s.split([',', '-']) {
        match token.to_ascii_uppercase().as_str() {
            "SYN" => flags.syn = true,
            "ACK" => flags.ack = true,
            "FIN" => flags.fin = true,
            "RST" => flags.rst = true,
            _ => return Err(ScriptError::new(line, "flags are SYN, ACK, FIN, RST")),
        }
    }
    Ok(flags)
}

fn parse_hex(s: &str, line: usize) -> Result<Vec<u8>, ScriptError> {
    hex::decode(s).map_err(|_| ScriptError::new(line, "bad hex"))
}
