//! Deterministic actor-based attack simulator.
//!
//! A scenario scripts datagram sends by three actors — client, server, and
//! an attacker sitting on the server side — against a logical clock. The
//! engine materializes each step into concrete wire bytes (QUIC headers
//! built with the wire module, seeded-RNG connection IDs), then pushes every
//! packet through sweep → tracker → rule evaluation, recording one trace
//! line per step. Identical scenario and config always produce byte-identical
//! traces.
//!
//! The same engine replays capture records, so a pcap export of a scenario
//! runs through exactly the code path the scenario itself did.

mod builtins;
mod script;

pub use builtins::{builtin, builtin_names, hole_punch};
pub use script::{parse_scenario, ScriptError};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;

use rand_core::{RngCore, SeedableRng};

use crate::capture::{CaptureBody, CaptureRecord};
use crate::conntable::{
    ConnTable, CtState, Direction, Event, FiveTuple, QuicTrackMode, TableError, TtlPolicy,
};
use crate::firewall::{Chain, CtClass, Ruleset, Verdict};
use crate::tracker::{quic_step, tcp_step, udp_step, QuicConfig, RefusalReason, TcpFlags};
use crate::wire::{self, ParseContext, WireError, VERSION_DRAFT29};

type Rng = rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Actor {
    Client,
    Server,
    Attacker,
}

impl Actor {
    pub fn name(&self) -> &'static str {
        match self {
            Actor::Client => "client",
            Actor::Server => "server",
            Actor::Attacker => "attacker",
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How UDP datagrams are tracked. TCP segments always run through the TCP
/// flag machine regardless of this choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackerKind {
    Tcp,
    Udp,
    Quic,
}

impl TrackerKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrackerKind::Tcp => "tcp",
            TrackerKind::Udp => "udp",
            TrackerKind::Quic => "quic",
        }
    }
}

impl fmt::Display for TrackerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the attacker gets the DCIDs it stamps on forged packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttackerDcid {
    /// Fresh random ID per packet.
    #[default]
    RandomPerPacket,
    /// One random ID drawn once and reused.
    FixedRandom,
    /// The valid ID of the hijacked connection — models an insider who can
    /// read the server's connection state.
    CopyValid,
}

impl AttackerDcid {
    pub fn name(&self) -> &'static str {
        match self {
            AttackerDcid::RandomPerPacket => "random",
            AttackerDcid::FixedRandom => "fixed",
            AttackerDcid::CopyValid => "copy-valid",
        }
    }
}

/// DCID selector for scripted short-header packets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DcidSpec {
    /// Literal bytes.
    Hex(Vec<u8>),
    /// The SCID of whichever endpoint receives the packet.
    Valid,
    /// Resolved through the configured [`AttackerDcid`] strategy.
    Attacker,
}

/// What a step puts on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepKind {
    Tcp(TcpFlags),
    UdpRaw(Vec<u8>),
    QuicInitial,
    QuicHandshake,
    QuicShort(DcidSpec),
    /// A 21-byte stateless-reset-shaped packet with a guessed token.
    ResetForgery,
}

impl StepKind {
    fn label(&self) -> String {
        match self {
            StepKind::Tcp(flags) => alloc::format!("tcp {flags}"),
            StepKind::UdpRaw(_) => String::from("udp-raw"),
            StepKind::QuicInitial => String::from("quic-initial"),
            StepKind::QuicHandshake => String::from("quic-handshake"),
            StepKind::QuicShort(_) => String::from("quic-short"),
            StepKind::ResetForgery => String::from("reset-forgery"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub at_ms: u64,
    pub actor: Actor,
    pub tuple: FiveTuple,
    pub kind: StepKind,
}

/// Actor addresses. The attacker defaults to the server's address: the
/// threat model is a compromised server host (or a neighbour able to spoof
/// it).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Actors {
    pub client: Ipv4Addr,
    pub server: Ipv4Addr,
    pub attacker: Ipv4Addr,
}

impl Default for Actors {
    fn default() -> Self {
        let server = Ipv4Addr::new(192, 168, 79, 128);
        Self { client: Ipv4Addr::new(192, 168, 79, 132), server, attacker: server }
    }
}

impl Actors {
    pub fn ip(&self, actor: Actor) -> Ipv4Addr {
        match actor {
            Actor::Client => self.client,
            Actor::Server => self.server,
            Actor::Attacker => self.attacker,
        }
    }
}

/// Everything tunable about a run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub ttl: TtlPolicy,
    pub quic: QuicConfig,
    pub attacker_dcid: AttackerDcid,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            ttl: TtlPolicy::default(),
            quic: QuicConfig::default(),
            attacker_dcid: AttackerDcid::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub actors: Actors,
    pub steps: Vec<Step>,
    pub tracker: TrackerKind,
    pub ruleset: Ruleset,
    pub config: SimConfig,
}

impl Scenario {
    pub fn with_tracker(mut self, tracker: TrackerKind) -> Self {
        self.tracker = tracker;
        self
    }

    pub fn with_mode(mut self, mode: QuicTrackMode) -> Self {
        self.config.quic.mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    NonMonotonicTime { step: usize },
    /// A step's source address does not belong to its actor.
    ActorTupleMismatch { step: usize },
    /// Neither endpoint of the tuple is the protected server.
    TupleNotRoutable { step: usize },
    Clock(TableError),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::NonMonotonicTime { step } => {
                write!(f, "step {step}: time goes backwards")
            }
            ScenarioError::ActorTupleMismatch { step } => {
                write!(f, "step {step}: tuple source does not match the actor's address")
            }
            ScenarioError::TupleNotRoutable { step } => {
                write!(f, "step {step}: neither endpoint is the protected server")
            }
            ScenarioError::Clock(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ScenarioError {}

impl From<TableError> for ScenarioError {
    fn from(e: TableError) -> Self {
        ScenarioError::Clock(e)
    }
}

/// One step of a materialized scenario: concrete bytes (or TCP flags), ready
/// for the firewall stack or for pcap export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WirePacket {
    pub at_ms: u64,
    pub actor: Actor,
    pub tuple: FiveTuple,
    pub label: String,
    pub body: PacketBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PacketBody {
    Tcp(TcpFlags),
    Datagram(Vec<u8>),
}

impl WirePacket {
    pub fn to_capture_record(&self) -> CaptureRecord {
        let body = match &self.body {
            PacketBody::Tcp(flags) => CaptureBody::Tcp(*flags),
            PacketBody::Datagram(bytes) => CaptureBody::Udp(bytes.clone()),
        };
        CaptureRecord { at_ms: self.at_ms, tuple: self.tuple, body }
    }
}

/// Per-connection endpoint model used while synthesizing honest QUIC
/// traffic. IDs are drawn from the seeded RNG the first time a flow is
/// touched, so materialization is reproducible.
struct FlowModel {
    client_scid: [u8; 8],
    client_initial_dcid: [u8; 8],
    server_scid: [u8; 8],
    /// The client switches its long-header DCID to the server's SCID once
    /// any server long packet has been seen.
    server_revealed: bool,
}

struct Materializer {
    rng: Rng,
    flows: alloc::collections::BTreeMap<FiveTuple, FlowModel>,
    attacker_fixed: Option<[u8; 8]>,
    strategy: AttackerDcid,
    server: Ipv4Addr,
}

impl Materializer {
    fn flow(&mut self, canonical: FiveTuple) -> &mut FlowModel {
        let rng = &mut self.rng;
        self.flows.entry(canonical).or_insert_with(|| {
            let mut draw = || {
                let mut b = [0u8; 8];
                rng.fill_bytes(&mut b);
                b
            };
            FlowModel {
                client_scid: draw(),
                client_initial_dcid: draw(),
                server_scid: draw(),
                server_revealed: false,
            }
        })
    }

    fn opaque(&mut self, len: usize) -> Vec<u8> {
        let mut b = alloc::vec![0u8; len];
        self.rng.fill_bytes(&mut b);
        b
    }

    /// Client-side orientation of a tuple: the side sending toward the
    /// server is "the client side" for modeling purposes.
    fn canonical(&self, tuple: &FiveTuple) -> (FiveTuple, bool) {
        if tuple.dst_ip == self.server {
            (*tuple, true)
        } else {
            (tuple.reversed(), false)
        }
    }

    fn datagram(&mut self, tuple: &FiveTuple, actor: Actor, kind: &StepKind) -> Vec<u8> {
        let (canonical, toward_server) = self.canonical(tuple);
        match kind {
            StepKind::UdpRaw(bytes) => bytes.clone(),
            StepKind::QuicInitial => {
                let body = self.opaque(48);
                let flow = self.flow(canonical);
                let (dcid, scid) = if toward_server {
                    let dcid = if flow.server_revealed {
                        flow.server_scid
                    } else {
                        flow.client_initial_dcid
                    };
                    (dcid, flow.client_scid)
                } else {
                    flow.server_revealed = true;
                    (flow.client_scid, flow.server_scid)
                };
                wire::build_long_header(wire::PacketKind::Initial, VERSION_DRAFT29, &dcid, &scid, &body)
                    .expect("8-byte IDs")
            }
            StepKind::QuicHandshake => {
                let body = self.opaque(40);
                let flow = self.flow(canonical);
                let (dcid, scid) = if toward_server {
                    (flow.server_scid, flow.client_scid)
                } else {
                    flow.server_revealed = true;
                    (flow.client_scid, flow.server_scid)
                };
                wire::build_long_header(
                    wire::PacketKind::Handshake,
                    VERSION_DRAFT29,
                    &dcid,
                    &scid,
                    &body,
                )
                .expect("8-byte IDs")
            }
            StepKind::QuicShort(spec) => {
                let dcid: Vec<u8> = match spec {
                    DcidSpec::Hex(bytes) => bytes.clone(),
                    DcidSpec::Valid => self.valid_dcid(canonical, toward_server),
                    DcidSpec::Attacker => match (self.strategy, actor) {
                        (AttackerDcid::CopyValid, _) => self.valid_dcid(canonical, toward_server),
                        (AttackerDcid::FixedRandom, _) => {
                            if self.attacker_fixed.is_none() {
                                let mut b = [0u8; 8];
                                self.rng.fill_bytes(&mut b);
                                self.attacker_fixed = Some(b);
                            }
                            self.attacker_fixed.unwrap().to_vec()
                        }
                        _ => self.opaque(8),
                    },
                };
                let body = self.opaque(24);
                wire::build_short_header(&dcid, &body).expect("IDs stay under 21 bytes")
            }
            StepKind::ResetForgery => {
                // 01 fixed bits, 38 unpredictable bits, then a 128-bit token
                // guess: 21 bytes, shape-identical to a short data packet.
                let mut pkt = self.opaque(21);
                pkt[0] = 0x40 | (pkt[0] & 0x3f);
                pkt
            }
            StepKind::Tcp(_) => unreachable!("TCP steps carry flags, not datagrams"),
        }
    }

    fn valid_dcid(&mut self, canonical: FiveTuple, toward_server: bool) -> Vec<u8> {
        let flow = self.flow(canonical);
        if toward_server {
            flow.server_scid.to_vec()
        } else {
            flow.client_scid.to_vec()
        }
    }
}

/// Expands scenario steps into concrete packets. Validation happens here:
/// monotonic times, actor/source consistency, server routability.
pub fn materialize(scenario: &Scenario) -> Result<Vec<WirePacket>, ScenarioError> {
    let mut m = Materializer {
        rng: Rng::seed_from_u64(scenario.config.seed),
        flows: alloc::collections::BTreeMap::new(),
        attacker_fixed: None,
        strategy: scenario.config.attacker_dcid,
        server: scenario.actors.server,
    };
    let mut packets = Vec::with_capacity(scenario.steps.len());
    let mut last = 0u64;
    for (index, step) in scenario.steps.iter().enumerate() {
        if step.at_ms < last {
            return Err(ScenarioError::NonMonotonicTime { step: index });
        }
        last = step.at_ms;
        if step.tuple.src_ip != scenario.actors.ip(step.actor) {
            return Err(ScenarioError::ActorTupleMismatch { step: index });
        }
        if step.tuple.src_ip != scenario.actors.server && step.tuple.dst_ip != scenario.actors.server {
            return Err(ScenarioError::TupleNotRoutable { step: index });
        }
        let body = match &step.kind {
            StepKind::Tcp(flags) => PacketBody::Tcp(*flags),
            kind => PacketBody::Datagram(m.datagram(&step.tuple, step.actor, kind)),
        };
        packets.push(WirePacket {
            at_ms: step.at_ms,
            actor: step.actor,
            tuple: step.tuple,
            label: step.kind.label(),
            body,
        });
    }
    Ok(packets)
}

/// One line of the verdict trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub step: usize,
    pub at_ms: u64,
    pub actor: Actor,
    pub chain: Chain,
    pub tuple: FiveTuple,
    pub kind: String,
    pub class: CtClass,
    pub verdict: Verdict,
    pub state_after: Option<CtState>,
    pub refusal: Option<RefusalReason>,
    pub note: Option<&'static str>,
}

impl TraceRecord {
    /// Stable machine-readable line, fixed field order.
    pub fn to_line(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        let t = &self.tuple;
        let _ = write!(
            s,
            "pkt={} t={} actor={} chain={} proto={} src={}:{} dst={}:{} kind={} ct={} verdict={} rule={} state={} reason={}",
            self.step,
            self.at_ms,
            self.actor,
            self.chain,
            t.proto,
            t.src_ip,
            t.src_port,
            t.dst_ip,
            t.dst_port,
            self.kind,
            self.class,
            self.verdict.action,
            match self.verdict.rule_index {
                Some(i) => alloc::format!("{i}"),
                None => String::from("-"),
            },
            match self.state_after {
                Some(state) => String::from(state.name()),
                None => String::from("-"),
            },
            match self.refusal {
                Some(reason) => String::from(reason.name()),
                None => String::from("-"),
            },
        );
        s
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub name: String,
    pub records: Vec<TraceRecord>,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn event_lines(&self) -> Vec<String> {
        self.events.iter().map(Event::to_line).collect()
    }
}

/// Attack-oriented summary of a trace. Everything here is recomputable from
/// the records alone.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Metrics {
    pub attacker_accepted: usize,
    pub attacker_dropped: usize,
    /// Last accepted attacker packet minus the time legitimate traffic went
    /// idle; 0 when the attacker never got through.
    pub hole_open_ms: u64,
    pub state_timeline: Vec<(u64, CtState)>,
}

pub fn metrics(trace: &Trace) -> Metrics {
    let mut m = Metrics::default();
    let mut idle_start = 0u64;
    let mut last_attacker_accept: Option<u64> = None;
    let mut last_state: Option<CtState> = None;
    for r in &trace.records {
        if r.actor == Actor::Attacker {
            if r.verdict.is_accept() {
                m.attacker_accepted += 1;
                last_attacker_accept = Some(r.at_ms);
            } else {
                m.attacker_dropped += 1;
            }
        } else {
            idle_start = idle_start.max(r.at_ms);
        }
        if let Some(state) = r.state_after {
            if last_state != Some(state) {
                m.state_timeline.push((r.at_ms, state));
                last_state = Some(state);
            }
        }
    }
    if let Some(at) = last_attacker_accept {
        m.hole_open_ms = at.saturating_sub(idle_start);
    }
    m
}

/// Runs a scenario end to end.
pub fn run(scenario: &Scenario) -> Result<Trace, ScenarioError> {
    let packets = materialize(scenario)?;
    run_packets(
        &scenario.name,
        &packets,
        scenario.tracker,
        &scenario.ruleset,
        &scenario.config,
        scenario.actors.server,
    )
    .map(|(trace, _)| trace)
}

/// Maps capture records onto engine packets. Actors are attributed by
/// address: packets sourced at the server look like server traffic on the
/// wire no matter who really sent them.
pub fn capture_to_packets(records: &[CaptureRecord], server: Ipv4Addr) -> Vec<WirePacket> {
    records
        .iter()
        .map(|r| WirePacket {
            at_ms: r.at_ms,
            actor: if r.tuple.src_ip == server { Actor::Server } else { Actor::Client },
            tuple: r.tuple,
            label: match &r.body {
                CaptureBody::Tcp(flags) => alloc::format!("tcp {flags}"),
                CaptureBody::Udp(_) => String::from("udp-datagram"),
            },
            body: match &r.body {
                CaptureBody::Tcp(flags) => PacketBody::Tcp(*flags),
                CaptureBody::Udp(bytes) => PacketBody::Datagram(bytes.clone()),
            },
        })
        .collect()
}

/// Replays capture records through the same engine a scenario uses.
pub fn replay(
    name: &str,
    records: &[CaptureRecord],
    tracker: TrackerKind,
    ruleset: &Ruleset,
    config: &SimConfig,
    server: Ipv4Addr,
) -> Result<Trace, ScenarioError> {
    let packets = capture_to_packets(records, server);
    run_packets(name, &packets, tracker, ruleset, config, server).map(|(trace, _)| trace)
}

enum StepOutcome {
    Tracked { created: bool, note: Option<&'static str> },
    Neutral { note: Option<&'static str> },
    Refused(RefusalReason),
}

/// The shared firewall stack: sweep, direction resolution, tracker step,
/// rule evaluation, unconfirmed-entry rollback. Returns the trace and the
/// table as it stands after the last packet.
pub fn run_packets(
    name: &str,
    packets: &[WirePacket],
    tracker: TrackerKind,
    ruleset: &Ruleset,
    config: &SimConfig,
    server: Ipv4Addr,
) -> Result<(Trace, ConnTable), ScenarioError> {
    let mut table = ConnTable::new(config.ttl);
    let mut ctx = ParseContext::new();
    for v in &config.quic.accepted_versions {
        ctx.accept_version(*v);
    }
    let mut trace = Trace { name: String::from(name), ..Trace::default() };

    for (index, pkt) in packets.iter().enumerate() {
        // Time advances, expired entries die first.
        for event in table.sweep(pkt.at_ms)? {
            ctx.forget_flow(&event.snapshot.tuple);
        }
        trace.events.extend(table.take_events());

        let chain = if pkt.tuple.dst_ip == server {
            Chain::Input
        } else if pkt.tuple.src_ip == server {
            Chain::Output
        } else {
            return Err(ScenarioError::TupleNotRoutable { step: index });
        };
        let looked_up = table.lookup(&pkt.tuple).map(|(_, d)| d);
        let dir = looked_up.unwrap_or(if chain == Chain::Input {
            Direction::Original
        } else {
            Direction::Reply
        });
        // Entries created by packets the rules then drop never get
        // confirmed; keep a snapshot to roll back to.
        let snapshot = looked_up.is_none().then(|| table.clone());

        let outcome = step_packet(&mut table, &mut ctx, pkt, dir, tracker, config);

        let (class, refusal, note) = match &outcome {
            StepOutcome::Tracked { created, note, .. } => (
                if *created { CtClass::New } else { CtClass::Established },
                None,
                *note,
            ),
            StepOutcome::Neutral { note, .. } => (CtClass::Invalid, None, *note),
            StepOutcome::Refused(reason) => (CtClass::Invalid, Some(*reason), None),
        };
        let verdict = ruleset.evaluate(chain, &pkt.tuple, class);

        if !verdict.is_accept() {
            if let (StepOutcome::Tracked { created: true, .. }, Some(snapshot)) = (&outcome, snapshot) {
                table = snapshot;
            }
        }
        if let StepOutcome::Tracked { .. } = outcome {
            if verdict.is_accept() && tracker == TrackerKind::Quic {
                remember_dcid_lens(&mut ctx, &table, &pkt.tuple);
            }
        }
        trace.events.extend(table.take_events());

        trace.records.push(TraceRecord {
            step: index,
            at_ms: pkt.at_ms,
            actor: pkt.actor,
            chain,
            tuple: pkt.tuple,
            kind: pkt.label.clone(),
            class,
            verdict,
            state_after: current_state(&table, &pkt.tuple),
            refusal,
            note,
        });
    }
    Ok((trace, table))
}

fn current_state(table: &ConnTable, tuple: &FiveTuple) -> Option<CtState> {
    table.lookup(tuple).map(|(e, _)| e.state)
}

fn step_packet(
    table: &mut ConnTable,
    ctx: &mut ParseContext,
    pkt: &WirePacket,
    dir: Direction,
    tracker: TrackerKind,
    config: &SimConfig,
) -> StepOutcome {
    match &pkt.body {
        PacketBody::Tcp(flags) => match tcp_step(table, &pkt.tuple, *flags, dir, pkt.at_ms) {
            Ok(ok) => StepOutcome::Tracked {
                created: ok.event.kind == crate::conntable::EventKind::New,
                note: None,
            },
            Err(refusal) => StepOutcome::Refused(refusal.reason),
        },
        PacketBody::Datagram(bytes) => match tracker {
            TrackerKind::Quic => {
                let orig_tuple = if dir == Direction::Reply { pkt.tuple.reversed() } else { pkt.tuple };
                let headers = match wire::parse_datagram(bytes, ctx, Some((orig_tuple, dir))) {
                    Ok(headers) => headers,
                    Err(e) => return StepOutcome::Refused(wire_refusal(e)),
                };
                match quic_step(table, &pkt.tuple, &headers, dir, pkt.at_ms, &config.quic) {
                    Ok(ok) if ok.accept_hint => {
                        StepOutcome::Tracked { created: ok.created, note: ok.note }
                    }
                    Ok(ok) => StepOutcome::Neutral { note: ok.note },
                    Err(refusal) => StepOutcome::Refused(refusal.reason),
                }
            }
            _ => match udp_step(table, &pkt.tuple, dir, pkt.at_ms) {
                Ok(ok) => StepOutcome::Tracked {
                    created: ok.event.kind == crate::conntable::EventKind::New,
                    note: None,
                },
                Err(refusal) => StepOutcome::Refused(refusal.reason),
            },
        },
    }
}

fn wire_refusal(e: WireError) -> RefusalReason {
    match e {
        WireError::UnsupportedVersion(_) => RefusalReason::BadVersion,
        _ => RefusalReason::MalformedQuic,
    }
}

/// Keeps the parse context's short-header DCID lengths in sync with what the
/// tracker has learned about a flow.
fn remember_dcid_lens(ctx: &mut ParseContext, table: &ConnTable, tuple: &FiveTuple) {
    let Some((entry, _)) = table.lookup(tuple) else { return };
    let Some(extra) = entry.extra.as_quic() else { return };
    let orig = entry.tuple;
    ctx.expect_dcid_len(orig, Direction::Reply, extra.dcid_len_to_client() as u8);
    if let Some(len) = extra.dcid_len_to_server() {
        ctx.expect_dcid_len(orig, Direction::Original, len as u8);
    }
}
