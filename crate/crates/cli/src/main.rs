mod commands;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use quicwall_core::conntable::QuicTrackMode;
use quicwall_core::scenario::{AttackerDcid, TrackerKind};

const REFUSAL_HELP: &str = "\
Tracker refusal reasons (closed vocabulary, printed verbatim in traces):
  NoEntry        packet matches no live entry and may not create one
  BadTransition  TCP flags do not advance any legal transition
  TimeWaitSyn    SYN while the tuple is quarantined in TIME_WAIT
  DcidMismatch   QUIC connection ID differs from the one bound in the handshake
  NotInitial     packet kind cannot open or advance the QUIC handshake
  BadVersion     QUIC version outside the accepted set
  MalformedQuic  datagram did not parse as QUIC";

/// Stateful-firewall lab: conntrack-style TCP/UDP tracking, QUIC-aware
/// tracking, and a deterministic attack simulator.
#[derive(Parser)]
#[command(name = "quicwall", version, after_long_help = REFUSAL_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dissect a hex-encoded UDP datagram into its QUIC packets.
    Parse(ParseArgs),
    /// Run a builtin or scripted scenario through tracker and rules.
    Simulate(SimulateArgs),
    /// Replay a pcap file through tracker and rules.
    Track(TrackArgs),
    /// Inspect rule files.
    #[command(subcommand)]
    Rules(RulesCommand),
}

#[derive(Args)]
struct ParseArgs {
    /// Hex bytes (whitespace-insensitive); may be split across arguments.
    hex: Vec<String>,
    /// Read the hex text from a file instead.
    #[arg(long, conflicts_with = "hex")]
    file: Option<std::path::PathBuf>,
    /// DCID length to assume for short-header packets.
    #[arg(long)]
    expected_dcid_len: Option<u8>,
    /// Extra QUIC version to accept, hex or decimal (repeatable).
    #[arg(long = "accept-version")]
    accept_versions: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Builtin scenario name or path to a scenario file.
    scenario: String,
    #[arg(long, value_enum)]
    tracker: Option<TrackerArg>,
    /// QUIC tracker connection-ID policy.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// UDP/QUIC entry lifetime in seconds.
    #[arg(long)]
    ttl_udp: Option<u32>,
    /// iptables-save rules file (defaults to the embedded testbed rules).
    #[arg(long)]
    rules: Option<std::path::PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    /// Write the materialized packets as a classic pcap file.
    #[arg(long)]
    export_pcap: Option<std::path::PathBuf>,
    /// Assert on a metric, e.g. attacker_accepted=0 or hole_open_ms>=600000;
    /// a failed assertion sets the exit code (repeatable).
    #[arg(long)]
    expect: Vec<String>,
    #[arg(long, value_enum)]
    attacker_dcid: Option<AttackerDcidArg>,
    /// Seed for connection-ID and payload generation.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrackArgs {
    /// Classic pcap file.
    pcap: std::path::PathBuf,
    #[arg(long, value_enum, default_value_t = TrackerArg::Udp)]
    tracker: TrackerArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Strict)]
    mode: ModeArg,
    #[arg(long)]
    ttl_udp: Option<u32>,
    #[arg(long)]
    rules: Option<std::path::PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    /// Protected host; defaults to the destination of the first packet.
    #[arg(long)]
    server: Option<std::net::Ipv4Addr>,
    /// After the last packet, advance the clock until every entry expired.
    #[arg(long)]
    advance_to_end: bool,
}

#[derive(Subcommand)]
enum RulesCommand {
    /// Parse a rules file and report what it contains.
    Check { file: std::path::PathBuf },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrackerArg {
    Tcp,
    Udp,
    Quic,
}

impl From<TrackerArg> for TrackerKind {
    fn from(value: TrackerArg) -> Self {
        match value {
            TrackerArg::Tcp => TrackerKind::Tcp,
            TrackerArg::Udp => TrackerKind::Udp,
            TrackerArg::Quic => TrackerKind::Quic,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Strict,
    Fallback,
}

impl From<ModeArg> for QuicTrackMode {
    fn from(value: ModeArg) -> Self {
        match value {
            ModeArg::Strict => QuicTrackMode::StrictDcid,
            ModeArg::Fallback => QuicTrackMode::TupleFallback,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttackerDcidArg {
    Random,
    Fixed,
    CopyValid,
}

impl From<AttackerDcidArg> for AttackerDcid {
    fn from(value: AttackerDcidArg) -> Self {
        match value {
            AttackerDcidArg::Random => AttackerDcid::RandomPerPacket,
            AttackerDcidArg::Fixed => AttackerDcid::FixedRandom,
            AttackerDcidArg::CopyValid => AttackerDcid::CopyValid,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    /// Human-readable columns.
    Table,
    /// One stable machine-readable record per line.
    Records,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Parse(args) => commands::parse(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Track(args) => commands::track(args),
        Command::Rules(RulesCommand::Check { file }) => commands::rules_check(&file),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
