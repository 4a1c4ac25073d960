use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};

use quicwall_core::capture::{read_pcap, write_pcap};
use quicwall_core::conntable::{ConnTable, Direction, FiveTuple, Proto};
use quicwall_core::firewall::load_rules;
use quicwall_core::scenario::{
    builtin, builtin_names, capture_to_packets, materialize, metrics, parse_scenario, run_packets,
    Metrics, Scenario, SimConfig, TrackerKind,
};
use quicwall_core::wire::{parse_datagram, stateless_reset_shape, ParseContext, QuicHeader};

use crate::output;
use crate::{ParseArgs, SimulateArgs, TrackArgs};

const USAGE_ERROR: u8 = 2;

pub fn parse(args: ParseArgs) -> Result<ExitCode> {
    let text = if let Some(path) = &args.file {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    } else if !args.hex.is_empty() {
        args.hex.join("")
    } else {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf).context("reading stdin")?;
        buf
    };
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bytes = match hex::decode(&compact) {
        Ok(bytes) => bytes,
        Err(e) => {
            eprintln!("usage error: invalid hex input: {e}");
            return Ok(ExitCode::from(USAGE_ERROR));
        }
    };

    let mut ctx = ParseContext::new();
    for v in &args.accept_versions {
        let parsed = v
            .strip_prefix("0x")
            .map(|h| u32::from_str_radix(h, 16))
            .unwrap_or_else(|| v.parse());
        match parsed {
            Ok(version) => ctx.accept_version(version),
            Err(_) => {
                eprintln!("usage error: bad version {v:?}");
                return Ok(ExitCode::from(USAGE_ERROR));
            }
        }
    }
    // The context API is flow-keyed; dissecting loose bytes uses a synthetic
    // flow.
    let flow = (
        FiveTuple::new(
            Proto::Udp,
            std::net::Ipv4Addr::UNSPECIFIED,
            1,
            std::net::Ipv4Addr::UNSPECIFIED,
            2,
        ),
        Direction::Original,
    );
    if let Some(len) = args.expected_dcid_len {
        if len > 20 {
            eprintln!("usage error: --expected-dcid-len must be at most 20");
            return Ok(ExitCode::from(USAGE_ERROR));
        }
        ctx.expect_dcid_len(flow.0, flow.1, len);
    }

    match parse_datagram(&bytes, &ctx, Some(flow)) {
        Ok(headers) => {
            print_headers(&headers, &bytes);
            print_shape(&bytes);
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            eprintln!("parse failed: {err}");
            Ok(ExitCode::FAILURE)
        }
    }
}

fn print_headers(headers: &[QuicHeader], datagram: &[u8]) {
    println!("datagram: {} bytes, {} packet(s)", datagram.len(), headers.len());
    for (i, h) in headers.iter().enumerate() {
        println!("packet {}: {}", i + 1, h.kind);
        if let Some(version) = h.version {
            println!("  version: {version:#010x}");
        }
        if h.dcid_ambiguous {
            println!("  dcid: unknown length (supply --expected-dcid-len to split it)");
        } else {
            println!("  dcid: {} (len {})", h.dcid, h.dcid.len());
        }
        if let Some(scid) = &h.scid {
            println!("  scid: {} (len {})", scid, scid.len());
        }
        println!(
            "  payload: {} opaque bytes at offset {}",
            h.payload_span.len, h.payload_span.offset
        );
    }
}

fn print_shape(datagram: &[u8]) {
    let report = stateless_reset_shape(datagram);
    if report.is_plausible_reset() {
        let token = report.token_window.unwrap_or_default();
        println!(
            "shape: plausible stateless reset / short packet (token window {})",
            hex::encode(token)
        );
    } else if report.plausible_short_header {
        println!("shape: short-header form but under the 21-byte reset minimum");
    } else {
        println!("shape: not reset-shaped (long header form or bad fixed bits)");
    }
}

pub fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let mut scenario = load_scenario(&args.scenario)?;
    apply_overrides(
        &mut scenario,
        args.tracker.map(Into::into),
        args.mode.map(Into::into),
        args.ttl_udp,
        args.rules.as_deref(),
        args.attacker_dcid.map(Into::into),
        args.seed,
    )?;

    let packets = materialize(&scenario)?;
    if let Some(path) = &args.export_pcap {
        let records: Vec<_> = packets.iter().map(|p| p.to_capture_record()).collect();
        std::fs::write(path, write_pcap(&records))
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("exported {} packets to {}", records.len(), path.display());
    }
    let (trace, _table) = run_packets(
        &scenario.name,
        &packets,
        scenario.tracker,
        &scenario.ruleset,
        &scenario.config,
        scenario.actors.server,
    )?;
    let m = metrics(&trace);

    match args.format {
        crate::FormatArg::Table => output::print_trace_table(&trace, &m),
        crate::FormatArg::Records => output::print_trace_records(&trace, &m),
    }

    let mut failed = false;
    for expr in &args.expect {
        match check_expectation(expr, &m) {
            Ok(true) => println!("expect {expr}: ok"),
            Ok(false) => {
                println!("expect {expr}: FAILED");
                failed = true;
            }
            Err(e) => {
                eprintln!("usage error: {e}");
                return Ok(ExitCode::from(USAGE_ERROR));
            }
        }
    }
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    if let Some(s) = builtin(name_or_path) {
        return Ok(s);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(parse_scenario(&text)?);
    }
    bail!(
        "no builtin scenario or file named {name_or_path:?} (builtins: {})",
        builtin_names().join(", ")
    );
}

#[allow(clippy::too_many_arguments)]
fn apply_overrides(
    scenario: &mut Scenario,
    tracker: Option<TrackerKind>,
    mode: Option<quicwall_core::conntable::QuicTrackMode>,
    ttl_udp: Option<u32>,
    rules: Option<&Path>,
    attacker_dcid: Option<quicwall_core::scenario::AttackerDcid>,
    seed: Option<u64>,
) -> Result<()> {
    if let Some(t) = tracker {
        scenario.tracker = t;
    }
    if let Some(m) = mode {
        scenario.config.quic.mode = m;
    }
    if let Some(ttl) = ttl_udp {
        if ttl == 0 {
            bail!("--ttl-udp must be positive");
        }
        scenario.config.ttl.udp_s = ttl;
    }
    if let Some(path) = rules {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        scenario.ruleset = load_rules(&text)?;
    }
    if let Some(strategy) = attacker_dcid {
        scenario.config.attacker_dcid = strategy;
    }
    if let Some(seed) = seed {
        scenario.config.seed = seed;
    }
    Ok(())
}

/// `<metric><op><value>` with op in >=, <=, !=, ==, =, >, <.
fn check_expectation(expr: &str, m: &Metrics) -> Result<bool> {
    let ops = [">=", "<=", "!=", "==", "=", ">", "<"];
    let (op, pos) = ops
        .iter()
        .filter_map(|op| expr.find(op).map(|pos| (*op, pos)))
        .min_by_key(|(_, pos)| *pos)
        .context("expectation needs an operator like attacker_accepted=0")?;
    let metric = &expr[..pos];
    let value: u64 = expr[pos + op.len()..]
        .trim()
        .parse()
        .with_context(|| format!("bad value in {expr:?}"))?;
    let actual = match metric.trim() {
        "attacker_accepted" => m.attacker_accepted as u64,
        "attacker_dropped" => m.attacker_dropped as u64,
        "hole_open_ms" | "hole_open_duration_ms" => m.hole_open_ms,
        other => bail!("unknown metric {other:?} (attacker_accepted, attacker_dropped, hole_open_ms)"),
    };
    Ok(match op {
        ">=" => actual >= value,
        "<=" => actual <= value,
        "!=" => actual != value,
        "=" | "==" => actual == value,
        ">" => actual > value,
        "<" => actual < value,
        _ => unreachable!(),
    })
}

pub fn track(args: TrackArgs) -> Result<ExitCode> {
    let bytes =
        std::fs::read(&args.pcap).with_context(|| format!("reading {}", args.pcap.display()))?;
    let capture = read_pcap(&bytes)?;
    let server = args
        .server
        .or_else(|| capture.records.first().map(|r| r.tuple.dst_ip))
        .unwrap_or(std::net::Ipv4Addr::new(192, 168, 79, 128));

    let mut config = SimConfig::default();
    config.quic.mode = args.mode.into();
    if let Some(ttl) = args.ttl_udp {
        if ttl == 0 {
            bail!("--ttl-udp must be positive");
        }
        config.ttl.udp_s = ttl;
    }
    let ruleset = match &args.rules {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            load_rules(&text)?
        }
        None => quicwall_core::firewall::Ruleset::testbed_default(),
    };

    let name = args
        .pcap
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| String::from("capture"));
    let packets = capture_to_packets(&capture.records, server);
    let (mut trace, mut table) =
        run_packets(&name, &packets, args.tracker.into(), &ruleset, &config, server)?;

    if args.advance_to_end {
        // Sweep forward until every entry has timed out.
        while let Some(max_expiry) = table.iter().map(|e| e.expiry).max() {
            table.sweep(max_expiry)?;
            trace.events.extend(table.take_events());
        }
    }

    let m = metrics(&trace);
    match args.format {
        crate::FormatArg::Table => output::print_trace_table(&trace, &m),
        crate::FormatArg::Records => output::print_trace_records(&trace, &m),
    }
    if capture.skipped > 0 {
        println!("skipped {} non-IPv4/TCP/UDP frame(s)", capture.skipped);
    }
    print_final_table(&table);
    Ok(ExitCode::SUCCESS)
}

fn print_final_table(table: &ConnTable) {
    println!("final table:");
    if table.is_empty() {
        println!("  (empty)");
        return;
    }
    for e in table.iter() {
        let mut labels = String::new();
        if e.flags.unreplied {
            labels.push_str(" [UNREPLIED]");
        }
        if e.flags.assured {
            labels.push_str(" [ASSURED]");
        }
        println!(
            "  {} {} src={}:{} dst={}:{}{} expires_at={}ms",
            e.tuple.proto,
            e.state,
            e.tuple.src_ip,
            e.tuple.src_port,
            e.tuple.dst_ip,
            e.tuple.dst_port,
            labels,
            e.expiry
        );
    }
}

pub fn rules_check(file: &PathBuf) -> Result<ExitCode> {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let ruleset = load_rules(&text)?;
    println!("{}: ok, {} rule(s), default policies DROP", file.display(), ruleset.rules().len());
    for (i, rule) in ruleset.rules().iter().enumerate() {
        let port = match rule.port {
            quicwall_core::firewall::PortMatch::Dport(p) => format!("dport {p}"),
            quicwall_core::firewall::PortMatch::Sport(p) => format!("sport {p}"),
        };
        println!("  [{i}] {} {} {} ctstate {} -> ACCEPT", rule.chain, rule.proto, port, rule.ctstates);
    }
    Ok(ExitCode::SUCCESS)
}
