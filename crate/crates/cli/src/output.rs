use quicwall_core::scenario::{Metrics, Trace};

/// Human-readable trace: aligned columns, then the conntrack event stream,
/// then metrics.
pub fn print_trace_table(trace: &Trace, metrics: &Metrics) {
    println!("trace: {} ({} packets)", trace.name, trace.records.len());
    println!(
        "{:>4} {:>9}  {:<8} {:<6} {:<5} {:<21} {:<21} {:<16} {:<11} {:<7} {:>4} {:<11} REASON",
        "PKT", "T(ms)", "ACTOR", "CHAIN", "PROTO", "SRC", "DST", "KIND", "CT", "VERDICT", "RULE",
        "STATE"
    );
    for r in &trace.records {
        let src = format!("{}:{}", r.tuple.src_ip, r.tuple.src_port);
        let dst = format!("{}:{}", r.tuple.dst_ip, r.tuple.dst_port);
        println!(
            "{:>4} {:>9}  {:<8} {:<6} {:<5} {:<21} {:<21} {:<16} {:<11} {:<7} {:>4} {:<11} {}",
            r.step,
            r.at_ms,
            r.actor.name(),
            r.chain.name(),
            r.tuple.proto.to_string(),
            src,
            dst,
            r.kind,
            r.class.name(),
            r.verdict.action.name(),
            r.verdict.rule_index.map(|i| i.to_string()).unwrap_or_else(|| "-".into()),
            r.state_after.map(|s| s.name().to_string()).unwrap_or_else(|| "-".into()),
            r.refusal.map(|x| x.name().to_string()).unwrap_or_else(|| "-".into()),
        );
        if let Some(note) = r.note {
            println!("      note: {note}");
        }
    }
    println!();
    println!("conntrack events:");
    for line in trace.event_lines() {
        println!("  {line}");
    }
    println!();
    print_metrics_table(metrics);
}

fn print_metrics_table(m: &Metrics) {
    println!("metrics:");
    println!("  attacker_accepted: {}", m.attacker_accepted);
    println!("  attacker_dropped:  {}", m.attacker_dropped);
    println!("  hole_open_ms:      {}", m.hole_open_ms);
    let timeline: Vec<String> =
        m.state_timeline.iter().map(|(t, s)| format!("{}@{t}", s.name())).collect();
    println!("  state_timeline:    {}", if timeline.is_empty() { "-".into() } else { timeline.join(" ") });
}

/// Machine-readable trace: `pkt=` records, `evt` lines, one `metrics` line.
/// Field order is fixed; output is byte-stable for identical inputs.
pub fn print_trace_records(trace: &Trace, metrics: &Metrics) {
    for r in &trace.records {
        println!("{}", r.to_line());
    }
    for line in trace.event_lines() {
        println!("evt {line}");
    }
    let timeline: Vec<String> =
        metrics.state_timeline.iter().map(|(t, s)| format!("{}@{t}", s.name())).collect();
    println!(
        "metrics attacker_accepted={} attacker_dropped={} hole_open_ms={} state_timeline={}",
        metrics.attacker_accepted,
        metrics.attacker_dropped,
        metrics.hole_open_ms,
        if timeline.is_empty() { "-".into() } else { timeline.join(",") }
    );
}
