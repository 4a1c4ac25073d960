//! Rule evaluation over an iptables-save subset.
//!
//! Supported input: a `*filter` table with `:CHAIN DROP [pkts:bytes]` policy
//! lines and `-A` rules of the shape
//! `-A INPUT -p udp -m udp --dport 443 -m conntrack --ctstate NEW,ESTABLISHED -j ACCEPT`.
//! Anything else is rejected with a line number. First match wins; a packet
//! matching no rule falls through to the chain's default policy (always
//! DROP in the supported subset). INVALID traffic never matches any ctstate
//! list.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::conntable::{FiveTuple, Proto};

/// The rule set deployed on the testbed server: both chains default-DROP,
/// port 443 in, established-only out.
pub const DEFAULT_RULES: &str = "\
# Generated by iptables-save v1.8.4
*filter
:INPUT DROP [581:48486]
:FORWARD DROP [0:0]
:OUTPUT DROP [27:3466]
-A INPUT -p tcp -m tcp --dport 443 -m conntrack --ctstate NEW,RELATED,ESTABLISHED -j ACCEPT
-A INPUT -p udp -m udp --dport 443 -m conntrack --ctstate NEW,RELATED,ESTABLISHED -j ACCEPT
-A OUTPUT -p tcp -m tcp --sport 443 -m conntrack --ctstate RELATED,ESTABLISHED -j ACCEPT
-A OUTPUT -p udp -m udp --sport 443 -m conntrack --ctstate RELATED,ESTABLISHED -j ACCEPT
COMMIT
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Chain {
    Input,
    Output,
}

impl Chain {
    pub fn name(&self) -> &'static str {
        match self {
            Chain::Input => "INPUT",
            Chain::Output => "OUTPUT",
        }
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Conntrack classification a rule matches against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtClass {
    New,
    Established,
    Related,
    Invalid,
}

impl CtClass {
    pub fn name(&self) -> &'static str {
        match self {
            CtClass::New => "NEW",
            CtClass::Established => "ESTABLISHED",
            CtClass::Related => "RELATED",
            CtClass::Invalid => "INVALID",
        }
    }
}

impl fmt::Display for CtClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which port a rule matches, and against what value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortMatch {
    Dport(u16),
    Sport(u16),
}

/// A set of ctstates, as written after `--ctstate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CtStateSet {
    pub new: bool,
    pub established: bool,
    pub related: bool,
}

impl CtStateSet {
    pub fn contains(&self, class: CtClass) -> bool {
        match class {
            CtClass::New => self.new,
            CtClass::Established => self.established,
            CtClass::Related => self.related,
            // INVALID never matches a ctstate list.
            CtClass::Invalid => false,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.new || self.established || self.related)
    }
}

impl fmt::Display for CtStateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (set, name) in [
            (self.new, "NEW"),
            (self.related, "RELATED"),
            (self.established, "ESTABLISHED"),
        ] {
            if set {
                if !first {
                    f.write_str(",")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        Ok(())
    }
}

/// One ACCEPT rule. The subset has no other targets; everything not accepted
/// falls to the chain's DROP policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rule {
    pub chain: Chain,
    pub proto: Proto,
    pub port: PortMatch,
    pub ctstates: CtStateSet,
}

impl Rule {
    fn matches(&self, chain: Chain, tuple: &FiveTuple, class: CtClass) -> bool {
        if self.chain != chain || self.proto != tuple.proto {
            return false;
        }
        let port_ok = match self.port {
            PortMatch::Dport(p) => tuple.dst_port == p,
            PortMatch::Sport(p) => tuple.src_port == p,
        };
        port_ok && self.ctstates.contains(class)
    }
}

/// An ordered rule set with default-DROP chain policies.
#[derive(Debug, Clone, Default)]
pub struct Ruleset {
    rules: Vec<Rule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Accept,
    Drop,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Accept => "ACCEPT",
            Action::Drop => "DROP",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-packet decision with a machine-readable justification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub action: Action,
    /// Index into [`Ruleset::rules`] of the accepting rule.
    pub rule_index: Option<usize>,
    pub reason: Option<&'static str>,
}

impl Verdict {
    fn accept(rule_index: usize) -> Self {
        Self { action: Action::Accept, rule_index: Some(rule_index), reason: None }
    }

    fn drop(reason: &'static str) -> Self {
        Self { action: Action::Drop, rule_index: None, reason: Some(reason) }
    }

    pub fn is_accept(&self) -> bool {
        self.action == Action::Accept
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleError {
    /// A directive outside the supported subset.
    UnsupportedDirective { line: usize, what: String },
    SyntaxError { line: usize, what: String },
}

impl fmt::Display for RuleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleError::UnsupportedDirective { line, what } => {
                write!(f, "line {line}: unsupported directive: {what}")
            }
            RuleError::SyntaxError { line, what } => write!(f, "line {line}: syntax error: {what}"),
        }
    }
}

impl core::error::Error for RuleError {}

impl Ruleset {
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// The testbed default (see [`DEFAULT_RULES`]).
    pub fn testbed_default() -> Self {
        load_rules(DEFAULT_RULES).expect("embedded default ruleset parses")
    }

    /// First-match evaluation; no match falls through to the chain's DROP
    /// policy. INVALID traffic never matches.
    pub fn evaluate(&self, chain: Chain, tuple: &FiveTuple, class: CtClass) -> Verdict {
        for (idx, rule) in self.rules.iter().enumerate() {
            if rule.matches(chain, tuple, class) {
                return Verdict::accept(idx);
            }
        }
        if class == CtClass::Invalid {
            Verdict::drop("invalid ctstate")
        } else {
            Verdict::drop("default policy")
        }
    }
}

fn unsupported(line: usize, what: &str) -> RuleError {
    RuleError::UnsupportedDirective { line, what: String::from(what) }
}

fn syntax(line: usize, what: &str) -> RuleError {
    RuleError::SyntaxError { line, what: String::from(what) }
}

/// Parses the iptables-save subset into an ordered [`Ruleset`].
pub fn load_rules(text: &str) -> Result<Ruleset, RuleError> {
    let mut rules = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(table) = line.strip_prefix('*') {
            if table != "filter" {
                return Err(unsupported(lineno, raw));
            }
            continue;
        }
        if line == "COMMIT" {
            continue;
        }
        if let Some(policy) = line.strip_prefix(':') {
            parse_policy(policy, lineno)?;
            continue;
        }
        if line.starts_with("-A ") {
            rules.push(parse_rule(line, lineno)?);
            continue;
        }
        return Err(unsupported(lineno, raw));
    }
    Ok(Ruleset { rules })
}

/// `:CHAIN POLICY [pkts:bytes]` — counters are parsed and ignored. Only DROP
/// policies are supported: the subset's safety argument rests on
/// default-deny.
fn parse_policy(rest: &str, lineno: usize) -> Result<(), RuleError> {
    let mut parts = rest.split_whitespace();
    let chain = parts.next().ok_or_else(|| syntax(lineno, "missing chain name"))?;
    if !matches!(chain, "INPUT" | "OUTPUT" | "FORWARD") {
        return Err(unsupported(lineno, chain));
    }
    let policy = parts.next().ok_or_else(|| syntax(lineno, "missing chain policy"))?;
    if policy != "DROP" {
        return Err(unsupported(lineno, policy));
    }
    if let Some(counters) = parts.next() {
        if !(counters.starts_with('[') && counters.ends_with(']')) {
            return Err(syntax(lineno, "malformed counters"));
        }
    }
    Ok(())
}

fn parse_rule(line: &str, lineno: usize) -> Result<Rule, RuleError> {
    let mut tokens = line.split_whitespace().peekable();
    tokens.next(); // "-A"
    let chain = match tokens.next() {
        Some("INPUT") => Chain::Input,
        Some("OUTPUT") => Chain::Output,
        Some(other) => return Err(unsupported(lineno, other)),
        None => return Err(syntax(lineno, "missing chain")),
    };
    let mut proto = None;
    let mut port = None;
    let mut ctstates = None;
    let mut target = None;
    while let Some(tok) = tokens.next() {
        match tok {
            "-p" => {
                proto = Some(match tokens.next() {
                    Some("tcp") => Proto::Tcp,
                    Some("udp") => Proto::Udp,
                    Some(other) => return Err(unsupported(lineno, other)),
                    None => return Err(syntax(lineno, "missing protocol")),
                });
            }
            "-m" => match tokens.next() {
                // `-m tcp` / `-m udp` just re-state the protocol.
                Some("tcp") | Some("udp") => {}
                Some("conntrack") => {}
                Some(other) => return Err(unsupported(lineno, other)),
                None => return Err(syntax(lineno, "missing match name")),
            },
            "--dport" | "--sport" => {
                let value = tokens
                    .next()
                    .and_then(|v| v.parse::<u16>().ok())
                    .ok_or_else(|| syntax(lineno, "bad port"))?;
                if port.is_some() {
                    return Err(syntax(lineno, "multiple port matches"));
                }
                port = Some(if tok == "--dport" {
                    PortMatch::Dport(value)
                } else {
                    PortMatch::Sport(value)
                });
            }
            "--ctstate" => {
                let list = tokens.next().ok_or_else(|| syntax(lineno, "missing ctstate list"))?;
                let mut set = CtStateSet::default();
                for state in list.split(',') {
                    match state {
                        "NEW" => set.new = true,
                        "ESTABLISHED" => set.established = true,
                        "RELATED" => set.related = true,
                        other => return Err(unsupported(lineno, other)),
                    }
                }
                ctstates = Some(set);
            }
            "-j" => match tokens.next() {
                Some("ACCEPT") => target = Some(()),
                Some(other) => return Err(unsupported(lineno, other)),
                None => return Err(syntax(lineno, "missing target")),
            },
            other => return Err(unsupported(lineno, other)),
        }
    }
    let proto = proto.ok_or_else(|| syntax(lineno, "rule without -p"))?;
    let port = port.ok_or_else(|| syntax(lineno, "rule without port match"))?;
    let ctstates = ctstates.ok_or_else(|| syntax(lineno, "rule without --ctstate"))?;
    if ctstates.is_empty() {
        return Err(syntax(lineno, "empty ctstate list"));
    }
    if target.is_none() {
        return Err(syntax(lineno, "rule without -j ACCEPT"));
    }
    Ok(Rule { chain, proto, port, ctstates })
}
