//! Userspace stateful-firewall laboratory.
//!
//! This crate models the packet-filtering path of a conntrack-style firewall
//! entirely in memory, against a logical clock: a connection state table with
//! a NEW/UPDATE/DESTROY event stream, per-protocol trackers (classic TCP flag
//! tracking, naive UDP pseudo-connections, and a QUIC-aware tracker that
//! validates the connection IDs exposed in QUIC headers), an iptables-subset
//! rule engine, and a deterministic scenario simulator that replays
//! hole-punching and reset-forgery attacks through the whole stack.
//!
//! Everything here is `no_std + alloc`: no sockets, no wall clock, no files.
//! The companion CLI crate carries IO, pcap files, and the command-line
//! frontend.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod capture;
pub mod conntable;
pub mod firewall;
pub mod scenario;
pub mod tracker;
pub mod wire;

pub use conntable::{
    ConnEntry, ConnTable, CtState, Direction, Event, EventKind, FiveTuple, Proto, TtlPolicy,
};
pub use tracker::{Refusal, RefusalReason};
pub use wire::{ConnectionId, PacketKind, QuicHeader};
