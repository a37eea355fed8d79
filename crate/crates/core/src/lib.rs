//! Website-set prediction from TLS ClientHello server names.
//!
//! The crate covers the whole pipeline: classic pcap decoding ([`pcap`]),
//! ClientHello/SNI extraction ([`tls`]), dataset construction ([`corpus`]),
//! a small 64-bit neural network engine ([`nn`]), training and evaluation of
//! the LSTM and fully-connected classifiers ([`pipeline`]), synthetic trace
//! generation ([`synth`]) and the command line front end ([`cli`]).

pub mod cli;
pub mod corpus;
pub mod nn;
pub mod pcap;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tls;
pub mod trace;

pub use trace::{TlsVersion, Trace, TraceEvent};

/// Toolkit version recorded in every run manifest and checkpoint.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
