//! ClientHello server-name extraction.
//!
//! The path from bytes to a server name follows the message nesting: TLS
//! record ([`parse_records`]) → handshake message → ClientHello
//! ([`parse_client_hello`]) → extensions → `server_name`. [`extract_trace`]
//! runs the whole chain over a capture.

mod extract;
mod hello;
mod records;

use thiserror::Error;

pub use extract::{
    extract_from_bytes, extract_from_reader, extract_trace, events_to_trace, ExtractOptions, ExtractStats,
    Extraction, SniEvent,
};
pub use hello::{
    normalize_host_name, parse_client_hello, ClientHelloSummary, Extension, EXT_SERVER_NAME,
    EXT_SUPPORTED_VERSIONS, HANDSHAKE_CLIENT_HELLO, SNI_HOST_NAME, TLS1_0, TLS1_1, TLS1_2, TLS1_3,
};
pub use records::{
    parse_records, HandshakeMessage, RecordScan, ScanIssue, TlsRecord, CONTENT_APPLICATION_DATA,
    CONTENT_CHANGE_CIPHER_SPEC, CONTENT_HANDSHAKE, MAX_RECORD_BODY, RECORD_HEADER_LEN,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TlsError {
    #[error("malformed ClientHello at offset {offset}: bad {field}")]
    Malformed { offset: usize, field: &'static str },
    #[error("handshake type {0} is not a ClientHello")]
    NotClientHello(u8),
}
