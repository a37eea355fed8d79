use crate::trace::TlsVersion;

use super::TlsError;

pub const HANDSHAKE_CLIENT_HELLO: u8 = 1;
pub const EXT_SERVER_NAME: u16 = 0x0000;
pub const EXT_SUPPORTED_VERSIONS: u16 = 0x002b;
pub const SNI_HOST_NAME: u8 = 0;

pub const TLS1_0: u16 = 0x0301;
pub const TLS1_1: u16 = 0x0302;
pub const TLS1_2: u16 = 0x0303;
pub const TLS1_3: u16 = 0x0304;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extension {
    pub ext_type: u16,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClientHelloSummary {
    pub legacy_version: u16,
    pub cipher_suite_count: usize,
    /// `None` when the hello ends after the compression methods.
    pub extensions: Option<Vec<Extension>>,
    /// Lowercased host name from the first `host_name` entry, trailing dot
    /// removed.
    pub sni: Option<String>,
    /// `host_name` entries after the first one.
    pub extra_sni_entries: usize,
    pub supported_versions: Option<Vec<u16>>,
}

impl ClientHelloSummary {
    /// TLS 1.3 when supported_versions offers 0x0304, TLS 1.2 when it
    /// offers 0x0303 (or, without the extension, when client_version is
    /// 0x0303). Everything else is outside the 1.2/1.3 filter.
    pub fn negotiable_version(&self) -> Option<TlsVersion> {
        match &self.supported_versions {
            Some(versions) if versions.contains(&TLS1_3) => Some(TlsVersion::Tls13),
            Some(versions) if versions.contains(&TLS1_2) => Some(TlsVersion::Tls12),
            Some(_) => None,
            None if self.legacy_version == TLS1_2 => Some(TlsVersion::Tls12),
            None => None,
        }
    }

    pub fn extension(&self, ext_type: u16) -> Option<&Extension> {
        self.extensions.as_ref()?.iter().find(|e| e.ext_type == ext_type)
    }
}

/// Bounds-checked big-endian cursor that reports the field being read.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Offset of `bytes[0]` in the enclosing message, for error reporting.
    base: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8], base: usize) -> Self {
        Cursor { bytes, pos: 0, base }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn err(&self, field: &'static str) -> TlsError {
        TlsError::Malformed { offset: self.base + self.pos, field }
    }

    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], TlsError> {
        if self.remaining() < n {
            return Err(self.err(field));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, field: &'static str) -> Result<u8, TlsError> {
        Ok(self.take(1, field)?[0])
    }

    fn u16(&mut self, field: &'static str) -> Result<u16, TlsError> {
        let b = self.take(2, field)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u24(&mut self, field: &'static str) -> Result<usize, TlsError> {
        let b = self.take(3, field)?;
        Ok((usize::from(b[0]) << 16) | (usize::from(b[1]) << 8) | usize::from(b[2]))
    }

    /// Reads a length prefix of `width` bytes and returns a sub-cursor over
    /// the vector it announces.
    fn vector(&mut self, width: usize, field: &'static str) -> Result<Cursor<'a>, TlsError> {
        let at = self.pos;
        let len = match width {
            1 => usize::from(self.u8(field)?),
            2 => usize::from(self.u16(field)?),
            _ => self.u24(field)?,
        };
        if self.remaining() < len {
            self.pos = at;
            return Err(self.err(field));
        }
        let base = self.base + self.pos;
        let body = self.take(len, field)?;
        Ok(Cursor::new(body, base))
    }
}

/// Walks a ClientHello handshake message (4-byte handshake header
/// included): version, random, session id, cipher suites, compression
/// methods, then the optional extensions block.
pub fn parse_client_hello(message: &[u8]) -> Result<ClientHelloSummary, TlsError> {
    let mut outer = Cursor::new(message, 0);
    let msg_type = outer.u8("handshake_type")?;
    if msg_type != HANDSHAKE_CLIENT_HELLO {
        return Err(TlsError::NotClientHello(msg_type));
    }
    let mut c = outer.vector(3, "handshake_length")?;
    if outer.remaining() != 0 {
        return Err(outer.err("handshake_trailing_bytes"));
    }

    let legacy_version = c.u16("legacy_version")?;
    c.take(32, "random")?;
    let session_id = c.vector(1, "session_id_length")?;
    if session_id.bytes.len() > 32 {
        return Err(TlsError::Malformed { offset: session_id.base - 1, field: "session_id_length" });
    }
    let suites = c.vector(2, "cipher_suites_length")?;
    if suites.bytes.len() % 2 != 0 || suites.bytes.is_empty() {
        return Err(TlsError::Malformed { offset: suites.base - 2, field: "cipher_suites_length" });
    }
    let compression = c.vector(1, "compression_methods_length")?;
    if compression.bytes.is_empty() {
        return Err(TlsError::Malformed { offset: compression.base - 1, field: "compression_methods_length" });
    }

    let mut summary = ClientHelloSummary {
        legacy_version,
        cipher_suite_count: suites.bytes.len() / 2,
        ..Default::default()
    };
    if c.remaining() == 0 {
        return Ok(summary);
    }

    let mut block = c.vector(2, "extensions_length")?;
    if c.remaining() != 0 {
        return Err(c.err("trailing_bytes"));
    }
    let mut extensions = Vec::new();
    while block.remaining() > 0 {
        let ext_type = block.u16("extension_type")?;
        let body = block.vector(2, "extension_length")?;
        match ext_type {
            EXT_SERVER_NAME if summary.sni.is_none() => {
                let (name, extra) = parse_server_name(body.bytes, body.base)?;
                summary.sni = name;
                summary.extra_sni_entries = extra;
            }
            EXT_SUPPORTED_VERSIONS if summary.supported_versions.is_none() => {
                summary.supported_versions = Some(parse_supported_versions(body.bytes, body.base)?);
            }
            _ => {}
        }
        extensions.push(Extension { ext_type, body: body.bytes.to_vec() });
    }
    summary.extensions = Some(extensions);
    Ok(summary)
}

/// Lowercases and strips one trailing dot. Rejects names that are empty,
/// non-ASCII or contain NUL.
pub fn normalize_host_name(raw: &[u8]) -> Option<String> {
    let raw = raw.strip_suffix(b".").unwrap_or(raw);
    if raw.is_empty() || !raw.is_ascii() || raw.contains(&0) {
        return None;
    }
    Some(String::from_utf8_lossy(raw).to_ascii_lowercase())
}

fn parse_server_name(body: &[u8], base: usize) -> Result<(Option<String>, usize), TlsError> {
    let mut c = Cursor::new(body, base);
    let mut list = c.vector(2, "server_name_list_length")?;
    if c.remaining() != 0 {
        return Err(c.err("server_name_trailing_bytes"));
    }
    let mut first = None;
    let mut extra = 0;
    while list.remaining() > 0 {
        let name_type = list.u8("server_name_type")?;
        let at = list.base + list.pos;
        let name = list.vector(2, "host_name_length")?;
        if name_type != SNI_HOST_NAME {
            continue;
        }
        if first.is_some() {
            extra += 1;
            continue;
        }
        match normalize_host_name(name.bytes) {
            Some(n) => first = Some(n),
            None => return Err(TlsError::Malformed { offset: at, field: "host_name" }),
        }
    }
    Ok((first, extra))
}

fn parse_supported_versions(body: &[u8], base: usize) -> Result<Vec<u16>, TlsError> {
    let mut c = Cursor::new(body, base);
    let mut list = c.vector(1, "supported_versions_length")?;
    if c.remaining() != 0 || list.remaining() % 2 != 0 {
        return Err(TlsError::Malformed { offset: base, field: "supported_versions_length" });
    }
    let mut versions = Vec::with_capacity(list.remaining() / 2);
    while list.remaining() > 0 {
        versions.push(list.u16("supported_version")?);
    }
    Ok(versions)
}
