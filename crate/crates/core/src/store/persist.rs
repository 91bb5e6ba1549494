//! Append-only operation log.
//!
//! Each frame is `u32 LE payload length | u64 LE timestamp-ms | payload`.
//! Plain payloads are a canonical record line (timestamp = the record's
//! creation instant) or a tombstone `DEL;<key>;<timestamp-ms>;`. With the
//! encrypted transform the payload is `nonce(12) | ChaCha20-Poly1305
//! ciphertext`, with the timestamp bound as associated data.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::record::{parse_record, serialize_record, PersonalRecord};

/// Names the data directory when a config does not.
pub const DATA_DIR_ENV: &str = "GDPRKV_DATA_DIR";
/// Secret the at-rest key is derived from.
pub const AT_REST_KEY_ENV: &str = "GDPRKV_AT_REST_KEY";

pub const LOG_FILE: &str = "records.log";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogEntry {
    Put(PersonalRecord),
    Del { key: String, ts: u64 },
}

/// Byte transform applied to every persisted frame payload.
pub enum Transform {
    Identity,
    Sealed(Box<ChaCha20Poly1305>),
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Transform::Identity => f.write_str("Identity"),
            Transform::Sealed(_) => f.write_str("Sealed"),
        }
    }
}

impl Transform {
    /// Derives a 256-bit key from an arbitrary secret string.
    pub fn sealed(secret: &str) -> Transform {
        let digest = Sha256::digest(secret.as_bytes());
        Transform::Sealed(Box::new(ChaCha20Poly1305::new(Key::from_slice(&digest))))
    }

    fn encode(&self, ts: u64, plain: &[u8]) -> Result<Vec<u8>> {
        match self {
            Transform::Identity => Ok(plain.to_vec()),
            Transform::Sealed(cipher) => {
                let mut nonce = [0u8; 12];
                rand::rng().fill_bytes(&mut nonce);
                let aad = ts.to_le_bytes();
                let sealed = cipher
                    .encrypt(Nonce::from_slice(&nonce), Payload { msg: plain, aad: &aad })
                    .map_err(|_| Error::Storage("encryption failed".into()))?;
                let mut out = Vec::with_capacity(12 + sealed.len());
                out.extend_from_slice(&nonce);
                out.extend_from_slice(&sealed);
                Ok(out)
            }
        }
    }

    fn decode(&self, ts: u64, payload: &[u8]) -> Result<Vec<u8>> {
        match self {
            Transform::Identity => Ok(payload.to_vec()),
            Transform::Sealed(cipher) => {
                if payload.len() < 12 {
                    return Err(Error::Storage("truncated sealed frame".into()));
                }
                let (nonce, sealed) = payload.split_at(12);
                let aad = ts.to_le_bytes();
                cipher
                    .decrypt(Nonce::from_slice(nonce), Payload { msg: sealed, aad: &aad })
                    .map_err(|_| Error::Storage("log frame failed authentication".into()))
            }
        }
    }
}

#[derive(Debug)]
pub struct AppendLog {
    path: PathBuf,
    out: BufWriter<File>,
    transform: Transform,
    frames: usize,
    bytes: u64,
}

impl AppendLog {
    /// Opens (creating if needed) the log in `dir` and returns every entry
    /// already in it, in write order.
    pub fn open(dir: &Path, transform: Transform) -> Result<(AppendLog, Vec<LogEntry>)> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let mut entries = Vec::new();
        let mut bytes = 0;
        if path.exists() {
            let mut reader = BufReader::new(File::open(&path)?);
            while let Some((ts, payload)) = read_frame(&mut reader)? {
                bytes += 12 + payload.len() as u64;
                let plain = transform.decode(ts, &payload)?;
                entries.push(decode_entry(ts, &plain)?);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        if file.metadata()?.len() > bytes {
            file.set_len(bytes)?;
        }
        let frames = entries.len();
        Ok((AppendLog { path, out: BufWriter::new(file), transform, frames, bytes }, entries))
    }

    pub fn append_put(&mut self, record: &PersonalRecord) -> Result<()> {
        self.append(record.created_at, serialize_record(record).as_bytes())
    }

    pub fn append_del(&mut self, key: &str, ts: u64) -> Result<()> {
        self.append(ts, format!("DEL;{key};{ts};").as_bytes())
    }

    fn append(&mut self, ts: u64, plain: &[u8]) -> Result<()> {
        let payload = self.transform.encode(ts, plain)?;
        write_frame(&mut self.out, ts, &payload)?;
        self.out.flush()?;
        self.frames += 1;
        self.bytes += 12 + payload.len() as u64;
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    /// Rewrites the log so it holds exactly `live`, then swaps it in.
    pub fn compact<'a>(&mut self, live: impl Iterator<Item = &'a PersonalRecord>) -> Result<()> {
        let tmp = self.path.with_extension("log.compact");
        let mut frames = 0;
        let mut bytes = 0;
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            for r in live {
                let payload = self.transform.encode(r.created_at, serialize_record(r).as_bytes())?;
                write_frame(&mut w, r.created_at, &payload)?;
                frames += 1;
                bytes += 12 + payload.len() as u64;
            }
            w.flush()?;
            w.get_ref().sync_all()?;
        }
        fs::rename(&tmp, &self.path)?;
        let file = OpenOptions::new().append(true).open(&self.path)?;
        self.out = BufWriter::new(file);
        self.frames = frames;
        self.bytes = bytes;
        Ok(())
    }
}

fn write_frame(w: &mut impl Write, ts: u64, payload: &[u8]) -> Result<()> {
    let len = u32::try_from(payload.len()).map_err(|_| Error::Storage("frame too large".into()))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&ts.to_le_bytes())?;
    w.write_all(payload)?;
    Ok(())
}

fn read_frame(r: &mut impl Read) -> Result<Option<(u64, Vec<u8>)>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let mut ts = [0u8; 8];
    let mut payload = vec![0u8; u32::from_le_bytes(len) as usize];
    // A torn tail frame from an interrupted write is dropped.
    if r.read_exact(&mut ts).is_err() || r.read_exact(&mut payload).is_err() {
        return Ok(None);
    }
    Ok(Some((u64::from_le_bytes(ts), payload)))
}

fn decode_entry(ts: u64, plain: &[u8]) -> Result<LogEntry> {
    let text = std::str::from_utf8(plain).map_err(|_| Error::Storage("non-text log frame".into()))?;
    if let Some(rest) = text.strip_prefix("DEL;") {
        let key = rest.split(';').next().unwrap_or_default();
        return Ok(LogEntry::Del { key: key.to_string(), ts });
    }
    let mut record = parse_record(text).map_err(|e| Error::Storage(format!("corrupt log record: {e}")))?;
    record.created_at = ts;
    Ok(LogEntry::Put(record))
}
