//! Append-only replica log.
//!
//! ```text
//! frame = u32:payload_len u8:type payload u32:crc32(payload)
//! P     = u64:round u32:id                       promise
//! C     = u64:slot u64:round u32:id value        accept
//! D     = u64:slot value                         decide
//! S     = u32:incarnation                        session start
//! value = 'N' | 'A' u32:len envelope
//! ```

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::codec::{CodecError, Envelope, Reader};
use crate::paxos::{Ballot, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    Promise(Ballot),
    Accept {
        slot: u64,
        ballot: Ballot,
        value: Value,
    },
    Decide {
        slot: u64,
        value: Value,
    },
    Session(u32),
}

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt log record at byte {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
    #[error("injected failure on append {0}")]
    Injected(usize),
}

fn put_value(out: &mut Vec<u8>, v: &Value) {
    match v {
        Value::Noop => out.push(b'N'),
        Value::Action(env) => {
            let bytes = env.encode();
            out.push(b'A');
            out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(&bytes);
        }
    }
}

fn read_value(r: &mut Reader<'_>) -> Result<Value, CodecError> {
    match r.u8()? {
        b'N' => Ok(Value::Noop),
        b'A' => {
            let len = r.u32()? as usize;
            Ok(Value::Action(Envelope::decode(r.take(len)?)?))
        }
        t => Err(CodecError::BadTag(t)),
    }
}

fn put_ballot(out: &mut Vec<u8>, b: Ballot) {
    out.extend_from_slice(&b.round.to_be_bytes());
    out.extend_from_slice(&b.id.to_be_bytes());
}

fn read_ballot(r: &mut Reader<'_>) -> Result<Ballot, CodecError> {
    Ok(Ballot {
        round: r.u64()?,
        id: r.u32()?,
    })
}

impl Record {
    pub fn encode(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        let kind = match self {
            Record::Promise(b) => {
                put_ballot(&mut payload, *b);
                b'P'
            }
            Record::Accept {
                slot,
                ballot,
                value,
            } => {
                payload.extend_from_slice(&slot.to_be_bytes());
                put_ballot(&mut payload, *ballot);
                put_value(&mut payload, value);
                b'C'
            }
            Record::Decide { slot, value } => {
                payload.extend_from_slice(&slot.to_be_bytes());
                put_value(&mut payload, value);
                b'D'
            }
            Record::Session(n) => {
                payload.extend_from_slice(&n.to_be_bytes());
                b'S'
            }
        };
        let mut frame = Vec::with_capacity(payload.len() + 9);
        frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        frame.push(kind);
        frame.extend_from_slice(&payload);
        frame.extend_from_slice(&crc32fast::hash(&payload).to_be_bytes());
        frame
    }

    fn decode(kind: u8, payload: &[u8]) -> Result<Record, CodecError> {
        let mut r = Reader::new(payload);
        let rec = match kind {
            b'P' => Record::Promise(read_ballot(&mut r)?),
            b'C' => Record::Accept {
                slot: r.u64()?,
                ballot: read_ballot(&mut r)?,
                value: read_value(&mut r)?,
            },
            b'D' => Record::Decide {
                slot: r.u64()?,
                value: read_value(&mut r)?,
            },
            b'S' => Record::Session(r.u32()?),
            t => return Err(CodecError::BadTag(t)),
        };
        r.finish()?;
        Ok(rec)
    }
}

/// Result of scanning a log image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scan {
    pub records: Vec<Record>,
    /// Length of the intact prefix; bytes past it are a torn tail.
    pub valid_len: usize,
}

/// Splits a log image into records. A short final frame, or a final frame
/// whose checksum fails, is a torn write and ends the scan. Damage anywhere
/// else is an error.
pub fn scan(bytes: &[u8]) -> Result<Scan, StorageError> {
    let mut records = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let rest = &bytes[at..];
        if rest.len() < 5 {
            break;
        }
        let len = u32::from_be_bytes(rest[..4].try_into().unwrap()) as usize;
        let Some(total) = len.checked_add(9).filter(|t| *t <= rest.len()) else {
            break;
        };
        let kind = rest[4];
        let payload = &rest[5..5 + len];
        let crc = u32::from_be_bytes(rest[5 + len..total].try_into().unwrap());
        if crc != crc32fast::hash(payload) {
            if total == rest.len() {
                break;
            }
            return Err(StorageError::Corrupt {
                offset: at,
                reason: "checksum mismatch".into(),
            });
        }
        let rec = Record::decode(kind, payload).map_err(|e| StorageError::Corrupt {
            offset: at,
            reason: e.to_string(),
        })?;
        records.push(rec);
        at += total;
    }
    Ok(Scan {
        records,
        valid_len: at,
    })
}

/// Durable home of one replica's log.
pub trait Storage {
    /// Appends one record; it is stable once this returns `Ok`.
    fn append(&mut self, rec: &Record) -> Result<(), StorageError>;

    /// Reads back every intact record, discarding a torn tail.
    fn recover(&mut self) -> Result<Vec<Record>, StorageError>;
}

impl<S: Storage + ?Sized> Storage for Box<S> {
    fn append(&mut self, rec: &Record) -> Result<(), StorageError> {
        (**self).append(rec)
    }

    fn recover(&mut self) -> Result<Vec<Record>, StorageError> {
        (**self).recover()
    }
}

/// Log image held in memory, byte-for-byte what a file would contain.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemStorage {
    pub bytes: Vec<u8>,
}

impl MemStorage {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Storage for MemStorage {
    fn append(&mut self, rec: &Record) -> Result<(), StorageError> {
        self.bytes.extend_from_slice(&rec.encode());
        Ok(())
    }

    fn recover(&mut self) -> Result<Vec<Record>, StorageError> {
        let s = scan(&self.bytes)?;
        self.bytes.truncate(s.valid_len);
        Ok(s.records)
    }
}

/// `<dir>/replica-<id>.log`, synced after every append.
#[derive(Debug)]
pub struct FileStorage {
    path: PathBuf,
    file: File,
}

impl FileStorage {
    pub fn path_for(dir: &Path, id: u32) -> PathBuf {
        dir.join(format!("replica-{id}.log"))
    }

    pub fn open(dir: &Path, id: u32) -> Result<Self, StorageError> {
        std::fs::create_dir_all(dir)?;
        let path = Self::path_for(dir, id);
        let file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        Ok(FileStorage { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Storage for FileStorage {
    fn append(&mut self, rec: &Record) -> Result<(), StorageError> {
        self.file.write_all(&rec.encode())?;
        self.file.sync_data()?;
        Ok(())
    }

    fn recover(&mut self) -> Result<Vec<Record>, StorageError> {
        let mut bytes = Vec::new();
        self.file.seek(SeekFrom::Start(0))?;
        self.file.read_to_end(&mut bytes)?;
        let s = scan(&bytes)?;
        if s.valid_len < bytes.len() {
            log::warn!(
                "{}: discarding {} byte torn tail",
                self.path.display(),
                bytes.len() - s.valid_len
            );
            self.file.set_len(s.valid_len as u64)?;
            self.file.sync_data()?;
        }
        Ok(s.records)
    }
}

/// Wraps a storage and fails the `n`th append (counting from 0) and every
/// one after it, as if the process died mid-write.
#[derive(Debug)]
pub struct FailingStorage<S> {
    pub inner: S,
    pub fail_at: usize,
    appends: usize,
}

impl<S> FailingStorage<S> {
    pub fn new(inner: S, fail_at: usize) -> Self {
        FailingStorage {
            inner,
            fail_at,
            appends: 0,
        }
    }
}

impl<S: Storage> Storage for FailingStorage<S> {
    fn append(&mut self, rec: &Record) -> Result<(), StorageError> {
        let n = self.appends;
        self.appends += 1;
        if n >= self.fail_at {
            return Err(StorageError::Injected(n));
        }
        self.inner.append(rec)
    }

    fn recover(&mut self) -> Result<Vec<Record>, StorageError> {
        self.inner.recover()
    }
}
