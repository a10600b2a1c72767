//! Byte encoding of actions and of the envelope that travels through
//! consensus.
//!
//! ```text
//! action   = "A1" u32:name_len name u32:field_count field*
//! field    = 'S' u32:len utf8 | 'I' i64 | 'L' i64
//! envelope = u32:replica u64:seq action
//! ```
//! All integers are big-endian.

use std::fmt;

use thiserror::Error;

pub const MAGIC: &[u8; 2] = b"A1";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldValue {
    Str(String),
    Int(i64),
    Long(i64),
}

/// A captured action: prototype name plus field values in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SerializedAction {
    pub proto: String,
    pub fields: Vec<FieldValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("input ends early")]
    Truncated,
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unknown field tag {0:#04x}")]
    BadTag(u8),
    #[error("string is not valid UTF-8")]
    BadUtf8,
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

/// Reads big-endian values off a byte slice.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() < n {
            return Err(CodecError::Truncated);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    pub(crate) fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn i64(&mut self) -> Result<i64, CodecError> {
        Ok(i64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn string(&mut self) -> Result<String, CodecError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| CodecError::BadUtf8)
    }

    pub(crate) fn finish(&self) -> Result<(), CodecError> {
        match self.buf.len() {
            0 => Ok(()),
            n => Err(CodecError::Trailing(n)),
        }
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_be_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl SerializedAction {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        put_str(out, &self.proto);
        out.extend_from_slice(&(self.fields.len() as u32).to_be_bytes());
        for f in &self.fields {
            match f {
                FieldValue::Str(s) => {
                    out.push(b'S');
                    put_str(out, s);
                }
                FieldValue::Int(v) => {
                    out.push(b'I');
                    out.extend_from_slice(&v.to_be_bytes());
                }
                FieldValue::Long(v) => {
                    out.push(b'L');
                    out.extend_from_slice(&v.to_be_bytes());
                }
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let a = Self::read(&mut r)?;
        r.finish()?;
        Ok(a)
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        if r.take(2)? != MAGIC {
            return Err(CodecError::BadMagic);
        }
        let proto = r.string()?;
        let count = r.u32()?;
        let mut fields = Vec::new();
        for _ in 0..count {
            let f = match r.u8()? {
                b'S' => FieldValue::Str(r.string()?),
                b'I' => FieldValue::Int(r.i64()?),
                b'L' => FieldValue::Long(r.i64()?),
                t => return Err(CodecError::BadTag(t)),
            };
            fields.push(f);
        }
        Ok(SerializedAction { proto, fields })
    }
}

impl fmt::Display for SerializedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.proto)?;
        for (i, v) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match v {
                FieldValue::Str(s) => write!(f, "{s:?}")?,
                FieldValue::Int(n) | FieldValue::Long(n) => write!(f, "{n}")?,
            }
        }
        f.write_str(")")
    }
}

/// Deduplication key: submitting replica and its sequence number.
pub type ActionKey = (u32, u64);

/// An action as submitted to consensus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Envelope {
    pub replica: u32,
    pub seq: u64,
    pub action: SerializedAction,
}

impl Envelope {
    pub fn key(&self) -> ActionKey {
        (self.replica, self.seq)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.replica.to_be_bytes());
        out.extend_from_slice(&self.seq.to_be_bytes());
        self.action.encode_into(&mut out);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let replica = r.u32()?;
        let seq = r.u64()?;
        let action = SerializedAction::read(&mut r)?;
        r.finish()?;
        Ok(Envelope {
            replica,
            seq,
            action,
        })
    }
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{:x} {}", self.replica, self.seq, self.action)
    }
}
