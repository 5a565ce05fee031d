//! Coordinator ↔ worker wire protocol, version 1.
//!
//! Every frame is `u32 length | u8 msg_type | payload`, big-endian, where
//! `length` counts the type byte plus the payload. f64 values travel as
//! their IEEE-754 bit patterns, so samples round-trip exactly.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::raster::{DnHistogram, RasterGrid};

use super::op::{Operation, Payload};

pub const PROTOCOL_VERSION: u16 = 1;
pub const MAX_FRAME_BYTES: usize = 256 * 1024 * 1024;

pub const MSG_HELLO: u8 = 1;
pub const MSG_HELLO_ACK: u8 = 2;
pub const MSG_JOB: u8 = 3;
pub const MSG_RESULT: u8 = 4;
pub const MSG_ERROR: u8 = 5;
pub const MSG_PING: u8 = 6;
pub const MSG_PONG: u8 = 7;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("frame of {0} bytes exceeds the 256 MiB limit")]
    FrameTooLarge(usize),
    #[error("empty frame")]
    EmptyFrame,
    #[error("truncated message: needed {needed} more byte(s)")]
    Truncated { needed: usize },
    #[error("{0} trailing byte(s) after message")]
    Trailing(usize),
    #[error("unknown message type {0}")]
    UnknownMessage(u8),
    #[error("unknown op code {0}")]
    UnknownOp(u8),
    #[error("invalid message: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One tile's worth of work as it travels to a worker.
#[derive(Debug, Clone, PartialEq)]
pub struct JobMessage {
    pub job_id: u64,
    pub op: Operation,
    pub bands: Vec<RasterGrid>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello { version: u16 },
    HelloAck,
    Job(JobMessage),
    Result { job_id: u64, op_code: u8, payload: Payload },
    Error { job_id: u64, reason: String },
    Ping,
    Pong,
}

#[derive(Default)]
pub(crate) struct Encoder(Vec<u8>);

impl Encoder {
    pub fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    pub fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    pub fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    pub fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    pub fn bytes_with_len(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.bytes(b);
    }
    fn len(&self) -> usize {
        self.0.len()
    }
}

pub(crate) struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        let left = self.buf.len() - self.pos;
        if n > left {
            return Err(ProtocolError::Truncated { needed: n - left });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take(1)?[0])
    }
    pub fn u16(&mut self) -> Result<u16, ProtocolError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64, ProtocolError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64, ProtocolError> {
        Ok(f64::from_bits(self.u64()?))
    }
    pub fn bytes_with_len(&mut self) -> Result<&'a [u8], ProtocolError> {
        let n = self.u32()? as usize;
        self.take(n)
    }
    pub fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
    fn finish(&self) -> Result<(), ProtocolError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(ProtocolError::Trailing(n)),
        }
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ProtocolError> {
        let raw = self.take(n.checked_mul(8).ok_or(ProtocolError::FrameTooLarge(usize::MAX))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_be_bytes(c.try_into().unwrap())))
            .collect())
    }
}

fn dims(rows: usize, cols: usize) -> Result<(u32, u32), ProtocolError> {
    match (u32::try_from(rows), u32::try_from(cols)) {
        (Ok(r), Ok(c)) => Ok((r, c)),
        _ => Err(ProtocolError::Invalid(format!("tile {rows}x{cols} too large"))),
    }
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        match self {
            Message::Hello { .. } => MSG_HELLO,
            Message::HelloAck => MSG_HELLO_ACK,
            Message::Job(_) => MSG_JOB,
            Message::Result { .. } => MSG_RESULT,
            Message::Error { .. } => MSG_ERROR,
            Message::Ping => MSG_PING,
            Message::Pong => MSG_PONG,
        }
    }

    /// Full frame including the length prefix.
    pub fn encode(&self) -> Result<Vec<u8>, ProtocolError> {
        let mut e = Encoder::default();
        e.u32(0); // patched below
        e.u8(self.msg_type());
        match self {
            Message::Hello { version } => e.u16(*version),
            Message::HelloAck | Message::Ping | Message::Pong => {}
            Message::Job(job) => {
                e.u64(job.job_id);
                e.u8(job.op.code());
                let mut params = Encoder::default();
                job.op.encode_params(&mut params);
                params.u8(u8::try_from(job.bands.len()).map_err(|_| ProtocolError::Invalid("too many bands".into()))?);
                for b in &job.bands {
                    params.f64(b.nodata());
                }
                e.bytes_with_len(&params.0);
                let (rows, cols) = match job.bands.first() {
                    Some(b) => (b.height(), b.width()),
                    None => (0, 0),
                };
                let (r, c) = dims(rows, cols)?;
                e.u32(r);
                e.u32(c);
                for b in &job.bands {
                    if b.height() != rows || b.width() != cols {
                        return Err(ProtocolError::Invalid("job bands differ in shape".into()));
                    }
                    for &v in b.samples() {
                        e.f64(v);
                    }
                }
            }
            Message::Result { job_id, op_code, payload } => {
                e.u64(*job_id);
                e.u8(*op_code);
                match payload {
                    Payload::Raster { grid, flagged } => {
                        let (r, c) = dims(grid.height(), grid.width())?;
                        e.u8(0);
                        e.u32(r);
                        e.u32(c);
                        e.f64(grid.nodata());
                        e.u64(*flagged);
                        for &v in grid.samples() {
                            e.f64(v);
                        }
                    }
                    Payload::Labels { rows, cols, labels } => {
                        let (r, c) = dims(*rows, *cols)?;
                        e.u8(1);
                        e.u32(r);
                        e.u32(c);
                        for &l in labels {
                            e.u16(l);
                        }
                    }
                    Payload::Histogram(h) => {
                        e.u8(2);
                        e.u32(h.counts().len() as u32);
                        for &n in h.counts() {
                            e.u64(n);
                        }
                    }
                }
            }
            Message::Error { job_id, reason } => {
                e.u64(*job_id);
                e.bytes(reason.as_bytes());
            }
        }
        let body = e.len() - 4;
        if body > MAX_FRAME_BYTES {
            return Err(ProtocolError::FrameTooLarge(body));
        }
        e.0[..4].copy_from_slice(&(body as u32).to_be_bytes());
        Ok(e.0)
    }

    /// Decodes a frame body (type byte + payload, without the length).
    pub fn decode(body: &[u8]) -> Result<Self, ProtocolError> {
        let (&ty, payload) = body.split_first().ok_or(ProtocolError::EmptyFrame)?;
        let mut d = Decoder::new(payload);
        let msg = match ty {
            MSG_HELLO => Message::Hello { version: d.u16()? },
            MSG_HELLO_ACK => Message::HelloAck,
            MSG_PING => Message::Ping,
            MSG_PONG => Message::Pong,
            MSG_JOB => {
                let job_id = d.u64()?;
                let code = d.u8()?;
                let mut p = Decoder::new(d.bytes_with_len()?);
                let op = Operation::decode_params(code, &mut p)?;
                let band_count = p.u8()? as usize;
                let nodata = (0..band_count).map(|_| p.f64()).collect::<Result<Vec<_>, _>>()?;
                p.finish()?;
                let rows = d.u32()? as usize;
                let cols = d.u32()? as usize;
                let bands = nodata
                    .into_iter()
                    .map(|nd| {
                        let samples = d.f64s(rows * cols)?;
                        RasterGrid::new(cols, rows, samples, nd).map_err(|e| ProtocolError::Invalid(e.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Message::Job(JobMessage { job_id, op, bands })
            }
            MSG_RESULT => {
                let job_id = d.u64()?;
                let op_code = d.u8()?;
                let payload = match d.u8()? {
                    0 => {
                        let rows = d.u32()? as usize;
                        let cols = d.u32()? as usize;
                        let nodata = d.f64()?;
                        let flagged = d.u64()?;
                        let samples = d.f64s(rows * cols)?;
                        Payload::Raster {
                            grid: RasterGrid::new(cols, rows, samples, nodata)
                                .map_err(|e| ProtocolError::Invalid(e.to_string()))?,
                            flagged,
                        }
                    }
                    1 => {
                        let rows = d.u32()? as usize;
                        let cols = d.u32()? as usize;
                        let labels = (0..rows * cols).map(|_| d.u16()).collect::<Result<Vec<_>, _>>()?;
                        Payload::Labels { rows, cols, labels }
                    }
                    2 => {
                        let n = d.u32()? as usize;
                        if n == 0 {
                            return Err(ProtocolError::Invalid("histogram without bins".into()));
                        }
                        let counts = (0..n).map(|_| d.u64()).collect::<Result<Vec<_>, _>>()?;
                        Payload::Histogram(DnHistogram::from_counts(counts))
                    }
                    k => return Err(ProtocolError::Invalid(format!("unknown payload kind {k}"))),
                };
                Message::Result { job_id, op_code, payload }
            }
            MSG_ERROR => {
                let job_id = d.u64()?;
                let reason = String::from_utf8_lossy(d.rest()).into_owned();
                Message::Error { job_id, reason }
            }
            t => return Err(ProtocolError::UnknownMessage(t)),
        };
        d.finish()?;
        Ok(msg)
    }
}

pub fn write_message(w: &mut impl Write, msg: &Message) -> Result<(), ProtocolError> {
    w.write_all(&msg.encode()?)?;
    w.flush()?;
    Ok(())
}

pub fn read_message(r: &mut impl Read) -> Result<Message, ProtocolError> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(ProtocolError::FrameTooLarge(len));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Message::decode(&body)
}
