//! Wire protocol: little-endian frames `[length: u32][type: u8][payload]`.
//! The same bytes travel over the in-process simulated link and the socket
//! transport. Layouts are documented in docs/formats.md.

use std::collections::VecDeque;
use std::io::{Read, Write};

use crate::bytes::{Reader, WriteLe};
use crate::error::{Error, Result};
use crate::stream::channel::{ChannelModel, DeliveryRecord};

pub const PROTOCOL_VERSION: u32 = 1;

const TYPE_HELLO: u8 = 1;
const TYPE_CODEBOOK: u8 = 2;
const TYPE_POSE: u8 = 3;
const TYPE_DELTA_CUT: u8 = 4;
const TYPE_ACK: u8 = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage {
    Hello {
        protocol: u32,
        scene_hash: u64,
    },
    /// NCBK codebook bytes followed by the 64-byte quantization-parameter
    /// block.
    Codebook {
        bytes: Vec<u8>,
    },
    Pose {
        frame: u32,
        /// qw, qx, qy, qz, px, py, pz.
        pose: [f32; 7],
    },
    DeltaCut {
        round: u32,
        /// Every node id in this round's full cut, ascending; lets the
        /// client run the same reuse-window bookkeeping as the cloud.
        full_cut: Vec<u32>,
        /// Codec payload holding only the delta records.
        payload: Vec<u8>,
    },
    Ack {
        round: u32,
    },
}

/// Sorted ids -> first id raw, then successive deltas, all LEB128.
fn encode_id_block(ids: &[u32], out: &mut Vec<u8>) {
    let mut prev = 0u32;
    for (i, &id) in ids.iter().enumerate() {
        if i == 0 {
            out.put_varint(id);
        } else {
            out.put_varint(id - prev);
        }
        prev = id;
    }
}

fn decode_id_block(bytes: &[u8], count: usize) -> Result<Vec<u32>> {
    let mut r = Reader::new(bytes);
    let mut out = Vec::with_capacity(count);
    let mut prev = 0u32;
    for i in 0..count {
        let v = r.varint()?;
        let id = if i == 0 { v } else { prev + v };
        if i > 0 && v == 0 {
            return Err(Error::protocol(
                r.offset(),
                "id block not strictly ascending",
            ));
        }
        out.push(id);
        prev = id;
    }
    Ok(out)
}

impl WireMessage {
    pub fn type_byte(&self) -> u8 {
        match self {
            WireMessage::Hello { .. } => TYPE_HELLO,
            WireMessage::Codebook { .. } => TYPE_CODEBOOK,
            WireMessage::Pose { .. } => TYPE_POSE,
            WireMessage::DeltaCut { .. } => TYPE_DELTA_CUT,
            WireMessage::Ack { .. } => TYPE_ACK,
        }
    }

    pub fn encode_payload(&self) -> Vec<u8> {
        match self {
            WireMessage::Hello {
                protocol,
                scene_hash,
            } => {
                let mut out = Vec::with_capacity(12);
                out.put_u32(*protocol);
                out.put_u64(*scene_hash);
                out
            }
            WireMessage::Codebook { bytes } => bytes.clone(),
            WireMessage::Pose { frame, pose } => {
                let mut out = Vec::with_capacity(32);
                out.put_u32(*frame);
                for v in pose {
                    out.put_f32(*v);
                }
                out
            }
            WireMessage::DeltaCut {
                round,
                full_cut,
                payload,
            } => {
                let mut block = Vec::new();
                encode_id_block(full_cut, &mut block);
                let mut out = Vec::with_capacity(12 + block.len() + payload.len());
                out.put_u32(*round);
                out.put_u32(full_cut.len() as u32);
                out.put_u32(block.len() as u32);
                out.extend_from_slice(&block);
                out.extend_from_slice(payload);
                out
            }
            WireMessage::Ack { round } => {
                let mut out = Vec::with_capacity(4);
                out.put_u32(*round);
                out
            }
        }
    }

    /// Full frame: length + type + payload.
    pub fn to_frame(&self) -> Vec<u8> {
        let payload = self.encode_payload();
        let mut out = Vec::with_capacity(5 + payload.len());
        out.put_u32(payload.len() as u32);
        out.put_u8(self.type_byte());
        out.extend_from_slice(&payload);
        out
    }

    pub fn frame_len(&self) -> usize {
        5 + self.encode_payload().len()
    }

    pub fn decode(type_byte: u8, payload: &[u8]) -> Result<WireMessage> {
        let mut r = Reader::new(payload);
        match type_byte {
            TYPE_HELLO => Ok(WireMessage::Hello {
                protocol: r.u32()?,
                scene_hash: r.u64()?,
            }),
            TYPE_CODEBOOK => Ok(WireMessage::Codebook {
                bytes: payload.to_vec(),
            }),
            TYPE_POSE => {
                let frame = r.u32()?;
                let mut pose = [0f32; 7];
                for v in &mut pose {
                    *v = r.f32()?;
                }
                Ok(WireMessage::Pose { frame, pose })
            }
            TYPE_DELTA_CUT => {
                let round = r.u32()?;
                let count = r.u32()? as usize;
                let block_len = r.u32()? as usize;
                let block = r.take(block_len)?;
                let full_cut = decode_id_block(block, count)?;
                let payload = r.take(r.remaining())?.to_vec();
                Ok(WireMessage::DeltaCut {
                    round,
                    full_cut,
                    payload,
                })
            }
            TYPE_ACK => Ok(WireMessage::Ack { round: r.u32()? }),
            other => Err(Error::protocol(0, format!("unknown message type {other}"))),
        }
    }
}

/// One-way message transport.
pub trait Transport {
    fn send(&mut self, msg: &WireMessage) -> Result<()>;
    /// Blocks for the next message; `None` on orderly close.
    fn recv(&mut self) -> Result<Option<WireMessage>>;
}

/// Framed transport over any byte stream (TCP, an in-memory pipe, ...).
pub struct StreamTransport<S> {
    pub stream: S,
}

impl<S: Read + Write> StreamTransport<S> {
    pub fn new(stream: S) -> Self {
        StreamTransport { stream }
    }
}

impl<S: Read + Write> Transport for StreamTransport<S> {
    fn send(&mut self, msg: &WireMessage) -> Result<()> {
        self.stream.write_all(&msg.to_frame())?;
        self.stream.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Option<WireMessage>> {
        let mut header = [0u8; 5];
        let mut read = 0;
        while read < header.len() {
            match self.stream.read(&mut header[read..]) {
                Ok(0) if read == 0 => return Ok(None),
                Ok(0) => return Err(Error::protocol(read, "eof inside frame header")),
                Ok(n) => read += n,
                Err(e) => return Err(e.into()),
            }
        }
        let len = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
        let ty = header[4];
        let mut payload = vec![0u8; len];
        self.stream.read_exact(&mut payload)?;
        Ok(Some(WireMessage::decode(ty, &payload)?))
    }
}

/// Deterministic in-process link with channel accounting and a virtual
/// clock; used by the co-simulation and tests.
pub struct SimLink {
    pub channel: ChannelModel,
    pub now: f64,
    queue: VecDeque<(WireMessage, DeliveryRecord)>,
}

impl SimLink {
    pub fn new(channel: ChannelModel) -> Self {
        SimLink {
            channel,
            now: 0.0,
            queue: VecDeque::new(),
        }
    }

    pub fn send(&mut self, msg: &WireMessage) -> DeliveryRecord {
        let bytes = msg.frame_len();
        let rec = self.channel.send(bytes, self.now);
        self.queue.push_back((msg.clone(), rec));
        rec
    }

    /// Pops the next message, advancing the clock to its arrival.
    pub fn recv(&mut self) -> Option<(WireMessage, DeliveryRecord)> {
        let (msg, rec) = self.queue.pop_front()?;
        self.now = self.now.max(rec.arrival);
        Some((msg, rec))
    }
}
