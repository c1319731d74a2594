//! Length-prefixed byte layout shared by every transport.
//!
//! ```text
//! u32 frame_len
//! u8 version | u8 kind | u16 id_len | id bytes | u64 batch_id | u64 nonce
//! u32 body_len | body
//! [u8; 64] signature
//! ```
//!
//! Integers are big-endian. Bodies are compact JSON of the message structs below.

use ed25519_dalek::SigningKey;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::envelope::{MessageKind, SignedEnvelope, WIRE_VERSION};
use crate::error::{Error, Result};
use crate::simworld::{EntityId, Valence};

pub const MAX_FRAME: usize = 64 << 20;

/// Server answer to a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub entity_id: EntityId,
    pub batch_id: u64,
    pub inserted: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRequest {
    pub entity_id: EntityId,
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionResponse {
    pub entity_id: EntityId,
    pub class: Valence,
    pub probabilities: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCode {
    Reject,
    Scope,
    NotFound,
    Malformed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub code: FailureCode,
    pub message: String,
}

pub fn encode(env: &SignedEnvelope) -> Vec<u8> {
    let id = env.signer.as_str().as_bytes();
    let mut rest = Vec::with_capacity(2 + 2 + id.len() + 16 + 4 + env.payload.len() + 64);
    rest.push(env.version);
    rest.push(env.kind as u8);
    rest.extend_from_slice(&(id.len() as u16).to_be_bytes());
    rest.extend_from_slice(id);
    rest.extend_from_slice(&env.batch_id.to_be_bytes());
    rest.extend_from_slice(&env.nonce.to_be_bytes());
    rest.extend_from_slice(&(env.payload.len() as u32).to_be_bytes());
    rest.extend_from_slice(&env.payload);
    rest.extend_from_slice(&env.signature);
    let mut frame = Vec::with_capacity(4 + rest.len());
    frame.extend_from_slice(&(rest.len() as u32).to_be_bytes());
    frame.extend_from_slice(&rest);
    frame
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Decode(format!("truncated: need {n}, have {}", self.buf.len())));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

pub fn decode(frame: &[u8]) -> Result<SignedEnvelope> {
    let mut c = Cursor { buf: frame };
    let len = u32::from_be_bytes(c.array()?) as usize;
    if len != c.buf.len() {
        return Err(Error::Decode(format!("length prefix {len} but {} bytes follow", c.buf.len())));
    }
    let [version] = c.array::<1>()?;
    if version != WIRE_VERSION {
        return Err(Error::Decode(format!("unsupported version {version}")));
    }
    let [kind] = c.array::<1>()?;
    let kind = MessageKind::from_u8(kind).ok_or_else(|| Error::Decode(format!("unknown kind {kind}")))?;
    let id_len = u16::from_be_bytes(c.array()?) as usize;
    let signer = std::str::from_utf8(c.take(id_len)?)
        .map_err(|e| Error::Decode(e.to_string()))?
        .to_owned();
    let batch_id = u64::from_be_bytes(c.array()?);
    let nonce = u64::from_be_bytes(c.array()?);
    let body_len = u32::from_be_bytes(c.array()?) as usize;
    let payload = c.take(body_len)?.to_vec();
    let signature = c.array::<64>()?;
    if !c.buf.is_empty() {
        return Err(Error::Decode("trailing bytes".into()));
    }
    Ok(SignedEnvelope {
        version,
        kind,
        signer: EntityId(signer),
        batch_id,
        nonce,
        payload,
        signature,
    })
}

/// Sign and frame a serializable body.
pub fn seal<T: Serialize>(
    key: &SigningKey,
    signer: &EntityId,
    kind: MessageKind,
    batch_id: u64,
    nonce: u64,
    body: &T,
) -> Vec<u8> {
    let payload = serde_json::to_vec(body).expect("wire bodies always serialize");
    encode(&SignedEnvelope::sign(key, signer, kind, batch_id, nonce, payload))
}

/// Parse the body of an already verified envelope.
pub fn open<T: DeserializeOwned>(env: &SignedEnvelope, expected: MessageKind) -> Result<T> {
    if env.kind != expected {
        return Err(Error::Decode(format!("expected {expected:?}, got {:?}", env.kind)));
    }
    serde_json::from_slice(&env.payload).map_err(|e| Error::Decode(e.to_string()))
}
