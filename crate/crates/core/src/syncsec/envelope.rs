//! Signed, signer-bound message wrapper.

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier};

use super::keys::KeyRegistry;
use crate::error::AuthError;
use crate::simworld::EntityId;

pub const WIRE_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageKind {
    Batch = 1,
    Ack = 2,
    PredictionRequest = 3,
    PredictionResponse = 4,
    Failure = 5,
}

impl MessageKind {
    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            1 => MessageKind::Batch,
            2 => MessageKind::Ack,
            3 => MessageKind::PredictionRequest,
            4 => MessageKind::PredictionResponse,
            5 => MessageKind::Failure,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedEnvelope {
    pub version: u8,
    pub kind: MessageKind,
    pub signer: EntityId,
    /// Batch the message refers to; zero when not applicable.
    pub batch_id: u64,
    pub nonce: u64,
    pub payload: Vec<u8>,
    pub signature: [u8; 64],
}

fn signed_message(payload: &[u8], nonce: u64) -> Vec<u8> {
    let mut msg = Vec::with_capacity(payload.len() + 8);
    msg.extend_from_slice(payload);
    msg.extend_from_slice(&nonce.to_be_bytes());
    msg
}

impl SignedEnvelope {
    /// Sign `payload ‖ nonce` with `key` on behalf of `signer`.
    pub fn sign(
        key: &SigningKey,
        signer: &EntityId,
        kind: MessageKind,
        batch_id: u64,
        nonce: u64,
        payload: Vec<u8>,
    ) -> Self {
        let signature = key.sign(&signed_message(&payload, nonce)).to_bytes();
        SignedEnvelope {
            version: WIRE_VERSION,
            kind,
            signer: signer.clone(),
            batch_id,
            nonce,
            payload,
            signature,
        }
    }
}

/// Check the signature against the signer's registered key and return the
/// signer, which every later data access is scoped to.
pub fn verify_and_scope(env: &SignedEnvelope, registry: &KeyRegistry) -> Result<EntityId, AuthError> {
    let key = registry.get(&env.signer).ok_or(AuthError::Reject)?;
    let sig = Signature::from_bytes(&env.signature);
    key.verify(&signed_message(&env.payload, env.nonce), &sig)
        .map_err(|_| AuthError::Reject)?;
    Ok(env.signer.clone())
}

/// A verified signer may only touch its own data.
pub fn authorize(signer: &EntityId, requested: &EntityId) -> Result<(), AuthError> {
    if signer == requested {
        Ok(())
    } else {
        Err(AuthError::Scope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syncsec::keys::derive_signing_key;

    fn setup() -> (KeyRegistry, SigningKey, EntityId) {
        let a = EntityId::from("e000");
        let b = EntityId::from("e001");
        let reg = KeyRegistry::enroll_all(3, [&a, &b]);
        (reg, derive_signing_key(3, "e000"), a)
    }

    #[test]
    fn round_trip_returns_signer() {
        let (reg, key, a) = setup();
        let env = SignedEnvelope::sign(&key, &a, MessageKind::Batch, 1, 9, b"hello".to_vec());
        assert_eq!(verify_and_scope(&env, &reg), Ok(a));
    }

    #[test]
    fn tampering_rejects() {
        let (reg, key, a) = setup();
        let mut env = SignedEnvelope::sign(&key, &a, MessageKind::Batch, 1, 9, b"hello".to_vec());
        env.payload[0] ^= 1;
        assert_eq!(verify_and_scope(&env, &reg), Err(AuthError::Reject));
        let mut env = SignedEnvelope::sign(&key, &a, MessageKind::Batch, 1, 9, b"hello".to_vec());
        env.nonce += 1;
        assert_eq!(verify_and_scope(&env, &reg), Err(AuthError::Reject));
    }

    #[test]
    fn claiming_another_signer_rejects() {
        let (reg, key, _) = setup();
        let env = SignedEnvelope::sign(&key, &EntityId::from("e001"), MessageKind::Batch, 1, 9, vec![1]);
        assert_eq!(verify_and_scope(&env, &reg), Err(AuthError::Reject));
    }

    #[test]
    fn cross_entity_scope_fails() {
        let (reg, key, a) = setup();
        let env = SignedEnvelope::sign(&key, &a, MessageKind::PredictionRequest, 0, 1, vec![]);
        let signer = verify_and_scope(&env, &reg).unwrap();
        assert_eq!(authorize(&signer, &EntityId::from("e001")), Err(AuthError::Scope));
    }
}
