//! Deterministic key material and the registry the server verifies against.

use std::collections::BTreeMap;

use ed25519_dalek::{SigningKey, VerifyingKey};
use sha2::{Digest, Sha256};

use crate::simworld::EntityId;

/// Identity the server signs its responses with.
pub const SERVER_ID: &str = "server";

/// Key for `label` derived from the install seed: `sha256(seed_le ‖ label)`.
pub fn derive_signing_key(seed: u64, label: &str) -> SigningKey {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let bytes: [u8; 32] = h.finalize().into();
    SigningKey::from_bytes(&bytes)
}

/// Public keys of every enrolled signer.
#[derive(Clone, Debug, Default)]
pub struct KeyRegistry {
    keys: BTreeMap<EntityId, VerifyingKey>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the derived keys of `entities`.
    pub fn enroll_all<'a>(seed: u64, entities: impl IntoIterator<Item = &'a EntityId>) -> Self {
        let mut reg = KeyRegistry::new();
        for id in entities {
            reg.insert(id.clone(), derive_signing_key(seed, id.as_str()).verifying_key());
        }
        reg
    }

    pub fn insert(&mut self, id: EntityId, key: VerifyingKey) {
        self.keys.insert(id, key);
    }

    pub fn get(&self, id: &EntityId) -> Option<&VerifyingKey> {
        self.keys.get(id)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}
