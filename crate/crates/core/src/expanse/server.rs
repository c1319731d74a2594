//! The cloud endpoint: verifies frames, ingests batches, serves predictions.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use ed25519_dalek::{SigningKey, VerifyingKey};
use log::warn;
use serde::{Deserialize, Serialize};

use super::dataset::FeatureEncoder;
use super::store::MemoryStore;
use crate::error::{AuthError, Error, Result};
use crate::learn::{ClusterModel, TrainedModel};
use crate::simworld::{EntityId, Point, Valence};
use crate::syncsec::wire::{self, Ack, Failure, FailureCode, PredictionRequest, PredictionResponse};
use crate::syncsec::{
    authorize, derive_signing_key, verify_and_scope, Endpoint, KeyRegistry, MessageKind, SyncBatch,
    SERVER_ID,
};

/// Everything needed to answer a prediction for one entity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Predictor {
    pub clusters: ClusterModel,
    pub encoder: FeatureEncoder,
    pub model: TrainedModel,
}

impl Predictor {
    pub fn predict(&self, location: &Point, t: f64) -> (Valence, [f64; 3]) {
        let x = self.encoder.encode(self.clusters.assign(location), t);
        let p = self.model.predict_proba(&x);
        let probs = [p[0], p[1], p[2]];
        let best = (0..3).fold(0, |b, k| if probs[k] > probs[b] { k } else { b });
        (Valence::ALL[best], probs)
    }
}

/// Immutable predictor snapshots, swapped in whole.
#[derive(Default)]
pub struct ModelRegistry {
    models: RwLock<BTreeMap<EntityId, Arc<Predictor>>>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, id: EntityId, predictor: Predictor) {
        self.models.write().expect("registry lock").insert(id, Arc::new(predictor));
    }

    pub fn get(&self, id: &EntityId) -> Option<Arc<Predictor>> {
        self.models.read().expect("registry lock").get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.models.read().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> BTreeMap<EntityId, Predictor> {
        self.models
            .read()
            .expect("registry lock")
            .iter()
            .map(|(k, v)| (k.clone(), (**v).clone()))
            .collect()
    }
}

/// Verify a prediction request and answer it for the signer only.
pub fn handle_prediction(
    env: &crate::syncsec::SignedEnvelope,
    registry: &KeyRegistry,
    models: &ModelRegistry,
) -> Result<PredictionResponse> {
    let signer = verify_and_scope(env, registry)?;
    let req: PredictionRequest = wire::open(env, MessageKind::PredictionRequest)?;
    authorize(&signer, &req.entity_id)?;
    let predictor = models
        .get(&signer)
        .ok_or_else(|| Error::NotFound(format!("no model for {signer}")))?;
    let (class, probabilities) = predictor.predict(&Point::new(req.x, req.y), req.t);
    Ok(PredictionResponse {
        entity_id: signer,
        class,
        probabilities,
    })
}

pub struct CloudServer {
    pub store: MemoryStore,
    pub models: ModelRegistry,
    registry: KeyRegistry,
    key: SigningKey,
}

impl CloudServer {
    pub fn new(registry: KeyRegistry, key: SigningKey) -> Self {
        CloudServer {
            store: MemoryStore::new(),
            models: ModelRegistry::new(),
            registry,
            key,
        }
    }

    /// Server whose own key is derived from `seed` like every entity key.
    pub fn with_seed(registry: KeyRegistry, seed: u64) -> Self {
        Self::new(registry, derive_signing_key(seed, SERVER_ID))
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.key.verifying_key()
    }

    pub fn registry(&self) -> &KeyRegistry {
        &self.registry
    }

    fn reply<T: Serialize>(&self, kind: MessageKind, batch_id: u64, nonce: u64, body: &T) -> Vec<u8> {
        wire::seal(&self.key, &EntityId::from(SERVER_ID), kind, batch_id, nonce, body)
    }

    fn failure(&self, nonce: u64, err: &Error) -> Vec<u8> {
        let code = match err {
            Error::Auth(AuthError::Reject) => FailureCode::Reject,
            Error::Auth(AuthError::Scope) => FailureCode::Scope,
            Error::NotFound(_) => FailureCode::NotFound,
            _ => FailureCode::Malformed,
        };
        self.reply(
            MessageKind::Failure,
            0,
            nonce,
            &Failure {
                code,
                message: err.to_string(),
            },
        )
    }

    fn handle_batch(&self, env: &crate::syncsec::SignedEnvelope) -> Result<Ack> {
        let signer = verify_and_scope(env, &self.registry)?;
        let batch: SyncBatch = wire::open(env, MessageKind::Batch)?;
        if batch.batch_id != env.batch_id {
            return Err(Error::Decode("header and body batch ids differ".into()));
        }
        let inserted = self.store.ingest(&signer, &batch)?;
        Ok(Ack {
            entity_id: signer,
            batch_id: batch.batch_id,
            inserted,
        })
    }

    pub fn handle_frame(&self, frame: &[u8]) -> Vec<u8> {
        let env = match wire::decode(frame) {
            Ok(env) => env,
            Err(e) => return self.failure(0, &e),
        };
        match env.kind {
            MessageKind::Batch => match self.handle_batch(&env) {
                Ok(ack) => self.reply(MessageKind::Ack, ack.batch_id, env.nonce, &ack),
                Err(e) => {
                    warn!("batch from {} refused: {e}", env.signer);
                    self.failure(env.nonce, &e)
                }
            },
            MessageKind::PredictionRequest => match handle_prediction(&env, &self.registry, &self.models) {
                Ok(resp) => self.reply(MessageKind::PredictionResponse, 0, env.nonce, &resp),
                Err(e) => self.failure(env.nonce, &e),
            },
            other => self.failure(env.nonce, &Error::Decode(format!("unexpected {other:?}"))),
        }
    }
}

impl Endpoint for CloudServer {
    fn handle(&self, frame: &[u8]) -> Vec<u8> {
        self.handle_frame(frame)
    }
}

/// Client side of a prediction: sign, send, verify the server's answer.
pub fn request_prediction(
    endpoint: &dyn Endpoint,
    key: &SigningKey,
    signer: &EntityId,
    request: &PredictionRequest,
    nonce: u64,
    server_key: &VerifyingKey,
) -> Result<PredictionResponse> {
    let frame = wire::seal(key, signer, MessageKind::PredictionRequest, 0, nonce, request);
    let env = wire::decode(&endpoint.handle(&frame))?;
    let mut servers = KeyRegistry::new();
    servers.insert(EntityId::from(SERVER_ID), *server_key);
    verify_and_scope(&env, &servers)?;
    match env.kind {
        MessageKind::PredictionResponse => wire::open(&env, MessageKind::PredictionResponse),
        MessageKind::Failure => {
            let f: Failure = wire::open(&env, MessageKind::Failure)?;
            Err(match f.code {
                FailureCode::Reject => AuthError::Reject.into(),
                FailureCode::Scope => AuthError::Scope.into(),
                FailureCode::NotFound => Error::NotFound(f.message),
                FailureCode::Malformed => Error::Decode(f.message),
            })
        }
        other => Err(Error::Decode(format!("unexpected {other:?}"))),
    }
}
