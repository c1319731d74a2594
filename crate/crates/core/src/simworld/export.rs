//! Line-delimited event records: one JSON object per line with fields
//! `uuid, entity_id, kind, t, x, y, payload`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::types::{EntityId, Event, EventKind, Payload, Point};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct EventLine {
    uuid: Uuid,
    entity_id: EntityId,
    kind: EventKind,
    t: f64,
    x: Option<f64>,
    y: Option<f64>,
    payload: Payload,
}

pub fn write_events<'a, W: Write>(
    mut out: W,
    events: impl IntoIterator<Item = &'a Event>,
) -> Result<()> {
    for e in events {
        let line = EventLine {
            uuid: e.uuid,
            entity_id: e.entity_id.clone(),
            kind: e.kind(),
            t: e.t,
            x: e.location.map(|p| p.x),
            y: e.location.map(|p| p.y),
            payload: e.payload.clone(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_events<R: BufRead>(input: R) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventLine = serde_json::from_str(&line)?;
        if rec.kind != rec.payload.kind() {
            return Err(Error::Decode(format!(
                "line {}: kind {:?} does not match payload",
                n + 1,
                rec.kind
            )));
        }
        let location = match (rec.x, rec.y) {
            (Some(x), Some(y)) => Some(Point::new(x, y)),
            (None, None) => None,
            _ => return Err(Error::Decode(format!("line {}: half a coordinate", n + 1))),
        };
        events.push(Event {
            uuid: rec.uuid,
            entity_id: rec.entity_id,
            t: rec.t,
            location,
            payload: rec.payload,
        });
    }
    Ok(events)
}
