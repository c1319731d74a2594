use std::fmt;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Three-level emotional valence, ordered negative < neutral < positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Valence {
    Negative,
    Neutral,
    Positive,
}

impl Valence {
    pub const ALL: [Valence; 3] = [Valence::Negative, Valence::Neutral, Valence::Positive];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Valence::Negative => "negative",
            Valence::Neutral => "neutral",
            Valence::Positive => "positive",
        }
    }
}

impl fmt::Display for Valence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Opaque entity identifier.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn from_index(i: usize) -> Self {
        EntityId(format!("e{i:03}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

/// Planar coordinate in metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Grid cell of side `cell_m` containing the point.
    pub fn cell(&self, cell_m: f64) -> (i64, i64) {
        ((self.x / cell_m).floor() as i64, (self.y / cell_m).floor() as i64)
    }
}

/// Coarse time-of-day context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HourBand {
    /// 06:00 to 12:00
    Morning,
    /// 12:00 to 18:00
    Afternoon,
    /// 18:00 to 06:00
    Night,
}

impl HourBand {
    pub const ALL: [HourBand; 3] = [HourBand::Morning, HourBand::Afternoon, HourBand::Night];

    pub fn of(t: f64) -> Self {
        let hour = (t.rem_euclid(SECONDS_PER_DAY) / 3600.0).floor() as u32;
        match hour {
            6..=11 => HourBand::Morning,
            12..=17 => HourBand::Afternoon,
            _ => HourBand::Night,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Day of week (Monday = 0) for a simulated timestamp, given the weekday of day zero.
pub fn day_of_week(t: f64, start_weekday: u32) -> u32 {
    let day = (t / SECONDS_PER_DAY).floor() as i64;
    ((day + start_weekday as i64).rem_euclid(7)) as u32
}

/// Physical activity label reported by the activity sensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Still,
    Walking,
    Running,
    OnBicycle,
    InVehicle,
}

impl Activity {
    pub const ALL: [Activity; 5] = [
        Activity::Still,
        Activity::Walking,
        Activity::Running,
        Activity::OnBicycle,
        Activity::InVehicle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Pt,
    Unknown,
}

/// Output of the on-device sentiment heuristic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sentiment {
    pub language: Language,
    pub score: f64,
    pub class: Valence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Sensor,
    Report,
    Text,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Sensor => "sensor",
            EventKind::Report => "report",
            EventKind::Text => "text",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Payload {
    Sensor {
        activity: Activity,
    },
    Report {
        valence: Valence,
    },
    Text {
        body: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sentiment: Option<Sentiment>,
    },
}

impl Payload {
    pub fn kind(&self) -> EventKind {
        match self {
            Payload::Sensor { .. } => EventKind::Sensor,
            Payload::Report { .. } => EventKind::Report,
            Payload::Text { .. } => EventKind::Text,
        }
    }
}

/// A timestamped, optionally geolocated observation about one entity.
///
/// `location` is `None` when no position fix was available at the time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub uuid: Uuid,
    pub entity_id: EntityId,
    pub t: f64,
    pub location: Option<Point>,
    pub payload: Payload,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }

    pub fn valence(&self) -> Option<Valence> {
        match self.payload {
            Payload::Report { valence } => Some(valence),
            _ => None,
        }
    }
}

/// Draw a random (version 4) uuid from a seeded generator.
pub fn random_uuid<R: rand::Rng + ?Sized>(rng: &mut R) -> Uuid {
    let bytes: [u8; 16] = rng.random();
    uuid::Builder::from_random_bytes(bytes).into_uuid()
}
