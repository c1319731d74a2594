//! Synthetic humans and the deterministic clock that drives them.

mod cohort;
mod export;
mod faults;
mod texts;
mod types;
mod world;

pub use cohort::{
    build_cohort, ground_truth_valence, Cohort, CohortSpec, EntityProfile, Gender, Persona, Place,
    PlaceKind, ValencePolicy, Writing,
};
pub use export::{read_events, write_events};
pub use faults::{FaultEntry, FaultKind, FaultMix, FaultPlan};
pub use texts::phrases;
pub use types::{
    day_of_week, random_uuid, Activity, EntityId, Event, EventKind, HourBand, Language, Payload,
    Point, Sentiment, Valence, SECONDS_PER_DAY,
};
pub use world::{SimClock, StepOutput, World};
