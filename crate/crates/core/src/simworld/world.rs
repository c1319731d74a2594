//! Discrete-event driver: per-entity Poisson streams of context changes,
//! valence reports and text messages, plus the scheduled faults.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::cohort::{Cohort, EntityProfile, PlaceKind, ValencePolicy, Writing};
use super::faults::{FaultEntry, FaultPlan};
use super::texts;
use super::types::{
    day_of_week, random_uuid, Activity, Event, HourBand, Language, Payload, Point, Valence,
    SECONDS_PER_DAY,
};

/// Simulated time in seconds plus the seed that drives every stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimClock {
    now: f64,
    seed: u64,
}

impl SimClock {
    pub fn new(seed: u64) -> Self {
        SimClock { now: 0.0, seed }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn advance(&mut self, dt: f64) {
        self.now += dt;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum StreamKind {
    Sensor = 0,
    Report = 1,
    Text = 2,
}

struct Stream {
    kind: StreamKind,
    rng: ChaCha8Rng,
    next_t: f64,
    rate_per_s: f64,
}

impl Stream {
    fn new(seed: u64, entity: usize, kind: StreamKind, rate_per_day: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((entity as u64) * 4 + kind as u64);
        let rate_per_s = rate_per_day / SECONDS_PER_DAY;
        let mut s = Stream {
            kind,
            rng,
            next_t: f64::INFINITY,
            rate_per_s,
        };
        s.next_t = s.draw_gap();
        s
    }

    fn draw_gap(&mut self) -> f64 {
        if self.rate_per_s <= 0.0 {
            return f64::INFINITY;
        }
        Exp::new(self.rate_per_s)
            .expect("positive rate")
            .sample(&mut self.rng)
    }
}

struct EntityStreams {
    streams: [Stream; 3],
    /// Events already drawn but due later (report corrections after a misclick).
    deferred: Vec<Event>,
}

pub struct StepOutput {
    pub events: Vec<Event>,
    pub faults: Vec<FaultEntry>,
}

/// The synthetic environment all agents live in.
pub struct World {
    clock: SimClock,
    cohort: Cohort,
    streams: Vec<EntityStreams>,
    faults: FaultPlan,
    fault_cursor: usize,
}

impl World {
    pub fn new(cohort: Cohort, faults: FaultPlan, seed: u64) -> Self {
        let streams = cohort
            .profiles
            .iter()
            .enumerate()
            .map(|(i, p)| EntityStreams {
                streams: [
                    Stream::new(seed, i, StreamKind::Sensor, p.sensor_rate),
                    Stream::new(seed, i, StreamKind::Report, p.report_rate),
                    Stream::new(seed, i, StreamKind::Text, p.text_rate),
                ],
                deferred: Vec::new(),
            })
            .collect();
        World {
            clock: SimClock::new(seed),
            cohort,
            streams,
            faults,
            fault_cursor: 0,
        }
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn cohort(&self) -> &Cohort {
        &self.cohort
    }

    /// Advance by `dt` seconds and return everything that happened in
    /// `[now, now + dt)`, ordered by time then entity index.
    ///
    /// # Panics
    ///
    /// Panics if `dt` is not strictly positive.
    pub fn step(&mut self, dt: f64) -> StepOutput {
        assert!(dt > 0.0, "step requires dt > 0, got {dt}");
        let start = self.clock.now();
        let end = start + dt;
        let mut tagged: Vec<(usize, Event)> = Vec::new();
        let start_weekday = self.cohort.start_weekday;
        let spec = &self.cohort.spec;
        for (idx, (profile, es)) in self
            .cohort
            .profiles
            .iter()
            .zip(self.streams.iter_mut())
            .enumerate()
        {
            es.deferred.sort_by(|a, b| a.t.total_cmp(&b.t));
            let due = es.deferred.partition_point(|e| e.t < end);
            tagged.extend(es.deferred.drain(..due).map(|e| (idx, e)));
            for stream in es.streams.iter_mut() {
                while stream.next_t < end {
                    let t = stream.next_t;
                    let ctx = Ctx {
                        profile,
                        start_weekday,
                        outlier_prob: spec.outlier_prob,
                        world_size: spec.world_size_m,
                    };
                    match stream.kind {
                        StreamKind::Sensor => {
                            tagged.push((idx, sensor_event(&ctx, t, &mut stream.rng)));
                        }
                        StreamKind::Report => {
                            let (first, later) = report_events(
                                &ctx,
                                t,
                                spec.misclick_prob,
                                spec.missing_fix_prob,
                                &mut stream.rng,
                            );
                            tagged.push((idx, first));
                            if let Some(ev) = later {
                                if ev.t < end {
                                    tagged.push((idx, ev));
                                } else {
                                    es.deferred.push(ev);
                                }
                            }
                        }
                        StreamKind::Text => {
                            tagged.push((idx, text_event(&ctx, t, &mut stream.rng)));
                        }
                    }
                    stream.next_t = t + stream.draw_gap();
                }
            }
        }
        tagged.sort_by(|a, b| a.1.t.total_cmp(&b.1.t).then(a.0.cmp(&b.0)));

        let entries = self.faults.entries();
        let mut faults = Vec::new();
        while self.fault_cursor < entries.len() && entries[self.fault_cursor].t < end {
            let f = &entries[self.fault_cursor];
            if f.t >= start {
                faults.push(f.clone());
            }
            self.fault_cursor += 1;
        }
        self.clock.advance(dt);
        StepOutput {
            events: tagged.into_iter().map(|(_, e)| e).collect(),
            faults,
        }
    }
}

struct Ctx<'a> {
    profile: &'a EntityProfile,
    start_weekday: u32,
    outlier_prob: f64,
    world_size: f64,
}

impl Ctx<'_> {
    /// Where the entity is at `t`: a place index (or `None` when away from all
    /// places) and the exact position.
    fn whereabouts<R: Rng>(&self, t: f64, rng: &mut R) -> (Option<usize>, Point) {
        if rng.random_bool(self.outlier_prob) {
            let p = Point::new(
                rng.random_range(0.0..self.world_size),
                rng.random_range(0.0..self.world_size),
            );
            return (None, p);
        }
        let weekend = day_of_week(t, self.start_weekday) >= 5;
        let (home, work) = match (HourBand::of(t), weekend) {
            (HourBand::Morning, false) => (0.35, 0.5),
            (HourBand::Afternoon, false) => (0.25, 0.5),
            (HourBand::Night, false) => (0.65, 0.1),
            (HourBand::Morning, true) => (0.6, 0.05),
            (HourBand::Afternoon, true) => (0.35, 0.05),
            (HourBand::Night, true) => (0.6, 0.05),
        };
        let places = &self.profile.places;
        let others: Vec<usize> = (0..places.len())
            .filter(|&i| places[i].kind == PlaceKind::Other)
            .collect();
        let u: f64 = rng.random();
        let idx = if u < home {
            0
        } else if u < home + work || others.is_empty() {
            1.min(places.len() - 1)
        } else {
            *others.choose(rng).expect("non-empty")
        };
        let place = &places[idx];
        let normal = Normal::new(0.0, place.spread).expect("finite spread");
        let p = Point::new(
            place.center.x + normal.sample(rng),
            place.center.y + normal.sample(rng),
        );
        (Some(idx), p)
    }
}

fn sensor_event<R: Rng>(ctx: &Ctx, t: f64, rng: &mut R) -> Event {
    let (place, location) = ctx.whereabouts(t, rng);
    let weights: [f64; 5] = match place.map(|i| ctx.profile.places[i].kind) {
        Some(PlaceKind::Home) => [0.8, 0.15, 0.02, 0.01, 0.02],
        Some(PlaceKind::Work) => [0.7, 0.25, 0.0, 0.02, 0.03],
        Some(PlaceKind::Other) => [0.4, 0.35, 0.1, 0.05, 0.1],
        None => [0.1, 0.2, 0.05, 0.15, 0.5],
    };
    let u: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut activity = Activity::Still;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            activity = Activity::ALL[k];
            break;
        }
    }
    Event {
        uuid: random_uuid(rng),
        entity_id: ctx.profile.entity_id.clone(),
        t,
        location: Some(location),
        payload: Payload::Sensor { activity },
    }
}

/// A report click, optionally preceded by a mistaken click that the second
/// (true) click corrects a few seconds later.
fn report_events<R: Rng>(
    ctx: &Ctx,
    t: f64,
    misclick_prob: f64,
    missing_fix_prob: f64,
    rng: &mut R,
) -> (Event, Option<Event>) {
    let (_, location) = ctx.whereabouts(t, rng);
    let profile = ctx.profile;
    let place = profile.nearest_place(&location);
    let truth = ValencePolicy::sample(profile.valence_policy.row(place, HourBand::of(t)), rng);
    let fix = if rng.random_bool(missing_fix_prob) {
        None
    } else {
        Some(location)
    };
    let make = |t: f64, valence: Valence, rng: &mut R| Event {
        uuid: random_uuid(rng),
        entity_id: profile.entity_id.clone(),
        t,
        location: fix,
        payload: Payload::Report { valence },
    };
    if rng.random_bool(misclick_prob) {
        let wrong = Valence::ALL[(truth.index() + rng.random_range(1..3)) % 3];
        let delay = rng.random_range(3.0..30.0);
        let first = make(t, wrong, rng);
        let second = make(t + delay, truth, rng);
        (first, Some(second))
    } else {
        (make(t, truth, rng), None)
    }
}

fn text_event<R: Rng>(ctx: &Ctx, t: f64, rng: &mut R) -> Event {
    let (_, location) = ctx.whereabouts(t, rng);
    let profile = ctx.profile;
    let place = profile.nearest_place(&location);
    let valence = ValencePolicy::sample(profile.valence_policy.row(place, HourBand::of(t)), rng);
    let language = match profile.writing {
        Writing::En => Language::En,
        Writing::Pt => Language::Pt,
        Writing::Mixed => {
            if rng.random_bool(0.5) {
                Language::En
            } else {
                Language::Pt
            }
        }
    };
    let body = texts::phrases(language, valence)
        .choose(rng)
        .expect("non-empty phrase bank")
        .to_string();
    Event {
        uuid: random_uuid(rng),
        entity_id: profile.entity_id.clone(),
        t,
        location: Some(location),
        payload: Payload::Text {
            body,
            sentiment: None,
        },
    }
}
