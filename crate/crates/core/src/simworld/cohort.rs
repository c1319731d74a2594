//! Synthetic cohort: identities, demographics, places, and the valence
//! policy that serves as ground truth for every report an entity makes.

use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::{EntityId, HourBand, Point, Valence};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Undisclosed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceKind {
    Home,
    Work,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub kind: PlaceKind,
    pub center: Point,
    /// Standard deviation of positions around `center`, metres.
    pub spread: f64,
}

/// Which languages an entity writes in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Writing {
    En,
    Pt,
    Mixed,
}

/// Behavioural archetype used to shape the default cohort.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Persona {
    /// Context-dependent valence with enough reports to learn from.
    Contextual,
    /// Only ever reports one class.
    SingleClass,
    /// Rarely reports at all.
    LowReporter,
    /// One class dominates everywhere.
    Imbalanced,
}

/// Class probabilities per (place index, hour band).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValencePolicy {
    pub rows: Vec<[[f64; 3]; 3]>,
}

impl ValencePolicy {
    pub fn uniform(n_places: usize) -> Self {
        ValencePolicy {
            rows: vec![[[1.0 / 3.0; 3]; 3]; n_places],
        }
    }

    pub fn row(&self, place: usize, band: HourBand) -> &[f64; 3] {
        &self.rows[place][band.index()]
    }

    /// Argmax of a policy row. Any tie resolves to neutral.
    pub fn argmax(row: &[f64; 3]) -> Valence {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..3).filter(|&k| row[k] == max).collect();
        if winners.len() == 1 {
            Valence::ALL[winners[0]]
        } else {
            Valence::Neutral
        }
    }

    pub fn sample<R: Rng + ?Sized>(row: &[f64; 3], rng: &mut R) -> Valence {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return Valence::ALL[k];
            }
        }
        // rounding slack lands on the last class with positive mass
        let last = (0..3).rev().find(|&k| row[k] > 0.0).unwrap_or(1);
        Valence::ALL[last]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityProfile {
    pub entity_id: EntityId,
    pub birthdate: Option<NaiveDate>,
    pub gender: Gender,
    /// Home first, then work, then other places.
    pub places: Vec<Place>,
    pub valence_policy: ValencePolicy,
    /// Valence reports per simulated day.
    pub report_rate: f64,
    /// Text messages per simulated day.
    pub text_rate: f64,
    /// Context changes (activity/position) per simulated day.
    pub sensor_rate: f64,
    pub writing: Writing,
    pub persona: Persona,
}

impl EntityProfile {
    pub fn has_demographics(&self) -> bool {
        self.birthdate.is_some() && self.gender != Gender::Undisclosed
    }

    /// Index of the closest place center; equidistant places resolve to the lower index.
    pub fn nearest_place(&self, location: &Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, place) in self.places.iter().enumerate() {
            let d = place.center.dist(location);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn validate(&self) -> Result<()> {
        if self.places.is_empty() {
            return Err(Error::Config(format!("{}: no places", self.entity_id)));
        }
        if self.valence_policy.rows.len() != self.places.len() {
            return Err(Error::Config(format!(
                "{}: policy has {} rows for {} places",
                self.entity_id,
                self.valence_policy.rows.len(),
                self.places.len()
            )));
        }
        for bands in &self.valence_policy.rows {
            for row in bands {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || row.iter().any(|p| *p < 0.0) {
                    return Err(Error::Config(format!(
                        "{}: policy row {row:?} is not a distribution",
                        self.entity_id
                    )));
                }
            }
        }
        if !(self.report_rate >= 0.0 && self.text_rate >= 0.0 && self.sensor_rate >= 0.0) {
            return Err(Error::Config(format!("{}: negative rate", self.entity_id)));
        }
        Ok(())
    }
}

/// Argmax class of the policy row for the nearest place and the hour band of `t`.
pub fn ground_truth_valence(profile: &EntityProfile, location: &Point, t: f64) -> Valence {
    let place = profile.nearest_place(location);
    ValencePolicy::argmax(profile.valence_policy.row(place, HourBand::of(t)))
}

/// Parameters of the synthetic cohort, read from a key/value TOML file.
///
/// Counts are signed so that negative values in a hand-edited file are
/// reported as configuration errors instead of failing to parse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub entities: i64,
    /// Entities that never share birthdate or gender.
    pub undisclosed: i64,
    /// Female entities among those that disclose demographics.
    pub female: i64,
    pub single_class: i64,
    pub low_reporters: i64,
    pub imbalanced: i64,
    pub days: f64,
    pub start_date: NaiveDate,
    pub world_size_m: f64,
    pub place_spread_m: f64,
    pub min_place_separation_m: f64,
    pub report_rate_min: f64,
    pub report_rate_max: f64,
    pub low_report_rate: f64,
    pub text_rate: f64,
    pub sensor_rate: f64,
    /// Chance that a report is preceded by a mistaken click on another class.
    pub misclick_prob: f64,
    /// Chance that an observation happens away from every known place.
    pub outlier_prob: f64,
    /// Chance that a report carries no position fix.
    pub missing_fix_prob: f64,
    pub dominant_prob_min: f64,
    pub dominant_prob_max: f64,
    pub imbalanced_dominant_prob: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            entities: 57,
            undisclosed: 8,
            female: 18,
            single_class: 6,
            low_reporters: 5,
            imbalanced: 7,
            days: 30.0,
            start_date: NaiveDate::from_ymd_opt(2019, 3, 4).expect("valid date"),
            world_size_m: 10_000.0,
            place_spread_m: 40.0,
            min_place_separation_m: 800.0,
            report_rate_min: 5.0,
            report_rate_max: 8.0,
            low_report_rate: 0.03,
            text_rate: 1.5,
            sensor_rate: 48.0,
            misclick_prob: 0.05,
            outlier_prob: 0.04,
            missing_fix_prob: 0.02,
            dominant_prob_min: 0.75,
            dominant_prob_max: 0.9,
            imbalanced_dominant_prob: 0.93,
        }
    }
}

impl CohortSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: CohortSpec = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("entities", self.entities),
            ("undisclosed", self.undisclosed),
            ("female", self.female),
            ("single_class", self.single_class),
            ("low_reporters", self.low_reporters),
            ("imbalanced", self.imbalanced),
        ];
        for (name, value) in counts {
            if value < 0 {
                return Err(Error::Config(format!("{name} must be >= 0, got {value}")));
            }
        }
        let probs = [
            ("misclick_prob", self.misclick_prob),
            ("outlier_prob", self.outlier_prob),
            ("missing_fix_prob", self.missing_fix_prob),
            ("dominant_prob_min", self.dominant_prob_min),
            ("dominant_prob_max", self.dominant_prob_max),
            ("imbalanced_dominant_prob", self.imbalanced_dominant_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.dominant_prob_min > self.dominant_prob_max {
            return Err(Error::Config("dominant_prob_min exceeds dominant_prob_max".into()));
        }
        let positive = [
            ("days", self.days),
            ("world_size_m", self.world_size_m),
            ("place_spread_m", self.place_spread_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        let rates = [
            ("report_rate_min", self.report_rate_min),
            ("report_rate_max", self.report_rate_max),
            ("low_report_rate", self.low_report_rate),
            ("text_rate", self.text_rate),
            ("sensor_rate", self.sensor_rate),
        ];
        for (name, v) in rates {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.report_rate_min > self.report_rate_max {
            return Err(Error::Config("report_rate_min exceeds report_rate_max".into()));
        }
        Ok(())
    }

    pub fn horizon_s(&self) -> f64 {
        self.days * super::types::SECONDS_PER_DAY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub seed: u64,
    pub spec: CohortSpec,
    /// Weekday of simulated day zero, Monday = 0.
    pub start_weekday: u32,
    pub profiles: Vec<EntityProfile>,
}

impl Cohort {
    pub fn get(&self, id: &EntityId) -> Option<&EntityProfile> {
        self.profiles.iter().find(|p| &p.entity_id == id)
    }

    pub fn index_of(&self, id: &EntityId) -> Option<usize> {
        self.profiles.iter().position(|p| &p.entity_id == id)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

/// Build a reproducible cohort from `spec` and `seed`.
///
/// Roles are dealt over a seeded shuffle of entity indices: first the
/// undisclosed entities, then among the rest the single-class, low-reporting
/// and imbalanced personas. Counts beyond the cohort size are truncated.
pub fn build_cohort(spec: &CohortSpec, seed: u64) -> Result<Cohort> {
    spec.validate()?;
    let n = spec.entities as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut undisclosed = vec![false; n];
    let mut personas = vec![Persona::Contextual; n];
    let mut cursor = order.iter().copied();
    for idx in cursor.by_ref().take(spec.undisclosed as usize) {
        undisclosed[idx] = true;
    }
    let disclosed: Vec<usize> = cursor.collect();
    let mut deal = disclosed.iter().copied();
    for (persona, count) in [
        (Persona::SingleClass, spec.single_class),
        (Persona::LowReporter, spec.low_reporters),
        (Persona::Imbalanced, spec.imbalanced),
    ] {
        for idx in deal.by_ref().take(count as usize) {
            personas[idx] = persona;
        }
    }
    let mut female = vec![false; n];
    let mut by_gender = disclosed.clone();
    by_gender.shuffle(&mut rng);
    for idx in by_gender.into_iter().take(spec.female as usize) {
        female[idx] = true;
    }

    let mut profiles = Vec::with_capacity(n);
    for i in 0..n {
        let mut erng = ChaCha8Rng::seed_from_u64(seed);
        erng.set_stream(1_000 + i as u64);
        let (birthdate, gender) = if undisclosed[i] {
            (None, Gender::Undisclosed)
        } else {
            let gender = if female[i] { Gender::Female } else { Gender::Male };
            (Some(random_birthdate(&mut erng)), gender)
        };
        let places = random_places(spec, &mut erng);
        let persona = personas[i];
        let valence_policy = match persona {
            Persona::Contextual | Persona::LowReporter => contextual_policy(spec, places.len(), &mut erng),
            Persona::SingleClass => {
                let k = erng.random_range(0..3);
                let mut row = [0.0; 3];
                row[k] = 1.0;
                ValencePolicy {
                    rows: vec![[row; 3]; places.len()],
                }
            }
            Persona::Imbalanced => {
                let k = erng.random_range(0..3);
                let p = spec.imbalanced_dominant_prob;
                let rest = 1.0 - p;
                let mut row = [0.0; 3];
                row[k] = p;
                row[(k + 1) % 3] = rest * 0.6;
                row[(k + 2) % 3] = 1.0 - p - rest * 0.6;
                ValencePolicy {
                    rows: vec![[row; 3]; places.len()],
                }
            }
        };
        let report_rate = if persona == Persona::LowReporter {
            spec.low_report_rate
        } else if spec.report_rate_max > spec.report_rate_min {
            erng.random_range(spec.report_rate_min..spec.report_rate_max)
        } else {
            spec.report_rate_min
        };
        let writing = match erng.random_range(0..3) {
            0 => Writing::En,
            1 => Writing::Pt,
            _ => Writing::Mixed,
        };
        let profile = EntityProfile {
            entity_id: EntityId::from_index(i),
            birthdate,
            gender,
            places,
            valence_policy,
            report_rate,
            text_rate: spec.text_rate,
            sensor_rate: spec.sensor_rate,
            writing,
            persona,
        };
        profile.validate()?;
        profiles.push(profile);
    }

    Ok(Cohort {
        seed,
        spec: spec.clone(),
        start_weekday: spec.start_date.weekday().num_days_from_monday(),
        profiles,
    })
}

fn random_birthdate<R: Rng>(rng: &mut R) -> NaiveDate {
    let base = NaiveDate::from_ymd_opt(1950, 1, 1).expect("valid date");
    let days = rng.random_range(0..(52 * 365));
    base + chrono::Days::new(days)
}

fn random_places<R: Rng>(spec: &CohortSpec, rng: &mut R) -> Vec<Place> {
    let n_other = rng.random_range(1..=2);
    let kinds = std::iter::once(PlaceKind::Home)
        .chain(std::iter::once(PlaceKind::Work))
        .chain(std::iter::repeat_n(PlaceKind::Other, n_other));
    let margin = spec.world_size_m * 0.05;
    let mut places: Vec<Place> = Vec::new();
    for kind in kinds {
        let mut center = Point::new(0.0, 0.0);
        for _ in 0..1_000 {
            center = Point::new(
                rng.random_range(margin..spec.world_size_m - margin),
                rng.random_range(margin..spec.world_size_m - margin),
            );
            if places
                .iter()
                .all(|p| p.center.dist(&center) >= spec.min_place_separation_m)
            {
                break;
            }
        }
        places.push(Place {
            kind,
            center,
            spread: spec.place_spread_m,
        });
    }
    places
}

/// Policy whose dominant class mixes a per-place tendency with band-specific
/// flips, so valence depends jointly on where and when.
fn contextual_policy<R: Rng>(spec: &CohortSpec, n_places: usize, rng: &mut R) -> ValencePolicy {
    let mut base: Vec<usize> = vec![0, 1, 2];
    base.shuffle(rng);
    while base.len() < n_places {
        base.push(rng.random_range(0..3));
    }
    base.truncate(n_places);
    let flip_band = rng.random_range(0..3);
    let shift = rng.random_range(1..3);
    let rows = (0..n_places)
        .map(|p| {
            let flips = rng.random_bool(0.5) || p == 0;
            let mut bands = [[0.0; 3]; 3];
            for (b, row) in bands.iter_mut().enumerate() {
                let class = if flips && b == flip_band {
                    (base[p] + shift) % 3
                } else {
                    base[p]
                };
                let dominant = if spec.dominant_prob_max > spec.dominant_prob_min {
                    rng.random_range(spec.dominant_prob_min..spec.dominant_prob_max)
                } else {
                    spec.dominant_prob_min
                };
                let split = rng.random_range(0.3..0.7);
                let rest = 1.0 - dominant;
                row[class] = dominant;
                row[(class + 1) % 3] = rest * split;
                row[(class + 2) % 3] = 1.0 - dominant - rest * split;
            }
            bands
        })
        .collect();
    ValencePolicy { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_cohort_has_expected_demographics() {
        let cohort = build_cohort(&CohortSpec::default(), 7).unwrap();
        assert_eq!(cohort.len(), 57);
        let undisclosed = cohort.profiles.iter().filter(|p| !p.has_demographics()).count();
        assert_eq!(undisclosed, 8);
        let female = cohort
            .profiles
            .iter()
            .filter(|p| p.gender == Gender::Female)
            .count();
        assert_eq!(female, 18);
        let male = cohort.profiles.iter().filter(|p| p.gender == Gender::Male).count();
        assert_eq!(male, 31);
    }

    #[test]
    fn empty_spec_gives_empty_cohort() {
        let spec = CohortSpec {
            entities: 0,
            ..CohortSpec::default()
        };
        assert!(build_cohort(&spec, 1).unwrap().is_empty());
    }

    #[test]
    fn negative_count_is_config_error() {
        let spec = CohortSpec {
            undisclosed: -1,
            ..CohortSpec::default()
        };
        assert!(matches!(build_cohort(&spec, 1), Err(Error::Config(_))));
        let parsed = CohortSpec::from_toml_str("entities = -3\n");
        assert!(matches!(parsed, Err(Error::Config(_))));
    }

    #[test]
    fn serialization_is_deterministic() {
        let a = serde_json::to_vec(&build_cohort(&CohortSpec::default(), 7).unwrap()).unwrap();
        let b = serde_json::to_vec(&build_cohort(&CohortSpec::default(), 7).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_vec(&build_cohort(&CohortSpec::default(), 8).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn policy_rows_are_distributions() {
        let cohort = build_cohort(&CohortSpec::default(), 3).unwrap();
        for p in &cohort.profiles {
            p.validate().unwrap();
        }
    }

    fn two_place_profile(row: [f64; 3]) -> EntityProfile {
        EntityProfile {
            entity_id: EntityId::from_index(0),
            birthdate: None,
            gender: Gender::Undisclosed,
            places: vec![
                Place {
                    kind: PlaceKind::Home,
                    center: Point::new(0.0, 0.0),
                    spread: 10.0,
                },
                Place {
                    kind: PlaceKind::Work,
                    center: Point::new(100.0, 0.0),
                    spread: 10.0,
                },
            ],
            valence_policy: ValencePolicy {
                rows: vec![[row; 3], [[0.0, 0.0, 1.0]; 3]],
            },
            report_rate: 1.0,
            text_rate: 0.0,
            sensor_rate: 0.0,
            writing: Writing::En,
            persona: Persona::Contextual,
        }
    }

    #[test]
    fn ground_truth_follows_policy_argmax() {
        let mut profile = two_place_profile([0.05, 0.05, 0.9]);
        let nine_am = 9.0 * 3600.0;
        assert_eq!(
            ground_truth_valence(&profile, &Point::new(1.0, 1.0), nine_am),
            Valence::Positive
        );
        profile.valence_policy.rows[0] = [[1.0 / 3.0; 3]; 3];
        assert_eq!(
            ground_truth_valence(&profile, &Point::new(1.0, 1.0), nine_am),
            Valence::Neutral
        );
    }

    #[test]
    fn equidistant_query_uses_lower_place_index() {
        let profile = two_place_profile([0.9, 0.05, 0.05]);
        // home says negative, work says positive
        assert_eq!(
            ground_truth_valence(&profile, &Point::new(50.0, 20.0), 0.0),
            Valence::Negative
        );
    }

    #[test]
    fn argmax_ties_resolve_to_neutral() {
        assert_eq!(ValencePolicy::argmax(&[0.4, 0.2, 0.4]), Valence::Neutral);
        assert_eq!(ValencePolicy::argmax(&[0.5, 0.0, 0.5]), Valence::Neutral);
        assert_eq!(ValencePolicy::argmax(&[0.1, 0.2, 0.7]), Valence::Positive);
    }
}
