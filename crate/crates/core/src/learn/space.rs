//! Bounded hyperparameter boxes. The optimiser works on the unit cube;
//! [`HyperparamSpace::decode`] maps a unit point into real values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    /// Uniform in `ln` space.
    #[serde(default)]
    pub log: bool,
    /// Decoded values are whole numbers.
    #[serde(default)]
    pub integer: bool,
}

impl Dimension {
    pub fn real(name: &str, lo: f64, hi: f64) -> Self {
        Dimension { name: name.into(), lo, hi, log: false, integer: false }
    }

    pub fn log(name: &str, lo: f64, hi: f64) -> Self {
        Dimension { log: true, ..Self::real(name, lo, hi) }
    }

    pub fn int(name: &str, lo: i64, hi: i64) -> Self {
        Dimension { integer: true, ..Self::real(name, lo as f64, hi as f64) }
    }

    pub fn decode(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if self.integer {
            // equal-width buckets, one per whole number
            let span = self.hi - self.lo + 1.0;
            return (self.lo + (u * span).floor()).min(self.hi);
        }
        if self.log {
            (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + u * (self.hi - self.lo)
        }
    }

    /// Unit coordinate of a real value (centre of its bucket for integers).
    pub fn encode(&self, v: f64) -> f64 {
        let u = if self.integer {
            (v.round() - self.lo + 0.5) / (self.hi - self.lo + 1.0)
        } else if self.log {
            (v.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        };
        u.clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSpace {
    pub dims: Vec<Dimension>,
}

impl HyperparamSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        let space = HyperparamSpace { dims };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        for d in &self.dims {
            if !(d.lo < d.hi) || !d.lo.is_finite() || !d.hi.is_finite() {
                return Err(Error::Config(format!("dimension {}: need lo < hi", d.name)));
            }
            if d.log && d.lo <= 0.0 {
                return Err(Error::Config(format!("dimension {}: log scale needs lo > 0", d.name)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn decode(&self, unit: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(unit).map(|(d, &u)| d.decode(u)).collect()
    }

    pub fn encode(&self, values: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(values).map(|(d, &v)| d.encode(v)).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.dims.iter().map(|d| d.name.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inverted_bounds_are_rejected() {
        assert!(HyperparamSpace::new(vec![Dimension::real("a", 1.0, 1.0)]).is_err());
        assert!(HyperparamSpace::new(vec![Dimension::log("a", 0.0, 1.0)]).is_err());
        assert!(HyperparamSpace::new(vec![Dimension::int("a", 1, 6)]).is_ok());
    }

    #[test]
    fn endpoints() {
        let d = Dimension::log("l2", 1e-4, 1e2);
        assert!((d.decode(0.0) - 1e-4).abs() < 1e-15);
        assert!((d.decode(1.0) - 1e2).abs() < 1e-9);
        assert!((d.decode(0.5) - 0.1).abs() < 1e-12);
        let i = Dimension::int("depth", 1, 6);
        assert_eq!(i.decode(0.0), 1.0);
        assert_eq!(i.decode(1.0), 6.0);
    }

    proptest! {
        #[test]
        fn integer_buckets_are_even(u in 0.0f64..1.0) {
            let d = Dimension::int("depth", 1, 6);
            let v = d.decode(u);
            prop_assert_eq!(v, (1.0 + (u * 6.0).floor()).min(6.0));
            prop_assert_eq!(d.decode(d.encode(v)), v);
        }

        #[test]
        fn decode_stays_in_bounds(u in -0.5f64..1.5, lo in 1e-3f64..10.0, w in 1e-3f64..100.0) {
            for d in [Dimension::real("r", lo, lo + w), Dimension::log("g", lo, lo + w)] {
                let v = d.decode(u);
                prop_assert!(v >= d.lo - 1e-12 && v <= d.hi + 1e-9);
                let back = d.decode(d.encode(v));
                prop_assert!((back - v).abs() <= 1e-9 * v.abs().max(1.0));
            }
        }
    }
}
