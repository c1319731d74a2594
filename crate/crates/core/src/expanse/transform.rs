//! Regular-grid upsampling with bounded forward fill.

use crate::error::{Error, Result};

/// Values on a regular time grid; `None` marks cells that stayed missing.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSeries<T> {
    pub start: f64,
    pub step: f64,
    pub values: Vec<Option<T>>,
}

impl<T> GridSeries<T> {
    pub fn cell_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start) / self.step).floor();
        (k >= 0.0 && (k as usize) < self.values.len()).then_some(k as usize)
    }

    /// Value of the cell containing `t`.
    pub fn value_at(&self, t: f64) -> Option<&T> {
        self.values[self.cell_of(t)?].as_ref()
    }

    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

/// Place `series` on a grid of `step` seconds. Each cell holds its latest
/// observation; an empty cell takes the previous observation if that is at
/// most `gap_bound_s` older than the cell start, and stays missing otherwise.
pub fn transform_upsample<T: Clone>(series: &[(f64, T)], step: f64, gap_bound_s: f64) -> Result<GridSeries<T>> {
    if !(step > 0.0) {
        return Err(Error::Contract(format!("grid step must be > 0, got {step}")));
    }
    if let Some(i) = series.windows(2).position(|w| w[1].0 < w[0].0) {
        return Err(Error::Contract(format!("series not time-ordered at index {}", i + 1)));
    }
    let Some(first) = series.first() else {
        return Ok(GridSeries {
            start: 0.0,
            step,
            values: Vec::new(),
        });
    };
    let first_cell = (first.0 / step).floor();
    let start = first_cell * step;
    let cells = ((series[series.len() - 1].0 - start) / step).floor() as usize + 1;
    let mut values: Vec<Option<T>> = vec![None; cells];
    let mut last: Option<(f64, &T)> = None;
    let mut obs = series.iter().peekable();
    for (k, slot) in values.iter_mut().enumerate() {
        let cell_start = start + k as f64 * step;
        let cell_end = cell_start + step;
        let mut hit = false;
        while let Some((t, v)) = obs.next_if(|(t, _)| *t < cell_end) {
            last = Some((*t, v));
            hit = true;
        }
        *slot = match last {
            Some((_, v)) if hit => Some(v.clone()),
            Some((t, v)) if cell_start - t <= gap_bound_s => Some(v.clone()),
            _ => None,
        };
    }
    Ok(GridSeries { start, step, values })
}
