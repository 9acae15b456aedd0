use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear waveform. Times are strictly increasing; values are held
/// constant before the first and after the last point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwlWaveform {
    points: Vec<(f64, f64)>,
}

impl PwlWaveform {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidPwl("at least one point is required".into()));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidPwl("non-finite point".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidPwl(format!(
                "times must be strictly increasing ({:e} after {:e})",
                w[1].0, w[0].0
            )));
        }
        Ok(Self { points })
    }

    /// A ramp from 0 at t = 0 to `amplitude` at `rise`, held afterwards.
    pub fn step(rise: f64, amplitude: f64) -> Result<Self> {
        Self::new(vec![(0.0, 0.0), (rise, amplitude)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Linear interpolation with constant hold outside the breakpoint range.
    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        let (t0, v0) = pts[0];
        if t <= t0 {
            return v0;
        }
        let (tl, vl) = pts[pts.len() - 1];
        if t >= tl {
            return vl;
        }
        // First index with time > t; the bracketing segment is [i-1, i].
        let i = pts.partition_point(|&(ti, _)| ti <= t);
        let (ta, va) = pts[i - 1];
        let (tb, vb) = pts[i];
        if t == ta {
            return va;
        }
        va + (vb - va) * ((t - ta) / (tb - ta))
    }

    /// Smallest breakpoint strictly greater than `t`.
    pub fn next_breakpoint(&self, t: f64) -> Option<f64> {
        let i = self.points.partition_point(|&(ti, _)| ti <= t);
        self.points.get(i).map(|p| p.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.points.iter().fold(0.0, |m, p| m.max(p.1.abs()))
    }

    /// The same waveform with every value multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            points: self.points.iter().map(|&(t, v)| (t, v * k)).collect(),
        }
    }
}

/// Smallest breakpoint strictly greater than `t` across all waveforms.
pub fn next_breakpoint<'a, I>(sources: I, t: f64) -> Option<f64>
where
    I: IntoIterator<Item = &'a PwlWaveform>,
{
    sources
        .into_iter()
        .filter_map(|w| w.next_breakpoint(t))
        .min_by(f64::total_cmp)
}
