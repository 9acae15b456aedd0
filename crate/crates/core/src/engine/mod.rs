//! Transient drivers: adaptive matrix-exponential stepping, the fixed-step
//! trapezoidal baseline, and a dense reference run.

mod baseline;
mod mexp;
mod waveform;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netlist::{next_breakpoint, PwlWaveform, Tran};
use crate::tol::{DEFAULT_GAMMA, DEFAULT_H_MAX, DEFAULT_M_MAX, TIME_EPS};

pub use baseline::{oracle_transient, trapezoidal_transient};
pub use mexp::mexp_transient;
pub use waveform::{read_csv, RunStats, StepRecord, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mexp,
    Tr,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mexp, Method::Tr, Method::Oracle];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mexp => "mexp",
            Method::Tr => "tr",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mexp" => Ok(Method::Mexp),
            "tr" => Ok(Method::Tr),
            "oracle" => Ok(Method::Oracle),
            _ => Err(Error::InvalidConfig(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Shift of the rational Krylov operator, seconds.
    pub gamma: f64,
    /// Error budget accumulated over the whole run.
    pub e_tol: f64,
    pub t_stop: f64,
    pub h_max: f64,
    pub m_max: usize,
    /// Sample spacing; `None` samples only at step ends.
    pub output_dt: Option<f64>,
    pub method: Method,
    pub tr_h: f64,
    /// Evaluate `||(I - gamma A~) v_{m+1}||` in the error estimate instead
    /// of taking it as one. Needs a nonsingular `C`.
    pub exact_rho: bool,
}

impl SimConfig {
    pub fn new(t_stop: f64) -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            e_tol: 1e-4,
            t_stop,
            h_max: DEFAULT_H_MAX,
            m_max: DEFAULT_M_MAX,
            output_dt: None,
            method: Method::Mexp,
            tr_h: 1e-11,
            exact_rho: false,
        }
    }

    pub fn from_tran(tran: &Tran) -> Self {
        let mut cfg = Self::new(tran.stop);
        cfg.output_dt = tran.step;
        if let Some(dt) = tran.step {
            cfg.tr_h = dt;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("gamma", self.gamma)?;
        positive("tolerance", self.e_tol)?;
        positive("stop time", self.t_stop)?;
        positive("maximum step", self.h_max)?;
        positive("trapezoidal step", self.tr_h)?;
        if self.m_max == 0 {
            return Err(Error::InvalidConfig("Krylov dimension cap must be at least 1".into()));
        }
        if let Some(dt) = self.output_dt {
            positive("output spacing", dt)?;
            if self.method == Method::Mexp && dt > self.h_max * (1.0 + TIME_EPS) {
                return Err(Error::InvalidConfig(format!(
                    "output spacing {dt} exceeds the maximum step {}",
                    self.h_max
                )));
            }
        }
        Ok(())
    }
}

/// End of the next step from `t`: the nearest of the next breakpoint,
/// `t + h_max` and `t_stop`. Ends that would leave a sliver shorter than
/// `TIME_EPS * h_max` are snapped onto the following boundary.
pub(crate) fn step_end<'a, I>(sources: I, t: f64, h_max: f64, t_stop: f64) -> f64
where
    I: IntoIterator<Item = &'a PwlWaveform>,
{
    let slack = TIME_EPS * h_max;
    let mut end = (t + h_max).min(t_stop);
    if let Some(bp) = next_breakpoint(sources, t + slack) {
        if bp < end {
            end = bp;
        }
    }
    if t_stop - end <= slack {
        end = t_stop;
    }
    end
}

/// Largest step from `t` over which every source stays affine, capped by
/// `h_max` and the horizon `t_stop`.
pub fn max_allowed_step<'a, I>(sources: I, t: f64, h_max: f64, t_stop: f64) -> f64
where
    I: IntoIterator<Item = &'a PwlWaveform>,
{
    step_end(sources, t, h_max, t_stop) - t
}

/// Output instants `k * dt` strictly inside `(t0, t1)`.
pub(crate) fn grid_between(dt: Option<f64>, t0: f64, t1: f64) -> Vec<f64> {
    let Some(dt) = dt else { return Vec::new() };
    let slack = TIME_EPS * dt;
    let mut k = (t0 / dt).floor() as u64;
    let mut out = Vec::new();
    loop {
        let s = k as f64 * dt;
        if s >= t1 - slack {
            break;
        }
        if s > t0 + slack {
            out.push(s);
        }
        k += 1;
    }
    out
}
