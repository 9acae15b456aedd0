use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::Method;
use crate::error::{Error, Result};
use crate::mna::MnaSystem;
use crate::tol::TIME_EPS;

/// Per-step diagnostics of an exponential run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub h: f64,
    /// Basis dimension built (substitutions spent).
    pub m: usize,
    /// Dimension of the projection that produced the step.
    pub m_used: usize,
    pub err: f64,
    pub h_next: f64,
    pub halvings: usize,
    /// Largest error estimate over interior output instants.
    pub err_interior: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub method: Option<Method>,
    #[serde(rename = "N")]
    pub steps: usize,
    pub m_steps: Vec<usize>,
    pub sum_m: usize,
    pub m_avg: f64,
    pub m_peak: usize,
    /// Sparse factorizations after the DC solve.
    pub factorizations: usize,
    /// Forward/backward substitution pairs after the DC solve.
    pub substitutions: usize,
    pub halvings: usize,
    pub err_sum: f64,
    pub wall_seconds: f64,
    pub dc_seconds: f64,
    pub lu_seconds: f64,
}

impl RunStats {
    pub(crate) fn record_m(&mut self, m: usize) {
        self.m_steps.push(m);
        self.sum_m += m;
        self.m_peak = self.m_peak.max(m);
        self.m_avg = self.sum_m as f64 / self.m_steps.len() as f64;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

/// Sampled probe voltages and currents of one run.
#[derive(Debug, Clone)]
pub struct Waveform {
    pub probes: Vec<String>,
    pub times: Vec<f64>,
    /// `samples[p][k]`: probe `p` at `times[k]`.
    pub samples: Vec<Vec<f64>>,
    pub stats: RunStats,
    pub steps: Vec<StepRecord>,
}

impl Waveform {
    pub(crate) fn new(sys: &MnaSystem, method: Method) -> Self {
        Self {
            probes: sys.probe_labels().to_vec(),
            times: Vec::new(),
            samples: vec![Vec::new(); sys.probe_rows().len()],
            stats: RunStats {
                method: Some(method),
                ..RunStats::default()
            },
            steps: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, rows: &[usize], t: f64, x: &[f64]) {
        self.times.push(t);
        for (s, &r) in self.samples.iter_mut().zip(rows) {
            s.push(x[r]);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn probe(&self, name: &str) -> Option<&[f64]> {
        self.probes.iter().position(|p| p == name).map(|i| self.samples[i].as_slice())
    }

    /// `time,<probe>...` followed by one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "time")?;
        for p in &self.probes {
            write!(w, ",{p}")?;
        }
        writeln!(w)?;
        for (k, t) in self.times.iter().enumerate() {
            write!(w, "{t:e}")?;
            for s in &self.samples {
                write!(w, ",{:e}", s[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// `t,h,m,err,h_next` per step.
    pub fn write_diagnostics<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,h,m,err,h_next")?;
        for s in &self.steps {
            writeln!(w, "{:e},{:e},{},{:e},{:e}", s.t, s.h, s.m, s.err, s.h_next)?;
        }
        Ok(())
    }

    /// Largest absolute difference over probes shared by name, at instants
    /// present in both waveforms.
    pub fn max_abs_diff(&self, other: &Waveform) -> Result<f64> {
        let pairs: Vec<(usize, usize)> = self
            .probes
            .iter()
            .enumerate()
            .filter_map(|(i, p)| other.probes.iter().position(|q| q == p).map(|j| (i, j)))
            .collect();
        if pairs.is_empty() {
            return Err(Error::InvalidConfig("no common probes".into()));
        }
        let horizon = self.times.last().copied().unwrap_or(0.0).abs().max(1e-300);
        let slack = TIME_EPS * horizon;
        let (mut a, mut b) = (0, 0);
        let mut common = 0usize;
        let mut worst: f64 = 0.0;
        while a < self.times.len() && b < other.times.len() {
            let (ta, tb) = (self.times[a], other.times[b]);
            if (ta - tb).abs() <= slack {
                for &(i, j) in &pairs {
                    worst = worst.max((self.samples[i][a] - other.samples[j][b]).abs());
                }
                common += 1;
                a += 1;
                b += 1;
            } else if ta < tb {
                a += 1;
            } else {
                b += 1;
            }
        }
        if common == 0 {
            return Err(Error::InvalidConfig("no common sample times".into()));
        }
        Ok(worst)
    }
}

/// Reads a waveform CSV back as `(probes, times, rows)`.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<f64>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidConfig("empty CSV".into()))?;
    let mut cols = header.split(',');
    if cols.next() != Some("time") {
        return Err(Error::InvalidConfig("CSV header must start with 'time'".into()));
    }
    let probes: Vec<String> = cols.map(str::to_string).collect();
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| Error::InvalidConfig(format!("bad CSV value: {e}")))?;
        if vals.len() != probes.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: probes.len() + 1,
                got: vals.len(),
            });
        }
        times.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    Ok((probes, times, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(times: &[f64], vals: &[f64]) -> Waveform {
        Waveform {
            probes: vec!["a".into()],
            times: times.to_vec(),
            samples: vec![vals.to_vec()],
            stats: RunStats::default(),
            steps: Vec::new(),
        }
    }

    #[test]
    fn csv_round_trip() {
        let w = wave(&[0.0, 1e-11, 2e-11], &[0.0, 0.25, 1.0 / 3.0]);
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,a\n"));
        let (p, t, rows) = read_csv(&text).unwrap();
        assert_eq!(p, vec!["a"]);
        assert_eq!(t, w.times);
        assert_eq!(rows[2][0], 1.0 / 3.0);
    }

    #[test]
    fn diff_on_common_times_only() {
        let a = wave(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 2.0, 3.0]);
        let b = wave(&[0.0, 1.5, 3.0], &[0.0, 9.0, 3.5]);
        assert_eq!(a.max_abs_diff(&b).unwrap(), 0.5);
        let c = wave(&[0.5], &[0.0]);
        assert!(a.max_abs_diff(&c).is_err());
    }

    #[test]
    fn stats_json_keys() {
        let mut s = RunStats::default();
        s.record_m(3);
        s.record_m(5);
        s.steps = 2;
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(v["N"], 2);
        assert_eq!(v["sum_m"], 8);
        assert_eq!(v["m_avg"], 4.0);
        assert_eq!(v["m_peak"], 5);
        for k in ["factorizations", "substitutions", "wall_seconds"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
