use std::fmt::{self, Write as _};

use pgsim_core::{Method, RunStats, Waveform};

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: Method,
    pub dc_seconds: f64,
    pub lu_seconds: f64,
    pub total_seconds: f64,
    pub steps: usize,
    pub sum_m: usize,
    pub m_avg: f64,
    pub m_peak: usize,
    /// Largest deviation from the dense reference, when it ran.
    pub max_diff: Option<f64>,
}

impl ReportRow {
    pub fn from_stats(method: Method, s: &RunStats) -> Self {
        Self {
            method,
            dc_seconds: s.dc_seconds,
            lu_seconds: s.lu_seconds,
            total_seconds: s.wall_seconds,
            steps: s.steps,
            sum_m: s.sum_m,
            m_avg: s.m_avg,
            m_peak: s.m_peak,
            max_diff: None,
        }
    }
}

/// Timing and accuracy summary of several methods on one netlist.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
}

impl RunReport {
    /// Builds the rows in the given order and fills in the reference column
    /// when an oracle waveform is among them.
    pub fn new(waves: &[&Waveform]) -> Self {
        let reference = waves
            .iter()
            .find(|w| w.stats.method == Some(Method::Oracle))
            .copied();
        let rows = waves
            .iter()
            .filter_map(|w| {
                let method = w.stats.method?;
                let mut row = ReportRow::from_stats(method, &w.stats);
                row.max_diff = reference.and_then(|r| w.max_abs_diff(r).ok());
                Some(row)
            })
            .collect();
        Self { rows }
    }

    fn row(&self, m: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == m)
    }

    pub fn has_reference(&self) -> bool {
        self.row(Method::Oracle).is_some()
    }

    /// TR total time over MEXP total time.
    pub fn speedup(&self) -> Option<f64> {
        let tr = self.row(Method::Tr)?.total_seconds;
        let mx = self.row(Method::Mexp)?.total_seconds;
        (tr > 0.0 && mx > 0.0).then(|| tr / mx)
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let reference = self.has_reference();
        let mut head = format!(
            "{:<8} {:>10} {:>10} {:>10} {:>8} {:>8} {:>7} {:>7}",
            "method", "DC(s)", "LU(s)", "Total(s)", "N", "sum_m", "m_avg", "m_peak"
        );
        if reference {
            let _ = write!(head, " {:>12}", "max|d|");
        }
        writeln!(f, "{head}")?;
        for r in &self.rows {
            let mexp = r.method == Method::Mexp;
            let dash = |v: String| if mexp { v } else { "-".to_string() };
            write!(
                f,
                "{:<8} {:>10.3e} {:>10.3e} {:>10.3e} {:>8} {:>8} {:>7} {:>7}",
                r.method.as_str(),
                r.dc_seconds,
                r.lu_seconds,
                r.total_seconds,
                r.steps,
                dash(r.sum_m.to_string()),
                dash(format!("{:.2}", r.m_avg)),
                dash(r.m_peak.to_string()),
            )?;
            if reference {
                match r.max_diff {
                    Some(d) => write!(f, " {d:>12.3e}")?,
                    None => write!(f, " {:>12}", "-")?,
                }
            }
            writeln!(f)?;
        }
        if let Some(s) = self.speedup() {
            writeln!(f, "Speedup (TR/MEXP): {s:.3}")?;
        }
        Ok(())
    }
}
