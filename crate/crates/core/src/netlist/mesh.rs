use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Element, Netlist, PwlWaveform, SourceValue, Tran};
use crate::error::{Error, Result};

/// How the mesh is excited at its corner node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshDrive {
    /// Ideal voltage source from the corner node to ground. The corner node
    /// carries no capacitor since the source fixes its voltage.
    Voltage,
    /// Norton equivalent: current `u(t)/resistance` into the corner node and
    /// `resistance` from the corner to ground. Every node keeps its
    /// capacitor, so `C` is diagonal and nonsingular.
    Norton { resistance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshSpec {
    pub rows: usize,
    pub cols: usize,
    /// Resistor range in ohms, sampled log-uniformly.
    pub r_range: (f64, f64),
    /// Capacitor range in farads, sampled log-uniformly.
    pub c_range: (f64, f64),
    /// Open-circuit source voltage.
    pub input: PwlWaveform,
    pub drive: MeshDrive,
    pub seed: u64,
    pub tran: Tran,
}

impl Default for MeshSpec {
    /// 50x50 mesh spanning conductances 1.09e-2..1e2 S and capacitances
    /// 5.04e-19..1e-15 F, driven by a 0 -> 1 V step with a 10 ps rise.
    fn default() -> Self {
        Self {
            rows: 50,
            cols: 50,
            r_range: (1.0 / 1.00e2, 1.0 / 1.09e-2),
            c_range: (5.04e-19, 1.00e-15),
            input: PwlWaveform::step(10e-12, 1.0).expect("valid ramp"),
            drive: MeshDrive::Voltage,
            seed: 1,
            tran: Tran {
                stop: 10e-9,
                step: Some(10e-12),
            },
        }
    }
}

impl MeshSpec {
    pub fn with_size(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidMesh("rows and cols must be at least 1".into()));
        }
        for (what, (lo, hi)) in [("resistance", self.r_range), ("capacitance", self.c_range)] {
            if !(lo > 0.0 && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidMesh(format!(
                    "{what} range must satisfy 0 < min <= max, got ({lo:e}, {hi:e})"
                )));
            }
        }
        if let MeshDrive::Norton { resistance } = self.drive {
            if !(resistance > 0.0 && resistance.is_finite()) {
                return Err(Error::InvalidMesh("drive resistance must be positive".into()));
            }
        }
        if !(self.tran.stop > 0.0) {
            return Err(Error::InvalidMesh("stop time must be positive".into()));
        }
        Ok(())
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    let u: f64 = rng.random();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(lo, hi)
}

pub fn node_label(r: usize, c: usize) -> String {
    format!("n{r}_{c}")
}

/// Builds a `rows x cols` RC grid: log-uniform resistors between 4-neighbours,
/// one capacitor per node to ground and the source at node (0,0). The probe
/// is the opposite corner. Output is a pure function of `spec`.
pub fn generate_pdn_mesh(spec: &MeshSpec) -> Result<Netlist> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut elements = Vec::with_capacity(3 * spec.rows * spec.cols + 2);

    let mut nr = 0usize;
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let here = node_label(r, c);
            if c + 1 < spec.cols {
                nr += 1;
                let v = log_uniform(&mut rng, spec.r_range);
                elements.push(Element::resistor(&format!("R{nr}"), &here, &node_label(r, c + 1), v));
            }
            if r + 1 < spec.rows {
                nr += 1;
                let v = log_uniform(&mut rng, spec.r_range);
                elements.push(Element::resistor(&format!("R{nr}"), &here, &node_label(r + 1, c), v));
            }
        }
    }
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let v = log_uniform(&mut rng, spec.c_range);
            if (r, c) == (0, 0) && spec.drive == MeshDrive::Voltage {
                continue;
            }
            elements.push(Element::capacitor(&format!("C{}_{}", r, c), &node_label(r, c), "0", v));
        }
    }

    let corner = node_label(0, 0);
    match spec.drive {
        MeshDrive::Voltage => {
            elements.push(Element::vsource("Vin", &corner, "0", SourceValue::Pwl(spec.input.clone())));
        }
        MeshDrive::Norton { resistance } => {
            let current = spec.input.scaled(1.0 / resistance);
            elements.push(Element::isource("Iin", "0", &corner, SourceValue::Pwl(current)));
            elements.push(Element::resistor("Rsrc", &corner, "0", resistance));
        }
    }

    Ok(Netlist {
        elements,
        probes: vec![node_label(spec.rows - 1, spec.cols - 1)],
        tran: Some(spec.tran),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::ElementKind;

    #[test]
    fn fifty_by_fifty_has_2500_nodes() {
        let nl = generate_pdn_mesh(&MeshSpec::default()).unwrap();
        assert_eq!(nl.nodes().len(), 2500);
        assert_eq!(nl.count(ElementKind::Resistor), 2 * 50 * 49);
        assert_eq!(nl.count(ElementKind::VoltageSource), 1);
        assert_eq!(nl.probes, vec!["n49_49"]);
    }

    #[test]
    fn values_within_quoted_extremes() {
        let spec = MeshSpec {
            drive: MeshDrive::Norton { resistance: 1.0 },
            ..MeshSpec::default()
        };
        let nl = generate_pdn_mesh(&spec).unwrap();
        for e in &nl.elements {
            match e.kind {
                ElementKind::Capacitor => {
                    let c = e.passive_value().unwrap();
                    assert!((5.04e-19..=1.00e-15).contains(&c), "{c:e}");
                }
                ElementKind::Resistor => {
                    let g = 1.0 / e.passive_value().unwrap();
                    assert!((1.09e-2 * (1.0 - 1e-12)..=1.00e2 * (1.0 + 1e-12)).contains(&g), "{g:e}");
                }
                _ => {}
            }
        }
        assert_eq!(nl.count(ElementKind::Capacitor), 2500);
    }

    #[test]
    fn degenerate_grid() {
        let spec = MeshSpec {
            drive: MeshDrive::Norton { resistance: 1.0 },
            ..MeshSpec::with_size(1, 1)
        };
        let nl = generate_pdn_mesh(&spec).unwrap();
        assert_eq!(nl.nodes(), vec!["n0_0"]);
        assert_eq!(nl.count(ElementKind::Capacitor), 1);
        assert_eq!(nl.sources().count(), 1);

        let v = generate_pdn_mesh(&MeshSpec::with_size(1, 1)).unwrap();
        assert_eq!(v.nodes(), vec!["n0_0"]);
        assert_eq!(v.sources().count(), 1);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_pdn_mesh(&MeshSpec::with_size(7, 5)).unwrap();
        let b = generate_pdn_mesh(&MeshSpec::with_size(7, 5)).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let c = generate_pdn_mesh(&MeshSpec { seed: 2, ..MeshSpec::with_size(7, 5) }).unwrap();
        assert_ne!(a.to_text(), c.to_text());
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_pdn_mesh(&MeshSpec::with_size(0, 3)).is_err());
        let bad = MeshSpec {
            c_range: (1e-15, 1e-16),
            ..MeshSpec::default()
        };
        assert!(matches!(generate_pdn_mesh(&bad), Err(Error::InvalidMesh(_))));
        let bad = MeshSpec {
            r_range: (-1.0, 1.0),
            ..MeshSpec::default()
        };
        assert!(generate_pdn_mesh(&bad).is_err());
    }
}
