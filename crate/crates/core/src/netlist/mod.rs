//! Netlist data model, SPICE-subset parser and synthetic mesh generator.

mod mesh;
mod parse;
mod pwl;

use std::fmt::{self, Write as _};

pub use mesh::{generate_pdn_mesh, MeshDrive, MeshSpec};
pub use parse::{parse_netlist, parse_value};
pub use pwl::{next_breakpoint, PwlWaveform};

/// Label of the reference node.
pub const GROUND: &str = "0";

pub fn is_ground(label: &str) -> bool {
    label == GROUND
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Resistor,
    Capacitor,
    Inductor,
    VoltageSource,
    CurrentSource,
}

impl ElementKind {
    pub fn from_prefix(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'R' => Some(Self::Resistor),
            'C' => Some(Self::Capacitor),
            'L' => Some(Self::Inductor),
            'V' => Some(Self::VoltageSource),
            'I' => Some(Self::CurrentSource),
            _ => None,
        }
    }

    pub fn is_source(self) -> bool {
        matches!(self, Self::VoltageSource | Self::CurrentSource)
    }
}

/// Value of an independent source.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceValue {
    Dc(f64),
    Pwl(PwlWaveform),
}

impl SourceValue {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            SourceValue::Dc(v) => *v,
            SourceValue::Pwl(w) => w.eval(t),
        }
    }

    pub fn next_breakpoint(&self, t: f64) -> Option<f64> {
        match self {
            SourceValue::Dc(_) => None,
            SourceValue::Pwl(w) => w.next_breakpoint(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Passive(f64),
    Source(SourceValue),
}

/// One circuit element. Passive values are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    pub name: String,
    pub nodes: (String, String),
    value: Value,
}

impl Element {
    /// Builds a resistor, capacitor or inductor. Panics if `kind` is a source;
    /// the parser reports non-positive values before reaching this point.
    pub fn passive(kind: ElementKind, name: &str, pos: &str, neg: &str, value: f64) -> Self {
        assert!(!kind.is_source(), "passive element expected");
        Self {
            kind,
            name: name.to_string(),
            nodes: (pos.to_string(), neg.to_string()),
            value: Value::Passive(value),
        }
    }

    pub fn source(kind: ElementKind, name: &str, pos: &str, neg: &str, src: SourceValue) -> Self {
        assert!(kind.is_source(), "source element expected");
        Self {
            kind,
            name: name.to_string(),
            nodes: (pos.to_string(), neg.to_string()),
            value: Value::Source(src),
        }
    }

    pub fn resistor(name: &str, pos: &str, neg: &str, ohms: f64) -> Self {
        Self::passive(ElementKind::Resistor, name, pos, neg, ohms)
    }

    pub fn capacitor(name: &str, pos: &str, neg: &str, farads: f64) -> Self {
        Self::passive(ElementKind::Capacitor, name, pos, neg, farads)
    }

    pub fn inductor(name: &str, pos: &str, neg: &str, henries: f64) -> Self {
        Self::passive(ElementKind::Inductor, name, pos, neg, henries)
    }

    pub fn vsource(name: &str, pos: &str, neg: &str, src: SourceValue) -> Self {
        Self::source(ElementKind::VoltageSource, name, pos, neg, src)
    }

    pub fn isource(name: &str, pos: &str, neg: &str, src: SourceValue) -> Self {
        Self::source(ElementKind::CurrentSource, name, pos, neg, src)
    }

    /// Ohms, farads or henries; `None` for sources.
    pub fn passive_value(&self) -> Option<f64> {
        match self.value {
            Value::Passive(v) => Some(v),
            Value::Source(_) => None,
        }
    }

    pub fn source_value(&self) -> Option<&SourceValue> {
        match &self.value {
            Value::Passive(_) => None,
            Value::Source(s) => Some(s),
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.name, self.nodes.0, self.nodes.1)?;
        match &self.value {
            Value::Passive(v) => write!(f, " {v:e}"),
            Value::Source(SourceValue::Dc(v)) => write!(f, " DC {v:e}"),
            Value::Source(SourceValue::Pwl(w)) => {
                f.write_str(" PWL(")?;
                for (i, (t, v)) in w.points().iter().enumerate() {
                    if i > 0 {
                        f.write_char(' ')?;
                    }
                    write!(f, "{t:e} {v:e}")?;
                }
                f.write_char(')')
            }
        }
    }
}

/// `.tran <tstop> [<tstep>]`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tran {
    pub stop: f64,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Netlist {
    pub elements: Vec<Element>,
    pub probes: Vec<String>,
    pub tran: Option<Tran>,
}

impl Netlist {
    /// Non-ground node labels in order of first appearance.
    pub fn nodes(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for e in &self.elements {
            for n in [&e.nodes.0, &e.nodes.1] {
                if !is_ground(n) && seen.insert(n.as_str()) {
                    out.push(n.clone());
                }
            }
        }
        out
    }

    pub fn sources(&self) -> impl Iterator<Item = &Element> {
        self.elements.iter().filter(|e| e.kind.is_source())
    }

    pub fn count(&self, kind: ElementKind) -> usize {
        self.elements.iter().filter(|e| e.kind == kind).count()
    }

    /// Serializes back into the accepted netlist syntax.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.elements {
            let _ = writeln!(s, "{e}");
        }
        if let Some(tran) = self.tran {
            let _ = match tran.step {
                Some(step) => writeln!(s, ".tran {:e} {:e}", tran.stop, step),
                None => writeln!(s, ".tran {:e}", tran.stop),
            };
        }
        if !self.probes.is_empty() {
            let _ = writeln!(s, ".probe {}", self.probes.join(" "));
        }
        s.push_str(".end\n");
        s
    }
}
