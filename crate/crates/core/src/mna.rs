//! Modified nodal analysis: `C x'(t) = -G x(t) + B u(t)`.
//!
//! The state is ordered as node voltages (first appearance in the netlist),
//! then one current per inductor and voltage source in element order.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::netlist::{is_ground, ElementKind, Netlist, PwlWaveform, SourceValue};
use crate::sparse::{sparse_lu, SparseMatrix, TripletBuilder};

#[derive(Debug, Clone)]
pub struct MnaSystem {
    pub c: SparseMatrix,
    pub g: SparseMatrix,
    pub b: SparseMatrix,
    node_labels: Vec<String>,
    node_index: HashMap<String, usize>,
    branch_names: Vec<String>,
    branch_index: HashMap<String, usize>,
    source_names: Vec<String>,
    sources: Vec<SourceValue>,
    probe_labels: Vec<String>,
    probe_rows: Vec<usize>,
}

impl MnaSystem {
    /// State dimension.
    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    pub fn num_nodes(&self) -> usize {
        self.node_labels.len()
    }

    pub fn node_index(&self, label: &str) -> Option<usize> {
        self.node_index.get(label).copied()
    }

    pub fn branch_index(&self, name: &str) -> Option<usize> {
        self.branch_index.get(&name.to_ascii_uppercase()).copied()
    }

    pub fn node_labels(&self) -> &[String] {
        &self.node_labels
    }

    /// Human-readable name of state variable `i`.
    pub fn label(&self, i: usize) -> String {
        if i < self.node_labels.len() {
            self.node_labels[i].clone()
        } else {
            format!("I({})", self.branch_names[i - self.node_labels.len()])
        }
    }

    pub fn sources(&self) -> &[SourceValue] {
        &self.sources
    }

    pub fn source_names(&self) -> &[String] {
        &self.source_names
    }

    pub fn pwl_sources(&self) -> impl Iterator<Item = &PwlWaveform> {
        self.sources.iter().filter_map(|s| match s {
            SourceValue::Pwl(w) => Some(w),
            SourceValue::Dc(_) => None,
        })
    }

    pub fn probe_labels(&self) -> &[String] {
        &self.probe_labels
    }

    pub fn probe_rows(&self) -> &[usize] {
        &self.probe_rows
    }

    /// Source values `u(t)`, one per column of `B`.
    pub fn eval_u(&self, t: f64) -> Vec<f64> {
        self.sources.iter().map(|s| s.eval(t)).collect()
    }

    /// `B u(t)`.
    pub fn eval_b(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.b.mul_vec_acc(&self.eval_u(t), 1.0, &mut out);
        out
    }

    /// Largest absolute source value over all breakpoints.
    pub fn input_amplitude(&self) -> f64 {
        self.sources
            .iter()
            .map(|s| match s {
                SourceValue::Dc(v) => v.abs(),
                SourceValue::Pwl(w) => w.max_abs(),
            })
            .fold(0.0, f64::max)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }
    /// Returns false when `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
        ra != rb
    }
}

/// Stamps `C`, `G` and `B` from a netlist.
pub fn build_mna(nl: &Netlist) -> Result<MnaSystem> {
    let node_labels = nl.nodes();
    let node_index: HashMap<String, usize> = node_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i))
        .collect();
    let nn = node_labels.len();
    // Index nn stands for ground in the connectivity checks.
    let slot = |label: &str| if is_ground(label) { nn } else { node_index[label] };

    let mut conn = UnionFind::new(nn + 1);
    let mut branches = UnionFind::new(nn + 1);
    for e in &nl.elements {
        let (a, b) = (slot(&e.nodes.0), slot(&e.nodes.1));
        if e.kind != ElementKind::CurrentSource {
            conn.union(a, b);
        }
        if matches!(e.kind, ElementKind::Inductor | ElementKind::VoltageSource) && !branches.union(a, b) {
            return Err(Error::SourceLoop(e.name.clone()));
        }
    }
    let ground = conn.find(nn);
    if let Some(i) = (0..nn).find(|&i| conn.find(i) != ground) {
        return Err(Error::FloatingNode(node_labels[i].clone()));
    }

    let branch_names: Vec<String> = nl
        .elements
        .iter()
        .filter(|e| matches!(e.kind, ElementKind::Inductor | ElementKind::VoltageSource))
        .map(|e| e.name.clone())
        .collect();
    let branch_index: HashMap<String, usize> = branch_names
        .iter()
        .enumerate()
        .map(|(k, name)| (name.to_ascii_uppercase(), nn + k))
        .collect();
    let n = nn + branch_names.len();
    let nsrc = nl.sources().count();

    let mut c = TripletBuilder::new(n, n);
    let mut g = TripletBuilder::new(n, n);
    let mut b = TripletBuilder::new(n, nsrc);
    let node = |label: &str| (!is_ground(label)).then(|| node_index[label]);

    let stamp_pair = |m: &mut TripletBuilder, p: Option<usize>, q: Option<usize>, v: f64| {
        if let Some(p) = p {
            m.push(p, p, v);
        }
        if let Some(q) = q {
            m.push(q, q, v);
        }
        if let (Some(p), Some(q)) = (p, q) {
            m.push(p, q, -v);
            m.push(q, p, -v);
        }
    };
    let stamp_incidence = |m: &mut TripletBuilder, p: Option<usize>, q: Option<usize>, k: usize| {
        if let Some(p) = p {
            m.push(p, k, 1.0);
            m.push(k, p, 1.0);
        }
        if let Some(q) = q {
            m.push(q, k, -1.0);
            m.push(k, q, -1.0);
        }
    };

    let mut sources = Vec::with_capacity(nsrc);
    let mut source_names = Vec::with_capacity(nsrc);
    for e in &nl.elements {
        let (p, q) = (node(&e.nodes.0), node(&e.nodes.1));
        match e.kind {
            ElementKind::Resistor => stamp_pair(&mut g, p, q, 1.0 / e.passive_value().unwrap()),
            ElementKind::Capacitor => stamp_pair(&mut c, p, q, e.passive_value().unwrap()),
            ElementKind::Inductor => {
                let k = branch_index[&e.name.to_ascii_uppercase()];
                stamp_incidence(&mut g, p, q, k);
                c.push(k, k, -e.passive_value().unwrap());
            }
            ElementKind::VoltageSource => {
                let k = branch_index[&e.name.to_ascii_uppercase()];
                stamp_incidence(&mut g, p, q, k);
                b.push(k, sources.len(), 1.0);
                sources.push(e.source_value().unwrap().clone());
                source_names.push(e.name.clone());
            }
            ElementKind::CurrentSource => {
                // Positive current flows from n+ through the source to n-.
                if let Some(p) = p {
                    b.push(p, sources.len(), -1.0);
                }
                if let Some(q) = q {
                    b.push(q, sources.len(), 1.0);
                }
                sources.push(e.source_value().unwrap().clone());
                source_names.push(e.name.clone());
            }
        }
    }

    let (probe_labels, probe_rows) = if nl.probes.is_empty() {
        (node_labels.clone(), (0..nn).collect())
    } else {
        let rows = nl
            .probes
            .iter()
            .map(|p| {
                node_index
                    .get(p)
                    .copied()
                    .ok_or_else(|| Error::InvalidConfig(format!("probe `{p}` is not a circuit node")))
            })
            .collect::<Result<Vec<_>>>()?;
        (nl.probes.clone(), rows)
    };

    Ok(MnaSystem {
        c: c.build(),
        g: g.build(),
        b: b.build(),
        node_labels,
        node_index,
        branch_names,
        branch_index,
        source_names,
        sources,
        probe_labels,
        probe_rows,
    })
}

/// Solves `G x = B u0`. Capacitors are open and inductors short through
/// their branch rows.
pub fn dc_analysis(sys: &MnaSystem, u0: &[f64]) -> Result<Vec<f64>> {
    let rhs = sys.b.mul_vec(u0)?;
    let lu = sparse_lu(&sys.g).map_err(|e| match e {
        Error::Singular { column } => Error::SingularDc(sys.label(column)),
        other => other,
    })?;
    lu.solve(&rhs)
}
