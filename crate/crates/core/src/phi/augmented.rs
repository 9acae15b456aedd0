use nalgebra::{DMatrix, DVector};

use super::{dense_expm, DenseSystem};
use crate::error::{Error, Result};
use crate::mna::MnaSystem;
use crate::sparse::{SparseMatrix, TripletBuilder};

/// The two input columns bordering the augmented pencil:
/// `[(Bu(t+h) - Bu(t)) / h, Bu(t)]`.
///
/// The trailing states are `(tau / theta, 1)` for a time unit `theta`
/// (one second unless rescaled), so the slope column is stored multiplied
/// by `theta` and the nilpotent block is `J / theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct WTilde {
    slope: Vec<f64>,
    offset: Vec<f64>,
    unit: f64,
}

impl WTilde {
    pub fn new(slope: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        if slope.len() != offset.len() {
            return Err(Error::DimensionMismatch {
                expected: slope.len(),
                got: offset.len(),
            });
        }
        Ok(Self {
            slope,
            offset,
            unit: 1.0,
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            slope: vec![0.0; n],
            offset: vec![0.0; n],
            unit: 1.0,
        }
    }

    /// Re-expresses the elapsed-time state in units of `theta` seconds.
    pub fn with_time_unit(mut self, theta: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::InvalidConfig(format!("time unit must be positive, got {theta}")));
        }
        let k = theta / self.unit;
        self.slope.iter_mut().for_each(|s| *s *= k);
        self.unit = theta;
        Ok(self)
    }

    pub fn time_unit(&self) -> f64 {
        self.unit
    }

    /// Input columns for an interval `[t, t+h]` on which every source is affine.
    pub fn from_system(sys: &MnaSystem, t: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidStep(h));
        }
        let offset = sys.eval_b(t);
        let slope = sys
            .eval_b(t + h)
            .iter()
            .zip(&offset)
            .map(|(b1, b0)| (b1 - b0) / h)
            .collect();
        Ok(Self {
            slope,
            offset,
            unit: 1.0,
        })
    }

    pub fn n(&self) -> usize {
        self.slope.len()
    }

    /// Slope column, multiplied by the time unit.
    pub fn slope(&self) -> &[f64] {
        &self.slope
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// `out += k * W y`.
    pub fn apply_acc(&self, y: [f64; 2], k: f64, out: &mut [f64]) {
        let (a, b) = (k * y[0], k * y[1]);
        for ((o, s), w) in out.iter_mut().zip(&self.slope).zip(&self.offset) {
            *o += a * s + b * w;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, 2, |i, j| if j == 0 { self.slope[i] } else { self.offset[i] })
    }
}

/// `C~ x~' = G~ x~` of dimension `n + 2`, where the two trailing states carry
/// the elapsed time and a constant one, so that one exponential advances
/// the state under an affine input.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub c_tilde: SparseMatrix,
    pub g_tilde: SparseMatrix,
    pub w_tilde: WTilde,
}

impl AugmentedSystem {
    /// Nilpotent generator of the input polynomial (unit time scale).
    pub const J: [[f64; 2]; 2] = [[0.0, 1.0], [0.0, 0.0]];
    pub const E2: [f64; 2] = [0.0, 1.0];

    /// Dimension of the original system.
    pub fn n(&self) -> usize {
        self.w_tilde.n()
    }

    /// `[x; e2]`.
    pub fn start_vector(x: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(x.len() + 2);
        v.extend_from_slice(x);
        v.extend_from_slice(&Self::E2);
        v
    }

    /// Assembles `C~ - gamma G~`.
    pub fn shifted(&self, gamma: f64) -> Result<SparseMatrix> {
        self.c_tilde.add_scaled(1.0, &self.g_tilde, -gamma)
    }
}

fn assemble(c: &SparseMatrix, g: &SparseMatrix, w: &WTilde) -> (SparseMatrix, SparseMatrix) {
    let n = c.nrows();
    let mut ct = TripletBuilder::with_capacity(n + 2, n + 2, c.nnz() + 2);
    for (i, j, v) in c.triplets() {
        ct.push(i, j, v);
    }
    ct.push(n, n, 1.0);
    ct.push(n + 1, n + 1, 1.0);
    let mut gt = TripletBuilder::with_capacity(n + 2, n + 2, g.nnz() + 2 * n + 1);
    for (i, j, v) in g.triplets() {
        gt.push(i, j, -v);
    }
    for i in 0..n {
        if w.slope[i] != 0.0 {
            gt.push(i, n, w.slope[i]);
        }
        if w.offset[i] != 0.0 {
            gt.push(i, n + 1, w.offset[i]);
        }
    }
    gt.push(n, n + 1, 1.0 / w.unit);
    (ct.build(), gt.build())
}

/// Augmented pencil for the step `[t, t+h]`.
pub fn build_augmented(sys: &MnaSystem, t: f64, h: f64) -> Result<AugmentedSystem> {
    let w_tilde = WTilde::from_system(sys, t, h)?;
    let (c_tilde, g_tilde) = assemble(&sys.c, &sys.g, &w_tilde);
    Ok(AugmentedSystem {
        c_tilde,
        g_tilde,
        w_tilde,
    })
}

/// `expm(A~ h) [x; e2]` for `A~ = [[A, [s, o]], [0, J]]`, returned as
/// `[x(t+h); h; 1]`.
///
/// The exponential is taken of the diagonally similar matrix whose trailing
/// states are `(sigma tau / h, sigma)`, with `sigma` chosen so the input
/// columns are of unit size; the similarity is undone on the result.
fn balanced_step(
    a: &DMatrix<f64>,
    s: &DVector<f64>,
    o: &DVector<f64>,
    x: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    let n = a.nrows();
    let sigma = (s.amax() * h * h).max(o.amax() * h);
    let sigma = if sigma > 0.0 && sigma.is_finite() { sigma } else { 1.0 };
    let mut m = DMatrix::zeros(n + 2, n + 2);
    m.view_mut((0, 0), (n, n)).copy_from(&(a * h));
    m.view_mut((0, n), (n, 1)).copy_from(&(s * (h * h / sigma)));
    m.view_mut((0, n + 1), (n, 1)).copy_from(&(o * (h / sigma)));
    m[(n, n + 1)] = 1.0;
    let e = dense_expm(&m)?;
    let mut v = DVector::zeros(n + 2);
    v.rows_mut(0, n).copy_from(x);
    v[n + 1] = sigma;
    let mut out = e * v;
    out[n] *= h / sigma;
    out[n + 1] /= sigma;
    Ok(out)
}

/// `[I 0] expm(A~ h) [x; e2]` with `A~ = [[A, C^{-1} W], [0, J]]`, formed densely.
pub fn augmented_dense_step(
    sys: &DenseSystem,
    x: &DVector<f64>,
    f_t: &DVector<f64>,
    f_th: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidStep(h));
    }
    let n = sys.n();
    let c_lu = sys.c.clone().lu();
    if !c_lu.is_invertible() {
        return Err(Error::SingularC);
    }
    let mut rhs = DMatrix::zeros(n, n + 2);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-&sys.g));
    rhs.set_column(n, &((f_th - f_t) / h));
    rhs.set_column(n + 1, f_t);
    let top = c_lu.solve(&rhs).ok_or(Error::SingularC)?;
    let a = top.columns(0, n).into_owned();
    let out = balanced_step(&a, &top.column(n).into_owned(), &top.column(n + 1).into_owned(), x, h)?;
    Ok(out.rows(0, n).into_owned())
}

/// Dense `expm(C~^{-1} G~ h) [x; e2]` for an MNA system with nonsingular `C`.
/// Returns the full augmented vector `[x(t+h); h; 1]`.
pub fn augmented_expm_step(sys: &MnaSystem, x: &[f64], t: f64, h: f64) -> Result<Vec<f64>> {
    let aug = build_augmented(sys, t, h)?;
    let n = sys.n();
    let c_lu = aug.c_tilde.to_dense().lu();
    if !c_lu.is_invertible() {
        return Err(Error::SingularC);
    }
    let full = c_lu.solve(&aug.g_tilde.to_dense()).ok_or(Error::SingularC)?;
    let a = full.view((0, 0), (n, n)).into_owned();
    let s = full.view((0, n), (n, 1)).column(0).into_owned();
    let o = full.view((0, n + 1), (n, 1)).column(0).into_owned();
    let out = balanced_step(&a, &s, &o, &DVector::from_column_slice(x), h)?;
    Ok(out.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mna::build_mna;
    use crate::netlist::parse_netlist;
    use crate::phi::phi_sum_oracle;
    use proptest::prelude::*;

    fn ramp_rc() -> MnaSystem {
        let nl = parse_netlist(
            "I1 0 a PWL(0 0 1e-9 1e-3 2e-9 1e-3)\n\
             R1 a b 100\nR2 b c 200\nR3 c 0 1k\n\
             C1 a 0 1p\nC2 b 0 2p\nC3 c 0 0.5p",
        )
        .unwrap();
        build_mna(&nl).unwrap()
    }

    #[test]
    fn layout_and_nilpotent_tail() {
        let sys = ramp_rc();
        let aug = build_augmented(&sys, 0.0, 0.5e-9).unwrap();
        let n = sys.n();
        assert_eq!(aug.c_tilde.nrows(), n + 2);
        assert_eq!(aug.c_tilde.get(n, n), 1.0);
        assert_eq!(aug.c_tilde.get(n + 1, n + 1), 1.0);
        assert_eq!(aug.g_tilde.get(n, n + 1), 1.0);
        assert_eq!(aug.g_tilde.get(n + 1, n), 0.0);
        assert_eq!(aug.g_tilde.get(0, 0), -sys.g.get(0, 0));
        let j = AugmentedSystem::J;
        let j2 = [
            [j[0][0] * j[0][0] + j[0][1] * j[1][0], j[0][0] * j[0][1] + j[0][1] * j[1][1]],
            [j[1][0] * j[0][0] + j[1][1] * j[1][0], j[1][0] * j[0][1] + j[1][1] * j[1][1]],
        ];
        assert_eq!(j2, [[0.0; 2]; 2]);
        // Slope of 1 mA/ns entering node a.
        let a = sys.node_index("a").unwrap();
        assert!((aug.w_tilde.slope()[a] - 1e6).abs() < 1e-6);
        assert_eq!(aug.w_tilde.offset()[a], 0.0);
    }

    #[test]
    fn constant_input_has_zero_slope() {
        let sys = ramp_rc();
        let w = WTilde::from_system(&sys, 1.2e-9, 0.3e-9).unwrap();
        assert!(w.slope().iter().all(|&s| s == 0.0));
        assert!(w.offset().iter().any(|&s| s != 0.0));
        assert!(matches!(build_augmented(&sys, 0.0, 0.0), Err(Error::InvalidStep(_))));
    }

    #[test]
    fn zero_input_reduces_to_homogeneous_flow() {
        let nl = parse_netlist("I1 0 a 0\nR1 a b 1\nC1 a 0 1\nC2 b 0 2\nR2 b 0 3").unwrap();
        let sys = build_mna(&nl).unwrap();
        let aug = build_augmented(&sys, 0.0, 0.4).unwrap();
        assert!(aug.w_tilde.to_dense().iter().all(|&v| v == 0.0));
        let x = [0.3, -0.7];
        let got = augmented_expm_step(&sys, &x, 0.0, 0.4).unwrap();
        let d = DenseSystem::from_mna(&sys);
        let want = dense_expm(&(d.a().unwrap() * 0.4)).unwrap() * DVector::from_row_slice(&x);
        for i in 0..2 {
            assert!((got[i] - want[i]).abs() <= 1e-15);
        }
        assert_eq!(&got[2..], &[0.4, 1.0]);
    }

    #[test]
    fn ramp_matches_three_term_formula() {
        let sys = ramp_rc();
        let x = [0.01, -0.02, 0.005];
        for &(t, h) in &[(0.0, 1e-9), (0.2e-9, 0.5e-9), (1e-9, 1e-9)] {
            let got = augmented_expm_step(&sys, &x, t, h).unwrap();
            let want = phi_sum_oracle(&sys, &x, t, h).unwrap();
            let scale = want.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for i in 0..3 {
                assert!((got[i] - want[i]).abs() <= 1e-12 * scale, "{t} {h} {i}");
            }
            assert!((got[3] - h).abs() <= 1e-12 * h);
        }
    }

    fn random_dense(n: usize, seed: &[f64]) -> DenseSystem {
        let mut k = 0;
        let mut next = || {
            k += 1;
            seed[k % seed.len()] * ((k * 7919 % 97) as f64 / 97.0 + 0.1)
        };
        let mut g = DMatrix::from_fn(n, n, |_, _| next() - 0.5);
        let mut c = DMatrix::from_fn(n, n, |_, _| 0.2 * (next() - 0.5));
        for i in 0..n {
            g[(i, i)] += n as f64;
            c[(i, i)] += 1.0 + next();
        }
        DenseSystem { c, g }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn augmentation_matches_three_terms(
            n in 1usize..8,
            seed in prop::collection::vec(0.0f64..1.0, 5..20),
            h in 0.01f64..2.0,
        ) {
            let sys = random_dense(n, &seed);
            let x = DVector::from_fn(n, |i, _| seed[i % seed.len()] - 0.5);
            let f_t = DVector::from_fn(n, |i, _| seed[(i + 1) % seed.len()]);
            let f_th = DVector::from_fn(n, |i, _| -seed[(i + 2) % seed.len()]);
            let got = augmented_dense_step(&sys, &x, &f_t, &f_th, h).unwrap();
            let want = super::super::phi_sum_step(&sys, &x, &f_t, &f_th, h).unwrap();
            prop_assert!((&got - &want).norm() <= 1e-10 * want.norm().max(1e-300));
        }
    }
}
