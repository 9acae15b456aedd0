use super::{KrylovBasis, WTilde};
use crate::error::{Error, Result};
use crate::mna::MnaSystem;
use crate::sparse::{sparse_lu, LuFactors, SparseMatrix};

/// Factorization of `C + gamma G` together with the per-step input block.
///
/// The bordered matrix `C~ - gamma G~ = [[C + gamma G, -gamma W], [0, I_J]]`
/// is solved blockwise, so swapping `W` between steps costs nothing.
#[derive(Debug, Clone)]
pub struct BlockLuFactors {
    lu_sub: LuFactors,
    gamma: f64,
    w: Option<WTilde>,
}

impl BlockLuFactors {
    pub fn factor(sys: &MnaSystem, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
        }
        let shifted = sys.c.add_scaled(1.0, &sys.g, gamma)?;
        let lu_sub = sparse_lu(&shifted).map_err(|e| match e {
            Error::Singular { column } => Error::SingularShift { gamma, column },
            other => other,
        })?;
        Ok(Self {
            lu_sub,
            gamma,
            w: None,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.lu_sub.n()
    }

    pub fn lu_sub(&self) -> &LuFactors {
        &self.lu_sub
    }

    /// `(I - gamma J / theta)^{-1}` for the time unit of the current input
    /// block (one second when none is set).
    pub fn i_j_inv(&self) -> [[f64; 2]; 2] {
        let theta = self.w.as_ref().map_or(1.0, WTilde::time_unit);
        [[1.0, self.gamma / theta], [0.0, 1.0]]
    }

    pub fn set_w(&mut self, w: WTilde) -> Result<()> {
        if w.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: w.n(),
            });
        }
        self.w = Some(w);
        Ok(())
    }

    pub fn w(&self) -> Option<&WTilde> {
        self.w.as_ref()
    }

    /// `(C~ - gamma G~)^{-1} C~ v`.
    pub fn solve(&self, sys: &MnaSystem, v: &[f64]) -> Result<Vec<f64>> {
        let w = self.w.as_ref().ok_or(Error::WUnset)?;
        let n = self.n();
        if v.len() != n + 2 {
            return Err(Error::DimensionMismatch {
                expected: n + 2,
                got: v.len(),
            });
        }
        let z2 = [v[n], v[n + 1]];
        let y2 = [z2[0] + self.gamma / w.time_unit() * z2[1], z2[1]];
        let mut rhs = sys.c.mul_vec(&v[..n])?;
        w.apply_acc(y2, self.gamma, &mut rhs);
        let mut y = self.lu_sub.solve(&rhs)?;
        y.extend_from_slice(&y2);
        Ok(y)
    }
}

/// Solver for `C` used where `A~` itself must be applied.
#[derive(Debug, Clone)]
pub enum CInverse {
    Diagonal(Vec<f64>),
    Factored(LuFactors),
}

impl CInverse {
    pub fn new(c: &SparseMatrix) -> Result<Self> {
        if let Some(d) = c.diagonal_only() {
            if d.contains(&0.0) {
                return Err(Error::SingularC);
            }
            return Ok(Self::Diagonal(d));
        }
        sparse_lu(c).map(Self::Factored).map_err(|_| Error::SingularC)
    }

    /// Whether construction needed a sparse factorization.
    pub fn is_factored(&self) -> bool {
        matches!(self, Self::Factored(_))
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Diagonal(d) => Ok(b.iter().zip(d).map(|(x, c)| x / c).collect()),
            Self::Factored(f) => f.solve(b),
        }
    }
}

/// `A~ v = C~^{-1} G~ v`.
pub fn augmented_apply(sys: &MnaSystem, cinv: &CInverse, w: &WTilde, v: &[f64]) -> Result<Vec<f64>> {
    let n = sys.n();
    if v.len() != n + 2 {
        return Err(Error::DimensionMismatch {
            expected: n + 2,
            got: v.len(),
        });
    }
    let mut top = sys.g.mul_vec(&v[..n])?;
    top.iter_mut().for_each(|x| *x = -*x);
    w.apply_acc([v[n], v[n + 1]], 1.0, &mut top);
    let mut out = cinv.solve(&top)?;
    out.push(v[n + 1] / w.time_unit());
    out.push(0.0);
    Ok(out)
}

/// `||(I - gamma A~) v_{m+1}||_2`, the factor that the default error
/// estimate replaces by one.
pub fn exact_rho(b: &KrylovBasis, sys: &MnaSystem, cinv: &CInverse, w: &WTilde) -> Result<f64> {
    if b.is_breakdown() {
        return Ok(0.0);
    }
    let v = b.v_next();
    let av = augmented_apply(sys, cinv, w, v)?;
    Ok(v.iter()
        .zip(&av)
        .map(|(x, a)| (x - b.gamma() * a).powi(2))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mna::build_mna;
    use crate::netlist::parse_netlist;
    use crate::phi::build_augmented;
    use crate::sparse::sparse_lu;
    use nalgebra::DVector;

    fn rc4() -> MnaSystem {
        let nl = parse_netlist(
            "V1 in 0 PWL(0 0 10p 1 1n 1)\nR0 in a 2\nR1 a b 1\nR2 b c 1\nR3 c d 1\nR4 d 0 10\n\
             C1 a 0 1p\nC2 b 0 2p\nC3 c 0 1p\nC4 d 0 3p",
        )
        .unwrap();
        build_mna(&nl).unwrap()
    }

    #[test]
    fn i_j_inverse_is_exact() {
        let sys = rc4();
        let f = BlockLuFactors::factor(&sys, 1e-10).unwrap();
        assert_eq!(f.i_j_inv(), [[1.0, 1e-10], [0.0, 1.0]]);
        let g = f.gamma();
        let i_j = [[1.0, -g], [0.0, 1.0]];
        let inv = f.i_j_inv();
        for r in 0..2 {
            for c in 0..2 {
                let p: f64 = (0..2).map(|k| i_j[r][k] * inv[k][c]).sum();
                assert_eq!(p, if r == c { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn factor_reconstructs_shifted_matrix() {
        let sys = rc4();
        let gamma = 1e-10;
        let f = BlockLuFactors::factor(&sys, gamma).unwrap();
        let a = sys.c.add_scaled(1.0, &sys.g, gamma).unwrap().to_dense();
        let lu = f.lu_sub();
        let prod = lu.l().to_dense() * lu.u().to_dense();
        let scale = a.amax();
        for k in 0..lu.n() {
            for j in 0..lu.n() {
                let want = a[(lu.row_perm()[k], lu.col_perm()[j])];
                assert!((prod[(k, j)] - want).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn w_must_be_set() {
        let sys = rc4();
        let f = BlockLuFactors::factor(&sys, 1e-10).unwrap();
        assert_eq!(f.solve(&sys, &vec![0.0; sys.n() + 2]).unwrap_err(), Error::WUnset);
        assert!(matches!(BlockLuFactors::factor(&sys, 0.0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn tail_only_vector() {
        let sys = rc4();
        let mut f = BlockLuFactors::factor(&sys, 1e-10).unwrap();
        f.set_w(WTilde::zeros(sys.n())).unwrap();
        let mut v = vec![0.0; sys.n() + 2];
        v[sys.n() + 1] = 1.0;
        let y = f.solve(&sys, &v).unwrap();
        assert_eq!(&y[sys.n()..], &[1e-10, 1.0]);
        assert!(y[..sys.n()].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn swapping_w_keeps_factors() {
        let sys = rc4();
        let mut f = BlockLuFactors::factor(&sys, 1e-10).unwrap();
        let before = f.lu_sub().u().clone();
        f.set_w(WTilde::from_system(&sys, 0.0, 1e-11).unwrap()).unwrap();
        let w1 = f.w().unwrap().clone();
        f.set_w(WTilde::from_system(&sys, 1e-11, 1e-9).unwrap()).unwrap();
        assert_ne!(f.w().unwrap(), &w1);
        assert_eq!(f.lu_sub().u(), &before);
    }

    #[test]
    fn matches_dense_bordered_solve() {
        let sys = rc4();
        let gamma = 1e-10;
        let mut f = BlockLuFactors::factor(&sys, gamma).unwrap();
        let aug = build_augmented(&sys, 0.0, 1e-11).unwrap();
        f.set_w(aug.w_tilde.clone()).unwrap();
        let v: Vec<f64> = (0..sys.n() + 2).map(|i| (i as f64 * 0.37).sin()).collect();
        let got = f.solve(&sys, &v).unwrap();
        let m = aug.shifted(gamma).unwrap().to_dense();
        let rhs = aug.c_tilde.to_dense() * DVector::from_row_slice(&v);
        let want = m.lu().solve(&rhs).unwrap();
        let err = (DVector::from_row_slice(&got) - &want).norm();
        assert!(err <= 1e-10 * want.norm());
        // Same answer from one sparse factorization of the assembled pencil.
        let mono = sparse_lu(&aug.shifted(gamma).unwrap()).unwrap().solve(rhs.as_slice()).unwrap();
        let err = (DVector::from_row_slice(&got) - DVector::from_row_slice(&mono)).norm();
        assert!(err <= 1e-12 * want.norm());
    }

    #[test]
    fn tiny_shift_is_near_identity() {
        let nl = parse_netlist("I1 0 a PWL(0 0 1n 1)\nR1 a b 1\nR2 b 0 1\nC1 a 0 1\nC2 b 0 1").unwrap();
        let sys = build_mna(&nl).unwrap();
        let mut f = BlockLuFactors::factor(&sys, 1e-18).unwrap();
        f.set_w(WTilde::from_system(&sys, 0.0, 1e-9).unwrap()).unwrap();
        let v = [0.3, -0.2, 0.1, 1.0];
        let y = f.solve(&sys, &v).unwrap();
        for (a, b) in y.iter().zip(&v) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn c_inverse_variants() {
        let sys = rc4();
        assert!(matches!(CInverse::new(&sys.c), Err(Error::SingularC)));
        let nl = parse_netlist("I1 0 a 1\nR1 a b 1\nC1 a 0 2\nC2 b 0 4\nC3 a b 1").unwrap();
        let sys = build_mna(&nl).unwrap();
        let ci = CInverse::new(&sys.c).unwrap();
        assert!(ci.is_factored());
        let x = ci.solve(&[1.0, 2.0]).unwrap();
        let back = sys.c.mul_vec(&x).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-14 && (back[1] - 2.0).abs() < 1e-14);
    }
}
