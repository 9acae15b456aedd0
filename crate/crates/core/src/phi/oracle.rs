use nalgebra::{DMatrix, DVector, LU};

use super::dense_expm;
use crate::error::{Error, Result};
use crate::mna::MnaSystem;
use crate::tol::ORACLE_MAX_N;

/// Dense pencil `C x' = -G x + f(t)` with the forcing given as vectors.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub c: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl DenseSystem {
    pub fn from_mna(sys: &MnaSystem) -> Self {
        Self {
            c: sys.c.to_dense(),
            g: sys.g.to_dense(),
        }
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    /// `A = -C^{-1} G`.
    pub fn a(&self) -> Result<DMatrix<f64>> {
        let lu = self.c.clone().lu();
        lu.solve(&(-&self.g)).filter(|_| lu.is_invertible()).ok_or(Error::SingularC)
    }
}

/// Exact step over `[t, t+h]` for an input that is linear on the interval:
///
/// `x(t+h) = e^{Ah} x + (e^{Ah} - I) A^{-1} b(t) + (e^{Ah} - Ah - I) A^{-2} s`
///
/// with `b = C^{-1} f(t)` and `s = C^{-1} (f(t+h) - f(t)) / h`. `A^{-1}` and
/// `A^{-2}` act through solves with `G`, so `C^{-1}` only appears in `A`.
pub fn phi_sum_step(
    sys: &DenseSystem,
    x: &DVector<f64>,
    f_t: &DVector<f64>,
    f_th: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidStep(h));
    }
    let a = sys.a()?;
    let e = dense_expm(&(&a * h))?;
    let g_lu = sys.g.clone().lu();
    if !g_lu.is_invertible() {
        return Err(Error::Singular { column: 0 });
    }
    Ok(combine(&e, &g_lu, &sys.c, x, f_t, f_th, h))
}

/// Term-by-term evaluation given `E = e^{Ah}` and an LU of `G`:
/// `p = A^{-1} b = -G^{-1} f(t)`, `q = A^{-1} s`, `r = A^{-2} s = -G^{-1} C q`,
/// `x(t+h) = E (x + p + r) - p - r - h q`.
fn combine(
    e: &DMatrix<f64>,
    g_lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    c: &DMatrix<f64>,
    x: &DVector<f64>,
    f_t: &DVector<f64>,
    f_th: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let p = -g_lu.solve(f_t).expect("G invertible");
    let slope = (f_th - f_t) / h;
    let q = -g_lu.solve(&slope).expect("G invertible");
    let r = -g_lu.solve(&(c * &q)).expect("G invertible");
    let sum = x + &p + &r;
    e * sum - p - r - q * h
}

/// Dense evaluation of the three matrix-exponential terms on an MNA system
/// with nonsingular `C`. Reference use only.
pub fn phi_sum_oracle(sys: &MnaSystem, x: &[f64], t: f64, h: f64) -> Result<Vec<f64>> {
    let d = DenseSystem::from_mna(sys);
    let f_t = DVector::from_vec(sys.eval_b(t));
    let f_th = DVector::from_vec(sys.eval_b(t + h));
    Ok(phi_sum_step(&d, &DVector::from_column_slice(x), &f_t, &f_th, h)?
        .as_slice()
        .to_vec())
}

/// Dense exact stepper for MNA systems. Variables whose rows and columns
/// of `C` are empty are eliminated through `G`, which handles index-1
/// systems with singular `C`; matrix exponentials are cached per step size.
pub struct DenseStepper {
    dynamic: Vec<usize>,
    algebraic: Vec<usize>,
    n: usize,
    reduced: DenseSystem,
    a: DMatrix<f64>,
    g_lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    g_aa_lu: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    g_ad: DMatrix<f64>,
    /// `G_da G_aa^{-1}`, used to fold algebraic forcing into the reduced system.
    g_da_gaa_inv: DMatrix<f64>,
    cache: Vec<(f64, DMatrix<f64>)>,
}

impl DenseStepper {
    pub fn new(sys: &MnaSystem) -> Result<Self> {
        let n = sys.n();
        if n > ORACLE_MAX_N {
            return Err(Error::SizeCap { n, cap: ORACLE_MAX_N });
        }
        let c = sys.c.to_dense();
        let g = sys.g.to_dense();
        let is_dynamic = |i: usize| c.row(i).iter().any(|&v| v != 0.0) || c.column(i).iter().any(|&v| v != 0.0);
        let (dynamic, algebraic): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| is_dynamic(i));
        let pick = |m: &DMatrix<f64>, rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
        };
        let c_dd = pick(&c, &dynamic, &dynamic);
        let g_dd = pick(&g, &dynamic, &dynamic);
        let g_da = pick(&g, &dynamic, &algebraic);
        let g_ad = pick(&g, &algebraic, &dynamic);
        let g_aa = pick(&g, &algebraic, &algebraic);

        let (g_red, g_aa_lu, g_da_gaa_inv) = if algebraic.is_empty() {
            (g_dd, None, DMatrix::zeros(dynamic.len(), 0))
        } else {
            let lu = g_aa.lu();
            if !lu.is_invertible() {
                // Algebraic block not solvable: the pencil has index > 1.
                return Err(Error::SingularC);
            }
            // (G_aa^{-T} G_da^T)^T = G_da G_aa^{-1}
            let t = g_aa_transpose_solve(&pick(&g, &algebraic, &algebraic), &g_da)?;
            let g_red = &g_dd - &t * &g_ad;
            (g_red, Some(lu), t)
        };
        let reduced = DenseSystem { c: c_dd, g: g_red };
        let a = reduced.a()?;
        let g_lu = reduced.g.clone().lu();
        if !g_lu.is_invertible() {
            return Err(Error::Singular { column: 0 });
        }
        Ok(Self {
            dynamic,
            algebraic,
            n,
            reduced,
            a,
            g_lu,
            g_aa_lu,
            g_ad,
            g_da_gaa_inv,
            cache: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn reduce_forcing(&self, f: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let f_d = DVector::from_iterator(self.dynamic.len(), self.dynamic.iter().map(|&i| f[i]));
        let f_a = DVector::from_iterator(self.algebraic.len(), self.algebraic.iter().map(|&i| f[i]));
        (&f_d - &self.g_da_gaa_inv * &f_a, f_a)
    }

    fn expm_for(&mut self, h: f64) -> Result<usize> {
        if let Some(k) = self.cache.iter().position(|(hc, _)| (hc - h).abs() <= 1e-13 * hc) {
            return Ok(k);
        }
        let e = dense_expm(&(&self.a * h))?;
        self.cache.push((h, e));
        Ok(self.cache.len() - 1)
    }

    /// Advances `x` (full MNA state) over `[t, t+h]` given `f = B u` at both ends.
    pub fn step(&mut self, x: &[f64], f_t: &[f64], f_th: &[f64], h: f64) -> Result<Vec<f64>> {
        if !(h > 0.0) {
            return Err(Error::InvalidStep(h));
        }
        let (fr_th, fa_th) = self.reduce_forcing(f_th);
        if self.dynamic.is_empty() {
            return Ok(self.expand(&DVector::zeros(0), &fa_th));
        }
        let k = self.expm_for(h)?;
        let x_d = DVector::from_iterator(self.dynamic.len(), self.dynamic.iter().map(|&i| x[i]));
        let (fr_t, _) = self.reduce_forcing(f_t);
        let e = &self.cache[k].1;
        let xd_new = combine(e, &self.g_lu, &self.reduced.c, &x_d, &fr_t, &fr_th, h);
        Ok(self.expand(&xd_new, &fa_th))
    }

    /// Rebuilds the full state, solving the algebraic rows for the eliminated
    /// variables.
    fn expand(&self, x_d: &DVector<f64>, f_a: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, &i) in self.dynamic.iter().enumerate() {
            out[i] = x_d[k];
        }
        if let Some(lu) = &self.g_aa_lu {
            let x_a = lu.solve(&(f_a - &self.g_ad * x_d)).expect("G_aa invertible");
            for (k, &i) in self.algebraic.iter().enumerate() {
                out[i] = x_a[k];
            }
        }
        out
    }
}

fn g_aa_transpose_solve(g_aa: &DMatrix<f64>, g_da: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = g_aa.transpose().lu();
    lu.solve(&g_da.transpose())
        .map(|m| m.transpose())
        .ok_or(Error::SingularC)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mna::build_mna;
    use crate::netlist::parse_netlist;

    fn scalar(c: f64, g: f64) -> DenseSystem {
        DenseSystem {
            c: DMatrix::from_element(1, 1, c),
            g: DMatrix::from_element(1, 1, g),
        }
    }

    #[test]
    fn scalar_rc_closed_form() {
        // x' = -x + 1, x(0) = 0: x(1) = 1 - e^{-1}.
        let one = DVector::from_element(1, 1.0);
        let x = phi_sum_step(&scalar(1.0, 1.0), &DVector::zeros(1), &one, &one, 1.0).unwrap();
        assert!((x[0] - 0.6321205588285577).abs() <= 1e-15);
    }

    #[test]
    fn scalar_ramp_closed_form() {
        // x' = -x + t: x(h) = h - 1 + e^{-h} from x(0) = 0.
        let h = 0.7;
        let x = phi_sum_step(
            &scalar(1.0, 1.0),
            &DVector::zeros(1),
            &DVector::zeros(1),
            &DVector::from_element(1, h),
            h,
        )
        .unwrap();
        assert!((x[0] - (h - 1.0 + (-h as f64).exp())).abs() <= 1e-15);
    }

    #[test]
    fn homogeneous_is_plain_exponential() {
        let sys = DenseSystem {
            c: DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]),
            g: DMatrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 2.0]),
        };
        let x = DVector::from_vec(vec![1.0, -0.5]);
        let z = DVector::zeros(2);
        let got = phi_sum_step(&sys, &x, &z, &z, 0.3).unwrap();
        let want = dense_expm(&(sys.a().unwrap() * 0.3)).unwrap() * &x;
        assert!((got - want).norm() <= 1e-15);
    }

    #[test]
    fn tiny_step_is_continuous() {
        let sys = scalar(1e-15, 1.0);
        let tau = 1e-15;
        let h = 1e-15 * tau;
        let x = DVector::from_element(1, 0.25);
        let f = DVector::from_element(1, 1.0);
        let got = phi_sum_step(&sys, &x, &f, &f, h).unwrap();
        assert!((got[0] - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn singular_c_refused() {
        let nl = parse_netlist("V1 a 0 DC 1\nR1 a b 1\nC1 b 0 1").unwrap();
        let sys = build_mna(&nl).unwrap();
        assert_eq!(phi_sum_oracle(&sys, &[0.0; 3], 0.0, 1.0).unwrap_err(), Error::SingularC);
        assert!(matches!(phi_sum_step(&scalar(1.0, 1.0), &DVector::zeros(1), &DVector::zeros(1), &DVector::zeros(1), 0.0), Err(Error::InvalidStep(_))));
    }

    #[test]
    fn stepper_handles_voltage_source_rc() {
        // 1 V step through R = 1 into C = 1: v_c(t) = 1 - e^{-t}.
        let nl = parse_netlist("V1 a 0 DC 1\nR1 a b 1\nC1 b 0 1").unwrap();
        let sys = build_mna(&nl).unwrap();
        let mut st = DenseStepper::new(&sys).unwrap();
        let f = sys.eval_b(0.0);
        let mut x = vec![0.0; 3];
        for _ in 0..4 {
            x = st.step(&x, &f, &f, 0.5).unwrap();
        }
        let b = sys.node_index("b").unwrap();
        assert!((x[b] - (1.0 - (-2f64).exp())).abs() <= 1e-14);
        let a = sys.node_index("a").unwrap();
        assert!((x[a] - 1.0).abs() <= 1e-15);
        // Source current equals minus the resistor current.
        let k = sys.branch_index("V1").unwrap();
        assert!((x[k] + (1.0 - x[b])).abs() <= 1e-14);
    }

    #[test]
    fn stepper_rejects_index_two() {
        // Ideal source directly across a capacitor.
        let nl = parse_netlist("V1 a 0 DC 1\nC1 a 0 1\nR1 a 0 1").unwrap();
        let sys = build_mna(&nl).unwrap();
        assert_eq!(DenseStepper::new(&sys).err(), Some(Error::SingularC));
    }
}
