use nalgebra::DMatrix;

use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `(V - U)^{-1} (V + U)`
fn pade_quotient(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = &v + &u;
    let q = v - u;
    q.lu().solve(&p).ok_or(Error::Singular { column: 0 })
}

fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let a2 = a * a;
    let mut even = DMatrix::identity(n, n) * b[0];
    let mut odd = DMatrix::identity(n, n) * b[1];
    let mut pow = DMatrix::identity(n, n);
    for k in 1..b.len() / 2 {
        pow = &pow * &a2;
        even += &pow * b[2 * k];
        odd += &pow * b[2 * k + 1];
    }
    pade_quotient(a * odd, even)
}

fn pade13(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let b = &PADE13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    pade_quotient(u, v)
}

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants of degree 3..13, selected on the 1-norm.
pub fn dense_expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    assert_eq!(m.nrows(), m.ncols(), "expm needs a square matrix");
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let nrm = norm1(m);
    if nrm == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    for (deg, theta) in THETA {
        if nrm <= theta {
            let coeffs: &[f64] = match deg {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(m, coeffs);
        }
    }
    let s = (nrm / THETA_13).log2().ceil().max(0.0) as i32;
    let scaled = m * 2f64.powi(-s);
    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn zero_gives_identity() {
        assert_eq!(dense_expm(&DMatrix::zeros(3, 3)).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let e = dense_expm(&m).unwrap();
        assert!((e[(0, 0)] - (-1f64).exp()).abs() <= 1e-15);
        assert!((e[(1, 1)] - (-2f64).exp()).abs() <= 1e-15);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn each_pade_degree_on_nilpotent() {
        // exp([[0,a],[0,0]]) = [[1,a],[0,1]] for every scaling regime.
        for a in [1e-3, 0.1, 0.5, 1.5, 4.0, 50.0, 1e4] {
            let m = DMatrix::from_row_slice(2, 2, &[0.0, a, 0.0, 0.0]);
            let e = dense_expm(&m).unwrap();
            let want = DMatrix::from_row_slice(2, 2, &[1.0, a, 0.0, 1.0]);
            assert!(rel(&e, &want) <= 1e-14, "a = {a}");
        }
    }

    #[test]
    fn rotation() {
        let t = 3.0;
        let m = DMatrix::from_row_slice(2, 2, &[0.0, t, -t, 0.0]);
        let e = dense_expm(&m).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
        assert!(rel(&e, &want) <= 1e-14);
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert_eq!(dense_expm(&m).unwrap_err(), Error::NonFinite);
    }
}
