use nalgebra::DVector;

use super::{augmented_apply, CInverse, KrylovBasis, WTilde};
use crate::error::{Error, Result};
use crate::mna::MnaSystem;
use crate::phi::dense_expm;

/// Conventional Arnoldi on `A~ = C~^{-1} G~`. Needs a nonsingular `C`.
pub fn standard_arnoldi(
    sys: &MnaSystem,
    cinv: &CInverse,
    w: &WTilde,
    v0: &[f64],
    m: usize,
) -> Result<KrylovBasis> {
    let mut b = KrylovBasis::new(v0, 0.0)?;
    for _ in 0..m {
        if b.is_breakdown() {
            break;
        }
        b.extend(|v| augmented_apply(sys, cinv, w, v))?;
    }
    Ok(b)
}

/// `e^{A~ h} v0 ~ beta V_m e^{h H_m} e_1`.
pub fn standard_expm_action(b: &KrylovBasis, h: f64) -> Result<Vec<f64>> {
    if b.m() == 0 {
        return Err(Error::SingularHessenberg { m: 0 });
    }
    let e = dense_expm(&(b.h_square() * h))?;
    let y: DVector<f64> = e.column(0).into_owned();
    Ok(b.combine(&y))
}

/// Max-abs error on the first `reference.len()` entries of the conventional
/// approximation at each requested dimension. `dims` must be ascending; the
/// basis is grown incrementally and frozen on breakdown.
pub fn standard_error_profile(
    sys: &MnaSystem,
    cinv: &CInverse,
    w: &WTilde,
    v0: &[f64],
    h: f64,
    reference: &[f64],
    dims: &[usize],
) -> Result<Vec<(usize, f64)>> {
    if dims.windows(2).any(|p| p[0] >= p[1]) || dims.first() == Some(&0) {
        return Err(Error::InvalidConfig("dimensions must be positive and ascending".into()));
    }
    let mut b = KrylovBasis::new(v0, 0.0)?;
    let mut out = Vec::with_capacity(dims.len());
    for &m in dims {
        while b.m() < m && !b.is_breakdown() {
            b.extend(|v| augmented_apply(sys, cinv, w, v))?;
        }
        let x = standard_expm_action(&b, h)?;
        let err = x
            .iter()
            .zip(reference)
            .map(|(a, r)| (a - r).abs())
            .fold(0.0, f64::max);
        out.push((m, err));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{rational_arnoldi, BlockLuFactors, eval_expm_action};
    use crate::mna::build_mna;
    use crate::netlist::{generate_pdn_mesh, parse_netlist, MeshDrive, MeshSpec};
    use crate::phi::{augmented_expm_step, AugmentedSystem};

    #[test]
    fn scalar_decay_is_exact_at_m_one() {
        let nl = parse_netlist("I1 0 a 0\nR1 a 0 1\nC1 a 0 1").unwrap();
        let sys = build_mna(&nl).unwrap();
        let cinv = CInverse::new(&sys.c).unwrap();
        let w = WTilde::zeros(1);
        // Tail set to zero keeps the start vector inside the decaying mode.
        let b = standard_arnoldi(&sys, &cinv, &w, &[1.0, 0.0, 0.0], 1).unwrap();
        let x = standard_expm_action(&b, 0.5).unwrap();
        assert!((x[0] - (-0.5f64).exp()).abs() <= 1e-15);
    }

    #[test]
    fn matches_dense_on_small_system() {
        let nl = parse_netlist(
            "I1 0 a PWL(0 0 1n 1m)\nR1 a b 1k\nR2 b 0 2k\nC1 a 0 1p\nC2 b 0 2p",
        )
        .unwrap();
        let sys = build_mna(&nl).unwrap();
        let cinv = CInverse::new(&sys.c).unwrap();
        let h = 0.5e-9;
        let w = WTilde::from_system(&sys, 0.0, h).unwrap().with_time_unit(h).unwrap();
        let v0 = AugmentedSystem::start_vector(&[0.0, 0.0]);
        let want = augmented_expm_step(&sys, &[0.0, 0.0], 0.0, h).unwrap();
        let prof = standard_error_profile(&sys, &cinv, &w, &v0, h, &want[..2], &[1, 2, 4]).unwrap();
        let scale = want[..2].iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(prof[2].1 <= 1e-10 * scale, "{prof:?}");
    }

    #[test]
    fn non_stiff_mesh_needs_few_vectors() {
        // Uniform values: both methods converge quickly.
        let mut spec = MeshSpec::with_size(2, 5);
        spec.r_range = (1.0, 1.0);
        spec.c_range = (1e-9, 1e-9);
        spec.drive = MeshDrive::Norton { resistance: 1.0 };
        let sys = build_mna(&generate_pdn_mesh(&spec).unwrap()).unwrap();
        let h = 1e-11;
        let gamma = 1e-10;
        let x0 = vec![0.0; sys.n()];
        let v0 = AugmentedSystem::start_vector(&x0);
        let w = WTilde::from_system(&sys, 0.0, h).unwrap().with_time_unit(h).unwrap();
        let want = augmented_expm_step(&sys, &x0, 0.0, h).unwrap();
        let target = 1e-8;
        let cinv = CInverse::new(&sys.c).unwrap();
        let dims: Vec<usize> = (1..=10).collect();
        let prof = standard_error_profile(&sys, &cinv, &w, &v0, h, &want[..sys.n()], &dims).unwrap();
        assert!(prof.iter().any(|&(_, e)| e <= target), "{prof:?}");
        let mut f = BlockLuFactors::factor(&sys, gamma).unwrap();
        f.set_w(w).unwrap();
        let ok = (1..=10).any(|m| {
            let b = rational_arnoldi(&f, &sys, &v0, m).unwrap();
            eval_expm_action(&b, h / gamma)
                .map(|x| x.iter().zip(&want).take(sys.n()).all(|(a, r)| (a - r).abs() <= target))
                .unwrap_or(false)
        });
        assert!(ok);
    }
}
