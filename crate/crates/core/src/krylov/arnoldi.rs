use nalgebra::{Complex, DMatrix, DVector};

use super::BlockLuFactors;
use crate::error::{Error, Result};
use crate::mna::MnaSystem;
use crate::phi::dense_expm;
use crate::tol::{HAPPY_BREAKDOWN, HESSENBERG_MAX_COND};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthonormal Krylov basis `V_{m+1}` with its Hessenberg matrix
/// `H_{m+1,m}`, grown one column at a time.
#[derive(Debug, Clone)]
pub struct KrylovBasis {
    start: Vec<f64>,
    /// `v_1 .. v_{m+1}`; the last one is zero after a breakdown.
    v: Vec<Vec<f64>>,
    /// Column `j` holds `h_{0..=j+1, j}`.
    h: Vec<Vec<f64>>,
    beta: f64,
    gamma: f64,
    breakdown: bool,
}

impl KrylovBasis {
    /// Empty basis (`m = 0`) seeded with `v0`. `gamma` is the shift of the
    /// operator, zero for the conventional process.
    pub fn new(v0: &[f64], gamma: f64) -> Result<Self> {
        let beta = norm(v0);
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::ZeroStartVector);
        }
        Ok(Self {
            start: v0.to_vec(),
            v: vec![v0.iter().map(|x| x / beta).collect()],
            h: Vec::new(),
            beta,
            gamma,
            breakdown: false,
        })
    }

    pub fn m(&self) -> usize {
        self.h.len()
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn is_breakdown(&self) -> bool {
        self.breakdown
    }

    /// `v_i`, zero-based.
    pub fn v(&self, i: usize) -> &[f64] {
        &self.v[i]
    }

    pub fn v_next(&self) -> &[f64] {
        &self.v[self.m()]
    }

    pub fn h_next(&self) -> f64 {
        self.h.last().map_or(0.0, |c| c[c.len() - 1])
    }

    /// `H_{m+1,m}`.
    pub fn hessenberg(&self) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_fn(m + 1, m, |i, j| self.h[j].get(i).copied().unwrap_or(0.0))
    }

    /// `H_{m,m}`.
    pub fn h_square(&self) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_fn(m, m, |i, j| self.h[j].get(i).copied().unwrap_or(0.0))
    }

    /// Adds one basis vector using `op` as the Krylov operator.
    /// Modified Gram-Schmidt runs twice. A frozen (broken-down) basis is
    /// left untouched.
    pub fn extend<F>(&mut self, mut op: F) -> Result<()>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        if self.breakdown {
            return Ok(());
        }
        let m = self.m();
        let mut w = op(&self.v[m])?;
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut col = vec![0.0; m + 2];
        for _ in 0..2 {
            for (i, vi) in self.v.iter().enumerate() {
                let c = dot(vi, &w);
                col[i] += c;
                w.iter_mut().zip(vi).for_each(|(x, v)| *x -= c * v);
            }
        }
        let hn = norm(&w);
        let h_norm = self
            .h
            .iter()
            .flatten()
            .chain(&col[..m + 1])
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        if hn <= HAPPY_BREAKDOWN * h_norm {
            self.breakdown = true;
            col[m + 1] = 0.0;
            self.v.push(vec![0.0; w.len()]);
        } else {
            col[m + 1] = hn;
            self.v.push(w.into_iter().map(|x| x / hn).collect());
        }
        self.h.push(col);
        Ok(())
    }

    /// `beta V_m y`.
    pub fn combine(&self, y: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (vi, &c) in self.v.iter().zip(y.iter()) {
            let c = c * self.beta;
            out.iter_mut().zip(vi).for_each(|(o, v)| *o += c * v);
        }
        out
    }

    /// `max |V^T V - I|` over the stored nonzero vectors.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = if self.breakdown { self.m() } else { self.m() + 1 };
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..=i {
                let d = dot(&self.v[i], &self.v[j]) - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(d.abs());
            }
        }
        worst
    }
}

/// Builds an `m`-dimensional rational Krylov basis of `(I - gamma A~)^{-1}`
/// started from `v0`.
pub fn rational_arnoldi(
    f: &BlockLuFactors,
    sys: &MnaSystem,
    v0: &[f64],
    m: usize,
) -> Result<KrylovBasis> {
    let mut b = KrylovBasis::new(v0, f.gamma())?;
    for _ in 0..m {
        if b.is_breakdown() {
            break;
        }
        b.extend(|v| f.solve(sys, v))?;
    }
    Ok(b)
}

/// Projected quantities of a basis: `H_{m,m}`, its sorted real spectrum
/// and the scalars of the error estimate.
///
/// Arnoldi on a nonnormal operator can place Ritz values anywhere in its
/// field of values, which for a stiff pencil reaches slightly into the left
/// half-plane. Such a value `mu` gives `e^{alpha (1 - 1/mu)}` an exponent of
/// order `alpha / |mu|`. The modes it stands for decay long before `alpha`,
/// so every evaluation first removes a spectral subspace of `H` on which
/// `|f| <= e^{-DECAY_EXPONENT}`.
///
/// That set, `Re(1/mu) >= 1 + DECAY_EXPONENT / alpha`, is the disk on the
/// diameter `[0, b]` with `b = alpha / (alpha + DECAY_EXPONENT)`. The disk
/// actually removed is widened a little past the origin so that it also
/// takes in the spurious values there, and may be shrunk to keep its
/// boundary clear of the spectrum.
#[derive(Debug, Clone)]
pub struct Projector {
    h: DMatrix<f64>,
    ritz: Vec<Complex<f64>>,
    beta: f64,
    /// `h_{m+1,m}`, zero after a breakdown.
    h_next: f64,
    /// `beta / gamma * h_{m+1,m}`.
    scale: f64,
}

const DECAY_EXPONENT: f64 = 40.0;
/// Widening of the deflation disk past the origin, relative to its diameter.
const DISK_OVERHANG: f64 = 0.1;
/// Number of times the disk is halved looking for a clear boundary.
const DISK_SHRINKS: i32 = 12;
/// Relative clearance of the disk boundary from the spectrum that is
/// accepted as is.
const DISK_CLEARANCE: f64 = 0.05;

/// Disk `|mu - center| < radius` in the Ritz-value plane.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Disk {
    center: f64,
    radius: f64,
}

impl Disk {
    fn on_diameter(b: f64) -> Self {
        let lo = -DISK_OVERHANG * b;
        Self {
            center: 0.5 * (b + lo),
            radius: 0.5 * (b - lo),
        }
    }

    fn contains(&self, z: Complex<f64>) -> bool {
        (z - self.center).norm() < self.radius
    }

    fn clearance(&self, z: Complex<f64>) -> f64 {
        ((z - self.center).norm() - self.radius).abs() / self.radius
    }
}

impl Projector {
    pub fn new(b: &KrylovBasis) -> Result<Self> {
        let m = b.m();
        if m == 0 {
            return Err(Error::SingularHessenberg { m });
        }
        let h = b.h_square();
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let ritz: Vec<Complex<f64>> = h.complex_eigenvalues().iter().copied().collect();
        if ritz.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SpuriousRitz { m });
        }
        let h_next = if b.is_breakdown() { 0.0 } else { b.h_next() };
        Ok(Self {
            h,
            ritz,
            beta: b.beta(),
            h_next,
            scale: b.beta() / b.gamma() * h_next,
        })
    }

    pub fn m(&self) -> usize {
        self.h.nrows()
    }

    pub fn ritz_values(&self) -> &[Complex<f64>] {
        &self.ritz
    }

    /// Ritz values that must be removed whatever `alpha` is: those in the
    /// closed left half-plane and those that make `H` numerically singular.
    fn must_go(&self, z: Complex<f64>) -> bool {
        let top = self.ritz.iter().map(|z| z.norm()).fold(0.0, f64::max);
        z.re <= 0.0 || z.norm() <= 1e-10 * top
    }

    /// The deflation disk for `alpha`, `None` when nothing is removed.
    fn disk(&self, alpha: f64) -> Result<Option<Disk>> {
        let needed = self.ritz.iter().any(|&z| self.must_go(z));
        if !(alpha > 0.0) {
            return if needed {
                Err(Error::SpuriousRitz { m: self.m() })
            } else {
                Ok(None)
            };
        }
        // Largest disk with a clear boundary; failing that, the clearest.
        let b = alpha / (alpha + DECAY_EXPONENT);
        let mut best: Option<(Disk, f64)> = None;
        for k in 0..DISK_SHRINKS {
            let d = Disk::on_diameter(b * 0.5f64.powi(k));
            if self.ritz.iter().any(|&z| self.must_go(z) && !d.contains(z)) {
                break;
            }
            if !self.ritz.iter().any(|&z| d.contains(z)) {
                break;
            }
            let score = self.ritz.iter().map(|&z| d.clearance(z)).fold(f64::INFINITY, f64::min);
            if score >= DISK_CLEARANCE {
                return Ok(Some(d));
            }
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((d, score));
            }
        }
        match best {
            Some((d, _)) if needed => Ok(Some(d)),
            _ if needed => Err(Error::SpuriousRitz { m: self.m() }),
            _ => Ok(None),
        }
    }

    /// Number of Ritz values treated as decayed at `alpha`.
    pub fn deflated(&self, alpha: f64) -> Result<usize> {
        Ok(match self.disk(alpha)? {
            Some(d) => self.ritz.iter().filter(|&&z| d.contains(z)).count(),
            None => 0,
        })
    }

    /// `H` restricted to its slow invariant subspace, extended by the
    /// identity on the fast one, together with `P e_1` for the spectral
    /// projector `P` onto the slow subspace.
    ///
    fn reduced(&self, alpha: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let m = self.m();
        let eye = DMatrix::<f64>::identity(m, m);
        let mut e1 = DVector::zeros(m);
        e1[0] = 1.0;
        let Some(d) = self.disk(alpha)? else {
            return Ok((self.h.clone(), e1));
        };
        let fast = self.ritz.iter().filter(|&&z| d.contains(z)).count();
        if fast == m {
            return Ok((eye, DVector::zeros(m)));
        }
        let p = slow_projector(&self.h, |z| d.contains(z)).ok_or(Error::SpuriousRitz { m })?;
        let idem = norm1(&(&p * &p - &p));
        if !(idem <= 1e-8 * norm1(&p).max(1.0)) {
            return Err(Error::SpuriousRitz { m });
        }
        let hr = &self.h * &p + (&eye - &p);
        Ok((hr, p.column(0).into_owned()))
    }

    /// `y = e^{alpha H~} e_1` and `e_m^T H^{-1} y`, both on the slow
    /// subspace.
    ///
    /// `H^{-1} e^{alpha H~} = E - H~ E`. Forming `H~ E` by multiplication
    /// would amplify the rounding error of `E` by `||H^{-1}||`, which is of
    /// the order of the stiffness ratio, so both blocks come from one
    /// exponential: `expm([[aH~, aH~], [0, aH~]]) = [[E, aH~ E], [0, E]]`.
    pub fn at(&self, alpha: f64) -> Result<(DVector<f64>, f64)> {
        let m = self.m();
        if alpha == 0.0 {
            let mut e1 = DVector::zeros(m);
            e1[0] = 1.0;
            return Ok((e1, 0.0));
        }
        let (hr, pe1) = self.reduced(alpha)?;
        let h_inv = hr
            .clone()
            .try_inverse()
            .ok_or(Error::SingularHessenberg { m })?;
        let cond = norm1(&hr) * norm1(&h_inv);
        if !(cond <= HESSENBERG_MAX_COND) {
            return Err(Error::SingularHessenberg { m });
        }
        let ah = (DMatrix::identity(m, m) - h_inv) * alpha;
        let mut big = DMatrix::zeros(2 * m, 2 * m);
        big.view_mut((0, 0), (m, m)).copy_from(&ah);
        big.view_mut((0, m), (m, m)).copy_from(&ah);
        big.view_mut((m, m), (m, m)).copy_from(&ah);
        let e = dense_expm(&big)?;
        let y = e.view((0, 0), (m, m)) * &pe1;
        let he = e.view((0, m), (m, m)) * &pe1;
        let last = y[m - 1] - he[m - 1] / alpha;
        if !last.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok((y, last))
    }

    /// `beta V_{m+1} H_{m+1,m} H_m^{-1} y`, i.e. `beta V_m y` plus
    /// `beta h_{m+1,m} (e_m^T H^{-1} y) v_{m+1}`.
    ///
    /// The result lies in the range of the shift-invert operator, so the
    /// algebraic part of a singular-`C` state satisfies its constraints up to
    /// rounding; `beta V_m y` alone carries the truncation error into them.
    /// `b` must be the basis this projector was built from, possibly grown.
    pub fn purified(&self, b: &KrylovBasis, y: &DVector<f64>, last: f64) -> Vec<f64> {
        let mut out = b.combine(y);
        let k = self.beta * self.h_next * last;
        if k != 0.0 {
            out.iter_mut().zip(b.v(self.m())).for_each(|(o, v)| *o += k * v);
        }
        out
    }

    /// Error estimate from a precomputed `e_m^T H^{-1} e^{alpha H~} e_1`.
    pub fn error_from(&self, last: f64, rho: f64) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.scale * last.abs() * rho
        }
    }

    /// `(beta / gamma) h_{m+1,m} |e_m^T H^{-1} e^{alpha H~} e_1| rho`.
    pub fn error(&self, alpha: f64, rho: f64) -> Result<f64> {
        let (_, last) = self.at(alpha)?;
        Ok(self.error_from(last, rho))
    }
}

/// Spectral projector of `h` onto the invariant subspace of the
/// eigenvalues outside `fast`, `None` when the split cannot be computed.
///
/// The complex Schur form is reordered by adjacent swaps so that the slow
/// eigenvalues lead, `T = [[T11, T12], [0, T22]]`. With `T11 Y - Y T22 =
/// T12` the projector is `Q [[I, Y], [0, 0]] Q^*`.
fn slow_projector(h: &DMatrix<f64>, fast: impl Fn(Complex<f64>) -> bool) -> Option<DMatrix<f64>> {
    let m = h.nrows();
    let hc: DMatrix<Complex<f64>> = h.map(Complex::from);
    let (mut q, mut t) = hc.try_schur(f64::EPSILON, 10_000)?.unpack();
    for i in 1..m {
        for j in 0..i {
            t[(i, j)] = Complex::from(0.0);
        }
    }
    // Bubble the slow eigenvalues to the top.
    let mut swapped = true;
    while swapped {
        swapped = false;
        for k in 0..m.saturating_sub(1) {
            if !(fast(t[(k, k)]) && !fast(t[(k + 1, k + 1)])) {
                continue;
            }
            // Eigenvector of the 2x2 block for its second eigenvalue.
            let x1 = t[(k, k + 1)];
            let x2 = t[(k + 1, k + 1)] - t[(k, k)];
            let nrm = (x1.norm_sqr() + x2.norm_sqr()).sqrt();
            let (c, s) = if nrm == 0.0 {
                (Complex::from(0.0), Complex::from(1.0))
            } else {
                (x1 / nrm, x2 / nrm)
            };
            // G = [[c, -conj(s)], [s, conj(c)]]; T <- G^* T G, Q <- Q G.
            for col in 0..m {
                let (a, b) = (t[(k, col)], t[(k + 1, col)]);
                t[(k, col)] = c.conj() * a + s.conj() * b;
                t[(k + 1, col)] = -s * a + c * b;
            }
            for row in 0..m {
                let (a, b) = (t[(row, k)], t[(row, k + 1)]);
                t[(row, k)] = a * c + b * s;
                t[(row, k + 1)] = -a * s.conj() + b * c.conj();
                let (a, b) = (q[(row, k)], q[(row, k + 1)]);
                q[(row, k)] = a * c + b * s;
                q[(row, k + 1)] = -a * s.conj() + b * c.conj();
            }
            t[(k + 1, k)] = Complex::from(0.0);
            swapped = true;
        }
    }
    let k = (0..m).take_while(|&i| !fast(t[(i, i)])).count();
    if (k..m).any(|i| !fast(t[(i, i)])) {
        return None;
    }
    // Column j of Y: (T11 - t_jj I) y_j = T12[:, j] + sum_{i<j} y_i T22[i, j].
    let r = m - k;
    let mut y = DMatrix::<Complex<f64>>::zeros(k, r);
    for j in 0..r {
        let mut rhs: DVector<Complex<f64>> = t.view((0, k + j), (k, 1)).column(0).into_owned();
        for i in 0..j {
            let tij = t[(k + i, k + j)];
            rhs += y.column(i) * tij;
        }
        let shift = t[(k + j, k + j)];
        for row in (0..k).rev() {
            let mut acc = rhs[row];
            for col in row + 1..k {
                acc -= t[(row, col)] * rhs[col];
            }
            let d = t[(row, row)] - shift;
            if d == Complex::from(0.0) {
                return None;
            }
            rhs[row] = acc / d;
        }
        y.set_column(j, &rhs);
    }
    let mut core = DMatrix::<Complex<f64>>::zeros(m, m);
    for i in 0..k {
        core[(i, i)] = Complex::from(1.0);
    }
    core.view_mut((0, k), (k, r)).copy_from(&y);
    let p = &q * core * q.adjoint();
    let scale = p.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if p.iter().any(|z| !z.re.is_finite() || z.im.abs() > 1e-8 * scale) {
        return None;
    }
    Some(p.map(|z| z.re))
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max)
}

/// `e^{A~ h} v0 ~ beta V_m e^{alpha H~} e_1` with `alpha = h / gamma`.
pub fn eval_expm_action(b: &KrylovBasis, alpha: f64) -> Result<Vec<f64>> {
    if alpha == 0.0 {
        return Ok(b.start().to_vec());
    }
    let (y, _) = Projector::new(b)?.at(alpha)?;
    Ok(b.combine(&y))
}

/// `(beta / gamma) h_{m+1,m} |e_m^T H^{-1} e^{alpha H~} e_1| rho`.
pub fn posterior_error(b: &KrylovBasis, alpha: f64, rho: f64) -> Result<f64> {
    if b.is_breakdown() {
        return Ok(0.0);
    }
    Projector::new(b)?.error(alpha, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::WTilde;
    use crate::mna::build_mna;
    use crate::netlist::{generate_pdn_mesh, parse_netlist, MeshDrive, MeshSpec};
    use crate::phi::{augmented_expm_step, build_augmented, AugmentedSystem, DenseStepper};

    fn mesh(rows: usize, cols: usize, drive: MeshDrive) -> MnaSystem {
        let mut spec = MeshSpec::with_size(rows, cols);
        spec.drive = drive;
        build_mna(&generate_pdn_mesh(&spec).unwrap()).unwrap()
    }

    fn setup(sys: &MnaSystem, gamma: f64, t: f64, h: f64) -> (BlockLuFactors, Vec<f64>) {
        let mut f = BlockLuFactors::factor(sys, gamma).unwrap();
        f.set_w(WTilde::from_system(sys, t, h).unwrap().with_time_unit(gamma).unwrap()).unwrap();
        let x = crate::mna::dc_analysis(sys, &sys.eval_u(0.0)).unwrap();
        (f, AugmentedSystem::start_vector(&x))
    }

    #[test]
    fn zero_start_rejected() {
        assert_eq!(KrylovBasis::new(&[0.0; 3], 1.0).unwrap_err(), Error::ZeroStartVector);
    }

    #[test]
    fn full_dimension_is_exact() {
        let nl = parse_netlist("I1 0 a PWL(0 0 1n 1m)\nR1 a 0 1k\nC1 a 0 1p").unwrap();
        let sys = build_mna(&nl).unwrap();
        let h = 0.4e-9;
        let (f, v0) = setup(&sys, 1e-10, 0.0, h);
        let b = rational_arnoldi(&f, &sys, &v0, 3).unwrap();
        assert!(b.m() <= 3);
        let got = eval_expm_action(&b, h / 1e-10).unwrap();
        let mut want = augmented_expm_step(&sys, &v0[..1], 0.0, h).unwrap();
        want[1] /= 1e-10;
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12 * w.abs().max(1e-3), "{got:?} {want:?}");
        }
    }

    #[test]
    fn alpha_zero_returns_start_exactly() {
        let sys = mesh(4, 5, MeshDrive::Voltage);
        let (f, v0) = setup(&sys, 1e-10, 0.0, 1e-11);
        let b = rational_arnoldi(&f, &sys, &v0, 4).unwrap();
        assert_eq!(eval_expm_action(&b, 0.0).unwrap(), v0);
    }

    #[test]
    fn orthonormal_and_arnoldi_relation() {
        let sys = mesh(10, 10, MeshDrive::Voltage);
        let (f, v0) = setup(&sys, 1e-10, 0.0, 1e-11);
        let b = rational_arnoldi(&f, &sys, &v0, 10).unwrap();
        assert!(b.orthonormality_defect() <= 1e-10);
        let h = b.hessenberg();
        let h_norm = h.norm();
        for j in 0..b.m() {
            let mut r = f.solve(&sys, b.v(j)).unwrap();
            for i in 0..=j + 1 {
                let c = h[(i, j)];
                r.iter_mut().zip(b.v(i)).for_each(|(x, v)| *x -= c * v);
            }
            assert!(norm(&r) <= 1e-10 * h_norm.max(1.0), "column {j}: {}", norm(&r));
        }
    }

    #[test]
    fn spectral_map_of_shift_invert() {
        // mu = 1 / (1 - gamma lambda) between A~ and the solve operator.
        let nl = parse_netlist(
            "I1 0 a PWL(0 0 1n 1m)\nR1 a b 1k\nR2 b c 2k\nR3 c 0 500\nR4 a c 3k\n\
             C1 a 0 1p\nC2 b 0 2p\nC3 c 0 0.5p",
        )
        .unwrap();
        let sys = build_mna(&nl).unwrap();
        let gamma = 1e-9;
        let aug = build_augmented(&sys, 0.0, 1e-9).unwrap();
        let c = aug.c_tilde.to_dense();
        let a = c.clone().lu().solve(&aug.g_tilde.to_dense()).unwrap();
        let mut f = BlockLuFactors::factor(&sys, gamma).unwrap();
        f.set_w(aug.w_tilde.clone()).unwrap();
        let n = sys.n() + 2;
        let mut op = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            op.set_column(j, &DVector::from_vec(f.solve(&sys, &e).unwrap()));
        }
        let mut lam: Vec<f64> = a.complex_eigenvalues().iter().map(|z| 1.0 / (1.0 - gamma * z.re)).collect();
        let mut mu: Vec<f64> = op.complex_eigenvalues().iter().map(|z| z.re).collect();
        lam.sort_by(f64::total_cmp);
        mu.sort_by(f64::total_cmp);
        for (l, m) in lam.iter().zip(&mu) {
            assert!((l - m).abs() <= 1e-8, "{lam:?} {mu:?}");
        }
    }

    #[test]
    fn expm_action_against_dense_oracle() {
        let sys = mesh(4, 5, MeshDrive::Voltage);
        let gamma = 1e-10;
        let h = 1e-11;
        let (f, v0) = setup(&sys, gamma, 0.0, h);
        let b = rational_arnoldi(&f, &sys, &v0, 10).unwrap();
        let got = eval_expm_action(&b, h / gamma).unwrap();
        let mut st = DenseStepper::new(&sys).unwrap();
        let want = st.step(&v0[..sys.n()], &sys.eval_b(0.0), &sys.eval_b(h), h).unwrap();
        let scale = want.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..sys.num_nodes() {
            assert!((got[i] - want[i]).abs() <= 1e-8 * scale.max(1.0), "{i}");
        }
    }

    #[test]
    fn breakdown_gives_zero_error() {
        let nl = parse_netlist("I1 0 a 1m\nR1 a 0 1k\nC1 a 0 1p").unwrap();
        let sys = build_mna(&nl).unwrap();
        let (f, v0) = setup(&sys, 1e-10, 0.0, 1e-9);
        let b = rational_arnoldi(&f, &sys, &v0, 5).unwrap();
        assert!(b.is_breakdown());
        assert!(b.m() < 5);
        assert_eq!(posterior_error(&b, 3.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn error_shrinks_with_dimension() {
        let sys = mesh(10, 10, MeshDrive::Voltage);
        let gamma = 1e-10;
        let h = 1e-11;
        let (f, v0) = setup(&sys, gamma, 0.0, h);
        let mut b = KrylovBasis::new(&v0, gamma).unwrap();
        let mut errs = Vec::new();
        for _ in 0..10 {
            b.extend(|v| f.solve(&sys, v)).unwrap();
            if b.m() >= 2 {
                errs.push(posterior_error(&b, h / gamma, 1.0).unwrap());
            }
        }
        assert!(errs.last().unwrap() < &errs[0], "{errs:?}");
        let n = errs.len();
        assert!(errs[n - 1] <= errs[..n - 2].iter().cloned().fold(f64::INFINITY, f64::min) * 10.0);
    }

    /// Basis whose square Hessenberg matrix is the given upper triangle.
    fn triangular_basis(t: &DMatrix<f64>, h_next: f64) -> KrylovBasis {
        let m = t.nrows();
        let h = (0..m)
            .map(|j| {
                let mut col: Vec<f64> = (0..=j).map(|i| t[(i, j)]).collect();
                col.push(if j + 1 == m { h_next } else { 0.0 });
                col
            })
            .collect();
        KrylovBasis {
            start: vec![1.0; m],
            v: vec![vec![0.0; m]; m + 1],
            h,
            beta: 1.0,
            gamma: 1.0,
            breakdown: false,
        }
    }

    #[test]
    fn slow_projector_is_the_spectral_projector() {
        let x = DMatrix::from_row_slice(3, 3, &[0.01, 1.0, 0.5, 0.0, 0.9, 2.0, 0.0, 0.0, 0.02]);
        let p = slow_projector(&x, |z| z.re < 0.1).unwrap();
        assert!(norm1(&(&p * &p - &p)) < 1e-12);
        assert!(norm1(&(&p * &x - &x * &p)) < 1e-12);
        assert!((p.trace() - 1.0).abs() < 1e-12);
        // The slow eigenvector of a triangular matrix with a leading fast
        // value has a zero first component, so P e_1 = 0.
        assert!(p.column(0).norm() < 1e-12);
    }

    #[test]
    fn negative_ritz_value_is_deflated() {
        let t = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.2, 0.0, 0.5, 0.4, 0.0, 0.0, -1e-7]);
        let p = Projector::new(&triangular_basis(&t, 0.1)).unwrap();
        let alpha = 2.0;
        assert_eq!(p.deflated(alpha).unwrap(), 1);
        let (y, last) = p.at(alpha).unwrap();
        // e_1 lies in the leading invariant block, so the result must be
        // the exponential of that block alone.
        let t11 = t.view((0, 0), (2, 2)).into_owned();
        let a = (DMatrix::identity(2, 2) - t11.clone().try_inverse().unwrap()) * alpha;
        let want = dense_expm(&a).unwrap().column(0).into_owned();
        assert!((y[0] - want[0]).abs() < 1e-12 && (y[1] - want[1]).abs() < 1e-12);
        assert!(y[2].abs() < 1e-12 && last.abs() < 1e-12);
    }

    #[test]
    fn tiny_positive_ritz_value_decays() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1e-12]);
        let p = Projector::new(&triangular_basis(&t, 0.1)).unwrap();
        assert_eq!(p.deflated(1.0).unwrap(), 1);
        assert_eq!(p.deflated(0.0).unwrap_err(), Error::SpuriousRitz { m: 2 });
        let (y, _) = p.at(1.0).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12 && y[1].abs() < 1e-12);
    }

    #[test]
    fn oscillatory_pair_is_kept() {
        // mu = 0.1 +- 0.3i: small real part, yet |f(mu)| = e^{-alpha / 9}.
        let h = DMatrix::from_row_slice(2, 2, &[0.1, -0.3, 0.3, 0.1]);
        let mut b = triangular_basis(&DMatrix::identity(2, 2), 0.1);
        b.h[0] = vec![0.1, 0.3];
        b.h[1] = vec![-0.3, 0.1, 0.1];
        let p = Projector::new(&b).unwrap();
        let alpha = 10.0;
        assert_eq!(p.deflated(alpha).unwrap(), 0);
        let (y, _) = p.at(alpha).unwrap();
        let a = (DMatrix::identity(2, 2) - h.try_inverse().unwrap()) * alpha;
        let want = dense_expm(&a).unwrap().column(0).into_owned();
        assert!((y - want).norm() < 1e-12);
    }
}
