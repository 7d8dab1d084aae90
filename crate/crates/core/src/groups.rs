//! SU(2) and SL(2,C) kernel.
//!
//! Conventions:
//!
//! * The Lie algebra basis is `E1 = ½[[0,1],[-1,0]]`, `E2 = ½[[0,i],[i,0]]`,
//!   `E3 = ½[[i,0],[0,-i]]`, with `[E_j, E_k] = ε_jkl E_l`.
//! * The covering map sends `g` to the matrix of `Ad_g` in that basis, so
//!   `diag(e^{iθ/2}, e^{-iθ/2})` is the rotation by `θ` about `e3`. The same
//!   formula evaluated on SL(2,C) gives the complex rotation `R_g ∈ SO(3,C)`.
//! * Irreducible representations are realized on the basis `|j, m⟩` in
//!   ascending `m`. The representation is chosen so that `i dΠ_j(E_k)` are the
//!   Condon–Shortley spin matrices: `S3 = diag(m)` and `S+` has the positive
//!   entries `√(j(j+1) − m(m+1))`. The matrix entries are polynomials in the
//!   entries of `g`, so the same code path serves SU(2) and SL(2,C).
//! * Angular momentum labels are always carried as twice-integers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use nalgebra::Matrix3;
use thiserror::Error;

use crate::linalg::{c, cr, expm2, CMat, CMat2, CMat3, RVec3, C64, I};
use crate::quadrature::{gauss_legendre, periodic_trapezoid};

/// Largest supported `2j`.
pub const MAX_TWICE_J: i32 = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("determinant {0} differs from 1")]
    NotUnimodular(C64),
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("g†g is not a positive definite unimodular matrix")]
    Singular,
}

/// A 2×2 complex unimodular matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    m: CMat2,
    unitary: bool,
}

impl GroupElement {
    pub fn identity() -> Self {
        Self { m: CMat2::identity(), unitary: true }
    }

    /// Wraps a matrix after checking `det = 1` to 1e-12 relative to its size.
    pub fn new(m: CMat2) -> Result<Self, GroupError> {
        let det = m.determinant();
        let scale = m.iter().map(|z| z.norm_sqr()).sum::<f64>().max(1.0);
        if (det - cr(1.0)).norm() > 1e-12 * scale {
            return Err(GroupError::NotUnimodular(det));
        }
        let unitary = unitarity_defect(&m) <= 1e-12;
        Ok(Self { m, unitary })
    }

    /// Wraps a matrix that must lie in SU(2).
    pub fn su2(m: CMat2) -> Result<Self, GroupError> {
        let g = Self::new(m)?;
        let defect = unitarity_defect(&m);
        if defect > 1e-12 {
            return Err(GroupError::NotUnitary(defect));
        }
        Ok(g)
    }

    /// Wraps without validation; the caller guarantees `det = 1`.
    pub(crate) fn from_matrix_unchecked(m: CMat2) -> Self {
        let unitary = unitarity_defect(&m) <= 1e-12;
        Self { m, unitary }
    }

    pub fn matrix(&self) -> &CMat2 {
        &self.m
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn det(&self) -> C64 {
        self.m.determinant()
    }

    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        Self::from_matrix_unchecked(self.m * other.m)
    }

    /// Inverse through the adjugate, exact for `det = 1`.
    pub fn inverse(&self) -> GroupElement {
        let m = &self.m;
        let inv = CMat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]);
        Self { m: inv, unitary: self.unitary }
    }

    pub fn adjoint(&self) -> GroupElement {
        Self { m: self.m.adjoint(), unitary: self.unitary }
    }

    pub fn neg(&self) -> GroupElement {
        Self { m: -self.m, unitary: self.unitary }
    }

    /// `exp(αE3) exp(βE2) exp(γE3)`.
    pub fn from_euler(alpha: f64, beta: f64, gamma: f64) -> GroupElement {
        let a = exp_su2(&AlgebraElement::new(0.0, 0.0, alpha));
        let b = exp_su2(&AlgebraElement::new(0.0, beta, 0.0));
        let g = exp_su2(&AlgebraElement::new(0.0, 0.0, gamma));
        a.mul(&b).mul(&g)
    }

    /// `diag(e^{w/2}, e^{-w/2})`, an element of the complexified diagonal
    /// subgroup.
    pub fn diagonal(w: C64) -> GroupElement {
        let h = (w * 0.5).exp();
        Self::from_matrix_unchecked(CMat2::new(h, cr(0.0), cr(0.0), cr(1.0) / h))
    }
}

fn unitarity_defect(m: &CMat2) -> f64 {
    let p = m.adjoint() * m - CMat2::identity();
    p.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Real coefficients `c_j` of `Σ c_j E_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraElement {
    pub coeffs: [f64; 3],
}

impl AlgebraElement {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Self {
        Self { coeffs: [c1, c2, c3] }
    }

    pub fn from_vector(v: &RVec3) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_matrix(&self) -> CMat2 {
        combine_basis(&[cr(self.coeffs[0]), cr(self.coeffs[1]), cr(self.coeffs[2])])
    }
}

/// The basis matrices `E1, E2, E3`.
pub fn su2_basis() -> [CMat2; 3] {
    let z = cr(0.0);
    [
        CMat2::new(z, cr(0.5), cr(-0.5), z),
        CMat2::new(z, c(0.0, 0.5), c(0.0, 0.5), z),
        CMat2::new(c(0.0, 0.5), z, z, c(0.0, -0.5)),
    ]
}

fn combine_basis(coeffs: &[C64; 3]) -> CMat2 {
    let e = su2_basis();
    e[0] * coeffs[0] + e[1] * coeffs[1] + e[2] * coeffs[2]
}

/// Matrix exponential of `Σ ξ_j E_j`; lands in SU(2).
pub fn exp_su2(xi: &AlgebraElement) -> GroupElement {
    GroupElement::from_matrix_unchecked(expm2(&xi.to_matrix()))
}

/// Matrix exponential of `Σ z_j E_j` with complex coefficients; lands in
/// SL(2,C).
pub fn exp_sl2c(z: &[C64; 3]) -> GroupElement {
    GroupElement::from_matrix_unchecked(expm2(&combine_basis(z)))
}

/// Complex rotation `R_g` with `(R_g)_{kj} = −2 tr(E_k g E_j g⁻¹)`.
pub fn complex_rotation(g: &GroupElement) -> CMat3 {
    let e = su2_basis();
    let gi = g.inverse();
    let mut r = CMat3::zeros();
    for j in 0..3 {
        let ad = g.matrix() * e[j] * gi.matrix();
        for k in 0..3 {
            r[(k, j)] = (e[k] * ad).trace() * -2.0;
        }
    }
    r
}

/// Covering map SU(2) → SO(3).
pub fn covering_map(u: &GroupElement) -> Result<Matrix3<f64>, GroupError> {
    let defect = unitarity_defect(u.matrix());
    if defect > 1e-10 {
        return Err(GroupError::NotUnitary(defect));
    }
    Ok(complex_rotation(u).map(|z| z.re))
}

/// Polar data `g = k · exp(−i s (axis·E))` with `k ∈ SU(2)`, `s ≥ 0`.
/// The positive factor has `g†g` eigenvalues `e^{±s}`.
#[derive(Debug, Clone, Copy)]
pub struct PolarDecomposition {
    pub k: GroupElement,
    pub s: f64,
    pub axis: RVec3,
}

impl PolarDecomposition {
    pub fn positive_part(&self) -> GroupElement {
        let a = self.axis;
        exp_sl2c(&[-I * self.s * a[0], -I * self.s * a[1], -I * self.s * a[2]])
    }
}

/// Radial coordinate of `g`: `cosh s = tr(g†g)/2`.
pub fn radial_coordinate(g: &GroupElement) -> f64 {
    let m = g.matrix();
    let half_trace = 0.5 * m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    half_trace.max(1.0).acosh()
}

pub fn polar_decompose(g: &GroupElement) -> Result<PolarDecomposition, GroupError> {
    let h = g.matrix().adjoint() * g.matrix();
    let t0 = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    // Pauli components of the Hermitian matrix g†g.
    let tx = 0.5 * (h[(0, 1)].re + h[(1, 0)].re);
    let ty = 0.5 * (h[(1, 0)].im - h[(0, 1)].im);
    let tz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let tnorm = (tx * tx + ty * ty + tz * tz).sqrt();
    if !(t0.is_finite() && tnorm.is_finite()) || t0 < 1.0 - 1e-9 {
        return Err(GroupError::Singular);
    }
    if (t0 * t0 - tnorm * tnorm - 1.0).abs() > 1e-8 * t0 * t0 {
        return Err(GroupError::Singular);
    }
    let s = tnorm.asinh();
    if tnorm < 1e-300 {
        return Ok(PolarDecomposition { k: *g, s: 0.0, axis: RVec3::new(0.0, 0.0, 1.0) });
    }
    let (ux, uy, uz) = (tx / tnorm, ty / tnorm, tz / tnorm);
    // -i(a·E) = ½(a1 σy + a2 σx + a3 σz), so the Pauli direction (ux,uy,uz)
    // corresponds to axis (uy, ux, uz).
    let axis = RVec3::new(uy, ux, uz);
    let ch = (0.5 * s).cosh();
    let sh = (0.5 * s).sinh();
    let p_inv = CMat2::new(cr(ch - sh * uz), c(-sh * ux, sh * uy), c(-sh * ux, -sh * uy), cr(ch + sh * uz));
    let k = GroupElement::from_matrix_unchecked(g.matrix() * p_inv);
    Ok(PolarDecomposition { k, s, axis })
}

fn factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![1.0_f64; 171];
        for n in 1..t.len() {
            t[n] = t[n - 1] * n as f64;
        }
        t
    })
}

fn ln_factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0.0_f64; 400];
        for n in 1..t.len() {
            t[n] = t[n - 1] + (n as f64).ln();
        }
        t
    })
}

#[inline]
fn fact(n: i32) -> f64 {
    factorials()[n as usize]
}

/// Fixed unitary `P` with `P (iE_k) P⁻¹ = S_k` (spin-½ in the basis
/// `|+½⟩, |−½⟩`).
fn standard_frame() -> CMat2 {
    let h = FRAC_1_SQRT_2;
    CMat2::new(cr(0.0), c(h, h), c(h, -h), cr(0.0))
}

/// Entries `(a, b, c, d)` of `P g P⁻¹`.
fn standard_entries(g: &GroupElement) -> [C64; 4] {
    let p = standard_frame();
    let gh = p * g.matrix() * p;
    [gh[(0, 0)], gh[(0, 1)], gh[(1, 0)], gh[(1, 1)]]
}

/// Powers `z^0..=z^n`.
fn powers(z: C64, n: i32) -> Vec<C64> {
    let mut v = Vec::with_capacity(n as usize + 1);
    let mut acc = cr(1.0);
    for _ in 0..=n {
        v.push(acc);
        acc *= z;
    }
    v
}

struct EntryPowers {
    a: Vec<C64>,
    b: Vec<C64>,
    c: Vec<C64>,
    d: Vec<C64>,
}

impl EntryPowers {
    fn new(entries: [C64; 4], twice_j: i32) -> Self {
        Self {
            a: powers(entries[0], twice_j),
            b: powers(entries[1], twice_j),
            c: powers(entries[2], twice_j),
            d: powers(entries[3], twice_j),
        }
    }

    /// `D^j_{m'm}` with `jp = j + m'`, `jm = j − m'`, `kp = j + m`, `km = j − m`.
    fn entry(&self, jp: i32, jm: i32, kp: i32, km: i32) -> C64 {
        // sum over k: a^{kp-k} c^k b^{jp-kp+k} d^{jm-k}
        let k_min = 0.max(kp - jp);
        let k_max = kp.min(jm);
        let mut sum = cr(0.0);
        for k in k_min..=k_max {
            let denom = fact(k) * fact(kp - k) * fact(jp - kp + k) * fact(jm - k);
            sum += self.a[(kp - k) as usize]
                * self.c[k as usize]
                * self.b[(jp - kp + k) as usize]
                * self.d[(jm - k) as usize]
                / denom;
        }
        sum * (fact(jp) * fact(jm)).sqrt() * (fact(kp) * fact(km)).sqrt()
    }
}

/// Wigner D-matrix `Π_j(g)` by the explicit finite sum in the entries of
/// `g`. Exact in exact arithmetic, but the alternating sum cancels badly
/// once `2j` exceeds about 30; [`wigner_d`] is the accurate path.
pub fn wigner_d_direct(twice_j: i32, g: &GroupElement) -> CMat {
    assert!((0..=MAX_TWICE_J).contains(&twice_j), "2j out of range: {twice_j}");
    let n = (twice_j + 1) as usize;
    let pw = EntryPowers::new(standard_entries(g), twice_j);
    CMat::from_fn(n, n, |row, col| {
        // m' = -j + row, so j + m' = row
        let (jp, jm) = (row as i32, twice_j - row as i32);
        let (kp, km) = (col as i32, twice_j - col as i32);
        pw.entry(jp, jm, kp, km)
    })
}

/// `Π_j(g)` for every `2j = 0..=twice_j_max`, built by coupling
/// `Π_{j−½} ⊗ Π_½` down to spin `j`. Each entry is a combination of four
/// products with nonnegative weights, so nothing cancels for unitary `g`,
/// and every entry stays a polynomial in the entries of `g`.
pub fn wigner_d_ladder(twice_j_max: i32, g: &GroupElement) -> Vec<CMat> {
    assert!((0..=MAX_TWICE_J).contains(&twice_j_max), "2j out of range: {twice_j_max}");
    let half = wigner_d_direct(1, g);
    let mut out = Vec::with_capacity(twice_j_max as usize + 1);
    out.push(CMat::from_element(1, 1, cr(1.0)));
    for n in 1..=twice_j_max as usize {
        let prev = &out[n - 1];
        let nf = n as f64;
        // weight of the spin-up (σ = 1) and spin-down (σ = 0) component
        let w: Vec<[f64; 2]> = (0..=n).map(|i| [((n - i) as f64 / nf).sqrt(), (i as f64 / nf).sqrt()]).collect();
        let mut d = CMat::zeros(n + 1, n + 1);
        for row in 0..=n {
            for col in 0..=n {
                let mut acc = cr(0.0);
                for sp in 0..2 {
                    if w[row][sp] == 0.0 {
                        continue;
                    }
                    for sg in 0..2 {
                        if w[col][sg] == 0.0 {
                            continue;
                        }
                        acc += prev[(row - sp, col - sg)] * half[(sp, sg)] * (w[row][sp] * w[col][sg]);
                    }
                }
                d[(row, col)] = acc;
            }
        }
        out.push(d);
    }
    out
}

/// Wigner D-matrix `Π_j(g)` on the ascending-`m` basis; valid on all of
/// SL(2,C).
pub fn wigner_d(twice_j: i32, g: &GroupElement) -> CMat {
    if twice_j <= 1 {
        return wigner_d_direct(twice_j, g);
    }
    wigner_d_ladder(twice_j, g).pop().expect("nonempty ladder")
}

/// Single entry `Π_j(g)_{m', m}` addressed by twice-integers.
pub fn wigner_d_entry(twice_j: i32, twice_mp: i32, twice_m: i32, g: &GroupElement) -> C64 {
    if twice_mp.abs() > twice_j || twice_m.abs() > twice_j {
        return cr(0.0);
    }
    wigner_d(twice_j, g)[(((twice_j + twice_mp) / 2) as usize, ((twice_j + twice_m) / 2) as usize)]
}

/// Row `m'` of `Π_j(g)`, all columns in ascending order.
pub fn wigner_d_row(twice_j: i32, twice_mp: i32, g: &GroupElement) -> Vec<C64> {
    let d = wigner_d(twice_j, g);
    d.row(((twice_j + twice_mp) / 2) as usize).iter().copied().collect()
}

/// Column `m` of `Π_j(g)`, all rows in ascending order.
pub fn wigner_d_column(twice_j: i32, twice_m: i32, g: &GroupElement) -> Vec<C64> {
    let d = wigner_d(twice_j, g);
    d.column(((twice_j + twice_m) / 2) as usize).iter().copied().collect()
}

/// Condon–Shortley spin matrices `(S1, S2, S3)` for spin `j`, ascending `m`.
/// The generators of the representation satisfy `σ_k = ħ S_k`.
pub fn spin_matrices(twice_j: i32) -> [CMat; 3] {
    let n = (twice_j + 1) as usize;
    let j = 0.5 * twice_j as f64;
    let mut plus = CMat::zeros(n, n);
    let mut s3 = CMat::zeros(n, n);
    for idx in 0..n {
        let m = -j + idx as f64;
        s3[(idx, idx)] = cr(m);
        if idx + 1 < n {
            plus[(idx + 1, idx)] = cr((j * (j + 1.0) - m * (m + 1.0)).sqrt());
        }
    }
    let minus = plus.adjoint();
    let s1 = (&plus + &minus) * cr(0.5);
    let s2 = (&plus - &minus) * c(0.0, -0.5);
    [s1, s2, s3]
}

/// Representation data for `(Π_l, V_l)`: the generators `σ_k` in units of ħ.
#[derive(Debug, Clone)]
pub struct IrrepData {
    pub twice_l: i32,
    pub sigma: [CMat; 3],
}

impl IrrepData {
    pub fn new(twice_l: i32) -> Self {
        Self { twice_l, sigma: spin_matrices(twice_l) }
    }

    pub fn dim(&self) -> usize {
        (self.twice_l + 1) as usize
    }
}

/// Clebsch–Gordan coefficient `⟨j1 m1; j2 m2 | J M⟩` (Condon–Shortley),
/// Racah's closed form. Out-of-range arguments give 0.
pub fn clebsch_gordan(twice_j1: i32, twice_m1: i32, twice_j2: i32, twice_m2: i32, twice_j: i32, twice_m: i32) -> f64 {
    let (j1, m1, j2, m2, j, m) = (twice_j1, twice_m1, twice_j2, twice_m2, twice_j, twice_m);
    if j1 < 0 || j2 < 0 || j < 0 {
        return 0.0;
    }
    if m1 + m2 != m || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    if (j1 + m1) % 2 != 0 || (j2 + m2) % 2 != 0 || (j + m) % 2 != 0 {
        return 0.0;
    }
    if (j1 + j2 + j) % 2 != 0 || j > j1 + j2 || j < (j1 - j2).abs() {
        return 0.0;
    }
    let lf = ln_factorials();
    let h = |x: i32| -> f64 { lf[(x / 2) as usize] };
    let ln_pref = 0.5
        * (((j + 1) as f64).ln() + h(j1 + j2 - j) + h(j1 - j2 + j) + h(-j1 + j2 + j) - h(j1 + j2 + j + 2)
            + h(j1 + m1)
            + h(j1 - m1)
            + h(j2 + m2)
            + h(j2 - m2)
            + h(j + m)
            + h(j - m));
    // k runs over integers; work with twice-k.
    let k_min = 0.max(j2 - j - m1).max(j1 - j + m2);
    let k_max = (j1 + j2 - j).min(j1 - m1).min(j2 + m2);
    let mut sum = 0.0;
    let mut k = k_min;
    while k <= k_max {
        let ln_den =
            h(k) + h(j1 + j2 - j - k) + h(j1 - m1 - k) + h(j2 + m2 - k) + h(j - j2 + m1 + k) + h(j - j1 - m2 + k);
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (ln_pref - ln_den).exp();
        k += 2;
    }
    sum
}

/// Product Euler-angle rule on SU(2) with total weight 1.
///
/// `U = exp(αE3) exp(βE2) exp(γE3)` with Gauss–Legendre in `cos β`
/// and periodic trapezoids in `α ∈ [0, 2π)` and `γ ∈ [0, 4π)`. Integrates
/// every Wigner-D entry with `j ≤ order` exactly.
pub fn haar_quadrature(order: usize) -> Vec<(GroupElement, f64)> {
    assert!(order >= 2, "order must be at least 2");
    haar_grid(order + 1, 2 * order + 2, 4 * order + 2)
}

/// Euler-angle product grid with explicit node counts.
pub fn haar_grid(n_beta: usize, n_alpha: usize, n_gamma: usize) -> Vec<(GroupElement, f64)> {
    let gl = gauss_legendre(n_beta);
    let ta = periodic_trapezoid(n_alpha, 2.0 * PI);
    let tg = periodic_trapezoid(n_gamma, 4.0 * PI);
    let norm = 1.0 / (2.0 * 2.0 * PI * 4.0 * PI);
    let mut out = Vec::with_capacity(n_beta * n_alpha * n_gamma);
    for (x, wb) in gl.nodes.iter().zip(&gl.weights) {
        let beta = x.acos();
        for (alpha, wa) in ta.nodes.iter().zip(&ta.weights) {
            for (gamma, wg) in tg.nodes.iter().zip(&tg.weights) {
                out.push((GroupElement::from_euler(*alpha, beta, *gamma), wb * wa * wg * norm));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_su2(rng: &mut ChaCha8Rng) -> GroupElement {
        let v = RVec3::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
        exp_su2(&AlgebraElement::from_vector(&v))
    }

    #[test]
    fn ladder_matches_the_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for _ in 0..10 {
            let g = random_sl2c(&mut rng, 1.0);
            let ladder = wigner_d_ladder(16, &g);
            for (tj, d) in ladder.iter().enumerate() {
                let direct = wigner_d_direct(tj as i32, &g);
                let scale = max_abs(&direct).max(1.0);
                assert!(max_abs(&(d - &direct)) < 1e-12 * scale, "2j={tj}");
            }
        }
    }

    #[test]
    fn large_spin_matrices_stay_unitary_and_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for tj in [80, 81, 128] {
            let g = random_su2(&mut rng);
            let h = random_su2(&mut rng);
            let dg = wigner_d(tj, &g);
            let n = dg.nrows();
            let defect = max_abs(&(dg.adjoint() * &dg - CMat::identity(n, n)));
            assert!(defect < 1e-9, "2j={tj}: {defect}");
            let prod = max_abs(&(wigner_d(tj, &g.mul(&h)) - &dg * wigner_d(tj, &h)));
            assert!(prod < 1e-9, "2j={tj}: {prod}");
        }
    }

    fn random_sl2c(rng: &mut ChaCha8Rng, smax: f64) -> GroupElement {
        let k = random_su2(rng);
        let mut axis = RVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        axis /= axis.norm();
        let s = rng.gen_range(0.0..smax);
        let p = PolarDecomposition { k: GroupElement::identity(), s, axis }.positive_part();
        k.mul(&p)
    }

    fn to_dyn(m: &CMat2) -> CMat {
        CMat::from_iterator(2, 2, m.iter().cloned())
    }

    fn taylor2(a: &CMat2, terms: usize) -> CMat2 {
        let mut term = CMat2::identity();
        let mut sum = term;
        for k in 1..terms {
            term = term * a / cr(k as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let g = exp_su2(&AlgebraElement::new(0.0, 0.0, 0.0));
        assert_eq!(*g.matrix(), CMat2::identity());
    }

    #[test]
    fn exp_of_e3_is_diagonal_phase() {
        let theta = 0.83;
        let g = exp_su2(&AlgebraElement::new(0.0, 0.0, theta));
        let expected = CMat2::new(c(0.0, theta / 2.0).exp(), cr(0.0), cr(0.0), c(0.0, -theta / 2.0).exp());
        assert!(max_abs(&to_dyn(&(g.matrix() - expected))) < 1e-15);
    }

    #[test]
    fn exp_of_pi_e1_matches_taylor() {
        let xi = AlgebraElement::new(PI, 0.0, 0.0);
        let g = exp_su2(&xi);
        let t = taylor2(&xi.to_matrix(), 20);
        assert!(max_abs(&to_dyn(&(g.matrix() - t))) < 1e-13);
        assert!(g.is_unitary());
    }

    #[test]
    fn basis_commutators() {
        let e = su2_basis();
        for j in 0..3 {
            for k in 0..3 {
                let comm = e[j] * e[k] - e[k] * e[j];
                let mut expected = CMat2::zeros();
                for l in 0..3 {
                    expected += e[l] * cr(crate::linalg::levi_civita(j, k, l));
                }
                assert!(max_abs(&to_dyn(&(comm - expected))) < 1e-15);
            }
        }
    }

    #[test]
    fn covering_map_identity_and_quarter_turn() {
        let r = covering_map(&GroupElement::identity()).unwrap();
        assert!((r - Matrix3::identity()).abs().max() < 1e-15);
        let u = exp_su2(&AlgebraElement::new(0.0, 0.0, PI / 2.0));
        let r = covering_map(&u).unwrap();
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r - expected).abs().max() < 1e-15);
    }

    #[test]
    fn covering_map_is_two_to_one_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let u = random_su2(&mut rng);
            let v = random_su2(&mut rng);
            let ru = covering_map(&u).unwrap();
            let rv = covering_map(&v).unwrap();
            let ruv = covering_map(&u.mul(&v)).unwrap();
            assert!((ruv - ru * rv).abs().max() < 1e-12);
            let rneg = covering_map(&u.neg()).unwrap();
            assert!((rneg - ru).abs().max() < 1e-12);
            assert!((ru.transpose() * ru - Matrix3::identity()).abs().max() < 1e-12);
            assert!((ru.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn covering_map_rejects_non_unitary() {
        let g = GroupElement::diagonal(cr(0.5));
        assert!(matches!(covering_map(&g), Err(GroupError::NotUnitary(_))));
    }

    #[test]
    fn group_element_rejects_bad_determinant() {
        let m = CMat2::new(cr(2.0), cr(0.0), cr(0.0), cr(1.0));
        assert!(matches!(GroupElement::new(m), Err(GroupError::NotUnimodular(_))));
        assert!(GroupElement::su2(GroupElement::diagonal(cr(0.3)).matrix().clone_owned()).is_err());
    }

    #[test]
    fn polar_of_unitary_is_trivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_su2(&mut rng);
        let p = polar_decompose(&u).unwrap();
        assert!(p.s.abs() < 1e-7);
        assert!(max_abs(&to_dyn(&(p.k.matrix() - u.matrix()))) < 1e-12);
    }

    #[test]
    fn polar_of_positive_diagonal() {
        let s = 1.3;
        let g = GroupElement::diagonal(cr(s));
        let p = polar_decompose(&g).unwrap();
        assert!((p.s - s).abs() < 1e-13);
        assert!((p.axis - RVec3::new(0.0, 0.0, 1.0)).norm() < 1e-13);
        assert!(max_abs(&to_dyn(&(p.k.matrix() - CMat2::identity()))) < 1e-13);
    }

    #[test]
    fn polar_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let g = random_sl2c(&mut rng, 4.0);
            let p = polar_decompose(&g).unwrap();
            let rebuilt = p.k.mul(&p.positive_part());
            assert!(max_abs(&to_dyn(&(rebuilt.matrix() - g.matrix()))) < 1e-11);
            assert!(p.k.is_unitary());
            assert!((radial_coordinate(&g) - p.s).abs() < 1e-9);
        }
    }

    #[test]
    fn wigner_d_low_spin_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_sl2c(&mut rng, 1.0);
        // spin 1/2 is g up to the fixed diagonal basis phase diag(e^{-iπ/4}, e^{iπ/4})
        let v = CMat2::new(c(0.0, -PI / 4.0).exp(), cr(0.0), cr(0.0), c(0.0, PI / 4.0).exp());
        let d = wigner_d(1, &g);
        let expected = v * g.matrix() * v.adjoint();
        assert!(max_abs(&(d - to_dyn(&expected))) < 1e-14);
        // diagonal elements of the group are fixed by that change of basis
        let h = GroupElement::diagonal(c(0.4, 1.1));
        assert!(max_abs(&(wigner_d(1, &h) - to_dyn(h.matrix()))) < 1e-15);
        for tj in 0..8 {
            let id = wigner_d(tj, &GroupElement::identity());
            assert!(max_abs(&(id - CMat::identity((tj + 1) as usize, (tj + 1) as usize))) < 1e-14);
        }
    }

    #[test]
    fn wigner_d_is_holomorphic_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..40 {
            let g1 = random_sl2c(&mut rng, 1.0);
            let g2 = random_sl2c(&mut rng, 1.0);
            for tj in 0..=12 {
                let lhs = wigner_d(tj, &g1.mul(&g2));
                let rhs = wigner_d(tj, &g1) * wigner_d(tj, &g2);
                let scale = max_abs(&lhs).max(1.0);
                assert!(max_abs(&(lhs - rhs)) <= 1e-9 * scale, "2j={tj}");
            }
        }
    }

    #[test]
    fn wigner_d_unitary_on_su2() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let u = random_su2(&mut rng);
            for tj in 0..=16 {
                let d = wigner_d(tj, &u);
                let n = (tj + 1) as usize;
                assert!(max_abs(&(d.adjoint() * &d - CMat::identity(n, n))) < 1e-11);
            }
        }
    }

    #[test]
    fn generators_are_condon_shortley_spin_matrices() {
        let t = 1e-6;
        let e_basis = [
            AlgebraElement::new(1.0, 0.0, 0.0),
            AlgebraElement::new(0.0, 1.0, 0.0),
            AlgebraElement::new(0.0, 0.0, 1.0),
        ];
        for tj in 1..6 {
            let s = spin_matrices(tj);
            for k in 0..3 {
                let mut xp = e_basis[k];
                let mut xm = e_basis[k];
                xp.coeffs[k] = t;
                xm.coeffs[k] = -t;
                let dp = wigner_d(tj, &exp_su2(&xp));
                let dm = wigner_d(tj, &exp_su2(&xm));
                let gen = (dp - dm) * c(0.0, 1.0 / (2.0 * t));
                assert!(max_abs(&(gen - &s[k])) < 1e-8, "2j={tj} k={k}");
            }
        }
    }

    #[test]
    fn spin_one_matches_covering_map() {
        // spherical basis ascending m = -1, 0, +1 expressed in Cartesian components
        let h = FRAC_1_SQRT_2;
        let cmat = CMat::from_row_slice(
            3,
            3,
            &[cr(h), cr(0.0), cr(-h), c(0.0, -h), cr(0.0), c(0.0, -h), cr(0.0), cr(1.0), cr(0.0)],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let u = random_su2(&mut rng);
            let r = covering_map(&u).unwrap();
            let d = wigner_d(2, &u);
            let rc = &cmat * d * cmat.adjoint();
            let rdyn = CMat::from_fn(3, 3, |i, j| cr(r[(i, j)]));
            assert!(max_abs(&(rc - rdyn)) < 1e-11);
        }
    }

    #[test]
    fn irrep_generators_close_the_algebra() {
        for tl in 0..6 {
            let irrep = IrrepData::new(tl);
            let s = &irrep.sigma;
            for j in 0..3 {
                for k in 0..3 {
                    let comm = &s[j] * &s[k] - &s[k] * &s[j];
                    let mut expected = CMat::zeros(irrep.dim(), irrep.dim());
                    for l in 0..3 {
                        expected += &s[l] * c(0.0, crate::linalg::levi_civita(j, k, l));
                    }
                    assert!(max_abs(&(comm - expected)) < 1e-12);
                }
            }
            let top = s[2][(irrep.dim() - 1, irrep.dim() - 1)].re;
            assert!((top - 0.5 * tl as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn clebsch_gordan_known_values() {
        assert!((clebsch_gordan(4, 4, 3, 3, 7, 7) - 1.0).abs() < 1e-14);
        assert!((clebsch_gordan(1, 1, 1, -1, 2, 0) - FRAC_1_SQRT_2).abs() < 1e-14);
        assert!((clebsch_gordan(1, 1, 1, -1, 0, 0) - FRAC_1_SQRT_2).abs() < 1e-14);
        assert!((clebsch_gordan(1, -1, 1, 1, 0, 0) + FRAC_1_SQRT_2).abs() < 1e-14);
        assert_eq!(clebsch_gordan(2, 2, 2, 2, 2, 2), 0.0);
        assert_eq!(clebsch_gordan(2, 0, 2, 0, 8, 0), 0.0);
    }

    #[test]
    fn clebsch_gordan_from_ladder_recursion() {
        // Oracle: lower the stretched state |j1+j2, j1+j2> with J- = J1- + J2-.
        fn lower(tj: i32, tm: i32) -> f64 {
            let j = 0.5 * tj as f64;
            let m = 0.5 * tm as f64;
            (j * (j + 1.0) - m * (m - 1.0)).sqrt()
        }
        for (tj1, tj2) in [(1, 1), (2, 1), (2, 2), (3, 2), (4, 3)] {
            let tjt = tj1 + tj2;
            // state as map (m1, m2) -> amplitude
            let mut state = std::collections::BTreeMap::new();
            state.insert((tj1, tj2), 1.0);
            let mut tm = tjt;
            while tm >= -tjt {
                for (&(m1, m2), &amp) in &state {
                    let cg = clebsch_gordan(tj1, m1, tj2, m2, tjt, tm);
                    assert!((cg - amp).abs() < 1e-13, "({tj1},{tj2}) M={tm}");
                }
                let mut next = std::collections::BTreeMap::new();
                for (&(m1, m2), &amp) in &state {
                    if m1 > -tj1 {
                        *next.entry((m1 - 2, m2)).or_insert(0.0) += amp * lower(tj1, m1);
                    }
                    if m2 > -tj2 {
                        *next.entry((m1, m2 - 2)).or_insert(0.0) += amp * lower(tj2, m2);
                    }
                }
                let norm = lower(tjt, tm);
                state = next.into_iter().map(|(k, v)| (k, v / norm)).collect();
                tm -= 2;
            }
        }
    }

    #[test]
    fn clebsch_gordan_orthogonality() {
        for tj1 in 0..=12_i32 {
            for tj2 in 0..=(12 - tj1) {
                let jmin = (tj1 - tj2).abs();
                let jmax = tj1 + tj2;
                // column orthogonality
                for tj in (jmin..=jmax).step_by(2) {
                    for tjp in (jmin..=jmax).step_by(2) {
                        for tm in (-tj.min(tjp)..=tj.min(tjp)).step_by(2) {
                            let mut s = 0.0;
                            for tm1 in (-tj1..=tj1).step_by(2) {
                                let tm2 = tm - tm1;
                                s += clebsch_gordan(tj1, tm1, tj2, tm2, tj, tm)
                                    * clebsch_gordan(tj1, tm1, tj2, tm2, tjp, tm);
                            }
                            let expected = if tj == tjp { 1.0 } else { 0.0 };
                            assert!((s - expected).abs() < 1e-12);
                        }
                    }
                }
                // row orthogonality
                for tm1 in (-tj1..=tj1).step_by(2) {
                    for tm2 in (-tj2..=tj2).step_by(2) {
                        for tm1p in (-tj1..=tj1).step_by(2) {
                            let tm2p = tm1 + tm2 - tm1p;
                            if tm2p.abs() > tj2 {
                                continue;
                            }
                            let mut s = 0.0;
                            for tj in (jmin..=jmax).step_by(2) {
                                s += clebsch_gordan(tj1, tm1, tj2, tm2, tj, tm1 + tm2)
                                    * clebsch_gordan(tj1, tm1p, tj2, tm2p, tj, tm1 + tm2);
                            }
                            let expected = if tm1 == tm1p { 1.0 } else { 0.0 };
                            assert!((s - expected).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn haar_quadrature_peter_weyl() {
        let order = 6;
        let q = haar_quadrature(order);
        let total: f64 = q.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-13);
        for tj in 1..=(2 * order as i32) {
            let mut acc = CMat::zeros((tj + 1) as usize, (tj + 1) as usize);
            for (g, w) in &q {
                acc += wigner_d(tj, g) * cr(*w);
            }
            assert!(max_abs(&acc) < 1e-12, "2j={tj}");
        }
        for tj in 0..=(order as i32) {
            let n = (tj + 1) as usize;
            let mut acc = CMat::zeros(n, n);
            for (g, w) in &q {
                acc += wigner_d(tj, g).map(|z| cr(z.norm_sqr() * w));
            }
            let target = 1.0 / (tj + 1) as f64;
            assert!(acc.iter().all(|z| (z.re - target).abs() < 1e-12), "2j={tj}");
        }
    }

    #[test]
    fn conjugation_symmetry_of_d_matrices() {
        // conj D^j_{m m'}(U) = (-1)^{m-m'} D^j_{-m,-m'}(U) on SU(2)
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let u = random_su2(&mut rng);
        for tj in 0..8 {
            let d = wigner_d(tj, &u);
            let n = (tj + 1) as usize;
            for a in 0..n {
                for b in 0..n {
                    let sign = if (a as i32 - b as i32).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    let lhs = d[(a, b)].conj();
                    let rhs = d[(n - 1 - a, n - 1 - b)] * sign;
                    assert!((lhs - rhs).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn entry_row_column_agree_with_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g = random_sl2c(&mut rng, 1.5);
        for tj in [0, 3, 6] {
            let d = wigner_d(tj, &g);
            for (ia, tmp) in (-tj..=tj).step_by(2).enumerate() {
                let row = wigner_d_row(tj, tmp, &g);
                let col = wigner_d_column(tj, tmp, &g);
                for (ib, tm) in (-tj..=tj).step_by(2).enumerate() {
                    assert_eq!(row[ib], d[(ia, ib)]);
                    assert_eq!(col[ib], d[(ib, ia)]);
                    assert_eq!(wigner_d_entry(tj, tmp, tm, &g), d[(ia, ib)]);
                }
            }
        }
    }
}
