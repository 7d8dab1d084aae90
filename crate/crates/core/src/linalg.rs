//! Small dense complex linear algebra helpers shared by the other modules.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type CMat2 = Matrix2<C64>;
pub type CMat3 = Matrix3<C64>;
pub type RVec3 = Vector3<f64>;
pub type CVec3 = Vector3<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Levi-Civita symbol on indices 0..3.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Entrywise modulus, as a real-valued complex matrix.
pub fn abs_entries(m: &CMat) -> CMat {
    m.map(|z| cr(z.norm()))
}

fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-18 Taylor
/// polynomial on the scaled matrix (one-norm at most 1/2).
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = one_norm(a);
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let scale = 0.5_f64.powi(squarings as i32);
    let scaled = a * cr(scale);

    // Horner evaluation of sum_{k<=18} X^k / k!
    const DEGREE: usize = 18;
    let id = CMat::identity(n, n);
    let mut result = id.clone();
    for k in (1..=DEGREE).rev() {
        result = &id + (&scaled * result) * cr(1.0 / k as f64);
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

pub fn expm2(a: &CMat2) -> CMat2 {
    let d = CMat::from_iterator(2, 2, a.iter().cloned());
    let e = expm(&d);
    CMat2::from_iterator(e.iter().cloned())
}

pub fn expm3(a: &CMat3) -> CMat3 {
    let d = CMat::from_iterator(3, 3, a.iter().cloned());
    let e = expm(&d);
    CMat3::from_iterator(e.iter().cloned())
}

/// Hermitian inner product, conjugate-linear in the first slot.
pub fn inner(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn cross(a: &RVec3, b: &RVec3) -> RVec3 {
    a.cross(b)
}

/// Cross product of complex 3-vectors (bilinear, no conjugation).
pub fn ccross(a: &CVec3, b: &CVec3) -> CVec3 {
    CVec3::new(a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])
}

/// Bilinear dot product a·b without conjugation.
pub fn cdot(a: &CVec3, b: &CVec3) -> C64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn to_complex3(v: &RVec3) -> CVec3 {
    CVec3::new(cr(v[0]), cr(v[1]), cr(v[2]))
}

/// Neumaier-compensated sum, applied in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
