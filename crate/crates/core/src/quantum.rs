//! Truncated twisted Hilbert space and its operators.
//!
//! Sections of the charge-`l` line bundle are realized as functions on
//! SU(2) with `f(x·exp(θE3)) = e^{iθl} f(x)`. The orthonormal basis is
//!
//! `f^j_m(x) = √(2j+1) Π_j(x⁻¹)_{l,m}`, `j = |l|, |l|+1, …, j_max`,
//!
//! ordered by ascending `j`, then ascending `m`. In this basis the left
//! regular action is `Π_j` on each shell, so `Ĵ_k = ħ S_k` blockwise.
//! Multiplication by the position `x = r R_x e3` couples neighbouring
//! shells only, so every operator is stored as a banded grid of dense
//! shell blocks.

use rayon::prelude::*;
use thiserror::Error;

use crate::classical::ModelParams;
use crate::groups::{clebsch_gordan, spin_matrices, wigner_d, GroupElement};
use crate::linalg::{c, cr, CMat, CVec, CVec3, RVec3, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("twice_j_max = {twice_j_max} is incompatible with twice_l = {twice_l}")]
    BadTwist { twice_l: i32, twice_j_max: i32 },
    #[error("heat factor exponent {0:.1} would overflow")]
    Overflow(f64),
    #[error("closed-form annihilation operators disagree with the conjugation route (relative residual {0:.3e})")]
    SignMismatch(f64),
    #[error("twist parameter mismatch between space ({space}) and model parameters ({params})")]
    ParamsMismatch { space: i32, params: i32 },
}

/// Index set and parameters of the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistedHilbert {
    pub twice_l: i32,
    pub twice_j_max: i32,
    pub params: ModelParams,
    shells: Vec<i32>,
    offsets: Vec<usize>,
}

/// Builds the truncated space spanned by shells `|l| ≤ j ≤ j_max`.
pub fn build_space(twice_l: i32, twice_j_max: i32, params: ModelParams) -> Result<TwistedHilbert, QuantumError> {
    if twice_j_max < twice_l.abs()
        || (twice_j_max - twice_l).rem_euclid(2) != 0
        || twice_j_max > crate::groups::MAX_TWICE_J
    {
        return Err(QuantumError::BadTwist { twice_l, twice_j_max });
    }
    if params.twice_l != twice_l {
        return Err(QuantumError::ParamsMismatch { space: twice_l, params: params.twice_l });
    }
    let shells: Vec<i32> = (twice_l.abs()..=twice_j_max).step_by(2).collect();
    let mut offsets = Vec::with_capacity(shells.len() + 1);
    let mut acc = 0;
    for tj in &shells {
        offsets.push(acc);
        acc += (*tj + 1) as usize;
    }
    offsets.push(acc);
    Ok(TwistedHilbert { twice_l, twice_j_max, params, shells, offsets })
}

impl TwistedHilbert {
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// `2j` for every shell, ascending.
    pub fn shells(&self) -> &[i32] {
        &self.shells
    }

    pub fn num_shells(&self) -> usize {
        self.shells.len()
    }

    pub fn shell_offset(&self, shell: usize) -> usize {
        self.offsets[shell]
    }

    pub fn shell_dim(&self, shell: usize) -> usize {
        (self.shells[shell] + 1) as usize
    }

    /// Flat index of `|j, m⟩`.
    pub fn index(&self, twice_j: i32, twice_m: i32) -> Option<usize> {
        if twice_m.abs() > twice_j || (twice_j + twice_m) % 2 != 0 {
            return None;
        }
        let shell = self.shell_of(twice_j)?;
        Some(self.offsets[shell] + ((twice_m + twice_j) / 2) as usize)
    }

    pub fn shell_of(&self, twice_j: i32) -> Option<usize> {
        let first = self.twice_l.abs();
        if twice_j < first || twice_j > self.twice_j_max || (twice_j - first) % 2 != 0 {
            return None;
        }
        Some(((twice_j - first) / 2) as usize)
    }

    /// Labels `(2j, 2m)` of a flat index.
    pub fn label(&self, index: usize) -> (i32, i32) {
        let shell = self.offsets.partition_point(|&o| o <= index) - 1;
        let tj = self.shells[shell];
        let k = (index - self.offsets[shell]) as i32;
        (tj, 2 * k - tj)
    }

    /// Number of shells with `j ≤ j_max − 2`, the interior used in reports.
    pub fn interior_shells(&self) -> usize {
        self.num_shells().saturating_sub(2)
    }

    /// Evaluates the section with coefficients `coeffs` at `g ∈ SL(2,C)`.
    pub fn evaluate(&self, coeffs: &CVec, g: &GroupElement) -> C64 {
        let gi = g.inverse();
        let ladder = crate::groups::wigner_d_ladder(self.twice_j_max, &gi);
        let mut sum = cr(0.0);
        for (s, &tj) in self.shells.iter().enumerate() {
            let d = &ladder[tj as usize];
            let row = ((tj + self.twice_l) / 2) as usize;
            let norm = ((tj + 1) as f64).sqrt();
            let off = self.offsets[s];
            for k in 0..d.ncols() {
                sum += coeffs[off + k] * d[(row, k)] * norm;
            }
        }
        sum
    }

    /// Basis function `f^j_m(g)`.
    pub fn basis_value(&self, twice_j: i32, twice_m: i32, g: &GroupElement) -> C64 {
        let gi = g.inverse();
        crate::groups::wigner_d_entry(twice_j, self.twice_l, twice_m, &gi) * ((twice_j + 1) as f64).sqrt()
    }
}

/// Coefficient vector over the twisted basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub coeffs: CVec,
}

impl StateVector {
    pub fn new(coeffs: CVec) -> Self {
        Self { coeffs }
    }

    pub fn zeros(space: &TwistedHilbert) -> Self {
        Self { coeffs: CVec::zeros(space.dim()) }
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// `⟨self, other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        crate::linalg::inner(&self.coeffs, &other.coeffs)
    }
}

/// Operator stored as dense blocks between shells `(out, in)` with
/// `|out − in| ≤ bandwidth`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    shells: Vec<i32>,
    offsets: Vec<usize>,
    bandwidth: usize,
    blocks: Vec<Option<CMat>>,
}

impl BlockOperator {
    pub fn zeros(space: &TwistedHilbert, bandwidth: usize) -> Self {
        Self::zeros_like_shells(space.shells.clone(), space.offsets.clone(), bandwidth)
    }

    fn zeros_like_shells(shells: Vec<i32>, offsets: Vec<usize>, bandwidth: usize) -> Self {
        let n = shells.len();
        let mut blocks = vec![None; n * n];
        for a in 0..n {
            for b in 0..n {
                if a.abs_diff(b) <= bandwidth {
                    let da = (shells[a] + 1) as usize;
                    let db = (shells[b] + 1) as usize;
                    blocks[a * n + b] = Some(CMat::zeros(da, db));
                }
            }
        }
        Self { shells, offsets, bandwidth, blocks }
    }

    pub fn identity(space: &TwistedHilbert) -> Self {
        let mut op = Self::zeros(space, 0);
        for s in 0..space.num_shells() {
            let d = space.shell_dim(s);
            op.set_block(s, s, CMat::identity(d, d));
        }
        op
    }

    /// Diagonal operator with value `f(2j)` on shell `j`.
    pub fn shell_function<F: Fn(i32) -> C64>(space: &TwistedHilbert, f: F) -> Self {
        let mut op = Self::zeros(space, 0);
        for (s, &tj) in space.shells.iter().enumerate() {
            let d = space.shell_dim(s);
            op.set_block(s, s, CMat::identity(d, d) * f(tj));
        }
        op
    }

    pub fn num_shells(&self) -> usize {
        self.shells.len()
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block(&self, out: usize, inp: usize) -> Option<&CMat> {
        let n = self.num_shells();
        if out >= n || inp >= n {
            return None;
        }
        self.blocks[out * n + inp].as_ref()
    }

    pub fn block_mut(&mut self, out: usize, inp: usize) -> Option<&mut CMat> {
        let n = self.num_shells();
        self.blocks[out * n + inp].as_mut()
    }

    pub fn set_block(&mut self, out: usize, inp: usize, m: CMat) {
        assert!(out.abs_diff(inp) <= self.bandwidth, "block outside the band");
        let n = self.num_shells();
        self.blocks[out * n + inp] = Some(m);
    }

    /// Entry at flat indices.
    pub fn entry(&self, row: usize, col: usize) -> C64 {
        let a = self.offsets.partition_point(|&o| o <= row) - 1;
        let b = self.offsets.partition_point(|&o| o <= col) - 1;
        match self.block(a, b) {
            Some(m) => m[(row - self.offsets[a], col - self.offsets[b])],
            None => cr(0.0),
        }
    }

    fn band_partner_range(&self, a: usize, bw: usize) -> std::ops::RangeInclusive<usize> {
        a.saturating_sub(bw)..=(a + bw).min(self.num_shells() - 1)
    }

    /// Product on the truncated space (intermediate shells beyond the
    /// truncation are absent).
    pub fn mul(&self, other: &BlockOperator) -> BlockOperator {
        assert_eq!(self.shells, other.shells, "operators on different spaces");
        let bw = self.bandwidth + other.bandwidth;
        let n = self.num_shells();
        let mut out = Self::zeros_like_shells(self.shells.clone(), self.offsets.clone(), bw);
        let rows: Vec<Vec<(usize, CMat)>> = (0..n)
            .into_par_iter()
            .map(|a| {
                out.band_partner_range(a, bw)
                    .map(|cidx| {
                        let da = (self.shells[a] + 1) as usize;
                        let dc = (self.shells[cidx] + 1) as usize;
                        let mut acc = CMat::zeros(da, dc);
                        for b in self.band_partner_range(a, self.bandwidth) {
                            if let (Some(x), Some(y)) = (self.block(a, b), other.block(b, cidx)) {
                                acc += x * y;
                            }
                        }
                        (cidx, acc)
                    })
                    .collect()
            })
            .collect();
        for (a, row) in rows.into_iter().enumerate() {
            for (cidx, m) in row {
                out.set_block(a, cidx, m);
            }
        }
        out
    }

    fn combine(&self, other: &BlockOperator, fa: C64, fb: C64) -> BlockOperator {
        assert_eq!(self.shells, other.shells, "operators on different spaces");
        let bw = self.bandwidth.max(other.bandwidth);
        let n = self.num_shells();
        let mut out = Self::zeros_like_shells(self.shells.clone(), self.offsets.clone(), bw);
        for a in 0..n {
            for b in out.band_partner_range(a, bw) {
                let target = out.block_mut(a, b).unwrap();
                if let Some(x) = self.block(a, b) {
                    *target += x * fa;
                }
                if let Some(y) = other.block(a, b) {
                    *target += y * fb;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &BlockOperator) -> BlockOperator {
        self.combine(other, cr(1.0), cr(1.0))
    }

    pub fn sub(&self, other: &BlockOperator) -> BlockOperator {
        self.combine(other, cr(1.0), cr(-1.0))
    }

    /// `self + z·other`.
    pub fn add_scaled(&self, other: &BlockOperator, z: C64) -> BlockOperator {
        self.combine(other, cr(1.0), z)
    }

    pub fn scale(&self, z: C64) -> BlockOperator {
        let mut out = self.clone();
        for m in out.blocks.iter_mut().flatten() {
            *m *= z;
        }
        out
    }

    pub fn adjoint(&self) -> BlockOperator {
        let n = self.num_shells();
        let mut out = Self::zeros_like_shells(self.shells.clone(), self.offsets.clone(), self.bandwidth);
        for a in 0..n {
            for b in self.band_partner_range(a, self.bandwidth) {
                if let Some(m) = self.block(b, a) {
                    out.set_block(a, b, m.adjoint());
                }
            }
        }
        out
    }

    /// Entrywise modulus.
    pub fn abs(&self) -> BlockOperator {
        let mut out = self.clone();
        for m in out.blocks.iter_mut().flatten() {
            *m = m.map(|z| cr(z.norm()));
        }
        out
    }

    /// Multiplies block `(out, in)` by `f(2j_out, 2j_in)`.
    pub fn scale_blocks<F: Fn(i32, i32) -> C64>(&self, f: F) -> BlockOperator {
        let n = self.num_shells();
        let mut out = self.clone();
        for a in 0..n {
            for b in 0..n {
                let z = f(self.shells[a], self.shells[b]);
                if let Some(m) = out.blocks[a * n + b].as_mut() {
                    *m *= z;
                }
            }
        }
        out
    }

    /// Multiplies on the left by the shell function `f(2j)`.
    pub fn left_shell_scale<F: Fn(i32) -> C64>(&self, f: F) -> BlockOperator {
        self.scale_blocks(|out, _| f(out))
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        assert_eq!(v.len(), self.dim());
        let n = self.num_shells();
        let parts: Vec<CVec> = (0..n)
            .into_par_iter()
            .map(|a| {
                let mut acc = CVec::zeros((self.shells[a] + 1) as usize);
                for b in self.band_partner_range(a, self.bandwidth) {
                    if let Some(m) = self.block(a, b) {
                        let db = (self.shells[b] + 1) as usize;
                        acc += m * v.rows(self.offsets[b], db);
                    }
                }
                acc
            })
            .collect();
        let mut out = CVec::zeros(self.dim());
        for (a, p) in parts.into_iter().enumerate() {
            out.rows_mut(self.offsets[a], p.len()).copy_from(&p);
        }
        out
    }

    /// Largest entry modulus over blocks with both shells below `window`.
    pub fn max_abs_window(&self, window: usize) -> f64 {
        let n = self.num_shells();
        let w = window.min(n);
        let mut best = 0.0_f64;
        for a in 0..w {
            for b in 0..w {
                if let Some(m) = self.block(a, b) {
                    best = best.max(crate::linalg::max_abs(m));
                }
            }
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_window(self.num_shells())
    }

    pub fn to_dense(&self) -> CMat {
        let dim = self.dim();
        let mut out = CMat::zeros(dim, dim);
        let n = self.num_shells();
        for a in 0..n {
            for b in 0..n {
                if let Some(m) = self.block(a, b) {
                    out.view_mut((self.offsets[a], self.offsets[b]), (m.nrows(), m.ncols())).copy_from(m);
                }
            }
        }
        out
    }
}

/// Vector operator `(V1, V2, V3)`.
pub type VectorOperator = [BlockOperator; 3];

/// `(Ĵ1, Ĵ2, Ĵ3)`, block diagonal with `ħ S_k` on each shell.
pub fn angular_momentum_operators(space: &TwistedHilbert) -> VectorOperator {
    let hbar = space.params.hbar;
    let build = |k: usize| {
        let mut op = BlockOperator::zeros(space, 0);
        for (s, &tj) in space.shells.iter().enumerate() {
            let sm = spin_matrices(tj);
            op.set_block(s, s, &sm[k] * cr(hbar));
        }
        op
    };
    [build(0), build(1), build(2)]
}

/// Cartesian components of the spherical unit vectors, columns `μ = −1, 0, +1`.
pub fn spherical_to_cartesian() -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_row_slice(3, 3, &[cr(h), cr(0.0), cr(-h), c(0.0, -h), cr(0.0), c(0.0, -h), cr(0.0), cr(1.0), cr(0.0)])
}

/// `⟨J M | X_k | j m⟩` from Clebsch–Gordan data.
fn position_element(k: usize, twice_l: i32, tjo: i32, tmo: i32, tji: i32, tmi: i32, r: f64, cmat: &CMat) -> C64 {
    let tmu = tmo - tmi;
    if tmu.abs() > 2 {
        return cr(0.0);
    }
    let mu_idx = ((tmu + 2) / 2) as usize;
    let cg1 = clebsch_gordan(2, 0, tji, twice_l, tjo, twice_l);
    if cg1 == 0.0 {
        return cr(0.0);
    }
    let cg2 = clebsch_gordan(2, tmu, tji, tmi, tjo, tmo);
    let ratio = (((tji + 1) as f64) / ((tjo + 1) as f64)).sqrt();
    cmat[(k, mu_idx)].conj() * (r * ratio * cg1 * cg2)
}

/// `(X1, X2, X3)`: multiplication by the position coordinates. Hermitian by
/// construction: the blocks with `j_out ≥ j_in` come from the coupling
/// formula and the rest are their adjoints.
pub fn position_operators(space: &TwistedHilbert) -> VectorOperator {
    let r = space.params.r;
    let cmat = spherical_to_cartesian();
    let n = space.num_shells();
    let build = |k: usize| {
        let mut op = BlockOperator::zeros(space, 1);
        for a in 0..n {
            for b in a.saturating_sub(1)..=a {
                let (tjo, tji) = (space.shells[a], space.shells[b]);
                let m = CMat::from_fn((tjo + 1) as usize, (tji + 1) as usize, |i, j| {
                    position_element(k, space.twice_l, tjo, 2 * i as i32 - tjo, tji, 2 * j as i32 - tji, r, &cmat)
                });
                if a == b {
                    let herm = (&m + m.adjoint()) * cr(0.5);
                    op.set_block(a, a, herm);
                } else {
                    op.set_block(b, a, m.adjoint());
                    op.set_block(a, b, m);
                }
            }
        }
        op
    };
    [build(0), build(1), build(2)]
}

/// `(U × V)_i = ε_ijk U_j V_k` with `U` on the left.
pub fn cross(u: &VectorOperator, v: &VectorOperator) -> VectorOperator {
    let comp = |i: usize| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        u[j].mul(&v[k]).sub(&u[k].mul(&v[j]))
    };
    [comp(0), comp(1), comp(2)]
}

/// `Σ_k U_k V_k`.
pub fn dot(u: &VectorOperator, v: &VectorOperator) -> BlockOperator {
    u[0].mul(&v[0]).add(&u[1].mul(&v[1])).add(&u[2].mul(&v[2]))
}

/// `P = (1/r²) Ĵ × X`.
pub fn linear_momentum(space: &TwistedHilbert, j: &VectorOperator, x: &VectorOperator) -> VectorOperator {
    let inv = cr(1.0 / (space.params.r * space.params.r));
    let jx = cross(j, x);
    [jx[0].scale(inv), jx[1].scale(inv), jx[2].scale(inv)]
}

/// `j(j+1)` from `2j`.
fn casimir(twice_j: i32) -> f64 {
    let j = 0.5 * twice_j as f64;
    j * (j + 1.0)
}

/// Diagonal heat operator `e^{−t j(j+1)/2}` on each shell.
pub fn heat_operator(space: &TwistedHilbert, t: f64) -> Result<BlockOperator, QuantumError> {
    let exponent = -t * casimir(space.twice_j_max) / 2.0;
    if exponent > 700.0 {
        return Err(QuantumError::Overflow(exponent));
    }
    Ok(BlockOperator::shell_function(space, |tj| cr((-t * casimir(tj) / 2.0).exp())))
}

/// `A_k = H(τ) X_k H(−τ)` with `H(t) = e^{−t Ĵ²/(2ħ²)}`. Since `H` is diagonal
/// over shells the product reduces to rescaling block `(J, j)` by
/// `e^{−τ(J(J+1) − j(j+1))/2}`.
pub fn annihilation_conjugation(space: &TwistedHilbert, x: &VectorOperator) -> Result<VectorOperator, QuantumError> {
    let tau = space.params.tau;
    let exponent = tau * casimir(space.twice_j_max) / 2.0;
    if exponent > 700.0 {
        return Err(QuantumError::Overflow(exponent));
    }
    let f = |tjo: i32, tji: i32| cr((-tau * (casimir(tjo) - casimir(tji)) / 2.0).exp());
    Ok([x[0].scale_blocks(f), x[1].scale_blocks(f), x[2].scale_blocks(f)])
}

/// Scalar coefficient functions multiplying `X`, `P/(mα)` and `B Ĵ/(m²α²r)`
/// in the closed form of the annihilation operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnihilationCoefficients {
    /// `e^c (cosh L̂ + c sinh L̂ / L̂)`
    pub x: f64,
    /// `e^c sinh L̂ / L̂` (times `i/(mα)` in front of `P`)
    pub p: f64,
    /// `Λ = (1 + e^c (c sinh L̂/L̂ − cosh L̂)) / (L̂² − c²)`
    pub lambda: f64,
}

/// `(e^z − 1)/z`.
fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

/// Coefficients at `L̂ = l_hat` and `c = ħ/(2mαr²) = τ/2`.
pub fn annihilation_coefficients(l_hat: f64, c_half: f64) -> AnnihilationCoefficients {
    let ec = c_half.exp();
    let x = ec * (l_hat.cosh() + c_half * sinhc(l_hat));
    let p = ec * sinhc(l_hat);
    // Λ as minus the divided difference of (e^z − 1)/z at z = c ± L̂, which
    // stays finite at L̂ = c.
    let lambda = if l_hat < 1e-6 {
        // L̂ ≥ c always, so this only triggers when both are tiny.
        -0.5
    } else {
        -(phi1(c_half + l_hat) - phi1(c_half - l_hat)) / (2.0 * l_hat)
    };
    AnnihilationCoefficients { x, p, lambda }
}

/// Classical coefficients `(cosh L, sinh L/L, −(cosh L − 1)/L²)` for
/// comparison with [`annihilation_coefficients`] as `ħ → 0`.
pub fn classical_coefficients(l: f64) -> AnnihilationCoefficients {
    let (_, cl) = if l < 1e-4 { (0.0, 0.5 + l * l / 24.0) } else { (0.0, (l.cosh() - 1.0) / (l * l)) };
    AnnihilationCoefficients { x: l.cosh(), p: sinhc(l), lambda: -cl }
}

/// `L̂ = √(Ĵ² + ħ²/4)/(mαr²) = τ (j + ½)` on shell `j`.
pub fn shifted_angular_momentum(twice_j: i32, tau: f64) -> f64 {
    tau * (0.5 * twice_j as f64 + 0.5)
}

fn closed_form_with_sign(
    space: &TwistedHilbert,
    x: &VectorOperator,
    p: &VectorOperator,
    j: &VectorOperator,
    sign: f64,
) -> VectorOperator {
    let prm = &space.params;
    let tau = prm.tau;
    let c_half = 0.5 * tau;
    let coeff = |tj: i32| annihilation_coefficients(shifted_angular_momentum(tj, tau), c_half);
    let ma = prm.m * prm.alpha;
    let j_pref = -sign * prm.b / (ma * ma * prm.r);
    let build = |k: usize| {
        let tx = x[k].left_shell_scale(|tj| cr(coeff(tj).x));
        let tp = p[k].left_shell_scale(|tj| c(0.0, coeff(tj).p / ma));
        let tjk = j[k].left_shell_scale(|tj| cr(coeff(tj).lambda * j_pref));
        tx.add(&tp).add(&tjk)
    };
    [build(0), build(1), build(2)]
}

fn max_relative_gap(a: &VectorOperator, b: &VectorOperator, window: usize) -> f64 {
    let mut worst = 0.0_f64;
    for k in 0..3 {
        let scale = a[k].max_abs_window(window).max(b[k].max_abs_window(window)).max(f64::MIN_POSITIVE);
        worst = worst.max(a[k].sub(&b[k]).max_abs_window(window) / scale);
    }
    worst
}

/// Closed-form annihilation operators with coefficient functions of `Ĵ²`
/// acting from the left. The `Ĵ` term uses the sign `−Λ`; the opposite sign
/// is tried only to report a clear error if the two routes disagree.
pub fn annihilation_closed_form(
    space: &TwistedHilbert,
    x: &VectorOperator,
    p: &VectorOperator,
    j: &VectorOperator,
) -> Result<VectorOperator, QuantumError> {
    let reference = annihilation_conjugation(space, x)?;
    let window = space.interior_shells().max(1);
    let mut best = f64::INFINITY;
    for sign in [1.0, -1.0] {
        let a = closed_form_with_sign(space, x, p, j, sign);
        let gap = max_relative_gap(&a, &reference, window);
        if gap <= 1e-9 {
            return Ok(a);
        }
        best = best.min(gap);
    }
    Err(QuantumError::SignMismatch(best))
}

/// All operators on one space.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub j: VectorOperator,
    pub x: VectorOperator,
    pub p: VectorOperator,
    pub a: VectorOperator,
    pub a_closed: VectorOperator,
}

impl OperatorSet {
    pub fn build(space: &TwistedHilbert) -> Result<Self, QuantumError> {
        let j = angular_momentum_operators(space);
        let x = position_operators(space);
        let p = linear_momentum(space, &j, &x);
        let a = annihilation_conjugation(space, &x)?;
        let a_closed = annihilation_closed_form(space, &x, &p, &j)?;
        Ok(Self { j, x, p, a, a_closed })
    }
}

/// One line of the residual report. Norms are relative: the max-abs
/// residual over the region divided by the max entry of the
/// absolute-value product that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationResidual {
    pub relation: String,
    pub norm_full: f64,
    pub norm_interior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationReport {
    pub twice_l: i32,
    pub twice_j_max: i32,
    pub tau: f64,
    pub residuals: Vec<RelationResidual>,
}

impl RelationReport {
    pub fn get(&self, relation: &str) -> Option<&RelationResidual> {
        self.residuals.iter().find(|r| r.relation == relation)
    }

    pub fn worst_interior(&self) -> f64 {
        self.residuals.iter().map(|r| r.norm_interior).fold(0.0, f64::max)
    }
}

fn relative(residual: &BlockOperator, scale: &BlockOperator, window: usize) -> f64 {
    let s = scale.max_abs_window(window);
    if s == 0.0 {
        return residual.max_abs_window(window);
    }
    residual.max_abs_window(window) / s
}

/// Residual of a relation evaluated over the first `window` shells.
#[derive(Debug, Clone)]
struct Relation {
    name: &'static str,
    residual: Vec<BlockOperator>,
    scale: Vec<BlockOperator>,
}

impl Relation {
    fn norm(&self, window: usize) -> f64 {
        self.residual.iter().zip(&self.scale).map(|(r, s)| relative(r, s, window)).fold(0.0, f64::max)
    }
}

fn abs_product(a: &BlockOperator, b: &BlockOperator) -> BlockOperator {
    a.abs().mul(&b.abs())
}

fn commutator_relations(
    name: &'static str,
    u: &VectorOperator,
    v: &VectorOperator,
    rhs: Option<(&VectorOperator, C64)>,
) -> Relation {
    let mut residual = Vec::new();
    let mut scale = Vec::new();
    for a in 0..3 {
        for b in (a + 1)..3 {
            let mut r = u[a].mul(&v[b]).sub(&v[b].mul(&u[a]));
            let mut s = abs_product(&u[a], &v[b]).add(&abs_product(&v[b], &u[a]));
            if let Some((w, z)) = rhs {
                let l = 3 - a - b;
                let eps = crate::linalg::levi_civita(a, b, l);
                r = r.add_scaled(&w[l], -z * eps);
                s = s.add(&w[l].abs());
            }
            residual.push(r);
            scale.push(s);
        }
    }
    Relation { name, residual, scale }
}

fn dot_relation(
    name: &'static str,
    u: &VectorOperator,
    v: &VectorOperator,
    value: f64,
    space: &TwistedHilbert,
) -> Relation {
    let id = BlockOperator::identity(space);
    let r = dot(u, v).add_scaled(&id, cr(-value));
    let s = abs_product(&u[0], &v[0]).add(&abs_product(&u[1], &v[1])).add(&abs_product(&u[2], &v[2]));
    Relation { name, residual: vec![r], scale: vec![s] }
}

/// Residuals of every algebraic relation, on the full truncated space and
/// on the interior (shells `j ≤ j_max − 2`).
pub fn relation_report(space: &TwistedHilbert, ops: &OperatorSet) -> RelationReport {
    relation_report_window(space, ops, space.interior_shells())
}

/// As [`relation_report`] with an explicit interior window in shells.
pub fn relation_report_window(space: &TwistedHilbert, ops: &OperatorSet, window: usize) -> RelationReport {
    let prm = &space.params;
    let ih = c(0.0, prm.hbar);
    let r2 = prm.r * prm.r;
    let mut rels = vec![
        commutator_relations("[J_j,J_k] = i hbar eps_jkl J_l", &ops.j, &ops.j, Some((&ops.j, ih))),
        commutator_relations("[J_j,X_k] = i hbar eps_jkl X_l", &ops.j, &ops.x, Some((&ops.x, ih))),
        commutator_relations("[X_j,X_k] = 0", &ops.x, &ops.x, None),
        dot_relation("X.X = r^2", &ops.x, &ops.x, r2, space),
        dot_relation("J.X = r hbar l", &ops.j, &ops.x, prm.r * prm.hbar * prm.l(), space),
    ];
    // [J_j, X_k] needs every ordered pair, not only j < k.
    {
        let mut residual = Vec::new();
        let mut scale = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                let mut r = ops.j[a].mul(&ops.x[b]).sub(&ops.x[b].mul(&ops.j[a]));
                let mut s = abs_product(&ops.j[a], &ops.x[b]).add(&abs_product(&ops.x[b], &ops.j[a]));
                for l in 0..3 {
                    let eps = crate::linalg::levi_civita(a, b, l);
                    if eps != 0.0 {
                        r = r.add_scaled(&ops.x[l], -ih * eps);
                        s = s.add(&ops.x[l].abs());
                    }
                }
                residual.push(r);
                scale.push(s);
            }
        }
        rels[1] = Relation { name: "[J_j,X_k] = i hbar eps_jkl X_l", residual, scale };
    }
    // J × J = iħ J
    {
        let jxj = cross(&ops.j, &ops.j);
        let mut residual = Vec::new();
        let mut scale = Vec::new();
        for i in 0..3 {
            residual.push(jxj[i].add_scaled(&ops.j[i], -ih));
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            scale.push(abs_product(&ops.j[a], &ops.j[b]).add(&abs_product(&ops.j[b], &ops.j[a])));
        }
        rels.push(Relation { name: "J x J = i hbar J", residual, scale });
    }
    // J × P = −(Ĵ²/r²) X + iħ P − rB Ĵ
    {
        let jxp = cross(&ops.j, &ops.p);
        let j2 = dot(&ops.j, &ops.j);
        let mut residual = Vec::new();
        let mut scale = Vec::new();
        for i in 0..3 {
            let rhs = j2
                .mul(&ops.x[i])
                .scale(cr(-1.0 / r2))
                .add_scaled(&ops.p[i], ih)
                .add_scaled(&ops.j[i], cr(-prm.r * prm.b));
            residual.push(jxp[i].sub(&rhs));
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            let s = abs_product(&ops.j[a], &ops.p[b])
                .add(&abs_product(&ops.j[b], &ops.p[a]))
                .add(&abs_product(&j2, &ops.x[i]).scale(cr(1.0 / r2)));
            scale.push(s);
        }
        rels.push(Relation { name: "J x P = -(J^2/r^2) X + i hbar P - r B J", residual, scale });
    }
    rels.push(commutator_relations("[A_j,A_k] = 0", &ops.a, &ops.a, None));
    rels.push(dot_relation("A.A = r^2", &ops.a, &ops.a, r2, space));
    {
        let mut residual = Vec::new();
        let mut scale = Vec::new();
        for k in 0..3 {
            residual.push(ops.a_closed[k].sub(&ops.a[k]));
            scale.push(ops.a[k].abs().add(&ops.a_closed[k].abs()));
        }
        rels.push(Relation { name: "A closed form = A conjugation", residual, scale });
    }
    let full = space.num_shells();
    RelationReport {
        twice_l: space.twice_l,
        twice_j_max: space.twice_j_max,
        tau: prm.tau,
        residuals: rels
            .iter()
            .map(|r| RelationResidual {
                relation: r.name.to_string(),
                norm_full: r.norm(full),
                norm_interior: r.norm(window),
            })
            .collect(),
    }
}

/// Cartesian value of a charge-±1 section at the point `x = r R_g e3`.
///
/// The vector `R_g (e1 ∓ i e2)/√2` picks up `e^{∓iθ}` under `g ↦ g·exp(θE3)`,
/// cancelling the phase of the scalar section. The returned `ψ` satisfies
/// `(σ·x) ψ = rħl ψ`, i.e. `(x/r) × ψ = −i l ψ` for `l = ±1`.
pub fn charge_one_section(space: &TwistedHilbert, coeffs: &CVec, g: &GroupElement) -> Option<(RVec3, CVec3)> {
    if space.twice_l.abs() != 2 {
        return None;
    }
    let rot = crate::groups::covering_map(g).ok()?;
    let x = rot.column(2) * space.params.r;
    let sgn = space.twice_l.signum() as f64;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let w = CVec3::new(cr(h), c(0.0, sgn * h), cr(0.0));
    let rw = crate::linalg::CMat3::from_fn(|i, j| cr(rot[(i, j)])) * w;
    let f = space.evaluate(coeffs, g);
    Some((x, rw * f))
}

/// Dense `Π_j(g)` per shell, the left action of `g` on the twisted basis.
pub fn left_action(space: &TwistedHilbert, g: &GroupElement) -> BlockOperator {
    let mut op = BlockOperator::zeros(space, 0);
    for (s, &tj) in space.shells.iter().enumerate() {
        op.set_block(s, s, wigner_d(tj, g));
    }
    op
}
