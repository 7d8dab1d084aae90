//! Coherent states as heat-evolved delta sections.
//!
//! A point `a = r(cosh s·û + i sinh s·v̂)` of the complex sphere is lifted to
//! `g_a ∈ SL(2,C)` with `R_{g_a}(0,0,r) = a`. The delta section at `a` has
//! coefficients `√(2j+1) Π_j(g_a)_{m,l}` (for real `a` these are the complex
//! conjugates of the basis functions at `g_a`), and `χ_a = e^{−τĴ²/(2ħ²)} δ_a`.
//! A different lift changes `χ_a` by a nonzero scalar, so every physical
//! output here is phase-free.

use rayon::prelude::*;
use thiserror::Error;

use crate::classical::ComplexSpherePoint;
use crate::groups::{complex_rotation, exp_sl2c, exp_su2, wigner_d_ladder, AlgebraElement, GroupElement};
use crate::linalg::{c, cr, CVec, CVec3, RVec3, C64};
use crate::quantum::{heat_operator, QuantumError, StateVector, TwistedHilbert, VectorOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatesError {
    #[error("point lies on the branch set of the lift (Re a antipodal to the north pole)")]
    BranchCut,
    #[error("coherent state not resolved by the truncation: top-shell mass {tail_mass:.3e} of the norm")]
    TruncationWarning { tail_mass: f64 },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// A point of the complex sphere together with a lift to SL(2,C).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionPoint {
    pub a: ComplexSpherePoint,
    pub g: GroupElement,
    /// Radial coordinate: `|Im a| = r sinh s`.
    pub s: f64,
}

/// Splits `a` into `(s, û, v̂)` with `a = r(cosh s·û + i sinh s·v̂)`.
pub fn polar_form(a: &ComplexSpherePoint, r: f64) -> (f64, RVec3, RVec3) {
    let re = a.real();
    let im = a.imag();
    let s = (im.norm() / r).asinh();
    let u = re.normalize();
    let v = if im.norm() > 0.0 {
        let w = im - u * u.dot(&im);
        w.normalize()
    } else {
        RVec3::zeros()
    };
    (s, u, v)
}

/// `r(cosh s·û + i sinh s·v̂)`.
pub fn from_polar(s: f64, u: &RVec3, v: &RVec3, r: f64) -> ComplexSpherePoint {
    let re = u * (r * s.cosh());
    let im = v * (r * s.sinh());
    ComplexSpherePoint { a: CVec3::new(c(re[0], im[0]), c(re[1], im[1]), c(re[2], im[2])) }
}

/// Deterministic lift: rotate the north pole to `û` along the great circle,
/// then boost towards `v̂`. Fails within 1e-8 of `û = −e3`.
pub fn lift_point(a: &ComplexSpherePoint, r: f64) -> Result<SectionPoint, StatesError> {
    let (s, u, v) = polar_form(a, r);
    if u[2] < -1.0 + 1e-8 {
        return Err(StatesError::BranchCut);
    }
    let beta = u[2].clamp(-1.0, 1.0).acos();
    let alpha = if beta.abs() < 1e-15 { 0.0 } else { u[1].atan2(u[0]) };
    let k = exp_su2(&AlgebraElement::new(0.0, 0.0, alpha))
        .mul(&exp_su2(&AlgebraElement::new(0.0, beta, 0.0)))
        .mul(&exp_su2(&AlgebraElement::new(0.0, 0.0, -alpha)));
    let g = if s > 0.0 {
        let rk = crate::groups::covering_map(&k).expect("k is unitary");
        let w = rk.transpose() * v;
        let n = RVec3::z().cross(&w);
        // exp(iψ n·E) is the rotation by the imaginary angle iψ about n,
        // which sends e3 to cosh ψ·e3 + i sinh ψ·(n × e3).
        let boost = exp_sl2c(&[c(0.0, s * n[0]), c(0.0, s * n[1]), c(0.0, s * n[2])]);
        k.mul(&boost)
    } else {
        k
    };
    Ok(SectionPoint { a: *a, g, s })
}

/// Lift that never fails: near the branch set the frame is turned by `π`
/// about `e1` first, giving a different but equally valid lift.
pub fn lift_point_any(a: &ComplexSpherePoint, r: f64) -> SectionPoint {
    match lift_point(a, r) {
        Ok(sp) => sp,
        Err(_) => {
            let u = exp_su2(&AlgebraElement::new(std::f64::consts::PI, 0.0, 0.0));
            let rot = crate::groups::covering_map(&u).expect("unitary");
            let rc = crate::linalg::CMat3::from_fn(|i, j| cr(rot[(i, j)]));
            let moved = ComplexSpherePoint { a: rc.transpose() * a.a };
            let inner = lift_point(&moved, r).expect("rotated point is away from the branch set");
            SectionPoint { a: *a, g: u.mul(&inner.g), s: inner.s }
        }
    }
}

/// `R_g (0, 0, r)`.
pub fn lifted_point(g: &GroupElement, r: f64) -> CVec3 {
    complex_rotation(g).column(2) * cr(r)
}

/// Delta section at the lifted point, `d_{jm} = √(2j+1) Π_j(g)_{m,l}`.
pub fn delta_section(sp: &SectionPoint, space: &TwistedHilbert) -> StateVector {
    delta_from_group(&sp.g, space)
}

pub fn delta_from_group(g: &GroupElement, space: &TwistedHilbert) -> StateVector {
    let ladder = wigner_d_ladder(space.twice_j_max, g);
    let mut v = CVec::zeros(space.dim());
    for (shell, &tj) in space.shells().iter().enumerate() {
        let d = &ladder[tj as usize];
        let col = ((tj + space.twice_l) / 2) as usize;
        let norm = ((tj + 1) as f64).sqrt();
        let off = space.shell_offset(shell);
        for k in 0..d.nrows() {
            v[off + k] = d[(k, col)] * norm;
        }
    }
    StateVector::new(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherentState {
    pub vec: StateVector,
    pub delta: StateVector,
    pub lift: SectionPoint,
    pub tau: f64,
    /// Fraction of the squared norm carried by the top shell.
    pub tail_mass: f64,
}

impl CoherentState {
    pub fn a(&self) -> &ComplexSpherePoint {
        &self.lift.a
    }
}

/// Heat-evolved delta section at `a` with no truncation check.
pub fn coherent_state_lenient(a: &ComplexSpherePoint, space: &TwistedHilbert) -> Result<CoherentState, StatesError> {
    let sp = lift_point_any(a, space.params.r);
    coherent_state_from_lift(&sp, space)
}

pub fn coherent_state_from_lift(sp: &SectionPoint, space: &TwistedHilbert) -> Result<CoherentState, StatesError> {
    let tau = space.params.tau;
    let delta = delta_section(sp, space);
    let heat = heat_operator(space, tau)?;
    let vec = StateVector::new(heat.apply(&delta.coeffs));
    let top = space.num_shells() - 1;
    let off = space.shell_offset(top);
    let top_mass: f64 = vec.coeffs.rows(off, space.shell_dim(top)).norm_squared();
    let total = vec.coeffs.norm_squared();
    let tail_mass = if total > 0.0 { top_mass / total } else { 0.0 };
    Ok(CoherentState { vec, delta, lift: *sp, tau, tail_mass })
}

/// `χ_a = e^{−τ Ĵ²/(2ħ²)} δ_a`; fails with [`StatesError::TruncationWarning`]
/// when the top shell carries more than 1e-8 of the squared norm.
pub fn coherent_state(a: &ComplexSpherePoint, space: &TwistedHilbert) -> Result<CoherentState, StatesError> {
    let cs = coherent_state_lenient(a, space)?;
    if cs.tail_mass > 1e-8 {
        return Err(StatesError::TruncationWarning { tail_mass: cs.tail_mass });
    }
    Ok(cs)
}

/// `ρ_k = ‖A_k χ − a_k χ‖ / ‖χ‖`. Since `χ = Hδ` and `A_k = H X_k H⁻¹`,
/// `A_k χ` is formed as `H (X_k δ)`.
pub fn eigen_residual(cs: &CoherentState, space: &TwistedHilbert, x: &VectorOperator) -> Result<[f64; 3], StatesError> {
    let heat = heat_operator(space, space.params.tau)?;
    let norm = cs.vec.norm();
    let mut out = [0.0; 3];
    for k in 0..3 {
        let ak = heat.apply(&x[k].apply(&cs.delta.coeffs));
        let diff = ak - &cs.vec.coeffs * cs.a().a[k];
        out[k] = diff.norm() / norm;
    }
    Ok(out)
}

/// `⟨χ_a, χ_b⟩` in the default lifts.
pub fn overlap(a: &ComplexSpherePoint, b: &ComplexSpherePoint, space: &TwistedHilbert) -> Result<C64, StatesError> {
    let ca = coherent_state_lenient(a, space)?;
    let cb = coherent_state_lenient(b, space)?;
    Ok(ca.vec.inner(&cb.vec))
}

/// Rayleigh quotients `(⟨X⟩, ⟨Ĵ⟩)`.
pub fn expectations(cs: &CoherentState, x: &VectorOperator, j: &VectorOperator) -> (RVec3, RVec3) {
    let v = &cs.vec.coeffs;
    let n2 = v.norm_squared();
    let q = |op: &crate::quantum::BlockOperator| crate::linalg::inner(v, &op.apply(v)).re / n2;
    (RVec3::new(q(&x[0]), q(&x[1]), q(&x[2])), RVec3::new(q(&j[0]), q(&j[1]), q(&j[2])))
}

/// Grid over the chart `(s, θ, φ)`: `û = (sin θ cos φ, sin θ sin φ, cos θ)`
/// and `v̂ = cos ψ·e_θ + sin ψ·e_φ` at a fixed angle `ψ`. Cells are sampled at
/// their midpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HusimiGridSpec {
    pub n_s: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub s_max: f64,
    pub v_angle: f64,
}

impl HusimiGridSpec {
    pub fn s_at(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.s_max / self.n_s as f64
    }

    pub fn theta_at(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * std::f64::consts::PI / self.n_theta as f64
    }

    pub fn phi_at(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * 2.0 * std::f64::consts::PI / self.n_phi as f64
    }

    pub fn point(&self, is: usize, it: usize, ip: usize, r: f64) -> ComplexSpherePoint {
        let (s, th, ph) = (self.s_at(is), self.theta_at(it), self.phi_at(ip));
        let u = RVec3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
        let e_t = RVec3::new(th.cos() * ph.cos(), th.cos() * ph.sin(), -th.sin());
        let e_p = RVec3::new(-ph.sin(), ph.cos(), 0.0);
        let v = e_t * self.v_angle.cos() + e_p * self.v_angle.sin();
        from_polar(s, &u, &v, r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HusimiGrid {
    pub spec: HusimiGridSpec,
    /// Row-major over `(s, θ, φ)`.
    pub values: Vec<f64>,
}

impl HusimiGrid {
    pub fn value(&self, is: usize, it: usize, ip: usize) -> f64 {
        self.values[(is * self.spec.n_theta + it) * self.spec.n_phi + ip]
    }

    /// Index `(s, θ, φ)` of the largest value.
    pub fn argmax(&self) -> (usize, usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        let np = self.spec.n_phi;
        let nt = self.spec.n_theta;
        (best / (nt * np), (best / np) % nt, best % np)
    }

    /// Riemann sum of `value · sin θ` over the cells.
    pub fn riemann_sum(&self) -> f64 {
        let sp = &self.spec;
        let cell = (sp.s_max / sp.n_s as f64)
            * (std::f64::consts::PI / sp.n_theta as f64)
            * (2.0 * std::f64::consts::PI / sp.n_phi as f64);
        let mut terms = Vec::with_capacity(self.values.len());
        for is in 0..sp.n_s {
            for it in 0..sp.n_theta {
                for ip in 0..sp.n_phi {
                    terms.push(self.value(is, it, ip) * sp.theta_at(it).sin() * cell);
                }
            }
        }
        crate::linalg::compensated_sum(terms)
    }
}

/// `|⟨χ_a, ψ⟩|² / ‖χ_a‖²` over the grid.
pub fn husimi_grid(
    psi: &StateVector,
    spec: &HusimiGridSpec,
    space: &TwistedHilbert,
) -> Result<HusimiGrid, StatesError> {
    let r = space.params.r;
    let heat = heat_operator(space, space.params.tau)?;
    let cells: Vec<(usize, usize, usize)> = (0..spec.n_s)
        .flat_map(|a| (0..spec.n_theta).flat_map(move |b| (0..spec.n_phi).map(move |c| (a, b, c))))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(is, it, ip)| {
            let a = spec.point(is, it, ip, r);
            let sp = lift_point_any(&a, r);
            let chi = heat.apply(&delta_section(&sp, space).coeffs);
            let ov = crate::linalg::inner(&chi, &psi.coeffs);
            ov.norm_sqr() / chi.norm_squared()
        })
        .collect();
    Ok(HusimiGrid { spec: *spec, values })
}
