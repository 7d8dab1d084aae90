//! Segal–Bargmann transform over the complex sphere and its isometry.
//!
//! Haar measure on SL(2,C) is normalized in polar form `g = k₁ a_s k₂`,
//! `a_s = diag(e^{s/2}, e^{−s/2})`, as `dg = sinh²s ds dÂ dk₂` with `dÂ` the
//! area on the unit sphere and `dk₂` the Haar probability measure. In the chart
//! `g = k·exp(isE2)·diag(e^{w/2}, e^{−w/2})`, `w = σ + iθ`, `θ ∈ [0, 4π)`, the
//! same measure reads `dz·dh` with `dz = ½ cosh s sinh s ds dk` and
//! `dh = dθ dσ`.
//!
//! The group density is the heat kernel of hyperbolic 3-space at time `τ/4`,
//! `ν_τ(s) = (πτ)^{−3/2} e^{−τ/4} (s/sinh s) e^{−s²/τ}`, which makes every
//! sector ratio equal to one.

use rayon::prelude::*;
use thiserror::Error;

use crate::classical::ComplexSpherePoint;
use crate::groups::{
    exp_su2, haar_quadrature, radial_coordinate, spin_matrices, wigner_d, wigner_d_ladder, AlgebraElement, GroupElement,
};
use crate::linalg::{c, compensated_sum, cr, CMat, CVec, CVec3, C64};
use crate::quadrature::{composite_gauss_legendre, gauss_legendre, periodic_trapezoid};
use crate::quantum::{heat_operator, QuantumError, StateVector, TwistedHilbert};
use crate::states::lift_point_any;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SbtError {
    #[error("chart coordinate too close to zero (|z| = {modulus:.3e}); use another index permutation")]
    ChartDegeneracy { modulus: f64 },
    #[error("quadrature did not converge (refinement change {estimate:.3e})")]
    QuadratureNotConverged { estimate: f64 },
    #[error("sector isometry is defined for zero twist only (twice_l = {twice_l})")]
    NeedsZeroTwist { twice_l: i32 },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// Heat-damped coefficients of a state, evaluated on SL(2,C) by the
/// continued basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct HoloSection {
    pub space: TwistedHilbert,
    pub coeffs: CVec,
}

impl HoloSection {
    /// Scalar form `F(g) = Σ c_{jm} √(2j+1) Π_j(g⁻¹)_{l,m}`.
    pub fn scalar(&self, g: &GroupElement) -> C64 {
        self.space.evaluate(&self.coeffs, g)
    }

    /// `V_{|l|}`-valued form `F(g) Π_{|l|}(g) e_l`; it depends only on the
    /// point `R_g (0, 0, r)`.
    pub fn value_at_lift(&self, g: &GroupElement) -> CVec {
        let tl = self.space.twice_l;
        let col = ((tl.abs() + tl) / 2) as usize;
        wigner_d(tl.abs(), g).column(col) * self.scalar(g)
    }

    pub fn value(&self, a: &ComplexSpherePoint) -> CVec {
        let sp = lift_point_any(a, self.space.params.r);
        self.value_at_lift(&sp.g)
    }

    /// `|(σ·a)Ψ(a) − rħl Ψ(a)| / (rħ max(|l|, 1) |Ψ(a)|)`.
    pub fn constraint_residual(&self, a: &ComplexSpherePoint) -> f64 {
        let psi = self.value(a);
        let p = &self.space.params;
        let s = spin_matrices(self.space.twice_l.abs());
        let mut lhs = CVec::zeros(psi.len());
        for k in 0..3 {
            lhs += (&s[k] * &psi) * (a.a[k] * p.hbar);
        }
        let rhs = &psi * cr(p.r * p.hbar * p.l());
        let scale = p.r * p.hbar * p.l().abs().max(1.0) * psi.norm();
        (lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE)
    }
}

/// `Ψ = e^{−τ J̃²/2} ψ`.
pub fn sbt_transform(psi: &StateVector, space: &TwistedHilbert) -> Result<HoloSection, SbtError> {
    let heat = heat_operator(space, space.params.tau)?;
    Ok(HoloSection { space: space.clone(), coeffs: heat.apply(&psi.coeffs) })
}

/// Undoes the heat factor on the coefficients.
pub fn inverse_transform(section: &HoloSection) -> Result<StateVector, SbtError> {
    let heat = heat_operator(&section.space, -section.space.params.tau)?;
    Ok(StateVector::new(heat.apply(&section.coeffs)))
}

/// Recovers `ψ` from samples of the scalar section on SU(2): project onto
/// the basis with an exact Haar rule, then undo the heat factor.
pub fn recover_from_samples(section: &HoloSection) -> Result<StateVector, SbtError> {
    let space = &section.space;
    let order = (space.twice_j_max as usize).max(2);
    let nodes = haar_quadrature(order);
    let dim = space.dim();
    let projected = nodes
        .par_iter()
        .map(|(k, w)| {
            let value = section.scalar(k);
            let basis = basis_values(space, k);
            basis.map(|b| b.conj() * value * *w)
        })
        .reduce(|| CVec::zeros(dim), |a, b| a + b);
    inverse_transform(&HoloSection { space: space.clone(), coeffs: projected })
}

/// All basis functions `f^j_m(g)` at once.
fn basis_values(space: &TwistedHilbert, g: &GroupElement) -> CVec {
    let ladder = wigner_d_ladder(space.twice_j_max, &g.inverse());
    let mut out = CVec::zeros(space.dim());
    for (shell, &tj) in space.shells().iter().enumerate() {
        let d = &ladder[tj as usize];
        let row = ((tj + space.twice_l) / 2) as usize;
        let norm = ((tj + 1) as f64).sqrt();
        let off = space.shell_offset(shell);
        for k in 0..d.ncols() {
            out[off + k] = d[(row, k)] * norm;
        }
    }
    out
}

/// Chart lift `k·exp(isE2)` of `r(cosh s R_k e3 + i sinh s R_k e1)`.
pub fn frame_lift(k: &GroupElement, s: f64) -> GroupElement {
    k.mul(&boost(s))
}

fn boost(s: f64) -> GroupElement {
    crate::groups::exp_sl2c(&[cr(0.0), c(0.0, s), cr(0.0)])
}

/// `r(cosh s R_k e3 + i sinh s R_k e1)`.
pub fn frame_point(k: &GroupElement, s: f64, r: f64) -> CVec3 {
    crate::states::lifted_point(&frame_lift(k, s), r)
}

/// Radial profile of the invariant measure on the complex sphere in the
/// frame chart, `dz = σ(s) ds dk` with `σ(s) = ½ cosh s sinh s`.
pub fn invariant_measure(s: f64) -> f64 {
    0.5 * s.cosh() * s.sinh()
}

/// Density of `|Ω ∧ Ω̄|`, `Ω = dz_a ∧ dz_b / (2 z_k)`, against Lebesgue
/// measure on the two retained coordinates; `eliminated` is `k`.
pub fn quadric_density(z: &CVec3, eliminated: usize) -> Result<f64, SbtError> {
    let m = z[eliminated].norm();
    if m < 1e-10 {
        return Err(SbtError::ChartDegeneracy { modulus: m });
    }
    Ok(1.0 / (4.0 * m * m))
}

/// The group density `ν_τ` as a function of the polar radial coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialDensity {
    pub tau: f64,
    pub norm: f64,
}

impl RadialDensity {
    pub fn profile(&self, s: f64) -> f64 {
        let ratio = if s.abs() < 1e-4 { 1.0 - s * s / 6.0 } else { s / s.sinh() };
        self.norm * ratio * (-s * s / self.tau).exp()
    }

    pub fn at(&self, g: &GroupElement) -> f64 {
        self.profile(radial_coordinate(g))
    }
}

pub fn nu_group(tau: f64) -> RadialDensity {
    RadialDensity { tau, norm: (std::f64::consts::PI * tau).powf(-1.5) * (-tau / 4.0).exp() }
}

fn radial_rule(s_max: f64, panels: usize) -> crate::quadrature::Rule1d {
    composite_gauss_legendre(20, panels, 0.0, s_max)
}

/// `‖Ψ_{jm}‖²_ν / ‖ψ_{jm}‖²` for a single basis vector at zero twist, by
/// radial quadrature after collapsing the frame integrals. The left frame
/// collapses by Schur orthogonality; the right frame is integrated over
/// `β` numerically, so the result is independent of `m` only up to
/// quadrature error.
pub fn sector_isometry(space: &TwistedHilbert, twice_j: i32, twice_m: i32) -> Result<f64, SbtError> {
    if space.twice_l != 0 {
        return Err(SbtError::NeedsZeroTwist { twice_l: space.twice_l });
    }
    let tau = space.params.tau;
    let j = 0.5 * twice_j as f64;
    let n = (twice_j + 1) as usize;
    let col = ((twice_j + twice_m) / 2) as usize;
    // ⟨|Π_j(k)_{q,m}|²⟩ over k reduces to ½∫ d_{qm}(β)² d cos β
    let gl = gauss_legendre(n + 2);
    let mut weights = vec![0.0; n];
    for (x, w) in gl.nodes.iter().zip(&gl.weights) {
        let d = wigner_d(twice_j, &GroupElement::from_euler(0.0, x.acos(), 0.0));
        for q in 0..n {
            weights[q] += 0.5 * w * d[(q, col)].norm_sqr();
        }
    }
    let nu = nu_group(tau);
    let s_max = (2.0 * j + 1.0) * tau / 2.0 + 10.0 * (tau / 2.0).sqrt() + 1.0;
    let damp = -tau * j * (j + 1.0);
    let integral = |panels: usize| {
        let rule = radial_rule(s_max, panels);
        let terms = rule.nodes.iter().zip(&rule.weights).map(|(&s, &w)| {
            let growth: f64 = (0..n).map(|q| weights[q] * ((2.0 * (q as f64 - j)) * s + damp).exp()).sum();
            4.0 * std::f64::consts::PI * w * nu.profile(s) * s.sinh().powi(2) * growth
        });
        compensated_sum(terms)
    };
    let coarse = integral(8);
    let fine = integral(16);
    let estimate = (fine - coarse).abs() / fine.abs();
    if estimate > 1e-8 {
        return Err(SbtError::QuadratureNotConverged { estimate });
    }
    Ok(fine)
}

/// Node counts for the `D_C` integral defining `ν^l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FiberNodes {
    pub sigma_panels: usize,
    pub theta: usize,
}

impl FiberNodes {
    pub fn for_twist(twice_l: i32) -> Self {
        Self { sigma_panels: 8, theta: 4 * (twice_l.unsigned_abs() as usize + 1) }
    }

    fn refined(self) -> Self {
        Self { sigma_panels: 2 * self.sigma_panels, theta: 2 * self.theta }
    }
}

/// `ν^l(R_g n) = ∫_{D_C} Π_l(((gh)⁻¹)*(gh)⁻¹) ν_τ(gh) dh` at fixed nodes.
pub fn nu_twisted_with(density: &RadialDensity, twice_l: i32, g: &GroupElement, nodes: FiberNodes) -> CMat {
    let tl = twice_l.abs();
    let tau = density.tau;
    let half_width = radial_coordinate(g) + 0.5 * tl as f64 * tau + 10.0 * tau.sqrt() + 1.0;
    let sigma = composite_gauss_legendre(20, nodes.sigma_panels, -half_width, half_width);
    let theta = periodic_trapezoid(nodes.theta, 4.0 * std::f64::consts::PI);
    let dim = (tl + 1) as usize;
    let mut acc = CMat::zeros(dim, dim);
    for (&sg, &ws) in sigma.nodes.iter().zip(&sigma.weights) {
        for (&th, &wt) in theta.nodes.iter().zip(&theta.weights) {
            let gh = g.mul(&GroupElement::diagonal(c(sg, th)));
            let weight = density.at(&gh) * ws * wt;
            if weight == 0.0 {
                continue;
            }
            let m = gh.inverse();
            let p = m.adjoint().mul(&m);
            acc += wigner_d(tl, &p) * cr(weight);
        }
    }
    (&acc + acc.adjoint()) * cr(0.5)
}

/// [`nu_twisted_with`] with one refinement as a convergence certificate.
pub fn nu_twisted(density: &RadialDensity, twice_l: i32, g: &GroupElement, tol: f64) -> Result<CMat, SbtError> {
    let nodes = FiberNodes::for_twist(twice_l);
    let coarse = nu_twisted_with(density, twice_l, g, nodes);
    let fine = nu_twisted_with(density, twice_l, g, nodes.refined());
    let estimate = crate::linalg::max_abs(&(&fine - &coarse)) / crate::linalg::max_abs(&fine).max(f64::MIN_POSITIVE);
    if estimate > tol {
        return Err(SbtError::QuadratureNotConverged { estimate });
    }
    Ok(fine)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsometryOptions {
    /// Haar order for the frame; `None` picks the exact order for the band.
    pub frame_order: Option<usize>,
    pub radial_panels: usize,
    pub fiber: Option<FiberNodes>,
    /// Largest accepted change under radial refinement, relative.
    pub tol: f64,
}

impl Default for IsometryOptions {
    fn default() -> Self {
        Self { frame_order: None, radial_panels: 6, fiber: None, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IsometryNodes {
    pub frame: usize,
    pub radial: usize,
    pub sigma: usize,
    pub theta: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsometryReport {
    pub twice_l: i32,
    pub twice_j_max: i32,
    pub tau: f64,
    pub ratio: f64,
    pub error_estimate: f64,
    pub s_max: f64,
    pub nodes: IsometryNodes,
}

/// Radial cutoff for the isometry integral: the top shell peaks near
/// `s = (2j+1)τ/2` with width `√(τ/2)`.
pub fn isometry_s_max(space: &TwistedHilbert) -> f64 {
    let tau = space.params.tau;
    (space.twice_j_max as f64 + 1.0) * tau / 2.0 + 10.0 * (tau / 2.0).sqrt() + 1.0
}

/// `∫ ⟨Ψ(z), ν^l(z) Ψ(z)⟩ dz / ‖ψ‖²` by frame × radial quadrature. The
/// frame rule is exact for the band; `ν^l` is evaluated on the frame
/// `k = 1` and carried to other frames by `ν^l(R_k z) = Π_l(k) ν^l(z) Π_l(k)†`.
pub fn isometry_check(
    psi: &StateVector,
    space: &TwistedHilbert,
    opts: &IsometryOptions,
) -> Result<IsometryReport, SbtError> {
    let section = sbt_transform(psi, space)?;
    let tau = space.params.tau;
    let tl = space.twice_l;
    let density = nu_group(tau);
    let fiber = opts.fiber.unwrap_or_else(|| FiberNodes::for_twist(tl));
    let order = opts.frame_order.unwrap_or((space.twice_j_max as usize).max(2));
    let frame = haar_quadrature(order);
    let s_max = isometry_s_max(space);

    // Π_j(k⁻¹) c_j per frame node
    let frame_vectors: Vec<(Vec<CVec>, f64)> = frame
        .par_iter()
        .map(|(k, w)| {
            let ladder = wigner_d_ladder(space.twice_j_max, &k.inverse());
            let vs = space
                .shells()
                .iter()
                .enumerate()
                .map(|(shell, &tj)| {
                    let off = space.shell_offset(shell);
                    &ladder[tj as usize] * section.coeffs.rows(off, space.shell_dim(shell))
                })
                .collect();
            (vs, *w)
        })
        .collect();

    let col = ((tl.abs() + tl) / 2) as usize;
    let radial_integral = |panels: usize| -> f64 {
        let rule = radial_rule(s_max, panels);
        let terms: Vec<f64> = rule
            .nodes
            .par_iter()
            .zip(rule.weights.par_iter())
            .map(|(&s, &ws)| {
                let b = boost(s);
                let nu = nu_twisted_with(&density, tl, &b, fiber);
                let e = wigner_d(tl.abs(), &b).column(col).into_owned();
                let q = crate::linalg::inner(&e, &(&nu * &e)).re;
                let binv = b.inverse();
                let ladder = wigner_d_ladder(space.twice_j_max, &binv);
                let rows: Vec<CVec> = space
                    .shells()
                    .iter()
                    .map(|&tj| {
                        let d = &ladder[tj as usize];
                        let row = ((tj + tl) / 2) as usize;
                        let norm = ((tj + 1) as f64).sqrt();
                        CVec::from_fn(d.ncols(), |k, _| d[(row, k)] * norm)
                    })
                    .collect();
                let frame_avg = compensated_sum(frame_vectors.iter().map(|(vs, wk)| {
                    let mut f = cr(0.0);
                    for (r, v) in rows.iter().zip(vs) {
                        for (a, b) in r.iter().zip(v.iter()) {
                            f += a * b;
                        }
                    }
                    wk * f.norm_sqr()
                }));
                ws * invariant_measure(s) * q * frame_avg
            })
            .collect();
        compensated_sum(terms)
    };
    let coarse = radial_integral(opts.radial_panels);
    let fine = radial_integral(2 * opts.radial_panels);
    let n2 = psi.coeffs.norm_squared();
    let ratio = fine / n2;
    let error_estimate = (fine - coarse).abs() / n2;
    if error_estimate > opts.tol.max(1e-15) * 1e3 {
        return Err(SbtError::QuadratureNotConverged { estimate: error_estimate });
    }
    Ok(IsometryReport {
        twice_l: tl,
        twice_j_max: space.twice_j_max,
        tau,
        ratio,
        error_estimate,
        s_max,
        nodes: IsometryNodes {
            frame: frame.len(),
            radial: 20 * 2 * opts.radial_panels,
            sigma: 20 * fiber.sigma_panels,
            theta: fiber.theta,
        },
    })
}

/// Random rotation helper shared by tests and callers that probe covariance.
pub fn su2_from_vector(v: [f64; 3]) -> GroupElement {
    exp_su2(&AlgebraElement::new(v[0], v[1], v[2]))
}
