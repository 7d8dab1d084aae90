//! Magnetic phase space on the sphere of radius `r`.
//!
//! States are kept in ambient coordinates: `x, p ∈ ℝ³` with `x·x = r²` and
//! `x·p = 0`. The magnetic field is `B` times the area form, entering only
//! through the Poisson brackets. Charts are used only inside
//! [`poisson_bracket`].

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};
use thiserror::Error;

use crate::linalg::{c, cdot, to_complex3, CVec3, RVec3, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassicalError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid phase point: {0}")]
    InvalidPoint(String),
    #[error("point lies within 1e-6 rad of a chart pole")]
    ChartSingularity,
    #[error("energy drift {drift:.3e} in one step exceeds 1e-3")]
    StepTooLarge { drift: f64 },
    #[error("complexifier inverse did not converge (residual {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error("starting guess is degenerate (Re a = 0)")]
    DegenerateStart,
    #[error("point is off the complex sphere (a·a − r² = {0:.3e})")]
    NotOnQuadric(f64),
}

/// Physical parameters. `b` and `tau` are derived at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub r: f64,
    pub m: f64,
    pub alpha: f64,
    pub hbar: f64,
    pub twice_l: i32,
    pub b: f64,
    pub tau: f64,
}

impl ModelParams {
    /// Monopole charge `l = twice_l / 2`.
    pub fn l(&self) -> f64 {
        0.5 * self.twice_l as f64
    }

    /// Flux quantum number `−4πr²B / (2πℏ)`, which equals `2l`.
    pub fn flux_number(&self) -> f64 {
        -(2.0 * self.r * self.r * self.b) / self.hbar
    }

    /// Same parameters with `α` rescaled so that `τ` takes the given value.
    pub fn with_tau(&self, tau: f64) -> Result<ModelParams, ClassicalError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ClassicalError::InvalidParams(format!("tau must be positive, got {tau}")));
        }
        let alpha = self.hbar / (self.m * self.r * self.r * tau);
        params_from_twist(self.twice_l, self.r, self.m, alpha, self.hbar)
    }
}

/// Builds parameters from the twist `2l`: `B = −ℏl/r²`, `τ = ℏ/(mαr²)`.
pub fn params_from_twist(twice_l: i32, r: f64, m: f64, alpha: f64, hbar: f64) -> Result<ModelParams, ClassicalError> {
    for (name, v) in [("r", r), ("m", m), ("alpha", alpha), ("hbar", hbar)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ClassicalError::InvalidParams(format!("{name} must be positive and finite, got {v}")));
        }
    }
    // −ℏl/r² written as −(2l)ℏ/(2r²) so that flux_number returns 2l exactly.
    let b = -(twice_l as f64 * hbar) / (2.0 * r * r);
    let tau = hbar / (m * alpha * r * r);
    Ok(ModelParams { r, m, alpha, hbar, twice_l, b, tau })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: RVec3,
    pub p: RVec3,
}

impl PhasePoint {
    /// Validates `x·x = r²` and `x·p = 0` to 1e-10 relative.
    pub fn new(x: RVec3, p: RVec3, r: f64) -> Result<Self, ClassicalError> {
        let dev = (x.dot(&x) - r * r).abs();
        if dev > 1e-10 * r * r {
            return Err(ClassicalError::InvalidPoint(format!("|x|² − r² = {dev:.3e}")));
        }
        let tang = x.dot(&p).abs();
        if tang > 1e-10 * r * p.norm() {
            return Err(ClassicalError::InvalidPoint(format!("x·p = {tang:.3e}")));
        }
        Ok(Self { x, p })
    }

    /// Projects an arbitrary pair onto the phase space of radius `r`.
    pub fn projected(x: RVec3, p: RVec3, r: f64) -> Self {
        let x = x * (r / x.norm());
        let p = p - x * (x.dot(&p) / (r * r));
        Self { x, p }
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        ((self.x - other.x).norm_squared() + (self.p - other.p).norm_squared()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexSpherePoint {
    pub a: CVec3,
}

impl ComplexSpherePoint {
    /// Validates `a·a = r²` (bilinear) to 1e-10 relative.
    pub fn new(a: CVec3, r: f64) -> Result<Self, ClassicalError> {
        let dev = (cdot(&a, &a) - r * r).norm();
        if dev > 1e-10 * r * r.max(a.norm()) {
            return Err(ClassicalError::NotOnQuadric(dev));
        }
        Ok(Self { a })
    }

    pub fn real(&self) -> RVec3 {
        self.a.map(|z| z.re)
    }

    pub fn imag(&self) -> RVec3 {
        self.a.map(|z| z.im)
    }
}

/// `J = x × p − rBx`.
pub fn angular_momentum(pt: &PhasePoint, params: &ModelParams) -> RVec3 {
    pt.x.cross(&pt.p) - pt.x * (params.r * params.b)
}

/// Energy `p²/(2m)`.
pub fn energy(pt: &PhasePoint, params: &ModelParams) -> f64 {
    pt.p.norm_squared() / (2.0 * params.m)
}

/// Observable on phase space.
pub type Observable<'a> = &'a dyn Fn(&PhasePoint) -> f64;

/// Spherical chart `(θ, φ, p_θ, p_φ)` with poles along `±e3` (`Standard`)
/// or along `±e1` (`Rotated`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Standard,
    Rotated,
}

impl Chart {
    // Rotated chart: ambient x = (y3, y1, y2) where y is the standard
    // embedding. This cyclic permutation is a proper rotation.
    fn to_ambient(self, y: RVec3) -> RVec3 {
        match self {
            Chart::Standard => y,
            Chart::Rotated => RVec3::new(y[2], y[0], y[1]),
        }
    }

    fn from_ambient(self, x: RVec3) -> RVec3 {
        match self {
            Chart::Standard => x,
            Chart::Rotated => RVec3::new(x[1], x[2], x[0]),
        }
    }

    /// Chart coordinates of a phase point.
    pub fn coordinates(self, pt: &PhasePoint, r: f64) -> Vector4<f64> {
        let y = self.from_ambient(pt.x);
        let q = self.from_ambient(pt.p);
        let theta = (y[2] / r).clamp(-1.0, 1.0).acos();
        let phi = y[1].atan2(y[0]);
        let (dt, dp) = frame(theta, phi, r);
        Vector4::new(theta, phi, q.dot(&dt), q.dot(&dp))
    }

    /// Phase point from chart coordinates.
    pub fn point(self, u: &Vector4<f64>, r: f64) -> PhasePoint {
        let (theta, phi) = (u[0], u[1]);
        let y = RVec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()) * r;
        let (dt, dp) = frame(theta, phi, r);
        let s2 = theta.sin().powi(2);
        let q = dt * (u[2] / (r * r)) + dp * (u[3] / (r * r * s2));
        PhasePoint { x: self.to_ambient(y), p: self.to_ambient(q) }
    }
}

fn frame(theta: f64, phi: f64, r: f64) -> (RVec3, RVec3) {
    let dt = RVec3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), -theta.sin()) * r;
    let dp = RVec3::new(-theta.sin() * phi.sin(), theta.sin() * phi.cos(), 0.0) * r;
    (dt, dp)
}

/// Poisson bracket evaluated in a given chart.
pub fn poisson_bracket_in_chart(
    chart: Chart,
    f: Observable,
    g: Observable,
    pt: &PhasePoint,
    params: &ModelParams,
) -> Result<f64, ClassicalError> {
    let r = params.r;
    let u = chart.coordinates(pt, r);
    let sin_t = u[0].sin();
    if sin_t.abs() < 1e-6 {
        return Err(ClassicalError::ChartSingularity);
    }
    let p_scale = (r * pt.p.norm()).max(r * r * params.b.abs()).max(params.m * params.alpha * r * r);
    let steps = [1e-5, 1e-5, 1e-5 * p_scale, 1e-5 * p_scale];
    let grad = |h: Observable| -> Vector4<f64> {
        let mut out = Vector4::zeros();
        for k in 0..4 {
            let mut up = u;
            let mut dn = u;
            up[k] += steps[k];
            dn[k] -= steps[k];
            out[k] = (h(&chart.point(&up, r)) - h(&chart.point(&dn, r))) / (2.0 * steps[k]);
        }
        out
    };
    let df = grad(f);
    let dg = grad(g);
    // ω^B = dθ∧dp_θ + dφ∧dp_φ − B r² sinθ dθ∧dφ
    let beta = params.b * r * r * sin_t;
    let omega = Matrix4::new(
        0.0, -beta, 1.0, 0.0, //
        beta, 0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, -1.0, 0.0, 0.0,
    );
    let inv = omega.try_inverse().ok_or(ClassicalError::ChartSingularity)?;
    Ok(-(df.transpose() * inv * dg)[(0, 0)])
}

/// Poisson bracket `{f, g}` for the magnetic symplectic form, using the
/// chart whose poles are farthest from the point.
pub fn poisson_bracket(
    f: Observable,
    g: Observable,
    pt: &PhasePoint,
    params: &ModelParams,
) -> Result<f64, ClassicalError> {
    let chart = if pt.x[2].abs() <= pt.x[0].abs() { Chart::Standard } else { Chart::Rotated };
    poisson_bracket_in_chart(chart, f, g, pt, params)
}

fn vector_field(x: &RVec3, p: &RVec3, params: &ModelParams) -> (RVec3, RVec3) {
    let (m, r, b) = (params.m, params.r, params.b);
    let dx = p / m;
    let dp = p.cross(x) * (b / (m * r)) - x * (p.norm_squared() / (m * r * r));
    (dx, dp)
}

/// Magnetic geodesic flow by RK4 with projection back onto the phase
/// space after every step. Returns `(t, point)` including `t = 0`.
pub fn flow(
    pt0: &PhasePoint,
    t_max: f64,
    dt: f64,
    params: &ModelParams,
) -> Result<Vec<(f64, PhasePoint)>, ClassicalError> {
    if !(dt > 0.0 && t_max >= dt) {
        return Err(ClassicalError::InvalidParams(format!("need dt > 0 and t_max ≥ dt (dt={dt}, t_max={t_max})")));
    }
    let steps = (t_max / dt).round() as usize;
    let r = params.r;
    let mut out = Vec::with_capacity(steps + 1);
    let mut cur = *pt0;
    out.push((0.0, cur));
    for n in 1..=steps {
        let (x, p) = (cur.x, cur.p);
        let (k1x, k1p) = vector_field(&x, &p, params);
        let (k2x, k2p) = vector_field(&(x + k1x * (dt / 2.0)), &(p + k1p * (dt / 2.0)), params);
        let (k3x, k3p) = vector_field(&(x + k2x * (dt / 2.0)), &(p + k2p * (dt / 2.0)), params);
        let (k4x, k4p) = vector_field(&(x + k3x * dt), &(p + k3p * dt), params);
        let nx = x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0);
        let np = p + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0);
        let next = PhasePoint::projected(nx, np, r);
        let h0 = energy(&cur, params);
        if h0 > 0.0 {
            let drift = (energy(&next, params) - h0).abs() / h0;
            if drift > 1e-3 {
                return Err(ClassicalError::StepTooLarge { drift });
            }
        }
        cur = next;
        out.push((n as f64 * dt, cur));
    }
    Ok(out)
}

/// `(sinh L / L, (cosh L − 1) / L²)` with series near `L = 0`.
fn shape_functions(l: f64) -> (f64, f64) {
    if l < 1e-4 {
        let l2 = l * l;
        (1.0 + l2 / 6.0, 0.5 + l2 / 24.0)
    } else {
        (l.sinh() / l, (l.cosh() - 1.0) / (l * l))
    }
}

/// Complexifier map `(x, p) ↦ a` onto the complex sphere `a·a = r²`:
///
/// `a = cosh L·x + i (sinh L/L)·p/(mα) + ((cosh L − 1)/L²)·B·J/(m²α²r)`
///
/// with `L = √(p² + r²B²)/(mαr)`.
pub fn complexifier_map(pt: &PhasePoint, params: &ModelParams) -> ComplexSpherePoint {
    let (m, a, r, b) = (params.m, params.alpha, params.r, params.b);
    let l = (pt.p.norm_squared() + r * r * b * b).sqrt() / (m * a * r);
    let (sl, cl) = shape_functions(l);
    let j = angular_momentum(pt, params);
    let re = pt.x * l.cosh() + j * (cl * b / (m * m * a * a * r));
    let im = pt.p * (sl / (m * a));
    ComplexSpherePoint { a: CVec3::new(c(re[0], im[0]), c(re[1], im[1]), c(re[2], im[2])) }
}

fn orthonormal_tangent(x: &RVec3) -> (RVec3, RVec3) {
    let n = x.normalize();
    let trial = if n[0].abs() < 0.9 { RVec3::x() } else { RVec3::y() };
    let t1 = (trial - n * n.dot(&trial)).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

fn shifted(base: &PhasePoint, t: &(RVec3, RVec3), d: &Vector4<f64>, r: f64) -> PhasePoint {
    let x = base.x + t.0 * d[0] + t.1 * d[1];
    let p = base.p + t.0 * d[2] + t.1 * d[3];
    PhasePoint::projected(x, p, r)
}

fn residual(pt: &PhasePoint, target: &CVec3, params: &ModelParams) -> SVector<f64, 6> {
    let a = complexifier_map(pt, params).a;
    let d = a - target;
    SVector::<f64, 6>::new(d[0].re, d[1].re, d[2].re, d[0].im, d[1].im, d[2].im)
}

/// Inverse of [`complexifier_map`] by damped Gauss–Newton over the four
/// tangent directions at the current iterate.
pub fn complexifier_inverse(target: &ComplexSpherePoint, params: &ModelParams) -> Result<PhasePoint, ClassicalError> {
    let r = params.r;
    let dev = (cdot(&target.a, &target.a) - r * r).norm();
    if dev > 1e-8 * r * r.max(target.a.norm()) {
        return Err(ClassicalError::NotOnQuadric(dev));
    }
    let re = target.real();
    if re.norm() < 1e-300 {
        return Err(ClassicalError::DegenerateStart);
    }
    let x0 = re * (r / re.norm());
    let p0 = target.imag() * (params.m * params.alpha);
    let mut cur = PhasePoint::projected(x0, p0, r);
    let p_unit = params.m * params.alpha * r;
    let tol = 1e-12 * r;
    let mut res = residual(&cur, &target.a, params);
    for _ in 0..50 {
        if res.norm() <= tol {
            return Ok(cur);
        }
        let t = orthonormal_tangent(&cur.x);
        let scale = Vector4::new(r, r, p_unit, p_unit);
        let mut jac = SMatrix::<f64, 6, 4>::zeros();
        for k in 0..4 {
            let h = 1e-7 * scale[k];
            let mut d = Vector4::zeros();
            d[k] = h;
            let fp = residual(&shifted(&cur, &t, &d, r), &target.a, params);
            d[k] = -h;
            let fm = residual(&shifted(&cur, &t, &d, r), &target.a, params);
            jac.set_column(k, &((fp - fm) / (2.0 * h)));
        }
        let normal = jac.transpose() * jac;
        let rhs = -(jac.transpose() * res);
        let step = normal.lu().solve(&rhs).ok_or(ClassicalError::NoConvergence { residual: res.norm() })?;
        let mut lambda = 1.0;
        loop {
            let trial = shifted(&cur, &t, &(step * lambda), r);
            let tres = residual(&trial, &target.a, params);
            if tres.norm() < res.norm() || lambda < 1e-4 {
                cur = trial;
                res = tres;
                break;
            }
            lambda *= 0.5;
        }
    }
    if res.norm() <= 1e-9 * r {
        Ok(cur)
    } else {
        Err(ClassicalError::NoConvergence { residual: res.norm() })
    }
}

/// `a` as a complex vector paired against a real one, handy for invariants.
pub fn complex_dot_real(a: &CVec3, v: &RVec3) -> C64 {
    cdot(a, &to_complex3(v))
}
