//! One function per subcommand. Each writes its artifacts and returns the
//! report body to be merged into the envelope.

use crate::config::RunConfig;
use crate::report::{check, csv_text, f12, f17, num, nums, write_atomic};
use monosphere::classical::{
    angular_momentum, complexifier_inverse, complexifier_map, energy, flow, ComplexSpherePoint, ModelParams, PhasePoint,
};
use monosphere::linalg::{cdot, RVec3};
use monosphere::quantum::{build_space, position_operators, relation_report, OperatorSet, StateVector, TwistedHilbert};
use monosphere::sbt::{isometry_check, sector_isometry, IsometryOptions, SbtError};
use monosphere::states::{
    coherent_state_lenient, eigen_residual, expectations, from_polar, husimi_grid, CoherentState, HusimiGridSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};
use std::path::PathBuf;
use thiserror::Error;

/// Radial profile convention written into `sbt` reports.
pub const RADIAL_PROFILE: &str =
    "nu(s) = (pi tau)^(-3/2) exp(-tau/4) (s / sinh s) exp(-s^2 / tau), s = hyperbolic distance of Re a from the real sphere (a_s = diag(e^(s/2), e^(-s/2)))";

const TRAJECTORY_STEPS: usize = 10_000;
const AMAP_POINTS: usize = 100;
const COHERENT_S_MAX: f64 = 0.5;
const HUSIMI_S_MAX: f64 = 1.0;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SbtMode {
    Sector,
    Full,
}

/// Effective settings for one run after command-line overrides.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: RunConfig,
    pub params: ModelParams,
    pub twice_j_max: i32,
    pub out: PathBuf,
    pub grid: (usize, usize),
    pub mode: SbtMode,
}

impl Context {
    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed)
    }

    fn space(&self) -> Result<TwistedHilbert, CommandError> {
        build_space(self.params.twice_l, self.twice_j_max, self.params).map_err(|e| CommandError::Usage(e.to_string()))
    }

    fn write(&self, name: &str, text: &str) -> Result<(), CommandError> {
        Ok(write_atomic(&self.out, name, text.as_bytes())?)
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> CommandError {
    CommandError::Numerical(e.to_string())
}

fn vec3(v: &RVec3) -> Value {
    nums(&[v[0], v[1], v[2]])
}

fn random_unit(rng: &mut ChaCha8Rng) -> RVec3 {
    loop {
        let v = RVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_tangent(rng: &mut ChaCha8Rng, u: &RVec3) -> RVec3 {
    loop {
        let w = random_unit(rng);
        let t = w - u * u.dot(&w);
        if t.norm() > 1e-3 {
            return t.normalize();
        }
    }
}

fn random_phase_point(rng: &mut ChaCha8Rng, prm: &ModelParams, p_max: f64) -> PhasePoint {
    let u = random_unit(rng);
    let t = random_tangent(rng, &u);
    let p = rng.gen_range(0.0..=p_max);
    PhasePoint::projected(u * prm.r, t * p, prm.r)
}

fn seeded_complex_point(ctx: &Context) -> (f64, ComplexSpherePoint) {
    let mut rng = ctx.rng();
    let u = random_unit(&mut rng);
    let v = random_tangent(&mut rng, &u);
    let s = rng.gen_range(0.0..=COHERENT_S_MAX);
    (s, from_polar(s, &u, &v, ctx.params.r))
}

fn seeded_coherent_state(ctx: &Context, space: &TwistedHilbert) -> Result<(f64, CoherentState), CommandError> {
    let (s, a) = seeded_complex_point(ctx);
    let cs = coherent_state_lenient(&a, space).map_err(numerical)?;
    Ok((s, cs))
}

pub fn params(ctx: &Context) -> Result<Map<String, Value>, CommandError> {
    let p = &ctx.params;
    let flux = p.flux_number();
    let mut m = Map::new();
    m.insert("twice_l".into(), p.twice_l.into());
    m.insert("b".into(), num(p.b));
    m.insert("tau".into(), num(p.tau));
    m.insert("flux_number".into(), num(flux));
    m.insert("flux_integer".into(), (flux.round() as i64).into());
    m.insert(
        "checks".into(),
        Value::Array(vec![check("flux_minus_twice_l", (flux - p.twice_l as f64).abs(), ctx.cfg.tolerance("flux"))]),
    );
    Ok(m)
}

pub const TRAJECTORY_HEADER: [&str; 11] = ["t", "x1", "x2", "x3", "p1", "p2", "p3", "J1", "J2", "J3", "H"];

pub fn trajectory(ctx: &Context) -> Result<Map<String, Value>, CommandError> {
    let p = &ctx.params;
    let mut rng = ctx.rng();
    let pt0 = random_phase_point(&mut rng, p, p.m * p.alpha * p.r);
    let dt = 1e-3 / p.alpha;
    let traj = flow(&pt0, TRAJECTORY_STEPS as f64 * dt, dt, p).map_err(numerical)?;
    let j0 = angular_momentum(&pt0, p);
    let h0 = energy(&pt0, p);
    let (mut dj, mut dh) = (0.0_f64, 0.0_f64);
    let mut rows = Vec::with_capacity(traj.len());
    for (t, pt) in &traj {
        let j = angular_momentum(pt, p);
        let h = energy(pt, p);
        dj = dj.max((j - j0).norm() / j0.norm().max(f64::MIN_POSITIVE));
        dh = dh.max((h - h0).abs() / h0.abs().max(f64::MIN_POSITIVE));
        let mut row = vec![f17(*t)];
        row.extend([pt.x[0], pt.x[1], pt.x[2], pt.p[0], pt.p[1], pt.p[2], j[0], j[1], j[2], h].map(f17));
        rows.push(row);
    }
    ctx.write("trajectory.csv", &csv_text(&TRAJECTORY_HEADER, &rows))?;
    let tol = ctx.cfg.tolerance("flow_drift");
    let mut m = Map::new();
    m.insert("steps".into(), (traj.len() - 1).into());
    m.insert("dt".into(), num(dt));
    m.insert("x0".into(), vec3(&pt0.x));
    m.insert("p0".into(), vec3(&pt0.p));
    m.insert("checks".into(), Value::Array(vec![check("j_drift", dj, tol), check("h_drift", dh, tol)]));
    Ok(m)
}

pub const AMAP_HEADER: [&str; 14] = [
    "x1",
    "x2",
    "x3",
    "p1",
    "p2",
    "p3",
    "a1_re",
    "a1_im",
    "a2_re",
    "a2_im",
    "a3_re",
    "a3_im",
    "quadric_residual",
    "inverse_error",
];

pub fn amap(ctx: &Context) -> Result<Map<String, Value>, CommandError> {
    let p = &ctx.params;
    let mut rng = ctx.rng();
    let p_unit = p.m * p.alpha * p.r;
    let (mut worst_q, mut worst_inv) = (0.0_f64, 0.0_f64);
    let mut rows = Vec::with_capacity(AMAP_POINTS);
    for _ in 0..AMAP_POINTS {
        let pt = random_phase_point(&mut rng, p, 2.0 * p_unit);
        let a = complexifier_map(&pt, p);
        let q = (cdot(&a.a, &a.a) - p.r * p.r).norm() / (p.r * p.r);
        let inv = match complexifier_inverse(&a, p) {
            Ok(back) => ((back.x - pt.x).norm() / p.r).max((back.p - pt.p).norm() / p_unit),
            Err(_) => f64::NAN,
        };
        worst_q = worst_q.max(q);
        worst_inv = if inv.is_nan() || worst_inv.is_nan() { f64::NAN } else { worst_inv.max(inv) };
        let mut row: Vec<String> = [pt.x[0], pt.x[1], pt.x[2], pt.p[0], pt.p[1], pt.p[2]].map(f17).to_vec();
        for k in 0..3 {
            row.push(f17(a.a[k].re));
            row.push(f17(a.a[k].im));
        }
        row.push(f17(q));
        row.push(f17(inv));
        rows.push(row);
    }
    ctx.write("amap.csv", &csv_text(&AMAP_HEADER, &rows))?;
    let mut m = Map::new();
    m.insert("points".into(), AMAP_POINTS.into());
    m.insert(
        "checks".into(),
        Value::Array(vec![
            check("quadric_residual", worst_q, ctx.cfg.tolerance("quadric")),
            check("inverse_error", worst_inv, ctx.cfg.tolerance("inverse")),
        ]),
    );
    Ok(m)
}

/// Relations whose residual vanishes on every retained entry.
fn is_exact_relation(name: &str) -> bool {
    name.starts_with("[J_j,") || name.starts_with("J.X") || name.starts_with("J x J")
}

pub fn operators(ctx: &Context) -> Result<Map<String, Value>, CommandError> {
    let space = ctx.space()?;
    let ops = OperatorSet::build(&space).map_err(numerical)?;
    let report = relation_report(&space, &ops);
    let exact = ctx.cfg.tolerance("relation_exact");
    let interior = ctx.cfg.tolerance("relation_interior");
    let relations: Vec<Value> = report
        .residuals
        .iter()
        .map(|r| {
            let (measured, tol) =
                if is_exact_relation(&r.relation) { (r.norm_full, exact) } else { (r.norm_interior, interior) };
            let mut e = Map::new();
            e.insert("relation".into(), Value::String(r.relation.clone()));
            e.insert("norm_full".into(), num(r.norm_full));
            e.insert("norm_interior".into(), num(r.norm_interior));
            e.insert("j_max".into(), report.twice_j_max.into());
            e.insert("twice_l".into(), report.twice_l.into());
            e.insert("tau".into(), num(report.tau));
            e.insert("tolerance".into(), num(tol));
            e.insert("breach".into(), Value::Bool(!(measured <= tol)));
            Value::Object(e)
        })
        .collect();
    let mut m = Map::new();
    m.insert("twice_l".into(), space.twice_l.into());
    m.insert("j_max".into(), space.twice_j_max.into());
    m.insert("tau".into(), num(space.params.tau));
    m.insert("interior_shells".into(), space.interior_shells().into());
    m.insert("relations".into(), Value::Array(relations));
    Ok(m)
}

pub const COHERENT_HEADER: [&str; 4] = ["twice_j", "twice_m", "re", "im"];

fn complex_point(a: &ComplexSpherePoint) -> Value {
    let mut m = Map::new();
    m.insert("re".into(), vec3(&a.real()));
    m.insert("im".into(), vec3(&a.imag()));
    Value::Object(m)
}

pub fn coherent(ctx: &Context) -> Result<Map<String, Value>, CommandError> {
    let space = ctx.space()?;
    let (s, cs) = seeded_coherent_state(ctx, &space)?;
    let x = position_operators(&space);
    let j = monosphere::quantum::angular_momentum_operators(&space);
    let rho = eigen_residual(&cs, &space, &x).map_err(numerical)?;
    let (ex, ej) = expectations(&cs, &x, &j);
    let norm = cs.vec.norm();
    let rows: Vec<Vec<String>> = (0..space.dim())
        .map(|i| {
            let (tj, tm) = space.label(i);
            let z = cs.vec.coeffs[i] / norm;
            vec![tj.to_string(), tm.to_string(), f17(z.re), f17(z.im)]
        })
        .collect();
    ctx.write("coherent.csv", &csv_text(&COHERENT_HEADER, &rows))?;
    let mut m = Map::new();
    m.insert("twice_l".into(), space.twice_l.into());
    m.insert("j_max".into(), space.twice_j_max.into());
    m.insert("tau".into(), num(space.params.tau));
    m.insert("a".into(), complex_point(cs.a()));
    m.insert("s".into(), num(s));
    m.insert("norm".into(), num(norm));
    m.insert("tail_mass".into(), num(cs.tail_mass));
    m.insert("eigen_residual".into(), nums(&rho));
    m.insert("expect_x".into(), vec3(&ex));
    m.insert("expect_j".into(), vec3(&ej));
    let worst = rho.iter().cloned().fold(0.0, f64::max);
    m.insert(
        "checks".into(),
        Value::Array(vec![
            check("eigen_residual", worst, ctx.cfg.tolerance("eigen_residual")),
            check("tail_mass", cs.tail_mass, ctx.cfg.tolerance("tail_mass")),
        ]),
    );
    Ok(m)
}

pub const HUSIMI_HEADER: [&str; 4] = ["s", "theta", "phi", "value"];

pub fn husimi(ctx: &Context) -> Result<Map<String, Value>, CommandError> {
    let space = ctx.space()?;
    let (_, cs) = seeded_coherent_state(ctx, &space)?;
    let (n_s, n_t) = ctx.grid;
    let spec = HusimiGridSpec { n_s, n_theta: n_t, n_phi: 2 * n_t, s_max: HUSIMI_S_MAX, v_angle: 0.0 };
    let psi = StateVector::new(&cs.vec.coeffs / monosphere::linalg::cr(cs.vec.norm()));
    let grid = husimi_grid(&psi, &spec, &space).map_err(numerical)?;
    let mut rows = Vec::with_capacity(grid.values.len());
    for is in 0..n_s {
        for it in 0..n_t {
            for ip in 0..spec.n_phi {
                rows.push(vec![
                    f12(spec.s_at(is)),
                    f12(spec.theta_at(it)),
                    f12(spec.phi_at(ip)),
                    f12(grid.value(is, it, ip)),
                ]);
            }
        }
    }
    ctx.write("husimi.csv", &csv_text(&HUSIMI_HEADER, &rows))?;
    let (is, it, ip) = grid.argmax();
    let mut g = Map::new();
    g.insert("n_s".into(), n_s.into());
    g.insert("n_theta".into(), n_t.into());
    g.insert("n_phi".into(), spec.n_phi.into());
    g.insert("s_max".into(), num(spec.s_max));
    g.insert("v_angle".into(), num(spec.v_angle));
    let mut peak = Map::new();
    peak.insert("s".into(), num(spec.s_at(is)));
    peak.insert("theta".into(), num(spec.theta_at(it)));
    peak.insert("phi".into(), num(spec.phi_at(ip)));
    peak.insert("value".into(), num(grid.value(is, it, ip)));
    let mut m = Map::new();
    m.insert("twice_l".into(), space.twice_l.into());
    m.insert("j_max".into(), space.twice_j_max.into());
    m.insert("tau".into(), num(space.params.tau));
    m.insert("a".into(), complex_point(cs.a()));
    m.insert("grid".into(), Value::Object(g));
    m.insert("peak".into(), Value::Object(peak));
    m.insert("riemann_sum".into(), num(grid.riemann_sum()));
    m.insert("checks".into(), Value::Array(vec![check("tail_mass", cs.tail_mass, ctx.cfg.tolerance("tail_mass"))]));
    Ok(m)
}

pub const SECTOR_HEADER: [&str; 3] = ["twice_j", "ratio", "deviation"];

fn sbt_error(e: SbtError) -> CommandError {
    match e {
        SbtError::NeedsZeroTwist { .. } => CommandError::Usage(e.to_string()),
        other => numerical(other),
    }
}

pub fn sbt(ctx: &Context) -> Result<Map<String, Value>, CommandError> {
    let space = ctx.space()?;
    let mut m = Map::new();
    m.insert("twice_l".into(), space.twice_l.into());
    m.insert("j_max".into(), space.twice_j_max.into());
    m.insert("tau".into(), num(space.params.tau));
    m.insert("radial_profile".into(), Value::String(RADIAL_PROFILE.into()));
    match ctx.mode {
        SbtMode::Sector => {
            if space.twice_l != 0 {
                return Err(sbt_error(SbtError::NeedsZeroTwist { twice_l: space.twice_l }));
            }
            let tol = ctx.cfg.tolerance("sector");
            let mut rows = Vec::new();
            let mut sectors = Vec::new();
            for &tj in space.shells() {
                let ratio = sector_isometry(&space, tj, 0).map_err(sbt_error)?;
                let dev = (ratio - 1.0).abs();
                rows.push(vec![tj.to_string(), f17(ratio), f17(dev)]);
                let mut e = Map::new();
                e.insert("twice_j".into(), tj.into());
                e.insert("ratio".into(), num(ratio));
                e.insert("deviation".into(), num(dev));
                e.insert("tolerance".into(), num(tol));
                e.insert("breach".into(), Value::Bool(!(dev <= tol)));
                sectors.push(Value::Object(e));
            }
            ctx.write("sbt_sector.csv", &csv_text(&SECTOR_HEADER, &rows))?;
            m.insert("mode".into(), Value::String("sector".into()));
            m.insert("sectors".into(), Value::Array(sectors));
        }
        SbtMode::Full => {
            let mut rng = ctx.rng();
            let v = monosphere::linalg::CVec::from_fn(space.dim(), |_, _| {
                monosphere::linalg::c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let n = v.norm();
            let psi = StateVector::new(v / monosphere::linalg::cr(n));
            let rep = isometry_check(&psi, &space, &IsometryOptions::default()).map_err(sbt_error)?;
            let tol =
                if space.twice_l == 0 { ctx.cfg.tolerance("isometry") } else { ctx.cfg.tolerance("isometry_twisted") };
            let mut nodes = Map::new();
            nodes.insert("frame".into(), rep.nodes.frame.into());
            nodes.insert("radial".into(), rep.nodes.radial.into());
            nodes.insert("sigma".into(), rep.nodes.sigma.into());
            nodes.insert("theta".into(), rep.nodes.theta.into());
            m.insert("mode".into(), Value::String("full".into()));
            m.insert("ratio".into(), num(rep.ratio));
            m.insert("error_estimate".into(), num(rep.error_estimate));
            m.insert("s_max".into(), num(rep.s_max));
            m.insert("nodes".into(), Value::Object(nodes));
            m.insert("checks".into(), Value::Array(vec![check("ratio_deviation", (rep.ratio - 1.0).abs(), tol)]));
        }
    }
    Ok(m)
}
