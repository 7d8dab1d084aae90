//! End to end: classical point, coherent state, transform and back.

use monosphere::classical::{complexifier_map, params_from_twist, PhasePoint};
use monosphere::linalg::RVec3;
use monosphere::quantum::{build_space, OperatorSet, TwistedHilbert};
use monosphere::sbt::{recover_from_samples, sbt_transform};
use monosphere::states::{coherent_state, coherent_state_lenient, eigen_residual, husimi_grid, HusimiGridSpec};

fn space(twice_l: i32, twice_j_max: i32, tau: f64) -> TwistedHilbert {
    let p = params_from_twist(twice_l, 1.3, 0.7, 1.1, 0.9).unwrap().with_tau(tau).unwrap();
    build_space(twice_l, twice_j_max, p).unwrap()
}

fn point(r: f64) -> PhasePoint {
    PhasePoint::projected(RVec3::new(0.3, -0.5, 0.8), RVec3::new(0.2, 0.4, 0.1), r)
}

#[test]
fn coherent_state_round_trips_through_the_transform() {
    // undoing the heat factor amplifies sampling error by e^{τj(j+1)/2}, so
    // the truncation stays small
    for twice_l in [-2, 0, 1, 3] {
        let s = space(twice_l, twice_l.abs() + 10, 0.2);
        let a = complexifier_map(&point(s.params.r), &s.params);
        let cs = coherent_state_lenient(&a, &s).unwrap();
        let section = sbt_transform(&cs.vec, &s).unwrap();
        let back = recover_from_samples(&section).unwrap();
        let err = (&back.coeffs - &cs.vec.coeffs).norm() / cs.vec.norm();
        assert!(err < 1e-10, "2l={twice_l}: {err:e}");
        let c = section.constraint_residual(&a);
        assert!(c < 1e-10, "2l={twice_l}: constraint {c:e}");
    }
}

#[test]
fn coherent_state_from_a_phase_point_is_an_eigenvector() {
    let s = space(1, 31, 0.3);
    let a = complexifier_map(&point(s.params.r), &s.params);
    let cs = coherent_state(&a, &s).unwrap();
    let ops = OperatorSet::build(&s).unwrap();
    let res = eigen_residual(&cs, &s, &ops.x).unwrap();
    assert!(res.iter().all(|&x| x < 1e-6), "{res:?}");
}

#[test]
fn husimi_values_are_bounded_by_the_norm() {
    // |⟨χ_b, χ_a⟩|² / ‖χ_b‖² ≤ ‖χ_a‖² by Cauchy–Schwarz
    let s = space(2, 22, 0.3);
    let a = complexifier_map(&point(s.params.r), &s.params);
    let cs = coherent_state(&a, &s).unwrap();
    let spec = HusimiGridSpec { n_s: 3, n_theta: 6, n_phi: 12, s_max: 1.0, v_angle: 0.0 };
    let grid = husimi_grid(&cs.vec, &spec, &s).unwrap();
    let bound = cs.vec.coeffs.norm_squared();
    assert!(grid.values.iter().all(|&v| v >= 0.0 && v <= bound * (1.0 + 1e-12)));
    assert!(grid.values.iter().cloned().fold(0.0, f64::max) > 0.1 * bound);
}
