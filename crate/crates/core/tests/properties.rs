//! Property tests for the invariants of each module.

use monosphere::classical::{
    angular_momentum, complexifier_inverse, complexifier_map, energy, flow, params_from_twist, ModelParams, PhasePoint,
};
use monosphere::groups::{
    covering_map, exp_sl2c, exp_su2, polar_decompose, radial_coordinate, wigner_d, wigner_d_direct, AlgebraElement,
    GroupElement,
};
use monosphere::linalg::{c, cdot, inner, CMat, RVec3};
use monosphere::quantum::{build_space, left_action, relation_report, OperatorSet};
use monosphere::sbt::{nu_group, sector_isometry};
use monosphere::states::{coherent_state_lenient, from_polar, polar_form};
use proptest::prelude::*;

fn su2(v: [f64; 3]) -> GroupElement {
    exp_su2(&AlgebraElement::new(v[0], v[1], v[2]))
}

fn angles() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-4.0..4.0f64)
}

fn params(twice_l: i32) -> ModelParams {
    params_from_twist(twice_l, 1.3, 0.7, 1.1, 0.9).unwrap()
}

fn phase_point(x: [f64; 3], p: [f64; 3], r: f64) -> PhasePoint {
    PhasePoint::projected(RVec3::from(x), RVec3::from(p), r)
}

fn direction() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0..1.0f64).prop_filter("away from zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 0.05)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn covering_map_is_a_two_to_one_homomorphism(u in angles(), v in angles()) {
        let (gu, gv) = (su2(u), su2(v));
        let ru = covering_map(&gu).unwrap();
        let rv = covering_map(&gv).unwrap();
        let ruv = covering_map(&gu.mul(&gv)).unwrap();
        prop_assert!((ruv - ru * rv).norm() < 1e-12);
        prop_assert!((covering_map(&gu.neg()).unwrap() - ru).norm() < 1e-12);
        prop_assert!((ru.transpose() * ru - nalgebra::Matrix3::identity()).norm() < 1e-12);
        prop_assert!((ru.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wigner_d_is_a_unitary_representation(twice_j in 0i32..=16, u in angles(), v in angles()) {
        let (gu, gv) = (su2(u), su2(v));
        let du = wigner_d(twice_j, &gu);
        let n = (twice_j + 1) as usize;
        prop_assert!((du.adjoint() * &du - CMat::identity(n, n)).norm() < 1e-11);
        let product = wigner_d(twice_j, &gu.mul(&gv));
        prop_assert!((product - &du * wigner_d(twice_j, &gv)).norm() < 1e-11);
        prop_assert!((du - wigner_d_direct(twice_j, &gu)).norm() < 1e-10);
    }

    #[test]
    fn polar_decomposition_reconstructs(re in angles(), dir in direction(), s in 0.0..4.0f64) {
        let d = RVec3::from(dir).normalize() * s;
        let g = su2(re).mul(&exp_sl2c(&[c(0.0, -d[0]), c(0.0, -d[1]), c(0.0, -d[2])]));
        let pd = polar_decompose(&g).unwrap();
        prop_assert!(pd.k.is_unitary());
        prop_assert!((pd.s - radial_coordinate(&g)).abs() < 1e-8);
        prop_assert!((pd.s - s).abs() < 1e-8);
        let back = pd.k.mul(&pd.positive_part());
        prop_assert!((back.matrix() - g.matrix()).norm() < 1e-9 * s.cosh());
    }

    #[test]
    fn angular_momentum_identities(x in direction(), p in prop::array::uniform3(-3.0..3.0f64), twice_l in -6i32..=6) {
        let prm = params(twice_l);
        let pt = phase_point(x, p, prm.r);
        let j = angular_momentum(&pt, &prm);
        let (r, b) = (prm.r, prm.b);
        let scale = 1.0 + pt.p.norm_squared() * r * r + r.powi(4) * b * b;
        prop_assert!((j.dot(&pt.x) + r.powi(3) * b).abs() < 1e-12 * scale);
        prop_assert!((j.norm_squared() - r * r * pt.p.norm_squared() - r.powi(4) * b * b).abs() < 1e-12 * scale);
    }

    #[test]
    fn complexifier_lands_on_the_quadric_and_inverts(x in direction(), p in prop::array::uniform3(-1.5..1.5f64), twice_l in -4i32..=4) {
        let prm = params(twice_l);
        let pt = phase_point(x, p, prm.r);
        let a = complexifier_map(&pt, &prm);
        let r2 = prm.r * prm.r;
        prop_assert!((cdot(&a.a, &a.a) - c(r2, 0.0)).norm() < 1e-12 * a.a.norm_squared().max(r2));
        let back = complexifier_inverse(&a, &prm).unwrap();
        prop_assert!(back.distance(&pt) < 1e-8 * (1.0 + pt.p.norm()));
    }

    #[test]
    fn flow_conserves_energy_and_angular_momentum(x in direction(), p in prop::array::uniform3(-1.0..1.0f64), twice_l in -4i32..=4) {
        let prm = params(twice_l);
        let pt = phase_point(x, p, prm.r);
        let path = flow(&pt, 2.0, 1e-3, &prm).unwrap();
        let (e0, j0) = (energy(&pt, &prm), angular_momentum(&pt, &prm));
        let (_, last) = path.last().unwrap();
        prop_assert!((energy(last, &prm) - e0).abs() < 1e-9 * (1.0 + e0));
        prop_assert!((angular_momentum(last, &prm) - j0).norm() < 1e-9 * (1.0 + j0.norm()));
    }

    #[test]
    fn polar_form_round_trips(u in direction(), w in direction(), s in 0.0..3.0f64) {
        let r = 1.3;
        let u = RVec3::from(u).normalize();
        let v = RVec3::from(w) - u * u.dot(&RVec3::from(w));
        prop_assume!(v.norm() > 1e-3);
        let v = v.normalize();
        let a = from_polar(s, &u, &v, r);
        prop_assert!((cdot(&a.a, &a.a) - c(r * r, 0.0)).norm() < 1e-12 * (r * s.cosh()).powi(2));
        let (s2, u2, v2) = polar_form(&a, r);
        prop_assert!((s2 - s).abs() < 1e-10);
        prop_assert!((u2 - u).norm() < 1e-10);
        if s > 1e-6 {
            prop_assert!((v2 - v).norm() < 1e-9);
        }
    }

    #[test]
    fn radial_density_is_positive_and_decreasing(tau in 0.05..3.0f64, s in 0.0..6.0f64) {
        let nu = nu_group(tau);
        let (a, b) = (nu.profile(s), nu.profile(s + 0.1));
        prop_assert!(a > 0.0 || a == 0.0 && b == 0.0);
        prop_assert!(b <= a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn operator_relations_hold_for_any_twist(twice_l in -4i32..=4, extra in 0i32..=4, tau in 0.1..1.0f64) {
        let tjm = twice_l.abs() + 2 * extra + 2;
        let prm = params(twice_l).with_tau(tau).unwrap();
        let space = build_space(twice_l, tjm, prm).unwrap();
        let ops = OperatorSet::build(&space).unwrap();
        let rep = relation_report(&space, &ops);
        for name in ["[J_j,J_k] = i hbar eps_jkl J_l", "[J_j,X_k] = i hbar eps_jkl X_l", "J.X = r hbar l", "J x J = i hbar J"] {
            let res = rep.get(name).unwrap();
            prop_assert!(res.norm_full < 1e-11, "{} = {}", name, res.norm_full);
        }
        // products of two X reach past the top shell
        for name in ["[X_j,X_k] = 0", "X.X = r^2"] {
            let res = rep.get(name).unwrap();
            prop_assert!(res.norm_interior < 1e-9, "{} = {}", name, res.norm_interior);
        }
    }

    #[test]
    fn coherent_states_transform_covariantly(twice_l in -2i32..=2, u in angles(), x in direction(), p in prop::array::uniform3(-0.5..0.5f64)) {
        let prm = params(twice_l).with_tau(0.3).unwrap();
        let space = build_space(twice_l, twice_l.abs() + 20, prm).unwrap();
        let a = complexifier_map(&phase_point(x, p, prm.r), &prm);
        let g = su2(u);
        let rot = covering_map(&g).unwrap().map(|v| c(v, 0.0));
        let ra = monosphere::classical::ComplexSpherePoint { a: rot * a.a };
        let chi = coherent_state_lenient(&a, &space).unwrap().vec.coeffs;
        let moved = left_action(&space, &g).apply(&chi);
        let chi_r = coherent_state_lenient(&ra, &space).unwrap().vec.coeffs;
        let n = chi_r.norm();
        prop_assert!((moved.norm() - n).abs() < 1e-10 * n);
        prop_assert!((inner(&moved, &chi_r).norm() - moved.norm() * n).abs() < 1e-10 * n * n);
    }

    #[test]
    fn zero_twist_sectors_are_isometric(tau in 0.1..2.0f64, twice_j in 0i32..=10, m_frac in 0.0..1.0f64) {
        let prm = params(0).with_tau(tau).unwrap();
        let space = build_space(0, 10, prm).unwrap();
        let twice_j = twice_j & !1;
        let twice_m = -twice_j + 2 * (m_frac * twice_j as f64).round() as i32;
        let ratio = sector_isometry(&space, twice_j, twice_m).unwrap();
        prop_assert!((ratio - 1.0).abs() < 1e-6, "ratio {}", ratio);
    }
}
