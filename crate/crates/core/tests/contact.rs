use std::f64::consts::PI;

use minmax_hj::grid::Grid;
use minmax_hj::hamiltonian::{Convexity, Coupling, Envelope, MinMaxFamily, Piece, Profile, SampleSet};
use minmax_hj::media::{sample_realization, MediumRealization, MediumSpec};
use minmax_hj::stable_pairs::*;
use minmax_hj::Error;

fn sin2() -> MediumRealization {
    sample_realization(&MediumSpec::sin2_1d("V", 1.0, 0.0, 1.0), 0).unwrap()
}

fn base_family(m: &MediumRealization) -> MinMaxFamily {
    let c = Piece::abs_additive(0.0, 1.0, -1.0, 0, 1.0).unwrap();
    let h = Piece::neg_abs_additive(0.0, 1.0, 1.0, 0, 1.0).unwrap();
    MinMaxFamily::verified(vec![c.into()], vec![h.into()], m, &SampleSet::lattice(m, 4.0, 33, 32)).unwrap()
}

fn x_grid() -> Grid {
    Grid::torus(1, 64, 1.0).unwrap()
}

#[test]
fn base_case_contact_fields() {
    let m = sin2();
    let f = base_family(&m);
    let c = contact_fields(&f, &m, &x_grid(), &ContactOptions::default()).unwrap();
    for (i, v) in c.m_fields[0].values.iter().enumerate() {
        let x = x_grid().coord(i);
        let s = (PI * x).sin();
        assert!((v - s * s).abs() < 1e-12, "m1({x}) = {v}");
        assert!((c.big_m_fields[0].values[i] - (1.0 + s * s)).abs() < 1e-12);
    }
    assert!((c.m_bar[0] - 1.0).abs() < 1e-12);
    assert!((c.big_m_under[0] - 1.0).abs() < 1e-12);
}

#[test]
fn x_independent_contact_is_constant() {
    let m = sample_realization(&MediumSpec::empty(1), 0).unwrap();
    let c = Piece::new(Profile::abs(0.0, 2.0, 0.0), Coupling::None, Convexity::Quasiconvex).unwrap();
    let h = Piece::new(Profile::neg_abs(0.0, 1.0, 3.0), Coupling::None, Convexity::Quasiconcave).unwrap();
    let f = MinMaxFamily::new(vec![c.into()], vec![h.into()]).unwrap();
    let k = contact_fields(&f, &m, &x_grid(), &ContactOptions::default()).unwrap();
    // 2r = 3 − r at r = 1
    assert!(k.m_fields[0].values.iter().all(|v| (v - 2.0).abs() < 1e-12));
    assert!((k.m_bar[0] - 2.0).abs() < 1e-12);
}

#[test]
fn unstable_family_is_reported_with_witness() {
    let m = sample_realization(&MediumSpec::empty(1), 0).unwrap();
    let c = Piece::new(Profile::abs(1.0, 1.0, 0.0), Coupling::None, Convexity::Quasiconvex).unwrap();
    let h = Piece::new(Profile::neg_abs(-1.0, 1.0, 3.0), Coupling::None, Convexity::Quasiconcave).unwrap();
    let f = MinMaxFamily::new(vec![c.into()], vec![h.into()]).unwrap();
    match contact_fields(&f, &m, &x_grid(), &ContactOptions::default()) {
        Err(Error::UnstablePair { pair, x, detail }) => {
            assert_eq!(pair, "(Ȟ1, Ĥ1)");
            assert_eq!(x, vec![0.0]);
            assert!(!detail.is_empty());
        }
        other => panic!("expected an unstable pair, got {other:?}"),
    }
}

#[test]
fn box_grows_until_delta_fits() {
    let m = sample_realization(&MediumSpec::empty(1), 0).unwrap();
    let c = Piece::new(Profile::abs(0.0, 1.0, 0.0), Coupling::None, Convexity::Quasiconvex).unwrap();
    let h = Piece::new(Profile::neg_abs(0.0, 1.0, 30.0), Coupling::None, Convexity::Quasiconcave).unwrap();
    let r = analyze_envelopes(&c.into(), &h.into(), &[0.0], &m, &ContactOptions::default()).unwrap();
    assert!(r.stable);
    assert!((r.contact_value_v - 15.0).abs() < 1e-10);
    assert!(r.search_box.half_width > 15.0);
}

#[test]
fn kappa_shift_examples() {
    let m = sin2();
    let f = base_family(&m);
    let c = contact_fields(&f, &m, &x_grid(), &ContactOptions::default()).unwrap();
    let s = SampleSet::random(&m, 3.0, 500, 9);
    let zero = kappa_shift(&f, 0.0, &c, 1).unwrap();
    let one = kappa_shift(&f, 1.0, &c, 1).unwrap();
    let half = kappa_shift(&f, 0.5, &c, 1).unwrap();
    let lvl = f.top_level();
    for (p, x) in s.zipped() {
        let h0 = f.value(lvl, p, x, &m).unwrap();
        assert_eq!(zero.value(lvl, p, x, &m).unwrap(), h0);
        // the added field is the interpolant of cos²(πx) on the x-grid
        let s2 = (PI * x[0]).cos().powi(2);
        let h1 = one.value(lvl, p, x, &m).unwrap();
        assert!((h1 - h0 - s2).abs() < 2e-3, "shift {} vs cos² {s2}", h1 - h0);
        let hh = half.value(lvl, p, x, &m).unwrap();
        assert!((hh - 0.5 * (h0 + h1)).abs() < 1e-12);
    }
    // exact on grid nodes
    for i in 0..64 {
        let x = [x_grid().coord(i)];
        let h0 = f.value(lvl, &[0.3], &x, &m).unwrap();
        let h1 = one.value(lvl, &[0.3], &x, &m).unwrap();
        assert!((h1 - h0 - (PI * x[0]).cos().powi(2)).abs() < 1e-12);
    }
    assert!(kappa_shift(&f, 1.5, &c, 1).is_err());
}

#[test]
fn kappa_one_is_identity_without_x_dependence() {
    let m = sample_realization(&MediumSpec::empty(1), 0).unwrap();
    let c = Piece::new(Profile::abs(0.0, 1.0, 0.0), Coupling::None, Convexity::Quasiconvex).unwrap();
    let h = Piece::new(Profile::neg_abs(0.0, 1.0, 1.0), Coupling::None, Convexity::Quasiconcave).unwrap();
    let f = MinMaxFamily::verified(vec![c.into()], vec![h.into()], &m, &SampleSet::lattice(&m, 2.0, 9, 1)).unwrap();
    let k = contact_fields(&f, &m, &x_grid(), &ContactOptions::default()).unwrap();
    let g = kappa_shift(&f, 1.0, &k, 1).unwrap();
    for p in [-2.0, -0.3, 0.0, 0.7, 1.9] {
        for x in [0.0, 0.4, 0.77] {
            assert_eq!(g.value(f.top_level(), &[p], &[x], &m).unwrap(), f.value(f.top_level(), &[p], &[x], &m).unwrap());
        }
    }
}

#[test]
fn condition_e_cases() {
    let m = sin2();
    let f = base_family(&m);
    let c = contact_fields(&f, &m, &x_grid(), &ContactOptions::default()).unwrap();
    assert!(check_condition_e(&f, &m, &c, &ContactOptions::default()).holds);

    // flat bottom on |p| ≤ 1 and an empty contact region, so m1 = min Ȟ1 = 0
    let m0 = sample_realization(&MediumSpec::empty(1), 0).unwrap();
    let flat = Piece::new(
        Profile::PiecewiseMonotone { center: vec![0.0], breakpoints: vec![0.0, 1.0, 2.0], values: vec![0.0, 0.0, 1.0] },
        Coupling::None,
        Convexity::Quasiconvex,
    )
    .unwrap();
    let hat = Piece::new(Profile::neg_abs(0.0, 1.0, -1.0), Coupling::None, Convexity::Quasiconcave).unwrap();
    let g = MinMaxFamily::new(vec![flat.into()], vec![hat.into()]).unwrap();
    let k = contact_fields(&g, &m0, &x_grid(), &ContactOptions::default()).unwrap();
    assert!(k.m_bar[0].abs() < 1e-12);
    let r = check_condition_e(&g, &m0, &k, &ContactOptions::default());
    assert!(!r.holds);
    assert!(r.witness.unwrap().contains("Ȟ1"));
}

fn two_level(m: &MediumRealization, second_offset: f64) -> MinMaxFamily {
    let c1 = Piece::abs_additive(0.0, 1.0, -1.0, 0, 1.0).unwrap();
    let h1 = Piece::neg_abs_additive(0.0, 1.0, 1.0, 0, 1.0).unwrap();
    let c2 = Piece::new(Profile::abs(0.0, 1.0, -3.0 + second_offset), Coupling::None, Convexity::Quasiconvex).unwrap();
    let h2 = Piece::new(Profile::neg_abs(0.0, 1.0, 4.0), Coupling::None, Convexity::Quasiconcave).unwrap();
    let checks: Vec<Envelope> = vec![c1.into(), c2.into()];
    let hats: Vec<Envelope> = vec![h1.into(), h2.into()];
    MinMaxFamily::verified(checks, hats, m, &SampleSet::lattice(m, 6.0, 49, 16)).unwrap()
}

#[test]
fn perturbation_makes_equal_levels_strict() {
    let m = sin2();
    // Ȟ2 = |p| − 2 meets Ĥ2 = 4 − |p| at 1, so m̄2 = m̄1 = 1
    let f = two_level(&m, 1.0);
    let opts = ContactOptions::default();
    let c = contact_fields(&f, &m, &x_grid(), &opts).unwrap();
    assert!((c.m_bar[1] - 1.0).abs() < 1e-12);
    let mono = check_monotonicity(&c);
    assert!(mono.holds_m && !mono.holds_m_strict);
    let eps = 0.01;
    let out = perturb_to_strict(&f, eps, &m, &x_grid(), &opts).unwrap();
    let after = check_monotonicity(&out.constants);
    assert!(after.holds_m_strict);
    let gap = out.constants.m_bar[0] - out.constants.m_bar[1];
    assert!(gap >= eps / 4.0, "gap {gap}");
    for k in 0..2 {
        assert!((out.constants.m_bar[k] - c.m_bar[k]).abs() <= eps);
        assert!((out.constants.big_m_under[k] - c.big_m_under[k]).abs() <= eps);
    }
    let s = SampleSet::random(&m, 6.0, 1000, 3);
    let lvl = f.top_level();
    let mut worst: f64 = 0.0;
    for (p, x) in s.zipped() {
        worst = worst.max((f.value(lvl, p, x, &m).unwrap() - out.family.value(lvl, p, x, &m).unwrap()).abs());
    }
    assert!(worst < eps, "distance {worst}");
    assert!(perturb_to_strict(&f, 0.0, &m, &x_grid(), &opts).is_err());
}

#[test]
fn strict_family_keeps_distance_bound() {
    let m = sin2();
    let f = two_level(&m, 0.0);
    let opts = ContactOptions::default();
    let out = perturb_to_strict(&f, 0.05, &m, &x_grid(), &opts).unwrap();
    assert!(check_monotonicity(&out.constants).holds_m_strict);
    let s = SampleSet::random(&m, 6.0, 500, 4);
    for (p, x) in s.zipped() {
        let d = (f.value(f.top_level(), p, x, &m).unwrap() - out.family.value(f.top_level(), p, x, &m).unwrap()).abs();
        assert!(d < 0.05);
    }
}

#[test]
fn contact_value_is_grid_stable() {
    let m = sin2();
    let f = base_family(&m);
    let coarse = ContactOptions { n_p: 129, ..ContactOptions::default() };
    let fine = ContactOptions { n_p: 257, ..ContactOptions::default() };
    for x in [0.1, 0.37, 0.5] {
        let a = analyze_envelopes(f.check(1), f.hat(1), &[x], &m, &coarse).unwrap();
        let b = analyze_envelopes(f.check(1), f.hat(1), &[x], &m, &fine).unwrap();
        let h = 8.0 / 128.0;
        assert!((a.contact_value_v - b.contact_value_v).abs() <= h);
        // the contact value is the check at each refined boundary point
        for p in &b.boundary_points {
            assert!((f.check(1).value(p, &[x], &m) - b.contact_value_v).abs() <= b.tolerance);
        }
    }
}
