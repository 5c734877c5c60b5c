use minmax_hj::effective::*;
use minmax_hj::grid::Grid;
use minmax_hj::hamiltonian::*;
use minmax_hj::media::{sample_realization, MediumRealization, MediumSpec};
use minmax_hj::stable_pairs::{contact_fields, ContactConstants, ContactOptions};

fn sin2() -> MediumRealization {
    sample_realization(&MediumSpec::sin2_1d("V", 1.0, 0.0, 1.0), 0).unwrap()
}

fn flat() -> MediumRealization {
    sample_realization(&MediumSpec::empty(1), 0).unwrap()
}

fn base_family(m: &MediumRealization) -> MinMaxFamily {
    let c = Piece::abs_additive(0.0, 1.0, -1.0, 0, 1.0).unwrap();
    let h = Piece::neg_abs_additive(0.0, 1.0, 1.0, 0, 1.0).unwrap();
    MinMaxFamily::verified(vec![c.into()], vec![h.into()], m, &SampleSet::lattice(m, 4.0, 33, 32)).unwrap()
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn opts(n: usize) -> EstimateOptions {
    EstimateOptions::new(vec![1e-1, 3e-2, 1e-2, 3e-3], Grid::torus(1, n, 1.0).unwrap())
}

#[test]
fn separable_oracle_examples() {
    let ps = axis(-3.0, 3.0, 25);
    let v: Vec<f64> = (0..4096).map(|i| (std::f64::consts::PI * i as f64 / 4096.0).sin().powi(2)).collect();
    let abs = Profile::abs(0.0, 1.0, 0.0);
    let c = exact_effective_1d_separable(&abs, &v, &ps).unwrap();
    for (p, h) in ps.iter().zip(&c.values) {
        let expected = if p.abs() <= 0.5 { 1.0 } else { p.abs() + 0.5 };
        assert!((h - expected).abs() < 1e-9, "p = {p}: {h} vs {expected}");
    }
    // V ≡ 0 returns the profile
    let g = Profile::abs(0.3, 2.0, -1.0);
    let z = exact_effective_1d_separable(&g, &[0.0; 16], &ps).unwrap();
    for (p, h) in ps.iter().zip(&z.values) {
        assert!((h - (2.0 * (p - 0.3).abs() - 1.0)).abs() < 1e-9);
    }
    // the flat piece sits at max V
    let bumpy: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.1).collect();
    let b = exact_effective_1d_separable(&abs, &bumpy, &[0.0]).unwrap();
    assert!((b.values[0] - 1.0).abs() < 1e-12);
    // quasiconcave profiles are outside the construction
    assert!(exact_effective_1d_separable(&Profile::neg_abs(0.0, 1.0, 0.0), &v, &ps).is_err());
}

#[test]
fn piecewise_profile_oracle_matches_numeric() {
    // flat bottom of half-width 1/2, slope 2 beyond it
    let m = sin2();
    let prof = Profile::PiecewiseMonotone { center: vec![0.0], breakpoints: vec![0.0, 0.5, 1.5], values: vec![0.0, 0.0, 2.0] };
    let piece = Piece::new(prof, Coupling::Additive { channel: 0, scale: 1.0 }, Convexity::Quasiconvex).unwrap();
    let env: Envelope = piece.into();
    let ps: Vec<Vec<f64>> = [0.0, 0.6, 1.0, 2.0].iter().map(|p| vec![*p]).collect();
    let exact = piece_effective(&env, &m, &ps, None).unwrap();
    assert_eq!(exact.provenance, Provenance::Oracle);
    // mean-gradient interval at level 1 is [−3/4, 3/4]; beyond it λ* solves 1/2 + (λ* − 1/2)/2 = |p|
    assert_eq!(&exact.values[..2], &[1.0, 1.0][..]);
    assert!((exact.values[2] - 1.5).abs() < 1e-9 && (exact.values[3] - 3.5).abs() < 1e-9);
    let h = EnvelopeHamiltonian::new(&env, &m).unwrap();
    let (num, _) = estimate_curve(&h, &ps[2..], &opts(2048)).unwrap();
    for i in 0..2 {
        assert!((num.values[i] - exact.values[i + 2]).abs() < 1e-3);
    }
    // on the flat piece the scheme converges more slowly in h
    let mut prev = f64::INFINITY;
    for n in [512, 2048, 8192] {
        let (num, _) = estimate_curve(&h, &ps[..2], &opts(n)).unwrap();
        let err = (0..2).map(|i| (num.values[i] - exact.values[i]).abs()).fold(0.0, f64::max);
        assert!(err < prev, "n = {n}: error {err} did not decrease");
        prev = err;
    }
    assert!(prev < 1e-2, "error {prev} at n = 8192");
}

#[test]
fn hat_curve_via_negation() {
    let m = sin2();
    let f = base_family(&m);
    let ps: Vec<Vec<f64>> = axis(-3.0, 3.0, 13).into_iter().map(|p| vec![p]).collect();
    let hat = piece_effective(f.hat(1), &m, &ps, None).unwrap();
    let chk = piece_effective(f.check(1), &m, &ps, None).unwrap();
    for i in 0..ps.len() {
        let p: f64 = ps[i][0];
        assert!((hat.values[i] - (1.0 - (p.abs() - 0.5).max(0.0))).abs() < 1e-9);
        assert!((chk.values[i] - ((p.abs() + 0.5).max(1.0) - 1.0)).abs() < 1e-9);
    }
}

#[test]
fn x_independent_estimate_is_exact() {
    let m = flat();
    let c = Piece::new(Profile::abs(0.5, 1.5, 0.25), Coupling::None, Convexity::Quasiconvex).unwrap();
    let env: Envelope = c.into();
    let h = EnvelopeHamiltonian::new(&env, &m).unwrap();
    for p in [-1.0, 0.5, 2.25] {
        let e = estimate_effective(&h, &[p], &opts(64)).unwrap();
        assert_eq!(e.value, env.value(&[p], &[0.0], &m));
        assert!(e.raw.iter().all(|r| r.value == e.value));
        assert!(!e.unreliable);
    }
}

#[test]
fn abs_plus_sin2_estimate() {
    let m = sin2();
    let h = EnvelopeHamiltonian::new(&Piece::abs_additive(0.0, 1.0, 0.0, 0, 1.0).unwrap().into(), &m).unwrap();
    let e = estimate_effective(&h, &[1.0], &opts(4096)).unwrap();
    assert!((e.value - 1.5).abs() <= e.error_bar + 2e-3, "{} ± {}", e.value, e.error_bar);
    assert!(e.raw.windows(2).all(|w| (w[1].value - 1.5).abs() < (w[0].value - 1.5).abs()));
    assert!(e.uniform_sup < 0.1);
}

#[test]
fn shifted_estimate_is_bit_exact() {
    let m = sin2();
    let f = base_family(&m);
    let h = FamilyHamiltonian::new(&f, Level::whole(1), &m).unwrap();
    let p0 = vec![0.8];
    let p1 = vec![-1.37];
    let shifted = ShiftedInP { inner: &h, from: p0.clone(), to: p1.clone() };
    let o = opts(512);
    let a = estimate_effective(&h, &p0, &o).unwrap();
    let b = estimate_effective(&shifted, &p1, &o).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.raw, b.raw);
}

#[test]
fn schedule_validation() {
    let m = flat();
    let h = EnvelopeHamiltonian::new(&Piece::new(Profile::abs(0.0, 1.0, 0.0), Coupling::None, Convexity::Quasiconvex).unwrap().into(), &m).unwrap();
    let g = Grid::torus(1, 64, 1.0).unwrap();
    assert!(estimate_effective(&h, &[0.0], &EstimateOptions::new(vec![0.1, 0.01], g)).is_err());
    assert!(estimate_effective(&h, &[0.0], &EstimateOptions::new(vec![0.1, 0.2, 0.01], g)).is_err());
    let guarded = EstimateOptions { ball_guard: true, ..EstimateOptions::new(vec![100.0, 20.0, 1.0], g) };
    assert!(estimate_effective(&h, &[0.0], &guarded).is_err());
}

#[test]
fn base_case_formula_matches_numeric_on_a_coarse_grid() {
    let m = sin2();
    let f = base_family(&m);
    let ps: Vec<Vec<f64>> = axis(-3.0, 3.0, 13).into_iter().map(|p| vec![p]).collect();
    let c = contact_fields(&f, &m, &Grid::torus(1, 64, 1.0).unwrap(), &ContactOptions::default()).unwrap();
    let chk = piece_effective(f.check(1), &m, &ps, None).unwrap();
    let hat = piece_effective(f.hat(1), &m, &ps, None).unwrap();
    let formula = theorem_formula(&[chk], &[hat], &c).unwrap();
    let h = FamilyHamiltonian::new(&f, Level::whole(1), &m).unwrap();
    let (num, _) = estimate_curve(&h, &ps, &opts(1024)).unwrap();
    let err = num.max_abs_diff(&formula).unwrap();
    assert!(err < 2e-2, "max error {err}");
    assert!(formula.coercive_tail() && num.coercive_tail());
    assert!(num.check_continuity(1.0).holds);
    for (p, v) in ps.iter().zip(&formula.values) {
        assert!((v - (p[0].abs() - 0.5).max(1.0)).abs() < 1e-9);
    }
}

#[test]
fn homogenized_solver_accepts_curves() {
    let ps = axis(-3.0, 3.0, 25);
    let curve = EffectiveCurve::from_scalar(&ps, ps.iter().map(|p| p.abs()).collect(), vec![0.0; 25], Provenance::Formula).unwrap();
    let h = CurveInterpolant::new(&curve).unwrap();
    assert!(h.is_x_independent());
    use minmax_hj::grid::{FieldMeta, GridField};
    use minmax_hj::solver::{solve_homogenized, TimeParams};
    let g = Grid::centered(1, 400, 4.0).unwrap();
    let u0 = GridField::from_fn(g, FieldMeta::Plain, |x| x[0].abs().min(1.0));
    let e = solve_homogenized(&h, &u0, 0.5, &TimeParams::default()).unwrap();
    for i in 0..g.len() {
        let x = g.coord(i);
        assert!((e.last().values[i] - (x.abs() - 0.5).max(0.0).min(1.0)).abs() < 2e-2);
    }
}

#[test]
fn symmetry_examples() {
    let m = flat();
    let even = Piece::new(Profile::abs(0.0, 1.0, 0.5), Coupling::None, Convexity::Quasiconvex).unwrap();
    let h = EnvelopeHamiltonian::new(&even.into(), &m).unwrap();
    let ps: Vec<Vec<f64>> = [-1.0, 0.0, 0.7].iter().map(|p| vec![*p]).collect();
    let r = verify_symmetries(&h, &ps, &opts(64), true).unwrap();
    assert_eq!(r.max_negate_discrepancy, 0.0);
    assert_eq!(r.max_even_discrepancy, Some(0.0));

    let ms = sin2();
    let shifted = Piece::abs_additive(1.0, 1.0, 0.0, 0, 1.0).unwrap();
    let hs = EnvelopeHamiltonian::new(&shifted.into(), &ms).unwrap();
    let ps: Vec<Vec<f64>> = [-2.0, 0.0, 1.0, 2.5].iter().map(|p| vec![*p]).collect();
    let r = verify_symmetries(&hs, &ps, &opts(1024), true).unwrap();
    assert!(r.within_error_bars, "{r:?}");
    assert!(r.max_negate_discrepancy < 1.5e-2 && r.max_even_discrepancy.unwrap() < 1.5e-2);

    // the negation dual is an involution on the discrete system
    let twice = NegateDual(NegateDual(&hs));
    for p in [-0.4, 1.3] {
        let a = estimate_effective(&hs, &[p], &opts(256)).unwrap();
        let b = estimate_effective(&twice, &[p], &opts(256)).unwrap();
        assert_eq!(a.value, b.value);
    }
}

#[test]
fn plateau_of_base_case() {
    let m = sin2();
    let f = base_family(&m);
    let c = contact_fields(&f, &m, &Grid::torus(1, 256, 1.0).unwrap(), &ContactOptions::default()).unwrap();
    let ps = axis(-3.0, 3.0, 25);
    let o = PlateauOptions { estimate: Some(opts(1024)), ..PlateauOptions::default() };
    let r = plateau_check(&f, &c, &m, &ps, &o).unwrap();
    assert!((r.m_bar - 1.0).abs() < 1e-12);
    // {|p| ≤ 3/2}
    assert_eq!(r.plateau, ps.iter().copied().filter(|p| p.abs() <= 1.5).collect::<Vec<_>>());
    assert!(r.plateau_holds.unwrap(), "plateau error {:?}", r.plateau_error);
    assert!(r.boundaries_match, "κ = 1 boundary distance {}", r.boundary_distance);
    assert!(r.covered && r.monotone_in_kappa);
    let k1 = r.level_sets.iter().find(|l| l.kappa == 1.0).unwrap();
    assert_eq!(k1.check_boundary.len(), 2);
    assert!(k1.check_boundary.iter().all(|b| (b.abs() - 1.0).abs() < 0.25));
}

#[test]
fn plateau_closed_form_without_x_dependence() {
    let m = flat();
    let c = Piece::new(Profile::abs(0.0, 1.0, 0.0), Coupling::None, Convexity::Quasiconvex).unwrap();
    let h = Piece::new(Profile::neg_abs(0.0, 2.0, 2.0), Coupling::None, Convexity::Quasiconcave).unwrap();
    let f = MinMaxFamily::verified(vec![c.into()], vec![h.into()], &m, &SampleSet::lattice(&m, 3.0, 25, 1)).unwrap();
    let k = contact_fields(&f, &m, &Grid::torus(1, 32, 1.0).unwrap(), &ContactOptions::default()).unwrap();
    let r = plateau_check(&f, &k, &m, &axis(-2.0, 2.0, 33), &PlateauOptions::default()).unwrap();
    assert_eq!(r.closed_form_match, Some(true));
    assert!(r.boundaries_match);
    let constants = ContactConstants::from_values(vec![1.0], vec![1.0]).unwrap();
    assert!(constants.m_fields.is_empty());
}
