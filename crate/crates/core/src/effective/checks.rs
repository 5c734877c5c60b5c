use rayon::prelude::*;
use serde::Serialize;

use super::curve::EffectiveCurve;
use super::estimate::{estimate_effective, EstimateOptions};
use super::oracle::piece_effective;
use crate::error::{Error, Result};
use crate::hamiltonian::{EvenDual, FamilyHamiltonian, Hamiltonian, Level, MinMaxFamily, NegateDual};
use crate::media::MediumRealization;
use crate::stable_pairs::{kappa_shift, ContactConstants};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryRow {
    pub p: Vec<f64>,
    /// `H̄(−p)`.
    pub original_at_minus_p: f64,
    /// Estimate of `−H(−·)` at `p`.
    pub negate_dual: f64,
    /// Estimate of `H(−·)` at `p`, for quasiconvex `H`.
    pub even_dual: Option<f64>,
    /// `|H̄_neg(p) + H̄(−p)|`.
    pub negate_discrepancy: f64,
    /// `|H̄_even(p) − H̄(−p)|`.
    pub even_discrepancy: Option<f64>,
    /// Largest error bar among the estimates in this row.
    pub error_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub rows: Vec<SymmetryRow>,
    pub max_negate_discrepancy: f64,
    pub max_even_discrepancy: Option<f64>,
    /// Every discrepancy is at most twice its row's error bar.
    pub within_error_bars: bool,
}

/// Compares estimates of the negation and (for quasiconvex `H`) evenness duals with the
/// reflected estimates of `H`.
pub fn verify_symmetries(
    h: &dyn Hamiltonian,
    ps: &[Vec<f64>],
    opts: &EstimateOptions,
    quasiconvex: bool,
) -> Result<SymmetryReport> {
    let rows: Vec<Result<SymmetryRow>> = ps
        .par_iter()
        .map(|p| {
            let minus: Vec<f64> = p.iter().map(|v| -v).collect();
            let orig = estimate_effective(h, &minus, opts)?;
            let neg = estimate_effective(&NegateDual(h), p, opts)?;
            let even = if quasiconvex { Some(estimate_effective(&EvenDual(h), p, opts)?) } else { None };
            let mut bar = orig.error_bar.max(neg.error_bar);
            if let Some(e) = &even {
                bar = bar.max(e.error_bar);
            }
            Ok(SymmetryRow {
                p: p.clone(),
                original_at_minus_p: orig.value,
                negate_dual: neg.value,
                even_dual: even.as_ref().map(|e| e.value),
                negate_discrepancy: (neg.value + orig.value).abs(),
                even_discrepancy: even.as_ref().map(|e| (e.value - orig.value).abs()),
                error_bar: bar,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let max_negate_discrepancy = rows.iter().map(|r| r.negate_discrepancy).fold(0.0, f64::max);
    let max_even_discrepancy =
        quasiconvex.then(|| rows.iter().filter_map(|r| r.even_discrepancy).fold(0.0, f64::max));
    let within_error_bars = rows.iter().all(|r| {
        r.negate_discrepancy <= 2.0 * r.error_bar && r.even_discrepancy.is_none_or(|d| d <= 2.0 * r.error_bar)
    });
    Ok(SymmetryReport { rows, max_negate_discrepancy, max_even_discrepancy, within_error_bars })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateauOptions {
    /// Solver options for the direct estimate of `H̄_1` on the plateau, and for piece
    /// curves that have no closed form. `None` skips the direct estimate.
    pub estimate: Option<EstimateOptions>,
    /// Allowed `|H̄_1 − m̄1|` on the plateau.
    pub tol: f64,
    pub kappas: Vec<f64>,
}

impl Default for PlateauOptions {
    fn default() -> Self {
        Self { estimate: None, tol: 2e-2, kappas: vec![0.0, 0.5, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaLevelSets {
    pub kappa: f64,
    /// Points where the check curve crosses `m̄1`.
    pub check_boundary: Vec<f64>,
    pub hat_boundary: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateauReport {
    pub m_bar: f64,
    /// Samples where both piece curves sit at or below `m̄1`.
    pub plateau: Vec<f64>,
    /// Largest `|H̄_1(p) − m̄1|` on the plateau, when estimated.
    pub plateau_error: Option<f64>,
    pub plateau_holds: Option<bool>,
    pub level_sets: Vec<KappaLevelSets>,
    /// At κ = 1 the check and hat level sets share their boundary points within `2h_p`.
    pub boundaries_match: bool,
    pub boundary_distance: f64,
    /// Every plateau sample lies on some `{H̄^κ = m̄1}` for κ ∈ [0, 1].
    pub covered: bool,
    /// The piece curves are nondecreasing in κ.
    pub monotone_in_kappa: bool,
    /// For x-independent pieces: the plateau equals `{max(Ȟ1, Ĥ1) ≤ m̄1}`.
    pub closed_form_match: Option<bool>,
}

fn crossings(ps: &[f64], values: &[f64], level: f64, tol: f64) -> Vec<f64> {
    let above: Vec<bool> = values.iter().map(|v| *v > level + tol).collect();
    let mut out = Vec::new();
    for i in 1..ps.len() {
        if above[i] != above[i - 1] {
            let (a, b) = (values[i - 1] - level, values[i] - level);
            let t = if (b - a).abs() > 0.0 { (-a / (b - a)).clamp(0.0, 1.0) } else { 0.5 };
            out.push(ps[i - 1] + t * (ps[i] - ps[i - 1]));
        }
    }
    out
}

fn set_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one = |x: &[f64], y: &[f64]| {
        x.iter().map(|u| y.iter().map(|v| (u - v).abs()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// Checks the flat piece of a level-one family at height `m̄1` and the κ-shift level sets.
pub fn plateau_check(
    family: &MinMaxFamily,
    c: &ContactConstants,
    m: &MediumRealization,
    ps: &[f64],
    opts: &PlateauOptions,
) -> Result<PlateauReport> {
    if family.len() != 1 {
        return Err(Error::InvalidParameter(format!("plateau check needs ℓ = 1, got ℓ = {}", family.len())));
    }
    if family.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: family.dim() });
    }
    if ps.len() < 3 || ps.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("p samples must be strictly increasing, at least 3".into()));
    }
    let level = c.m_bar[0];
    let hp = ps.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let samples: Vec<Vec<f64>> = ps.iter().map(|p| vec![*p]).collect();
    let curves = |f: &MinMaxFamily| -> Result<(EffectiveCurve, EffectiveCurve)> {
        Ok((
            piece_effective(f.check(1), m, &samples, opts.estimate.as_ref())?,
            piece_effective(f.hat(1), m, &samples, opts.estimate.as_ref())?,
        ))
    };
    let (chk0, hat0) = curves(family)?;
    let slack = |e: f64| e + 1e-9 * (1.0 + level.abs());
    let plateau_idx: Vec<usize> = (0..ps.len())
        .filter(|&i| chk0.values[i] <= level + slack(chk0.error_bars[i]) && hat0.values[i] <= level + slack(hat0.error_bars[i]))
        .collect();
    let plateau: Vec<f64> = plateau_idx.iter().map(|&i| ps[i]).collect();

    let (plateau_error, plateau_holds) = match &opts.estimate {
        Some(eo) if !plateau.is_empty() => {
            let h = FamilyHamiltonian::new(family, Level::whole(1), m)?;
            let errs: Vec<Result<f64>> =
                plateau.par_iter().map(|p| Ok((estimate_effective(&h, &[*p], eo)?.value - level).abs())).collect();
            let worst = errs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
            (Some(worst), Some(worst <= opts.tol))
        }
        _ => (None, None),
    };

    let mut level_sets = Vec::new();
    let mut monotone = true;
    let mut prev: Option<(EffectiveCurve, EffectiveCurve)> = None;
    let mut at_one = None;
    let mut kappas = opts.kappas.clone();
    kappas.sort_by(f64::total_cmp);
    for &kappa in &kappas {
        let shifted = kappa_shift(family, kappa, c, 1)?;
        let (chk, hat) = curves(&shifted)?;
        if let Some((pc, ph)) = &prev {
            let tol = |a: &EffectiveCurve, b: &EffectiveCurve, i: usize| a.error_bars[i] + b.error_bars[i] + 1e-12;
            monotone &= (0..ps.len()).all(|i| {
                chk.values[i] >= pc.values[i] - tol(&chk, pc, i) && hat.values[i] >= ph.values[i] - tol(&hat, ph, i)
            });
        }
        let ctol = chk.error_bars.iter().copied().fold(0.0, f64::max) + 1e-9;
        let htol = hat.error_bars.iter().copied().fold(0.0, f64::max) + 1e-9;
        level_sets.push(KappaLevelSets {
            kappa,
            check_boundary: crossings(ps, &chk.values, level, ctol),
            hat_boundary: crossings(ps, &hat.values, level, htol),
        });
        if kappa == 1.0 {
            at_one = Some((chk.clone(), hat.clone()));
        }
        prev = Some((chk, hat));
    }
    let (boundaries_match, boundary_distance, covered) = match &at_one {
        Some((chk, hat)) => {
            let ls = level_sets.iter().find(|l| l.kappa == 1.0).expect("κ = 1 was evaluated");
            let d = set_distance(&ls.check_boundary, &ls.hat_boundary);
            let covered = plateau_idx.iter().all(|&i| {
                chk.values[i].max(hat.values[i]) >= level - slack(chk.error_bars[i].max(hat.error_bars[i]))
            });
            (d <= 2.0 * hp, d, covered)
        }
        None => (false, f64::INFINITY, false),
    };

    let closed_form_match = family.is_x_independent().then(|| {
        let x = [0.0];
        (0..ps.len()).all(|i| {
            let p = [ps[i]];
            let v = family.check(1).value(&p, &x, m).max(family.hat(1).value(&p, &x, m));
            (v <= level + 1e-9) == plateau_idx.contains(&i)
        })
    });

    Ok(PlateauReport {
        m_bar: level,
        plateau,
        plateau_error,
        plateau_holds,
        level_sets,
        boundaries_match,
        boundary_distance,
        covered,
        monotone_in_kappa: monotone,
        closed_form_match,
    })
}
