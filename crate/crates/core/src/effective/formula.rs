use super::curve::{EffectiveCurve, Provenance};
use crate::error::{Error, Result};
use crate::hamiltonian::Level;
use crate::stable_pairs::ContactConstants;

/// Every rung `1, 3/2, 2, …, ℓ` of the nested formula:
///
/// `H̄_1 = max{H̄_Ȟ1, m̄1, H̄_Ĥ1}`, `H̄_{k+1/2} = min{H̄_Ĥ(k+1), M̲_{k+1}, H̄_k}`,
/// `H̄_{k+1} = max{H̄_Ȟ(k+1), m̄_{k+1}, H̄_{k+1/2}}`.
pub fn theorem_formula_ladder(
    bar_checks: &[EffectiveCurve],
    bar_hats: &[EffectiveCurve],
    c: &ContactConstants,
) -> Result<Vec<(Level, EffectiveCurve)>> {
    let l = bar_checks.len();
    if l == 0 {
        return Err(Error::Empty);
    }
    if bar_hats.len() != l {
        return Err(Error::LengthMismatch { left: l, right: bar_hats.len() });
    }
    if c.len() != l || c.big_m_under.len() != l {
        return Err(Error::LengthMismatch { left: l, right: c.len() });
    }
    let first = &bar_checks[0];
    if bar_checks.iter().chain(bar_hats).any(|k| !k.same_samples(first)) {
        return Err(Error::GridMismatch("piece curves are sampled at different p".into()));
    }
    let n = first.len();
    let combine = |a: &EffectiveCurve, constant: f64, b: &[f64], b_err: &[f64], take_max: bool| {
        let mut values = Vec::with_capacity(n);
        let mut errs = Vec::with_capacity(n);
        for i in 0..n {
            let (x, y) = (a.values[i], b[i]);
            let v = if take_max { x.max(constant).max(y) } else { x.min(constant).min(y) };
            values.push(v);
            // max and min are 1-Lipschitz in each argument
            errs.push(a.error_bars[i].max(b_err[i]));
        }
        EffectiveCurve { p_samples: first.p_samples.clone(), values, error_bars: errs, provenance: Provenance::Formula }
    };
    let mut out = Vec::with_capacity(2 * l - 1);
    let mut cur = combine(&bar_checks[0], c.m_bar[0], &bar_hats[0].values, &bar_hats[0].error_bars, true);
    out.push((Level::whole(1), cur.clone()));
    for k in 1..l {
        let half = combine(&bar_hats[k], c.big_m_under[k], &cur.values, &cur.error_bars, false);
        out.push((Level::half(k), half.clone()));
        cur = combine(&bar_checks[k], c.m_bar[k], &half.values, &half.error_bars, true);
        out.push((Level::whole(k + 1), cur.clone()));
    }
    Ok(out)
}

/// The top level `H̄_ℓ` of the nested formula.
pub fn theorem_formula(bar_checks: &[EffectiveCurve], bar_hats: &[EffectiveCurve], c: &ContactConstants) -> Result<EffectiveCurve> {
    let mut ladder = theorem_formula_ladder(bar_checks, bar_hats, c)?;
    Ok(ladder.pop().expect("ladder is non-empty").1)
}
