use super::curve::{EffectiveCurve, Provenance};
use super::estimate::{estimate_curve, EstimateOptions};
use crate::error::{Error, Result};
use crate::hamiltonian::{Convexity, Coupling, Envelope, EnvelopeHamiltonian, Profile};
use crate::media::MediumRealization;

/// `H(p, x) = φ(p) + V(x)` in one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableParts {
    pub profile: Profile,
    /// `V` at equally spaced points over one period.
    pub potential: Vec<f64>,
}

pub const POTENTIAL_SAMPLES: usize = 4096;

/// Splits a single additive 1D quasiconvex piece into profile and potential.
pub fn separable_parts(env: &Envelope, m: &MediumRealization, samples: usize) -> Result<SeparableParts> {
    let piece = env.single().ok_or_else(|| Error::NonSeparable("envelope has more than one piece".into()))?;
    if piece.dim() != 1 {
        return Err(Error::NonSeparable(format!("dimension {} (need 1)", piece.dim())));
    }
    if matches!(piece.coupling(), Coupling::Amplitude { .. }) {
        return Err(Error::NonSeparable("amplitude coupling multiplies the profile".into()));
    }
    if piece.tag() != Convexity::Quasiconvex {
        return Err(Error::NonSeparable("the profile must be quasiconvex".into()));
    }
    let profile = piece.profile().clone();
    let c = profile.center().to_vec();
    let base = profile.extremum();
    let period = m.torus_length();
    let potential = (0..samples)
        .map(|i| piece.value(&c, &[i as f64 * period / samples as f64], m) - base)
        .collect();
    Ok(SeparableParts { profile, potential })
}

/// Exact `H̄` of `φ(p) + V(x)` from the mean-gradient intervals of the cell problem.
pub fn exact_effective_1d_separable(profile: &Profile, potential: &[f64], ps: &[f64]) -> Result<EffectiveCurve> {
    if profile.dim() != 1 {
        return Err(Error::NonSeparable(format!("dimension {} (need 1)", profile.dim())));
    }
    if profile.classify()? != Convexity::Quasiconvex {
        return Err(Error::NonSeparable("the profile must be quasiconvex".into()));
    }
    if potential.is_empty() {
        return Err(Error::Empty);
    }
    let c = profile.center()[0];
    let vmax = potential.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = vmax + profile.extremum();
    let n = potential.len() as f64;
    // mean of the right branch inverse at level λ*, relative to the center
    let width = |level: f64| -> f64 {
        potential.iter().map(|v| profile.radial_inverse(level - v).unwrap_or(0.0)).sum::<f64>() / n
    };
    let w0 = width(floor);
    let values = ps
        .iter()
        .map(|&p| {
            let target = (p - c).abs();
            if target <= w0 {
                return floor;
            }
            let (mut lo, mut step) = (floor, 1.0);
            let mut hi = floor + step;
            while width(hi) < target {
                lo = hi;
                step *= 2.0;
                hi = floor + step;
            }
            while hi - lo > 1e-12 * (1.0 + hi.abs()) {
                let mid = 0.5 * (lo + hi);
                if width(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    EffectiveCurve::from_scalar(ps, values, vec![1e-10; ps.len()], Provenance::Oracle)
}

/// Effective curve of one check or hat: the envelope itself when it does not depend on x,
/// the separable oracle when it applies (hats via `H̄(p) = −Ḡ(−p)` with `G = −Ĥ(−·)`),
/// otherwise the numerical estimate.
pub fn piece_effective(
    env: &Envelope,
    m: &MediumRealization,
    ps: &[Vec<f64>],
    numeric: Option<&EstimateOptions>,
) -> Result<EffectiveCurve> {
    if env.is_x_independent() {
        let x = vec![0.0; env.dim()];
        let values = ps.iter().map(|p| env.value(p, &x, m)).collect();
        return EffectiveCurve::new(ps.to_vec(), values, vec![0.0; ps.len()], Provenance::Oracle);
    }
    let (target, sign) = match env.tag() {
        Convexity::Quasiconvex => (env.clone(), 1.0),
        Convexity::Quasiconcave => (env.negate_dual(), -1.0),
    };
    let scalar: Option<Vec<f64>> = (env.dim() == 1).then(|| ps.iter().map(|p| sign * p[0]).collect());
    if let (Some(qs), Ok(parts)) = (scalar, separable_parts(&target, m, POTENTIAL_SAMPLES)) {
        let g = exact_effective_1d_separable(&parts.profile, &parts.potential, &qs)?;
        return EffectiveCurve::new(
            ps.to_vec(),
            g.values.iter().map(|v| sign * v).collect(),
            g.error_bars,
            Provenance::Oracle,
        );
    }
    let opts = numeric.ok_or_else(|| Error::NonSeparable("piece is not separable and no solver options were given".into()))?;
    let h = EnvelopeHamiltonian::new(env, m)?;
    Ok(estimate_curve(&h, ps, opts)?.0)
}
