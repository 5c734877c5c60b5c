use rayon::prelude::*;
use serde::Serialize;

use super::curve::{EffectiveCurve, Provenance};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hamiltonian::Hamiltonian;
use crate::solver::{DiscountedScheme, SchemeParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateOptions {
    /// Strictly decreasing, at least three entries.
    pub lambda_schedule: Vec<f64>,
    pub grid: Grid,
    pub params: SchemeParams,
    /// Radius `R` of the uniform check over `|x| ≤ R/λ`.
    pub uniform_radius: f64,
    /// Enforce `λ_min ≥ 10/L` (used for media that are only periodized surrogates).
    pub ball_guard: bool,
}

impl EstimateOptions {
    pub fn new(lambda_schedule: Vec<f64>, grid: Grid) -> Self {
        Self { lambda_schedule, grid, params: SchemeParams::default(), uniform_radius: 1.0, ball_guard: false }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.lambda_schedule;
        if s.len() < 3 {
            return Err(Error::InvalidParameter(format!("λ schedule needs at least 3 entries, got {}", s.len())));
        }
        if s.iter().any(|l| !(*l > 0.0 && l.is_finite())) || s.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidParameter(format!("λ schedule {s:?} must be positive and strictly decreasing")));
        }
        let lmin = s[s.len() - 1];
        let floor = 10.0 / (self.grid.n as f64 * self.grid.spacing());
        if self.ball_guard && lmin < floor {
            return Err(Error::InvalidParameter(format!(
                "smallest λ = {lmin} is below 10/(n·h) = {floor} for this torus"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawEstimate {
    pub lambda: f64,
    /// `−λ v_λ(0)`.
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveEstimate {
    pub p: Vec<f64>,
    pub value: f64,
    pub error_bar: f64,
    /// Fitted exponent in `−λv(0) = H̄ + Cλ^α`.
    pub alpha: f64,
    pub coefficient: f64,
    pub raw: Vec<RawEstimate>,
    /// `max |λv + H̄|` over `|x| ≤ min(R/λ_min, L/2)` at the smallest λ.
    pub uniform_sup: f64,
    pub unreliable: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub value: f64,
    pub coefficient: f64,
    pub alpha: f64,
    pub max_residual: f64,
}

const ALPHA_MIN: f64 = 0.4;
const ALPHA_MAX: f64 = 1.1;

/// Least-squares fit of `y = a + Cλ^α` with α scanned over `[0.4, 1.1]`.
pub fn fit_power_law(lambdas: &[f64], ys: &[f64]) -> PowerFit {
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if lo == hi {
        return PowerFit { value: lo, coefficient: 0.0, alpha: 1.0, max_residual: 0.0 };
    }
    let solve = |alpha: f64| {
        let n = lambdas.len() as f64;
        let xs: Vec<f64> = lambdas.iter().map(|l| l.powf(alpha)).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let c = sxy / sxx;
        let a = my - c * mx;
        let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - c * x).powi(2)).sum();
        (ssr, a, c)
    };
    let steps = 700;
    let mut best = (f64::INFINITY, 0.0, 0.0, ALPHA_MIN);
    for i in 0..=steps {
        let alpha = ALPHA_MIN + (ALPHA_MAX - ALPHA_MIN) * i as f64 / steps as f64;
        let (ssr, a, c) = solve(alpha);
        if ssr < best.0 {
            best = (ssr, a, c, alpha);
        }
    }
    let (_, a, c, alpha) = best;
    let max_residual =
        lambdas.iter().zip(ys).map(|(l, y)| (y - a - c * l.powf(alpha)).abs()).fold(0.0, f64::max);
    PowerFit { value: a, coefficient: c, alpha, max_residual }
}

/// `H̄(p) ≈ −lim λ v_λ(0)`, extrapolated over the λ schedule.
pub fn estimate_effective(h: &dyn Hamiltonian, p: &[f64], opts: &EstimateOptions) -> Result<EffectiveEstimate> {
    opts.validate()?;
    let grid = &opts.grid;
    let origin = grid.nearest(&[0.0, 0.0][..grid.dim]);
    let mut raw = Vec::with_capacity(opts.lambda_schedule.len());
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let mut last_scaled = Vec::new();
    let mut tol: f64 = 0.0;
    for &lambda in &opts.lambda_schedule {
        let wrap = |e: Error| Error::Estimate { p: p.to_vec(), lambda, source: Box::new(e) };
        let scheme = DiscountedScheme::new(h, p, lambda, grid, &opts.params).map_err(wrap)?;
        // warm start: keep the mean of u = λv and rescale the oscillating part by λ'/λ
        let init = prev.as_ref().map(|(l0, u)| {
            let mean = u.iter().sum::<f64>() / u.len() as f64;
            let r = lambda / l0;
            u.iter().map(|v| mean + r * (v - mean)).collect::<Vec<f64>>()
        });
        let sol = scheme.solve(init.as_deref()).map_err(wrap)?;
        tol = tol.max(sol.report.tol);
        raw.push(RawEstimate {
            lambda,
            value: -sol.scaled[origin],
            iterations: sol.report.iterations,
            residual: sol.report.residual,
        });
        last_scaled = sol.scaled.clone();
        prev = Some((lambda, sol.scaled));
    }
    let lambdas: Vec<f64> = raw.iter().map(|r| r.lambda).collect();
    let ys: Vec<f64> = raw.iter().map(|r| r.value).collect();
    let fit = fit_power_law(&lambdas, &ys);
    let y_last = ys[ys.len() - 1];
    let error_bar = tol + fit.max_residual + 0.5 * (fit.value - y_last).abs();

    // successive differences must keep one sign for the extrapolation to be trusted
    let slack = 10.0 * tol;
    let diffs: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
    let up = diffs.iter().any(|d| *d > slack);
    let down = diffs.iter().any(|d| *d < -slack);
    let unreliable = up && down;
    let note = unreliable.then(|| format!("−λv(0) is not monotone along the schedule: {ys:?}"));

    let lmin = lambdas[lambdas.len() - 1];
    let radius = (opts.uniform_radius / lmin).min(0.5 * grid.length);
    let zero = [0.0, 0.0];
    let uniform_sup = (0..grid.len())
        .filter(|&i| grid.periodic_distance(i, &zero[..grid.dim]) <= radius)
        .map(|i| (last_scaled[i] + fit.value).abs())
        .fold(0.0, f64::max);

    Ok(EffectiveEstimate {
        p: p.to_vec(),
        value: fit.value,
        error_bar,
        alpha: fit.alpha,
        coefficient: fit.coefficient,
        raw,
        uniform_sup,
        unreliable,
        note,
    })
}

/// Estimates at every sample, in parallel; results keep the input order.
pub fn estimate_curve(h: &dyn Hamiltonian, ps: &[Vec<f64>], opts: &EstimateOptions) -> Result<(EffectiveCurve, Vec<EffectiveEstimate>)> {
    let results: Vec<Result<EffectiveEstimate>> = ps.par_iter().map(|p| estimate_effective(h, p, opts)).collect();
    let estimates = results.into_iter().collect::<Result<Vec<_>>>()?;
    let curve = EffectiveCurve::new(
        ps.to_vec(),
        estimates.iter().map(|e| e.value).collect(),
        estimates.iter().map(|e| e.error_bar).collect(),
        Provenance::Numeric { lambda_schedule: opts.lambda_schedule.clone() },
    )?;
    Ok((curve, estimates))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_power_law() {
        let ls = [1e-1, 3e-2, 1e-2, 3e-3];
        let ys: Vec<f64> = ls.iter().map(|l: &f64| 1.5 - 0.7 * l.powf(0.5)).collect();
        let f = fit_power_law(&ls, &ys);
        assert!((f.value - 1.5).abs() < 1e-4);
        assert!((f.alpha - 0.5).abs() < 2e-3);
        let lin: Vec<f64> = ls.iter().map(|l| 1.0 - 0.25 * l).collect();
        let f = fit_power_law(&ls, &lin);
        assert!((f.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_data_fits_exactly() {
        let f = fit_power_law(&[0.1, 0.01, 0.001], &[0.3; 3]);
        assert_eq!(f.value, 0.3);
        assert_eq!(f.max_residual, 0.0);
    }
}
