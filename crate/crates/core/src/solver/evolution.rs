use rayon::prelude::*;
use serde::Serialize;

use super::dissipation;
use crate::error::{Error, Result};
use crate::grid::{FieldMeta, Grid, GridField, MAX_DIM};
use crate::hamiltonian::Hamiltonian;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeParams {
    /// LF dissipation per axis; defaults to the Lipschitz bound.
    pub theta: Option<f64>,
    /// Fixed time step; defaults to `cfl·h/Σθ`. Each segment between snapshots is split
    /// into the fewest equal steps not exceeding it.
    pub dt: Option<f64>,
    pub cfl: f64,
    /// Extra output times in `(0, T)`; `T` itself is always reported.
    pub snapshots: Vec<f64>,
}

impl Default for TimeParams {
    fn default() -> Self {
        Self { theta: None, dt: None, cfl: 0.9, snapshots: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub fields: Vec<GridField>,
    /// Largest step actually taken.
    pub dt: f64,
    pub steps: usize,
}

impl Evolution {
    pub fn last(&self) -> &GridField {
        self.fields.last().expect("evolution has at least one field")
    }
}

/// Explicit forward-Euler Lax–Friedrichs march for `u_t + H(Du, x/ε) = 0`.
pub struct EvolutionScheme<'a> {
    h: &'a dyn Hamiltonian,
    grid: Grid,
    theta: f64,
    dt_max: f64,
    points: Vec<[f64; MAX_DIM]>,
    nbr: Vec<Vec<usize>>,
}

const PARALLEL_THRESHOLD: usize = 8192;

impl<'a> EvolutionScheme<'a> {
    /// `eps = None` evaluates H at `x` itself.
    pub fn new(h: &'a dyn Hamiltonian, grid: &Grid, eps: Option<f64>, params: &TimeParams) -> Result<Self> {
        if h.dim() != grid.dim {
            return Err(Error::Dimension { expected: grid.dim, got: h.dim() });
        }
        let hs = grid.spacing();
        if let Some(e) = eps {
            if !(e > 0.0) {
                return Err(Error::InvalidParameter(format!("ε = {e} must be positive")));
            }
            if e < 2.0 * hs {
                return Err(Error::UnderResolved(format!("ε = {e} is below 2h = {}", 2.0 * hs)));
            }
        }
        let theta = dissipation(h, params.theta)?;
        let limit = hs / (grid.dim as f64 * theta);
        if !(params.cfl > 0.0 && params.cfl <= 1.0) {
            return Err(Error::Cfl(format!("safety factor {} not in (0, 1]", params.cfl)));
        }
        let dt_max = match params.dt {
            Some(dt) if dt > 0.0 && dt <= params.cfl * limit * (1.0 + 1e-12) => dt,
            Some(dt) => {
                return Err(Error::Cfl(format!("Δt = {dt} exceeds {}·h/Σθ = {}", params.cfl, params.cfl * limit)))
            }
            None => params.cfl * limit,
        };
        let scale = eps.map_or(1.0, |e| 1.0 / e);
        let points = (0..grid.len())
            .map(|i| {
                let mut p = grid.point(i);
                for v in p.iter_mut() {
                    *v *= scale;
                }
                p
            })
            .collect();
        let nbr = (0..grid.dim)
            .flat_map(|a| [true, false].map(|fwd| (0..grid.len()).map(|i| grid.neighbor(i, a, fwd)).collect()))
            .collect();
        Ok(Self { h, grid: *grid, theta, dt_max, points, nbr })
    }

    pub fn dt_max(&self) -> f64 {
        self.dt_max
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[inline]
    fn node(&self, u: &[f64], i: usize, dt: f64) -> f64 {
        let d = self.grid.dim;
        let inv2h = 0.5 / self.grid.spacing();
        let mut q = [0.0; MAX_DIM];
        let mut lap = 0.0;
        for a in 0..d {
            let up = u[self.nbr[2 * a][i]];
            let dn = u[self.nbr[2 * a + 1][i]];
            q[a] = (up - dn) * inv2h;
            lap += up - 2.0 * u[i] + dn;
        }
        let zero = [0.0; MAX_DIM];
        let mut g = [0.0; MAX_DIM];
        let hv = self.h.eval_split(&q[..d], &zero[..d], &self.points[i][..d], &mut g[..d]);
        u[i] - dt * (hv - self.theta * inv2h * lap)
    }

    /// One step of size `dt ≤ dt_max`.
    pub fn step(&self, u: &[f64], dt: f64) -> Vec<f64> {
        let n = u.len();
        if n >= PARALLEL_THRESHOLD {
            (0..n).into_par_iter().map(|i| self.node(u, i, dt)).collect()
        } else {
            (0..n).map(|i| self.node(u, i, dt)).collect()
        }
    }

    /// March `u` forward by `duration` in equal steps; returns the step count.
    pub fn advance(&self, u: &mut Vec<f64>, duration: f64) -> (usize, f64) {
        if duration <= 0.0 {
            return (0, 0.0);
        }
        let steps = ((duration / self.dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = duration / steps as f64;
        for _ in 0..steps {
            *u = self.step(u, dt);
        }
        (steps, dt)
    }
}

fn march(scheme: &EvolutionScheme<'_>, u0: &GridField, t_final: f64, params: &TimeParams, meta: impl Fn(f64) -> FieldMeta) -> Result<Evolution> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon T = {t_final} must be positive")));
    }
    if u0.grid != scheme.grid {
        return Err(Error::GridMismatch("initial datum lives on a different grid".into()));
    }
    let mut times: Vec<f64> = params.snapshots.iter().copied().filter(|&t| t > 0.0 && t < t_final).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times.push(t_final);
    let mut u = u0.values.clone();
    let mut now = 0.0;
    let mut fields = Vec::with_capacity(times.len());
    let mut steps = 0;
    let mut dt_used: f64 = 0.0;
    for &t in &times {
        let (s, dt) = scheme.advance(&mut u, t - now);
        steps += s;
        dt_used = dt_used.max(dt);
        now = t;
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Error::Cfl(format!("non-finite values at t = {t}")));
        }
        fields.push(GridField { grid: scheme.grid, values: u.clone(), meta: meta(t) });
    }
    Ok(Evolution { times, fields, dt: dt_used, steps })
}

/// Solves `u_t + H(Du, x/ε) = 0`, `u(·,0) = u0`, on the periodic grid of `u0`.
pub fn solve_time_dependent(
    h: &dyn Hamiltonian,
    u0: &GridField,
    eps: f64,
    t_final: f64,
    params: &TimeParams,
) -> Result<Evolution> {
    let scheme = EvolutionScheme::new(h, &u0.grid, Some(eps), params)?;
    march(&scheme, u0, t_final, params, |t| FieldMeta::Evolution { eps, t })
}

/// Solves `ū_t + H̄(Dū) = 0` for an x-independent `H̄`.
pub fn solve_homogenized(hbar: &dyn Hamiltonian, u0: &GridField, t_final: f64, params: &TimeParams) -> Result<Evolution> {
    if !hbar.is_x_independent() {
        return Err(Error::InvalidParameter("the homogenized Hamiltonian must not depend on x".into()));
    }
    let scheme = EvolutionScheme::new(hbar, &u0.grid, None, params)?;
    march(&scheme, u0, t_final, params, |t| FieldMeta::Homogenized { t })
}
