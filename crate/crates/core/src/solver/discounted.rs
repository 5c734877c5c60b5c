use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dissipation;
use super::linear::{bicgstab, cyclic_tridiagonal, Stencil};
use crate::error::{Error, Result};
use crate::grid::{FieldMeta, Grid, GridField, MAX_DIM};
use crate::hamiltonian::Hamiltonian;

/// How the discrete fixed point is reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    /// Pseudo-transient continuation with semismooth Newton steps, falling back to
    /// explicit monotone steps when a step fails to reduce the residual.
    #[default]
    Newton,
    /// Plain explicit pseudo-time relaxation `u ← u − τF(u)`.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeParams {
    /// LF dissipation per axis; defaults to the Hamiltonian's Lipschitz bound.
    pub theta: Option<f64>,
    /// Explicit pseudo-time step for `u = λv`; defaults to `0.9/(1 + Σθ/(hλ))`.
    pub tau: Option<f64>,
    /// Residual tolerance; defaults to `1e-8·max(1, sup|H(p0,·)|)`.
    pub tol: Option<f64>,
    pub max_iterations: usize,
    pub relaxation: Relaxation,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self { theta: None, tau: None, tol: None, max_iterations: 1_000_000, relaxation: Relaxation::Newton }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub newton_steps: usize,
    pub explicit_steps: usize,
    pub rejected_steps: usize,
    pub residual: f64,
    pub tol: f64,
    /// `sup |F|` after each accepted iteration.
    pub history: Vec<f64>,
}

impl SolveReport {
    pub fn write_history_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iteration,residual")?;
        for (i, r) in self.history.iter().enumerate() {
            writeln!(w, "{i},{r}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DiscountedSolution {
    /// `v_λ` on the grid.
    pub field: GridField,
    /// `λ v_λ`, the variable actually solved for.
    pub scaled: Vec<f64>,
    pub report: SolveReport,
    /// `sup_i |H(p0, x_i)|`, the a-priori bound on `|λv|`.
    pub h_bound: f64,
}

impl DiscountedSolution {
    /// `−λ v_λ(0)`.
    pub fn estimate_at_origin(&self) -> f64 {
        let idx = self.field.grid.nearest(&[0.0, 0.0][..self.field.grid.dim]);
        -self.scaled[idx]
    }
}

/// The discrete discounted operator for one `(H, p0, λ)` on one grid.
pub struct DiscountedScheme<'a> {
    h: &'a dyn Hamiltonian,
    p0: Vec<f64>,
    lambda: f64,
    grid: Grid,
    theta: f64,
    tau: f64,
    tol: f64,
    max_iterations: usize,
    relaxation: Relaxation,
    points: Vec<[f64; MAX_DIM]>,
    nbr: Vec<Vec<usize>>,
    h_at_p0: Vec<f64>,
}

const PARALLEL_THRESHOLD: usize = 8192;
const LINE_SEARCH_STEPS: usize = 8;
const STALL_REJECTIONS: usize = 6;
const MAX_CONTINUATION: usize = 16;
const CONTINUATION_FACTOR: f64 = 4.0;

impl<'a> DiscountedScheme<'a> {
    pub fn new(h: &'a dyn Hamiltonian, p0: &[f64], lambda: f64, grid: &Grid, params: &SchemeParams) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("λ = {lambda} must be positive")));
        }
        if h.dim() != grid.dim || p0.len() != grid.dim {
            return Err(Error::Dimension { expected: grid.dim, got: h.dim().max(p0.len()) });
        }
        let theta = dissipation(h, params.theta)?;
        let d = grid.dim as f64;
        let stiff = 1.0 + d * theta / (grid.spacing() * lambda);
        let tau = params.tau.unwrap_or(0.9 / stiff);
        if !(tau > 0.0) || tau * stiff > 1.0 + 1e-12 {
            return Err(Error::MonotonicityViolation(format!(
                "pseudo-time step τ = {tau} breaks τ·(1 + Σθ/(hλ)) ≤ 1 (limit {})",
                1.0 / stiff
            )));
        }
        let points: Vec<[f64; MAX_DIM]> = (0..grid.len()).map(|i| grid.point(i)).collect();
        let zero = [0.0; MAX_DIM];
        let mut g = [0.0; MAX_DIM];
        let h_at_p0: Vec<f64> =
            points.iter().map(|x| h.eval_split(p0, &zero[..grid.dim], &x[..grid.dim], &mut g)).collect();
        let h_bound = h_at_p0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = params.tol.unwrap_or(1e-8 * h_bound.max(1.0));
        let nbr = (0..grid.dim)
            .flat_map(|a| [true, false].map(|fwd| (0..grid.len()).map(|i| grid.neighbor(i, a, fwd)).collect()))
            .collect();
        Ok(Self {
            h,
            p0: p0.to_vec(),
            lambda,
            grid: *grid,
            theta,
            tau,
            tol,
            max_iterations: params.max_iterations,
            relaxation: params.relaxation,
            points,
            nbr,
            h_at_p0,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn h_bound(&self) -> f64 {
        self.h_at_p0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `F_i(u)` and the p-gradient of H at each node.
    #[inline]
    fn node(&self, u: &[f64], i: usize, grad: &mut [f64; MAX_DIM]) -> f64 {
        let d = self.grid.dim;
        let inv2h = 0.5 / self.grid.spacing();
        let mut q = [0.0; MAX_DIM];
        let mut lap = 0.0;
        for a in 0..d {
            let up = u[self.nbr[2 * a][i]];
            let dn = u[self.nbr[2 * a + 1][i]];
            q[a] = (up - dn) * inv2h / self.lambda;
            lap += up - 2.0 * u[i] + dn;
        }
        let hv = self.h.eval_split(&self.p0, &q[..d], &self.points[i][..d], &mut grad[..d]);
        u[i] + hv - self.theta * inv2h / self.lambda * lap
    }

    pub fn residual(&self, u: &[f64], out: &mut [f64]) {
        self.residual_and_grad(u, out, None);
    }

    fn residual_and_grad(&self, u: &[f64], out: &mut [f64], grads: Option<&mut [[f64; MAX_DIM]]>) {
        let n = u.len();
        match grads {
            Some(gs) => {
                if n >= PARALLEL_THRESHOLD {
                    out.par_iter_mut().zip(gs.par_iter_mut()).enumerate().for_each(|(i, (f, g))| *f = self.node(u, i, g));
                } else {
                    for i in 0..n {
                        out[i] = self.node(u, i, &mut gs[i]);
                    }
                }
            }
            None => {
                if n >= PARALLEL_THRESHOLD {
                    out.par_iter_mut().enumerate().for_each(|(i, f)| {
                        let mut g = [0.0; MAX_DIM];
                        *f = self.node(u, i, &mut g)
                    });
                } else {
                    let mut g = [0.0; MAX_DIM];
                    for i in 0..n {
                        out[i] = self.node(u, i, &mut g);
                    }
                }
            }
        }
    }

    /// One explicit monotone step `u − τF(u)`.
    pub fn explicit_update(&self, u: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; u.len()];
        self.residual(u, &mut f);
        u.iter().zip(&f).map(|(ui, fi)| ui - self.tau * fi).collect()
    }

    /// Newton correction for `(s·I + J) δ = −F` with `s = 1/Δτ`.
    fn newton_step(&self, f: &[f64], grads: &[[f64; MAX_DIM]], shift: f64) -> Vec<f64> {
        let n = f.len();
        let d = self.grid.dim;
        let c = 0.5 / (self.grid.spacing() * self.lambda);
        let diag_base = 1.0 + shift + 2.0 * d as f64 * self.theta * c;
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        if d == 1 {
            let mut lower = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 0..n {
                upper[i] = (grads[i][0] - self.theta) * c;
                lower[i] = (-grads[i][0] - self.theta) * c;
            }
            cyclic_tridiagonal(&lower, &vec![diag_base; n], &upper, &rhs)
        } else {
            let diag = vec![diag_base; n];
            let mut off = vec![vec![0.0; n]; 2 * d];
            for i in 0..n {
                for a in 0..d {
                    off[2 * a][i] = (grads[i][a] - self.theta) * c;
                    off[2 * a + 1][i] = (-grads[i][a] - self.theta) * c;
                }
            }
            let a = Stencil { diag: &diag, off: &off, nbr: &self.nbr };
            bicgstab(&a, &rhs, 1e-12, 2000)
        }
    }

    fn merit(f: &[f64]) -> f64 {
        f.iter().map(|v| v * v).sum()
    }

    fn norm(f: &[f64]) -> f64 {
        f.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Solves from `init` (values of `u = λv`) or from the constant `−mean H(p0,·)`.
    ///
    /// A cold Newton solve that stalls is restarted from the solution at `4λ`.
    pub fn solve(&self, init: Option<&[f64]>) -> Result<DiscountedSolution> {
        let n = self.grid.len();
        match init {
            Some(v) if v.len() == n => Ok(self.run(v.to_vec(), None)?.expect("unbudgeted runs finish")),
            Some(v) => Err(Error::GridMismatch(format!("initial guess has {} values for {n} nodes", v.len()))),
            None => self.solve_cold(0),
        }
    }

    fn cold_start(&self) -> Vec<f64> {
        let n = self.grid.len();
        let (lo, hi) = self.h_at_p0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let start = if lo == hi { lo } else { self.h_at_p0.iter().sum::<f64>() / n as f64 };
        vec![-start; n]
    }

    fn solve_cold(&self, depth: usize) -> Result<DiscountedSolution> {
        if self.relaxation != Relaxation::Newton || depth >= MAX_CONTINUATION {
            return Ok(self.run(self.cold_start(), None)?.expect("unbudgeted runs finish"));
        }
        if let Some(sol) = self.run(self.cold_start(), Some(STALL_REJECTIONS))? {
            return Ok(sol);
        }
        let lambda = CONTINUATION_FACTOR * self.lambda;
        let stiff = 1.0 + self.grid.dim as f64 * self.theta / (self.grid.spacing() * lambda);
        let coarse = DiscountedScheme {
            h: self.h,
            p0: self.p0.clone(),
            lambda,
            grid: self.grid,
            theta: self.theta,
            tau: self.tau.max(0.9 / stiff),
            tol: self.tol,
            max_iterations: self.max_iterations,
            relaxation: self.relaxation,
            points: self.points.clone(),
            nbr: self.nbr.clone(),
            h_at_p0: self.h_at_p0.clone(),
        };
        let prev = coarse.solve_cold(depth + 1)?;
        let mean = prev.scaled.iter().sum::<f64>() / prev.scaled.len() as f64;
        let warm = prev.scaled.iter().map(|v| mean + (v - mean) / CONTINUATION_FACTOR).collect();
        let mut sol = self.run(warm, None)?.expect("unbudgeted runs finish");
        let r = &mut sol.report;
        r.iterations += prev.report.iterations;
        r.newton_steps += prev.report.newton_steps;
        r.explicit_steps += prev.report.explicit_steps;
        r.rejected_steps += prev.report.rejected_steps;
        let mut history = prev.report.history;
        history.append(&mut r.history);
        r.history = history;
        Ok(sol)
    }

    /// Iterates from `u`; with a budget, gives up (`None`) after that many rejected Newton steps.
    fn run(&self, mut u: Vec<f64>, stall_budget: Option<usize>) -> Result<Option<DiscountedSolution>> {
        let n = self.grid.len();
        let mut f = vec![0.0; n];
        let mut grads = vec![[0.0; MAX_DIM]; n];
        self.residual_and_grad(&u, &mut f, Some(&mut grads));
        let mut r = Self::norm(&f);
        let mut report = SolveReport {
            iterations: 0,
            newton_steps: 0,
            explicit_steps: 0,
            rejected_steps: 0,
            residual: r,
            tol: self.tol,
            history: vec![r],
        };
        // pseudo-time step of the continuation, in units of u
        let mut dtau = 1.0f64;
        let mut trial_f = vec![0.0; n];
        let mut trial_g = vec![[0.0; MAX_DIM]; n];
        let mut explicit_left = 0usize;
        while r > self.tol {
            if report.iterations >= self.max_iterations {
                return Err(Error::NoConvergence {
                    iterations: report.iterations,
                    residual: r,
                    history: thin(&report.history),
                });
            }
            report.iterations += 1;
            let use_newton = self.relaxation == Relaxation::Newton && explicit_left == 0;
            if use_newton {
                let shift = if dtau >= 1e12 { 0.0 } else { 1.0 / dtau };
                let delta = self.newton_step(&f, &grads, shift);
                let merit = Self::merit(&f);
                // backtrack on ‖F‖₂ along the Newton direction
                let mut accepted = None;
                let mut t = 1.0;
                for _ in 0..LINE_SEARCH_STEPS {
                    let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + t * b).collect();
                    self.residual_and_grad(&trial, &mut trial_f, Some(&mut trial_g));
                    let mt = Self::merit(&trial_f);
                    if mt.is_finite() && mt < merit {
                        accepted = Some(trial);
                        break;
                    }
                    t *= 0.5;
                }
                match accepted {
                    Some(trial) => {
                        let rt = Self::norm(&trial_f);
                        if t == 1.0 {
                            dtau = (dtau * (r / rt.max(f64::MIN_POSITIVE)).clamp(1.0, 10.0)).min(1e13);
                        }
                        u = trial;
                        std::mem::swap(&mut f, &mut trial_f);
                        std::mem::swap(&mut grads, &mut trial_g);
                        r = rt;
                        report.newton_steps += 1;
                    }
                    None => {
                        report.rejected_steps += 1;
                        if stall_budget.is_some_and(|b| report.rejected_steps > b) {
                            return Ok(None);
                        }
                        dtau *= 0.1;
                        if dtau < 10.0 * self.tau {
                            // the continuation has shrunk to explicit scale: take monotone steps for a while
                            explicit_left = 50;
                            dtau = 1.0;
                        }
                        continue;
                    }
                }
            } else {
                for i in 0..n {
                    u[i] -= self.tau * f[i];
                }
                self.residual_and_grad(&u, &mut f, Some(&mut grads));
                r = Self::norm(&f);
                report.explicit_steps += 1;
                explicit_left = explicit_left.saturating_sub(1);
            }
            report.history.push(r);
        }
        report.residual = r;
        let field = GridField {
            grid: self.grid,
            values: u.iter().map(|v| v / self.lambda).collect(),
            meta: FieldMeta::Discounted { lambda: self.lambda, p0: self.p0.clone() },
        };
        if !field.all_finite() {
            return Err(Error::NoConvergence { iterations: report.iterations, residual: r, history: thin(&report.history) });
        }
        Ok(Some(DiscountedSolution { field, scaled: u, h_bound: self.h_bound(), report }))
    }
}

/// At most 1000 evenly spaced entries of a residual history.
fn thin(h: &[f64]) -> Vec<f64> {
    let step = (h.len() / 1000).max(1);
    h.iter().step_by(step).copied().collect()
}

/// Solves `λv + H(p0 + Dv, x) = 0` on `grid`.
pub fn solve_discounted(
    h: &dyn Hamiltonian,
    p0: &[f64],
    lambda: f64,
    grid: &Grid,
    params: &SchemeParams,
) -> Result<DiscountedSolution> {
    DiscountedScheme::new(h, p0, lambda, grid, params)?.solve(None)
}
