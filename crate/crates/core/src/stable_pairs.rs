//! Contact regions, contact values and the structural hypotheses built on them.
//!
//! For a quasiconvex `V` and quasiconcave `Λ` the contact region is
//! `Δ = {Λ ≥ V}` (equality points included). The pair is stable when `Δ` is
//! empty, or when `V` is constant on `∂Δ` and strictly larger off `Δ`. Every
//! check here runs on a uniform p-grid with bisection refinement of `∂Δ`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{FieldMeta, Grid, GridField};
use crate::hamiltonian::{Envelope, MinMaxFamily, Orientation};
use crate::media::MediumRealization;

/// An axis-aligned cube `center ± half_width` in p-space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchBox {
    pub center: Vec<f64>,
    pub half_width: f64,
}

impl SearchBox {
    pub fn new(center: Vec<f64>, half_width: f64) -> Self {
        Self { center, half_width }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn doubled(&self) -> Self {
        Self { center: self.center.clone(), half_width: 2.0 * self.half_width }
    }
}

/// Summary of `Δ` on the p-grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaDescriptor {
    /// Grid nodes inside `Δ`.
    pub node_count: usize,
    /// In 1D, the refined intervals making up `Δ`.
    pub intervals: Vec<(f64, f64)>,
    /// Smallest box containing the `Δ` nodes.
    pub bounding_box: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub delta_nonempty: bool,
    pub delta: DeltaDescriptor,
    /// `V|∂Δ`, or `min V` when `Δ = ∅`.
    pub contact_value_v: f64,
    /// `Λ|∂Δ`, or `max Λ` when `Δ = ∅`.
    pub contact_value_lambda: f64,
    /// `max − min` of `V` over the detected boundary points.
    pub boundary_variation: f64,
    /// Constancy tolerance `10·L·h_p`.
    pub tolerance: f64,
    pub stable: bool,
    /// Why the pair is unstable, with a witness point.
    pub witness: Option<String>,
    /// A few refined boundary points.
    pub boundary_points: Vec<Vec<f64>>,
    pub search_box: SearchBox,
    pub n_p: usize,
}

const BISECTION_STEPS: usize = 60;
const KEPT_BOUNDARY_POINTS: usize = 16;

struct PGrid {
    dim: usize,
    n: usize,
    lo: Vec<f64>,
    h: f64,
}

impl PGrid {
    fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    fn ij(&self, idx: usize) -> [usize; 2] {
        [idx % self.n, idx / self.n]
    }

    fn point(&self, idx: usize) -> Vec<f64> {
        let ij = self.ij(idx);
        (0..self.dim).map(|a| self.lo[a] + ij[a] as f64 * self.h).collect()
    }

    fn on_boundary(&self, idx: usize) -> bool {
        let ij = self.ij(idx);
        (0..self.dim).any(|a| ij[a] == 0 || ij[a] == self.n - 1)
    }

    fn forward(&self, idx: usize, axis: usize) -> Option<usize> {
        let ij = self.ij(idx);
        if ij[axis] + 1 >= self.n {
            return None;
        }
        Some(idx + if axis == 0 { 1 } else { self.n })
    }

    /// Nodes within Chebyshev distance 1.
    fn neighborhood(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let ij = self.ij(idx);
        let n = self.n as i64;
        let dim = self.dim;
        let range = move |a: usize| if a < dim { -1i64..=1 } else { 0..=0 };
        range(1).flat_map(move |dj| {
            range(0).filter_map(move |di| {
                let i = ij[0] as i64 + di;
                let j = ij[1] as i64 + dj;
                if i < 0 || i >= n || j < 0 || j >= n {
                    None
                } else {
                    Some((i + n * j) as usize)
                }
            })
        })
    }
}

/// Stability analysis of `(V, Λ)` on a grid of `n_p` points per axis over `p_box`.
///
/// `candidates` are extra points (such as piece centers) tried when `Δ = ∅` and the
/// extremum of `V` or `Λ` is needed; `lipschitz` bounds the slopes of both.
pub fn analyze_pair(
    v: &dyn Fn(&[f64]) -> f64,
    lambda: &dyn Fn(&[f64]) -> f64,
    p_box: &SearchBox,
    n_p: usize,
    lipschitz: f64,
    candidates: &[Vec<f64>],
) -> Result<PairReport> {
    if n_p < 8 {
        return Err(Error::DegenerateGrid { n: n_p });
    }
    let dim = p_box.dim();
    if !(1..=2).contains(&dim) {
        return Err(Error::Dimension { expected: 1, got: dim });
    }
    let w = p_box.half_width;
    let grid = PGrid {
        dim,
        n: n_p,
        lo: p_box.center.iter().map(|c| c - w).collect(),
        h: 2.0 * w / (n_p - 1) as f64,
    };
    let nodes = grid.len();
    let points: Vec<Vec<f64>> = (0..nodes).map(|i| grid.point(i)).collect();
    let vv: Vec<f64> = points.iter().map(|p| v(p)).collect();
    let lv: Vec<f64> = points.iter().map(|p| lambda(p)).collect();
    let inside: Vec<bool> = (0..nodes).map(|i| lv[i] >= vv[i]).collect();

    if let Some(i) = (0..nodes).find(|&i| inside[i] && grid.on_boundary(i)) {
        return Err(Error::BoxTooSmall { p: points[i].clone() });
    }

    let tolerance = 10.0 * lipschitz * grid.h;
    let node_count = inside.iter().filter(|b| **b).count();

    if node_count == 0 {
        let mut cands: Vec<&Vec<f64>> = points.iter().collect();
        cands.extend(candidates.iter());
        let min_v = cands.iter().map(|p| v(p)).fold(f64::INFINITY, f64::min);
        let max_l = cands.iter().map(|p| lambda(p)).fold(f64::NEG_INFINITY, f64::max);
        return Ok(PairReport {
            delta_nonempty: false,
            delta: DeltaDescriptor { node_count: 0, intervals: Vec::new(), bounding_box: None },
            contact_value_v: min_v,
            contact_value_lambda: max_l,
            boundary_variation: 0.0,
            tolerance,
            stable: true,
            witness: None,
            boundary_points: Vec::new(),
            search_box: p_box.clone(),
            n_p,
        });
    }

    // refine ∂Δ along every grid edge whose endpoints straddle it
    let refine = |a: &[f64], b: &[f64]| -> Vec<f64> {
        // a inside, b outside
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        let at = |t: f64| a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect::<Vec<f64>>();
        for _ in 0..BISECTION_STEPS {
            let tm = 0.5 * (t0 + t1);
            let p = at(tm);
            if lambda(&p) >= v(&p) {
                t0 = tm;
            } else {
                t1 = tm;
            }
        }
        at(0.5 * (t0 + t1))
    };
    let mut boundary: Vec<Vec<f64>> = Vec::new();
    for i in 0..nodes {
        for axis in 0..dim {
            if let Some(j) = grid.forward(i, axis) {
                if inside[i] != inside[j] {
                    let (a, b) = if inside[i] { (i, j) } else { (j, i) };
                    boundary.push(refine(&points[a], &points[b]));
                }
            }
        }
    }

    let bv: Vec<f64> = boundary.iter().map(|p| v(p)).collect();
    let bl: Vec<f64> = boundary.iter().map(|p| lambda(p)).collect();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let c_v = mean(&bv);
    let c_l = mean(&bl);
    let (bmin, bmax) = bv.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    let variation = bmax - bmin;

    let mut witness = None;
    if variation > tolerance {
        let imin = bv.iter().position(|x| *x == bmin).unwrap();
        let imax = bv.iter().position(|x| *x == bmax).unwrap();
        witness = Some(format!(
            "V on ∂Δ is not constant: V({:?}) = {bmin} but V({:?}) = {bmax}",
            boundary[imin], boundary[imax]
        ));
    }
    if witness.is_none() {
        let mut near = vec![false; nodes];
        for i in (0..nodes).filter(|&i| inside[i]) {
            for j in grid.neighborhood(i) {
                near[j] = true;
            }
        }
        // Nodes within one cell of Δ may sit within grid error of the contact value.
        for i in (0..nodes).filter(|&i| !inside[i]) {
            let bound = if near[i] { c_v - tolerance } else { c_v };
            if !(vv[i] > bound) {
                witness = Some(format!(
                    "V({:?}) = {} outside Δ does not exceed the boundary value {c_v}",
                    points[i], vv[i]
                ));
                break;
            }
        }
    }

    let mut intervals = Vec::new();
    if dim == 1 {
        let mut i = 0;
        while i < nodes {
            if inside[i] {
                let start = i;
                while i + 1 < nodes && inside[i + 1] {
                    i += 1;
                }
                let left = refine(&points[start], &points[start - 1])[0];
                let right = refine(&points[i], &points[i + 1])[0];
                intervals.push((left, right));
            }
            i += 1;
        }
    }
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for i in (0..nodes).filter(|&i| inside[i]) {
        for a in 0..dim {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }

    let stride = (boundary.len() / KEPT_BOUNDARY_POINTS).max(1);
    Ok(PairReport {
        delta_nonempty: true,
        delta: DeltaDescriptor { node_count, intervals, bounding_box: Some((lo, hi)) },
        contact_value_v: c_v,
        contact_value_lambda: c_l,
        boundary_variation: variation,
        tolerance,
        stable: witness.is_none(),
        witness,
        boundary_points: boundary.into_iter().step_by(stride).take(KEPT_BOUNDARY_POINTS).collect(),
        search_box: p_box.clone(),
        n_p,
    })
}

/// Grid and box settings for the contact computations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactOptions {
    /// p-grid points per axis.
    pub n_p: usize,
    /// Initial half width of the search box around the mean piece center.
    pub half_width: f64,
    /// How many times the box may double when `Δ` reaches its edge.
    pub max_doublings: usize,
}

impl Default for ContactOptions {
    fn default() -> Self {
        Self { n_p: 257, half_width: 4.0, max_doublings: 8 }
    }
}

impl ContactOptions {
    pub fn for_dim(dim: usize) -> Self {
        if dim == 1 {
            Self::default()
        } else {
            Self { n_p: 97, ..Self::default() }
        }
    }
}

fn piece_centers(envs: &[&Envelope]) -> Vec<Vec<f64>> {
    envs.iter().flat_map(|e| e.pieces().iter().map(|p| p.profile().center().to_vec())).collect()
}

/// Pair analysis of two envelopes at a fixed `x`, doubling the box as needed.
pub fn analyze_envelopes(
    v: &Envelope,
    lambda: &Envelope,
    x: &[f64],
    m: &MediumRealization,
    opts: &ContactOptions,
) -> Result<PairReport> {
    let centers = piece_centers(&[v, lambda]);
    let d = v.dim();
    let mean: Vec<f64> = (0..d).map(|a| centers.iter().map(|c| c[a]).sum::<f64>() / centers.len() as f64).collect();
    let mut b = SearchBox::new(mean, opts.half_width);
    let lip = v.lipschitz_bound(m).max(lambda.lipschitz_bound(m));
    let fv = |p: &[f64]| v.value(p, x, m);
    let fl = |p: &[f64]| lambda.value(p, x, m);
    let mut tries = 0;
    loop {
        match analyze_pair(&fv, &fl, &b, opts.n_p, lip, &centers) {
            Err(Error::BoxTooSmall { .. }) if tries < opts.max_doublings => {
                tries += 1;
                b = b.doubled();
            }
            other => return other,
        }
    }
}

/// Maximum over p of a quasiconcave envelope (`M1` under the `Ȟ0 = ∞` convention).
fn envelope_max(env: &Envelope, x: &[f64], m: &MediumRealization) -> f64 {
    match env.single() {
        Some(p) => p.extremum_at(x, m),
        // a min of quasiconcave pieces peaks at one of the centers or on a crossing; take the
        // best center and polish with a coarse local search
        None => {
            let centers = piece_centers(&[env]);
            let mut best = centers
                .iter()
                .map(|c| (env.value(c, x, m), c.clone()))
                .fold((f64::NEG_INFINITY, Vec::new()), |a, b| if b.0 > a.0 { b } else { a });
            let mut step = 1.0;
            while step > 1e-12 {
                let mut improved = false;
                for a in 0..env.dim() {
                    for s in [-step, step] {
                        let mut q = best.1.clone();
                        q[a] += s;
                        let val = env.value(&q, x, m);
                        if val > best.0 {
                            best = (val, q);
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            best.0
        }
    }
}

/// The contact fields `m_k(x)`, `M_k(x)` and their sup/inf constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactConstants {
    /// `m̄_k = max_x m_k(x)`.
    pub m_bar: Vec<f64>,
    /// `M̲_k = min_x M_k(x)`.
    pub big_m_under: Vec<f64>,
    #[serde(skip)]
    pub m_fields: Vec<Arc<GridField>>,
    #[serde(skip)]
    pub big_m_fields: Vec<Arc<GridField>>,
    /// Largest boundary variation seen over all stable pairs.
    pub max_boundary_variation: f64,
    /// Number of realizations merged in.
    pub realizations: usize,
}

impl ContactConstants {
    /// Constants without per-x fields, e.g. for closed-form inputs.
    pub fn from_values(m_bar: Vec<f64>, big_m_under: Vec<f64>) -> Result<Self> {
        if m_bar.len() != big_m_under.len() {
            return Err(Error::LengthMismatch { left: m_bar.len(), right: big_m_under.len() });
        }
        Ok(Self { m_bar, big_m_under, m_fields: Vec::new(), big_m_fields: Vec::new(), max_boundary_variation: 0.0, realizations: 1 })
    }

    pub fn len(&self) -> usize {
        self.m_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m_bar.is_empty()
    }

    /// Combines constants from another realization: sup over both for `m̄`, inf for `M̲`.
    /// The fields of `self` are kept.
    pub fn merge(&mut self, other: &ContactConstants) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::LengthMismatch { left: self.len(), right: other.len() });
        }
        for k in 0..self.len() {
            self.m_bar[k] = self.m_bar[k].max(other.m_bar[k]);
            self.big_m_under[k] = self.big_m_under[k].min(other.big_m_under[k]);
        }
        self.max_boundary_variation = self.max_boundary_variation.max(other.max_boundary_variation);
        self.realizations += other.realizations;
        Ok(())
    }
}

struct PointContacts {
    m: Vec<f64>,
    big_m: Vec<f64>,
    variation: f64,
}

fn contacts_at(family: &MinMaxFamily, x: &[f64], m: &MediumRealization, opts: &ContactOptions) -> Result<PointContacts> {
    let l = family.len();
    let mut out = PointContacts { m: Vec::with_capacity(l), big_m: Vec::with_capacity(l), variation: 0.0 };
    let unstable = |name: String, r: PairReport| Error::UnstablePair {
        pair: name,
        x: x.to_vec(),
        detail: r.witness.unwrap_or_default(),
    };
    for k in 1..=l {
        let r = analyze_envelopes(family.check(k), family.hat(k), x, m, opts)?;
        if !r.stable {
            return Err(unstable(format!("(Ȟ{k}, Ĥ{k})"), r));
        }
        out.variation = out.variation.max(r.boundary_variation);
        out.m.push(r.contact_value_v);
        if k == 1 {
            out.big_m.push(envelope_max(family.hat(1), x, m));
        } else {
            let r = analyze_envelopes(family.check(k - 1), family.hat(k), x, m, opts)?;
            if !r.stable {
                return Err(unstable(format!("(Ĥ{k}, Ȟ{})", k - 1), r));
            }
            out.variation = out.variation.max(r.boundary_variation);
            out.big_m.push(r.contact_value_lambda);
        }
    }
    Ok(out)
}

/// Contact fields on the nodes of `x_grid` (one period), checking stability of
/// every `(Ȟk, Ĥk)` and `(Ĥk+1, Ȟk)` pair along the way.
pub fn contact_fields(
    family: &MinMaxFamily,
    m: &MediumRealization,
    x_grid: &Grid,
    opts: &ContactOptions,
) -> Result<ContactConstants> {
    if family.orientation() != Orientation::MaxOuter {
        return Err(Error::InvalidParameter("contact values are defined for max-outer families".into()));
    }
    if x_grid.dim != family.dim() {
        return Err(Error::Dimension { expected: family.dim(), got: x_grid.dim });
    }
    family.check_medium(m)?;
    let results: Vec<Result<PointContacts>> = (0..x_grid.len())
        .into_par_iter()
        .map(|i| contacts_at(family, &x_grid.point(i)[..x_grid.dim], m, opts))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }
    let l = family.len();
    let field = |k: usize, big: bool| {
        let values = rows.iter().map(|r| if big { r.big_m[k] } else { r.m[k] }).collect();
        let name = if big { format!("M{}", k + 1) } else { format!("m{}", k + 1) };
        Arc::new(GridField { grid: *x_grid, values, meta: FieldMeta::Contact { level: k + 1, name } })
    };
    let m_fields: Vec<_> = (0..l).map(|k| field(k, false)).collect();
    let big_m_fields: Vec<_> = (0..l).map(|k| field(k, true)).collect();
    Ok(ContactConstants {
        m_bar: m_fields.iter().map(|f| f.max()).collect(),
        big_m_under: big_m_fields.iter().map(|f| f.min()).collect(),
        m_fields,
        big_m_fields,
        max_boundary_variation: rows.iter().map(|r| r.variation).fold(0.0, f64::max),
        realizations: 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub holds_m: bool,
    pub holds_m_strict: bool,
    /// Human-readable description of each failed inequality.
    pub violations: Vec<String>,
}

/// Comparison slack for contact constants, which come out of bisection.
pub const MONOTONICITY_TOL: f64 = 1e-9;

/// `m̄1 ≥ … ≥ m̄ℓ` and `M̲1 ≤ … ≤ M̲ℓ`, plus the strict version.
///
/// Constants that agree to within [`MONOTONICITY_TOL`] (relative) count as equal.
pub fn check_monotonicity(c: &ContactConstants) -> MonotonicityReport {
    check_monotonicity_values(&c.m_bar, &c.big_m_under)
}

pub fn check_monotonicity_values(m_bar: &[f64], big_m_under: &[f64]) -> MonotonicityReport {
    let scale = m_bar.iter().chain(big_m_under).fold(1.0f64, |s, v| s.max(v.abs()));
    let tol = MONOTONICITY_TOL * scale;
    let mut violations = Vec::new();
    let mut strict = true;
    for k in 1..m_bar.len() {
        if m_bar[k - 1] < m_bar[k] - tol {
            violations.push(format!("m̄{} = {} < m̄{} = {}", k, m_bar[k - 1], k + 1, m_bar[k]));
        }
        if !(m_bar[k - 1] > m_bar[k] + tol) {
            strict = false;
        }
    }
    for k in 1..big_m_under.len() {
        if big_m_under[k - 1] > big_m_under[k] + tol {
            violations.push(format!("M̲{} = {} > M̲{} = {}", k, big_m_under[k - 1], k + 1, big_m_under[k]));
        }
        if !(big_m_under[k - 1] < big_m_under[k] - tol) {
            strict = false;
        }
    }
    let holds = violations.is_empty();
    MonotonicityReport { holds_m: holds, holds_m_strict: holds && strict, violations }
}

/// Result of [`perturb_to_strict`].
#[derive(Debug, Clone)]
pub struct StrictPerturbation {
    pub family: MinMaxFamily,
    pub constants: ContactConstants,
    /// Constant added to Ȟk.
    pub check_shifts: Vec<f64>,
    /// Constant added to Ĥk.
    pub hat_shifts: Vec<f64>,
}

/// Graded constant shifts `Ȟk − (k−1)αδ`, `Ĥk + (k−1)βδ` with `δ = 0.9ε/(ℓ−1)`.
///
/// These keep the ordering and move every level by less than `ε`. The weight
/// pairs `(α, β)` are tried in a fixed order; the first whose recomputed
/// constants satisfy the strict condition is returned.
pub fn perturb_to_strict(
    family: &MinMaxFamily,
    eps: f64,
    m: &MediumRealization,
    x_grid: &Grid,
    opts: &ContactOptions,
) -> Result<StrictPerturbation> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    let l = family.len();
    let base = contact_fields(family, m, x_grid, opts)?;
    if !check_monotonicity(&base).holds_m {
        return Err(Error::InvalidParameter("perturbation needs the non-strict monotonicity condition".into()));
    }
    let delta = 0.9 * eps / (l.max(2) - 1) as f64;
    const WEIGHTS: [(f64, f64); 7] = [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (1.0, 0.5), (0.5, 1.0), (1.0, 0.25), (0.25, 1.0)];
    for (alpha, beta) in WEIGHTS {
        let check_shifts: Vec<f64> = (0..l).map(|k| -(k as f64) * alpha * delta).collect();
        let hat_shifts: Vec<f64> = (0..l).map(|k| k as f64 * beta * delta).collect();
        let checks = family.checks().iter().zip(&check_shifts).map(|(e, s)| e.with_constant(*s)).collect();
        let hats = family.hats().iter().zip(&hat_shifts).map(|(e, s)| e.with_constant(*s)).collect();
        // nonincreasing shifts on checks and nondecreasing on hats keep the ordering
        let candidate = family.with_envelopes(checks, hats, true)?;
        let constants = match contact_fields(&candidate, m, x_grid, opts) {
            Ok(c) => c,
            Err(Error::UnstablePair { .. }) => continue,
            Err(e) => return Err(e),
        };
        if check_monotonicity(&constants).holds_m_strict {
            return Ok(StrictPerturbation { family: candidate, constants, check_shifts, hat_shifts });
        }
    }
    Err(Error::StrictnessUnreachable { eps })
}

/// Adds `κ(m̄k − m_k(x))` to both pieces of level `k`.
pub fn kappa_shift(family: &MinMaxFamily, kappa: f64, c: &ContactConstants, k: usize) -> Result<MinMaxFamily> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::InvalidParameter(format!("κ = {kappa} outside [0, 1]")));
    }
    if k == 0 || k > family.len() || k > c.len() {
        return Err(Error::InvalidLevel { half_steps: 2 * k, len: family.len() });
    }
    let field = kappa_field(c, k);
    let mut checks = family.checks().to_vec();
    let mut hats = family.hats().to_vec();
    checks[k - 1] = checks[k - 1].with_field(&field, kappa);
    hats[k - 1] = hats[k - 1].with_field(&field, kappa);
    family.with_envelopes(checks, hats, family.len() == 1)
}

/// The field `m̄k − m_k(x)`.
pub fn kappa_field(c: &ContactConstants, k: usize) -> Arc<GridField> {
    let f = &c.m_fields[k - 1];
    let bar = c.m_bar[k - 1];
    Arc::new(GridField {
        grid: f.grid,
        values: f.values.iter().map(|v| bar - v).collect(),
        meta: FieldMeta::Contact { level: k, name: format!("m̄{k} − m{k}") },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionEReport {
    pub holds: bool,
    /// x and piece at which a level set with interior was found.
    pub witness: Option<String>,
}

/// Whether `{Ȟ1 = m1(x)}` and `{Ĥ1 = m1(x)}` have empty interior on the p-grid at every
/// node of the contact grid.
pub fn check_condition_e(
    family: &MinMaxFamily,
    m: &MediumRealization,
    c: &ContactConstants,
    opts: &ContactOptions,
) -> ConditionEReport {
    let field = &c.m_fields[0];
    let xg = field.grid;
    let d = family.dim();
    let centers = piece_centers(&[family.check(1), family.hat(1)]);
    let center: Vec<f64> = (0..d).map(|a| centers.iter().map(|c| c[a]).sum::<f64>() / centers.len() as f64).collect();
    let n = opts.n_p;
    let grid = PGrid {
        dim: d,
        n,
        lo: center.iter().map(|c| c - opts.half_width).collect(),
        h: 2.0 * opts.half_width / (n - 1) as f64,
    };
    let witnesses: Vec<Option<String>> = (0..xg.len())
        .into_par_iter()
        .map(|i| {
            let x = &xg.point(i)[..d];
            let level = field.values[i];
            let tol = 1e-8 * (1.0 + level.abs());
            for (name, env) in [("Ȟ1", family.check(1)), ("Ĥ1", family.hat(1))] {
                let on: Vec<bool> = (0..grid.len()).map(|j| (env.value(&grid.point(j), x, m) - level).abs() <= tol).collect();
                for j in 0..grid.len() {
                    if on[j] && !grid.on_boundary(j) && grid.neighborhood(j).all(|q| on[q]) {
                        return Some(format!("{name} equals m1 = {level} on a neighbourhood of p = {:?} at x = {x:?}", grid.point(j)));
                    }
                }
            }
            None
        })
        .collect();
    let witness = witnesses.into_iter().flatten().next();
    ConditionEReport { holds: witness.is_none(), witness }
}
