use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::piece::Envelope;
use super::profile::Convexity;
use crate::error::{Error, Result, Side};
use crate::grid::GridField;
use crate::media::MediumRealization;

/// A whole or half level `s ∈ {1/2, 1, 3/2, …, ℓ}` stored as `2s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Level {
    half_steps: usize,
}

impl Level {
    pub fn whole(k: usize) -> Self {
        Self { half_steps: 2 * k }
    }

    /// The level `k + 1/2`.
    pub fn half(k: usize) -> Self {
        Self { half_steps: 2 * k + 1 }
    }

    pub fn from_half_steps(half_steps: usize) -> Self {
        Self { half_steps }
    }

    pub fn from_value(s: f64) -> Result<Self> {
        let t = 2.0 * s;
        if !(t >= 1.0 && (t - t.round()).abs() < 1e-12) {
            return Err(Error::InvalidParameter(format!("{s} is not a whole or half level")));
        }
        Ok(Self { half_steps: t.round() as usize })
    }

    pub fn half_steps(self) -> usize {
        self.half_steps
    }

    pub fn value(self) -> f64 {
        self.half_steps as f64 / 2.0
    }

    pub fn is_whole(self) -> bool {
        self.half_steps % 2 == 0
    }

    /// The levels `1, 3/2, 2, …, top` in increasing order.
    pub fn ladder(top: usize) -> impl Iterator<Item = Level> {
        (2..=2 * top).map(Level::from_half_steps)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_whole() {
            write!(f, "{}", self.half_steps / 2)
        } else {
            write!(f, "{}/2", self.half_steps)
        }
    }
}

/// Which operation is outermost in the nesting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `max{Ȟℓ, min{Ĥℓ, …, max{Ȟ1, Ĥ1}}}`
    MaxOuter,
    /// `min{Ĥℓ, max{Ȟℓ, …, min{Ĥ1, Ȟ1}}}`, produced by the negation dual.
    MinOuter,
}

impl Orientation {
    fn flip(self) -> Self {
        match self {
            Orientation::MaxOuter => Orientation::MinOuter,
            Orientation::MinOuter => Orientation::MaxOuter,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrderingStatus {
    Unchecked,
    Verified,
    Violated(Error),
}

/// Finite sample of `(p, x)` points on which pointwise properties are checked.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub ps: Vec<Vec<f64>>,
    pub xs: Vec<Vec<f64>>,
}

impl SampleSet {
    /// Regular grid on `[−radius, radius]^d` with `n_p` points per axis, and `n_x`
    /// points per axis over one period (cell centers for checkerboards).
    pub fn lattice(m: &MediumRealization, radius: f64, n_p: usize, n_x: usize) -> Self {
        let d = m.dim();
        let axis: Vec<f64> = (0..n_p)
            .map(|i| -radius + 2.0 * radius * i as f64 / (n_p.max(2) - 1) as f64)
            .collect();
        let ps = if d == 1 {
            axis.iter().map(|&p| vec![p]).collect()
        } else {
            axis.iter().flat_map(|&b| axis.iter().map(move |&a| vec![a, b])).collect()
        };
        Self { ps, xs: m.sample_points(n_x) }
    }

    /// `count` uniformly random p in the ball-box and x on the torus.
    pub fn random(m: &MediumRealization, radius: f64, count: usize, seed: u64) -> Self {
        let d = m.dim();
        let l = m.torus_length();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ps = (0..count).map(|_| (0..d).map(|_| rng.gen_range(-radius..=radius)).collect()).collect();
        let xs = (0..count).map(|_| (0..d).map(|_| rng.gen_range(0.0..l)).collect()).collect();
        Self { ps, xs }
    }

    /// Every `(p, x)` combination.
    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.xs.iter().flat_map(move |x| self.ps.iter().map(move |p| (p.as_slice(), x.as_slice())))
    }

    /// Points paired by index, for random sets.
    pub fn zipped(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.ps.iter().zip(&self.xs).map(|(p, x)| (p.as_slice(), x.as_slice()))
    }
}

/// The ordered lists `(Ȟ1..Ȟℓ, Ĥ1..Ĥℓ)` with the nested min-max evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxFamily {
    checks: Vec<Envelope>,
    hats: Vec<Envelope>,
    orientation: Orientation,
    ordering: OrderingStatus,
}

impl MinMaxFamily {
    pub fn new(checks: Vec<Envelope>, hats: Vec<Envelope>) -> Result<Self> {
        if checks.is_empty() {
            return Err(Error::Empty);
        }
        if checks.len() != hats.len() {
            return Err(Error::LengthMismatch { left: checks.len(), right: hats.len() });
        }
        let d = checks[0].dim();
        for (i, e) in checks.iter().enumerate() {
            if e.tag() != Convexity::Quasiconvex {
                return Err(Error::Convexity(format!("checks[{i}] is not quasiconvex")));
            }
            if e.dim() != d {
                return Err(Error::Dimension { expected: d, got: e.dim() });
            }
        }
        for (i, e) in hats.iter().enumerate() {
            if e.tag() != Convexity::Quasiconcave {
                return Err(Error::Convexity(format!("hats[{i}] is not quasiconcave")));
            }
            if e.dim() != d {
                return Err(Error::Dimension { expected: d, got: e.dim() });
            }
        }
        Ok(Self { checks, hats, orientation: Orientation::MaxOuter, ordering: OrderingStatus::Unchecked })
    }

    /// Builds the family and verifies the ordering on `samples`.
    pub fn verified(
        checks: Vec<Envelope>,
        hats: Vec<Envelope>,
        m: &MediumRealization,
        samples: &SampleSet,
    ) -> Result<Self> {
        let mut f = Self::new(checks, hats)?;
        f.verify_ordering(m, samples)?;
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.checks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.checks[0].dim()
    }

    pub fn checks(&self) -> &[Envelope] {
        &self.checks
    }

    pub fn hats(&self) -> &[Envelope] {
        &self.hats
    }

    /// Ȟk with 1-based `k`.
    pub fn check(&self, k: usize) -> &Envelope {
        &self.checks[k - 1]
    }

    /// Ĥk with 1-based `k`.
    pub fn hat(&self, k: usize) -> &Envelope {
        &self.hats[k - 1]
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn ordering(&self) -> &OrderingStatus {
        &self.ordering
    }

    pub fn is_normalized(&self) -> bool {
        self.ordering == OrderingStatus::Verified
    }

    pub fn is_x_independent(&self) -> bool {
        self.checks.iter().chain(&self.hats).all(Envelope::is_x_independent)
    }

    pub fn top_level(&self) -> Level {
        Level::whole(self.len())
    }

    pub fn check_medium(&self, m: &MediumRealization) -> Result<()> {
        self.checks.iter().chain(&self.hats).try_for_each(|e| e.check_medium(m))
    }

    /// Checks `Ȟk ≥ Ȟk+1` and `Ĥk ≤ Ĥk+1` exactly at every sampled `(p, x)`.
    pub fn verify_ordering(&mut self, m: &MediumRealization, samples: &SampleSet) -> Result<()> {
        self.check_medium(m)?;
        let result = self.find_ordering_violation(m, samples.pairs());
        self.ordering = match &result {
            Ok(()) => OrderingStatus::Verified,
            Err(e) => OrderingStatus::Violated(e.clone()),
        };
        result
    }

    fn find_ordering_violation<'a>(
        &self,
        m: &MediumRealization,
        points: impl Iterator<Item = (&'a [f64], &'a [f64])>,
    ) -> Result<()> {
        let l = self.len();
        let mut cv = vec![0.0; l];
        let mut hv = vec![0.0; l];
        for (p, x) in points {
            for k in 0..l {
                cv[k] = self.checks[k].value(p, x, m);
                hv[k] = self.hats[k].value(p, x, m);
            }
            for k in 0..l.saturating_sub(1) {
                let witness = |side| Error::OrderingViolation { side, index: k + 1, p: p.to_vec(), x: x.to_vec() };
                if !(cv[k] >= cv[k + 1]) {
                    return Err(witness(Side::Checks));
                }
                if !(hv[k] <= hv[k + 1]) {
                    return Err(witness(Side::Hats));
                }
            }
        }
        Ok(())
    }

    fn require_level(&self, level: Level) -> Result<()> {
        let hs = level.half_steps();
        if hs == 0 || hs > 2 * self.len() {
            return Err(Error::InvalidLevel { half_steps: hs, len: self.len() });
        }
        Ok(())
    }

    /// `H_s(p, x)` with gradient; requires a verified ordering.
    pub fn eval(
        &self,
        level: Level,
        p: &[f64],
        x: &[f64],
        m: &MediumRealization,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.require_level(level)?;
        match &self.ordering {
            OrderingStatus::Verified => Ok(self.eval_nested(level, p, x, m, grad)),
            OrderingStatus::Violated(e) => Err(e.clone()),
            OrderingStatus::Unchecked => Err(Error::Unverified),
        }
    }

    /// The nesting evaluated without looking at the ordering status.
    ///
    /// Half-step count `j` alternates: `j = 1` is the innermost hat (or check for
    /// [`Orientation::MinOuter`]); even `j` applies the check `j/2`; odd `j ≥ 3`
    /// applies the hat `(j+1)/2`.
    #[inline]
    pub fn eval_nested(
        &self,
        level: Level,
        p: &[f64],
        x: &[f64],
        m: &MediumRealization,
        grad: &mut [f64],
    ) -> f64 {
        let d = self.dim();
        let (outer, inner, take_outer): (&[Envelope], &[Envelope], fn(f64, f64) -> bool) = match self.orientation {
            Orientation::MaxOuter => (&self.checks, &self.hats, |v, best| v > best),
            Orientation::MinOuter => (&self.hats, &self.checks, |v, best| v < best),
        };
        let mut val = inner[0].eval(p, x, m, grad);
        let mut g = [0.0; 2];
        for j in 2..=level.half_steps() {
            let (env, pick): (&Envelope, bool) = if j % 2 == 0 {
                (&outer[j / 2 - 1], true)
            } else {
                (&inner[(j + 1) / 2 - 1], false)
            };
            let v = env.eval(p, x, m, &mut g);
            // even steps take the outer operation, odd steps the inner one
            let replace = if pick { take_outer(v, val) } else { take_outer(val, v) };
            if replace {
                val = v;
                grad[..d].copy_from_slice(&g[..d]);
            }
        }
        val
    }

    pub fn value(&self, level: Level, p: &[f64], x: &[f64], m: &MediumRealization) -> Result<f64> {
        let mut g = [0.0; 2];
        self.eval(level, p, x, m, &mut g)
    }

    pub fn lipschitz_bound(&self, level: Level, m: &MediumRealization) -> f64 {
        let hs = level.half_steps();
        let mut l = 0.0f64;
        for j in 1..=hs {
            let env = match (self.orientation, j % 2 == 0) {
                (Orientation::MaxOuter, true) | (Orientation::MinOuter, false) => &self.checks[(j + 1) / 2 - 1],
                _ => &self.hats[(j + 1) / 2 - 1],
            };
            l = l.max(env.lipschitz_bound(m));
        }
        l
    }

    /// The first `k` pairs as a family of length `k`.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidLevel { half_steps: 2 * k, len: self.len() });
        }
        Ok(Self {
            checks: self.checks[..k].to_vec(),
            hats: self.hats[..k].to_vec(),
            orientation: self.orientation,
            ordering: self.ordering.clone(),
        })
    }

    /// Replaces the envelopes while keeping orientation; the ordering must be rechecked
    /// unless `ordering_preserved` is set by a caller that knows it is.
    pub fn with_envelopes(&self, checks: Vec<Envelope>, hats: Vec<Envelope>, ordering_preserved: bool) -> Result<Self> {
        let mut f = Self::new(checks, hats)?;
        f.orientation = self.orientation;
        if ordering_preserved {
            f.ordering = self.ordering.clone();
        }
        Ok(f)
    }

    /// Adds `scale·field(x)` to every check (`on_checks`) or hat.
    pub fn shift_side_by_field(&self, on_checks: bool, k: usize, field: &Arc<GridField>, scale: f64) -> Self {
        let mut out = self.clone();
        let target = if on_checks { &mut out.checks } else { &mut out.hats };
        target[k - 1] = target[k - 1].with_field(field, scale);
        out
    }

    /// `−H(−p, x)`: checks and hats trade places and the nesting flips.
    pub fn negate_dual(&self) -> Self {
        Self {
            checks: self.hats.iter().map(Envelope::negate_dual).collect(),
            hats: self.checks.iter().map(Envelope::negate_dual).collect(),
            orientation: self.orientation.flip(),
            ordering: self.ordering.clone(),
        }
    }

    /// `H(−p, x)`.
    pub fn even_dual(&self) -> Self {
        Self {
            checks: self.checks.iter().map(Envelope::even_dual).collect(),
            hats: self.hats.iter().map(Envelope::even_dual).collect(),
            orientation: self.orientation,
            ordering: self.ordering.clone(),
        }
    }
}

/// Normalizes an arbitrary family: `Ȟ*k = max_{j≥k} Ȟj`, `Ĥ*k = min_{j≥k} Ĥj`.
///
/// The result is ordered by construction and evaluates to the same nesting as the input.
pub fn reorder_family(checks: Vec<Envelope>, hats: Vec<Envelope>) -> Result<MinMaxFamily> {
    let raw = MinMaxFamily::new(checks, hats)?;
    let l = raw.len();
    let suffix = |list: &[Envelope]| -> Result<Vec<Envelope>> {
        let mut out: Vec<Envelope> = Vec::with_capacity(l);
        let mut acc = list[l - 1].clone();
        out.push(acc.clone());
        for k in (0..l - 1).rev() {
            acc = list[k].merged(&acc)?;
            out.push(acc.clone());
        }
        out.reverse();
        Ok(out)
    };
    let mut f = MinMaxFamily::new(suffix(&raw.checks)?, suffix(&raw.hats)?)?;
    f.ordering = OrderingStatus::Verified;
    Ok(f)
}

/// Sampled quasiconvexity (or quasiconcavity) test of an envelope at every sampled x:
/// `H(θp + (1−θ)q) ≤ max(H(p), H(q))` for all sampled p, q, θ.
pub fn check_convexity_sampled(
    env: &Envelope,
    m: &MediumRealization,
    samples: &SampleSet,
    thetas: &[f64],
) -> Result<()> {
    let d = env.dim();
    let mut mid = vec![0.0; d];
    for x in &samples.xs {
        let vals: Vec<f64> = samples.ps.iter().map(|p| env.value(p, x, m)).collect();
        for (i, p) in samples.ps.iter().enumerate() {
            for (j, q) in samples.ps.iter().enumerate().skip(i + 1) {
                for &t in thetas {
                    for a in 0..d {
                        mid[a] = t * p[a] + (1.0 - t) * q[a];
                    }
                    let v = env.value(&mid, x, m);
                    let scale = 1.0 + vals[i].abs().max(vals[j].abs());
                    let tol = 1e-12 * scale;
                    let ok = match env.tag() {
                        Convexity::Quasiconvex => v <= vals[i].max(vals[j]) + tol,
                        Convexity::Quasiconcave => v >= vals[i].min(vals[j]) - tol,
                    };
                    if !ok {
                        return Err(Error::Convexity(format!(
                            "{:?} test fails between p={p:?} and q={q:?} at θ={t}, x={x:?}",
                            env.tag()
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}
