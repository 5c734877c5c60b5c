//! Quasiconvex and quasiconcave pieces, the nested min-max Hamiltonian and its dualities.

mod family;
mod piece;
mod profile;

pub use family::{
    check_convexity_sampled, reorder_family, Level, MinMaxFamily, OrderingStatus, Orientation, SampleSet,
};
pub use piece::{Coupling, Envelope, FieldShift, Piece};
pub use profile::{Convexity, Profile};

use crate::error::{Error, Result};
use crate::media::MediumRealization;

/// A Hamiltonian `H(p, x)` as seen by the solvers.
///
/// Evaluation takes the gradient split as `base + q` so that wrappers which move
/// `p` can act on `base` alone; `base` is the macroscopic slope and `q` the
/// discrete derivative of the corrector.
pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;

    /// `H(base + q, x)`, with a generalized p-gradient written to `grad[..dim]`.
    fn eval_split(&self, base: &[f64], q: &[f64], x: &[f64], grad: &mut [f64]) -> f64;

    /// Bound on every `|∂H/∂p_i|`, uniform in `(p, x)`.
    fn lipschitz(&self) -> f64;

    fn is_x_independent(&self) -> bool {
        false
    }

    fn value(&self, p: &[f64], x: &[f64]) -> f64 {
        let zero = [0.0; 2];
        let mut g = [0.0; 2];
        self.eval_split(p, &zero[..self.dim()], x, &mut g)
    }
}

#[inline]
fn add(base: &[f64], q: &[f64]) -> [f64; 2] {
    let mut p = [0.0; 2];
    for a in 0..base.len() {
        p[a] = base[a] + q[a];
    }
    p
}

/// A family at one level, bound to a medium.
#[derive(Debug, Clone)]
pub struct FamilyHamiltonian {
    family: MinMaxFamily,
    level: Level,
    medium: MediumRealization,
    lipschitz: f64,
}

impl FamilyHamiltonian {
    pub fn new(family: &MinMaxFamily, level: Level, medium: &MediumRealization) -> Result<Self> {
        if family.dim() != medium.dim() {
            return Err(Error::Dimension { expected: medium.dim(), got: family.dim() });
        }
        // probe the level and ordering status once
        let probe = vec![0.0; family.dim()];
        family.value(level, &probe, &probe, medium)?;
        family.check_medium(medium)?;
        Ok(Self {
            family: family.clone(),
            level,
            lipschitz: family.lipschitz_bound(level, medium),
            medium: medium.clone(),
        })
    }

    pub fn family(&self) -> &MinMaxFamily {
        &self.family
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn medium(&self) -> &MediumRealization {
        &self.medium
    }
}

impl Hamiltonian for FamilyHamiltonian {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    #[inline]
    fn eval_split(&self, base: &[f64], q: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let p = add(base, q);
        self.family.eval_nested(self.level, &p[..base.len()], x, &self.medium, grad)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn is_x_independent(&self) -> bool {
        self.family.is_x_independent()
    }
}

/// A single envelope (one check or hat, possibly shifted) bound to a medium.
#[derive(Debug, Clone)]
pub struct EnvelopeHamiltonian {
    envelope: Envelope,
    medium: MediumRealization,
    lipschitz: f64,
}

impl EnvelopeHamiltonian {
    pub fn new(envelope: &Envelope, medium: &MediumRealization) -> Result<Self> {
        if envelope.dim() != medium.dim() {
            return Err(Error::Dimension { expected: medium.dim(), got: envelope.dim() });
        }
        envelope.check_medium(medium)?;
        Ok(Self { envelope: envelope.clone(), lipschitz: envelope.lipschitz_bound(medium), medium: medium.clone() })
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }
}

impl Hamiltonian for EnvelopeHamiltonian {
    fn dim(&self) -> usize {
        self.envelope.dim()
    }

    #[inline]
    fn eval_split(&self, base: &[f64], q: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let p = add(base, q);
        self.envelope.eval(&p[..base.len()], x, &self.medium, grad)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn is_x_independent(&self) -> bool {
        self.envelope.is_x_independent()
    }
}

/// `−H(−p, x)` for any Hamiltonian.
#[derive(Debug, Clone)]
pub struct NegateDual<H>(pub H);

impl<H: Hamiltonian> Hamiltonian for NegateDual<H> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval_split(&self, base: &[f64], q: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim();
        let (mut mb, mut mq) = ([0.0; 2], [0.0; 2]);
        for a in 0..d {
            mb[a] = -base[a];
            mq[a] = -q[a];
        }
        // d/dp [−H(−p)] = (∂H)(−p), so the gradient passes through unchanged
        -self.0.eval_split(&mb[..d], &mq[..d], x, grad)
    }

    fn lipschitz(&self) -> f64 {
        self.0.lipschitz()
    }

    fn is_x_independent(&self) -> bool {
        self.0.is_x_independent()
    }
}

/// `H(−p, x)` for any Hamiltonian.
#[derive(Debug, Clone)]
pub struct EvenDual<H>(pub H);

impl<H: Hamiltonian> Hamiltonian for EvenDual<H> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval_split(&self, base: &[f64], q: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim();
        let (mut mb, mut mq) = ([0.0; 2], [0.0; 2]);
        for a in 0..d {
            mb[a] = -base[a];
            mq[a] = -q[a];
        }
        let v = self.0.eval_split(&mb[..d], &mq[..d], x, grad);
        for g in grad.iter_mut().take(d) {
            *g = -*g;
        }
        v
    }

    fn lipschitz(&self) -> f64 {
        self.0.lipschitz()
    }

    fn is_x_independent(&self) -> bool {
        self.0.is_x_independent()
    }
}

/// `H'(p, x) = H(p − to + from, x)`: the slope `to` of `H'` sees what `from` sees in `H`.
///
/// Only `base` is moved, and `base − to + from` is exactly `from` when `base == to`,
/// so the discrete problems for `H'` at `to` and `H` at `from` coincide.
#[derive(Debug, Clone)]
pub struct ShiftedInP<H> {
    pub inner: H,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
}

impl<H: Hamiltonian> Hamiltonian for ShiftedInP<H> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval_split(&self, base: &[f64], q: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim();
        let mut b = [0.0; 2];
        for a in 0..d {
            b[a] = (base[a] - self.to[a]) + self.from[a];
        }
        self.inner.eval_split(&b[..d], q, x, grad)
    }

    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }

    fn is_x_independent(&self) -> bool {
        self.inner.is_x_independent()
    }
}

impl<H: Hamiltonian + ?Sized> Hamiltonian for &H {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_split(&self, base: &[f64], q: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).eval_split(base, q, x, grad)
    }
    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
    fn is_x_independent(&self) -> bool {
        (**self).is_x_independent()
    }
}

impl<H: Hamiltonian + ?Sized> Hamiltonian for Box<H> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_split(&self, base: &[f64], q: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).eval_split(base, q, x, grad)
    }
    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
    fn is_x_independent(&self) -> bool {
        (**self).is_x_independent()
    }
}

/// Convenience: bind a family at `level` to `m` and evaluate `H_s(p, x)`.
pub fn eval_minmax(family: &MinMaxFamily, level: Level, p: &[f64], x: &[f64], m: &MediumRealization) -> Result<f64> {
    family.value(level, p, x, m)
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(Error::Empty);
    }
    Ok(())
}

/// `max{a1, min{b1, max{a2, min{b2, … max{aN, bN}}}}}`.
pub fn minmax_scalar(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    let n = a.len();
    let mut v = a[n - 1].max(b[n - 1]);
    for k in (0..n - 1).rev() {
        v = a[k].max(b[k].min(v));
    }
    Ok(v)
}

/// The same nesting applied to the running max `αk = max_{j≤k} aj` and running min
/// `βk = min_{j≤k} bj`.
pub fn minmax_scalar_monotone(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    let mut alpha = Vec::with_capacity(a.len());
    let mut beta = Vec::with_capacity(b.len());
    let (mut am, mut bm) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&x, &y) in a.iter().zip(b) {
        am = am.max(x);
        bm = bm.min(y);
        alpha.push(am);
        beta.push(bm);
    }
    minmax_scalar(&alpha, &beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{sample_realization, MediumSpec};

    fn x_free(p: Profile, tag: Convexity) -> Envelope {
        Piece::new(p, Coupling::None, tag).unwrap().into()
    }

    fn base_family() -> (MinMaxFamily, MediumRealization) {
        let m = sample_realization(&MediumSpec::sin2_1d("V", 1.0, 0.0, 1.0), 0).unwrap();
        let c = Piece::abs_additive(0.0, 1.0, -1.0, 0, 1.0).unwrap();
        let h = Piece::neg_abs_additive(0.0, 1.0, 1.0, 0, 1.0).unwrap();
        let s = SampleSet::lattice(&m, 3.0, 13, 16);
        (MinMaxFamily::verified(vec![c.into()], vec![h.into()], &m, &s).unwrap(), m)
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(minmax_scalar(&[0.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(minmax_scalar(&[1.0, 2.0], &[5.0, 4.0]).unwrap(), 4.0);
        assert_eq!(minmax_scalar(&[3.0, 1.0], &[2.0, 5.0]).unwrap(), 3.0);
        assert_eq!(minmax_scalar_monotone(&[1.0, 2.0], &[5.0, 4.0]).unwrap(), 4.0);
        assert_eq!(minmax_scalar_monotone(&[3.0, 1.0], &[2.0, 5.0]).unwrap(), 3.0);
        assert_eq!(minmax_scalar(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { left: 1, right: 2 }));
        assert_eq!(minmax_scalar(&[], &[]), Err(Error::Empty));
    }

    #[test]
    fn level_one_examples() {
        let m = sample_realization(&MediumSpec::empty(1), 0).unwrap();
        let c = x_free(Profile::abs(0.0, 1.0, 0.0), Convexity::Quasiconvex);
        let h = x_free(Profile::neg_abs(0.0, 1.0, 1.0), Convexity::Quasiconcave);
        let s = SampleSet::lattice(&m, 3.0, 7, 1);
        let f = MinMaxFamily::verified(vec![c], vec![h], &m, &s).unwrap();
        assert_eq!(eval_minmax(&f, Level::whole(1), &[0.0], &[0.3], &m).unwrap(), 1.0);
        assert_eq!(eval_minmax(&f, Level::whole(1), &[2.0], &[0.3], &m).unwrap(), 2.0);
        assert_eq!(eval_minmax(&f, Level::whole(1), &[-2.0], &[0.3], &m).unwrap(), 2.0);
        assert_eq!(eval_minmax(&f, Level::half(0), &[2.0], &[0.3], &m).unwrap(), -1.0);
        assert!(matches!(eval_minmax(&f, Level::whole(2), &[0.0], &[0.0], &m), Err(Error::InvalidLevel { .. })));
    }

    #[test]
    fn unordered_family_reports_index() {
        let m = sample_realization(&MediumSpec::empty(1), 0).unwrap();
        let c1 = x_free(Profile::abs(0.0, 1.0, 0.0), Convexity::Quasiconvex);
        let c2 = x_free(Profile::abs(0.0, 1.0, 1.0), Convexity::Quasiconvex);
        let h1 = x_free(Profile::neg_abs(0.0, 1.0, 1.0), Convexity::Quasiconcave);
        let h2 = x_free(Profile::neg_abs(0.0, 1.0, 2.0), Convexity::Quasiconcave);
        let s = SampleSet::lattice(&m, 2.0, 5, 1);
        let mut f = MinMaxFamily::new(vec![c1.clone(), c2.clone()], vec![h1.clone(), h2.clone()]).unwrap();
        assert_eq!(f.value(Level::whole(2), &[0.0], &[0.0], &m), Err(Error::Unverified));
        let err = f.verify_ordering(&m, &s).unwrap_err();
        assert!(matches!(err, Error::OrderingViolation { side: crate::error::Side::Checks, index: 1, .. }));
        assert_eq!(f.value(Level::whole(2), &[0.0], &[0.0], &m), Err(err));

        // Ȟ*1 = Ȟ*2 = |p| + 1
        let r = reorder_family(vec![c1, c2], vec![h1, h2]).unwrap();
        for p in [-2.0, -0.5, 0.0, 1.25] {
            assert_eq!(r.check(1).value(&[p], &[0.0], &m), p.abs() + 1.0);
            assert_eq!(r.check(2).value(&[p], &[0.0], &m), p.abs() + 1.0);
        }
    }

    #[test]
    fn negate_dual_swaps_roles_pointwise() {
        let (f, m) = base_family();
        let n = f.negate_dual();
        assert_eq!(n.orientation(), Orientation::MinOuter);
        assert_eq!(n.negate_dual(), f);
        for lvl in [Level::half(0), Level::whole(1)] {
            for &(p, x) in &[(0.3, 0.1), (-2.5, 0.7), (1.75, 0.5)] {
                let a = n.value(lvl, &[p], &[x], &m).unwrap();
                let b = -f.value(lvl, &[-p], &[x], &m).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn wrappers_agree_with_family_duals() {
        let (f, m) = base_family();
        let h = FamilyHamiltonian::new(&f, Level::whole(1), &m).unwrap();
        let nd = FamilyHamiltonian::new(&f.negate_dual(), Level::whole(1), &m).unwrap();
        let ed = FamilyHamiltonian::new(&f.even_dual(), Level::whole(1), &m).unwrap();
        let wn = NegateDual(&h);
        let we = EvenDual(&h);
        for &(p, x) in &[(0.3, 0.1), (-2.5, 0.7), (1.75, 0.5)] {
            assert_eq!(wn.value(&[p], &[x]), nd.value(&[p], &[x]));
            assert_eq!(we.value(&[p], &[x]), ed.value(&[p], &[x]));
        }
    }

    #[test]
    fn shifted_wrapper_is_exact_at_target() {
        let (f, m) = base_family();
        let h = FamilyHamiltonian::new(&f, Level::whole(1), &m).unwrap();
        let s = ShiftedInP { inner: &h, from: vec![0.3], to: vec![1.7] };
        let mut g1 = [0.0];
        let mut g2 = [0.0];
        for q in [-0.11, 0.0, 0.37] {
            let a = s.eval_split(&[1.7], &[q], &[0.2], &mut g1);
            let b = h.eval_split(&[0.3], &[q], &[0.2], &mut g2);
            assert_eq!(a.to_bits(), b.to_bits());
            assert_eq!(g1, g2);
        }
    }
}
