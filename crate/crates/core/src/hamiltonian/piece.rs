use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::profile::{Convexity, Profile};
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::media::MediumRealization;

/// How a profile is combined with the medium at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coupling {
    /// No x-dependence.
    None,
    /// `φ(p) + scale·a(x)` with `a` the medium channel `channel`.
    Additive { channel: usize, scale: f64 },
    /// `a(x)·φ(p)`, requiring `a ≥ a_min > 0` everywhere.
    Amplitude { channel: usize, a_min: f64 },
}

/// `scale·f(x)` with `f` a periodic grid field; used for κ-shifts by contact fields.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldShift {
    pub field: Arc<GridField>,
    pub scale: f64,
}

/// One quasiconvex or quasiconcave Hamiltonian `(p, x) ↦ coupling(φ(p), a(x)) + constant + shifts`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    profile: Profile,
    coupling: Coupling,
    tag: Convexity,
    constant: f64,
    fields: Vec<FieldShift>,
}

impl Piece {
    /// Rejects pieces whose profile does not certify the requested tag.
    pub fn new(profile: Profile, coupling: Coupling, tag: Convexity) -> Result<Self> {
        let class = profile.classify()?;
        if class != tag {
            return Err(Error::Convexity(format!(
                "profile is {class:?} but the piece is tagged {tag:?}"
            )));
        }
        match &coupling {
            Coupling::Additive { scale, .. } if !scale.is_finite() => {
                return Err(Error::InvalidParameter("additive scale must be finite".into()))
            }
            Coupling::Amplitude { a_min, .. } if !(a_min.is_finite() && *a_min > 0.0) => {
                return Err(Error::InvalidParameter(format!("amplitude floor {a_min} must be positive")))
            }
            _ => {}
        }
        Ok(Self { profile, coupling, tag, constant: 0.0, fields: Vec::new() })
    }

    /// `s|p − c| + o + scale·a(x)` in 1D.
    pub fn abs_additive(center: f64, slope: f64, offset: f64, channel: usize, scale: f64) -> Result<Self> {
        Self::new(Profile::abs(center, slope, offset), Coupling::Additive { channel, scale }, Convexity::Quasiconvex)
    }

    /// `o − s|p − c| + scale·a(x)` in 1D.
    pub fn neg_abs_additive(center: f64, slope: f64, offset: f64, channel: usize, scale: f64) -> Result<Self> {
        Self::new(Profile::neg_abs(center, slope, offset), Coupling::Additive { channel, scale }, Convexity::Quasiconcave)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn tag(&self) -> Convexity {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.profile.dim()
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn fields(&self) -> &[FieldShift] {
        &self.fields
    }

    pub fn is_x_independent(&self) -> bool {
        matches!(self.coupling, Coupling::None) && self.fields.is_empty()
    }

    /// Adds a constant; convexity is unaffected.
    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    /// Adds `scale·field(x)`; convexity is unaffected.
    pub fn with_field(mut self, field: Arc<GridField>, scale: f64) -> Self {
        if scale != 0.0 {
            self.fields.push(FieldShift { field, scale });
        }
        self
    }

    /// Checks that the medium provides what the coupling reads.
    pub fn check_medium(&self, m: &MediumRealization) -> Result<()> {
        if m.dim() != self.dim() {
            return Err(Error::Dimension { expected: m.dim(), got: self.dim() });
        }
        match self.coupling {
            Coupling::None => Ok(()),
            Coupling::Additive { channel, .. } | Coupling::Amplitude { channel, .. }
                if channel >= m.channel_count() =>
            {
                Err(Error::InvalidParameter(format!(
                    "channel {channel} missing: medium has {} channels",
                    m.channel_count()
                )))
            }
            Coupling::Amplitude { channel, a_min } => {
                let (lo, _) = m.channel_bounds(channel);
                if lo < a_min {
                    Err(Error::InvalidParameter(format!(
                        "amplitude channel {channel} can drop to {lo}, below the floor {a_min}"
                    )))
                } else {
                    Ok(())
                }
            }
            Coupling::Additive { .. } => Ok(()),
        }
    }

    /// Value at `(p, x)`; the p-gradient goes to `grad[..d]`.
    #[inline]
    pub fn eval(&self, p: &[f64], x: &[f64], m: &MediumRealization, grad: &mut [f64]) -> f64 {
        let phi = self.profile.eval(p, grad);
        let mut v = match self.coupling {
            Coupling::None => phi,
            Coupling::Additive { channel, scale } => phi + scale * m.channel(channel, x),
            Coupling::Amplitude { channel, .. } => {
                let a = m.channel(channel, x);
                for g in grad.iter_mut().take(self.dim()) {
                    *g *= a;
                }
                a * phi
            }
        };
        v += self.constant;
        for f in &self.fields {
            v += f.scale * f.field.interpolate(x);
        }
        v
    }

    pub fn value(&self, p: &[f64], x: &[f64], m: &MediumRealization) -> f64 {
        let mut g = [0.0; 2];
        self.eval(p, x, m, &mut g)
    }

    /// The x-only part `coupling(extremum) + constant + shifts`: the minimum over p
    /// of a quasiconvex piece, the maximum of a quasiconcave one.
    pub fn extremum_at(&self, x: &[f64], m: &MediumRealization) -> f64 {
        let c = self.profile.center().to_vec();
        self.value(&c, x, m)
    }

    pub fn lipschitz_bound(&self, m: &MediumRealization) -> f64 {
        let l = self.profile.lipschitz_bound();
        match self.coupling {
            Coupling::Amplitude { channel, .. } => l * m.channel_bounds(channel).1,
            _ => l,
        }
    }

    /// Coarse bounds of `H(p, x) − φ(p)·(amplitude)` over x, used to size search boxes.
    pub fn x_range(&self, m: &MediumRealization) -> (f64, f64) {
        let (mut lo, mut hi) = (self.constant, self.constant);
        if let Coupling::Additive { channel, scale } = self.coupling {
            let (a, b) = m.channel_bounds(channel);
            lo += (scale * a).min(scale * b);
            hi += (scale * a).max(scale * b);
        }
        for f in &self.fields {
            let (a, b) = (f.scale * f.field.min(), f.scale * f.field.max());
            lo += a.min(b);
            hi += a.max(b);
        }
        (lo, hi)
    }

    /// `−H(−p, x)`.
    pub fn negate_dual(&self) -> Self {
        let coupling = match self.coupling {
            Coupling::Additive { channel, scale } => Coupling::Additive { channel, scale: -scale },
            ref other => other.clone(),
        };
        Self {
            profile: self.profile.negate_dual(),
            coupling,
            tag: self.tag.flip(),
            constant: -self.constant,
            fields: self
                .fields
                .iter()
                .map(|f| FieldShift { field: f.field.clone(), scale: -f.scale })
                .collect(),
        }
    }

    /// `H(−p, x)`.
    pub fn even_dual(&self) -> Self {
        Self { profile: self.profile.even_dual(), ..self.clone() }
    }
}

/// Pointwise max of quasiconvex pieces or min of quasiconcave pieces.
///
/// A single piece is the common case; larger envelopes arise from reordering.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    tag: Convexity,
    pieces: Vec<Piece>,
}

impl From<Piece> for Envelope {
    fn from(p: Piece) -> Self {
        Self { tag: p.tag(), pieces: vec![p] }
    }
}

impl Envelope {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        let first = pieces.first().ok_or(Error::Empty)?;
        let tag = first.tag();
        let d = first.dim();
        for p in &pieces {
            if p.tag() != tag {
                return Err(Error::Convexity("envelope mixes quasiconvex and quasiconcave pieces".into()));
            }
            if p.dim() != d {
                return Err(Error::Dimension { expected: d, got: p.dim() });
            }
        }
        Ok(Self { tag, pieces })
    }

    pub fn tag(&self) -> Convexity {
        self.tag
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn single(&self) -> Option<&Piece> {
        match self.pieces.as_slice() {
            [p] => Some(p),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    pub fn is_x_independent(&self) -> bool {
        self.pieces.iter().all(Piece::is_x_independent)
    }

    #[inline]
    pub fn eval(&self, p: &[f64], x: &[f64], m: &MediumRealization, grad: &mut [f64]) -> f64 {
        let (first, rest) = self.pieces.split_first().expect("envelopes are nonempty");
        let mut best = first.eval(p, x, m, grad);
        if rest.is_empty() {
            return best;
        }
        let mut g = [0.0; 2];
        for piece in rest {
            let v = piece.eval(p, x, m, &mut g);
            let better = match self.tag {
                Convexity::Quasiconvex => v > best,
                Convexity::Quasiconcave => v < best,
            };
            if better {
                best = v;
                grad[..first.dim()].copy_from_slice(&g[..first.dim()]);
            }
        }
        best
    }

    pub fn value(&self, p: &[f64], x: &[f64], m: &MediumRealization) -> f64 {
        let mut g = [0.0; 2];
        self.eval(p, x, m, &mut g)
    }

    pub fn lipschitz_bound(&self, m: &MediumRealization) -> f64 {
        self.pieces.iter().map(|p| p.lipschitz_bound(m)).fold(0.0, f64::max)
    }

    pub fn check_medium(&self, m: &MediumRealization) -> Result<()> {
        self.pieces.iter().try_for_each(|p| p.check_medium(m))
    }

    /// Union of the pieces of two envelopes with the same tag.
    pub fn merged(&self, other: &Envelope) -> Result<Self> {
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        Envelope::new(pieces)
    }

    pub fn with_constant(&self, c: f64) -> Self {
        self.map(|p| p.clone().with_constant(c))
    }

    pub fn with_field(&self, field: &Arc<GridField>, scale: f64) -> Self {
        self.map(|p| p.clone().with_field(field.clone(), scale))
    }

    pub fn negate_dual(&self) -> Self {
        Self { tag: self.tag.flip(), pieces: self.pieces.iter().map(Piece::negate_dual).collect() }
    }

    pub fn even_dual(&self) -> Self {
        self.map(Piece::even_dual)
    }

    fn map(&self, f: impl Fn(&Piece) -> Piece) -> Self {
        Self { tag: self.tag, pieces: self.pieces.iter().map(f).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{sample_realization, MediumSpec};

    fn medium() -> MediumRealization {
        sample_realization(&MediumSpec::sin2_1d("V", 1.0, 0.0, 1.0), 0).unwrap()
    }

    #[test]
    fn mislabeled_piece_rejected() {
        let e = Piece::new(Profile::abs(0.0, 1.0, 0.0), Coupling::None, Convexity::Quasiconcave);
        assert!(matches!(e, Err(Error::Convexity(_))));
    }

    #[test]
    fn additive_and_amplitude_coupling() {
        let m = medium();
        let p = Piece::abs_additive(0.0, 1.0, -1.0, 0, 1.0).unwrap();
        assert_eq!(p.value(&[2.0], &[0.5], &m), 2.0);
        let spec = MediumSpec::sin2_1d("a", 1.0, 1.0, 1.0);
        let am = sample_realization(&spec, 0).unwrap();
        let q = Piece::new(Profile::abs(0.0, 1.0, 0.0), Coupling::Amplitude { channel: 0, a_min: 0.5 }, Convexity::Quasiconvex)
            .unwrap();
        q.check_medium(&am).unwrap();
        let mut g = [0.0];
        assert_eq!(q.eval(&[-3.0], &[0.5], &am, &mut g), 6.0);
        assert_eq!(g[0], -2.0);
        // sin² channel without offset reaches zero, which breaks the floor
        assert!(q.check_medium(&m).is_err());
    }

    #[test]
    fn negate_dual_of_shifted_abs() {
        // |p − 1| + V(x)  →  −|p + 1| − V(x)
        let m = medium();
        let p = Piece::abs_additive(1.0, 1.0, 0.0, 0, 1.0).unwrap();
        let n = p.negate_dual();
        assert_eq!(n.tag(), Convexity::Quasiconcave);
        for &(q, x) in &[(0.3, 0.1), (-2.0, 0.25), (1.5, 0.8)] {
            let v = m.channel(0, &[x]);
            let expect = -(q + 1.0f64).abs() - v;
            assert!((n.value(&[q], &[x], &m) - expect).abs() < 1e-15);
        }
        assert_eq!(n.negate_dual(), p);
    }

    #[test]
    fn envelope_takes_max_or_min() {
        let m = medium();
        let a = Piece::new(Profile::abs(0.0, 1.0, 0.0), Coupling::None, Convexity::Quasiconvex).unwrap();
        let b = Piece::new(Profile::abs(0.0, 1.0, 1.0), Coupling::None, Convexity::Quasiconvex).unwrap();
        let e = Envelope::new(vec![a.clone(), b]).unwrap();
        assert_eq!(e.value(&[0.5], &[0.0], &m), 1.5);
        let c = Piece::new(Profile::neg_abs(0.0, 1.0, 0.0), Coupling::None, Convexity::Quasiconcave).unwrap();
        assert!(Envelope::new(vec![a, c]).is_err());
    }
}
