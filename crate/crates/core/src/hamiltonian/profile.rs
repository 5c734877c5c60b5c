use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether sublevel sets (quasiconvex) or superlevel sets (quasiconcave) are convex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    Quasiconvex,
    Quasiconcave,
}

impl Convexity {
    pub fn flip(self) -> Self {
        match self {
            Convexity::Quasiconvex => Convexity::Quasiconcave,
            Convexity::Quasiconcave => Convexity::Quasiconvex,
        }
    }

    /// +1 for coercive, −1 for anticoercive.
    pub fn coercivity_sign(self) -> i8 {
        match self {
            Convexity::Quasiconvex => 1,
            Convexity::Quasiconcave => -1,
        }
    }
}

/// The p-dependence of a piece. All kinds are functions of `r = |p − c|` (Euclidean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `slope·|p − c| + offset`
    AbsShift { center: Vec<f64>, slope: f64, offset: f64 },
    /// `offset − slope·|p − c|`
    NegatedAbs { center: Vec<f64>, slope: f64, offset: f64 },
    /// Piecewise-linear in `r` through `(breakpoints[i], values[i])`, starting at `r = 0`
    /// and extended linearly past the last breakpoint.
    PiecewiseMonotone { center: Vec<f64>, breakpoints: Vec<f64>, values: Vec<f64> },
}

impl Profile {
    pub fn abs(center: f64, slope: f64, offset: f64) -> Self {
        Profile::AbsShift { center: vec![center], slope, offset }
    }

    pub fn neg_abs(center: f64, slope: f64, offset: f64) -> Self {
        Profile::NegatedAbs { center: vec![center], slope, offset }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Profile::AbsShift { center, .. }
            | Profile::NegatedAbs { center, .. }
            | Profile::PiecewiseMonotone { center, .. } => center,
        }
    }

    pub fn dim(&self) -> usize {
        self.center().len()
    }

    /// Checks the parameters and returns the convexity class the shape certifies.
    pub fn classify(&self) -> Result<Convexity> {
        let d = self.dim();
        if !(1..=2).contains(&d) {
            return Err(Error::Dimension { expected: 1, got: d });
        }
        if self.center().iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("profile center must be finite".into()));
        }
        match self {
            Profile::AbsShift { slope, offset, .. } | Profile::NegatedAbs { slope, offset, .. } => {
                if !(slope.is_finite() && *slope > 0.0 && offset.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "slope {slope} must be positive and offset {offset} finite"
                    )));
                }
                Ok(if matches!(self, Profile::AbsShift { .. }) {
                    Convexity::Quasiconvex
                } else {
                    Convexity::Quasiconcave
                })
            }
            Profile::PiecewiseMonotone { breakpoints, values, .. } => {
                if breakpoints.len() < 2 || breakpoints.len() != values.len() {
                    return Err(Error::InvalidParameter(
                        "piecewise profile needs at least two breakpoints and one value per breakpoint"
                            .into(),
                    ));
                }
                if breakpoints[0] != 0.0 {
                    return Err(Error::InvalidParameter("first breakpoint must be 0".into()));
                }
                if breakpoints.windows(2).any(|w| !(w[1] > w[0])) || breakpoints.iter().any(|b| !b.is_finite()) {
                    return Err(Error::InvalidParameter("breakpoints must increase strictly".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("profile values must be finite".into()));
                }
                let nondecreasing = values.windows(2).all(|w| w[1] >= w[0]);
                let nonincreasing = values.windows(2).all(|w| w[1] <= w[0]);
                let last = self.tail_slope();
                if nondecreasing && last > 0.0 {
                    Ok(Convexity::Quasiconvex)
                } else if nonincreasing && last < 0.0 {
                    Ok(Convexity::Quasiconcave)
                } else {
                    Err(Error::Convexity(
                        "piecewise profile must be monotone in r with a nonzero final slope".into(),
                    ))
                }
            }
        }
    }

    fn tail_slope(&self) -> f64 {
        match self {
            Profile::AbsShift { slope, .. } => *slope,
            Profile::NegatedAbs { slope, .. } => -*slope,
            Profile::PiecewiseMonotone { breakpoints, values, .. } => {
                let n = breakpoints.len();
                (values[n - 1] - values[n - 2]) / (breakpoints[n - 1] - breakpoints[n - 2])
            }
        }
    }

    /// Global bound on `|dφ/dr|`, which bounds every partial derivative in p.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            Profile::AbsShift { slope, .. } | Profile::NegatedAbs { slope, .. } => *slope,
            Profile::PiecewiseMonotone { breakpoints, values, .. } => breakpoints
                .windows(2)
                .zip(values.windows(2))
                .map(|(b, v)| ((v[1] - v[0]) / (b[1] - b[0])).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Value at the center: the minimum of a quasiconvex shape, the maximum of a quasiconcave one.
    pub fn extremum(&self) -> f64 {
        match self {
            Profile::AbsShift { offset, .. } | Profile::NegatedAbs { offset, .. } => *offset,
            Profile::PiecewiseMonotone { values, .. } => values[0],
        }
    }

    /// Radial function `φ(r)` and its derivative.
    #[inline]
    pub fn radial(&self, r: f64) -> (f64, f64) {
        match self {
            Profile::AbsShift { slope, offset, .. } => (slope * r + offset, *slope),
            Profile::NegatedAbs { slope, offset, .. } => (offset - slope * r, -*slope),
            Profile::PiecewiseMonotone { breakpoints, values, .. } => {
                let n = breakpoints.len();
                // segment index i with breakpoints[i] <= r < breakpoints[i+1], clamped to the last one
                let i = match breakpoints.partition_point(|b| *b <= r) {
                    0 => 0,
                    k => (k - 1).min(n - 2),
                };
                let slope = (values[i + 1] - values[i]) / (breakpoints[i + 1] - breakpoints[i]);
                (values[i] + slope * (r - breakpoints[i]), slope)
            }
        }
    }

    /// `sup{r ≥ 0 : φ(r) ≤ y}` for a quasiconvex shape; `None` below the minimum or for
    /// quasiconcave shapes.
    pub fn radial_inverse(&self, y: f64) -> Option<f64> {
        match self {
            Profile::AbsShift { slope, offset, .. } => (y >= *offset).then(|| (y - offset) / slope),
            Profile::NegatedAbs { .. } => None,
            Profile::PiecewiseMonotone { breakpoints, values, .. } => {
                let n = values.len();
                if y < values[0] || values[n - 1] < values[0] {
                    return None;
                }
                if y >= values[n - 1] {
                    let tail = (values[n - 1] - values[n - 2]) / (breakpoints[n - 1] - breakpoints[n - 2]);
                    return Some(breakpoints[n - 1] + (y - values[n - 1]) / tail);
                }
                // last k with values[k] <= y, so values[k + 1] > y
                let k = values.partition_point(|v| *v <= y) - 1;
                let t = (y - values[k]) / (values[k + 1] - values[k]);
                Some(breakpoints[k] + t * (breakpoints[k + 1] - breakpoints[k]))
            }
        }
    }

    /// `φ(|p − c|)`, writing `∂φ/∂p` into `grad[..d]`.
    #[inline]
    pub fn eval(&self, p: &[f64], grad: &mut [f64]) -> f64 {
        let c = self.center();
        let d = c.len();
        let mut diff = [0.0; 2];
        let mut r2 = 0.0;
        for a in 0..d {
            diff[a] = p[a] - c[a];
            r2 += diff[a] * diff[a];
        }
        let r = if d == 1 { diff[0].abs() } else { r2.sqrt() };
        let (v, dv) = self.radial(r);
        if r > 0.0 {
            for a in 0..d {
                grad[a] = dv * diff[a] / r;
            }
        } else {
            for g in grad.iter_mut().take(d) {
                *g = 0.0;
            }
        }
        v
    }

    /// `−φ(−p)`.
    pub fn negate_dual(&self) -> Self {
        let neg = |c: &[f64]| c.iter().map(|v| -v).collect::<Vec<_>>();
        match self {
            Profile::AbsShift { center, slope, offset } => Profile::NegatedAbs {
                center: neg(center),
                slope: *slope,
                offset: -offset,
            },
            Profile::NegatedAbs { center, slope, offset } => Profile::AbsShift {
                center: neg(center),
                slope: *slope,
                offset: -offset,
            },
            Profile::PiecewiseMonotone { center, breakpoints, values } => Profile::PiecewiseMonotone {
                center: neg(center),
                breakpoints: breakpoints.clone(),
                values: values.iter().map(|v| -v).collect(),
            },
        }
    }

    /// `φ(−p)`.
    pub fn even_dual(&self) -> Self {
        let mut out = self.clone();
        match &mut out {
            Profile::AbsShift { center, .. }
            | Profile::NegatedAbs { center, .. }
            | Profile::PiecewiseMonotone { center, .. } => {
                for c in center.iter_mut() {
                    *c = -*c;
                }
            }
        }
        out
    }
}
