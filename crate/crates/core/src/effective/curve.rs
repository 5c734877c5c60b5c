use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Numeric { lambda_schedule: Vec<f64> },
    Formula,
    Oracle,
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::Numeric { .. } => "numeric",
            Provenance::Formula => "formula",
            Provenance::Oracle => "oracle",
        }
    }
}

/// Sampled values of an effective Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveCurve {
    pub p_samples: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub error_bars: Vec<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub holds: bool,
    /// Largest `|ΔH̄| − L·|Δp| − (e_i + e_j)` over adjacent samples.
    pub worst_excess: f64,
    pub worst_index: Option<usize>,
}

impl EffectiveCurve {
    pub fn new(p_samples: Vec<Vec<f64>>, values: Vec<f64>, error_bars: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if p_samples.len() != values.len() {
            return Err(Error::LengthMismatch { left: p_samples.len(), right: values.len() });
        }
        if error_bars.len() != values.len() {
            return Err(Error::LengthMismatch { left: error_bars.len(), right: values.len() });
        }
        if p_samples.is_empty() {
            return Err(Error::Empty);
        }
        let d = p_samples[0].len();
        if let Some(bad) = p_samples.iter().find(|p| p.len() != d) {
            return Err(Error::Dimension { expected: d, got: bad.len() });
        }
        Ok(Self { p_samples, values, error_bars, provenance })
    }

    /// A 1D curve on scalar samples.
    pub fn from_scalar(ps: &[f64], values: Vec<f64>, error_bars: Vec<f64>, provenance: Provenance) -> Result<Self> {
        Self::new(ps.iter().map(|p| vec![*p]).collect(), values, error_bars, provenance)
    }

    pub fn dim(&self) -> usize {
        self.p_samples[0].len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_samples(&self, other: &EffectiveCurve) -> bool {
        self.p_samples == other.p_samples
    }

    pub fn max_abs_diff(&self, other: &EffectiveCurve) -> Result<f64> {
        if !self.same_samples(other) {
            return Err(Error::GridMismatch("curves are sampled at different p".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Adjacent samples (in list order) differ by at most `L·|Δp|` plus their error bars.
    pub fn check_continuity(&self, lipschitz: f64) -> ContinuityReport {
        let mut worst = f64::NEG_INFINITY;
        let mut idx = None;
        for i in 1..self.len() {
            let dp = dist(&self.p_samples[i], &self.p_samples[i - 1]);
            let excess = (self.values[i] - self.values[i - 1]).abs()
                - lipschitz * dp
                - (self.error_bars[i] + self.error_bars[i - 1])
                - 1e-12 * (1.0 + self.values[i].abs());
            if excess > worst {
                worst = excess;
                idx = Some(i);
            }
        }
        ContinuityReport { holds: worst <= 0.0, worst_excess: worst.max(f64::MIN), worst_index: idx }
    }

    /// The outermost samples in |p| grow outward: on each side the value at the largest
    /// |p| exceeds the value two samples inward, beyond the error bars.
    pub fn coercive_tail(&self) -> bool {
        let n = self.len();
        if n < 3 {
            return false;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| norm(&self.p_samples[a]).total_cmp(&norm(&self.p_samples[b])));
        let grows = |outer: usize, inner: usize| {
            self.values[outer] - self.values[inner] > self.error_bars[outer] + self.error_bars[inner]
        };
        if self.dim() == 1 {
            // both ends of a 1D axis
            let mut sorted: Vec<usize> = (0..n).collect();
            sorted.sort_by(|&a, &b| self.p_samples[a][0].total_cmp(&self.p_samples[b][0]));
            grows(sorted[0], sorted[2]) && grows(sorted[n - 1], sorted[n - 3])
        } else {
            grows(order[n - 1], order[n / 2])
        }
    }

    /// CSV `p,value,error_bar,provenance` (`p1,p2,…` in 2D).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        if self.dim() == 1 {
            writeln!(w, "p,value,error_bar,provenance")?;
        } else {
            writeln!(w, "p1,p2,value,error_bar,provenance")?;
        }
        for i in 0..self.len() {
            let ps: Vec<String> = self.p_samples[i].iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{},{},{}", ps.join(","), self.values[i], self.error_bars[i], self.provenance.label())?;
        }
        Ok(())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Piecewise-linear interpolant of a 1D curve, extended linearly past both ends.
#[derive(Debug, Clone)]
pub struct CurveInterpolant {
    ps: Vec<f64>,
    values: Vec<f64>,
    lipschitz: f64,
}

impl CurveInterpolant {
    pub fn new(curve: &EffectiveCurve) -> Result<Self> {
        if curve.dim() != 1 {
            return Err(Error::Dimension { expected: 1, got: curve.dim() });
        }
        if curve.len() < 2 {
            return Err(Error::InvalidParameter("interpolation needs at least two samples".into()));
        }
        let ps: Vec<f64> = curve.p_samples.iter().map(|p| p[0]).collect();
        if ps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("curve samples must be strictly increasing in p".into()));
        }
        let lipschitz = ps
            .windows(2)
            .zip(curve.values.windows(2))
            .map(|(p, v)| ((v[1] - v[0]) / (p[1] - p[0])).abs())
            .fold(0.0, f64::max);
        Ok(Self { ps, values: curve.values.clone(), lipschitz })
    }

    pub fn eval(&self, p: f64) -> (f64, f64) {
        let n = self.ps.len();
        let i = match self.ps.partition_point(|q| *q <= p) {
            0 => 0,
            k => (k - 1).min(n - 2),
        };
        let slope = (self.values[i + 1] - self.values[i]) / (self.ps[i + 1] - self.ps[i]);
        (self.values[i] + slope * (p - self.ps[i]), slope)
    }
}

impl Hamiltonian for CurveInterpolant {
    fn dim(&self) -> usize {
        1
    }

    fn eval_split(&self, base: &[f64], q: &[f64], _x: &[f64], grad: &mut [f64]) -> f64 {
        let (v, g) = self.eval(base[0] + q[0]);
        grad[0] = g;
        v
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn is_x_independent(&self) -> bool {
        true
    }
}
