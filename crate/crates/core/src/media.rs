//! Desk-scale random and periodic environments.
//!
//! A medium is a finite list of scalar coefficient channels on a torus. Pieces
//! read those channels as additive potentials or amplitudes. Three families are
//! available: periodic trigonometric fields, seeded checkerboards and
//! quasiperiodic fields whose frequencies are snapped to the torus lattice so
//! that every realization is periodic.
//!
//! Translation acts on an integer lattice offset, so the group law holds
//! exactly and evaluation after a grid-aligned shift reproduces the shifted
//! evaluation bit for bit.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    /// `A sin²(π k·x / P + φ)`
    Sin2,
    /// `A cos(2π k·x / P + φ)`
    Cos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicTerm {
    pub kind: TermKind,
    pub amplitude: f64,
    /// Integer wave vector relative to the period.
    pub wavevector: Vec<i32>,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicChannel {
    pub name: String,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub terms: Vec<PeriodicTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerboardChannel {
    pub name: String,
    /// Cell values are drawn uniformly from `[low, high]`.
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiMode {
    pub frequency: Vec<f64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiChannel {
    pub name: String,
    #[serde(default)]
    pub offset: f64,
    pub modes: Vec<QuasiMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MediumKind {
    Periodic {
        period: f64,
        channels: Vec<PeriodicChannel>,
    },
    Checkerboard {
        cell: f64,
        torus: f64,
        channels: Vec<CheckerboardChannel>,
    },
    Quasiperiodic {
        torus: f64,
        channels: Vec<QuasiChannel>,
    },
}

fn default_lattice() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    pub dimension: usize,
    #[serde(flatten)]
    pub kind: MediumKind,
    /// Nodes per torus axis of the translation lattice.
    #[serde(default = "default_lattice")]
    pub lattice: usize,
}

impl MediumSpec {
    pub fn periodic(dimension: usize, period: f64, channels: Vec<PeriodicChannel>) -> Self {
        Self {
            dimension,
            kind: MediumKind::Periodic { period, channels },
            lattice: default_lattice(),
        }
    }

    /// One channel `offset + amplitude·sin²(πx/period)` in 1D.
    pub fn sin2_1d(name: &str, period: f64, offset: f64, amplitude: f64) -> Self {
        Self::periodic(
            1,
            period,
            vec![PeriodicChannel {
                name: name.to_string(),
                offset,
                terms: vec![PeriodicTerm {
                    kind: TermKind::Sin2,
                    amplitude,
                    wavevector: vec![1],
                    phase: 0.0,
                }],
            }],
        )
    }

    /// A medium with no channels at all (x-independent Hamiltonians).
    pub fn empty(dimension: usize) -> Self {
        Self::periodic(dimension, 1.0, Vec::new())
    }

    pub fn torus_length(&self) -> f64 {
        match &self.kind {
            MediumKind::Periodic { period, .. } => *period,
            MediumKind::Checkerboard { torus, .. } | MediumKind::Quasiperiodic { torus, .. } => {
                *torus
            }
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, MediumKind::Periodic { .. })
    }

    pub fn channel_names(&self) -> Vec<&str> {
        match &self.kind {
            MediumKind::Periodic { channels, .. } => {
                channels.iter().map(|c| c.name.as_str()).collect()
            }
            MediumKind::Checkerboard { channels, .. } => {
                channels.iter().map(|c| c.name.as_str()).collect()
            }
            MediumKind::Quasiperiodic { channels, .. } => {
                channels.iter().map(|c| c.name.as_str()).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dimension) {
            return Err(Error::InvalidParameter(format!(
                "medium dimension must be 1 or 2, got {}",
                self.dimension
            )));
        }
        if self.lattice < 2 {
            return Err(Error::InvalidParameter("lattice must have at least 2 nodes".into()));
        }
        let torus = self.torus_length();
        if !(torus.is_finite() && torus > 0.0) {
            return Err(Error::InvalidParameter(format!("torus length {torus} must be positive")));
        }
        let mut names = self.channel_names();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate channel names".into()));
        }
        match &self.kind {
            MediumKind::Periodic { channels, .. } => {
                for c in channels {
                    for t in &c.terms {
                        if t.wavevector.len() != self.dimension {
                            return Err(Error::Dimension {
                                expected: self.dimension,
                                got: t.wavevector.len(),
                            });
                        }
                        if !t.amplitude.is_finite() || !t.phase.is_finite() {
                            return Err(Error::InvalidParameter(format!(
                                "channel {}: non-finite term",
                                c.name
                            )));
                        }
                    }
                }
            }
            MediumKind::Checkerboard { cell, torus, channels } => {
                let cells = torus / cell;
                if !(*cell > 0.0) || (cells - cells.round()).abs() > 1e-9 || cells.round() < 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "torus {torus} must be a positive integer multiple of the cell size {cell}"
                    )));
                }
                for c in channels {
                    if !(c.low.is_finite() && c.high.is_finite() && c.low <= c.high) {
                        return Err(Error::InvalidParameter(format!(
                            "channel {}: need finite low <= high",
                            c.name
                        )));
                    }
                }
            }
            MediumKind::Quasiperiodic { channels, .. } => {
                for c in channels {
                    for m in &c.modes {
                        if m.frequency.len() != self.dimension {
                            return Err(Error::Dimension {
                                expected: self.dimension,
                                got: m.frequency.len(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Tables {
    Analytic,
    /// Per channel, row-major cell values (axis 0 fastest).
    Cells { per_axis: usize, cell: f64, values: Vec<Vec<f64>> },
    /// Per channel, snapped frequencies.
    Quasi { frequencies: Vec<Vec<Vec<f64>>> },
}

/// One sampled environment. Immutable once created; cheap to clone.
#[derive(Debug, Clone)]
pub struct MediumRealization {
    spec: Arc<MediumSpec>,
    seed: u64,
    tables: Arc<Tables>,
    /// Translation offset in lattice steps per axis.
    shift: [i64; 2],
}

/// Draw a realization. Deterministic in `(spec, seed)`; periodic specs ignore the seed.
pub fn sample_realization(spec: &MediumSpec, seed: u64) -> Result<MediumRealization> {
    spec.validate()?;
    let tables = match &spec.kind {
        MediumKind::Periodic { .. } => Tables::Analytic,
        MediumKind::Checkerboard { cell, torus, channels } => {
            let per_axis = (torus / cell).round() as usize;
            let count = per_axis.pow(spec.dimension as u32);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = channels
                .iter()
                .map(|c| {
                    (0..count)
                        .map(|_| {
                            let u: f64 = rng.gen();
                            c.low + (c.high - c.low) * u
                        })
                        .collect()
                })
                .collect();
            Tables::Cells { per_axis, cell: *cell, values }
        }
        MediumKind::Quasiperiodic { torus, channels } => {
            let frequencies = channels
                .iter()
                .map(|c| {
                    c.modes
                        .iter()
                        .map(|m| {
                            m.frequency
                                .iter()
                                .map(|&w| {
                                    let snapped = (w * torus).round() / torus;
                                    if (snapped - w).abs() > 1e-12 {
                                        log::debug!(
                                            "channel {}: frequency {w} snapped to {snapped} on torus {torus}",
                                            c.name
                                        );
                                    }
                                    snapped
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            Tables::Quasi { frequencies }
        }
    };
    Ok(MediumRealization {
        spec: Arc::new(spec.clone()),
        seed,
        tables: Arc::new(tables),
        shift: [0, 0],
    })
}

impl MediumRealization {
    pub fn spec(&self) -> &MediumSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.spec.dimension
    }

    pub fn torus_length(&self) -> f64 {
        self.spec.torus_length()
    }

    pub fn lattice_spacing(&self) -> f64 {
        self.torus_length() / self.spec.lattice as f64
    }

    pub fn channel_count(&self) -> usize {
        self.spec.channel_names().len()
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.spec.channel_names().iter().position(|n| *n == name)
    }

    pub fn shift_steps(&self) -> [i64; 2] {
        self.shift
    }

    fn wrap(&self, x: f64) -> f64 {
        let l = self.torus_length();
        let r = x.rem_euclid(l);
        // rem_euclid can round up to l itself for tiny negative inputs
        if r >= l {
            0.0
        } else {
            r
        }
    }

    fn effective_point(&self, x: &[f64]) -> [f64; 2] {
        let h = self.lattice_spacing();
        let mut y = [0.0; 2];
        for (axis, xi) in x.iter().enumerate().take(self.dim()) {
            let shifted = if self.shift[axis] == 0 {
                *xi
            } else {
                xi + self.shift[axis] as f64 * h
            };
            y[axis] = self.wrap(shifted);
        }
        y
    }

    /// Value of coefficient channel `idx` at `x` (wrapped to the torus).
    pub fn channel(&self, idx: usize, x: &[f64]) -> f64 {
        let y = self.effective_point(x);
        let d = self.dim();
        match (&self.spec.kind, self.tables.as_ref()) {
            (MediumKind::Periodic { period, channels }, _) => {
                let c = &channels[idx];
                let mut v = c.offset;
                for t in &c.terms {
                    let mut kx = 0.0;
                    for a in 0..d {
                        kx += t.wavevector[a] as f64 * y[a];
                    }
                    v += match t.kind {
                        TermKind::Sin2 => {
                            let s = (PI * kx / period + t.phase).sin();
                            t.amplitude * s * s
                        }
                        TermKind::Cos => t.amplitude * (2.0 * PI * kx / period + t.phase).cos(),
                    };
                }
                v
            }
            (_, Tables::Cells { per_axis, cell, values }) => {
                let mut flat = 0usize;
                let mut stride = 1usize;
                for a in 0..d {
                    let i = ((y[a] / cell).floor() as usize).min(per_axis - 1);
                    flat += i * stride;
                    stride *= per_axis;
                }
                values[idx][flat]
            }
            (MediumKind::Quasiperiodic { channels, .. }, Tables::Quasi { frequencies }) => {
                let c = &channels[idx];
                let mut v = c.offset;
                for (m, w) in c.modes.iter().zip(&frequencies[idx]) {
                    let mut wx = 0.0;
                    for a in 0..d {
                        wx += w[a] * y[a];
                    }
                    v += m.amplitude * (2.0 * PI * wx + m.phase).cos();
                }
                v
            }
            _ => unreachable!("tables always match the spec kind"),
        }
    }

    /// All channel values at `x`, in declaration order.
    pub fn evaluate_coeffs(&self, x: &[f64]) -> Vec<f64> {
        (0..self.channel_count()).map(|i| self.channel(i, x)).collect()
    }

    /// Shift the environment by `z`: `translate(z).channel(i, x) == channel(i, x + z)`.
    ///
    /// `z` is snapped to the translation lattice; the second return value reports
    /// whether snapping moved it.
    pub fn translate(&self, z: &[f64]) -> (MediumRealization, bool) {
        let h = self.lattice_spacing();
        let mut out = self.clone();
        let mut snapped = false;
        for (axis, zi) in z.iter().enumerate().take(self.dim()) {
            let steps = (zi / h).round();
            if (steps * h - zi).abs() > 1e-12 * h.max(zi.abs()) {
                snapped = true;
            }
            out.shift[axis] += steps as i64;
        }
        let n = self.spec.lattice as i64;
        for s in out.shift.iter_mut() {
            *s = s.rem_euclid(n);
        }
        if snapped {
            log::warn!("translation {z:?} snapped to the lattice (spacing {h})");
        }
        (out, snapped)
    }

    /// Channel values on the translation lattice, row-major with axis 0 fastest.
    pub fn table(&self, idx: usize) -> Vec<f64> {
        let n = self.spec.lattice;
        let h = self.lattice_spacing();
        match self.dim() {
            1 => (0..n).map(|i| self.channel(idx, &[i as f64 * h])).collect(),
            _ => {
                let mut out = Vec::with_capacity(n * n);
                for j in 0..n {
                    for i in 0..n {
                        out.push(self.channel(idx, &[i as f64 * h, j as f64 * h]));
                    }
                }
                out
            }
        }
    }

    /// Guaranteed range of a channel, from the spec.
    pub fn channel_bounds(&self, idx: usize) -> (f64, f64) {
        match &self.spec.kind {
            MediumKind::Periodic { channels, .. } => {
                let c = &channels[idx];
                let (mut lo, mut hi) = (c.offset, c.offset);
                for t in &c.terms {
                    match t.kind {
                        TermKind::Sin2 => {
                            lo += t.amplitude.min(0.0);
                            hi += t.amplitude.max(0.0);
                        }
                        TermKind::Cos => {
                            lo -= t.amplitude.abs();
                            hi += t.amplitude.abs();
                        }
                    }
                }
                (lo, hi)
            }
            MediumKind::Checkerboard { channels, .. } => (channels[idx].low, channels[idx].high),
            MediumKind::Quasiperiodic { channels, .. } => {
                let c = &channels[idx];
                let a: f64 = c.modes.iter().map(|m| m.amplitude.abs()).sum();
                (c.offset - a, c.offset + a)
            }
        }
    }

    /// Points over one period at which sup/inf over x are taken.
    ///
    /// Checkerboards return their cell centers (exact for piecewise-constant
    /// fields); the other kinds return an `n`-per-axis grid on the torus.
    pub fn sample_points(&self, n: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let (count, step, start) = match self.tables.as_ref() {
            Tables::Cells { per_axis, cell, .. } => (*per_axis, *cell, 0.5 * cell),
            _ => (n.max(1), self.torus_length() / n.max(1) as f64, 0.0),
        };
        let axis: Vec<f64> = (0..count).map(|i| start + i as f64 * step).collect();
        if d == 1 {
            axis.into_iter().map(|x| vec![x]).collect()
        } else {
            let mut out = Vec::with_capacity(count * count);
            for &y in &axis {
                for &x in &axis {
                    out.push(vec![x, y]);
                }
            }
            out
        }
    }

    /// Number of checkerboard cells, if this is a checkerboard.
    pub fn cell_table(&self, idx: usize) -> Option<&[f64]> {
        match self.tables.as_ref() {
            Tables::Cells { values, .. } => Some(&values[idx]),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(seed: u64) -> MediumRealization {
        let spec = MediumSpec {
            dimension: 1,
            kind: MediumKind::Checkerboard {
                cell: 0.25,
                torus: 64.0,
                channels: vec![CheckerboardChannel { name: "V".into(), low: 0.0, high: 1.0 }],
            },
            lattice: 2048,
        };
        sample_realization(&spec, seed).unwrap()
    }

    #[test]
    fn periodic_ignores_seed() {
        let spec = MediumSpec::sin2_1d("V", 1.0, 0.0, 1.0);
        let a = sample_realization(&spec, 1).unwrap();
        let b = sample_realization(&spec, 99).unwrap();
        assert_eq!(a.table(0), b.table(0));
    }

    #[test]
    fn sin2_at_half_is_one() {
        let spec = MediumSpec::sin2_1d("V", 1.0, 0.0, 1.0);
        let m = sample_realization(&spec, 0).unwrap();
        assert_eq!(m.channel(0, &[0.5]), 1.0);
        assert_eq!(m.channel(0, &[0.375]), m.channel(0, &[1.375]));
    }

    #[test]
    fn checkerboard_is_deterministic() {
        assert_eq!(checkerboard(7).table(0), checkerboard(7).table(0));
    }

    #[test]
    fn checkerboard_seeds_differ_and_mean_is_plausible() {
        let a = checkerboard(1);
        let b = checkerboard(2);
        let ta = a.cell_table(0).unwrap();
        let tb = b.cell_table(0).unwrap();
        assert!(ta.iter().zip(tb).any(|(x, y)| x != y));
        // uniform[0,1]: mean 1/2, variance 1/12, 256 cells
        let n = ta.len() as f64;
        let mean = ta.iter().sum::<f64>() / n;
        let sigma = (1.0 / 12.0 / n).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn checkerboard_constant_within_cell() {
        let m = checkerboard(3);
        assert_eq!(m.channel(0, &[0.26]), m.channel(0, &[0.49]));
        let (lo, hi) = m.channel_bounds(0);
        assert!(m.table(0).iter().all(|v| (lo..=hi).contains(v)));
    }

    #[test]
    fn translate_identities() {
        let m = checkerboard(5);
        let (same, snapped) = m.translate(&[0.0]);
        assert!(!snapped);
        assert_eq!(same.table(0), m.table(0));
        let (full, _) = m.translate(&[64.0]);
        assert_eq!(full.table(0), m.table(0));
    }

    #[test]
    fn translate_is_exact_on_grid() {
        let m = checkerboard(11);
        let z = 37.0 * m.lattice_spacing();
        let (t, snapped) = m.translate(&[z]);
        assert!(!snapped);
        for k in 0..200 {
            let x = k as f64 * 0.3125;
            assert_eq!(t.channel(0, &[x]), m.channel(0, &[x + z]));
        }
    }

    #[test]
    fn translate_snaps_off_grid() {
        let m = checkerboard(11);
        let (_, snapped) = m.translate(&[1e-3]);
        assert!(snapped);
    }

    #[test]
    fn quasiperiodic_is_torus_periodic() {
        let spec = MediumSpec {
            dimension: 1,
            kind: MediumKind::Quasiperiodic {
                torus: 16.0,
                channels: vec![QuasiChannel {
                    name: "V".into(),
                    offset: 0.5,
                    modes: vec![
                        QuasiMode { frequency: vec![1.0], amplitude: 0.25, phase: 0.0 },
                        QuasiMode { frequency: vec![std::f64::consts::SQRT_2], amplitude: 0.25, phase: 0.1 },
                    ],
                }],
            },
            lattice: 1024,
        };
        let m = sample_realization(&spec, 0).unwrap();
        for k in 0..50 {
            let x = k as f64 * 0.125;
            assert_eq!(m.channel(0, &[x]), m.channel(0, &[x + 16.0]));
        }
        let (lo, hi) = m.channel_bounds(0);
        assert!(m.table(0).iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
    }

    #[test]
    fn bad_checkerboard_rejected() {
        let spec = MediumSpec {
            dimension: 1,
            kind: MediumKind::Checkerboard {
                cell: 0.3,
                torus: 1.0,
                channels: vec![],
            },
            lattice: 64,
        };
        assert!(sample_realization(&spec, 0).is_err());
    }
}
