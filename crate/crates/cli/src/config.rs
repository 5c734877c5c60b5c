use std::path::{Path, PathBuf};

use minmax_hj::effective::EstimateOptions;
use minmax_hj::grid::Grid;
use minmax_hj::hamiltonian::{Convexity, Coupling, Envelope, MinMaxFamily, Piece, Profile};
use minmax_hj::media::{MediumRealization, MediumSpec};
use minmax_hj::solver::{Relaxation, SchemeParams};
use minmax_hj::stable_pairs::ContactOptions;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::initial::InitialDatum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Medium realizations; the first drives the solvers, all of them enter the contact
    /// constants.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Run directory used when `--out` is absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub medium: MediumSpec,
    pub family: FamilyConfig,
    #[serde(default)]
    pub check: CheckConfig,
    pub solver: SolverConfig,
    pub p_axis: PAxis,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    /// Level 1 first.
    pub levels: Vec<LevelConfig>,
    /// Replace the lists by their suffix envelopes instead of requiring them ordered.
    #[serde(default)]
    pub reorder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    /// Pieces of the check envelope (max).
    pub check: Vec<PieceConfig>,
    /// Pieces of the hat envelope (min).
    pub hat: Vec<PieceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceConfig {
    pub profile: Profile,
    /// Channel added as `scale·a(x)`.
    #[serde(default)]
    pub potential: Option<String>,
    #[serde(default = "one")]
    pub scale: f64,
    /// Channel multiplying the profile.
    #[serde(default)]
    pub amplitude: Option<String>,
    #[serde(default)]
    pub a_min: Option<f64>,
    #[serde(default)]
    pub constant: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// x nodes per axis over one period for the contact fields.
    #[serde(default = "default_n_x")]
    pub n_x: usize,
    /// p nodes per axis for the pair analysis.
    #[serde(default)]
    pub n_p: Option<usize>,
    #[serde(default)]
    pub half_width: Option<f64>,
    /// Radius of the p box used for the ordering and convexity samples.
    #[serde(default = "default_sample_radius")]
    pub sample_radius: f64,
}

fn default_n_x() -> usize {
    64
}

fn default_sample_radius() -> f64 {
    4.0
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { n_x: default_n_x(), n_p: None, half_width: None, sample_radius: default_sample_radius() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Cells per axis of the cell-problem torus.
    pub n: usize,
    /// Side of the cell-problem torus; defaults to the medium torus.
    #[serde(default)]
    pub length: Option<f64>,
    pub lambda_schedule: Vec<f64>,
    #[serde(default)]
    pub relaxation: Relaxation,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "one")]
    pub uniform_radius: f64,
}

fn default_max_iterations() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PAxis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// Unit direction of the sampled line in 2D.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CurveSource {
    #[default]
    Formula,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Strictly decreasing.
    pub eps: Vec<f64>,
    pub t_final: f64,
    /// Cells of the periodic box.
    pub n: usize,
    /// Side of the box, centered at the origin.
    pub length: f64,
    pub u0: InitialDatum,
    /// Errors are sampled on `|x| ≤ interior·length/2`.
    #[serde(default = "default_interior")]
    pub interior: f64,
    /// Sample times `T·j/times`, `j = 1..times`.
    #[serde(default = "default_times")]
    pub times: usize,
    #[serde(default)]
    pub effective: CurveSource,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn default_interior() -> f64 {
    0.5
}

fn default_times() -> usize {
    4
}

fn default_cfl() -> f64 {
    0.9
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn strictly_decreasing(name: &str, s: &[f64]) -> CliResult<()> {
    if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) || s.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(bad(format!("{name} = {s:?} must be positive and strictly decreasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => bad(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        self.medium.validate().map_err(|e| bad(format!("medium: {e}")))?;
        let d = self.medium.dimension;
        if self.seeds.is_empty() {
            return Err(bad("seeds must not be empty"));
        }
        if self.family.levels.is_empty() {
            return Err(bad("family.levels must not be empty"));
        }
        let names = self.medium.channel_names();
        for (k, level) in self.family.levels.iter().enumerate() {
            for (side, pieces) in [("check", &level.check), ("hat", &level.hat)] {
                if pieces.is_empty() {
                    return Err(bad(format!("family.levels[{k}].{side} has no pieces")));
                }
                for (j, p) in pieces.iter().enumerate() {
                    let at = format!("family.levels[{k}].{side}[{j}]");
                    if p.profile.dim() != d {
                        return Err(bad(format!("{at}: profile dimension {} but the medium has {d}", p.profile.dim())));
                    }
                    if p.potential.is_some() && p.amplitude.is_some() {
                        return Err(bad(format!("{at}: set either potential or amplitude, not both")));
                    }
                    for ch in p.potential.iter().chain(&p.amplitude) {
                        if !names.contains(&ch.as_str()) {
                            return Err(bad(format!("{at}: unknown channel {ch:?} (medium has {names:?})")));
                        }
                    }
                    if p.amplitude.is_some() && p.a_min.is_none() {
                        return Err(bad(format!("{at}: amplitude coupling needs a_min")));
                    }
                }
            }
        }
        if self.check.n_x < 2 {
            return Err(bad("check.n_x must be at least 2"));
        }
        strictly_decreasing("solver.lambda_schedule", &self.solver.lambda_schedule)?;
        if self.solver.lambda_schedule.len() < 3 {
            return Err(bad("solver.lambda_schedule needs at least 3 entries"));
        }
        let torus = self.medium.torus_length();
        let length = self.solver.length.unwrap_or(torus);
        let periods = length / torus;
        if !(periods >= 1.0 - 1e-12 && (periods - periods.round()).abs() < 1e-9) {
            return Err(bad(format!("solver.length = {length} must be a positive multiple of the medium torus {torus}")));
        }
        Grid::torus(d, self.solver.n, length).map_err(|e| bad(format!("solver: {e}")))?;
        let ax = &self.p_axis;
        if !(ax.min < ax.max) || ax.points < 3 {
            return Err(bad("p_axis needs min < max and at least 3 points"));
        }
        match (&ax.direction, d) {
            (None, 1) => {}
            (Some(v), 1) if v.len() == 1 => {}
            (Some(v), 2) if v.len() == 2 && v.iter().any(|c| *c != 0.0) => {}
            _ => return Err(bad(format!("p_axis.direction must be a nonzero {d}-vector (required in 2D)"))),
        }
        if let Some(s) = &self.sweep {
            if d != 1 {
                return Err(bad("sweep is implemented for one-dimensional media"));
            }
            strictly_decreasing("sweep.eps", &s.eps)?;
            if !(s.t_final > 0.0) || s.times == 0 {
                return Err(bad("sweep needs t_final > 0 and times ≥ 1"));
            }
            if !(s.interior > 0.0 && s.interior <= 1.0) || !(s.cfl > 0.0 && s.cfl <= 1.0) {
                return Err(bad("sweep.interior and sweep.cfl must lie in (0, 1]"));
            }
            let grid = Grid::centered(1, s.n, s.length).map_err(|e| bad(format!("sweep: {e}")))?;
            let h = grid.spacing();
            for &e in &s.eps {
                if e < 2.0 * h {
                    return Err(bad(format!("sweep.eps = {e} is below 2h = {} on this grid", 2.0 * h)));
                }
                let cells = s.length / (e * torus);
                if (cells - cells.round()).abs() > 1e-9 {
                    return Err(bad(format!("sweep.length must hold a whole number of ε-periods (ε = {e})")));
                }
            }
            s.u0.validate().map_err(bad)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.medium.dimension
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = vec![seed];
        self
    }

    pub fn envelopes(&self, m: &MediumRealization) -> CliResult<(Vec<Envelope>, Vec<Envelope>)> {
        let build = |pieces: &[PieceConfig], tag: Convexity, at: String| -> CliResult<Envelope> {
            let mut out = Vec::with_capacity(pieces.len());
            for (j, p) in pieces.iter().enumerate() {
                let channel = |name: &str| {
                    m.channel_index(name).ok_or_else(|| bad(format!("{at}[{j}]: unknown channel {name:?}")))
                };
                let coupling = match (&p.potential, &p.amplitude) {
                    (Some(c), None) => Coupling::Additive { channel: channel(c)?, scale: p.scale },
                    (None, Some(c)) => Coupling::Amplitude { channel: channel(c)?, a_min: p.a_min.unwrap_or(0.0) },
                    _ => Coupling::None,
                };
                let piece = Piece::new(p.profile.clone(), coupling, tag).map_err(|e| CliError::Hypothesis {
                    failures: vec![format!("{at}[{j}]: {e}")],
                })?;
                out.push(piece.with_constant(p.constant));
            }
            Envelope::new(out).map_err(CliError::from)
        };
        let mut checks = Vec::new();
        let mut hats = Vec::new();
        for (k, level) in self.family.levels.iter().enumerate() {
            checks.push(build(&level.check, Convexity::Quasiconvex, format!("family.levels[{k}].check"))?);
            hats.push(build(&level.hat, Convexity::Quasiconcave, format!("family.levels[{k}].hat"))?);
        }
        Ok((checks, hats))
    }

    pub fn unordered_family(&self, m: &MediumRealization) -> CliResult<MinMaxFamily> {
        let (checks, hats) = self.envelopes(m)?;
        Ok(MinMaxFamily::new(checks, hats)?)
    }

    pub fn solver_grid(&self) -> Grid {
        let length = self.solver.length.unwrap_or(self.medium.torus_length());
        Grid::torus(self.dim(), self.solver.n, length).expect("validated")
    }

    pub fn contact_grid(&self) -> Grid {
        Grid::torus(self.dim(), self.check.n_x, self.medium.torus_length()).expect("validated")
    }

    pub fn contact_options(&self) -> ContactOptions {
        let mut o = ContactOptions::for_dim(self.dim());
        if let Some(n) = self.check.n_p {
            o.n_p = n;
        }
        if let Some(w) = self.check.half_width {
            o.half_width = w;
        }
        o
    }

    pub fn estimate_options(&self) -> EstimateOptions {
        let mut o = EstimateOptions::new(self.solver.lambda_schedule.clone(), self.solver_grid());
        o.params = SchemeParams {
            theta: self.solver.theta,
            tol: self.solver.tol,
            max_iterations: self.solver.max_iterations,
            relaxation: self.solver.relaxation,
            ..SchemeParams::default()
        };
        o.uniform_radius = self.solver.uniform_radius;
        // periodized random media only approximate the ergodic limit
        o.ball_guard = !self.medium.is_periodic();
        o
    }

    /// The sampled p line, scalar parameters and vectors.
    pub fn p_samples(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let ax = &self.p_axis;
        let ts: Vec<f64> =
            (0..ax.points).map(|i| ax.min + (ax.max - ax.min) * i as f64 / (ax.points - 1) as f64).collect();
        let dir = match &ax.direction {
            Some(v) => {
                let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                v.iter().map(|c| c / n).collect()
            }
            None => vec![1.0],
        };
        let ps = ts.iter().map(|t| dir.iter().map(|c| t * c).collect()).collect();
        (ts, ps)
    }
}
