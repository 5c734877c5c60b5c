use std::path::{Path, PathBuf};

use log::info;
use minmax_hj::effective::{
    estimate_curve, piece_effective, theorem_formula_ladder, CurveInterpolant, EffectiveCurve, Provenance,
};
use minmax_hj::grid::Grid;
use minmax_hj::hamiltonian::{check_convexity_sampled, reorder_family, FamilyHamiltonian, Hamiltonian, Level, MinMaxFamily, SampleSet};
use minmax_hj::media::{sample_realization, MediumRealization};
use minmax_hj::solver::{solve_homogenized, solve_time_dependent, Evolution, TimeParams};
use minmax_hj::stable_pairs::{check_condition_e, check_monotonicity, contact_fields, ContactConstants};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CurveSource, ExperimentConfig, SweepConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{RunDir, RunManifest, Verdicts};

const CONVEXITY_THETAS: [f64; 3] = [0.25, 0.5, 0.75];

/// Result of the hypothesis stage.
pub struct Checked {
    pub medium: MediumRealization,
    pub family: Option<MinMaxFamily>,
    pub constants: Option<ContactConstants>,
    pub verdicts: Verdicts,
}

impl Checked {
    fn failures(&self) -> Vec<String> {
        let v = &self.verdicts;
        let failed = [v.quasiconvexity, v.ordering, v.a4, v.m].iter().any(|x| *x == Some(false));
        if failed {
            v.witnesses.clone()
        } else {
            Vec::new()
        }
    }
}

fn realizations(cfg: &ExperimentConfig) -> CliResult<Vec<MediumRealization>> {
    cfg.seeds.iter().map(|&s| sample_realization(&cfg.medium, s).map_err(CliError::from)).collect()
}

/// Quasiconvexity, ordering, stable pairs, (M), (M⁺) and (E), in that order; stops at
/// the first verdict that makes the later ones meaningless.
pub fn run_checks(cfg: &ExperimentConfig) -> CliResult<Checked> {
    let media = realizations(cfg)?;
    let m = media[0].clone();
    let mut v = Verdicts::default();
    let done = |medium: MediumRealization, family, constants, v| Ok(Checked { medium, family, constants, verdicts: v });

    let (checks, hats) = match cfg.envelopes(&m) {
        Ok(e) => e,
        Err(CliError::Hypothesis { failures }) => {
            v.quasiconvexity = Some(false);
            v.witnesses = failures;
            return done(m, None, None, v);
        }
        Err(e) => return Err(e),
    };
    let d = cfg.dim();
    let (n_p, n_x) = if d == 1 { (41, 8) } else { (9, 4) };
    let r = cfg.check.sample_radius;
    for medium in &media {
        let samples = SampleSet::lattice(medium, r, n_p, n_x);
        for env in checks.iter().chain(&hats) {
            if let Err(e) = check_convexity_sampled(env, medium, &samples, &CONVEXITY_THETAS) {
                v.quasiconvexity = Some(false);
                v.witnesses.push(e.to_string());
                return done(m, None, None, v);
            }
        }
    }
    v.quasiconvexity = Some(true);

    let family = if cfg.family.reorder {
        reorder_family(checks, hats)?
    } else {
        let (n_p, n_x) = if d == 1 { (65, 16) } else { (17, 8) };
        let mut f = MinMaxFamily::new(checks, hats)?;
        let mut status = Ok(());
        for medium in &media {
            status = f.verify_ordering(medium, &SampleSet::lattice(medium, r, n_p, n_x));
            if status.is_err() {
                break;
            }
        }
        match status {
            Ok(()) => f,
            Err(e @ minmax_hj::Error::OrderingViolation { .. }) => {
                v.ordering = Some(false);
                v.witnesses.push(e.to_string());
                return done(m, None, None, v);
            }
            Err(e) => return Err(e.into()),
        }
    };
    v.ordering = Some(true);

    let x_grid = cfg.contact_grid();
    let opts = cfg.contact_options();
    let mut constants: Option<ContactConstants> = None;
    for medium in &media {
        match contact_fields(&family, medium, &x_grid, &opts) {
            Ok(c) => match &mut constants {
                None => constants = Some(c),
                Some(acc) => acc.merge(&c)?,
            },
            Err(e @ minmax_hj::Error::UnstablePair { .. }) => {
                v.a4 = Some(false);
                v.witnesses.push(format!("seed {}: {e}", medium.seed()));
                return done(m, Some(family), None, v);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let constants = constants.expect("at least one seed");
    v.a4 = Some(true);

    let mono = check_monotonicity(&constants);
    v.m = Some(mono.holds_m);
    v.m_strict = Some(mono.holds_m_strict);
    if !mono.holds_m {
        v.witnesses.extend(mono.violations.iter().map(|s| format!("(M): {s}")));
    }
    let e = check_condition_e(&family, &m, &constants, &opts);
    v.e = Some(e.holds);
    if let Some(w) = e.witness {
        v.witnesses.push(format!("(E) advisory: {w}"));
    }
    done(m, Some(family), Some(constants), v)
}

fn check_stage(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> CliResult<Checked> {
    let checked = manifest.time("check", |_| run_checks(cfg))?;
    manifest.verdicts = checked.verdicts.clone();
    if let Some(c) = &checked.constants {
        manifest.record("contact_constants", c);
    }
    Ok(checked)
}

fn verdict_line(name: &str, v: Option<bool>) -> String {
    let s = match v {
        Some(true) => "holds",
        Some(false) => "FAILS",
        None => "not evaluated",
    };
    format!("{name:<16} {s}")
}

fn print_verdicts(v: &Verdicts) {
    println!("{}", verdict_line("quasiconvexity", v.quasiconvexity));
    println!("{}", verdict_line("ordering", v.ordering));
    println!("{}", verdict_line("(A4)", v.a4));
    println!("{}", verdict_line("(M)", v.m));
    println!("{}", verdict_line("(M+)", v.m_strict));
    println!("{}", verdict_line("(E)", v.e));
    for w in &v.witnesses {
        println!("  witness: {w}");
    }
}

/// `check`: hypothesis verdicts only. Writes the manifest and nothing else.
pub fn cmd_check(cfg: &ExperimentConfig, out: &Path) -> CliResult<PathBuf> {
    let mut run = RunDir::open(out)?;
    let mut manifest = RunManifest::new("check", cfg);
    let checked = check_stage(cfg, &mut manifest)?;
    print_verdicts(&checked.verdicts);
    let path = run.finish(&mut manifest)?;
    let failures = checked.failures();
    if !failures.is_empty() {
        return Err(CliError::Hypothesis { failures });
    }
    Ok(path)
}

fn gate(checked: &Checked, force: bool) -> CliResult<()> {
    let failures = checked.failures();
    if failures.is_empty() {
        return Ok(());
    }
    if force {
        log::warn!("continuing past failed hypotheses (--force): {}", failures.join("; "));
        return Ok(());
    }
    Err(CliError::Hypothesis { failures })
}

fn p_header(dim: usize) -> &'static str {
    if dim == 1 {
        "p"
    } else {
        "p1,p2"
    }
}

fn p_cells(p: &[f64]) -> String {
    p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Serialize)]
struct CurveChecks {
    continuity: bool,
    worst_excess: f64,
    coercive_tail: bool,
}

fn curve_checks(c: &EffectiveCurve, lipschitz: f64) -> CurveChecks {
    let r = c.check_continuity(lipschitz);
    CurveChecks { continuity: r.holds, worst_excess: r.worst_excess, coercive_tail: c.coercive_tail() }
}

/// Piece curves and the formula ladder for the checked family.
pub struct FormulaCurves {
    pub checks: Vec<EffectiveCurve>,
    pub hats: Vec<EffectiveCurve>,
    pub ladder: Vec<(Level, EffectiveCurve)>,
}

impl FormulaCurves {
    pub fn top(&self) -> &EffectiveCurve {
        &self.ladder.last().expect("non-empty ladder").1
    }
}

pub fn formula_curves(
    cfg: &ExperimentConfig,
    family: &MinMaxFamily,
    m: &MediumRealization,
    c: &ContactConstants,
    ps: &[Vec<f64>],
) -> CliResult<FormulaCurves> {
    let opts = cfg.estimate_options();
    let mut checks = Vec::with_capacity(family.len());
    let mut hats = Vec::with_capacity(family.len());
    for k in 1..=family.len() {
        checks.push(piece_effective(family.check(k), m, ps, Some(&opts))?);
        hats.push(piece_effective(family.hat(k), m, ps, Some(&opts))?);
    }
    let ladder = theorem_formula_ladder(&checks, &hats, c)?;
    Ok(FormulaCurves { checks, hats, ladder })
}

fn write_pieces(run: &mut RunDir, dim: usize, f: &FormulaCurves) -> CliResult<()> {
    run.write("pieces.csv", |w| {
        let mut head = vec![p_header(dim).to_string()];
        for k in 1..=f.checks.len() {
            head.extend([format!("check_{k}"), format!("check_{k}_err"), format!("hat_{k}"), format!("hat_{k}_err")]);
        }
        writeln!(w, "{}", head.join(","))?;
        for i in 0..f.checks[0].len() {
            let mut row = vec![p_cells(&f.checks[0].p_samples[i])];
            for (c, h) in f.checks.iter().zip(&f.hats) {
                row.extend([c.values[i], c.error_bars[i], h.values[i], h.error_bars[i]].map(|v| v.to_string()));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })
}

/// `effective`: piece curves, formula, direct estimate of the top level, and their comparison.
pub fn cmd_effective(cfg: &ExperimentConfig, out: &Path, force: bool) -> CliResult<PathBuf> {
    let mut run = RunDir::open(out)?;
    let mut manifest = RunManifest::new("effective", cfg);
    let checked = check_stage(cfg, &mut manifest)?;
    if let Err(e) = gate(&checked, force) {
        run.finish(&mut manifest)?;
        return Err(e);
    }
    let family = checked.family.as_ref().ok_or_else(|| CliError::Hypothesis { failures: checked.failures() })?;
    let m = &checked.medium;
    let dim = cfg.dim();
    let (_, ps) = cfg.p_samples();
    let top = family.top_level();
    let lip = family.lipschitz_bound(top, m);

    let formula = match &checked.constants {
        Some(c) => {
            info!("piece curves and formula on {} samples", ps.len());
            Some(manifest.time("formula", |_| formula_curves(cfg, family, m, c, &ps))?)
        }
        None => {
            log::warn!("no contact constants; the formula is skipped");
            None
        }
    };

    info!("direct estimate of H_{top} on {} samples", ps.len());
    let h = FamilyHamiltonian::new(family, top, m)?;
    let opts = cfg.estimate_options();
    let (numeric, estimates) = manifest.time("numeric", |_| estimate_curve(&h, &ps, &opts))?;
    run.write("numeric.csv", |w| numeric.write_csv(w))?;
    run.write("estimates.csv", |w| {
        writeln!(w, "{},value,error_bar,alpha,coefficient,uniform_sup,unreliable,iterations", p_header(dim))?;
        for e in &estimates {
            let iters: usize = e.raw.iter().map(|r| r.iterations).sum();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                p_cells(&e.p),
                e.value,
                e.error_bar,
                e.alpha,
                e.coefficient,
                e.uniform_sup,
                e.unreliable,
                iters
            )?;
        }
        Ok(())
    })?;
    manifest.record("numeric_checks", curve_checks(&numeric, lip));
    let unreliable: Vec<&[f64]> = estimates.iter().filter(|e| e.unreliable).map(|e| e.p.as_slice()).collect();
    manifest.record("unreliable_samples", &unreliable);

    if let Some(f) = &formula {
        let top_curve = f.top();
        write_pieces(&mut run, dim, f)?;
        run.write("formula.csv", |w| top_curve.write_csv(w))?;
        run.write("compare.csv", |w| {
            let levels: Vec<String> = f.ladder.iter().map(|(l, _)| format!("H_{l}")).collect();
            writeln!(w, "{},numeric,formula,abs_err,error_bar,{}", p_header(dim), levels.join(","))?;
            for i in 0..numeric.len() {
                let (a, b) = (numeric.values[i], top_curve.values[i]);
                let bar = numeric.error_bars[i] + top_curve.error_bars[i];
                let rungs: Vec<String> = f.ladder.iter().map(|(_, c)| c.values[i].to_string()).collect();
                writeln!(w, "{},{a},{b},{},{bar},{}", p_cells(&numeric.p_samples[i]), (a - b).abs(), rungs.join(","))?;
            }
            Ok(())
        })?;
        let diffs: Vec<f64> = numeric.values.iter().zip(&top_curve.values).map(|(a, b)| (a - b).abs()).collect();
        let (worst_i, worst) = diffs.iter().enumerate().fold((0, 0.0f64), |acc, (i, d)| if *d > acc.1 { (i, *d) } else { acc });
        manifest.record("max_abs_err", worst);
        manifest.record("max_abs_err_at", &numeric.p_samples[worst_i]);
        manifest.record("formula_checks", curve_checks(top_curve, lip));
        println!("max |numeric − formula| = {worst:.3e} at p = {:?}", numeric.p_samples[worst_i]);
    }
    print_verdicts(&manifest.verdicts);
    let path = run.finish(&mut manifest)?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsRow {
    pub eps: f64,
    pub error: f64,
    pub steps: usize,
    pub dt: f64,
}

fn sample_error(a: &Evolution, b: &Evolution, grid: &Grid, radius: f64) -> f64 {
    let nodes: Vec<usize> = (0..grid.len()).filter(|&i| grid.coord(i).abs() <= radius).collect();
    a.fields
        .iter()
        .zip(&b.fields)
        .map(|(u, v)| nodes.iter().map(|&i| (u.values[i] - v.values[i]).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// Sweep core: `e(ε)` for every ε against one homogenized solution.
pub fn sweep_errors(
    s: &SweepConfig,
    h: &dyn Hamiltonian,
    hbar: &dyn Hamiltonian,
) -> CliResult<(Vec<EpsRow>, Evolution)> {
    let grid = Grid::centered(1, s.n, s.length)?;
    let u0 = s.u0.field(&grid);
    let snapshots: Vec<f64> = (1..s.times).map(|j| s.t_final * j as f64 / s.times as f64).collect();
    // one dissipation for both problems so they share the numerical viscosity
    let params = TimeParams { theta: Some(h.lipschitz().max(hbar.lipschitz())), dt: None, cfl: s.cfl, snapshots };
    let homogenized = solve_homogenized(hbar, &u0, s.t_final, &params)?;
    let radius = 0.5 * s.interior * s.length;
    let rows: Vec<CliResult<EpsRow>> = s
        .eps
        .par_iter()
        .map(|&eps| {
            let ev = solve_time_dependent(h, &u0, eps, s.t_final, &params)?;
            Ok(EpsRow { eps, error: sample_error(&ev, &homogenized, &grid, radius), steps: ev.steps, dt: ev.dt })
        })
        .collect();
    Ok((rows.into_iter().collect::<CliResult<Vec<_>>>()?, homogenized))
}

/// `sweep-eps`: `e(ε) = max |u^ε − ū|` on an interior space-time sample set.
pub fn cmd_sweep_eps(cfg: &ExperimentConfig, out: &Path, force: bool) -> CliResult<PathBuf> {
    let s = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("sweep-eps needs a [sweep] section".into()))?;
    let mut run = RunDir::open(out)?;
    let mut manifest = RunManifest::new("sweep-eps", cfg);
    let checked = check_stage(cfg, &mut manifest)?;
    if let Err(e) = gate(&checked, force) {
        run.finish(&mut manifest)?;
        return Err(e);
    }
    let family = checked.family.as_ref().ok_or_else(|| CliError::Hypothesis { failures: checked.failures() })?;
    let m = &checked.medium;
    let top = family.top_level();
    let h = FamilyHamiltonian::new(family, top, m)?;
    let (_, ps) = cfg.p_samples();

    let (rows, source) = if family.is_x_independent() {
        // H̄ = H exactly
        manifest.time("sweep", |_| sweep_errors(s, &h, &h)).map(|r| (r.0, "exact"))?
    } else {
        let curve = match (s.effective, &checked.constants) {
            (CurveSource::Formula, Some(c)) => {
                manifest.time("formula", |_| formula_curves(cfg, family, m, c, &ps))?.top().clone()
            }
            (CurveSource::Formula, None) => {
                return Err(CliError::Hypothesis { failures: vec!["formula needs contact constants".into()] })
            }
            (CurveSource::Numeric, _) => {
                let opts = cfg.estimate_options();
                manifest.time("numeric", |_| estimate_curve(&h, &ps, &opts))?.0
            }
        };
        run.write("heff.csv", |w| curve.write_csv(w))?;
        let hbar = CurveInterpolant::new(&curve)?;
        let label = match curve.provenance {
            Provenance::Formula => "formula",
            _ => "numeric",
        };
        manifest.time("sweep", |_| sweep_errors(s, &h, &hbar)).map(|r| (r.0, label))?
    };
    run.write("err_vs_eps.csv", |w| {
        writeln!(w, "eps,error,ratio,steps,dt")?;
        for (i, r) in rows.iter().enumerate() {
            let ratio = if i == 0 { String::new() } else { (r.error / rows[i - 1].error).to_string() };
            writeln!(w, "{},{},{},{},{}", r.eps, r.error, ratio, r.steps, r.dt)?;
        }
        Ok(())
    })?;
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[1] / w[0]).collect();
    manifest.record("effective_source", source);
    manifest.record("errors", &errors);
    manifest.record("ratios", &ratios);
    manifest.record("nonincreasing", errors.windows(2).all(|w| w[1] <= w[0]));
    manifest.record("strictly_decreasing", errors.windows(2).all(|w| w[1] < w[0]));
    for r in &rows {
        println!("eps = {:<10} e = {:.6e}", r.eps, r.error);
    }
    run.finish(&mut manifest)
}

fn read_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(|c| c.parse::<f64>().unwrap_or(f64::NAN)).collect());
    }
    Ok((headers, rows))
}

fn column(headers: &[String], name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn num(v: f64) -> String {
    format!("{v:>22.14e}")
}

/// `plotdata`: aligned-column `.dat` files from a finished run directory.
pub fn cmd_plotdata(run_dir: &Path, out: &Path) -> CliResult<Vec<PathBuf>> {
    if !run_dir.is_dir() {
        return Err(CliError::MissingInput(run_dir.to_path_buf()));
    }
    let compare = run_dir.join("compare.csv");
    let numeric = run_dir.join("numeric.csv");
    let sweep = run_dir.join("err_vs_eps.csv");
    if !compare.exists() && !numeric.exists() && !sweep.exists() {
        return Err(CliError::MissingInput(compare));
    }
    let mut run = RunDir::open(out)?;
    let mut written = Vec::new();

    let curve_src = if compare.exists() { Some(&compare) } else if numeric.exists() { Some(&numeric) } else { None };
    if let Some(src) = curve_src {
        let (headers, rows) = read_table(src)?;
        if column(&headers, "p").is_none() {
            return Err(CliError::Config(format!("{}: plot data needs a one-dimensional p column", src.display())));
        }
        let value_cols: Vec<(String, usize)> = ["numeric", "value", "formula"]
            .iter()
            .filter_map(|n| column(&headers, n).map(|i| (n.to_string(), i)))
            .collect();
        run.write("curves.dat", |w| {
            let names: Vec<&str> = value_cols.iter().map(|(n, _)| n.as_str()).collect();
            writeln!(w, "# p {}", names.join(" "))?;
            for r in &rows {
                let cells: Vec<String> = value_cols.iter().map(|(_, i)| num(r[*i])).collect();
                writeln!(w, "{} {}", num(r[0]), cells.join(" "))?;
            }
            Ok(())
        })?;
        written.push(out.join("curves.dat"));
        if let Some(fi) = column(&headers, "formula") {
            let floor = rows.iter().map(|r| r[fi]).fold(f64::INFINITY, f64::min);
            let flat: Vec<&Vec<f64>> = rows.iter().filter(|r| (r[fi] - floor).abs() <= 1e-9 * (1.0 + floor.abs())).collect();
            run.write("plateau.dat", |w| {
                writeln!(w, "# p formula (samples on the flat piece at {floor})")?;
                for r in &flat {
                    writeln!(w, "{} {}", num(r[0]), num(r[fi]))?;
                }
                Ok(())
            })?;
            written.push(out.join("plateau.dat"));
        }
    }
    if sweep.exists() {
        let (headers, rows) = read_table(&sweep)?;
        let (ei, ri) = match (column(&headers, "eps"), column(&headers, "error")) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(CliError::Config(format!("{}: needs eps and error columns", sweep.display()))),
        };
        run.write("err_vs_eps.dat", |w| {
            writeln!(w, "# log10_eps log10_error eps error")?;
            for r in &rows {
                writeln!(w, "{} {} {} {}", num(r[ei].log10()), num(r[ri].log10()), num(r[ei]), num(r[ri]))?;
            }
            Ok(())
        })?;
        written.push(out.join("err_vs_eps.dat"));
    }
    Ok(written)
}
