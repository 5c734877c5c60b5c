//! Effective Hamiltonians: numerical estimates from the discounted problem, the exact
//! 1D separable construction, the nested min-max formula, and duality and plateau checks.

mod checks;
mod curve;
mod estimate;
mod formula;
mod oracle;

pub use checks::{plateau_check, verify_symmetries, KappaLevelSets, PlateauOptions, PlateauReport, SymmetryReport, SymmetryRow};
pub use curve::{ContinuityReport, CurveInterpolant, EffectiveCurve, Provenance};
pub use estimate::{estimate_curve, estimate_effective, fit_power_law, EffectiveEstimate, EstimateOptions, PowerFit, RawEstimate};
pub use formula::{theorem_formula, theorem_formula_ladder};
pub use oracle::{exact_effective_1d_separable, piece_effective, separable_parts, SeparableParts, POTENTIAL_SAMPLES};
