//! Numerical toolkit for a planar two-well elastic inclusion energy.
//!
//! The energy of a phase indicator `chi` and a deformation `v` is
//!
//! ```text
//! E[chi, v] = ∫ |∇chi| + ∫ (1 − chi)·dist²(∇v, SO(2)) + chi·dist²(∇v, SO(2)F)
//! ```
//!
//! with a volume-preserving stretch `F` (det F = 1). The crate provides the
//! exact 2x2 matrix kernels behind the integrand, discrete fields on uniform
//! grids, the explicit lens-shaped inclusion that realizes the `μ^(2/3)`
//! upper-bound scaling at large inclusion volume `μ`, a gradient-descent
//! relaxer for the deformation, rigidity diagnostics (good-rhombus search,
//! bad-set measure, local lower-bound ratios, greedy ball covers), and a
//! sweep harness that fits the two-regime `μ^(1/2)` / `μ^(2/3)` ground-state
//! scaling.

pub mod construction;
pub mod dump;
pub mod error;
pub mod field;
pub mod mat2;
pub mod minimize;
pub mod rigidity;

pub use error::{Error, Result};
pub use mat2::{
    closest_rotation, dist_so2, dist_well, inverse_distance_ratio, polar_decompose,
    project_onto_well, rank_one_decompose, shear_normal_form, Mat2, Vec2, WellPair,
};

pub use construction::{
    admissibility_report, build_configuration, build_configuration_with_rlen, solve_lens,
    AdmissibilityReport, Configuration, CutoffProfile, InclusionGeometry, LensConstruction,
};
pub use field::{
    bilip_constant, elastic_density, elastic_energy_ball, pushforward_chi, segment_energy,
    total_energy, EnergyBreakdown, GridSpec, ScalarField, VectorField,
};
pub use minimize::{
    elastic_gradient, fit_log_log, relax, scaling_sweep, FitLine, GridPolicy, RelaxConfig,
    RelaxResult, ScalingFit, SweepPoint,
};
pub use rigidity::{
    bad_set_measure, covering_radius, find_good_rhombus, good_horizontal_lines, lens_probe_ball,
    lower_bound_ratio, vitali_cover, Ball, CoveringReport, CoveringRegime, Region, RhombusReport,
};
