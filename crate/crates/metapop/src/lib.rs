//! SEIR-type metapopulation models on degree-structured networks.
//!
//! The crate covers the full analysis pipeline for reaction-diffusion
//! epidemic models whose patches are classified by connectivity: degree
//! distributions and mixing kernels ([`network`]), right-hand sides and
//! aggregation identities ([`dynamics`]), next-generation-matrix
//! reproduction numbers with closed-form coefficient chains and stability
//! certificates ([`ngm`]), endemic-equilibrium fixed points for the
//! mass-action model ([`endemic`]), adaptive time integration ([`sim`]),
//! and parameter sweeps ([`sweep`]). The structured linear algebra the
//! analysis rests on (Schur-complement block inversion, low-rank update
//! inverses, spectral-radius reductions and bounds) lives in [`linalg`].

pub mod dynamics;
mod eig;
pub mod endemic;
pub mod error;
pub mod linalg;
pub mod network;
pub mod ngm;
pub mod sim;
pub mod sweep;
mod util;

pub use dynamics::{
    aggregate, check_invariant_region, Aggregates, IncidenceKind, MetapopState, Params,
};
pub use endemic::{
    h_function, h_limit_zero, multi_start_scan, p_inverse, solve_endemic, EndemicSolution,
    SolveOutcome,
};
pub use error::{Error, Result};
pub use network::{
    build_truncated_power_law, calibrate_power_law, connectivity_matrix, validate_consistency,
    DegreeDistribution, MixingKernel, NetworkSpec,
};
pub use ngm::{
    assemble_fv, dfe, dfe_jacobian_stability, instability_certificates, ngm_coefficients,
    r0_bounds_mass, r0_closed_form_freq, r0_dual_path_freq, r0_mass_structured, r0_numeric,
    NgmCoefficients, R0Method, R0Report,
};
pub use sim::{integrate, prevalence_by_degree, steady_state, IntegrationControls, RhsKind, Trajectory};
pub use sweep::{sweep_migration, sweep_r0_phase, AxisSpec, PhaseParameter, SweepSpec};
