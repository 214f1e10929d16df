//! Haar-measure group averaging of grid functions on symmetric domains, and
//! the machinery for producing symmetric minimizers of convex discrete
//! energies.
//!
//! The pieces fit together as follows:
//!
//! - [`group`] builds finite subgroups of O(1) and O(2) with their uniform
//!   Haar weights. Continuous SO(2) is represented by its cyclic quadrature
//!   C_N, which is itself a group, so every average over it is exact for C_N
//!   and converges to the SO(2) average as N grows.
//! - [`field`] holds masked uniform grids, zero-trace grid functions and the
//!   pullback action `(g·u)(x) = u(g x)`.
//! - [`energy`] evaluates the discrete p-Dirichlet and polyharmonic energies
//!   with concave lower-order terms, and their exact discrete gradients.
//! - [`average`] implements the G-average `u_G = Σ_g w_g (g·u)` and the
//!   inequalities that make `u_G` a minimizer whenever `u` is one.
//! - [`solve`] minimizes the energies and runs the symmetrize-then-polish
//!   workflow.
//! - [`probes`] gathers numerical evidence on the strong mean-value property,
//!   the failure of minors to commute with averaging, and the Lipschitz
//!   continuity of the action.

pub mod average;
pub mod energy;
mod error;
pub mod field;
pub mod group;
pub mod probes;
pub mod solve;
mod sum;

pub use average::{
    check_average_invariance, g_average, hull_norm_bound, invariance_residual, jensen_gap,
    orbit_of, subgradient_gap, AverageReport,
};
pub use energy::{ConcaveNonlinearity, EnergyFunctional, EnergyKind};
pub use error::{Error, Result};
pub use field::{
    check_domain_invariance, make_grid, pullback, random_field, sobolev_norm, Domain, DomainCheck,
    Grid, GridFunction, PullbackPlan, SobolevOrder,
};
pub use group::{
    group_distance, make_cyclic, make_dihedral, make_reflection_1d, make_so2_quadrature,
    verify_group, GroupElement, GroupKind, GroupViolation, SymmetryGroup,
};
pub use probes::{
    action_continuity_probe, adjugate, average_commutator_gap, mean_value_probe, polyconvexity_gap,
    tau, ContinuityEstimate, MatrixField, MeanValueProbe, ProbeReport,
};
pub use solve::{
    direct_poisson_solve, minimize, symmetrize_and_polish, MinimizeOptions, MinimizeResult,
    SymmetrizeOutcome,
};
