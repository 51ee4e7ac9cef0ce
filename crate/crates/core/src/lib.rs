//! Numerical engine for N-player finite-fuel singular-control games.
//!
//! Players drag their positions toward the moving center of the crowd, each
//! paying a discounted running cost of her centered position plus nothing for
//! waiting: control is singular (bounded variation) and burns a finite fuel
//! budget shared through a resource-access network. The equilibrium has a
//! threshold structure. A single free boundary `f` (per player count,
//! discount, and cost) separates waiting from acting; its argument is the
//! fuel a player can still reach, so the boundary moves as fuel burns.
//!
//! The crate is organized around that structure:
//!
//! * [`model`] — game specification, joint state, allocation weights, and the
//!   waiting/action classifier.
//! * [`boundary`] — the discounted moment function `p`, the intercept `x0`,
//!   the tabulated boundary `f` with its inverse, and the smooth-fit
//!   coefficient `A`.
//! * [`value`] — equilibrium values, jump-root equations, quasi-variational
//!   residual audits, and the pooling/sharing/dividing comparison.
//! * [`dynamics`] — polyhedral geometry of the waiting region, the push-based
//!   reflection stepper, jump cascades, path simulation, and the explicit
//!   two-player map.
//! * [`montecarlo`] — cost estimation along simulated paths, deviation tests,
//!   and mergeable summary statistics.

pub mod boundary;
pub mod cost;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod value;

pub use boundary::{find_x0, p_eval, solve_f_table, BoundarySolution, PEvaluator};
pub use cost::CostFunction;
pub use dynamics::{
    build_geometry, check_reflection_compatibility, jump_cascade, rank_diagnostic, reflect_step,
    simulate_path, two_player_explicit, GeometryModel, NoisePath, PathRecord, SchemeParams,
};
pub use error::{Error, Result};
pub use model::{
    allocation_weights, classify_region, relative_positions, total_accessible, GameSpec,
    JointState, RegionLabel, Side, Variant,
};
pub use montecarlo::{
    deviation_test, estimate_value, summary_stats, DeviationRow, EstimateReport, Perturbation,
    RunningStats,
};
pub use value::{
    compare_games, jump_root_minus, jump_root_plus, qvi_residuals, value_game, ComparisonRow,
    JumpEvent, QviReport, ValueQuery,
};
