//! Default numerical tolerances.
//!
//! Every routine takes its tolerances as explicit parameters; these constants
//! are only the defaults wired into the config structs and the CLI.

/// Skew-symmetry check for Lie-algebra generators (max-entry metric).
pub const SKEW_TOL: f64 = 1e-10;

/// Orthogonality check for group generators and coset representatives.
pub const ORTHO_TOL: f64 = 1e-8;

/// Two group elements (or orbit points) are identified below this
/// max-entry distance.
pub const DEDUP_TOL: f64 = 1e-8;

/// Element cap for breadth-first finite closure.
pub const CLOSURE_CAP: usize = 20_000;

/// Element cap for grid samples of Lie groups (before coset products).
pub const LIE_SAMPLE_CAP: usize = 1_000_000;

/// Relative singular-value cutoff for numerical spans.
pub const SIGMA_THRESHOLD: f64 = 1e-8;

/// Step-size tolerance of the sphere solvers.
pub const SOLVER_TOL: f64 = 1e-8;

/// Iteration cap per local solve.
pub const MAX_ITER: usize = 10_000;

/// Unit-vector check for base vectors.
pub const UNIT_TOL: f64 = 1e-9;

/// Tangency check for directional derivatives.
pub const TANGENT_TOL: f64 = 1e-8;

/// Commutation check used to pick the torus grid.
pub const COMMUTE_TOL: f64 = 1e-10;

/// Default seed.
pub const DEFAULT_SEED: u64 = 42;

/// Default active-set band: `10 * (solver_tol + covering_resolution)`.
pub fn default_eps_active(solver_tol: f64, covering_resolution: f64) -> f64 {
    10.0 * (solver_tol + covering_resolution)
}

/// Margin of the sqrt(2) irreducibility verdict.
pub fn reducibility_margin(covering_resolution: f64) -> f64 {
    f64::max(0.05, 3.0 * covering_resolution)
}
