//! Central numeric tolerances.
//!
//! Everything that compares against "zero" goes through one of these so the
//! bands are auditable in one place. Tolerances are relative: callers scale
//! them by the geometry's diameter (`scale`) or the parameter span as noted.

/// Samples used by the dense root scan of the equilibrium condition.
pub const EQ_SCAN_SAMPLES: usize = 4096;

/// Relative parameter tolerance for root bisection (times parameter span).
pub const EQ_PARAM_REL: f64 = 1e-12;

/// Dimensionless threshold below which 1 + kappa*rho counts as degenerate.
pub const DEGENERACY_BAND: f64 = 1e-7;

/// Relative threshold for derivative-magnitude tests in degeneracy order
/// estimation (dimensionless after normalization by scale and span).
pub const ORDER_DERIV_BAND: f64 = 1e-7;

/// Inner-product tie band for edge/vertex equilibrium tests
/// (times scale^2). Hits inside the band raise a nongeneric signal.
pub const EDGE_TIE_BAND: f64 = 1e-12;

/// Distance band for "on the evolute" in side classification (times scale).
pub const EVOLUTE_ON_CURVE: f64 = 1e-9;

/// Absolute parameter distance below which a crossing counts as at a cusp.
pub const CUSP_PARAM_DIST: f64 = 1e-4;

/// Scan density for counts during crossing detection. The count flips where
/// the root pair drops below one scan cell, so the detected jump sits within
/// half a cell of the true tangency; half of span/65536 stays well inside
/// CUSP_PARAM_DIST even after the square-root amplification near a cusp.
pub const EVENT_SCAN_SAMPLES: usize = 65536;

/// Minimum parabola residual (times scale) for a trusted side verdict near a
/// detected crossing. Below this the query may still sit inside the shell of
/// crossing-localization error, so the standoff keeps widening.
pub const SIDE_MIN_RESID: f64 = 1e-6;

/// Relative tolerance for crossing-time bisection (times sweep duration).
pub const EVENT_TIME_REL: f64 = 1e-9;

/// Equal-arc-length spacing tolerance after flow reparametrization
/// (times perimeter).
pub const FLOW_SPACING: f64 = 1e-9;

/// Feature-boundary band for mesh equilibrium tests (times scale).
pub const MESH_FEATURE_BAND: f64 = 1e-10;

/// Convexity slack for mesh validation (times scale).
pub const MESH_CONVEXITY: f64 = 1e-9;

/// Proxy cap for 1/|1 + rho*kappa| sums; capped samples leave the fit.
pub const RATE_PROXY_CAP: f64 = 1e9;
