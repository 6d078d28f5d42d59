//! Central tolerance and calibration constants.
//!
//! Every numeric threshold used across the crate lives here so there is a
//! single tuning point. Identity checks on formal sums are exact and use none
//! of these; the constants below only govern floating-point geometry.

/// Tolerance for matrix and point identities (determinant, relator check,
/// composition associativity, recomputed twists).
pub const EPS_MAT: f64 = 1e-9;

/// Tolerance for orthogonality and incidence checks on enumerated
/// orthogeodesics, and for cuff-length vs `h_func` cross-checks.
pub const EPS_ORTHO: f64 = 1e-6;

/// Quantization grid for floating keys (matrix entries, arc endpoints,
/// foot positions). Accumulated round-off is orders of magnitude below this.
pub const QUANT: f64 = 1e-6;

/// Entries smaller than this are treated as zero when fixing the projective
/// sign of a Moebius transform.
pub const SIGN_EPS: f64 = 1e-6;

/// Hard cap on enumeration displacement / connection length.
pub const HARD_CAP: f64 = 14.0;

/// Extra displacement allowed during pruned breadth-first enumeration before
/// the final post-filter. Validated against the unpruned oracle in tests.
pub const BFS_SLACK: f64 = 2.0;

/// Minimal arc length for the Chain Lemma (the paper's universal Q).
pub const CHAIN_Q: f64 = 4.0;

/// Chain Lemma residual constant: |exact - sum| <= C_CHAIN * n * delta.
pub const C_CHAIN: f64 = 10.0;

/// Minimal arc length accepted by the right-angle chain estimate. The
/// residual tolerance scales as e^-L with the measured minimum, so shorter
/// arcs simply face a looser prediction; length-5 arcs must be admissible.
pub const RA_MIN_LEN: f64 = 4.0;

/// Right Angle Chain residual constant: |exact - predicted| <= C_RA * n * e^-L.
pub const C_RA: f64 = 20.0;

/// Terminal angle constant of Lemma 3.6: angle <= C_ANG * e^(I - l(beta)).
pub const C_ANG: f64 = 10.0;

/// Three-arc inefficiency bound D1 (empirical; see calibration test which
/// maximizes I over a bend/length grid and checks a 2x safety factor).
pub const D1: f64 = 4.0;

/// Small-narrow-triangle side bound: sides <= C_SMALL * L(eps^3).
pub const C_SMALL: f64 = 3.0;

/// Sampling step for projection-excursion measurements.
pub const EXCURSION_STEP: f64 = 0.01;

/// Default interpolation count override for the Exchange Lemma at desk scale.
pub const N_DESK: usize = 2;

/// Saturation length for I_v evaluation; I at l and l+1 must agree to
/// `EPS_SATURATION` or the computation reports NotSaturated.
pub const SATURATION_L: f64 = 18.0;
pub const EPS_SATURATION: f64 = 1e-6;

/// Maximum widening retries when a connection set needed by a construction
/// comes back empty at desk scale (relaxed mode only). Each retry doubles the
/// length window and multiplies the angle window by 3/2 (capped at 1.2 rad).
pub const RELAX_RETRIES: u32 = 4;
pub const RELAX_ANGLE_CAP: f64 = 1.2;
