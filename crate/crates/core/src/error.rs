//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("base points differ beyond tolerance: {0}")]
    BaseMismatch(f64),
    #[error("element is not hyperbolic (|trace| = {0} < 2)")]
    NotHyperbolic(f64),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("relator does not evaluate to +-identity (max entry deviation {0})")]
    BadRelator(f64),
    #[error("generator {0} is not hyperbolic")]
    NonHyperbolicGenerator(usize),
    #[error("enumeration cap exceeded: requested {requested}, cap {cap}")]
    CapExceeded { requested: f64, cap: f64 },
    #[error("arc {index} too short: {len} < {min}")]
    ShortArc { index: usize, len: f64, min: f64 },
    #[error("bend {index} too wide: {bend} > {max}")]
    WideBend { index: usize, bend: f64, max: f64 },
    #[error("bend {index} not a right angle: deviation {dev} > {max}")]
    NotRightAngle { index: usize, dev: f64, max: f64 },
    #[error("chord endpoints coincide")]
    DegenerateChord,
    #[error("tail too short for Lemma 3.6: l(beta) = {lbeta} < I + 1 = {need}")]
    TooShortTail { lbeta: f64, need: f64 },
    #[error("narrow length band empty: 2R - L(eps^2) = {hi} < L(eps^2) = {lo}")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("need at least {0} samples with positive counts")]
    InsufficientData(usize),
    #[error("arcs do not form a theta-graph (cyclic orders not opposite)")]
    NotTheta,
    #[error("arc does not meet the curve orthogonally (deviation {0})")]
    NotOrthogonal(f64),
    #[error("arc leaves or arrives on the wrong side")]
    WrongSide,
    #[error("curve is not a cuff of the pants")]
    NotACuff,
    #[error("formal sum has a negative coefficient at {0}")]
    NegativeCoefficient(String),
    #[error("weight kind does not match object")]
    KindMismatch,
    #[error("total masses differ: {0} vs {1}")]
    MassMismatch(String, String),
    #[error("random element domain is empty")]
    EmptyDomain,
    #[error("complementary connection set F(A) is empty: {0}")]
    EmptyComplement(String),
    #[error("auxiliary connection set empty: {0}")]
    EmptyAuxiliary(String),
    #[error("interpolant connection set empty at step {0}")]
    EmptyInterpolant(usize),
    #[error("not a narrow triangle: {0}")]
    NotNarrow(String),
    #[error("connection set empty: {0}")]
    EmptyConnection(String),
    #[error("narrow triangles have the same orientation")]
    OrientationClash,
    #[error("replacement auxiliary set F_{0} empty")]
    EmptyF(usize),
    #[error("stretch of the identity element is undefined")]
    IdentityElement,
    #[error("inefficiency not saturated: increase {0} at l = {1}")]
    NotSaturated(f64, f64),
    #[error("pair is not an (eps,R,v)-bounded triangle: {0}")]
    NotBoundedTriangle(String),
    #[error("element too long for group dichotomy: l = {0} > 1.25R = {1}")]
    TooLong(f64, f64),
    #[error("mid-arc connection set L_A empty")]
    EmptyMidArc,
    #[error("Phi undefined on curve {0}")]
    PhiUndefined(String),
    #[error("multi-pants not evenly distributed")]
    NotEven,
    #[error("pairing on cuff {cuff} exceeded tolerance: deviation {dev} > {tol}")]
    PairingFailed { cuff: String, dev: f64, tol: f64 },
    #[error("cannot cancel boundary within budget: {0}")]
    CannotCancel(String),
    #[error("bad surface config: {0}")]
    BadConfig(String),
    #[error("exact identity failed: {0}")]
    IdentityFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Machine readable exit code class: 2 identity failure, 3 cap exceeded,
    /// 4 precondition failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IdentityFailed(_) => 2,
            Error::CapExceeded { .. } => 3,
            _ => 4,
        }
    }
}
