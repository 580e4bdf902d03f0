use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // geometry
    #[error("profile is not positive at s = {s} (a = {a})")]
    PositivityViolated { s: f64, a: f64 },
    #[error("Robin coefficients are degenerate: ({0}, {1})")]
    RobinDegenerate(f64, f64),
    #[error("Robin coefficients have opposite signs: ({0}, {1})")]
    RobinSign(f64, f64),
    #[error("profile violates the reflection symmetry a(s) = a(s* - s) at s = {s} (defect {defect:e})")]
    ReflectionAsymmetric { s: f64, defect: f64 },
    #[error("invalid surface profile: {0}")]
    InvalidProfile(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),

    // integration / root finding
    #[error("integration step failure at s = {s}: {reason}")]
    StepFailure { s: f64, reason: String },
    #[error("trajectory escaped |u| > {bound} at s = {s}")]
    Escape { s: f64, bound: f64 },
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("eigenvalue within {gap:e} of zero (nearest {nearest:e}); profile not certified")]
    ZeroEigenvalueSuspected { gap: f64, nearest: f64 },
    #[error("root count unstable under grid refinement ({coarse} vs {fine})")]
    ScanInconclusive { coarse: usize, fine: usize },
    #[error("shooting curve tangent to the boundary line (margin {margin:e})")]
    TangencySuspected { margin: f64 },
    #[error("monotonicity violated between d = {d1} and d = {d2}: {what}")]
    MonotonicityViolation { d1: f64, d2: f64, what: String },

    // equilibria / attractor
    #[error("expected {expected} positive roots at lambda = {lambda}, found {found}")]
    CountMismatch { lambda: f64, expected: usize, found: usize },
    #[error("index identity violated: {0}")]
    IndexMismatch(String),
    #[error("lambda = {lambda} lies within {gap:e} of the bifurcation point {lambda_k}")]
    NearBifurcation { lambda: f64, lambda_k: f64, gap: f64 },
    #[error("sign change below the noise floor cannot be resolved near s = {s}")]
    UnresolvedZero { s: f64 },
    #[error("branch matching failed: {0}")]
    BranchDiscontinuity(String),
    #[error("edge rules disagree: {0}")]
    RuleDisagreement(String),

    // spiral
    #[error("Newton iteration diverged: {0}")]
    NewtonDiverged(String),
    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),
    #[error("kernel dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("continuation stalled at (eta, beta) = ({eta}, {beta})")]
    ContinuationStalled { eta: f64, beta: f64 },

    // evolve
    #[error("omega-limit not matched (nearest distance {distance:e})")]
    Unmatched { distance: f64 },
    #[error("realized edges disagree with the predicted graph: {0}")]
    EdgeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Failures that contradict the proven structure (equilibrium counts,
    /// index identities, kernel dimensions, connection graph) rather than
    /// signalling a numerical or configuration problem.
    pub fn is_theorem_contradiction(&self) -> bool {
        matches!(
            self,
            Error::CountMismatch { .. }
                | Error::IndexMismatch(_)
                | Error::EdgeMismatch(_)
                | Error::DimensionMismatch { .. }
                | Error::RuleDisagreement(_)
        )
    }
}
