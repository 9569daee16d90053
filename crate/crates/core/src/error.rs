use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tail exponent alpha = {0} outside (0, 1]")]
    AlphaOutOfRange(f64),

    #[error("interior fixed point gluing is infeasible on branch {branch} (relative residual {residual:.3e})")]
    InfeasibleGluing { branch: usize, residual: f64 },

    #[error("reparametrization glue is not monotone near x = {at}")]
    NonMonotoneGlue { at: f64 },

    #[error("the branch has a fixed point near x = {at} besides its neutral endpoint")]
    ExtraFixedPoint { at: f64 },

    #[error("one-sided tail exponents differ: alpha_+ = {plus}, alpha_- = {minus}")]
    AlphaMismatch { plus: f64, minus: f64 },

    #[error("point {x} lies outside the phase interval [{lo}, {hi}]")]
    OutsidePhaseInterval { x: f64, lo: f64, hi: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("could not locate the period-2 orbit: {reason}")]
    Period2 { reason: String },

    #[error("point {x} is not in the inducing set")]
    NotInInducingSet { x: f64 },

    #[error("orbit did not return within {cap} steps (stagnated: {stagnated})")]
    IterationCap { cap: u64, stagnated: bool },

    #[error("insufficient depth: need {needed}, have {have}")]
    InsufficientDepth { needed: usize, have: usize },

    #[error("branch-sum truncation discards {mass:.3e} of the mass (limit {limit:.1e}); increase the depth")]
    TailMassTooLarge { mass: f64, limit: f64 },

    #[error("g_j(xi_k) = {x} is outside the inducing set")]
    MalformedInducingSet { x: f64 },

    #[error("plateau not reached: residual slope {slope:.4} over the fit window")]
    PlateauNotReached { slope: f64 },

    #[error("ensemble too small: relative standard error {rel_se:.3} at n = {n}")]
    EnsembleTooSmall { rel_se: f64, n: u64 },

    #[error("observable is discontinuous at the fixed point {xi}")]
    DiscontinuousObservable { xi: f64 },

    #[error("neighbourhoods of radius {eps} around the fixed points overlap")]
    OverlappingNeighbourhoods { eps: f64 },

    #[error("{flagged} of {total} orbits raised the float-stagnation flag")]
    TooManyFlagged { flagged: usize, total: usize },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("fit failed: {0}")]
    Fit(String),
}
