use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rotation number {0} is outside (0, 1)")]
    ThetaOutOfRange(f64),
    #[error("rational input detected: theta = {p}/{q}")]
    RationalInput { p: u64, q: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("orbit hit a critical point at step {step}")]
    SingularOrbit { step: u64 },
    #[error("normalization constant {0} is degenerate")]
    DegenerateNormalization(f64),
    #[error("lift is discontinuous near x = {0}")]
    Discontinuity(f64),
    #[error("mode-locking plateau at rho = {p}/{q} (omega in [{lo}, {hi}])")]
    ModeLocking { p: u64, q: u64, lo: f64, hi: f64 },
    #[error("tuning did not converge after {steps} bisection steps")]
    TuningStalled { steps: u32 },
    #[error("level {level} not certified (closest returns available through {available})")]
    NotCertified { level: usize, available: usize },
    #[error("combinatorial mismatch at level {level}: {detail}")]
    CombinatorialMismatch { level: usize, detail: String },
    #[error("level {level} is below the power-law level {min}")]
    LevelTooSmall { level: usize, min: usize },
    #[error("tail bound unbounded: fitted decay rate {0} >= 1")]
    TailUnbounded(f64),
    #[error("operation requires a unicritical map, got {0} critical points")]
    UnicriticalOnly(usize),
    #[error("no grid point satisfies the avoidance hypothesis at level {level}; refine the grid")]
    EmptyAvoidanceGrid { level: usize },
    #[error("compensated and pairwise sums disagree by {0:e}")]
    SummationMismatch(f64),
    #[error("map is not renormalizable with period <= {0}")]
    NotRenormalizable(u32),
    #[error("orbit of {x} left the level-{level} cylinders")]
    OrbitEscape { x: f64, level: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
