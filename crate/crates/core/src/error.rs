use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension {0} unsupported; expected 1..=3")]
    Dimension(usize),

    #[error("resolution {got} too small for a {kind} base; need at least {min}")]
    Resolution {
        kind: &'static str,
        got: usize,
        min: usize,
    },

    #[error("sectional curvature must be positive, got {0}")]
    Curvature(f64),

    #[error("derivative order {0} unsupported; expected 1..=5")]
    JetOrder(usize),

    #[error("halo data is stale; transfer before differentiating")]
    StaleHalo,

    #[error("chart {chart} halo node at radius {radius} maps outside donor data")]
    CoverageGap { chart: usize, radius: f64 },

    #[error("halo transfer dependencies fail to resolve within {0} passes")]
    TransferDepth(usize),

    #[error("eigenvalue magnitude {0} exceeds the arctan branch guard; use the eigenvalue method")]
    BranchGuard(f64),

    #[error("monitor requires a jet of order {need}, have order {have}")]
    MissingJetOrder { need: usize, have: usize },

    #[error("unitarity check failed: normalized determinant magnitude deviates by {0:e}")]
    Unitarity(f64),

    #[error("mode descriptor does not name an eigenfunction: {0}")]
    NotAnEigenmode(String),

    #[error("amplitude {0} outside the linearized regime (|amplitude| <= 1e-2)")]
    AmplitudeTooLarge(f64),

    #[error("harmonic degree {0} unsupported; analytic jets cover degrees 0..=2")]
    HarmonicDegree(u32),

    #[error("flow aborted at t = {t}: non-finite field after {retries} step-size halvings")]
    NonFiniteEvolution { t: f64, retries: u32 },

    #[error("invalid parameter: {0}")]
    FlowParameter(String),

    #[error("oracle case line {line}: {msg}")]
    CaseParse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
