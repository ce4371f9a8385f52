use thiserror::Error;

/// Failed configuration validation. Collects every violated invariant so a
/// bad config file is reported in one pass instead of one error at a time.
#[derive(Debug, Clone, Error)]
#[error("invalid configuration: {}", violations.join("; "))]
pub struct ConfigError {
    pub violations: Vec<String>,
}

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),

    /// A Hermitian factorization hit a non-positive pivot.
    #[error("matrix not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    /// The training covariance is numerically singular.
    #[error("training covariance ill-conditioned (cond ≈ {cond:.3e}, guard 1e12)")]
    IllConditioned { cond: f64 },

    /// The stacked estimate matrix lost full column rank. Probability-zero
    /// for continuous inputs; never silently regularized.
    #[error("channel estimate matrix rank deficient at column {col}")]
    RankDeficient { col: usize },

    #[error("zero-norm channel estimate for terminal {k}")]
    ZeroNormEstimate { k: usize },

    /// phi = 1 leaves no power for artificial noise, so the eavesdropper
    /// capacity is unbounded and the secrecy rate collapses to zero.
    #[error("no artificial noise power (phi = 1): eavesdropper capacity unbounded")]
    NoArtificialNoise,

    /// The closed-form eavesdropper bound needs more null-space dimensions
    /// than eavesdropper antennas.
    #[error("eavesdropper bound undefined: L = {l} <= N_E = {n_e}; secrecy cannot be guaranteed")]
    EveBoundUndefined { l: usize, n_e: usize },

    #[error("non-positive SINR denominator ({value:.6e}); parameter bug upstream")]
    NonPositiveDenominator { value: f64 },

    #[error("empty search grid")]
    EmptyGrid,

    /// Monte Carlo moment estimates missing for a requested (terminal, slot).
    #[error("no moment estimates for terminal {k} at slot {t}")]
    MissingMoments { k: usize, t: usize },
}
