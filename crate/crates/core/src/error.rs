use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate dressed spectrum: eigenvalues {0} and {1} GHz coincide")]
    DegenerateSpectrum(f64, f64),

    #[error("steady state is not unique (second-smallest singular value {0:.3e} relative)")]
    NonUniqueSteadyState(f64),

    #[error("Liouvillian is unstable: eigenvalue with Re = {0:.3e} rad/ns")]
    UnstableLiouvillian(f64),

    #[error("frame error: {0}")]
    Frame(String),

    #[error("fit did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("double-peak fit collapsed: centers {0} and {1} GHz are closer than 0.1 fwhm")]
    DegeneratePeaks(f64, f64),

    #[error("fitted decay time {0} is not positive")]
    NonDecaying(f64),

    #[error("peak assignment is ambiguous: {0}")]
    AmbiguousAssignment(String),

    #[error("spontaneous peak vanishes into the noise: area {area:.3e} < 3 x stderr {stderr:.3e}")]
    VanishingSpontaneous { area: f64, stderr: f64 },

    #[error("fit is ill-conditioned: covariance condition number {0:.3e}")]
    IllConditioned(f64),

    #[error("ODE step size underflow at t = {0} ns")]
    StiffnessFailure(f64),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
