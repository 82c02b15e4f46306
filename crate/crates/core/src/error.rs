//! Error conditions shared by all solver modules.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A signal evaluated to a nonpositive value where positivity is required.
    InvalidSignal { x: f64, value: f64 },
    /// Every sensing weight of a turning kernel vanished.
    DegenerateKernel { x: f64 },
    /// Small-radius expansion requested with R not small against the signal
    /// variation length.
    ExpansionInvalid { radius: f64, l_s: f64 },
    /// Time step exceeds the stability bound of the scheme.
    TimestepTooLarge { dt: f64, limit: f64 },
    /// The scheme produced an inadmissible state (negative density, NaN).
    SchemeFailure { what: &'static str, t: f64 },
    /// Distribution carries mass where the kernel has none.
    SupportMismatch,
    /// The dimensionality condition fails: no admissible Hamiltonian root.
    SingularHamiltonian { p_norm: f64 },
    /// Root bracketing failed.
    RootBracketError { lo: f64, hi: f64 },
    /// Closed-form expression evaluated outside its domain.
    FormulaDomainError { discriminant: f64 },
    /// No positive zero of the Hamiltonian exists (stable regime).
    NoPositiveRoot,
    /// Degenerate covariance at a wall; boundary closure undefined.
    BoundaryDegenerate { x: f64 },
    /// Gradient monitor tripped: the aggregate model left its validity regime.
    ConcentrationDetected { t: f64 },
    /// An ODE trajectory left a non-periodic domain.
    Escaped { t: f64, x: f64 },
    /// Boundary-drift closure contradicts the expected wall behaviour.
    AppendixViolation { wall: f64, drift: f64 },
    /// Invalid parameter combination.
    InvalidConfig(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidSignal { x, value } => {
                write!(f, "signal nonpositive at x = {x}: {value}")
            }
            Error::DegenerateKernel { x } => {
                write!(f, "all kernel sensing weights vanish at x = {x}")
            }
            Error::ExpansionInvalid { radius, l_s } => write!(
                f,
                "small-radius expansion invalid: R = {radius} not below l_S = {l_s}"
            ),
            Error::TimestepTooLarge { dt, limit } => {
                write!(f, "dt = {dt} exceeds stability limit {limit}")
            }
            Error::SchemeFailure { what, t } => write!(f, "scheme failure at t = {t}: {what}"),
            Error::SupportMismatch => write!(f, "distribution positive where kernel vanishes"),
            Error::SingularHamiltonian { p_norm } => {
                write!(f, "dimensionality condition fails at |p| = {p_norm}")
            }
            Error::RootBracketError { lo, hi } => {
                write!(f, "root not bracketed in ({lo}, {hi})")
            }
            Error::FormulaDomainError { discriminant } => {
                write!(f, "closed form undefined: discriminant = {discriminant}")
            }
            Error::NoPositiveRoot => write!(f, "no positive Hamiltonian zero (stable regime)"),
            Error::BoundaryDegenerate { x } => {
                write!(f, "degenerate covariance at wall x = {x}")
            }
            Error::ConcentrationDetected { t } => {
                write!(
                    f,
                    "concentration detected at t = {t}; aggregate model invalid"
                )
            }
            Error::Escaped { t, x } => write!(f, "trajectory left the domain at t = {t}, x = {x}"),
            Error::AppendixViolation { wall, drift } => {
                write!(
                    f,
                    "wall drift closure violated at x = {wall}: U·n = {drift}"
                )
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
