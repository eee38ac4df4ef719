//! Classical wave-speed estimators used to cross-check the trained speed.

mod front;
mod rk4;
mod shooting;

pub use front::{default_dt, fdm_speed, fit_line, FrontTrackConfig};
pub use rk4::{rk4_integrate, Rk4, Trajectory};
pub use shooting::{ac_shooting_speed, ShootingConfig};

use thiserror::Error;

use crate::models::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid oracle configuration: {0}")]
    Config(String),
    #[error("no sign change over [{lo}, {hi}] (gaps {g_lo:.3e}, {g_hi:.3e})")]
    Bracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("unstable time stepping: {0}")]
    Stability(String),
    #[error("front reached x = {position:.3} at t = {t:.3}; enlarge the domain")]
    DomainTooSmall { t: f64, position: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Shooting,
    FrontTracking,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Shooting => "shooting",
            Method::FrontTracking => "front_tracking",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedEstimate {
    pub value: f64,
    pub method: Method,
    /// Matching gap (shooting) or RMS fit residual (front tracking).
    pub diagnostic: f64,
    /// Bisection iterations or time steps taken.
    pub iterations: usize,
}
