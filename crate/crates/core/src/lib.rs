//! Simulation side of `wheelsim`: a planar dynamic vehicle model, procedural
//! scenes, synthetic sensors with domain randomization, the three batched
//! task environments (drift, elevation, visual) and evaluation metrics.

pub mod envs;
pub mod error;
pub mod eval;
pub mod rng;
pub mod sensors;
pub mod terrain;
pub mod vehicle;

pub use error::{Error, Result};
pub use rng::{EnvRng, Stream};

/// `assert!(|a - b| <= tol)` with a readable failure message.
#[cfg(test)]
#[macro_export]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{} = {} vs {} = {} (tol {})", stringify!($a), a, stringify!($b), b, tol);
    }};
}
