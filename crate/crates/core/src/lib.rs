//! Synthesis and inversion of boundary data for the one-dimensional
//! point-source Schrödinger problem
//!
//! ```text
//! -u'' + q(x) u - k^2 u = delta(x),   du/d|x| - i k u -> 0 as |x| -> inf,
//! ```
//!
//! with a real potential supported on `[-1, 1]`. The forward stage produces
//! `u(-1, k)` and `u(1, k)` for `k > 0`; the inverse stage rebuilds `q` from
//! those two traces by way of the transition coefficient `a(k)` (a scalar
//! Riemann problem), the reflection coefficient and the Marchenko equation.
//!
//! Module map:
//! - [`types`]: grids, potentials, sampled complex functions, CSV formats
//! - [`forward`]: Jost solutions, `a`, `b` and boundary data
//! - [`winding`]: phase unwrapping and winding indices
//! - [`cauchy`]: Cauchy/Hilbert transforms on the real line
//! - [`riemann`]: data reduction and the Riemann problem for `a`
//! - [`marchenko`]: potential reconstruction from the reflection coefficient
//! - [`spectral`]: bound states, variational minima, index identities, norming constants
//! - [`pipeline`]: the stages chained together with their reports
//! - `cli` (feature `cli`): the `plasma` command-line tool

pub mod cauchy;
pub mod error;
pub mod forward;
pub mod marchenko;
pub mod pipeline;
pub mod riemann;
pub mod spectral;
pub mod tolerances;
pub mod types;
pub mod winding;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
pub use tolerances::Tolerances;
pub use types::{BoundaryData, ComplexSamples, KGrid, Potential, PotentialFamily};

/// Order-preserving map, parallel when the `parallel` feature is on.
pub(crate) fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
