//! Numerical laboratory for spherical thin-shell concentration of convex
//! (s-concave, `s = −1/r`) probability measures.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: log-space Gamma/Beta/polygamma and the Beta-function bands.
//! * [`quad`]: adaptive Gauss–Kronrod quadrature, including half-line and
//!   log-space integrals.
//! * [`measures`]: the power-law family `f_{n,r}`, affine images, explicit
//!   densities, marginals and isotropic maps.
//! * [`sampling`]: counter-based RNG streams and exact samplers.
//! * [`moments`]: closed-form and Monte Carlo moment functionals, thin-shell
//!   width and marginal Kolmogorov distance.
//! * [`concavity`]: the `H_f` / `G_f` transforms and reverse Hölder checks.
//! * [`bodies`]: `K_a(w)` radial functions, `Z_q⁺` support functions and the
//!   associated inclusion checks.
//! * [`rotations`]: the functional `h_{k,p}` on `SO(n)`.
//! * [`calib`]: write-once store for empirically calibrated constants.
//! * [`calibration`]: the fixed sweeps that fill that store.

pub mod bodies;
pub mod calib;
pub mod calibration;
pub mod concavity;
pub mod error;
pub mod measures;
pub mod moments;
pub mod quad;
pub mod rotations;
pub mod sampling;
pub mod specfun;
pub mod stats;

pub use calib::{CalibConstants, CalibEntry};
pub use error::{Error, Result};
pub use measures::{make_fnr, IsotropyMap, MeasureModel, ModelSpec, RadialProfile};
pub use sampling::{RngStream, SampleBatch};
pub use specfun::LogScalar;
