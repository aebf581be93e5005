//! Latent-space random graph laboratory.
//!
//! This crate samples random graphs whose edge probabilities are a monotone
//! connection function of latent-vector inner products, calibrates the
//! location parameter so the marginal edge density hits a target `p`,
//! computes the signed-triangle detection statistic, evaluates closed-form
//! divergence and concentration bounds, and orchestrates the Monte Carlo
//! experiments that map out the geometry-detection phase diagram.
//!
//! The modules mirror the pipeline:
//!
//! * [`connection`] — connection-function families (CDF, density, quantile)
//!   and assumption validation.
//! * [`calibrate`] — quadrature over the inner-product law and the root
//!   finder for the location parameter.
//! * [`sampler`] — latent positions, the two equivalent edge-generation
//!   mechanisms, and Erdős–Rényi nulls.
//! * [`tristat`] — signed-triangle statistics by two independent algorithms
//!   and Rao-Blackwellized motif probability estimators.
//! * [`bounds`] — closed-form KL/TV and moment bounds plus empirical tail
//!   checkers for the concentration lemmas.
//! * [`experiments`] — detection power, empirical TV lower bounds, and the
//!   (d, r) phase sweep with CSV output.

pub mod bounds;
pub mod calibrate;
pub mod connection;
pub mod error;
pub mod experiments;
pub mod jsonfmt;
pub mod quad;
pub mod sampler;
pub mod seed;
pub mod stats;
pub mod tristat;

pub use calibrate::{ModelParams, QuadratureConfig};
pub use connection::{ConnectionSpec, Family};
pub use error::Error;
pub use sampler::{GraphSample, LatentState};
pub use seed::{SeedContext, StreamRole};
