//! Population distance covariance and distance correlation for
//! Lancaster-type bivariate and multivariate distributions.
//!
//! Every population value comes from an explicit double series and can be
//! checked against two independent routes:
//!
//! * [`oracle`] integrates the defining singular integral over the
//!   characteristic functions directly;
//! * [`empirical`] samples the joint law and applies the `V_n` estimator.
//!
//! ```
//! use dcor_core::population::{dcov2_bvn_closed, dcov2_bvn_series};
//!
//! let series = dcov2_bvn_series(0.5, 1e-12).unwrap();
//! assert!((series.value - dcov2_bvn_closed(0.5)).abs() < 1e-10);
//! ```

pub mod empirical;
pub mod oracle;
pub mod population;
pub mod quadrature;
pub mod series;
pub mod specfun;
pub mod verify;

pub use empirical::{RngSeed, SampleMatrix};
pub use oracle::{CharacteristicTriple, QuadratureConfig};
pub use population::{DcorSummary, DistributionSpec};
pub use series::{CoefficientProvider, GammaConstant, SeriesEvaluation};
pub use specfun::SignedLogValue;
