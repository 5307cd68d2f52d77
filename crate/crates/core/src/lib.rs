//! Autophagy-penalized likelihood estimation (PLE) next to maximum likelihood.
//!
//! The crate is `no_std` (it needs `alloc`) and keeps every numerical routine
//! free of IO. Transcendental functions come from `libm`, so results are
//! bit-identical across platforms for a given seed.
//!
//! Module map:
//!
//! * [`distributions`]: parametric families, seeded sampling, densities.
//! * [`estimators`]: closed-form MLE/PLE estimators and bias harnesses.
//! * [`solver`]: generic PLE through a penalized Monte-Carlo constraint.
//! * [`autophagy`]: the self-consuming estimation loop.
//! * [`density`]: estimator densities by n-fold self-convolution.
//! * [`autodiff`] and [`hypernet`]: a set-encoder hypernetwork trained on the
//!   penalized objective with a built-in reverse-mode gradient engine.
//! * [`gmm`]: EM, sampled KL divergence, fairness ratio and the imbalance grid.

#![no_std]
// NaN-rejecting guards read as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod autophagy;
pub mod density;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod gmm;
pub mod hypernet;
pub mod math;
pub mod optim;
pub mod rng;
pub mod solver;
pub mod stats;

pub use distributions::{Dataset, FamilyTag, ParamVector};
pub use error::{Error, Result};
pub use estimators::Estimator;
pub use rng::SeededRng;
