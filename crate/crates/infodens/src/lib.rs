//! Distribution of the information density of jointly Gaussian random vectors.
//!
//! Given the covariance blocks of a pair of jointly Gaussian vectors (or the
//! canonical correlations directly), this crate computes the exact PDF, CDF,
//! and central moments of their information density, whose expectation is the
//! mutual information. Two evaluation routes are provided and cross-checked:
//!
//! * [`series`] — the trusted reference: literal multi-index box sums with
//!   rigorous uniform truncation-error bounds, plus closed forms for equal
//!   canonical correlations.
//! * [`fasteval`] — a single-index series with recurrence-generated
//!   coefficients and kernels; orders of magnitude faster at the same
//!   accuracy, with the same style of rigorous bound.
//!
//! [`cca`] extracts canonical correlations from covariance blocks, and
//! [`oracle`] holds the independent verification machinery (Monte-Carlo
//! samplers, characteristic-function-inversion quadrature, KS statistics).

pub mod cca;
pub mod fasteval;
pub mod oracle;
pub mod series;
pub mod specialfn;

pub use cca::{canonical_spectrum, CanonicalSpectrum, CovarianceModel, WhiteningPair};
pub use fasteval::{cdf_fast, log_pdf_fast, pdf_fast, required_terms, CoefficientTable};
pub use series::{
    cdf_direct, cdf_equal, central_moment, characteristic_function, gaussian_reference,
    pdf_direct, pdf_equal, ApproxValue, BoundKind,
};
