//! Simulation, theory and ensemble statistics for a self-similar return
//! process built as a σ-mixture of non-stationary Gaussian increments.
//!
//! The chain runs: volatility measure ρ ([`mixture`]) → joint process
//! ([`process`]) → scaling function and return densities ([`scalefn`]) →
//! closed-form correlators ([`theory`]) → empirical ensemble estimators
//! ([`estimators`]), with [`ingest`] turning raw intraday prices into an
//! [`Ensemble`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod compare;
pub mod curve;
pub mod ensemble;
pub mod error;
pub mod estimators;
pub mod ingest;
pub mod mixture;
pub mod process;
pub mod quad;
pub mod rng;
pub mod scalefn;
pub mod theory;

pub use compare::{compare, ComparisonPoint, ComparisonReport};
pub use curve::{CollapsePlotData, CorrelatorCurve, CurveKind, CurvePoint, Source};
pub use ensemble::{Ensemble, Provenance};
pub use error::{Error, Result};
pub use estimators::{
    bootstrap_error_bars, collapse, detrend, emp_K, emp_increment_second_moment, emp_kappa, emp_linear_corr,
    emp_moment, emp_vol_autocorr, estimate_d, kappa_error_bars, Bootstrap, DEstimate, Statistic,
};
pub use ingest::{build_ensemble, ensemble_report, load_prices, EnsembleReport, PriceRecord, SessionSpec};
pub use mixture::{normalize, MixtureDensity, PowerLaw};
pub use process::{aggregate_return, coefficient_a, simulate_ensemble, simulate_history, Path, ProcessModel};
pub use scalefn::{char_fn_diag, g_density, return_pdf, ReturnPdfQuery};
pub use theory::{b2, b_alpha, calibrate, kappa, vol_autocorr, CalibrationTargets, PowerLawInit, K};
