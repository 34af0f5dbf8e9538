//! Field-level digital twin for crop planning.
//!
//! * [`ingestion`] validates sensor frames, GPS fixes and weather data.
//! * [`twin`] stores readings per field and fuses them into daily snapshots.
//! * [`recommender`] trains and serves the 22-crop recommendation model.
//! * [`analytics`] computes evaluation metrics, ROC curves, correlations and
//!   histograms, and writes them out for plotting.
//! * [`simulation`] runs growth and soil-water scenarios, plans irrigation
//!   and pesticide applications, and predicts harvest dates.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytics;
pub mod ingestion;
pub mod recommender;
pub mod simulation;
pub mod twin;
