//! Zygosity classification of paired signals.
//!
//! The pipeline compresses each time series into a cosine series
//! ([`basis`]), correlates the coefficient vectors of the two members of a pair
//! and averages them over regions in Fisher-z space ([`pairing`]), and then
//! classifies the region-level correlation vectors with an L1-penalized
//! two-layer network ([`models`]). [`selection`] ranks regions by greedy
//! forward selection, and [`simulate`] generates synthetic pairs with known
//! ground truth. [`pipeline`] ties the stages together behind a config file.

pub mod basis;
pub mod io;
pub mod models;
pub mod pairing;
mod par;
pub mod pipeline;
pub mod seed;
pub mod selection;
pub mod simulate;

pub use basis::{build_design, fit_csr, normalize_time_series, reconstruct, snr, BasisDesign, CsrCoefficients, TimeGrid, TimeSeriesMatrix};
pub use models::{AnnModel, Metrics, PairedDataset, TrainingConfig};
pub use pairing::{csr_correlation, fisher_inv, fisher_z, pair_to_features, region_average, Parcellation};
