//! Slide-level prostate cancer screening from patch-level CNN output.
//!
//! A patch classifier upstream scores every tissue patch of a whole-slide
//! image. This crate turns those scores into an 18-value slide descriptor
//! (malignant tissue ratio, probability histogram, histogram regression line,
//! connected-component profile), classifies the slide with a wide & deep
//! network, and evaluates it against baseline classifiers under stratified
//! cross-validation.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod netcore;
pub mod seed;
pub mod synth;
pub mod widedeep;

pub use error::{Error, Result};
pub use features::{extract_features, FeatureVector};
pub use ingest::{Label, PatchPrediction, SlideRecord};
