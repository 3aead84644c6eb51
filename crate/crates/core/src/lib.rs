//! License plate localization and character recognition.
//!
//! The pipeline runs grayscale conversion and Gaussian smoothing, a
//! statistics-driven binarization, Sobel edges, morphological opening and
//! hole filling, connected-component plate search with a row "jump" test,
//! moment-based tilt correction, character segmentation into 60x30 glyphs,
//! frame-based distance/angle features and a k-nearest-neighbour classifier.

pub mod color;
pub mod config;
pub mod dataset;
pub mod edges;
pub mod eval;
pub mod exec;
pub mod features;
pub mod hsv;
pub mod io;
pub mod knn;
pub mod labeling;
pub mod locate;
pub mod morphology;
pub mod pipeline;
pub mod pnm;
pub mod preprocess;
pub mod raster;
pub mod rotate;
pub mod segment;
pub mod synth;
pub mod thinning;
