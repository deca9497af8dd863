//! Gameplay bug detection as video anomaly detection.
//!
//! A spatiotemporal autoencoder (strided convolutions, a stack of ConvLSTM
//! cells, transposed convolutions) is trained on bug-free frame windows.
//! Reconstruction error per frame becomes a regularity score curve, dips in
//! the curve mark anomalous segments, and whole curves are clustered with
//! DBSCAN to group bugs by category.

pub mod clustering;
pub mod data;
pub mod error;
pub mod model;
pub mod numerics;
pub mod scoring;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
