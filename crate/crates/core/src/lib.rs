//! Multi-frame super-resolution by gradient-weighted adaptive interpolation.
//!
//! The pipeline takes several shifted, blurred, decimated and noisy
//! low-resolution frames of one scene and produces a single high-resolution
//! estimate:
//!
//! 1. [`register`] estimates each frame's subpixel shift against the first frame.
//! 2. [`fuse`] places every low-resolution sample on the high-resolution lattice
//!    and interpolates each output pixel from its nearest samples, weighting
//!    them by distance and by the local gradient of the frame they came from.
//! 3. [`deblur`] removes the residual optical blur with a Wiener filter.
//!
//! [`degrade`] is the forward model used to synthesize test sequences, and
//! [`metrics`] / [`baseline`] provide the evaluation side.

pub mod baseline;
pub mod deblur;
pub mod degrade;
mod error;
pub mod fuse;
pub mod image;
pub mod metrics;
pub mod register;
pub mod spectral;

pub use error::{Error, Result};
pub use image::GrayImage;
