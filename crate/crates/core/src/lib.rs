//! Compressed sensing reconstruction of images from undersampled Fourier
//! data, using a redundant wavelet + curvelet dictionary and a fully-sampled
//! center region of k-space.

pub mod curvelet;
pub mod dictionary;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod grid;
pub mod io;
pub mod lowfreq;
pub mod metrics;
pub mod par;
pub mod phantom;
pub mod recon;
pub mod sampling;
pub mod solver;
pub mod wavelet;

pub use error::{Error, Result};
pub use num_complex::Complex64;
