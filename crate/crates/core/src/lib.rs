//! Evaluation of synthetic image datasets against real data: fidelity and
//! diversity on an embedding manifold, FID, generator sampling speed,
//! downstream utility and adversarial robustness of a small CNN, and an
//! SSIM-based privacy score.

pub mod adversarial;
pub mod augment;
pub mod config;
pub mod data;
pub mod error;
pub mod features;
pub mod fid;
pub mod genbench;
pub mod manifold;
pub mod nn;
pub mod pipeline;
pub mod report;
pub mod ssim;

pub use error::{Error, Result};
