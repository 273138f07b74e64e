//! Light-field image compression with sparse reference coding.
//!
//! Sub-aperture views are arranged as a pseudo-video sequence and coded with a
//! hierarchical block-DCT hybrid codec. Non-reference views on the two top
//! temporal layers may be dropped by a Lagrangian drop decision and are
//! rebuilt at the decoder by a learned disparity/color view synthesizer
//! trained against two discriminators. A multi-view quality enhancement
//! network then evens out quality across all non-reference views.

pub mod error;
pub mod lf;
pub mod metrics;
pub mod codec;
pub mod enhance;
pub mod structure;
pub mod nn;
pub mod pipeline;
pub mod rdo;
pub mod synth;
pub mod synthetic;

pub use error::{Error, Result};
pub use lf::{AngularPos, LightField, Plane, View};
