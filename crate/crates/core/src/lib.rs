//! Object-aware adaptive quantization preprocessing for DCT-based encoders.
//!
//! Frames with detected objects have their background requantized through an
//! 8x8 DCT at a level chosen from the object area, while object pixels are
//! restored exactly. Downstream encoders then spend fewer bits on the
//! background. The [`metrics`] module measures the effect.

pub mod colorspace;
pub mod detections;
pub mod error;
pub mod frame;
pub mod fsutil;
pub mod metrics;
pub mod pipeline;
pub mod quantizer;
pub mod report;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};
pub use frame::{ColorSpace, Frame, Plane, Subsampling};
