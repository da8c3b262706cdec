//! Multi-exposure image fusion in the DCT domain, with optional joint
//! collaborative denoising.
//!
//! Registered exposures are split into overlapping blocks. Each block is
//! transformed with an orthonormal 2D DCT, the K co-located blocks are
//! blended coefficient by coefficient, and the fused blocks are averaged
//! back into the output. In joint mode the blocks first go through
//! cross-exposure block matching and collaborative 1D-DCT thresholding,
//! and the filtered coefficients feed the fusion directly.
//!
//! ```no_run
//! use dctfusion::{io, pipeline, ExposureSequence};
//!
//! let seq = ExposureSequence::new(vec![
//!     io::load_png("dark.png")?,
//!     io::load_png("bright.png")?,
//! ])?;
//! let fused = pipeline::denoise_and_fuse(&seq, &pipeline::PipelineConfig::joint(15.0 / 255.0))?;
//! io::save_png(&fused, "fused.png")?;
//! # Ok::<(), dctfusion::Error>(())
//! ```

pub mod collab;
pub mod color;
pub mod cost;
pub mod error;
pub mod fusion;
pub mod image;
pub mod io;
pub mod pipeline;
pub mod transform;

pub use crate::error::{Error, Result};
pub use crate::image::{Accumulator, DctPatch, ExposureSequence, Image, Patch};
pub use crate::pipeline::{Mode, PipelineConfig};
