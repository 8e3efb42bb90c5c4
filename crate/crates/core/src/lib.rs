//! Single-mask X-ray phase-contrast imaging: mask models, analytic phantoms,
//! the transport-of-intensity forward model, single-shot retrieval and a
//! wave-optics reference simulator.

// Negated float comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod grid;
pub mod image;
pub mod io;
pub mod mask;
pub mod oracle;
pub mod phantom;
pub mod retrieval;

pub use error::{Error, ErrorCategory, Result};
pub use geometry::{wave_number_from_kev, wavelength_from_kev, ImagingGeometry, Material};
pub use image::{DetectorImage, ImageKind};
pub use mask::{MaskParameters, MaskSpec};
pub use phantom::{ProjectedObject, RodAxis};
pub use retrieval::{Pairing, RetrievalResult};
