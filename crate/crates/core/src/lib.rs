//! Surface cutting toolkit: seam representation and tokenization, ground-truth
//! seam extraction from UV layouts, shape-conditioning point sampling, cutting
//! meshes along seams, conformal flattening with distortion metrics, seam-guided
//! part-label refinement, and a small hourglass autoregressive seam generator.

pub mod codec;
pub mod cutter;
pub mod error;
pub mod extract;
pub mod flatten;
pub mod mesh;
pub mod neural;
pub mod sampler;
pub mod segment;
pub mod shapes;

pub use codec::{Codec, SeamFile, SeamSegment, SeamSequence, TokenStream};
pub use error::{Error, Result};
pub use extract::{SeamEdgeSet, UvLayoutReport};
pub use mesh::{EdgeKey, TriMesh, Vec2, Vec3};
