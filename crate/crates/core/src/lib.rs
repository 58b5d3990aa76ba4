//! Signed distance persistent homology (SDPH) for 3D voxel volumes.
//!
//! The crate covers the whole analysis chain:
//!
//! * [`phantom`] builds deterministic synthetic volumes (balls, tori, vessel networks).
//! * [`sdt`] computes the exact Euclidean signed distance field of a binary volume.
//! * [`cubical`] runs sublevel-set cubical persistence on that field, with voxel anchors
//!   for every birth and death.
//! * [`diagram`] splits diagrams into the seven critical-size quadrants, computes aspect
//!   ratios, filters by persistence and restricts to sampling ellipsoids.
//! * [`texture_local`] extracts the 15 local texture features and clusters them.
//! * [`texture_global`] builds persistence-weighted KDE heatmaps and UPGMA trees.
//! * [`mixture`] fits persistence-weighted Gaussian mixtures and compares them with
//!   Hellinger distance and KL divergence.
//! * [`io`] holds every on-disk format.
//!
//! ```
//! use sdph::{phantom, sdt, cubical, diagram};
//!
//! let vol = phantom::make_ball([11, 11, 11], [5.0, 5.0, 5.0], 3.0).unwrap();
//! let field = sdt::signed_distance(&vol).unwrap();
//! let dgm = cubical::persistence(&field);
//! let kept = diagram::filter_persistence(&dgm, 0.5);
//! assert_eq!(kept.essential().count(), 1);
//! ```

pub mod cubical;
pub mod diagram;
pub mod grid2;
pub mod io;
pub mod mixture;
pub mod phantom;
pub mod sdt;
pub mod stats;
pub mod texture_global;
pub mod texture_local;
pub mod volume;

pub use cubical::{Diagram, PersistencePoint};
pub use diagram::{Ellipsoid, Quadrant, QuadrantPoint};
pub use mixture::{MixtureModel, Phase, WeightedPoint};
pub use sdt::ScalarField;
pub use volume::BinaryVolume;

use thiserror::Error;

/// Umbrella error for callers that chain several stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Volume(#[from] volume::VolumeError),
    #[error(transparent)]
    Phantom(#[from] phantom::PhantomError),
    #[error(transparent)]
    Sdt(#[from] sdt::SdtError),
    #[error(transparent)]
    Persistence(#[from] cubical::PersistenceError),
    #[error(transparent)]
    Diagram(#[from] diagram::DiagramError),
    #[error(transparent)]
    Texture(#[from] texture_local::TextureError),
    #[error(transparent)]
    Global(#[from] texture_global::GlobalError),
    #[error(transparent)]
    Mixture(#[from] mixture::MixtureError),
    #[error(transparent)]
    Format(#[from] io::FormatError),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Mixture(e) | Error::Texture(texture_local::TextureError::Mixture(e)) => e.is_numeric(),
            _ => false,
        }
    }
}
