//! Scene construction and queries: heightfields, the stadium drift track,
//! traversability maps for the visual task and the plain-text grid format.

mod elevation;
mod gridio;
mod heightfield;
mod track;
mod traversability;

pub use elevation::{build_elevation_scene, ElevationSceneSpec, RampSpec, WallSpec};
pub use gridio::{read_heightfield, read_traversability, write_heightfield, write_traversability};
pub use heightfield::{local_elevation_map, local_sample_points, HeightField};
pub use track::{progress_delta, TrackLine, TrackProjection};
pub use traversability::{
    generate_traversability, generate_traversability_with, GenerationTrace, TraversabilityMap, DEFAULT_TILE_SIZE,
};
