//! Inside-out visual place recognition toolkit.
//!
//! Localizes images whose only usable content is an outdoor scene seen
//! through a window, by matching against a gallery of geo-tagged street-view
//! tiles. The pipeline stages are:
//!
//! 1. **panorama** – cut equirectangular street-view panoramas into 24
//!    overlapping perspective tiles.
//! 2. **geo** – haversine distances, radius queries, and DBSCAN coverage
//!    subsampling over the tile locations.
//! 3. **augment** – synthesize indoor-looking training queries by
//!    compositing street-view images under binary window masks.
//! 4. **embed** – handcrafted image features plus a trainable linear map
//!    producing unit-norm descriptors.
//! 5. **mining / training** – geo-constrained triplet mining and the
//!    weakly-supervised margin ranking loss.
//! 6. **retrieval / eval** – exact (and optionally pruned) top-K search and
//!    Recall@K-within-radius reporting with distractor subsets.
//!
//! File formats (manifests, embedding stores, parameter files, reports) live
//! with the module that owns them; [`manifest`] and [`config`] hold the
//! dataset- and pipeline-level schemas.

pub mod augment;
pub mod config;
pub mod embed;
pub mod eval;
pub mod fixtures;
pub mod geo;
pub mod manifest;
pub mod mining;
pub mod panorama;
pub mod raster;
pub mod retrieval;
pub mod rng;
pub mod training;
mod types;

pub use augment::{LayoutKind, LayoutMask, LayoutRecord, MaskProvider};
pub use embed::{Embedding, EmbedderParams, FeatureVector};
pub use eval::{EvalConfig, RecallReport};
pub use geo::{GeoPoint, SpatialIndex};
pub use mining::{Gallery, GalleryItem, MiningConfig, Triplet};
pub use raster::RasterImage;
pub use retrieval::{GalleryIndex, RankEntry, Ranking};
pub use rng::SplitMix64;
pub use training::{LossConfig, TrainReport};
pub use types::ItemId;
