//! Geo-constrained triplet mining.
//!
//! A training triplet pairs a query with its easiest positive (the
//! embedding-nearest gallery item within 10 m) and the N hardest negatives
//! (the embedding-nearest of a 1000-item pool sampled uniformly without
//! replacement from everything at least 25 m away). Queries without any
//! gallery item inside the positive radius are skipped and counted, per
//! weak-supervision practice.
//!
//! Ties anywhere are broken by the smaller item id. All sampling is driven
//! by the caller's [`SplitMix64`], so a mining round is fully reproducible
//! from its seed.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{composite, LayoutRecord};
use crate::embed::{distance_sq, embed_features, extract_features, EmbedderParams, Embedding};
use crate::geo::{haversine, GeoPoint, SpatialIndex};
use crate::raster::RasterImage;
use crate::rng::SplitMix64;
use crate::types::ItemId;

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("no gallery item within {radius_m} m of query {query_id}")]
    NoPositive { query_id: ItemId, radius_m: f64 },
    #[error("query {query_id}: only {eligible} eligible negatives, need {needed}")]
    InsufficientNegatives {
        query_id: ItemId,
        eligible: usize,
        needed: usize,
    },
    #[error("duplicate gallery id {0}")]
    DuplicateGalleryId(ItemId),
    #[error("layout list is empty")]
    EmptyLayouts,
    #[error(transparent)]
    Augment(#[from] crate::augment::AugmentError),
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
    #[error(transparent)]
    Geo(#[from] crate::geo::GeoError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad triplet record at line {line}: {source}")]
    BadTripletRecord {
        line: usize,
        source: serde_json::Error,
    },
}

/// Geo and pool constants for mining.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    /// Positives must lie within this radius of the query (inclusive).
    pub positive_radius_m: f64,
    /// Negatives must lie at least this far from the query (inclusive).
    pub negative_min_distance_m: f64,
    /// Size of the random negative pool.
    pub pool_size: usize,
    /// Hardest negatives kept per triplet.
    pub num_negatives: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            positive_radius_m: 10.0,
            negative_min_distance_m: 25.0,
            pool_size: 1000,
            num_negatives: 10,
        }
    }
}

/// A gallery item with its current-round embedding.
#[derive(Clone, Debug)]
pub struct GalleryItem {
    pub id: ItemId,
    pub location: GeoPoint,
    pub embedding: Embedding,
}

/// Gallery with unique ids and id->position lookup.
#[derive(Clone, Debug)]
pub struct Gallery {
    items: Vec<GalleryItem>,
    by_id: HashMap<ItemId, usize>,
}

impl Gallery {
    pub fn new(items: Vec<GalleryItem>) -> Result<Self, MiningError> {
        let mut by_id = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if by_id.insert(item.id, i).is_some() {
                return Err(MiningError::DuplicateGalleryId(item.id));
            }
        }
        Ok(Self { items, by_id })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[GalleryItem] {
        &self.items
    }

    pub fn get(&self, id: ItemId) -> Option<&GalleryItem> {
        self.by_id.get(&id).map(|&i| &self.items[i])
    }

    pub fn position(&self, id: ItemId) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    /// Spatial index over the gallery locations.
    pub fn build_spatial_index(&self) -> Result<SpatialIndex<ItemId>, MiningError> {
        Ok(SpatialIndex::build(
            self.items.iter().map(|it| (it.id, it.location)),
        )?)
    }
}

/// One training unit: query, easiest positive, hardest negatives, and the
/// layout used to augment the query (absent when training without
/// augmentation).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub query_id: ItemId,
    pub layout_id: Option<String>,
    pub positive_id: ItemId,
    pub negative_ids: Vec<ItemId>,
}

/// Easiest positive: among gallery items within the positive radius, the one
/// with the smallest embedding distance (ties by smaller id).
pub fn mine_positive(
    query_embedding: &Embedding,
    query_location: GeoPoint,
    query_id: ItemId,
    gallery: &Gallery,
    index: &SpatialIndex<ItemId>,
    config: &MiningConfig,
) -> Result<ItemId, MiningError> {
    let ball = index.radius_query(query_location, config.positive_radius_m);
    ball.into_iter()
        .map(|id| {
            let item = gallery.get(id).expect("index ids come from gallery");
            (distance_sq(query_embedding, &item.embedding), id)
        })
        .min_by(|a, b| a.partial_cmp(b).expect("finite distances"))
        .map(|(_, id)| id)
        .ok_or(MiningError::NoPositive {
            query_id,
            radius_m: config.positive_radius_m,
        })
}

/// Hardest negatives plus the pool they were chosen from (ids in pool order).
///
/// The pool is a uniform sample without replacement over eligible items in
/// gallery order; returned negatives are sorted by ascending embedding
/// distance with id tie-breaks.
pub fn mine_negatives_with_pool(
    query_embedding: &Embedding,
    query_location: GeoPoint,
    query_id: ItemId,
    gallery: &Gallery,
    config: &MiningConfig,
    rng: &mut SplitMix64,
) -> Result<(Vec<ItemId>, Vec<ItemId>), MiningError> {
    let mut eligible: Vec<ItemId> = gallery
        .items()
        .iter()
        .filter(|it| haversine(query_location, it.location) >= config.negative_min_distance_m)
        .map(|it| it.id)
        .collect();
    if eligible.len() < config.num_negatives {
        return Err(MiningError::InsufficientNegatives {
            query_id,
            eligible: eligible.len(),
            needed: config.num_negatives,
        });
    }
    let pool: Vec<ItemId> = if eligible.len() <= config.pool_size {
        eligible
    } else {
        rng.partial_shuffle(&mut eligible, config.pool_size);
        eligible.truncate(config.pool_size);
        eligible
    };

    let mut scored: Vec<(f64, ItemId)> = pool
        .iter()
        .map(|&id| {
            let item = gallery.get(id).expect("pool ids come from gallery");
            (distance_sq(query_embedding, &item.embedding), id)
        })
        .collect();
    scored.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let negatives = scored
        .into_iter()
        .take(config.num_negatives)
        .map(|(_, id)| id)
        .collect();
    Ok((negatives, pool))
}

/// See [`mine_negatives_with_pool`]; discards the pool.
pub fn mine_negatives(
    query_embedding: &Embedding,
    query_location: GeoPoint,
    query_id: ItemId,
    gallery: &Gallery,
    config: &MiningConfig,
    rng: &mut SplitMix64,
) -> Result<Vec<ItemId>, MiningError> {
    mine_negatives_with_pool(query_embedding, query_location, query_id, gallery, config, rng)
        .map(|(negatives, _)| negatives)
}

/// A training query image with its ground-truth location.
#[derive(Clone, Debug)]
pub struct TrainQuery {
    pub id: ItemId,
    pub location: GeoPoint,
    pub image: RasterImage,
}

/// A mined triplet plus the features of the (possibly augmented) query it
/// was mined with; gallery features are shared and addressed by position.
#[derive(Clone, Debug)]
pub struct MinedTriplet {
    pub triplet: Triplet,
    pub query_features: crate::embed::FeatureVector,
    pub positive_pos: usize,
    pub negative_pos: Vec<usize>,
}

/// Result of one mining round.
#[derive(Clone, Debug)]
pub struct EpochTriplets {
    pub mined: Vec<MinedTriplet>,
    pub skipped_queries: usize,
}

impl EpochTriplets {
    pub fn triplets(&self) -> Vec<Triplet> {
        self.mined.iter().map(|m| m.triplet.clone()).collect()
    }
}

/// Mines one epoch of triplets against the gallery's current embeddings.
///
/// With `layouts = Some(..)` each query is composited with a layout drawn
/// uniformly per query from the (pre-filtered) set; with `None` the raw
/// query image is used. Queries with no positive are skipped and counted.
pub fn build_epoch_triplets(
    queries: &[TrainQuery],
    layouts: Option<&[LayoutRecord]>,
    gallery: &Gallery,
    index: &SpatialIndex<ItemId>,
    params: &EmbedderParams,
    config: &MiningConfig,
    rng: &mut SplitMix64,
) -> Result<EpochTriplets, MiningError> {
    if let Some(ls) = layouts {
        if ls.is_empty() {
            return Err(MiningError::EmptyLayouts);
        }
    }
    let mut mined = Vec::with_capacity(queries.len());
    let mut skipped = 0usize;
    for q in queries {
        let (layout_id, features) = match layouts {
            Some(ls) => {
                let layout = &ls[rng.below(ls.len() as u64) as usize];
                let augmented = composite(&q.image, &layout.mask, &layout.image)?;
                (Some(layout.layout_id.clone()), extract_features(&augmented)?)
            }
            None => (None, extract_features(&q.image)?),
        };
        let (embedding, _) = embed_features(params, &features);

        let positive_id = match mine_positive(&embedding, q.location, q.id, gallery, index, config) {
            Ok(id) => id,
            Err(MiningError::NoPositive { .. }) => {
                log::debug!("query {} skipped: no positive in radius", q.id);
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let negative_ids =
            mine_negatives(&embedding, q.location, q.id, gallery, config, rng)?;

        let positive_pos = gallery.position(positive_id).expect("mined from gallery");
        let negative_pos = negative_ids
            .iter()
            .map(|&id| gallery.position(id).expect("mined from gallery"))
            .collect();
        mined.push(MinedTriplet {
            triplet: Triplet {
                query_id: q.id,
                layout_id,
                positive_id,
                negative_ids,
            },
            query_features: features,
            positive_pos,
            negative_pos,
        });
    }
    Ok(EpochTriplets { mined, skipped_queries: skipped })
}

/// Writes triplets as JSON-Lines:
/// `{"query_id":..,"layout_id":..,"positive_id":..,"negative_ids":[..]}`.
pub fn write_triplets_jsonl(path: &Path, triplets: &[Triplet]) -> Result<(), MiningError> {
    let io_err = |source| MiningError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for t in triplets {
        serde_json::to_writer(&mut f, t).map_err(|e| MiningError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        f.write_all(b"\n").map_err(io_err)?;
    }
    f.flush().map_err(io_err)
}

pub fn read_triplets_jsonl(path: &Path) -> Result<Vec<Triplet>, MiningError> {
    let io_err = |source| MiningError::Io {
        path: path.display().to_string(),
        source,
    };
    let f = BufReader::new(std::fs::File::open(path).map_err(io_err)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|source| MiningError::BadTripletRecord { line: i + 1, source })?,
        );
    }
    Ok(out)
}
