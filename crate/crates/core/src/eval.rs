//! Recall@K-within-radius evaluation and distractor-subset construction.
//!
//! A query counts as correctly localized at K if at least one of its top-K
//! retrieved gallery items lies within the configured radius (inclusive) of
//! the query's ground-truth position. Recall is reported per K as a
//! percentage.
//!
//! Distractor subsets always contain every gallery item within the radius
//! of any query (the true positives), topped up with a seeded uniform
//! sample of the rest; under one seed the subsets for increasing sizes are
//! nested, which makes recall-vs-gallery-size curves measure distractor
//! pressure rather than sampling luck.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine, GeoPoint, SpatialIndex};
use crate::retrieval::Ranking;
use crate::rng::SplitMix64;
use crate::types::ItemId;

/// K values for small gallery subsets.
pub const SMALL_K_SET: [usize; 6] = [1, 5, 10, 15, 20, 25];

/// K values for large galleries (adds 50, 75, 100).
pub const EXTENDED_K_SET: [usize; 9] = [1, 5, 10, 15, 20, 25, 50, 75, 100];

/// Default ground-truth radius in meters (50 for indoor query sets).
pub const DEFAULT_RADIUS_M: f64 = 25.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid eval config: {0}")]
    InvalidConfig(String),
    #[error("query set is empty")]
    NoQueries,
    #[error("ranking for query {query_id} has {got} entries, need {needed}")]
    ShortRanking {
        query_id: ItemId,
        got: usize,
        needed: usize,
    },
    #[error("unknown location for {kind} id {id}")]
    UnknownLocation { kind: &'static str, id: ItemId },
    #[error("{positives} forced positives exceed subset target size {target}")]
    SubsetTooSmall { positives: usize, target: usize },
    #[error(transparent)]
    Geo(#[from] crate::geo::GeoError),
    #[error("bad report: {0}")]
    BadReport(String),
}

/// Evaluation parameters; echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub radius_m: f64,
    pub k_set: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            radius_m: DEFAULT_RADIUS_M,
            k_set: SMALL_K_SET.to_vec(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.radius_m.is_nan() || self.radius_m <= 0.0 {
            return Err(EvalError::InvalidConfig("radius_m must be > 0".into()));
        }
        if self.k_set.is_empty() {
            return Err(EvalError::InvalidConfig("k_set must be non-empty".into()));
        }
        if self.k_set.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::InvalidConfig(
                "k_set must be strictly ascending".into(),
            ));
        }
        if self.k_set[0] == 0 {
            return Err(EvalError::InvalidConfig("k values must be >= 1".into()));
        }
        Ok(())
    }
}

/// Recall percentages per K for one model on one gallery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub model: String,
    pub gallery_size: usize,
    pub query_count: usize,
    pub config: EvalConfig,
    /// Percentages in [0, 100], aligned with `config.k_set`.
    pub recalls: Vec<f64>,
}

impl RecallReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.config
            .k_set
            .iter()
            .position(|&kk| kk == k)
            .map(|i| self.recalls[i])
    }
}

/// Computes Recall@K over rankings.
///
/// Each ranking must carry at least `min(max K, gallery size)` entries;
/// larger K values are capped at the gallery size with a warning.
pub fn recall_at_k(
    rankings: &[Ranking],
    query_locs: &BTreeMap<ItemId, GeoPoint>,
    gallery_locs: &BTreeMap<ItemId, GeoPoint>,
    config: &EvalConfig,
    model: &str,
) -> Result<RecallReport, EvalError> {
    config.validate()?;
    if rankings.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let gallery_size = gallery_locs.len();
    let max_k = *config.k_set.last().expect("validated non-empty");
    if max_k > gallery_size {
        log::warn!("k={max_k} exceeds gallery size {gallery_size}; capping");
    }
    let needed = max_k.min(gallery_size);

    let mut hits = vec![0usize; config.k_set.len()];
    for ranking in rankings {
        if ranking.entries.len() < needed {
            return Err(EvalError::ShortRanking {
                query_id: ranking.query_id,
                got: ranking.entries.len(),
                needed,
            });
        }
        let q_loc = *query_locs.get(&ranking.query_id).ok_or(EvalError::UnknownLocation {
            kind: "query",
            id: ranking.query_id,
        })?;
        // Rank of the first within-radius hit, if any.
        let mut first_hit: Option<usize> = None;
        for (rank, entry) in ranking.entries.iter().take(needed).enumerate() {
            let g_loc = *gallery_locs.get(&entry.id).ok_or(EvalError::UnknownLocation {
                kind: "gallery",
                id: entry.id,
            })?;
            if haversine(q_loc, g_loc) <= config.radius_m {
                first_hit = Some(rank);
                break;
            }
        }
        if let Some(rank) = first_hit {
            for (i, &k) in config.k_set.iter().enumerate() {
                if rank < k.min(gallery_size) {
                    hits[i] += 1;
                }
            }
        }
    }

    let n = rankings.len() as f64;
    Ok(RecallReport {
        model: model.to_string(),
        gallery_size,
        query_count: rankings.len(),
        config: config.clone(),
        recalls: hits.into_iter().map(|h| 100.0 * h as f64 / n).collect(),
    })
}

/// Builds a distractor subset of exactly `target_size` gallery ids.
///
/// The subset is the union of all gallery items within `radius_m` of any
/// query (always included) and a seeded uniform sample of the remaining
/// items. For a fixed seed, subsets of increasing sizes are nested.
pub fn make_distractor_subset(
    gallery_locs: &BTreeMap<ItemId, GeoPoint>,
    query_locs: &BTreeMap<ItemId, GeoPoint>,
    target_size: usize,
    radius_m: f64,
    seed: u64,
) -> Result<BTreeSet<ItemId>, EvalError> {
    if target_size > gallery_locs.len() {
        return Err(EvalError::InvalidConfig(format!(
            "target size {target_size} exceeds gallery size {}",
            gallery_locs.len()
        )));
    }
    let index = SpatialIndex::build(gallery_locs.iter().map(|(&id, &loc)| (id, loc)))?;
    let mut positives: BTreeSet<ItemId> = BTreeSet::new();
    for &q_loc in query_locs.values() {
        positives.extend(index.radius_query(q_loc, radius_m));
    }
    if positives.len() > target_size {
        return Err(EvalError::SubsetTooSmall {
            positives: positives.len(),
            target: target_size,
        });
    }

    // Seeded permutation of the non-positive ids; its prefix is shared by
    // every target size, which is what makes subsets nest.
    let mut rest: Vec<ItemId> = gallery_locs
        .keys()
        .filter(|id| !positives.contains(id))
        .copied()
        .collect();
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut rest);

    let mut subset = positives;
    for id in rest {
        if subset.len() >= target_size {
            break;
        }
        subset.insert(id);
    }
    Ok(subset)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Serializes a report. CSV columns are
/// `model,size,R@1,R@5,...` driven by the config's K set, recall values
/// with one decimal; JSON is the full structure.
pub fn emit_report(report: &RecallReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string(report).expect("report serializes"),
        ReportFormat::Csv => {
            let mut out = String::from("model,size");
            for k in &report.config.k_set {
                out.push_str(&format!(",R@{k}"));
            }
            out.push('\n');
            out.push_str(&report.model);
            out.push_str(&format!(",{}", report.gallery_size));
            for r in &report.recalls {
                out.push_str(&format!(",{r:.1}"));
            }
            out.push('\n');
            out
        }
    }
}

/// Parses a single-row report CSV as produced by [`emit_report`]. Only the
/// CSV columns are recoverable: the query count is unknown (0) and the
/// radius takes its default.
pub fn parse_report_csv(text: &str) -> Result<RecallReport, EvalError> {
    let bad = |m: &str| EvalError::BadReport(m.to_string());
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("missing header"))?;
    let row = lines.next().ok_or_else(|| bad("missing data row"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "model" || cols[1] != "size" {
        return Err(bad("unexpected header"));
    }
    let k_set: Vec<usize> = cols[2..]
        .iter()
        .map(|c| {
            c.strip_prefix("R@")
                .ok_or_else(|| bad("bad K column"))?
                .parse::<usize>()
                .map_err(|_| bad("bad K value"))
        })
        .collect::<Result<_, _>>()?;
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() != cols.len() {
        return Err(bad("row/header column mismatch"));
    }
    let gallery_size = fields[1].parse::<usize>().map_err(|_| bad("bad size"))?;
    let recalls: Vec<f64> = fields[2..]
        .iter()
        .map(|f| f.parse::<f64>().map_err(|_| bad("bad recall value")))
        .collect::<Result<_, _>>()?;
    Ok(RecallReport {
        model: fields[0].to_string(),
        gallery_size,
        query_count: 0,
        config: EvalConfig {
            radius_m: DEFAULT_RADIUS_M,
            k_set,
        },
        recalls,
    })
}

pub fn parse_report_json(text: &str) -> Result<RecallReport, EvalError> {
    serde_json::from_str(text).map_err(|e| EvalError::BadReport(e.to_string()))
}
