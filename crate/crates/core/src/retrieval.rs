//! Top-K nearest-neighbor search over gallery embeddings.
//!
//! The EXACT path is the contractually correct one: a full scan whose
//! results are bit-identical to a linear-scan oracle, with ties broken by
//! ascending gallery id. The PRUNED path partitions the gallery with seeded
//! k-means and probes only the nearest partitions; it exists for
//! million-scale galleries, never silently replaces EXACT, and ships with a
//! measured recall-vs-EXACT report ([`pruned_recall_vs_exact`]).
//!
//! Distances are squared Euclidean internally and reported as Euclidean.
//! Batch queries stream the gallery in fixed-size blocks so memory stays
//! bounded at million scale.
//!
//! Embedding store files: little-endian, header `{magic "IOVG", version
//! u32, count u64, dim u32}` followed by `{id u64, dim x f64}` per item.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::Embedding;
use crate::raster::RasterImage;
use crate::rng::SplitMix64;
use crate::types::ItemId;

/// Reranking only ever touches this prefix of a ranking.
pub const RERANK_WINDOW: usize = 100;

/// Gallery block size for streamed batch queries.
const BATCH_BLOCK: usize = 65_536;

const STORE_MAGIC: &[u8; 4] = b"IOVG";
const STORE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("gallery index must be non-empty")]
    EmptyIndex,
    #[error("duplicate gallery id {0}")]
    DuplicateId(ItemId),
    #[error("embedding dimension mismatch: index {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k must be >= 1")]
    InvalidK,
    #[error("pruned mode needs 1 <= partitions <= item count, got {partitions} for {items}")]
    InvalidPartitions { partitions: usize, items: usize },
    #[error("reranker returned {got} ids for a {expected}-id prefix")]
    BadPrefixLength { expected: usize, got: usize },
    #[error("reranker output is not a permutation of the prefix (unexpected id {0})")]
    BadPrefixId(ItemId),
    #[error("index is not in pruned mode")]
    NotPruned,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad embedding store: {0}")]
    BadStore(String),
    #[error("bad ranking record at line {line}: {source}")]
    BadRankingRecord {
        line: usize,
        source: serde_json::Error,
    },
}

/// Search mode chosen at index build time.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ExactnessMode {
    Exact,
    /// Seeded k-means into `partitions` cells; queries scan the `probes`
    /// nearest cells.
    Pruned {
        partitions: usize,
        probes: usize,
        seed: u64,
    },
}

#[derive(Clone, Debug)]
struct PartitionTable {
    /// Row-major partitions x dim.
    centroids: Vec<f64>,
    members: Vec<Vec<u32>>,
    probes: usize,
}

/// Immutable flat index over unit-norm embeddings.
#[derive(Clone, Debug)]
pub struct GalleryIndex {
    dim: usize,
    ids: Vec<ItemId>,
    /// Row-major items x dim.
    data: Vec<f64>,
    partitions: Option<PartitionTable>,
}

/// One retrieval hit; `distance` is Euclidean.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub id: ItemId,
    pub distance: f64,
}

/// Ordered retrieval results for one query: distances nondecreasing, ties
/// by ascending gallery id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub query_id: ItemId,
    pub entries: Vec<RankEntry>,
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Builds an index; ids must be unique, embeddings non-empty and of equal
/// dimension.
pub fn build_index(
    items: &[(ItemId, Embedding)],
    mode: ExactnessMode,
) -> Result<GalleryIndex, RetrievalError> {
    if items.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let dim = items[0].1.dim();
    let mut seen = HashSet::with_capacity(items.len());
    let mut ids = Vec::with_capacity(items.len());
    let mut data = Vec::with_capacity(items.len() * dim);
    for (id, e) in items {
        if e.dim() != dim {
            return Err(RetrievalError::DimensionMismatch { expected: dim, got: e.dim() });
        }
        if !seen.insert(*id) {
            return Err(RetrievalError::DuplicateId(*id));
        }
        ids.push(*id);
        data.extend_from_slice(e.as_slice());
    }

    let partitions = match mode {
        ExactnessMode::Exact => None,
        ExactnessMode::Pruned { partitions, probes, seed } => {
            if partitions == 0 || partitions > items.len() {
                return Err(RetrievalError::InvalidPartitions {
                    partitions,
                    items: items.len(),
                });
            }
            Some(kmeans_partitions(&data, dim, items.len(), partitions, probes.max(1), seed))
        }
    };

    Ok(GalleryIndex { dim, ids, data, partitions })
}

/// Lloyd's k-means, 10 iterations, initial centroids drawn by a seeded
/// shuffle of the items. Empty clusters keep their previous centroid.
fn kmeans_partitions(
    data: &[f64],
    dim: usize,
    n: usize,
    k: usize,
    probes: usize,
    seed: u64,
) -> PartitionTable {
    const ITERATIONS: usize = 10;
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<usize> = (0..n).collect();
    rng.partial_shuffle(&mut order, k);
    let mut centroids = vec![0.0f64; k * dim];
    for (c, &item) in order[..k].iter().enumerate() {
        centroids[c * dim..(c + 1) * dim].copy_from_slice(&data[item * dim..(item + 1) * dim]);
    }

    let assign = |centroids: &[f64]| -> Vec<u32> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let v = &data[i * dim..(i + 1) * dim];
                let mut best = (f64::INFINITY, 0u32);
                for c in 0..k {
                    let d = dist_sq(v, &centroids[c * dim..(c + 1) * dim]);
                    if d < best.0 {
                        best = (d, c as u32);
                    }
                }
                best.1
            })
            .collect()
    };

    let mut assignment = assign(&centroids);
    for _ in 0..ITERATIONS {
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c as usize] += 1;
            let row = &data[i * dim..(i + 1) * dim];
            let acc = &mut sums[c as usize * dim..(c as usize + 1) * dim];
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    centroids[c * dim + d] = sums[c * dim + d] / counts[c] as f64;
                }
            }
        }
        assignment = assign(&centroids);
    }

    let mut members = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        members[c as usize].push(i as u32);
    }
    PartitionTable { centroids, members, probes }
}

impl GalleryIndex {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_pruned(&self) -> bool {
        self.partitions.is_some()
    }

    fn vector(&self, pos: usize) -> &[f64] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    /// (centroid, member positions) pairs; empty unless pruned.
    pub fn partition_sizes(&self) -> Vec<usize> {
        self.partitions
            .as_ref()
            .map(|p| p.members.iter().map(|m| m.len()).collect())
            .unwrap_or_default()
    }
}

/// Keyed max-heap entry so the heap root is the current worst candidate.
#[derive(PartialEq)]
struct HeapKey(f64, ItemId);

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn scan_into_heap(
    index: &GalleryIndex,
    positions: impl Iterator<Item = usize>,
    q: &[f64],
    k: usize,
    heap: &mut BinaryHeap<HeapKey>,
) {
    for pos in positions {
        let d = dist_sq(index.vector(pos), q);
        let key = HeapKey(d, index.ids[pos]);
        if heap.len() < k {
            heap.push(key);
        } else if let Some(worst) = heap.peek() {
            if key < *worst {
                heap.pop();
                heap.push(key);
            }
        }
    }
}

fn heap_to_ranking(query_id: ItemId, heap: BinaryHeap<HeapKey>) -> Ranking {
    let mut entries: Vec<RankEntry> = heap
        .into_sorted_vec()
        .into_iter()
        .map(|HeapKey(d, id)| RankEntry { id, distance: d.sqrt() })
        .collect();
    // into_sorted_vec is ascending by (distance, id) already; keep explicit.
    entries.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    Ranking { query_id, entries }
}

/// Top-K search. `k` is capped at the gallery size (with a warning); EXACT
/// mode returns the true K nearest with the id tie rule.
pub fn query_topk(
    index: &GalleryIndex,
    query_id: ItemId,
    query: &Embedding,
    k: usize,
) -> Result<Ranking, RetrievalError> {
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if query.dim() != index.dim {
        return Err(RetrievalError::DimensionMismatch { expected: index.dim, got: query.dim() });
    }
    let k = if k > index.len() {
        log::warn!("k={k} exceeds gallery size {}; capping", index.len());
        index.len()
    } else {
        k
    };

    let q = query.as_slice();
    let mut heap = BinaryHeap::with_capacity(k + 1);
    match &index.partitions {
        None => scan_into_heap(index, 0..index.len(), q, k, &mut heap),
        Some(table) => {
            let parts = table.members.len();
            let mut by_centroid: Vec<(f64, usize)> = (0..parts)
                .map(|c| (dist_sq(&table.centroids[c * index.dim..(c + 1) * index.dim], q), c))
                .collect();
            by_centroid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, c) in by_centroid.iter().take(table.probes) {
                scan_into_heap(
                    index,
                    table.members[c].iter().map(|&i| i as usize),
                    q,
                    k,
                    &mut heap,
                );
            }
        }
    }
    Ok(heap_to_ranking(query_id, heap))
}

/// Batch top-K: streams the gallery in fixed blocks; per-query results are
/// independent of batching and parallelism.
pub fn batch_query_topk(
    index: &GalleryIndex,
    queries: &[(ItemId, Embedding)],
    k: usize,
) -> Result<Vec<Ranking>, RetrievalError> {
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if index.is_pruned() {
        // Pruned probing does not stream; delegate per query.
        return queries
            .iter()
            .map(|(id, q)| query_topk(index, *id, q, k))
            .collect();
    }
    for (_, q) in queries {
        if q.dim() != index.dim {
            return Err(RetrievalError::DimensionMismatch { expected: index.dim, got: q.dim() });
        }
    }
    let k = k.min(index.len());
    let mut heaps: Vec<BinaryHeap<HeapKey>> = queries
        .iter()
        .map(|_| BinaryHeap::with_capacity(k + 1))
        .collect();
    let mut start = 0;
    while start < index.len() {
        let end = (start + BATCH_BLOCK).min(index.len());
        heaps
            .par_iter_mut()
            .zip(queries.par_iter())
            .for_each(|(heap, (_, q))| {
                scan_into_heap(index, start..end, q.as_slice(), k, heap);
            });
        start = end;
    }
    Ok(queries
        .iter()
        .zip(heaps)
        .map(|((id, _), heap)| heap_to_ranking(*id, heap))
        .collect())
}

/// Pluggable reranking of the top-[`RERANK_WINDOW`] prefix.
///
/// Implementations return the prefix ids in their preferred order; the
/// suffix beyond the window is never touched.
pub trait Reranker {
    fn rerank(&self, query_image: &RasterImage, prefix: &[RankEntry]) -> Vec<ItemId>;
}

/// Keeps the embedding order.
pub struct IdentityReranker;

impl Reranker for IdentityReranker {
    fn rerank(&self, _query_image: &RasterImage, prefix: &[RankEntry]) -> Vec<ItemId> {
        prefix.iter().map(|e| e.id).collect()
    }
}

/// Applies a reranker to the top-100 prefix. The output contains exactly
/// the input id set; entries keep their original embedding distances, so
/// order after reranking reflects the reranker, not the distances.
pub fn rerank(
    query_image: &RasterImage,
    ranking: &Ranking,
    reranker: &dyn Reranker,
) -> Result<Ranking, RetrievalError> {
    let window = ranking.entries.len().min(RERANK_WINDOW);
    let prefix = &ranking.entries[..window];
    let order = reranker.rerank(query_image, prefix);
    if order.len() != window {
        return Err(RetrievalError::BadPrefixLength { expected: window, got: order.len() });
    }
    let mut remaining: Vec<Option<RankEntry>> = prefix.iter().copied().map(Some).collect();
    let mut entries = Vec::with_capacity(ranking.entries.len());
    for id in order {
        let slot = remaining
            .iter_mut()
            .find(|e| matches!(e, Some(en) if en.id == id))
            .ok_or(RetrievalError::BadPrefixId(id))?;
        entries.push(slot.take().expect("checked above"));
    }
    entries.extend_from_slice(&ranking.entries[window..]);
    Ok(Ranking { query_id: ranking.query_id, entries })
}

/// Mean fraction of the EXACT top-k ids that the pruned probe recovers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunedRecallStats {
    pub k: usize,
    pub query_count: usize,
    pub mean_recall: f64,
}

/// Measures pruned recall against the exact scan over the same data. The
/// index must be pruned; its exact results are computed from the same flat
/// arrays, so building the partition table never changes them.
pub fn pruned_recall_vs_exact(
    index: &GalleryIndex,
    queries: &[Embedding],
    k: usize,
) -> Result<PrunedRecallStats, RetrievalError> {
    if !index.is_pruned() {
        return Err(RetrievalError::NotPruned);
    }
    if queries.is_empty() {
        return Err(RetrievalError::InvalidK);
    }
    let exact = GalleryIndex {
        dim: index.dim,
        ids: index.ids.clone(),
        data: index.data.clone(),
        partitions: None,
    };
    let mut total = 0.0;
    for (qi, q) in queries.iter().enumerate() {
        let qid = ItemId(qi as u64);
        let truth: HashSet<ItemId> = query_topk(&exact, qid, q, k)?
            .entries
            .iter()
            .map(|e| e.id)
            .collect();
        let got = query_topk(index, qid, q, k)?;
        let hit = got.entries.iter().filter(|e| truth.contains(&e.id)).count();
        total += hit as f64 / truth.len() as f64;
    }
    Ok(PrunedRecallStats {
        k,
        query_count: queries.len(),
        mean_recall: total / queries.len() as f64,
    })
}

/// Writes the embedding store.
pub fn write_embedding_store(
    path: &Path,
    items: &[(ItemId, Embedding)],
) -> Result<(), RetrievalError> {
    let io_err = |source| RetrievalError::Io {
        path: path.display().to_string(),
        source,
    };
    if items.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let dim = items[0].1.dim();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    f.write_all(STORE_MAGIC).map_err(io_err)?;
    f.write_all(&STORE_VERSION.to_le_bytes()).map_err(io_err)?;
    f.write_all(&(items.len() as u64).to_le_bytes()).map_err(io_err)?;
    f.write_all(&(dim as u32).to_le_bytes()).map_err(io_err)?;
    for (id, e) in items {
        if e.dim() != dim {
            return Err(RetrievalError::DimensionMismatch { expected: dim, got: e.dim() });
        }
        f.write_all(&id.0.to_le_bytes()).map_err(io_err)?;
        for v in e.as_slice() {
            f.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    f.flush().map_err(io_err)
}

pub fn read_embedding_store(path: &Path) -> Result<Vec<(ItemId, Embedding)>, RetrievalError> {
    let io_err = |source| RetrievalError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(io_err)?
        .read_to_end(&mut bytes)
        .map_err(io_err)?;
    if bytes.len() < 20 || &bytes[0..4] != STORE_MAGIC {
        return Err(RetrievalError::BadStore("bad header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != STORE_VERSION {
        return Err(RetrievalError::BadStore(format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let record = 8 + dim * 8;
    if bytes.len() != 20 + count * record {
        return Err(RetrievalError::BadStore(format!(
            "expected {} bytes, got {}",
            20 + count * record,
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let base = 20 + i * record;
        let id = u64::from_le_bytes(bytes[base..base + 8].try_into().unwrap());
        let values: Vec<f64> = bytes[base + 8..base + record]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((ItemId(id), Embedding::from_raw(values)));
    }
    Ok(out)
}

/// Rankings as JSON-Lines, one query per line.
pub fn write_rankings_jsonl(path: &Path, rankings: &[Ranking]) -> Result<(), RetrievalError> {
    let io_err = |source| RetrievalError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for r in rankings {
        serde_json::to_writer(&mut f, r).map_err(|e| RetrievalError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        f.write_all(b"\n").map_err(io_err)?;
    }
    f.flush().map_err(io_err)
}

pub fn read_rankings_jsonl(path: &Path) -> Result<Vec<Ranking>, RetrievalError> {
    let io_err = |source| RetrievalError::Io {
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
                .map_err(|source| RetrievalError::BadRankingRecord { line: i + 1, source })?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_vec(rng: &mut SplitMix64, dim: usize) -> Embedding {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                return Embedding::from_raw(v.into_iter().map(|x| x / n).collect());
            }
        }
    }

    fn random_items(seed: u64, n: usize, dim: usize) -> Vec<(ItemId, Embedding)> {
        let mut rng = SplitMix64::new(seed);
        (0..n).map(|i| (ItemId(i as u64), unit_vec(&mut rng, dim))).collect()
    }

    /// Linear-scan oracle with the same tie rule.
    fn oracle_topk(items: &[(ItemId, Embedding)], q: &Embedding, k: usize) -> Vec<ItemId> {
        let mut scored: Vec<(f64, ItemId)> = items
            .iter()
            .map(|(id, e)| {
                let mut s = 0.0;
                for (x, y) in e.as_slice().iter().zip(q.as_slice()) {
                    let d = x - y;
                    s += d * d;
                }
                (s, *id)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.into_iter().take(k).map(|(_, id)| id).collect()
    }

    #[test]
    fn single_item_index() {
        let items = random_items(0, 1, 8);
        let index = build_index(&items, ExactnessMode::Exact).unwrap();
        let mut rng = SplitMix64::new(5);
        let q = unit_vec(&mut rng, 8);
        let r = query_topk(&index, ItemId(99), &q, 3).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].id, ItemId(0));
    }

    #[test]
    fn duplicate_and_empty_rejected() {
        let mut items = random_items(1, 3, 4);
        items.push(items[0].clone());
        assert!(matches!(
            build_index(&items, ExactnessMode::Exact),
            Err(RetrievalError::DuplicateId(_))
        ));
        assert!(matches!(
            build_index(&[], ExactnessMode::Exact),
            Err(RetrievalError::EmptyIndex)
        ));
    }

    #[test]
    fn stored_embedding_is_rank_one_with_zero_distance() {
        let items = random_items(2, 50, 16);
        let index = build_index(&items, ExactnessMode::Exact).unwrap();
        let r = query_topk(&index, ItemId(0), &items[17].1, 5).unwrap();
        assert_eq!(r.entries[0].id, ItemId(17));
        assert_eq!(r.entries[0].distance, 0.0);
    }

    #[test]
    fn k_equal_to_gallery_returns_everything_sorted() {
        let items = random_items(3, 20, 8);
        let index = build_index(&items, ExactnessMode::Exact).unwrap();
        let mut rng = SplitMix64::new(9);
        let q = unit_vec(&mut rng, 8);
        let r = query_topk(&index, ItemId(0), &q, 20).unwrap();
        assert_eq!(r.entries.len(), 20);
        for w in r.entries.windows(2) {
            assert!(w[0].distance <= w[1].distance);
        }
        // k beyond gallery size caps.
        let r2 = query_topk(&index, ItemId(0), &q, 500).unwrap();
        assert_eq!(r2.entries.len(), 20);
        assert_eq!(r.entries, r2.entries);
    }

    #[test]
    fn exact_matches_oracle() {
        let items = random_items(4, 2000, 16);
        let index = build_index(&items, ExactnessMode::Exact).unwrap();
        let mut rng = SplitMix64::new(44);
        for k in [1usize, 10, 100] {
            for _ in 0..5 {
                let q = unit_vec(&mut rng, 16);
                let got: Vec<ItemId> = query_topk(&index, ItemId(0), &q, k)
                    .unwrap()
                    .entries
                    .iter()
                    .map(|e| e.id)
                    .collect();
                assert_eq!(got, oracle_topk(&items, &q, k));
            }
        }
    }

    #[test]
    fn exact_tie_breaking_by_id() {
        // Duplicated embeddings force distance ties.
        let mut rng = SplitMix64::new(8);
        let e = unit_vec(&mut rng, 4);
        let items: Vec<(ItemId, Embedding)> =
            [5u64, 2, 9, 1].iter().map(|&i| (ItemId(i), e.clone())).collect();
        let index = build_index(&items, ExactnessMode::Exact).unwrap();
        let got: Vec<ItemId> = query_topk(&index, ItemId(0), &e, 4)
            .unwrap()
            .entries
            .iter()
            .map(|x| x.id)
            .collect();
        assert_eq!(got, vec![ItemId(1), ItemId(2), ItemId(5), ItemId(9)]);
    }

    #[test]
    fn ranking_prefix_property() {
        let items = random_items(5, 300, 8);
        let index = build_index(&items, ExactnessMode::Exact).unwrap();
        let mut rng = SplitMix64::new(6);
        let q = unit_vec(&mut rng, 8);
        let r10 = query_topk(&index, ItemId(0), &q, 10).unwrap();
        let r50 = query_topk(&index, ItemId(0), &q, 50).unwrap();
        assert_eq!(r10.entries[..], r50.entries[..10]);
    }

    #[test]
    fn batch_matches_single_queries() {
        let items = random_items(7, 1000, 8);
        let index = build_index(&items, ExactnessMode::Exact).unwrap();
        let mut rng = SplitMix64::new(77);
        let queries: Vec<(ItemId, Embedding)> =
            (0..20).map(|i| (ItemId(i), unit_vec(&mut rng, 8))).collect();
        let batch = batch_query_topk(&index, &queries, 25).unwrap();
        for (id, q) in &queries {
            let single = query_topk(&index, *id, q, 25).unwrap();
            assert_eq!(&batch[id.0 as usize], &single);
        }
    }

    #[test]
    fn kmeans_assignment_is_nearest_centroid() {
        let items = random_items(9, 10_000, 8);
        let index = build_index(
            &items,
            ExactnessMode::Pruned { partitions: 16, probes: 4, seed: 3 },
        )
        .unwrap();
        let table = index.partitions.as_ref().unwrap();
        for (c, members) in table.members.iter().enumerate() {
            for &m in members {
                let v = index.vector(m as usize);
                let own = dist_sq(v, &table.centroids[c * index.dim..(c + 1) * index.dim]);
                for other in 0..table.members.len() {
                    let d =
                        dist_sq(v, &table.centroids[other * index.dim..(other + 1) * index.dim]);
                    assert!(own <= d + 1e-12);
                }
            }
        }
        let total: usize = index.partition_sizes().iter().sum();
        assert_eq!(total, items.len());
    }

    #[test]
    fn pruned_build_is_deterministic() {
        let items = random_items(10, 500, 8);
        let mode = ExactnessMode::Pruned { partitions: 8, probes: 2, seed: 42 };
        let a = build_index(&items, mode).unwrap();
        let b = build_index(&items, mode).unwrap();
        assert_eq!(
            a.partitions.as_ref().unwrap().members,
            b.partitions.as_ref().unwrap().members
        );
    }

    #[test]
    fn pruned_full_probe_equals_exact() {
        let items = random_items(11, 400, 8);
        let pruned = build_index(
            &items,
            ExactnessMode::Pruned { partitions: 8, probes: 8, seed: 1 },
        )
        .unwrap();
        let exact = build_index(&items, ExactnessMode::Exact).unwrap();
        let mut rng = SplitMix64::new(2);
        for _ in 0..10 {
            let q = unit_vec(&mut rng, 8);
            assert_eq!(
                query_topk(&pruned, ItemId(0), &q, 20).unwrap(),
                query_topk(&exact, ItemId(0), &q, 20).unwrap()
            );
        }
        let stats = pruned_recall_vs_exact(&pruned, &[unit_vec(&mut rng, 8)], 20).unwrap();
        assert_eq!(stats.mean_recall, 1.0);
    }

    #[test]
    fn pruned_recall_report_is_measured() {
        let items = random_items(12, 2000, 16);
        let pruned = build_index(
            &items,
            ExactnessMode::Pruned { partitions: 32, probes: 4, seed: 7 },
        )
        .unwrap();
        let mut rng = SplitMix64::new(13);
        let queries: Vec<Embedding> = (0..20).map(|_| unit_vec(&mut rng, 16)).collect();
        let stats = pruned_recall_vs_exact(&pruned, &queries, 10).unwrap();
        assert!(stats.mean_recall > 0.0 && stats.mean_recall <= 1.0);
        assert_eq!(stats.query_count, 20);
    }

    struct ReverseReranker;

    impl Reranker for ReverseReranker {
        fn rerank(&self, _q: &RasterImage, prefix: &[RankEntry]) -> Vec<ItemId> {
            prefix.iter().rev().map(|e| e.id).collect()
        }
    }

    struct BadReranker;

    impl Reranker for BadReranker {
        fn rerank(&self, _q: &RasterImage, prefix: &[RankEntry]) -> Vec<ItemId> {
            let mut ids: Vec<ItemId> = prefix.iter().map(|e| e.id).collect();
            ids[0] = ItemId(u64::MAX);
            ids
        }
    }

    fn ranking_of_len(n: usize) -> Ranking {
        Ranking {
            query_id: ItemId(0),
            entries: (0..n)
                .map(|i| RankEntry { id: ItemId(i as u64), distance: i as f64 * 0.01 })
                .collect(),
        }
    }

    #[test]
    fn rerank_identity_and_reverse() {
        let img = RasterImage::new(4, 4);
        let ranking = ranking_of_len(120);
        let same = rerank(&img, &ranking, &IdentityReranker).unwrap();
        assert_eq!(same, ranking);

        let reversed = rerank(&img, &ranking, &ReverseReranker).unwrap();
        let prefix_ids: Vec<ItemId> = reversed.entries[..100].iter().map(|e| e.id).collect();
        let expect: Vec<ItemId> = (0..100).rev().map(|i| ItemId(i as u64)).collect();
        assert_eq!(prefix_ids, expect);
        // Suffix untouched.
        assert_eq!(reversed.entries[100..], ranking.entries[100..]);
        // Same multiset of ids overall.
        let mut a: Vec<ItemId> = reversed.entries.iter().map(|e| e.id).collect();
        let mut b: Vec<ItemId> = ranking.entries.iter().map(|e| e.id).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn rerank_rejects_foreign_ids() {
        let img = RasterImage::new(4, 4);
        let ranking = ranking_of_len(10);
        assert!(matches!(
            rerank(&img, &ranking, &BadReranker),
            Err(RetrievalError::BadPrefixId(_))
        ));
    }

    #[test]
    fn store_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.bin");
        let items = random_items(20, 37, 8);
        write_embedding_store(&path, &items).unwrap();
        let back = read_embedding_store(&path).unwrap();
        assert_eq!(back.len(), items.len());
        for ((ia, ea), (ib, eb)) in items.iter().zip(&back) {
            assert_eq!(ia, ib);
            assert_eq!(ea.as_slice(), eb.as_slice());
        }
    }

    #[test]
    fn store_rejects_corrupt_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.bin");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(
            read_embedding_store(&path),
            Err(RetrievalError::BadStore(_))
        ));
    }

    #[test]
    fn rankings_jsonl_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let rankings = vec![ranking_of_len(3), ranking_of_len(5)];
        write_rankings_jsonl(&path, &rankings).unwrap();
        assert_eq!(read_rankings_jsonl(&path).unwrap(), rankings);
    }
}
