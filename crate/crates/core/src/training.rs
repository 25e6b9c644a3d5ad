//! Weakly-supervised margin ranking loss and the SGD training loop.
//!
//! For one triplet the loss sums hinge terms over the negatives,
//!
//! ```text
//! L = sum_j max( d^2(q, p*) + m - d^2(q, n_j), 0 )
//! ```
//!
//! with squared Euclidean distances between unit-normalized embeddings and
//! the hinge subgradient at the kink taken as 0. The gradient is analytic
//! through the normalization and the linear map. Training refreshes gallery
//! embeddings at the start of every epoch, mines triplets against them, and
//! runs plain SGD over the triplets in a fixed order, so a run is fully
//! determined by its seed.

use std::io::Write as IoWrite;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::LayoutRecord;
use crate::embed::{
    embed_features, params_checksum, EmbedderParams, FeatureVector,
};
use crate::geo::GeoPoint;
use crate::mining::{
    build_epoch_triplets, Gallery, GalleryItem, MiningConfig, MiningError, TrainQuery,
};
use crate::rng::{indexed_seed, SplitMix64};
use crate::types::ItemId;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid loss config: {0}")]
    InvalidConfig(String),
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("training with augmentation requires a non-empty layout set")]
    EmptyLayouts,
    #[error("loss is NaN at epoch {epoch}, triplet {triplet}")]
    NanLoss { epoch: usize, triplet: usize },
    #[error(transparent)]
    Mining(#[from] MiningError),
}

/// Margin ranking loss and SGD hyperparameters.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub num_negatives: usize,
    pub seed: u64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            margin: 0.1,
            learning_rate: 0.01,
            epochs: 10,
            batch_size: 1,
            num_negatives: 10,
            seed: 0,
        }
    }
}

/// Per-epoch training statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub skipped_queries: usize,
    pub param_checksum: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    /// CSV with columns `epoch,mean_loss,skipped,checksum`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss,skipped,checksum\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{:016x}\n",
                e.epoch, e.mean_loss, e.skipped_queries, e.param_checksum
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())
    }
}

/// Hinge-sum ranking loss over squared distances.
pub fn triplet_loss(d2_qp: f64, d2_qn: &[f64], margin: f64) -> f64 {
    d2_qn
        .iter()
        .map(|&d2| (d2_qp + margin - d2).max(0.0))
        .sum()
}

/// Loss and analytic gradient w.r.t. the weight matrix for one triplet.
///
/// `negatives` are the feature vectors of the n_j. The gradient flows
/// through every embedding in the triplet; images whose pre-normalization
/// vector is exactly zero contribute no gradient (the normalization
/// Jacobian is undefined there and the basis-vector fallback is constant).
pub fn loss_and_gradient(
    params: &EmbedderParams,
    query: &FeatureVector,
    positive: &FeatureVector,
    negatives: &[&FeatureVector],
    margin: f64,
) -> (f64, Vec<f64>) {
    let dim = params.embed_dim();

    // Forward pass, keeping pre-normalization norms.
    let forward = |f: &FeatureVector| -> (Vec<f64>, f64) {
        let mut z = vec![0.0f64; dim];
        for (i, &x) in f.as_slice().iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &params.weights()[i * dim..(i + 1) * dim];
            for (zi, &w) in z.iter_mut().zip(row) {
                *zi += w * x;
            }
        }
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            let mut e = vec![0.0; dim];
            e[0] = 1.0;
            (e, 0.0)
        } else {
            for v in z.iter_mut() {
                *v /= norm;
            }
            (z, norm)
        }
    };

    let (e_q, n_q) = forward(query);
    let (e_p, n_p) = forward(positive);
    let negs: Vec<(Vec<f64>, f64)> = negatives.iter().map(|f| forward(f)).collect();

    let d2 = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };
    let d2_qp = d2(&e_q, &e_p);

    let mut loss = 0.0;
    let mut active = Vec::with_capacity(negs.len());
    for (e_n, _) in &negs {
        let h = d2_qp + margin - d2(&e_q, e_n);
        // Subgradient at the kink is 0, hence the strict comparison.
        let on = h > 0.0;
        active.push(on);
        if on {
            loss += h;
        }
    }
    let a_count = active.iter().filter(|&&x| x).count() as f64;

    // Gradients w.r.t. the unit embeddings.
    let mut g_eq = vec![0.0f64; dim];
    let mut g_ep = vec![0.0f64; dim];
    for i in 0..dim {
        g_ep[i] = 2.0 * a_count * (e_p[i] - e_q[i]);
    }
    for ((e_n, _), &on) in negs.iter().zip(&active) {
        if on {
            for i in 0..dim {
                g_eq[i] += 2.0 * (e_n[i] - e_p[i]);
            }
        }
    }

    // Backprop through normalization (e = z / |z|) and the linear map.
    let mut grad = vec![0.0f64; params.feature_dim() * dim];
    let mut accumulate = |features: &FeatureVector, e: &[f64], norm: f64, g_e: &[f64]| {
        if norm == 0.0 {
            return;
        }
        let dot: f64 = e.iter().zip(g_e).map(|(a, b)| a * b).sum();
        let g_z: Vec<f64> = e
            .iter()
            .zip(g_e)
            .map(|(&ei, &gi)| (gi - ei * dot) / norm)
            .collect();
        for (f, &x) in features.as_slice().iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &mut grad[f * dim..(f + 1) * dim];
            for (gw, &gz) in row.iter_mut().zip(&g_z) {
                *gw += x * gz;
            }
        }
    };

    accumulate(query, &e_q, n_q, &g_eq);
    accumulate(positive, &e_p, n_p, &g_ep);
    for (idx, ((e_n, n_n), &on)) in negs.iter().zip(&active).enumerate() {
        if !on {
            continue;
        }
        let g_en: Vec<f64> = e_q.iter().zip(e_n).map(|(&q, &n)| 2.0 * (q - n)).collect();
        accumulate(negatives[idx], e_n, *n_n, &g_en);
    }

    (loss, grad)
}

/// A gallery item before embedding: features are extracted once, embeddings
/// are refreshed from them every epoch.
#[derive(Clone, Debug)]
pub struct TrainGalleryItem {
    pub id: ItemId,
    pub location: GeoPoint,
    pub features: FeatureVector,
}

/// Embeds all gallery features under the given params.
pub fn refresh_gallery(
    params: &EmbedderParams,
    gallery: &[TrainGalleryItem],
) -> Result<Gallery, MiningError> {
    let items: Vec<GalleryItem> = gallery
        .par_iter()
        .map(|g| GalleryItem {
            id: g.id,
            location: g.location,
            embedding: embed_features(params, &g.features).0,
        })
        .collect();
    Gallery::new(items)
}

/// Trains the embedder: per epoch, refresh gallery embeddings, mine
/// triplets (optionally with layout augmentation), then SGD over the
/// triplets in order. Deterministic given the config seed.
pub fn train(
    queries: &[TrainQuery],
    gallery: &[TrainGalleryItem],
    layouts: Option<&[LayoutRecord]>,
    config: &LossConfig,
    mining: &MiningConfig,
    init: EmbedderParams,
) -> Result<(EmbedderParams, TrainReport), TrainError> {
    if config.margin.is_nan() || config.margin <= 0.0 {
        return Err(TrainError::InvalidConfig("margin must be > 0".into()));
    }
    if config.learning_rate.is_nan() || config.learning_rate <= 0.0 {
        return Err(TrainError::InvalidConfig("learning_rate must be > 0".into()));
    }
    if config.batch_size == 0 {
        return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
    }
    if config.num_negatives != mining.num_negatives {
        return Err(TrainError::InvalidConfig(format!(
            "num_negatives mismatch: loss config {} vs mining config {}",
            config.num_negatives, mining.num_negatives
        )));
    }
    if gallery.is_empty() {
        return Err(TrainError::EmptyGallery);
    }
    if matches!(layouts, Some([])) {
        return Err(TrainError::EmptyLayouts);
    }

    let index = crate::geo::SpatialIndex::build(gallery.iter().map(|g| (g.id, g.location)))
        .map_err(MiningError::from)?;

    let mut params = init;
    let mut report = TrainReport::default();
    let dim = params.embed_dim();
    for epoch in 0..config.epochs {
        let current = refresh_gallery(&params, gallery)?;
        let mut rng = SplitMix64::new(indexed_seed(config.seed, "train-epoch", epoch as u64));
        let epoch_triplets =
            build_epoch_triplets(queries, layouts, &current, &index, &params, mining, &mut rng)?;

        let mut loss_sum = 0.0;
        for (batch_start, batch) in epoch_triplets
            .mined
            .chunks(config.batch_size)
            .enumerate()
            .map(|(i, b)| (i * config.batch_size, b))
        {
            let mut grad_sum = vec![0.0f64; params.feature_dim() * dim];
            for (offset, m) in batch.iter().enumerate() {
                let neg_features: Vec<&FeatureVector> = m
                    .negative_pos
                    .iter()
                    .map(|&p| &gallery[p].features)
                    .collect();
                let (loss, grad) = loss_and_gradient(
                    &params,
                    &m.query_features,
                    &gallery[m.positive_pos].features,
                    &neg_features,
                    config.margin,
                );
                if loss.is_nan() {
                    return Err(TrainError::NanLoss { epoch, triplet: batch_start + offset });
                }
                loss_sum += loss;
                for (gs, g) in grad_sum.iter_mut().zip(&grad) {
                    *gs += g;
                }
            }
            let scale = config.learning_rate / batch.len() as f64;
            for (w, g) in params.weights_mut().iter_mut().zip(&grad_sum) {
                *w -= scale * g;
            }
        }

        let count = epoch_triplets.mined.len();
        report.epochs.push(EpochStats {
            epoch,
            mean_loss: if count == 0 { 0.0 } else { loss_sum / count as f64 },
            skipped_queries: epoch_triplets.skipped_queries,
            param_checksum: params_checksum(&params),
        });
    }
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{extract_features, init_params};
    use crate::raster::RasterImage;

    #[test]
    fn loss_hand_cases() {
        // Margin satisfied: 0.1 + 0.1 <= 0.3.
        assert_eq!(triplet_loss(0.1, &[0.3], 0.1), 0.0);
        // Direct substitution: (0.1+0.1-0.15) + (0.1+0.1-0.05) = 0.05 + 0.15.
        let l = triplet_loss(0.1, &[0.15, 0.05], 0.1);
        assert!((l - 0.20).abs() < 1e-15);
    }

    #[test]
    fn loss_matches_duplicate_evaluation() {
        // Second, independently written evaluation of the same formula.
        let reference = |d2_qp: f64, d2_qn: &[f64], m: f64| -> f64 {
            let mut total = 0.0;
            for &d in d2_qn {
                let term = d2_qp + m - d;
                if term > 0.0 {
                    total += term;
                }
            }
            total
        };
        let mut rng = SplitMix64::new(33);
        for _ in 0..500 {
            let d2_qp = rng.uniform(0.0, 2.0);
            let d2_qn: Vec<f64> = (0..5).map(|_| rng.uniform(0.0, 4.0)).collect();
            let m = rng.uniform(0.01, 0.5);
            assert_eq!(triplet_loss(d2_qp, &d2_qn, m), reference(d2_qp, &d2_qn, m));
        }
    }

    #[test]
    fn loss_zero_iff_margin_met() {
        let mut rng = SplitMix64::new(70);
        for _ in 0..2000 {
            let d2_qp = rng.uniform(0.0, 2.0);
            let d2_qn: Vec<f64> = (0..4).map(|_| rng.uniform(0.0, 4.0)).collect();
            let m = rng.uniform(0.01, 0.5);
            let zero = triplet_loss(d2_qp, &d2_qn, m) == 0.0;
            let met = d2_qn.iter().all(|&d| d2_qp + m <= d);
            assert_eq!(zero, met);
        }
    }

    #[test]
    fn loss_monotonicity_and_permutation() {
        let mut rng = SplitMix64::new(71);
        for _ in 0..200 {
            let d2_qp = rng.uniform(0.0, 2.0);
            let mut d2_qn: Vec<f64> = (0..6).map(|_| rng.uniform(0.0, 4.0)).collect();
            let m = 0.1;
            let base = triplet_loss(d2_qp, &d2_qn, m);
            assert!(triplet_loss(d2_qp + 0.1, &d2_qn, m) >= base);
            let bumped: Vec<f64> = d2_qn.iter().map(|&d| d + 0.1).collect();
            assert!(triplet_loss(d2_qp, &bumped, m) <= base);
            // Permutation invariance up to float summation order.
            d2_qn.reverse();
            assert!((triplet_loss(d2_qp, &d2_qn, m) - base).abs() <= 1e-12 * base.max(1.0));
        }
    }

    fn random_features(rng: &mut SplitMix64, dim: usize) -> FeatureVector {
        let mut img_vals: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        // Keep a couple of exact zeros to exercise the sparse path.
        img_vals[0] = 0.0;
        FeatureVector::from_values(img_vals)
    }

    /// Central finite differences on the forward loss (independent of the
    /// analytic gradient path).
    fn fd_gradient(
        params: &EmbedderParams,
        q: &FeatureVector,
        p: &FeatureVector,
        ns: &[&FeatureVector],
        margin: f64,
        step: f64,
    ) -> Vec<f64> {
        let loss_at = |params: &EmbedderParams| -> f64 {
            let eq = embed_features(params, q).0;
            let ep = embed_features(params, p).0;
            let d2_qp = crate::embed::distance_sq(&eq, &ep);
            let d2_qn: Vec<f64> = ns
                .iter()
                .map(|n| crate::embed::distance_sq(&eq, &embed_features(params, n).0))
                .collect();
            triplet_loss(d2_qp, &d2_qn, margin)
        };
        (0..params.weights().len())
            .map(|i| {
                let mut plus = params.clone();
                plus.weights_mut()[i] += step;
                let mut minus = params.clone();
                minus.weights_mut()[i] -= step;
                (loss_at(&plus) - loss_at(&minus)) / (2.0 * step)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / na.max(nb).max(1e-12)
    }

    #[test]
    fn gradient_zero_when_hinges_inactive() {
        let mut rng = SplitMix64::new(6);
        let params = init_params(1, 8, 4);
        let q = random_features(&mut rng, 8);
        let p = q.clone(); // d2_qp = 0
        let far = FeatureVector::from_values(
            q.as_slice().iter().map(|v| -v).collect(),
        );
        // d2(q, -q) = 4 for unit embeddings, so margin 0.1 keeps hinges off.
        let (loss, grad) = loss_and_gradient(&params, &q, &p, &[&far], 0.1);
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut checked = 0;
        let mut seed = 0u64;
        while checked < 10 {
            seed += 1;
            let mut rng = SplitMix64::new(seed);
            let params = init_params(seed, 8, 4);
            let q = random_features(&mut rng, 8);
            let p = random_features(&mut rng, 8);
            let n0 = random_features(&mut rng, 8);
            let n1 = random_features(&mut rng, 8);
            let margin = rng.uniform(0.05, 0.4);

            // Reject configurations with a hinge near its kink: finite
            // differences are invalid there (the loss is not differentiable).
            let eq = embed_features(&params, &q).0;
            let ep = embed_features(&params, &p).0;
            let d2_qp = crate::embed::distance_sq(&eq, &ep);
            let near_kink = [&n0, &n1].iter().any(|n| {
                let d2 = crate::embed::distance_sq(&eq, &embed_features(&params, n).0);
                (d2_qp + margin - d2).abs() < 1e-3
            });
            if near_kink {
                continue;
            }

            let (_, grad) = loss_and_gradient(&params, &q, &p, &[&n0, &n1], margin);
            let fd = fd_gradient(&params, &q, &p, &[&n0, &n1], margin, 1e-5);
            let err = rel_err(&grad, &fd);
            assert!(err <= 1e-4, "seed {seed}: rel err {err}");
            checked += 1;
        }
    }

    #[test]
    fn gradient_finite_for_zero_features() {
        let params = init_params(2, 8, 4);
        let zero = FeatureVector::from_values(vec![0.0; 8]);
        let (loss, grad) = loss_and_gradient(&params, &zero, &zero, &[&zero], 0.1);
        assert!(loss.is_finite());
        assert!(grad.iter().all(|g| g.is_finite()));
        // Fallback embeddings coincide, so the hinge is active at margin.
        assert!((loss - 0.1).abs() < 1e-15);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    fn micro_fixture() -> (Vec<TrainQuery>, Vec<TrainGalleryItem>) {
        use crate::geo::GeoPoint;
        let base = GeoPoint::new(52.37, 4.89).unwrap();
        let m_per_deg = crate::geo::EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let mut rng = SplitMix64::new(12);
        let mut gallery = Vec::new();
        let mut queries = Vec::new();
        for i in 0..8 {
            let loc = GeoPoint::new(base.lat + 40.0 * i as f64 / m_per_deg, base.lon).unwrap();
            let mut img = RasterImage::new(32, 32);
            for (k, b) in img.data_mut().iter_mut().enumerate() {
                *b = ((k as u64 * (i + 3)) % 256) as u8;
            }
            gallery.push(TrainGalleryItem {
                id: ItemId(i),
                location: loc,
                features: extract_features(&img).unwrap(),
            });
            // Query 2 m from the gallery item with a noisy copy of its image.
            let qloc = GeoPoint::new(loc.lat + 2.0 / m_per_deg, loc.lon).unwrap();
            let mut qimg = img.clone();
            for b in qimg.data_mut().iter_mut() {
                if rng.next_f64() < 0.05 {
                    *b = rng.below(256) as u8;
                }
            }
            queries.push(TrainQuery { id: ItemId(100 + i), location: qloc, image: qimg });
        }
        (queries, gallery)
    }

    #[test]
    fn zero_epochs_leaves_params_unchanged() {
        let (queries, gallery) = micro_fixture();
        let init = init_params(0, crate::embed::FEATURE_DIM, 8);
        let config = LossConfig { epochs: 0, num_negatives: 3, ..Default::default() };
        let mining = MiningConfig { num_negatives: 3, pool_size: 10, ..Default::default() };
        let (params, report) =
            train(&queries, &gallery, None, &config, &mining, init.clone()).unwrap();
        assert_eq!(params, init);
        assert!(report.epochs.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let (queries, gallery) = micro_fixture();
        let init = init_params(0, crate::embed::FEATURE_DIM, 8);
        let config = LossConfig { epochs: 3, num_negatives: 3, ..Default::default() };
        let mining = MiningConfig { num_negatives: 3, pool_size: 10, ..Default::default() };
        let run = || train(&queries, &gallery, None, &config, &mining, init.clone()).unwrap();
        let (pa, ra) = run();
        let (pb, rb) = run();
        assert_eq!(params_checksum(&pa), params_checksum(&pb));
        assert_eq!(ra, rb);
    }

    #[test]
    fn config_validation() {
        let (queries, gallery) = micro_fixture();
        let init = init_params(0, crate::embed::FEATURE_DIM, 8);
        let bad = LossConfig { margin: 0.0, ..Default::default() };
        assert!(matches!(
            train(&queries, &gallery, None, &bad, &MiningConfig::default(), init.clone()),
            Err(TrainError::InvalidConfig(_))
        ));
        let config = LossConfig { num_negatives: 3, ..Default::default() };
        assert!(matches!(
            train(&queries, &gallery, Some(&[]), &config, &MiningConfig { num_negatives: 3, ..Default::default() }, init.clone()),
            Err(TrainError::EmptyLayouts)
        ));
        assert!(matches!(
            train(&queries, &[], None, &config, &MiningConfig { num_negatives: 3, ..Default::default() }, init),
            Err(TrainError::EmptyGallery)
        ));
    }

    #[test]
    fn report_csv_shape() {
        let report = TrainReport {
            epochs: vec![EpochStats {
                epoch: 0,
                mean_loss: 0.25,
                skipped_queries: 2,
                param_checksum: 0xabcd,
            }],
        };
        let csv = report.to_csv();
        assert!(csv.starts_with("epoch,mean_loss,skipped,checksum\n"));
        assert!(csv.contains("0,0.25,2,000000000000abcd\n"));
    }
}
