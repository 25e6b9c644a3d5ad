//! Geodesic distance, radius queries, and DBSCAN coverage subsampling.
//!
//! All distances are haversine great-circle distances on a sphere of radius
//! [`EARTH_RADIUS_M`]. The positive/negative mining radii (10 m / 25 m) and
//! the evaluation radii (25 m / 50 m) are small enough at city scale that
//! the spherical model's error against an ellipsoid is irrelevant.
//!
//! Distance conventions are closed on both sides: [`SpatialIndex::radius_query`]
//! includes items at exactly the query radius, and the mining-side
//! "at least 25 meters away" constraint is likewise inclusive. The one
//! exception is [`dbscan`], whose neighborhood is strictly `< eps` to match
//! the clustering rule it implements ("less than 5 meters distance").

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::f64::consts::PI;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters for the spherical model.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Meters spanned by one degree of latitude on the sphere.
const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * PI / 180.0;

/// Default grid cell edge, chosen at or above the largest query radius used
/// by the pipeline so radius queries touch few cells.
pub const DEFAULT_CELL_SIZE_M: f64 = 50.0;

/// Default DBSCAN neighborhood radius for panorama coverage selection.
pub const DEFAULT_DBSCAN_EPS_M: f64 = 5.0;

/// Default DBSCAN core-point threshold (neighborhood includes the point
/// itself, so 1 means no point is ever noise).
pub const DEFAULT_DBSCAN_MIN_PTS: usize = 1;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid WGS84 coordinate lat={lat} lon={lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("duplicate item id in spatial index")]
    DuplicateId,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A WGS84 coordinate in degrees.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Validates `lat ∈ [-90, 90]`, `lon ∈ [-180, 180]`.
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) || lat.is_nan() || lon.is_nan() {
            return Err(GeoError::InvalidCoordinate { lat, lon });
        }
        Ok(Self { lat, lon })
    }
}

/// Haversine great-circle distance in meters.
///
/// Symmetric and non-negative; the asin argument is clamped to guard the
/// antipodal rounding case.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();

    let s = (dlat * 0.5).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon * 0.5).sin().powi(2);
    2.0 * EARTH_RADIUS_M * s.sqrt().clamp(0.0, 1.0).asin()
}

/// Uniform lat/lon grid over geo-tagged items supporting exact radius
/// queries.
///
/// Cells are fixed-size in degrees (sized from the equatorial meter/degree
/// ratio); a radius query walks the cells intersecting the query circle's
/// bounding box and verifies every candidate with [`haversine`], so results
/// are identical to a brute-force scan. Immutable after build; concurrent
/// reads are safe.
#[derive(Clone, Debug)]
pub struct SpatialIndex<I> {
    cell_deg: f64,
    cells: HashMap<(i32, i32), Vec<I>>,
    items: HashMap<I, GeoPoint>,
}

impl<I: Clone + Eq + Hash + Ord> SpatialIndex<I> {
    /// Builds with [`DEFAULT_CELL_SIZE_M`].
    pub fn build(items: impl IntoIterator<Item = (I, GeoPoint)>) -> Result<Self, GeoError> {
        Self::with_cell_size(items, DEFAULT_CELL_SIZE_M)
    }

    pub fn with_cell_size(
        items: impl IntoIterator<Item = (I, GeoPoint)>,
        cell_size_m: f64,
    ) -> Result<Self, GeoError> {
        if cell_size_m.is_nan() || cell_size_m <= 0.0 {
            return Err(GeoError::InvalidParameter("cell_size_m must be > 0".into()));
        }
        let cell_deg = cell_size_m / METERS_PER_DEGREE;
        let mut index = Self {
            cell_deg,
            cells: HashMap::new(),
            items: HashMap::new(),
        };
        for (id, pos) in items {
            GeoPoint::new(pos.lat, pos.lon)?;
            if index.items.insert(id.clone(), pos).is_some() {
                return Err(GeoError::DuplicateId);
            }
            index.cells.entry(index.cell_of(pos)).or_default().push(id);
        }
        Ok(index)
    }

    fn cell_of(&self, p: GeoPoint) -> (i32, i32) {
        (
            (p.lat / self.cell_deg).floor() as i32,
            (p.lon / self.cell_deg).floor() as i32,
        )
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn location(&self, id: &I) -> Option<GeoPoint> {
        self.items.get(id).copied()
    }

    /// All ids with `haversine(center, pos) <= radius_m` (boundary included).
    pub fn radius_query(&self, center: GeoPoint, radius_m: f64) -> BTreeSet<I> {
        let mut out = BTreeSet::new();
        if self.items.is_empty() || radius_m < 0.0 {
            return out;
        }

        let check_cell = |key: (i32, i32), out: &mut BTreeSet<I>| {
            if let Some(ids) = self.cells.get(&key) {
                for id in ids {
                    if haversine(center, self.items[id]) <= radius_m {
                        out.insert(id.clone());
                    }
                }
            }
        };

        // Angular radius of the query circle. Beyond a hemisphere the
        // bounding box degenerates; fall back to scanning everything.
        let ang = radius_m / EARTH_RADIUS_M;
        let dlat_deg = ang.to_degrees();
        let lat_lo = center.lat - dlat_deg;
        let lat_hi = center.lat + dlat_deg;

        // Longitude extent of the circle (Matuschek's bounding-box formula);
        // undefined once the circle encloses a pole.
        let sin_ratio = ang.sin() / center.lat.to_radians().cos();
        let full_lon = lat_lo <= -90.0 || lat_hi >= 90.0 || ang >= PI / 2.0 || sin_ratio.abs() >= 1.0;

        let lat_cells = self.cell_range(lat_lo.max(-90.0), lat_hi.min(90.0));
        let lon_spans: Vec<(f64, f64)> = if full_lon {
            vec![(-180.0, 180.0)]
        } else {
            let dlon_deg = sin_ratio.asin().to_degrees();
            let lo = center.lon - dlon_deg;
            let hi = center.lon + dlon_deg;
            if lo < -180.0 {
                vec![(-180.0, hi), (lo + 360.0, 180.0)]
            } else if hi > 180.0 {
                vec![(lo, 180.0), (-180.0, hi - 360.0)]
            } else {
                vec![(lo, hi)]
            }
        };

        for lat_cell in lat_cells.clone() {
            for &(lo, hi) in &lon_spans {
                for lon_cell in self.cell_range(lo, hi) {
                    check_cell((lat_cell, lon_cell), &mut out);
                }
            }
        }
        out
    }

    fn cell_range(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<i32> {
        ((lo / self.cell_deg).floor() as i32)..=((hi / self.cell_deg).floor() as i32)
    }
}

/// DBSCAN cluster assignment.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ClusterId {
    Cluster(usize),
    Noise,
}

#[derive(Clone, Debug)]
pub struct ClusterLabel<I> {
    pub item_id: I,
    pub label: ClusterId,
}

/// DBSCAN over geo-tagged items with the haversine metric and a strictly
/// `< eps_m` neighborhood.
///
/// Labels are deterministic given the input order: points are visited in
/// order, clusters are numbered by discovery, and expansion is breadth-first
/// over neighbor lists sorted by input position. A point's neighborhood
/// includes the point itself, so `min_pts = 1` leaves nothing as noise.
pub fn dbscan<I: Clone>(
    items: &[(I, GeoPoint)],
    eps_m: f64,
    min_pts: usize,
) -> Result<Vec<ClusterLabel<I>>, GeoError> {
    if eps_m.is_nan() || eps_m <= 0.0 {
        return Err(GeoError::InvalidParameter("eps_m must be > 0".into()));
    }
    if min_pts < 1 {
        return Err(GeoError::InvalidParameter("min_pts must be >= 1".into()));
    }

    let index = SpatialIndex::with_cell_size(
        items.iter().enumerate().map(|(i, (_, p))| (i, *p)),
        eps_m.max(1.0),
    )?;
    let neighborhood = |i: usize| -> Vec<usize> {
        index
            .radius_query(items[i].1, eps_m)
            .into_iter()
            .filter(|&j| haversine(items[i].1, items[j].1) < eps_m)
            .collect()
    };

    let mut labels: Vec<Option<ClusterId>> = vec![None; items.len()];
    let mut next_cluster = 0usize;
    for start in 0..items.len() {
        if labels[start].is_some() {
            continue;
        }
        let nbrs = neighborhood(start);
        if nbrs.len() < min_pts {
            labels[start] = Some(ClusterId::Noise);
            continue;
        }
        let cluster = ClusterId::Cluster(next_cluster);
        next_cluster += 1;
        labels[start] = Some(cluster);
        let mut queue: VecDeque<usize> = nbrs.into_iter().collect();
        while let Some(p) = queue.pop_front() {
            match labels[p] {
                Some(ClusterId::Noise) => labels[p] = Some(cluster), // border point
                Some(_) => continue,
                None => {
                    labels[p] = Some(cluster);
                    let pn = neighborhood(p);
                    if pn.len() >= min_pts {
                        queue.extend(pn);
                    }
                }
            }
        }
    }

    Ok(items
        .iter()
        .zip(labels)
        .map(|((id, _), label)| ClusterLabel {
            item_id: id.clone(),
            label: label.expect("every point labeled"),
        })
        .collect())
}

/// One representative per cluster: the smallest item id. Noise items are not
/// represented.
pub fn select_representatives<I: Clone + Ord>(labels: &[ClusterLabel<I>]) -> BTreeSet<I> {
    let mut best: HashMap<usize, I> = HashMap::new();
    for l in labels {
        if let ClusterId::Cluster(c) = l.label {
            match best.get(&c) {
                Some(cur) if *cur <= l.item_id => {}
                _ => {
                    best.insert(c, l.item_id.clone());
                }
            }
        }
    }
    best.into_values().collect()
}
