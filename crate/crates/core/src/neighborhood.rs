//! Exact K-nearest-neighbor selection over Haversine distance.
//!
//! Every candidate distance is computed and the full list is sorted by
//! `(distance, original index)`, so the result is a pure function of the
//! input ordering.

use serde::Serialize;

use crate::error::{GimbalError, Result};
use crate::geo::{haversine_distance, GeoPoint};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighborhood {
    /// Index of the target in its own table, `None` for external prediction targets.
    pub target_index: Option<usize>,
    pub member_indices: Vec<usize>,
    pub distances: Vec<f64>,
    pub self_included: bool,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }
}

/// `K` nearest points to `target`, ties broken by smaller index.
///
/// `target_index` labels the target when it is itself a row of `all_points`;
/// `exclude_index` removes one row from the eligible pool.
pub fn knn(
    all_points: &[GeoPoint],
    target: GeoPoint,
    k: usize,
    target_index: Option<usize>,
    exclude_index: Option<usize>,
) -> Result<Neighborhood> {
    let eligible = all_points.len() - usize::from(exclude_index.is_some_and(|e| e < all_points.len()));
    if k == 0 || k > eligible {
        return Err(GimbalError::NeighborhoodTooLarge {
            target: target_index.unwrap_or(usize::MAX),
            k,
            eligible,
        });
    }

    let mut candidates: Vec<(f64, usize)> = all_points
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != exclude_index)
        .map(|(j, p)| (haversine_distance(target, *p), j))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.truncate(k);

    let self_included = target_index.is_some_and(|t| candidates.iter().any(|&(_, j)| j == t));
    let (distances, member_indices) = candidates.into_iter().unzip();
    Ok(Neighborhood {
        target_index,
        member_indices,
        distances,
        self_included,
    })
}
