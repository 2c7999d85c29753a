//! Numerical rank from singular values.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Gap below which a rank decision is reported as ambiguous.
pub const AMBIGUOUS_GAP: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOptions {
    /// Absolute lower bound on the singular value threshold.
    pub floor: f64,
    /// Relative threshold; `None` uses `max(m, n) * eps`.
    pub relative: Option<f64>,
    /// Seed of the random probe vectors used by the checks.
    pub seed: u64,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            floor: 0.0,
            relative: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankInfo {
    pub rank: usize,
    pub threshold: f64,
    pub sigma_max: f64,
    /// Smallest retained singular value (0 for rank 0).
    pub sigma_min_kept: f64,
    /// Largest discarded singular value (0 if none).
    pub sigma_max_dropped: f64,
    /// `sigma_min_kept / sigma_max_dropped`; infinite when one side is empty.
    pub gap: f64,
}

impl RankInfo {
    pub fn ambiguous(&self) -> bool {
        self.gap < AMBIGUOUS_GAP
    }
}

/// Rank of `m` as the number of singular values above
/// `max(rel * sigma_max, floor)`.
pub fn numeric_rank(m: &DMatrix<f64>, opts: &RankOptions) -> RankInfo {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return RankInfo {
            rank: 0,
            threshold: opts.floor,
            sigma_max: 0.0,
            sigma_min_kept: 0.0,
            sigma_max_dropped: 0.0,
            gap: f64::INFINITY,
        };
    }
    let sv = m.singular_values();
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = s[0];
    let rel = opts.relative.unwrap_or(r.max(c) as f64 * f64::EPSILON);
    let threshold = (rel * sigma_max).max(opts.floor);
    let rank = s.iter().take_while(|&&x| x > threshold).count();
    let kept = if rank > 0 { s[rank - 1] } else { 0.0 };
    let dropped = s.get(rank).copied().unwrap_or(0.0);
    let gap = if rank == 0 || dropped == 0.0 { f64::INFINITY } else { kept / dropped };
    RankInfo {
        rank,
        threshold,
        sigma_max,
        sigma_min_kept: kept,
        sigma_max_dropped: dropped,
        gap,
    }
}
