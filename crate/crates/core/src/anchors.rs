//! Parallel anchor management, anchor pruning, subspace generation, and the
//! anchor-completion transform.
//!
//! Anchors are the only correspondence between two latent spaces: row i of
//! every space's anchor matrix encodes the same underlying sample. Pruning
//! selects a well-spread subset of them by greedy farthest point sampling
//! under an absolute-cosine distance, which lowers the condition number of
//! the matrix that decoding must invert. Several independently pruned subsets
//! ("subspaces") can be generated from one master seed so their decoded
//! reconstructions can be average-pooled.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{IrpError, Result};
use crate::relative::{condition_number, pseudo_inverse};
use crate::spaces::{center_normalize, compute_stats, EmbeddingMatrix, SpaceStats};

struct AnchorSpace {
    raw: EmbeddingMatrix,
    stats: SpaceStats,
    unit: EmbeddingMatrix,
}

/// Index-aligned anchor matrices for two or more spaces, together with the
/// statistics and unit-normalized form derived from each space's raw anchors.
///
/// Per-space dimensions may differ; the shared row count may not.
pub struct ParallelAnchors {
    spaces: BTreeMap<String, AnchorSpace>,
    k: usize,
}

impl ParallelAnchors {
    pub fn new<I, S>(spaces: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, EmbeddingMatrix)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        let mut k = None;
        for (id, raw) in spaces {
            let id = id.into();
            match k {
                None => k = Some(raw.rows()),
                Some(k) if k != raw.rows() => {
                    return Err(IrpError::ShapeMismatch(format!(
                        "space `{id}` has {} anchor rows, expected {k}",
                        raw.rows()
                    )))
                }
                _ => {}
            }
            let stats = compute_stats(&raw)?;
            let unit = center_normalize(&raw, &stats)?;
            map.insert(id, AnchorSpace { raw, stats, unit });
        }
        let k = k.ok_or_else(|| IrpError::InvalidShape("no anchor spaces given".into()))?;
        if k < 2 {
            return Err(IrpError::InvalidShape(format!(
                "need at least 2 parallel anchors, got {k}"
            )));
        }
        Ok(Self { spaces: map, k })
    }

    /// Shared anchor count.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn space_ids(&self) -> impl Iterator<Item = &str> {
        self.spaces.keys().map(|s| s.as_str())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.spaces.contains_key(id)
    }

    fn space(&self, id: &str) -> Result<&AnchorSpace> {
        self.spaces
            .get(id)
            .ok_or_else(|| IrpError::MissingSpace(id.to_string()))
    }

    pub fn raw(&self, id: &str) -> Result<&EmbeddingMatrix> {
        Ok(&self.space(id)?.raw)
    }

    pub fn stats(&self, id: &str) -> Result<&SpaceStats> {
        Ok(&self.space(id)?.stats)
    }

    /// Anchors centered and unit-normalized by their own statistics.
    pub fn unit(&self, id: &str) -> Result<&EmbeddingMatrix> {
        Ok(&self.space(id)?.unit)
    }

    pub fn dim(&self, id: &str) -> Result<usize> {
        Ok(self.space(id)?.raw.cols())
    }
}

/// Pairwise distance `1 - |cos|` between unit anchor rows, clamped to
/// `[0, 1]`. The absolute value treats antiparallel anchors as coincident so
/// quasi-colinear points with opposite directions are pruned too.
///
/// Distances at rounding-noise level (below 1e-12) snap to exactly zero, so
/// duplicated anchor rows are prunable at `delta = 0`.
pub fn dcos(a_unit: &EmbeddingMatrix) -> DMatrix<f64> {
    debug_assert!(a_unit.is_unit_normalized(), "anchors must be unit rows");
    let gram = a_unit.data() * a_unit.data().transpose();
    let k = a_unit.rows();
    let mut dist = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let mut d = (1.0 - gram[(i, j)].abs()).clamp(0.0, 1.0);
            if d < 1e-12 {
                d = 0.0;
            }
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    dist
}

/// An FPS-selected anchor subset, in selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedSubspace {
    /// Selected anchor row indices, in the order FPS added them.
    pub indices: Vec<usize>,
    /// Pruning threshold the run used.
    pub delta: f64,
    /// Seed that drew the start point.
    pub seed: u64,
    /// Condition number of the selected unit-normalized anchor submatrix of
    /// the space the pruning ran on.
    pub condition: f64,
}

fn argmax_unselected(min_dist: &[f64], in_set: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &d) in min_dist.iter().enumerate() {
        if !in_set[i] && d > best_val {
            best = i;
            best_val = d;
        }
    }
    best
}

/// Greedy farthest point sampling over [`dcos`] distances.
///
/// The start index is drawn uniformly with `seed`; the second point is the
/// globally farthest from the first and is always kept, so the result has at
/// least 2 indices. Every further step adds the candidate maximizing its
/// minimum distance to the selected set and stops as soon as that best
/// distance drops to `delta` or below. Ties break toward the lowest index.
pub fn fps_prune(a_unit: &EmbeddingMatrix, delta: f64, seed: u64) -> Result<PrunedSubspace> {
    let k = a_unit.rows();
    if k < 2 {
        return Err(IrpError::InvalidShape(format!(
            "pruning needs at least 2 anchors, got {k}"
        )));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(IrpError::InvalidParameter(format!(
            "delta must lie in [0, 1), got {delta}"
        )));
    }
    let dist = dcos(a_unit);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..k as u64) as usize;

    let mut in_set = vec![false; k];
    let mut indices = Vec::with_capacity(k);
    in_set[start] = true;
    indices.push(start);
    let mut min_dist: Vec<f64> = (0..k).map(|i| dist[(i, start)]).collect();

    // Floor rule: the second point joins regardless of delta.
    let second = argmax_unselected(&min_dist, &in_set);
    in_set[second] = true;
    indices.push(second);
    for i in 0..k {
        min_dist[i] = min_dist[i].min(dist[(i, second)]);
    }

    while indices.len() < k {
        let cand = argmax_unselected(&min_dist, &in_set);
        if min_dist[cand] <= delta {
            break;
        }
        in_set[cand] = true;
        indices.push(cand);
        for i in 0..k {
            min_dist[i] = min_dist[i].min(dist[(i, cand)]);
        }
    }

    let condition = condition_number(&a_unit.select_rows(&indices)?)?;
    Ok(PrunedSubspace {
        indices,
        delta,
        seed,
        condition,
    })
}

/// Derives the seed of subspace `stream` from a master seed.
///
/// SplitMix64 finalizer applied at offset `(stream + 1) * 0x9E3779B97F4A7C15`
/// (the golden-ratio increment), so every (master, stream) pair maps to a
/// fixed, platform-independent 64-bit value.
pub fn split_seed(master_seed: u64, stream: u64) -> u64 {
    let mut z = master_seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `omega` independent FPS prunings, seeding run i with
/// `split_seed(master_seed, i)`.
pub fn make_subspaces(
    a_unit: &EmbeddingMatrix,
    omega: usize,
    delta: f64,
    master_seed: u64,
) -> Result<Vec<PrunedSubspace>> {
    if omega < 1 {
        return Err(IrpError::InvalidParameter("omega must be at least 1".into()));
    }
    (0..omega)
        .map(|i| fps_prune(a_unit, delta, split_seed(master_seed, i as u64)))
        .collect()
}

/// A dense d_y-by-d_x map taking unit-normalized source rows directly into
/// the target space, obtained by anchor completion.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionTransform {
    matrix: DMatrix<f64>,
}

impl CompletionTransform {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn source_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Applies the transform to every row: `X · Tᵀ`. Rows are returned
    /// un-normalized.
    pub fn apply(&self, x_unit: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if x_unit.cols() != self.source_dim() {
            return Err(IrpError::ShapeMismatch(format!(
                "samples have dimension {} but the transform expects {}",
                x_unit.cols(),
                self.source_dim()
            )));
        }
        EmbeddingMatrix::new(x_unit.data() * self.matrix.transpose())
    }
}

/// Re-expresses the translation through the canonical basis of the source
/// space.
///
/// Encoding the d_x-by-d_x identity with the source subset gives `S_xᵀ`;
/// decoding it with the target subset yields a completed target anchor set
/// `A_y = S_xᵀ · (S_yᵀ)⁺` of d_x points. The canonical basis becomes the new
/// source anchor set (the relative encoding of X against it is X itself), so
/// a unit source row x maps to `x · (A_yᵀ)⁺`, returned here as a d_y-by-d_x
/// transform.
pub fn anchor_completion(
    s_x_unit: &EmbeddingMatrix,
    s_y_unit: &EmbeddingMatrix,
    cutoff_ratio: f64,
) -> Result<CompletionTransform> {
    if s_x_unit.rows() != s_y_unit.rows() {
        return Err(IrpError::ShapeMismatch(format!(
            "source subset has {} anchors but target subset has {}",
            s_x_unit.rows(),
            s_y_unit.rows()
        )));
    }
    let completed_target =
        s_x_unit.data().transpose() * pseudo_inverse(&s_y_unit.data().transpose(), cutoff_ratio)?;
    let forward = pseudo_inverse(&completed_target.transpose(), cutoff_ratio)?;
    Ok(CompletionTransform {
        matrix: forward.transpose(),
    })
}
