//! Log-likelihood matrices, double centering and exact model distances.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Raw `K x N` log-likelihoods (nats), one row per model and one column per text.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodMatrix {
    values: Array2<f64>,
    model_ids: Vec<String>,
    text_ids: Vec<String>,
    clip_threshold: Option<f64>,
}

impl LikelihoodMatrix {
    pub fn new(values: Array2<f64>, model_ids: Vec<String>, text_ids: Vec<String>) -> Result<Self> {
        let (k, n) = values.dim();
        if k < 2 || n < 2 {
            return Err(Error::InvalidMatrix(format!(
                "need at least 2 models and 2 texts, got {k}x{n}"
            )));
        }
        check_ids(k, n, &model_ids, &text_ids)?;
        check_finite(values.view())?;
        Ok(Self {
            values: values.as_standard_layout().into_owned(),
            model_ids,
            text_ids,
            clip_threshold: None,
        })
    }

    /// Builds a matrix with generated identifiers `m0.., t0..`.
    pub fn from_array(values: Array2<f64>) -> Result<Self> {
        let (k, n) = values.dim();
        Self::new(values, default_ids("m", k), default_ids("t", n))
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn text_ids(&self) -> &[String] {
        &self.text_ids
    }

    pub fn clip_threshold(&self) -> Option<f64> {
        self.clip_threshold
    }

    pub fn n_models(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_texts(&self) -> usize {
        self.values.ncols()
    }

    /// Returns the sub-matrix over the given text columns, in the given order.
    pub fn select_texts(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_texts()) {
            return Err(Error::InvalidArgument(format!("text index {bad} out of range")));
        }
        let values = self.values.select(Axis(1), indices);
        let text_ids = indices.iter().map(|&i| self.text_ids[i].clone()).collect();
        Ok(Self {
            values,
            model_ids: self.model_ids.clone(),
            text_ids,
            clip_threshold: self.clip_threshold,
        })
    }

    /// Stacks the rows of `other` below `self`. Both must share text ids.
    pub fn stack_models(&self, other: &LikelihoodMatrix) -> Result<Self> {
        if self.text_ids != other.text_ids {
            return Err(Error::InvalidArgument("text sets differ".into()));
        }
        let values = ndarray::concatenate(Axis(0), &[self.values.view(), other.values.view()])
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut model_ids = self.model_ids.clone();
        model_ids.extend(other.model_ids.iter().cloned());
        Ok(Self {
            values,
            model_ids,
            text_ids: self.text_ids.clone(),
            clip_threshold: self.clip_threshold.or(other.clip_threshold),
        })
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// Doubly centered coordinates `Q`; row `i` is the coordinate vector of model `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix {
    values: Array2<f64>,
    model_ids: Vec<String>,
    text_ids: Vec<String>,
}

impl CenteredMatrix {
    /// Wraps an already centered matrix, checking the zero row and column means.
    pub fn new(values: Array2<f64>, model_ids: Vec<String>, text_ids: Vec<String>) -> Result<Self> {
        let (k, n) = values.dim();
        if k == 0 || n == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        check_ids(k, n, &model_ids, &text_ids)?;
        check_finite(values.view())?;
        let tol = centering_tolerance(values.view());
        let max_row = values.mean_axis(Axis(1)).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_col = values.mean_axis(Axis(0)).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_row > tol || max_col > tol {
            return Err(Error::InvalidMatrix(format!(
                "matrix is not doubly centered (row mean {max_row:e}, column mean {max_col:e})"
            )));
        }
        Ok(Self {
            values: values.as_standard_layout().into_owned(),
            model_ids,
            text_ids,
        })
    }

    pub fn from_array(values: Array2<f64>) -> Result<Self> {
        let (k, n) = values.dim();
        Self::new(values, default_ids("m", k), default_ids("t", n))
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn text_ids(&self) -> &[String] {
        &self.text_ids
    }

    pub fn n_models(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_texts(&self) -> usize {
        self.values.ncols()
    }

    /// Content digest over shape, identifiers and values.
    pub fn digest(&self) -> String {
        crate::io::digest_matrix(self.values.view(), &self.model_ids, &self.text_ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Exact,
    Resampled,
}

/// Symmetric `K x K` matrix of squared distances between model coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub values: Array2<f64>,
    /// Comparability factor already applied to `values`.
    pub scale: f64,
    pub kind: DistanceKind,
}

impl DistanceMatrix {
    pub fn n_models(&self) -> usize {
        self.values.nrows()
    }
}

fn default_ids(prefix: &str, len: usize) -> Vec<String> {
    (0..len).map(|i| format!("{prefix}{i}")).collect()
}

fn check_ids(k: usize, n: usize, model_ids: &[String], text_ids: &[String]) -> Result<()> {
    if model_ids.len() != k || text_ids.len() != n {
        return Err(Error::InvalidMatrix(format!(
            "identifier counts ({}, {}) do not match shape {k}x{n}",
            model_ids.len(),
            text_ids.len()
        )));
    }
    Ok(())
}

fn check_finite(values: ArrayView2<'_, f64>) -> Result<()> {
    if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidMatrix(format!("non-finite entry {v} at ({i}, {j})")));
    }
    Ok(())
}

/// Relative tolerance for the centering invariants: `1e-9 * (max|entry| + 1)`.
pub fn centering_tolerance(values: ArrayView2<'_, f64>) -> f64 {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    1e-9 * (max + 1.0)
}

/// Percentile of `values` by linear interpolation between order statistics at
/// rank `pct / 100 * (len - 1)`.
pub fn lower_percentile(values: &[f64], pct: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile of empty data".into()));
    }
    if !(0.0..=100.0).contains(&pct) {
        return Err(Error::InvalidArgument(format!("percentile {pct} outside [0, 100]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Clamps every entry below the `pct`-th percentile of all entries to that value.
pub fn clip_lower_percentile(l: &LikelihoodMatrix, pct: f64) -> Result<LikelihoodMatrix> {
    let flat: Vec<f64> = l.values.iter().copied().collect();
    let threshold = lower_percentile(&flat, pct)?;
    apply_threshold(l, threshold)
}

/// Entry-wise `max(entry, threshold)`; records the threshold.
pub fn apply_threshold(l: &LikelihoodMatrix, threshold: f64) -> Result<LikelihoodMatrix> {
    if !threshold.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold {threshold} is not finite")));
    }
    let mut out = l.clone();
    out.values.mapv_inplace(|v| v.max(threshold));
    out.clip_threshold = Some(threshold);
    Ok(out)
}

/// Row-wise then column-wise centering of a raw matrix.
pub fn double_center_values(values: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = values.to_owned();
    let row_means = out.mean_axis(Axis(1)).expect("non-empty rows");
    for (mut row, m) in out.rows_mut().into_iter().zip(row_means.iter()) {
        row -= *m;
    }
    let col_means = out.mean_axis(Axis(0)).expect("non-empty columns");
    for mut row in out.rows_mut() {
        row -= &col_means;
    }
    out
}

pub fn double_center(l: &LikelihoodMatrix) -> CenteredMatrix {
    CenteredMatrix {
        values: double_center_values(l.values()),
        model_ids: l.model_ids.clone(),
        text_ids: l.text_ids.clone(),
    }
}

/// Squared distance between two rows, accumulated in ascending text order.
#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `g_ij = scale * ||q_i - q_j||^2` using the default execution policy.
pub fn pairwise_distances(q: &CenteredMatrix, scale: f64) -> Result<DistanceMatrix> {
    pairwise_distances_with(q, scale, Execution::default())
}

pub fn pairwise_distances_with(
    q: &CenteredMatrix,
    scale: f64,
    exec: Execution,
) -> Result<DistanceMatrix> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let mut values = row_distances(q.values(), exec, squared_distance);
    if scale != 1.0 {
        values.mapv_inplace(|v| v * scale);
    }
    Ok(DistanceMatrix {
        values,
        scale,
        kind: DistanceKind::Exact,
    })
}

/// Fills a symmetric matrix with `dist(row_i, row_j)` for `i < j`, one task per row.
pub(crate) fn row_distances<F>(values: ArrayView2<'_, f64>, exec: Execution, dist: F) -> Array2<f64>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync + Send,
{
    let values = values.as_standard_layout();
    let k = values.nrows();
    let rows: Vec<&[f64]> = values
        .outer_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    let upper = exec.map_range(k, |i| {
        (i + 1..k).map(|j| dist(rows[i], rows[j])).collect::<Vec<f64>>()
    });
    let mut out = Array2::zeros((k, k));
    for (i, row) in upper.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

/// `KL(p_i, p_j) ~= g_ij / (2N)`.
pub fn kl_estimate(g: &DistanceMatrix, n_texts: usize) -> Result<Array2<f64>> {
    if n_texts == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let denom = 2.0 * n_texts as f64;
    Ok(g.values.mapv(|v| v / denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(k: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((k, n), |_| rng.random_range(-10.0..10.0))
    }

    fn four_term(l: &Array2<f64>) -> Array2<f64> {
        let (k, n) = l.dim();
        let row: Vec<f64> = (0..k).map(|i| (0..n).map(|j| l[[i, j]]).sum::<f64>() / n as f64).collect();
        let col: Vec<f64> = (0..n).map(|j| (0..k).map(|i| l[[i, j]]).sum::<f64>() / k as f64).collect();
        let grand = l.iter().sum::<f64>() / (k * n) as f64;
        Array2::from_shape_fn((k, n), |(i, j)| l[[i, j]] - row[i] - col[j] + grand)
    }

    #[test]
    fn rejects_non_finite_and_small_shapes() {
        assert!(matches!(
            LikelihoodMatrix::from_array(array![[1.0, f64::NAN], [0.0, 1.0]]),
            Err(Error::InvalidMatrix(_))
        ));
        assert!(LikelihoodMatrix::from_array(array![[1.0, 2.0]]).is_err());
    }

    #[test]
    fn percentile_matches_sorted_interpolation() {
        // sorted (1,2,3,4,100): rank 0.5 * 4 = 2 -> exactly the third value
        let data = [100.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(lower_percentile(&data, 50.0).unwrap(), 3.0);
        // rank 0.3 * 4 = 1.2 -> 2 + 0.2 * (3 - 2)
        assert!((lower_percentile(&data, 30.0).unwrap() - 2.2).abs() < 1e-15);
        assert_eq!(lower_percentile(&data, 0.0).unwrap(), 1.0);
        assert_eq!(lower_percentile(&data, 100.0).unwrap(), 100.0);
    }

    #[test]
    fn clip_at_median_clamps_lower_half() {
        let l = LikelihoodMatrix::from_array(array![[1.0, 2.0, 3.0, 4.0, 100.0], [1.0, 2.0, 3.0, 4.0, 100.0]])
            .unwrap();
        // ten entries, rank 4.5 between order statistics 3 and 3
        let c = clip_lower_percentile(&l, 50.0).unwrap();
        assert_eq!(c.clip_threshold(), Some(3.0));
        assert_eq!(c.values().row(0).to_vec(), vec![3.0, 3.0, 3.0, 4.0, 100.0]);
    }

    #[test]
    fn clip_at_zero_is_identity() {
        let l = LikelihoodMatrix::from_array(random_matrix(3, 4, 1)).unwrap();
        let c = clip_lower_percentile(&l, 0.0).unwrap();
        let min = l.values().iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(c.values(), l.values());
        assert_eq!(c.clip_threshold(), Some(min));
    }

    #[test]
    fn apply_threshold_clamps() {
        let l = LikelihoodMatrix::from_array(array![[-5.0, -1.0], [-3.0, -2.0]]).unwrap();
        let c = apply_threshold(&l, -2.5).unwrap();
        assert_eq!(c.values(), array![[-2.5, -1.0], [-2.5, -2.0]].view());
        let same = apply_threshold(&l, -100.0).unwrap();
        assert_eq!(same.values(), l.values());
        assert!(apply_threshold(&l, f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn double_center_small_example() {
        let l = array![[1.0, 2.0, 3.0], [4.0, 6.0, 8.0]];
        let q = double_center(&LikelihoodMatrix::from_array(l.clone()).unwrap());
        let expected = four_term(&l);
        for (a, b) in q.values().iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        // rows (-1,0,1) and (-2,0,2) -> column means (-1.5,0,1.5)
        assert!((q.values()[[0, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_matrix_centers_to_zero() {
        let q = double_center(&LikelihoodMatrix::from_array(Array2::from_elem((3, 5), -7.5)).unwrap());
        assert!(q.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn distances_small_example() {
        let q = CenteredMatrix::from_array(array![[1.0, -1.0], [-1.0, 1.0]]).unwrap();
        let g = pairwise_distances(&q, 1.0).unwrap();
        assert_eq!(g.values[[0, 1]], 8.0);
        assert_eq!(g.values[[1, 0]], 8.0);
        assert_eq!(g.values[[0, 0]], 0.0);
        let kl = kl_estimate(&g, 4).unwrap();
        assert_eq!(kl[[0, 1]], 1.0);
        assert!(kl_estimate(&g, 0).is_err());
        assert!(pairwise_distances(&q, 0.0).is_err());
    }

    #[test]
    fn distances_match_naive_loop() {
        let l = LikelihoodMatrix::from_array(random_matrix(4, 6, 7)).unwrap();
        let q = double_center(&l);
        let g = pairwise_distances(&q, 2.5).unwrap();
        let v = q.values();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for s in 0..6 {
                    acc += (v[[i, s]] - v[[j, s]]).powi(2);
                }
                assert!((g.values[[i, j]] - 2.5 * acc).abs() < 1e-12);
            }
        }
        let kl = kl_estimate(&g, 6).unwrap();
        for (a, b) in kl.iter().zip(g.values.iter()) {
            assert!((a - b / 12.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sequential_and_parallel_distances_are_identical() {
        let q = double_center(&LikelihoodMatrix::from_array(random_matrix(30, 50, 3)).unwrap());
        let a = pairwise_distances_with(&q, 1.0, Execution::Sequential).unwrap();
        let b = pairwise_distances_with(&q, 1.0, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn centered_matrix_rejects_uncentered_input() {
        assert!(CenteredMatrix::from_array(array![[1.0, 2.0], [3.0, 4.0]]).is_err());
    }

    proptest! {
        #[test]
        fn double_center_is_idempotent_and_matches_closed_form(
            k in 2usize..6, n in 2usize..8, seed in any::<u64>()
        ) {
            let l = random_matrix(k, n, seed);
            let once = double_center_values(l.view());
            let twice = double_center_values(once.view());
            let closed = four_term(&l);
            for ((a, b), c) in once.iter().zip(twice.iter()).zip(closed.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((a - c).abs() < 1e-12);
            }
            prop_assert!(CenteredMatrix::from_array(once).is_ok());
        }

        #[test]
        fn distances_ignore_row_offsets(
            k in 2usize..6, n in 2usize..8, seed in any::<u64>(), row in 0usize..6, shift in -50.0f64..50.0
        ) {
            let l = random_matrix(k, n, seed);
            let mut shifted = l.clone();
            shifted.row_mut(row % k).mapv_inplace(|v| v + shift);
            let g1 = pairwise_distances(&double_center(&LikelihoodMatrix::from_array(l).unwrap()), 1.0).unwrap();
            let g2 = pairwise_distances(&double_center(&LikelihoodMatrix::from_array(shifted).unwrap()), 1.0).unwrap();
            for (a, b) in g1.values.iter().zip(g2.values.iter()) {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
            }
            let kl = kl_estimate(&g1, n).unwrap();
            prop_assert!(kl.iter().all(|v| *v >= 0.0));
            prop_assert!((0..k).all(|i| kl[[i, i]] == 0.0));
        }
    }
}
