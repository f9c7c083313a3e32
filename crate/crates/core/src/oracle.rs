//! Brute-force checks on tiny instances (`N <= 4`, `n <= 3`, `K <= 5`).
//!
//! Every ordered sequence of `n` draws is visited with its exact probability.
//! Coordinates are the columns of the already centered `Q`, weighted by
//! `1 / (n pi)` per draw, with no re-centering. In this setting the weighted
//! distance is exactly unbiased and its variance has a closed form, and the
//! optimal resampling probabilities can be checked against a grid search
//! over the probability simplex.

use ndarray::{Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::matrix::{double_center_values, pairwise_distances, CenteredMatrix};
use crate::sampling::{ResampleDraw, SamplingPlan};

/// Maximum number of ordered outcomes `N^n` the enumeration will visit.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub expectation: Array2<f64>,
    pub variance: Array2<f64>,
    pub support_size: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub best_probs: Vec<f64>,
    pub best_objective: f64,
    /// Largest objective change between the best grid point and its neighbours.
    pub slack: f64,
    pub grid_points: usize,
}

fn support_size(n_texts: usize, n: usize) -> Result<u128> {
    let size = (n_texts as u128)
        .checked_pow(n as u32)
        .filter(|s| *s <= ENUMERATION_LIMIT)
        .ok_or(Error::BudgetExceeded {
            support: (n_texts as u128).saturating_pow(n as u32),
            limit: ENUMERATION_LIMIT,
        })?;
    Ok(size)
}

/// Calls `visit(indices, probability)` for every ordered outcome with non-zero
/// probability, in lexicographic order.
pub fn for_each_outcome<F>(probs: &[f64], n: usize, mut visit: F) -> Result<u128>
where
    F: FnMut(&[usize], f64),
{
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let size = support_size(probs.len(), n)?;
    let mut idx = vec![0usize; n];
    loop {
        let p: f64 = idx.iter().map(|&s| probs[s]).product();
        if p > 0.0 {
            visit(&idx, p);
        }
        // odometer, last position fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(size);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < probs.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn squared_differences(q: &CenteredMatrix) -> Vec<Array2<f64>> {
    let v = q.values();
    let k = q.n_models();
    (0..q.n_texts())
        .map(|s| Array2::from_shape_fn((k, k), |(i, j)| (v[[i, s]] - v[[j, s]]).powi(2)))
        .collect()
}

fn estimate(diffs: &[Array2<f64>], probs: &[f64], idx: &[usize]) -> Array2<f64> {
    let n = idx.len() as f64;
    let k = diffs[0].nrows();
    let mut g = Array2::zeros((k, k));
    for &s in idx {
        g.scaled_add(1.0 / (n * probs[s]), &diffs[s]);
    }
    g
}

/// Exact mean and variance of the weighted distance over all `N^n` draws.
pub fn enumerate_moments(q: &CenteredMatrix, plan: &SamplingPlan, n: usize) -> Result<EnumerationResult> {
    check_plan(q, plan)?;
    let probs = plan.probs();
    let diffs = squared_differences(q);
    let k = q.n_models();
    let mut mean = Array2::<f64>::zeros((k, k));
    let size = for_each_outcome(probs, n, |idx, p| {
        mean.scaled_add(p, &estimate(&diffs, probs, idx));
    })?;
    let mut variance = Array2::<f64>::zeros((k, k));
    for_each_outcome(probs, n, |idx, p| {
        let dev = estimate(&diffs, probs, idx) - &mean;
        variance.scaled_add(p, &dev.mapv(|v| v * v));
    })?;
    Ok(EnumerationResult {
        expectation: mean,
        variance,
        support_size: size,
    })
}

fn check_plan(q: &CenteredMatrix, plan: &SamplingPlan) -> Result<()> {
    if plan.n_texts() != q.n_texts() {
        return Err(Error::InvalidArgument(format!(
            "plan covers {} texts, matrix has {}",
            plan.n_texts(),
            q.n_texts()
        )));
    }
    Ok(())
}

/// `Var(g~_ij) = (1/n) sum_s (q_i(s) - q_j(s))^4 / pi_s - (1/n) ||q_i - q_j||^4`.
///
/// Terms with a zero difference contribute nothing whatever `pi_s` is.
pub fn closed_form_variance(q: &CenteredMatrix, plan: &SamplingPlan, n: usize) -> Result<Array2<f64>> {
    check_plan(q, plan)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let v = q.values();
    let k = q.n_models();
    let g = pairwise_distances(q, 1.0)?;
    let mut out = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            let mut fourth = 0.0;
            for (s, &p) in plan.probs().iter().enumerate() {
                let diff = v[[i, s]] - v[[j, s]];
                if diff == 0.0 {
                    continue;
                }
                if p == 0.0 {
                    return Err(Error::InvalidPlan(format!(
                        "text {s} has zero probability but separates models {i} and {j}"
                    )));
                }
                fourth += diff.powi(4) / p;
            }
            let gij = g.values[[i, j]];
            out[[i, j]] = (fourth - gij * gij) / n as f64;
        }
    }
    Ok(out)
}

/// `true` when some text with `pi_s = 0` has a non-zero column. Such plans
/// give biased estimates and sit outside the unbiased class being optimized.
fn drops_informative_text(q: &CenteredMatrix, probs: &[f64]) -> bool {
    let v = q.values();
    probs
        .iter()
        .enumerate()
        .any(|(s, &p)| p == 0.0 && v.column(s).iter().any(|x| *x != 0.0))
}

/// `E[sum_ij (g~_ij - g_ij)^2] = sum_ij Var(g~_ij)` by enumeration; infinite for
/// plans that never draw an informative text.
pub fn kl_objective(q: &CenteredMatrix, probs: &[f64], n: usize) -> Result<f64> {
    if drops_informative_text(q, probs) {
        return Ok(f64::INFINITY);
    }
    let diffs = squared_differences(q);
    let g = pairwise_distances(q, 1.0)?;
    let mut total = 0.0;
    for_each_outcome(probs, n, |idx, p| {
        let err = estimate(&diffs, probs, idx) - &g.values;
        total += p * err.iter().map(|e| e * e).sum::<f64>();
    })?;
    Ok(total)
}

/// `E[||Q~ W Q~^T - Q Q^T||_F^2]` by enumeration; infinite for plans that never
/// draw an informative text.
pub fn ls_objective(q: &CenteredMatrix, probs: &[f64], n: usize) -> Result<f64> {
    if drops_informative_text(q, probs) {
        return Ok(f64::INFINITY);
    }
    let v = q.values();
    let k = q.n_models();
    let outer: Vec<Array2<f64>> = (0..q.n_texts())
        .map(|s| Array2::from_shape_fn((k, k), |(i, j)| v[[i, s]] * v[[j, s]]))
        .collect();
    let gram = v.dot(&v.t());
    let mut total = 0.0;
    for_each_outcome(probs, n, |idx, p| {
        let mut approx = Array2::<f64>::zeros((k, k));
        for &s in idx {
            approx.scaled_add(1.0 / (idx.len() as f64 * probs[s]), &outer[s]);
        }
        let err = approx - &gram;
        total += p * err.iter().map(|e| e * e).sum::<f64>();
    })?;
    Ok(total)
}

/// All points of the simplex with coordinates that are multiples of `1/steps`.
pub fn simplex_grid(n_texts: usize, steps: usize) -> Vec<Vec<usize>> {
    fn rec(remaining: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=remaining {
            prefix.push(first);
            rec(remaining - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(steps, n_texts, &mut Vec::with_capacity(n_texts), &mut out);
    out
}

fn simplex_search<F>(n_texts: usize, step: f64, exec: Execution, objective: F) -> Result<SimplexResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!("step must be in (0, 1], got {step}")));
    }
    if n_texts > 4 {
        return Err(Error::InvalidArgument(format!("simplex search needs N <= 4, got {n_texts}")));
    }
    let steps = (1.0 / step).round() as usize;
    let grid = simplex_grid(n_texts, steps);
    let to_probs = |c: &[usize]| c.iter().map(|&x| x as f64 / steps as f64).collect::<Vec<f64>>();
    let values = exec.map_range(grid.len(), |g| objective(&to_probs(&grid[g])));
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let (best, &best_objective) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is never empty");
    let best_point = &grid[best];
    let mut slack: f64 = 0.0;
    for from in 0..n_texts {
        for to in 0..n_texts {
            if from == to || best_point[from] == 0 {
                continue;
            }
            let mut nb = best_point.clone();
            nb[from] -= 1;
            nb[to] += 1;
            let v = objective(&to_probs(&nb))?;
            if v.is_finite() {
                slack = slack.max((v - best_objective).abs());
            }
        }
    }
    Ok(SimplexResult {
        best_probs: to_probs(best_point),
        best_objective,
        slack,
        grid_points: grid.len(),
    })
}

/// Grid minimum of the expected squared distance error over the simplex.
pub fn simplex_search_kl(q: &CenteredMatrix, n: usize, step: f64) -> Result<SimplexResult> {
    simplex_search(q.n_texts(), step, Execution::default(), |p| kl_objective(q, p, n))
}

/// Grid minimum of the expected Frobenius error of the Gram approximation.
pub fn simplex_search_ls(q: &CenteredMatrix, n: usize, step: f64) -> Result<SimplexResult> {
    simplex_search(q.n_texts(), step, Execution::default(), |p| ls_objective(q, p, n))
}

/// `E[d] = sum_s (1 - (1 - pi_s)^n)`.
pub fn expected_unique(plan: &SamplingPlan, n: usize) -> f64 {
    plan.probs().iter().map(|p| 1.0 - (1.0 - p).powi(n as i32)).sum()
}

/// Enumerated `E[sum_t w_t f(u_t)]`, using the weights assembled by
/// [`ResampleDraw::from_indices`].
pub fn horvitz_thompson_expectation(plan: &SamplingPlan, n: usize, f: &[f64]) -> Result<f64> {
    if f.len() != plan.n_texts() {
        return Err(Error::InvalidArgument("f must have one value per text".into()));
    }
    let mut total = 0.0;
    let mut failure = None;
    for_each_outcome(plan.probs(), n, |idx, p| match ResampleDraw::from_indices(plan, idx, 0) {
        Ok(d) => {
            let v: f64 = d.unique_indices.iter().zip(&d.weights).map(|(&s, w)| w * f[s]).sum();
            total += p * v;
        }
        Err(e) => failure = Some(e),
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Random doubly centered `k x n` matrix with entries of order one.
pub fn random_centered<R: Rng + ?Sized>(rng: &mut R, k: usize, n: usize) -> CenteredMatrix {
    let raw = Array2::from_shape_fn((k, n), |_| rng.random_range(-2.0..2.0));
    CenteredMatrix::from_array(double_center_values(raw.view())).expect("double centering yields a centered matrix")
}

/// Merges equal columns `a` and `b` of `q` into one column scaled by `sqrt(2)`
/// with probability `pi_a + pi_b`. When `pi_a = pi_b` the merged instance has the
/// same weighted-distance distribution as the original.
pub fn coalesce_columns(q: &CenteredMatrix, probs: &[f64], a: usize, b: usize) -> (Array2<f64>, Vec<f64>) {
    let keep: Vec<usize> = (0..q.n_texts()).filter(|&s| s != b).collect();
    let mut values = q.values().select(Axis(1), &keep);
    let merged_at = keep.iter().position(|&s| s == a).expect("a is kept");
    values.column_mut(merged_at).mapv_inplace(|v| v * std::f64::consts::SQRT_2);
    let merged = keep
        .iter()
        .map(|&s| if s == a { probs[a] + probs[b] } else { probs[s] })
        .collect();
    (values, merged)
}
