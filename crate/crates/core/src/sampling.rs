//! Importance resampling of texts.
//!
//! A [`SamplingPlan`] assigns each text a probability. Drawing `n` texts with
//! replacement yields a [`ResampleDraw`]: the `d` unique texts in ascending
//! order, how often each was drawn, and the inverse-probability weights
//! `w_t = c(u_t) / (n * pi_{u_t})`. The weighted coordinates of the unique texts
//! and their weighted distances estimate the full-data distances.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::matrix::{row_distances, CenteredMatrix, DistanceKind, DistanceMatrix, LikelihoodMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Uniform,
    Ls,
    Kl,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Uniform, Method::Ls, Method::Kl];

    pub fn name(self) -> &'static str {
        match self {
            Method::Uniform => "uniform",
            Method::Ls => "ls",
            Method::Kl => "kl",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "unif" => Ok(Method::Uniform),
            "ls" | "length-squared" => Ok(Method::Ls),
            "kl" => Ok(Method::Kl),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// Resampling probabilities over the `N` texts of a centered matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    method: Method,
    probs: Vec<f64>,
    source_hash: String,
}

impl SamplingPlan {
    /// Builds a plan from explicit probabilities, which must be non-negative and sum to 1.
    pub fn from_probs(method: Method, probs: Vec<f64>, source_hash: impl Into<String>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPlan("no texts".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidPlan("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPlan(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            method,
            probs,
            source_hash: source_hash.into(),
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }

    pub fn n_texts(&self) -> usize {
        self.probs.len()
    }

    /// Indices with non-zero probability.
    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&s| self.probs[s] > 0.0).collect()
    }
}

pub fn plan_uniform(q: &CenteredMatrix) -> SamplingPlan {
    let n = q.n_texts();
    SamplingPlan {
        method: Method::Uniform,
        probs: vec![1.0 / n as f64; n],
        source_hash: q.digest(),
    }
}

/// `pi_s` proportional to the squared norm of column `s`.
pub fn plan_ls(q: &CenteredMatrix) -> Result<SamplingPlan> {
    let mut scores = vec![0.0; q.n_texts()];
    for row in q.values().outer_iter() {
        for (acc, v) in scores.iter_mut().zip(row.iter()) {
            *acc += v * v;
        }
    }
    normalized_plan(Method::Ls, scores, q)
}

/// `pi_s` proportional to `sqrt(sum_{i,j} (q_i(s) - q_j(s))^4)`.
///
/// The double sum is expanded in power sums of the column,
/// `2K S4 - 8 S1 S3 + 6 S2^2`, so the cost is `O(KN)`.
pub fn plan_kl(q: &CenteredMatrix) -> Result<SamplingPlan> {
    let n = q.n_texts();
    let k = q.n_models() as f64;
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let mut s3 = vec![0.0; n];
    let mut s4 = vec![0.0; n];
    for row in q.values().outer_iter() {
        for (s, &v) in row.iter().enumerate() {
            let v2 = v * v;
            s1[s] += v;
            s2[s] += v2;
            s3[s] += v2 * v;
            s4[s] += v2 * v2;
        }
    }
    let scores = (0..n)
        .map(|s| {
            let fourth = 2.0 * k * s4[s] - 8.0 * s1[s] * s3[s] + 6.0 * s2[s] * s2[s];
            fourth.max(0.0).sqrt()
        })
        .collect();
    normalized_plan(Method::Kl, scores, q)
}

pub fn plan(method: Method, q: &CenteredMatrix) -> Result<SamplingPlan> {
    match method {
        Method::Uniform => Ok(plan_uniform(q)),
        Method::Ls => plan_ls(q),
        Method::Kl => plan_kl(q),
    }
}

fn normalized_plan(method: Method, scores: Vec<f64>, q: &CenteredMatrix) -> Result<SamplingPlan> {
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateMatrix("every column of Q is zero".into()));
    }
    Ok(SamplingPlan {
        method,
        probs: scores.into_iter().map(|s| s / total).collect(),
        source_hash: q.digest(),
    })
}

/// Vose alias table over the support of a plan. Zero-probability texts are
/// left out of the table, so they can never be drawn.
#[derive(Debug, Clone)]
pub struct AliasTable {
    support: Vec<usize>,
    accept: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    pub fn new(plan: &SamplingPlan) -> Self {
        let support = plan.support();
        let m = support.len();
        let total: f64 = support.iter().map(|&s| plan.probs[s]).sum();
        let mut scaled: Vec<f64> = support.iter().map(|&s| plan.probs[s] * m as f64 / total).collect();
        let mut accept = vec![1.0; m];
        let mut alias: Vec<usize> = (0..m).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| scaled[i] < 1.0);
        while let (Some(l), Some(g)) = (small.pop(), large.pop()) {
            accept[l] = scaled[l];
            alias[l] = g;
            scaled[g] = (scaled[g] + scaled[l]) - 1.0;
            if scaled[g] < 1.0 {
                small.push(g);
            } else {
                large.push(g);
            }
        }
        // leftovers are 1 up to rounding
        for i in small.into_iter().chain(large) {
            accept[i] = 1.0;
        }
        Self { support, accept, alias }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let column = rng.random_range(0..self.support.len());
        let u: f64 = rng.random();
        let slot = if u < self.accept[column] { column } else { self.alias[column] };
        self.support[slot]
    }
}

/// Deterministic generator for replicate `index` under `base_seed`.
/// Each replicate reads its own ChaCha stream, so results do not depend on
/// which thread runs which replicate.
pub fn replicate_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

/// One with-replacement resample of `n` texts.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleDraw {
    pub n: usize,
    /// Size `N` of the text set the plan was defined on.
    pub population: usize,
    pub unique_indices: Vec<usize>,
    pub counts: Vec<usize>,
    /// Plan probabilities of the unique texts.
    pub probs: Vec<f64>,
    /// `c(u_t) / (n * pi_{u_t})`.
    pub weights: Vec<f64>,
    pub seed: u64,
}

impl ResampleDraw {
    /// Assembles a draw from the raw sequence of drawn indices.
    pub fn from_indices(plan: &SamplingPlan, indices: &[usize], seed: u64) -> Result<Self> {
        let n = indices.len();
        if n == 0 {
            return Err(Error::InvalidArgument("draw size must be at least 1".into()));
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        let mut unique_indices = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for s in sorted {
            if unique_indices.last() == Some(&s) {
                *counts.last_mut().unwrap() += 1;
            } else {
                if s >= plan.n_texts() || plan.probs[s] <= 0.0 {
                    return Err(Error::InvalidPlan(format!("text {s} has zero probability")));
                }
                unique_indices.push(s);
                counts.push(1);
            }
        }
        let probs: Vec<f64> = unique_indices.iter().map(|&s| plan.probs[s]).collect();
        let weights = counts
            .iter()
            .zip(&probs)
            .map(|(&c, &p)| c as f64 / (n as f64 * p))
            .collect();
        Ok(Self {
            n,
            population: plan.n_texts(),
            unique_indices,
            counts,
            probs,
            weights,
            seed,
        })
    }

    /// Number of unique texts `d`.
    pub fn unique_count(&self) -> usize {
        self.unique_indices.len()
    }

    /// Per-text weights under the chosen duplicate handling.
    pub fn effective_weights(&self, weighting: Weighting) -> Vec<f64> {
        match weighting {
            Weighting::Weighted => self.weights.clone(),
            Weighting::UnweightedDuplicates => {
                let d = self.unique_count() as f64;
                self.probs.iter().map(|p| 1.0 / (d * p)).collect()
            }
        }
    }
}

/// Draws `n` texts with replacement from `plan` using a generator seeded by `seed`.
pub fn draw(plan: &SamplingPlan, n: usize, seed: u64) -> Result<ResampleDraw> {
    let table = AliasTable::new(plan);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_with(plan, &table, n, &mut rng, seed)
}

pub fn draw_with<R: Rng + ?Sized>(
    plan: &SamplingPlan,
    table: &AliasTable,
    n: usize,
    rng: &mut R,
    seed: u64,
) -> Result<ResampleDraw> {
    if n == 0 {
        return Err(Error::InvalidArgument("draw size must be at least 1".into()));
    }
    let indices: Vec<usize> = (0..n).map(|_| table.sample(rng)).collect();
    ResampleDraw::from_indices(plan, &indices, seed)
}

/// How duplicate draws enter the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Weighting {
    /// `w_t = c(u_t) / (n pi_{u_t})`.
    #[default]
    Weighted,
    /// Duplicates ignored: `w_t = 1 / (d pi_{u_t})`, i.e. `N/d` for a uniform plan.
    UnweightedDuplicates,
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted" => Ok(Weighting::Weighted),
            "unweighted-duplicates" | "unweighted" => Ok(Weighting::UnweightedDuplicates),
            other => Err(Error::InvalidArgument(format!("unknown weighting {other:?}"))),
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Weighted => "weighted",
            Weighting::UnweightedDuplicates => "unweighted-duplicates",
        })
    }
}

/// Weighted mean used for row-wise centering of resampled columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RowCentering {
    /// `sum_t w_t x_t / sum_t w_t`.
    #[default]
    SelfNormalized,
    /// `sum_t w_t x_t / N`.
    HorvitzThompson,
}

impl FromStr for RowCentering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self-normalized" => Ok(RowCentering::SelfNormalized),
            "horvitz-thompson" => Ok(RowCentering::HorvitzThompson),
            other => Err(Error::InvalidArgument(format!("unknown row centering {other:?}"))),
        }
    }
}

impl fmt::Display for RowCentering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowCentering::SelfNormalized => "self-normalized",
            RowCentering::HorvitzThompson => "horvitz-thompson",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CenteringOptions {
    pub weighting: Weighting,
    pub row_centering: RowCentering,
}

/// Resampled coordinates `Q~_d` (K x d) with their per-text weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCoordinates {
    pub values: Array2<f64>,
    pub weights: Vec<f64>,
    pub draw: ResampleDraw,
    pub model_ids: Vec<String>,
    pub text_ids: Vec<String>,
}

impl WeightedCoordinates {
    /// Columns of an already centered `Q` taken as-is, without re-centering.
    /// This is the setting in which the weighted distance is exactly unbiased.
    pub fn from_centered_columns(q: &CenteredMatrix, draw: &ResampleDraw) -> Self {
        let values = q.values().select(Axis(1), &draw.unique_indices);
        Self {
            values,
            weights: draw.weights.clone(),
            draw: draw.clone(),
            model_ids: q.model_ids().to_vec(),
            text_ids: draw.unique_indices.iter().map(|&s| q.text_ids()[s].clone()).collect(),
        }
    }

    pub fn n_models(&self) -> usize {
        self.values.nrows()
    }
}

/// Weighted double centering of the `K x d` columns of the unique resampled texts.
///
/// Rows are centered by a weighted mean (see [`RowCentering`]); columns are then
/// centered by their plain mean over models.
pub fn weighted_center_values(
    columns: ArrayView2<'_, f64>,
    draw: &ResampleDraw,
    opts: CenteringOptions,
) -> Result<(Array2<f64>, Vec<f64>)> {
    let d = draw.unique_count();
    if columns.ncols() != d {
        return Err(Error::InvalidArgument(format!(
            "{} columns supplied for a draw with {d} unique texts",
            columns.ncols()
        )));
    }
    let weights = draw.effective_weights(opts.weighting);
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateDraw);
    }
    let denom = match opts.row_centering {
        RowCentering::SelfNormalized => total,
        RowCentering::HorvitzThompson => draw.population as f64,
    };
    let mut out = columns.as_standard_layout().into_owned();
    for mut row in out.rows_mut() {
        let mean = row.iter().zip(&weights).map(|(x, w)| w * x).sum::<f64>() / denom;
        row -= mean;
    }
    let col_means = out.mean_axis(Axis(0)).expect("at least one model");
    for mut row in out.rows_mut() {
        row -= &col_means;
    }
    Ok((out, weights))
}

/// Weighted centering of the resampled texts of a full likelihood matrix.
pub fn weighted_center(
    l: &LikelihoodMatrix,
    draw: &ResampleDraw,
    opts: CenteringOptions,
) -> Result<WeightedCoordinates> {
    check_population(l.n_texts(), draw)?;
    let sub = l.select_texts(&draw.unique_indices)?;
    let (values, weights) = weighted_center_values(sub.values(), draw, opts)?;
    Ok(WeightedCoordinates {
        values,
        weights,
        draw: draw.clone(),
        model_ids: sub.model_ids().to_vec(),
        text_ids: sub.text_ids().to_vec(),
    })
}

/// Same as [`weighted_center`] but starting from `Q`. Re-centering removes the
/// row and column offsets that separate `Q` from `L`, so both give the same result
/// up to rounding.
pub fn weighted_center_q(
    q: &CenteredMatrix,
    draw: &ResampleDraw,
    opts: CenteringOptions,
) -> Result<WeightedCoordinates> {
    check_population(q.n_texts(), draw)?;
    let columns = q.values().select(Axis(1), &draw.unique_indices);
    let (values, weights) = weighted_center_values(columns.view(), draw, opts)?;
    Ok(WeightedCoordinates {
        values,
        weights,
        draw: draw.clone(),
        model_ids: q.model_ids().to_vec(),
        text_ids: draw.unique_indices.iter().map(|&s| q.text_ids()[s].clone()).collect(),
    })
}

fn check_population(n_texts: usize, draw: &ResampleDraw) -> Result<()> {
    if n_texts != draw.population {
        return Err(Error::InvalidArgument(format!(
            "matrix has {n_texts} texts, draw was made over {}",
            draw.population
        )));
    }
    Ok(())
}

/// `g~_ij = sum_t w_t (q~_i(u_t) - q~_j(u_t))^2`.
pub fn weighted_distance(w: &WeightedCoordinates) -> DistanceMatrix {
    weighted_distance_with(w, Execution::default())
}

pub fn weighted_distance_with(w: &WeightedCoordinates, exec: Execution) -> DistanceMatrix {
    weighted_distance_values(w.values.view(), &w.weights, exec)
}

pub(crate) fn weighted_distance_values(
    values: ArrayView2<'_, f64>,
    weights: &[f64],
    exec: Execution,
) -> DistanceMatrix {
    let values = row_distances(values, exec, |a, b| {
        a.iter()
            .zip(b)
            .zip(weights)
            .map(|((x, y), w)| w * (x - y) * (x - y))
            .sum()
    });
    DistanceMatrix {
        values,
        scale: 1.0,
        kind: DistanceKind::Resampled,
    }
}
