//! Bootstrap estimates of resampling and sampling error.
//!
//! For a plan and a draw size `n`, `R` independent resamples give distance
//! estimates `g~^(r)`. Their normalized deviations from the full-data distances
//! `g` are averaged over all `K^2` pairs and all replicates:
//!
//! ```text
//! tau_n^2   = 1/(K^2 R) sum_{i,j} sum_r e~_ij^(r)^2
//! kappa_m   = tau_{unif, m}                      (n-out-of-N bootstrap)
//! sigma_n   = sqrt(tau_{unif, N}^2 + tau_n^2)
//! ```
//!
//! Replicates are grouped in fixed blocks and reduced in block order, so the
//! numbers are identical under sequential and parallel execution.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Execution};
use crate::matrix::{pairwise_distances_with, CenteredMatrix, DistanceMatrix};
use crate::sampling::{
    draw_with, plan, plan_uniform, replicate_rng, weighted_center_q, weighted_distance_values, AliasTable,
    CenteringOptions, Method, SamplingPlan,
};

const REPLICATE_BLOCK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Normalization {
    /// Divide by `max(g_ij, epsilon0)`.
    #[default]
    Relative,
    /// Divide by the grand mean `C` of all `g_ij`.
    Absolute,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(Normalization::Relative),
            "absolute" => Ok(Normalization::Absolute),
            other => Err(Error::InvalidArgument(format!("unknown normalization {other:?}"))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Relative => "relative",
            Normalization::Absolute => "absolute",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorConfig {
    pub replicates: usize,
    pub epsilon0: f64,
    pub normalization: Normalization,
    pub base_seed: u64,
    pub centering: CenteringOptions,
    pub execution: Execution,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        Self {
            replicates: 100,
            epsilon0: 1e-3,
            normalization: Normalization::Relative,
            base_seed: 0,
            centering: CenteringOptions::default(),
            execution: Execution::default(),
        }
    }
}

impl ErrorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicate count R must be at least 1".into()));
        }
        if !(self.epsilon0 > 0.0) {
            return Err(Error::InvalidArgument("epsilon0 must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub method: Method,
    pub n: usize,
    pub replicates: usize,
    pub normalization: Normalization,
    /// `tau_ij,n^2`, the per-pair mean squared normalized error.
    pub per_pair_mse: Array2<f64>,
    pub tau_sq: f64,
    pub tau: f64,
    /// Standard error of `tau_sq` across replicates.
    pub tau_sq_se: f64,
    pub kappa_hat: Option<f64>,
    /// `sqrt(N / d) * kappa_N`.
    pub kappa_theory: Option<f64>,
    pub sigma_hat: Option<f64>,
    pub mean_d: f64,
    pub std_d: f64,
}

/// `(g~_ij - g_ij) / max(g_ij, epsilon0)`.
pub fn relative_errors(approx: &DistanceMatrix, exact: &DistanceMatrix, epsilon0: f64) -> Result<Array2<f64>> {
    check_shapes(approx, exact)?;
    let mut out = &approx.values - &exact.values;
    out.zip_mut_with(&exact.values, |e, &g| *e /= g.max(epsilon0));
    Ok(out)
}

/// `(g~_ij - g_ij) / C` with `C` the mean of all `K^2` entries of `g`.
pub fn absolute_errors(approx: &DistanceMatrix, exact: &DistanceMatrix) -> Result<Array2<f64>> {
    check_shapes(approx, exact)?;
    let c = grand_mean(exact);
    if !(c > 0.0) {
        return Err(Error::DegenerateDistances);
    }
    Ok((&approx.values - &exact.values) / c)
}

fn grand_mean(g: &DistanceMatrix) -> f64 {
    g.values.iter().sum::<f64>() / g.values.len() as f64
}

fn check_shapes(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<()> {
    if a.values.dim() != b.values.dim() {
        return Err(Error::InvalidArgument(format!(
            "distance shapes differ: {:?} vs {:?}",
            a.values.dim(),
            b.values.dim()
        )));
    }
    Ok(())
}

/// `sqrt(tau_{unif,N}^2 + tau_{method,n}^2)`.
pub fn sigma_hat(tau_method_n: f64, tau_unif_full: f64) -> f64 {
    tau_method_n.hypot(tau_unif_full)
}

/// `sqrt(N / d) * kappa_N`.
pub fn theoretical_kappa(kappa_full: f64, n_texts: usize, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    Ok((n_texts as f64 / d as f64).sqrt() * kappa_full)
}

/// `{10, 20, ..., 100, 200, ..., 1000, 2000, ..., 10000}`.
pub fn default_n_grid() -> Vec<usize> {
    let mut grid = Vec::new();
    for decade in [10, 100, 1000] {
        let start = if decade == 10 { 1 } else { 2 };
        grid.extend((start..=10).map(|k| k * decade));
    }
    grid
}

/// Outcome of the smallest-`n` search.
#[derive(Debug, Clone, PartialEq)]
pub enum MinN {
    Reached(ErrorReport),
    /// No grid point satisfied `sigma <= kappa_m`.
    NotReached { kappa_hat: f64, tau_unif_full: f64 },
}

struct BlockSum {
    sq_err: Array2<f64>,
    replicate_means: Vec<f64>,
    unique_counts: Vec<usize>,
}

/// Error estimator bound to one centered matrix. Caches `g`, its grand mean
/// and `tau_{unif,N}` for the matrix digest.
pub struct Bootstrap<'a> {
    q: &'a CenteredMatrix,
    exact: DistanceMatrix,
    grand_mean: f64,
    digest: String,
    cfg: ErrorConfig,
    tau_unif_full: OnceLock<f64>,
}

impl<'a> Bootstrap<'a> {
    pub fn new(q: &'a CenteredMatrix, cfg: ErrorConfig) -> Result<Self> {
        cfg.validate()?;
        let exact = pairwise_distances_with(q, 1.0, cfg.execution)?;
        let grand_mean = grand_mean(&exact);
        if cfg.normalization == Normalization::Absolute && !(grand_mean > 0.0) {
            return Err(Error::DegenerateDistances);
        }
        Ok(Self {
            q,
            exact,
            grand_mean,
            digest: q.digest(),
            cfg,
            tau_unif_full: OnceLock::new(),
        })
    }

    pub fn exact_distances(&self) -> &DistanceMatrix {
        &self.exact
    }

    pub fn config(&self) -> &ErrorConfig {
        &self.cfg
    }

    /// Digest of the matrix the cached values belong to.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Runs `R` resamples of size `n` under `plan` and aggregates the normalized errors.
    pub fn resampling_mse(&self, plan: &SamplingPlan, n: usize) -> Result<ErrorReport> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if plan.n_texts() != self.q.n_texts() {
            return Err(Error::InvalidArgument("plan and matrix disagree on N".into()));
        }
        let table = AliasTable::new(plan);
        let r_total = self.cfg.replicates;
        let k = self.q.n_models();
        let n_blocks = r_total.div_ceil(REPLICATE_BLOCK);
        let blocks = self.cfg.execution.map_range(n_blocks, |b| {
            let start = b * REPLICATE_BLOCK;
            let end = (start + REPLICATE_BLOCK).min(r_total);
            let mut acc = BlockSum {
                sq_err: Array2::zeros((k, k)),
                replicate_means: Vec::with_capacity(end - start),
                unique_counts: Vec::with_capacity(end - start),
            };
            for r in start..end {
                let (sq, d) = self.replicate(plan, &table, n, r as u64)?;
                acc.replicate_means.push(sq.iter().sum::<f64>() / (k * k) as f64);
                acc.unique_counts.push(d);
                acc.sq_err += &sq;
            }
            Ok::<_, Error>(acc)
        });
        let mut sq_err = Array2::<f64>::zeros((k, k));
        let mut means = Vec::with_capacity(r_total);
        let mut ds = Vec::with_capacity(r_total);
        for block in blocks {
            let block = block?;
            sq_err += &block.sq_err;
            means.extend(block.replicate_means);
            ds.extend(block.unique_counts.into_iter().map(|d| d as f64));
        }
        let r = r_total as f64;
        let per_pair_mse = sq_err / r;
        let tau_sq = pairwise_sum(&means) / r;
        let tau_sq_se = if r_total > 1 {
            let var = means.iter().map(|m| (m - tau_sq).powi(2)).sum::<f64>() / (r - 1.0);
            (var / r).sqrt()
        } else {
            0.0
        };
        let (mean_d, std_d) = mean_std(&ds);
        Ok(ErrorReport {
            method: plan.method(),
            n,
            replicates: r_total,
            normalization: self.cfg.normalization,
            per_pair_mse,
            tau_sq,
            tau: tau_sq.sqrt(),
            tau_sq_se,
            kappa_hat: None,
            kappa_theory: None,
            sigma_hat: None,
            mean_d,
            std_d,
        })
    }

    fn replicate(&self, plan: &SamplingPlan, table: &AliasTable, n: usize, index: u64) -> Result<(Array2<f64>, usize)> {
        let mut rng = replicate_rng(self.cfg.base_seed, index);
        let draw = draw_with(plan, table, n, &mut rng, self.cfg.base_seed)?;
        let coords = weighted_center_q(self.q, &draw, self.cfg.centering)?;
        let approx = weighted_distance_values(coords.values.view(), &coords.weights, Execution::Sequential);
        let mut err = &approx.values - &self.exact.values;
        match self.cfg.normalization {
            Normalization::Relative => {
                let eps = self.cfg.epsilon0;
                err.zip_mut_with(&self.exact.values, |e, &g| *e /= g.max(eps));
            }
            Normalization::Absolute => err /= self.grand_mean,
        }
        err.mapv_inplace(|e| e * e);
        Ok((err, draw.unique_count()))
    }

    /// `kappa_m = tau_{unif,m}`.
    pub fn kappa_hat(&self, m: usize) -> Result<f64> {
        if m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if m == self.q.n_texts() {
            return self.tau_unif_full();
        }
        Ok(self.resampling_mse(&plan_uniform(self.q), m)?.tau)
    }

    /// `tau_{unif,N}`, computed once.
    pub fn tau_unif_full(&self) -> Result<f64> {
        if let Some(v) = self.tau_unif_full.get() {
            return Ok(*v);
        }
        let v = self.resampling_mse(&plan_uniform(self.q), self.q.n_texts())?.tau;
        Ok(*self.tau_unif_full.get_or_init(|| v))
    }

    /// Resampling error at `n` with `sigma_hat`, the bootstrap `kappa_hat` at
    /// `d = round(mean_d)` and its theoretical counterpart filled in.
    pub fn error_at(&self, plan: &SamplingPlan, n: usize) -> Result<ErrorReport> {
        let mut report = self.resampling_mse(plan, n)?;
        let tau_full = self.tau_unif_full()?;
        let d = (report.mean_d.round() as usize).max(1);
        report.sigma_hat = Some(sigma_hat(report.tau, tau_full));
        report.kappa_hat = Some(self.kappa_hat(d)?);
        report.kappa_theory = Some(theoretical_kappa(tau_full, self.q.n_texts(), d)?);
        Ok(report)
    }

    pub fn sweep(&self, method: Method, n_grid: &[usize]) -> Result<Vec<ErrorReport>> {
        let p = plan(method, self.q)?;
        n_grid.iter().map(|&n| self.error_at(&p, n)).collect()
    }

    /// Smallest `n` in `n_grid` whose `sigma_hat` does not exceed `kappa_m`.
    pub fn find_min_n(&self, method: Method, m: usize, n_grid: &[usize]) -> Result<MinN> {
        if n_grid.is_empty() {
            return Err(Error::InvalidArgument("empty n grid".into()));
        }
        if n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("n grid must be strictly ascending".into()));
        }
        let p = plan(method, self.q)?;
        let kappa = self.kappa_hat(m)?;
        let tau_full = self.tau_unif_full()?;
        for &n in n_grid {
            let mut report = self.resampling_mse(&p, n)?;
            let sigma = sigma_hat(report.tau, tau_full);
            if sigma <= kappa {
                report.sigma_hat = Some(sigma);
                report.kappa_hat = Some(kappa);
                return Ok(MinN::Reached(report));
            }
        }
        Ok(MinN::NotReached {
            kappa_hat: kappa,
            tau_unif_full: tau_full,
        })
    }
}

/// Mean and population standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn resampling_mse(q: &CenteredMatrix, plan: &SamplingPlan, n: usize, cfg: ErrorConfig) -> Result<ErrorReport> {
    Bootstrap::new(q, cfg)?.resampling_mse(plan, n)
}

pub fn kappa_hat(q: &CenteredMatrix, m: usize, cfg: ErrorConfig) -> Result<f64> {
    Bootstrap::new(q, cfg)?.kappa_hat(m)
}

pub fn find_min_n(q: &CenteredMatrix, method: Method, m: usize, cfg: ErrorConfig, n_grid: &[usize]) -> Result<MinN> {
    Bootstrap::new(q, cfg)?.find_min_n(method, m, n_grid)
}
