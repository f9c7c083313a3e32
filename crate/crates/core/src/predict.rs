//! Ridge prediction of downstream scores from resampled map coordinates.
//!
//! Features are `Q~_d W_d^{1/2}`. The ridge objective has no intercept. Models are
//! split into outer folds by group label, and the ridge penalty is chosen by an
//! inner contiguous k-fold on each training set.

use std::collections::BTreeSet;
use std::io::BufRead;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::io::{parse_f64, split_line};
use crate::sampling::WeightedCoordinates;

/// Downstream scores, one row per model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub model_ids: Vec<String>,
    pub task_names: Vec<String>,
    pub scores: Array2<f64>,
    pub group_labels: Vec<String>,
}

impl ScoreTable {
    pub fn new(
        model_ids: Vec<String>,
        task_names: Vec<String>,
        scores: Array2<f64>,
        group_labels: Vec<String>,
    ) -> Result<Self> {
        let k = model_ids.len();
        if scores.dim() != (k, task_names.len()) || group_labels.len() != k {
            return Err(Error::InvalidArgument(format!(
                "score table of shape {:?} for {k} models, {} tasks and {} groups",
                scores.dim(),
                task_names.len(),
                group_labels.len()
            )));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("missing or non-finite score".into()));
        }
        Ok(Self {
            model_ids,
            task_names,
            scores,
            group_labels,
        })
    }

    /// Reads `model_id,group,<task...>` rows. Lines starting with `#` are skipped.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut tasks: Option<Vec<String>> = None;
        let (mut ids, mut groups, mut data) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let row = lineno + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cells = split_line(&line);
            match &tasks {
                None => {
                    if cells.len() < 3 {
                        return Err(Error::Parse {
                            row,
                            col: cells.len(),
                            msg: "header needs model_id, group and at least one task".into(),
                        });
                    }
                    tasks = Some(cells[2..].iter().map(|s| s.to_string()).collect());
                }
                Some(t) => {
                    if cells.len() != t.len() + 2 {
                        return Err(Error::Parse {
                            row,
                            col: cells.len(),
                            msg: format!("expected {} cells, found {}", t.len() + 2, cells.len()),
                        });
                    }
                    ids.push(cells[0].to_string());
                    groups.push(cells[1].to_string());
                    for (c, cell) in cells[2..].iter().enumerate() {
                        data.push(parse_f64(cell, row, c + 3)?);
                    }
                }
            }
        }
        let tasks = tasks.ok_or_else(|| Error::Parse {
            row: 0,
            col: 0,
            msg: "missing header".into(),
        })?;
        let scores = Array2::from_shape_vec((ids.len(), tasks.len()), data)
            .map_err(|e| Error::CorruptFile(e.to_string()))?;
        Self::new(ids, tasks, scores, groups)
    }

    pub fn task(&self, name: &str) -> Result<ArrayView1<'_, f64>> {
        let t = self
            .task_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown task {name:?}")))?;
        Ok(self.scores.column(t))
    }

    /// Rows reordered to follow `model_ids`.
    pub fn aligned_to(&self, model_ids: &[String]) -> Result<Self> {
        let rows = model_ids
            .iter()
            .map(|id| {
                self.model_ids
                    .iter()
                    .position(|m| m == id)
                    .ok_or_else(|| Error::InvalidArgument(format!("no scores for model {id:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model_ids: model_ids.to_vec(),
            task_names: self.task_names.clone(),
            scores: self.scores.select(Axis(0), &rows),
            group_labels: rows.iter().map(|&r| self.group_labels[r].clone()).collect(),
        })
    }
}

/// Column `t` of `Q~_d` multiplied by `sqrt(w_t)`.
pub fn feature_matrix(wc: &WeightedCoordinates) -> Array2<f64> {
    let scale = Array1::from_iter(wc.weights.iter().map(|w| w.sqrt()));
    &wc.values * &scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolvePath {
    /// Dual when `d > K`, primal otherwise.
    #[default]
    Auto,
    Primal,
    Dual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub theta: Array1<f64>,
    pub alpha: f64,
    /// `sqrt(w)` per column when fitted from weighted coordinates.
    pub feature_scaling: Option<Vec<f64>>,
}

impl RidgeFit {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.dot(&self.theta)
    }
}

pub fn ridge_fit(x: ArrayView2<'_, f64>, f: ArrayView1<'_, f64>, alpha: f64) -> Result<RidgeFit> {
    ridge_fit_with(x, f, alpha, SolvePath::Auto)
}

pub fn ridge_fit_with(x: ArrayView2<'_, f64>, f: ArrayView1<'_, f64>, alpha: f64, path: SolvePath) -> Result<RidgeFit> {
    let (k, d) = x.dim();
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if f.len() != k {
        return Err(Error::InvalidArgument(format!("{} targets for {k} rows", f.len())));
    }
    if x.iter().chain(f.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite ridge input".into()));
    }
    let xn = DMatrix::from_fn(k, d, |i, j| x[[i, j]]);
    let fv = DVector::from_iterator(k, f.iter().copied());
    let dual = match path {
        SolvePath::Auto => d > k,
        SolvePath::Primal => false,
        SolvePath::Dual => true,
    };
    let theta = if dual {
        let gram = &xn * xn.transpose() + DMatrix::identity(k, k) * alpha;
        let a = spd_solve(gram, fv)?;
        xn.transpose() * a
    } else {
        let gram = xn.transpose() * &xn + DMatrix::identity(d, d) * alpha;
        spd_solve(gram, xn.transpose() * fv)?
    };
    Ok(RidgeFit {
        theta: Array1::from_iter(theta.iter().copied()),
        alpha,
        feature_scaling: None,
    })
}

fn spd_solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    match a.clone().cholesky() {
        Some(c) => Ok(c.solve(&b)),
        // rounding can break positive definiteness when alpha is tiny
        None => a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::DegenerateMatrix("ridge system is singular".into())),
    }
}

/// Fits on `Q~_d W_d^{1/2}` and records the scaling.
pub fn ridge_fit_weighted(wc: &WeightedCoordinates, f: ArrayView1<'_, f64>, alpha: f64) -> Result<RidgeFit> {
    let x = feature_matrix(wc);
    let mut fit = ridge_fit(x.view(), f, alpha)?;
    fit.feature_scaling = Some(wc.weights.iter().map(|w| w.sqrt()).collect());
    Ok(fit)
}

/// Sample correlation coefficient.
pub fn pearson_r(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pearson_r needs two equal-length vectors of length >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let ma = a.mean().expect("non-empty");
    let mb = b.mean().expect("non-empty");
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Outer fold per model: distinct groups are sorted, shuffled with `seed`, and
/// dealt round-robin to `k` folds.
pub fn group_folds(groups: &[String], k: usize, seed: u64) -> Result<Vec<usize>> {
    let distinct: Vec<&String> = groups.iter().collect::<BTreeSet<_>>().into_iter().collect();
    if k < 2 || distinct.len() < k {
        return Err(Error::InvalidFolds(format!("{} groups for {k} folds", distinct.len())));
    }
    let mut order = distinct;
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(groups
        .iter()
        .map(|g| order.iter().position(|o| *o == g).expect("group listed") % k)
        .collect())
}

/// Contiguous k-fold split of `0..n`; the first `n % k` folds get one extra row.
fn contiguous_folds(n: usize, k: usize) -> Vec<std::ops::Range<usize>> {
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub seeds: Vec<u64>,
    pub alpha_grid: Vec<f64>,
    pub clip: Option<(f64, f64)>,
    pub execution: Execution,
}

impl CvConfig {
    /// Benchmark scores: alpha in `1e1..=1e9`, predictions clipped to `[0, 100]`.
    pub fn benchmark() -> Self {
        Self {
            alpha_grid: (1..=9).map(|e| 10f64.powi(e)).collect(),
            clip: Some((0.0, 100.0)),
            ..Self::log_likelihood()
        }
    }

    /// Mean log-likelihood target: alpha in `1e-4..=1e4`, no clipping.
    pub fn log_likelihood() -> Self {
        Self {
            outer_folds: 5,
            inner_folds: 5,
            seeds: (0..5).collect(),
            alpha_grid: (-4..=4).map(|e| 10f64.powi(e)).collect(),
            clip: None,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub task: String,
    /// Out-of-fold predictions, one vector per seed.
    pub predictions: Vec<Array1<f64>>,
    pub r_per_seed: Vec<f64>,
    pub r_mean: f64,
    /// Population standard deviation over seeds.
    pub r_std: f64,
    /// Selected alpha per seed and outer fold.
    pub alphas: Vec<Vec<f64>>,
}

fn select_alpha(x: ArrayView2<'_, f64>, f: ArrayView1<'_, f64>, cfg: &CvConfig) -> Result<f64> {
    let n = x.nrows();
    if n < cfg.inner_folds || cfg.inner_folds < 2 {
        return Err(Error::InvalidFolds(format!("{n} training models for {} inner folds", cfg.inner_folds)));
    }
    let folds = contiguous_folds(n, cfg.inner_folds);
    let mut best = (f64::INFINITY, cfg.alpha_grid[0]);
    for &alpha in &cfg.alpha_grid {
        let mut total = 0.0;
        for val in &folds {
            let train: Vec<usize> = (0..n).filter(|i| !val.contains(i)).collect();
            let fit = ridge_fit(x.select(Axis(0), &train).view(), f.select(Axis(0), &train).view(), alpha)?;
            let pred = fit.predict(x.slice(ndarray::s![val.clone(), ..]));
            let mse = pred
                .iter()
                .zip(f.slice(ndarray::s![val.clone()]))
                .map(|(p, t)| (p - t).powi(2))
                .sum::<f64>()
                / val.len() as f64;
            total += mse;
        }
        let mean = total / folds.len() as f64;
        if mean < best.0 {
            best = (mean, alpha);
        }
    }
    Ok(best.1)
}

fn one_seed(
    x: ArrayView2<'_, f64>,
    f: ArrayView1<'_, f64>,
    groups: &[String],
    seed: u64,
    cfg: &CvConfig,
) -> Result<(Array1<f64>, Vec<f64>, f64)> {
    let fold_of = group_folds(groups, cfg.outer_folds, seed)?;
    let mut pred = Array1::zeros(f.len());
    let mut alphas = Vec::with_capacity(cfg.outer_folds);
    for fold in 0..cfg.outer_folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..f.len()).partition(|&i| fold_of[i] == fold);
        let xt = x.select(Axis(0), &train);
        let ft = f.select(Axis(0), &train);
        let alpha = select_alpha(xt.view(), ft.view(), cfg)?;
        let fit = ridge_fit(xt.view(), ft.view(), alpha)?;
        let p = fit.predict(x.select(Axis(0), &test).view());
        for (&i, v) in test.iter().zip(p) {
            pred[i] = match cfg.clip {
                Some((lo, hi)) => v.clamp(lo, hi),
                None => v,
            };
        }
        alphas.push(alpha);
    }
    let r = pearson_r(pred.view(), f)?;
    Ok((pred, alphas, r))
}

/// Nested cross-validated predictions of `f` from features `x`, repeated per seed.
pub fn nested_cv(x: ArrayView2<'_, f64>, f: ArrayView1<'_, f64>, groups: &[String], cfg: &CvConfig) -> Result<CvResult> {
    if cfg.alpha_grid.is_empty() || cfg.alpha_grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidArgument("alpha grid must be non-empty and positive".into()));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    if x.nrows() != f.len() || groups.len() != f.len() {
        return Err(Error::InvalidArgument("features, targets and groups differ in length".into()));
    }
    let runs = cfg
        .execution
        .map_range(cfg.seeds.len(), |s| one_seed(x, f, groups, cfg.seeds[s], cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let r_per_seed: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let m = r_per_seed.len() as f64;
    let r_mean = r_per_seed.iter().sum::<f64>() / m;
    let r_std = (r_per_seed.iter().map(|r| (r - r_mean).powi(2)).sum::<f64>() / m).sqrt();
    let (predictions, alphas) = runs.into_iter().map(|(p, a, _)| (p, a)).unzip();
    Ok(CvResult {
        task: String::new(),
        predictions,
        r_per_seed,
        r_mean,
        r_std,
        alphas,
    })
}

/// Runs [`nested_cv`] for one task of a score table whose rows follow `x`.
pub fn nested_cv_predict(x: ArrayView2<'_, f64>, scores: &ScoreTable, task: &str, cfg: &CvConfig) -> Result<CvResult> {
    let f = scores.task(task)?;
    let mut res = nested_cv(x, f, &scores.group_labels, cfg)?;
    res.task = task.to_string();
    Ok(res)
}
