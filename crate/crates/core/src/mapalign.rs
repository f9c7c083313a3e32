//! Stability of 2-D model maps across resampling trials.
//!
//! Each trial's embedding is centered and rotated (or reflected) onto a
//! reference by orthogonal Procrustes. Per-model scatter across the aligned
//! trials is then summarized by a 1-standard-deviation ellipse.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::matrix::{apply_threshold, LikelihoodMatrix};
use crate::sampling::{weighted_center_values, CenteringOptions, ResampleDraw, WeightedCoordinates};

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding2D {
    /// `K x 2` map coordinates.
    pub coords: Array2<f64>,
    pub model_ids: Vec<String>,
    pub trial_id: String,
}

impl Embedding2D {
    pub fn new(coords: Array2<f64>, model_ids: Vec<String>, trial_id: impl Into<String>) -> Result<Self> {
        if coords.ncols() != 2 || coords.nrows() != model_ids.len() {
            return Err(Error::InvalidArgument(format!(
                "embedding of shape {:?} for {} models",
                coords.dim(),
                model_ids.len()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite map coordinate".into()));
        }
        Ok(Self {
            coords,
            model_ids,
            trial_id: trial_id.into(),
        })
    }

    /// Copy with the mean point subtracted.
    pub fn centered(&self) -> Self {
        let mean = self.coords.mean_axis(Axis(0)).expect("non-empty");
        Self {
            coords: &self.coords - &mean,
            model_ids: self.model_ids.clone(),
            trial_id: self.trial_id.clone(),
        }
    }

    pub fn n_models(&self) -> usize {
        self.coords.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipseSummary {
    pub model_id: String,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub width: f64,
    pub height: f64,
    /// Direction of the major axis in radians, in `(-pi/2, pi/2]`.
    pub angle: f64,
}

impl EllipseSummary {
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.width * self.height
    }
}

fn to_nalgebra(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Eigenpairs sorted by decreasing eigenvalue.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Projects the rows of a `K x D` coordinate matrix onto their top two principal
/// directions. Each direction's sign is chosen so that its largest-magnitude
/// loading is positive.
pub fn pca_embed(values: ArrayView2<'_, f64>, model_ids: &[String], trial_id: &str) -> Result<Embedding2D> {
    let (k, dim) = values.dim();
    if k < 2 {
        return Err(Error::InvalidArgument("PCA needs at least 2 models".into()));
    }
    if model_ids.len() != k {
        return Err(Error::InvalidArgument("model id count does not match rows".into()));
    }
    let mean = values.mean_axis(Axis(0)).expect("non-empty");
    let x = &values - &mean;
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let xn = to_nalgebra(x.view());
    // loadings are the right singular vectors; use whichever Gram matrix is smaller
    let (eigvals, loadings) = if dim <= k {
        let (vals, vecs) = sorted_eigen(xn.transpose() * &xn);
        (vals, vecs.columns(0, 2.min(dim)).into_owned())
    } else {
        let (vals, vecs) = sorted_eigen(&xn * xn.transpose());
        let mut load = DMatrix::zeros(dim, 2);
        for c in 0..2 {
            if vals[c] > 0.0 {
                let v = xn.transpose() * vecs.column(c) / vals[c].sqrt();
                load.set_column(c, &v);
            }
        }
        (vals, load)
    };
    let tol = (scale * scale * (k * dim) as f64).max(f64::MIN_POSITIVE) * 1e-12;
    if eigvals.first().copied().unwrap_or(0.0) <= tol {
        return Err(Error::DegenerateMatrix("coordinates have rank 0".into()));
    }
    let mut coords = Array2::zeros((k, 2));
    for c in 0..loadings.ncols() {
        if eigvals[c] <= tol {
            continue;
        }
        let mut dir = loadings.column(c).into_owned();
        let lead = dir.iter().copied().fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if lead < 0.0 {
            dir = -dir;
        }
        let scores = &xn * dir;
        for i in 0..k {
            coords[[i, c]] = scores[i];
        }
    }
    Embedding2D::new(coords, model_ids.to_vec(), trial_id)
}

/// Orthogonal `U` (rotation or reflection) minimizing `||Y_r U - Y_ref||_F` for
/// centered inputs.
pub fn procrustes_rotation(reference: ArrayView2<'_, f64>, trial: ArrayView2<'_, f64>) -> Matrix2<f64> {
    let mut m = Matrix2::<f64>::zeros();
    for (r, t) in reference.outer_iter().zip(trial.outer_iter()) {
        for a in 0..2 {
            for b in 0..2 {
                m[(a, b)] += t[a] * r[b];
            }
        }
    }
    let svd = m.svd(true, true);
    svd.u.expect("requested U") * svd.v_t.expect("requested V^T")
}

/// Centers both embeddings and returns `Z_r = Y_r U_r`.
pub fn procrustes_align(reference: &Embedding2D, trial: &Embedding2D) -> Result<Embedding2D> {
    if reference.model_ids != trial.model_ids {
        return Err(Error::InvalidArgument(format!(
            "trial {:?} does not cover the reference models in the same order",
            trial.trial_id
        )));
    }
    let y_ref = reference.centered();
    let y = trial.centered();
    let u = procrustes_rotation(y_ref.coords.view(), y.coords.view());
    let mut z = Array2::zeros(y.coords.dim());
    for (mut out, row) in z.outer_iter_mut().zip(y.coords.outer_iter()) {
        out[0] = row[0] * u[(0, 0)] + row[1] * u[(1, 0)];
        out[1] = row[0] * u[(0, 1)] + row[1] * u[(1, 1)];
    }
    Ok(Embedding2D {
        coords: z,
        model_ids: y.model_ids,
        trial_id: y.trial_id,
    })
}

pub fn align_trials(reference: &Embedding2D, trials: &[Embedding2D], exec: Execution) -> Result<Vec<Embedding2D>> {
    exec.map_range(trials.len(), |r| procrustes_align(reference, &trials[r]))
        .into_iter()
        .collect()
}

/// Per-model mean, sample covariance and standard deviational ellipse across trials.
pub fn centrography(aligned: &[Embedding2D]) -> Result<Vec<EllipseSummary>> {
    let r = aligned.len();
    if r < 2 {
        return Err(Error::InsufficientTrials(r));
    }
    let ids = &aligned[0].model_ids;
    if aligned.iter().any(|e| &e.model_ids != ids) {
        return Err(Error::InvalidArgument("trials cover different models".into()));
    }
    let rf = r as f64;
    let summaries = (0..ids.len())
        .map(|i| {
            // shift by the first trial so identical positions give exact zeros
            let origin = [aligned[0].coords[[i, 0]], aligned[0].coords[[i, 1]]];
            let mut shift = [0.0; 2];
            for e in aligned {
                shift[0] += e.coords[[i, 0]] - origin[0];
                shift[1] += e.coords[[i, 1]] - origin[1];
            }
            shift[0] /= rf;
            shift[1] /= rf;
            let mean = [origin[0] + shift[0], origin[1] + shift[1]];
            let mut cov = [[0.0; 2]; 2];
            for e in aligned {
                let dx = e.coords[[i, 0]] - origin[0] - shift[0];
                let dy = e.coords[[i, 1]] - origin[1] - shift[1];
                cov[0][0] += dx * dx;
                cov[0][1] += dx * dy;
                cov[1][1] += dy * dy;
            }
            cov[0][0] /= rf - 1.0;
            cov[0][1] /= rf - 1.0;
            cov[1][1] /= rf - 1.0;
            cov[1][0] = cov[0][1];
            ellipse(ids[i].clone(), mean, cov)
        })
        .collect();
    Ok(summaries)
}

fn ellipse(model_id: String, mean: [f64; 2], cov: [[f64; 2]; 2]) -> EllipseSummary {
    let (a, b, c) = (cov[0][0], cov[0][1], cov[1][1]);
    let half_trace = 0.5 * (a + c);
    let radius = (0.5 * (a - c)).hypot(b);
    let major = half_trace + radius;
    let minor = (half_trace - radius).max(0.0);
    // equal eigenvalues leave the direction undefined; atan2(0, 0) = 0
    let angle = 0.5 * (2.0 * b).atan2(a - c);
    EllipseSummary {
        model_id,
        mean,
        cov,
        width: major.max(0.0).sqrt(),
        height: minor.sqrt(),
        angle,
    }
}

/// Rows for models added to an existing resampled map, over the draw's unique texts.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRows {
    pub model_ids: Vec<String>,
    pub text_ids: Vec<String>,
    pub values: Array2<f64>,
}

/// Clips the new rows at the map's threshold, stacks them under the existing
/// models and re-runs weighted centering with the stored draw.
pub fn add_models(
    existing: &LikelihoodMatrix,
    new_rows: &ModelRows,
    threshold: f64,
    draw: &ResampleDraw,
    opts: CenteringOptions,
) -> Result<WeightedCoordinates> {
    if existing.n_texts() != draw.unique_count() {
        return Err(Error::InvalidArgument(format!(
            "existing matrix has {} texts, draw has {} unique texts",
            existing.n_texts(),
            draw.unique_count()
        )));
    }
    if new_rows.text_ids != existing.text_ids() {
        return Err(Error::InvalidArgument("new models are not scored on the map's texts".into()));
    }
    if new_rows.values.dim() != (new_rows.model_ids.len(), new_rows.text_ids.len()) {
        return Err(Error::InvalidArgument("new model rows have the wrong shape".into()));
    }
    if new_rows.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite log-likelihood in new models".into()));
    }
    if !threshold.is_finite() {
        return Err(Error::InvalidArgument("threshold must be finite".into()));
    }
    let clipped = new_rows.values.mapv(|v| v.max(threshold));
    let stacked = ndarray::concatenate(Axis(0), &[existing.values(), clipped.view()])
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let (values, weights) = weighted_center_values(stacked.view(), draw, opts)?;
    let mut model_ids = existing.model_ids().to_vec();
    model_ids.extend(new_rows.model_ids.iter().cloned());
    Ok(WeightedCoordinates {
        values,
        weights,
        draw: draw.clone(),
        model_ids,
        text_ids: existing.text_ids().to_vec(),
    })
}

/// Applies a stored threshold to a full matrix of new models (kept for callers
/// that hold a [`LikelihoodMatrix`]).
pub fn clip_new_models(new_models: &LikelihoodMatrix, threshold: f64) -> Result<LikelihoodMatrix> {
    apply_threshold(new_models, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::LikelihoodMatrix;
    use crate::matrix::double_center;
    use crate::sampling::{draw, plan_ls, weighted_center, weighted_distance};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn ids(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("m{i}")).collect()
    }

    fn random_embedding(k: usize, seed: u64) -> Embedding2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Embedding2D::new(Array2::from_shape_fn((k, 2), |_| rng.random_range(-5.0..5.0)), ids(k), "ref")
            .unwrap()
            .centered()
    }

    fn transform(e: &Embedding2D, m: [[f64; 2]; 2]) -> Embedding2D {
        let coords = Array2::from_shape_fn(e.coords.dim(), |(i, c)| {
            e.coords[[i, 0]] * m[0][c] + e.coords[[i, 1]] * m[1][c]
        });
        Embedding2D::new(coords, e.model_ids.clone(), "t").unwrap()
    }

    fn pairwise(e: &Embedding2D) -> Vec<f64> {
        let k = e.n_models();
        let mut out = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                out.push(
                    (e.coords[[i, 0]] - e.coords[[j, 0]]).hypot(e.coords[[i, 1]] - e.coords[[j, 1]]),
                );
            }
        }
        out
    }

    #[test]
    fn pca_recovers_planar_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = 12;
        let plane = Array2::from_shape_fn((k, 2), |_| rng.random_range(-3.0..3.0));
        // embed in 5-D through an orthonormal pair of directions
        let u = [0.6, 0.0, 0.8, 0.0, 0.0];
        let v = [0.0, 1.0, 0.0, 0.0, 0.0];
        let high = Array2::from_shape_fn((k, 5), |(i, d)| plane[[i, 0]] * u[d] + plane[[i, 1]] * v[d] + 7.0);
        let e = pca_embed(high.view(), &ids(k), "x").unwrap();
        let original = Embedding2D::new(plane, ids(k), "p").unwrap();
        for (a, b) in pairwise(&e).iter().zip(pairwise(&original)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn pca_dual_path_matches_primal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let wide = Array2::from_shape_fn((6, 20), |_| rng.random_range(-1.0..1.0));
        let e = pca_embed(wide.view(), &ids(6), "w").unwrap();
        let tall = wide.t().to_owned();
        // same data, covariance route: compare via Gram of the scores
        let xc = &wide - &wide.mean_axis(Axis(0)).unwrap();
        let (vals, _) = sorted_eigen(to_nalgebra(xc.view()) * to_nalgebra(xc.view()).transpose());
        for c in 0..2 {
            let ss: f64 = e.coords.column(c).iter().map(|v| v * v).sum();
            assert!((ss - vals[c]).abs() < 1e-9 * vals[0]);
        }
        assert_eq!(tall.nrows(), 20);
    }

    #[test]
    fn pca_duplicates_and_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = Array2::from_shape_fn((5, 4), |_| rng.random_range(-1.0..1.0));
        let row = x.row(1).to_owned();
        x.row_mut(3).assign(&row);
        let e = pca_embed(x.view(), &ids(5), "d").unwrap();
        assert_eq!(e.coords.row(1), e.coords.row(3));
        let flat = Array2::from_elem((4, 3), 2.5);
        assert!(matches!(pca_embed(flat.view(), &ids(4), "z"), Err(Error::DegenerateMatrix(_))));
    }

    #[test]
    fn pca_variance_equals_top_covariance_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Array2::from_shape_fn((10, 6), |_| rng.random_range(-2.0..2.0));
        let e = pca_embed(x.view(), &ids(10), "v").unwrap();
        // independent oracle: power iteration with deflation on the sample covariance
        let xc = &x - &x.mean_axis(Axis(0)).unwrap();
        let mut cov = xc.t().dot(&xc) / 9.0;
        let mut top = Vec::new();
        for _ in 0..2 {
            let mut v = ndarray::Array1::from_elem(6, 1.0);
            let mut lambda = 0.0;
            for _ in 0..5000 {
                let w = cov.dot(&v);
                lambda = w.dot(&v) / v.dot(&v);
                let norm = w.dot(&w).sqrt();
                v = w / norm;
            }
            top.push(lambda);
            let outer = Array2::from_shape_fn((6, 6), |(a, b)| v[a] * v[b]);
            cov = cov - outer * lambda;
        }
        for c in 0..2 {
            let var = e.coords.column(c).iter().map(|v| v * v).sum::<f64>() / 9.0;
            assert!((var - top[c]).abs() < 1e-8 * top[0], "{var} vs {}", top[c]);
        }
    }

    #[test]
    fn procrustes_identity_rotation_reflection() {
        let y = random_embedding(30, 5);
        let same = procrustes_align(&y, &y).unwrap();
        let u = procrustes_rotation(y.coords.view(), y.coords.view());
        assert!((u - Matrix2::identity()).norm() < 1e-12);
        assert!((&same.coords - &y.coords).iter().all(|v| v.abs() < 1e-12));

        let t = 37f64.to_radians();
        let rotated = transform(&y, [[t.cos(), t.sin()], [-t.sin(), t.cos()]]);
        let back = procrustes_align(&y, &rotated).unwrap();
        assert!((&back.coords - &y.coords).iter().all(|v| v.abs() < 1e-8));

        let reflected = transform(&y, [[-1.0, 0.0], [0.0, 1.0]]);
        let back = procrustes_align(&y, &reflected).unwrap();
        assert!((&back.coords - &y.coords).iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn procrustes_never_increases_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = random_embedding(15, 7);
        for _ in 0..20 {
            let noisy = Embedding2D::new(
                y.coords.mapv(|v| v + rng.random_range(-1.0..1.0)),
                y.model_ids.clone(),
                "n",
            )
            .unwrap()
            .centered();
            let z = procrustes_align(&y, &noisy).unwrap();
            let before = (&noisy.coords - &y.coords).mapv(|v| v * v).sum().sqrt();
            let after = (&z.coords - &y.coords).mapv(|v| v * v).sum().sqrt();
            assert!(after <= before + 1e-12);
        }
        let other = Embedding2D::new(y.coords.clone(), ids(14).into_iter().chain(["x".into()]).collect(), "o").unwrap();
        assert!(procrustes_align(&y, &other).is_err());
    }

    #[test]
    fn centrography_cases() {
        let y = random_embedding(4, 8);
        let same = vec![y.clone(), y.clone(), y.clone()];
        for s in centrography(&same).unwrap() {
            assert_eq!((s.width, s.height, s.angle), (0.0, 0.0, 0.0));
        }
        assert!(matches!(centrography(&same[..1]), Err(Error::InsufficientTrials(1))));

        // alternating +/- (sigma, 0) around a fixed mean
        let sigma = 0.7;
        let r = 6;
        let trials: Vec<Embedding2D> = (0..r)
            .map(|t| {
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                Embedding2D::new(array![[1.0 + sign * sigma, 2.0]], vec!["a".into()], format!("{t}")).unwrap()
            })
            .collect();
        let s = &centrography(&trials).unwrap()[0];
        assert!((s.width - sigma * (r as f64 / (r as f64 - 1.0)).sqrt()).abs() < 1e-12);
        assert_eq!(s.height, 0.0);
        assert_eq!(s.angle, 0.0);
        assert_eq!(s.mean, [1.0, 2.0]);
    }

    #[test]
    fn isotropic_jitter_gives_round_ellipse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 0.5).unwrap();
        let trials: Vec<Embedding2D> = (0..20_000)
            .map(|t| {
                Embedding2D::new(
                    array![[normal.sample(&mut rng), normal.sample(&mut rng)]],
                    vec!["a".into()],
                    format!("{t}"),
                )
                .unwrap()
            })
            .collect();
        let s = &centrography(&trials).unwrap()[0];
        assert!((s.width - 0.5).abs() < 0.02);
        assert!((s.height - 0.5).abs() < 0.02);
    }

    #[test]
    fn ellipse_area_invariant_under_common_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let trials: Vec<Embedding2D> = (0..10)
            .map(|t| {
                Embedding2D::new(Array2::from_shape_fn((5, 2), |_| rng.random_range(-1.0..1.0)), ids(5), format!("{t}"))
                    .unwrap()
            })
            .collect();
        let t = 1.1f64;
        let rot = [[t.cos(), t.sin()], [-t.sin(), t.cos()]];
        let rotated: Vec<Embedding2D> = trials.iter().map(|e| transform(e, rot)).collect();
        let a = centrography(&trials).unwrap();
        let b = centrography(&rotated).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.area() - y.area()).abs() < 1e-12);
            assert!(x.width >= x.height);
        }
    }

    fn resampled_setup() -> (LikelihoodMatrix, ResampleDraw) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l = LikelihoodMatrix::from_array(Array2::from_shape_fn((6, 30), |_| rng.random_range(-50.0..-1.0))).unwrap();
        let q = double_center(&l);
        let p = plan_ls(&q).unwrap();
        let d = draw(&p, 20, 4).unwrap();
        (l, d)
    }

    #[test]
    fn add_models_workflow() {
        let (l, d) = resampled_setup();
        let opts = CenteringOptions::default();
        let base = weighted_center(&l, &d, opts).unwrap();
        let existing = l.select_texts(&d.unique_indices).unwrap();
        let text_ids = existing.text_ids().to_vec();

        // a copy of model 2 lands on model 2's coordinates
        let copy = ModelRows {
            model_ids: vec!["copy".into()],
            text_ids: text_ids.clone(),
            values: existing.values().select(Axis(0), &[2]),
        };
        let merged = add_models(&existing, &copy, -1e9, &d, opts).unwrap();
        for t in 0..d.unique_count() {
            assert!((merged.values[[6, t]] - merged.values[[2, t]]).abs() < 1e-10);
        }
        // distances among the original models do not move
        let g0 = weighted_distance(&base);
        let g1 = weighted_distance(&merged);
        for i in 0..6 {
            for j in 0..6 {
                assert!((g0.values[[i, j]] - g1.values[[i, j]]).abs() < 1e-10 * (1.0 + g0.values[[i, j]]));
            }
        }
        // adding nothing leaves the coordinates unchanged
        let none = ModelRows {
            model_ids: vec![],
            text_ids: text_ids.clone(),
            values: Array2::zeros((0, text_ids.len())),
        };
        let same = add_models(&existing, &none, -1e9, &d, opts).unwrap();
        assert!((&same.values - &base.values).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn add_models_clips_before_centering() {
        let (l, d) = resampled_setup();
        let opts = CenteringOptions::default();
        let existing = l.select_texts(&d.unique_indices).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let new_vals = Array2::from_shape_fn((2, existing.n_texts()), |_| rng.random_range(-200.0..-1.0));
        let rows = ModelRows {
            model_ids: vec!["n0".into(), "n1".into()],
            text_ids: existing.text_ids().to_vec(),
            values: new_vals.clone(),
        };
        let threshold = -60.0;
        let got = add_models(&existing, &rows, threshold, &d, opts).unwrap();
        // composition: apply_threshold on the new rows, then weighted centering
        let new_l = LikelihoodMatrix::new(new_vals, rows.model_ids.clone(), rows.text_ids.clone()).unwrap();
        let clipped = clip_new_models(&new_l, threshold).unwrap();
        let stacked = existing.stack_models(&clipped).unwrap();
        let (expected, _) = weighted_center_values(stacked.values(), &d, opts).unwrap();
        assert!((&got.values - &expected).iter().all(|v| v.abs() < 1e-12));

        let wrong = ModelRows {
            text_ids: vec!["nope".into(); existing.n_texts()],
            ..rows
        };
        assert!(add_models(&existing, &wrong, threshold, &d, opts).is_err());
    }
}
