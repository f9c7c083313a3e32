//! Self-check suite run by `modelmap verify`.
//!
//! A small, seeded version of the oracle checks: enumeration against closed
//! forms and grid optima, plus alignment and file-format round-trips.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::io::{read_binary_values, read_delimited, write_binary, write_delimited};
use crate::mapalign::{centrography, procrustes_align, Embedding2D};
use crate::matrix::{pairwise_distances, CenteredMatrix, LikelihoodMatrix};
use crate::oracle::{
    closed_form_variance, enumerate_moments, expected_unique, horvitz_thompson_expectation, kl_objective,
    ls_objective, random_centered, simplex_search_kl, simplex_search_ls,
};
use crate::sampling::{draw, plan, Method};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type CheckFn = fn(&mut ChaCha8Rng) -> Result<(bool, String)>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("unbiased_distance", unbiased),
    ("closed_form_variance", variance),
    ("kl_plan_optimal", kl_optimal),
    ("ls_plan_optimal", ls_optimal),
    ("horvitz_thompson", horvitz_thompson),
    ("expected_unique", unique_count),
    ("procrustes_recovery", procrustes),
    ("format_round_trip", round_trip),
];

/// Runs every check with its own RNG derived from `seed`.
pub fn run_all(seed: u64) -> Vec<Check> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, f))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            match f(&mut rng) {
                Ok((passed, detail)) => Check { name, passed, detail },
                Err(e) => Check {
                    name,
                    passed: false,
                    detail: format!("error: {e}"),
                },
            }
        })
        .collect()
}

fn instance(rng: &mut ChaCha8Rng) -> (CenteredMatrix, usize) {
    let k = rng.random_range(2..=5);
    let n_texts = rng.random_range(2..=4);
    (random_centered(rng, k, n_texts), rng.random_range(1..=3))
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn unbiased(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (q, n) = instance(rng);
        let g = pairwise_distances(&q, 1.0)?;
        for m in Method::ALL {
            let e = enumerate_moments(&q, &plan(m, &q)?, n)?;
            worst = worst.max(max_abs_diff(&e.expectation, &g.values));
        }
    }
    Ok((worst <= 1e-10, format!("max |E[g~] - g| = {worst:.3e}")))
}

fn variance(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (q, n) = instance(rng);
        for m in Method::ALL {
            let p = plan(m, &q)?;
            let e = enumerate_moments(&q, &p, n)?;
            worst = worst.max(max_abs_diff(&e.variance, &closed_form_variance(&q, &p, n)?));
        }
    }
    Ok((worst <= 1e-10, format!("max variance mismatch = {worst:.3e}")))
}

fn grid_check(
    rng: &mut ChaCha8Rng,
    method: Method,
    objective: fn(&CenteredMatrix, &[f64], usize) -> Result<f64>,
    search: fn(&CenteredMatrix, usize, f64) -> Result<crate::oracle::SimplexResult>,
) -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..3 {
        let k = rng.random_range(2..=4);
        let q = random_centered(rng, k, 3);
        let p = plan(method, &q)?;
        let ours = objective(&q, p.probs(), 2)?;
        let grid = search(&q, 2, 0.05)?;
        worst = worst.max(ours - grid.best_objective - grid.slack);
    }
    Ok((worst <= 0.0, format!("max excess over grid minimum + slack = {worst:.3e}")))
}

fn kl_optimal(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    grid_check(rng, Method::Kl, kl_objective, simplex_search_kl)
}

fn ls_optimal(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    grid_check(rng, Method::Ls, ls_objective, simplex_search_ls)
}

fn horvitz_thompson(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (q, n) = instance(rng);
        let f: Vec<f64> = (0..q.n_texts()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let total: f64 = f.iter().sum();
        for m in Method::ALL {
            let e = horvitz_thompson_expectation(&plan(m, &q)?, n, &f)?;
            worst = worst.max((e - total).abs());
        }
    }
    Ok((worst <= 1e-10, format!("max |E[sum w f] - sum f| = {worst:.3e}")))
}

fn unique_count(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let q = random_centered(rng, 4, 30);
    let p = plan(Method::Ls, &q)?;
    let n = 25;
    let trials = 20_000;
    let ds: Vec<f64> = (0..trials)
        .map(|t| draw(&p, n, t).map(|d| d.unique_count() as f64))
        .collect::<Result<_>>()?;
    let mean = ds.iter().sum::<f64>() / trials as f64;
    let var = ds.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0);
    let se = (var / trials as f64).sqrt();
    let expected = expected_unique(&p, n);
    let z = (mean - expected).abs() / se;
    Ok((z <= 4.0, format!("E[d] = {expected:.4}, Monte Carlo {mean:.4}, z = {z:.2}")))
}

fn procrustes(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let ids: Vec<String> = (0..30).map(|i| format!("m{i}")).collect();
    let y = Embedding2D::new(Array2::from_shape_fn((30, 2), |_| rng.random_range(-5.0..5.0)), ids.clone(), "ref")?
        .centered();
    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (c, s) = (t.cos(), t.sin());
    let moved = Array2::from_shape_fn((30, 2), |(i, j)| {
        // rotate then reflect the first axis
        let x = y.coords[[i, 0]] * c - y.coords[[i, 1]] * s;
        let v = y.coords[[i, 0]] * s + y.coords[[i, 1]] * c;
        if j == 0 { -x } else { v }
    });
    let back = procrustes_align(&y, &Embedding2D::new(moved, ids, "t")?)?;
    let residual = max_abs_diff(&back.coords, &y.coords);
    let zero_area = centrography(&[y.clone(), y.clone()])?.iter().all(|e| e.area() == 0.0);
    Ok((residual < 1e-8 && zero_area, format!("residual = {residual:.3e}, identical-trial ellipses zero: {zero_area}")))
}

fn round_trip(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut ok = true;
    for _ in 0..20 {
        let k = rng.random_range(2..=6);
        let n = rng.random_range(2..=8);
        let values = Array2::from_shape_fn((k, n), |_| f64::from_bits(rng.random::<u64>() >> 2) * rng.random_range(-1.0..1.0));
        let l = LikelihoodMatrix::from_array(values.clone())?;
        let mut text = Vec::new();
        write_delimited(&mut text, &l)?;
        let mut bin = Vec::new();
        write_binary(&mut bin, l.values())?;
        let a = read_delimited(&text[..])?;
        let b = read_binary_values(&bin[..])?;
        ok &= values.iter().zip(a.values()).all(|(x, y)| x.to_bits() == y.to_bits());
        ok &= values.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    }
    Ok((ok, "20 random matrices, delimited and binary".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_all(0) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
