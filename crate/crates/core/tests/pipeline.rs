use modelmap::bootstrap::{Bootstrap, ErrorConfig};
use modelmap::matrix::{clip_lower_percentile, double_center, pairwise_distances, pairwise_distances_with};
use modelmap::sampling::{draw, plan, weighted_center, weighted_center_q, weighted_distance};
use modelmap::{Execution, LikelihoodMatrix, Method};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn likelihoods(k: usize, n: usize, seed: u64) -> LikelihoodMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LikelihoodMatrix::from_array(Array2::from_shape_fn((k, n), |(_, s)| {
        -rng.random_range(1.0..50.0) * (1.0 + (s % 7) as f64)
    }))
    .unwrap()
}

#[test]
fn bootstrap_is_identical_across_execution_modes() {
    let q = double_center(&clip_lower_percentile(&likelihoods(15, 120, 1), 2.0).unwrap());
    let run = |execution| {
        let cfg = ErrorConfig {
            replicates: 37,
            base_seed: 9,
            execution,
            ..ErrorConfig::default()
        };
        Bootstrap::new(&q, cfg).unwrap().sweep(Method::Kl, &[10, 30, 60]).unwrap()
    };
    let a = run(Execution::Sequential);
    let b = run(Execution::Parallel);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.tau.to_bits(), y.tau.to_bits());
        assert_eq!(x.sigma_hat.map(f64::to_bits), y.sigma_hat.map(f64::to_bits));
        assert_eq!(x.mean_d.to_bits(), y.mean_d.to_bits());
    }
    let g1 = pairwise_distances_with(&q, 1.0, Execution::Sequential).unwrap();
    let g2 = pairwise_distances_with(&q, 1.0, Execution::Parallel).unwrap();
    assert_eq!(g1.values, g2.values);
}

#[test]
fn centering_from_l_or_q_agrees() {
    let l = likelihoods(8, 60, 2);
    let q = double_center(&l);
    for m in Method::ALL {
        let d = draw(&plan(m, &q).unwrap(), 25, 4).unwrap();
        let a = weighted_distance(&weighted_center(&l, &d, Default::default()).unwrap());
        let b = weighted_distance(&weighted_center_q(&q, &d, Default::default()).unwrap());
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!((x - y).abs() <= 1e-8 * (1.0 + x.abs()), "{m}: {x} vs {y}");
        }
    }
}

#[test]
fn full_resample_error_shrinks_with_n() {
    let q = double_center(&likelihoods(10, 400, 3));
    let g = pairwise_distances(&q, 1.0).unwrap();
    assert!(g.values.iter().all(|v| *v >= 0.0));
    let boot = Bootstrap::new(&q, ErrorConfig { replicates: 50, ..ErrorConfig::default() }).unwrap();
    let taus: Vec<f64> = boot.sweep(Method::Ls, &[10, 100, 400]).unwrap().iter().map(|r| r.tau).collect();
    assert!(taus[0] > taus[1] && taus[1] > taus[2], "{taus:?}");
}
