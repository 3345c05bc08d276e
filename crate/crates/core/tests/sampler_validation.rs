//! Monte Carlo chains against quadrature and closed-form references.

mod common;

use common::{constrained_site_moments, one_site_cdf};
use ensemble_lab::ensembles::Ensemble;
use ensemble_lab::model::{LatticeModel, SingleSitePotential};
use ensemble_lab::quadrature::{build_grid, TransferOperator};
use ensemble_lab::sampler::{kawasaki_ce, metropolis_gce, ChainConfig};

const SEED: u64 = 42;

fn cosine(k: usize, j: f64, sigma: f64) -> LatticeModel<f64> {
    LatticeModel::new(
        k,
        j,
        vec![0.0],
        sigma,
        SingleSitePotential::cosine(0.5, 1.0),
    )
    .unwrap()
}

#[test]
fn gce_gaussian_mean() {
    let model = LatticeModel::gaussian(4, 0.0, 0.5).unwrap();
    let out = metropolis_gce(&model, &ChainConfig::gce(1_000_000, SEED)).unwrap();
    let s = &out.stats;
    for est in &s.site_means {
        assert!(est.z_score(0.5) < 3.0, "{est:?}");
    }
    assert!(s.sum_variance.z_score(4.0) < 3.0, "{:?}", s.sum_variance);
    assert!(s.acceptance_rate > 0.3 && s.acceptance_rate < 0.8 && !s.low_acceptance);
    assert!(s.batches >= 32);
}

#[test]
fn gce_pair_covariance_matches_transfer() {
    let model = LatticeModel::gaussian(16, 0.2, 0.0).unwrap();
    let cfg = ChainConfig::gce(1_000_000, SEED).with_pairs(vec![(7, 8)]);
    let stats = metropolis_gce(&model, &cfg).unwrap().stats;
    let grid = build_grid(&model, 128, 1e-12).unwrap();
    let op = TransferOperator::new(&model, &grid);
    let sol = op.solve(0.0, 1).unwrap();
    let reference = op.covariance_row(&sol, 7, 8)[1];
    let est = stats.covariance(7, 8).unwrap();
    assert!(est.z_score(reference) < 3.0, "{est:?} vs {reference}");
}

#[test]
fn gce_perturbed_moments_match_transfer() {
    let model = cosine(8, 0.2, 0.5);
    let stats = metropolis_gce(&model, &ChainConfig::gce(1_000_000, SEED))
        .unwrap()
        .stats;
    let grid = build_grid(&model, 128, 1e-12).unwrap();
    let mom = Ensemble::new(&model, &grid).moments(0.5, 2).unwrap();
    assert!(
        stats.sum_mean.z_score(8.0 * mom.m) < 3.0,
        "{:?} vs {}",
        stats.sum_mean,
        8.0 * mom.m
    );
    assert!(
        stats.sum_variance.z_score(mom.var_sum) < 3.0,
        "{:?} vs {}",
        stats.sum_variance,
        mom.var_sum
    );
}

#[test]
fn same_seed_same_stats() {
    let model = cosine(6, 0.2, 0.3);
    let cfg = ChainConfig::gce(100_000, 7).with_pairs(vec![(0, 1)]);
    let a = metropolis_gce(&model, &cfg).unwrap().stats;
    let b = metropolis_gce(&model, &cfg).unwrap().stats;
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let c = kawasaki_ce(&model, 0.1, &ChainConfig::kawasaki(100_000, 7))
        .unwrap()
        .stats;
    let d = kawasaki_ce(&model, 0.1, &ChainConfig::kawasaki(100_000, 7))
        .unwrap()
        .stats;
    assert_eq!(c, d);
}

#[test]
fn kawasaki_conserves_the_mean() {
    let model = cosine(16, 0.2, 0.0);
    let stats = kawasaki_ce(&model, 0.37, &ChainConfig::kawasaki(10_000_000, SEED))
        .unwrap()
        .stats;
    assert!(
        stats.max_mean_drift.unwrap() <= 1e-12,
        "{:?}",
        stats.max_mean_drift
    );
    assert!((stats.sum_mean.value - 16.0 * 0.37).abs() <= 16.0 * 1e-12);
}

#[test]
fn kawasaki_two_site_gaussian_variance() {
    let model = LatticeModel::gaussian(2, 0.0, 0.0).unwrap();
    let stats = kawasaki_ce(&model, 0.0, &ChainConfig::kawasaki(1_000_000, SEED))
        .unwrap()
        .stats;
    assert!(
        stats.site_variances[0].z_score(0.5) < 3.0,
        "{:?}",
        stats.site_variances[0]
    );
}

#[test]
fn kawasaki_three_site_mean_matches_constrained_quadrature() {
    let model = cosine(3, 0.2, 0.0);
    let (mean, var) = constrained_site_moments(&model, 0.2, 10.0, 0.02);
    let stats = kawasaki_ce(&model, 0.2, &ChainConfig::kawasaki(1_000_000, SEED))
        .unwrap()
        .stats;
    assert!(
        stats.site_means[0].z_score(mean) < 3.0,
        "{:?} vs {mean}",
        stats.site_means[0]
    );
    assert!(
        stats.site_variances[0].z_score(var) < 3.0,
        "{:?} vs {var}",
        stats.site_variances[0]
    );
}

#[test]
fn one_site_marginal_kolmogorov_smirnov() {
    let model = cosine(1, 0.0, 0.3);
    let cfg = ChainConfig {
        thin: Some(1),
        ..ChainConfig::gce(1_000_000, SEED)
    };
    let out = metropolis_gce(&model, &cfg).unwrap();
    let mut samples: Vec<f64> = out.trajectory.iter().map(|r| r.value).collect();
    samples.sort_by(f64::total_cmp);
    let (xs, cdf) = one_site_cdf(&model, -12.0, 12.0, 200_001);
    let h = xs[1] - xs[0];
    let n = samples.len() as f64;
    let mut ks: f64 = 0.0;
    for (r, &x) in samples.iter().enumerate() {
        let t = ((x - xs[0]) / h).clamp(0.0, (xs.len() - 2) as f64);
        let a = t.floor() as usize;
        let f = cdf[a] + (t - a as f64) * (cdf[a + 1] - cdf[a]);
        ks = ks
            .max((f - r as f64 / n).abs())
            .max((f - (r + 1) as f64 / n).abs());
    }
    assert!(samples.len() >= 800_000);
    assert!(ks <= 0.01, "KS distance {ks}");
}

#[test]
fn merging_is_associative() {
    let model = cosine(4, 0.2, 0.0);
    let run = |seed| {
        metropolis_gce(&model, &ChainConfig::gce(50_000, seed))
            .unwrap()
            .stats
    };
    let (a, b, c) = (run(1), run(2), run(3));
    let left = a.merge(&b).unwrap().merge(&c).unwrap();
    let right = a.merge(&b.merge(&c).unwrap()).unwrap();
    assert_eq!(left, right);
    assert_eq!(left.batches, a.batches + b.batches + c.batches);
}
