//! Transfer-engine results for Gaussian chains against dense linear algebra.

mod common;

use common::{GaussianOracle, HALF_LN_2PI};
use ensemble_lab::ensembles::Ensemble;
use ensemble_lab::model::LatticeModel;
use ensemble_lab::quadrature::{
    build_grid_for_window, covariance, log_partition, TransferOperator,
};
use num_complex::Complex;

const TOL: f64 = 1e-8;

fn ensemble(model: &LatticeModel<f64>) -> Ensemble<f64> {
    let grid = build_grid_for_window(model, 128, 1e-12, 3.01).unwrap();
    Ensemble::new(model, &grid)
}

#[test]
fn free_energy_and_moments() {
    for j in [0.0, 0.2, -0.2] {
        for k in [1usize, 2, 16, 64] {
            let model = LatticeModel::gaussian(k, j, 0.0).unwrap();
            let e = ensemble(&model);
            for sigma in [0.0, 0.5, 1.0] {
                let o = GaussianOracle::from_model(&model, sigma);
                let (a, d1, d2) = e.a_gce(sigma).unwrap();
                assert!(
                    (a - o.log_z / k as f64).abs() < TOL,
                    "J={j} K={k} s={sigma}"
                );
                assert!((d1 - o.m()).abs() < TOL && (d2 - o.var_sum / k as f64).abs() < TOL);
                let mom = e.moments(sigma, 4).unwrap();
                for i in 0..k {
                    assert!((mom.m_per_site[i] - o.mean[i]).abs() < TOL);
                    assert!((mom.site_var[i] - o.covariance[(i, i)]).abs() < TOL);
                    assert!((mom.site_m4[i] - 3.0 * o.covariance[(i, i)].powi(2)).abs() < 1e-7);
                }
                assert!(mom.centered_sum_p3.unwrap().abs() < 1e-8 * o.var_sum.powf(1.5));
                let p4 = 3.0 * o.var_sum * o.var_sum;
                assert!((mom.centered_sum_p4.unwrap() - p4).abs() < 1e-8 * p4);
            }
        }
    }
}

#[test]
fn covariances_match_inverse_precision() {
    for j in [0.0, 0.2, -0.2] {
        let model = LatticeModel::gaussian(16, j, 0.5).unwrap();
        let grid = build_grid_for_window(&model, 128, 1e-12, 3.01).unwrap();
        let o = GaussianOracle::from_model(&model, 0.5);
        let op = TransferOperator::new(&model, &grid);
        let sol = op.solve(0.5, 2).unwrap();
        let cov = op.covariance_matrix(&sol);
        for a in 0..16 {
            for b in 0..16 {
                assert!(
                    (cov[a * 16 + b] - o.covariance[(a, b)]).abs() < TOL,
                    "J={j} ({a},{b})"
                );
            }
        }
        let c = covariance(&model, &grid, 0, 0).unwrap();
        assert!((c - o.covariance[(0, 0)]).abs() < TOL);
    }
}

#[test]
fn two_site_values() {
    let model = LatticeModel::gaussian(2, 0.2, 0.0).unwrap();
    let grid = build_grid_for_window(&model, 128, 1e-12, 3.01).unwrap();
    let lz = log_partition(&model, &grid, Complex::new(0.0, 0.0)).unwrap();
    assert!((lz.re - ((2.0 * std::f64::consts::PI).ln() - 0.5 * 0.96f64.ln())).abs() < 1e-12);
    assert!((covariance(&model, &grid, 0, 1).unwrap() - 0.2 / 0.96).abs() < 1e-12);
    let e = Ensemble::new(&model, &grid);
    assert!((e.moments(0.0, 2).unwrap().var_sum - 2.5).abs() < 1e-12);
    assert!((e.sigma_of_m(1.0, None).unwrap() - 0.8).abs() < 1e-10);
    let (hk, d2, _) = e.legendre_hk(1.0).unwrap();
    let o = GaussianOracle::from_model(&model, 0.8);
    assert!((hk - (0.8 - o.log_z / 2.0)).abs() < 1e-10 && (d2 - 0.8).abs() < 1e-10);
    assert!((e.char_fn(0.0, 0.0, 1.0).unwrap().re - (-0.625f64).exp()).abs() < 1e-12);
    let k1 = LatticeModel::gaussian(1, 0.0, 0.0).unwrap();
    let g1 = build_grid_for_window(&k1, 64, 1e-12, 1.0).unwrap();
    let z = log_partition(&k1, &g1, Complex::new(0.0, 1.0)).unwrap();
    assert!((z - Complex::new(HALF_LN_2PI - 0.5, 0.0)).norm() < 1e-12);
}

#[test]
fn characteristic_function_density_and_coarse_hamiltonian() {
    for j in [0.0, 0.2, -0.2] {
        for k in [1usize, 2, 16, 64] {
            let model = LatticeModel::gaussian(k, j, 0.0).unwrap();
            let e = ensemble(&model);
            for sigma in [0.0, 0.5, 1.0] {
                let o = GaussianOracle::from_model(&model, sigma);
                let m = o.m();
                for xi in [0.5, 1.0, 2.5] {
                    let phi = e.char_fn(sigma, m, xi).unwrap();
                    assert!(
                        (phi - Complex::new(o.phi(xi), 0.0)).norm() < TOL,
                        "J={j} K={k} xi={xi}"
                    );
                }
                let d = e.density_at_zero(sigma).unwrap();
                assert!(
                    (d.g0 - o.g0()).abs() < TOL,
                    "J={j} K={k}: {} vs {}",
                    d.g0,
                    o.g0()
                );
                let (hk, hk_d2, s) = e.legendre_hk(m).unwrap();
                assert!((s - sigma).abs() < 1e-8);
                assert!((hk - (sigma * m - o.log_z / k as f64)).abs() < TOL);
                assert!((hk_d2 - k as f64 / o.var_sum).abs() < TOL);
                let (hb, _, _) = e.h_bar(m).unwrap();
                assert!(
                    (hb - o.h_bar(m, model.field())).abs() < TOL,
                    "J={j} K={k} m={m}"
                );
            }
        }
    }
}

#[test]
fn gaussian_h_bar_formula_without_coupling() {
    for k in [1usize, 2, 16] {
        let o = GaussianOracle::new(k, 0.0, 0.0, &[0.0]);
        for m in [-1.0, 0.0, 0.7] {
            let expected = m * m / 2.0 - HALF_LN_2PI + HALF_LN_2PI / k as f64;
            assert!((o.h_bar(m, &[0.0]) - expected).abs() < 1e-13);
        }
    }
}
