//! Assembled thermodynamic reports and the Cramer identities they satisfy.

use num_complex::Complex;
use serde::Serialize;

use super::{DensityResult, Ensemble, GceMoments};
use crate::error::{Error, Result};
use crate::model::LatticeModel;
use crate::quadrature::QuadratureGrid;
use crate::scalar::Real;

/// Residual above which an identity counts as violated.
pub const IDENTITY_TOL: f64 = 1e-7;

/// Value-level quantities at one conjugate pair, enough for the three
/// Cramer identities.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CramerPoint<T> {
    pub sigma: T,
    pub m: T,
    pub a_gce: T,
    pub a_ce: T,
    pub h_k: T,
    pub h_bar: T,
    pub g0: T,
    pub k: usize,
}

impl<T: Real> CramerPoint<T> {
    pub fn residuals(&self) -> [(&'static str, T); 3] {
        let k = T::lit(self.k as f64);
        [
            (
                "a_ce - a_gce = ln(g0)/K",
                self.a_ce - self.a_gce - self.g0.ln() / k,
            ),
            (
                "a_gce - a_ce = h_bar - h_K",
                (self.a_gce - self.a_ce) - (self.h_bar - self.h_k),
            ),
            (
                "a_ce = sigma m - h_bar",
                self.a_ce - (self.sigma * self.m - self.h_bar),
            ),
        ]
    }

    pub fn check(&self) -> Result<()> {
        for (identity, r) in self.residuals() {
            if !(r.abs() <= T::lit(IDENTITY_TOL)) {
                return Err(Error::Consistency {
                    identity,
                    residual: r.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }
}

impl<T: Real> Ensemble<T> {
    /// Cramer quantities at field `sigma`, each computed along its own route:
    /// `A_ce` from `A_gce + ln g0/K`, `H_K` as a Legendre transform and
    /// `H_bar` from `H_K - ln g0/K`.
    pub fn cramer_point(
        &self,
        sigma: T,
        density: &DensityResult<T>,
        mom: &GceMoments<T>,
    ) -> Result<CramerPoint<T>> {
        let k = self.k();
        let a_gce = mom.log_z / k;
        let ln_g = density.g0.ln();
        let h_k = sigma * mom.m - a_gce;
        let p = CramerPoint {
            sigma,
            m: mom.m,
            a_gce,
            a_ce: a_gce + ln_g / k,
            h_k,
            h_bar: h_k - ln_g / k,
            g0: density.g0,
            k: self.size(),
        };
        p.check()?;
        Ok(p)
    }

    /// Full report at field `sigma`.
    pub fn report_at_sigma(&self, sigma: T) -> Result<ThermoReport<T>> {
        self.report(sigma, None)
    }

    /// Full report at mean spin `m` (sigma solved from the conjugacy relation).
    pub fn report_at_m(&self, m: T) -> Result<ThermoReport<T>> {
        let sigma = self.sigma_of_m(m, None)?;
        self.report(sigma, Some(m))
    }

    fn report(&self, sigma: T, target_m: Option<T>) -> Result<ThermoReport<T>> {
        let k = self.k();
        let mom = self.moments(sigma, 2)?;
        let m = target_m.unwrap_or(mom.m);
        if (mom.m - m).abs() > T::lit(10.0 * super::CONJUGACY_TOL) {
            return Err(Error::Consistency {
                identity: "a_gce_d1 = m",
                residual: (mom.m - m).to_f64_lossy(),
            });
        }
        let a_gce = mom.log_z / k;
        let a_gce_d2 = mom.var_sum / k;

        let hs = T::lit(self.settings.h_sigma);
        let st = self.sigma_stencil(sigma)?;
        let point = self.cramer_point(sigma, &st.centre, &mom)?;
        let (hm_st, _) = self.m_stencil(m, sigma, mom.var_sum)?;
        let hm = T::lit(self.settings.h_m);

        let h_k_d2 = k / mom.var_sum;
        let report = ThermoReport {
            sigma,
            m,
            a_gce,
            a_gce_d1: mom.m,
            a_gce_d2,
            a_ce: point.a_ce,
            a_ce_d1: mom.m + st.first(hs) / k,
            a_ce_d2: a_gce_d2 + st.second(hs) / k,
            h_k: point.h_k,
            h_k_d2,
            h_bar: point.h_bar,
            h_bar_d1: sigma - hm_st.first(hm) / k,
            h_bar_d2: h_k_d2 - hm_st.second(hm) / k,
            g0: st.centre.g0,
            k: self.size(),
            grid_n: self.grid().len(),
            delta: self.settings.delta,
        };
        report.check()?;
        Ok(report)
    }
}

/// Thermodynamics of both ensembles at one conjugate pair `(sigma, m)`.
#[derive(Clone, Debug, Serialize)]
pub struct ThermoReport<T> {
    pub sigma: T,
    pub m: T,
    pub a_gce: T,
    pub a_gce_d1: T,
    pub a_gce_d2: T,
    pub a_ce: T,
    pub a_ce_d1: T,
    pub a_ce_d2: T,
    #[serde(rename = "h_K")]
    pub h_k: T,
    #[serde(rename = "h_K_d2")]
    pub h_k_d2: T,
    pub h_bar: T,
    pub h_bar_d1: T,
    pub h_bar_d2: T,
    pub g0: T,
    #[serde(rename = "K")]
    pub k: usize,
    pub grid_n: usize,
    pub delta: f64,
}

impl<T: Real> ThermoReport<T> {
    pub fn cramer_point(&self) -> CramerPoint<T> {
        CramerPoint {
            sigma: self.sigma,
            m: self.m,
            a_gce: self.a_gce,
            a_ce: self.a_ce,
            h_k: self.h_k,
            h_bar: self.h_bar,
            g0: self.g0,
            k: self.k,
        }
    }

    pub fn check(&self) -> Result<()> {
        if (self.a_gce_d1 - self.m).abs() > T::lit(10.0 * super::CONJUGACY_TOL) {
            return Err(Error::Consistency {
                identity: "a_gce_d1 = m",
                residual: (self.a_gce_d1 - self.m).to_f64_lossy(),
            });
        }
        self.cramer_point().check()
    }

    fn values(&self) -> [(&'static str, T); 14] {
        [
            ("sigma", self.sigma),
            ("m", self.m),
            ("a_gce", self.a_gce),
            ("a_gce_d1", self.a_gce_d1),
            ("a_gce_d2", self.a_gce_d2),
            ("a_ce", self.a_ce),
            ("a_ce_d1", self.a_ce_d1),
            ("a_ce_d2", self.a_ce_d2),
            ("h_K", self.h_k),
            ("h_K_d2", self.h_k_d2),
            ("h_bar", self.h_bar),
            ("h_bar_d1", self.h_bar_d1),
            ("h_bar_d2", self.h_bar_d2),
            ("g0", self.g0),
        ]
    }

    /// Flat JSON object; non-finite fields are an error rather than `null`.
    pub fn to_json(&self) -> Result<String> {
        if let Some((name, v)) = self.values().into_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Serialization(format!(
                "field {name} is not finite: {v}"
            )));
        }
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}

fn ensemble<T: Real>(model: &LatticeModel<T>, grid: &QuadratureGrid<T>) -> Ensemble<T> {
    Ensemble::new(model, grid)
}

/// `(A_gce, A_gce', A_gce'')` at the model's own field.
pub fn a_gce<T: Real>(model: &LatticeModel<T>, grid: &QuadratureGrid<T>) -> Result<(T, T, T)> {
    ensemble(model, grid).a_gce(model.sigma())
}

pub fn sigma_of_m<T: Real>(model: &LatticeModel<T>, grid: &QuadratureGrid<T>, m: T) -> Result<T> {
    ensemble(model, grid).sigma_of_m(m, None)
}

/// `(H_K(m), H_K''(m))`.
pub fn legendre_hk<T: Real>(
    model: &LatticeModel<T>,
    grid: &QuadratureGrid<T>,
    m: T,
) -> Result<(T, T)> {
    let (v, d2, _) = ensemble(model, grid).legendre_hk(m)?;
    Ok((v, d2))
}

pub fn char_fn<T: Real>(
    model: &LatticeModel<T>,
    grid: &QuadratureGrid<T>,
    sigma: T,
    m: T,
    xi: f64,
) -> Result<Complex<T>> {
    ensemble(model, grid).char_fn(sigma, m, xi)
}

pub fn density_at_zero<T: Real>(
    model: &LatticeModel<T>,
    grid: &QuadratureGrid<T>,
    sigma: T,
) -> Result<DensityResult<T>> {
    ensemble(model, grid).density_at_zero(sigma)
}

pub fn a_ce<T: Real>(model: &LatticeModel<T>, grid: &QuadratureGrid<T>, sigma: T) -> Result<T> {
    Ok(ensemble(model, grid).a_ce(sigma)?.0)
}

pub fn h_bar<T: Real>(
    model: &LatticeModel<T>,
    grid: &QuadratureGrid<T>,
    m: T,
) -> Result<(T, T, T)> {
    ensemble(model, grid).h_bar(m)
}

pub fn thermo_report<T: Real>(
    model: &LatticeModel<T>,
    grid: &QuadratureGrid<T>,
    sigma: T,
) -> Result<ThermoReport<T>> {
    ensemble(model, grid).report_at_sigma(sigma)
}
