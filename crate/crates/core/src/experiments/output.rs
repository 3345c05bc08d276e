//! CSV output, one file per study, columns named after the type fields.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ConvexityScan, DecayFit, GDerivativeStudy, RateFit, RateStudy};
use crate::error::Result;

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RateRow {
    quantity_tag: String,
    #[serde(rename = "K")]
    k: usize,
    sup_diff: f64,
    slope: f64,
    intercept: f64,
    r_squared: f64,
    refit_slope: Option<f64>,
    refit_r_squared: Option<f64>,
    refit_dropped_k: Option<usize>,
    scaled_max_ratio: f64,
}

fn rate_rows(f: &RateFit) -> Vec<RateRow> {
    f.k_list
        .iter()
        .zip(&f.sup_diff)
        .map(|(&k, &d)| RateRow {
            quantity_tag: format!("{:?}", f.quantity_tag),
            k,
            sup_diff: d,
            slope: f.slope,
            intercept: f.intercept,
            r_squared: f.r_squared,
            refit_slope: f.refit.map(|r| r.slope),
            refit_r_squared: f.refit.map(|r| r.r_squared),
            refit_dropped_k: f.refit.map(|r| r.dropped_k),
            scaled_max_ratio: f.scaled_max_ratio,
        })
        .collect()
}

#[derive(Serialize)]
struct GRow {
    #[serde(rename = "K")]
    k: usize,
    g0_min: f64,
    g0_max: f64,
    d1_max: f64,
    d2_max: f64,
    d1_exponent: f64,
    d2_exponent: f64,
}

#[derive(Serialize)]
struct ConvexityRow {
    #[serde(rename = "K")]
    k: usize,
    m: f64,
    h_bar_d2: f64,
    #[serde(rename = "h_K_d2")]
    h_k_d2: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct CeRow {
    #[serde(rename = "K")]
    k: usize,
    sigma: f64,
    a_ce_d2: f64,
    a_ce_lower: f64,
    a_ce_upper: f64,
}

#[derive(Serialize)]
struct DecayRow {
    distance: usize,
    cov_value: f64,
    rate_c: f64,
    prefactor: f64,
    r_squared: f64,
}

/// Writes study outputs into one directory and remembers what was written.
#[derive(Debug, Default)]
pub struct StudyFiles {
    pub written: Vec<PathBuf>,
}

impl StudyFiles {
    fn put<R: Serialize>(&mut self, dir: &Path, name: &str, rows: &[R]) -> Result<()> {
        let path = dir.join(name);
        write_csv(&path, rows)?;
        self.written.push(path);
        Ok(())
    }

    /// `c0.csv`, `c1.csv`, `c2.csv` and the per-cell `cells.csv`.
    pub fn rate_study(&mut self, dir: &Path, r: &RateStudy) -> Result<()> {
        self.put(dir, "c0.csv", &rate_rows(&r.c0))?;
        self.put(dir, "c1.csv", &rate_rows(&r.c1))?;
        self.put(dir, "c2.csv", &rate_rows(&r.c2))?;
        self.put(dir, "cells.csv", &r.cells)
    }

    pub fn g_derivative(&mut self, dir: &Path, g: &GDerivativeStudy) -> Result<()> {
        let rows: Vec<GRow> = (0..g.k_list.len())
            .map(|i| GRow {
                k: g.k_list[i],
                g0_min: g.g0_min[i],
                g0_max: g.g0_max[i],
                d1_max: g.d1_max[i],
                d2_max: g.d2_max[i],
                d1_exponent: g.d1_exponent,
                d2_exponent: g.d2_exponent,
            })
            .collect();
        self.put(dir, "g_derivative.csv", &rows)
    }

    /// `convexity.csv` over m and `a_ce_convexity.csv` over sigma.
    pub fn convexity(&mut self, dir: &Path, scans: &[ConvexityScan]) -> Result<()> {
        let rows: Vec<ConvexityRow> = scans
            .iter()
            .flat_map(|c| {
                (0..c.m_grid.len()).map(move |i| ConvexityRow {
                    k: c.k,
                    m: c.m_grid[i],
                    h_bar_d2: c.h_bar_d2[i],
                    h_k_d2: c.h_k_d2[i],
                    lower: c.lower,
                    upper: c.upper,
                })
            })
            .collect();
        self.put(dir, "convexity.csv", &rows)?;
        let rows: Vec<CeRow> = scans
            .iter()
            .flat_map(|c| {
                (0..c.sigma_grid.len()).map(move |i| CeRow {
                    k: c.k,
                    sigma: c.sigma_grid[i],
                    a_ce_d2: c.a_ce_d2[i],
                    a_ce_lower: c.a_ce_lower,
                    a_ce_upper: c.a_ce_upper,
                })
            })
            .collect();
        self.put(dir, "a_ce_convexity.csv", &rows)
    }

    pub fn decay(&mut self, dir: &Path, d: &DecayFit) -> Result<()> {
        let rows: Vec<DecayRow> = d
            .distances
            .iter()
            .zip(&d.cov_values)
            .map(|(&distance, &cov_value)| DecayRow {
                distance,
                cov_value,
                rate_c: d.rate_c,
                prefactor: d.prefactor,
                r_squared: d.r_squared,
            })
            .collect();
        self.put(dir, "decay.csv", &rows)
    }
}
