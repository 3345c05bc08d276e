//! Batch-means accumulation of chain observables.

use serde::Serialize;

use crate::error::{Error, Result};

/// A value with its batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `|value - reference|` in units of the standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.value - reference).abs() / self.se
    }
}

/// Raw sums of one batch of recorded states.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchSums {
    pub records: u64,
    pub site: Vec<f64>,
    pub site_sq: Vec<f64>,
    pub total: f64,
    pub total_sq: f64,
    pub pair_products: Vec<f64>,
}

impl BatchSums {
    fn new(k: usize, pairs: usize) -> Self {
        Self {
            records: 0,
            site: vec![0.0; k],
            site_sq: vec![0.0; k],
            total: 0.0,
            total_sq: 0.0,
            pair_products: vec![0.0; pairs],
        }
    }
}

/// Collects records into fixed-size batches; a partial trailing batch is dropped.
#[derive(Clone, Debug)]
pub(crate) struct Accumulator {
    batch_size: u64,
    pairs: Vec<(usize, usize)>,
    current: BatchSums,
    done: Vec<BatchSums>,
}

impl Accumulator {
    pub fn new(k: usize, pairs: Vec<(usize, usize)>, batch_size: u64) -> Self {
        let current = BatchSums::new(k, pairs.len());
        Self {
            batch_size,
            pairs,
            current,
            done: Vec::new(),
        }
    }

    pub fn record(&mut self, x: &[f64]) {
        let b = &mut self.current;
        let mut total = 0.0;
        for (i, &v) in x.iter().enumerate() {
            b.site[i] += v;
            b.site_sq[i] += v * v;
            total += v;
        }
        b.total += total;
        b.total_sq += total * total;
        for (slot, &(i, j)) in b.pair_products.iter_mut().zip(&self.pairs) {
            *slot += x[i] * x[j];
        }
        b.records += 1;
        if b.records == self.batch_size {
            let fresh = BatchSums::new(x.len(), self.pairs.len());
            self.done.push(std::mem::replace(&mut self.current, fresh));
        }
    }

    pub fn finish(self) -> (Vec<(usize, usize)>, Vec<BatchSums>) {
        (self.pairs, self.done)
    }
}

/// Minimum number of batches behind every standard error.
pub const MIN_BATCHES: usize = 32;
/// Acceptance rates below this set [`ChainStats::low_acceptance`].
pub const LOW_ACCEPTANCE: f64 = 0.01;

/// Summary of one or more chains.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainStats {
    #[serde(rename = "K")]
    pub k: usize,
    pub records: u64,
    pub batches: usize,
    pub site_means: Vec<Estimate>,
    pub site_variances: Vec<Estimate>,
    pub sum_mean: Estimate,
    pub sum_variance: Estimate,
    pub pairs: Vec<(usize, usize)>,
    pub pair_covariances: Vec<Estimate>,
    pub accepted: u64,
    pub proposed: u64,
    pub acceptance_rate: f64,
    pub low_acceptance: bool,
    /// Largest `|mean(x) - m|` seen (conserving chains only).
    pub max_mean_drift: Option<f64>,
    #[serde(skip)]
    raw: Vec<BatchSums>,
}

fn batch_estimate(values: &[f64]) -> Estimate {
    let b = values.len() as f64;
    let mean = values.iter().sum::<f64>() / b;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Estimate {
        value: mean,
        se: (ss / (b * (b - 1.0))).sqrt(),
    }
}

impl ChainStats {
    pub(crate) fn from_batches(
        k: usize,
        pairs: Vec<(usize, usize)>,
        raw: Vec<BatchSums>,
        accepted: u64,
        proposed: u64,
        max_mean_drift: Option<f64>,
    ) -> Result<Self> {
        if raw.len() < MIN_BATCHES {
            return Err(Error::Config(format!(
                "only {} complete batches recorded, need at least {MIN_BATCHES}; increase steps",
                raw.len()
            )));
        }
        let n: u64 = raw.iter().map(|b| b.records).sum();
        let nf = n as f64;
        let per = |f: &dyn Fn(&BatchSums) -> f64| -> Vec<f64> {
            raw.iter().map(|b| f(b) / b.records as f64).collect()
        };
        let grand = |f: &dyn Fn(&BatchSums) -> f64| -> f64 { raw.iter().map(f).sum::<f64>() / nf };

        let mut site_means = Vec::with_capacity(k);
        let mut site_variances = Vec::with_capacity(k);
        let mut centres = Vec::with_capacity(k);
        for i in 0..k {
            let mu = grand(&|b| b.site[i]);
            centres.push(mu);
            site_means.push(batch_estimate(&per(&|b| b.site[i])));
            // Per batch: mean of (x - mu)^2 about the grand mean.
            let v = per(&|b| b.site_sq[i] - 2.0 * mu * b.site[i] + mu * mu * b.records as f64);
            site_variances.push(batch_estimate(&v));
        }
        let s_mu = grand(&|b| b.total);
        let sum_mean = batch_estimate(&per(&|b| b.total));
        let sum_variance = batch_estimate(&per(&|b| {
            b.total_sq - 2.0 * s_mu * b.total + s_mu * s_mu * b.records as f64
        }));
        let pair_covariances = pairs
            .iter()
            .enumerate()
            .map(|(p, &(i, j))| {
                let (mi, mj) = (centres[i], centres[j]);
                batch_estimate(&per(&|b| {
                    b.pair_products[p] - mi * b.site[j] - mj * b.site[i]
                        + mi * mj * b.records as f64
                }))
            })
            .collect();
        let acceptance_rate = if proposed == 0 {
            0.0
        } else {
            accepted as f64 / proposed as f64
        };
        Ok(Self {
            k,
            records: n,
            batches: raw.len(),
            site_means,
            site_variances,
            sum_mean,
            sum_variance,
            pairs,
            pair_covariances,
            accepted,
            proposed,
            acceptance_rate,
            low_acceptance: acceptance_rate < LOW_ACCEPTANCE,
            max_mean_drift,
            raw,
        })
    }

    /// Pools two runs of the same observables; batches are concatenated in
    /// argument order, so the operation is associative.
    pub fn merge(&self, other: &ChainStats) -> Result<ChainStats> {
        if self.k != other.k || self.pairs != other.pairs {
            return Err(Error::Config(
                "cannot merge chains with different sites or pairs".into(),
            ));
        }
        let mut raw = self.raw.clone();
        raw.extend(other.raw.iter().cloned());
        let drift = match (self.max_mean_drift, other.max_mean_drift) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        ChainStats::from_batches(
            self.k,
            self.pairs.clone(),
            raw,
            self.accepted + other.accepted,
            self.proposed + other.proposed,
            drift,
        )
    }

    pub fn covariance(&self, i: usize, j: usize) -> Option<Estimate> {
        self.pairs
            .iter()
            .position(|&p| p == (i, j))
            .map(|p| self.pair_covariances[p])
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}
