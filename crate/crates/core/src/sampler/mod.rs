//! Monte Carlo chains, independent of the quadrature path.
//!
//! Random numbers come from Xoshiro256++ seeded through SplitMix64
//! (`seed_from_u64`). Uniforms are `(next_u64 >> 11) * 2^-53`, normals are
//! Box-Muller pairs (cosine branch first). A "step" is one proposal.

mod stats;

use std::io::Write;
use std::path::Path;

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

pub use stats::{BatchSums, ChainStats, Estimate, LOW_ACCEPTANCE, MIN_BATCHES};

use crate::error::{Error, Result};
use crate::model::LatticeModel;
use stats::Accumulator;

/// Default proposal widths.
pub const GCE_PROPOSAL_WIDTH: f64 = 1.0;
pub const KAWASAKI_PROPOSAL_WIDTH: f64 = 0.7;
/// Default number of batches.
pub const DEFAULT_BATCHES: usize = 64;

/// Kawasaki increments live on this dyadic lattice so that the spin sum is
/// kept in exact integer arithmetic.
const KAWASAKI_QUANTUM: f64 = 1.0 / 4_294_967_296.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainConfig {
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub proposal_width: f64,
    /// Batches for the standard errors (at least [`MIN_BATCHES`]).
    pub batches: usize,
    /// Steps between recorded states; `None` means one sweep (`K` steps).
    pub record_every: Option<u64>,
    /// Site pairs (0-based) whose covariances are estimated.
    pub pairs: Vec<(usize, usize)>,
    /// Keep every `thin`-th recorded state as trajectory rows.
    pub thin: Option<u64>,
}

impl ChainConfig {
    pub fn gce(steps: u64, seed: u64) -> Self {
        Self {
            steps,
            burn_in: steps / 10,
            seed,
            proposal_width: GCE_PROPOSAL_WIDTH,
            batches: DEFAULT_BATCHES,
            record_every: None,
            pairs: Vec::new(),
            thin: None,
        }
    }

    pub fn kawasaki(steps: u64, seed: u64) -> Self {
        Self {
            proposal_width: KAWASAKI_PROPOSAL_WIDTH,
            ..Self::gce(steps, seed)
        }
    }

    pub fn with_pairs(mut self, pairs: Vec<(usize, usize)>) -> Self {
        self.pairs = pairs;
        self
    }

    fn validate(&self, k: usize) -> Result<u64> {
        if self.steps <= self.burn_in {
            return Err(Error::Config(format!(
                "steps ({}) must exceed burn_in ({})",
                self.steps, self.burn_in
            )));
        }
        if !(self.proposal_width > 0.0 && self.proposal_width.is_finite()) {
            return Err(Error::Config(format!(
                "proposal_width must be positive, got {}",
                self.proposal_width
            )));
        }
        if self.batches < MIN_BATCHES {
            return Err(Error::Config(format!(
                "need at least {MIN_BATCHES} batches, got {}",
                self.batches
            )));
        }
        if let Some(&(i, j)) = self.pairs.iter().find(|&&(i, j)| i >= k || j >= k) {
            return Err(Error::Dimension {
                expected: k,
                got: i.max(j) + 1,
            });
        }
        let every = self.record_every.unwrap_or(k as u64).max(1);
        let records = (self.steps - self.burn_in) / every;
        let batch = records / self.batches as u64;
        if batch == 0 {
            return Err(Error::Config(format!(
                "{records} recorded states cannot fill {} batches; increase steps",
                self.batches
            )));
        }
        Ok(every)
    }
}

/// One trajectory row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: u64,
    pub site: usize,
    pub value: f64,
}

pub struct ChainOutput {
    pub stats: ChainStats,
    pub trajectory: Vec<TraceRow>,
}

/// Seeded generator with the documented uniform and normal transforms.
#[derive(Clone, Debug)]
pub struct ChainRng {
    inner: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl ChainRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform integer in `0..n` by rejection (no modulo bias).
    pub fn below(&mut self, n: u64) -> u64 {
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.inner.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = std::f64::consts::TAU * u2;
        self.spare = Some(r * t.sin());
        r * t.cos()
    }
}

/// `psi(x) + (s_i - sigma) x` minus the bonds of site `i` to its neighbours.
fn site_energy(
    model: &LatticeModel<f64>,
    x: &[f64],
    i: usize,
    sigma: f64,
    skip_bond_to: Option<usize>,
) -> f64 {
    let k = x.len();
    let j = model.coupling();
    let mut e = model.potential().psi(x[i]) + (model.field()[i] - sigma) * x[i];
    if i > 0 && skip_bond_to != Some(i - 1) {
        e -= j * x[i - 1] * x[i];
    }
    if i + 1 < k && skip_bond_to != Some(i + 1) {
        e -= j * x[i] * x[i + 1];
    }
    e
}

/// Energy of the terms touching sites `i` and `j`, each bond counted once.
fn pair_energy(model: &LatticeModel<f64>, x: &[f64], i: usize, j: usize) -> f64 {
    site_energy(model, x, i, 0.0, None) + site_energy(model, x, j, 0.0, Some(i))
}

struct Recorder {
    acc: Accumulator,
    every: u64,
    thin: Option<u64>,
    recorded: u64,
    trajectory: Vec<TraceRow>,
}

impl Recorder {
    fn new(k: usize, cfg: &ChainConfig, every: u64) -> Self {
        let records = (cfg.steps - cfg.burn_in) / every;
        let batch = records / cfg.batches as u64;
        Self {
            acc: Accumulator::new(k, cfg.pairs.clone(), batch),
            every,
            thin: cfg.thin,
            recorded: 0,
            trajectory: Vec::new(),
        }
    }

    /// Called after every step; `step` counts from 1.
    fn after_step(&mut self, step: u64, burn_in: u64, x: &[f64]) -> bool {
        if step <= burn_in || !(step - burn_in).is_multiple_of(self.every) {
            return false;
        }
        self.acc.record(x);
        if let Some(t) = self.thin {
            if self.recorded.is_multiple_of(t.max(1)) {
                self.trajectory
                    .extend(x.iter().enumerate().map(|(site, &value)| TraceRow {
                        step,
                        site,
                        value,
                    }));
            }
        }
        self.recorded += 1;
        true
    }
}

/// Single-site Gaussian-proposal Metropolis chain for the grand canonical
/// measure at the model's `sigma`, started from `x = sigma`.
pub fn metropolis_gce(model: &LatticeModel<f64>, cfg: &ChainConfig) -> Result<ChainOutput> {
    let k = model.size();
    let every = cfg.validate(k)?;
    let sigma = model.sigma();
    let mut rng = ChainRng::new(cfg.seed);
    let mut x = vec![sigma; k];
    let mut rec = Recorder::new(k, cfg, every);
    let (mut accepted, mut proposed) = (0u64, 0u64);
    for step in 1..=cfg.steps {
        let i = rng.below(k as u64) as usize;
        let old = x[i];
        let e_old = site_energy(model, &x, i, sigma, None);
        x[i] = old + cfg.proposal_width * rng.normal();
        let delta = site_energy(model, &x, i, sigma, None) - e_old;
        let accept = delta <= 0.0 || rng.uniform() < (-delta).exp();
        if accept {
            if step > cfg.burn_in {
                accepted += 1;
            }
        } else {
            x[i] = old;
        }
        if step > cfg.burn_in {
            proposed += 1;
        }
        rec.after_step(step, cfg.burn_in, &x);
    }
    let (pairs, raw) = rec.acc.finish();
    let stats = ChainStats::from_batches(k, pairs, raw, accepted, proposed, None)?;
    Ok(ChainOutput {
        stats,
        trajectory: rec.trajectory,
    })
}

/// Mean-conserving pair-exchange chain for the canonical measure at mean
/// spin `m`, started from `x = m`.
///
/// A step picks an ordered pair `i != j` uniformly and proposes
/// `x_i + d, x_j - d` with `d` a Gaussian rounded to a multiple of `2^-32`;
/// offsets from `m` are integers in that unit, so `sum x = K m` holds exactly.
pub fn kawasaki_ce(model: &LatticeModel<f64>, m: f64, cfg: &ChainConfig) -> Result<ChainOutput> {
    let k = model.size();
    if k < 2 {
        return Err(Error::Config("Kawasaki dynamics needs K >= 2".into()));
    }
    if !m.is_finite() {
        return Err(Error::Config(format!("mean spin must be finite, got {m}")));
    }
    let every = cfg.validate(k)?;
    let mut rng = ChainRng::new(cfg.seed);
    let mut offsets = vec![0i64; k];
    let mut x = vec![m; k];
    let mut rec = Recorder::new(k, cfg, every);
    let (mut accepted, mut proposed) = (0u64, 0u64);
    let mut drift: f64 = 0.0;
    for step in 1..=cfg.steps {
        let i = rng.below(k as u64) as usize;
        let mut j = rng.below(k as u64 - 1) as usize;
        if j >= i {
            j += 1;
        }
        let d = (cfg.proposal_width * rng.normal() / KAWASAKI_QUANTUM).round() as i64;
        let e_old = pair_energy(model, &x, i, j);
        let (xi, xj) = (x[i], x[j]);
        x[i] = m + (offsets[i] + d) as f64 * KAWASAKI_QUANTUM;
        x[j] = m + (offsets[j] - d) as f64 * KAWASAKI_QUANTUM;
        let delta = pair_energy(model, &x, i, j) - e_old;
        let accept = delta <= 0.0 || rng.uniform() < (-delta).exp();
        if accept {
            offsets[i] += d;
            offsets[j] -= d;
            if step > cfg.burn_in {
                accepted += 1;
            }
        } else {
            x[i] = xi;
            x[j] = xj;
        }
        if step > cfg.burn_in {
            proposed += 1;
        }
        if rec.after_step(step, cfg.burn_in, &x) {
            drift = drift.max((neumaier_sum(&x) / k as f64 - m).abs());
        }
    }
    if offsets.iter().sum::<i64>() != 0 {
        return Err(Error::Invariant(
            "Kawasaki offsets no longer sum to zero".into(),
        ));
    }
    let (pairs, raw) = rec.acc.finish();
    let stats = ChainStats::from_batches(k, pairs, raw, accepted, proposed, Some(drift))?;
    Ok(ChainOutput {
        stats,
        trajectory: rec.trajectory,
    })
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in xs {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Writes trajectory rows as `step,site,value` CSV.
pub fn write_trajectory_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Same as [`write_trajectory_csv`] into any writer.
pub fn write_trajectory<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
