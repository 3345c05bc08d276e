//! `ensemble-lab`: thermodynamics of both ensembles, equivalence-of-ensembles
//! sweeps, and seeded Monte Carlo chains from a model config file.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ensemble_lab::experiments::{
    convexity_scan, decay_study, rate_study, GDerivativeStudy, SigmaWindow, Study, StudyFiles,
};
use ensemble_lab::model::{load_model, LatticeModel};
use ensemble_lab::sampler::{kawasaki_ce, metropolis_gce, write_trajectory_csv, ChainConfig};
use ensemble_lab::{Error, Result};

use manifest::RunManifest;

/// Environment variable that sets the worker thread count.
const THREADS_ENV: &str = "ENSEMBLE_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "ensemble-lab",
    version,
    about = "Grand canonical and canonical ensembles of 1D spin chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Model config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Gauss-Hermite nodes per site.
    #[arg(long = "grid-n", default_value_t = 128)]
    grid_n: usize,
    /// Inner/outer split of the Fourier inversion, `|xi| = delta sqrt(K)`.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

#[derive(Args, Debug, Clone)]
struct Output {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full thermodynamic report at one field or mean spin, as JSON.
    FreeEnergy {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "m", allow_hyphen_values = true)]
        sigma: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        m: Option<f64>,
    },
    /// Rate study of |A_gce - A_ce| and its derivatives over K.
    Equivalence {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(
            long = "K-list",
            value_delimiter = ',',
            default_value = "8,16,32,64,128,256"
        )]
        k_list: Vec<usize>,
        #[arg(
            long = "sigma-window",
            default_value = "-3,3,25",
            allow_hyphen_values = true
        )]
        sigma_window: String,
    },
    /// Second derivatives of the coarse-grained Hamiltonian and A_ce.
    Convexity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(long = "K-list", value_delimiter = ',', default_value = "32,64,128")]
        k_list: Vec<usize>,
        #[arg(long = "m-grid", default_value = "-2,2,17", allow_hyphen_values = true)]
        m_grid: String,
        #[arg(
            long = "sigma-window",
            default_value = "-3,3,25",
            allow_hyphen_values = true
        )]
        sigma_window: String,
    },
    /// Covariance decay from the centre site, with an exponential fit.
    Correlations {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(long, allow_hyphen_values = true)]
        sigma: Option<f64>,
        /// Largest distance fitted (default min(12, K/2)).
        #[arg(long = "max-distance")]
        max_distance: Option<usize>,
    },
    /// Characteristic function table `xi, re, im` on standard output.
    Chi {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        sigma: Option<f64>,
        #[arg(long = "xi-max", default_value_t = 4.0)]
        xi_max: f64,
        #[arg(long = "xi-n", default_value_t = 41)]
        xi_n: usize,
    },
    /// Seeded Metropolis (gce) or Kawasaki (ce) chain.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: Output,
        #[arg(long, value_enum, default_value_t = Ensemble::Gce)]
        ensemble: Ensemble,
        #[arg(long, allow_hyphen_values = true)]
        sigma: Option<f64>,
        /// Mean spin (canonical chains).
        #[arg(long, allow_hyphen_values = true)]
        m: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long = "burn-in")]
        burn_in: Option<u64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long = "proposal-width")]
        proposal_width: Option<f64>,
        /// Keep every n-th recorded state in the trajectory.
        #[arg(long, default_value_t = 10)]
        thin: u64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Ensemble {
    Gce,
    Ce,
}

fn parse_triple(flag: &str, text: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || Error::Config(format!("--{flag} expects lo,hi,n; got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parts[0].parse().map_err(|_| bad())?;
    let hi = parts[1].parse().map_err(|_| bad())?;
    let n = parts[2].parse().map_err(|_| bad())?;
    Ok((lo, hi, n))
}

fn window(text: &str) -> Result<SigmaWindow> {
    let (lo, hi, n) = parse_triple("sigma-window", text)?;
    if lo < -3.0 || hi > 3.0 {
        eprintln!("warning: sigma window [{lo}, {hi}] extends beyond [-3, 3]");
    }
    SigmaWindow::new(lo, hi, n)
}

fn study(common: &Common, model: LatticeModel<f64>) -> Result<Study> {
    if common.delta.is_nan() || common.delta <= 0.0 {
        return Err(Error::Config(format!(
            "--delta must be positive, got {}",
            common.delta
        )));
    }
    Ok(Study::new(model)
        .with_grid_n(common.grid_n)
        .with_delta(common.delta))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        Error::Config(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

fn free_energy(common: Common, sigma: Option<f64>, m: Option<f64>) -> Result<()> {
    let model = load_model::<f64>(&common.config)?;
    let mut s = study(&common, model.clone())?;
    let report = match m {
        Some(m) => s.ensemble(model.size())?.report_at_m(m)?,
        None => {
            let sigma = sigma.unwrap_or(model.sigma());
            s = s.with_window(SigmaWindow::new(sigma, sigma, 1)?);
            s.ensemble(model.size())?.report_at_sigma(sigma)?
        }
    };
    println!("{}", report.to_json()?);
    Ok(())
}

fn equivalence(
    common: Common,
    output: Output,
    k_list: Vec<usize>,
    sigma_window: String,
) -> Result<()> {
    let started = RunManifest::start("equivalence", &common.config)?;
    let clock = Instant::now();
    let model = load_model::<f64>(&common.config)?;
    let s = study(&common, model)?.with_window(window(&sigma_window)?);
    let r = rate_study(&s, &k_list)?;
    let g = GDerivativeStudy::from_cells(&k_list, &r.cells, s.settings.h_sigma);
    create_dir(&output.out)?;
    let mut files = StudyFiles::default();
    files.rate_study(&output.out, &r)?;
    files.g_derivative(&output.out, &g)?;
    let grid = s.ensemble(*k_list.last().expect("validated K list"))?;
    started
        .with_grid(s.grid_n, grid.grid().truncation())
        .with_window(s.window)
        .finish(&output.out, files.written, clock)?;
    for fit in [&r.c0, &r.c1, &r.c2] {
        let (slope, r2) = fit.effective();
        eprintln!("{:?}: slope {slope:.4} (r^2 {r2:.4})", fit.quantity_tag);
    }
    Ok(())
}

fn convexity(
    common: Common,
    output: Output,
    k_list: Vec<usize>,
    m_grid: String,
    sigma_window: String,
) -> Result<()> {
    let started = RunManifest::start("convexity", &common.config)?;
    let clock = Instant::now();
    let model = load_model::<f64>(&common.config)?;
    let s = study(&common, model)?.with_window(window(&sigma_window)?);
    let (lo, hi, n) = parse_triple("m-grid", &m_grid)?;
    let m_points = SigmaWindow::new(lo, hi, n)?.points();
    if k_list.is_empty() {
        return Err(Error::Config("empty --K-list".into()));
    }
    let scans = k_list
        .iter()
        .map(|&k| convexity_scan(&s, k, &m_points))
        .collect::<Result<Vec<_>>>()?;
    create_dir(&output.out)?;
    let mut files = StudyFiles::default();
    files.convexity(&output.out, &scans)?;
    let grid = s.ensemble(k_list[0])?;
    started
        .with_grid(s.grid_n, grid.grid().truncation())
        .with_window(s.window)
        .finish(&output.out, files.written, clock)?;
    for c in &scans {
        eprintln!(
            "K = {}: h_bar'' in [{:.4}, {:.4}], a_ce'' in [{:.4}, {:.4}]",
            c.k, c.lower, c.upper, c.a_ce_lower, c.a_ce_upper
        );
    }
    Ok(())
}

fn correlations(
    common: Common,
    output: Output,
    sigma: Option<f64>,
    max_distance: Option<usize>,
) -> Result<()> {
    let started = RunManifest::start("correlations", &common.config)?;
    let clock = Instant::now();
    let mut model = load_model::<f64>(&common.config)?;
    if let Some(sigma) = sigma {
        model = model.with_sigma(sigma);
    }
    let d = max_distance.unwrap_or_else(|| 12.min(model.size() / 2));
    let fit = decay_study(
        &model,
        common.grid_n,
        ensemble_lab::quadrature::DEFAULT_TARGET_TOL,
        d,
    )?;
    create_dir(&output.out)?;
    let mut files = StudyFiles::default();
    files.decay(&output.out, &fit)?;
    let grid = ensemble_lab::quadrature::build_grid(
        &model,
        common.grid_n,
        ensemble_lab::quadrature::DEFAULT_TARGET_TOL,
    )?;
    started.with_grid(common.grid_n, grid.truncation()).finish(
        &output.out,
        files.written,
        clock,
    )?;
    println!(
        "{}",
        serde_json::to_string_pretty(&fit).map_err(|e| Error::Serialization(e.to_string()))?
    );
    Ok(())
}

fn chi(common: Common, sigma: Option<f64>, xi_max: f64, xi_n: usize) -> Result<()> {
    if xi_n < 2 || xi_max.is_nan() || xi_max <= 0.0 {
        return Err(Error::Config("need --xi-max > 0 and --xi-n >= 2".into()));
    }
    let model = load_model::<f64>(&common.config)?;
    let sigma = sigma.unwrap_or(model.sigma());
    let s = study(&common, model.clone())?.with_window(SigmaWindow::new(sigma, sigma, 1)?);
    let e = s.ensemble(model.size())?;
    let m = e.moments(sigma, 1)?.m;
    let xis: Vec<f64> = (0..xi_n)
        .map(|i| xi_max * i as f64 / (xi_n - 1) as f64)
        .collect();
    let phi = e.char_fn_batch(sigma, m, &xis)?;
    let mut out = String::from("xi,re,im\n");
    for (xi, z) in xis.iter().zip(&phi) {
        out.push_str(&format!("{xi:?},{:?},{:?}\n", z.re, z.im));
    }
    print!("{out}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sample(
    config: PathBuf,
    output: Output,
    ensemble: Ensemble,
    sigma: Option<f64>,
    m: Option<f64>,
    steps: u64,
    burn_in: Option<u64>,
    seed: u64,
    proposal_width: Option<f64>,
    thin: u64,
) -> Result<()> {
    let started = RunManifest::start("sample", &config)?;
    let clock = Instant::now();
    let mut model = load_model::<f64>(&config)?;
    if let Some(sigma) = sigma {
        model = model.with_sigma(sigma);
    }
    let mut cfg = match ensemble {
        Ensemble::Gce => ChainConfig::gce(steps, seed),
        Ensemble::Ce => ChainConfig::kawasaki(steps, seed),
    };
    if let Some(b) = burn_in {
        cfg.burn_in = b;
    }
    if let Some(w) = proposal_width {
        cfg.proposal_width = w;
    }
    cfg.thin = Some(thin.max(1));
    let out = match ensemble {
        Ensemble::Gce => metropolis_gce(&model, &cfg)?,
        Ensemble::Ce => {
            let m = m.ok_or_else(|| Error::Config("--ensemble ce needs --m".into()))?;
            kawasaki_ce(&model, m, &cfg)?
        }
    };
    if out.stats.low_acceptance {
        eprintln!(
            "warning: acceptance rate {:.4} is below 1%",
            out.stats.acceptance_rate
        );
    }
    create_dir(&output.out)?;
    let trajectory = output.out.join("trajectory.csv");
    write_trajectory_csv(&trajectory, &out.trajectory)?;
    let stats = output.out.join("stats.json");
    std::fs::write(&stats, out.stats.to_json()? + "\n")?;
    started
        .with_seed(seed)
        .finish(&output.out, vec![trajectory, stats], clock)?;
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value.parse().map_err(|_| {
        Error::Config(format!(
            "{THREADS_ENV} must be a positive integer, got {value:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot configure {n} threads: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::FreeEnergy { common, sigma, m } => free_energy(common, sigma, m),
        Command::Equivalence {
            common,
            output,
            k_list,
            sigma_window,
        } => equivalence(common, output, k_list, sigma_window),
        Command::Convexity {
            common,
            output,
            k_list,
            m_grid,
            sigma_window,
        } => convexity(common, output, k_list, m_grid, sigma_window),
        Command::Correlations {
            common,
            output,
            sigma,
            max_distance,
        } => correlations(common, output, sigma, max_distance),
        Command::Chi {
            common,
            sigma,
            xi_max,
            xi_n,
        } => chi(common, sigma, xi_max, xi_n),
        Command::Sample {
            config,
            output,
            ensemble,
            sigma,
            m,
            steps,
            burn_in,
            seed,
            proposal_width,
            thin,
        } => sample(
            config,
            output,
            ensemble,
            sigma,
            m,
            steps,
            burn_in,
            seed,
            proposal_width,
            thin,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
