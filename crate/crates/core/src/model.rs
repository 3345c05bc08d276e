//! The spin chain: single-site potential, Hamiltonian, and the TOML
//! configuration document that describes a model.
//!
//! The full single-site potential is `psi(z) = z^2/2 + psi_b(z)`. Only the
//! bounded perturbation `psi_b` is represented; the quadratic part is implied
//! everywhere (the quadrature absorbs it into its weights).

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Provenance of the perturbation `psi_b`.
#[derive(Clone, Debug, PartialEq)]
pub enum KindTag {
    Zero,
    Cosine(f64, f64),
    Custom,
}

/// `psi_b` tabulated as (value, first, second derivative) on an increasing grid.
///
/// Between nodes the value is the cubic Hermite interpolant of (value, d1),
/// the first derivative the cubic Hermite interpolant of (d1, d2), and the
/// second derivative is linear. Outside the table the value is held at the
/// edge value and both derivatives are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedPerturbation<T> {
    z: Vec<T>,
    value: Vec<T>,
    d1: Vec<T>,
    d2: Vec<T>,
    source: Option<PathBuf>,
}

fn hermite<T: Real>(t: T, h: T, y0: T, dy0: T, y1: T, dy1: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = two * t3 - three * t2 + one;
    let h10 = t3 - two * t2 + t;
    let h01 = three * t2 - two * t3;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * dy0 + h01 * y1 + h11 * h * dy1
}

impl<T: Real> TabulatedPerturbation<T> {
    pub fn new(z: Vec<T>, value: Vec<T>, d1: Vec<T>, d2: Vec<T>) -> Result<Self> {
        let n = z.len();
        if n < 2 {
            return Err(Error::Config(
                "potential table needs at least 2 rows".into(),
            ));
        }
        for (name, col) in [("value", &value), ("d1", &d1), ("d2", &d2)] {
            if col.len() != n {
                return Err(Error::Config(format!(
                    "potential table column `{name}` has {} rows, expected {n}",
                    col.len()
                )));
            }
        }
        if z.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "potential table z must be strictly increasing".into(),
            ));
        }
        if z.iter()
            .chain(&value)
            .chain(&d1)
            .chain(&d2)
            .any(|x| !x.is_finite())
        {
            return Err(Error::Config(
                "potential table contains non-finite entries".into(),
            ));
        }
        Ok(Self {
            z,
            value,
            d1,
            d2,
            source: None,
        })
    }

    /// Reads a CSV file with header `z,value,d1,d2`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            message: e.to_string(),
        })?;
        let headers = reader.headers()?.clone();
        let expected = ["z", "value", "d1", "d2"];
        if headers.iter().map(str::trim).ne(expected.iter().copied()) {
            return Err(Error::Parse {
                source_name: path.display().to_string(),
                message: format!("expected header z,value,d1,d2, found {:?}", headers),
            });
        }
        let (mut z, mut v, mut a, mut b) = (vec![], vec![], vec![], vec![]);
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            let mut vals = [0.0f64; 4];
            for (k, slot) in vals.iter_mut().enumerate() {
                let field = rec.get(k).ok_or_else(|| Error::Parse {
                    source_name: path.display().to_string(),
                    message: format!("line {}: missing column {}", row + 2, expected[k]),
                })?;
                *slot = field.trim().parse().map_err(|e| Error::Parse {
                    source_name: path.display().to_string(),
                    message: format!("line {}: {e}", row + 2),
                })?;
            }
            z.push(T::lit(vals[0]));
            v.push(T::lit(vals[1]));
            a.push(T::lit(vals[2]));
            b.push(T::lit(vals[3]));
        }
        let mut table = Self::new(z, v, a, b)?;
        table.source = Some(path.to_path_buf());
        Ok(table)
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn eval(&self, x: T) -> (T, T, T) {
        let n = self.z.len();
        if x <= self.z[0] {
            return (self.value[0], T::zero(), T::zero());
        }
        if x >= self.z[n - 1] {
            return (self.value[n - 1], T::zero(), T::zero());
        }
        let hi = self.z.partition_point(|&zk| zk <= x).min(n - 1);
        let lo = hi - 1;
        let h = self.z[hi] - self.z[lo];
        let t = (x - self.z[lo]) / h;
        let v = hermite(
            t,
            h,
            self.value[lo],
            self.d1[lo],
            self.value[hi],
            self.d1[hi],
        );
        let d1 = hermite(t, h, self.d1[lo], self.d2[lo], self.d1[hi], self.d2[hi]);
        let d2 = self.d2[lo] + t * (self.d2[hi] - self.d2[lo]);
        (v, d1, d2)
    }

    /// Sum of sup norms of the three interpolants, estimated on a dense
    /// sub-grid (16 points per cell) with a 1% margin.
    fn sampled_bound(&self) -> T {
        let (mut a, mut b, mut c) = (T::zero(), T::zero(), T::zero());
        for w in self.z.windows(2) {
            for k in 0..=16 {
                let x = w[0] + (w[1] - w[0]) * T::lit(k as f64 / 16.0);
                let (v, d1, d2) = self.eval(x);
                a = a.max(v.abs());
                b = b.max(d1.abs());
                c = c.max(d2.abs());
            }
        }
        (a + b + c) * T::lit(1.01)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Perturbation<T> {
    Zero,
    Cosine { amplitude: T, frequency: T },
    Tabulated(Arc<TabulatedPerturbation<T>>),
}

/// Bounded perturbation `psi_b` of the Gaussian single-site potential.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleSitePotential<T> {
    perturbation: Perturbation<T>,
    bound_sup: T,
}

impl<T: Real> SingleSitePotential<T> {
    pub fn zero() -> Self {
        Self {
            perturbation: Perturbation::Zero,
            bound_sup: T::zero(),
        }
    }

    /// `psi_b(z) = a cos(b z)`.
    pub fn cosine(a: T, b: T) -> Self {
        let bound_sup = a.abs() * (T::one() + b.abs() + b * b);
        Self {
            perturbation: Perturbation::Cosine {
                amplitude: a,
                frequency: b,
            },
            bound_sup,
        }
    }

    pub fn tabulated(table: TabulatedPerturbation<T>) -> Self {
        let bound_sup = table.sampled_bound();
        Self {
            perturbation: Perturbation::Tabulated(Arc::new(table)),
            bound_sup,
        }
    }

    /// `(psi_b(z), psi_b'(z), psi_b''(z))`.
    #[inline]
    pub fn eval(&self, z: T) -> (T, T, T) {
        match &self.perturbation {
            Perturbation::Zero => (T::zero(), T::zero(), T::zero()),
            Perturbation::Cosine {
                amplitude: a,
                frequency: b,
            } => {
                let (s, c) = (*b * z).sin_cos();
                (*a * c, -*a * *b * s, -*a * *b * *b * c)
            }
            Perturbation::Tabulated(t) => t.eval(z),
        }
    }

    #[inline]
    pub fn perturbation(&self, z: T) -> T {
        match &self.perturbation {
            Perturbation::Zero => T::zero(),
            Perturbation::Cosine {
                amplitude,
                frequency,
            } => *amplitude * (*frequency * z).cos(),
            Perturbation::Tabulated(t) => t.eval(z).0,
        }
    }

    /// Full potential `z^2/2 + psi_b(z)`.
    #[inline]
    pub fn psi(&self, z: T) -> T {
        T::lit(0.5) * z * z + self.perturbation(z)
    }

    pub fn bound_sup(&self) -> T {
        self.bound_sup
    }

    pub fn kind_tag(&self) -> KindTag {
        match &self.perturbation {
            Perturbation::Zero => KindTag::Zero,
            Perturbation::Cosine {
                amplitude,
                frequency,
            } => KindTag::Cosine(amplitude.to_f64_lossy(), frequency.to_f64_lossy()),
            Perturbation::Tabulated(_) => KindTag::Custom,
        }
    }

    /// True when `psi_b` is known to be even.
    pub fn is_even(&self) -> bool {
        !matches!(self.perturbation, Perturbation::Tabulated(_))
    }

    pub fn is_zero(&self) -> bool {
        match &self.perturbation {
            Perturbation::Zero => true,
            Perturbation::Cosine { amplitude, .. } => amplitude.is_zero(),
            Perturbation::Tabulated(_) => false,
        }
    }

    fn table(&self) -> Option<&TabulatedPerturbation<T>> {
        match &self.perturbation {
            Perturbation::Tabulated(t) => Some(t),
            _ => None,
        }
    }
}

/// A chain of `K` unbounded spins with nearest-neighbour coupling `J`.
///
/// `H(x) = sum_i psi(x_i) + s_i x_i - J x_i x_{i+1}` with `x_{K+1} = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeModel<T> {
    size: usize,
    coupling: T,
    field: Vec<T>,
    sigma: T,
    potential: SingleSitePotential<T>,
}

impl<T: Real> LatticeModel<T> {
    /// Builds a model; `field` may have length 1 (broadcast) or `size`.
    pub fn new(
        size: usize,
        coupling: T,
        field: Vec<T>,
        sigma: T,
        potential: SingleSitePotential<T>,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !(coupling.abs() < T::lit(0.25)) {
            return Err(Error::Config(format!(
                "J out of range: got J = {coupling}, the model requires |J| < 1/4"
            )));
        }
        let field = match field.len() {
            1 => vec![field[0]; size],
            n if n == size => field,
            n => {
                return Err(Error::Config(format!(
                    "s has {n} entries; expected a scalar or {size} entries"
                )))
            }
        };
        if field.iter().any(|x| !x.is_finite()) || !sigma.is_finite() {
            return Err(Error::Config("s and sigma must be finite".into()));
        }
        Ok(Self {
            size,
            coupling,
            field,
            sigma,
            potential,
        })
    }

    /// Gaussian chain (`psi_b = 0`, `s = 0`).
    pub fn gaussian(size: usize, coupling: T, sigma: T) -> Result<Self> {
        Self::new(
            size,
            coupling,
            vec![T::zero()],
            sigma,
            SingleSitePotential::zero(),
        )
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn coupling(&self) -> T {
        self.coupling
    }

    pub fn field(&self) -> &[T] {
        &self.field
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn potential(&self) -> &SingleSitePotential<T> {
        &self.potential
    }

    pub fn with_sigma(&self, sigma: T) -> Self {
        Self {
            sigma,
            ..self.clone()
        }
    }

    /// Same model on a chain of a different length; needs a uniform field.
    pub fn with_size(&self, size: usize) -> Result<Self> {
        let s0 = self.field[0];
        if self.field.iter().any(|&s| s != s0) {
            return Err(Error::Config(
                "cannot resize a model with a non-uniform field s".into(),
            ));
        }
        Self::new(
            size,
            self.coupling,
            vec![s0],
            self.sigma,
            self.potential.clone(),
        )
    }

    pub fn max_abs_field(&self) -> T {
        self.field.iter().fold(T::zero(), |m, s| m.max(s.abs()))
    }

    /// Invariant under `x -> -x` at `sigma = 0` (zero field, even `psi_b`).
    pub fn is_symmetric(&self) -> bool {
        self.potential.is_even() && self.field.iter().all(|s| s.is_zero())
    }

    /// Site factor exponent `(sigma - s_i) x - psi_b(x)`; the quadratic part
    /// lives in the quadrature weights.
    #[inline]
    pub(crate) fn site_exponent(&self, site: usize, sigma: T, x: T) -> T {
        (sigma - self.field[site]) * x - self.potential.perturbation(x)
    }

    pub fn hamiltonian(&self, x: &[T]) -> Result<T> {
        if x.len() != self.size {
            return Err(Error::Dimension {
                expected: self.size,
                got: x.len(),
            });
        }
        let mut h = T::zero();
        for i in 0..self.size {
            let next = if i + 1 < self.size {
                x[i + 1]
            } else {
                T::zero()
            };
            h = h + self.potential.psi(x[i]) + self.field[i] * x[i] - self.coupling * x[i] * next;
        }
        Ok(h)
    }

    /// Serializable configuration equivalent to this model.
    pub fn to_config(&self) -> ModelConfig {
        let s0 = self.field[0];
        let s = if self.field.iter().all(|&v| v == s0) {
            FieldValue::Scalar(s0.to_f64_lossy())
        } else {
            FieldValue::Vector(self.field.iter().map(|v| v.to_f64_lossy()).collect())
        };
        let potential = match self.potential.kind_tag() {
            KindTag::Zero => PotentialConfig {
                kind: PotentialKind::Zero,
                a: None,
                b: None,
                table_path: None,
            },
            KindTag::Cosine(a, b) => PotentialConfig {
                kind: PotentialKind::Cosine,
                a: Some(a),
                b: Some(b),
                table_path: None,
            },
            KindTag::Custom => PotentialConfig {
                kind: PotentialKind::Custom,
                a: None,
                b: None,
                table_path: self
                    .potential
                    .table()
                    .and_then(|t| t.source())
                    .map(|p| p.display().to_string()),
            },
        };
        ModelConfig {
            size: self.size,
            coupling: self.coupling.to_f64_lossy(),
            s,
            sigma: self.sigma.to_f64_lossy(),
            potential,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_config()).expect("model config serializes")
    }
}

impl<T: Real> fmt::Display for LatticeModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "K={} J={} sigma={} psi_b={:?} max|s|={}",
            self.size,
            self.coupling,
            self.sigma,
            self.potential.kind_tag(),
            self.max_abs_field()
        )
    }
}

/// `s` in a config document: a broadcast scalar or one value per site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Default for FieldValue {
    fn default() -> Self {
        FieldValue::Scalar(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Zero,
    Cosine,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_path: Option<String>,
}

/// The model configuration document.
///
/// ```toml
/// K = 64
/// J = 0.2
/// s = 0.0          # scalar (broadcast) or an array of K values
/// sigma = 0.5
///
/// [potential]
/// kind = "cosine"  # "zero" | "cosine" | "custom"
/// a = 0.5
/// b = 1.0
/// # table_path = "psi_b.csv"   (kind = "custom"; columns z,value,d1,d2)
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "K")]
    pub size: usize,
    #[serde(rename = "J")]
    pub coupling: f64,
    #[serde(default)]
    pub s: FieldValue,
    #[serde(default)]
    pub sigma: f64,
    pub potential: PotentialConfig,
}

impl ModelConfig {
    /// Validates and builds the model. Relative table paths resolve against `base_dir`.
    pub fn build<T: Real>(&self, base_dir: Option<&Path>) -> Result<LatticeModel<T>> {
        let p = &self.potential;
        let potential = match p.kind {
            PotentialKind::Zero => {
                if p.a.is_some() || p.b.is_some() || p.table_path.is_some() {
                    return Err(Error::Config(
                        "potential.kind = \"zero\" takes no parameters".into(),
                    ));
                }
                SingleSitePotential::zero()
            }
            PotentialKind::Cosine => {
                if p.table_path.is_some() {
                    return Err(Error::Config(
                        "potential.table_path is only valid for kind = \"custom\"".into(),
                    ));
                }
                let (a, b) =
                    match (p.a, p.b) {
                        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => (a, b),
                        _ => return Err(Error::Config(
                            "potential.kind = \"cosine\" needs finite potential.a and potential.b"
                                .into(),
                        )),
                    };
                SingleSitePotential::cosine(T::lit(a), T::lit(b))
            }
            PotentialKind::Custom => {
                if p.a.is_some() || p.b.is_some() {
                    return Err(Error::Config(
                        "potential.a/b are only valid for kind = \"cosine\"".into(),
                    ));
                }
                let rel = p.table_path.as_ref().ok_or_else(|| {
                    Error::Config("potential.kind = \"custom\" needs potential.table_path".into())
                })?;
                let path = match base_dir {
                    Some(dir) if Path::new(rel).is_relative() => dir.join(rel),
                    _ => PathBuf::from(rel),
                };
                let mut table = TabulatedPerturbation::from_csv(&path)?;
                table.source = Some(PathBuf::from(rel));
                SingleSitePotential::tabulated(table)
            }
        };
        let field = match &self.s {
            FieldValue::Scalar(v) => vec![T::lit(*v)],
            FieldValue::Vector(v) => v.iter().map(|&x| T::lit(x)).collect(),
        };
        LatticeModel::new(
            self.size,
            T::lit(self.coupling),
            field,
            T::lit(self.sigma),
            potential,
        )
    }
}

/// Parses a config document; `source_name` is used in error messages.
pub fn parse_model<T: Real>(
    text: &str,
    source_name: &str,
    base_dir: Option<&Path>,
) -> Result<LatticeModel<T>> {
    let cfg: ModelConfig = toml::from_str(text).map_err(|e| Error::Parse {
        source_name: source_name.to_string(),
        message: e.to_string(),
    })?;
    cfg.build(base_dir)
}

/// Reads and validates a model config file.
pub fn load_model<T: Real>(path: &Path) -> Result<LatticeModel<T>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_model(&text, &path.display().to_string(), path.parent())
}
