//! Design matrices, noise and signal priors, and assembled model instances.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ShapeBuilder};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// Law of the standardized design `sqrt(m) * A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignKind {
    /// i.i.d. standard normal entries.
    GaussianIid,
    /// i.i.d. Student-t entries rescaled to unit variance.
    StudentT { df: f64 },
    /// Rows `U_i * Z_i` with `U` on `{+atom, -atom, 0}`, `P(U = ±atom) = p_atom` each.
    IsotropicThreePoint { atom: f64, p_atom: f64 },
    /// Rows `U_i * Z_i` with `U` on `{±1/L, ±S}`, `P(|U| = S) = 1/m`, `E U^2 = 1`.
    CounterexampleTwoPoint { l: f64 },
}

/// Law of the noise vector `xi = sigma * xi0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian { sigma: f64 },
    StudentT { df: f64, sigma: f64 },
    Zero,
}

/// Law of the i.i.d. signal coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    GaussianIid { sd: f64 },
    PointMass { value: f64 },
    /// `value` with probability `fraction`, zero otherwise.
    SparseTwoPoint { value: f64, fraction: f64 },
}

fn check_df(df: f64) -> Result<()> {
    if df > 2.0 && df.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "Student-t degrees of freedom must exceed 2 for a finite variance, got {df}"
        )))
    }
}

/// Sample `StudentT(df)` scaled to unit variance.
fn unit_t(df: f64) -> Result<impl Distribution<f64>> {
    check_df(df)?;
    let t = StudentT::new(df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let scale = ((df - 2.0) / df).sqrt();
    Ok(t.map(move |x| x * scale))
}

impl DesignKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DesignKind::GaussianIid => Ok(()),
            DesignKind::StudentT { df } => check_df(df),
            DesignKind::IsotropicThreePoint { atom, p_atom } => {
                if !(atom > 0.0 && p_atom > 0.0 && p_atom <= 0.5) {
                    return Err(Error::InvalidParameter(format!(
                        "three-point design needs atom > 0 and p_atom in (0, 1/2], got ({atom}, {p_atom})"
                    )));
                }
                let second_moment = 2.0 * p_atom * atom * atom;
                if (second_moment - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "three-point design must satisfy 2 p_atom atom^2 = 1, got {second_moment}"
                    )));
                }
                Ok(())
            }
            DesignKind::CounterexampleTwoPoint { l } => {
                if l > 1.0 && l.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("counterexample design needs L > 1, got {l}")))
                }
            }
        }
    }

    /// Three-point design with the atom chosen so that `E U^2 = 1`.
    pub fn isotropic_three_point(p_atom: f64) -> Result<Self> {
        let kind = DesignKind::IsotropicThreePoint { atom: (0.5 / p_atom).sqrt(), p_atom };
        kind.validate()?;
        Ok(kind)
    }

    pub fn is_isotropic_rows(&self) -> bool {
        matches!(self, DesignKind::IsotropicThreePoint { .. } | DesignKind::CounterexampleTwoPoint { .. })
    }

    /// Noise law matching this design's entry law:
    /// Student-t designs get Student-t noise, everything else Gaussian noise.
    pub fn matched_noise(&self, sigma: f64) -> NoiseKind {
        match *self {
            DesignKind::StudentT { df } => NoiseKind::StudentT { df, sigma },
            _ => NoiseKind::Gaussian { sigma },
        }
    }
}

/// Large atom `S = sqrt(m (1 - L^-2 (1 - 1/m)))` of the counterexample multiplier.
pub fn counterexample_large_atom(l: f64, m: usize) -> f64 {
    let mf = m as f64;
    (mf * (1.0 - (1.0 - 1.0 / mf) / (l * l))).sqrt()
}

/// Row multiplier for the isotropic kinds.
fn row_multiplier(kind: &DesignKind, m: usize, rng: &mut Stream) -> f64 {
    match *kind {
        DesignKind::IsotropicThreePoint { atom, p_atom } => {
            let u: f64 = rng.random();
            if u < p_atom {
                atom
            } else if u < 2.0 * p_atom {
                -atom
            } else {
                0.0
            }
        }
        DesignKind::CounterexampleTwoPoint { l } => {
            let large = rng.random::<f64>() < 1.0 / m as f64;
            let magnitude = if large { counterexample_large_atom(l, m) } else { 1.0 / l };
            if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        }
        _ => 1.0,
    }
}

/// Draw an `m x n` design already divided by `sqrt(m)`, stored column-major.
pub fn sample_design(kind: &DesignKind, m: usize, n: usize, rng: &mut Stream) -> Result<Array2<f64>> {
    if m == 0 || n == 0 {
        return Err(Error::Dimension(format!("design needs m, n >= 1, got {m} x {n}")));
    }
    kind.validate()?;
    let scale = 1.0 / (m as f64).sqrt();
    let mut data = Vec::with_capacity(m * n);
    match *kind {
        DesignKind::GaussianIid => {
            data.extend((0..m * n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)));
        }
        DesignKind::StudentT { df } => {
            let t = unit_t(df)?;
            data.extend((0..m * n).map(|_| scale * t.sample(rng)));
        }
        DesignKind::IsotropicThreePoint { .. } | DesignKind::CounterexampleTwoPoint { .. } => {
            let u: Vec<f64> = (0..m).map(|_| scale * row_multiplier(kind, m, rng)).collect();
            for _ in 0..n {
                data.extend(u.iter().map(|ui| ui * rng.sample::<f64, _>(StandardNormal)));
            }
        }
    }
    Ok(Array2::from_shape_vec((m, n).f(), data).expect("shape matches data length"))
}

/// Row multipliers `U_i` as the isotropic samplers would draw them (testing aid).
pub fn sample_row_multipliers(kind: &DesignKind, m: usize, rng: &mut Stream) -> Result<Vec<f64>> {
    kind.validate()?;
    Ok((0..m).map(|_| row_multiplier(kind, m, rng)).collect())
}

impl NoiseKind {
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseKind::Gaussian { sigma } | NoiseKind::StudentT { sigma, .. } => sigma,
            NoiseKind::Zero => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigma = self.sigma();
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise level must be nonnegative, got {sigma}")));
        }
        if let NoiseKind::StudentT { df, .. } = *self {
            check_df(df)?;
        }
        Ok(())
    }
}

/// Standardized noise `xi0` (unit variance, or zero for [`NoiseKind::Zero`]).
pub fn sample_standard_noise(kind: &NoiseKind, m: usize, rng: &mut Stream) -> Result<Array1<f64>> {
    kind.validate()?;
    Ok(match *kind {
        NoiseKind::Gaussian { .. } => Array1::from_shape_fn(m, |_| rng.sample(StandardNormal)),
        NoiseKind::StudentT { df, .. } => {
            let t = unit_t(df)?;
            Array1::from_shape_fn(m, |_| t.sample(rng))
        }
        NoiseKind::Zero => Array1::zeros(m),
    })
}

pub fn sample_noise(kind: &NoiseKind, m: usize, rng: &mut Stream) -> Result<Array1<f64>> {
    Ok(sample_standard_noise(kind, m, rng)? * kind.sigma())
}

impl PriorKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorKind::GaussianIid { sd } if !(sd >= 0.0 && sd.is_finite()) => {
                Err(Error::InvalidParameter(format!("prior sd must be nonnegative, got {sd}")))
            }
            PriorKind::SparseTwoPoint { fraction, .. } if !(0.0..=1.0).contains(&fraction) => {
                Err(Error::InvalidParameter(format!("sparse prior fraction must lie in [0, 1], got {fraction}")))
            }
            _ => Ok(()),
        }
    }

    /// `E mu0_j^2`
    pub fn second_moment(&self) -> f64 {
        match *self {
            PriorKind::GaussianIid { sd } => sd * sd,
            PriorKind::PointMass { value } => value * value,
            PriorKind::SparseTwoPoint { value, fraction } => fraction * value * value,
        }
    }
}

pub fn sample_prior(kind: &PriorKind, n: usize, rng: &mut Stream) -> Result<Array1<f64>> {
    kind.validate()?;
    Ok(match *kind {
        PriorKind::GaussianIid { sd } => Array1::from_shape_fn(n, |_| sd * rng.sample::<f64, _>(StandardNormal)),
        PriorKind::PointMass { value } => Array1::from_elem(n, value),
        PriorKind::SparseTwoPoint { value, fraction } => {
            Array1::from_shape_fn(n, |_| if rng.random::<f64>() < fraction { value } else { 0.0 })
        }
    })
}

/// One draw of `Y = A mu0 + xi`.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub m: usize,
    pub n: usize,
    /// Normalized design (entry variance `1/m`), column-major.
    pub a: Array2<f64>,
    pub mu0: Array1<f64>,
    pub xi: Array1<f64>,
    pub y: Array1<f64>,
    /// Noise level `sigma` with `xi = sigma * xi0`.
    pub sigma: f64,
}

impl ModelInstance {
    pub fn from_parts(a: Array2<f64>, mu0: Array1<f64>, xi: Array1<f64>, sigma: f64) -> Result<Self> {
        let (m, n) = a.dim();
        if mu0.len() != n || xi.len() != m {
            return Err(Error::Dimension(format!(
                "A is {m} x {n} but mu0 has {} and xi has {} entries",
                mu0.len(),
                xi.len()
            )));
        }
        let y = a.dot(&mu0) + &xi;
        Ok(ModelInstance { m, n, a, mu0, xi, y, sigma })
    }

    /// Aspect ratio `m / n`.
    pub fn delta(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// Standardized noise `xi / sigma` (zero when `sigma = 0`).
    pub fn standard_noise(&self) -> Array1<f64> {
        if self.sigma > 0.0 {
            &self.xi / self.sigma
        } else {
            Array1::zeros(self.m)
        }
    }
}

/// Key of an instance: which experiment seed, which design slot, which replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceKey {
    pub master_seed: u64,
    pub slot: u64,
    pub rep: u64,
}

impl InstanceKey {
    pub fn new(master_seed: u64, slot: u64, rep: u64) -> Self {
        InstanceKey { master_seed, slot, rep }
    }

    pub fn design_stream(&self) -> Stream {
        substream(self.master_seed, &format!("design/{}", self.slot), self.rep)
    }

    pub fn noise_stream(&self) -> Stream {
        substream(self.master_seed, &format!("noise/{}", self.slot), self.rep)
    }

    /// The signal is shared by every design slot of a replication.
    pub fn prior_stream(&self) -> Stream {
        substream(self.master_seed, "prior", self.rep)
    }
}

pub fn build_instance(
    design: &DesignKind,
    noise: &NoiseKind,
    prior: &PriorKind,
    m: usize,
    n: usize,
    key: InstanceKey,
) -> Result<ModelInstance> {
    let a = sample_design(design, m, n, &mut key.design_stream())?;
    let mu0 = sample_prior(prior, n, &mut key.prior_stream())?;
    let xi = sample_noise(noise, m, &mut key.noise_stream())?;
    ModelInstance::from_parts(a, mu0, xi, noise.sigma())
}

// ---------------------------------------------------------------------------
// String grammars

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

const DESIGN_GRAMMAR: &str = "gaussian | student:<df> | iso3pt:<atom>:<p_atom> | counterexample:<L>";
const NOISE_GRAMMAR: &str = "gaussian[:<sigma>] | student:<df>[:<sigma>] | zero";
const PRIOR_GRAMMAR: &str = "gaussian[:<sd>] | point:<value> | sparse:<value>:<fraction>";

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse { what: "design", input: s.to_string(), grammar: DESIGN_GRAMMAR };
        let parts: Vec<&str> = s.split(':').collect();
        let kind = match parts.as_slice() {
            ["gaussian"] => DesignKind::GaussianIid,
            ["student", df] => DesignKind::StudentT { df: parse_f64(df).ok_or_else(err)? },
            ["iso3pt", atom, p] => {
                let atom = parse_f64(atom).ok_or_else(err)?;
                let p_atom = parse_f64(p).ok_or_else(err)?;
                // Accept an atom printed to limited precision (e.g. 1.4142 for sqrt 2)
                // and snap it onto the exact unit-second-moment value.
                let exact = if p_atom > 0.0 { (0.5 / p_atom).sqrt() } else { f64::NAN };
                let atom = if ((atom - exact) / exact).abs() <= 1e-4 { exact } else { atom };
                DesignKind::IsotropicThreePoint { atom, p_atom }
            }
            ["counterexample", l] => DesignKind::CounterexampleTwoPoint { l: parse_f64(l).ok_or_else(err)? },
            _ => return Err(err()),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignKind::GaussianIid => write!(f, "gaussian"),
            DesignKind::StudentT { df } => write!(f, "student:{df}"),
            DesignKind::IsotropicThreePoint { atom, p_atom } => write!(f, "iso3pt:{atom}:{p_atom}"),
            DesignKind::CounterexampleTwoPoint { l } => write!(f, "counterexample:{l}"),
        }
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse { what: "noise", input: s.to_string(), grammar: NOISE_GRAMMAR };
        let parts: Vec<&str> = s.split(':').collect();
        let kind = match parts.as_slice() {
            ["gaussian"] => NoiseKind::Gaussian { sigma: 1.0 },
            ["gaussian", sigma] => NoiseKind::Gaussian { sigma: parse_f64(sigma).ok_or_else(err)? },
            ["student", df] => NoiseKind::StudentT { df: parse_f64(df).ok_or_else(err)?, sigma: 1.0 },
            ["student", df, sigma] => NoiseKind::StudentT {
                df: parse_f64(df).ok_or_else(err)?,
                sigma: parse_f64(sigma).ok_or_else(err)?,
            },
            ["zero"] => NoiseKind::Zero,
            _ => return Err(err()),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseKind::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            NoiseKind::StudentT { df, sigma } => write!(f, "student:{df}:{sigma}"),
            NoiseKind::Zero => write!(f, "zero"),
        }
    }
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse { what: "prior", input: s.to_string(), grammar: PRIOR_GRAMMAR };
        let parts: Vec<&str> = s.split(':').collect();
        let kind = match parts.as_slice() {
            ["gaussian"] => PriorKind::GaussianIid { sd: 1.0 },
            ["gaussian", sd] => PriorKind::GaussianIid { sd: parse_f64(sd).ok_or_else(err)? },
            ["point", v] => PriorKind::PointMass { value: parse_f64(v).ok_or_else(err)? },
            ["sparse", v, frac] => PriorKind::SparseTwoPoint {
                value: parse_f64(v).ok_or_else(err)?,
                fraction: parse_f64(frac).ok_or_else(err)?,
            },
            _ => return Err(err()),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorKind::GaussianIid { sd } => write!(f, "gaussian:{sd}"),
            PriorKind::PointMass { value } => write!(f, "point:{value}"),
            PriorKind::SparseTwoPoint { value, fraction } => write!(f, "sparse:{value}:{fraction}"),
        }
    }
}
