//! Synthetic data-generating processes and delimited-text ingestion.
//!
//! Three process families are supported: a sparse linear model with vector
//! covariates, a scalar nonparametric regression whose regression function is
//! drawn from a registry of targets with known Hölder order, and a binary
//! response model whose log-odds is either linear or a registered target.
//! Covariates always live in `[-1, 1]` (per coordinate).

use std::io::Read;
use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Observations `(x_i, y_i)`, covariates stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    x: Vec<f64>,
    dim: usize,
    y: DVector<f64>,
}

impl Sample {
    pub fn new(x: Vec<f64>, dim: usize, y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::EmptySample);
        }
        if dim == 0 || x.len() != dim * y.len() {
            return Err(Error::DimensionMismatch {
                context: "sample covariates".into(),
                expected: dim * y.len(),
                found: x.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample".into()));
        }
        Ok(Self {
            x,
            dim,
            y: DVector::from_vec(y),
        })
    }

    /// Scalar-covariate convenience constructor.
    pub fn scalar(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(x, 1, y)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn covariate(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn covariates(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks(self.dim)
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn is_binary(&self) -> bool {
        self.y.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DgpKind {
    LinearSparse,
    HoelderSmooth,
    Logistic,
}

/// Registered scalar targets on `[-1, 1]`, each vanishing at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetId {
    /// `x - x^3/3 + sin(pi x)/2`; analytic, so every Hölder order applies.
    PolySin,
    /// `|x|^r`; Hölder order `r` (for `r` not an even integer).
    AbsPower,
    /// `sign(x) |x|^r`; Hölder order `r` (for `r` not an odd integer).
    SignedPower,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothTarget {
    pub id: TargetId,
    pub r: f64,
}

impl SmoothTarget {
    pub fn new(id: TargetId, r: Option<f64>) -> Result<Self> {
        let r = match (id, r) {
            (TargetId::PolySin, None) => f64::INFINITY,
            (TargetId::PolySin, Some(_)) => {
                return Err(Error::InvalidConfig(
                    "target poly-sin is analytic; do not set r".into(),
                ))
            }
            (_, None) => {
                return Err(Error::InvalidConfig(
                    "power targets require a smoothness order r".into(),
                ))
            }
            (_, Some(r)) => r,
        };
        if !(r > 0.5) {
            return Err(Error::InvalidConfig(format!(
                "smoothness order must exceed 1/2, got {r}"
            )));
        }
        Ok(Self { id, r })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.id {
            TargetId::PolySin => x - x.powi(3) / 3.0 + 0.5 * (std::f64::consts::PI * x).sin(),
            TargetId::AbsPower => x.abs().powf(self.r),
            TargetId::SignedPower => x.signum() * x.abs().powf(self.r),
        }
    }

    /// Hölder order of the target.
    pub fn smoothness(&self) -> f64 {
        self.r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseProfile {
    #[default]
    Homoscedastic,
    /// Scale `sigma * (1 + |x|)`, with `|x|` the sup-norm for vector covariates.
    Heteroscedastic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub profile: NoiseProfile,
    pub sigma: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            profile: NoiseProfile::Homoscedastic,
            sigma: 1.0,
        }
    }
}

impl NoiseSpec {
    pub fn homoscedastic(sigma: f64) -> Self {
        Self {
            profile: NoiseProfile::Homoscedastic,
            sigma,
        }
    }

    pub fn scale_at(&self, x: &[f64]) -> f64 {
        match self.profile {
            NoiseProfile::Homoscedastic => self.sigma,
            NoiseProfile::Heteroscedastic => {
                let m = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                self.sigma * (1.0 + m)
            }
        }
    }

    /// Largest noise scale over the covariate support `[-1, 1]^d`.
    pub fn max_scale(&self) -> f64 {
        match self.profile {
            NoiseProfile::Homoscedastic => self.sigma,
            NoiseProfile::Heteroscedastic => 2.0 * self.sigma,
        }
    }
}

/// Law of each covariate coordinate (independent across coordinates), supported on `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CovariateLaw {
    #[default]
    Uniform,
    /// `N(0, scale^2)` conditioned on `[-1, 1]`.
    TruncatedGaussian { scale: f64 },
}

impl CovariateLaw {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CovariateLaw::Uniform => 2.0 * rng.random::<f64>() - 1.0,
            CovariateLaw::TruncatedGaussian { scale } => loop {
                let z: f64 = StandardNormal.sample(rng);
                let v = z * scale;
                if v.abs() <= 1.0 {
                    break v;
                }
            },
        }
    }

    /// Unnormalized density on `[-1, 1]`.
    pub fn density(&self, x: f64) -> f64 {
        if x.abs() > 1.0 {
            return 0.0;
        }
        match *self {
            CovariateLaw::Uniform => 0.5,
            CovariateLaw::TruncatedGaussian { scale } => (-0.5 * (x / scale).powi(2)).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CovariateLaw::Uniform => Ok(()),
            CovariateLaw::TruncatedGaussian { scale } if scale > 0.0 && scale.is_finite() => Ok(()),
            CovariateLaw::TruncatedGaussian { scale } => Err(Error::InvalidConfig(format!(
                "truncated-gaussian scale must be positive, got {scale}"
            ))),
        }
    }
}

/// Constants `(alpha, delta)` of a tail bound `P(|V| >= x) <= alpha exp(-delta x^2)`
/// holding jointly for every covariate coordinate and the noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubGaussian {
    pub alpha: f64,
    pub delta: f64,
}

/// The simulation truth `f0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Truth {
    Linear(DVector<f64>),
    Smooth(SmoothTarget),
}

impl Truth {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Truth::Linear(b) => b.iter().zip(x).map(|(b, x)| b * x).sum(),
            Truth::Smooth(t) => t.eval(x[0]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub kind: DgpKind,
    pub n: usize,
    /// Leading coefficients of a linear truth; remaining coordinates up to `dimension` are zero.
    #[serde(default)]
    pub beta0: Option<Vec<f64>>,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub target: Option<TargetId>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub covariates: CovariateLaw,
    /// Declared lower band `eps0` with `eps0 <= pi(x) <= 1 - eps0` (binary responses).
    #[serde(default)]
    pub pi_floor: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl DgpConfig {
    pub fn linear(beta0: Vec<f64>, dimension: usize, n: usize, sigma: f64, seed: u64) -> Self {
        Self {
            kind: DgpKind::LinearSparse,
            n,
            beta0: Some(beta0),
            dimension: Some(dimension),
            target: None,
            r: None,
            noise: NoiseSpec::homoscedastic(sigma),
            covariates: CovariateLaw::Uniform,
            pi_floor: None,
            seed,
        }
    }

    pub fn smooth(target: TargetId, r: Option<f64>, n: usize, sigma: f64, seed: u64) -> Self {
        Self {
            kind: DgpKind::HoelderSmooth,
            n,
            beta0: None,
            dimension: None,
            target: Some(target),
            r,
            noise: NoiseSpec::homoscedastic(sigma),
            covariates: CovariateLaw::Uniform,
            pi_floor: None,
            seed,
        }
    }

    pub fn logistic_linear(beta0: Vec<f64>, dimension: usize, n: usize, seed: u64) -> Self {
        Self {
            kind: DgpKind::Logistic,
            ..Self::linear(beta0, dimension, n, 0.0, seed)
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self {
            n,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        if !(self.noise.sigma >= 0.0) || !self.noise.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise sigma must be non-negative, got {}",
                self.noise.sigma
            )));
        }
        self.covariates.validate()?;
        self.truth()?;
        if let Some(eps0) = self.pi_floor {
            if self.kind != DgpKind::Logistic {
                return Err(Error::InvalidConfig(
                    "pi_floor only applies to the logistic process".into(),
                ));
            }
            if !(eps0 > 0.0 && eps0 <= 0.5) {
                return Err(Error::InvalidConfig(format!(
                    "pi_floor must lie in (0, 1/2], got {eps0}"
                )));
            }
        }
        Ok(())
    }

    pub fn truth(&self) -> Result<Truth> {
        let linear = |beta0: &Vec<f64>| -> Result<Truth> {
            let p = self.dimension.unwrap_or(beta0.len());
            if p == 0 || p < beta0.len() {
                return Err(Error::InvalidConfig(format!(
                    "dimension {p} is smaller than the {} given coefficients",
                    beta0.len()
                )));
            }
            if beta0.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite("beta0".into()));
            }
            let mut b = DVector::zeros(p);
            for (j, v) in beta0.iter().enumerate() {
                b[j] = *v;
            }
            Ok(Truth::Linear(b))
        };
        match (self.kind, &self.beta0, self.target) {
            (DgpKind::LinearSparse, Some(b), None) => linear(b),
            (DgpKind::LinearSparse, _, _) => Err(Error::InvalidConfig(
                "linear-sparse requires beta0 and no target".into(),
            )),
            (DgpKind::HoelderSmooth, None, Some(id)) => {
                Ok(Truth::Smooth(SmoothTarget::new(id, self.r)?))
            }
            (DgpKind::HoelderSmooth, _, _) => Err(Error::InvalidConfig(
                "hoelder-smooth requires a target and no beta0".into(),
            )),
            (DgpKind::Logistic, Some(b), None) => linear(b),
            (DgpKind::Logistic, None, Some(id)) => Ok(Truth::Smooth(SmoothTarget::new(id, self.r)?)),
            (DgpKind::Logistic, _, _) => Err(Error::InvalidConfig(
                "logistic requires exactly one of beta0 or target".into(),
            )),
        }
    }

    /// Covariate dimension (1 for scalar targets).
    pub fn covariate_dim(&self) -> Result<usize> {
        Ok(match self.truth()? {
            Truth::Linear(b) => b.len(),
            Truth::Smooth(_) => 1,
        })
    }

    /// Support of the linear truth, when the truth is linear.
    pub fn true_support(&self) -> Option<Vec<usize>> {
        match self.truth().ok()? {
            Truth::Linear(b) => Some((0..b.len()).filter(|&j| b[j] != 0.0).collect()),
            Truth::Smooth(_) => None,
        }
    }

    /// Range `(min, max)` of `f0` over the covariate support.
    pub fn target_range(&self) -> Result<(f64, f64)> {
        Ok(match self.truth()? {
            Truth::Linear(b) => {
                let f = b.iter().map(|v| v.abs()).sum::<f64>();
                (-f, f)
            }
            Truth::Smooth(t) => {
                let m = 20_000;
                (0..=m).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
                    let v = t.eval(-1.0 + 2.0 * k as f64 / m as f64);
                    (lo.min(v), hi.max(v))
                })
            }
        })
    }

    /// `sup_x |f0(x)|` over the covariate support; covers `F_{C_n}` for every `C_n >= 1`.
    pub fn target_sup_norm(&self) -> Result<f64> {
        let (lo, hi) = self.target_range()?;
        Ok(lo.abs().max(hi.abs()))
    }

    /// Largest `eps0` with `eps0 <= pi(x) <= 1 - eps0` on the support.
    pub fn pi_band(&self) -> Result<f64> {
        let (lo, hi) = self.target_range()?;
        Ok(logistic_cdf(lo).min(1.0 - logistic_cdf(hi)))
    }

    /// Tail constants from the registry: bounded covariates satisfy the bound with
    /// `(e, 1)`; Gaussian noise with scale at most `s` satisfies it with `(2, 1/(2 s^2))`.
    pub fn subgaussian(&self) -> SubGaussian {
        let cov = SubGaussian {
            alpha: std::f64::consts::E,
            delta: 1.0,
        };
        let s = self.noise.max_scale();
        if self.kind == DgpKind::Logistic || s == 0.0 {
            return cov;
        }
        let noise_delta = 1.0 / (2.0 * s * s);
        SubGaussian {
            alpha: cov.alpha.max(2.0),
            delta: cov.delta.min(noise_delta),
        }
    }
}

pub fn logistic_cdf(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Draws a sample; a pure function of `config` (including its seed).
pub fn generate(config: &DgpConfig) -> Result<Sample> {
    config.validate()?;
    let truth = config.truth()?;
    let d = config.covariate_dim()?;
    let mut rng = rng::stream(config.seed);
    let n = config.n;
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut xi = vec![0.0; d];
    for _ in 0..n {
        for v in xi.iter_mut() {
            *v = config.covariates.draw(&mut rng);
        }
        let f0 = truth.eval(&xi);
        let yi = match config.kind {
            DgpKind::Logistic => {
                let u: f64 = rng.random();
                if u < logistic_cdf(f0) {
                    1.0
                } else {
                    0.0
                }
            }
            _ => {
                let z: f64 = StandardNormal.sample(&mut rng);
                f0 + config.noise.scale_at(&xi) * z
            }
        };
        x.extend_from_slice(&xi);
        y.push(yi);
    }
    Sample::new(x, d, y)
}

/// `f0(x)`; for the binary model this is the log-odds `log(pi(x)/(1 - pi(x)))`.
pub fn true_target_value(config: &DgpConfig, x: &[f64]) -> Result<f64> {
    config.validate()?;
    let d = config.covariate_dim()?;
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            context: "covariate".into(),
            expected: d,
            found: x.len(),
        });
    }
    Ok(config.truth()?.eval(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleFormat {
    pub delimiter: u8,
    pub has_header: bool,
}

impl SampleFormat {
    pub fn csv() -> Self {
        Self {
            delimiter: b',',
            has_header: false,
        }
    }

    pub fn tsv() -> Self {
        Self {
            delimiter: b'\t',
            has_header: false,
        }
    }

    pub fn with_header(self, has_header: bool) -> Self {
        Self { has_header, ..self }
    }

    /// Tab for `.tsv`/`.tab`, comma otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => Self::tsv(),
            _ => Self::csv(),
        }
    }
}

/// Reads one observation per row: covariate columns followed by the response.
pub fn load_sample(path: &Path, format: SampleFormat) -> Result<Sample> {
    let file = std::fs::File::open(path)?;
    read_sample(file, format)
}

pub fn read_sample<R: Read>(reader: R, format: SampleFormat) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(format.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut width: Option<usize> = None;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if w < 2 {
            return Err(Error::Parse {
                line,
                message: "need at least one covariate column and a response column".into(),
            });
        }
        if record.len() != w {
            return Err(Error::DimensionMismatch {
                context: format!("line {line}"),
                expected: w,
                found: record.len(),
            });
        }
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if k + 1 == w {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    match width {
        None => Err(Error::EmptySample),
        Some(w) => Sample::new(x, w - 1, y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_linear_reproduces_first_coordinate() {
        let cfg = DgpConfig::linear(vec![1.0, 0.0, 0.0], 3, 5, 0.0, 11);
        let s = generate(&cfg).unwrap();
        assert_eq!(s.n(), 5);
        for i in 0..5 {
            assert_eq!(s.y()[i], s.covariate(i)[0]);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = DgpConfig::smooth(TargetId::SignedPower, Some(2.0), 50, 0.3, 99);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        assert_ne!(generate(&cfg).unwrap(), generate(&cfg.with_seed(100)).unwrap());
    }

    #[test]
    fn logistic_with_zero_log_odds_is_balanced() {
        let cfg = DgpConfig::logistic_linear(vec![0.0, 0.0], 2, 100_000, 5);
        let s = generate(&cfg).unwrap();
        assert!(s.is_binary());
        let mean = s.y().mean();
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn logistic_calibration_within_three_standard_errors() {
        let cfg = DgpConfig {
            kind: DgpKind::Logistic,
            target: Some(TargetId::PolySin),
            beta0: None,
            dimension: None,
            r: None,
            n: 100_000,
            noise: NoiseSpec::default(),
            covariates: CovariateLaw::Uniform,
            pi_floor: None,
            seed: 8,
        };
        let s = generate(&cfg).unwrap();
        let buckets = 10;
        let mut count = vec![0usize; buckets];
        let mut ones = vec![0.0; buckets];
        let mut pi_sum = vec![0.0; buckets];
        for i in 0..s.n() {
            let x = s.covariate(i)[0];
            let b = (((x + 1.0) / 2.0 * buckets as f64) as usize).min(buckets - 1);
            count[b] += 1;
            ones[b] += s.y()[i];
            pi_sum[b] += logistic_cdf(true_target_value(&cfg, &[x]).unwrap());
        }
        for b in 0..buckets {
            let m = count[b] as f64;
            let p = pi_sum[b] / m;
            let se = (p * (1.0 - p) / m).sqrt();
            assert!((ones[b] / m - p).abs() <= 3.0 * se, "bucket {b}");
        }
    }

    #[test]
    fn covariates_stay_in_support() {
        let mut cfg = DgpConfig::linear(vec![1.0], 4, 2000, 1.0, 3);
        cfg.covariates = CovariateLaw::TruncatedGaussian { scale: 2.0 };
        let s = generate(&cfg).unwrap();
        assert!(s.covariates().flatten().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn target_values() {
        let cfg = DgpConfig::linear(vec![2.0, -1.0], 2, 1, 0.0, 0);
        assert_eq!(true_target_value(&cfg, &[1.0, 1.0]).unwrap(), 1.0);
        assert!(true_target_value(&cfg, &[1.0]).is_err());
        let lg = DgpConfig::logistic_linear(vec![0.0], 1, 1, 0);
        assert_eq!(true_target_value(&lg, &[0.3]).unwrap(), 0.0);
        let sm = DgpConfig::smooth(TargetId::PolySin, None, 1, 0.0, 0);
        assert_eq!(true_target_value(&sm, &[0.0]).unwrap(), 0.0);
        let half = 0.5 - 0.125 / 3.0 + 0.5;
        assert!((true_target_value(&sm, &[0.5]).unwrap() - half).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(DgpConfig::smooth(TargetId::AbsPower, Some(0.5), 10, 1.0, 0).validate().is_err());
        assert!(DgpConfig::smooth(TargetId::AbsPower, None, 10, 1.0, 0).validate().is_err());
        assert!(DgpConfig::linear(vec![1.0], 1, 0, 1.0, 0).validate().is_err());
        assert!(DgpConfig::linear(vec![1.0], 1, 5, -1.0, 0).validate().is_err());
    }

    #[test]
    fn reads_delimited_text() {
        let s = read_sample("0,1\n0.5,2\n1,3".as_bytes(), SampleFormat::csv()).unwrap();
        assert_eq!(s.n(), 3);
        assert_eq!(s.covariate(1), &[0.5]);
        assert!(matches!(
            read_sample("".as_bytes(), SampleFormat::csv()),
            Err(Error::EmptySample)
        ));
        let h = read_sample(
            "x\ty\n0\t1\n1\t2\n".as_bytes(),
            SampleFormat::tsv().with_header(true),
        )
        .unwrap();
        assert_eq!(h.n(), 2);
        match read_sample("0,1\n0.5,abc\n".as_bytes(), SampleFormat::csv()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            read_sample("0,1\n0.5,1,2\n".as_bytes(), SampleFormat::csv()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
