//! Synthetic data generation, response discretization and perturbation, CSV
//! ingestion, and covariate/response rescaling.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::logit;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV has no data rows")]
    Empty,
    #[error("CSV has no covariate columns besides the response")]
    NoCovariates,
    #[error("response column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row} has {got} fields, header has {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("cell at row {row}, column `{col}` is not numeric: `{value}`")]
    NonNumeric { row: usize, col: String, value: String },
    #[error("response column `{0}` is constant")]
    ConstantResponse(String),
    #[error("covariate column `{0}` is constant; cannot standardize")]
    ConstantColumn(String),
    #[error("response {value} at row {row} lies outside [1, {j_max}]; enable rescaling")]
    ResponseOutOfRange { row: usize, value: f64, j_max: f64 },
    #[error("dataset invariant violated: {0}")]
    Invalid(String),
    #[error("quantile bracket failed to enclose a root after {0} expansions")]
    BracketFailure(usize),
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
}

/// Law of the synthetic covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateLaw {
    /// x = (r cos t, r sin t) with r ~ U[0,1], t ~ U[0, 2 pi).
    DiskUniform,
    /// i.i.d. Beta(0.5, 0.5) entries.
    BetaHalf,
}

impl CovariateLaw {
    fn sample(self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            CovariateLaw::DiskUniform => {
                let r = rng.random::<f64>();
                let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                vec![r * theta.cos(), r * theta.sin()]
            }
            CovariateLaw::BetaHalf => {
                let beta = Beta::new(0.5, 0.5).expect("valid Beta parameters");
                vec![beta.sample(rng), beta.sample(rng)]
            }
        }
    }
}

/// Configuration of one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub j_max: f64,
    pub m1: f64,
    pub m2: f64,
    pub covariate_law: CovariateLaw,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.n == 0 {
            return Err(DataError::BadSpec("n must be at least 1".into()));
        }
        if !(self.j_max > 1.0) {
            return Err(DataError::BadSpec(format!("J must exceed 1, got {}", self.j_max)));
        }
        Ok(())
    }
}

/// Which response column a variant trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseVariant {
    Continuous,
    Rounded,
    Perturbed,
}

impl ResponseVariant {
    pub const ALL: [ResponseVariant; 3] =
        [ResponseVariant::Continuous, ResponseVariant::Rounded, ResponseVariant::Perturbed];

    pub fn parse(name: &str) -> Result<Self, DataError> {
        match name {
            "continuous" => Ok(Self::Continuous),
            "rounded" => Ok(Self::Rounded),
            "perturbed" => Ok(Self::Perturbed),
            other => Err(DataError::BadSpec(format!(
                "unknown response variant `{other}` (expected continuous, rounded, perturbed)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Continuous => "continuous",
            Self::Rounded => "rounded",
            Self::Perturbed => "perturbed",
        }
    }
}

/// Covariates plus responses on [1, J] with the affine maps that produced
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    j_max: f64,
    /// (offset, scale): model response = offset + scale * raw response.
    rescale: (f64, f64),
    /// Per-covariate (mean, sd) applied as x' = (x - mean) / sd.
    standardize: Vec<(f64, f64)>,
}

impl Dataset {
    /// Wrap already-prepared data; identity rescale and standardization.
    pub fn from_parts(x: Vec<Vec<f64>>, h: Vec<f64>, j_max: f64) -> Result<Self, DataError> {
        let d = x.first().map_or(0, Vec::len);
        let standardize = vec![(0.0, 1.0); d];
        Self::with_metadata(x, h, j_max, (0.0, 1.0), standardize)
    }

    pub fn with_metadata(
        x: Vec<Vec<f64>>,
        h: Vec<f64>,
        j_max: f64,
        rescale: (f64, f64),
        standardize: Vec<(f64, f64)>,
    ) -> Result<Self, DataError> {
        if x.is_empty() || h.is_empty() {
            return Err(DataError::Empty);
        }
        if x.len() != h.len() {
            return Err(DataError::Invalid(format!(
                "{} covariate rows vs {} responses",
                x.len(),
                h.len()
            )));
        }
        let d = x[0].len();
        if d == 0 {
            return Err(DataError::NoCovariates);
        }
        for (i, row) in x.iter().enumerate() {
            if row.len() != d {
                return Err(DataError::RaggedRow { row: i + 1, expected: d, got: row.len() });
            }
            if !row.iter().all(|v| v.is_finite()) {
                return Err(DataError::Invalid(format!("non-finite covariate at row {}", i + 1)));
            }
        }
        for (i, &hi) in h.iter().enumerate() {
            if !(hi >= 1.0 && hi <= j_max) {
                return Err(DataError::ResponseOutOfRange { row: i + 1, value: hi, j_max });
            }
        }
        if !(rescale.1 > 0.0) {
            return Err(DataError::Invalid(format!("rescale scale must be positive, got {}", rescale.1)));
        }
        if standardize.len() != d || standardize.iter().any(|(_, sd)| !(*sd > 0.0)) {
            return Err(DataError::Invalid("standardization metadata malformed".into()));
        }
        Ok(Self { x, h, j_max, rescale, standardize })
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn j_max(&self) -> f64 {
        self.j_max
    }

    pub fn rescale(&self) -> (f64, f64) {
        self.rescale
    }

    pub fn standardize(&self) -> &[(f64, f64)] {
        &self.standardize
    }

    /// Invert the response map back to the raw scale.
    pub fn raw_response(&self, h_model: f64) -> f64 {
        (h_model - self.rescale.0) / self.rescale.1
    }

    pub fn max_x_norm(&self) -> f64 {
        self.x
            .iter()
            .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Same covariates with a different response vector.
    pub fn with_responses(&self, h: Vec<f64>) -> Result<Self, DataError> {
        Self::with_metadata(self.x.clone(), h, self.j_max, self.rescale, self.standardize.clone())
    }
}

/// Intercept of the synthetic generating model.
pub fn truth_intercept(u: f64) -> f64 {
    2.0 * u - 9.0
}

/// Coefficients of the synthetic generating model: (-1 + m1 u^2, 1 + m2 u^2).
pub fn truth_coefficients(u: f64, m1: f64, m2: f64) -> [f64; 2] {
    [-1.0 + m1 * u * u, 1.0 + m2 * u * u]
}

fn generating_logit(u: f64, x: &[f64], m1: f64, m2: f64) -> f64 {
    let b = truth_coefficients(u, m1, m2);
    truth_intercept(u) + b[0] * x[0] + b[1] * x[1]
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-sample RNG stream; draws are independent of sample order, so
/// generation can be chunked or parallelized without changing the data.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)))
}

/// Covariate matrix of `spec.n` rows.
pub fn sample_covariates(spec: &SyntheticSpec) -> Result<Vec<Vec<f64>>, DataError> {
    spec.validate()?;
    Ok((0..spec.n)
        .map(|i| spec.covariate_law.sample(&mut substream(spec.seed, i as u64)))
        .collect())
}

/// Pre-clamp response quantile: solves sigma(f_h(x)) = p for h, then clamps
/// to [1, J]. Exposed separately from the sampler so the inverse map can be
/// tested deterministically.
pub fn response_quantile(
    x: &[f64],
    m1: f64,
    m2: f64,
    j_max: f64,
    p: f64,
) -> Result<f64, DataError> {
    let target = logit(p.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16));
    // The truncated distribution places atoms at the interval ends; detect
    // them from the generating logit before any root search.
    if target <= generating_logit(1.0, x, m1, m2) {
        return Ok(1.0);
    }
    if target >= generating_logit(j_max, x, m1, m2) {
        return Ok(j_max);
    }
    let g = |h: f64| generating_logit(h, x, m1, m2) - target;
    let (mut lo, mut hi) = (-1.0, j_max + 2.0);
    let mut expansions = 0;
    while g(lo) > 0.0 {
        let width = hi - lo;
        lo -= width;
        expansions += 1;
        if expansions > 200 {
            return Err(DataError::BracketFailure(expansions));
        }
    }
    while g(hi) < 0.0 {
        let width = hi - lo;
        hi += width;
        expansions += 1;
        if expansions > 200 {
            return Err(DataError::BracketFailure(expansions));
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).clamp(1.0, j_max))
}

/// Draw one response at covariate `x` from the generating conditional
/// distribution, truncated to [1, J].
pub fn sample_response(
    x: &[f64],
    m1: f64,
    m2: f64,
    j_max: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64, DataError> {
    let p = rng.random::<f64>();
    response_quantile(x, m1, m2, j_max, p)
}

/// Nearest integer in {1..J}; ties round up.
pub fn discretize(h: f64, j_max: f64) -> usize {
    let j = j_max.round() as usize;
    let g = (h + 0.5).floor() as i64;
    g.clamp(1, j as i64) as usize
}

/// g + e clamped to [1, J].
pub fn apply_perturbation(g: usize, e: f64, j_max: f64) -> f64 {
    (g as f64 + e).clamp(1.0, j_max)
}

/// Random perturbation g + U[-0.5, 0.5], clamped to [1, J].
pub fn perturb(g: usize, j_max: f64, rng: &mut ChaCha8Rng) -> f64 {
    apply_perturbation(g, rng.random::<f64>() - 0.5, j_max)
}

/// One synthetic dataset with all three response variants.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub x: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub rounded: Vec<usize>,
    pub perturbed: Vec<f64>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, DataError> {
    spec.validate()?;
    let n = spec.n;
    let mut x = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    let mut rounded = Vec::with_capacity(n);
    let mut perturbed = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = substream(spec.seed, i as u64);
        let xi = spec.covariate_law.sample(&mut rng);
        let hi = sample_response(&xi, spec.m1, spec.m2, spec.j_max, &mut rng)?;
        let gi = discretize(hi, spec.j_max);
        let pi = perturb(gi, spec.j_max, &mut rng);
        x.push(xi);
        h.push(hi);
        rounded.push(gi);
        perturbed.push(pi);
    }
    Ok(SyntheticData { spec: spec.clone(), x, h, rounded, perturbed })
}

impl SyntheticData {
    pub fn dataset(&self, variant: ResponseVariant) -> Dataset {
        let h = match variant {
            ResponseVariant::Continuous => self.h.clone(),
            ResponseVariant::Rounded => self.rounded.iter().map(|g| *g as f64).collect(),
            ResponseVariant::Perturbed => self.perturbed.clone(),
        };
        Dataset::from_parts(self.x.clone(), h, self.spec.j_max)
            .expect("generated responses lie in [1, J]")
    }

    /// Emit columns x1..xd, h, h_rounded, h_perturbed.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let d = self.x[0].len();
        let header: Vec<String> = (1..=d)
            .map(|k| format!("x{k}"))
            .chain(["h".into(), "h_rounded".into(), "h_perturbed".into()])
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.h.len() {
            let mut fields: Vec<String> = self.x[i].iter().map(|v| format!("{v}")).collect();
            fields.push(format!("{}", self.h[i]));
            fields.push(format!("{}", self.rounded[i]));
            fields.push(format!("{}", self.perturbed[i]));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Parse a numeric CSV with a header row. The response column is pulled out
/// by name; every other column becomes a covariate in file order.
pub fn load_csv(
    path: &Path,
    response_col: &str,
    j_max: f64,
    rescale: bool,
    standardize: bool,
) -> Result<Dataset, DataError> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, response_col, j_max, rescale, standardize)
}

pub fn parse_csv(
    text: &str,
    response_col: &str,
    j_max: f64,
    rescale: bool,
    standardize: bool,
) -> Result<Dataset, DataError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(DataError::Empty)?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let resp_idx = names
        .iter()
        .position(|n| n == response_col)
        .ok_or_else(|| DataError::MissingColumn(response_col.to_string()))?;
    if names.len() < 2 {
        return Err(DataError::NoCovariates);
    }

    let mut x: Vec<Vec<f64>> = Vec::new();
    let mut raw_h: Vec<f64> = Vec::new();
    for (line_no, line) in lines {
        let row = line_no + 1; // 1-based, counting the header as row 1
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(DataError::RaggedRow { row, expected: names.len(), got: fields.len() });
        }
        let mut covs = Vec::with_capacity(names.len() - 1);
        for (idx, field) in fields.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| DataError::NonNumeric {
                row,
                col: names[idx].clone(),
                value: field.to_string(),
            })?;
            if idx == resp_idx {
                raw_h.push(value);
            } else {
                covs.push(value);
            }
        }
        x.push(covs);
    }
    if raw_h.is_empty() {
        return Err(DataError::Empty);
    }

    let (min_h, max_h) = raw_h.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if max_h == min_h {
        return Err(DataError::ConstantResponse(response_col.to_string()));
    }
    let (offset, scale) = if rescale {
        let scale = (j_max - 1.0) / (max_h - min_h);
        (1.0 - scale * min_h, scale)
    } else {
        (0.0, 1.0)
    };
    let h: Vec<f64> = raw_h.iter().map(|v| offset + scale * v).collect();
    if !rescale {
        for (i, &hi) in h.iter().enumerate() {
            if !(hi >= 1.0 && hi <= j_max) {
                return Err(DataError::ResponseOutOfRange { row: i + 2, value: hi, j_max });
            }
        }
    }

    let d = names.len() - 1;
    let cov_names: Vec<&String> = names.iter().enumerate().filter(|(i, _)| *i != resp_idx).map(|(_, n)| n).collect();
    let mut stats = vec![(0.0, 1.0); d];
    if standardize {
        let n = x.len() as f64;
        for k in 0..d {
            let mean = x.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = x.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let sd = var.sqrt();
            if !(sd > 0.0) {
                return Err(DataError::ConstantColumn(cov_names[k].clone()));
            }
            stats[k] = (mean, sd);
            for r in x.iter_mut() {
                r[k] = (r[k] - mean) / sd;
            }
        }
    }

    Dataset::with_metadata(x, h, j_max, (offset, scale), stats)
}
