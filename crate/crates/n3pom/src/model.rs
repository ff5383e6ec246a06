//! Model parameters and forward evaluation: the monotone piecewise-linear
//! intercept, the per-covariate coefficient networks, and the conditional
//! cumulative probability / density they induce.

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

/// Errors surfaced while constructing or evaluating a model.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("u = {u} is outside the response interval [1, {j_max}]")]
    OutOfDomain { u: f64, j_max: f64 },
    #[error("covariate vector has length {got}, model expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid model parameters: {0}")]
    Invalid(String),
    #[error("model I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("model JSON malformed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Numerically stable sigmoid, safe for arguments far beyond +-700.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// First derivative of the sigmoid, computed as s(1-s).
pub fn sigmoid_slope(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s)
}

/// log(sigmoid(z)) without underflow; stays finite for z ~ -1e4.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Inverse of the sigmoid.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Hidden-layer activation of the coefficient networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    pub fn slope(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid_slope(z),
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn curvature(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                -2.0 * t * (1.0 - t * t)
            }
        }
    }

    /// Supremum of |slope| over the real line: 1/4 for sigmoid, 1 for tanh.
    pub fn slope_sup(self) -> f64 {
        match self {
            Activation::Sigmoid => 0.25,
            Activation::Tanh => 1.0,
        }
    }

    pub fn parse(name: &str) -> Result<Self, ModelError> {
        match name {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(ModelError::Invalid(format!(
                "unknown activation `{other}` (expected sigmoid or tanh)"
            ))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Sigmoid => write!(f, "sigmoid"),
            Activation::Tanh => write!(f, "tanh"),
        }
    }
}

/// Monotone piecewise-linear intercept on [1, J].
///
/// Knot values are reconstructed as alpha_r = phi + sum of |varphi_t|, so the
/// sequence is non-decreasing for any parameter values and the slope of every
/// segment is non-negative by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct InterceptParams {
    knots: Vec<f64>,
    pub phi: f64,
    pub varphi: Vec<f64>,
}

impl InterceptParams {
    /// `knots` must start at 1, be strictly increasing, and `varphi` must hold
    /// one increment per segment (`knots.len() - 1` entries).
    pub fn new(knots: Vec<f64>, phi: f64, varphi: Vec<f64>) -> Result<Self, ModelError> {
        if knots.len() < 2 {
            return Err(ModelError::Invalid("need at least two knots".into()));
        }
        if knots[0] != 1.0 {
            return Err(ModelError::Invalid(format!(
                "first knot must be 1, got {}",
                knots[0]
            )));
        }
        if !knots.iter().all(|j| j.is_finite()) {
            return Err(ModelError::Invalid("knots must be finite".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::Invalid("knots must be strictly increasing".into()));
        }
        if varphi.len() != knots.len() - 1 {
            return Err(ModelError::Invalid(format!(
                "expected {} increments for {} knots, got {}",
                knots.len() - 1,
                knots.len(),
                varphi.len()
            )));
        }
        if !phi.is_finite() || !varphi.iter().all(|v| v.is_finite()) {
            return Err(ModelError::Invalid("intercept parameters must be finite".into()));
        }
        Ok(Self { knots, phi, varphi })
    }

    /// Equally spaced knots 1 = j_1 < ... < j_R = J with zero increments.
    pub fn regular(num_knots: usize, j_max: f64) -> Result<Self, ModelError> {
        if num_knots < 2 || !(j_max > 1.0) {
            return Err(ModelError::Invalid(format!(
                "regular knot grid needs >= 2 knots and J > 1 (got {num_knots}, {j_max})"
            )));
        }
        let gap = (j_max - 1.0) / (num_knots - 1) as f64;
        let mut knots: Vec<f64> = (0..num_knots).map(|r| 1.0 + gap * r as f64).collect();
        knots[num_knots - 1] = j_max;
        Self::new(knots, 0.0, vec![0.0; num_knots - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_knots(&self) -> usize {
        self.knots.len()
    }

    pub fn j_max(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Reconstructed knot values alpha_1..alpha_R (non-decreasing).
    pub fn alphas(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.knots.len());
        let mut acc = self.phi;
        out.push(acc);
        for v in &self.varphi {
            acc += v.abs();
            out.push(acc);
        }
        out
    }

    /// Segment slopes s_1..s_{R-1}; each is |varphi_r| / knot gap, hence >= 0.
    pub fn slopes(&self) -> Vec<f64> {
        self.varphi
            .iter()
            .zip(self.knots.windows(2))
            .map(|(v, w)| v.abs() / (w[1] - w[0]))
            .collect()
    }

    pub fn min_slope(&self) -> f64 {
        self.slopes().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Index of the half-open partition cell [j_r, j_{r+1}) containing `u`;
    /// u = J belongs to the last cell.
    pub fn cell_of(&self, u: f64) -> Result<usize, ModelError> {
        let j_max = self.j_max();
        if !(u >= self.knots[0] && u <= j_max) {
            return Err(ModelError::OutOfDomain { u, j_max });
        }
        let mut idx = self.knots.partition_point(|&j| j <= u) - 1;
        if idx == self.knots.len() - 1 {
            idx -= 1;
        }
        Ok(idx)
    }

    /// The intercept a(u); exactly alpha_r at u = j_r.
    pub fn value(&self, u: f64) -> Result<f64, ModelError> {
        let i = self.cell_of(u)?;
        let mut alpha = self.phi;
        for v in &self.varphi[..i] {
            alpha += v.abs();
        }
        let gap = self.knots[i + 1] - self.knots[i];
        Ok(alpha + self.varphi[i].abs() / gap * (u - self.knots[i]))
    }

    /// Weak derivative of a(u): the slope of the cell containing `u`.
    pub fn slope_at(&self, u: f64) -> Result<f64, ModelError> {
        let i = self.cell_of(u)?;
        Ok(self.varphi[i].abs() / (self.knots[i + 1] - self.knots[i]))
    }
}

/// Per-covariate single-hidden-layer networks producing the varying
/// coefficients b_k(u) = v2_k + sum_l w2_{k,l} * rho(w1_{k,l} u + v1_{k,l}).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientNet {
    pub w1: Vec<Vec<f64>>,
    pub v1: Vec<Vec<f64>>,
    pub w2: Vec<Vec<f64>>,
    pub v2: Vec<f64>,
    activation: Activation,
}

impl CoefficientNet {
    pub fn new(
        w1: Vec<Vec<f64>>,
        v1: Vec<Vec<f64>>,
        w2: Vec<Vec<f64>>,
        v2: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, ModelError> {
        let d = v2.len();
        if d == 0 {
            return Err(ModelError::Invalid("need at least one covariate".into()));
        }
        if w1.len() != d || v1.len() != d || w2.len() != d {
            return Err(ModelError::Invalid(format!(
                "weight blocks disagree on the covariate count (v2 has {d})"
            )));
        }
        let hidden = w1[0].len();
        if hidden == 0 {
            return Err(ModelError::Invalid("need at least one hidden unit".into()));
        }
        for k in 0..d {
            if w1[k].len() != hidden || v1[k].len() != hidden || w2[k].len() != hidden {
                return Err(ModelError::Invalid(format!(
                    "covariate {k} has a ragged hidden layer (expected {hidden} units)"
                )));
            }
        }
        let all_finite = v2.iter().all(|x| x.is_finite())
            && [&w1, &v1, &w2]
                .iter()
                .all(|b| b.iter().flatten().all(|x| x.is_finite()));
        if !all_finite {
            return Err(ModelError::Invalid("network weights must be finite".into()));
        }
        Ok(Self { w1, v1, w2, v2, activation })
    }

    /// Zero-weight network: every coefficient function is identically zero.
    pub fn zeros(dim: usize, hidden: usize, activation: Activation) -> Result<Self, ModelError> {
        Self::new(
            vec![vec![0.0; hidden]; dim],
            vec![vec![0.0; hidden]; dim],
            vec![vec![0.0; hidden]; dim],
            vec![0.0; dim],
            activation,
        )
    }

    pub fn dim(&self) -> usize {
        self.v2.len()
    }

    pub fn hidden(&self) -> usize {
        self.w1[0].len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// b_k(u) for a single coordinate.
    pub fn value_at(&self, u: f64, k: usize) -> f64 {
        let rho = self.activation;
        let mut acc = self.v2[k];
        for l in 0..self.hidden() {
            acc += self.w2[k][l] * rho.value(self.w1[k][l] * u + self.v1[k][l]);
        }
        acc
    }

    /// The coefficient vector b(u).
    pub fn value(&self, u: f64) -> Vec<f64> {
        (0..self.dim()).map(|k| self.value_at(u, k)).collect()
    }

    /// b'_k(u) for a single coordinate.
    pub fn slope_at(&self, u: f64, k: usize) -> f64 {
        let rho = self.activation;
        let mut acc = 0.0;
        for l in 0..self.hidden() {
            acc += self.w1[k][l] * self.w2[k][l] * rho.slope(self.w1[k][l] * u + self.v1[k][l]);
        }
        acc
    }

    /// The derivative vector b'(u).
    pub fn slope(&self, u: f64) -> Vec<f64> {
        (0..self.dim()).map(|k| self.slope_at(u, k)).collect()
    }

    pub(crate) fn value_dot(&self, u: f64, x: &[f64]) -> f64 {
        (0..self.dim()).map(|k| x[k] * self.value_at(u, k)).sum()
    }

    pub(crate) fn slope_dot(&self, u: f64, x: &[f64]) -> f64 {
        (0..self.dim()).map(|k| x[k] * self.slope_at(u, k)).sum()
    }
}

/// The full model: intercept + coefficient networks + the covariate-ball
/// radius eta inside which monotonicity is certified.
#[derive(Debug, Clone, PartialEq)]
pub struct N3pomModel {
    pub intercept: InterceptParams,
    pub net: CoefficientNet,
    eta: f64,
    j_max: f64,
}

impl N3pomModel {
    pub fn new(
        intercept: InterceptParams,
        net: CoefficientNet,
        eta: f64,
    ) -> Result<Self, ModelError> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(ModelError::Invalid(format!("eta must be positive, got {eta}")));
        }
        let j_max = intercept.j_max();
        Ok(Self { intercept, net, eta, j_max })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn j_max(&self) -> f64 {
        self.j_max
    }

    pub fn dim(&self) -> usize {
        self.net.dim()
    }

    fn check_x(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.dim() {
            return Err(ModelError::DimMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// The logit of the CCP: f_u(x) = a(u) + <b(u), x>.
    pub fn logit_ccp(&self, u: f64, x: &[f64]) -> Result<f64, ModelError> {
        self.check_x(x)?;
        Ok(self.intercept.value(u)? + self.net.value_dot(u, x))
    }

    /// Weak derivative of the logit in u: f'_u(x) = a'(u) + <b'(u), x>.
    pub fn logit_ccp_slope(&self, u: f64, x: &[f64]) -> Result<f64, ModelError> {
        self.check_x(x)?;
        Ok(self.intercept.slope_at(u)? + self.net.slope_dot(u, x))
    }

    /// Conditional cumulative probability P(H <= u | X = x).
    pub fn ccp(&self, u: f64, x: &[f64]) -> Result<f64, ModelError> {
        Ok(sigmoid(self.logit_ccp(u, x)?))
    }

    /// Conditional probability density q(u | x) = sigma'(f) * f'.
    ///
    /// May be negative for a model that does not satisfy the sufficient
    /// condition; callers decide how to treat that.
    pub fn density(&self, u: f64, x: &[f64]) -> Result<f64, ModelError> {
        let f = self.logit_ccp(u, x)?;
        let fp = self.logit_ccp_slope(u, x)?;
        Ok(sigmoid_slope(f) * fp)
    }

    /// Marginal effect on the exceedance probability,
    /// d/dx P(H > u | x) = s(u) * sigma'(-f_u(x)) with s(u) = -b(u).
    pub fn marginal_effect(&self, u: f64, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let f = self.logit_ccp(u, x)?;
        let shrink = sigmoid_slope(-f);
        Ok(self.net.value(u).iter().map(|b| -b * shrink).collect())
    }

    /// Whether the sufficient condition currently holds (always recomputed).
    pub fn is_certified(&self) -> bool {
        crate::monotonicity::check_condition(self).satisfied
    }

    /// Number of trainable parameters (phi, varphi, and all net weights).
    pub fn param_count(&self) -> usize {
        let (d, l) = (self.net.dim(), self.net.hidden());
        1 + self.intercept.varphi.len() + d * (3 * l + 1)
    }

    /// Trainable parameters flattened in a fixed order:
    /// phi, varphi, then per covariate w1, v1, w2, v2.
    pub fn param_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.push(self.intercept.phi);
        out.extend_from_slice(&self.intercept.varphi);
        for k in 0..self.net.dim() {
            out.extend_from_slice(&self.net.w1[k]);
            out.extend_from_slice(&self.net.v1[k]);
            out.extend_from_slice(&self.net.w2[k]);
            out.push(self.net.v2[k]);
        }
        out
    }

    /// Inverse of [`param_vec`](Self::param_vec).
    pub fn set_param_vec(&mut self, params: &[f64]) -> Result<(), ModelError> {
        if params.len() != self.param_count() {
            return Err(ModelError::DimMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut it = params.iter().copied();
        self.intercept.phi = it.next().unwrap();
        for v in self.intercept.varphi.iter_mut() {
            *v = it.next().unwrap();
        }
        let l = self.net.hidden();
        for k in 0..self.net.dim() {
            for slot in self.net.w1[k].iter_mut() {
                *slot = it.next().unwrap();
            }
            for slot in self.net.v1[k].iter_mut() {
                *slot = it.next().unwrap();
            }
            for slot in self.net.w2[k].iter_mut() {
                *slot = it.next().unwrap();
            }
            debug_assert_eq!(self.net.w2[k].len(), l);
            self.net.v2[k] = it.next().unwrap();
        }
        Ok(())
    }

    /// Serialize to the model JSON document. Floats carry 17 significant
    /// digits so a reload reproduces the exact bit pattern.
    pub fn to_json_string(&self) -> String {
        let mut s = String::with_capacity(4096);
        s.push_str("{\n");
        s.push_str(&format!("  \"j_max\": {},\n", fmt_f64(self.j_max)));
        s.push_str(&format!("  \"eta\": {},\n", fmt_f64(self.eta)));
        s.push_str(&format!("  \"activation\": \"{}\",\n", self.net.activation()));
        s.push_str(&format!("  \"knots\": {},\n", fmt_vec(self.intercept.knots())));
        s.push_str(&format!("  \"phi\": {},\n", fmt_f64(self.intercept.phi)));
        s.push_str(&format!("  \"varphi\": {},\n", fmt_vec(&self.intercept.varphi)));
        s.push_str(&format!("  \"w1\": {},\n", fmt_mat(&self.net.w1)));
        s.push_str(&format!("  \"v1\": {},\n", fmt_mat(&self.net.v1)));
        s.push_str(&format!("  \"w2\": {},\n", fmt_mat(&self.net.w2)));
        s.push_str(&format!("  \"v2\": {}\n", fmt_vec(&self.net.v2)));
        s.push_str("}\n");
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        let intercept = InterceptParams::new(doc.knots, doc.phi, doc.varphi)?;
        let net = CoefficientNet::new(doc.w1, doc.v1, doc.w2, doc.v2, Activation::parse(&doc.activation)?)?;
        if (intercept.j_max() - doc.j_max).abs() > 1e-12 {
            return Err(ModelError::Invalid(format!(
                "j_max {} disagrees with the last knot {}",
                doc.j_max,
                intercept.j_max()
            )));
        }
        Self::new(intercept, net, doc.eta)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Deserialize)]
struct ModelDoc {
    j_max: f64,
    eta: f64,
    activation: String,
    knots: Vec<f64>,
    phi: f64,
    varphi: Vec<f64>,
    w1: Vec<Vec<f64>>,
    v1: Vec<Vec<f64>>,
    w2: Vec<Vec<f64>>,
    v2: Vec<f64>,
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_vec(xs: &[f64]) -> String {
    let body: Vec<String> = xs.iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", body.join(", "))
}

fn fmt_mat(m: &[Vec<f64>]) -> String {
    let rows: Vec<String> = m.iter().map(|r| fmt_vec(r)).collect();
    format!("[{}]", rows.join(", "))
}
