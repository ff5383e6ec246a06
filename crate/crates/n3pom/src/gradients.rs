//! Analytic gradients of the logit, its weak derivative, and the weighted
//! log-likelihood with respect to every trainable parameter, plus a central
//! finite-difference oracle for checking them.

use thiserror::Error;

use crate::datagen::Dataset;
use crate::model::{sigmoid, ModelError, N3pomModel};

/// Density slopes below this are floored inside log/reciprocal terms; only a
/// strictly negative slope is an error.
pub const DENSITY_SLOPE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GradientError {
    #[error("density slope f'({u}) = {value} is negative at sample {sample}")]
    NegativeDensitySlope { sample: usize, u: f64, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Gradient with the same shape as the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub phi: f64,
    pub varphi: Vec<f64>,
    pub w1: Vec<Vec<f64>>,
    pub v1: Vec<Vec<f64>>,
    pub w2: Vec<Vec<f64>>,
    pub v2: Vec<f64>,
}

impl ParamGradient {
    pub fn zeros_like(model: &N3pomModel) -> Self {
        let (d, l) = (model.net.dim(), model.net.hidden());
        Self {
            phi: 0.0,
            varphi: vec![0.0; model.intercept.varphi.len()],
            w1: vec![vec![0.0; l]; d],
            v1: vec![vec![0.0; l]; d],
            w2: vec![vec![0.0; l]; d],
            v2: vec![0.0; d],
        }
    }

    /// Flatten in the same order as [`N3pomModel::param_vec`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.push(self.phi);
        out.extend_from_slice(&self.varphi);
        for k in 0..self.v2.len() {
            out.extend_from_slice(&self.w1[k]);
            out.extend_from_slice(&self.v1[k]);
            out.extend_from_slice(&self.w2[k]);
            out.push(self.v2[k]);
        }
        out
    }

    pub fn l2_norm(&self) -> f64 {
        self.fold_sq().sqrt()
    }

    fn fold_sq(&self) -> f64 {
        let mut acc = self.phi * self.phi;
        acc += self.varphi.iter().map(|v| v * v).sum::<f64>();
        for block in [&self.w1, &self.v1, &self.w2] {
            acc += block.iter().flatten().map(|v| v * v).sum::<f64>();
        }
        acc += self.v2.iter().map(|v| v * v).sum::<f64>();
        acc
    }

    pub fn scale(&mut self, s: f64) {
        self.phi *= s;
        self.varphi.iter_mut().for_each(|v| *v *= s);
        for block in [&mut self.w1, &mut self.v1, &mut self.w2] {
            block.iter_mut().flatten().for_each(|v| *v *= s);
        }
        self.v2.iter_mut().for_each(|v| *v *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite()
            && self.varphi.iter().all(|v| v.is_finite())
            && [&self.w1, &self.v1, &self.w2]
                .iter()
                .all(|b| b.iter().flatten().all(|v| v.is_finite()))
            && self.v2.iter().all(|v| v.is_finite())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn unit_clamp(z: f64) -> f64 {
    z.clamp(0.0, 1.0)
}

/// Gradient of f_u(x) with respect to all trainable parameters.
pub fn grad_f(model: &N3pomModel, u: f64, x: &[f64]) -> Result<ParamGradient, GradientError> {
    let mut g = ParamGradient::zeros_like(model);
    accumulate(model, u, x, 1.0, 0.0, &mut g)?;
    Ok(g)
}

/// Gradient of the weak derivative f'_u(x).
pub fn grad_f_slope(model: &N3pomModel, u: f64, x: &[f64]) -> Result<ParamGradient, GradientError> {
    let mut g = ParamGradient::zeros_like(model);
    accumulate(model, u, x, 0.0, 1.0, &mut g)?;
    Ok(g)
}

/// Adds `wf * grad f_u(x) + ws * grad f'_u(x)` into `g` in one fused pass.
fn accumulate(
    model: &N3pomModel,
    u: f64,
    x: &[f64],
    wf: f64,
    ws: f64,
    g: &mut ParamGradient,
) -> Result<(), GradientError> {
    if x.len() != model.dim() {
        return Err(ModelError::DimMismatch { expected: model.dim(), got: x.len() }.into());
    }
    let intercept = &model.intercept;
    let cell = intercept.cell_of(u)?;
    let knots = intercept.knots();

    g.phi += wf;
    for (i, v) in intercept.varphi.iter().enumerate() {
        let gap = knots[i + 1] - knots[i];
        let s = sign(*v);
        if wf != 0.0 {
            g.varphi[i] += wf * s * unit_clamp((u - knots[i]) / gap);
        }
        if ws != 0.0 && i == cell {
            g.varphi[i] += ws * s / gap;
        }
    }

    let net = &model.net;
    let rho = net.activation();
    for k in 0..net.dim() {
        let xk = x[k];
        if xk == 0.0 {
            continue;
        }
        for l in 0..net.hidden() {
            let (w1, v1, w2) = (net.w1[k][l], net.v1[k][l], net.w2[k][l]);
            let z = w1 * u + v1;
            let r = rho.value(z);
            let r1 = rho.slope(z);
            let r2 = rho.curvature(z);
            g.w1[k][l] += xk * (wf * w2 * u * r1 + ws * (w2 * w1 * u * r2 + w2 * r1));
            g.v1[k][l] += xk * (wf * w2 * r1 + ws * w2 * w1 * r2);
            g.w2[k][l] += xk * (wf * r + ws * w1 * r1);
        }
        g.v2[k] += wf * xk;
    }
    Ok(())
}

/// Gradient of the weighted log-likelihood over the selected samples:
/// sum_i zeta_i [ (sigma''/sigma')(f) grad f + (1/f') grad f' ].
///
/// Samples are accumulated in ascending index order so the reduction is
/// reproducible.
pub fn grad_loglik(
    model: &N3pomModel,
    data: &Dataset,
    indices: &[usize],
    zeta: &[f64],
) -> Result<ParamGradient, GradientError> {
    let mut g = ParamGradient::zeros_like(model);
    for &i in indices {
        let (x, h) = (&data.x[i], data.h[i]);
        let z = zeta[i];
        if z == 0.0 {
            continue;
        }
        let f = model.logit_ccp(h, x)?;
        let fp = model.logit_ccp_slope(h, x)?;
        if fp < 0.0 {
            return Err(GradientError::NegativeDensitySlope { sample: i, u: h, value: fp });
        }
        // sigma''/sigma' collapses to 1 - 2 sigma, which stays finite in the
        // saturated tails.
        let wf = z * (1.0 - 2.0 * sigmoid(f));
        let ws = z / fp.max(DENSITY_SLOPE_FLOOR);
        accumulate(model, h, x, wf, ws, &mut g)?;
    }
    Ok(g)
}

/// Central finite-difference gradient of an arbitrary scalar function of the
/// model, taken over the flattened parameter vector. Serves as the
/// independent oracle for every analytic gradient in this module.
pub fn finite_difference_gradient<F>(model: &N3pomModel, step: f64, eval: F) -> Vec<f64>
where
    F: Fn(&N3pomModel) -> f64,
{
    let base = model.param_vec();
    let mut work = model.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut probe = base.clone();
    for i in 0..base.len() {
        probe[i] = base[i] + step;
        work.set_param_vec(&probe).expect("congruent parameter vector");
        let up = eval(&work);
        probe[i] = base[i] - step;
        work.set_param_vec(&probe).expect("congruent parameter vector");
        let down = eval(&work);
        probe[i] = base[i];
        out.push((up - down) / (2.0 * step));
    }
    out
}
