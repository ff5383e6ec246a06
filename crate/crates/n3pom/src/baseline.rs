//! Discrete proportional / non-proportional odds baselines fit by
//! interval-censored maximum likelihood, and the distillation initialization
//! that maps fitted discrete coefficients onto the coefficient networks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::Dataset;
use crate::model::{
    sigmoid, sigmoid_slope, Activation, CoefficientNet, InterceptParams, ModelError, N3pomModel,
};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("discrete fit needs an integer J >= 2, got {0}")]
    BadJ(f64),
    #[error("response at row {row} is {value}; discrete fits need integers in 1..={j}")]
    NonIntegerResponse { row: usize, value: f64, j: usize },
    #[error("response class {class} of 1..={j} has no observations")]
    EmptyClass { class: usize, j: usize },
    #[error("hidden layer must exceed the threshold count: L = {hidden} <= J = {j}")]
    HiddenTooSmall { hidden: usize, j: usize },
    #[error("all responses fall in class {class}; no thresholds to fit")]
    SingleClass { class: usize },
    #[error("line search stalled at iteration {iteration} with non-finite objective")]
    Stuck { iteration: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A fitted discrete ordinal model: thresholds 1..J-1 with one coefficient
/// vector per threshold (identical across thresholds for the proportional
/// model).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFit {
    pub alphas: Vec<f64>,
    pub betas: Vec<Vec<f64>>,
    pub penalty_lambda: f64,
}

impl DiscreteFit {
    pub fn num_classes(&self) -> usize {
        self.alphas.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.betas[0].len()
    }

    /// Coefficient at threshold `u` for coordinate `k`, linearly interpolated
    /// between integer thresholds and linearly continued past the last one.
    pub fn coefficient_at(&self, u: f64, k: usize) -> f64 {
        let vals: Vec<f64> = self.betas.iter().map(|b| b[k]).collect();
        interp_integer_grid(&vals, u)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Linear interpolation of values given at integer positions 1..=len, with
/// linear continuation outside.
fn interp_integer_grid(vals: &[f64], u: f64) -> f64 {
    let m = vals.len();
    if m == 1 {
        return vals[0];
    }
    let i = (u.floor() as i64 - 1).clamp(0, m as i64 - 2) as usize;
    let t = u - (i + 1) as f64;
    vals[i] + t * (vals[i + 1] - vals[i])
}

struct Parameterization {
    j: usize,
    d: usize,
    proportional: bool,
}

impl Parameterization {
    // Layout: [phi, varphi (J-2), beta block]; beta block is d (proportional)
    // or (J-1)*d values laid out threshold-major.
    fn len(&self) -> usize {
        let beta = if self.proportional { self.d } else { (self.j - 1) * self.d };
        (self.j - 1) + beta
    }

    fn alphas(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.j - 1);
        let mut acc = theta[0];
        out.push(acc);
        for t in 1..self.j - 1 {
            acc += theta[t].abs();
            out.push(acc);
        }
        out
    }

    fn beta<'a>(&self, theta: &'a [f64], threshold: usize) -> &'a [f64] {
        let base = self.j - 1;
        if self.proportional {
            &theta[base..base + self.d]
        } else {
            let s = base + threshold * self.d;
            &theta[s..s + self.d]
        }
    }
}

// Penalized log-likelihood divided by n. The mean scale keeps line-search
// improvements representable in f64 even for large n.
fn objective(p: &Parameterization, theta: &[f64], x: &[Vec<f64>], g: &[usize], lambda: f64) -> f64 {
    let alphas = p.alphas(theta);
    let mut ll = 0.0;
    for (xi, &gi) in x.iter().zip(g) {
        let upper = if gi <= p.j - 1 {
            let z = alphas[gi - 1] + dot(p.beta(theta, gi - 1), xi);
            sigmoid(z)
        } else {
            1.0
        };
        let lower = if gi >= 2 {
            let z = alphas[gi - 2] + dot(p.beta(theta, gi - 2), xi);
            sigmoid(z)
        } else {
            0.0
        };
        let prob = upper - lower;
        if prob <= 0.0 || !prob.is_finite() {
            return f64::NEG_INFINITY;
        }
        ll += prob.ln();
    }
    if !p.proportional && lambda > 0.0 {
        let mut pen = 0.0;
        for jt in 0..p.j - 2 {
            let (a, b) = (p.beta(theta, jt), p.beta(theta, jt + 1));
            pen += a.iter().zip(b).map(|(ai, bi)| (bi - ai) * (bi - ai)).sum::<f64>();
        }
        ll -= lambda * pen;
    }
    ll / x.len() as f64
}

fn gradient(
    p: &Parameterization,
    theta: &[f64],
    x: &[Vec<f64>],
    g: &[usize],
    lambda: f64,
) -> Vec<f64> {
    let alphas = p.alphas(theta);
    let mut d_alpha = vec![0.0; p.j - 1];
    let mut grad = vec![0.0; p.len()];
    let base = p.j - 1;

    for (xi, &gi) in x.iter().zip(g) {
        let z_up = (gi <= p.j - 1).then(|| alphas[gi - 1] + dot(p.beta(theta, gi - 1), xi));
        let z_lo = (gi >= 2).then(|| alphas[gi - 2] + dot(p.beta(theta, gi - 2), xi));
        let upper = z_up.map_or(1.0, sigmoid);
        let lower = z_lo.map_or(0.0, sigmoid);
        let prob = upper - lower;
        if let Some(z) = z_up {
            let w = sigmoid_slope(z) / prob;
            d_alpha[gi - 1] += w;
            let target = if p.proportional { 0 } else { gi - 1 };
            for (k, xv) in xi.iter().enumerate() {
                grad[base + target * p.d + k] += w * xv;
            }
        }
        if let Some(z) = z_lo {
            let w = -sigmoid_slope(z) / prob;
            d_alpha[gi - 2] += w;
            let target = if p.proportional { 0 } else { gi - 2 };
            for (k, xv) in xi.iter().enumerate() {
                grad[base + target * p.d + k] += w * xv;
            }
        }
    }

    // Chain through the non-decreasing re-parameterization: alpha_j sees phi
    // and every increment up to index j.
    grad[0] = d_alpha.iter().sum();
    let mut suffix = 0.0;
    for t in (1..p.j - 1).rev() {
        suffix += d_alpha[t];
        grad[t] = sign(theta[t]) * suffix;
    }

    if !p.proportional && lambda > 0.0 {
        for jt in 0..p.j - 2 {
            for k in 0..p.d {
                let diff = theta[base + (jt + 1) * p.d + k] - theta[base + jt * p.d + k];
                grad[base + jt * p.d + k] += 2.0 * lambda * diff;
                grad[base + (jt + 1) * p.d + k] -= 2.0 * lambda * diff;
            }
        }
    }
    let inv_n = 1.0 / x.len() as f64;
    grad.iter_mut().for_each(|v| *v *= inv_n);
    grad
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
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

const DISCRETE_MAX_ITERS: usize = 50_000;
const DISCRETE_GRAD_TOL: f64 = 1e-6;

/// Fit the discrete POM (proportional) or NPOM with an adjacent-threshold
/// penalty lambda * sum_j ||beta_{j+1} - beta_j||^2, by full-batch gradient
/// ascent with backtracking step halving.
pub fn fit_discrete(
    data: &Dataset,
    proportional: bool,
    lambda: f64,
    seed: u64,
) -> Result<DiscreteFit, BaselineError> {
    let j_real = data.j_max();
    let j = j_real.round() as usize;
    if j < 2 || (j_real - j as f64).abs() > 1e-9 {
        return Err(BaselineError::BadJ(j_real));
    }
    let mut g = Vec::with_capacity(data.n());
    for (row, &h) in data.h.iter().enumerate() {
        let gi = h.round();
        if (h - gi).abs() > 1e-9 || gi < 1.0 || gi > j as f64 {
            return Err(BaselineError::NonIntegerResponse { row: row + 1, value: h, j });
        }
        g.push(gi as usize);
    }
    let mut counts = vec![0usize; j];
    for &gi in &g {
        counts[gi - 1] += 1;
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(BaselineError::EmptyClass { class: class + 1, j });
    }

    let d = data.dim();
    let p = Parameterization { j, d, proportional };
    let n = data.n() as f64;

    // Empirical cumulative logits give strictly increasing starting
    // thresholds; tiny seeded noise starts the coefficients.
    let mut theta = vec![0.0; p.len()];
    let mut cum = 0.0;
    let mut prev_alpha = 0.0;
    for t in 0..j - 1 {
        cum += counts[t] as f64;
        let alpha = crate::model::logit(cum / n);
        if t == 0 {
            theta[0] = alpha;
        } else {
            theta[t] = alpha - prev_alpha;
        }
        prev_alpha = alpha;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for slot in theta[j - 1..].iter_mut() {
        let noise: f64 = StandardNormal.sample(&mut rng);
        *slot = 1e-3 * noise;
    }

    let mut obj = objective(&p, &theta, &data.x, &g, lambda);
    let mut step = 1.0;
    for iter in 0..DISCRETE_MAX_ITERS {
        let grad = gradient(&p, &theta, &data.x, &g, lambda);
        let inf_norm = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if inf_norm < DISCRETE_GRAD_TOL {
            break;
        }
        let mut s = step;
        let mut accepted = false;
        while s > 1e-18 {
            let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, gr)| t + s * gr).collect();
            let cand_obj = objective(&p, &cand, &data.x, &g, lambda);
            if cand_obj.is_finite() && cand_obj > obj {
                theta = cand;
                obj = cand_obj;
                step = (s * 2.0).min(1.0);
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            if obj.is_finite() {
                break; // flat to machine precision
            }
            return Err(BaselineError::Stuck { iteration: iter });
        }
    }

    let alphas = p.alphas(&theta);
    let betas: Vec<Vec<f64>> =
        (0..j - 1).map(|t| p.beta(&theta, t).to_vec()).collect();
    Ok(DiscreteFit { alphas, betas, penalty_lambda: lambda })
}

/// Discrete fit for initialization purposes: fits the largest contiguous run
/// of occupied classes (snapping stray responses outside it onto the run's
/// ends) and linearly continues the missing boundary thresholds outward.
pub fn fit_discrete_for_init(
    data: &Dataset,
    lambda: f64,
    seed: u64,
) -> Result<DiscreteFit, BaselineError> {
    let j_real = data.j_max();
    let j = j_real.round() as usize;
    if j < 2 || (j_real - j as f64).abs() > 1e-9 {
        return Err(BaselineError::BadJ(j_real));
    }
    let mut counts = vec![0usize; j];
    for (row, &h) in data.h.iter().enumerate() {
        let gi = h.round();
        if (h - gi).abs() > 1e-9 || gi < 1.0 || gi > j as f64 {
            return Err(BaselineError::NonIntegerResponse { row: row + 1, value: h, j });
        }
        counts[gi as usize - 1] += 1;
    }
    if counts.iter().all(|&c| c > 0) {
        return fit_discrete(data, false, lambda, seed);
    }
    // Largest contiguous run of occupied classes, by sample mass on ties.
    let mut best: Option<(usize, usize, usize)> = None;
    let mut run_start: Option<usize> = None;
    for class in 1..=j + 1 {
        let occupied = class <= j && counts[class - 1] > 0;
        match (run_start, occupied) {
            (None, true) => run_start = Some(class),
            (Some(s), false) => {
                let (cand_lo, cand_hi) = (s, class - 1);
                let mass: usize = counts[cand_lo - 1..cand_hi].iter().sum();
                let better = match best {
                    None => true,
                    Some((bl, bh, bm)) => {
                        let (len, blen) = (cand_hi - cand_lo + 1, bh - bl + 1);
                        len > blen || (len == blen && mass > bm)
                    }
                };
                if better {
                    best = Some((cand_lo, cand_hi, mass));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    let (lo, hi, _) = best.expect("dataset is nonempty");
    if lo == hi {
        return Err(BaselineError::SingleClass { class: lo });
    }

    let shifted: Vec<f64> = data
        .h
        .iter()
        .map(|&h| h.clamp(lo as f64, hi as f64) - (lo - 1) as f64)
        .collect();
    let reduced_data = Dataset::from_parts(data.x.clone(), shifted, (hi - lo + 1) as f64)
        .expect("shifted responses stay in range");
    let reduced = fit_discrete(&reduced_data, false, lambda, seed)?;

    // Reduced threshold t (0-based) sits between original classes lo+t and
    // lo+t+1, i.e. original threshold index lo+t (1-based). Missing boundary
    // thresholds continue linearly with the nearest known increment (both
    // local increments are non-negative, so the alphas stay monotone).
    let known = reduced.alphas.len();
    let alpha_head_step = if known >= 2 { reduced.alphas[1] - reduced.alphas[0] } else { 0.0 };
    let alpha_tail_step =
        if known >= 2 { reduced.alphas[known - 1] - reduced.alphas[known - 2] } else { 0.0 };
    let zero = vec![0.0; reduced.dim()];
    let beta_head_step: Vec<f64> = if known >= 2 {
        reduced.betas[1].iter().zip(&reduced.betas[0]).map(|(a, b)| a - b).collect()
    } else {
        zero.clone()
    };
    let beta_tail_step: Vec<f64> = if known >= 2 {
        reduced.betas[known - 1]
            .iter()
            .zip(&reduced.betas[known - 2])
            .map(|(a, b)| a - b)
            .collect()
    } else {
        zero
    };

    let mut alphas = Vec::with_capacity(j - 1);
    let mut betas = Vec::with_capacity(j - 1);
    for t in 1..j {
        if t < lo {
            let gap = (lo - t) as f64;
            alphas.push(reduced.alphas[0] - gap * alpha_head_step);
            betas.push(
                reduced.betas[0].iter().zip(&beta_head_step).map(|(b, s)| b - gap * s).collect(),
            );
        } else if t - lo < known {
            alphas.push(reduced.alphas[t - lo]);
            betas.push(reduced.betas[t - lo].clone());
        } else {
            let gap = (t - lo - known + 1) as f64;
            alphas.push(reduced.alphas[known - 1] + gap * alpha_tail_step);
            betas.push(
                reduced.betas[known - 1]
                    .iter()
                    .zip(&beta_tail_step)
                    .map(|(b, s)| b + gap * s)
                    .collect(),
            );
        }
    }
    Ok(DiscreteFit { alphas, betas, penalty_lambda: lambda })
}

/// Continue the threshold sequence one step past the end:
/// row_J = 2 row_{J-1} - row_{J-2} (a copy when only one row exists).
pub fn extrapolate_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = rows.to_vec();
    let m = rows.len();
    let next = if m >= 2 {
        rows[m - 1].iter().zip(&rows[m - 2]).map(|(a, b)| 2.0 * a - b).collect()
    } else {
        rows[m - 1].clone()
    };
    out.push(next);
    out
}

fn extrapolate_scalars(vals: &[f64]) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = vals.iter().map(|v| vec![*v]).collect();
    extrapolate_rows(&rows).into_iter().map(|r| r[0]).collect()
}

/// Construct a sigmoid network whose coefficient functions pass through the
/// discrete estimates at integer thresholds: unit l in 1..=J switches on at
/// u = l with steepness T, and the outer weights telescope so that
/// b_k(j) ~= beta_hat_{jk}. Units beyond J stay zero.
pub fn distill_net(
    fit: &DiscreteFit,
    hidden: usize,
    steepness: f64,
) -> Result<CoefficientNet, BaselineError> {
    let j = fit.num_classes();
    if hidden <= j {
        return Err(BaselineError::HiddenTooSmall { hidden, j });
    }
    let d = fit.dim();
    let betas = extrapolate_rows(&fit.betas);
    let rho0 = 0.5; // sigmoid at zero

    let mut w1 = vec![vec![0.0; hidden]; d];
    let mut v1 = vec![vec![0.0; hidden]; d];
    let mut w2 = vec![vec![0.0; hidden]; d];
    let mut v2 = vec![0.0; d];
    for k in 0..d {
        v2[k] = betas.iter().map(|b| b[k]).sum::<f64>() / j as f64;
        let mut partial = 0.0;
        for l in 0..j {
            w1[k][l] = steepness;
            v1[k][l] = -steepness * (l + 1) as f64;
            w2[k][l] = (betas[l][k] - v2[k] - partial) / rho0;
            partial += w2[k][l];
        }
    }
    Ok(CoefficientNet::new(w1, v1, w2, v2, Activation::Sigmoid)?)
}

/// Solve (A^T A + gamma I) x = A^T y by Gauss-Jordan with partial pivoting.
fn ridge_solve(a: &[Vec<f64>], y: &[f64], gamma: f64) -> Vec<f64> {
    let n = a[0].len();
    let mut m = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = (0..a.len()).map(|r| a[r][i] * a[r][j]).sum::<f64>()
                + if i == j { gamma } else { 0.0 };
        }
        m[i][n] = (0..a.len()).map(|r| a[r][i] * y[r]).sum::<f64>();
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        for row in 0..n {
            if row != col && m[col][col] != 0.0 {
                let f = m[row][col] / m[col][col];
                for j in col..=n {
                    m[row][j] -= f * m[col][j];
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

/// Distillation that respects the monotonicity budget: outer weights are the
/// ridge solution of the threshold interpolation system, with the ridge
/// strength raised per covariate (by bisection) until the weight products
/// sum_l |w1 w2| fit within the sufficient-condition bound implied by the
/// intercept slopes. With a slack budget and steep units this reproduces the
/// plain telescoping construction; with a binding budget it trades pointwise
/// fidelity for a coefficient function the projection will not flatten.
pub fn budget_distill_net(
    fit: &DiscreteFit,
    hidden: usize,
    steepness: f64,
    min_slope: f64,
    eta: f64,
) -> Result<CoefficientNet, BaselineError> {
    let j = fit.num_classes();
    if hidden <= j {
        return Err(BaselineError::HiddenTooSmall { hidden, j });
    }
    let d = fit.dim();
    let betas = extrapolate_rows(&fit.betas);
    let budget_total = (min_slope / (eta * Activation::Sigmoid.slope_sup())).max(0.0);
    // Allocate across covariates in proportion to target total variation.
    let tv: Vec<f64> = (0..d)
        .map(|k| (1..j).map(|r| (betas[r][k] - betas[r - 1][k]).abs()).sum::<f64>().max(1e-9))
        .collect();
    let tv_norm: f64 = tv.iter().map(|v| v * v).sum::<f64>().sqrt();
    let design: Vec<Vec<f64>> = (1..=j)
        .map(|row| (1..=j).map(|l| sigmoid(steepness * (row as f64 - l as f64))).collect())
        .collect();

    let mut w1 = vec![vec![0.0; hidden]; d];
    let mut v1 = vec![vec![0.0; hidden]; d];
    let mut w2 = vec![vec![0.0; hidden]; d];
    let mut v2 = vec![0.0; d];
    for k in 0..d {
        v2[k] = betas.iter().map(|b| b[k]).sum::<f64>() / j as f64;
        let targets: Vec<f64> = (0..j).map(|r| betas[r][k] - v2[k]).collect();
        let budget_k = budget_total * tv[k] / tv_norm;
        let products =
            |sol: &[f64]| -> f64 { sol.iter().map(|w| (w * steepness).abs()).sum() };
        let mut sol = ridge_solve(&design, &targets, 1e-10);
        if products(&sol) > budget_k {
            let (mut lo, mut hi) = (1e-10f64, 1e8f64);
            for _ in 0..100 {
                let mid = (lo * hi).sqrt();
                sol = ridge_solve(&design, &targets, mid);
                if products(&sol) > budget_k {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            sol = ridge_solve(&design, &targets, hi);
            // Guard against residual overshoot from the bisection endpoint.
            let p = products(&sol);
            if p > budget_k && p > 0.0 {
                let shrink = budget_k / p;
                sol.iter_mut().for_each(|w| *w *= shrink);
            }
        }
        for l in 0..j {
            w1[k][l] = steepness;
            v1[k][l] = -steepness * (l + 1) as f64;
            w2[k][l] = sol[l];
        }
    }
    Ok(CoefficientNet::new(w1, v1, w2, v2, Activation::Sigmoid)?)
}

/// Spread the J active units over floor(L/J) copies each, dividing the outer
/// weights by the copy count; the represented function is unchanged.
pub fn duplicate_distill_units(net: &CoefficientNet, j: usize) -> CoefficientNet {
    let (d, hidden) = (net.dim(), net.hidden());
    let copies = hidden / j;
    if copies <= 1 {
        return net.clone();
    }
    let mut w1 = vec![vec![0.0; hidden]; d];
    let mut v1 = vec![vec![0.0; hidden]; d];
    let mut w2 = vec![vec![0.0; hidden]; d];
    for k in 0..d {
        for l in 0..j {
            for c in 0..copies {
                let slot = l * copies + c;
                w1[k][slot] = net.w1[k][l];
                v1[k][slot] = net.v1[k][l];
                w2[k][slot] = net.w2[k][l] / copies as f64;
            }
        }
    }
    CoefficientNet::new(w1, v1, w2, net.v2.clone(), net.activation())
        .expect("duplication preserves shape")
}

#[derive(Debug, Clone)]
pub struct InitOptions {
    pub hidden: usize,
    /// Switch steepness T of the distillation units.
    pub steepness: f64,
    pub seed: u64,
    /// Scale the noise on unused outer weights by 0.01 instead of using raw
    /// unit normals.
    pub damp_w2_noise: bool,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self { hidden: 50, steepness: 10.0, seed: 0, damp_w2_noise: false }
    }
}

/// Build a full model from a discrete fit. The intercept linearly
/// interpolates the discrete thresholds at the requested knots; the
/// coefficient networks distill the discrete coefficients within the
/// monotonicity budget those intercept slopes allow, then the active units
/// are duplicated for stability and the unused units filled with standard
/// normal noise.
pub fn init_from_discrete(
    fit: &DiscreteFit,
    knots: &[f64],
    eta: f64,
    opts: &InitOptions,
) -> Result<N3pomModel, BaselineError> {
    let j = fit.num_classes();

    let alpha_targets = extrapolate_scalars(&fit.alphas);
    let knot_alphas: Vec<f64> =
        knots.iter().map(|&u| interp_integer_grid(&alpha_targets, u)).collect();
    let phi = knot_alphas[0];
    let varphi: Vec<f64> = knot_alphas.windows(2).map(|w| w[1] - w[0]).collect();
    let intercept = InterceptParams::new(knots.to_vec(), phi, varphi)?;

    let sparse = budget_distill_net(fit, opts.hidden, opts.steepness, intercept.min_slope(), eta)?;
    let mut net = duplicate_distill_units(&sparse, j);

    let occupied = j * (opts.hidden / j).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let w2_scale = if opts.damp_w2_noise { 0.01 } else { 1.0 };
    for k in 0..net.dim() {
        for l in occupied..opts.hidden {
            let (a, b, c): (f64, f64, f64) = (
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            );
            net.w1[k][l] = a;
            net.v1[k][l] = b;
            net.w2[k][l] = c * w2_scale;
        }
    }

    Ok(N3pomModel::new(intercept, net, eta)?)
}
