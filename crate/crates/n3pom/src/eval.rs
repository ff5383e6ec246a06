//! Grid MSE of coefficient functions, robust replicate aggregation, CCP
//! monotonicity audits, and the synthetic benchmark orchestration.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::baseline::{fit_discrete_for_init, init_from_discrete, BaselineError, InitOptions};
use crate::datagen::{
    generate_synthetic, truth_coefficients, DataError, ResponseVariant, SyntheticSpec,
};
use crate::model::{InterceptParams, ModelError, N3pomModel};
use crate::trainer::{fit, TrainConfig, TrainError};

/// CCP decreases beyond this magnitude count as violations.
pub const VIOLATION_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("benchmark needs at least one replicate and one variant")]
    EmptyBench,
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Evaluation grid start, start+step, ..., stop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self, EvalError> {
        if !(step > 0.0) || !(stop > start) {
            return Err(EvalError::BadGrid(format!(
                "need stop > start and step > 0, got [{start}, {stop}] step {step}"
            )));
        }
        Ok(Self { start, stop, step })
    }

    /// Standard coefficient-evaluation grid {1, 1.05, ..., J}.
    pub fn coefficient_default(j_max: f64) -> Self {
        Self { start: 1.0, stop: j_max, step: 0.05 }
    }

    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut i = 0usize;
        loop {
            let u = self.start + self.step * i as f64;
            if u > self.stop + 1e-9 {
                break;
            }
            out.push(u.min(self.stop));
            i += 1;
        }
        out
    }
}

/// Mean squared difference of two univariate functions over the grid.
pub fn grid_mse<E, T>(grid: &Grid, est: E, truth: T) -> f64
where
    E: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let pts = grid.points();
    let sum: f64 = pts.iter().map(|&u| (est(u) - truth(u)).powi(2)).sum();
    sum / pts.len() as f64
}

/// Median of all values and standard deviation after dropping one minimum
/// and one maximum (needs at least three values).
pub fn aggregate_replicates(values: &[f64]) -> Result<(f64, f64), EvalError> {
    if values.len() < 3 {
        return Err(EvalError::TooFewValues { needed: 3, got: values.len() });
    }
    let median = median_of(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let trimmed = &sorted[1..sorted.len() - 1];
    Ok((median, sample_sd(trimmed)))
}

fn median_of(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Result of scanning the CCP over a u-grid for a set of covariate points.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityAudit {
    pub u_step: f64,
    pub samples: usize,
    /// Most negative CCP difference seen for each covariate sample.
    pub per_sample_min_diff: Vec<f64>,
    /// Samples whose worst difference falls below -1e-10.
    pub violations: usize,
    pub worst_diff: f64,
}

/// Scan the CCP over the u-grid for every covariate sample, recording the
/// most negative forward difference per sample.
pub fn audit_monotonicity(
    model: &N3pomModel,
    x_samples: &[Vec<f64>],
    u_step: f64,
) -> Result<MonotonicityAudit, EvalError> {
    if !(u_step > 0.0) {
        return Err(EvalError::BadGrid(format!("u_step must be positive, got {u_step}")));
    }
    let grid = Grid::new(1.0, model.j_max(), u_step)?;
    let pts = grid.points();
    let a_vals: Vec<f64> =
        pts.iter().map(|&u| model.intercept.value(u)).collect::<Result<_, _>>()?;
    let b_vals: Vec<Vec<f64>> = pts.iter().map(|&u| model.net.value(u)).collect();

    let mut per_sample = Vec::with_capacity(x_samples.len());
    let mut violations = 0usize;
    let mut worst = f64::INFINITY;
    for x in x_samples {
        if x.len() != model.dim() {
            return Err(ModelError::DimMismatch { expected: model.dim(), got: x.len() }.into());
        }
        let mut min_diff = f64::INFINITY;
        let mut prev = f64::NAN;
        for (i, _) in pts.iter().enumerate() {
            let dot: f64 = b_vals[i].iter().zip(x).map(|(b, xi)| b * xi).sum();
            let ccp = crate::model::sigmoid(a_vals[i] + dot);
            if i > 0 {
                min_diff = min_diff.min(ccp - prev);
            }
            prev = ccp;
        }
        if min_diff < -VIOLATION_TOL {
            violations += 1;
        }
        worst = worst.min(min_diff);
        per_sample.push(min_diff);
    }
    Ok(MonotonicityAudit {
        u_step,
        samples: x_samples.len(),
        per_sample_min_diff: per_sample,
        violations,
        worst_diff: worst,
    })
}

/// Full configuration of a synthetic benchmark run.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub spec: SyntheticSpec,
    pub replicates: usize,
    pub variants: Vec<ResponseVariant>,
    pub train: TrainConfig,
    /// Number of intercept knots (equally spaced on [1, J]).
    pub knots: usize,
    pub init: InitOptions,
    /// Adjacent-threshold penalty of the discrete initialization fit.
    pub init_lambda: f64,
    pub grid_step: f64,
    pub jobs: usize,
}

impl BenchConfig {
    /// The synthetic-benchmark defaults: n = 1000, J = 7, R = 24 knots,
    /// L = 50 hidden units, 20 replicates over all three response variants.
    /// The initialization uses wide distillation units (steepness 1.2) and
    /// damped noise so it starts inside the monotonicity budget at full
    /// coefficient amplitude.
    pub fn standard(spec: SyntheticSpec) -> Self {
        Self {
            spec,
            replicates: 20,
            variants: ResponseVariant::ALL.to_vec(),
            train: TrainConfig::default(),
            knots: 24,
            init: InitOptions { steepness: 1.2, damp_w2_noise: true, ..InitOptions::default() },
            init_lambda: 1.0,
            grid_step: 0.05,
            jobs: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub variant: ResponseVariant,
    /// 1-based covariate coordinate.
    pub coordinate: usize,
    pub mse: Vec<f64>,
    pub median: f64,
    pub trimmed_sd: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub m1: f64,
    pub m2: f64,
    pub n: usize,
    pub replicates: usize,
    pub grid_step: f64,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, variant: ResponseVariant, coordinate: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.variant == variant && r.coordinate == coordinate)
    }

    /// Long-form CSV: one line per (variant, coordinate, replicate).
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "variant,coordinate,replicate,mse")?;
        for row in &self.rows {
            for (rep, v) in row.mse.iter().enumerate() {
                writeln!(out, "{},{},{},{}", row.variant.name(), row.coordinate, rep, v)?;
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// Aligned text summary.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "setting (m1, m2) = ({}, {}), n = {}, {} replicates, grid step {}\n",
            self.m1, self.m2, self.n, self.replicates, self.grid_step
        ));
        s.push_str(&format!("{:<12} {:>5} {:>12} {:>12}\n", "response", "coord", "median MSE", "trimmed sd"));
        for row in &self.rows {
            let sd = row.trimmed_sd.map_or("-".to_string(), |v| format!("{v:.4}"));
            s.push_str(&format!(
                "{:<12} {:>5} {:>12.4} {:>12}\n",
                row.variant.name(),
                row.coordinate,
                row.median,
                sd
            ));
        }
        s
    }
}

struct ReplicateOutcome {
    /// One MSE pair per requested variant, in variant order.
    mse: Vec<[f64; 2]>,
}

fn run_replicate(cfg: &BenchConfig, rep: usize) -> Result<ReplicateOutcome, EvalError> {
    let rep_seed = cfg.spec.seed.wrapping_add(rep as u64);
    let spec = SyntheticSpec { seed: rep_seed, ..cfg.spec.clone() };
    let data = generate_synthetic(&spec)?;

    let rounded = data.dataset(ResponseVariant::Rounded);
    let discrete = fit_discrete_for_init(&rounded, cfg.init_lambda, rep_seed)?;

    let eta = rounded.max_x_norm() + cfg.train.eta_margin;
    let knots = InterceptParams::regular(cfg.knots, spec.j_max)?;
    let init_opts = InitOptions { seed: rep_seed, ..cfg.init.clone() };
    let init_model = init_from_discrete(&discrete, knots.knots(), eta, &init_opts)?;

    let grid = Grid::new(1.0, spec.j_max, cfg.grid_step)?;
    let mut out = Vec::with_capacity(cfg.variants.len());
    for (vi, &variant) in cfg.variants.iter().enumerate() {
        let ds = data.dataset(variant);
        let train = TrainConfig {
            seed: rep_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(vi as u64),
            ..cfg.train.clone()
        };
        let (model, _) = fit(&ds, &init_model, &train)?;
        let mse = [0, 1].map(|k| {
            grid_mse(
                &grid,
                |u| model.net.value_at(u, k),
                |u| truth_coefficients(u, spec.m1, spec.m2)[k],
            )
        });
        log::info!(
            "replicate {rep} {}: MSE(b1) = {:.4}, MSE(b2) = {:.4}",
            variant.name(),
            mse[0],
            mse[1]
        );
        out.push(mse);
    }
    Ok(ReplicateOutcome { mse: out })
}

/// Fit every requested response variant across replicates and aggregate the
/// coefficient-function grid MSEs. Replicates run in parallel (bounded by
/// `jobs`) and are merged in replicate order.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport, EvalError> {
    if cfg.replicates == 0 || cfg.variants.is_empty() {
        return Err(EvalError::EmptyBench);
    }
    let outcomes: Vec<ReplicateOutcome> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| EvalError::Pool(e.to_string()))?;
        pool.install(|| {
            (0..cfg.replicates)
                .into_par_iter()
                .map(|rep| run_replicate(cfg, rep))
                .collect::<Result<Vec<_>, _>>()
        })?
    } else {
        (0..cfg.replicates).map(|rep| run_replicate(cfg, rep)).collect::<Result<Vec<_>, _>>()?
    };

    let mut rows = Vec::new();
    for (vi, &variant) in cfg.variants.iter().enumerate() {
        for k in 0..2 {
            let values: Vec<f64> = outcomes.iter().map(|o| o.mse[vi][k]).collect();
            let (median, trimmed_sd) = if values.len() >= 3 {
                let (m, sd) = aggregate_replicates(&values)?;
                (m, Some(sd))
            } else {
                (median_of(&values), None)
            };
            rows.push(BenchRow { variant, coordinate: k + 1, mse: values, median, trimmed_sd });
        }
    }
    Ok(BenchReport {
        m1: cfg.spec.m1,
        m2: cfg.spec.m2,
        n: cfg.spec.n,
        replicates: cfg.replicates,
        grid_step: cfg.grid_step,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::CovariateLaw;
    use crate::model::{Activation, CoefficientNet};
    use crate::monotonicity::project;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_points_match_expected_lattice() {
        let g = Grid::coefficient_default(7.0);
        let pts = g.points();
        assert_eq!(pts.len(), 121);
        assert_eq!(pts[0], 1.0);
        assert_relative_eq!(pts[1], 1.05, epsilon = 1e-12);
        assert_eq!(*pts.last().unwrap(), 7.0);
    }

    #[test]
    fn grid_mse_basics() {
        let g = Grid::coefficient_default(7.0);
        let f = |u: f64| 0.3 * u - 1.0;
        assert_eq!(grid_mse(&g, f, f), 0.0);
        let shifted = |u: f64| f(u) + 0.25;
        assert_relative_eq!(grid_mse(&g, shifted, f), 0.0625, max_relative = 1e-12);
        // Symmetry.
        assert_eq!(grid_mse(&g, f, shifted), grid_mse(&g, shifted, f));
    }

    #[test]
    fn grid_mse_matches_direct_summation_oracle() {
        let g = Grid::coefficient_default(7.0);
        let truth = |u: f64| -1.0 + 0.05 * u * u;
        // Interpolate the quadratic between integer knots.
        let knot_vals: Vec<f64> = (1..=7).map(|j| truth(j as f64)).collect();
        let est = |u: f64| {
            let i = (u.floor() as usize).clamp(1, 6) - 1;
            let t = u - (i + 1) as f64;
            knot_vals[i] + t * (knot_vals[i + 1] - knot_vals[i])
        };
        let mse = grid_mse(&g, est, truth);
        // Independent oracle: explicit reversed-order accumulation.
        let pts = g.points();
        let mut acc = 0.0;
        for &u in pts.iter().rev() {
            let d = est(u) - truth(u);
            acc += d * d;
        }
        let oracle = acc / pts.len() as f64;
        assert!((mse - oracle).abs() <= 1e-10, "{mse} vs {oracle}");
        assert!(mse > 0.0);
    }

    #[test]
    fn aggregation_matches_hand_computation() {
        let (median, sd) = aggregate_replicates(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((median, sd), (2.0, 0.0));
        let (median, sd) = aggregate_replicates(&[5.0, 5.0, 5.0, 5.0]).unwrap();
        assert_eq!((median, sd), (5.0, 0.0));
        let (median, sd) = aggregate_replicates(&[0.04, 0.06, 0.07, 0.09, 0.50]).unwrap();
        assert_eq!(median, 0.07);
        assert_relative_eq!(sd, 5.25f64.sqrt() / 150.0, max_relative = 1e-12);
        assert!(matches!(
            aggregate_replicates(&[1.0, 2.0]),
            Err(EvalError::TooFewValues { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn aggregation_is_permutation_invariant() {
        let vals = [0.3, 0.9, 0.1, 0.5, 0.7];
        let base = aggregate_replicates(&vals).unwrap();
        let shuffled = [0.9, 0.1, 0.7, 0.3, 0.5];
        assert_eq!(base, aggregate_replicates(&shuffled).unwrap());
    }

    fn certified_model(seed: u64) -> N3pomModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = InterceptParams::new(
            vec![1.0, 3.0, 5.0, 7.0],
            rng.random::<f64>(),
            vec![
                0.5 + rng.random::<f64>(),
                0.5 + rng.random::<f64>(),
                0.5 + rng.random::<f64>(),
            ],
        )
        .unwrap();
        let (d, l) = (2, 4);
        let draw = |rng: &mut ChaCha8Rng| 2.0 * (rng.random::<f64>() - 0.5);
        let block = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..d).map(|_| (0..l).map(|_| draw(rng)).collect()).collect()
        };
        let net = CoefficientNet::new(
            block(&mut rng),
            block(&mut rng),
            block(&mut rng),
            (0..d).map(|_| draw(&mut rng)).collect(),
            Activation::Sigmoid,
        )
        .unwrap();
        let mut m = N3pomModel::new(p, net, 1.5).unwrap();
        project(&mut m);
        m
    }

    fn ball_samples(model: &N3pomModel, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let raw: Vec<f64> = (0..model.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
                let norm: f64 = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
                let r = model.eta() * rng.random::<f64>();
                raw.iter().map(|v| v * r / norm.max(1e-12)).collect()
            })
            .collect()
    }

    #[test]
    fn certified_model_passes_audit() {
        let m = certified_model(4);
        let xs = ball_samples(&m, 200, 9);
        let audit = audit_monotonicity(&m, &xs, 0.01).unwrap();
        assert_eq!(audit.violations, 0);
        assert!(audit.worst_diff >= -VIOLATION_TOL);
    }

    #[test]
    fn unprojected_model_reports_violations_honestly() {
        // Steep coefficient oscillation with a flat intercept; on the ball
        // boundary the CCP genuinely decreases somewhere.
        let p = InterceptParams::new(vec![1.0, 7.0], 0.0, vec![0.1]).unwrap();
        let net = CoefficientNet::new(
            vec![vec![4.0], vec![4.0]],
            vec![vec![-8.0], vec![-14.0]],
            vec![vec![3.0], vec![-3.0]],
            vec![0.0, 0.0],
            Activation::Sigmoid,
        )
        .unwrap();
        let m = N3pomModel::new(p, net, 1.0).unwrap();
        assert!(!m.is_certified());
        let xs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]];
        let coarse = audit_monotonicity(&m, &xs, 0.02).unwrap();
        let fine = audit_monotonicity(&m, &xs, 0.01).unwrap();
        assert!(coarse.violations > 0);
        // Refinement never loses a genuine (deep) violation.
        assert!(fine.violations >= coarse.violations);
        assert!(fine.worst_diff < -VIOLATION_TOL);
    }

    fn smoke_bench_config(jobs: usize) -> BenchConfig {
        let spec = SyntheticSpec {
            n: 80,
            j_max: 7.0,
            m1: 0.05,
            m2: -0.05,
            covariate_law: CovariateLaw::DiskUniform,
            seed: 11,
        };
        BenchConfig {
            replicates: 2,
            variants: vec![ResponseVariant::Continuous],
            train: TrainConfig { iterations: 40, batch_size: 16, ..TrainConfig::default() },
            knots: 8,
            init: InitOptions { hidden: 12, ..InitOptions::default() },
            init_lambda: 1.0,
            grid_step: 0.05,
            jobs,
            spec,
        }
    }

    #[test]
    fn single_replicate_benchmark_yields_one_mse_pair() {
        let mut cfg = smoke_bench_config(1);
        cfg.replicates = 1;
        let report = run_benchmark(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert_eq!(row.mse.len(), 1);
            assert!(row.median.is_finite() && row.median >= 0.0);
            assert!(row.trimmed_sd.is_none());
        }
    }

    #[test]
    fn benchmark_is_deterministic_across_job_counts() {
        let serial = run_benchmark(&smoke_bench_config(1)).unwrap();
        let parallel = run_benchmark(&smoke_bench_config(2)).unwrap();
        for (a, b) in serial.rows.iter().zip(&parallel.rows) {
            assert_eq!(a.mse, b.mse);
        }
    }

    #[test]
    fn benchmark_artifacts_are_well_formed() {
        let report = run_benchmark(&smoke_bench_config(1)).unwrap();
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("variant,coordinate,replicate,mse\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 2);
        let json = report.to_json_string();
        assert!(serde_json::from_str::<serde_json::Value>(&json).is_ok());
        assert!(report.render_table().contains("continuous"));
    }
}
