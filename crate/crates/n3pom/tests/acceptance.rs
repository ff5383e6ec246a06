//! Acceptance suite: every release criterion as one sequential run with a
//! pass/fail line per criterion (use `-- --nocapture` to see them).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use n3pom::baseline::{distill_net, extrapolate_rows, DiscreteFit};
use n3pom::datagen::{
    apply_perturbation, generate_synthetic, perturb, substream, truth_coefficients,
    truth_intercept, CovariateLaw, ResponseVariant, SyntheticSpec,
};
use n3pom::eval::{audit_monotonicity, run_benchmark, BenchConfig};
use n3pom::gradients::{finite_difference_gradient, grad_f, grad_f_slope};
use n3pom::model::{sigmoid, Activation, CoefficientNet, InterceptParams, N3pomModel};
use n3pom::monotonicity::{check_condition, project};
use n3pom::trainer::{fit_observed, TrainConfig};

fn random_model(rng: &mut ChaCha8Rng, kink_safe: bool) -> N3pomModel {
    let r = rng.random_range(3..7usize);
    let j_max = 7.0;
    let mut knots = vec![1.0];
    for i in 1..r - 1 {
        knots.push(1.0 + (j_max - 1.0) * i as f64 / (r - 1) as f64 + 0.2 * (rng.random::<f64>() - 0.5));
    }
    knots.push(j_max);
    let varphi: Vec<f64> = (0..r - 1)
        .map(|_| {
            let mag = if kink_safe { 0.3 + 2.0 * rng.random::<f64>() } else { 3.0 * (rng.random::<f64>() - 0.4) };
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let intercept = InterceptParams::new(knots, 2.0 * (rng.random::<f64>() - 0.5), varphi).unwrap();
    let (d, l) = (rng.random_range(1..4usize), rng.random_range(1..6usize));
    let draw = |rng: &mut ChaCha8Rng| 2.4 * (rng.random::<f64>() - 0.5);
    let block = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..d).map(|_| (0..l).map(|_| draw(rng)).collect()).collect()
    };
    let act = if rng.random::<bool>() { Activation::Sigmoid } else { Activation::Tanh };
    let net = CoefficientNet::new(
        block(rng),
        block(rng),
        block(rng),
        (0..d).map(|_| draw(rng)).collect(),
        act,
    )
    .unwrap();
    N3pomModel::new(intercept, net, 0.5 + 2.0 * rng.random::<f64>()).unwrap()
}

fn u_off_knots(rng: &mut ChaCha8Rng, model: &N3pomModel, margin: f64) -> f64 {
    loop {
        let u = 1.0 + (model.j_max() - 1.0) * rng.random::<f64>();
        if model.intercept.knots().iter().all(|j| (u - j).abs() > margin) {
            return u;
        }
    }
}

fn x_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let norm: f64 = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    let r = radius * rng.random::<f64>();
    raw.iter().map(|v| v * r / norm).collect()
}

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs.max(rel * a.abs().max(b.abs()))
}

/// Criterion 1: analytic gradients match central finite differences on 100
/// random draws away from kinks (1e-6 relative, 1e-8 absolute floor).
fn criterion_gradients() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0usize;
    for draw in 0..100 {
        let m = random_model(&mut rng, true);
        let u = u_off_knots(&mut rng, &m, 1e-3);
        let x: Vec<f64> = (0..m.dim()).map(|_| 1.2 * (rng.random::<f64>() - 0.5)).collect();

        let analytic_f = grad_f(&m, u, &x).map_err(|e| e.to_string())?.to_vec();
        let fd_f = finite_difference_gradient(&m, 1e-5, |mm| mm.logit_ccp(u, &x).unwrap());
        for (i, (a, b)) in analytic_f.iter().zip(&fd_f).enumerate() {
            if !close(*a, *b, 1e-6, 1e-8) {
                return Err(format!("draw {draw}, f-gradient entry {i}: analytic {a} vs FD {b}"));
            }
        }

        let analytic_s = grad_f_slope(&m, u, &x).map_err(|e| e.to_string())?.to_vec();
        let fd_s = finite_difference_gradient(&m, 1e-5, |mm| mm.logit_ccp_slope(u, &x).unwrap());
        for (i, (a, b)) in analytic_s.iter().zip(&fd_s).enumerate() {
            if !close(*a, *b, 1e-6, 1e-8) {
                return Err(format!("draw {draw}, f'-gradient entry {i}: analytic {a} vs FD {b}"));
            }
        }
        checked += 2 * analytic_f.len();
    }
    Ok(format!("{checked} partials across 100 draws"))
}

/// Criterion 2: 50 projected random models, 1000 ball points each; CCP
/// differences on a 0.01 u-grid never fall below -1e-10.
fn criterion_monotonicity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut scanned = 0usize;
    for trial in 0..50 {
        let mut m = random_model(&mut rng, false);
        project(&mut m);
        if !check_condition(&m).satisfied {
            return Err(format!("model {trial} not certified after projection"));
        }
        let xs: Vec<Vec<f64>> = (0..1000).map(|_| x_in_ball(&mut rng, m.dim(), m.eta())).collect();
        let audit = audit_monotonicity(&m, &xs, 0.01).map_err(|e| e.to_string())?;
        if audit.violations != 0 {
            return Err(format!(
                "model {trial}: {} of 1000 samples decreased (worst {})",
                audit.violations, audit.worst_diff
            ));
        }
        scanned += xs.len();
    }
    Ok(format!("{scanned} covariate scans, zero violations"))
}

/// Criterion 3: the sufficient condition holds after every iteration of a
/// 500-iteration smoke fit.
fn criterion_projection_contract() -> Result<String, String> {
    let spec = SyntheticSpec {
        n: 200,
        j_max: 7.0,
        m1: 0.05,
        m2: -0.05,
        covariate_law: CovariateLaw::DiskUniform,
        seed: 33,
    };
    let data = generate_synthetic(&spec).map_err(|e| e.to_string())?.dataset(ResponseVariant::Continuous);
    let intercept =
        InterceptParams::new(vec![1.0, 3.0, 5.0, 7.0], -5.0, vec![2.0, 2.0, 2.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let block = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..2).map(|_| (0..8).map(|_| 0.4 * (rng.random::<f64>() - 0.5)).collect()).collect()
    };
    let net = CoefficientNet::new(
        block(&mut rng),
        block(&mut rng),
        block(&mut rng),
        vec![0.1, -0.1],
        Activation::Sigmoid,
    )
    .unwrap();
    let init = N3pomModel::new(intercept, net, data.max_x_norm() + 0.01).unwrap();
    let cfg = TrainConfig { iterations: 500, batch_size: 16, seed: 5, ..TrainConfig::default() };
    let mut violations = 0usize;
    let mut observed = 0usize;
    fit_observed(&data, &init, &cfg, |_, m| {
        observed += 1;
        if !check_condition(m).satisfied {
            violations += 1;
        }
    })
    .map_err(|e| e.to_string())?;
    if violations > 0 {
        return Err(format!("{violations} of {observed} iterations violated the condition"));
    }
    Ok(format!("condition satisfied at all {observed} observations"))
}

/// Criterion 4: desk-scale synthetic benchmark, setting (0.05, -0.05),
/// n = 1000, 20 replicates, default config.
fn criterion_benchmark() -> Result<String, String> {
    let spec = SyntheticSpec {
        n: 1000,
        j_max: 7.0,
        m1: 0.05,
        m2: -0.05,
        covariate_law: CovariateLaw::DiskUniform,
        seed: 1,
    };
    let cfg = BenchConfig { jobs: 4, ..BenchConfig::standard(spec) };
    let report = run_benchmark(&cfg).map_err(|e| e.to_string())?;
    let median = |variant: ResponseVariant, coord: usize| -> f64 {
        report.row(variant, coord).expect("row present").median
    };
    let cont1 = median(ResponseVariant::Continuous, 1);
    let cont2 = median(ResponseVariant::Continuous, 2);
    let rounded1 = median(ResponseVariant::Rounded, 1);
    let pert1 = median(ResponseVariant::Perturbed, 1);
    let mut problems = Vec::new();
    if !(cont1 <= 0.20) {
        problems.push(format!("continuous MSE(b1) = {cont1:.4} > 0.20"));
    }
    if !(cont2 <= 0.30) {
        problems.push(format!("continuous MSE(b2) = {cont2:.4} > 0.30"));
    }
    if !(0.30..=0.70).contains(&rounded1) {
        problems.push(format!("rounded MSE(b1) = {rounded1:.4} outside [0.30, 0.70]"));
    }
    if !(cont1 < pert1 && pert1 < rounded1) {
        problems.push(format!(
            "ordering violated: continuous {cont1:.4}, perturbed {pert1:.4}, rounded {rounded1:.4}"
        ));
    }
    if !problems.is_empty() {
        return Err(problems.join("; "));
    }
    Ok(format!(
        "medians: continuous [{cont1:.3}, {cont2:.3}], perturbed b1 {pert1:.3}, rounded b1 {rounded1:.3}"
    ))
}

/// Criterion 5: KS statistic of 1e4 sampled responses at x = (0.3, -0.2)
/// against the generating CDF stays below the alpha = 0.01 critical value.
fn criterion_sampler() -> Result<String, String> {
    let x = [0.3, -0.2];
    let (m1, m2, j) = (0.05, -0.05, 7.0);
    let n = 10_000usize;
    let mut draws: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = substream(505, i as u64);
            n3pom::datagen::sample_response(&x, m1, m2, j, &mut rng).unwrap()
        })
        .collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cdf = |u: f64| {
        let b = truth_coefficients(u, m1, m2);
        sigmoid(truth_intercept(u) + b[0] * x[0] + b[1] * x[1])
    };
    let mut ks: f64 = 0.0;
    for (i, &v) in draws.iter().enumerate() {
        let f = cdf(v);
        ks = ks.max((f - i as f64 / n as f64).abs());
        ks = ks.max((f - (i + 1) as f64 / n as f64).abs());
    }
    let critical = 1.63 / (n as f64).sqrt();
    if ks >= critical {
        return Err(format!("KS = {ks:.5} >= critical {critical:.5}"));
    }
    Ok(format!("KS = {ks:.5} < {critical:.5}"))
}

/// Criterion 6: the interval-censored difference ratio at Delta = 1e-4
/// matches the density within 0.1% relative on 20 random triples.
fn criterion_remark_limit() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let delta = 1e-4;
    let mut accepted = 0usize;
    while accepted < 20 {
        let mut m = random_model(&mut rng, true);
        project(&mut m);
        let u = u_off_knots(&mut rng, &m, 1e-3);
        let x = x_in_ball(&mut rng, m.dim(), m.eta());
        let q = m.density(u, &x).map_err(|e| e.to_string())?;
        if q < 1e-3 {
            continue;
        }
        let nu = (m.ccp(u + delta, &x).unwrap() - m.ccp(u, &x).unwrap()) / delta;
        let rel = (nu - q).abs() / q;
        if rel > 1e-3 {
            return Err(format!("triple {accepted}: ratio {nu} vs density {q} (rel {rel:.2e})"));
        }
        accepted += 1;
    }
    Ok("20 triples within 0.1%".into())
}

/// Criterion 7: pre-noise distillation interpolates random discrete
/// coefficients within 1e-3 at T = 10.
fn criterion_init_fidelity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (j, d) = (7usize, 2usize);
        let mut alphas = Vec::new();
        let mut acc = -3.0;
        for _ in 0..j - 1 {
            acc += rng.random::<f64>();
            alphas.push(acc);
        }
        let betas: Vec<Vec<f64>> = (0..j - 1)
            .map(|_| (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
            .collect();
        let fit = DiscreteFit { alphas, betas, penalty_lambda: 0.0 };
        let net = distill_net(&fit, 50, 10.0).map_err(|e| e.to_string())?;
        let targets = extrapolate_rows(&fit.betas);
        for jt in 1..=j {
            for k in 0..d {
                let err = (net.value_at(jt as f64, k) - targets[jt - 1][k]).abs();
                worst = worst.max(err);
                if err > 1e-3 {
                    return Err(format!("|b_{k}({jt}) - target| = {err:.2e} > 1e-3"));
                }
            }
        }
    }
    Ok(format!("max residual {worst:.2e} over 20 random fits"))
}

/// Criterion 8: the perturbation operator is mean-preserving at g = 4 over
/// 1e5 draws and stays inside [1, J].
fn criterion_perturbation() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let n = 100_000usize;
    let mut sum = 0.0;
    for _ in 0..n {
        let v = perturb(4, 7.0, &mut rng);
        if !(1.0..=7.0).contains(&v) {
            return Err(format!("perturbed value {v} escaped [1, 7]"));
        }
        sum += v;
    }
    let mean = sum / n as f64;
    let se = (1.0f64 / 12.0).sqrt() / (n as f64).sqrt();
    if (mean - 4.0).abs() >= 3.0 * se {
        return Err(format!("mean {mean:.5} deviates from 4 by more than 3 se = {:.5}", 3.0 * se));
    }
    // Clamping at the interval ends still lands inside [1, J].
    if apply_perturbation(1, -0.5, 7.0) != 1.0 || apply_perturbation(7, 0.5, 7.0) != 7.0 {
        return Err("boundary clamp failed".into());
    }
    Ok(format!("mean {mean:.5}, 3 se = {:.5}", 3.0 * se))
}

/// Criterion 9: two identical CLI fit runs produce byte-identical artifacts.
fn criterion_determinism() -> Result<String, String> {
    let bin = env!("CARGO_BIN_EXE_n3pom");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |out: &std::path::Path| -> Result<(), String> {
        let status = std::process::Command::new(bin)
            .args([
                "fit",
                "--synthetic",
                "--n",
                "80",
                "--data-seed",
                "9",
                "--iterations",
                "60",
                "--knots",
                "8",
                "--hidden",
                "12",
                "--seed",
                "3",
                "--out",
            ])
            .arg(out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("fit exited with {status}"));
        }
        Ok(())
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a)?;
    run(&b)?;
    let model_a = std::fs::read(a.join("model.json")).map_err(|e| e.to_string())?;
    let model_b = std::fs::read(b.join("model.json")).map_err(|e| e.to_string())?;
    if model_a != model_b {
        return Err("model JSON differs between identical runs".into());
    }
    let trace_a = std::fs::read(a.join("trace.csv")).map_err(|e| e.to_string())?;
    let trace_b = std::fs::read(b.join("trace.csv")).map_err(|e| e.to_string())?;
    if trace_a != trace_b {
        return Err("trace CSV differs between identical runs".into());
    }
    Ok(format!("{} byte model files identical", model_a.len()))
}

#[test]
fn acceptance_criteria() {
    type Criterion = (&'static str, fn() -> Result<String, String>, Duration);
    let criteria: [Criterion; 9] = [
        ("1 gradient suite", criterion_gradients, Duration::from_secs(10)),
        ("2 monotonicity invariant", criterion_monotonicity, Duration::from_secs(30)),
        ("3 projection contract", criterion_projection_contract, Duration::from_secs(20)),
        ("4 benchmark reproduction", criterion_benchmark, Duration::from_secs(30 * 60)),
        ("5 sampler correctness", criterion_sampler, Duration::from_secs(5)),
        ("6 interval-censored limit", criterion_remark_limit, Duration::from_secs(1)),
        ("7 initialization fidelity", criterion_init_fidelity, Duration::from_secs(1)),
        ("8 perturbation operator", criterion_perturbation, Duration::from_secs(1)),
        ("9 CLI determinism", criterion_determinism, Duration::from_secs(60)),
    ];

    let mut failures = Vec::new();
    for (name, check, budget) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed();
        match outcome {
            Ok(detail) if elapsed <= budget => {
                println!("[acceptance] criterion {name}: PASS ({elapsed:.2?}) - {detail}");
            }
            Ok(detail) => {
                println!(
                    "[acceptance] criterion {name}: FAIL (over budget {budget:.0?}, took {elapsed:.2?}) - {detail}"
                );
                failures.push(name);
            }
            Err(reason) => {
                println!("[acceptance] criterion {name}: FAIL ({elapsed:.2?}) - {reason}");
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
