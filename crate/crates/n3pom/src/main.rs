//! Command-line interface: simulate synthetic datasets, fit models, predict,
//! evaluate coefficient curves, run the benchmark, and audit monotonicity.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use n3pom::baseline::{fit_discrete_for_init, init_from_discrete, BaselineError, InitOptions};
use n3pom::datagen::{
    discretize, generate_synthetic, load_csv, truth_coefficients, CovariateLaw, DataError,
    ResponseVariant, SyntheticSpec,
};
use n3pom::eval::{audit_monotonicity, grid_mse, run_benchmark, BenchConfig, EvalError, Grid};
use n3pom::model::{Activation, CoefficientNet, InterceptParams, ModelError, N3pomModel};
use n3pom::monotonicity::check_condition;
use n3pom::trainer::{fit, TrainConfig, TrainError, WeightMode};

#[derive(Parser)]
#[command(name = "n3pom", version, about = "Continuous ordinal regression with monotone neural coefficient functions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset (CSV plus manifest).
    Simulate(SimulateArgs),
    /// Fit a model to a CSV or synthetic dataset.
    Fit(FitArgs),
    /// Evaluate CCP, density, and marginal effects at query points.
    Predict(PredictArgs),
    /// Emit fitted coefficient curves on the evaluation grid.
    Eval(EvalArgs),
    /// Run the synthetic MSE benchmark.
    Bench(BenchArgs),
    /// Check the sufficient condition and scan the CCP for decreases.
    Audit(AuditArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ActivationArg {
    Sigmoid,
    Tanh,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Sigmoid => Activation::Sigmoid,
            ActivationArg::Tanh => Activation::Tanh,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightModeArg {
    Uniform,
    Cell,
}

impl From<WeightModeArg> for WeightMode {
    fn from(w: WeightModeArg) -> Self {
        match w {
            WeightModeArg::Uniform => WeightMode::Uniform,
            WeightModeArg::Cell => WeightMode::InvSqrtCell,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Distill,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CovariatesArg {
    Disk,
    Beta,
}

impl From<CovariatesArg> for CovariateLaw {
    fn from(c: CovariatesArg) -> Self {
        match c {
            CovariatesArg::Disk => CovariateLaw::DiskUniform,
            CovariatesArg::Beta => CovariateLaw::BetaHalf,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Continuous,
    Rounded,
    Perturbed,
}

impl From<VariantArg> for ResponseVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Continuous => ResponseVariant::Continuous,
            VariantArg::Rounded => ResponseVariant::Rounded,
            VariantArg::Perturbed => ResponseVariant::Perturbed,
        }
    }
}

#[derive(Args)]
struct TrainFlags {
    /// Mini-batch size.
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 5000)]
    iterations: usize,
    /// Initial learning rate.
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long = "lr-decay", default_value_t = 0.95)]
    lr_decay: f64,
    /// Apply the decay every this many iterations.
    #[arg(long = "lr-every", default_value_t = 50)]
    lr_every: usize,
    #[arg(long = "weight-mode", value_enum, default_value_t = WeightModeArg::Cell)]
    weight_mode: WeightModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// eta = max covariate norm + this margin.
    #[arg(long = "eta-margin", default_value_t = 1e-2)]
    eta_margin: f64,
}

impl TrainFlags {
    fn to_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch,
            iterations: self.iterations,
            lr_init: self.lr,
            lr_decay: self.lr_decay,
            lr_every: self.lr_every,
            weight_mode: self.weight_mode.into(),
            seed: self.seed,
            eta_margin: self.eta_margin,
        }
    }
}

#[derive(Args)]
struct ModelFlags {
    /// Upper end J of the response interval [1, J].
    #[arg(long = "j-max", default_value_t = 7.0)]
    j_max: f64,
    /// Number of intercept knots (equally spaced).
    #[arg(long, default_value_t = 24)]
    knots: usize,
    /// Hidden units per coefficient network.
    #[arg(long, default_value_t = 50)]
    hidden: usize,
    #[arg(long, value_enum, default_value_t = ActivationArg::Sigmoid)]
    activation: ActivationArg,
}

#[derive(Args)]
struct InitFlags {
    #[arg(long, value_enum, default_value_t = InitArg::Distill)]
    init: InitArg,
    /// Adjacent-threshold penalty of the discrete initialization fit.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Switch steepness of the distillation units.
    #[arg(long, default_value_t = 10.0)]
    steepness: f64,
    /// Scale the noise on unused outer weights by 0.01.
    #[arg(long = "damp-init-noise")]
    damp_init_noise: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long = "j-max", default_value_t = 7.0)]
    j_max: f64,
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    m1: f64,
    #[arg(long, default_value_t = -0.05, allow_hyphen_values = true)]
    m2: f64,
    #[arg(long, value_enum, default_value_t = CovariatesArg::Disk)]
    covariates: CovariatesArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for dataset.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV (mutually exclusive with --synthetic).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long = "response-col", default_value = "h")]
    response_col: String,
    /// Skip the affine response map onto [1, J].
    #[arg(long = "no-rescale")]
    no_rescale: bool,
    /// Skip covariate standardization.
    #[arg(long = "no-standardize")]
    no_standardize: bool,

    /// Train on an in-memory synthetic dataset instead of a CSV.
    #[arg(long)]
    synthetic: bool,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    m1: f64,
    #[arg(long, default_value_t = -0.05, allow_hyphen_values = true)]
    m2: f64,
    #[arg(long, value_enum, default_value_t = CovariatesArg::Disk)]
    covariates: CovariatesArg,
    #[arg(long = "data-seed", default_value_t = 0)]
    data_seed: u64,
    /// Which synthetic response variant to train on.
    #[arg(long, value_enum, default_value_t = VariantArg::Continuous)]
    variant: VariantArg,

    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    init: InitFlags,
    #[command(flatten)]
    train: TrainFlags,

    /// Output directory for model.json and trace.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Query CSV with header u,x1,...,xd.
    #[arg(long)]
    query: PathBuf,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Generating m1 (with --m2) to also report grid MSE per coordinate.
    #[arg(long, allow_hyphen_values = true)]
    m1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    m2: Option<f64>,
    #[arg(long = "grid-step", default_value_t = 0.05)]
    grid_step: f64,
    /// Output CSV path for the coefficient curves (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Generating coefficients as "m1,m2"; one of 0.05,-0.05 | 0.05,0.05 |
    /// 0.05,0 | 0,0.
    #[arg(long, default_value = "0.05,-0.05")]
    setting: String,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = [VariantArg::Continuous, VariantArg::Rounded, VariantArg::Perturbed])]
    variants: Vec<VariantArg>,
    #[arg(long, value_enum, default_value_t = CovariatesArg::Disk)]
    covariates: CovariatesArg,
    /// Parallel replicate workers.
    #[arg(long, default_value_t = 4)]
    jobs: usize,
    #[arg(long = "grid-step", default_value_t = 0.05)]
    grid_step: f64,
    /// Adjacent-threshold penalty of the discrete initialization fit.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Distillation unit steepness; the benchmark profile uses wide units.
    #[arg(long, default_value_t = 1.2)]
    steepness: f64,
    /// Use raw unit-normal noise on unused initialization weights instead of
    /// the damped default.
    #[arg(long = "raw-init-noise")]
    raw_init_noise: bool,

    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    train: TrainFlags,

    /// Output directory for report.csv and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    model: PathBuf,
    /// Number of covariate samples drawn inside the eta-ball.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long = "u-step", default_value_t = 0.01)]
    u_step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

// Exit codes: 0 success, 1 I/O or data, 2 configuration, 3 numeric/training.
impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 1,
            CliError::Data(e) => data_code(e),
            CliError::Model(e) => model_code(e),
            CliError::Train(e) => train_code(e),
            CliError::Baseline(e) => baseline_code(e),
            CliError::Eval(e) => match e {
                EvalError::Model(m) => model_code(m),
                EvalError::Train(t) => train_code(t),
                EvalError::Baseline(b) => baseline_code(b),
                EvalError::Data(d) => data_code(d),
                EvalError::Pool(_) => 3,
                _ => 2,
            },
        }
    }
}

fn data_code(e: &DataError) -> i32 {
    match e {
        DataError::BracketFailure(_) => 3,
        DataError::BadSpec(_) => 2,
        _ => 1,
    }
}

fn model_code(e: &ModelError) -> i32 {
    match e {
        ModelError::Io(_) | ModelError::Json(_) => 1,
        _ => 2,
    }
}

fn train_code(e: &TrainError) -> i32 {
    match e {
        TrainError::Config(_) => 2,
        TrainError::Model(m) => model_code(m),
        _ => 3,
    }
}

fn baseline_code(e: &BaselineError) -> i32 {
    match e {
        BaselineError::HiddenTooSmall { .. } | BaselineError::BadJ(_) => 2,
        BaselineError::Stuck { .. } => 3,
        BaselineError::NonIntegerResponse { .. }
        | BaselineError::EmptyClass { .. }
        | BaselineError::SingleClass { .. } => 1,
        BaselineError::Model(m) => model_code(m),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("N3POM_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Predict(a) => cmd_predict(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Audit(a) => cmd_audit(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        n: a.n,
        j_max: a.j_max,
        m1: a.m1,
        m2: a.m2,
        covariate_law: a.covariates.into(),
        seed: a.seed,
    };
    let data = generate_synthetic(&spec)?;
    fs::create_dir_all(&a.out)?;
    let mut csv = Vec::new();
    data.write_csv(&mut csv)?;
    fs::write(a.out.join("dataset.csv"), csv)?;
    let manifest = serde_json::to_string_pretty(&spec).expect("spec serializes");
    fs::write(a.out.join("manifest.json"), manifest)?;
    println!("wrote {} samples to {}", a.n, a.out.display());
    Ok(())
}

fn random_init_model(
    knots: &InterceptParams,
    dim: usize,
    hidden: usize,
    activation: Activation,
    eta: f64,
    seed: u64,
) -> Result<N3pomModel, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |scale: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        scale * z
    };
    let phi = draw(0.1);
    let varphi: Vec<f64> = (0..knots.num_knots() - 1).map(|_| draw(0.1)).collect();
    let block = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..dim)
            .map(|_| {
                (0..hidden)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        0.1 * z
                    })
                    .collect()
            })
            .collect()
    };
    let w1 = block(&mut rng);
    let v1 = block(&mut rng);
    let w2 = block(&mut rng);
    let v2: Vec<f64> = (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.1 * z
        })
        .collect();
    let intercept = InterceptParams::new(knots.knots().to_vec(), phi, varphi)?;
    let net = CoefficientNet::new(w1, v1, w2, v2, activation)?;
    N3pomModel::new(intercept, net, eta)
}

fn cmd_fit(a: FitArgs) -> Result<(), CliError> {
    let data = match (&a.data, a.synthetic) {
        (Some(_), true) | (None, false) => {
            return Err(CliError::Usage(
                "provide exactly one input source: --data <csv> or --synthetic".into(),
            ));
        }
        (Some(path), false) => {
            load_csv(path, &a.response_col, a.model.j_max, !a.no_rescale, !a.no_standardize)?
        }
        (None, true) => {
            let spec = SyntheticSpec {
                n: a.n,
                j_max: a.model.j_max,
                m1: a.m1,
                m2: a.m2,
                covariate_law: a.covariates.into(),
                seed: a.data_seed,
            };
            generate_synthetic(&spec)?.dataset(a.variant.into())
        }
    };

    let train_cfg = a.train.to_config();
    let eta = data.max_x_norm() + train_cfg.eta_margin;
    let knots = InterceptParams::regular(a.model.knots, a.model.j_max).map_err(CliError::Model)?;
    let activation: Activation = a.model.activation.into();

    let init_model = match a.init.init {
        InitArg::Distill => {
            if activation != Activation::Sigmoid {
                return Err(CliError::Usage(
                    "distillation initialization constructs a sigmoid network; \
                     use --activation sigmoid or --init random"
                        .into(),
                ));
            }
            let rounded: Vec<f64> =
                data.h.iter().map(|&h| discretize(h, data.j_max()) as f64).collect();
            let rounded_data = data.with_responses(rounded)?;
            let discrete = fit_discrete_for_init(&rounded_data, a.init.lambda, train_cfg.seed)?;
            let opts = InitOptions {
                hidden: a.model.hidden,
                steepness: a.init.steepness,
                seed: train_cfg.seed,
                damp_w2_noise: a.init.damp_init_noise,
            };
            init_from_discrete(&discrete, knots.knots(), eta, &opts)?
        }
        InitArg::Random => {
            random_init_model(&knots, data.dim(), a.model.hidden, activation, eta, train_cfg.seed)?
        }
    };

    let (model, trace) = fit(&data, &init_model, &train_cfg)?;
    fs::create_dir_all(&a.out)?;
    model.save(&a.out.join("model.json"))?;
    let mut trace_csv = Vec::new();
    trace.write_csv(&mut trace_csv)?;
    fs::write(a.out.join("trace.csv"), trace_csv)?;

    let report = check_condition(&model);
    let last = trace.records.last();
    println!(
        "fit complete: n = {}, loglik = {:.6}, condition satisfied = {} (c = {:.4})",
        data.n(),
        last.map_or(f64::NAN, |r| r.full_loglik),
        report.satisfied,
        report.c
    );
    println!("model -> {}", a.out.join("model.json").display());
    Ok(())
}

fn out_writer(path: &Option<PathBuf>) -> Result<Box<dyn Write>, std::io::Error> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    })
}

fn cmd_predict(a: PredictArgs) -> Result<(), CliError> {
    let model = N3pomModel::load(&a.model)?;
    let d = model.dim();
    let text = fs::read_to_string(&a.query)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(DataError::Empty)?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names.len() != d + 1 || names[0] != "u" {
        return Err(CliError::Usage(format!(
            "query header must be u,x1,...,x{d} for this model, got `{header}`"
        )));
    }

    let mut out = out_writer(&a.out)?;
    let cols: Vec<String> = ["u".into(), "ccp".into(), "cpd".into()]
        .into_iter()
        .chain((1..=d).map(|k| format!("b_{k}")))
        .chain((1..=d).map(|k| format!("s_{k}")))
        .chain((1..=d).map(|k| format!("me_{k}")))
        .collect();
    writeln!(out, "{}", cols.join(","))?;

    for (line_no, line) in lines {
        let row = line_no + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(DataError::RaggedRow { row, expected: d + 1, got: fields.len() }.into());
        }
        let mut vals = Vec::with_capacity(d + 1);
        for (idx, f) in fields.iter().enumerate() {
            vals.push(f.parse::<f64>().map_err(|_| DataError::NonNumeric {
                row,
                col: names[idx].to_string(),
                value: f.to_string(),
            })?);
        }
        let (u, x) = (vals[0], &vals[1..]);
        let ccp = model.ccp(u, x)?;
        let cpd = model.density(u, x)?;
        let b = model.net.value(u);
        let me = model.marginal_effect(u, x)?;
        let mut fields: Vec<String> = vec![format!("{u}"), format!("{ccp}"), format!("{cpd}")];
        fields.extend(b.iter().map(|v| format!("{v}")));
        fields.extend(b.iter().map(|v| format!("{}", -v)));
        fields.extend(me.iter().map(|v| format!("{v}")));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let model = N3pomModel::load(&a.model)?;
    let d = model.dim();
    let truth = match (a.m1, a.m2) {
        (Some(m1), Some(m2)) => {
            if d != 2 {
                return Err(CliError::Usage(format!(
                    "the synthetic truth has 2 coordinates, the model has {d}"
                )));
            }
            Some((m1, m2))
        }
        (None, None) => None,
        _ => return Err(CliError::Usage("provide both --m1 and --m2 or neither".into())),
    };

    let grid = Grid::new(1.0, model.j_max(), a.grid_step).map_err(CliError::Eval)?;
    let mut out = out_writer(&a.out)?;
    let mut cols: Vec<String> = ["u".into()]
        .into_iter()
        .chain((1..=d).map(|k| format!("b_{k}")))
        .chain((1..=d).map(|k| format!("s_{k}")))
        .collect();
    if truth.is_some() {
        cols.extend((1..=d).map(|k| format!("truth_b_{k}")));
    }
    writeln!(out, "{}", cols.join(","))?;
    for u in grid.points() {
        let b = model.net.value(u);
        let mut fields: Vec<String> = vec![format!("{u}")];
        fields.extend(b.iter().map(|v| format!("{v}")));
        fields.extend(b.iter().map(|v| format!("{}", -v)));
        if let Some((m1, m2)) = truth {
            let t = truth_coefficients(u, m1, m2);
            fields.extend(t.iter().map(|v| format!("{v}")));
        }
        writeln!(out, "{}", fields.join(","))?;
    }

    if let Some((m1, m2)) = truth {
        for k in 0..d {
            let mse = grid_mse(
                &grid,
                |u| model.net.value_at(u, k),
                |u| truth_coefficients(u, m1, m2)[k],
            );
            eprintln!("MSE(b_{}) = {:.6}", k + 1, mse);
        }
    }
    Ok(())
}

const BENCH_SETTINGS: [(f64, f64); 4] = [(0.05, -0.05), (0.05, 0.05), (0.05, 0.0), (0.0, 0.0)];

fn parse_setting(text: &str) -> Result<(f64, f64), CliError> {
    let listing = || {
        BENCH_SETTINGS
            .iter()
            .map(|(m1, m2)| format!("{m1},{m2}"))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let parsed: Option<(f64, f64)> = match parts.as_slice() {
        [a, b] => a.parse().ok().zip(b.parse().ok()),
        _ => None,
    };
    let (m1, m2) = parsed.ok_or_else(|| {
        CliError::Usage(format!("cannot parse setting `{text}`; valid settings: {}", listing()))
    })?;
    if !BENCH_SETTINGS.iter().any(|(a, b)| (a - m1).abs() < 1e-12 && (b - m2).abs() < 1e-12) {
        return Err(CliError::Usage(format!(
            "unknown setting `{text}`; valid settings: {}",
            listing()
        )));
    }
    Ok((m1, m2))
}

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    let (m1, m2) = parse_setting(&a.setting)?;
    if a.variants.is_empty() {
        return Err(CliError::Usage("need at least one response variant".into()));
    }
    let spec = SyntheticSpec {
        n: a.n,
        j_max: a.model.j_max,
        m1,
        m2,
        covariate_law: a.covariates.into(),
        seed: a.train.seed,
    };
    if a.model.activation != ActivationArg::Sigmoid {
        return Err(CliError::Usage(
            "the benchmark uses the distillation initialization, which constructs sigmoid networks".into(),
        ));
    }
    let cfg = BenchConfig {
        spec,
        replicates: a.replicates,
        variants: a.variants.iter().map(|&v| v.into()).collect(),
        train: a.train.to_config(),
        knots: a.model.knots,
        init: InitOptions {
            hidden: a.model.hidden,
            steepness: a.steepness,
            seed: a.train.seed,
            damp_w2_noise: !a.raw_init_noise,
        },
        init_lambda: a.lambda,
        grid_step: a.grid_step,
        jobs: a.jobs.max(1),
    };
    let report = run_benchmark(&cfg)?;
    print!("{}", report.render_table());
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        let mut csv = Vec::new();
        report.write_csv(&mut csv)?;
        fs::write(dir.join("report.csv"), csv)?;
        fs::write(dir.join("report.json"), report.to_json_string())?;
        println!("report -> {}", dir.join("report.csv").display());
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct AuditDocument<'a> {
    eta: f64,
    condition: &'a n3pom::MonotonicityReport,
    audit: &'a n3pom::MonotonicityAudit,
}

fn cmd_audit(a: AuditArgs) -> Result<(), CliError> {
    let model = N3pomModel::load(&a.model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let d = model.dim();
    let samples: Vec<Vec<f64>> = (0..a.samples)
        .map(|_| {
            let raw: Vec<f64> = (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                })
                .collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let r = model.eta() * rng.random::<f64>().powf(1.0 / d as f64);
            raw.iter().map(|v| v * r / norm).collect()
        })
        .collect();
    let condition = check_condition(&model);
    let audit = audit_monotonicity(&model, &samples, a.u_step)?;
    let doc = AuditDocument { eta: model.eta(), condition: &condition, audit: &audit };
    let json = serde_json::to_string_pretty(&doc).expect("audit serializes");
    match &a.out {
        Some(p) => fs::write(p, json)?,
        None => println!("{json}"),
    }
    eprintln!(
        "condition satisfied = {}, {} of {} samples violate on the {}-grid",
        condition.satisfied, audit.violations, audit.samples, a.u_step
    );
    Ok(())
}
