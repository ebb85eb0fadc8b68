//! Command-line front end. Exit codes: 0 success, 2 bad invocation or
//! configuration, 3 a computation that could not produce a result,
//! 4 validation gates failed.

mod config;
mod out;
mod pipeline;
mod registry;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;
use crate::registry::ModelKind;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(senscale::Error),
    Gates(String),
}

impl From<senscale::Error> for CliError {
    fn from(e: senscale::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(senscale::Error::Config(_)) => 2,
            CliError::Core(_) => 3,
            CliError::Gates(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) | CliError::Gates(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "senscale",
    version,
    about = "Sensitivity-certified input reduction for coupled multiscale models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate total sensitivity indices for a model's inputs
    Analyze(CommonArgs),
    /// Transfer component indices into certified coupled-model bounds
    Bound(BoundArgs),
    /// Turn certified bounds into an input-fixing plan
    Reduce(ReduceArgs),
    /// Compare the reduced model against the full one, with gates
    Validate(ValidateArgs),
    /// Run one of the pinned end-to-end demonstrations
    Demo(DemoArgs),
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Model name; unknown names list the registry
    #[arg(long)]
    model: Option<String>,

    /// Sample size per design matrix
    #[arg(short, long)]
    n: Option<usize>,

    /// Base seed; all randomness derives from it
    #[arg(long)]
    seed: Option<u64>,

    /// Coupling strength of the counterexample models
    #[arg(long)]
    beta: Option<f64>,

    /// TOML configuration file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Artifact directory (flag, then SENSCALE_OUTPUT_DIR, then config)
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Component sensitivities from a previous `analyze` (si.json);
    /// estimated fresh when omitted
    #[arg(long, value_name = "FILE")]
    si: Option<PathBuf>,

    /// Coupling form; must name the form the model certifies
    #[arg(long)]
    form: Option<String>,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Bound report from a previous `bound` (bounds.json); computed
    /// fresh when omitted
    #[arg(long, value_name = "FILE")]
    bounds: Option<PathBuf>,

    /// Fix inputs whose certified bound falls below this
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Fix inputs whose certified bound falls below this
    #[arg(long)]
    threshold: Option<f64>,

    /// Sample size of the full-vs-reduced comparison (defaults to -n)
    #[arg(long, value_name = "N")]
    validate_n: Option<usize>,

    /// Histogram bins of the pdf/cdf table
    #[arg(long)]
    bins: Option<usize>,

    /// Gate: largest accepted relative error of the output std
    #[arg(long, value_name = "R")]
    max_rel_err_std: Option<f64>,

    /// Gate: smallest accepted p-value of the two-sample tests
    #[arg(long, value_name = "P")]
    min_p_value: Option<f64>,

    /// Also run the probabilistic fixing check for this input
    #[arg(long, value_name = "NAME")]
    delta_input: Option<String>,

    /// Tail mass of the probabilistic fixing check
    #[arg(long)]
    eps: Option<f64>,

    /// Repetitions of the probabilistic fixing check
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args, Debug)]
struct DemoArgs {
    /// Which demonstration: reaction, ou, or counterexample
    which: String,

    /// Artifact directory; the demo writes into a subdirectory named
    /// after the model
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Analyze(a) => cmd_analyze(a),
        Cmd::Bound(a) => cmd_bound(a),
        Cmd::Reduce(a) => cmd_reduce(a),
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::Demo(a) => cmd_demo(a),
    };
    if let Err(e) = result {
        eprintln!("senscale: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

/// Merges flags, config file, and defaults into run settings. The model,
/// sample size, and seed have no defaults on purpose: a run that does not
/// state them is not reproducible.
fn resolve_settings(common: &CommonArgs) -> Result<(Settings, config::FileConfig), CliError> {
    let file = config::load(common.config.as_deref())?;
    let run = file.run.as_ref();
    let model = common
        .model
        .clone()
        .or_else(|| run.and_then(|r| r.model.clone()))
        .ok_or_else(|| CliError::Config("missing model (--model or [run].model)".into()))?;
    let n = common
        .n
        .or_else(|| run.and_then(|r| r.n))
        .ok_or_else(|| CliError::Config("missing sample size (-n or [run].n)".into()))?;
    let seed = common
        .seed
        .or_else(|| run.and_then(|r| r.seed))
        .ok_or_else(|| CliError::Config("missing seed (--seed or [run].seed)".into()))?;
    let beta = common.beta.or_else(|| run.and_then(|r| r.beta)).unwrap_or(0.3);
    let output_dir = common
        .output_dir
        .clone()
        .or_else(|| std::env::var_os("SENSCALE_OUTPUT_DIR").map(PathBuf::from))
        .or_else(|| run.and_then(|r| r.output_dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let v = file.validate.as_ref();
    let bins = v.and_then(|v| v.bins).unwrap_or(40);
    if bins == 0 {
        return Err(CliError::Config("bins must be at least 1".into()));
    }
    let settings = Settings {
        model,
        n,
        seed,
        beta,
        threshold: file.reduce.as_ref().and_then(|r| r.threshold).unwrap_or(0.1),
        validate_n: v.and_then(|v| v.n).unwrap_or(n),
        bins,
        max_rel_err_std: v.and_then(|v| v.max_rel_err_std).unwrap_or(0.05),
        min_p_value: v.and_then(|v| v.min_p_value).unwrap_or(0.05),
        eps: v.and_then(|v| v.eps),
        trials: v.and_then(|v| v.trials),
        delta_input: v.and_then(|v| v.delta_input.clone()),
        inputs: file.input.clone(),
        output_dir,
    };
    Ok((settings, file))
}

fn cmd_analyze(args: &CommonArgs) -> Result<(), CliError> {
    let (settings, _) = resolve_settings(args)?;
    let kind = ModelKind::parse(&settings.model)?;
    let space = registry::apply_overrides(&kind.space(), &settings.inputs, true)?;
    let model = kind.scalar(settings.beta)?;
    let sens = pipeline::estimate_sensitivity(&*model, &space, settings.n, settings.seed)?;
    out::ensure_dir(&settings.output_dir)?;
    out::write_json(&settings.output_dir.join("si.json"), &sens)?;
    out::write_text(&settings.output_dir.join("si.csv"), &out::si_csv(&sens))?;
    Ok(())
}

fn cmd_bound(args: &BoundArgs) -> Result<(), CliError> {
    let (settings, file) = resolve_settings(&args.common)?;
    let kind = ModelKind::parse(&settings.model)?;
    let coupled = kind.coupled(settings.beta, &settings.inputs)?;

    if let Some(b) = &file.bound {
        if b.k.is_some()
            || b.lipschitz_l.is_some()
            || b.lipschitz_c.is_some()
            || b.lipschitz_g0.is_some()
        {
            return Err(CliError::Config(
                "[bound] k and lipschitz_* describe shared-sum and Lipschitz couplings; \
                 no named model certifies those forms"
                    .into(),
            ));
        }
    }
    let builtin = match coupled.kind {
        ModelKind::Reaction => Some("multiplicative"),
        ModelKind::Ou => Some("additive"),
        _ => None,
    };
    let requested = args.form.clone().or_else(|| file.bound.as_ref().and_then(|b| b.form.clone()));
    if let Some(form) = requested {
        match builtin {
            Some(b) if form == b => {}
            Some(b) => {
                return Err(CliError::Config(format!(
                    "model '{}' certifies coupling form '{b}', not '{form}'",
                    settings.model
                )))
            }
            None => {
                return Err(CliError::Config(format!(
                    "model '{}' has no certified coupling form",
                    settings.model
                )))
            }
        }
    }

    let sens = match &args.si {
        Some(p) => out::read_json::<out::SiFile>(p)?.into_result(),
        None => pipeline::estimate_sensitivity(
            &*coupled.f,
            &coupled.f_space,
            settings.n,
            settings.seed,
        )?,
    };
    let report = pipeline::compute_bounds(&coupled, &sens, &settings)?;
    out::ensure_dir(&settings.output_dir)?;
    out::write_json(&settings.output_dir.join("bounds.json"), &report)?;
    if !report.conditions_ok() {
        eprintln!(
            "senscale: warning: coupling conditions failed; the report carries no certificates"
        );
    }
    Ok(())
}

fn cmd_reduce(args: &ReduceArgs) -> Result<(), CliError> {
    let (mut settings, _) = resolve_settings(&args.common)?;
    if let Some(t) = args.threshold {
        settings.threshold = t;
    }
    let kind = ModelKind::parse(&settings.model)?;
    let coupled = kind.coupled(settings.beta, &settings.inputs)?;
    let report = match &args.bounds {
        Some(p) => out::read_json::<out::BoundsFile>(p)?.into_report(),
        None => {
            let sens = pipeline::estimate_sensitivity(
                &*coupled.f,
                &coupled.f_space,
                settings.n,
                settings.seed,
            )?;
            pipeline::compute_bounds(&coupled, &sens, &settings)?
        }
    };
    let plan = senscale::make_plan(&coupled.full_space, &report, settings.threshold)?;
    out::ensure_dir(&settings.output_dir)?;
    out::write_json(&settings.output_dir.join("plan.json"), &plan)?;
    for w in &plan.warnings {
        eprintln!("senscale: warning: {w}");
    }
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let (mut settings, _) = resolve_settings(&args.common)?;
    if let Some(t) = args.threshold {
        settings.threshold = t;
    }
    if let Some(v) = args.validate_n {
        settings.validate_n = v;
    }
    if let Some(b) = args.bins {
        if b == 0 {
            return Err(CliError::Config("bins must be at least 1".into()));
        }
        settings.bins = b;
    }
    if let Some(r) = args.max_rel_err_std {
        settings.max_rel_err_std = r;
    }
    if let Some(p) = args.min_p_value {
        settings.min_p_value = p;
    }
    if args.delta_input.is_some() {
        settings.delta_input = args.delta_input.clone();
    }
    if args.eps.is_some() {
        settings.eps = args.eps;
    }
    if args.trials.is_some() {
        settings.trials = args.trials;
    }

    let kind = ModelKind::parse(&settings.model)?;
    let coupled = kind.coupled(settings.beta, &settings.inputs)?;
    let res = pipeline::run_pipeline(&coupled, &settings)?;
    out::write_validation(
        &settings.output_dir,
        settings.config_hash(),
        kind.name(),
        settings.n,
        settings.seed,
        &res,
    )?;
    if !res.gates.passed {
        return Err(CliError::Gates(pipeline::gate_failure_message(&res, &settings)));
    }
    Ok(())
}

fn cmd_demo(args: &DemoArgs) -> Result<(), CliError> {
    let (kind, mut settings) = demo_settings(&args.which)?;
    let root = args
        .output_dir
        .clone()
        .or_else(|| std::env::var_os("SENSCALE_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let dir = root.join(kind.name());
    settings.output_dir = dir.clone();

    let coupled = kind.coupled(settings.beta, &[])?;
    let res = pipeline::run_pipeline(&coupled, &settings)?;
    out::ensure_dir(&dir)?;
    out::write_json(&dir.join("si.json"), &res.sensitivity)?;
    out::write_text(&dir.join("si.csv"), &out::si_csv(&res.sensitivity))?;
    if let Some(b) = &res.bounds {
        out::write_json(&dir.join("bounds.json"), b)?;
    }
    out::write_json(&dir.join("plan.json"), &res.plan)?;
    out::write_validation(
        &dir,
        settings.config_hash(),
        kind.name(),
        settings.n,
        settings.seed,
        &res,
    )?;
    println!(
        "demo {}: fixed [{}], gates {}",
        kind.name(),
        res.plan.fixed.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join(", "),
        if res.gates.passed { "passed" } else { "FAILED" }
    );
    if !res.gates.passed {
        return Err(CliError::Gates(pipeline::gate_failure_message(&res, &settings)));
    }
    Ok(())
}

/// The pinned demonstration runs. Seeds and sizes are fixed so the
/// artifacts are bit-reproducible; the counterexample run is expected to
/// fail its gates, that failure being the point.
fn demo_settings(which: &str) -> Result<(ModelKind, Settings), CliError> {
    let (kind, n, seed, threshold, validate_n, max_rel, delta) = match which {
        "reaction" => (ModelKind::Reaction, 4096, 9u64, 0.1, 8192, 0.05, Some("x2")),
        "ou" => (ModelKind::Ou, 8192, 9u64, 0.01, 8192, 0.03, None),
        "counterexample" => (ModelKind::Counterexample, 4096, 7u64, 0.1, 4096, 0.05, None),
        other => {
            return Err(CliError::Config(format!(
                "unknown demo '{other}' (use reaction, ou, or counterexample)"
            )))
        }
    };
    let settings = Settings {
        model: kind.name().into(),
        n,
        seed,
        beta: 0.3,
        threshold,
        validate_n,
        bins: 40,
        max_rel_err_std: max_rel,
        min_p_value: 0.05,
        eps: delta.map(|_| 0.1),
        trials: delta.map(|_| 100),
        delta_input: delta.map(String::from),
        inputs: Vec::new(),
        output_dir: PathBuf::from("."),
    };
    Ok((kind, settings))
}
