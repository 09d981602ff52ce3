//! Subcommand bodies, separated from argument parsing for testability.

use crate::error::{CliError, Result};
use crate::run_config::{DatasetKind, DatasetSection, RunConfig};
use crate::training::{evaluate, load_split, run_training};
use data_io::{format_sig6, load_checkpoint, synth_dataset, Split};
use ode_core::{empirical_order, IntegratorId, OdeProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resnet_stacks::{check_model_gradients, preset, Model, ModelConfig};
use std::io::Write;
use std::path::{Path, PathBuf};
use tensor_autodiff::{grad_check, ParamStore, Tensor};

pub struct BenchOdeArgs {
    pub methods: String,
    pub problem: String,
    pub taus: String,
    pub horizon: f64,
    pub out: PathBuf,
}

fn parse_methods(spec: &str) -> Result<Vec<IntegratorId>> {
    if spec == "all" {
        return Ok(IntegratorId::ALL.to_vec());
    }
    spec.split(',')
        .map(|token| {
            IntegratorId::from_token(token.trim()).ok_or_else(|| {
                let valid: Vec<&str> = IntegratorId::ALL.iter().map(|m| m.token()).collect();
                CliError::usage(format!(
                    "unknown method `{token}`; valid methods: all, {}",
                    valid.join(", ")
                ))
            })
        })
        .collect()
}

fn parse_taus(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("bad step size `{tok}`")))
        })
        .collect()
}

/// Sweeps each method over the τ grid, writes the error/order CSV, and
/// prints one fitted-order line per method.
pub fn cmd_bench_ode(args: &BenchOdeArgs) -> Result<()> {
    let methods = parse_methods(&args.methods)?;
    let taus = parse_taus(&args.taus)?;
    if taus.len() < 4 {
        return Err(CliError::usage("order fitting needs at least 4 step sizes"));
    }
    let problem = OdeProblem::by_name(&args.problem).ok_or_else(|| {
        CliError::usage(format!(
            "unknown problem `{}`; valid problems: {}",
            args.problem,
            OdeProblem::catalog().join(", ")
        ))
    })?;

    let mut csv = String::from("method,tau,error,fitted_order\n");
    for method in &methods {
        let est = empirical_order(*method, &problem, &taus, args.horizon)?;
        for (tau, err) in est.taus.iter().zip(&est.errors) {
            csv.push_str(&format!("{},{},{:e},\n", method.token(), tau, err));
        }
        csv.push_str(&format!("{},,,{}\n", method.token(), format_sig6(est.slope)));
        println!(
            "{}: fitted order {} over {} step sizes (theory {})",
            method.token(),
            format_sig6(est.slope),
            est.taus.len(),
            method.global_order()
        );
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::fs::File::create(&args.out)?;
    file.write_all(csv.as_bytes())?;
    println!("wrote {}", args.out.display());
    Ok(())
}

/// Trains per the config file; `--seed`/`--out` and the output-directory
/// environment variable override the corresponding config keys.
pub fn cmd_train(
    config_path: &Path,
    seed_override: Option<u64>,
    out_override: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    if let Some(out) = out_override {
        cfg.out_dir = out;
    } else if let Ok(dir) = std::env::var("ODESTACK_OUT") {
        cfg.out_dir = PathBuf::from(dir);
    }

    let outcome = run_training(&cfg)?;
    println!("param_count={}", outcome.param_count);
    for row in &outcome.rows {
        println!(
            "epoch {} lr={} train_loss={} train_acc={} test_loss={} test_acc={}",
            row.epoch,
            format_sig6(row.lr),
            format_sig6(row.train_loss),
            format_sig6(row.train_acc),
            format_sig6(row.test_loss),
            format_sig6(row.test_acc),
        );
    }
    println!("metrics: {}", outcome.metrics_path.display());
    println!("final checkpoint: {}", outcome.final_checkpoint.display());
    println!("best checkpoint: {}", outcome.best_checkpoint.display());
    Ok(())
}

pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub dataset: String,
    pub data_dir: Option<PathBuf>,
    pub n: usize,
    pub classes: usize,
    pub size: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// Evaluates a checkpoint on the requested split and prints
/// `loss=… accuracy=…` with 6 significant digits.
pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let kind = match args.dataset.as_str() {
        "cifar10" => DatasetKind::Cifar10,
        "mnist" => DatasetKind::Mnist,
        "synth" => DatasetKind::Synth,
        other => {
            return Err(CliError::usage(format!(
                "unknown dataset `{other}`; valid datasets: cifar10, mnist, synth"
            )))
        }
    };
    let section = DatasetSection {
        kind,
        path: args.data_dir.clone(),
        classes: args.classes,
        size: args.size,
        train_n: args.n,
        test_n: args.n,
        normalize: false,
        augment: false,
    };
    let cfg_shim = RunConfig {
        seed: args.seed,
        epochs: 1,
        batch_size: args.batch_size,
        out_dir: PathBuf::from("."),
        deterministic_timing: true,
        dataset: section,
        model: crate::run_config::ModelSection::Preset {
            preset: "smoke-euler".into(),
        },
        optimizer: Default::default(),
        schedule: Default::default(),
    };
    cfg_shim.validate().map_err(|e| match e {
        CliError::Runtime(m) => CliError::usage(m),
        other => other,
    })?;

    let model = load_checkpoint(&args.checkpoint)?;
    let records = load_split(&cfg_shim, Split::Test)?;
    let (loss, accuracy) = evaluate(&model, &records, args.batch_size)?;
    println!("loss={} accuracy={}", format_sig6(loss), format_sig6(accuracy));
    Ok(())
}

/// Resolves a preset or config-file model and prints per-stage and total
/// parameter counts.
pub fn cmd_count_params(model_arg: &str, config: Option<&Path>) -> Result<()> {
    let model_cfg: ModelConfig = if let Some(path) = config {
        RunConfig::load(path)?.model_config()?
    } else {
        preset(model_arg).ok_or_else(|| {
            CliError::usage(format!(
                "unknown preset `{model_arg}`; valid presets: {}",
                resnet_stacks::PRESET_NAMES.join(", ")
            ))
        })?
    };
    let model: Model<f32> = Model::build(&model_cfg)?;
    println!(
        "scheme={} depth={}",
        model_cfg.scheme.token(),
        model_cfg.nominal_depth()
    );
    for (group, count) in model.param_counts_by_group() {
        println!("{group} {count}");
    }
    println!("total {}", model.param_count());
    Ok(())
}

const GRAD_CHECK_TARGETS: [&str; 6] = ["conv", "bn", "linear", "euler-block", "tm-block", "all"];

/// Runs finite-difference gradient validation for the chosen target(s);
/// exits non-zero unless every report passes the tolerance.
pub fn cmd_grad_check(target: &str, tolerance: f64) -> Result<()> {
    if !GRAD_CHECK_TARGETS.contains(&target) {
        return Err(CliError::usage(format!(
            "unknown target `{target}`; valid targets: {}",
            GRAD_CHECK_TARGETS.join(", ")
        )));
    }
    let mut failures = Vec::new();
    let targets: Vec<&str> = if target == "all" {
        GRAD_CHECK_TARGETS[..5].to_vec()
    } else {
        vec![target]
    };
    for t in targets {
        let (max_err, worst, tol) = run_grad_check_target(t, tolerance)?;
        let ok = max_err < tol;
        println!(
            "{t}: max_rel_error={} worst={} tolerance={} [{}]",
            format_sig6(max_err),
            if worst.is_empty() { "-" } else { &worst },
            format_sig6(tol),
            if ok { "pass" } else { "FAIL" }
        );
        if !ok {
            failures.push(t.to_string());
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::runtime(format!(
            "gradient check failed for: {}",
            failures.join(", ")
        )))
    }
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-scale..scale)).collect())
}

/// Returns (max relative error, worst parameter path, effective tolerance).
/// Batch-norm in train mode couples every activation to the batch
/// statistics, which amplifies rounding; its tolerance is 10× looser.
fn run_grad_check_target(target: &str, tolerance: f64) -> Result<(f64, String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xcafe);
    match target {
        "conv" => {
            let mut store = ParamStore::new();
            let w = store.register("conv.weight", rand_tensor(&mut rng, &[3, 2, 3, 3], 0.5));
            let x = rand_tensor(&mut rng, &[2, 2, 6, 6], 1.0);
            let report = grad_check(&mut store, 1e-5, 64, |store, tape| {
                let xn = tape.input(x.clone());
                let wn = tape.param(store, w);
                let y = tape.conv2d(xn, wn, 1, 1).expect("shapes fixed");
                let y = tape.relu(y);
                tape.sum(y)
            });
            Ok((report.max_rel_error, report.worst_param, tolerance))
        }
        "bn" => {
            let mut store = ParamStore::new();
            let gamma = store.register("bn.gamma", rand_tensor(&mut rng, &[3], 1.0));
            let beta = store.register("bn.beta", rand_tensor(&mut rng, &[3], 0.5));
            let x = rand_tensor(&mut rng, &[4, 3, 4, 4], 1.0);
            let report = grad_check(&mut store, 1e-5, 64, |store, tape| {
                let xn = tape.input(x.clone());
                let g = tape.param(store, gamma);
                let b = tape.param(store, beta);
                let (y, _) = tape.batch_norm_train(xn, g, b, 1e-5).expect("shapes fixed");
                let y = tape.relu(y);
                tape.sum(y)
            });
            Ok((report.max_rel_error, report.worst_param, tolerance * 10.0))
        }
        "linear" => {
            let mut store = ParamStore::new();
            let w = store.register("head.weight", rand_tensor(&mut rng, &[5, 8], 0.6));
            let b = store.register("head.bias", rand_tensor(&mut rng, &[5], 0.2));
            let x = rand_tensor(&mut rng, &[4, 8], 1.0);
            let labels = vec![0, 2, 4, 1];
            let report = grad_check(&mut store, 1e-5, 64, |store, tape| {
                let xn = tape.input(x.clone());
                let wn = tape.param(store, w);
                let bn = tape.param(store, b);
                let logits = tape.linear(xn, wn, bn).expect("shapes fixed");
                tape.softmax_cross_entropy(logits, &labels).expect("labels valid")
            });
            Ok((report.max_rel_error, report.worst_param, tolerance))
        }
        "euler-block" | "tm-block" => {
            let (scheme, blocks) = if target == "euler-block" {
                (resnet_stacks::SchemeKind::Euler, 2)
            } else {
                (resnet_stacks::SchemeKind::Tm, 4)
            };
            let cfg = ModelConfig {
                scheme,
                in_channels: 2,
                stem_channels: 3,
                stages: vec![resnet_stacks::StageConfig {
                    channels: 3,
                    blocks,
                    stride: 1,
                }],
                classes: 3,
                seed: 5,
                tau: 1.0,
            };
            let mut model: Model<f64> = Model::build(&cfg)?;
            let batch = rand_tensor(&mut rng, &[2, 2, 5, 5], 1.0);
            let labels = vec![0, 2];
            let report = check_model_gradients(&mut model, &batch, &labels, 1e-5, 24)?;
            Ok((report.max_rel_error, report.worst_param, tolerance))
        }
        _ => unreachable!("validated above"),
    }
}

/// Convenience used by tests: evaluated accuracy of a freshly initialized
/// model on a balanced synthetic set.
pub fn fresh_model_accuracy(seed: u64) -> Result<f64> {
    let cfg = preset("smoke-euler").expect("known preset");
    let mut cfg = cfg;
    cfg.seed = seed;
    cfg.classes = 10;
    let model: Model<f32> = Model::build(&cfg)?;
    let records = synth_dataset(seed + 1, 500, 10, 16);
    let (_, accuracy) = evaluate(&model, &records, 64)?;
    Ok(accuracy)
}
