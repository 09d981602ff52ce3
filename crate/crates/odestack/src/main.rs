use clap::{Parser, Subcommand};
use odestack::commands::{
    cmd_bench_ode, cmd_count_params, cmd_eval, cmd_grad_check, cmd_train, BenchOdeArgs,
    EvalArgs,
};
use odestack::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "odestack",
    version,
    about = "ODE integrators, their convergence orders, and the residual-network stackings they induce"
)]
struct Cli {
    /// Seed override (training and evaluation).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run-config TOML file (train, count-params).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure empirical convergence orders over a step-size sweep.
    BenchOde {
        /// Comma-separated methods, or `all`:
        /// euler, improved-euler, rk2, rk3, heun3, rk4, tm.
        #[arg(long, default_value = "all")]
        methods: String,

        /// Reference problem: exp-decay, decay-sin, circle.
        #[arg(long, default_value = "decay-sin")]
        problem: String,

        /// Comma-separated step sizes (at least 4).
        #[arg(long, default_value = "0.1,0.05,0.025,0.0125")]
        taus: String,

        /// Integration horizon from t0.
        #[arg(long, default_value_t = 2.0)]
        horizon: f64,
    },

    /// Train a model per the run-config file.
    Train,

    /// Evaluate a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,

        /// cifar10, mnist, or synth.
        #[arg(long, default_value = "synth")]
        dataset: String,

        /// Directory holding cifar10/mnist files.
        #[arg(long)]
        data_dir: Option<PathBuf>,

        /// Synthetic record count.
        #[arg(long, default_value_t = 400)]
        n: usize,

        /// Synthetic class count.
        #[arg(long, default_value_t = 4)]
        classes: usize,

        /// Synthetic image size.
        #[arg(long, default_value_t = 16)]
        size: usize,

        #[arg(long, default_value_t = 64)]
        batch_size: usize,
    },

    /// Print per-stage and total parameter counts for a preset or config.
    CountParams {
        /// Preset name (ignored when --config is given).
        #[arg(long, default_value = "preactresnet18-cifar")]
        model: String,
    },

    /// Validate reverse-mode gradients against finite differences.
    GradCheck {
        /// conv, bn, linear, euler-block, tm-block, or all.
        #[arg(long, default_value = "all")]
        target: String,

        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BenchOde {
            methods,
            problem,
            taus,
            horizon,
        } => {
            let out = cli
                .out
                .unwrap_or_else(|| PathBuf::from("bench_ode.csv"));
            cmd_bench_ode(&BenchOdeArgs {
                methods,
                problem,
                taus,
                horizon,
                out,
            })
        }
        Command::Train => {
            let config = cli
                .config
                .ok_or_else(|| CliError::usage("train requires --config <file.toml>"))?;
            cmd_train(&config, cli.seed, cli.out)
        }
        Command::Eval {
            checkpoint,
            dataset,
            data_dir,
            n,
            classes,
            size,
            batch_size,
        } => cmd_eval(&EvalArgs {
            checkpoint,
            dataset,
            data_dir,
            n,
            classes,
            size,
            batch_size,
            seed: cli.seed.unwrap_or(42),
        }),
        Command::CountParams { model } => cmd_count_params(&model, cli.config.as_deref()),
        Command::GradCheck { target, tolerance } => cmd_grad_check(&target, tolerance),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
