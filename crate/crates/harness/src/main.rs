use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use baps_blackbox::{serve, GrowerParams};
use baps_core::dataset::{fingerprint, generate, write_split, DatasetSpec, Split};
use baps_harness::config::{Mode, OracleMode, RawConfig, RunConfig};
use baps_harness::pipeline::split_path;
use baps_harness::{compare, evaluate, train, write_report, EvalReport, HarnessError};
use baps_zoo::{benchmark_by_name, run_optimizer, write_trace_csv, ParamVector, Variant, ZooHyperparams};

#[derive(Parser)]
#[command(
    name = "baps",
    version,
    about = "Blackbox visual-prompt adaptation of a prompted segmenter"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and write one binary file per split.
    GenData(GenDataArgs),
    /// Train a prompt generator and keep the best-validation checkpoint.
    Train(RunArgs),
    /// Evaluate a mode on the test split.
    Eval(EvalArgs),
    /// Tabulate several evaluation reports side by side.
    Compare(CompareArgs),
    /// Run one optimizer on a benchmark function and write its trace.
    BenchOptimizer(BenchArgs),
    /// Serve segmentation requests over stdin/stdout.
    BlackboxServe(ServeArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_val: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    ramp_strength: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Flags mirroring the keys of the run configuration file.
#[derive(Args)]
struct RunArgs {
    /// Flat TOML run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    optimizer: Option<Variant>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k1: Option<u32>,
    #[arg(long)]
    cooldown: Option<u32>,
    #[arg(long)]
    eta1: Option<f64>,
    #[arg(long)]
    eta2: Option<f64>,
    #[arg(long)]
    grad_threshold: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    eval_repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    encoder_seed: Option<u64>,
    /// Directory with train.bin, val.bin and test.bin from `gen-data`.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_val: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    ramp_strength: Option<f64>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// in-process or subprocess
    #[arg(long)]
    oracle: Option<OracleMode>,
    /// Executable serving `blackbox-serve` (defaults to this binary).
    #[arg(long)]
    oracle_command: Option<PathBuf>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    connectivity: Option<u8>,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig, HarnessError> {
        let base = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        let flags = RawConfig {
            mode: self.mode,
            optimizer: self.optimizer,
            c: self.c,
            alpha: self.alpha,
            beta: self.beta,
            k1: self.k1,
            cooldown: self.cooldown,
            eta1: self.eta1,
            eta2: self.eta2,
            grad_threshold: self.grad_threshold,
            batch_size: self.batch_size,
            epochs: self.epochs,
            eval_repeats: self.eval_repeats,
            seed: self.seed,
            encoder_seed: self.encoder_seed,
            data_dir: self.data_dir,
            n_train: self.n_train,
            n_val: self.n_val,
            n_test: self.n_test,
            noise_std: self.noise_std,
            ramp_strength: self.ramp_strength,
            data_seed: self.data_seed,
            out: self.out,
            oracle: self.oracle,
            oracle_command: self.oracle_command,
            tolerance: self.tolerance,
            sigma: self.sigma,
            connectivity: self.connectivity,
            ..RawConfig::default()
        };
        RunConfig::from_raw(base.merge(flags))
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Weights from `train`; defaults to `<out>/checkpoint.bin` for trained modes.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// `report.toml` files written by `eval`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Write `comparison.csv` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// quadratic, rosenbrock or rastrigin
    #[arg(long, default_value = "rastrigin")]
    function: String,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value = "spsa-geass")]
    optimizer: Variant,
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated starting point; defaults to all ones.
    #[arg(long, value_delimiter = ',')]
    start: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k1: Option<u32>,
    #[arg(long)]
    cooldown: Option<u32>,
    #[arg(long)]
    eta1: Option<f64>,
    #[arg(long)]
    eta2: Option<f64>,
    #[arg(long)]
    grad_threshold: Option<f64>,
    /// Trace CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 0.15)]
    tolerance: f32,
    #[arg(long, default_value_t = 1.0)]
    sigma: f32,
    #[arg(long, default_value_t = 4)]
    connectivity: u8,
}

fn gen_data(args: GenDataArgs) -> Result<(), HarnessError> {
    let d = DatasetSpec::default();
    let spec = DatasetSpec {
        n_train: args.n_train.unwrap_or(d.n_train),
        n_val: args.n_val.unwrap_or(d.n_val),
        n_test: args.n_test.unwrap_or(d.n_test),
        height: args.height.unwrap_or(d.height),
        width: args.width.unwrap_or(d.width),
        channels: args.channels.unwrap_or(d.channels),
        noise_std: args.noise_std.unwrap_or(d.noise_std),
        ramp_strength: args.ramp_strength.unwrap_or(d.ramp_strength),
        seed: args.seed.unwrap_or(d.seed),
    };
    let data = generate(&spec)?;
    fs::create_dir_all(&args.out)?;
    for split in Split::ALL {
        let file = fs::File::create(split_path(&args.out, split))?;
        write_split(io::BufWriter::new(file), data.split(split))?;
    }
    let fp = fingerprint(&data);
    fs::write(args.out.join("fingerprint.txt"), format!("{fp}\n"))?;
    println!(
        "wrote {} / {} / {} samples to {} (fingerprint {fp})",
        data.train.len(),
        data.val.len(),
        data.test.len(),
        args.out.display()
    );
    Ok(())
}

fn run_train(args: RunArgs) -> Result<(), HarnessError> {
    let cfg = args.resolve()?;
    let out = train(&cfg)?;
    println!(
        "{} iterations, {} oracle calls, best validation dice {:.4} at epoch {} (zero-shot {:.4}), {:.1}s",
        out.iterations,
        out.oracle_calls,
        out.best_val_dice,
        out.best_epoch,
        out.zeroshot_val_dice,
        out.wall_clock.as_secs_f64()
    );
    println!("checkpoint: {}", out.checkpoint.display());
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<(), HarnessError> {
    let cfg = args.run.resolve()?;
    let checkpoint = match (cfg.mode, args.checkpoint) {
        (Mode::Zeroshot, _) => None,
        (_, Some(p)) => Some(p),
        (_, None) => Some(cfg.out.join(baps_harness::train::CHECKPOINT_FILE)),
    };
    let report = evaluate(&cfg, checkpoint.as_deref())?;
    write_report(&cfg.out, &report)?;
    println!(
        "{}: dice {:.4} ± {:.4}, hd95 {:.3} ± {:.3} over {} repeats ({:.1}s)",
        report.label(),
        report.dice_mean,
        report.dice_std,
        report.hd95_mean,
        report.hd95_std,
        report.repeats.len(),
        report.wall_clock_secs
    );
    Ok(())
}

fn run_compare(args: CompareArgs) -> Result<(), HarnessError> {
    let reports = args
        .reports
        .iter()
        .map(|p| EvalReport::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let cmp = compare(&reports)?;
    print!("{}", cmp.to_table());
    if let Some(dir) = args.out {
        fs::create_dir_all(&dir)?;
        cmp.write_csv(fs::File::create(dir.join("comparison.csv"))?)?;
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<(), HarnessError> {
    let f = benchmark_by_name(&args.function, args.dim).map_err(|e| HarnessError::Config(e.to_string()))?;
    let d = ZooHyperparams::default();
    let hp = ZooHyperparams {
        c: args.c.unwrap_or(d.c),
        alpha: args.alpha.unwrap_or(d.alpha),
        beta: args.beta.unwrap_or(d.beta),
        k1: args.k1.unwrap_or(d.k1),
        cooldown: args.cooldown.unwrap_or(d.cooldown),
        eta1: args.eta1.unwrap_or(d.eta1),
        eta2: args.eta2.unwrap_or(d.eta2),
        grad_threshold: args.grad_threshold.unwrap_or(d.grad_threshold),
    };
    let start = args.start.unwrap_or_else(|| vec![1.0; args.dim]);
    let phi0 = ParamVector::new(start).map_err(|e| HarnessError::Config(e.to_string()))?;
    let outcome = run_optimizer(args.optimizer, &f, phi0, &hp, args.budget, args.seed)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    if let Some(parent) = args.out.parent() {
        fs::create_dir_all(parent)?;
    }
    write_trace_csv(&outcome.trace, fs::File::create(&args.out)?)?;
    let last = outcome.trace.last().map(|r| r.loss).unwrap_or(f64::NAN);
    println!(
        "{} on {} (d={}): final loss {last:.6} after {} iterations",
        args.optimizer,
        f.name(),
        f.dim(),
        outcome.trace.len()
    );
    if let Some(e) = outcome.error {
        return Err(HarnessError::Divergence {
            iteration: outcome.trace.len() as u64,
            reason: e.to_string(),
        });
    }
    Ok(())
}

fn run_serve(args: ServeArgs) -> Result<(), HarnessError> {
    let params = GrowerParams::new(args.tolerance, args.sigma, args.connectivity).map_err(HarnessError::Config)?;
    serve(io::stdin().lock(), io::stdout().lock(), params)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Compare(a) => run_compare(a),
        Command::BenchOptimizer(a) => run_bench(a),
        Command::BlackboxServe(a) => run_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
