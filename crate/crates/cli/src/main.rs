//! Command-line front end: synthetic data, training, evaluation, prediction
//! and the gradient suite.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use sa2net::data::{gen_sample, load_dataset, read_image, write_dataset, write_pgm, SynthSpec, MANIFEST_FILE};
use sa2net::gradcheck::{render_table, run_suite};
use sa2net::kv::KvFile;
use sa2net::loss::threshold_mask;
use sa2net::model::{predict_probs, Checkpoint, ModelConfig};
use sa2net::tensor::{DType, Float};
use sa2net::train::{evaluate, train, TrainConfig};
use sa2net::{Error, Result};

const DTYPE_VAR: &str = "SA2NET_DTYPE";

#[derive(Parser)]
#[command(name = "sa2net", version, about = "Scale-aware attention segmentation network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: u64,
    },
    /// Train a model and write its final checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Loss trace file; defaults to `<out>.trace`.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score one checkpoint, or the mean prediction of several, on a dataset.
    Eval {
        #[arg(long, value_delimiter = ',', required = true)]
        ckpt: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Write the foreground probability map of one image as a greymap.
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write a binary mask at this threshold instead of probabilities.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Compare analytic and finite-difference gradients in 64-bit.
    Gradcheck {
        /// Restrict to one module: tensor, blocks, loss or model.
        #[arg(long)]
        module: Option<String>,
        /// Override the per-case tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn requested_dtype() -> Result<Option<DType>> {
    match std::env::var(DTYPE_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.as_str() {
            "f32" => Ok(Some(DType::F32)),
            "f64" => Ok(Some(DType::F64)),
            other => Err(Error::Config(format!("{DTYPE_VAR} must be f32 or f64, got {other:?}"))),
        },
    }
}

fn synth(spec: &Path, out: &Path, count: u64) -> Result<()> {
    let spec = SynthSpec::parse(&fs::read_to_string(spec)?)?;
    let samples = (0..count).map(|i| gen_sample::<f32>(&spec, i)).collect::<Result<Vec<_>>>()?;
    let manifest = write_dataset(out, &samples)?;
    println!("wrote {} samples to {}", manifest.len(), out.join(MANIFEST_FILE).display());
    Ok(())
}

fn train_cmd<T: Float>(config: &Path, data: &Path, out: &Path, trace: Option<PathBuf>) -> Result<()> {
    let kv = KvFile::parse(&fs::read_to_string(config)?)?;
    let dataset = load_dataset::<T>(data)?;
    let model_cfg = ModelConfig::from_kv(&kv)?;
    let train_cfg = TrainConfig::from_kv(&kv, dataset.len())?;
    if let Some(s) = dataset.first() {
        if (s.channels(), s.height(), s.width()) != (model_cfg.in_channels, model_cfg.input_size.0, model_cfg.input_size.1) {
            return Err(Error::Config(format!(
                "data is {}×{}×{}, model expects {}×{}×{}",
                s.channels(),
                s.height(),
                s.width(),
                model_cfg.in_channels,
                model_cfg.input_size.0,
                model_cfg.input_size.1
            )));
        }
    }
    let trace_path = trace.unwrap_or_else(|| out.with_extension("trace"));
    let mut log = BufWriter::new(File::create(&trace_path)?);
    let outcome = train(&model_cfg, &train_cfg, &dataset, |p| {
        writeln!(log, "{}\t{}", p.step, p.loss)?;
        if p.checkpoint_due {
            let path = out.with_extension(format!("step{}", p.step));
            Checkpoint::new(ModelConfig { seed: 0, ..model_cfg.clone() }, p.params.clone(), Some(p.adam.clone()))
                .save(path)?;
        }
        Ok(())
    })?;
    log.flush()?;
    outcome.checkpoint.save(out)?;
    let last = outcome.trace.last().map_or("n/a".to_string(), |l| format!("{l:.6}"));
    println!(
        "trained {} steps, final loss {last}, checkpoint {} ({}), trace {}",
        train_cfg.steps,
        out.display(),
        outcome.checkpoint.fingerprint_id(),
        trace_path.display()
    );
    Ok(())
}

fn eval_cmd<T: Float>(ckpts: &[PathBuf], data: &Path, report: &Path, threshold: f64) -> Result<()> {
    let checkpoints = ckpts.iter().map(Checkpoint::<T>::load).collect::<Result<Vec<_>>>()?;
    if let Some((first, rest)) = checkpoints.split_first() {
        for ck in rest {
            ck.ensure_compatible(&first.config)?;
        }
    }
    let dataset = load_dataset::<T>(data)?;
    let result = evaluate(&checkpoints, &dataset, threshold)?;
    fs::write(report, result.to_lines())?;
    print!("{}", result.to_table());
    Ok(())
}

fn predict_cmd<T: Float>(ckpt: &Path, image: &Path, out: &Path, threshold: Option<f64>) -> Result<()> {
    let ck = Checkpoint::<T>::load(ckpt)?;
    let img = read_image::<T>(image)?;
    let dims: Vec<usize> = std::iter::once(1).chain(img.dims().iter().copied()).collect();
    let probs = predict_probs(&ck.params, &ck.config, &img.reshape(dims)?)?;
    let map = match threshold {
        Some(t) => threshold_mask(&probs, t),
        None => probs,
    };
    write_pgm(&map, out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn gradcheck(module: Option<&str>, tol: Option<f64>) -> Result<bool> {
    if requested_dtype()? == Some(DType::F32) {
        return Err(Error::Config(format!("gradcheck runs in 64-bit only; unset {DTYPE_VAR} or set it to f64")));
    }
    if let Some(t) = tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {t}")));
        }
    }
    let results = run_suite(module, tol)?;
    print!("{}", render_table(&results));
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("{} cases, {failed} failed", results.len());
    Ok(failed == 0)
}

fn dispatch<T: Float>(command: Command) -> Result<ExitCode> {
    match command {
        Command::Synth { spec, out, count } => synth(&spec, &out, count)?,
        Command::Train { config, data, out, trace } => train_cmd::<T>(&config, &data, &out, trace)?,
        Command::Eval { ckpt, data, report, threshold } => eval_cmd::<T>(&ckpt, &data, &report, threshold)?,
        Command::Predict { ckpt, image, out, threshold } => predict_cmd::<T>(&ckpt, &image, &out, threshold)?,
        Command::Gradcheck { module, tol } => {
            if !gradcheck(module.as_deref(), tol)? {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run(command: Command) -> Result<ExitCode> {
    match requested_dtype()? {
        Some(DType::F64) => dispatch::<f64>(command),
        _ => dispatch::<f32>(command),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
