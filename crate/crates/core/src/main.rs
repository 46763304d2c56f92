use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thermacal::bench::{self, BenchOptions, BenchReport};
use thermacal::pipeline::{self, Dataset, PipelineConfig, Protocol, TargetMode};
use thermacal::{gp, Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "thermacal",
    version,
    about = "Spatio-thermal depth correction with Gaussian Process regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON pipeline configuration; missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset directory
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Model file
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Simulator seed for generate
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Queries per prediction batch
    #[arg(long, global = true)]
    chunk: Option<usize>,
    /// gt_minus_obs or rgb_delta.
    #[arg(long, global = true)]
    target_mode: Option<TargetMode>,
    /// Train on every capture and score in-sample.
    #[arg(long, global = true)]
    paper_protocol: bool,
    /// Write the JSON report here.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a capture dataset.
    Generate,
    /// Fit a correction model.
    Train,
    /// Correct one capture.
    Correct {
        /// Plane distance in meters
        #[arg(long)]
        position: f64,
        /// Sensor temperature in degrees Celsius
        #[arg(long)]
        temp: f64,
    },
    /// Score the model against the reference maps.
    Evaluate,
    /// Measure kernel or correction throughput.
    Bench {
        #[arg(long, value_enum, default_value_t = BenchMode::Kernel)]
        mode: BenchMode,
        /// Training points (kernel mode).
        #[arg(long, default_value_t = 5000)]
        n: usize,
        /// Query points (kernel mode).
        #[arg(long, default_value_t = 307_200)]
        m: usize,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        /// Capture to correct (pipeline mode); defaults to the warmest
        /// capture at the farthest position.
        #[arg(long)]
        position: Option<f64>,
        #[arg(long)]
        temp: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BenchMode {
    Kernel,
    Pipeline,
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("THERMACAL_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| {
                Error::Contract(format!(
                    "THERMACAL_THREADS must be a positive integer, got {v:?}"
                ))
            }),
        Err(_) => Ok(None),
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(d) = &cli.dataset {
        cfg.dataset_dir = d.clone();
    }
    if let Some(m) = &cli.model {
        cfg.model_path = m.clone();
    }
    if let Some(s) = cli.seed {
        cfg.rig.rng_seed = s;
    }
    if let Some(c) = cli.chunk {
        cfg.chunk = c;
    }
    if let Some(t) = cli.target_mode {
        cfg.target_mode = t;
    }
    if cli.paper_protocol {
        cfg.protocol = Protocol::Paper;
    }
    if let Some(j) = &cli.json {
        cfg.report_path = j.clone();
    }
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, s).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let threads = threads_from_env()?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Contract(format!("cannot size the thread pool: {e}")))?;
    }
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Generate => {
            let m = pipeline::cmd_generate(&cfg)?;
            println!(
                "wrote {} captures ({} temperatures x {} positions) to {}",
                m.entries.len(),
                m.temperatures().len(),
                m.positions().len(),
                cfg.dataset_dir.display()
            );
        }
        Command::Train => {
            let s = pipeline::cmd_train(&cfg)?;
            println!("N = {}", s.n_train);
            println!(
                "NLML {:.4} -> {:.4} ({} iterations on {} points)",
                s.initial_nlml, s.final_nlml, s.iterations, s.opt_points
            );
            let h = &s.hyper;
            println!(
                "w = {:?}, sigma_s = {:e}, sigma_y = {:e}, mean = {:e}",
                h.w, h.sigma_s, h.sigma_y, s.mean_const
            );
            println!("model written to {}", cfg.model_path.display());
            if let Some(w) = &s.warning {
                eprintln!("warning: {w}");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Correct { position, temp } => {
            let out = pipeline::cmd_correct(&cfg, *position, *temp)?;
            println!(
                "{} pixels corrected, mean offset {:.3} mm",
                out.pixels,
                1e3 * out.mean_offset
            );
            println!("{}\n{}", out.corrected.display(), out.confidence.display());
        }
        Command::Evaluate => {
            let report = pipeline::cmd_evaluate(&cfg)?;
            print!("{}", report.to_text());
        }
        Command::Bench {
            mode,
            n,
            m,
            trials,
            position,
            temp,
        } => {
            let opts = BenchOptions {
                trials: *trials,
                threads: threads.unwrap_or(1),
                ..BenchOptions::default()
            };
            let reports: Vec<BenchReport> = match mode {
                BenchMode::Kernel => {
                    let (a, b) = bench::bench_kernel(*n, *m, &bench::typical_hyper(), &opts)?;
                    vec![a, b]
                }
                BenchMode::Pipeline => {
                    let ds = Dataset::open(&cfg.dataset_dir, cfg.t_min)?;
                    let model = gp::read_model(&cfg.model_path)?;
                    let p =
                        position.unwrap_or_else(|| *ds.manifest.positions().last().unwrap_or(&0.0));
                    let t =
                        temp.unwrap_or_else(|| *ds.manifest.temperatures().last().unwrap_or(&0.0));
                    let entry = ds.manifest.find(p, t)?;
                    let frame = ds.source(entry, cfg.target_mode)?;
                    let full = frame.data().len();
                    let mut chunks = vec![full];
                    chunks.extend([65_536, 16_384, 4_096].into_iter().filter(|c| *c < full));
                    bench::bench_pipeline(
                        &frame,
                        entry.temperature,
                        ds.camera(),
                        &model,
                        &chunks,
                        true,
                        &opts,
                    )?
                }
            };
            print!("{}", bench::format_reports(&reports));
            if let Some(path) = &cli.json {
                write_json(path, &reports)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
