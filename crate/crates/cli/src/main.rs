use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use dctfusion::cost::estimate_cost;
use dctfusion::io::{add_gaussian_noise, load_png, psnr, save_png};
use dctfusion::pipeline::{run, weight_maps};
use dctfusion::{ExposureSequence, Image, Mode, PipelineConfig};

#[derive(Parser, Debug)]
#[command(
    name = "dctfusion",
    version,
    about = "Multi-exposure fusion and joint denoising in the DCT domain"
)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fuse registered exposures.
    Fuse(FuseArgs),
    /// Jointly denoise and fuse noisy exposures.
    DenoiseFuse(FuseArgs),
    /// Add white Gaussian noise to an image.
    AddNoise {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Noise standard deviation in 8-bit units.
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// PSNR in dB between two images.
    Psnr { a: PathBuf, b: PathBuf },
    /// Print the operation-count estimate and time a run.
    Bench {
        #[command(flatten)]
        params: Params,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct FuseArgs {
    #[command(flatten)]
    params: Params,
    /// Directory for per-exposure weight maps (grayscale PNGs).
    #[arg(long)]
    dump_weights: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct Params {
    /// Noise standard deviation in 8-bit units.
    #[arg(long)]
    sigma: Option<f64>,
    /// Noise level for the fusion threshold after denoising, 8-bit units.
    #[arg(long)]
    sigma_fusion: Option<f64>,
    #[arg(long, default_value_t = 7.0)]
    p: f64,
    #[arg(long, default_value_t = 2.7)]
    thresh: f64,
    #[arg(long, default_value_t = 8)]
    block: usize,
    #[arg(long, default_value_t = 2)]
    step: usize,
    #[arg(long, default_value_t = 16)]
    knn: usize,
    #[arg(long, default_value_t = 39)]
    search: usize,
    #[arg(long, default_value_t = 0.2)]
    sigma_l: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma_g: f64,
    /// Process blocks sequentially for bit-identical output.
    #[arg(long)]
    deterministic: bool,
}

impl Params {
    fn config(&self, mode: Mode) -> Result<PipelineConfig> {
        let sigma = match (mode, self.sigma) {
            (_, Some(s)) => s,
            (Mode::Joint, None) => bail!("--sigma is required for joint denoising"),
            (Mode::FuseOnly, None) => 0.0,
        };
        let mut cfg = PipelineConfig::default().with_block(self.block);
        cfg.mode = mode;
        cfg.fusion.sigma = sigma / 255.0;
        cfg.fusion.p = self.p;
        cfg.fusion.threshold = self.thresh;
        cfg.fusion.sigma_l = self.sigma_l;
        cfg.fusion.sigma_g = self.sigma_g;
        cfg.matching.k_nn = self.knn;
        cfg.matching.search_window = self.search;
        cfg.step = self.step;
        cfg.sigma_fusion = self.sigma_fusion.map(|s| s / 255.0);
        cfg.deterministic = self.deterministic;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_sequence(paths: &[PathBuf]) -> Result<ExposureSequence> {
    let images = paths
        .iter()
        .map(load_png)
        .collect::<dctfusion::Result<Vec<Image>>>()?;
    Ok(ExposureSequence::new(images)?)
}

fn dump_weights(seq: &ExposureSequence, cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (i, maps) in weight_maps(seq, cfg)?.iter().enumerate() {
        for (c, name) in ["dc", "ac"].iter().enumerate() {
            let plane = Image::from_planar(maps.width(), maps.height(), 1, maps.plane(c).to_vec())?;
            save_png(&plane, dir.join(format!("weights_{i}_{name}.png")))?;
        }
    }
    Ok(())
}

fn fuse(args: &FuseArgs, mode: Mode) -> Result<()> {
    let cfg = args.params.config(mode)?;
    let seq = load_sequence(&args.inputs)?;
    let out = run(&seq, &cfg)?;
    save_png(&out, &args.output)?;
    if let Some(dir) = &args.dump_weights {
        dump_weights(&seq, &cfg, dir)?;
    }
    Ok(())
}

fn bench(params: &Params, inputs: &[PathBuf]) -> Result<()> {
    let mode = if params.sigma.is_some() {
        Mode::Joint
    } else {
        Mode::FuseOnly
    };
    let cfg = params.config(mode)?;
    let seq = load_sequence(inputs)?;
    let report = estimate_cost(&cfg, (seq.width(), seq.height()), seq.len())?;
    println!("{report}");
    let start = Instant::now();
    run(&seq, &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let mp = (seq.width() * seq.height()) as f64 / 1e6;
    println!(
        "mode {:?}, {} exposures, {}x{}",
        mode,
        seq.len(),
        seq.width(),
        seq.height()
    );
    println!("wall clock {secs:.3} s, {:.3} s/megapixel", secs / mp);
    Ok(())
}

fn configure_threads(n: usize) -> Result<()> {
    #[cfg(feature = "parallel")]
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    match &cli.command {
        Command::Fuse(args) => fuse(args, Mode::FuseOnly),
        Command::DenoiseFuse(args) => fuse(args, Mode::Joint),
        Command::AddNoise {
            input,
            output,
            sigma,
            seed,
        } => {
            let img = load_png(input)?;
            save_png(&add_gaussian_noise(&img, *sigma, *seed)?, output)?;
            Ok(())
        }
        Command::Psnr { a, b } => {
            let v = psnr(&load_png(a)?, &load_png(b)?)?;
            if v.is_infinite() {
                println!("inf");
            } else {
                println!("{v:.4}");
            }
            Ok(())
        }
        Command::Bench { params, inputs } => bench(params, inputs),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::DenoiseFuse(args) = &cli.command {
        if args.params.sigma.is_none() {
            Cli::command()
                .error(
                    ErrorKind::MissingRequiredArgument,
                    "denoise-fuse requires --sigma",
                )
                .exit();
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
