use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sodium_recon::acquisition::EncodingOperator;
use sodium_recon::harness::io::{read_kspace, read_volume, to_f32_precision, write_kspace, write_volume};
use sodium_recon::harness::pipeline::{acquire, build_scene, recompute_reports, run_pipeline, EvalInputs};
use sodium_recon::harness::{pipeline, report, PipelineConfig};
use sodium_recon::recon::{reconstruct, ReconMethod};
use sodium_recon::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "sodium-recon", version, about = "Simulated radial sodium MRI: phantoms, reconstruction and TSC quantification")]
struct Cli {
    /// TOML pipeline configuration; built-in benchmark defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides `master_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the ground-truth, label and prior volumes.
    Phantom,
    /// Simulate noisy k-space at one spoke count.
    Acquire {
        #[arg(long)]
        spokes: usize,
    },
    /// Reconstruct a stored k-space file.
    Recon {
        #[arg(long)]
        kspace: PathBuf,
        #[arg(long)]
        method: ReconMethod,
        /// Output volume; defaults to `recon.snav` in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// SSIM, RMSE, focus measure and Dice of a stored image.
    Metrics {
        #[arg(long)]
        image: PathBuf,
        /// SSIM reference; defaults to the ground truth.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Regional TSC of a stored image.
    Tsc {
        #[arg(long)]
        image: PathBuf,
    },
    /// Recompute reports from the volumes of a previous pipeline run.
    Report,
    /// Run the full experiment.
    Pipeline,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.display().to_string();
    }
    Ok(cfg)
}

fn print_bundle_status(b: &pipeline::ReportBundle) -> ExitCode {
    for f in &b.failures {
        eprintln!("cell {} @ {} spokes failed: {}", f.method, f.spokes, f.error);
    }
    if b.all_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let out = Path::new(&cfg.output_dir);
    match &cli.command {
        Command::Phantom => {
            let scene = build_scene(&cfg)?;
            write_volume(&scene.truth, cfg.master_seed, &out.join("truth.snav"))?;
            write_volume(&scene.labels, cfg.master_seed, &out.join("labels.snav"))?;
            write_volume(&scene.prior.values, cfg.master_seed, &out.join("prior.snav"))?;
            println!("wrote truth, labels and prior to {}", out.display());
        }
        Command::Acquire { spokes } => {
            let scene = build_scene(&cfg)?;
            let (data, _) = acquire(&cfg, &scene, *spokes)?;
            let p = out.join(format!("kspace_{spokes}.snak"));
            write_kspace(&data, &p)?;
            println!("{}", p.display());
        }
        Command::Recon { kspace, method, output } => {
            let scene = build_scene(&cfg)?;
            let data = read_kspace(kspace)?;
            let op = EncodingOperator::new(data.dims, &data.trajectory, &scene.coils, cfg.acquisition.path.eval_path())?;
            let r = reconstruct(&op, &data, &cfg.recon_for(*method), Some(&scene.prior), Some(&scene.background))?;
            let p = output.clone().unwrap_or_else(|| out.join("recon.snav"));
            write_volume(&to_f32_precision(&r.image), cfg.master_seed, &p)?;
            println!("{} ({})", p.display(), r.log.note);
        }
        Command::Metrics { image, reference } => {
            let scene = build_scene(&cfg)?;
            let (img, _) = read_volume(image)?;
            let reference = match reference {
                Some(p) => read_volume(p)?.0,
                None => scene.truth.clone(),
            };
            let inputs = EvalInputs {
                truth: &scene.truth,
                labels: &scene.labels,
                reference: &reference,
            };
            let (row, _) = pipeline::evaluate(&cfg, ReconMethod::Adc, 0, &img, &inputs)?;
            println!("ssim,rmse,focus_measure,dice");
            println!("{},{},{},{}", row.ssim, row.rmse, row.focus, row.dice);
        }
        Command::Tsc { image } => {
            let scene = build_scene(&cfg)?;
            let (img, _) = read_volume(image)?;
            let inputs = EvalInputs {
                truth: &scene.truth,
                labels: &scene.labels,
                reference: &scene.truth,
            };
            let (_, rows) = pipeline::evaluate(&cfg, ReconMethod::Adc, 0, &img, &inputs)?;
            println!("region,mean,sd,n");
            for r in rows {
                println!("{},{},{},{}", r.region, r.mean, r.sd, r.n_voxels);
            }
        }
        Command::Report => {
            let b = recompute_reports(&cfg, out)?;
            print!("{}", report::paired_csv(&b.paired));
            return Ok(print_bundle_status(&b));
        }
        Command::Pipeline => {
            let b = run_pipeline(&cfg, out)?;
            print!("{}", report::metrics_csv(&b.metrics));
            return Ok(print_bundle_status(&b));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => code,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
