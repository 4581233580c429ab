use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mixseg3d_core::commands::{self, AblationOptions, MixJob, ScanPair};
use mixseg3d_core::config::RunConfig;
use mixseg3d_core::io::{ClassMap, Manifest};
use mixseg3d_core::model::{VoxelMajorityModel, DEFAULT_SEARCH_RADIUS};
use mixseg3d_core::pipeline::Strategy;
use mixseg3d_core::scene::SceneSpec;
use mixseg3d_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mixseg3d",
    version,
    about = "LiDAR scene mixing, test-time augmentation and mIoU evaluation"
)]
struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Class map file (`index<TAB>name` per line); overrides the config.
    #[arg(long, global = true)]
    classmap: Option<PathBuf>,
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Lasermix,
    Polarmix,
    Both,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Lasermix => Strategy::Lasermix,
            StrategyArg::Polarmix => Strategy::Polarmix,
            StrategyArg::Both => Strategy::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic street scene (OUT.bin, OUT.label).
    Genscene {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        points: usize,
    },
    /// Mix scans. Inputs are path prefixes (PREFIX.bin + PREFIX.label):
    /// primary, partner, and optionally a separate PolarMix partner.
    Mix {
        #[arg(num_args = 2..=3, required_unless_present = "manifest")]
        inputs: Vec<PathBuf>,
        /// Mix every manifest entry with random partners instead.
        #[arg(long, conflicts_with = "inputs")]
        manifest: Option<PathBuf>,
        /// Output prefix, or output directory with --manifest.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        strategy: StrategyArg,
    },
    /// Re-apply a recorded plan (OUT.plan.json from `mix`).
    Replay {
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the voxel-majority model on a manifest of labeled scans.
    Fit {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        voxel_size: f64,
        #[arg(long, default_value_t = DEFAULT_SEARCH_RADIUS)]
        search_radius: u32,
    },
    /// Predict a scan (OUT.label, OUT.scores).
    Predict {
        scan: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict with test-time augmentation (OUT.label, OUT.scores).
    Tta {
        scan: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// View count; defaults to the config value.
        #[arg(long)]
        views: Option<usize>,
        /// Seeded random views instead of the canonical grid.
        #[arg(long)]
        random: bool,
    },
    /// Score predicted label files against ground truth, paired by name.
    Eval {
        gt_dir: PathBuf,
        pred_dir: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time LaserMix and PolarMix on synthetic scans.
    Bench {
        #[arg(long, default_value_t = 150_000)]
        points: usize,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
    },
    /// Run the augmentation x TTA grid with the stand-in model.
    Ablate {
        #[arg(long, default_value_t = 4)]
        train: usize,
        #[arg(long, default_value_t = 2)]
        val: usize,
        #[arg(long, default_value_t = 20_000)]
        points: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        voxel_sizes: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,8")]
        views: Vec<usize>,
    },
}

fn classmap(cli: &Cli, config: &RunConfig) -> Result<ClassMap> {
    match cli.classmap.as_ref().or(config.classmap.as_ref()) {
        Some(p) => ClassMap::load(p),
        None => Ok(ClassMap::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("--jobs: {e}")))?;
    }
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cm = classmap(&cli, &config)?;
    match &cli.command {
        Command::Genscene { out, points } => {
            let spec = SceneSpec {
                seed: cli.seed,
                num_points: *points,
                ..Default::default()
            };
            commands::genscene(&spec, out)?;
        }
        Command::Mix {
            inputs,
            manifest: Some(m),
            out,
            strategy,
        } if inputs.is_empty() => {
            let manifest = Manifest::load(m)?;
            let mixed =
                commands::mix_manifest(&manifest, out, (*strategy).into(), cli.seed, &config, &cm)?;
            eprintln!("mixed {} scans into {}", mixed.entries.len(), out.display());
        }
        Command::Mix {
            inputs,
            out,
            strategy,
            ..
        } => {
            let pairs: Vec<ScanPair> = inputs.iter().map(|p| ScanPair::from_prefix(p)).collect();
            let polar = pairs.get(2).unwrap_or(&pairs[1]);
            let record = commands::mix(
                &MixJob {
                    primary: &pairs[0],
                    lasermix_partner: &pairs[1],
                    polarmix_partner: polar,
                    strategy: (*strategy).into(),
                    seed: cli.seed,
                    out,
                },
                &config,
                &cm,
            )?;
            eprintln!(
                "lasermix: {}, polarmix: {}",
                record.lasermix_triggered, record.polarmix_triggered
            );
        }
        Command::Replay { plan, out } => {
            commands::replay(plan, out, &cm)?;
        }
        Command::Fit {
            manifest,
            out,
            voxel_size,
            search_radius,
        } => {
            let manifest = Manifest::load(manifest)?;
            let model = commands::fit(&manifest, *voxel_size, *search_radius, &cm)?;
            model.save(out)?;
            eprintln!("fitted {} voxels", model.num_voxels());
        }
        Command::Predict { scan, model, out } => {
            let model = load_model(model, &cm)?;
            commands::predict(&model, scan, out)?;
        }
        Command::Tta {
            scan,
            model,
            out,
            views,
            random,
        } => {
            let model = load_model(model, &cm)?;
            let k = views.unwrap_or(config.tta.views);
            let views = commands::tta_views(k, cli.seed, *random || config.tta.random, &config)?;
            let outcome = commands::tta(&model, scan, &views, out)?;
            eprintln!("predictor calls: {}", outcome.predictor_calls);
        }
        Command::Eval {
            gt_dir,
            pred_dir,
            format,
            out,
        } => {
            let report = commands::eval(gt_dir, pred_dir, &cm)?;
            if let Some(path) = out {
                std::fs::write(path, report.to_json()).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
            }
            match format {
                Format::Json => print!("{}", report.to_json()),
                Format::Table => print!("{}", report.to_table()),
            }
        }
        Command::Bench { points, repeats } => {
            print!("{}", commands::bench(*points, *repeats, cli.seed, &config)?);
        }
        Command::Ablate {
            train,
            val,
            points,
            voxel_sizes,
            views,
        } => {
            let opts = AblationOptions {
                train_scenes: *train,
                val_scenes: *val,
                points: *points,
                voxel_sizes: voxel_sizes.clone(),
                views: views.clone(),
                seed: cli.seed,
            };
            println!("voxel  augmentation  views   mIoU  reference");
            for r in commands::ablate(&opts, &config)? {
                let reference = r
                    .reference_miou
                    .map_or("-".to_string(), |m| format!("{m:.2}"));
                println!(
                    "{:>5.2}  {:<12}  {:>5}  {:>5.2}  {:>9}",
                    r.voxel_size, r.augmentation, r.tta_views, r.miou, reference
                );
            }
        }
    }
    Ok(())
}

fn load_model(path: &Path, cm: &ClassMap) -> Result<VoxelMajorityModel> {
    let model = VoxelMajorityModel::load(path)?;
    if mixseg3d_core::Predictor::num_classes(&model) != cm.num_classes() {
        return Err(Error::Validation(format!(
            "model has {} classes but the class map has {}",
            mixseg3d_core::Predictor::num_classes(&model),
            cm.num_classes()
        )));
    }
    Ok(model)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
