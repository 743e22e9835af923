use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smokepatch::config::Config;
use smokepatch::datagen::{load_dataset, save_dataset};
use smokepatch::net::NetPair;
use smokepatch::pipeline;
use smokepatch::repository::{load_repository, save_repository};
use smokepatch::synthesis::save_frames;
use smokepatch::{Error, Result};

#[derive(Parser)]
#[command(name = "smokepatch", version, about = "Patch-based smoke synthesis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Paired coarse/fine runs recorded as a training dataset.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Trains the density and motion descriptor networks.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Records a patch repository from high-resolution runs.
    BuildRepo {
        #[command(flatten)]
        common: Common,
        /// Trained weights; not needed for the simple-l2 method.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Tracks and matches patches on a coarse run, writing a frame store.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Renders every stored frame at the configured upscale factor.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        frames: PathBuf,
    },
    /// Recall curves on the held-out patches of a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Weight directories; may be repeated.
        #[arg(long)]
        weights: Vec<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::GenData { common }
            | Command::Train { common, .. }
            | Command::BuildRepo { common, .. }
            | Command::Synth { common, .. }
            | Command::Render { common, .. }
            | Command::Eval { common, .. } => common,
        }
    }
}

fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn out_path(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn load_nets(dir: Option<&Path>) -> Result<Option<NetPair>> {
    dir.map(|d| {
        if d.is_dir() {
            NetPair::load(d)
        } else {
            Err(Error::NotFound(d.to_path_buf()))
        }
    })
    .transpose()
}

fn run(cli: Cli) -> Result<()> {
    let common = cli.command.common().clone();
    let cfg = load_config(&common)?;
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    match cli.command {
        Command::GenData { .. } => {
            let data = pipeline::gen_data(&cfg)?;
            let out = out_path(&common, "dataset.spdat");
            save_dataset(&out, &data)?;
            let patches = data.pairs.iter().map(|p| p.patch).collect::<std::collections::BTreeSet<_>>().len();
            println!("positive pairs: {}", data.pairs.len());
            println!("patches: {patches}");
            println!("wrote {}", out.display());
        }
        Command::Train { data, .. } => {
            let data = load_dataset(&data)?;
            let (train, _) = pipeline::split(&cfg, &data);
            println!("training on {} positive pairs", train.pairs.len());
            let trained = pipeline::train_nets(&cfg, &train)?;
            let out = out_path(&common, "weights");
            trained.save(&out)?;
            for (name, r) in ["density", "motion"].iter().zip(&trained.reports) {
                println!("{name} final epoch loss: {:.6}", r.epoch_loss.last().copied().unwrap_or(f64::NAN));
            }
            println!("wrote {}", out.display());
        }
        Command::BuildRepo { weights, .. } => {
            let nets = load_nets(weights.as_deref())?;
            let repo = pipeline::build_repo(&cfg, nets.as_ref())?;
            let out = out_path(&common, "repository.sprep");
            save_repository(&out, &repo)?;
            println!("entries: {}, frames: {}", repo.entries.len(), repo.frame_count());
            println!("wrote {}", out.display());
        }
        Command::Synth { repo, weights, .. } => {
            let repo = load_repository(&repo)?;
            let nets = load_nets(weights.as_deref())?;
            let synth = pipeline::synthesize(&cfg, &repo, nets.as_ref())?;
            let out = out_path(&common, "frames");
            let files = save_frames(&out, &synth)?;
            println!("frames: {}, assignments: {}", files.len(), synth.stats.assignment_distances.len());
            println!("wrote {}", out.display());
        }
        Command::Render { repo, frames, .. } => {
            let repo = load_repository(&repo)?;
            let out = out_path(&common, "render");
            let files = pipeline::render_dir(&cfg, &repo, &frames, &out)?;
            println!("volumes: {}", files.len());
            println!("wrote {}", out.display());
        }
        Command::Eval { data, weights, .. } => {
            let data = load_dataset(&data)?;
            let (_, held) = pipeline::split(&cfg, &data);
            let mut sets = Vec::new();
            for w in &weights {
                let label = w.file_name().map_or_else(|| w.display().to_string(), |n| n.to_string_lossy().into_owned());
                sets.push((label, load_nets(Some(w))?.expect("weights given")));
            }
            let table = pipeline::evaluate(&cfg, &held, &sets)?;
            let out = out_path(&common, "eval");
            let (csv, svg) = pipeline::write_eval(&out, &table)?;
            let [lo, hi] = cfg.eval.summary_ranks;
            println!("held-out pairs: {}", held.pairs.len());
            for (name, r) in pipeline::summarize(&cfg, &table) {
                println!("{name}: mean recall@{lo}-{hi} {r:.4}");
            }
            println!("wrote {} and {}", csv.display(), svg.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SMOKEPATCH_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
