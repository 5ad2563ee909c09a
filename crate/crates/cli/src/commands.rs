use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use racil_core::demos::{generate_demos, load_demos};
use racil_core::train::{
    episode_seeds, evaluate, train, ActorPolicy, Checkpoint, Profile, TrainConfig,
};

use crate::protocol::Mode;
use crate::server::{serve, ServeOptions};
use crate::session::{read_trajectory, record_episode, write_trajectory};

#[derive(Debug, Parser)]
#[command(name = "racil", version, about = "Train and evaluate UAV navigation policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy; writes config.cfg, metrics.csv and checkpoint.json.
    Train(TrainArgs),
    /// Evaluate a checkpoint over fixed episode seeds.
    Eval(EvalArgs),
    /// Record scripted-expert demonstrations.
    GenDemos(GenDemosArgs),
    /// Run the WebSocket session server.
    Serve(ServeArgs),
    /// Check a recorded trajectory and print a summary.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProfileArg {
    Desk,
    Fidelity,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Defaults used when no config file is given.
    #[arg(long, value_enum, default_value = "desk")]
    pub profile: ProfileArg,
    /// Override one key, e.g. `--set use_gail=false`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn load(&self) -> anyhow::Result<TrainConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                TrainConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => TrainConfig::profile(match self.profile {
                ProfileArg::Desk => Profile::Desk,
                ProfileArg::Fidelity => Profile::Fidelity,
            }),
        };
        for o in &self.overrides {
            let Some((k, v)) = o.split_once('=') else {
                bail!("override `{o}` is not KEY=VALUE");
            };
            config.set(k.trim(), v.trim()).map_err(|e| anyhow::anyhow!("override `{o}`: {e}"))?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Demonstration file; required when BC or GAIL is on.
    #[arg(long)]
    pub demos: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub episodes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Config to check the checkpoint against; its own config otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the first evaluation episode as a trajectory.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDemosArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Pilot,
    Replay,
    Watch,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Policy for watch mode; the scripted expert flies without one.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Trajectory for replay mode.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long, default_value = "demos/human.racildemo")]
    pub demos_out: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    /// Frame rate of watch and replay playback.
    #[arg(long, default_value_t = 20.0)]
    pub hz: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub trajectory: PathBuf,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::GenDemos(a) => cmd_gen_demos(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn cmd_train(a: TrainArgs) -> anyhow::Result<()> {
    let mut config = a.config.load()?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let demos = match (&a.demos, config.needs_demos()) {
        (Some(path), true) => Some(load_demos(path, &config.observation(), &config.env)?),
        (None, true) => bail!("this config uses BC or GAIL; pass --demos (see `racil gen-demos`)"),
        (_, false) => None,
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    std::fs::write(a.out.join("config.cfg"), config.to_text())?;
    let outcome = train(&config, demos, Some(&a.out))?;
    if let Some(last) = outcome.metrics.last() {
        println!(
            "step {} mean_reward {:.3} success_rate {:.3} mean_length {:.1}",
            last.step, last.mean_reward, last.success_rate, last.mean_episode_length
        );
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let config = match &a.config {
        Some(path) => Some(TrainConfig::parse(&std::fs::read_to_string(path)?)?),
        None => None,
    };
    let report = evaluate(&ck, config.as_ref(), a.episodes, a.seed)?;
    print!("{}\n{}", report.to_table(), report.to_rows());
    if let Some(path) = &a.trajectory {
        let config = match config {
            Some(c) => c,
            None => ck.train_config()?,
        };
        let mut policy = ActorPolicy::from_checkpoint(&ck, config.observation());
        let frames = record_episode(&mut policy, &config.env, &config.sensor, episode_seeds(a.seed, 1)[0])?;
        write_trajectory(path, &frames)?;
    }
    Ok(())
}

fn cmd_gen_demos(a: GenDemosArgs) -> anyhow::Result<()> {
    let config = a.config.load()?;
    let seed = a.seed.unwrap_or(config.seed);
    let file = generate_demos(&config.env, &config.sensor, &config.observation(), a.episodes, seed)?;
    file.save(&a.out)?;
    println!("{} episodes, {} pairs -> {}", file.header.episodes, file.records.len(), a.out.display());
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> anyhow::Result<()> {
    let config = a.config.load()?;
    let mode = match a.mode {
        ModeArg::Pilot => Mode::Pilot,
        ModeArg::Replay => Mode::Replay,
        ModeArg::Watch => Mode::Watch,
    };
    let checkpoint = match &a.checkpoint {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            ck.check_compatible(&config)?;
            Some(ck)
        }
        None => None,
    };
    let frames = match (&a.trajectory, mode) {
        (Some(path), _) => read_trajectory(path)?,
        (None, Mode::Replay) => bail!("replay mode needs --trajectory"),
        (None, _) => Vec::new(),
    };
    let opts = ServeOptions {
        mode,
        seed: a.seed.unwrap_or(config.seed),
        config,
        checkpoint,
        frames,
        demos_out: a.demos_out,
        hz: a.hz,
    };
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().context("bad --host/--port")?;
    tokio::runtime::Runtime::new()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        serve(listener, opts).await
    })
}

/// One line per fact about a trajectory file.
pub fn trajectory_summary(path: &Path) -> anyhow::Result<String> {
    let frames = read_trajectory(path)?;
    let last = frames.last().expect("read_trajectory rejects empty files");
    let total: Vec<String> = (0..last.uavs.len())
        .map(|i| format!("{:.3}", frames.iter().map(|f| f.last_reward.get(i).copied().unwrap_or(0.0)).sum::<f64>()))
        .collect();
    Ok(format!(
        "frames {}\nuavs {}\nobstacles {}\nfinal_tick {}\nfinished {}\nreturns {}\n",
        frames.len(),
        last.uavs.len(),
        last.obstacles.len(),
        last.tick,
        last.done,
        total.join(",")
    ))
}

fn cmd_replay(a: ReplayArgs) -> anyhow::Result<()> {
    print!("{}", trajectory_summary(&a.trajectory)?);
    Ok(())
}
