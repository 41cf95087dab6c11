use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crlnav::diffusion::{
    read_trajectories, synthetic_trajectories, write_trajectories, DenoiserShape, DiffusionConfig, DiffusionModel,
};
use crlnav::env::{load_scenario, scenario_fuel_model, Scenario};
use crlnav::eval::{evaluate_checkpoint, export_geojson, save_metrics, summarize, EvalSettings, MeanStd};
use crlnav::fuel::{
    encode_features, fit_ensemble, predict_fcr, read_records, regression_metrics, save_model, synthetic, BoostParams,
    OperationalRecord,
};
use crlnav::nn::Checkpoint;
use crlnav::ppo::{TrainConfig, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Curriculum-trained PPO navigation for a single vessel.
#[derive(Parser)]
#[command(name = "crlnav", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scenario TOML; the built-in toy scenario when absent.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Policy checkpoint, or generator model for `gen-traffic`.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Train with the goal radius fixed at its final value.
    #[arg(long, global = true)]
    no_curriculum: bool,
    /// Act with the squashed policy mean instead of sampling.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Training episodes, evaluation episodes or generated samples.
    #[arg(long, global = true)]
    episodes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write checkpoint.json, reward_curve.csv and report.json into --out.
    Train,
    /// Evaluate a checkpoint at the final goal radius.
    Eval {
        /// Also write the first episode's track as GeoJSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Fit a trajectory generator and sample traffic tracks from it.
    GenTraffic {
        /// Training tracks with columns trajectory_id,index,lat,lon,sog.
        #[arg(long, conflicts_with = "synthetic")]
        data: Option<PathBuf>,
        /// Train on this many synthetic straight legs inside the scenario region.
        #[arg(long)]
        synthetic: Option<usize>,
        /// Hours between track points when reading --data.
        #[arg(long, default_value_t = 0.5)]
        timestep: f64,
    },
    /// Fit the fuel-rate ensemble and report hold-out accuracy.
    FitFuel {
        /// Operational records with an fcr_target column.
        #[arg(long, conflicts_with = "synthetic")]
        data: Option<PathBuf>,
        /// Use this many synthetic records instead of --data.
        #[arg(long)]
        synthetic: Option<usize>,
    },
    /// Write a deterministic episode of a checkpoint as GeoJSON.
    Export,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct GeneratorFile {
    shape: DenoiserShape,
    diffusion: DiffusionConfig,
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn scenario(g: &Global) -> Result<Scenario> {
    let s = match &g.scenario {
        Some(p) => load_scenario(p)?,
        None => Scenario::toy(),
    };
    s.validate()?;
    Ok(s)
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    match p {
        Some(p) => Ok(p),
        None => bail!("{flag} is required for this command"),
    }
}

fn load_checkpoint(g: &Global, scenario: &Scenario) -> Result<Checkpoint> {
    let path = required(&g.checkpoint, "--checkpoint")?;
    let ckpt = Checkpoint::load(path, None)?;
    if ckpt.architecture().raster_size != scenario.raster_cells {
        bail!(
            "checkpoint expects {}-cell rasters but the scenario uses {}",
            ckpt.architecture().raster_size,
            scenario.raster_cells
        );
    }
    Ok(ckpt)
}

fn train(g: &Global) -> Result<()> {
    let mut config = match &g.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = g.seed {
        config.seed = s;
    }
    if let Some(n) = g.episodes {
        config.ppo.total_episodes = n;
    }
    if g.no_curriculum {
        config.ppo.curriculum = false;
    }
    config.validate()?;
    let scenario = scenario(g)?;
    let fuel = scenario_fuel_model(&scenario)?;
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("run"));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let start = Instant::now();
    let mut trainer = Trainer::new(&scenario, &config, fuel)?;
    let mut updates = 0usize;
    while let Some(stats) = trainer.advance()? {
        updates += 1;
        let (policy_loss, value_loss) = (stats.policy_loss, stats.value_loss);
        if updates % 10 == 0 {
            let eps = trainer.episodes();
            let tail = &eps[eps.len().saturating_sub(config.moving_average_window)..];
            let mean = tail.iter().map(|e| e.reward).sum::<f64>() / tail.len().max(1) as f64;
            eprintln!(
                "update {updates:4}  episodes {:5}  mean reward {mean:8.2}  policy {policy_loss:8.4}  value {value_loss:10.3}",
                eps.len()
            );
        }
    }
    let (report, ckpt) = trainer.finish();
    let ckpt_path = g.checkpoint.clone().unwrap_or_else(|| out.join("checkpoint.json"));
    ckpt.save(&ckpt_path)?;
    report.save_reward_curve(&out.join("reward_curve.csv"))?;
    std::fs::write(out.join("report.json"), report.to_json())?;
    std::fs::write(out.join("config.toml"), config.to_toml())?;
    let reached = report.episodes.iter().filter(|e| e.reason == crlnav::env::DoneReason::Reached).count();
    println!(
        "trained {} episodes in {:.1}s; reached goal in {reached}; checkpoint {}",
        report.episodes.len(),
        start.elapsed().as_secs_f64(),
        ckpt_path.display()
    );
    Ok(())
}

fn eval_settings(g: &Global) -> Result<EvalSettings> {
    let mut s = EvalSettings {
        deterministic: g.deterministic,
        ..EvalSettings::default()
    };
    if let Some(p) = &g.config {
        let c = TrainConfig::load(p)?;
        s.reward = c.reward;
        s.omega = c.curriculum.omega_f;
    }
    if let Some(n) = g.episodes {
        s.episodes = n;
    }
    if let Some(seed) = g.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn fmt(m: MeanStd) -> String {
    format!("{:.4} ± {:.4}", m.mean, m.std)
}

fn eval(g: &Global, trace: Option<&Path>) -> Result<()> {
    let scenario = scenario(g)?;
    let ckpt = load_checkpoint(g, &scenario)?;
    let settings = eval_settings(g)?;
    let results = evaluate_checkpoint(&ckpt, &scenario, scenario_fuel_model(&scenario)?, &settings)?;
    let metrics: Vec<_> = results.iter().map(|r| r.metrics).collect();
    let s = summarize(&metrics);
    println!("episodes   {}", s.episodes);
    println!("AR         {}", fmt(s.ar));
    println!("AFC (mt)   {}", fmt(s.afc));
    println!("ASS        {}", fmt(s.ass));
    println!("steps      {}", fmt(s.steps));
    println!("reach rate {:.3}", s.reach_rate);
    if let Some(out) = &g.out {
        save_metrics(&metrics, out)?;
    }
    if let Some(path) = trace {
        let first = results.first().context("no episodes were run")?;
        export_geojson(&first.trace, path)?;
    }
    Ok(())
}

fn export(g: &Global) -> Result<()> {
    let scenario = scenario(g)?;
    let ckpt = load_checkpoint(g, &scenario)?;
    let out = required(&g.out, "--out")?;
    let settings = EvalSettings {
        episodes: 1,
        deterministic: true,
        ..eval_settings(g)?
    };
    let results = evaluate_checkpoint(&ckpt, &scenario, scenario_fuel_model(&scenario)?, &settings)?;
    let r = &results[0];
    export_geojson(&r.trace, out)?;
    println!(
        "{} steps, reason {:?}, final distance {:.3} nm -> {}",
        r.metrics.steps,
        r.reason,
        r.trace.last().map_or(f64::NAN, |t| t.distance_to_goal),
        out.display()
    );
    Ok(())
}

fn gen_traffic(g: &Global, data: Option<&Path>, synthetic: Option<usize>, timestep: f64) -> Result<()> {
    let file: GeneratorFile = match &g.config {
        Some(p) => read_toml(p)?,
        None => GeneratorFile::default(),
    };
    let mut cfg = file.diffusion;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    let model = if data.is_none() && synthetic.is_none() {
        let path = required(&g.checkpoint, "--checkpoint (or --data / --synthetic)")?;
        DiffusionModel::load(path)?
    } else {
        let tracks = match data {
            Some(p) => read_trajectories(p, timestep)?,
            None => {
                let region = scenario(g)?.region;
                synthetic_trajectories(synthetic.unwrap_or(0), file.shape.points, timestep, &region, cfg.seed)?
            }
        };
        let (model, losses) = DiffusionModel::fit(&tracks, file.shape, &cfg)?;
        let tail = &losses[losses.len().saturating_sub(50)..];
        eprintln!(
            "trained on {} tracks, {} steps, final loss {:.4}",
            tracks.len(),
            losses.len(),
            tail.iter().sum::<f64>() / tail.len().max(1) as f64
        );
        if let Some(p) = &g.checkpoint {
            model.save(p)?;
        }
        model
    };
    let count = g.episodes.unwrap_or(10);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let samples = (0..count).map(|_| model.sample(&mut rng)).collect::<crlnav::Result<Vec<_>>>()?;
    let out = required(&g.out, "--out")?;
    write_trajectories(&samples, out)?;
    println!("wrote {count} tracks to {}", out.display());
    Ok(())
}

fn fit_fuel(g: &Global, data: Option<&Path>, synthetic_n: Option<usize>) -> Result<()> {
    let params: BoostParams = match &g.config {
        Some(p) => read_toml(p)?,
        None => BoostParams::default(),
    };
    let records: Vec<OperationalRecord> = match (data, synthetic_n) {
        (Some(p), _) => read_records(p)?,
        (None, Some(n)) => synthetic::generate_records(n, g.seed.unwrap_or(0)),
        (None, None) => bail!("either --data or --synthetic is required"),
    };
    if records.iter().any(|r| r.fcr_target.is_none()) {
        bail!("every training record needs fcr_target");
    }
    // Every fifth record is held out.
    let (test, train): (Vec<_>, Vec<_>) = records.into_iter().enumerate().partition(|(i, _)| i % 5 == 4);
    let train: Vec<_> = train.into_iter().map(|(_, r)| r).collect();
    let test: Vec<_> = test.into_iter().map(|(_, r)| r).collect();
    let model = fit_ensemble(&train, &params)?;
    if !test.is_empty() {
        let pred = test
            .iter()
            .map(|r| Ok(predict_fcr(&model, &encode_features(r)?)))
            .collect::<crlnav::Result<Vec<_>>>()?;
        let target: Vec<f64> = test.iter().filter_map(|r| r.fcr_target).collect();
        let m = regression_metrics(&pred, &target)?;
        println!(
            "hold-out of {}: mae {:.4}  rmse {:.4}  r2 {:.4}",
            test.len(),
            m.mae,
            m.rmse,
            m.r2
        );
    }
    let out = required(&g.out, "--out")?;
    save_model(&model, out)?;
    println!("{} trees written to {}", model.trees.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Train => train(g),
        Command::Eval { trace } => eval(g, trace.as_deref()),
        Command::GenTraffic {
            data,
            synthetic,
            timestep,
        } => gen_traffic(g, data.as_deref(), synthetic, timestep),
        Command::FitFuel { data, synthetic } => fit_fuel(g, data.as_deref(), synthetic),
        Command::Export => export(g),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
