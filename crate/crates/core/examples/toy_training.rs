//! Trains on the toy scenario and reports the deterministic reach rate.
//!
//! `cargo run --release --example toy_training -- [episodes] [seed] [config.toml] [no-curriculum]`

use std::time::Instant;

use crlnav::env::{default_fuel_model, Scenario};
use crlnav::eval::{evaluate_policy, summarize, EvalSettings};
use crlnav::ppo::{TrainConfig, Trainer};

fn main() -> crlnav::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut config = match args.get(3).filter(|a| a.ends_with(".toml")) {
        Some(path) => TrainConfig::load(std::path::Path::new(path))?,
        None => TrainConfig::default(),
    };
    config.ppo.total_episodes = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    config.seed = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(0);
    config.ppo.curriculum = !args.iter().any(|a| a == "no-curriculum");
    let scenario = Scenario::toy();
    let t0 = Instant::now();
    let mut trainer = Trainer::new(&scenario, &config, default_fuel_model())?;
    let mut k = 0;
    while let Some(u) = trainer.advance()? {
        k += 1;
        let (vl, dev) = (u.value_loss, u.ratio_deviation);
        if k % 5 == 0 {
            let eps = trainer.episodes();
            let tail = &eps[eps.len().saturating_sub(50)..];
            let mean = tail.iter().map(|e| e.reward).sum::<f64>() / tail.len() as f64;
            let reach = tail.iter().filter(|e| e.reason == crlnav::env::DoneReason::Reached).count();
            let eval = evaluate_policy(trainer.policy(), &scenario, default_fuel_model(), &EvalSettings { episodes: 1, ..Default::default() })?;
            println!(
                "update {k:4} episodes {:5} reward {mean:8.3} reached {reach:2}/50 omega {:.2} vloss {vl:.3} dev {dev:.3} sigma {:?} eval reached {} d_end {:.2} [{:.0}s]",
                eps.len(),
                tail.last().map_or(0.0, |e| e.threshold),
                trainer.policy().sigma(),
                eval[0].metrics.reached,
                eval[0].trace.last().unwrap().distance_to_goal,
                t0.elapsed().as_secs_f64()
            );
        }
    }
    let (report, ckpt) = trainer.finish();
    let res = evaluate_policy(&ckpt.policy, &scenario, default_fuel_model(), &EvalSettings::default())?;
    let m: Vec<_> = res.iter().map(|r| r.metrics).collect();
    for r in &res[0].trace {
        println!(
            "  d {:6.2} heading {:6.1} stw {:5.2} sog {:5.2} total {:7.3}",
            r.distance_to_goal, r.heading, r.stw, r.sog, r.total
        );
    }
    println!("episodes {} eval {:?}", report.episodes.len(), summarize(&m));
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
    Ok(())
}
