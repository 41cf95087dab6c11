//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its measurements; the process exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use crlnav::diffusion::{
    build_schedule, forward_sample, sample_normalized, synthetic_trajectories, train_denoiser, DenoiserShape,
    DiffusionConfig, NoisePredictor, NoiseSchedule, RegionNormalizer,
};
use crlnav::env::{default_fuel_model, rasterize, Scenario, CHANNELS, SOG_SCALE};
use crlnav::eval::{evaluate_policy, summarize, EpisodeMetrics, EvalSettings};
use crlnav::fuel::{encode_features, fit_ensemble, predict_fcr, regression_metrics, synthetic, BoostParams};
use crlnav::geo::{great_circle_distance, initial_bearing, GeoPoint, Region, VesselKinematics, EARTH_RADIUS_NM};
use crlnav::nn::{
    finite_diff_check, Architecture, Checkpoint, InputScaling, ObsBatch, ImageInput, ParamSet, PolicyParams,
    Tensor, ValueParams,
};
use crlnav::ppo::{ppo_loss, train_crl, PPOConfig, PpoBatch, TrainConfig, TrainReport};
use crlnav::reward::{goal_threshold, step_reward, CurriculumSchedule, RewardConfig, RewardContext};
use crlnav::safety::{cpa, safe_distance, VesselDims};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const TOY_CONFIG: &str = include_str!("../../../configs/toy.toml");

type Outcome = Result<(bool, String), String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn point(r: &mut ChaCha8Rng, lat: f64) -> GeoPoint {
    GeoPoint::new(r.gen_range(-lat..lat), r.gen_range(-180.0..180.0)).unwrap()
}

/// Away from the poles and the antimeridian, so small offsets stay valid.
fn inner_point(r: &mut ChaCha8Rng) -> GeoPoint {
    GeoPoint::new(r.gen_range(-60.0..60.0), r.gen_range(-170.0..170.0)).unwrap()
}

fn unit(p: GeoPoint) -> [f64; 3] {
    let (la, lo) = (p.lat.to_radians(), p.lon.to_radians());
    [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn geodesy() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let (mut dist_err, mut brg_err) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (a, b) = (point(&mut r, 80.0), point(&mut r, 80.0));
        let (ua, ub) = (unit(a), unit(b));
        let cross = [
            ua[1] * ub[2] - ua[2] * ub[1],
            ua[2] * ub[0] - ua[0] * ub[2],
            ua[0] * ub[1] - ua[1] * ub[0],
        ];
        let want = EARTH_RADIUS_NM * dot(cross, cross).sqrt().atan2(dot(ua, ub));
        dist_err = dist_err.max((great_circle_distance(a, b) - want).abs() / want);

        let (la, lo) = (a.lat.to_radians(), a.lon.to_radians());
        let north = [-la.sin() * lo.cos(), -la.sin() * lo.sin(), la.cos()];
        let east = [-lo.sin(), lo.cos(), 0.0];
        let want = dot(ub, east).atan2(dot(ub, north)).to_degrees().rem_euclid(360.0);
        let got = initial_bearing(a, b).map_err(|e| e.to_string())?;
        let d = (got - want).rem_euclid(360.0);
        brg_err = brg_err.max(d.min(360.0 - d) / want.max(1.0));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        dist_err <= 1e-6 && brg_err <= 1e-6 && secs < 1.0,
        format!("max rel error distance {dist_err:.2e}, bearing {brg_err:.2e}; {secs:.3} s"),
    ))
}

fn cpa_scan() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let (mut d_err, mut t_err) = (0.0f64, 0.0f64);
    let mut n = 0;
    while n < 1000 {
        let own = VesselKinematics::over_ground(inner_point(&mut r), r.gen_range(0.0..360.0), r.gen_range(0.0..20.0));
        let dlat = r.gen_range(-0.15..0.15);
        let dlon = r.gen_range(-0.15..0.15);
        let tp = GeoPoint::new(own.position.lat + dlat, own.position.lon + dlon).unwrap();
        let target = VesselKinematics::over_ground(tp, r.gen_range(0.0..360.0), r.gen_range(0.0..20.0));

        let k = 60.0;
        let px = (tp.lon - own.position.lon) * k * own.position.lat.to_radians().cos();
        let py = (tp.lat - own.position.lat) * k;
        let vel = |v: &VesselKinematics| (v.sog * v.cog.to_radians().sin(), v.sog * v.cog.to_radians().cos());
        let ((oe, on), (te, tn)) = (vel(&own), vel(&target));
        let (vx, vy) = (te - oe, tn - on);
        if vx.hypot(vy) < 1.0 {
            continue;
        }
        n += 1;
        let (mut best_d, mut best_t) = (f64::INFINITY, 0.0);
        for s in -36_000i64..=36_000 {
            let t = s as f64 / 3600.0;
            let d = (px + vx * t).hypot(py + vy * t);
            if d < best_d {
                (best_d, best_t) = (d, t);
            }
        }
        let got = cpa(&own, &target);
        d_err = d_err.max((got.dcpa - best_d).abs());
        t_err = t_err.max((got.tcpa - best_t).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        d_err <= 0.01 && t_err <= 0.01 && secs < 10.0,
        format!("max |dDCPA| {d_err:.2e} nm, |dTCPA| {t_err:.2e} h; {secs:.2} s"),
    ))
}

fn safe_distance_spots() -> Outcome {
    let a = safe_distance(VesselDims { loa: 200.0, beam: 30.0 }, VesselDims { loa: 100.0, beam: 20.0 }, 4.0);
    let b = safe_distance(VesselDims { loa: 400.0, beam: 60.0 }, VesselDims { loa: 400.0, beam: 60.0 }, 4.0);
    Ok((a == 0.5 && (b - 0.9935).abs() <= 1e-4, format!("small pair {a} nm, large pair {b:.6} nm")))
}

/// Written from the case table, independent of the library's code path.
fn reference_reward(d_pre: f64, d_cur: f64, omega: f64, late: bool, f: f64, s: f64, c: &RewardConfig) -> f64 {
    let g = d_pre - d_cur;
    let base = c.goal_weight * g - f - s;
    if d_cur < omega {
        c.terminal_bonus + c.goal_weight * g - f - s
    } else if d_cur > d_pre {
        base - c.moved_away_penalty
    } else if late {
        base - c.late_coefficient * d_cur
    } else {
        base
    }
}

fn reward_grid() -> Outcome {
    let cfg = RewardConfig::default();
    let omega = 1.0;
    let (fcr, gt, s_t) = (2.5, 40_000.0, 0.3);
    let f = cfg.alpha * fcr / gt;
    // 50 x 100 x 2 combinations straddling the goal radius.
    let pre: Vec<f64> = (0..50).map(|i| i as f64 * 0.07).collect();
    let cur: Vec<f64> = (0..100).map(|i| i as f64 * 0.035).collect();
    let (mut checked, mut mismatches) = (0, 0);
    for &d_pre in &pre {
        for &d_cur in &cur {
            for late in [false, true] {
                checked += 1;
                let ctx = RewardContext { d_pre, d_cur, omega, is_late: late, fcr, gt, s_t };
                let got = step_reward(&ctx, &cfg).map_err(|e| e.to_string())?.total;
                if got.to_bits() != reference_reward(d_pre, d_cur, omega, late, f, s_t, &cfg).to_bits() {
                    mismatches += 1;
                }
            }
        }
    }
    let sched = CurriculumSchedule::default();
    let (w0, wn) = (goal_threshold(0, &sched), goal_threshold(sched.total_episodes, &sched));
    Ok((
        checked == 10_000 && mismatches == 0 && w0 == 5.0 && wn == sched.omega_f,
        format!("{checked} combinations, {mismatches} mismatches; radius {w0} -> {wn} nm"),
    ))
}

fn brute_raster(traffic: &[VesselKinematics], own: &VesselKinematics, window: f64, size: usize) -> Vec<f64> {
    let mut out = vec![0.0; size * size * CHANNELS];
    let half = 0.5 * window;
    let cell = window / size as f64;
    let offset = |p: GeoPoint| {
        let mut dlon = p.lon - own.position.lon;
        if dlon > 180.0 {
            dlon -= 360.0;
        } else if dlon < -180.0 {
            dlon += 360.0;
        }
        let e = dlon * 60.0 * own.position.lat.to_radians().cos();
        (e, (p.lat - own.position.lat) * 60.0)
    };
    for row in 0..size {
        for col in 0..size {
            let mut best: Option<(f64, usize)> = None;
            for (i, t) in traffic.iter().enumerate() {
                let (e, n) = offset(t.position);
                let c = ((e + half) / cell).floor();
                let r = ((half - n) / cell).floor();
                if c != col as f64 || r != row as f64 {
                    continue;
                }
                let d = e.hypot(n);
                if best.map_or(true, |(bd, _)| d <= bd) {
                    best = Some((d, i));
                }
            }
            if let Some((_, i)) = best {
                let k = (row * size + col) * CHANNELS;
                out[k] = 1.0;
                out[k + 1] = (traffic[i].sog / SOG_SCALE).min(1.0);
                out[k + 2] = traffic[i].cog / 360.0;
            }
        }
    }
    out
}

fn raster_oracle() -> Outcome {
    let mut r = rng(5);
    let mut bad = 0;
    for snap in 0..100 {
        let own = VesselKinematics::over_ground(inner_point(&mut r), r.gen_range(0.0..360.0), 12.0);
        let (window, size) = (10.0, [8, 16, 32, 64][snap % 4]);
        let mut traffic = Vec::new();
        for _ in 0..r.gen_range(0..40) {
            let p = GeoPoint::new(
                own.position.lat + r.gen_range(-0.12..0.12),
                own.position.lon + r.gen_range(-0.12..0.12),
            )
            .unwrap();
            traffic.push(VesselKinematics::over_ground(p, r.gen_range(0.0..360.0), r.gen_range(0.0..40.0)));
            if r.gen_bool(0.2) {
                // Same spot, different motion: an exact distance tie.
                traffic.push(VesselKinematics::over_ground(p, r.gen_range(0.0..360.0), r.gen_range(0.0..40.0)));
            }
        }
        if rasterize(&traffic, &own, window, size).data != brute_raster(&traffic, &own, window, size) {
            bad += 1;
        }
    }
    Ok((bad == 0, format!("100 snapshots, {bad} differ")))
}

fn fuel_fit() -> Outcome {
    let start = Instant::now();
    let records = synthetic::generate_records(20_000, 6);
    let (train, test): (Vec<_>, Vec<_>) = records.iter().cloned().enumerate().partition(|(i, _)| i % 5 != 4);
    let train: Vec<_> = train.into_iter().map(|(_, r)| r).collect();
    let test: Vec<_> = test.into_iter().map(|(_, r)| r).collect();
    let model = fit_ensemble(&train, &BoostParams::default()).map_err(|e| e.to_string())?;
    let mut pred = Vec::new();
    for r in &test {
        pred.push(predict_fcr(&model, &encode_features(r).map_err(|e| e.to_string())?));
    }
    let target: Vec<f64> = test.iter().map(|r| r.fcr_target.unwrap()).collect();
    let m = regression_metrics(&pred, &target).map_err(|e| e.to_string())?;
    let train_mean = train.iter().map(|r| r.fcr_target.unwrap()).sum::<f64>() / train.len() as f64;
    let baseline = (target.iter().map(|t| (t - train_mean).powi(2)).sum::<f64>() / target.len() as f64).sqrt();
    let secs = start.elapsed().as_secs_f64();
    Ok((
        m.r2 >= 90.0 && m.rmse * 3.0 <= baseline && secs < 60.0,
        format!("R2 {:.2}%, RMSE {:.4} vs mean predictor {:.4}; {secs:.1} s", m.r2, m.rmse, baseline),
    ))
}

/// Knows the clean sample, so its noise estimate is exact.
struct Oracle {
    x0: Vec<f64>,
    sched: NoiseSchedule,
}

impl NoisePredictor for Oracle {
    fn sample_len(&self) -> usize {
        self.x0.len()
    }

    fn predict(&self, x_t: &[f64], t: usize) -> Vec<f64> {
        let ab = self.sched.alpha_bar(t);
        x_t.iter().zip(&self.x0).map(|(x, c)| (x - ab.sqrt() * c) / (1.0 - ab).sqrt()).collect()
    }
}

fn diffusion() -> Outcome {
    let start = Instant::now();
    let sched = build_schedule(100, 1e-4, 0.02).map_err(|e| e.to_string())?;
    let mut r = rng(7);

    // Forward marginal: mean sqrt(ab)·x0, variance 1 - ab.
    let x0 = vec![0.8, -0.3, 0.05, -1.0];
    let draws = 100_000;
    let mut marginal_err = 0.0f64;
    for t in [1, 10, 50, 100] {
        let ab = sched.alpha_bar(t);
        let mut sum = vec![0.0; x0.len()];
        let mut sq = vec![0.0; x0.len()];
        for _ in 0..draws {
            let eps: Vec<f64> = (0..x0.len()).map(|_| r.sample(StandardNormal)).collect();
            let xt = forward_sample(&x0, t, &eps, &sched).map_err(|e| e.to_string())?;
            for i in 0..x0.len() {
                sum[i] += xt[i];
                sq[i] += xt[i] * xt[i];
            }
        }
        for i in 0..x0.len() {
            let mean = sum[i] / draws as f64;
            let var = sq[i] / draws as f64 - mean * mean;
            let (want_mean, want_var) = (ab.sqrt() * x0[i], 1.0 - ab);
            // Means are compared on the scale of the marginal spread.
            marginal_err = marginal_err.max((mean - want_mean).abs() / want_mean.abs().max(want_var.sqrt()));
            marginal_err = marginal_err.max((var - want_var).abs() / want_var);
        }
    }
    let part_a = marginal_err <= 0.02;

    // Overfit one trajectory.
    let region = Region { lat_min: 30.0, lat_max: 31.0, lon_min: 120.0, lon_max: 121.0 };
    let shape = DenoiserShape::default();
    let tracks = synthetic_trajectories(16, shape.points, 0.5, &region, 3).map_err(|e| e.to_string())?;
    let norm = RegionNormalizer::fit(&tracks).map_err(|e| e.to_string())?;
    let one = norm.normalize(&tracks[0]);
    let config = DiffusionConfig { epochs: 2000, batch_size: 8, ..DiffusionConfig::default() };
    let fit = train_denoiser(&vec![one; 8], shape, &config).map_err(|e| e.to_string())?;
    let late_loss = fit.average_loss(50, false).unwrap_or(f64::INFINITY);
    let part_b = fit.losses.len() <= 2000 && late_loss < 0.1;

    // Noiseless reverse chain with an exact denoiser.
    let quiet = sched.without_sampling_noise();
    let target: Vec<f64> = (0..3 * shape.points).map(|i| (i as f64 * 0.37).sin()).collect();
    let oracle = Oracle { x0: target.clone(), sched: quiet.clone() };
    let out = sample_normalized(&oracle, &quiet, &mut r);
    let recover = out.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let part_c = recover <= 1e-6;

    let secs = start.elapsed().as_secs_f64();
    Ok((
        part_a && part_b && part_c && secs < 300.0,
        format!(
            "marginal rel error {marginal_err:.4}; overfit loss {late_loss:.4} after {} steps; oracle recovery {recover:.1e}; {secs:.1} s",
            fit.losses.len()
        ),
    ))
}

fn random_arch(r: &mut ChaCha8Rng) -> Architecture {
    let layers = r.gen_range(1..=2);
    Architecture {
        self_dim: r.gen_range(2..=9),
        raster_size: r.gen_range(3..=9),
        raster_channels: r.gen_range(1..=3),
        conv_channels: (0..layers).map(|_| r.gen_range(1..=4)).collect(),
        vector_width: r.gen_range(2..=10),
        trunk_width: r.gen_range(2..=12),
        action_dim: r.gen_range(1..=2),
    }
}

fn random_tensor(shape: &[usize], scale: f64, r: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| scale * r.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn random_batch(arch: &Architecture, r: &mut ChaCha8Rng) -> PpoBatch {
    let rows = r.gen_range(2..=6);
    let images = r.gen_range(1..=rows);
    let side = arch.raster_size;
    PpoBatch {
        obs: ObsBatch {
            self_obs: random_tensor(&[rows, arch.self_dim], 1.0, r),
            images: ImageInput::Raw(random_tensor(&[images, side, side, arch.raster_channels], 0.5, r)),
            image_of: (0..rows).map(|i| i % images).collect(),
        },
        raw: random_tensor(&[rows, arch.action_dim], 1.0, r),
        old_log_prob: random_tensor(&[rows], 0.5, r),
        advantages: random_tensor(&[rows], 1.0, r),
        returns: random_tensor(&[rows], 1.0, r),
    }
}

fn gradients() -> Outcome {
    let mut r = rng(8);
    let cfg = PPOConfig { clip_epsilon: 1e6, ..PPOConfig::default() };
    let (mut worst, mut control, mut coords) = (0.0f64, f64::INFINITY, usize::MAX);
    for _ in 0..100 {
        let arch = random_arch(&mut r);
        let scaling = InputScaling::identity(arch.self_dim);
        let policy = PolicyParams::init(&arch, scaling.clone(), &mut r).map_err(|e| e.to_string())?;
        let value = ValueParams::init(&arch, scaling, &mut r).map_err(|e| e.to_string())?;
        let batch = random_batch(&arch, &mut r);
        let out = ppo_loss(&policy, &value, &batch, &cfg).map_err(|e| e.to_string())?;

        let actor_loss = |p: &PolicyParams| ppo_loss(p, &value, &batch, &cfg).map(|o| o.terms.loss);
        let critic_loss = |v: &ValueParams| ppo_loss(&policy, v, &batch, &cfg).map(|o| o.terms.loss);
        let a = finite_diff_check(&policy, &out.policy, actor_loss, 200, &mut r).map_err(|e| e.to_string())?;
        let c = finite_diff_check(&value, &out.value, critic_loss, 200, &mut r).map_err(|e| e.to_string())?;
        worst = worst.max(a.max_rel_error).max(c.max_rel_error);
        coords = coords.min((a.coords + c.coords).min(policy.num_params() + value.num_params()));

        // Every coordinate is perturbed, so any sampled coordinate disagrees.
        let mut corrupted = out.policy.clone();
        for t in corrupted.iter_mut() {
            for x in t.data_mut() {
                *x = *x * 1.5 + 0.01;
            }
        }
        let bad = finite_diff_check(&policy, &corrupted, actor_loss, 200, &mut r).map_err(|e| e.to_string())?;
        control = control.min(bad.max_rel_error);
    }
    Ok((
        worst <= 1e-4 && control > 1e-2,
        format!("100 architectures, max rel error {worst:.2e}; corrupted control min {control:.2e}; fewest coords {coords}"),
    ))
}

struct Run {
    report: TrainReport,
    checkpoint: Checkpoint,
    elapsed: Duration,
}

fn train(seed: u64, curriculum: bool) -> Result<Run, String> {
    let mut config = TrainConfig::from_toml(TOY_CONFIG).map_err(|e| e.to_string())?;
    config.seed = seed;
    config.ppo.curriculum = curriculum;
    let start = Instant::now();
    let (report, checkpoint) = train_crl(&Scenario::toy(), &config, default_fuel_model()).map_err(|e| e.to_string())?;
    Ok(Run { report, checkpoint, elapsed: start.elapsed() })
}

fn evaluate(run: &Run) -> Result<Vec<EpisodeMetrics>, String> {
    let res = evaluate_policy(&run.checkpoint.policy, &Scenario::toy(), default_fuel_model(), &EvalSettings::default())
        .map_err(|e| e.to_string())?;
    Ok(res.into_iter().map(|e| e.metrics).collect())
}

fn learning(run: &Run) -> Outcome {
    let metrics = evaluate(run)?;
    let s = summarize(&metrics);
    let secs = run.elapsed.as_secs_f64();
    Ok((
        run.report.episodes.len() <= 2000 && s.reach_rate >= 0.8 && secs <= 1800.0,
        format!(
            "{} episodes, reach rate {:.2} over {} deterministic episodes; training {secs:.1} s",
            run.report.episodes.len(),
            s.reach_rate,
            s.episodes
        ),
    ))
}

/// First episode whose moving average is within 10% of the final one.
fn convergence_episode(report: &TrainReport) -> usize {
    let ma = &report.moving_average;
    let last = *ma.last().unwrap();
    let target = last - 0.1 * last.abs();
    ma.iter().position(|&m| m >= target).unwrap_or(ma.len())
}

/// Variance of the episode rewards about their moving average.
fn curve_variance(report: &TrainReport) -> f64 {
    let rewards = report.episode_rewards();
    let n = rewards.len() as f64;
    rewards.iter().zip(&report.moving_average).map(|(r, m)| (r - m).powi(2)).sum::<f64>() / n
}

fn ablation(first: &Run) -> Outcome {
    let (mut crl_conv, mut flat_conv, mut crl_var, mut flat_var) = (0.0, 0.0, 0.0, 0.0);
    let mut per_seed = Vec::new();
    for seed in 0..3u64 {
        let crl = if seed == 0 { None } else { Some(train(seed, true)?) };
        let crl = crl.as_ref().unwrap_or(first);
        let flat = train(seed, false)?;
        let (cc, fc) = (convergence_episode(&crl.report), convergence_episode(&flat.report));
        let (cv, fv) = (curve_variance(&crl.report), curve_variance(&flat.report));
        per_seed.push(format!("seed {seed}: {cc}/{fc} ep, var {cv:.2}/{fv:.2}"));
        crl_conv += cc as f64 / 3.0;
        flat_conv += fc as f64 / 3.0;
        crl_var += cv / 3.0;
        flat_var += fv / 3.0;
    }
    Ok((
        crl_conv <= flat_conv && flat_var >= crl_var,
        format!(
            "convergence episode CRL {crl_conv:.1} vs flat {flat_conv:.1}; variance CRL {crl_var:.3} vs flat {flat_var:.3} ({})",
            per_seed.join("; ")
        ),
    ))
}

fn determinism(first: &Run) -> Outcome {
    let again = train(0, true)?;
    let same_report = again.report == first.report;
    let same_ckpt = again.checkpoint == first.checkpoint;
    let same_eval = evaluate(&again)? == evaluate(first)?;
    Ok((
        same_report && same_ckpt && same_eval,
        format!("report identical {same_report}, checkpoint identical {same_ckpt}, eval metrics identical {same_eval}"),
    ))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut record = |id: u32, name: &str, outcome: Outcome| {
        let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            failed += 1;
        }
        println!("{} [{id:>2}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    };
    record(1, "geodesy oracle", geodesy());
    record(2, "CPA oracle", cpa_scan());
    record(3, "safe distance spot values", safe_distance_spots());
    record(4, "reward cases and curriculum endpoints", reward_grid());
    record(5, "raster oracle", raster_oracle());
    record(6, "fuel model", fuel_fit());
    record(7, "diffusion", diffusion());
    record(8, "gradient check", gradients());
    match train(0, true) {
        Ok(run) => {
            record(9, "end-to-end learning", learning(&run));
            record(10, "curriculum ablation", ablation(&run));
            record(11, "determinism", determinism(&run));
        }
        Err(e) => {
            for (id, name) in [(9, "end-to-end learning"), (10, "curriculum ablation"), (11, "determinism")] {
                record(id, name, Err(e.clone()));
            }
        }
    }
    if failed == 0 {
        println!("all 11 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
