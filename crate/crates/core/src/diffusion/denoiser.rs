use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::schedule::{build_schedule, forward_sample, reverse_mean, NoiseSchedule};
use super::trajectory::Trajectory;
use super::RegionNormalizer;
use crate::error::{read_file, write_file, Error, Result};
use crate::nn::{
    compute_gradients, decode_into, encode_params, orthogonal, Adam, AdamConfig, Graph, ParamSet,
    Tensor, TensorRecord, Var,
};

/// Anything that estimates the noise in a normalized, flattened sample.
pub trait NoisePredictor {
    /// Flattened sample length (`3 × points`).
    fn sample_len(&self) -> usize;
    fn predict(&self, x_t: &[f64], t: usize) -> Vec<f64>;
}

/// Sinusoidal encoding of a diffusion step.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = (-(1000f64.ln()) * i as f64 / half.max(1) as f64).exp();
        out.push((t as f64 * freq).sin());
    }
    for i in 0..half {
        let freq = (-(1000f64.ln()) * i as f64 / half.max(1) as f64).exp();
        out.push((t as f64 * freq).cos());
    }
    out.resize(dim, 0.0);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiserShape {
    pub points: usize,
    pub hidden: usize,
    pub embed_dim: usize,
}

impl Default for DenoiserShape {
    fn default() -> Self {
        DenoiserShape {
            points: 64,
            hidden: 256,
            embed_dim: 32,
        }
    }
}

/// Three dense layers `[sample, embedding] -> hidden -> hidden -> sample`
/// estimate the clean sample; the noise estimate follows from it as
/// `(x_t - sqrt(ab)·x0_hat) / sqrt(1 - ab)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    pub shape: DenoiserShape,
    /// Cumulative signal retention of the schedule the model serves.
    pub alphas_bar: Vec<f64>,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub w3: Tensor,
    pub b3: Tensor,
}

impl DenoiserParams {
    pub fn init<R: Rng>(shape: DenoiserShape, sched: &NoiseSchedule, rng: &mut R) -> Result<Self> {
        if shape.points < 2 || shape.hidden == 0 {
            return Err(Error::InvalidArgument(format!("bad denoiser shape {shape:?}")));
        }
        let io = 3 * shape.points;
        let gain = std::f64::consts::SQRT_2;
        Ok(DenoiserParams {
            shape,
            alphas_bar: sched.alphas_bar.clone(),
            w1: orthogonal(io + shape.embed_dim, shape.hidden, gain, rng),
            b1: Tensor::zeros(&[shape.hidden]),
            w2: orthogonal(shape.hidden, shape.hidden, gain, rng),
            b2: Tensor::zeros(&[shape.hidden]),
            w3: orthogonal(shape.hidden, io, 1.0, rng),
            b3: Tensor::zeros(&[io]),
        })
    }

    /// Noise estimates `[B, 3·points]` for `(x_t, t)` rows.
    fn build<'a>(&'a self, g: &mut Graph<'a>, v: &[Var], rows: &[(&[f64], usize)]) -> Result<Var> {
        let io = 3 * self.shape.points;
        let width = io + self.shape.embed_dim;
        let (mut input, mut skip, mut gain) = (Vec::new(), Vec::new(), Vec::new());
        for (x, t) in rows {
            if x.len() != io || *t == 0 || *t > self.alphas_bar.len() {
                return Err(Error::Shape(format!("sample of {} values at step {t}", x.len())));
            }
            let ab = self.alphas_bar[t - 1];
            let noise = (1.0 - ab).sqrt();
            input.extend_from_slice(x);
            input.extend(time_embedding(*t, self.shape.embed_dim));
            skip.extend(x.iter().map(|v| v / noise));
            gain.extend(std::iter::repeat(-ab.sqrt() / noise).take(io));
        }
        let b = rows.len();
        let x = g.input(Tensor::new(vec![b, width], input)?);
        let h = g.matmul(x, v[0])?;
        let h = g.add_row(h, v[1])?;
        let h = g.relu(h);
        let h = g.matmul(h, v[2])?;
        let h = g.add_row(h, v[3])?;
        let h = g.relu(h);
        let clean = g.matmul(h, v[4])?;
        let clean = g.add_row(clean, v[5])?;
        let gain = g.input(Tensor::new(vec![b, io], gain)?);
        let skip = g.input(Tensor::new(vec![b, io], skip)?);
        let scaled = g.mul(clean, gain)?;
        g.add(scaled, skip)
    }
}

impl ParamSet for DenoiserParams {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }

    fn names(&self) -> Vec<String> {
        ["w1", "b1", "w2", "b2", "w3", "b3"].map(String::from).to_vec()
    }
}

impl NoisePredictor for DenoiserParams {
    fn sample_len(&self) -> usize {
        3 * self.shape.points
    }

    fn predict(&self, x_t: &[f64], t: usize) -> Vec<f64> {
        let mut g = Graph::new();
        let v = self.bind(&mut g);
        let out = self
            .build(&mut g, &v, &[(x_t, t)])
            .expect("sample matches the model");
        g.value(out).data().to_vec()
    }
}

/// Draws `(t, eps, x_t)` for one clean sample.
fn noised<R: Rng>(x0: &[f64], sched: &NoiseSchedule, rng: &mut R) -> (usize, Vec<f64>, Vec<f64>) {
    let t = rng.gen_range(1..=sched.steps());
    let eps: Vec<f64> = (0..x0.len()).map(|_| StandardNormal.sample(rng)).collect();
    let xt = forward_sample(x0, t, &eps, sched).expect("t drawn in range");
    (t, eps, xt)
}

/// Mean squared error between drawn noise and its estimate, over a batch of
/// normalized, flattened samples.
pub fn diffusion_loss<P: NoisePredictor, R: Rng>(
    batch: &[Vec<f64>],
    model: &P,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for x0 in batch {
        if x0.len() != model.sample_len() {
            return Err(Error::LengthMismatch(x0.len(), model.sample_len()));
        }
        let (t, eps, xt) = noised(x0, sched, rng);
        let pred = model.predict(&xt, t);
        sum += eps.iter().zip(&pred).map(|(e, p)| (e - p).powi(2)).sum::<f64>();
        count += eps.len();
    }
    Ok(sum / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffusionConfig {
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            steps: 100,
            beta_min: 1e-4,
            beta_max: 0.02,
            epochs: 200,
            batch_size: 32,
            step_size: 1e-3,
            seed: 0,
        }
    }
}

impl DiffusionConfig {
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        build_schedule(self.steps, self.beta_min, self.beta_max)
    }
}

#[derive(Debug, Clone)]
pub struct DenoiserTraining {
    pub params: DenoiserParams,
    /// Loss of every optimisation step.
    pub losses: Vec<f64>,
}

impl DenoiserTraining {
    /// Mean of the last `window` losses, or of the first `window` when `first`.
    pub fn average_loss(&self, window: usize, first: bool) -> Option<f64> {
        let n = self.losses.len().min(window);
        if n == 0 {
            return None;
        }
        let part = if first {
            &self.losses[..n]
        } else {
            &self.losses[self.losses.len() - n..]
        };
        Some(part.iter().sum::<f64>() / n as f64)
    }
}

/// Fits a denoiser on normalized, flattened samples with Adam, annealing the
/// step size to zero along a half cosine.
pub fn train_denoiser(
    samples: &[Vec<f64>],
    shape: DenoiserShape,
    config: &DiffusionConfig,
) -> Result<DenoiserTraining> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be positive".into()));
    }
    let sched = config.schedule()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = DenoiserParams::init(shape, &sched, &mut rng)?;
    if let Some(bad) = samples.iter().find(|s| s.len() != params.sample_len()) {
        return Err(Error::LengthMismatch(bad.len(), params.sample_len()));
    }
    let mut opt = Adam::new(
        AdamConfig {
            step_size: config.step_size,
            ..Default::default()
        },
        &params.tensors(),
    );
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let total = config.epochs * samples.len().div_ceil(config.batch_size);
    let mut losses = Vec::new();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let draws: Vec<(usize, Vec<f64>, Vec<f64>)> =
                chunk.iter().map(|&i| noised(&samples[i], &sched, &mut rng)).collect();
            let rows: Vec<(&[f64], usize)> = draws.iter().map(|(t, _, xt)| (xt.as_slice(), *t)).collect();
            let target: Vec<f64> = draws.iter().flat_map(|d| d.1.iter().copied()).collect();

            let grads = {
                let mut g = Graph::new();
                let v = params.bind(&mut g);
                let pred = params.build(&mut g, &v, &rows)?;
                let tv = g.input(Tensor::new(g.value(pred).shape().to_vec(), target)?);
                let diff = g.sub(pred, tv)?;
                let sq = g.square(diff);
                let loss = g.mean(sq);
                let value = g.value(loss).data()[0];
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss(format!("denoiser loss {value}")));
                }
                losses.push(value);
                compute_gradients(&g, loss, &v)?
            };
            let k = (losses.len() - 1) as f64;
            opt.config.step_size = config.step_size * 0.5 * (1.0 + (PI * k / total as f64).cos());
            opt.step(params.tensors_mut(), &grads);
        }
    }
    Ok(DenoiserTraining { params, losses })
}

/// Runs the reverse chain from pure noise and returns the normalized sample.
pub fn sample_normalized<P: NoisePredictor, R: Rng>(model: &P, sched: &NoiseSchedule, rng: &mut R) -> Vec<f64> {
    let n = model.sample_len();
    let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    for t in (1..=sched.steps()).rev() {
        let eps = model.predict(&x, t);
        x = reverse_mean(&x, t, &eps, sched).expect("step in range");
        if t > 1 {
            let s = sched.sigmas[t - 1];
            for v in x.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += s * z;
            }
        }
    }
    x
}

/// Samples one trajectory of the model's length in geographic units.
pub fn sample_trajectory<P: NoisePredictor, R: Rng>(
    model: &P,
    sched: &NoiseSchedule,
    normalizer: &RegionNormalizer,
    timestep: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    normalizer.denormalize(&sample_normalized(model, sched, rng), timestep)
}

const MODEL_FORMAT: &str = "crlnav-trajectory-diffusion";
const MODEL_VERSION: u32 = 1;

/// A trained generator with everything needed to sample from it.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionModel {
    pub params: DenoiserParams,
    pub config: DiffusionConfig,
    pub normalizer: RegionNormalizer,
    pub timestep: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    shape: DenoiserShape,
    config: DiffusionConfig,
    normalizer: RegionNormalizer,
    timestep: f64,
    weights: Vec<TensorRecord>,
}

impl DiffusionModel {
    /// Trains a generator on trajectories that all have `shape.points`
    /// points and a common timestep. Returns the model and its loss history.
    pub fn fit(data: &[Trajectory], shape: DenoiserShape, config: &DiffusionConfig) -> Result<(Self, Vec<f64>)> {
        let first = data.first().ok_or(Error::EmptyDataset)?;
        if let Some(bad) = data.iter().find(|t| t.len() != shape.points) {
            return Err(Error::LengthMismatch(bad.len(), shape.points));
        }
        if data.iter().any(|t| t.timestep != first.timestep) {
            return Err(Error::InvalidArgument("trajectories must share one timestep".into()));
        }
        let normalizer = RegionNormalizer::fit(data)?;
        let samples: Vec<Vec<f64>> = data.iter().map(|t| normalizer.normalize(t)).collect();
        let trained = train_denoiser(&samples, shape, config)?;
        let model = DiffusionModel {
            params: trained.params,
            config: *config,
            normalizer,
            timestep: first.timestep,
        };
        Ok((model, trained.losses))
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Trajectory> {
        sample_trajectory(&self.params, &self.config.schedule()?, &self.normalizer, self.timestep, rng)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            shape: self.params.shape,
            config: self.config,
            normalizer: self.normalizer.clone(),
            timestep: self.timestep,
            weights: encode_params(&self.params),
        };
        write_file(path, &serde_json::to_string(&file).expect("model serialises"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(&read_file(path)?).map_err(|e| Error::parse(path, e))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::CheckpointMismatch(format!("{} v{}", file.format, file.version)));
        }
        let sched = file.config.schedule()?;
        let mut params = DenoiserParams::init(file.shape, &sched, &mut ChaCha8Rng::seed_from_u64(0))?;
        decode_into(&mut params, &file.weights)?;
        Ok(DiffusionModel {
            params,
            config: file.config,
            normalizer: file.normalizer,
            timestep: file.timestep,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Predicts the exact noise relative to a known clean sample.
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
            x_t.iter()
                .zip(&self.x0)
                .map(|(x, x0)| (x - ab.sqrt() * x0) / (1.0 - ab).sqrt())
                .collect()
        }
    }

    struct Zero(usize);

    impl NoisePredictor for Zero {
        fn sample_len(&self) -> usize {
            self.0
        }

        fn predict(&self, x_t: &[f64], _: usize) -> Vec<f64> {
            vec![0.0; x_t.len()]
        }
    }

    fn sched() -> NoiseSchedule {
        build_schedule(100, 1e-4, 0.02).unwrap()
    }

    #[test]
    fn oracle_loss_vanishes() {
        let x0 = vec![0.2, -0.4, 0.9, 0.1, 0.0, -1.0];
        let oracle = Oracle { x0: x0.clone(), sched: sched() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let loss = diffusion_loss(&[x0.clone(), x0], &oracle, &sched(), &mut rng).unwrap();
        assert!(loss < 1e-20, "{loss}");
    }

    #[test]
    fn zero_predictor_loss_is_unit_second_moment() {
        let batch = vec![vec![0.3; 30]; 2000];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let loss = diffusion_loss(&batch, &Zero(30), &sched(), &mut rng).unwrap();
        assert!((loss - 1.0).abs() < 0.05, "{loss}");
        assert!(diffusion_loss(&[], &Zero(30), &sched(), &mut rng).is_err());
    }

    #[test]
    fn noiseless_reverse_chain_recovers_x0() {
        let x0: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let quiet = sched().without_sampling_noise();
        let oracle = Oracle { x0: x0.clone(), sched: quiet.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = sample_normalized(&oracle, &quiet, &mut rng);
        for (a, b) in out.iter().zip(&x0) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
        }
    }

    fn tiny_shape() -> DenoiserShape {
        DenoiserShape { points: 4, hidden: 16, embed_dim: 8 }
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let cfg = DiffusionConfig { epochs: 0, seed: 5, ..Default::default() };
        let out = train_denoiser(&[vec![0.1; 12]], tiny_shape(), &cfg).unwrap();
        let init = DenoiserParams::init(tiny_shape(), &sched(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(out.params, init);
        assert!(out.losses.is_empty());
        assert!(train_denoiser(&[], tiny_shape(), &cfg).is_err());
    }

    #[test]
    fn training_is_reproducible_and_sampling_deterministic() {
        let data: Vec<Vec<f64>> = (0..6).map(|k| (0..12).map(|i| ((i + k) as f64 * 0.3).cos() * 0.5).collect()).collect();
        let cfg = DiffusionConfig { epochs: 5, batch_size: 4, seed: 9, ..Default::default() };
        let a = train_denoiser(&data, tiny_shape(), &cfg).unwrap();
        let b = train_denoiser(&data, tiny_shape(), &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.losses, b.losses);
        let s = cfg.schedule().unwrap();
        let x = sample_normalized(&a.params, &s, &mut ChaCha8Rng::seed_from_u64(4));
        let y = sample_normalized(&a.params, &s, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(x, y);
        assert_eq!(x.len(), 12);
    }

    #[test]
    fn model_file_round_trip() {
        let params = DenoiserParams::init(tiny_shape(), &sched(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let model = DiffusionModel {
            params,
            config: DiffusionConfig::default(),
            normalizer: RegionNormalizer { lat: (0.0, 1.0), lon: (10.0, 12.0), sog: (0.0, 20.0) },
            timestep: 0.5,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.json");
        model.save(&path).unwrap();
        assert_eq!(DiffusionModel::load(&path).unwrap(), model);
        let t = model.sample(&mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(t.len(), 4);
        for p in &t.points {
            assert!((0.0..=1.0).contains(&p[0]) && (10.0..=12.0).contains(&p[1]) && p[2] >= 0.0);
        }
    }
}
