//! Actor and critic networks.
//!
//! Both share one topology: an image branch of stride-2 separable
//! convolutions over the raster, a dense branch over the self observation,
//! and a dense trunk over their concatenation. The trunk's first matrix is
//! stored as two blocks (image rows and vector rows) so the image half can be
//! computed once per distinct raster and reused across a batch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::init::{fan_in_uniform, orthogonal};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Layer sizes. The default is the full-size network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub self_dim: usize,
    pub raster_size: usize,
    pub raster_channels: usize,
    pub conv_channels: Vec<usize>,
    pub vector_width: usize,
    pub trunk_width: usize,
    pub action_dim: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            self_dim: 9,
            raster_size: 64,
            raster_channels: 3,
            conv_channels: vec![8, 16],
            vector_width: 64,
            trunk_width: 128,
            action_dim: 2,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.self_dim,
            self.raster_size,
            self.raster_channels,
            self.vector_width,
            self.trunk_width,
            self.action_dim,
        ];
        if dims.contains(&0) || self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return Err(Error::InvalidArgument(format!("degenerate architecture {self:?}")));
        }
        Ok(())
    }

    /// Side length and channel count of the last feature map.
    pub fn feature_map(&self) -> (usize, usize) {
        let side = self
            .conv_channels
            .iter()
            .fold(self.raster_size, |s, _| (s - 1) / 2 + 1);
        (side, *self.conv_channels.last().unwrap_or(&self.raster_channels))
    }

    /// Length of the flattened image features.
    pub fn image_features(&self) -> usize {
        let (side, ch) = self.feature_map();
        side * side * ch
    }

    pub fn raster_len(&self) -> usize {
        self.raster_size * self.raster_size * self.raster_channels
    }
}

/// Fixed affine map `(x - offset) * scale` applied to the self observation
/// before the dense branch. Not trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaling {
    pub fn identity(dim: usize) -> Self {
        InputScaling {
            offset: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(v, (o, s))| (v - o) * s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub depthwise: Tensor,
    pub depthwise_bias: Tensor,
    pub pointwise: Tensor,
    pub pointwise_bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    pub conv: Vec<ConvBlock>,
    pub vector_w: Tensor,
    pub vector_b: Tensor,
    pub trunk_image: Tensor,
    pub trunk_vector: Tensor,
    pub trunk_b: Tensor,
}

const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;

impl Backbone {
    fn init<R: Rng>(arch: &Architecture, rng: &mut R) -> Self {
        let mut conv = Vec::new();
        let mut cin = arch.raster_channels;
        for &cout in &arch.conv_channels {
            conv.push(ConvBlock {
                depthwise: fan_in_uniform(&[3, 3, cin], 9, rng),
                depthwise_bias: Tensor::zeros(&[cin]),
                pointwise: fan_in_uniform(&[cin, cout], cin, rng),
                pointwise_bias: Tensor::zeros(&[cout]),
            });
            cin = cout;
        }
        let feats = arch.image_features();
        let trunk = orthogonal(feats + arch.vector_width, arch.trunk_width, HIDDEN_GAIN, rng);
        let (img, vec) = trunk.data().split_at(feats * arch.trunk_width);
        Backbone {
            conv,
            vector_w: orthogonal(arch.self_dim, arch.vector_width, HIDDEN_GAIN, rng),
            vector_b: Tensor::zeros(&[arch.vector_width]),
            trunk_image: Tensor::new(vec![feats, arch.trunk_width], img.to_vec()).expect("split"),
            trunk_vector: Tensor::new(vec![arch.vector_width, arch.trunk_width], vec.to_vec())
                .expect("split"),
            trunk_b: Tensor::zeros(&[arch.trunk_width]),
        }
    }

    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for b in &self.conv {
            out.extend([&b.depthwise, &b.depthwise_bias, &b.pointwise, &b.pointwise_bias]);
        }
        out.extend([
            &self.vector_w,
            &self.vector_b,
            &self.trunk_image,
            &self.trunk_vector,
            &self.trunk_b,
        ]);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for b in &mut self.conv {
            out.push(&mut b.depthwise);
            out.push(&mut b.depthwise_bias);
            out.push(&mut b.pointwise);
            out.push(&mut b.pointwise_bias);
        }
        out.push(&mut self.vector_w);
        out.push(&mut self.vector_b);
        out.push(&mut self.trunk_image);
        out.push(&mut self.trunk_vector);
        out.push(&mut self.trunk_b);
        out
    }

    fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.conv.len() {
            for part in ["depthwise", "depthwise_bias", "pointwise", "pointwise_bias"] {
                out.push(format!("conv{i}.{part}"));
            }
        }
        for n in ["vector.w", "vector.b", "trunk.image", "trunk.vector", "trunk.b"] {
            out.push(n.to_string());
        }
        out
    }

    /// Image branch through the trunk's image block: `[U, H, W, C] -> [U, trunk]`.
    fn image_part<'a>(&'a self, g: &mut Graph<'a>, v: &[Var], images: Var) -> Result<Var> {
        let mut x = images;
        for (i, _) in self.conv.iter().enumerate() {
            let [dw, dwb, pw, pwb] = [v[4 * i], v[4 * i + 1], v[4 * i + 2], v[4 * i + 3]];
            x = g.depthwise_conv(x, dw, 2)?;
            x = g.add_row(x, dwb)?;
            let s = g.value(x).shape().to_vec();
            x = g.reshape(x, &[s[0] * s[1] * s[2], s[3]])?;
            x = g.matmul(x, pw)?;
            x = g.add_row(x, pwb)?;
            x = g.tanh(x);
            let cout = g.value(x).shape()[1];
            x = g.reshape(x, &[s[0], s[1], s[2], cout])?;
        }
        let s = g.value(x).shape().to_vec();
        let flat = g.reshape(x, &[s[0], s[1] * s[2] * s[3]])?;
        let k = 4 * self.conv.len();
        g.matmul(flat, v[k + 2])
    }

    fn build<'a>(
        &'a self,
        arch: &Architecture,
        scaling: &InputScaling,
        g: &mut Graph<'a>,
        v: &[Var],
        batch: &ObsBatch,
    ) -> Result<Var> {
        batch.check(arch)?;
        let proj = match &batch.images {
            ImageInput::Raw(t) => {
                let x = g.input(t.clone());
                self.image_part(g, v, x)?
            }
            ImageInput::Projected(t) => g.input(t.clone()),
        };
        let img = g.gather_rows(proj, batch.image_of.clone())?;

        let scaled: Vec<f64> = batch
            .self_obs
            .data()
            .chunks_exact(arch.self_dim)
            .flat_map(|row| scaling.apply(row))
            .collect();
        let s = g.input(Tensor::new(batch.self_obs.shape().to_vec(), scaled)?);
        let k = 4 * self.conv.len();
        let h = g.matmul(s, v[k])?;
        let h = g.add_row(h, v[k + 1])?;
        let h = g.tanh(h);
        let hv = g.matmul(h, v[k + 3])?;
        let z = g.add(img, hv)?;
        let z = g.add_row(z, v[k + 4])?;
        Ok(g.tanh(z))
    }
}

/// Image half of a batch: raw rasters, or their trunk projections computed
/// earlier by [`PolicyParams::image_projection`] / [`ValueParams::image_projection`].
#[derive(Debug, Clone)]
pub enum ImageInput {
    Raw(Tensor),
    Projected(Tensor),
}

/// A batch of observations whose rasters are deduplicated: row `i` uses
/// image `image_of[i]`.
#[derive(Debug, Clone)]
pub struct ObsBatch {
    pub self_obs: Tensor,
    pub images: ImageInput,
    pub image_of: Vec<usize>,
}

impl ObsBatch {
    /// One observation; `raster` is `[H, W, C]`.
    pub fn single(self_obs: &[f64], raster: &Tensor) -> Result<Self> {
        let mut shape = vec![1];
        shape.extend_from_slice(raster.shape());
        Ok(ObsBatch {
            self_obs: Tensor::new(vec![1, self_obs.len()], self_obs.to_vec())?,
            images: ImageInput::Raw(raster.clone().reshape(&shape)?),
            image_of: vec![0],
        })
    }

    pub fn len(&self) -> usize {
        self.image_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image_of.is_empty()
    }

    fn check(&self, arch: &Architecture) -> Result<()> {
        let s = self.self_obs.shape();
        if s.len() != 2 || s[1] != arch.self_dim || s[0] != self.image_of.len() {
            return Err(Error::Shape(format!(
                "self observation batch {s:?} for {} rows of width {}",
                self.image_of.len(),
                arch.self_dim
            )));
        }
        let r = arch.raster_size;
        let ok = match &self.images {
            ImageInput::Raw(t) => {
                t.shape().len() == 4 && t.shape()[1..] == [r, r, arch.raster_channels]
            }
            ImageInput::Projected(t) => t.shape().len() == 2 && t.shape()[1] == arch.trunk_width,
        };
        if !ok {
            let shape = match &self.images {
                ImageInput::Raw(t) | ImageInput::Projected(t) => t.shape().to_vec(),
            };
            return Err(Error::Shape(format!("image input {shape:?} does not fit {arch:?}")));
        }
        Ok(())
    }
}

/// Uniform access to a network's trainable tensors, in a fixed order.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;
    fn names(&self) -> Vec<String>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Registers every tensor as a graph parameter, in [`ParamSet::tensors`] order.
    fn bind<'a>(&'a self, g: &mut Graph<'a>) -> Vec<Var> {
        self.tensors().into_iter().map(|t| g.param(t)).collect()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// Actor: Gaussian mean head plus a state-independent log standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub arch: Architecture,
    pub scaling: InputScaling,
    pub backbone: Backbone,
    pub mean_w: Tensor,
    pub mean_b: Tensor,
    pub log_std: Tensor,
}

pub const INITIAL_STD: f64 = 0.5;

impl PolicyParams {
    pub fn init<R: Rng>(arch: &Architecture, scaling: InputScaling, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        check_scaling(arch, &scaling)?;
        Ok(PolicyParams {
            arch: arch.clone(),
            scaling,
            backbone: Backbone::init(arch, rng),
            mean_w: orthogonal(arch.trunk_width, arch.action_dim, 0.01, rng),
            mean_b: Tensor::zeros(&[arch.action_dim]),
            log_std: Tensor::full(&[arch.action_dim], INITIAL_STD.ln()),
        })
    }

    /// Mean `[B, action_dim]` and the log-std parameter `[action_dim]`.
    pub fn build<'a>(&'a self, g: &mut Graph<'a>, v: &[Var], batch: &ObsBatch) -> Result<(Var, Var)> {
        let n = v.len();
        let h = self.backbone.build(&self.arch, &self.scaling, g, v, batch)?;
        let mu = g.matmul(h, v[n - 3])?;
        let mu = g.add_row(mu, v[n - 2])?;
        Ok((mu, v[n - 1]))
    }

    /// Trunk projections `[U, trunk]` of raw rasters `[U, H, W, C]`.
    pub fn image_projection(&self, images: &Tensor) -> Result<Tensor> {
        project(&self.backbone, self, images)
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.log_std.data().iter().map(|l| l.exp()).collect()
    }
}

impl ParamSet for PolicyParams {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut t = self.backbone.tensors();
        t.extend([&self.mean_w, &self.mean_b, &self.log_std]);
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut t = self.backbone.tensors_mut();
        t.push(&mut self.mean_w);
        t.push(&mut self.mean_b);
        t.push(&mut self.log_std);
        t
    }

    fn names(&self) -> Vec<String> {
        let mut n = self.backbone.names();
        n.extend(["mean.w", "mean.b", "log_std"].map(String::from));
        n
    }
}

/// Critic: same topology with a scalar head.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueParams {
    pub arch: Architecture,
    pub scaling: InputScaling,
    pub backbone: Backbone,
    pub value_w: Tensor,
    pub value_b: Tensor,
}

impl ValueParams {
    pub fn init<R: Rng>(arch: &Architecture, scaling: InputScaling, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        check_scaling(arch, &scaling)?;
        Ok(ValueParams {
            arch: arch.clone(),
            scaling,
            backbone: Backbone::init(arch, rng),
            value_w: orthogonal(arch.trunk_width, 1, 1.0, rng),
            value_b: Tensor::zeros(&[1]),
        })
    }

    /// Values as a `[B, 1]` node.
    pub fn build<'a>(&'a self, g: &mut Graph<'a>, v: &[Var], batch: &ObsBatch) -> Result<Var> {
        let n = v.len();
        let h = self.backbone.build(&self.arch, &self.scaling, g, v, batch)?;
        let out = g.matmul(h, v[n - 2])?;
        g.add_row(out, v[n - 1])
    }

    pub fn image_projection(&self, images: &Tensor) -> Result<Tensor> {
        project(&self.backbone, self, images)
    }
}

impl ParamSet for ValueParams {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut t = self.backbone.tensors();
        t.extend([&self.value_w, &self.value_b]);
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut t = self.backbone.tensors_mut();
        t.push(&mut self.value_w);
        t.push(&mut self.value_b);
        t
    }

    fn names(&self) -> Vec<String> {
        let mut n = self.backbone.names();
        n.extend(["value.w", "value.b"].map(String::from));
        n
    }
}

fn check_scaling(arch: &Architecture, s: &InputScaling) -> Result<()> {
    if s.offset.len() != arch.self_dim || s.scale.len() != arch.self_dim {
        return Err(Error::Shape(format!(
            "input scaling has {}/{} entries, expected {}",
            s.offset.len(),
            s.scale.len(),
            arch.self_dim
        )));
    }
    Ok(())
}

fn project<P: ParamSet>(backbone: &Backbone, params: &P, images: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let v = params.bind(&mut g);
    let x = g.input(images.clone());
    let out = backbone.image_part(&mut g, &v, x)?;
    Ok(g.value(out).clone())
}

/// Mean and standard deviation of the action distribution for one observation.
pub fn forward_actor(params: &PolicyParams, s1: &[f64], s2: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
    let batch = ObsBatch::single(s1, s2)?;
    let mut g = Graph::new();
    let v = params.bind(&mut g);
    let (mu, _) = params.build(&mut g, &v, &batch)?;
    Ok((g.value(mu).data().to_vec(), params.sigma()))
}

/// State value for one observation.
pub fn forward_critic(params: &ValueParams, s1: &[f64], s2: &Tensor) -> Result<f64> {
    let batch = ObsBatch::single(s1, s2)?;
    let mut g = Graph::new();
    let v = params.bind(&mut g);
    let out = params.build(&mut g, &v, &batch)?;
    Ok(g.value(out).data()[0])
}
