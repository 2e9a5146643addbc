//! Parameter-fused node encoder and per-node MLP decoder.
//!
//! * [`ChannelAttention`]: two attention vectors `a_ω = W₂,ω·σ(W₁,ω δ + b₁,ω) + b₂,ω`
//!   gate a pointwise linear map and a truncated spectral convolution,
//!   `h = x + a₁ ⊙ g₁(x) + a₂ ⊙ g₂(x)`.
//! * [`GnnEncoder`]: `L` message-passing layers, each
//!   `h ← P h + σ([h ‖ A h] W + b)` with `A` the neighbor-mean operator,
//!   followed by a projection to the latent width and an optional LayerNorm.
//! * [`MlpDecoder`]: `W_b σ(W_a z + b_a) + b_b` applied per node.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, Graph, SpectralPlan, Var};
use crate::error::{Result, SparkError};
use crate::fft::ModeSet;
use crate::grid::{Adjacency, GridGraph};
use crate::params::{init_normal, ParamId, ParamSet};
use crate::rng::SeedStream;
use crate::tensor::Tensor;

static ISOLATED_WARNED: AtomicBool = AtomicBool::new(false);

/// Architecture of the upstream (reconstruction) model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub attention_hidden: usize,
    /// Retained modes per axis in the spectral branch of the channel attention.
    pub spectral_modes: usize,
    pub gnn_hidden: usize,
    pub gnn_layers: usize,
    pub latent_dim: usize,
    pub decoder_hidden: usize,
    pub activation: Activation,
    /// LayerNorm on the latent output.
    pub latent_norm: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            attention_hidden: 16,
            spectral_modes: 8,
            gnn_hidden: 32,
            gnn_layers: 2,
            latent_dim: 32,
            decoder_hidden: 32,
            activation: Activation::Gelu,
            latent_norm: true,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gnn_layers == 0 {
            return Err(SparkError::Config("encoder.gnn_layers must be at least 1".into()));
        }
        for (name, v) in [
            ("attention_hidden", self.attention_hidden),
            ("gnn_hidden", self.gnn_hidden),
            ("latent_dim", self.latent_dim),
            ("decoder_hidden", self.decoder_hidden),
        ] {
            if v == 0 {
                return Err(SparkError::Config(format!("encoder.{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ChannelAttention {
    pub channels: usize,
    pub param_dim: usize,
    pub w1: [ParamId; 2],
    pub b1: [ParamId; 2],
    pub w2: [ParamId; 2],
    pub b2: [ParamId; 2],
    /// Pointwise `d×d` map.
    pub g1: ParamId,
    /// Spectral weights `[modes, d, d]`.
    pub g2_re: ParamId,
    pub g2_im: ParamId,
    pub plan: Arc<SpectralPlan>,
    pub activation: Activation,
}

impl ChannelAttention {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &mut ParamSet,
        rng: &mut SeedStream,
        prefix: &str,
        grid: &GridGraph,
        channels: usize,
        param_dim: usize,
        hidden: usize,
        k_max: usize,
        activation: Activation,
    ) -> Result<Self> {
        let modes = ModeSet::new(grid.height(), grid.width(), k_max)?;
        let m = modes.len();
        let mut branch = |w: usize| -> Result<[ParamId; 4]> {
            Ok([
                params.add(
                    format!("{prefix}.w1.{w}"),
                    init_normal(rng, &[param_dim, hidden], param_dim, 1.0),
                )?,
                params.add(format!("{prefix}.b1.{w}"), Tensor::zeros(&[hidden]))?,
                params.add(
                    format!("{prefix}.w2.{w}"),
                    init_normal(rng, &[hidden, channels], hidden, 0.1),
                )?,
                params.add(format!("{prefix}.b2.{w}"), Tensor::zeros(&[channels]))?,
            ])
        };
        let [w1a, b1a, w2a, b2a] = branch(0)?;
        let [w1b, b1b, w2b, b2b] = branch(1)?;
        let g1 = params.add(
            format!("{prefix}.g1"),
            init_normal(rng, &[channels, channels], channels, 1.0),
        )?;
        let g2_re = params.add(
            format!("{prefix}.g2.re"),
            init_normal(rng, &[m, channels, channels], channels, 1.0),
        )?;
        let g2_im = params.add(
            format!("{prefix}.g2.im"),
            init_normal(rng, &[m, channels, channels], channels, 1.0),
        )?;
        Ok(Self {
            channels,
            param_dim,
            w1: [w1a, w1b],
            b1: [b1a, b1b],
            w2: [w2a, w2b],
            b2: [b2a, b2b],
            g1,
            g2_re,
            g2_im,
            plan: Arc::new(SpectralPlan {
                modes,
                spectral_adjacency: None,
            }),
            activation,
        })
    }

    /// Attention vector `a_ω` as a `[1, d]` node.
    pub fn attention_vector(&self, g: &mut Graph, params: &ParamSet, delta: Var, branch: usize) -> Result<Var> {
        let w1 = g.param_from(params, self.w1[branch]);
        let b1 = g.param_from(params, self.b1[branch]);
        let w2 = g.param_from(params, self.w2[branch]);
        let b2 = g.param_from(params, self.b2[branch]);
        let hidden = g.linear(delta, w1, b1)?;
        let hidden = g.act(hidden, self.activation);
        g.linear(hidden, w2, b2)
    }

    pub fn forward(&self, g: &mut Graph, params: &ParamSet, x: Var, delta: &[f64]) -> Result<Var> {
        let n = self.plan.nodes();
        let xv = g.value(x);
        if xv.rows() != n || xv.cols() != self.channels {
            return Err(SparkError::shape(
                "channel_attention",
                format!(
                    "features {:?} on a grid of {n} nodes with {} channels",
                    xv.shape(),
                    self.channels
                ),
            ));
        }
        if delta.len() != self.param_dim {
            return Err(SparkError::shape(
                "channel_attention",
                format!(
                    "parameter vector has {} entries, expected {}",
                    delta.len(),
                    self.param_dim
                ),
            ));
        }
        let d = g.input(Tensor::new(vec![1, delta.len()], delta.to_vec())?);
        let a1 = self.attention_vector(g, params, d, 0)?;
        let a2 = self.attention_vector(g, params, d, 1)?;
        let g1 = g.param_from(params, self.g1);
        let local = g.matmul(x, g1)?;
        let wr = g.param_from(params, self.g2_re);
        let wi = g.param_from(params, self.g2_im);
        let global = g.spectral_conv(x, wr, wi, &self.plan)?;
        let h1 = g.mul_row(local, a1)?;
        let h2 = g.mul_row(global, a2)?;
        let s = g.add(x, h1)?;
        g.add(s, h2)
    }
}

#[derive(Clone, Debug)]
pub struct GnnLayer {
    /// Residual projection when the width changes.
    pub proj: Option<ParamId>,
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Debug)]
pub struct GnnEncoder {
    pub layers: Vec<GnnLayer>,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub norm: Option<(ParamId, ParamId)>,
    pub activation: Activation,
    pub adjacency: Arc<Adjacency>,
}

impl GnnEncoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &mut ParamSet,
        rng: &mut SeedStream,
        prefix: &str,
        adjacency: Arc<Adjacency>,
        input_dim: usize,
        hidden: usize,
        layers: usize,
        latent_dim: usize,
        latent_norm: bool,
        activation: Activation,
    ) -> Result<Self> {
        if layers == 0 {
            return Err(SparkError::Config("GNN encoder needs at least one layer".into()));
        }
        let mut out = Vec::with_capacity(layers);
        let mut width = input_dim;
        for l in 0..layers {
            let proj = if width != hidden {
                Some(params.add(
                    format!("{prefix}.layer{l}.proj"),
                    init_normal(rng, &[width, hidden], width, 1.0),
                )?)
            } else {
                None
            };
            let w = params.add(
                format!("{prefix}.layer{l}.w"),
                init_normal(rng, &[2 * width, hidden], 2 * width, 1.0),
            )?;
            let b = params.add(format!("{prefix}.layer{l}.b"), Tensor::zeros(&[hidden]))?;
            out.push(GnnLayer { proj, w, b });
            width = hidden;
        }
        let out_w = params.add(
            format!("{prefix}.out.w"),
            init_normal(rng, &[hidden, latent_dim], hidden, 1.0),
        )?;
        let out_b = params.add(format!("{prefix}.out.b"), Tensor::zeros(&[latent_dim]))?;
        let norm = if latent_norm {
            Some((
                params.add(format!("{prefix}.norm.gain"), Tensor::full(&[latent_dim], 1.0))?,
                params.add(format!("{prefix}.norm.bias"), Tensor::zeros(&[latent_dim]))?,
            ))
        } else {
            None
        };
        Ok(Self {
            layers: out,
            out_w,
            out_b,
            norm,
            activation,
            adjacency,
        })
    }

    pub fn forward(&self, g: &mut Graph, params: &ParamSet, h: Var) -> Result<Var> {
        if self.adjacency.isolated_nodes() > 0 && !ISOLATED_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!(
                "{} isolated node(s): their neighbor aggregate is zero",
                self.adjacency.isolated_nodes()
            );
        }
        let mut h = h;
        for layer in &self.layers {
            let agg = g.spmm(&self.adjacency, h)?;
            let cat = g.concat_cols(h, agg)?;
            let w = g.param_from(params, layer.w);
            let b = g.param_from(params, layer.b);
            let pre = g.linear(cat, w, b)?;
            let update = g.act(pre, self.activation);
            let residual = match layer.proj {
                Some(p) => {
                    let p = g.param_from(params, p);
                    g.matmul(h, p)?
                }
                None => h,
            };
            h = g.add(residual, update)?;
        }
        let w = g.param_from(params, self.out_w);
        let b = g.param_from(params, self.out_b);
        let z = g.linear(h, w, b)?;
        match self.norm {
            Some((gain, bias)) => {
                let gain = g.param_from(params, gain);
                let bias = g.param_from(params, bias);
                g.layer_norm(z, gain, bias)
            }
            None => Ok(z),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MlpDecoder {
    pub wa: ParamId,
    pub ba: ParamId,
    pub wb: ParamId,
    pub bb: ParamId,
    pub activation: Activation,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl MlpDecoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &mut ParamSet,
        rng: &mut SeedStream,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        output_dim: usize,
        activation: Activation,
    ) -> Result<Self> {
        Ok(Self {
            wa: params.add(
                format!("{prefix}.wa"),
                init_normal(rng, &[input_dim, hidden], input_dim, 1.0),
            )?,
            ba: params.add(format!("{prefix}.ba"), Tensor::zeros(&[hidden]))?,
            wb: params.add(
                format!("{prefix}.wb"),
                init_normal(rng, &[hidden, output_dim], hidden, 1.0),
            )?,
            bb: params.add(format!("{prefix}.bb"), Tensor::zeros(&[output_dim]))?,
            activation,
            input_dim,
            output_dim,
        })
    }

    pub fn forward(&self, g: &mut Graph, params: &ParamSet, z: Var) -> Result<Var> {
        if g.value(z).cols() != self.input_dim {
            return Err(SparkError::shape(
                "decode",
                format!(
                    "latent {:?}, decoder expects width {}",
                    g.value(z).shape(),
                    self.input_dim
                ),
            ));
        }
        let wa = g.param_from(params, self.wa);
        let ba = g.param_from(params, self.ba);
        let wb = g.param_from(params, self.wb);
        let bb = g.param_from(params, self.bb);
        let hidden = g.linear(z, wa, ba)?;
        let hidden = g.act(hidden, self.activation);
        g.linear(hidden, wb, bb)
    }
}

/// Channel attention → GNN encoder → MLP decoder, all weights in one set.
#[derive(Clone, Debug)]
pub struct Upstream {
    pub config: EncoderConfig,
    pub params: ParamSet,
    pub attention: ChannelAttention,
    pub gnn: GnnEncoder,
    pub decoder: MlpDecoder,
}

impl Upstream {
    pub fn new(
        config: &EncoderConfig,
        grid: &GridGraph,
        channels: usize,
        param_dim: usize,
        rng: &mut SeedStream,
    ) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new();
        let attention = ChannelAttention::new(
            &mut params,
            rng,
            "attention",
            grid,
            channels,
            param_dim,
            config.attention_hidden,
            config.spectral_modes,
            config.activation,
        )?;
        let gnn = GnnEncoder::new(
            &mut params,
            rng,
            "gnn",
            Arc::clone(&grid.adjacency),
            channels,
            config.gnn_hidden,
            config.gnn_layers,
            config.latent_dim,
            config.latent_norm,
            config.activation,
        )?;
        let decoder = MlpDecoder::new(
            &mut params,
            rng,
            "reconstruct",
            config.latent_dim,
            config.decoder_hidden,
            channels,
            config.activation,
        )?;
        Ok(Self {
            config: config.clone(),
            params,
            attention,
            gnn,
            decoder,
        })
    }

    /// Latent `h^(L)` for one frame `x` (`N·d` normalized values).
    pub fn encode(&self, g: &mut Graph, x: &[f64], delta_features: &[f64]) -> Result<Var> {
        let n = self.attention.plan.nodes();
        let xv = g.input(Tensor::new(vec![n, self.attention.channels], x.to_vec())?);
        let h = self.attention.forward(g, &self.params, xv, delta_features)?;
        self.gnn.forward(g, &self.params, h)
    }

    /// Frozen evaluation of the encoder, without keeping a tape.
    pub fn encode_value(&self, x: &[f64], delta_features: &[f64]) -> Result<Tensor> {
        let mut g = Graph::new();
        let h = self.encode(&mut g, x, delta_features)?;
        Ok(g.value(h).clone())
    }

    pub fn reconstruct(&self, g: &mut Graph, z: Var) -> Result<Var> {
        self.decoder.forward(g, &self.params, z)
    }
}
