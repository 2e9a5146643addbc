//! Latent forecaster: temporal attention over a history window, a graph ODE
//! with a Fourier branch, fixed-step integration and a per-node decoder.
//!
//! Right-hand side, with `H¹ = H`:
//! `Yˡ = σ(Re F⁻¹(W_Fˡ · A·F(Hˡ)) + A Hˡ Wˡ + bˡ)`, `Hˡ⁺¹ = Yˡ`, `dH/dt = Σ_l Yˡ`.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::augment::{augment_decisions, calibrate_tau, curriculum_ratio, AugmentConfig, Augmenter};
use crate::autodiff::{Activation, Graph, SpectralPlan, Var};
use crate::codebook::Codebook;
use crate::datagen::{param_features, EpisodeDataset, Split};
use crate::encoder::{MlpDecoder, Upstream};
use crate::error::{Result, SparkError};
use crate::fft::ModeSet;
use crate::grid::{Adjacency, GridGraph};
use crate::optim::{Adam, AdamConfig};
use crate::parallel::ordered_map;
use crate::params::{init_normal, Gradients, ParamId, ParamSet};
use crate::rng::SeedStream;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    #[default]
    Rk4,
    Euler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    /// History frames fed to the temporal attention.
    pub history: usize,
    /// Forecast steps, one unit of time apart.
    pub horizon: usize,
    /// Offset between consecutive training windows of one episode.
    pub window_stride: usize,
    pub lambda_reg: f64,
    pub solver: Solver,
    /// Solver steps per unit time.
    pub substeps: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Windows per optimizer step.
    pub batch_size: usize,
    pub ode_layers: usize,
    pub spectral_modes: usize,
    pub decoder_hidden: usize,
    pub activation: Activation,
    /// Activation wrapped around each attention-weighted history term.
    pub history_activation: Activation,
    /// Apply the adjacency to Fourier coefficients (`A·F(H)`); `false` uses `F(A·H)`.
    pub spectral_adjacency: bool,
    /// Return the sum of all layer outputs; `false` returns only the last layer.
    pub sum_layers: bool,
    /// Every `holdout_every`-th in-domain episode is kept for validation (0 = none).
    pub holdout_every: usize,
    /// Return the weights of the epoch with the lowest validation MSE instead of the last.
    pub keep_best: bool,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            history: 10,
            horizon: 10,
            window_stride: 10,
            lambda_reg: 1e-6,
            solver: Solver::Rk4,
            substeps: 4,
            epochs: 30,
            lr: 3e-3,
            batch_size: 4,
            ode_layers: 2,
            spectral_modes: 8,
            decoder_hidden: 32,
            activation: Activation::Gelu,
            history_activation: Activation::Identity,
            spectral_adjacency: true,
            sum_layers: true,
            holdout_every: 5,
            keep_best: false,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("history", self.history),
            ("horizon", self.horizon),
            ("window_stride", self.window_stride),
            ("substeps", self.substeps),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("ode_layers", self.ode_layers),
            ("decoder_hidden", self.decoder_hidden),
        ] {
            if v == 0 {
                return Err(SparkError::Config(format!("dynamics.{name} must be positive")));
            }
        }
        if !(self.lambda_reg >= 0.0) {
            return Err(SparkError::Config("dynamics.lambda_reg must be non-negative".into()));
        }
        if !(self.lr > 0.0) {
            return Err(SparkError::Config("dynamics.lr must be positive".into()));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        self.history + self.horizon
    }
}

#[derive(Clone, Debug)]
pub struct OdeLayer {
    pub wf_re: ParamId,
    pub wf_im: ParamId,
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Debug)]
pub struct DynamicsModel {
    pub config: DynamicsConfig,
    pub params: ParamSet,
    pub latent_dim: usize,
    pub channels: usize,
    pub w_alpha: ParamId,
    pub layers: Vec<OdeLayer>,
    pub decoder: MlpDecoder,
    pub plan: Arc<SpectralPlan>,
    pub adjacency: Arc<Adjacency>,
}

impl DynamicsModel {
    pub fn new(
        config: &DynamicsConfig,
        grid: &GridGraph,
        latent_dim: usize,
        channels: usize,
        rng: &mut SeedStream,
    ) -> Result<Self> {
        config.validate()?;
        let modes = ModeSet::new(grid.height(), grid.width(), config.spectral_modes)?;
        let m = modes.len();
        let d = latent_dim;
        let mut params = ParamSet::new();
        let w_alpha = params.add("history.w_alpha", init_normal(rng, &[d, d], d, 1.0))?;
        let mut layers = Vec::with_capacity(config.ode_layers);
        for l in 0..config.ode_layers {
            layers.push(OdeLayer {
                wf_re: params.add(format!("ode{l}.wf.re"), init_normal(rng, &[m, d, d], d * d, 0.5))?,
                wf_im: params.add(format!("ode{l}.wf.im"), init_normal(rng, &[m, d, d], d * d, 0.5))?,
                w: params.add(format!("ode{l}.w"), init_normal(rng, &[d, d], d, 0.5))?,
                b: params.add(format!("ode{l}.b"), Tensor::zeros(&[d]))?,
            });
        }
        let decoder = MlpDecoder::new(
            &mut params,
            rng,
            "forecast",
            d,
            config.decoder_hidden,
            channels,
            config.activation,
        )?;
        let spectral_adjacency = config.spectral_adjacency.then(|| Arc::clone(&grid.adjacency));
        Ok(Self {
            config: config.clone(),
            params,
            latent_dim,
            channels,
            w_alpha,
            layers,
            decoder,
            plan: Arc::new(SpectralPlan {
                modes,
                spectral_adjacency,
            }),
            adjacency: Arc::clone(&grid.adjacency),
        })
    }

    /// `h0_i = (1/T0) Σ_t act(α_iᵗ hᵢᵗ)` with `α_iᵗ = hᵢᵗ · tanh(m_i W_α)`.
    pub fn encode_history(&self, g: &mut Graph, history: &[Var]) -> Result<Var> {
        let Some((&first, rest)) = history.split_first() else {
            return Err(SparkError::Contract("history window is empty".into()));
        };
        let inv = 1.0 / history.len() as f64;
        let mut m = first;
        for &h in rest {
            m = g.add(m, h)?;
        }
        let m = g.scale(m, inv);
        let wa = g.param_from(&self.params, self.w_alpha);
        let proj = g.matmul(m, wa)?;
        let gate = g.tanh(proj);
        let mut acc: Option<Var> = None;
        for &h in history {
            let alpha = g.row_dot(h, gate)?;
            let weighted = g.mul_col(h, alpha)?;
            let term = g.act(weighted, self.config.history_activation);
            acc = Some(match acc {
                Some(a) => g.add(a, term)?,
                None => term,
            });
        }
        let h0 = g.scale(acc.expect("non-empty history"), inv);
        if !g.value(h0).is_finite() {
            return Err(SparkError::numeric("encode_history", "initial state is not finite"));
        }
        Ok(h0)
    }

    pub fn rhs(&self, g: &mut Graph, h: Var) -> Result<Var> {
        let hv = g.value(h);
        if hv.rows() != self.plan.nodes() || hv.cols() != self.latent_dim {
            return Err(SparkError::shape(
                "ode_rhs",
                format!(
                    "state {:?}, expected [{}, {}]",
                    hv.shape(),
                    self.plan.nodes(),
                    self.latent_dim
                ),
            ));
        }
        let mut x = h;
        let mut total: Option<Var> = None;
        for layer in &self.layers {
            let ax = g.spmm(&self.adjacency, x)?;
            let wr = g.param_from(&self.params, layer.wf_re);
            let wi = g.param_from(&self.params, layer.wf_im);
            let spectral_in = if self.config.spectral_adjacency { x } else { ax };
            let spectral = g.spectral_conv(spectral_in, wr, wi, &self.plan)?;
            let w = g.param_from(&self.params, layer.w);
            let spatial = g.matmul(ax, w)?;
            let s = g.add(spectral, spatial)?;
            let b = g.param_from(&self.params, layer.b);
            let pre = g.add_row(s, b)?;
            let y = g.act(pre, self.config.activation);
            total = Some(match total {
                Some(t) if self.config.sum_layers => g.add(t, y)?,
                _ => y,
            });
            x = y;
        }
        Ok(total.expect("at least one ODE layer"))
    }

    pub fn decode(&self, g: &mut Graph, h: Var) -> Result<Var> {
        self.decoder.forward(g, &self.params, h)
    }

    /// Decoded predictions at times `1..=horizon` from frozen history latents.
    pub fn forecast(&self, g: &mut Graph, history: &[Tensor]) -> Result<Vec<Var>> {
        let hs: Vec<Var> = history.iter().map(|h| g.input(h.clone())).collect();
        let h0 = self.encode_history(g, &hs)?;
        let times: Vec<f64> = (1..=self.config.horizon).map(|t| t as f64).collect();
        let states = integrate(g, h0, &times, self.config.solver, self.config.substeps, |g, h| {
            self.rhs(g, h)
        })?;
        states.into_iter().map(|s| self.decode(g, s)).collect()
    }

    /// `Σ‖θ‖²` over all dynamics weights.
    pub fn weight_norm_sq(&self) -> f64 {
        self.params.sum_sq()
    }
}

fn check_state(g: &Graph, h: Var, index: usize, t: f64) -> Result<()> {
    let v = g.value(h);
    let max = v.max_abs();
    if !v.is_finite() || max > 1e150 {
        return Err(SparkError::numeric(
            "integrate",
            format!("state blew up at time index {index} (t = {t}), max |H| = {max:e}"),
        ));
    }
    Ok(())
}

/// Fixed-step integration from `t = 0` through `times`, returning the state at
/// each requested time. Each unit of time takes `substeps` steps.
pub fn integrate<F>(
    g: &mut Graph,
    h0: Var,
    times: &[f64],
    solver: Solver,
    substeps: usize,
    mut f: F,
) -> Result<Vec<Var>>
where
    F: FnMut(&mut Graph, Var) -> Result<Var>,
{
    if substeps == 0 {
        return Err(SparkError::Config("integration needs at least one substep".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut h = h0;
    let mut t_prev = 0.0;
    for (k, &t) in times.iter().enumerate() {
        if !(t > t_prev) {
            return Err(SparkError::Contract(format!(
                "integration times must increase strictly, got {t} after {t_prev}"
            )));
        }
        let span = t - t_prev;
        let steps = ((span * substeps as f64).round() as usize).max(1);
        let dt = span / steps as f64;
        for _ in 0..steps {
            h = match solver {
                Solver::Euler => {
                    let k1 = f(g, h)?;
                    let inc = g.scale(k1, dt);
                    g.add(h, inc)?
                }
                Solver::Rk4 => {
                    let k1 = f(g, h)?;
                    let s1 = g.scale(k1, 0.5 * dt);
                    let y2 = g.add(h, s1)?;
                    let k2 = f(g, y2)?;
                    let s2 = g.scale(k2, 0.5 * dt);
                    let y3 = g.add(h, s2)?;
                    let k3 = f(g, y3)?;
                    let s3 = g.scale(k3, dt);
                    let y4 = g.add(h, s3)?;
                    let k4 = f(g, y4)?;
                    let k2x2 = g.scale(k2, 2.0);
                    let k3x2 = g.scale(k3, 2.0);
                    let a = g.add(k1, k2x2)?;
                    let b = g.add(a, k3x2)?;
                    let c = g.add(b, k4)?;
                    let inc = g.scale(c, dt / 6.0);
                    g.add(h, inc)?
                }
            };
            check_state(g, h, k, t)?;
        }
        out.push(h);
        t_prev = t;
    }
    Ok(out)
}

/// Mean squared error over every entry of every prediction.
pub fn forecast_loss(g: &mut Graph, preds: &[Var], targets: &[Var]) -> Result<Var> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(SparkError::shape(
            "forecast_loss",
            format!("{} predictions against {} targets", preds.len(), targets.len()),
        ));
    }
    let count = (g.value(preds[0]).numel() * preds.len()) as f64;
    let mut total: Option<Var> = None;
    for (&p, &y) in preds.iter().zip(targets) {
        let d = g.sub(p, y)?;
        let sq = g.square(d);
        let s = g.sum(sq);
        total = Some(match total {
            Some(t) => g.add(t, s)?,
            None => s,
        });
    }
    Ok(g.scale(total.expect("non-empty"), 1.0 / count))
}

/// One training or evaluation window of an episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub episode: usize,
    pub start: usize,
}

pub fn episode_windows(ds: &EpisodeDataset, episodes: &[usize], cfg: &DynamicsConfig) -> Vec<Window> {
    let mut out = Vec::new();
    for &e in episodes {
        let len = ds.episodes[e].len();
        let mut s = 0;
        while s + cfg.window_len() <= len {
            out.push(Window { episode: e, start: s });
            s += cfg.window_stride;
        }
    }
    out
}

/// In-domain episodes split into (training, validation).
pub fn holdout_split(ds: &EpisodeDataset, holdout_every: usize) -> (Vec<usize>, Vec<usize>) {
    let ids = ds.indices(Split::InDomain);
    if holdout_every == 0 {
        return (ids, Vec::new());
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (pos, e) in ids.into_iter().enumerate() {
        if (pos + 1) % holdout_every == 0 {
            val.push(e);
        } else {
            train.push(e);
        }
    }
    (train, val)
}

/// Frozen encoder latents, computed once per episode on first use.
pub struct LatentCache<'a> {
    ds: &'a EpisodeDataset,
    upstream: &'a Upstream,
    latents: Vec<Option<Vec<Tensor>>>,
}

impl<'a> LatentCache<'a> {
    pub fn new(ds: &'a EpisodeDataset, upstream: &'a Upstream) -> Self {
        Self {
            ds,
            upstream,
            latents: vec![None; ds.episodes.len()],
        }
    }

    pub fn prepare(&mut self, episodes: &[usize], threads: usize) -> Result<()> {
        let missing: Vec<usize> = episodes
            .iter()
            .copied()
            .filter(|&e| self.latents[e].is_none())
            .collect();
        let (ds, up) = (self.ds, self.upstream);
        let encoded = ordered_map(&missing, threads, |&e| {
            let delta = param_features(&ds.episodes[e].params);
            (0..ds.episodes[e].len())
                .map(|t| up.encode_value(&ds.normalized_frame(e, t), &delta))
                .collect::<Result<Vec<_>>>()
        })?;
        for (e, lat) in missing.into_iter().zip(encoded) {
            self.latents[e] = Some(lat);
        }
        Ok(())
    }

    pub fn episode(&self, e: usize) -> &[Tensor] {
        self.latents[e].as_deref().expect("latents prepared before use")
    }
}

/// Normalized target frames of a window as `[N, d]` tensors.
pub fn window_targets(ds: &EpisodeDataset, w: Window, cfg: &DynamicsConfig) -> Result<Vec<Tensor>> {
    let (n, d) = (ds.nodes(), ds.channel_count());
    (0..cfg.horizon)
        .map(|k| Tensor::new(vec![n, d], ds.normalized_frame(w.episode, w.start + cfg.history + k)))
        .collect()
}

/// Predicted normalized frames for one window, without augmentation.
pub fn predict_window(model: &DynamicsModel, cache: &LatentCache, w: Window) -> Result<Vec<Tensor>> {
    let hist = &cache.episode(w.episode)[w.start..w.start + model.config.history];
    let mut g = Graph::new();
    let preds = model.forecast(&mut g, hist)?;
    Ok(preds.into_iter().map(|p| g.value(p).clone()).collect())
}

fn window_mse(preds: &[Tensor], targets: &[Tensor]) -> f64 {
    let mut s = 0.0;
    let mut n = 0usize;
    for (p, y) in preds.iter().zip(targets) {
        s += p
            .data()
            .iter()
            .zip(y.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        n += p.numel();
    }
    s / n as f64
}

pub fn evaluate_windows(
    model: &DynamicsModel,
    ds: &EpisodeDataset,
    cache: &LatentCache,
    windows: &[Window],
    threads: usize,
) -> Result<f64> {
    if windows.is_empty() {
        return Err(SparkError::Contract("no windows to evaluate".into()));
    }
    let per = ordered_map(windows, threads, |&w| {
        let preds = predict_window(model, cache, w)?;
        Ok::<_, SparkError>(window_mse(&preds, &window_targets(ds, w, &model.config)?))
    })?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// CRC32 over the bytes of every frozen tensor.
pub fn frozen_checksum(upstream: &Upstream, codebook: &Codebook) -> u32 {
    let mut h = crc32fast::Hasher::new();
    for (_, name, t) in upstream.params.iter() {
        h.update(name.as_bytes());
        for v in t.data() {
            h.update(&v.to_le_bytes());
        }
    }
    for v in codebook.entries.data() {
        h.update(&v.to_le_bytes());
    }
    h.finalize()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    /// Scheduled augmentation probability for this epoch.
    pub aug_ratio: f64,
    /// Fraction of windows actually augmented.
    pub realized_aug: f64,
    pub wallclock: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: DynamicsModel,
    pub history: Vec<EpochMetrics>,
    pub aug_calls: usize,
    pub tau: Option<f64>,
    /// Epoch whose weights were returned.
    pub selected_epoch: usize,
}

struct SampleResult {
    grads: Gradients,
    mse: f64,
}

/// Train the forecaster on in-domain windows with the encoder and codebook
/// frozen. `augment = None` disables augmentation entirely.
#[allow(clippy::too_many_arguments)]
pub fn train_dynamics(
    ds: &EpisodeDataset,
    grid: &GridGraph,
    upstream: &Upstream,
    codebook: &Codebook,
    cfg: &DynamicsConfig,
    augment: Option<&AugmentConfig>,
    seed: u64,
    threads: usize,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if upstream.config.latent_dim != codebook.dim() {
        return Err(SparkError::Incompatible(format!(
            "encoder latent width {} differs from codebook width {}",
            upstream.config.latent_dim,
            codebook.dim()
        )));
    }
    let before = frozen_checksum(upstream, codebook);
    let (train_eps, val_eps) = holdout_split(ds, cfg.holdout_every);
    let mut train = episode_windows(ds, &train_eps, cfg);
    if train.is_empty() {
        return Err(SparkError::Config(format!(
            "no training windows: episodes need at least {} frames",
            cfg.window_len()
        )));
    }
    let val = {
        let v = episode_windows(ds, &val_eps, cfg);
        if v.is_empty() {
            train.clone()
        } else {
            v
        }
    };
    let mut cache = LatentCache::new(ds, upstream);
    cache.prepare(&train_eps, threads)?;
    cache.prepare(&val_eps, threads)?;

    let mut init_rng = SeedStream::named(seed, "dynamics-init");
    let mut model = DynamicsModel::new(cfg, grid, upstream.config.latent_dim, ds.channel_count(), &mut init_rng)?;
    let mut opt = Adam::new(&model.params, AdamConfig::with_lr(cfg.lr))?;
    let mut shuffle_rng = SeedStream::named(seed, "dynamics-shuffle");
    let mut curriculum_rng = SeedStream::named(seed, "curriculum");

    let (augmenter, curriculum, tau) = match augment {
        Some(a) => {
            a.validate(Some(codebook.size()))?;
            let tau = match a.tau {
                Some(t) => t,
                None => calibrate_tau(train_eps.iter().flat_map(|&e| cache.episode(e).iter()), codebook),
            };
            log::info!("augmentation {:?}, k = {}, tau = {tau:.4e}", a.mode, a.k);
            (
                Some(Augmenter::new(codebook, a, tau)?),
                Some(a.curriculum.resolve(cfg.epochs)),
                Some(tau),
            )
        }
        None => (None, None, None),
    };
    let started = Instant::now();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ParamSet)> = None;
    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut train);
        let ratio = curriculum.map_or(0.0, |c| curriculum_ratio(epoch, &c));
        let decisions = match augmenter {
            Some(_) => augment_decisions(&mut curriculum_rng, train.len(), ratio),
            None => vec![false; train.len()],
        };
        let samples: Vec<(Window, bool)> = train.iter().copied().zip(decisions.iter().copied()).collect();
        let mut mse_sum = 0.0;
        for batch in samples.chunks(cfg.batch_size) {
            let results = ordered_map(batch, threads, |&(w, aug)| {
                let raw = &cache.episode(w.episode)[w.start..w.start + cfg.history];
                let hist: Vec<Tensor> = match (&augmenter, aug) {
                    (Some(a), true) => raw.iter().map(|h| a.apply(h)).collect::<Result<_>>()?,
                    _ => raw.to_vec(),
                };
                let mut g = Graph::new();
                let preds = model.forecast(&mut g, &hist)?;
                let targets: Vec<Var> = window_targets(ds, w, cfg)?.into_iter().map(|t| g.input(t)).collect();
                let loss = forecast_loss(&mut g, &preds, &targets)?;
                let mse = g.value(loss).item();
                if !mse.is_finite() {
                    return Err(SparkError::Diverged {
                        epoch,
                        detail: format!("forecast loss became {mse}"),
                    });
                }
                Ok(SampleResult {
                    grads: g.backward(loss)?,
                    mse,
                })
            })?;
            let mut grads = Gradients::default();
            let count = results.len() as f64;
            for r in results {
                mse_sum += r.mse;
                grads.accumulate(r.grads);
            }
            grads.scale(1.0 / count);
            if cfg.lambda_reg > 0.0 {
                for (id, _, t) in model.params.iter() {
                    let reg = t.scale(2.0 * cfg.lambda_reg);
                    match grads.by_param.get_mut(&id) {
                        Some(gt) => gt.add_assign(&reg),
                        None => {
                            grads.by_param.insert(id, reg);
                        }
                    }
                }
            }
            opt.update(&mut model.params, &grads)?;
            if !model.params.iter().all(|(_, _, t)| t.is_finite()) {
                return Err(SparkError::Diverged {
                    epoch,
                    detail: "non-finite dynamics weights after a step".into(),
                });
            }
        }
        let train_mse = mse_sum / samples.len() as f64;
        let val_mse = evaluate_windows(&model, ds, &cache, &val, threads)?;
        let realized = decisions.iter().filter(|&&d| d).count() as f64 / decisions.len() as f64;
        log::info!("epoch {epoch}: train {train_mse:.6} val {val_mse:.6} aug ratio {ratio:.3}");
        if cfg.keep_best && best.as_ref().is_none_or(|(b, _, _)| val_mse < *b) {
            best = Some((val_mse, epoch, model.params.clone()));
        }
        history.push(EpochMetrics {
            epoch,
            train_mse,
            val_mse,
            aug_ratio: ratio,
            realized_aug: realized,
            wallclock: started.elapsed().as_secs_f64(),
        });
    }
    if frozen_checksum(upstream, codebook) != before {
        return Err(SparkError::Contract(
            "frozen encoder or codebook changed during training".into(),
        ));
    }
    let mut selected_epoch = cfg.epochs - 1;
    if let Some((_, epoch, params)) = best {
        model.params = params;
        selected_epoch = epoch;
    }
    Ok(TrainOutcome {
        model,
        history,
        aug_calls: augmenter.as_ref().map_or(0, |a| a.calls()),
        tau,
        selected_epoch,
    })
}
