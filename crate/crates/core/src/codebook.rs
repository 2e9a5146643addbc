//! Discrete state dictionary: nearest-code quantization and reconstruction
//! pretraining of encoder, decoder and codebook.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::datagen::{param_features, EpisodeDataset, Split};
use crate::encoder::{EncoderConfig, Upstream};
use crate::error::{Result, SparkError};
use crate::grid::GridGraph;
use crate::optim::{Adam, AdamConfig};
use crate::parallel::ordered_map;
use crate::params::{Gradients, ParamId, ParamSet};
use crate::rng::SeedStream;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    /// Commitment weight.
    pub mu: f64,
    /// Codebook weight.
    pub gamma: f64,
    pub epochs: usize,
    /// Frames per optimizer step.
    pub batch_size: usize,
    pub lr: f64,
    pub codebook_size: usize,
    /// Use every `frame_stride`-th frame of each episode.
    pub frame_stride: usize,
    /// Exponential-moving-average codebook updates instead of the gradient of the codebook term.
    pub ema: bool,
    pub ema_decay: f64,
    pub reseed_dead_codes: bool,
    pub encoder: EncoderConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            mu: 0.25,
            gamma: 1.0,
            epochs: 6,
            batch_size: 8,
            lr: 3e-3,
            codebook_size: 64,
            frame_stride: 2,
            ema: false,
            ema_decay: 0.99,
            reseed_dead_codes: false,
            encoder: EncoderConfig::default(),
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if !(self.mu >= 0.0 && self.gamma >= 0.0) {
            return Err(SparkError::Config(
                "pretrain.mu and pretrain.gamma must be non-negative".into(),
            ));
        }
        if self.codebook_size < 2 {
            return Err(SparkError::Config("pretrain.codebook_size must be at least 2".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.frame_stride == 0 {
            return Err(SparkError::Config(
                "pretrain.epochs, batch_size and frame_stride must be positive".into(),
            ));
        }
        if !(self.lr > 0.0) {
            return Err(SparkError::Config("pretrain.lr must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(SparkError::Config("pretrain.ema_decay must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmaState {
    pub cluster_size: Vec<f64>,
    pub sums: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    /// `M×D` entries.
    pub entries: Tensor,
    pub usage: Vec<u64>,
    pub ema: Option<EmaState>,
}

/// Index of the nearest row of `entries` (`m×d`) to `q`; ties go to the lowest index.
pub fn nearest_code(q: &[f64], entries: &[f64], d: usize) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, e) in entries.chunks_exact(d).enumerate() {
        let dist: f64 = q.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist < best_d {
            best_d = dist;
            best = j;
        }
    }
    best
}

impl Codebook {
    pub fn new(entries: Tensor) -> Result<Self> {
        if entries.shape().len() != 2 {
            return Err(SparkError::shape(
                "codebook",
                format!("entries must be M×D, got {:?}", entries.shape()),
            ));
        }
        if entries.rows() < 2 {
            return Err(SparkError::Config(format!(
                "codebook needs at least 2 entries, got {}",
                entries.rows()
            )));
        }
        if !entries.is_finite() {
            return Err(SparkError::numeric("codebook", "non-finite entry"));
        }
        let m = entries.rows();
        Ok(Self {
            entries,
            usage: vec![0; m],
            ema: None,
        })
    }

    pub fn size(&self) -> usize {
        self.entries.rows()
    }

    pub fn dim(&self) -> usize {
        self.entries.cols()
    }

    pub fn entry(&self, j: usize) -> &[f64] {
        self.entries.row(j)
    }

    fn check_query(&self, h: &Tensor) -> Result<()> {
        if h.cols() != self.dim() {
            return Err(SparkError::shape(
                "quantize",
                format!("latents {:?} against a codebook of width {}", h.shape(), self.dim()),
            ));
        }
        if !h.is_finite() {
            return Err(SparkError::numeric("quantize", "latent contains NaN or infinity"));
        }
        Ok(())
    }

    /// Nearest-code indices for every row of `h`.
    pub fn assign(&self, h: &Tensor) -> Result<Vec<usize>> {
        self.check_query(h)?;
        let d = self.dim();
        Ok(h.data()
            .chunks(d)
            .map(|q| nearest_code(q, self.entries.data(), d))
            .collect())
    }

    /// `(indices, z)` with `z[i] = e[indices[i]]`.
    pub fn quantize(&self, h: &Tensor) -> Result<(Vec<usize>, Tensor)> {
        let idx = self.assign(h)?;
        let z = self.gather(&idx, h.shape())?;
        Ok((idx, z))
    }

    fn gather(&self, idx: &[usize], shape: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(idx.len() * self.dim());
        for &j in idx {
            data.extend_from_slice(self.entry(j));
        }
        Tensor::new(shape.to_vec(), data)
    }

    pub fn record_usage(&mut self, idx: &[usize]) {
        for &j in idx {
            self.usage[j] += 1;
        }
    }

    pub fn reset_usage(&mut self) {
        self.usage.iter_mut().for_each(|u| *u = 0);
    }

    pub fn perplexity(&self) -> Result<f64> {
        codebook_perplexity(&self.usage)
    }

    /// Mean squared distance from each entry to its nearest other entry.
    pub fn mean_nearest_sq_distance(&self) -> f64 {
        let m = self.size();
        let mut total = 0.0;
        for i in 0..m {
            let best = (0..m)
                .filter(|&j| j != i)
                .map(|j| sq_dist(self.entry(i), self.entry(j)))
                .fold(f64::INFINITY, f64::min);
            total += best;
        }
        total / m as f64
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(entropy)` of the normalized usage distribution.
pub fn codebook_perplexity(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(SparkError::Contract("perplexity of an all-zero usage vector".into()));
    }
    let total = total as f64;
    let entropy: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    Ok(entropy.exp())
}

/// Tape nodes produced by quantizing an encoder output.
pub struct Quantized {
    pub indices: Arc<[usize]>,
    /// Raw codebook rows (gradient flows to the codebook).
    pub z: Var,
    /// Same values as `z`, gradient passed straight through to `h`.
    pub z_st: Var,
}

pub fn quantize_on_tape(g: &mut Graph, h: Var, codes: Var) -> Result<Quantized> {
    let entries = g.value(codes);
    let cb_dim = entries.cols();
    let hv = g.value(h);
    if hv.cols() != cb_dim {
        return Err(SparkError::shape(
            "quantize",
            format!("latents {:?} against a codebook of width {cb_dim}", hv.shape()),
        ));
    }
    if !hv.is_finite() {
        return Err(SparkError::numeric("quantize", "latent contains NaN or infinity"));
    }
    let indices: Arc<[usize]> = hv
        .data()
        .chunks(cb_dim)
        .map(|q| nearest_code(q, entries.data(), cb_dim))
        .collect();
    let z = g.gather(codes, Arc::clone(&indices))?;
    let z_st = g.straight_through(h, z)?;
    Ok(Quantized { indices, z, z_st })
}

/// Loss terms for one observation, each already averaged over nodes.
pub struct LossTerms {
    pub total: Var,
    pub recon: Var,
    pub commit: Var,
    pub codebook: Var,
}

/// Reconstruction + `μ`·commitment + `γ`·codebook loss, per node:
/// `‖x̂−x‖² + μ‖h − sg z‖² + γ‖sg h − z‖²` averaged over rows.
pub fn pretrain_loss(g: &mut Graph, x: Var, xhat: Var, h: Var, z: Var, mu: f64, gamma: f64) -> Result<LossTerms> {
    let rows = g.value(x).rows() as f64;
    let per_row_sum = |g: &mut Graph, a: Var, b: Var| -> Result<Var> {
        let d = g.sub(a, b)?;
        let sq = g.square(d);
        let s = g.sum(sq);
        Ok(g.scale(s, 1.0 / rows))
    };
    if g.value(h).rows() as f64 != rows {
        return Err(SparkError::shape(
            "pretrain_loss",
            "latents and observations differ in row count",
        ));
    }
    let recon = per_row_sum(g, xhat, x)?;
    let zs = g.stop_gradient(z);
    let commit = per_row_sum(g, h, zs)?;
    let hs = g.stop_gradient(h);
    let codebook = per_row_sum(g, hs, z)?;
    let c = g.scale(commit, mu);
    let cb = g.scale(codebook, gamma);
    let t = g.add(recon, c)?;
    let total = g.add(t, cb)?;
    Ok(LossTerms {
        total,
        recon,
        commit,
        codebook,
    })
}

/// k-means++ seeding of `m` centers from the rows of `points`.
pub fn kmeans_pp(points: &Tensor, m: usize, rng: &mut SeedStream) -> Result<Tensor> {
    let d = points.cols();
    let n = points.rows();
    if n == 0 || m == 0 {
        return Err(SparkError::Contract(
            "k-means++ needs points and at least one center".into(),
        ));
    }
    let mut centers: Vec<f64> = Vec::with_capacity(m * d);
    centers.extend_from_slice(points.row(rng.below(n)));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), &centers[..d])).collect();
    for _ in 1..m {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.uniform() * total;
            let mut chosen = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            rng.below(n)
        };
        let c = points.row(pick).to_vec();
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(points.row(i), &c));
        }
        centers.extend(c);
    }
    Tensor::new(vec![m, d], centers)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss: f64,
    pub recon: f64,
    pub commit: f64,
    pub codebook: f64,
    pub perplexity: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct PretrainOutcome {
    pub upstream: Upstream,
    pub codebook: Codebook,
    /// Mean loss over the first batch before any update.
    pub initial_loss: f64,
    pub history: Vec<EpochLoss>,
}

impl PretrainOutcome {
    pub fn final_loss(&self) -> f64 {
        self.history.last().map_or(self.initial_loss, |e| e.loss)
    }
}

struct FrameResult {
    grads: Gradients,
    loss: [f64; 4],
    indices: Arc<[usize]>,
    latent: Tensor,
}

/// The codebook's tape id, one past the upstream parameters.
fn codebook_param(upstream: &Upstream) -> ParamId {
    ParamId(upstream.params.len())
}

fn frame_step(
    up: &Upstream,
    codes: &Tensor,
    cfg: &PretrainConfig,
    x: &[f64],
    delta: &[f64],
    want_grads: bool,
) -> Result<FrameResult> {
    let mut g = Graph::new();
    let h = up.encode(&mut g, x, delta)?;
    let cb = g.param(codebook_param(up), codes.clone());
    let q = quantize_on_tape(&mut g, h, cb)?;
    let xhat = up.reconstruct(&mut g, q.z_st)?;
    let xv = g.input(Tensor::new(g.value(xhat).shape().to_vec(), x.to_vec())?);
    let terms = pretrain_loss(&mut g, xv, xhat, h, q.z, cfg.mu, cfg.gamma)?;
    let loss = [
        g.value(terms.total).item(),
        g.value(terms.recon).item(),
        g.value(terms.commit).item(),
        g.value(terms.codebook).item(),
    ];
    let grads = if want_grads && loss[0].is_finite() {
        g.backward(terms.total)?
    } else {
        Gradients::default()
    };
    Ok(FrameResult {
        grads,
        loss,
        indices: q.indices,
        latent: g.value(h).clone(),
    })
}

fn run_frames(
    up: &Upstream,
    codes: &Tensor,
    cfg: &PretrainConfig,
    ds: &EpisodeDataset,
    batch: &[(usize, usize)],
    threads: usize,
    want_grads: bool,
) -> Result<Vec<FrameResult>> {
    ordered_map(batch, threads, |&(e, t)| {
        let x = ds.normalized_frame(e, t);
        let delta = param_features(&ds.episodes[e].params);
        frame_step(up, codes, cfg, &x, &delta, want_grads)
    })
}

/// Frames `(episode, t)` used for pretraining: in-domain episodes only.
pub fn pretrain_frames(ds: &EpisodeDataset, stride: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for e in ds.indices(Split::InDomain) {
        for t in (0..ds.episodes[e].len()).step_by(stride.max(1)) {
            out.push((e, t));
        }
    }
    out
}

/// Reconstruction pretraining: encode, quantize, reconstruct, minimize the
/// combined loss over all in-domain frames.
pub fn pretrain(
    ds: &EpisodeDataset,
    grid: &GridGraph,
    cfg: &PretrainConfig,
    seed: u64,
    threads: usize,
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    if grid.nodes() != ds.nodes() || grid.height() != ds.height {
        return Err(SparkError::Incompatible(format!(
            "grid {}×{} does not match dataset {}×{}",
            grid.height(),
            grid.width(),
            ds.height,
            ds.width
        )));
    }
    let mut frames = pretrain_frames(ds, cfg.frame_stride);
    if frames.is_empty() {
        return Err(SparkError::Config(
            "dataset has no in-domain episodes to pretrain on".into(),
        ));
    }
    let param_dim = ds.episodes[frames[0].0].params.len();
    let mut init_rng = SeedStream::named(seed, "init");
    let mut up = Upstream::new(&cfg.encoder, grid, ds.channel_count(), param_dim, &mut init_rng)?;
    let mut shuffle_rng = SeedStream::named(seed, "pretrain-shuffle");
    let mut code_rng = SeedStream::named(seed, "codebook");
    shuffle_rng.shuffle(&mut frames);

    // seed the codebook from first-batch latents
    let first: Vec<(usize, usize)> = frames.iter().take(cfg.batch_size).copied().collect();
    let mut latents = Vec::new();
    for &(e, t) in &first {
        let h = up.encode_value(&ds.normalized_frame(e, t), &param_features(&ds.episodes[e].params))?;
        latents.extend_from_slice(h.data());
    }
    let d = cfg.encoder.latent_dim;
    let pool = Tensor::new(vec![latents.len() / d, d], latents)?;
    let mut codebook = Codebook::new(kmeans_pp(&pool, cfg.codebook_size, &mut code_rng)?)?;
    if cfg.ema {
        codebook.ema = Some(EmaState {
            cluster_size: vec![1.0; cfg.codebook_size],
            sums: codebook.entries.clone(),
        });
    }

    let initial = run_frames(&up, &codebook.entries, cfg, ds, &first, threads, false)?;
    let initial_loss = initial.iter().map(|f| f.loss[0]).sum::<f64>() / initial.len() as f64;
    log::info!("pretrain: {} frames, initial loss {initial_loss:.6}", frames.len());

    let mut opt = Adam::new(&up.params, AdamConfig::with_lr(cfg.lr))?;
    let mut cb_set = ParamSet::new();
    let cb_id = cb_set.add("codebook", codebook.entries.clone())?;
    let mut cb_opt = Adam::new(&cb_set, AdamConfig::with_lr(cfg.lr))?;
    let cb_tape_id = codebook_param(&up);

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        if epoch > 0 {
            shuffle_rng.shuffle(&mut frames);
        }
        codebook.reset_usage();
        let mut sums = [0.0; 4];
        let mut last_latents: Option<Tensor> = None;
        for batch in frames.chunks(cfg.batch_size) {
            let results = run_frames(&up, &codebook.entries, cfg, ds, batch, threads, true)?;
            let mut grads = Gradients::default();
            let mut batch_loss = 0.0;
            for r in &results {
                if !r.loss[0].is_finite() {
                    return Err(SparkError::Diverged {
                        epoch,
                        detail: format!("pretraining loss became {}", r.loss[0]),
                    });
                }
                batch_loss += r.loss[0];
                for (s, l) in sums.iter_mut().zip(r.loss) {
                    *s += l;
                }
                codebook.record_usage(&r.indices);
            }
            let count = results.len();
            let mut results = results;
            for r in results.iter_mut() {
                grads.accumulate(std::mem::take(&mut r.grads));
            }
            grads.scale(1.0 / count as f64);
            let cb_grad = grads
                .by_param
                .remove(&cb_tape_id)
                .unwrap_or_else(|| Tensor::zeros(codebook.entries.shape()));
            opt.update(&mut up.params, &grads)?;
            if cfg.ema {
                ema_update(&mut codebook, &results, cfg.ema_decay)?;
                cb_set.set(cb_id, codebook.entries.clone())?;
            } else {
                let mut cg = Gradients::default();
                cg.by_param.insert(cb_id, cb_grad);
                cb_opt.update(&mut cb_set, &cg)?;
                codebook.entries = cb_set.get(cb_id).clone();
            }
            if !up.params.iter().all(|(_, _, t)| t.is_finite()) || !codebook.entries.is_finite() {
                return Err(SparkError::Diverged {
                    epoch,
                    detail: format!("non-finite weights after a step (batch loss {batch_loss})"),
                });
            }
            last_latents = results.last().map(|r| r.latent.clone());
        }
        let n = frames.len() as f64;
        let perplexity = codebook.perplexity()?;
        let entry = EpochLoss {
            epoch,
            loss: sums[0] / n,
            recon: sums[1] / n,
            commit: sums[2] / n,
            codebook: sums[3] / n,
            perplexity,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "pretrain epoch {epoch}: loss {:.6} recon {:.6} perplexity {:.2}",
            entry.loss,
            entry.recon,
            entry.perplexity
        );
        history.push(entry);
        if cfg.reseed_dead_codes && epoch + 1 < cfg.epochs {
            if let Some(lat) = &last_latents {
                let reseeded = reseed_dead(&mut codebook, lat, &mut code_rng);
                if reseeded > 0 {
                    log::info!("reseeded {reseeded} unused codes");
                    cb_set.set(cb_id, codebook.entries.clone())?;
                }
            }
        }
    }
    let last = history.last().expect("at least one epoch");
    if last.perplexity < 0.05 * cfg.codebook_size as f64 {
        log::warn!(
            "codebook collapse: perplexity {:.2} below 5% of {} codes",
            last.perplexity,
            cfg.codebook_size
        );
    }
    Ok(PretrainOutcome {
        upstream: up,
        codebook,
        initial_loss,
        history,
    })
}

fn ema_update(cb: &mut Codebook, results: &[FrameResult], decay: f64) -> Result<()> {
    let (m, d) = (cb.size(), cb.dim());
    let mut counts = vec![0.0; m];
    let mut sums = vec![0.0; m * d];
    for r in results {
        for (row, &j) in r.latent.data().chunks(d).zip(r.indices.iter()) {
            counts[j] += 1.0;
            for (s, v) in sums[j * d..(j + 1) * d].iter_mut().zip(row) {
                *s += v;
            }
        }
    }
    let state = cb
        .ema
        .as_mut()
        .ok_or_else(|| SparkError::Contract("EMA update without EMA state".into()))?;
    for j in 0..m {
        state.cluster_size[j] = decay * state.cluster_size[j] + (1.0 - decay) * counts[j];
    }
    for (s, v) in state.sums.data_mut().iter_mut().zip(&sums) {
        *s = decay * *s + (1.0 - decay) * v;
    }
    let total: f64 = state.cluster_size.iter().sum();
    let eps = 1e-5;
    let entries = cb.entries.data_mut();
    for j in 0..m {
        let smoothed = (state.cluster_size[j] + eps) / (total + m as f64 * eps) * total;
        for k in 0..d {
            entries[j * d + k] = state.sums.data()[j * d + k] / smoothed;
        }
    }
    Ok(())
}

/// Replace codes unused since the last reset by random rows of `latents`.
pub fn reseed_dead(cb: &mut Codebook, latents: &Tensor, rng: &mut SeedStream) -> usize {
    let d = cb.dim();
    let mut count = 0;
    for j in 0..cb.size() {
        if cb.usage[j] == 0 {
            let src = latents.row(rng.below(latents.rows())).to_vec();
            cb.entries.data_mut()[j * d..(j + 1) * d].copy_from_slice(&src);
            count += 1;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_codes() -> Codebook {
        Codebook::new(Tensor::matrix(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap()).unwrap()
    }

    #[test]
    fn nearest_of_two() {
        let cb = two_codes();
        let (idx, z) = cb.quantize(&Tensor::matrix(1, 2, vec![0.9, 1.2]).unwrap()).unwrap();
        assert_eq!(idx, vec![1]);
        assert_eq!(z.data(), &[1.0, 1.0]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let cb = two_codes();
        let (idx, _) = cb.quantize(&Tensor::matrix(1, 2, vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(idx, vec![0]);
    }

    #[test]
    fn quantize_errors() {
        let cb = two_codes();
        assert!(cb.quantize(&Tensor::matrix(1, 3, vec![0.0; 3]).unwrap()).is_err());
        assert!(cb
            .quantize(&Tensor::matrix(1, 2, vec![f64::NAN, 0.0]).unwrap())
            .is_err());
        assert!(Codebook::new(Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn perplexity_values() {
        assert!((codebook_perplexity(&[5; 64]).unwrap() - 64.0).abs() < 1e-9);
        assert!((codebook_perplexity(&[0, 7, 0]).unwrap() - 1.0).abs() < 1e-15);
        let h: f64 = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert!((codebook_perplexity(&[3, 1, 0, 0]).unwrap() - h.exp()).abs() < 1e-12);
        assert!((codebook_perplexity(&[3, 1, 0, 0]).unwrap() - 1.7548).abs() < 1e-4);
        assert!(codebook_perplexity(&[0, 0]).is_err());
    }

    #[test]
    fn unit_offset_loss_is_mu_plus_gamma() {
        let mut g = Graph::new();
        let x = g.input(Tensor::matrix(3, 1, vec![0.1, 0.2, 0.3]).unwrap());
        let xhat = g.input(Tensor::matrix(3, 1, vec![0.1, 0.2, 0.3]).unwrap());
        let h = g.input(Tensor::matrix(3, 2, vec![1.0, 0.0, 2.0, 1.0, 0.0, 3.0]).unwrap());
        let z = g.input(Tensor::matrix(3, 2, vec![0.0, 0.0, 2.0, 0.0, 0.0, 2.0]).unwrap());
        let t = pretrain_loss(&mut g, x, xhat, h, z, 0.25, 1.0).unwrap();
        assert!((g.value(t.total).item() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn kmeans_pp_picks_distinct_clusters() {
        let pts = Tensor::matrix(6, 1, vec![0.0, 0.01, 10.0, 10.01, 20.0, 20.01]).unwrap();
        let c = kmeans_pp(&pts, 3, &mut SeedStream::new(3)).unwrap();
        let mut v: Vec<f64> = c.data().iter().map(|x| x.round()).collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, vec![0.0, 10.0, 20.0]);
    }
}
