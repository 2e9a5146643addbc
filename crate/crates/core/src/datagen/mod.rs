//! Synthetic PDE trajectories with controllable physical parameters.

pub mod io;
pub mod navier_stokes;
pub mod reaction_diffusion;
pub mod split;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SparkError};
use crate::grid::GridGraph;
use crate::rng::derive_seed;
use crate::tensor::Tensor;

pub use navier_stokes::NavierStokesConfig;
pub use reaction_diffusion::ReactionDiffusionConfig;
pub use split::{make_ood_split, OodRule, ParamPartition, Split};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Vorticity; `δ = [ν]`.
    #[default]
    NavierStokes,
    /// Species `(u, v)`; `δ = [D_u, D_v]`.
    ReactionDiffusion,
}

impl GeneratorKind {
    pub fn channel_names(self) -> Vec<String> {
        match self {
            GeneratorKind::NavierStokes => vec!["vorticity".into()],
            GeneratorKind::ReactionDiffusion => vec!["u".into(), "v".into()],
        }
    }

    pub fn param_len(self) -> usize {
        match self {
            GeneratorKind::NavierStokes => 1,
            GeneratorKind::ReactionDiffusion => 2,
        }
    }

    /// The dataset container stores channel names rather than a generator id.
    pub fn from_channels(names: &[String]) -> Option<Self> {
        [GeneratorKind::NavierStokes, GeneratorKind::ReactionDiffusion]
            .into_iter()
            .find(|g| g.channel_names() == names)
    }
}

/// Features fed to the parameter branch of the encoder: `log10 δ`.
///
/// Viscosities and diffusivities span many decades, so their logarithm is the
/// scale on which in- and out-of-domain values are comparable.
pub fn param_features(params: &[f64]) -> Vec<f64> {
    params.iter().map(|p| p.abs().max(1e-300).log10()).collect()
}

/// One trajectory under one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub params: Vec<f64>,
    /// `[T_total, N, d]`.
    pub frames: Tensor,
    pub generator: GeneratorKind,
    pub seed: u64,
    pub split: Split,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.frames.shape()[2]
    }

    /// Frame `t` as `N·d` node-major values.
    pub fn frame(&self, t: usize) -> &[f64] {
        let stride = self.nodes() * self.channels();
        &self.frames.data()[t * stride..(t + 1) * stride]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeDataset {
    pub height: usize,
    pub width: usize,
    pub channels: Vec<String>,
    /// Per-channel statistics over in-domain episodes only.
    pub stats: Vec<ChannelStats>,
    pub episodes: Vec<Episode>,
}

/// Channel statistics over the in-domain episodes. Channels with (near) zero
/// spread get `std = 1` so normalization stays finite.
pub fn in_domain_stats(episodes: &[Episode], channels: usize) -> Result<Vec<ChannelStats>> {
    let mut sum = vec![0.0; channels];
    let mut count = 0usize;
    for ep in episodes.iter().filter(|e| e.split == Split::InDomain) {
        for node in ep.frames.data().chunks(channels) {
            for (s, v) in sum.iter_mut().zip(node) {
                *s += v;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(SparkError::Config("dataset has no in-domain episodes".into()));
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let mut sq = vec![0.0; channels];
    for ep in episodes.iter().filter(|e| e.split == Split::InDomain) {
        for node in ep.frames.data().chunks(channels) {
            for c in 0..channels {
                sq[c] += (node[c] - mean[c]).powi(2);
            }
        }
    }
    Ok(mean
        .iter()
        .zip(sq)
        .map(|(&mean, s)| {
            let std = (s / count as f64).sqrt();
            ChannelStats {
                mean,
                std: if std > 1e-12 { std } else { 1.0 },
            }
        })
        .collect())
}

impl EpisodeDataset {
    pub fn new(height: usize, width: usize, channels: Vec<String>, episodes: Vec<Episode>) -> Result<Self> {
        for ep in &episodes {
            if ep.nodes() != height * width || ep.channels() != channels.len() {
                return Err(SparkError::shape(
                    "dataset",
                    format!(
                        "episode frames {:?} on a {height}×{width} grid with {} channels",
                        ep.frames.shape(),
                        channels.len()
                    ),
                ));
            }
            if !ep.frames.is_finite() {
                return Err(SparkError::numeric("dataset", "episode contains non-finite values"));
            }
        }
        let stats = in_domain_stats(&episodes, channels.len())?;
        Ok(Self {
            height,
            width,
            channels,
            stats,
            episodes,
        })
    }

    pub fn nodes(&self) -> usize {
        self.height * self.width
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn generator(&self) -> Option<GeneratorKind> {
        GeneratorKind::from_channels(&self.channels)
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.episodes.len())
            .filter(|&i| self.episodes[i].split == split)
            .collect()
    }

    /// Frame `t` of episode `e`, standardized with the in-domain statistics.
    pub fn normalized_frame(&self, e: usize, t: usize) -> Vec<f64> {
        let d = self.channel_count();
        self.episodes[e]
            .frame(t)
            .chunks(d)
            .flat_map(|node| node.iter().zip(&self.stats).map(|(v, s)| (v - s.mean) / s.std))
            .collect()
    }

    /// Largest absolute normalized value over in-domain episodes; the default
    /// dynamic range for SSIM and PSNR.
    pub fn normalized_max_abs(&self) -> f64 {
        let d = self.channel_count();
        let mut m: f64 = 0.0;
        for ep in self.episodes.iter().filter(|e| e.split == Split::InDomain) {
            for node in ep.frames.data().chunks(d) {
                for (v, s) in node.iter().zip(&self.stats) {
                    m = m.max(((v - s.mean) / s.std).abs());
                }
            }
        }
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub generator: GeneratorKind,
    /// Physical-parameter vectors, one trajectory family per entry.
    pub params: Vec<Vec<f64>>,
    pub ood_rule: OodRule,
    pub episodes_per_param: usize,
    pub navier_stokes: NavierStokesConfig,
    pub reaction_diffusion: ReactionDiffusionConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorKind::NavierStokes,
            params: vec![vec![1e-2], vec![3e-3], vec![1e-3], vec![3e-4], vec![1e-4], vec![3e-5]],
            ood_rule: OodRule::Explicit {
                out: vec![vec![1e-4], vec![3e-5]],
            },
            episodes_per_param: 4,
            navier_stokes: NavierStokesConfig::default(),
            reaction_diffusion: ReactionDiffusionConfig::default(),
        }
    }
}

impl DatasetConfig {
    pub fn frames(&self) -> usize {
        match self.generator {
            GeneratorKind::NavierStokes => self.navier_stokes.frames,
            GeneratorKind::ReactionDiffusion => self.reaction_diffusion.frames,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes_per_param == 0 {
            return Err(SparkError::Config(
                "dataset.episodes_per_param must be at least 1".into(),
            ));
        }
        if self.params.is_empty() {
            return Err(SparkError::Config("dataset.params is empty".into()));
        }
        let want = self.generator.param_len();
        if let Some(p) = self.params.iter().find(|p| p.len() != want) {
            return Err(SparkError::Config(format!(
                "dataset.params entry {p:?} has {} components, generator expects {want}",
                p.len()
            )));
        }
        Ok(())
    }
}

/// Run one episode.
pub fn simulate_episode(
    cfg: &DatasetConfig,
    grid: &GridGraph,
    params: &[f64],
    seed: u64,
    split: Split,
) -> Result<Episode> {
    let frames = match cfg.generator {
        GeneratorKind::NavierStokes => {
            let f = navier_stokes::simulate(grid, params[0], seed, &cfg.navier_stokes)?;
            let (t, n) = (f.shape()[0], f.shape()[1]);
            f.reshape(&[t, n, 1])?
        }
        GeneratorKind::ReactionDiffusion => {
            reaction_diffusion::simulate(grid, params[0], params[1], seed, &cfg.reaction_diffusion)?
        }
    };
    Ok(Episode {
        params: params.to_vec(),
        frames,
        generator: cfg.generator,
        seed,
        split,
    })
}

/// Generate every episode of `cfg`. Episodes are independent, so they are
/// spread over `threads` workers; the output order does not depend on the
/// thread count.
pub fn generate_dataset(
    cfg: &DatasetConfig,
    grid: &GridGraph,
    root_seed: u64,
    threads: usize,
) -> Result<EpisodeDataset> {
    cfg.validate()?;
    let partition = make_ood_split(&cfg.params, &cfg.ood_rule)?;
    let datagen_seed = derive_seed(root_seed, "datagen");
    let mut jobs = Vec::new();
    for p in &cfg.params {
        let split = if partition.out_domain.contains(p) {
            Split::OutDomain
        } else {
            Split::InDomain
        };
        for _ in 0..cfg.episodes_per_param {
            let idx = jobs.len();
            jobs.push((p.clone(), derive_seed(datagen_seed, &format!("episode-{idx}")), split));
        }
    }
    let threads = threads.max(1).min(jobs.len());
    let mut results: Vec<Option<Result<Episode>>> = (0..jobs.len()).map(|_| None).collect();
    if threads == 1 {
        for (slot, (p, seed, split)) in results.iter_mut().zip(&jobs) {
            *slot = Some(simulate_episode(cfg, grid, p, *seed, *split));
        }
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|worker| {
                    let jobs = &jobs;
                    s.spawn(move || {
                        (worker..jobs.len())
                            .step_by(threads)
                            .map(|i| (i, simulate_episode(cfg, grid, &jobs[i].0, jobs[i].1, jobs[i].2)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("datagen worker panicked") {
                    results[i] = Some(r);
                }
            }
        });
    }
    let episodes = results
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<Result<Vec<_>>>()?;
    EpisodeDataset::new(grid.height(), grid.width(), cfg.generator.channel_names(), episodes)
}
