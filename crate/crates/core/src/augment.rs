//! Codebook-guided latent augmentation and its curriculum schedule.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::codebook::{sq_dist, Codebook};
use crate::error::{Result, SparkError};
use crate::rng::SeedStream;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AugMode {
    Snap,
    #[default]
    Interpolate,
}

impl std::str::FromStr for AugMode {
    type Err = SparkError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snap" => Ok(AugMode::Snap),
            "interpolate" => Ok(AugMode::Interpolate),
            other => Err(SparkError::Config(format!(
                "unknown augmentation mode {other:?} (expected snap or interpolate)"
            ))),
        }
    }
}

/// Start epoch, ramp length and ceiling of the augmentation probability.
/// Unset epochs default to 20% and 30% of the training epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumConfig {
    pub start_epoch: Option<usize>,
    pub ramp_epochs: Option<usize>,
    pub max_ratio: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            start_epoch: None,
            ramp_epochs: None,
            max_ratio: 0.5,
        }
    }
}

impl std::str::FromStr for CurriculumConfig {
    type Err = SparkError;
    /// `E0,R,pmax`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || SparkError::Config(format!("curriculum must be E0,R,pmax, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let cfg = Self {
            start_epoch: Some(parts[0].parse().map_err(|_| bad())?),
            ramp_epochs: Some(parts[1].parse().map_err(|_| bad())?),
            max_ratio: parts[2].parse().map_err(|_| bad())?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.max_ratio) {
            return Err(SparkError::Config(format!(
                "curriculum max_ratio must lie in [0, 1], got {}",
                self.max_ratio
            )));
        }
        Ok(())
    }

    pub fn resolve(&self, epochs: usize) -> Curriculum {
        Curriculum {
            start: self
                .start_epoch
                .unwrap_or_else(|| (0.2 * epochs as f64).round() as usize),
            ramp: self
                .ramp_epochs
                .unwrap_or_else(|| (0.3 * epochs as f64).round() as usize),
            max_ratio: self.max_ratio,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Curriculum {
    pub start: usize,
    pub ramp: usize,
    pub max_ratio: f64,
}

/// Probability of replacing a training sample by its augmented version.
pub fn curriculum_ratio(epoch: usize, c: &Curriculum) -> f64 {
    if epoch < c.start {
        0.0
    } else if c.ramp == 0 || epoch >= c.start + c.ramp {
        c.max_ratio
    } else {
        c.max_ratio * (epoch - c.start) as f64 / c.ramp as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub mode: AugMode,
    pub k: usize,
    /// Softmax temperature; unset means the mean squared nearest-code distance
    /// of the training latents.
    pub tau: Option<f64>,
    pub curriculum: CurriculumConfig,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            mode: AugMode::Interpolate,
            k: 3,
            tau: None,
            curriculum: CurriculumConfig::default(),
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self, codebook_size: Option<usize>) -> Result<()> {
        if self.k == 0 {
            return Err(SparkError::Config("augment.k must be at least 1".into()));
        }
        if let Some(m) = codebook_size {
            if self.k > m {
                return Err(SparkError::Config(format!(
                    "augment.k = {} exceeds codebook size {m}",
                    self.k
                )));
            }
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0) {
                return Err(SparkError::Config(format!("augment.tau must be positive, got {tau}")));
            }
        }
        self.curriculum.validate()
    }
}

/// Nearest code for every row.
pub fn snap(h: &Tensor, cb: &Codebook) -> Result<Tensor> {
    Ok(cb.quantize(h)?.1)
}

/// Indices of the `k` nearest codes in ascending distance (ties: lower index
/// first) together with their squared distances.
pub fn topk_codes(q: &[f64], cb: &Codebook, k: usize) -> Vec<(usize, f64)> {
    let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
    for j in 0..cb.size() {
        let d = sq_dist(q, cb.entry(j));
        if best.len() == k && d >= best[k - 1].1 {
            continue;
        }
        let pos = best.partition_point(|&(_, bd)| bd <= d);
        best.insert(pos, (j, d));
        best.truncate(k);
    }
    best
}

/// Softmax(−d²/τ) blend of the `k` nearest codes of every row.
pub fn interpolate_topk(h: &Tensor, cb: &Codebook, k: usize, tau: f64) -> Result<Tensor> {
    if k == 0 || k > cb.size() {
        return Err(SparkError::Config(format!(
            "top-k with k = {k} on a codebook of {} entries",
            cb.size()
        )));
    }
    if !(tau > 0.0) {
        return Err(SparkError::Config(format!(
            "interpolation temperature must be positive, got {tau}"
        )));
    }
    let d = cb.dim();
    if h.cols() != d {
        return Err(SparkError::shape(
            "interpolate_topk",
            format!("latents {:?} against a codebook of width {d}", h.shape()),
        ));
    }
    if !h.is_finite() {
        return Err(SparkError::numeric(
            "interpolate_topk",
            "latent contains NaN or infinity",
        ));
    }
    let mut out = Vec::with_capacity(h.numel());
    for q in h.data().chunks(d) {
        let near = topk_codes(q, cb, k);
        let dmin = near[0].1;
        let w: Vec<f64> = near.iter().map(|&(_, dist)| (-(dist - dmin) / tau).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut z = vec![0.0; d];
        for (&(j, _), wj) in near.iter().zip(&w) {
            let wj = wj / total;
            for (zi, ei) in z.iter_mut().zip(cb.entry(j)) {
                *zi += wj * ei;
            }
        }
        out.extend(z);
    }
    Tensor::new(h.shape().to_vec(), out)
}

/// Mean squared distance from each latent row to its nearest code.
pub fn calibrate_tau<'a>(latents: impl IntoIterator<Item = &'a Tensor>, cb: &Codebook) -> f64 {
    let (mut total, mut count) = (0.0, 0usize);
    for t in latents {
        for q in t.data().chunks(cb.dim()) {
            total += topk_codes(q, cb, 1)[0].1;
            count += 1;
        }
    }
    let tau = if count > 0 { total / count as f64 } else { 0.0 };
    if tau > 1e-12 {
        tau
    } else {
        cb.mean_nearest_sq_distance().max(1e-12)
    }
}

/// Applies the configured augmentation against a frozen codebook and counts
/// every application.
#[derive(Debug)]
pub struct Augmenter<'a> {
    pub codebook: &'a Codebook,
    pub mode: AugMode,
    pub k: usize,
    pub tau: f64,
    calls: AtomicUsize,
}

impl<'a> Augmenter<'a> {
    pub fn new(codebook: &'a Codebook, cfg: &AugmentConfig, tau: f64) -> Result<Self> {
        cfg.validate(Some(codebook.size()))?;
        Ok(Self {
            codebook,
            mode: cfg.mode,
            k: cfg.k,
            tau,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn apply(&self, h: &Tensor) -> Result<Tensor> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        match self.mode {
            AugMode::Snap => snap(h, self.codebook),
            AugMode::Interpolate => interpolate_topk(h, self.codebook, self.k, self.tau),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Per-sample augment/keep decisions for one epoch.
pub fn augment_decisions(rng: &mut SeedStream, samples: usize, ratio: f64) -> Vec<bool> {
    (0..samples).map(|_| rng.uniform() < ratio).collect()
}
