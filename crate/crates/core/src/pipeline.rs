//! End-to-end commands: dataset generation, pretraining, dynamics training,
//! evaluation and codebook inspection. Each writes its artifacts into an
//! output directory and returns a summary for the caller.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::augment::AugmentConfig;
use crate::checkpoint::Checkpoint;
use crate::codebook::{codebook_perplexity, pretrain, Codebook, PretrainOutcome};
use crate::config::ExperimentConfig;
use crate::datagen::io::{load_dataset, save_dataset};
use crate::datagen::split::Split;
use crate::datagen::{generate_dataset, EpisodeDataset};
use crate::dynamics::{
    episode_windows, predict_window, train_dynamics, window_targets, DynamicsModel, LatentCache, TrainOutcome, Window,
};
use crate::encoder::Upstream;
use crate::error::{Result, SparkError};
use crate::grid::GridGraph;
use crate::metrics::{report, MetricReport};
use crate::parallel::ordered_map;
use crate::tensor::Tensor;

pub const DATASET_FILE: &str = "dataset.sparkds";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const PRETRAIN_FILE: &str = "pretrain.sparkck";
pub const PRETRAIN_LOSS_FILE: &str = "pretrain_loss.csv";
pub const DYNAMICS_FILE: &str = "dynamics.sparkck";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SWEEP_FILE: &str = "k_sweep.csv";

/// k grid of the sensitivity sweep.
pub const SWEEP_KS: [usize; 6] = [1, 3, 5, 7, 9, 11];

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn failed_marker(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".failed");
    PathBuf::from(s)
}

pub fn manifest(ds: &EpisodeDataset, cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let ids = ds.indices(Split::InDomain);
    let oods = ds.indices(Split::OutDomain);
    let distinct = |idx: &[usize]| {
        let mut ps: Vec<&Vec<f64>> = Vec::new();
        for &e in idx {
            if !ps.contains(&&ds.episodes[e].params) {
                ps.push(&ds.episodes[e].params);
            }
        }
        ps
    };
    let (pin, pout) = (distinct(&ids), distinct(&oods));
    let _ = writeln!(out, "generator: {:?}", cfg.dataset.generator);
    let _ = writeln!(out, "grid: {}x{}", ds.height, ds.width);
    let _ = writeln!(out, "channels: {}", ds.channels.join(","));
    let _ = writeln!(
        out,
        "frames per episode: {}",
        ds.episodes.first().map_or(0, |e| e.len())
    );
    let _ = writeln!(out, "seed: {}", cfg.seed);
    let _ = writeln!(out, "episodes: {}", ds.episodes.len());
    let _ = writeln!(out, "in-domain episodes: {}", ids.len());
    let _ = writeln!(out, "out-domain episodes: {}", oods.len());
    let _ = writeln!(out, "in-domain parameter values: {}", pin.len());
    for p in &pin {
        let _ = writeln!(out, "  {p:?}");
    }
    let _ = writeln!(out, "out-domain parameter values: {}", pout.len());
    for p in &pout {
        let _ = writeln!(out, "  {p:?}");
    }
    for (c, s) in ds.channels.iter().zip(&ds.stats) {
        let _ = writeln!(out, "channel {c}: mean {} std {}", s.mean, s.std);
    }
    out
}

pub fn gen_data(cfg: &ExperimentConfig, out_dir: &Path) -> Result<EpisodeDataset> {
    cfg.validate()?;
    let grid = GridGraph::new(cfg.grid)?;
    let ds = generate_dataset(&cfg.dataset, &grid, cfg.seed, cfg.threads)?;
    create_dir(out_dir)?;
    save_dataset(&ds, &out_dir.join(DATASET_FILE))?;
    write(&out_dir.join(MANIFEST_FILE), &manifest(&ds, cfg))?;
    log::info!("wrote {} episodes to {}", ds.episodes.len(), out_dir.display());
    Ok(ds)
}

pub fn open_dataset(path: &Path) -> Result<EpisodeDataset> {
    if !path.exists() {
        return Err(SparkError::Config(format!("dataset {} does not exist", path.display())));
    }
    load_dataset(path)
}

/// The grid described by `cfg`, checked against the dataset dimensions.
pub fn dataset_grid(cfg: &ExperimentConfig, ds: &EpisodeDataset) -> Result<GridGraph> {
    if (cfg.grid.height, cfg.grid.width) != (ds.height, ds.width) {
        return Err(SparkError::Incompatible(format!(
            "config grid {}x{} differs from dataset grid {}x{}",
            cfg.grid.height, cfg.grid.width, ds.height, ds.width
        )));
    }
    GridGraph::new(cfg.grid)
}

pub fn loss_history_csv(outcome: &PretrainOutcome) -> String {
    let mut out = String::from("epoch,loss,recon,commit,codebook,perplexity,seconds\n");
    let _ = writeln!(out, "init,{},,,,,", outcome.initial_loss);
    for e in &outcome.history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.epoch, e.loss, e.recon, e.commit, e.codebook, e.perplexity, e.seconds
        );
    }
    out
}

pub fn pretrain_cmd(cfg: &ExperimentConfig, ds: &EpisodeDataset, out_dir: &Path) -> Result<PretrainOutcome> {
    cfg.validate()?;
    let grid = dataset_grid(cfg, ds)?;
    create_dir(out_dir)?;
    let ck_path = out_dir.join(PRETRAIN_FILE);
    let marker = failed_marker(&ck_path);
    let outcome = match pretrain(ds, &grid, &cfg.pretrain, cfg.seed, cfg.threads) {
        Ok(o) => o,
        Err(e) => {
            if ck_path.exists() {
                std::fs::remove_file(&ck_path)?;
            }
            write(&marker, &format!("{e}\n"))?;
            return Err(e);
        }
    };
    if marker.exists() {
        std::fs::remove_file(&marker)?;
    }
    let ck = Checkpoint::pretrained(
        cfg,
        &outcome.upstream,
        &outcome.codebook,
        ds.channel_count(),
        ds.episodes[0].params.len(),
    );
    ck.save(&ck_path)?;
    write(&out_dir.join(PRETRAIN_LOSS_FILE), &loss_history_csv(&outcome))?;
    Ok(outcome)
}

/// Every field where the checkpoint's configuration or shapes disagree with
/// the current configuration and dataset; empty when compatible.
pub fn incompatibilities(ck: &Checkpoint, cfg: &ExperimentConfig, ds: &EpisodeDataset) -> Vec<String> {
    let mut diffs = Vec::new();
    let mut cmp = |name: &str, saved: String, now: String| {
        if saved != now {
            diffs.push(format!("{name}: checkpoint {saved}, now {now}"));
        }
    };
    let (a, b) = (&ck.config.grid, &cfg.grid);
    cmp("grid.height", a.height.to_string(), b.height.to_string());
    cmp("grid.width", a.width.to_string(), b.width.to_string());
    cmp("grid.neighbors", a.neighbors.to_string(), b.neighbors.to_string());
    cmp("grid.periodic", a.periodic.to_string(), b.periodic.to_string());
    cmp("grid.self_loops", a.self_loops.to_string(), b.self_loops.to_string());
    cmp(
        "grid.normalization",
        format!("{:?}", a.normalization),
        format!("{:?}", b.normalization),
    );
    let (a, b) = (&ck.config.pretrain.encoder, &cfg.pretrain.encoder);
    cmp(
        "pretrain.encoder.latent_dim",
        a.latent_dim.to_string(),
        b.latent_dim.to_string(),
    );
    cmp(
        "pretrain.encoder.attention_hidden",
        a.attention_hidden.to_string(),
        b.attention_hidden.to_string(),
    );
    cmp(
        "pretrain.encoder.spectral_modes",
        a.spectral_modes.to_string(),
        b.spectral_modes.to_string(),
    );
    cmp(
        "pretrain.encoder.gnn_hidden",
        a.gnn_hidden.to_string(),
        b.gnn_hidden.to_string(),
    );
    cmp(
        "pretrain.encoder.gnn_layers",
        a.gnn_layers.to_string(),
        b.gnn_layers.to_string(),
    );
    cmp(
        "pretrain.encoder.decoder_hidden",
        a.decoder_hidden.to_string(),
        b.decoder_hidden.to_string(),
    );
    cmp(
        "pretrain.encoder.activation",
        format!("{:?}", a.activation),
        format!("{:?}", b.activation),
    );
    cmp(
        "pretrain.encoder.latent_norm",
        a.latent_norm.to_string(),
        b.latent_norm.to_string(),
    );
    cmp(
        "pretrain.codebook_size",
        ck.config.pretrain.codebook_size.to_string(),
        cfg.pretrain.codebook_size.to_string(),
    );
    cmp("channels", ck.channels.to_string(), ds.channel_count().to_string());
    cmp(
        "parameter length",
        ck.param_dim.to_string(),
        ds.episodes.first().map_or(0, |e| e.params.len()).to_string(),
    );
    diffs
}

pub fn check_compatible(ck: &Checkpoint, cfg: &ExperimentConfig, ds: &EpisodeDataset) -> Result<()> {
    let diffs = incompatibilities(ck, cfg, ds);
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(SparkError::Incompatible(format!(
            "checkpoint does not match: {}",
            diffs.join("; ")
        )))
    }
}

pub fn metrics_csv(outcome: &TrainOutcome) -> String {
    let mut out = String::from("epoch,train_mse,val_mse,aug_ratio,wallclock\n");
    for m in &outcome.history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            m.epoch, m.train_mse, m.val_mse, m.aug_ratio, m.wallclock
        );
    }
    out
}

/// Frozen components of a pretraining (or dynamics) checkpoint.
pub fn load_frozen(ck: &Checkpoint) -> Result<(Upstream, Codebook)> {
    Ok((ck.upstream()?, ck.codebook()?))
}

pub fn train_cmd(
    cfg: &ExperimentConfig,
    ds: &EpisodeDataset,
    pretrained: &Checkpoint,
    augment: bool,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_compatible(pretrained, cfg, ds)?;
    let grid = dataset_grid(cfg, ds)?;
    let (upstream, codebook) = load_frozen(pretrained)?;
    let aug = augment.then_some(&cfg.augment);
    let outcome = train_dynamics(
        ds,
        &grid,
        &upstream,
        &codebook,
        &cfg.dynamics,
        aug,
        cfg.seed,
        cfg.threads,
    )?;
    create_dir(out_dir)?;
    pretrained
        .clone()
        .with_dynamics(cfg, &outcome.model)
        .save(&out_dir.join(DYNAMICS_FILE))?;
    write(&out_dir.join(METRICS_FILE), &metrics_csv(&outcome))?;
    Ok(outcome)
}

/// Predictions and targets of every evaluation window.
#[derive(Clone, Debug)]
pub struct Forecasts {
    pub windows: Vec<Window>,
    pub preds: Vec<Vec<Tensor>>,
    pub truths: Vec<Vec<Tensor>>,
}

/// Windows of `split`. `InDomain` means every in-domain episode, training and
/// validation alike.
pub fn split_windows(ds: &EpisodeDataset, model: &DynamicsModel, split: Split) -> Result<Vec<Window>> {
    let eps = ds.indices(split);
    if eps.is_empty() {
        return Err(SparkError::Config(format!(
            "the dataset has no {} episodes",
            split_name(split)
        )));
    }
    let windows = episode_windows(ds, &eps, &model.config);
    if windows.is_empty() {
        return Err(SparkError::Config(format!(
            "{} episodes are shorter than one window of {} frames",
            split_name(split),
            model.config.window_len()
        )));
    }
    Ok(windows)
}

pub fn split_name(split: Split) -> &'static str {
    match split {
        Split::InDomain => "in-domain",
        Split::OutDomain => "out-domain",
    }
}

pub fn forecast_split(
    ds: &EpisodeDataset,
    upstream: &Upstream,
    model: &DynamicsModel,
    split: Split,
    threads: usize,
) -> Result<Forecasts> {
    let windows = split_windows(ds, model, split)?;
    let mut cache = LatentCache::new(ds, upstream);
    cache.prepare(&ds.indices(split), threads)?;
    let pairs = ordered_map(&windows, threads, |&w| {
        Ok::<_, SparkError>((predict_window(model, &cache, w)?, window_targets(ds, w, &model.config)?))
    })?;
    let (preds, truths) = pairs.into_iter().unzip();
    Ok(Forecasts { windows, preds, truths })
}

pub fn evaluate(
    ds: &EpisodeDataset,
    upstream: &Upstream,
    model: &DynamicsModel,
    split: Split,
    threads: usize,
) -> Result<(MetricReport, Forecasts)> {
    let f = forecast_split(ds, upstream, model, split, threads)?;
    let r = report(&f.preds, &f.truths, ds.height, ds.width, ds.normalized_max_abs())?;
    Ok((r, f))
}

pub fn report_csv(r: &MetricReport, split: Split) -> String {
    let mut out = String::from("split,windows,mse,ssim,psnr,max_val\n");
    let tag = match split {
        Split::InDomain => "in",
        Split::OutDomain => "out",
    };
    let _ = writeln!(out, "{tag},{},{},{},{},{}", r.windows, r.mse, r.ssim, r.psnr, r.max_val);
    out
}

pub fn per_step_csv(r: &MetricReport) -> String {
    let mut out = String::from("step,mse\n");
    for (t, m) in r.per_step_mse.iter().enumerate() {
        let _ = writeln!(out, "{},{m}", t + 1);
    }
    out
}

pub fn spectrum_csv(r: &MetricReport) -> String {
    let mut out = String::from("k,pred,truth\n");
    for ((k, p), (_, t)) in r.spectrum_pred.iter().zip(&r.spectrum_truth) {
        let _ = writeln!(out, "{k},{p},{t}");
    }
    out
}

pub fn report_text(r: &MetricReport, split: Split) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "split: {}", split_name(split));
    let _ = writeln!(out, "windows: {}", r.windows);
    let _ = writeln!(out, "mse: {:.6e}", r.mse);
    let _ = writeln!(out, "ssim: {:.6}", r.ssim);
    let _ = writeln!(out, "psnr: {:.4} dB (max value {:.4})", r.psnr, r.max_val);
    for (t, m) in r.per_step_mse.iter().enumerate() {
        let _ = writeln!(out, "step {}: mse {m:.6e}", t + 1);
    }
    out
}

/// One row per value: window, episode, start, step, node, channel, pred, truth.
pub fn prediction_dump(f: &Forecasts) -> String {
    let mut out = String::from("window,episode,start,step,node,channel,pred,truth\n");
    for (i, ((w, pw), tw)) in f.windows.iter().zip(&f.preds).zip(&f.truths).enumerate() {
        for (t, (p, y)) in pw.iter().zip(tw).enumerate() {
            let d = p.cols();
            for (j, (a, b)) in p.data().iter().zip(y.data()).enumerate() {
                let _ = writeln!(
                    out,
                    "{i},{},{},{},{},{},{a},{b}",
                    w.episode,
                    w.start,
                    t + 1,
                    j / d,
                    j % d
                );
            }
        }
    }
    out
}

pub fn eval_cmd(
    ck: &Checkpoint,
    ds: &EpisodeDataset,
    split: Split,
    threads: usize,
    dump: bool,
    out_dir: &Path,
) -> Result<MetricReport> {
    check_compatible(ck, &ck.config, ds)?;
    let upstream = ck.upstream()?;
    let model = ck.dynamics()?;
    let (r, f) = evaluate(ds, &upstream, &model, split, threads)?;
    create_dir(out_dir)?;
    let tag = match split {
        Split::InDomain => "in",
        Split::OutDomain => "out",
    };
    write(&out_dir.join(format!("eval_{tag}.csv")), &report_csv(&r, split))?;
    write(&out_dir.join(format!("eval_{tag}_steps.csv")), &per_step_csv(&r))?;
    write(&out_dir.join(format!("eval_{tag}.txt")), &report_text(&r, split))?;
    write(&out_dir.join(format!("spectrum_{tag}.csv")), &spectrum_csv(&r))?;
    if dump {
        write(&out_dir.join(format!("predictions_{tag}.csv")), &prediction_dump(&f))?;
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodebookSummary {
    pub size: usize,
    pub dim: usize,
    pub perplexity: f64,
    pub usage: Vec<u64>,
    pub dead: usize,
}

pub fn inspect_codebook(cb: &Codebook) -> Result<CodebookSummary> {
    Ok(CodebookSummary {
        size: cb.size(),
        dim: cb.dim(),
        perplexity: codebook_perplexity(&cb.usage)?,
        usage: cb.usage.clone(),
        dead: cb.usage.iter().filter(|&&u| u == 0).count(),
    })
}

pub fn codebook_text(s: &CodebookSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "codes: {}", s.size);
    let _ = writeln!(out, "dim: {}", s.dim);
    let _ = writeln!(
        out,
        "perplexity: {:.4} ({:.1}% of codes)",
        s.perplexity,
        100.0 * s.perplexity / s.size as f64
    );
    let _ = writeln!(out, "unused codes: {}", s.dead);
    let peak = s.usage.iter().copied().max().unwrap_or(0).max(1);
    for (j, &u) in s.usage.iter().enumerate() {
        let bar = "#".repeat(((u as f64 / peak as f64) * 40.0).round() as usize);
        let _ = writeln!(out, "{j:>4} {u:>8} {bar}");
    }
    out
}

pub fn codebook_csv(s: &CodebookSummary) -> String {
    let mut out = String::from("code,usage\n");
    for (j, u) in s.usage.iter().enumerate() {
        let _ = writeln!(out, "{j},{u}");
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub test_split: Split,
    pub test_mse: f64,
    pub test_ssim: f64,
    pub aug_calls: usize,
    pub seconds: f64,
}

/// Retrain the dynamics for each `k` with everything else fixed and evaluate
/// on the out-domain split (in-domain when there is none).
pub fn k_sweep(
    cfg: &ExperimentConfig,
    ds: &EpisodeDataset,
    pretrained: &Checkpoint,
    ks: &[usize],
    out_dir: &Path,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    check_compatible(pretrained, cfg, ds)?;
    let grid = dataset_grid(cfg, ds)?;
    let (upstream, codebook) = load_frozen(pretrained)?;
    let test_split = if ds.indices(Split::OutDomain).is_empty() {
        Split::InDomain
    } else {
        Split::OutDomain
    };
    let mut rows = Vec::new();
    for &k in ks {
        let aug = AugmentConfig {
            k,
            ..cfg.augment.clone()
        };
        aug.validate(Some(codebook.size()))?;
        let t0 = Instant::now();
        let outcome = train_dynamics(
            ds,
            &grid,
            &upstream,
            &codebook,
            &cfg.dynamics,
            Some(&aug),
            cfg.seed,
            cfg.threads,
        )?;
        let (r, _) = evaluate(ds, &upstream, &outcome.model, test_split, cfg.threads)?;
        let last = outcome.history.last().expect("at least one epoch");
        rows.push(SweepRow {
            k,
            train_mse: last.train_mse,
            val_mse: last.val_mse,
            test_split,
            test_mse: r.mse,
            test_ssim: r.ssim,
            aug_calls: outcome.aug_calls,
            seconds: t0.elapsed().as_secs_f64(),
        });
        log::info!("k = {k}: test mse {:.6e}", r.mse);
    }
    create_dir(out_dir)?;
    write(&out_dir.join(SWEEP_FILE), &sweep_csv(&rows))?;
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("k,train_mse,val_mse,test_split,test_mse,test_ssim,aug_calls,seconds\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.k,
            r.train_mse,
            r.val_mse,
            split_name(r.test_split),
            r.test_mse,
            r.test_ssim,
            r.aug_calls,
            r.seconds
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn failed_marker_appends_suffix() {
        assert_eq!(
            failed_marker(Path::new("a/b.sparkck")),
            PathBuf::from("a/b.sparkck.failed")
        );
    }

    #[test]
    fn histogram_scales_to_peak() {
        let s = CodebookSummary {
            size: 3,
            dim: 2,
            perplexity: 2.0,
            usage: vec![4, 2, 0],
            dead: 1,
        };
        let text = codebook_text(&s);
        assert!(text.contains(&"#".repeat(40)));
        assert!(text.contains(&format!("{} {}\n", 2, "#".repeat(20))));
        assert_eq!(codebook_csv(&s), "code,usage\n0,4\n1,2\n2,0\n");
    }

    #[test]
    fn grid_mismatch_is_incompatible() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid = GridSpec {
            height: 4,
            width: 4,
            ..Default::default()
        };
        let frames = Tensor::new(vec![2, 64, 1], (0..128).map(|i| (i as f64).sin()).collect()).unwrap();
        let ep = crate::datagen::Episode {
            params: vec![1e-3],
            frames,
            generator: crate::datagen::GeneratorKind::NavierStokes,
            seed: 0,
            split: Split::InDomain,
        };
        let ds = EpisodeDataset::new(8, 8, vec!["w".into()], vec![ep]).unwrap();
        assert!(matches!(dataset_grid(&cfg, &ds), Err(SparkError::Incompatible(_))));
        cfg.grid.height = 8;
        cfg.grid.width = 8;
        assert!(dataset_grid(&cfg, &ds).is_ok());
        let m = manifest(&ds, &cfg);
        assert!(m.contains("in-domain parameter values: 1"), "{m}");
        assert!(m.contains("out-domain episodes: 0"), "{m}");
    }
}
