//! Forecast quality metrics and the radial energy spectrum.

use crate::error::{Result, SparkError};
use crate::fft::{signed_freq, transform_channels};
use crate::tensor::Tensor;

const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;

pub fn mse(truth: &Tensor, pred: &Tensor) -> Result<f64> {
    if truth.shape() != pred.shape() {
        return Err(SparkError::shape(
            "mse",
            format!("truth {:?} vs prediction {:?}", truth.shape(), pred.shape()),
        ));
    }
    let s: f64 = truth
        .data()
        .iter()
        .zip(pred.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / truth.numel() as f64)
}

/// `10·log10(max²/mse)`; `+∞` when `mse = 0`.
pub fn psnr_from_mse(mse: f64, max_val: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (max_val * max_val / mse).log10()
    }
}

pub fn psnr(x: &Tensor, y: &Tensor, max_val: f64) -> Result<f64> {
    if !(max_val > 0.0) {
        return Err(SparkError::Config(format!(
            "psnr needs a positive dynamic range, got {max_val}"
        )));
    }
    Ok(psnr_from_mse(mse(x, y)?, max_val))
}

fn gaussian_window() -> Vec<f64> {
    let c = (WINDOW / 2) as f64;
    let w1: Vec<f64> = (0..WINDOW)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp())
        .collect();
    let s: f64 = w1.iter().sum();
    let w1: Vec<f64> = w1.iter().map(|v| v / s).collect();
    let mut w = Vec::with_capacity(WINDOW * WINDOW);
    for a in &w1 {
        for b in &w1 {
            w.push(a * b);
        }
    }
    w
}

fn ssim_from_moments(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

/// Mean single-scale SSIM over all fully contained 11×11 Gaussian windows
/// (σ = 1.5) of two `H×W` images. Smaller images use global statistics.
pub fn ssim(x: &Tensor, y: &Tensor, max_val: f64) -> Result<f64> {
    let (h, w) = match x.shape() {
        [h, w] => (*h, *w),
        s => return Err(SparkError::shape("ssim", format!("expected an H×W image, got {s:?}"))),
    };
    if x.shape() != y.shape() {
        return Err(SparkError::shape("ssim", format!("{:?} vs {:?}", x.shape(), y.shape())));
    }
    if !(max_val > 0.0) {
        return Err(SparkError::Config(format!(
            "ssim needs a positive dynamic range, got {max_val}"
        )));
    }
    let c1 = (0.01 * max_val).powi(2);
    let c2 = (0.03 * max_val).powi(2);
    let (xd, yd) = (x.data(), y.data());
    if h < WINDOW || w < WINDOW {
        log::warn!("{h}×{w} image is smaller than the {WINDOW}×{WINDOW} SSIM window; using global statistics");
        let n = (h * w) as f64;
        let mx = xd.iter().sum::<f64>() / n;
        let my = yd.iter().sum::<f64>() / n;
        let vx = xd.iter().map(|v| v * v).sum::<f64>() / n - mx * mx;
        let vy = yd.iter().map(|v| v * v).sum::<f64>() / n - my * my;
        let cxy = xd.iter().zip(yd).map(|(a, b)| a * b).sum::<f64>() / n - mx * my;
        return Ok(ssim_from_moments(mx, my, vx, vy, cxy, c1, c2));
    }
    let win = gaussian_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for i0 in 0..=h - WINDOW {
        for j0 in 0..=w - WINDOW {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for di in 0..WINDOW {
                for dj in 0..WINDOW {
                    let k = win[di * WINDOW + dj];
                    let idx = (i0 + di) * w + j0 + dj;
                    let (a, b) = (xd[idx], yd[idx]);
                    mx += k * a;
                    my += k * b;
                    xx += k * a * a;
                    yy += k * b * b;
                    xy += k * a * b;
                }
            }
            total += ssim_from_moments(mx, my, xx - mx * mx, yy - my * my, xy - mx * my, c1, c2);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Radially binned `|FFT|²` of an `H×W` field: bin `k = round(√(kx²+ky²))`
/// summed for `k = 0..=max_k`. `max_k = None` means `floor(min(H,W)/2)`.
pub fn energy_spectrum_upto(field: &Tensor, max_k: Option<usize>) -> Result<Vec<(usize, f64)>> {
    let (h, w) = match field.shape() {
        [h, w] => (*h, *w),
        s => return Err(SparkError::shape("energy_spectrum", format!("expected H×W, got {s:?}"))),
    };
    let kmax = max_k.unwrap_or(h.min(w) / 2);
    let zeros = vec![0.0; h * w];
    let (re, im) = transform_channels(field.data(), &zeros, h, w, 1, false, 1.0);
    let mut bins = vec![0.0; kmax + 1];
    for i in 0..h {
        let ky = signed_freq(i, h) as f64;
        for j in 0..w {
            let kx = signed_freq(j, w) as f64;
            let k = (kx * kx + ky * ky).sqrt().round() as usize;
            if k <= kmax {
                let idx = i * w + j;
                bins[k] += re[idx] * re[idx] + im[idx] * im[idx];
            }
        }
    }
    Ok(bins.into_iter().enumerate().collect())
}

pub fn energy_spectrum(field: &Tensor) -> Result<Vec<(usize, f64)>> {
    energy_spectrum_upto(field, None)
}

/// Largest radial bin index on an `H×W` grid, so that every bin is counted.
pub fn full_disk_radius(h: usize, w: usize) -> usize {
    let (a, b) = ((h / 2) as f64, (w / 2) as f64);
    (a * a + b * b).sqrt().round() as usize
}

/// Aggregate forecast quality over many windows of `horizon` frames.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub windows: usize,
    /// MSE of each forecast step, averaged over windows.
    pub per_step_mse: Vec<f64>,
    pub mse: f64,
    pub ssim: f64,
    pub psnr: f64,
    pub max_val: f64,
    /// Mean spectrum of the final forecast step, prediction and truth.
    pub spectrum_pred: Vec<(usize, f64)>,
    pub spectrum_truth: Vec<(usize, f64)>,
}

/// `preds[w][t]` and `truths[w][t]` are `[H·W, d]` frames.
pub fn report(preds: &[Vec<Tensor>], truths: &[Vec<Tensor>], h: usize, w: usize, max_val: f64) -> Result<MetricReport> {
    if preds.is_empty() || preds.len() != truths.len() {
        return Err(SparkError::shape(
            "report",
            format!(
                "{} predicted windows against {} true windows",
                preds.len(),
                truths.len()
            ),
        ));
    }
    let horizon = preds[0].len();
    let mut per_step = vec![0.0; horizon];
    let mut ssim_sum = 0.0;
    let mut ssim_count = 0usize;
    let kmax = h.min(w) / 2;
    let mut sp = vec![0.0; kmax + 1];
    let mut st = vec![0.0; kmax + 1];
    for (pw, tw) in preds.iter().zip(truths) {
        if pw.len() != horizon || tw.len() != horizon {
            return Err(SparkError::shape("report", "windows differ in horizon"));
        }
        for (t, (p, y)) in pw.iter().zip(tw).enumerate() {
            per_step[t] += mse(y, p)?;
            let d = p.cols();
            for c in 0..d {
                let img = |f: &Tensor| Tensor::new(vec![h, w], f.data().iter().skip(c).step_by(d).copied().collect());
                let (pi, yi) = (img(p)?, img(y)?);
                ssim_sum += ssim(&yi, &pi, max_val)?;
                ssim_count += 1;
                if t + 1 == horizon {
                    for (k, e) in energy_spectrum(&pi)? {
                        sp[k] += e;
                    }
                    for (k, e) in energy_spectrum(&yi)? {
                        st[k] += e;
                    }
                }
            }
        }
    }
    let nw = preds.len() as f64;
    let per_step: Vec<f64> = per_step.iter().map(|s| s / nw).collect();
    let mse = per_step.iter().sum::<f64>() / horizon as f64;
    let norm = nw * preds[0][0].cols() as f64;
    Ok(MetricReport {
        windows: preds.len(),
        mse,
        psnr: psnr_from_mse(mse, max_val),
        ssim: ssim_sum / ssim_count as f64,
        max_val,
        per_step_mse: per_step,
        spectrum_pred: sp.into_iter().enumerate().map(|(k, e)| (k, e / norm)).collect(),
        spectrum_truth: st.into_iter().enumerate().map(|(k, e)| (k, e / norm)).collect(),
    })
}
