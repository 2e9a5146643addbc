//! Two-dimensional discrete Fourier transforms on grid-laid-out fields.
//!
//! Convention: the forward transform is unnormalized,
//! `X[k, l] = Σ x[i, j] exp(-2πi (k i / H + l j / W))`, and the inverse carries
//! the full `1 / (H·W)` factor. Any size works; rustfft picks radix or
//! Bluestein plans per length. The scalar planner is used everywhere so
//! results do not depend on which SIMD extensions the host has.
//!
//! Multi-channel fields use node-major layout `[H·W, C]`, node index
//! `i·W + j`, matching [`crate::grid::GridGraph`].

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlannerScalar};

use crate::error::{Result, SparkError};
use crate::tensor::Tensor;

/// Tag written into checkpoints so spectra stay comparable across runs.
pub const DFT_CONVENTION: &str = "dft2:forward=unnormalized;inverse=1/(H*W);kernel=exp(-2*pi*i*k*x/n)";

thread_local! {
    static PLANNER: RefCell<FftPlannerScalar<f64>> = RefCell::new(FftPlannerScalar::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Transform each channel of a `[h·w, c]` complex field held as split parts.
///
/// `inverse` selects the conjugate kernel; the result is then multiplied by
/// `scale` (pass `1/(h·w)` for the normalized inverse).
pub fn transform_channels(
    re: &[f64],
    im: &[f64],
    h: usize,
    w: usize,
    c: usize,
    inverse: bool,
    scale: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = h * w;
    debug_assert_eq!(re.len(), n * c);
    debug_assert_eq!(im.len(), n * c);
    let direction = if inverse {
        FftDirection::Inverse
    } else {
        FftDirection::Forward
    };

    // rows: buffer index (ch·h + i)·w + j
    let mut buf = vec![Complex64::new(0.0, 0.0); n * c];
    for i in 0..h {
        for j in 0..w {
            let src = (i * w + j) * c;
            for ch in 0..c {
                buf[(ch * h + i) * w + j] = Complex64::new(re[src + ch], im[src + ch]);
            }
        }
    }
    if w > 1 {
        plan(w, direction).process(&mut buf);
    }

    // columns: buffer index (ch·w + j)·h + i
    let mut col = vec![Complex64::new(0.0, 0.0); n * c];
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                col[(ch * w + j) * h + i] = buf[(ch * h + i) * w + j];
            }
        }
    }
    if h > 1 {
        plan(h, direction).process(&mut col);
    }

    let mut out_re = vec![0.0; n * c];
    let mut out_im = vec![0.0; n * c];
    for ch in 0..c {
        for j in 0..w {
            for i in 0..h {
                let v = col[(ch * w + j) * h + i];
                let dst = (i * w + j) * c + ch;
                out_re[dst] = v.re * scale;
                out_im[dst] = v.im * scale;
            }
        }
    }
    (out_re, out_im)
}

fn check_pair(op: &'static str, re: &Tensor, im: &Tensor) -> Result<(usize, usize)> {
    if re.shape() != im.shape() {
        return Err(SparkError::shape(
            op,
            format!("real part {:?} vs imaginary part {:?}", re.shape(), im.shape()),
        ));
    }
    match re.shape() {
        [h, w] => Ok((*h, *w)),
        other => Err(SparkError::shape(op, format!("expected H×W, got {other:?}"))),
    }
}

/// Forward 2-D DFT of an `H×W` complex field (unnormalized).
pub fn fft2(re: &Tensor, im: &Tensor) -> Result<(Tensor, Tensor)> {
    let (h, w) = check_pair("fft2", re, im)?;
    let (r, i) = transform_channels(re.data(), im.data(), h, w, 1, false, 1.0);
    Ok((Tensor::new(vec![h, w], r)?, Tensor::new(vec![h, w], i)?))
}

/// Inverse 2-D DFT, scaled by `1/(H·W)`.
pub fn ifft2(re: &Tensor, im: &Tensor) -> Result<(Tensor, Tensor)> {
    let (h, w) = check_pair("ifft2", re, im)?;
    let scale = 1.0 / (h * w) as f64;
    let (r, i) = transform_channels(re.data(), im.data(), h, w, 1, true, scale);
    Ok((Tensor::new(vec![h, w], r)?, Tensor::new(vec![h, w], i)?))
}

/// Signed frequency of DFT bin `i` on an axis of length `n`.
pub fn signed_freq(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Spectral bins kept by a truncated spectral operator: every bin whose
/// signed frequencies satisfy `|k_y| < k_max` and `|k_x| < k_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    pub height: usize,
    pub width: usize,
    pub k_max: usize,
    /// Flat bin indices `i·W + j`, ascending.
    pub bins: Vec<usize>,
}

impl ModeSet {
    pub fn new(height: usize, width: usize, k_max: usize) -> Result<Self> {
        let limit = height.min(width) / 2;
        if k_max == 0 || k_max > limit.max(1) {
            return Err(SparkError::Config(format!(
                "retained mode count k_max = {k_max} must lie in 1..={} for a {height}×{width} grid",
                limit.max(1)
            )));
        }
        let k = k_max as i64;
        let mut bins = Vec::new();
        for i in 0..height {
            for j in 0..width {
                if signed_freq(i, height).abs() < k && signed_freq(j, width).abs() < k {
                    bins.push(i * width + j);
                }
            }
        }
        Ok(Self {
            height,
            width,
            k_max,
            bins,
        })
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}
