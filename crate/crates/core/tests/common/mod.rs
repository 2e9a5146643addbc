//! Oracles shared by the integration tests. Everything here is written
//! independently of the library code it checks: plain loops, dense matrices,
//! brute force.

#![allow(dead_code)]

use spark_core::autodiff::{Graph, Var};
use spark_core::params::ParamSet;
use spark_core::rng::SeedStream;
use spark_core::{Result, Tensor};

pub const FD_STEP: f64 = 1e-6;
pub mod gradient_cases;

pub const GRAD_TOL: f64 = 1e-4;

/// Per-tensor relative error `‖a − fd‖ / max(‖a‖, ‖fd‖)` between backprop and
/// central differences. Gradients that are both below `1e-9` in norm count as
/// agreeing.
pub fn gradcheck<F>(ps: &ParamSet, mut f: F) -> Vec<(String, f64)>
where
    F: FnMut(&mut Graph, &ParamSet) -> Result<Var>,
{
    let mut g = Graph::new();
    let loss = f(&mut g, ps).expect("forward");
    let grads = g.backward(loss).expect("backward");
    let analytic: Vec<Tensor> = ps
        .ids()
        .map(|id| {
            grads
                .get(id)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(ps.get(id).shape()))
        })
        .collect();
    finite_difference_compare(ps, &analytic, |p| {
        let mut g = Graph::new();
        let l = f(&mut g, p).expect("forward");
        g.value(l).item()
    })
}

/// Compare given analytic gradients with central differences of `value`.
pub fn finite_difference_compare<V>(ps: &ParamSet, analytic: &[Tensor], mut value: V) -> Vec<(String, f64)>
where
    V: FnMut(&ParamSet) -> f64,
{
    let mut work = ps.clone();
    let ids: Vec<_> = ps.ids().collect();
    let mut out = Vec::new();
    for (id, a) in ids.into_iter().zip(analytic) {
        let n = ps.get(id).numel();
        let mut fd = vec![0.0; n];
        for (i, slot) in fd.iter_mut().enumerate() {
            let orig = work.get(id).data()[i];
            work.get_mut(id).data_mut()[i] = orig + FD_STEP;
            let lp = value(&work);
            work.get_mut(id).data_mut()[i] = orig - FD_STEP;
            let lm = value(&work);
            work.get_mut(id).data_mut()[i] = orig;
            *slot = (lp - lm) / (2.0 * FD_STEP);
        }
        out.push((ps.name(id).to_string(), relative_error(a.data(), &fd)));
    }
    out
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-9 {
        0.0
    } else {
        diff / scale
    }
}

pub fn worst(report: &[(String, f64)]) -> (String, f64) {
    report
        .iter()
        .cloned()
        .fold((String::new(), 0.0), |acc, r| if r.1 > acc.1 { r } else { acc })
}

pub fn assert_grads(report: &[(String, f64)]) {
    for (name, rel) in report {
        assert!(*rel <= GRAD_TOL, "{name}: relative gradient error {rel:e}");
    }
}

/// Reduce any tensor-valued node to a scalar with a fixed random weighting
/// plus a small quadratic term, so every output entry matters.
pub fn probe(g: &mut Graph, y: Var, seed: u64) -> Result<Var> {
    let shape = g.value(y).shape().to_vec();
    let n = g.value(y).numel();
    let r = g.input(Tensor::new(shape, SeedStream::new(seed).normal_vec(n, 1.0))?);
    let wy = g.mul(y, r)?;
    let lin = g.sum(wy);
    let sq = g.square(y);
    let quad = g.sum(sq);
    let quad = g.scale(quad, 0.1);
    g.add(lin, quad)
}

pub fn random(shape: &[usize], seed: u64, scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), SeedStream::new(seed).normal_vec(n, scale)).unwrap()
}

/// O(N²) 2-D DFT: `X[k,l] = Σ x[m,n] exp(∓2πi(km/H + ln/W))`, inverse scaled by `1/(HW)`.
pub fn dense_dft2(re: &[f64], im: &[f64], h: usize, w: usize, inverse: bool) -> (Vec<f64>, Vec<f64>) {
    let sign = if inverse { 1.0 } else { -1.0 };
    let scale = if inverse { 1.0 / (h * w) as f64 } else { 1.0 };
    let mut or = vec![0.0; h * w];
    let mut oi = vec![0.0; h * w];
    for k in 0..h {
        for l in 0..w {
            let (mut sr, mut si) = (0.0, 0.0);
            for m in 0..h {
                for n in 0..w {
                    // Reduce the phase index exactly before converting to an angle.
                    let num = ((k * m) % h) * w + ((l * n) % w) * h;
                    let theta = sign * 2.0 * std::f64::consts::PI * num as f64 / (h * w) as f64;
                    let (s, c) = theta.sin_cos();
                    let (xr, xi) = (re[m * w + n], im[m * w + n]);
                    sr += xr * c - xi * s;
                    si += xr * s + xi * c;
                }
            }
            or[k * w + l] = sr * scale;
            oi[k * w + l] = si * scale;
        }
    }
    (or, oi)
}

pub fn signed(i: usize, n: usize) -> i64 {
    if 2 * i <= n {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Dense-DFT reference of a truncated spectral convolution on `[N, cin]`
/// input with weights `[modes, cin, cout]`; `adjacency` (dense `N×N`) is
/// applied to the spectrum when given.
pub fn dense_spectral_conv(
    x: &[f64],
    wre: &[f64],
    wim: &[f64],
    h: usize,
    w: usize,
    k_max: usize,
    cin: usize,
    cout: usize,
    adjacency: Option<&[f64]>,
) -> Vec<f64> {
    let n = h * w;
    let mut spec_re = vec![0.0; n * cin];
    let mut spec_im = vec![0.0; n * cin];
    for c in 0..cin {
        let col: Vec<f64> = (0..n).map(|i| x[i * cin + c]).collect();
        let (r, i) = dense_dft2(&col, &vec![0.0; n], h, w, false);
        for b in 0..n {
            spec_re[b * cin + c] = r[b];
            spec_im[b * cin + c] = i[b];
        }
    }
    if let Some(a) = adjacency {
        let mix = |s: &[f64]| {
            let mut o = vec![0.0; n * cin];
            for i in 0..n {
                for j in 0..n {
                    let aij = a[i * n + j];
                    if aij != 0.0 {
                        for c in 0..cin {
                            o[i * cin + c] += aij * s[j * cin + c];
                        }
                    }
                }
            }
            o
        };
        spec_re = mix(&spec_re);
        spec_im = mix(&spec_im);
    }
    let mut out_re = vec![0.0; n * cout];
    let mut out_im = vec![0.0; n * cout];
    let mut mode = 0;
    for i in 0..h {
        for j in 0..w {
            if signed(i, h).unsigned_abs() as usize >= k_max || signed(j, w).unsigned_abs() as usize >= k_max {
                continue;
            }
            let b = i * w + j;
            for c in 0..cin {
                for o in 0..cout {
                    let widx = (mode * cin + c) * cout + o;
                    let (a, bb) = (spec_re[b * cin + c], spec_im[b * cin + c]);
                    out_re[b * cout + o] += a * wre[widx] - bb * wim[widx];
                    out_im[b * cout + o] += a * wim[widx] + bb * wre[widx];
                }
            }
            mode += 1;
        }
    }
    let mut y = vec![0.0; n * cout];
    for o in 0..cout {
        let r: Vec<f64> = (0..n).map(|b| out_re[b * cout + o]).collect();
        let im: Vec<f64> = (0..n).map(|b| out_im[b * cout + o]).collect();
        let (yr, _) = dense_dft2(&r, &im, h, w, true);
        for b in 0..n {
            y[b * cout + o] = yr[b];
        }
    }
    y
}

/// Index of the nearest row by full scan; ties keep the first.
pub fn brute_nearest(q: &[f64], codes: &[f64], d: usize) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, e) in codes.chunks(d).enumerate() {
        let dist: f64 = q.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist < best.1 {
            best = (j, dist);
        }
    }
    best.0
}

/// Softmax(−d²/τ) blend of the `k` nearest codes, by sorting every distance.
pub fn brute_topk_blend(q: &[f64], codes: &[f64], d: usize, k: usize, tau: f64) -> Vec<f64> {
    let mut all: Vec<(usize, f64)> = codes
        .chunks(d)
        .enumerate()
        .map(|(j, e)| (j, q.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum()))
        .collect();
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    let near = &all[..k];
    let logits: Vec<f64> = near.iter().map(|&(_, dist)| -dist / tau).collect();
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ws: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
    let total: f64 = ws.iter().sum();
    let mut z = vec![0.0; d];
    for (&(j, _), w) in near.iter().zip(&ws) {
        for c in 0..d {
            z[c] += w / total * codes[j * d + c];
        }
    }
    z
}

/// `exp(Σ −p log p)` of normalized counts.
pub fn perplexity_oracle(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum();
    h.exp()
}
