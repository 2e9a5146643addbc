//! Browser bindings: vorticity simulation, energy spectrum and a 2D view of
//! codebook-guided latent augmentation.

use spark_core::augment::{interpolate_topk, snap, topk_codes};
use spark_core::codebook::Codebook;
use spark_core::datagen::navier_stokes::{simulate, NavierStokesConfig};
use spark_core::grid::{GridGraph, GridSpec};
use spark_core::metrics::energy_spectrum;
use spark_core::rng::SeedStream;
use spark_core::{SparkError, Tensor};
use wasm_bindgen::prelude::*;

fn js(e: SparkError) -> JsError {
    JsError::new(&e.to_string())
}

/// Vorticity frames on a periodic `size×size` grid, flattened frame-major.
pub fn simulate_field(
    size: usize,
    viscosity: f64,
    frames: usize,
    steps_per_frame: usize,
    seed: u64,
) -> Result<Vec<f64>, SparkError> {
    if !(4..=128).contains(&size) || frames == 0 {
        return Err(SparkError::Config(format!(
            "size must lie in 4..=128 and frames be positive, got {size} and {frames}"
        )));
    }
    let grid = GridGraph::new(GridSpec {
        height: size,
        width: size,
        ..Default::default()
    })?;
    let cfg = NavierStokesConfig {
        frames,
        steps_per_frame,
        dt: 0.025 * 32.0 / size as f64,
        ..Default::default()
    };
    Ok(simulate(&grid, viscosity, seed, &cfg)?.into_data())
}

/// Radially binned energy of one `size×size` field, index = wavenumber.
pub fn field_spectrum(field: &[f64], size: usize) -> Result<Vec<f64>, SparkError> {
    let t = Tensor::new(vec![size, size], field.to_vec())?;
    Ok(energy_spectrum(&t)?.into_iter().map(|(_, e)| e).collect())
}

/// `m` random 2D codes with a fixed seed.
pub fn random_codes(m: usize, seed: u64) -> Vec<f64> {
    SeedStream::new(seed).normal_vec(2 * m, 1.0)
}

/// For a 2D query against `codes` (`m×2`): `[snap x, snap y, blend x, blend y,
/// i₁, w₁, …, i_k, w_k]` with the softmax weights of the `k` nearest codes.
pub fn augment_point(codes: &[f64], query: [f64; 2], k: usize, tau: f64) -> Result<Vec<f64>, SparkError> {
    let cb = Codebook::new(Tensor::new(vec![codes.len() / 2, 2], codes.to_vec())?)?;
    let q = Tensor::new(vec![1, 2], query.to_vec())?;
    let s = snap(&q, &cb)?;
    let z = interpolate_topk(&q, &cb, k, tau)?;
    let near = topk_codes(&query, &cb, k);
    let dmin = near[0].1;
    let w: Vec<f64> = near.iter().map(|&(_, d)| (-(d - dmin) / tau).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut out = vec![s.data()[0], s.data()[1], z.data()[0], z.data()[1]];
    for (&(j, _), wj) in near.iter().zip(&w) {
        out.push(j as f64);
        out.push(wj / total);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = simulateField)]
pub fn simulate_field_js(
    size: usize,
    viscosity: f64,
    frames: usize,
    steps_per_frame: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    simulate_field(size, viscosity, frames, steps_per_frame, seed).map_err(js)
}

#[wasm_bindgen(js_name = fieldSpectrum)]
pub fn field_spectrum_js(field: &[f64], size: usize) -> Result<Vec<f64>, JsError> {
    field_spectrum(field, size).map_err(js)
}

#[wasm_bindgen(js_name = randomCodes)]
pub fn random_codes_js(m: usize, seed: u64) -> Vec<f64> {
    random_codes(m, seed)
}

#[wasm_bindgen(js_name = augmentPoint)]
pub fn augment_point_js(codes: &[f64], x: f64, y: f64, k: usize, tau: f64) -> Result<Vec<f64>, JsError> {
    augment_point(codes, [x, y], k, tau).map_err(js)
}
