//! Two-species Gray–Scott reaction–diffusion with explicit Euler stepping.
//!
//! `∂u/∂t = D_u∇²u − r·uv² + r·F(1 − u)`,
//! `∂v/∂t = D_v∇²v + r·uv² − r·(F + k)v`,
//! on the unit square with the five-point Laplacian (periodic or zero-flux
//! boundaries, following the grid).

use serde::{Deserialize, Serialize};

use crate::error::{Result, SparkError};
use crate::grid::GridGraph;
use crate::rng::SeedStream;
use crate::tensor::Tensor;

use super::navier_stokes::gaussian_random_field;

/// Accepted parameter ranges.
pub const DIFFUSION_RANGE: (f64, f64) = (0.0, 1.0);
pub const RATE_RANGE: (f64, f64) = (0.0, 0.2);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReactionDiffusionConfig {
    pub dt: f64,
    pub steps_per_frame: usize,
    pub frames: usize,
    /// Feed rate `F`.
    pub feed: f64,
    /// Kill rate `k`.
    pub kill: f64,
    /// Multiplier `r` on every reaction term; 0 gives pure diffusion.
    pub reaction_scale: f64,
    pub ic_modes: usize,
}

impl Default for ReactionDiffusionConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            steps_per_frame: 20,
            frames: 20,
            feed: 0.04,
            kill: 0.06,
            reaction_scale: 1.0,
            ic_modes: 4,
        }
    }
}

fn laplacian(field: &[f64], h: usize, w: usize, periodic: bool) -> Vec<f64> {
    let (ix2, iy2) = ((w * w) as f64, (h * h) as f64);
    let at = |i: i64, j: i64, fallback: f64| -> f64 {
        if periodic {
            field[(i.rem_euclid(h as i64) as usize) * w + j.rem_euclid(w as i64) as usize]
        } else if i < 0 || j < 0 || i >= h as i64 || j >= w as i64 {
            // zero-flux ghost cell mirrors the centre value
            fallback
        } else {
            field[i as usize * w + j as usize]
        }
    };
    let mut out = vec![0.0; h * w];
    for i in 0..h as i64 {
        for j in 0..w as i64 {
            let c = field[i as usize * w + j as usize];
            let dxx = at(i, j - 1, c) - 2.0 * c + at(i, j + 1, c);
            let dyy = at(i - 1, j, c) - 2.0 * c + at(i + 1, j, c);
            out[i as usize * w + j as usize] = dxx * ix2 + dyy * iy2;
        }
    }
    out
}

fn check_ranges(du: f64, dv: f64, cfg: &ReactionDiffusionConfig) -> Result<()> {
    for (name, v, (lo, hi)) in [
        ("D_u", du, DIFFUSION_RANGE),
        ("D_v", dv, DIFFUSION_RANGE),
        ("feed", cfg.feed, RATE_RANGE),
        ("kill", cfg.kill, RATE_RANGE),
    ] {
        if !(v >= lo && v <= hi) {
            return Err(SparkError::Config(format!(
                "{name} = {v} outside documented range [{lo}, {hi}]"
            )));
        }
    }
    if !(cfg.reaction_scale >= 0.0 && cfg.reaction_scale <= 10.0) {
        return Err(SparkError::Config(format!(
            "reaction_scale = {} outside documented range [0, 10]",
            cfg.reaction_scale
        )));
    }
    Ok(())
}

/// Maximum stable explicit-Euler step for the diffusion part.
pub fn stable_dt(grid: &GridGraph, du: f64, dv: f64) -> f64 {
    let spacing = 1.0 / grid.height().max(grid.width()) as f64;
    let d = du.max(dv);
    if d == 0.0 {
        f64::INFINITY
    } else {
        spacing * spacing / (4.0 * d)
    }
}

/// Integrate from explicit initial fields. Returns `frames × N × 2` with
/// channels `(u, v)`.
pub fn simulate_from(
    grid: &GridGraph,
    du: f64,
    dv: f64,
    u0: &[f64],
    v0: &[f64],
    cfg: &ReactionDiffusionConfig,
) -> Result<Tensor> {
    check_ranges(du, dv, cfg)?;
    if !(cfg.dt > 0.0) || cfg.frames == 0 || cfg.steps_per_frame == 0 {
        return Err(SparkError::Config(
            "dt, frames and steps_per_frame must be positive".into(),
        ));
    }
    let limit = stable_dt(grid, du, dv);
    if cfg.dt > limit {
        return Err(SparkError::Cfl {
            dt: cfg.dt,
            limit,
            suggested: 0.9 * limit,
        });
    }
    let (h, w) = (grid.height(), grid.width());
    let n = h * w;
    if u0.len() != n || v0.len() != n {
        return Err(SparkError::shape(
            "reaction_diffusion",
            "initial fields do not match the grid",
        ));
    }
    let periodic = grid.spec.periodic;
    let (mut u, mut v) = (u0.to_vec(), v0.to_vec());
    let r = cfg.reaction_scale;
    let mut out = Vec::with_capacity(cfg.frames * n * 2);
    let record = |out: &mut Vec<f64>, u: &[f64], v: &[f64]| {
        for k in 0..n {
            out.push(u[k]);
            out.push(v[k]);
        }
    };
    record(&mut out, &u, &v);
    let mut step = 0;
    for _ in 1..cfg.frames {
        for _ in 0..cfg.steps_per_frame {
            step += 1;
            let (lu, lv) = (laplacian(&u, h, w, periodic), laplacian(&v, h, w, periodic));
            for k in 0..n {
                let uvv = u[k] * v[k] * v[k];
                let fu = r * (-uvv + cfg.feed * (1.0 - u[k]));
                let fv = r * (uvv - (cfg.feed + cfg.kill) * v[k]);
                u[k] += cfg.dt * (du * lu[k] + fu);
                v[k] += cfg.dt * (dv * lv[k] + fv);
            }
            if u.iter().chain(&v).any(|x| !x.is_finite()) {
                return Err(SparkError::numeric(
                    "reaction_diffusion",
                    format!("non-finite state at step {step}"),
                ));
            }
        }
        record(&mut out, &u, &v);
    }
    Tensor::new(vec![cfg.frames, n, 2], out)
}

/// Seeded run: background `(u, v) = (1, 0)` perturbed by a smooth random patch field.
pub fn simulate(grid: &GridGraph, du: f64, dv: f64, ic_seed: u64, cfg: &ReactionDiffusionConfig) -> Result<Tensor> {
    let mut rng = SeedStream::new(ic_seed);
    let mut phi = gaussian_random_field(grid.height(), grid.width(), cfg.ic_modes, 1.0, &mut rng);
    let (lo, hi) = phi.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    for p in phi.iter_mut() {
        *p = if hi > lo { (*p - lo) / (hi - lo) } else { 0.0 };
    }
    let u0: Vec<f64> = phi.iter().map(|p| 1.0 - 0.5 * p).collect();
    let v0: Vec<f64> = phi.iter().map(|p| 0.25 * p).collect();
    simulate_from(grid, du, dv, &u0, &v0, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_diffusion_no_reaction_is_static() {
        let grid = GridGraph::periodic(8, 8).unwrap();
        let cfg = ReactionDiffusionConfig {
            reaction_scale: 0.0,
            frames: 4,
            steps_per_frame: 5,
            ..Default::default()
        };
        let x = simulate(&grid, 0.0, 0.0, 9, &cfg).unwrap();
        let n = 64 * 2;
        for t in 1..4 {
            assert_eq!(&x.data()[t * n..(t + 1) * n], &x.data()[..n]);
        }
    }

    #[test]
    fn uniform_fixed_point_is_stationary() {
        let grid = GridGraph::periodic(8, 8).unwrap();
        let cfg = ReactionDiffusionConfig {
            frames: 5,
            ..Default::default()
        };
        let x = simulate_from(&grid, 1e-4, 5e-5, &[1.0; 64], &[0.0; 64], &cfg).unwrap();
        for pair in x.data().chunks(2) {
            assert!((pair[0] - 1.0).abs() < 1e-10 && pair[1].abs() < 1e-10);
        }
    }

    #[test]
    fn pure_diffusion_mode_decays_like_heat_equation() {
        let grid = GridGraph::periodic(32, 32).unwrap();
        let d = 1e-3;
        let dt = 0.01;
        let cfg = ReactionDiffusionConfig {
            dt,
            steps_per_frame: 100,
            frames: 2,
            reaction_scale: 0.0,
            ..Default::default()
        };
        let amp = 0.3;
        let u0: Vec<f64> = (0..1024)
            .map(|i| 1.0 + amp * (2.0 * std::f64::consts::PI * grid.position(i).0).sin())
            .collect();
        let x = simulate_from(&grid, d, d, &u0, &[0.0; 1024], &cfg).unwrap();
        let t = 1.0;
        let want = amp * (-d * (2.0 * std::f64::consts::PI).powi(2) * t).exp();
        // node (0, 8) sits at x = 1/4
        let got = x.data()[1024 * 2 + 8 * 2] - 1.0;
        assert!(((got - want) / want).abs() < 1e-3, "{got} vs {want}");
    }

    #[test]
    fn stability_and_range_checks() {
        let grid = GridGraph::periodic(32, 32).unwrap();
        let cfg = ReactionDiffusionConfig {
            dt: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            simulate(&grid, 1e-3, 1e-3, 0, &cfg),
            Err(SparkError::Cfl { .. })
        ));
        let bad = ReactionDiffusionConfig {
            feed: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            simulate(&grid, 1e-5, 1e-5, 0, &bad),
            Err(SparkError::Config(_))
        ));
    }

    #[test]
    fn zero_flux_boundaries_conserve_mass_under_diffusion() {
        let grid = GridGraph::new(crate::grid::GridSpec {
            height: 8,
            width: 8,
            periodic: false,
            ..Default::default()
        })
        .unwrap();
        let cfg = ReactionDiffusionConfig {
            dt: 0.01,
            reaction_scale: 0.0,
            frames: 3,
            ..Default::default()
        };
        let x = simulate(&grid, 1e-3, 1e-3, 4, &cfg).unwrap();
        let mass = |t: usize| -> f64 { x.data()[t * 128..(t + 1) * 128].iter().step_by(2).sum() };
        assert!((mass(0) - mass(2)).abs() < 1e-10);
    }
}
