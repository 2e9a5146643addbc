//! 2-D incompressible Navier–Stokes in vorticity form on the periodic unit square.
//!
//! `∂ω/∂t + u·∇ω = ν∇²ω + f`, `∇²ψ = −ω`, `u = ∂ψ/∂y`, `v = −∂ψ/∂x`.
//!
//! Vorticity lives in spectral space. The viscous term is integrated exactly
//! by an integrating factor and the advection term by classical RK4 (Lawson
//! scheme). Products are formed on the grid and dealiased with the 2/3 rule.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SparkError};
use crate::fft::{signed_freq, transform_channels};
use crate::grid::GridGraph;
use crate::rng::SeedStream;
use crate::tensor::Tensor;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NavierStokesConfig {
    /// Time step of the solver.
    pub dt: f64,
    /// Solver steps between recorded frames.
    pub steps_per_frame: usize,
    /// Recorded frames, including the initial condition.
    pub frames: usize,
    /// Amplitude of the Kolmogorov-type forcing `a·(sin 2π(x+y) + cos 2π(x+y))`; 0 disables it.
    pub forcing: f64,
    /// Largest radial integer wavenumber in the random initial condition.
    pub ic_modes: usize,
    /// RMS vorticity of the initial condition.
    pub ic_amplitude: f64,
    /// Courant number limit `dt·max(|u|/Δx + |v|/Δy)`.
    pub cfl: f64,
}

impl Default for NavierStokesConfig {
    fn default() -> Self {
        Self {
            dt: 0.025,
            steps_per_frame: 10,
            frames: 20,
            forcing: 0.1,
            ic_modes: 4,
            ic_amplitude: 1.5,
            cfl: 1.0,
        }
    }
}

/// Band-limited Gaussian random field: independent complex normal
/// coefficients on every bin with `0 < |k| ≤ k_max`, zero mean, rescaled to
/// RMS `amplitude`.
pub fn gaussian_random_field(h: usize, w: usize, k_max: usize, amplitude: f64, rng: &mut SeedStream) -> Vec<f64> {
    let n = h * w;
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    let kmax2 = (k_max * k_max) as i64;
    for i in 0..h {
        for j in 0..w {
            let (ky, kx) = (signed_freq(i, h), signed_freq(j, w));
            let k2 = kx * kx + ky * ky;
            if k2 > 0 && k2 <= kmax2 {
                re[i * w + j] = rng.normal();
                im[i * w + j] = rng.normal();
            }
        }
    }
    let (mut field, _) = transform_channels(&re, &im, h, w, 1, true, 1.0);
    let mean = field.iter().sum::<f64>() / n as f64;
    for v in field.iter_mut() {
        *v -= mean;
    }
    let rms = (field.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        for v in field.iter_mut() {
            *v *= amplitude / rms;
        }
    }
    field
}

struct Spectral {
    h: usize,
    w: usize,
    kx: Vec<f64>,
    ky: Vec<f64>,
    k2: Vec<f64>,
    dealias: Vec<bool>,
}

impl Spectral {
    fn new(h: usize, w: usize) -> Self {
        let n = h * w;
        let mut kx = vec![0.0; n];
        let mut ky = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut dealias = vec![false; n];
        for i in 0..h {
            for j in 0..w {
                let idx = i * w + j;
                let (fy, fx) = (signed_freq(i, h), signed_freq(j, w));
                // Nyquist derivatives are ambiguous for real fields; drop them.
                let nyq_x = w.is_multiple_of(2) && j == w / 2;
                let nyq_y = h.is_multiple_of(2) && i == h / 2;
                kx[idx] = if nyq_x { 0.0 } else { TWO_PI * fx as f64 };
                ky[idx] = if nyq_y { 0.0 } else { TWO_PI * fy as f64 };
                k2[idx] = TWO_PI * TWO_PI * ((fx * fx + fy * fy) as f64);
                dealias[idx] = 3 * fx.unsigned_abs() as usize <= w && 3 * fy.unsigned_abs() as usize <= h;
            }
        }
        Self {
            h,
            w,
            kx,
            ky,
            k2,
            dealias,
        }
    }

    fn to_grid(&self, spec: &[Complex64]) -> Vec<f64> {
        let re: Vec<f64> = spec.iter().map(|c| c.re).collect();
        let im: Vec<f64> = spec.iter().map(|c| c.im).collect();
        let n = self.h * self.w;
        transform_channels(&re, &im, self.h, self.w, 1, true, 1.0 / n as f64).0
    }

    fn to_spectrum(&self, field: &[f64]) -> Vec<Complex64> {
        let zeros = vec![0.0; field.len()];
        let (re, im) = transform_channels(field, &zeros, self.h, self.w, 1, false, 1.0);
        re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect()
    }

    /// Dealiased `−u·∇ω + f` in spectral space, plus the max Courant rate.
    fn nonlinear(&self, omega: &[Complex64], forcing: &[Complex64]) -> (Vec<Complex64>, f64) {
        let n = omega.len();
        let i_unit = Complex64::new(0.0, 1.0);
        let mut u_hat = vec![Complex64::new(0.0, 0.0); n];
        let mut v_hat = vec![Complex64::new(0.0, 0.0); n];
        let mut wx_hat = vec![Complex64::new(0.0, 0.0); n];
        let mut wy_hat = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let psi = if self.k2[k] > 0.0 {
                omega[k] / self.k2[k]
            } else {
                Complex64::new(0.0, 0.0)
            };
            u_hat[k] = i_unit * self.ky[k] * psi;
            v_hat[k] = -i_unit * self.kx[k] * psi;
            wx_hat[k] = i_unit * self.kx[k] * omega[k];
            wy_hat[k] = i_unit * self.ky[k] * omega[k];
        }
        let (u, v) = (self.to_grid(&u_hat), self.to_grid(&v_hat));
        let (wx, wy) = (self.to_grid(&wx_hat), self.to_grid(&wy_hat));
        let (dx, dy) = (1.0 / self.w as f64, 1.0 / self.h as f64);
        let mut rate: f64 = 0.0;
        let adv: Vec<f64> = (0..n)
            .map(|k| {
                rate = rate.max(u[k].abs() / dx + v[k].abs() / dy);
                -(u[k] * wx[k] + v[k] * wy[k])
            })
            .collect();
        let mut out = self.to_spectrum(&adv);
        for k in 0..n {
            out[k] = if self.dealias[k] {
                out[k] + forcing[k]
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        out[0] = Complex64::new(0.0, 0.0);
        (out, rate)
    }
}

/// Integrate from an explicit initial vorticity field (`H·W` values, node-major).
///
/// Returns `frames × N` vorticity snapshots, the first being the initial state
/// with its mean removed.
pub fn simulate_from(grid: &GridGraph, viscosity: f64, initial: &[f64], cfg: &NavierStokesConfig) -> Result<Tensor> {
    if !grid.spec.periodic {
        return Err(SparkError::Config("Navier–Stokes solver needs a periodic grid".into()));
    }
    if !(viscosity > 0.0) || !viscosity.is_finite() {
        return Err(SparkError::Config(format!(
            "viscosity must be positive, got {viscosity}"
        )));
    }
    if !(cfg.dt > 0.0) || cfg.frames == 0 || cfg.steps_per_frame == 0 {
        return Err(SparkError::Config(
            "dt, frames and steps_per_frame must be positive".into(),
        ));
    }
    let (h, w) = (grid.height(), grid.width());
    let n = h * w;
    if initial.len() != n {
        return Err(SparkError::shape(
            "navier_stokes",
            format!("initial field has {} values for {n} nodes", initial.len()),
        ));
    }
    let sp = Spectral::new(h, w);
    let mut omega = sp.to_spectrum(initial);
    omega[0] = Complex64::new(0.0, 0.0);

    let forcing_field: Vec<f64> = (0..n)
        .map(|idx| {
            let (x, y) = grid.position(idx);
            cfg.forcing * ((TWO_PI * (x + y)).sin() + (TWO_PI * (x + y)).cos())
        })
        .collect();
    let mut forcing = sp.to_spectrum(&forcing_field);
    forcing[0] = Complex64::new(0.0, 0.0);

    let dt = cfg.dt;
    let e_full: Vec<f64> = sp.k2.iter().map(|k2| (-viscosity * k2 * dt).exp()).collect();
    let e_half: Vec<f64> = sp.k2.iter().map(|k2| (-viscosity * k2 * dt * 0.5).exp()).collect();

    let mut frames = Vec::with_capacity(cfg.frames * n);
    frames.extend(sp.to_grid(&omega));
    let mut step = 0usize;
    for _frame in 1..cfg.frames {
        for _ in 0..cfg.steps_per_frame {
            step += 1;
            let (a, rate) = sp.nonlinear(&omega, &forcing);
            if dt * rate > cfg.cfl {
                let limit = cfg.cfl / rate;
                return Err(SparkError::Cfl {
                    dt,
                    limit,
                    suggested: 0.9 * limit,
                });
            }
            let stage: Vec<Complex64> = (0..n).map(|k| e_half[k] * (omega[k] + 0.5 * dt * a[k])).collect();
            let (b, _) = sp.nonlinear(&stage, &forcing);
            let stage: Vec<Complex64> = (0..n).map(|k| e_half[k] * omega[k] + 0.5 * dt * b[k]).collect();
            let (c, _) = sp.nonlinear(&stage, &forcing);
            let stage: Vec<Complex64> = (0..n).map(|k| e_full[k] * omega[k] + dt * e_half[k] * c[k]).collect();
            let (d, _) = sp.nonlinear(&stage, &forcing);
            for k in 0..n {
                omega[k] =
                    e_full[k] * omega[k] + dt / 6.0 * (e_full[k] * a[k] + 2.0 * e_half[k] * (b[k] + c[k]) + d[k]);
            }
            if omega.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(SparkError::numeric(
                    "navier_stokes",
                    format!("non-finite vorticity at step {step}"),
                ));
            }
        }
        frames.extend(sp.to_grid(&omega));
    }
    Tensor::new(vec![cfg.frames, n], frames)
}

/// Seeded run from a band-limited random initial condition.
pub fn simulate(grid: &GridGraph, viscosity: f64, ic_seed: u64, cfg: &NavierStokesConfig) -> Result<Tensor> {
    let mut rng = SeedStream::new(ic_seed);
    let initial = gaussian_random_field(grid.height(), grid.width(), cfg.ic_modes, cfg.ic_amplitude, &mut rng);
    simulate_from(grid, viscosity, &initial, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unforced(frames: usize, dt: f64, steps_per_frame: usize) -> NavierStokesConfig {
        NavierStokesConfig {
            dt,
            steps_per_frame,
            frames,
            forcing: 0.0,
            ..NavierStokesConfig::default()
        }
    }

    #[test]
    fn single_mode_decays_at_viscous_rate() {
        let grid = GridGraph::periodic(16, 16).unwrap();
        let amp = 0.7;
        let nu = 0.05;
        let init: Vec<f64> = (0..256).map(|i| amp * (TWO_PI * grid.position(i).0).sin()).collect();
        let cfg = unforced(11, 0.01, 1);
        let frames = simulate_from(&grid, nu, &init, &cfg).unwrap();
        let t = 0.1;
        let want = amp * (-nu * TWO_PI * TWO_PI * t).exp();
        let last = &frames.data()[10 * 256..];
        // column 4 of 16 sits at x = 1/4 where sin(2πx) = 1
        let got = last[4];
        assert!(((got - want) / want).abs() < 1e-4, "{got} vs {want}");
    }

    #[test]
    fn cfl_violation_suggests_smaller_step() {
        let grid = GridGraph::periodic(16, 16).unwrap();
        let cfg = NavierStokesConfig {
            dt: 1.0,
            ic_amplitude: 20.0,
            ..unforced(3, 1.0, 1)
        };
        match simulate(&grid, 1e-3, 1, &cfg) {
            Err(SparkError::Cfl { suggested, limit, .. }) => assert!(suggested < limit && suggested > 0.0),
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_periodic_grid_and_bad_viscosity() {
        let open = GridGraph::new(crate::grid::GridSpec {
            height: 8,
            width: 8,
            periodic: false,
            ..Default::default()
        })
        .unwrap();
        assert!(simulate(&open, 1e-3, 0, &NavierStokesConfig::default()).is_err());
        let grid = GridGraph::periodic(8, 8).unwrap();
        assert!(simulate(&grid, 0.0, 0, &NavierStokesConfig::default()).is_err());
    }
}
