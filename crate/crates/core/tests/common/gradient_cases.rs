//! Finite-difference gradient cases, one per differentiable building block.
//! Each returns `(parameter, relative error)` pairs.

use std::sync::Arc;

use super::{finite_difference_compare, gradcheck, probe, random};
use spark_core::autodiff::{Activation, Graph, SpectralPlan};
use spark_core::codebook::{pretrain_loss, quantize_on_tape};
use spark_core::dynamics::{forecast_loss, integrate, DynamicsConfig, DynamicsModel, Solver};
use spark_core::encoder::{ChannelAttention, GnnEncoder, MlpDecoder};
use spark_core::fft::ModeSet;
use spark_core::grid::{GridGraph, GridSpec, Normalization};
use spark_core::params::ParamSet;
use spark_core::rng::SeedStream;
use spark_core::Tensor;

pub type Report = Vec<(String, f64)>;

fn set(entries: &[(&str, Tensor)]) -> ParamSet {
    let mut ps = ParamSet::new();
    for (name, t) in entries {
        ps.add(*name, t.clone()).unwrap();
    }
    ps
}

fn ids(ps: &ParamSet) -> Vec<spark_core::params::ParamId> {
    ps.ids().collect()
}

pub fn dense_primitives() -> Report {
    let mut out = Report::new();
    let ps = set(&[
        ("x", random(&[5, 3], 1, 1.0)),
        ("w", random(&[3, 4], 2, 1.0)),
        ("b", random(&[4], 3, 1.0)),
        ("s", random(&[4], 4, 1.0)),
        ("c", random(&[5, 1], 5, 1.0)),
    ]);
    let id = ids(&ps);
    for act in [Activation::Gelu, Activation::Tanh, Activation::Identity] {
        let report = gradcheck(&ps, |g, p| {
            let x = g.param_from(p, id[0]);
            let w = g.param_from(p, id[1]);
            let b = g.param_from(p, id[2]);
            let s = g.param_from(p, id[3]);
            let c = g.param_from(p, id[4]);
            let y = g.linear(x, w, b)?;
            let y = g.act(y, act);
            let y = g.mul_row(y, s)?;
            let y = g.mul_col(y, c)?;
            let z = g.matmul(x, w)?;
            let d = g.row_dot(y, z)?;
            let cat = g.concat_cols(y, d)?;
            let t = g.tanh(cat);
            let m = g.mean(t);
            let l = probe(g, cat, 9)?;
            g.add(l, m)
        });
        out.extend(report);
    }
    out
}

pub fn gather_sub_and_layer_norm() -> Report {
    let mut out = Report::new();
    let ps = set(&[
        ("table", random(&[4, 3], 11, 1.0)),
        ("x", random(&[6, 3], 12, 1.0)),
        ("gain", random(&[3], 13, 1.0)),
        ("bias", random(&[3], 14, 1.0)),
    ]);
    let id = ids(&ps);
    let report = gradcheck(&ps, |g, p| {
        let t = g.param_from(p, id[0]);
        let x = g.param_from(p, id[1]);
        let gain = g.param_from(p, id[2]);
        let bias = g.param_from(p, id[3]);
        let rows = g.gather(t, Arc::from(vec![0usize, 2, 2, 3, 1, 0]))?;
        let d = g.sub(x, rows)?;
        let n = g.layer_norm(d, gain, bias)?;
        probe(g, n, 15)
    });
    out.extend(report);
    out
}

pub fn sparse_adjacency_product() -> Report {
    let mut out = Report::new();
    for norm in [Normalization::Row, Normalization::Symmetric] {
        let grid = GridGraph::new(GridSpec {
            height: 3,
            width: 4,
            periodic: false,
            neighbors: 8,
            normalization: norm,
            ..Default::default()
        })
        .unwrap();
        let ps = set(&[("x", random(&[12, 2], 21, 1.0))]);
        let id = ids(&ps);
        let report = gradcheck(&ps, |g, p| {
            let x = g.param_from(p, id[0]);
            let y = g.spmm(&grid.adjacency, x)?;
            probe(g, y, 22)
        });
        out.extend(report);
    }
    out
}

pub fn fft_round_trip_on_tape() -> Report {
    let mut out = Report::new();
    let ps = set(&[("re", random(&[4, 6], 31, 1.0)), ("im", random(&[4, 6], 32, 1.0))]);
    let id = ids(&ps);
    let report = gradcheck(&ps, |g, p| {
        let re = g.param_from(p, id[0]);
        let im = g.param_from(p, id[1]);
        let (fr, fi) = g.fft2(re, im)?;
        let sq = g.square(fr);
        let (br, bi) = g.ifft2(sq, fi)?;
        let a = probe(g, br, 33)?;
        let b = probe(g, bi, 34)?;
        g.add(a, b)
    });
    out.extend(report);
    out
}

pub fn spectral_convolution_with_and_without_adjacency() -> Report {
    let mut out = Report::new();
    let grid = GridGraph::periodic(6, 5).unwrap();
    for adjacency in [None, Some(Arc::clone(&grid.adjacency))] {
        let modes = ModeSet::new(6, 5, 2).unwrap();
        let m = modes.len();
        let plan = Arc::new(SpectralPlan {
            modes,
            spectral_adjacency: adjacency,
        });
        let ps = set(&[
            ("x", random(&[30, 2], 41, 1.0)),
            ("wre", random(&[m, 2, 3], 42, 0.5)),
            ("wim", random(&[m, 2, 3], 43, 0.5)),
        ]);
        let id = ids(&ps);
        let report = gradcheck(&ps, |g, p| {
            let x = g.param_from(p, id[0]);
            let wr = g.param_from(p, id[1]);
            let wi = g.param_from(p, id[2]);
            let y = g.spectral_conv(x, wr, wi, &plan)?;
            probe(g, y, 44)
        });
        out.extend(report);
    }
    out
}

pub fn channel_attention() -> Report {
    let mut out = Report::new();
    let grid = GridGraph::periodic(4, 4).unwrap();
    let mut ps = ParamSet::new();
    let mut rng = SeedStream::new(51);
    let att = ChannelAttention::new(&mut ps, &mut rng, "att", &grid, 2, 2, 3, 2, Activation::Gelu).unwrap();
    let x = random(&[16, 2], 52, 1.0);
    let delta = [-2.0, 0.5];
    let report = gradcheck(&ps, |g, p| {
        let xv = g.input(x.clone());
        let y = att.forward(g, p, xv, &delta)?;
        probe(g, y, 53)
    });
    out.extend(report);
    out
}

pub fn gnn_encoder_layers() -> Report {
    let mut out = Report::new();
    let grid = GridGraph::new(GridSpec {
        height: 3,
        width: 3,
        periodic: false,
        ..Default::default()
    })
    .unwrap();
    for latent_norm in [true, false] {
        let mut ps = ParamSet::new();
        let mut rng = SeedStream::new(61);
        let gnn = GnnEncoder::new(
            &mut ps,
            &mut rng,
            "gnn",
            Arc::clone(&grid.adjacency),
            2,
            4,
            2,
            3,
            latent_norm,
            Activation::Tanh,
        )
        .unwrap();
        let x = random(&[9, 2], 62, 1.0);
        let report = gradcheck(&ps, |g, p| {
            let xv = g.input(x.clone());
            let h = gnn.forward(g, p, xv)?;
            probe(g, h, 63)
        });
        out.extend(report);
    }
    out
}

pub fn mlp_decoder_and_losses() -> Report {
    let mut out = Report::new();
    let mut ps = ParamSet::new();
    let mut rng = SeedStream::new(71);
    let dec = MlpDecoder::new(&mut ps, &mut rng, "dec", 3, 5, 2, Activation::Gelu).unwrap();
    let z = random(&[7, 3], 72, 1.0);
    let targets = [random(&[7, 2], 73, 1.0), random(&[7, 2], 74, 1.0)];
    let report = gradcheck(&ps, |g, p| {
        let zv = g.input(z.clone());
        let y1 = dec.forward(g, p, zv)?;
        let z2 = g.tanh(zv);
        let y2 = dec.forward(g, p, z2)?;
        let t: Vec<_> = targets.iter().map(|t| g.input(t.clone())).collect();
        forecast_loss(g, &[y1, y2], &t)
    });
    out.extend(report);
    out
}

/// The straight-through path, the commitment term and the codebook term each
/// route gradient to a specific argument. The oracle linearizes the
/// quantizer: `z ↦ z₀ + (h − h₀)` for the decoder path, `z₀` frozen in the
/// commitment term and `h₀` frozen in the codebook term, then takes plain
/// central differences of that surrogate.
pub fn quantized_pretraining_loss() -> Report {
    let mut out = Report::new();
    let (n, d, m) = (6, 3, 5);
    let mut ps = ParamSet::new();
    let mut rng = SeedStream::new(81);
    let h_id = ps.add("h", random(&[n, d], 82, 1.0)).unwrap();
    let e_id = ps.add("codes", random(&[m, d], 83, 1.0)).unwrap();
    let dec = MlpDecoder::new(&mut ps, &mut rng, "dec", d, 4, 2, Activation::Gelu).unwrap();
    let x = random(&[n, 2], 84, 1.0);
    let (mu, gamma) = (0.25, 1.3);

    let mut g = Graph::new();
    let h = g.param_from(&ps, h_id);
    let e = g.param_from(&ps, e_id);
    let q = quantize_on_tape(&mut g, h, e).unwrap();
    assert_eq!(
        g.value(q.z_st),
        g.value(q.z),
        "straight-through forward must be the code itself"
    );
    let xhat = dec.forward(&mut g, &ps, q.z_st).unwrap();
    let xv = g.input(x.clone());
    let terms = pretrain_loss(&mut g, xv, xhat, h, q.z, mu, gamma).unwrap();
    let grads = g.backward(terms.total).unwrap();
    let analytic: Vec<Tensor> = ps.ids().map(|id| grads.get(id).unwrap().clone()).collect();

    let h0 = ps.get(h_id).clone();
    let e0 = ps.get(e_id).clone();
    let idx = q.indices.clone();
    let z0: Vec<f64> = idx.iter().flat_map(|&j| e0.row(j).to_vec()).collect();
    let value = |p: &ParamSet| {
        let (h, e) = (p.get(h_id).data(), p.get(e_id).data());
        let zlin: Vec<f64> = (0..n * d).map(|i| z0[i] + h[i] - h0.data()[i]).collect();
        let mut g = Graph::new();
        let zl = g.input(Tensor::new(vec![n, d], zlin).unwrap());
        let xhat = dec.forward(&mut g, p, zl).unwrap();
        let recon: f64 = g
            .value(xhat)
            .data()
            .iter()
            .zip(x.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let (mut commit, mut cb) = (0.0, 0.0);
        for r in 0..n {
            for c in 0..d {
                commit += (h[r * d + c] - z0[r * d + c]).powi(2);
                cb += (h0.data()[r * d + c] - e[idx[r] * d + c]).powi(2);
            }
        }
        (recon + mu * commit + gamma * cb) / n as f64
    };
    let report = finite_difference_compare(&ps, &analytic, value);
    out.extend(report);
    out
}

fn tiny_dynamics(cfg: DynamicsConfig, seed: u64) -> (GridGraph, DynamicsModel) {
    let grid = GridGraph::periodic(4, 4).unwrap();
    let model = DynamicsModel::new(&cfg, &grid, 3, 1, &mut SeedStream::new(seed)).unwrap();
    (grid, model)
}

fn small_dyn_config() -> DynamicsConfig {
    DynamicsConfig {
        history: 3,
        horizon: 2,
        spectral_modes: 2,
        decoder_hidden: 4,
        ode_layers: 2,
        substeps: 2,
        ..Default::default()
    }
}

pub fn temporal_attention_history_encoder() -> Report {
    let mut out = Report::new();
    for hist_act in [Activation::Identity, Activation::Tanh] {
        let (_, model) = tiny_dynamics(
            DynamicsConfig {
                history_activation: hist_act,
                ..small_dyn_config()
            },
            91,
        );
        let history: Vec<Tensor> = (0..3).map(|t| random(&[16, 3], 92 + t, 1.0)).collect();
        let report = gradcheck(&model.params, |g, p| {
            let mut m = model.clone();
            m.params = p.clone();
            let hs: Vec<_> = history.iter().map(|h| g.input(h.clone())).collect();
            let h0 = m.encode_history(g, &hs)?;
            probe(g, h0, 95)
        });
        out.extend(report);
    }
    out
}

pub fn ode_right_hand_side_variants() -> Report {
    let mut out = Report::new();
    for (spectral_adjacency, sum_layers) in [(true, true), (false, true), (true, false)] {
        let (_, model) = tiny_dynamics(
            DynamicsConfig {
                spectral_adjacency,
                sum_layers,
                ..small_dyn_config()
            },
            101,
        );
        let h = random(&[16, 3], 102, 1.0);
        let report = gradcheck(&model.params, |g, p| {
            let mut m = model.clone();
            m.params = p.clone();
            let hv = g.input(h.clone());
            let y = m.rhs(g, hv)?;
            probe(g, y, 103)
        });
        out.extend(report);
    }
    out
}

pub fn unrolled_integrators_and_full_forecast() -> Report {
    let mut out = Report::new();
    for solver in [Solver::Rk4, Solver::Euler] {
        let (_, model) = tiny_dynamics(
            DynamicsConfig {
                solver,
                ..small_dyn_config()
            },
            111,
        );
        let history: Vec<Tensor> = (0..3).map(|t| random(&[16, 3], 112 + t, 0.7)).collect();
        let targets: Vec<Tensor> = (0..2).map(|t| random(&[16, 1], 120 + t, 1.0)).collect();
        let report = gradcheck(&model.params, |g, p| {
            let mut m = model.clone();
            m.params = p.clone();
            let preds = m.forecast(g, &history)?;
            let t: Vec<_> = targets.iter().map(|t| g.input(t.clone())).collect();
            forecast_loss(g, &preds, &t)
        });
        out.extend(report);
    }
    out
}

pub fn integrator_gradient_with_respect_to_initial_state() -> Report {
    let mut out = Report::new();
    // dH/dt = tanh(H W): gradient through every RK4 stage reaches H0 and W.
    let ps = set(&[("h0", random(&[4, 2], 131, 1.0)), ("w", random(&[2, 2], 132, 0.8))]);
    let id = ids(&ps);
    for solver in [Solver::Rk4, Solver::Euler] {
        let report = gradcheck(&ps, |g, p| {
            let h0 = g.param_from(p, id[0]);
            let w = g.param_from(p, id[1]);
            let states = integrate(g, h0, &[0.5, 1.0, 2.0], solver, 3, |g, h| {
                let y = g.matmul(h, w)?;
                Ok(g.tanh(y))
            })?;
            let a = probe(g, states[0], 133)?;
            let b = probe(g, states[2], 134)?;
            g.add(a, b)
        });
        out.extend(report);
    }
    out
}

pub const ALL: &[(&str, fn() -> Report)] = &[
    ("dense primitives", dense_primitives),
    ("gather sub and layer norm", gather_sub_and_layer_norm),
    ("sparse adjacency product", sparse_adjacency_product),
    ("fft round trip on tape", fft_round_trip_on_tape),
    (
        "spectral convolution with and without adjacency",
        spectral_convolution_with_and_without_adjacency,
    ),
    ("channel attention", channel_attention),
    ("gnn encoder layers", gnn_encoder_layers),
    ("mlp decoder and losses", mlp_decoder_and_losses),
    ("quantized pretraining loss", quantized_pretraining_loss),
    ("temporal attention history encoder", temporal_attention_history_encoder),
    ("ode right hand side variants", ode_right_hand_side_variants),
    (
        "unrolled integrators and full forecast",
        unrolled_integrators_and_full_forecast,
    ),
    (
        "integrator gradient with respect to initial state",
        integrator_gradient_with_respect_to_initial_state,
    ),
];
