use proptest::prelude::*;

use spark_core::augment::{curriculum_ratio, interpolate_topk, snap, topk_codes, Curriculum};
use spark_core::autodiff::Graph;
use spark_core::codebook::{codebook_perplexity, quantize_on_tape, Codebook};
use spark_core::datagen::io::{decode_dataset, encode_dataset};
use spark_core::datagen::{Episode, EpisodeDataset, GeneratorKind, Split};
use spark_core::metrics::ssim;
use spark_core::params::ParamSet;
use spark_core::Tensor;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| Tensor::matrix(rows, cols, v).unwrap())
}

fn codebook_and_queries() -> impl Strategy<Value = (Tensor, Tensor)> {
    (2usize..12, 1usize..5, 1usize..8).prop_flat_map(|(m, d, n)| (matrix(m, d), matrix(n, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn straight_through_forward_is_the_code_and_gradient_reaches_the_latent(
        (codes, h) in codebook_and_queries()
    ) {
        let mut ps = ParamSet::new();
        let hid = ps.add("h", h.clone()).unwrap();
        let mut g = Graph::new();
        let hv = g.param(hid, h.clone());
        let cv = g.input(codes.clone());
        let q = quantize_on_tape(&mut g, hv, cv).unwrap();
        prop_assert_eq!(g.value(q.z_st), g.value(q.z));
        let cb = Codebook::new(codes).unwrap();
        let (_, z) = cb.quantize(&h).unwrap();
        prop_assert_eq!(g.value(q.z_st), &z);
        let loss = g.sum(q.z_st);
        let grads = g.backward(loss).unwrap();
        prop_assert!(grads.get(hid).unwrap().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn curriculum_ratio_is_bounded_and_monotone(
        start in 0usize..20,
        ramp in 0usize..20,
        max_ratio in 0.0f64..=1.0,
    ) {
        let c = Curriculum { start, ramp, max_ratio };
        let mut prev = 0.0;
        for epoch in 0..60 {
            let p = curriculum_ratio(epoch, &c);
            prop_assert!((0.0..=max_ratio).contains(&p));
            prop_assert!(p >= prev);
            prev = p;
        }
        prop_assert_eq!(curriculum_ratio(start + ramp, &c), max_ratio);
        if start > 0 {
            prop_assert_eq!(curriculum_ratio(start - 1, &c), 0.0);
        }
    }

    #[test]
    fn blend_is_a_convex_combination_of_its_neighbours(
        (codes, q) in codebook_and_queries(),
        k in 1usize..12,
        tau in 1e-3f64..10.0,
    ) {
        let m = codes.rows();
        let k = k.min(m);
        let cb = Codebook::new(codes).unwrap();
        let z = interpolate_topk(&q, &cb, k, tau).unwrap();
        for r in 0..q.rows() {
            let near: Vec<usize> = topk_codes(q.row(r), &cb, k).iter().map(|p| p.0).collect();
            for c in 0..q.cols() {
                let lo = near.iter().map(|&j| cb.entry(j)[c]).fold(f64::INFINITY, f64::min);
                let hi = near.iter().map(|&j| cb.entry(j)[c]).fold(f64::NEG_INFINITY, f64::max);
                let v = z.row(r)[c];
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{} outside [{}, {}]", v, lo, hi);
            }
        }
        let once = snap(&q, &cb).unwrap();
        prop_assert_eq!(snap(&once, &cb).unwrap(), once);
    }

    #[test]
    fn perplexity_lies_between_one_and_codebook_size(
        counts in prop::collection::vec(0u64..50, 1..40)
    ) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        let p = codebook_perplexity(&counts).unwrap();
        let used = counts.iter().filter(|&&c| c > 0).count() as f64;
        prop_assert!(p >= 1.0 - 1e-12 && p <= used + 1e-9);
        prop_assert!(p <= counts.len() as f64 + 1e-9);
    }

    #[test]
    fn ssim_is_symmetric_and_at_most_one(
        x in prop::collection::vec(-2.0f64..2.0, 144),
        y in prop::collection::vec(-2.0f64..2.0, 144),
    ) {
        let a = Tensor::new(vec![12, 12], x).unwrap();
        let b = Tensor::new(vec![12, 12], y).unwrap();
        let ab = ssim(&a, &b, 4.0).unwrap();
        let ba = ssim(&b, &a, 4.0).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-14);
        prop_assert!(ab <= 1.0 + 1e-15);
        prop_assert_eq!(ssim(&a, &a, 4.0).unwrap(), 1.0);
    }

    #[test]
    fn dataset_codec_round_trips(
        frames in 1usize..4,
        n_eps in 1usize..4,
        seed in any::<u64>(),
        values in prop::collection::vec(-1e3f64..1e3, 16 * 3 * 3),
    ) {
        let episodes: Vec<Episode> = (0..n_eps)
            .map(|e| Episode {
                params: vec![10f64.powi(-(e as i32) - 2)],
                frames: Tensor::new(vec![frames, 16, 1], values[e * 16..e * 16 + frames * 16].to_vec()).unwrap(),
                generator: GeneratorKind::NavierStokes,
                seed: seed.wrapping_add(e as u64),
                split: if e + 1 == n_eps && n_eps > 1 { Split::OutDomain } else { Split::InDomain },
            })
            .collect();
        let ds = EpisodeDataset::new(4, 4, GeneratorKind::NavierStokes.channel_names(), episodes).unwrap();
        let bytes = encode_dataset(&ds);
        let back = decode_dataset(&bytes).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(encode_dataset(&back), bytes);
    }
}
