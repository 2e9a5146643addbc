mod common;

use common::{brute_nearest, brute_topk_blend, perplexity_oracle, random};
use spark_core::augment::{interpolate_topk, snap, topk_codes};
use spark_core::codebook::{codebook_perplexity, Codebook};
use spark_core::Tensor;

#[test]
fn quantize_matches_brute_force_on_ten_thousand_queries() {
    let d = 8;
    let cb = Codebook::new(random(&[64, d], 1, 1.0)).unwrap();
    let q = random(&[10_000, d], 2, 1.2);
    let (idx, z) = cb.quantize(&q).unwrap();
    for (r, &j) in idx.iter().enumerate() {
        let want = brute_nearest(q.row(r), cb.entries.data(), d);
        assert_eq!(j, want, "query {r}");
        assert_eq!(z.row(r), cb.entry(j));
    }
}

#[test]
fn interpolation_matches_brute_force_blend() {
    let d = 5;
    let cb = Codebook::new(random(&[64, d], 3, 1.0)).unwrap();
    let q = random(&[500, d], 4, 1.0);
    for (k, tau) in [(1, 0.5), (3, 0.1), (5, 1.0), (11, 2.5), (64, 0.7)] {
        let z = interpolate_topk(&q, &cb, k, tau).unwrap();
        for r in 0..q.rows() {
            let want = brute_topk_blend(q.row(r), cb.entries.data(), d, k, tau);
            for (a, b) in z.row(r).iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12, "k = {k}, τ = {tau}, row {r}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn snap_is_idempotent_and_k1_equals_snap() {
    let cb = Codebook::new(random(&[64, 4], 5, 1.0)).unwrap();
    let q = random(&[300, 4], 6, 2.0);
    let once = snap(&q, &cb).unwrap();
    assert_eq!(snap(&once, &cb).unwrap(), once);
    for tau in [1e-3, 1.0, 1e3] {
        assert_eq!(interpolate_topk(&q, &cb, 1, tau).unwrap(), once);
    }
}

#[test]
fn topk_is_sorted_and_complete() {
    let cb = Codebook::new(random(&[20, 3], 7, 1.0)).unwrap();
    let q = [0.3, -0.1, 0.7];
    let near = topk_codes(&q, &cb, 20);
    let mut seen: Vec<usize> = near.iter().map(|p| p.0).collect();
    seen.sort();
    assert_eq!(seen, (0..20).collect::<Vec<_>>());
    assert!(near.windows(2).all(|w| w[0].1 <= w[1].1));
}

#[test]
fn duplicate_codes_resolve_to_the_lower_index() {
    let entries = Tensor::matrix(3, 2, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let cb = Codebook::new(entries).unwrap();
    let (idx, _) = cb.quantize(&Tensor::matrix(1, 2, vec![0.1, 0.0]).unwrap()).unwrap();
    assert_eq!(idx, vec![1]);
}

#[test]
fn perplexity_matches_entropy_oracle() {
    for counts in [
        vec![3u64, 1, 0, 0],
        vec![5, 5, 5, 5],
        vec![9, 0, 0],
        vec![1, 2, 3, 4, 5, 6, 7],
    ] {
        let got = codebook_perplexity(&counts).unwrap();
        assert!((got - perplexity_oracle(&counts)).abs() < 1e-12);
    }
    assert!((codebook_perplexity(&[5, 5, 5, 5]).unwrap() - 4.0).abs() < 1e-12);
    assert!((codebook_perplexity(&[3, 1, 0, 0]).unwrap() - 1.7548).abs() < 1e-4);
}
