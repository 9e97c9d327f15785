mod common;

use bayesgeo::geometry::{
    entropy_of_head_mean, global_pca_basis, head_mean_entropy, key_orthogonality, participation_ratio, pca,
    pca_centered, standardize_values,
};
use bayesgeo::stats::spearman;
use common::*;
use proptest::prelude::*;

#[test]
fn eigenvalues_match_jacobi_oracle() {
    for (n, d, seed) in [(12, 4, 1), (30, 6, 2), (5, 8, 3), (40, 3, 4)] {
        let rows = gaussian_rows(n, d, seed);
        let c = center(&rows);
        let s = pca_centered(&c, None).unwrap();
        let oracle = jacobi_eigenvalues(covariance(&rows));
        for (a, b) in s.eigenvalues.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "n={n} d={d}: {a} vs {b}");
        }
        let total: f64 = oracle.iter().sum();
        assert!((s.total_variance - total).abs() < 1e-8);
    }
}

#[test]
fn gram_route_matches_direct_route() {
    // N < d uses the Gram matrix; compare with the oracle's leading values
    let rows = gaussian_rows(6, 20, 7);
    let s = pca_centered(&center(&rows), None).unwrap();
    let oracle = jacobi_eigenvalues(covariance(&rows));
    for (a, b) in s.eigenvalues.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-8);
    }
    assert!(s.eigenvalues.len() == 6);
}

#[test]
fn isotropic_pr_near_dimension() {
    let rows = gaussian_rows(5000, 10, 11);
    let s = pca(&standardize_values(&rows).unwrap(), None).unwrap();
    assert!((s.participation_ratio - 10.0).abs() < 0.5, "{}", s.participation_ratio);
}

#[test]
fn global_basis_of_duplicates_matches_single() {
    let rows = gaussian_rows(40, 5, 13);
    let h: Vec<f64> = rows.iter().map(|r| r[0] + 0.1 * r[1]).collect();
    let one = global_pca_basis(std::slice::from_ref(&rows), Some(std::slice::from_ref(&h)), None).unwrap();
    let single = pca(&standardize_values(&rows).unwrap(), Some(&h)).unwrap();
    assert_eq!(one.summary.eigenvalues, single.eigenvalues);
    assert_eq!(one.summary.axis1, single.axis1);
    let two = global_pca_basis(&[rows.clone(), rows], Some(&[h.clone(), h]), None).unwrap();
    for (a, b) in two.summary.axis1.iter().zip(&single.axis1) {
        assert!((a - b).abs() < 1e-10);
    }
    assert!((two.summary.pc1_ratio - single.pc1_ratio).abs() < 1e-12);
}

#[test]
fn flipping_entropies_flips_axis() {
    let rows = gaussian_rows(50, 4, 17);
    let h: Vec<f64> = rows.iter().map(|r| r[2] - r[0]).collect();
    let neg: Vec<f64> = h.iter().map(|x| -x).collect();
    let vm = standardize_values(&rows).unwrap();
    let a = pca(&vm, Some(&h)).unwrap();
    let b = pca(&vm, Some(&neg)).unwrap();
    for (x, y) in a.axis1.iter().zip(&b.axis1) {
        assert_eq!(*x, -*y);
    }
    assert!(a.pc1_entropy_corr.unwrap() >= 0.0 && b.pc1_entropy_corr.unwrap() >= 0.0);
}

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3usize..5).prop_flat_map(|d| proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, d), 6..20))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pr_is_bounded(rows in rows_strategy()) {
        if let Ok(s) = pca_centered(&center(&rows), None) {
            let rank = s.eigenvalues.iter().filter(|&&l| l > 1e-9 * s.eigenvalues[0]).count() as f64;
            prop_assert!(s.participation_ratio >= 1.0 - 1e-9);
            prop_assert!(s.participation_ratio <= rank + 1e-9);
            prop_assert!(s.pc1_ratio <= s.pc12_ratio && s.pc12_ratio <= 1.0);
        }
    }

    #[test]
    fn rotation_leaves_spectrum_unchanged(rows in rows_strategy(), seed in 0u64..1000) {
        let c = center(&rows);
        let q = random_orthogonal(c[0].len(), seed);
        let (Ok(a), Ok(b)) = (pca_centered(&c, None), pca_centered(&rotate_rows(&c, &q), None)) else {
            return Ok(());
        };
        let scale = a.eigenvalues[0].max(1.0);
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((x - y).abs() < 1e-9 * scale);
        }
        prop_assert!((a.participation_ratio - b.participation_ratio).abs() < 1e-8);
        prop_assert!((a.pc1_ratio - b.pc1_ratio).abs() < 1e-9);
    }

    #[test]
    fn pr_of_explicit_spectra(l in proptest::collection::vec(0.01f64..10.0, 1..8)) {
        let pr = participation_ratio(&l);
        prop_assert!(pr >= 1.0 - 1e-12 && pr <= l.len() as f64 + 1e-12);
    }

    #[test]
    fn orthogonality_invariances(seed in 0u64..500, scale in proptest::collection::vec(0.1f64..5.0, 4)) {
        let d_model = 6;
        let d_k = 4;
        let k: Vec<f64> = gaussian_rows(d_model, d_k, seed).concat();
        let base = key_orthogonality(&k, d_model, d_k).unwrap();
        // rotate rows by an orthogonal matrix
        let rows: Vec<Vec<f64>> = k.chunks(d_k).map(|r| r.to_vec()).collect();
        let q = random_orthogonal(d_model, seed + 1);
        let rot: Vec<Vec<f64>> = (0..d_model)
            .map(|i| (0..d_k).map(|j| (0..d_model).map(|m| q[i][m] * rows[m][j]).sum()).collect())
            .collect();
        prop_assert!((key_orthogonality(&rot.concat(), d_model, d_k).unwrap() - base).abs() < 1e-12);
        // rescale and negate columns
        let scaled: Vec<f64> = k.iter().enumerate().map(|(i, x)| {
            let j = i % d_k;
            x * scale[j] * if j == 1 { -1.0 } else { 1.0 }
        }).collect();
        prop_assert!((key_orthogonality(&scaled, d_model, d_k).unwrap() - base).abs() < 1e-12);
        // permute columns
        let perm = [2, 0, 3, 1];
        let permuted: Vec<f64> = (0..d_model).flat_map(|i| perm.iter().map(move |&j| (i, j))).map(|(i, j)| k[i * d_k + j]).collect();
        prop_assert!((key_orthogonality(&permuted, d_model, d_k).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn jensen_bias_is_non_negative(raw in proptest::collection::vec(0.0f64..1.0, 2..40), heads in 1usize..4) {
        let t = raw.len() / heads;
        prop_assume!(t >= 1);
        let mut block = Vec::new();
        for h in 0..heads {
            let row = &raw[h * t..(h + 1) * t];
            let s: f64 = row.iter().sum::<f64>() + 1e-9 * t as f64;
            block.extend(row.iter().map(|x| (x + 1e-9) / s));
        }
        let m = head_mean_entropy(&block, heads).unwrap();
        let j = entropy_of_head_mean(&block, heads).unwrap();
        prop_assert!(j >= m - 1e-12);
    }

    #[test]
    fn spearman_is_monotone_invariant(xs in proptest::collection::vec(-3.0f64..3.0, 4..30), seed in 0u64..100) {
        let ys: Vec<f64> = gaussian_rows(xs.len(), 1, seed).concat();
        if let Ok(r) = spearman(&xs, &ys) {
            let fx: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
            let gy: Vec<f64> = ys.iter().map(|y| y * y * y + 2.0 * y).collect();
            prop_assert!((spearman(&fx, &gy).unwrap() - r).abs() < 1e-12);
        }
    }
}
