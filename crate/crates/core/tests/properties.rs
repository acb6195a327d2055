use circlaw::anticoncentration::{rho_iid, rho_star, BallModel, SmallBallQuery};
use circlaw::concentration::{decompose_distance, projection_complement, random_complex_basis, shifted_f};
use circlaw::linalg::{log_abs_det, C64, CVector};
use circlaw::logdet::logdet_via_distances;
use circlaw::rng::from_seed;
use circlaw::sampler::{sample_fixed_sum_vector, SignVector};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn values_1d() -> impl Strategy<Value = Vec<i32>> {
    prop::collection::vec(-6i32..=6, 2..=8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rho_iid_is_monotone_in_beta(v in values_1d(), b in 0u32..6, extra in 0u32..4, s_frac in -1i64..=1) {
        let n = v.len() as i64;
        let s = s_frac * (n / 2);
        let points: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        let lo = SmallBallQuery::one_dimensional(&points, b as f64, BallModel::Iid { s }).unwrap();
        let hi = SmallBallQuery::one_dimensional(&points, (b + extra) as f64, BallModel::Iid { s }).unwrap();
        prop_assert!(rho_iid(&lo).unwrap().value <= rho_iid(&hi).unwrap().value);
    }

    #[test]
    fn rho_star_is_monotone_in_beta_planar(
        v in prop::collection::vec((-4i32..=4, -4i32..=4), 2..=7),
        b in 0u32..4,
        extra in 1u32..3,
    ) {
        let n = v.len() as i64;
        let s_bar = if n % 2 == 0 { 0 } else { 1 };
        let points: Vec<[f64; 2]> = v.iter().map(|&(a, c)| [a as f64, c as f64]).collect();
        let lo = SmallBallQuery::planar(points.clone(), b as f64, BallModel::FixedSum { s_bar }).unwrap();
        let hi = SmallBallQuery::planar(points, (b + extra) as f64, BallModel::FixedSum { s_bar }).unwrap();
        prop_assert!(rho_star(&lo).unwrap().value <= rho_star(&hi).unwrap().value);
    }

    #[test]
    fn rho_star_ignores_common_translation(v in values_1d(), w in -5i32..=5, b in 0u32..5) {
        let n = v.len() as i64;
        let s_bar = if n % 2 == 0 { 2.min(n) } else { 1 };
        let model = BallModel::FixedSum { s_bar };
        let base: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        let moved: Vec<f64> = v.iter().map(|&x| (x + w) as f64).collect();
        let a = rho_star(&SmallBallQuery::one_dimensional(&base, b as f64, model).unwrap()).unwrap();
        let c = rho_star(&SmallBallQuery::one_dimensional(&moved, b as f64, model).unwrap()).unwrap();
        prop_assert_eq!(a.value, c.value);
    }

    #[test]
    fn projection_complement_invariants(n in 3usize..12, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let k = ((n - 1) as f64 * k_frac) as usize;
        let mut rng = from_seed(seed);
        let basis = random_complex_basis(n, k, &mut rng);
        let p = projection_complement(&basis, n).unwrap();
        prop_assert_eq!(p.k(), k);
        let inv = p.invariants();
        prop_assert!(inv.holds(), "{:?}", inv);
        prop_assert!(inv.trace < 1e-8);
        for b in &basis {
            prop_assert!(p.apply(b).norm() < 1e-9 * b.norm().max(1.0));
        }
    }

    #[test]
    fn distance_decomposition_matches_dense_projection(
        n in 4usize..10,
        k_frac in 0.0f64..1.0,
        s_frac in -1.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let k = ((n - 1) as f64 * k_frac) as usize;
        let s = {
            let raw = (s_frac * n as f64) as i64;
            if (n as i64 + raw) % 2 == 0 { raw } else { raw - 1 }
        };
        let mut rng = from_seed(seed);
        let p = projection_complement(&random_complex_basis(n, k, &mut rng), n).unwrap();
        let f = CVector::from_fn(n, |i, _| C64::new((i as f64).sin(), (i as f64 * 0.7).cos() * 0.3));
        let x = sample_fixed_sum_vector(n, s, &mut rng).unwrap();
        let d = decompose_distance(&p, &x, &f, s).unwrap();
        let v = CVector::from_fn(n, |i, _| f[i] + x.entries()[i] as f64);
        let direct = (p.matrix() * &v).norm_squared();
        let df = (p.matrix() * shifted_f(&f, s)).norm_squared();
        prop_assert!((d.d_prime_sq - direct).abs() < 1e-9 * (1.0 + direct));
        prop_assert!((d.d_f_prime_sq - df).abs() < 1e-9 * (1.0 + df));
        prop_assert_eq!(d.base, (n - k) as f64);
        let rebuilt = d.base + d.d_f_prime_sq + d.y;
        prop_assert!((rebuilt - d.d_prime_sq).abs() < 1e-9 * (1.0 + direct));
    }

    #[test]
    fn iid_mean_of_y_is_exact(n in 3usize..9, k_frac in 0.0f64..1.0, s_frac in -1.0f64..1.0, seed in any::<u64>()) {
        let k = ((n - 1) as f64 * k_frac) as usize;
        let s = (s_frac * (n - 1) as f64) as i64;
        let mut rng = from_seed(seed);
        let p = projection_complement(&random_complex_basis(n, k, &mut rng), n).unwrap();
        let f = CVector::from_fn(n, |i, _| C64::new(0.5 - i as f64 * 0.1, 0.2));
        let q = 0.5 + s as f64 / (2.0 * n as f64);
        let mut mean = 0.0;
        for mask in 0..1u64 << n {
            let x = SignVector::from_mask(n, mask);
            let plus = x.plus_count() as i32;
            let w = q.powi(plus) * (1.0 - q).powi(n as i32 - plus);
            mean += w * decompose_distance(&p, &x, &f, s).unwrap().y;
        }
        let expected = -((n - k) as f64) * (s as f64 / n as f64).powi(2);
        prop_assert!((mean - expected).abs() < 1e-9 * n as f64, "{} vs {}", mean, expected);
    }

    #[test]
    fn logdet_is_row_permutation_invariant(n in 2usize..9, seed in any::<u64>(), z_re in -2.0f64..2.0, z_im in 0.1f64..2.0) {
        let mut rng = from_seed(seed);
        let x = DMatrix::from_fn(n, n, |_, _| if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 });
        let z = C64::new(z_re, z_im);
        let rows: Vec<CVector> = (0..n)
            .map(|i| CVector::from_fn(n, |j, _| C64::from(x[(i, j)]) - if i == j { z } else { C64::from(0.0) }))
            .collect();
        let a = logdet_via_distances(&rows, z).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let permuted: Vec<CVector> = perm.iter().map(|&i| rows[i].clone()).collect();
        let b = logdet_via_distances(&permuted, z).unwrap();
        prop_assert!((a.total - b.total).abs() < 1e-9 * (1.0 + a.total.abs()));
        let dense = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let lu = log_abs_det(&dense).unwrap();
        prop_assert!((a.total - lu).abs() < 1e-9 * (1.0 + lu.abs()));
    }
}
