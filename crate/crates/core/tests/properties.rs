use proptest::prelude::*;

use pwdlab::cccn::{guess_grid, lab_parameters, noise_rates};
use pwdlab::distributions::{bernoulli_kl, kl_divergence, tv_distance, DistributionSpec};
use pwdlab::model::{concept_class, ContextVector};
use pwdlab::reductions::ml_sample_size;

fn bern() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..0.99, 1..6)
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..6).prop_flat_map(|k| (prop::collection::vec(0.01f64..0.99, k), prop::collection::vec(0.01f64..0.99, k)))
}

/// `KL(P || Q)` in bits by summing over the whole cube.
fn kl_by_enumeration(p: &[f64], q: &[f64]) -> f64 {
    let k = p.len();
    let mut total = 0.0;
    for y in 0..(1u32 << k) {
        let (mut pp, mut qq) = (1.0, 1.0);
        for j in 0..k {
            let bit = (y >> j) & 1 == 1;
            pp *= if bit { p[j] } else { 1.0 - p[j] };
            qq *= if bit { q[j] } else { 1.0 - q[j] };
        }
        total += pp * (pp / qq).log2();
    }
    total
}

proptest! {
    #[test]
    fn product_kl_matches_enumeration((p, q) in pair()) {
        let closed = kl_divergence(
            &DistributionSpec::BernoulliProduct { biases: p.clone() },
            &DistributionSpec::BernoulliProduct { biases: q.clone() },
        ).unwrap();
        let brute = kl_by_enumeration(&p, &q);
        prop_assert!((closed - brute).abs() < 1e-9 * brute.abs().max(1.0));
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_self(p in bern()) {
        let d = DistributionSpec::BernoulliProduct { biases: p };
        prop_assert_eq!(kl_divergence(&d, &d).unwrap(), 0.0);
    }

    #[test]
    fn pinsker((p, q) in pair()) {
        let (a, b) = (
            DistributionSpec::BernoulliProduct { biases: p },
            DistributionSpec::BernoulliProduct { biases: q },
        );
        let tv = tv_distance(&a, &b).unwrap();
        let kl = kl_divergence(&a, &b).unwrap();
        prop_assert!(tv <= (kl * std::f64::consts::LN_2 / 2.0).sqrt() + 1e-12);
    }

    #[test]
    fn log_sum_mixture_bound(p in 0.01f64..0.99, q in 0.01f64..0.99, w in 0.0f64..1.0) {
        let r = (1.0 - w) * p + w * q;
        prop_assert!(bernoulli_kl(p, r) <= w * bernoulli_kl(p, q) + 1e-12);
    }

    #[test]
    fn lab_identity(p in 0.0f64..=1.0, q in 0.0f64..=1.0, xi in 0.01f64..=1.0) {
        prop_assume!((q - p).abs() >= xi);
        let a = lab_parameters(p, q, xi).unwrap();
        let target = 0.5 - xi / 4.0;
        prop_assert!((q * a.a0 + (1.0 - q) * a.b0 - target).abs() < 1e-12);
        prop_assert!((p * a.a1 + (1.0 - p) * a.b1 - target).abs() < 1e-12);
        for v in [a.a0, a.a1, a.b0, a.b1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((a.a0 + a.a1 - 1.0).abs() < 1e-15 && (a.b0 + a.b1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noise_bound_under_perturbation(
        p_hat in 0.0f64..=1.0, q_hat in 0.0f64..=1.0, xi in 0.01f64..=1.0,
        u in -1.0f64..=1.0, v in -1.0f64..=1.0,
    ) {
        prop_assume!((q_hat - p_hat).abs() >= xi);
        let a = lab_parameters(p_hat, q_hat, xi).unwrap();
        let delta = xi / 8.0;
        let p = (p_hat + u * delta).clamp(0.0, 1.0);
        let q = (q_hat + v * delta).clamp(0.0, 1.0);
        let (e0, e1) = noise_rates(p, q, &a);
        prop_assert!(e0.max(e1) <= 0.5 - xi / 4.0 + delta + 1e-12);
    }

    #[test]
    fn grid_covers_separated_pairs(p in 0.0f64..=1.0, q in 0.0f64..=1.0, xi in 0.05f64..=1.0) {
        prop_assume!((q - p).abs() >= xi);
        let grid = guess_grid(xi).unwrap();
        let close = |x: f64| grid.values.iter().copied().filter(move |g| (g - x).abs() <= grid.delta + 1e-12);
        let covered = close(p).any(|ph| close(q).any(|qh| lab_parameters(ph, qh, xi).is_ok()));
        prop_assert!(covered);
    }

    #[test]
    fn context_vector_round_trip(bits in prop::collection::vec(0u8..=1, 1..64)) {
        let x = ContextVector::from_bits(&bits).unwrap();
        prop_assert_eq!(x.to_vec(), bits.clone());
        for (i, b) in bits.iter().enumerate() {
            prop_assert_eq!(x.get(i + 1), *b);
        }
        let json = serde_json::to_string(&x).unwrap();
        prop_assert_eq!(serde_json::from_str::<ContextVector>(&json).unwrap(), x);
    }

    #[test]
    fn selection_size_grows_with_list(m in 1.0f64..100.0, eps in 0.01f64..1.0, t in 1usize..10_000, delta in 0.01f64..0.25) {
        prop_assert!(ml_sample_size(m, eps, t + 1, delta) >= ml_sample_size(m, eps, t, delta));
        let failure = (t as f64 + 1.0) * (-2.0 * ml_sample_size(m, eps, t, delta) as f64 * eps * eps / (m * m)).exp();
        prop_assert!(failure <= delta / 3.0 * (1.0 + 1e-9));
    }
}

#[test]
fn concept_class_size_matches_binomials() {
    let choose = |n: usize, k: usize| (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
    for n in 1..=12 {
        for s in 1..=3.min(n) {
            let expected = 2 + n + (2..=s).map(|k| choose(n, k)).sum::<usize>();
            assert_eq!(concept_class(n, s).len(), expected);
        }
    }
}
