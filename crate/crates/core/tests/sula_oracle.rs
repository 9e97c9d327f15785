use bayesgeo::numeric::GaussLegendre;
use bayesgeo::sula::{
    entropy_curve, exact_p_positive, exact_posterior, exact_posterior_counts, quadrature_posterior, Label, LabelPolicy,
};
use num_rational::BigRational;
use proptest::prelude::*;

fn all_sequences(k: usize) -> impl Iterator<Item = Vec<Label>> {
    (0u32..(1 << k)).map(move |bits| {
        (0..k)
            .map(|i| if bits >> i & 1 == 1 { Label::Positive } else { Label::Negative })
            .collect()
    })
}

#[test]
fn exact_and_quadrature_agree_on_every_sequence_up_to_8() {
    for k in 0..=8 {
        for labels in all_sequences(k) {
            let e = exact_posterior(&labels).unwrap();
            let q = quadrature_posterior(&labels).unwrap();
            assert!((e.p_positive - q.p_positive).abs() < 1e-9, "{labels:?}");
            assert!((e.predictive_entropy_bits - q.predictive_entropy_bits).abs() < 1e-9, "{labels:?}");
            assert!(
                (e.theta_posterior_entropy_nats - q.theta_posterior_entropy_nats).abs() < 1e-9,
                "{labels:?}: {} vs {}",
                e.theta_posterior_entropy_nats,
                q.theta_posterior_entropy_nats
            );
        }
    }
}

#[test]
fn anchors() {
    let prior = exact_posterior(&[]).unwrap();
    assert_eq!(prior.predictive_entropy_bits, 1.0);
    assert_eq!(prior.p_positive, 0.5);
    let p = exact_p_positive(1, 0);
    assert_eq!(p, BigRational::new(91.into(), 150.into()));
    assert_eq!(exact_posterior(&[Label::Positive]).unwrap().p_positive, 91.0 / 150.0);
}

#[test]
fn curve_decreases_at_point_seven() {
    let c = entropy_curve(&LabelPolicy::with_consistency(0.7), &[0, 1, 2, 4, 8]).unwrap();
    assert!(c.is_strictly_decreasing());
}

proptest! {
    #[test]
    fn swapping_counts_mirrors_the_prediction(a in 0usize..30, b in 0usize..30) {
        let x = exact_posterior_counts(a, b);
        let y = exact_posterior_counts(b, a);
        prop_assert!((x.p_positive + y.p_positive - 1.0).abs() < 1e-14);
        prop_assert!((x.predictive_entropy_bits - y.predictive_entropy_bits).abs() < 1e-14);
        prop_assert!((x.theta_posterior_entropy_nats - y.theta_posterior_entropy_nats).abs() < 1e-10);
    }

    #[test]
    fn posterior_is_normalized(a in 0usize..20, b in 0usize..20) {
        let x = exact_posterior_counts(a, b);
        let s: f64 = x.mixture_weights.iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        let mass = GaussLegendre::new(128).integrate(0.0, 1.0, |t| x.density(t));
        prop_assert!((mass - 1.0).abs() < 1e-10);
        prop_assert!(x.p_positive > 0.1 && x.p_positive < 0.9);
    }

    #[test]
    fn order_does_not_matter(seq in proptest::collection::vec(any::<bool>(), 0..12), rot in 0usize..12) {
        let labels: Vec<Label> = seq.iter().map(|&b| if b { Label::Positive } else { Label::Negative }).collect();
        let mut moved = labels.clone();
        if !moved.is_empty() {
            let r = rot % moved.len();
            moved.rotate_left(r);
        }
        prop_assert_eq!(exact_posterior(&labels).unwrap(), exact_posterior(&moved).unwrap());
    }
}
