use num_rational::Ratio;
use proptest::prelude::*;
use streambank::cost::{
    incremental_terms, predict_batchless, predict_incremental_closed, predict_incremental_sum,
    ratio_for_batch_equal_to_target, CostQuery,
};
use streambank::rate::SampleRate;

/// (N, B, r) with B | N and r·B integral, N ≤ 4096.
fn query_strategy() -> impl Strategy<Value = CostQuery> {
    (1u64..=8, 1u64..=16, 1u64..=8, 1u64..=64).prop_filter_map(
        "N must stay within 4096",
        |(num_extra, den, kept, batches)| {
            let num = num_extra.min(den);
            let rate = SampleRate::new(num, den).ok()?;
            // B = kept · den / gcd-reduced numerator keeps r·B integral.
            let b = kept * rate.denom();
            let n = b * batches;
            (n <= 4096).then(|| CostQuery::new(n, b, rate).unwrap())
        },
    )
}

#[test]
fn worked_examples() {
    let small = CostQuery::new(16, 4, SampleRate::new(1, 4).unwrap()).unwrap();
    assert_eq!(predict_incremental_sum(&small).unwrap(), 60);
    assert_eq!(predict_batchless(&small).unwrap(), 64);

    let large = CostQuery::new(10_000, 100, "0.01".parse().unwrap()).unwrap();
    let inc = predict_incremental_sum(&large).unwrap();
    let full = predict_batchless(&large).unwrap();
    assert_eq!((inc, full), (838_300, 1_000_000));
    assert_eq!(Ratio::new(inc, full), Ratio::new(8383, 10_000));
    // Within 1% of the 5/6 asymptote.
    let asymptote: f64 = 5.0 / 6.0;
    assert!((0.8383f64 - asymptote).abs() / asymptote <= 0.01);
}

#[test]
fn batch_equal_to_target_ratio_matches_the_sum() {
    for den in [2u64, 3, 4, 5, 10, 20, 50] {
        for t in [1u64, 2, 3] {
            let rate = SampleRate::new(1, den).unwrap();
            let n = den * den * t;
            let q = CostQuery::new(n, den * t, rate).unwrap();
            let measured = Ratio::new(
                predict_incremental_sum(&q).unwrap() as i128,
                predict_batchless(&q).unwrap() as i128,
            );
            assert_eq!(
                measured,
                ratio_for_batch_equal_to_target(rate),
                "r = 1/{den}, t = {t}"
            );
        }
    }
}

#[test]
fn ratio_approaches_five_sixths() {
    let mut last = Ratio::from_integer(1);
    for den in [10u64, 100, 1000, 10_000, 1_000_000] {
        let v = ratio_for_batch_equal_to_target(SampleRate::new(1, den).unwrap());
        assert!(v < last);
        assert!(v > Ratio::new(5, 6));
        last = v;
    }
    let tiny = ratio_for_batch_equal_to_target(SampleRate::new(1, 1_000_000).unwrap());
    assert!(tiny - Ratio::new(5, 6) < Ratio::new(1, 1_000_000));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn closed_form_equals_the_sum(q in query_strategy()) {
        let sum = predict_incremental_sum(&q).unwrap();
        let closed = predict_incremental_closed(&q).unwrap();
        prop_assert_eq!(closed.half_term + closed.extra_term, sum);
        prop_assert_eq!(closed.total(), sum);
    }

    #[test]
    fn one_term_per_batch(q in query_strategy()) {
        prop_assert_eq!(incremental_terms(&q).unwrap().len() as u64, q.n_total / q.batch);
    }
}

#[test]
fn savings_need_batches_that_are_large_against_the_target() {
    // Sampling everything in unit batches costs more than one shot.
    let full = CostQuery::new(2, 1, SampleRate::new(1, 1).unwrap()).unwrap();
    assert!(predict_incremental_sum(&full).unwrap() > predict_batchless(&full).unwrap());
    // r = 1/2, B = 2: equal at two batches, worse from three on.
    let half = SampleRate::new(1, 2).unwrap();
    let two = CostQuery::new(4, 2, half).unwrap();
    assert_eq!(
        predict_incremental_sum(&two).unwrap(),
        predict_batchless(&two).unwrap()
    );
    let three = CostQuery::new(6, 2, half).unwrap();
    assert!(predict_incremental_sum(&three).unwrap() > predict_batchless(&three).unwrap());
}
