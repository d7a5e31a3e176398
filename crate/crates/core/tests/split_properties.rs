//! Split invariants over many random corpora.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentiment_core::corpus::{split, SentimentLabel, SplitError, SplitPlan, SurveyRecord};

fn random_corpus(rng: &mut ChaCha8Rng, n: usize) -> Vec<SurveyRecord> {
    (0..n)
        .map(|i| {
            let label = if rng.random_bool(0.4) { SentimentLabel::Positive } else { SentimentLabel::Negative };
            SurveyRecord::new(format!("r{i}"), format!("TEXT {i}"), "en").with_label(label)
        })
        .collect()
}

fn ids(rs: &[SurveyRecord]) -> Vec<&str> {
    rs.iter().map(|r| r.id.as_str()).collect()
}

#[test]
fn fractional_plans_on_500_corpora() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    for case in 0..500 {
        let n = rng.random_range(2..300);
        let corpus = random_corpus(&mut rng, n);
        for f in [0.8, 0.9] {
            let plan = SplitPlan::fractional(f, case);
            let (train, test) = split(&corpus, &plan).unwrap();
            assert_eq!(train.len(), (f * n as f64).round() as usize, "n={n} f={f}");
            let a: HashSet<_> = ids(&train).into_iter().collect();
            let b: HashSet<_> = ids(&test).into_iter().collect();
            assert!(a.is_disjoint(&b));
            assert_eq!(a.len() + b.len(), n);
            assert_eq!(a.union(&b).count(), n);
            let again = split(&corpus, &plan).unwrap();
            assert_eq!((ids(&again.0), ids(&again.1)), (ids(&train), ids(&test)));
        }
    }
}

#[test]
fn balanced_pools_are_exactly_equal() {
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    for case in 0..500 {
        let n = rng.random_range(20..300);
        let corpus = random_corpus(&mut rng, n);
        let pos = corpus.iter().filter(|r| r.label == Some(SentimentLabel::Positive)).count();
        let minority = pos.min(n - pos);
        if minority == 0 {
            continue;
        }
        let k = rng.random_range(1..=minority);
        let plan = SplitPlan::balanced(k, case);
        let (train, test) = split(&corpus, &plan).unwrap();
        let pool: Vec<_> = train.iter().chain(&test).collect();
        assert_eq!(pool.len(), 2 * k);
        let pool_pos = pool.iter().filter(|r| r.label == Some(SentimentLabel::Positive)).count();
        assert_eq!(pool_pos, k);
        assert_eq!(train.len(), (0.8 * (2 * k) as f64).round() as usize);
        let unique: HashSet<_> = pool.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(unique.len(), 2 * k);
        let again = split(&corpus, &plan).unwrap();
        assert_eq!((ids(&again.0), ids(&again.1)), (ids(&train), ids(&test)));
    }
}

#[test]
fn different_seeds_give_different_partitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let corpus = random_corpus(&mut rng, 100);
    let a = split(&corpus, &SplitPlan::fractional(0.8, 1)).unwrap();
    let b = split(&corpus, &SplitPlan::fractional(0.8, 2)).unwrap();
    assert_ne!(ids(&a.0), ids(&b.0));
}

#[test]
fn insufficient_minority_reports_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let corpus = random_corpus(&mut rng, 30);
    let pos = corpus.iter().filter(|r| r.label == Some(SentimentLabel::Positive)).count();
    match split(&corpus, &SplitPlan::balanced(31, 0)) {
        Err(SplitError::InsufficientClass {
            requested: 31,
            negative,
            positive,
        }) => assert_eq!((negative, positive), (30 - pos, pos)),
        other => panic!("unexpected {other:?}"),
    }
}
