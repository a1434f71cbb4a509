use fairtrip_core::seeded_rng;
use fairtrip_core::triplet::{select_triplet, ClassIndex, Positive, SelectionMethod};
use rand::Rng as _;

fn labels(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = seeded_rng(seed);
    let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.3))).collect();
    // both classes need at least two members for classical selection
    y[..2].fill(0);
    y[2..4].fill(1);
    y
}

#[test]
fn every_draw_respects_the_method_rules() {
    let y = labels(500, 1);
    let index = ClassIndex::new(&y);
    let mut rng = seeded_rng(2);
    for method in SelectionMethod::ALL {
        index.check_method(method).unwrap();
        for _ in 0..10_000 {
            let a = rng.gen_range(0..y.len());
            let t = select_triplet(method, &index, a, &mut rng).unwrap();
            assert_eq!(t.anchor, a);
            assert_eq!(t.method, method);
            match method {
                SelectionMethod::Classical => {
                    let Positive::Sample(p) = t.positive else { panic!("{t:?}") };
                    assert!(p != a && y[p] == y[a]);
                    assert_ne!(y[t.negative], y[a]);
                }
                SelectionMethod::Counterfactual => {
                    assert_eq!(t.positive, Positive::Counterfactual);
                    assert_ne!(y[t.negative], y[a]);
                }
                SelectionMethod::TargetAgnosticCounterfactual => {
                    assert_eq!(t.positive, Positive::Counterfactual);
                    assert_ne!(t.negative, a);
                }
                SelectionMethod::Random => {
                    let Positive::Sample(p) = t.positive else { panic!("{t:?}") };
                    assert_ne!(p, a);
                    assert_ne!(t.negative, a);
                }
                SelectionMethod::IdenticalPositive => {
                    assert_eq!(t.positive, Positive::Anchor);
                    assert_ne!(y[t.negative], y[a]);
                }
            }
        }
    }
}

/// Pearson statistic of observed counts against a uniform expectation.
fn chi_square(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

// upper 0.1% points of chi-square with 9 and 10 degrees of freedom
const CHI2_9_999: f64 = 27.877;
const CHI2_10_999: f64 = 29.588;

#[test]
fn classical_draws_are_uniform() {
    // class 0 = {0..=10}, class 1 = {11..=21}
    let y: Vec<u8> = (0..22).map(|i| u8::from(i > 10)).collect();
    let index = ClassIndex::new(&y);
    let mut rng = seeded_rng(3);
    let anchor = 4;
    let mut pos = [0u64; 11];
    let mut neg = [0u64; 11];
    for _ in 0..11_000 {
        let t = select_triplet(SelectionMethod::Classical, &index, anchor, &mut rng).unwrap();
        let Positive::Sample(p) = t.positive else { unreachable!() };
        // positives skip the anchor itself
        pos[if p > anchor { p - 1 } else { p }] += 1;
        neg[t.negative - 11] += 1;
    }
    assert_eq!(pos[10], 0);
    assert!(chi_square(&pos[..10]) < CHI2_9_999, "positives {pos:?}");
    assert!(chi_square(&neg) < CHI2_10_999, "negatives {neg:?}");
}

#[test]
fn random_draws_cover_all_other_samples_uniformly() {
    let y: Vec<u8> = (0..12).map(|i| u8::from(i % 3 == 0)).collect();
    let index = ClassIndex::new(&y);
    let mut rng = seeded_rng(4);
    let anchor = 7;
    let mut counts = [0u64; 12];
    for _ in 0..22_000 {
        let t = select_triplet(SelectionMethod::Random, &index, anchor, &mut rng).unwrap();
        let Positive::Sample(p) = t.positive else { unreachable!() };
        counts[p] += 1;
        counts[t.negative] += 1;
    }
    assert_eq!(counts[anchor], 0);
    let others: Vec<u64> = counts.iter().enumerate().filter(|&(i, _)| i != anchor).map(|(_, &c)| c).collect();
    assert!(chi_square(&others) < CHI2_10_999, "{counts:?}");
}

#[test]
fn seeded_draws_are_reproducible() {
    let y = labels(100, 5);
    let index = ClassIndex::new(&y);
    for method in SelectionMethod::ALL {
        let draw = || {
            let mut rng = seeded_rng(9);
            (0..200).map(|a| select_triplet(method, &index, a % 100, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }
}

#[test]
fn degenerate_label_sets_are_rejected() {
    let single = ClassIndex::new(&[1, 1, 1]);
    for method in SelectionMethod::ALL {
        assert_eq!(single.check_method(method).is_err(), method.negative_from_other_class(), "{method}");
    }
    let lonely = ClassIndex::new(&[0, 0, 1]);
    assert!(lonely.check_method(SelectionMethod::Classical).is_err());
    assert!(lonely.check_method(SelectionMethod::Counterfactual).is_ok());
    assert!(ClassIndex::new(&[0]).check_method(SelectionMethod::Random).is_err());
}
