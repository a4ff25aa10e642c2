use bsa_core::metrics::{
    auroc, corrected_sens_spec, mann_whitney_auc, roc_curve_ova, youden_threshold, ScoreMatrix, ScoreRow,
};
use bsa_core::ActionClass;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random fixture with coarse scores so ties are common.
fn fixture(rng: &mut ChaCha8Rng) -> ScoreMatrix {
    let n = rng.gen_range(4..60);
    let levels = rng.gen_range(2..12) as f64;
    let rows = (0..n)
        .map(|i| {
            let label = ActionClass::ALL[rng.gen_range(0..3)];
            let mut raw = [0.0; 10];
            for (j, r) in raw.iter_mut().enumerate() {
                let bump = if j == label.index() { rng.gen_range(0.0..2.0) } else { 0.0 };
                *r = ((rng.gen::<f64>() + bump) * levels).round() + 1.0;
            }
            let s: f64 = raw.iter().sum();
            ScoreRow {
                sample_id: format!("s{i}"),
                label,
                group: None,
                fold: None,
                probs: raw.map(|r| r / s),
            }
        })
        .collect();
    ScoreMatrix::new(rows).unwrap()
}

/// Fraction of (positive, negative) pairs ordered correctly, ties worth half.
fn pairwise_auc(scores: &[(f64, bool)]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for &(sp, _) in scores.iter().filter(|x| x.1) {
        for &(sn, _) in scores.iter().filter(|x| !x.1) {
            pairs += 1.0;
            if sp > sn {
                credit += 1.0;
            } else if sp == sn {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

fn sweep(scores: &[(f64, bool)]) -> (f64, f64) {
    let n_pos = scores.iter().filter(|x| x.1).count() as f64;
    let n_neg = scores.len() as f64 - n_pos;
    let mut thresholds: Vec<f64> = scores.iter().map(|x| x.0).collect();
    thresholds.push(f64::INFINITY);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for &t in &thresholds {
        let tp = scores.iter().filter(|x| x.1 && x.0 >= t).count() as f64;
        let tn = scores.iter().filter(|x| !x.1 && x.0 < t).count() as f64;
        let j = tp / n_pos + tn / n_neg - 1.0;
        if j > best.1 + 1e-12 {
            best = (t, j);
        }
    }
    best
}

#[test]
fn random_fixtures_agree_with_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 500 {
        let m = fixture(&mut rng);
        for class in m.scorable_classes() {
            let pairs: Vec<(f64, bool)> = m.rows().iter().map(|r| (r.score(class), r.label == class)).collect();
            let curve = roc_curve_ova(&m, class).unwrap();
            let area = auroc(&curve);
            assert!((area - mann_whitney_auc(&m, class).unwrap()).abs() < 1e-9);
            assert!((area - pairwise_auc(&pairs)).abs() < 1e-9);

            let (tau, j) = youden_threshold(&curve);
            let (want_tau, want_j) = sweep(&pairs);
            assert_eq!(tau, want_tau);
            assert!((j - want_j).abs() < 1e-12);

            let op = corrected_sens_spec(&m, &[(class, tau)]).unwrap()[0];
            let point = curve.points.iter().find(|p| p.threshold == tau).unwrap();
            assert_eq!((op.sensitivity, op.specificity), (point.sensitivity, point.specificity));
            assert_eq!((op.tp, op.fp, op.tn, op.fn_), (point.tp, point.fp, point.tn, point.fn_));
            checked += 1;
        }
    }
}

#[test]
fn sample_order_does_not_change_metrics() {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = fixture(&mut rng);
    let mut rows = m.rows().to_vec();
    rows.shuffle(&mut rng);
    let shuffled = ScoreMatrix::new(rows).unwrap();
    for class in m.scorable_classes() {
        let a = roc_curve_ova(&m, class).unwrap();
        let b = roc_curve_ova(&shuffled, class).unwrap();
        assert_eq!(a, b);
        assert_eq!(youden_threshold(&a), youden_threshold(&b));
    }
}

#[test]
fn label_independent_scores_give_chance_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let rows = (0..10_000)
        .map(|i| {
            let label = if rng.gen_bool(0.5) { ActionClass::Aspiration } else { ActionClass::Clipping };
            let s: f64 = rng.gen();
            let mut probs = [0.0; 10];
            probs[0] = s;
            probs[1] = 1.0 - s;
            ScoreRow {
                sample_id: format!("r{i}"),
                label,
                group: None,
                fold: None,
                probs,
            }
        })
        .collect();
    let m = ScoreMatrix::new(rows).unwrap();
    let curve = roc_curve_ova(&m, ActionClass::Aspiration).unwrap();
    assert!((auroc(&curve) - 0.5).abs() < 0.02);
    assert!(youden_threshold(&curve).1 < 0.05);
}
