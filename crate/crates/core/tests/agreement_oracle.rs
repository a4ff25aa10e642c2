use bsa_core::agreement::{cohen_kappa, gwet_ac1, observed_agreement, pearson_corr, RatingPair};
use bsa_core::ActionClass;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Oracle {
    po: f64,
    kappa: Option<f64>,
    pearson: Option<f64>,
    ac1: Option<f64>,
    ac1_canonical: Option<f64>,
}

/// Recomputes every statistic by scanning the raw vectors once per category.
fn oracle(a: &[usize], b: &[usize]) -> Oracle {
    let n = a.len() as f64;
    let agree = (0..a.len()).filter(|&i| a[i] == b[i]).count() as f64;
    let po = agree / n;

    let mut pe_kappa = 0.0;
    let mut pe_gwet = 0.0;
    let mut observed = 0;
    for c in 0..10 {
        let ca = a.iter().filter(|&&x| x == c).count() as f64;
        let cb = b.iter().filter(|&&x| x == c).count() as f64;
        pe_kappa += (ca / n) * (cb / n);
        if ca + cb > 0.0 {
            observed += 1;
            let pi = (ca + cb) / (2.0 * n);
            pe_gwet += pi * (1.0 - pi);
        }
    }
    let ratio = |pe: f64| if pe < 1.0 { Some((po - pe) / (1.0 - pe)) } else { None };
    let canonical_pe = if observed > 1 { pe_gwet / (observed - 1) as f64 } else { pe_gwet };

    // computational form of Pearson's r
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        let (x, y) = (a[i] as f64, b[i] as f64);
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    let pearson = if vx > 0.0 && vy > 0.0 {
        Some((n * sxy - sx * sy) / (vx * vy).sqrt())
    } else {
        None
    };

    Oracle {
        po,
        kappa: ratio(pe_kappa),
        pearson,
        ac1: ratio(pe_gwet),
        ac1_canonical: ratio(canonical_pe),
    }
}

fn close(name: &str, got: Option<f64>, want: Option<f64>) {
    match (got, want) {
        (Some(g), Some(w)) => assert!((g - w).abs() < 1e-12, "{name}: {g} vs {w}"),
        (None, None) => {}
        _ => panic!("{name}: {got:?} vs {want:?}"),
    }
}

#[test]
fn random_pairs_match_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let n = rng.gen_range(2..=50);
        let k = rng.gen_range(1..=10);
        let agree_bias: f64 = rng.gen();
        let a: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let b: Vec<usize> = a
            .iter()
            .map(|&x| if rng.gen::<f64>() < agree_bias { x } else { rng.gen_range(0..k) })
            .collect();
        let to_class = |v: &[usize]| v.iter().map(|&i| ActionClass::ALL[i]).collect::<Vec<_>>();
        let pair = RatingPair::from_vectors(&to_class(&a), &to_class(&b));
        let want = oracle(&a, &b);

        assert!((observed_agreement(&pair).unwrap() - want.po).abs() < 1e-12);
        close("kappa", cohen_kappa(&pair).ok(), want.kappa);
        close("pearson", pearson_corr(&pair).ok(), want.pearson);
        close("ac1", gwet_ac1(&pair, false).ok(), want.ac1);
        close("ac1 canonical", gwet_ac1(&pair, true).ok(), want.ac1_canonical);
    }
}

#[test]
fn large_observed_agreement_arithmetic() {
    let n = 8219;
    let a = vec![ActionClass::Dissection; n];
    let mut b = a.clone();
    for x in b.iter_mut().take(324) {
        *x = ActionClass::Clipping;
    }
    let po = observed_agreement(&RatingPair::from_vectors(&a, &b)).unwrap();
    assert_eq!(format!("{:.4}", po * 100.0), "96.0579");
    assert_eq!(format!("{:.2}", po * 100.0), "96.06");
}
