use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavesep::eval::{decompose, evaluate_dataset, sdr_sir_sar, Decomposition, ReferenceSet, TrackPair};

fn noise(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn energy(a: &[f64]) -> f64 {
    dot(a, a)
}

fn projection(d: &Decomposition) -> Vec<f64> {
    d.s_target.iter().zip(&d.e_interf).map(|(a, b)| a + b).collect()
}

fn delayed(x: &[f64], delay: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    out[delay..].copy_from_slice(&x[..x.len() - delay]);
    out
}

fn check_invariants(estimate: &[f64], refs: &[Vec<f64>], target: usize, l: usize) -> Result<(), TestCaseError> {
    let d = decompose(estimate, refs, target, l).unwrap();
    let scale = energy(estimate).sqrt().max(1e-12);
    for t in 0..estimate.len() {
        let sum = d.s_target[t] + d.e_interf[t] + d.e_artif[t];
        prop_assert!((sum - estimate[t]).abs() <= 1e-6);
    }
    let artif_norm = energy(&d.e_artif).sqrt();
    for r in refs {
        for delay in 0..l.min(r.len()) {
            let c = delayed(r, delay);
            let ip = dot(&d.e_artif, &c).abs();
            prop_assert!(ip <= 1e-6 * (artif_norm * energy(&c).sqrt()).max(scale * 1e-6), "delay {} ip {}", delay, ip);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn additivity_and_orthogonality(seed in any::<u64>(), l in prop::sample::select(vec![1usize, 8])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let refs: Vec<Vec<f64>> = (0..3).map(|_| noise(&mut rng, 300)).collect();
        let estimate: Vec<f64> = (0..300).map(|t| 0.8 * refs[0][t] + 0.3 * refs[1][t] + 0.2 * rng.gen_range(-1.0..1.0)).collect();
        check_invariants(&estimate, &refs, 0, l)?;
    }

    #[test]
    fn scale_invariance(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let refs: Vec<Vec<f64>> = (0..2).map(|_| noise(&mut rng, 200)).collect();
        let est: Vec<f64> = (0..200).map(|t| refs[1][t] + 0.4 * refs[0][t] + 0.1 * rng.gen_range(-1.0..1.0)).collect();
        let scaled: Vec<f64> = est.iter().map(|v| c * v).collect();
        let set = ReferenceSet::new(refs, 4).unwrap();
        let a = set.decompose(&est, 1).unwrap();
        let b = set.decompose(&scaled, 1).unwrap();
        for (x, y) in a.s_target.iter().zip(&b.s_target) {
            prop_assert!((c * x - y).abs() <= 1e-8 * c.max(1.0));
        }
        let (ma, mb) = (sdr_sir_sar(&a), sdr_sir_sar(&b));
        prop_assert!((ma.sdr - mb.sdr).abs() < 1e-6);
        prop_assert!((ma.sir - mb.sir).abs() < 1e-6);
        prop_assert!((ma.sar - mb.sar).abs() < 1e-6);
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let refs: Vec<Vec<f64>> = (0..2).map(|_| noise(&mut rng, 150)).collect();
        let est = noise(&mut rng, 150);
        let set = ReferenceSet::new(refs, 3).unwrap();
        let first = set.decompose(&est, 0).unwrap();
        let again = set.decompose(&first.s_target, 0).unwrap();
        for (x, y) in first.s_target.iter().zip(&again.s_target) {
            prop_assert!((x - y).abs() < 1e-8);
        }
        prop_assert!(energy(&again.e_interf) < 1e-14);
        prop_assert!(energy(&again.e_artif) < 1e-14);
    }

    #[test]
    fn longer_filters_never_shrink_projection(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let refs: Vec<Vec<f64>> = (0..2).map(|_| noise(&mut rng, 120)).collect();
        let est = noise(&mut rng, 120);
        let mut last = 0.0;
        for l in [1, 2, 4, 8, 16] {
            let p = energy(&projection(&decompose(&est, &refs, 0, l).unwrap()));
            prop_assert!(p >= last - 1e-9, "L={} {} < {}", l, p, last);
            last = p;
        }
    }
}

#[test]
fn invariants_with_default_filter_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let refs: Vec<Vec<f64>> = (0..2).map(|_| noise(&mut rng, 2048)).collect();
    let est: Vec<f64> = (0..2048).map(|t| refs[0][t] + 0.5 * refs[1][t] + 0.1 * rng.gen_range(-1.0..1.0)).collect();
    let d = decompose(&est, &refs, 0, 512).unwrap();
    for t in 0..est.len() {
        assert!((d.s_target[t] + d.e_interf[t] + d.e_artif[t] - est[t]).abs() <= 1e-6);
    }
    let artif_norm = energy(&d.e_artif).sqrt();
    for r in &refs {
        for delay in [0, 1, 100, 511] {
            let c = delayed(r, delay);
            assert!(dot(&d.e_artif, &c).abs() <= 1e-6 * artif_norm * energy(&c).sqrt());
        }
    }
}

#[test]
fn filtered_reference_is_recovered_with_taps() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let refs: Vec<Vec<f64>> = (0..2).map(|_| noise(&mut rng, 400)).collect();
    // a 3-tap echo of the target is inside its L=4 subspace
    let est: Vec<f64> = (0..400)
        .map(|t| refs[0][t] + if t >= 2 { 0.5 * refs[0][t - 2] } else { 0.0 })
        .collect();
    let m = sdr_sir_sar(&decompose(&est, &refs, 0, 4).unwrap());
    assert!(m.sdr > 90.0, "{m:?}");
    let m1 = sdr_sir_sar(&decompose(&est, &refs, 0, 1).unwrap());
    assert!(m1.sdr < 10.0, "{m1:?}");
}

#[test]
fn dependent_references_are_degenerate() {
    let a: Vec<f64> = (0..50).map(|t| (t as f64 * 0.3).sin()).collect();
    let err = ReferenceSet::new(vec![a.clone(), a], 1).unwrap_err();
    assert!(matches!(err, wavesep::Error::DegenerateReference(_)), "{err}");
    let zero = ReferenceSet::new(vec![vec![0.0; 10]], 1).unwrap_err();
    assert!(matches!(zero, wavesep::Error::DegenerateReference(_)));
}

#[test]
fn dataset_medians_over_three_tracks() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pairs: Vec<TrackPair> = [0.0f32, 0.05, 0.5]
        .iter()
        .enumerate()
        .map(|(i, &noise_level)| {
            let a: Vec<f32> = (0..300).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            let b: Vec<f32> = (0..300).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            let est: Vec<f32> = a.iter().zip(&b).map(|(x, y)| x + noise_level * y).collect();
            TrackPair {
                name: format!("t{i}"),
                references: BTreeMap::from([("vocals".into(), a), ("accompaniment".into(), b.clone())]),
                estimates: BTreeMap::from([("vocals".into(), est), ("accompaniment".into(), b)]),
            }
        })
        .collect();
    let report = evaluate_dataset("m", &pairs, 1).unwrap();
    let mut sdrs: Vec<f64> = report.tracks.iter().map(|t| t.sources["vocals"].sdr).collect();
    sdrs.sort_by(f64::total_cmp);
    assert_eq!(sdrs[2], 100.0);
    assert_eq!(report.medians["vocals"].sdr, sdrs[1]);
    assert_eq!(report.medians["accompaniment"].sdr, 100.0);
}
