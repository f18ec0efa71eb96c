mod common;

use common::{ks_distance, mean_se, var_se};
use mgg::crm::{psi_mgg, MggParams};
use mgg::rng::stream;
use mgg::samplers::{
    asymptotic_residual, sample_size_biased, sample_tilted_stable, sample_total_mass,
};

fn laplace_check(s: f64, tilt: f64, ts: &[f64], n: usize, seed: u64) {
    let mut rng = stream(seed, 0);
    let xs: Vec<f64> = (0..n).map(|_| sample_tilted_stable(s, tilt, &mut rng).unwrap()).collect();
    for &t in ts {
        let vals: Vec<f64> = xs.iter().map(|x| (-t * x).exp()).collect();
        let (m, se) = mean_se(&vals);
        let expect = (-((t + tilt).powf(s) - tilt.powf(s))).exp();
        assert!((m - expect).abs() <= 3.0 * se.max(1e-12), "s={s} tilt={tilt} t={t}: {m} vs {expect} (se {se})");
    }
}

#[test]
fn tilted_stable_reference_examples() {
    laplace_check(0.5, 0.0, &[1.0], 100_000, 11);
    laplace_check(0.5, 1.0, &[1.0], 100_000, 12);
}

#[test]
fn tilted_stable_laplace_grid() {
    let ts = [0.1, 0.5, 1.0, 2.0, 5.0];
    let mut seed = 100;
    for &s in &[0.1, 0.5, 0.9] {
        for &tilt in &[0.0, 1.0] {
            seed += 1;
            laplace_check(s, tilt, &ts, 100_000, seed);
        }
    }
}

#[test]
fn tilted_stable_large_tilt_grid() {
    let ts = [0.01, 0.1, 1.0];
    let mut seed = 200;
    for &s in &[0.05, 0.3, 0.7, 0.97] {
        for &tilt in &[3.0, 50.0, 2000.0] {
            seed += 1;
            laplace_check(s, tilt, &ts, 50_000, seed);
        }
    }
}

#[test]
fn total_mass_moments() {
    let p = MggParams::new(1.0, 0.0, 1.0, 1.0, 10.0).unwrap();
    let mut rng = stream(21, 0);
    let xs: Vec<f64> = (0..10_000).map(|_| sample_total_mass(&p, 256, &mut rng).unwrap()).collect();
    let (m, se) = mean_se(&xs);
    assert!((m - 5.0).abs() <= 3.0 * se, "mean {m} se {se}");
    let (v, vse) = var_se(&xs);
    assert!((v - 10.0 / 6.0).abs() <= 3.0 * vse, "var {v} se {vse}");
    let lt: Vec<f64> = xs.iter().map(|x| (-x).exp()).collect();
    let (m, se) = mean_se(&lt);
    let expect = (-psi_mgg(1.0, &p).unwrap()).exp();
    assert!((m - expect).abs() <= 3.0 * se, "laplace {m} vs {expect}");
}

#[test]
fn total_mass_general_index() {
    let p = MggParams::new(0.8, 0.2, 2.0, 1.5, 4.0).unwrap();
    let mut rng = stream(22, 0);
    let xs: Vec<f64> = (0..20_000).map(|_| sample_total_mass(&p, 512, &mut rng).unwrap()).collect();
    for &t in &[0.2, 1.0] {
        let lt: Vec<f64> = xs.iter().map(|x| (-t * x).exp()).collect();
        let (m, se) = mean_se(&lt);
        let expect = (-psi_mgg(t, &p).unwrap()).exp();
        // Grid bias of the Riemann sum is O(1/n_grid).
        assert!((m - expect).abs() <= 3.0 * se + 2e-3, "t={t}: {m} vs {expect}");
    }
}

#[test]
fn size_biased_sum_mean() {
    let p = MggParams::new(1.0, 0.0, 1.0, 1.0, 100.0).unwrap();
    let totals: Vec<f64> = (0..500)
        .map(|k| {
            let d = sample_size_biased(&p, 10_000, &mut stream(31, k)).unwrap();
            d.truncated_sum() + d.residual_estimate
        })
        .collect();
    let (m, se) = mean_se(&totals);
    assert!((m - 50.0).abs() <= 3.0 * se, "mean {m} se {se}");
}

#[test]
fn size_biased_laplace_with_residual_correction() {
    let p = MggParams::new(1.0, 0.0, 1.0, 1.0, 5.0).unwrap();
    let n = 2000;
    let draws: Vec<(f64, f64)> = (0..4000)
        .map(|k| {
            let d = sample_size_biased(&p, n, &mut stream(32, k)).unwrap();
            (d.truncated_sum(), d.residual_estimate)
        })
        .collect();
    for &t in &[0.5, 1.0, 2.0] {
        let target = (-psi_mgg(t, &p).unwrap()).exp();
        let corrected: Vec<f64> = draws.iter().map(|(s, r)| (-t * (s + r)).exp()).collect();
        let (m, se) = mean_se(&corrected);
        assert!((m - target).abs() <= 3.0 * se, "t={t}: {m} vs {target}");
        let raw: Vec<f64> = draws.iter().map(|(s, _)| (-t * s).exp()).collect();
        let (m_raw, _) = mean_se(&raw);
        let gap = m_raw - target;
        assert!(gap > 0.0);
        let bound = t * p.c * p.eta / (n as f64).ln() * 1.5;
        assert!(gap <= bound, "gap {gap} bound {bound}");
    }
}

#[test]
fn largest_weight_law_stable_in_n() {
    let p = MggParams::new(1.0, 0.0, 1.0, 1.0, 5.0).unwrap();
    let largest = |n: usize, seed: u64| -> Vec<f64> {
        (0..10_000)
            .map(|k| {
                let d = sample_size_biased(&p, n, &mut stream(seed, k)).unwrap();
                d.weights.iter().cloned().fold(0.0, f64::max)
            })
            .collect()
    };
    let a = largest(100, 41);
    let b = largest(1000, 42);
    let d = ks_distance(&a, &b);
    assert!(d < 0.05, "KS distance {d}");
}

#[test]
fn residual_ratio_decreases() {
    let p = MggParams::new(1.0, 0.0, 1.0, 1.0, 100.0).unwrap();
    let mut prev = f64::INFINITY;
    for &n in &[1_000usize, 10_000, 100_000] {
        let ratios: Vec<f64> = (0..5)
            .map(|k| {
                let d = sample_size_biased(&p, n, &mut stream(51, k)).unwrap();
                d.residual_estimate / asymptotic_residual(&p, n)
            })
            .collect();
        let (m, _) = mean_se(&ratios);
        assert!(m > 1.0 && m < prev, "n={n} ratio {m}");
        prev = m;
    }
}

#[test]
fn determinism() {
    let p = MggParams::new(1.0, 0.0, 1.0, 2.0, 30.0).unwrap();
    let a = sample_size_biased(&p, 1000, &mut stream(61, 0)).unwrap();
    let b = sample_size_biased(&p, 1000, &mut stream(61, 0)).unwrap();
    assert_eq!(a, b);
    let x = sample_total_mass(&p, 256, &mut stream(62, 0)).unwrap();
    let y = sample_total_mass(&p, 256, &mut stream(62, 0)).unwrap();
    assert_eq!(x.to_bits(), y.to_bits());
}
