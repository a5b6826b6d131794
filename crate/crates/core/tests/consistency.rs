//! Simulators against the exact solver and closed forms.

use contact_qsd::exact::{build_generator, qsd_eigen, truncation_sweep, EigenOptions, Truncation};
use contact_qsd::jump::JumpProcess;
use contact_qsd::lattice::CanonicalConfig;
use contact_qsd::qsd::{survival_curve_independent, McConfig, QsdEstimate, StartLaw};
use contact_qsd::stats;

/// The censored jump chain started from the exact QSD of the same truncation
/// stays in it: conditioned law and survival after time `s` match exactly.
#[test]
fn censored_jump_chain_preserves_exact_qsd() {
    let (w, lambda, s) = (5, 1.0, 3.0);
    let g = build_generator(1, w, lambda).unwrap();
    let sol = qsd_eigen(&g, EigenOptions::default()).unwrap();
    let nu: QsdEstimate = sol.estimate(&g);
    let sampler = nu.sampler();
    let n = 40_000u64;
    let mut alive = 0u64;
    let mut counts = vec![0u64; g.n_states()];
    for i in 0..n {
        let start = sampler.sample(&mut contact_qsd::streams::stream(11, &[i]));
        let mut p = JumpProcess::new(start.as_config(), lambda, 1000 + i).with_diameter_cap(w);
        if p.advance_to(s) {
            alive += 1;
            let c: CanonicalConfig = p.config().canonicalize().alive().unwrap();
            counts[g.space().index_of(&c).expect("cap respected")] += 1;
        }
    }
    let surv = (-sol.alpha * s).exp();
    let z = (alive as f64 / n as f64 - surv) / stats::binomial_se(surv, n);
    assert!(z.abs() < 4.0, "survival z = {z}");
    for (k, &c) in counts.iter().enumerate() {
        let p = sol.nu[k];
        let z = (c as f64 / alive as f64 - p) / stats::binomial_se(p, alive);
        assert!(z.abs() < 4.5, "state {} z = {z}", g.space().state(k));
    }
}

#[test]
fn zero_rate_survival_points_are_independent_batches() {
    let grid = [0.5, 1.0, 2.0];
    let cfg = McConfig::new(0.0, 20_000, 3);
    let start = StartLaw::fixed(&"0".parse().unwrap());
    let curve = survival_curve_independent(&start, &grid, &cfg).unwrap();
    for (k, &t) in grid.iter().enumerate() {
        let exact = (-t).exp();
        assert!((curve.survival_prob[k] - exact).abs() < 4.0 * stats::binomial_se(exact, 20_000));
    }
    let again = survival_curve_independent(&start, &grid, &cfg.with_workers(3)).unwrap();
    assert_eq!(curve, again);
}

#[test]
fn kill_truncation_absorbs_faster_than_censoring() {
    for w in [3, 6, 9] {
        let censor = qsd_eigen(&build_generator(1, w, 1.0).unwrap(), EigenOptions::default()).unwrap();
        let g = contact_qsd::exact::build_generator_with(1, w, 1.0, Truncation::Kill).unwrap();
        let kill = qsd_eigen(&g, EigenOptions::default()).unwrap();
        assert!(kill.alpha > censor.alpha, "W={w}");
    }
}

#[test]
fn truncation_sweep_converges_monotonically() {
    let rows = truncation_sweep(1, 1.0, &[6, 8, 10, 12, 14], Truncation::Censor, EigenOptions::default()).unwrap();
    for pair in rows.windows(2) {
        assert!(pair[1].alpha < pair[0].alpha);
    }
    let tvs: Vec<f64> = rows.iter().filter_map(|r| r.tv_next).collect();
    assert!(tvs.windows(2).all(|p| p[1] < p[0]), "{tvs:?}");
}

#[test]
#[ignore = "fails: at lambda=1 alpha(12)=0.1406 and alpha(14)=0.1369 differ by 2.7%, the sweep converges slower than 2% per step"]
fn alpha_at_width_12_within_two_percent_of_width_14() {
    let rows = truncation_sweep(1, 1.0, &[12, 14], Truncation::Censor, EigenOptions::default()).unwrap();
    let (a12, a14) = (rows[0].alpha, rows[1].alpha);
    assert!((a12 - a14).abs() / a14 < 0.02, "{a12} vs {a14}");
}

#[test]
fn two_dimensional_box_matches_enumeration() {
    // the origin plus any subset of (0,1),(1,-1),(1,0),(1,1) avoiding the
    // diameter-2 pairs {(0,1),(1,-1)} and {(1,-1),(1,1)}: 16 - 4 - 4 + 2
    let g = build_generator(2, 2, 0.7).unwrap();
    assert_eq!(g.n_states(), 10);
    for i in 0..g.n_states() {
        let out: f64 = g.row(i).filter(|(j, _)| *j != i).map(|(_, r)| r).sum::<f64>() + g.absorption_rate(i);
        assert!((out + g.diagonal(i)).abs() < 1e-12);
    }
    let sol = qsd_eigen(&g, EigenOptions::default()).unwrap();
    assert!(sol.residual < 1e-10);
    let single = g.space().singleton_index();
    assert_eq!(g.space().state(single), CanonicalConfig::singleton(2));
    assert!(sol.nu[single] > 0.0);
}
