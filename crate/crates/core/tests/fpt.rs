mod common;

use clearing_core::analytic::{qp_hitting_law, HittingLaw};
use clearing_core::fpt::quadrature::{integrate, Tolerance};
use clearing_core::fpt::*;
use common::{close, p1, system};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn p1_weighted() -> DriftedBM1D {
    DriftedBM1D::weighted(&p1())
}

#[test]
fn p1_weighted_process() {
    let p = p1_weighted();
    assert_eq!(p.mu, 3.0);
    assert!(close(p.s, 5f64.sqrt(), 1e-15));
    let v = survival_before_barrier(&p, 3.0, 1.0).unwrap();
    assert!(v > 0.0 && v < 1.0);
    let law = HittingLaw::inverse_gaussian(1.0, 9.0 / 5.0);
    assert!((v - (1.0 - ig_cdf(&law, 1.0).unwrap())).abs() <= 1e-12);
    assert_eq!(survival_before_barrier(&p, 3.0, 0.0).unwrap(), 1.0);
    assert!(survival_before_barrier(&p, 3.0, 1e3).unwrap() < 1e-300);
}

#[test]
fn inverse_gaussian_sampler_matches_hitting_law() {
    let law = qp_hitting_law(&p1(), 2.0).unwrap();
    let c = ig_cdf(&law, law.ig_mu).unwrap();
    assert!(c > 0.0 && c < 1.0);
    assert!((ig_cdf(&law, 1e6).unwrap() - 1.0).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 1_000_000;
    let mean = (0..n).map(|_| ig_sample(&law, &mut rng)).sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 3.0 * 0.5f64.sqrt() / 1e3, "{mean}");
}

#[test]
fn density_limits_and_driftless_reflection() {
    let p = p1_weighted();
    assert!(absorbed_density(&p, 3.0, 1.0, 3.0 - 1e-9).unwrap() < 1e-6);
    assert_eq!(absorbed_density(&p, 3.0, 1.0, 3.5).unwrap(), 0.0);
    let q = DriftedBM1D::new(0.0, 1.3).unwrap();
    let var = 1.3f64.powi(2) * 2.0;
    let phi = |x: f64| (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    for x in [-3.0, -1.0, 0.0, 0.7, 1.9] {
        let d = absorbed_density(&q, 2.0, 2.0, x).unwrap();
        assert!((d - (phi(x) - phi(x - 4.0))).abs() < 1e-15);
    }
}

#[test]
fn density_integrates_to_survival_on_a_grid() {
    for (mu, s) in [(3.0, 5f64.sqrt()), (0.5, 2.0), (2.0, 0.3)] {
        let p = DriftedBM1D::new(mu, s).unwrap();
        for m in [0.1, 1.0, 3.0, 10.0] {
            for t in [0.01, 0.3, 1.0, 5.0] {
                let lo = mu * t - 12.0 * s * t.sqrt();
                let mass = integrate(|x| absorbed_density(&p, m, t, x).unwrap(), lo, m, Tolerance::fine()).unwrap().value;
                let surv = survival_before_barrier(&p, m, t).unwrap();
                assert!((mass - surv).abs() <= 1e-9, "mu={mu} s={s} M={m} T={t}: {mass} vs {surv}");
            }
        }
    }
}

#[test]
fn stopped_moment_limits() {
    let p = p1_weighted();
    let long = irhp_stopped_moments(&p, 3.0, 50.0).unwrap();
    assert!(close(long.e_tau, 1.0, 1e-8));
    assert!(close(long.e_w, 3.0, 1e-8));
    assert!(close(long.e_w2, 9.0, 1e-8));
    let short = irhp_stopped_moments(&p, 3.0, 1e-4).unwrap();
    assert!(close(short.e_tau, 1e-4, 1e-10));
    assert!(short.p_hit < 1e-100);
    assert!(close(short.e_w, 3e-4, 1e-8));
    let mid = irhp_stopped_moments(&p, 3.0, 1.0).unwrap();
    assert!((mid.e_w - 3.0 * mid.e_tau).abs() <= 1e-8);
}

#[test]
fn matched_frequency_example_and_sampling_oracle() {
    let p = p1_weighted();
    let (target, cap) = (2f64.sqrt(), 2.0 * 2f64.sqrt());
    let m = match_frequency(&p, target, cap).unwrap();
    assert!((stopped_mean(&p, m, cap).unwrap() - target).abs() <= 1e-9);
    // E[tau_M ^ cap] from exact hitting-time draws
    let law = HittingLaw::inverse_gaussian(m / p.mu, (m / p.s).powi(2));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 400_000;
    let draws: Vec<f64> = (0..n).map(|_| ig_sample(&law, &mut rng).min(cap)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - target).abs() < 3.0 * (var / n as f64).sqrt());

    assert!(match_frequency(&p, 2.0, 2.0).is_err());
    let big = match_frequency(&p, 0.999 * cap, cap).unwrap();
    // the barrier must sit beyond the drift reach by a few standard deviations
    assert!(big > p.mu * cap + 2.0 * p.s * cap.sqrt());
    let small = match_frequency(&p, 1e-4, cap).unwrap();
    assert!(small < 1e-3);
}

#[test]
fn key_identity_examples() {
    let (l, r) = key_inequality_sides(&DriftedBM1D::new(1.0, 1.0).unwrap(), 1.0, 1.0).unwrap();
    assert!((l - r).abs() <= 1e-6 && l > 0.0 && r > 0.0);
    let (l, r) = key_inequality_sides(&p1_weighted(), 3.0, 1.0).unwrap();
    assert!((l - r).abs() <= 1e-6 && l > 0.0);
    let (l, r) = key_inequality_sides(&DriftedBM1D::new(1.0, 1.0).unwrap(), 100.0, 1.0).unwrap();
    assert!(l.abs() < 1e-9 && r >= 0.0 && r < 1e-9);
    // long horizon: both sides approach mu^2 Var[tau_q] = q s^2 / mu
    let (l, r) = key_inequality_sides(&DriftedBM1D::new(2.0, 1.5).unwrap(), 1.0, 200.0).unwrap();
    assert!(close(l, 2.25 / 2.0, 1e-6) && close(r, 2.25 / 2.0, 1e-6));
}

#[test]
fn key_identity_monte_carlo_unit_case() {
    let p = DriftedBM1D::new(1.0, 1.0).unwrap();
    let (l, r) = key_inequality_sides(&p, 1.0, 1.0).unwrap();
    let (ml, mr) = clearing_core::verify::key_inequality_mc(&p, 1.0, 1.0, 300_000, 17);
    assert!(ml.within(l, 3.0), "{ml:?} vs {l}");
    assert!(mr.within(r, 3.0), "{mr:?} vs {r}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn survival_agrees_with_inverse_gaussian_tail(mu in 0.1f64..10.0, s in 0.1f64..10.0, m in 0.05f64..20.0) {
        let p = DriftedBM1D::new(mu, s).unwrap();
        let law = HittingLaw::inverse_gaussian(m / mu, (m / s).powi(2));
        for k in 0..60 {
            let t = (m / mu) * 10f64.powf(-3.0 + 5.0 * k as f64 / 59.0);
            let a = survival_before_barrier(&p, m, t).unwrap();
            let b = 1.0 - ig_cdf(&law, t).unwrap();
            prop_assert!((a - b).abs() <= 1e-12, "t={}: {} vs {}", t, a, b);
        }
    }

    #[test]
    fn optional_stopping_for_the_capped_barrier(mu in 0.1f64..10.0, s in 0.1f64..10.0, m in 0.05f64..20.0, r in 0.05f64..5.0) {
        let p = DriftedBM1D::new(mu, s).unwrap();
        let t = r * m / mu;
        let sm = irhp_stopped_moments(&p, m, t).unwrap();
        prop_assert!((sm.e_w - mu * sm.e_tau).abs() <= 1e-7 * sm.e_w.abs().max(m));
        prop_assert!(sm.e_tau <= t * (1.0 + 1e-12) && sm.e_tau < m / mu + 1e-9);
        // equality when the cap binds almost surely; quadrature is good to 1e-8
        prop_assert!(sm.e_tau2 >= sm.e_tau * sm.e_tau * (1.0 - 1e-8));
    }

    #[test]
    fn weighted_load_stopped_variance_is_below_the_drift_bound(p in system(), x in 0.1f64..4.0, r in 0.2f64..4.0) {
        let z = DriftedBM1D::weighted(&p);
        let m = x * z.mu;
        let sm = irhp_stopped_moments(&z, m, r * x).unwrap();
        let bound = z.s * z.s / z.mu * sm.e_w;
        let gap = bound - (sm.e_w2 - sm.e_w * sm.e_w);
        if sm.p_hit > 1e-6 {
            prop_assert!(gap > 0.0, "gap {}", gap);
        } else {
            // cap binds almost surely: the stopped load is nearly deterministic
            prop_assert!(gap > -1e-12 * (bound.abs() + sm.e_w2), "gap {}", gap);
        }
    }

    #[test]
    fn key_identity_holds_off_grid(mu in 0.2f64..5.0, s in 0.2f64..5.0, q in 0.2f64..5.0, r in 0.1f64..5.0) {
        let p = DriftedBM1D::new(mu, s).unwrap();
        let t = r * q / mu;
        let (l, rr) = key_inequality_sides(&p, q, t).unwrap();
        prop_assert!((l - rr).abs() <= 1e-6 * rr.abs().max(1.0), "{} vs {}", l, rr);
        if 1.0 - survival_before_barrier(&p, q, t).unwrap() > 1e-6 {
            prop_assert!(l > 0.0 && rr > 0.0);
        } else {
            // tau ^ T is nearly deterministic and both sides sit at round-off size
            let floor = -1e-10 * (s * s * t).max(1.0);
            prop_assert!(l > floor && rr > floor, "{} {}", l, rr);
        }
    }
}
