mod common;

use clearing_core::analytic::*;
use clearing_core::{discriminant, Error, Policy, Sign, SystemParams};
use common::{close, p1, p2, system};
use proptest::prelude::*;

/// Mixed partial `d^2 f / ds1 ds2` near the origin: central in `s1` with step
/// `h1`, one-sided second-order backward in `s2` with step `h2` from
/// `s2 = -h1^2/2`, so every node satisfies `s1^2 + 2 s2 <= 0`.
fn mixed_partial_with(f: impl Fn(f64, f64) -> f64, h1: f64, h2: f64) -> f64 {
    let s0 = -0.5 * h1 * h1;
    let d2 = |s1: f64| (3.0 * f(s1, s0) - 4.0 * f(s1, s0 - h2) + f(s1, s0 - 2.0 * h2)) / (2.0 * h2);
    (d2(h1) - d2(-h1)) / (2.0 * h1)
}

fn mixed_partial(f: impl Fn(f64, f64) -> f64, h: f64) -> f64 {
    mixed_partial_with(f, h, h)
}

#[test]
fn laplace_transforms_at_zero_and_slope() {
    let p = p1();
    assert_eq!(qp_laplace(&p, 2.0, 0.0).unwrap(), 1.0);
    assert_eq!(irp_laplace(&p, 3.0, 0.0).unwrap(), 1.0);
    let h = 1e-6;
    let slope = (qp_laplace(&p, 2.0, h).unwrap() - 1.0) / h;
    assert!((slope + 1.0).abs() < 1e-5);
}

#[test]
fn laplace_matches_sample_mean_of_inverse_gaussian_draws() {
    use clearing_core::fpt::ig_sample;
    use rand::SeedableRng;
    let p = p1();
    let law = qp_hitting_law(&p, 2.0).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let n = 1_000_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let v = (-ig_sample(&law, &mut rng)).exp();
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
    let exact = qp_laplace(&p, 2.0, 1.0).unwrap();
    assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
}

#[test]
fn joint_mgf_mixed_partials_give_cross_moments() {
    let p = p1();
    for i in 0..2 {
        let fd = mixed_partial(|a, b| qp_joint_mgf(&p, 2.0, i, a, b).unwrap(), 1e-4);
        let exact = qp_cross_moment(&p, 2.0, i).unwrap();
        assert!(close(fd, exact, 1e-6), "QP item {i}: {fd} vs {exact}");
        let fd = mixed_partial(|a, b| irp_joint_mgf(&p, 3.0, i, a, b).unwrap(), 1e-4);
        let exact = irp_cross_moment(&p, 3.0, i).unwrap();
        assert!(close(fd, exact, 1e-6), "IRP item {i}: {fd} vs {exact}");
    }
    assert!((irp_cross_moment(&p, 3.0, 0).unwrap() + 1.0 / 3.0).abs() < 1e-15);
    assert!(matches!(irp_joint_mgf(&p, 3.0, 0, 1.0, 0.0), Err(Error::DomainError(_))));
}

#[test]
fn p1_closed_form_examples() {
    let p = p1();
    let irp = irp_hitting_law(&p, 3.0).unwrap();
    assert!(close(irp.mean, 1.0, 1e-15));
    assert!(close(irp.second_moment, 1.0 + 5.0 / 9.0, 1e-14));
    assert!(close(irp_item_waiting(&p, 3.0, 0).unwrap(), 4.0 / 9.0, 1e-14));
    assert!(close(irp_item_waiting(&p, 3.0, 1).unwrap(), 1.0 / 9.0, 1e-14));
    assert!(close(irp_total_weighted_waiting(&p, 3.0).unwrap(), 2.0 / 3.0, 1e-14));
    assert!(close(ac_irp(&p, 3.0).unwrap(), 11.0 / 3.0, 1e-14));
    assert!(close(qp_irp_gap(&p), 1.0 / 12.0, 1e-14));
    let o = optimal_irp(&p);
    assert!(close(awdr_irp(&p, o.param).unwrap(), 1.28799, 1e-5));
    assert!(close(awdr_tp(&p, 2f64.sqrt()).unwrap(), 2.12132, 1e-5));
    assert!(close(t_opt_of_q(&p, 1.0).unwrap(), (5.25f64 / 3.0).sqrt() - 0.5, 1e-14));
    assert!(t_opt_of_q(&p, q_bar(&p)).unwrap().abs() < 1e-12);
    assert!(matches!(t_opt_of_q(&p, 2.5), Err(Error::QExceedsQbar { .. })));
    let sel = optimal_qtp(&p).unwrap();
    assert_eq!(sel.which, QtpCase::Qp);
    assert!(close(sel.ac, 3.49264, 1e-5));
    assert_eq!(optimal_qtp(&p2()).unwrap().which, QtpCase::Tp);
}

#[test]
fn degenerate_discriminant_has_no_joint_optimum() {
    let p = SystemParams::new(vec![1.0, 1.0], vec![1.0, 5f64.sqrt()], vec![0.0; 2], vec![7.0, 1.0], 2.0).unwrap();
    assert_eq!(discriminant(&p).sign, Sign::Zero);
    assert!(matches!(optimal_qtp(&p), Err(Error::DegenerateDiscriminant(_))));
}

#[test]
fn optima_are_local_minima_found_by_golden_section() {
    fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }
    for p in [p1(), p2()] {
        let q = golden(|x| ac_qp(&p, x).unwrap(), 1e-3, 100.0);
        assert!(close(q, optimal_qp(&p).param, 1e-6));
        let t = golden(|x| ac_tp(&p, x).unwrap(), 1e-3, 100.0);
        assert!(close(t, optimal_tp(&p).param, 1e-6));
        let m = golden(|x| ac_irp(&p, x).unwrap(), 1e-3, 100.0);
        assert!(close(m, optimal_irp(&p).param, 1e-6));
    }
}

#[test]
fn single_item_policies_coincide() {
    let p = SystemParams::new(vec![2.5], vec![0.3], vec![1.0], vec![4.0], 7.0).unwrap();
    assert_eq!(qp_irp_gap(&p), 0.0);
    assert!(close(optimal_qp(&p).ac, optimal_irp(&p).ac, 1e-14));
    let equal = SystemParams::new(vec![1.0, 2.0, 3.0], vec![1.0, 0.5, 2.0], vec![0.0; 3], vec![2.0; 3], 1.0).unwrap();
    assert!(qp_irp_gap(&equal).abs() < 1e-14);
}

#[test]
fn poisson_equivalence_on_a_grid() {
    for lambdas in [vec![1.0, 1.0], vec![2.0, 3.0], vec![0.3, 7.0, 1.5], vec![10.0]] {
        let n = lambdas.len();
        let sig: Vec<f64> = lambdas.iter().map(|l: &f64| l.sqrt()).collect();
        let p = SystemParams::new(lambdas.clone(), sig, vec![0.0; n], vec![1.0; n], 1.0).unwrap();
        for q in 1..=25u64 {
            for i in 0..n {
                let a = poisson_qp_item_waiting(&lambdas, q, i).unwrap();
                let b = qp_item_waiting(&p, q as f64, i).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{lambdas:?} Q={q} i={i}: {a} vs {b}");
            }
        }
    }
}

fn recomposition_error(p: &SystemParams, policy: &Policy) -> f64 {
    let (second, cross, items): (f64, Vec<f64>, Vec<f64>) = match *policy {
        Policy::Qp { q } => (
            qp_hitting_law(p, q).unwrap().second_moment,
            (0..p.n()).map(|i| qp_cross_moment(p, q, i).unwrap()).collect(),
            (0..p.n()).map(|i| qp_item_waiting(p, q, i).unwrap()).collect(),
        ),
        Policy::Qtp { q, t } => (
            qtp_cycle_second_moment(p, q, t).unwrap(),
            (0..p.n()).map(|i| qtp_cross_moment(p, q, t, i).unwrap()).collect(),
            (0..p.n()).map(|i| qtp_item_waiting(p, q, t, i).unwrap()).collect(),
        ),
        Policy::Irp { m } => (
            irp_hitting_law(p, m).unwrap().second_moment,
            (0..p.n()).map(|i| irp_cross_moment(p, m, i).unwrap()).collect(),
            (0..p.n()).map(|i| irp_item_waiting(p, m, i).unwrap()).collect(),
        ),
        _ => unreachable!(),
    };
    // relative to the size of the two terms, since they may cancel
    (0..p.n())
        .map(|i| {
            let r = unified_item_waiting(p.d()[i], p.sigma()[i], second, cross[i]);
            let scale = 0.5 * p.d()[i] * second + (p.sigma()[i] * cross[i]).abs();
            (r - items[i]).abs() / scale
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn discriminant_is_permutation_invariant(p in system(), rot in 0usize..5) {
        let n = p.n();
        let k = rot % n;
        let rotate = |v: &[f64]| { let mut v = v.to_vec(); v.rotate_left(k); v };
        let q = SystemParams::new(rotate(p.d()), rotate(p.sigma()), rotate(p.c()), rotate(p.omega()), p.a_d()).unwrap();
        let (a, b) = (discriminant(&p).value, discriminant(&q).value);
        let d = p.total_drift();
        let scale: f64 = (0..n)
            .map(|i| p.omega()[i] * (2.0 * d * p.sigma()[i].powi(2) + p.d()[i] * p.total_variance()))
            .sum();
        prop_assert!((a - b).abs() <= 1e-12 * scale);
    }

    #[test]
    fn poisson_matched_discriminant(d in prop::collection::vec(0.1f64..10.0, 1..5), w in prop::collection::vec(0.1f64..10.0, 5)) {
        let n = d.len();
        let w = w[..n].to_vec();
        let s: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
        let p = SystemParams::new(d.clone(), s, vec![0.0; n], w.clone(), 1.0).unwrap();
        let total: f64 = d.iter().sum();
        let expect = total * w.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        let disc = discriminant(&p);
        prop_assert!(close(disc.value, expect, 1e-10));
        prop_assert_eq!(disc.sign, Sign::Positive);
    }

    #[test]
    fn single_item_discriminant_is_positive(d in 0.1f64..10.0, s in 0.1f64..10.0, w in 0.1f64..10.0) {
        let p = SystemParams::new(vec![d], vec![s], vec![0.0], vec![w], 1.0).unwrap();
        let disc = discriminant(&p);
        prop_assert!(close(disc.value, w * d * s * s, 1e-12));
        prop_assert_eq!(disc.sign, Sign::Positive);
    }

    #[test]
    fn unified_formula_recomposes(p in system(), x in 0.05f64..5.0, split in 0.0f64..1.0) {
        let q = x * p.total_drift();
        let m = x * p.weighted_drift();
        let qtp = Policy::Qtp { q: split * q, t: (1.0 - split) * x + 1e-3 };
        for pol in [Policy::Qp { q }, Policy::Irp { m }, qtp] {
            let err = recomposition_error(&p, &pol);
            prop_assert!(err <= 1e-12, "{}: {:e}", pol, err);
        }
    }

    #[test]
    fn ac_minus_awdr_is_the_fixed_and_transport_rate(p in system(), x in 0.05f64..5.0) {
        let policies = [
            Policy::Qp { q: x * p.total_drift() },
            Policy::Tp { t: x },
            Policy::Qtp { q: 0.5 * x * p.total_drift(), t: 0.5 * x },
            Policy::Irp { m: x * p.weighted_drift() },
        ];
        for pol in policies {
            let r = evaluate(&p, &pol).unwrap();
            let expect = (p.a_d() + p.transport_rate() * r.cycle_mean) / r.cycle_mean;
            prop_assert!(close(r.ac - r.awdr, expect, 1e-12), "{}", pol);
            prop_assert!(close(r.cycle_mean, x, 1e-12));
        }
    }

    #[test]
    fn qtp_without_extension_is_qp(p in system(), q in 0.01f64..50.0) {
        prop_assert_eq!(ac_qtp(&p, q, 0.0).unwrap(), ac_qp(&p, q).unwrap());
    }

    #[test]
    fn optimal_irp_dominates(p in system()) {
        let irp = optimal_irp(&p).ac;
        let qp = optimal_qp(&p).ac;
        let tp = optimal_tp(&p).ac;
        // AC may be negative: Brownian loads are signed
        prop_assert!(irp <= qp + 1e-12 * qp.abs().max(1.0));
        prop_assert!(irp < tp);
        prop_assert!(((qp - irp) - qp_irp_gap(&p)).abs() <= 1e-10 * qp.abs().max(1.0));
    }

    #[test]
    fn sign_law(p in system()) {
        let disc = discriminant(&p);
        prop_assume!(disc.value.abs() > 1e-6);
        let diff = optimal_tp(&p).ac - optimal_qp(&p).ac;
        prop_assert_eq!(diff > 0.0, disc.value > 0.0);
    }

    #[test]
    fn q_bar_is_a_positive_root(p in system()) {
        let qb = q_bar(&p);
        prop_assert!(qb > 0.0);
        prop_assert!(t_opt_of_q(&p, qb).unwrap().abs() <= 1e-9 * (1.0 + optimal_tp(&p).param));
        prop_assert!(t_opt_of_q(&p, 0.5 * qb).unwrap() > 0.0);
        prop_assert!(t_opt_of_q(&p, 1.5 * qb).is_err());
    }

    #[test]
    fn cost_along_optimal_extension_is_monotone(p in system()) {
        let disc = discriminant(&p);
        prop_assume!(disc.sign != Sign::Zero);
        let qb = q_bar(&p);
        let vals: Vec<f64> = (0..=40).map(|k| ac_qtp_along_t_opt(&p, qb * (k as f64 / 40.0)).unwrap()).collect();
        for w in vals.windows(2) {
            if disc.sign == Sign::Positive {
                prop_assert!(w[1] < w[0]);
            } else {
                prop_assert!(w[1] > w[0]);
            }
        }
        prop_assert!(close(vals[0], optimal_tp(&p).ac, 1e-12));
    }

    #[test]
    fn joint_optimum_beats_a_lattice(p in system()) {
        prop_assume!(discriminant(&p).sign != Sign::Zero);
        let sel = optimal_qtp(&p).unwrap();
        let (qh, th) = (4.0 * optimal_qp(&p).param, 4.0 * optimal_tp(&p).param);
        for a in 0..100 {
            for b in 0..100 {
                let (q, t) = (qh * a as f64 / 99.0, th * b as f64 / 99.0);
                if q == 0.0 && t == 0.0 { continue; }
                prop_assert!(sel.ac <= ac_qtp(&p, q, t).unwrap() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn constant_load_specialisations(p in system(), x in 0.05f64..5.0) {
        let m = x * p.weighted_drift();
        let w = p.weighted_drift();
        let (a, b) = (m * m / (2.0 * w), p.weighted_variance() * m / (2.0 * w * w));
        let irp = awdr_irp(&p, m).unwrap();
        let generic = awdr_generic(&p, m, m * m, m / w).unwrap();
        prop_assert!((irp - generic).abs() <= 1e-12 * (a + b) * w / m);
        prop_assert!((irp_total_weighted_waiting(&p, m).unwrap() - (a - b)).abs() <= 1e-12 * (a + b));
    }

    #[test]
    fn mixed_partials_match_cross_moments(p in system(), x in 0.2f64..3.0, pick in 0usize..5) {
        let i = pick % p.n();
        let q = x * p.total_drift();
        let m = x * p.weighted_drift();
        let laws = [qp_hitting_law(&p, q).unwrap(), irp_hitting_law(&p, m).unwrap()];
        // finite differences need a non-degenerate shape: the truncation error
        // grows like E[tau^3] ~ (mu / lambda)^2
        prop_assume!(laws.iter().all(|l| l.ig_lambda >= 0.05 * l.ig_mu));
        for (k, law) in laws.iter().enumerate() {
            // steps in the natural units of the law: time mu, B(tau) sqrt(mu);
            // the s2 step shrinks with the shape to keep truncation below 1e-7
            let shape = law.ig_lambda / law.ig_mu;
            let (h1, h2) = (1e-4 / law.ig_mu.sqrt(), 1e-4 * shape.min(1.0) / law.ig_mu);
            let (fd, exact) = if k == 0 {
                (mixed_partial_with(|a, b| qp_joint_mgf(&p, q, i, a, b).unwrap(), h1, h2), qp_cross_moment(&p, q, i).unwrap())
            } else {
                (mixed_partial_with(|a, b| irp_joint_mgf(&p, m, i, a, b).unwrap(), h1, h2), irp_cross_moment(&p, m, i).unwrap())
            };
            // relative to the natural size of tau B(tau), which bounds roundoff
            let scale = exact.abs().max(law.ig_mu.powf(1.5));
            prop_assert!((fd - exact).abs() <= 1e-6 * scale, "law {}: {} vs {}", k, fd, exact);
        }
    }
}
