//! Property tests across modules.

use proptest::prelude::*;

use smallball::asymptotics::{calibrate_representation, dmz_estimate, log_representation_eval};
use smallball::gamma_class::{aux_from_f, gamma_membership_check, Verdict};
use smallball::inversion::{invert_mu, AuxFunction, DEFAULT_TOL};
use smallball::kernel_stats::{kernel_expectation, regular_variation_limit, KernelSpec};
use smallball::oracle::cf_inversion_cdf;
use smallball::series::{count_n, eval_i, eval_mu, eval_mu_prime, TruncationPolicy};
use smallball::EigenSpectrum;

fn policy() -> TruncationPolicy {
    TruncationPolicy::new(10_000_000, 1e-13).unwrap()
}

fn spectra() -> impl Strategy<Value = EigenSpectrum> {
    prop_oneof![
        (1.2f64..4.0).prop_map(|b| EigenSpectrum::polynomial(b).unwrap()),
        (0.1f64..2.0).prop_map(|a| EigenSpectrum::exponential(a).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn theta_mu_dominates_count(s in spectra(), lt in -2.0f64..6.0) {
        let theta = 10f64.powf(lt);
        let n = count_n(&s, theta) as f64;
        let mu = eval_mu(&s, theta, &policy()).unwrap().value;
        prop_assert!(theta * mu >= n / 3.0, "theta mu = {} < N/3 = {}", theta * mu, n / 3.0);
        let dmu = eval_mu_prime(&s, theta, &policy()).unwrap().value;
        prop_assert!(dmu < 0.0);
        prop_assert!((theta * theta * dmu).abs() >= 2.0 * n / 9.0);
    }

    #[test]
    fn nested_tail_bounds(s in spectra(), n in 1usize..500) {
        let a = s.tail_sum_bounds(n).unwrap();
        let b = s.tail_sum_bounds(n + 1).unwrap();
        prop_assert!(b.hi <= a.hi);
        prop_assert!(b.lo <= b.hi && a.lo <= a.hi);
    }

    #[test]
    fn inversion_roundtrip(s in spectra(), lt in -2.0f64..2.0) {
        let theta = 10f64.powf(lt);
        let eps = eval_mu(&s, theta, &policy()).unwrap().value;
        let back = invert_mu(&s, eps, DEFAULT_TOL).unwrap().theta;
        // A relative residual tol in mu moves theta by tol / |d log mu / d log theta|.
        let dmu = eval_mu_prime(&s, theta, &policy()).unwrap().value;
        let gain = eps / (theta * dmu.abs());
        prop_assert!((back / theta - 1.0).abs() <= 1e-8f64.max(2.0 * DEFAULT_TOL * gain), "{back} vs {theta}");
    }

    #[test]
    fn kernel_matches_regular_variation_limit(a in 0.0f64..2.0, d in 0.5f64..3.5, h in 1e-3f64..1.0) {
        let k = KernelSpec::truncated_linear(a, 2.0 * (1.0 - a)).unwrap();
        let r = kernel_expectation(|t: f64| Ok(d * t.ln()), &k, h, 1e-12).unwrap();
        let lim = regular_variation_limit(&k, d, 1e-12).unwrap();
        prop_assert!((r.factor - lim).abs() <= 1e-8 * lim);
        let (lo, hi) = k.range();
        let f_h = h.powf(d);
        prop_assert!(r.value >= lo * f_h * (1.0 - 1e-12) && r.value <= hi * f_h * (1.0 + 1e-12));
    }
}

#[test]
fn i_derivative_is_minus_theta_mu_prime() {
    let s = EigenSpectrum::polynomial(2.0).unwrap();
    for theta in [0.1, 1.0, 10.0] {
        let h = 1e-4 * theta;
        let fd = (eval_i(&s, theta + h, &policy()).unwrap().value
            - eval_i(&s, theta - h, &policy()).unwrap().value)
            / (2.0 * h);
        let exact = -theta * eval_mu_prime(&s, theta, &policy()).unwrap().value;
        assert!(
            (fd / exact - 1.0).abs() < 1e-6,
            "theta={theta}: {fd} vs {exact}"
        );
    }
}

#[test]
fn kernel_limit_both_families() {
    let lin = KernelSpec::truncated_linear(4.0 / 3.0, -2.0 / 3.0).unwrap();
    for k in [KernelSpec::Uniform, lin] {
        for d in [1.0, 2.0, 3.0] {
            let r = kernel_expectation(|t: f64| Ok(d * t.ln()), &k, 0.3, 1e-12).unwrap();
            let lim = regular_variation_limit(&k, d, 1e-12).unwrap();
            assert!((r.value / 0.3f64.powf(d) - lim).abs() < 1e-8);
        }
    }
}

#[test]
fn kernel_sandwich_for_saddlepoint_estimate() {
    let s = EigenSpectrum::polynomial(2.0).unwrap();
    let k = KernelSpec::truncated_linear(4.0 / 3.0, -2.0 / 3.0).unwrap();
    let (lo, hi) = k.range();
    for h in [1e-2, 1e-1] {
        let r = kernel_expectation(
            |e| Ok(dmz_estimate(&s, e, DEFAULT_TOL)?.log_value),
            &k,
            h,
            1e-10,
        )
        .unwrap();
        assert!(r.factor >= lo && r.factor <= hi, "{}", r.factor);
    }
}

#[test]
fn cf_is_monotone_in_epsilon() {
    let s = EigenSpectrum::polynomial(2.0).unwrap();
    let v: Vec<f64> = [0.2, 0.3, 0.5, 0.8, 1.2]
        .iter()
        .map(|&e| cf_inversion_cdf(&s, e, 200, 1e-10).unwrap().estimate)
        .collect();
    assert!(v.windows(2).all(|w| w[1] > w[0]), "{v:?}");
}

#[test]
fn verdict_is_stable_under_estimated_aux() {
    let log_f = |s: f64| Ok(-1.0 / s);
    let exact = AuxFunction::closed_form("t^2", f64::INFINITY, |t| t * t);
    let estimated = aux_from_f("estimated", log_f, 1.0, 1e-12);
    let grid = [1e-2, 1e-3, 1e-4];
    let xs = [-1.0, 1.0, 2.0];
    let a = gamma_membership_check(log_f, &exact, &grid, &xs).unwrap();
    let b = gamma_membership_check(log_f, &estimated, &grid, &xs).unwrap();
    assert_eq!(a.verdict, Verdict::Pass);
    assert_eq!(a.verdict, b.verdict);
}

#[test]
fn dichotomy_for_exponential_family() {
    for k in [1, 2] {
        let log_f = |s: f64| -s.powi(-k);
        let s = 1e-2f64;
        assert!(log_f(2.0 * s) - log_f(s) > 1e3f64.ln());
        assert!(log_f(0.5 * s) - log_f(s) < -(1e3f64.ln()));
    }
    let sp = EigenSpectrum::polynomial(2.0).unwrap();
    let f = |e| dmz_estimate(&sp, e, DEFAULT_TOL).unwrap().log_value;
    assert_eq!(f(1e-4) - f(1e-4), 0.0);
}

/// The representation and the estimate share their logarithmic order; their
/// ratio itself drifts polynomially, since the two differ by a slowly
/// varying factor on the scale of rho.
#[test]
fn representation_tracks_estimate_in_log() {
    let s = EigenSpectrum::polynomial(2.0).unwrap();
    let rho = AuxFunction::inverted_mu(&s).unwrap();
    let f = |e| dmz_estimate(&s, e, DEFAULT_TOL).unwrap().log_value;
    let log_c = calibrate_representation(&rho, 1e-3, f(1e-3), 1.0).unwrap();
    let mut prev = f64::INFINITY;
    // Deviations shrink away from the anchor at 1e-3.
    for e in [5e-4, 2e-4, 1e-4, 5e-5] {
        let rep = log_representation_eval(&rho, e, log_c, 1.0).unwrap();
        let dev = (rep / f(e) - 1.0).abs();
        assert!(dev < 0.01, "eps={e}: {dev}");
        assert!(dev <= prev, "eps={e}: {dev} > {prev}");
        prev = dev;
    }
}
