use kslice::geometry::sample_sphere;
use kslice::rng::stream;
use kslice::specialfn::{
    ball_volume, expectation_integral, expectation_integral_with_order, gamma_inequality_margin, log_gamma,
    sphere_surface, QuadratureRule,
};
use proptest::prelude::*;
use statrs::function::gamma::ln_gamma;

#[test]
fn log_gamma_matches_reference_implementation() {
    let mut x = 0.5;
    while x <= 200.0 {
        let want = ln_gamma(x);
        let got = log_gamma(x).unwrap();
        let scale = want.abs().max(1.0);
        assert!((got - want).abs() <= 1e-12 * scale, "x={x}: {got} vs {want}");
        x += 0.37;
    }
}

#[test]
fn log_gamma_known_values() {
    assert!(log_gamma(1.0).unwrap().abs() < 1e-14);
    assert!((log_gamma(0.5).unwrap() - 0.5723649429247001).abs() < 1e-13);
    assert!((log_gamma(5.0).unwrap() - 24f64.ln()).abs() < 1e-13);
    for bad in [0.0, -1.5, f64::NAN, f64::INFINITY] {
        assert!(log_gamma(bad).is_err());
    }
}

#[test]
fn sphere_surface_and_ball_volume() {
    use std::f64::consts::PI;
    assert!((sphere_surface(1).unwrap() - 2.0).abs() < 1e-14);
    assert!((sphere_surface(2).unwrap() - 2.0 * PI).abs() < 1e-14);
    assert!((sphere_surface(3).unwrap() - 4.0 * PI).abs() < 1e-13);
    assert!((sphere_surface(4).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
    assert!(sphere_surface(0).is_err());
    assert!((ball_volume(3).unwrap() - 4.0 * PI / 3.0).abs() < 1e-13);
    // κ_{m+2} = 2π/m · κ_m
    for m in 1..40 {
        let lhs = sphere_surface(m + 2).unwrap();
        let rhs = 2.0 * PI / m as f64 * sphere_surface(m).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }
}

#[test]
fn gamma_margin_examples() {
    assert_eq!(gamma_inequality_margin(3.0, 0.0).unwrap(), 0.0);
    assert!((gamma_inequality_margin(2.0, 1.0).unwrap() - 2f64.ln()).abs() < 1e-14);
    let direct = 3.25 * 7.5f64.ln() + ln_gamma(7.5 - 3.25) - ln_gamma(7.5);
    let got = gamma_inequality_margin(7.5, 3.25).unwrap();
    assert!(got >= 0.0);
    assert!((got - direct).abs() < 1e-12);
    assert!(gamma_inequality_margin(2.0, 2.0).is_err());
    assert!(gamma_inequality_margin(2.0, -0.1).is_err());
}

proptest! {
    #[test]
    fn gamma_margin_nonnegative(lambda in 1e-3f64..100.0, frac in 0.0f64..1.0) {
        let mu = lambda * frac;
        prop_assume!(mu < lambda);
        prop_assert!(gamma_inequality_margin(lambda, mu).unwrap() >= -1e-10);
    }

    #[test]
    fn quadrature_integrates_polynomials_exactly(order in 2usize..30, degree in 0usize..6) {
        prop_assume!(degree < 2 * order);
        let rule = QuadratureRule::gauss_legendre(order).unwrap();
        let got = rule.integrate(-1.0, 2.0, |t| t.powi(degree as i32));
        let want = (2f64.powi(degree as i32 + 1) - (-1f64).powi(degree as i32 + 1)) / (degree as f64 + 1.0);
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }
}

#[test]
fn expectation_bound_holds_on_full_grid() {
    for n in 2..=32 {
        for k in 1..n {
            let v = expectation_integral(n, k, 1.0).unwrap();
            let bound = (n as f64).powf(-(k as f64) / 2.0);
            assert!(v > 0.0 && v <= bound + 1e-10, "n={n}, k={k}: {v} > {bound}");
        }
    }
}

#[test]
fn expectation_rejects_bad_arguments() {
    assert!(expectation_integral(4, 0, 1.0).is_err());
    assert!(expectation_integral(4, 4, 1.0).is_err());
    assert!(expectation_integral(4, 2, -1.0).is_err());
}

#[test]
fn expectation_small_beta_tends_to_one() {
    for (n, k) in [(3, 1), (8, 3), (16, 15)] {
        let v = expectation_integral(n, k, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "n={n}, k={k}: {v}");
    }
}

#[test]
fn expectation_order_doubling_and_monotonicity() {
    for (n, k) in [(2, 1), (5, 4), (9, 3), (20, 7), (32, 31)] {
        let a = expectation_integral_with_order(n, k, 1.0, 16).unwrap();
        let b = expectation_integral_with_order(n, k, 1.0, 32).unwrap();
        assert!((a - b).abs() < 1e-10, "n={n}, k={k}");
        let mut prev = f64::INFINITY;
        for beta in [0.01, 0.1, 0.5, 1.0, 2.0, 10.0] {
            let v = expectation_integral(n, k, beta).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }
}

/// E exp(-d(F, 6θ)²) for a hyperplane F in R^6, against 10^6 sphere draws.
#[test]
fn expectation_matches_sphere_monte_carlo() {
    let (n, k) = (6, 1);
    let mut rng = stream(11, 0);
    let draws = 1_000_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let theta = sample_sphere(n, &mut rng);
        let y = (-((n * n) as f64) * theta[0] * theta[0]).exp();
        sum += y;
        sum_sq += y * y;
    }
    let mean = sum / draws as f64;
    let se = ((sum_sq / draws as f64 - mean * mean) / draws as f64).sqrt();
    let exact = expectation_integral(n, k, 1.0).unwrap();
    assert!((mean - exact).abs() <= 3.0 * se, "mc {mean} ± {se}, exact {exact}");
}

/// k = n-1 has the (1-t²)^{-1/2} endpoint singularity in the t form; check
/// it against a closed form. With F a line, d² = n²(1 - θ_1²) and θ_1 has
/// density ∝ (1-s²)^{(n-3)/2}; for n = 3 θ_1 is uniform on [-1, 1].
#[test]
fn expectation_singular_case_closed_form() {
    let n = 3.0_f64;
    // E exp(-9(1 - s²)) with s uniform on [-1, 1] = e^{-9} ∫_0^1 e^{9 s²} ds
    let rule = QuadratureRule::gauss_legendre(40).unwrap();
    let want = (-9.0f64).exp() * rule.integrate_adaptive(0.0, 1.0, 1e-15, |s| (9.0 * s * s).exp());
    let got = expectation_integral(3, 2, 1.0).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    assert!(got <= 1.0 / n);
}
