use kslice::geometry::sample_sphere;
use kslice::polytope::{contains, contains_ball_check, gluskin_ratio, volume_estimate, VPolytope};
use kslice::rng::stream;
use kslice::specialfn::sphere_surface;
use kslice::Error;
use proptest::prelude::*;
use rand::Rng;

fn cross_polytope(n: usize, r: f64) -> VPolytope {
    let mut vs = Vec::new();
    for i in 0..n {
        for s in [r, -r] {
            let mut v = vec![0.0; n];
            v[i] = s;
            vs.push(v);
        }
    }
    VPolytope::new(n, &vs, None).unwrap()
}

fn cube(n: usize) -> VPolytope {
    let vs: Vec<Vec<f64>> =
        (0..1usize << n).map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect()).collect();
    VPolytope::new(n, &vs, None).unwrap()
}

/// ±n·e_i plus ±n·θ_j for random directions θ_j.
fn random_body(n: usize, extra_pairs: usize, seed: u64) -> VPolytope {
    let mut rng = stream(seed, 0);
    let nf = n as f64;
    let mut vs = Vec::new();
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = nf;
        vs.push(v.iter().map(|a| -a).collect());
        vs.push(v);
    }
    for _ in 0..extra_pairs {
        let p: Vec<f64> = sample_sphere(n, &mut rng).into_iter().map(|a| nf * a).collect();
        vs.push(p.iter().map(|a| -a).collect());
        vs.push(p);
    }
    VPolytope::new(n, &vs, None).unwrap()
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

#[test]
fn construction_contracts() {
    assert!(matches!(VPolytope::new(2, &[vec![1.0, 0.0], vec![-1.0, 0.0]], None), Err(Error::Domain(_))));
    let lopsided = [vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -2.0]];
    assert!(VPolytope::new(2, &lopsided, None).is_err());
    let p = cross_polytope(3, 2.0);
    assert_eq!(p.circumradius(), 2.0);
    assert!(VPolytope::new(3, &p.vertices().map(<[f64]>::to_vec).collect::<Vec<_>>(), Some(1.0)).is_err());
    assert!(matches!(p.contains(&[1.0, 0.0], 1.0), Err(Error::DimensionMismatch { .. })));
    assert!(p.contains(&[1.0, 0.0, 0.0], 0.0).is_err());
}

#[test]
fn cube_and_cross_polytope_gauges() {
    let mut rng = stream(1, 0);
    for n in [2, 3, 5] {
        let c = cube(n);
        let x = cross_polytope(n, 1.0);
        for _ in 0..200 {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let inf = v.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
            let one: f64 = v.iter().map(|a| a.abs()).sum();
            assert!((c.gauge(&v).unwrap() - inf).abs() < 1e-9 * inf.max(1.0));
            assert!((x.gauge(&v).unwrap() - one).abs() < 1e-9 * one.max(1.0));
        }
    }
}

#[test]
fn origin_inside_and_scaled_vertex_outside() {
    let n = 6;
    let p = cross_polytope(n, n as f64);
    assert!(contains(&p, &vec![0.0; n], 1.0).unwrap());
    for scale in [0.5, 1.0, 3.0] {
        let mut x = vec![0.0; n];
        x[2] = 1.0001 * scale * n as f64;
        assert!(!contains(&p, &x, scale).unwrap());
        x[2] = 0.9999 * scale * n as f64;
        assert!(contains(&p, &x, scale).unwrap());
    }
}

#[test]
fn every_vertex_is_inside() {
    let p = random_body(7, 30, 3);
    for v in p.vertices() {
        assert!(p.contains(v, 1.0).unwrap());
        let gauge = p.gauge(v).unwrap();
        assert!(gauge <= 1.0 + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convex_combinations_are_inside(seed in any::<u64>(), n in 2usize..9, pairs in 0usize..20) {
        let p = random_body(n, pairs, seed);
        let mut rng = stream(seed, 1);
        let weights: Vec<f64> = (0..p.vertex_count()).map(|_| rng.random::<f64>().powi(4)).collect();
        let total: f64 = weights.iter().sum();
        let mut x = vec![0.0; n];
        for (w, v) in weights.iter().zip(p.vertices()) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += w / total * vi;
            }
        }
        prop_assert!(p.contains(&x, 1.0).unwrap());
    }

    /// Support-function sandwich: |x|²/h_P(x) <= gauge(x), and any explicit
    /// convex representation bounds it from above.
    #[test]
    fn gauge_respects_support_function(seed in any::<u64>(), n in 2usize..9, pairs in 0usize..20) {
        let p = random_body(n, pairs, seed);
        let x: Vec<f64> = sample_sphere(n, &mut stream(seed, 2)).into_iter().map(|a| 1.7 * a * n as f64).collect();
        let h = p.vertices().map(|v| v.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().abs()).fold(0.0, f64::max);
        let sq: f64 = x.iter().map(|a| a * a).sum();
        let g = p.gauge(&x).unwrap();
        prop_assert!(g >= sq / h * (1.0 - 1e-9));
        // x/n as a combination of ±n e_i has total weight ‖x‖_1 / n
        let l1: f64 = x.iter().map(|a| a.abs()).sum::<f64>() / n as f64;
        prop_assert!(g <= l1 * (1.0 + 1e-9));
    }

    #[test]
    fn membership_is_symmetric_and_monotone(seed in any::<u64>(), n in 2usize..9, t in 0.2f64..2.0) {
        let p = random_body(n, 10, seed);
        let x: Vec<f64> = sample_sphere(n, &mut stream(seed, 3)).into_iter().map(|a| t * n as f64 * a).collect();
        let neg: Vec<f64> = x.iter().map(|a| -a).collect();
        for s in [0.5, 0.9, 1.0, 1.3, 2.0] {
            let inside = p.contains(&x, s).unwrap();
            prop_assert_eq!(inside, p.contains(&neg, s).unwrap());
            if inside {
                prop_assert!(p.contains(&x, s * 1.5).unwrap());
            }
        }
    }

    #[test]
    fn gauge_is_homogeneous(seed in any::<u64>(), n in 2usize..8, t in 0.1f64..10.0) {
        let p = random_body(n, 8, seed);
        let x = sample_sphere(n, &mut stream(seed, 5));
        let tx: Vec<f64> = x.iter().map(|a| t * a).collect();
        let (g, gt) = (p.gauge(&x).unwrap(), p.gauge(&tx).unwrap());
        prop_assert!((gt - t * g).abs() <= 1e-9 * t * g);
    }
}

#[test]
fn ball_containment_checks() {
    let n = 5;
    let p = cross_polytope(n, n as f64);
    let mut rng = stream(4, 0);
    assert!(contains_ball_check(&p, (n as f64).sqrt(), 2000, &mut rng).unwrap());
    assert!(!contains_ball_check(&p, n as f64 + 1e-3, 10, &mut rng).unwrap());
    assert!(contains_ball_check(&p, 0.0, 10, &mut rng).unwrap());
    assert!(contains_ball_check(&p, -1.0, 10, &mut rng).is_err());
}

#[test]
fn volume_of_cube_and_cross_polytope() {
    for n in [3usize, 4] {
        let cube_vol = volume_estimate(&cube(n), &mut stream(5, n as u64), 200_000).unwrap();
        let want = 2f64.powi(n as i32);
        assert!((cube_vol.estimate - want).abs() <= 3.0 * cube_vol.std_error, "cube n={n}: {cube_vol:?}");

        let cross_vol = volume_estimate(&cross_polytope(n, 1.0), &mut stream(6, n as u64), 200_000).unwrap();
        let want = (n as f64 * 2f64.ln() - ln_factorial(n)).exp();
        assert!((cross_vol.estimate - want).abs() <= 3.0 * cross_vol.std_error, "cross n={n}: {cross_vol:?}");
    }
}

#[test]
fn volume_scales_as_t_to_the_n() {
    let p = random_body(4, 6, 7);
    let a = volume_estimate(&p, &mut stream(1, 0), 50_000).unwrap();
    let b = volume_estimate(&p.scaled(2.0).unwrap(), &mut stream(1, 0), 50_000).unwrap();
    let pooled = ((16.0 * a.std_error).powi(2) + b.std_error.powi(2)).sqrt();
    assert!((b.estimate - 16.0 * a.estimate).abs() <= 3.0 * pooled);
}

#[test]
fn volume_guards() {
    let p = cross_polytope(3, 1.0);
    assert!(volume_estimate(&p, &mut stream(0, 0), 100).is_err());
    // a thin cross-polytope in R^14 fills almost none of its circumscribed ball
    let thin = cross_polytope(14, 1.0);
    assert!(matches!(volume_estimate(&thin, &mut stream(0, 0), 10_000), Err(Error::Undersampled { .. })));
}

#[test]
fn gluskin_ratio_definition_and_contracts() {
    let (n, m) = (5usize, 40usize);
    let vol = ((m as f64 / n as f64).ln().sqrt()).powi(n as i32);
    assert!((gluskin_ratio(n, m, vol).unwrap() - 1.0).abs() < 1e-12);
    assert!(gluskin_ratio(4, 4, 1.0).is_err());
    assert!(gluskin_ratio(1, 4, 1.0).is_err());
    assert!(gluskin_ratio(4, 8, 0.0).is_err());
}

/// n·conv(±e_i) has volume (2n)^n/n!, so its ratio is 2n/(n!)^{1/n}/√(log 2),
/// which by Stirling increases to 2e/√(log 2).
#[test]
fn gluskin_ratio_of_cross_polytope() {
    let limit = 2.0 * std::f64::consts::E / 2f64.ln().sqrt();
    let mut prev = 0.0;
    for n in 2..=60 {
        let ln_vol = n as f64 * (2.0 * n as f64).ln() - ln_factorial(n);
        let r = gluskin_ratio(n, 2 * n, ln_vol.exp()).unwrap();
        let stirling = limit / (2.0 * std::f64::consts::PI * n as f64).powf(0.5 / n as f64);
        assert!(r > prev && r < limit);
        // the next Stirling term is a factor e^{1/(12n²)}
        assert!((r - stirling).abs() < stirling / (6.0 * (n * n) as f64), "n={n}: {r} vs {stirling}");
        prev = r;
    }
    for n in [3usize, 5] {
        let p = cross_polytope(n, n as f64);
        let est = volume_estimate(&p, &mut stream(2, n as u64), 100_000).unwrap();
        let exact = (n as f64 * (2.0 * n as f64).ln() - ln_factorial(n)).exp();
        let a = gluskin_ratio(n, 2 * n, est.estimate).unwrap();
        let b = gluskin_ratio(n, 2 * n, exact).unwrap();
        assert!((a - b).abs() < 0.01 * b);
    }
}

/// |P| = (κ_n/n) E_θ[gauge(θ)^{-n}], averaged over the sphere; unlike
/// hit-or-miss it does not degrade as P shrinks inside its circumscribed ball.
fn radial_volume(p: &VPolytope, draws: usize, seed: u64) -> f64 {
    let n = p.ambient_dim();
    let mut rng = stream(seed, 0);
    let mean = (0..draws).map(|_| p.gauge(&sample_sphere(n, &mut rng)).unwrap().powi(-(n as i32))).sum::<f64>()
        / draws as f64;
    sphere_surface(n).unwrap() / n as f64 * mean
}

#[test]
fn radial_volume_agrees_with_hit_or_miss() {
    for n in [3usize, 5] {
        let p = random_body(n, n, 50 + n as u64);
        let hm = volume_estimate(&p, &mut stream(4, n as u64), 100_000).unwrap();
        let radial = radial_volume(&p, 100_000, n as u64);
        assert!((radial - hm.estimate).abs() < 4.0 * hm.std_error + 0.01 * radial, "n={n}: {radial} vs {hm:?}");
    }
}

#[test]
fn gluskin_ratios_stay_comparable_across_dimensions() {
    let ratios: Vec<f64> = (4..=10)
        .map(|n| {
            let p = random_body(n, n, 100 + n as u64);
            assert_eq!(p.vertex_count(), 4 * n);
            gluskin_ratio(n, p.vertex_count(), radial_volume(&p, 20_000, n as u64)).unwrap()
        })
        .collect();
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max / min <= 3.0, "{ratios:?}");
}

#[test]
fn polytope_serde_roundtrip() {
    let p = random_body(3, 4, 9);
    let text = serde_json::to_string(&p).unwrap();
    let q: VPolytope = serde_json::from_str(&text).unwrap();
    assert_eq!(p, q);
}
