use lanm_core::certify::*;
use lanm_core::model::{gaussian_vec, CodingMatrix};
use lanm_core::{CMat, CVec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Triangle sequence `1 - |i|/L` convolved with itself, divided by L.
fn fejer_by_convolution(l: usize) -> Vec<f64> {
    let li = l as i64;
    let tri: Vec<f64> = (-li..=li).map(|i| 1.0 - (i as f64 / l as f64).abs()).collect();
    let mut out = vec![0.0; 4 * l + 1];
    for (a, x) in tri.iter().enumerate() {
        for (b, y) in tri.iter().enumerate() {
            out[a + b] += x * y / l as f64;
        }
    }
    out
}

#[test]
fn weights_match_convolution() {
    for l in 2..9 {
        let w = fejer_weights(l).unwrap();
        let conv = fejer_by_convolution(l);
        let li = l as i64;
        for n in -2 * li..=2 * li {
            assert!((w.get(n) - conv[(n + 2 * li) as usize]).abs() < 1e-13);
            assert_eq!(w.get(n), w.get(-n));
            assert!(w.get(n) >= 0.0);
            assert!(w.get(n) <= w.get(0));
        }
        assert_eq!(w.get(2 * li + 1), 0.0);
    }
    assert!(fejer_weights(1).is_err());
}

#[test]
fn weight_examples() {
    // boundary: only i = L contributes, and its product is zero
    let w = fejer_weights(5).unwrap();
    let single = (1.0 - 1.0) * (1.0 - ((10 - 5) as f64 / 5.0).abs()) / 5.0;
    assert_eq!(w.get(10), single);
    // s_0 at L = 4 by the 9-term sum
    let w = fejer_weights(4).unwrap();
    let brute: f64 = (-4..=4).map(|i: i32| (1.0 - (i as f64 / 4.0).abs()).powi(2)).sum::<f64>() / 4.0;
    assert!((w.get(0) - brute).abs() < 1e-15);
}

#[test]
fn kernel_shape() {
    let w = fejer_weights(6).unwrap();
    assert!((kernel_1d(0.0, 0, &w) - C64::from(1.0)).norm() < 1e-14);
    assert!((fejer_kernel([0.0; 4], [0; 4], &w).unwrap() - C64::from(1.0)).norm() < 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let x: f64 = rng.random();
        let v = kernel_1d(x, 0, &w);
        assert!(v.im.abs() < 1e-14);
        assert!(v.re <= 1.0 + 1e-14);
    }
    for d in 0..4 {
        let mut o = [0; 4];
        o[d] = 1;
        assert!(fejer_kernel([0.0; 4], o, &w).unwrap().norm() < 1e-12);
    }
    let k2 = kernel_1d(0.0, 2, &w).re;
    let kap = kappa(&w);
    assert!((kap * kap * k2.abs() - 1.0).abs() < 1e-12);
    assert!(fejer_kernel([0.0; 4], [4, 0, 0, 0], &w).is_err());
}

#[test]
fn derivatives_match_finite_differences() {
    let w = fejer_weights(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    for _ in 0..20 {
        let tau: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
        for d in 0..4 {
            for order in 0..2u32 {
                let mut o = [0u32; 4];
                o[d] = order;
                let mut o1 = o;
                o1[d] += 1;
                let (mut tp, mut tm) = (tau, tau);
                tp[d] += h;
                tm[d] -= h;
                let fd = (fejer_kernel(tp, o, &w).unwrap() - fejer_kernel(tm, o, &w).unwrap()) / (2.0 * h);
                let exact = fejer_kernel(tau, o1, &w).unwrap();
                let scale = exact.norm().max(fejer_kernel(tau, o, &w).unwrap().norm() * 10.0);
                assert!((fd - exact).norm() < 1e-5 * scale + 1e-8, "d {d} order {order} fd {fd} exact {exact}");
            }
        }
    }
}

fn separated_pair(rng: &mut ChaCha8Rng) -> Vec<[f64; 4]> {
    let a: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
    let mut b = a;
    b[0] = (a[0] + 0.5).rem_euclid(1.0);
    b[2] = (a[2] + 0.3).rem_euclid(1.0);
    vec![a, b]
}

#[test]
fn phi_is_close_to_identity_when_separated() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = fejer_weights(16).unwrap();
    for _ in 0..5 {
        let coords = separated_pair(&mut rng);
        let phi = build_phi(&coords, &w);
        assert!((&phi - phi.adjoint()).norm() < 1e-12);
        let (i_minus, norm, inv) = phi_bounds(&phi);
        assert!(i_minus <= 0.1811, "{i_minus}");
        assert!(norm <= 1.1811);
        assert!(inv <= 1.2301);
    }
    // a single target gives Φ = I exactly
    let phi = build_phi(&[[0.2, 0.4, 0.6, 0.8]], &w);
    assert!((phi - CMat::identity(5, 5)).norm() < 1e-12);
}

#[test]
fn certificate_interpolates_and_stays_below_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = 2;
    for k in 1..=2 {
        let coords = if k == 1 { vec![[0.0; 4]] } else { separated_pair(&mut rng) };
        let signs: Vec<C64> = (0..k).map(|_| C64::from_polar(1.0, rng.random::<f64>() * 6.0)).collect();
        let h: Vec<CVec> = (0..k)
            .map(|_| {
                let v = gaussian_vec(t, &mut rng);
                let n = v.norm();
                v / C64::from(n)
            })
            .collect();
        for src in [
            KernelSource::Expectation { t },
            KernelSource::Randomized(CodingMatrix::gaussian(33, t, &mut rng)),
        ] {
            let sys = build_certificate(&coords, &signs, &h, src, 8).unwrap();
            assert!(sys.interpolation_residual < 1e-8);
            assert!(sys.derivative_residual < 1e-8);
            assert!((&sys.gamma - sys.gamma.adjoint()).norm() < 1e-10 * sys.gamma.norm());
            let rep = verify_certificate(&sys, 12).unwrap();
            assert!(rep.pass, "{rep:?}");
            assert!(rep.max_offsupport_norm < 1.0);
        }
    }
}

#[test]
fn randomized_kernel_averages_to_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = 2;
    let coords = vec![[0.1, 0.2, 0.3, 0.4], [0.6, 0.2, 0.7, 0.4]];
    let signs = vec![C64::from(1.0); 2];
    let h = vec![CVec::from_element(t, C64::from(std::f64::consts::FRAC_1_SQRT_2)); 2];
    let expect = build_certificate(&coords, &signs, &h, KernelSource::Expectation { t }, 4)
        .unwrap()
        .gamma;
    let mut acc = CMat::zeros(expect.nrows(), expect.ncols());
    let mut dev = Vec::new();
    for n in 1..=1000 {
        let cod = CodingMatrix::gaussian(17, t, &mut rng);
        let g = build_certificate(&coords, &signs, &h, KernelSource::Randomized(cod), 4)
            .unwrap()
            .gamma;
        acc += g;
        if n == 10 || n == 100 || n == 1000 {
            dev.push((&acc / C64::from(n as f64) - &expect).norm() / expect.norm());
        }
    }
    assert!(dev[0] > dev[1] && dev[1] > dev[2], "{dev:?}");
    assert!(dev[2] < 0.1, "{dev:?}");
}

#[test]
fn unseparated_targets_are_reported() {
    // a diagnostic: close targets may fail verification or be singular
    let coords = vec![[0.0; 4], [0.001, 0.0, 0.0, 0.0]];
    let h = vec![CVec::from_element(1, C64::from(1.0)); 2];
    let signs = vec![C64::from(1.0), C64::from(-1.0)];
    match build_certificate(&coords, &signs, &h, KernelSource::Expectation { t: 1 }, 8) {
        Err(_) => {}
        Ok(sys) => {
            let rep = verify_certificate(&sys, 8).unwrap();
            assert!(!rep.pass || sys.interpolation_residual > 1e-8);
        }
    }
    assert!(build_certificate(&[], &[], &[], KernelSource::Expectation { t: 1 }, 8).is_err());
}
