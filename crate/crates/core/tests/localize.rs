use lanm_core::localize::*;
use lanm_core::model::*;
use lanm_core::{wrap_dist, CVec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn operator(nt: usize, nr: usize, n: usize, t: usize, rng: &mut ChaCha8Rng) -> MeasurementOperator {
    let sc = SceneConfig {
        n_tx: nt,
        n_rx: nr,
        half_len: n,
        subspace_dim: t,
        n_targets: 0,
        n_jammers: 0,
        rng_seed: 0,
    };
    let cod: Vec<_> = (0..nt).map(|_| CodingMatrix::gaussian(sc.lbar(), t, rng)).collect();
    build_operator(&sc, &cod, Flavor::PerAntennaCoded).unwrap()
}

/// `‖X*(q) a(τ)‖₂` straight from the operator.
fn direct(op: &MeasurementOperator, q: &CVec, c: [f64; 4]) -> f64 {
    (op.adjoint(q).unwrap() * op.atom(c)).norm()
}

#[test]
fn pointwise_evaluation_matches_operator() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let op = operator(2, 2, 2, 3, &mut rng);
    let q = gaussian_vec(op.n_meas(), &mut rng);
    let poly = DualPolynomial::new(&q, &op).unwrap();
    for _ in 0..20 {
        let c: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
        let d = direct(&op, &q, c);
        assert!((poly.norm_at(c) - d).abs() < 1e-10 * d.max(1.0));
        let v = poly.eval(c);
        let want = op.adjoint(&q).unwrap() * op.atom(c);
        assert!((v - want).norm() < 1e-10);
    }
}

#[test]
fn grid_values_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let op = operator(2, 2, 1, 2, &mut rng);
    let q = gaussian_vec(op.n_meas(), &mut rng);
    let poly = DualPolynomial::new(&q, &op).unwrap();
    let res = [8, 7, 6, 9];
    let grid = poly.eval_grid(res).unwrap();
    assert_eq!(grid.values.len(), 8 * 7 * 6 * 9);
    for _ in 0..30 {
        let idx = [
            rng.random_range(0..8),
            rng.random_range(0..7),
            rng.random_range(0..6),
            rng.random_range(0..9),
        ];
        let c = grid.coords_of(idx);
        let d = direct(&op, &q, c);
        assert!((grid.values[grid.flat(idx)] - d).abs() < 1e-9 * d.max(1.0));
        assert_eq!(grid.unflat(grid.flat(idx)), idx);
    }
    assert!(poly.eval_grid([2, 8, 8, 8]).is_err());
    let zero = DualPolynomial::new(&CVec::zeros(op.n_meas()), &op).unwrap();
    assert_eq!(zero.eval_grid(res).unwrap().max(), 0.0);
}

#[test]
fn norm_is_invariant_to_global_phase() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let op = operator(2, 1, 2, 1, &mut rng);
    let q = gaussian_vec(op.n_meas(), &mut rng);
    let a = DualPolynomial::new(&q, &op).unwrap();
    let b = DualPolynomial::new(&(&q * C64::from_polar(1.0, 1.234)), &op).unwrap();
    let c = [0.1, 0.2, 0.3, 0.4];
    assert!((a.norm_at(c) - b.norm_at(c)).abs() < 1e-12);
}

/// Back-projection of one atom, scaled so the grid maximum is 1.
fn peaked_q(op: &MeasurementOperator, c0: [f64; 4]) -> CVec {
    let a = op.atom(c0);
    let q = op.atom_response(&a).column(0).into_owned();
    let v = DualPolynomial::new(&q, op).unwrap().eval_grid([32; 4]).unwrap().max();
    q / C64::from(v)
}

#[test]
fn peaks_below_threshold_are_ignored() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let op = operator(2, 2, 2, 1, &mut rng);
    let q = peaked_q(&op, [0.3, 0.6, 0.2, 0.1]) * C64::from(0.5);
    let poly = DualPolynomial::new(&q, &op).unwrap();
    let opts = LocalizeOptions::for_scene(2, 2);
    let (_, peaks) = localize(&poly, &opts).unwrap();
    assert!(peaks.is_empty());
}

#[test]
fn refinement_climbs_to_the_local_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let op = operator(2, 2, 2, 1, &mut rng);
    let q = gaussian_vec(op.n_meas(), &mut rng);
    let poly = DualPolynomial::new(&q, &op).unwrap();
    let grid = poly.eval_grid([16, 16, 16, 16]).unwrap();
    let best = (0..grid.values.len())
        .max_by(|&a, &b| grid.values[a].total_cmp(&grid.values[b]))
        .unwrap();
    let start = grid.coords_of(grid.unflat(best));
    let est = refine_peak(&poly, start, grid.cell());
    assert!(est.peak_value >= grid.values[best]);
    // stationary: small moves in any coordinate do not increase the value
    for k in 0..4 {
        for d in [-1e-5, 1e-5] {
            let mut c = est.coords;
            c[k] += d;
            assert!(poly.norm_at(c) <= est.peak_value + 1e-9);
        }
    }
}

#[test]
fn duplicate_maxima_of_one_lobe_are_merged() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let op = operator(2, 2, 1, 1, &mut rng);
    let q = gaussian_vec(op.n_meas(), &mut rng);
    let poly = DualPolynomial::new(&q, &op).unwrap();
    let mut grid = poly.eval_grid([32; 4]).unwrap();
    let best = (0..grid.values.len())
        .max_by(|&a, &b| grid.values[a].total_cmp(&grid.values[b]))
        .unwrap();
    let idx = grid.unflat(best);
    // two separate grid maxima two delay cells apart, well inside one lobe
    let twin = [(idx[0] + 2) % 32, idx[1], idx[2], idx[3]];
    grid.values.iter_mut().for_each(|v| *v = 0.0);
    grid.values[best] = 1.0;
    let f = grid.flat(twin);
    grid.values[f] = 1.0;
    let peaks = extract_peaks(&grid, &poly, 0.5, 0.5);
    assert_eq!(peaks.len(), 1, "{peaks:?}");
    let far = [(idx[0] + 16) % 32, idx[1], idx[2], idx[3]];
    let f = grid.flat(far);
    grid.values[f] = 1.0;
    assert_eq!(extract_peaks(&grid, &poly, 0.5, 0.5).len(), 2);
    grid.values.iter_mut().for_each(|v| *v = 0.4);
    assert!(extract_peaks(&grid, &poly, 0.5, 0.5).is_empty());
}

#[test]
fn jammer_polynomial_peaks_at_the_steering_frequency() {
    let (nr, lbar) = (4, 5);
    let psi0 = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let temporal = gaussian_vec(lbar, &mut rng);
    // P[p, r] = temporal[p]·e^{i2π r ψ0}
    let q = CVec::from_fn(nr * lbar, |j, _| {
        let (r, p) = (j / lbar, j % lbar);
        temporal[p] * C64::from_polar(1.0, 2.0 * PI * r as f64 * psi0)
    });
    let jp = JammerPolynomial::new(&q, nr, lbar).unwrap();
    // grid-sup oracle over 10⁴ points
    let n = 10_000;
    let (arg, sup) = (0..n)
        .map(|k| (k as f64 / n as f64, jp.eval(k as f64 / n as f64)))
        .fold((0.0, 0.0), |b, x| if x.1 > b.1 { x } else { b });
    assert!(wrap_dist(arg, psi0) <= 1.0 / n as f64);
    let peak = temporal.norm() * nr as f64;
    assert!((sup - peak).abs() < 1e-6 * peak);
    let g = jp.grid(64).unwrap();
    for (k, v) in g.iter().enumerate() {
        assert!((v - jp.eval(k as f64 / 64.0)).abs() < 1e-10);
    }
    let est = jp.estimates(peak, 1e-3, 256).unwrap();
    assert_eq!(est.len(), 1);
    assert!(wrap_dist(est[0], psi0) < 1e-8);
    assert_eq!(jp.clusters(256, 0.99 * peak).unwrap().len(), 1);
    let zero = JammerPolynomial::new(&CVec::zeros(nr * lbar), nr, lbar).unwrap();
    assert!(zero.grid(32).unwrap().iter().all(|&v| v == 0.0));
}
