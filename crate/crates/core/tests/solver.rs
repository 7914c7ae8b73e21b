use lanm_core::model::*;
use lanm_core::solver::conic::{herm_offset, herm_pack, herm_unpack, project_psd, project_soc, solve_conic};
use lanm_core::solver::*;
use lanm_core::{CMat, CVec, C64};
use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_herm(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let a = CMat::from_column_slice(n, n, gaussian_vec(n * n, rng).as_slice());
    (&a + a.adjoint()) * C64::from(0.5)
}

fn instance(nt: usize, nr: usize, n: usize, seed: u64) -> (MeasurementOperator, CVec, TargetParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sc = SceneConfig {
        n_tx: nt,
        n_rx: nr,
        half_len: n,
        subspace_dim: 1,
        n_targets: 1,
        n_jammers: 0,
        rng_seed: seed,
    };
    let cod: Vec<_> = (0..nt).map(|_| CodingMatrix::gaussian(sc.lbar(), 1, &mut rng)).collect();
    let op = build_operator(&sc, &cod, Flavor::PerAntennaCoded).unwrap();
    let tg = TargetParams::random(nt, &mut rng);
    let sym = SymbolVector::random(1, Constellation::Qam4, &mut rng);
    let y = simulate(&op, std::slice::from_ref(&tg), &[sym], &[], None, &mut rng)
        .unwrap()
        .y_clean;
    (op, y, tg)
}

fn residuals(p: &ConicProgram, x: &[f64]) -> f64 {
    p.rows
        .iter()
        .zip(&p.rhs)
        .map(|(r, b)| (r.iter().map(|&(c, v)| v * x[c]).sum::<f64>() - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn trace_constraint_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (nt, nr, n) in [(1, 1, 1), (2, 1, 1), (2, 2, 1), (3, 2, 2), (2, 3, 2)] {
        let sc = SceneConfig {
            n_tx: nt,
            n_rx: nr,
            half_len: n,
            subspace_dim: 1,
            n_targets: 0,
            n_jammers: 0,
            rng_seed: 0,
        };
        let cod = vec![CodingMatrix::gaussian(sc.lbar(), 1, &mut rng)];
        let op = build_operator(&sc, &cod, Flavor::PaperFaithful).unwrap();
        let p = build_clean_sdr(&CVec::zeros(op.n_meas()), &op).unwrap();
        let lb = 2 * n + 1;
        assert_eq!(p.n_trace_constraints, (2 * lb - 1).pow(2) * (2 * nt - 1) * (2 * nr - 1));
        assert_eq!(p.psd_blocks(), vec![op.atom_len() + 1]);
    }
}

#[test]
fn zero_dual_with_scaled_identity_is_feasible() {
    let (op, y, _) = instance(2, 2, 1, 3);
    let p = build_clean_sdr(&y, &op).unwrap();
    let m = op.atom_len();
    let mut z = CMat::identity(m + 1, m + 1);
    for i in 0..m {
        z[(i, i)] = C64::from(1.0 / m as f64);
    }
    let mut x = vec![0.0; p.program.n_vars()];
    herm_pack(&z, &mut x[p.layout.z_offset..]);
    assert!(residuals(&p.program, &x) < 1e-14);
    // a nonzero q breaks the coupling rows
    x[p.layout.q_offset] = 0.1;
    assert!(residuals(&p.program, &x) > 1e-3);
}

#[test]
fn scalar_bound_returns_sign() {
    // maximize y·q subject to [[1, q], [q, 1]] ⪰ 0, i.e. |q| ≤ 1
    for y in [2.5, -0.7] {
        let mut p = ConicProgram::new(vec![Cone::Free(1), Cone::Psd(2)]);
        p.objective[0] = -y;
        p.push_row(vec![(1 + herm_offset(0, 0), 1.0)], 1.0);
        p.push_row(vec![(1 + herm_offset(1, 1), 1.0)], 1.0);
        p.push_row(vec![(1 + herm_offset(0, 1), std::f64::consts::FRAC_1_SQRT_2), (0, -1.0)], 0.0);
        p.push_row(vec![(1 + herm_offset(0, 1) + 1, 1.0)], 0.0);
        let s = solve_conic(&p, &AdmmOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.x[0] - y.signum()).abs() < 1e-4, "{}", s.x[0]);
        assert!((s.objective + y.abs()).abs() < 1e-4);
    }
}

#[test]
fn herm_packing_preserves_trace_inner_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (a, b) = (random_herm(6, &mut rng), random_herm(6, &mut rng));
    let (mut va, mut vb) = (vec![0.0; 36], vec![0.0; 36]);
    herm_pack(&a, &mut va);
    herm_pack(&b, &mut vb);
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    assert!((dot - (&a * &b).trace().re).abs() < 1e-12);
    assert!((herm_unpack(&va, 6) - a).norm() < 1e-14);
}

#[test]
fn psd_projection_matches_full_eigendecomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [1, 2, 5, 17, 40] {
        for _ in 0..5 {
            let z = random_herm(n, &mut rng);
            let p = project_psd(&z);
            let eig = SymmetricEigen::new(z.clone());
            let mut want = CMat::zeros(n, n);
            for k in 0..n {
                let l = eig.eigenvalues[k].max(0.0);
                let v = eig.eigenvectors.column(k);
                want += v * v.adjoint() * C64::from(l);
            }
            assert!((&p - &want).norm() < 1e-10 * (1.0 + z.norm()));
            assert!((project_psd(&p) - &p).norm() < 1e-12 * (1.0 + z.norm()));
            let min = SymmetricEigen::new(p).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > -1e-12);
        }
    }
}

#[test]
fn soc_projection_cases() {
    let mut inside = [2.0, 1.0, -1.0];
    project_soc(&mut inside);
    assert_eq!(inside, [2.0, 1.0, -1.0]);
    let mut polar = [-3.0, 1.0, 1.0];
    project_soc(&mut polar);
    assert_eq!(polar, [0.0; 3]);
    let mut v = [0.0, 3.0, 4.0];
    project_soc(&mut v);
    // onto the boundary: t = ‖x‖ = 2.5
    assert!((v[0] - 2.5).abs() < 1e-14);
    assert!(((v[1] * v[1] + v[2] * v[2]).sqrt() - 2.5).abs() < 1e-14);
}

#[test]
fn dual_norm_check_examples() {
    let (op, _, _) = instance(2, 1, 1, 4);
    assert_eq!(dual_atomic_norm_check(&CVec::zeros(op.n_meas()), &op, 16).unwrap(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q = gaussian_vec(op.n_meas(), &mut rng);
    let a = dual_atomic_norm_check(&q, &op, 16).unwrap();
    let b = dual_atomic_norm_check(&(&q * C64::from(2.0)), &op, 16).unwrap();
    assert!((b - 2.0 * a).abs() < 1e-12 * a);
    assert!(dual_atomic_norm_check(&q, &op, 8).is_err());
}

#[test]
fn clean_solve_is_feasible_and_weakly_dual() {
    let (op, y, tg) = instance(2, 1, 1, 6);
    let p = build_clean_sdr(&y, &op).unwrap();
    let opts = AdmmOptions {
        max_iters: 20_000,
        ..AdmmOptions::default()
    };
    let s = solve(&p, &opts).unwrap();
    assert!(s.iterations > 0);
    // weak duality against the generator's decomposition, at solver accuracy
    assert!(s.objective_value <= tg.amp.norm() * (1.0 + 1e-3));
    assert!(dual_atomic_norm_check(&s.q, &op, 32).unwrap() <= 1.0 + 1e-2);
    let herm = (&s.big_q - s.big_q.adjoint()).norm();
    assert!(herm < 1e-10);
    let min = SymmetricEigen::new(s.big_q.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-8);
    if s.status == SolveStatus::Optimal {
        assert!(s.primal_residual.max(s.dual_residual) <= opts.tol);
    }
    // trace of the returned Q is the zero-offset constraint
    assert!((s.big_q.trace().re - 1.0).abs() < 1e-3);
    // identical inputs, identical result
    let s2 = solve(&p, &opts).unwrap();
    assert_eq!(s.q, s2.q);
    assert_eq!(s.iterations, s2.iterations);
}

#[test]
fn robust_sdr_with_loose_bounds_matches_clean() {
    let (op, y, _) = instance(2, 2, 1, 8);
    let opts = AdmmOptions {
        max_iters: 5_000,
        tol: 1e-7,
        ..AdmmOptions::default()
    };
    let clean = solve(&build_clean_sdr(&y, &op).unwrap(), &opts).unwrap();
    let robust = solve(&build_robust_sdr(&y, &op, 1e3, 0.0).unwrap(), &opts).unwrap();
    assert!((clean.objective_value - robust.objective_value).abs() < 1e-3 * clean.objective_value.abs().max(1.0));
    let noisy = solve(&build_noisy_sdr(&y, &op, 0.0).unwrap(), &opts).unwrap();
    assert!((clean.objective_value - noisy.objective_value).abs() < 1e-3 * clean.objective_value.abs().max(1.0));
    assert!(build_robust_sdr(&y, &op, 0.0, 0.0).is_err());
    assert!(build_robust_sdr(&y, &op, 1.0, -1.0).is_err());
    assert!(build_clean_sdr(&CVec::zeros(3), &op).is_err());
}

#[test]
fn robust_sdr_layout() {
    let (op, y, _) = instance(2, 2, 1, 9);
    let p = build_robust_sdr(&y, &op, 1.0, 0.1).unwrap();
    assert_eq!(p.psd_blocks(), vec![op.atom_len() + 1, op.n_rx + op.lbar()]);
    assert_eq!(p.layout.lambda, Some(1.0));
    assert_eq!(p.layout.delta2, 0.1);
}
