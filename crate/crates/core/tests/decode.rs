use lanm_core::decode::*;
use lanm_core::localize::TargetEstimate;
use lanm_core::model::*;
use lanm_core::{CVec, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Scene {
    op: MeasurementOperator,
    targets: Vec<TargetParams>,
    symbols: Vec<SymbolVector>,
}

fn scene(nt: usize, nr: usize, n: usize, t: usize, k: usize, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sc = SceneConfig {
        n_tx: nt,
        n_rx: nr,
        half_len: n,
        subspace_dim: t,
        n_targets: k,
        n_jammers: 0,
        rng_seed: seed,
    };
    let cod: Vec<_> = (0..nt).map(|_| CodingMatrix::gaussian(sc.lbar(), t, &mut rng)).collect();
    let op = build_operator(&sc, &cod, Flavor::PerAntennaCoded).unwrap();
    let targets = random_separated_targets(nt, k, 0.2, &mut rng).unwrap();
    let symbols = (0..k).map(|_| SymbolVector::random(t, Constellation::Qam16, &mut rng)).collect();
    Scene { op, targets, symbols }
}

fn estimates(targets: &[TargetParams]) -> Vec<TargetEstimate> {
    targets
        .iter()
        .map(|t| TargetEstimate {
            coords: t.coords(),
            peak_value: 1.0,
        })
        .collect()
}

#[test]
fn exact_locations_give_exact_gains() {
    let s = scene(3, 2, 2, 2, 2, 1);
    let y = s.op.forward(&lifted_signal(&s.op, &s.targets, &s.symbols).unwrap()).unwrap();
    let d = least_squares_decode(&y, &s.op, &estimates(&s.targets)).unwrap();
    assert!(d.residual < 1e-8);
    for (k, g) in d.g.iter().enumerate() {
        let want = &s.symbols[k].h * s.targets[k].amp;
        assert!((g - want).norm() < 1e-8);
    }
    // permuting the estimates permutes the gains
    let mut rev = estimates(&s.targets);
    rev.reverse();
    let d2 = least_squares_decode(&y, &s.op, &rev).unwrap();
    assert!((&d2.g[0] - &d.g[1]).norm() < 1e-10);
    // linearity
    let d3 = least_squares_decode(&(&y * C64::new(0.0, 3.0)), &s.op, &estimates(&s.targets)).unwrap();
    assert!((&d3.g[0] - &d.g[0] * C64::new(0.0, 3.0)).norm() < 1e-8);
    let d0 = least_squares_decode(&CVec::zeros(s.op.n_meas()), &s.op, &estimates(&s.targets)).unwrap();
    assert!(d0.g.iter().all(|g| g.norm() == 0.0));
}

#[test]
fn rank_deficiency_is_an_error() {
    let s = scene(2, 1, 1, 2, 1, 2);
    let y = CVec::zeros(s.op.n_meas());
    // L = 3 measurements, 4 unknowns
    let mut est = estimates(&s.targets);
    est.push(TargetEstimate {
        coords: [0.5, 0.5, 0.5, 0.25],
        peak_value: 1.0,
    });
    assert!(least_squares_decode(&y, &s.op, &est).is_err());
    // the same location twice
    let same = vec![est[0], est[0]];
    let s = scene(2, 2, 2, 1, 1, 3);
    assert!(least_squares_decode(&CVec::zeros(s.op.n_meas()), &s.op, &same).is_err());
}

#[test]
fn jammer_aware_decode() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = scene(2, 4, 2, 1, 1, 4);
    let lbar = s.op.lbar();
    let jm = JammerParams::random(lbar, 0.8, &mut rng);
    let sim = simulate(&s.op, &s.targets, &s.symbols, std::slice::from_ref(&jm), None, &mut rng).unwrap();
    let est = estimates(&s.targets);
    let d = joint_decode_with_jammer(&sim.y_observed, &s.op, &est, &[jm.psi]).unwrap();
    assert!(d.residual < 1e-6);
    assert!((&d.jammer_waveforms[0] - &jm.temporal * C64::from(0.8)).norm() < 1e-8);
    assert!((&d.g[0] - &s.symbols[0].h * s.targets[0].amp).norm() < 1e-8);
    // adding the true jammer column never increases the residual
    let without = least_squares_decode(&sim.y_observed, &s.op, &est).unwrap();
    assert!(d.residual <= without.residual + 1e-12);
    // jammer only
    let only = simulate(&s.op, &[], &[], std::slice::from_ref(&jm), None, &mut rng).unwrap();
    let d = joint_decode_with_jammer(&only.y_observed, &s.op, &[], &[jm.psi]).unwrap();
    assert!(d.g.is_empty());
    assert!((&d.jammer_waveforms[0] - &jm.temporal * C64::from(0.8)).norm() < 1e-10);
    // no jammer reduces to plain least squares
    let a = joint_decode_with_jammer(&sim.y_clean, &s.op, &est, &[]).unwrap();
    let b = least_squares_decode(&sim.y_clean, &s.op, &est).unwrap();
    assert_eq!(a, b);
}

#[test]
fn polish_recovers_perturbed_locations() {
    let s = scene(2, 2, 2, 1, 1, 5);
    let y = s.op.forward(&lifted_signal(&s.op, &s.targets, &s.symbols).unwrap()).unwrap();
    let mut c = s.targets[0].coords();
    c[0] += 0.004;
    c[1] -= 0.003;
    c[2] += 0.002;
    let before = least_squares_decode(&y, &s.op, &[TargetEstimate { coords: c, peak_value: 1.0 }])
        .unwrap()
        .residual;
    let p = polish(&y, &s.op, &[c], &[]).unwrap();
    assert!(p.residual <= before);
    assert!(p.residual < 1e-9 * y.norm());
    let err = coord_errors(p.coords[0], s.targets[0].coords(), 2);
    assert!(err.iter().all(|&e| e < 1e-8), "{err:?}");
}

#[test]
fn achievable_norms_of_16qam_pairs() {
    let v = achievable_norms(Constellation::Qam16, 2);
    let want = [2.0, 12f64.sqrt(), 20f64.sqrt(), 28f64.sqrt(), 6.0];
    assert_eq!(v.len(), want.len());
    for (a, b) in v.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    // the three values quoted for this case are all present
    for quoted in [2.0, 4.4721, 6.0] {
        assert!(v.iter().any(|x| (x - quoted).abs() < 1e-4));
    }
    assert_eq!(achievable_norms(Constellation::Qam4, 3), vec![6f64.sqrt()]);
    // brute force over all 16² tuples
    let pts = Constellation::Qam16.points();
    let mut brute: Vec<f64> = Vec::new();
    for a in &pts {
        for b in &pts {
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            if !brute.iter().any(|x| (x - n).abs() < 1e-12) {
                brute.push(n);
            }
        }
    }
    brute.sort_by(f64::total_cmp);
    assert_eq!(brute.len(), v.len());
}

#[test]
fn snap_recovers_scaled_and_rotated_symbols() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for cons in [Constellation::Qam4, Constellation::Qam16] {
        for t in 1..4 {
            let s = SymbolVector::random(t, cons, &mut rng);
            let g = &s.h * C64::from(2.7);
            let m = snap_to_constellation(&g, cons).unwrap();
            if cons == Constellation::Qam4 {
                // exact up to a quarter turn; 16-QAM tuples can be ring ambiguous
                let r = C64::new(0.0, 1.0);
                assert!((0..4).any(|k| {
                    m.symbols_hat.iter().zip(&s.symbols).all(|(a, b)| (a * r.powi(k) - b).norm() < 1e-9)
                }));
                assert!(m.snap_distance < 1e-12);
            }
            let rot = snap_to_constellation(&(&g * C64::new(0.0, 1.0)), cons).unwrap();
            assert!((rot.snap_distance - m.snap_distance).abs() < 1e-9);
            // amp_hat · h_hat reproduces g
            assert!((&m.h_hat * m.amp_hat - &g).norm() < 1e-12);
            // idempotent on its own output
            let again = snap_to_constellation(
                &(CVec::from_vec(m.symbols_hat.clone()) * C64::from(0.3)),
                cons,
            )
            .unwrap();
            assert_eq!(again.symbols_hat.len(), m.symbols_hat.len());
            assert!(again.snap_distance < 1e-12);
        }
    }
    assert!(snap_to_constellation(&CVec::zeros(2), Constellation::Qam4).is_err());
}

#[test]
fn snap_exact_4qam_tuple() {
    let sym = vec![C64::new(1.0, 1.0), C64::new(-1.0, 1.0), C64::new(1.0, -1.0)];
    let v = CVec::from_vec(sym.clone());
    let g = &v / C64::from(v.norm()) * C64::from(0.25);
    let m = snap_to_constellation(&g, Constellation::Qam4).unwrap();
    assert!(m.snap_distance < 1e-20);
    assert!((m.scale_used - 6f64.sqrt()).abs() < 1e-12);
    let r = C64::new(0.0, 1.0);
    assert!((0..4).any(|k| m.symbols_hat.iter().zip(&sym).all(|(a, b)| (a * r.powi(k) - b).norm() < 1e-12)));
}
