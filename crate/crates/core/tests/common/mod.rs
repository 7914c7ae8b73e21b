//! Independent oracles shared by the test targets.
#![allow(dead_code)]

use lanm_core::model::*;
use lanm_core::{CVec, C64};
use std::f64::consts::PI;

pub fn rel(a: &CVec, b: &CVec) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Echo of one target computed sample by sample: the coded waveform of each
/// transmit antenna is delayed by band-limited (DFT) interpolation, Doppler
/// shifted and weighted by the spatial phases. No Dirichlet kernel involved.
pub fn time_domain_echo(
    sc: &SceneConfig,
    codings: &[CodingMatrix],
    target: &TargetParams,
    h: &CVec,
) -> CVec {
    let n = sc.half_len as i64;
    let lbar = sc.lbar();
    let lf = lbar as f64;
    let mut y = CVec::zeros(sc.n_meas());
    for s in 0..sc.n_tx {
        let d = &codings[if codings.len() == 1 { 0 } else { s }].entries;
        // x[i] for sample i in -N..=N
        let x: Vec<C64> = (-n..=n)
            .map(|i| (0..sc.subspace_dim).map(|t| d[((i + n) as usize, t)] * h[t]).sum())
            .collect();
        let spectrum: Vec<C64> = (-n..=n)
            .map(|k| {
                (-n..=n)
                    .map(|i| x[(i + n) as usize] * C64::from_polar(1.0, -2.0 * PI * (k * i) as f64 / lf))
                    .sum()
            })
            .collect();
        for rt in 0..sc.n_rx {
            let spatial = C64::from_polar(
                1.0,
                -2.0 * PI * (rt as f64 * sc.n_tx as f64 * target.aoa + s as f64 * target.aod),
            );
            for p in -n..=n {
                let delayed: C64 = (-n..=n)
                    .map(|k| {
                        spectrum[(k + n) as usize]
                            * C64::from_polar(1.0, 2.0 * PI * k as f64 * (p as f64 / lf - target.tau))
                    })
                    .sum::<C64>()
                    / lf;
                let doppler = C64::from_polar(1.0, 2.0 * PI * target.dopp * p as f64);
                y[rt * lbar + (p + n) as usize] += target.amp * spatial * doppler * delayed;
            }
        }
    }
    y
}

