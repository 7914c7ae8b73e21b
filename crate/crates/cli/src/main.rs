mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use config::ConfigFile;
use lanm_core::bench::{
    complexity_report, generate, recover, run_cell, run_trial, CellSummary, Estimator, Instance, TrialResult,
    TrialSettings,
};
use lanm_core::certify::{build_certificate, kernel_len_for, verify_certificate, KernelSource};
use lanm_core::decode::snap_to_constellation;
use lanm_core::localize::{DualPolynomial, JammerPolynomial};
use lanm_core::solver::{build_clean_sdr, build_noisy_sdr, build_robust_sdr, solve};
use lanm_core::{CVec, C64};
use output::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lanm", version, about = "Blind ISAC receiver via lifted atomic norm minimization")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML scene/sweep config
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// ADMM relative residual tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// initial ADMM penalty
    #[arg(long)]
    rho: Option<f64>,
    /// localization grid points per axis (ℓ1 dictionary points per axis
    /// for `--estimator l1`)
    #[arg(long)]
    grid_res: Option<usize>,
    #[arg(long, value_parser = parse_estimator)]
    estimator: Option<Estimator>,
    /// jammer dual bound; enables the robust SDR
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    snr_db: Option<f64>,
    /// read the scene from a `simulate` output instead of generating it
    #[arg(long)]
    instance: Option<PathBuf>,
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.parse().map_err(|e: lanm_core::Error| e.to_string())
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a scene and its echo; writes instance.json
    Simulate(Common),
    /// Solve the dual SDR; writes solution.json
    Solve(Common),
    /// Solve and read targets off the dual polynomial; writes estimates.json
    /// and grids/*.csv
    Localize(Common),
    /// Full pipeline with symbol decoding; writes decoded.json
    Decode(Common),
    /// Kernel dual certificate for the true targets; writes certificate.json
    Certify(Common),
    /// One trial of a reference estimator; writes results.csv and trials.json
    Baseline(Common),
    /// Monte Carlo sweep; writes results.csv and trials.json, resuming
    /// completed cells
    Sweep(Common),
    /// Problem-size counts and measured ADMM cost; writes complexity.json
    Complexity(Common),
}

struct Ctx {
    common: Common,
    file: ConfigFile,
    settings: TrialSettings,
    seed: u64,
}

impl Ctx {
    fn new(common: Common) -> Res<Self> {
        let mut file = match &common.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        if let Some(s) = common.seed {
            file.seed = Some(s);
        }
        if let Some(s) = common.snr_db {
            file.snr_db = Some(s);
        }
        if let Some(l) = common.lambda {
            file.lambda = Some(l);
        }
        if let Some(e) = common.estimator {
            file.estimator = Some(e);
        }
        let mut settings = file.settings();
        let a = &mut settings.recover.admm;
        if let Some(t) = common.tol {
            a.tol = t;
        }
        if let Some(m) = common.max_iters {
            a.max_iters = m;
        }
        if let Some(r) = common.rho {
            a.rho = r;
        }
        if let Some(r) = common.grid_res {
            if settings.estimator == Estimator::L1 {
                settings.l1.res = [r; 4];
            } else {
                let mut lo = lanm_core::localize::LocalizeOptions::for_scene(settings.scene.n_tx, settings.scene.n_rx);
                lo.res = [r; 4];
                settings.recover.localize = Some(lo);
            }
        }
        let seed = file.seed();
        Ok(Ctx {
            common,
            file,
            settings,
            seed,
        })
    }

    fn instance(&self) -> Res<(Instance, TrialSettings)> {
        match &self.common.instance {
            Some(p) => {
                let f: InstanceFile = read_json(p)?;
                let (inst, mut s, _) = f.into_instance()?;
                // solver-side flags still apply to a loaded scene
                s.recover = self.settings.recover.clone();
                s.l1 = self.settings.l1.clone();
                s.estimator = self.settings.estimator;
                Ok((inst, s))
            }
            None => Ok((
                generate(&self.settings, self.seed).map_err(|e| e.to_string())?,
                self.settings.clone(),
            )),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.common.out.join(name)
    }

    fn delta2(&self, inst: &Instance, s: &TrialSettings) -> f64 {
        if s.snr_db.is_some() && s.recover.delta2 == 0.0 {
            inst.noise_norm
        } else {
            s.recover.delta2
        }
    }
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    schema_version: u32,
    status: String,
    iterations: usize,
    primal_residual: f64,
    dual_residual: f64,
    objective: f64,
    #[serde(serialize_with = "ser_cvec")]
    q: &'a CVec,
}

fn ser_cvec<S: serde::Serializer>(v: &&CVec, s: S) -> Result<S::Ok, S::Error> {
    lanm_core::cx::dvec::serialize(v, s)
}

fn cmd_simulate(ctx: &Ctx) -> Res<()> {
    let inst = generate(&ctx.settings, ctx.seed).map_err(|e| e.to_string())?;
    write_json(&ctx.path("instance.json"), &InstanceFile::from_instance(&inst, &ctx.settings, ctx.seed))?;
    println!(
        "simulated {} targets, {} measurements -> {}",
        inst.targets.len(),
        inst.op.n_meas(),
        ctx.path("instance.json").display()
    );
    Ok(())
}

fn cmd_solve(ctx: &Ctx) -> Res<()> {
    let (inst, s) = ctx.instance()?;
    let y = &inst.sim.y_observed;
    let d2 = ctx.delta2(&inst, &s);
    let problem = match s.recover.lambda {
        Some(l) => build_robust_sdr(y, &inst.op, l, d2),
        None if d2 > 0.0 => build_noisy_sdr(y, &inst.op, d2),
        None => build_clean_sdr(y, &inst.op),
    }
    .map_err(|e| e.to_string())?;
    let sol = solve(&problem, &s.recover.admm).map_err(|e| e.to_string())?;
    write_json(
        &ctx.path("solution.json"),
        &SolutionFile {
            schema_version: SCHEMA_VERSION,
            status: format!("{:?}", sol.status),
            iterations: sol.iterations,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            objective: sol.objective_value,
            q: &sol.q,
        },
    )?;
    println!(
        "{:?} after {} iterations, objective {:.6}",
        sol.status, sol.iterations, sol.objective_value
    );
    Ok(())
}

#[derive(Serialize)]
struct EstimateOut {
    coords: [f64; 4],
    peak_value: f64,
    #[serde(with = "lanm_core::cx::dvec")]
    gain: CVec,
}

#[derive(Serialize)]
struct EstimatesFile {
    schema_version: u32,
    grid_max: f64,
    status: String,
    estimates: Vec<EstimateOut>,
    jammer_psi: Vec<f64>,
}

const SLICE_RES: usize = 64;

fn cmd_localize(ctx: &Ctx, decode: bool) -> Res<()> {
    let (inst, mut s) = ctx.instance()?;
    s.recover.delta2 = ctx.delta2(&inst, &s);
    let rec = recover(&inst.sim.y_observed, &inst.op, &s.recover).map_err(|e| e.to_string())?;
    let poly = DualPolynomial::new(&rec.solution.q, &inst.op).map_err(|e| e.to_string())?;
    let center = rec.coords.first().copied().unwrap_or([0.0; 4]);
    write_slice_csv(&ctx.path("grids/tau_dopp.csv"), &poly, center, (0, 1), SLICE_RES)?;
    write_slice_csv(&ctx.path("grids/aod_aoa.csv"), &poly, center, (2, 3), SLICE_RES)?;
    if let Some(l) = s.recover.lambda {
        let jp = JammerPolynomial::new(&rec.solution.q, inst.op.n_rx, inst.op.lbar()).map_err(|e| e.to_string())?;
        write_jammer_csv(&ctx.path("grids/jammer.csv"), &jp.grid(1024).map_err(|e| e.to_string())?, l)?;
    }
    let estimates: Vec<EstimateOut> = rec
        .coords
        .iter()
        .zip(&rec.gains)
        .map(|(c, g)| EstimateOut {
            coords: *c,
            peak_value: poly.norm_at(*c),
            gain: g.clone(),
        })
        .collect();
    for e in &estimates {
        println!("target at {:?}, ‖f‖ = {:.6}", e.coords, e.peak_value);
    }
    if decode {
        let msgs = rec
            .gains
            .iter()
            .map(|g| snap_to_constellation(g, s.constellation).map_err(|e| e.to_string()))
            .collect::<Res<Vec<_>>>()?;
        for m in &msgs {
            let syms: Vec<String> = m.symbols_hat.iter().map(|z| format!("{}{:+}i", z.re, z.im)).collect();
            println!("symbols [{}], scale {:.4}", syms.join(", "), m.scale_used);
        }
        write_json(&ctx.path("decoded.json"), &msgs)?;
    }
    write_json(
        &ctx.path("estimates.json"),
        &EstimatesFile {
            schema_version: SCHEMA_VERSION,
            grid_max: rec.grid_max,
            status: format!("{:?}", rec.solution.status),
            estimates,
            jammer_psi: rec.jammer_psi,
        },
    )
}

#[derive(Serialize)]
struct CertificateOut {
    schema_version: u32,
    kernel: &'static str,
    l_kernel: usize,
    kappa: f64,
    i_minus_phi: f64,
    phi_norm: f64,
    phi_inv_norm: f64,
    interpolation_residual: f64,
    derivative_residual: f64,
    report: lanm_core::certify::CertificateReport,
}

const CERT_GRID: usize = 16;

fn cmd_certify(ctx: &Ctx) -> Res<()> {
    let (inst, _) = ctx.instance()?;
    let l_kernel = kernel_len_for(inst.op.half_len).max(2);
    let coords: Vec<[f64; 4]> = inst.targets.iter().map(|t| t.coords()).collect();
    let signs: Vec<C64> = inst.targets.iter().map(|t| t.amp / t.amp.norm()).collect();
    let h: Vec<CVec> = inst.symbols.iter().map(|s| s.h.clone()).collect();
    let t = inst.op.subspace_dim;
    let mut out = Vec::new();
    for (name, src) in [
        ("expectation", KernelSource::Expectation { t }),
        ("randomized", KernelSource::Randomized(inst.codings[0].clone())),
    ] {
        let sys = build_certificate(&coords, &signs, &h, src, l_kernel).map_err(|e| e.to_string())?;
        let report = verify_certificate(&sys, ctx.common.grid_res.unwrap_or(CERT_GRID)).map_err(|e| e.to_string())?;
        let (a, b, c) = sys.phi_bounds();
        println!(
            "{name}: ‖I−Φ‖ = {a:.4}, off-support max {:.4}, pass {}",
            report.max_offsupport_norm, report.pass
        );
        out.push(CertificateOut {
            schema_version: SCHEMA_VERSION,
            kernel: name,
            l_kernel,
            kappa: sys.kappa,
            i_minus_phi: a,
            phi_norm: b,
            phi_inv_norm: c,
            interpolation_residual: sys.interpolation_residual,
            derivative_residual: sys.derivative_residual,
            report,
        });
    }
    write_json(&ctx.path("certificate.json"), &out)
}

fn write_trials(ctx: &Ctx, cells: &[CellSummary], trials: &[TrialResult]) -> Res<()> {
    write_results_csv(&ctx.path("results.csv"), cells)?;
    write_json(
        &ctx.path("trials.json"),
        &TrialsFile {
            schema_version: SCHEMA_VERSION,
            master_seed: ctx.seed,
            written_unix_s: now_unix(),
            trials: trials.to_vec(),
        },
    )
}

fn print_trial(r: &TrialResult) {
    match &r.error {
        Some(e) => println!("trial {} failed: {e}", r.trial),
        None => println!(
            "trial {}: nmse {:.3e}, ser {}, success {}, {:.1}s",
            r.trial,
            r.nmse,
            r.ser.map_or_else(|| "-".to_string(), |s| format!("{s:.3}")),
            r.success,
            r.runtime_s
        ),
    }
}

fn cmd_baseline(ctx: &Ctx) -> Res<()> {
    if ctx.common.instance.is_some() {
        return Err("baseline regenerates its scene from --config/--seed".into());
    }
    let mut s = ctx.settings.clone();
    if ctx.common.estimator.is_none() && ctx.file.estimator.is_none() {
        s.estimator = Estimator::PilotAnm;
    }
    let spec = ctx.file.sweep(s, 1);
    let cell = spec.cells().remove(0);
    let r = run_trial(&spec.settings_for(&cell), ctx.seed, 0, 0);
    print_trial(&r);
    let summary = CellSummary::new(&cell, std::slice::from_ref(&r));
    write_trials(ctx, &[summary], &[r])
}

fn cmd_sweep(ctx: &Ctx) -> Res<()> {
    let spec = ctx.file.sweep(ctx.settings.clone(), ctx.common.workers.max(1));
    spec.validate().map_err(|e| e.to_string())?;
    let prev = ctx.path("trials.json");
    let mut done: BTreeMap<usize, Vec<TrialResult>> = BTreeMap::new();
    if prev.exists() {
        let f: TrialsFile = read_json(&prev)?;
        if f.master_seed == ctx.seed {
            for t in f.trials {
                done.entry(t.cell).or_default().push(t);
            }
        }
    }
    let cells = spec.cells();
    let mut summaries = Vec::new();
    let mut all = Vec::new();
    for cell in &cells {
        let settings = spec.settings_for(cell);
        let reuse = done
            .get(&cell.index)
            .filter(|v| v.len() == spec.trials && v.iter().all(|t| t.settings == settings));
        let trials = match reuse {
            Some(v) => {
                println!("cell {}: reusing {} trials", cell.index, v.len());
                v.clone()
            }
            None => {
                let v = run_cell(&spec, cell).map_err(|e| e.to_string())?;
                v.iter().for_each(print_trial);
                v
            }
        };
        summaries.push(CellSummary::new(cell, &trials));
        all.extend(trials);
        // checkpoint after every cell
        write_trials(ctx, &summaries, &all)?;
    }
    for c in &summaries {
        println!(
            "cell {} (snr {:?}, K {}, T {}, N {}): nmse {:.3e}, success {:.2}",
            c.cell.index, c.cell.snr_db, c.cell.n_targets, c.cell.subspace_dim, c.cell.half_len, c.mean_nmse, c.success_rate
        );
    }
    Ok(())
}

fn cmd_complexity(ctx: &Ctx) -> Res<()> {
    let iters = ctx.common.max_iters.unwrap_or(20);
    let rep = complexity_report(&ctx.settings.scene, iters).map_err(|e| e.to_string())?;
    println!(
        "variables {}, constraints {}, (4N²NtNr)⁵ = {:.3e}, PSD side {}, {:.3e} s/iteration",
        rep.variables,
        rep.constraints,
        rep.asymptotic_estimate,
        rep.psd_dim,
        rep.measured_seconds_per_iteration.unwrap_or(f64::NAN)
    );
    write_json(&ctx.path("complexity.json"), &rep)
}

fn run(cli: Cli) -> Res<()> {
    let (common, which) = match cli.cmd {
        Cmd::Simulate(c) => (c, "simulate"),
        Cmd::Solve(c) => (c, "solve"),
        Cmd::Localize(c) => (c, "localize"),
        Cmd::Decode(c) => (c, "decode"),
        Cmd::Certify(c) => (c, "certify"),
        Cmd::Baseline(c) => (c, "baseline"),
        Cmd::Sweep(c) => (c, "sweep"),
        Cmd::Complexity(c) => (c, "complexity"),
    };
    let ctx = Ctx::new(common)?;
    std::fs::create_dir_all(&ctx.common.out).map_err(|e| format!("{}: {e}", ctx.common.out.display()))?;
    match which {
        "simulate" => cmd_simulate(&ctx),
        "solve" => cmd_solve(&ctx),
        "localize" => cmd_localize(&ctx, false),
        "decode" => cmd_localize(&ctx, true),
        "certify" => cmd_certify(&ctx),
        "baseline" => cmd_baseline(&ctx),
        "sweep" => cmd_sweep(&ctx),
        _ => cmd_complexity(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
