//! Subcommand implementations. Each returns the files it wrote.

use std::path::{Path, PathBuf};

use cpk_core::analysis::{bin_timetags, correct_for_path, fit_geometric, train_statistics, PathEfficiency, TimeTagSet};
use cpk_core::atomic::SchemeRates;
use cpk_core::bounds::{BoundVariant, OperatingPoint};
use cpk_core::consts::{ppm, to_khz, to_mhz, to_ppm};
use cpk_core::design::{self, evaluate_future, scheme_ladder, sweep_t2, DesignPoint, FutureSystem, Grid};
use cpk_core::linalg::CMat;
use cpk_core::sim::{build_system, evolve, reduced_model_evolve, simulate_entanglement, DriveGeometry, ReducedRates, SystemModel};
use cpk_core::synthetic::{bernoulli_trains, poisson_counts, train_slots, wavepacket_tags};
use cpk_core::tomography::{
    background_fidelity_limit, bootstrap_sample, metrics, reconstruct, summarize_bootstrap, target_state, CountTable,
};
use cpk_core::C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::GlobalConfig;
use crate::io::{read_counts, read_timetags, write_counts, write_json, write_table, write_timetags};
use crate::{CliError, Command, GridArg, SimulateArgs, TomoArgs, TrainArgs, WavepacketArgs};

pub fn dispatch(command: &Command, cfg: &GlobalConfig, out: &Path) -> Result<(&'static str, Vec<PathBuf>), CliError> {
    Ok(match command {
        Command::Bounds => ("bounds", bounds(cfg, out)?),
        Command::SweepT2 { min_ppm, max_ppm, points, grid } => ("sweep-t2", sweep(cfg, out, *min_ppm, *max_ppm, *points, *grid)?),
        Command::Schemes => ("schemes", schemes(cfg, out)?),
        Command::Future => ("future", future(cfg, out)?),
        Command::Simulate(a) => ("simulate", simulate(cfg, out, a)?),
        Command::Tomo(a) => ("tomo", tomo(cfg, out, a)?),
        Command::Train(a) => ("train", train(cfg, out, a)?),
        Command::Wavepacket(a) => ("wavepacket", wavepacket(cfg, out, a)?),
    })
}

fn operating_point(cfg: &GlobalConfig) -> Result<OperatingPoint, CliError> {
    let em = cfg.emitter_model()?;
    Ok(OperatingPoint::new(SchemeRates::v_photon(&em), &cfg.cavity_model()?, cfg.cavity.n_ions))
}

/// Worker pool capped by `CPK_THREADS`; results never depend on the thread count.
fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("CPK_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| CliError::Validation(format!("CPK_THREADS=`{v}` is not a positive integer")))?;
        if n == 0 {
            return Err(CliError::Validation("CPK_THREADS must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Computation(e.to_string()))
}

#[derive(Serialize)]
struct BoundsReport {
    p_bound: f64,
    p_pure: f64,
    pure_fraction: f64,
    p_in: f64,
    p_esc: f64,
    cooperativity: f64,
    g_mhz: f64,
    kappa_khz: f64,
    kappa_ext_khz: f64,
    gamma_mhz: f64,
    finesse: f64,
    waist_um: f64,
    fsr_mhz: f64,
    a_tilde: f64,
    alpha_ppm: f64,
    t2_ppm: f64,
    beta: f64,
    t2_opt_ppm: f64,
    p_opt: f64,
    t2_opt_pure_ppm: f64,
    p_opt_pure: f64,
}

fn bounds(cfg: &GlobalConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let cav = cfg.cavity_model()?;
    let point = operating_point(cfg)?;
    let r = design::evaluate(&point)?;
    let ctx = cpk_core::cavity::CouplingContext::new(&cav, &point.scheme, point.n_ions)?;
    let report = BoundsReport {
        p_bound: r.p_bound,
        p_pure: r.p_pure,
        pure_fraction: r.pure_fraction,
        p_in: r.p_in,
        p_esc: r.p_esc,
        cooperativity: r.c,
        g_mhz: to_mhz(ctx.g),
        kappa_khz: to_khz(cav.rates.kappa),
        kappa_ext_khz: to_khz(cav.rates.kappa_ext),
        gamma_mhz: to_mhz(point.scheme.gamma_total()),
        finesse: cav.rates.finesse,
        waist_um: cav.derived.w0 * 1e6,
        fsr_mhz: cav.derived.fsr / 1e6,
        a_tilde: point.a_tilde,
        alpha_ppm: to_ppm(point.alpha_loss),
        t2_ppm: to_ppm(point.t2),
        beta: point.beta(BoundVariant::Full),
        t2_opt_ppm: to_ppm(point.t2_optimal(BoundVariant::Full)),
        p_opt: point.p_opt(BoundVariant::Full),
        t2_opt_pure_ppm: to_ppm(point.t2_optimal(BoundVariant::Pure)),
        p_opt_pure: point.p_opt(BoundVariant::Pure),
    };
    let path = out.join("bounds.json");
    write_json(&path, &report)?;
    Ok(vec![path])
}

fn sweep(cfg: &GlobalConfig, out: &Path, min_ppm: f64, max_ppm: f64, points: usize, grid: GridArg) -> Result<Vec<PathBuf>, CliError> {
    let kind = match grid {
        GridArg::Linear => Grid::Linear,
        GridArg::Log => Grid::Log,
    };
    let curve = sweep_t2(&operating_point(cfg)?, ppm(min_ppm), ppm(max_ppm), points, kind)?;
    let path = out.join("sweep_t2.csv");
    write_table(
        &path,
        &["t2_ppm", "p_bound", "p_pure", "pure_fraction", "p_in", "p_esc"],
        curve.points.iter().map(|p| vec![to_ppm(p.x), p.p_bound, p.p_pure, p.pure_fraction(), p.p_in, p.p_esc]),
    )?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct DesignReport {
    label: String,
    p_bound: f64,
    p_pure: f64,
    pure_fraction: f64,
    p_in: f64,
    p_esc: f64,
    cooperativity: f64,
    beta: f64,
    t2_ppm: f64,
    alpha_ppm: f64,
    a_tilde: f64,
    n_ions: u32,
}

impl From<&DesignPoint> for DesignReport {
    fn from(d: &DesignPoint) -> Self {
        let r = &d.results;
        DesignReport {
            label: d.label.clone(),
            p_bound: r.p_bound,
            p_pure: r.p_pure,
            pure_fraction: r.pure_fraction,
            p_in: r.p_in,
            p_esc: r.p_esc,
            cooperativity: r.c,
            beta: d.point.beta(BoundVariant::Full),
            t2_ppm: to_ppm(d.point.t2),
            alpha_ppm: to_ppm(d.point.alpha_loss),
            a_tilde: d.point.a_tilde,
            n_ions: d.point.n_ions,
        }
    }
}

fn schemes(cfg: &GlobalConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let ladder: Vec<DesignReport> = scheme_ladder(&operating_point(cfg)?)?.iter().map(DesignReport::from).collect();
    let path = out.join("schemes.json");
    write_json(&path, &ladder)?;
    Ok(vec![path])
}

fn future(cfg: &GlobalConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let cav = cfg.cavity_model()?;
    let scheme = SchemeRates::v_photon(&cfg.emitter_model()?);
    let systems = FutureSystem::ALL.iter().map(|&s| evaluate_future(&cav, scheme, s).map(|d| DesignReport::from(&d))).collect::<Result<Vec<_>, _>>()?;
    let path = out.join("future.json");
    write_json(&path, &systems)?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct SimulateReport {
    rabi_mhz: f64,
    rabi2_mhz: Option<f64>,
    detuning_mhz: f64,
    p_s: f64,
    p_s_h: f64,
    p_s_v: f64,
    p_loss: f64,
    escape_ratio: f64,
    wavepacket_duration_us: f64,
    trace_drift_max: f64,
    min_eigenvalue: f64,
    reexcitation_fraction: Option<f64>,
    hilbert_dim: usize,
    support_size: usize,
    bin_us: f64,
    entanglement: Option<EntanglementReport>,
}

#[derive(Serialize)]
struct EntanglementReport {
    fidelity: f64,
    theta: f64,
    p_h: f64,
    p_v: f64,
    rho_real: Vec<Vec<f64>>,
    rho_imag: Vec<Vec<f64>>,
}

fn split_matrix(m: &CMat) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = m.dim();
    let re = (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect();
    let im = (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect();
    (re, im)
}

fn system(cfg: &GlobalConfig) -> Result<SystemModel, CliError> {
    Ok(build_system(&cfg.emitter_model()?, &cfg.cavity_model()?, DriveGeometry::default(), cfg.build_options())?)
}

fn simulate(cfg: &GlobalConfig, out: &Path, args: &SimulateArgs) -> Result<Vec<PathBuf>, CliError> {
    let model = system(cfg)?;
    let drive = cfg.drive_config(&model);
    let mut opts = cfg.evolve_options();
    opts.estimate_reexcitation = args.reexcitation;
    let (sim, entanglement) = if drive.components.len() == 2 {
        let e = simulate_entanglement(&model, &drive, &opts)?;
        let (rho_real, rho_imag) = split_matrix(&e.joint_state);
        let report = EntanglementReport { fidelity: e.fidelity, theta: e.theta, p_h: e.p_h, p_v: e.p_v, rho_real, rho_imag };
        (e.sim, Some(report))
    } else {
        (evolve(&model, &drive, &opts)?, None)
    };
    let csv_path = out.join(&args.output);
    let cum = sim.cumulative_p_s();
    write_table(
        &csv_path,
        &["t_us", "flux_H_per_s", "flux_V_per_s", "cum_P_S"],
        (0..sim.times.len()).map(|k| vec![sim.times[k] * 1e6, sim.flux_h[k], sim.flux_v[k], cum[k]]),
    )?;
    let report = SimulateReport {
        rabi_mhz: cfg.drive.rabi_mhz,
        rabi2_mhz: cfg.drive.rabi2_mhz,
        detuning_mhz: cfg.drive.detuning_mhz,
        p_s: sim.p_s,
        p_s_h: sim.p_s_h,
        p_s_v: sim.p_s_v,
        p_loss: sim.p_loss,
        escape_ratio: sim.escape_ratio(),
        wavepacket_duration_us: sim.wavepacket_duration() * 1e6,
        trace_drift_max: sim.trace_drift_max,
        min_eigenvalue: sim.min_eigenvalue,
        reexcitation_fraction: sim.reexcitation_fraction,
        hilbert_dim: sim.dim,
        support_size: sim.support_size,
        bin_us: sim.sample_dt * 1e6,
        entanglement,
    };
    let json_path = out.join("simulate.json");
    write_json(&json_path, &report)?;
    Ok(vec![csv_path, json_path])
}

#[derive(Serialize)]
struct TomoReport {
    fidelity: f64,
    fidelity_err: f64,
    purity: f64,
    purity_err: f64,
    theta: f64,
    theta_err: f64,
    bound_gap: f64,
    converged: bool,
    iterations: usize,
    resamples: usize,
    failed_resamples: usize,
    low_confidence: bool,
    background_fidelity_limit: Option<f64>,
    rho_real: Vec<Vec<f64>>,
    rho_imag: Vec<Vec<f64>>,
}

fn tomo(cfg: &GlobalConfig, out: &Path, args: &TomoArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let counts: CountTable = match (&args.counts, args.synthetic_events) {
        (Some(p), _) => read_counts(p)?,
        (None, Some(events)) => {
            let w = args.synthetic_noise;
            if !(0.0..=1.0).contains(&w) {
                return Err(CliError::Validation("--synthetic-noise must lie in [0, 1]".into()));
            }
            let rho = CMat::outer(&target_state(args.synthetic_theta))
                .scale(C64::new(1.0 - w, 0.0))
                .add(&CMat::identity(4).scale(C64::new(w / 4.0, 0.0)));
            let table = poisson_counts(&rho, events, cfg.seed)?;
            let path = out.join("counts.csv");
            write_counts(&path, &table)?;
            written.push(path);
            table
        }
        (None, None) => return Err(CliError::Usage("tomo needs --counts <csv> or --synthetic-events <n>".into())),
    };
    let rec = reconstruct(&counts)?;
    let central = metrics(&rec.state, args.theta);
    let m = cfg.analysis.bootstrap_m as u64;
    let seed = cfg.seed;
    let samples: Vec<_> = thread_pool()?.install(|| (0..m).into_par_iter().map(|i| bootstrap_sample(&counts, seed, i, args.theta)).collect());
    let boot = summarize_bootstrap(central, &samples)?;
    let limit = match args.signal_per_attempt {
        Some(s) => Some(background_fidelity_limit(s, cfg.analysis.background_rate_per_s, cfg.analysis.background_window_us * 1e-6)?),
        None => None,
    };
    let (rho_real, rho_imag) = split_matrix(&rec.state);
    let report = TomoReport {
        fidelity: central.fidelity,
        fidelity_err: boot.fidelity_std,
        purity: central.purity,
        purity_err: boot.purity_std,
        theta: central.theta,
        theta_err: boot.theta_std,
        bound_gap: central.bound_gap,
        converged: rec.converged,
        iterations: rec.iterations,
        resamples: boot.resamples,
        failed_resamples: boot.failed,
        low_confidence: boot.low_confidence,
        background_fidelity_limit: limit,
        rho_real,
        rho_imag,
    };
    let path = out.join("tomo.json");
    write_json(&path, &report)?;
    written.push(path);
    Ok(written)
}

#[derive(Serialize)]
struct TrainReport {
    p_slot: Vec<f64>,
    p_consec: Vec<f64>,
    fit_p: f64,
    fit_p_err: f64,
    mean_p_slot: f64,
    attempts: u64,
    chi2: f64,
    dof: usize,
    slot_chi2: Option<f64>,
    non_geometric: bool,
}

fn train(cfg: &GlobalConfig, out: &Path, args: &TrainArgs) -> Result<Vec<PathBuf>, CliError> {
    let a = &cfg.analysis;
    let slots = train_slots(a.n_slots, a.slot_len_us, a.slot_gap_us);
    let mut written = Vec::new();
    let set = match (&args.tags, args.synthetic_attempts) {
        (Some(p), _) => {
            let mut set = read_timetags(p, args.attempts)?;
            set.slots = slots;
            set
        }
        (None, Some(k)) => {
            if !(0.0..=1.0).contains(&args.synthetic_p) {
                return Err(CliError::Validation("--synthetic-p must lie in [0, 1]".into()));
            }
            let set = bernoulli_trains(&vec![args.synthetic_p; a.n_slots], k, &slots, cfg.seed)?;
            if args.write_tags {
                let path = out.join("train_tags.csv");
                write_timetags(&path, &set)?;
                written.push(path);
            }
            set
        }
        (None, None) => return Err(CliError::Usage("train needs --tags <csv> or --synthetic-attempts <k>".into())),
    };
    let stats = train_statistics(&set)?;
    let fit = fit_geometric(&stats)?;
    let report = TrainReport {
        mean_p_slot: stats.mean_slot_probability(),
        p_slot: stats.p_slot,
        p_consec: stats.p_consec,
        fit_p: fit.p,
        fit_p_err: fit.stderr,
        attempts: stats.attempts,
        chi2: fit.chi2,
        dof: fit.dof,
        slot_chi2: fit.slot_chi2,
        non_geometric: fit.non_geometric,
    };
    let path = out.join("train.json");
    write_json(&path, &report)?;
    written.push(path);
    Ok(written)
}

#[derive(Serialize)]
struct EfficiencyReport {
    attempts: u64,
    detections: u64,
    multi_detection_attempts: usize,
    bin_us: f64,
    p_tot: f64,
    p_tot_err: f64,
    p_path: f64,
    p_path_err: f64,
    p_s: f64,
    p_s_err: f64,
    warning: Option<String>,
}

/// Detection times drawn from the reduced-model output flux.
fn synthetic_wavepacket(cfg: &GlobalConfig, attempts: u64, path: &PathEfficiency) -> Result<TimeTagSet, CliError> {
    let model = system(cfg)?;
    let drive = cfg.drive_config(&model);
    let rates = ReducedRates::from_model(&model, &drive)?;
    let sim = reduced_model_evolve(&rates, &cfg.evolve_options())?.sim;
    let t_us: Vec<f64> = sim.times.iter().map(|t| t * 1e6).collect();
    Ok(wavepacket_tags(&t_us, &sim.flux_v, sim.p_s * path.p_path(), attempts, cfg.seed)?)
}

fn wavepacket(cfg: &GlobalConfig, out: &Path, args: &WavepacketArgs) -> Result<Vec<PathBuf>, CliError> {
    let path = cfg.path_efficiency();
    let mut written = Vec::new();
    let set = match (&args.tags, args.synthetic_attempts) {
        (Some(p), _) => read_timetags(p, args.attempts)?,
        (None, Some(k)) => {
            let set = synthetic_wavepacket(cfg, k, &path)?;
            if args.write_tags {
                let p = out.join("wavepacket_tags.csv");
                write_timetags(&p, &set)?;
                written.push(p);
            }
            set
        }
        (None, None) => return Err(CliError::Usage("wavepacket needs --tags <csv> or --synthetic-attempts <k>".into())),
    };
    let wp = bin_timetags(&set, cfg.analysis.bin_us)?;
    let n = wp.total_counts();
    let eff = correct_for_path(wp.integral(), (n as f64).sqrt() / wp.attempts as f64, &path)?;
    let csv_path = out.join("wavepacket.csv");
    let centers = wp.centers_us();
    write_table(&csv_path, &["t_us", "p_d_per_us", "p_d_err"], (0..wp.p_d.len()).map(|k| vec![centers[k], wp.p_d[k], wp.p_d_err[k]]))?;
    written.push(csv_path);
    let report = EfficiencyReport {
        attempts: wp.attempts,
        detections: n,
        multi_detection_attempts: set.multi_detection_attempts(),
        bin_us: wp.bin_us,
        p_tot: eff.p_tot,
        p_tot_err: eff.p_tot_err,
        p_path: path.p_path(),
        p_path_err: path.p_path_err(),
        p_s: eff.p_s,
        p_s_err: eff.p_s_err,
        warning: wp.warning.clone(),
    };
    let json_path = out.join("efficiency.json");
    write_json(&json_path, &report)?;
    written.push(json_path);
    Ok(written)
}
