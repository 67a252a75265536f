//! Trajectory and ensemble runners and the phase-diagram engine.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    classify_series, correlation, power_spectrum, strobe_envelope, Classification, ClassifyOptions,
    EnvelopePoint, PhaseLabel, Spectrum, TrajectoryRecord,
};
use crate::dynamics::{ground_state, sample_initial, EomContext, GroundStateOptions, Stepper};
use crate::error::{Error, Result};
use crate::field::{order_parameter, CField, Grid};
use crate::params::{derive_scales, set_interaction_energy, SystemParams};
use crate::protocol::{find_critical_pump, seeded_state, CritPumpOptions, PumpSchedule};

/// Integration and recording settings for a single run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    /// Recorded samples per drive period (at least 32).
    pub samples_per_period: usize,
    /// Upper bound on the time step in code units; the actual step divides
    /// the drive period into a multiple of `samples_per_period`.
    pub max_dt: f64,
    /// Cavity Langevin noise.
    pub noise: bool,
    /// Wigner sampling of the initial state.
    pub wigner: bool,
    /// cos(kz) seed for noise-free runs.
    pub seed_amplitude: f64,
    /// |Θ| at t₀ below this means the cloud never organized.
    pub theta_threshold: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            samples_per_period: 32,
            max_dt: 1e-3,
            noise: true,
            wigner: true,
            seed_amplitude: 1e-4,
            theta_threshold: 0.05,
        }
    }
}

impl RunSettings {
    pub fn mean_field() -> Self {
        RunSettings {
            noise: false,
            wigner: false,
            ..Default::default()
        }
    }

    /// Steps per drive period for a given period.
    pub fn steps_per_period(&self, period: f64) -> usize {
        let spp = self.samples_per_period.max(1);
        let per_sample = (period / (spp as f64 * self.max_dt)).ceil().max(1.0) as usize;
        spp * per_sample
    }
}

/// Everything shared by the trajectories of one phase-diagram cell.
#[derive(Debug, Clone)]
pub struct CellSetup {
    pub params: SystemParams,
    pub grid: Grid,
    pub ground: CField,
    pub schedule: PumpSchedule,
    pub settings: RunSettings,
}

/// Full ramp → hold → drive evolution of one trajectory.
pub fn run_trajectory(setup: &CellSetup, seed: u64) -> Result<TrajectoryRecord> {
    let s = &setup.settings;
    let sched = setup.schedule;
    let period = sched.period();
    let steps_per_period = s.steps_per_period(period);
    let dt = period / steps_per_period as f64;
    let every = steps_per_period / s.samples_per_period;
    let n_hold = (sched.hold_end / dt).ceil().max(1.0) as usize;
    let dt_hold = sched.hold_end / n_hold as f64;

    let hold_ctx = EomContext::new(setup.params, setup.grid.clone(), sched, dt_hold, s.noise, s.wigner)?;
    let drive_ctx = EomContext::new(setup.params, setup.grid.clone(), sched, dt, s.noise, s.wigner)?;
    let grid = &setup.grid;

    let mut state = if s.wigner {
        sample_initial(&setup.ground, &hold_ctx, seed)
    } else if s.noise {
        setup.ground.clone()
    } else {
        seeded_state(&setup.ground, grid, s.seed_amplitude)?
    };
    state.time = 0.0;

    let mut hold = Vec::new();
    let hold_every = (n_hold / 300).max(1);
    let mut stepper = Stepper::new(&hold_ctx, seed);
    stepper.evolve(&mut state, n_hold, hold_every, |st| {
        hold.push([st.time, order_parameter(st, grid), st.alpha.norm_sqr()]);
    })?;
    // pin t₀ exactly; the hold steps accumulate roundoff
    state.time = sched.hold_end;

    let rng = stepper.rng_state().restore();
    let mut stepper = Stepper::with_rng(&drive_ctx, rng);
    let n_samples = sched.drive_cycles * s.samples_per_period + 1;
    let mut rec = TrajectoryRecord {
        t0: sched.hold_end,
        period,
        samples_per_period: s.samples_per_period,
        times: Vec::with_capacity(n_samples),
        theta: Vec::with_capacity(n_samples),
        photons: Vec::with_capacity(n_samples),
        alpha: Vec::with_capacity(n_samples),
        epsilon: Vec::with_capacity(n_samples),
        hold,
    };
    let push = |rec: &mut TrajectoryRecord, st: &CField, i: usize| {
        let t = sched.hold_end + i as f64 * period / s.samples_per_period as f64;
        rec.times.push(t);
        rec.theta.push(order_parameter(st, grid));
        rec.photons.push(st.alpha.norm_sqr());
        rec.alpha.push(st.alpha);
        rec.epsilon.push(sched.epsilon_at(t));
    };
    push(&mut rec, &state, 0);
    let mut i = 0;
    stepper.evolve(&mut state, sched.drive_cycles * steps_per_period, every, |st| {
        i += 1;
        push(&mut rec, st, i);
    })?;
    Ok(rec)
}

/// Mixes a 64-bit value (SplitMix64 finalizer).
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trajectory seed: splitmix64(splitmix64(splitmix64(master) ^ cell) ^ trajectory).
pub fn trajectory_seed(master: u64, cell: u64, trajectory: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell) ^ trajectory)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub n_traj: usize,
    pub n_failed: usize,
    pub master_seed: u64,
    pub t0: f64,
    pub period: f64,
    pub samples_per_period: usize,
    pub times: Vec<f64>,
    pub c_of_t: Vec<f64>,
    pub c_strobe: Vec<EnvelopePoint>,
    pub mean_photons: Vec<f64>,
    /// Ensemble mean of Θ(t); averages out when the Z₂ choice is random.
    pub mean_theta: Vec<f64>,
    /// Mean |Θ(t₀)| over trajectories.
    pub mean_abs_theta_t0: f64,
    /// Trajectory-averaged Θ power spectrum over the drive window.
    pub theta_spectrum: Spectrum,
    #[serde(skip)]
    pub records: Vec<TrajectoryRecord>,
}

impl EnsembleRecord {
    pub fn from_records(records: Vec<TrajectoryRecord>, n_failed: usize, master_seed: u64) -> Result<Self> {
        let c_of_t = correlation(&records)?;
        let first = &records[0];
        let spp = first.samples_per_period;
        let cycles = first.cycles();
        let c_strobe = strobe_envelope(&c_of_t[..cycles * spp], spp)?;
        let n = records.len() as f64;
        let len = first.len();
        let mut mean_photons = vec![0.0; len];
        let mut mean_theta = vec![0.0; len];
        let mut spectrum: Option<Spectrum> = None;
        for r in &records {
            for i in 0..len {
                mean_photons[i] += r.photons[i] / n;
                mean_theta[i] += r.theta[i] / n;
            }
            let s = power_spectrum(&r.theta[..cycles * spp], spp);
            match spectrum.as_mut() {
                Some(acc) => acc.accumulate(&s),
                None => spectrum = Some(s),
            }
        }
        let mut theta_spectrum = spectrum.expect("non-empty ensemble");
        theta_spectrum.scale(1.0 / n);
        Ok(EnsembleRecord {
            n_traj: records.len(),
            n_failed,
            master_seed,
            t0: first.t0,
            period: first.period,
            samples_per_period: spp,
            times: first.times.clone(),
            c_of_t,
            c_strobe,
            mean_photons,
            mean_theta,
            mean_abs_theta_t0: records.iter().map(|r| r.theta[0].abs()).sum::<f64>() / n,
            theta_spectrum,
            records,
        })
    }

    /// Ensemble means (t, Θ, |α|², C), t in ms.
    pub fn write_csv<W: Write>(&self, mut w: W, ms_per_unit: f64) -> Result<()> {
        writeln!(w, "t_ms,theta,photons,c")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.times[i] * ms_per_unit,
                self.mean_theta[i],
                self.mean_photons[i],
                self.c_of_t[i]
            )?;
        }
        Ok(())
    }
}

/// Runs `n_traj` trajectories with seeds derived from (master, cell, index).
/// Up to 1% failed trajectories are dropped and counted.
pub fn run_ensemble(setup: &CellSetup, n_traj: usize, master_seed: u64, cell: u64) -> Result<EnsembleRecord> {
    if n_traj == 0 {
        return Err(Error::InvalidParam("n_traj must be at least 1".into()));
    }
    let results: Vec<Result<TrajectoryRecord>> = (0..n_traj)
        .into_par_iter()
        .map(|i| run_trajectory(setup, trajectory_seed(master_seed, cell, i as u64)))
        .collect();
    let mut records = Vec::with_capacity(n_traj);
    let mut failed = 0;
    let mut last_err = None;
    for r in results {
        match r {
            Ok(r) => records.push(r),
            Err(e) => {
                failed += 1;
                last_err = Some(e);
            }
        }
    }
    if records.is_empty() || failed * 100 > n_traj {
        if let (1, Some(e)) = (n_traj, last_err) {
            return Err(e);
        }
        return Err(Error::EnsembleFailed { failed, total: n_traj });
    }
    EnsembleRecord::from_records(records, failed, master_seed)
}

/// Classifies an ensemble from its correlation function.
pub fn classify_ensemble(ens: &EnsembleRecord, theta_threshold: f64, opts: &ClassifyOptions) -> Result<Classification> {
    classify_series(
        &ens.c_of_t,
        ens.samples_per_period,
        ens.mean_abs_theta_t0 > theta_threshold,
        Some(&ens.theta_spectrum),
        opts,
    )
}

/// Classifies a single mean-field trajectory from the sign of Θ.
pub fn classify_trajectory(rec: &TrajectoryRecord, theta_threshold: f64, opts: &ClassifyOptions) -> Result<Classification> {
    let spp = rec.samples_per_period;
    let cycles = rec.cycles();
    let spectrum = power_spectrum(&rec.theta[..cycles * spp], spp);
    let organized = rec.theta[0].abs() > theta_threshold;
    // Θ starts with the DW sign; flip so the series starts positive like C
    let sign = if rec.theta[0] < 0.0 { -1.0 } else { 1.0 };
    let series: Vec<f64> = rec.theta.iter().map(|x| sign * x).collect();
    classify_series(&series, spp, organized, Some(&spectrum), opts)
}

/// Classifies each trajectory from its own C(t) and returns the majority
/// label with the per-label counts.
pub fn classify_per_trajectory(
    ens: &EnsembleRecord,
    theta_threshold: f64,
    opts: &ClassifyOptions,
) -> Result<(PhaseLabel, BTreeMap<String, usize>)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut first_of: BTreeMap<String, PhaseLabel> = BTreeMap::new();
    for r in &ens.records {
        let c = r.correlation()?;
        let spp = r.samples_per_period;
        let cycles = r.cycles();
        let spec = power_spectrum(&r.theta[..cycles * spp], spp);
        let cl = classify_series(&c, spp, r.theta[0].abs() > theta_threshold, Some(&spec), opts)?;
        let name = cl.label.name().to_string();
        *counts.entry(name.clone()).or_default() += 1;
        first_of.entry(name).or_insert(cl.label);
    }
    let best = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(k, _)| first_of[k])
        .ok_or_else(|| Error::RecordMismatch("ensemble has no stored trajectories".into()))?;
    Ok((best, counts))
}

/// Axes and settings of one phase diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub fd_grid: Vec<f64>,
    /// Drive frequencies ω_d/2π in kHz.
    pub wd_khz_grid: Vec<f64>,
    pub e_int_over_e_rec: f64,
    pub e_osc_over_e_rec: f64,
    pub n_traj: usize,
    pub master_seed: u64,
    pub drive_cycles: usize,
    pub epsilon_over_crit: f64,
    pub ramp_ms: f64,
    pub hold_end_ms: f64,
    pub grid_wavelengths: usize,
    pub points_per_wavelength: usize,
    pub settings: RunSettings,
    pub classify: ClassifyOptions,
    pub crit: CritPumpOptions,
    pub base: SystemParams,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.fd_grid) || !increasing(&self.wd_khz_grid) {
            return Err(Error::InvalidParam("sweep grids must be non-empty and strictly increasing".into()));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidParam("n_traj must be at least 1".into()));
        }
        if self.drive_cycles < 12 {
            return Err(Error::InvalidParam("need at least 12 drive cycles".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SystemParams> {
        let p = self.base.with_e_osc_ratio(self.e_osc_over_e_rec)?;
        set_interaction_energy(&p, self.e_int_over_e_rec)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid_wavelengths, self.points_per_wavelength)
    }

    pub fn schedule(&self, params: &SystemParams, epsilon_crit: f64, fd: f64, wd_khz: f64) -> Result<PumpSchedule> {
        PumpSchedule::new(
            params.ms_to_code(self.ramp_ms),
            params.ms_to_code(self.hold_end_ms),
            self.epsilon_over_crit * epsilon_crit,
            fd,
            params.khz_to_code(wd_khz),
            self.drive_cycles,
        )
    }

    /// Cells in row-major order (f_d outer, ω_d inner).
    pub fn cells(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for &fd in &self.fd_grid {
            for &wd in &self.wd_khz_grid {
                out.push((out.len(), fd, wd));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub index: usize,
    pub f_d: f64,
    pub omega_d_khz: f64,
    /// `None` when the cell failed.
    pub label: Option<PhaseLabel>,
    pub tau_ms: Option<f64>,
    pub plateau_ms: Option<f64>,
    pub epsilon_crit: f64,
    pub initial_switches: usize,
    pub n_failed: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: SweepSpec,
    pub params: SystemParams,
    pub epsilon_crit: f64,
    pub e_osc_over_e_rec: f64,
    pub e_int_over_e_rec: f64,
    pub code_version: String,
    pub seed_scheme: String,
    pub wall_time_s: f64,
    pub cells_total: usize,
    pub cells_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub points: Vec<PhasePoint>,
    pub manifest: Manifest,
}

impl PhaseDiagram {
    /// `diagram.csv`: f_d, omega_d_kHz, label, tau_ms, plateau.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "f_d,omega_d_kHz,label,tau_ms,plateau")?;
        for p in &self.points {
            let label = p.label.map(|l| l.name()).unwrap_or("Invalid");
            let tau = p.tau_ms.map(|t| format!("{t:.6}")).unwrap_or_default();
            let plateau = p.plateau_ms.map(|t| format!("{t:.6}")).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", p.f_d, p.omega_d_khz, label, tau, plateau)?;
        }
        Ok(())
    }

    pub fn label_at(&self, f_d: f64, omega_d_khz: f64) -> Option<PhaseLabel> {
        self.points
            .iter()
            .find(|p| p.f_d == f_d && p.omega_d_khz == omega_d_khz)
            .and_then(|p| p.label)
    }
}

/// Prepared per-diagram context: parameters, ε_crit and the ground state.
#[derive(Debug, Clone)]
pub struct DiagramContext {
    pub params: SystemParams,
    pub grid: Grid,
    pub ground: CField,
    pub epsilon_crit: f64,
}

pub fn prepare_diagram(spec: &SweepSpec) -> Result<DiagramContext> {
    let params = spec.params()?;
    let grid = spec.grid()?;
    let crit = find_critical_pump(&params, &grid, &spec.crit)?;
    let ground = ground_state(&params, &grid, &GroundStateOptions::default())?;
    Ok(DiagramContext {
        params,
        grid,
        ground,
        epsilon_crit: crit.epsilon_crit,
    })
}

/// Runs and classifies one cell.
pub fn run_cell(spec: &SweepSpec, ctx: &DiagramContext, index: usize, fd: f64, wd_khz: f64) -> PhasePoint {
    let mut point = PhasePoint {
        index,
        f_d: fd,
        omega_d_khz: wd_khz,
        label: None,
        tau_ms: None,
        plateau_ms: None,
        epsilon_crit: ctx.epsilon_crit,
        initial_switches: 0,
        n_failed: 0,
        error: None,
    };
    let result = (|| -> Result<()> {
        let schedule = spec.schedule(&ctx.params, ctx.epsilon_crit, fd, wd_khz)?;
        let setup = CellSetup {
            params: ctx.params,
            grid: ctx.grid.clone(),
            ground: ctx.ground.clone(),
            schedule,
            settings: spec.settings,
        };
        let period_ms = ctx.params.code_to_ms(schedule.period());
        let cl = if spec.settings.noise || spec.settings.wigner {
            let ens = run_ensemble(&setup, spec.n_traj, spec.master_seed, index as u64)?;
            point.n_failed = ens.n_failed;
            classify_ensemble(&ens, spec.settings.theta_threshold, &spec.classify)?
        } else {
            let rec = run_trajectory(&setup, trajectory_seed(spec.master_seed, index as u64, 0))?;
            classify_trajectory(&rec, spec.settings.theta_threshold, &spec.classify)?
        };
        point.label = Some(cl.label);
        point.initial_switches = cl.initial_switches;
        if let PhaseLabel::MetastableDTC { tau_cycles, .. } = cl.label {
            point.tau_ms = tau_cycles.map(|t| t * period_ms);
            point.plateau_ms = cl.lifetime.and_then(|l| l.plateau_end).map(|c| c * period_ms);
        }
        Ok(())
    })();
    if let Err(e) = result {
        let e = Error::Cell {
            fd,
            wd_khz,
            source: Box::new(e),
        };
        point.error = Some(e.to_string());
    }
    point
}

const CELLS_FILE: &str = "cells.jsonl";

fn load_completed(path: &Path) -> Result<BTreeMap<usize, PhasePoint>> {
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // a torn final line from an interrupted run is skipped and recomputed
        if let Ok(p) = serde_json::from_str::<PhasePoint>(&line) {
            out.insert(p.index, p);
        }
    }
    Ok(out)
}

/// Options controlling persistence of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepControl {
    /// Skip cells already present in the output directory.
    pub resume: bool,
    /// Stop after this many newly computed cells (simulates interruption).
    pub max_new_cells: Option<usize>,
}

/// Computes every cell of the diagram, appending each finished cell to
/// `out_dir/cells.jsonl`, then writes `diagram.csv` and `manifest.json`.
/// Cells already on disk are skipped when resuming.
pub fn build_phase_diagram(spec: &SweepSpec, out_dir: Option<&Path>, control: SweepControl) -> Result<PhaseDiagram> {
    spec.validate()?;
    let start = Instant::now();
    let ctx = prepare_diagram(spec)?;

    let mut done = BTreeMap::new();
    let writer = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(CELLS_FILE);
            if control.resume {
                done = load_completed(&path)?;
            } else if path.exists() {
                fs::remove_file(&path)?;
            }
            let file = OpenOptions::new().create(true).append(true).open(&path)?;
            Some(Mutex::new(BufWriter::new(file)))
        }
        None => None,
    };

    let mut todo: Vec<(usize, f64, f64)> = spec
        .cells()
        .into_iter()
        .filter(|(i, _, _)| !done.contains_key(i))
        .collect();
    if let Some(limit) = control.max_new_cells {
        todo.truncate(limit);
    }
    let fresh: Vec<PhasePoint> = todo
        .par_iter()
        .map(|&(i, fd, wd)| {
            let p = run_cell(spec, &ctx, i, fd, wd);
            if let Some(w) = &writer {
                let line = serde_json::to_string(&p).expect("phase point serializes");
                let mut w = w.lock().expect("result writer poisoned");
                let _ = writeln!(w, "{line}").and_then(|_| w.flush());
            }
            p
        })
        .collect();
    for p in fresh {
        done.insert(p.index, p);
    }

    let points: Vec<PhasePoint> = done.into_values().collect();
    let scales = derive_scales(&ctx.params);
    let manifest = Manifest {
        spec: spec.clone(),
        params: ctx.params,
        epsilon_crit: ctx.epsilon_crit,
        e_osc_over_e_rec: scales.e_osc / scales.e_rec,
        e_int_over_e_rec: scales.e_int / scales.e_rec,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed_scheme: "splitmix64(splitmix64(splitmix64(master) ^ cell) ^ trajectory)".into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        cells_total: spec.cells().len(),
        cells_failed: points.iter().filter(|p| p.label.is_none()).count(),
    };
    let diagram = PhaseDiagram { points, manifest };
    if let Some(dir) = out_dir {
        if diagram.points.len() == spec.cells().len() {
            diagram.write_csv(BufWriter::new(File::create(dir.join("diagram.csv"))?))?;
        }
        serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("manifest.json"))?), &diagram.manifest)?;
    }
    Ok(diagram)
}
