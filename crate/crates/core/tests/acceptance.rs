//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails. `CAVITYDTC_ACCEPTANCE=1,6` runs a subset.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use cavitydtc::analysis::{
    fit_lifetime, power_spectrum, strobe_samples, ClassifyOptions, LifetimeOptions, PhaseLabel,
    TrajectoryRecord,
};
use cavitydtc::config::Config;
use cavitydtc::dynamics::{
    drift, energy, gaussian_density, ground_state, real_time_density_change, sample_initial,
    thomas_fermi_density, trajectory_rng, CavityNoise, EomContext, GroundStateOptions, Stepper,
    STREAM_LANGEVIN,
};
use cavitydtc::field::{bunching, CField, Grid};
use cavitydtc::params::{default_experiment_params, set_interaction_energy, SystemParams, K_CODE};
use cavitydtc::protocol::{find_critical_pump, CritPumpOptions, PumpSchedule};
use cavitydtc::sweep::{
    build_phase_diagram, classify_ensemble, classify_trajectory, run_ensemble, run_trajectory,
    CellSetup, EnsembleRecord, RunSettings, SweepControl,
};
use cavitydtc::trapmodes::{v_eff, v_of_dk, vbar, vbar_curve, TrapCoupling};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Exp};

type Outcome = (bool, String);

const MASTER_SEED: u64 = 7;
const ENSEMBLE: usize = 64;

fn l2_rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn trapped(lz: Option<f64>, e_int: f64) -> SystemParams {
    let mut p = default_experiment_params();
    if let Some(lz) = lz {
        p = p.with_osc_length(lz).unwrap();
    }
    set_interaction_energy(&p, e_int).unwrap()
}

/// Ground state, ε_crit and the experimental drive at 1.02 ε_crit.
fn cell(params: SystemParams, fd: f64, wd_khz: f64, cycles: usize, settings: RunSettings) -> CellSetup {
    let grid = Grid::new(32, 16).unwrap();
    let crit = find_critical_pump(&params, &grid, &CritPumpOptions::default()).unwrap();
    let ground = ground_state(&params, &grid, &GroundStateOptions::default()).unwrap();
    let schedule = PumpSchedule::experiment(&params, 1.02 * crit.epsilon_crit, fd, wd_khz, cycles).unwrap();
    CellSetup { params, grid, ground, schedule, settings }
}

fn mean_field_run(fd: f64, wd_khz: f64) -> TrajectoryRecord {
    let setup = cell(default_experiment_params(), fd, wd_khz, 200, RunSettings::mean_field());
    run_trajectory(&setup, 1).unwrap()
}

fn ensemble(params: SystemParams, fd: f64, wd_khz: f64, cycles: usize) -> EnsembleRecord {
    let setup = cell(params, fd, wd_khz, cycles, RunSettings::default());
    run_ensemble(&setup, ENSEMBLE, MASTER_SEED, 0).unwrap()
}

fn conservation() -> Outcome {
    let start = Instant::now();
    let mut params = trapped(Some(3.5), 0.26);
    params.kappa = 0.0;
    let grid = Grid::new(32, 16).unwrap();
    // half the ideal threshold: pump, lattice and cavity terms all act
    // while the cloud stays below self-organization
    let eps = 4.0;
    let ctx = EomContext::new(params, grid.clone(), PumpSchedule::constant(eps), 5e-5, false, false).unwrap();
    let mut s = ground_state(&params, &grid, &GroundStateOptions::default()).unwrap();
    for (p, z) in s.psi.iter_mut().zip(&grid.positions) {
        *p *= 1.0 + 0.05 * (K_CODE * z).cos();
    }
    let n0 = s.norm(&grid);
    s.scale(1.0 / n0.sqrt());
    s.alpha = Complex64::new(1.0, 0.5);
    let e0 = energy(&s, eps, &ctx);
    let steps = (params.ms_to_code(30.0) / ctx.dt).round() as usize;
    let (mut de, mut dn): (f64, f64) = (0.0, 0.0);
    Stepper::new(&ctx, 0)
        .evolve(&mut s, steps, 100, |st| {
            de = de.max(((energy(st, eps, &ctx) - e0) / e0).abs());
            dn = dn.max((st.norm(&grid) - 1.0).abs());
        })
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    (
        de < 1e-7 && dn < 1e-8 && secs < 60.0,
        format!("512 points, 30 ms: energy drift {de:.2e}, norm drift {dn:.2e}, {secs:.1} s"),
    )
}

fn cavity_decay() -> Outcome {
    let grid = Grid::new(2, 16).unwrap();
    let a0 = Complex64::new(0.7, -0.4);
    let mut worst: f64 = 0.0;
    // bare cavity (no dispersive shift) and cavity dressed by a homogeneous cloud
    for n_atoms in [1e-12, 65e3] {
        let mut params = default_experiment_params();
        params.n_atoms = n_atoms;
        let ctx = EomContext::new(params, grid.clone(), PumpSchedule::constant(0.0), 1e-3, false, false).unwrap();
        let c = ctx.code;
        let mut s = CField::uniform(&grid);
        let amp = if n_atoms > 1.0 { 1e-4 } else { 1.0 };
        s.alpha = a0 * amp;
        let rate = Complex64::new(-c.kappa, c.delta_c - c.u0 * c.n_atoms * bunching(&s, &grid));
        let mut t = 0.0;
        Stepper::new(&ctx, 0)
            .evolve(&mut s, 300, 5, |st| {
                t += 5.0 * ctx.dt;
                let exact = a0 * amp * (rate * t).exp();
                worst = worst.max((st.alpha - exact).norm() / exact.norm());
            })
            .unwrap();
    }
    (worst < 1e-9, format!("max relative deviation {worst:.2e}"))
}

fn ground_states() -> Outcome {
    let grid = Grid::new(32, 16).unwrap();
    let p = trapped(Some(3.5), 0.0);
    let g = ground_state(&p, &grid, &GroundStateOptions::default()).unwrap();
    let gauss_err = l2_rel(&g.density(), &gaussian_density(&grid, 3.5));

    let p = trapped(Some(3.5), 0.2634);
    let g = ground_state(&p, &grid, &GroundStateOptions::default()).unwrap();
    let tf = thomas_fermi_density(&p, &grid);
    let c = p.code();
    let mu = cavitydtc::dynamics::thomas_fermi_mu(c.g_contact * c.n_atoms, c.trap_freq);
    let radius = (2.0 * mu).sqrt() / c.trap_freq;
    let inner: Vec<usize> = (0..grid.n_points).filter(|&j| grid.positions[j].abs() <= 0.9 * radius).collect();
    let pick = |v: &[f64]| inner.iter().map(|&j| v[j]).collect::<Vec<_>>();
    let tf_err = l2_rel(&pick(&g.density()), &pick(&tf));
    let change = real_time_density_change(&p, &grid, &g, p.ms_to_code(10.0), 1e-3).unwrap();
    (
        gauss_err < 1e-6 && tf_err < 0.05 && change < 0.01,
        format!("Gaussian L2 {gauss_err:.2e}, Thomas-Fermi L2 (inner 90%) {tf_err:.3}, 10 ms re-propagation {change:.2e}"),
    )
}

fn gradient_check() -> Outcome {
    let p = trapped(Some(0.8), 0.5);
    let grid = Grid::new(2, 16).unwrap();
    let eps = 7.5;
    let ctx = EomContext::new(p, grid.clone(), PumpSchedule::constant(eps), 1e-4, false, false).unwrap();
    let n = ctx.code.n_atoms;
    let mut worst: f64 = 0.0;
    let wirtinger = |h: &dyn Fn(Complex64) -> f64, z: Complex64| {
        let d = 1e-5;
        let dx = (h(z + d) - h(z - d)) / (2.0 * d);
        let dy = (h(z + Complex64::new(0.0, d)) - h(z - Complex64::new(0.0, d))) / (2.0 * d);
        0.5 * Complex64::new(dx, dy)
    };
    let minus_i = Complex64::new(0.0, -1.0);
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = (0..grid.n_points)
            .map(|_| Complex64::new(rng.gen_range(0.2..1.5), rng.gen_range(-0.5..0.5)))
            .collect();
        let mut s = CField::from_profile(&grid, psi).unwrap();
        s.alpha = Complex64::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let d = drift(&s, 0.0, &ctx).unwrap();
        let scale = d.psi.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for j in 0..grid.n_points {
            let h = |z: Complex64| {
                let mut t = s.clone();
                t.psi[j] = z;
                energy(&t, eps, &ctx)
            };
            let fd = minus_i * wirtinger(&h, s.psi[j]) / (n * grid.spacing);
            worst = worst.max((d.psi[j] - fd).norm() / scale);
        }
        let h = |z: Complex64| {
            let mut t = s.clone();
            t.alpha = z;
            energy(&t, eps, &ctx)
        };
        let fd = minus_i * wirtinger(&h, s.alpha) - ctx.code.kappa * s.alpha;
        worst = worst.max((d.alpha - fd).norm() / d.alpha.norm());
    }
    (worst < 1e-6, format!("max relative mismatch {worst:.2e} over 10 random states"))
}

fn noise_statistics() -> Outcome {
    let kappa = default_experiment_params().code().kappa;
    let dt = 1e-3;
    let noise = CavityNoise::new(kappa, dt);
    let mut rng = trajectory_rng(99, STREAM_LANGEVIN);
    let power: Vec<f64> = (0..100_000).map(|_| noise.sample(&mut rng).norm_sqr()).collect();
    let dist = Exp::new(1.0 / (kappa * dt)).unwrap();
    let bins = 50;
    let mut counts = vec![0usize; bins];
    for &x in &power {
        counts[((dist.cdf(x) * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let expected = power.len() as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
    let mean_rate = power.iter().sum::<f64>() / power.len() as f64 / dt;

    let grid = Grid::new(2, 16).unwrap();
    let ctx = EomContext::new(default_experiment_params(), grid.clone(), PumpSchedule::constant(0.0), dt, false, true)
        .unwrap();
    let s0 = CField::uniform(&grid);
    let m = 20_000;
    let photons: Vec<f64> = (0..m).map(|seed| sample_initial(&s0, &ctx, seed).alpha.norm_sqr()).collect();
    let mean = photons.iter().sum::<f64>() / m as f64;
    let var = photons.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let sigma = (var / m as f64).sqrt();
    (
        p_value > 0.01 && (mean - 0.5).abs() < 3.0 * sigma,
        format!(
            "chi2 p = {p_value:.3}, <|xi dt|^2>/dt = {mean_rate:.3} (kappa {kappa:.3}); vacuum <|alpha|^2> = {mean:.4} +- {sigma:.4}"
        ),
    )
}

fn ideal_dtc() -> Outcome {
    let start = Instant::now();
    let rec = mean_field_run(0.5, 4.0);
    let cl = classify_trajectory(&rec, 0.05, &ClassifyOptions::default()).unwrap();
    let spp = rec.samples_per_period;
    let strobe = strobe_samples(&rec.theta, spp, 0.5);
    let strobe = &strobe[..rec.cycles()];
    let theta_alternates = strobe.windows(2).all(|w| w[0] * w[1] < 0.0);
    let n = rec.cycles() * spp;
    let mean = rec.photons[..n].iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = rec.photons[..n].iter().map(|x| x - mean).collect();
    let top = power_spectrum(&centered, spp).peaks()[0].0;
    let secs = start.elapsed().as_secs_f64();
    (
        cl.label == PhaseLabel::StableDTC && theta_alternates && (top - 1.0).abs() < 1e-9 && secs < 300.0,
        format!(
            "label {}, Theta alternates every period: {theta_alternates}, |alpha|^2 peak at {top} omega_d, {secs:.1} s",
            cl.label.name()
        ),
    )
}

fn chaotic_cell() -> Outcome {
    let rec = mean_field_run(0.8, 2.5);
    let cl = classify_trajectory(&rec, 0.05, &ClassifyOptions::default()).unwrap();
    (
        cl.label == PhaseLabel::Chaotic,
        format!("label {} ({} initial switches)", cl.label.name(), cl.initial_switches),
    )
}

fn trapped_interacting_cells() -> Outcome {
    let p = trapped(Some(3.5), 0.26);
    let opts = ClassifyOptions::default();
    let stable = classify_ensemble(&ensemble(p, 0.7, 5.0, 200), 0.05, &opts).unwrap().label;
    let meta = classify_ensemble(&ensemble(p, 0.5, 3.5, 200), 0.05, &opts).unwrap().label;
    let ok_meta = matches!(meta, PhaseLabel::MetastableDTC { tau_cycles: Some(t), .. } if t.is_finite());
    (
        stable == PhaseLabel::StableDTC && ok_meta,
        format!("(0.7, 5 kHz): {stable:?}; (0.5, 3.5 kHz): {meta:?}"),
    )
}

fn lifetime(ens: &EnsembleRecord) -> f64 {
    fit_lifetime(&ens.c_strobe, &LifetimeOptions::default())
        .ok()
        .and_then(|f| f.tau_cycles)
        .unwrap_or(f64::INFINITY)
}

fn lifetimes() -> Outcome {
    let e_int = [1.0, 2.0, 3.0];
    let e_osc = [0.02, 0.025, 0.03];
    let tau_int: Vec<f64> = e_int
        .iter()
        .map(|&e| lifetime(&ensemble(trapped(None, e), 0.5, 4.0, 200)))
        .collect();
    let tau_trap: Vec<f64> = e_osc
        .iter()
        .map(|&r| {
            let p = default_experiment_params().with_e_osc_ratio(r).unwrap();
            lifetime(&ensemble(p, 0.5, 4.0, 200))
        })
        .collect();
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[0] > w[1]);
    let shorter = tau_trap.iter().zip(&tau_int).all(|(t, i)| t < i);
    (
        decreasing(&tau_int) && decreasing(&tau_trap) && shorter,
        format!(
            "tau/T for E_int/E_rec {e_int:?}: {tau_int:.1?}; for E_osc/E_rec {e_osc:?}: {tau_trap:.1?}"
        ),
    )
}

fn low_frequency_dtc() -> Outcome {
    let rec = mean_field_run(0.5, 1.0);
    let cl = classify_trajectory(&rec, 0.05, &ClassifyOptions::default()).unwrap();
    let spp = rec.samples_per_period;
    let spec = power_spectrum(&rec.theta[..rec.cycles() * spp], spp);
    let ratio = spec.power_near(1.5) / spec.power_near(0.5);
    let peaks: Vec<f64> = spec.peaks().iter().take(4).map(|p| p.0).collect();
    let has = |f: f64| peaks.iter().any(|p| (p - f).abs() < 0.02);
    (
        cl.label == PhaseLabel::LowFreqDTC && has(0.5) && has(1.5) && (0.05..=0.5).contains(&ratio),
        format!("label {}, leading Theta peaks {peaks:.3?} omega_d, P(1.5)/P(0.5) = {ratio:.3}", cl.label.name()),
    )
}

fn trap_coupling() -> Outcome {
    let mut worst: f64 = 0.0;
    for b in [0.004, 0.02, 0.05, 0.2] {
        let tc = TrapCoupling::from_b(b).unwrap();
        for dk in [0.0, 0.5 * PI, PI, 2.0 * PI] {
            let half = 12.0 * tc.lz;
            let n = 20_000;
            let h = 2.0 * half / n as f64;
            let f = |z: f64| (b - v_eff(z, &tc)) * (dk * z).cos();
            let mut s = f(-half) + f(half);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(-half + i as f64 * h);
            }
            let quad = s * h / 3.0 / (2.0 * PI).sqrt();
            let exact = v_of_dk(dk, &tc);
            // the transform is compared on the scale of its peak V(0)
            worst = worst.max((quad - exact).abs() / v_of_dk(0.0, &tc));
        }
    }
    let ratio = vbar(&TrapCoupling::from_b(0.004).unwrap()) / vbar(&TrapCoupling::from_b(0.05).unwrap());
    let monotone = vbar_curve(1e-3, 0.5, 200).unwrap().windows(2).all(|w| w[0].1 < w[1].1);
    (
        worst < 1e-6 && ratio < 1e-2 && monotone,
        format!("quadrature mismatch {worst:.2e}, Vbar(0.004)/Vbar(0.05) = {ratio:.2e}, monotone: {monotone}"),
    )
}

fn sweep_reproducibility() -> Outcome {
    let spec = Config::from_toml(
        "[grid]\nwavelengths = 4\n[drive]\ncycles = 16\n[run]\nn_traj = 4\nseed = 3\n[sweep]\nf_d = [0.4, 0.8]\nomega_d_khz = [2.5, 4.0, 6.0]\n",
    )
    .unwrap()
    .sweep_spec()
    .unwrap();
    let run = |threads: usize, control: SweepControl, dir: &std::path::Path| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| build_phase_diagram(&spec, Some(dir), control)).unwrap();
    };
    let read = |dir: &std::path::Path| std::fs::read(dir.join("diagram.csv")).ok();
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(1, SweepControl::default(), a.path());
    run(4, SweepControl::default(), b.path());
    run(2, SweepControl { resume: false, max_new_cells: Some(3) }, c.path());
    let interrupted_has_diagram = read(c.path()).is_some();
    run(2, SweepControl { resume: true, max_new_cells: None }, c.path());
    let threads_equal = read(a.path()).is_some() && read(a.path()) == read(b.path());
    let resume_equal = !interrupted_has_diagram && read(a.path()) == read(c.path());
    (
        threads_equal && resume_equal,
        format!("1 vs 4 threads byte-identical: {threads_equal}; interrupted after 3 of 6 cells and resumed identical: {resume_equal}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("conservation", conservation),
        ("analytic cavity decay", cavity_decay),
        ("ground states", ground_states),
        ("drift is the Hamiltonian gradient", gradient_check),
        ("noise statistics", noise_statistics),
        ("ideal stable DTC (0.5, 4 kHz)", ideal_dtc),
        ("chaotic cell (0.8, 2.5 kHz)", chaotic_cell),
        ("trapped interacting cells", trapped_interacting_cells),
        ("lifetime ordering", lifetimes),
        ("low-frequency DTC (0.5, 1 kHz)", low_frequency_dtc),
        ("trap-induced coupling", trap_coupling),
        ("sweep reproducibility", sweep_reproducibility),
    ];
    let only: Option<Vec<usize>> = std::env::var("CAVITYDTC_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let (ok, detail) = check();
        println!("{} {n:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
