use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use cavitydtc::analysis::{classify_series, power_spectrum, write_envelope_csv, Classification, PhaseLabel};
use cavitydtc::config::Config;
use cavitydtc::dynamics::{ground_state, GroundStateOptions};
use cavitydtc::field::{density_snapshot, CellWindow, DensityProfile};
use cavitydtc::params::{default_experiment_params, derive_scales};
use cavitydtc::protocol::find_critical_pump;
use cavitydtc::sweep::{
    build_phase_diagram, classify_ensemble, classify_trajectory, run_ensemble, run_trajectory, trajectory_seed,
    CellSetup, SweepControl,
};
use cavitydtc::trapmodes::{vbar_curve, write_vbar_csv};
use cavitydtc::{Error, Result};

#[derive(Parser)]
#[command(name = "cavitydtc", version, about = "Dissipative time crystals in a pumped atom-cavity system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; missing keys take the experiment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Full-size ensembles, 200 cycles and the fine sweep grid.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Trajectories per ensemble (overrides run.n_traj).
    #[arg(long, global = true)]
    traj: Option<usize>,
    /// Skip sweep cells already present in the output directory.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Imaginary-time ground state and its density profile.
    GroundState,
    /// One drive cell: ensemble (or mean-field) run and classification.
    Run,
    /// Phase diagram over the configured (f_d, ω_d) grid.
    Sweep,
    /// Classify a recorded run CSV.
    Classify {
        /// CSV with t_ms and c columns (run.csv or trajectory CSV).
        #[arg(long)]
        input: PathBuf,
    },
    /// Critical pump strength for self-organization.
    CritPump,
    /// Trap-induced coupling V̄ over a range of trap ratios.
    TrapCoupling {
        /// lo:hi:n
        #[arg(long, default_value = "0.001:0.2:200")]
        b_range: String,
    },
}

#[derive(Serialize)]
struct ClassificationReport {
    label: String,
    phase: Option<PhaseLabel>,
    tau_cycles: Option<f64>,
    tau_ms: Option<f64>,
    plateau_end_cycles: Option<f64>,
    plateau_end_ms: Option<f64>,
    initial_switches: usize,
    final_alternates: bool,
    third_harmonic_ratio: Option<f64>,
    peaks: Vec<(f64, f64)>,
}

impl ClassificationReport {
    fn new(cl: &Classification, period_ms: f64) -> Self {
        let (tau, plateau) = match cl.label {
            PhaseLabel::MetastableDTC { tau_cycles, .. } => (tau_cycles, cl.lifetime.and_then(|l| l.plateau_end)),
            _ => (None, None),
        };
        ClassificationReport {
            label: cl.label.name().to_string(),
            phase: Some(cl.label),
            tau_cycles: tau,
            tau_ms: tau.map(|t| t * period_ms),
            plateau_end_cycles: plateau,
            plateau_end_ms: plateau.map(|p| p * period_ms),
            initial_switches: cl.initial_switches,
            final_alternates: cl.final_alternates,
            third_harmonic_ratio: cl.third_harmonic_ratio,
            peaks: cl.peaks.clone(),
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if cli.paper_scale {
        cfg = cfg.paper_scale();
    }
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(n) = cli.traj {
        cfg.run.n_traj = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn ground_state_cmd(cli: &Cli, cfg: &Config) -> Result<()> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let gs = ground_state(&params, &grid, &GroundStateOptions::default())?;
    let profile = DensityProfile {
        z: grid.positions.clone(),
        rho: gs.density(),
    };
    profile.write_csv(create(&cli.out, "ground_state.csv")?)?;
    density_snapshot(&gs, &grid, CellWindow::all(&grid))?.write_csv(create(&cli.out, "ground_state_cell.csv")?)?;
    let s = derive_scales(&params);
    println!(
        "ground state: E_osc/E_rec = {:.6}, E_int/E_rec = {:.6}, peak density {:.6}/lambda",
        s.e_osc / s.e_rec,
        s.e_int / s.e_rec,
        profile.rho.iter().cloned().fold(0.0, f64::max)
    );
    Ok(())
}

fn run_cmd(cli: &Cli, cfg: &Config) -> Result<()> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let crit = find_critical_pump(&params, &grid, &cfg.crit_options())?;
    let ground = ground_state(&params, &grid, &GroundStateOptions::default())?;
    let schedule = cfg.schedule(&params, crit.epsilon_crit)?;
    let settings = cfg.settings();
    let setup = CellSetup {
        params,
        grid,
        ground,
        schedule,
        settings,
    };
    let ms = params.code_to_ms(1.0);
    let period_ms = params.code_to_ms(schedule.period());
    let opts = cfg.classify_options();
    let cl = if settings.noise || settings.wigner {
        let ens = run_ensemble(&setup, cfg.run.n_traj, cfg.run.seed, 0)?;
        ens.write_csv(create(&cli.out, "run.csv")?, ms)?;
        write_envelope_csv(create(&cli.out, "envelope.csv")?, &ens.c_strobe)?;
        ens.records[0].write_csv(create(&cli.out, "trajectory_0.csv")?, ms)?;
        if ens.n_failed > 0 {
            eprintln!("warning: {} of {} trajectories failed", ens.n_failed, cfg.run.n_traj);
        }
        classify_ensemble(&ens, settings.theta_threshold, &opts)?
    } else {
        let rec = run_trajectory(&setup, trajectory_seed(cfg.run.seed, 0, 0))?;
        rec.write_csv(create(&cli.out, "run.csv")?, ms)?;
        let c = rec.correlation()?;
        let cycles = rec.cycles();
        let env = cavitydtc::analysis::strobe_envelope(&c[..cycles * rec.samples_per_period], rec.samples_per_period)?;
        write_envelope_csv(create(&cli.out, "envelope.csv")?, &env)?;
        classify_trajectory(&rec, settings.theta_threshold, &opts)?
    };
    let report = ClassificationReport::new(&cl, period_ms);
    write_json(&cli.out, "classification.json", &report)?;
    println!(
        "epsilon_crit = {:.6} (code units); label = {}{}",
        crit.epsilon_crit,
        report.label,
        report.tau_ms.map(|t| format!(", tau = {t:.3} ms")).unwrap_or_default()
    );
    Ok(())
}

fn sweep_cmd(cli: &Cli, cfg: &Config) -> Result<()> {
    let spec = cfg.sweep_spec()?;
    let control = SweepControl {
        resume: cli.resume,
        max_new_cells: None,
    };
    let d = build_phase_diagram(&spec, Some(&cli.out), control)?;
    println!(
        "{} cells ({} failed), epsilon_crit = {:.6}, {:.1} s",
        d.manifest.cells_total, d.manifest.cells_failed, d.manifest.epsilon_crit, d.manifest.wall_time_s
    );
    Ok(())
}

struct Series {
    t: Vec<f64>,
    c: Vec<f64>,
    theta: Option<Vec<f64>>,
    photons: Vec<f64>,
}

/// Reads the `t_ms`, `c` and optional `theta`, `photons` columns of a run CSV.
fn read_series(path: &Path) -> Result<Series> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| Error::Config(format!("{}: empty file", path.display())))??;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let (ti, ci) = match (find("t_ms"), find("c")) {
        (Some(t), Some(c)) => (t, c),
        _ => return Err(Error::Config(format!("{}: need t_ms and c columns, found {header}", path.display()))),
    };
    let theta_i = find("theta");
    let photons_i = find("photons");
    let (mut t, mut c, mut theta, mut photons) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (n, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: bad value on line {}", path.display(), n + 2)))
        };
        t.push(get(ti)?);
        c.push(get(ci)?);
        if let Some(i) = theta_i {
            theta.push(get(i)?);
        }
        if let Some(i) = photons_i {
            photons.push(get(i)?);
        }
    }
    Ok(Series {
        t,
        c,
        theta: theta_i.map(|_| theta),
        photons,
    })
}

fn classify_cmd(cli: &Cli, cfg: &Config, input: &Path) -> Result<()> {
    let Series { t, c, theta, photons } = read_series(input)?;
    if t.len() < 3 {
        return Err(Error::SeriesTooShort { len: t.len(), need: 3 });
    }
    let period_ms = 1.0 / cfg.drive.omega_d_khz;
    let spp = (period_ms / (t[1] - t[0])).round() as usize;
    if spp == 0 || ((t[1] - t[0]) * spp as f64 - period_ms).abs() > 1e-6 * period_ms {
        return Err(Error::Config(format!(
            "sample spacing {} ms does not divide the drive period {period_ms} ms",
            t[1] - t[0]
        )));
    }
    let cycles = (c.len() - 1) / spp;
    let spectrum = theta.as_ref().map(|th| power_spectrum(&th[..cycles * spp], spp));
    // a CSV carries no state, so organization is read off the photon
    // number at t₀: an empty cavity holds at most the half photon of vacuum
    let organized = photons.first().map_or(true, |&n| n > 1.0);
    let cl = classify_series(&c, spp, organized, spectrum.as_ref(), &cfg.classify_options())?;
    let report = ClassificationReport::new(&cl, period_ms);
    write_json(&cli.out, "classification.json", &report)?;
    serde_json::to_writer_pretty(io::stdout().lock(), &report)?;
    println!();
    Ok(())
}

fn crit_pump_cmd(cli: &Cli, cfg: &Config) -> Result<()> {
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let opts = cfg.crit_options();
    let crit = find_critical_pump(&params, &grid, &opts)?;
    let ideal = find_critical_pump(&default_experiment_params(), &grid, &opts)?;
    crit.write_trace_csv(create(&cli.out, "crit_pump_trace.csv")?)?;
    println!("epsilon_crit = {:.6} (code units)", crit.epsilon_crit);
    println!("epsilon_crit / epsilon_crit(ideal) = {:.6}", crit.epsilon_crit / ideal.epsilon_crit);
    let mut out = io::stdout().lock();
    crit.write_trace_csv(&mut out)?;
    Ok(())
}

fn parse_range(s: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("--b-range wants lo:hi:n, got {s}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parts[0].parse().map_err(|_| bad())?;
    let hi = parts[1].parse().map_err(|_| bad())?;
    let n = parts[2].parse().map_err(|_| bad())?;
    Ok((lo, hi, n))
}

fn trap_coupling_cmd(cli: &Cli, range: &str) -> Result<()> {
    let (lo, hi, n) = parse_range(range)?;
    let curve = vbar_curve(lo, hi, n).map_err(|e| Error::Config(e.to_string()))?;
    write_vbar_csv(create(&cli.out, "trap_coupling.csv")?, &curve)?;
    write_vbar_csv(io::stdout().lock(), &curve)?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Command::TrapCoupling { b_range } = &cli.command {
        return trap_coupling_cmd(cli, b_range);
    }
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::GroundState => ground_state_cmd(cli, &cfg),
        Command::Run => run_cmd(cli, &cfg),
        Command::Sweep => sweep_cmd(cli, &cfg),
        Command::Classify { input } => classify_cmd(cli, &cfg, input),
        Command::CritPump => crit_pump_cmd(cli, &cfg),
        Command::TrapCoupling { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else if matches!(e, Error::Io(_) | Error::Json(_)) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
