use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{load_config, validate_config, Preset, RunConfig};
use crate::error::AppError;
use crate::io::{write_csv, write_json, write_series};
use crate::pipeline::{
    build_experiment, crossover_summary, figure_config, fit_summary, qmc_rows, run_scan, scan_rows, thread_pool,
    Experiment, QMC_HEADER, SCAN_HEADER,
};

#[derive(Debug, Parser)]
#[command(name = "pdtc", version, about = "Prethermal discrete time crystal simulator for trapped-ion chains")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `output_dir` from the configuration.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Overrides the global seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium positions and transverse normal modes.
    Modes,
    /// Calibrated J_ij matrix and its distance profile.
    Couplings,
    /// One drive frequency and initial state.
    Evolve {
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        state: Option<Preset>,
        #[arg(long)]
        periods: Option<usize>,
    },
    /// Every drive frequency × initial state of the scan section.
    Scan,
    /// Timescale fits of previously written series CSVs.
    Fit {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Thermal scan of −H_eff and the heat-capacity crossover.
    Qmc,
    /// Canned configuration for a supplementary figure (s1 to s6).
    Reproduce { figure: String },
    /// Print the resolved configuration without running anything.
    Config,
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            // A closed pipe on stdout is not a pipeline failure.
            let _ = writeln!(std::io::stdout(), "{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn base_config(cli: &Cli) -> Result<RunConfig, AppError> {
    let mut config = match (&cli.command, &cli.config) {
        (Command::Reproduce { figure }, None) => figure_config(figure)?,
        (_, Some(path)) => load_config(path)?,
        (_, None) => RunConfig::default(),
    };
    if let Some(o) = &cli.output {
        config.output_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    Ok(config)
}

fn out(exp: &Experiment, file: &str) -> PathBuf {
    exp.config.output_dir.join(file)
}

/// Runs one command and returns its one-line summary.
pub fn execute(cli: &Cli) -> Result<String, AppError> {
    let config = base_config(cli)?;
    if let Command::Config = cli.command {
        let resolved = validate_config(&config)?;
        return Ok(crate::config::to_toml(&resolved));
    }
    if let Command::Fit { inputs } = &cli.command {
        let resolved = validate_config(&config)?;
        return fit_files(inputs, &resolved);
    }
    let exp = build_experiment(&config)?;
    write_json(&out(&exp, "resolved_config.json"), &exp.config)?;
    let pool = thread_pool()?;
    match &cli.command {
        Command::Modes => modes(&exp),
        Command::Couplings => couplings(&exp),
        Command::Evolve { omega, state, periods } => {
            let ratio = omega.unwrap_or(exp.config.schedule.omega_over_j0);
            let initial = match state {
                Some(p) => exp.preset_state(*p)?,
                None => exp.initial_state()?,
            };
            let periods = periods.unwrap_or(exp.config.schedule.periods);
            let series = exp.evolve(ratio, &initial, periods, &pool)?;
            let summary = fit_summary(&series, &exp.config);
            write_series(&out(&exp, "series.csv"), &series)?;
            write_json(&out(&exp, "fit.json"), &summary)?;
            Ok(format!(
                "evolve: N={} omega/J0={ratio} periods={periods} trajectories={} -> {}",
                exp.n(),
                series.trajectories,
                exp.config.output_dir.display()
            ))
        }
        Command::Scan => scan(&exp, &pool),
        Command::Qmc => qmc(&exp, &pool),
        Command::Reproduce { figure } => match figure.as_str() {
            "s1" => couplings(&exp),
            "s6" => qmc(&exp, &pool),
            _ => scan(&exp, &pool),
        },
        Command::Fit { .. } | Command::Config => unreachable!("handled above"),
    }
}

fn modes(exp: &Experiment) -> Result<String, AppError> {
    let m = &exp.chain.modes;
    let n = m.n();
    let mut header = vec!["mode".to_string(), "frequency_hz".to_string()];
    header.extend((0..n).map(|i| format!("b_{i}")));
    let rows: Vec<Vec<String>> = (0..n)
        .map(|k| {
            let mut row = vec![k.to_string(), format!("{}", m.frequencies[k])];
            row.extend((0..n).map(|i| format!("{}", m.participation(i, k))));
            row
        })
        .collect();
    write_csv(&out(exp, "modes.csv"), &header, &rows)?;
    let length = exp.chain.trap.length_scale();
    let positions: Vec<Vec<String>> = m
        .positions
        .iter()
        .enumerate()
        .map(|(i, z)| vec![i.to_string(), format!("{z}"), format!("{}", z * length)])
        .collect();
    write_csv(&out(exp, "positions.csv"), &["ion", "z_scaled", "z_m"], &positions)?;
    Ok(format!(
        "modes: N={n} COM {:.6} MHz, lowest {:.6} MHz -> {}",
        m.frequencies[0] * 1e-6,
        m.frequencies[n - 1] * 1e-6,
        exp.config.output_dir.display()
    ))
}

#[derive(Serialize)]
struct CouplingSummary {
    n: usize,
    j0_hz: f64,
    rabi_rad_s: f64,
    detuning_hz: f64,
    mean_spin_flip_probability: f64,
}

fn couplings(exp: &Experiment) -> Result<String, AppError> {
    let j = &exp.chain.couplings;
    let n = j.n();
    let header: Vec<String> = (0..n).map(|i| format!("j_{i}")).collect();
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| (0..n).map(|k| format!("{}", j.get(i, k) / exp.j0)).collect())
        .collect();
    write_csv(&out(exp, "couplings.csv"), &header, &rows)?;
    let profile: Vec<Vec<String>> = j
        .distance_profile()
        .iter()
        .map(|b| {
            vec![
                b.distance.to_string(),
                format!("{}", b.mean / exp.j0),
                format!("{}", b.min / exp.j0),
                format!("{}", b.max / exp.j0),
            ]
        })
        .collect();
    write_csv(&out(exp, "profile.csv"), &["distance", "mean_j_over_j0", "min_j_over_j0", "max_j_over_j0"], &profile)?;
    let flip = exp.spin_flip_probability()?;
    write_json(
        &out(exp, "couplings.json"),
        &CouplingSummary {
            n,
            j0_hz: j.require_j0()? / (2.0 * std::f64::consts::PI),
            rabi_rad_s: exp.chain.raman.rabi,
            detuning_hz: exp.chain.raman.detuning / (2.0 * std::f64::consts::PI),
            mean_spin_flip_probability: flip,
        },
    )?;
    Ok(format!(
        "couplings: N={n} J0 = 2pi x {:.3} Hz, spin-flip {:.3}% -> {}",
        j.require_j0()? / (2.0 * std::f64::consts::PI),
        100.0 * flip,
        exp.config.output_dir.display()
    ))
}

fn scan(exp: &Experiment, pool: &rayon::ThreadPool) -> Result<String, AppError> {
    let runs = run_scan(exp, pool)?;
    for r in &runs {
        write_series(&out(exp, &format!("series_{}_w{}.csv", r.state, r.omega_over_j0)), &r.series)?;
    }
    write_csv(&out(exp, "scan.csv"), &SCAN_HEADER, &scan_rows(&runs))?;
    let summaries: Vec<_> = runs
        .iter()
        .map(|r| (r.state.to_string(), r.omega_over_j0, &r.summary))
        .collect();
    write_json(&out(exp, "scan.json"), &summaries)?;
    Ok(format!(
        "scan: N={} {} runs -> {}",
        exp.n(),
        runs.len(),
        exp.config.output_dir.display()
    ))
}

fn qmc(exp: &Experiment, pool: &rayon::ThreadPool) -> Result<String, AppError> {
    let scan = exp.run_qmc(pool)?;
    write_csv(&out(exp, "qmc.csv"), &QMC_HEADER, &qmc_rows(&scan))?;
    let summary = crossover_summary(&scan);
    write_json(&out(exp, "crossover.json"), &summary)?;
    Ok(format!(
        "qmc: N={} eps_crit/J0 = {:.3} +/- {:.3} at T = {:.3} J0 -> {}",
        summary.n,
        summary.energy_density,
        summary.width,
        summary.temperature_j0,
        exp.config.output_dir.display()
    ))
}

fn fit_files(inputs: &[PathBuf], config: &RunConfig) -> Result<String, AppError> {
    let mut fits = Vec::new();
    for path in inputs {
        let series = crate::io::read_series(path)?;
        fits.push((path.display().to_string(), fit_summary(&series, config)));
    }
    let target: &Path = &config.output_dir.join("fits.json");
    write_json(target, &fits)?;
    Ok(format!("fit: {} series -> {}", fits.len(), target.display()))
}
