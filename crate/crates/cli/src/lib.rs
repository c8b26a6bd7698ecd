//! `oscidamp` command-line front end.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use oscidamp::experiment::{self, Experiment, Run};
use oscidamp::io::config::{load_config, LoadedConfig};
use oscidamp::io::csv::{emit_csv, format_metrics_csv, write_text, CsvHeader};
use oscidamp::io::table::{render_table, RenderedTable};
use oscidamp::metrics::{self, ComparisonTable, SignalId};
use oscidamp::model::assemble_state_space;
use oscidamp::{checks, control, exit, ControllerMode, Error};

pub const SEED_ENV: &str = "OSCIDAMP_SEED";
const VERIFY_SAMPLES: usize = 200;

#[derive(Debug, Parser)]
#[command(name = "oscidamp", version, about = "Damping-controller design and simulation for multi-area power systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design a controller and print its gains with the assumption report.
    Design {
        #[arg(long)]
        config: PathBuf,
        /// fd, sf, sdf (= sdf_exact) or sdf_measured; defaults to the config's mode.
        #[arg(long)]
        controller: Option<ControllerMode>,
        #[arg(long)]
        kd: Option<f64>,
    },
    /// Simulate the configured scenario and write trajectory and metrics CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        controller: Option<ControllerMode>,
        #[arg(long)]
        kd: Option<f64>,
    },
    /// Compare two controllers on the configured scenario.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Baseline and test controller, comma separated.
        #[arg(long, value_delimiter = ',', default_values = ["fd", "sdf"])]
        controllers: Vec<ControllerMode>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        kd: Option<f64>,
    },
    /// Run the invariant and property checks; exits 0 iff all pass.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Randomized systems per sweep.
        #[arg(long, default_value_t = VERIFY_SAMPLES)]
        samples: usize,
    },
    /// Run a preset experiment end to end: a (step load), b (fault), c (burst).
    Reproduce {
        #[arg(long)]
        experiment: Experiment,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    let seed = match seed_override() {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return exit::VALIDATION;
        }
    };
    let result = match cli.command {
        Command::Design { config, controller, kd } => design(&config, controller, kd, seed),
        Command::Simulate { config, out, controller, kd } => simulate(&config, out, controller, kd, seed),
        Command::Compare { config, controllers, out, kd } => compare(&config, &controllers, out, kd, seed),
        Command::Verify { config, samples } => verify(&config, samples, seed),
        Command::Reproduce { experiment, out } => reproduce(experiment, &out, seed.unwrap_or(1)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn seed_override() -> Result<Option<u64>, String> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("{SEED_ENV} must be an unsigned integer, got '{v}'")),
        Err(_) => Ok(None),
    }
}

fn load(path: &Path, seed: Option<u64>, kd: Option<f64>) -> Result<LoadedConfig, Error> {
    let mut cfg = load_config(path)?;
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(kd) = kd {
        if !(kd.is_finite() && kd > 0.0) {
            return Err(Error::Design(format!("--kd must be finite and > 0, got {kd}")));
        }
        cfg.controller.kd = Some(kd);
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn header(cfg: &LoadedConfig, mode: ControllerMode) -> CsvHeader {
    CsvHeader {
        config_sha256: cfg.fingerprint(),
        seed: cfg.seed(),
        dt_s: cfg.scenario.dt_s,
        controller: mode.label().to_string(),
        f_nom_hz: cfg.system.f_nom_hz(),
    }
}

fn design(path: &Path, controller: Option<ControllerMode>, kd: Option<f64>, seed: Option<u64>) -> Result<i32, Error> {
    let cfg = load(path, seed, kd)?;
    let mode = controller.unwrap_or(cfg.controller.mode);
    let ss = assemble_state_space(&cfg.system);
    let regularity = oscidamp::model::check_regularity(&ss, cfg.system.network())?;
    let gains = experiment::design_gains(&cfg.system, &cfg.controller, mode)?;
    let assumptions = control::validate_assumptions(&ss, &gains.ks);
    let doc = serde_json::json!({
        "controller": mode.label(),
        "gains": gains,
        "assumptions": assumptions,
        "regularity": {
            "a_singular": regularity.a_singular,
            "t_singular": regularity.t_singular,
            "eps_hint": regularity.eps_hint,
        },
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("gain sets serialize"));
    Ok(exit::OK)
}

fn write_run(dir: &Path, stem: &str, cfg: &LoadedConfig, run: &Run, signals: &[SignalId]) -> Result<(), Error> {
    let h = header(cfg, run.mode);
    emit_csv(&run.trajectory, dir.join(format!("{stem}_{}.csv", run.mode.label())), cfg.output.decimation, &h)?;
    let m = metrics::trajectory_metrics(
        &run.trajectory,
        signals,
        cfg.system.f_nom_hz(),
        cfg.scenario.disturbance.onset_s(),
    )?;
    write_text(dir.join(format!("{stem}_{}_metrics.csv", run.mode.label())), &format_metrics_csv(&m, &h))
}

fn simulate(
    path: &Path,
    out: Option<PathBuf>,
    controller: Option<ControllerMode>,
    kd: Option<f64>,
    seed: Option<u64>,
) -> Result<i32, Error> {
    let cfg = load(path, seed, kd)?;
    let mode = controller.unwrap_or(cfg.controller.mode);
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    ensure_dir(&dir)?;
    let run = experiment::run_modes(&cfg.system, &cfg.controller, &cfg.scenario, &[mode])?.remove(0);
    let signals = SignalId::all_for(cfg.system.n_areas());
    write_run(&dir, "trajectory", &cfg, &run, &signals)?;
    let m = metrics::trajectory_metrics(
        &run.trajectory,
        &signals,
        cfg.system.f_nom_hz(),
        cfg.scenario.disturbance.onset_s(),
    )?;
    println!("controller: {}", mode.label());
    for s in m {
        println!("{:<12} peak {:.6}  transient {} s", s.signal.to_string(), s.peak_deviation, s.transient);
    }
    println!("wrote {}", dir.display());
    Ok(exit::OK)
}

/// Reference values are shown only for the two-area step-load case they describe.
fn shows_reference(cfg: &LoadedConfig) -> bool {
    cfg.system.n_areas() == 2 && cfg.scenario.disturbance == experiment::step_load_disturbance()
}

fn table_signals(n_areas: usize) -> Vec<SignalId> {
    if n_areas == 2 {
        SignalId::two_area_rows()
    } else {
        SignalId::all_for(n_areas)
    }
}

fn compare(
    path: &Path,
    controllers: &[ControllerMode],
    out: Option<PathBuf>,
    kd: Option<f64>,
    seed: Option<u64>,
) -> Result<i32, Error> {
    let [base, test] = controllers else {
        return Err(Error::Design(format!("--controllers needs exactly two entries, got {}", controllers.len())));
    };
    let cfg = load(path, seed, kd)?;
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    ensure_dir(&dir)?;
    let signals = table_signals(cfg.system.n_areas());
    let cmp = experiment::compare(&cfg.system, &cfg.controller, &cfg.scenario, *base, *test, &signals)?;
    write_run(&dir, "compare", &cfg, &cmp.base, &signals)?;
    write_run(&dir, "compare", &cfg, &cmp.test, &signals)?;
    let rendered = render_table(&cmp.table, shows_reference(&cfg));
    write_tables(&dir, "comparison", &rendered)?;
    print_kd(&cmp.base);
    print!("{}", rendered.text);
    Ok(exit::OK)
}

fn print_kd(run: &Run) {
    if let Some(kd) = run.gains.kd {
        println!("FD gain kd = {kd}");
    }
}

fn write_tables(dir: &Path, stem: &str, t: &RenderedTable) -> Result<(), Error> {
    write_text(dir.join(format!("{stem}.txt")), &t.text)?;
    write_text(dir.join(format!("{stem}.csv")), &t.csv)
}

fn verify(path: &Path, samples: usize, seed: Option<u64>) -> Result<i32, Error> {
    let cfg = load(path, seed, None)?;
    let results = checks::run_suite(&cfg, cfg.seed(), samples);
    let mut failed = 0;
    for r in &results {
        println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        failed += usize::from(!r.passed);
    }
    println!("{} of {} checks passed", results.len() - failed, results.len());
    Ok(if failed == 0 { exit::OK } else { exit::NUMERICAL })
}

/// Baseline-vs-test table from two finished runs.
fn table_for(cfg: &LoadedConfig, base: &Run, test: &Run, signals: &[SignalId]) -> Result<ComparisonTable, Error> {
    Ok(ComparisonTable::from_trajectories(
        base.mode.label(),
        &base.trajectory,
        test.mode.label(),
        &test.trajectory,
        signals,
        cfg.system.f_nom_hz(),
        cfg.scenario.disturbance.onset_s(),
    )?)
}

fn reproduce(exp: Experiment, out: &Path, seed: u64) -> Result<i32, Error> {
    ensure_dir(out)?;
    let cfg = exp.config(seed);
    let signals = exp.signals();
    let (noisy, clean): (Vec<ControllerMode>, Vec<ControllerMode>) =
        exp.modes().iter().partition(|m| **m == ControllerMode::SdfMeasured);
    let mut runs = experiment::run_modes(&cfg.system, &cfg.controller, &cfg.scenario, &clean)?;
    let stem = format!("experiment_{}", exp.id());
    for run in &runs {
        write_run(out, &stem, &cfg, run, &signals)?;
    }
    for mode in noisy {
        let ncfg = exp.config_for(mode, seed);
        let run = experiment::run_modes(&ncfg.system, &ncfg.controller, &ncfg.scenario, &[mode])?.remove(0);
        write_run(out, &stem, &ncfg, &run, &signals)?;
        runs.push(run);
    }
    let fd = &runs[0];
    print_kd(fd);
    for test in &runs[1..] {
        let table = table_for(&cfg, fd, test, &signals)?;
        let rendered = render_table(&table, exp == Experiment::StepLoad && test.mode == ControllerMode::SdfExact);
        write_tables(out, &format!("{stem}_fd_vs_{}", test.mode.label()), &rendered)?;
        println!("\n{} vs {}", fd.mode.label(), test.mode.label());
        print!("{}", rendered.text);
    }
    println!("\nwrote {}", out.display());
    Ok(exit::OK)
}
