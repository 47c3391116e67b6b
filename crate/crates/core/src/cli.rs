//! Command-line front end: resolves a scenario against flags, dispatches to
//! an analysis, and writes a self-describing run directory.
//!
//! Precedence: a flag overrides the scenario key it maps to, which overrides
//! the built-in default. The resolved scenario is stored in `manifest.json`;
//! passing that file back through `--scenario` repeats the run.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    calibrate_beta, convergence_table, evolve_grid, mixing_time_tv, welfare_convergence_time,
    Start, TableParams, WelfareTarget,
};
use crate::bounds::{
    beta_lower_bound, check_theorem1_conditions, check_theorem2_conditions, theorem1_report,
    ChurnCheck, TheoremReport,
};
use crate::error::{Error, Result};
use crate::game::properties::{lipschitz_estimate, lipschitz_sampled};
use crate::game::{GameSpec, StateSpace};
use crate::kernel::{stationary_closed_form, stationary_numeric, Distribution, Dynamic, Kernel};
use crate::report::{Cell, RunDir};
use crate::scenario::{
    AnalysisSection, BoundsSection, CalibrateSection, ChurnSection, Scenario, SimulateSection,
    StartKind, TargetKind,
};
use crate::simulate::experiments::{
    churn_study, example4_band, example5_sweep, example6_sensor, sensor_crossover, BandParams,
    ChurnStudyParams, SensorParams, SweepParams,
};
use crate::simulate::{
    replicate_rng, run_replicates, simulate_time_varying, ChurnOptions, SimOptions, Summary,
    DEFAULT_SAMPLE_DT,
};

/// Exit status for a malformed scenario or flag.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for a numerical stage that did not converge.
pub const EXIT_NUMERICAL: i32 = 3;

const DEFAULT_REPLICATES: usize = 100;
const DEFAULT_HORIZON: f64 = 100.0;
const DEFAULT_FRACTION: f64 = 0.98;
const LIPSCHITZ_SAMPLES: u64 = 200_000;

#[derive(Debug, Parser)]
#[command(
    name = "semianon",
    version,
    about = "Log-linear learning on semi-anonymous potential games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Transition kernel of the aggregate chain.
    Kernel,
    /// Stationary distribution.
    Stationary,
    /// Distribution over time from the initial condition.
    Evolve,
    /// Total-variation mixing time.
    Mix,
    /// Time until the expected welfare reaches a target.
    Convtime,
    /// Rationality giving a target share of the maximum welfare.
    Calibrate,
    /// Monte Carlo replicates.
    Simulate,
    /// Simulation with agents arriving and leaving; without a game in the
    /// scenario, the built-in slow-versus-fast churn study.
    Churn,
    /// Rationality and time bounds, and the hypothesis checks.
    Bounds,
    /// Rationality and expected updates on the three-population game.
    Table1,
    /// Convergence time against player count, exponential welfares.
    Example4,
    /// Convergence time against action-set size.
    Example5,
    /// Sensor-target iterations under both dynamics.
    Example6,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Stationary => "stationary",
            Command::Evolve => "evolve",
            Command::Mix => "mix",
            Command::Convtime => "convtime",
            Command::Calibrate => "calibrate",
            Command::Simulate => "simulate",
            Command::Churn => "churn",
            Command::Bounds => "bounds",
            Command::Table1 => "table1",
            Command::Example4 => "example4",
            Command::Example5 => "example5",
            Command::Example6 => "example6",
        }
    }

    fn builtin(self) -> bool {
        matches!(
            self,
            Command::Table1 | Command::Example4 | Command::Example5 | Command::Example6
        )
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Flags {
    /// Scenario file (TOML), or a manifest.json of an earlier run.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Run directory [default: runs/<subcommand>].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed; replicate i uses stream i
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Size of the worker pool.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Rationality; calibrated from --target when unset
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Target share of the maximum welfare.
    #[arg(long, global = true)]
    pub target: Option<f64>,
    /// Tolerance for convergence, mixing and bounds
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Monte Carlo replicates
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    /// Wall-clock horizon.
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// mlll, lll or prior.
    #[arg(long, global = true)]
    pub dynamic: Option<String>,
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::InvalidArgument(_)
        | Error::InvalidGame(_)
        | Error::InvalidState(_)
        | Error::CardinalityExceeded { .. }
        | Error::UnsupportedDynamic(_)
        | Error::DegeneratePotential { .. }
        | Error::EmptyPopulation { .. }
        | Error::Io(_) => EXIT_CONFIG,
        Error::NotConverged { .. }
        | Error::TruncationOverflow { .. }
        | Error::NotMixed { .. }
        | Error::Infeasible { .. }
        | Error::Unreachable { .. } => EXIT_NUMERICAL,
        _ => 1,
    }
}

/// Parse `args` (program name first), run, and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<String> = args
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli, &argv) {
        Ok(dir) => {
            eprintln!("wrote {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Run the command; returns the run directory.
pub fn run(cli: &Cli, argv: &[String]) -> Result<PathBuf> {
    let cmd = cli.command;
    let flags = &cli.flags;
    let loaded = match &flags.scenario {
        Some(p) => Scenario::load(p),
        None => Ok(Scenario::empty()),
    };
    let out = flags
        .out
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(cmd.name()));
    let mut dir = RunDir::create(&out)?;
    // a scenario that fails to load still leaves a manifest recording why
    let (mut sc, loaded) = match loaded {
        Ok(sc) => (sc, Ok(())),
        Err(e) => (Scenario::empty(), Err(e)),
    };
    let threads = flags.threads.or(sc.threads);
    if threads == Some(0) {
        return Err(config("--threads", "must be at least 1"));
    }
    let result = loaded
        .and_then(|()| resolve(cmd, flags, &mut sc))
        .and_then(|()| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cmd, &mut sc, &mut dir))
        });
    let manifest = json!({
        "tool": "semianon",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cmd.name(),
        "argv": argv,
        "flags": flags,
        "threads": threads,
        "rng": "ChaCha8, keyed by seed, one stream per replicate index",
        "scenario": &sc,
        "outputs": dir.files(),
        "status": match &result {
            Ok(()) => json!({"ok": true, "exit_code": 0}),
            Err(e) => json!({"ok": false, "exit_code": exit_code(e), "error": e.to_string()}),
        },
    });
    dir.write_json("manifest.json", &manifest)?;
    result.map(|()| out)
}

fn config(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        line: None,
        message: message.into(),
    }
}

/// Fold flags into the scenario section the command reads.
fn resolve(cmd: Command, f: &Flags, sc: &mut Scenario) -> Result<()> {
    if let Some(d) = &f.dynamic {
        sc.dynamic = Some(Dynamic::parse(d).ok_or_else(|| {
            config(
                "--dynamic",
                format!("unknown dynamic '{d}' (mlll, lll, prior)"),
            )
        })?);
    }
    if let Some(s) = f.seed {
        sc.seed = Some(s);
    }
    if let Some(b) = f.beta {
        sc.beta = Some(b);
    }
    if let Some(t) = f.threads {
        sc.threads = Some(t);
    }
    if let Some(t) = f.target {
        if !(t > 0.0 && t < 1.0) {
            return Err(config("--target", format!("must lie in (0,1), got {t}")));
        }
    }
    if !cmd.builtin() && !(cmd == Command::Churn && !sc.has_game()) && !sc.has_game() {
        return Err(config(
            "population",
            format!("{} needs a scenario with a game (--scenario)", cmd.name()),
        ));
    }
    let seed = sc.seed;
    match cmd {
        Command::Kernel | Command::Stationary => {}
        Command::Evolve | Command::Mix | Command::Convtime => {
            let a = sc.analysis.get_or_insert_with(AnalysisSection::default);
            if f.eps.is_some() {
                a.eps = f.eps;
            }
            if f.horizon.is_some() {
                a.horizon = f.horizon;
            }
        }
        Command::Calibrate => {
            if let Some(t) = f.target {
                sc.calibrate = Some(CalibrateSection { target: t });
            }
            sc.calibrate.get_or_insert(CalibrateSection {
                target: DEFAULT_FRACTION,
            });
        }
        Command::Simulate => {
            let s = sc.simulate.get_or_insert_with(SimulateSection::default);
            s.replicates = f.replicates.or(s.replicates).or(Some(DEFAULT_REPLICATES));
            s.horizon = f.horizon.or(s.horizon).or(Some(DEFAULT_HORIZON));
            s.sample_dt = s.sample_dt.or(Some(DEFAULT_SAMPLE_DT));
            sc.seed = seed.or(Some(0));
        }
        Command::Churn if sc.has_game() => {
            sc.inline_schedule()?;
            let c = sc.churn.get_or_insert_with(ChurnSection::default);
            c.replicates = f.replicates.or(c.replicates).or(Some(DEFAULT_REPLICATES));
            c.horizon = f.horizon.or(c.horizon).or(Some(DEFAULT_HORIZON));
            c.sample_dt = c.sample_dt.or(Some(DEFAULT_SAMPLE_DT));
            sc.seed = seed.or(Some(0));
        }
        Command::Churn => {
            let p = sc.churn_study.get_or_insert_with(ChurnStudyParams::default);
            set(&mut p.replicates, f.replicates);
            set(&mut p.eps, f.eps);
            set(&mut p.seed, seed);
            set(&mut p.beta, f.beta);
        }
        Command::Bounds => {
            sc.inline_schedule()?;
            let b = sc.bounds.get_or_insert_with(BoundsSection::default);
            if f.eps.is_some() {
                b.eps = f.eps;
            }
            b.eps = b.eps.or(Some(0.1));
        }
        Command::Table1 => {
            let p = sc.table1.get_or_insert_with(TableParams::default);
            set(&mut p.fraction, f.target);
            set(&mut p.eps, f.eps);
        }
        Command::Example4 => {
            let p = sc.example4.get_or_insert_with(BandParams::default);
            set(&mut p.fraction, f.target);
            set(&mut p.eps, f.eps);
            set(&mut p.replicates, f.replicates);
            set(&mut p.seed, seed);
        }
        Command::Example5 => {
            let p = sc.example5.get_or_insert_with(SweepParams::default);
            set(&mut p.fraction, f.target);
            set(&mut p.replicates, f.replicates);
            set(&mut p.seed, seed);
        }
        Command::Example6 => {
            let p = sc.example6.get_or_insert_with(SensorParams::default);
            set(&mut p.fraction, f.target);
            set(&mut p.replicates, f.replicates);
            set(&mut p.seed, seed);
        }
    }
    Ok(())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn dispatch(cmd: Command, sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    match cmd {
        Command::Kernel => kernel_cmd(sc, dir),
        Command::Stationary => stationary_cmd(sc, dir),
        Command::Evolve => evolve_cmd(sc, dir),
        Command::Mix => mix_cmd(sc, dir),
        Command::Convtime => convtime_cmd(sc, dir),
        Command::Calibrate => calibrate_cmd(sc, dir),
        Command::Simulate => simulate_cmd(sc, dir),
        Command::Churn if sc.has_game() => churn_cmd(sc, dir),
        Command::Churn => churn_study_cmd(sc, dir),
        Command::Bounds => bounds_cmd(sc, dir),
        Command::Table1 => table1_cmd(sc, dir),
        Command::Example4 => example4_cmd(sc, dir),
        Command::Example5 => example5_cmd(sc, dir),
        Command::Example6 => example6_cmd(sc, dir),
    }
}

/// The game at the scenario's rationality, calibrating it first when only
/// a target is given. The calibrated value is written back.
fn game_with_beta(sc: &mut Scenario) -> Result<GameSpec> {
    if sc.beta.is_none() {
        let Some(c) = &sc.calibrate else {
            return Err(config(
                "beta",
                "set beta (or --beta), or [calibrate] target to derive it",
            ));
        };
        let cal = calibrate_beta(&sc.game_at(0.0)?, sc.dynamic(), c.target)?;
        sc.beta = Some(cal.beta);
    }
    sc.game()
}

fn stationary_of(kernel: &Kernel) -> Result<Distribution> {
    match kernel.dynamic() {
        Dynamic::Prior => stationary_numeric(kernel),
        d => stationary_closed_form(kernel.space(), kernel.beta(), d),
    }
}

fn build_kernel(sc: &mut Scenario) -> Result<Kernel> {
    let game = game_with_beta(sc)?;
    let space = Arc::new(StateSpace::enumerate(&game)?);
    Kernel::build(&game, space, sc.dynamic())
}

fn state_label(counts: &[u32], game: &GameSpec) -> String {
    (0..game.m())
        .map(|l| {
            counts[game.slots(l)]
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

fn kernel_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let k = build_kernel(sc)?;
    let mut header = k.header_json();
    header["max_row_error"] = json!(k.max_row_error());
    dir.write_json("kernel.json", &header)?;
    dir.write_with("kernel.tsv", |w| k.write_triplets(w))?;
    let space = k.space();
    let rows: Vec<Vec<Cell>> = (0..k.len())
        .map(|i| {
            vec![
                i.into(),
                state_label(space.counts(i), space.game()).into(),
                space.potentials()[i].into(),
                k.move_probability(i).into(),
            ]
        })
        .collect();
    dir.write_csv(
        "states.csv",
        &["index", "state", "potential", "move_probability"],
        &rows,
    )
}

fn stationary_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let k = build_kernel(sc)?;
    let pi = stationary_of(&k)?;
    let space = k.space();
    let phi = space.potentials();
    let rows: Vec<Vec<Cell>> = (0..k.len())
        .map(|i| {
            vec![
                i.into(),
                state_label(space.counts(i), space.game()).into(),
                phi[i].into(),
                pi.probs()[i].into(),
            ]
        })
        .collect();
    dir.write_csv(
        "stationary.csv",
        &["index", "state", "potential", "probability"],
        &rows,
    )?;
    dir.write_json(
        "stationary.json",
        &json!({
            "dynamic": k.dynamic(),
            "beta": k.beta(),
            "method": if k.dynamic() == Dynamic::Prior { "numeric" } else { "closed_form" },
            "expected_potential": pi.expectation(phi),
            "max_potential": space.max_potential(),
            "min_probability": pi.min_prob(),
            "probabilities": pi.probs(),
        }),
    )
}

/// Initial distribution of the exact analyses.
fn start_distribution(sc: &Scenario, kernel: &Kernel) -> Result<Distribution> {
    let start = sc.analysis.as_ref().map(|a| a.start).unwrap_or_default();
    match start {
        StartKind::Uniform => Ok(Distribution::uniform(kernel.len())),
        StartKind::Initial | StartKind::WorstCase => {
            let x = sc.initial_state(kernel.game())?;
            let i = kernel
                .space()
                .index(&x)
                .ok_or_else(|| config("initial", "state not in the space"))?;
            Ok(Distribution::point_mass(kernel.len(), i))
        }
    }
}

fn evolve_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let k = build_kernel(sc)?;
    let pi = stationary_of(&k)?;
    let a = sc.analysis.clone().unwrap_or_default();
    let wall: Vec<f64> = match &a.times {
        Some(t) => t.clone(),
        None => {
            let h = a.horizon.ok_or_else(|| {
                config(
                    "analysis.horizon",
                    "evolve needs analysis.times or a horizon",
                )
            })?;
            let points = a.points.unwrap_or(51).max(2);
            (0..points)
                .map(|i| h * i as f64 / (points - 1) as f64)
                .collect()
        }
    };
    let ticks: Vec<f64> = wall.iter().map(|t| t * k.global_rate()).collect();
    let mu0 = start_distribution(sc, &k)?;
    let ev = evolve_grid(&k, &mu0, &ticks, &pi)?;
    let rows: Vec<Vec<Cell>> = (0..ev.times.len())
        .map(|i| {
            vec![
                ev.wall_times[i].into(),
                ev.times[i].into(),
                ev.expected_potential[i].into(),
                ev.tv_to_stationary[i].into(),
            ]
        })
        .collect();
    dir.write_csv(
        "evolve.csv",
        &[
            "wall_time",
            "ticks",
            "expected_potential",
            "tv_to_stationary",
        ],
        &rows,
    )?;
    dir.write_json(
        "evolve.json",
        &json!({
            "dynamic": k.dynamic(),
            "beta": k.beta(),
            "global_rate": k.global_rate(),
            "wall_times": ev.wall_times,
            "ticks": ev.times,
            "expected_potential": ev.expected_potential,
            "tv_to_stationary": ev.tv_to_stationary,
            "final_distribution": ev.dists.last().map(Distribution::probs),
        }),
    )
}

fn mix_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let k = build_kernel(sc)?;
    let pi = stationary_of(&k)?;
    let a = sc.analysis.clone().unwrap_or_default();
    let eps = a.eps.unwrap_or(0.25);
    let starts: Vec<(String, Distribution)> = match a.start {
        StartKind::WorstCase => (0..k.len())
            .map(|i| {
                (
                    state_label(k.space().counts(i), k.game()),
                    Distribution::point_mass(k.len(), i),
                )
            })
            .collect(),
        _ => vec![("start".to_string(), start_distribution(sc, &k)?)],
    };
    let times = starts
        .par_iter()
        .map(|(_, mu)| mixing_time_tv(&k, mu, &pi, eps))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<Cell>> = starts
        .iter()
        .zip(&times)
        .map(|((label, _), t)| {
            vec![
                label.clone().into(),
                eps.into(),
                t.ticks.into(),
                t.updates.into(),
                t.wall.into(),
            ]
        })
        .collect();
    dir.write_csv(
        "mix.csv",
        &["start", "eps", "ticks", "updates", "wall_time"],
        &rows,
    )?;
    let worst = times
        .iter()
        .copied()
        .max_by(|a, b| a.ticks.total_cmp(&b.ticks));
    dir.write_json(
        "mix.json",
        &json!({"dynamic": k.dynamic(), "beta": k.beta(), "eps": eps, "start": a.start,
                "worst": worst, "times": times}),
    )
}

fn convtime_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let k = build_kernel(sc)?;
    let pi = stationary_of(&k)?;
    let a = sc.analysis.clone().unwrap_or_default();
    let eps = a.eps.unwrap_or(0.05);
    let target = match a.target {
        TargetKind::BelowStationary => WelfareTarget::BelowStationary(eps),
        TargetKind::BelowMax => WelfareTarget::BelowMax(eps),
        TargetKind::Absolute => WelfareTarget::Absolute(
            a.level
                .ok_or_else(|| config("analysis.level", "an absolute target needs a level"))?,
        ),
    };
    let start = match a.start {
        StartKind::WorstCase => Start::WorstCase,
        StartKind::Uniform => Start::From(Distribution::uniform(k.len())),
        StartKind::Initial => {
            let x = sc.initial_state(k.game())?;
            let i = k
                .space()
                .index(&x)
                .ok_or_else(|| config("initial", "state not in the space"))?;
            Start::WorstOf(vec![i])
        }
    };
    let ct = welfare_convergence_time(&k, &pi, target, &start)?;
    dir.write_csv(
        "convtime.csv",
        &[
            "dynamic",
            "beta",
            "target",
            "stationary_expectation",
            "ticks",
            "updates",
            "wall_time",
        ],
        &[vec![
            k.dynamic().name().into(),
            k.beta().into(),
            ct.target.into(),
            ct.stationary_expectation.into(),
            ct.time.ticks.into(),
            ct.time.updates.into(),
            ct.time.wall.into(),
        ]],
    )?;
    let slowest = ct
        .slowest_start
        .map(|i| state_label(k.space().counts(i), k.game()));
    dir.write_json(
        "convtime.json",
        &json!({"dynamic": k.dynamic(), "beta": k.beta(), "result": ct, "slowest_state": slowest}),
    )
}

fn calibrate_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let target = sc.calibrate.as_ref().map_or(DEFAULT_FRACTION, |c| c.target);
    let cal = calibrate_beta(&sc.game_at(0.0)?, sc.dynamic(), target)?;
    dir.write_csv(
        "calibrate.csv",
        &[
            "dynamic",
            "target_fraction",
            "beta",
            "expected_potential",
            "max_potential",
        ],
        &[vec![
            sc.dynamic().name().into(),
            target.into(),
            cal.beta.into(),
            cal.expected_potential.into(),
            cal.max_potential.into(),
        ]],
    )?;
    dir.write_json(
        "calibrate.json",
        &json!({"dynamic": sc.dynamic(), "calibration": cal}),
    )
}

fn simulate_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let game = game_with_beta(sc)?;
    let x0 = sc.initial_state(&game)?;
    let s = sc.simulate.clone().unwrap_or_default();
    let mut opts = SimOptions::new(s.horizon.unwrap_or(DEFAULT_HORIZON));
    opts.sample_dt = s.sample_dt.unwrap_or(DEFAULT_SAMPLE_DT);
    opts.hit_level = s.hit_level;
    opts.stop_at_hit = s.stop_at_hit;
    opts.max_events = s.max_events;
    let seed = sc.seed.unwrap_or(0);
    let r = run_replicates(
        &game,
        sc.dynamic(),
        &x0,
        &opts,
        s.replicates.unwrap_or(DEFAULT_REPLICATES),
        seed,
    )?;
    let rows: Vec<Vec<Cell>> = (0..r.sample_times.len())
        .map(|i| {
            vec![
                r.sample_times[i].into(),
                r.mean_welfare[i].into(),
                r.std_welfare[i].into(),
                r.ci95_welfare[i].into(),
            ]
        })
        .collect();
    dir.write_csv(
        "simulate.csv",
        &["time", "mean_welfare", "std_welfare", "ci95_welfare"],
        &rows,
    )?;
    let reps: Vec<Vec<Cell>> = (0..r.replicates)
        .map(|i| {
            vec![
                i.into(),
                r.streams[i].into(),
                r.update_counts[i].into(),
                r.move_counts[i].into(),
                r.hit_times[i].into(),
                r.hit_events[i].map_or(Cell::Missing, Cell::from),
            ]
        })
        .collect();
    dir.write_csv(
        "replicates.csv",
        &[
            "replicate",
            "stream",
            "updates",
            "moves",
            "hit_time",
            "hit_updates",
        ],
        &reps,
    )?;
    dir.write_json(
        "simulate.json",
        &json!({"report": r, "hit_time": r.hit_summary(), "hit_updates": r.hit_event_summary()}),
    )
}

fn churn_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let game = game_with_beta(sc)?;
    let x0 = sc.initial_state(&game)?;
    let events = sc.churn_events()?;
    let c = sc.churn.clone().unwrap_or_default();
    let mut opts = ChurnOptions::new(c.horizon.unwrap_or(DEFAULT_HORIZON));
    opts.sample_dt = c.sample_dt.unwrap_or(DEFAULT_SAMPLE_DT);
    opts.dynamic = sc.dynamic();
    opts.strict = c.strict;
    opts.normalize = c.normalize;
    opts.average_from = c.average_from;
    opts.fast_forward = c.fast_forward;
    opts.exact_transients = c.exact_transients;
    let seed = sc.seed.unwrap_or(0);
    let replicates = c.replicates.unwrap_or(DEFAULT_REPLICATES);
    let traces = (0..replicates)
        .into_par_iter()
        .map(|i| {
            simulate_time_varying(
                &game,
                x0.counts(),
                &events,
                &opts,
                &mut replicate_rng(seed, i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = traces.first().map_or(0, |t| t.sample_times.len());
    let rows: Vec<Vec<Cell>> = (0..grid)
        .map(|g| {
            let col: Vec<f64> = traces.iter().map(|t| t.potential[g]).collect();
            let s = Summary::of(&col);
            let sizes = traces[0].sizes[g]
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(" ");
            vec![
                traces[0].sample_times[g].into(),
                sizes.into(),
                s.mean.into(),
                s.ci95.into(),
                traces[0].max_potential[g].into(),
            ]
        })
        .collect();
    dir.write_csv(
        "churn.csv",
        &["time", "sizes", "mean_potential", "ci95", "max_potential"],
        &rows,
    )?;
    let averages: Vec<f64> = traces.iter().map(|t| t.window_average()).collect();
    let reps: Vec<Vec<Cell>> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vec![
                i.into(),
                t.window_average().into(),
                t.churn_applied.into(),
                t.churn_skipped.into(),
                t.events.into(),
                t.moves.into(),
            ]
        })
        .collect();
    dir.write_csv(
        "replicates.csv",
        &[
            "replicate",
            "window_average",
            "churn_applied",
            "churn_skipped",
            "updates",
            "moves",
        ],
        &reps,
    )?;
    dir.write_json(
        "churn.json",
        &json!({
            "seed": seed,
            "replicates": replicates,
            "events": events.len(),
            "window_average": Summary::of(&averages),
            "window_split": traces.iter().map(|t| t.window_split()).collect::<Vec<_>>(),
            "final_sizes": traces.iter().map(|t| &t.final_sizes).collect::<Vec<_>>(),
        }),
    )
}

fn report_rows(name: &str, r: &TheoremReport) -> Vec<Vec<Cell>> {
    r.conditions
        .iter()
        .map(|(k, c)| {
            vec![
                name.into(),
                k.clone().into(),
                c.pass.into(),
                c.margin.into(),
                c.detail.clone().into(),
            ]
        })
        .collect()
}

fn churn_study_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let p = sc.churn_study.clone().unwrap_or_default();
    let study = churn_study(&p)?;
    let mut rows = Vec::new();
    for (name, o) in [("slow", &study.slow), ("fast", &study.fast)] {
        rows.push(vec![
            name.into(),
            o.spacing.into(),
            o.events.into(),
            o.report
                .conditions
                .iter()
                .all(|(k, c)| c.pass || k == "rationality")
                .into(),
            o.baseline.into(),
            o.excess.mean.into(),
            o.excess.ci95.into(),
            o.time_average.into(),
            o.plain_average.mean.into(),
        ]);
    }
    dir.write_csv(
        "churn_study.csv",
        &[
            "schedule",
            "spacing",
            "events",
            "hypotheses_pass",
            "baseline",
            "excess_mean",
            "excess_ci95",
            "time_average",
            "plain_average",
        ],
        &rows,
    )?;
    let mut cond = report_rows("slow", &study.slow.report);
    cond.extend(report_rows("fast", &study.fast.report));
    dir.write_csv(
        "conditions.csv",
        &["schedule", "condition", "pass", "margin", "detail"],
        &cond,
    )?;
    dir.write_text(
        "conditions.txt",
        &format!(
            "slow schedule\n{}\nfast schedule\n{}",
            study.slow.report.to_text(),
            study.fast.report.to_text()
        ),
    )?;
    dir.write_json(
        "churn_study.json",
        &json!({"study": study, "fast_is_worse": study.fast_is_worse()}),
    )
}

fn bounds_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let game = game_with_beta(sc)?;
    let b = sc.bounds.clone().unwrap_or_default();
    let eps = b.eps.unwrap_or(0.1);
    let t1 = match StateSpace::enumerate(&game) {
        Ok(space) => check_theorem1_conditions(&space, eps, b.constants)?,
        Err(Error::CardinalityExceeded { .. }) => {
            let mut rng = replicate_rng(sc.seed.unwrap_or(0), 0);
            let lip = lipschitz_sampled(&game, LIPSCHITZ_SAMPLES, &mut rng);
            theorem1_report(&game, lip, eps, b.constants)?
        }
        Err(e) => return Err(e),
    };
    let mut rows = report_rows("static", &t1);
    let mut text = format!("static game\n{}", t1.to_text());
    let events = sc.churn_events()?;
    let t2 = if events.is_empty() {
        None
    } else {
        let r = check_theorem2_conditions(&ChurnCheck {
            game0: &game,
            churn: &events,
            lambda: t1.lipschitz,
            eps,
            constants: b.constants,
            spacing_override: None,
        })?;
        rows.extend(report_rows("churn", &r));
        text.push_str(&format!("\nchurn schedule\n{}", r.to_text()));
        Some(r)
    };
    dir.write_csv(
        "bounds.csv",
        &["setting", "condition", "pass", "margin", "detail"],
        &rows,
    )?;
    dir.write_text("bounds.txt", &text)?;
    let lip_exact = StateSpace::enumerate(&game)
        .ok()
        .map(|s| lipschitz_estimate(&s).lambda);
    dir.write_json(
        "bounds.json",
        &json!({
            "m": game.m(),
            "s": game.s(),
            "n": game.n(),
            "beta_lower_bound": beta_lower_bound(game.m(), game.s(), t1.lipschitz, eps),
            "lipschitz_exact": lip_exact,
            "static": t1,
            "churn": t2,
        }),
    )
}

fn algorithm_name(d: Dynamic) -> &'static str {
    match d {
        Dynamic::Lll => "standard log-linear learning",
        Dynamic::Prior => "cross-population variant",
        Dynamic::Mlll => "modified log-linear learning",
    }
}

fn table1_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let p = sc.table1.clone().unwrap_or_default();
    let rows = convergence_table(&p)?;
    let cells: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                algorithm_name(r.dynamic).into(),
                r.n3.into(),
                r.beta.into(),
                r.welfare_percent.into(),
                r.updates.into(),
            ]
        })
        .collect();
    dir.write_csv(
        "table1.csv",
        &[
            "algorithm",
            "n3",
            "beta",
            "expected_welfare_percent",
            "expected_updates",
        ],
        &cells,
    )?;
    dir.write_json("table1.json", &json!({"params": p, "rows": rows}))
}

fn example4_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let p = sc.example4.clone().unwrap_or_default();
    let rows = example4_band(&p)?;
    let cells: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.into(),
                r.beta.into(),
                r.stationary_welfare.into(),
                r.target.into(),
                r.time.into(),
                r.n_log_log_n.into(),
                r.ratio().into(),
                r.replicate_hits.mean.into(),
                r.replicate_hits.ci95.into(),
            ]
        })
        .collect();
    dir.write_csv(
        "example4.csv",
        &[
            "n",
            "beta",
            "stationary_welfare",
            "target",
            "time",
            "n_log_log_n",
            "ratio",
            "replicate_hit_mean",
            "replicate_hit_ci95",
        ],
        &cells,
    )?;
    dir.write_json("example4.json", &json!({"params": p, "rows": rows}))
}

fn example5_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let p = sc.example5.clone().unwrap_or_default();
    let rows = example5_sweep(&p)?;
    let cells: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k.into(),
                r.n.into(),
                r.beta.into(),
                r.max_welfare.into(),
                r.target.into(),
                r.hit_times.mean.into(),
                r.hit_times.ci95.into(),
                r.misses.into(),
            ]
        })
        .collect();
    dir.write_csv(
        "example5.csv",
        &[
            "k",
            "n",
            "beta",
            "max_welfare",
            "target",
            "hit_time_mean",
            "hit_time_ci95",
            "misses",
        ],
        &cells,
    )?;
    dir.write_json("example5.json", &json!({"params": p, "rows": rows}))
}

fn example6_cmd(sc: &mut Scenario, dir: &mut RunDir) -> Result<()> {
    let p = sc.example6.clone().unwrap_or_default();
    let rows = example6_sensor(&p)?;
    let cells: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n_w.into(),
                r.dynamic.name().into(),
                r.beta.into(),
                r.max_welfare.into(),
                r.start_welfare.into(),
                r.iterations.mean.into(),
                r.iterations.ci95.into(),
                r.misses.into(),
            ]
        })
        .collect();
    dir.write_csv(
        "example6.csv",
        &[
            "n_w",
            "dynamic",
            "beta",
            "max_welfare",
            "start_welfare",
            "iterations_mean",
            "iterations_ci95",
            "misses",
        ],
        &cells,
    )?;
    dir.write_json(
        "example6.json",
        &json!({"params": p, "rows": rows, "crossover_n_w": sensor_crossover(&rows)}),
    )
}
