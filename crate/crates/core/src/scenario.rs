//! Scenario files: a versioned TOML description of a game, the dynamic, and
//! the settings of every analysis the command-line tool runs.
//!
//! ```toml
//! schema_version = 1
//! alpha = 0.3333333333333333
//! beta = 1.28                 # or [calibrate] target = 0.98
//! dynamic = "mlll"            # mlll | lll | prior
//! seed = 7
//! initial = [[0, 7], [7, 0], [1]]
//!
//! [[population]]
//! size = 7
//! actions = [0, 1]
//!
//! [welfare]
//! catalog = "example3"        # or one [[welfare.term]] table per resource
//! ```
//!
//! Every parse or validation error names the offending key and, where it
//! can be found in the text, its line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{GibbsEnsemble, SeparableGibbs, TableParams};
use crate::bounds::BoundConstants;
use crate::config::{line_of, toml_error};
use crate::error::{Error, Result};
use crate::game::catalog::{welfare_by_name, CatalogParams};
use crate::game::{AggregateState, GameSpec, PopulationSpec, ResourceTerm, Welfare};
use crate::kernel::Dynamic;
use crate::simulate::experiments::{BandParams, ChurnStudyParams, SensorParams, SweepParams};
use crate::simulate::{load_churn_schedule, ChurnEvent, ChurnKind};

/// Version of the scenario file format.
pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationEntry {
    pub size: u32,
    pub actions: Vec<usize>,
}

/// A catalog welfare with its parameters, or explicit per-resource terms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WelfareEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counted: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub term: Vec<ResourceTerm>,
    /// Rescale the potential onto `[0, 1]`; `beta` is then on that scale.
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    /// Stationary expected welfare as a fraction of the maximum.
    pub target: f64,
}

/// Level a welfare convergence time aims for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// `E_pi[phi] - eps`
    #[default]
    BelowStationary,
    /// `max phi - eps`
    BelowMax,
    /// the fixed `level`
    Absolute,
}

/// Initial condition of the exact analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    /// The `initial` state.
    #[default]
    Initial,
    /// Worst point mass over all states (or the equilibria of large spaces).
    WorstCase,
    Uniform,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Total-variation level for `mix`, welfare gap for `convtime`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default)]
    pub target: TargetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default)]
    pub start: StartKind,
    /// Wall-clock times at which `evolve` reports the distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// Wall-clock horizon of `evolve` when `times` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hit_level: Option<f64>,
    #[serde(default)]
    pub stop_at_hit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChurnSection {
    /// Schedule file, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<PathBuf>,
    /// Inline events, used when no schedule file is given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub event: Vec<ChurnEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub average_from: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fast_forward: Option<f64>,
    #[serde(default)]
    pub exact_transients: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default)]
    pub constants: BoundConstants,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamic: Option<Dynamic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Counts per population and action; every population on its first
    /// action when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub population: Vec<PopulationEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub welfare: Option<WelfareEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub churn: Option<ChurnSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table1: Option<TableParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example4: Option<BandParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example5: Option<SweepParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example6: Option<SensorParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub churn_study: Option<ChurnStudyParams>,

    /// Text the scenario was parsed from, for locating keys.
    #[serde(skip)]
    source: Option<String>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

fn config(key: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        line,
        message: message.into(),
    }
}

/// Line of a dotted key such as `population[1].size` in TOML text.
fn locate(text: &str, key: &str) -> Option<usize> {
    let parts: Vec<&str> = key.split('.').collect();
    let lines: Vec<&str> = text.lines().collect();
    let mut from = 0usize;
    let mut prefix = String::new();
    for (depth, part) in parts.iter().enumerate() {
        let (name, index) = match part.split_once('[') {
            Some((n, rest)) => (n, rest.trim_end_matches(']').parse::<usize>().ok()),
            None => (*part, None),
        };
        let full = if prefix.is_empty() {
            name.to_string()
        } else {
            format!("{prefix}.{name}")
        };
        let last = depth + 1 == parts.len();
        let header = |l: &str| {
            let l = l.trim();
            l == format!("[[{full}]]") || l == format!("[{full}]")
        };
        let assign = |l: &str| {
            l.split_once('=')
                .is_some_and(|(k, _)| k.trim() == name && !l.trim_start().starts_with('['))
        };
        let mut hits = lines
            .iter()
            .enumerate()
            .skip(from)
            .filter(|(_, l)| header(l) || (last && assign(l)));
        let found = match index {
            Some(i) => hits.nth(i),
            None => hits.next(),
        };
        match found {
            Some((i, _)) => from = i,
            None => return None,
        }
        prefix = full;
    }
    Some(from + 1)
}

impl Scenario {
    /// Parse scenario text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sc: Scenario =
            toml::from_str(text).map_err(|e| toml_error(text, &e, "scenario"))?;
        sc.source = Some(text.to_string());
        if sc.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(config(
                "schema_version",
                text.find("schema_version").map(|o| line_of(text, o)),
                format!(
                    "unsupported version {} (expected {SCENARIO_SCHEMA_VERSION})",
                    sc.schema_version
                ),
            ));
        }
        sc.validate()?;
        Ok(sc)
    }

    /// Load a scenario file, or the resolved scenario recorded in a run
    /// manifest (`.json`).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            config(
                "--scenario",
                None,
                format!("cannot read {}: {e}", path.display()),
            )
        })?;
        let mut sc = if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| config("manifest", Some(e.line()), e.to_string()))?;
            let inner = manifest
                .get("scenario")
                .cloned()
                .ok_or_else(|| config("scenario", None, "manifest has no scenario"))?;
            let sc: Scenario = serde_json::from_value(inner)
                .map_err(|e| config("scenario", None, e.to_string()))?;
            sc.validate()?;
            sc
        } else {
            Self::parse(&text)?
        };
        sc.base_dir = path.parent().map(Path::to_path_buf);
        Ok(sc)
    }

    /// Empty scenario, for the built-in studies.
    pub fn empty() -> Self {
        Self {
            schema_version: SCENARIO_SCHEMA_VERSION,
            ..Self::default()
        }
    }

    fn err(&self, key: &str, message: impl Into<String>) -> Error {
        let line = self.source.as_deref().and_then(|t| locate(t, key));
        config(key, line, message)
    }

    fn validate(&self) -> Result<()> {
        for (i, p) in self.population.iter().enumerate() {
            if p.actions.is_empty() {
                return Err(self.err(&format!("population[{i}].actions"), "no actions"));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(self.err("alpha", format!("must be positive, got {a}")));
            }
        }
        if let Some(b) = self.beta {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(self.err("beta", format!("must be nonnegative, got {b}")));
            }
        }
        if let Some(c) = &self.calibrate {
            if !(c.target > 0.0 && c.target < 1.0) {
                return Err(self.err(
                    "calibrate.target",
                    format!("must lie in (0,1), got {}", c.target),
                ));
            }
        }
        if let Some(w) = &self.welfare {
            if w.catalog.is_some() == !w.term.is_empty() {
                return Err(self.err(
                    "welfare",
                    "give exactly one of catalog or [[welfare.term]] tables",
                ));
            }
        }
        if let Some(ch) = &self.churn {
            let mut last = f64::NEG_INFINITY;
            for (i, ev) in ch.event.iter().enumerate() {
                let key = format!("churn.event[{i}].time");
                if !(ev.time.is_finite() && ev.time >= 0.0) || ev.time < last {
                    return Err(self.err(
                        &key,
                        format!("times must be finite, >= 0 and ordered, got {}", ev.time),
                    ));
                }
                if ev.kind == ChurnKind::Depart && ev.action_on_arrival.is_some() {
                    return Err(self.err(
                        &format!("churn.event[{i}].action_on_arrival"),
                        "only arrivals take an action",
                    ));
                }
                last = ev.time;
            }
        }
        Ok(())
    }

    pub fn has_game(&self) -> bool {
        !self.population.is_empty() || self.welfare.is_some()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0)
    }

    pub fn dynamic(&self) -> Dynamic {
        self.dynamic.unwrap_or(Dynamic::Mlll)
    }

    /// The game at rationality `beta`.
    pub fn game_at(&self, beta: f64) -> Result<GameSpec> {
        if self.population.is_empty() {
            return Err(self.err("population", "at least one [[population]] is required"));
        }
        let welfare_entry = self
            .welfare
            .as_ref()
            .ok_or_else(|| self.err("welfare", "a [welfare] table is required"))?;
        let pops: Vec<PopulationSpec> = self
            .population
            .iter()
            .map(|p| PopulationSpec::new(p.size, p.actions.clone()))
            .collect();
        let welfare = match &welfare_entry.catalog {
            Some(name) => {
                let params = CatalogParams {
                    k: welfare_entry.k,
                    counted: welfare_entry.counted.clone(),
                    values: welfare_entry.values.clone(),
                    detection: welfare_entry.detection.clone(),
                };
                welfare_by_name(name, &params, &pops).map_err(|e| match e {
                    Error::Config { key, message, .. } => self.err(&key, message),
                    e => e,
                })?
            }
            None => Welfare::Separable(welfare_entry.term.clone()),
        };
        let game = GameSpec::new(pops, welfare, self.alpha(), beta).map_err(|e| match e {
            Error::InvalidGame(m) => {
                let key = if m.contains("population") {
                    "population"
                } else {
                    "welfare"
                };
                self.err(key, m)
            }
            e => e,
        })?;
        if !welfare_entry.normalize {
            return Ok(game);
        }
        let (lo, hi) = match SeparableGibbs::new(&game) {
            Some(g) => (g.min_potential(), g.max_potential()),
            None => {
                let ens = GibbsEnsemble::from_game(&game);
                (ens.min_potential(), ens.max_potential())
            }
        };
        if hi <= lo {
            return Err(self.err("welfare.normalize", "potential is constant"));
        }
        game.with_welfare(Welfare::Affine {
            inner: Box::new(game.welfare().clone()),
            shift: lo,
            scale: hi - lo,
        })
    }

    /// The game at the scenario's `beta` (zero when unset).
    pub fn game(&self) -> Result<GameSpec> {
        self.game_at(self.beta.unwrap_or(0.0))
    }

    /// Initial aggregate state: `initial` if given, else every population
    /// on its first action.
    pub fn initial_state(&self, game: &GameSpec) -> Result<AggregateState> {
        match &self.initial {
            Some(rows) => AggregateState::new(game, rows.clone())
                .map_err(|e| self.err("initial", e.to_string())),
            None => game.concentrated_state(&vec![0; game.m()]),
        }
    }

    /// Churn events from the schedule file or the inline tables.
    pub fn churn_events(&self) -> Result<Vec<ChurnEvent>> {
        let Some(ch) = &self.churn else {
            return Ok(Vec::new());
        };
        match &ch.schedule {
            Some(p) => {
                let path = match &self.base_dir {
                    Some(d) if p.is_relative() => d.join(p),
                    _ => p.clone(),
                };
                load_churn_schedule(&path).map_err(|e| match e {
                    Error::Io(m) => self.err("churn.schedule", format!("{}: {m}", path.display())),
                    e => e,
                })
            }
            None => Ok(ch.event.clone()),
        }
    }

    /// Resolve a relative path against the scenario's directory.
    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Inline the churn schedule, so the scenario no longer refers to files.
    pub fn inline_schedule(&mut self) -> Result<()> {
        if self.churn.as_ref().is_some_and(|c| c.schedule.is_some()) {
            let events = self.churn_events()?;
            let ch = self.churn.as_mut().expect("checked above");
            ch.schedule = None;
            ch.event = events;
        }
        Ok(())
    }
}
