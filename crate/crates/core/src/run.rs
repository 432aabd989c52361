//! Batch runs: configuration, dispatch, and artifact writing.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dp::cvar::inner_memory_estimate;
use crate::dp::{
    build_s_grid, outer_minimize, solve_cvar_inner_with_budget, solve_eu, solve_risk_neutral, CvarInnerSolution,
    CvarValue, EuSolution, EuVariant, NeutralSolution, DEFAULT_MEMORY_BUDGET,
};
use crate::error::{Error, Result};
use crate::grid::State;
use crate::model::{DisturbanceTable, SystemModel, ValueTable};
use crate::monte_carlo::{simulate_cvar, simulate_eu, simulate_policy, tradeoff_table};
use crate::risk::CostSampleSet;
use crate::safe_sets;
use crate::systems::{
    make_stormwater_with, make_thermostat_with, stormwater_disturbance, thermostat_disturbance, Pedagogical,
    StormwaterConfig, StormwaterParams, ThermostatParams,
};

/// JSON schema of [`RunConfig`], as published alongside the binary.
pub const CONFIG_SCHEMA: &str = include_str!("../schema/run-config.schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Eu,
    Cvar,
    RiskNeutral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Simulate,
    Tradeoff,
    SafeSets,
    Pedagogical,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Simulate => "simulate",
            Command::Tradeoff => "tradeoff",
            Command::SafeSets => "safe-sets",
            Command::Pedagogical => "pedagogical",
        }
    }
}

fn default_system() -> String {
    "thermostat".into()
}
fn default_solver() -> Solver {
    Solver::Eu
}
fn default_variant() -> EuVariant {
    EuVariant::Raw
}
fn default_s_res() -> usize {
    65
}
fn default_n() -> usize {
    100_000
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_mem_budget() -> u64 {
    DEFAULT_MEMORY_BUDGET
}
fn default_gamma() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
}

/// One batch run. Every field has a default so partial documents are valid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_system")]
    pub system: String,
    #[serde(default = "default_solver")]
    pub solver: Solver,
    /// θ sweep for the EU solver.
    #[serde(default)]
    pub theta: Vec<f64>,
    /// α sweep for the CVaR solver; tail levels of the statistics otherwise.
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default = "default_variant")]
    pub variant: EuVariant,
    /// Cells of the budget axis on `[0, ā]`.
    #[serde(default = "default_s_res")]
    pub s_res: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub x0: Vec<Vec<f64>>,
    /// Safe-set thresholds.
    #[serde(default)]
    pub r: Vec<f64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Refusal threshold for the CVaR tables, in bytes.
    #[serde(default = "default_mem_budget")]
    pub mem_budget: u64,
    /// Certainty-equivalent prices for the pedagogical curves.
    #[serde(default = "default_gamma")]
    pub gamma: Vec<f64>,
    /// Replaces the system's disturbance table.
    #[serde(default)]
    pub disturbance: Option<DisturbanceTable>,
    /// Grid spacing and horizon for the stormwater system.
    #[serde(default)]
    pub stormwater: Option<StormwaterConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// The swept parameter values for the chosen solver.
    pub fn params(&self) -> Vec<Option<f64>> {
        match self.solver {
            Solver::Eu => self.theta.iter().copied().map(Some).collect(),
            Solver::Cvar => self.alpha.iter().copied().map(Some).collect(),
            Solver::RiskNeutral => vec![None],
        }
    }

    fn tail_alphas(&self) -> Vec<f64> {
        if self.alpha.is_empty() {
            vec![0.05]
        } else {
            self.alpha.clone()
        }
    }

    pub fn validate(&self, command: Command) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if command == Command::Pedagogical || self.system == "pedagogical" {
            for &a in &self.alpha {
                if !(a > 0.0 && a <= 1.0) {
                    return bad(format!("alpha {a} outside (0, 1]"));
                }
            }
            if let Some(g) = self.gamma.iter().find(|g| !(**g >= 0.0)) {
                return bad(format!("gamma {g} is negative"));
            }
            return Ok(());
        }
        if !["thermostat", "stormwater"].contains(&self.system.as_str()) {
            return bad(format!("unknown system {:?}", self.system));
        }
        match self.solver {
            Solver::Eu if self.theta.is_empty() => return bad("theta sweep is empty".into()),
            Solver::Cvar if self.alpha.is_empty() => return bad("alpha sweep is empty".into()),
            _ => {}
        }
        if let Some(t) = self.theta.iter().find(|t| !(**t < 0.0 && t.is_finite())) {
            return bad(format!("theta {t} is not negative"));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return bad(format!("alpha {a} outside (0, 1]"));
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.solver == Solver::Cvar && self.s_res < 2 {
            return bad(format!("s-res must be at least 2, got {}", self.s_res));
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        let dim = if self.system == "stormwater" { 2 } else { 1 };
        if let Some(x) = self.x0.iter().find(|x| x.len() != dim) {
            return bad(format!("initial condition {x:?} should have {dim} coordinates"));
        }
        if matches!(command, Command::Simulate | Command::Tradeoff) && self.x0.is_empty() {
            return bad("simulation needs at least one initial condition (--x0)".into());
        }
        if command == Command::SafeSets && self.r.is_empty() {
            return bad("safe sets need at least one threshold (--r)".into());
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<SystemModel> {
        match self.system.as_str() {
            "thermostat" => make_thermostat_with(
                ThermostatParams::default(),
                self.disturbance.clone().unwrap_or_else(thermostat_disturbance),
            ),
            "stormwater" => make_stormwater_with(
                &self.stormwater.clone().unwrap_or_default(),
                StormwaterParams::default(),
                self.disturbance.clone().unwrap_or_else(stormwater_disturbance),
            ),
            other => Err(Error::InvalidParameter(format!("unknown system {other:?}"))),
        }
    }
}

/// File-name fragment for a swept parameter.
pub fn param_label(solver: Solver, param: Option<f64>) -> String {
    match (solver, param) {
        (Solver::Eu, Some(t)) => format!("theta_{t}"),
        (Solver::Cvar, Some(a)) => format!("alpha_{a}"),
        _ => "neutral".into(),
    }
}

enum Solved {
    Eu(EuSolution),
    Cvar(Arc<CvarInnerSolution>, CvarValue),
    Neutral(NeutralSolution),
}

impl Solved {
    fn values(&self) -> ValueTable {
        match self {
            Solved::Eu(s) => s.optimal_values(),
            Solved::Cvar(_, v) => v.values.clone(),
            Solved::Neutral(s) => s.optimal_values(),
        }
    }
}

/// Wall-clock bookkeeping for the manifest.
#[derive(Default)]
struct Phases(Vec<(String, f64)>);

impl Phases {
    fn time<T>(&mut self, name: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((name.into(), start.elapsed().as_secs_f64()));
        out
    }
}

/// What a run produced.
#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut file = BufWriter::new(fs::File::create(&path)?);
        body(&mut file)?;
        file.flush()?;
        self.files.push(path);
        Ok(())
    }
}

fn coord_header(prefix: &str, dim: usize) -> String {
    (1..=dim).map(|k| format!("{prefix}{k}")).collect::<Vec<_>>().join(",")
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn write_values(out: &mut dyn Write, solved: &Solved) -> Result<()> {
    let table = solved.values();
    let grid = table.grid();
    let budgets = match solved {
        Solved::Cvar(_, v) => Some(&v.budgets),
        _ => None,
    };
    write!(out, "{},value", coord_header("x", grid.dim()))?;
    writeln!(out, "{}", if budgets.is_some() { ",s_star" } else { "" })?;
    for (node, &v) in table.values().iter().enumerate() {
        write!(out, "{},{v}", join(grid.node(node).as_slice()))?;
        match budgets {
            Some(b) => writeln!(out, ",{}", b[node])?,
            None => writeln!(out)?,
        }
    }
    Ok(())
}

fn write_policy(out: &mut dyn Write, model: &SystemModel, solved: &Solved) -> Result<()> {
    let (policy, augmented) = match solved {
        Solved::Eu(s) => (&s.policy, false),
        Solved::Neutral(s) => (&s.policy, false),
        Solved::Cvar(inner, _) => (&inner.policy, true),
    };
    let grid = policy.grid();
    let dim = model.grid().dim();
    write!(out, "t,{}", coord_header("x", dim))?;
    writeln!(out, "{},u", if augmented { ",s" } else { "" })?;
    for t in 0..policy.horizon() {
        for (node, &k) in policy.step(t).iter().enumerate() {
            writeln!(out, "{t},{},{}", join(grid.node(node).as_slice()), model.controls()[k as usize])?;
        }
    }
    Ok(())
}

fn check_memory(config: &RunConfig, model: &SystemModel) -> Result<()> {
    if config.solver != Solver::Cvar {
        return Ok(());
    }
    let ns = build_s_grid(model, config.s_res)?.len();
    let required = inner_memory_estimate(model, ns);
    if required > config.mem_budget {
        return Err(Error::MemoryBudget {
            required,
            budget: config.mem_budget,
        });
    }
    Ok(())
}

fn solve_all(config: &RunConfig, model: &SystemModel, phases: &mut Phases) -> Result<Vec<(Option<f64>, Solved)>> {
    match config.solver {
        Solver::Eu => config
            .theta
            .iter()
            .map(|&theta| {
                let sol = phases.time(format!("solve theta={theta}"), || solve_eu(model, theta, config.variant))?;
                Ok((Some(theta), Solved::Eu(sol)))
            })
            .collect(),
        Solver::Cvar => {
            let inner = phases.time("solve cvar inner", || {
                solve_cvar_inner_with_budget(model, config.s_res, config.mem_budget)
            })?;
            let inner = Arc::new(inner);
            config
                .alpha
                .iter()
                .map(|&alpha| {
                    let value = phases.time(format!("outer alpha={alpha}"), || outer_minimize(&inner, alpha))?;
                    Ok((Some(alpha), Solved::Cvar(Arc::clone(&inner), value)))
                })
                .collect()
        }
        Solver::RiskNeutral => {
            let sol = phases.time("solve risk-neutral", || solve_risk_neutral(model))?;
            Ok(vec![(None, Solved::Neutral(sol))])
        }
    }
}

fn simulate(config: &RunConfig, model: &SystemModel, solved: &Solved, param: Option<f64>, x0: &State) -> Result<CostSampleSet> {
    match solved {
        Solved::Eu(s) => simulate_eu(model, s, x0, config.n, config.seed),
        Solved::Cvar(inner, _) => simulate_cvar(model, inner, param.expect("alpha"), x0, config.n, config.seed),
        Solved::Neutral(s) => simulate_policy(model, &s.policy, x0, config.n, config.seed),
    }
}

fn write_tradeoff(
    out: &mut dyn Write,
    config: &RunConfig,
    dim: usize,
    per_x0: &[(State, Vec<(Option<f64>, CostSampleSet)>)],
) -> Result<()> {
    writeln!(out, "{},param,alpha,mean,variance,var,exceedance,cvar", coord_header("x0_", dim))?;
    for (x0, sets) in per_x0 {
        let x = join(x0.as_slice());
        let mut sets = sets.clone();
        sets.sort_by(|a, b| a.0.unwrap_or(0.0).total_cmp(&b.0.unwrap_or(0.0)));
        for (param, set) in sets {
            let alphas = match (config.solver, param) {
                (Solver::Cvar, Some(a)) => vec![a],
                _ => config.tail_alphas(),
            };
            let rows = tradeoff_table(&[(param.unwrap_or(0.0), set)], &alphas)?;
            let row = &rows[0];
            let label = param.map(|v| v.to_string()).unwrap_or_default();
            for t in &row.tails {
                writeln!(
                    out,
                    "{x},{label},{},{},{},{},{},{}",
                    t.alpha, row.mean, row.variance, t.var, t.exceedance, t.cvar
                )?;
            }
        }
    }
    Ok(())
}

fn run_pedagogical(config: &RunConfig, writer: &mut Writer<'_>, phases: &mut Phases) -> Result<serde_json::Value> {
    let alphas = if config.alpha.is_empty() {
        vec![1.0, 0.5, 0.1, 0.05]
    } else {
        config.alpha.clone()
    };
    let us: Vec<f64> = (0..=100).map(|i| 0.25 * i as f64 / 100.0).collect();
    let p = phases.time("build noise", Pedagogical::new)?;
    let rows = phases.time("curves", || {
        us.iter().map(|&u| p.row(u, &config.gamma, &alphas)).collect::<Result<Vec<_>>>()
    })?;
    writer.write("pedagogical.csv", |out| {
        let mut header = String::from("u,mean,variance");
        for g in &config.gamma {
            write!(header, ",ce_{g}").expect("string write");
        }
        for a in &alphas {
            write!(header, ",cvar_{a}").expect("string write");
        }
        writeln!(out, "{header}")?;
        for r in &rows {
            writeln!(out, "{},{},{},{},{}", r.u, r.mean, r.variance, join(&r.ce), join(&r.cvar))?;
        }
        Ok(())
    })?;
    Ok(json!({
        "name": "pedagogical",
        "cost": "u^2 + (w + u)^2",
        "noise_atoms": p.w.atoms().len(),
        "noise_raw_moments": p.moments,
        "u_grid": us,
        "gamma": config.gamma,
        "alpha": alphas,
    }))
}

fn model_manifest(model: &SystemModel, config: &RunConfig) -> Result<serde_json::Value> {
    let (b_lower, a_bar) = model.derived_bounds();
    let mut m = json!({
        "name": model.name(),
        "horizon": model.horizon(),
        "state_axes": model.grid().axes(),
        "controls": model.controls(),
        "disturbance": model.disturbance(),
        "disturbance_moments": {
            "mean": model.disturbance().mean(),
            "variance": model.disturbance().variance(),
            "skewness": model.disturbance().skewness(),
        },
        "cost_lower": model.cost_lower(),
        "cost_upper": model.cost_upper(),
        "b_lower": b_lower,
        "a_bar": a_bar,
    });
    match model.name() {
        "thermostat" => m["parameters"] = serde_json::to_value(ThermostatParams::default())?,
        "stormwater" => {
            m["parameters"] = serde_json::to_value(StormwaterParams::default())?;
            m["resolution"] = serde_json::to_value(config.stormwater.clone().unwrap_or_default())?;
        }
        _ => {}
    }
    if config.solver == Solver::Cvar {
        m["s_axis"] = serde_json::to_value(build_s_grid(model, config.s_res)?.axis(0))?;
    }
    Ok(m)
}

fn design_knobs() -> serde_json::Value {
    json!({
        "interpolation": "multilinear on the state grid; linear in the budget",
        "state_clamp": "successor states projected onto the grid box",
        "cost_bounds": "swept over all grid nodes and controls",
        "control_tie_break": "smallest control index",
        "budget_tie_break": "smallest budget within 1e-12 relative",
        "budget_below_axis": "extrapolated with slope -1",
        "budget_above_axis": "clamped",
        "s_axis": "resolution cells on [0, a_bar], half as many on [-a_bar, 0]",
        "policy_lookup": "nearest grid node (augmented node for CVaR)",
        "budget_dynamics": "exact, not snapped",
        "eu_raw": "log-sum-exp with max shift",
        "eu_nonnegative": "unshifted sum of exponentials",
        "var_convention": "k = max(1, ceil((1 - alpha) n)) order statistic",
        "variance": "unbiased (n - 1)",
        "rng": "ChaCha8, seed_from_u64(seed), stream = trajectory index",
        "common_random_numbers": "every (parameter, x0) ensemble uses the same seed",
    })
}

/// Executes `command` and writes its artifacts under `config.out`.
pub fn run(command: Command, config: &RunConfig) -> Result<RunReport> {
    config.validate(command)?;
    fs::create_dir_all(&config.out)?;
    let mut writer = Writer {
        dir: &config.out,
        files: Vec::new(),
    };
    let mut phases = Phases::default();
    let jobs = rayon::current_num_threads();

    let system = if command == Command::Pedagogical || config.system == "pedagogical" {
        run_pedagogical(config, &mut writer, &mut phases)?
    } else {
        let model = phases.time("build model", || config.build_model())?;
        check_memory(config, &model)?;
        let system = model_manifest(&model, config)?;
        let solved = solve_all(config, &model, &mut phases)?;
        let dim = model.grid().dim();

        if command == Command::Solve {
            for (param, s) in &solved {
                let label = param_label(config.solver, *param);
                writer.write(&format!("values_{label}.csv"), |out| write_values(out, s))?;
                writer.write(&format!("policy_{label}.csv"), |out| write_policy(out, &model, s))?;
            }
        }

        if command == Command::SafeSets {
            for (param, s) in &solved {
                let label = param_label(config.solver, *param);
                let values = s.values();
                for &r in &config.r {
                    writer.write(&format!("safesets_{label}_{r}.csv"), |out| {
                        safe_sets::write_csv(out, &values, r)
                    })?;
                }
            }
        }

        if matches!(command, Command::Simulate | Command::Tradeoff) {
            let mut per_x0 = Vec::new();
            for x in &config.x0 {
                let x0 = State::new(x);
                let mut sets = Vec::new();
                for (param, s) in &solved {
                    let name = format!("simulate {} x0={x:?}", param_label(config.solver, *param));
                    let set = phases.time(name, || simulate(config, &model, s, *param, &x0))?;
                    sets.push((*param, set));
                }
                per_x0.push((x0, sets));
            }
            if command == Command::Simulate {
                for (param, _) in &solved {
                    let label = param_label(config.solver, *param);
                    writer.write(&format!("samples_{label}.csv"), |out| {
                        writeln!(out, "{},trajectory,z", coord_header("x0_", dim))?;
                        for (x0, sets) in &per_x0 {
                            let set = &sets.iter().find(|(p, _)| p == param).expect("simulated").1;
                            let x = join(x0.as_slice());
                            for (i, z) in set.samples().iter().enumerate() {
                                writeln!(out, "{x},{i},{z}")?;
                            }
                        }
                        Ok(())
                    })?;
                }
            }
            writer.write("tradeoff.csv", |out| write_tradeoff(out, config, dim, &per_x0))?;
        }
        system
    };

    let files: Vec<String> = writer
        .files
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    let manifest = json!({
        "tool": "riskctl",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.as_str(),
        "config": config,
        "seed": config.seed,
        "jobs": jobs,
        "system": system,
        "design": design_knobs(),
        "phases": phases.0.iter().map(|(n, s)| json!({"name": n, "seconds": s})).collect::<Vec<_>>(),
        "outputs": files,
    });
    let path = config.out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    writer.files.push(path);
    Ok(RunReport { files: writer.files })
}
