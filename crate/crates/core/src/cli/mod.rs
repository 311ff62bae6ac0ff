//! Command-line front end: `misalloc <subcommand> [flags]`.
//!
//! Exit status is 0 on success, 2 for invalid input or configuration and 3
//! when a solver fails to converge.

mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgAction, Parser, Subcommand};
use serde::Serialize;

pub use config::{
    AllocationConfig, BoundsConfig, CalibrateConfig, HarbergerConfig, RunConfig, SweepConfig, SCHEMA_VERSION,
};
pub use output::{fmt_num, round_sig, to_json, DIGITS};

use crate::alloc::{
    efficient_allocation, greedy_controlled_allocation, harberger_loss, welfare_report, worst_case_allocation,
    worst_kkt_residual, TieBreak, WelfareReport, WorstCase,
};
use crate::bounds::{solve_bounds_seeded, AnchorMode, BoundsResult, Side};
use crate::calibration::{
    assumption_decomposition, impute_gallons, load_station_survey, parse_station_survey, pooled_two_market,
    shadow_prices_from, state_by_status, CalibrationParams, DecompositionRow, StationSurveyRow, SYNTHETIC_STATES,
};
use crate::chaos::{run_grid_scenario, scenario_rows, sweep_cost_path, CostPath, JumpEvent};
use crate::error::{invalid, Error, Result};
use crate::model::{caps_at_ceiling, Allocation, FeasibleSet};
use output::Writer;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "misalloc",
    version,
    about = "Allocation and misallocation bounds under price ceilings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// How equal unit costs are ordered: error or index.
    #[arg(long, global = true)]
    pub tie_break: Option<TieBreak>,
    /// Choke cap applied to every bounds market.
    #[arg(long, global = true)]
    pub choke: Option<f64>,
    /// Elasticity interval for calibration.
    #[arg(long, global = true, num_args = 2, value_names = ["LO", "HI"])]
    pub epsilon: Option<Vec<f64>>,
    /// Anchor prices fixed at midpoints or searched within their intervals.
    #[arg(long, global = true)]
    pub anchors: Option<AnchorMode>,
    /// Report written files on stderr.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Efficient and cost-minimizing allocations with welfare reports.
    Allocate,
    /// Surplus-minimizing feasible allocation.
    Worst,
    /// Robust bounds on misallocation loss.
    Bounds,
    /// Grid-market simulation.
    Simulate,
    /// Allocation jumps along a cost path.
    Sweep,
    /// Calibrated decomposition table and state shadow prices.
    Calibrate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Allocate => "allocate",
            Command::Worst => "worst",
            Command::Bounds => "bounds",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Calibrate => "calibrate",
        }
    }
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_convergence() {
        EXIT_NONCONVERGENCE
    } else {
        EXIT_INVALID
    }
}

/// Parses `args` (including the program name), runs, prints errors and
/// returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            exit_code(&e)
        }
    }
}

/// Runs one subcommand; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::empty(),
    };
    check_flags(cli)?;
    let mut w = Writer::new(&cli.out, cli.verbose > 0)?;
    match cli.command {
        Command::Allocate => allocate(cli, section(cfg.allocate, "allocate")?, &mut w)?,
        Command::Worst => worst(section(cfg.worst, "worst")?, &mut w)?,
        Command::Bounds => bounds(cli, section(cfg.bounds, "bounds")?, &mut w)?,
        Command::Simulate => simulate(cli, cfg.simulate.unwrap_or_default(), &mut w)?,
        Command::Sweep => sweep(section(cfg.sweep, "sweep")?, &mut w)?,
        Command::Calibrate => calibrate(cli, cfg.calibrate.unwrap_or_default(), &mut w)?,
    }
    Ok(w.written)
}

fn section<T>(s: Option<T>, name: &str) -> Result<T> {
    s.ok_or_else(|| invalid(format!("config has no `{name}` section (pass --config with one)")))
}

/// Rejects flags that the subcommand would ignore.
fn check_flags(cli: &Cli) -> Result<()> {
    use Command::*;
    let c = cli.command;
    let bad = |flag: &str| invalid(format!("--{flag} does not apply to `{}`", c.name()));
    if cli.seed.is_some() && !matches!(c, Simulate | Bounds | Calibrate) {
        return Err(bad("seed"));
    }
    if cli.tie_break.is_some() && c != Allocate {
        return Err(bad("tie-break"));
    }
    if cli.choke.is_some() && !matches!(c, Bounds | Calibrate) {
        return Err(bad("choke"));
    }
    if cli.epsilon.is_some() && c != Calibrate {
        return Err(bad("epsilon"));
    }
    if cli.anchors.is_some() && !matches!(c, Bounds | Calibrate) {
        return Err(bad("anchors"));
    }
    Ok(())
}

#[derive(Serialize)]
struct AllocationOut {
    quantities: Vec<f64>,
    slots: Vec<&'static str>,
    shadow_price: Option<f64>,
    welfare: WelfareReport,
}

fn allocation_out(a: &Allocation, shadow_price: Option<f64>, welfare: WelfareReport) -> AllocationOut {
    AllocationOut {
        quantities: a.quantities.clone(),
        slots: a.slots.iter().map(|s| s.as_str()).collect(),
        shadow_price,
        welfare,
    }
}

fn feasible(c: &AllocationConfig) -> Result<FeasibleSet> {
    for m in &c.markets {
        m.validate()?;
    }
    FeasibleSet::new(caps_at_ceiling(&c.markets, c.ceiling), c.supply)
}

fn harberger_of(c: &AllocationConfig) -> Result<Option<f64>> {
    c.harberger
        .as_ref()
        .map(|h| harberger_loss(&h.aggregate, h.base_price, h.base_quantity, c.supply))
        .transpose()
}

fn allocate(cli: &Cli, c: AllocationConfig, w: &mut Writer) -> Result<()> {
    let fs = feasible(&c)?;
    let harb = harberger_of(&c)?;
    let (eff, p) = efficient_allocation(&c.markets, &fs)?;
    let ctl = greedy_controlled_allocation(&c.markets, &fs, cli.tie_break.unwrap_or_default())?;
    #[derive(Serialize)]
    struct Out {
        caps: Vec<f64>,
        efficient: AllocationOut,
        controlled: AllocationOut,
    }
    let out = Out {
        caps: fs.caps().to_vec(),
        efficient: allocation_out(
            &eff,
            Some(p),
            welfare_report(&c.markets, &fs, &eff, c.ceiling, Some(p), harb)?,
        ),
        controlled: allocation_out(
            &ctl,
            None,
            welfare_report(&c.markets, &fs, &ctl, c.ceiling, None, harb)?,
        ),
    };
    w.json("allocate.json", &out)
}

fn worst(c: AllocationConfig, w: &mut Writer) -> Result<()> {
    let fs = feasible(&c)?;
    let harb = harberger_of(&c)?;
    let WorstCase {
        allocation,
        cutoff,
        method,
        ..
    } = worst_case_allocation(&c.markets, &fs)?;
    let report = welfare_report(&c.markets, &fs, &allocation, c.ceiling, Some(cutoff), harb)?;
    #[derive(Serialize)]
    struct Out {
        worst: AllocationOut,
        cutoff: f64,
        kkt_residual: f64,
        method: crate::alloc::WorstMethod,
    }
    let out = Out {
        kkt_residual: worst_kkt_residual(&c.markets, &allocation, cutoff),
        worst: allocation_out(&allocation, Some(cutoff), report),
        cutoff,
        method,
    };
    w.json("worst.json", &out)
}

#[derive(Serialize)]
struct BoundsOut {
    #[serde(flatten)]
    result: BoundsResult,
    status: &'static str,
    harberger_loss: Option<f64>,
    ratio_lower: Option<f64>,
    ratio_upper: Option<f64>,
}

fn bounds_out(result: BoundsResult, harberger: Option<f64>) -> BoundsOut {
    let h = harberger.filter(|h| *h > 0.0);
    BoundsOut {
        status: result.diagnostics.status(),
        ratio_lower: h.map(|h| result.phi_lower / h),
        ratio_upper: h.map(|h| result.phi_upper / h),
        harberger_loss: h,
        result,
    }
}

fn bounds(cli: &Cli, mut c: BoundsConfig, w: &mut Writer) -> Result<()> {
    if let Some(m) = cli.choke {
        for market in &mut c.problem.markets {
            market.choke = Some(m);
        }
    }
    let mode = cli.anchors.unwrap_or(c.anchors);
    let result = solve_bounds_seeded(&c.problem, mode, cli.seed.unwrap_or(c.seed))?;
    w.json("bounds.json", &bounds_out(result, c.harberger))
}

fn simulate(cli: &Cli, mut cfg: crate::chaos::ScenarioConfig, w: &mut Writer) -> Result<()> {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = run_grid_scenario(&cfg)?;
    let rows: Vec<Vec<String>> = scenario_rows(&cfg, &out)
        .into_iter()
        .map(|r| {
            vec![
                r.market_index.to_string(),
                r.row.to_string(),
                r.col.to_string(),
                fmt_num(r.cost),
                fmt_num(r.free_q),
                fmt_num(r.controlled_q),
                r.classification.to_string(),
            ]
        })
        .collect();
    w.csv(
        "scenario.csv",
        &[
            "market_index",
            "row",
            "col",
            "cost",
            "free_q",
            "controlled_q",
            "classification",
        ],
        &rows,
    )?;
    #[derive(Serialize)]
    struct Summary {
        seed: u64,
        markets: usize,
        market_price: f64,
        ceiling: f64,
        free_net_price: f64,
        welfare_free: f64,
        welfare_controlled: f64,
        delivery_cost_free: f64,
        delivery_cost_controlled: f64,
        unserved_count: usize,
        controlled_is_vertex: bool,
    }
    w.json(
        "scenario_summary.json",
        &Summary {
            seed: cfg.seed,
            markets: out.costs.len(),
            market_price: out.market_price,
            ceiling: out.ceiling,
            free_net_price: out.free_net_price,
            welfare_free: out.welfare_free,
            welfare_controlled: out.welfare_controlled,
            delivery_cost_free: out.delivery_cost_free,
            delivery_cost_controlled: out.delivery_cost_controlled,
            unserved_count: out.unserved_count,
            controlled_is_vertex: out.controlled_allocation.is_vertex(),
        },
    )
}

fn sweep(c: SweepConfig, w: &mut Writer) -> Result<()> {
    let fs = FeasibleSet::new(c.caps.clone(), c.supply)?;
    let path = CostPath {
        base: c.base.clone(),
        direction: c.direction.clone(),
    };
    let events = sweep_cost_path(&c.demands, &fs, &path, c.t_start, c.t_end, c.step)?;
    let opt = |x: Option<usize>| x.map_or(String::new(), |i| i.to_string());
    let join = |v: &[f64]| v.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(";");
    let rows: Vec<Vec<String>> = events
        .iter()
        .map(|e: &JumpEvent| {
            vec![
                fmt_num(e.t),
                opt(e.from_market),
                opt(e.to_market),
                fmt_num(e.reallocated_mass),
                fmt_num(e.welfare_jump),
                e.compound.to_string(),
                join(&e.pre),
                join(&e.post),
            ]
        })
        .collect();
    w.csv(
        "jumps.csv",
        &[
            "t",
            "from_market",
            "to_market",
            "reallocated_mass",
            "welfare_jump",
            "compound",
            "pre",
            "post",
        ],
        &rows,
    )
}

fn survey_rows(c: &CalibrateConfig) -> Result<Vec<StationSurveyRow>> {
    let raw = match &c.survey {
        Some(p) => load_station_survey(p)?,
        None => parse_station_survey(SYNTHETIC_STATES.as_bytes())?,
    };
    impute_gallons(&raw)
}

fn calibrate(cli: &Cli, c: CalibrateConfig, w: &mut Writer) -> Result<()> {
    let mut params: CalibrationParams = c.params.clone();
    if let Some(e) = &cli.epsilon {
        params.epsilon_lo = e[0];
        params.epsilon_hi = e[1];
    }
    if cli.choke.is_some() {
        params.choke = cli.choke;
    }
    params.validate()?;
    let rows = survey_rows(&c)?;
    let mode = cli.anchors.or(c.anchors).unwrap_or(AnchorMode::Interval);
    let seed = cli.seed.unwrap_or(0);
    let harb = params.harberger(params.harberger_epsilon)?;

    let pooled = pooled_two_market(&params)?;
    let pooled_bounds = solve_bounds_seeded(&pooled.problem, mode, seed)?;
    let table = assumption_decomposition(&rows, &params)?;
    let states = state_by_status(&rows, &params)?;
    let state_bounds = solve_bounds_seeded(&states.problem, mode, seed)?;

    #[derive(Serialize)]
    struct Headline {
        q_open: f64,
        q_closed: f64,
        open_share: f64,
        harberger_loss: f64,
        phi_lower: f64,
        phi_upper: f64,
        ratio_lower: f64,
        ratio_upper: f64,
    }
    #[derive(Serialize)]
    struct Out {
        params: CalibrationParams,
        anchors: AnchorMode,
        pooled: Headline,
        state_level: Headline,
        active_cells: usize,
        decomposition: Vec<DecompositionRow>,
    }
    let headline = |q_open, q_closed, open_share, r: &BoundsResult| Headline {
        q_open,
        q_closed,
        open_share,
        harberger_loss: harb,
        phi_lower: r.phi_lower,
        phi_upper: r.phi_upper,
        ratio_lower: r.phi_lower / harb,
        ratio_upper: r.phi_upper / harb,
    };
    let out = Out {
        pooled: headline(pooled.q_open, pooled.q_closed, pooled.open_share, &pooled_bounds),
        state_level: headline(states.q_open, states.q_closed, states.open_share, &state_bounds),
        active_cells: states.cells.len(),
        params,
        anchors: mode,
        decomposition: table,
    };
    w.json("decomposition.json", &out)?;
    for (side, name) in [
        (Side::Upper, "shadow_prices_upper.csv"),
        (Side::Lower, "shadow_prices_lower.csv"),
    ] {
        let rows: Vec<Vec<String>> = shadow_prices_from(&rows, &states, &state_bounds, side)
            .into_iter()
            .map(|s| vec![s.state, fmt_num(s.rationing_share), fmt_num(s.value)])
            .collect();
        w.csv(name, &["state", "rationing_share", "shadow_price"], &rows)?;
    }
    Ok(())
}
