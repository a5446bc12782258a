//! Command implementations. Each command returns a fixed-schema [`Table`]
//! (plus a human-readable summary where useful); rendering and I/O live in
//! `main`.

use rayon::prelude::*;

use relay_cf::channel::{unit_power_gain, HopProfile, Protocol, RelayChain};
use relay_cf::error::Error as LibError;
use relay_cf::metrics::{cf, cf_af, cf_af_factorial_variant, cf_df, CfControls, CfResult};
use relay_cf::montecarlo::{estimate_cf, McConfig};
use relay_cf::optimizer::{
    cfopa, cfso_upa, cfsopa, copa, upa, Allocation, SolverOptions, Strategy,
};

use crate::scenario::{Scenario, ScenarioError};
use crate::table::{format_float, Cell, Table};

/// Command failure, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Usage, parse, or configuration problem (exit code 1).
    Usage(String),
    /// Numerical non-convergence (exit code 2).
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        match e {
            LibError::NonConvergence { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CmdResult<T> = Result<T, CliError>;

/// Which AF series coefficient convention to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffForm {
    /// The production Γ(mᵢ)-normalized form.
    Gamma,
    /// The rejected mᵢ!-normalized variant (diagnostic negative control).
    MFactorial,
}

fn run_strategy(
    chain: &RelayChain,
    budget: f64,
    controls: &CfControls,
    strategy: Strategy,
    opts: &SolverOptions,
) -> CmdResult<Allocation> {
    let alloc = match strategy {
        Strategy::Upa => upa(chain, budget, controls)?,
        Strategy::CfsoUpa => cfso_upa(chain, budget, controls, opts)?,
        Strategy::Cfopa => cfopa(chain, budget, controls, opts)?,
        Strategy::Copa => copa(chain, budget, controls, opts)?,
        Strategy::Cfsopa => cfsopa(chain, budget, controls)?.0,
    };
    Ok(alloc)
}

fn evaluate(chain: &RelayChain, powers: &[f64], controls: &CfControls) -> CmdResult<CfResult> {
    Ok(cf(chain, powers, controls)?)
}

/// `cf`: evaluate every requested strategy on the scenario chain.
pub fn cmd_cf(scenario: &Scenario) -> CmdResult<Table> {
    let chain = scenario.chain()?;
    let controls = scenario.controls()?;
    let budget = scenario.budget.watts();
    let opts = SolverOptions::default();
    let mut table = Table::new(vec![
        "strategy",
        "cf",
        "capacity",
        "total_power",
        "budget",
        "budget_used",
        "kkt_residual",
        "iterations",
        "converged",
        "powers",
    ]);
    let rows: Vec<CmdResult<Vec<Cell>>> = scenario
        .strategies
        .par_iter()
        .map(|&strategy| {
            let alloc = run_strategy(&chain, budget, &controls, strategy, &opts)?;
            let result = evaluate(&chain, &alloc.powers, &controls)?;
            let powers = alloc
                .powers
                .iter()
                .map(|&p| format_float(p))
                .collect::<Vec<_>>()
                .join(";");
            Ok(vec![
                Cell::Str(strategy.to_string()),
                Cell::Num(result.cf),
                Cell::Num(result.ergodic_capacity),
                Cell::Num(result.total_power),
                Cell::Num(budget),
                Cell::Num(alloc.budget_used),
                Cell::Num(alloc.kkt_residual),
                Cell::Int(alloc.iterations as i64),
                Cell::Bool(alloc.converged),
                Cell::Str(powers),
            ])
        })
        .collect();
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}

/// One cell of the validation grid.
struct ValidateCell {
    protocol: Protocol,
    n: usize,
    m: u32,
    gbar_db: f64,
}

/// Chain with every hop at exactly the target average SNR for 1 W transmit
/// powers: unit geometry, Ω set to the target.
fn grid_chain(scenario: &Scenario, cell: &ValidateCell) -> CmdResult<RelayChain> {
    let gbar = 10f64.powf(cell.gbar_db / 10.0);
    let hops = (0..cell.n)
        .map(|_| HopProfile {
            m: cell.m,
            d: 1.0,
            nu: 4.0,
            omega: gbar,
        })
        .collect();
    let power = scenario.power_model_for(cell.n);
    Ok(
        RelayChain::new(hops, cell.protocol, scenario.bandwidth, 1.0, power)
            .map_err(LibError::from)?,
    )
}

/// `validate`: closed form vs Monte-Carlo over the standard grid
/// (protocol × N ∈ {1,2,3} × m ∈ {1,2} × γ̄ ∈ {0, 10} dB).
///
/// Returns the table and the largest |z| observed.
pub fn cmd_validate(scenario: &Scenario, coeff: CoeffForm) -> CmdResult<(Table, f64)> {
    let controls = scenario.controls()?;
    let mut cells = Vec::new();
    for protocol in [Protocol::Af, Protocol::Df] {
        for n in 1..=3usize {
            for m in [1u32, 2] {
                for gbar_db in [0.0f64, 10.0] {
                    cells.push(ValidateCell {
                        protocol,
                        n,
                        m,
                        gbar_db,
                    });
                }
            }
        }
    }
    let rows: Vec<CmdResult<(Vec<Cell>, f64)>> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, cell)| {
            let chain = grid_chain(scenario, cell)?;
            let pt = vec![1.0; cell.n];
            let closed = match (cell.protocol, coeff) {
                (Protocol::Af, CoeffForm::Gamma) => cf_af(&chain, &pt, &controls.series)?,
                (Protocol::Af, CoeffForm::MFactorial) => {
                    cf_af_factorial_variant(&chain, &pt, &controls.series)?
                }
                (Protocol::Df, _) => cf_df(&chain, &pt, &controls.quad)?,
            };
            let cfg = McConfig {
                samples: scenario.samples,
                seed: scenario.seed.wrapping_add(idx as u64),
                streams: scenario.streams,
            };
            let mc = estimate_cf(&chain, &pt, &cfg)?;
            let z = (closed.cf - mc.mean).abs() / mc.std_error;
            let coeff_label = match coeff {
                CoeffForm::Gamma => "gamma",
                CoeffForm::MFactorial => "m-factorial",
            };
            let row = vec![
                Cell::Str(cell.protocol.to_string()),
                Cell::Int(cell.n as i64),
                Cell::Int(cell.m as i64),
                Cell::Num(cell.gbar_db),
                Cell::Str(coeff_label.to_string()),
                Cell::Num(closed.cf),
                Cell::Num(mc.mean),
                Cell::Num(mc.std_error),
                Cell::Num(z),
                Cell::Bool(z <= 3.0),
            ];
            Ok((row, z))
        })
        .collect();
    let mut table = Table::new(vec![
        "protocol",
        "n",
        "m",
        "gbar_db",
        "coeff",
        "cf_closed",
        "cf_mc",
        "std_error",
        "z",
        "pass",
    ]);
    let mut z_max = 0.0f64;
    for row in rows {
        let (row, z) = row?;
        z_max = z_max.max(z);
        table.push(row);
    }
    Ok((table, z_max))
}

/// `sweep-hops`: CF vs hop count per strategy. Also reports the argmax N
/// per strategy.
pub fn cmd_sweep_hops(
    scenario: &Scenario,
    min_hops: usize,
    max_hops: usize,
) -> CmdResult<(Table, String)> {
    if min_hops < 1 || max_hops > 20 || min_hops > max_hops {
        return Err(CliError::Usage(format!(
            "hop range {min_hops}..={max_hops} must lie within 1..=20"
        )));
    }
    let controls = scenario.controls()?;
    let budget = scenario.budget.watts();
    let opts = SolverOptions::default();
    let ns: Vec<usize> = (min_hops..=max_hops).collect();
    let per_n: Vec<CmdResult<Vec<(usize, Strategy, CfResult, Allocation)>>> = ns
        .par_iter()
        .map(|&n| {
            let chain = scenario.chain_with_hops(n)?;
            let mut out = Vec::new();
            for &strategy in &scenario.strategies {
                let alloc = run_strategy(&chain, budget, &controls, strategy, &opts)?;
                let result = evaluate(&chain, &alloc.powers, &controls)?;
                out.push((n, strategy, result, alloc));
            }
            Ok(out)
        })
        .collect();
    let mut table = Table::new(vec![
        "n",
        "strategy",
        "cf",
        "capacity",
        "total_power",
        "budget_used",
        "converged",
    ]);
    let mut best: std::collections::BTreeMap<String, (usize, f64)> = Default::default();
    for group in per_n {
        for (n, strategy, result, alloc) in group? {
            let entry = best.entry(strategy.to_string()).or_insert((n, result.cf));
            if result.cf > entry.1 {
                *entry = (n, result.cf);
            }
            table.push(vec![
                Cell::Int(n as i64),
                Cell::Str(strategy.to_string()),
                Cell::Num(result.cf),
                Cell::Num(result.ergodic_capacity),
                Cell::Num(result.total_power),
                Cell::Num(alloc.budget_used),
                Cell::Bool(alloc.converged),
            ]);
        }
    }
    let summary = best
        .iter()
        .map(|(s, (n, cf))| format!("{s}: best N = {n} (CF = {cf:.6})"))
        .collect::<Vec<_>>()
        .join("\n");
    Ok((table, summary))
}

fn budget_grid(from_db: f64, to_db: f64, step_db: f64) -> CmdResult<Vec<f64>> {
    if !(step_db > 0.0) || to_db < from_db {
        return Err(CliError::Usage(format!(
            "invalid dB range {from_db}..{to_db} step {step_db}"
        )));
    }
    let count = ((to_db - from_db) / step_db).round() as usize + 1;
    if count > 2000 {
        return Err(CliError::Usage(format!("{count} sweep points is too many")));
    }
    Ok((0..count).map(|i| from_db + step_db * i as f64).collect())
}

/// `sweep-power`: CF vs total power budget per strategy, with the detected
/// critical budget (first point where the CF-optimal allocation stops
/// spending the full budget).
pub fn cmd_sweep_power(
    scenario: &Scenario,
    from_db: f64,
    to_db: f64,
    step_db: f64,
) -> CmdResult<(Table, String)> {
    let controls = scenario.controls()?;
    let chain = scenario.chain()?;
    let opts = SolverOptions::default();
    let grid = budget_grid(from_db, to_db, step_db)?;
    let rows: Vec<CmdResult<Vec<(f64, f64, Strategy, CfResult, Allocation)>>> = grid
        .par_iter()
        .map(|&db| {
            let budget = 10f64.powf(db / 10.0);
            let mut out = Vec::new();
            for &strategy in &scenario.strategies {
                let alloc = run_strategy(&chain, budget, &controls, strategy, &opts)?;
                let result = evaluate(&chain, &alloc.powers, &controls)?;
                out.push((db, budget, strategy, result, alloc));
            }
            Ok(out)
        })
        .collect();
    let mut table = Table::new(vec![
        "p_tot_db",
        "p_tot_w",
        "strategy",
        "cf",
        "capacity",
        "budget_used",
        "kkt_residual",
    ]);
    let mut critical: Option<f64> = None;
    for group in rows {
        for (db, budget, strategy, result, alloc) in group? {
            if strategy == Strategy::Cfopa
                && critical.is_none()
                && alloc.budget_used < 0.999 * budget
            {
                critical = Some(db);
            }
            table.push(vec![
                Cell::Num(db),
                Cell::Num(budget),
                Cell::Str(strategy.to_string()),
                Cell::Num(result.cf),
                Cell::Num(result.ergodic_capacity),
                Cell::Num(alloc.budget_used),
                Cell::Num(alloc.kkt_residual),
            ]);
        }
    }
    let summary = match critical {
        Some(db) => format!("critical power budget: {db:.2} dB"),
        None => "critical power budget: not reached in range".to_string(),
    };
    Ok((table, summary))
}

/// `tradeoff`: (capacity, CF) pairs along a budget sweep per strategy.
pub fn cmd_tradeoff(
    scenario: &Scenario,
    from_db: f64,
    to_db: f64,
    step_db: f64,
) -> CmdResult<Table> {
    let controls = scenario.controls()?;
    let chain = scenario.chain()?;
    let opts = SolverOptions::default();
    let grid = budget_grid(from_db, to_db, step_db)?;
    let rows: Vec<CmdResult<Vec<Vec<Cell>>>> = grid
        .par_iter()
        .map(|&db| {
            let budget = 10f64.powf(db / 10.0);
            let mut out = Vec::new();
            for &strategy in &scenario.strategies {
                let alloc = run_strategy(&chain, budget, &controls, strategy, &opts)?;
                let result = evaluate(&chain, &alloc.powers, &controls)?;
                out.push(vec![
                    Cell::Num(db),
                    Cell::Str(strategy.to_string()),
                    Cell::Num(result.ergodic_capacity),
                    Cell::Num(result.cf),
                ]);
            }
            Ok(out)
        })
        .collect();
    let mut table = Table::new(vec!["p_tot_db", "strategy", "capacity", "cf"]);
    for group in rows {
        for row in group? {
            table.push(row);
        }
    }
    Ok(table)
}

/// `dissimilar`: CF per strategy while the first hop's average SNR exceeds
/// the second's by Δ (both measured at the uniform reference power).
pub fn cmd_dissimilar(scenario: &Scenario, max_delta: f64, points: usize) -> CmdResult<Table> {
    if scenario.hops != 2 {
        return Err(CliError::Usage(format!(
            "dissimilar sweeps need a 2-hop scenario, got {} hops",
            scenario.hops
        )));
    }
    if points < 2 || !(max_delta >= 0.0) {
        return Err(CliError::Usage(
            "need points >= 2 and max_delta >= 0".into(),
        ));
    }
    let base = scenario.chain()?;
    let controls = scenario.controls()?;
    let budget = scenario.budget.watts();
    let opts = SolverOptions::default();
    let x_ref = budget / 2.0;
    // reference per-hop average SNR of the second hop at the uniform split
    let gbar_ref = unit_power_gain(&base.hops()[1], base.n0()) * x_ref;
    let deltas: Vec<f64> = (0..points)
        .map(|i| max_delta * i as f64 / (points - 1) as f64)
        .collect();
    let rows: Vec<CmdResult<Vec<Vec<Cell>>>> = deltas
        .par_iter()
        .map(|&delta| {
            // raise hop 1's mean channel gain so γ̄₁ = γ̄₂ + Δ at x_ref
            let mut hops = base.hops().to_vec();
            let g1_target = (gbar_ref + delta) / x_ref;
            hops[0].omega = g1_target * base.n0() * hops[0].d.powf(hops[0].nu);
            let chain = RelayChain::new(
                hops,
                base.protocol(),
                base.bandwidth(),
                base.n0(),
                base.power_model().clone(),
            )
            .map_err(LibError::from)?;
            let mut out = Vec::new();
            for &strategy in &scenario.strategies {
                let alloc = run_strategy(&chain, budget, &controls, strategy, &opts)?;
                let result = evaluate(&chain, &alloc.powers, &controls)?;
                out.push(vec![
                    Cell::Num(delta),
                    Cell::Str(strategy.to_string()),
                    Cell::Num(result.cf),
                ]);
            }
            Ok(out)
        })
        .collect();
    let mut table = Table::new(vec!["delta_gbar", "strategy", "cf"]);
    for group in rows {
        for row in group? {
            table.push(row);
        }
    }
    Ok(table)
}
