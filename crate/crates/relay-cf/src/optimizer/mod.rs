//! The five transmit-power allocation strategies and the KKT stationarity
//! diagnostic.
//!
//! * [`cfopa`] — CF-optimal allocation under ΣP ≤ P_tot.
//! * [`cfsopa`] — decentralized low-complexity allocation by per-node
//!   one-variable solves with recursive messages.
//! * [`cfso_upa`] — common-power CF maximization (one variable for all
//!   nodes).
//! * [`copa`] — capacity-optimal allocation (always budget-binding).
//! * [`upa`] — plain uniform split, the reference case.

mod decentral;
mod solver;

pub use decentral::{cfsopa, NodeMessage};

use crate::channel::RelayChain;
use crate::error::{Error, Result};
use crate::metrics::{capacity_grad, cf, cf_grad, CfControls};

/// Which objective a solver or diagnostic runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Average consumption factor.
    Cf,
    /// Ergodic end-to-end capacity.
    Capacity,
}

/// Power-allocation strategy labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Uniform power allocation P_i = P_tot/N.
    Upa,
    /// CF-suboptimal uniform power (common power maximizing CF).
    CfsoUpa,
    /// CF-optimal allocation.
    Cfopa,
    /// Capacity-optimal allocation.
    Copa,
    /// Decentralized CF-suboptimal allocation.
    Cfsopa,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Strategy::Upa => "upa",
            Strategy::CfsoUpa => "cfso-upa",
            Strategy::Cfopa => "cfopa",
            Strategy::Copa => "copa",
            Strategy::Cfsopa => "cfsopa",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "upa" => Ok(Strategy::Upa),
            "cfso-upa" | "cfsoupa" => Ok(Strategy::CfsoUpa),
            "cfopa" => Ok(Strategy::Cfopa),
            "copa" => Ok(Strategy::Copa),
            "cfsopa" => Ok(Strategy::Cfsopa),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

/// A transmit-power assignment with its achieved objective and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Per-node transmit powers P₀…P_{N−1}, all ≥ 0 with Σ ≤ budget.
    pub powers: Vec<f64>,
    /// Achieved objective (CF; capacity for [`Strategy::Copa`]).
    pub objective: f64,
    pub strategy: Strategy,
    /// Relative stationarity residual at the returned point.
    pub kkt_residual: f64,
    /// Solver iterations (0 for closed-form strategies).
    pub iterations: usize,
    /// Σ powers actually assigned.
    pub budget_used: f64,
    /// The power budget P_tot the strategy was given.
    pub budget: f64,
    /// Whether the solver met its tolerance (true for closed forms).
    pub converged: bool,
}

impl Allocation {
    fn assert_feasible(&self) {
        assert!(
            self.powers.iter().all(|&p| p >= 0.0),
            "negative power in allocation"
        );
        assert!(
            self.budget_used <= self.budget + 1e-9,
            "allocation exceeds budget: {} > {}",
            self.budget_used,
            self.budget
        );
    }
}

/// Solver controls for the gradient-based strategies.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Verify the forward-mode gradient against central finite differences
    /// at the starting point.
    pub grad_check: bool,
    /// Projected-gradient stationarity tolerance.
    pub tol: f64,
    /// Iteration cap per start.
    pub max_iter: usize,
    /// Number of deterministic multi-starts.
    pub starts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            grad_check: false,
            tol: 1e-8,
            max_iter: 500,
            starts: 5,
        }
    }
}

fn validate_budget(p_tot: f64) -> Result<()> {
    if !(p_tot > 0.0) {
        return Err(Error::domain(
            "optimizer",
            format!("P_tot = {p_tot} must be > 0"),
        ));
    }
    Ok(())
}

/// Uniform power allocation P_i = P_tot/N.
pub fn upa(chain: &RelayChain, p_tot: f64, controls: &CfControls) -> Result<Allocation> {
    validate_budget(p_tot)?;
    let n = chain.n_hops();
    let powers = vec![p_tot / n as f64; n];
    let objective = cf(chain, &powers, controls)?.cf;
    let mut alloc = Allocation {
        budget_used: powers.iter().sum(),
        powers,
        objective,
        strategy: Strategy::Upa,
        kkt_residual: f64::NAN,
        iterations: 0,
        budget: p_tot,
        converged: true,
    };
    alloc.kkt_residual = kkt_residual(chain, &alloc, ObjectiveKind::Cf, controls)?;
    alloc.assert_feasible();
    Ok(alloc)
}

/// The common-power subproblem: maximize CF(x·1) over x ∈ (0, p_tot/N].
fn common_power_argmax(
    chain: &RelayChain,
    p_tot: f64,
    controls: &CfControls,
) -> Result<solver::Scan1d> {
    let n = chain.n_hops();
    let x_max = p_tot / n as f64;
    let objective = |x: f64| -> Result<f64> {
        let pt = vec![x; n];
        Ok(cf(chain, &pt, controls)?.cf)
    };
    solver::maximize_1d(x_max, 64, 1e-10, &objective)
}

/// CF-suboptimal uniform power: all nodes transmit the common power x that
/// maximizes CF over x ∈ (0, P_tot/N].
pub fn cfso_upa(
    chain: &RelayChain,
    p_tot: f64,
    controls: &CfControls,
    _opts: &SolverOptions,
) -> Result<Allocation> {
    validate_budget(p_tot)?;
    let scan = common_power_argmax(chain, p_tot, controls)?;
    let powers = vec![scan.x; chain.n_hops()];
    let mut alloc = Allocation {
        budget_used: powers.iter().sum(),
        powers,
        objective: scan.value,
        strategy: Strategy::CfsoUpa,
        kkt_residual: f64::NAN,
        iterations: scan.evaluations,
        budget: p_tot,
        converged: !scan.flat,
    };
    alloc.kkt_residual = kkt_residual(chain, &alloc, ObjectiveKind::Cf, controls)?;
    alloc.assert_feasible();
    Ok(alloc)
}

/// Deterministic multi-start points: a warm start at the common-power
/// optimum, a log ladder of scaled uniform vectors (the CF optimum can sit
/// orders of magnitude inside a generous budget), and two asymmetric ramps.
fn start_points(n: usize, p_tot: f64, starts: usize, warm: Option<f64>) -> Vec<Vec<f64>> {
    let uni = p_tot / n as f64;
    let mut pts: Vec<Vec<f64>> = Vec::new();
    if let Some(x) = warm {
        if x > 0.0 {
            pts.push(vec![x; n]);
        }
    }
    pts.push(vec![uni * 0.9; n]);
    pts.push(vec![uni * 0.009; n]);
    let ramp_total: f64 = (1..=n).map(|i| i as f64).sum();
    pts.push(
        (1..=n)
            .map(|i| 0.9 * p_tot * i as f64 / ramp_total)
            .collect(),
    );
    pts.push(
        (1..=n)
            .rev()
            .map(|i| 0.9 * p_tot * i as f64 / ramp_total)
            .collect(),
    );
    pts.push(vec![uni * 0.5; n]);
    pts.truncate(starts.max(1));
    pts.dedup();
    pts
}

fn check_gradient<G>(start: &[f64], value_and_grad: &G) -> Result<()>
where
    G: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (_, grad) = value_and_grad(start)?;
    for i in 0..start.len() {
        let h = 1e-5 * start[i].max(1e-6);
        let mut up = start.to_vec();
        up[i] += h;
        let mut dn = start.to_vec();
        dn[i] -= h;
        let fu = value_and_grad(&up)?.0;
        let fd = value_and_grad(&dn)?.0;
        let fd_grad = (fu - fd) / (2.0 * h);
        let scale = grad[i].abs().max(fd_grad.abs()).max(1e-12);
        if (grad[i] - fd_grad).abs() > 1e-5 * scale {
            return Err(Error::config(
                "grad_check",
                format!(
                    "forward-mode gradient {} vs finite difference {} at component {i}",
                    grad[i], fd_grad
                ),
            ));
        }
    }
    Ok(())
}

fn solve_multistart(
    chain: &RelayChain,
    p_tot: f64,
    controls: &CfControls,
    opts: &SolverOptions,
    kind: ObjectiveKind,
    strategy: Strategy,
) -> Result<Allocation> {
    validate_budget(p_tot)?;
    let value = |pt: &[f64]| -> Result<f64> {
        match kind {
            ObjectiveKind::Cf => Ok(cf(chain, pt, controls)?.cf),
            ObjectiveKind::Capacity => {
                if pt.iter().any(|&p| p <= 0.0) {
                    return Ok(0.0);
                }
                Ok(capacity_grad(chain, pt, controls)?.0)
            }
        }
    };
    let value_and_grad = |pt: &[f64]| -> Result<(f64, Vec<f64>)> {
        match kind {
            ObjectiveKind::Cf => {
                let (r, g) = cf_grad(chain, pt, controls)?;
                Ok((r.cf, g))
            }
            ObjectiveKind::Capacity => capacity_grad(chain, pt, controls),
        }
    };

    // warm start from the cheap 1-D common-power solve; it lands at the
    // exact optimum for symmetric chains and near it otherwise
    let warm = match kind {
        ObjectiveKind::Cf => Some(common_power_argmax(chain, p_tot, controls)?.x),
        ObjectiveKind::Capacity => None,
    };
    let starts = start_points(chain.n_hops(), p_tot, opts.starts, warm);
    if opts.grad_check {
        // probe away from any stationary point so the relative comparison
        // is meaningful
        let probe = vec![0.9 * p_tot / chain.n_hops() as f64; chain.n_hops()];
        check_gradient(&probe, &value_and_grad)?;
    }
    let mut best: Option<solver::SolveOutcome> = None;
    let mut total_iter = 0usize;
    for s in &starts {
        let out = solver::maximize(s, p_tot, opts.tol, opts.max_iter, &value, &value_and_grad)?;
        total_iter += out.iterations;
        let better = match &best {
            None => true,
            Some(b) => out.value > b.value,
        };
        if better {
            best = Some(out);
        }
    }
    let mut best = best.expect("at least one start");

    if kind == ObjectiveKind::Capacity {
        // capacity is strictly increasing in every power: the optimum sits
        // on the budget face; pin it there exactly
        let sum: f64 = best.x.iter().sum();
        if sum > 0.0 && (p_tot - sum).abs() > 1e-12 * p_tot && sum >= p_tot * 0.9999 {
            for p in &mut best.x {
                *p *= p_tot / sum;
            }
            best.value = value(&best.x)?;
        }
    }

    let mut alloc = Allocation {
        budget_used: best.x.iter().sum(),
        powers: best.x,
        objective: best.value,
        strategy,
        kkt_residual: f64::NAN,
        iterations: total_iter,
        budget: p_tot,
        converged: best.converged,
    };
    alloc.kkt_residual = kkt_residual(chain, &alloc, kind, controls)?;
    alloc.assert_feasible();
    Ok(alloc)
}

/// CF-optimal power allocation: maximize the average CF over
/// {P ≥ 0, ΣP ≤ P_tot}.
pub fn cfopa(
    chain: &RelayChain,
    p_tot: f64,
    controls: &CfControls,
    opts: &SolverOptions,
) -> Result<Allocation> {
    solve_multistart(
        chain,
        p_tot,
        controls,
        opts,
        ObjectiveKind::Cf,
        Strategy::Cfopa,
    )
}

/// Capacity-optimal power allocation; the budget constraint is active at
/// the optimum.
pub fn copa(
    chain: &RelayChain,
    p_tot: f64,
    controls: &CfControls,
    opts: &SolverOptions,
) -> Result<Allocation> {
    solve_multistart(
        chain,
        p_tot,
        controls,
        opts,
        ObjectiveKind::Capacity,
        Strategy::Copa,
    )
}

/// Relative KKT stationarity residual of an allocation.
///
/// With μ the active-set mean of the partial derivatives, returns
/// max over active components of |∂f/∂Pᵢ − μ| normalized by
/// max(|μ|, |f|/P_tot); the floor keeps the residual meaningful in the
/// saturation regime where μ → 0, and the normalization makes the residual
/// invariant under rescaling the objective.
pub fn kkt_residual(
    chain: &RelayChain,
    alloc: &Allocation,
    kind: ObjectiveKind,
    controls: &CfControls,
) -> Result<f64> {
    if alloc.powers.iter().any(|&p| !(p > 0.0)) {
        // components pinned at zero carry inequality multipliers instead of
        // stationarity; the diagnostic only covers interior components
        if alloc.powers.iter().all(|&p| !(p > 0.0)) {
            return Err(Error::domain(
                "kkt_residual",
                "allocation has no positive components",
            ));
        }
    }
    let active: Vec<usize> = (0..alloc.powers.len())
        .filter(|&i| alloc.powers[i] > 1e-9)
        .collect();
    if active.is_empty() {
        return Err(Error::domain("kkt_residual", "no active components"));
    }
    // gradient evaluation needs strictly positive powers; lift pinned zeros
    // to a negligible level
    let pt: Vec<f64> = alloc
        .powers
        .iter()
        .map(|&p| p.max(1e-12 * alloc.budget))
        .collect();
    let (obj, grad) = match kind {
        ObjectiveKind::Cf => {
            let (r, g) = cf_grad(chain, &pt, controls)?;
            (r.cf, g)
        }
        ObjectiveKind::Capacity => capacity_grad(chain, &pt, controls)?,
    };
    let mu = active.iter().map(|&i| grad[i]).sum::<f64>() / active.len() as f64;
    let worst = active
        .iter()
        .map(|&i| (grad[i] - mu).abs())
        .fold(0.0, f64::max);
    let denom = mu.abs().max(obj.abs() / alloc.budget).max(1e-300);
    Ok(worst / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{HopProfile, PowerModel, Protocol};
    use approx::assert_relative_eq;

    fn controls() -> CfControls {
        CfControls::default()
    }

    fn fast_opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn upa_splits_evenly() {
        let chain = RelayChain::reference(2, 1, Protocol::Df).unwrap();
        let a = upa(&chain, 2.0, &controls()).unwrap();
        assert_eq!(a.powers, vec![1.0, 1.0]);
        let b = upa(&chain, 1.0, &controls()).unwrap();
        assert_eq!(b.powers, vec![0.5, 0.5]);
        // objective equals the CF of the uniform point
        let direct = cf(&chain, &a.powers, &controls()).unwrap().cf;
        assert_eq!(a.objective, direct);
    }

    #[test]
    fn cfso_upa_single_variable_problem_matches_cfopa_for_n1() {
        let chain = RelayChain::reference(1, 1, Protocol::Df).unwrap();
        let c = controls();
        let a = cfso_upa(&chain, 10.0, &c, &fast_opts()).unwrap();
        let b = cfopa(&chain, 10.0, &c, &fast_opts()).unwrap();
        assert_relative_eq!(a.objective, b.objective, max_relative = 1e-6);
    }

    #[test]
    fn cfso_upa_binds_budget_at_low_power() {
        let chain = RelayChain::reference(2, 1, Protocol::Df).unwrap();
        // −10 dB
        let a = cfso_upa(&chain, 0.1, &controls(), &fast_opts()).unwrap();
        assert_relative_eq!(a.powers[0], 0.05, max_relative = 1e-12);
    }

    #[test]
    fn cfso_upa_interior_at_high_budget() {
        let chain = RelayChain::reference(2, 1, Protocol::Df).unwrap();
        // 40 dB: the CF optimum is far inside the budget
        let a = cfso_upa(&chain, 1e4, &controls(), &fast_opts()).unwrap();
        assert!(a.powers[0] < 0.9 * 1e4 / 2.0, "x = {}", a.powers[0]);
        assert!(a.budget_used <= 1e4);
    }

    #[test]
    fn cfso_upa_matches_grid_scan_oracle() {
        // 1e-3-resolution scan over the common-power axis
        let hops = vec![HopProfile::new(2, 0.45, 4.0), HopProfile::new(1, 0.55, 4.0)];
        let chain =
            RelayChain::new(hops, Protocol::Df, 1.0, 1.0, PowerModel::reference(2)).unwrap();
        let c = controls();
        for &budget in &[0.1f64, 1.0, 100.0] {
            let a = cfso_upa(&chain, budget, &c, &fast_opts()).unwrap();
            let x_max = budget / 2.0;
            let mut best = 0.0f64;
            for i in 1..=1000 {
                let x = x_max * i as f64 / 1000.0;
                best = best.max(cf(&chain, &[x, x], &c).unwrap().cf);
            }
            assert!(
                a.objective >= best * (1.0 - 1e-4),
                "budget {budget}: {} < grid {best}",
                a.objective
            );
        }
    }

    #[test]
    fn cfopa_symmetric_chain_gives_symmetric_powers() {
        let chain = RelayChain::reference(2, 1, Protocol::Df).unwrap();
        let a = cfopa(&chain, 1.0, &controls(), &fast_opts()).unwrap();
        assert!(a.converged);
        assert_relative_eq!(a.powers[0], a.powers[1], max_relative = 1e-5);
        assert!(a.kkt_residual <= 1e-6, "kkt = {}", a.kkt_residual);
    }

    #[test]
    fn cfopa_beats_upa_and_cfso_upa_on_asymmetric_chain() {
        let hops = vec![HopProfile::new(1, 0.3, 4.0), HopProfile::new(1, 0.7, 4.0)];
        let chain =
            RelayChain::new(hops, Protocol::Df, 1.0, 1.0, PowerModel::reference(2)).unwrap();
        let c = controls();
        let o = fast_opts();
        let best = cfopa(&chain, 1.0, &c, &o).unwrap();
        let u = upa(&chain, 1.0, &c).unwrap();
        let su = cfso_upa(&chain, 1.0, &c, &o).unwrap();
        assert!(best.objective >= u.objective - 1e-12);
        assert!(best.objective >= su.objective - 1e-12);

        // at a budget below the critical point the constraint binds and the
        // long (weak) hop receives more than the uniform share
        let tight = cfopa(&chain, 0.3, &c, &o).unwrap();
        assert!(tight.budget_used > 0.3 * (1.0 - 1e-6));
        let u_tight = upa(&chain, 0.3, &c).unwrap();
        assert!(tight.powers[1] > u_tight.powers[1]);
    }

    #[test]
    fn cfopa_permutation_equivariance() {
        let hops = vec![HopProfile::new(2, 0.4, 4.0), HopProfile::new(1, 0.6, 4.0)];
        let chain = RelayChain::new(
            hops.clone(),
            Protocol::Df,
            1.0,
            1.0,
            PowerModel::reference(2),
        )
        .unwrap();
        let swapped = RelayChain::new(
            vec![hops[1].clone(), hops[0].clone()],
            Protocol::Df,
            1.0,
            1.0,
            PowerModel::reference(2),
        )
        .unwrap();
        let c = controls();
        let o = fast_opts();
        let a = cfopa(&chain, 1.0, &c, &o).unwrap();
        let b = cfopa(&swapped, 1.0, &c, &o).unwrap();
        assert_relative_eq!(a.powers[0], b.powers[1], max_relative = 1e-4);
        assert_relative_eq!(a.powers[1], b.powers[0], max_relative = 1e-4);
        assert_relative_eq!(a.objective, b.objective, max_relative = 1e-8);
    }

    #[test]
    fn copa_binds_budget_and_dominance_holds() {
        let chain = RelayChain::reference(2, 1, Protocol::Df).unwrap();
        let c = controls();
        let o = fast_opts();
        let p_tot = 10.0;
        let cap_opt = copa(&chain, p_tot, &c, &o).unwrap();
        assert_relative_eq!(cap_opt.budget_used, p_tot, max_relative = 1e-6);
        let cf_opt = cfopa(&chain, p_tot, &c, &o).unwrap();
        // objective dominance both ways
        let cap_at_cfopa = capacity_grad(&chain, &cf_opt.powers, &c).unwrap().0;
        assert!(cap_opt.objective >= cap_at_cfopa - 1e-9);
        let cf_at_copa = cf(&chain, &cap_opt.powers, &c).unwrap().cf;
        assert!(cf_opt.objective >= cf_at_copa - 1e-9);
    }

    #[test]
    fn copa_symmetric_equals_upa_capacity() {
        let chain = RelayChain::reference(2, 1, Protocol::Df).unwrap();
        let c = controls();
        let cap_opt = copa(&chain, 2.0, &c, &fast_opts()).unwrap();
        let u = upa(&chain, 2.0, &c).unwrap();
        let cap_u = capacity_grad(&chain, &u.powers, &c).unwrap().0;
        assert_relative_eq!(cap_opt.objective, cap_u, max_relative = 1e-6);
    }

    #[test]
    fn kkt_residual_small_at_optimum_large_at_upa() {
        let hops = vec![HopProfile::new(1, 0.25, 4.0), HopProfile::new(1, 0.75, 4.0)];
        let chain =
            RelayChain::new(hops, Protocol::Df, 1.0, 1.0, PowerModel::reference(2)).unwrap();
        let c = controls();
        let best = cfopa(&chain, 1.0, &c, &fast_opts()).unwrap();
        assert!(best.kkt_residual <= 1e-6);
        let u = upa(&chain, 1.0, &c).unwrap();
        assert!(u.kkt_residual > 1e-3, "upa kkt = {}", u.kkt_residual);
    }

    #[test]
    fn kkt_residual_scale_invariant_in_bandwidth() {
        let chain = RelayChain::reference(2, 1, Protocol::Df).unwrap();
        let c = controls();
        let u = upa(&chain, 1.0, &c).unwrap();
        let hops = chain.hops().to_vec();
        let big_b =
            RelayChain::new(hops, Protocol::Df, 10.0, 1.0, chain.power_model().clone()).unwrap();
        let r1 = kkt_residual(&chain, &u, ObjectiveKind::Cf, &c).unwrap();
        let r2 = kkt_residual(&big_b, &u, ObjectiveKind::Cf, &c).unwrap();
        assert_relative_eq!(r1, r2, max_relative = 1e-9);
    }

    #[test]
    fn grad_check_option_passes() {
        let chain = RelayChain::reference(2, 2, Protocol::Df).unwrap();
        let mut opts = fast_opts();
        opts.grad_check = true;
        let a = cfopa(&chain, 1.0, &controls(), &opts).unwrap();
        assert!(a.converged);
    }

    #[test]
    fn budget_monotonicity_of_cfopa() {
        let chain = RelayChain::reference(2, 1, Protocol::Df).unwrap();
        let c = controls();
        let o = fast_opts();
        let mut prev = 0.0;
        for &b in &[0.1, 0.5, 1.0, 5.0, 50.0] {
            let a = cfopa(&chain, b, &c, &o).unwrap();
            assert!(
                a.objective >= prev * (1.0 - 1e-9),
                "CF decreased: {} -> {} at budget {b}",
                prev,
                a.objective
            );
            prev = a.objective;
        }
    }
}
