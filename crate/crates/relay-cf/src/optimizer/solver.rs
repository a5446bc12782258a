//! Constrained maximization machinery shared by the allocation strategies:
//! projection onto {P ≥ 0, ΣP ≤ budget}, spectral projected-gradient ascent
//! with backtracking, a Newton polish from finite-difference Hessians of the
//! exact gradients, and a guarded golden-section search for the
//! one-dimensional subproblems.

use crate::error::{Error, Result};

/// Euclidean projection onto {x ≥ 0, Σx ≤ budget}.
pub(crate) fn project(x: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    // Euclidean projection onto the simplex Σ = budget, x ≥ 0
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - budget) / (k + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    x.iter().map(|&v| (v - tau).max(0.0)).collect()
}

/// ‖x − proj(x + g)‖∞, the projected-gradient stationarity residual.
pub(crate) fn projected_gradient_norm(x: &[f64], g: &[f64], budget: f64) -> f64 {
    let stepped: Vec<f64> = x.iter().zip(g).map(|(&xi, &gi)| xi + gi).collect();
    let proj = project(&stepped, budget);
    x.iter()
        .zip(&proj)
        .map(|(&a, &b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub(crate) struct SolveOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximize a smooth objective over {x ≥ 0, Σx ≤ budget} from one start.
///
/// Spectral (Barzilai-Borwein) projected-gradient ascent with an Armijo
/// backtracking line search, followed by an active-set Newton polish using
/// central-difference Hessians of the supplied exact gradient.
pub(crate) fn maximize<V, G>(
    start: &[f64],
    budget: f64,
    tol: f64,
    max_iter: usize,
    value: &V,
    value_and_grad: &G,
) -> Result<SolveOutcome>
where
    V: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = start.len();
    let mut x = project(start, budget);
    let (mut f, mut g) = value_and_grad(&x)?;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut alpha = budget.max(1e-12);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for _ in 0..max_iter {
        iterations += 1;
        if projected_gradient_norm(&x, &g, budget) <= tol {
            converged = true;
            break;
        }
        // BB step from the last accepted pair
        if let Some((px, pg)) = &prev {
            let mut sty = 0.0;
            let mut sts = 0.0;
            for i in 0..n {
                let s = x[i] - px[i];
                let y = pg[i] - g[i]; // gradient difference of −f
                sty += s * y;
                sts += s * s;
            }
            if sty > 0.0 && sts > 0.0 {
                alpha = (sts / sty).clamp(1e-10 * budget, 1e10 * budget);
            }
        }
        // backtracking on the projected arc
        let mut accepted = false;
        let mut a = alpha;
        for _ in 0..50 {
            let cand: Vec<f64> = x.iter().zip(&g).map(|(&xi, &gi)| xi + a * gi).collect();
            let cand = project(&cand, budget);
            let dir_gain: f64 = g
                .iter()
                .zip(cand.iter().zip(&x))
                .map(|(&gi, (&c, &xi))| gi * (c - xi))
                .sum();
            let moved = cand.iter().zip(&x).any(|(&c, &xi)| c != xi);
            if !moved {
                break;
            }
            let fc = value(&cand)?;
            if fc >= f + 1e-4 * dir_gain {
                prev = Some((x.clone(), g.clone()));
                x = cand;
                let eval = value_and_grad(&x)?;
                f = eval.0;
                g = eval.1;
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if !accepted {
            // no admissible step: either at a stationary point or the
            // objective is locally flat
            converged = projected_gradient_norm(&x, &g, budget) <= tol * 10.0;
            break;
        }
    }

    // Newton polish drives the stationarity residual well below tol
    newton_polish(&mut x, &mut f, &mut g, budget, tol, value, value_and_grad)?;
    converged = converged || projected_gradient_norm(&x, &g, budget) <= tol;

    Ok(SolveOutcome {
        value: f,
        x,
        iterations,
        converged,
    })
}

fn newton_polish<V, G>(
    x: &mut Vec<f64>,
    f: &mut f64,
    g: &mut Vec<f64>,
    budget: f64,
    tol: f64,
    value: &V,
    value_and_grad: &G,
) -> Result<()>
where
    V: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x.len();
    for _ in 0..12 {
        if projected_gradient_norm(x, g, budget) <= tol * 1e-2 {
            break;
        }
        let slack = budget - x.iter().sum::<f64>();
        let on_budget = slack <= 1e-9 * budget;
        // free coordinates: strictly positive ones
        let free: Vec<usize> = (0..n).filter(|&i| x[i] > 1e-12 * budget).collect();
        let k = free.len();
        if k == 0 {
            break;
        }
        // central-difference Hessian columns of the exact gradient
        let mut h_mat = vec![vec![0.0f64; k]; k];
        let mut ok = true;
        for (col, &j) in free.iter().enumerate() {
            let h = (1e-6 * budget).min(0.49 * x[j]);
            if h <= 0.0 {
                ok = false;
                break;
            }
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let gp = value_and_grad(&xp)?.1;
            let gm = value_and_grad(&xm)?.1;
            for (row, &i) in free.iter().enumerate() {
                h_mat[row][col] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        if !ok {
            break;
        }
        for r in 0..k {
            for c in 0..r {
                let s = 0.5 * (h_mat[r][c] + h_mat[c][r]);
                h_mat[r][c] = s;
                h_mat[c][r] = s;
            }
        }
        // Newton step: interior solves H s = −g; on the budget face solve
        // the equality-constrained KKT system with Σs = 0
        let dim = if on_budget { k + 1 } else { k };
        let mut a = vec![vec![0.0f64; dim]; dim];
        let mut rhs = vec![0.0f64; dim];
        for r in 0..k {
            for c in 0..k {
                a[r][c] = h_mat[r][c];
            }
            rhs[r] = -g[free[r]];
        }
        if on_budget {
            let mu = free.iter().map(|&i| g[i]).sum::<f64>() / k as f64;
            for r in 0..k {
                a[r][k] = -1.0;
                a[k][r] = 1.0;
                rhs[r] = -(g[free[r]] - mu);
            }
        }
        let Some(sol) = solve_linear(a, rhs) else {
            break;
        };
        // damped, projected step with monotone acceptance
        let mut improved = false;
        let mut beta = 1.0;
        for _ in 0..8 {
            let mut cand = x.clone();
            for (idx, &i) in free.iter().enumerate() {
                cand[i] += beta * sol[idx];
            }
            let cand = project(&cand, budget);
            let fc = value(&cand)?;
            if fc >= *f - 1e-15 * f.abs() {
                let eval = value_and_grad(&cand)?;
                *x = cand;
                *f = eval.0;
                *g = eval.1;
                improved = true;
                break;
            }
            beta *= 0.25;
        }
        if !improved {
            break;
        }
    }
    Ok(())
}

/// Dense LU solve with partial pivoting; None on a singular system.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let (pivot, pmax) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if pmax < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

pub(crate) struct Scan1d {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
    /// The objective was numerically flat across the whole scan.
    pub flat: bool,
}

/// Smallest pre-scan point relative to the upper bound; the CF optimum can
/// sit many decades below a generous budget.
const SCAN_SPAN_DECADES: f64 = 9.0;

/// Maximize a unimodal objective over (0, hi]: log-spaced coarse pre-scan
/// (64 points by default) to bracket the peak, then golden-section
/// refinement. The right endpoint is always a candidate so budget-binding
/// optima are returned exactly.
pub(crate) fn maximize_1d<F>(hi: f64, scan_points: usize, rel_tol: f64, f: &F) -> Result<Scan1d>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(hi > 0.0) {
        return Err(Error::domain("maximize_1d", "upper bound must be positive"));
    }
    let mut evals = 0usize;
    let mut eval = |x: f64| -> Result<f64> {
        evals += 1;
        f(x)
    };
    // log-spaced grid ending exactly at hi
    let ratio = 10f64.powf(SCAN_SPAN_DECADES / (scan_points - 1) as f64);
    let mut xs = vec![0.0; scan_points];
    xs[scan_points - 1] = hi;
    for i in (0..scan_points - 1).rev() {
        xs[i] = xs[i + 1] / ratio;
    }
    let mut vs = Vec::with_capacity(scan_points);
    for &x in &xs {
        vs.push(eval(x)?);
    }
    let (kbest, &vbest) = vs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let vmin = vs.iter().cloned().fold(f64::INFINITY, f64::min);
    if (vbest - vmin).abs() <= 1e-15 * vbest.abs().max(1e-300) {
        // flat objective: report the boundary
        return Ok(Scan1d {
            x: hi,
            value: vs[scan_points - 1],
            evaluations: evals,
            flat: true,
        });
    }
    let mut lo = if kbest == 0 {
        xs[0] / ratio
    } else {
        xs[kbest - 1]
    };
    let mut up = if kbest + 1 < scan_points {
        xs[kbest + 1]
    } else {
        hi
    };
    // golden-section on [lo, up], tolerance relative to the bracket
    const INV_PHI: f64 = 0.618033988749894848;
    let mut x1 = up - INV_PHI * (up - lo);
    let mut x2 = lo + INV_PHI * (up - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while up - lo > rel_tol * up {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (up - lo);
            f2 = eval(x2)?;
        } else {
            up = x2;
            x2 = x1;
            f2 = f1;
            x1 = up - INV_PHI * (up - lo);
            f1 = eval(x1)?;
        }
    }
    let (mut xstar, mut vstar) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    // budget-binding check: never return an interior point that loses to
    // the right endpoint
    if vs[scan_points - 1] >= vstar {
        xstar = hi;
        vstar = vs[scan_points - 1];
    }
    if vbest > vstar {
        xstar = xs[kbest];
        vstar = vbest;
    }
    Ok(Scan1d {
        x: xstar,
        value: vstar,
        evaluations: evals,
        flat: false,
    })
}
