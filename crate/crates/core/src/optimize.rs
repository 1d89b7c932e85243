//! Derivative-free scalar and simplex minimizers used for the trend powers.

use crate::error::Result;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone)]
pub struct GoldenResult {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
    /// Final bracket width.
    pub width: f64,
    /// Best objective value after each evaluation (non-increasing).
    pub best_trace: Vec<f64>,
}

/// Golden-section search on `[lo, hi]` until the bracket is narrower than
/// `tol`. `start` is an already evaluated point (e.g. the grid argmin) that
/// seeds the running best, so the result is never worse than it.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, start: (f64, f64), tol: f64) -> Result<GoldenResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut best = start;
    let mut trace = vec![best.1];
    let mut evals = 0usize;
    let consider = |x: f64, fx: f64, best: &mut (f64, f64), trace: &mut Vec<f64>| {
        if fx < best.1 || (fx == best.1 && x < best.0) {
            *best = (x, fx);
        }
        trace.push(best.1);
    };

    if b - a > tol {
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = f(c)?;
        let mut fd = f(d)?;
        evals += 2;
        consider(c, fc, &mut best, &mut trace);
        consider(d, fd, &mut best, &mut trace);
        while b - a > tol {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = f(c)?;
                evals += 1;
                consider(c, fc, &mut best, &mut trace);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = f(d)?;
                evals += 1;
                consider(d, fd, &mut best, &mut trace);
            }
            if evals > 10_000 {
                break;
            }
        }
    }
    Ok(GoldenResult {
        x: best.0,
        fx: best.1,
        evaluations: evals,
        width: b - a,
        best_trace: trace,
    })
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead minimization. Infeasible points should evaluate to `+inf`.
pub fn nelder_mead<F>(mut f: F, start: &[f64], step: f64, xtol: f64, max_iter: usize) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        let fp = f(&p);
        simplex.push((p, fp));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        order(&mut simplex);
        let diameter = simplex[1..]
            .iter()
            .map(|(p, _)| {
                p.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter <= xtol && simplex[0].1.is_finite() {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(p, _)| p[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (w - c)).collect() };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fcon) = if fr < worst.1 {
            let p = along(-0.5);
            let fp = f(&p);
            (p, fp)
        } else {
            let p = along(0.5);
            let fp = f(&p);
            (p, fp)
        };
        if fcon < worst.1.min(fr) || (fcon.is_finite() && !worst.1.is_finite()) {
            simplex[n] = (contracted, fcon);
            continue;
        }
        let best = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let p: Vec<f64> = best.iter().zip(&entry.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
            let fp = f(&p);
            *entry = (p, fp);
        }
    }
    order(&mut simplex);
    let (x, fx) = simplex.swap_remove(0);
    SimplexResult {
        x,
        fx,
        iterations,
        converged,
    }
}
