//! Distribution of `int_0^1 W(r)^2 dr` for a standard Brownian motion `W`.
//!
//! Upper-tail probabilities come from Smirnov's inversion formula
//!
//! `P(X > x) = (1/pi) sum_k (-1)^(k+1) int_{(2k-3/2)pi}^{(2k-1/2)pi}
//!             2 exp(-x v^2 / 2) / (v sqrt(-cos v)) dv`,
//!
//! evaluated with the substitution `v = (2k-1)pi + (pi/2) sin(phi)`, which
//! removes the endpoint singularities, and Gauss-Legendre quadrature.
//! Critical values are read from a shipped table generated from the same
//! formula (`examples/gen_wsq_table.rs`).

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{GcprError, Result};

const GL_NODES: usize = 64;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn nodes() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(GL_NODES))
}

/// Exact `P(int W^2 > x)`.
pub fn tail_probability(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let gl = nodes();
    let half_pi = 0.5 * PI;
    let mut total = 0.0;
    for k in 1..100_000 {
        let centre = (2 * k - 1) as f64 * PI;
        let mut term = 0.0;
        for &(s, w) in gl {
            let phi = half_pi * s;
            let v = centre + half_pi * phi.sin();
            let jac = half_pi * phi.cos() / (half_pi * phi.sin()).cos().sqrt();
            term += w * half_pi * 2.0 * (-0.5 * x * v * v).exp() / v * jac;
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    (total / PI).clamp(0.0, 1.0)
}

/// Quantile `c` with `P(int W^2 > c) = p`, by bisection on the exact tail.
pub fn exact_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (1e-8, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail_probability(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Shipped `(tail_prob, quantile)` table, ascending in `tail_prob`.
pub struct QuantileTable {
    rows: Vec<(f64, f64)>,
}

const TABLE_CSV: &str = include_str!("../data/wsq_quantiles.csv");

impl QuantileTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                header_seen = true;
                if line == "tail_prob,quantile" {
                    continue;
                }
            }
            let parse_err = || GcprError::Parse {
                line: i + 1,
                message: format!("bad table row `{line}`"),
            };
            let (p, q) = line.split_once(',').ok_or_else(parse_err)?;
            let p: f64 = p.trim().parse().map_err(|_| parse_err())?;
            let q: f64 = q.trim().parse().map_err(|_| parse_err())?;
            rows.push((p, q));
        }
        if rows.len() < 2 || rows.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 < w[0].1)) {
            return Err(GcprError::InvalidInput(
                "quantile table must be strictly monotone with at least two rows".into(),
            ));
        }
        Ok(Self { rows })
    }

    /// The table compiled into the library.
    pub fn shipped() -> &'static QuantileTable {
        static TABLE: OnceLock<QuantileTable> = OnceLock::new();
        TABLE.get_or_init(|| QuantileTable::parse(TABLE_CSV).expect("shipped table is valid"))
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    pub fn min_prob(&self) -> f64 {
        self.rows[0].0
    }

    /// Upper-tail quantile, linear in `ln(tail_prob)` between table rows.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        let (min, max) = (self.rows[0].0, self.rows[self.rows.len() - 1].0);
        if !(p >= min * (1.0 - 1e-12)) {
            return Err(GcprError::TableResolution { prob: p, min });
        }
        if p > max {
            return Err(GcprError::InvalidInput(format!(
                "tail probability {p} above table range {max}"
            )));
        }
        let i = self.rows.partition_point(|r| r.0 < p).max(1).min(self.rows.len() - 1);
        let (p0, q0) = self.rows[i - 1];
        let (p1, q1) = self.rows[i];
        let w = ((p.max(min)).ln() - p0.ln()) / (p1.ln() - p0.ln());
        Ok(q0 + w.clamp(0.0, 1.0) * (q1 - q0))
    }
}

/// Bonferroni critical value `c` with `P(int W^2 >= c) = alpha / m`.
pub fn critical_value(alpha: f64, m: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || m == 0 {
        return Err(GcprError::InvalidInput(format!(
            "need 0 < alpha < 1 and at least one block (alpha {alpha}, blocks {m})"
        )));
    }
    let p = alpha / m as f64;
    if p >= 0.5 {
        return Err(GcprError::InvalidInput(format!("alpha / M = {p} must be below 0.5")));
    }
    QuantileTable::shipped().quantile(p)
}

/// Probability grid used for the shipped table: log-spaced in both tails
/// from `min_prob`, 2001 points.
pub fn table_grid(min_prob: f64, half: usize) -> Vec<f64> {
    let (a, b) = (min_prob.ln(), 0.5f64.ln());
    let upper: Vec<f64> = (0..=half)
        .map(|i| (a + (b - a) * i as f64 / half as f64).exp())
        .collect();
    let mut grid = upper.clone();
    grid.extend(upper[..half].iter().rev().map(|p| 1.0 - p));
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let s: f64 = nodes().iter().map(|&(x, w)| w * x.powi(6)).sum();
        assert!((s - 2.0 / 7.0).abs() < 1e-14);
        let total: f64 = nodes().iter().map(|&(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-13);
    }

    #[test]
    fn tail_is_monotone_and_bounded() {
        let xs = [0.02, 0.1, 0.29, 0.5, 1.0, 2.0, 5.0];
        let ps: Vec<f64> = xs.iter().map(|&x| tail_probability(x)).collect();
        assert!(ps.windows(2).all(|w| w[1] < w[0]));
        assert!(ps[0] < 1.0 && ps[6] > 0.0);
    }

    #[test]
    fn table_lookup_interpolates() {
        let t = QuantileTable::parse("# gen\ntail_prob,quantile\n0.01,3\n0.1,1\n").unwrap();
        let mid = (0.01f64 * 0.1).sqrt();
        assert!((t.quantile(mid).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(t.quantile(0.001), Err(GcprError::TableResolution { .. })));
    }

    #[test]
    fn grid_shape() {
        let g = table_grid(5e-5, 1000);
        assert_eq!(g.len(), 2001);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!((g[1000] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn critical_values_grow_with_blocks() {
        assert!(critical_value(0.05, 8).unwrap() > critical_value(0.05, 4).unwrap());
        assert!(critical_value(0.01, 1).unwrap() > critical_value(0.05, 1).unwrap());
    }
}
