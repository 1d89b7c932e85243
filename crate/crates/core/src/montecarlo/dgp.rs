//! `y_t = tau1 + tau2 t + tau3 t^theta + phi1 x_t + phi2 x_t^2 + u_t` with
//! `x_t = sum_{s<=t} v_s` and `[u_t, v_t]'` a bivariate VAR(1).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{GcprError, Result};
use crate::lrv::LrvSet;

/// Serial-correlation settings: eigenvalues of the VAR matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SerialSetting {
    A,
    B,
    C,
    D,
}

impl SerialSetting {
    pub const ALL: [SerialSetting; 4] = [Self::A, Self::B, Self::C, Self::D];

    pub fn eigenvalues(self) -> [f64; 2] {
        match self {
            Self::A => [0.0, 0.0],
            Self::B => [0.5, 0.3],
            Self::C => [0.7, 0.5],
            Self::D => [0.9, 0.7],
        }
    }

    pub fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for SerialSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for SerialSetting {
    type Err = GcprError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Self::A),
            "B" | "b" => Ok(Self::B),
            "C" | "c" => Ok(Self::C),
            "D" | "d" => Ok(Self::D),
            other => Err(GcprError::InvalidInput(format!("unknown setting `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub t_len: usize,
    pub theta0: f64,
    pub tau0: [f64; 3],
    pub phi0: [f64; 2],
    pub setting: SerialSetting,
    /// Correlation of the innovations (endogeneity).
    pub rho: f64,
    pub presample: usize,
    /// Draw a new rotation for the VAR matrix in every replication.
    pub redraw_rotation: bool,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            t_len: 100,
            theta0: 2.0,
            tau0: [7.0, 0.05, -5e-4],
            phi0: [5.0, 0.0],
            setting: SerialSetting::A,
            rho: 0.0,
            presample: 50,
            redraw_rotation: true,
        }
    }
}

impl DgpConfig {
    pub fn cell(setting: SerialSetting, rho: f64, t_len: usize) -> Self {
        Self {
            setting,
            rho,
            t_len,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_len < 2 {
            return Err(GcprError::InvalidInput("sample length must be at least 2".into()));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(GcprError::InvalidInput(format!(
                "innovation correlation must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// `A = H L H'` with `H = U (U'U)^{-1/2}` and `U` uniform on `[0,1]^{2x2}`.
/// Nearly singular draws of `U` are redrawn.
pub fn draw_var_matrix<R: Rng + ?Sized>(setting: SerialSetting, rng: &mut R) -> Matrix2<f64> {
    let [l1, l2] = setting.eigenvalues();
    loop {
        let u = Matrix2::new(rng.gen::<f64>(), rng.gen(), rng.gen(), rng.gen());
        if u.determinant().abs() < 1e-8 {
            continue;
        }
        let utu = u.transpose() * u;
        let eig = utu.symmetric_eigen();
        let inv_root = eig.eigenvectors
            * Matrix2::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
            * eig.eigenvectors.transpose();
        let h = u * inv_root;
        return h * Matrix2::from_diagonal(&nalgebra::Vector2::new(l1, l2)) * h.transpose();
    }
}

/// `n` post-presample observations of `w_t = A w_{t-1} + zeta_t`, started at
/// zero, with `zeta = [z1, rho z1 + sqrt(1-rho^2) z2]`.
pub fn generate_var1_errors<R: Rng + ?Sized>(
    a: &Matrix2<f64>,
    rho: f64,
    n: usize,
    presample: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let c = (1.0 - rho * rho).sqrt();
    let (mut u_prev, mut v_prev) = (0.0, 0.0);
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for step in 0..presample + n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let un = a[(0, 0)] * u_prev + a[(0, 1)] * v_prev + z1;
        let vn = a[(1, 0)] * u_prev + a[(1, 1)] * v_prev + rho * z1 + c * z2;
        u_prev = un;
        v_prev = vn;
        if step >= presample {
            u.push(un);
            v.push(vn);
        }
    }
    (u, v)
}

/// Assemble `(y, x)` from given error series.
pub fn build_sample(cfg: &DgpConfig, u: &[f64], v: &[f64]) -> Result<Dataset> {
    if u.len() != cfg.t_len || v.len() != cfg.t_len {
        return Err(GcprError::DimensionMismatch(format!(
            "error series of lengths {} and {} for T = {}",
            u.len(),
            v.len(),
            cfg.t_len
        )));
    }
    let mut x = Vec::with_capacity(cfg.t_len);
    let mut acc = 0.0;
    for vt in v {
        acc += vt;
        x.push(acc);
    }
    let y = (0..cfg.t_len)
        .map(|i| {
            let t = (i + 1) as f64;
            cfg.tau0[0]
                + cfg.tau0[1] * t
                + cfg.tau0[2] * t.powf(cfg.theta0)
                + cfg.phi0[0] * x[i]
                + cfg.phi0[1] * x[i] * x[i]
                + u[i]
        })
        .collect();
    Dataset::new(y, vec![x])
}

/// One sample together with the VAR matrix that generated it. When the
/// rotation is not redrawn, `fixed_a` supplies the matrix.
pub fn generate_gcpr_sample<R: Rng + ?Sized>(
    cfg: &DgpConfig,
    fixed_a: Option<&Matrix2<f64>>,
    rng: &mut R,
) -> Result<(Dataset, Matrix2<f64>)> {
    cfg.validate()?;
    let a = match (cfg.redraw_rotation, fixed_a) {
        (false, Some(a)) => *a,
        _ => draw_var_matrix(cfg.setting, rng),
    };
    let (u, v) = generate_var1_errors(&a, cfg.rho, cfg.t_len, cfg.presample, rng);
    Ok((build_sample(cfg, &u, &v)?, a))
}

/// Population long-run matrices of the VAR(1) errors: `Sigma = Gamma_0`
/// solving `Gamma_0 = A Gamma_0 A' + Sigma_zeta`, `Delta = Gamma_0 (I - A')^{-1}`.
pub fn true_lrv(a: &Matrix2<f64>, rho: f64) -> Result<LrvSet> {
    let sz = Matrix2::new(1.0, rho, rho, 1.0);
    // vec(Gamma) = (I - A kron A)^{-1} vec(Sigma_zeta), column-major vec.
    let kron = Matrix4::from_fn(|r, c| a[(r % 2, c % 2)] * a[(r / 2, c / 2)]);
    let lhs = Matrix4::identity() - kron;
    let rhs = Vector4::new(sz[(0, 0)], sz[(1, 0)], sz[(0, 1)], sz[(1, 1)]);
    let vec_g = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| GcprError::Degenerate("VAR(1) is not stationary".into()))?;
    let g0 = Matrix2::new(vec_g[0], vec_g[2], vec_g[1], vec_g[3]);
    let g0 = (g0 + g0.transpose()) * 0.5;
    let inv = (Matrix2::identity() - a.transpose())
        .try_inverse()
        .ok_or_else(|| GcprError::Degenerate("VAR(1) has a unit root".into()))?;
    let delta = g0 * inv;
    let to_d = |m: Matrix2<f64>| DMatrix::from_fn(2, 2, |r, c| m[(r, c)]);
    LrvSet::from_parts(to_d(g0), to_d(delta))
}

/// `Omega = (I - A)^{-1} Sigma_zeta (I - A')^{-1}`.
pub fn true_omega(a: &Matrix2<f64>, rho: f64) -> Option<Matrix2<f64>> {
    let sz = Matrix2::new(1.0, rho, rho, 1.0);
    let inv = (Matrix2::identity() - a).try_inverse()?;
    Some(inv * sz * inv.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn var_matrix_has_setting_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = draw_var_matrix(SerialSetting::D, &mut rng);
            let mut ev: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
            ev.sort_by(|x, y| y.total_cmp(x));
            assert!((ev[0] - 0.9).abs() < 1e-12 && (ev[1] - 0.7).abs() < 1e-12);
            assert!((a - a.transpose()).abs().max() < 1e-12);
        }
        assert_eq!(draw_var_matrix(SerialSetting::A, &mut rng), Matrix2::zeros());
    }

    #[test]
    fn zero_errors_give_exact_trend() {
        let cfg = DgpConfig {
            t_len: 10,
            ..DgpConfig::default()
        };
        let d = build_sample(&cfg, &[0.0; 10], &[0.0; 10]).unwrap();
        for (i, y) in d.y.iter().enumerate() {
            let t = (i + 1) as f64;
            assert!((y - (7.0 + 0.05 * t - 5e-4 * t * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn regressor_is_cumulated_shocks() {
        let cfg = DgpConfig {
            t_len: 20,
            ..DgpConfig::default()
        };
        let mut r1 = ChaCha8Rng::seed_from_u64(11);
        let (d, a) = generate_gcpr_sample(&cfg, None, &mut r1).unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(11);
        let a2 = draw_var_matrix(cfg.setting, &mut r2);
        let (_, v) = generate_var1_errors(&a2, cfg.rho, 20, 50, &mut r2);
        assert_eq!(a, a2);
        assert!((d.x[0][4] - v[..5].iter().sum::<f64>()).abs() < 1e-12);
        let mut r3 = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(generate_gcpr_sample(&cfg, None, &mut r3).unwrap().0, d);
    }

    #[test]
    fn true_lrv_matches_closed_form_omega() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = draw_var_matrix(SerialSetting::C, &mut rng);
        let lrv = true_lrv(&a, 0.5).unwrap();
        let om = true_omega(&a, 0.5).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((lrv.omega[(r, c)] - om[(r, c)]).abs() < 1e-10);
            }
        }
        let iid = true_lrv(&Matrix2::zeros(), 0.25).unwrap();
        assert!((iid.omega[(0, 1)] - 0.25).abs() < 1e-15);
        assert!(iid.delta_minus.iter().all(|v| v.abs() < 1e-15));
    }
}
